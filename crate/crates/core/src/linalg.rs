//! Fixed-size dense linear algebra on `[[T; N]; N]`.

use crate::tol;
use crate::Real;

pub type Mat<T, const N: usize> = [[T; N]; N];
pub type Vector<T, const N: usize> = [T; N];

pub fn zeros<T: Real, const N: usize>() -> Mat<T, N> {
    [[T::zero(); N]; N]
}

pub fn identity<T: Real, const N: usize>() -> Mat<T, N> {
    let mut m = zeros();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

pub fn diag<T: Real, const N: usize>(d: [T; N]) -> Mat<T, N> {
    let mut m = zeros();
    for i in 0..N {
        m[i][i] = d[i];
    }
    m
}

pub fn transpose<T: Real, const N: usize>(a: &Mat<T, N>) -> Mat<T, N> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[j][i]))
}

pub fn mul<T: Real, const N: usize>(a: &Mat<T, N>, b: &Mat<T, N>) -> Mat<T, N> {
    let mut c = zeros();
    for i in 0..N {
        for k in 0..N {
            let aik = a[i][k];
            for j in 0..N {
                c[i][j] = c[i][j] + aik * b[k][j];
            }
        }
    }
    c
}

/// `aᵀ b`
pub fn tmul<T: Real, const N: usize>(a: &Mat<T, N>, b: &Mat<T, N>) -> Mat<T, N> {
    mul(&transpose(a), b)
}

/// `aᵀ g a`
pub fn congruence<T: Real, const N: usize>(a: &Mat<T, N>, g: &Mat<T, N>) -> Mat<T, N> {
    mul(&transpose(a), &mul(g, a))
}

pub fn mat_vec<T: Real, const N: usize>(a: &Mat<T, N>, v: &Vector<T, N>) -> Vector<T, N> {
    std::array::from_fn(|i| (0..N).fold(T::zero(), |s, j| s + a[i][j] * v[j]))
}

pub fn add<T: Real, const N: usize>(a: &Mat<T, N>, b: &Mat<T, N>) -> Mat<T, N> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + b[i][j]))
}

pub fn sub<T: Real, const N: usize>(a: &Mat<T, N>, b: &Mat<T, N>) -> Mat<T, N> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] - b[i][j]))
}

pub fn scale<T: Real, const N: usize>(a: &Mat<T, N>, s: T) -> Mat<T, N> {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] * s))
}

pub fn trace<T: Real, const N: usize>(a: &Mat<T, N>) -> T {
    (0..N).fold(T::zero(), |s, i| s + a[i][i])
}

pub fn sym<T: Real, const N: usize>(a: &Mat<T, N>) -> Mat<T, N> {
    let half = T::lit(0.5);
    std::array::from_fn(|i| std::array::from_fn(|j| half * (a[i][j] + a[j][i])))
}

pub fn frobenius<T: Real, const N: usize>(a: &Mat<T, N>) -> T {
    a.iter().flatten().fold(T::zero(), |s, &v| s + v * v).sqrt()
}

pub fn max_abs<T: Real, const N: usize>(a: &Mat<T, N>) -> T {
    a.iter().flatten().fold(T::zero(), |s, &v| s.max(v.abs()))
}

pub fn dot<T: Real, const N: usize>(a: &Vector<T, N>, b: &Vector<T, N>) -> T {
    (0..N).fold(T::zero(), |s, i| s + a[i] * b[i])
}

pub fn norm<T: Real, const N: usize>(a: &Vector<T, N>) -> T {
    dot(a, a).sqrt()
}

pub fn cross<T: Real>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Rotation of the plane by `theta`.
pub fn rot2<T: Real>(theta: T) -> Mat<T, 2> {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

/// LU factorization with partial pivoting; `None` if exactly singular.
fn lu<T: Real, const N: usize>(a: &Mat<T, N>) -> Option<(Mat<T, N>, [usize; N], T)> {
    let mut m = *a;
    let mut perm: [usize; N] = std::array::from_fn(|i| i);
    let mut sign = T::one();
    for k in 0..N {
        let p = (k..N).max_by(|&i, &j| m[i][k].abs().partial_cmp(&m[j][k].abs()).unwrap())?;
        if m[p][k] == T::zero() {
            return None;
        }
        if p != k {
            m.swap(p, k);
            perm.swap(p, k);
            sign = -sign;
        }
        for i in k + 1..N {
            let f = m[i][k] / m[k][k];
            m[i][k] = f;
            for j in k + 1..N {
                m[i][j] = m[i][j] - f * m[k][j];
            }
        }
    }
    Some((m, perm, sign))
}

pub fn det<T: Real, const N: usize>(a: &Mat<T, N>) -> T {
    match N {
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        3 => {
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        }
        _ => match lu(a) {
            Some((m, _, sign)) => (0..N).fold(sign, |d, i| d * m[i][i]),
            None => T::zero(),
        },
    }
}

/// Solves `a x = b`; `None` if `a` is singular.
pub fn solve<T: Real, const N: usize>(a: &Mat<T, N>, b: &Vector<T, N>) -> Option<Vector<T, N>> {
    let (m, perm, _) = lu(a)?;
    let mut x: Vector<T, N> = std::array::from_fn(|i| b[perm[i]]);
    for i in 0..N {
        for j in 0..i {
            x[i] = x[i] - m[i][j] * x[j];
        }
    }
    for i in (0..N).rev() {
        for j in i + 1..N {
            x[i] = x[i] - m[i][j] * x[j];
        }
        x[i] = x[i] / m[i][i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Inverse, or `None` if singular.
pub fn inverse<T: Real, const N: usize>(a: &Mat<T, N>) -> Option<Mat<T, N>> {
    if N == 2 {
        let d = det(a);
        if d == T::zero() || !d.is_finite() {
            return None;
        }
        let mut r = zeros();
        r[0][0] = a[1][1] / d;
        r[0][1] = -a[0][1] / d;
        r[1][0] = -a[1][0] / d;
        r[1][1] = a[0][0] / d;
        return Some(r);
    }
    let mut cols = [[T::zero(); N]; N];
    for (j, col) in cols.iter_mut().enumerate() {
        let mut e = [T::zero(); N];
        e[j] = T::one();
        *col = solve(a, &e)?;
    }
    Some(transpose(&cols))
}

/// Symmetric eigen-decomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// the columns of the second matrix.
pub fn sym_eigen<T: Real, const N: usize>(a: &Mat<T, N>) -> ([T; N], Mat<T, N>) {
    let mut m = sym(a);
    let mut v = identity::<T, N>();
    let scale = frobenius(&m).max(T::min_positive_value());
    let tol = T::lit(tol::JACOBI_TOL) * scale;
    for _sweep in 0..64 {
        let mut off = T::zero();
        for p in 0..N {
            for q in p + 1..N {
                off = off + m[p][q] * m[p][q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..N {
            for q in p + 1..N {
                if m[p][q] == T::zero() {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (T::lit(2.0) * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = (t * t + T::one()).sqrt().recip();
                let s = t * c;
                for k in 0..N {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..N {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: [usize; N] = std::array::from_fn(|i| i);
    order.sort_by(|&i, &j| m[j][j].partial_cmp(&m[i][i]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = std::array::from_fn(|k| m[order[k]][order[k]]);
    let vecs = std::array::from_fn(|i| std::array::from_fn(|k| v[i][order[k]]));
    (vals, vecs)
}

pub fn min_eigenvalue<T: Real, const N: usize>(a: &Mat<T, N>) -> T {
    let (vals, _) = sym_eigen(a);
    vals[N - 1]
}

/// Singular value decomposition `f = u diag(sigma) vᵀ`, `sigma` descending,
/// `u` and `v` orthogonal.
pub fn svd<T: Real, const N: usize>(f: &Mat<T, N>) -> (Mat<T, N>, [T; N], Mat<T, N>) {
    let (_, v) = sym_eigen(&tmul(f, f));
    let fv = mul(f, &v);
    // ‖F v_k‖ is accurate even where the eigenvalue of FᵀF is not.
    let sigma: [T; N] = std::array::from_fn(|k| (0..N).fold(T::zero(), |s, i| s + fv[i][k] * fv[i][k]).sqrt());
    let smax = sigma[0].max(T::min_positive_value());
    let cutoff = T::lit(tol::SVD_TOL) * smax;
    let mut u = zeros::<T, N>();
    let mut filled = [false; N];
    for k in 0..N {
        if sigma[k] > cutoff {
            for i in 0..N {
                u[i][k] = fv[i][k] / sigma[k];
            }
            filled[k] = true;
        }
    }
    // Re-orthonormalize, then complete the basis for tiny singular values.
    for k in 0..N {
        let mut col: [T; N] = if filled[k] {
            std::array::from_fn(|i| u[i][k])
        } else {
            [T::zero(); N]
        };
        let mut candidate = 0;
        loop {
            for j in 0..k {
                let d = (0..N).fold(T::zero(), |s, i| s + u[i][j] * col[i]);
                for i in 0..N {
                    col[i] = col[i] - d * u[i][j];
                }
            }
            let n = norm(&col);
            if n > T::lit(1e-6) {
                for i in 0..N {
                    u[i][k] = col[i] / n;
                }
                break;
            }
            col = [T::zero(); N];
            col[candidate] = T::one();
            candidate += 1;
        }
    }
    (u, sigma, v)
}

/// Rotation and signed singular values of `f`.
///
/// `f = u diag(s) vᵀ` with `u, v ∈ SO(n)` and `s₁ ≥ … ≥ |sₙ|`, the last
/// value carrying the sign of `det f`. The rotation `u vᵀ` is a nearest
/// point of `SO(n)` to `f`.
pub fn signed_svd<T: Real, const N: usize>(f: &Mat<T, N>) -> (Mat<T, N>, [T; N], Mat<T, N>) {
    let (mut u, mut s, mut v) = svd(f);
    if det(&v) < T::zero() {
        for row in v.iter_mut() {
            row[N - 1] = -row[N - 1];
        }
        for row in u.iter_mut() {
            row[N - 1] = -row[N - 1];
        }
    }
    if det(&u) < T::zero() {
        for row in u.iter_mut() {
            row[N - 1] = -row[N - 1];
        }
        s[N - 1] = -s[N - 1];
    }
    (u, s, v)
}

/// Nearest rotation to `f` and `dist²(f, SO(n))`.
pub fn nearest_rotation<T: Real, const N: usize>(f: &Mat<T, N>) -> (Mat<T, N>, T) {
    let (u, s, v) = signed_svd(f);
    let r = mul(&u, &transpose(&v));
    let d2 = s
        .iter()
        .fold(T::zero(), |acc, &si| acc + (si - T::one()) * (si - T::one()));
    (r, d2)
}

/// `dist²(f, SO(n))`.
pub fn dist2_so<T: Real, const N: usize>(f: &Mat<T, N>) -> T {
    nearest_rotation(f).1
}

/// Principal square root of an SPD matrix by the Denman–Beavers iteration.
pub fn sqrt_spd<T: Real, const N: usize>(g: &Mat<T, N>) -> Option<Mat<T, N>> {
    let mut y = *g;
    let mut z = identity::<T, N>();
    let half = T::lit(0.5);
    let rel = T::lit(tol::DB_REL_TOL);
    for _ in 0..tol::DB_MAX_ITER {
        let yi = inverse(&y)?;
        let zi = inverse(&z)?;
        let y_next = scale(&add(&y, &zi), half);
        let z_next = scale(&add(&z, &yi), half);
        let change = frobenius(&sub(&y_next, &y));
        let size = frobenius(&y_next);
        y = y_next;
        z = z_next;
        if change <= rel * size {
            return Some(sym(&y));
        }
    }
    None
}
