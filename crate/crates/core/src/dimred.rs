//! Thin films `Ω^h = ω × (−h/2, h/2)` with thickness-independent metrics.
//!
//! A midplate deformation `y: ω → ℝ³` compatible with the metrics,
//! `(∇y)ᵀ G ∇y = G̃₂ₓ₂`, carries a Cosserat vector `b` (the limiting
//! normal derivative of the film deformations). The bending functional
//!
//! ```text
//! I(y) = 1/24 ∫_ω Q₂(x′, (∇y)ᵀ G ∇b) dx′
//! ```
//!
//! is the limit of `E^h/h²`; [`recovery_energy`] evaluates `E^h/h²` on the
//! explicit recovery deformations `y + x₃ b + x₃²/2 d`.

use rayon::prelude::*;

use crate::geometry::MetricField;
use crate::grid::{GridDomain, GridFunction};
use crate::linalg::{self, Mat};
use crate::{point_f64, tol, Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LameParams<T> {
    pub lambda: T,
    pub mu: T,
}

impl<T: Real> LameParams<T> {
    pub fn new(lambda: T, mu: T) -> Result<Self> {
        if !(lambda > T::zero() && mu > T::zero()) {
            return Err(Error::InvalidInput(format!(
                "Lamé parameters must be positive (λ = {lambda}, μ = {mu})"
            )));
        }
        Ok(Self { lambda, mu })
    }
}

/// Midplate deformation with its fourth-order finite-difference gradient
/// `dy[node][s][k] = ∂_k y^s`.
#[derive(Clone, Debug)]
pub struct Midplate<T> {
    grid: GridDomain<T, 2>,
    y: Vec<[T; 3]>,
    dy: Vec<[[T; 2]; 3]>,
    g: MetricField<3>,
    gt: MetricField<3>,
}

fn lift<T: Real>(x: &[T; 2]) -> [T; 3] {
    [x[0], x[1], T::zero()]
}

fn column<T: Real>(d: &[[T; 2]; 3], k: usize) -> [T; 3] {
    [d[0][k], d[1][k], d[2][k]]
}

fn block2<T: Real>(a: &Mat<T, 3>) -> Mat<T, 2> {
    [[a[0][0], a[0][1]], [a[1][0], a[1][1]]]
}

fn g_dot<T: Real>(g: &Mat<T, 3>, a: &[T; 3], b: &[T; 3]) -> T {
    linalg::dot(a, &linalg::mat_vec(g, b))
}

fn not_spd<T: Real, const N: usize>(x: &[T; 2], g: &Mat<T, N>) -> Error {
    Error::NotSpd {
        point: point_f64(x),
        min_eigenvalue: linalg::min_eigenvalue(g).to_f64_lossy(),
    }
}

impl<T: Real> Midplate<T> {
    pub fn new(grid: GridDomain<T, 2>, y: Vec<[T; 3]>, g: MetricField<3>, gt: MetricField<3>) -> Result<Self> {
        for (name, m) in [("G", &g), ("G̃", &gt)] {
            if m.uses_var(2) {
                return Err(Error::InvalidInput(format!(
                    "metric {name} depends on x3; thin-film metrics must be thickness-independent"
                )));
            }
        }
        if y.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "midplate deformation has {} values for {} nodes",
                y.len(),
                grid.len()
            )));
        }
        if let Some(i) = y.iter().position(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFinite(format!(
                "midplate deformation at {:?}",
                point_f64(&grid.point(i))
            )));
        }
        let dy = grid.gradient4(&y)?;
        Ok(Self { grid, y, dy, g, gt })
    }

    pub fn from_fn(
        grid: GridDomain<T, 2>,
        y: impl Fn(&[T; 2]) -> [T; 3],
        g: MetricField<3>,
        gt: MetricField<3>,
    ) -> Result<Self> {
        let values = grid.points().iter().map(y).collect();
        Self::new(grid, values, g, gt)
    }

    pub fn grid(&self) -> &GridDomain<T, 2> {
        &self.grid
    }

    pub fn y(&self) -> &[[T; 3]] {
        &self.y
    }

    pub fn metric(&self) -> &MetricField<3> {
        &self.g
    }

    pub fn target(&self) -> &MetricField<3> {
        &self.gt
    }

    fn metrics_at(&self, node: usize) -> Result<(Mat<T, 3>, Mat<T, 3>)> {
        let x = lift(&self.grid.point(node));
        Ok((self.g.value_spd(&x)?, self.gt.value_spd(&x)?))
    }
}

/// Nodewise `(∇ₕy)ᵀ G ∇ₕy − G̃₂ₓ₂`.
pub fn compat_defect<T: Real>(mid: &Midplate<T>) -> Result<GridFunction<T, 2, Mat<T, 2>>> {
    let values = (0..mid.grid.len())
        .into_par_iter()
        .map(|i| {
            let (g, gt) = mid.metrics_at(i)?;
            let d = &mid.dy[i];
            Ok(std::array::from_fn(|a| {
                std::array::from_fn(|b| g_dot(&g, &column(d, a), &column(d, b)) - gt[a][b])
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    GridFunction::new(mid.grid.clone(), values)
}

/// Nodewise largest entry of `|(∇ₕy)ᵀ G ∇ₕy − G̃₂ₓ₂|`.
pub fn compat_residual<T: Real>(mid: &Midplate<T>) -> Result<GridFunction<T, 2, T>> {
    let d = compat_defect(mid)?;
    GridFunction::new(d.grid, d.values.iter().map(linalg::max_abs).collect())
}

#[derive(Clone, Debug)]
pub struct CosseratField<T> {
    pub b: GridFunction<T, 2, [T; 3]>,
    /// `G`-induced unit normal `M`.
    pub m: Vec<[T; 3]>,
    /// `max |⟨∂ᵢy, G M⟩|`.
    pub normal_defect: T,
    /// `max |⟨M, G M⟩ − 1|`; small only where the compatibility holds.
    pub unit_defect: T,
}

/// Cosserat vector
/// `b = ∇y G̃₂ₓ₂⁻¹ (G̃₁₃, G̃₂₃) + √det G̃ / √det G̃₂ₓ₂ · M`,
/// `M = √det G / √det G̃₂ₓ₂ · G⁻¹ (∂₁y × ∂₂y)`.
pub fn cosserat_b<T: Real>(mid: &Midplate<T>) -> Result<CosseratField<T>> {
    let rows = (0..mid.grid.len())
        .into_par_iter()
        .map(|i| {
            let x = mid.grid.point(i);
            let (g, gt) = mid.metrics_at(i)?;
            let d = &mid.dy[i];
            let (d1, d2) = (column(d, 0), column(d, 1));
            let nrm = linalg::cross(&d1, &d2);
            let len = linalg::norm(&nrm);
            if len < T::lit(tol::EPS_SURFACE) {
                return Err(Error::DegenerateSurface {
                    point: point_f64(&x),
                    norm: len.to_f64_lossy(),
                });
            }
            let gt2 = block2(&gt);
            let det2 = linalg::det(&gt2);
            let g_inv = linalg::inverse(&g).ok_or_else(|| not_spd(&x, &g))?;
            let m = linalg::mat_vec(&g_inv, &nrm).map(|c| c * linalg::det(&g).sqrt() / det2.sqrt());
            let t = linalg::solve(&gt2, &[gt[0][2], gt[1][2]]).ok_or_else(|| not_spd(&x, &gt2))?;
            let s = linalg::det(&gt).sqrt() / det2.sqrt();
            let b: [T; 3] = std::array::from_fn(|k| d1[k] * t[0] + d2[k] * t[1] + s * m[k]);
            let normal = g_dot(&g, &d1, &m).abs().max(g_dot(&g, &d2, &m).abs());
            let unit = (g_dot(&g, &m, &m) - T::one()).abs();
            Ok((b, m, normal, unit))
        })
        .collect::<Result<Vec<_>>>()?;
    let normal_defect = rows.iter().fold(T::zero(), |a, r| a.max(r.2));
    let unit_defect = rows.iter().fold(T::zero(), |a, r| a.max(r.3));
    let (b, m): (Vec<_>, Vec<_>) = rows.into_iter().map(|r| (r.0, r.1)).unzip();
    Ok(CosseratField {
        b: GridFunction::new(mid.grid.clone(), b)?,
        m,
        normal_defect,
        unit_defect,
    })
}

/// `Q₃(F) = μ|sym F|² + λ(tr F)²`, the Hessian at `Id` of the film density.
pub fn q3<T: Real>(lame: &LameParams<T>, f: &Mat<T, 3>) -> T {
    let s = linalg::sym(f);
    let n2 = s.iter().flatten().fold(T::zero(), |a, v| a + *v * *v);
    let tr = linalg::trace(f);
    lame.mu * n2 + lame.lambda * tr * tr
}

fn q3_bilinear<T: Real>(lame: &LameParams<T>, a: &Mat<T, 3>, b: &Mat<T, 3>) -> T {
    let (sa, sb) = (linalg::sym(a), linalg::sym(b));
    let inner = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .fold(T::zero(), |acc, (i, j)| acc + sa[i][j] * sb[i][j]);
    lame.mu * inner + lame.lambda * linalg::trace(a) * linalg::trace(b)
}

/// Closed-form plate form
/// `Q₂ = μ|Ṽ⁻¹ sym F Ṽ⁻¹|² + λμ/(λ+μ) (tr Ṽ⁻¹ sym F Ṽ⁻¹)²`, `Ṽ = G̃₂ₓ₂^{1/2}`.
pub fn q2_form<T: Real>(lame: &LameParams<T>, gt2: &Mat<T, 2>, f: &Mat<T, 2>) -> Result<T> {
    let bad = || Error::NotSpd {
        point: vec![],
        min_eigenvalue: linalg::min_eigenvalue(gt2).to_f64_lossy(),
    };
    if linalg::min_eigenvalue(gt2) < T::lit(tol::EPS_SPD) {
        return Err(bad());
    }
    let vi = linalg::inverse(&linalg::sqrt_spd(gt2).ok_or_else(bad)?).ok_or_else(bad)?;
    let a = linalg::mul(&linalg::mul(&vi, &linalg::sym(f)), &vi);
    let n2 = a.iter().flatten().fold(T::zero(), |s, v| s + *v * *v);
    let tr = linalg::trace(&a);
    let (l, m) = (lame.lambda, lame.mu);
    Ok(m * n2 + l * m / (l + m) * tr * tr)
}

/// Minimizes `Q₃(G̃^{-1/2} (F* + sym(c ⊗ e₃)) G̃^{-1/2})` over `c ∈ ℝ³`, where
/// `F*` is `F` padded with zeros. Returns the minimum and the minimizer.
pub fn q2_minimize<T: Real>(lame: &LameParams<T>, gt: &Mat<T, 3>, f: &Mat<T, 2>) -> Result<(T, [T; 3])> {
    let bad = || Error::NotSpd {
        point: vec![],
        min_eigenvalue: linalg::min_eigenvalue(gt).to_f64_lossy(),
    };
    if linalg::min_eigenvalue(gt) < T::lit(tol::EPS_SPD) {
        return Err(bad());
    }
    let vi = linalg::inverse(&linalg::sqrt_spd(gt).ok_or_else(bad)?).ok_or_else(bad)?;
    let conj = |a: &Mat<T, 3>| linalg::mul(&linalg::mul(&vi, a), &vi);
    let mut f3 = linalg::zeros::<T, 3>();
    for i in 0..2 {
        for j in 0..2 {
            f3[i][j] = f[i][j];
        }
    }
    let a0 = conj(&f3);
    let basis: [Mat<T, 3>; 3] = std::array::from_fn(|k| {
        let mut e = linalg::zeros::<T, 3>();
        e[k][2] = T::one();
        conj(&linalg::sym(&e))
    });
    let h: Mat<T, 3> = std::array::from_fn(|k| std::array::from_fn(|l| q3_bilinear(lame, &basis[k], &basis[l])));
    let r: [T; 3] = std::array::from_fn(|k| -q3_bilinear(lame, &a0, &basis[k]));
    let c = linalg::solve(&h, &r).ok_or_else(bad)?;
    let mut x = a0;
    for k in 0..3 {
        x = linalg::add(&x, &linalg::scale(&basis[k], c[k]));
    }
    Ok((q3(lame, &x), c))
}

/// Nodewise `(∇ₕy)ᵀ G ∇ₕb`.
fn bending<T: Real>(mid: &Midplate<T>, b: &[[T; 3]]) -> Result<Vec<Mat<T, 2>>> {
    let db = mid.grid.gradient4(b)?;
    (0..mid.grid.len())
        .into_par_iter()
        .map(|i| {
            let (g, _) = mid.metrics_at(i)?;
            Ok(std::array::from_fn(|a| {
                std::array::from_fn(|c| g_dot(&g, &column(&mid.dy[i], a), &column(&db[i], c)))
            }))
        })
        .collect()
}

/// `I(y) = 1/24 ∫ Q₂(x′, (∇ₕy)ᵀ G ∇ₕb) dx′` by trapezoidal quadrature.
pub fn limit_functional<T: Real>(mid: &Midplate<T>, lame: &LameParams<T>) -> Result<T> {
    let cos = cosserat_b(mid)?;
    let f = bending(mid, &cos.b.values)?;
    let q = (0..mid.grid.len())
        .into_par_iter()
        .map(|i| {
            let (_, gt) = mid.metrics_at(i)?;
            q2_form(lame, &block2(&gt), &f[i])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mid.grid.integrate(&q) / T::lit(24.0))
}

/// Isotropic film density `W(F) = μ/2 Σ(σ̂ᵢ−1)² + λ/2 (Σ(σ̂ᵢ−1))²` on signed
/// singular values `σ̂`; frame-indifferent with `D²W(Id)(F, F) = Q₃(F)`.
pub fn film_density<T: Real>(lame: &LameParams<T>, f: &Mat<T, 3>) -> T {
    let (_, s, _) = linalg::signed_svd(f);
    let e = s.map(|v| v - T::one());
    let sq = e.iter().fold(T::zero(), |a, v| a + *v * *v);
    let tr: T = e.iter().copied().sum();
    T::lit(0.5) * (lame.mu * sq + lame.lambda * tr * tr)
}

/// Second-order term of the recovery deformations.
#[derive(Clone, Debug)]
pub enum Warp<T> {
    /// Nodewise optimal warp built from the `Q₃` minimizer.
    Auto,
    /// `d = 0`.
    Zero,
    Field(Vec<[T; 3]>),
}

/// Optimal warp
/// `d = G⁻¹ Q⁻ᵀ (c(x′, (∇y)ᵀG∇b) − (⟨∂₁b, Gb⟩, ⟨∂₂b, Gb⟩, 0))`
/// with `Q = [∂₁y ∂₂y b]` and `c` the minimizer of [`q2_minimize`].
pub fn optimal_warp<T: Real>(mid: &Midplate<T>, lame: &LameParams<T>, b: &[[T; 3]]) -> Result<Vec<[T; 3]>> {
    let db = mid.grid.gradient4(b)?;
    (0..mid.grid.len())
        .into_par_iter()
        .map(|i| {
            let x = mid.grid.point(i);
            let (g, gt) = mid.metrics_at(i)?;
            let cols = [column(&mid.dy[i], 0), column(&mid.dy[i], 1), b[i]];
            let f: Mat<T, 2> =
                std::array::from_fn(|a| std::array::from_fn(|c| g_dot(&g, &cols[a], &column(&db[i], c))));
            let (_, c) = q2_minimize(lame, &gt, &f)?;
            let rhs = [
                c[0] - g_dot(&g, &column(&db[i], 0), &b[i]),
                c[1] - g_dot(&g, &column(&db[i], 1), &b[i]),
                c[2],
            ];
            // Rows of Qᵀ G.
            let qg: Mat<T, 3> = std::array::from_fn(|k| linalg::mat_vec(&g, &cols[k]));
            linalg::solve(&qg, &rhs).ok_or_else(|| Error::DegenerateSurface {
                point: point_f64(&x),
                norm: linalg::det(&qg).abs().to_f64_lossy(),
            })
        })
        .collect()
}

/// `E^h(ξ^h)/h²` for `ξ^h = y + x₃ b + x₃²/2 d` on `ω × (−h/2, h/2)`: three
/// Gauss points across the thickness, trapezoidal quadrature on `ω`.
pub fn recovery_energy<T: Real>(mid: &Midplate<T>, lame: &LameParams<T>, h: T, warp: &Warp<T>) -> Result<T> {
    if !(h > T::zero()) {
        return Err(Error::InvalidInput(format!("film thickness must be positive, got {h}")));
    }
    let cos = cosserat_b(mid)?;
    let b = &cos.b.values;
    let d = match warp {
        Warp::Auto => optimal_warp(mid, lame, b)?,
        Warp::Zero => vec![[T::zero(); 3]; mid.grid.len()],
        Warp::Field(d) if d.len() == mid.grid.len() => d.clone(),
        Warp::Field(d) => {
            return Err(Error::InvalidInput(format!(
                "warp has {} values for {} nodes",
                d.len(),
                mid.grid.len()
            )))
        }
    };
    let db = mid.grid.gradient4(b)?;
    let dd = mid.grid.gradient4(&d)?;
    let half = T::lit(0.5);
    let r = T::lit(0.6).sqrt() * h * half;
    let gauss = [
        (-r, T::lit(5.0 / 9.0)),
        (T::zero(), T::lit(8.0 / 9.0)),
        (r, T::lit(5.0 / 9.0)),
    ];
    let dens = (0..mid.grid.len())
        .into_par_iter()
        .map(|i| {
            let x = mid.grid.point(i);
            let (g, gt) = mid.metrics_at(i)?;
            let v = linalg::sqrt_spd(&g).ok_or_else(|| not_spd(&x, &g))?;
            let vt = linalg::sqrt_spd(&gt).ok_or_else(|| not_spd(&x, &gt))?;
            let vt_inv = linalg::inverse(&vt).ok_or_else(|| not_spd(&x, &gt))?;
            let mut acc = T::zero();
            for (t, w) in gauss {
                let q = t * t * half;
                let grad: Mat<T, 3> = std::array::from_fn(|s| {
                    [
                        mid.dy[i][s][0] + t * db[i][s][0] + q * dd[i][s][0],
                        mid.dy[i][s][1] + t * db[i][s][1] + q * dd[i][s][1],
                        b[i][s] + t * d[i][s],
                    ]
                });
                let f = linalg::mul(&linalg::mul(&v, &grad), &vt_inv);
                acc = acc + w * film_density(lame, &f);
            }
            // (1/h)·(h/2)·Σ wₖ W(ξₖ), divided by h².
            Ok(acc * half / (h * h))
        })
        .collect::<Result<Vec<_>>>()?;
    let e = mid.grid.integrate(&dens);
    if !e.is_finite() {
        return Err(Error::NonFinite("recovery energy".into()));
    }
    Ok(e)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecoveryRow<T> {
    pub h: T,
    pub eh_over_h2: T,
    pub limit: T,
    pub ratio: T,
}

/// `E^h/h²` and its ratio to the limit functional for each thickness.
pub fn recovery_sequence<T: Real>(
    mid: &Midplate<T>,
    lame: &LameParams<T>,
    hs: &[T],
    warp: &Warp<T>,
) -> Result<Vec<RecoveryRow<T>>> {
    let limit = limit_functional(mid, lame)?;
    hs.iter()
        .map(|&h| {
            let e = recovery_energy(mid, lame, h, warp)?;
            Ok(RecoveryRow {
                h,
                eh_over_h2: e,
                limit,
                ratio: e / limit,
            })
        })
        .collect()
}
