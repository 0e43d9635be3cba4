//! Metric fields and their intrinsic geometry.
//!
//! Index conventions (all 0-based):
//! * `dg[k][i][j] = ∂_k G_ij`, `d2g[k][l][i][j] = ∂_k ∂_l G_ij`
//! * `gamma1[i][j][k] = Γ_ijk = ½(∂_i G_jk + ∂_j G_ik − ∂_k G_ij)`
//! * `gamma2[m][i][j] = Γ^m_ij = G^{mk} Γ_ijk`, `d_gamma2[l][m][i][j] = ∂_l Γ^m_ij`
//! * `up[m][i][j][k] = R^m_ijk = ∂_k Γ^m_ij − ∂_j Γ^m_ik + Γ^m_kp Γ^p_ij − Γ^m_jp Γ^p_ik`
//! * `down[a][i][j][k] = G_am R^m_ijk`
//! * `Ric_ij = R^k_ijk`, Gauss curvature `κ = R_0110 / det G`

use crate::expr::{parse, Expression, Func, Jet1, Jet2};
use crate::grid::GridDomain;
use crate::linalg::{self, Mat};
use crate::{point_f64, tol, Error, Real, Result};

pub type Tensor3<T, const N: usize> = [[[T; N]; N]; N];
pub type Tensor4<T, const N: usize> = [[[[T; N]; N]; N]; N];

/// Symmetric `N × N` matrix of expressions in `x1 … xN`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField<const N: usize> {
    entries: [[Expression; N]; N],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricJet<T, const N: usize> {
    pub g: Mat<T, N>,
    pub dg: [Mat<T, N>; N],
    pub d2g: [[Mat<T, N>; N]; N],
    pub g_inv: Mat<T, N>,
    pub sqrt_g: Mat<T, N>,
    pub d_sqrt_g: [Mat<T, N>; N],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricDerivatives<T, const N: usize> {
    pub g: Mat<T, N>,
    /// `dg[k][i][j] = ∂ₖGᵢⱼ`
    pub dg: [Mat<T, N>; N],
    pub d2g: [[Mat<T, N>; N]; N],
    pub g_inv: Mat<T, N>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChristoffelJet<T, const N: usize> {
    pub gamma1: Tensor3<T, N>,
    pub gamma2: Tensor3<T, N>,
    pub d_gamma2: Tensor4<T, N>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Riemann<T, const N: usize> {
    pub up: Tensor4<T, N>,
    pub down: Tensor4<T, N>,
}

/// The two independent evaluations of the Gauss curvature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussCurvature<T> {
    /// `R_0110 / det G`
    pub riemann_form: T,
    /// `−(1/det V) curl h_V` with `h_V = (1/det V) V curl V`, `V = G^{1/2}`
    pub curve_form: T,
}

impl<T: Real> GaussCurvature<T> {
    pub fn discrepancy(&self) -> T {
        (self.riemann_form - self.curve_form).abs()
    }
}

impl<T: Real, const N: usize> Riemann<T, N> {
    pub fn norm(&self) -> T {
        self.up
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .fold(T::zero(), |s, &v| s + v * v)
            .sqrt()
    }

    pub fn ricci(&self) -> Mat<T, N> {
        std::array::from_fn(|i| std::array::from_fn(|j| (0..N).fold(T::zero(), |s, k| s + self.up[k][i][j][k])))
    }
}

impl<const N: usize> MetricField<N> {
    /// Builds a metric from a full matrix of expressions, which must be
    /// structurally symmetric and use only `x1 … xN`.
    pub fn new(entries: [[Expression; N]; N]) -> Result<Self> {
        for i in 0..N {
            for j in 0..N {
                if entries[i][j].arity() > N {
                    return Err(Error::InvalidInput(format!(
                        "metric entry ({},{}) uses x{} in dimension {N}",
                        i + 1,
                        j + 1,
                        entries[i][j].arity()
                    )));
                }
                if j > i && entries[i][j] != entries[j][i] {
                    return Err(Error::InvalidInput(format!(
                        "metric entries ({},{}) and ({},{}) differ",
                        i + 1,
                        j + 1,
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    /// Builds a metric from the upper triangle `f(i, j)`, `i ≤ j`.
    pub fn from_upper(mut f: impl FnMut(usize, usize) -> Expression) -> Result<Self> {
        let mut e: [[Expression; N]; N] = std::array::from_fn(|_| std::array::from_fn(|_| Expression::Const(0.0)));
        for i in 0..N {
            for j in i..N {
                let v = f(i, j);
                e[i][j] = v.clone();
                e[j][i] = v;
            }
        }
        Self::new(e)
    }

    /// Parses the upper triangle, row-major: `g11, g12, …, g1N, g22, …`.
    pub fn parse_upper(sources: &[&str]) -> Result<Self> {
        if sources.len() != N * (N + 1) / 2 {
            return Err(Error::InvalidInput(format!(
                "expected {} upper-triangle entries, got {}",
                N * (N + 1) / 2,
                sources.len()
            )));
        }
        let mut parsed = Vec::with_capacity(sources.len());
        for s in sources {
            parsed.push(parse(s, N)?);
        }
        let mut it = parsed.into_iter();
        Self::from_upper(|_, _| it.next().unwrap())
    }

    pub fn identity() -> Self {
        Self::from_upper(|i, j| Expression::Const(if i == j { 1.0 } else { 0.0 })).unwrap()
    }

    pub fn constant(a: [[f64; N]; N]) -> Result<Self> {
        Self::from_upper(|i, j| Expression::Const(a[i][j]))
    }

    /// `e^{2g} Id`
    pub fn conformal(g: &Expression) -> Result<Self> {
        let e = Expression::func(Func::Exp, Expression::Const(2.0) * g.clone());
        Self::from_upper(|i, j| if i == j { e.clone() } else { Expression::Const(0.0) })
    }

    /// `(∇φ)ᵀ A ∇φ` for a constant SPD `A`.
    pub fn pullback(phi: &[Expression; N], a: [[f64; N]; N]) -> Result<Self> {
        let d: [[Expression; N]; N] = std::array::from_fn(|s| std::array::from_fn(|i| phi[s].derivative(i)));
        Self::from_upper(|i, j| {
            let mut acc = Expression::Const(0.0);
            for p in 0..N {
                for q in 0..N {
                    if a[p][q] != 0.0 {
                        acc = acc + Expression::Const(a[p][q]) * d[p][i].clone() * d[q][j].clone();
                    }
                }
            }
            acc
        })
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expression {
        &self.entries[i][j]
    }

    pub fn uses_var(&self, k: usize) -> bool {
        self.entries.iter().flatten().any(|e| e.uses_var(k))
    }

    /// `G(x)` without derivatives or positivity check.
    pub fn value<T: Real>(&self, x: &[T; N]) -> Result<Mat<T, N>> {
        let mut g = linalg::zeros();
        for i in 0..N {
            for j in i..N {
                let v = self.entries[i][j].eval(x)?;
                g[i][j] = v;
                g[j][i] = v;
            }
        }
        Ok(g)
    }

    /// `G(x)`, rejecting points where the smallest eigenvalue is below `ε_spd`.
    pub fn value_spd<T: Real>(&self, x: &[T; N]) -> Result<Mat<T, N>> {
        let g = self.value(x)?;
        check_spd(&g, x)?;
        Ok(g)
    }

    /// Entries as second-order jets.
    pub fn jets<T: Real>(&self, x: &[T; N]) -> Result<[[Jet2<T, N>; N]; N]> {
        let mut g = [[Jet2::constant(T::zero()); N]; N];
        for i in 0..N {
            for j in i..N {
                let v = self.entries[i][j].eval_jet2(x)?;
                g[i][j] = v;
                g[j][i] = v;
            }
        }
        Ok(g)
    }

    /// `G^{1/2}` as a matrix of second-order jets (closed form, `N = 2` only).
    pub fn sqrt_jets<T: Real>(&self, x: &[T; N]) -> Result<[[Jet2<T, N>; N]; N]> {
        if N != 2 {
            return Err(Error::InvalidInput(
                "closed-form square root requires dimension 2".into(),
            ));
        }
        let g = self.jets(x)?;
        check_spd(&jet_values(&g), x)?;
        Ok(sqrt2_jets(&g))
    }

    /// Value, first and second derivatives and inverse, without the square root.
    pub fn derivatives<T: Real>(&self, x: &[T; N]) -> Result<MetricDerivatives<T, N>> {
        let gj = self.jets(x)?;
        let g = jet_values(&gj);
        check_spd(&g, x)?;
        let mut dg = [linalg::zeros(); N];
        let mut d2g = [[linalg::zeros(); N]; N];
        for i in 0..N {
            for j in 0..N {
                for k in 0..N {
                    dg[k][i][j] = gj[i][j].grad[k];
                    for l in 0..N {
                        d2g[k][l][i][j] = gj[i][j].hess[k][l];
                    }
                }
            }
        }
        let g_inv = linalg::inverse(&g).ok_or_else(|| Error::NotSpd {
            point: point_f64(x),
            min_eigenvalue: 0.0,
        })?;
        Ok(MetricDerivatives { g, dg, d2g, g_inv })
    }

    pub fn metric_jet<T: Real>(&self, x: &[T; N]) -> Result<MetricJet<T, N>> {
        let MetricDerivatives { g, dg, d2g, g_inv } = self.derivatives(x)?;
        let (sqrt_g, d_sqrt_g) = if N == 2 {
            let v = sqrt2_jets(&self.jets(x)?);
            let sqrt_g = jet_values(&v);
            let mut d = [linalg::zeros(); N];
            for (k, dk) in d.iter_mut().enumerate() {
                for i in 0..N {
                    for j in 0..N {
                        dk[i][j] = v[i][j].grad[k];
                    }
                }
            }
            (sqrt_g, d)
        } else {
            let sqrt_g = sqrt_db(&g, x)?;
            let h = T::lit(tol::H_FD);
            let mut d = [linalg::zeros(); N];
            for (k, dk) in d.iter_mut().enumerate() {
                let mut xp = *x;
                let mut xm = *x;
                xp[k] = xp[k] + h;
                xm[k] = xm[k] - h;
                let sp = sqrt_db(&self.value_spd(&xp)?, &xp)?;
                let sm = sqrt_db(&self.value_spd(&xm)?, &xm)?;
                *dk = linalg::scale(&linalg::sub(&sp, &sm), (h + h).recip());
            }
            (sqrt_g, d)
        };
        Ok(MetricJet {
            g,
            dg,
            d2g,
            g_inv,
            sqrt_g,
            d_sqrt_g,
        })
    }

    pub fn christoffel<T: Real>(&self, x: &[T; N]) -> Result<ChristoffelJet<T, N>> {
        Ok(ChristoffelJet::from_derivatives(&self.derivatives(x)?))
    }

    pub fn riemann<T: Real>(&self, x: &[T; N]) -> Result<Riemann<T, N>> {
        let d = self.derivatives(x)?;
        Ok(ChristoffelJet::from_derivatives(&d).riemann(&d.g))
    }

    pub fn ricci<T: Real>(&self, x: &[T; N]) -> Result<Mat<T, N>> {
        Ok(self.riemann(x)?.ricci())
    }
}

impl MetricField<2> {
    /// Gauss curvature, evaluated from the Riemann tensor and from the
    /// curl form of the square root.
    pub fn gauss_curvature<T: Real>(&self, x: &[T; 2]) -> Result<GaussCurvature<T>> {
        let mj = self.metric_jet(x)?;
        let c = ChristoffelJet::from_metric_jet(&mj);
        let r = c.riemann(&mj.g);
        let riemann_form = r.down[0][1][1][0] / linalg::det(&mj.g);

        let v = sqrt2_jets(&self.jets(x)?);
        let det_v = v[0][0] * v[1][1] - v[0][1] * v[1][0];
        // curl V = ∂1(V e2) − ∂2(V e1), one component per row
        let curl_v: [Jet1<T, 2>; 2] = std::array::from_fn(|i| v[i][1].derivative(0) - v[i][0].derivative(1));
        let inv_det = det_v.to_jet1().recip();
        let h: [Jet1<T, 2>; 2] =
            std::array::from_fn(|i| (v[i][0].to_jet1() * curl_v[0] + v[i][1].to_jet1() * curl_v[1]) * inv_det);
        let curl_h = h[1].grad[0] - h[0].grad[1];
        let curve_form = -curl_h / det_v.value;
        Ok(GaussCurvature {
            riemann_form,
            curve_form,
        })
    }

    /// `κ(G̃) − Δ_G̃ f`; zero iff `e^{2f} G̃` is flat.
    pub fn conformal_gauss_residual<T: Real>(&self, f: &Expression, x: &[T; 2]) -> Result<T> {
        let kappa = self.gauss_curvature(x)?.riemann_form;
        let mj = self.derivatives(x)?;
        let c = ChristoffelJet::from_derivatives(&mj);
        let fj = f.eval_jet2(x)?;
        Ok(kappa - laplace_beltrami(&mj.g_inv, &c, &fj))
    }
}

impl MetricField<3> {
    /// `Ric(G̃) − (∇²f − df⊗df) − (Δf + |∇f|²) G̃`, the Ricci tensor of
    /// `e^{2f} G̃` in dimension three.
    pub fn conformal_ricci_residual<T: Real>(&self, f: &Expression, x: &[T; 3]) -> Result<Mat<T, 3>> {
        let mj = self.derivatives(x)?;
        let c = ChristoffelJet::from_derivatives(&mj);
        let ric = c.riemann(&mj.g).ricci();
        let fj = f.eval_jet2(x)?;
        let hess = covariant_hessian(&c, &fj);
        let lap = laplace_beltrami(&mj.g_inv, &c, &fj);
        let mut grad2 = T::zero();
        for j in 0..3 {
            for k in 0..3 {
                grad2 = grad2 + mj.g_inv[j][k] * fj.grad[j] * fj.grad[k];
            }
        }
        Ok(std::array::from_fn(|i| {
            std::array::from_fn(|j| ric[i][j] - (hess[i][j] - fj.grad[i] * fj.grad[j]) - (lap + grad2) * mj.g[i][j])
        }))
    }
}

/// `max |(∇ₕξ)ᵀ G ∇ₕξ − G̃|` over the grid and its per-node values, with
/// `∇ₕ` the grid finite-difference gradient.
pub fn pullback_residual<T: Real, const N: usize>(
    grid: &GridDomain<T, N>,
    xi: &[[T; N]],
    g: &MetricField<N>,
    gt: &MetricField<N>,
) -> Result<(T, Vec<T>)> {
    use rayon::prelude::*;
    let d = grid.gradient(xi);
    let per: Vec<T> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            let r = linalg::sub(&linalg::congruence(&d[i], &g.value_spd(&x)?), &gt.value_spd(&x)?);
            Ok(linalg::max_abs(&r))
        })
        .collect::<Result<_>>()?;
    let worst = per.iter().fold(T::zero(), |m, &v| m.max(v));
    Ok((worst, per))
}

/// `∇²f_jk = ∂_jk f − Γ^l_jk ∂_l f`
pub fn covariant_hessian<T: Real, const N: usize>(c: &ChristoffelJet<T, N>, f: &Jet2<T, N>) -> Mat<T, N> {
    std::array::from_fn(|j| {
        std::array::from_fn(|k| (0..N).fold(f.hess[j][k], |s, l| s - c.gamma2[l][j][k] * f.grad[l]))
    })
}

/// `Δ_G f = G^{jk} ∇²f_jk`
pub fn laplace_beltrami<T: Real, const N: usize>(g_inv: &Mat<T, N>, c: &ChristoffelJet<T, N>, f: &Jet2<T, N>) -> T {
    let h = covariant_hessian(c, f);
    let mut s = T::zero();
    for j in 0..N {
        for k in 0..N {
            s = s + g_inv[j][k] * h[j][k];
        }
    }
    s
}

impl<T: Real, const N: usize> ChristoffelJet<T, N> {
    pub fn from_metric_jet(mj: &MetricJet<T, N>) -> Self {
        Self::from_derivatives(&MetricDerivatives {
            g: mj.g,
            dg: mj.dg,
            d2g: mj.d2g,
            g_inv: mj.g_inv,
        })
    }

    pub fn from_derivatives(mj: &MetricDerivatives<T, N>) -> Self {
        let half = T::lit(0.5);
        let mut gamma1 = [[[T::zero(); N]; N]; N];
        for i in 0..N {
            for j in 0..N {
                for k in 0..N {
                    gamma1[i][j][k] = half * (mj.dg[i][j][k] + mj.dg[j][i][k] - mj.dg[k][i][j]);
                }
            }
        }
        let mut gamma2 = [[[T::zero(); N]; N]; N];
        for m in 0..N {
            for i in 0..N {
                for j in 0..N {
                    gamma2[m][i][j] = (0..N).fold(T::zero(), |s, q| s + mj.g_inv[m][q] * gamma1[i][j][q]);
                }
            }
        }
        // ∂_l G^{-1} = −G^{-1} (∂_l G) G^{-1}
        let d_ginv: [Mat<T, N>; N] = std::array::from_fn(|l| {
            linalg::scale(&linalg::mul(&mj.g_inv, &linalg::mul(&mj.dg[l], &mj.g_inv)), -T::one())
        });
        let mut d_gamma2 = [[[[T::zero(); N]; N]; N]; N];
        for l in 0..N {
            for m in 0..N {
                for i in 0..N {
                    for j in 0..N {
                        let mut s = T::zero();
                        for q in 0..N {
                            let dg1 = half * (mj.d2g[l][i][j][q] + mj.d2g[l][j][i][q] - mj.d2g[l][q][i][j]);
                            s = s + d_ginv[l][m][q] * gamma1[i][j][q] + mj.g_inv[m][q] * dg1;
                        }
                        d_gamma2[l][m][i][j] = s;
                    }
                }
            }
        }
        Self {
            gamma1,
            gamma2,
            d_gamma2,
        }
    }

    pub fn riemann(&self, g: &Mat<T, N>) -> Riemann<T, N> {
        let gm = &self.gamma2;
        let dg = &self.d_gamma2;
        let mut up = [[[[T::zero(); N]; N]; N]; N];
        for m in 0..N {
            for i in 0..N {
                for j in 0..N {
                    for k in 0..N {
                        let mut v = dg[k][m][i][j] - dg[j][m][i][k];
                        for p in 0..N {
                            v = v + gm[m][k][p] * gm[p][i][j] - gm[m][j][p] * gm[p][i][k];
                        }
                        up[m][i][j][k] = v;
                    }
                }
            }
        }
        let mut down = [[[[T::zero(); N]; N]; N]; N];
        for a in 0..N {
            for i in 0..N {
                for j in 0..N {
                    for k in 0..N {
                        down[a][i][j][k] = (0..N).fold(T::zero(), |s, m| s + g[a][m] * up[m][i][j][k]);
                    }
                }
            }
        }
        Riemann { up, down }
    }

    /// Largest violation of `∂_i G_jk = G_mk Γ^m_ij + G_mj Γ^m_ik`.
    pub fn compatibility_defect(&self, mj: &MetricJet<T, N>) -> T {
        let mut worst = T::zero();
        for i in 0..N {
            for j in 0..N {
                for k in 0..N {
                    let mut r = mj.dg[i][j][k];
                    for m in 0..N {
                        r = r - mj.g[m][k] * self.gamma2[m][i][j] - mj.g[m][j] * self.gamma2[m][i][k];
                    }
                    worst = worst.max(r.abs());
                }
            }
        }
        worst
    }
}

pub(crate) fn jet_values<T: Real, const N: usize>(m: &[[Jet2<T, N>; N]; N]) -> Mat<T, N> {
    std::array::from_fn(|i| std::array::from_fn(|j| m[i][j].value))
}

pub(crate) fn check_spd<T: Real, const N: usize>(g: &Mat<T, N>, x: &[T; N]) -> Result<()> {
    if g.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("metric at {:?}", point_f64(x))));
    }
    let lmin = linalg::min_eigenvalue(g);
    if !(lmin >= T::lit(tol::EPS_SPD)) {
        return Err(Error::NotSpd {
            point: point_f64(x),
            min_eigenvalue: lmin.to_f64_lossy(),
        });
    }
    Ok(())
}

fn sqrt_db<T: Real, const N: usize>(g: &Mat<T, N>, x: &[T; N]) -> Result<Mat<T, N>> {
    linalg::sqrt_spd(g).ok_or_else(|| Error::NotSpd {
        point: point_f64(x),
        min_eigenvalue: linalg::min_eigenvalue(g).to_f64_lossy(),
    })
}

/// `(G + √det G · Id) / √(tr G + 2√det G)` evaluated on jets; uses the
/// upper-left 2×2 block.
pub(crate) fn sqrt2_jets<T: Real, const N: usize>(g: &[[Jet2<T, N>; N]; N]) -> [[Jet2<T, N>; N]; N] {
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let s = det.sqrt();
    let t = (g[0][0] + g[1][1] + s.scale(T::lit(2.0))).sqrt();
    let inv_t = t.recip();
    let mut v = *g;
    v[0][0] = (g[0][0] + s) * inv_t;
    v[1][1] = (g[1][1] + s) * inv_t;
    v[0][1] = g[0][1] * inv_t;
    v[1][0] = g[1][0] * inv_t;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_metric_is_flat() {
        let g = MetricField::<3>::identity();
        let mj = g.metric_jet(&[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(mj.sqrt_g, linalg::identity());
        assert!(mj.dg.iter().flatten().flatten().all(|&v| v == 0.0));
        assert_eq!(g.riemann(&[0.1, 0.2, 0.3]).unwrap().norm(), 0.0);
    }

    #[test]
    fn cool_metric_sqrt_derivative() {
        let g = MetricField::<2>::parse_upper(&["1/(x1^2)", "0", "1/(x2^2)"]).unwrap();
        let mj = g.metric_jet(&[2.0f64, 1.0]).unwrap();
        assert!((mj.sqrt_g[0][0] - 0.5).abs() < 1e-15);
        assert!((mj.sqrt_g[1][1] - 1.0).abs() < 1e-15);
        assert!((mj.d_sqrt_g[0][0][0] + 0.25).abs() < 1e-14);
        let c = g.christoffel(&[1.0f64, 1.0]).unwrap();
        assert!((c.gamma2[0][0][0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn conformal_christoffel_symbols() {
        let g = MetricField::<2>::conformal(&parse("x1", 2).unwrap()).unwrap();
        let c = g.christoffel(&[0.0f64, 0.0]).unwrap();
        assert!((c.gamma2[0][0][0] - 1.0).abs() < 1e-14);
        assert!((c.gamma2[0][1][1] + 1.0).abs() < 1e-14);
        assert!((c.gamma2[1][0][1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn not_spd_reported() {
        let g = MetricField::<2>::parse_upper(&["x1", "0", "1"]).unwrap();
        match g.metric_jet(&[-1.0, 0.0]) {
            Err(Error::NotSpd { min_eigenvalue, .. }) => assert!(min_eigenvalue < 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn asymmetric_entries_rejected() {
        let e = |s: &str| parse(s, 2).unwrap();
        assert!(MetricField::<2>::new([[e("1"), e("x1")], [e("x2"), e("1")]]).is_err());
        assert!(MetricField::<2>::parse_upper(&["1", "0"]).is_err());
    }

    #[test]
    fn three_dim_sqrt_derivative_by_differences() {
        let g = MetricField::<3>::parse_upper(&["exp(x1)", "0", "0", "1", "0", "1 + x3^2"]).unwrap();
        let mj = g.metric_jet(&[0.4, 0.0, 0.5]).unwrap();
        assert!((mj.d_sqrt_g[0][0][0] - 0.5 * (0.2f64).exp()).abs() < 1e-8);
        let expected = 0.5 / (1.25f64).sqrt();
        assert!((mj.d_sqrt_g[2][2][2] - expected).abs() < 1e-8);
    }
}
