//! Total differential system for the frame `w = ∇ξ` (`w[s][i] = ∂ᵢξˢ`):
//!
//! ```text
//! ∂ⱼwᵢˢ = fˢⁱⱼ(x, w) = wˢₘ Γ̃ᵐᵢⱼ − ½ Gˢᵐ (wᵖᵢ ∂ⱼGₘₚ + wᵖⱼ ∂ᵢGₘₚ − wᵖⱼ wᑫᵢ ∂ₜGₚq Wᵗₘ)
//! ```
//!
//! with `W = w⁻¹`, its integrability residual `Cˢᵢⱼₖ = Dₖfˢⁱⱼ − Dⱼfˢⁱₖ`
//! (`Dₖ` the total derivative along the system), lattice integration and the
//! pointwise algebraic cost.

use std::ops::{Add, Mul, Sub};

use rayon::prelude::*;

use crate::expr::{Expression, Jet1};
use crate::geometry::{pullback_residual, ChristoffelJet, MetricDerivatives, Tensor3, Tensor4};
use crate::grid::{rk4_segment, GridDomain, GridFunction};
use crate::linalg::{self, Mat};
use crate::{point_f64, tol, Error, MetricField, Real, Result};

/// Frame at a point together with its inverse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameState<T, const N: usize> {
    pub x: [T; N],
    pub w: Mat<T, N>,
    pub w_inv: Mat<T, N>,
}

impl<T: Real, const N: usize> FrameState<T, N> {
    pub fn new(x: [T; N], w: Mat<T, N>) -> Result<Self> {
        let det = linalg::det(&w);
        if !(det.abs() >= T::lit(tol::EPS_INV)) {
            return Err(Error::SingularFrame {
                point: point_f64(&x),
                det: det.to_f64_lossy(),
            });
        }
        let w_inv = linalg::inverse(&w).ok_or_else(|| Error::SingularFrame {
            point: point_f64(&x),
            det: det.to_f64_lossy(),
        })?;
        Ok(Self { x, w, w_inv })
    }
}

/// `E(w; x) = K₁ Σ|Aᵢⱼ|² + K₂ Σ|Cˢᵢⱼₖ|²` with `A = wᵀGw − G̃`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointwiseCost<T, const N: usize> {
    pub k1: T,
    pub k2: T,
    pub a: Mat<T, N>,
    pub c: Tensor4<T, N>,
    pub value: T,
}

#[derive(Clone, Debug)]
pub struct PointwiseResult<T, const N: usize> {
    pub w: Mat<T, N>,
    pub cost: PointwiseCost<T, N>,
    pub iterations: usize,
    pub grad_norm: T,
    pub converged: bool,
    /// Cost after every accepted step, starting with the initial cost.
    pub trace: Vec<T>,
}

/// Outcome of a sampled integrability check.
#[derive(Clone, Debug)]
pub struct ThomasReport<T, const N: usize> {
    pub samples: usize,
    pub evaluated: usize,
    /// Samples with a singular frame or an invalid metric.
    pub skipped: usize,
    /// Largest `‖C‖` (Frobenius) over evaluated samples.
    pub max_norm: T,
    pub witness_x: [T; N],
    pub witness_w: Mat<T, N>,
    pub tol: T,
}

impl<T: Real, const N: usize> ThomasReport<T, N> {
    pub fn holds(&self) -> bool {
        self.evaluated > 0 && self.max_norm <= self.tol
    }
}

/// Frame field propagated along lattice paths.
#[derive(Clone, Debug)]
pub struct FrameSolution<T, const N: usize> {
    pub w: GridFunction<T, N, Mat<T, N>>,
    pub base_node: usize,
    pub w0: Mat<T, N>,
    /// `‖G̃(x₀) − w₀ᵀG(x₀)w₀‖_∞`
    pub init_defect: T,
    /// Set when the initial frame violates the algebraic constraint by more
    /// than the tolerance.
    pub exploratory: bool,
    pub loop_mismatch: T,
    pub mismatch_node: usize,
    /// `‖G̃ − wᵀGw‖_∞` over the grid.
    pub algebraic_defect: T,
    pub node_defect: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct FrameReconstruction<T, const N: usize> {
    pub xi: GridFunction<T, N, [T; N]>,
    pub curl_defect: T,
    pub metric_residual: T,
    pub node_residual: Vec<T>,
}

/// Metric data needed by the right-hand side at one point.
#[derive(Clone, Copy, Debug)]
struct PointData<T, const N: usize> {
    g: MetricDerivatives<T, N>,
    gt: Mat<T, N>,
    gamma_t: ChristoffelJet<T, N>,
}

trait Field<T>: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Mul<T, Output = Self> {}

impl<T, S> Field<T> for S where S: Copy + Add<Output = S> + Sub<Output = S> + Mul<Output = S> + Mul<T, Output = S> {}

fn frame_rhs<T: Real, S: Field<T>, const N: usize>(
    w: &Mat<S, N>,
    w_inv: &Mat<S, N>,
    g_inv: &Mat<S, N>,
    dg: &[Mat<S, N>; N],
    gamma_t: &Tensor3<S, N>,
    zero: S,
) -> Tensor3<S, N> {
    let mut e = [[[zero; N]; N]; N];
    for m in 0..N {
        for p in 0..N {
            for q in 0..N {
                let mut v = zero;
                for t in 0..N {
                    v = v + dg[t][p][q] * w_inv[t][m];
                }
                e[m][p][q] = v;
            }
        }
    }
    let mut br = [[[zero; N]; N]; N];
    for m in 0..N {
        for i in 0..N {
            for j in 0..N {
                let mut v = zero;
                for p in 0..N {
                    v = v + w[p][i] * dg[j][m][p] + w[p][j] * dg[i][m][p];
                    let mut inner = zero;
                    for q in 0..N {
                        inner = inner + w[q][i] * e[m][p][q];
                    }
                    v = v - w[p][j] * inner;
                }
                br[m][i][j] = v;
            }
        }
    }
    let half = T::lit(0.5);
    let mut f = [[[zero; N]; N]; N];
    for s in 0..N {
        for i in 0..N {
            for j in 0..N {
                let mut a = zero;
                let mut b = zero;
                for m in 0..N {
                    a = a + w[s][m] * gamma_t[m][i][j];
                    b = b + g_inv[s][m] * br[m][i][j];
                }
                f[s][i][j] = a - b * half;
            }
        }
    }
    f
}

fn dual<T: Real>(value: T, tangent: T) -> Jet1<T, 1> {
    Jet1 { value, grad: [tangent] }
}

fn frobenius4<T: Real, const N: usize>(c: &Tensor4<T, N>) -> T {
    c.iter()
        .flatten()
        .flatten()
        .flatten()
        .map(|v| *v * *v)
        .sum::<T>()
        .sqrt()
}

/// The frame system for a pair `(G, G̃)`.
#[derive(Clone, Debug)]
pub struct FrameSystem<const N: usize> {
    g: MetricField<N>,
    gt: MetricField<N>,
}

impl<const N: usize> FrameSystem<N> {
    pub fn new(g: MetricField<N>, gt: MetricField<N>) -> Self {
        Self { g, gt }
    }

    pub fn metric(&self) -> &MetricField<N> {
        &self.g
    }

    pub fn target(&self) -> &MetricField<N> {
        &self.gt
    }

    fn data<T: Real>(&self, x: &[T; N]) -> Result<PointData<T, N>> {
        let g = self.g.derivatives(x)?;
        let gtd = self.gt.derivatives(x)?;
        Ok(PointData {
            g,
            gt: gtd.g,
            gamma_t: ChristoffelJet::from_derivatives(&gtd),
        })
    }

    fn rhs_with<T: Real>(d: &PointData<T, N>, s: &FrameState<T, N>) -> Tensor3<T, N> {
        frame_rhs::<T, T, N>(&s.w, &s.w_inv, &d.g.g_inv, &d.g.dg, &d.gamma_t.gamma2, T::zero())
    }

    /// `f[s][i][j] = fˢⁱⱼ`
    pub fn rhs_f<T: Real>(&self, state: &FrameState<T, N>) -> Result<Tensor3<T, N>> {
        Ok(Self::rhs_with(&self.data(&state.x)?, state))
    }

    /// Total derivatives `Dₖf` with the `x` dependence differentiated through
    /// the metric jets and the `w` dependence given by `w_dot`.
    fn directional<T: Real>(d: &PointData<T, N>, s: &FrameState<T, N>, k: usize, w_dot: &Mat<T, N>) -> Tensor3<T, N> {
        let g = &d.g;
        let winv_dot = linalg::scale(&linalg::mul(&s.w_inv, &linalg::mul(w_dot, &s.w_inv)), -T::one());
        let ginv_dot = linalg::scale(&linalg::mul(&g.g_inv, &linalg::mul(&g.dg[k], &g.g_inv)), -T::one());
        let m2 = |v: &Mat<T, N>, t: &Mat<T, N>| -> Mat<Jet1<T, 1>, N> {
            std::array::from_fn(|a| std::array::from_fn(|b| dual(v[a][b], t[a][b])))
        };
        let w = m2(&s.w, w_dot);
        let w_inv = m2(&s.w_inv, &winv_dot);
        let g_inv = m2(&g.g_inv, &ginv_dot);
        let dg: [Mat<Jet1<T, 1>, N>; N] = std::array::from_fn(|l| m2(&g.dg[l], &g.d2g[k][l]));
        let gamma: Tensor3<Jet1<T, 1>, N> =
            std::array::from_fn(|m| m2(&d.gamma_t.gamma2[m], &d.gamma_t.d_gamma2[k][m]));
        let out = frame_rhs::<T, _, N>(&w, &w_inv, &g_inv, &dg, &gamma, dual(T::zero(), T::zero()));
        std::array::from_fn(|a| std::array::from_fn(|b| std::array::from_fn(|c| out[a][b][c].grad[0])))
    }

    fn residual_with<T: Real>(d: &PointData<T, N>, s: &FrameState<T, N>) -> Tensor4<T, N> {
        let f = Self::rhs_with(d, s);
        let df: [Tensor3<T, N>; N] = std::array::from_fn(|k| {
            let w_dot: Mat<T, N> = std::array::from_fn(|a| std::array::from_fn(|b| f[a][b][k]));
            Self::directional(d, s, k, &w_dot)
        });
        antisymmetrize(&df)
    }

    /// `C[s][i][j][k] = Dₖfˢⁱⱼ − Dⱼfˢⁱₖ`, with all derivatives in closed form.
    pub fn residual_f<T: Real>(&self, state: &FrameState<T, N>) -> Result<Tensor4<T, N>> {
        Ok(Self::residual_with(&self.data(&state.x)?, state))
    }

    /// Same as [`residual_f`](Self::residual_f), with the `w`-derivatives of
    /// `f` taken by central differences of step `h`.
    pub fn residual_f_fd_w<T: Real>(&self, state: &FrameState<T, N>, h: T) -> Result<Tensor4<T, N>> {
        let d = self.data(&state.x)?;
        let f = Self::rhs_with(&d, state);
        let zero = linalg::zeros();
        let mut df: [Tensor3<T, N>; N] = std::array::from_fn(|k| Self::directional(&d, state, k, &zero));
        for a in 0..N {
            for b in 0..N {
                let mut wp = state.w;
                let mut wm = state.w;
                wp[a][b] = wp[a][b] + h;
                wm[a][b] = wm[a][b] - h;
                let fp = Self::rhs_with(&d, &FrameState::new(state.x, wp)?);
                let fm = Self::rhs_with(&d, &FrameState::new(state.x, wm)?);
                let inv = (h + h).recip();
                for (k, dfk) in df.iter_mut().enumerate() {
                    let t = f[a][b][k];
                    for s in 0..N {
                        for i in 0..N {
                            for j in 0..N {
                                dfk[s][i][j] = dfk[s][i][j] + (fp[s][i][j] - fm[s][i][j]) * inv * t;
                            }
                        }
                    }
                }
            }
        }
        Ok(antisymmetrize(&df))
    }

    /// `wᵀGw − G̃`
    pub fn algebraic_defect<T: Real>(&self, x: &[T; N], w: &Mat<T, N>) -> Result<Mat<T, N>> {
        Ok(linalg::sub(
            &linalg::congruence(w, &self.g.value_spd(x)?),
            &self.gt.value_spd(x)?,
        ))
    }

    /// `V⁻¹ Ṽ`, the identity-rotation member of the algebraic solution set.
    pub fn reference_frame<T: Real>(&self, x: &[T; N]) -> Result<Mat<T, N>> {
        let not_spd = || Error::NotSpd {
            point: point_f64(x),
            min_eigenvalue: 0.0,
        };
        let v = linalg::sqrt_spd(&self.g.value_spd(x)?).ok_or_else(not_spd)?;
        let vt = linalg::sqrt_spd(&self.gt.value_spd(x)?).ok_or_else(not_spd)?;
        let v_inv = linalg::inverse(&v).ok_or_else(not_spd)?;
        Ok(linalg::mul(&v_inv, &vt))
    }

    /// Samples `(x, w)` on a Halton sequence, `x` inside the domain box and `w`
    /// in `center ± half_width` entrywise, and reports the largest `‖C‖`.
    pub fn thomas_check<T: Real>(
        &self,
        domain: &GridDomain<T, N>,
        center: &Mat<T, N>,
        half_width: T,
        samples: usize,
        tol: T,
    ) -> ThomasReport<T, N> {
        let dim = N + N * N;
        let results: Vec<Option<(T, [T; N], Mat<T, N>)>> = (0..samples)
            .into_par_iter()
            .map(|idx| {
                let h: Vec<T> = (0..dim).map(|d| T::lit(halton(idx + 1, PRIMES[d]))).collect();
                let x: [T; N] = std::array::from_fn(|k| domain.lower[k] + (domain.upper[k] - domain.lower[k]) * h[k]);
                let w: Mat<T, N> = std::array::from_fn(|a| {
                    std::array::from_fn(|b| center[a][b] + half_width * (T::lit(2.0) * h[N + a * N + b] - T::one()))
                });
                let s = FrameState::new(x, w).ok()?;
                let c = self.residual_f(&s).ok()?;
                Some((frobenius4(&c), x, w))
            })
            .collect();
        let mut report = ThomasReport {
            samples,
            evaluated: 0,
            skipped: 0,
            max_norm: T::zero(),
            witness_x: domain.center(),
            witness_w: *center,
            tol,
        };
        for r in results {
            match r {
                Some((n, x, w)) => {
                    report.evaluated += 1;
                    if n > report.max_norm || report.evaluated == 1 {
                        report.max_norm = n;
                        report.witness_x = x;
                        report.witness_w = w;
                    }
                }
                None => report.skipped += 1,
            }
        }
        report
    }

    fn frame_step<T: Real>(
        &self,
        grid: &GridDomain<T, N>,
        substeps: usize,
        from: usize,
        to: usize,
        axis: usize,
        w: &Mat<T, N>,
    ) -> Result<Mat<T, N>> {
        let x0 = grid.point(from);
        let len = grid.point(to)[axis] - x0[axis];
        let out = rk4_segment(x0, axis, len, substeps, w, |x, w: &Mat<T, N>| {
            let f = self.rhs_f(&FrameState::new(*x, *w)?)?;
            Ok(std::array::from_fn(|s| std::array::from_fn(|i| f[s][i][axis])))
        })?;
        if out.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::StepFailure { point: point_f64(&x0) });
        }
        Ok(out)
    }

    /// Propagates `w` from `w(x₀) = w₀` by RK4 along staircase lattice paths.
    pub fn integrate_frame<T: Real>(
        &self,
        grid: &GridDomain<T, N>,
        x0: &[T; N],
        w0: &Mat<T, N>,
        substeps: usize,
    ) -> Result<FrameSolution<T, N>> {
        let base = grid.node_at(x0)?;
        FrameState::new(*x0, *w0)?;
        let init_defect = linalg::max_abs(&self.algebraic_defect(x0, w0)?);
        let step =
            |from: usize, to: usize, axis: usize, w: &Mat<T, N>| self.frame_step(grid, substeps, from, to, axis, w);
        let values = grid.propagate(base, *w0, step)?;
        let (loop_mismatch, mismatch_node) = grid.loop_mismatch(&values, step, |a: &Mat<T, N>, b: &Mat<T, N>| {
            linalg::max_abs(&linalg::sub(a, b))
        })?;
        let node_defect: Vec<T> = (0..grid.len())
            .into_par_iter()
            .map(|i| Ok(linalg::max_abs(&self.algebraic_defect(&grid.point(i), &values[i])?)))
            .collect::<Result<_>>()?;
        let algebraic_defect = node_defect.iter().fold(T::zero(), |m, &v| m.max(v));
        Ok(FrameSolution {
            w: GridFunction::new(grid.clone(), values)?,
            base_node: base,
            w0: *w0,
            init_defect,
            exploratory: init_defect > T::lit(tol::TOL_INIT),
            loop_mismatch,
            mismatch_node,
            algebraic_defect,
            node_defect,
        })
    }

    /// Line-integrates `ξ` from a frame field and measures the defects.
    pub fn reconstruct<T: Real>(&self, sol: &FrameSolution<T, N>) -> Result<FrameReconstruction<T, N>> {
        let grid = &sol.w.grid;
        let (xi, curl_defect) = grid.integrate_gradient(&sol.w.values, sol.base_node)?;
        let (metric_residual, node_residual) = pullback_residual(grid, &xi, &self.g, &self.gt)?;
        Ok(FrameReconstruction {
            xi: GridFunction::new(grid.clone(), xi)?,
            curl_defect,
            metric_residual,
            node_residual,
        })
    }

    /// `max |∂ₕₖw − f(x, w)[·][·][k]|` over interior nodes.
    pub fn frame_consistency<T: Real>(&self, sol: &FrameSolution<T, N>) -> Result<T> {
        let grid = &sol.w.grid;
        let w = &sol.w.values;
        let per: Vec<T> = (0..grid.len())
            .into_par_iter()
            .filter(|&i| !grid.is_boundary(i))
            .map(|i| {
                let f = self.rhs_f(&FrameState::new(grid.point(i), w[i])?)?;
                let mut worst = T::zero();
                for k in 0..N {
                    let st = grid.stencil(i, k);
                    for s in 0..N {
                        for a in 0..N {
                            let d = st.iter().fold(T::zero(), |acc, &(j, c)| acc + c * w[j][s][a]);
                            worst = worst.max((d - f[s][a][k]).abs());
                        }
                    }
                }
                Ok(worst)
            })
            .collect::<Result<_>>()?;
        Ok(per.into_iter().fold(T::zero(), T::max))
    }

    pub fn cost<T: Real>(&self, x: &[T; N], w: &Mat<T, N>, k1: T, k2: T) -> Result<PointwiseCost<T, N>> {
        let d = self.data(x)?;
        self.cost_with(&d, x, w, k1, k2)
    }

    fn cost_with<T: Real>(
        &self,
        d: &PointData<T, N>,
        x: &[T; N],
        w: &Mat<T, N>,
        k1: T,
        k2: T,
    ) -> Result<PointwiseCost<T, N>> {
        let s = FrameState::new(*x, *w)?;
        let a = linalg::sub(&linalg::congruence(w, &d.g.g), &d.gt);
        let c = Self::residual_with(d, &s);
        let sa: T = a.iter().flatten().map(|v| *v * *v).sum();
        let sc: T = c.iter().flatten().flatten().flatten().map(|v| *v * *v).sum();
        Ok(PointwiseCost {
            k1,
            k2,
            a,
            c,
            value: k1 * sa + k2 * sc,
        })
    }

    /// Residual vector `(√K₁ A, √K₂ C)` and its Jacobian with respect to the
    /// entries of `w` (row-major), the `A` block in closed form and the `C`
    /// block by central differences.
    fn residual_jacobian<T: Real>(
        &self,
        d: &PointData<T, N>,
        x: &[T; N],
        w: &Mat<T, N>,
        k1: T,
        k2: T,
    ) -> Result<(Vec<T>, Vec<Vec<T>>)> {
        let (s1, s2) = (k1.sqrt(), k2.sqrt());
        let cost = self.cost_with(d, x, w, k1, k2)?;
        let mut r: Vec<T> = cost.a.iter().flatten().map(|v| s1 * *v).collect();
        r.extend(cost.c.iter().flatten().flatten().flatten().map(|v| s2 * *v));
        let gw = linalg::mul(&d.g.g, w);
        let nn = N * N;
        let mut jac = vec![vec![T::zero(); nn]; r.len()];
        let h = T::lit(tol::FD_W_STEP);
        for a in 0..N {
            for b in 0..N {
                let col = a * N + b;
                // ∂Aᵢⱼ/∂w[a][b] = δᵢᵦ (Gw)[a][j] + δⱼᵦ (Gw)[a][i]
                for i in 0..N {
                    for j in 0..N {
                        let mut v = T::zero();
                        if i == b {
                            v = v + gw[a][j];
                        }
                        if j == b {
                            v = v + gw[a][i];
                        }
                        jac[i * N + j][col] = s1 * v;
                    }
                }
                if k2 > T::zero() {
                    let mut wp = *w;
                    let mut wm = *w;
                    wp[a][b] = wp[a][b] + h;
                    wm[a][b] = wm[a][b] - h;
                    let cp = Self::residual_with(d, &FrameState::new(*x, wp)?);
                    let cm = Self::residual_with(d, &FrameState::new(*x, wm)?);
                    let flat_p = cp.iter().flatten().flatten().flatten();
                    let flat_m = cm.iter().flatten().flatten().flatten();
                    for (row, (p, m)) in flat_p.zip(flat_m).enumerate() {
                        jac[nn + row][col] = s2 * (*p - *m) / (h + h);
                    }
                }
            }
        }
        Ok((r, jac))
    }

    /// Local minimizer of `E(·; x)` by Levenberg–Marquardt on the residual
    /// vector, accepting only steps that decrease the cost and keep
    /// `|det w| ≥ ε`.
    pub fn pointwise_minimize<T: Real>(
        &self,
        x: &[T; N],
        k1: T,
        k2: T,
        w_start: &Mat<T, N>,
    ) -> Result<PointwiseResult<T, N>> {
        if !(k1 > T::zero()) || k2 < T::zero() {
            return Err(Error::InvalidInput("cost weights must satisfy K1 > 0, K2 ≥ 0".into()));
        }
        let d = self.data(x)?;
        let mut w = *w_start;
        let mut cost = self.cost_with(&d, x, &w, k1, k2)?;
        let mut trace = vec![cost.value];
        let mut lambda = T::lit(1e-3);
        let nn = N * N;
        let mut grad_norm = T::infinity();
        let mut iterations = 0;
        let mut converged = false;
        while iterations < tol::POINTWISE_MAX_ITER {
            let (r, jac) = self.residual_jacobian(&d, x, &w, k1, k2)?;
            let mut jtr = vec![T::zero(); nn];
            let mut jtj = vec![vec![T::zero(); nn]; nn];
            for (ri, row) in r.iter().zip(&jac) {
                for a in 0..nn {
                    jtr[a] = jtr[a] + row[a] * *ri;
                    for b in 0..nn {
                        jtj[a][b] = jtj[a][b] + row[a] * row[b];
                    }
                }
            }
            grad_norm = T::lit(2.0) * jtr.iter().map(|v| *v * *v).sum::<T>().sqrt();
            if grad_norm <= T::lit(tol::POINTWISE_GTOL) || cost.value == T::zero() {
                converged = true;
                break;
            }
            iterations += 1;
            let mut accepted = false;
            for _ in 0..tol::MAX_HALVINGS {
                let mut sys = jtj.clone();
                for (a, row) in sys.iter_mut().enumerate() {
                    row[a] = row[a] + lambda * (jtj[a][a] + T::one());
                }
                let rhs: Vec<T> = jtr.iter().map(|v| -*v).collect();
                let Some(step) = solve_dense(sys, rhs) else {
                    lambda = lambda * T::lit(10.0);
                    continue;
                };
                let trial: Mat<T, N> = std::array::from_fn(|a| std::array::from_fn(|b| w[a][b] + step[a * N + b]));
                let trial_cost = match self.cost_with(&d, x, &trial, k1, k2) {
                    Ok(c) => c,
                    Err(Error::SingularFrame { .. }) => {
                        lambda = lambda * T::lit(10.0);
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                if trial_cost.value < cost.value {
                    assert!(trial_cost.value <= cost.value);
                    w = trial;
                    cost = trial_cost;
                    trace.push(cost.value);
                    lambda = (lambda / T::lit(3.0)).max(T::lit(1e-12));
                    accepted = true;
                    break;
                }
                lambda = lambda * T::lit(4.0);
            }
            if !accepted {
                break;
            }
        }
        Ok(PointwiseResult {
            w,
            cost,
            iterations,
            grad_norm,
            converged,
            trace,
        })
    }

    /// Runs [`pointwise_minimize`](Self::pointwise_minimize) at every node.
    pub fn pointwise_field<T: Real>(
        &self,
        grid: &GridDomain<T, N>,
        k1: T,
        k2: T,
        w_start: impl Fn(&[T; N]) -> Result<Mat<T, N>> + Sync,
    ) -> Result<Vec<PointwiseResult<T, N>>> {
        (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let x = grid.point(i);
                self.pointwise_minimize(&x, k1, k2, &w_start(&x)?)
            })
            .collect()
    }
}

fn antisymmetrize<T: Real, const N: usize>(df: &[Tensor3<T, N>; N]) -> Tensor4<T, N> {
    std::array::from_fn(|s| {
        std::array::from_fn(|i| std::array::from_fn(|j| std::array::from_fn(|k| df[k][s][i][j] - df[j][s][i][k])))
    })
}

const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `i` in base `b`.
pub fn halton(mut i: usize, b: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Gaussian elimination with partial pivoting.
pub(crate) fn solve_dense<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if !(a[piv][col].abs() > T::zero()) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] = a[row][k] - f * a[col][k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let s = (row + 1..n).fold(b[row], |s, k| s - a[row][k] * x[k]);
        x[row] = s / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// The scalar system `∇w = w² a + w b + c` in two variables.
#[derive(Clone, Debug)]
pub struct ScalarSystem {
    pub a: [Expression; 2],
    pub b: [Expression; 2],
    pub c: [f64; 2],
}

/// Coefficients of the compatibility polynomial `α w² + β w + γ` obtained
/// from `∂₁(∂₂w) = ∂₂(∂₁w)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarCompat<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    /// `curl b`, the linear coefficient when `c = 0`.
    pub curl_b: T,
}

impl<T: Real> ScalarCompat<T> {
    /// Real roots, ascending. `None` when the polynomial vanishes identically.
    pub fn roots(&self) -> Option<Vec<T>> {
        quadratic_roots(self.alpha, self.beta, self.gamma)
    }

    /// Roots of `α w² + (curl b) w`, the polynomial without the `c` terms.
    pub fn reduced_roots(&self) -> Option<Vec<T>> {
        quadratic_roots(self.alpha, self.curl_b, T::zero())
    }
}

fn quadratic_roots<T: Real>(a: T, b: T, c: T) -> Option<Vec<T>> {
    let eps = T::lit(1e-14);
    if a.abs() <= eps {
        if b.abs() <= eps {
            return if c.abs() <= eps { None } else { Some(Vec::new()) };
        }
        return Some(vec![-c / b]);
    }
    let disc = b * b - T::lit(4.0) * a * c;
    if disc < T::zero() {
        return Some(Vec::new());
    }
    let q = -T::lit(0.5) * (b + b.signum() * disc.sqrt());
    let mut r = if q == T::zero() {
        vec![T::zero(), T::zero()]
    } else {
        vec![q / a, c / q]
    };
    r.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Some(r)
}

/// One candidate branch checked against the total system.
#[derive(Clone, Debug)]
pub struct BranchCheck<T> {
    pub label: String,
    /// `max |∇w − (w² a + w b + c)|` over interior nodes (central differences).
    pub total_defect: T,
    pub solves: bool,
}

#[derive(Clone, Debug)]
pub struct ScalarDemoReport<T> {
    /// `max |curl a + ⟨a, b⊥⟩|` and `max |curl b|` over the grid.
    pub thomas: [T; 2],
    pub thomas_holds: bool,
    /// True when the compatibility polynomial vanishes identically on the grid.
    pub unconstrained: bool,
    pub exact: Vec<BranchCheck<T>>,
    pub reduced: Vec<BranchCheck<T>>,
}

impl ScalarSystem {
    pub fn new(a: [Expression; 2], b: [Expression; 2], c: [f64; 2]) -> Self {
        Self { a, b, c }
    }

    pub fn rhs<T: Real>(&self, x: &[T; 2], w: T) -> Result<[T; 2]> {
        let mut out = [T::zero(); 2];
        for k in 0..2 {
            out[k] = w * w * self.a[k].eval(x)? + w * self.b[k].eval(x)? + T::lit(self.c[k]);
        }
        Ok(out)
    }

    pub fn compat<T: Real>(&self, x: &[T; 2]) -> Result<ScalarCompat<T>> {
        let aj = [self.a[0].eval_jet1(x)?, self.a[1].eval_jet1(x)?];
        let bj = [self.b[0].eval_jet1(x)?, self.b[1].eval_jet1(x)?];
        let c = [T::lit(self.c[0]), T::lit(self.c[1])];
        let (a, b) = ([aj[0].value, aj[1].value], [bj[0].value, bj[1].value]);
        let curl_a = aj[1].grad[0] - aj[0].grad[1];
        let curl_b = bj[1].grad[0] - bj[0].grad[1];
        // ⟨u, v⊥⟩ = u₂v₁ − u₁v₂
        let cross = |u: [T; 2], v: [T; 2]| u[1] * v[0] - u[0] * v[1];
        Ok(ScalarCompat {
            alpha: curl_a + cross(a, b),
            beta: curl_b + T::lit(2.0) * cross(a, c),
            gamma: cross(b, c),
            curl_b,
        })
    }

    /// `max |∇ₕw − rhs|` over interior nodes of `grid` for a candidate `w`.
    pub fn total_defect<T: Real>(&self, grid: &GridDomain<T, 2>, w: impl Fn(&[T; 2]) -> Result<T>) -> Result<T> {
        let vals: Vec<T> = (0..grid.len()).map(|i| w(&grid.point(i))).collect::<Result<_>>()?;
        let mut worst = T::zero();
        for i in 0..grid.len() {
            if grid.is_boundary(i) {
                continue;
            }
            let x = grid.point(i);
            let r = self.rhs(&x, vals[i])?;
            for (k, rk) in r.iter().enumerate() {
                let d = grid
                    .stencil(i, k)
                    .iter()
                    .fold(T::zero(), |acc, &(j, c)| acc + c * vals[j]);
                worst = worst.max((d - *rk).abs());
            }
        }
        Ok(worst)
    }

    /// Evaluates the integrability coefficients, solves the compatibility
    /// polynomial pointwise and checks every root branch against the system.
    pub fn demo<T: Real>(&self, grid: &GridDomain<T, 2>, tol: T) -> Result<ScalarDemoReport<T>> {
        let mut thomas = [T::zero(); 2];
        let mut unconstrained = true;
        let mut branches = 0;
        let mut reduced_branches = 0;
        for i in 0..grid.len() {
            let cp = self.compat(&grid.point(i))?;
            thomas[0] = thomas[0].max(cp.alpha.abs());
            thomas[1] = thomas[1].max(cp.curl_b.abs());
            if let Some(r) = cp.roots() {
                unconstrained = false;
                branches = branches.max(r.len());
            }
            if let Some(r) = cp.reduced_roots() {
                reduced_branches = reduced_branches.max(r.len());
            }
        }
        let check = |label: String, k: usize, reduced: bool| -> Result<BranchCheck<T>> {
            let defect = self.total_defect(grid, |x| {
                let cp = self.compat(x)?;
                let roots = if reduced { cp.reduced_roots() } else { cp.roots() };
                roots.and_then(|r| r.get(k).copied()).ok_or_else(|| Error::Domain {
                    what: "compatibility root branch".into(),
                    point: point_f64(x),
                })
            });
            Ok(match defect {
                Ok(d) => BranchCheck {
                    label,
                    total_defect: d,
                    solves: d <= tol,
                },
                Err(Error::Domain { .. }) => BranchCheck {
                    label,
                    total_defect: T::infinity(),
                    solves: false,
                },
                Err(e) => return Err(e),
            })
        };
        let exact = (0..branches)
            .map(|k| check(format!("root {}", k + 1), k, false))
            .collect::<Result<_>>()?;
        let reduced = (0..reduced_branches)
            .map(|k| check(format!("reduced root {}", k + 1), k, true))
            .collect::<Result<_>>()?;
        Ok(ScalarDemoReport {
            thomas,
            thomas_holds: thomas[0] <= tol && thomas[1] <= tol,
            unconstrained,
            exact,
            reduced,
        })
    }
}
