//! Two-dimensional rotation-angle reduction.
//!
//! For `G̃ = e^{2g} Id`, solutions have the form `∇ξ = V⁻¹ R(θ) Ṽ` with
//! `V = G^{1/2}`, `Ṽ = G̃^{1/2}`, and the angle obeys
//!
//! ```text
//! ∇θ = m + R(−2θ) n,   m = ∇⊥g + A₁e₂ − A₂e₁,   n = B₁e₂ − B₂e₁,
//! ```
//!
//! where `Aᵢ`, `Bᵢ` are the conformal and anticonformal parts of `V ∂ᵢV⁻¹`
//! and `∇⊥φ = (−∂₂φ, ∂₁φ)`.

use std::ops::{Add, Mul, Sub};

use crate::expr::{Expression, Func, Jet1};
use crate::geometry::pullback_residual;
use crate::grid::{rk4_segment, GridDomain, GridFunction};
use crate::linalg::{self, Mat};
use crate::{point_f64, tol, Error, MetricField, Real, Result};

/// Conformal part `½[[F₁₁+F₂₂, F₁₂−F₂₁], [F₂₁−F₁₂, F₁₁+F₂₂]]`.
pub fn conformal_part<T, S>(f: &[[S; 2]; 2]) -> [[S; 2]; 2]
where
    T: Real,
    S: Copy + Add<Output = S> + Sub<Output = S> + Mul<T, Output = S>,
{
    let h = T::lit(0.5);
    let d = (f[0][0] + f[1][1]) * h;
    let o = (f[0][1] - f[1][0]) * h;
    [[d, o], [(f[1][0] - f[0][1]) * h, d]]
}

/// Anticonformal part `½[[F₁₁−F₂₂, F₁₂+F₂₁], [F₁₂+F₂₁, F₂₂−F₁₁]]`.
pub fn anticonformal_part<T, S>(f: &[[S; 2]; 2]) -> [[S; 2]; 2]
where
    T: Real,
    S: Copy + Add<Output = S> + Sub<Output = S> + Mul<T, Output = S>,
{
    let h = T::lit(0.5);
    let o = (f[0][1] + f[1][0]) * h;
    [[(f[0][0] - f[1][1]) * h, o], [o, (f[1][1] - f[0][0]) * h]]
}

/// `v⊥ = (−v₂, v₁)`
pub fn perp<T: Real>(v: [T; 2]) -> [T; 2] {
    [-v[1], v[0]]
}

/// Pointwise data of the reduction.
#[derive(Clone, Copy, Debug)]
pub struct PlanarPoint<T> {
    pub v: Mat<T, 2>,
    pub v_inv: Mat<T, 2>,
    /// `e^g`, so that `Ṽ = e^g Id`
    pub vt: T,
    pub a: [Mat<T, 2>; 2],
    pub b: [Mat<T, 2>; 2],
    /// `m` and `n` with their gradients.
    pub m: [Jet1<T, 2>; 2],
    pub n: [Jet1<T, 2>; 2],
}

impl<T: Real> PlanarPoint<T> {
    pub fn m_value(&self) -> [T; 2] {
        [self.m[0].value, self.m[1].value]
    }

    pub fn n_value(&self) -> [T; 2] {
        [self.n[0].value, self.n[1].value]
    }

    /// `(curl m − 2|n|², div n − 2⟨n⊥, m⟩, curl n − 2⟨n, m⟩)`
    pub fn residuals(&self) -> [T; 3] {
        let (m, n) = (self.m_value(), self.n_value());
        let two = T::lit(2.0);
        let curl_m = self.m[1].grad[0] - self.m[0].grad[1];
        let curl_n = self.n[1].grad[0] - self.n[0].grad[1];
        let div_n = self.n[0].grad[0] + self.n[1].grad[1];
        let np = perp(n);
        [
            curl_m - two * linalg::dot(&n, &n),
            div_n - two * linalg::dot(&np, &m),
            curl_n - two * linalg::dot(&n, &m),
        ]
    }

    /// `m + R(−2θ) n`
    pub fn theta_rhs(&self, theta: T) -> [T; 2] {
        let (s, c) = (T::lit(2.0) * theta).sin_cos();
        let (m, n) = (self.m_value(), self.n_value());
        [m[0] + c * n[0] + s * n[1], m[1] - s * n[0] + c * n[1]]
    }

    /// `V⁻¹ R(θ) Ṽ`
    pub fn frame(&self, theta: T) -> Mat<T, 2> {
        linalg::scale(&linalg::mul(&self.v_inv, &linalg::rot2(theta)), self.vt)
    }
}

/// Integrability defect of the angle equation at a given angle:
/// `r₁ − sin(2θ) r₂ + cos(2θ) r₃`.
pub fn compatibility_at_angle<T: Real>(r: &[T; 3], theta: T) -> T {
    let (s, c) = (T::lit(2.0) * theta).sin_cos();
    r[0] - s * r[1] + c * r[2]
}

/// First residual in the normalization `Δ(a+b) + |∇(a−b)|²` used for
/// diagonal metrics `diag(e^{2a}, e^{2b})`: `−2 (curl m − 2|n|²)`.
pub fn normalized_first<T: Real>(raw: T) -> T {
    -T::lit(2.0) * raw
}

/// Angle field obtained by lattice integration.
#[derive(Clone, Debug)]
pub struct ThetaSolution<T> {
    pub theta: GridFunction<T, 2, T>,
    pub base_node: usize,
    pub x0: [T; 2],
    pub theta0: T,
    /// Largest two-route disagreement over elementary cells.
    pub path_mismatch: T,
    pub mismatch_node: usize,
}

/// Frame, deformation and defects reconstructed from an angle field.
#[derive(Clone, Debug)]
pub struct Reconstruction<T> {
    pub xi: GridFunction<T, 2, [T; 2]>,
    pub w: Vec<Mat<T, 2>>,
    /// Largest cell loop integral of `w · dx` (trapezoidal).
    pub curl_defect: T,
    /// `max |(∇ₕξ)ᵀ G ∇ₕξ − G̃|` over nodes.
    pub metric_residual: T,
    pub node_residual: Vec<T>,
}

/// Sampled evaluation of the three residuals over a grid.
#[derive(Clone, Debug)]
pub struct ThomasThetaField<T> {
    pub grid: GridDomain<T, 2>,
    pub residuals: Vec<[T; 3]>,
    pub tol: T,
    /// Nodes where some residual exceeds `tol`.
    pub failing_nodes: usize,
    pub max_abs: T,
    pub witness: usize,
}

impl<T: Real> ThomasThetaField<T> {
    pub fn holds(&self) -> bool {
        self.failing_nodes == 0
    }

    pub fn fails_everywhere(&self) -> bool {
        self.failing_nodes == self.residuals.len()
    }
}

/// Reduction for a pair `(G, G̃ = e^{2g} Id)`.
#[derive(Clone, Debug)]
pub struct PlanarReduction {
    g: MetricField<2>,
    gt: MetricField<2>,
    /// `g = ½ log G̃₁₁`
    log_factor: Expression,
}

impl PlanarReduction {
    /// Requires `G̃₁₂` to be the literal `0` and `G̃₁₁`, `G̃₂₂` identical expressions.
    pub fn new(g: MetricField<2>, gt: MetricField<2>) -> Result<Self> {
        if !gt.entry(0, 1).is_zero_const() {
            return Err(Error::NotConformalTarget(format!(
                "off-diagonal entry is `{}`, expected 0",
                gt.entry(0, 1)
            )));
        }
        if gt.entry(0, 0) != gt.entry(1, 1) {
            return Err(Error::NotConformalTarget(format!(
                "diagonal entries `{}` and `{}` differ",
                gt.entry(0, 0),
                gt.entry(1, 1)
            )));
        }
        let log_factor = Expression::Const(0.5) * Expression::func(Func::Log, gt.entry(0, 0).clone());
        Ok(Self { g, gt, log_factor })
    }

    pub fn metric(&self) -> &MetricField<2> {
        &self.g
    }

    pub fn target(&self) -> &MetricField<2> {
        &self.gt
    }

    pub fn point<T: Real>(&self, x: &[T; 2]) -> Result<PlanarPoint<T>> {
        let v = self.g.sqrt_jets(x)?;
        let det = v[0][0] * v[1][1] - v[0][1] * v[1][0];
        let inv_det = det.recip();
        let vinv = [
            [v[1][1] * inv_det, -(v[0][1] * inv_det)],
            [-(v[1][0] * inv_det), v[0][0] * inv_det],
        ];
        let f: [[[Jet1<T, 2>; 2]; 2]; 2] = std::array::from_fn(|k| {
            std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    v[i][0].to_jet1() * vinv[0][j].derivative(k) + v[i][1].to_jet1() * vinv[1][j].derivative(k)
                })
            })
        });
        let aj = [conformal_part::<T, _>(&f[0]), conformal_part::<T, _>(&f[1])];
        let bj = [anticonformal_part::<T, _>(&f[0]), anticonformal_part::<T, _>(&f[1])];
        self.gt.value_spd(x)?;
        let gj = self.log_factor.eval_jet2(x)?;
        let perp_g = [-gj.derivative(1), gj.derivative(0)];
        let m: [Jet1<T, 2>; 2] = std::array::from_fn(|i| perp_g[i] + aj[0][i][1] - aj[1][i][0]);
        let n: [Jet1<T, 2>; 2] = std::array::from_fn(|i| bj[0][i][1] - bj[1][i][0]);
        let val = |mj: &[[Jet1<T, 2>; 2]; 2]| -> Mat<T, 2> {
            std::array::from_fn(|i| std::array::from_fn(|j| mj[i][j].value))
        };
        Ok(PlanarPoint {
            v: std::array::from_fn(|i| std::array::from_fn(|j| v[i][j].value)),
            v_inv: std::array::from_fn(|i| std::array::from_fn(|j| vinv[i][j].value)),
            vt: gj.value.exp(),
            a: [val(&aj[0]), val(&aj[1])],
            b: [val(&bj[0]), val(&bj[1])],
            m,
            n,
        })
    }

    pub fn mn_fields<T: Real>(&self, x: &[T; 2]) -> Result<([T; 2], [T; 2])> {
        let p = self.point(x)?;
        Ok((p.m_value(), p.n_value()))
    }

    pub fn thomas_theta_residuals<T: Real>(&self, x: &[T; 2]) -> Result<[T; 3]> {
        Ok(self.point(x)?.residuals())
    }

    pub fn thomas_theta_field<T: Real>(&self, grid: &GridDomain<T, 2>, tol: T) -> Result<ThomasThetaField<T>> {
        use rayon::prelude::*;
        let residuals: Vec<[T; 3]> = (0..grid.len())
            .into_par_iter()
            .map(|i| self.thomas_theta_residuals(&grid.point(i)))
            .collect::<Result<_>>()?;
        let mut failing_nodes = 0;
        let mut max_abs = T::zero();
        let mut witness = 0;
        for (i, r) in residuals.iter().enumerate() {
            let a = r.iter().fold(T::zero(), |s, v| s.max(v.abs()));
            if a > tol {
                failing_nodes += 1;
            }
            if a > max_abs {
                max_abs = a;
                witness = i;
            }
        }
        Ok(ThomasThetaField {
            grid: grid.clone(),
            residuals,
            tol,
            failing_nodes,
            max_abs,
            witness,
        })
    }

    fn theta_step<T: Real>(
        &self,
        grid: &GridDomain<T, 2>,
        substeps: usize,
        from: usize,
        to: usize,
        axis: usize,
        theta: T,
    ) -> Result<T> {
        let x0 = grid.point(from);
        let len = grid.point(to)[axis] - x0[axis];
        let out = rk4_segment(x0, axis, len, substeps, &theta, |x, th: &T| {
            Ok(self.point(x)?.theta_rhs(*th)[axis])
        })?;
        if !out.is_finite() {
            return Err(Error::StepFailure { point: point_f64(&x0) });
        }
        Ok(out)
    }

    /// Integrates the angle equation along staircase lattice paths from `x0`.
    pub fn integrate_theta<T: Real>(
        &self,
        grid: &GridDomain<T, 2>,
        x0: &[T; 2],
        theta0: T,
        substeps: usize,
    ) -> Result<ThetaSolution<T>> {
        let base = grid.node_at(x0)?;
        let step = |from: usize, to: usize, axis: usize, th: &T| self.theta_step(grid, substeps, from, to, axis, *th);
        let values = grid.propagate(base, theta0, step)?;
        let (path_mismatch, mismatch_node) = grid.loop_mismatch(&values, step, |a: &T, b: &T| (*a - *b).abs())?;
        Ok(ThetaSolution {
            theta: GridFunction::new(grid.clone(), values)?,
            base_node: base,
            x0: *x0,
            theta0,
            path_mismatch,
            mismatch_node,
        })
    }

    /// Builds `w = V⁻¹ R(θ) Ṽ`, integrates `ξ` from `ξ(x₀) = 0` along the same
    /// lattice paths and measures both defects.
    pub fn reconstruct_xi<T: Real>(&self, sol: &ThetaSolution<T>) -> Result<Reconstruction<T>> {
        use rayon::prelude::*;
        let grid = &sol.theta.grid;
        let w: Vec<Mat<T, 2>> = (0..grid.len())
            .into_par_iter()
            .map(|i| Ok(self.point(&grid.point(i))?.frame(sol.theta.values[i])))
            .collect::<Result<_>>()?;
        let (xi, curl_defect) = grid.integrate_gradient(&w, sol.base_node)?;
        let (metric_residual, node_residual) = pullback_residual(grid, &xi, &self.g, &self.gt)?;
        Ok(Reconstruction {
            xi: GridFunction::new(grid.clone(), xi)?,
            w,
            curl_defect,
            metric_residual,
            node_residual,
        })
    }
}

/// Default path tolerance: `1e-5 × diameter`.
pub fn default_tol_path<T: Real, const N: usize>(grid: &GridDomain<T, N>) -> T {
    T::lit(tol::TOL_PATH_FACTOR) * grid.diameter()
}
