//! Discrete incompatibility energy
//!
//! ```text
//! E(ξ) = ∫_Ω dist²(G^{1/2} ∇ξ G̃^{-1/2}, SO(n)) dx
//! ```
//!
//! on a grid, with finite-difference gradients and trapezoidal quadrature.
//! `E` vanishes exactly when `ξ` solves `(∇ξ)ᵀ G ∇ξ = G̃` with `det ∇ξ > 0`,
//! and its infimum over deformations measures how far the pair of metrics is
//! from being compatible.

use rayon::prelude::*;

use crate::geometry::MetricField;
use crate::grid::{GridDomain, GridFunction};
use crate::linalg::{self, Mat};
use crate::optim::{self, LbfgsOptions, Termination, TraceEntry};
use crate::{point_f64, Error, Real, Result};

/// Nodal deformation together with its finite-difference gradient.
///
/// The gradient `gradient()[node][s][k] = ∂_k ξ^s` is recomputed on every
/// update, so it always matches the values.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformationField<T, const N: usize> {
    grid: GridDomain<T, N>,
    values: Vec<[T; N]>,
    gradient: Vec<Mat<T, N>>,
}

impl<T: Real, const N: usize> DeformationField<T, N> {
    pub fn new(grid: GridDomain<T, N>, values: Vec<[T; N]>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "deformation has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFinite(format!(
                "deformation value at node {i} ({:?})",
                point_f64(&grid.point(i))
            )));
        }
        let gradient = grid.gradient(&values);
        Ok(Self { grid, values, gradient })
    }

    pub fn from_fn(grid: GridDomain<T, N>, f: impl Fn(&[T; N]) -> [T; N]) -> Result<Self> {
        let values = grid.points().iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn identity(grid: GridDomain<T, N>) -> Result<Self> {
        Self::from_fn(grid, |x| *x)
    }

    /// `ξ(x) = a (x − c)` with `c` the domain center.
    pub fn affine(grid: GridDomain<T, N>, a: &Mat<T, N>) -> Result<Self> {
        let c = grid.center();
        Self::from_fn(grid, |x| {
            let d: [T; N] = std::array::from_fn(|k| x[k] - c[k]);
            linalg::mat_vec(a, &d)
        })
    }

    pub fn grid(&self) -> &GridDomain<T, N> {
        &self.grid
    }

    pub fn values(&self) -> &[[T; N]] {
        &self.values
    }

    pub fn gradient(&self) -> &[Mat<T, N>] {
        &self.gradient
    }

    pub fn set_values(&mut self, values: Vec<[T; N]>) -> Result<()> {
        *self = Self::new(self.grid.clone(), values)?;
        Ok(())
    }

    pub fn into_grid_function(self) -> GridFunction<T, N, [T; N]> {
        GridFunction {
            grid: self.grid,
            values: self.values,
        }
    }

    fn flat(&self) -> Vec<T> {
        self.values.iter().flatten().copied().collect()
    }

    fn unflatten(x: &[T]) -> Vec<[T; N]> {
        x.chunks_exact(N).map(|c| std::array::from_fn(|k| c[k])).collect()
    }
}

/// Orientation of a deformation: `min det ∇ₕξ` over the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationReport<T> {
    pub min_det: T,
    pub min_node: usize,
    pub min_point: Vec<f64>,
    /// Nodes where `det ∇ₕξ ≤ 0`.
    pub non_positive: usize,
    /// True when the orientation condition fails somewhere.
    pub flagged: bool,
}

pub fn orientation_check<T: Real, const N: usize>(xi: &DeformationField<T, N>) -> OrientationReport<T> {
    let dets: Vec<T> = xi.gradient.iter().map(linalg::det).collect();
    let (min_node, min_det) = dets
        .iter()
        .copied()
        .enumerate()
        .fold((0, T::infinity()), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
    let non_positive = dets.iter().filter(|d| **d <= T::zero()).count();
    OrientationReport {
        min_det,
        min_node,
        min_point: point_f64(&xi.grid.point(min_node)),
        non_positive,
        flagged: non_positive > 0,
    }
}

/// Energy functional on a fixed grid with the metric factors precomputed.
#[derive(Clone, Debug)]
pub struct IncompatEnergy<T, const N: usize> {
    grid: GridDomain<T, N>,
    /// `G^{1/2}` per node.
    v: Vec<Mat<T, N>>,
    /// `G̃^{-1/2}` per node.
    vt_inv: Vec<Mat<T, N>>,
    weights: Vec<T>,
}

fn sqrt_at<T: Real, const N: usize>(m: &MetricField<N>, x: &[T; N]) -> Result<Mat<T, N>> {
    let g = m.value_spd(x)?;
    linalg::sqrt_spd(&g).ok_or_else(|| Error::NotSpd {
        point: point_f64(x),
        min_eigenvalue: linalg::min_eigenvalue(&g).to_f64_lossy(),
    })
}

impl<T: Real, const N: usize> IncompatEnergy<T, N> {
    pub fn new(g: &MetricField<N>, gt: &MetricField<N>, grid: GridDomain<T, N>) -> Result<Self> {
        let pts = grid.points();
        let v = pts.par_iter().map(|x| sqrt_at(g, x)).collect::<Result<Vec<_>>>()?;
        let vt_inv = pts
            .par_iter()
            .map(|x| {
                let s = sqrt_at(gt, x)?;
                linalg::inverse(&s).ok_or_else(|| Error::NotSpd {
                    point: point_f64(x),
                    min_eigenvalue: 0.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let weights = (0..grid.len()).map(|i| grid.weight(i)).collect();
        Ok(Self {
            grid,
            v,
            vt_inv,
            weights,
        })
    }

    pub fn grid(&self) -> &GridDomain<T, N> {
        &self.grid
    }

    fn check_grid(&self, xi: &DeformationField<T, N>) -> Result<()> {
        if xi.grid != self.grid {
            return Err(Error::InvalidInput("deformation lives on a different grid".into()));
        }
        Ok(())
    }

    /// `G^{1/2} ∇ₕξ G̃^{-1/2}` at a node.
    pub fn transformed(&self, node: usize, d: &Mat<T, N>) -> Mat<T, N> {
        linalg::mul(&linalg::mul(&self.v[node], d), &self.vt_inv[node])
    }

    /// Nodal `dist²(G^{1/2} ∇ₕξ G̃^{-1/2}, SO(n))`.
    pub fn density(&self, xi: &DeformationField<T, N>) -> Result<Vec<T>> {
        self.check_grid(xi)?;
        let out: Vec<T> = xi
            .gradient
            .par_iter()
            .enumerate()
            .map(|(i, d)| linalg::dist2_so(&self.transformed(i, d)))
            .collect();
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "energy density at {:?}",
                point_f64(&self.grid.point(i))
            )));
        }
        Ok(out)
    }

    pub fn energy(&self, xi: &DeformationField<T, N>) -> Result<T> {
        Ok(self.grid.integrate(&self.density(xi)?))
    }

    /// Energy and its gradient with respect to the nodal values.
    pub fn value_and_gradient(&self, values: &[[T; N]]) -> Result<(T, Vec<[T; N]>)> {
        if values.len() != self.grid.len() {
            return Err(Error::InvalidInput("value count does not match the grid".into()));
        }
        let d = self.grid.gradient(values);
        let two = T::lit(2.0);
        let parts: Vec<(T, Mat<T, N>)> = d
            .par_iter()
            .enumerate()
            .map(|(i, di)| {
                let f = self.transformed(i, di);
                let (r, d2) = linalg::nearest_rotation(&f);
                // ∂dist²/∂F = 2(F − R); chain through F = V D Ṽ⁻¹ (both factors symmetric).
                let df = linalg::scale(&linalg::sub(&f, &r), two * self.weights[i]);
                let dd = linalg::mul(&linalg::mul(&self.v[i], &df), &self.vt_inv[i]);
                (self.weights[i] * d2, dd)
            })
            .collect();
        let value: T = parts.iter().map(|p| p.0).sum();
        if !value.is_finite() {
            return Err(Error::NonFinite("incompatibility energy".into()));
        }
        let dd: Vec<Mat<T, N>> = parts.into_iter().map(|p| p.1).collect();
        Ok((value, self.grid.gradient_adjoint(&dd)))
    }
}

/// Evaluates `E(ξ)` for the metrics `g`, `gt` on the grid of `xi`.
pub fn incompat_energy<T: Real, const N: usize>(
    g: &MetricField<N>,
    gt: &MetricField<N>,
    xi: &DeformationField<T, N>,
) -> Result<T> {
    IncompatEnergy::new(g, gt, xi.grid.clone())?.energy(xi)
}

/// Affine map matching the metrics at the domain center: `∇ξ = V⁻¹Ṽ` there.
pub fn affine_init<T: Real, const N: usize>(
    g: &MetricField<N>,
    gt: &MetricField<N>,
    grid: GridDomain<T, N>,
) -> Result<DeformationField<T, N>> {
    let c = grid.center();
    let v = sqrt_at(g, &c)?;
    let vt = sqrt_at(gt, &c)?;
    let v_inv = linalg::inverse(&v).ok_or_else(|| Error::NotSpd {
        point: point_f64(&c),
        min_eigenvalue: 0.0,
    })?;
    DeformationField::affine(grid, &linalg::mul(&v_inv, &vt))
}

#[derive(Clone, Debug)]
pub struct EnergyMinimization<T, const N: usize> {
    pub xi: DeformationField<T, N>,
    /// Final energy; the estimate of the incompatibility defect on this grid.
    pub energy: T,
    pub grad_norm: T,
    pub trace: Vec<TraceEntry<T>>,
    pub termination: Termination,
}

/// L-BFGS descent on the nodal values starting from `init`.
pub fn minimize_energy<T: Real, const N: usize>(
    energy: &IncompatEnergy<T, N>,
    init: &DeformationField<T, N>,
    opts: &LbfgsOptions<T>,
) -> Result<EnergyMinimization<T, N>> {
    energy.check_grid(init)?;
    let f = |x: &[T]| -> Result<(T, Vec<T>)> {
        let vals = DeformationField::<T, N>::unflatten(x);
        let (e, g) = energy.value_and_gradient(&vals)?;
        Ok((e, g.into_iter().flatten().collect()))
    };
    let res = optim::lbfgs(f, init.flat(), opts)?;
    let xi = DeformationField::new(init.grid.clone(), DeformationField::<T, N>::unflatten(&res.x))?;
    Ok(EnergyMinimization {
        xi,
        energy: res.value,
        grad_norm: res.grad_norm,
        trace: res.trace,
        termination: res.termination,
    })
}
