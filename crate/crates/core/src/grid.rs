//! Rectangular grids, finite differences and lattice-path integration.

use rayon::prelude::*;

use crate::{Error, Real, Result};

/// Axis-aligned box sampled at `nodes[k]` points per axis. Linear node
/// indices run fastest along axis 0.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDomain<T, const N: usize> {
    pub lower: [T; N],
    pub upper: [T; N],
    pub nodes: [usize; N],
    pub spacing: [T; N],
}

/// Values of a field at every node of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T, const N: usize, V> {
    pub grid: GridDomain<T, N>,
    pub values: Vec<V>,
}

impl<T: Real, const N: usize, V> GridFunction<T, N, V> {
    pub fn new(grid: GridDomain<T, N>, values: Vec<V>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "grid function has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }
}

impl<T: Real, const N: usize> GridDomain<T, N> {
    pub fn new(lower: [T; N], upper: [T; N], nodes: [usize; N]) -> Result<Self> {
        let mut spacing = [T::zero(); N];
        for k in 0..N {
            if nodes[k] < 3 {
                return Err(Error::InvalidInput(format!(
                    "axis {} has {} nodes, at least 3 required",
                    k + 1,
                    nodes[k]
                )));
            }
            if !(upper[k] > lower[k]) || !lower[k].is_finite() || !upper[k].is_finite() {
                return Err(Error::InvalidInput(format!(
                    "axis {} has empty or invalid extent [{}, {}]",
                    k + 1,
                    lower[k],
                    upper[k]
                )));
            }
            spacing[k] = (upper[k] - lower[k]) / T::from_usize(nodes[k] - 1).unwrap();
        }
        Ok(Self {
            lower,
            upper,
            nodes,
            spacing,
        })
    }

    /// Same box and node count on every axis.
    pub fn cube(lower: T, upper: T, nodes: usize) -> Result<Self> {
        Self::new([lower; N], [upper; N], [nodes; N])
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, multi: [usize; N]) -> usize {
        let mut idx = 0;
        for k in (0..N).rev() {
            idx = idx * self.nodes[k] + multi[k];
        }
        idx
    }

    pub fn multi(&self, mut idx: usize) -> [usize; N] {
        let mut m = [0; N];
        for k in 0..N {
            m[k] = idx % self.nodes[k];
            idx /= self.nodes[k];
        }
        m
    }

    pub fn coord(&self, axis: usize, i: usize) -> T {
        if i + 1 == self.nodes[axis] {
            self.upper[axis]
        } else {
            self.lower[axis] + self.spacing[axis] * T::from_usize(i).unwrap()
        }
    }

    pub fn point(&self, idx: usize) -> [T; N] {
        let m = self.multi(idx);
        std::array::from_fn(|k| self.coord(k, m[k]))
    }

    pub fn points(&self) -> Vec<[T; N]> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn center(&self) -> [T; N] {
        std::array::from_fn(|k| T::lit(0.5) * (self.lower[k] + self.upper[k]))
    }

    pub fn diameter(&self) -> T {
        (0..N)
            .fold(T::zero(), |s, k| {
                let d = self.upper[k] - self.lower[k];
                s + d * d
            })
            .sqrt()
    }

    pub fn volume(&self) -> T {
        (0..N).fold(T::one(), |s, k| s * (self.upper[k] - self.lower[k]))
    }

    /// Node whose coordinates equal `x` up to 1e-9 of the spacing.
    pub fn node_at(&self, x: &[T; N]) -> Result<usize> {
        let mut m = [0; N];
        for k in 0..N {
            let t = (x[k] - self.lower[k]) / self.spacing[k];
            let r = t.round();
            if (t - r).abs() > T::lit(1e-9) || r < T::zero() || r > T::from_usize(self.nodes[k] - 1).unwrap() {
                return Err(Error::InvalidInput(format!(
                    "point {:?} is not a grid node",
                    crate::point_f64(x)
                )));
            }
            m[k] = r.to_usize().unwrap();
        }
        Ok(self.index(m))
    }

    /// Node closest to `x` (clamped into the box).
    pub fn nearest_node(&self, x: &[T; N]) -> usize {
        let m = std::array::from_fn(|k| {
            let t = ((x[k] - self.lower[k]) / self.spacing[k]).round();
            let hi = T::from_usize(self.nodes[k] - 1).unwrap();
            t.max(T::zero()).min(hi).to_usize().unwrap()
        });
        self.index(m)
    }

    /// Trapezoidal quadrature weight of a node.
    pub fn weight(&self, idx: usize) -> T {
        let m = self.multi(idx);
        let mut w = T::one();
        for k in 0..N {
            w = w * self.spacing[k];
            if m[k] == 0 || m[k] + 1 == self.nodes[k] {
                w = w * T::lit(0.5);
            }
        }
        w
    }

    /// Trapezoidal integral of nodal values.
    pub fn integrate(&self, values: &[T]) -> T {
        values
            .iter()
            .enumerate()
            .fold(T::zero(), |s, (i, &v)| s + self.weight(i) * v)
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let m = self.multi(idx);
        (0..N).any(|k| m[k] == 0 || m[k] + 1 == self.nodes[k])
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.nodes[..axis].iter().product()
    }

    /// Stencil `(node, coefficient)` of `∂_axis` at `idx`: central in the
    /// interior, second-order one-sided on the boundary.
    pub fn stencil(&self, idx: usize, axis: usize) -> [(usize, T); 3] {
        let m = self.multi(idx)[axis];
        let s = self.stride(axis);
        let h = self.spacing[axis];
        let half = T::lit(0.5) / h;
        if m == 0 {
            [
                (idx, T::lit(-1.5) / h),
                (idx + s, T::lit(2.0) / h),
                (idx + 2 * s, -half),
            ]
        } else if m + 1 == self.nodes[axis] {
            [(idx, T::lit(1.5) / h), (idx - s, T::lit(-2.0) / h), (idx - 2 * s, half)]
        } else {
            [(idx + s, half), (idx - s, -half), (idx, T::zero())]
        }
    }

    /// Finite-difference Jacobian of a vector field: `out[node][s][k] = ∂_k f^s`.
    pub fn gradient<const M: usize>(&self, f: &[[T; M]]) -> Vec<[[T; N]; M]> {
        (0..self.len())
            .into_par_iter()
            .map(|idx| {
                let mut d = [[T::zero(); N]; M];
                for k in 0..N {
                    for (j, c) in self.stencil(idx, k) {
                        for s in 0..M {
                            d[s][k] = d[s][k] + c * f[j][s];
                        }
                    }
                }
                d
            })
            .collect()
    }

    /// Adjoint of [`Self::gradient`]: returns `Dᵀ g`.
    pub fn gradient_adjoint<const M: usize>(&self, g: &[[[T; N]; M]]) -> Vec<[T; M]> {
        let mut out = vec![[T::zero(); M]; self.len()];
        for idx in 0..self.len() {
            for k in 0..N {
                for (j, c) in self.stencil(idx, k) {
                    for s in 0..M {
                        out[j][s] = out[j][s] + c * g[idx][s][k];
                    }
                }
            }
        }
        out
    }

    /// Fourth-order stencil of `∂_axis` at `idx`; needs at least 5 nodes on
    /// the axis.
    pub fn stencil4(&self, idx: usize, axis: usize) -> [(usize, T); 5] {
        let m = self.multi(idx)[axis];
        let n = self.nodes[axis];
        let s = self.stride(axis);
        let h12 = T::lit(12.0) * self.spacing[axis];
        let at = |off: isize, c: f64| ((idx as isize + off * s as isize) as usize, T::lit(c) / h12);
        if m == 0 {
            [at(0, -25.0), at(1, 48.0), at(2, -36.0), at(3, 16.0), at(4, -3.0)]
        } else if m == 1 {
            [at(-1, -3.0), at(0, -10.0), at(1, 18.0), at(2, -6.0), at(3, 1.0)]
        } else if m + 1 == n {
            [at(0, 25.0), at(-1, -48.0), at(-2, 36.0), at(-3, -16.0), at(-4, 3.0)]
        } else if m + 2 == n {
            [at(1, 3.0), at(0, 10.0), at(-1, -18.0), at(-2, 6.0), at(-3, -1.0)]
        } else {
            [at(-2, 1.0), at(-1, -8.0), at(1, 8.0), at(2, -1.0), at(0, 0.0)]
        }
    }

    /// Fourth-order counterpart of [`Self::gradient`].
    pub fn gradient4<const M: usize>(&self, f: &[[T; M]]) -> Result<Vec<[[T; N]; M]>> {
        if let Some(k) = (0..N).find(|&k| self.nodes[k] < 5) {
            return Err(Error::InvalidInput(format!(
                "fourth-order differences need 5 nodes per axis, axis {} has {}",
                k + 1,
                self.nodes[k]
            )));
        }
        Ok((0..self.len())
            .into_par_iter()
            .map(|idx| {
                let mut d = [[T::zero(); N]; M];
                for k in 0..N {
                    for (j, c) in self.stencil4(idx, k) {
                        for s in 0..M {
                            d[s][k] = d[s][k] + c * f[j][s];
                        }
                    }
                }
                d
            })
            .collect())
    }

    /// Visits every node along staircase lattice paths from `origin`: first
    /// along axis 0, then axis 1, then axis 2. `step(from, to, axis, state)`
    /// advances the state along one edge.
    pub fn propagate<S, F>(&self, origin: usize, init: S, step: F) -> Result<Vec<S>>
    where
        S: Clone + Send + Sync,
        F: Fn(usize, usize, usize, &S) -> Result<S> + Sync,
    {
        let o = self.multi(origin);
        let mut out: Vec<Option<S>> = vec![None; self.len()];
        out[origin] = Some(init);
        for axis in 0..N {
            let seeds: Vec<usize> = (0..self.len())
                .filter(|&i| {
                    let m = self.multi(i);
                    (axis..N).all(|b| m[b] == o[b])
                })
                .collect();
            let s = self.stride(axis);
            let lines: Vec<Vec<(usize, S)>> = seeds
                .par_iter()
                .map(|&seed| -> Result<Vec<(usize, S)>> {
                    let start = out[seed].clone().expect("seed reached by earlier axis");
                    let mut line = Vec::new();
                    let pos = o[axis];
                    let mut state = start.clone();
                    let mut cur = seed;
                    for _ in pos + 1..self.nodes[axis] {
                        let next = cur + s;
                        state = step(cur, next, axis, &state)?;
                        line.push((next, state.clone()));
                        cur = next;
                    }
                    let mut state = start;
                    let mut cur = seed;
                    for _ in 0..pos {
                        let next = cur - s;
                        state = step(cur, next, axis, &state)?;
                        line.push((next, state.clone()));
                        cur = next;
                    }
                    Ok(line)
                })
                .collect::<Result<_>>()?;
            for line in lines {
                for (i, v) in line {
                    out[i] = Some(v);
                }
            }
        }
        Ok(out.into_iter().map(|v| v.expect("all nodes reached")).collect())
    }

    /// Trapezoidal line integration of `∇ξ ≈ w` (`w[s][k] = ∂ₖξˢ`) from
    /// `ξ(base) = 0` along the staircase paths, with the largest cell loop
    /// integral of `w · dx`.
    pub fn integrate_gradient(&self, w: &[[[T; N]; N]], base: usize) -> Result<(Vec<[T; N]>, T)> {
        let step = |from: usize, to: usize, axis: usize, xi: &[T; N]| -> Result<[T; N]> {
            let half = T::lit(0.5) * (self.point(to)[axis] - self.point(from)[axis]);
            Ok(std::array::from_fn(|s| {
                xi[s] + half * (w[from][s][axis] + w[to][s][axis])
            }))
        };
        let xi = self.propagate(base, [T::zero(); N], step)?;
        let (curl, _) = self.loop_mismatch(&xi, step, |a: &[T; N], b: &[T; N]| {
            (0..N).fold(T::zero(), |m, s| m.max((a[s] - b[s]).abs()))
        })?;
        Ok((xi, curl))
    }

    /// Largest disagreement between the two two-edge routes across every
    /// elementary cell face, starting from the stored value at the base node.
    /// Returns the maximum and the base node where it occurs.
    pub fn loop_mismatch<S, F, D>(&self, values: &[S], step: F, dist: D) -> Result<(T, usize)>
    where
        S: Clone + Send + Sync,
        F: Fn(usize, usize, usize, &S) -> Result<S> + Sync,
        D: Fn(&S, &S) -> T + Sync,
    {
        let faces: Vec<(usize, usize, usize)> = (0..self.len())
            .flat_map(|i| {
                let m = self.multi(i);
                let mut v = Vec::new();
                for a in 0..N {
                    for b in a + 1..N {
                        if m[a] + 1 < self.nodes[a] && m[b] + 1 < self.nodes[b] {
                            v.push((i, a, b));
                        }
                    }
                }
                v
            })
            .collect();
        let defects: Vec<(T, usize)> = faces
            .par_iter()
            .map(|&(i, a, b)| -> Result<(T, usize)> {
                let (sa, sb) = (self.stride(a), self.stride(b));
                let r1 = step(i, i + sa, a, &values[i])?;
                let r1 = step(i + sa, i + sa + sb, b, &r1)?;
                let r2 = step(i, i + sb, b, &values[i])?;
                let r2 = step(i + sb, i + sa + sb, a, &r2)?;
                Ok((dist(&r1, &r2), i))
            })
            .collect::<Result<_>>()?;
        Ok(defects
            .into_iter()
            .fold((T::zero(), 0), |acc, d| if d.0 > acc.0 { d } else { acc }))
    }
}

/// States that RK4 can combine linearly.
pub trait LinearState<T>: Clone {
    /// `self + a * other`
    fn axpy(&self, a: T, other: &Self) -> Self;
}

impl<T: Real> LinearState<T> for T {
    fn axpy(&self, a: T, other: &Self) -> Self {
        *self + a * *other
    }
}

impl<T: Real, const M: usize> LinearState<T> for [T; M] {
    fn axpy(&self, a: T, other: &Self) -> Self {
        std::array::from_fn(|i| self[i] + a * other[i])
    }
}

impl<T: Real, const M: usize, const K: usize> LinearState<T> for [[T; K]; M] {
    fn axpy(&self, a: T, other: &Self) -> Self {
        std::array::from_fn(|i| std::array::from_fn(|j| self[i][j] + a * other[i][j]))
    }
}

/// Classical RK4 for `dy/dt = f(x(t), y)` along the straight segment from
/// `x0` to `x1`, with `t` the signed arc length along `axis`.
pub fn rk4_segment<T, const N: usize, S, F>(
    x0: [T; N],
    axis: usize,
    length: T,
    substeps: usize,
    y0: &S,
    f: F,
) -> Result<S>
where
    T: Real,
    S: LinearState<T>,
    F: Fn(&[T; N], &S) -> Result<S>,
{
    let n = substeps.max(1);
    let h = length / T::from_usize(n).unwrap();
    let half = T::lit(0.5);
    let sixth = h / T::lit(6.0);
    let mut y = y0.clone();
    let mut x = x0;
    for k in 0..n {
        x[axis] = x0[axis] + h * T::from_usize(k).unwrap();
        let mut xm = x;
        xm[axis] = x[axis] + half * h;
        let mut xe = x;
        xe[axis] = x0[axis] + h * T::from_usize(k + 1).unwrap();
        let k1 = f(&x, &y)?;
        let k2 = f(&xm, &y.axpy(half * h, &k1))?;
        let k3 = f(&xm, &y.axpy(half * h, &k2))?;
        let k4 = f(&xe, &y.axpy(h, &k3))?;
        y = y
            .axpy(sixth, &k1)
            .axpy(T::lit(2.0) * sixth, &k2)
            .axpy(T::lit(2.0) * sixth, &k3)
            .axpy(sixth, &k4);
    }
    Ok(y)
}
