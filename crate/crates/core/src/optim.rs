//! Limited-memory BFGS with a monotone backtracking line search.

use std::collections::VecDeque;

use crate::{tol, Error, Real, Result};

#[derive(Clone, Copy, Debug)]
pub struct LbfgsOptions<T> {
    pub max_iter: usize,
    /// Stop when `‖∇f‖₂ ≤ gtol`.
    pub gtol: T,
    /// Stop when the objective falls to or below this value.
    pub target: T,
    /// Stop when an accepted step decreases `f` by less than `ftol·max(1, |f|)`.
    pub ftol: T,
    pub memory: usize,
}

impl<T: Real> Default for LbfgsOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            gtol: T::lit(1e-10),
            target: T::zero(),
            ftol: T::lit(1e-15),
            memory: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry<T> {
    pub iteration: usize,
    pub value: T,
    /// Length of the accepted step; zero for the initial point.
    pub step: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Target,
    Stalled,
    MaxIterations,
    LineSearch,
}

#[derive(Clone, Debug)]
pub struct LbfgsResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub grad_norm: T,
    pub trace: Vec<TraceEntry<T>>,
    pub termination: Termination,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (x, y)| s + *x * *y)
}

/// Minimizes `f`, which returns the value and gradient. Every accepted step
/// strictly decreases the value (Armijo condition); trial points where `f`
/// is non-finite or fails with a domain error are rejected by halving.
pub fn lbfgs<T, F>(mut f: F, x0: Vec<T>, opts: &LbfgsOptions<T>) -> Result<LbfgsResult<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("objective at the initial point".into()));
    }
    let mut trace = vec![TraceEntry {
        iteration: 0,
        value: fx,
        step: T::zero(),
    }];
    let mut hist: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::new();
    let c1 = T::lit(1e-4);
    let half = T::lit(0.5);
    let mut termination = Termination::MaxIterations;
    for iter in 1..=opts.max_iter {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm <= opts.gtol {
            termination = Termination::Gradient;
            break;
        }
        if fx <= opts.target {
            termination = Termination::Target;
            break;
        }
        // Two-loop recursion.
        let mut q = g.clone();
        let mut alpha = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = *rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi = *qi - a * *yi;
            }
            alpha.push(a);
        }
        let gamma = match hist.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => T::one() / gnorm.max(T::one()),
        };
        for qi in q.iter_mut() {
            *qi = *qi * gamma;
        }
        for ((s, y, rho), a) in hist.iter().zip(alpha.into_iter().rev()) {
            let b = *rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi = *qi + (a - b) * *si;
            }
        }
        let mut d: Vec<T> = q.into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if !(slope < T::zero()) {
            hist.clear();
            d = g.iter().map(|v| -*v / gnorm.max(T::one())).collect();
            slope = dot(&g, &d);
        }
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..tol::MAX_HALVINGS {
            let xt: Vec<T> = x.iter().zip(&d).map(|(a, b)| *a + t * *b).collect();
            match f(&xt) {
                Ok((ft, gt)) if ft.is_finite() && gt.iter().all(|v| v.is_finite()) => {
                    if ft <= fx + c1 * t * slope && ft < fx {
                        accepted = Some((xt, ft, gt));
                        break;
                    }
                }
                Ok(_) | Err(Error::NonFinite(_)) | Err(Error::Domain { .. }) | Err(Error::NotSpd { .. }) => {}
                Err(e) => return Err(e),
            }
            t = t * half;
        }
        let Some((xn, fnew, gn)) = accepted else {
            termination = Termination::LineSearch;
            break;
        };
        assert!(fnew <= fx);
        let s: Vec<T> = xn.iter().zip(&x).map(|(a, b)| *a - *b).collect();
        let y: Vec<T> = gn.iter().zip(&g).map(|(a, b)| *a - *b).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&y, &y) {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s.clone(), y, sy.recip()));
        }
        let decrease = fx - fnew;
        let step = dot(&s, &s).sqrt();
        x = xn;
        g = gn;
        let prev = fx;
        fx = fnew;
        trace.push(TraceEntry {
            iteration: iter,
            value: fx,
            step,
        });
        if decrease <= opts.ftol * prev.abs().max(T::one()) {
            termination = Termination::Stalled;
            break;
        }
    }
    let grad_norm = dot(&g, &g).sqrt();
    Ok(LbfgsResult {
        x,
        value: fx,
        grad_norm,
        trace,
        termination,
    })
}
