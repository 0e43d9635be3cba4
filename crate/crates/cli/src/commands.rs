use std::path::Path;

use anyhow::{Context, Result};
use isodesign::dimred::{self, LameParams, Midplate, Warp};
use isodesign::energy::{self, DeformationField, IncompatEnergy};
use isodesign::optim::LbfgsOptions;
use isodesign::planar::{self, PlanarReduction};
use isodesign::tde::FrameSystem;
use isodesign::{linalg, tol, GridDomain, MetricField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::problem::{Problem, Which};
use crate::report::{coord_header, matrix_header, num, point, write_csv, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Init {
    /// Affine map with gradient `G^{-1/2} G̃^{1/2}` at the domain center.
    Affine,
    Identity,
}

pub struct Ctx<'a> {
    pub problem: &'a Problem,
    pub out: &'a Path,
    pub seed: u64,
    pub report: Report,
}

fn flat<const N: usize>(m: &[[f64; N]; N]) -> impl Iterator<Item = f64> + '_ {
    m.iter().flatten().copied()
}

/// Re-types a metric for the two-dimensional-only routines.
fn as_planar<const N: usize>(m: &MetricField<N>) -> Result<MetricField<2>> {
    Ok(MetricField::<2>::from_upper(|i, j| m.entry(i, j).clone())?)
}

fn metrics<const N: usize>(p: &Problem) -> Result<(MetricField<N>, MetricField<N>)> {
    Ok((p.metric::<N>(Which::G)?, p.metric::<N>(Which::Gt)?))
}

/// `x0` from `[solver]`, else the node nearest to the domain center.
fn base_point<const N: usize>(p: &Problem, grid: &GridDomain<f64, N>) -> Result<[f64; N]> {
    let center = grid.point(grid.nearest_node(&grid.center()));
    let x0 = p.array_or("x0", center)?;
    grid.node_at(&x0).map_err(|e| p.invalid(None, format!("x0: {e}")))?;
    Ok(x0)
}

fn count_where(xs: &[f64], pred: impl Fn(f64) -> bool) -> usize {
    xs.iter().filter(|&&x| pred(x)).count()
}

fn argmax(xs: &[f64]) -> (usize, f64) {
    xs.iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a })
}

pub fn curvature<const N: usize>(ctx: &mut Ctx) -> Result<()> {
    let p = ctx.problem;
    let grid = p.grid::<N>()?;
    let (g, gt) = metrics::<N>(p)?;
    let tol_curv = p.positive_or("tol_curv", tol::TOL_CURV)?;
    let planar = if N == 2 {
        Some((as_planar(&g)?, as_planar(&gt)?))
    } else {
        None
    };
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let x = grid.point(i);
            let mut row: Vec<f64> = x.to_vec();
            row.push(g.riemann(&x)?.norm());
            row.push(gt.riemann(&x)?.norm());
            if let Some((g2, gt2)) = &planar {
                let x2 = [x[0], x[1]];
                row.push(g2.gauss_curvature(&x2)?.riemann_form);
                row.push(gt2.gauss_curvature(&x2)?.riemann_form);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut header = coord_header(N);
    header.extend(["riemann_G".into(), "riemann_Gt".into()]);
    if N == 2 {
        header.extend(["gauss_G".into(), "gauss_Gt".into()]);
    }
    write_csv(&mut ctx.report, ctx.out, "curvature.csv", &header, &rows)?;

    let r = &mut ctx.report;
    let mut flat = [false; 2];
    for (k, (name, col)) in [("G", N), ("Gt", N + 1)].into_iter().enumerate() {
        let vals: Vec<f64> = rows.iter().map(|row| row[col]).collect();
        let (i, m) = argmax(&vals);
        r.real(&format!("max_riemann_{name}"), m);
        r.scalar(&format!("witness_{name}"), point(&grid.point(i)));
        flat[k] = m <= tol_curv;
        let text = if flat[k] {
            format!("{name} flat: max |Riemann| = {}", num(m))
        } else {
            format!("{name} curved: max |Riemann| = {} at {}", num(m), point(&grid.point(i)))
        };
        r.verdict(&format!("flat_{name}"), flat[k], text, tol_curv);
    }
    let text = match flat {
        [true, true] => "both metrics flat: local solutions exist",
        [true, false] => "G flat but Gt curved: no local solution",
        _ => "G curved: flatness alone does not decide",
    };
    r.verdict("pair", flat == [true, true], text, tol_curv);
    Ok(())
}

pub fn conformal_check<const N: usize>(ctx: &mut Ctx) -> Result<()> {
    let p = ctx.problem;
    let grid = p.grid::<N>()?;
    let mu = p.conformal_factor(Which::G)?;
    let f = p.conformal_exponent()?;
    let gt = p.metric::<N>(Which::Gt)?;
    let tol_curv = p.positive_or("tol_curv", tol::TOL_CURV)?;
    let gt2 = if N == 2 { Some(as_planar(&gt)?) } else { None };
    let gt3 = if N == 3 { Some(p.metric::<3>(Which::Gt)?) } else { None };
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let x = grid.point(i);
            let res = match (&gt2, &gt3) {
                (Some(m), _) => m.conformal_gauss_residual(&f, &[x[0], x[1]])?.abs(),
                (_, Some(m)) => linalg::max_abs(&m.conformal_ricci_residual(&f, &[x[0], x[1], x[2]])?),
                _ => unreachable!(),
            };
            let mut row = x.to_vec();
            row.push(res);
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut header = coord_header(N);
    header.push("residual".into());
    write_csv(&mut ctx.report, ctx.out, "conformal.csv", &header, &rows)?;

    let vals: Vec<f64> = rows.iter().map(|row| row[N]).collect();
    let (i, m) = argmax(&vals);
    let r = &mut ctx.report;
    r.scalar("mu", mu);
    r.scalar("f", &f);
    r.real("max_residual", m);
    r.scalar("witness", point(&grid.point(i)));
    let what = if N == 2 { "Gauss curvature" } else { "Ricci tensor" };
    let ok = m <= tol_curv;
    let text = if ok {
        format!("{what} of exp(2f) Gt vanishes: conformal condition holds")
    } else {
        format!(
            "{what} of exp(2f) Gt is {} at {}: conformal condition fails",
            num(m),
            point(&grid.point(i))
        )
    };
    r.verdict("conformal", ok, text, tol_curv);
    Ok(())
}

pub fn thomas2d(ctx: &mut Ctx) -> Result<()> {
    let p = ctx.problem;
    p.require_dim("thomas2d", &[2])?;
    let grid = p.grid::<2>()?;
    let (g, gt) = metrics::<2>(p)?;
    let red = PlanarReduction::new(g, gt)?;
    let tol_thomas = p.positive_or("tol_thomas", tol::TOL_THOMAS)?;
    let field = red.thomas_theta_field(&grid, tol_thomas)?;
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| {
            let r = field.residuals[i];
            let x = grid.point(i);
            vec![x[0], x[1], r[0], r[1], r[2], planar::normalized_first(r[0])]
        })
        .collect();
    let header: Vec<String> = ["x1", "x2", "r1", "r2", "r3", "r1_normalized"].map(String::from).into();
    write_csv(&mut ctx.report, ctx.out, "thomas2d.csv", &header, &rows)?;

    let r = &mut ctx.report;
    let n = grid.len();
    let wx = grid.point(field.witness);
    r.real("max_abs_residual", field.max_abs);
    r.scalar("witness", point(&wx));
    r.scalar("witness_residuals", {
        let w = field.residuals[field.witness];
        format!("{}, {}, {}", num(w[0]), num(w[1]), num(w[2]))
    });
    r.scalar("failing_nodes", format!("{}/{}", field.failing_nodes, n));
    let text = if field.holds() {
        "Thomas holds at every node".to_string()
    } else {
        format!(
            "Thomas fails at {}/{} nodes (worst at {})",
            field.failing_nodes,
            n,
            point(&wx)
        )
    };
    r.verdict("thomas", field.holds(), text, tol_thomas);
    Ok(())
}

pub fn solve_theta(ctx: &mut Ctx) -> Result<()> {
    let p = ctx.problem;
    p.require_dim("solve-theta", &[2])?;
    let grid = p.grid::<2>()?;
    let (g, gt) = metrics::<2>(p)?;
    let red = PlanarReduction::new(g, gt)?;
    let x0 = base_point(p, &grid)?;
    let theta0 = p.f64_or("theta0", 0.0)?;
    let substeps = p.usize_or("substeps", tol::RK4_SUBSTEPS)?.max(1);
    let tol_path = p.positive_or("tol_path", planar::default_tol_path(&grid))?;
    let tol_metric = p.positive_or("tol_metric", 1e-6)?;
    let sol = red.integrate_theta(&grid, &x0, theta0, substeps)?;
    let rec = red.reconstruct_xi(&sol)?;
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            let xi = rec.xi.values[i];
            vec![x[0], x[1], sol.theta.values[i], xi[0], xi[1], rec.node_residual[i]]
        })
        .collect();
    let header: Vec<String> = ["x1", "x2", "theta", "xi1", "xi2", "residual"].map(String::from).into();
    write_csv(&mut ctx.report, ctx.out, "theta.csv", &header, &rows)?;

    let r = &mut ctx.report;
    r.scalar("x0", point(&x0));
    r.real("theta0", theta0);
    r.real("path_mismatch", sol.path_mismatch);
    r.scalar("mismatch_at", point(&grid.point(sol.mismatch_node)));
    r.real("curl_defect", rec.curl_defect);
    r.real("metric_residual", rec.metric_residual);
    let ok = sol.path_mismatch <= tol_path;
    r.verdict(
        "path",
        ok,
        if ok {
            "theta is path independent"
        } else {
            "theta depends on the path: not integrable"
        },
        tol_path,
    );
    let ok = rec.curl_defect <= tol_path;
    r.verdict(
        "curl",
        ok,
        if ok {
            "frame is curl free"
        } else {
            "curl defect exceeds tolerance"
        },
        tol_path,
    );
    let ok = rec.metric_residual <= tol_metric;
    r.verdict(
        "metric",
        ok,
        format!("reconstructed xi metric residual {}", num(rec.metric_residual)),
        tol_metric,
    );
    Ok(())
}

pub fn thomas_nd<const N: usize>(ctx: &mut Ctx) -> Result<()> {
    let p = ctx.problem;
    let grid = p.grid::<N>()?;
    let (g, gt) = metrics::<N>(p)?;
    let sys = FrameSystem::new(g, gt);
    let center = sys.reference_frame(&grid.center())?;
    let half_width = p.positive_or("half_width", 0.25 * linalg::max_abs(&center))?;
    let samples = p.usize_or("samples", 200)?;
    if samples == 0 {
        return Err(p.invalid(None, "samples must be at least 1").into());
    }
    let tol_thomas = p.positive_or("tol_thomas", tol::TOL_THOMAS)?;
    let rep = sys.thomas_check(&grid, &center, half_width, samples, tol_thomas);

    let r = &mut ctx.report;
    r.scalar("samples", rep.samples);
    r.scalar("evaluated", rep.evaluated);
    r.scalar("skipped", rep.skipped);
    r.real("half_width", half_width);
    r.real("max_norm", rep.max_norm);
    r.scalar("witness_x", point(&rep.witness_x));
    r.scalar("witness_w", point(&flat(&rep.witness_w).collect::<Vec<_>>()));
    let text = if rep.holds() {
        format!("Thomas holds on {} samples", rep.evaluated)
    } else if rep.evaluated == 0 {
        "no sample could be evaluated".to_string()
    } else {
        format!(
            "Thomas fails: |C| = {} at x = {}",
            num(rep.max_norm),
            point(&rep.witness_x)
        )
    };
    r.verdict("thomas", rep.holds(), text, tol_thomas);
    Ok(())
}

pub fn integrate_frame<const N: usize>(ctx: &mut Ctx) -> Result<()> {
    let p = ctx.problem;
    let grid = p.grid::<N>()?;
    let (g, gt) = metrics::<N>(p)?;
    let sys = FrameSystem::new(g, gt);
    let x0 = base_point(p, &grid)?;
    let w0 = match p.list("w0")? {
        None => sys.reference_frame(&x0)?,
        Some(v) if v.len() == N * N => std::array::from_fn(|i| std::array::from_fn(|j| v[i * N + j])),
        Some(v) => {
            return Err(p
                .invalid(
                    None,
                    format!("w0 needs {} entries (row-major), found {}", N * N, v.len()),
                )
                .into())
        }
    };
    let substeps = p.usize_or("substeps", tol::RK4_SUBSTEPS)?.max(1);
    let tol_path = p.positive_or("tol_path", planar::default_tol_path(&grid))?;
    let tol_metric = p.positive_or("tol_metric", 1e-6)?;
    let sol = sys.integrate_frame(&grid, &x0, &w0, substeps)?;
    let rec = sys.reconstruct(&sol)?;
    let consistency = sys.frame_consistency(&sol)?;
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| {
            let mut row = grid.point(i).to_vec();
            row.extend(flat(&sol.w.values[i]));
            row.extend(rec.xi.values[i]);
            row.push(sol.node_defect[i]);
            row.push(rec.node_residual[i]);
            row
        })
        .collect();
    let mut header = coord_header(N);
    header.extend(matrix_header("w", N));
    header.extend((1..=N).map(|k| format!("xi{k}")));
    header.extend(["algebraic_defect".into(), "residual".into()]);
    write_csv(&mut ctx.report, ctx.out, "frame.csv", &header, &rows)?;

    let r = &mut ctx.report;
    r.scalar("x0", point(&x0));
    r.scalar("w0", point(&flat(&w0).collect::<Vec<_>>()));
    r.real("init_defect", sol.init_defect);
    r.scalar("exploratory", sol.exploratory);
    r.real("loop_mismatch", sol.loop_mismatch);
    r.scalar("mismatch_at", point(&grid.point(sol.mismatch_node)));
    r.real("algebraic_defect", sol.algebraic_defect);
    r.real("consistency", consistency);
    r.real("curl_defect", rec.curl_defect);
    r.real("metric_residual", rec.metric_residual);
    if sol.exploratory {
        r.note(format!(
            "w0 violates the algebraic constraint at x0 by {}; run is exploratory",
            num(sol.init_defect)
        ));
    }
    let ok = sol.loop_mismatch <= tol_path;
    r.verdict(
        "path",
        ok,
        if ok {
            "frame is path independent"
        } else {
            "frame depends on the path: not integrable"
        },
        tol_path,
    );
    let ok = sol.algebraic_defect <= tol_metric;
    r.verdict(
        "algebraic",
        ok,
        format!("algebraic defect {}", num(sol.algebraic_defect)),
        tol_metric,
    );
    let ok = rec.metric_residual <= tol_metric;
    r.verdict(
        "metric",
        ok,
        format!("reconstructed xi metric residual {}", num(rec.metric_residual)),
        tol_metric,
    );
    Ok(())
}

pub fn pointwise<const N: usize>(ctx: &mut Ctx) -> Result<()> {
    let p = ctx.problem;
    let grid = p.grid::<N>()?;
    let (g, gt) = metrics::<N>(p)?;
    let sys = FrameSystem::new(g, gt);
    let k1 = p.f64_or("K1", 1.0)?;
    let k2 = p.f64_or("K2", 1.0)?;
    let perturb = p.f64_or("perturb", 0.0)?;
    let tol_cost = p.positive_or("tol_cost", 1e-8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let kicks: Vec<[[f64; N]; N]> = (0..grid.len())
        .map(|_| std::array::from_fn(|_| std::array::from_fn(|_| perturb * rng.gen_range(-1.0..=1.0))))
        .collect();
    let results: Vec<_> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = grid.point(i);
            let w = linalg::add(&sys.reference_frame(&x)?, &kicks[i]);
            sys.pointwise_minimize(&x, k1, k2, &w)
        })
        .collect::<isodesign::Result<_>>()?;
    let rows: Vec<Vec<f64>> = results
        .iter()
        .enumerate()
        .map(|(i, res)| {
            let a: f64 = flat(&res.cost.a).map(|v| v * v).sum();
            let c: f64 = res.cost.c.iter().flatten().flatten().flatten().map(|v| v * v).sum();
            let mut row = grid.point(i).to_vec();
            row.extend([
                res.cost.value,
                k1 * a,
                k2 * c,
                res.iterations as f64,
                res.converged as u8 as f64,
            ]);
            row.extend(flat(&res.w));
            row
        })
        .collect();
    let mut header = coord_header(N);
    header.extend(["cost", "cost_a", "cost_c", "iterations", "converged"].map(String::from));
    header.extend(matrix_header("w", N));
    write_csv(&mut ctx.report, ctx.out, "pointwise.csv", &header, &rows)?;

    let costs: Vec<f64> = results.iter().map(|r| r.cost.value).collect();
    let (i, m) = argmax(&costs);
    let zero = count_where(&costs, |c| c <= tol_cost);
    let n = grid.len();
    let r = &mut ctx.report;
    r.real("K1", k1);
    r.real("K2", k2);
    r.real("perturb", perturb);
    r.scalar("seed", ctx.seed);
    r.real("max_cost", m);
    r.scalar("max_cost_at", point(&grid.point(i)));
    r.scalar("zero_cost_nodes", format!("{zero}/{n}"));
    r.scalar(
        "converged_nodes",
        format!("{}/{}", results.iter().filter(|r| r.converged).count(), n),
    );
    let text = if zero == n {
        "zero cost at every node (pointwise; integrability not implied)".to_string()
    } else {
        format!(
            "positive cost at {}/{} nodes (worst {} at {})",
            n - zero,
            n,
            num(m),
            point(&grid.point(i))
        )
    };
    r.verdict("zero_cost", zero == n, text, tol_cost);
    Ok(())
}

pub fn minimize_energy<const N: usize>(ctx: &mut Ctx, init: Init) -> Result<()> {
    let p = ctx.problem;
    let grid = p.grid::<N>()?;
    let (g, gt) = metrics::<N>(p)?;
    let defaults = LbfgsOptions::<f64>::default();
    let opts = LbfgsOptions {
        max_iter: p.usize_or("max_iter", defaults.max_iter)?,
        gtol: p.positive_or("gtol", defaults.gtol)?,
        target: p.f64_or("target", defaults.target)?,
        ..defaults
    };
    let tol_energy = p.positive_or("tol_energy", 1e-4)?;
    let e = IncompatEnergy::new(&g, &gt, grid.clone())?;
    let start = match init {
        Init::Affine => energy::affine_init(&g, &gt, grid.clone())?,
        Init::Identity => DeformationField::identity(grid.clone())?,
    };
    let initial = e.energy(&start)?;
    let res = energy::minimize_energy(&e, &start, &opts)?;
    let orient = energy::orientation_check(&res.xi);

    let trace: Vec<Vec<f64>> = res
        .trace
        .iter()
        .map(|t| vec![t.iteration as f64, t.value, t.step])
        .collect();
    let header: Vec<String> = ["iteration", "energy", "step"].map(String::from).into();
    write_csv(&mut ctx.report, ctx.out, "energy_trace.csv", &header, &trace)?;
    let dets: Vec<f64> = res.xi.gradient().iter().map(linalg::det).collect();
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| {
            let mut row = grid.point(i).to_vec();
            row.extend(res.xi.values()[i]);
            row.push(dets[i]);
            row
        })
        .collect();
    let mut header = coord_header(N);
    header.extend((1..=N).map(|k| format!("xi{k}")));
    header.push("det".into());
    write_csv(&mut ctx.report, ctx.out, "xi.csv", &header, &rows)?;

    let r = &mut ctx.report;
    r.scalar("init", format!("{init:?}").to_lowercase());
    r.real("initial_energy", initial);
    r.real("final_energy", res.energy);
    r.real("grad_norm", res.grad_norm);
    r.scalar("iterations", res.trace.last().map_or(0, |t| t.iteration));
    r.scalar("termination", format!("{:?}", res.termination));
    r.real("min_det", orient.min_det);
    r.scalar("min_det_at", point(&orient.min_point));
    r.scalar("non_positive_det_nodes", orient.non_positive);
    let ok = res.energy <= tol_energy;
    let text = if ok {
        format!("energy {} is below tolerance: compatible on this grid", num(res.energy))
    } else {
        format!(
            "energy plateau {} (estimate of the incompatibility, not a bound)",
            num(res.energy)
        )
    };
    r.verdict("energy", ok, text, tol_energy);
    r.verdict(
        "orientation",
        !orient.flagged,
        if orient.flagged {
            format!("det grad xi <= 0 at {} nodes", orient.non_positive)
        } else {
            "det grad xi > 0 at every node".to_string()
        },
        0.0,
    );
    Ok(())
}

pub fn dimred(ctx: &mut Ctx) -> Result<()> {
    let p = ctx.problem;
    p.require_dim("dimred", &[3])?;
    for which in [Which::G, Which::Gt] {
        if let Some(((i, j), line)) = p.entry_using_var(which, 2) {
            return Err(p
                .invalid(
                    Some(line),
                    format!(
                        "metric entry g{}{} depends on x3; dimred needs thickness-independent metrics",
                        i + 1,
                        j + 1
                    ),
                )
                .into());
        }
    }
    let grid = GridDomain::<f64, 2>::new(
        [p.lower[0], p.lower[1]],
        [p.upper[0], p.upper[1]],
        [p.nodes[0], p.nodes[1]],
    )?;
    let (g, gt) = metrics::<3>(p)?;
    let y = p.immersion()?;
    let lame = LameParams::new(p.f64_or("lambda", 1.0)?, p.f64_or("mu", 1.0)?)?;
    let hs = p
        .list("h")?
        .unwrap_or_else(|| vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]);
    if hs.is_empty() || hs.iter().any(|&h| h <= 0.0) {
        return Err(p
            .invalid(None, "h must be a non-empty list of positive thicknesses")
            .into());
    }
    let tol_compat = p.positive_or("tol_compat", 1e-6)?;
    let tol_ratio = p.positive_or("tol_ratio", 1e-2)?;

    let ys: Vec<[f64; 3]> = grid
        .points()
        .iter()
        .map(|x| Ok([y[0].eval(x)?, y[1].eval(x)?, y[2].eval(x)?]))
        .collect::<isodesign::Result<_>>()?;
    let mid = Midplate::new(grid.clone(), ys, g, gt)?;
    let compat = dimred::compat_residual(&mid)?;
    let cos = dimred::cosserat_b(&mid)?;
    let limit = dimred::limit_functional(&mid, &lame)?;
    let seq = dimred::recovery_sequence(&mid, &lame, &hs, &Warp::Auto)?;

    let rows: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            let b = cos.b.values[i];
            vec![x[0], x[1], compat.values[i], b[0], b[1], b[2]]
        })
        .collect();
    let header: Vec<String> = ["x1", "x2", "compat", "b1", "b2", "b3"].map(String::from).into();
    write_csv(&mut ctx.report, ctx.out, "midplate.csv", &header, &rows)?;
    let table: Vec<Vec<f64>> = seq.iter().map(|r| vec![r.h, r.eh_over_h2, r.limit, r.ratio]).collect();
    let header: Vec<String> = ["h", "Eh_over_h2", "limit", "ratio"].map(String::from).into();
    write_csv(&mut ctx.report, ctx.out, "dimred.csv", &header, &table)?;

    let (ci, cmax) = argmax(&compat.values);
    let last = seq.last().context("empty thickness list")?;
    let r = &mut ctx.report;
    r.real("lambda", lame.lambda);
    r.real("mu", lame.mu);
    r.real("compat_residual", cmax);
    r.scalar("compat_witness", point(&grid.point(ci)));
    r.real("normal_defect", cos.normal_defect);
    r.real("unit_defect", cos.unit_defect);
    r.real("limit", limit);
    for row in &seq {
        r.scalar(&format!("ratio_h={}", row.h), num(row.ratio));
    }
    let ok = cmax <= tol_compat;
    r.verdict(
        "compat",
        ok,
        if ok {
            "midplate metrics compatible".to_string()
        } else {
            format!(
                "midplate metrics incompatible: residual {} at {}",
                num(cmax),
                point(&grid.point(ci))
            )
        },
        tol_compat,
    );
    let dev = (last.ratio - 1.0).abs();
    r.verdict(
        "recovery",
        dev <= tol_ratio,
        format!("E^h/h^2 over the limit at h = {} is {}", last.h, num(last.ratio)),
        tol_ratio,
    );
    Ok(())
}
