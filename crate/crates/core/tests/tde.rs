mod common;

use common::*;
use isodesign::expr::parse;
use isodesign::grid::GridDomain;
use isodesign::linalg::{self, Mat};
use isodesign::planar::{self, PlanarReduction};
use isodesign::tde::{FrameState, FrameSystem, ScalarSystem};
use isodesign::{Expression, MetricField};
use proptest::prelude::*;

fn cool() -> FrameSystem<2> {
    FrameSystem::new(cool_g(), MetricField::identity())
}

fn diag_w(x: &[f64; 2]) -> Mat<f64, 2> {
    [[x[0], 0.0], [0.0, x[1]]]
}

fn norm4<const N: usize>(c: &[[[[f64; N]; N]; N]; N]) -> f64 {
    c.iter()
        .flatten()
        .flatten()
        .flatten()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

fn phi3() -> [Expression; 3] {
    [
        parse("x1 + 0.2*sin(x2*x3)", 3).unwrap(),
        parse("x2 + 0.1*x1^2", 3).unwrap(),
        parse("x3 + 0.15*x1*x2", 3).unwrap(),
    ]
}

const A3: [[f64; 3]; 3] = [[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 1.5]];

/// `G = A` constant, `G̃ = (∇φ)ᵀ A ∇φ`, solved by `ξ = φ`.
fn flat3() -> FrameSystem<3> {
    FrameSystem::new(
        MetricField::constant(A3).unwrap(),
        MetricField::pullback(&phi3(), A3).unwrap(),
    )
}

fn grad_phi3(x: &[f64; 3]) -> Mat<f64, 3> {
    let phi = phi3();
    std::array::from_fn(|s| phi[s].eval_jet1(x).unwrap().grad)
}

#[test]
fn identity_system_is_trivial() {
    let sys = FrameSystem::<2>::new(MetricField::identity(), MetricField::identity());
    let s = FrameState::new([0.3, 0.1], linalg::identity()).unwrap();
    assert!(sys.rhs_f(&s).unwrap().iter().flatten().flatten().all(|v| *v == 0.0));
    assert_eq!(norm4(&sys.residual_f(&s).unwrap()), 0.0);
    let grid = GridDomain::cube(-1.0f64, 1.0, 5).unwrap();
    let rep = sys.thomas_check(&grid, &linalg::identity(), 0.25, 64, 1e-6);
    assert!(rep.holds());
    assert_eq!(rep.max_norm, 0.0);
}

#[test]
fn constant_metric_reduces_to_target_christoffel() {
    let g = MetricField::<2>::constant([[2.0, 0.5], [0.5, 1.0]]).unwrap();
    let gt = metric(&["exp(x1)", "0.1*x2", "1 + x1^2"]);
    let sys = FrameSystem::new(g, gt.clone());
    let x = [0.3, 0.4];
    let w = [[1.2, -0.3], [0.4, 0.9]];
    let f = sys.rhs_f(&FrameState::new(x, w).unwrap()).unwrap();
    let c = gt.christoffel(&x).unwrap();
    for s in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|m| w[s][m] * c.gamma2[m][i][j]).sum();
                assert!((f[s][i][j] - v).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn cool_rhs_is_second_derivative_of_solution() {
    let sys = cool();
    let x = [1.5, 1.5];
    let f = sys.rhs_f(&FrameState::new(x, diag_w(&x)).unwrap()).unwrap();
    for s in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let expected = if s == i && i == j { 1.0 } else { 0.0 };
                assert!((f[s][i][j] - expected).abs() < 1e-14, "{s}{i}{j}: {}", f[s][i][j]);
            }
        }
    }
}

#[test]
fn rhs_matches_second_derivatives_in_three_dimensions() {
    let sys = flat3();
    let mut r = rng(21);
    for _ in 0..10 {
        let x: [f64; 3] = random_point(&mut r, -0.5, 0.5);
        let f = sys.rhs_f(&FrameState::new(x, grad_phi3(&x)).unwrap()).unwrap();
        let phi = phi3();
        for s in 0..3 {
            let h = phi[s].eval_jet2(&x).unwrap().hess;
            for i in 0..3 {
                for j in 0..3 {
                    assert!((f[s][i][j] - h[i][j]).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn cool_residual_vanishes_only_on_the_solution() {
    let sys = cool();
    let mut r = rng(22);
    for _ in 0..20 {
        let x: [f64; 2] = random_point(&mut r, 1.0, 2.0);
        let on = sys.residual_f(&FrameState::new(x, diag_w(&x)).unwrap()).unwrap();
        assert!(norm4(&on) <= 1e-7);
        let w = [[1.0, 0.5], [0.3, 2.0]];
        let off = sys.residual_f(&FrameState::new(x, w).unwrap()).unwrap();
        assert!(norm4(&off) > 0.1, "{}", norm4(&off));
    }
}

#[test]
fn thomas_check_verdicts() {
    let domain = GridDomain::cube(-0.5f64, 0.5, 3).unwrap();
    let sys = flat3();
    let center = grad_phi3(&domain.center());
    let rep = sys.thomas_check(&domain, &center, 0.25 * linalg::max_abs(&center), 256, 1e-6);
    assert!(rep.holds(), "{}", rep.max_norm);
    assert_eq!(rep.evaluated, 256);

    let sys = cool();
    let domain = GridDomain::cube(1.0f64, 2.0, 3).unwrap();
    let center = sys.reference_frame(&domain.center()).unwrap();
    let rep = sys.thomas_check(&domain, &center, 0.25 * linalg::max_abs(&center), 256, 1e-6);
    assert!(!rep.holds());
    assert!(rep.max_norm >= 1.0, "{}", rep.max_norm);
    let at = sys
        .residual_f(&FrameState::new(rep.witness_x, rep.witness_w).unwrap())
        .unwrap();
    assert!((norm4(&at) - rep.max_norm).abs() < 1e-12);
}

#[test]
fn frame_integration_recovers_cool_solution() {
    let sys = cool();
    let grid = GridDomain::cube(1.0f64, 2.0, 33).unwrap();
    let sol = sys.integrate_frame(&grid, &[1.0, 1.0], &linalg::identity(), 4).unwrap();
    assert!(!sol.exploratory);
    assert!(sol.algebraic_defect <= 1e-6, "{}", sol.algebraic_defect);
    assert!(sol.loop_mismatch <= 1e-8);
    for (i, w) in sol.w.values.iter().enumerate() {
        assert!(max_abs_diff(w, &diag_w(&grid.point(i))) <= 1e-8);
    }
    let rec = sys.reconstruct(&sol).unwrap();
    assert!(rec.metric_residual <= 1e-6);
}

#[test]
fn frame_integration_in_three_dimensions() {
    let sys = flat3();
    let grid = GridDomain::cube(-0.5f64, 0.5, 17).unwrap();
    let x0 = [0.0, 0.0, 0.0];
    let sol = sys.integrate_frame(&grid, &x0, &grad_phi3(&x0), 4).unwrap();
    assert!(sol.init_defect <= 1e-12);
    assert!(sol.algebraic_defect <= 1e-6, "{}", sol.algebraic_defect);
    let rec = sys.reconstruct(&sol).unwrap();
    let phi = phi3();
    let p0: Vec<f64> = phi.iter().map(|p| p.eval(&x0).unwrap()).collect();
    let mut worst = 0.0f64;
    for (i, xi) in rec.xi.values.iter().enumerate() {
        let x = grid.point(i);
        for s in 0..3 {
            worst = worst.max((xi[s] - (phi[s].eval(&x).unwrap() - p0[s])).abs());
        }
    }
    assert!(worst <= 1e-5, "{worst}");
}

#[test]
fn exploratory_when_initial_frame_is_off() {
    let sys = cool();
    let grid = GridDomain::cube(1.0f64, 2.0, 9).unwrap();
    let sol = sys
        .integrate_frame(&grid, &[1.0, 1.0], &[[1.1, 0.0], [0.0, 1.0]], 4)
        .unwrap();
    assert!(sol.exploratory);
    assert!(sol.algebraic_defect > 1e-3);
}

#[test]
fn singular_start_is_reported() {
    let sys = cool();
    let grid = GridDomain::cube(1.0f64, 2.0, 9).unwrap();
    let r = sys.integrate_frame(&grid, &[1.0, 1.0], &[[1.0, 1.0], [1.0, 1.0]], 4);
    assert!(matches!(r, Err(isodesign::Error::SingularFrame { .. })));
}

#[test]
fn frame_derivatives_converge_at_second_order() {
    let sys = flat3();
    let mut prev = None;
    for nodes in [9, 17] {
        let grid = GridDomain::cube(-0.5f64, 0.5, nodes).unwrap();
        let x0 = [0.0; 3];
        let sol = sys.integrate_frame(&grid, &x0, &grad_phi3(&x0), 4).unwrap();
        let e = sys.frame_consistency(&sol).unwrap();
        let h = grid.spacing[0];
        assert!(e <= 0.03 * h * h, "{e}");
        if let Some(p) = prev {
            assert!(p / e >= 2.5, "{p} -> {e}");
        }
        prev = Some(e);
    }
}

#[test]
fn frame_residual_matches_planar_compatibility() {
    // G̃ = e^{2g} Id with a non-flat pair, so the defect is nonzero.
    let g = metric(&["1 + 0.3*x1^2", "0.2*x1*x2", "2 + sin(x2)"]);
    let gt = metric(&["exp(0.4*x1)", "0", "exp(0.4*x1)"]);
    let red = PlanarReduction::new(g.clone(), gt.clone()).unwrap();
    let sys = FrameSystem::new(g, gt);
    let mut r = rng(23);
    for _ in 0..10 {
        let x: [f64; 2] = random_point(&mut r, -0.8, 0.8);
        let theta: f64 = rand::Rng::gen_range(&mut r, -3.0..3.0);
        let p = red.point(&x).unwrap();
        let w = p.frame(theta);
        let dw = p.frame(theta + std::f64::consts::FRAC_PI_2);
        let k = planar::compatibility_at_angle(&p.residuals(), theta);
        let c = sys.residual_f(&FrameState::new(x, w).unwrap()).unwrap();
        for s in 0..2 {
            for i in 0..2 {
                assert!(
                    (c[s][i][0][1] + k * dw[s][i]).abs() <= 1e-6 * (1.0 + k.abs()),
                    "{} vs {}",
                    c[s][i][0][1],
                    -k * dw[s][i]
                );
            }
        }
    }
}

#[test]
fn pointwise_minimizer_examples() {
    let id = FrameSystem::<2>::new(MetricField::identity(), MetricField::identity());
    let res = id
        .pointwise_minimize(&[0.2, 0.3], 1.0, 1.0, &linalg::identity())
        .unwrap();
    assert_eq!(res.cost.value, 0.0);
    assert!(res.converged);

    let sys = cool();
    let x = [1.5, 1.5];
    let res = sys.pointwise_minimize(&x, 1.0, 1.0, &[[1.6, 0.0], [0.0, 1.4]]).unwrap();
    assert!(res.cost.value <= 1e-8, "{}", res.cost.value);
    assert!(max_abs_diff(&res.w, &diag_w(&x)) <= 1e-4);
    assert!(res.trace.windows(2).all(|t| t[1] <= t[0]));

    // K2 = 0: every algebraic solution is a global minimizer.
    let g = metric(&["1 + 0.3*x1^2", "0.2*x1*x2", "2 + sin(x2)"]);
    let gt = metric(&["exp(0.4*x1)", "0", "exp(0.4*x1)"]);
    let red = PlanarReduction::new(g.clone(), gt.clone()).unwrap();
    let sys = FrameSystem::new(g, gt);
    let mut r = rng(24);
    for _ in 0..5 {
        let x: [f64; 2] = random_point(&mut r, -0.8, 0.8);
        let w = red.point(&x).unwrap().frame(rand::Rng::gen_range(&mut r, -3.0..3.0));
        assert!(sys.cost(&x, &w, 1.0, 0.0).unwrap().value <= 1e-24);
        let start = linalg::add(&w, &[[0.05, -0.02], [0.01, 0.04]]);
        let res = sys.pointwise_minimize(&x, 1.0, 0.0, &start).unwrap();
        assert!(res.cost.value <= 1e-16);
        assert!(res.trace.windows(2).all(|t| t[1] <= t[0]));
    }
}

fn vec_expr(a: &str, b: &str) -> [Expression; 2] {
    [parse(a, 2).unwrap(), parse(b, 2).unwrap()]
}

#[test]
fn scalar_demo_candidates_fail() {
    let grid = GridDomain::new([1.0f64, 0.5], [2.0, 1.5], [41, 41]).unwrap();
    let sys = ScalarSystem::new(vec_expr("x1", "x2"), vec_expr("-x2", "x1"), [1.0, 0.5]);
    let rep = sys.demo(&grid, 1e-3).unwrap();
    assert!(!rep.thomas_holds);
    assert!(!rep.unconstrained);
    assert!(!rep.exact.is_empty());
    assert!(rep.exact.iter().all(|b| !b.solves));
    assert_eq!(rep.reduced.len(), 2);
    assert!(rep.reduced.iter().all(|b| !b.solves));
    // Without the constant term the roots are 0 and 2/|x|².
    let x = [1.3f64, 0.7];
    let cp = ScalarSystem::new(vec_expr("x1", "x2"), vec_expr("-x2", "x1"), [0.0, 0.0])
        .compat(&x)
        .unwrap();
    let roots = cp.roots().unwrap();
    assert!(roots[0].abs() < 1e-15);
    assert!((roots[1] - 2.0 / (x[0] * x[0] + x[1] * x[1])).abs() < 1e-14);
    let rr = sys.compat(&x).unwrap().reduced_roots().unwrap();
    assert!((rr[1] - roots[1]).abs() < 1e-14);
}

#[test]
fn scalar_demo_constructed_solution() {
    // w = 1 + x1² + 0.5 x2 > 0, b = x⊥ with curl b = 2, a = (∇w − w b)/w².
    let w = "(1 + x1^2 + 0.5*x2)";
    let a = vec_expr(&format!("(2*x1 + x2*{w})/{w}^2"), &format!("(0.5 - x1*{w})/{w}^2"));
    let sys = ScalarSystem::new(a, vec_expr("-x2", "x1"), [0.0, 0.0]);
    let grid = GridDomain::cube(-0.5f64, 0.5, 41).unwrap();
    let we = parse(w, 2).unwrap();
    let defect = sys.total_defect(&grid, |x| we.eval(x)).unwrap();
    assert!(defect <= 1e-3, "{defect}");
    let rep = sys.demo(&grid, 1e-6).unwrap();
    assert!(!rep.thomas_holds);
    assert!((rep.thomas[1] - 2.0).abs() < 1e-12);
    for i in 0..grid.len() {
        let x = grid.point(i);
        let cp = sys.compat(&x).unwrap();
        let v = we.eval(&x).unwrap();
        assert!((cp.alpha * v * v + cp.beta * v + cp.gamma).abs() < 1e-10);
    }
}

#[test]
fn scalar_demo_affine_solution() {
    let zero = vec_expr("0", "0");
    let sys = ScalarSystem::new(zero.clone(), zero, [0.7, -0.3]);
    let grid = GridDomain::cube(-1.0f64, 1.0, 11).unwrap();
    let rep = sys.demo(&grid, 1e-12).unwrap();
    assert!(rep.thomas_holds);
    assert!(rep.unconstrained);
    assert_eq!(rep.thomas, [0.0, 0.0]);
    let d = sys.total_defect(&grid, |x| Ok(2.0 + 0.7 * x[0] - 0.3 * x[1])).unwrap();
    assert!(d <= 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn closed_form_residual_matches_fd_in_w(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_spd_metric::<3>(&mut r, 1);
        let gt = random_spd_metric::<3>(&mut r, 1);
        let sys = FrameSystem::new(g, gt);
        let x: [f64; 3] = random_point(&mut r, -1.0, 1.0);
        let w: Mat<f64, 3> = linalg::add(&linalg::identity(), &std::array::from_fn(|_| random_point(&mut r, -0.3, 0.3)));
        let s = FrameState::new(x, w).unwrap();
        let c = sys.residual_f(&s).unwrap();
        let cf = sys.residual_f_fd_w(&s, 1e-5).unwrap();
        let scale = 1.0 + norm4(&c);
        for a in 0..3 { for b in 0..3 { for j in 0..3 { for k in 0..3 {
            prop_assert!((c[a][b][j][k] - cf[a][b][j][k]).abs() <= 1e-6 * scale);
            prop_assert_eq!(c[a][b][j][k], -c[a][b][k][j]);
        }}}}
    }

    #[test]
    fn residual_vanishes_on_known_two_dimensional_solution(seed in any::<u64>()) {
        // G̃ = (∇φ)ᵀ A ∇φ with G = A constant: Thomas condition holds for every w.
        let mut r = rng(seed);
        let f1 = random_expr(&mut r, 2, 2);
        let phi = [parse(&format!("x1 + 0.1*sin({f1})"), 2).unwrap(), parse("x2 + 0.2*x1^2", 2).unwrap()];
        let a = [[1.5, 0.2], [0.2, 1.0]];
        let sys = FrameSystem::new(MetricField::constant(a).unwrap(), MetricField::pullback(&phi, a).unwrap());
        let x: [f64; 2] = random_point(&mut r, -0.5, 0.5);
        let w: Mat<f64, 2> = linalg::add(&linalg::identity(), &std::array::from_fn(|_| random_point(&mut r, -0.3, 0.3)));
        let c = sys.residual_f(&FrameState::new(x, w).unwrap()).unwrap();
        prop_assert!(norm4(&c) <= 1e-7);
    }
}
