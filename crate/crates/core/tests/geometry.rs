mod common;

use common::*;
use isodesign::expr::parse;
use isodesign::linalg;
use isodesign::{Expression, MetricField};
use proptest::prelude::*;

fn times_conformal<const N: usize>(f: &Expression, g: &MetricField<N>) -> MetricField<N> {
    let e = Expression::func(isodesign::expr::Func::Exp, Expression::Const(2.0) * f.clone());
    MetricField::<N>::from_upper(|i, j| e.clone() * g.entry(i, j).clone()).unwrap()
}

#[test]
fn flat_pullback_has_zero_riemann() {
    let phi = [parse("x1 + 0.1*sin(x2)", 2).unwrap(), parse("x2", 2).unwrap()];
    let g = MetricField::pullback(&phi, linalg::identity()).unwrap();
    let mut r = rng(1);
    for _ in 0..50 {
        let x: [f64; 2] = random_point(&mut r, -2.0, 2.0);
        assert!(g.riemann(&x).unwrap().norm() <= 1e-8);
        assert!(g.gauss_curvature(&x).unwrap().riemann_form.abs() <= 1e-8);
    }
    let phi3 = [
        parse("x1 + 0.2*sin(x2*x3)", 3).unwrap(),
        parse("x2 + 0.1*x1^2", 3).unwrap(),
        parse("exp(0.3*x3) + 0.1*x2", 3).unwrap(),
    ];
    let a = [[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 1.5]];
    let g3 = MetricField::pullback(&phi3, a).unwrap();
    for _ in 0..20 {
        let x: [f64; 3] = random_point(&mut r, -0.5, 0.5);
        assert!(g3.riemann(&x).unwrap().norm() <= 1e-7);
    }
}

#[test]
fn conformal_gauss_curvature_sign() {
    // κ(e^{2g} Id) = −e^{−2g} Δg
    let g = MetricField::<2>::conformal(&parse("x1^2", 2).unwrap()).unwrap();
    let r = g.riemann(&[0.0f64, 0.0]).unwrap();
    assert!((r.down[0][1][1][0] + 2.0).abs() < 1e-12);
    let g = MetricField::<2>::conformal(&parse("0.5*x1^2", 2).unwrap()).unwrap();
    let k = g.gauss_curvature(&[0.0f64, 0.0]).unwrap();
    assert!((k.riemann_form + 1.0).abs() < 1e-12);
    assert!((k.curve_form + 1.0).abs() < 1e-12);
    // Oracle away from the origin: FD Laplacian of g.
    let gexpr = parse("0.5*x1^2 + sin(x2)", 2).unwrap();
    let g = MetricField::<2>::conformal(&gexpr).unwrap();
    let x = [0.3, 0.8];
    let h = 1e-4;
    let f = |p: &[f64; 2]| gexpr.eval(p).unwrap();
    let lap = (f(&[x[0] + h, x[1]]) + f(&[x[0] - h, x[1]]) + f(&[x[0], x[1] + h]) + f(&[x[0], x[1] - h]) - 4.0 * f(&x))
        / (h * h);
    let expected = -(-2.0 * f(&x)).exp() * lap;
    let k = g.gauss_curvature(&x).unwrap();
    assert!((k.riemann_form - expected).abs() < 1e-6);
}

#[test]
fn round_sphere_is_positively_curved() {
    let g2 = MetricField::<2>::conformal(&parse("log(2/(1 + x1^2 + x2^2))", 2).unwrap()).unwrap();
    let mut r = rng(2);
    for _ in 0..10 {
        let x: [f64; 2] = random_point(&mut r, -1.0, 1.0);
        let k = g2.gauss_curvature(&x).unwrap();
        assert!((k.riemann_form - 1.0).abs() < 1e-10);
        assert!((k.curve_form - 1.0).abs() < 1e-10);
    }
    let g3 = MetricField::<3>::conformal(&parse("log(2/(1 + x1^2 + x2^2 + x3^2))", 3).unwrap()).unwrap();
    let ric = g3.ricci(&[0.0, 0.0, 0.0]).unwrap();
    assert!(max_abs_diff(&ric, &linalg::scale(&linalg::identity(), 8.0)) < 1e-10);
}

#[test]
fn cool_metric_is_flat() {
    let g = cool_g();
    let mut r = rng(3);
    for _ in 0..20 {
        let x: [f64; 2] = random_point(&mut r, 1.0, 2.0);
        let k = g.gauss_curvature(&x).unwrap();
        assert!(k.riemann_form.abs() < 1e-12);
        assert!(k.curve_form.abs() < 1e-12);
    }
}

#[test]
fn christoffel_against_finite_differences() {
    let g = MetricField::<2>::conformal(&parse("x1", 2).unwrap()).unwrap();
    let x = [0.2, -0.4];
    let c = g.christoffel(&x).unwrap();
    let h = 1e-5;
    let dg: [[[f64; 2]; 2]; 2] = std::array::from_fn(|k| {
        let mut xp = x;
        let mut xm = x;
        xp[k] += h;
        xm[k] -= h;
        let (gp, gm) = (g.value(&xp).unwrap(), g.value(&xm).unwrap());
        std::array::from_fn(|i| std::array::from_fn(|j| (gp[i][j] - gm[i][j]) / (2.0 * h)))
    });
    let ginv = linalg::inverse(&g.value(&x).unwrap()).unwrap();
    for m in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut v = 0.0;
                for q in 0..2 {
                    v += 0.5 * ginv[m][q] * (dg[i][j][q] + dg[j][i][q] - dg[q][i][j]);
                }
                assert!((c.gamma2[m][i][j] - v).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn conformal_ricci_examples() {
    let id = MetricField::<3>::identity();
    let x = [0.3, -0.2, 0.5];
    let res = id.conformal_ricci_residual(&parse("1.7", 3).unwrap(), &x).unwrap();
    assert!(linalg::max_abs(&res) == 0.0);

    let f = parse("-2*log(sqrt((x1-3)^2 + (x2+1)^2 + (x3-2)^2)) + 0.4", 3).unwrap();
    let mut r = rng(4);
    for _ in 0..20 {
        let x: [f64; 3] = random_point(&mut r, -1.0, 1.0);
        let res = id.conformal_ricci_residual(&f, &x).unwrap();
        assert!(linalg::max_abs(&res) <= 1e-7);
    }

    // Direct substitution for f = x1: e1⊗e1 − Id.
    let res = id.conformal_ricci_residual(&parse("x1", 3).unwrap(), &x).unwrap();
    assert!(max_abs_diff(&res, &linalg::diag([0.0, -1.0, -1.0])) < 1e-14);
}

#[test]
fn conformal_gauss_examples() {
    let id = MetricField::<2>::identity();
    let x = [0.4f64, 1.1];
    let r = id
        .conformal_gauss_residual(&parse("x1^2 - x2^2", 2).unwrap(), &x)
        .unwrap();
    assert!(r.abs() < 1e-8);
    let r = id.conformal_gauss_residual(&parse("x1^2", 2).unwrap(), &x).unwrap();
    assert!((r + 2.0).abs() < 1e-12);
    let gt = metric(&["exp(2*x1)", "0", "exp(2*x1)"]);
    let h = parse("0.5*log(exp(2*x1)/exp(-2*x1))", 2).unwrap();
    assert!(gt.conformal_gauss_residual(&h, &x).unwrap().abs() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metric_compatibility_and_sqrt(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_spd_metric::<3>(&mut r, 2);
        let x: [f64; 3] = random_point(&mut r, -1.0, 1.0);
        let mj = g.metric_jet(&x).unwrap();
        let c = isodesign::geometry::ChristoffelJet::from_metric_jet(&mj);
        prop_assert!(c.compatibility_defect(&mj) <= 1e-9);
        let back = linalg::mul(&mj.sqrt_g, &mj.sqrt_g);
        prop_assert!(max_abs_diff(&back, &mj.g) <= 1e-10);
        prop_assert!(max_abs_diff(&linalg::mul(&mj.g_inv, &mj.g), &linalg::identity()) <= 1e-12);
        for i in 0..3 { for j in 0..3 { for k in 0..3 {
            prop_assert_eq!(c.gamma2[i][j][k], c.gamma2[i][k][j]);
        }}}
    }

    #[test]
    fn riemann_symmetries(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_spd_metric::<3>(&mut r, 2);
        let x: [f64; 3] = random_point(&mut r, -1.0, 1.0);
        let rd = g.riemann(&x).unwrap().down;
        for m in 0..3 { for i in 0..3 { for j in 0..3 { for k in 0..3 {
            prop_assert!((rd[m][i][j][k] + rd[m][i][k][j]).abs() <= 1e-9);
            prop_assert!((rd[m][i][j][k] - rd[j][k][m][i]).abs() <= 1e-9);
            prop_assert!((rd[m][i][j][k] + rd[m][j][k][i] + rd[m][k][i][j]).abs() <= 1e-9);
        }}}}
    }

    #[test]
    fn gauss_curvature_two_ways(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_spd_metric::<2>(&mut r, 2);
        let x: [f64; 2] = random_point(&mut r, -1.0, 1.0);
        let k = g.gauss_curvature(&x).unwrap();
        prop_assert!(k.discrepancy() <= 1e-7 * (1.0 + k.riemann_form.abs()), "{:?}", k);
    }

    #[test]
    fn conformal_residuals_match_curvature_of_rescaled_metric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = random_expr(&mut r, 3, 3);
        let gt = random_spd_metric::<3>(&mut r, 1);
        let x: [f64; 3] = random_point(&mut r, -1.0, 1.0);
        let res = gt.conformal_ricci_residual(&f, &x).unwrap();
        let ric = times_conformal(&f, &gt).ricci(&x).unwrap();
        prop_assert!(max_abs_diff(&res, &ric) <= 1e-8 * (1.0 + linalg::max_abs(&ric)));

        let f2 = random_expr(&mut r, 3, 2);
        let gt2 = random_spd_metric::<2>(&mut r, 1);
        let x2: [f64; 2] = random_point(&mut r, -1.0, 1.0);
        let res2 = gt2.conformal_gauss_residual(&f2, &x2).unwrap();
        let k = times_conformal(&f2, &gt2).gauss_curvature(&x2).unwrap().riemann_form;
        let scaled = (2.0 * f2.eval(&x2).unwrap()).exp() * k;
        prop_assert!((res2 - scaled).abs() <= 1e-8 * (1.0 + scaled.abs()));
    }
}
