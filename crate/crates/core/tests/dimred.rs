mod common;

use common::*;
use isodesign::dimred::{self, LameParams, Midplate, Warp};
use isodesign::linalg::{self, Mat};
use isodesign::{Grid2d, MetricField};
use proptest::prelude::*;
use rand::Rng;

fn id3() -> MetricField<3> {
    MetricField::identity()
}

fn cylinder(n: usize) -> Midplate<f64> {
    let grid = Grid2d::cube(0.0, 1.0, n).unwrap();
    Midplate::from_fn(grid, |x| [x[0].sin(), x[1], x[0].cos()], id3(), id3()).unwrap()
}

fn plate(gt: MetricField<3>) -> Midplate<f64> {
    let grid = Grid2d::cube(0.0, 1.0, 9).unwrap();
    Midplate::from_fn(grid, |x| [x[0], x[1], 0.0], id3(), gt).unwrap()
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

#[test]
fn compat_residual_examples() {
    let flat = dimred::compat_residual(&plate(id3())).unwrap();
    assert!(max_of(&flat.values) < 1e-14);

    let cyl = dimred::compat_residual(&cylinder(129)).unwrap();
    assert!(max_of(&cyl.values) <= 1e-6, "{}", max_of(&cyl.values));

    let grid = Grid2d::cube(0.0, 1.0, 7).unwrap();
    let stretched = Midplate::from_fn(grid, |x| [2.0 * x[0], x[1], 0.0], id3(), id3()).unwrap();
    let d = dimred::compat_defect(&stretched).unwrap();
    for m in &d.values {
        assert!(max_abs_diff(m, &[[3.0, 0.0], [0.0, 0.0]]) < 1e-12);
    }
}

#[test]
fn rejects_thickness_dependent_metric() {
    let grid = Grid2d::cube(0.0, 1.0, 5).unwrap();
    let g = metric3(&["1 + x3^2", "0", "0", "1", "0", "1"]);
    let err = Midplate::from_fn(grid, |x| [x[0], x[1], 0.0], g, id3()).unwrap_err();
    assert!(err.is_validation(), "{err}");
}

#[test]
fn cosserat_examples() {
    let flat = dimred::cosserat_b(&plate(id3())).unwrap();
    for b in &flat.b.values {
        assert!((b[0].abs() + b[1].abs() + (b[2] - 1.0).abs()) < 1e-14);
    }

    let mid = cylinder(33);
    let cyl = dimred::cosserat_b(&mid).unwrap();
    for (i, b) in cyl.b.values.iter().enumerate() {
        let x = mid.grid().point(i);
        let n = [x[0].sin(), 0.0, x[0].cos()];
        assert!((0..3).all(|k| (b[k] - n[k]).abs() < 1e-6), "{b:?} vs {n:?}");
    }
    assert!(cyl.normal_defect <= 1e-9 && cyl.unit_defect <= 1e-5);

    let gt = metric3(&["1", "0", "0.1", "1", "0", "1"]);
    let tilted = dimred::cosserat_b(&plate(gt)).unwrap();
    let expect = [0.1, 0.0, 0.99f64.sqrt()];
    for b in &tilted.b.values {
        assert!((0..3).all(|k| (b[k] - expect[k]).abs() < 1e-12), "{b:?}");
    }
}

#[test]
fn induced_normal_is_g_orthogonal() {
    let g = metric3(&["2 + 0.3*sin(x1)", "0.2*x2", "0.1", "1.5", "0.05*x1", "1.2"]);
    let grid = Grid2d::cube(0.0, 1.0, 33).unwrap();
    let mid = Midplate::from_fn(grid, |x| [x[0] + 0.1 * x[1] * x[1], x[1], 0.3 * x[0] * x[1]], g, id3()).unwrap();
    let cos = dimred::cosserat_b(&mid).unwrap();
    assert!(cos.normal_defect <= 1e-9, "{}", cos.normal_defect);
}

#[test]
fn degenerate_surface_is_rejected() {
    let grid = Grid2d::cube(0.0, 1.0, 5).unwrap();
    let mid = Midplate::from_fn(grid, |x| [x[0], x[0], 0.0], id3(), id3()).unwrap();
    assert!(matches!(
        dimred::cosserat_b(&mid),
        Err(isodesign::Error::DegenerateSurface { .. })
    ));
}

#[test]
fn q2_form_examples() {
    let lame = LameParams::new(1.0, 1.0).unwrap();
    let id2 = linalg::identity::<f64, 2>();
    assert!((dimred::q2_form(&lame, &id2, &[[1.0, 0.0], [0.0, 0.0]]).unwrap() - 1.5).abs() < 1e-14);
    assert!(dimred::q2_form(&lame, &id2, &[[0.0, 0.7], [-0.7, 0.0]]).unwrap().abs() < 1e-14);
    assert!(dimred::q2_form(&lame, &[[1.0, 2.0], [2.0, 1.0]], &id2).is_err());
}

#[test]
fn limit_functional_examples() {
    let flat = plate(id3());
    for (l, m) in [(1.0, 1.0), (3.0, 0.5)] {
        let v = dimred::limit_functional(&flat, &LameParams::new(l, m).unwrap()).unwrap();
        assert!(v.abs() < 1e-14);
    }
    let mid = cylinder(129);
    let a = dimred::limit_functional(&mid, &LameParams::new(1.0, 1.0).unwrap()).unwrap();
    assert!((a - 0.0625).abs() <= 1e-6, "{a}");
    let b = dimred::limit_functional(&mid, &LameParams::new(1.0, 2.0).unwrap()).unwrap();
    assert!((b - 1.0 / 9.0).abs() <= 1e-6, "{b}");
}

#[test]
fn recovery_energy_flat_plate_is_zero() {
    let lame = LameParams::new(1.0, 1.0).unwrap();
    for h in [0.5, 0.1, 0.01] {
        let e = dimred::recovery_energy(&plate(id3()), &lame, h, &Warp::Auto).unwrap();
        assert!(e.abs() < 1e-20, "{e}");
    }
}

#[test]
fn recovery_energy_converges_to_limit() {
    let mid = cylinder(65);
    let lame = LameParams::new(1.0, 1.0).unwrap();
    let hs = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let rows = dimred::recovery_sequence(&mid, &lame, &hs, &Warp::Auto).unwrap();
    let dev: Vec<f64> = rows.iter().map(|r| (r.ratio - 1.0).abs()).collect();
    assert!(dev[3] <= 0.1, "{rows:?}");
    assert!(dev.windows(2).all(|w| w[1] <= w[0]), "{rows:?}");

    // Without the warp the thickness direction cannot relax.
    let unwarped = dimred::recovery_energy(&mid, &lame, 1.0 / 64.0, &Warp::Zero).unwrap();
    assert!(unwarped > rows[3].eh_over_h2 * 1.2, "{unwarped} {:?}", rows[3]);
    assert!((unwarped - 2.0 / 24.0).abs() < 1e-3, "{unwarped}");
}

#[test]
fn recovery_energy_rejects_bad_thickness() {
    let lame = LameParams::new(1.0, 1.0).unwrap();
    assert!(dimred::recovery_energy(&plate(id3()), &lame, 0.0, &Warp::Auto).is_err());
    assert!(dimred::recovery_energy(&plate(id3()), &lame, 0.1, &Warp::Field(vec![[0.0; 3]; 3])).is_err());
}

fn random_rotation(r: &mut impl Rng) -> Mat<f64, 3> {
    let a: Mat<f64, 3> = std::array::from_fn(|_| std::array::from_fn(|_| r.gen_range(-1.0..1.0)));
    linalg::nearest_rotation(&a).0
}

#[test]
fn film_density_is_frame_indifferent() {
    let mut r = rng(77);
    let lame = LameParams::new(1.7, 0.6).unwrap();
    for _ in 0..20 {
        let f: Mat<f64, 3> = std::array::from_fn(|_| std::array::from_fn(|_| r.gen_range(-2.0..2.0)));
        let q = random_rotation(&mut r);
        let w = dimred::film_density(&lame, &f);
        let wq = dimred::film_density(&lame, &linalg::mul(&q, &f));
        assert!((w - wq).abs() <= 1e-10 * (1.0 + w), "{w} {wq}");
        assert!(dimred::film_density(&lame, &q).abs() < 1e-20);
    }
}

fn spd3(v: &[f64; 6]) -> Mat<f64, 3> {
    let l = [
        [1.0 + v[0].abs(), 0.0, 0.0],
        [v[1], 1.0 + v[2].abs(), 0.0],
        [v[3], v[4], 1.0 + v[5].abs()],
    ];
    let mut g = linalg::zeros::<f64, 3>();
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = (0..3).map(|k| l[i][k] * l[j][k]).sum();
        }
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cosserat_completes_affine_frame(
        av in prop::array::uniform6(-1.0f64..1.0),
        p in prop::array::uniform3(prop::array::uniform2(-1.0f64..1.0)),
        q in prop::array::uniform3(-1.0f64..1.0),
    ) {
        // y = P x′ with constant G = A and G̃ = Lᵀ A L, L = [p₁ p₂ q]: b must be q.
        let l: Mat<f64, 3> = std::array::from_fn(|i| [p[i][0], p[i][1], q[i]]);
        let det = linalg::det(&l);
        prop_assume!(det.abs() > 0.2);
        let q = if det > 0.0 { q } else { q.map(|v| -v) };
        let l: Mat<f64, 3> = std::array::from_fn(|i| [p[i][0], p[i][1], q[i]]);
        let a = spd3(&av);
        let gt = linalg::congruence(&l, &a);
        let g = MetricField::<3>::constant(a).unwrap();
        let gtm = MetricField::<3>::constant(gt).unwrap();
        let grid = Grid2d::cube(0.0, 1.0, 5).unwrap();
        let mid = Midplate::from_fn(grid, |x| std::array::from_fn(|i| p[i][0] * x[0] + p[i][1] * x[1]), g, gtm).unwrap();
        let res = dimred::compat_residual(&mid).unwrap();
        prop_assert!(max_of(&res.values) < 1e-12);
        let cos = dimred::cosserat_b(&mid).unwrap();
        prop_assert!(cos.normal_defect <= 1e-9 && cos.unit_defect <= 1e-9);
        for b in &cos.b.values {
            prop_assert!((0..3).all(|k| (b[k] - q[k]).abs() < 1e-9), "{:?} vs {:?}", b, q);
        }
    }

    #[test]
    fn q2_formula_matches_linear_solve(
        l in 0.1f64..5.0, m in 0.1f64..5.0,
        gv in prop::array::uniform6(-1.0f64..1.0),
        f in prop::array::uniform2(prop::array::uniform2(-2.0f64..2.0)),
    ) {
        let lame = LameParams::new(l, m).unwrap();
        let gt = spd3(&gv);
        let gt2 = [[gt[0][0], gt[0][1]], [gt[1][0], gt[1][1]]];
        let closed = dimred::q2_form(&lame, &gt2, &f).unwrap();
        let (solved, _) = dimred::q2_minimize(&lame, &gt, &f).unwrap();
        prop_assert!((closed - solved).abs() <= 1e-10 * (1.0 + closed), "{} {}", closed, solved);
    }

    #[test]
    fn quadratic_forms_depend_on_symmetric_part(
        l in 0.1f64..5.0, m in 0.1f64..5.0,
        a in prop::array::uniform3(prop::array::uniform3(-2.0f64..2.0)),
    ) {
        let lame = LameParams::new(l, m).unwrap();
        let skew: Mat<f64, 3> = std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] - a[j][i]));
        prop_assert!(dimred::q3(&lame, &skew).abs() < 1e-12);
        prop_assert!(dimred::q3(&lame, &a) >= 0.0);
        let sum = linalg::add(&a, &skew);
        prop_assert!((dimred::q3(&lame, &sum) - dimred::q3(&lame, &a)).abs() < 1e-10);
        let a2 = [[a[0][0], a[0][1]], [a[1][0], a[1][1]]];
        let s2 = [[0.0, skew[0][1]], [skew[1][0], 0.0]];
        let id2 = linalg::identity::<f64, 2>();
        prop_assert!(dimred::q2_form(&lame, &id2, &a2).unwrap() >= 0.0);
        prop_assert!(dimred::q2_form(&lame, &id2, &s2).unwrap().abs() < 1e-12);
    }
}
