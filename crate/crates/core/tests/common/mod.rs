#![allow(dead_code)]

use isodesign::expr::parse;
use isodesign::{Expression, MetricField};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Source text of a random expression that is defined on all of ℝⁿ.
pub fn random_source(rng: &mut impl Rng, depth: usize, dim: usize) -> String {
    if depth == 0 || rng.gen_bool(0.2) {
        return if rng.gen_bool(0.4) {
            format!("{:.3}", rng.gen_range(-2.0..2.0))
        } else {
            format!("x{}", rng.gen_range(1..=dim))
        };
    }
    let a = random_source(rng, depth - 1, dim);
    match rng.gen_range(0..13) {
        0 => format!("({a}) + ({})", random_source(rng, depth - 1, dim)),
        1 => format!("({a}) - ({})", random_source(rng, depth - 1, dim)),
        2 | 3 => format!("({a}) * ({})", random_source(rng, depth - 1, dim)),
        4 => format!("({a}) / (1 + ({})^2)", random_source(rng, depth - 1, dim)),
        5 => format!("sin({a})"),
        6 => format!("cos({a})"),
        7 => format!("exp(0.3*sin({a}))"),
        8 => format!("log(1 + ({a})^2)"),
        9 => format!("sqrt(2 + sin({a}))"),
        10 => format!("({a})^2"),
        11 => format!("({a})^3"),
        _ => format!("-({a})"),
    }
}

pub fn random_expr(rng: &mut impl Rng, depth: usize, dim: usize) -> Expression {
    let s = random_source(rng, depth, dim);
    parse(&s, dim).unwrap_or_else(|e| panic!("generated `{s}` failed to parse: {e}"))
}

/// `G = L Lᵀ + c·Id` with smooth random entries of `L`.
pub fn random_spd_metric<const N: usize>(rng: &mut impl Rng, depth: usize) -> MetricField<N> {
    let l: Vec<Vec<String>> = (0..N)
        .map(|_| {
            (0..N)
                .map(|_| format!("0.5*sin({})", random_source(rng, depth, N)))
                .collect()
        })
        .collect();
    let c = rng.gen_range(0.5..1.5);
    let mut upper = Vec::new();
    for i in 0..N {
        for j in i..N {
            let mut terms: Vec<String> = (0..N).map(|k| format!("({})*({})", l[i][k], l[j][k])).collect();
            if i == j {
                terms.push(format!("{c}"));
            }
            upper.push(terms.join(" + "));
        }
    }
    let refs: Vec<&str> = upper.iter().map(String::as_str).collect();
    MetricField::<N>::parse_upper(&refs).unwrap()
}

pub fn random_point<const N: usize>(rng: &mut impl Rng, lo: f64, hi: f64) -> [f64; N] {
    std::array::from_fn(|_| rng.gen_range(lo..hi))
}

/// Central-difference gradient.
pub fn fd_grad<const N: usize>(f: impl Fn(&[f64; N]) -> f64, x: &[f64; N], h: f64) -> [f64; N] {
    std::array::from_fn(|k| {
        let mut xp = *x;
        let mut xm = *x;
        xp[k] += h;
        xm[k] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    })
}

pub fn max_abs_diff<const N: usize>(a: &[[f64; N]; N], b: &[[f64; N]; N]) -> f64 {
    let mut m = 0.0f64;
    for i in 0..N {
        for j in 0..N {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

pub fn metric(upper: &[&str]) -> MetricField<2> {
    MetricField::<2>::parse_upper(upper).unwrap()
}

pub fn metric3(upper: &[&str]) -> MetricField<3> {
    MetricField::<3>::parse_upper(upper).unwrap()
}

/// `G = diag(x1⁻², x2⁻²)`, pulled back from the identity by `½(x1², x2²)`.
pub fn cool_g() -> MetricField<2> {
    metric(&["1/(x1^2)", "0", "1/(x2^2)"])
}
