//! Sectioned `key = value` problem files.
//!
//! ```text
//! # comment
//! [domain]
//! dim  = 2
//! min  = 0.5, 0.5
//! max  = 1.5, 1.5
//! grid = 33          # one value is broadcast to every axis
//!
//! [metric.G]
//! g11 = x1^(-2)
//! g22 = x2^(-2)      # off-diagonal entries default to 0
//!
//! [metric.Gt]
//! g11 = 1
//! g22 = 1
//!
//! [solver]
//! x0 = 1, 1
//! tol_thomas = 1e-6
//!
//! [immersion]        # dimred only: y(x1, x2) in R^3
//! y1 = x1
//! y2 = x2
//! y3 = 0
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use isodesign::expr::{parse, Func};
use isodesign::{Expression, GridDomain, MetricField};

/// Malformed problem file, flag or combination of the two.
#[derive(Debug, Clone)]
pub struct InvalidProblem {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for InvalidProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.path.display(), l, self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

impl std::error::Error for InvalidProblem {}

/// A raw value together with the line it came from (0 for `--set` overrides).
#[derive(Debug, Clone)]
struct Value {
    text: String,
    line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    G,
    Gt,
}

impl Which {
    fn section(self) -> &'static str {
        match self {
            Which::G => "metric.G",
            Which::Gt => "metric.Gt",
        }
    }
}

const SECTIONS: [&str; 5] = ["domain", "metric.G", "metric.Gt", "solver", "immersion"];

const SOLVER_KEYS: &[&str] = &[
    "K1",
    "K2",
    "theta0",
    "x0",
    "w0",
    "lambda",
    "mu",
    "h",
    "f",
    "seed",
    "samples",
    "half_width",
    "perturb",
    "substeps",
    "max_iter",
    "target",
    "tol_curv",
    "tol_thomas",
    "tol_path",
    "tol_metric",
    "tol_energy",
    "tol_cost",
    "tol_compat",
    "tol_ratio",
    "gtol",
];

fn known_solver_key(k: &str) -> bool {
    SOLVER_KEYS.contains(&k)
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub path: PathBuf,
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nodes: Vec<usize>,
    g: Entries,
    gt: Entries,
    solver: BTreeMap<String, Value>,
    immersion: Option<[(Expression, usize); 3]>,
}

type Entries = BTreeMap<(usize, usize), (Expression, usize)>;

type Sections = BTreeMap<String, (usize, BTreeMap<String, Value>)>;

fn split_list(s: &str) -> Vec<&str> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect()
}

impl Problem {
    pub fn parse(path: &Path, src: &str, overrides: &[(String, String)]) -> Result<Self, InvalidProblem> {
        let err = |line: Option<usize>, message: String| InvalidProblem {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut sections: Sections = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in src.lines().enumerate() {
            let line = i + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            if let Some(rest) = text.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(Some(line), "unterminated section header".into()))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(err(Some(line), format!("unknown section [{name}]")));
                }
                if sections.contains_key(name) {
                    return Err(err(Some(line), format!("duplicate section [{name}]")));
                }
                sections.insert(name.to_string(), (line, BTreeMap::new()));
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = text
                .split_once('=')
                .ok_or_else(|| err(Some(line), format!("expected `key = value`, found `{text}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(err(Some(line), "empty key or value".into()));
            }
            let sec = current
                .as_ref()
                .ok_or_else(|| err(Some(line), "entry before the first section header".into()))?;
            let entries = &mut sections.get_mut(sec).unwrap().1;
            if entries.contains_key(key) {
                return Err(err(Some(line), format!("duplicate key `{key}` in [{sec}]")));
            }
            entries.insert(
                key.to_string(),
                Value {
                    text: value.to_string(),
                    line,
                },
            );
        }

        let (_, domain) = sections
            .get("domain")
            .ok_or_else(|| err(None, "missing [domain] section".into()))?;
        for (k, v) in domain {
            if !["dim", "min", "max", "grid"].contains(&k.as_str()) {
                return Err(err(Some(v.line), format!("unknown key `{k}` in [domain]")));
            }
        }
        let get = |k: &str| {
            domain
                .get(k)
                .ok_or_else(|| err(None, format!("[domain] is missing `{k}`")))
        };
        let dv = get("dim")?;
        let dim: usize = dv
            .text
            .parse()
            .map_err(|_| err(Some(dv.line), format!("dim must be an integer, found `{}`", dv.text)))?;
        if dim != 2 && dim != 3 {
            return Err(err(Some(dv.line), format!("dim must be 2 or 3, found {dim}")));
        }
        let list = |k: &str| -> Result<(Vec<String>, usize), InvalidProblem> {
            let v = get(k)?;
            let items: Vec<String> = split_list(&v.text).into_iter().map(String::from).collect();
            match items.len() {
                1 => Ok((vec![items[0].clone(); dim], v.line)),
                n if n == dim => Ok((items, v.line)),
                n => Err(err(Some(v.line), format!("`{k}` needs 1 or {dim} values, found {n}"))),
            }
        };
        let floats = |k: &str| -> Result<Vec<f64>, InvalidProblem> {
            let (items, line) = list(k)?;
            items
                .iter()
                .map(|s| match s.parse::<f64>() {
                    Ok(x) if x.is_finite() => Ok(x),
                    _ => Err(err(Some(line), format!("`{k}`: `{s}` is not a finite number"))),
                })
                .collect()
        };
        let lower = floats("min")?;
        let upper = floats("max")?;
        let (grid_items, grid_line) = list("grid")?;
        let nodes = grid_items
            .iter()
            .map(|s| match s.parse::<usize>() {
                Ok(n) if n >= 3 => Ok(n),
                Ok(n) => Err(err(
                    Some(grid_line),
                    format!("grid axes need at least 3 nodes, found {n}"),
                )),
                Err(_) => Err(err(Some(grid_line), format!("`grid`: `{s}` is not an integer"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        for k in 0..dim {
            if upper[k] <= lower[k] {
                return Err(err(
                    Some(domain["max"].line),
                    format!("max must exceed min on axis {}", k + 1),
                ));
            }
        }

        let metric = |which: Which| -> Result<Entries, InvalidProblem> {
            let name = which.section();
            let (header, entries) = sections
                .get(name)
                .ok_or_else(|| err(None, format!("missing [{name}] section")))?;
            let mut out = BTreeMap::new();
            for (k, v) in entries {
                let ij = k
                    .strip_prefix('g')
                    .filter(|d| d.len() == 2 && d.chars().all(|c| c.is_ascii_digit()))
                    .map(|d| {
                        let b = d.as_bytes();
                        ((b[0] - b'0') as usize, (b[1] - b'0') as usize)
                    });
                let (i, j) = match ij {
                    Some((i, j)) if (1..=dim).contains(&i) && (1..=dim).contains(&j) => (i.min(j) - 1, i.max(j) - 1),
                    _ => {
                        return Err(err(
                            Some(v.line),
                            format!("unknown key `{k}` in [{name}] (expected gij with 1 <= i, j <= {dim})"),
                        ))
                    }
                };
                if out.contains_key(&(i, j)) {
                    return Err(err(
                        Some(v.line),
                        format!("entry ({}, {}) given twice in [{name}]", i + 1, j + 1),
                    ));
                }
                let e = parse(&v.text, dim).map_err(|e| err(Some(v.line), format!("[{name}] {k}: {e}")))?;
                out.insert((i, j), (e, v.line));
            }
            for i in 0..dim {
                if !out.contains_key(&(i, i)) {
                    return Err(err(Some(*header), format!("[{name}] is missing g{}{}", i + 1, i + 1)));
                }
            }
            Ok(out)
        };
        let g = metric(Which::G)?;
        let gt = metric(Which::Gt)?;

        let mut solver = sections.get("solver").map(|s| s.1.clone()).unwrap_or_default();
        for (k, v) in &solver {
            if !known_solver_key(k) {
                return Err(err(Some(v.line), format!("unknown key `{k}` in [solver]")));
            }
        }
        for (k, v) in overrides {
            if !known_solver_key(k) {
                return Err(err(None, format!("--set: unknown solver key `{k}`")));
            }
            solver.insert(
                k.clone(),
                Value {
                    text: v.clone(),
                    line: 0,
                },
            );
        }

        let immersion = match sections.get("immersion") {
            None => None,
            Some((header, entries)) => {
                for (k, v) in entries {
                    if !["y1", "y2", "y3"].contains(&k.as_str()) {
                        return Err(err(Some(v.line), format!("unknown key `{k}` in [immersion]")));
                    }
                }
                let comp = |k: &str| -> Result<(Expression, usize), InvalidProblem> {
                    let v = entries
                        .get(k)
                        .ok_or_else(|| err(Some(*header), format!("[immersion] is missing `{k}`")))?;
                    let e = parse(&v.text, 2).map_err(|e| err(Some(v.line), format!("[immersion] {k}: {e}")))?;
                    Ok((e, v.line))
                };
                Some([comp("y1")?, comp("y2")?, comp("y3")?])
            }
        };

        Ok(Self {
            path: path.to_path_buf(),
            dim,
            lower,
            upper,
            nodes,
            g,
            gt,
            solver,
            immersion,
        })
    }

    pub fn invalid(&self, line: Option<usize>, message: impl Into<String>) -> InvalidProblem {
        InvalidProblem {
            path: self.path.clone(),
            line: line.filter(|&l| l > 0),
            message: message.into(),
        }
    }

    fn solver_invalid(&self, key: &str, v: &Value, what: &str) -> InvalidProblem {
        let msg = if v.line == 0 {
            format!("--set {key}: {what}, found `{}`", v.text)
        } else {
            format!("[solver] {key}: {what}, found `{}`", v.text)
        };
        self.invalid(Some(v.line), msg)
    }

    pub fn require_dim(&self, command: &str, dims: &[usize]) -> Result<(), InvalidProblem> {
        if dims.contains(&self.dim) {
            Ok(())
        } else {
            Err(self.invalid(
                None,
                format!("`{command}` needs dim {dims:?}, the problem has dim {}", self.dim),
            ))
        }
    }

    pub fn grid<const N: usize>(&self) -> Result<GridDomain<f64, N>, InvalidProblem> {
        let lower = std::array::from_fn(|k| self.lower[k]);
        let upper = std::array::from_fn(|k| self.upper[k]);
        let nodes = std::array::from_fn(|k| self.nodes[k]);
        GridDomain::new(lower, upper, nodes).map_err(|e| self.invalid(None, e.to_string()))
    }

    fn entries(&self, which: Which) -> &Entries {
        match which {
            Which::G => &self.g,
            Which::Gt => &self.gt,
        }
    }

    pub fn metric<const N: usize>(&self, which: Which) -> Result<MetricField<N>, InvalidProblem> {
        assert_eq!(N, self.dim);
        let entries = self.entries(which);
        MetricField::from_upper(|i, j| {
            entries
                .get(&(i, j))
                .map(|e| e.0.clone())
                .unwrap_or_else(|| Expression::constant(0.0))
        })
        .map_err(|e| self.invalid(None, format!("[{}]: {e}", which.section())))
    }

    /// First metric entry depending on `x_{k+1}`, with its line.
    pub fn entry_using_var(&self, which: Which, k: usize) -> Option<((usize, usize), usize)> {
        self.entries(which)
            .iter()
            .find(|(_, (e, _))| e.uses_var(k))
            .map(|(ij, (_, line))| (*ij, *line))
    }

    /// The conformal factor `mu` when `G = mu Id`.
    pub fn conformal_factor(&self, which: Which) -> Result<Expression, InvalidProblem> {
        let entries = self.entries(which);
        let d0 = &entries[&(0, 0)].0;
        for ((i, j), (e, l)) in entries {
            let ok = if i == j { e == d0 } else { e.is_zero_const() };
            if !ok {
                return Err(self.invalid(
                    Some(*l),
                    format!(
                        "[{}] must be a multiple of the identity (g{}{} differs)",
                        which.section(),
                        i + 1,
                        j + 1
                    ),
                ));
            }
        }
        Ok(d0.clone())
    }

    /// `f` from `[solver]`, or `-1/2 log g11` of `G`.
    pub fn conformal_exponent(&self) -> Result<Expression, InvalidProblem> {
        match self.solver.get("f") {
            Some(v) => parse(&v.text, self.dim).map_err(|e| self.solver_invalid("f", v, &e.to_string())),
            None => {
                let mu = self.conformal_factor(Which::G)?;
                Ok(Expression::Const(-0.5) * Expression::func(Func::Log, mu))
            }
        }
    }

    pub fn immersion(&self) -> Result<[Expression; 3], InvalidProblem> {
        self.immersion
            .as_ref()
            .map(|c| [c[0].0.clone(), c[1].0.clone(), c[2].0.clone()])
            .ok_or_else(|| self.invalid(None, "missing [immersion] section"))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, InvalidProblem> {
        match self.solver.get(key) {
            None => Ok(default),
            Some(v) => match v.text.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(self.solver_invalid(key, v, "expected a finite number")),
            },
        }
    }

    pub fn positive_or(&self, key: &str, default: f64) -> Result<f64, InvalidProblem> {
        let x = self.f64_or(key, default)?;
        if x > 0.0 {
            Ok(x)
        } else {
            Err(self.solver_invalid(key, &self.solver[key], "expected a positive number"))
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, InvalidProblem> {
        match self.solver.get(key) {
            None => Ok(default),
            Some(v) => v
                .text
                .parse()
                .map_err(|_| self.solver_invalid(key, v, "expected a non-negative integer")),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, InvalidProblem> {
        match self.solver.get(key) {
            None => Ok(default),
            Some(v) => v
                .text
                .parse()
                .map_err(|_| self.solver_invalid(key, v, "expected a non-negative integer")),
        }
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, InvalidProblem> {
        let Some(v) = self.solver.get(key) else {
            return Ok(None);
        };
        split_list(&v.text)
            .into_iter()
            .map(|s| match s.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(self.solver_invalid(key, v, "expected a list of finite numbers")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    pub fn array_or<const M: usize>(&self, key: &str, default: [f64; M]) -> Result<[f64; M], InvalidProblem> {
        match self.list(key)? {
            None => Ok(default),
            Some(xs) if xs.len() == M => Ok(std::array::from_fn(|k| xs[k])),
            Some(_) => Err(self.solver_invalid(key, &self.solver[key], &format!("expected {M} values"))),
        }
    }
}
