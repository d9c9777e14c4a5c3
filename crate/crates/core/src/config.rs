//! Experiment configuration.
//!
//! The file format is TOML: one table per section, matrices as lists of
//! rows. Parsing never stops at the first problem; every violation found is
//! reported with the key it concerns.

use std::fmt;
use std::path::Path;

use toml::{Table, Value};

use crate::linalg::{Matrix, Vector};
use crate::sim::{Q0Policy, SimConfig};

pub const DEFAULT_H_FRACTION: f64 = 0.9;
pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub enum PixelBoundSpec {
    /// `m_i = y_i(0) - δy`, `M_i = y_i(0) + δy`
    DeltaY(f64),
    Explicit { m: Vec<f64>, big_m: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Vector,
    pub xd: Vector,
    pub x0: Vector,
    pub offsets: Vec<Vector>,
    pub bounds: PixelBoundSpec,
    pub base: f64,
    /// `true` when `camera.base` was omitted and the natural base is used.
    pub base_defaulted: bool,
    pub epsilon: f64,
    pub epsilon_u: f64,
    pub gamma_tol: f64,
    pub h_fraction: f64,
    pub sim: SimConfig,
}

impl ExperimentConfig {
    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn pixels(&self) -> usize {
        self.offsets.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

const SECTIONS: &[(&str, &[&str])] = &[
    ("system", &["A", "B", "c"]),
    ("setpoint", &["xd"]),
    ("init", &["x0"]),
    ("pixels", &["offsets", "delta_y", "m", "M"]),
    ("camera", &["base"]),
    ("tolerance", &["epsilon"]),
    ("synthesis", &["epsilon_u", "gamma_tol"]),
    ("sim", &["dt", "horizon", "zeno_band", "q0_policy", "q0", "h_fraction", "sample_stride"]),
];

struct Reader<'a> {
    root: &'a Table,
    violations: Vec<String>,
}

impl Reader<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        let (section, name) = key.split_once('.')?;
        self.root.get(section)?.as_table()?.get(name)
    }

    fn fail(&mut self, key: &str, msg: impl fmt::Display) {
        self.violations.push(format!("{key}: {msg}"));
    }

    fn number_of(v: &Value) -> Option<f64> {
        match v {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn scalar(&mut self, key: &str) -> Option<f64> {
        let v = self.get(key)?;
        match Self::number_of(v) {
            Some(x) if x.is_finite() => Some(x),
            Some(x) => {
                self.fail(key, format!("non-finite number {x}"));
                None
            }
            None => {
                self.fail(key, "expected a number");
                None
            }
        }
    }

    fn required_scalar(&mut self, key: &str) -> Option<f64> {
        if self.get(key).is_none() {
            self.fail(key, "missing");
            return None;
        }
        self.scalar(key)
    }

    fn list_of(&mut self, key: &str, v: &Value) -> Option<Vec<f64>> {
        let Some(items) = v.as_array() else {
            self.fail(key, "expected a list of numbers");
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        for (j, item) in items.iter().enumerate() {
            match Self::number_of(item) {
                Some(x) if x.is_finite() => out.push(x),
                Some(x) => {
                    self.fail(key, format!("entry {j} is non-finite ({x})"));
                    return None;
                }
                None => {
                    self.fail(key, format!("entry {j} is not a number"));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn vector(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.get(key)?.clone();
        self.list_of(key, &v)
    }

    fn required_vector(&mut self, key: &str) -> Option<Vec<f64>> {
        if self.get(key).is_none() {
            self.fail(key, "missing");
            return None;
        }
        self.vector(key)
    }

    fn rows(&mut self, key: &str) -> Option<Vec<Vec<f64>>> {
        let Some(v) = self.get(key).cloned() else {
            self.fail(key, "missing");
            return None;
        };
        let Some(items) = v.as_array() else {
            self.fail(key, "expected a list of rows");
            return None;
        };
        let mut rows = Vec::with_capacity(items.len());
        for (j, row) in items.iter().enumerate() {
            rows.push(self.list_of(&format!("{key}[{j}]"), row)?);
        }
        if rows.is_empty() {
            self.fail(key, "empty");
            return None;
        }
        if rows.iter().any(|r| r.len() != rows[0].len()) {
            self.fail(key, "rows have different lengths");
            return None;
        }
        Some(rows)
    }

    fn matrix(&mut self, key: &str) -> Option<Matrix> {
        let rows = self.rows(key)?;
        let (nr, nc) = (rows.len(), rows[0].len());
        if nc == 0 {
            self.fail(key, "rows are empty");
            return None;
        }
        Some(Matrix::from_row_iterator(nr, nc, rows.into_iter().flatten()))
    }

    fn check_len(&mut self, key: &str, v: &[f64], n: Option<usize>) {
        if let Some(n) = n {
            if v.len() != n {
                self.fail(key, format!("has {} entries, expected {n}", v.len()));
            }
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let root: Table = toml::from_str(text).map_err(|e| ConfigError { violations: vec![format!("syntax: {e}")] })?;
    let mut rd = Reader { root: &root, violations: Vec::new() };

    for (section, value) in &root {
        match SECTIONS.iter().find(|(s, _)| s == section) {
            None => rd.fail(section, "unknown section"),
            Some((_, keys)) => match value.as_table() {
                None => rd.fail(section, "expected a table"),
                Some(t) => {
                    for k in t.keys().filter(|k| !keys.contains(&k.as_str())) {
                        rd.violations.push(format!("{section}.{k}: unknown key"));
                    }
                }
            },
        }
    }

    let a = rd.matrix("system.A");
    let n = match &a {
        Some(a) if a.is_square() => Some(a.nrows()),
        Some(a) => {
            rd.fail("system.A", format!("must be square, got {}x{}", a.nrows(), a.ncols()));
            None
        }
        None => None,
    };
    let b = rd.matrix("system.B");
    if let (Some(b), Some(n)) = (&b, n) {
        if b.nrows() != n {
            rd.fail("system.B", format!("has {} rows, expected {n}", b.nrows()));
        }
    }
    let c = rd.required_vector("system.c");
    if let Some(c) = &c {
        rd.check_len("system.c", c, n);
    }
    let xd = rd.required_vector("setpoint.xd");
    if let Some(v) = &xd {
        rd.check_len("setpoint.xd", v, n);
    }
    let x0 = rd.required_vector("init.x0");
    if let Some(v) = &x0 {
        rd.check_len("init.x0", v, n);
    }

    let offsets = rd.rows("pixels.offsets");
    if let (Some(offs), Some(n)) = (&offsets, n) {
        if offs[0].len() != n {
            rd.fail("pixels.offsets", format!("offsets have {} entries, expected {n}", offs[0].len()));
        }
    }
    let r = offsets.as_ref().map(|o| o.len());

    let delta_y = rd.scalar("pixels.delta_y");
    let m = rd.vector("pixels.m");
    let big_m = rd.vector("pixels.M");
    let bounds = match (delta_y, m, big_m) {
        (Some(dy), None, None) => {
            if !(dy > 0.0) {
                rd.fail("pixels.delta_y", "must be positive");
            }
            Some(PixelBoundSpec::DeltaY(dy))
        }
        (None, Some(m), Some(big_m)) => {
            rd.check_len("pixels.m", &m, r);
            rd.check_len("pixels.M", &big_m, r);
            for (j, (lo, hi)) in m.iter().zip(&big_m).enumerate() {
                if !(*lo > 0.0 && lo <= hi) {
                    rd.fail("pixels.m", format!("pixel {}: need 0 < m <= M, got m = {lo}, M = {hi}", j + 1));
                }
            }
            Some(PixelBoundSpec::Explicit { m, big_m })
        }
        (None, None, None) if rd.get("pixels.delta_y").is_none() && rd.get("pixels.m").is_none() => {
            rd.fail("pixels", "either delta_y or both m and M are required");
            None
        }
        _ => {
            rd.fail("pixels", "give either delta_y or both m and M, not a mix");
            None
        }
    };

    let base_defaulted = rd.get("camera.base").is_none();
    let base = rd.scalar("camera.base").unwrap_or(std::f64::consts::E);
    if !(base > 1.0) {
        rd.fail("camera.base", format!("must exceed 1, got {base}"));
    }
    let epsilon = rd.required_scalar("tolerance.epsilon").unwrap_or(DEFAULT_EPSILON);
    if !(epsilon > 0.0) {
        rd.fail("tolerance.epsilon", "must be positive");
    }
    let epsilon_u = rd.scalar("synthesis.epsilon_u").unwrap_or(crate::synthesis::DEFAULT_EPSILON_U);
    if !(epsilon_u > 0.0) {
        rd.fail("synthesis.epsilon_u", "must be positive");
    }
    let gamma_tol = rd.scalar("synthesis.gamma_tol").unwrap_or(crate::synthesis::DEFAULT_GAMMA_TOL);
    if !(gamma_tol > 0.0 && gamma_tol < 1.0) {
        rd.fail("synthesis.gamma_tol", "must lie in (0, 1)");
    }

    let mut sim = SimConfig::default();
    for (key, slot) in [
        ("sim.dt", &mut sim.dt),
        ("sim.horizon", &mut sim.horizon),
        ("sim.zeno_band", &mut sim.zeno_band),
    ] {
        if let Some(v) = rd.scalar(key) {
            *slot = v;
        }
    }
    if let Some(stride) = rd.scalar("sim.sample_stride") {
        if stride >= 1.0 && stride.fract() == 0.0 {
            sim.sample_stride = stride as usize;
        } else {
            rd.fail("sim.sample_stride", "must be a positive integer");
        }
    }
    let explicit_q0 = rd.vector("sim.q0");
    match rd.get("sim.q0_policy").cloned() {
        None if explicit_q0.is_some() => rd.fail("sim.q0", "requires q0_policy = \"explicit\""),
        None => {}
        Some(v) => match v.as_str() {
            None => rd.fail("sim.q0_policy", "expected a string"),
            Some("equal_to_y0") => sim.q0_policy = Q0Policy::EqualToY0,
            Some("midpoint") => sim.q0_policy = Q0Policy::Midpoint,
            Some("explicit") => match explicit_q0 {
                Some(q) => {
                    rd.check_len("sim.q0", &q, r);
                    sim.q0_policy = Q0Policy::Explicit(q);
                }
                None => rd.fail("sim.q0", "missing (required by q0_policy = \"explicit\")"),
            },
            Some(other) => rd.fail("sim.q0_policy", format!("unknown policy {other:?}")),
        },
    }
    if let Err(e) = sim.validate() {
        rd.fail("sim", e);
    }
    let h_fraction = rd.scalar("sim.h_fraction").unwrap_or(DEFAULT_H_FRACTION);
    if !(h_fraction > 0.0 && h_fraction <= 1.0) {
        rd.fail("sim.h_fraction", format!("must lie in (0, 1], got {h_fraction}"));
    }

    if !rd.violations.is_empty() {
        return Err(ConfigError { violations: rd.violations });
    }
    Ok(ExperimentConfig {
        a: a.unwrap(),
        b: b.unwrap(),
        c: Vector::from_vec(c.unwrap()),
        xd: Vector::from_vec(xd.unwrap()),
        x0: Vector::from_vec(x0.unwrap()),
        offsets: offsets.unwrap().into_iter().map(Vector::from_vec).collect(),
        bounds: bounds.unwrap(),
        base,
        base_defaulted,
        epsilon,
        epsilon_u,
        gamma_tol,
        h_fraction,
        sim,
    })
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        violations: vec![format!("{}: {e}", path.display())],
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[system]
A = [[2, 10], [0, 5]]
B = [[1], [1]]
c = [0.894427190999916, 0.447213595499958]

[setpoint]
xd = [-0.2321, 0.0928]

[init]
x0 = [0.0179, 0.3428]

[pixels]
offsets = [[0, 0], [0.01, 0]]
delta_y = 0.002

[tolerance]
epsilon = 0.05
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.states(), 2);
        assert_eq!(cfg.pixels(), 2);
        assert!(cfg.base_defaulted);
        assert_eq!(cfg.base, std::f64::consts::E);
        assert_eq!(cfg.h_fraction, 0.9);
        assert_eq!(cfg.sim, SimConfig::default());
        assert_eq!(cfg.bounds, PixelBoundSpec::DeltaY(0.002));
        assert_eq!(cfg.a[(0, 1)], 10.0);
    }

    #[test]
    fn wrong_b_height_names_the_key() {
        let text = MINIMAL.replace("B = [[1], [1]]", "B = [[1], [1], [1]]");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(err.violations.len(), 1);
        assert!(err.violations[0].starts_with("system.B"), "{err}");
    }

    #[test]
    fn all_violations_are_collected() {
        let text = MINIMAL
            .replace("xd = [-0.2321, 0.0928]", "xd = [-0.2321]")
            .replace("epsilon = 0.05", "epsilon = -1\ncolour = 3")
            + "\n[sim]\nh_fraction = 1.5\nq0_policy = \"sometimes\"\n";
        let err = parse_config(&text).unwrap_err();
        let keys: Vec<&str> = err.violations.iter().map(|v| v.split(':').next().unwrap()).collect();
        for k in ["setpoint.xd", "tolerance.epsilon", "tolerance.colour", "sim.h_fraction", "sim.q0_policy"] {
            assert!(keys.contains(&k), "{k} missing from {keys:?}");
        }
    }

    #[test]
    fn explicit_bounds_and_q0() {
        let text = MINIMAL.replace("delta_y = 0.002", "m = [0.1, 0.1]\nM = [0.2, 0.2]")
            + "\n[camera]\nbase = 2\n[sim]\nq0_policy = \"explicit\"\nq0 = [0.15, 0.16]\n";
        let cfg = parse_config(&text).unwrap();
        assert_eq!(cfg.base, 2.0);
        assert!(!cfg.base_defaulted);
        assert_eq!(cfg.sim.q0_policy, Q0Policy::Explicit(vec![0.15, 0.16]));
        assert!(matches!(cfg.bounds, PixelBoundSpec::Explicit { .. }));

        let mixed = MINIMAL.replace("delta_y = 0.002", "delta_y = 0.002\nm = [0.1, 0.1]");
        assert!(parse_config(&mixed).is_err());
    }

    #[test]
    fn non_finite_and_missing() {
        let text = MINIMAL.replace("epsilon = 0.05", "epsilon = nan").replace("x0 = [0.0179, 0.3428]", "");
        let err = parse_config(&text).unwrap_err();
        assert!(err.violations.iter().any(|v| v.starts_with("tolerance.epsilon: non-finite")));
        assert!(err.violations.iter().any(|v| v == "init.x0: missing"));
    }
}
