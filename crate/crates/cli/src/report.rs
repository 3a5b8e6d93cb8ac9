use serde::Serialize;
use serde_json::Value;

/// One numeric verdict: value, the tolerance it is held to and how it was obtained.
#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    /// `le`: value ≤ tolerance, `ge`: value ≥ tolerance, `lt`: value < tolerance.
    pub relation: &'static str,
    pub method: String,
    pub pass: bool,
}

impl Check {
    pub fn le(name: &str, value: f64, tolerance: f64, method: &str) -> Check {
        Check::new(name, value, tolerance, "le", method, value <= tolerance)
    }

    pub fn ge(name: &str, value: f64, tolerance: f64, method: &str) -> Check {
        Check::new(name, value, tolerance, "ge", method, value >= tolerance)
    }

    pub fn lt(name: &str, value: f64, tolerance: f64, method: &str) -> Check {
        Check::new(name, value, tolerance, "lt", method, value < tolerance)
    }

    /// A boolean property, recorded as 1/0 against 1.
    pub fn holds(name: &str, ok: bool, method: &str) -> Check {
        Check::new(name, if ok { 1.0 } else { 0.0 }, 1.0, "ge", method, ok)
    }

    fn new(name: &str, value: f64, tolerance: f64, relation: &'static str, method: &str, pass: bool) -> Check {
        Check { name: name.into(), value, tolerance, relation, method: method.into(), pass: pass && !value.is_nan() }
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub config: Value,
    pub profile_id: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub result: Value,
}

impl Report {
    pub fn new(command: &'static str, config: Value, profile_id: &str, seed: u64, checks: Vec<Check>, result: Value) -> Report {
        let pass = checks.iter().all(|c| c.pass);
        Report { command, config, profile_id: profile_id.into(), seed, checks, pass, result }
    }
}
