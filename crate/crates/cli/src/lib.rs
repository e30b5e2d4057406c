//! Named experiments that emit degeneracy certificates, sweep data and a readable summary.

mod dr;
mod reg;
mod wpinn;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use forge_core::measurement::Check;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown experiment `{0}`; run `forge list` for the available names")]
    UnknownExperiment(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("cannot write outputs: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] forge_core::Error),
}

impl CliError {
    /// 2 for usage errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::UnknownExperiment(_) | CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExperimentInfo {
    pub name: &'static str,
    pub anchor: &'static str,
    /// Expected wall time of the default config in an optimised build.
    pub runtime_seconds: u32,
}

pub const EXPERIMENTS: [ExperimentInfo; 12] = [
    ExperimentInfo { name: "dr-affine", anchor: "Example (which is not a solution of)", runtime_seconds: 1 },
    ExperimentInfo {
        name: "dr-zero-loss-family",
        anchor: "Example (for any b ∈ (−T, −z_N) solves)",
        runtime_seconds: 1,
    },
    ExperimentInfo { name: "dr-noncoercive", anchor: "Example (not bounded below and not coercive)", runtime_seconds: 1 },
    ExperimentInfo { name: "dr-nonuniqueness", anchor: "Theorem (the set of minimizers is infinite)", runtime_seconds: 1 },
    ExperimentInfo {
        name: "dr-collocation-agreement",
        anchor: "Proposition (Uniqueness on collocation points)",
        runtime_seconds: 30,
    },
    ExperimentInfo { name: "reg-zero-loss", anchor: "Theorem (always has a solution)", runtime_seconds: 1 },
    ExperimentInfo { name: "reg-fd-contrast", anchor: "Remark (no regularization has been performed)", runtime_seconds: 1 },
    ExperimentInfo { name: "reg-fd-agree", anchor: "Theorem (coincide on the grid Ω^h)", runtime_seconds: 1 },
    ExperimentInfo {
        name: "reg-fd-nonuniqueness",
        anchor: "Theorem (then it has infinitely many solutions)",
        runtime_seconds: 1,
    },
    ExperimentInfo { name: "wpinn-kernel", anchor: "Theorem (admits nontrivial solutions)", runtime_seconds: 1 },
    ExperimentInfo { name: "wpinn-family", anchor: "Corollary (admits infinitely many solutions in)", runtime_seconds: 2 },
    ExperimentInfo { name: "wpinn-quadrature", anchor: "Remark (quadrature does not restore uniqueness)", runtime_seconds: 1 },
];

pub fn find(name: &str) -> Option<&'static ExperimentInfo> {
    EXPERIMENTS.iter().find(|e| e.name == name)
}

/// Table printed by `forge list`.
pub fn list_table() -> String {
    let width = EXPERIMENTS.iter().map(|e| e.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for e in &EXPERIMENTS {
        let _ = writeln!(s, "{:<width$} → {}  (~{} s)", e.name, e.anchor, e.runtime_seconds);
    }
    s
}

/// What an experiment hands back before the common report fields are attached.
pub(crate) struct Outcome {
    pub checks: Vec<Check>,
    pub results: Value,
    pub sweep_csv: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub experiment: String,
    pub anchor: String,
    pub seed: u64,
    pub config: Value,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub results: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub certificate: Certificate,
    pub sweep_csv: String,
    pub summary: String,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.certificate.passed
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.certificate.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn certificate_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.certificate).expect("certificate serializes");
        s.push('\n');
        s
    }

    /// Writes `certificate.json`, `sweep.csv` and `summary.txt` into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("certificate.json"), self.certificate_json())?;
        fs::write(dir.join("sweep.csv"), &self.sweep_csv)?;
        fs::write(dir.join("summary.txt"), &self.summary)?;
        Ok(())
    }
}

pub(crate) trait Seeded {
    fn seed(&self) -> u64;
    fn set_seed(&mut self, seed: u64);
}

macro_rules! seeded {
    ($($t:ty),* $(,)?) => {
        $(impl crate::Seeded for $t {
            fn seed(&self) -> u64 {
                self.seed
            }
            fn set_seed(&mut self, seed: u64) {
                self.seed = seed;
            }
        })*
    };
}
pub(crate) use seeded;

/// Default config of an experiment as JSON.
pub fn default_config(name: &str) -> Result<Value> {
    let v = match name {
        "dr-affine" => to_value(dr::AffineConfig::default()),
        "dr-zero-loss-family" => to_value(dr::ZeroLossConfig::default()),
        "dr-noncoercive" => to_value(dr::NonCoerciveConfig::default()),
        "dr-nonuniqueness" => to_value(dr::NonUniquenessConfig::default()),
        "dr-collocation-agreement" => to_value(dr::CollocationConfig::default()),
        "reg-zero-loss" => to_value(reg::ZeroLossConfig::default()),
        "reg-fd-contrast" => to_value(reg::ContrastConfig::default()),
        "reg-fd-agree" => to_value(reg::AgreeConfig::default()),
        "reg-fd-nonuniqueness" => to_value(reg::FdNonUniquenessConfig::default()),
        "wpinn-kernel" => to_value(wpinn::KernelConfig::default()),
        "wpinn-family" => to_value(wpinn::FamilyConfig::default()),
        "wpinn-quadrature" => to_value(wpinn::QuadratureConfig::default()),
        other => return Err(CliError::UnknownExperiment(other.into())),
    };
    Ok(v)
}

fn to_value<T: Serialize>(t: T) -> Value {
    serde_json::to_value(t).expect("config serializes")
}

/// Runs `name` with the JSON config (or the built-in default when `None`); `seed` overrides the config seed.
pub fn run(name: &str, config: Option<&str>, seed: Option<u64>) -> Result<Report> {
    let info = find(name).ok_or_else(|| CliError::UnknownExperiment(name.into()))?;
    match name {
        "dr-affine" => dispatch(info, config, seed, dr::affine),
        "dr-zero-loss-family" => dispatch(info, config, seed, dr::zero_loss_family),
        "dr-noncoercive" => dispatch(info, config, seed, dr::noncoercive),
        "dr-nonuniqueness" => dispatch(info, config, seed, dr::nonuniqueness),
        "dr-collocation-agreement" => dispatch(info, config, seed, dr::collocation),
        "reg-zero-loss" => dispatch(info, config, seed, reg::zero_loss),
        "reg-fd-contrast" => dispatch(info, config, seed, reg::fd_contrast),
        "reg-fd-agree" => dispatch(info, config, seed, reg::fd_agree),
        "reg-fd-nonuniqueness" => dispatch(info, config, seed, reg::fd_nonuniqueness),
        "wpinn-kernel" => dispatch(info, config, seed, wpinn::kernel),
        "wpinn-family" => dispatch(info, config, seed, wpinn::family),
        "wpinn-quadrature" => dispatch(info, config, seed, wpinn::quadrature),
        _ => unreachable!("registry and dispatch disagree on {name}"),
    }
}

fn parse_config<C: DeserializeOwned + Default>(text: Option<&str>) -> Result<C> {
    let Some(text) = text else {
        return Ok(C::default());
    };
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    match value.get("seed") {
        Some(s) if s.is_u64() => {}
        Some(s) => return Err(CliError::Config(format!("`seed` must be a non-negative integer, got {s}"))),
        None => return Err(CliError::Config("missing mandatory field `seed`".into())),
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
}

fn dispatch<C>(info: &ExperimentInfo, config: Option<&str>, seed: Option<u64>, f: fn(&C) -> Result<Outcome>) -> Result<Report>
where
    C: DeserializeOwned + Serialize + Default + Seeded,
{
    let mut cfg: C = parse_config(config)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    let outcome = f(&cfg)?;
    let passed = outcome.checks.iter().all(|c| c.passed);
    let certificate = Certificate {
        experiment: info.name.into(),
        anchor: info.anchor.into(),
        seed: cfg.seed(),
        config: to_value(&cfg),
        passed,
        checks: outcome.checks,
        results: outcome.results,
    };
    let summary = render_summary(&certificate, &outcome.summary);
    Ok(Report { certificate, sweep_csv: outcome.sweep_csv, summary })
}

fn render_summary(cert: &Certificate, body: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} → {}", cert.experiment, cert.anchor);
    let _ = writeln!(s, "seed: {}", cert.seed);
    let _ = writeln!(s, "result: {}", if cert.passed { "PASS" } else { "FAIL" });
    s.push('\n');
    s.push_str(body);
    if !body.ends_with('\n') {
        s.push('\n');
    }
    s.push_str("\nchecks:\n");
    for c in &cert.checks {
        let _ = writeln!(
            s,
            "  [{}] {}: value {:e}, threshold {:e}",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        );
    }
    s
}

/// Prefixes every check name with `scope/`.
pub(crate) fn scoped(scope: &str, checks: impl IntoIterator<Item = Check>) -> Vec<Check> {
    checks.into_iter().map(|mut c| {
        c.name = format!("{scope}/{}", c.name);
        c
    }).collect()
}

pub(crate) fn flag(name: &str, ok: bool) -> Check {
    Check { name: name.into(), passed: ok, value: if ok { 1.0 } else { 0.0 }, threshold: 1.0 }
}

pub(crate) fn value_of<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("results serialize")
}

pub(crate) fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_complete() {
        assert_eq!(EXPERIMENTS.len(), 12);
        for e in &EXPERIMENTS {
            assert!(default_config(e.name).is_ok(), "{}", e.name);
            assert!(e.runtime_seconds < 60);
        }
        let table = list_table();
        let line = table.lines().find(|l| l.starts_with("dr-nonuniqueness ")).unwrap();
        assert!(line.contains("→ Theorem (the set of minimizers is infinite)"));
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(matches!(run("dr-affine", Some("{}"), None), Err(CliError::Config(_))));
        assert!(matches!(run("dr-affine", Some("{\"seed\": -1}"), None), Err(CliError::Config(_))));
        assert!(matches!(run("dr-affine", Some("not json"), None), Err(CliError::Config(_))));
        assert!(matches!(run("nope", None, None), Err(CliError::UnknownExperiment(_))));
    }
}
