//! Name-keyed registries of constructions and complexity oracles.
//!
//! A [`RunConfig`] names a construction and an oracle and carries the
//! numeric parameters; [`Registry::run`] turns it into a trace, and
//! [`Registry::check`] routes a trace back to the checker that owns it.
//! Configs serialize to JSON, and rerunning a saved config reproduces the
//! trace byte for byte.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constructions::{
    check_complex_set, check_gap, check_hard_instances, complex_set_run, gap_bk_run,
    hard_instances_run, SimError, VmProbe,
};
use crate::icc::{check_claims, icc_run, IccError};
use crate::oracle::{ComplexityOracle, OracleError, ScriptedOracle, VmOracle};
use crate::trace::{CheckReport, StageTrace, TraceError};

pub const DEFAULT_VM_BUDGET: u64 = 4096;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unknown {kind} {name:?}; known: {}", known.join(", "))]
    Unknown {
        kind: &'static str,
        name: String,
        known: Vec<String>,
    },
    #[error("oracle {0:?} needs a script path")]
    MissingPath(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Icc(#[from] IccError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Which oracle to build, and with what.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec {
            name: "vm".into(),
            budget: None,
            path: None,
        }
    }
}

impl OracleSpec {
    pub fn vm(budget: u64) -> Self {
        OracleSpec {
            budget: Some(budget),
            ..Default::default()
        }
    }

    pub fn scripted(path: impl Into<PathBuf>) -> Self {
        OracleSpec {
            name: "scripted".into(),
            budget: None,
            path: Some(path.into()),
        }
    }
}

/// Everything needed to reproduce a run. Unset parameters take the
/// construction's defaults.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub construction: String,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

impl RunConfig {
    pub fn new(construction: &str) -> Self {
        RunConfig {
            construction: construction.into(),
            ..Default::default()
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, TraceError> {
        Ok(serde_json::from_str(text)?)
    }
}

pub trait OracleFactory: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, spec: &OracleSpec) -> Result<Box<dyn ComplexityOracle>, RegistryError>;
}

struct VmFactory;

impl OracleFactory for VmFactory {
    fn name(&self) -> &'static str {
        "vm"
    }

    fn build(&self, spec: &OracleSpec) -> Result<Box<dyn ComplexityOracle>, RegistryError> {
        Ok(Box::new(VmOracle::new(spec.budget.unwrap_or(DEFAULT_VM_BUDGET))))
    }
}

/// JSON list of `[x, stage, value]` triples, validated on load.
struct ScriptedFactory;

impl OracleFactory for ScriptedFactory {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn build(&self, spec: &OracleSpec) -> Result<Box<dyn ComplexityOracle>, RegistryError> {
        let path = spec
            .path
            .clone()
            .ok_or_else(|| RegistryError::MissingPath(spec.name.clone()))?;
        let text = std::fs::read_to_string(&path).map_err(|source| RegistryError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(Box::new(ScriptedOracle::from_json(&text)?))
    }
}

pub trait Construction: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn run(&self, cfg: &RunConfig, oracles: &Registry) -> Result<StageTrace, RegistryError>;
    fn check(&self, trace: &StageTrace) -> Result<CheckReport, RegistryError>;
}

struct ComplexSet;

impl Construction for ComplexSet {
    fn name(&self) -> &'static str {
        "complex-set"
    }

    fn summary(&self) -> &'static str {
        "r.e. set whose prefixes stay complex on every interval I_k"
    }

    fn run(&self, cfg: &RunConfig, reg: &Registry) -> Result<StageTrace, RegistryError> {
        let mut oracle = reg.oracle(&cfg.oracle)?;
        let run = complex_set_run(cfg.k_max.unwrap_or(3), cfg.stages.unwrap_or(200), oracle.as_mut())?;
        Ok(run.to_trace())
    }

    fn check(&self, trace: &StageTrace) -> Result<CheckReport, RegistryError> {
        Ok(check_complex_set(trace)?)
    }
}

struct Gap;

impl Construction for Gap {
    fn name(&self) -> &'static str {
        "gap"
    }

    fn summary(&self) -> &'static str {
        "enumeration of the finite sets B_k"
    }

    fn run(&self, cfg: &RunConfig, _: &Registry) -> Result<StageTrace, RegistryError> {
        let budget = cfg.budget.unwrap_or(10_000);
        Ok(gap_bk_run(cfg.k.unwrap_or(2), budget)?.to_trace(budget))
    }

    fn check(&self, trace: &StageTrace) -> Result<CheckReport, RegistryError> {
        Ok(check_gap(trace)?)
    }
}

struct HardInstances;

impl Construction for HardInstances {
    fn name(&self) -> &'static str {
        "hard-instances"
    }

    fn summary(&self) -> &'static str {
        "finite game producing hard instances over 2^n columns"
    }

    fn run(&self, cfg: &RunConfig, _: &Registry) -> Result<StageTrace, RegistryError> {
        let budget = cfg.budget.unwrap_or(DEFAULT_VM_BUDGET);
        let mut probe = VmProbe::new(budget);
        let g = hard_instances_run(cfg.n.unwrap_or(3), budget, &mut probe)?;
        Ok(g.to_trace("vm"))
    }

    fn check(&self, trace: &StageTrace) -> Result<CheckReport, RegistryError> {
        Ok(check_hard_instances(trace)?)
    }
}

struct Icc;

impl Construction for Icc {
    fn name(&self) -> &'static str {
        "icc"
    }

    fn summary(&self) -> &'static str {
        "nonrecursive r.e. set with ic(x:A) <= log C(x) + 2"
    }

    fn run(&self, cfg: &RunConfig, reg: &Registry) -> Result<StageTrace, RegistryError> {
        let mut oracle = reg.oracle(&cfg.oracle)?;
        let run = icc_run(cfg.k_max.unwrap_or(3), cfg.stages.unwrap_or(10_000), oracle.as_mut())?;
        Ok(run.to_trace())
    }

    fn check(&self, trace: &StageTrace) -> Result<CheckReport, RegistryError> {
        Ok(check_claims(trace)?)
    }
}

pub struct Registry {
    constructions: BTreeMap<&'static str, Box<dyn Construction>>,
    oracles: BTreeMap<&'static str, Box<dyn OracleFactory>>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Registry::empty();
        r.register(Box::new(ComplexSet));
        r.register(Box::new(Gap));
        r.register(Box::new(HardInstances));
        r.register(Box::new(Icc));
        r.register_oracle(Box::new(VmFactory));
        r.register_oracle(Box::new(ScriptedFactory));
        r
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            constructions: BTreeMap::new(),
            oracles: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, c: Box<dyn Construction>) {
        self.constructions.insert(c.name(), c);
    }

    pub fn register_oracle(&mut self, f: Box<dyn OracleFactory>) {
        self.oracles.insert(f.name(), f);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.constructions.keys().copied()
    }

    pub fn oracle_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.oracles.keys().copied()
    }

    pub fn construction(&self, name: &str) -> Result<&dyn Construction, RegistryError> {
        self.constructions
            .get(name)
            .map(|c| c.as_ref())
            .ok_or_else(|| RegistryError::Unknown {
                kind: "construction",
                name: name.into(),
                known: self.names().map(String::from).collect(),
            })
    }

    pub fn oracle(&self, spec: &OracleSpec) -> Result<Box<dyn ComplexityOracle>, RegistryError> {
        self.oracles
            .get(spec.name.as_str())
            .ok_or_else(|| RegistryError::Unknown {
                kind: "oracle",
                name: spec.name.clone(),
                known: self.oracle_names().map(String::from).collect(),
            })?
            .build(spec)
    }

    pub fn run(&self, cfg: &RunConfig) -> Result<StageTrace, RegistryError> {
        self.construction(&cfg.construction)?.run(cfg, self)
    }

    /// Check a trace with the checker of the construction that wrote it.
    pub fn check(&self, trace: &StageTrace) -> Result<CheckReport, RegistryError> {
        self.construction(&trace.construction)?.check(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_every_construction() {
        let r = Registry::default();
        let names: Vec<_> = r.names().collect();
        assert_eq!(names, ["complex-set", "gap", "hard-instances", "icc"]);
        assert_eq!(r.oracle_names().collect::<Vec<_>>(), ["scripted", "vm"]);
    }

    #[test]
    fn unknown_names_are_reported() {
        let r = Registry::default();
        let err = r.run(&RunConfig::new("nope")).unwrap_err();
        assert!(err.to_string().contains("complex-set"));
        let mut cfg = RunConfig::new("icc");
        cfg.oracle.name = "magic".into();
        assert!(matches!(r.run(&cfg), Err(RegistryError::Unknown { kind: "oracle", .. })));
        cfg.oracle = OracleSpec {
            name: "scripted".into(),
            ..Default::default()
        };
        assert!(matches!(r.run(&cfg), Err(RegistryError::MissingPath(_))));
    }

    #[test]
    fn config_roundtrip_reruns_identically() {
        let r = Registry::default();
        for (name, cfg) in [
            ("gap", RunConfig { k: Some(1), budget: Some(300), ..RunConfig::new("gap") }),
            ("icc", RunConfig { k_max: Some(2), stages: Some(300), ..RunConfig::new("icc") }),
            (
                "complex-set",
                RunConfig { k_max: Some(2), stages: Some(30), oracle: OracleSpec::vm(64), ..RunConfig::new("complex-set") },
            ),
            ("hard-instances", RunConfig { n: Some(2), budget: Some(64), ..RunConfig::new("hard-instances") }),
        ] {
            let back = RunConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
            let a = r.run(&cfg).unwrap();
            let b = r.run(&back).unwrap();
            assert_eq!(a.construction, name);
            assert_eq!(a.to_json(), b.to_json());
            assert!(r.check(&a).unwrap().ok(), "{name}");
        }
    }

    #[test]
    fn scripted_oracle_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.json");
        std::fs::write(&path, r#"[["00", 1, 0]]"#).unwrap();
        let r = Registry::default();
        let cfg = RunConfig {
            k_max: Some(0),
            stages: Some(3),
            oracle: OracleSpec::scripted(&path),
            ..RunConfig::new("complex-set")
        };
        let t = r.run(&cfg).unwrap();
        assert_eq!(t.events.len(), 1);
        // pigeonhole breach is refused at load time
        std::fs::write(&path, r#"[["", 1, 0], ["0", 1, 0]]"#).unwrap();
        assert!(matches!(r.run(&cfg), Err(RegistryError::Oracle(_))));
    }
}
