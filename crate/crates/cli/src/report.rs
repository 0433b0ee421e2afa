use std::collections::BTreeMap;

use cstar_core::{CbError, KernelError, LinalgError, MapError, PhiError, SCHEMA};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_BREAKDOWN: i32 = 3;

/// Why a trial did not pass.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// The instance violates a hypothesis or a certificate fails its check.
    Verdict(String),
    /// Malformed or inconsistent input.
    Schema(String),
    /// A decomposition or contract broke down numerically.
    Breakdown(String),
}

impl Failure {
    pub fn message(&self) -> &str {
        match self {
            Self::Verdict(m) | Self::Schema(m) | Self::Breakdown(m) => m,
        }
    }

    pub fn status(&self) -> Status {
        match self {
            Self::Verdict(_) => Status::Fail,
            Self::Schema(_) => Status::SchemaError,
            Self::Breakdown(_) => Status::Breakdown,
        }
    }
}

impl From<LinalgError> for Failure {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::InvalidTolerance { .. } => Self::Schema(e.to_string()),
            _ => Self::Breakdown(e.to_string()),
        }
    }
}

impl From<cstar_core::AlgebraError> for Failure {
    fn from(e: cstar_core::AlgebraError) -> Self {
        Self::Schema(e.to_string())
    }
}

impl From<MapError> for Failure {
    fn from(e: MapError) -> Self {
        match e {
            MapError::NotCompletelyPositive { .. } => Self::Verdict("not completely positive".into()),
            MapError::NotRepresentation(_) | MapError::NotSquareValued { .. } => Self::Verdict(e.to_string()),
            MapError::Breakdown(_) => Self::Breakdown(e.to_string()),
            MapError::Linalg(l) => l.into(),
            MapError::Algebra(_) | MapError::Dimension { .. } => Self::Schema(e.to_string()),
        }
    }
}

impl From<KernelError> for Failure {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::NotPositiveDefinite { .. } => Self::Verdict("not positive definite".into()),
            KernelError::NotHermitian | KernelError::KernelMismatch { .. } | KernelError::NotIsometry(_) => {
                Self::Verdict(e.to_string())
            }
            KernelError::Linalg(l) => l.into(),
            KernelError::Map(m) => m.into(),
            KernelError::Algebra(_) | KernelError::Dimension { .. } => Self::Schema(e.to_string()),
        }
    }
}

impl From<PhiError> for Failure {
    fn from(e: PhiError) -> Self {
        match e {
            PhiError::NotPhiMap { .. } | PhiError::NotSemiPhiMap { .. } => Self::Verdict(e.to_string()),
            PhiError::NonMinimalDilation { .. } | PhiError::Contract { .. } => Self::Breakdown(e.to_string()),
            PhiError::Linalg(l) => l.into(),
            PhiError::Map(m) => m.into(),
            PhiError::Algebra(_) | PhiError::Dimension { .. } => Self::Schema(e.to_string()),
        }
    }
}

impl From<CbError> for Failure {
    fn from(e: CbError) -> Self {
        match e {
            CbError::Violation(_) => Self::Verdict(e.to_string()),
            CbError::Linalg(l) => l.into(),
            CbError::Map(m) => m.into(),
            CbError::Phi(p) => p.into(),
            CbError::Algebra(a) => a.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    SchemaError,
    Breakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub id: String,
    pub status: Status,
    /// `"pass"` or the reason for failure.
    pub verdict: String,
    pub residuals: BTreeMap<String, f64>,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Value>,
    /// Serialized input of a failing trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub schema_errors: usize,
    pub breakdowns: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub command: String,
    pub config: RunConfig,
    pub results: Vec<TrialResult>,
    pub summary: Summary,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig, mut results: Vec<TrialResult>) -> Self {
        results.sort_by(|a, b| a.id.cmp(&b.id));
        let count = |s: Status| results.iter().filter(|r| r.status == s).count();
        let summary = Summary {
            total: results.len(),
            passed: count(Status::Pass),
            failed: count(Status::Fail),
            schema_errors: count(Status::SchemaError),
            breakdowns: count(Status::Breakdown),
        };
        Self {
            schema: SCHEMA.to_string(),
            command: command.to_string(),
            config: config.clone(),
            results,
            summary,
        }
    }

    /// Schema errors dominate, then verdict failures, then breakdowns.
    pub fn exit_code(&self) -> i32 {
        let s = &self.summary;
        if s.schema_errors > 0 {
            EXIT_SCHEMA
        } else if s.failed > 0 {
            EXIT_VERDICT
        } else if s.breakdowns > 0 {
            EXIT_BREAKDOWN
        } else {
            EXIT_PASS
        }
    }
}

/// Collects residuals and the certificate while a trial runs.
#[derive(Debug, Default)]
pub struct Trial {
    pub residuals: BTreeMap<String, f64>,
    pub certificate: Option<Value>,
    pub instance: Option<Value>,
}

impl Trial {
    pub fn residual(&mut self, name: &str, value: f64) {
        self.residuals.insert(name.to_string(), value);
    }

    pub fn instance<T: Serialize>(&mut self, value: &T) {
        self.instance = serde_json::to_value(value).ok();
    }

    pub fn certificate<T: Serialize>(&mut self, value: &T) {
        self.certificate = serde_json::to_value(value).ok();
    }

    /// Fails with a verdict unless `value <= limit`; records the value either way.
    pub fn bound(&mut self, name: &str, value: f64, limit: f64) -> Result<(), Failure> {
        self.residual(name, value);
        if value <= limit {
            Ok(())
        } else {
            Err(Failure::Verdict(format!("{name} = {value:e} exceeds {limit:e}")))
        }
    }

    pub fn finish(self, id: String, outcome: Result<(), Failure>, wall_time_s: f64) -> TrialResult {
        let (status, verdict) = match &outcome {
            Ok(()) => (Status::Pass, "pass".to_string()),
            Err(f) => (f.status(), f.message().to_string()),
        };
        TrialResult {
            id,
            status,
            verdict,
            residuals: self.residuals,
            wall_time_s,
            certificate: self.certificate,
            instance: if outcome.is_ok() { None } else { self.instance },
        }
    }
}

pub fn ensure(cond: bool, what: impl Into<String>) -> Result<(), Failure> {
    if cond {
        Ok(())
    } else {
        Err(Failure::Verdict(what.into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_exit_codes() {
        let config = RunConfig {
            seed: 0,
            tol: cstar_core::Tolerance::default(),
            levels: 3,
            trials: 1,
            max_block: 2,
            max_m: 1,
            max_dimh: 2,
        };
        let code = |f: Failure| {
            let r = Trial::default().finish("x".into(), Err(f), 0.0);
            Report::new("t", &config, vec![r]).exit_code()
        };
        assert_eq!(code(MapError::NotCompletelyPositive { min_eigenvalue: -1.0 }.into()), EXIT_VERDICT);
        assert_eq!(code(MapError::Breakdown("x".into()).into()), EXIT_BREAKDOWN);
        assert_eq!(code(KernelError::NotPositiveDefinite { min_eigenvalue: -1.0 }.into()), EXIT_VERDICT);
        assert_eq!(code(PhiError::NotSemiPhiMap { min_eigenvalue: -1.0 }.into()), EXIT_VERDICT);
        assert_eq!(code(CbError::Violation("x".into()).into()), EXIT_VERDICT);
        assert_eq!(code(cstar_core::AlgebraError::ZeroRank.into()), EXIT_SCHEMA);
        let pass = Trial::default().finish("x".into(), Ok(()), 0.0);
        assert_eq!(Report::new("t", &config, vec![pass]).exit_code(), EXIT_PASS);
    }

    #[test]
    fn results_sorted_by_id() {
        let config = RunConfig {
            seed: 0,
            tol: cstar_core::Tolerance::default(),
            levels: 1,
            trials: 2,
            max_block: 1,
            max_m: 1,
            max_dimh: 1,
        };
        let r = Report::new(
            "t",
            &config,
            vec![
                Trial::default().finish("b".into(), Ok(()), 0.0),
                Trial::default().finish("a".into(), Err(Failure::Verdict("no".into())), 0.0),
            ],
        );
        assert_eq!(r.results[0].id, "a");
        assert_eq!(r.summary.failed, 1);
        assert_eq!(r.exit_code(), EXIT_VERDICT);
    }
}
