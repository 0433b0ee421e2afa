use clap::{Args, Parser, Subcommand, ValueEnum};
use cstar_core::Tolerance;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "cstar-mod", version, about = "Generate and certify C*-module map instances")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a random instance document.
    Gen { kind: GenKind },
    /// Run a pipeline on an instance (generated from the seed when --input is absent).
    Run { command: RunCommand },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    CpMap,
    LinearMap,
    ModuleMap,
    Kernel,
    Representation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunCommand {
    Stinespring,
    Kolmogorov,
    CanonicalPhi,
    FactorPhi,
    FactorCb,
    Dilate,
    CpExtend,
    /// CP extension of a linear map `A -> B(H, K)` to `M_2(A)`.
    ExtendAlgebraMap,
    Suite,
}

impl RunCommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::Stinespring => "stinespring",
            Self::Kolmogorov => "kolmogorov",
            Self::CanonicalPhi => "canonical-phi",
            Self::FactorPhi => "factor-phi",
            Self::FactorCb => "factor-cb",
            Self::Dilate => "dilate",
            Self::CpExtend => "cp-extend",
            Self::ExtendAlgebraMap => "extend-algebra-map",
            Self::Suite => "suite",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = Tolerance::default().eps_psd)]
    pub tol_psd: f64,
    #[arg(long, global = true, default_value_t = Tolerance::default().eps_rank)]
    pub tol_rank: f64,
    #[arg(long, global = true, default_value_t = Tolerance::default().eps_eq)]
    pub tol_eq: f64,
    #[arg(long, global = true, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, global = true, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, global = true, default_value_t = 3)]
    pub max_block: usize,
    #[arg(long, global = true, default_value_t = 2)]
    pub max_m: usize,
    #[arg(long, global = true, default_value_t = 3)]
    pub max_dimh: usize,
    /// Output file (standard output when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Instance document; `-` reads standard input.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
}

/// Everything that determines a run's output, echoed in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub tol: Tolerance,
    pub levels: usize,
    pub trials: usize,
    pub max_block: usize,
    pub max_m: usize,
    pub max_dimh: usize,
}

impl RunConfig {
    pub fn from_options(o: &Options) -> Result<Self, String> {
        let tol = Tolerance::new(o.tol_psd, o.tol_rank, o.tol_eq).map_err(|e| e.to_string())?;
        for (name, v) in [
            ("--max-block", o.max_block),
            ("--max-m", o.max_m),
            ("--max-dimh", o.max_dimh),
            ("--levels", o.levels),
        ] {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        Ok(Self {
            seed: o.seed,
            tol,
            levels: o.levels,
            trials: o.trials,
            max_block: o.max_block,
            max_m: o.max_m,
            max_dimh: o.max_dimh,
        })
    }
}
