//! Instance documents and their seeded generators.

use cstar_core::kernels::FiniteKernel;
use cstar_core::phi::PhiContext;
use cstar_core::{random, BlockAlgebra, HilbertModule, ModuleMap, OperatorMap, SCHEMA};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::config::{GenKind, RunConfig};
use crate::report::Failure;

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Instance {
    /// CP map `A -> B(H)`; `module_rank` fixes `E = A^m` for phi-map commands.
    CpMap {
        map: OperatorMap,
        #[serde(default = "one")]
        module_rank: usize,
    },
    /// Linear map `A -> B(H, K)`.
    LinearMap { map: OperatorMap },
    /// Linear module map `E -> B(H, K)`, optionally with the CP map it is dominated by.
    ModuleMap {
        map: ModuleMap,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phi: Option<OperatorMap>,
    },
    Kernel { kernel: FiniteKernel },
    Representation {
        pi: OperatorMap,
        #[serde(default = "one")]
        module_rank: usize,
    },
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::CpMap { .. } => "cp-map",
            Self::LinearMap { .. } => "linear-map",
            Self::ModuleMap { .. } => "module-map",
            Self::Kernel { .. } => "kernel",
            Self::Representation { .. } => "representation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub schema: String,
    #[serde(flatten)]
    pub instance: Instance,
}

impl Document {
    pub fn new(instance: Instance) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            instance,
        }
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let doc: Document = serde_json::from_str(text).map_err(|e| Failure::Schema(e.to_string()))?;
        if doc.schema != SCHEMA {
            return Err(Failure::Schema(format!(
                "unsupported schema {:?}, expected {SCHEMA:?}",
                doc.schema
            )));
        }
        Ok(doc)
    }
}

/// Random instances sized by the config caps.
pub struct Generator<'a> {
    pub rng: ChaCha20Rng,
    pub config: &'a RunConfig,
}

impl<'a> Generator<'a> {
    pub fn new(config: &'a RunConfig, stream: u64) -> Self {
        Self {
            rng: random::stream_rng(config.seed, stream),
            config,
        }
    }

    pub fn algebra(&mut self) -> BlockAlgebra {
        random::algebra(&mut self.rng, self.config.max_block, 2)
    }

    pub fn module(&mut self) -> HilbertModule {
        let a = self.algebra();
        let m = self.rng.random_range(1..=self.config.max_m);
        HilbertModule::new(a, m).expect("positive rank")
    }

    pub fn dim(&mut self) -> usize {
        self.rng.random_range(1..=self.config.max_dimh)
    }

    pub fn cp_map(&mut self, a: &BlockAlgebra) -> OperatorMap {
        let dim_h = self.dim();
        let kraus = self.rng.random_range(1..=3);
        random::cp_map(&mut self.rng, a, dim_h, kraus)
    }

    pub fn module_map(&mut self, e: &HilbertModule) -> ModuleMap {
        let dim_h = self.dim();
        let dim_k = self.dim();
        random::linear_module_map(&mut self.rng, e, dim_h, dim_k)
    }

    /// `(phi, E)` together with its canonical constructions.
    pub fn phi_context(&mut self) -> Result<PhiContext, Failure> {
        let e = self.module();
        let phi = self.cp_map(e.algebra());
        Ok(PhiContext::new(&phi, &e, &self.config.tol)?)
    }

    pub fn instance(&mut self, kind: GenKind) -> Instance {
        match kind {
            GenKind::CpMap => {
                let e = self.module();
                Instance::CpMap {
                    map: self.cp_map(e.algebra()),
                    module_rank: e.rank(),
                }
            }
            GenKind::LinearMap => {
                let a = self.algebra();
                let (dim_k, dim_h) = (self.dim(), self.dim());
                Instance::LinearMap {
                    map: random::linear_map(&mut self.rng, &a, dim_k, dim_h),
                }
            }
            GenKind::ModuleMap => {
                let e = self.module();
                Instance::ModuleMap {
                    map: self.module_map(&e),
                    phi: None,
                }
            }
            GenKind::Kernel => {
                let points = self.rng.random_range(1..=5);
                let (dim_h, dim_k) = (self.dim(), self.dim());
                Instance::Kernel {
                    kernel: random::pd_kernel(&mut self.rng, points, dim_h, dim_k),
                }
            }
            GenKind::Representation => {
                let e = self.module();
                let blocks = e.algebra().blocks().len();
                let mut mult: Vec<usize> = (0..blocks).map(|_| self.rng.random_range(0..=2)).collect();
                if mult.iter().all(|&m| m == 0) {
                    mult[0] = 1;
                }
                Instance::Representation {
                    pi: random::representation(&mut self.rng, e.algebra(), &mult),
                    module_rank: e.rank(),
                }
            }
        }
    }
}

/// The `gen` output: one document per (seed, kind).
pub fn generate(config: &RunConfig, kind: GenKind) -> Document {
    let stream = match kind {
        GenKind::CpMap => 1,
        GenKind::LinearMap => 2,
        GenKind::ModuleMap => 3,
        GenKind::Kernel => 4,
        GenKind::Representation => 5,
    };
    Document::new(Generator::new(config, stream).instance(kind))
}
