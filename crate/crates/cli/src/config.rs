//! Run configuration.
//!
//! Files are TOML: `key = value` lines grouped under `[section]` headers.
//!
//! ```toml
//! [data]
//! dataset = "OR"          # OR, XOR or a CSV path with columns x1,x2,d
//! p_batch = 2
//!
//! [network]
//! k = 2.0
//! k_pre = 4.0
//! eta = 0.5
//! threshold = 0.1
//! seed = 42
//!
//! [run]
//! t = 50.0
//! t_grid = [25.0, 30.0, 35.0, 40.0, 45.0, 50.0]
//! max_iterations = 10
//! out = "results"
//! parallelism = 4
//! ```
//!
//! `[module]` and `[bounds]` are only read by `simulate-module` and `bounds`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use bfcnn_core::dataset::Dataset;
use bfcnn_core::fcnn::random_initial;
use bfcnn_core::netbuild::{build_bfcnn, BuildConfig, NetworkShape};
use bfcnn_core::scheduler::ClockConfig;
use bfcnn_core::{Blueprint64, Dataset64, DualRail64, IntegratorConfig64};
use serde::{Deserialize, Serialize};

pub const OUT_ENV: &str = "BFCNN_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub network: NetworkSection,
    pub run: RunSection,
    pub integrator: IntegratorSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub module: Option<ModuleSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub dataset: String,
    pub p_batch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub k: f64,
    pub k_pre: f64,
    pub eta: f64,
    pub threshold: f64,
    pub seed: u64,
    /// Initial positive rails are drawn from `U[init_lo, init_hi]`.
    pub init_lo: f64,
    pub init_hi: f64,
    /// Scale `c` of the realization error.
    pub error_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub t: f64,
    pub t_grid: Vec<f64>,
    pub max_iterations: usize,
    pub out: PathBuf,
    pub parallelism: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleSection {
    pub label: String,
    pub t: f64,
    /// Interior trajectory samples; 0 keeps only the accepted steps.
    #[serde(default)]
    pub samples: usize,
    /// Start values by species name. Anything not listed starts from the
    /// network's initial state.
    #[serde(default)]
    pub initial: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub m: usize,
    #[serde(default)]
    pub iteration: Vec<IterationCoefficients>,
    #[serde(default)]
    pub envelope: Vec<EnvelopeInput>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationCoefficients {
    pub rs: [f64; 2],
    pub transfer: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeInput {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            dataset: "OR".into(),
            p_batch: 2,
        }
    }
}

impl Default for NetworkSection {
    fn default() -> Self {
        let b = BuildConfig::<f64>::default();
        Self {
            k: b.k,
            k_pre: b.k_pre,
            eta: b.eta,
            threshold: b.threshold,
            seed: 42,
            init_lo: 0.1,
            init_hi: 0.9,
            error_scale: 1.0,
        }
    }
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t: 50.0,
            t_grid: Vec::new(),
            max_iterations: 10,
            out: PathBuf::from("results"),
            parallelism: 1,
        }
    }
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let c = IntegratorConfig64::default();
        Self {
            rel_tol: c.rel_tol,
            abs_tol: c.abs_tol,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataSection::default(),
            network: NetworkSection::default(),
            run: RunSection::default(),
            integrator: IntegratorSection::default(),
            module: None,
            bounds: None,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    ensure!(
        v.is_finite() && v > 0.0,
        "{name} must be positive and finite, got {v}"
    );
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("in config {}", p.display()))
            }
        }
    }

    /// Checks the values every subcommand relies on. Module-level
    /// preconditions are checked again when the network is built.
    pub fn validate(&self) -> Result<()> {
        let n = &self.network;
        ensure!(n.k > 1.0, "k must exceed 1, got {}", n.k);
        ensure!(
            n.k_pre > 1.0 && n.k_pre.is_finite(),
            "k_pre must exceed 1, got {}",
            n.k_pre
        );
        ensure!(
            n.eta > 0.0 && n.eta <= 1.0,
            "eta must lie in (0, 1], got {}",
            n.eta
        );
        positive("threshold", n.threshold)?;
        positive("error_scale", n.error_scale)?;
        ensure!(
            n.init_lo >= 0.0 && n.init_lo < n.init_hi && n.init_hi.is_finite(),
            "initial weight range [{}, {}] is invalid",
            n.init_lo,
            n.init_hi
        );
        ensure!(self.data.p_batch > 0, "p_batch must be positive");
        ensure!(
            self.run.t.is_finite() && self.run.t >= 0.0,
            "t must be nonnegative, got {}",
            self.run.t
        );
        for &t in &self.run.t_grid {
            ensure!(
                t.is_finite() && t >= 0.0,
                "t_grid holds invalid phase length {t}"
            );
        }
        ensure!(self.run.parallelism > 0, "parallelism must be at least 1");
        positive("rel_tol", self.integrator.rel_tol)?;
        positive("abs_tol", self.integrator.abs_tol)?;
        if let Some(m) = &self.module {
            ensure!(
                m.t.is_finite() && m.t >= 0.0,
                "module t must be nonnegative, got {}",
                m.t
            );
        }
        Ok(())
    }

    /// `BFCNN_OUT` wins over the configured directory.
    pub fn out_root(&self) -> PathBuf {
        match std::env::var_os(OUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.run.out.clone(),
        }
    }

    pub fn dataset(&self) -> Result<Dataset64> {
        Dataset::load(&self.data.dataset)
            .with_context(|| format!("loading dataset `{}`", self.data.dataset))
    }

    pub fn initial_weights(&self) -> DualRail64 {
        random_initial(
            self.network.seed,
            self.network.init_lo,
            self.network.init_hi,
        )
    }

    pub fn blueprint(&self) -> Result<Blueprint64> {
        let ds = self.dataset()?;
        let shape = NetworkShape::new(ds.len(), self.data.p_batch)?;
        let build = BuildConfig {
            k: self.network.k,
            k_pre: self.network.k_pre,
            eta: self.network.eta,
            threshold: self.network.threshold,
        };
        Ok(build_bfcnn(shape, &ds, build, &self.initial_weights())?)
    }

    pub fn integrator(&self) -> IntegratorConfig64 {
        IntegratorConfig64::with_tolerances(self.integrator.rel_tol, self.integrator.abs_tol)
    }

    pub fn clock(&self, t: f64, trace: bool) -> ClockConfig<f64> {
        let mut c = ClockConfig::new(t, self.run.max_iterations);
        c.integrator = self.integrator();
        c.trace = trace;
        c.error_scale = self.network.error_scale;
        c
    }

    pub fn module_section(&self) -> Result<&ModuleSection> {
        match &self.module {
            Some(m) => Ok(m),
            None => bail!("simulate-module needs a [module] section"),
        }
    }

    pub fn bounds_section(&self) -> Result<&BoundsSection> {
        match &self.bounds {
            Some(b) => Ok(b),
            None => bail!("bounds needs a [bounds] section"),
        }
    }

    pub fn echo(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# config could not be serialized: {e}\n"))
    }
}
