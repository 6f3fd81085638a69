//! Run configuration: one TOML file describes the population, the model
//! (expressions, parameters or priors, extents), and the per-command
//! sections. Values here map one-to-one onto the core types.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use ilm_core::model::{
    EventExtents, ModelClass, RiskFunctions, RiskParameters, RiskPriors,
};
use ilm_core::population::{load_population, DistanceSpec, Population};
use ilm_core::rates::DiseaseState;
use ilm_core::riskdsl::{parse_risk_expr, ExprContext};
use ilm_core::stats::Distribution;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub population: PopulationConfig,
    pub model: ModelConfig,
    pub simulate: Option<SimulateConfig>,
    pub fit: Option<FitConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub risks: PathBuf,
    #[serde(default)]
    pub distances: Vec<DistanceConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DistanceConfig {
    Euclidean { columns: Vec<String> },
    Matrix { path: PathBuf },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub class: String,
    pub functions: FunctionsConfig,
    pub parameters: Option<RoleVectors<f64>>,
    pub priors: Option<RoleVectors<DistConfig>>,
    pub extents: Option<ExtentsConfig>,
    /// Only the flat network prior is supported.
    pub network_prior: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionsConfig {
    pub sparks: String,
    pub susceptibility: String,
    pub infectivity_kernel: String,
    pub transmissibility: String,
    pub latency: Option<String>,
    pub removal: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleVectors<T> {
    #[serde(default = "Vec::new")]
    pub sparks: Vec<T>,
    #[serde(default = "Vec::new")]
    pub susceptibility: Vec<T>,
    #[serde(default = "Vec::new")]
    pub infectivity_kernel: Vec<T>,
    #[serde(default = "Vec::new")]
    pub transmissibility: Vec<T>,
    pub latency: Option<Vec<T>>,
    pub removal: Option<Vec<T>>,
}

/// Named distribution records, e.g. `{ family = "uniform", a = 0, b = 1 }`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum DistConfig {
    Uniform {
        a: f64,
        b: f64,
    },
    Exponential {
        mean: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
    },
    Normal {
        mu: f64,
        sigma: f64,
        #[serde(default)]
        truncated: bool,
    },
    Beta {
        alpha: f64,
        beta: f64,
    },
    /// Accepted only as the (default) transmission-network prior.
    Flat,
}

impl DistConfig {
    pub fn to_distribution(&self) -> Result<Distribution> {
        let d = match *self {
            DistConfig::Uniform { a, b } => Distribution::Uniform { a, b },
            DistConfig::Exponential { mean } => Distribution::Exponential { mean },
            DistConfig::Gamma { shape, scale } => Distribution::Gamma { shape, scale },
            DistConfig::Normal {
                mu,
                sigma,
                truncated,
            } => Distribution::Normal {
                mu,
                sigma,
                truncated,
            },
            DistConfig::Beta { alpha, beta } => Distribution::Beta { alpha, beta },
            DistConfig::Flat => {
                bail!("`flat` is only valid as the transmission-network prior")
            }
        };
        d.validate().map_err(|e| anyhow!(e))?;
        Ok(d)
    }
}

/// Scalar shorthand `hi` expands to `(0, hi)`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrPair {
    Scalar(f64),
    Pair([f64; 2]),
}

impl ScalarOrPair {
    fn expand(self) -> (f64, f64) {
        match self {
            ScalarOrPair::Scalar(hi) => (0.0, hi),
            ScalarOrPair::Pair([lo, hi]) => (lo, hi),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtentsConfig {
    pub exposure: Option<ScalarOrPair>,
    pub infection: ScalarOrPair,
    pub removal: Option<ScalarOrPair>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub tmax: Option<f64>,
    pub max_iterations: Option<u64>,
    pub max_wall_seconds: Option<f64>,
    pub initial: Option<InitialStates>,
    pub observe: Option<ObserveConfig>,
    #[serde(default = "default_one")]
    pub replicates: usize,
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStates {
    #[serde(default)]
    pub exposed: Vec<usize>,
    #[serde(default)]
    pub infectious: Vec<usize>,
    #[serde(default)]
    pub removed: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserveConfig {
    pub infection_delay: DistConfig,
    pub removal_delay: Option<DistConfig>,
    #[serde(default)]
    pub force: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub iterations: usize,
    #[serde(default = "default_attempts")]
    pub init_attempts: usize,
    #[serde(default = "default_sigma")]
    pub event_sigma: f64,
    #[serde(default = "default_batches")]
    pub event_batches: usize,
    #[serde(default)]
    pub per_event_acceptance: bool,
    #[serde(default = "default_true")]
    pub condition_on_network: bool,
    #[serde(default = "default_one")]
    pub chains: usize,
    pub adapt: Option<AdaptConfig>,
    pub initial: Option<InitialStates>,
}

fn default_attempts() -> usize {
    1000
}
fn default_sigma() -> f64 {
    1.0
}
fn default_batches() -> usize {
    10
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptConfig {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_beta_mix")]
    pub beta_mix: f64,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
}

fn default_beta_mix() -> f64 {
    0.05
}
fn default_jitter() -> f64 {
    1e-10
}

impl RunConfig {
    /// Parse a TOML config; relative paths inside are resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut config: RunConfig = toml::from_str(&text)
            .with_context(|| format!("cannot parse config file {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.population.risks = resolve(base, &config.population.risks);
        for d in &mut config.population.distances {
            if let DistanceConfig::Matrix { path } = d {
                *path = resolve(base, path);
            }
        }
        if let Some(dir) = &config.output_dir {
            config.output_dir = Some(resolve(base, dir));
        }
        if let Some(prior) = &config.model.network_prior {
            if prior != "flat" {
                bail!("network_prior must be \"flat\" (the only supported network prior)");
            }
        }
        Ok(config)
    }

    pub fn model_class(&self) -> Result<ModelClass> {
        ModelClass::parse(&self.model.class)
            .ok_or_else(|| anyhow!("unknown model class `{}`", self.model.class))
    }

    pub fn load_population(&self) -> Result<Population> {
        let specs: Vec<DistanceSpec> = self
            .population
            .distances
            .iter()
            .map(|d| match d {
                DistanceConfig::Euclidean { columns } => DistanceSpec::Euclidean(columns.clone()),
                DistanceConfig::Matrix { path } => DistanceSpec::MatrixFile(path.clone()),
            })
            .collect();
        Ok(load_population(&self.population.risks, &specs)?)
    }

    pub fn risk_functions(&self) -> Result<RiskFunctions> {
        let class = self.model_class()?;
        let f = &self.model.functions;
        let single = |name: &str, text: &String| {
            parse_risk_expr(text, ExprContext::Single)
                .with_context(|| format!("cannot parse {name} expression `{text}`"))
        };
        let functions = RiskFunctions {
            class,
            sparks: single("sparks", &f.sparks)?,
            susceptibility: single("susceptibility", &f.susceptibility)?,
            infectivity_kernel: parse_risk_expr(&f.infectivity_kernel, ExprContext::Pair)
                .with_context(|| {
                    format!(
                        "cannot parse infectivity_kernel expression `{}`",
                        f.infectivity_kernel
                    )
                })?,
            transmissibility: single("transmissibility", &f.transmissibility)?,
            latency: match &f.latency {
                Some(text) => Some(single("latency", text)?),
                None => None,
            },
            removal: match &f.removal {
                Some(text) => Some(single("removal", text)?),
                None => None,
            },
        };
        Ok(functions)
    }

    pub fn risk_parameters(&self) -> Result<RiskParameters> {
        let p = self
            .model
            .parameters
            .as_ref()
            .ok_or_else(|| anyhow!("[model.parameters] section is required for this command"))?;
        Ok(RiskParameters {
            sparks: p.sparks.clone(),
            susceptibility: p.susceptibility.clone(),
            infectivity_kernel: p.infectivity_kernel.clone(),
            transmissibility: p.transmissibility.clone(),
            latency: p.latency.clone(),
            removal: p.removal.clone(),
        })
    }

    pub fn risk_priors(&self) -> Result<RiskPriors> {
        let p = self
            .model
            .priors
            .as_ref()
            .ok_or_else(|| anyhow!("[model.priors] section is required for this command"))?;
        let convert = |v: &Vec<DistConfig>| -> Result<Vec<Distribution>> {
            v.iter().map(|d| d.to_distribution()).collect()
        };
        Ok(RiskPriors {
            sparks: convert(&p.sparks)?,
            susceptibility: convert(&p.susceptibility)?,
            infectivity_kernel: convert(&p.infectivity_kernel)?,
            transmissibility: convert(&p.transmissibility)?,
            latency: p.latency.as_ref().map(|v| convert(v)).transpose()?,
            removal: p.removal.as_ref().map(|v| convert(v)).transpose()?,
        })
    }

    pub fn event_extents(&self) -> Result<EventExtents> {
        let e = self
            .model
            .extents
            .as_ref()
            .ok_or_else(|| anyhow!("[model.extents] section is required for this command"))?;
        Ok(EventExtents {
            exposure: e.exposure.map(ScalarOrPair::expand),
            infection: e.infection.expand(),
            removal: e.removal.map(ScalarOrPair::expand),
        })
    }
}

impl InitialStates {
    /// Expand to a full state vector (ids are 1-based; everyone else S).
    pub fn expand(&self, n: usize, class: ModelClass) -> Result<Vec<DiseaseState>> {
        let mut states = vec![DiseaseState::Susceptible; n];
        let mut assign = |ids: &[usize], state: DiseaseState| -> Result<()> {
            for &id in ids {
                if id < 1 || id > n {
                    bail!("initial-state id {id} out of range 1..={n}");
                }
                if states[id - 1] != DiseaseState::Susceptible {
                    bail!("initial-state id {id} listed twice");
                }
                if !state.legal_for(class) {
                    bail!("state {state} not representable in class {class}");
                }
                states[id - 1] = state;
            }
            Ok(())
        };
        assign(&self.exposed, DiseaseState::Exposed)?;
        assign(&self.infectious, DiseaseState::Infectious)?;
        assign(&self.removed, DiseaseState::Removed)?;
        Ok(states)
    }
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}
