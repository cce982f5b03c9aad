//! Experiment configuration: a TOML document with `key = value` sections,
//! deserialized with defaults for every omitted field so the manifest can
//! echo the fully resolved settings.

use desparse::desparsify::{DmtConfig, NodewiseConfig};
use desparse::ensemble::EnsembleConfig;
use desparse::sim::SimConfig;
use desparse::solvers::{CvConfig, LassoConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DMtlasso,
    CdMtlasso,
    EcdMtlasso,
    DLasso,
    Sloreta,
    Dspm,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::DMtlasso => "d-mtlasso",
            Method::CdMtlasso => "cd-mtlasso",
            Method::EcdMtlasso => "ecd-mtlasso",
            Method::DLasso => "d-lasso",
            Method::Sloreta => "sloreta",
            Method::Dspm => "dspm",
        }
    }
}

/// Method-specific parameters; unused entries are ignored by the chosen
/// method but still echoed in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodParams {
    /// Cluster count for the compressed variants.
    pub n_clusters: usize,
    /// Ensemble member count (B).
    pub ensemble_size: usize,
    /// Row fraction used to fit each ensemble clustering.
    pub subsample_fraction: f64,
    /// Aggregation floor γ_min.
    pub gamma_min: f64,
    /// Nodewise regularization fraction c.
    pub nodewise_c: f64,
    /// Duality-gap tolerance of the solvers.
    pub solver_tol: f64,
    /// Sweep cap of the solvers.
    pub solver_max_iter: usize,
    /// Ridge penalty for the baselines; when absent, trace(XXᵀ)/n / 9.
    pub lambda: Option<f64>,
    /// Noise variance handed to the baselines; when absent, the simulation σ².
    pub sigma2: Option<f64>,
    pub cv: CvParams,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            n_clusters: 40,
            ensemble_size: 25,
            subsample_fraction: 0.10,
            gamma_min: 0.25,
            nodewise_c: 0.005,
            solver_tol: 1e-6,
            solver_max_iter: 10_000,
            lambda: None,
            sigma2: None,
            cv: CvParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct CvParams {
    pub n_lambdas: usize,
    pub lambda_min_ratio: f64,
    pub n_folds: usize,
}

impl Default for CvParams {
    fn default() -> Self {
        Self { n_lambdas: 15, lambda_min_ratio: 0.01, n_folds: 5 }
    }
}

/// The full experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub method: Method,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_reps")]
    pub n_repetitions: usize,
    #[serde(default = "default_deltas")]
    pub delta_list: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Also dump the simulated matrices in the binary container format.
    #[serde(default)]
    pub dump_data: bool,
    pub sim: SimConfig,
    #[serde(default)]
    pub params: MethodParams,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_reps() -> usize {
    100
}

fn default_deltas() -> Vec<f64> {
    vec![20.0, 40.0]
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Solver/CV/nodewise settings for the inference pipelines; the CV seed
    /// is derived from the run seed so repetitions differ.
    pub fn dmt_config(&self, run_seed: u64) -> DmtConfig {
        let solver = LassoConfig {
            lambda: 0.0,
            max_iter: self.params.solver_max_iter,
            tol: self.params.solver_tol,
        };
        DmtConfig {
            cv: CvConfig {
                n_lambdas: self.params.cv.n_lambdas,
                lambda_min_ratio: self.params.cv.lambda_min_ratio,
                n_folds: self.params.cv.n_folds,
                seed: desparse::sim::split_seed(run_seed, 101),
            },
            solver,
            nodewise: NodewiseConfig { c: self.params.nodewise_c, solver },
        }
    }

    pub fn ensemble_config(&self, run_seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            ensemble_size: self.params.ensemble_size,
            subsample_fraction: self.params.subsample_fraction,
            gamma_min: self.params.gamma_min,
            seed: desparse::sim::split_seed(run_seed, 202),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let text = r#"
method = "d-mtlasso"

[sim]
geometry = { kind = "grid", rows = 4, cols = 4, spacing_mm = 5.0 }
n_sensors = 20
gain = { kind = "iid" }
n_active_regions = 1
region_radius_mm = 5.0
amplitude = 1.0
rho = 0.0
sigma = 1.0
t_steps = 2
seed = 0
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.method, Method::DMtlasso);
        assert_eq!(cfg.alpha, 0.05);
        assert_eq!(cfg.params.n_clusters, 40);
        assert_eq!(cfg.params.cv.n_folds, 5);
    }

    #[test]
    fn round_trips_through_toml() {
        let text = r#"
method = "ecd-mtlasso"
alpha = 0.1
seed = 7
n_repetitions = 3
delta_list = [10.0]

[sim]
geometry = { kind = "chain", p = 10, spacing_mm = 2.0 }
n_sensors = 15
gain = { kind = "gaussian_kernel", width_mm = 8.0 }
n_active_regions = 1
region_radius_mm = 2.0
amplitude = 2.0
rho = 0.3
sigma = 1.0
t_steps = 3
seed = 0

[params]
n_clusters = 5
ensemble_size = 4
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let serialized = toml::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_toml(&serialized).unwrap();
        assert_eq!(back.method, Method::EcdMtlasso);
        assert_eq!(back.params.n_clusters, 5);
        assert_eq!(back.params.ensemble_size, 4);
        assert_eq!(back.params.gamma_min, 0.25);
    }
}
