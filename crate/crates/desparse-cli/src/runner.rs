//! Pipeline execution: single inference runs and Monte Carlo campaigns.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use desparse::baselines::{default_lambda, dspm, sloreta};
use desparse::cluster::cd_mtlasso;
use desparse::design::MultiResponse;
use desparse::desparsify::{d_mtlasso, ClusterInfo, InferenceResult};
use desparse::ensemble::ecd_mtlasso;
use desparse::metrics::{
    delta_fwer, delta_precision_recall, ple, precision_at_recall, spatial_dispersion, SupportSpec,
};
use desparse::sim::{simulate, split_seed, SimConfig, SimData};

use crate::config::{ExperimentConfig, Method};
use crate::io::{
    self, write_csv, write_features_csv, write_matrix, FeatureRow,
};

/// Everything a run records besides the feature table. Wall time is logged to
/// stderr, not stored, so re-runs are byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub method: String,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub t: usize,
    pub alpha: f64,
    pub true_support: Vec<usize>,
    pub snr: f64,
    pub n_discoveries: usize,
    pub diagnostics: Diagnostics,
    /// The fully resolved configuration, defaults included.
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub lambda: Option<f64>,
    pub solver_gap: Option<f64>,
    pub solver_sweeps: Option<usize>,
    pub converged: Option<bool>,
    pub s_hat: Option<usize>,
    pub sigma2_hat: Option<f64>,
    pub rho_hat: Option<f64>,
    pub excluded: Vec<usize>,
    pub cluster: Option<ClusterInfo>,
}

/// Outcome of one inference run, ready for serialization.
pub struct RunOutput {
    pub rows: Vec<FeatureRow>,
    pub manifest: RunManifest,
}

fn row_norms(m: &Array2<f64>) -> Vec<f64> {
    (0..m.nrows())
        .map(|j| m.row(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

fn inference_rows(sim: &SimData, res: &InferenceResult) -> Vec<FeatureRow> {
    let norms = row_norms(&res.beta_debiased);
    let dim = sim.geometry.dim();
    (0..res.p())
        .map(|j| FeatureRow {
            feature: j,
            pos: (0..dim).map(|k| sim.geometry.positions()[[j, k]]).collect(),
            beta_norm: norms[j],
            stat: res.stat[j],
            pval: res.pval[j],
            pval_corrected: res.pval_corrected[j],
        })
        .collect()
}

fn baseline_rows(sim: &SimData, map: &Array2<f64>) -> Vec<FeatureRow> {
    let norms = row_norms(map);
    let dim = sim.geometry.dim();
    (0..map.nrows())
        .map(|j| FeatureRow {
            feature: j,
            pos: (0..dim).map(|k| sim.geometry.positions()[[j, k]]).collect(),
            beta_norm: norms[j],
            stat: norms[j],
            pval: f64::NAN,
            pval_corrected: f64::NAN,
        })
        .collect()
}

/// Simulate one scene and run the configured method on it.
pub fn execute_run(config: &ExperimentConfig, run_seed: u64) -> Result<RunOutput> {
    let sim_cfg = SimConfig { seed: run_seed, ..config.sim };
    let sim = simulate(&sim_cfg)?;
    let dmt = config.dmt_config(run_seed);

    let (rows, diagnostics) = match config.method {
        Method::DMtlasso | Method::DLasso => {
            let y_owned;
            let y = if config.method == Method::DLasso && sim.y.t() > 1 {
                // the single-task variant sees only the first time step
                y_owned = MultiResponse::new(
                    sim.y.data().column(0).to_owned().insert_axis(ndarray::Axis(1)),
                )?;
                &y_owned
            } else {
                &sim.y
            };
            let res = d_mtlasso(&sim.x, y, &dmt)?;
            let diag = diagnostics_from(&res);
            (inference_rows(&sim, &res), diag)
        }
        Method::CdMtlasso => {
            let res = cd_mtlasso(&sim.x, &sim.y, &sim.geometry, config.params.n_clusters, &dmt)?;
            let diag = diagnostics_from(&res);
            (inference_rows(&sim, &res), diag)
        }
        Method::EcdMtlasso => {
            let ecfg = config.ensemble_config(run_seed);
            let res = ecd_mtlasso(
                &sim.x,
                &sim.y,
                &sim.geometry,
                config.params.n_clusters,
                &ecfg,
                &dmt,
            )?;
            let diag = diagnostics_from(&res);
            (inference_rows(&sim, &res), diag)
        }
        Method::Sloreta | Method::Dspm => {
            let lambda = config.params.lambda.unwrap_or_else(|| default_lambda(&sim.x));
            let sigma2 =
                config.params.sigma2.unwrap_or(config.sim.sigma * config.sim.sigma).max(1e-12);
            let map = match config.method {
                Method::Sloreta => sloreta(&sim.x, &sim.y, lambda, sigma2)?,
                _ => dspm(&sim.x, &sim.y, lambda, sigma2)?,
            };
            let diag = Diagnostics {
                lambda: Some(lambda),
                solver_gap: None,
                solver_sweeps: None,
                converged: None,
                s_hat: None,
                sigma2_hat: Some(sigma2),
                rho_hat: None,
                excluded: Vec::new(),
                cluster: None,
            };
            (baseline_rows(&sim, &map), diag)
        }
    };

    let n_discoveries = rows
        .iter()
        .filter(|r| r.pval_corrected.is_finite() && r.pval_corrected <= config.alpha)
        .count();
    let manifest = RunManifest {
        method: config.method.as_str().to_string(),
        seed: run_seed,
        n: sim.x.n(),
        p: sim.x.p(),
        t: sim.y.t(),
        alpha: config.alpha,
        true_support: sim.b_true.support(),
        snr: sim.snr(),
        n_discoveries,
        diagnostics,
        config: config.clone(),
    };
    Ok(RunOutput { rows, manifest })
}

fn diagnostics_from(res: &InferenceResult) -> Diagnostics {
    Diagnostics {
        lambda: if res.lambda.is_finite() { Some(res.lambda) } else { None },
        solver_gap: if res.solver_gap.is_finite() { Some(res.solver_gap) } else { None },
        solver_sweeps: Some(res.solver_sweeps),
        converged: Some(res.converged),
        s_hat: Some(res.s_hat),
        sigma2_hat: Some(res.noise.sigma2()),
        rho_hat: Some(res.noise.rho()),
        excluded: res.excluded.clone(),
        cluster: res.cluster.clone(),
    }
}

fn write_run(out_dir: &Path, config: &ExperimentConfig, output: &RunOutput) -> Result<()> {
    let dim = match config.sim.geometry {
        desparse::sim::GeometrySpec::Grid { .. } | desparse::sim::GeometrySpec::Chain { .. } => 2,
    };
    write_features_csv(&out_dir.join("features.csv"), &output.rows, dim)?;
    let manifest = serde_json::to_string_pretty(&output.manifest)?;
    io::atomic_write(&out_dir.join("manifest.json"), manifest.as_bytes())?;
    Ok(())
}

/// `infer` subcommand: one simulate → infer → emit cycle.
pub fn run_infer(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let started = Instant::now();
    let output = execute_run(config, config.seed)?;
    write_run(out_dir, config, &output)?;
    if config.dump_data {
        let sim_cfg = SimConfig { seed: config.seed, ..config.sim };
        let sim = simulate(&sim_cfg)?;
        write_matrix(&out_dir.join("x.dspm"), sim.x.data())?;
        write_matrix(&out_dir.join("y.dspm"), sim.y.data())?;
        write_matrix(&out_dir.join("b_true.dspm"), sim.b_true.data())?;
    }
    eprintln!(
        "infer: method={} seed={} discoveries={} wall_time={:.2}s",
        config.method.as_str(),
        config.seed,
        output.manifest.n_discoveries,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn rep_dir(out_dir: &Path, rep: usize) -> std::path::PathBuf {
    out_dir.join("runs").join(format!("rep_{rep:04}"))
}

fn rep_complete(dir: &Path) -> bool {
    dir.join("features.csv").exists() && dir.join("manifest.json").exists()
}

/// `campaign` subcommand: repeat simulate+infer with derived seeds, then
/// aggregate metrics from the stored per-run files. Completed repetitions
/// are detected on disk and skipped, so interrupted campaigns resume.
pub fn run_campaign(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    use rayon::prelude::*;
    let started = Instant::now();
    let reps: Vec<usize> = (0..config.n_repetitions).collect();
    let pending: Vec<usize> =
        reps.iter().copied().filter(|&r| !rep_complete(&rep_dir(out_dir, r))).collect();
    eprintln!(
        "campaign: method={} reps={} pending={}",
        config.method.as_str(),
        config.n_repetitions,
        pending.len()
    );
    pending
        .par_iter()
        .map(|&rep| -> Result<()> {
            let run_seed = split_seed(config.seed, rep as u64);
            let output = execute_run(config, run_seed)?;
            write_run(&rep_dir(out_dir, rep), config, &output)?;
            Ok(())
        })
        .collect::<Result<Vec<()>>>()?;

    aggregate_campaign(config, out_dir)?;
    eprintln!(
        "campaign: done in {:.2}s ({} repetitions)",
        started.elapsed().as_secs_f64(),
        config.n_repetitions
    );
    Ok(())
}

/// Rebuild campaign metrics from the per-run files.
pub fn aggregate_campaign(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let geometry = desparse::sim::make_geometry(&config.sim.geometry)?;
    let mut pval_runs: Vec<Vec<f64>> = Vec::new();
    let mut manifests: Vec<RunManifest> = Vec::new();

    for rep in 0..config.n_repetitions {
        let dir = rep_dir(out_dir, rep);
        let rows = io::read_features_csv(&dir.join("features.csv"))?;
        let manifest: RunManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)
                .with_context(|| format!("manifest for rep {rep}"))?;
        pval_runs.push(rows.iter().map(|r| r.pval_corrected).collect());
        manifests.push(manifest);
    }

    let has_pvalues = pval_runs.iter().all(|run| run.iter().all(|v| v.is_finite()));

    // per-repetition metrics table
    let mut metric_rows = Vec::new();
    for (rep, manifest) in manifests.iter().enumerate() {
        let dir = rep_dir(out_dir, rep);
        let rows = io::read_features_csv(&dir.join("features.csv"))?;
        let stat_map: Vec<f64> = rows.iter().map(|r| r.stat).collect();
        let support = &manifest.true_support;
        let dist = geometry.distances_from_set(support);
        let mut peak = 0;
        for (j, v) in stat_map.iter().enumerate() {
            if v.abs() > stat_map[peak].abs() {
                peak = j;
            }
        }
        let ple_val = dist[peak];
        let sd_val = spatial_dispersion(&stat_map, support, &geometry)?;
        let min_p = pval_runs[rep].iter().copied().fold(f64::INFINITY, f64::min);
        let (avg_diam, max_diam) = manifest
            .diagnostics
            .cluster
            .as_ref()
            .map(|c| (c.avg_diameter, c.max_diameter))
            .unwrap_or((f64::NAN, f64::NAN));
        metric_rows.push(vec![
            rep.to_string(),
            manifest.seed.to_string(),
            format!("{ple_val}"),
            format!("{sd_val}"),
            format!("{min_p}"),
            manifest.n_discoveries.to_string(),
            manifest.diagnostics.s_hat.map(|v| v.to_string()).unwrap_or_default(),
            manifest.diagnostics.sigma2_hat.map(|v| format!("{v}")).unwrap_or_default(),
            manifest.diagnostics.rho_hat.map(|v| format!("{v}")).unwrap_or_default(),
            format!("{avg_diam}"),
            format!("{max_diam}"),
            format!("{}", manifest.snr),
        ]);
    }
    write_csv(
        &out_dir.join("metrics.csv"),
        "rep,seed,ple,sd,min_pval_corrected,n_discoveries,s_hat,sigma2_hat,rho_hat,avg_cluster_diameter,max_cluster_diameter,snr",
        &metric_rows,
    )?;

    if has_pvalues {
        // δ-FWER table over the requested tolerances plus the adaptive
        // 2×average-cluster-diameter rule
        let mut fwer_rows = Vec::new();
        for &delta in &config.delta_list {
            let mut violations = 0usize;
            for (run, manifest) in pval_runs.iter().zip(&manifests) {
                let spec = SupportSpec::new(manifest.true_support.clone(), delta)?;
                let f = delta_fwer(std::slice::from_ref(run), &spec, &geometry, config.alpha)?;
                if f > 0.0 {
                    violations += 1;
                }
            }
            fwer_rows.push(vec![
                "fixed".to_string(),
                format!("{delta}"),
                format!("{}", config.alpha),
                format!("{}", violations as f64 / pval_runs.len() as f64),
                pval_runs.len().to_string(),
            ]);
        }
        let adaptive_deltas: Vec<f64> = manifests
            .iter()
            .map(|m| {
                m.diagnostics.cluster.as_ref().map(|c| 2.0 * c.avg_diameter).unwrap_or(f64::NAN)
            })
            .collect();
        if adaptive_deltas.iter().all(|d| d.is_finite()) {
            let mut violations = 0usize;
            for ((run, manifest), &delta) in
                pval_runs.iter().zip(&manifests).zip(&adaptive_deltas)
            {
                let spec = SupportSpec::new(manifest.true_support.clone(), delta)?;
                let f = delta_fwer(std::slice::from_ref(run), &spec, &geometry, config.alpha)?;
                if f > 0.0 {
                    violations += 1;
                }
            }
            let mean_delta =
                adaptive_deltas.iter().sum::<f64>() / adaptive_deltas.len() as f64;
            fwer_rows.push(vec![
                "2x_avg_diameter".to_string(),
                format!("{mean_delta}"),
                format!("{}", config.alpha),
                format!("{}", violations as f64 / pval_runs.len() as f64),
                pval_runs.len().to_string(),
            ]);
        }
        write_csv(&out_dir.join("fwer.csv"), "rule,delta,alpha,fwer,n_runs", &fwer_rows)?;

        // mean δ-precision over a fixed recall grid
        let recall_grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
        let mut pr_rows = Vec::new();
        for &delta in &config.delta_list {
            let mut sums = vec![0.0_f64; recall_grid.len()];
            for (run, manifest) in pval_runs.iter().zip(&manifests) {
                let spec = SupportSpec::new(manifest.true_support.clone(), delta)?;
                let curve = delta_precision_recall(run, &spec, &geometry)?;
                for (s, v) in sums.iter_mut().zip(precision_at_recall(&curve, &recall_grid)) {
                    *s += v;
                }
            }
            for (r, s) in recall_grid.iter().zip(&sums) {
                pr_rows.push(vec![
                    format!("{delta}"),
                    format!("{r}"),
                    format!("{}", s / pval_runs.len() as f64),
                ]);
            }
        }
        write_csv(&out_dir.join("pr_curve.csv"), "delta,recall,mean_precision", &pr_rows)?;
    }

    // PLE histogram data (counts over 5 mm bins)
    let ple_vals: Vec<f64> = metric_rows.iter().map(|r| r[2].parse().unwrap()).collect();
    let max_ple = ple_vals.iter().copied().fold(0.0_f64, f64::max);
    let n_bins = ((max_ple / 5.0).ceil() as usize + 1).max(1);
    let mut bins = vec![0usize; n_bins];
    for &v in &ple_vals {
        bins[(v / 5.0).floor() as usize] += 1;
    }
    let hist_rows: Vec<Vec<String>> = bins
        .iter()
        .enumerate()
        .map(|(i, &c)| vec![format!("{}", i as f64 * 5.0), c.to_string()])
        .collect();
    write_csv(&out_dir.join("ple_hist.csv"), "bin_lo_mm,count", &hist_rows)?;

    Ok(())
}

/// Recompute a campaign's δ-FWER from stored files with the metrics module
/// directly; used by tests as a recomputation oracle.
pub fn recompute_fwer(
    config: &ExperimentConfig,
    out_dir: &Path,
    delta: f64,
) -> Result<f64> {
    let geometry = desparse::sim::make_geometry(&config.sim.geometry)?;
    let mut violations = 0usize;
    for rep in 0..config.n_repetitions {
        let dir = rep_dir(out_dir, rep);
        let rows = io::read_features_csv(&dir.join("features.csv"))?;
        let manifest: RunManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let run: Vec<f64> = rows.iter().map(|r| r.pval_corrected).collect();
        let spec = SupportSpec::new(manifest.true_support, delta)?;
        if delta_fwer(&[run], &spec, &geometry, config.alpha)? > 0.0 {
            violations += 1;
        }
    }
    Ok(violations as f64 / config.n_repetitions as f64)
}

/// Peak localization error of a stat map against the nearest support member.
pub fn ple_to_support(map: &[f64], support: &[usize], g: &desparse::Geometry) -> Result<f64> {
    if support.len() == 1 {
        return Ok(ple(map, support[0], g)?);
    }
    let mut peak = 0;
    for (j, v) in map.iter().enumerate() {
        if v.abs() > map[peak].abs() {
            peak = j;
        }
    }
    Ok(g.distances_from_set(support)[peak])
}
