//! Experiment orchestration: build a latent model, fit or load an oracle,
//! sweep optimization runs across search spaces, and emit the artifact
//! tree (run logs, summaries, best-so-far differences, exploration
//! diagnostics, distortion report, and gnuplot scripts).
//!
//! Re-running the same configuration produces byte-identical artifacts:
//! every stage is seeded from the configuration seed, parallel runs are
//! collected in order, and all files are written atomically.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::diagnostics::{self, DiagnosticsError, ExplorationReport, HvOptions};
use crate::distortion::{self, DistortionError, ScParams};
use crate::io::{self, IoError};
use crate::latent::{fit_reference_model, LatentError, LatentPoint, ReferenceLatentModel};
use crate::lbo::{self, LboConfig, LboError, RunRecord, SearchSpace};
use crate::oracle::{ClosedFormOracle, OracleError, OracleModel, SequenceObjective, SvrOracle};
use crate::peptides::{random_pool, Sequence};
use crate::projection::{self, fit_pca, PcaModel, ProjectionError};
use crate::rng::derive_seed;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config {field}: {reason}")]
    ConfigInvalid { field: String, reason: String },
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Latent(#[from] LatentError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Lbo(#[from] LboError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Distortion(#[from] DistortionError),
}

/// Where the sequence pool comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PoolConfig {
    Path { path: PathBuf },
    Synthetic { synthetic: SyntheticPool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPool {
    pub count: usize,
    pub min_len: usize,
    pub max_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentConfig {
    pub dim: usize,
    pub organizing: Vec<String>,
    pub lambda: f64,
}

/// Which "true" objective scores the sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleChoice {
    ClosedForm,
    Model(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LboSettings {
    pub spaces: Vec<SearchSpace>,
    pub iterations: usize,
    pub n_init: usize,
    pub n_runs: usize,
    pub box_lo: f64,
    pub box_hi: f64,
    pub gp_restarts: usize,
    pub gp_opt_iters: usize,
    pub gp_warm_iters: usize,
    pub gp_refit_every: usize,
    pub acq_restarts: usize,
}

impl Default for LboSettings {
    fn default() -> Self {
        let d = LboConfig::default();
        LboSettings {
            spaces: vec![SearchSpace::Full, SearchSpace::Pca(5)],
            iterations: d.iterations,
            n_init: d.n_init,
            n_runs: d.n_runs,
            box_lo: d.box_lo,
            box_hi: d.box_hi,
            gp_restarts: d.gp_restarts,
            gp_opt_iters: d.gp_opt_iters,
            gp_warm_iters: d.gp_warm_iters,
            gp_refit_every: d.gp_refit_every,
            acq_restarts: d.acq_restarts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistortionSettings {
    pub enabled: bool,
    pub n_sub: usize,
    pub size: usize,
    pub k: usize,
}

impl Default for DistortionSettings {
    fn default() -> Self {
        DistortionSettings { enabled: true, n_sub: 10, size: 1000, k: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSettings {
    pub hv_mc_samples: usize,
}

impl Default for DiagnosticsSettings {
    fn default() -> Self {
        DiagnosticsSettings { hv_mc_samples: diagnostics::HV_MC_SAMPLES }
    }
}

/// Full experiment configuration. Unknown keys are rejected; every random
/// choice derives from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pool: PoolConfig,
    pub latent: LatentConfig,
    pub oracle: OracleChoice,
    pub lbo: LboSettings,
    #[serde(default)]
    pub distortion: DistortionSettings,
    #[serde(default)]
    pub diagnostics: DiagnosticsSettings,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, ExperimentError> {
        let bytes = std::fs::read(path)
            .map_err(|source| IoError::Io { path: path.to_path_buf(), source })?;
        let config: ExperimentConfig = serde_json::from_slice(&bytes)
            .map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |field: &str, reason: String| ExperimentError::ConfigInvalid {
            field: field.to_string(),
            reason,
        };
        if self.lbo.spaces.is_empty() {
            return Err(invalid("lbo.spaces", "need at least one search space".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &self.lbo.spaces {
            if !seen.insert(*s) {
                return Err(invalid("lbo.spaces", format!("duplicate space '{s}'")));
            }
            if let SearchSpace::Pca(n) = s {
                if *n > self.latent.dim {
                    return Err(invalid(
                        "lbo.spaces",
                        format!("pca{n} exceeds latent dimension {}", self.latent.dim),
                    ));
                }
            }
        }
        if let PoolConfig::Synthetic { synthetic } = &self.pool {
            if synthetic.count < self.lbo.n_init {
                return Err(invalid(
                    "pool.synthetic.count",
                    format!("pool of {} cannot seed n_init = {}", synthetic.count, self.lbo.n_init),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.latent.lambda) {
            return Err(invalid("latent.lambda", "must be in [0, 1]".into()));
        }
        Ok(())
    }

    fn lbo_config(&self, space: SearchSpace) -> LboConfig {
        LboConfig {
            iterations: self.lbo.iterations,
            n_init: self.lbo.n_init,
            n_runs: self.lbo.n_runs,
            space,
            box_lo: self.lbo.box_lo,
            box_hi: self.lbo.box_hi,
            seed: self.seed,
            gp_restarts: self.lbo.gp_restarts,
            gp_opt_iters: self.lbo.gp_opt_iters,
            gp_warm_iters: self.lbo.gp_warm_iters,
            gp_refit_every: self.lbo.gp_refit_every,
            acq_restarts: self.lbo.acq_restarts,
        }
    }
}

/// In-memory results of a finished experiment.
pub struct ExperimentOutput {
    pub output_dir: PathBuf,
    /// Run records per space, in configuration order.
    pub runs: Vec<(SearchSpace, Vec<RunRecord>)>,
    pub reports: Vec<(SearchSpace, Vec<ExplorationReport>)>,
}

/// Execute the full pipeline and write the artifact tree.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    config.validate()?;
    let out = &config.output_dir;

    // Stage 1: pool.
    let pool: Vec<Sequence> = match &config.pool {
        PoolConfig::Path { path } => io::read_pool(path)?.into_iter().map(|(_, s)| s).collect(),
        PoolConfig::Synthetic { synthetic } => random_pool(
            derive_seed(config.seed, "pool", 0),
            synthetic.count,
            synthetic.min_len,
            synthetic.max_len,
        ),
    };

    // Stage 2: latent model and PCA of the encoded pool.
    let model = fit_reference_model(
        &pool,
        config.latent.dim,
        &config.latent.organizing,
        config.latent.lambda,
        derive_seed(config.seed, "latent", 0),
    )?;
    let encoded: Vec<LatentPoint> = pool.iter().map(|s| model.encode(s)).collect();
    let pca = fit_pca(&encoded)?;
    io::save_versioned(&out.join("model.json"), "latent-model", &model)?;
    io::save_versioned(&out.join("pca.json"), "pca-model", &pca)?;

    // Stage 3: objective.
    let objective: Box<dyn SequenceObjective> = match &config.oracle {
        OracleChoice::ClosedForm => Box::new(ClosedFormOracle),
        OracleChoice::Model(path) => {
            let oracle_model: OracleModel = io::load_versioned(path, "oracle-model")?;
            Box::new(SvrOracle::new(oracle_model))
        }
    };

    // Stage 4: optimization runs per space (runs parallelize inside).
    let mut runs: Vec<(SearchSpace, Vec<RunRecord>)> = Vec::new();
    for &space in &config.lbo.spaces {
        let lbo_config = config.lbo_config(space);
        let pca_arg = match space {
            SearchSpace::Full => None,
            SearchSpace::Pca(_) => Some(&pca),
        };
        let records = lbo::run_all(&lbo_config, objective.as_ref(), &model, pca_arg)?;
        for r in &records {
            if let Some(reason) = &r.aborted {
                return Err(ExperimentError::ConfigInvalid {
                    field: format!("run {space}/{}", r.run_index),
                    reason: format!("aborted: {reason}"),
                });
            }
        }
        runs.push((space, records));
    }
    for (space, records) in &runs {
        for r in records {
            io::write_run_csv(&out.join("runs").join(format!("{space}_run{}.csv", r.run_index)), r)?;
        }
    }

    // Stage 5: summary and best-so-far differences.
    write_summary_csv(&out.join("summary.csv"), &runs)?;
    write_sdiff_csv(&out.join("sdiff.csv"), &runs)?;

    // Stage 6: exploration diagnostics in the plane of the two components
    // most correlated with the objective over the pool.
    let reports = exploration_stage(
        &model,
        &pca,
        objective.as_ref(),
        &runs,
        config.lbo.box_lo,
        config.lbo.box_hi,
        config.diagnostics.hv_mc_samples,
        derive_seed(config.seed, "hv", 0),
    )?;
    write_diagnostics_csv(&out.join("diagnostics.csv"), &runs, &reports)?;

    // Stage 7: distortion between the full space and each PCA subspace.
    let distortion_json = if config.distortion.enabled {
        distortion_summary(config, &encoded, &pca)?
    } else {
        serde_json::json!({})
    };
    let mut bytes = serde_json::to_vec_pretty(&distortion_json).map_err(|source| IoError::Json {
        path: out.join("distortion.json"),
        source,
    })?;
    bytes.push(b'\n');
    io::write_atomic(&out.join("distortion.json"), &bytes)?;

    // Stage 8: plot scripts and the resolved configuration.
    write_plot_scripts(out, config, &runs, &reports)?;
    let mut cfg_bytes = serde_json::to_vec_pretty(config)
        .map_err(|source| IoError::Json { path: out.join("config.json"), source })?;
    cfg_bytes.push(b'\n');
    io::write_atomic(&out.join("config.json"), &cfg_bytes)?;

    Ok(ExperimentOutput { output_dir: out.clone(), runs, reports })
}

/// Exploration reports for grouped runs, computed in the plane of the two
/// principal components most correlated with the objective over the pool.
#[allow(clippy::too_many_arguments)]
fn exploration_stage(
    model: &ReferenceLatentModel,
    pca: &PcaModel,
    objective: &dyn SequenceObjective,
    runs: &[(SearchSpace, Vec<RunRecord>)],
    box_lo: f64,
    box_hi: f64,
    hv_mc_samples: usize,
    hv_seed: u64,
) -> Result<Vec<(SearchSpace, Vec<ExplorationReport>)>, ExperimentError> {
    let encoded: Vec<LatentPoint> = model.pool().iter().map(|s| model.encode(s)).collect();
    let pool_scores: Vec<f64> = model
        .pool()
        .iter()
        .map(|s| objective.score(s))
        .collect::<Result<_, _>>()?;
    let top = projection::top_correlated_pcs(pca, &encoded, &pool_scores)?;
    let (pc_a, pc_b) = (top.first.0, top.second.0);
    let plane = |latent: &[f64]| -> [f64; 2] {
        let scores = projection::project(pca, &LatentPoint::new(latent.to_vec()), pca.dim())
            .expect("full projection");
        [scores[pc_a], scores[pc_b]]
    };
    let reference_set: Vec<[f64; 2]> = encoded.iter().map(|z| plane(z.coords())).collect();
    let hv_options = HvOptions { mc_samples: hv_mc_samples, seed: hv_seed };
    let mut reports: Vec<(SearchSpace, Vec<ExplorationReport>)> = Vec::new();
    for (space, records) in runs {
        let space_reports: Vec<ExplorationReport> = records
            .par_iter()
            .map(|r| {
                diagnostics::exploration_report(
                    r,
                    box_lo,
                    box_hi,
                    plane,
                    &reference_set,
                    &hv_options,
                )
            })
            .collect::<Result<_, _>>()?;
        reports.push((*space, space_reports));
    }
    Ok(reports)
}

/// Rebuild grouped run records from run-log CSVs. The search space of each
/// log is inferred from its coordinate dimension; full latent points are
/// recovered through the inverse projection for PCA-space logs.
pub fn load_run_logs(
    paths: &[PathBuf],
    model: &ReferenceLatentModel,
    pca: &PcaModel,
    n_init: usize,
) -> Result<Vec<(SearchSpace, Vec<RunRecord>)>, ExperimentError> {
    let mut grouped: BTreeMap<String, Vec<RunRecord>> = BTreeMap::new();
    for path in paths {
        let log = io::read_run_csv(path)?;
        let k = log.coords.first().map_or(0, |c| c.len());
        let space = if k == model.dim() {
            SearchSpace::Full
        } else {
            SearchSpace::Pca(k)
        };
        let mut entries = Vec::with_capacity(log.coords.len());
        for (i, coords) in log.coords.iter().enumerate() {
            let latent = match space {
                SearchSpace::Full => coords.clone(),
                SearchSpace::Pca(_) => {
                    projection::inverse_project(pca, coords)?.coords().to_vec()
                }
            };
            let sequence = crate::peptides::parse_sequence(&log.sequences[i]).map_err(|e| {
                ExperimentError::ConfigInvalid {
                    field: format!("{}", path.display()),
                    reason: format!("row {i}: {e}"),
                }
            })?;
            entries.push(crate::lbo::RunEntry {
                index: i,
                coords: coords.clone(),
                latent,
                sequence,
                score: log.scores[i],
                best: log.bests[i],
            });
        }
        let group = grouped.entry(space.to_string()).or_default();
        group.push(RunRecord {
            space,
            run_index: group.len(),
            seed: 0,
            n_init: n_init.min(entries.len()),
            entries,
            acquisition_fallbacks: 0,
            aborted: None,
        });
    }
    let mut out = Vec::new();
    for (_, records) in grouped {
        let space = records[0].space;
        out.push((space, records));
    }
    Ok(out)
}

/// Recompute exploration diagnostics for existing run logs and write
/// `diagnostics.csv` plus the metric plot scripts into `out_dir`.
#[allow(clippy::too_many_arguments)]
pub fn diagnose_runs(
    model: &ReferenceLatentModel,
    pca: &PcaModel,
    objective: &dyn SequenceObjective,
    runs: &[(SearchSpace, Vec<RunRecord>)],
    out_dir: &Path,
    box_lo: f64,
    box_hi: f64,
    hv_mc_samples: usize,
    seed: u64,
) -> Result<Vec<(SearchSpace, Vec<ExplorationReport>)>, ExperimentError> {
    let reports = exploration_stage(
        model,
        pca,
        objective,
        runs,
        box_lo,
        box_hi,
        hv_mc_samples,
        derive_seed(seed, "hv", 0),
    )?;
    write_diagnostics_csv(&out_dir.join("diagnostics.csv"), runs, &reports)?;
    write_metric_plots(out_dir, runs, &reports)?;
    Ok(reports)
}

fn write_summary_csv(
    path: &Path,
    runs: &[(SearchSpace, Vec<RunRecord>)],
) -> Result<(), ExperimentError> {
    let mut rows: Vec<Vec<String>> = vec![vec![
        "space".into(),
        "iter".into(),
        "mean_best".into(),
        "stderr".into(),
    ]];
    for (space, records) in runs {
        let (mean, stderr) = lbo::mean_best_trace(records)?;
        for (i, (m, s)) in mean.iter().zip(&stderr).enumerate() {
            rows.push(vec![space.to_string(), i.to_string(), m.to_string(), s.to_string()]);
        }
    }
    write_csv_rows(path, &rows)
}

fn write_sdiff_csv(
    path: &Path,
    runs: &[(SearchSpace, Vec<RunRecord>)],
) -> Result<(), ExperimentError> {
    let mut rows: Vec<Vec<String>> = vec![vec![
        "space".into(),
        "iter".into(),
        "mean_sdiff".into(),
        "stderr".into(),
    ]];
    let full = runs.iter().find(|(s, _)| *s == SearchSpace::Full);
    if let Some((_, full_records)) = full {
        for (space, records) in runs {
            if let SearchSpace::Pca(_) = space {
                let pairs: Vec<(&RunRecord, &RunRecord)> =
                    records.iter().zip(full_records.iter()).collect();
                let series = lbo::s_diff_mean(&pairs)?;
                for (i, (m, s)) in series.mean.iter().zip(&series.stderr).enumerate() {
                    rows.push(vec![
                        space.to_string(),
                        i.to_string(),
                        m.to_string(),
                        s.to_string(),
                    ]);
                }
            }
        }
    }
    write_csv_rows(path, &rows)
}

fn write_diagnostics_csv(
    path: &Path,
    runs: &[(SearchSpace, Vec<RunRecord>)],
    reports: &[(SearchSpace, Vec<ExplorationReport>)],
) -> Result<(), ExperimentError> {
    let mut rows: Vec<Vec<String>> = vec![vec![
        "space".into(),
        "run".into(),
        "m_best".into(),
        "hypervolume".into(),
        "hypervolume_se".into(),
        "hypervolume_normalized".into(),
        "clipped".into(),
        "score_variance".into(),
        "min_distance".into(),
        "path_length".into(),
        "acq_fallbacks".into(),
    ]];
    for ((space, records), (_, space_reports)) in runs.iter().zip(reports) {
        for (r, rep) in records.iter().zip(space_reports) {
            rows.push(vec![
                space.to_string(),
                r.run_index.to_string(),
                rep.best_score.to_string(),
                rep.hypervolume.to_string(),
                rep.hypervolume_se.map(|s| s.to_string()).unwrap_or_default(),
                rep.hypervolume_normalized.to_string(),
                rep.clipped.to_string(),
                rep.score_variance.to_string(),
                rep.min_distance.to_string(),
                rep.path_length.to_string(),
                r.acquisition_fallbacks.to_string(),
            ]);
        }
    }
    write_csv_rows(path, &rows)
}

fn write_csv_rows(path: &Path, rows: &[Vec<String>]) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    for row in rows {
        w.write_record(row)
            .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        reason: format!("flush failed: {e}"),
    })?;
    io::write_atomic(path, &bytes)?;
    Ok(())
}

fn distortion_summary(
    config: &ExperimentConfig,
    encoded: &[LatentPoint],
    pca: &PcaModel,
) -> Result<serde_json::Value, ExperimentError> {
    let high: Vec<Vec<f64>> = encoded.iter().map(|z| z.coords().to_vec()).collect();
    let size = config.distortion.size.min(high.len());
    let k = config.distortion.k;
    if size < 2 * k + 2 {
        return Ok(serde_json::json!({
            "skipped": format!("subsample size {size} too small for k = {k}")
        }));
    }
    let seed = derive_seed(config.seed, "distortion", 0);
    let mut per_space = BTreeMap::new();
    for space in &config.lbo.spaces {
        let n = match space {
            SearchSpace::Pca(n) => *n,
            SearchSpace::Full => continue,
        };
        let low: Vec<Vec<f64>> = encoded
            .iter()
            .map(|z| projection::project(pca, z, n))
            .collect::<Result<_, _>>()?;
        let mut metrics = BTreeMap::new();
        let tc = |h: &[Vec<f64>], l: &[Vec<f64>]| distortion::trust_continuity(h, l, k);
        let t = distortion::subsample_estimate(
            &high, &low, config.distortion.n_sub, size, seed,
            |h, l| tc(h, l).map(|(t, _)| t),
        )?;
        let c = distortion::subsample_estimate(
            &high, &low, config.distortion.n_sub, size, seed,
            |h, l| tc(h, l).map(|(_, c)| c),
        )?;
        let sc_params = ScParams { k, seed, ..ScParams::default() };
        let st = distortion::subsample_estimate(
            &high, &low, config.distortion.n_sub, size, seed,
            |h, l| distortion::steadiness_cohesiveness(h, l, &sc_params).map(|(s, _)| s),
        )?;
        let co = distortion::subsample_estimate(
            &high, &low, config.distortion.n_sub, size, seed,
            |h, l| distortion::steadiness_cohesiveness(h, l, &sc_params).map(|(_, c)| c),
        )?;
        for (name, stats) in
            [("trustworthiness", t), ("continuity", c), ("steadiness", st), ("cohesiveness", co)]
        {
            metrics.insert(
                name.to_string(),
                serde_json::json!({ "mean": stats.mean, "sd": stats.sd }),
            );
        }
        per_space.insert(space.to_string(), serde_json::json!(metrics));
    }
    Ok(serde_json::json!({
        "k": k,
        "n_sub": config.distortion.n_sub,
        "size": size,
        "spaces": per_space,
    }))
}

fn write_plot_scripts(
    out: &Path,
    config: &ExperimentConfig,
    runs: &[(SearchSpace, Vec<RunRecord>)],
    reports: &[(SearchSpace, Vec<ExplorationReport>)],
) -> Result<(), ExperimentError> {
    write_trace_plots(out, &config.lbo.spaces)?;
    write_metric_plots(out, runs, reports)
}

fn write_trace_plots(out: &Path, space_list: &[SearchSpace]) -> Result<(), ExperimentError> {
    let spaces: Vec<String> = space_list.iter().map(|s| s.to_string()).collect();
    let space_words = spaces.join(" ");

    let best = format!(
        "# Mean best-so-far objective per search space.\n\
         # Run from the artifact root: gnuplot plots/best_scores.plotscript\n\
         set datafile separator \",\"\n\
         set terminal pngcairo size 900,600\n\
         set output \"plots/best_scores.png\"\n\
         set key bottom right\n\
         set xlabel \"sample index\"\n\
         set ylabel \"mean best objective\"\n\
         spaces = \"{space_words}\"\n\
         plot for [s in spaces] \"summary.csv\" skip 1 \
         using 2:((strcol(1) eq s) ? column(3) : NaN):4 \
         with yerrorlines pointsize 0.2 title s\n"
    );
    io::write_atomic(&out.join("plots").join("best_scores.plotscript"), best.as_bytes())?;

    let sdiff = format!(
        "# Mean best-so-far difference of each PCA space against the full space.\n\
         # Run from the artifact root: gnuplot plots/sdiff.plotscript\n\
         set datafile separator \",\"\n\
         set terminal pngcairo size 900,600\n\
         set output \"plots/sdiff.png\"\n\
         set key top right\n\
         set xlabel \"sample index\"\n\
         set ylabel \"mean S_diff\"\n\
         set style fill transparent solid 0.2 noborder\n\
         spaces = \"{pca_spaces}\"\n\
         plot 0 with lines dashtype 2 linecolor \"gray\" notitle, \\\n     \
         for [s in spaces] \"sdiff.csv\" skip 1 \
         using 2:((strcol(1) eq s) ? column(3) : NaN):4 \
         with yerrorlines pointsize 0.2 title s\n",
        pca_spaces = spaces.iter().filter(|s| s.starts_with("pca")).cloned().collect::<Vec<_>>().join(" ")
    );
    io::write_atomic(&out.join("plots").join("sdiff.plotscript"), sdiff.as_bytes())?;
    Ok(())
}

fn write_metric_plots(
    out: &Path,
    runs: &[(SearchSpace, Vec<RunRecord>)],
    reports: &[(SearchSpace, Vec<ExplorationReport>)],
) -> Result<(), ExperimentError> {
    // Histogram bin widths from the data.
    let metric_cols = [
        ("hypervolume_normalized", 6usize),
        ("score_variance", 8),
        ("min_distance", 9),
        ("path_length", 10),
    ];
    let mut widths = Vec::new();
    for (name, _) in metric_cols {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (_, space_reports) in reports {
            for rep in space_reports {
                let v = match name {
                    "hypervolume_normalized" => rep.hypervolume_normalized,
                    "score_variance" => rep.score_variance,
                    "min_distance" => rep.min_distance,
                    _ => rep.path_length,
                };
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let w = if hi > lo { (hi - lo) / 10.0 } else { 1.0 };
        widths.push(w);
    }
    let mut hist = String::from(
        "# Exploration metric histograms: full space vs PCA spaces.\n\
         # Run from the artifact root: gnuplot plots/exploration_hist.plotscript\n\
         set datafile separator \",\"\n\
         set terminal pngcairo size 1200,900\n\
         set output \"plots/exploration_hist.png\"\n\
         set style fill transparent solid 0.5 border\n\
         bin(x,w) = w*floor(x/w) + w/2.0\n\
         set multiplot layout 2,2\n",
    );
    for ((name, col), width) in metric_cols.iter().zip(&widths) {
        hist.push_str(&format!(
            "set title \"{name}\"\n\
             set boxwidth {width}\n\
             plot \"diagnostics.csv\" skip 1 \
             using (strcol(1) eq \"full\" ? bin(column({col}+1),{width}) : NaN):(1.0) \
             smooth freq with boxes title \"full\", \\\n     \
             \"diagnostics.csv\" skip 1 \
             using (strcol(1) ne \"full\" ? bin(column({col}+1),{width}) : NaN):(1.0) \
             smooth freq with boxes title \"pca\"\n"
        ));
    }
    hist.push_str("unset multiplot\n");
    io::write_atomic(&out.join("plots").join("exploration_hist.plotscript"), hist.as_bytes())?;

    // Scatter plots of best score against each exploration metric, with
    // per-group regression lines computed here.
    let mut corr = String::from(
        "# Best score against exploration metrics, split full vs PCA.\n\
         # Run from the artifact root: gnuplot plots/correlations.plotscript\n\
         set datafile separator \",\"\n\
         set terminal pngcairo size 1200,900\n\
         set output \"plots/correlations.png\"\n\
         set multiplot layout 2,2\n\
         set ylabel \"best objective\"\n",
    );
    for (panel, (name, col)) in metric_cols.iter().enumerate() {
        for group in ["full", "pca"] {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for ((space, _), (_, space_reports)) in runs.iter().zip(reports) {
                let is_full = *space == SearchSpace::Full;
                if (group == "full") != is_full {
                    continue;
                }
                for rep in space_reports.iter() {
                    let v = match *name {
                        "hypervolume_normalized" => rep.hypervolume_normalized,
                        "score_variance" => rep.score_variance,
                        "min_distance" => rep.min_distance,
                        _ => rep.path_length,
                    };
                    xs.push(v);
                    ys.push(rep.best_score);
                }
            }
            if xs.len() >= 3 {
                if let Ok((r, p)) = diagnostics::pearson_r(&xs, &ys) {
                    let (slope, intercept) = least_squares(&xs, &ys);
                    corr.push_str(&format!(
                        "{group}_{panel}(x) = {slope} * x + {intercept}  # r = {r:.3}, p = {p:.3e}\n"
                    ));
                }
            }
        }
        corr.push_str(&format!(
            "set title \"{name}\"\nset xlabel \"{name}\"\n\
             plot \"diagnostics.csv\" skip 1 \
             using (strcol(1) eq \"full\" ? column({col}+1) : NaN):3 title \"full\", \\\n     \
             \"diagnostics.csv\" skip 1 \
             using (strcol(1) ne \"full\" ? column({col}+1) : NaN):3 title \"pca\""
        ));
        for group in ["full", "pca"] {
            corr.push_str(&format!(", \\\n     {group}_{panel}(x) with lines title \"{group} fit\""));
        }
        corr.push('\n');
    }
    corr.push_str("unset multiplot\n");
    io::write_atomic(&out.join("plots").join("correlations.plotscript"), corr.as_bytes())?;
    Ok(())
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        (0.0, my)
    } else {
        (sxy / sxx, my - sxy / sxx * mx)
    }
}
