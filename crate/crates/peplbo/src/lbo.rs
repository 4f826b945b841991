//! Latent Bayesian optimization over the full latent space or a PCA
//! subspace.
//!
//! Each iteration refits the GP surrogate on all observations, maximizes
//! LogEI inside the search box, maps the winning point back to the full
//! latent space (inverse projection in the PCA case), decodes it to a pool
//! sequence and scores it with the objective. Runs are seeded end to end
//! and bit-reproducible; independent runs execute in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::acquisition::{maximize_acquisition, SearchBox};
use crate::gp::{self, GpConfig, Hyperparameters};
use crate::latent::{LatentError, LatentPoint, ReferenceLatentModel};
use crate::oracle::{OracleError, SequenceObjective};
use crate::peptides::Sequence;
use crate::projection::{self, PcaModel, ProjectionError};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Error)]
pub enum LboError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("run records have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid subset sizes: {0}")]
    BadSizes(String),
    #[error(transparent)]
    Latent(#[from] LatentError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Gp(#[from] gp::GpError),
    #[error(transparent)]
    Objective(#[from] OracleError),
}

/// Search space for a run: the full latent space or its top-n PCA subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SearchSpace {
    Full,
    Pca(usize),
}

/// PCA component counts swept in the reference protocol.
pub const DEFAULT_PCA_COMPONENTS: [usize; 5] = [2, 5, 10, 20, 32];

impl fmt::Display for SearchSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchSpace::Full => write!(f, "full"),
            SearchSpace::Pca(n) => write!(f, "pca{n}"),
        }
    }
}

impl FromStr for SearchSpace {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("full") {
            return Ok(SearchSpace::Full);
        }
        if let Some(n) = s.strip_prefix("pca") {
            let n: usize = n.parse().map_err(|_| format!("bad search space '{s}'"))?;
            if n == 0 {
                return Err("pca component count must be >= 1".into());
            }
            return Ok(SearchSpace::Pca(n));
        }
        Err(format!("bad search space '{s}' (expected 'full' or 'pcaN')"))
    }
}

impl TryFrom<String> for SearchSpace {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SearchSpace> for String {
    fn from(s: SearchSpace) -> String {
        s.to_string()
    }
}

/// Configuration of one optimization experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LboConfig {
    pub iterations: usize,
    pub n_init: usize,
    pub n_runs: usize,
    pub space: SearchSpace,
    pub box_lo: f64,
    pub box_hi: f64,
    pub seed: u64,
    /// GP hyperparameter restarts on the first fit of a run.
    pub gp_restarts: usize,
    /// Ascent iterations for the first hyperparameter fit.
    pub gp_opt_iters: usize,
    /// Ascent iterations for warm-started refits.
    pub gp_warm_iters: usize,
    /// Refit hyperparameters every k-th iteration (1 = every iteration);
    /// other iterations refactorize with the previous hyperparameters.
    pub gp_refit_every: usize,
    /// Acquisition restarts per iteration.
    pub acq_restarts: usize,
}

impl Default for LboConfig {
    fn default() -> Self {
        LboConfig {
            iterations: 500,
            n_init: 100,
            n_runs: 5,
            space: SearchSpace::Full,
            box_lo: -10.0,
            box_hi: 10.0,
            seed: 0,
            gp_restarts: 8,
            gp_opt_iters: 40,
            gp_warm_iters: 6,
            gp_refit_every: 1,
            acq_restarts: 8,
        }
    }
}

impl LboConfig {
    fn validate(&self, model: &ReferenceLatentModel, pca: Option<&PcaModel>) -> Result<usize, LboError> {
        if self.iterations < 1 && self.n_init < 1 {
            return Err(LboError::BadConfig("need n_init >= 1".into()));
        }
        if self.n_init < 1 {
            return Err(LboError::BadConfig("need n_init >= 1".into()));
        }
        if self.n_init > model.pool().len() {
            return Err(LboError::BadConfig(format!(
                "n_init {} exceeds pool size {}",
                self.n_init,
                model.pool().len()
            )));
        }
        if !(self.box_lo < self.box_hi) {
            return Err(LboError::BadConfig("box_lo must be < box_hi".into()));
        }
        match (self.space, pca) {
            (SearchSpace::Full, None) => Ok(model.dim()),
            (SearchSpace::Full, Some(_)) => {
                Err(LboError::BadConfig("full-space run takes no PCA model".into()))
            }
            (SearchSpace::Pca(_), None) => {
                Err(LboError::BadConfig("PCA-space run requires a PCA model".into()))
            }
            (SearchSpace::Pca(n), Some(p)) => {
                if p.dim() != model.dim() {
                    return Err(LboError::BadConfig(format!(
                        "PCA dimension {} does not match latent dimension {}",
                        p.dim(),
                        model.dim()
                    )));
                }
                if n < 1 || n > model.dim() {
                    return Err(LboError::BadConfig(format!(
                        "component count {n} outside 1..={}",
                        model.dim()
                    )));
                }
                Ok(n)
            }
        }
    }
}

/// One scored sample: where it sits in the search space, in the full
/// latent space, and what it decoded to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub index: usize,
    pub coords: Vec<f64>,
    pub latent: Vec<f64>,
    pub sequence: Sequence,
    pub score: f64,
    pub best: f64,
}

/// Ordered log of one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub space: SearchSpace,
    pub run_index: usize,
    pub seed: u64,
    pub n_init: usize,
    pub entries: Vec<RunEntry>,
    pub acquisition_fallbacks: usize,
    /// Set when an iteration failed and the record is partial.
    pub aborted: Option<String>,
}

impl RunRecord {
    /// Best-so-far trace over all entries (non-decreasing).
    pub fn best_trace(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.best).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.score).collect()
    }

    pub fn final_best(&self) -> f64 {
        self.entries.last().map(|e| e.best).expect("record has entries")
    }

    /// Best score among the initialization entries.
    pub fn init_best(&self) -> f64 {
        self.entries[..self.n_init]
            .iter()
            .map(|e| e.score)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The entry holding the best score.
    pub fn best_entry(&self) -> &RunEntry {
        let mut best = &self.entries[0];
        for e in &self.entries {
            if e.score > best.score {
                best = e;
            }
        }
        best
    }
}

/// Initialization sample: pool sequences encoded, projected and scored.
pub type InitSample = RunEntry;

/// Draw the seeded initial dataset for one run.
///
/// Pool sequences are sampled uniformly without replacement; the same
/// `(config.seed, run_index)` pair yields the same sequences in every
/// search space, so experiments share their 5 x n_init initializations.
/// Scores go through the full decode(encode(s)) pipeline.
pub fn init_run(
    config: &LboConfig,
    run_index: usize,
    objective: &dyn SequenceObjective,
    model: &ReferenceLatentModel,
    pca: Option<&PcaModel>,
) -> Result<Vec<InitSample>, LboError> {
    let k = config.validate(model, pca)?;
    let pool = model.pool();
    let mut order: Vec<usize> = (0..pool.len()).collect();
    let mut rng = rng_from_seed(derive_seed(config.seed, "init", run_index as u64));
    for i in (1..order.len()).rev() {
        let j = rand::Rng::gen_range(&mut rng, 0..=i);
        order.swap(i, j);
    }
    let mut samples = Vec::with_capacity(config.n_init);
    let mut best = f64::NEG_INFINITY;
    for (index, &pi) in order[..config.n_init].iter().enumerate() {
        let latent = model.encode(&pool[pi]);
        let coords = match config.space {
            SearchSpace::Full => latent.coords().to_vec(),
            SearchSpace::Pca(n) => projection::project(pca.unwrap(), &latent, n)?,
        };
        debug_assert_eq!(coords.len(), k);
        let decoded = model.decode(&latent)?;
        let score = objective.score(&decoded)?;
        best = best.max(score);
        samples.push(RunEntry {
            index,
            coords,
            latent: latent.coords().to_vec(),
            sequence: decoded,
            score,
            best,
        });
    }
    Ok(samples)
}

/// Nested initialization subsets: each subset contains the best entry of
/// the full set, each smaller subset is contained in the next larger one,
/// and the remainder is drawn without replacement, seeded.
pub fn nested_init_subsets(
    init: &[InitSample],
    sizes: &[usize],
    seed: u64,
) -> Result<Vec<Vec<InitSample>>, LboError> {
    if sizes.is_empty() {
        return Err(LboError::BadSizes("empty size list".into()));
    }
    for w in sizes.windows(2) {
        if w[0] >= w[1] {
            return Err(LboError::BadSizes(format!(
                "sizes must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if sizes[0] == 0 {
        return Err(LboError::BadSizes("size 0 is not allowed".into()));
    }
    if *sizes.last().unwrap() > init.len() {
        return Err(LboError::BadSizes(format!(
            "largest size {} exceeds initialization size {}",
            sizes.last().unwrap(),
            init.len()
        )));
    }

    let mut best = 0usize;
    for (i, s) in init.iter().enumerate() {
        if s.score > init[best].score {
            best = i;
        }
    }
    let mut rest: Vec<usize> = (0..init.len()).filter(|&i| i != best).collect();
    let mut rng = rng_from_seed(derive_seed(seed, "nested-init", 0));
    for i in (1..rest.len()).rev() {
        let j = rand::Rng::gen_range(&mut rng, 0..=i);
        rest.swap(i, j);
    }
    let ordering: Vec<usize> = std::iter::once(best).chain(rest).collect();
    Ok(sizes
        .iter()
        .map(|&s| ordering[..s].iter().map(|&i| init[i].clone()).collect())
        .collect())
}

/// Execute one optimization run.
pub fn run(
    config: &LboConfig,
    run_index: usize,
    objective: &dyn SequenceObjective,
    model: &ReferenceLatentModel,
    pca: Option<&PcaModel>,
) -> Result<RunRecord, LboError> {
    let init = init_run(config, run_index, objective, model, pca)?;
    run_from_init(config, run_index, init, objective, model, pca)
}

/// Execute one run from a pre-built initial dataset (used by the nested
/// initialization protocol).
pub fn run_from_init(
    config: &LboConfig,
    run_index: usize,
    init: Vec<InitSample>,
    objective: &dyn SequenceObjective,
    model: &ReferenceLatentModel,
    pca: Option<&PcaModel>,
) -> Result<RunRecord, LboError> {
    let k = config.validate(model, pca)?;
    let run_seed = derive_seed(config.seed, "run", run_index as u64);
    let search_box = SearchBox::cube(k, config.box_lo, config.box_hi)
        .map_err(|e| LboError::BadConfig(e.to_string()))?;

    let n_init = init.len();
    let mut record = RunRecord {
        space: config.space,
        run_index,
        seed: run_seed,
        n_init,
        entries: init,
        acquisition_fallbacks: 0,
        aborted: None,
    };
    let mut observations_x: Vec<Vec<f64>> =
        record.entries.iter().map(|e| e.coords.clone()).collect();
    let mut observations_y: Vec<f64> = record.entries.iter().map(|e| e.score).collect();
    let mut best = record.entries.last().map(|e| e.best).unwrap_or(f64::NEG_INFINITY);
    let mut warm: Option<Hyperparameters> = None;

    for iter in 0..config.iterations {
        let refit = iter % config.gp_refit_every.max(1) == 0 || warm.is_none();
        let surrogate = if refit {
            let gp_config = GpConfig {
                restarts: if iter == 0 { config.gp_restarts } else { 1 },
                max_opt_iters: if iter == 0 { config.gp_opt_iters } else { config.gp_warm_iters },
                seed: derive_seed(run_seed, "gp", iter as u64),
                warm_start: warm.clone(),
                ..GpConfig::default()
            };
            gp::fit(&observations_x, &observations_y, &search_box, &gp_config)
        } else {
            gp::with_hyperparameters(
                &observations_x,
                &observations_y,
                &search_box,
                warm.clone().expect("warm set after first fit"),
            )
        };
        let surrogate = match surrogate {
            Ok(s) => s,
            Err(e) => {
                record.aborted = Some(format!("iteration {iter}: {e}"));
                return Ok(record);
            }
        };
        warm = Some(surrogate.hyperparameters().clone());

        let acq = maximize_acquisition(
            &surrogate,
            &search_box,
            config.acq_restarts,
            derive_seed(run_seed, "acq", iter as u64),
        );
        if acq.fallback {
            record.acquisition_fallbacks += 1;
        }
        let coords = acq.point;

        let latent = match config.space {
            SearchSpace::Full => LatentPoint::new(coords.clone()),
            SearchSpace::Pca(_) => match projection::inverse_project(pca.unwrap(), &coords) {
                Ok(z) => z,
                Err(e) => {
                    record.aborted = Some(format!("iteration {iter}: {e}"));
                    return Ok(record);
                }
            },
        };
        let sequence = match model.decode(&latent) {
            Ok(s) => s,
            Err(e) => {
                record.aborted = Some(format!("iteration {iter}: {e}"));
                return Ok(record);
            }
        };
        let score = match objective.score(&sequence) {
            Ok(v) => v,
            Err(e) => {
                record.aborted = Some(format!("iteration {iter}: {e}"));
                return Ok(record);
            }
        };
        best = best.max(score);
        observations_x.push(coords.clone());
        observations_y.push(score);
        record.entries.push(RunEntry {
            index: n_init + iter,
            coords,
            latent: latent.coords().to_vec(),
            sequence,
            score,
            best,
        });
    }
    Ok(record)
}

/// Execute `config.n_runs` independent runs (in parallel).
pub fn run_all(
    config: &LboConfig,
    objective: &(dyn SequenceObjective + Sync),
    model: &ReferenceLatentModel,
    pca: Option<&PcaModel>,
) -> Result<Vec<RunRecord>, LboError> {
    (0..config.n_runs)
        .into_par_iter()
        .map(|j| run(config, j, objective, model, pca))
        .collect()
}

/// Per-iteration difference of best-so-far scores: projected-space run
/// minus full-space run.
pub fn s_diff(run_pca: &RunRecord, run_full: &RunRecord) -> Result<Vec<f64>, LboError> {
    if run_pca.entries.len() != run_full.entries.len() {
        return Err(LboError::LengthMismatch(run_pca.entries.len(), run_full.entries.len()));
    }
    Ok(run_pca
        .best_trace()
        .iter()
        .zip(run_full.best_trace())
        .map(|(a, b)| a - b)
        .collect())
}

/// Mean and standard error of an S_diff series over run pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SDiffSeries {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_pairs: usize,
}

/// Average S_diff over paired runs (pairing by run index).
pub fn s_diff_mean(pairs: &[(&RunRecord, &RunRecord)]) -> Result<SDiffSeries, LboError> {
    assert!(!pairs.is_empty(), "need at least one run pair");
    let series: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(p, f)| s_diff(p, f))
        .collect::<Result<_, _>>()?;
    let len = series[0].len();
    for s in &series {
        if s.len() != len {
            return Err(LboError::LengthMismatch(s.len(), len));
        }
    }
    let n = series.len() as f64;
    let mut mean = vec![0.0; len];
    for s in &series {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut stderr = vec![0.0; len];
    if series.len() > 1 {
        for s in &series {
            for ((e, v), m) in stderr.iter_mut().zip(s).zip(&mean) {
                *e += (v - m) * (v - m);
            }
        }
        for e in &mut stderr {
            *e = (*e / (n - 1.0)).sqrt() / n.sqrt();
        }
    }
    Ok(SDiffSeries { mean, stderr, n_pairs: series.len() })
}

/// Mean best-so-far trace with standard errors over a set of runs.
pub fn mean_best_trace(runs: &[RunRecord]) -> Result<(Vec<f64>, Vec<f64>), LboError> {
    assert!(!runs.is_empty(), "need at least one run");
    let len = runs[0].entries.len();
    for r in runs {
        if r.entries.len() != len {
            return Err(LboError::LengthMismatch(r.entries.len(), len));
        }
    }
    let n = runs.len() as f64;
    let mut mean = vec![0.0; len];
    for r in runs {
        for (m, e) in mean.iter_mut().zip(&r.entries) {
            *m += e.best;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut stderr = vec![0.0; len];
    if runs.len() > 1 {
        for r in runs {
            for ((s, e), m) in stderr.iter_mut().zip(&r.entries).zip(&mean) {
                *s += (e.best - m) * (e.best - m);
            }
        }
        for s in &mut stderr {
            *s = (*s / (n - 1.0)).sqrt() / n.sqrt();
        }
    }
    Ok((mean, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::fit_reference_model;
    use crate::peptides::random_pool;
    use crate::projection::fit_pca;

    /// Objective defined directly over latent coordinates: a negated
    /// quadratic centered near the pool's best region.
    struct LatentQuadratic<'a> {
        model: &'a ReferenceLatentModel,
        center: [f64; 2],
    }

    impl SequenceObjective for LatentQuadratic<'_> {
        fn score(&self, seq: &Sequence) -> Result<f64, OracleError> {
            let z = self.model.encode(seq);
            let dx = z.coords()[0] - self.center[0];
            let dy = z.coords()[1] - self.center[1];
            Ok(-(dx * dx + dy * dy))
        }
    }

    fn toy_setup(pool_size: usize) -> ReferenceLatentModel {
        let pool = random_pool(71, pool_size, 5, 25);
        fit_reference_model(&pool, 2, &["charge_ph7.2".to_string()], 0.8, 17).unwrap()
    }

    fn quick_config(space: SearchSpace, iterations: usize, n_init: usize) -> LboConfig {
        LboConfig {
            iterations,
            n_init,
            n_runs: 2,
            space,
            seed: 5,
            gp_restarts: 4,
            gp_opt_iters: 20,
            gp_warm_iters: 4,
            gp_refit_every: 2,
            acq_restarts: 3,
            ..LboConfig::default()
        }
    }

    #[test]
    fn zero_iterations_returns_initialization() {
        let model = toy_setup(40);
        let objective = LatentQuadratic { model: &model, center: [0.0, 0.0] };
        let config = quick_config(SearchSpace::Full, 0, 10);
        let record = run(&config, 0, &objective, &model, None).unwrap();
        assert_eq!(record.entries.len(), 10);
        let max_init = record.entries.iter().map(|e| e.score).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(record.final_best(), max_init);
    }

    #[test]
    fn single_init_point_is_the_designated_seed_point() {
        let model = toy_setup(40);
        let objective = LatentQuadratic { model: &model, center: [0.0, 0.0] };
        let config = quick_config(SearchSpace::Full, 0, 1);
        let init = init_run(&config, 0, &objective, &model, None).unwrap();
        assert_eq!(init.len(), 1);
        // The same draw must come back for a different space.
        let pca = fit_pca(
            &model.pool().iter().map(|s| model.encode(s)).collect::<Vec<_>>(),
        )
        .unwrap();
        let config2 = quick_config(SearchSpace::Pca(1), 0, 1);
        let init2 = init_run(&config2, 0, &objective, &model, Some(&pca)).unwrap();
        assert_eq!(init[0].sequence, init2[0].sequence);
    }

    #[test]
    fn initializations_are_shared_across_spaces_and_scored_through_pipeline() {
        let model = toy_setup(60);
        let objective = LatentQuadratic { model: &model, center: [0.0, 0.0] };
        let points: Vec<_> = model.pool().iter().map(|s| model.encode(s)).collect();
        let pca = fit_pca(&points).unwrap();

        let cfg_full = quick_config(SearchSpace::Full, 0, 12);
        let cfg_pca = quick_config(SearchSpace::Pca(2), 0, 12);
        let init_full = init_run(&cfg_full, 1, &objective, &model, None).unwrap();
        let init_pca = init_run(&cfg_pca, 1, &objective, &model, Some(&pca)).unwrap();
        for (a, b) in init_full.iter().zip(&init_pca) {
            assert_eq!(a.sequence, b.sequence);
            assert_eq!(a.score, b.score);
            // Scores recompute through decode(encode(s)).
            let z = model.encode(&a.sequence);
            let rt = model.decode(&z).unwrap();
            assert_eq!(a.score, objective.score(&rt).unwrap());
        }
    }

    #[test]
    fn toy_objective_reaches_analytic_optimum() {
        let model = toy_setup(150);
        // Center the quadratic on an actual pool embedding so the optimum
        // is attainable.
        let target = model.pool_embeddings()[17].clone();
        let objective =
            LatentQuadratic { model: &model, center: [target[0], target[1]] };
        // Analytic optimum over the reachable set: best pool embedding.
        let true_max = model
            .pool()
            .iter()
            .map(|s| objective.score(s).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let config = quick_config(SearchSpace::Full, 30, 10);
        let record = run(&config, 0, &objective, &model, None).unwrap();
        assert!(record.aborted.is_none());
        assert!(
            record.final_best() >= true_max - 0.05,
            "best {} vs analytic max {true_max}",
            record.final_best()
        );
    }

    #[test]
    fn best_trace_is_nondecreasing_and_entry_count_matches() {
        let model = toy_setup(80);
        let objective = LatentQuadratic { model: &model, center: [1.0, -1.0] };
        let config = quick_config(SearchSpace::Full, 12, 8);
        let record = run(&config, 0, &objective, &model, None).unwrap();
        assert_eq!(record.entries.len(), 8 + 12);
        for w in record.best_trace().windows(2) {
            assert!(w[1] >= w[0]);
        }
        for (i, e) in record.entries.iter().enumerate() {
            assert_eq!(e.index, i);
        }
    }

    #[test]
    fn queried_points_stay_in_box_and_on_subspace() {
        let model = toy_setup(80);
        let objective = LatentQuadratic { model: &model, center: [0.0, 0.0] };
        let points: Vec<_> = model.pool().iter().map(|s| model.encode(s)).collect();
        let pca = fit_pca(&points).unwrap();
        let config = quick_config(SearchSpace::Pca(1), 10, 8);
        let record = run(&config, 0, &objective, &model, Some(&pca)).unwrap();
        assert!(record.aborted.is_none());
        for e in &record.entries[record.n_init..] {
            assert!(e.coords.iter().all(|c| (-10.0..=10.0).contains(c)));
            // Latent point minus mean must be orthogonal to unused
            // components.
            let centered: Vec<f64> = e
                .latent
                .iter()
                .zip(pca.mean())
                .map(|(a, b)| a - b)
                .collect();
            let comp = pca.component(1);
            let dot: f64 = comp.iter().zip(&centered).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-8, "subspace residual {dot}");
        }
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let model = toy_setup(60);
        let objective = LatentQuadratic { model: &model, center: [0.5, 0.5] };
        let config = quick_config(SearchSpace::Full, 8, 6);
        let a = run(&config, 3, &objective, &model, None).unwrap();
        let b = run(&config, 3, &objective, &model, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation_rejects_mismatches() {
        let model = toy_setup(40);
        let objective = LatentQuadratic { model: &model, center: [0.0, 0.0] };
        let points: Vec<_> = model.pool().iter().map(|s| model.encode(s)).collect();
        let pca = fit_pca(&points).unwrap();
        let config = quick_config(SearchSpace::Pca(3), 2, 4);
        assert!(matches!(
            run(&config, 0, &objective, &model, Some(&pca)),
            Err(LboError::BadConfig(_))
        ));
        let config = quick_config(SearchSpace::Full, 2, 4);
        assert!(matches!(
            run(&config, 0, &objective, &model, Some(&pca)),
            Err(LboError::BadConfig(_))
        ));
        let config = quick_config(SearchSpace::Pca(1), 2, 4);
        assert!(matches!(
            run(&config, 0, &objective, &model, None),
            Err(LboError::BadConfig(_))
        ));
    }

    #[test]
    fn nested_subsets_form_a_chain_containing_the_best() {
        let model = toy_setup(120);
        let objective = LatentQuadratic { model: &model, center: [0.0, 0.0] };
        let config = quick_config(SearchSpace::Full, 0, 100);
        let init = init_run(&config, 0, &objective, &model, None).unwrap();
        let sizes = [1usize, 10, 20, 50, 100];
        let subsets = nested_init_subsets(&init, &sizes, 9).unwrap();
        assert_eq!(subsets.len(), 5);
        let best = init
            .iter()
            .map(|e| e.score)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(subsets[0].len(), 1);
        assert_eq!(subsets[0][0].score, best);
        for (k, s) in subsets.iter().enumerate() {
            assert_eq!(s.len(), sizes[k]);
            assert!(s.iter().any(|e| e.score == best));
        }
        for k in 0..4 {
            let small: std::collections::HashSet<String> =
                subsets[k].iter().map(|e| e.sequence.to_string()).collect();
            let large: std::collections::HashSet<String> =
                subsets[k + 1].iter().map(|e| e.sequence.to_string()).collect();
            assert!(small.is_subset(&large));
        }
        // Different seeds still draw from the initialization set only.
        let all: std::collections::HashSet<String> =
            init.iter().map(|e| e.sequence.to_string()).collect();
        for seed in 0..5 {
            let subs = nested_init_subsets(&init, &[1, 10], seed).unwrap();
            for e in &subs[1] {
                assert!(all.contains(&e.sequence.to_string()));
            }
        }
    }

    #[test]
    fn nested_subsets_reject_bad_sizes() {
        let model = toy_setup(40);
        let objective = LatentQuadratic { model: &model, center: [0.0, 0.0] };
        let config = quick_config(SearchSpace::Full, 0, 10);
        let init = init_run(&config, 0, &objective, &model, None).unwrap();
        assert!(matches!(nested_init_subsets(&init, &[], 0), Err(LboError::BadSizes(_))));
        assert!(matches!(nested_init_subsets(&init, &[5, 5], 0), Err(LboError::BadSizes(_))));
        assert!(matches!(nested_init_subsets(&init, &[0, 5], 0), Err(LboError::BadSizes(_))));
        assert!(matches!(nested_init_subsets(&init, &[5, 11], 0), Err(LboError::BadSizes(_))));
    }

    fn synthetic_record(best_trace: &[f64]) -> RunRecord {
        let seq = crate::peptides::parse_sequence("GIGK").unwrap();
        RunRecord {
            space: SearchSpace::Full,
            run_index: 0,
            seed: 0,
            n_init: 1,
            entries: best_trace
                .iter()
                .enumerate()
                .map(|(i, &b)| RunEntry {
                    index: i,
                    coords: vec![0.0],
                    latent: vec![0.0],
                    sequence: seq.clone(),
                    score: b,
                    best: b,
                })
                .collect(),
            acquisition_fallbacks: 0,
            aborted: None,
        }
    }

    #[test]
    fn s_diff_of_identical_runs_is_zero() {
        let a = synthetic_record(&[0.1, 0.3, 0.5]);
        let d = s_diff(&a, &a).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn s_diff_final_value_reproduces_reference_gap() {
        // Final best-so-far pair 0.896 vs 0.719 gives a gap of ~0.177.
        let pca_run = synthetic_record(&[0.2, 0.6, 0.896]);
        let full_run = synthetic_record(&[0.3, 0.5, 0.719]);
        let d = s_diff(&pca_run, &full_run).unwrap();
        assert!((d[2] - 0.177).abs() < 1e-12);
    }

    #[test]
    fn s_diff_is_antisymmetric_and_checks_lengths() {
        let a = synthetic_record(&[0.1, 0.4, 0.9]);
        let b = synthetic_record(&[0.0, 0.2, 0.3]);
        let ab = s_diff(&a, &b).unwrap();
        let ba = s_diff(&b, &a).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            assert_eq!(*x, -*y);
        }
        let short = synthetic_record(&[0.1]);
        assert!(matches!(s_diff(&a, &short), Err(LboError::LengthMismatch(3, 1))));
    }

    #[test]
    fn aggregated_trace_matches_direct_mean() {
        let runs = vec![
            synthetic_record(&[0.0, 0.5, 1.0]),
            synthetic_record(&[0.2, 0.3, 0.4]),
        ];
        let (mean, stderr) = mean_best_trace(&runs).unwrap();
        assert_eq!(mean, vec![0.1, 0.4, 0.7]);
        assert!(stderr.iter().all(|&s| s >= 0.0));
        let pairs = vec![(&runs[0], &runs[1])];
        let sd = s_diff_mean(&pairs).unwrap();
        assert_eq!(sd.mean, vec![-0.2, 0.2, 0.6]);
        assert_eq!(sd.n_pairs, 1);
    }
}
