// Temporary calibration probe for the reference protocol (removed later).
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use peplbo::diagnostics;
use peplbo::latent::{fit_reference_model, LatentPoint};
use peplbo::lbo::{self, InitSample, LboConfig, SearchSpace};
use peplbo::oracle::{ClosedFormOracle, OracleError, SequenceObjective};
use peplbo::peptides::{boman_index, random_pool, Sequence};
use peplbo::projection::{fit_pca, project, top_correlated_pcs};

/// Closed-form oracle variant with an extra descriptor component.
struct OracleV2;

impl SequenceObjective for OracleV2 {
    fn score(&self, seq: &Sequence) -> Result<f64, OracleError> {
        let base = ClosedFormOracle.score(seq)?;
        Ok(base + 0.25 * (1.5 * boman_index(seq)).sin())
    }
}

fn welch(a: &[f64], b: &[f64]) -> (f64, f64) {
    diagnostics::two_sample_ttest(a, b).unwrap()
}

fn main() {
    let which_oracle = std::env::args().nth(1).unwrap_or_else(|| "v1".into());
    let restricted = std::env::args().nth(2).unwrap_or_else(|| "restricted".into()) == "restricted";
    let oracle: Box<dyn SequenceObjective> = match which_oracle.as_str() {
        "v2" => Box::new(OracleV2),
        _ => Box::new(ClosedFormOracle),
    };
    let t0 = Instant::now();
    let pool = random_pool(77, 2000, 6, 30);
    let organizing: Vec<String> =
        ["boman", "charge_ph7.2", "hydrophobicity"].iter().map(|s| s.to_string()).collect();

    let scores: Vec<f64> = pool.iter().map(|s| oracle.score(s).unwrap()).collect();
    let mut sorted = scores.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let q90 = sorted[(n as f64 * 0.9) as usize];
    println!(
        "oracle {which_oracle} restricted={restricted} pool M: median {:.3} p90 {:.3} p99 {:.3} max {:.3}",
        sorted[n / 2],
        q90,
        sorted[(n as f64 * 0.99) as usize],
        sorted[n - 1]
    );
    // Init candidates: below the 90th percentile.
    let candidates: Vec<usize> = (0..n).filter(|&i| scores[i] < q90).collect();

    let mut full_paths = Vec::new();
    let mut pca2_paths = Vec::new();
    let mut pca5_paths = Vec::new();
    let mut all_var = Vec::new();
    let mut all_best = Vec::new();
    let mut min_improvement = f64::INFINITY;

    for lambda in [1.0, 0.1] {
        let model = fit_reference_model(&pool, 16, &organizing, lambda, 21).unwrap();
        let encoded: Vec<LatentPoint> = pool.iter().map(|s| model.encode(s)).collect();
        let pca = fit_pca(&encoded).unwrap();
        let top = top_correlated_pcs(&pca, &encoded, &scores).unwrap();
        let (pc_a, pc_b) = (top.first.0, top.second.0);
        println!(
            "lambda {lambda}: plane pc{pc_a} (r={:.3}) pc{pc_b} (r={:.3})",
            top.first.1, top.second.1
        );

        for space in [SearchSpace::Full, SearchSpace::Pca(2), SearchSpace::Pca(5)] {
            let config = LboConfig {
                iterations: 150,
                n_init: 100,
                n_runs: 5,
                space,
                seed: 33,
                gp_restarts: 8,
                gp_opt_iters: 30,
                gp_warm_iters: 5,
                gp_refit_every: 3,
                acq_restarts: 2,
                ..LboConfig::default()
            };
            let pca_arg = match space {
                SearchSpace::Full => None,
                SearchSpace::Pca(_) => Some(&pca),
            };
            let t2 = Instant::now();
            let records: Vec<_> = (0..config.n_runs)
                .map(|j| {
                    if restricted {
                        // Seeded draw of n_init candidates (same across spaces).
                        let mut order = candidates.clone();
                        let mut rng = ChaCha8Rng::seed_from_u64(1000 + j as u64);
                        for i in (1..order.len()).rev() {
                            let k = rng.gen_range(0..=i);
                            order.swap(i, k);
                        }
                        let mut best = f64::NEG_INFINITY;
                        let init: Vec<InitSample> = order[..config.n_init]
                            .iter()
                            .enumerate()
                            .map(|(index, &pi)| {
                                let latent = model.encode(&pool[pi]);
                                let coords = match space {
                                    SearchSpace::Full => latent.coords().to_vec(),
                                    SearchSpace::Pca(nn) => project(&pca, &latent, nn).unwrap(),
                                };
                                let score = scores[pi];
                                best = best.max(score);
                                InitSample {
                                    index,
                                    coords,
                                    latent: latent.coords().to_vec(),
                                    sequence: pool[pi].clone(),
                                    score,
                                    best,
                                }
                            })
                            .collect();
                        lbo::run_from_init(&config, j, init, oracle.as_ref(), &model, pca_arg)
                            .unwrap()
                    } else {
                        lbo::run(&config, j, oracle.as_ref(), &model, pca_arg).unwrap()
                    }
                })
                .collect();
            let dt = t2.elapsed() / config.n_runs as u32;
            let plane = |latent: &[f64]| -> [f64; 2] {
                let s = project(&pca, &LatentPoint::new(latent.to_vec()), 16).unwrap();
                [s[pc_a], s[pc_b]]
            };
            for r in &records {
                let improvement = r.final_best() - r.init_best();
                min_improvement = min_improvement.min(improvement);
                let projected: Vec<[f64; 2]> =
                    r.entries[r.n_init..].iter().map(|e| plane(&e.latent)).collect();
                let path = diagnostics::path_length(&projected).unwrap();
                match space {
                    SearchSpace::Full => full_paths.push(path),
                    SearchSpace::Pca(2) => pca2_paths.push(path),
                    _ => pca5_paths.push(path),
                }
                let var = diagnostics::score_variance(r).unwrap();
                all_var.push(var);
                all_best.push(r.final_best());
                println!(
                    "  {space} run {}: init {:.3} final {:.3} improve {:.3} path {:.1} var {:.3} fb {} [{:.1?}/run]",
                    r.run_index, r.init_best(), r.final_best(), improvement, path, var,
                    r.acquisition_fallbacks, dt
                );
            }
        }
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let pca_all: Vec<f64> = pca2_paths.iter().chain(&pca5_paths).copied().collect();
    let (t2v, p2) = welch(&pca2_paths, &full_paths);
    let (t5, p5) = welch(&pca5_paths, &full_paths);
    let (ta, pa) = welch(&pca_all, &full_paths);
    println!("min improvement over all runs: {min_improvement:.3}");
    println!(
        "paths: full {:.0} pca2 {:.0} pca5 {:.0} | welch pca2-vs-full t={t2v:.2} p={p2:.2e} | pca5 t={t5:.2} p={p5:.2e} | pooled t={ta:.2} p={pa:.2e}",
        mean(&full_paths), mean(&pca2_paths), mean(&pca5_paths)
    );
    let (r, pr) = diagnostics::pearson_r(&all_var, &all_best).unwrap();
    println!("Var(M) vs M_best over {} runs: r={r:.3} p={pr:.2e}", all_best.len());
    println!("total {:.1?}", t0.elapsed());
}
