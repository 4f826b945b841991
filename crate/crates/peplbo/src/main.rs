//! Command-line front end; every subcommand is a thin wrapper over the
//! library API. `PEPLBO_SEED` overrides the default seed of any subcommand
//! whose `--seed` flag is omitted.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use peplbo::experiment::{self, ExperimentConfig};
use peplbo::io;
use peplbo::latent::{fit_reference_model, LatentPoint, ReferenceLatentModel};
use peplbo::lbo::{self, LboConfig, SearchSpace};
use peplbo::oracle::{
    self, fit_oracle, lasso_dummy_select, mrmr_select, ClosedFormOracle, OracleFitConfig,
    OracleModel, SequenceObjective, SvrOracle,
};
use peplbo::peptides::{random_pool, FeatureRegistry, Sequence};
use peplbo::projection::{fit_pca, project, PcaModel};

#[derive(Parser)]
#[command(
    name = "peplbo",
    version,
    about = "Latent Bayesian optimization toolkit for peptide design spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute physicochemical descriptors for a FASTA/CSV pool
    Descriptors(DescriptorsArgs),
    /// Fit the descriptor-organized reference latent model
    BuildLatent(BuildLatentArgs),
    /// Build the SVR oracle: mRMR, dummy-feature LASSO, grid-searched SVR
    FitOracle(FitOracleArgs),
    /// Execute optimization runs and write run logs
    RunLbo(RunLboArgs),
    /// Run a full experiment from a JSON configuration
    Sweep(SweepArgs),
    /// Recompute exploration diagnostics and plots from run logs
    Diagnose(DiagnoseArgs),
    /// Distortion metrics between two point-cloud CSVs
    Distortion(DistortionArgs),
    /// Export pool embeddings (and PCA projections) to CSV
    Export(ExportArgs),
}

fn default_seed() -> u64 {
    std::env::var("PEPLBO_SEED").ok().and_then(|v| v.parse().ok()).unwrap_or(0)
}

#[derive(Args)]
struct DescriptorsArgs {
    /// Input pool (.fasta/.fa/.fna or .csv with a `sequence` column)
    #[arg(long)]
    input: PathBuf,
    /// Output CSV (`id,feature...`)
    #[arg(long)]
    output: PathBuf,
    /// Comma-separated feature ids
    #[arg(long, default_value = "boman,charge_ph7.2,hydrophobicity")]
    features: String,
}

#[derive(Args)]
struct BuildLatentArgs {
    /// Pool file; omit to generate a synthetic pool
    #[arg(long, conflicts_with = "synthetic")]
    pool: Option<PathBuf>,
    /// Synthetic pool size
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 6)]
    min_len: usize,
    #[arg(long, default_value_t = 30)]
    max_len: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Comma-separated organizing feature ids (empty for none)
    #[arg(long, default_value = "boman,charge_ph7.2,hydrophobicity")]
    organizing: String,
    /// Organization strength in [0, 1]
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct FitOracleArgs {
    /// Feature CSV (numeric columns plus the target column)
    #[arg(long)]
    features: PathBuf,
    /// Target column name (log10 MIC scale)
    #[arg(long, default_value = "log10_mic")]
    target: String,
    /// Keep the top-k features by mRMR before the LASSO stage
    #[arg(long)]
    mrmr_k: Option<usize>,
    /// LASSO grid: comma-separated values or `log:<lo>:<hi>:<steps>`
    #[arg(long)]
    alpha_grid: Option<String>,
    /// SVR C grid, same syntax (default log:-2:2:9)
    #[arg(long, default_value = "log:-2:2:9")]
    c_grid: String,
    /// SVR epsilon grid, same syntax (default log:-2:2:9)
    #[arg(long, default_value = "log:-2:2:9")]
    eps_grid: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Number of LASSO selection splits
    #[arg(long, default_value_t = 10)]
    lasso_splits: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct RunLboArgs {
    /// Latent model file from `build-latent`
    #[arg(long)]
    model: PathBuf,
    /// `closed-form` or a path to an oracle model JSON
    #[arg(long, default_value = "closed-form")]
    oracle: String,
    /// `full` or `pcaN`
    #[arg(long, default_value = "full")]
    space: String,
    #[arg(long, default_value_t = 500)]
    iterations: usize,
    #[arg(long, default_value_t = 100)]
    n_init: usize,
    #[arg(long, default_value_t = 5)]
    n_runs: usize,
    #[arg(long, default_value_t = -10.0)]
    box_lo: f64,
    #[arg(long, default_value_t = 10.0)]
    box_hi: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment configuration JSON
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Latent model JSON written by `sweep` or `build-latent`
    #[arg(long)]
    model: PathBuf,
    /// PCA model JSON written by `sweep` (fitted on the encoded pool)
    #[arg(long)]
    pca: Option<PathBuf>,
    /// `closed-form` or a path to an oracle model JSON
    #[arg(long, default_value = "closed-form")]
    oracle: String,
    /// Run-log CSVs
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    /// Initialization entries per run log
    #[arg(long, default_value_t = 100)]
    n_init: usize,
    #[arg(long, default_value_t = -10.0)]
    box_lo: f64,
    #[arg(long, default_value_t = 10.0)]
    box_hi: f64,
    #[arg(long, default_value_t = 1_000_000)]
    hv_samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct DistortionArgs {
    /// High-dimensional point cloud CSV
    #[arg(long)]
    high: PathBuf,
    /// Reduced point cloud CSV (same row order)
    #[arg(long)]
    low: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Subsample count (1 = evaluate the whole cloud once)
    #[arg(long, default_value_t = 1)]
    n_sub: usize,
    /// Subsample size (defaults to the full cloud)
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output report JSON
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    /// Latent model JSON
    #[arg(long)]
    model: PathBuf,
    /// Also project onto the top-n PCA components
    #[arg(long)]
    components: Option<usize>,
    /// Output CSV: `id,sequence,coord_0..[,pc_0..]`
    #[arg(long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Descriptors(args) => descriptors(args),
        Command::BuildLatent(args) => build_latent(args),
        Command::FitOracle(args) => cmd_fit_oracle(args),
        Command::RunLbo(args) => run_lbo(args),
        Command::Sweep(args) => sweep(args),
        Command::Diagnose(args) => diagnose(args),
        Command::Distortion(args) => cmd_distortion(args),
        Command::Export(args) => export(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn split_ids(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
}

/// Parse `log:<lo>:<hi>:<steps>` or a comma-separated value list.
fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    if let Some(rest) = s.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("bad grid '{s}' (expected log:<lo>:<hi>:<steps>)"));
        }
        let lo: f64 = parts[0].parse().map_err(|e| format!("bad grid '{s}': {e}"))?;
        let hi: f64 = parts[1].parse().map_err(|e| format!("bad grid '{s}': {e}"))?;
        let steps: usize = parts[2].parse().map_err(|e| format!("bad grid '{s}': {e}"))?;
        if steps < 2 {
            return Err(format!("bad grid '{s}': need at least 2 steps"));
        }
        return Ok(oracle::log_grid(lo, hi, steps));
    }
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad grid value '{v}': {e}")))
        .collect()
}

fn load_objective(spec: &str) -> Result<Box<dyn SequenceObjective>, Box<dyn std::error::Error>> {
    if spec == "closed-form" {
        return Ok(Box::new(ClosedFormOracle));
    }
    let model: OracleModel = io::load_versioned(Path::new(spec), "oracle-model")?;
    Ok(Box::new(SvrOracle::new(model)))
}

fn descriptors(args: DescriptorsArgs) -> CliResult {
    let pool = io::read_pool(&args.input)?;
    let ids = split_ids(&args.features);
    let registry = FeatureRegistry::standard();
    let rows: Result<Vec<_>, _> = pool
        .into_iter()
        .map(|(id, seq)| registry.compute(&seq, &ids).map(|dv| (id, dv)))
        .collect();
    let rows = rows?;
    io::write_descriptor_csv(&args.output, &rows)?;
    println!("wrote {} descriptor rows to {}", rows.len(), args.output.display());
    Ok(())
}

fn build_latent(args: BuildLatentArgs) -> CliResult {
    let seed = args.seed.unwrap_or_else(default_seed);
    let pool: Vec<Sequence> = match (&args.pool, args.synthetic) {
        (Some(path), None) => io::read_pool(path)?.into_iter().map(|(_, s)| s).collect(),
        (None, Some(count)) => random_pool(seed, count, args.min_len, args.max_len),
        _ => return Err("give exactly one of --pool or --synthetic".into()),
    };
    let organizing = split_ids(&args.organizing);
    let model = fit_reference_model(&pool, args.dim, &organizing, args.lambda, seed)?;
    io::save_versioned(&args.output, "latent-model", &model)?;
    println!(
        "fitted latent model: pool {}, dim {}, lambda {}, organizing [{}] -> {}",
        model.pool().len(),
        model.dim(),
        model.lambda(),
        organizing.join(", "),
        args.output.display()
    );
    Ok(())
}

fn cmd_fit_oracle(args: FitOracleArgs) -> CliResult {
    let seed = args.seed.unwrap_or_else(default_seed);
    let data = io::read_feature_matrix_csv(&args.features, &args.target)?;
    println!("loaded {} rows x {} features", data.len(), data.feature_names().len());

    let screened = match args.mrmr_k {
        Some(k) => {
            let picked = mrmr_select(&data, k.min(data.feature_names().len()))?;
            println!("mRMR kept {}: [{}]", picked.len(), picked.join(", "));
            data.select(&picked)?
        }
        None => data,
    };

    let alphas = match &args.alpha_grid {
        Some(s) => parse_grid(s)?,
        None => oracle::default_alpha_grid(),
    };
    let survivors = lasso_dummy_select(&screened, args.lasso_splits, &alphas, seed)?;
    if survivors.is_empty() {
        return Err("dummy-feature LASSO removed every feature; widen the alpha grid".into());
    }
    println!("LASSO kept {}: [{}]", survivors.len(), survivors.join(", "));
    let selected = screened.select(&survivors)?;

    let config = OracleFitConfig {
        c_grid: parse_grid(&args.c_grid)?,
        eps_grid: parse_grid(&args.eps_grid)?,
        folds: args.folds,
        seed,
        gamma: None,
    };
    let model = fit_oracle(&selected, &config)?;
    println!(
        "SVR winner: C = {}, eps = {}, cv mse = {:.6}",
        model.c(),
        model.eps(),
        model.cv_mse()
    );
    io::save_versioned(&args.output, "oracle-model", &model)?;
    println!("wrote oracle to {}", args.output.display());
    Ok(())
}

fn run_lbo(args: RunLboArgs) -> CliResult {
    let model: ReferenceLatentModel = io::load_versioned(&args.model, "latent-model")?;
    let objective = load_objective(&args.oracle)?;
    let space: SearchSpace = args.space.parse()?;
    let pca = match space {
        SearchSpace::Full => None,
        SearchSpace::Pca(_) => {
            let encoded: Vec<LatentPoint> = model.pool().iter().map(|s| model.encode(s)).collect();
            Some(fit_pca(&encoded)?)
        }
    };
    let config = LboConfig {
        iterations: args.iterations,
        n_init: args.n_init,
        n_runs: args.n_runs,
        space,
        box_lo: args.box_lo,
        box_hi: args.box_hi,
        seed: args.seed.unwrap_or_else(default_seed),
        ..LboConfig::default()
    };
    let records = lbo::run_all(&config, objective.as_ref(), &model, pca.as_ref())?;
    for r in &records {
        let path = args.output_dir.join(format!("{space}_run{}.csv", r.run_index));
        io::write_run_csv(&path, r)?;
        println!(
            "run {}: init best {:.4} -> final best {:.4}{} ({})",
            r.run_index,
            r.init_best(),
            r.final_best(),
            if r.aborted.is_some() { " [aborted]" } else { "" },
            path.display()
        );
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> CliResult {
    let config = ExperimentConfig::from_json_file(&args.config)?;
    let output = experiment::run_experiment(&config)?;
    for (space, records) in &output.runs {
        let finals: Vec<f64> = records.iter().map(|r| r.final_best()).collect();
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        println!("{space}: {} runs, mean final best {mean:.4}", records.len());
    }
    println!("artifacts in {}", output.output_dir.display());
    Ok(())
}

fn diagnose(args: DiagnoseArgs) -> CliResult {
    let model: ReferenceLatentModel = io::load_versioned(&args.model, "latent-model")?;
    let pca: PcaModel = match &args.pca {
        Some(path) => io::load_versioned(path, "pca-model")?,
        None => {
            let encoded: Vec<LatentPoint> = model.pool().iter().map(|s| model.encode(s)).collect();
            fit_pca(&encoded)?
        }
    };
    let objective = load_objective(&args.oracle)?;
    let labeled = experiment::load_run_logs(&args.runs, &model, &pca, args.n_init)?;
    experiment::diagnose_runs(
        &model,
        &pca,
        objective.as_ref(),
        &labeled,
        &args.output_dir,
        args.box_lo,
        args.box_hi,
        args.hv_samples,
        args.seed.unwrap_or_else(default_seed),
    )?;
    println!(
        "wrote diagnostics for {} runs to {}",
        labeled.iter().map(|(_, rs)| rs.len()).sum::<usize>(),
        args.output_dir.display()
    );
    Ok(())
}

fn cmd_distortion(args: DistortionArgs) -> CliResult {
    use peplbo::distortion::{steadiness_cohesiveness, subsample_estimate, trust_continuity, ScParams};
    let high = io::read_points_csv(&args.high)?;
    let low = io::read_points_csv(&args.low)?;
    let seed = args.seed.unwrap_or_else(default_seed);
    let size = args.size.unwrap_or(high.len()).min(high.len());
    let k = args.k;
    let sc = ScParams { k, seed, ..ScParams::default() };

    let t = subsample_estimate(&high, &low, args.n_sub, size, seed, |h, l| {
        trust_continuity(h, l, k).map(|(t, _)| t)
    })?;
    let c = subsample_estimate(&high, &low, args.n_sub, size, seed, |h, l| {
        trust_continuity(h, l, k).map(|(_, c)| c)
    })?;
    let st = subsample_estimate(&high, &low, args.n_sub, size, seed, |h, l| {
        steadiness_cohesiveness(h, l, &sc).map(|(s, _)| s)
    })?;
    let co = subsample_estimate(&high, &low, args.n_sub, size, seed, |h, l| {
        steadiness_cohesiveness(h, l, &sc).map(|(_, c)| c)
    })?;
    let report = serde_json::json!({
        "k": k,
        "n_sub": args.n_sub,
        "size": size,
        "trustworthiness": { "mean": t.mean, "sd": t.sd },
        "continuity": { "mean": c.mean, "sd": c.sd },
        "steadiness": { "mean": st.mean, "sd": st.sd },
        "cohesiveness": { "mean": co.mean, "sd": co.sd },
    });
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    io::write_atomic(&args.output, &bytes)?;
    println!(
        "T = {:.4}, C = {:.4}, St = {:.4}, Co = {:.4} -> {}",
        t.mean,
        c.mean,
        st.mean,
        co.mean,
        args.output.display()
    );
    Ok(())
}

fn export(args: ExportArgs) -> CliResult {
    let model: ReferenceLatentModel = io::load_versioned(&args.model, "latent-model")?;
    let pca = match args.components {
        Some(_) => {
            let encoded: Vec<LatentPoint> = model.pool().iter().map(|s| model.encode(s)).collect();
            Some(fit_pca(&encoded)?)
        }
        None => None,
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    let mut header: Vec<String> = vec!["id".into(), "sequence".into()];
    header.extend((0..model.dim()).map(|j| format!("coord_{j}")));
    if let Some(n) = args.components {
        header.extend((0..n).map(|j| format!("pc_{j}")));
    }
    w.write_record(&header)?;
    for (i, seq) in model.pool().iter().enumerate() {
        let z = model.encode(seq);
        let mut row: Vec<String> = vec![i.to_string(), seq.to_string()];
        row.extend(z.coords().iter().map(|v| v.to_string()));
        if let (Some(n), Some(pca)) = (args.components, &pca) {
            let scores = project(pca, &z, n)?;
            row.extend(scores.iter().map(|v| v.to_string()));
        }
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| format!("flush failed: {e}"))?;
    io::write_atomic(&args.output, &bytes)?;
    println!("exported {} pool rows to {}", model.pool().len(), args.output.display());
    Ok(())
}
