//! `ldfkit`: spatial transfer learning from the command line.
//!
//! Utility subcommands (`gen`, `cloud`, `ldf`, `reweight`, `train`,
//! `predict`, `corr`, `grid-predict`) operate on CSV files one stage at a
//! time; `bench` and `ablate-k` run the full cross-validated protocol from
//! a single JSON config.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ldf_core::{
    apply_normalizer, clouds_for_dataset, fit_normalizer, generate, impute_ldf,
    ldf_inputs_for_dataset, load_csv, load_model, nnw_weights, kliep_weights, kmm_weights,
    save_csv, save_model, train, AutoencoderModel, CoreError, Dataset64, DomainTag,
    FeatureSchema, KernelConfig, KernelKind, Pool, Result, Stage, StageSchedule, SynthConfig,
    TrainConfig, WeightVector,
};

use ldf_cli::config::{read_json, write_json, AeSection, ExperimentConfig};
use ldf_cli::pipeline::{ablate_k, run_experiment};
use ldf_cli::regressor::{RegressorFile, RegressorKind, TrainDoc};
use ldf_cli::report::{correlation_report, write_correlation_csv};

#[derive(Parser)]
#[command(
    name = "ldfkit",
    version,
    about = "Spatial transfer learning: synthetic scenarios, latent dependency factors, \
             instance reweighting, tree ensembles, and a benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic source/target/grid scenario
    Gen(GenArgs),
    /// Dump the neighborhood cloud of every pool sample
    Cloud(CloudArgs),
    /// Train or apply the latent-factor autoencoder
    #[command(subcommand)]
    Ldf(LdfCmd),
    /// Compute importance weights for source samples
    Reweight(ReweightArgs),
    /// Fit a regressor on one CSV
    Train(TrainArgs),
    /// Predict with a saved regressor
    Predict(PredictArgs),
    /// Run the cross-validated benchmark and write the result table
    Bench(BenchArgs),
    /// Run the benchmark across neighborhood sizes
    AblateK(AblateArgs),
    /// Rank features by correlation with the label
    Corr(CorrArgs),
    /// Predict over a coordinate grid
    GridPredict(GridPredictArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Scenario description (JSON); defaults cover every field
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Receives source.csv, target.csv, grid.csv, truth.json and the
    /// schema files the other subcommands consume
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PoolArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Column schema (JSON): feature names, coordinate indices, label
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Args)]
struct CloudArgs {
    #[command(flatten)]
    pool: PoolArgs,
    #[arg(long, default_value_t = 12)]
    k: usize,
    /// Neighbors must lie within this many days of the objective
    #[arg(long, default_value_t = 0)]
    day_window: i64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum LdfCmd {
    /// Fit the two-stage autoencoder on the source + target pool
    Train(LdfTrainArgs),
    /// Append the latent column to a dataset using a saved model
    Impute(LdfImputeArgs),
}

#[derive(Args)]
struct LdfTrainArgs {
    #[command(flatten)]
    pool: PoolArgs,
    /// Architecture and optimizer settings (JSON); defaults otherwise
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    day_window: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint path (JSON)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PoolPosition {
    /// Rows are not pool members (held-out or grid data)
    None,
    /// The data file is the pool's source half
    Source,
    /// The data file is the pool's target half
    Target,
}

#[derive(Args)]
struct LdfImputeArgs {
    /// Autoencoder checkpoint from `ldf train`
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    pool: PoolArgs,
    /// Rows to impute
    #[arg(long)]
    data: PathBuf,
    /// Schema of --data when it differs from the pool schema
    #[arg(long)]
    data_schema: Option<PathBuf>,
    /// Whether --data is one of the pool halves (its rows then never
    /// pick themselves as neighbors)
    #[arg(long, value_enum, default_value_t = PoolPosition::None)]
    in_pool: PoolPosition,
    #[arg(long, default_value_t = 0)]
    day_window: i64,
    /// Output CSV: normalized features, latent column, label
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Nnw,
    Kliep,
    Kmm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelArg {
    Rbf,
    Poly,
}

impl From<KernelArg> for KernelKind {
    fn from(k: KernelArg) -> KernelKind {
        match k {
            KernelArg::Rbf => KernelKind::Rbf,
            KernelArg::Poly => KernelKind::Poly,
        }
    }
}

#[derive(Args)]
struct ReweightArgs {
    #[arg(long, value_enum)]
    method: MethodArg,
    #[command(flatten)]
    pool: PoolArgs,
    /// Voronoi cell size for nnw
    #[arg(long, default_value_t = 6)]
    n_neighbors: usize,
    #[arg(long, value_enum, default_value_t = KernelArg::Rbf)]
    kernel: KernelArg,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long, default_value_t = 2)]
    degree: u32,
    /// kliep: number of target-sample kernel centers
    #[arg(long, default_value_t = 100)]
    n_centers: usize,
    /// kmm: upper weight bound B
    #[arg(long, default_value_t = 1000.0)]
    b_bound: f64,
    /// kmm: mean-constraint slack; (sqrt(m)-1)/sqrt(m) when omitted
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 300)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Output CSV: index,weight over source rows
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, value_enum)]
    model: RegressorKind,
    /// Hyperparameters (JSON); library defaults otherwise
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-row weights CSV (index,weight), e.g. from `reweight`
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Output CSV: sensor_id,doy,prediction
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment description (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Receives results.csv and manifest.json
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Neighborhood sizes to sweep
    #[arg(long, value_delimiter = ',', required = true)]
    k_values: Vec<usize>,
    /// Receives ablation.csv and ablation_manifest.json
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CorrArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Output CSV: feature,correlation, sorted by falling |r|
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridPredictArgs {
    /// Regressor file from `train`
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    grid: PathBuf,
    /// Schema of the grid CSV (usually grid-schema.json from `gen`)
    #[arg(long)]
    grid_schema: PathBuf,
    /// Training pool, used to normalize the grid the same way the
    /// training data was normalized
    #[command(flatten)]
    pool: PoolArgs,
    /// Autoencoder checkpoint; required when the regressor was fit on
    /// data carrying the latent column
    #[arg(long)]
    ldf_model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    day_window: i64,
    /// Output CSV: x,y,prediction in original grid coordinates
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    // Die quietly when stdout closes early (`ldfkit bench | head`),
    // like any other Unix filter.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                CoreError::Divergence(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Cloud(a) => cmd_cloud(a),
        Cmd::Ldf(LdfCmd::Train(a)) => cmd_ldf_train(a),
        Cmd::Ldf(LdfCmd::Impute(a)) => cmd_ldf_impute(a),
        Cmd::Reweight(a) => cmd_reweight(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Predict(a) => cmd_predict(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::AblateK(a) => cmd_ablate(a),
        Cmd::Corr(a) => cmd_corr(a),
        Cmd::GridPredict(a) => cmd_grid_predict(a),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CoreError {
    CoreError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Load a source/target pair and z-score both with statistics fit on
/// their union, the same convention the benchmark pipeline uses for its
/// training pool.
fn load_normalized_pair(args: &PoolArgs) -> Result<(Dataset64, Dataset64, FeatureSchema)> {
    let schema: FeatureSchema = read_json(&args.schema)?;
    let source = load_csv::<f64>(&args.source, &schema, DomainTag::Source)?;
    let target = load_csv::<f64>(&args.target, &schema, DomainTag::Target)?;
    let stats = fit_normalizer(&[&source, &target])?;
    Ok((
        apply_normalizer(&source, &stats)?,
        apply_normalizer(&target, &stats)?,
        schema,
    ))
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let config: SynthConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => SynthConfig::default(),
    };
    let (source, target, grid, truth) = generate::<f64>(&config, args.seed)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| io_err(&args.out_dir, e))?;
    let dir = &args.out_dir;
    save_csv(&source, "label", Some("aux"), &dir.join("source.csv"))?;
    save_csv(&target, "label", Some("aux"), &dir.join("target.csv"))?;
    save_csv(&grid, "label", None, &dir.join("grid.csv"))?;
    write_json(&truth, &dir.join("truth.json"))?;
    let schema = FeatureSchema::new(
        source.feature_names.clone(),
        source.coordinate_indices,
        "label".into(),
        Some("aux".into()),
    )?;
    write_json(&schema, &dir.join("schema.json"))?;
    let grid_schema = FeatureSchema::new(
        grid.feature_names.clone(),
        grid.coordinate_indices,
        "label".into(),
        None,
    )?;
    write_json(&grid_schema, &dir.join("grid-schema.json"))?;
    println!(
        "wrote {} source rows, {} target rows, {} grid cells to {}",
        source.len(),
        target.len(),
        grid.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_cloud(args: CloudArgs) -> Result<()> {
    let (src, tgt, _) = load_normalized_pair(&args.pool)?;
    let pool = Pool::new(&src, &tgt)?;
    let mut clouds = clouds_for_dataset(&pool, &src, Some(0), args.k, args.day_window)?;
    clouds.extend(clouds_for_dataset(
        &pool,
        &tgt,
        Some(src.len()),
        args.k,
        args.day_window,
    )?);
    let mut out = String::from("objective_id,neighbor_ids,distances\n");
    for (i, cloud) in clouds.iter().enumerate() {
        let ids: Vec<String> = cloud.neighbor_indices.iter().map(|v| v.to_string()).collect();
        let dists: Vec<String> = cloud.distances.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{i},{},{}\n", ids.join(" "), dists.join(" ")));
    }
    write_text(&args.out, &out)?;
    println!("wrote {} clouds to {}", clouds.len(), args.out.display());
    Ok(())
}

fn cmd_ldf_train(args: LdfTrainArgs) -> Result<()> {
    let ae: AeSection = match &args.config {
        Some(path) => read_json(path)?,
        None => AeSection::default(),
    };
    let (src, tgt, _) = load_normalized_pair(&args.pool)?;
    let pool = Pool::new(&src, &tgt)?;
    let mut inputs = ldf_inputs_for_dataset(&pool, &src, Some(0), args.k, args.day_window)?;
    inputs.extend(ldf_inputs_for_dataset(
        &pool,
        &tgt,
        Some(src.len()),
        args.k,
        args.day_window,
    )?);
    let model = AutoencoderModel::<f64>::init(ae.arch, args.k, src.feature_count(), args.seed)?;
    let tcfg = TrainConfig {
        epochs: ae.epochs,
        batch_size: ae.batch_size,
        learning_rate: ae.learning_rate,
        seed: args.seed,
        schedule: StageSchedule::EvenOdd,
    };
    let (model, history) = train(model, &inputs, &tcfg)?;
    save_model(&model, &args.out)?;
    for stage in [Stage::Reconstruction, Stage::Estimation] {
        if let Some(last) = history.iter().rev().find(|e| e.stage == stage) {
            println!("final {stage} loss {:.6} (epoch {})", last.loss, last.epoch);
        }
    }
    println!(
        "saved checkpoint (k={}, p={}) to {}",
        model.k,
        model.p,
        args.out.display()
    );
    Ok(())
}

fn cmd_ldf_impute(args: LdfImputeArgs) -> Result<()> {
    let model = load_model::<f64>(&args.model)?;
    let pool_schema: FeatureSchema = read_json(&args.pool.schema)?;
    let data_schema: FeatureSchema = match &args.data_schema {
        Some(path) => read_json(path)?,
        None => pool_schema.clone(),
    };
    let source = load_csv::<f64>(&args.pool.source, &pool_schema, DomainTag::Source)?;
    let target = load_csv::<f64>(&args.pool.target, &pool_schema, DomainTag::Target)?;
    let data_domain = match args.in_pool {
        PoolPosition::Source => DomainTag::Source,
        _ => DomainTag::Target,
    };
    let data = load_csv::<f64>(&args.data, &data_schema, data_domain)?;
    let stats = fit_normalizer(&[&source, &target])?;
    let src = apply_normalizer(&source, &stats)?;
    let tgt = apply_normalizer(&target, &stats)?;
    let data_n = apply_normalizer(&data, &stats)?;
    let pool = Pool::new(&src, &tgt)?;
    let offset = match args.in_pool {
        PoolPosition::None => None,
        PoolPosition::Source => Some(0),
        PoolPosition::Target => Some(src.len()),
    };
    let clouds = clouds_for_dataset(&pool, &data_n, offset, model.k, args.day_window)?;
    let imputed = impute_ldf(&model, &data_n, &pool, &clouds)?;
    save_csv(
        &imputed,
        &data_schema.label_name,
        data_schema.aux_label_name.as_deref(),
        &args.out,
    )?;
    println!(
        "imputed latent column for {} rows into {}",
        imputed.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_reweight(args: ReweightArgs) -> Result<()> {
    let (src, tgt, _) = load_normalized_pair(&args.pool)?;
    let kernel = KernelConfig {
        kind: args.kernel.into(),
        gamma: args.gamma,
        degree: args.degree,
    };
    let wv: WeightVector<f64> = match args.method {
        MethodArg::Nnw => nnw_weights(&src, &tgt, args.n_neighbors)?,
        MethodArg::Kliep => kliep_weights(
            &src,
            &tgt,
            &kernel,
            args.n_centers,
            args.max_iter,
            args.tol,
        )?,
        MethodArg::Kmm => kmm_weights(
            &src,
            &tgt,
            &kernel,
            args.b_bound,
            args.eps,
            args.max_iter,
            args.tol,
        )?,
    };
    let mut out = String::from("index,weight\n");
    for (i, w) in wv.weights.iter().enumerate() {
        out.push_str(&format!("{i},{w}\n"));
    }
    write_text(&args.out, &out)?;
    println!(
        "wrote {} weights (mean {:.6}) to {}",
        wv.weights.len(),
        wv.mean(),
        args.out.display()
    );
    Ok(())
}

fn read_weights_csv(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CoreError::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
    let parse_err = |line: usize, message: String| CoreError::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut weights = vec![0.0f64; expected];
    let mut seen = vec![false; expected];
    for (row, record) in reader.records().enumerate() {
        let line = row + 2; // header is line 1
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if record.len() != 2 {
            return Err(parse_err(line, format!("expected 2 cells, got {}", record.len())));
        }
        let index: usize = record[0]
            .trim()
            .parse()
            .map_err(|e| parse_err(line, format!("bad index: {e}")))?;
        let weight: f64 = record[1]
            .trim()
            .parse()
            .map_err(|e| parse_err(line, format!("bad weight: {e}")))?;
        if index >= expected {
            return Err(parse_err(
                line,
                format!("index {index} out of range for {expected} data rows"),
            ));
        }
        if seen[index] {
            return Err(parse_err(line, format!("duplicate index {index}")));
        }
        seen[index] = true;
        weights[index] = weight;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(CoreError::DimensionMismatch(format!(
            "weights file covers {} of {} rows (first missing index {missing})",
            seen.iter().filter(|&&s| s).count(),
            expected
        )));
    }
    Ok(weights)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let schema: FeatureSchema = read_json(&args.schema)?;
    let data = load_csv::<f64>(&args.data, &schema, DomainTag::Target)?;
    let doc: TrainDoc = match &args.config {
        Some(path) => read_json(path)?,
        None => TrainDoc::default(),
    };
    let weights = match &args.weights {
        Some(path) => read_weights_csv(path, data.len())?,
        None => vec![1.0; data.len()],
    };
    let file = RegressorFile::fit(args.model, &data, &weights, &doc, args.seed)?;
    file.save(&args.out)?;
    println!(
        "fit {:?} on {} rows x {} features; saved to {}",
        args.model,
        data.len(),
        data.feature_count(),
        args.out.display()
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let file = RegressorFile::load(&args.model)?;
    let schema: FeatureSchema = read_json(&args.schema)?;
    let data = load_csv::<f64>(&args.data, &schema, DomainTag::Target)?;
    file.check_features(&data, &args.model.display().to_string())?;
    let preds = file.predict(&data.samples)?;
    let mut out = String::from("sensor_id,doy,prediction\n");
    for (i, p) in preds.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{p}\n",
            data.sensor_ids[i], data.day_index[i]
        ));
    }
    write_text(&args.out, &out)?;
    println!("wrote {} predictions to {}", preds.len(), args.out.display());
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let cfg: ExperimentConfig = read_json(&args.config)?;
    let outcome = run_experiment(&cfg)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| io_err(&args.out_dir, e))?;
    let results = args.out_dir.join("results.csv");
    let manifest = args.out_dir.join("manifest.json");
    outcome.table.write_csv(&results)?;
    outcome.manifest.write_json(&manifest)?;
    print!("{}", outcome.table.to_csv_string(None));
    if let Some(corr) = &outcome.manifest.ldf_label_correlation {
        println!(
            "held-out |corr(latent, label)|: mean {:.3} over {} cells",
            corr.mean_abs, corr.cells
        );
    }
    println!("wrote {} and {}", results.display(), manifest.display());
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let cfg: ExperimentConfig = read_json(&args.config)?;
    let outcomes = ablate_k(&cfg, &args.k_values)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| io_err(&args.out_dir, e))?;
    let mut table = String::new();
    for (i, (k, outcome)) in outcomes.iter().enumerate() {
        let section = outcome.table.to_csv_string(Some(*k));
        if i == 0 {
            table.push_str(&section);
        } else {
            // drop the repeated header line
            table.push_str(section.split_once('\n').map(|(_, rest)| rest).unwrap_or(""));
        }
    }
    let csv_path = args.out_dir.join("ablation.csv");
    write_text(&csv_path, &table)?;
    let manifests: Vec<serde_json::Value> = outcomes
        .iter()
        .map(|(k, o)| {
            serde_json::json!({ "k": k, "manifest": serde_json::to_value(&o.manifest).unwrap() })
        })
        .collect();
    let manifest_path = args.out_dir.join("ablation_manifest.json");
    write_json(&manifests, &manifest_path)?;
    print!("{table}");
    println!("wrote {} and {}", csv_path.display(), manifest_path.display());
    Ok(())
}

fn cmd_corr(args: CorrArgs) -> Result<()> {
    let schema: FeatureSchema = read_json(&args.schema)?;
    let data = load_csv::<f64>(&args.data, &schema, DomainTag::Target)?;
    let report = correlation_report(&data);
    write_correlation_csv(&report, &args.out)?;
    for (name, r) in report.iter().take(5) {
        println!("{name}: {r:.4}");
    }
    println!("wrote {} correlations to {}", report.len(), args.out.display());
    Ok(())
}

fn cmd_grid_predict(args: GridPredictArgs) -> Result<()> {
    let file = RegressorFile::load(&args.model)?;
    let grid_schema: FeatureSchema = read_json(&args.grid_schema)?;
    let grid_raw = load_csv::<f64>(&args.grid, &grid_schema, DomainTag::Target)?;

    let pool_schema: FeatureSchema = read_json(&args.pool.schema)?;
    let source = load_csv::<f64>(&args.pool.source, &pool_schema, DomainTag::Source)?;
    let target = load_csv::<f64>(&args.pool.target, &pool_schema, DomainTag::Target)?;
    let stats = fit_normalizer(&[&source, &target])?;
    let src = apply_normalizer(&source, &stats)?;
    let tgt = apply_normalizer(&target, &stats)?;
    let mut grid = apply_normalizer(&grid_raw, &stats)?;

    if let Some(ae_path) = &args.ldf_model {
        let model = load_model::<f64>(ae_path)?;
        let pool = Pool::new(&src, &tgt)?;
        let clouds = clouds_for_dataset(&pool, &grid, None, model.k, args.day_window)?;
        grid = impute_ldf(&model, &grid, &pool, &clouds)?;
    }
    file.check_features(&grid, &args.model.display().to_string())?;
    let preds = file.predict(&grid.samples)?;

    let (cx, cy) = grid_raw.coordinate_indices;
    let mut out = String::from("x,y,prediction\n");
    for (i, p) in preds.iter().enumerate() {
        let row = grid_raw.features(i);
        out.push_str(&format!("{},{},{p}\n", row[cx], row[cy]));
    }
    write_text(&args.out, &out)?;
    println!("wrote {} grid predictions to {}", preds.len(), args.out.display());
    Ok(())
}
