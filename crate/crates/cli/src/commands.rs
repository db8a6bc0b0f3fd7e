use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;
use stratum_core::config::RunConfig;
use stratum_core::data::{
    generate_synthetic, load_feature_matrix, load_labels, load_recording, load_recording_at_rate, save_feature_matrix,
    save_labels, SyntheticSpec,
};
use stratum_core::experiment::{
    append_aggregate_row, predict_target, run_experiment, save_report, summary, write_atomic, ExperimentReport, Method,
};
use stratum_core::features::extract_position_features;
use stratum_core::kernel::KernelKind;
use stratum_core::sat::{run_sat, save_trace_csv};
use stratum_core::sds::{global_distances, stratified_distances, Ranking};
use stratum_core::{Domain, Error};

use crate::{
    Cli, Command, ConfigAction, Distance, EvaluateArgs, ExperimentArgs, ExtractArgs, KernelArg, MethodArg, SelectArgs,
    SynthArgs, TransferArgs,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Stage { stage: &'static str, source: Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Stage { .. } => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}\n\nFor more information, try '--help'."),
            CliError::Stage { stage, source } => write!(f, "{stage}: {source}"),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn at<T>(stage: &'static str, r: stratum_core::Result<T>) -> Result<T> {
    r.map_err(|source| CliError::Stage { stage, source })
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input file not found: {}", path.display())))
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let cfg = match &cli.config {
        Some(p) => {
            require_file(p)?;
            RunConfig::load(p).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?
        }
        None => RunConfig::default(),
    };
    let mut cfg = cfg
        .with_env_seed()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}

fn method_of(arg: MethodArg) -> Method {
    match arg {
        MethodArg::StlSat => Method::StlSat,
        MethodArg::Tca => Method::Tca,
        MethodArg::Pca => Method::Pca,
        MethodArg::SourceOnly1nn => Method::SourceOnly1nn,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Extract(args) => extract(args, &cfg),
        Command::Synth(args) => synth(args, &cfg),
        Command::SelectSource(args) => select_source(args, &cfg),
        Command::Transfer(args) => transfer(args, cfg),
        Command::Evaluate(args) => evaluate(args, &cfg),
        Command::Experiment(args) => experiment(args, &cfg),
        Command::Config { action: ConfigAction::Dump } => {
            print!("{}", at("config", cfg.dump())?);
            Ok(())
        }
    }
}

fn meta_path(output: &Path) -> PathBuf {
    let mut p = output.as_os_str().to_owned();
    p.push(".meta.json");
    PathBuf::from(p)
}

fn extract(args: ExtractArgs, cfg: &RunConfig) -> Result<()> {
    require_file(&args.input)?;
    let mut windowing = cfg.windowing();
    if let Some(w) = args.window_seconds {
        windowing.window_seconds = w;
    }
    if let Some(o) = args.overlap {
        windowing.overlap_fraction = o;
    }
    let mut recording = at(
        "read recording",
        match args.sample_rate {
            Some(rate) => load_recording_at_rate(&args.input, &args.schema, rate),
            None => load_recording(&args.input, &args.schema),
        },
    )?;
    recording.position_id = args.position.unwrap_or_default();
    recording.dataset_id = args.dataset.unwrap_or_default();
    let (window_samples, stride_samples) = at("windowing", windowing.geometry(recording.sample_rate))?;
    let domain = at("extract features", extract_position_features(&recording, &windowing))?;
    at("write features", save_feature_matrix(&domain, &args.output))?;
    let meta = json!({
        "input": args.input.display().to_string(),
        "schema": args.schema,
        "sample_rate": recording.sample_rate,
        "window_seconds": windowing.window_seconds,
        "overlap": windowing.overlap_fraction,
        "label_rule": windowing.label_rule,
        "window_samples": window_samples,
        "stride_samples": stride_samples,
        "rows": domain.n_rows(),
        "columns": domain.dim(),
    });
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n";
    at("write metadata", write_atomic(meta_path(&args.output), text.as_bytes()))?;
    println!("{} rows x {} columns -> {}", domain.n_rows(), domain.dim(), args.output.display());
    Ok(())
}

fn synth(args: SynthArgs, cfg: &RunConfig) -> Result<()> {
    let spec = SyntheticSpec {
        num_classes: args.classes,
        dim: args.dim,
        samples_per_class: args.samples_per_class,
        domain_shifts: args.shifts,
        noise_scale: args.noise,
        seed: cfg.seed,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let domains = at("generate", generate_synthetic(&spec))?;
    fs::create_dir_all(&args.out_dir).map_err(|e| CliError::Stage {
        stage: "create output directory",
        source: Error::Io {
            path: args.out_dir.clone(),
            source: e,
        },
    })?;
    for (k, d) in domains.iter().enumerate() {
        let path = args.out_dir.join(format!("domain{k}.csv"));
        at("write domain", save_feature_matrix(d, &path))?;
        println!("{} rows x {} columns -> {}", d.n_rows(), d.dim(), path.display());
    }
    Ok(())
}

fn load_labeled(stage: &'static str, path: &Path) -> Result<Domain> {
    require_file(path)?;
    let d = at(stage, load_feature_matrix(path))?;
    at(stage, d.labels().map(|_| ()))?;
    Ok(d)
}

fn load_target(path: &Path) -> Result<Domain> {
    require_file(path)?;
    Ok(at("read target", load_feature_matrix(path))?.without_labels())
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

fn select_source(args: SelectArgs, cfg: &RunConfig) -> Result<()> {
    let sources = args
        .sources
        .iter()
        .map(|p| load_labeled("read source", p))
        .collect::<Result<Vec<_>>>()?;
    let target = load_target(&args.target)?;
    let sds = at("configure", cfg.sds_config())?;
    let sd = at("stratified distance", stratified_distances(&sources, &target.features, &sds))?;
    let gd = at("global distance", global_distances(&sources, &target.features, &sds))?;
    let ranking = at(
        "rank sources",
        match args.distance {
            Distance::Stratified => Ranking::from_distances(sd.clone()),
            Distance::Global => Ranking::from_distances(gd.clone()),
        },
    )?;
    let ranks = ranking.ranks();
    let distance_name = match args.distance {
        Distance::Stratified => "stratified",
        Distance::Global => "global",
    };

    println!("ranking by {distance_name} distance");
    println!("{:<4} {:<12} {:<12} {:<5} path", "id", "SD", "GD", "rank");
    for (i, path) in args.sources.iter().enumerate() {
        let mark = if i == ranking.selected { " *" } else { "" };
        println!(
            "{:<4} {:<12.6} {:<12.6} {:<5} {}{mark}",
            i,
            sd[i],
            gd[i],
            ranks[i],
            path.display()
        );
    }
    println!("selected source {}", ranking.selected);

    if let Some(report) = &args.report {
        let rows: Vec<_> = args
            .sources
            .iter()
            .enumerate()
            .map(|(i, p)| {
                json!({
                    "id": i,
                    "path": p.display().to_string(),
                    "stratified_distance": finite_or_null(sd[i]),
                    "global_distance": finite_or_null(gd[i]),
                    "rank": ranks[i],
                })
            })
            .collect();
        let doc = json!({
            "target": args.target.display().to_string(),
            "distance": distance_name,
            "selected": ranking.selected,
            "seed": cfg.seed,
            "sources": rows,
        });
        let text = serde_json::to_string_pretty(&doc).expect("report serializes") + "\n";
        at("write report", write_atomic(report, text.as_bytes()))?;
    }
    Ok(())
}

fn transfer(args: TransferArgs, mut cfg: RunConfig) -> Result<()> {
    if let Some(m) = args.m {
        cfg.sat_dims = m;
    }
    if let Some(l) = args.lambda {
        cfg.sat_lambda = l;
    }
    if let Some(k) = args.kernel {
        cfg.sat_kernel = match k {
            KernelArg::Linear => KernelKind::Linear,
            KernelArg::Rbf => KernelKind::Rbf,
        };
    }
    if let Some(s) = args.sigma {
        cfg.sat_sigma = s;
    }
    if let Some(t) = args.iters {
        cfg.sat_iterations = t;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let source = load_labeled("read source", &args.source)?;
    let target = load_target(&args.target)?;
    let truth = match &args.truth {
        Some(p) => {
            require_file(p)?;
            Some(at("read truth", load_labels(p))?)
        }
        None => None,
    };
    let experiment = at("configure", cfg.experiment_config())?;
    let method = method_of(args.method);
    let seed = cfg.seed;

    in_pool(args.jobs, || -> Result<()> {
        let labels = if method == Method::StlSat {
            let c = experiment.seeded(seed);
            let out = at(
                "transfer",
                run_sat(&source, &target.features, &c.voting, &c.sat, truth.as_deref()),
            )?;
            if let Some(trace) = &args.trace {
                at("write trace", save_trace_csv(&out.trace, trace))?;
            }
            println!(
                "{} iterations, {} candidates, {} residuals",
                out.trace.len(),
                out.initial.num_candidates(),
                out.initial.residual_indices.len()
            );
            out.labels
        } else {
            if args.trace.is_some() {
                log::warn!("--trace is only written by stl-sat");
            }
            at("transfer", predict_target(&source, &target.features, method, &experiment, seed))?
        };
        at("write labels", save_labels(&labels, &args.output))?;
        println!("{} labels -> {}", labels.len(), args.output.display());
        Ok(())
    })?
}

fn evaluate(args: EvaluateArgs, cfg: &RunConfig) -> Result<()> {
    require_file(&args.predictions)?;
    require_file(&args.truth)?;
    let method: Method = args.method.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
    let predicted = at("read predictions", load_labels(&args.predictions))?;
    let truth = at("read truth", load_labels(&args.truth))?;
    let report = in_pool(args.jobs, || {
        at(
            "score",
            ExperimentReport::from_predictions(&args.task, method, &truth, &predicted, cfg.seed, 0.0),
        )
    })??;
    print!("{}", summary(&report));
    if let Some(path) = &args.report {
        at("write report", save_report(&report, path))?;
    }
    if let Some(path) = &args.emit {
        at("append table", append_aggregate_row(path, &report))?;
    }
    Ok(())
}

fn experiment(args: ExperimentArgs, cfg: &RunConfig) -> Result<()> {
    let source = load_labeled("read source", &args.source)?;
    let target = load_labeled("read target", &args.target)?;
    let mut experiment = at("configure", cfg.experiment_config())?;
    experiment.timing = args.timing;
    let methods: Vec<Method> = if args.methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        args.methods.iter().map(|&m| method_of(m)).collect()
    };
    if args.repeats == 0 {
        return Err(CliError::Usage("--repeats must be >= 1".into()));
    }
    let runs: Vec<(u64, Method)> = (cfg.seed..cfg.seed + args.repeats)
        .flat_map(|s| methods.iter().map(move |&m| (s, m)))
        .collect();
    fs::create_dir_all(&args.out_dir).map_err(|e| CliError::Stage {
        stage: "create output directory",
        source: Error::Io {
            path: args.out_dir.clone(),
            source: e,
        },
    })?;

    let reports = in_pool(args.jobs, || {
        runs.par_iter()
            .map(|&(seed, method)| {
                let report = at(
                    "experiment",
                    run_experiment(&args.task, &source, &target, method, &experiment, seed),
                )?;
                let path = args.out_dir.join(format!("{}_{}_seed{}.json", args.task, method, seed));
                at("write report", save_report(&report, &path))?;
                Ok(report)
            })
            .collect::<Result<Vec<_>>>()
    })??;

    for r in &reports {
        println!(
            "{:<16} seed {:<6} accuracy {:.4}  macro F1 {:.4}",
            r.method.to_string(),
            r.seed,
            r.accuracy,
            r.f1_macro
        );
        if let Some(path) = &args.emit {
            at("append table", append_aggregate_row(path, r))?;
        }
    }
    Ok(())
}
