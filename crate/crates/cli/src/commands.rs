//! Subcommand implementations.
//!
//! Every command reads its declared inputs, writes its declared outputs
//! atomically, and removes partial outputs on failure. All randomness flows
//! from the single `--seed` flag.

use std::path::{Path, PathBuf};

use clap::Args;

use emostock_core::corpus::{classify, filter_stock_tweets, train_nb, BigramTokenizer, Tweet};
use emostock_core::date::Date;
use emostock_core::discretize::Method;
use emostock_core::emotion::{EmotionLabel, EMOTION_COUNT};
use emostock_core::eval::{
    fit_scheme, holdout_eval, kfold_cv, run_experiment, train_pipeline, Classifier, CvMode,
    ExperimentConfig, FeatureMode, NormMode,
};
use emostock_core::learn::{
    build_features, Dataset, FeatureScaler, FeatureSpec, Hyperparams, ModelKind,
};
use emostock_core::market::{
    common_dates, compute_returns, split_train_test, MarketSeries, MarketTarget, ReturnMode,
};
use emostock_core::rng::derive_seed;
use emostock_core::stats::{analysis_grid, GridOptions};
use emostock_core::timeseries::{
    aggregate_daily, drop_non_trading, to_proportions, EmotionSeries, MAX_LAG,
};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::io;
use crate::synth::{self, PlantedRule, SynthConfig};

/// Values shared by every subcommand.
pub struct Context {
    pub config: Config,
    pub seed: u64,
}

impl Context {
    pub fn new(config_path: Option<&Path>, seed_flag: Option<u64>) -> Result<Self> {
        let config = match config_path {
            Some(p) => Config::from_file(p)?,
            None => Config::default(),
        };
        let seed = config.resolve(seed_flag, "seed", 0u64)?;
        Ok(Context { config, seed })
    }

    /// A path that must come from either the flag or the config file.
    fn path(&self, flag: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        if let Some(p) = flag {
            return Ok(p.clone());
        }
        match self.config.get(key) {
            Some(raw) => Ok(PathBuf::from(raw)),
            None => Err(CliError::usage(format!(
                "missing --{} flag (or config key {key})",
                key.replace('_', "-")
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Shared argument groups
// ---------------------------------------------------------------------------

#[derive(Debug, Args, Default, Clone)]
pub struct MarketOpts {
    /// Return transform: standard (previous close) or paper-literal
    #[arg(long)]
    pub return_mode: Option<ReturnMode>,
    /// Feature normalization statistics: train (leak-free) or full
    #[arg(long)]
    pub norm_mode: Option<NormMode>,
    /// Shorthand for --return-mode paper-literal --norm-mode full
    #[arg(long)]
    pub paper_mode: bool,
    /// Chronological train fraction
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Longest lag in trading days
    #[arg(long)]
    pub max_lag: Option<usize>,
}

impl MarketOpts {
    fn return_mode(&self, cfg: &Config) -> Result<ReturnMode> {
        let paper = cfg.resolve_bool(self.paper_mode, "paper_mode")?;
        let default = if paper {
            ReturnMode::PaperLiteral
        } else {
            ReturnMode::Standard
        };
        cfg.resolve(self.return_mode, "return_mode", default)
    }

    fn norm_mode(&self, cfg: &Config) -> Result<NormMode> {
        let paper = cfg.resolve_bool(self.paper_mode, "paper_mode")?;
        let default = if paper {
            NormMode::FullAxis
        } else {
            NormMode::TrainOnly
        };
        cfg.resolve(self.norm_mode, "norm_mode", default)
    }

    fn train_fraction(&self, cfg: &Config) -> Result<f64> {
        let f = cfg.resolve(self.train_fraction, "train_fraction", 0.8)?;
        if !(f > 0.0 && f < 1.0) {
            return Err(CliError::usage(format!(
                "train fraction must be in (0, 1), got {f}"
            )));
        }
        Ok(f)
    }

    fn max_lag(&self, cfg: &Config) -> Result<usize> {
        let lag = cfg.resolve(self.max_lag, "max_lag", MAX_LAG)?;
        if !(1..=MAX_LAG).contains(&lag) {
            return Err(CliError::usage(format!(
                "max lag must be in 1..=5, got {lag}"
            )));
        }
        Ok(lag)
    }
}

#[derive(Debug, Args, Default, Clone)]
pub struct HyperOpts {
    /// SVM box constraint C
    #[arg(long)]
    pub c: Option<f64>,
    /// RBF kernel width (default 1 / feature count)
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lr_rate: Option<f64>,
    #[arg(long)]
    pub lr_epochs: Option<usize>,
    #[arg(long)]
    pub lr_l2: Option<f64>,
    #[arg(long)]
    pub smo_tol: Option<f64>,
    #[arg(long)]
    pub smo_max_iter: Option<usize>,
}

impl HyperOpts {
    fn hyperparams(&self, cfg: &Config) -> Result<Hyperparams> {
        let default = Hyperparams::default();
        let hp = Hyperparams {
            c: cfg.resolve(self.c, "c", default.c)?,
            gamma: cfg.resolve_opt(self.gamma, "gamma")?,
            lr_learning_rate: cfg.resolve(
                self.lr_rate,
                "lr_learning_rate",
                default.lr_learning_rate,
            )?,
            lr_epochs: cfg.resolve(self.lr_epochs, "lr_epochs", default.lr_epochs)?,
            lr_l2: cfg.resolve(self.lr_l2, "lr_l2", default.lr_l2)?,
            smo_tolerance: cfg.resolve(self.smo_tol, "smo_tolerance", default.smo_tolerance)?,
            smo_max_iter: cfg.resolve(self.smo_max_iter, "smo_max_iter", default.smo_max_iter)?,
        };
        hp.validate()?;
        Ok(hp)
    }
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of trading days
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub tweets_per_day: Option<usize>,
    #[arg(long)]
    pub nb_train_per_class: Option<usize>,
    /// Planted dependency, emotion:lag:target
    #[arg(long)]
    pub planted: Option<PlantedRule>,
    /// Gain of the planted dependency
    #[arg(long)]
    pub strength: Option<f64>,
}

pub fn cmd_synth(args: &SynthArgs, ctx: &Context) -> Result<()> {
    let out = ctx.path(&args.out, "out")?;
    let defaults = SynthConfig::default();
    let cfg = SynthConfig {
        seed: ctx.seed,
        days: ctx.config.resolve(args.days, "days", defaults.days)?,
        tweets_per_day: ctx.config.resolve(
            args.tweets_per_day,
            "tweets_per_day",
            defaults.tweets_per_day,
        )?,
        nb_train_per_class: ctx.config.resolve(
            args.nb_train_per_class,
            "nb_train_per_class",
            defaults.nb_train_per_class,
        )?,
        planted: ctx
            .config
            .resolve(args.planted, "planted", defaults.planted)?,
        strength: ctx
            .config
            .resolve(args.strength, "strength", defaults.strength)?,
        start: defaults.start,
    };
    let output = synth::generate(&cfg)?;

    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let mut guard = io::OutputGuard::new();
    let paths = [
        ("tweets.jsonl", io::tweets_to_jsonl(&output.tweets)),
        ("nb_train.jsonl", io::tweets_to_jsonl(&output.nb_train)),
        ("ohlcv.csv", io::ohlcv_to_csv(&output.ohlcv)),
        (
            "truth.json",
            format!(
                "{}\n",
                serde_json::to_string_pretty(&output.truth).map_err(|e| CliError::Json {
                    path: out.join("truth.json"),
                    source: e
                })?
            ),
        ),
    ];
    for (name, contents) in &paths {
        let path = out.join(name);
        io::write_atomic(&path, contents)?;
        guard.track(path);
    }
    let kw_path = out.join("keywords.txt");
    io::write_keywords(&kw_path, &output.keywords)?;
    guard.track(kw_path);
    let cal_path = out.join("calendar.txt");
    io::write_calendar(&cal_path, &output.calendar)?;
    guard.track(cal_path);
    guard.commit();

    println!(
        "synth: {} tweets over {} trading days, planted {}:{}:{} -> {}",
        output.tweets.len(),
        cfg.days,
        cfg.planted.emotion,
        cfg.planted.lag,
        cfg.planted.target,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Raw tweets (JSON-Lines)
    #[arg(long)]
    pub tweets: Option<PathBuf>,
    /// Keyword list, one per line (defaults to the six stock keywords)
    #[arg(long)]
    pub keywords: Option<PathBuf>,
    /// Filtered tweets output (JSON-Lines)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_ingest(args: &IngestArgs, ctx: &Context) -> Result<()> {
    let tweets = io::read_tweets(&ctx.path(&args.tweets, "tweets")?)?;
    let keywords = match &args.keywords {
        Some(p) => Some(p.clone()),
        None => ctx.config.get("keywords").map(PathBuf::from),
    };
    let filter = match keywords {
        Some(path) => io::read_keywords(&path)?,
        None => synth::default_keyword_filter(),
    };
    let out = ctx.path(&args.out, "out")?;
    let kept = filter_stock_tweets(&tweets, &filter);
    let mut guard = io::OutputGuard::new();
    io::write_tweets(&out, &kept)?;
    guard.track(&out);
    guard.commit();
    println!("ingest: kept {} of {} tweets", kept.len(), tweets.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// label
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Labelled corpus for training the Naive Bayes classifier
    #[arg(long)]
    pub nb_train: Option<PathBuf>,
    /// Tweets to label
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Labelled output (JSON-Lines)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Additive smoothing
    #[arg(long)]
    pub smoothing: Option<f64>,
}

pub fn cmd_label(args: &LabelArgs, ctx: &Context) -> Result<()> {
    let smoothing = ctx.config.resolve(args.smoothing, "smoothing", 1.0)?;
    let train = io::read_tweets(&ctx.path(&args.nb_train, "nb_train")?)?;
    let input = io::read_tweets(&ctx.path(&args.input, "input")?)?;
    let out = ctx.path(&args.out, "out")?;
    let tokenizer = BigramTokenizer;
    let model = train_nb(&train, smoothing, &tokenizer)?;

    let mut counts = [0usize; EMOTION_COUNT];
    let labelled: Vec<Tweet> = input
        .into_iter()
        .map(|mut t| {
            let label = classify(&model, &tokenizer, &t.text);
            counts[label.index()] += 1;
            t.label = Some(label);
            t
        })
        .collect();

    let mut guard = io::OutputGuard::new();
    io::write_tweets(&out, &labelled)?;
    guard.track(&out);
    guard.commit();

    let summary: Vec<String> = EmotionLabel::ALL
        .iter()
        .map(|e| format!("{e}={}", counts[e.index()]))
        .collect();
    println!("label: {} tweets ({})", labelled.len(), summary.join(", "));
    Ok(())
}

// ---------------------------------------------------------------------------
// series
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SeriesArgs {
    /// Labelled tweets (JSON-Lines)
    #[arg(long)]
    pub tweets: Option<PathBuf>,
    /// Trading calendar, one date per line
    #[arg(long)]
    pub calendar: Option<PathBuf>,
    /// Emotion series CSV output
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Forward-fill trading days without stock-relevant tweets instead of
    /// failing
    #[arg(long)]
    pub fill_forward: bool,
}

pub fn cmd_series(args: &SeriesArgs, ctx: &Context) -> Result<()> {
    let tweets = io::read_tweets(&ctx.path(&args.tweets, "tweets")?)?;
    let calendar = io::read_calendar(&ctx.path(&args.calendar, "calendar")?)?;
    let out = ctx.path(&args.out, "out")?;
    if tweets.is_empty() {
        return Err(CliError::usage("no tweets to aggregate"));
    }
    let fill_forward = ctx.config.resolve_bool(args.fill_forward, "fill_forward")?;

    let counts = aggregate_daily(&tweets)?;
    let mut dates = Vec::with_capacity(counts.len());
    let mut values = Vec::with_capacity(counts.len());
    for (date, day_counts) in &counts {
        dates.push(*date);
        values.push(to_proportions(day_counts)?);
    }
    let raw = EmotionSeries::new(dates, values)?;
    let on_calendar = drop_non_trading(&raw, &calendar);
    if on_calendar.is_empty() {
        return Err(CliError::usage("no tweets fall on trading days"));
    }

    // every trading day inside the covered span must have data
    let first = on_calendar.dates()[0];
    let last = *on_calendar.dates().last().unwrap();
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for day in calendar
        .days()
        .iter()
        .filter(|d| **d >= first && **d <= last)
    {
        match on_calendar.index_of(*day) {
            Some(i) => {
                dates.push(*day);
                values.push(on_calendar.values()[i]);
            }
            None if fill_forward => {
                let prev = *values.last().expect("first covered day always has data");
                dates.push(*day);
                values.push(prev);
            }
            None => {
                return Err(CliError::Core(emostock_core::Error::MissingDate(format!(
                    "trading day {day} has no labeled tweets (use --fill-forward to carry the previous day)"
                ))));
            }
        }
    }
    let series = EmotionSeries::new(dates, values)?;

    let mut guard = io::OutputGuard::new();
    io::write_emotion_series(&out, &series)?;
    guard.track(&out);
    guard.commit();
    println!(
        "series: {} trading days from {} to {}",
        series.len(),
        series.dates()[0],
        series.dates().last().unwrap()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// shared loading for analysis / training / evaluation
// ---------------------------------------------------------------------------

pub struct AlignedData {
    pub x: EmotionSeries,
    pub y: MarketSeries,
}

pub fn load_aligned(
    series_path: &Path,
    ohlcv_path: &Path,
    return_mode: ReturnMode,
) -> Result<AlignedData> {
    let x = io::read_emotion_series(series_path)?;
    let records = io::read_ohlcv(ohlcv_path)?;
    let y = compute_returns(&records, return_mode)?;
    let common = common_dates(&x, &y);
    if common.len() < MAX_LAG + 2 {
        return Err(CliError::usage(format!(
            "only {} common trading days between the series; need more",
            common.len()
        )));
    }
    Ok(AlignedData {
        x: x.subset(&common)?,
        y: y.subset(&common)?,
    })
}

fn split_point(n: usize, fraction: f64) -> Result<usize> {
    let raw = fraction * n as f64;
    let n_train = raw.ceil() as usize;
    if n_train == 0 || n_train >= n {
        return Err(CliError::usage(format!(
            "split of {n} rows at fraction {fraction} leaves an empty side"
        )));
    }
    Ok(n_train)
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Emotion series CSV
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// OHLCV CSV
    #[arg(long)]
    pub ohlcv: Option<PathBuf>,
    /// Analysis report CSV output
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Granger significance level
    #[arg(long)]
    pub significance: Option<f64>,
    /// Correlation flagging threshold on |rho|
    #[arg(long)]
    pub rho_threshold: Option<f64>,
    /// Number of correlation subsamples
    #[arg(long)]
    pub samples: Option<usize>,
    /// Subsample size (clamped to the available pairs)
    #[arg(long)]
    pub sample_size: Option<usize>,
    /// Number of shuffles for the baseline
    #[arg(long)]
    pub shuffles: Option<usize>,
    #[command(flatten)]
    pub market: MarketOpts,
}

pub fn cmd_analyze(args: &AnalyzeArgs, ctx: &Context) -> Result<()> {
    let return_mode = args.market.return_mode(&ctx.config)?;
    let fraction = args.market.train_fraction(&ctx.config)?;
    let max_lag = args.market.max_lag(&ctx.config)?;
    let out = ctx.path(&args.out, "out")?;
    let data = load_aligned(
        &ctx.path(&args.series, "series")?,
        &ctx.path(&args.ohlcv, "ohlcv")?,
        return_mode,
    )?;

    // the analysis axis: targets with all lags available, split chronologically
    let n = data.x.len();
    let axis_len = n - max_lag;
    let n_train_axis = split_point(axis_len, fraction)?;
    let train_slice_end = max_lag + n_train_axis;
    let train_dates = &data.x.dates()[..train_slice_end];
    let x_train = data.x.subset(train_dates)?;
    let y_train = data.y.subset(train_dates)?;

    let configured_sample = ctx
        .config
        .resolve(args.sample_size, "sample_size", 150usize)?;
    let sample_size = configured_sample.min(n_train_axis);
    if sample_size < configured_sample {
        println!(
            "analyze: note: sample size clamped from {configured_sample} to the {sample_size} available pairs"
        );
    }

    let opts = GridOptions {
        max_lag,
        n_samples: ctx.config.resolve(args.samples, "samples", 100usize)?,
        sample_size,
        n_shuffles: ctx.config.resolve(args.shuffles, "shuffles", 100usize)?,
        seed: derive_seed(ctx.seed, "analyze"),
        rho_threshold: ctx
            .config
            .resolve(args.rho_threshold, "rho_threshold", 0.2)?,
        significance: ctx
            .config
            .resolve(args.significance, "significance", 0.05)?,
    };
    let cells = analysis_grid(&x_train, &y_train, &opts)?;

    let mut guard = io::OutputGuard::new();
    io::write_analysis_csv(&out, &cells)?;
    guard.track(&out);
    guard.commit();

    println!(
        "analyze: {} cells over {} training pairs -> {}",
        cells.len(),
        n_train_axis,
        out.display()
    );
    print!("{}", io::analysis_summary(&cells));
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[arg(long)]
    pub ohlcv: Option<PathBuf>,
    /// Market attribute to predict
    #[arg(long)]
    pub target: Option<MarketTarget>,
    /// Classifier: lr, svm, or svm-es (svm with selected features)
    #[arg(long)]
    pub model: Option<String>,
    /// Feature selection: all, svmes, or a custom emotion:lag list
    #[arg(long)]
    pub features: Option<String>,
    /// Discretization: kmeans, equal_frequency, or sign
    #[arg(long)]
    pub discretize: Option<Method>,
    /// Model JSON output
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Small deterministic grid search over C and gamma (SVM) or learning
    /// rate and L2 (LR), scored by cross-validation
    #[arg(long)]
    pub grid: bool,
    #[arg(long)]
    pub folds: Option<usize>,
    #[command(flatten)]
    pub market: MarketOpts,
    #[command(flatten)]
    pub hyper: HyperOpts,
}

/// Parses `--model` plus `--features` into a model kind and feature mode.
pub fn model_selection(model: &str, features: Option<&str>) -> Result<(ModelKind, FeatureMode)> {
    let (kind, default_mode) = match model {
        "lr" => (ModelKind::Lr, FeatureMode::All),
        "svm" => (ModelKind::Svm, FeatureMode::All),
        "svm-es" | "svmes" => (ModelKind::Svm, FeatureMode::SvmEs),
        other => {
            return Err(CliError::usage(format!(
                "unknown model {other:?} (expected lr, svm, or svm-es)"
            )))
        }
    };
    let mode = match features {
        None => default_mode,
        Some("all") => FeatureMode::All,
        Some("svmes") | Some("svm-es") => FeatureMode::SvmEs,
        Some(custom) => FeatureMode::Custom(parse_feature_list(custom)?),
    };
    Ok((kind, mode))
}

fn parse_feature_list(s: &str) -> Result<FeatureSpec> {
    let mut pairs = Vec::new();
    for part in s.split(',') {
        let (emotion, lag) = part
            .trim()
            .split_once(':')
            .ok_or_else(|| CliError::usage(format!("feature {part:?} must be emotion:lag")))?;
        let emotion: EmotionLabel = emotion.parse()?;
        let lag: usize = lag
            .parse()
            .map_err(|_| CliError::usage(format!("bad lag in feature {part:?}")))?;
        pairs.push((emotion, lag));
    }
    FeatureSpec::new(pairs).map_err(CliError::from)
}

struct TrainSplit {
    train_dates: Vec<Date>,
    test_dates: Vec<Date>,
    train_targets: Vec<f64>,
    test_targets: Vec<f64>,
}

fn target_split(
    data: &AlignedData,
    target: MarketTarget,
    fraction: f64,
    max_lag: usize,
) -> Result<TrainSplit> {
    let axis = &data.x.dates()[max_lag..];
    let n_train = split_point(axis.len(), fraction)?;
    let (train_dates, test_dates) = axis.split_at(n_train);
    let column = data.y.column(target);
    let value_at = |d: &Date| -> f64 { column[data.y.index_of(*d).expect("aligned date")] };
    Ok(TrainSplit {
        train_dates: train_dates.to_vec(),
        test_dates: test_dates.to_vec(),
        train_targets: train_dates.iter().map(value_at).collect(),
        test_targets: test_dates.iter().map(value_at).collect(),
    })
}

fn grid_candidates(kind: ModelKind, base: &Hyperparams, d: usize) -> Vec<Hyperparams> {
    match kind {
        ModelKind::Svm => {
            let gammas = [0.25 / d as f64, 1.0 / d as f64, 4.0 / d as f64];
            let cs = [0.1, 1.0, 10.0, 100.0];
            let mut out = Vec::new();
            for &c in &cs {
                for &gamma in &gammas {
                    out.push(Hyperparams {
                        c,
                        gamma: Some(gamma),
                        ..base.clone()
                    });
                }
            }
            out
        }
        ModelKind::Lr => {
            let mut out = Vec::new();
            for &rate in &[0.1, 1.0] {
                for &l2 in &[1e-4, 1e-2] {
                    out.push(Hyperparams {
                        lr_learning_rate: rate,
                        lr_l2: l2,
                        ..base.clone()
                    });
                }
            }
            out
        }
    }
}

pub fn cmd_train(args: &TrainArgs, ctx: &Context) -> Result<()> {
    let return_mode = args.market.return_mode(&ctx.config)?;
    let norm_mode = args.market.norm_mode(&ctx.config)?;
    let fraction = args.market.train_fraction(&ctx.config)?;
    let max_lag = args.market.max_lag(&ctx.config)?;
    let method = ctx
        .config
        .resolve(args.discretize, "discretize", Method::Kmeans)?;
    let target = ctx
        .config
        .resolve_opt(args.target, "target")?
        .ok_or_else(|| CliError::usage("missing --target flag (or config key target)"))?;
    let model_name = ctx
        .config
        .resolve(args.model.clone(), "model", String::from("svm-es"))?;
    let features_arg = ctx.config.resolve_opt(args.features.clone(), "features")?;
    let (kind, feature_mode) = model_selection(&model_name, features_arg.as_deref())?;
    let mut hp = args.hyper.hyperparams(&ctx.config)?;
    let folds = ctx.config.resolve(args.folds, "folds", 5usize)?;
    let out = ctx.path(&args.out, "out")?;
    let grid = ctx.config.resolve_bool(args.grid, "grid")?;

    let data = load_aligned(
        &ctx.path(&args.series, "series")?,
        &ctx.path(&args.ohlcv, "ohlcv")?,
        return_mode,
    )?;
    let split = target_split(&data, target, fraction, max_lag)?;
    let spec = feature_mode.spec_for(target);

    if grid {
        let (train_labels, _) = fit_scheme(method, &split.train_targets)?;
        let features = build_features(&data.x, &spec, &split.train_dates)?;
        let ds = Dataset::new(split.train_dates.clone(), features, train_labels)?;
        let seed = derive_seed(ctx.seed, "train/grid");
        let mut best: Option<(f64, Hyperparams)> = None;
        for candidate in grid_candidates(kind, &hp, spec.len()) {
            let c = candidate.clone();
            let spec_cv = spec.clone();
            let report = kfold_cv(
                &ds,
                folds,
                move |fold| {
                    let scaler = FeatureScaler::fit(&fold.features)?;
                    Ok(Box::new(train_pipeline(fold, &spec_cv, kind, &c, scaler)?)
                        as Box<dyn Classifier>)
                },
                seed,
                CvMode::Shuffled,
            )?;
            let better = match &best {
                None => true,
                Some((acc, _)) => report.mean_accuracy > *acc,
            };
            if better {
                best = Some((report.mean_accuracy, candidate));
            }
        }
        let (acc, chosen) = best.expect("grid has candidates");
        println!(
            "train: grid search chose C={} gamma={:?} lr_rate={} lr_l2={} (cv accuracy {:.3})",
            chosen.c, chosen.gamma, chosen.lr_learning_rate, chosen.lr_l2, acc
        );
        hp = chosen;
    }

    let (outcome, model, scheme) = holdout_eval(
        &data.x,
        (&split.train_dates, &split.train_targets),
        (&split.test_dates, &split.test_targets),
        &spec,
        kind,
        method,
        &hp,
        norm_mode,
    )?;

    let file = io::ModelFile {
        target,
        method,
        scheme,
        model,
        seed: ctx.seed,
        train_rows: split.train_dates.len(),
        train_start: split.train_dates[0].to_string(),
        train_end: split.train_dates.last().unwrap().to_string(),
    };
    let mut guard = io::OutputGuard::new();
    io::write_model(&out, &file)?;
    guard.track(&out);
    guard.commit();

    println!(
        "train: {} {} ({} features, {} rows) holdout accuracy {:.3} -> {}",
        model_name,
        target,
        spec.len(),
        split.train_dates.len(),
        outcome.accuracy,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Serialized model(s); repeat for several targets
    #[arg(long)]
    pub model: Vec<PathBuf>,
    /// Emotion series CSV with the latest trading days
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// Predict for this series date instead of the upcoming day
    #[arg(long)]
    pub date: Option<Date>,
}

pub fn cmd_predict(args: &PredictArgs, ctx: &Context) -> Result<()> {
    let series = io::read_emotion_series(&ctx.path(&args.series, "series")?)?;
    let model_paths: Vec<PathBuf> = if args.model.is_empty() {
        match ctx.config.get("models") {
            Some(list) => list.split(',').map(|s| PathBuf::from(s.trim())).collect(),
            None => {
                return Err(CliError::usage(
                    "missing --model flag (or comma-separated config key models)",
                ))
            }
        }
    } else {
        args.model.clone()
    };
    println!("target,date,label");
    for model_path in &model_paths {
        let file = io::read_model(model_path)?;
        let spec = &file.model.spec;
        let (features, label_date) = match args.date {
            Some(d) => {
                if series.index_of(d).is_none() {
                    return Err(CliError::usage(format!(
                        "date {d} is not in the emotion series (omit --date to predict the upcoming day)"
                    )));
                }
                let m = build_features(&series, spec, &[d])?;
                (m.row(0).to_vec(), d.to_string())
            }
            None => {
                // upcoming day: lag t reads the t-th most recent trading day
                let n = series.len();
                let mut row = Vec::with_capacity(spec.len());
                for (emotion, lag) in spec.pairs() {
                    if *lag > n {
                        return Err(CliError::Core(emostock_core::Error::MissingDate(format!(
                            "no emotion data {lag} trading days before the upcoming day (series has {n})"
                        ))));
                    }
                    row.push(series.values()[n - lag][emotion.index()]);
                }
                (row, "next".to_string())
            }
        };
        let label = file.model.predict(&features)?;
        println!("{},{},{}", file.target, label_date, label);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[arg(long)]
    pub ohlcv: Option<PathBuf>,
    /// Output directory for report.csv, report.txt and confusions.json
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated 3-class discretization methods
    #[arg(long)]
    pub methods: Option<String>,
    /// Skip the 2-class sign block
    #[arg(long)]
    pub no_sign_block: bool,
    /// Skip the chronological holdout evaluation
    #[arg(long)]
    pub no_holdout: bool,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Fold construction: shuffled or blocked
    #[arg(long)]
    pub cv_mode: Option<CvMode>,
    #[command(flatten)]
    pub market: MarketOpts,
    #[command(flatten)]
    pub hyper: HyperOpts,
}

pub fn cmd_evaluate(args: &EvaluateArgs, ctx: &Context) -> Result<()> {
    let return_mode = args.market.return_mode(&ctx.config)?;
    let out = ctx.path(&args.out, "out")?;
    let data = load_aligned(
        &ctx.path(&args.series, "series")?,
        &ctx.path(&args.ohlcv, "ohlcv")?,
        return_mode,
    )?;

    let methods = match ctx.config.resolve_opt(args.methods.clone(), "methods")? {
        Some(list) => {
            let mut parsed = Vec::new();
            for item in list.split(',') {
                let method: Method = item.trim().parse()?;
                if method == Method::Sign {
                    return Err(CliError::usage(
                        "sign is the 2-class block; choose kmeans and/or equal_frequency",
                    ));
                }
                if !parsed.contains(&method) {
                    parsed.push(method);
                }
            }
            parsed
        }
        None => vec![Method::EqualFrequency, Method::Kmeans],
    };

    let cfg = ExperimentConfig {
        train_fraction: args.market.train_fraction(&ctx.config)?,
        folds: ctx.config.resolve(args.folds, "folds", 5usize)?,
        seed: derive_seed(ctx.seed, "evaluate"),
        hyper: args.hyper.hyperparams(&ctx.config)?,
        methods,
        with_sign_block: !ctx
            .config
            .resolve_bool(args.no_sign_block, "no_sign_block")?,
        with_holdout: !ctx.config.resolve_bool(args.no_holdout, "no_holdout")?,
        cv_mode: ctx
            .config
            .resolve(args.cv_mode, "cv_mode", CvMode::Shuffled)?,
        norm_mode: args.market.norm_mode(&ctx.config)?,
        max_lag: args.market.max_lag(&ctx.config)?,
    };
    let report = run_experiment(&data.x, &data.y, &cfg)?;

    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let mut guard = io::OutputGuard::new();
    let csv_path = out.join("report.csv");
    io::write_eval_csv(&csv_path, &report)?;
    guard.track(csv_path);
    let txt_path = out.join("report.txt");
    io::write_eval_text(&txt_path, &report)?;
    guard.track(txt_path);
    let json_path = out.join("confusions.json");
    io::write_confusions_json(&json_path, &report)?;
    guard.track(json_path);
    guard.commit();

    print!("{}", io::eval_to_text(&report));
    println!(
        "\nevaluate: {} cells -> {}",
        report.cells.len(),
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// odds and ends shared with tests
// ---------------------------------------------------------------------------

/// Splits an aligned pair chronologically; exposed for tests of the split
/// protocol.
pub fn chronological_split(
    x: &EmotionSeries,
    y: &MarketSeries,
    fraction: f64,
) -> Result<((EmotionSeries, MarketSeries), (EmotionSeries, MarketSeries))> {
    split_train_test(x, y, fraction).map_err(CliError::from)
}
