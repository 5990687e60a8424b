//! Cross-validation, holdout evaluation and the experiment matrix.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::date::Date;
use crate::discretize::{
    binarize_sign, equal_frequency, kmeans_1d_default, CategoryLabel, DiscretizationScheme, Method,
};
use crate::error::{Error, Result};
pub use crate::learn::Classifier;
use crate::learn::{
    build_features, svmes_feature_spec, train_logistic, train_svm, Dataset, FeatureScaler,
    FeatureSpec, Hyperparams, ModelKind, ModelParams, TrainedModel,
};
use crate::market::{MarketSeries, MarketTarget};
use crate::rng::{derive_seed, Rng};
use crate::timeseries::{EmotionSeries, MAX_LAG};

/// Fraction of exact matches between two label vectors.
pub fn accuracy(predicted: &[CategoryLabel], actual: &[CategoryLabel]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} predictions vs {} actuals",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::invalid("need at least one prediction"));
    }
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Confusion matrix over the union of observed classes (rows = actual).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Confusion {
    pub classes: Vec<CategoryLabel>,
    pub counts: Vec<Vec<usize>>,
}

impl Confusion {
    pub fn from_pairs(predicted: &[CategoryLabel], actual: &[CategoryLabel]) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(Error::invalid("length mismatch in confusion matrix"));
        }
        let mut classes: Vec<CategoryLabel> = predicted.iter().chain(actual).copied().collect();
        classes.sort_unstable();
        classes.dedup();
        let k = classes.len();
        let mut counts = alloc::vec![alloc::vec![0usize; k]; k];
        for (p, a) in predicted.iter().zip(actual) {
            let pi = classes.binary_search(p).unwrap();
            let ai = classes.binary_search(a).unwrap();
            counts[ai][pi] += 1;
        }
        Ok(Confusion { classes, counts })
    }

    pub fn total(&self) -> usize {
        self.counts
            .iter()
            .map(|row| row.iter().sum::<usize>())
            .sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }
}

/// How cross-validation folds are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CvMode {
    /// Rows shuffled once by seed (the protocol used throughout here).
    #[default]
    Shuffled,
    /// Contiguous chronological blocks, no shuffling.
    Blocked,
}

impl core::str::FromStr for CvMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shuffled" => Ok(CvMode::Shuffled),
            "blocked" => Ok(CvMode::Blocked),
            other => Err(Error::invalid(format!("unknown cv mode {other:?}"))),
        }
    }
}

/// One held-out fold result; `accuracy` is `None` when the training
/// complement was single-class (reported, never silently skipped).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FoldOutcome {
    pub size: usize,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CvReport {
    pub mean_accuracy: f64,
    pub folds: Vec<FoldOutcome>,
    pub degenerate_folds: usize,
}

/// k-fold cross-validation with fold sizes differing by at most one.
pub fn kfold_cv<F>(
    ds: &Dataset,
    k: usize,
    mut trainer: F,
    seed: u64,
    mode: CvMode,
) -> Result<CvReport>
where
    F: FnMut(&Dataset) -> Result<Box<dyn Classifier>>,
{
    let n = ds.len();
    if k < 2 {
        return Err(Error::invalid(format!("need k >= 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} rows cannot fill {k} folds")));
    }
    if ds.classes().len() < 2 {
        return Err(Error::invalid("single-class dataset"));
    }

    let mut order: Vec<usize> = (0..n).collect();
    if mode == CvMode::Shuffled {
        let mut rng = Rng::seed_from_u64(seed);
        rng.shuffle(&mut order);
    }

    let base = n / k;
    let rem = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0usize;
    for i in 0..k {
        let size = base + usize::from(i < rem);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }

    let mut outcomes = Vec::with_capacity(k);
    let mut degenerate = 0usize;
    for fold in &folds {
        let train_idx: Vec<usize> = order
            .iter()
            .copied()
            .filter(|i| !fold.contains(i))
            .collect();
        let train_ds = ds.select(&train_idx);
        if train_ds.classes().len() < 2 {
            degenerate += 1;
            outcomes.push(FoldOutcome {
                size: fold.len(),
                accuracy: None,
            });
            continue;
        }
        let model = trainer(&train_ds)?;
        let predicted: Vec<CategoryLabel> = fold
            .iter()
            .map(|&i| model.predict_label(ds.features.row(i)))
            .collect::<Result<_>>()?;
        let actual: Vec<CategoryLabel> = fold.iter().map(|&i| ds.labels[i]).collect();
        outcomes.push(FoldOutcome {
            size: fold.len(),
            accuracy: Some(accuracy(&predicted, &actual)?),
        });
    }

    let evaluated: Vec<f64> = outcomes.iter().filter_map(|o| o.accuracy).collect();
    if evaluated.is_empty() {
        return Err(Error::degenerate(
            "every fold had a single-class training complement",
        ));
    }
    Ok(CvReport {
        mean_accuracy: evaluated.iter().sum::<f64>() / evaluated.len() as f64,
        folds: outcomes,
        degenerate_folds: degenerate,
    })
}

/// Feature selection mode for a cell of the experiment matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureMode {
    All,
    SvmEs,
    Custom(FeatureSpec),
}

impl FeatureMode {
    pub fn spec_for(&self, target: MarketTarget) -> FeatureSpec {
        match self {
            FeatureMode::All => FeatureSpec::full(),
            FeatureMode::SvmEs => svmes_feature_spec(target),
            FeatureMode::Custom(spec) => spec.clone(),
        }
    }
}

/// Where normalization statistics come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormMode {
    /// Fitted on training rows only (leak-free default).
    #[default]
    TrainOnly,
    /// Fitted on the whole axis, train and test together (the leaky
    /// whole-series convention, kept for comparability).
    FullAxis,
}

impl core::str::FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" | "train_only" => Ok(NormMode::TrainOnly),
            "full" | "full_axis" => Ok(NormMode::FullAxis),
            other => Err(Error::invalid(format!(
                "unknown normalization mode {other:?}"
            ))),
        }
    }
}

/// Fits the discretization scheme on training target values.
pub fn fit_scheme(
    method: Method,
    train_values: &[f64],
) -> Result<(Vec<CategoryLabel>, DiscretizationScheme)> {
    match method {
        Method::Sign => Ok(binarize_sign(train_values)),
        Method::EqualFrequency => equal_frequency(train_values),
        Method::Kmeans => {
            let fit = kmeans_1d_default(train_values, 3)?;
            Ok((fit.labels, fit.scheme))
        }
    }
}

/// Trains a full pipeline model (scaler + classifier) on a dataset of raw
/// feature rows.
pub fn train_pipeline(
    ds: &Dataset,
    spec: &FeatureSpec,
    kind: ModelKind,
    hp: &Hyperparams,
    scaler: FeatureScaler,
) -> Result<TrainedModel> {
    let scaled = Dataset::new(
        ds.dates.clone(),
        scaler.transform(&ds.features),
        ds.labels.clone(),
    )?;
    let params = match kind {
        ModelKind::Lr => ModelParams::Lr(train_logistic(&scaled, hp)?),
        ModelKind::Svm => ModelParams::Svm(train_svm(&scaled, hp)?),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        scaler,
        params,
    })
}

/// A chronological holdout evaluation for one (target, model, scheme) cell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HoldoutOutcome {
    pub accuracy: f64,
    pub confusion: Confusion,
    pub train_rows: usize,
    pub test_rows: usize,
}

/// Fits the scheme and scaler on the training period only, trains the model
/// there, and evaluates on the chronologically later test period.
#[allow(clippy::too_many_arguments)]
pub fn holdout_eval(
    x_full: &EmotionSeries,
    train: (&[Date], &[f64]),
    test: (&[Date], &[f64]),
    spec: &FeatureSpec,
    kind: ModelKind,
    method: Method,
    hp: &Hyperparams,
    norm: NormMode,
) -> Result<(HoldoutOutcome, TrainedModel, DiscretizationScheme)> {
    let (train_dates, train_targets) = train;
    let (test_dates, test_targets) = test;
    if train_dates.is_empty() || test_dates.is_empty() {
        return Err(Error::invalid(
            "holdout requires non-empty train and test periods",
        ));
    }
    let max_train = train_dates.last().unwrap();
    let min_test = test_dates.first().unwrap();
    if max_train >= min_test {
        return Err(Error::invalid(format!(
            "train period must precede test period ({max_train} >= {min_test})"
        )));
    }

    let (train_labels, scheme) = fit_scheme(method, train_targets)?;
    let test_labels: Vec<CategoryLabel> = test_targets.iter().map(|v| scheme.apply(*v)).collect();

    let train_features = build_features(x_full, spec, train_dates)?;
    let test_features = build_features(x_full, spec, test_dates)?;

    let scaler = match norm {
        NormMode::TrainOnly => FeatureScaler::fit(&train_features)?,
        NormMode::FullAxis => {
            let mut all_rows: Vec<Vec<f64>> = (0..train_features.rows())
                .map(|r| train_features.row(r).to_vec())
                .collect();
            all_rows.extend((0..test_features.rows()).map(|r| test_features.row(r).to_vec()));
            FeatureScaler::fit(&crate::stats::Matrix::from_rows(&all_rows)?)?
        }
    };

    let train_ds = Dataset::new(train_dates.to_vec(), train_features, train_labels)?;
    let model = train_pipeline(&train_ds, spec, kind, hp, scaler)?;

    let predicted: Vec<CategoryLabel> = (0..test_features.rows())
        .map(|r| model.predict(test_features.row(r)))
        .collect::<Result<_>>()?;
    let confusion = Confusion::from_pairs(&predicted, &test_labels)?;
    let outcome = HoldoutOutcome {
        accuracy: accuracy(&predicted, &test_labels)?,
        confusion,
        train_rows: train_dates.len(),
        test_rows: test_dates.len(),
    };
    Ok((outcome, model, scheme))
}

/// Model column of the experiment matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelColumn {
    Lr,
    SvmAll,
    SvmEs,
}

impl ModelColumn {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelColumn::Lr => "lr",
            ModelColumn::SvmAll => "svm",
            ModelColumn::SvmEs => "svm-es",
        }
    }

    pub fn kind(self) -> ModelKind {
        match self {
            ModelColumn::Lr => ModelKind::Lr,
            _ => ModelKind::Svm,
        }
    }

    pub fn feature_mode(self) -> FeatureMode {
        match self {
            ModelColumn::SvmEs => FeatureMode::SvmEs,
            _ => FeatureMode::All,
        }
    }
}

impl core::fmt::Display for ModelColumn {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One cell of the experiment matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCell {
    pub target: MarketTarget,
    pub method: Method,
    pub model: ModelColumn,
    pub class_count: usize,
    pub cv: CvReport,
    pub holdout: Option<HoldoutOutcome>,
}

/// Result of the full experiment matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub cells: Vec<EvalCell>,
    pub train_rows: usize,
    pub test_rows: usize,
    pub folds: usize,
}

/// Configuration of the experiment matrix run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub train_fraction: f64,
    pub folds: usize,
    pub seed: u64,
    pub hyper: Hyperparams,
    /// 3-class discretization methods to evaluate.
    pub methods: Vec<Method>,
    /// Include the 2-class sign block for CLOSE and OPEN.
    pub with_sign_block: bool,
    pub with_holdout: bool,
    pub cv_mode: CvMode,
    pub norm_mode: NormMode,
    pub max_lag: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train_fraction: 0.8,
            folds: 5,
            seed: 0,
            hyper: Hyperparams::default(),
            methods: alloc::vec![Method::EqualFrequency, Method::Kmeans],
            with_sign_block: true,
            with_holdout: true,
            cv_mode: CvMode::Shuffled,
            norm_mode: NormMode::TrainOnly,
            max_lag: MAX_LAG,
        }
    }
}

/// Model columns for one (method, block) per the matrix layout: the
/// emotion-selected SVM runs under k-means (and the sign block), not under
/// equal frequency.
fn columns_for(method: Method) -> &'static [ModelColumn] {
    match method {
        Method::EqualFrequency => &[ModelColumn::Lr, ModelColumn::SvmAll],
        Method::Kmeans | Method::Sign => {
            &[ModelColumn::Lr, ModelColumn::SvmAll, ModelColumn::SvmEs]
        }
    }
}

/// Runs the experiment matrix: every configured (target, method, model) cell
/// gets 5-fold cross-validation on the training period and, optionally, a
/// chronological holdout evaluation.
///
/// Target dates are restricted to those with all `max_lag` lagged emotion
/// values available, so every model shares one axis.
pub fn run_experiment(
    x: &EmotionSeries,
    y: &MarketSeries,
    cfg: &ExperimentConfig,
) -> Result<EvalReport> {
    let axis = usable_axis(x, y, cfg.max_lag);
    if axis.len() < cfg.folds + 1 {
        return Err(Error::invalid(format!(
            "only {} usable target dates; need more than the {} folds",
            axis.len(),
            cfg.folds
        )));
    }
    let n_train = {
        let raw = cfg.train_fraction * axis.len() as f64;
        if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "train fraction must be in (0, 1), got {}",
                cfg.train_fraction
            )));
        }
        let floored = crate::math::floor(raw);
        (if raw > floored {
            floored + 1.0
        } else {
            floored
        }) as usize
    };
    if n_train == 0 || n_train >= axis.len() {
        return Err(Error::invalid("split leaves an empty train or test period"));
    }
    let (train_dates, test_dates) = axis.split_at(n_train);

    let mut cells = Vec::new();
    let mut blocks: Vec<(Method, usize)> = cfg.methods.iter().map(|m| (*m, 3)).collect();
    if cfg.with_sign_block {
        blocks.push((Method::Sign, 2));
    }

    for (method, class_count) in blocks {
        let sign_targets = [MarketTarget::Close, MarketTarget::Open];
        let targets: &[MarketTarget] = if method == Method::Sign {
            &sign_targets
        } else {
            &MarketTarget::ALL
        };
        for &target in targets {
            let column = y.column(target);
            let train_targets: Vec<f64> = train_dates
                .iter()
                .map(|d| column[y.index_of(*d).expect("axis date in market series")])
                .collect();
            let test_targets: Vec<f64> = test_dates
                .iter()
                .map(|d| column[y.index_of(*d).expect("axis date in market series")])
                .collect();

            for &model in columns_for(method) {
                let cell = run_cell(
                    x,
                    (train_dates, &train_targets),
                    (test_dates, &test_targets),
                    target,
                    method,
                    model,
                    class_count,
                    cfg,
                )
                .map_err(|e| Error::invalid(format!("cell {target}/{method}/{model}: {e}")))?;
                cells.push(cell);
            }
        }
    }

    Ok(EvalReport {
        cells,
        train_rows: train_dates.len(),
        test_rows: test_dates.len(),
        folds: cfg.folds,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    x_full: &EmotionSeries,
    train: (&[Date], &[f64]),
    test: (&[Date], &[f64]),
    target: MarketTarget,
    method: Method,
    model: ModelColumn,
    class_count: usize,
    cfg: &ExperimentConfig,
) -> Result<EvalCell> {
    let (train_dates, train_targets) = train;
    let spec = model.feature_mode().spec_for(target);
    let kind = model.kind();
    let hp = &cfg.hyper;

    let (train_labels, _scheme) = fit_scheme(method, train_targets)?;
    let train_features = build_features(x_full, &spec, train_dates)?;
    let train_ds = Dataset::new(train_dates.to_vec(), train_features, train_labels)?;

    // scaler policy inside CV: train-only mode refits per fold; the full-axis
    // mode reuses one scaler fitted on everything, matching its leak semantics
    let full_axis_scaler = match cfg.norm_mode {
        NormMode::FullAxis => {
            let test_features = build_features(x_full, &spec, test.0)?;
            let mut rows: Vec<Vec<f64>> = (0..train_ds.features.rows())
                .map(|r| train_ds.features.row(r).to_vec())
                .collect();
            rows.extend((0..test_features.rows()).map(|r| test_features.row(r).to_vec()));
            Some(FeatureScaler::fit(&crate::stats::Matrix::from_rows(
                &rows,
            )?)?)
        }
        NormMode::TrainOnly => None,
    };

    let seed = derive_seed(cfg.seed, &format!("cv/{method}/{target}/{model}"));
    let spec_for_folds = spec.clone();
    let cv = kfold_cv(
        &train_ds,
        cfg.folds,
        move |fold_train| {
            let scaler = match &full_axis_scaler {
                Some(s) => s.clone(),
                None => FeatureScaler::fit(&fold_train.features)?,
            };
            let model = train_pipeline(fold_train, &spec_for_folds, kind, hp, scaler)?;
            Ok(Box::new(model) as Box<dyn Classifier>)
        },
        seed,
        cfg.cv_mode,
    )?;

    let holdout = if cfg.with_holdout {
        let (outcome, _, _) =
            holdout_eval(x_full, train, test, &spec, kind, method, hp, cfg.norm_mode)?;
        Some(outcome)
    } else {
        None
    };

    Ok(EvalCell {
        target,
        method,
        model,
        class_count,
        cv,
        holdout,
    })
}

/// Dates shared by both series whose emotion index leaves room for all
/// `max_lag` lags.
pub fn usable_axis(x: &EmotionSeries, y: &MarketSeries, max_lag: usize) -> Vec<Date> {
    x.dates()
        .iter()
        .enumerate()
        .filter(|(i, d)| *i >= max_lag && y.index_of(**d).is_some())
        .map(|(_, d)| *d)
        .collect()
}
