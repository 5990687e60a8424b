//! Feature construction and the LR / SVM classifiers.

use alloc::format;
use alloc::vec::Vec;

use crate::date::Date;
use crate::discretize::CategoryLabel;
use crate::emotion::EmotionLabel;
use crate::error::{Error, Result};
use crate::market::MarketTarget;
use crate::math;
use crate::stats::Matrix;
use crate::timeseries::{EmotionSeries, MAX_LAG};

/// Ordered list of (emotion, lag) input attributes.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureSpec {
    pairs: Vec<(EmotionLabel, usize)>,
}

impl FeatureSpec {
    pub fn new(pairs: Vec<(EmotionLabel, usize)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("feature spec must be non-empty"));
        }
        for (e, lag) in &pairs {
            if !(1..=MAX_LAG).contains(lag) {
                return Err(Error::invalid(format!("lag {lag} for {e} out of 1..=5")));
            }
        }
        for (i, pair) in pairs.iter().enumerate() {
            if pairs[..i].contains(pair) {
                return Err(Error::invalid(format!(
                    "duplicate feature ({}, {})",
                    pair.0, pair.1
                )));
            }
        }
        Ok(FeatureSpec { pairs })
    }

    /// All five emotions at lags 1..=5 (25 attributes).
    pub fn full() -> Self {
        let pairs = EmotionLabel::ALL
            .into_iter()
            .flat_map(|e| (1..=MAX_LAG).map(move |lag| (e, lag)))
            .collect();
        FeatureSpec { pairs }
    }

    pub fn pairs(&self) -> &[(EmotionLabel, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn max_lag(&self) -> usize {
        self.pairs.iter().map(|(_, lag)| *lag).max().unwrap_or(0)
    }
}

/// The per-target attribute selections for the emotion-selected SVM.
pub fn svmes_feature_spec(target: MarketTarget) -> FeatureSpec {
    use EmotionLabel::{Disgust, Fear, Joy, Sadness};
    let pairs: Vec<(EmotionLabel, usize)> = match target {
        MarketTarget::Close => alloc::vec![(Disgust, 1), (Disgust, 2)],
        MarketTarget::Open => {
            let mut p: Vec<_> = (1..=5).map(|l| (Fear, l)).collect();
            p.extend((1..=5).map(|l| (Joy, l)));
            p.extend([(Disgust, 3), (Disgust, 4)]);
            p
        }
        MarketTarget::High => {
            let mut p: Vec<_> = (1..=4).map(|l| (Joy, l)).collect();
            p.extend((1..=3).map(|l| (Sadness, l)));
            p.push((Disgust, 5));
            p
        }
        MarketTarget::Low => {
            let mut p = alloc::vec![(Sadness, 1)];
            p.extend((1..=3).map(|l| (Joy, l)));
            p.push((Disgust, 5));
            p
        }
        MarketTarget::Volume => {
            let mut p: Vec<_> = (1..=5).map(|l| (Sadness, l)).collect();
            p.extend((1..=5).map(|l| (Fear, l)));
            p
        }
    };
    FeatureSpec { pairs }
}

/// Builds the feature matrix: column `j` at row `i` is the proportion of
/// `spec.pairs[j].0` at `spec.pairs[j].1` trading days before
/// `target_dates[i]`.
pub fn build_features(
    x: &EmotionSeries,
    spec: &FeatureSpec,
    target_dates: &[Date],
) -> Result<Matrix> {
    let mut out = Matrix::zeros(target_dates.len(), spec.len());
    for (i, date) in target_dates.iter().enumerate() {
        let idx = x.index_of(*date).ok_or_else(|| {
            Error::MissingDate(format!("target date {date} not in emotion series"))
        })?;
        for (j, (emotion, lag)) in spec.pairs.iter().enumerate() {
            if idx < *lag {
                return Err(Error::MissingDate(format!(
                    "no emotion data {lag} trading days before {date}"
                )));
            }
            out.set(i, j, x.values()[idx - lag][emotion.index()]);
        }
    }
    Ok(out)
}

/// Rows of features with their dates and category labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dates: Vec<Date>,
    pub features: Matrix,
    pub labels: Vec<CategoryLabel>,
}

impl Dataset {
    pub fn new(dates: Vec<Date>, features: Matrix, labels: Vec<CategoryLabel>) -> Result<Self> {
        if dates.len() != features.rows() || labels.len() != features.rows() {
            return Err(Error::invalid(format!(
                "{} dates, {} feature rows, {} labels",
                dates.len(),
                features.rows(),
                labels.len()
            )));
        }
        for r in 0..features.rows() {
            if features.row(r).iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite feature in row {r}")));
            }
        }
        Ok(Dataset {
            dates,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> Vec<CategoryLabel> {
        let mut classes = self.labels.clone();
        classes.sort_unstable();
        classes.dedup();
        classes
    }

    /// Row subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Matrix::zeros(indices.len(), self.features.cols());
        let mut dates = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            for c in 0..self.features.cols() {
                features.set(r, c, self.features.get(i, c));
            }
            dates.push(self.dates[i]);
            labels.push(self.labels[i]);
        }
        Dataset {
            dates,
            features,
            labels,
        }
    }
}

/// Per-column min-max statistics, fitted on training rows only unless the
/// whole-axis mode is requested.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureScaler {
    mins: Vec<f64>,
    ranges: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(features: &Matrix) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::invalid("cannot fit scaler on zero rows"));
        }
        let cols = features.cols();
        let mut mins = alloc::vec![f64::INFINITY; cols];
        let mut maxs = alloc::vec![f64::NEG_INFINITY; cols];
        for r in 0..features.rows() {
            for (c, v) in features.row(r).iter().enumerate() {
                mins[c] = mins[c].min(*v);
                maxs[c] = maxs[c].max(*v);
            }
        }
        let ranges = mins.iter().zip(&maxs).map(|(lo, hi)| hi - lo).collect();
        Ok(FeatureScaler { mins, ranges })
    }

    /// Identity scaler (used when inputs are already normalized).
    pub fn identity(cols: usize) -> Self {
        FeatureScaler {
            mins: alloc::vec![0.0; cols],
            ranges: alloc::vec![1.0; cols],
        }
    }

    pub fn cols(&self) -> usize {
        self.mins.len()
    }

    /// Constant columns map to 0.
    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(c, v)| {
                if self.ranges[c] > 0.0 {
                    (v - self.mins[c]) / self.ranges[c]
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn transform(&self, features: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(features.rows(), features.cols());
        for r in 0..features.rows() {
            for (c, v) in self.transform_row(features.row(r)).into_iter().enumerate() {
                out.set(r, c, v);
            }
        }
        out
    }
}

/// Training hyperparameters; none come from the source protocol, so all are
/// configurable with these defaults.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hyperparams {
    pub c: f64,
    /// RBF width; `None` means 1 / feature_count.
    pub gamma: Option<f64>,
    pub lr_learning_rate: f64,
    pub lr_epochs: usize,
    pub lr_l2: f64,
    pub smo_tolerance: f64,
    pub smo_max_iter: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            c: 1.0,
            gamma: None,
            lr_learning_rate: 1.0,
            lr_epochs: 2000,
            lr_l2: 1e-4,
            smo_tolerance: 1e-3,
            smo_max_iter: 100_000,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.c.is_nan() || self.c <= 0.0 {
            return Err(Error::invalid(format!("C must be > 0, got {}", self.c)));
        }
        if let Some(g) = self.gamma {
            if g.is_nan() || g <= 0.0 {
                return Err(Error::invalid(format!("gamma must be > 0, got {g}")));
            }
        }
        if self.lr_learning_rate.is_nan()
            || self.lr_learning_rate <= 0.0
            || self.lr_l2.is_nan()
            || self.lr_l2 < 0.0
        {
            return Err(Error::invalid("learning rate must be > 0 and l2 >= 0"));
        }
        if self.smo_tolerance.is_nan() || self.smo_tolerance <= 0.0 {
            return Err(Error::invalid("smo tolerance must be > 0"));
        }
        Ok(())
    }

    pub fn effective_gamma(&self, feature_count: usize) -> f64 {
        self.gamma.unwrap_or(1.0 / feature_count.max(1) as f64)
    }
}

/// Which classifier family to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModelKind {
    Lr,
    Svm,
}

impl core::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            ModelKind::Lr => "lr",
            ModelKind::Svm => "svm",
        })
    }
}

/// Anything that labels a scaled feature row.
pub trait Classifier {
    fn predict_label(&self, features: &[f64]) -> Result<CategoryLabel>;
}

// ---------------------------------------------------------------------------
// Multinomial logistic regression
// ---------------------------------------------------------------------------

/// Softmax regression parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LRModel {
    pub classes: Vec<CategoryLabel>,
    /// `[class][feature]`
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LRModel {
    fn scores(&self, features: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(features).map(|(wi, xi)| wi * xi).sum::<f64>())
            .collect()
    }

    /// Class probabilities (softmax over the decision scores).
    pub fn probabilities(&self, features: &[f64]) -> Vec<f64> {
        softmax(&self.scores(features))
    }
}

impl Classifier for LRModel {
    fn predict_label(&self, features: &[f64]) -> Result<CategoryLabel> {
        if self.classes.is_empty() || self.classes.len() != self.weights.len() {
            return Err(Error::invalid(
                "malformed model: class/weight shape mismatch",
            ));
        }
        if features.len() != self.weights[0].len() {
            return Err(Error::invalid(format!(
                "expected {} features, got {}",
                self.weights[0].len(),
                features.len()
            )));
        }
        let scores = self.scores(features);
        Ok(self.classes[argmax(&scores)])
    }
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| math::exp(s - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy of the softmax model plus an L2 penalty on the weights
/// (biases unpenalized), with its analytic gradient. `weights` is flattened
/// `[class * n_features + feature]`.
pub fn logistic_loss_grad(
    features: &Matrix,
    class_index: &[usize],
    n_classes: usize,
    weights: &[f64],
    bias: &[f64],
    l2: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let n = features.rows();
    let d = features.cols();
    debug_assert_eq!(weights.len(), n_classes * d);
    debug_assert_eq!(bias.len(), n_classes);

    let mut loss = 0.0;
    let mut grad_w = alloc::vec![0.0; n_classes * d];
    let mut grad_b = alloc::vec![0.0; n_classes];

    for r in 0..n {
        let row = features.row(r);
        let scores: Vec<f64> = (0..n_classes)
            .map(|c| {
                bias[c]
                    + weights[c * d..(c + 1) * d]
                        .iter()
                        .zip(row)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
            })
            .collect();
        let probs = softmax(&scores);
        loss -= math::ln(probs[class_index[r]].max(1e-300));
        for c in 0..n_classes {
            let delta = probs[c] - if c == class_index[r] { 1.0 } else { 0.0 };
            grad_b[c] += delta;
            for (j, x) in row.iter().enumerate() {
                grad_w[c * d + j] += delta * x;
            }
        }
    }

    let inv_n = 1.0 / n as f64;
    loss *= inv_n;
    for g in grad_b.iter_mut() {
        *g *= inv_n;
    }
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g * inv_n + l2 * w;
    }
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    (loss, grad_w, grad_b)
}

/// Trains multinomial logistic regression by full-batch gradient descent from
/// zero initialization.
pub fn train_logistic(ds: &Dataset, hp: &Hyperparams) -> Result<LRModel> {
    hp.validate()?;
    let classes = ds.classes();
    if classes.len() < 2 {
        return Err(Error::invalid("single-class dataset"));
    }
    let d = ds.features.cols();
    let k = classes.len();
    let class_index: Vec<usize> = ds
        .labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label in classes"))
        .collect();

    let mut weights = alloc::vec![0.0; k * d];
    let mut bias = alloc::vec![0.0; k];
    for _ in 0..hp.lr_epochs {
        let (_, grad_w, grad_b) =
            logistic_loss_grad(&ds.features, &class_index, k, &weights, &bias, hp.lr_l2);
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= hp.lr_learning_rate * g;
        }
        for (b, g) in bias.iter_mut().zip(&grad_b) {
            *b -= hp.lr_learning_rate * g;
        }
    }

    Ok(LRModel {
        classes,
        weights: (0..k)
            .map(|c| weights[c * d..(c + 1) * d].to_vec())
            .collect(),
        bias,
    })
}

// ---------------------------------------------------------------------------
// Soft-margin SVM via SMO
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum KernelKind {
    Rbf { gamma: f64 },
    Linear,
}

impl KernelKind {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelKind::Rbf { gamma } => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                math::exp(-gamma * sq)
            }
            KernelKind::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        }
    }
}

/// One trained binary machine: its support vectors, signed dual coefficients
/// and bias.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinarySvm {
    pub kernel: KernelKind,
    pub sv_coef: Vec<f64>,
    pub sv_rows: Vec<Vec<f64>>,
    pub bias: f64,
}

impl BinarySvm {
    /// Decision value f(x) = sum_i alpha_i y_i K(x_i, x) + b.
    pub fn decision(&self, features: &[f64]) -> f64 {
        self.sv_coef
            .iter()
            .zip(&self.sv_rows)
            .map(|(coef, row)| coef * self.kernel.eval(row, features))
            .sum::<f64>()
            + self.bias
    }
}

/// Solver byproducts kept for diagnostics and optimality checks.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmoDiagnostics {
    pub alpha: Vec<f64>,
    pub dual_objective_history: Vec<f64>,
    pub iterations: usize,
    pub final_gap: f64,
}

fn smo_solve(
    rows: &[&[f64]],
    labels: &[f64],
    kernel: KernelKind,
    c: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, SmoDiagnostics)> {
    let n = rows.len();
    debug_assert!(n >= 2);
    // dense kernel cache; training sets here are small
    let mut q = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = kernel.eval(rows[i], rows[j]) * labels[i] * labels[j];
            q[i * n + j] = k;
            q[j * n + i] = k;
        }
    }

    let mut alpha = alloc::vec![0.0; n];
    let mut grad = alloc::vec![-1.0; n]; // gradient of 1/2 a'Qa - e'a
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut gap = f64::INFINITY;

    loop {
        // maximal violating pair
        let mut i_up = None;
        let mut m_up = f64::NEG_INFINITY;
        let mut j_low = None;
        let mut m_low = f64::INFINITY;
        for t in 0..n {
            let v = -labels[t] * grad[t];
            let in_up = (labels[t] > 0.0 && alpha[t] < c) || (labels[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (labels[t] < 0.0 && alpha[t] < c) || (labels[t] > 0.0 && alpha[t] > 0.0);
            if in_up && v > m_up {
                m_up = v;
                i_up = Some(t);
            }
            if in_low && v < m_low {
                m_low = v;
                j_low = Some(t);
            }
        }
        let (i, j) = match (i_up, j_low) {
            (Some(i), Some(j)) => (i, j),
            _ => break, // box is one-sided; optimal
        };
        gap = m_up - m_low;
        if gap <= tol {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::NoConvergence(format!(
                "SMO exceeded {max_iter} iterations (violation gap {gap:.3e}, tolerance {tol:.1e})"
            )));
        }
        iterations += 1;

        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        let tau = 1e-12;
        if labels[i] != labels[j] {
            let quad = (q[i * n + i] + q[j * n + j] + 2.0 * q[i * n + j]).max(tau);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q[i * n + i] + q[j * n + j] - 2.0 * q[i * n + j]).max(tau);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (d_i, d_j) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for t in 0..n {
            grad[t] += q[t * n + i] * d_i + q[t * n + j] * d_j;
        }
        // dual objective e'a - 1/2 a'Qa, cheap via the maintained gradient
        let dual: f64 = alpha
            .iter()
            .zip(&grad)
            .map(|(a, g)| 0.5 * a * (1.0 - g))
            .sum();
        history.push(dual);
    }

    // bias from the midpoint of the optimality bracket
    let mut m_up = f64::NEG_INFINITY;
    let mut m_low = f64::INFINITY;
    for t in 0..n {
        let v = -labels[t] * grad[t];
        if (labels[t] > 0.0 && alpha[t] < c) || (labels[t] < 0.0 && alpha[t] > 0.0) {
            m_up = m_up.max(v);
        }
        if (labels[t] < 0.0 && alpha[t] < c) || (labels[t] > 0.0 && alpha[t] > 0.0) {
            m_low = m_low.min(v);
        }
    }
    let bias = if m_up.is_finite() && m_low.is_finite() {
        (m_up + m_low) / 2.0
    } else if m_up.is_finite() {
        m_up
    } else {
        m_low
    };

    let final_gap = if m_up.is_finite() && m_low.is_finite() {
        m_up - m_low
    } else {
        gap
    };
    Ok((
        alpha.clone(),
        bias,
        SmoDiagnostics {
            alpha,
            dual_objective_history: history,
            iterations,
            final_gap,
        },
    ))
}

/// A one-vs-one machine between two classes; `pos` is the +1 side.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairMachine {
    pub pos: CategoryLabel,
    pub neg: CategoryLabel,
    pub svm: BinarySvm,
    #[cfg_attr(feature = "serde", serde(skip, default))]
    pub row_indices: Vec<usize>,
    #[cfg_attr(feature = "serde", serde(skip, default))]
    pub diagnostics: SmoDiagnostics,
}

/// One-vs-one multiclass SVM.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SVMModel {
    pub classes: Vec<CategoryLabel>,
    pub c: f64,
    pub machines: Vec<PairMachine>,
}

impl SVMModel {
    pub fn feature_count(&self) -> usize {
        self.machines
            .first()
            .and_then(|m| m.svm.sv_rows.first())
            .map_or(0, |r| r.len())
    }
}

impl Classifier for SVMModel {
    fn predict_label(&self, features: &[f64]) -> Result<CategoryLabel> {
        if self.classes.is_empty() || self.machines.is_empty() {
            return Err(Error::invalid("malformed model: no classes or machines"));
        }
        let expected = self.feature_count();
        if expected != 0 && features.len() != expected {
            return Err(Error::invalid(format!(
                "expected {expected} features, got {}",
                features.len()
            )));
        }
        let k = self.classes.len();
        let mut votes = alloc::vec![0usize; k];
        let mut aggregate = alloc::vec![0.0f64; k];
        for machine in &self.machines {
            let d = machine.svm.decision(features);
            let class_index = |label: CategoryLabel| {
                self.classes
                    .iter()
                    .position(|c| *c == label)
                    .ok_or_else(|| {
                        Error::invalid(format!("malformed model: machine references class {label}"))
                    })
            };
            let pos_idx = class_index(machine.pos)?;
            let neg_idx = class_index(machine.neg)?;
            if d >= 0.0 {
                votes[pos_idx] += 1;
            } else {
                votes[neg_idx] += 1;
            }
            aggregate[pos_idx] += d;
            aggregate[neg_idx] -= d;
        }
        // majority vote; ties toward the larger aggregate decision value,
        // then the earlier label
        let mut best = 0usize;
        for i in 1..k {
            if votes[i] > votes[best] || (votes[i] == votes[best] && aggregate[i] > aggregate[best])
            {
                best = i;
            }
        }
        Ok(self.classes[best])
    }
}

/// Trains a soft-margin SVM (RBF by default) with one binary machine per
/// class pair.
pub fn train_svm(ds: &Dataset, hp: &Hyperparams) -> Result<SVMModel> {
    train_svm_with_kernel(
        ds,
        hp,
        KernelKind::Rbf {
            gamma: hp.effective_gamma(ds.features.cols()),
        },
    )
}

pub fn train_svm_with_kernel(
    ds: &Dataset,
    hp: &Hyperparams,
    kernel: KernelKind,
) -> Result<SVMModel> {
    hp.validate()?;
    let classes = ds.classes();
    if classes.len() < 2 {
        return Err(Error::invalid("single-class dataset"));
    }

    let mut machines = Vec::new();
    for (ai, &pos) in classes.iter().enumerate() {
        for &neg in &classes[ai + 1..] {
            let row_indices: Vec<usize> = (0..ds.len())
                .filter(|&r| ds.labels[r] == pos || ds.labels[r] == neg)
                .collect();
            let rows: Vec<&[f64]> = row_indices.iter().map(|&r| ds.features.row(r)).collect();
            let labels: Vec<f64> = row_indices
                .iter()
                .map(|&r| if ds.labels[r] == pos { 1.0 } else { -1.0 })
                .collect();
            let (alpha, bias, diagnostics) = smo_solve(
                &rows,
                &labels,
                kernel,
                hp.c,
                hp.smo_tolerance,
                hp.smo_max_iter,
            )?;

            let mut sv_coef = Vec::new();
            let mut sv_rows = Vec::new();
            for (t, &a) in alpha.iter().enumerate() {
                if a > 0.0 {
                    sv_coef.push(a * labels[t]);
                    sv_rows.push(rows[t].to_vec());
                }
            }
            machines.push(PairMachine {
                pos,
                neg,
                svm: BinarySvm {
                    kernel,
                    sv_coef,
                    sv_rows,
                    bias,
                },
                row_indices,
                diagnostics,
            });
        }
    }
    Ok(SVMModel {
        classes,
        c: hp.c,
        machines,
    })
}

// ---------------------------------------------------------------------------
// Trained pipeline model
// ---------------------------------------------------------------------------

/// Classifier parameters of either family.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ModelParams {
    Lr(LRModel),
    Svm(SVMModel),
}

/// A trained model together with the feature spec it consumes and the
/// normalization statistics fitted during training.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainedModel {
    pub spec: FeatureSpec,
    pub scaler: FeatureScaler,
    pub params: ModelParams,
}

impl TrainedModel {
    /// Predicts from a raw (unscaled) feature row in spec order.
    pub fn predict(&self, features: &[f64]) -> Result<CategoryLabel> {
        if features.len() != self.spec.len() {
            return Err(Error::invalid(format!(
                "expected {} features, got {}",
                self.spec.len(),
                features.len()
            )));
        }
        let scaled = self.scaler.transform_row(features);
        match &self.params {
            ModelParams::Lr(m) => m.predict_label(&scaled),
            ModelParams::Svm(m) => m.predict_label(&scaled),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::Lr(_) => ModelKind::Lr,
            ModelParams::Svm(_) => ModelKind::Svm,
        }
    }
}

impl Classifier for TrainedModel {
    fn predict_label(&self, features: &[f64]) -> Result<CategoryLabel> {
        self.predict(features)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::date::date;
    use crate::rng::Rng;
    use crate::timeseries::EmotionSeries;

    fn tiny_series(n: usize) -> EmotionSeries {
        let dates: Vec<Date> = (0..n).map(|i| date(2015, 3, 1 + i as u8)).collect();
        let values: Vec<[f64; 5]> = (0..n)
            .map(|i| {
                let a = 0.1 + 0.01 * i as f64;
                let rest = (1.0 - a) / 4.0;
                [a, rest, rest, rest, rest]
            })
            .collect();
        EmotionSeries::new(dates, values).unwrap()
    }

    #[test]
    fn full_spec_has_25_columns() {
        let spec = FeatureSpec::full();
        assert_eq!(spec.len(), 25);
        let series = tiny_series(10);
        let features = build_features(&series, &spec, &series.dates()[5..]).unwrap();
        assert_eq!(features.cols(), 25);
        assert_eq!(features.rows(), 5);
    }

    #[test]
    fn svmes_specs_match_selection_table() {
        use EmotionLabel::*;
        let close = svmes_feature_spec(MarketTarget::Close);
        assert_eq!(close.pairs(), &[(Disgust, 1), (Disgust, 2)]);

        let open = svmes_feature_spec(MarketTarget::Open);
        assert_eq!(open.len(), 12);
        assert!(open.pairs().contains(&(Fear, 5)));
        assert!(open.pairs().contains(&(Joy, 1)));
        assert!(open.pairs().contains(&(Disgust, 3)));
        assert!(!open.pairs().contains(&(Disgust, 1)));

        let high = svmes_feature_spec(MarketTarget::High);
        assert_eq!(high.len(), 8);
        let low = svmes_feature_spec(MarketTarget::Low);
        assert_eq!(low.len(), 5);
        let volume = svmes_feature_spec(MarketTarget::Volume);
        assert_eq!(volume.len(), 10);

        // anger is never selected
        for target in MarketTarget::ALL {
            assert!(svmes_feature_spec(target)
                .pairs()
                .iter()
                .all(|(e, _)| *e != Anger));
        }
    }

    #[test]
    fn build_features_values_and_errors() {
        let series = tiny_series(8);
        let spec = FeatureSpec::new(alloc::vec![
            (EmotionLabel::Anger, 1),
            (EmotionLabel::Anger, 2),
            (EmotionLabel::Disgust, 3),
        ])
        .unwrap();
        let target = [series.dates()[5]];
        let features = build_features(&series, &spec, &target).unwrap();
        assert_eq!((features.rows(), features.cols()), (1, 3));
        assert_eq!(features.get(0, 0), series.values()[4][0]);
        assert_eq!(features.get(0, 1), series.values()[3][0]);
        assert_eq!(features.get(0, 2), series.values()[2][1]);

        // lag reaches before the series start
        let early = [series.dates()[1]];
        let err = build_features(&series, &spec, &early).unwrap_err();
        assert!(matches!(err, Error::MissingDate(ref m) if m.contains("2015-03-02")));

        // unknown target date
        let missing = [date(2016, 1, 1)];
        assert!(matches!(
            build_features(&series, &spec, &missing),
            Err(Error::MissingDate(_))
        ));
    }

    #[test]
    fn feature_spec_rejects_duplicates_and_bad_lags() {
        assert!(FeatureSpec::new(alloc::vec![]).is_err());
        assert!(FeatureSpec::new(alloc::vec![(EmotionLabel::Joy, 0)]).is_err());
        assert!(FeatureSpec::new(alloc::vec![(EmotionLabel::Joy, 6)]).is_err());
        assert!(
            FeatureSpec::new(alloc::vec![(EmotionLabel::Joy, 1), (EmotionLabel::Joy, 1)]).is_err()
        );
    }

    fn blob_dataset(rng: &mut Rng, n_per: usize, centers: &[(f64, f64, CategoryLabel)]) -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for &(cx, cy, label) in centers {
            for _ in 0..n_per {
                rows.push(alloc::vec![
                    rng.normal_with(cx, 0.1),
                    rng.normal_with(cy, 0.1)
                ]);
                labels.push(label);
            }
        }
        let n = rows.len();
        // dates are irrelevant here; fabricate a monotone axis
        let dates: Vec<Date> = (0..n)
            .map(|i| date(2015, (i / 28) as u8 + 1, (i % 28) as u8 + 1))
            .collect();
        Dataset::new(dates, Matrix::from_rows(&rows).unwrap(), labels).unwrap()
    }

    #[test]
    fn lr_separable_blobs() {
        let mut rng = Rng::seed_from_u64(1);
        let ds = blob_dataset(&mut rng, 100, &[(0.0, 0.0, 0), (2.0, 2.0, 1)]);
        let model = train_logistic(&ds, &Hyperparams::default()).unwrap();
        let correct = (0..ds.len())
            .filter(|&r| model.predict_label(ds.features.row(r)).unwrap() == ds.labels[r])
            .count();
        assert!(correct as f64 / ds.len() as f64 >= 0.99);
    }

    #[test]
    fn lr_gradient_matches_finite_differences() {
        let mut rng = Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..4).map(|_| rng.normal()).collect())
            .collect();
        let features = Matrix::from_rows(&rows).unwrap();
        let class_index: Vec<usize> = (0..30).map(|_| rng.index(3)).collect();
        let weights: Vec<f64> = (0..12).map(|_| rng.normal_with(0.0, 0.5)).collect();
        let bias: Vec<f64> = (0..3).map(|_| rng.normal_with(0.0, 0.5)).collect();
        let l2 = 0.01;

        let (_, grad_w, grad_b) =
            logistic_loss_grad(&features, &class_index, 3, &weights, &bias, l2);

        let h = 1e-6;
        let mut max_rel = 0.0f64;
        for p in 0..weights.len() {
            let mut wp = weights.clone();
            wp[p] += h;
            let (lp, _, _) = logistic_loss_grad(&features, &class_index, 3, &wp, &bias, l2);
            wp[p] -= 2.0 * h;
            let (lm, _, _) = logistic_loss_grad(&features, &class_index, 3, &wp, &bias, l2);
            let fd = (lp - lm) / (2.0 * h);
            let rel = (fd - grad_w[p]).abs() / grad_w[p].abs().max(1e-8);
            max_rel = max_rel.max(rel);
        }
        for p in 0..bias.len() {
            let mut bp = bias.clone();
            bp[p] += h;
            let (lp, _, _) = logistic_loss_grad(&features, &class_index, 3, &weights, &bp, l2);
            bp[p] -= 2.0 * h;
            let (lm, _, _) = logistic_loss_grad(&features, &class_index, 3, &weights, &bp, l2);
            let fd = (lp - lm) / (2.0 * h);
            let rel = (fd - grad_b[p]).abs() / grad_b[p].abs().max(1e-8);
            max_rel = max_rel.max(rel);
        }
        assert!(max_rel <= 1e-6, "max relative error {max_rel}");
    }

    #[test]
    fn lr_duplicated_rows_give_identical_predictions() {
        let mut rng = Rng::seed_from_u64(4);
        let ds = blob_dataset(
            &mut rng,
            30,
            &[(0.0, 0.0, -1), (1.5, 0.5, 0), (0.5, 2.0, 1)],
        );
        let doubled_indices: Vec<usize> = (0..ds.len()).chain(0..ds.len()).collect();
        let doubled = ds.select(&doubled_indices);

        let hp = Hyperparams {
            lr_epochs: 500,
            ..Hyperparams::default()
        };
        let a = train_logistic(&ds, &hp).unwrap();
        let b = train_logistic(&doubled, &hp).unwrap();
        for r in 0..ds.len() {
            assert_eq!(
                a.predict_label(ds.features.row(r)).unwrap(),
                b.predict_label(ds.features.row(r)).unwrap()
            );
        }
    }

    #[test]
    fn lr_zero_weights_pick_max_bias_with_label_order_ties() {
        let model = LRModel {
            classes: alloc::vec![-1, 0, 1],
            weights: alloc::vec![alloc::vec![0.0; 2]; 3],
            bias: alloc::vec![0.3, 0.7, 0.7],
        };
        // bias ties between classes 0 and 1; earlier label wins
        assert_eq!(model.predict_label(&[5.0, -3.0]).unwrap(), 0);
        let model2 = LRModel {
            bias: alloc::vec![0.3, 0.2, 0.9],
            ..model
        };
        assert_eq!(model2.predict_label(&[1.0, 1.0]).unwrap(), 1);
    }

    #[test]
    fn lr_single_class_errors() {
        let ds = Dataset::new(
            alloc::vec![date(2015, 1, 1), date(2015, 1, 2)],
            Matrix::from_rows(&[alloc::vec![0.0], alloc::vec![1.0]]).unwrap(),
            alloc::vec![1, 1],
        )
        .unwrap();
        assert!(train_logistic(&ds, &Hyperparams::default()).is_err());
        assert!(train_svm(&ds, &Hyperparams::default()).is_err());
    }

    fn xor_dataset(rng: &mut Rng, n_per: usize) -> Dataset {
        blob_dataset(
            rng,
            n_per,
            &[(0.0, 0.0, 0), (1.0, 1.0, 0), (0.0, 1.0, 1), (1.0, 0.0, 1)],
        )
    }

    #[test]
    fn svm_rbf_solves_xor() {
        let mut rng = Rng::seed_from_u64(2);
        let ds = xor_dataset(&mut rng, 50);
        let hp = Hyperparams {
            c: 10.0,
            gamma: Some(1.0),
            ..Hyperparams::default()
        };
        let model = train_svm(&ds, &hp).unwrap();
        let correct = (0..ds.len())
            .filter(|&r| model.predict_label(ds.features.row(r)).unwrap() == ds.labels[r])
            .count();
        assert!(
            correct as f64 / ds.len() as f64 >= 0.95,
            "xor accuracy {}",
            correct as f64 / ds.len() as f64
        );
    }

    /// Max KKT violation of a trained pair machine over its training rows.
    fn max_kkt_violation(ds: &Dataset, machine: &PairMachine, c: f64) -> f64 {
        let mut worst = 0.0f64;
        for (pos_in_subset, &row) in machine.row_indices.iter().enumerate() {
            let alpha = machine.diagnostics.alpha[pos_in_subset];
            let y = if ds.labels[row] == machine.pos {
                1.0
            } else {
                -1.0
            };
            let margin = y * machine.svm.decision(ds.features.row(row));
            let violation = if alpha <= 0.0 {
                (1.0 - margin).max(0.0) // need margin >= 1
            } else if alpha >= c {
                (margin - 1.0).max(0.0) // need margin <= 1
            } else {
                (margin - 1.0).abs() // free SV: margin == 1
            };
            worst = worst.max(violation);
        }
        worst
    }

    #[test]
    fn svm_kkt_conditions_hold_on_separable_data() {
        let mut rng = Rng::seed_from_u64(6);
        let ds = blob_dataset(&mut rng, 60, &[(0.0, 0.0, 0), (3.0, 3.0, 1)]);
        let hp = Hyperparams {
            c: 1e3,
            gamma: Some(0.5),
            ..Hyperparams::default()
        };
        let model = train_svm(&ds, &hp).unwrap();
        assert_eq!(model.machines.len(), 1);
        let machine = &model.machines[0];

        // equality constraint sum(alpha_i y_i) = 0
        let balance: f64 = machine
            .row_indices
            .iter()
            .enumerate()
            .map(|(k, &row)| {
                let y = if ds.labels[row] == machine.pos {
                    1.0
                } else {
                    -1.0
                };
                machine.diagnostics.alpha[k] * y
            })
            .sum();
        assert!(balance.abs() < 1e-6, "sum alpha_i y_i = {balance}");

        let viol = max_kkt_violation(&ds, machine, hp.c);
        assert!(viol <= hp.smo_tolerance, "max KKT violation {viol}");
    }

    #[test]
    fn svm_dual_objective_is_monotone() {
        let mut rng = Rng::seed_from_u64(12);
        let ds = xor_dataset(&mut rng, 40);
        let hp = Hyperparams {
            c: 5.0,
            gamma: Some(1.5),
            ..Hyperparams::default()
        };
        let model = train_svm(&ds, &hp).unwrap();
        for machine in &model.machines {
            let hist = &machine.diagnostics.dual_objective_history;
            assert!(!hist.is_empty());
            for w in hist.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "dual decreased: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn svm_three_class_voting_recovers_training_labels() {
        let mut rng = Rng::seed_from_u64(10);
        let ds = blob_dataset(
            &mut rng,
            40,
            &[(0.0, 0.0, -1), (3.0, 0.0, 0), (0.0, 3.0, 1)],
        );
        let hp = Hyperparams {
            c: 10.0,
            gamma: Some(1.0),
            ..Hyperparams::default()
        };
        let model = train_svm(&ds, &hp).unwrap();
        assert_eq!(model.machines.len(), 3);
        for r in 0..ds.len() {
            assert_eq!(
                model.predict_label(ds.features.row(r)).unwrap(),
                ds.labels[r]
            );
        }
    }

    #[test]
    fn svm_predicts_own_support_vector_label_when_separable() {
        let mut rng = Rng::seed_from_u64(15);
        let ds = blob_dataset(&mut rng, 30, &[(0.0, 0.0, 0), (4.0, 4.0, 1)]);
        let hp = Hyperparams {
            c: 100.0,
            gamma: Some(0.5),
            ..Hyperparams::default()
        };
        let model = train_svm(&ds, &hp).unwrap();
        let machine = &model.machines[0];
        for (k, &row) in machine.row_indices.iter().enumerate() {
            if machine.diagnostics.alpha[k] > 0.0 {
                assert_eq!(
                    model.predict_label(ds.features.row(row)).unwrap(),
                    ds.labels[row]
                );
            }
        }
    }

    #[test]
    fn svm_training_is_deterministic() {
        let mut rng = Rng::seed_from_u64(33);
        let ds = xor_dataset(&mut rng, 30);
        let hp = Hyperparams {
            c: 2.0,
            ..Hyperparams::default()
        };
        let a = train_svm(&ds, &hp).unwrap();
        let b = train_svm(&ds, &hp).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scaler_train_only_statistics() {
        let features = Matrix::from_rows(&[
            alloc::vec![0.2, 5.0],
            alloc::vec![0.4, 5.0],
            alloc::vec![0.6, 5.0],
        ])
        .unwrap();
        let scaler = FeatureScaler::fit(&features).unwrap();
        assert_eq!(scaler.transform_row(&[0.2, 5.0]), alloc::vec![0.0, 0.0]);
        assert_eq!(scaler.transform_row(&[0.6, 5.0]), alloc::vec![1.0, 0.0]);
        // values outside the fitted range extrapolate linearly
        let out = scaler.transform_row(&[0.8, 5.0]);
        assert!((out[0] - 1.5).abs() < 1e-12);
        assert_eq!(out[1], 0.0);
    }

    #[test]
    fn lr_decision_invariant_under_constant_bias_shift() {
        let mut rng = Rng::seed_from_u64(19);
        let ds = blob_dataset(
            &mut rng,
            25,
            &[(0.0, 0.0, -1), (1.0, 1.0, 0), (2.0, 0.0, 1)],
        );
        let base = train_logistic(
            &ds,
            &Hyperparams {
                lr_epochs: 300,
                ..Hyperparams::default()
            },
        )
        .unwrap();
        let shifted = LRModel {
            bias: base.bias.iter().map(|b| b + 17.5).collect(),
            ..base.clone()
        };
        for r in 0..ds.len() {
            assert_eq!(
                base.predict_label(ds.features.row(r)).unwrap(),
                shifted.predict_label(ds.features.row(r)).unwrap()
            );
        }
    }

    #[test]
    fn softmax_probabilities_sum_to_one() {
        let mut rng = Rng::seed_from_u64(23);
        let ds = blob_dataset(&mut rng, 20, &[(0.0, 0.0, 0), (2.0, 2.0, 1)]);
        let model = train_logistic(&ds, &Hyperparams::default()).unwrap();
        for r in 0..ds.len() {
            let probs = model.probabilities(ds.features.row(r));
            let sum: f64 = probs.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "probabilities sum to {sum}");
            assert!(probs.iter().all(|p| *p >= 0.0));
        }
    }

    /// Permuting feature columns together with the spec leaves predictions
    /// unchanged for both model families.
    #[test]
    fn feature_permutation_equivariance() {
        let mut rng = Rng::seed_from_u64(29);
        let n = 60usize;
        let d = 4usize;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.next_f64()).collect())
            .collect();
        let labels: Vec<CategoryLabel> = rows
            .iter()
            .map(|r| if r[1] + 0.3 * r[3] > 0.65 { 1 } else { 0 })
            .collect();
        let dates: Vec<Date> = (0..n)
            .map(|i| date(2015, (i / 28) as u8 + 1, (i % 28) as u8 + 1))
            .collect();
        let ds = Dataset::new(
            dates.clone(),
            Matrix::from_rows(&rows).unwrap(),
            labels.clone(),
        )
        .unwrap();

        let perm = [2usize, 0, 3, 1];
        let permuted_rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| perm.iter().map(|&j| r[j]).collect())
            .collect();
        let ds_perm =
            Dataset::new(dates, Matrix::from_rows(&permuted_rows).unwrap(), labels).unwrap();

        let hp = Hyperparams {
            c: 5.0,
            gamma: Some(0.8),
            lr_epochs: 300,
            ..Hyperparams::default()
        };
        let lr_a = train_logistic(&ds, &hp).unwrap();
        let lr_b = train_logistic(&ds_perm, &hp).unwrap();
        let svm_a = train_svm(&ds, &hp).unwrap();
        let svm_b = train_svm(&ds_perm, &hp).unwrap();
        for r in 0..n {
            let row = ds.features.row(r);
            let row_perm = ds_perm.features.row(r);
            assert_eq!(
                lr_a.predict_label(row).unwrap(),
                lr_b.predict_label(row_perm).unwrap()
            );
            assert_eq!(
                svm_a.predict_label(row).unwrap(),
                svm_b.predict_label(row_perm).unwrap()
            );
        }
    }

    #[test]
    fn trained_model_checks_dimension() {
        let mut rng = Rng::seed_from_u64(3);
        let ds = blob_dataset(&mut rng, 20, &[(0.0, 0.0, 0), (2.0, 2.0, 1)]);
        let scaler = FeatureScaler::fit(&ds.features).unwrap();
        let lr = train_logistic(
            &Dataset::new(
                ds.dates.clone(),
                scaler.transform(&ds.features),
                ds.labels.clone(),
            )
            .unwrap(),
            &Hyperparams::default(),
        )
        .unwrap();
        let model = TrainedModel {
            spec: FeatureSpec::new(alloc::vec![(EmotionLabel::Joy, 1), (EmotionLabel::Fear, 2)])
                .unwrap(),
            scaler,
            params: ModelParams::Lr(lr),
        };
        assert!(model.predict(&[0.1]).is_err());
        assert!(model.predict(&[0.1, 0.2]).is_ok());
        // repeated calls agree
        assert_eq!(
            model.predict(&[0.1, 0.2]).unwrap(),
            model.predict(&[0.1, 0.2]).unwrap()
        );
    }
}
