//! Correlation analysis and Granger causality tests.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::emotion::EmotionLabel;
use crate::error::{Error, Result};
use crate::market::{MarketSeries, MarketTarget};
use crate::math;
use crate::rng::{derive_seed, Rng};
use crate::timeseries::{minmax_normalize, EmotionSeries};

/// Pearson correlation coefficient, clamped to [-1, 1] against rounding.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::invalid("need at least 2 observations"));
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::degenerate("zero variance"));
    }
    Ok((cov / math::sqrt(var_x * var_y)).clamp(-1.0, 1.0))
}

/// Mean and population standard deviation of Pearson coefficients over
/// `n_samples` random subsamples of `sample_size` index pairs drawn without
/// replacement (the same indices applied to both series).
pub fn sampled_correlation(
    x: &[f64],
    y: &[f64],
    n_samples: usize,
    sample_size: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if sample_size > x.len() {
        return Err(Error::invalid(format!(
            "sample size {sample_size} exceeds series length {}",
            x.len()
        )));
    }
    if sample_size < 2 || n_samples == 0 {
        return Err(Error::invalid("need sample_size >= 2 and n_samples >= 1"));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let mut coeffs = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let idx = rng.sample_indices(x.len(), sample_size);
        let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        coeffs.push(pearson(&xs, &ys)?);
    }
    let mean = coeffs.iter().sum::<f64>() / n_samples as f64;
    let var = coeffs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n_samples as f64;
    Ok((mean, math::sqrt(var)))
}

/// Mean Pearson coefficient of `n_shuffles` random permutations of `x`
/// against the fixed `y`.
pub fn shuffle_baseline(x: &[f64], y: &[f64], n_shuffles: usize, seed: u64) -> Result<f64> {
    // validate the unshuffled pair up front so errors match `pearson`
    pearson(x, y)?;
    if n_shuffles == 0 {
        return Err(Error::invalid("need n_shuffles >= 1"));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let mut shuffled = x.to_vec();
    let mut sum = 0.0;
    for _ in 0..n_shuffles {
        rng.shuffle(&mut shuffled);
        sum += pearson(&shuffled, y)?;
    }
    Ok(sum / n_shuffles as f64)
}

/// Row-major dense matrix for regression designs.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: alloc::vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::invalid("ragged rows in matrix"));
        }
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: n_rows,
            cols: n_cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Least-squares fit by Householder QR.
///
/// Returns the coefficient vector and the residual sum of squares. The design
/// must have at least as many rows as columns and full column rank.
#[allow(clippy::needless_range_loop)] // index-coupled elimination loops
pub fn ols_fit(design: &Matrix, response: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = design.rows();
    let p = design.cols();
    if response.len() != m {
        return Err(Error::invalid(format!(
            "design has {m} rows but response has {}",
            response.len()
        )));
    }
    if p == 0 || m < p {
        return Err(Error::invalid(format!(
            "need rows >= cols >= 1, got {m}x{p}"
        )));
    }

    let mut a = design.clone();
    let mut qty = response.to_vec();

    let scale = a.data.iter().fold(0.0f64, |acc, v| acc.max(math::abs(*v)));
    let tol = f64::EPSILON * (m as f64) * scale.max(1e-300);

    for k in 0..p {
        let mut norm_sq = 0.0;
        for i in k..m {
            let v = a.get(i, k);
            norm_sq += v * v;
        }
        let norm = math::sqrt(norm_sq);
        if norm <= tol {
            return Err(Error::SingularDesign(format!(
                "column {k} is linearly dependent"
            )));
        }
        let akk = a.get(k, k);
        let alpha = if akk >= 0.0 { -norm } else { norm };
        // Householder vector v = x - alpha e1, stored implicitly
        let v0 = akk - alpha;
        let vtv = norm_sq - 2.0 * akk * alpha + alpha * alpha; // ||v||^2
        if vtv <= 0.0 {
            return Err(Error::SingularDesign(format!(
                "column {k} is numerically degenerate"
            )));
        }

        a.set(k, k, alpha);
        // apply H = I - 2 v v^T / v^T v to the trailing columns
        for j in (k + 1)..p {
            let mut dot = v0 * a.get(k, j);
            for i in (k + 1)..m {
                dot += a.get(i, k) * a.get(i, j);
            }
            let f = 2.0 * dot / vtv;
            a.set(k, j, a.get(k, j) - f * v0);
            for i in (k + 1)..m {
                a.set(i, j, a.get(i, j) - f * a.get(i, k));
            }
        }
        // and to the response
        let mut dot = v0 * qty[k];
        for i in (k + 1)..m {
            dot += a.get(i, k) * qty[i];
        }
        let f = 2.0 * dot / vtv;
        qty[k] -= f * v0;
        for i in (k + 1)..m {
            qty[i] -= f * a.get(i, k);
        }
    }

    // back substitution on R
    let mut coeffs = alloc::vec![0.0; p];
    for k in (0..p).rev() {
        let mut acc = qty[k];
        for j in (k + 1)..p {
            acc -= a.get(k, j) * coeffs[j];
        }
        let r_kk = a.get(k, k);
        if math::abs(r_kk) <= tol {
            return Err(Error::SingularDesign(format!("zero pivot at column {k}")));
        }
        coeffs[k] = acc / r_kk;
    }

    let rss: f64 = qty[p..].iter().map(|v| v * v).sum();
    Ok((coeffs, rss))
}

/// Granger causality test of "x does not help forecast y" at the given lag.
#[derive(Debug, Clone, PartialEq)]
pub struct GrangerResult {
    pub lag: usize,
    pub rss_restricted: f64,
    pub rss_unrestricted: f64,
    pub f_stat: f64,
    pub p_value: f64,
    pub df_num: usize,
    pub df_den: usize,
}

/// Nested-OLS Granger test: regress y on its own `lag` lags (restricted) and
/// additionally on `lag` lags of x (unrestricted), both over the T - lag rows
/// where every lag exists, then F-test the restriction.
pub fn granger_test(x: &[f64], y: &[f64], lag: usize) -> Result<GrangerResult> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if !(1..=crate::timeseries::MAX_LAG).contains(&lag) {
        return Err(Error::invalid(format!("lag must be in 1..=5, got {lag}")));
    }
    let t_total = y.len();
    let t_eff = t_total.saturating_sub(lag);
    let unrestricted_cols = 2 * lag + 1;
    if t_eff <= unrestricted_cols {
        return Err(Error::invalid(format!(
            "series length {t_total} too short for lag {lag}: {t_eff} usable rows, need > {unrestricted_cols}"
        )));
    }

    let mut restricted_rows = Vec::with_capacity(t_eff);
    let mut unrestricted_rows = Vec::with_capacity(t_eff);
    let mut response = Vec::with_capacity(t_eff);
    for t in lag..t_total {
        let mut restricted = Vec::with_capacity(lag + 1);
        restricted.push(1.0);
        for i in 1..=lag {
            restricted.push(y[t - i]);
        }
        let mut unrestricted = restricted.clone();
        for i in 1..=lag {
            unrestricted.push(x[t - i]);
        }
        restricted_rows.push(restricted);
        unrestricted_rows.push(unrestricted);
        response.push(y[t]);
    }

    let (_, rss_restricted) = ols_fit(&Matrix::from_rows(&restricted_rows)?, &response)?;
    let (_, rss_unrestricted) = ols_fit(&Matrix::from_rows(&unrestricted_rows)?, &response)?;

    let df_num = lag;
    let df_den = t_eff - unrestricted_cols;
    let numerator = (rss_restricted - rss_unrestricted).max(0.0) / df_num as f64;
    let (f_stat, p_value) = if rss_unrestricted <= 0.0 {
        // perfect unrestricted fit
        (f64::INFINITY, 0.0)
    } else {
        let f = numerator / (rss_unrestricted / df_den as f64);
        (f, math::f_survival(f, df_num as f64, df_den as f64))
    };

    Ok(GrangerResult {
        lag,
        rss_restricted,
        rss_unrestricted,
        f_stat,
        p_value,
        df_num,
        df_den,
    })
}

/// Correlation summary for one (emotion, lag, target) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationStats {
    pub rho_full: f64,
    pub sample_mean: f64,
    pub sample_std: f64,
    pub shuffle_mean: f64,
}

/// p-value tier in the usual star notation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignificanceTier {
    None,
    P05,
    P01,
    P001,
}

impl SignificanceTier {
    pub fn of(p_value: f64) -> Self {
        if p_value < 0.001 {
            SignificanceTier::P001
        } else if p_value < 0.01 {
            SignificanceTier::P01
        } else if p_value < 0.05 {
            SignificanceTier::P05
        } else {
            SignificanceTier::None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SignificanceTier::None => "",
            SignificanceTier::P05 => "*",
            SignificanceTier::P01 => "**",
            SignificanceTier::P001 => "***",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Computed {
        correlation: CorrelationStats,
        granger: GrangerResult,
        /// |rho_full| exceeded the reporting threshold
        rho_flagged: bool,
        /// p-value below the configured significance level
        significant: bool,
        tier: SignificanceTier,
    },
    Degenerate {
        reason: String,
    },
}

/// One cell of the (emotion, lag, target) analysis grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisCell {
    pub target: MarketTarget,
    pub emotion: EmotionLabel,
    pub lag: usize,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone)]
pub struct GridOptions {
    pub max_lag: usize,
    pub n_samples: usize,
    pub sample_size: usize,
    pub n_shuffles: usize,
    pub seed: u64,
    pub rho_threshold: f64,
    pub significance: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            max_lag: crate::timeseries::MAX_LAG,
            n_samples: 100,
            sample_size: 150,
            n_shuffles: 100,
            seed: 0,
            rho_threshold: 0.2,
            significance: 0.05,
        }
    }
}

/// Full correlation + Granger grid over all emotions, lags and targets.
///
/// Both series must share the same date axis (the training period). All time
/// series are min-max normalized before analysis. Correlation pairs share one
/// axis across lags: targets at positions `max_lag..`, the emotion value
/// `lag` trading days earlier. Cells whose inputs are degenerate (constant
/// series, singular designs) are reported as such rather than dropped.
pub fn analysis_grid(
    x: &EmotionSeries,
    y: &MarketSeries,
    opts: &GridOptions,
) -> Result<Vec<AnalysisCell>> {
    if x.dates() != y.dates() {
        return Err(Error::Misaligned(
            "analysis grid requires identical date axes".into(),
        ));
    }
    let n = x.len();
    if n <= opts.max_lag {
        return Err(Error::invalid(format!(
            "series of length {n} too short for max lag {}",
            opts.max_lag
        )));
    }
    let pairs = n - opts.max_lag;
    if opts.sample_size > pairs {
        return Err(Error::invalid(format!(
            "sample size {} exceeds the {pairs} available pairs",
            opts.sample_size
        )));
    }

    let mut cells =
        Vec::with_capacity(MarketTarget::ALL.len() * EmotionLabel::ALL.len() * opts.max_lag);
    for target in MarketTarget::ALL {
        let target_norm = minmax_normalize(y.column(target));
        for emotion in EmotionLabel::ALL {
            let emotion_norm = minmax_normalize(&x.column(emotion));
            for lag in 1..=opts.max_lag {
                let outcome = match (&target_norm, &emotion_norm) {
                    (Err(e), _) => CellOutcome::Degenerate {
                        reason: format!("target {target}: {e}"),
                    },
                    (_, Err(e)) => CellOutcome::Degenerate {
                        reason: format!("emotion {emotion}: {e}"),
                    },
                    (Ok(ty), Ok(tx)) => compute_cell(tx, ty, target, emotion, lag, opts)
                        .unwrap_or_else(|e| CellOutcome::Degenerate {
                            reason: format!("{e}"),
                        }),
                };
                cells.push(AnalysisCell {
                    target,
                    emotion,
                    lag,
                    outcome,
                });
            }
        }
    }
    Ok(cells)
}

fn compute_cell(
    x_norm: &[f64],
    y_norm: &[f64],
    target: MarketTarget,
    emotion: EmotionLabel,
    lag: usize,
    opts: &GridOptions,
) -> Result<CellOutcome> {
    let n = y_norm.len();
    // shared pair axis: targets at max_lag.., emotion `lag` days earlier
    let ys: Vec<f64> = y_norm[opts.max_lag..].to_vec();
    let xs: Vec<f64> = (opts.max_lag..n).map(|i| x_norm[i - lag]).collect();

    let rho_full = pearson(&xs, &ys)?;
    let tag = format!("{target}/{emotion}/{lag}");
    let (sample_mean, sample_std) = sampled_correlation(
        &xs,
        &ys,
        opts.n_samples,
        opts.sample_size,
        derive_seed(opts.seed, &format!("sample/{tag}")),
    )?;
    let shuffle_mean = shuffle_baseline(
        &xs,
        &ys,
        opts.n_shuffles,
        derive_seed(opts.seed, &format!("shuffle/{tag}")),
    )?;
    let granger = granger_test(x_norm, y_norm, lag)?;

    let tier = SignificanceTier::of(granger.p_value);
    Ok(CellOutcome::Computed {
        rho_flagged: math::abs(rho_full) > opts.rho_threshold,
        significant: granger.p_value < opts.significance,
        tier,
        correlation: CorrelationStats {
            rho_full,
            sample_mean,
            sample_std,
            shuffle_mean,
        },
        granger,
    })
}
