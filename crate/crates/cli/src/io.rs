//! File formats: JSON-Lines tweets, keyword/calendar lists, CSV series and
//! reports, JSON models. Writers are atomic (temp file + rename) and floats
//! in report files use exact round-trip scientific notation.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use emostock_core::corpus::{KeywordFilter, Tweet};
use emostock_core::date::{Date, Timestamp};
use emostock_core::discretize::{DiscretizationScheme, Method};
use emostock_core::emotion::{EmotionLabel, EMOTION_COUNT};
use emostock_core::eval::{EvalCell, EvalReport};
use emostock_core::learn::TrainedModel;
use emostock_core::market::{MarketTarget, OhlcvRecord};
use emostock_core::stats::{AnalysisCell, CellOutcome};
use emostock_core::timeseries::{EmotionSeries, TradingCalendar};

use crate::error::{CliError, Result};

/// Removes this run's outputs unless `commit` is called, so failed commands
/// leave no partial artifacts behind.
#[derive(Debug, Default)]
pub struct OutputGuard {
    paths: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn track(&mut self, path: impl Into<PathBuf>) {
        self.paths.push(path.into());
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if !self.committed {
            for path in &self.paths {
                let _ = fs::remove_file(path);
            }
        }
    }
}

/// Writes through a temp file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp-write");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        f.write_all(contents.as_bytes())
            .map_err(|e| CliError::io(&tmp, e))?;
        f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

// ---------------------------------------------------------------------------
// Tweets (JSON-Lines)
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct TweetRecord {
    id: String,
    timestamp: String,
    text: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    label: Option<String>,
}

pub fn read_tweets(path: &Path) -> Result<Vec<Tweet>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut tweets = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TweetRecord = serde_json::from_str(line)
            .map_err(|e| CliError::parse(path, lineno + 1, e.to_string()))?;
        let timestamp: Timestamp = record
            .timestamp
            .parse()
            .map_err(|e| CliError::parse(path, lineno + 1, format!("{e}")))?;
        let label = match record.label.as_deref() {
            Some(raw) => Some(
                raw.parse::<EmotionLabel>()
                    .map_err(|e| CliError::parse(path, lineno + 1, format!("{e}")))?,
            ),
            None => None,
        };
        let tweet = Tweet::new(record.id, timestamp, record.text, label)
            .map_err(|e| CliError::parse(path, lineno + 1, format!("{e}")))?;
        tweets.push(tweet);
    }
    Ok(tweets)
}

pub fn tweets_to_jsonl(tweets: &[Tweet]) -> String {
    let mut out = String::new();
    for t in tweets {
        let record = TweetRecord {
            id: t.id.clone(),
            timestamp: t.timestamp.to_string(),
            text: t.text.clone(),
            label: t.label.map(|l| l.as_str().to_string()),
        };
        out.push_str(&serde_json::to_string(&record).expect("tweet record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_tweets(path: &Path, tweets: &[Tweet]) -> Result<()> {
    write_atomic(path, &tweets_to_jsonl(tweets))
}

// ---------------------------------------------------------------------------
// Keywords and calendar (one entry per line)
// ---------------------------------------------------------------------------

pub fn read_keywords(path: &Path) -> Result<KeywordFilter> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let keywords: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect();
    KeywordFilter::new(keywords).map_err(CliError::from)
}

pub fn write_keywords(path: &Path, filter: &KeywordFilter) -> Result<()> {
    let mut out = String::new();
    for k in filter.keywords() {
        out.push_str(k);
        out.push('\n');
    }
    write_atomic(path, &out)
}

pub fn read_calendar(path: &Path) -> Result<TradingCalendar> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut days = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let date: Date = line
            .parse()
            .map_err(|e| CliError::parse(path, lineno + 1, format!("{e}")))?;
        days.push(date);
    }
    TradingCalendar::new(days).map_err(CliError::from)
}

pub fn write_calendar(path: &Path, calendar: &TradingCalendar) -> Result<()> {
    let mut out = String::new();
    for d in calendar.days() {
        let _ = writeln!(out, "{d}");
    }
    write_atomic(path, &out)
}

// ---------------------------------------------------------------------------
// Emotion series CSV
// ---------------------------------------------------------------------------

pub const SERIES_HEADER: &str = "date,anger,disgust,joy,sadness,fear";

pub fn emotion_series_to_csv(series: &EmotionSeries) -> String {
    let mut out = String::from(SERIES_HEADER);
    out.push('\n');
    for (date, row) in series.dates().iter().zip(series.values()) {
        let _ = write!(out, "{date}");
        for v in row {
            let _ = write!(out, ",{v:.15}");
        }
        out.push('\n');
    }
    out
}

pub fn write_emotion_series(path: &Path, series: &EmotionSeries) -> Result<()> {
    write_atomic(path, &emotion_series_to_csv(series))
}

pub fn read_emotion_series(path: &Path) -> Result<EmotionSeries> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::parse(path, 1, "empty file"))?;
    if header.trim_end_matches('\r') != SERIES_HEADER {
        return Err(CliError::parse(
            path,
            1,
            format!("expected header {SERIES_HEADER:?}, got {header:?}"),
        ));
    }
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (lineno, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 1 + EMOTION_COUNT {
            return Err(CliError::parse(
                path,
                lineno + 1,
                format!(
                    "expected {} fields, got {}",
                    1 + EMOTION_COUNT,
                    fields.len()
                ),
            ));
        }
        let date: Date = fields[0]
            .parse()
            .map_err(|e| CliError::parse(path, lineno + 1, format!("{e}")))?;
        let mut row = [0.0; EMOTION_COUNT];
        for (slot, field) in row.iter_mut().zip(&fields[1..]) {
            *slot = field
                .parse::<f64>()
                .map_err(|_| CliError::parse(path, lineno + 1, format!("bad number {field:?}")))?;
        }
        dates.push(date);
        values.push(row);
    }
    EmotionSeries::new(dates, values).map_err(CliError::from)
}

// ---------------------------------------------------------------------------
// OHLCV CSV
// ---------------------------------------------------------------------------

pub const OHLCV_HEADER: &str = "date,open,high,low,close,volume";

pub fn ohlcv_to_csv(records: &[OhlcvRecord]) -> String {
    let mut out = String::from(OHLCV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6},{:.3}",
            r.date, r.open, r.high, r.low, r.close, r.volume
        );
    }
    out
}

pub fn write_ohlcv(path: &Path, records: &[OhlcvRecord]) -> Result<()> {
    write_atomic(path, &ohlcv_to_csv(records))
}

pub fn read_ohlcv(path: &Path) -> Result<Vec<OhlcvRecord>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::parse(path, 1, "empty file"))?;
    if header.trim_end_matches('\r') != OHLCV_HEADER {
        return Err(CliError::parse(
            path,
            1,
            format!("expected header {OHLCV_HEADER:?}, got {header:?}"),
        ));
    }
    let mut records = Vec::new();
    for (lineno, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(CliError::parse(
                path,
                lineno + 1,
                format!("expected 6 fields, got {}", fields.len()),
            ));
        }
        let date: Date = fields[0]
            .parse()
            .map_err(|e| CliError::parse(path, lineno + 1, format!("{e}")))?;
        let mut nums = [0.0f64; 5];
        for (slot, field) in nums.iter_mut().zip(&fields[1..]) {
            *slot = field
                .parse::<f64>()
                .map_err(|_| CliError::parse(path, lineno + 1, format!("bad number {field:?}")))?;
        }
        let record = OhlcvRecord::new(date, nums[0], nums[1], nums[2], nums[3], nums[4])
            .map_err(|e| CliError::parse(path, lineno + 1, format!("{e}")))?;
        records.push(record);
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Analysis report CSV
// ---------------------------------------------------------------------------

pub const ANALYSIS_HEADER: &str = "target,emotion,lag,rho_full,rho_sample_mean,rho_sample_std,rho_shuffle_mean,f_stat,p_value,significance_tier";

pub fn analysis_to_csv(cells: &[AnalysisCell]) -> String {
    let mut out = String::from(ANALYSIS_HEADER);
    out.push('\n');
    for cell in cells {
        match &cell.outcome {
            CellOutcome::Computed {
                correlation,
                granger,
                tier,
                ..
            } => {
                let _ = writeln!(
                    out,
                    "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                    cell.target,
                    cell.emotion,
                    cell.lag,
                    correlation.rho_full,
                    correlation.sample_mean,
                    correlation.sample_std,
                    correlation.shuffle_mean,
                    granger.f_stat,
                    granger.p_value,
                    tier.as_str(),
                );
            }
            CellOutcome::Degenerate { .. } => {
                let _ = writeln!(
                    out,
                    "{},{},{},,,,,,,degenerate",
                    cell.target, cell.emotion, cell.lag
                );
            }
        }
    }
    out
}

pub fn write_analysis_csv(path: &Path, cells: &[AnalysisCell]) -> Result<()> {
    write_atomic(path, &analysis_to_csv(cells))
}

/// Human-readable analysis summary: the cells flagged by correlation
/// threshold or Granger significance.
pub fn analysis_summary(cells: &[AnalysisCell]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "flagged cells (|rho| above threshold or p < significance):"
    );
    let mut any = false;
    for cell in cells {
        if let CellOutcome::Computed {
            correlation,
            granger,
            rho_flagged,
            significant,
            tier,
        } = &cell.outcome
        {
            if *rho_flagged || *significant {
                any = true;
                let _ = writeln!(
                    out,
                    "  {:<6} {:<8} lag {}  rho={:+.3}  p={:.4}{}",
                    cell.target.to_string(),
                    cell.emotion.to_string(),
                    cell.lag,
                    correlation.rho_full,
                    granger.p_value,
                    if tier.as_str().is_empty() {
                        String::new()
                    } else {
                        format!(" {}", tier.as_str())
                    },
                );
            }
        }
    }
    if !any {
        let _ = writeln!(out, "  (none)");
    }
    out
}

// ---------------------------------------------------------------------------
// Model files (JSON)
// ---------------------------------------------------------------------------

/// A serialized trained model plus everything needed to apply it.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub target: MarketTarget,
    pub method: Method,
    pub scheme: DiscretizationScheme,
    pub model: TrainedModel,
    pub seed: u64,
    pub train_rows: usize,
    pub train_start: String,
    pub train_end: String,
}

pub fn write_model(path: &Path, model: &ModelFile) -> Result<()> {
    let json = serde_json::to_string_pretty(model).map_err(|e| CliError::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    write_atomic(path, &format!("{json}\n"))
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let model: ModelFile = serde_json::from_str(&text).map_err(|e| CliError::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    model.scheme.validate()?;
    if model.model.spec.len() != model.model.scaler.cols() {
        return Err(CliError::usage(format!(
            "{}: feature spec has {} attributes but the scaler covers {}",
            path.display(),
            model.model.spec.len(),
            model.model.scaler.cols()
        )));
    }
    Ok(model)
}

// ---------------------------------------------------------------------------
// Evaluation reports
// ---------------------------------------------------------------------------

pub const EVAL_HEADER: &str = "target,method,model,classes,cv_mean_accuracy,fold_accuracies,degenerate_folds,holdout_accuracy";

fn fold_list(cell: &EvalCell) -> String {
    cell.cv
        .folds
        .iter()
        .map(|f| match f.accuracy {
            Some(a) => format!("{a:e}"),
            None => "degenerate".to_string(),
        })
        .collect::<Vec<_>>()
        .join(";")
}

pub fn eval_to_csv(report: &EvalReport) -> String {
    let mut out = String::from(EVAL_HEADER);
    out.push('\n');
    for cell in &report.cells {
        let holdout = cell
            .holdout
            .as_ref()
            .map(|h| format!("{:e}", h.accuracy))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{:e},{},{},{}",
            cell.target,
            cell.method,
            cell.model,
            cell.class_count,
            cell.cv.mean_accuracy,
            fold_list(cell),
            cell.cv.degenerate_folds,
            holdout,
        );
    }
    out
}

pub fn write_eval_csv(path: &Path, report: &EvalReport) -> Result<()> {
    write_atomic(path, &eval_to_csv(report))
}

fn pct(v: f64) -> String {
    format!("{:.1}%", v * 100.0)
}

/// Plain-text accuracy tables in the familiar layout: one 3-class block per
/// discretization method, a 2-class sign block, and the holdout row.
pub fn eval_to_text(report: &EvalReport) -> String {
    use emostock_core::eval::ModelColumn;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "cross-validation over {} training rows ({} folds); holdout on {} rows",
        report.train_rows, report.folds, report.test_rows
    );

    let methods: Vec<Method> = {
        let mut seen = Vec::new();
        for c in &report.cells {
            if c.method != Method::Sign && !seen.contains(&c.method) {
                seen.push(c.method);
            }
        }
        seen
    };

    let lookup = |target: MarketTarget, method: Method, model: ModelColumn| -> Option<&EvalCell> {
        report
            .cells
            .iter()
            .find(|c| c.target == target && c.method == method && c.model == model)
    };

    if !methods.is_empty() {
        let _ = writeln!(out, "\n3-class cross-validation accuracy");
        let mut header = format!("{:<8}", "target");
        for method in &methods {
            for model in [ModelColumn::Lr, ModelColumn::SvmAll, ModelColumn::SvmEs] {
                if lookup(MarketTarget::Close, *method, model).is_some() {
                    let _ = write!(header, "  {:>16}", format!("{method}:{model}"));
                }
            }
        }
        let _ = writeln!(out, "{header}");
        for target in MarketTarget::ALL {
            let mut row = format!("{:<8}", target.to_string());
            for method in &methods {
                for model in [ModelColumn::Lr, ModelColumn::SvmAll, ModelColumn::SvmEs] {
                    if lookup(MarketTarget::Close, *method, model).is_some() {
                        let text = lookup(target, *method, model)
                            .map(|c| pct(c.cv.mean_accuracy))
                            .unwrap_or_default();
                        let _ = write!(row, "  {text:>16}");
                    }
                }
            }
            let _ = writeln!(out, "{row}");
        }
    }

    let sign_cells: Vec<&EvalCell> = report
        .cells
        .iter()
        .filter(|c| c.method == Method::Sign)
        .collect();
    if !sign_cells.is_empty() {
        let _ = writeln!(out, "\n2-class (sign) cross-validation accuracy");
        let _ = writeln!(
            out,
            "{:<8}  {:>10}  {:>10}  {:>10}",
            "target", "lr", "svm", "svm-es"
        );
        for target in [MarketTarget::Close, MarketTarget::Open] {
            let mut row = format!("{:<8}", target.to_string());
            for model in [ModelColumn::Lr, ModelColumn::SvmAll, ModelColumn::SvmEs] {
                let text = lookup(target, Method::Sign, model)
                    .map(|c| pct(c.cv.mean_accuracy))
                    .unwrap_or_default();
                let _ = write!(row, "  {text:>10}");
            }
            let _ = writeln!(out, "{row}");
        }
    }

    let holdout_cells: Vec<&EvalCell> = report
        .cells
        .iter()
        .filter(|c| c.holdout.is_some() && c.model == ModelColumn::SvmEs)
        .collect();
    if !holdout_cells.is_empty() {
        let _ = writeln!(out, "\nholdout accuracy (svm-es)");
        for cell in holdout_cells {
            let h = cell.holdout.as_ref().unwrap();
            let _ = writeln!(
                out,
                "{:<8} {:<16} {:>8}",
                cell.target.to_string(),
                format!("{} ({})", cell.method, cell.class_count),
                pct(h.accuracy)
            );
        }
    }
    out
}

pub fn write_eval_text(path: &Path, report: &EvalReport) -> Result<()> {
    write_atomic(path, &eval_to_text(report))
}

#[derive(Debug, Serialize)]
struct ConfusionEntry<'a> {
    target: String,
    method: String,
    model: String,
    classes: &'a [i8],
    /// rows = actual class, columns = predicted class
    counts: &'a [Vec<usize>],
}

pub fn confusions_to_json(report: &EvalReport) -> Result<String> {
    let entries: Vec<ConfusionEntry> = report
        .cells
        .iter()
        .filter_map(|cell| {
            cell.holdout.as_ref().map(|h| ConfusionEntry {
                target: cell.target.to_string(),
                method: cell.method.to_string(),
                model: cell.model.to_string(),
                classes: &h.confusion.classes,
                counts: &h.confusion.counts,
            })
        })
        .collect();
    serde_json::to_string_pretty(&entries).map_err(|e| CliError::Json {
        path: PathBuf::from("confusions"),
        source: e,
    })
}

pub fn write_confusions_json(path: &Path, report: &EvalReport) -> Result<()> {
    let json = confusions_to_json(report)?;
    write_atomic(path, &format!("{json}\n"))
}
