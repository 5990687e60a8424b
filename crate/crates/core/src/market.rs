//! Daily OHLCV records, rate-of-change targets and the chronological split.

use alloc::format;
use alloc::vec::Vec;

use crate::date::Date;
use crate::error::{Error, Result};
use crate::timeseries::EmotionSeries;

/// One trading day of index data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhlcvRecord {
    pub date: Date,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl OhlcvRecord {
    pub fn new(
        date: Date,
        open: f64,
        high: f64,
        low: f64,
        close: f64,
        volume: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("open", open),
            ("high", high),
            ("low", low),
            ("close", close),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::invalid(format!(
                    "{date}: {name} must be positive, got {v}"
                )));
            }
        }
        if !volume.is_finite() || volume < 0.0 {
            return Err(Error::invalid(format!(
                "{date}: volume must be >= 0, got {volume}"
            )));
        }
        if low > open.min(close) {
            return Err(Error::invalid(format!(
                "{date}: low {low} above min(open, close)"
            )));
        }
        if high < open.max(close) {
            return Err(Error::invalid(format!(
                "{date}: high {high} below max(open, close)"
            )));
        }
        Ok(OhlcvRecord {
            date,
            open,
            high,
            low,
            close,
            volume,
        })
    }
}

/// The five predicted attributes of the market.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum MarketTarget {
    Close,
    Open,
    High,
    Low,
    Volume,
}

impl MarketTarget {
    pub const ALL: [MarketTarget; 5] = [
        MarketTarget::Close,
        MarketTarget::Open,
        MarketTarget::High,
        MarketTarget::Low,
        MarketTarget::Volume,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MarketTarget::Close => "close",
            MarketTarget::Open => "open",
            MarketTarget::High => "high",
            MarketTarget::Low => "low",
            MarketTarget::Volume => "volume",
        }
    }
}

impl core::fmt::Display for MarketTarget {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for MarketTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "close" => Ok(MarketTarget::Close),
            "open" => Ok(MarketTarget::Open),
            "high" => Ok(MarketTarget::High),
            "low" => Ok(MarketTarget::Low),
            "volume" => Ok(MarketTarget::Volume),
            other => Err(Error::invalid(format!("unknown market target {other:?}"))),
        }
    }
}

/// Denominator convention for the rate-of-change transform.
///
/// `Standard` divides by the previous close, the conventional return.
/// `PaperLiteral` divides by the current close, which keeps the sign but
/// rescales the magnitude; it exists so both conventions can be compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ReturnMode {
    #[default]
    Standard,
    PaperLiteral,
}

impl core::str::FromStr for ReturnMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(ReturnMode::Standard),
            "paper-literal" | "paper_literal" => Ok(ReturnMode::PaperLiteral),
            other => Err(Error::invalid(format!("unknown return mode {other:?}"))),
        }
    }
}

/// Per trading day (first input day excluded), the four percent
/// rate-of-change targets and the raw volume.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSeries {
    dates: Vec<Date>,
    close_rc: Vec<f64>,
    open_rc: Vec<f64>,
    high_rc: Vec<f64>,
    low_rc: Vec<f64>,
    volume: Vec<f64>,
}

impl MarketSeries {
    pub fn dates(&self) -> &[Date] {
        &self.dates
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn column(&self, target: MarketTarget) -> &[f64] {
        match target {
            MarketTarget::Close => &self.close_rc,
            MarketTarget::Open => &self.open_rc,
            MarketTarget::High => &self.high_rc,
            MarketTarget::Low => &self.low_rc,
            MarketTarget::Volume => &self.volume,
        }
    }

    pub fn index_of(&self, date: Date) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Sub-series restricted to `dates` (all must be present).
    pub fn subset(&self, dates: &[Date]) -> Result<MarketSeries> {
        let mut idx = Vec::with_capacity(dates.len());
        for d in dates {
            idx.push(
                self.index_of(*d)
                    .ok_or_else(|| Error::MissingDate(format!("{d} not in market series")))?,
            );
        }
        let pick = |col: &[f64]| idx.iter().map(|&i| col[i]).collect::<Vec<f64>>();
        Ok(MarketSeries {
            dates: dates.to_vec(),
            close_rc: pick(&self.close_rc),
            open_rc: pick(&self.open_rc),
            high_rc: pick(&self.high_rc),
            low_rc: pick(&self.low_rc),
            volume: pick(&self.volume),
        })
    }
}

/// Transforms index levels into percent rate-of-change targets. Volume is
/// copied unchanged; the first input day produces no output row.
pub fn compute_returns(records: &[OhlcvRecord], mode: ReturnMode) -> Result<MarketSeries> {
    if records.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 records to compute returns, got {}",
            records.len()
        )));
    }
    for pair in records.windows(2) {
        if pair[0].date >= pair[1].date {
            return Err(Error::invalid(format!(
                "records not strictly increasing at {} -> {}",
                pair[0].date, pair[1].date
            )));
        }
    }

    let n = records.len() - 1;
    let mut out = MarketSeries {
        dates: Vec::with_capacity(n),
        close_rc: Vec::with_capacity(n),
        open_rc: Vec::with_capacity(n),
        high_rc: Vec::with_capacity(n),
        low_rc: Vec::with_capacity(n),
        volume: Vec::with_capacity(n),
    };
    for pair in records.windows(2) {
        let (prev, today) = (&pair[0], &pair[1]);
        let denom = match mode {
            ReturnMode::Standard => prev.close,
            ReturnMode::PaperLiteral => today.close,
        };
        if denom.is_nan() || denom <= 0.0 {
            return Err(Error::invalid(format!(
                "{}: non-positive denominator {denom}",
                today.date
            )));
        }
        out.dates.push(today.date);
        out.close_rc
            .push((today.close - prev.close) / denom * 100.0);
        out.open_rc.push((today.open - prev.close) / denom * 100.0);
        out.high_rc.push((today.high - prev.close) / denom * 100.0);
        out.low_rc.push((today.low - prev.close) / denom * 100.0);
        out.volume.push(today.volume);
    }
    Ok(out)
}

/// Chronological split: the first `ceil(fraction * n)` dates train, the rest
/// test. Fails when the two series are not aligned on identical dates.
pub fn split_train_test(
    x: &EmotionSeries,
    y: &MarketSeries,
    train_fraction: f64,
) -> Result<((EmotionSeries, MarketSeries), (EmotionSeries, MarketSeries))> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    if x.len() != y.len() {
        return Err(Error::Misaligned(format!(
            "emotion series has {} dates, market series {}",
            x.len(),
            y.len()
        )));
    }
    if let Some((xd, yd)) = x.dates().iter().zip(y.dates()).find(|(a, b)| a != b) {
        return Err(Error::Misaligned(format!("first mismatch: {xd} vs {yd}")));
    }

    let n = x.len();
    let n_train = ceil_mul(train_fraction, n);
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid(format!(
            "split of {n} rows at fraction {train_fraction} leaves an empty side"
        )));
    }
    let (train_dates, test_dates) = x.dates().split_at(n_train);
    let train = (x.subset(train_dates)?, y.subset(train_dates)?);
    let test = (x.subset(test_dates)?, y.subset(test_dates)?);
    Ok((train, test))
}

fn ceil_mul(fraction: f64, n: usize) -> usize {
    let raw = fraction * n as f64;
    let floored = crate::math::floor(raw);
    let c = if raw > floored {
        floored + 1.0
    } else {
        floored
    };
    c as usize
}

/// Intersection of the two date axes, in chronological order.
pub fn common_dates(x: &EmotionSeries, y: &MarketSeries) -> Vec<Date> {
    x.dates()
        .iter()
        .copied()
        .filter(|d| y.index_of(*d).is_some())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::date::date;
    use crate::emotion::EMOTION_COUNT;

    fn rec(day: u8, open: f64, high: f64, low: f64, close: f64, volume: f64) -> OhlcvRecord {
        OhlcvRecord::new(date(2015, 9, day), open, high, low, close, volume).unwrap()
    }

    #[test]
    fn record_invariants_enforced() {
        assert!(OhlcvRecord::new(date(2015, 9, 1), 10.0, 12.0, 9.0, 11.0, 100.0).is_ok());
        // low above min(open, close)
        assert!(OhlcvRecord::new(date(2015, 9, 1), 10.0, 12.0, 10.5, 11.0, 100.0).is_err());
        // high below max(open, close)
        assert!(OhlcvRecord::new(date(2015, 9, 1), 10.0, 10.5, 9.0, 11.0, 100.0).is_err());
        assert!(OhlcvRecord::new(date(2015, 9, 1), 0.0, 12.0, 9.0, 11.0, 100.0).is_err());
        assert!(OhlcvRecord::new(date(2015, 9, 1), 10.0, 12.0, 9.0, 11.0, -1.0).is_err());
    }

    #[test]
    fn standard_return_basic() {
        let records = [
            rec(1, 100.0, 101.0, 99.0, 100.0, 500.0),
            rec(2, 100.0, 103.0, 100.0, 102.0, 600.0),
        ];
        let series = compute_returns(&records, ReturnMode::Standard).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series.dates()[0], date(2015, 9, 2));
        assert!((series.column(MarketTarget::Close)[0] - 2.0).abs() < 1e-12);
        // today open = prev close -> open return 0
        assert_eq!(series.column(MarketTarget::Open)[0], 0.0);
        assert_eq!(series.column(MarketTarget::Volume)[0], 600.0);
    }

    #[test]
    fn paper_literal_divides_by_current_close() {
        let records = [
            rec(1, 100.0, 101.0, 99.0, 100.0, 500.0),
            rec(2, 100.0, 103.0, 100.0, 102.0, 600.0),
        ];
        let series = compute_returns(&records, ReturnMode::PaperLiteral).unwrap();
        // (102 - 100) / 102 * 100
        assert!((series.column(MarketTarget::Close)[0] - 1.960_784_313_725_490_2).abs() < 1e-12);
        assert_eq!(series.column(MarketTarget::Open)[0], 0.0);
    }

    #[test]
    fn returns_length_and_sign_agreement() {
        let records = [
            rec(1, 100.0, 101.0, 99.0, 100.0, 1.0),
            rec(2, 101.0, 104.0, 100.0, 103.0, 2.0),
            rec(3, 103.0, 103.5, 98.0, 99.0, 3.0),
            rec(4, 99.0, 100.0, 97.0, 99.5, 4.0),
        ];
        for mode in [ReturnMode::Standard, ReturnMode::PaperLiteral] {
            let series = compute_returns(&records, mode).unwrap();
            assert_eq!(series.len(), records.len() - 1);
            for (i, pair) in records.windows(2).enumerate() {
                let rc = series.column(MarketTarget::Close)[i];
                assert_eq!(
                    rc > 0.0,
                    pair[1].close > pair[0].close,
                    "mode {mode:?} day {i}"
                );
            }
        }
        // high/low envelope in standard mode
        let series = compute_returns(&records, ReturnMode::Standard).unwrap();
        for i in 0..series.len() {
            let (o, c) = (
                series.column(MarketTarget::Open)[i],
                series.column(MarketTarget::Close)[i],
            );
            assert!(series.column(MarketTarget::High)[i] >= o.max(c) - 1e-12);
            assert!(series.column(MarketTarget::Low)[i] <= o.min(c) + 1e-12);
        }
    }

    fn aligned_pair(n: usize) -> (EmotionSeries, MarketSeries) {
        let dates: Vec<Date> = (0..n).map(|i| date(2015, 10, 1 + i as u8)).collect();
        let x = EmotionSeries::new(dates.clone(), alloc::vec![[0.2; EMOTION_COUNT]; n]).unwrap();
        let y = MarketSeries {
            dates,
            close_rc: (0..n).map(|i| i as f64).collect(),
            open_rc: alloc::vec![0.0; n],
            high_rc: alloc::vec![0.5; n],
            low_rc: alloc::vec![-0.5; n],
            volume: alloc::vec![1.0; n],
        };
        (x, y)
    }

    #[test]
    fn split_is_chronological() {
        let (x, y) = aligned_pair(10);
        let ((xtr, ytr), (xte, yte)) = split_train_test(&x, &y, 0.8).unwrap();
        assert_eq!(xtr.len(), 8);
        assert_eq!(xte.len(), 2);
        assert!(ytr.dates().last().unwrap() < yte.dates().first().unwrap());
        // union restores the series
        let mut all: Vec<Date> = ytr.dates().to_vec();
        all.extend_from_slice(yte.dates());
        assert_eq!(all, y.dates());
    }

    #[test]
    fn split_uses_ceil() {
        let (x, y) = aligned_pair(10);
        let ((xtr, _), _) = split_train_test(&x, &y, 0.75).unwrap();
        assert_eq!(xtr.len(), 8); // ceil(7.5)
    }

    #[test]
    fn split_rejects_bad_fraction_and_misalignment() {
        let (x, y) = aligned_pair(10);
        assert!(split_train_test(&x, &y, 1.0).is_err());
        assert!(split_train_test(&x, &y, 0.0).is_err());

        let (x2, _) = aligned_pair(9);
        let err = split_train_test(&x2, &y, 0.8).unwrap_err();
        assert!(matches!(err, Error::Misaligned(_)));

        // same length, different dates
        let dates: Vec<Date> = (0..10).map(|i| date(2015, 11, 1 + i as u8)).collect();
        let x3 = EmotionSeries::new(dates, alloc::vec![[0.2; EMOTION_COUNT]; 10]).unwrap();
        let err = split_train_test(&x3, &y, 0.8).unwrap_err();
        assert!(matches!(err, Error::Misaligned(ref m) if m.contains("2015-11-01")));
    }
}
