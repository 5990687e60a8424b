//! Daily emotion-proportion series on a trading calendar.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use crate::corpus::Tweet;
use crate::date::Date;
use crate::emotion::{EmotionLabel, EMOTION_COUNT};
use crate::error::{Error, Result};

/// Strictly increasing set of trading days.
#[derive(Debug, Clone)]
pub struct TradingCalendar {
    days: Vec<Date>,
    set: BTreeSet<Date>,
}

impl TradingCalendar {
    pub fn new(days: Vec<Date>) -> Result<Self> {
        for pair in days.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::invalid(format!(
                    "calendar not strictly increasing at {} -> {}",
                    pair[0], pair[1]
                )));
            }
        }
        let set = days.iter().copied().collect();
        Ok(TradingCalendar { days, set })
    }

    pub fn days(&self) -> &[Date] {
        &self.days
    }

    pub fn contains(&self, date: Date) -> bool {
        self.set.contains(&date)
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }
}

/// Per trading day, the 5-vector of emotion proportions in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionSeries {
    dates: Vec<Date>,
    values: Vec<[f64; EMOTION_COUNT]>,
}

impl EmotionSeries {
    /// Validates that dates are strictly increasing and every row is a
    /// probability vector (nonnegative, sums to 1 within 1e-9).
    pub fn new(dates: Vec<Date>, values: Vec<[f64; EMOTION_COUNT]>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} dates but {} value rows",
                dates.len(),
                values.len()
            )));
        }
        for pair in dates.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::invalid(format!(
                    "series dates not strictly increasing at {} -> {}",
                    pair[0], pair[1]
                )));
            }
        }
        for (date, row) in dates.iter().zip(&values) {
            if row.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "negative or non-finite proportion on {date}"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "proportions on {date} sum to {sum}, expected 1"
                )));
            }
        }
        Ok(EmotionSeries { dates, values })
    }

    pub fn dates(&self) -> &[Date] {
        &self.dates
    }

    pub fn values(&self) -> &[[f64; EMOTION_COUNT]] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn index_of(&self, date: Date) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// One emotion's proportion column.
    pub fn column(&self, emotion: EmotionLabel) -> Vec<f64> {
        self.values.iter().map(|row| row[emotion.index()]).collect()
    }

    /// Sub-series restricted to `dates` (which must all be present).
    pub fn subset(&self, dates: &[Date]) -> Result<EmotionSeries> {
        let mut values = Vec::with_capacity(dates.len());
        for d in dates {
            let i = self
                .index_of(*d)
                .ok_or_else(|| Error::MissingDate(format!("{d} not in emotion series")))?;
            values.push(self.values[i]);
        }
        EmotionSeries::new(dates.to_vec(), values)
    }
}

/// One emotion shifted `lag` trading days ahead of its target dates.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedSeries {
    pub emotion: EmotionLabel,
    pub lag: usize,
    pub dates: Vec<Date>,
    pub values: Vec<f64>,
}

/// Counts labelled tweets per calendar date; dates with no tweets are absent.
pub fn aggregate_daily(tweets: &[Tweet]) -> Result<BTreeMap<Date, [u64; EMOTION_COUNT]>> {
    let mut counts: BTreeMap<Date, [u64; EMOTION_COUNT]> = BTreeMap::new();
    for tweet in tweets {
        let label = tweet
            .label
            .ok_or_else(|| Error::invalid(format!("tweet {} is unlabeled", tweet.id)))?;
        counts
            .entry(tweet.timestamp.date)
            .or_insert([0; EMOTION_COUNT])[label.index()] += 1;
    }
    Ok(counts)
}

/// Normalizes a day's counts into proportions summing to 1.
pub fn to_proportions(counts: &[u64; EMOTION_COUNT]) -> Result<[f64; EMOTION_COUNT]> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::degenerate("no labeled tweets for day"));
    }
    let mut out = [0.0; EMOTION_COUNT];
    for (o, c) in out.iter_mut().zip(counts) {
        *o = *c as f64 / total as f64;
    }
    Ok(out)
}

/// Keeps exactly the series dates present in the calendar.
pub fn drop_non_trading(series: &EmotionSeries, calendar: &TradingCalendar) -> EmotionSeries {
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (d, v) in series.dates.iter().zip(&series.values) {
        if calendar.contains(*d) {
            dates.push(*d);
            values.push(*v);
        }
    }
    EmotionSeries { dates, values }
}

pub const MAX_LAG: usize = 5;

/// Shifts one emotion column so that the value at each target date is the
/// proportion `lag` trading days earlier.
pub fn lag_shift(
    series: &EmotionSeries,
    emotion: EmotionLabel,
    lag: usize,
) -> Result<LaggedSeries> {
    if !(1..=MAX_LAG).contains(&lag) {
        return Err(Error::invalid(format!("lag must be in 1..=5, got {lag}")));
    }
    if series.len() <= lag {
        return Err(Error::invalid(format!(
            "series of length {} too short for lag {lag}",
            series.len()
        )));
    }
    let dates = series.dates[lag..].to_vec();
    let values = series.values[..series.len() - lag]
        .iter()
        .map(|row| row[emotion.index()])
        .collect();
    Ok(LaggedSeries {
        emotion,
        lag,
        dates,
        values,
    })
}

/// Maps each value to (v - min) / (max - min).
pub fn minmax_normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::invalid("cannot normalize an empty series"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in series"));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return Err(Error::degenerate("degenerate range: constant series"));
    }
    let range = max - min;
    Ok(values.iter().map(|v| (v - min) / range).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Tweet;
    use crate::date::{date, Timestamp};

    fn tweet_on(id: &str, d: Date, label: EmotionLabel) -> Tweet {
        Tweet::new(
            id,
            Timestamp::new(d, 12, 0, 0).unwrap(),
            "text",
            Some(label),
        )
        .unwrap()
    }

    fn uniform_series(dates: Vec<Date>) -> EmotionSeries {
        let n = dates.len();
        EmotionSeries::new(dates, alloc::vec![[0.2; EMOTION_COUNT]; n]).unwrap()
    }

    #[test]
    fn aggregate_counts_per_day_and_label() {
        let d = date(2015, 9, 1);
        let tweets = vec![
            tweet_on("1", d, EmotionLabel::Joy),
            tweet_on("2", d, EmotionLabel::Joy),
            tweet_on("3", d, EmotionLabel::Joy),
            tweet_on("4", d, EmotionLabel::Fear),
        ];
        let counts = aggregate_daily(&tweets).unwrap();
        assert_eq!(counts.len(), 1);
        assert_eq!(counts[&d], [0, 0, 3, 0, 1]);
    }

    #[test]
    fn aggregate_empty_and_multiday() {
        assert!(aggregate_daily(&[]).unwrap().is_empty());

        let d1 = date(2015, 9, 1);
        let d2 = date(2015, 9, 2);
        let tweets = vec![
            tweet_on("1", d1, EmotionLabel::Anger),
            tweet_on("2", d2, EmotionLabel::Fear),
            tweet_on("3", d2, EmotionLabel::Fear),
        ];
        let counts = aggregate_daily(&tweets).unwrap();
        assert_eq!(counts.len(), 2);
        assert_eq!(counts[&d1], [1, 0, 0, 0, 0]);
        assert_eq!(counts[&d2], [0, 0, 0, 0, 2]);
    }

    #[test]
    fn aggregate_rejects_unlabeled() {
        let mut t = tweet_on("u-1", date(2015, 9, 1), EmotionLabel::Joy);
        t.label = None;
        let err = aggregate_daily(&[t]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(ref m) if m.contains("u-1")));
    }

    #[test]
    fn proportions_basic() {
        assert_eq!(
            to_proportions(&[10, 10, 10, 10, 10]).unwrap(),
            [0.2, 0.2, 0.2, 0.2, 0.2]
        );
        assert_eq!(
            to_proportions(&[0, 0, 5, 0, 0]).unwrap(),
            [0.0, 0.0, 1.0, 0.0, 0.0]
        );
        assert_eq!(
            to_proportions(&[1, 2, 3, 4, 0]).unwrap(),
            [0.1, 0.2, 0.3, 0.4, 0.0]
        );
        assert!(to_proportions(&[0; EMOTION_COUNT]).is_err());
    }

    #[test]
    fn proportions_scale_invariant() {
        let base = [1u64, 2, 3, 4, 5];
        let p1 = to_proportions(&base).unwrap();
        let scaled = base.map(|c| c * 7);
        let p2 = to_proportions(&scaled).unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    /// Sep 1-16 2015 with the real Shanghai calendar: the 3rd-5th (holiday,
    /// rolling into a weekend) and the 12th-13th (weekend) are non-trading.
    #[test]
    fn drop_non_trading_matches_september_2015() {
        let all: Vec<Date> = (1..=16).map(|d| date(2015, 9, d)).collect();
        let series = uniform_series(all);
        let trading: Vec<Date> = [1, 2, 7, 8, 9, 10, 11, 14, 15, 16]
            .iter()
            .map(|d| date(2015, 9, *d))
            .collect();
        let calendar = TradingCalendar::new(trading.clone()).unwrap();
        let pruned = drop_non_trading(&series, &calendar);
        assert_eq!(pruned.dates(), trading.as_slice());
        for gone in [3u8, 4, 5, 6, 12, 13] {
            assert!(pruned.index_of(date(2015, 9, gone)).is_none());
        }
    }

    #[test]
    fn drop_non_trading_superset_and_disjoint() {
        let dates: Vec<Date> = (1..=3).map(|d| date(2015, 9, d)).collect();
        let series = uniform_series(dates.clone());

        let superset: Vec<Date> = (1..=10).map(|d| date(2015, 9, d)).collect();
        let cal = TradingCalendar::new(superset).unwrap();
        assert_eq!(drop_non_trading(&series, &cal), series);

        let disjoint = TradingCalendar::new(vec![date(2015, 10, 1)]).unwrap();
        assert!(drop_non_trading(&series, &disjoint).is_empty());
    }

    #[test]
    fn drop_non_trading_idempotent() {
        let dates: Vec<Date> = (1..=10).map(|d| date(2015, 9, d)).collect();
        let series = uniform_series(dates);
        let cal =
            TradingCalendar::new([1, 2, 7, 8].iter().map(|d| date(2015, 9, *d)).collect()).unwrap();
        let once = drop_non_trading(&series, &cal);
        let twice = drop_non_trading(&once, &cal);
        assert_eq!(once, twice);
    }

    fn ramp_series(n: usize) -> EmotionSeries {
        // joy proportion ramps linearly; remainder spread over the others
        let dates: Vec<Date> = (0..n).map(|i| date(2015, 9, 1 + i as u8)).collect();
        let values: Vec<[f64; EMOTION_COUNT]> = (0..n)
            .map(|i| {
                let joy = i as f64 / (2 * n) as f64;
                let rest = (1.0 - joy) / 4.0;
                [rest, rest, joy, rest, rest]
            })
            .collect();
        EmotionSeries::new(dates, values).unwrap()
    }

    #[test]
    fn lag_shift_aligns_earlier_values() {
        let series = ramp_series(6);
        let lagged = lag_shift(&series, EmotionLabel::Joy, 1).unwrap();
        assert_eq!(lagged.dates.len(), 5);
        assert_eq!(lagged.dates[0], series.dates()[1]);
        // value for the 2nd trading day equals the proportion on the 1st
        assert_eq!(
            lagged.values[0],
            series.values()[0][EmotionLabel::Joy.index()]
        );

        let lag5 = lag_shift(&series, EmotionLabel::Joy, 5).unwrap();
        assert_eq!(lag5.dates.len(), 1);
        assert_eq!(
            lag5.values[0],
            series.values()[0][EmotionLabel::Joy.index()]
        );
    }

    #[test]
    fn lag_shift_rejects_bad_lags() {
        let series = ramp_series(6);
        assert!(lag_shift(&series, EmotionLabel::Joy, 0).is_err());
        assert!(lag_shift(&series, EmotionLabel::Joy, 6).is_err());
        let short = ramp_series(3);
        assert!(lag_shift(&short, EmotionLabel::Joy, 3).is_err());
    }

    #[test]
    fn lag_shift_composes() {
        let series = ramp_series(8);
        let once = lag_shift(&series, EmotionLabel::Joy, 1).unwrap();
        let twice = lag_shift(&series, EmotionLabel::Joy, 2).unwrap();
        // shifting by 1 twice equals shifting by 2 on the overlap
        let re = EmotionSeries::new(
            once.dates.clone(),
            once.values
                .iter()
                .map(|v| {
                    let rest = (1.0 - v) / 4.0;
                    [rest, rest, *v, rest, rest]
                })
                .collect(),
        )
        .unwrap();
        let chained = lag_shift(&re, EmotionLabel::Joy, 1).unwrap();
        assert_eq!(chained.dates, twice.dates);
        for (a, b) in chained.values.iter().zip(&twice.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn minmax_basic() {
        assert_eq!(
            minmax_normalize(&[2.0, 4.0, 6.0]).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(minmax_normalize(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert!(matches!(
            minmax_normalize(&[5.0, 5.0, 5.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn minmax_idempotent_and_rank_preserving() {
        let xs = [3.0, -1.0, 7.0, 2.0, 5.0];
        let once = minmax_normalize(&xs).unwrap();
        let twice = minmax_normalize(&once).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-15);
        }
        // argsort unchanged
        let mut order_x: Vec<usize> = (0..xs.len()).collect();
        order_x.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
        let mut order_n: Vec<usize> = (0..once.len()).collect();
        order_n.sort_by(|&a, &b| once[a].partial_cmp(&once[b]).unwrap());
        assert_eq!(order_x, order_n);
        assert!(once.contains(&0.0));
        assert!(once.contains(&1.0));
    }
}
