//! Reproducible synthetic corpus + market generator.
//!
//! Plants a deterministic dependency: one emotion's daily proportion cycles
//! through three well-separated regimes, and the chosen market attribute
//! `lag` trading days later is a function of that proportion plus small
//! noise. The generator therefore knows its own ground truth, which makes it
//! the oracle for end-to-end pipeline tests.

use std::str::FromStr;

use serde::Serialize;

use emostock_core::corpus::{KeywordFilter, Tweet};
use emostock_core::date::{Date, Timestamp};
use emostock_core::emotion::{EmotionLabel, EMOTION_COUNT};
use emostock_core::market::{MarketTarget, OhlcvRecord};
use emostock_core::rng::{derive_seed, Rng};
use emostock_core::timeseries::TradingCalendar;

use crate::error::{CliError, Result};

pub use emostock_core::corpus::STOCK_KEYWORDS;

pub fn default_keyword_filter() -> KeywordFilter {
    KeywordFilter::default_stock()
}

/// `emotion:lag:target`, e.g. `sadness:2:volume`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PlantedRule {
    pub emotion: EmotionLabel,
    pub lag: usize,
    pub target: MarketTarget,
}

impl FromStr for PlantedRule {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::usage(format!(
                "planted rule must be emotion:lag:target, got {s:?}"
            )));
        }
        let emotion: EmotionLabel = parts[0].parse()?;
        let lag: usize = parts[1]
            .parse()
            .map_err(|_| CliError::usage(format!("bad lag {:?}", parts[1])))?;
        if !(1..=5).contains(&lag) {
            return Err(CliError::usage(format!("lag must be 1..=5, got {lag}")));
        }
        let target: MarketTarget = parts[2].parse()?;
        Ok(PlantedRule {
            emotion,
            lag,
            target,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    /// Number of trading days.
    pub days: usize,
    pub tweets_per_day: usize,
    pub nb_train_per_class: usize,
    pub planted: PlantedRule,
    /// Regime-to-attribute gain; larger separates the categories more.
    pub strength: f64,
    pub start: Date,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            days: 120,
            tweets_per_day: 300,
            nb_train_per_class: 120,
            planted: PlantedRule {
                emotion: EmotionLabel::Sadness,
                lag: 2,
                target: MarketTarget::Volume,
            },
            strength: 4.0,
            start: Date::new(2015, 1, 5).unwrap(),
        }
    }
}

/// The regime levels the planted emotion cycles through.
pub const REGIME_LEVELS: [f64; 3] = [0.15, 0.45, 0.75];

#[derive(Debug, Serialize)]
pub struct SynthTruth {
    pub seed: u64,
    pub planted: PlantedRule,
    pub strength: f64,
    /// Per trading day, which regime (0, 1, 2) the planted emotion was in.
    pub regimes: Vec<usize>,
}

#[derive(Debug)]
pub struct SynthOutput {
    pub tweets: Vec<Tweet>,
    pub nb_train: Vec<Tweet>,
    pub keywords: KeywordFilter,
    pub calendar: TradingCalendar,
    pub ohlcv: Vec<OhlcvRecord>,
    pub truth: SynthTruth,
}

const EMOTION_WORDS: [[&str; 6]; EMOTION_COUNT] = [
    ["怒火", "气死", "愤怒", "可恶", "骂人", "恼火"], // anger
    ["恶心", "厌恶", "垃圾", "讨厌", "无耻", "黑幕"], // disgust
    ["大涨", "开心", "高兴", "红盘", "赚钱", "喜悦"], // joy
    ["大跌", "悲伤", "亏损", "绿盘", "难过", "流泪"], // sadness
    ["恐慌", "害怕", "担心", "崩盘", "风险", "不安"], // fear
];

const NEUTRAL_WORDS: [&str; 6] = ["今天", "行情", "指数", "市场", "交易", "成交"];

fn weekday_calendar(start: Date, days: usize) -> TradingCalendar {
    let mut out = Vec::with_capacity(days);
    let mut d = start;
    while out.len() < days {
        if d.weekday() <= 5 {
            out.push(d);
        }
        d = d.succ();
    }
    TradingCalendar::new(out).expect("weekday sequence is increasing")
}

fn previous_weekday(date: Date) -> Date {
    // walk back through the calendar one day at a time
    let mut probe = Date::new(date.year() - 1, 12, 31).unwrap();
    let mut last = probe;
    while probe < date {
        if probe.weekday() <= 5 {
            last = probe;
        }
        probe = probe.succ();
    }
    last
}

fn tweet_text(rng: &mut Rng, label: EmotionLabel, with_keyword: bool) -> String {
    let pool = &EMOTION_WORDS[label.index()];
    let mut parts: Vec<&str> = Vec::new();
    if with_keyword {
        parts.push(STOCK_KEYWORDS[rng.index(STOCK_KEYWORDS.len())]);
    }
    let n_words = 2 + rng.index(3);
    for _ in 0..n_words {
        parts.push(pool[rng.index(pool.len())]);
    }
    parts.push(NEUTRAL_WORDS[rng.index(NEUTRAL_WORDS.len())]);
    parts.join(" ")
}

/// Generates the corpus, calendar and OHLCV data with the planted rule.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    if cfg.days < 20 {
        return Err(CliError::usage("need at least 20 trading days"));
    }
    if cfg.tweets_per_day < 20 {
        return Err(CliError::usage("need at least 20 tweets per day"));
    }

    let calendar = weekday_calendar(cfg.start, cfg.days);
    let trading_days = calendar.days().to_vec();

    // per-day regimes and emotion mixtures
    let mut mix_rng = Rng::seed_from_u64(derive_seed(cfg.seed, "synth/mixture"));
    let mut regimes = Vec::with_capacity(cfg.days);
    let mut planted_series = Vec::with_capacity(cfg.days);
    let mut mixtures: Vec<[f64; EMOTION_COUNT]> = Vec::with_capacity(cfg.days);
    for _ in 0..cfg.days {
        let regime = mix_rng.index(3);
        regimes.push(regime);
        let planted = (REGIME_LEVELS[regime] + 0.01 * mix_rng.normal()).clamp(0.02, 0.96);
        planted_series.push(planted);
        let mut weights = [0.0f64; EMOTION_COUNT];
        let mut total = 0.0;
        for (e, w) in weights.iter_mut().enumerate() {
            if e != cfg.planted.emotion.index() {
                *w = 0.2 + mix_rng.next_f64();
                total += *w;
            }
        }
        let mut mixture = [0.0f64; EMOTION_COUNT];
        for (e, m) in mixture.iter_mut().enumerate() {
            if e == cfg.planted.emotion.index() {
                *m = planted;
            } else {
                *m = (1.0 - planted) * weights[e] / total;
            }
        }
        mixtures.push(mixture);
    }

    // stock-relevant tweets: trading days at full volume, weekends thinner
    let mut tweet_rng = Rng::seed_from_u64(derive_seed(cfg.seed, "synth/tweets"));
    let mut tweets = Vec::new();
    let span_end = *trading_days.last().unwrap();
    let mut day = cfg.start;
    let mut trading_idx = 0usize;
    while day <= span_end {
        let is_trading = calendar.contains(day);
        let mixture = if is_trading {
            let m = mixtures[trading_idx];
            trading_idx += 1;
            m
        } else {
            // weekend chatter with an arbitrary mixture; dropped downstream
            let mut m = [0.2f64; EMOTION_COUNT];
            let bump = tweet_rng.index(EMOTION_COUNT);
            m[bump] += 0.0; // uniform is fine
            m
        };
        let count = if is_trading {
            cfg.tweets_per_day
        } else {
            cfg.tweets_per_day / 2
        };
        for i in 0..count {
            let label = sample_label(&mut tweet_rng, &mixture);
            let hour = 8 + tweet_rng.index(12) as u8;
            let minute = tweet_rng.index(60) as u8;
            let ts = Timestamp::new(day, hour, minute, 0).expect("valid time");
            let text = tweet_text(&mut tweet_rng, label, true);
            tweets.push(Tweet::new(format!("t-{day}-{i}"), ts, text, None)?);
        }
        // non-stock chatter exercising the keyword filter
        for i in 0..count / 10 {
            let ts = Timestamp::new(day, 12, i.min(59) as u8, 30).expect("valid time");
            let text = format!(
                "{} {}",
                NEUTRAL_WORDS[tweet_rng.index(NEUTRAL_WORDS.len())],
                "天气不错"
            );
            tweets.push(Tweet::new(format!("n-{day}-{i}"), ts, text, None)?);
        }
        day = day.succ();
    }

    // labelled corpus for the Naive Bayes classifier
    let mut nb_rng = Rng::seed_from_u64(derive_seed(cfg.seed, "synth/nb"));
    let mut nb_train = Vec::new();
    let nb_day = previous_weekday(cfg.start);
    for label in EmotionLabel::ALL {
        for i in 0..cfg.nb_train_per_class {
            let ts = Timestamp::new(nb_day, 9, (i % 60) as u8, 0).expect("valid time");
            let with_keyword = nb_rng.index(2) == 0;
            let text = tweet_text(&mut nb_rng, label, with_keyword);
            nb_train.push(Tweet::new(
                format!("nb-{label}-{i}"),
                ts,
                text,
                Some(label),
            )?);
        }
    }

    // market data: a lead-in day so every trading day has a return row
    let mut mkt_rng = Rng::seed_from_u64(derive_seed(cfg.seed, "synth/market"));
    let mut ohlcv = Vec::with_capacity(cfg.days + 1);
    let lead_date = previous_weekday(cfg.start);
    let mut close = 3000.0;
    ohlcv.push(OhlcvRecord::new(
        lead_date,
        close,
        close * 1.002,
        close * 0.998,
        close,
        1.0e9,
    )?);

    let planted_at = |i: usize, lag: usize| -> f64 {
        if i >= lag {
            planted_series[i - lag]
        } else {
            REGIME_LEVELS[1]
        }
    };
    let rule = cfg.planted;
    for (i, date) in trading_days.iter().enumerate() {
        let prev_close = close;
        let centered = planted_at(i, rule.lag) - REGIME_LEVELS[1];

        let close_rc = if rule.target == MarketTarget::Close {
            cfg.strength * centered + 0.05 * mkt_rng.normal()
        } else {
            0.6 * mkt_rng.normal()
        };
        let open_rc = if rule.target == MarketTarget::Open {
            cfg.strength * centered + 0.05 * mkt_rng.normal()
        } else {
            close_rc / 2.0 + 0.3 * mkt_rng.normal()
        };
        let envelope = close_rc.max(open_rc);
        let high_rc = if rule.target == MarketTarget::High {
            envelope + 0.2 + cfg.strength * (planted_at(i, rule.lag) - REGIME_LEVELS[0])
        } else {
            envelope + 0.1 + (0.2 * mkt_rng.normal()).abs()
        };
        let floor = close_rc.min(open_rc);
        let low_rc = if rule.target == MarketTarget::Low {
            floor - 0.2 - cfg.strength * (planted_at(i, rule.lag) - REGIME_LEVELS[0])
        } else {
            floor - 0.1 - (0.2 * mkt_rng.normal()).abs()
        };
        let volume = if rule.target == MarketTarget::Volume {
            1.0e9 * (1.0 + cfg.strength * planted_at(i, rule.lag)) + 1.0e6 * mkt_rng.normal()
        } else {
            1.0e9 * (1.0 + (0.2 * mkt_rng.normal()).abs())
        };

        close = prev_close * (1.0 + close_rc / 100.0);
        let open = prev_close * (1.0 + open_rc / 100.0);
        let high = prev_close * (1.0 + high_rc / 100.0);
        let low = prev_close * (1.0 + low_rc / 100.0);
        ohlcv.push(OhlcvRecord::new(
            *date,
            open,
            high,
            low,
            close,
            volume.max(1.0),
        )?);
    }

    Ok(SynthOutput {
        tweets,
        nb_train,
        keywords: default_keyword_filter(),
        calendar,
        ohlcv,
        truth: SynthTruth {
            seed: cfg.seed,
            planted: rule,
            strength: cfg.strength,
            regimes,
        },
    })
}

fn sample_label(rng: &mut Rng, mixture: &[f64; EMOTION_COUNT]) -> EmotionLabel {
    let draw = rng.next_f64();
    let mut acc = 0.0;
    for (e, p) in mixture.iter().enumerate() {
        acc += p;
        if draw < acc {
            return EmotionLabel::from_index(e).unwrap();
        }
    }
    EmotionLabel::Fear
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_rule_parses() {
        let rule: PlantedRule = "sadness:2:volume".parse().unwrap();
        assert_eq!(rule.emotion, EmotionLabel::Sadness);
        assert_eq!(rule.lag, 2);
        assert_eq!(rule.target, MarketTarget::Volume);
        assert!("sadness:9:volume".parse::<PlantedRule>().is_err());
        assert!("sadness:volume".parse::<PlantedRule>().is_err());
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = SynthConfig {
            days: 30,
            tweets_per_day: 40,
            ..SynthConfig::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.tweets, b.tweets);
        assert_eq!(a.ohlcv.len(), b.ohlcv.len());
        for (x, y) in a.ohlcv.iter().zip(&b.ohlcv) {
            assert_eq!(x, y);
        }
        assert_eq!(a.truth.regimes, b.truth.regimes);
    }

    #[test]
    fn calendar_is_weekdays_and_market_covers_it() {
        let cfg = SynthConfig {
            days: 25,
            tweets_per_day: 30,
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        assert_eq!(out.calendar.len(), 25);
        assert!(out.calendar.days().iter().all(|d| d.weekday() <= 5));
        // one lead-in record plus one per trading day
        assert_eq!(out.ohlcv.len(), 26);
        assert!(out.ohlcv[0].date < out.calendar.days()[0]);
    }

    #[test]
    fn volume_tracks_planted_emotion() {
        let cfg = SynthConfig {
            days: 60,
            tweets_per_day: 30,
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        // volume on day i reflects the regime at i - 2
        for (i, record) in out.ohlcv[1..].iter().enumerate() {
            if i >= 2 {
                let regime = out.truth.regimes[i - 2];
                let expected = 1.0e9 * (1.0 + cfg.strength * REGIME_LEVELS[regime]);
                let rel = (record.volume - expected).abs() / expected;
                assert!(
                    rel < 0.15,
                    "day {i}: volume {} vs expected {expected}",
                    record.volume
                );
            }
        }
    }

    #[test]
    fn stock_tweets_carry_keywords_and_chatter_does_not() {
        let cfg = SynthConfig {
            days: 20,
            tweets_per_day: 30,
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        let filter = default_keyword_filter();
        let stock: Vec<&Tweet> = out
            .tweets
            .iter()
            .filter(|t| t.id.starts_with("t-"))
            .collect();
        let chatter: Vec<&Tweet> = out
            .tweets
            .iter()
            .filter(|t| t.id.starts_with("n-"))
            .collect();
        assert!(!stock.is_empty() && !chatter.is_empty());
        assert!(stock.iter().all(|t| filter.matches(&t.text)));
        assert!(chatter.iter().all(|t| !filter.matches(&t.text)));
    }
}
