//! Tweet ingestion, keyword filtering and Naive Bayes emotion labelling.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::date::Timestamp;
use crate::emotion::{EmotionLabel, EMOTION_COUNT};
use crate::error::{Error, Result};
use crate::math;

/// A timestamped tweet, optionally labelled with an emotion.
#[derive(Debug, Clone, PartialEq)]
pub struct Tweet {
    pub id: String,
    pub timestamp: Timestamp,
    pub text: String,
    pub label: Option<EmotionLabel>,
}

impl Tweet {
    pub fn new(
        id: impl Into<String>,
        timestamp: Timestamp,
        text: impl Into<String>,
        label: Option<EmotionLabel>,
    ) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        if id.is_empty() {
            return Err(Error::invalid("tweet id must be non-empty"));
        }
        if text.trim().is_empty() {
            return Err(Error::invalid(format!("tweet {id} has empty text")));
        }
        Ok(Tweet {
            id,
            timestamp,
            text,
            label,
        })
    }
}

/// The six default stock keywords: Stock, Stock Market, Securities, Shenzhen
/// Component Index, Shanghai Composite Index, Component Index.
pub const STOCK_KEYWORDS: [&str; 6] = ["股票", "股市", "证券", "深成指", "上证指数", "成分指数"];

/// Substring keyword filter for stock-relevant tweets.
#[derive(Debug, Clone)]
pub struct KeywordFilter {
    keywords: Vec<String>,
}

impl KeywordFilter {
    pub fn new(keywords: Vec<String>) -> Result<Self> {
        if keywords.is_empty() {
            return Err(Error::invalid("keyword list must be non-empty"));
        }
        if keywords.iter().any(|k| k.is_empty()) {
            return Err(Error::invalid("keyword list contains an empty keyword"));
        }
        Ok(KeywordFilter { keywords })
    }

    /// Filter over the six default stock keywords.
    pub fn default_stock() -> Self {
        KeywordFilter {
            keywords: STOCK_KEYWORDS.iter().map(|k| String::from(*k)).collect(),
        }
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn matches(&self, text: &str) -> bool {
        self.keywords.iter().any(|k| text.contains(k.as_str()))
    }
}

/// Keeps exactly the tweets whose text contains at least one keyword,
/// preserving input order.
pub fn filter_stock_tweets(tweets: &[Tweet], filter: &KeywordFilter) -> Vec<Tweet> {
    tweets
        .iter()
        .filter(|t| filter.matches(&t.text))
        .cloned()
        .collect()
}

/// Text-to-token interface; the Naive Bayes classifier is tokenizer-agnostic.
pub trait Tokenizer {
    fn tokenize(&self, text: &str) -> Vec<String>;
}

fn is_cjk(c: char) -> bool {
    matches!(c,
        '\u{4E00}'..='\u{9FFF}'      // CJK Unified Ideographs
        | '\u{3400}'..='\u{4DBF}'    // Extension A
        | '\u{F900}'..='\u{FAFF}'    // Compatibility Ideographs
    )
}

/// Default tokenizer: overlapping character bigrams for runs of CJK
/// characters, whitespace-delimited words otherwise. A CJK run of a single
/// character yields that character itself.
#[derive(Debug, Clone, Default)]
pub struct BigramTokenizer;

impl Tokenizer for BigramTokenizer {
    fn tokenize(&self, text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        let mut cjk_run: Vec<char> = Vec::new();
        let mut word = String::new();

        let flush_run = |run: &mut Vec<char>, out: &mut Vec<String>| {
            match run.len() {
                0 => {}
                1 => out.push(run[0].to_string()),
                _ => {
                    for pair in run.windows(2) {
                        let mut s = String::with_capacity(8);
                        s.push(pair[0]);
                        s.push(pair[1]);
                        out.push(s);
                    }
                }
            }
            run.clear();
        };
        let flush_word = |word: &mut String, out: &mut Vec<String>| {
            if !word.is_empty() {
                out.push(core::mem::take(word));
            }
        };

        for c in text.chars() {
            if c.is_whitespace() {
                flush_run(&mut cjk_run, &mut tokens);
                flush_word(&mut word, &mut tokens);
            } else if is_cjk(c) {
                flush_word(&mut word, &mut tokens);
                cjk_run.push(c);
            } else {
                flush_run(&mut cjk_run, &mut tokens);
                word.push(c);
            }
        }
        flush_run(&mut cjk_run, &mut tokens);
        flush_word(&mut word, &mut tokens);
        tokens
    }
}

/// Multinomial Naive Bayes model with additive smoothing.
///
/// Token log-likelihoods are normalized over the training vocabulary, so for
/// each class `exp` of the stored likelihoods sums to one. Tokens outside the
/// vocabulary contribute `ln(1 / |vocabulary|)` to every class, which keeps
/// unseen content class-neutral.
#[derive(Debug, Clone)]
pub struct NBModel {
    classes: Vec<EmotionLabel>,
    class_log_prior: Vec<f64>,
    vocabulary: BTreeMap<String, usize>,
    /// `[class][token_column]`
    token_log_likelihood: Vec<Vec<f64>>,
    oov_log_likelihood: f64,
    smoothing: f64,
}

impl NBModel {
    pub fn classes(&self) -> &[EmotionLabel] {
        &self.classes
    }

    pub fn class_log_prior(&self, label: EmotionLabel) -> Option<f64> {
        let i = self.classes.iter().position(|c| *c == label)?;
        Some(self.class_log_prior[i])
    }

    pub fn token_log_likelihood(&self, label: EmotionLabel, token: &str) -> Option<f64> {
        let i = self.classes.iter().position(|c| *c == label)?;
        let col = self.vocabulary.get(token)?;
        Some(self.token_log_likelihood[i][*col])
    }

    pub fn vocabulary_len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    /// Per-class posterior log-scores (up to the shared evidence constant).
    pub fn log_scores<T: Tokenizer + ?Sized>(
        &self,
        tokenizer: &T,
        text: &str,
    ) -> Vec<(EmotionLabel, f64)> {
        let tokens = tokenizer.tokenize(text);
        self.classes
            .iter()
            .enumerate()
            .map(|(i, class)| {
                let mut score = self.class_log_prior[i];
                for token in &tokens {
                    score += match self.vocabulary.get(token) {
                        Some(col) => self.token_log_likelihood[i][*col],
                        None => self.oov_log_likelihood,
                    };
                }
                (*class, score)
            })
            .collect()
    }
}

/// Trains a multinomial Naive Bayes classifier on a fully labelled corpus.
pub fn train_nb<T: Tokenizer + ?Sized>(
    corpus: &[Tweet],
    smoothing: f64,
    tokenizer: &T,
) -> Result<NBModel> {
    if corpus.is_empty() {
        return Err(Error::invalid("empty training corpus"));
    }
    if smoothing.is_nan() || smoothing <= 0.0 {
        return Err(Error::invalid(format!(
            "smoothing must be > 0, got {smoothing}"
        )));
    }

    let mut doc_counts = [0usize; EMOTION_COUNT];
    let mut token_counts: Vec<BTreeMap<String, u64>> =
        (0..EMOTION_COUNT).map(|_| BTreeMap::new()).collect();
    let mut vocabulary: BTreeMap<String, usize> = BTreeMap::new();

    for tweet in corpus {
        let label = tweet
            .label
            .ok_or_else(|| Error::invalid(format!("tweet {} is unlabeled", tweet.id)))?;
        doc_counts[label.index()] += 1;
        for token in tokenizer.tokenize(&tweet.text) {
            let next_col = vocabulary.len();
            vocabulary.entry(token.clone()).or_insert(next_col);
            *token_counts[label.index()].entry(token).or_insert(0) += 1;
        }
    }

    let classes: Vec<EmotionLabel> = EmotionLabel::ALL
        .into_iter()
        .filter(|e| doc_counts[e.index()] > 0)
        .collect();
    let total_docs: usize = doc_counts.iter().sum();
    let vocab_len = vocabulary.len();
    if vocab_len == 0 {
        return Err(Error::invalid(
            "training corpus produced an empty vocabulary",
        ));
    }

    let class_log_prior: Vec<f64> = classes
        .iter()
        .map(|c| math::ln(doc_counts[c.index()] as f64 / total_docs as f64))
        .collect();

    let token_log_likelihood: Vec<Vec<f64>> = classes
        .iter()
        .map(|c| {
            let counts = &token_counts[c.index()];
            let class_total: u64 = counts.values().sum();
            let denom = class_total as f64 + smoothing * vocab_len as f64;
            let mut row = alloc::vec![0.0; vocab_len];
            for (token, col) in &vocabulary {
                let count = counts.get(token).copied().unwrap_or(0) as f64;
                row[*col] = math::ln((count + smoothing) / denom);
            }
            row
        })
        .collect();

    Ok(NBModel {
        classes,
        class_log_prior,
        vocabulary,
        token_log_likelihood,
        oov_log_likelihood: math::ln(1.0 / vocab_len as f64),
        smoothing,
    })
}

/// Most probable emotion for a text; ties break toward the earlier label in
/// the canonical ordering.
pub fn classify<T: Tokenizer + ?Sized>(model: &NBModel, tokenizer: &T, text: &str) -> EmotionLabel {
    let scores = model.log_scores(tokenizer, text);
    let mut best = scores[0];
    for &(label, score) in &scores[1..] {
        if score > best.1 {
            best = (label, score);
        }
    }
    best.0
}
