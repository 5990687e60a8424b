//! The five emotion categories.

use alloc::format;
use core::fmt;
use core::str::FromStr;

use crate::error::Error;

/// Number of emotion categories; fixes the width of proportion vectors.
pub const EMOTION_COUNT: usize = 5;

/// Emotion category of a tweet.
///
/// The declaration order (anger, disgust, joy, sadness, fear) is canonical:
/// proportion vectors, CSV columns and classifier tie-breaking all use it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EmotionLabel {
    Anger,
    Disgust,
    Joy,
    Sadness,
    Fear,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; EMOTION_COUNT] = [
        EmotionLabel::Anger,
        EmotionLabel::Disgust,
        EmotionLabel::Joy,
        EmotionLabel::Sadness,
        EmotionLabel::Fear,
    ];

    /// Position in the canonical ordering.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<EmotionLabel> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Anger => "anger",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Joy => "joy",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Fear => "fear",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "anger" => Ok(EmotionLabel::Anger),
            "disgust" => Ok(EmotionLabel::Disgust),
            "joy" => Ok(EmotionLabel::Joy),
            "sadness" => Ok(EmotionLabel::Sadness),
            "fear" => Ok(EmotionLabel::Fear),
            other => Err(Error::invalid(format!("unknown emotion label {other:?}"))),
        }
    }
}
