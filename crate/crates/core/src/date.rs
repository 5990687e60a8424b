//! Calendar dates and timestamps.
//!
//! The pipeline only ever needs date identity and ordering (lags are counted
//! in trading days, i.e. positions in a series), so a minimal validated
//! year/month/day type is enough.

use alloc::format;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// A calendar date, validated against month lengths and leap years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date {
    year: i32,
    month: u8,
    day: u8,
}

fn is_leap(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if is_leap(year) {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

impl Date {
    pub fn new(year: i32, month: u8, day: u8) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::invalid(format!("month {month} out of range")));
        }
        if day == 0 || day > days_in_month(year, month) {
            return Err(Error::invalid(format!(
                "day {day} out of range for {year}-{month:02}"
            )));
        }
        Ok(Date { year, month, day })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u8 {
        self.month
    }

    pub fn day(&self) -> u8 {
        self.day
    }

    /// Day after this one, rolling over month and year ends.
    pub fn succ(&self) -> Date {
        if self.day < days_in_month(self.year, self.month) {
            Date {
                day: self.day + 1,
                ..*self
            }
        } else if self.month < 12 {
            Date {
                year: self.year,
                month: self.month + 1,
                day: 1,
            }
        } else {
            Date {
                year: self.year + 1,
                month: 1,
                day: 1,
            }
        }
    }

    /// ISO weekday number, Monday = 1 ... Sunday = 7 (Zeller-style congruence).
    pub fn weekday(&self) -> u8 {
        let (mut y, mut m) = (self.year, self.month as i32);
        if m < 3 {
            m += 12;
            y -= 1;
        }
        let k = y % 100;
        let j = y / 100;
        let h = (self.day as i32 + 13 * (m + 1) / 5 + k + k / 4 + j / 4 + 5 * j).rem_euclid(7);
        // h: 0 = Saturday ... 6 = Friday
        ((h + 5) % 7 + 1) as u8
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

impl FromStr for Date {
    type Err = Error;

    /// Parses `YYYY-MM-DD`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("expected YYYY-MM-DD date, got {s:?}"));
        let mut parts = s.splitn(3, '-');
        let year: i32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let month: u8 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let day: u8 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        Date::new(year, month, day)
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Date {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> core::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Date {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> core::result::Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A timezone-naive timestamp; only the date part participates in grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Timestamp {
    pub date: Date,
    pub hour: u8,
    pub minute: u8,
    pub second: u8,
}

impl Timestamp {
    pub fn new(date: Date, hour: u8, minute: u8, second: u8) -> Result<Self> {
        if hour > 23 || minute > 59 || second > 59 {
            return Err(Error::invalid(format!(
                "time {hour:02}:{minute:02}:{second:02} out of range"
            )));
        }
        Ok(Timestamp {
            date,
            hour,
            minute,
            second,
        })
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}T{:02}:{:02}:{:02}",
            self.date, self.hour, self.minute, self.second
        )
    }
}

impl FromStr for Timestamp {
    type Err = Error;

    /// Parses `YYYY-MM-DDTHH:MM:SS`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("expected YYYY-MM-DDTHH:MM:SS timestamp, got {s:?}"));
        let (date_part, time_part) = s.split_once('T').ok_or_else(bad)?;
        let date: Date = date_part.parse()?;
        let mut parts = time_part.splitn(3, ':');
        let hour: u8 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let minute: u8 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let second: u8 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        Timestamp::new(date, hour, minute, second)
    }
}

/// Convenience for tests and generators.
pub fn date(year: i32, month: u8, day: u8) -> Date {
    Date::new(year, month, day).expect("valid date literal")
}

#[allow(dead_code)]
fn _assert_string_roundtrip(_: &String) {}
