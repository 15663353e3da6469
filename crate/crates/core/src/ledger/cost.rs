//! Token cost accounting.
//!
//! Rates are kept as integers in units of 1/10 000 USD per million tokens, so
//! a cost is an exact integer in units of 10^-10 USD until the single
//! half-up rounding to cents at the end.

use std::fmt;
use std::iter::Sum;
use std::ops::Add;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::agents::TokenUsage;

/// Amount in whole cents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Usd(pub i64);

impl Usd {
    pub fn from_cents(cents: i64) -> Self {
        Usd(cents)
    }

    pub fn cents(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl Add for Usd {
    type Output = Usd;

    fn add(self, o: Usd) -> Usd {
        Usd(self.0 + o.0)
    }
}

impl Sum for Usd {
    fn sum<I: Iterator<Item = Usd>>(iter: I) -> Self {
        iter.fold(Usd(0), Add::add)
    }
}

/// `$1,183.45`
impl fmt::Display for Usd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let dollars = (abs / 100).to_string();
        let mut grouped = String::new();
        for (i, c) in dollars.chars().enumerate() {
            if i > 0 && (dollars.len() - i) % 3 == 0 {
                grouped.push(',');
            }
            grouped.push(c);
        }
        write!(f, "{sign}${grouped}.{:02}", abs % 100)
    }
}

/// Rate in 1/10 000 USD per million tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Rate(u64);

impl Rate {
    fn from_usd(usd: f64) -> Self {
        assert!(usd.is_finite() && usd >= 0.0, "rates must be non-negative");
        Rate((usd * 10_000.0).round() as u64)
    }

    fn usd(self) -> f64 {
        self.0 as f64 / 10_000.0
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.usd())
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if !v.is_finite() || v < 0.0 {
            return Err(serde::de::Error::custom("rate must be a non-negative number"));
        }
        Ok(Rate::from_usd(v))
    }
}

/// USD per million tokens for each usage class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    #[serde(default)]
    prompt: Rate,
    #[serde(default)]
    completion: Rate,
    #[serde(default)]
    cache_read: Rate,
    #[serde(default)]
    cache_write: Rate,
}

impl CostModel {
    /// Rates in USD per million tokens. Panics on negative or non-finite
    /// input.
    pub fn per_million(prompt: f64, completion: f64, cache_read: f64, cache_write: f64) -> Self {
        Self {
            prompt: Rate::from_usd(prompt),
            completion: Rate::from_usd(completion),
            cache_read: Rate::from_usd(cache_read),
            cache_write: Rate::from_usd(cache_write),
        }
    }

    /// Exact cost in units of 10^-10 USD.
    pub fn cost_exact(&self, u: &TokenUsage) -> u128 {
        u.prompt_tokens as u128 * self.prompt.0 as u128
            + u.completion_tokens as u128 * self.completion.0 as u128
            + u.cache_read_tokens as u128 * self.cache_read.0 as u128
            + u.cache_write_tokens as u128 * self.cache_write.0 as u128
    }

    /// Cost rounded half-up to cents.
    pub fn cost(&self, u: &TokenUsage) -> Usd {
        round_cents(self.cost_exact(u))
    }

    /// Exact costs summed, then rounded once. Summing per-run [`cost`]s
    /// instead can drift by up to half a cent per run.
    ///
    /// [`cost`]: Self::cost
    pub fn total<'a>(&self, usages: impl IntoIterator<Item = &'a TokenUsage>) -> Usd {
        round_cents(usages.into_iter().map(|u| self.cost_exact(u)).sum())
    }
}

fn round_cents(exact: u128) -> Usd {
    const PER_CENT: u128 = 100_000_000;
    Usd(((exact + PER_CENT / 2) / PER_CENT) as i64)
}
