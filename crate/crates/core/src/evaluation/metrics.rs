//! Knowledge score, better-than-chance predicate and relative gain.
//!
//! Scores are kept as exact counts; conversion to reals happens only at the
//! edges (gains, rendering).

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Accuracy as an exact `correct / total` count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KnowledgeScore {
    correct: u64,
    total: u64,
}

impl KnowledgeScore {
    pub fn new(correct: u64, total: u64) -> Result<Self> {
        if total == 0 {
            return Err(Error::invalid("knowledge score over zero questions"));
        }
        if correct > total {
            return Err(Error::invalid(format!(
                "{correct} correct answers out of {total} questions"
            )));
        }
        Ok(Self { correct, total })
    }

    /// Accuracy over a sequence of correct/incorrect outcomes.
    pub fn from_outcomes<I: IntoIterator<Item = bool>>(outcomes: I) -> Result<Self> {
        let (mut correct, mut total) = (0u64, 0u64);
        for ok in outcomes {
            total += 1;
            correct += u64::from(ok);
        }
        Self::new(correct, total)
    }

    /// Exact score from a reported decimal such as `0.481` (481/1000).
    pub fn from_decimal(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("`{s}` is not a decimal in [0, 1]"));
        let (int, frac) = s.trim().split_once('.').unwrap_or((s.trim(), ""));
        if int.is_empty() && frac.is_empty()
            || !int.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
            || frac.len() > 18
        {
            return Err(bad());
        }
        let total = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_v: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let correct = int
            .checked_mul(total)
            .and_then(|v| v.checked_add(frac_v))
            .ok_or_else(bad)?;
        Self::new(correct, total).map_err(|_| bad())
    }

    pub fn correct(&self) -> u64 {
        self.correct
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Reduced exact value.
    pub fn value(&self) -> Ratio<u64> {
        Ratio::new(self.correct, self.total)
    }

    pub fn to_real<T: Scalar>(&self) -> T {
        T::from_f64_lossy(self.correct as f64 / self.total as f64)
    }

    /// Half-to-even rounding to `places` decimals, computed exactly.
    pub fn to_fixed(&self, places: u32) -> String {
        round_half_even(self.correct as u128, self.total as u128, places)
    }
}

impl fmt::Display for KnowledgeScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_fixed(3))
    }
}

impl FromStr for KnowledgeScore {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_decimal(s)
    }
}

/// Renders `num / den` with `places` decimals, ties to even.
pub(crate) fn round_half_even(num: u128, den: u128, places: u32) -> String {
    let scale = 10u128.pow(places);
    let scaled = num * scale;
    let mut q = scaled / den;
    let r = scaled % den;
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Greater => q += 1,
        std::cmp::Ordering::Equal if q % 2 == 1 => q += 1,
        _ => {}
    }
    let int = q / scale;
    let frac = q % scale;
    if places == 0 {
        int.to_string()
    } else {
        format!("{int}.{frac:0width$}", width = places as usize)
    }
}

/// Better than uniform guessing among `options` choices, strictly.
pub fn has_knowledge(score: &KnowledgeScore, options: usize) -> bool {
    // correct/total > 1/L  <=>  correct·L > total
    (score.correct as u128) * (options as u128) > score.total as u128
}

/// `(injected − base) / base`, exactly.
pub fn relative_gain_exact(base: &KnowledgeScore, injected: &KnowledgeScore) -> Result<Ratio<i128>> {
    if base.correct == 0 {
        return Err(Error::invalid("relative gain undefined for a zero base score"));
    }
    let (cb, tb) = (base.correct as i128, base.total as i128);
    let (ci, ti) = (injected.correct as i128, injected.total as i128);
    Ok(Ratio::new(ci * tb - cb * ti, cb * ti))
}

/// Relative accuracy gain of `injected` over `base`.
pub fn relative_gain<T: Scalar>(base: &KnowledgeScore, injected: &KnowledgeScore) -> Result<T> {
    let g = relative_gain_exact(base, injected)?;
    Ok(T::from_f64_lossy(*g.numer() as f64 / *g.denom() as f64))
}
