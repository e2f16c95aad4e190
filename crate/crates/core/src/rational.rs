//! Exact nonnegative rationals and the approximation routines built on them.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A nonnegative rational `num / den` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RationalWeight {
    num: u64,
    den: u64,
}

impl RationalWeight {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        let g = num.gcd(&den);
        Ok(Self { num: num / g, den: den / g })
    }

    pub const ONE: RationalWeight = RationalWeight { num: 1, den: 1 };
    pub const ZERO: RationalWeight = RationalWeight { num: 0, den: 1 };

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn den(self) -> u64 {
        self.den
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for RationalWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for RationalWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse = |t: &str| t.trim().parse::<u64>().map_err(|e| Error::InvalidInput(format!("bad rational {s:?}: {e}")));
        match s.split_once('/') {
            Some((n, d)) => Self::new(parse(n)?, parse(d)?),
            None => Self::new(parse(s)?, 1),
        }
    }
}

impl Serialize for RationalWeight {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RationalWeight {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Least common multiple of the denominators, checked against overflow.
pub fn common_denominator(weights: &[RationalWeight]) -> Result<u64> {
    weights.iter().try_fold(1u64, |acc, w| {
        let l = (acc as u128 / acc.gcd(&w.den) as u128) * w.den as u128;
        u64::try_from(l).map_err(|_| Error::InvalidInput("common denominator overflows u64".into()))
    })
}

/// Whether the weights sum to exactly one.
pub fn sums_to_one(weights: &[RationalWeight]) -> Result<bool> {
    let den = common_denominator(weights)?;
    let total: u128 = weights.iter().map(|w| w.num as u128 * (den / w.den) as u128).sum();
    Ok(total == den as u128)
}

/// The rational closest to `x` among those with denominator at most
/// `max_den`, found from the continued-fraction convergents of `x` and the
/// last admissible semiconvergent.
pub fn best_rational(x: f64, max_den: u64) -> RationalWeight {
    assert!(max_den >= 1);
    let x = x.max(0.0);
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a > u64::MAX as f64 / 2.0 {
            break;
        }
        let a = a as u64;
        let q2 = match a.checked_mul(q1).and_then(|v| v.checked_add(q0)) {
            Some(q) if q <= max_den => q,
            _ => break,
        };
        let Some(p2) = a.checked_mul(p1).and_then(|v| v.checked_add(p0)) else { break };
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = r - a as f64;
        if frac < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    if q1 == 0 {
        // x exceeds every admissible fraction's integer part
        return RationalWeight::new(x.round() as u64, 1).expect("den 1");
    }
    let k = (max_den - q0) / q1;
    let semi = RationalWeight::new(p0 + k * p1, q0 + k * q1).expect("positive den");
    let conv = RationalWeight::new(p1, q1).expect("positive den");
    if (semi.to_f64() - x).abs() < (conv.to_f64() - x).abs() {
        semi
    } else {
        conv
    }
}

/// Numerators over `den` approximating nonnegative `targets` that sum to
/// one: each target is rounded to the nearest multiple of `1/den`, then the
/// largest numerator absorbs whatever restores the exact sum `den`.
/// `None` if that would make it negative.
pub fn round_with_repair(targets: &[f64], den: u64) -> Option<Vec<u64>> {
    let mut nums: Vec<i128> = targets.iter().map(|&t| (t * den as f64).round().max(0.0) as i128).collect();
    let total: i128 = nums.iter().sum();
    let excess = total - den as i128;
    if excess != 0 {
        let largest = (0..nums.len()).max_by(|&a, &b| nums[a].cmp(&nums[b]).then(b.cmp(&a)))?;
        nums[largest] -= excess;
        if nums[largest] < 0 {
            return None;
        }
    }
    Some(nums.into_iter().map(|n| n as u64).collect())
}

fn within(targets: &[f64], nums: &[u64], den: u64, bound: f64) -> bool {
    targets.iter().zip(nums).all(|(&t, &n)| (t - n as f64 / den as f64).abs() < bound)
}

const EXTENDED_SEARCH: u64 = 10_000_000;

/// The smallest denominator `q <= max_den` for which [`round_with_repair`]
/// keeps every entry strictly within `bound` of its target.
///
/// On failure the search continues past `max_den` (up to the denominator at
/// which success is guaranteed, capped at ten million further steps) so the
/// error can name the denominator that would be needed.
pub fn common_denominator_approx(targets: &[f64], bound: f64, max_den: u64) -> Result<(u64, Vec<u64>)> {
    let (q, mut rows) = common_denominator_rows(&[targets], bound, max_den)?;
    Ok((q, rows.pop().expect("one row")))
}

/// [`common_denominator_approx`] for several distributions sharing one
/// denominator; each row is rounded and repaired separately.
pub fn common_denominator_rows(rows: &[&[f64]], bound: f64, max_den: u64) -> Result<(u64, Vec<Vec<u64>>)> {
    if rows.is_empty() || rows.iter().any(|r| r.is_empty()) {
        return Err(Error::InvalidInput("no targets".into()));
    }
    if !(bound > 0.0) {
        return Err(Error::InvalidInput(format!("bound {bound} must be positive")));
    }
    let try_den = |q: u64| -> Option<Vec<Vec<u64>>> {
        rows.iter()
            .map(|t| round_with_repair(t, q).filter(|nums| within(t, nums, q, bound)))
            .collect()
    };
    for q in 1..=max_den {
        if let Some(nums) = try_den(q) {
            return Ok((q, nums));
        }
    }
    let width = rows.iter().map(|r| r.len()).max().unwrap_or(1);
    let guaranteed = ((width as f64 + 1.0) / (2.0 * bound)).floor() + 1.0;
    let stop = (guaranteed.min(u64::MAX as f64 / 2.0) as u64).min(max_den.saturating_add(EXTENDED_SEARCH));
    let needed = (max_den.saturating_add(1)..=stop).find(|&q| try_den(q).is_some());
    Err(Error::DenominatorInfeasible { max_den, needed })
}
