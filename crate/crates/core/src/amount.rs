//! Exact fixed-point amounts.
//!
//! Every bid, refund and utility in the simulator is an [`Amount`]: a signed
//! count of nano-units (10⁻⁹). Integer instances stay exact, and so do the
//! small epsilons used by the collusion demonstration.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Number of nano-units in one whole unit.
pub const SCALE: i128 = 1_000_000_000;
const DECIMALS: usize = 9;

#[derive(Copy, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Amount(i128);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid amount `{input}`: {reason}")]
pub struct ParseAmountError {
    input: String,
    reason: &'static str,
}

impl Amount {
    pub const ZERO: Amount = Amount(0);

    pub const fn from_units(units: i64) -> Self {
        Amount(units as i128 * SCALE)
    }

    pub const fn from_nanos(nanos: i128) -> Self {
        Amount(nanos)
    }

    pub const fn nanos(self) -> i128 {
        self.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// Clamp to zero from below.
    pub fn non_negative(self) -> Self {
        Amount(self.0.max(0))
    }

    /// `self * num / den`, rounded toward negative infinity.
    ///
    /// Panics if `den` is zero.
    pub fn mul_ratio(self, num: i128, den: i128) -> Self {
        assert!(den != 0, "zero denominator");
        let numerator = self.0 * num;
        // div_euclid rounds toward -inf only for positive divisors.
        if den > 0 {
            Amount(numerator.div_euclid(den))
        } else {
            Amount((-numerator).div_euclid(-den))
        }
    }

    /// Ratio of two amounts as `f64`, for reporting only.
    pub fn ratio(self, other: Amount) -> Option<f64> {
        if other.0 == 0 {
            None
        } else {
            Some(self.0 as f64 / other.0 as f64)
        }
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / SCALE as u128;
        let frac = abs % SCALE as u128;
        let text = if frac == 0 {
            format!("{sign}{whole}")
        } else {
            let digits = format!("{frac:0width$}", width = DECIMALS);
            format!("{sign}{whole}.{}", digits.trim_end_matches('0'))
        };
        f.pad(&text)
    }
}

impl fmt::Debug for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Amount({self})")
    }
}

impl FromStr for Amount {
    type Err = ParseAmountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| ParseAmountError {
            input: s.to_string(),
            reason,
        };
        let trimmed = s.trim();
        let (negative, body) = match trimmed.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, trimmed.strip_prefix('+').unwrap_or(trimmed)),
        };
        if body.is_empty() {
            return Err(err("empty"));
        }
        let (whole, frac) = match body.split_once('.') {
            Some((w, f)) => (w, f),
            None => (body, ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return Err(err("no digits"));
        }
        if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit())
        {
            return Err(err("expected a decimal number"));
        }
        if frac.len() > DECIMALS {
            return Err(err("more than 9 fractional digits"));
        }
        let whole: i128 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| err("integer part out of range"))?
        };
        let mut frac_nanos: i128 = 0;
        for (pos, c) in frac.chars().enumerate() {
            let digit = c.to_digit(10).expect("checked digit") as i128;
            frac_nanos += digit * 10_i128.pow((DECIMALS - 1 - pos) as u32);
        }
        let nanos = whole
            .checked_mul(SCALE)
            .and_then(|w| w.checked_add(frac_nanos))
            .ok_or_else(|| err("out of range"))?;
        Ok(Amount(if negative { -nanos } else { nanos }))
    }
}

impl Add for Amount {
    type Output = Amount;
    fn add(self, rhs: Amount) -> Amount {
        Amount(self.0 + rhs.0)
    }
}

impl AddAssign for Amount {
    fn add_assign(&mut self, rhs: Amount) {
        self.0 += rhs.0;
    }
}

impl Sub for Amount {
    type Output = Amount;
    fn sub(self, rhs: Amount) -> Amount {
        Amount(self.0 - rhs.0)
    }
}

impl SubAssign for Amount {
    fn sub_assign(&mut self, rhs: Amount) {
        self.0 -= rhs.0;
    }
}

impl Neg for Amount {
    type Output = Amount;
    fn neg(self) -> Amount {
        Amount(-self.0)
    }
}

impl Sum for Amount {
    fn sum<I: Iterator<Item = Amount>>(iter: I) -> Amount {
        iter.fold(Amount::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Amount> for Amount {
    fn sum<I: Iterator<Item = &'a Amount>>(iter: I) -> Amount {
        iter.copied().sum()
    }
}

impl From<i64> for Amount {
    fn from(units: i64) -> Self {
        Amount::from_units(units)
    }
}

// Whole amounts serialize as JSON integers, fractional ones as decimal strings
// so that nothing passes through a binary float.
impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0 % SCALE == 0 {
            if let Ok(units) = i64::try_from(self.0 / SCALE) {
                return serializer.serialize_i64(units);
            }
        }
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct AmountVisitor;

        impl Visitor<'_> for AmountVisitor {
            type Value = Amount;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer or a decimal string with at most 9 fractional digits")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Amount, E> {
                Ok(Amount::from_units(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Amount, E> {
                Ok(Amount(v as i128 * SCALE))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Amount, E> {
                if !v.is_finite() {
                    return Err(E::custom("non-finite amount"));
                }
                // Shortest round-trip rendering, then exact decimal parse.
                format!("{v}").parse().map_err(E::custom)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Amount, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(AmountVisitor)
    }
}
