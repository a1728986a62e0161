//! Exact rationals and the extended nonnegative reals.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Q = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational {text:?}")]
pub struct ParseQError {
    pub text: String,
}

/// Parses `"p/q"` or an integer string. Leading `+` and whitespace are rejected.
pub fn parse_q(text: &str) -> Result<Q, ParseQError> {
    let err = || ParseQError { text: text.to_string() };
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n, Some(d)),
        None => (text, None),
    };
    let ok_int = |s: &str| {
        let digits = s.strip_prefix('-').unwrap_or(s);
        !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
    };
    if !ok_int(num) {
        return Err(err());
    }
    let n = BigInt::from_str(num).map_err(|_| err())?;
    let d = match den {
        Some(d) if ok_int(d) && !d.starts_with('-') => BigInt::from_str(d).map_err(|_| err())?,
        Some(_) => return Err(err()),
        None => BigInt::one(),
    };
    if d.is_zero() {
        return Err(err());
    }
    Ok(Q::new(n, d))
}

/// Canonical text form: `"p/q"` in lowest terms, or the integer alone.
pub fn fmt_q(q: &Q) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Lossy decimal view, for human-readable reports only.
pub fn approx(q: &Q) -> f64 {
    use num_traits::ToPrimitive;
    q.to_f64().unwrap_or(f64::NAN)
}

/// Serde adapter: a rational as a string, also accepting a JSON integer on input.
pub mod qstr {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        QText::deserialize(d).map(|t| t.0)
    }
}

/// Serde adapter for a list of rationals.
pub mod qvec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(fmt_q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        Ok(Vec::<QText>::deserialize(d)?.into_iter().map(|t| t.0).collect())
    }
}

/// A rational that (de)serializes as its canonical string.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QText(pub Q);

impl Serialize for QText {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(&self.0))
    }
}

impl<'de> Deserialize<'de> for QText {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) => parse_q(&t).map(QText).map_err(serde::de::Error::custom),
            Raw::Int(i) => Ok(QText(qi(i))),
        }
    }
}

/// A nonnegative rational or +infinity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExtValue {
    Finite(Q),
    Infinite,
}

impl ExtValue {
    pub fn zero() -> Self {
        ExtValue::Finite(Q::zero())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtValue::Finite(_))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExtValue::Finite(v) if v.is_zero())
    }

    pub fn finite(&self) -> Option<&Q> {
        match self {
            ExtValue::Finite(v) => Some(v),
            ExtValue::Infinite => None,
        }
    }

    /// Product with a finite factor. `∞ · 0` is treated as 0: callers only
    /// multiply an infinite scale by zero on paths the scale never reaches.
    pub fn scale(&self, k: &Q) -> ExtValue {
        match self {
            ExtValue::Finite(v) => ExtValue::Finite(v * k),
            ExtValue::Infinite if k.is_zero() => ExtValue::zero(),
            ExtValue::Infinite => ExtValue::Infinite,
        }
    }

    /// Quotient by a positive rational.
    pub fn div(&self, k: &Q) -> ExtValue {
        assert!(k.is_positive(), "division of ExtValue by a non-positive rational");
        match self {
            ExtValue::Finite(v) => ExtValue::Finite(v / k),
            ExtValue::Infinite => ExtValue::Infinite,
        }
    }

    pub fn max(self, other: ExtValue) -> ExtValue {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: ExtValue) -> ExtValue {
        if self <= other {
            self
        } else {
            other
        }
    }

    /// Product of two extended values; `None` for the undefined `∞ · 0`.
    pub fn mul(&self, other: &ExtValue) -> Option<ExtValue> {
        match (self, other) {
            (ExtValue::Finite(a), ExtValue::Finite(b)) => Some(ExtValue::Finite(a * b)),
            (ExtValue::Infinite, x) | (x, ExtValue::Infinite) => {
                if x.is_zero() {
                    None
                } else {
                    Some(ExtValue::Infinite)
                }
            }
        }
    }
}

impl From<Q> for ExtValue {
    fn from(v: Q) -> Self {
        ExtValue::Finite(v)
    }
}

impl PartialOrd for ExtValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtValue::Finite(a), ExtValue::Finite(b)) => a.cmp(b),
            (ExtValue::Finite(_), ExtValue::Infinite) => Ordering::Less,
            (ExtValue::Infinite, ExtValue::Finite(_)) => Ordering::Greater,
            (ExtValue::Infinite, ExtValue::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for ExtValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtValue::Finite(v) => f.write_str(&fmt_q(v)),
            ExtValue::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for ExtValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExtValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let t = String::deserialize(d)?;
        if t == "inf" {
            Ok(ExtValue::Infinite)
        } else {
            parse_q(&t).map(ExtValue::Finite).map_err(serde::de::Error::custom)
        }
    }
}
