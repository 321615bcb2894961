//! Exact arithmetic helpers: rationals, decimal text, and integer micro-USD.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Exact rational number used for counts, quantities and rates.
pub type Rational = BigRational;

/// Seconds in a billing month (30 days).
pub const SECONDS_PER_MONTH: u64 = 2_592_000;

/// Bytes in a decimal gigabyte.
pub const BYTES_PER_GB: u64 = 1_000_000_000;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `12`, `-3.25`, `1e-7`, `2.5E3` or `7/9` into an exact rational.
pub fn parse_decimal(text: &str) -> Option<Rational> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if exponent.unsigned_abs() > 400 {
        return None;
    }
    let joined = format!("{whole}{frac}");
    let mut numer: BigInt = if joined.is_empty() { BigInt::zero() } else { joined.parse().ok()? };
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    })
}

/// Renders a rational as exact decimal text when it terminates, otherwise as `n/d`.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        return value.numer().to_string();
    }
    match terminating_digits(value.denom()) {
        Some(places) => format_fixed(value, places),
        None => format!("{}/{}", value.numer(), value.denom()),
    }
}

/// Renders a rational as decimal text, rounding non-terminating values to 12 places.
pub fn format_decimal(value: &Rational) -> String {
    if value.is_integer() {
        return value.numer().to_string();
    }
    match terminating_digits(value.denom()) {
        Some(places) => format_fixed(value, places),
        None => {
            let text = format_fixed(value, 12);
            let trimmed = text.trim_end_matches('0');
            trimmed.trim_end_matches('.').to_string()
        }
    }
}

fn terminating_digits(denom: &BigInt) -> Option<usize> {
    let mut d = denom.clone();
    let (mut twos, mut fives) = (0usize, 0usize);
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while d.is_even() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    d.is_one().then(|| twos.max(fives))
}

fn format_fixed(value: &Rational, places: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), places);
    let scaled = round_half_even(&(value * Rational::from_integer(scale)));
    let negative = scaled.is_negative();
    let digits = scaled.abs().to_string();
    let digits = if digits.len() <= places {
        format!("{}{}", "0".repeat(places + 1 - digits.len()), digits)
    } else {
        digits
    };
    let (whole, frac) = digits.split_at(digits.len() - places);
    let sign = if negative { "-" } else { "" };
    if places == 0 {
        format!("{sign}{whole}")
    } else {
        format!("{sign}{whole}.{frac}")
    }
}

/// Rounds to the nearest integer, ties to even.
pub fn round_half_even(value: &Rational) -> BigInt {
    let floor = value.floor().to_integer();
    let remainder = value - Rational::from_integer(floor.clone());
    let twice = remainder * int(2);
    if twice > Rational::one() || (twice == Rational::one() && floor.is_odd()) {
        floor + 1
    } else {
        floor
    }
}

/// Money as an integer number of micro-USD (10⁻⁶ USD).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Micros(pub i64);

impl Micros {
    pub const ZERO: Micros = Micros(0);

    /// Rounds an exact micro-USD amount half-to-even.
    pub fn round(value: &Rational) -> Micros {
        let rounded = round_half_even(value);
        Micros(rounded.to_i64().expect("monetary amount exceeds i64 micro-USD"))
    }

    pub fn as_rational(self) -> Rational {
        int(self.0)
    }

    /// `$1.036800` style display with six decimals.
    pub fn display(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Micros {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}${}.{:06}", abs / 1_000_000, abs % 1_000_000)
    }
}

impl Add for Micros {
    type Output = Micros;
    fn add(self, rhs: Micros) -> Micros {
        Micros(self.0.checked_add(rhs.0).expect("micro-USD overflow"))
    }
}

impl AddAssign for Micros {
    fn add_assign(&mut self, rhs: Micros) {
        *self = *self + rhs;
    }
}

impl Sub for Micros {
    type Output = Micros;
    fn sub(self, rhs: Micros) -> Micros {
        Micros(self.0.checked_sub(rhs.0).expect("micro-USD overflow"))
    }
}

impl Neg for Micros {
    type Output = Micros;
    fn neg(self) -> Micros {
        Micros(-self.0)
    }
}

impl Sum for Micros {
    fn sum<I: Iterator<Item = Micros>>(iter: I) -> Micros {
        iter.fold(Micros::ZERO, Add::add)
    }
}

/// Serde adapter: rationals travel as strings (`"0.4"`, `"1/3"`); integers and
/// decimal strings are accepted on input.
pub mod serde_rational {
    use super::*;
    use serde::de::Error;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let raw = serde_json::Value::deserialize(d)?;
        from_json(&raw).ok_or_else(|| D::Error::custom(format!("not an exact number: {raw}")))
    }

    pub(crate) fn from_json(raw: &serde_json::Value) -> Option<Rational> {
        match raw {
            serde_json::Value::Number(n) => parse_decimal(&n.to_string()),
            serde_json::Value::String(s) => parse_decimal(s),
            _ => None,
        }
    }
}

/// Serde adapter for hand-written files: integers travel as JSON numbers,
/// other rationals as decimal strings.
pub mod serde_number {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        if value.is_integer() {
            if let Some(i) = value.to_integer().to_i64() {
                return s.serialize_i64(i);
            }
        }
        s.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        serde_rational::deserialize(d)
    }
}

/// Serde adapter for `Option<Rational>`; `null` maps to `None`.
pub mod serde_rational_opt {
    use super::*;
    use serde::de::Error;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => s.serialize_str(&format_rational(v)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let raw = serde_json::Value::deserialize(d)?;
        if raw.is_null() {
            return Ok(None);
        }
        serde_rational::from_json(&raw)
            .map(Some)
            .ok_or_else(|| D::Error::custom(format!("not an exact number: {raw}")))
    }
}
