use std::fmt;

use num_traits::ToPrimitive;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::num::{format_decimal, format_rational, parse_decimal, Rational};

/// A scalar annotation or assumption value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scalar {
    Number(Rational),
    Text(String),
    /// Whole seconds.
    Duration(u64),
    Bool(bool),
}

impl Scalar {
    /// Numeric view; durations read as seconds.
    pub fn as_number(&self) -> Option<Rational> {
        match self {
            Scalar::Number(n) => Some(n.clone()),
            Scalar::Duration(s) => Some(Rational::from_integer((*s).into())),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Scalar::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Parses command-line text: numbers, `90s`/`2m`/`1h`/`1d` durations,
    /// booleans, and anything else as a string.
    pub fn parse_cli(text: &str) -> Scalar {
        if let Some(n) = parse_decimal(text) {
            return Scalar::Number(n);
        }
        if let Some(secs) = parse_duration(text) {
            return Scalar::Duration(secs);
        }
        match text {
            "true" => Scalar::Bool(true),
            "false" => Scalar::Bool(false),
            _ => Scalar::Text(text.to_string()),
        }
    }

    /// Converts a JSON value from an API request; objects, arrays and null are rejected.
    /// Strings holding exact decimals or durations read as such, so values
    /// that [`Scalar::to_json`] writes as strings come back unchanged.
    pub fn from_json(value: &serde_json::Value) -> Option<Scalar> {
        match value {
            serde_json::Value::Number(n) => parse_decimal(&n.to_string()).map(Scalar::Number),
            serde_json::Value::String(s) => Some(match (parse_decimal(s), parse_duration(s)) {
                (Some(n), _) => Scalar::Number(n),
                (None, Some(secs)) => Scalar::Duration(secs),
                _ => Scalar::Text(s.clone()),
            }),
            serde_json::Value::Bool(b) => Some(Scalar::Bool(*b)),
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Scalar::Number(n) => number_json(n),
            Scalar::Text(s) => serde_json::Value::String(s.clone()),
            Scalar::Duration(s) => serde_json::Value::String(format!("{s}s")),
            Scalar::Bool(b) => serde_json::Value::Bool(*b),
        }
    }

    /// Source text for this value inside an annotation object literal.
    pub fn to_source(&self) -> String {
        match self {
            Scalar::Number(n) => format_decimal(n),
            Scalar::Text(s) => quote(s),
            Scalar::Duration(s) => format!("{s}s"),
            Scalar::Bool(b) => b.to_string(),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Text(s) => f.write_str(s),
            other => f.write_str(&other.to_source()),
        }
    }
}

/// Integers that fit an f64 exactly and decimals whose shortest f64 form
/// parses back to the same value travel as JSON numbers; the rest as strings.
fn number_json(n: &Rational) -> serde_json::Value {
    if n.is_integer() {
        if let Some(i) = n.to_integer().to_i64() {
            if i.unsigned_abs() < (1u64 << 53) {
                return serde_json::Value::from(i);
            }
        }
    } else if let Some(f) = n.to_f64() {
        if f.is_finite() && parse_decimal(&f.to_string()).as_ref() == Some(n) {
            if let Some(num) = serde_json::Number::from_f64(f) {
                return serde_json::Value::Number(num);
            }
        }
    }
    serde_json::Value::String(format_rational(n))
}

pub fn parse_duration(text: &str) -> Option<u64> {
    let unit = text.chars().last()?;
    let factor = match unit {
        's' => 1,
        'm' => 60,
        'h' => 3600,
        'd' => 86_400,
        _ => return None,
    };
    let digits = &text[..text.len() - 1];
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse::<u64>().ok()?.checked_mul(factor)
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = serde_json::Value::deserialize(d)?;
        Scalar::from_json(&raw).ok_or_else(|| serde::de::Error::custom("expected a scalar value"))
    }
}
