//! Exact text encoding of `f64` as C99 hexadecimal floating point.
//!
//! The output matches Python's `float.hex()` (`0x1.999999999999ap-4`,
//! `0x0.0p+0`), so model files can be decoded bit-exactly elsewhere.
//! Parsing accepts any hex-float with up to 13 fraction digits.

use std::fmt::Write;

pub fn format(x: f64) -> String {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let mantissa = bits & ((1u64 << 52) - 1);
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return format!("{sign}inf");
    }
    if exp_bits == 0 && mantissa == 0 {
        return format!("{sign}0x0.0p+0");
    }
    let mut s = String::with_capacity(24);
    s.push_str(sign);
    if exp_bits == 0 {
        let _ = write!(s, "0x0.{mantissa:013x}p-1022");
    } else {
        let e = exp_bits - 1023;
        let _ = write!(s, "0x1.{mantissa:013x}p{}{}", if e >= 0 { "+" } else { "-" }, e.abs());
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseHexFloatError(pub String);

impl std::fmt::Display for ParseHexFloatError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid hex float '{}'", self.0)
    }
}

impl std::error::Error for ParseHexFloatError {}

pub fn parse(s: &str) -> Result<f64, ParseHexFloatError> {
    let err = || ParseHexFloatError(s.to_string());
    let (negative, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let signed = |v: f64| if negative { -v } else { v };
    match rest {
        "inf" => return Ok(signed(f64::INFINITY)),
        "nan" => return Ok(f64::NAN),
        _ => {}
    }
    let rest = rest.strip_prefix("0x").ok_or_else(err)?;
    let (mant, exp) = rest.split_once('p').ok_or_else(err)?;
    let exp: i32 = exp.parse().map_err(|_| err())?;
    let (lead, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if frac.len() > 13 || lead.is_empty() {
        return Err(err());
    }
    let lead = u64::from_str_radix(lead, 16).map_err(|_| err())?;
    let frac_bits = if frac.is_empty() {
        0
    } else {
        u64::from_str_radix(frac, 16).map_err(|_| err())? << (4 * (13 - frac.len()))
    };
    let value = match lead {
        0 if frac_bits == 0 => 0.0,
        0 if exp == -1022 => f64::from_bits(frac_bits),
        1 if (-1022..=1023).contains(&exp) => f64::from_bits((((exp + 1023) as u64) << 52) | frac_bits),
        _ => return Err(err()),
    };
    Ok(signed(value))
}

/// `#[serde(with = "crate::hexfloat")]` for a single `f64`.
pub fn serialize<S: serde::Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format(*x))
}

pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let text = <String as serde::Deserialize>::deserialize(d)?;
    parse(&text).map_err(serde::de::Error::custom)
}

/// `#[serde(with = "crate::hexfloat::vec")]` for `Vec<f64>`.
pub mod vec {
    use serde::ser::SerializeSeq;

    pub fn serialize<S: serde::Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&super::format(*x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let texts = <Vec<String> as serde::Deserialize>::deserialize(d)?;
        texts
            .iter()
            .map(|t| super::parse(t).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// `#[serde(with = "crate::hexfloat::rows")]` for `Vec<[f64; 4]>`.
pub mod rows {
    use serde::ser::SerializeSeq;

    pub fn serialize<S: serde::Serializer>(rows: &[[f64; 4]], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(rows.len()))?;
        for r in rows {
            seq.serialize_element(&r.map(super::format))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<[f64; 4]>, D::Error> {
        let texts = <Vec<[String; 4]> as serde::Deserialize>::deserialize(d)?;
        texts
            .iter()
            .map(|r| {
                let mut out = [0.0; 4];
                for (o, t) in out.iter_mut().zip(r) {
                    *o = super::parse(t).map_err(serde::de::Error::custom)?;
                }
                Ok(out)
            })
            .collect()
    }
}

/// `#[serde(with = "crate::hexfloat::array4")]` for `[f64; 4]`.
pub mod array4 {
    pub fn serialize<S: serde::Serializer>(xs: &[f64; 4], s: S) -> Result<S::Ok, S::Error> {
        serde::Serialize::serialize(&xs.map(super::format), s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<[f64; 4], D::Error> {
        let texts = <[String; 4] as serde::Deserialize>::deserialize(d)?;
        let mut out = [0.0; 4];
        for (o, t) in out.iter_mut().zip(&texts) {
            *o = super::parse(t).map_err(serde::de::Error::custom)?;
        }
        Ok(out)
    }
}
