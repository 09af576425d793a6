//! Exact rationals and their wire format.
//!
//! Every endpoint, width and measure in the library is a [`Rational`].
//! On the wire a rational is `{"num": "<int>", "den": "<positive int>"}`
//! with both parts as decimal strings, so values of any size survive a
//! JSON round trip.

use crate::error::{Error, Result};
use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn from_biguint(n: &BigUint) -> Rational {
    Rational::from_integer(BigInt::from_biguint(Sign::Plus, n.clone()))
}

/// `2^e` for any integer exponent.
pub fn pow2(e: i64) -> Rational {
    if e >= 0 {
        Rational::from_integer(BigInt::one() << e as usize)
    } else {
        Rational::new(BigInt::one(), BigInt::one() << (-e) as usize)
    }
}

/// Parses `"3/8"`, `"-2"`, or a finite decimal such as `"0.125"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::InvalidParameter(format!("not a rational: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((ip, fp)) = s.split_once('.') {
        let neg = ip.starts_with('-');
        let digits = format!("{}{}", ip.trim_start_matches(['-', '+']), fp);
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10), fp.len());
        let v = Rational::new(n, d);
        return Ok(if neg { -v } else { v });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

/// `Some(k)` when `x = 2^k`.
pub fn exact_log2(x: &Rational) -> Option<i64> {
    if !x.is_positive() {
        return None;
    }
    let (n, d) = (x.numer(), x.denom());
    let pow_of_two = |v: &BigInt| v.magnitude().count_ones() == 1;
    if n.is_one() && pow_of_two(d) {
        Some(-(d.bits() as i64 - 1))
    } else if d.is_one() && pow_of_two(n) {
        Some(n.bits() as i64 - 1)
    } else {
        None
    }
}

/// True when the denominator is a power of two.
pub fn is_dyadic(x: &Rational) -> bool {
    x.denom().magnitude().count_ones() == 1
}

pub fn to_f64(x: &Rational) -> f64 {
    if let Some(v) = x.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    // Very large numerators/denominators: scale both down first.
    let nb = x.numer().bits() as i64;
    let db = x.denom().bits() as i64;
    let shift_n = (nb - 60).max(0);
    let shift_d = (db - 60).max(0);
    let n = (x.numer() >> shift_n as usize).to_f64().unwrap_or(0.0);
    let d = (x.denom() >> shift_d as usize).to_f64().unwrap_or(1.0);
    n / d * 2f64.powi((shift_n - shift_d) as i32)
}

pub fn floor_to_u64(x: &Rational) -> Option<u64> {
    x.floor().to_integer().to_u64()
}

pub fn ceil_to_u64(x: &Rational) -> Option<u64> {
    x.ceil().to_integer().to_u64()
}

/// Decimal rendering with `digits` places after the point (truncated
/// toward zero), used for human-readable CSV output.
pub fn to_decimal(x: &Rational, digits: usize) -> String {
    let neg = x.is_negative();
    let a = x.abs();
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = (a.numer() * &scale).div_floor(a.denom());
    let (ip, fp) = scaled.div_rem(&scale);
    let mut s = String::new();
    if neg && !(ip.is_zero() && fp.is_zero()) {
        s.push('-');
    }
    s.push_str(&ip.to_string());
    if digits > 0 {
        s.push('.');
        s.push_str(&format!("{:0>width$}", fp.to_string(), width = digits));
    }
    s
}

/// Exact `a/b` form.
pub fn to_fraction(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

#[derive(Serialize, Deserialize)]
struct Wire {
    num: String,
    den: String,
}

pub fn to_wire(x: &Rational) -> serde_json::Value {
    serde_json::json!({"num": x.numer().to_string(), "den": x.denom().to_string()})
}

fn from_wire(w: Wire) -> std::result::Result<Rational, String> {
    let n: BigInt = w.num.parse().map_err(|_| format!("bad numerator {:?}", w.num))?;
    let d: BigInt = w.den.parse().map_err(|_| format!("bad denominator {:?}", w.den))?;
    if d.is_zero() {
        return Err("zero denominator".into());
    }
    Ok(Rational::new(n, d))
}

/// `#[serde(with = "crate::rational::wire")]`
pub mod wire {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        Wire { num: x.numer().to_string(), den: x.denom().to_string() }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        from_wire(Wire::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

pub mod wire_vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<Wire> = xs
            .iter()
            .map(|x| Wire { num: x.numer().to_string(), den: x.denom().to_string() })
            .collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
        Vec::<Wire>::deserialize(d)?
            .into_iter()
            .map(|w| from_wire(w).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("3/8").unwrap(), rat(3, 8));
        assert_eq!(parse_rational("0.125").unwrap(), rat(1, 8));
        assert_eq!(parse_rational("-1.5").unwrap(), rat(-3, 2));
        assert_eq!(parse_rational("7").unwrap(), int(7));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn log2_of_powers() {
        assert_eq!(exact_log2(&rat(1, 64)), Some(-6));
        assert_eq!(exact_log2(&int(8)), Some(3));
        assert_eq!(exact_log2(&int(1)), Some(0));
        assert_eq!(exact_log2(&rat(3, 8)), None);
        assert!(is_dyadic(&rat(3, 8)));
        assert!(!is_dyadic(&rat(1, 3)));
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(to_decimal(&rat(1, 3), 4), "0.3333");
        assert_eq!(to_decimal(&rat(-5, 4), 2), "-1.25");
        assert_eq!(to_fraction(&rat(6, 4)), "3/2");
    }

    #[test]
    fn huge_to_f64() {
        let x = pow2(-3000) * int(3);
        assert_eq!(to_f64(&x), 0.0);
        let y = pow2(2000) / pow2(1999);
        assert_eq!(to_f64(&y), 2.0);
    }
}
