//! Exact rational arithmetic helpers.
//!
//! All feasibility-critical quantities in this crate are `BigRational`;
//! floating point only appears in the geometric layer (metric, embedding,
//! carving), never in a certificate.

use crate::error::{Error, Result};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Signed, ToPrimitive, Zero};

pub type Rat = BigRational;

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(num: i64) -> Rat {
    Rat::from_integer(BigInt::from(num))
}

pub fn rat_usize(num: usize) -> Rat {
    Rat::from_integer(BigInt::from(num))
}

pub fn zero() -> Rat {
    Rat::zero()
}

pub fn one() -> Rat {
    Rat::one()
}

/// Renders a rational as the canonical `p/q` string (`p` for integers).
pub fn rat_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p`, `p/q`, or a plain decimal string into an exact rational.
pub fn rat_from_str(s: &str) -> Result<Rat> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational numerator {num:?}")))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational denominator {den:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rat::new(n, d));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        let sign = if int_part.trim_start().starts_with('-') { -1 } else { 1 };
        let i: BigInt = if int_part.is_empty() || int_part == "-" || int_part == "+" {
            BigInt::zero()
        } else {
            int_part
                .parse()
                .map_err(|_| Error::Parse(format!("bad decimal {s:?}")))?
        };
        if !frac_part.chars().all(|c| c.is_ascii_digit()) {
            return Err(Error::Parse(format!("bad decimal {s:?}")));
        }
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let f: BigInt = if frac_part.is_empty() {
            BigInt::zero()
        } else {
            frac_part
                .parse()
                .map_err(|_| Error::Parse(format!("bad decimal {s:?}")))?
        };
        let whole = i * &scale + BigInt::from(sign) * f;
        return Ok(Rat::new(whole, scale));
    }
    let n: BigInt = s
        .parse()
        .map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
    Ok(Rat::from_integer(n))
}

/// Exact finite decimal expansion, if the reduced denominator is 2^a * 5^b.
pub fn rat_to_decimal(r: &Rat) -> Option<String> {
    let mut d = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let mut a = 0u32;
    let mut b = 0u32;
    while (&d % &two).is_zero() {
        d /= &two;
        a += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        b += 1;
    }
    if !d.is_one() {
        return None;
    }
    let e = a.max(b);
    // scale numerator so the denominator becomes 10^e
    let scaled = r.numer() * two.pow(e - a) * five.pow(e - b);
    let neg = scaled.is_negative();
    let digits = scaled.abs().to_string();
    let s = if e == 0 {
        digits
    } else {
        let digits = if digits.len() <= e as usize {
            format!("{}{}", "0".repeat(e as usize + 1 - digits.len()), digits)
        } else {
            digits
        };
        let split = digits.len() - e as usize;
        format!("{}.{}", &digits[..split], &digits[split..])
    };
    Some(if neg { format!("-{s}") } else { s })
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
