//! Exact rational helpers on top of `num_rational::BigRational`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::{Error, Result};

/// Arbitrary-precision rational used for every endpoint, measure and density.
pub type Rational = BigRational;

/// `num / den` as a reduced rational. Panics on `den == 0`.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn from_u64(n: u64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Floor of a non-negative rational as `u64`.
///
/// Negative inputs clamp to 0; values beyond `u64::MAX` are an error.
pub fn floor_u64(x: &Rational) -> Result<u64> {
    if x.is_negative() {
        return Ok(0);
    }
    x.floor()
        .to_integer()
        .to_u64()
        .ok_or_else(|| Error::InvalidInput(format!("{x} does not fit in u64")))
}

/// Closest `f64` to `x`. Used only for reporting.
pub fn to_f64(x: &Rational) -> f64 {
    if let Some(v) = x.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    // Huge numerator and denominator: scale both down to a common shift.
    let nb = x.numer().bits() as i64;
    let db = x.denom().bits() as i64;
    let shift_n = (nb - 60).max(0) as usize;
    let shift_d = (db - 60).max(0) as usize;
    let n = (x.numer() >> shift_n).to_f64().unwrap_or(0.0);
    let d = (x.denom() >> shift_d).to_f64().unwrap_or(1.0);
    n / d * 2f64.powi((shift_n as i64 - shift_d as i64) as i32)
}

/// The exact value of a finite `f64`.
pub fn from_f64_exact(v: f64) -> Result<Rational> {
    Rational::from_float(v).ok_or_else(|| Error::InvalidInput(format!("{v} is not finite")))
}

/// Parses `"p/q"`, `"n"` or a plain decimal such as `"0.4"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::InvalidInput(format!("cannot parse `{s}` as a rational"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = int.starts_with('-');
        let int_part: BigInt = if int.is_empty() || int == "-" {
            BigInt::zero()
        } else {
            int.parse().map_err(|_| bad())?
        };
        let frac_part: BigInt = frac.parse().map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let mag = Rational::new(int_part.abs() * &scale + frac_part, scale);
        return Ok(if negative { -mag } else { mag });
    }
    s.parse::<BigInt>().map(Rational::from_integer).map_err(|_| bad())
}

/// Exact dyadic upper bound `m / 2^shift >= x` for a positive rational, with
/// `m < 2^65`. Lets hot loops reject candidates with a short integer compare
/// before touching a large denominator.
pub fn dyadic_upper_bound(x: &Rational) -> (BigInt, u64) {
    debug_assert!(x.is_positive());
    // x = n/d; pick shift so that n * 2^shift / d has about 64 bits.
    let nb = x.numer().bits() as i64;
    let db = x.denom().bits() as i64;
    let shift = (64 - (nb - db)).max(0) as u64;
    let scaled = x.numer() << shift as usize;
    let (q, r) = scaled.div_rem(x.denom());
    let m = if r.is_zero() { q } else { q + BigInt::one() };
    (m, shift)
}

/// Canonical `p/q` string (integers print without a denominator).
pub fn to_exact_string(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}
