//! Exact rational time.
//!
//! All analysis quantities (costs, release offsets, workloads, response
//! times) are exact rationals. Values whose numerator and denominator stay
//! below 2^62 use a machine-word fast path; anything larger is promoted to
//! a [`BigRational`] and demoted again once it fits.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const LIMIT: i128 = 1 << 62;

/// An exact, non-floating point time value.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Time(Repr);

// Invariant: `Small` is used whenever the reduced value fits, so the
// derived equality and hashing are canonical. Denominators are positive.
#[derive(Clone, PartialEq, Eq, Hash)]
enum Repr {
    Small(i64, i64),
    Big(BigRational),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid time value {0:?}: expected an integer, a decimal or a fraction p/q")]
pub struct ParseTimeError(pub String);

impl Time {
    pub const ZERO: Time = Time(Repr::Small(0, 1));
    pub const ONE: Time = Time(Repr::Small(1, 1));

    pub fn from_integer(value: i64) -> Time {
        Time::from_i128(value as i128, 1)
    }

    /// Builds `numer / denom`. Panics if `denom` is zero.
    pub fn new(numer: i64, denom: i64) -> Time {
        assert!(denom != 0, "zero denominator");
        Time::from_i128(numer as i128, denom as i128)
    }

    pub fn from_big(value: BigRational) -> Time {
        Time::normalize_big(value)
    }

    fn from_i128(numer: i128, denom: i128) -> Time {
        debug_assert!(denom != 0);
        let (mut n, mut d) = if denom < 0 { (-numer, -denom) } else { (numer, denom) };
        let g = n.gcd(&d);
        if g > 1 {
            n /= g;
            d /= g;
        }
        if n.abs() < LIMIT && d < LIMIT {
            Time(Repr::Small(n as i64, d as i64))
        } else {
            Time(Repr::Big(BigRational::new(BigInt::from(n), BigInt::from(d))))
        }
    }

    fn normalize_big(value: BigRational) -> Time {
        if let (Some(n), Some(d)) = (value.numer().to_i128(), value.denom().to_i128()) {
            if n.abs() < LIMIT && d < LIMIT {
                return Time(Repr::Small(n as i64, d as i64));
            }
        }
        Time(Repr::Big(value))
    }

    fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Repr::Big(r) => r.clone(),
        }
    }

    pub fn numer(&self) -> BigInt {
        match &self.0 {
            Repr::Small(n, _) => BigInt::from(*n),
            Repr::Big(r) => r.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match &self.0 {
            Repr::Small(_, d) => BigInt::from(*d),
            Repr::Big(r) => r.denom().clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small(0, _))
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small(n, _) => *n < 0,
            Repr::Big(r) => r.is_negative(),
        }
    }

    pub fn is_positive(&self) -> bool {
        !self.is_zero() && !self.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small(_, d) => *d == 1,
            Repr::Big(r) => r.is_integer(),
        }
    }

    /// Largest integer not greater than `self`.
    pub fn floor(&self) -> Time {
        match &self.0 {
            Repr::Small(n, d) => Time::from_i128((*n as i128).div_euclid(*d as i128), 1),
            Repr::Big(r) => Time::normalize_big(r.floor()),
        }
    }

    /// Smallest integer not less than `self`.
    pub fn ceil(&self) -> Time {
        -(-self).floor()
    }

    /// `⌊self / divisor⌋` as an integer-valued time. `divisor` must be positive.
    pub fn div_floor(&self, divisor: &Time) -> Time {
        debug_assert!(divisor.is_positive());
        (self / divisor).floor()
    }

    /// `self − divisor·⌊self / divisor⌋`, always in `[0, divisor)`.
    pub fn rem_euclid(&self, divisor: &Time) -> Time {
        if let (Repr::Small(a, b), Repr::Small(c, d)) = (&self.0, &divisor.0) {
            // a/b mod c/d over the common denominator b·d.
            let (a, b, c, d) = (*a as i128, *b as i128, *c as i128, *d as i128);
            let lhs = a * d;
            let rhs = c * b;
            return Time::from_i128(lhs.rem_euclid(rhs), b * d);
        }
        self - &(divisor * &self.div_floor(divisor))
    }

    pub fn abs(&self) -> Time {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    /// `max(self, 0)`.
    pub fn clamp_non_negative(self) -> Time {
        if self.is_negative() {
            Time::ZERO
        } else {
            self
        }
    }

    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small(n, d) => *n as f64 / *d as f64,
            Repr::Big(r) => r.to_f64().unwrap_or(f64::NAN),
        }
    }

    /// Integer value, if `self` is an integer that fits in `i64`.
    pub fn to_i64(&self) -> Option<i64> {
        match &self.0 {
            Repr::Small(n, 1) => Some(*n),
            Repr::Small(..) => None,
            Repr::Big(r) if r.is_integer() => r.numer().to_i64(),
            Repr::Big(_) => None,
        }
    }

    /// Decimal rendering rounded half away from zero to `digits` fractional
    /// digits, with trailing zeros trimmed.
    pub fn to_decimal_string(&self, digits: usize) -> String {
        let scale = BigInt::from(10u32).pow(digits as u32);
        let r = self.to_big();
        let scaled = r * BigRational::from_integer(scale.clone());
        let rounded = scaled.round().to_integer();
        let negative = rounded.is_negative();
        let magnitude = rounded.abs();
        let (int_part, frac_part) = magnitude.div_rem(&scale);
        let mut out = String::new();
        if negative {
            out.push('-');
        }
        out.push_str(&int_part.to_string());
        if digits > 0 && !frac_part.is_zero() {
            let frac = format!("{:0>width$}", frac_part.to_string(), width = digits);
            out.push('.');
            out.push_str(frac.trim_end_matches('0'));
        }
        out
    }
}

impl Default for Time {
    fn default() -> Self {
        Time::ZERO
    }
}

impl From<i64> for Time {
    fn from(value: i64) -> Self {
        Time::from_integer(value)
    }
}

impl From<u32> for Time {
    fn from(value: u32) -> Self {
        Time::from_integer(value as i64)
    }
}

impl From<usize> for Time {
    fn from(value: usize) -> Self {
        Time::from_i128(value as i128, 1)
    }
}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => {
                ((*a as i128) * (*d as i128)).cmp(&((*c as i128) * (*b as i128)))
            }
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl PartialOrd for Time {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(n, 1) => write!(f, "{n}"),
            Repr::Small(n, d) => write!(f, "{n}/{d}"),
            Repr::Big(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Repr::Big(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

impl fmt::Debug for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Time {
    type Err = ParseTimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseTimeError(s.to_string());
        let text = s.trim();
        if text.is_empty() {
            return Err(err());
        }
        if let Some((num, den)) = text.split_once('/') {
            let num: BigInt = parse_signed_digits(num.trim()).ok_or_else(err)?;
            let den: BigInt = parse_signed_digits(den.trim()).ok_or_else(err)?;
            if den.is_zero() {
                return Err(err());
            }
            return Ok(Time::from_big(BigRational::new(num, den)));
        }
        let (negative, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text.strip_prefix('+').unwrap_or(text)),
        };
        let (int_digits, frac_digits) = body.split_once('.').unwrap_or((body, ""));
        if int_digits.is_empty() && frac_digits.is_empty() {
            return Err(err());
        }
        let all_digits = |d: &str| d.bytes().all(|b| b.is_ascii_digit());
        if !all_digits(int_digits) || !all_digits(frac_digits) {
            return Err(err());
        }
        let digits = format!("{int_digits}{frac_digits}");
        let mut numer: BigInt = digits.parse().map_err(|_| err())?;
        if negative {
            numer = -numer;
        }
        let denom = BigInt::from(10u32).pow(frac_digits.len() as u32);
        Ok(Time::from_big(BigRational::new(numer, denom)))
    }
}

fn parse_signed_digits(s: &str) -> Option<BigInt> {
    let body = s.strip_prefix('-').or_else(|| s.strip_prefix('+')).unwrap_or(s);
    if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

impl Serialize for Time {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Time {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct TimeVisitor;

        impl Visitor<'_> for TimeVisitor {
            type Value = Time;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an integer, a decimal string or a fraction string")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Time, E> {
                Ok(Time::from_integer(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Time, E> {
                Ok(Time::from_big(BigRational::from_integer(BigInt::from(v))))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Time, E> {
                // The shortest round-trip rendering is the decimal the user wrote.
                if !v.is_finite() {
                    return Err(E::custom(format!("non-finite time {v}")));
                }
                format!("{v}").parse().map_err(E::custom)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Time, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(TimeVisitor)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<Time> for Time {
            type Output = Time;
            fn $method(self, rhs: Time) -> Time {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Time> for Time {
            type Output = Time;
            fn $method(self, rhs: &Time) -> Time {
                (&self).$method(rhs)
            }
        }
        impl $trait<Time> for &Time {
            type Output = Time;
            fn $method(self, rhs: Time) -> Time {
                self.$method(&rhs)
            }
        }
    };
}

impl Add<&Time> for &Time {
    type Output = Time;
    fn add(self, rhs: &Time) -> Time {
        match (&self.0, &rhs.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => {
                let (a, b, c, d) = (*a as i128, *b as i128, *c as i128, *d as i128);
                if b == d {
                    Time::from_i128(a + c, b)
                } else {
                    Time::from_i128(a * d + c * b, b * d)
                }
            }
            _ => Time::normalize_big(self.to_big() + rhs.to_big()),
        }
    }
}

impl Sub<&Time> for &Time {
    type Output = Time;
    fn sub(self, rhs: &Time) -> Time {
        match (&self.0, &rhs.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => {
                let (a, b, c, d) = (*a as i128, *b as i128, *c as i128, *d as i128);
                if b == d {
                    Time::from_i128(a - c, b)
                } else {
                    Time::from_i128(a * d - c * b, b * d)
                }
            }
            _ => Time::normalize_big(self.to_big() - rhs.to_big()),
        }
    }
}

impl Mul<&Time> for &Time {
    type Output = Time;
    fn mul(self, rhs: &Time) -> Time {
        match (&self.0, &rhs.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => {
                Time::from_i128((*a as i128) * (*c as i128), (*b as i128) * (*d as i128))
            }
            _ => Time::normalize_big(self.to_big() * rhs.to_big()),
        }
    }
}

impl Div<&Time> for &Time {
    type Output = Time;
    fn div(self, rhs: &Time) -> Time {
        assert!(!rhs.is_zero(), "division of time by zero");
        match (&self.0, &rhs.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => {
                Time::from_i128((*a as i128) * (*d as i128), (*b as i128) * (*c as i128))
            }
            _ => Time::normalize_big(self.to_big() / rhs.to_big()),
        }
    }
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for &Time {
    type Output = Time;
    fn neg(self) -> Time {
        match &self.0 {
            Repr::Small(n, d) => Time(Repr::Small(-n, *d)),
            Repr::Big(r) => Time::normalize_big(-r.clone()),
        }
    }
}

impl Neg for Time {
    type Output = Time;
    fn neg(self) -> Time {
        -&self
    }
}

impl AddAssign<&Time> for Time {
    fn add_assign(&mut self, rhs: &Time) {
        *self = &*self + rhs;
    }
}

impl AddAssign<Time> for Time {
    fn add_assign(&mut self, rhs: Time) {
        *self = &*self + &rhs;
    }
}

impl SubAssign<&Time> for Time {
    fn sub_assign(&mut self, rhs: &Time) {
        *self = &*self - rhs;
    }
}

impl SubAssign<Time> for Time {
    fn sub_assign(&mut self, rhs: Time) {
        *self = &*self - &rhs;
    }
}

impl Sum for Time {
    fn sum<I: Iterator<Item = Time>>(iter: I) -> Time {
        iter.fold(Time::ZERO, |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Time> for Time {
    fn sum<I: Iterator<Item = &'a Time>>(iter: I) -> Time {
        iter.fold(Time::ZERO, |acc, x| acc + x)
    }
}

impl One for Time {
    fn one() -> Self {
        Time::ONE
    }
}

impl Zero for Time {
    fn zero() -> Self {
        Time::ZERO
    }

    fn is_zero(&self) -> bool {
        Time::is_zero(self)
    }
}
