//! Numeric backends for curve arithmetic.
//!
//! Curves are generic over a [`Scalar`]. Two backends are provided: exact
//! arbitrary-precision rationals ([`Rational`]) and `f64`. Equality on the
//! rational backend is exact; on `f64` it uses a relative tolerance of `1e-9`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

/// Exact rational numbers.
pub type Rational = BigRational;

/// Relative tolerance used by the `f64` backend.
pub const F64_TOLERANCE: f64 = 1e-9;

pub trait Scalar:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Equality up to the backend's tolerance (exact for rationals).
    fn approx_eq(&self, other: &Self) -> bool;

    /// Converts from `f64`. Exact for rationals whenever the input is finite.
    fn from_f64(x: f64) -> Self;

    fn to_f64(&self) -> f64;

    /// Smallest integer not below `self`.
    fn ceil(&self) -> Self;

    /// Parses a decimal literal, an integer, or a `p/q` fraction.
    fn parse_literal(s: &str) -> Option<Self>;

    fn from_int(n: i64) -> Self;

    fn from_ratio(n: i64, d: i64) -> Self {
        Self::from_int(n) / Self::from_int(d)
    }

    fn approx_le(&self, other: &Self) -> bool {
        self <= other || self.approx_eq(other)
    }

    fn approx_lt(&self, other: &Self) -> bool {
        self < other && !self.approx_eq(other)
    }

    fn approx_zero(&self) -> bool {
        self.approx_eq(&Self::zero())
    }

    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if a <= b {
            a
        } else {
            b
        }
    }
}

impl Scalar for f64 {
    fn approx_eq(&self, other: &Self) -> bool {
        let scale = 1.0_f64.max(self.abs()).max(other.abs());
        (self - other).abs() <= F64_TOLERANCE * scale
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn ceil(&self) -> Self {
        // ratios such as 0.7 / 0.1 land just above an integer
        let r = self.round();
        if r.approx_eq(self) {
            r
        } else {
            f64::ceil(*self)
        }
    }

    fn parse_literal(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: f64 = n.trim().parse().ok()?;
            let d: f64 = d.trim().parse().ok()?;
            if d == 0.0 {
                return None;
            }
            return Some(n / d);
        }
        let v: f64 = s.parse().ok()?;
        v.is_finite().then_some(v)
    }

    fn from_int(n: i64) -> Self {
        n as f64
    }
}

impl Scalar for Rational {
    fn approx_eq(&self, other: &Self) -> bool {
        self == other
    }

    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite f64")
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            if self.is_negative() {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        })
    }

    fn ceil(&self) -> Self {
        BigRational::ceil(self)
    }

    fn parse_literal(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            return Some(BigRational::new(n, d));
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (mantissa, exponent) = match body.split_once(['e', 'E']) {
            Some((m, e)) => (m, e.parse::<i32>().ok()?),
            None => (body, 0),
        };
        let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return None;
        }
        let digits: BigInt = format!("{int_part}{frac_part}0").parse().ok()?;
        let mut value = BigRational::new(digits, BigInt::from(10));
        let scale = exponent - frac_part.len() as i32;
        let ten = BigRational::from_integer(BigInt::from(10));
        for _ in 0..scale.unsigned_abs() {
            if scale > 0 {
                value = value * ten.clone();
            } else {
                value = value / ten.clone();
            }
        }
        Some(if neg { -value } else { value })
    }

    fn from_int(n: i64) -> Self {
        BigRational::from_i64(n).expect("i64 fits")
    }
}

/// A value in `[0, +inf]` (or any finite scalar) extended with `+inf`.
#[derive(Clone, Debug, PartialEq)]
pub enum Ext<T> {
    Fin(T),
    Inf,
}

impl<T: Scalar> Ext<T> {
    pub fn zero() -> Self {
        Ext::Fin(T::zero())
    }

    pub fn is_inf(&self) -> bool {
        matches!(self, Ext::Inf)
    }

    pub fn finite(&self) -> Option<&T> {
        match self {
            Ext::Fin(v) => Some(v),
            Ext::Inf => None,
        }
    }

    pub fn into_finite(self) -> Option<T> {
        match self {
            Ext::Fin(v) => Some(v),
            Ext::Inf => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Ext::Fin(v) => v.to_f64(),
            Ext::Inf => f64::INFINITY,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        match (self, other) {
            (Ext::Fin(a), Ext::Fin(b)) => Ext::Fin(a.clone() + b.clone()),
            _ => Ext::Inf,
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn approx_eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Ext::Fin(a), Ext::Fin(b)) => a.approx_eq(b),
            (Ext::Inf, Ext::Inf) => true,
            _ => false,
        }
    }

    pub fn approx_le(&self, other: &Self) -> bool {
        match (self, other) {
            (_, Ext::Inf) => true,
            (Ext::Inf, Ext::Fin(_)) => false,
            (Ext::Fin(a), Ext::Fin(b)) => a.approx_le(b),
        }
    }
}

impl<T: PartialOrd> PartialOrd for Ext<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Ext::Fin(a), Ext::Fin(b)) => a.partial_cmp(b),
            (Ext::Fin(_), Ext::Inf) => Some(Ordering::Less),
            (Ext::Inf, Ext::Fin(_)) => Some(Ordering::Greater),
            (Ext::Inf, Ext::Inf) => Some(Ordering::Equal),
        }
    }
}

impl<T: fmt::Display> fmt::Display for Ext<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ext::Fin(v) => write!(f, "{v}"),
            Ext::Inf => f.write_str("inf"),
        }
    }
}
