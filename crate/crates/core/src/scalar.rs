//! Numeric field abstraction: exact rationals or binary64.

use core::fmt::{Debug, Display};
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use core::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{Float, One, Signed, ToPrimitive, Zero};

/// Arbitrary precision rational number.
pub type Rational = BigRational;

/// Relative tolerance used by [`Scalar::approx_eq`] in float mode.
pub const FLOAT_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NumericMode {
    Exact,
    Float,
}

impl NumericMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NumericMode::Exact => "exact",
            NumericMode::Float => "float",
        }
    }
}

impl Display for NumericMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NumericMode {
    type Err = ();

    fn from_str(s: &str) -> core::result::Result<Self, ()> {
        match s {
            "exact" => Ok(NumericMode::Exact),
            "float" => Ok(NumericMode::Float),
            _ => Err(()),
        }
    }
}

/// A real field the whole computation runs in.
///
/// Implemented for [`Rational`] (exact mode) and `f64` (float mode). The
/// two implementations agree on every operation up to rounding, so generic
/// code can be checked exactly in rational mode and run fast in float mode.
pub trait Scalar:
    Clone
    + PartialEq
    + PartialOrd
    + Debug
    + Display
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
    + 'static
{
    const MODE: NumericMode;

    fn from_i64(v: i64) -> Self;

    /// `num / den`; `den` must be nonzero.
    fn from_ratio(num: i64, den: u64) -> Self;

    fn from_biguint(v: &BigUint) -> Self;

    fn from_rational(v: &Rational) -> Self;

    fn to_f64(&self) -> f64;

    fn is_finite(&self) -> bool;

    /// `self += a * b`.
    fn add_product(&mut self, a: &Self, b: &Self);

    /// Square root when it exists in the field. Rationals only have one
    /// when numerator and denominator are perfect squares.
    fn sqrt_exact(&self) -> Option<Self>;

    fn abs(&self) -> Self;

    /// Equality for exact mode, relative closeness for float mode.
    fn approx_eq(&self, other: &Self) -> bool;

    fn from_usize(v: usize) -> Self {
        Self::from_biguint(&BigUint::from(v))
    }

    /// `1 / m^r`, the cell measure of `r` grid axes.
    fn cell_measure(m: usize, r: usize) -> Self {
        let den = BigUint::from(m).pow(r as u32);
        Self::one() / Self::from_biguint(&den)
    }

    fn powi(&self, exp: usize) -> Self {
        let mut acc = Self::one();
        for _ in 0..exp {
            acc *= self.clone();
        }
        acc
    }
}

impl Scalar for Rational {
    const MODE: NumericMode = NumericMode::Exact;

    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }

    fn from_ratio(num: i64, den: u64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_biguint(v: &BigUint) -> Self {
        Rational::from_integer(BigInt::from_biguint(Sign::Plus, v.clone()))
    }

    fn from_rational(v: &Rational) -> Self {
        v.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_finite(&self) -> bool {
        true
    }

    fn add_product(&mut self, a: &Self, b: &Self) {
        if a.is_zero() || b.is_zero() {
            return;
        }
        *self += a * b;
    }

    fn sqrt_exact(&self) -> Option<Self> {
        if self.is_negative() {
            return None;
        }
        let num = self.numer();
        let den = self.denom();
        let rn = num.sqrt();
        let rd = den.sqrt();
        if &(&rn * &rn) == num && &(&rd * &rd) == den {
            Some(Rational::new(rn, rd))
        } else {
            None
        }
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }

    fn approx_eq(&self, other: &Self) -> bool {
        self == other
    }
}

impl Scalar for f64 {
    const MODE: NumericMode = NumericMode::Float;

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn from_ratio(num: i64, den: u64) -> Self {
        num as f64 / den as f64
    }

    fn from_biguint(v: &BigUint) -> Self {
        ToPrimitive::to_f64(v).unwrap_or(f64::INFINITY)
    }

    fn from_rational(v: &Rational) -> Self {
        ToPrimitive::to_f64(v).unwrap_or(f64::NAN)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn is_finite(&self) -> bool {
        Float::is_finite(*self)
    }

    #[inline]
    fn add_product(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }

    fn sqrt_exact(&self) -> Option<Self> {
        (*self >= 0.0).then(|| Float::sqrt(*self))
    }

    fn abs(&self) -> Self {
        Float::abs(*self)
    }

    fn approx_eq(&self, other: &Self) -> bool {
        let scale = Float::abs(*self).max(Float::abs(*other)).max(1.0);
        Float::abs(self - other) <= FLOAT_REL_TOL * scale
    }
}

/// Parses `"num/den"` or an integer string into a rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n = BigInt::from_str(n.trim()).ok()?;
            let d = BigInt::from_str(d.trim()).ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rational::new(n, d))
        }
        None => BigInt::from_str(s).ok().map(Rational::from_integer),
    }
}

/// Value of a quantity homogeneous of degree `degree` in a kernel scaled by
/// `sqrt(scale_sq)`, given its value `base` on the unscaled kernel.
///
/// Even degrees stay in the field. Odd degrees need `sqrt(scale_sq)`; when it
/// is irrational the result is only representable if `base` vanishes.
pub fn apply_scale<S: Scalar>(base: S, scale_sq: &S, degree: usize) -> Option<S> {
    let even = scale_sq.powi(degree / 2);
    if degree.is_multiple_of(2) {
        return Some(base * even);
    }
    if base.is_zero() {
        return Some(S::zero());
    }
    let root = scale_sq.sqrt_exact()?;
    Some(base * even * root)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: u64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn rational_sqrt_only_for_squares() {
        assert_eq!(q(9, 4).sqrt_exact(), Some(q(3, 2)));
        assert_eq!(q(2, 1).sqrt_exact(), None);
        assert_eq!(q(-1, 1).sqrt_exact(), None);
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("5/2"), Some(q(5, 2)));
        assert_eq!(parse_rational("-3"), Some(q(-3, 1)));
        assert_eq!(parse_rational(" 4 / 6 "), Some(q(2, 3)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
    }

    #[test]
    fn display_matches_file_format() {
        assert_eq!(alloc::format!("{}", q(5, 2)), "5/2");
        assert_eq!(alloc::format!("{}", q(6, 3)), "2");
    }

    #[test]
    fn scale_application() {
        // even degree stays rational
        assert_eq!(apply_scale(q(5, 8), &q(2, 1), 4), Some(q(5, 2)));
        // odd degree with irrational root
        assert_eq!(apply_scale(q(1, 1), &q(2, 1), 3), None);
        assert_eq!(apply_scale(q(0, 1), &q(2, 1), 3), Some(q(0, 1)));
        assert_eq!(apply_scale(q(1, 1), &q(4, 1), 3), Some(q(8, 1)));
    }

    #[test]
    fn float_tolerance() {
        assert!(1.0f64.approx_eq(&(1.0 + 1e-12)));
        assert!(!1.0f64.approx_eq(&1.001));
    }
}
