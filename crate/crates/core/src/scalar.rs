//! Numeric abstraction shared by every algebraic routine in the crate.
//!
//! Masses, commonalities and max-product scores are all elements of an
//! ordered field. `f64` is the workhorse; `f32` is available for compact
//! storage and `BigRational` gives exact answers on small fixtures.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Absolute tolerance used when two values are compared for equality
    /// (mass totals, row sums, round trips).
    fn eq_tolerance() -> Self;

    /// Masses whose magnitude falls below this are dropped after combination.
    fn prune_threshold() -> Self;

    /// Converts a literal. Panics only for non-finite input.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits scalar")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn approx_eq(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).abs() <= Self::eq_tolerance()
    }

    fn is_negligible(&self) -> bool {
        self.abs() < Self::prune_threshold()
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn eq_tolerance() -> Self {
        1e-9
    }
    fn prune_threshold() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn eq_tolerance() -> Self {
        1e-5
    }
    fn prune_threshold() -> Self {
        1e-7
    }
}

impl Scalar for BigRational {
    fn eq_tolerance() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
    fn prune_threshold() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
    fn is_negligible(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
}

/// Formats a real with `digits` significant digits in fixed notation
/// (`0.850000000000` for 0.85 at 12 digits). Very large or very small
/// magnitudes switch to exponent notation.
pub fn format_sig(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return format!("{:.*}", digits - 1, 0.0);
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if !(-7..=15).contains(&exp) {
        return sci;
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// Rounds to `digits` significant digits, so that the shortest decimal
/// representation of the result has at most that many digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(format_sig(0.85, 12), "0.850000000000");
        assert_eq!(format_sig(0.63, 12), "0.630000000000");
        assert_eq!(format_sig(1.0, 12), "1.00000000000");
        assert_eq!(format_sig(0.0, 12), "0.00000000000");
        assert_eq!(format_sig(-0.0, 12), "0.00000000000");
        assert_eq!(format_sig(12.5, 4), "12.50");
        assert_eq!(format_sig(3.0 / 7.0, 12), "0.428571428571");
        assert_eq!(format_sig(-1e-20, 3), "-1.00e-20");
        // rounding can carry into a new leading digit
        assert_eq!(format_sig(0.99999999999999, 12), "1.00000000000");
    }

    #[test]
    fn rounding() {
        assert_eq!(round_sig(0.1 + 0.2, 12), 0.3);
        assert_eq!(round_sig(2.0 / 3.0, 12), 0.666666666667);
    }

    #[test]
    fn rational_is_exact() {
        let third = BigRational::new(1.into(), 3.into());
        let sum = third.clone() + third.clone() + third;
        assert!(sum.approx_eq(&BigRational::from_integer(1.into())));
        assert!(!BigRational::new(1.into(), 1_000_000_000_000i64.into()).is_negligible());
    }
}
