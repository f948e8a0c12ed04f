//! Scalar abstraction shared by the float simulator and the exact oracle.
//!
//! Every probability-carrying type is generic over [`Prob`]. `f64` is the
//! simulator scalar; [`Rational`] gives exact arithmetic where the checks
//! must tell an exact zero apart from a rounding residue.

use std::fmt::Debug;
use std::hash::Hash;
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// Absolute tolerance for float comparisons on simulator paths.
pub const FLOAT_TOL: f64 = 1e-12;

pub trait Prob:
    Clone
    + Debug
    + PartialEq
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
{
    /// Unnormalized posterior weight. Floats accumulate in log space.
    type Weight: Clone + Debug;
    /// Hashable identity of a value.
    type Key: Clone + Debug + Hash + Eq + Ord;

    const EXACT: bool;

    fn from_rational(r: &Rational) -> Self;
    fn to_rational(&self) -> Rational;
    fn to_f64(&self) -> f64;
    fn key(&self) -> Self::Key;

    fn from_ratio(n: i64, d: i64) -> Self {
        Self::from_rational(&Rational::new(BigInt::from(n), BigInt::from(d)))
    }

    fn from_u64(n: u64) -> Self {
        Self::from_rational(&Rational::from_integer(BigInt::from(n)))
    }

    fn abs_diff(&self, other: &Self) -> Self {
        if self >= other {
            self.clone() - other.clone()
        } else {
            other.clone() - self.clone()
        }
    }

    /// Equality up to [`FLOAT_TOL`] for floats, exact otherwise.
    fn approx_eq(&self, other: &Self) -> bool;

    /// `self > other` beyond tolerance; used for argmax with stable ties.
    fn exceeds(&self, other: &Self) -> bool;

    /// `self <= other` up to tolerance.
    fn le_tol(&self, other: &Self) -> bool {
        !self.exceeds(other)
    }

    fn weight_of(prior: &Self) -> Self::Weight;
    fn weight_mul_pow(w: &mut Self::Weight, base: &Self, exp: u64);
    /// Normalizes a weight vector; `None` when every weight vanishes.
    fn normalize(ws: &[Self::Weight]) -> Option<Vec<Self>>;
}

impl Prob for f64 {
    type Weight = f64;
    type Key = u64;

    const EXACT: bool = false;

    fn from_rational(r: &Rational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }

    fn to_rational(&self) -> Rational {
        Rational::from_float(*self).expect("finite float")
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn key(&self) -> u64 {
        if *self == 0.0 {
            0
        } else {
            self.to_bits()
        }
    }

    fn approx_eq(&self, other: &Self) -> bool {
        (self - other).abs() <= FLOAT_TOL
    }

    fn exceeds(&self, other: &Self) -> bool {
        *self > *other + FLOAT_TOL
    }

    fn weight_of(prior: &Self) -> f64 {
        if *prior > 0.0 {
            prior.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn weight_mul_pow(w: &mut f64, base: &Self, exp: u64) {
        if exp == 0 {
            return;
        }
        if *base > 0.0 {
            *w += exp as f64 * base.ln();
        } else {
            *w = f64::NEG_INFINITY;
        }
    }

    fn normalize(ws: &[f64]) -> Option<Vec<f64>> {
        let max = ws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return None;
        }
        let exps: Vec<f64> = ws.iter().map(|w| (w - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        Some(exps.into_iter().map(|e| e / total).collect())
    }
}

impl Prob for Rational {
    type Weight = Rational;
    type Key = Rational;

    const EXACT: bool = true;

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn to_rational(&self) -> Rational {
        self.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn key(&self) -> Rational {
        self.clone()
    }

    fn approx_eq(&self, other: &Self) -> bool {
        self == other
    }

    fn exceeds(&self, other: &Self) -> bool {
        self > other
    }

    fn abs_diff(&self, other: &Self) -> Self {
        (self - other).abs()
    }

    fn weight_of(prior: &Self) -> Rational {
        prior.clone()
    }

    fn weight_mul_pow(w: &mut Rational, base: &Self, exp: u64) {
        if exp == 0 || w.is_zero() {
            return;
        }
        if base.is_zero() {
            *w = Rational::zero();
        } else if !base.is_one() {
            *w *= num_traits::pow(base.clone(), exp as usize);
        }
    }

    fn normalize(ws: &[Rational]) -> Option<Vec<Rational>> {
        let total: Rational = ws.iter().fold(Rational::zero(), |acc, w| acc + w);
        if total.is_zero() {
            return None;
        }
        Some(ws.iter().map(|w| w / &total).collect())
    }
}

/// Parses `"3/10"`, `"0.3"`, `"3e-1"` or an integer into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
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
    let negative = mantissa.starts_with('-');
    let mantissa = mantissa.trim_start_matches(['-', '+']);
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let mut numer: BigInt = digits.parse().ok()?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Some(value)
}

/// Exact rational of the shortest decimal that round-trips `x`.
pub fn rational_from_decimal_f64(x: f64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    parse_rational(&format!("{x}"))
}

pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(parse_rational("0.8"), Some(Rational::new(4.into(), 5.into())));
        assert_eq!(parse_rational("1/3"), Some(Rational::new(1.into(), 3.into())));
        assert_eq!(parse_rational("2.5e-1"), Some(Rational::new(1.into(), 4.into())));
        assert_eq!(parse_rational("-3"), Some(Rational::from_integer((-3).into())));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
        assert_eq!(
            rational_from_decimal_f64(0.1),
            Some(Rational::new(1.into(), 10.into()))
        );
    }

    #[test]
    fn float_weights_normalize_in_log_space() {
        let mut a = f64::weight_of(&0.5);
        f64::weight_mul_pow(&mut a, &1e-200, 3);
        let mut b = f64::weight_of(&0.5);
        f64::weight_mul_pow(&mut b, &1e-200, 4);
        let w = f64::normalize(&[a, b]).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert!(f64::normalize(&[f64::NEG_INFINITY]).is_none());
    }

    #[test]
    fn rational_weights_are_exact() {
        let half = Rational::from_ratio(1, 2);
        let mut a = Rational::weight_of(&half);
        Rational::weight_mul_pow(&mut a, &half, 2);
        let b = Rational::weight_of(&half);
        let w = Rational::normalize(&[a, b]).unwrap();
        assert_eq!(w[0], Rational::from_ratio(1, 5));
        assert_eq!(w[1], Rational::from_ratio(4, 5));
    }
}
