//! Quadratic fields by fundamental discriminant: splitting of primes,
//! composita, and class numbers of imaginary fields by counting reduced forms.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkernel::{gcd, isqrt, kronecker, prime_factors, squarefree_part};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("0 has no fundamental discriminant")]
    Zero,
    #[error("{0} is not the discriminant of a quadratic field")]
    NotFundamental(i64),
    #[error("class numbers are only computed for imaginary fields, got {0}")]
    NotImaginary(i64),
    #[error("compositum of a field with itself")]
    DegenerateCompositum,
}

/// `true` for discriminants of quadratic fields (so never for 1).
pub fn is_fundamental(d: i64) -> bool {
    if d == 0 || d == 1 {
        return false;
    }
    match d.rem_euclid(4) {
        1 => squarefree_part(d) == d,
        0 => {
            let m = d / 4;
            matches!(m.rem_euclid(4), 2 | 3) && squarefree_part(m) == m
        }
        _ => false,
    }
}

/// Discriminant of `Q(√d)`: `D` if the squarefree part is `1 mod 4`, else `4D`.
/// Returns 1 when `d` is a perfect square.
pub fn fundamental_discriminant(d: i64) -> Result<i64, FieldError> {
    if d == 0 {
        return Err(FieldError::Zero);
    }
    let s = squarefree_part(d);
    Ok(if s == 1 {
        1
    } else if s.rem_euclid(4) == 1 {
        s
    } else {
        4 * s
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct QuadField {
    disc: i64,
}

impl TryFrom<i64> for QuadField {
    type Error = FieldError;
    fn try_from(d: i64) -> Result<Self, FieldError> {
        QuadField::new(d)
    }
}

impl From<QuadField> for i64 {
    fn from(k: QuadField) -> i64 {
        k.disc
    }
}

impl fmt::Display for QuadField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.disc;
        let radicand = if d % 4 == 0 { d / 4 } else { d };
        write!(f, "Q(sqrt({radicand}))")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Splitting {
    Split,
    Inert,
    Ramified,
}

impl QuadField {
    pub fn new(disc: i64) -> Result<Self, FieldError> {
        if is_fundamental(disc) {
            Ok(QuadField { disc })
        } else {
            Err(FieldError::NotFundamental(disc))
        }
    }

    pub fn disc(&self) -> i64 {
        self.disc
    }

    pub fn is_imaginary(&self) -> bool {
        self.disc < 0
    }

    pub fn character(&self) -> crate::dirichlet::QuadChar {
        crate::dirichlet::QuadChar::new(self.disc).expect("fundamental")
    }
}

pub fn splitting(k: QuadField, ell: u64) -> Splitting {
    match kronecker(k.disc, ell as i64) {
        1 => Splitting::Split,
        -1 => Splitting::Inert,
        _ => Splitting::Ramified,
    }
}

pub fn compose(a: QuadField, b: QuadField) -> Result<QuadField, FieldError> {
    let s1 = squarefree_part(a.disc);
    let s2 = squarefree_part(b.disc);
    let g = gcd(s1.unsigned_abs(), s2.unsigned_abs()) as i64;
    let core = (s1 / g) * (s2 / g);
    if core == 1 {
        return Err(FieldError::DegenerateCompositum);
    }
    QuadField::new(fundamental_discriminant(core)?)
}

pub fn heegner_hypothesis(k: QuadField, n: u64) -> bool {
    prime_factors(n).into_iter().all(|ell| splitting(k, ell) == Splitting::Split)
}

/// Number of units of the ring of integers of an imaginary field.
pub fn unit_count(d: i64) -> u64 {
    match d {
        -3 => 6,
        -4 => 4,
        _ => 2,
    }
}

/// Class number of the imaginary quadratic field of discriminant `d`, as the
/// number of reduced primitive positive definite forms `(a, b, c)`.
pub fn class_number_imag(d: i64) -> Result<u64, FieldError> {
    if d >= 0 {
        return Err(FieldError::NotImaginary(d));
    }
    if !is_fundamental(d) {
        return Err(FieldError::NotFundamental(d));
    }
    Ok(reduced_forms(d).len() as u64)
}

/// Reduced forms `|b| <= a <= c`, with `b >= 0` if `|b| = a` or `a = c`.
/// At a fundamental discriminant every such form is primitive.
pub fn reduced_forms(d: i64) -> Vec<(i64, i64, i64)> {
    let n = d.unsigned_abs() as u128;
    let a_max = isqrt(n / 3) as i64;
    let mut out = Vec::new();
    for a in 1..=a_max {
        for b in -a + 1..=a {
            if (b - d).rem_euclid(2) != 0 {
                continue;
            }
            let num = b * b - d;
            if num % (4 * a) != 0 {
                continue;
            }
            let c = num / (4 * a);
            if c < a || (c == a && b < 0) {
                continue;
            }
            out.push((a, b, c));
        }
    }
    out
}

/// `-w/(2|D|) Σ_{a=1}^{|D|} (D/a)·a`, the analytic class number formula.
/// Kept independent of the form count so each can check the other.
pub fn class_number_analytic(d: i64) -> Result<u64, FieldError> {
    if d >= 0 {
        return Err(FieldError::NotImaginary(d));
    }
    if !is_fundamental(d) {
        return Err(FieldError::NotFundamental(d));
    }
    let n = d.unsigned_abs() as i128;
    let s: i128 = (1..=n).map(|a| kronecker(d, a as i64) as i128 * a).sum();
    let w = unit_count(d) as i128;
    let num = -w * s;
    debug_assert_eq!(num % (2 * n), 0);
    Ok((num / (2 * n)) as u64)
}

/// Fundamental discriminants `d` with `lo <= d <= hi`, increasing.
pub fn fundamentals_in(lo: i64, hi: i64) -> Vec<i64> {
    (lo..=hi).filter(|&d| is_fundamental(d)).collect()
}
