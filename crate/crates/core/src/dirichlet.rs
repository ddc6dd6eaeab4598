//! Quadratic and trivial Dirichlet characters, stored as fundamental
//! discriminants. `disc = 1` is the trivial character.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkernel::{gcd, is_prime, kronecker, powmod, Residue};
use crate::quadfield::{fundamental_discriminant, is_fundamental};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CharError {
    #[error("{0} is not a fundamental discriminant")]
    NotFundamental(i64),
    #[error("expected an odd prime, got {0}")]
    BadPrime(u64),
    #[error("p = {p} divides the conductor {conductor}")]
    PDividesConductor { p: u64, conductor: u64 },
    #[error("expected an imaginary quadratic character, got discriminant {0}")]
    NotImaginary(i64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct QuadChar {
    disc: i64,
}

impl TryFrom<i64> for QuadChar {
    type Error = CharError;
    fn try_from(disc: i64) -> Result<Self, CharError> {
        QuadChar::new(disc)
    }
}

impl From<QuadChar> for i64 {
    fn from(c: QuadChar) -> i64 {
        c.disc
    }
}

impl fmt::Display for QuadChar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_trivial() {
            write!(f, "1")
        } else {
            write!(f, "eps[{}]", self.disc)
        }
    }
}

impl QuadChar {
    pub fn new(disc: i64) -> Result<Self, CharError> {
        if disc == 1 || is_fundamental(disc) {
            Ok(QuadChar { disc })
        } else {
            Err(CharError::NotFundamental(disc))
        }
    }

    pub const fn trivial() -> Self {
        QuadChar { disc: 1 }
    }

    pub fn disc(&self) -> i64 {
        self.disc
    }

    pub fn conductor(&self) -> u64 {
        self.disc.unsigned_abs()
    }

    pub fn is_trivial(&self) -> bool {
        self.disc == 1
    }

    pub fn is_even(&self) -> bool {
        self.disc > 0
    }

    /// `χ(-1)`.
    pub fn parity(&self) -> i8 {
        if self.disc > 0 {
            1
        } else {
            -1
        }
    }

    pub fn eval(&self, n: i64) -> i8 {
        char_eval(*self, n)
    }
}

/// `χ(n)` as the Kronecker symbol `(disc/n)`; the trivial character is 1
/// everywhere.
pub fn char_eval(chi: QuadChar, n: i64) -> i8 {
    if chi.is_trivial() {
        1
    } else {
        kronecker(chi.disc, n)
    }
}

/// The primitive character attached to `χ₁χ₂`.
pub fn char_product(a: QuadChar, b: QuadChar) -> QuadChar {
    let s1 = crate::numkernel::squarefree_part(a.disc);
    let s2 = crate::numkernel::squarefree_part(b.disc);
    let g = gcd(s1.unsigned_abs(), s2.unsigned_abs()) as i64;
    let core = (s1 / g) * (s2 / g);
    if core == 1 {
        QuadChar::trivial()
    } else {
        QuadChar { disc: fundamental_discriminant(core).expect("nonzero core") }
    }
}

/// `ψ₀`: `ψ` itself when even, otherwise `ψε_K`.
pub fn psi_zero(psi: QuadChar, eps_k: QuadChar) -> Result<QuadChar, CharError> {
    if eps_k.disc >= 0 {
        return Err(CharError::NotImaginary(eps_k.disc));
    }
    Ok(if psi.parity() == 1 { psi } else { char_product(psi, eps_k) })
}

/// `ψω^j(n) mod p`, using `ω(n) ≡ n mod p`.
pub fn teich_char_eval_mod_p(psi: QuadChar, j: i64, n: i64, p: u64) -> Result<Residue, CharError> {
    if p == 2 || !is_prime(p) {
        return Err(CharError::BadPrime(p));
    }
    if psi.conductor().is_multiple_of(p) {
        return Err(CharError::PDividesConductor { p, conductor: psi.conductor() });
    }
    let zero = Residue::new(0, p).expect("p >= 3");
    let m = p as i128 * psi.conductor() as i128;
    if gcd((n as i128).rem_euclid(m) as u64, m as u64) != 1 {
        return Ok(zero);
    }
    let e = j.rem_euclid(p as i64 - 1) as u64;
    let base = (n as i128).rem_euclid(p as i128) as u64;
    let v = powmod(base, e, p);
    let r = Residue::new(v as i128, p).expect("p >= 3");
    Ok(if char_eval(psi, n) == 1 { r } else { -r })
}
