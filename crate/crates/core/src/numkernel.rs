//! Exact integer and rational arithmetic plus the elementary number theory
//! everything else is built on.
//!
//! Big integers and rationals come from `num-bigint` / `num-rational`.
//! Small moduli (anything that fits a `u64`) use [`Residue`], which multiplies
//! through `u128` so that products never overflow.
//!
//! The Kronecker symbol is the fully extended one: `(a/-1)` is the sign of `a`
//! and `(a/2)` is `0` for even `a`, `1` for `a ≡ ±1 mod 8`, `-1` for
//! `a ≡ ±3 mod 8`.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer as _;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Integer = BigInt;
pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NumError {
    #[error("modulus must be at least 2, got {0}")]
    BadModulus(u64),
    #[error("inconsistent congruences: {a} mod {m} and {b} mod {n}")]
    InconsistentCrt { a: u64, m: u64, b: u64, n: u64 },
    #[error("{value} is not invertible modulo {modulus}")]
    NotInvertible { value: String, modulus: u64 },
    #[error("cannot factor 0")]
    FactorZero,
    #[error("result does not fit in 64 bits")]
    Overflow,
}

/// An element of `Z/mZ` with `2 <= m < 2^64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Residue {
    value: u64,
    modulus: u64,
}

impl Residue {
    pub fn new(value: i128, modulus: u64) -> Result<Self, NumError> {
        if modulus < 2 {
            return Err(NumError::BadModulus(modulus));
        }
        Ok(Residue { value: value.rem_euclid(modulus as i128) as u64, modulus })
    }

    pub fn from_bigint(x: &BigInt, modulus: u64) -> Result<Self, NumError> {
        if modulus < 2 {
            return Err(NumError::BadModulus(modulus));
        }
        Ok(Residue { value: bigint_mod(x, modulus), modulus })
    }

    /// Reduce a rational whose denominator is a unit mod `modulus`.
    pub fn from_rational(x: &BigRational, modulus: u64) -> Result<Self, NumError> {
        let num = Residue::from_bigint(x.numer(), modulus)?;
        let den = Residue::from_bigint(x.denom(), modulus)?;
        let inv = den.inverse().map_err(|_| NumError::NotInvertible { value: x.to_string(), modulus })?;
        Ok(num * inv)
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    pub fn pow(&self, e: u64) -> Self {
        Residue { value: powmod(self.value, e, self.modulus), modulus: self.modulus }
    }

    pub fn inverse(&self) -> Result<Self, NumError> {
        modinv(self.value, self.modulus)
            .map(|value| Residue { value, modulus: self.modulus })
            .ok_or(NumError::NotInvertible { value: self.value.to_string(), modulus: self.modulus })
    }

    fn same(&self, other: &Self) {
        assert_eq!(self.modulus, other.modulus, "residues with different moduli combined");
    }
}

impl fmt::Display for Residue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod {}", self.value, self.modulus)
    }
}

impl std::ops::Add for Residue {
    type Output = Residue;
    fn add(self, rhs: Residue) -> Residue {
        self.same(&rhs);
        Residue { value: addmod(self.value, rhs.value, self.modulus), modulus: self.modulus }
    }
}

impl std::ops::Sub for Residue {
    type Output = Residue;
    fn sub(self, rhs: Residue) -> Residue {
        self.same(&rhs);
        Residue { value: submod(self.value, rhs.value, self.modulus), modulus: self.modulus }
    }
}

impl std::ops::Mul for Residue {
    type Output = Residue;
    fn mul(self, rhs: Residue) -> Residue {
        self.same(&rhs);
        Residue { value: mulmod(self.value, rhs.value, self.modulus), modulus: self.modulus }
    }
}

impl std::ops::Neg for Residue {
    type Output = Residue;
    fn neg(self) -> Residue {
        Residue { value: submod(0, self.value, self.modulus), modulus: self.modulus }
    }
}

#[inline]
pub fn addmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 + b as u128) % m as u128) as u64
}

#[inline]
pub fn submod(a: u64, b: u64, m: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        (a as u128 + m as u128 - b as u128) as u64
    }
}

#[inline]
pub fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// `b^e mod m` by square-and-multiply. `m = 1` gives 0.
pub fn powmod(b: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut base = b % m;
    let mut acc = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            acc = mulmod(acc, base, m);
        }
        base = mulmod(base, base, m);
        e >>= 1;
    }
    acc
}

/// Signed-base convenience wrapper around [`powmod`] returning a [`Residue`].
pub fn modpow(base: i64, exp: u64, modulus: u64) -> Result<Residue, NumError> {
    let b = Residue::new(base as i128, modulus)?;
    Ok(b.pow(exp))
}

pub fn modinv(a: u64, m: u64) -> Option<u64> {
    let (g, x, _) = extended_gcd(a as i128, m as i128);
    if g != 1 {
        return None;
    }
    Some(x.rem_euclid(m as i128) as u64)
}

pub fn extended_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r.div_euclid(r);
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a.lcm(&b)
}

/// Least nonnegative residue of a big integer.
pub fn bigint_mod(x: &BigInt, m: u64) -> u64 {
    let r = x.mod_floor(&BigInt::from(m));
    r.to_u64().expect("residue below a u64 modulus")
}

/// The fully extended Kronecker symbol `(a/n)`.
pub fn kronecker(a: i64, n: i64) -> i8 {
    let a = a as i128;
    let mut n = n as i128;
    if n == 0 {
        return if a == 1 || a == -1 { 1 } else { 0 };
    }
    let mut result: i8 = 1;
    if n < 0 {
        n = -n;
        if a < 0 {
            result = -result;
        }
    }
    let twos = n.trailing_zeros();
    if twos > 0 {
        if a % 2 == 0 {
            return 0;
        }
        if twos % 2 == 1 && matches!(a.rem_euclid(8), 3 | 5) {
            result = -result;
        }
        n >>= twos;
    }
    result * jacobi(a.rem_euclid(n), n)
}

/// Jacobi symbol for odd positive `n`.
fn jacobi(mut a: i128, mut n: i128) -> i8 {
    debug_assert!(n > 0 && n % 2 == 1);
    let mut result: i8 = 1;
    a = a.rem_euclid(n);
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            if matches!(n % 8, 3 | 5) {
                result = -result;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            result = -result;
        }
        a %= n;
    }
    if n == 1 {
        result
    } else {
        0
    }
}

/// Solve a system of congruences. Overlapping moduli are merged when the
/// residues agree on the overlap.
pub fn crt(congruences: &[(i64, u64)]) -> Result<Residue, NumError> {
    let mut value: u128 = 0;
    let mut modulus: u128 = 1;
    for &(r, m) in congruences {
        if m == 0 {
            return Err(NumError::BadModulus(0));
        }
        let r = (r as i128).rem_euclid(m as i128) as u128;
        let g = (modulus as u64).gcd(&m) as u128;
        let diff = (r as i128 - value as i128).rem_euclid(m as i128);
        if !(diff as u128).is_multiple_of(g) {
            return Err(NumError::InconsistentCrt { a: value as u64, m: modulus as u64, b: r as u64, n: m });
        }
        let m_red = m as u128 / g;
        let new_mod = modulus.checked_mul(m_red).ok_or(NumError::Overflow)?;
        if new_mod > u64::MAX as u128 {
            return Err(NumError::Overflow);
        }
        if m_red > 1 {
            let inv = modinv(((modulus / g) % m_red) as u64, m_red as u64).expect("reduced moduli are coprime");
            let t = mulmod(((diff as u128 / g) % m_red) as u64, inv, m_red as u64) as u128;
            value = (value + modulus * t) % new_mod;
        }
        modulus = new_mod;
    }
    if modulus == 1 {
        // Only trivial congruences: everything is 0 mod 1. Residue needs m >= 2,
        // so report the degenerate system as 0 mod 1 through the error path.
        return Err(NumError::BadModulus(1));
    }
    Residue::new(value as i128, modulus as u64)
}

pub fn isqrt(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

pub fn is_square(n: &BigInt) -> bool {
    if n.is_negative() {
        return false;
    }
    let r = n.sqrt();
    &(&r * &r) == n
}

/// Deterministic Miller–Rabin for all `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

const TRIAL_LIMIT: u64 = 1_000_000;

/// Prime factorization with strictly increasing primes.
pub fn factorize(n: u64) -> Result<Vec<(u64, u32)>, NumError> {
    if n == 0 {
        return Err(NumError::FactorZero);
    }
    let mut out: Vec<(u64, u32)> = Vec::new();
    let mut m = n;
    let mut push = |p: u64, m: &mut u64| {
        let mut e = 0;
        while (*m).is_multiple_of(p) {
            *m /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
    };
    push(2, &mut m);
    let mut p = 3;
    while p <= TRIAL_LIMIT && p * p <= m {
        push(p, &mut m);
        p += 2;
    }
    if m > 1 {
        let mut rest = Vec::new();
        split_large(m, &mut rest);
        rest.sort_unstable();
        for q in rest {
            match out.last_mut() {
                Some((last, e)) if *last == q => *e += 1,
                _ => out.push((q, 1)),
            }
        }
    }
    Ok(out)
}

fn split_large(n: u64, acc: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        acc.push(n);
        return;
    }
    let d = pollard_rho(n);
    split_large(d, acc);
    split_large(n / d, acc);
}

/// Brent's variant of Pollard rho; `n` must be composite and odd.
fn pollard_rho(n: u64) -> u64 {
    if n.is_multiple_of(2) {
        return 2;
    }
    let mut c = 1u64;
    loop {
        let f = |x: u64| addmod(mulmod(x, x, n), c, n);
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = gcd(x.abs_diff(y), n);
        }
        if d != n {
            return d;
        }
        c += 1;
    }
}

pub fn prime_factors(n: u64) -> Vec<u64> {
    factorize(n).map(|f| f.into_iter().map(|(p, _)| p).collect()).unwrap_or_default()
}

pub fn euler_phi(n: u64) -> u64 {
    if n == 0 {
        return 0;
    }
    factorize(n).expect("n > 0").into_iter().fold(1, |acc, (p, e)| acc * (p - 1) * p.pow(e - 1))
}

/// Sign times the product of primes dividing `n` to an odd power. `n != 0`.
pub fn squarefree_part(n: i64) -> i64 {
    assert!(n != 0, "squarefree part of 0");
    let sign = n.signum();
    let core = factorize(n.unsigned_abs())
        .expect("nonzero")
        .into_iter()
        .filter(|&(_, e)| e % 2 == 1)
        .fold(1i64, |acc, (p, _)| acc * p as i64);
    sign * core
}

pub fn is_squarefree(n: u64) -> bool {
    n != 0 && factorize(n).expect("nonzero").iter().all(|&(_, e)| e == 1)
}

/// Every prime exponent is at least 2 (1 counts as squarefull).
pub fn is_squarefull(n: u64) -> bool {
    n != 0 && factorize(n).expect("nonzero").iter().all(|&(_, e)| e >= 2)
}

pub fn valuation(n: u64, p: u64) -> u32 {
    if n == 0 {
        return u32::MAX;
    }
    let mut n = n;
    let mut v = 0;
    while n.is_multiple_of(p) {
        n /= p;
        v += 1;
    }
    v
}

/// `p`-adic valuation of a rational; `None` for zero.
pub fn rational_valuation(x: &BigRational, p: u64) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    let p = BigInt::from(p);
    let count = |n: &BigInt| {
        let mut n = n.abs();
        let mut v = 0i64;
        while (&n % &p).is_zero() {
            n /= &p;
            v += 1;
        }
        v
    };
    Some(count(x.numer()) - count(x.denom()))
}

/// Sieve of Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut sieve = vec![true; n + 1];
    sieve[0] = false;
    sieve[1] = false;
    let mut i = 2;
    while i * i <= n {
        if sieve[i] {
            let mut j = i * i;
            while j <= n {
                sieve[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    sieve.iter().enumerate().filter_map(|(i, &b)| b.then_some(i as u64)).collect()
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker(-20, 43867), 1);
        // -8 ≡ 1 mod 3 is a square, so 3 splits in Q(√-2).
        assert_eq!(kronecker(-8, 3), 1);
        for d in -30..30 {
            assert_eq!(kronecker(d, 1), 1);
        }
        assert_eq!(kronecker(5, -1), 1);
        assert_eq!(kronecker(-5, -1), -1);
        assert_eq!(kronecker(3, 2), -1);
        assert_eq!(kronecker(7, 2), 1);
        assert_eq!(kronecker(4, 2), 0);
    }

    #[test]
    fn kronecker_matches_euler_criterion() {
        for &p in &[3u64, 5, 7, 11, 13, 101, 43867] {
            for a in -60i64..60 {
                let e = powmod(a.rem_euclid(p as i64) as u64, (p - 1) / 2, p);
                let expect = match e {
                    0 => 0,
                    1 => 1,
                    _ => -1,
                };
                assert_eq!(kronecker(a, p as i64), expect, "a={a} p={p}");
            }
        }
    }

    #[test]
    fn crt_examples() {
        let r = crt(&[(2, 3), (1, 5)]).unwrap();
        assert_eq!((r.value(), r.modulus()), (11, 15));
        let r = crt(&[(0, 4), (3, 9)]).unwrap();
        assert_eq!((r.value(), r.modulus()), (12, 36));
        assert!(matches!(crt(&[(1, 6), (2, 4)]), Err(NumError::InconsistentCrt { .. })));
        let r = crt(&[(1, 6), (3, 4)]).unwrap();
        assert_eq!((r.value(), r.modulus()), (7, 12));
    }

    #[test]
    fn modpow_examples() {
        let r = modpow(7, 8, 43867).unwrap();
        assert_eq!(r.value(), 18224);
        assert_eq!((Residue::new(1, 43867).unwrap() - r).value(), 25644);
        assert_eq!(modpow(12345, 0, 97).unwrap().value(), 1);
        assert_eq!(modpow(2, 10, 1000).unwrap().value(), 24);
    }

    #[test]
    fn modpow_exhaustive_small() {
        for m in 2..=50u64 {
            for b in 0..=50u64 {
                let mut naive = 1 % m;
                for e in 0..=50u64 {
                    assert_eq!(powmod(b, e, m), naive, "{b}^{e} mod {m}");
                    naive = naive * b % m;
                }
            }
        }
    }

    #[test]
    fn factorize_examples() {
        assert_eq!(factorize(10240).unwrap(), vec![(2, 11), (5, 1)]);
        assert_eq!(factorize(798).unwrap(), vec![(2, 1), (3, 1), (7, 1), (19, 1)]);
        assert_eq!(factorize(43867).unwrap(), vec![(43867, 1)]);
        assert_eq!(factorize(1).unwrap(), vec![]);
        assert_eq!(factorize(0), Err(NumError::FactorZero));
        // two primes above the trial-division bound
        let (p, q) = (1_000_003u64, 1_000_033u64);
        assert_eq!(factorize(p * q).unwrap(), vec![(p, 1), (q, 1)]);
        assert_eq!(factorize(p * p * 9).unwrap(), vec![(3, 2), (p, 2)]);
    }

    #[test]
    fn factorize_roundtrip_exhaustive() {
        for n in 1..=1_000_000u64 {
            let f = factorize(n).unwrap();
            let back = f.iter().fold(1u64, |acc, &(p, e)| acc * p.pow(e));
            assert_eq!(back, n);
            assert!(f.windows(2).all(|w| w[0].0 < w[1].0));
        }
    }

    #[test]
    fn phi_and_squarefree() {
        assert_eq!(euler_phi(171), 108);
        assert_eq!(euler_phi(31939), 18 * 41 * 40);
        assert_eq!(euler_phi(1), 1);
        assert_eq!(squarefree_part(-328), -82);
        assert_eq!(squarefree_part(72), 2);
        assert_eq!(squarefree_part(-1), -1);
        assert!(is_squarefull(1681));
        assert!(!is_squarefull(38));
        assert!(is_squarefree(38));
    }

    #[test]
    fn residue_from_rational() {
        let r = Residue::from_rational(&rat(-1, 3), 7).unwrap();
        assert_eq!(r.value(), 2);
        assert!(Residue::from_rational(&rat(1, 7), 7).is_err());
    }

    #[test]
    fn valuations() {
        assert_eq!(rational_valuation(&rat(-3, 4), 3), Some(1));
        assert_eq!(rational_valuation(&rat(5, 27), 3), Some(-3));
        assert_eq!(rational_valuation(&int(0), 3), None);
    }
}
