//! Bernoulli numbers (B₁ = -1/2), Bernoulli polynomials, generalized
//! Bernoulli numbers `B_{n,χ}` for quadratic χ, and `B_{1,ψω^j} mod p`.
//!
//! For the trivial character `B_{1,1} = +1/2`, so that `B_{n,1} = B_n(1)`.

use std::sync::{OnceLock, RwLock};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::dirichlet::{char_eval, CharError, QuadChar};
use crate::numkernel::{binomial, gcd, is_prime, mulmod, powmod, NumError, Rational, Residue};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BernoulliError {
    #[error("B_1 of {0} is an exceptional (trivial or omega^-1) case with no finite value")]
    Exceptional(String),
    #[error("Teichmuller sum not divisible by p = {p} (sum mod p^2 = {sum})")]
    Consistency { p: u64, sum: u64 },
    #[error(transparent)]
    Char(#[from] CharError),
    #[error(transparent)]
    Num(#[from] NumError),
}

const DEFAULT_CACHE: usize = 128;

fn cache() -> &'static RwLock<Vec<Rational>> {
    static CACHE: OnceLock<RwLock<Vec<Rational>>> = OnceLock::new();
    CACHE.get_or_init(|| {
        let mut v = vec![Rational::one()];
        extend(&mut v, DEFAULT_CACHE);
        RwLock::new(v)
    })
}

// Tangent numbers by the in-place integer recurrence, then
// B_{2k} = (-1)^{k-1}·2k·T_k / (4^k (4^k - 1)).
fn extend(table: &mut Vec<Rational>, upto: usize) {
    if table.len() > upto {
        return;
    }
    let target = upto.max(2 * table.len());
    let kmax = target / 2;
    let mut t: Vec<BigInt> = vec![BigInt::zero(); kmax + 1];
    if kmax >= 1 {
        t[1] = BigInt::one();
    }
    for k in 2..=kmax {
        t[k] = &t[k - 1] * BigInt::from(k - 1);
    }
    for k in 2..=kmax {
        for j in k..=kmax {
            t[j] = &t[j - 1] * BigInt::from(j - k) + &t[j] * BigInt::from(j - k + 2);
        }
    }
    let mut out = Vec::with_capacity(target + 1);
    out.push(Rational::one());
    out.push(Rational::new(BigInt::from(-1), BigInt::from(2)));
    for n in 2..=target {
        if n % 2 == 1 {
            out.push(Rational::zero());
            continue;
        }
        let k = n / 2;
        let four_k = BigInt::one() << (2 * k);
        let mut num = BigInt::from(n) * &t[k];
        if k % 2 == 0 {
            num = -num;
        }
        out.push(Rational::new(num, &four_k * (&four_k - BigInt::one())));
    }
    *table = out;
}

pub fn bernoulli(n: u64) -> Rational {
    let n = n as usize;
    {
        let t = cache().read().expect("bernoulli cache poisoned");
        if let Some(b) = t.get(n) {
            return b.clone();
        }
    }
    let mut t = cache().write().expect("bernoulli cache poisoned");
    extend(&mut t, n);
    t[n].clone()
}

/// `B_n(x) = Σ C(n,i)·B_i·x^{n-i}`.
pub fn bernoulli_poly(n: u64, x: &Rational) -> Rational {
    let mut acc = Rational::zero();
    let mut xp = Rational::one();
    for i in (0..=n).rev() {
        let b = bernoulli(i);
        if !b.is_zero() {
            acc += Rational::from_integer(binomial(n, i)) * b * &xp;
        }
        xp *= x;
    }
    acc
}

/// `B_{n,χ} = f^{n-1} Σ_{a=1}^f χ(a) B_n(a/f)`, evaluated through the power
/// sums `T_j = Σ χ(a) a^j` so only integers appear inside the loop.
pub fn gen_bernoulli(chi: QuadChar, n: u64) -> Rational {
    if chi.is_trivial() {
        return if n == 1 { Rational::new(1.into(), 2.into()) } else { bernoulli(n) };
    }
    let parity_ok = (chi.parity() == 1) == n.is_multiple_of(2);
    if !parity_ok || n == 0 {
        return Rational::zero();
    }
    let f = chi.conductor();
    let mut t = vec![BigInt::zero(); n as usize + 1];
    for a in 1..=f {
        let c = char_eval(chi, a as i64);
        if c == 0 {
            continue;
        }
        let big_a = BigInt::from(a);
        let mut pw = BigInt::one();
        for tj in t.iter_mut() {
            if c == 1 {
                *tj += &pw;
            } else {
                *tj -= &pw;
            }
            pw *= &big_a;
        }
    }
    // Everything over the common denominator f·lcm(den B_i).
    let fb = BigInt::from(f);
    let terms: Vec<(u64, Rational)> = (0..=n).map(|i| (i, bernoulli(i))).filter(|(_, b)| !b.is_zero()).collect();
    let den = terms.iter().fold(BigInt::one(), |acc, (_, b)| num_integer::Integer::lcm(&acc, b.denom()));
    let mut acc = BigInt::zero();
    let mut fpow = BigInt::one(); // f^i
    let mut next = 0u64;
    for (i, b) in &terms {
        while next < *i {
            fpow *= &fb;
            next += 1;
        }
        let scale = &den / b.denom();
        acc += b.numer() * scale * binomial(n, *i) * &t[(n - i) as usize] * &fpow;
    }
    Rational::new(acc, den * fb)
}

fn check_prime(p: u64, psi: QuadChar) -> Result<(), BernoulliError> {
    if p == 2 || !is_prime(p) {
        return Err(CharError::BadPrime(p).into());
    }
    if psi.conductor().is_multiple_of(p) {
        return Err(CharError::PDividesConductor { p, conductor: psi.conductor() }.into());
    }
    Ok(())
}

/// `B_{1,ψω^j} mod p` with `j` read mod `p-1`.
///
/// For `[j] ≠ 0` the character has conductor `fp` and
/// `B_1 = (fp)⁻¹ Σ_{a ≤ fp} ψ(a)ω^j(a)·a`; we work mod `p²` with
/// `ω(a) ≡ a^p`, so `S = Σ ψ(a)a^{pj+1}` must vanish mod `p` and `(S/p)·f⁻¹`
/// is the answer. `[j] = 0` uses the exact rational value.
pub fn b1_teichmuller_mod_p(psi: QuadChar, j: i64, p: u64) -> Result<Residue, BernoulliError> {
    check_prime(p, psi)?;
    let jj = j.rem_euclid(p as i64 - 1) as u64;
    if psi.is_trivial() && (jj == 0 || jj == p - 2) {
        return Err(BernoulliError::Exceptional(format!("omega^{jj} at p = {p}")));
    }
    if jj == 0 {
        return Ok(Residue::from_rational(&gen_bernoulli(psi, 1), p)?);
    }
    let f = psi.conductor();
    let p2 = p * p;
    let order = p * (p - 1);
    let e = (mulmod(p, jj, order) + 1) % order;
    let fp = f * p;
    let mut s: u64 = 0;
    for a in 1..=fp {
        if gcd(a, fp) != 1 {
            continue;
        }
        let term = powmod(a % p2, e, p2);
        s = if char_eval(psi, a as i64) == 1 { (s + term) % p2 } else { (s + p2 - term) % p2 };
    }
    if !s.is_multiple_of(p) {
        return Err(BernoulliError::Consistency { p, sum: s });
    }
    let finv = Residue::new(f as i128, p)?.inverse()?;
    Ok(Residue::new((s / p) as i128, p)? * finv)
}

/// Kummer's shortcut `B_{[j]+1}/([j]+1) mod p` for trivial ψ, when the index
/// is small enough to compute exactly. Used only as a cross-check.
pub fn kummer_shortcut_mod_p(j: i64, p: u64) -> Option<Residue> {
    if p == 2 || !is_prime(p) {
        return None;
    }
    let jj = j.rem_euclid(p as i64 - 1) as u64;
    let n = jj + 1;
    if jj == 0 || jj == p - 2 || n > 60 {
        return None;
    }
    let v = bernoulli(n) / Rational::from_integer(BigInt::from(n));
    Residue::from_rational(&v, p).ok()
}

/// `L_p(ψω^j, 0)` mod p: `-(1 - ψω^{j-1}(p))·B_{1,ψω^{j-1}}`. The Euler factor is 1
/// whenever `ω^{j-1}` is nontrivial, since then `p` divides the conductor.
pub fn kubota_leopoldt_special_mod_p(psi: QuadChar, j: i64, p: u64) -> Result<Residue, BernoulliError> {
    check_prime(p, psi)?;
    let shifted = j - 1;
    let jj = shifted.rem_euclid(p as i64 - 1);
    let b1 = b1_teichmuller_mod_p(psi, shifted, p)?;
    if jj == 0 {
        let euler = Residue::new(1 - char_eval(psi, p as i64) as i128, p)?;
        Ok(-(euler * b1))
    } else {
        Ok(-b1)
    }
}
