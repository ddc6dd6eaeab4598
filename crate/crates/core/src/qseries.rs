//! Truncated q-expansions with exact coefficients.
//!
//! A series lives in one ring: `Z`, `Q`, or `Z/m`. Binary operations need the
//! same ring on both sides and truncate to the smaller precision.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer as _;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bernoulli::gen_bernoulli;
use crate::dirichlet::{char_eval, char_product, QuadChar};
use crate::numkernel::{
    bigint_mod, gcd, is_squarefree, is_squarefull, lcm, mulmod, powmod, prime_factors, rational_valuation, NumError,
    Rational, Residue,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QSeriesError {
    #[error("ring mismatch: {0} vs {1}")]
    RingMismatch(Ring, Ring),
    #[error("parity: (psi1 psi2)(-1) must equal (-1)^k")]
    Parity,
    #[error("bad level decomposition: {0}")]
    Decomposition(String),
    #[error("{0} is not invertible mod {1}")]
    NotInvertible(Rational, u64),
    #[error("{0} is not an integer")]
    NotIntegral(Rational),
    #[error("l = {ell} divides the level {level}")]
    LevelClash { ell: u64, level: u64 },
    #[error("stabilization data rejected: {0}")]
    Stabilization(String),
    #[error("no one-dimensional level one cusp space in weight {0}")]
    Weight(u64),
    #[error("cannot reduce mod {to} from {from}")]
    Reduce { from: Ring, to: u64 },
    #[error(transparent)]
    Num(#[from] NumError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ring {
    Integer,
    Rational,
    Residue(u64),
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ring::Integer => write!(f, "Z"),
            Ring::Rational => write!(f, "Q"),
            Ring::Residue(m) => write!(f, "Z/{m}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Coeffs {
    Integer(Vec<BigInt>),
    Rational(Vec<Rational>),
    Residue { modulus: u64, values: Vec<u64> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    pub weight: u64,
    pub level: u64,
    pub nebentypus: QuadChar,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QExpansion {
    coeffs: Coeffs,
    meta: Option<Meta>,
}

// Per-ring arithmetic, so the structural code below is written once.
trait Ops<T: Clone> {
    fn zero(&self) -> T;
    fn add(&self, a: &T, b: &T) -> T;
    fn sub(&self, a: &T, b: &T) -> T;
    fn mul(&self, a: &T, b: &T) -> T;
    fn is_zero(&self, a: &T) -> bool;
}

struct ZOps;
struct QOps;
struct ModOps(u64);

impl Ops<BigInt> for ZOps {
    fn zero(&self) -> BigInt {
        BigInt::zero()
    }
    fn add(&self, a: &BigInt, b: &BigInt) -> BigInt {
        a + b
    }
    fn sub(&self, a: &BigInt, b: &BigInt) -> BigInt {
        a - b
    }
    fn mul(&self, a: &BigInt, b: &BigInt) -> BigInt {
        a * b
    }
    fn is_zero(&self, a: &BigInt) -> bool {
        a.is_zero()
    }
}

impl Ops<Rational> for QOps {
    fn zero(&self) -> Rational {
        Rational::zero()
    }
    fn add(&self, a: &Rational, b: &Rational) -> Rational {
        a + b
    }
    fn sub(&self, a: &Rational, b: &Rational) -> Rational {
        a - b
    }
    fn mul(&self, a: &Rational, b: &Rational) -> Rational {
        a * b
    }
    fn is_zero(&self, a: &Rational) -> bool {
        a.is_zero()
    }
}

impl Ops<u64> for ModOps {
    fn zero(&self) -> u64 {
        0
    }
    fn add(&self, a: &u64, b: &u64) -> u64 {
        ((*a as u128 + *b as u128) % self.0 as u128) as u64
    }
    fn sub(&self, a: &u64, b: &u64) -> u64 {
        ((*a as u128 + self.0 as u128 - *b as u128) % self.0 as u128) as u64
    }
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        mulmod(*a, *b, self.0)
    }
    fn is_zero(&self, a: &u64) -> bool {
        *a == 0
    }
}

fn zip<T: Clone>(a: &[T], b: &[T], f: impl Fn(&T, &T) -> T) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| f(x, y)).collect()
}

fn convolve<T: Clone, R: Ops<T>>(r: &R, a: &[T], b: &[T]) -> Vec<T> {
    let len = a.len().min(b.len());
    let mut out = vec![r.zero(); len];
    for (i, x) in a.iter().enumerate().take(len) {
        if r.is_zero(x) {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(len - i) {
            if !r.is_zero(y) {
                out[i + j] = r.add(&out[i + j], &r.mul(x, y));
            }
        }
    }
    out
}

// F(q) ↦ F(q^ℓ), same length.
fn spread<T: Clone>(a: &[T], ell: usize, zero: T) -> Vec<T> {
    let mut out = vec![zero; a.len()];
    for (i, x) in a.iter().enumerate() {
        match i.checked_mul(ell) {
            Some(t) if t < a.len() => out[t] = x.clone(),
            _ => break,
        }
    }
    out
}

macro_rules! each {
    ($c:expr, $v:ident => $body:expr) => {
        match $c {
            Coeffs::Integer($v) => Coeffs::Integer($body),
            Coeffs::Rational($v) => Coeffs::Rational($body),
            Coeffs::Residue { modulus, values: $v } => Coeffs::Residue { modulus: *modulus, values: $body },
        }
    };
}

impl Coeffs {
    fn ring(&self) -> Ring {
        match self {
            Coeffs::Integer(_) => Ring::Integer,
            Coeffs::Rational(_) => Ring::Rational,
            Coeffs::Residue { modulus, .. } => Ring::Residue(*modulus),
        }
    }

    fn len(&self) -> usize {
        match self {
            Coeffs::Integer(v) => v.len(),
            Coeffs::Rational(v) => v.len(),
            Coeffs::Residue { values, .. } => values.len(),
        }
    }
}

/// Embeds an exact scalar into a ring.
fn scalar_in(ring: Ring, x: &Rational) -> Result<Scalar, QSeriesError> {
    match ring {
        Ring::Integer => {
            if x.is_integer() {
                Ok(Scalar::Z(x.to_integer()))
            } else {
                Err(QSeriesError::NotIntegral(x.clone()))
            }
        }
        Ring::Rational => Ok(Scalar::Q(x.clone())),
        Ring::Residue(m) => Residue::from_rational(x, m)
            .map(|r| Scalar::M(r.value()))
            .map_err(|_| QSeriesError::NotInvertible(x.clone(), m)),
    }
}

enum Scalar {
    Z(BigInt),
    Q(Rational),
    M(u64),
}

impl QExpansion {
    pub fn from_integers(v: Vec<BigInt>) -> Self {
        QExpansion { coeffs: Coeffs::Integer(v), meta: None }
    }

    pub fn from_rationals(v: Vec<Rational>) -> Self {
        QExpansion { coeffs: Coeffs::Rational(v), meta: None }
    }

    pub fn from_residues(modulus: u64, values: Vec<u64>) -> Self {
        let values = values.into_iter().map(|x| x % modulus).collect();
        QExpansion { coeffs: Coeffs::Residue { modulus, values }, meta: None }
    }

    /// The constant series 1 in `ring`.
    pub fn one(ring: Ring, prec: usize) -> Self {
        let mut s = Self::zero(ring, prec);
        match &mut s.coeffs {
            Coeffs::Integer(v) => v[0] = BigInt::one(),
            Coeffs::Rational(v) => v[0] = Rational::one(),
            Coeffs::Residue { modulus, values } => values[0] = 1 % *modulus,
        }
        s
    }

    pub fn zero(ring: Ring, prec: usize) -> Self {
        let coeffs = match ring {
            Ring::Integer => Coeffs::Integer(vec![BigInt::zero(); prec + 1]),
            Ring::Rational => Coeffs::Rational(vec![Rational::zero(); prec + 1]),
            Ring::Residue(m) => Coeffs::Residue { modulus: m, values: vec![0; prec + 1] },
        };
        QExpansion { coeffs, meta: None }
    }

    pub fn with_meta(mut self, meta: Meta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn meta(&self) -> Option<&Meta> {
        self.meta.as_ref()
    }

    pub fn coeffs(&self) -> &Coeffs {
        &self.coeffs
    }

    pub fn ring(&self) -> Ring {
        self.coeffs.ring()
    }

    pub fn prec(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient `n` as an exact rational; residues come back as their
    /// least nonnegative representative. `None` past the precision.
    pub fn coeff(&self, n: usize) -> Option<Rational> {
        match &self.coeffs {
            Coeffs::Integer(v) => v.get(n).map(|x| Rational::from_integer(x.clone())),
            Coeffs::Rational(v) => v.get(n).cloned(),
            Coeffs::Residue { values, .. } => values.get(n).map(|&x| Rational::from_integer(x.into())),
        }
    }

    pub fn coeff_string(&self, n: usize) -> Option<String> {
        match &self.coeffs {
            Coeffs::Integer(v) => v.get(n).map(|x| x.to_string()),
            Coeffs::Rational(v) => v.get(n).map(|x| x.to_string()),
            Coeffs::Residue { values, .. } => values.get(n).map(|x| x.to_string()),
        }
    }

    pub fn truncate(&self, prec: usize) -> Self {
        let keep = (prec + 1).min(self.coeffs.len());
        QExpansion { coeffs: each!(&self.coeffs, v => v[..keep].to_vec()), meta: self.meta.clone() }
    }

    pub fn to_rational(&self) -> Self {
        let coeffs = match &self.coeffs {
            Coeffs::Integer(v) => Coeffs::Rational(v.iter().cloned().map(Rational::from_integer).collect()),
            other => other.clone(),
        };
        QExpansion { coeffs, meta: self.meta.clone() }
    }

    fn same_ring(&self, other: &Self) -> Result<(), QSeriesError> {
        if self.ring() == other.ring() {
            Ok(())
        } else {
            Err(QSeriesError::RingMismatch(self.ring(), other.ring()))
        }
    }

    fn linear_meta(&self, other: &Self) -> Option<Meta> {
        match (&self.meta, &other.meta) {
            (Some(a), Some(b)) if a.weight == b.weight && a.nebentypus == b.nebentypus => {
                Some(Meta { weight: a.weight, level: lcm(a.level, b.level), nebentypus: a.nebentypus })
            }
            _ => None,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, QSeriesError> {
        self.same_ring(other)?;
        let coeffs = match (&self.coeffs, &other.coeffs) {
            (Coeffs::Integer(a), Coeffs::Integer(b)) => Coeffs::Integer(zip(a, b, |x, y| ZOps.add(x, y))),
            (Coeffs::Rational(a), Coeffs::Rational(b)) => Coeffs::Rational(zip(a, b, |x, y| QOps.add(x, y))),
            (Coeffs::Residue { modulus, values: a }, Coeffs::Residue { values: b, .. }) => {
                let r = ModOps(*modulus);
                Coeffs::Residue { modulus: *modulus, values: zip(a, b, |x, y| r.add(x, y)) }
            }
            _ => unreachable!(),
        };
        Ok(QExpansion { coeffs, meta: self.linear_meta(other) })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, QSeriesError> {
        self.add(&other.scale(&Rational::from_integer(-BigInt::one()))?)
    }

    pub fn multiply(&self, other: &Self) -> Result<Self, QSeriesError> {
        self.same_ring(other)?;
        let coeffs = match (&self.coeffs, &other.coeffs) {
            (Coeffs::Integer(a), Coeffs::Integer(b)) => Coeffs::Integer(convolve(&ZOps, a, b)),
            (Coeffs::Rational(a), Coeffs::Rational(b)) => Coeffs::Rational(convolve(&QOps, a, b)),
            (Coeffs::Residue { modulus, values: a }, Coeffs::Residue { values: b, .. }) => {
                Coeffs::Residue { modulus: *modulus, values: convolve(&ModOps(*modulus), a, b) }
            }
            _ => unreachable!(),
        };
        let meta = match (&self.meta, &other.meta) {
            (Some(a), Some(b)) => Some(Meta {
                weight: a.weight + b.weight,
                level: lcm(a.level, b.level),
                nebentypus: char_product(a.nebentypus, b.nebentypus),
            }),
            _ => None,
        };
        Ok(QExpansion { coeffs, meta })
    }

    pub fn pow(&self, e: u32) -> Result<Self, QSeriesError> {
        let e0 = e;
        let mut acc = QExpansion::one(self.ring(), self.prec());
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.multiply(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.multiply(&base)?;
            }
        }
        acc.meta = self.meta.as_ref().map(|m| Meta {
            weight: m.weight * e0 as u64,
            level: if e0 == 0 { 1 } else { m.level },
            nebentypus: if e0.is_multiple_of(2) { QuadChar::trivial() } else { m.nebentypus },
        });
        Ok(acc)
    }

    /// Multiplies every coefficient by the exact scalar `c`, which must lie in
    /// the series' ring.
    pub fn scale(&self, c: &Rational) -> Result<Self, QSeriesError> {
        let coeffs = match (&self.coeffs, scalar_in(self.ring(), c)?) {
            (Coeffs::Integer(v), Scalar::Z(s)) => Coeffs::Integer(v.iter().map(|x| x * &s).collect()),
            (Coeffs::Rational(v), Scalar::Q(s)) => Coeffs::Rational(v.iter().map(|x| x * &s).collect()),
            (Coeffs::Residue { modulus, values }, Scalar::M(s)) => {
                Coeffs::Residue { modulus: *modulus, values: values.iter().map(|&x| mulmod(x, s, *modulus)).collect() }
            }
            _ => unreachable!(),
        };
        Ok(QExpansion { coeffs, meta: self.meta.clone() })
    }

    /// `F(q) ↦ F(q^ℓ)`.
    pub fn substitute_power(&self, ell: usize) -> Self {
        let coeffs = match &self.coeffs {
            Coeffs::Integer(v) => Coeffs::Integer(spread(v, ell, BigInt::zero())),
            Coeffs::Rational(v) => Coeffs::Rational(spread(v, ell, Rational::zero())),
            Coeffs::Residue { modulus, values } => {
                Coeffs::Residue { modulus: *modulus, values: spread(values, ell, 0) }
            }
        };
        QExpansion { coeffs, meta: self.meta.clone() }
    }

    /// `θ^j`: `a_n ↦ n^j a_n`.
    pub fn theta(&self, j: u32) -> Self {
        if j == 0 {
            return self.clone();
        }
        let coeffs = match &self.coeffs {
            Coeffs::Integer(v) => Coeffs::Integer(
                v.iter().enumerate().map(|(n, x)| x * num_traits::pow(BigInt::from(n), j as usize)).collect(),
            ),
            Coeffs::Rational(v) => Coeffs::Rational(
                v.iter()
                    .enumerate()
                    .map(|(n, x)| x * Rational::from_integer(num_traits::pow(BigInt::from(n), j as usize)))
                    .collect(),
            ),
            Coeffs::Residue { modulus, values } => Coeffs::Residue {
                modulus: *modulus,
                values: values
                    .iter()
                    .enumerate()
                    .map(|(n, &x)| mulmod(x, powmod(n as u64 % modulus, j as u64, *modulus), *modulus))
                    .collect(),
            },
        };
        let meta = self.meta.as_ref().map(|m| Meta { weight: m.weight + 2 * j as u64, ..m.clone() });
        QExpansion { coeffs, meta }
    }

    /// `f♭`: drops every `a_n` with `p | n`, including `a_0`.
    pub fn p_deplete(&self, p: u64) -> Self {
        let keep = |n: usize| !(n as u64).is_multiple_of(p);
        let coeffs = match &self.coeffs {
            Coeffs::Integer(v) => Coeffs::Integer(
                v.iter().enumerate().map(|(n, x)| if keep(n) { x.clone() } else { BigInt::zero() }).collect(),
            ),
            Coeffs::Rational(v) => Coeffs::Rational(
                v.iter().enumerate().map(|(n, x)| if keep(n) { x.clone() } else { Rational::zero() }).collect(),
            ),
            Coeffs::Residue { modulus, values } => Coeffs::Residue {
                modulus: *modulus,
                values: values.iter().enumerate().map(|(n, &x)| if keep(n) { x } else { 0 }).collect(),
            },
        };
        let meta = self.meta.as_ref().map(|m| Meta { level: m.level * p * p, ..m.clone() });
        QExpansion { coeffs, meta }
    }

    pub fn reduce_mod(&self, m: u64) -> Result<Self, QSeriesError> {
        if m < 2 {
            return Err(NumError::BadModulus(m).into());
        }
        let values = match &self.coeffs {
            Coeffs::Integer(v) => v.iter().map(|x| bigint_mod(x, m)).collect(),
            Coeffs::Rational(v) => v
                .iter()
                .map(|x| {
                    Residue::from_rational(x, m)
                        .map(|r| r.value())
                        .map_err(|_| QSeriesError::NotInvertible(x.clone(), m))
                })
                .collect::<Result<Vec<_>, _>>()?,
            Coeffs::Residue { modulus, values } => {
                if modulus % m != 0 {
                    return Err(QSeriesError::Reduce { from: self.ring(), to: m });
                }
                values.iter().map(|x| x % m).collect()
            }
        };
        Ok(QExpansion { coeffs: Coeffs::Residue { modulus: m, values }, meta: self.meta.clone() })
    }

    /// Coefficient `n` of `self - other` is `≡ 0 mod m` for every
    /// `n0 ≤ n ≤ min prec`. `Z` and `Q` series may be compared with each
    /// other; a rational difference counts as `≡ 0` when `m` divides the
    /// numerator and is prime to the denominator.
    pub fn congruent_from(&self, other: &Self, m: u64, n0: usize) -> Result<bool, QSeriesError> {
        Ok(self.first_incongruence(other, m, n0)?.is_none())
    }

    /// The first index `n ≥ n0` at which the congruence fails.
    pub fn first_incongruence(&self, other: &Self, m: u64, n0: usize) -> Result<Option<usize>, QSeriesError> {
        let top = self.prec().min(other.prec());
        match (self.ring(), other.ring()) {
            (Ring::Residue(a), Ring::Residue(b)) => {
                if a % m != 0 || b % m != 0 {
                    return Err(QSeriesError::RingMismatch(self.ring(), other.ring()));
                }
                let (Coeffs::Residue { values: x, .. }, Coeffs::Residue { values: y, .. }) =
                    (&self.coeffs, &other.coeffs)
                else {
                    unreachable!()
                };
                Ok((n0..=top).find(|&n| x[n] % m != y[n] % m))
            }
            (Ring::Residue(_), _) | (_, Ring::Residue(_)) => Err(QSeriesError::RingMismatch(self.ring(), other.ring())),
            _ => {
                let mb = BigInt::from(m);
                Ok((n0..=top).find(|&n| {
                    let d = self.coeff(n).unwrap() - other.coeff(n).unwrap();
                    !(d.numer().is_multiple_of(&mb) && d.denom().gcd(&mb).is_one())
                }))
            }
        }
    }

    /// Stabilization at `ℓ`:
    /// `(+)`: `F - βF(q^ℓ)`, `(-)`: `F - αF(q^ℓ)`,
    /// `(0)`: `F - a_ℓF(q^ℓ) + ε(ℓ)ℓ^{k-1}F(q^{ℓ²})`.
    pub fn stabilize(&self, ell: u64, sign: StabSign, data: &StabData) -> Result<Self, QSeriesError> {
        if let Some(m) = &self.meta {
            if m.level % ell == 0 {
                return Err(QSeriesError::LevelClash { ell, level: m.level });
            }
        }
        data.validate(ell)?;
        let l = ell as usize;
        let out = match sign {
            StabSign::Plus => self.sub(&self.substitute_power(l).scale(&data.beta)?)?,
            StabSign::Minus => self.sub(&self.substitute_power(l).scale(&data.alpha)?)?,
            StabSign::Zero => {
                let a = data.alpha.clone() + &data.beta;
                let c = &data.alpha * &data.beta;
                let once = self.substitute_power(l).scale(&a)?;
                let twice = self.substitute_power(l).substitute_power(l).scale(&c)?;
                self.sub(&once)?.add(&twice)?
            }
        };
        let factor = if sign == StabSign::Zero { ell * ell } else { ell };
        let meta = self.meta.as_ref().map(|m| Meta { level: m.level * factor, ..m.clone() });
        Ok(QExpansion { coeffs: out.coeffs, meta })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabSign {
    Plus,
    Minus,
    Zero,
}

/// `α_ℓ, β_ℓ` with `α+β = a_ℓ`, `αβ = ε(ℓ)ℓ^{k-1}`, `ord_ℓ α ≤ ord_ℓ β`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabData {
    pub alpha: Rational,
    pub beta: Rational,
    pub a_ell: Rational,
    pub eps_ell: i8,
    pub k: u64,
}

impl StabData {
    /// The Eisenstein choice `α = ψ₁(ℓ)`, `β = ψ₂(ℓ)ℓ^{k-1}`.
    pub fn eisenstein(psi1: QuadChar, psi2: QuadChar, k: u64, ell: u64) -> Self {
        let alpha = Rational::from_integer(char_eval(psi1, ell as i64).into());
        let beta = Rational::from_integer(
            BigInt::from(char_eval(psi2, ell as i64)) * num_traits::pow(BigInt::from(ell), k as usize - 1),
        );
        StabData {
            a_ell: alpha.clone() + &beta,
            alpha,
            beta,
            eps_ell: char_eval(char_product(psi1, psi2), ell as i64),
            k,
        }
    }

    fn validate(&self, ell: u64) -> Result<(), QSeriesError> {
        if self.alpha.clone() + &self.beta != self.a_ell {
            return Err(QSeriesError::Stabilization("alpha + beta != a_l".into()));
        }
        let prod = Rational::from_integer(
            BigInt::from(self.eps_ell) * num_traits::pow(BigInt::from(ell), self.k as usize - 1),
        );
        if &self.alpha * &self.beta != prod {
            return Err(QSeriesError::Stabilization("alpha * beta != eps(l) l^(k-1)".into()));
        }
        let ord = |x: &Rational| rational_valuation(x, ell).unwrap_or(i64::MAX);
        if ord(&self.alpha) > ord(&self.beta) {
            return Err(QSeriesError::Stabilization("ord_l(alpha) > ord_l(beta)".into()));
        }
        Ok(())
    }
}

/// `E_k^{ψ₁,ψ₂,(N)}` with `N = N₊N₋N₀`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EisensteinType {
    pub psi1: QuadChar,
    pub psi2: QuadChar,
    pub k: u64,
    pub n_plus: u64,
    pub n_minus: u64,
    pub n_zero: u64,
}

impl EisensteinType {
    pub fn level_one(psi1: QuadChar, psi2: QuadChar, k: u64) -> Self {
        EisensteinType { psi1, psi2, k, n_plus: 1, n_minus: 1, n_zero: 1 }
    }

    pub fn validate(&self) -> Result<(), QSeriesError> {
        let parity = self.psi1.parity() * self.psi2.parity();
        if (parity == 1) != self.k.is_multiple_of(2) {
            return Err(QSeriesError::Parity);
        }
        if self.k < 1 {
            return Err(QSeriesError::Decomposition("k must be positive".into()));
        }
        check_decomposition(self.n_plus, self.n_minus, self.n_zero)
    }

    /// `-δ_{ψ₁=1}·B_{k,ψ₂}/2k` times one Euler factor per stabilized prime:
    /// `(1-ψ₂(ℓ)ℓ^{k-1})` on `N₊`, `(1-ψ₁(ℓ))` on `N₋`, both on `N₀`.
    pub fn constant_term(&self) -> Rational {
        if !self.psi1.is_trivial() {
            return Rational::zero();
        }
        let mut c = -gen_bernoulli(self.psi2, self.k) / Rational::from_integer(BigInt::from(2 * self.k));
        let plus = |ell: u64| {
            BigInt::one()
                - BigInt::from(char_eval(self.psi2, ell as i64))
                    * num_traits::pow(BigInt::from(ell), self.k as usize - 1)
        };
        let minus = |ell: u64| BigInt::one() - BigInt::from(char_eval(self.psi1, ell as i64));
        for ell in prime_factors(self.n_plus) {
            c *= Rational::from_integer(plus(ell));
        }
        for ell in prime_factors(self.n_minus) {
            c *= Rational::from_integer(minus(ell));
        }
        for ell in prime_factors(self.n_zero) {
            c *= Rational::from_integer(plus(ell) * minus(ell));
        }
        c
    }

    pub fn level(&self) -> u64 {
        self.psi1.conductor() * self.psi2.conductor() * self.n_plus * self.n_minus * self.n_zero
    }

    /// `Σ ψ₁(n/d)ψ₂(d)d^{k-1}` over `d | n` with `(d,N₊) = 1`, `(n/d,N₋) = 1`,
    /// `(n,N₀) = 1`.
    pub fn sigma(&self, n: u64) -> BigInt {
        if n == 0 || gcd(n, self.n_zero) != 1 {
            return BigInt::zero();
        }
        let mut s = BigInt::zero();
        let mut d = 1;
        while d * d <= n {
            if n.is_multiple_of(d) {
                s += self.term(n, d);
                if d * d != n {
                    s += self.term(n, n / d);
                }
            }
            d += 1;
        }
        s
    }

    fn admissible(&self, e: u64, d: u64) -> i8 {
        if gcd(d, self.n_plus) != 1 || gcd(e, self.n_minus) != 1 || gcd(d * e, self.n_zero) != 1 {
            return 0;
        }
        char_eval(self.psi1, e as i64) * char_eval(self.psi2, d as i64)
    }

    fn term(&self, n: u64, d: u64) -> BigInt {
        match self.admissible(n / d, d) {
            0 => BigInt::zero(),
            c => BigInt::from(c) * num_traits::pow(BigInt::from(d), self.k as usize - 1),
        }
    }
}

fn check_decomposition(np: u64, nm: u64, n0: u64) -> Result<(), QSeriesError> {
    if np == 0 || nm == 0 || n0 == 0 {
        return Err(QSeriesError::Decomposition("zero factor".into()));
    }
    if gcd(np, nm) != 1 || gcd(np, n0) != 1 || gcd(nm, n0) != 1 {
        return Err(QSeriesError::Decomposition(format!("({np},{nm},{n0}) not pairwise coprime")));
    }
    if !is_squarefree(np * nm) {
        return Err(QSeriesError::Decomposition(format!("N+ N- = {} not squarefree", np * nm)));
    }
    if !is_squarefull(n0) {
        return Err(QSeriesError::Decomposition(format!("N0 = {n0} not squarefull")));
    }
    Ok(())
}

pub fn eisenstein(ty: &EisensteinType, prec: usize, ring: Ring) -> Result<QExpansion, QSeriesError> {
    ty.validate()?;
    let c0 = ty.constant_term();
    let meta = Meta { weight: ty.k, level: ty.level(), nebentypus: char_product(ty.psi1, ty.psi2) };
    let coeffs = match ring {
        Ring::Integer => {
            if !c0.is_integer() {
                return Err(QSeriesError::NotIntegral(c0));
            }
            let mut v = sigma_table(ty, prec);
            v[0] = c0.to_integer();
            Coeffs::Integer(v)
        }
        Ring::Rational => {
            let mut v: Vec<Rational> = sigma_table(ty, prec).into_iter().map(Rational::from_integer).collect();
            v[0] = c0;
            Coeffs::Rational(v)
        }
        Ring::Residue(m) => {
            let c = Residue::from_rational(&c0, m).map_err(|_| QSeriesError::NotInvertible(c0.clone(), m))?;
            let mut v = sigma_table_mod(ty, prec, m);
            v[0] = c.value();
            Coeffs::Residue { modulus: m, values: v }
        }
    };
    Ok(QExpansion { coeffs, meta: Some(meta) })
}

// Sieve over d: each d contributes to every multiple n = d·e.
fn sigma_table(ty: &EisensteinType, prec: usize) -> Vec<BigInt> {
    let mut v = vec![BigInt::zero(); prec + 1];
    for d in 1..=prec as u64 {
        let dk = num_traits::pow(BigInt::from(d), ty.k as usize - 1);
        let mut e = 1;
        while d * e <= prec as u64 {
            match ty.admissible(e, d) {
                1 => v[(d * e) as usize] += &dk,
                -1 => v[(d * e) as usize] -= &dk,
                _ => {}
            }
            e += 1;
        }
    }
    v
}

fn sigma_table_mod(ty: &EisensteinType, prec: usize, m: u64) -> Vec<u64> {
    let r = ModOps(m);
    let mut v = vec![0u64; prec + 1];
    for d in 1..=prec as u64 {
        let dk = powmod(d % m, ty.k - 1, m);
        let mut e = 1;
        while d * e <= prec as u64 {
            let i = (d * e) as usize;
            match ty.admissible(e, d) {
                1 => v[i] = r.add(&v[i], &dk),
                -1 => v[i] = r.sub(&v[i], &dk),
                _ => {}
            }
            e += 1;
        }
    }
    v
}

/// `σ_k(n)`.
pub fn sigma(k: u32, n: u64) -> BigInt {
    let t = EisensteinType::level_one(QuadChar::trivial(), QuadChar::trivial(), k as u64 + 1);
    t.sigma(n)
}

// 1 + c·Σ σ_{k-1}(n) qⁿ.
fn normalized_eisenstein(k: u64, c: i64, prec: usize) -> QExpansion {
    let ty = EisensteinType::level_one(QuadChar::trivial(), QuadChar::trivial(), k);
    let mut v: Vec<BigInt> = sigma_table(&ty, prec).into_iter().map(|x| x * c).collect();
    v[0] = BigInt::one();
    QExpansion::from_integers(v).with_meta(Meta { weight: k, level: 1, nebentypus: QuadChar::trivial() })
}

/// `G₄ = 1 + 240Σσ₃(n)qⁿ`.
pub fn g4(prec: usize) -> QExpansion {
    normalized_eisenstein(4, 240, prec)
}

/// `G₆ = 1 - 504Σσ₅(n)qⁿ`.
pub fn g6(prec: usize) -> QExpansion {
    normalized_eisenstein(6, -504, prec)
}

/// `Δ = qΠ(1-qⁿ)²⁴`.
pub fn delta(prec: usize) -> QExpansion {
    // P = Π_{n<prec}(1-qⁿ) to degree prec-1, so qP^24 reaches degree prec.
    let len = prec.max(1);
    let mut p = vec![BigInt::zero(); len];
    p[0] = BigInt::one();
    for n in 1..len {
        for i in (n..len).rev() {
            let t = p[i - n].clone();
            p[i] -= t;
        }
    }
    let sq = |a: &[BigInt]| convolve(&ZOps, a, a);
    let p2 = sq(&p);
    let p4 = sq(&p2);
    let p8 = sq(&p4);
    let p16 = sq(&p8);
    let p24 = convolve(&ZOps, &p16, &p8);
    let mut v = vec![BigInt::zero(); prec + 1];
    for (i, x) in p24.into_iter().enumerate().take(prec) {
        v[i + 1] = x;
    }
    QExpansion::from_integers(v).with_meta(Meta { weight: 12, level: 1, nebentypus: QuadChar::trivial() })
}

/// The normalized eigenform spanning `S_k(SL₂(Z))` when that space is a line.
pub fn level1_cuspform(k: u64, prec: usize) -> Result<QExpansion, QSeriesError> {
    let (a, b) = match k {
        12 => (0, 0),
        16 => (1, 0),
        18 => (0, 1),
        20 => (2, 0),
        22 => (1, 1),
        26 => (2, 1),
        _ => return Err(QSeriesError::Weight(k)),
    };
    let mut f = delta(prec);
    if a > 0 {
        f = f.multiply(&g4(prec).pow(a)?)?;
    }
    if b > 0 {
        f = f.multiply(&g6(prec))?;
    }
    debug_assert!(prec == 0 || f.coeff(1) == Some(Rational::one()));
    Ok(f.with_meta(Meta { weight: k, level: 1, nebentypus: QuadChar::trivial() }))
}

/// `n` with `τ(n) ≢ σ₁₁(n) mod 691`, for `1 ≤ n ≤ prec`. Empty when the
/// congruence holds throughout.
pub fn tau_sigma_failures(prec: usize) -> Vec<usize> {
    let d = delta(prec);
    let ty = EisensteinType::level_one(QuadChar::trivial(), QuadChar::trivial(), 12);
    let s = sigma_table_mod(&ty, prec, 691);
    (1..=prec)
        .filter(|&n| {
            let Coeffs::Integer(v) = d.coeffs() else { unreachable!() };
            bigint_mod(&v[n], 691) != s[n]
        })
        .collect()
}

/// `true` if every coefficient of `f` fits in an `i64`.
pub fn fits_i64(f: &QExpansion) -> bool {
    match f.coeffs() {
        Coeffs::Integer(v) => v.iter().all(|x| x.to_i64().is_some()),
        Coeffs::Rational(v) => v.iter().all(|x| x.numer().to_i64().is_some() && x.denom().to_i64().is_some()),
        Coeffs::Residue { .. } => true,
    }
}

/// Absolute value of the largest integer coefficient, for display sizing.
pub fn height(f: &QExpansion) -> BigInt {
    match f.coeffs() {
        Coeffs::Integer(v) => v.iter().map(|x| x.abs()).max().unwrap_or_default(),
        Coeffs::Rational(v) => v.iter().map(|x| x.numer().abs()).max().unwrap_or_default(),
        Coeffs::Residue { values, .. } => values.iter().copied().max().unwrap_or(0).into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::rat;

    fn triv() -> QuadChar {
        QuadChar::trivial()
    }

    fn q(d: i64) -> QuadChar {
        QuadChar::new(d).unwrap()
    }

    fn ints(f: &QExpansion) -> Vec<BigInt> {
        let Coeffs::Integer(v) = f.coeffs() else { panic!("not integral") };
        v.clone()
    }

    #[test]
    fn eisenstein_level_one() {
        let e12 = eisenstein(&EisensteinType::level_one(triv(), triv(), 12), 10, Ring::Rational).unwrap();
        assert_eq!(e12.coeff(1), Some(rat(1, 1)));
        let s6 = 362_797_056i64 + 1 + 2048 + 177_147;
        assert_eq!(e12.coeff(6), Some(rat(s6, 1)));
        assert_eq!(e12.coeff(0), Some(rat(691, 65520)));
        let e18 = eisenstein(&EisensteinType::level_one(triv(), triv(), 18), 5, Ring::Rational).unwrap();
        assert_eq!(e18.coeff(0), Some(rat(-43867, 28728)));
    }

    #[test]
    fn eisenstein_plus_at_seven() {
        let ty = EisensteinType { n_plus: 7, ..EisensteinType::level_one(triv(), triv(), 18) };
        let e = eisenstein(&ty, 50, Ring::Rational).unwrap();
        assert_eq!(e.coeff(7), Some(rat(1, 1)));
        assert_eq!(e.coeff(14), Some(rat(1 + (1i64 << 17), 1)));
        assert_eq!(e.meta().unwrap().level, 7);
    }

    #[test]
    fn eisenstein_rejections() {
        assert_eq!(
            eisenstein(&EisensteinType::level_one(q(-3), triv(), 12), 5, Ring::Rational),
            Err(QSeriesError::Parity)
        );
        let bad = EisensteinType { n_plus: 4, ..EisensteinType::level_one(triv(), triv(), 12) };
        assert!(matches!(eisenstein(&bad, 5, Ring::Rational), Err(QSeriesError::Decomposition(_))));
        let bad0 = EisensteinType { n_zero: 12, ..EisensteinType::level_one(triv(), triv(), 12) };
        assert!(matches!(eisenstein(&bad0, 5, Ring::Rational), Err(QSeriesError::Decomposition(_))));
        // 2k = 24 is not invertible mod 2 or 3, and -B12/24 has denominator 65520.
        assert!(matches!(
            eisenstein(&EisensteinType::level_one(triv(), triv(), 12), 5, Ring::Residue(3)),
            Err(QSeriesError::NotInvertible(..))
        ));
        assert!(eisenstein(&EisensteinType::level_one(triv(), triv(), 12), 5, Ring::Residue(691)).is_ok());
    }

    #[test]
    fn delta_and_theta() {
        let d = delta(12);
        let t: Vec<i64> = ints(&d).iter().map(|x| x.to_i64().unwrap()).collect();
        assert_eq!(t, vec![0, 1, -24, 252, -1472, 4830, -6048, -16744, 84480, -113643, -115920, 534612, -370944]);
        assert_eq!(d.theta(2).coeff(2), Some(rat(-96, 1)));
        assert_eq!(d.theta(0), d);
        let e12 = eisenstein(&EisensteinType::level_one(triv(), triv(), 12), 10, Ring::Rational).unwrap();
        assert_eq!(e12.theta(1).coeff(6), Some(e12.coeff(6).unwrap() * rat(6, 1)));
        assert_eq!(e12.theta(1).coeff(0), Some(rat(0, 1)));
    }

    #[test]
    fn depletion() {
        let d = delta(20);
        let dd = d.p_deplete(2);
        assert_eq!(dd.coeff(2), Some(rat(0, 1)));
        assert_eq!(dd.coeff(3), d.coeff(3));
        let e = eisenstein(&EisensteinType::level_one(triv(), triv(), 12), 20, Ring::Rational).unwrap();
        assert_eq!(e.theta(1).p_deplete(5).coeff(10), Some(rat(0, 1)));
        assert_eq!(e.p_deplete(5).coeff(0), Some(rat(0, 1)));
    }

    #[test]
    fn g4_cubed_minus_g6_squared() {
        let prec = 50;
        let lhs = g4(prec).pow(3).unwrap().sub(&g6(prec).pow(2).unwrap()).unwrap();
        let rhs = delta(prec).scale(&rat(1728, 1)).unwrap();
        assert_eq!(ints(&lhs), ints(&rhs));
    }

    #[test]
    fn cusp_forms() {
        for k in [12u64, 16, 18, 20, 22, 26] {
            let f = level1_cuspform(k, 10).unwrap();
            assert_eq!(f.coeff(0), Some(rat(0, 1)));
            assert_eq!(f.coeff(1), Some(rat(1, 1)));
            assert_eq!(f.meta().unwrap().weight, k);
        }
        // ΔG₄: -24 + 240
        assert_eq!(level1_cuspform(16, 5).unwrap().coeff(2), Some(rat(216, 1)));
        assert_eq!(level1_cuspform(12, 30).unwrap(), delta(30));
        assert_eq!(level1_cuspform(14, 5), Err(QSeriesError::Weight(14)));
        assert_eq!(level1_cuspform(24, 5), Err(QSeriesError::Weight(24)));
    }

    #[test]
    fn ramanujan_691() {
        assert!(tau_sigma_failures(500).is_empty());
        let e12 = eisenstein(&EisensteinType::level_one(triv(), triv(), 12), 200, Ring::Rational).unwrap();
        assert!(delta(200).congruent_from(&e12, 691, 1).unwrap());
        // The constant term 691/65520 is itself ≡ 0.
        assert!(delta(200).congruent_from(&e12, 691, 0).unwrap());
        assert!(!delta(30).congruent_from(&e12, 7, 1).unwrap());
    }

    #[test]
    fn weight_18_against_sigma17() {
        let f = level1_cuspform(18, 200).unwrap();
        let e = eisenstein(&EisensteinType::level_one(triv(), triv(), 18), 200, Ring::Residue(43867)).unwrap();
        assert_eq!(f.reduce_mod(43867).unwrap().first_incongruence(&e, 43867, 1).unwrap(), None);
    }

    #[test]
    fn ring_rules() {
        let a = delta(10);
        let b = a.to_rational();
        assert!(matches!(a.add(&b), Err(QSeriesError::RingMismatch(..))));
        assert_eq!(a.multiply(&QExpansion::one(Ring::Integer, 10)).unwrap().coeffs(), a.coeffs());
        let short = delta(5);
        assert_eq!(a.add(&short).unwrap().prec(), 5);
        assert!(a.reduce_mod(7).unwrap().reduce_mod(3).is_err());
        assert!(a.reduce_mod(21).unwrap().reduce_mod(3).is_ok());
    }

    #[test]
    fn stabilization_matches_eisenstein_plus() {
        for (psi1, psi2, k) in [(triv(), triv(), 12u64), (triv(), q(5), 4), (q(-3), q(-4), 6), (triv(), q(-3), 3)] {
            let base = EisensteinType::level_one(psi1, psi2, k);
            let e = eisenstein(&base, 120, Ring::Rational).unwrap();
            for ell in [7u64, 11] {
                let data = StabData::eisenstein(psi1, psi2, k, ell);
                let plus = eisenstein(&EisensteinType { n_plus: ell, ..base }, 120, Ring::Rational).unwrap();
                let minus = eisenstein(&EisensteinType { n_minus: ell, ..base }, 120, Ring::Rational).unwrap();
                let zero = eisenstein(&EisensteinType { n_zero: ell * ell, ..base }, 120, Ring::Rational).unwrap();
                assert_eq!(e.stabilize(ell, StabSign::Plus, &data).unwrap(), plus, "+ at {ell}");
                assert_eq!(e.stabilize(ell, StabSign::Minus, &data).unwrap(), minus, "- at {ell}");
                assert_eq!(e.stabilize(ell, StabSign::Zero, &data).unwrap(), zero, "0 at {ell}");
            }
        }
    }

    #[test]
    fn stabilization_rejections() {
        let e = eisenstein(&EisensteinType::level_one(triv(), q(5), 4), 20, Ring::Rational).unwrap();
        let data = StabData::eisenstein(triv(), q(5), 4, 5);
        assert!(matches!(e.stabilize(5, StabSign::Plus, &data), Err(QSeriesError::LevelClash { .. })));
        let mut bad = StabData::eisenstein(triv(), q(5), 4, 7);
        bad.a_ell += rat(1, 1);
        assert!(matches!(e.stabilize(7, StabSign::Plus, &bad), Err(QSeriesError::Stabilization(_))));
        let good = StabData::eisenstein(triv(), q(5), 4, 7);
        let swapped = StabData { alpha: good.beta.clone(), beta: good.alpha.clone(), ..good };
        assert!(matches!(e.stabilize(7, StabSign::Plus, &swapped), Err(QSeriesError::Stabilization(_))));
    }

    #[test]
    fn stabilization_commutes() {
        let e = eisenstein(&EisensteinType::level_one(triv(), triv(), 12), 100, Ring::Rational).unwrap();
        let d5 = StabData::eisenstein(triv(), triv(), 12, 5);
        let d7 = StabData::eisenstein(triv(), triv(), 12, 7);
        for s1 in [StabSign::Plus, StabSign::Minus, StabSign::Zero] {
            for s2 in [StabSign::Plus, StabSign::Minus, StabSign::Zero] {
                let a = e.stabilize(5, s1, &d5).unwrap().stabilize(7, s2, &d7).unwrap();
                let b = e.stabilize(7, s2, &d7).unwrap().stabilize(5, s1, &d5).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn constant_term_zero_stabilization_vanishes() {
        let ty = EisensteinType { n_zero: 49, ..EisensteinType::level_one(triv(), triv(), 12) };
        assert_eq!(ty.constant_term(), rat(0, 1));
    }
}
