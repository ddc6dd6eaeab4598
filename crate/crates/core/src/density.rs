//! Residue-class families for the positive-proportion theorems, the
//! Horie–Nakagawa / Taya constants, the explicit lower bounds, and a concrete
//! scan over quadratic twists.

use std::fmt;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ellcurve::{ConductorSplit, CurveError, CurveQ};
use crate::heegner::{HeegnerError, Reducibility};
use crate::numkernel::{
    crt, euler_phi, factorize, gcd, is_squarefree, is_squarefull, kronecker, lcm, prime_factors, rat, valuation,
    NumError, Rational,
};
use crate::quadfield::{class_number_imag, compose, fundamentals_in, splitting, QuadField, Splitting};
use crate::serde_util;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DensityError {
    #[error("bad decomposition: {0}")]
    Decomposition(String),
    #[error("3 divides N = {0}; 3 must be a good prime")]
    ThreeDividesLevel(u64),
    #[error("(m, M) = ({m}, {modulus}) violates: {clause}")]
    Hypothesis { m: u64, modulus: u64, clause: String },
    #[error("D_L = {0} is not admissible: {1}")]
    BadTwist(i64, String),
    #[error("{0} residue classes exceeds the enumeration limit")]
    TooMany(u128),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Heegner(#[from] HeegnerError),
    #[error(transparent)]
    Num(#[from] NumError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    #[serde(rename = "real")]
    RealL,
    #[serde(rename = "imaginary")]
    ImaginaryL,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::RealL => "real",
            Side::ImaginaryL => "imaginary",
        })
    }
}

impl std::str::FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "real" => Ok(Side::RealL),
            "imaginary" | "imag" => Ok(Side::ImaginaryL),
            _ => Err(format!("unknown branch {s:?} (real or imaginary)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    #[serde(with = "serde_util::rational")]
    pub value: Rational,
}

/// A lower bound together with the factors it is the product of.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityBound {
    #[serde(with = "serde_util::rational")]
    pub value: Rational,
    pub terms: Vec<Term>,
}

impl DensityBound {
    fn from_terms(terms: Vec<Term>) -> Self {
        let value = terms.iter().fold(Rational::one(), |acc, t| acc * &t.value);
        DensityBound { value, terms }
    }

    pub fn audit(&self) -> Rational {
        self.terms.iter().fold(Rational::one(), |acc, t| acc * &t.value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidueFamily {
    #[serde(rename = "M")]
    pub modulus: u64,
    pub classes: Vec<u64>,
    pub side: Side,
    pub provenance: String,
}

fn check_decomposition(s: ConductorSplit) -> Result<u64, DensityError> {
    let ConductorSplit { split, nonsplit, additive } = s;
    if split == 0 || nonsplit == 0 || additive == 0 {
        return Err(DensityError::Decomposition("factors must be positive".into()));
    }
    if gcd(split, nonsplit) != 1 || gcd(split, additive) != 1 || gcd(nonsplit, additive) != 1 {
        return Err(DensityError::Decomposition("factors must be pairwise coprime".into()));
    }
    if !is_squarefree(split * nonsplit) {
        return Err(DensityError::Decomposition("N_split N_nonsplit must be squarefree".into()));
    }
    if additive > 1 && !is_squarefull(additive) {
        return Err(DensityError::Decomposition("N_add must be squarefull".into()));
    }
    let n = split * nonsplit * additive;
    if n % 3 == 0 {
        return Err(DensityError::ThreeDividesLevel(n));
    }
    Ok(n)
}

/// `M'`: `lcm(N, extra)` with its 2-part raised to 8 when exactly 2 divides
/// it and to at least 16 when 4 does.
pub fn m_prime(n: u64, extra: u64) -> u64 {
    let base = lcm(n, extra);
    match valuation(base, 2) {
        0 => base,
        1 => lcm(base, 8),
        _ => lcm(base, 16),
    }
}

fn q_over(ell: u64) -> Rational {
    let q = if ell == 2 { 4 } else { ell as i64 };
    rat(q, ell as i64 + 1)
}

fn q_terms(modulus: u64) -> Vec<Term> {
    prime_factors(modulus).into_iter().map(|l| Term { label: format!("q/(l+1) at l={l}"), value: q_over(l) }).collect()
}

fn local_class_count(s: ConductorSplit) -> Vec<Term> {
    let mut out = Vec::new();
    for l in prime_factors(s.split * s.nonsplit) {
        if l != 2 {
            out.push(Term { label: format!("(l-1)/2 at multiplicative l={l}"), value: rat((l as i64 - 1) / 2, 1) });
        }
    }
    for l in prime_factors(s.additive) {
        if l == 2 {
            out.push(Term { label: "2 for 4 | N_add".into(), value: rat(2, 1) });
        } else if l % 3 == 1 {
            let l = l as i64;
            out.push(Term { label: format!("(l+2)(l-1)/2 at additive l={l}"), value: rat((l + 2) * (l - 1) / 2, 1) });
        } else {
            out.push(Term { label: format!("l-1 at additive l={l}"), value: rat(l as i64 - 1, 1) });
        }
    }
    out
}

/// Lower bound for the proportion of real (resp. imaginary) `L` with 3 inert,
/// the class-number condition, and the local conditions at `N`.
///
/// The real side counts `L` through the imaginary field of discriminant
/// `-3D_L`, so the prefactors are `1/(12Φ(M'))` and `1/(4Φ(M'))`.
pub fn real_twist_bound(s: ConductorSplit, side: Side) -> Result<DensityBound, DensityError> {
    let n = check_decomposition(s)?;
    let mp = m_prime(n, 1);
    let phi = euler_phi(mp) as i64;
    let mut terms = vec![match side {
        Side::RealL => Term { label: format!("1/(12 Phi(M')), M'={mp}"), value: rat(1, 12 * phi) },
        Side::ImaginaryL => Term { label: format!("1/(4 Phi(M')), M'={mp}"), value: rat(1, 4 * phi) },
    }];
    terms.extend(local_class_count(s));
    terms.extend(q_terms(3 * mp));
    Ok(DensityBound::from_terms(terms))
}

/// Lower bound for the proportion of imaginary `K` giving a non-torsion
/// Heegner point on `E_L`.
pub fn twist_theorem_bound(s: ConductorSplit, d_l: i64) -> Result<DensityBound, DensityError> {
    let n = check_decomposition(s)?;
    let l = QuadField::new(d_l).map_err(|e| DensityError::BadTwist(d_l, e.to_string()))?;
    if d_l % 3 == 0 {
        return Err(DensityError::BadTwist(d_l, "3 must be inert in L".into()));
    }
    let du = d_l.unsigned_abs();
    for ell in prime_factors(gcd(du, n)) {
        if ell != 2 && !s.additive.is_multiple_of(ell) {
            return Err(DensityError::BadTwist(d_l, format!("{ell} divides D_L and N but not N_add")));
        }
    }
    let mp = m_prime(n, du * du);
    let phi = euler_phi(mp) as i64;
    let mut terms = vec![if l.disc() > 0 {
        Term { label: format!("1/(4 Phi(M')), M'={mp}"), value: rat(1, 4 * phi) }
    } else {
        Term { label: format!("1/(12 Phi(M')), M'={mp}"), value: rat(1, 12 * phi) }
    }];
    for ell in prime_factors(s.split * s.nonsplit) {
        if ell != 2 && !du.is_multiple_of(ell) {
            terms.push(Term {
                label: format!("(l-1)/2 at multiplicative l={ell}"),
                value: rat((ell as i64 - 1) / 2, 1),
            });
        }
    }
    for ell in prime_factors(s.additive) {
        if ell != 2 && !du.is_multiple_of(ell) {
            let e = ell as i64;
            terms.push(Term { label: format!("l(l-1)/2 at additive l={ell}"), value: rat(e * (e - 1) / 2, 1) });
        }
    }
    for ell in prime_factors(du) {
        if ell != 2 {
            terms.push(Term { label: format!("(l-1)/2 at l={ell} | D_L"), value: rat((ell as i64 - 1) / 2, 1) });
        }
    }
    terms.extend(q_terms(3 * mp));
    Ok(DensityBound::from_terms(terms))
}

fn legendre(a: i64, ell: u64) -> i8 {
    kronecker(a.rem_euclid(ell as i64), ell as i64)
}

const CLASS_LIMIT: u128 = 2_000_000;

/// The CRT family of `m mod M` from the proof of the real-twist theorem.
///
/// Real side: `m` stands for `-3D_L` and `M = 9M'`. Imaginary side: `m` stands
/// for `D_L` and `M = 3M'`, so that the class count is exactly the product in
/// the proof (with `M = 9M'` every class splits into three with the same total).
pub fn enumerate_residue_family(s: ConductorSplit, side: Side) -> Result<ResidueFamily, DensityError> {
    let n = check_decomposition(s)?;
    let mp = m_prime(n, 1);
    let three = match side {
        Side::RealL => 9,
        Side::ImaginaryL => 3,
    };
    let modulus = three * mp;
    // -3m is the unit in front of the residue symbol on the real side.
    let twist = |m: u64| -> i64 {
        match side {
            Side::RealL => -3 * m as i64,
            Side::ImaginaryL => m as i64,
        }
    };

    let mut locals: Vec<(u64, Vec<u64>)> = Vec::new();
    locals.push((
        three,
        match side {
            Side::RealL => vec![3],
            Side::ImaginaryL => vec![2],
        },
    ));
    for (ell, _) in factorize(mp)? {
        let pe = ell.pow(valuation(mp, ell));
        let keep: Box<dyn Fn(u64) -> bool> = if ell == 2 {
            let (s8, ns8) = match side {
                Side::RealL => (1, 5),
                Side::ImaginaryL => (5, 1),
            };
            if s.split.is_multiple_of(2) {
                Box::new(move |m| m % 8 == s8)
            } else if s.nonsplit.is_multiple_of(2) {
                Box::new(move |m| m % 8 == ns8)
            } else {
                Box::new(|m| m % 16 == 8 || m % 16 == 12)
            }
        } else if s.split.is_multiple_of(ell) {
            Box::new(move |m| m % ell != 0 && legendre(twist(m), ell) == -1)
        } else if s.nonsplit.is_multiple_of(ell) {
            Box::new(move |m| m % ell != 0 && legendre(twist(m), ell) == 1)
        } else if ell % 3 == 1 {
            Box::new(move |m| (m % ell != 0 && legendre(twist(m), ell) == -1) || (m % ell == 0 && m % (ell * ell) != 0))
        } else {
            Box::new(move |m| m % ell == 0 && m % (ell * ell) != 0)
        };
        let classes: Vec<u64> = (0..pe).filter(|&m| keep(m)).collect();
        locals.push((pe, classes));
    }

    let total: u128 = locals.iter().map(|(_, c)| c.len() as u128).product();
    if total > CLASS_LIMIT {
        return Err(DensityError::TooMany(total));
    }
    let mut acc: Vec<u64> = vec![0];
    let mut acc_mod = 1u64;
    for (pe, classes) in &locals {
        let mut next = Vec::with_capacity(acc.len() * classes.len());
        for &a in &acc {
            for &c in classes {
                next.push(crt(&[(a as i64, acc_mod), (c as i64, *pe)])?.value());
            }
        }
        acc = next;
        acc_mod *= pe;
    }
    acc.sort_unstable();
    debug_assert_eq!(acc_mod, modulus);
    let provenance = match side {
        Side::RealL => "real-twist theorem, real L: m = -3 D_L mod 9M'",
        Side::ImaginaryL => "real-twist theorem, imaginary L: m = D_L mod 3M'",
    };
    Ok(ResidueFamily { modulus, classes: acc, side, provenance: provenance.into() })
}

/// The auxiliary hypothesis on `(m, M)`; the error names the failing clause.
pub fn hn_hypothesis(m: u64, modulus: u64) -> Result<(), DensityError> {
    let fail = |clause: String| Err(DensityError::Hypothesis { m, modulus, clause });
    if m == 0 || modulus == 0 {
        return fail("m and M must be positive".into());
    }
    for ell in prime_factors(gcd(m, modulus)) {
        if ell != 2 && (!modulus.is_multiple_of(ell * ell) || m.is_multiple_of(ell * ell)) {
            return fail(format!("odd l={ell} divides (m,M), so l^2 must divide M but not m"));
        }
    }
    if modulus.is_multiple_of(2) {
        let a = modulus.is_multiple_of(4) && m % 4 == 1;
        let b = modulus.is_multiple_of(16) && (m % 16 == 8 || m % 16 == 12);
        if !(a || b) {
            return fail("M even requires 4|M and m = 1 mod 4, or 16|M and m = 8, 12 mod 16".into());
        }
    }
    Ok(())
}

fn euler_q(modulus: u64) -> Rational {
    let prod = prime_factors(modulus).into_iter().fold(Rational::one(), |acc, l| acc * q_over(l));
    prod / Rational::from_integer(euler_phi(modulus).into())
}

/// Coefficient of `x/π²` in `|K^±(x, m, M)|`: `3/Φ(M) · Π q/(ℓ+1)`.
pub fn hn_density_constant(m: u64, modulus: u64, _sign: Sign) -> Result<Rational, DensityError> {
    hn_hypothesis(m, modulus)?;
    Ok(euler_q(modulus) * rat(3, 1))
}

/// Lower bound for the proportion of fields in the class with `3 ∤ h`:
/// `5/(6Φ(M))Π` for real fields and `1/(2Φ(M))Π` for imaginary ones.
pub fn taya_bound(m: u64, modulus: u64, sign: Sign) -> Result<Rational, DensityError> {
    hn_hypothesis(m, modulus)?;
    let c = match sign {
        Sign::Plus => rat(5, 6),
        Sign::Minus => rat(1, 2),
    };
    Ok(euler_q(modulus) * c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

/// Why a discriminant was rejected in a scan, or `None` if it passed.
pub fn twist_conditions(s: ConductorSplit, d_l: i64, side: Side) -> Option<String> {
    let l = QuadField::new(d_l).ok()?;
    if (d_l > 0) != (side == Side::RealL) {
        return Some("wrong signature".into());
    }
    if splitting(l, 3) != Splitting::Inert {
        return Some("3 not inert".into());
    }
    for ell in prime_factors(s.split) {
        if splitting(l, ell) != Splitting::Inert {
            return Some(format!("{ell} | N_split not inert"));
        }
    }
    for ell in prime_factors(s.nonsplit) {
        if splitting(l, ell) != Splitting::Split {
            return Some(format!("{ell} | N_nonsplit not split"));
        }
    }
    for ell in prime_factors(s.additive) {
        let ok = match splitting(l, ell) {
            Splitting::Ramified => true,
            Splitting::Inert => ell % 3 != 2,
            Splitting::Split => false,
        };
        if !ok {
            return Some(format!("{ell} | N_add fails the inert/ramified rule"));
        }
    }
    let n = s.split * s.nonsplit * s.additive;
    if n.is_multiple_of(4) && !matches!(d_l.rem_euclid(16), 8 | 12) {
        return Some("4 | N but D_L is not 8 or 12 mod 16".into());
    }
    let h_disc = match side {
        Side::RealL => compose(l, QuadField::new(-3).expect("-3 is fundamental")).ok()?.disc(),
        Side::ImaginaryL => d_l,
    };
    let h = class_number_imag(h_disc).ok()?;
    if h % 3 == 0 {
        return Some(format!("3 | h({h_disc}) = {h}"));
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    pub curve: String,
    pub branch: Side,
    #[serde(rename = "X")]
    pub x: u64,
    #[serde(with = "serde_util::rational")]
    pub bound: Rational,
    pub verified: Vec<i64>,
    pub total: u64,
    #[serde(with = "serde_util::rational")]
    pub empirical: Rational,
    pub decomposition: ConductorSplit,
    pub certification: String,
}

const BLOCK: usize = 64;

/// Scans fundamental `D_L` with `|D_L| ≤ X` on one branch.
pub fn twist_scan(
    e: &CurveQ,
    x: u64,
    side: Side,
    claim: &Reducibility,
    parallel: bool,
) -> Result<ScanReport, DensityError> {
    let certification = match claim {
        Reducibility::Auto if e.has_rational_3_torsion()? => format!("{} has a rational point of order 3", e.label),
        Reducibility::Auto => {
            return Err(HeegnerError::Refused(format!("no certificate that {}[3] is reducible", e.label)).into())
        }
        Reducibility::Asserted(ty) => {
            let r = crate::ellcurve::verify_descent(
                crate::ellcurve::CoefficientSource::Curve(e),
                3,
                ty,
                crate::dirichlet::QuadChar::trivial(),
                crate::heegner::ASSERTION_BOUND,
            )?;
            if !r.passed() || !ty.psi1.is_trivial() || !ty.psi2.is_trivial() {
                return Err(HeegnerError::Refused("asserted type is not a verified (1,1,...) descent".into()).into());
            }
            format!("asserted, checked to {}", crate::heegner::ASSERTION_BOUND)
        }
    };
    let s = e.conductor_split()?;
    let bound = real_twist_bound(s, side)?.value;
    let x_i = x.min(i64::MAX as u64) as i64;
    let ds = match side {
        Side::RealL => fundamentals_in(2, x_i),
        Side::ImaginaryL => {
            let mut v = fundamentals_in(-x_i, -3);
            v.reverse();
            v
        }
    };
    let check = |d: &i64| twist_conditions(s, *d, side).is_none();
    let verified: Vec<i64> = if parallel {
        ds.par_chunks(BLOCK).flat_map_iter(|blk| blk.iter().copied().filter(check).collect::<Vec<_>>()).collect()
    } else {
        ds.iter().copied().filter(check).collect()
    };
    let total = ds.len() as u64;
    let empirical = if total == 0 { Rational::zero() } else { rat(verified.len() as i64, total as i64) };
    Ok(ScanReport {
        curve: e.label.clone(),
        branch: side,
        x,
        bound,
        verified,
        total,
        empirical,
        decomposition: s,
        certification,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellcurve::{builtin_curves, find_curve};

    fn cs(split: u64, nonsplit: u64, additive: u64) -> ConductorSplit {
        ConductorSplit { split, nonsplit, additive }
    }

    #[test]
    fn m_prime_rule() {
        assert_eq!(m_prime(19, 1), 19);
        assert_eq!(m_prime(19, 41 * 41), 19 * 1681);
        assert_eq!(m_prime(38, 1), 152);
        assert_eq!(m_prime(4 * 7, 1), 16 * 7);
        assert_eq!(m_prime(64, 1), 64);
    }

    #[test]
    fn example_bounds() {
        let s = cs(19, 1, 1);
        let r = real_twist_bound(s, Side::RealL).unwrap();
        assert_eq!(r.value, rat(19, 640));
        assert_eq!(r.value, rat(1, 12 * 18) * rat(9, 1) * rat(3, 4) * rat(19, 20));
        assert_eq!(real_twist_bound(s, Side::ImaginaryL).unwrap().value, rat(57, 640));
        assert_eq!(real_twist_bound(cs(1, 1, 1), Side::RealL).unwrap().value, rat(1, 16));
        let a = twist_theorem_bound(s, 41).unwrap().value;
        let b = twist_theorem_bound(s, -7).unwrap().value;
        assert_eq!(a, rat(19, 17920));
        assert_eq!(b, rat(19, 10240));
        assert_eq!(rat(19, 640) + &b, rat(323, 10240));
        assert_eq!(rat(57, 640) + &a, rat(323, 3584));
    }

    #[test]
    fn bound_is_sum_of_taya_bounds_over_family() {
        for (s, side) in [
            (cs(19, 1, 1), Side::RealL),
            (cs(19, 1, 1), Side::ImaginaryL),
            (cs(11, 1, 1), Side::RealL),
            (cs(2, 7, 1), Side::RealL),
            (cs(1, 14, 1), Side::ImaginaryL),
            (cs(1, 1, 25), Side::RealL),
            (cs(1, 1, 49), Side::ImaginaryL),
            (cs(5, 1, 4), Side::RealL),
            (cs(1, 1, 1), Side::ImaginaryL),
        ] {
            let fam = enumerate_residue_family(s, side).unwrap();
            let mut sum = Rational::zero();
            for &m in &fam.classes {
                sum += taya_bound(m, fam.modulus, Sign::Minus).unwrap();
            }
            assert_eq!(sum, real_twist_bound(s, side).unwrap().value, "{s:?} {side}");
        }
    }

    #[test]
    fn family_19a1() {
        let fam = enumerate_residue_family(cs(19, 1, 1), Side::RealL).unwrap();
        assert_eq!(fam.modulus, 171);
        assert_eq!(fam.classes.len(), 9);
        assert!(fam.classes.iter().all(|m| m % 9 == 3));
        // -3·41 mod 171 is one of them.
        assert!(fam.classes.contains(&((-3i64 * 41).rem_euclid(171) as u64)));
        let c = hn_density_constant(fam.classes[0], 171, Sign::Minus).unwrap();
        assert_eq!(c, rat(3, euler_phi(171) as i64) * rat(3, 4) * rat(19, 20));
        assert_eq!(hn_density_constant(1, 1, Sign::Plus).unwrap(), rat(3, 1));
        assert_eq!(taya_bound(1, 1, Sign::Plus).unwrap(), rat(5, 6));
    }

    #[test]
    fn hn_clauses() {
        assert!(hn_hypothesis(3, 9).is_ok());
        assert!(hn_hypothesis(3, 3).is_err());
        assert!(hn_hypothesis(9, 9).is_err());
        assert!(hn_hypothesis(1, 8).is_ok());
        assert!(hn_hypothesis(3, 8).is_err());
        assert!(hn_hypothesis(8, 16).is_ok());
        assert!(hn_hypothesis(8, 8).is_err());
        assert!(hn_hypothesis(1, 2).is_err());
    }

    #[test]
    fn bad_inputs() {
        assert!(real_twist_bound(cs(3, 1, 1), Side::RealL).is_err());
        assert!(real_twist_bound(cs(19, 19, 1), Side::RealL).is_err());
        assert!(real_twist_bound(cs(1, 1, 50), Side::RealL).is_err());
        assert!(twist_theorem_bound(cs(19, 1, 1), 57).is_err());
        assert!(twist_theorem_bound(cs(19, 1, 1), -19).is_err());
    }

    #[test]
    fn scan_small() {
        let e = find_curve(&builtin_curves(), "19a1").unwrap().clone();
        let r = twist_scan(&e, 200, Side::RealL, &Reducibility::Auto, true).unwrap();
        assert!(r.verified.contains(&41));
        let i = twist_scan(&e, 200, Side::ImaginaryL, &Reducibility::Auto, false).unwrap();
        assert!(i.verified.contains(&-7));
        let empty = twist_scan(&e, 4, Side::RealL, &Reducibility::Auto, false).unwrap();
        assert!(empty.verified.is_empty());
        assert_eq!(empty.empirical, Rational::zero());
        let s = serde_json::to_value(&r).unwrap();
        assert_eq!(s["bound"]["num"], 19);
        assert_eq!(s["X"], 200);
        assert_eq!(s["branch"], "real");
    }
}
