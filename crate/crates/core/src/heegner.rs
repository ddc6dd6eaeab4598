//! The rank-one criterion for `E = E_base ⊗ ψ` with reducible `E[p]` of type
//! `ψ ⊕ ψ⁻¹ω`, its Ξ Euler factors, and the root-number rank split.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bernoulli::{b1_teichmuller_mod_p, gen_bernoulli, BernoulliError};
use crate::dirichlet::{char_eval, char_product, psi_zero, CharError, QuadChar};
use crate::ellcurve::{verify_descent, CoefficientSource, CurveError, CurveQ, Reduction};
use crate::numkernel::{factorize, gcd, is_prime, modinv, powmod, prime_factors, NumError, Residue};
use crate::qseries::EisensteinType;
use crate::quadfield::{class_number_imag, heegner_hypothesis, splitting, unit_count, QuadField, Splitting};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HeegnerError {
    #[error("p = {0} must be an odd prime")]
    BadPrime(u64),
    #[error("p = {p} divides N = {n}")]
    PDividesLevel { p: u64, n: u64 },
    #[error("k = {0} must be even and positive")]
    BadWeight(u64),
    #[error("refused: {0}")]
    Refused(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Bernoulli(#[from] BernoulliError),
    #[error(transparent)]
    Char(#[from] CharError),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// `Ξ mod p`: `Π_{N₊}(1-ψ(ℓ)ℓ^{k/2-1}) · Π_{N₋}(1-ψ(ℓ)ℓ^{-k/2}) · Π_{N₀}(both)`.
pub fn xi_mod_p(
    psi: QuadChar,
    k: u64,
    n_plus: u64,
    n_minus: u64,
    n_zero: u64,
    p: u64,
) -> Result<Residue, HeegnerError> {
    if p == 2 || !is_prime(p) {
        return Err(HeegnerError::BadPrime(p));
    }
    if k == 0 || k % 2 == 1 {
        return Err(HeegnerError::BadWeight(k));
    }
    let n = n_plus * n_minus * n_zero;
    if n.is_multiple_of(p) {
        return Err(HeegnerError::PDividesLevel { p, n });
    }
    let half = k / 2;
    let plus = |ell: u64| -> Result<Residue, HeegnerError> {
        let t = char_eval(psi, ell as i64) as i128 * powmod(ell % p, half - 1, p) as i128;
        Ok(Residue::new(1 - t, p)?)
    };
    let minus = |ell: u64| -> Result<Residue, HeegnerError> {
        let inv = modinv(ell % p, p).ok_or(NumError::NotInvertible { value: ell.to_string(), modulus: p })?;
        let t = char_eval(psi, ell as i64) as i128 * powmod(inv, half, p) as i128;
        Ok(Residue::new(1 - t, p)?)
    };
    let mut acc = Residue::new(1, p)?;
    for ell in prime_factors(n_plus) {
        acc = acc * plus(ell)?;
    }
    for ell in prime_factors(n_minus) {
        acc = acc * minus(ell)?;
    }
    for ell in prime_factors(n_zero) {
        acc = acc * plus(ell)? * minus(ell)?;
    }
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub pass: bool,
    pub witness: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "failed", rename_all = "kebab-case")]
pub enum Verdict {
    NonTorsionRank1,
    Inconclusive(Vec<String>),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::NonTorsionRank1 => write!(f, "non-torsion-rank-1"),
            Verdict::Inconclusive(v) => write!(f, "inconclusive({})", v.join(", ")),
        }
    }
}

/// How `E[p]` was shown reducible.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certification {
    /// Rational `p`-torsion on the base curve.
    Proven(String),
    /// Caller assertion, with descent of the given type checked up to a bound.
    CheckedToBound { bound: u64, detail: String },
}

/// What the caller offers about `E_base[p]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Reducibility {
    /// Only accept a proof found by the library.
    Auto,
    /// `E_base[p]` asserted reducible of this type (weight 2).
    Asserted(EisensteinType),
}

pub const ASSERTION_BOUND: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankSplit {
    /// `rank E(Q)`.
    pub rank_eq: u8,
    /// `rank E_K(Q)`, the twist by `ε_K`.
    pub rank_ekq: u8,
    /// 1 for `p ≥ 5`, 2 for a twist of a semistable curve.
    pub branch: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub curve: String,
    pub base: String,
    pub p: u64,
    pub psi: QuadChar,
    pub k_disc: i64,
    pub psi0: QuadChar,
    pub split: u64,
    pub nonsplit: u64,
    pub additive: u64,
    pub certification: Certification,
    pub conditions: Vec<Condition>,
    pub bernoulli_values_mod_p: BTreeMap<String, u64>,
    pub class_numbers: BTreeMap<i64, u64>,
    pub xi_mod_p: u64,
    pub verdict: Verdict,
    pub ranks: Option<RankSplit>,
    pub notes: Vec<String>,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::NonTorsionRank1
    }
}

fn certify(base: &CurveQ, p: u64, claim: &Reducibility) -> Result<Certification, HeegnerError> {
    match claim {
        Reducibility::Auto => {
            if p == 3 && base.has_rational_3_torsion()? {
                Ok(Certification::Proven(format!("{} has a rational point of order 3", base.label)))
            } else {
                Err(HeegnerError::Refused(format!(
                    "no certificate that {}[{p}] is reducible; supply an asserted type",
                    base.label
                )))
            }
        }
        Reducibility::Asserted(ty) => {
            let r = verify_descent(CoefficientSource::Curve(base), p, ty, QuadChar::trivial(), ASSERTION_BOUND)?;
            if r.passed() {
                Ok(Certification::CheckedToBound {
                    bound: ASSERTION_BOUND,
                    detail: format!(
                        "descent of type ({},{},{},{},{}) mod {p}",
                        ty.psi1, ty.psi2, ty.n_plus, ty.n_minus, ty.n_zero
                    ),
                })
            } else {
                let f = &r.failures[0];
                Err(HeegnerError::Refused(format!(
                    "asserted type fails at l = {} (condition {}): a_l = {}",
                    f.ell, f.condition, f.a_ell
                )))
            }
        }
    }
}

// B_1 of an odd quadratic character via -2h/w, with the disc it used.
fn b1_by_class_number(chi: QuadChar) -> Result<(crate::numkernel::Rational, i64, u64), HeegnerError> {
    let d = chi.disc();
    let h = class_number_imag(d).map_err(|e| HeegnerError::Refused(e.to_string()))?;
    let w = unit_count(d) as i64;
    Ok((crate::numkernel::rat(-2 * h as i64, w), d, h))
}

/// Evaluates the rank-one criterion for `E = base ⊗ ψ`.
pub fn heegner_criterion(
    base: &CurveQ,
    p: u64,
    psi: QuadChar,
    k: QuadField,
    claim: &Reducibility,
) -> Result<CriterionReport, HeegnerError> {
    if p == 2 || !is_prime(p) {
        return Err(HeegnerError::BadPrime(p));
    }
    let e = base.quadratic_twist(psi.disc(), None)?;
    let n = e.conductor();
    if n % p == 0 {
        return Err(HeegnerError::PDividesLevel { p, n });
    }
    let certification = certify(base, p, claim)?;

    let mut split = 1;
    let mut nonsplit = 1;
    let mut additive = 1;
    let mut types = Vec::new();
    for (ell, ex) in factorize(n)? {
        let r = e.reduction_type(ell)?;
        match r {
            Reduction::SplitMult => split *= ell,
            Reduction::NonsplitMult => nonsplit *= ell,
            Reduction::Additive => additive *= ell.pow(ex),
        }
        types.push((ell, r));
    }
    let f = psi.conductor();
    if additive % (f * f) != 0 {
        return Err(HeegnerError::Refused(format!("f(psi)^2 = {} does not divide N_add = {additive}", f * f)));
    }

    let mut conditions = Vec::new();
    let mut notes = Vec::new();
    let mut push = |name: &str, pass: bool, witness: String| {
        conditions.push(Condition { name: name.to_string(), pass, witness });
    };

    let psi_p = char_eval(psi, p as i64);
    push("C1 psi(p) != 1", psi_p != 1, format!("psi({p}) = {psi_p}"));
    push("C2 N_split = 1", split == 1, format!("N_split = {split}"));

    let mut c3 = true;
    let mut c3w = Vec::new();
    for &(ell, r) in &types {
        if r != Reduction::Additive {
            continue;
        }
        let v = char_eval(psi, ell as i64);
        let ok = v == 0 || (v != 1 && (ell + 1) % p != 0);
        c3 &= ok;
        c3w.push(format!("l={ell}: psi(l)={v}, l mod p={}", ell % p));
    }
    push("C3 additive primes", c3, if c3w.is_empty() { "N_add = 1".into() } else { c3w.join("; ") });

    let sp = splitting(k, p);
    push("C4 p splits in K", sp == Splitting::Split, format!("{p} is {} in {k}", format!("{sp:?}").to_lowercase()));

    let hh = heegner_hypothesis(k, n);
    let bad: Vec<String> = prime_factors(n)
        .into_iter()
        .filter(|&l| splitting(k, l) != Splitting::Split)
        .map(|l| format!("{l} {:?}", splitting(k, l)).to_lowercase())
        .collect();
    push(
        "C5 Heegner hypothesis",
        hh,
        if hh { format!("every prime of N = {n} splits in {k}") } else { format!("N = {n}: {}", bad.join(", ")) },
    );

    let dk = k.disc();
    push("C6 D_K < -4", dk < -4, format!("D_K = {dk}"));
    if dk % 2 == 0 {
        notes.push(format!(
            "D_K = {dk} is even; the odd-D_K assumption is a computational convenience and is not enforced"
        ));
    }

    let eps_k = k.character();
    let psi0 = psi_zero(psi, eps_k)?;
    let mut bern = BTreeMap::new();
    let mut class_numbers = BTreeMap::new();

    // B_{1,ψ₀ε_K}: ψ₀ even, ε_K odd.
    let chi_a = char_product(psi0, eps_k);
    let (b_a, d_a, h_a) = b1_by_class_number(chi_a)?;
    debug_assert_eq!(b_a, gen_bernoulli(chi_a, 1));
    class_numbers.insert(d_a, h_a);
    let ra = Residue::from_rational(&b_a, p).ok();
    if let Some(r) = ra {
        bern.insert("B_1(psi0 eps_K)".to_string(), r.value());
    }

    // B_{1,ψ₀ω⁻¹}.
    let rb: Option<Residue> = if psi0.conductor() % p == 0 {
        None
    } else if p == 3 {
        let chi_b = char_product(psi0, QuadChar::new(-3)?);
        let via_h = if chi_b.disc() < 0 {
            let (b, d, h) = b1_by_class_number(chi_b)?;
            class_numbers.insert(d, h);
            Residue::from_rational(&b, p).ok()
        } else {
            None
        };
        let via_t = b1_teichmuller_mod_p(psi0, -1, p).ok();
        if via_h.is_some() && via_t.is_some() && via_h != via_t {
            notes.push(format!("class number and Teichmuller routes disagree: {via_h:?} vs {via_t:?}"));
        }
        via_h.or(via_t)
    } else {
        b1_teichmuller_mod_p(psi0, -1, p).ok()
    };
    if let Some(r) = rb {
        bern.insert("B_1(psi0 omega^-1)".to_string(), r.value());
    }
    let c7 = matches!((ra, rb), (Some(a), Some(b)) if !a.is_zero() && !b.is_zero());
    push(
        "C7 p does not divide B_1(psi0 eps_K) B_1(psi0 omega^-1)",
        c7,
        format!(
            "B_1(psi0 eps_K) = {b_a} (h({d_a}) = {h_a}); B_1(psi0 omega^-1) mod {p} = {}",
            rb.map(|r| r.value().to_string()).unwrap_or_else(|| "undefined".into())
        ),
    );

    if psi.is_trivial() {
        notes.push(
            "psi = 1: Xi vanishes for every l || N with a_l = 1 and the Bernoulli side is replaced by (p-1)/p log_p(alpha); \
             only its valuation v_p = v_p(2 h_K) is meaningful here"
                .into(),
        );
    }

    // Ξ at k = 2 from the curve's own decomposition.
    let mut n_plus = 1;
    let mut n_minus = 1;
    for &(ell, r) in &types {
        let a = match r {
            Reduction::SplitMult => 1,
            Reduction::NonsplitMult => -1,
            Reduction::Additive => continue,
        };
        if (a - char_eval(psi, ell as i64) as i64).rem_euclid(p as i64) == 0 {
            n_plus *= ell;
        } else {
            n_minus *= ell;
        }
    }
    let xi = xi_mod_p(psi, 2, n_plus, n_minus, additive, p)?;
    if xi.is_zero() {
        notes.push(format!("Xi(N+={n_plus}, N-={n_minus}, N0={additive}) = 0 mod {p}"));
    }

    let failed: Vec<String> = conditions.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    let verdict = if failed.is_empty() { Verdict::NonTorsionRank1 } else { Verdict::Inconclusive(failed) };
    let ranks = if verdict == Verdict::NonTorsionRank1 {
        match root_number_ranks(base, psi, p, true) {
            Ok(r) => Some(r),
            Err(err) => {
                notes.push(format!("no rank split: {err}"));
                None
            }
        }
    } else {
        None
    };

    Ok(CriterionReport {
        curve: e.label.clone(),
        base: base.label.clone(),
        p,
        psi,
        k_disc: dk,
        psi0,
        split,
        nonsplit,
        additive,
        certification,
        conditions,
        bernoulli_values_mod_p: bern,
        class_numbers,
        xi_mod_p: xi.value(),
        verdict,
        ranks,
        notes,
    })
}

/// `(rank E(Q), rank E_K(Q)) = ((1+ψ(-1))/2, (1-ψ(-1))/2)` for `E = base ⊗ ψ`,
/// when `p ≥ 5` or the base is semistable with conductor prime to `f(ψ)`.
pub fn root_number_ranks(
    base: &CurveQ,
    psi: QuadChar,
    p: u64,
    criterion_passed: bool,
) -> Result<RankSplit, HeegnerError> {
    if !criterion_passed {
        return Err(HeegnerError::Refused("criterion not passed".into()));
    }
    if psi.is_trivial() {
        return Err(HeegnerError::Refused("psi = 1 is excluded (Xi vanishes)".into()));
    }
    let branch = if p >= 5 {
        1
    } else if base.is_semistable() && gcd(psi.conductor(), base.conductor()) == 1 {
        2
    } else {
        return Err(HeegnerError::Refused(
            "p = 3 and the base is not semistable with conductor prime to f(psi)".into(),
        ));
    };
    let even = psi.parity() == 1;
    Ok(RankSplit { rank_eq: even as u8, rank_ekq: (!even) as u8, branch })
}

/// One row of the weight-`k` Bernoulli side `B_{k/2,ψ₀} · B_{1,ψ₀ε_Kω^{-k/2}} mod p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BernoulliSide {
    pub psi: QuadChar,
    pub k_disc: i64,
    pub weight: u64,
    pub p: u64,
    pub psi0: QuadChar,
    pub b_half: u64,
    pub b_one: u64,
    pub product: u64,
    /// Every prime of `p·f(ψ)` splits in `K`.
    pub splits: bool,
}

pub fn bernoulli_side_mod_p(psi: QuadChar, k: QuadField, weight: u64, p: u64) -> Result<BernoulliSide, HeegnerError> {
    if p == 2 || !is_prime(p) {
        return Err(HeegnerError::BadPrime(p));
    }
    if weight < 2 || weight % 2 == 1 {
        return Err(HeegnerError::BadWeight(weight));
    }
    if psi.conductor().is_multiple_of(p) {
        return Err(HeegnerError::PDividesLevel { p, n: psi.conductor() });
    }
    let eps_k = k.character();
    let psi0 = psi_zero(psi, eps_k)?;
    let half = weight / 2;
    let bh = Residue::from_rational(&gen_bernoulli(psi0, half), p)?;
    let b1 = b1_teichmuller_mod_p(char_product(psi0, eps_k), -(half as i64), p)?;
    let splits = std::iter::once(p).chain(prime_factors(psi.conductor())).all(|l| splitting(k, l) == Splitting::Split);
    Ok(BernoulliSide {
        psi,
        k_disc: k.disc(),
        weight,
        p,
        psi0,
        b_half: bh.value(),
        b_one: b1.value(),
        product: (bh * b1).value(),
        splits,
    })
}

/// `(ψ, D_K)` rows of the weight-12 table at 691.
pub const RAMANUJAN_ROWS: [(i64, i64); 4] = [(12, -23), (12, -95), (13, -40), (-7, -40)];
