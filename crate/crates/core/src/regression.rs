//! The worked numbers, run end to end. Each criterion is a list of checks;
//! informational checks are reported but do not decide the verdict.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bernoulli::{b1_teichmuller_mod_p, bernoulli, gen_bernoulli, kummer_shortcut_mod_p};
use crate::density::{real_twist_bound, twist_scan, twist_theorem_bound, Side};
use crate::dirichlet::QuadChar;
use crate::ellcurve::{
    builtin_curves, find_curve, hasse_violations, verify_descent, CoefficientSource, ConductorSplit, CurveQ,
};
use crate::heegner::{bernoulli_side_mod_p, heegner_criterion, xi_mod_p, RankSplit, Reducibility, RAMANUJAN_ROWS};
use crate::numkernel::{prime_factors, primes_up_to, rat, Rational, Residue};
use crate::qseries::{
    delta, eisenstein, g4, g6, level1_cuspform, tau_sigma_failures, EisensteinType, Ring, StabData, StabSign,
};
use crate::quadfield::{class_number_analytic, class_number_imag, fundamentals_in, unit_count, QuadField};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub pass: bool,
    pub detail: String,
    pub gating: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: u8,
    pub title: String,
    pub checks: Vec<Check>,
    /// Wall time; left out of serialized output so reports are reproducible.
    #[serde(skip)]
    pub elapsed_ms: u128,
    pub budget_ms: Option<u128>,
}

impl Criterion {
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.gating).all(|c| c.pass) && self.budget_ms.is_none_or(|b| self.elapsed_ms <= b)
    }
}

struct Builder {
    checks: Vec<Check>,
}

impl Builder {
    fn new() -> Self {
        Builder { checks: Vec::new() }
    }

    fn check(&mut self, label: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { label: label.into(), pass, detail: detail.into(), gating: true });
    }

    fn info(&mut self, label: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { label: label.into(), pass, detail: detail.into(), gating: false });
    }

    fn eq<T: PartialEq + std::fmt::Debug>(&mut self, label: &str, got: T, want: T) {
        let pass = got == want;
        self.check(label, pass, format!("got {got:?}, expected {want:?}"));
    }
}

fn timed(id: u8, title: &str, budget_ms: Option<u128>, f: impl FnOnce(&mut Builder)) -> Criterion {
    let t = Instant::now();
    let mut b = Builder::new();
    f(&mut b);
    Criterion { id, title: title.into(), checks: b.checks, elapsed_ms: t.elapsed().as_millis(), budget_ms }
}

fn q(d: i64) -> QuadChar {
    QuadChar::new(d).expect("fundamental")
}

fn curve(label: &str) -> CurveQ {
    find_curve(&builtin_curves(), label).expect("builtin").clone()
}

pub fn bernoulli_exactness() -> Criterion {
    timed(1, "Bernoulli exactness", Some(1000), |b| {
        b.eq("B_18", bernoulli(18), rat(43867, 798));
        let b9 = gen_bernoulli(q(-20), 9);
        b.eq("B_{9,eps-20}", b9.clone(), rat(-5_444_415_378, 1));
        b.eq("B_{9,eps-20} mod 43867", Residue::from_rational(&b9, 43867).map(|r| r.value()).ok(), Some(5726));
    })
}

pub fn teichmuller_value() -> Criterion {
    timed(2, "Teichmuller/Kummer value", Some(5000), |b| {
        let v = b1_teichmuller_mod_p(QuadChar::trivial(), -9, 43867).map(|r| r.value());
        b.eq("B_{1,omega^-9} mod 43867", v.ok(), Some(11867));
        for p in [5u64, 7, 11, 13] {
            let mut bad = Vec::new();
            let mut n = 0;
            for j in 0..(p as i64 - 1) {
                if let Some(k) = kummer_shortcut_mod_p(j, p) {
                    n += 1;
                    if b1_teichmuller_mod_p(QuadChar::trivial(), j, p).ok() != Some(k) {
                        bad.push(j);
                    }
                }
            }
            b.check(
                &format!("Kummer agreement p={p}"),
                bad.is_empty() && n > 0,
                format!("{n} exponents, mismatches {bad:?}"),
            );
        }
    })
}

pub fn xi_factor() -> Criterion {
    timed(3, "Xi factor", None, |b| {
        let v = xi_mod_p(QuadChar::trivial(), 18, 7, 1, 1, 43867).map(|r| r.value());
        b.eq("Xi(1,1,7,1,1) k=18 mod 43867", v.ok(), Some(25644));
    })
}

pub fn eisenstein_congruences() -> Criterion {
    timed(4, "Eisenstein congruences", Some(10_000), |b| {
        let fails = tau_sigma_failures(500);
        b.check("tau = sigma_11 mod 691, n <= 500", fails.is_empty(), format!("failures {fails:?}"));
        let ok = level1_cuspform(18, 200).and_then(|f| {
            let e = eisenstein(
                &EisensteinType::level_one(QuadChar::trivial(), QuadChar::trivial(), 18),
                200,
                Ring::Rational,
            )?;
            f.first_incongruence(&e, 43867, 1)
        });
        match ok {
            Ok(None) => b.check("f_18 = sigma_17 mod 43867, n <= 200", true, "no incongruence"),
            Ok(Some(n)) => {
                b.check("f_18 = sigma_17 mod 43867, n <= 200", false, format!("first incongruence at n = {n}"))
            }
            Err(e) => b.check("f_18 = sigma_17 mod 43867, n <= 200", false, e.to_string()),
        }
    })
}

pub fn ramanujan_table() -> Criterion {
    timed(5, "Ramanujan table", None, |b| {
        let want = [583u64, 126, 583, 176];
        for (&(d, dk), &w) in RAMANUJAN_ROWS.iter().zip(&want) {
            let r = QuadField::new(dk)
                .map_err(|e| e.to_string())
                .and_then(|k| bernoulli_side_mod_p(q(d), k, 12, 691).map_err(|e| e.to_string()));
            match r {
                Ok(r) => b.check(
                    &format!("psi={d}, K={dk}"),
                    r.product == w,
                    format!(
                        "B_6,psi0={} x B_1={} -> {}, expected {w} (psi0 = {})",
                        r.b_half, r.b_one, r.product, r.psi0
                    ),
                ),
                Err(e) => b.check(&format!("psi={d}, K={dk}"), false, e),
            }
        }
    })
}

pub fn pipeline_19a1() -> Criterion {
    timed(6, "19a1 pipeline", None, |b| {
        let e = curve("19a1");
        let ty =
            EisensteinType { n_plus: 19, ..EisensteinType::level_one(QuadChar::trivial(), QuadChar::trivial(), 2) };
        match verify_descent(CoefficientSource::Curve(&e), 3, &ty, QuadChar::trivial(), 200) {
            Ok(r) => b.check(
                "descent (1,1,19,1,1) mod 3, l <= 200",
                r.passed(),
                format!("{} primes, {} failures, constant {}", r.checked_primes.len(), r.failures.len(), r.constant),
            ),
            Err(err) => b.check("descent (1,1,19,1,1) mod 3, l <= 200", false, err.to_string()),
        }

        let k = QuadField::new(-8).expect("fundamental");
        let run = |psi: i64, k: QuadField| heegner_criterion(&e, 3, q(psi), k, &Reducibility::Auto);
        match run(41, k) {
            Ok(r) => {
                b.check("E_L, L=Q(sqrt 41), K=Q(sqrt -2): rank one", r.passed(), r.verdict.to_string());
                b.eq("E_L ranks", r.ranks, Some(RankSplit { rank_eq: 1, rank_ekq: 0, branch: 2 }));
            }
            Err(err) => b.check("E_L, L=Q(sqrt 41), K=Q(sqrt -2): rank one", false, err.to_string()),
        }
        match run(-7, k) {
            Ok(r) => {
                let why: Vec<String> =
                    r.conditions.iter().filter(|c| !c.pass).map(|c| format!("{}: {}", c.name, c.witness)).collect();
                b.check(
                    "E_L', L'=Q(sqrt -7), K=Q(sqrt -2): ranks (0,1)",
                    r.ranks.map(|s| (s.rank_eq, s.rank_ekq)) == Some((0, 1)),
                    format!("{}; {}", r.verdict, why.join("; ")),
                );
            }
            Err(err) => b.check("E_L', L'=Q(sqrt -7), K=Q(sqrt -2): ranks (0,1)", false, err.to_string()),
        }
        if let Ok(r) = run(-7, QuadField::new(-59).expect("fundamental")) {
            b.info(
                "E_L' with K=Q(sqrt -59)",
                r.passed(),
                format!("{}, ranks {:?}", r.verdict, r.ranks.map(|s| (s.rank_eq, s.rank_ekq))),
            );
        }

        // (D, value as tabulated in the worked example)
        let printed = [(-123i64, 4u64), (-328, 2), (-7, 1), (-168, 4)];
        let truth = [(-123i64, 2u64), (-328, 4), (-7, 1), (-168, 4)];
        for &(d, h) in &truth {
            let forms = class_number_imag(d).ok();
            let analytic = class_number_analytic(d).ok();
            b.check(
                &format!("h({d})"),
                forms == Some(h) && analytic == Some(h),
                format!("forms {forms:?}, character sum {analytic:?}, expected {h}"),
            );
        }
        let transposed: Vec<String> = printed
            .iter()
            .zip(&truth)
            .filter(|(a, t)| a.1 != t.1)
            .map(|(a, t)| format!("h({}) printed {} but is {}", a.0, a.1, t.1))
            .collect();
        b.info("tabulated class numbers", transposed.is_empty(), transposed.join("; "));
        let none_div3 = truth.iter().all(|&(d, _)| class_number_imag(d).map(|h| h % 3 != 0).unwrap_or(false));
        b.check("3 divides none of the four class numbers", none_div3, "");
    })
}

pub fn density_fractions() -> Criterion {
    timed(7, "Density fractions", None, |b| {
        let s = ConductorSplit { split: 19, nonsplit: 1, additive: 1 };
        let get = |r: Result<crate::density::DensityBound, _>| r.map(|d| d.value).unwrap_or_else(|_| rat(-1, 1));
        let real = get(real_twist_bound(s, Side::RealL));
        let imag = get(real_twist_bound(s, Side::ImaginaryL));
        let t41 = get(twist_theorem_bound(s, 41));
        let t7 = get(twist_theorem_bound(s, -7));
        b.eq("real_twist_bound real", real.clone(), rat(19, 640));
        b.eq("real_twist_bound imaginary", imag.clone(), rat(57, 640));
        b.eq("twist_theorem_bound D_L=41", t41.clone(), rat(19, 17920));
        b.eq("twist_theorem_bound D_L=-7", t7.clone(), rat(19, 10240));
        b.eq("real total", real + &t7, rat(323, 10240));
        b.eq("imaginary total", imag + &t41, rat(323, 3584));
    })
}

pub fn property_suites() -> Criterion {
    timed(8, "Property suites", None, |b| {
        let mut bad = Vec::new();
        for d in fundamentals_in(-499, -5) {
            let h = class_number_imag(d).unwrap_or(0) as i64;
            let w = unit_count(d) as i64;
            if gen_bernoulli(q(d), 1) != rat(-2 * h, w) {
                bad.push(d);
            }
        }
        b.check("B_{1,eps_D} = -2h/w, -500 < D < -4", bad.is_empty(), format!("failures {bad:?}"));

        let mut bad = Vec::new();
        for n in (2..=60u64).step_by(2) {
            let want: u64 = primes_up_to(n + 1).into_iter().filter(|q| n % (q - 1) == 0).product();
            if bernoulli(n).denom() != &num_bigint::BigInt::from(want) {
                bad.push(n);
            }
        }
        b.check("von Staudt-Clausen, even n <= 60", bad.is_empty(), format!("failures {bad:?}"));

        let sets = [
            (1i64, 1i64, 12u64, 5u64, (1u64, 1u64, 1u64)),
            (1, 1, 4, 7, (11, 1, 1)),
            (1, -3, 3, 5, (1, 1, 1)),
            (-4, 1, 3, 3, (1, 5, 1)),
            (5, 5, 2, 3, (1, 1, 1)),
        ];
        let mut bad = Vec::new();
        for &(a, c, k, p, (np, nm, n0)) in &sets {
            let ty = EisensteinType { n_plus: np, n_minus: nm, n_zero: n0, ..EisensteinType::level_one(q(a), q(c), k) };
            let deep = EisensteinType { n_zero: n0 * p * p, ..ty };
            let ok = (|| -> Result<bool, crate::qseries::QSeriesError> {
                let e = eisenstein(&ty, 300, Ring::Rational)?;
                let lhs = e.theta(1).p_deplete(p);
                let direct = eisenstein(&deep, 300, Ring::Rational)?.theta(1);
                let stab = e.stabilize(p, StabSign::Zero, &StabData::eisenstein(q(a), q(c), k, p))?.theta(1);
                Ok(lhs.coeffs() == direct.coeffs() && lhs.coeffs() == stab.coeffs())
            })();
            if ok != Ok(true) {
                bad.push(format!("({a},{c},k={k},p={p}): {ok:?}"));
            }
        }
        b.check("theta F depleted = theta F^((p^2)0), prec 300, 5 sets", bad.is_empty(), bad.join("; "));

        let comm = (|| -> Result<bool, crate::qseries::QSeriesError> {
            let e = eisenstein(
                &EisensteinType::level_one(QuadChar::trivial(), QuadChar::trivial(), 12),
                150,
                Ring::Rational,
            )?;
            let d5 = StabData::eisenstein(QuadChar::trivial(), QuadChar::trivial(), 12, 5);
            let d7 = StabData::eisenstein(QuadChar::trivial(), QuadChar::trivial(), 12, 7);
            for s1 in [StabSign::Plus, StabSign::Minus, StabSign::Zero] {
                for s2 in [StabSign::Plus, StabSign::Minus, StabSign::Zero] {
                    let x = e.stabilize(5, s1, &d5)?.stabilize(7, s2, &d7)?;
                    let y = e.stabilize(7, s2, &d7)?.stabilize(5, s1, &d5)?;
                    if x != y {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        })();
        b.check("stabilization at 5 and 7 commutes", comm == Ok(true), format!("{comm:?}"));

        let mut bad = Vec::new();
        for label in ["19a1", "19a1.tw41", "19a1.tw-7"] {
            match hasse_violations(&curve(label), 500) {
                Ok(v) if v.is_empty() => {}
                other => bad.push(format!("{label}: {other:?}")),
            }
        }
        match curve("19a1").quadratic_twist(5, None).and_then(|t| hasse_violations(&t, 500)) {
            Ok(v) if v.is_empty() => {}
            other => bad.push(format!("19a1.tw5: {other:?}")),
        }
        b.check("Hasse bound, 19a1 and twists by 41, -7, 5, l <= 500", bad.is_empty(), bad.join("; "));

        let lhs = g4(50).pow(3).and_then(|x| x.sub(&g6(50).pow(2)?));
        let rhs = delta(50).scale(&rat(1728, 1));
        let same = matches!((&lhs, &rhs), (Ok(l), Ok(r)) if l.coeffs() == r.coeffs());
        b.check("G4^3 - G6^2 = 1728 Delta, prec 50", same, "");
    })
}

pub fn scan_19a1(x: u64) -> Criterion {
    timed(9, "twist scan", Some(60_000), |b| {
        let e = curve("19a1");
        let par = twist_scan(&e, x, Side::RealL, &Reducibility::Auto, true);
        let ser = twist_scan(&e, x, Side::RealL, &Reducibility::Auto, false);
        match (par, ser) {
            (Ok(p), Ok(s)) => {
                b.check(
                    "verified list contains 41",
                    p.verified.contains(&41),
                    format!("{} of {} discriminants", p.verified.len(), p.total),
                );
                b.check("parallel = serial", p == s, "");
                b.check(
                    "bound and empirical fraction reported",
                    p.bound == rat(19, 640) && p.empirical > Rational::from_integer(0.into()),
                    format!("bound {}, empirical {}", p.bound, p.empirical),
                );
                let consistent = p.verified.iter().all(|&d| {
                    let l = QuadField::new(d).expect("fundamental");
                    crate::quadfield::splitting(l, 3) == crate::quadfield::Splitting::Inert
                        && prime_factors(19)
                            .iter()
                            .all(|&ell| crate::quadfield::splitting(l, ell) == crate::quadfield::Splitting::Inert)
                });
                b.check("each verified D has 3 and 19 inert", consistent, "");
            }
            (p, s) => b.check("scan ran", false, format!("{:?} / {:?}", p.err(), s.err())),
        }
    })
}

pub fn run_all() -> Vec<Criterion> {
    vec![
        bernoulli_exactness(),
        teichmuller_value(),
        xi_factor(),
        eisenstein_congruences(),
        ramanujan_table(),
        pipeline_19a1(),
        density_fractions(),
        property_suites(),
        scan_19a1(5000),
    ]
}
