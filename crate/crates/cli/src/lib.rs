//! `eisrank` command line. `run` parses argv, dispatches, writes the report in
//! the requested format and returns the process exit code.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use eisrank_core::bernoulli::{b1_teichmuller_mod_p, bernoulli, gen_bernoulli};
use eisrank_core::density::{
    enumerate_residue_family, real_twist_bound, twist_scan, twist_theorem_bound, DensityBound, Side,
};
use eisrank_core::dirichlet::QuadChar;
use eisrank_core::ellcurve::{
    builtin_curves, parse_curve_table, verify_descent, CoefficientSource, ConductorSplit, CurveQ,
};
use eisrank_core::heegner::{bernoulli_side_mod_p, heegner_criterion, Reducibility, RAMANUJAN_ROWS};
use eisrank_core::numkernel::{Rational, Residue};
use eisrank_core::qseries::{eisenstein, level1_cuspform, sigma, tau_sigma_failures, EisensteinType, QExpansion, Ring};
use eisrank_core::quadfield::{class_number_analytic, class_number_imag, is_fundamental, unit_count, QuadField};
use eisrank_core::regression;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const DATA_ENV: &str = "EISRANK_DATA";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Plain,
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "eisrank", version, about = "Eisenstein congruences, Heegner rank criteria and twist densities")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Plain, global = true)]
    pub format: Format,
    /// q-expansion precision (largest exponent kept).
    #[arg(long, default_value_t = 500, global = true)]
    pub prec: usize,
    /// Extra curve table (`label,a1,a2,a3,a4,a6,N` per line). Falls back to $EISRANK_DATA.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// B_n, B_{n,chi}, or B_{1,chi omega^j} mod p.
    #[command(allow_negative_numbers = true)]
    Bernoulli {
        /// Index n (ignored with --omega).
        n: Option<u64>,
        /// Fundamental discriminant of chi.
        #[arg(long)]
        chi: Option<i64>,
        /// Also reduce mod this prime.
        #[arg(long = "mod")]
        modulus: Option<u64>,
        /// Teichmuller exponent j; needs --mod.
        #[arg(long)]
        omega: Option<i64>,
    },
    /// Class numbers of imaginary quadratic fields by form counting.
    #[command(allow_negative_numbers = true)]
    Classnum {
        #[arg(required = true)]
        discs: Vec<i64>,
        /// Compare with the character-sum formula.
        #[arg(long)]
        analytic_check: bool,
    },
    /// Coefficients of E_k^{(psi1,psi2,N+,N-,N0)}.
    #[command(allow_negative_numbers = true)]
    Eisenstein {
        #[arg(long, default_value_t = 1)]
        psi1: i64,
        #[arg(long, default_value_t = 1)]
        psi2: i64,
        #[arg(short, long)]
        k: u64,
        #[arg(long, default_value_t = 1)]
        nplus: u64,
        #[arg(long, default_value_t = 1)]
        nminus: u64,
        #[arg(long, default_value_t = 1)]
        nzero: u64,
        #[arg(long = "mod")]
        modulus: Option<u64>,
    },
    /// The level-one eigenform of weight k (k in 12, 16, 18, 20, 22, 26).
    Cuspform {
        #[arg(short, long)]
        k: u64,
        #[arg(long = "mod")]
        modulus: Option<u64>,
    },
    /// tau(n) = sigma_11(n) mod 691 up to --prec.
    TauCheck,
    /// Eisenstein descent of a curve, checked prime by prime.
    #[command(allow_negative_numbers = true)]
    Descent {
        #[arg(long)]
        curve: String,
        #[arg(long)]
        p: u64,
        /// psi1,psi2,N+,N-,N0
        #[arg(long = "type")]
        ty: String,
        #[arg(long, default_value_t = 1000)]
        bound: u64,
    },
    /// The rank-one criterion for curve (x) psi at p with auxiliary field K.
    #[command(allow_negative_numbers = true)]
    Heegner {
        #[arg(long)]
        curve: String,
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 1)]
        psi: i64,
        #[arg(long = "K")]
        k: i64,
        /// Assert E[p] reducible of this type (psi1,psi2,N+,N-,N0); checked to 1000.
        #[arg(long)]
        assert_type: Option<String>,
    },
    /// The weight-12 Bernoulli table at 691.
    RamanujanTable,
    /// Explicit density lower bounds.
    #[command(allow_negative_numbers = true)]
    DensityBound {
        #[arg(long)]
        curve: Option<String>,
        #[arg(long, default_value_t = 1)]
        split: u64,
        #[arg(long, default_value_t = 1)]
        nonsplit: u64,
        #[arg(long, default_value_t = 1)]
        additive: u64,
        #[arg(long, default_value = "real")]
        side: Side,
        /// D_L for the bound on auxiliary fields K.
        #[arg(long)]
        twist: Option<i64>,
        /// Also list the residue classes.
        #[arg(long)]
        family: bool,
    },
    /// Scan quadratic twists with |D_L| <= X.
    TwistScan {
        #[arg(long)]
        curve: String,
        #[arg(long = "X")]
        x: u64,
        #[arg(long, default_value = "real")]
        branch: Side,
        #[arg(long)]
        serial: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        assert_type: Option<String>,
    },
    /// Every worked number, with a pass/fail table.
    PaperExamples,
}

/// What a command produced, in every format.
struct Report {
    text: String,
    json: Value,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    ok: bool,
}

impl Report {
    fn new(text: String, json: Value, ok: bool) -> Self {
        Report { text, json, header: vec!["key".into(), "value".into()], rows: Vec::new(), ok }
    }

    fn table(mut self, header: &[&str], rows: Vec<Vec<String>>) -> Self {
        self.header = header.iter().map(|s| s.to_string()).collect();
        self.rows = rows;
        self
    }
}

fn to_json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn rat_json(r: &Rational) -> Value {
    to_json(&RatWrap(r.clone()))
}

#[derive(Serialize)]
struct RatWrap(#[serde(with = "eisrank_core::serde_util::rational")] Rational);

fn character(d: i64) -> Result<QuadChar, CliError> {
    QuadChar::new(d).map_err(usage)
}

fn field(d: i64) -> Result<QuadField, CliError> {
    QuadField::new(d).map_err(usage)
}

/// Builtin curves, overridden label by label by the data file if one is given.
pub fn curve_table(data: Option<&PathBuf>) -> Result<Vec<CurveQ>, CliError> {
    let path = data.cloned().or_else(|| std::env::var_os(DATA_ENV).map(PathBuf::from));
    let mut table = builtin_curves();
    if let Some(p) = path {
        let text = std::fs::read_to_string(&p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        let extra = parse_curve_table(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        for c in extra {
            table.retain(|b| b.label != c.label);
            table.push(c);
        }
    }
    Ok(table)
}

fn lookup(table: &[CurveQ], label: &str) -> Result<CurveQ, CliError> {
    table.iter().find(|c| c.label == label).cloned().ok_or_else(|| usage(format!("unknown curve {label:?}")))
}

/// `psi1,psi2,N+,N-,N0` at weight 2.
pub fn parse_type(s: &str) -> Result<EisensteinType, CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        return Err(usage(format!("type {s:?}: expected psi1,psi2,N+,N-,N0")));
    }
    let d = |x: &str| x.parse::<i64>().map_err(|_| usage(format!("bad character {x:?}")));
    let n = |x: &str| x.parse::<u64>().map_err(|_| usage(format!("bad level factor {x:?}")));
    let ty = EisensteinType {
        psi1: character(d(parts[0])?)?,
        psi2: character(d(parts[1])?)?,
        k: 2,
        n_plus: n(parts[2])?,
        n_minus: n(parts[3])?,
        n_zero: n(parts[4])?,
    };
    ty.validate().map_err(usage)?;
    Ok(ty)
}

fn qexp_report(title: String, f: &QExpansion) -> Report {
    let prec = f.prec();
    let coeffs: Vec<String> = (0..=prec).map(|n| f.coeff_string(n).unwrap_or_default()).collect();
    let mut text = format!("{title}\n");
    for (n, c) in coeffs.iter().enumerate() {
        text.push_str(&format!("{n} {c}\n"));
    }
    let json = json!({ "title": title, "ring": f.ring().to_string(), "meta": f.meta(), "coefficients": coeffs });
    let rows = coeffs.iter().enumerate().map(|(n, c)| vec![n.to_string(), c.clone()]).collect();
    Report::new(text, json, true).table(&["n", "a_n"], rows)
}

fn cmd_bernoulli(
    n: Option<u64>,
    chi: Option<i64>,
    modulus: Option<u64>,
    omega: Option<i64>,
) -> Result<Report, CliError> {
    let c = chi.map(character).transpose()?;
    if let Some(j) = omega {
        let p = modulus.ok_or_else(|| usage("--omega needs --mod p"))?;
        let psi = c.unwrap_or_else(QuadChar::trivial);
        let v = b1_teichmuller_mod_p(psi, j, p).map_err(usage)?;
        let text = format!("B_1({psi} omega^{j}) = {} mod {p}\n", v.value());
        let json = json!({ "chi": psi, "omega": j, "mod": p, "residue": v.value() });
        let rows = vec![vec![psi.to_string(), j.to_string(), p.to_string(), v.value().to_string()]];
        return Ok(Report::new(text, json, true).table(&["chi", "omega", "mod", "residue"], rows));
    }
    let n = n.ok_or_else(|| usage("give n, or --omega j --mod p"))?;
    let (name, v) = match c {
        None => (format!("B_{n}"), bernoulli(n)),
        Some(ch) => (format!("B_{{{n},{ch}}}"), gen_bernoulli(ch, n)),
    };
    let residue = match modulus {
        Some(p) => Some(Residue::from_rational(&v, p).map_err(usage)?.value()),
        None => None,
    };
    let mut text = format!("{name} = {v}\n");
    if let (Some(r), Some(p)) = (residue, modulus) {
        text.push_str(&format!("{name} = {r} mod {p}\n"));
    }
    let json = json!({ "n": n, "chi": c.unwrap_or_else(QuadChar::trivial), "value": rat_json(&v), "mod": modulus, "residue": residue });
    let rows = vec![vec![
        n.to_string(),
        c.map(|x| x.to_string()).unwrap_or_default(),
        v.to_string(),
        modulus.map(|x| x.to_string()).unwrap_or_default(),
        residue.map(|x| x.to_string()).unwrap_or_default(),
    ]];
    Ok(Report::new(text, json, true).table(&["n", "chi", "value", "mod", "residue"], rows))
}

#[derive(Serialize)]
struct ClassRow {
    disc: i64,
    h: u64,
    w: u64,
    analytic: Option<u64>,
}

fn cmd_classnum(discs: &[i64], check: bool) -> Result<Report, CliError> {
    let mut rows = Vec::new();
    let mut ok = true;
    for &d in discs {
        if d >= 0 || !is_fundamental(d) {
            return Err(usage(format!("{d} is not a negative fundamental discriminant")));
        }
        let h = class_number_imag(d).map_err(usage)?;
        let analytic = if check { Some(class_number_analytic(d).map_err(usage)?) } else { None };
        ok &= analytic.is_none_or(|a| a == h);
        rows.push(ClassRow { disc: d, h, w: unit_count(d), analytic });
    }
    let mut text = String::new();
    for r in &rows {
        text.push_str(&format!("h({}) = {}", r.disc, r.h));
        if let Some(a) = r.analytic {
            text.push_str(&format!("  analytic {a}{}", if a == r.h { "" } else { "  MISMATCH" }));
        }
        text.push('\n');
    }
    let table = rows
        .iter()
        .map(|r| {
            vec![
                r.disc.to_string(),
                r.h.to_string(),
                r.w.to_string(),
                r.analytic.map(|a| a.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    Ok(Report::new(text, to_json(&rows), ok).table(&["disc", "h", "w", "analytic"], table))
}

fn cmd_descent(table: &[CurveQ], label: &str, p: u64, ty: &str, bound: u64) -> Result<Report, CliError> {
    let e = lookup(table, label)?;
    let ty = parse_type(ty)?;
    let neb = eisrank_core::dirichlet::char_product(ty.psi1, ty.psi2);
    let r = verify_descent(CoefficientSource::Curve(&e), p, &ty, neb, bound).map_err(usage)?;
    let mut text = format!(
        "descent of {label} mod {p}, type ({},{},{},{},{}), primes <= {bound}: {}\n",
        ty.psi1,
        ty.psi2,
        ty.n_plus,
        ty.n_minus,
        ty.n_zero,
        if r.passed() { "holds" } else { "fails" }
    );
    text.push_str(&format!(
        "checked {} primes; constant term product {} ({})\n",
        r.checked_primes.len(),
        r.constant,
        if r.full { "full" } else { "partial" }
    ));
    for f in &r.failures {
        text.push_str(&format!(
            "  l = {}: condition ({}) a_l = {}, expected {} mod {p}\n",
            f.ell, f.condition, f.a_ell, f.expected_mod_p
        ));
    }
    let rows = r
        .failures
        .iter()
        .map(|f| vec![f.ell.to_string(), f.condition.to_string(), f.a_ell.to_string(), f.expected_mod_p.to_string()])
        .collect();
    Ok(Report::new(text, to_json(&r), r.passed()).table(&["ell", "condition", "a_ell", "expected_mod_p"], rows))
}

fn claim(assert_type: Option<&str>) -> Result<Reducibility, CliError> {
    Ok(match assert_type {
        Some(t) => Reducibility::Asserted(parse_type(t)?),
        None => Reducibility::Auto,
    })
}

fn cmd_heegner(
    table: &[CurveQ],
    label: &str,
    p: u64,
    psi: i64,
    k: i64,
    assert_type: Option<&str>,
) -> Result<Report, CliError> {
    let e = lookup(table, label)?;
    let r = heegner_criterion(&e, p, character(psi)?, field(k)?, &claim(assert_type)?);
    let r = match r {
        Ok(r) => r,
        Err(eisrank_core::heegner::HeegnerError::Refused(why)) => {
            let text = format!("refused: {why}\n");
            return Ok(Report::new(text, json!({ "refused": why }), false));
        }
        Err(err) => return Err(usage(err)),
    };
    let mut text = format!(
        "{} = {} (x) {}, p = {}, K = Q(sqrt({}))\n",
        r.curve,
        r.base,
        r.psi,
        r.p,
        match r.k_disc {
            d if d % 4 == 0 => d / 4,
            d => d,
        }
    );
    text.push_str(&format!(
        "N_split = {}, N_nonsplit = {}, N_add = {}; psi0 = {}\n",
        r.split, r.nonsplit, r.additive, r.psi0
    ));
    for c in &r.conditions {
        text.push_str(&format!("  [{}] {}: {}\n", if c.pass { "x" } else { " " }, c.name, c.witness));
    }
    text.push_str(&format!("Xi = {} mod {}\n", r.xi_mod_p, r.p));
    text.push_str(&format!("verdict: {}\n", r.verdict));
    if let Some(s) = r.ranks {
        text.push_str(&format!(
            "rank E(Q) = {}, rank E_K(Q) = {} (root numbers, branch {})\n",
            s.rank_eq, s.rank_ekq, s.branch
        ));
    }
    for n in &r.notes {
        text.push_str(&format!("note: {n}\n"));
    }
    let rows = r.conditions.iter().map(|c| vec![c.name.clone(), c.pass.to_string(), c.witness.clone()]).collect();
    Ok(Report::new(text, to_json(&r), r.passed()).table(&["condition", "pass", "witness"], rows))
}

fn cmd_ramanujan() -> Result<Report, CliError> {
    let printed = [583u64, 126, 583, 176];
    let mut rows = Vec::new();
    let mut out = Vec::new();
    let mut text = String::from("K_psi        D_psi   K            B_6,psi0 * B_1,psi0 eps_K omega^-6 mod 691\n");
    let mut ok = true;
    for (&(d, dk), &want) in RAMANUJAN_ROWS.iter().zip(&printed) {
        let psi = character(d)?;
        let r = bernoulli_side_mod_p(psi, field(dk)?, 12, 691).map_err(usage)?;
        ok &= r.product == want;
        let kpsi = QuadField::new(d).map(|f| f.to_string()).unwrap_or_default();
        let kk = field(dk)?.to_string();
        text.push_str(&format!(
            "{kpsi:<12} {d:<7} {kk:<12} {}{}\n",
            r.product,
            if r.product == want { "" } else { "  (table: different)" }
        ));
        rows.push(vec![
            d.to_string(),
            dk.to_string(),
            r.psi0.disc().to_string(),
            r.b_half.to_string(),
            r.b_one.to_string(),
            r.product.to_string(),
        ]);
        out.push(r);
    }
    Ok(Report::new(text, to_json(&out), ok).table(&["psi", "K", "psi0", "B_6", "B_1", "product"], rows))
}

fn bound_text(title: &str, b: &DensityBound) -> String {
    let mut text = format!("{title}: {}\n", b.value);
    for t in &b.terms {
        text.push_str(&format!("  {} = {}\n", t.label, t.value));
    }
    text
}

#[allow(clippy::too_many_arguments)]
fn cmd_density(
    table: &[CurveQ],
    curve: Option<&str>,
    split: u64,
    nonsplit: u64,
    additive: u64,
    side: Side,
    twist: Option<i64>,
    family: bool,
) -> Result<Report, CliError> {
    let s = match curve {
        Some(l) => lookup(table, l)?.conductor_split().map_err(usage)?,
        None => ConductorSplit { split, nonsplit, additive },
    };
    let (title, b) = match twist {
        Some(d) => (format!("twist bound, D_L = {d}"), twist_theorem_bound(s, d).map_err(usage)?),
        None => (format!("{side} L bound"), real_twist_bound(s, side).map_err(usage)?),
    };
    let mut text = format!("(N_split, N_nonsplit, N_add) = ({}, {}, {})\n", s.split, s.nonsplit, s.additive);
    text.push_str(&bound_text(&title, &b));
    let mut json = json!({ "decomposition": s, "bound": b });
    if family && twist.is_none() {
        let f = enumerate_residue_family(s, side).map_err(usage)?;
        text.push_str(&format!("residue family: M = {}, {} classes\n", f.modulus, f.classes.len()));
        json["family"] = to_json(&f);
    }
    let rows = b.terms.iter().map(|t| vec![t.label.clone(), t.value.to_string()]).collect();
    Ok(Report::new(text, json, true).table(&["term", "value"], rows))
}

fn cmd_scan(
    table: &[CurveQ],
    label: &str,
    x: u64,
    branch: Side,
    serial: bool,
    out: Option<&PathBuf>,
    assert_type: Option<&str>,
) -> Result<Report, CliError> {
    let e = lookup(table, label)?;
    let r = match twist_scan(&e, x, branch, &claim(assert_type)?, !serial) {
        Ok(r) => r,
        Err(eisrank_core::density::DensityError::Heegner(eisrank_core::heegner::HeegnerError::Refused(why))) => {
            return Ok(Report::new(format!("refused: {why}\n"), json!({ "refused": why }), false));
        }
        Err(err) => return Err(usage(err)),
    };
    let json = to_json(&r);
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&json).expect("json") + "\n")?;
    }
    let shown: Vec<String> = r.verified.iter().take(20).map(|d| d.to_string()).collect();
    let text = format!(
        "{label}, {branch} branch, |D_L| <= {x}: {} of {} discriminants pass\nempirical {} against bound {}\nfirst: {}{}\n",
        r.verified.len(),
        r.total,
        r.empirical,
        r.bound,
        shown.join(" "),
        if r.verified.len() > 20 { " ..." } else { "" }
    );
    let rows = r.verified.iter().map(|d| vec![d.to_string()]).collect();
    Ok(Report::new(text, json, true).table(&["D_L"], rows))
}

fn cmd_paper_examples() -> Report {
    let all = regression::run_all();
    let mut text = String::new();
    let mut rows = Vec::new();
    for c in &all {
        text.push_str(&format!("{} [{}] {}\n", if c.passed() { "PASS" } else { "FAIL" }, c.id, c.title));
        for ch in &c.checks {
            let tag = match (ch.gating, ch.pass) {
                (false, _) => "info",
                (true, true) => "ok",
                (true, false) => "FAIL",
            };
            text.push_str(&format!(
                "    {tag:<4} {}{}\n",
                ch.label,
                if ch.detail.is_empty() { String::new() } else { format!(": {}", ch.detail) }
            ));
            rows.push(vec![
                c.id.to_string(),
                ch.label.clone(),
                ch.gating.to_string(),
                ch.pass.to_string(),
                ch.detail.clone(),
            ]);
        }
    }
    let passed = all.iter().filter(|c| c.passed()).count();
    text.push_str(&format!("{passed} of {} criteria pass\n", all.len()));
    let ok = passed == all.len();
    Report::new(text, to_json(&all), ok).table(&["criterion", "check", "gating", "pass", "detail"], rows)
}

fn dispatch(cli: &Cli) -> Result<Report, CliError> {
    let table = || curve_table(cli.data.as_ref());
    match &cli.command {
        Command::Bernoulli { n, chi, modulus, omega } => cmd_bernoulli(*n, *chi, *modulus, *omega),
        Command::Classnum { discs, analytic_check } => cmd_classnum(discs, *analytic_check),
        Command::Eisenstein { psi1, psi2, k, nplus, nminus, nzero, modulus } => {
            let ty = EisensteinType {
                psi1: character(*psi1)?,
                psi2: character(*psi2)?,
                k: *k,
                n_plus: *nplus,
                n_minus: *nminus,
                n_zero: *nzero,
            };
            let ring = modulus.map(Ring::Residue).unwrap_or(Ring::Rational);
            let f = eisenstein(&ty, cli.prec, ring).map_err(usage)?;
            let title = format!(
                "E_{}^({},{},{},{},{}) level {}",
                ty.k,
                ty.psi1,
                ty.psi2,
                ty.n_plus,
                ty.n_minus,
                ty.n_zero,
                ty.level()
            );
            Ok(qexp_report(title, &f))
        }
        Command::Cuspform { k, modulus } => {
            let f = level1_cuspform(*k, cli.prec).map_err(usage)?;
            let f = match modulus {
                Some(m) => f.reduce_mod(*m).map_err(usage)?,
                None => f,
            };
            Ok(qexp_report(format!("level 1 eigenform of weight {k}"), &f))
        }
        Command::TauCheck => {
            let fails = tau_sigma_failures(cli.prec);
            let text = if fails.is_empty() {
                format!("tau(n) = sigma_11(n) mod 691 for 1 <= n <= {}\n", cli.prec)
            } else {
                format!("tau(n) != sigma_11(n) mod 691 at n = {fails:?}\n")
            };
            let json = json!({ "prec": cli.prec, "failures": fails, "sigma_11(2)": sigma(11, 2).to_string() });
            let rows = fails.iter().map(|n| vec![n.to_string()]).collect();
            Ok(Report::new(text, json, fails.is_empty()).table(&["n"], rows))
        }
        Command::Descent { curve, p, ty, bound } => cmd_descent(&table()?, curve, *p, ty, *bound),
        Command::Heegner { curve, p, psi, k, assert_type } => {
            cmd_heegner(&table()?, curve, *p, *psi, *k, assert_type.as_deref())
        }
        Command::RamanujanTable => cmd_ramanujan(),
        Command::DensityBound { curve, split, nonsplit, additive, side, twist, family } => {
            cmd_density(&table()?, curve.as_deref(), *split, *nonsplit, *additive, *side, *twist, *family)
        }
        Command::TwistScan { curve, x, branch, serial, out, assert_type } => {
            cmd_scan(&table()?, curve, *x, *branch, *serial, out.as_ref(), assert_type.as_deref())
        }
        Command::PaperExamples => Ok(cmd_paper_examples()),
    }
}

fn emit(report: &Report, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
    match format {
        Format::Plain => out.write_all(report.text.as_bytes())?,
        Format::Json => {
            out.write_all(serde_json::to_string_pretty(&report.json).expect("json").as_bytes())?;
            out.write_all(b"\n")?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&report.header).map_err(|e| CliError::Io(e.into()))?;
            for r in &report.rows {
                w.write_record(r).map_err(|e| CliError::Io(e.into()))?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Runs one invocation, writing the report to `out` and diagnostics to `err`.
pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match dispatch(&cli).and_then(|r| emit(&r, cli.format, out).map(|_| r.ok)) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAIL,
        Err(CliError::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Io(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAIL
        }
    }
}

pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
