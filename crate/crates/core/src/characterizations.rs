//! Term-by-term evaluators for the operator-norm characterizations.
//!
//! Each supported inequality family (`thm31` .. `thm71`) has a right-hand
//! side made of finitely many Muckenhoupt-style terms: suprema (or, when
//! q < p, r-integrals) of products of cumulative integrals, tail integrals,
//! and Lebesgue–Stieltjes masses of a suffix-sup envelope. This module
//! computes every term on the grid and reports a named breakdown.
//!
//! Beyond-grid conventions, applied uniformly:
//! * Tail integrals use the exact analytic remainder beyond tMax when the
//!   integrand has a power tag with a convergent tail; a divergent remainder
//!   falls back to the truncated reading with a warning.
//! * Head integrals use exact analytic values from the true origin when the
//!   integrand has a power tag with an integrable head; a divergent head
//!   falls back to the truncated cumulative (zero at the first node) with a
//!   warning.
//! * Totals raised to a positive power follow the same finite-only rule;
//!   totals raised to a negative power (such as (integral of v)^{-1/p}) use
//!   the face value, so a divergent total correctly nullifies the term.
//! * "limit at infinity" factors are read at the last grid node and the
//!   owning term is listed in `boundaryReads`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::calculus::{
    cumulative, cumulative_from_zero, level_function, monotone_masses, suffix_sup, tail_integral,
    total_integral, CumFn, Direction,
};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};
use crate::operators::split_condition_value;
use crate::weightlang::{parse, Expr};
use crate::xreal::{sorted_sum, Case, Exponents, XReal, ZERO};

/// The characterization families the toolkit evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Theorem {
    /// Supremal kernel sup u * cumulative, tested against arbitrary
    /// nonnegative inputs.
    #[serde(rename = "thm31")]
    Thm31,
    /// The b-weighted iterated supremal operator on arbitrary nonnegative
    /// inputs.
    #[serde(rename = "thm32")]
    Thm32,
    /// The dual iterated operator (suffix cumulative inside the supremum).
    #[serde(rename = "thm33")]
    Thm33,
    /// The supremal part on the nonincreasing cone.
    #[serde(rename = "thm41")]
    Thm41,
    /// The averaging part on the nonincreasing cone.
    #[serde(rename = "thm51")]
    Thm51,
    /// The full iterated operator on the nonincreasing cone: supremal-part
    /// terms plus averaging-part terms with the level function.
    #[serde(rename = "thm61")]
    Thm61,
    /// The fractional-maximal-operator specialization of thm61.
    #[serde(rename = "thm71")]
    Thm71,
}

/// Which cone of test functions the left-hand side ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cone {
    Nonnegative,
    Nonincreasing,
}

impl Theorem {
    pub const ALL: [Theorem; 7] = [
        Theorem::Thm31,
        Theorem::Thm32,
        Theorem::Thm33,
        Theorem::Thm41,
        Theorem::Thm51,
        Theorem::Thm61,
        Theorem::Thm71,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Theorem::Thm31 => "thm31",
            Theorem::Thm32 => "thm32",
            Theorem::Thm33 => "thm33",
            Theorem::Thm41 => "thm41",
            Theorem::Thm51 => "thm51",
            Theorem::Thm61 => "thm61",
            Theorem::Thm71 => "thm71",
        }
    }

    pub fn cone(self) -> Cone {
        match self {
            Theorem::Thm31 | Theorem::Thm32 | Theorem::Thm33 => Cone::Nonnegative,
            Theorem::Thm41 | Theorem::Thm51 | Theorem::Thm61 | Theorem::Thm71 => {
                Cone::Nonincreasing
            }
        }
    }

    pub fn needs_b(self) -> bool {
        matches!(
            self,
            Theorem::Thm32 | Theorem::Thm33 | Theorem::Thm51 | Theorem::Thm61
        )
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Theorem> {
        Theorem::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                Error::domain(format!(
                    "unknown theorem {s:?}; expected one of thm31, thm32, thm33, thm41, thm51, thm61, thm71"
                ))
            })
    }
}

/// Raw description of a problem: exponents, grid window, and weight
/// expressions as text.
#[derive(Clone, Debug)]
pub struct SpecInput {
    pub theorem: Theorem,
    pub p: f64,
    pub q: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub n: usize,
    pub u: Option<String>,
    pub v: String,
    pub w: String,
    pub a: Option<String>,
    pub b: Option<String>,
    pub gamma_over_n: Option<f64>,
}

/// A validated, sampled problem ready for evaluation.
///
/// For `thm71` the stored weights are the ones of the reduced `thm61`
/// problem (u = t^{gamma/n}, b = a = 1, w multiplied by t^{-q}); the original
/// request is kept in `input` so rebuilds reproduce the same reduction.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub input: SpecInput,
    pub theorem: Theorem,
    pub exps: Exponents,
    pub grid: Arc<Grid>,
    pub u: GridFn,
    pub v: GridFn,
    pub w: GridFn,
    pub a: GridFn,
    pub b: Option<GridFn>,
    pub v_expr: Expr,
    pub w_expr: Expr,
    pub gamma_over_n: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Term {
    pub name: String,
    pub value: XReal,
    #[serde(rename = "boundaryRead")]
    pub boundary_read: bool,
}

/// Certification summary attached by the oracle: its best lower bound and
/// the ratio lower/total.
#[derive(Clone, Debug, Serialize)]
pub struct OracleBlock {
    pub lower: XReal,
    pub band: XReal,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CharReport {
    pub schema_version: u32,
    pub theorem: Theorem,
    pub case: String,
    pub exponents: Exponents,
    pub terms: Vec<Term>,
    pub total: XReal,
    pub sum_of_terms: XReal,
    pub boundary_reads: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleBlock>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl ProblemSpec {
    pub fn build(input: SpecInput) -> Result<ProblemSpec> {
        let exps = Exponents::new(input.p, input.q)?;
        let mut problems = Vec::new();
        if !(input.t_min.is_finite() && input.t_max.is_finite() && 0.0 < input.t_min) {
            problems.push(format!(
                "grid window [{}, {}] must be finite with tMin > 0",
                input.t_min, input.t_max
            ));
        } else if input.t_min >= input.t_max {
            problems.push(format!(
                "grid window [{}, {}] must satisfy tMin < tMax",
                input.t_min, input.t_max
            ));
        }
        match input.theorem {
            Theorem::Thm71 => {
                if input.u.is_some() {
                    problems.push("thm71 derives u = t^(gamma/n) internally; remove weights.u".into());
                }
                if input.a.is_some() {
                    problems.push("thm71 fixes a = 1 internally; remove weights.a".into());
                }
                if input.b.is_some() {
                    problems.push("thm71 fixes b = 1 internally; remove weights.b".into());
                }
                match input.gamma_over_n {
                    None => problems.push("thm71 requires gamma_over_n in (0, 1)".into()),
                    Some(g) if !(g > 0.0 && g < 1.0) => {
                        problems.push(format!("gamma_over_n = {g} must lie in (0, 1)"))
                    }
                    _ => {}
                }
            }
            t => {
                if input.u.is_none() {
                    problems.push(format!("{t} requires weights.u"));
                }
                if t.needs_b() && input.b.is_none() {
                    problems.push(format!("{t} requires weights.b"));
                }
                if !t.needs_b() && input.b.is_some() {
                    problems.push(format!("{t} does not use weights.b; remove it"));
                }
                if input.gamma_over_n.is_some() {
                    problems.push(format!("{t} does not use gamma_over_n; remove it"));
                }
            }
        }
        if !problems.is_empty() {
            return Err(Error::InvalidSpec(problems));
        }

        if input.theorem == Theorem::Thm71 {
            let gn = input.gamma_over_n.expect("validated above");
            let delegated = SpecInput {
                theorem: Theorem::Thm61,
                u: Some(format!("t^{gn}")),
                a: Some("1".into()),
                b: Some("1".into()),
                w: format!("t^{} * ({})", -input.q, input.w),
                gamma_over_n: None,
                ..input.clone()
            };
            let inner = ProblemSpec::build(delegated)?;
            return Ok(ProblemSpec {
                theorem: Theorem::Thm71,
                gamma_over_n: Some(gn),
                input,
                ..inner
            });
        }

        let theorem = input.theorem;
        let u_expr = parse(input.u.as_deref().expect("validated above"))?;
        let v_expr = parse(&input.v)?;
        let w_expr = parse(&input.w)?;
        let a_expr = parse(input.a.as_deref().unwrap_or("1"))?;
        let b_expr = match &input.b {
            Some(src) => Some(parse(src)?),
            None => None,
        };

        let mut breaks = Vec::new();
        for e in [&u_expr, &v_expr, &w_expr, &a_expr]
            .into_iter()
            .chain(b_expr.iter())
        {
            breaks.extend(e.jump_points());
        }
        let grid = Grid::log_uniform(input.t_min, input.t_max, input.n)?.with_breakpoints(&breaks)?;

        let u = u_expr.sample(&grid)?;
        let v = v_expr.sample(&grid)?;
        let w = w_expr.sample(&grid)?;
        let a = a_expr.sample(&grid)?;
        let b = match &b_expr {
            Some(e) => Some(e.sample(&grid)?),
            None => None,
        };

        let mut problems = Vec::new();
        check_positive_finite(&v, "v", &mut problems);
        check_finite_nonneg(&w, "w", &mut problems);
        check_finite_nonneg(&a, "a", &mut problems);
        check_finite_nonneg(&u, "u", &mut problems);
        if let Some(b) = &b {
            check_positive_finite(b, "b", &mut problems);
        }
        if !problems.is_empty() {
            return Err(Error::InvalidSpec(problems));
        }

        if theorem.needs_b() {
            let b = b.as_ref().expect("checked above");
            if !has_integrable_power_head(b) {
                problems.push(
                    "b must have an exact power head c*t^e with c > 0 and e > -1 so that \
                     B(t) = integral of b over (0, t) is positive and finite on the grid"
                        .into(),
                );
            }
        }
        if matches!(theorem, Theorem::Thm41 | Theorem::Thm51 | Theorem::Thm61)
            && !has_integrable_power_head(&v)
        {
            problems.push(
                "v must have an exact power head c*t^e with c > 0 and e > -1 so that \
                 V(t) = integral of v over (0, t) is positive and finite on the grid"
                    .into(),
            );
        }
        if theorem == Theorem::Thm33 && problems.is_empty() {
            let b = b.as_ref().expect("checked above");
            let m = b.powf(exps.p_prime).mul(&v.powf(1.0 - exps.p_prime))?;
            let (tm, known) = tail_integral(&m);
            if !known || tm.vals().iter().any(|x| !x.is_finite() || x.is_zero()) {
                problems.push(
                    "the dual tail integral of b^(p') * v^(1-p') over (x, inf) must be finite \
                     and positive for every x, with an exact power tail; adjust b, v, or p"
                        .into(),
                );
            }
        }
        if !problems.is_empty() {
            return Err(Error::InvalidSpec(problems));
        }

        Ok(ProblemSpec {
            input,
            theorem,
            exps,
            grid,
            u,
            v,
            w,
            a,
            b,
            v_expr,
            w_expr,
            gamma_over_n: None,
        })
    }

    /// Rebuild the same problem with a different truncation point.
    pub fn with_t_max(&self, t_max: f64) -> Result<ProblemSpec> {
        let mut input = self.input.clone();
        input.t_max = t_max;
        ProblemSpec::build(input)
    }

    /// Rebuild the same problem with a different node count.
    pub fn with_n(&self, n: usize) -> Result<ProblemSpec> {
        let mut input = self.input.clone();
        input.n = n;
        ProblemSpec::build(input)
    }

    /// Evaluate the certificate terms, including the truncation-sensitivity
    /// field (the relative change of the total under tMax -> 10 * tMax).
    pub fn evaluate(&self) -> Result<CharReport> {
        let mut report = self.evaluate_once()?;
        if let Ok(wider) = self.with_t_max(self.input.t_max * 10.0) {
            if let Ok(wider_report) = wider.evaluate_once() {
                report.truncation_delta = rel_delta(report.total, wider_report.total);
            }
        }
        Ok(report)
    }

    /// Evaluate the certificate terms on this grid alone.
    pub fn evaluate_once(&self) -> Result<CharReport> {
        let mut warnings = Vec::new();
        let mut notes = Vec::new();
        let exps = &self.exps;
        let p_prime = exps.p_prime;

        let terms = match self.theorem {
            Theorem::Thm31 => {
                let dens = self.v.powf(1.0 - p_prime);
                five_terms("", &dens, &self.u, &self.a, &self.w, exps, &mut warnings, &mut notes)?
            }
            Theorem::Thm32 => {
                let b = self.b.as_ref().expect("validated");
                let (big_b, _) = cumulative_from_zero(b);
                let dens = b.powf(p_prime).mul(&self.v.powf(1.0 - p_prime))?;
                let k0 = self.u.div(&big_b)?;
                five_terms("", &dens, &k0, &self.a, &self.w, exps, &mut warnings, &mut notes)?
            }
            Theorem::Thm33 => {
                let b = self.b.as_ref().expect("validated");
                let (big_b, _) = cumulative_from_zero(b);
                let m = b.powf(p_prime).mul(&self.v.powf(1.0 - p_prime))?;
                let (tm, _) = tail_integral(&m);
                // psi = TM^(-p'/(p'+1)) * m integrates to (p'+1) * TM^(1/(p'+1));
                // the substituted density is Psi^(-p') * psi.
                let psi = tm.powf(-p_prime / (p_prime + 1.0)).mul(&m)?;
                let big_psi = tm.powf(1.0 / (p_prime + 1.0));
                let dens = tm.powf(-2.0 * p_prime / (p_prime + 1.0)).mul(&m)?;
                let k0 = self.u.div(&big_b)?.mul(&big_psi.powf(2.0))?;
                let mut terms = five_terms(
                    "", &dens, &k0, &self.a, &self.w, exps, &mut warnings, &mut notes,
                )?;
                // Sixth term: (integral of psi)^(-1/p) * (integral of CK^q w)^(1/q),
                // where CK is the cumulative of the enveloped kernel times a.
                let sk = suffix_sup(&k0);
                let ska = sk.mul(&self.a)?;
                let (ck, _) = cum_best(&ska, &mut warnings, "the kernel cumulative");
                let ckqw = ck.powf(exps.q).mul(&self.w)?;
                let ckqw_total = total_capped(&ckqw, &mut warnings, "the full kernel Cesaro mass");
                let psi_total = total_integral(&psi).0;
                terms.push(Term {
                    name: "term6".into(),
                    value: psi_total.powf(-1.0 / exps.p) * ckqw_total.powf(1.0 / exps.q),
                    boundary_read: false,
                });
                terms
            }
            Theorem::Thm41 => {
                let (big_v, _) = cumulative_from_zero(&self.v);
                let dens = big_v.powf(p_prime).mul(&self.v)?;
                let k0 = self.u.mul(&big_v.powf(-2.0))?;
                let terms = five_terms(
                    "", &dens, &k0, &self.a, &self.w, exps, &mut warnings, &mut notes,
                )?;
                if exps.case() == Case::II {
                    push_unique(
                        &mut notes,
                        "case (ii) third term uses A(x)^q w(x) inside the outer integral \
                         (the x^q w(x) variant of the display is read as A(x)^q w(x))"
                            .into(),
                    );
                }
                terms
            }
            Theorem::Thm51 => averaging_terms(
                "", &self.u, self.b.as_ref().expect("validated"), self, &mut warnings, &mut notes,
            )?,
            Theorem::Thm61 | Theorem::Thm71 => {
                let b = self.b.as_ref().expect("validated");
                let (big_b, _) = cumulative_from_zero(b);
                let (big_v, _) = cumulative_from_zero(&self.v);
                let dens = big_v.powf(p_prime).mul(&self.v)?;
                let k0 = self.u.mul(&big_v.powf(-2.0))?;
                let mut terms = five_terms(
                    "sup.", &dens, &k0, &self.a, &self.w, exps, &mut warnings, &mut notes,
                )?;
                if exps.case() == Case::II {
                    push_unique(
                        &mut notes,
                        "case (ii) sup.term3 uses A(x)^q w(x) inside the outer integral \
                         (the x^q w(x) variant of the display is read as A(x)^q w(x))"
                            .into(),
                    );
                }
                let ubar = level_function(&self.u, &big_b)?;
                terms.extend(averaging_terms(
                    "avg.", &ubar, b, self, &mut warnings, &mut notes,
                )?);
                let split = split_condition_value(&self.u, b)?;
                if !split.is_finite() || split.raw() > 100.0 {
                    warnings.push(format!(
                        "splitting diagnostic sup u/B * integral of b/u is large ({}); \
                         the combined certificate may be loose",
                        split
                    ));
                }
                if self.theorem == Theorem::Thm71 {
                    push_unique(
                        &mut notes,
                        "evaluated through the thm61 reduction with u = t^(gamma/n), \
                         b = 1, a = 1, and outer weight t^(-q) * w"
                            .into(),
                    );
                }
                terms
            }
        };

        let total = terms
            .iter()
            .fold(ZERO, |acc, t| acc.max(t.value));
        let sum_of_terms = sorted_sum(terms.iter().map(|t| t.value).collect());
        let boundary_reads = terms
            .iter()
            .filter(|t| t.boundary_read)
            .map(|t| t.name.clone())
            .collect();
        Ok(CharReport {
            schema_version: 1,
            theorem: self.theorem,
            case: exps.case().to_string(),
            exponents: *exps,
            terms,
            total,
            sum_of_terms,
            boundary_reads,
            truncation_delta: None,
            oracle: None,
            warnings,
            notes,
        })
    }
}

fn check_positive_finite(f: &GridFn, name: &str, problems: &mut Vec<String>) {
    for (i, x) in f.vals().iter().chain(f.lefts().iter()).enumerate() {
        if !x.is_finite() || x.is_zero() {
            let node = i % f.len();
            problems.push(format!(
                "{name} must be positive and finite on the grid; it is {x} near node {node}"
            ));
            return;
        }
    }
}

fn check_finite_nonneg(f: &GridFn, name: &str, problems: &mut Vec<String>) {
    for (i, x) in f.vals().iter().chain(f.lefts().iter()).enumerate() {
        if !x.is_finite() {
            let node = i % f.len();
            problems.push(format!(
                "{name} must be finite on the grid; it is {x} near node {node}"
            ));
            return;
        }
    }
    if f.vals().iter().all(|x| x.is_zero()) {
        problems.push(format!("{name} vanishes identically on the grid"));
    }
}

fn has_integrable_power_head(f: &GridFn) -> bool {
    match f.tag() {
        Some(tag) => tag.lo == 0.0 && tag.coef > 0.0 && tag.exponent > -1.0,
        None => false,
    }
}

fn rel_delta(base: XReal, wider: XReal) -> Option<f64> {
    if base.is_zero() && wider.is_zero() {
        return Some(0.0);
    }
    if base.is_finite() && !base.is_zero() && wider.is_finite() {
        Some(((wider.raw() - base.raw()) / base.raw()).abs())
    } else {
        None
    }
}

fn push_unique(list: &mut Vec<String>, msg: String) {
    if !list.contains(&msg) {
        list.push(msg);
    }
}

fn avg(a: XReal, b: XReal) -> XReal {
    (a + b) * XReal::nn(0.5)
}

/// Cumulative from the origin when the head is analytically integrable;
/// otherwise the truncated cumulative, with a warning on a divergent head.
fn cum_best(f: &GridFn, warnings: &mut Vec<String>, what: &str) -> (CumFn, bool) {
    let (c, from_zero) = cumulative_from_zero(f);
    if from_zero && c.vals().iter().any(|x| x.is_infinite()) {
        push_unique(
            warnings,
            format!("{what} diverges at the origin; using the truncated reading from tMin"),
        );
        (cumulative(f), false)
    } else {
        (c, from_zero)
    }
}

/// Total over (0, inf) for quantities raised to positive powers: divergent
/// analytic completions fall back to the truncated grid total.
fn total_capped(f: &GridFn, warnings: &mut Vec<String>, what: &str) -> XReal {
    let (val, _, _) = total_integral(f);
    if val.is_infinite() {
        push_unique(
            warnings,
            format!("{what} diverges; using the truncated grid total"),
        );
        sorted_sum(f.cell_masses())
    } else {
        val
    }
}

/// One normalized factor of an r-integral: node values, left limits, and the
/// exponent it carries inside the integrand.
struct Factor<'a> {
    vals: &'a [XReal],
    lefts: &'a [XReal],
    exp: f64,
}

impl<'a> Factor<'a> {
    fn smooth(vals: &'a [XReal], exp: f64) -> Factor<'a> {
        Factor { vals, lefts: vals, exp }
    }

    fn of(f: &'a GridFn, exp: f64) -> Factor<'a> {
        Factor { vals: f.vals(), lefts: f.lefts(), exp }
    }
}

/// (integral of the product of factor^exp)^(1/r), computed with per-factor
/// max normalization so large r (q close to p) cannot overflow: the
/// normalized integrand stays in [0, 1] and the scale is restored outside
/// the root.
fn r_integral(factors: &[Factor<'_>], r: f64, widths: &[f64]) -> XReal {
    let mut scale = XReal::nn(1.0);
    let mut maxima = Vec::with_capacity(factors.len());
    for f in factors {
        let mut m = ZERO;
        for x in f.vals.iter().chain(f.lefts.iter()) {
            m = m.max(*x);
        }
        if m.is_zero() {
            return ZERO;
        }
        if m.is_infinite() {
            return crate::xreal::INF;
        }
        scale = scale * m.powf(f.exp / r);
        maxima.push(m);
    }
    let mut parts = Vec::with_capacity(widths.len());
    for (k, &h) in widths.iter().enumerate() {
        let mut right = XReal::nn(1.0);
        let mut left = XReal::nn(1.0);
        for (f, m) in factors.iter().zip(&maxima) {
            right = right * (f.vals[k] / *m).powf(f.exp);
            left = left * (f.lefts[k + 1] / *m).powf(f.exp);
        }
        parts.push(avg(right, left) * XReal::nn(h));
    }
    scale * sorted_sum(parts).powf(1.0 / r)
}

/// Shared arrays for the five-term certificate built from a density, a
/// kernel weight, the inner averaging weight a, and the outer weight w.
struct Engine {
    inner1: Vec<XReal>,
    tail2: Vec<XReal>,
    suffix_plain: Vec<XReal>,
    prefix_a: Vec<XReal>,
    vpc: CumFn,
    tw: GridFn,
    caqw: CumFn,
    aa: CumFn,
    aqw_total: XReal,
    phi_last: XReal,
}

#[allow(clippy::too_many_arguments)]
fn build_engine(
    dens: &GridFn,
    k0: &GridFn,
    a: &GridFn,
    w: &GridFn,
    exps: &Exponents,
    warnings: &mut Vec<String>,
    notes: &mut Vec<String>,
) -> Result<Engine> {
    let grid = dens.grid();
    let n = dens.len();
    let widths = grid.cells();
    let pp = exps.p_prime;
    let q = exps.q;

    let sk = suffix_sup(k0);
    let ska = sk.mul(a)?;
    let (ck, ck_from_zero) = cum_best(&ska, warnings, "the kernel cumulative");
    let (vpc, _) = cum_best(dens, warnings, "the cumulative of the dual density");
    let (tw, tw_known) = tail_integral(w);
    if !tw_known {
        push_unique(
            warnings,
            "the tail of w beyond tMax has no finite analytic completion; using the \
             truncated reading"
                .into(),
        );
    }
    let (aa, _) = cum_best(a, warnings, "the cumulative of a");
    let aqw = aa.powf(q).mul(w)?;
    let (caqw, _) = cum_best(&aqw, warnings, "the cumulative of A^q w");
    let aqw_total = total_capped(&aqw, warnings, "the total of A^q w");

    // Envelope measure: Phi(t) = sup over tau >= t of k0(tau)^p' * vpc(tau).
    let phi_raw = k0.powf(pp).mul(&vpc)?;
    let phi = suffix_sup(&phi_raw);
    let (atoms, drops) = monotone_masses(&phi, Direction::NonIncreasing)?;
    let mut suffix_plain = vec![ZERO; n];
    suffix_plain[n - 1] = atoms[n - 1];
    for i in (0..n - 1).rev() {
        suffix_plain[i] = suffix_plain[i + 1] + atoms[i] + drops[i];
    }
    let apow: Vec<XReal> = aa.vals().iter().map(|x| x.powf(pp)).collect();
    let mut prefix_a = vec![ZERO; n];
    for i in 1..n {
        let cell = avg(apow[i - 1], apow[i]) * drops[i - 1];
        prefix_a[i] = prefix_a[i - 1] + cell + apow[i] * atoms[i];
    }
    let phi_last = phi.value(n - 1);

    // inner1[i] = integral over (0, x_i) of dens(x) * (CK(x_i) - CK(x))^p'.
    let head_mass = dens
        .tag()
        .map(|t| t.integral(0.0, grid.t_min()))
        .filter(|m| m.is_finite() && ck_from_zero);
    if ck_from_zero && head_mass.is_none() {
        push_unique(
            warnings,
            "the head of the first certificate integral below tMin is not completed \
             (the density lacks a finite power head)"
                .into(),
        );
    }
    let mut inner1 = vec![ZERO; n];
    for i in 0..n {
        let cki = ck.value(i);
        let mut parts = Vec::with_capacity(i + 1);
        if let Some(hm) = head_mass {
            let far = cki.powf(pp);
            let near = cki.saturating_sub(ck.value(0)).powf(pp);
            parts.push(hm * avg(far, near));
        }
        for k in 0..i {
            let right = dens.value(k) * cki.saturating_sub(ck.value(k)).powf(pp);
            let left = dens.left(k + 1) * cki.saturating_sub(ck.left(k + 1)).powf(pp);
            parts.push(avg(right, left) * XReal::nn(widths[k]));
        }
        inner1[i] = sorted_sum(parts);
    }

    // tail2[i] = integral over (x_i, inf) of (CK(y) - CK(x_i))^q w(y), with a
    // finite beyond-grid completion that reads CK in place of the difference.
    let completion = ck
        .powf(q)
        .mul(w)
        .ok()
        .and_then(|g| g.tag())
        .map(|t| t.integral(grid.t_max(), f64::INFINITY))
        .filter(|x| x.is_finite());
    if let Some(c) = completion {
        if !c.is_zero() {
            push_unique(
                notes,
                "the beyond-grid completion of the second term reads CK(y)^q in place of \
                 (CK(y) - CK(t))^q (an upper reading)"
                    .into(),
            );
        }
    }
    let mut tail2 = vec![ZERO; n];
    for i in 0..n {
        let cki = ck.value(i);
        let mut parts = Vec::with_capacity(n - i);
        for k in i..n - 1 {
            let right = w.value(k) * ck.value(k).saturating_sub(cki).powf(q);
            let left = w.left(k + 1) * ck.left(k + 1).saturating_sub(cki).powf(q);
            parts.push(avg(right, left) * XReal::nn(widths[k]));
        }
        if let Some(c) = completion {
            parts.push(c);
        }
        tail2[i] = sorted_sum(parts);
    }

    Ok(Engine {
        inner1,
        tail2,
        suffix_plain,
        prefix_a,
        vpc,
        tw,
        caqw,
        aa,
        aqw_total,
        phi_last,
    })
}

#[allow(clippy::too_many_arguments)]
fn five_terms(
    prefix: &str,
    dens: &GridFn,
    k0: &GridFn,
    a: &GridFn,
    w: &GridFn,
    exps: &Exponents,
    warnings: &mut Vec<String>,
    notes: &mut Vec<String>,
) -> Result<Vec<Term>> {
    let eng = build_engine(dens, k0, a, w, exps, warnings, notes)?;
    let n = dens.len();
    let widths = dens.grid().cells();
    let pp = exps.p_prime;
    let q = exps.q;
    let name = |i: usize| format!("{prefix}term{i}");
    let term = |i: usize, value: XReal| Term {
        name: name(i),
        value,
        boundary_read: i == 5,
    };

    let term5 = eng.aqw_total.powf(1.0 / q) * eng.phi_last.powf(1.0 / pp);

    let values = match exps.case() {
        Case::I => {
            let mut t1 = ZERO;
            let mut t2 = ZERO;
            let mut t3 = ZERO;
            let mut t4 = ZERO;
            for i in 0..n {
                let twq = eng.tw.value(i).powf(1.0 / q);
                t1 = t1.max(eng.inner1[i].powf(1.0 / pp) * twq);
                t2 = t2.max(eng.vpc.value(i).powf(1.0 / pp) * eng.tail2[i].powf(1.0 / q));
                t3 = t3.max(eng.suffix_plain[i].powf(1.0 / pp) * eng.caqw.value(i).powf(1.0 / q));
                t4 = t4.max(eng.prefix_a[i].powf(1.0 / pp) * twq);
            }
            vec![t1, t2, t3, t4]
        }
        Case::II => {
            let r = exps.r.expect("case ii has r");
            push_unique(
                notes,
                format!(
                    "case (ii) {} reads the untied tail variable in the display as the \
                     outer variable (z := t)",
                    name(2)
                ),
            );
            let g1 = r_integral(
                &[
                    Factor::smooth(eng.vpc.vals(), r / exps.q_prime),
                    Factor::of(dens, 1.0),
                    Factor::smooth(&eng.tail2, r / q),
                ],
                r,
                widths,
            );
            let g2 = r_integral(
                &[
                    Factor::smooth(&eng.inner1, r / pp),
                    Factor::smooth(eng.tw.vals(), r / exps.p),
                    Factor::of(w, 1.0),
                ],
                r,
                widths,
            );
            let g3 = r_integral(
                &[
                    Factor::smooth(&eng.suffix_plain, r / pp),
                    Factor::smooth(eng.caqw.vals(), r / exps.p),
                    Factor::smooth(eng.aa.vals(), q),
                    Factor::of(w, 1.0),
                ],
                r,
                widths,
            );
            let g4 = r_integral(
                &[
                    Factor::smooth(&eng.prefix_a, r / pp),
                    Factor::smooth(eng.tw.vals(), r / exps.p),
                    Factor::of(w, 1.0),
                ],
                r,
                widths,
            );
            vec![g1, g2, g3, g4]
        }
    };

    let mut terms: Vec<Term> = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| term(i + 1, v))
        .collect();
    terms.push(term(5, term5));
    Ok(terms)
}

/// The averaging-part certificate: five Muckenhoupt-style terms for the
/// b-weighted Hardy average against the nonincreasing cone.
fn averaging_terms(
    prefix: &str,
    u: &GridFn,
    b: &GridFn,
    spec: &ProblemSpec,
    warnings: &mut Vec<String>,
    notes: &mut Vec<String>,
) -> Result<Vec<Term>> {
    let exps = &spec.exps;
    let pp = exps.p_prime;
    let p = exps.p;
    let q = exps.q;
    let grid = spec.grid.clone();
    let n = grid.len();
    let widths = grid.cells();
    let name = |i: usize| format!("{prefix}term{i}");

    let (big_b, _) = cumulative_from_zero(b);
    let (big_v, _) = cumulative_from_zero(&spec.v);
    let au = spec.a.mul(u)?;
    let (cau, _) = cum_best(&au, warnings, "the cumulative of a*u");
    let auqw = cau.powf(q).mul(&spec.w)?;
    let (cauw, _) = cum_best(&auqw, warnings, "the cumulative of (AU)^q w");
    let cauw_total = total_capped(&auqw, warnings, "the total of (AU)^q w");
    // Face value on purpose: a divergent integral of v nullifies term 5.
    let v_total = total_integral(&spec.v).0;
    let (tw, _) = tail_integral(&spec.w);
    let vdens = big_v.powf(-pp).mul(&spec.v)?;
    let (tvpv, tvpv_known) = tail_integral(&vdens);
    if !tvpv_known {
        push_unique(
            warnings,
            "the tail of V^(-p') v beyond tMax has no finite analytic completion; using \
             the truncated reading"
                .into(),
        );
    }
    let inner2_integrand = cau.powf(pp).mul(&vdens)?;
    let (inner2, _) = cum_best(&inner2_integrand, warnings, "the cumulative of (AU)^p' V^(-p') v");
    // Differences of this cumulative are all that is used, so the truncated
    // reading is exact for them regardless of head behavior.
    let ab = spec.a.div(&big_b)?.mul(u)?;
    let cab = cumulative(&ab);
    let bv = big_b.div(&big_v)?;
    let bvp_v = bv.powf(pp).mul(&spec.v)?;
    let (cbv, _) = cum_best(&bvp_v, warnings, "the cumulative of (B/V)^p' v");

    // outer3[i] = integral over (x_i, tMax) of (CAB(t) - CAB(x_i))^q w(t);
    // no beyond-grid completion exists for the raw difference kernel.
    let mut outer3 = vec![ZERO; n];
    for i in 0..n {
        let ci = cab.value(i);
        let mut parts = Vec::with_capacity(n - i);
        for k in i..n - 1 {
            let right = spec.w.value(k) * cab.value(k).saturating_sub(ci).powf(q);
            let left = spec.w.left(k + 1) * cab.left(k + 1).saturating_sub(ci).powf(q);
            parts.push(avg(right, left) * XReal::nn(widths[k]));
        }
        outer3[i] = sorted_sum(parts);
    }
    // inner4[i] = integral over (tMin, x_i) of (CAB(x_i) - CAB(s))^p' (B/V)^p' v.
    let mut inner4 = vec![ZERO; n];
    for i in 0..n {
        let ci = cab.value(i);
        let mut parts = Vec::with_capacity(i);
        for k in 0..i {
            let right = bvp_v.value(k) * ci.saturating_sub(cab.value(k)).powf(pp);
            let left = bvp_v.left(k + 1) * ci.saturating_sub(cab.left(k + 1)).powf(pp);
            parts.push(avg(right, left) * XReal::nn(widths[k]));
        }
        inner4[i] = sorted_sum(parts);
    }

    let term5 = v_total.powf(-1.0 / p) * cauw_total.powf(1.0 / q);
    let values = match exps.case() {
        Case::I => {
            let mut m1 = ZERO;
            let mut m2 = ZERO;
            let mut m3 = ZERO;
            let mut m4 = ZERO;
            for i in 0..n {
                let twq = tw.value(i).powf(1.0 / q);
                m1 = m1.max(cauw.value(i).powf(1.0 / q) * tvpv.value(i).powf(1.0 / pp));
                m2 = m2.max(twq * inner2.value(i).powf(1.0 / pp));
                m3 = m3.max(outer3[i].powf(1.0 / q) * cbv.value(i).powf(1.0 / pp));
                m4 = m4.max(twq * inner4[i].powf(1.0 / pp));
            }
            vec![m1, m2, m3, m4]
        }
        Case::II => {
            let r = exps.r.expect("case ii has r");
            push_unique(
                notes,
                format!(
                    "case (ii) {} reads the untied tail variable in the display as the \
                     outer variable (z := t)",
                    name(2)
                ),
            );
            let n1 = r_integral(
                &[
                    Factor::smooth(cauw.vals(), r / p),
                    Factor::smooth(tvpv.vals(), r / pp),
                    Factor::smooth(cau.vals(), q),
                    Factor::of(&spec.w, 1.0),
                ],
                r,
                widths,
            );
            let n2 = r_integral(
                &[
                    Factor::smooth(tw.vals(), r / p),
                    Factor::smooth(inner2.vals(), r / pp),
                    Factor::of(&spec.w, 1.0),
                ],
                r,
                widths,
            );
            let n3 = r_integral(
                &[
                    Factor::smooth(tw.vals(), r / p),
                    Factor::smooth(&inner4, r / pp),
                    Factor::of(&spec.w, 1.0),
                ],
                r,
                widths,
            );
            let n4 = r_integral(
                &[
                    Factor::smooth(&outer3, r / q),
                    Factor::smooth(cbv.vals(), r / exps.q_prime),
                    Factor::of(&bvp_v, 1.0),
                ],
                r,
                widths,
            );
            vec![n1, n2, n3, n4]
        }
    };

    let mut terms: Vec<Term> = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| Term {
            name: name(i + 1),
            value: v,
            boundary_read: false,
        })
        .collect();
    terms.push(Term {
        name: name(5),
        value: term5,
        boundary_read: false,
    });
    Ok(terms)
}
