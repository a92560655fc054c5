//! Integration-by-parts constants for monotone integrands.
//!
//! For G(t) = integral of g over (0, t) and nonincreasing f, the two
//! readings of the same mass,
//!
//! * A1 = integral of G^alpha * g * (f - f(tMax)),
//! * A2 = Stieltjes integral of G^(alpha+1) against d(-f),
//!
//! satisfy A2 = (alpha + 1) * A1 exactly. Step instances are evaluated with
//! exact piecewise closed forms (the cell mass of G^alpha * g is the
//! telescoped difference of G^(alpha+1) / (alpha + 1)), so the constant is
//! tested sharply rather than through quadrature error. The B-side mirrors
//! this with tail integrals T(t) = integral of g over (t, inf) and
//! nondecreasing f.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{
    cumulative, cumulative_from_zero, stieltjes, tail_integral, total_integral, Direction,
    IntervalSpec,
};
use crate::error::{Error, Result};
use crate::grid::{same_grid, Grid, GridFn};
use crate::xreal::{sorted_sum, XReal, ZERO};

/// One integration-by-parts instance: an exponent, a locally integrable
/// density g, and a monotone step function f on the same grid.
#[derive(Clone, Debug)]
pub struct IbpInstance {
    pub alpha: f64,
    pub g: GridFn,
    pub f: GridFn,
}

impl IbpInstance {
    pub fn new(alpha: f64, g: GridFn, f: GridFn) -> Result<IbpInstance> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::domain(format!("alpha must be positive and finite, got {alpha}")));
        }
        same_grid(&g, &f)?;
        Ok(IbpInstance { alpha, g, f })
    }
}

/// The cumulative-side constants. `a1_full` keeps the limit contribution
/// inside the integral: a1_full = a1 + f(tMax) * (integral of g)^(alpha+1)
/// / (alpha + 1), while `limit_term` is the boundary mass f(tMax) *
/// (integral of g)^(alpha+1) itself.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IbpA {
    pub a1: XReal,
    pub a2: XReal,
    pub limit_term: XReal,
    pub a1_full: XReal,
}

/// The tail-side constants; `zero_term` is f(tMin) * (integral of g)^(alpha+1).
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IbpB {
    pub b1: XReal,
    pub b2: XReal,
    pub zero_term: XReal,
}

pub fn ibp_a(inst: &IbpInstance) -> Result<IbpA> {
    let n = inst.g.len();
    let alpha = inst.alpha;
    let (big_g, _) = {
        let (c, from_zero) = cumulative_from_zero(&inst.g);
        if from_zero && c.vals().iter().all(|x| x.is_finite()) {
            (c, true)
        } else {
            (cumulative(&inst.g), false)
        }
    };
    for i in 1..n {
        let gi = big_g.value(i);
        if gi.is_zero() || gi.is_infinite() {
            return Err(Error::precondition(format!(
                "the cumulative of g must be positive and finite at interior nodes; it is {gi} \
                 at node {i}"
            )));
        }
    }
    let h = big_g.powf(alpha + 1.0);
    let f_max = inst.f.value(n - 1);
    let inv = XReal::nn(1.0 / (alpha + 1.0));

    // Exact cell masses: integral over a cell of G^alpha g equals the
    // difference of G^(alpha+1)/(alpha+1) across it, plus the analytic head
    // below tMin when G starts from the true origin (H(t_0) > 0).
    let mut parts = Vec::with_capacity(n);
    let head = inst.f.value(0).saturating_sub(f_max) * h.value(0) * inv;
    parts.push(head);
    for i in 0..n - 1 {
        let ftilde = inst.f.value(i).saturating_sub(f_max);
        parts.push(ftilde * h.value(i + 1).saturating_sub(h.value(i)) * inv);
    }
    let a1 = sorted_sum(parts);

    let a2 = stieltjes(&h, &inst.f, Direction::NonIncreasing, IntervalSpec::All)?;
    let g_total = total_integral(&inst.g).0;
    let limit_term = f_max * g_total.powf(alpha + 1.0);
    let a1_full = a1 + f_max * g_total.powf(alpha + 1.0) * inv;
    Ok(IbpA {
        a1,
        a2,
        limit_term,
        a1_full,
    })
}

pub fn ibp_b(inst: &IbpInstance) -> Result<IbpB> {
    let n = inst.g.len();
    let alpha = inst.alpha;
    if let Some(tag) = inst.g.tag() {
        if tag.integral(inst.g.grid().t_max(), f64::INFINITY).is_infinite() {
            return Err(Error::precondition(
                "the tail integral of g diverges beyond tMax; the tail-side constants are \
                 undefined",
            ));
        }
    }
    let (tail, _) = tail_integral(&inst.g);
    for i in 1..n - 1 {
        let ti = tail.value(i);
        if ti.is_zero() || ti.is_infinite() {
            return Err(Error::precondition(format!(
                "the tail integral of g must be positive and finite at interior nodes; it is \
                 {ti} at node {i}"
            )));
        }
    }
    let h = tail.powf(alpha + 1.0);
    let f_min = inst.f.value(0);
    let inv = XReal::nn(1.0 / (alpha + 1.0));

    let mut parts = Vec::with_capacity(n);
    for i in 0..n - 1 {
        let ftilde = inst.f.value(i).saturating_sub(f_min);
        parts.push(ftilde * h.value(i).saturating_sub(h.value(i + 1)) * inv);
    }
    // Beyond tMax the integrand still carries f - f(tMin) at its last level.
    let beyond = inst.f.value(n - 1).saturating_sub(f_min) * h.value(n - 1) * inv;
    parts.push(beyond);
    let b1 = sorted_sum(parts);

    let b2 = stieltjes(&h, &inst.f, Direction::NonDecreasing, IntervalSpec::All)?;
    let g_total = total_integral(&inst.g).0;
    let zero_term = f_min * g_total.powf(alpha + 1.0);
    Ok(IbpB { b1, b2, zero_term })
}

/// Transport an instance through t -> 1/t: the reflected grid carries the
/// reversed cell masses of g as a step density, turning a cumulative-side
/// instance into a tail-side one with the same constants.
///
/// Step readings are right-continuous, so reflecting swaps which endpoint a
/// cell value belongs to; the reflected f is shifted by one node to keep
/// each mirrored cell carrying the value the original cell carried. A jump
/// of f exactly at tMax has no mirror (it would land on the reflected
/// origin, outside the Stieltjes window), so instances fed through this map
/// should not place one there.
pub fn reflect_instance(inst: &IbpInstance) -> Result<IbpInstance> {
    let grid = inst.g.grid();
    let n = grid.len();
    let mut nodes: Vec<f64> = grid.nodes().iter().map(|t| 1.0 / t).collect();
    nodes.reverse();
    let rgrid = Grid::from_nodes(nodes)?;
    let masses = inst.g.cell_masses();
    let rcells = rgrid.cells();
    let mut gvals = vec![ZERO; n];
    for k in 0..n - 1 {
        // Original cell k maps onto reflected cell n-2-k.
        let j = n - 2 - k;
        gvals[j] = masses[k] / XReal::nn(rcells[j]);
    }
    gvals[n - 1] = gvals[n - 2];
    let rg = GridFn::step(Arc::clone(&rgrid), gvals)?;
    let mut fvals = vec![ZERO; n];
    for j in 0..n - 1 {
        fvals[j] = inst.f.value(n - 2 - j);
    }
    fvals[n - 1] = inst.f.value(0);
    let rf = GridFn::step(rgrid, fvals)?;
    IbpInstance::new(inst.alpha, rg, rf)
}

/// One row of the sweep: the generating seed, both constants, their ratio,
/// and whether the ratio respects the integration-by-parts bracket.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub seed: u64,
    pub a1: XReal,
    pub a2: XReal,
    pub ratio: XReal,
    pub pass: bool,
}

/// A random positive step density and a random nonincreasing step function.
pub fn random_instance(alpha: f64, seed: u64, grid: &Arc<Grid>) -> Result<IbpInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.len();
    let gvals: Vec<XReal> = (0..n)
        .map(|_| XReal::nn(rng.gen_range(-1.5..=1.5f64).exp()))
        .collect();
    let g = GridFn::step(Arc::clone(grid), gvals)?;
    let base = if rng.gen_bool(0.5) {
        rng.gen_range(0.0..=1.0)
    } else {
        0.0
    };
    let mut fvals = vec![ZERO; n];
    fvals[n - 1] = XReal::nn(base);
    // No jump at the truncation node itself: such a jump is a boundary
    // artifact with no mirror under reflection.
    fvals[n - 2] = fvals[n - 1];
    for i in (0..n - 2).rev() {
        let atom = if rng.gen_bool(0.3) {
            rng.gen_range(0.0..=1.0)
        } else {
            0.0
        };
        fvals[i] = fvals[i + 1] + XReal::nn(atom);
    }
    let f = GridFn::step(Arc::clone(grid), fvals)?;
    IbpInstance::new(alpha, g, f)
}

/// Evaluate `instances` random instances per alpha, in parallel but in
/// deterministic order. Each row checks 1/(alpha+1) <= A1/A2 (with a tiny
/// grace for the exact lower edge) and A1/A2 <= (alpha+1)(1 + 1e-9), plus
/// the boundary-mass comparison f(tMax) * (integral of g)^(alpha+1) <=
/// (alpha+1) * a1_full whenever the latter is finite.
pub fn ibp_sweep(alphas: &[f64], instances: usize, seed: u64, grid: &Arc<Grid>) -> Result<Vec<SweepRow>> {
    let jobs: Vec<(f64, u64)> = alphas
        .iter()
        .enumerate()
        .flat_map(|(ai, &alpha)| {
            (0..instances).map(move |j| {
                let row_seed = seed
                    ^ ((ai as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
                    ^ ((j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F));
                (alpha, row_seed)
            })
        })
        .collect();
    jobs.into_par_iter()
        .map(|(alpha, row_seed)| {
            let inst = random_instance(alpha, row_seed, grid)?;
            let out = ibp_a(&inst)?;
            let ratio = out.a1 / out.a2;
            let lower = 1.0 / (alpha + 1.0) * (1.0 - 1e-12);
            let upper = (alpha + 1.0) * (1.0 + 1e-9);
            let mut pass = if out.a2.is_zero() {
                out.a1.is_zero()
            } else {
                ratio.is_finite() && lower <= ratio.raw() && ratio.raw() <= upper
            };
            let combined = out.a2 + out.limit_term;
            if combined.is_finite() && !inst.f.value(inst.f.len() - 1).is_zero() {
                pass = pass && out.limit_term <= combined;
            }
            Ok(SweepRow {
                alpha,
                seed: row_seed,
                a1: out.a1,
                a2: out.a2,
                ratio,
                pass,
            })
        })
        .collect()
}

/// Render sweep rows with the fixed header `alpha,seed,A1,A2,ratio,pass`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("alpha,seed,A1,A2,ratio,pass\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.alpha, row.seed, row.a1, row.a2, row.ratio, row.pass
        ));
    }
    out
}
