//! Monotone-envelope calculus: cumulative and tail integrals, suffix
//! suprema, the level function, Lebesgue–Stieltjes integration against
//! monotone differentials, and non-increasing rearrangement.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn, PowerTag};
use crate::xreal::{sorted_sum, XReal, ZERO};

/// Nondecreasing cumulative F(t_i) = integral of f over [tMin, t_i]; F at the
/// first node is 0 and no mass below the grid is assumed.
pub type CumFn = GridFn;
/// Nonincreasing tail G(t_i) = integral of f over [t_i, tMax] plus the
/// analytic remainder beyond tMax when one is available.
pub type TailFn = GridFn;
/// Monotone node envelope (output of suffix_sup), step semantics.
pub type MonotoneEnvelope = GridFn;

/// Raw truncated cumulative: F(t_1) = 0, generalized trapezoid per cell.
pub fn cumulative(f: &GridFn) -> CumFn {
    let masses = f.cell_masses();
    let n = f.len();
    let mut vals = Vec::with_capacity(n);
    let mut acc = ZERO;
    vals.push(acc);
    for m in masses {
        acc += m;
        vals.push(acc);
    }
    let lefts = vals.clone();
    GridFn::with_parts(Arc::clone(f.grid()), vals, lefts, None).unwrap()
}

/// Cumulative from the true origin: the mass of (0, tMin) is completed
/// analytically when the integrand carries a power tag (in which case every
/// node value is the exact closed-form integral); otherwise the head is
/// treated as zero and the returned flag is false.
pub fn cumulative_from_zero(f: &GridFn) -> (CumFn, bool) {
    let n = f.len();
    if let Some(tag) = f.tag() {
        let nodes = f.grid().nodes();
        let mut vals = Vec::with_capacity(n);
        for &t in nodes {
            vals.push(tag.integral(0.0, t));
        }
        let lefts = vals.clone();
        let out_tag = if tag.is_full_window() && tag.exponent > -1.0 && tag.coef > 0.0 {
            Some(PowerTag::full(tag.coef / (tag.exponent + 1.0), tag.exponent + 1.0))
        } else if tag.coef == 0.0 {
            Some(PowerTag::full(0.0, 0.0))
        } else {
            None
        };
        let mut out = GridFn::with_parts(Arc::clone(f.grid()), vals, lefts, None).unwrap();
        out.set_tag(out_tag);
        (out, true)
    } else {
        (cumulative(f), false)
    }
}

/// Tail T(t_i) = integral over [t_i, tMax], plus the analytic remainder
/// beyond tMax for tagged integrands (flag reports whether it was known).
/// A divergent remainder is not injected: the truncated reading is kept and
/// the flag stays false, so callers can surface the truncation.
pub fn tail_integral(f: &GridFn) -> (TailFn, bool) {
    let masses = f.cell_masses();
    let n = f.len();
    let (beyond, known) = match f.tag() {
        Some(tag) => {
            let b = tag.integral(f.grid().t_max(), f64::INFINITY);
            if b.is_finite() {
                (b, true)
            } else {
                (ZERO, false)
            }
        }
        None => (ZERO, false),
    };
    let mut vals = vec![ZERO; n];
    vals[n - 1] = beyond;
    for i in (0..n - 1).rev() {
        vals[i] = vals[i + 1] + masses[i];
    }
    let lefts = vals.clone();
    let out_tag = match f.tag() {
        Some(tag) if tag.is_full_window() && tag.exponent < -1.0 && tag.coef > 0.0 => Some(
            PowerTag::full(tag.coef / (-tag.exponent - 1.0), tag.exponent + 1.0),
        ),
        Some(tag) if tag.coef == 0.0 => Some(PowerTag::full(0.0, 0.0)),
        _ => None,
    };
    let mut out = GridFn::with_parts(Arc::clone(f.grid()), vals, lefts, None).unwrap();
    out.set_tag(out_tag);
    (out, known)
}

/// Integral over all of (0, inf): analytic head and tail when tagged, grid
/// mass otherwise. Cell contributions are summed in a canonical (descending)
/// order so the result depends only on the multiset of cell masses.
/// Returns (value, head_known, tail_known).
pub fn total_integral(f: &GridFn) -> (XReal, bool, bool) {
    let mut parts = f.cell_masses();
    let (head_known, tail_known) = match f.tag() {
        Some(tag) => {
            parts.push(tag.integral(0.0, f.grid().t_min()));
            parts.push(tag.integral(f.grid().t_max(), f64::INFINITY));
            (true, true)
        }
        None => (false, false),
    };
    (sorted_sum(parts), head_known, tail_known)
}

/// Backward running maximum of the node values: phi_i = max_{j >= i} f_j.
/// Output uses step semantics. The power tag survives only when it describes
/// a globally nonincreasing form (the envelope of such a form is itself).
pub fn suffix_sup(f: &GridFn) -> MonotoneEnvelope {
    let n = f.len();
    let fv = f.vals();
    let fl = f.lefts();
    // Node values: backward max over node values and over the cell-interior
    // readings carried by the left limits, so peaks attained only as left
    // limits still enter the envelope.
    let mut vals = fv.to_vec();
    for i in (0..n - 1).rev() {
        vals[i] = vals[i].max(fl[i + 1]).max(vals[i + 1]);
    }
    // Left limits: sup over [t-, inf) = max of f's own left limit and the
    // node value of the envelope. Smooth inputs keep their smooth reading
    // (second-order cell masses) and step inputs keep the step one; either
    // way lefts[i + 1] <= vals[i], so the envelope is nonincreasing.
    let mut lefts = Vec::with_capacity(n);
    lefts.push(vals[0]);
    for i in 1..n {
        lefts.push(fl[i].max(vals[i]));
    }
    let mut out = GridFn::with_parts(Arc::clone(f.grid()), vals, lefts, None).unwrap();
    if let Some(tag) = f.tag() {
        if tag.is_full_window() && tag.exponent <= 0.0 {
            out.set_tag(Some(tag));
        }
    }
    out
}

/// Smallest majorant of u that is a multiple of B with nonincreasing ratio:
/// ubar = B * suffix_sup(u / B), clamped from below by u itself. Where the
/// suffix supremum is attained at the node itself the value is returned as
/// exactly u(t_i), so fixed points are bitwise fixed points.
pub fn level_function(u: &GridFn, big_b: &CumFn) -> Result<GridFn> {
    let q = u.div(big_b)?;
    let s = suffix_sup(&q);
    if s.vals() == q.vals() {
        return Ok(u.clone());
    }
    let n = u.len();
    let mut vals = Vec::with_capacity(n);
    let mut lefts = Vec::with_capacity(n);
    for i in 0..n {
        vals.push(if s.value(i) == q.value(i) {
            u.value(i)
        } else {
            u.value(i).max(big_b.value(i) * s.value(i))
        });
        lefts.push(if s.left(i) == q.left(i) {
            u.left(i)
        } else {
            u.left(i).max(big_b.left(i) * s.left(i))
        });
    }
    GridFn::with_parts(Arc::clone(u.grid()), vals, lefts, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// phi nonincreasing right-continuous; integrate against d[-phi].
    NonIncreasing,
    /// phi nondecreasing left-continuous; integrate against d[phi].
    NonDecreasing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntervalSpec {
    /// All of (0, inf) — every grid node and cell.
    All,
    /// [x_i, inf): the atom at node i is included.
    ClosedFrom(usize),
    /// (0, x_i]: the atom at node i is included.
    ToClosed(usize),
}

/// Variation masses of a monotone grid function: per-node jump atoms and
/// per-cell continuous drops (zero for step data). Errors if the declared
/// direction does not match the data.
pub fn monotone_masses(
    phi: &GridFn,
    dir: Direction,
) -> Result<(Vec<XReal>, Vec<XReal>)> {
    let n = phi.len();
    let mut atoms = Vec::with_capacity(n);
    let mut cells = Vec::with_capacity(n - 1);
    let bad = |what: &str, i: usize| {
        Err(Error::precondition(format!(
            "envelope is not {} at node {i} ({what})",
            match dir {
                Direction::NonIncreasing => "nonincreasing",
                Direction::NonDecreasing => "nondecreasing",
            }
        )))
    };
    for i in 0..n {
        let (hi, lo) = match dir {
            Direction::NonIncreasing => (phi.left(i), phi.value(i)),
            Direction::NonDecreasing => (phi.value(i), phi.left(i)),
        };
        if i > 0 && hi < lo {
            return bad("node jump has the wrong sign", i);
        }
        atoms.push(if i == 0 { ZERO } else { hi.saturating_sub(lo) });
    }
    for i in 0..n - 1 {
        let (hi, lo) = match dir {
            Direction::NonIncreasing => (phi.value(i), phi.left(i + 1)),
            Direction::NonDecreasing => (phi.left(i + 1), phi.value(i)),
        };
        if hi < lo {
            return bad("cell variation has the wrong sign", i);
        }
        cells.push(hi.saturating_sub(lo));
    }
    Ok((atoms, cells))
}

/// Lebesgue–Stieltjes integral of g against the monotone differential of phi
/// over the requested interval. Jump atoms sample g at the jump node; the
/// continuous part of a cell samples the trapezoid average of g.
pub fn stieltjes(
    g: &GridFn,
    phi: &GridFn,
    dir: Direction,
    interval: IntervalSpec,
) -> Result<XReal> {
    crate::grid::same_grid(g, phi)?;
    let (atoms, cells) = monotone_masses(phi, dir)?;
    let n = phi.len();
    let (node_lo, node_hi) = match interval {
        IntervalSpec::All => (0, n - 1),
        IntervalSpec::ClosedFrom(i) => (i, n - 1),
        IntervalSpec::ToClosed(i) => (0, i),
    };
    let mut total = ZERO;
    for j in node_lo..=node_hi {
        total += g.value(j) * atoms[j];
    }
    let (cell_lo, cell_hi) = match interval {
        IntervalSpec::All => (0, n - 1),
        IntervalSpec::ClosedFrom(i) => (i, n - 1),
        IntervalSpec::ToClosed(i) => (0, i),
    };
    for i in cell_lo..cell_hi {
        let avg = (g.value(i) + g.left(i + 1)) * XReal::nn(0.5);
        total += avg * cells[i];
    }
    Ok(total)
}

/// Non-increasing rearrangement with respect to Lebesgue measure. The input
/// is read as the step function taking vals[i] on cell i; cells are sorted by
/// value (descending, stable) and laid out on a fresh grid over (0, total].
pub fn rearrange(f: &GridFn) -> Result<GridFn> {
    let n = f.len();
    let widths = f.grid().cells();
    let mut idx: Vec<usize> = (0..n - 1).collect();
    idx.sort_by(|&a, &b| {
        f.value(b)
            .partial_cmp(&f.value(a))
            .expect("grid values are never NaN")
            .then(a.cmp(&b))
    });
    let mut nodes = Vec::with_capacity(n);
    let mut vals = Vec::with_capacity(n);
    nodes.push(0.0);
    let mut acc = 0.0;
    for &i in &idx {
        acc += widths[i];
        nodes.push(acc);
        vals.push(f.value(i));
    }
    vals.push(ZERO);
    let grid = Grid::from_nodes(nodes)?;
    GridFn::step(grid, vals)
}

/// Exact per-cell masses of a weight expression on an arbitrary grid:
/// analytic power-rule integrals when the weight has power form, trapezoid
/// node sampling otherwise. Used on rearranged grids whose first node is 0.
pub fn weight_cell_masses(weight: &crate::weightlang::Expr, grid: &Arc<Grid>) -> Result<Vec<XReal>> {
    let nodes = grid.nodes();
    if let Some(tag) = weight.power_form() {
        return Ok(nodes.windows(2).map(|w| tag.integral(w[0], w[1])).collect());
    }
    let mut out = Vec::with_capacity(nodes.len() - 1);
    for w in nodes.windows(2) {
        let lo = if w[0] == 0.0 {
            // No sample exists at 0 for a general weight; fall back to the
            // right endpoint (one-sided rectangle on the first cell).
            weight.eval(w[1], crate::weightlang::Side::Left)?
        } else {
            weight.eval(w[0], crate::weightlang::Side::Right)?
        };
        let hi = weight.eval(w[1], crate::weightlang::Side::Left)?;
        out.push((lo + hi) * XReal::nn(0.5) * XReal::nn(w[1] - w[0]));
    }
    Ok(out)
}

/// Weighted L^q mass against precomputed per-cell weight masses:
/// sum of avg(f^q over cell sides) * wmass, in canonical order.
pub fn weighted_lq_with_masses(f: &GridFn, wmass: &[XReal], q: f64) -> XReal {
    let mut parts = Vec::with_capacity(wmass.len());
    for i in 0..wmass.len() {
        let avg = (f.value(i).powf(q) + f.left(i + 1).powf(q)) * XReal::nn(0.5);
        parts.push(avg * wmass[i]);
    }
    sorted_sum(parts).powf(1.0 / q)
}

/// True if the node values never increase (the discrete nonincreasing cone).
pub fn is_nonincreasing(f: &GridFn) -> bool {
    f.vals().windows(2).all(|w| w[1] <= w[0])
}

/// Project node values onto the nonincreasing cone by a backward running
/// maximum (idempotent, order-preserving).
pub fn project_nonincreasing(vals: &mut [XReal]) {
    for i in (0..vals.len().saturating_sub(1)).rev() {
        vals[i] = vals[i].max(vals[i + 1]);
    }
}
