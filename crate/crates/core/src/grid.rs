//! Truncated grids on (0, inf) and grid functions sampled on them.
//!
//! A `GridFn` stores right-continuous node samples together with the left
//! limit at every node. Integration always uses the generalized trapezoid
//! rule (vals[i] + lefts[i+1]) / 2 * h_i, which is exact for step data
//! (where lefts[i+1] == vals[i]) and second order for smooth data (where
//! lefts == vals). Jumps of indicator weights are aligned to nodes when
//! expressions are sampled, so no quadrature rule ever straddles one.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::xreal::{XReal, ZERO};

#[derive(Debug)]
pub struct Grid {
    nodes: Vec<f64>,
    cells: Vec<f64>,
}

impl Grid {
    /// Log-uniform grid with exact endpoints. The classic constructor: nodes
    /// t_k = tMin * (tMax/tMin)^(k/(n-1)).
    pub fn log_uniform(t_min: f64, t_max: f64, n: usize) -> Result<Arc<Grid>> {
        if !(t_min.is_finite() && t_max.is_finite() && t_min > 0.0 && t_min < t_max) {
            return Err(Error::domain(format!(
                "grid endpoints must satisfy 0 < tMin < tMax < inf, got [{t_min}, {t_max}]"
            )));
        }
        if n < 2 {
            return Err(Error::domain(format!("grid needs at least 2 nodes, got {n}")));
        }
        let ratio = t_max / t_min;
        let mut nodes = Vec::with_capacity(n);
        nodes.push(t_min);
        for k in 1..n - 1 {
            nodes.push(t_min * ratio.powf(k as f64 / (n - 1) as f64));
        }
        nodes.push(t_max);
        Grid::from_nodes(nodes)
    }

    /// Grid over arbitrary strictly increasing nodes; the first node may be 0
    /// (used by rearrangement output grids).
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Arc<Grid>> {
        if nodes.len() < 2 {
            return Err(Error::domain("grid needs at least 2 nodes".to_string()));
        }
        if nodes[0] < 0.0 || !nodes[0].is_finite() {
            return Err(Error::domain(format!("first node {} must be finite and >= 0", nodes[0])));
        }
        for w in nodes.windows(2) {
            if !(w[1].is_finite() && w[1] > w[0]) {
                return Err(Error::domain(format!(
                    "grid nodes must increase strictly, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        let cells = nodes.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Arc::new(Grid { nodes, cells }))
    }

    /// Insert interior breakpoints (indicator jump locations) as nodes.
    /// Points outside (tMin, tMax) or within 1e-12 relative distance of an
    /// existing node are dropped.
    pub fn with_breakpoints(self: &Arc<Grid>, points: &[f64]) -> Result<Arc<Grid>> {
        let mut extra: Vec<f64> = points
            .iter()
            .copied()
            .filter(|&p| p.is_finite() && p > self.t_min() && p < self.t_max())
            .collect();
        if extra.is_empty() {
            return Ok(Arc::clone(self));
        }
        extra.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut nodes = Vec::with_capacity(self.nodes.len() + extra.len());
        let mut it = extra.into_iter().peekable();
        for &t in &self.nodes {
            while let Some(&p) = it.peek() {
                if p < t {
                    it.next();
                    if (t - p) > 1e-12 * t && nodes.last().map_or(true, |&l: &f64| (p - l) > 1e-12 * p) {
                        nodes.push(p);
                    }
                } else {
                    break;
                }
            }
            if nodes.last().map_or(true, |&l| (t - l) > 1e-12 * t.abs().max(1e-300)) {
                nodes.push(t);
            }
        }
        Grid::from_nodes(nodes)
    }

    /// Geometric subdivision of every cell by `factor`; original nodes are
    /// preserved verbatim, so node count becomes (n-1)*factor + 1.
    pub fn refine(self: &Arc<Grid>, factor: usize) -> Result<Arc<Grid>> {
        if factor == 0 {
            return Err(Error::domain("refine factor must be >= 1".to_string()));
        }
        if factor == 1 {
            return Ok(Arc::clone(self));
        }
        if self.nodes[0] <= 0.0 {
            return Err(Error::precondition(
                "refine needs strictly positive nodes for geometric subdivision",
            ));
        }
        let mut nodes = Vec::with_capacity((self.nodes.len() - 1) * factor + 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            let ratio = w[1] / w[0];
            for j in 1..factor {
                nodes.push(w[0] * ratio.powf(j as f64 / factor as f64));
            }
        }
        nodes.push(*self.nodes.last().unwrap());
        Grid::from_nodes(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Cell widths of the induced partition; length is len() - 1.
    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn t_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }
}

pub fn same_grid(a: &GridFn, b: &GridFn) -> Result<()> {
    if Arc::ptr_eq(a.grid(), b.grid()) || a.grid().nodes() == b.grid().nodes() {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "functions live on different grids ({} vs {} nodes)",
            a.len(),
            b.len()
        )))
    }
}

/// Analytic form c * t^exponent restricted to the window [lo, hi), tracked
/// through pointwise algebra so head and tail masses beyond the grid can be
/// completed exactly for power-form and indicator-form weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerTag {
    pub coef: f64,
    pub exponent: f64,
    pub lo: f64,
    pub hi: f64,
}

impl PowerTag {
    pub fn full(coef: f64, exponent: f64) -> Self {
        PowerTag { coef, exponent, lo: 0.0, hi: f64::INFINITY }
    }

    pub fn is_full_window(&self) -> bool {
        self.lo == 0.0 && self.hi.is_infinite()
    }

    /// Exact integral of the tagged form over (a, b), window-clipped.
    /// Divergent endpoints follow the usual power-integral dichotomy.
    pub fn integral(&self, a: f64, b: f64) -> XReal {
        if self.coef == 0.0 {
            return ZERO;
        }
        let lo = a.max(self.lo);
        let hi = b.min(self.hi);
        if hi <= lo {
            return ZERO;
        }
        let e = self.exponent;
        if lo == 0.0 && e <= -1.0 {
            return crate::xreal::INF;
        }
        if hi.is_infinite() {
            if e >= -1.0 {
                return crate::xreal::INF;
            }
            return XReal::nn(self.coef * lo.powf(e + 1.0) / (-e - 1.0));
        }
        if e == -1.0 {
            return XReal::nn(self.coef * (hi / lo).ln());
        }
        XReal::nn(self.coef * (hi.powf(e + 1.0) - lo.powf(e + 1.0)) / (e + 1.0))
    }

    fn mul(a: &PowerTag, b: &PowerTag) -> PowerTag {
        let lo = a.lo.max(b.lo);
        let hi = a.hi.min(b.hi);
        if hi <= lo || a.coef == 0.0 || b.coef == 0.0 {
            return PowerTag::full(0.0, 0.0);
        }
        PowerTag { coef: a.coef * b.coef, exponent: a.exponent + b.exponent, lo, hi }
    }
}

#[derive(Clone, Debug)]
pub struct GridFn {
    grid: Arc<Grid>,
    vals: Vec<XReal>,
    lefts: Vec<XReal>,
    tag: Option<PowerTag>,
}

impl GridFn {
    /// Step function constant on cells: value vals[i] on [t_i, t_{i+1}).
    pub fn step(grid: Arc<Grid>, vals: Vec<XReal>) -> Result<GridFn> {
        Self::check_len(&grid, &vals)?;
        let mut lefts = Vec::with_capacity(vals.len());
        lefts.push(vals[0]);
        for i in 1..vals.len() {
            lefts.push(vals[i - 1]);
        }
        Ok(GridFn { grid, vals, lefts, tag: None })
    }

    /// Continuous samples: left limits coincide with node values.
    pub fn smooth(grid: Arc<Grid>, vals: Vec<XReal>) -> Result<GridFn> {
        Self::check_len(&grid, &vals)?;
        let lefts = vals.clone();
        Ok(GridFn { grid, vals, lefts, tag: None })
    }

    pub fn with_parts(
        grid: Arc<Grid>,
        vals: Vec<XReal>,
        lefts: Vec<XReal>,
        tag: Option<PowerTag>,
    ) -> Result<GridFn> {
        Self::check_len(&grid, &vals)?;
        if lefts.len() != vals.len() {
            return Err(Error::GridMismatch("lefts/vals length mismatch".to_string()));
        }
        Ok(GridFn { grid, vals, lefts, tag })
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Result<GridFn> {
        let v = XReal::new(c)?;
        let n = grid.len();
        Ok(GridFn {
            grid,
            vals: vec![v; n],
            lefts: vec![v; n],
            tag: Some(PowerTag::full(c, 0.0)),
        })
    }

    fn check_len(grid: &Arc<Grid>, vals: &[XReal]) -> Result<()> {
        if vals.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid with {} nodes",
                vals.len(),
                grid.len()
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn vals(&self) -> &[XReal] {
        &self.vals
    }

    pub fn lefts(&self) -> &[XReal] {
        &self.lefts
    }

    pub fn value(&self, i: usize) -> XReal {
        self.vals[i]
    }

    pub fn left(&self, i: usize) -> XReal {
        self.lefts[i]
    }

    pub fn tag(&self) -> Option<PowerTag> {
        self.tag
    }

    pub fn set_tag(&mut self, tag: Option<PowerTag>) {
        self.tag = tag;
    }

    /// Per-cell masses under the generalized trapezoid rule.
    pub fn cell_masses(&self) -> Vec<XReal> {
        let cells = self.grid.cells();
        let mut out = Vec::with_capacity(cells.len());
        for i in 0..cells.len() {
            let avg = (self.vals[i] + self.lefts[i + 1]) * XReal::nn(0.5);
            out.push(avg * XReal::nn(cells[i]));
        }
        out
    }

    pub fn map2(&self, other: &GridFn, op: impl Fn(XReal, XReal) -> XReal) -> Result<GridFn> {
        same_grid(self, other)?;
        let vals = self
            .vals
            .iter()
            .zip(&other.vals)
            .map(|(&a, &b)| op(a, b))
            .collect();
        let lefts = self
            .lefts
            .iter()
            .zip(&other.lefts)
            .map(|(&a, &b)| op(a, b))
            .collect();
        Ok(GridFn { grid: Arc::clone(&self.grid), vals, lefts, tag: None })
    }

    pub fn map(&self, op: impl Fn(XReal) -> XReal) -> GridFn {
        GridFn {
            grid: Arc::clone(&self.grid),
            vals: self.vals.iter().map(|&v| op(v)).collect(),
            lefts: self.lefts.iter().map(|&v| op(v)).collect(),
            tag: None,
        }
    }

    pub fn mul(&self, other: &GridFn) -> Result<GridFn> {
        let mut out = self.map2(other, |a, b| a * b)?;
        out.tag = match (self.tag, other.tag) {
            (Some(a), Some(b)) => Some(PowerTag::mul(&a, &b)),
            _ => None,
        };
        Ok(out)
    }

    pub fn div(&self, other: &GridFn) -> Result<GridFn> {
        let mut out = self.map2(other, |a, b| a / b)?;
        out.tag = match (self.tag, other.tag) {
            (Some(a), Some(b)) if b.is_full_window() && b.coef > 0.0 => Some(PowerTag {
                coef: a.coef / b.coef,
                exponent: a.exponent - b.exponent,
                lo: a.lo,
                hi: a.hi,
            }),
            _ => None,
        };
        Ok(out)
    }

    pub fn powf(&self, e: f64) -> GridFn {
        let mut out = self.map(|v| v.powf(e));
        out.tag = match self.tag {
            Some(t) if e == 0.0 => {
                let _ = t;
                Some(PowerTag::full(1.0, 0.0))
            }
            Some(t) if t.coef > 0.0 && (e > 0.0 || t.is_full_window()) => Some(PowerTag {
                coef: t.coef.powf(e),
                exponent: t.exponent * e,
                lo: t.lo,
                hi: t.hi,
            }),
            Some(t) if t.coef == 0.0 && e > 0.0 => Some(PowerTag::full(0.0, 0.0)),
            _ => None,
        };
        out
    }

    pub fn scale(&self, c: f64) -> Result<GridFn> {
        let c = XReal::new(c)?;
        let mut out = self.map(|v| v * c);
        out.tag = self.tag.map(|t| PowerTag { coef: t.coef * c.raw(), ..t });
        Ok(out)
    }
}
