//! Extended nonnegative real arithmetic.
//!
//! Values live in [0, +inf]. Products and quotients follow the measure-theory
//! conventions 0 * inf = 0, inf / inf = 0, 0 / 0 = 0 and a / 0 = +inf for
//! a > 0, so degenerate weight combinations collapse to meaningful terms
//! instead of NaN.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul};

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct XReal(f64);

pub const ZERO: XReal = XReal(0.0);
pub const INF: XReal = XReal(f64::INFINITY);
pub const ONE: XReal = XReal(1.0);

impl XReal {
    /// Checked constructor; rejects negatives and NaN.
    pub fn new(v: f64) -> Result<Self> {
        if v.is_nan() || v < 0.0 {
            return Err(Error::domain(format!("{v} is not a nonnegative real")));
        }
        Ok(XReal(v))
    }

    /// Unchecked-by-construction constructor for values already known
    /// nonnegative; debug-asserts the invariant.
    pub fn nn(v: f64) -> Self {
        debug_assert!(!v.is_nan() && v >= 0.0, "XReal invariant broken: {v}");
        XReal(v.max(0.0))
    }

    pub fn raw(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn max(self, other: XReal) -> XReal {
        if self.0 >= other.0 {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: XReal) -> XReal {
        if self.0 <= other.0 {
            self
        } else {
            other
        }
    }

    /// x^e with the boundary conventions 0^e = 0 (e > 0), 0^e = inf (e < 0),
    /// inf^e = inf (e > 0), inf^e = 0 (e < 0) and x^0 = 1 throughout.
    pub fn powf(self, e: f64) -> XReal {
        if e == 0.0 {
            return ONE;
        }
        if self.0 == 0.0 {
            return if e > 0.0 { ZERO } else { INF };
        }
        if self.0.is_infinite() {
            return if e > 0.0 { INF } else { ZERO };
        }
        XReal::nn(self.0.powf(e))
    }

    /// Difference clamped to the cone: returns 0 when other >= self.
    /// inf - inf is read as 0, in the same spirit as inf / inf = 0.
    pub fn saturating_sub(self, other: XReal) -> XReal {
        if self.0.is_infinite() {
            if other.0.is_infinite() {
                return ZERO;
            }
            return INF;
        }
        if other.0 >= self.0 {
            ZERO
        } else {
            XReal(self.0 - other.0)
        }
    }

    pub fn sum<I: IntoIterator<Item = XReal>>(iter: I) -> XReal {
        iter.into_iter().fold(ZERO, |acc, x| acc + x)
    }

    /// True if `self` lies in [lo * (1 - tol), hi * (1 + tol)].
    pub fn within_band(self, lo: f64, hi: f64, tol: f64) -> bool {
        if self.0.is_infinite() {
            return hi.is_infinite();
        }
        self.0 >= lo * (1.0 - tol) && self.0 <= hi * (1.0 + tol)
    }

    /// Relative closeness with inf == inf treated as equal.
    pub fn rel_close(self, other: XReal, tol: f64) -> bool {
        if self.0.is_infinite() || other.0.is_infinite() {
            return self.0.is_infinite() && other.0.is_infinite();
        }
        let scale = self.0.abs().max(other.0.abs());
        if scale == 0.0 {
            return true;
        }
        (self.0 - other.0).abs() <= tol * scale
    }
}

/// Sum in a canonical order (descending), so the result depends only on the
/// multiset of summands and not on how the caller happened to order them.
/// Rearrangement-invariance of norms relies on this.
pub fn sorted_sum(mut parts: Vec<XReal>) -> XReal {
    parts.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("XReal is never NaN"));
    XReal::sum(parts)
}

impl Add for XReal {
    type Output = XReal;
    fn add(self, rhs: XReal) -> XReal {
        XReal(self.0 + rhs.0)
    }
}

impl AddAssign for XReal {
    fn add_assign(&mut self, rhs: XReal) {
        self.0 += rhs.0;
    }
}

impl Mul for XReal {
    type Output = XReal;
    fn mul(self, rhs: XReal) -> XReal {
        if self.0 == 0.0 || rhs.0 == 0.0 {
            return ZERO;
        }
        XReal(self.0 * rhs.0)
    }
}

impl Div for XReal {
    type Output = XReal;
    fn div(self, rhs: XReal) -> XReal {
        if rhs.0 == 0.0 {
            // 0/0 = 0, a/0 = inf for a > 0.
            return if self.0 == 0.0 { ZERO } else { INF };
        }
        if rhs.0.is_infinite() {
            // inf/inf = 0, a/inf = 0.
            return ZERO;
        }
        if self.0.is_infinite() {
            return INF;
        }
        XReal(self.0 / rhs.0)
    }
}

impl Mul<f64> for XReal {
    type Output = XReal;
    fn mul(self, rhs: f64) -> XReal {
        self * XReal::nn(rhs)
    }
}

impl fmt::Display for XReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for XReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

/// Integrability exponents p, q in (1, inf) with their conjugates and, when
/// q < p, the interpolation exponent r given by 1/r = 1/q - 1/p.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    #[serde(rename = "pPrime")]
    pub p_prime: f64,
    #[serde(rename = "qPrime")]
    pub q_prime: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

/// Which side of the p <= q dichotomy a characterization runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    I,
    II,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Case::I => write!(f, "i"),
            Case::II => write!(f, "ii"),
        }
    }
}

impl Exponents {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::domain(format!("p = {p} must lie in (1, inf)")));
        }
        if !(q.is_finite() && q > 1.0) {
            return Err(Error::domain(format!("q = {q} must lie in (1, inf)")));
        }
        let r = if q < p { Some(p * q / (p - q)) } else { None };
        Ok(Exponents {
            p,
            q,
            p_prime: p / (p - 1.0),
            q_prime: q / (q - 1.0),
            r,
        })
    }

    pub fn case(&self) -> Case {
        if self.p <= self.q {
            Case::I
        } else {
            Case::II
        }
    }
}
