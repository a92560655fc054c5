//! A tiny expression language for weights on (0, inf).
//!
//! Grammar:
//!   expr   := term (('+' | '-') term)*
//!   term   := factor (('*' | '/') factor)*
//!   factor := atom ('^' signed-number)?
//!   atom   := 't' | number | '(' expr ')' | func '(' args ')'
//!   func   := log | exp | min | max | chi
//!
//! `^` binds a literal (possibly signed) numeric exponent and is
//! non-associative. `chi(a, b)` takes literal endpoints and denotes the
//! indicator of (a, b); its node value uses the right-continuous version
//! [a, b) while left limits use (a, b]. Evaluation is in extended
//! nonnegative arithmetic; any negative intermediate is a domain error.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn, PowerTag};
use crate::xreal::XReal;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Var,
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Log(Box<Expr>),
    Exp(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Chi(f64, f64),
}

/// Which one-sided limit an evaluation represents at a jump point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Tok {
    T,
    Num(f64),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Log,
    Exp,
    Min,
    Max,
    Chi,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek_tok(&mut self) -> Result<Option<(Tok, usize)>> {
        let save = self.pos;
        let t = self.next_tok()?;
        let at = self.pos;
        self.pos = save;
        Ok(t.map(|tok| (tok, at)))
    }

    fn next_tok(&mut self) -> Result<Option<Tok>> {
        self.skip_ws();
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let start = self.pos;
        let c = self.src[self.pos];
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok(Some(t));
        }
        if c.is_ascii_digit() || c == b'.' {
            let mut end = self.pos;
            let mut seen_e = false;
            while end < self.src.len() {
                let d = self.src[end];
                if d.is_ascii_digit() || d == b'.' {
                    end += 1;
                } else if (d == b'e' || d == b'E') && !seen_e {
                    seen_e = true;
                    end += 1;
                    if end < self.src.len() && (self.src[end] == b'+' || self.src[end] == b'-') {
                        end += 1;
                    }
                } else {
                    break;
                }
            }
            let text = std::str::from_utf8(&self.src[start..end]).unwrap();
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                offset: start,
                expected: "a numeric literal".to_string(),
                found: text.to_string(),
            })?;
            self.pos = end;
            return Ok(Some(Tok::Num(v)));
        }
        if c.is_ascii_alphabetic() {
            let mut end = self.pos;
            while end < self.src.len() && self.src[end].is_ascii_alphanumeric() {
                end += 1;
            }
            let word = std::str::from_utf8(&self.src[start..end]).unwrap();
            self.pos = end;
            return match word {
                "t" => Ok(Some(Tok::T)),
                "log" => Ok(Some(Tok::Log)),
                "exp" => Ok(Some(Tok::Exp)),
                "min" => Ok(Some(Tok::Min)),
                "max" => Ok(Some(Tok::Max)),
                "chi" => Ok(Some(Tok::Chi)),
                "inf" => Ok(Some(Tok::Num(f64::INFINITY))),
                _ => Err(Error::Parse {
                    offset: start,
                    expected: "t, a number, or log/exp/min/max/chi".to_string(),
                    found: word.to_string(),
                }),
            };
        }
        Err(Error::Parse {
            offset: start,
            expected: "an operator, number, or identifier".to_string(),
            found: (c as char).to_string(),
        })
    }
}

struct Parser<'a> {
    lx: Lexer<'a>,
}

impl<'a> Parser<'a> {
    fn err_here(&mut self, expected: &str) -> Error {
        let offset = {
            self.lx.skip_ws();
            self.lx.pos
        };
        let found = if offset >= self.lx.src.len() {
            "end of input".to_string()
        } else {
            match self.lx.next_tok() {
                Ok(Some(t)) => format!("{t:?}"),
                _ => (self.lx.src[offset] as char).to_string(),
            }
        };
        Error::Parse { offset, expected: expected.to_string(), found }
    }

    fn expect(&mut self, want: Tok, expected: &str) -> Result<()> {
        match self.lx.peek_tok()? {
            Some((t, after)) if t == want => {
                self.lx.pos = after;
                Ok(())
            }
            _ => Err(self.err_here(expected)),
        }
    }

    fn signed_number(&mut self) -> Result<f64> {
        match self.lx.peek_tok()? {
            Some((Tok::Minus, after)) => {
                self.lx.pos = after;
                match self.lx.peek_tok()? {
                    Some((Tok::Num(v), after2)) => {
                        self.lx.pos = after2;
                        Ok(-v)
                    }
                    _ => Err(self.err_here("a numeric literal after '-'")),
                }
            }
            Some((Tok::Num(v), after)) => {
                self.lx.pos = after;
                Ok(v)
            }
            _ => Err(self.err_here("a (possibly signed) numeric literal")),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.lx.peek_tok()? {
                Some((Tok::Plus, after)) => {
                    self.lx.pos = after;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some((Tok::Minus, after)) => {
                    self.lx.pos = after;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.lx.peek_tok()? {
                Some((Tok::Star, after)) => {
                    self.lx.pos = after;
                    let rhs = self.factor()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some((Tok::Slash, after)) => {
                    self.lx.pos = after;
                    let rhs = self.factor()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some((Tok::Caret, after)) = self.lx.peek_tok()? {
            self.lx.pos = after;
            let e = self.signed_number()?;
            return Ok(Expr::Pow(Box::new(base), e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.lx.peek_tok()? {
            Some((Tok::T, after)) => {
                self.lx.pos = after;
                Ok(Expr::Var)
            }
            Some((Tok::Num(v), after)) => {
                self.lx.pos = after;
                Ok(Expr::Const(v))
            }
            Some((Tok::LParen, after)) => {
                self.lx.pos = after;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Some((Tok::Log, after)) => {
                self.lx.pos = after;
                self.unary(Expr::Log)
            }
            Some((Tok::Exp, after)) => {
                self.lx.pos = after;
                self.unary(Expr::Exp)
            }
            Some((Tok::Min, after)) => {
                self.lx.pos = after;
                self.binary(Expr::Min)
            }
            Some((Tok::Max, after)) => {
                self.lx.pos = after;
                self.binary(Expr::Max)
            }
            Some((Tok::Chi, after)) => {
                self.lx.pos = after;
                self.expect(Tok::LParen, "'(' after chi")?;
                let a = self.signed_number()?;
                self.expect(Tok::Comma, "',' between chi endpoints")?;
                let b = self.signed_number()?;
                self.expect(Tok::RParen, "')' closing chi")?;
                if !(a >= 0.0 && b > a) {
                    return Err(Error::domain(format!(
                        "chi endpoints must satisfy 0 <= a < b, got chi({a}, {b})"
                    )));
                }
                Ok(Expr::Chi(a, b))
            }
            _ => Err(self.err_here("t, a number, '(', or a function name")),
        }
    }

    fn unary(&mut self, build: impl Fn(Box<Expr>) -> Expr) -> Result<Expr> {
        self.expect(Tok::LParen, "'(' after function name")?;
        let inner = self.expr()?;
        self.expect(Tok::RParen, "')' closing function call")?;
        Ok(build(Box::new(inner)))
    }

    fn binary(&mut self, build: impl Fn(Box<Expr>, Box<Expr>) -> Expr) -> Result<Expr> {
        self.expect(Tok::LParen, "'(' after function name")?;
        let a = self.expr()?;
        self.expect(Tok::Comma, "',' between arguments")?;
        let b = self.expr()?;
        self.expect(Tok::RParen, "')' closing function call")?;
        Ok(build(Box::new(a), Box::new(b)))
    }
}

pub fn parse(src: &str) -> Result<Expr> {
    let mut p = Parser { lx: Lexer::new(src) };
    let e = p.expr()?;
    p.lx.skip_ws();
    if p.lx.pos < p.lx.src.len() {
        return Err(p.err_here("end of input"));
    }
    Ok(e)
}

impl Expr {
    /// Evaluate at t > 0 in extended arithmetic. `side` selects the one-sided
    /// limit; it only matters at indicator endpoints.
    pub fn eval(&self, t: f64, side: Side) -> Result<XReal> {
        let v = self.eval_signed(t, side)?;
        if v.is_nan() {
            return Err(Error::domain(format!("expression is undefined at t = {t}")));
        }
        if v < 0.0 {
            return Err(Error::domain(format!(
                "weights must stay nonnegative; got {v} at t = {t}"
            )));
        }
        Ok(XReal::nn(v))
    }

    fn eval_signed(&self, t: f64, side: Side) -> Result<f64> {
        Ok(match self {
            Expr::Var => t,
            Expr::Const(c) => *c,
            Expr::Add(a, b) => a.eval_signed(t, side)? + b.eval_signed(t, side)?,
            Expr::Sub(a, b) => a.eval_signed(t, side)? - b.eval_signed(t, side)?,
            Expr::Mul(a, b) => {
                let x = a.eval_signed(t, side)?;
                let y = b.eval_signed(t, side)?;
                if (x == 0.0 && y.is_infinite()) || (y == 0.0 && x.is_infinite()) {
                    0.0
                } else {
                    x * y
                }
            }
            Expr::Div(a, b) => {
                let x = a.eval_signed(t, side)?;
                let y = b.eval_signed(t, side)?;
                if x < 0.0 || y < 0.0 {
                    return Err(Error::domain(format!(
                        "weights must stay nonnegative; got {}/{} at t = {t}",
                        x, y
                    )));
                }
                (XReal::nn(x) / XReal::nn(y)).raw()
            }
            Expr::Pow(a, e) => {
                let x = a.eval_signed(t, side)?;
                if x < 0.0 {
                    return Err(Error::domain(format!(
                        "cannot raise negative value {x} to power {e} at t = {t}"
                    )));
                }
                XReal::nn(x).powf(*e).raw()
            }
            Expr::Log(a) => a.eval_signed(t, side)?.ln(),
            Expr::Exp(a) => a.eval_signed(t, side)?.exp(),
            Expr::Min(a, b) => a.eval_signed(t, side)?.min(b.eval_signed(t, side)?),
            Expr::Max(a, b) => a.eval_signed(t, side)?.max(b.eval_signed(t, side)?),
            Expr::Chi(a, b) => {
                let inside = match side {
                    Side::Right => t >= *a && t < *b,
                    Side::Left => t > *a && t <= *b,
                };
                if inside {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    /// Indicator endpoints occurring anywhere in the expression; these must
    /// become grid nodes so cells never straddle a jump.
    pub fn jump_points(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_jumps(&mut out);
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }

    fn collect_jumps(&self, out: &mut Vec<f64>) {
        match self {
            Expr::Chi(a, b) => {
                out.push(*a);
                if b.is_finite() {
                    out.push(*b);
                }
            }
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Min(a, b)
            | Expr::Max(a, b) => {
                a.collect_jumps(out);
                b.collect_jumps(out);
            }
            Expr::Pow(a, _) | Expr::Log(a) | Expr::Exp(a) => a.collect_jumps(out),
            Expr::Var | Expr::Const(_) => {}
        }
    }

    /// Recognize expressions that are globally c * t^e, possibly restricted by
    /// one indicator window: the forms whose head/tail masses close in exact
    /// arithmetic.
    pub fn power_form(&self) -> Option<PowerTag> {
        match self {
            Expr::Var => Some(PowerTag::full(1.0, 1.0)),
            Expr::Const(c) if *c >= 0.0 && c.is_finite() => Some(PowerTag::full(*c, 0.0)),
            Expr::Chi(a, b) => Some(PowerTag { coef: 1.0, exponent: 0.0, lo: *a, hi: *b }),
            Expr::Mul(x, y) => {
                let a = x.power_form()?;
                let b = y.power_form()?;
                let lo = a.lo.max(b.lo);
                let hi = a.hi.min(b.hi);
                if hi <= lo {
                    return Some(PowerTag::full(0.0, 0.0));
                }
                Some(PowerTag { coef: a.coef * b.coef, exponent: a.exponent + b.exponent, lo, hi })
            }
            Expr::Div(x, y) => {
                let a = x.power_form()?;
                let b = y.power_form()?;
                if !b.is_full_window() || b.coef <= 0.0 {
                    return None;
                }
                Some(PowerTag {
                    coef: a.coef / b.coef,
                    exponent: a.exponent - b.exponent,
                    lo: a.lo,
                    hi: a.hi,
                })
            }
            Expr::Pow(x, e) => {
                let a = x.power_form()?;
                if *e == 0.0 {
                    return Some(PowerTag::full(1.0, 0.0));
                }
                if a.coef == 0.0 {
                    return if *e > 0.0 { Some(PowerTag::full(0.0, 0.0)) } else { None };
                }
                if *e < 0.0 && !a.is_full_window() {
                    return None;
                }
                Some(PowerTag {
                    coef: a.coef.powf(*e),
                    exponent: a.exponent * e,
                    lo: a.lo,
                    hi: a.hi,
                })
            }
            _ => None,
        }
    }

    /// Sample onto a grid: right-continuous node values plus left limits.
    /// The grid should already contain every jump point as a node.
    pub fn sample(&self, grid: &Arc<Grid>) -> Result<GridFn> {
        let n = grid.len();
        let mut vals = Vec::with_capacity(n);
        let mut lefts = Vec::with_capacity(n);
        for (i, &t) in grid.nodes().iter().enumerate() {
            vals.push(self.eval(t, Side::Right)?);
            lefts.push(if i == 0 { vals[0] } else { self.eval(t, Side::Left)? });
        }
        GridFn::with_parts(Arc::clone(grid), vals, lefts, self.power_form())
    }
}

fn fmt_num(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if v.is_infinite() {
        write!(f, "inf")
    } else if v == v.trunc() && v.abs() < 1e15 {
        write!(f, "{v:.0}")
    } else {
        write!(f, "{v}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn needs_parens(e: &Expr) -> bool {
            !matches!(e, Expr::Var | Expr::Const(_) | Expr::Log(_) | Expr::Exp(_)
                | Expr::Min(..) | Expr::Max(..) | Expr::Chi(..))
        }
        fn wrap(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            if needs_parens(e) {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Var => write!(f, "t"),
            Expr::Const(c) => fmt_num(*c, f),
            Expr::Add(a, b) => {
                wrap(a, f)?;
                write!(f, " + ")?;
                wrap(b, f)
            }
            Expr::Sub(a, b) => {
                wrap(a, f)?;
                write!(f, " - ")?;
                wrap(b, f)
            }
            Expr::Mul(a, b) => {
                wrap(a, f)?;
                write!(f, " * ")?;
                wrap(b, f)
            }
            Expr::Div(a, b) => {
                wrap(a, f)?;
                write!(f, " / ")?;
                wrap(b, f)
            }
            Expr::Pow(a, e) => {
                wrap(a, f)?;
                write!(f, "^")?;
                fmt_num(*e, f)
            }
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Min(a, b) => write!(f, "min({a}, {b})"),
            Expr::Max(a, b) => write!(f, "max({a}, {b})"),
            Expr::Chi(a, b) => {
                write!(f, "chi(")?;
                fmt_num(*a, f)?;
                write!(f, ", ")?;
                fmt_num(*b, f)?;
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, t: f64) -> f64 {
        parse(src).unwrap().eval(t, Side::Right).unwrap().raw()
    }

    #[test]
    fn parses_and_evaluates() {
        assert_eq!(ev("t^2", 3.0), 9.0);
        assert_eq!(ev("t^-0.5", 4.0), 0.5);
        assert_eq!(ev("2 * t + 1", 3.0), 7.0);
        assert_eq!(ev("min(t, 1)", 0.25), 0.25);
        assert_eq!(ev("max(t, 1)", 0.25), 1.0);
        assert!((ev("log(exp(t))", 2.5) - 2.5).abs() < 1e-12);
        assert_eq!(ev("(1 + t)^2", 1.0), 4.0);
    }

    #[test]
    fn chi_sides() {
        let e = parse("chi(2, 3)").unwrap();
        assert_eq!(e.eval(2.0, Side::Right).unwrap().raw(), 1.0);
        assert_eq!(e.eval(2.0, Side::Left).unwrap().raw(), 0.0);
        assert_eq!(e.eval(3.0, Side::Right).unwrap().raw(), 0.0);
        assert_eq!(e.eval(3.0, Side::Left).unwrap().raw(), 1.0);
        assert_eq!(e.jump_points(), vec![2.0, 3.0]);
    }

    #[test]
    fn domain_errors_surface() {
        let e = parse("t - 5").unwrap();
        assert!(e.eval(1.0, Side::Right).is_err());
        assert!(e.eval(6.0, Side::Right).is_ok());
        let lg = parse("log(t)").unwrap();
        assert!(lg.eval(0.5, Side::Right).is_err());
        assert!(lg.eval(2.0, Side::Right).is_ok());
    }

    #[test]
    fn parse_errors_carry_offset() {
        match parse("t ^^ 2") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse("foo(t)").is_err());
        assert!(parse("t +").is_err());
        assert!(parse("(t").is_err());
        assert!(parse("t^t").is_err());
    }

    #[test]
    fn printer_round_trips() {
        for src in [
            "t^2",
            "t^-0.5 * chi(0, 1)",
            "(t + 1) / (t^2 + 1)",
            "min(t, 1) * max(t, 2)",
            "log(1 + t) + exp(t^-1)",
            "2 - t^0.5",
            "chi(1, inf)",
        ] {
            let e = parse(src).unwrap();
            let printed = e.to_string();
            let reparsed = parse(&printed).unwrap();
            assert_eq!(e, reparsed, "round trip failed: {src} -> {printed}");
        }
    }

    #[test]
    fn power_forms_detected() {
        let t = parse("3 * t^-2").unwrap().power_form().unwrap();
        assert_eq!(t.coef, 3.0);
        assert_eq!(t.exponent, -2.0);
        assert!(t.is_full_window());

        let w = parse("t^0.5 * chi(1, 4)").unwrap().power_form().unwrap();
        assert_eq!((w.lo, w.hi), (1.0, 4.0));

        assert!(parse("1 + t").unwrap().power_form().is_none());
        assert!(parse("log(t)").unwrap().power_form().is_none());
        let neg = parse("(t * chi(0, 1))^-1").unwrap();
        assert!(neg.power_form().is_none());
    }

    #[test]
    fn sampling_keeps_sides() {
        let g = Grid::log_uniform(1.0, 8.0, 4).unwrap();
        let g = g.with_breakpoints(&[2.0]).unwrap();
        let f = parse("chi(1, 2)").unwrap().sample(&g).unwrap();
        let i2 = g.nodes().iter().position(|&t| t == 2.0).unwrap();
        assert_eq!(f.value(i2).raw(), 0.0);
        assert_eq!(f.left(i2).raw(), 1.0);
        let tag = f.tag().unwrap();
        assert_eq!((tag.lo, tag.hi), (1.0, 2.0));
    }
}
