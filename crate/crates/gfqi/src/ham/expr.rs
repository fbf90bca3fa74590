//! Expression Hamiltonians: text → AST → values and analytic gradients.
//!
//! Grammar (binary operators left-associative except `^`, which is
//! right-associative and binds tighter than unary minus):
//!
//! ```text
//! expr    := term  (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'pi' | 't' | 'q<k>' | 'p<k>'
//!          | fn '(' expr ')' | 'bump' '(' expr ',' expr ')' | '(' expr ')'
//! ```
//!
//! Variables: `t` (time), `q1..qn`, `p1..pn` (positions and momenta, 1-based).
//! Functions: `sin cos tan exp ln log sqrt tanh atan`. The primitive
//! `bump(r_in, r_out)` (constant radii) equals 1 for `|x| <= r_in`, 0 for
//! `|x| >= r_out`, and steps down smoothly between; it is a smooth function of
//! `s = |x|^2`, so expressions built from it stay smooth at the origin.
//!
//! Parse failures report the byte offset of the offending token.

use crate::ham::profile::{fstep, sstep_d1, sstep_d2};
use crate::{Error, Result};

/// A variable usable inside an expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    /// Time.
    T,
    /// Position coordinate, 1-based.
    Q(usize),
    /// Momentum coordinate, 1-based.
    P(usize),
}

/// Built-in unary functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Tanh,
    Atan,
}

impl Func {
    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Tanh => v.tanh(),
            Func::Atan => v.atan(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
            Func::Atan => "atan",
        }
    }

    /// Whether `f(0) = 0`, so that `f(compactly supported)` stays compactly
    /// supported.
    fn fixes_zero(self) -> bool {
        matches!(
            self,
            Func::Sin | Func::Tan | Func::Sqrt | Func::Tanh | Func::Atan
        )
    }
}

/// Binary operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Expression tree.
#[derive(Clone, Debug, PartialEq)]
pub enum Ast {
    Num(f64),
    Var(Var),
    Neg(Box<Ast>),
    Bin(BinOp, Box<Ast>, Box<Ast>),
    Call(Func, Box<Ast>),
    /// `order`-th derivative with respect to `s = |x|^2` of the unit step that
    /// is 1 for `s <= s_in` and 0 for `s >= s_out`.
    Bump { order: u8, s_in: f64, s_out: f64 },
}

// Smart constructors with constant folding, used for compact derivative trees.

fn num(v: f64) -> Ast {
    Ast::Num(v)
}

fn add(a: Ast, b: Ast) -> Ast {
    match (&a, &b) {
        (Ast::Num(x), Ast::Num(y)) => num(x + y),
        (Ast::Num(x), _) if *x == 0.0 => b,
        (_, Ast::Num(y)) if *y == 0.0 => a,
        _ => Ast::Bin(BinOp::Add, Box::new(a), Box::new(b)),
    }
}

fn sub(a: Ast, b: Ast) -> Ast {
    match (&a, &b) {
        (Ast::Num(x), Ast::Num(y)) => num(x - y),
        (_, Ast::Num(y)) if *y == 0.0 => a,
        _ => Ast::Bin(BinOp::Sub, Box::new(a), Box::new(b)),
    }
}

fn mul(a: Ast, b: Ast) -> Ast {
    match (&a, &b) {
        (Ast::Num(x), Ast::Num(y)) => num(x * y),
        (Ast::Num(x), _) if *x == 0.0 => num(0.0),
        (_, Ast::Num(y)) if *y == 0.0 => num(0.0),
        (Ast::Num(x), _) if *x == 1.0 => b,
        (_, Ast::Num(y)) if *y == 1.0 => a,
        _ => Ast::Bin(BinOp::Mul, Box::new(a), Box::new(b)),
    }
}

fn div(a: Ast, b: Ast) -> Ast {
    match (&a, &b) {
        (Ast::Num(x), _) if *x == 0.0 => num(0.0),
        (_, Ast::Num(y)) if *y == 1.0 => a,
        (Ast::Num(x), Ast::Num(y)) if *y != 0.0 => num(x / y),
        _ => Ast::Bin(BinOp::Div, Box::new(a), Box::new(b)),
    }
}

fn pow(a: Ast, b: Ast) -> Ast {
    match (&a, &b) {
        (_, Ast::Num(y)) if *y == 1.0 => a,
        (_, Ast::Num(y)) if *y == 0.0 => num(1.0),
        (Ast::Num(x), Ast::Num(y)) => num(x.powf(*y)),
        _ => Ast::Bin(BinOp::Pow, Box::new(a), Box::new(b)),
    }
}

fn neg(a: Ast) -> Ast {
    match &a {
        Ast::Num(x) => num(-x),
        _ => Ast::Neg(Box::new(a)),
    }
}

impl Ast {
    /// Evaluate at time `t` and phase point `x = (q_1..q_n, p_1..p_n)`.
    /// Coordinate indices must have been validated against `x.len()` up front
    /// (see [`Ast::max_coordinate_index`]).
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let n = x.len() / 2;
        match self {
            Ast::Num(v) => *v,
            Ast::Var(Var::T) => t,
            Ast::Var(Var::Q(k)) => x[k - 1],
            Ast::Var(Var::P(k)) => x[n + k - 1],
            Ast::Neg(a) => -a.eval(t, x),
            Ast::Bin(op, a, b) => {
                let va = a.eval(t, x);
                let vb = b.eval(t, x);
                match op {
                    BinOp::Add => va + vb,
                    BinOp::Sub => va - vb,
                    BinOp::Mul => va * vb,
                    BinOp::Div => va / vb,
                    BinOp::Pow => va.powf(vb),
                }
            }
            Ast::Call(f, a) => f.apply(a.eval(t, x)),
            Ast::Bump { order, s_in, s_out } => {
                let s: f64 = x.iter().map(|c| c * c).sum();
                let w = s_out - s_in;
                let u = (s - s_in) / w;
                match order {
                    0 => fstep(u),
                    1 => -sstep_d1(u) / w,
                    2 => -sstep_d2(u) / (w * w),
                    _ => unreachable!("bump derivative order beyond 2"),
                }
            }
        }
    }

    /// Largest coordinate index appearing in the expression (0 when none do).
    pub fn max_coordinate_index(&self) -> usize {
        match self {
            Ast::Num(_) | Ast::Bump { .. } | Ast::Var(Var::T) => 0,
            Ast::Var(Var::Q(k)) | Ast::Var(Var::P(k)) => *k,
            Ast::Neg(a) | Ast::Call(_, a) => a.max_coordinate_index(),
            Ast::Bin(_, a, b) => a.max_coordinate_index().max(b.max_coordinate_index()),
        }
    }

    /// Whether the expression references any momentum variable `p_k`.
    pub fn uses_momentum(&self) -> bool {
        match self {
            Ast::Var(Var::P(_)) => true,
            Ast::Num(_) | Ast::Var(_) | Ast::Bump { .. } => false,
            Ast::Neg(a) | Ast::Call(_, a) => a.uses_momentum(),
            Ast::Bin(_, a, b) => a.uses_momentum() || b.uses_momentum(),
        }
    }

    /// Whether the expression references time.
    pub fn uses_time(&self) -> bool {
        match self {
            Ast::Var(Var::T) => true,
            Ast::Num(_) | Ast::Var(_) | Ast::Bump { .. } => false,
            Ast::Neg(a) | Ast::Call(_, a) => a.uses_time(),
            Ast::Bin(_, a, b) => a.uses_time() || b.uses_time(),
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            Ast::Num(_) => true,
            Ast::Var(_) | Ast::Bump { .. } => false,
            Ast::Neg(a) | Ast::Call(_, a) => a.is_constant(),
            Ast::Bin(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    fn constant_value(&self) -> Option<f64> {
        if self.is_constant() {
            Some(self.eval(0.0, &[]))
        } else {
            None
        }
    }

    /// Analytic partial derivative with respect to `var`. Fails only when a
    /// `bump` factor would need a third derivative, which no exposed operation
    /// requests.
    pub fn partial(&self, var: Var) -> Result<Ast> {
        Ok(match self {
            Ast::Num(_) => num(0.0),
            Ast::Var(v) => num(if *v == var { 1.0 } else { 0.0 }),
            Ast::Neg(a) => neg(a.partial(var)?),
            Ast::Bin(BinOp::Add, a, b) => add(a.partial(var)?, b.partial(var)?),
            Ast::Bin(BinOp::Sub, a, b) => sub(a.partial(var)?, b.partial(var)?),
            Ast::Bin(BinOp::Mul, a, b) => add(
                mul(a.partial(var)?, (**b).clone()),
                mul((**a).clone(), b.partial(var)?),
            ),
            Ast::Bin(BinOp::Div, a, b) => {
                // (a/b)' = a'/b - a b'/b^2
                sub(
                    div(a.partial(var)?, (**b).clone()),
                    div(
                        mul((**a).clone(), b.partial(var)?),
                        pow((**b).clone(), num(2.0)),
                    ),
                )
            }
            Ast::Bin(BinOp::Pow, a, b) => match b.constant_value() {
                // Power rule, valid for negative bases with constant exponents.
                Some(k) => mul(
                    mul(num(k), pow((**a).clone(), num(k - 1.0))),
                    a.partial(var)?,
                ),
                // General rule a^b (b' ln a + b a'/a); needs a > 0 at evaluation.
                None => mul(
                    pow((**a).clone(), (**b).clone()),
                    add(
                        mul(b.partial(var)?, Ast::Call(Func::Ln, a.clone())),
                        div(mul((**b).clone(), a.partial(var)?), (**a).clone()),
                    ),
                ),
            },
            Ast::Call(f, a) => {
                let inner = a.partial(var)?;
                let outer = match f {
                    Func::Sin => Ast::Call(Func::Cos, a.clone()),
                    Func::Cos => neg(Ast::Call(Func::Sin, a.clone())),
                    Func::Tan => {
                        // 1 + tan^2
                        add(num(1.0), pow(Ast::Call(Func::Tan, a.clone()), num(2.0)))
                    }
                    Func::Exp => Ast::Call(Func::Exp, a.clone()),
                    Func::Ln => div(num(1.0), (**a).clone()),
                    Func::Sqrt => div(num(0.5), Ast::Call(Func::Sqrt, a.clone())),
                    Func::Tanh => {
                        // 1 - tanh^2
                        sub(num(1.0), pow(Ast::Call(Func::Tanh, a.clone()), num(2.0)))
                    }
                    Func::Atan => div(num(1.0), add(num(1.0), pow((**a).clone(), num(2.0)))),
                };
                mul(outer, inner)
            }
            Ast::Bump { order, s_in, s_out } => {
                if *order >= 2 {
                    return Err(Error::Numerics(
                        "bump factors support two derivatives; a third was requested".into(),
                    ));
                }
                let coord = match var {
                    Var::T => return Ok(num(0.0)),
                    v => Ast::Var(v),
                };
                // d/dx_i f(s) = f'(s) * 2 x_i with s = |x|^2.
                mul(
                    Ast::Bump {
                        order: order + 1,
                        s_in: *s_in,
                        s_out: *s_out,
                    },
                    mul(num(2.0), coord),
                )
            }
        })
    }

    /// A ball radius beyond which the expression provably vanishes, read off
    /// from its multiplicative structure (`None` when no bound is visible).
    pub fn inferred_support_radius(&self) -> Option<f64> {
        match self {
            Ast::Num(v) => {
                if *v == 0.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
            Ast::Var(_) => None,
            Ast::Bump { order: _, s_out, .. } => Some(s_out.sqrt()),
            Ast::Neg(a) => a.inferred_support_radius(),
            Ast::Bin(BinOp::Mul, a, b) => {
                match (a.inferred_support_radius(), b.inferred_support_radius()) {
                    (Some(ra), Some(rb)) => Some(ra.min(rb)),
                    (Some(r), None) | (None, Some(r)) => Some(r),
                    (None, None) => None,
                }
            }
            Ast::Bin(BinOp::Div, a, _) => a.inferred_support_radius(),
            Ast::Bin(BinOp::Add, a, b) | Ast::Bin(BinOp::Sub, a, b) => {
                match (a.inferred_support_radius(), b.inferred_support_radius()) {
                    (Some(ra), Some(rb)) => Some(ra.max(rb)),
                    _ => None,
                }
            }
            Ast::Bin(BinOp::Pow, a, b) => match b.constant_value() {
                Some(k) if k > 0.0 => a.inferred_support_radius(),
                _ => None,
            },
            Ast::Call(f, a) => {
                if f.fixes_zero() {
                    a.inferred_support_radius()
                } else {
                    None
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                toks.push((Tok::Plus, i));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, i));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, i));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, i));
                i += 1;
            }
            '^' => {
                toks.push((Tok::Caret, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            ',' => {
                toks.push((Tok::Comma, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| Error::Parse {
                    offset: start,
                    message: format!("malformed number literal '{text}'"),
                })?;
                toks.push((Tok::Num(value), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(src[start..i].to_string()), start));
            }
            other => {
                return Err(Error::Parse {
                    offset: i,
                    message: format!("unexpected character '{other}'"),
                })
            }
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(_, o)| *o).unwrap_or(self.end)
    }

    fn bump_tok(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t);
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let off = self.offset();
        match self.toks.get(self.pos) {
            Some((t, _)) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(Error::Parse {
                offset: off,
                message: format!("expected {what}"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Ast::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Ast::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Ast> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Ast::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Ast::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Ast> {
        if let Some(Tok::Minus) = self.peek() {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Ast::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast> {
        let base = self.primary()?;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            // Right-associative; the exponent may carry a unary minus.
            let exponent = self.unary()?;
            return Ok(Ast::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Ast> {
        let off = self.offset();
        match self.bump_tok().cloned() {
            Some(Tok::Num(v)) => Ok(Ast::Num(v)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "closing ')'")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => self.ident(off, &name),
            _ => Err(Error::Parse {
                offset: off,
                message: "expected an operand".into(),
            }),
        }
    }

    fn ident(&mut self, off: usize, name: &str) -> Result<Ast> {
        if name == "t" {
            return Ok(Ast::Var(Var::T));
        }
        if name == "pi" {
            return Ok(Ast::Num(std::f64::consts::PI));
        }
        if let Some(var) = coordinate_name(name) {
            return match var {
                Var::Q(0) | Var::P(0) => Err(Error::Parse {
                    offset: off,
                    message: "coordinate indices start at 1".into(),
                }),
                v => Ok(Ast::Var(v)),
            };
        }
        if name == "bump" {
            self.expect(Tok::LParen, "'(' after bump")?;
            let a_off = self.offset();
            let a = self.expr()?;
            self.expect(Tok::Comma, "',' between bump radii")?;
            let b_off = self.offset();
            let b = self.expr()?;
            self.expect(Tok::RParen, "closing ')'")?;
            let r_in = a.constant_value().ok_or_else(|| Error::Parse {
                offset: a_off,
                message: "bump radii must be constant".into(),
            })?;
            let r_out = b.constant_value().ok_or_else(|| Error::Parse {
                offset: b_off,
                message: "bump radii must be constant".into(),
            })?;
            if !(r_in >= 0.0 && r_out > r_in) {
                return Err(Error::Parse {
                    offset: a_off,
                    message: format!("bump needs 0 <= r_in < r_out, got ({r_in}, {r_out})"),
                });
            }
            return Ok(Ast::Bump {
                order: 0,
                s_in: r_in * r_in,
                s_out: r_out * r_out,
            });
        }
        let func = match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            "atan" => Func::Atan,
            _ => {
                return Err(Error::Parse {
                    offset: off,
                    message: format!("unknown name '{name}'"),
                })
            }
        };
        self.expect(Tok::LParen, &format!("'(' after {}", func.name()))?;
        let arg = self.expr()?;
        self.expect(Tok::RParen, "closing ')'")?;
        Ok(Ast::Call(func, Box::new(arg)))
    }
}

/// Classify `q<digits>` / `p<digits>` names.
fn coordinate_name(name: &str) -> Option<Var> {
    let mut chars = name.chars();
    let head = chars.next()?;
    let rest: String = chars.collect();
    if rest.is_empty() || !rest.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let idx: usize = rest.parse().ok()?;
    match head {
        'q' => Some(Var::Q(idx)),
        'p' => Some(Var::P(idx)),
        _ => None,
    }
}

/// Parse an expression source string.
pub fn parse_expression(src: &str) -> Result<Ast> {
    let toks = tokenize(src)?;
    let mut parser = Parser {
        toks: &toks,
        pos: 0,
        end: src.len(),
    };
    let ast = parser.expr()?;
    if parser.pos < toks.len() {
        return Err(Error::Parse {
            offset: parser.offset(),
            message: "unexpected trailing input".into(),
        });
    }
    Ok(ast)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn eval1(src: &str, t: f64, x: &[f64]) -> f64 {
        parse_expression(src).unwrap().eval(t, x)
    }

    #[test]
    fn zero_literal() {
        let ast = parse_expression("0").unwrap();
        assert_eq!(ast, Ast::Num(0.0));
        assert_eq!(ast.eval(0.3, &[1.0, 2.0]), 0.0);
        assert_eq!(ast.inferred_support_radius(), Some(0.0));
    }

    #[test]
    fn kinetic_times_bump_value() {
        let ast = parse_expression("p1^2/2 * bump(1.0,2.0)").unwrap();
        // q1 = 0, p1 = 0.5: |x| = 0.5 <= 1 so the bump factor is exactly 1.
        assert_relative_eq!(ast.eval(0.0, &[0.0, 0.5]), 0.125, epsilon = 1e-15);
        // Outside radius 2 the expression vanishes.
        assert_eq!(ast.eval(0.0, &[0.0, 2.5]), 0.0);
        assert_relative_eq!(ast.inferred_support_radius().unwrap(), 2.0);
    }

    #[test]
    fn adjacent_operators_error_with_byte_offset() {
        let err = parse_expression("q1 +* p1").unwrap_err();
        match err {
            Error::Parse { offset, .. } => assert_eq!(offset, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn precedence_and_associativity() {
        assert_relative_eq!(eval1("-2^2", 0.0, &[]), -4.0);
        assert_relative_eq!(eval1("2^-1", 0.0, &[]), 0.5);
        assert_relative_eq!(eval1("2^3^2", 0.0, &[]), 512.0);
        assert_relative_eq!(eval1("1+2*3^2", 0.0, &[]), 19.0);
        assert_relative_eq!(eval1("(1+2)*2", 0.0, &[]), 6.0);
        assert_relative_eq!(eval1("8/4/2", 0.0, &[]), 1.0);
        assert_relative_eq!(eval1("1-2-3", 0.0, &[]), -4.0);
        assert_relative_eq!(eval1("2*-3", 0.0, &[]), -6.0);
    }

    #[test]
    fn constants_and_time() {
        assert_relative_eq!(eval1("pi", 0.0, &[]), std::f64::consts::PI);
        assert_relative_eq!(eval1("t^2", 3.0, &[]), 9.0);
        assert!(parse_expression("t*q1").unwrap().uses_time());
        assert!(!parse_expression("q1*p1").unwrap().uses_time());
    }

    #[test]
    fn coordinate_indexing() {
        let ast = parse_expression("q2 + 3*p1").unwrap();
        assert_eq!(ast.max_coordinate_index(), 2);
        // n = 2: x = (q1, q2, p1, p2)
        assert_relative_eq!(ast.eval(0.0, &[9.0, 4.0, 2.0, 7.0]), 10.0);
        let err = parse_expression("q0").unwrap_err();
        assert!(matches!(err, Error::Parse { offset: 0, .. }));
    }

    #[test]
    fn error_offsets() {
        match parse_expression("sin(q1").unwrap_err() {
            // Missing ')' is reported at end of input (byte 6).
            Error::Parse { offset, .. } => assert_eq!(offset, 6),
            other => panic!("{other:?}"),
        }
        match parse_expression("q1 $ p1").unwrap_err() {
            Error::Parse { offset, .. } => assert_eq!(offset, 3),
            other => panic!("{other:?}"),
        }
        match parse_expression("frob(q1)").unwrap_err() {
            Error::Parse { offset, .. } => assert_eq!(offset, 0),
            other => panic!("{other:?}"),
        }
        match parse_expression("q1 p1").unwrap_err() {
            Error::Parse { offset, .. } => assert_eq!(offset, 3),
            other => panic!("{other:?}"),
        }
        match parse_expression("bump(q1, 2.0)").unwrap_err() {
            Error::Parse { offset, message } => {
                assert_eq!(offset, 5);
                assert!(message.contains("constant"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ast = parse_expression("q1*p1 + sin(q1) + exp(p1/3)").unwrap();
        let dq = ast.partial(Var::Q(1)).unwrap();
        let dp = ast.partial(Var::P(1)).unwrap();
        let h = 1e-6;
        for &(q, p) in &[(0.3, -0.7), (1.2, 0.4), (-2.0, 1.5)] {
            let fd_q = (ast.eval(0.0, &[q + h, p]) - ast.eval(0.0, &[q - h, p])) / (2.0 * h);
            let fd_p = (ast.eval(0.0, &[q, p + h]) - ast.eval(0.0, &[q, p - h])) / (2.0 * h);
            assert_relative_eq!(dq.eval(0.0, &[q, p]), fd_q, max_relative = 1e-7);
            assert_relative_eq!(dp.eval(0.0, &[q, p]), fd_p, max_relative = 1e-7);
        }
    }

    #[test]
    fn power_rule_handles_negative_base() {
        let ast = parse_expression("p1^2/2").unwrap();
        let dp = ast.partial(Var::P(1)).unwrap();
        assert_relative_eq!(dp.eval(0.0, &[0.0, -1.5]), -1.5, epsilon = 1e-12);
    }

    #[test]
    fn bump_gradient_matches_finite_differences() {
        let ast = parse_expression("bump(1.0, 2.0)").unwrap();
        let dq = ast.partial(Var::Q(1)).unwrap();
        let dp = ast.partial(Var::P(1)).unwrap();
        let h = 1e-6;
        // Probe inside the transition annulus 1 < |x| < 2.
        for &(q, p) in &[(1.2, 0.3), (0.9, 0.9), (-1.0, 0.8)] {
            let fd_q = (ast.eval(0.0, &[q + h, p]) - ast.eval(0.0, &[q - h, p])) / (2.0 * h);
            let fd_p = (ast.eval(0.0, &[q, p + h]) - ast.eval(0.0, &[q, p - h])) / (2.0 * h);
            assert_relative_eq!(dq.eval(0.0, &[q, p]), fd_q, max_relative = 1e-6, epsilon = 1e-10);
            assert_relative_eq!(dp.eval(0.0, &[q, p]), fd_p, max_relative = 1e-6, epsilon = 1e-10);
        }
        // Third derivative of a bump is not available.
        let dqq = dq.partial(Var::Q(1)).unwrap();
        assert!(dqq.partial(Var::Q(1)).is_err());
    }

    #[test]
    fn support_radius_inference() {
        let r = |src: &str| parse_expression(src).unwrap().inferred_support_radius();
        assert_eq!(r("bump(1.0,2.0)"), Some(2.0));
        assert_eq!(r("p1 * bump(0.0,3.0)"), Some(3.0));
        assert_eq!(r("bump(0.0,3.0) + bump(1.0,2.0)"), Some(3.0));
        assert_eq!(r("bump(0.0,3.0) * bump(1.0,2.0)"), Some(2.0));
        assert_eq!(r("sin(bump(1.0,2.0))"), Some(2.0));
        assert_eq!(r("q1*p1"), None);
        assert_eq!(r("cos(bump(1.0,2.0))"), None);
        assert_eq!(r("bump(1.0,2.0)^2"), Some(2.0));
    }
}
