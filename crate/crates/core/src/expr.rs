//! Closed-form coefficient fields: a tiny expression language with symbolic gradients.
//!
//! Grammar (precedence low to high):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'pi' | 'e' | 'x1'..'xN'
//!          | func '(' expr ')'             func ∈ abs sin cos exp log sqrt sign
//!          | 'norm' '(' 'x' ('-' point)? ')'
//!          | '(' expr ')'
//! point   := '[' number (',' number)* ']' | 'x0'
//! ```
//!
//! `x0` is only available when the expression is parsed with a bound point.
//! Evaluation treats `0 * anything` and `0 / anything` as zero, which gives C¹ fields
//! such as `norm(x - x0)^1.1` the continuous gradient value 0 at their singular point.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Sign,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "abs" => Func::Abs,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sign => "sign",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based coordinate index.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Func(Func, Box<Expr>),
    /// Euclidean distance to a fixed center.
    Norm(Vec<f64>),
}

fn c(v: f64) -> Expr {
    Expr::Const(v)
}

fn folded(v: f64) -> Option<Expr> {
    v.is_finite().then_some(Expr::Const(v))
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(v) => c(-v),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => folded(x + y).unwrap_or_else(|| Expr::Add(Box::new(c(x)), Box::new(c(y)))),
        (Expr::Const(z), b) if z == 0.0 => b,
        (a, Expr::Const(z)) if z == 0.0 => a,
        (a, Expr::Neg(b)) => sub(a, *b),
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => folded(x - y).unwrap_or_else(|| Expr::Sub(Box::new(c(x)), Box::new(c(y)))),
        (a, Expr::Const(z)) if z == 0.0 => a,
        (Expr::Const(z), b) if z == 0.0 => neg(b),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => folded(x * y).unwrap_or_else(|| Expr::Mul(Box::new(c(x)), Box::new(c(y)))),
        (Expr::Const(z), _) | (_, Expr::Const(z)) if z == 0.0 => c(0.0),
        (Expr::Const(o), b) if o == 1.0 => b,
        (a, Expr::Const(o)) if o == 1.0 => a,
        (Expr::Const(m), b) if m == -1.0 => neg(b),
        (a, Expr::Const(m)) if m == -1.0 => neg(a),
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) if y != 0.0 => {
            folded(x / y).unwrap_or_else(|| Expr::Div(Box::new(c(x)), Box::new(c(y))))
        }
        (Expr::Const(z), _) if z == 0.0 => c(0.0),
        (a, Expr::Const(o)) if o == 1.0 => a,
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (_, Expr::Const(z)) if z == 0.0 => c(1.0),
        (a, Expr::Const(o)) if o == 1.0 => a,
        (Expr::Const(x), Expr::Const(y)) if x > 0.0 => {
            folded(x.powf(y)).unwrap_or_else(|| Expr::Pow(Box::new(c(x)), Box::new(c(y))))
        }
        (a, b) => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

fn func(f: Func, a: Expr) -> Expr {
    Expr::Func(f, Box::new(a))
}

impl Expr {
    /// Symbolic partial derivative with respect to coordinate `k` (zero-based).
    ///
    /// Products are arranged so that the derivative of the inner expression is the
    /// left factor, which lets zero inner derivatives short-circuit evaluation.
    pub fn derivative(&self, k: usize) -> Expr {
        match self {
            Expr::Const(_) => c(0.0),
            Expr::Var(j) => c(if *j == k { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.derivative(k)),
            Expr::Add(a, b) => add(a.derivative(k), b.derivative(k)),
            Expr::Sub(a, b) => sub(a.derivative(k), b.derivative(k)),
            Expr::Mul(a, b) => add(
                mul(a.derivative(k), (**b).clone()),
                mul(b.derivative(k), (**a).clone()),
            ),
            Expr::Div(a, b) => {
                let da = a.derivative(k);
                let db = b.derivative(k);
                sub(
                    div(da, (**b).clone()),
                    div(mul(db, (**a).clone()), pow((**b).clone(), c(2.0))),
                )
            }
            Expr::Pow(a, b) => match **b {
                Expr::Const(e) => mul(a.derivative(k), mul(c(e), pow((**a).clone(), c(e - 1.0)))),
                _ => {
                    // a^b (b' ln a + b a'/a)
                    let inner = add(
                        mul(b.derivative(k), func(Func::Log, (**a).clone())),
                        div(mul(a.derivative(k), (**b).clone()), (**a).clone()),
                    );
                    mul(inner, self.clone())
                }
            },
            Expr::Func(f, a) => {
                let da = a.derivative(k);
                let a = (**a).clone();
                match f {
                    Func::Abs => mul(da, func(Func::Sign, a)),
                    Func::Sin => mul(da, func(Func::Cos, a)),
                    Func::Cos => neg(mul(da, func(Func::Sin, a))),
                    Func::Exp => mul(da, func(Func::Exp, a)),
                    Func::Log => div(da, a),
                    Func::Sqrt => div(da, mul(c(2.0), func(Func::Sqrt, a))),
                    Func::Sign => c(0.0),
                }
            }
            Expr::Norm(center) => {
                let ck = center.get(k).copied().unwrap_or(0.0);
                div(sub(Expr::Var(k), c(ck)), Expr::Norm(center.clone()))
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> std::result::Result<f64, String> {
        let v = match self {
            Expr::Const(v) => *v,
            Expr::Var(j) => x[*j],
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => {
                let l = a.eval(x)?;
                if l == 0.0 {
                    return Ok(0.0);
                }
                let r = b.eval(x)?;
                if r == 0.0 {
                    return Ok(0.0);
                }
                l * r
            }
            Expr::Div(a, b) => {
                let n = a.eval(x)?;
                if n == 0.0 {
                    return Ok(0.0);
                }
                let d = b.eval(x)?;
                if d == 0.0 {
                    return Err("division by zero".into());
                }
                n / d
            }
            Expr::Pow(a, b) => {
                let base = a.eval(x)?;
                let e = b.eval(x)?;
                if base < 0.0 && e.fract() != 0.0 {
                    return Err(format!("negative base {base} raised to non-integer power {e}"));
                }
                if base == 0.0 && e < 0.0 {
                    return Err("zero raised to a negative power".into());
                }
                base.powf(e)
            }
            Expr::Func(f, a) => {
                let v = a.eval(x)?;
                match f {
                    Func::Abs => v.abs(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Log => {
                        if v <= 0.0 {
                            return Err(format!("log of nonpositive value {v}"));
                        }
                        v.ln()
                    }
                    Func::Sqrt => {
                        if v < 0.0 {
                            return Err(format!("sqrt of negative value {v}"));
                        }
                        v.sqrt()
                    }
                    Func::Sign => {
                        if v > 0.0 {
                            1.0
                        } else if v < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                }
            }
            Expr::Norm(center) => x
                .iter()
                .enumerate()
                .map(|(k, &xk)| {
                    let d = xk - center.get(k).copied().unwrap_or(0.0);
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite result {v}"))
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Const(v) if *v < 0.0 => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let paren = self.precedence() < min_prec;
        if paren {
            write!(f, "(")?;
        }
        match self {
            Expr::Const(v) => write!(f, "{v}")?,
            Expr::Var(j) => write!(f, "x{}", j + 1)?,
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_at(f, 3)?;
            }
            Expr::Add(a, b) => {
                a.fmt_at(f, 1)?;
                write!(f, " + ")?;
                b.fmt_at(f, 1)?;
            }
            Expr::Sub(a, b) => {
                a.fmt_at(f, 1)?;
                write!(f, " - ")?;
                b.fmt_at(f, 2)?;
            }
            Expr::Mul(a, b) => {
                a.fmt_at(f, 2)?;
                write!(f, "*")?;
                b.fmt_at(f, 3)?;
            }
            Expr::Div(a, b) => {
                a.fmt_at(f, 2)?;
                write!(f, "/")?;
                b.fmt_at(f, 3)?;
            }
            Expr::Pow(a, b) => {
                a.fmt_at(f, 5)?;
                write!(f, "^")?;
                b.fmt_at(f, 3)?;
            }
            Expr::Func(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_at(f, 0)?;
                write!(f, ")")?;
            }
            Expr::Norm(center) => {
                if center.iter().all(|&v| v == 0.0) {
                    write!(f, "norm(x)")?;
                } else {
                    let parts: Vec<String> = center.iter().map(|v| v.to_string()).collect();
                    write!(f, "norm(x - [{}])", parts.join(", "))?;
                }
            }
        }
        if paren {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
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
    LBracket,
    RBracket,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i] as char;
        if ch.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match ch {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            c if c.is_ascii_digit() || c == '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v = text.parse::<f64>().map_err(|_| Error::Syntax {
                    pos: start,
                    expected: vec!["number".into()],
                    found: format!("`{text}`"),
                })?;
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            other => {
                return Err(Error::Syntax {
                    pos: start,
                    expected: vec!["expression".into()],
                    found: format!("character `{other}`"),
                })
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    arity: usize,
    point: Option<&'a [f64]>,
}

const OPERAND: [&str; 4] = ["number", "identifier", "`(`", "`-`"];

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T> {
        Err(Error::Syntax {
            pos: self.pos(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        })
    }

    fn expect(&mut self, tok: Tok, label: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.fail(&[label])
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Const(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                self.identifier(&name, pos)
            }
            _ => self.fail(&OPERAND),
        }
    }

    fn identifier(&mut self, name: &str, pos: usize) -> Result<Expr> {
        match name {
            "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
            "e" => return Ok(Expr::Const(std::f64::consts::E)),
            "norm" => return self.norm_call(),
            _ => {}
        }
        if let Some(f) = Func::from_name(name) {
            self.expect(Tok::LParen, "`(`")?;
            let arg = self.expr()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Expr::Func(f, Box::new(arg)));
        }
        if let Some(idx) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
            if (1..=self.arity).contains(&idx) && !name[1..].starts_with('0') {
                return Ok(Expr::Var(idx - 1));
            }
        }
        Err(Error::UnknownIdentifier {
            name: name.to_string(),
            pos,
        })
    }

    fn norm_call(&mut self) -> Result<Expr> {
        self.expect(Tok::LParen, "`(`")?;
        match self.peek().clone() {
            Tok::Ident(s) if s == "x" => {
                self.bump();
            }
            _ => return self.fail(&["`x`"]),
        }
        let center = if *self.peek() == Tok::Minus {
            self.bump();
            self.point()?
        } else {
            vec![0.0; self.arity]
        };
        self.expect(Tok::RParen, "`)`")?;
        Ok(Expr::Norm(center))
    }

    fn point(&mut self) -> Result<Vec<f64>> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(s) if s == "x0" => {
                self.bump();
                match self.point {
                    Some(p) if p.len() == self.arity => Ok(p.to_vec()),
                    _ => Err(Error::UnknownIdentifier { name: s, pos }),
                }
            }
            Tok::LBracket => {
                self.bump();
                let mut coords = vec![self.signed_number()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    coords.push(self.signed_number()?);
                }
                self.expect(Tok::RBracket, "`]`")?;
                if coords.len() != self.arity {
                    return Err(Error::Syntax {
                        pos,
                        expected: vec![format!("point with {} coordinates", self.arity)],
                        found: format!("{} coordinates", coords.len()),
                    });
                }
                Ok(coords)
            }
            _ => self.fail(&["`[`", "`x0`"]),
        }
    }

    fn signed_number(&mut self) -> Result<f64> {
        let sign = if *self.peek() == Tok::Minus {
            self.bump();
            -1.0
        } else {
            1.0
        };
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(sign * v)
            }
            _ => self.fail(&["number"]),
        }
    }
}

/// A parsed coefficient field over coordinates `x1..xN`.
#[derive(Debug, Clone)]
pub struct FieldExpression {
    source: String,
    arity: usize,
    ast: Expr,
}

impl FieldExpression {
    pub fn parse(source: &str, arity: usize) -> Result<Self> {
        Self::parse_inner(source, arity, None)
    }

    /// Like [`FieldExpression::parse`], with `x0` bound to `point` inside `norm(x - x0)`.
    pub fn parse_with_point(source: &str, arity: usize, point: &[f64]) -> Result<Self> {
        Self::parse_inner(source, arity, Some(point))
    }

    fn parse_inner(source: &str, arity: usize, point: Option<&[f64]>) -> Result<Self> {
        let toks = lex(source)?;
        let mut p = Parser {
            toks,
            at: 0,
            arity,
            point,
        };
        if *p.peek() == Tok::End {
            return p.fail(&OPERAND);
        }
        let ast = p.expr()?;
        if *p.peek() != Tok::End {
            return p.fail(&["operator", "end of input"]);
        }
        Ok(Self {
            source: source.to_string(),
            arity,
            ast,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    /// The value if the expression folds to a constant.
    pub fn constant_value(&self) -> Option<f64> {
        match simplify(&self.ast) {
            Expr::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn derivative(&self, k: usize) -> FieldExpression {
        let ast = self.ast.derivative(k);
        FieldExpression {
            source: ast.to_string(),
            arity: self.arity,
            ast,
        }
    }

    pub fn eval(&self, x: &[f64]) -> std::result::Result<f64, String> {
        self.ast.eval(x)
    }

    fn check_arity(&self, grid: &Grid) -> Result<()> {
        if grid.dim() != self.arity {
            return Err(Error::OutOfRange(format!(
                "expression over {} coordinates evaluated on a {}-dimensional grid",
                self.arity,
                grid.dim()
            )));
        }
        Ok(())
    }

    pub fn eval_on_grid(&self, grid: &std::sync::Arc<Grid>) -> Result<ScalarField> {
        self.check_arity(grid)?;
        let mut x = vec![0.0; grid.dim()];
        let mut values = Vec::with_capacity(grid.node_count());
        for node in 0..grid.node_count() {
            grid.coords_into(node, &mut x);
            values.push(self.ast.eval(&x).map_err(|message| Error::Domain {
                node,
                coords: x.clone(),
                message,
            })?);
        }
        ScalarField::new(grid.clone(), values)
    }

    /// Exact gradient: symbolic differentiation followed by nodewise evaluation.
    pub fn grad_on_grid(&self, grid: &std::sync::Arc<Grid>) -> Result<VectorField> {
        self.check_arity(grid)?;
        let dim = grid.dim();
        let partials: Vec<Expr> = (0..dim).map(|k| self.ast.derivative(k)).collect();
        let mut x = vec![0.0; dim];
        let mut comps = Vec::with_capacity(grid.node_count() * dim);
        for node in 0..grid.node_count() {
            grid.coords_into(node, &mut x);
            for d in &partials {
                comps.push(d.eval(&x).map_err(|message| Error::Domain {
                    node,
                    coords: x.clone(),
                    message: format!("in gradient: {message}"),
                })?);
            }
        }
        VectorField::new(grid.clone(), comps)
    }
}

impl fmt::Display for FieldExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ast)
    }
}

/// Rebuilds an expression through the folding constructors.
fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) | Expr::Norm(_) => e.clone(),
        Expr::Neg(a) => neg(simplify(a)),
        Expr::Add(a, b) => add(simplify(a), simplify(b)),
        Expr::Sub(a, b) => sub(simplify(a), simplify(b)),
        Expr::Mul(a, b) => mul(simplify(a), simplify(b)),
        Expr::Div(a, b) => div(simplify(a), simplify(b)),
        Expr::Pow(a, b) => pow(simplify(a), simplify(b)),
        Expr::Func(f, a) => {
            let a = simplify(a);
            if let Expr::Const(v) = a {
                if let Ok(r) = Expr::Func(*f, Box::new(c(v))).eval(&[]) {
                    return c(r);
                }
            }
            func(*f, a)
        }
    }
}
