//! Scalar expressions over chart coordinates with jet evaluation.
//!
//! Grammar (version [`GRAMMAR_VERSION`]):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          exponent must be a constant
//! atom   := number | ident | func '(' expr ')' | '(' expr ')'
//! func   := 'sqrt' | 'exp' | 'log'
//! ident  := 'x1' .. 'xn'   (and 'p1' .. 'pn' for bundle expressions)
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x1^2`
//! is `-(x1^2)`. Integer exponents are evaluated by repeated multiplication
//! and are valid for any base; other exponents need a positive base.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::Jet;

pub const GRAMMAR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    PowI(Expr, i32),
    PowF(Expr, f64),
    Sqrt(Expr),
    Exp(Expr),
    Ln(Expr),
}

/// An evaluable scalar field on a chart (a "scalar jet field").
#[derive(Debug, Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    fn node(n: Node) -> Self {
        Expr(Arc::new(n))
    }

    pub fn constant(v: f64) -> Self {
        Self::node(Node::Const(v))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// Coordinate `x_{index+1}` (zero-based index).
    pub fn var(index: usize) -> Self {
        Self::node(Node::Var(index))
    }

    pub fn powi(&self, p: i32) -> Self {
        Self::node(Node::PowI(self.clone(), p))
    }

    pub fn powf(&self, p: f64) -> Self {
        Self::node(Node::PowF(self.clone(), p))
    }

    pub fn sqrt(&self) -> Self {
        Self::node(Node::Sqrt(self.clone()))
    }

    pub fn exp(&self) -> Self {
        Self::node(Node::Exp(self.clone()))
    }

    pub fn ln(&self) -> Self {
        Self::node(Node::Ln(self.clone()))
    }

    pub fn as_constant(&self) -> Option<f64> {
        match &*self.0 {
            Node::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    /// Largest variable index referenced, plus one.
    pub fn arity(&self) -> usize {
        match &*self.0 {
            Node::Const(_) => 0,
            Node::Var(i) => i + 1,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.arity().max(b.arity())
            }
            Node::Neg(a) | Node::PowI(a, _) | Node::PowF(a, _) | Node::Sqrt(a) | Node::Exp(a) | Node::Ln(a) => {
                a.arity()
            }
        }
    }

    /// Jet of the expression at `point` up to total order `order`, in
    /// `point.len()` variables.
    pub fn jet(&self, point: &[f64], order: usize) -> Result<Jet> {
        Jet::check_order(order)?;
        let vars: Vec<Jet> =
            (0..point.len()).map(|i| Jet::variable(point.len(), order, i, point[i])).collect();
        self.jet_with(&vars)
    }

    /// Evaluates with the given jets substituted for the variables.
    pub fn jet_with(&self, vars: &[Jet]) -> Result<Jet> {
        let template = vars.first().ok_or_else(|| Error::Shape("no variables".into()))?;
        self.eval_rec(vars, template)
    }

    fn eval_rec(&self, vars: &[Jet], template: &Jet) -> Result<Jet> {
        Ok(match &*self.0 {
            Node::Const(v) => template.constant_like(*v),
            Node::Var(i) => vars
                .get(*i)
                .cloned()
                .ok_or_else(|| Error::Shape(format!("variable x{} out of range", i + 1)))?,
            Node::Add(a, b) => a.eval_rec(vars, template)? + b.eval_rec(vars, template)?,
            Node::Sub(a, b) => a.eval_rec(vars, template)? - b.eval_rec(vars, template)?,
            Node::Mul(a, b) => a.eval_rec(vars, template)? * b.eval_rec(vars, template)?,
            Node::Div(a, b) => a.eval_rec(vars, template)?.div_jet(&b.eval_rec(vars, template)?)?,
            Node::Neg(a) => -a.eval_rec(vars, template)?,
            Node::PowI(a, p) => a.eval_rec(vars, template)?.powi(*p)?,
            Node::PowF(a, p) => a.eval_rec(vars, template)?.powf(*p)?,
            Node::Sqrt(a) => a.eval_rec(vars, template)?.sqrt()?,
            Node::Exp(a) => a.eval_rec(vars, template)?.exp(),
            Node::Ln(a) => a.eval_rec(vars, template)?.ln()?,
        })
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        Ok(self.jet(point, 0)?.value())
    }

    /// Parses an expression in the coordinates `x1..x{nvars}`.
    pub fn parse(src: &str, nvars: usize) -> Result<Self> {
        Parser::new(src, nvars, 0)?.parse_all()
    }

    /// Parses an expression on the bundle chart: `x1..xn` are base
    /// coordinates (indices `0..n`), `p1..pn` fiber coordinates (`n..2n`).
    pub fn parse_bundle(src: &str, n: usize) -> Result<Self> {
        Parser::new(src, n, n)?.parse_all()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(v) => {
                if *v < 0.0 {
                    write!(f, "({v:?})")
                } else {
                    write!(f, "{v:?}")
                }
            }
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::PowI(a, p) => write!(f, "({a}^({p}))"),
            Node::PowF(a, p) => write!(f, "({a}^({p:?}))"),
            Node::Sqrt(a) => write!(f, "sqrt({a})"),
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Ln(a) => write!(f, "log({a})"),
        }
    }
}

macro_rules! expr_binop {
    ($tr:ident, $method:ident, $variant:ident) => {
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::node(Node::$variant(self, rhs))
            }
        }
        impl $tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::node(Node::$variant(self.clone(), rhs.clone()))
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::node(Node::$variant(self, Expr::constant(rhs)))
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::node(Node::$variant(Expr::constant(self), rhs))
            }
        }
    };
}

expr_binop!(Add, add, Add);
expr_binop!(Sub, sub, Sub);
expr_binop!(Mul, mul, Mul);
expr_binop!(Div, div, Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::node(Node::Neg(self))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    base: usize,
    fiber: usize,
}

impl Parser {
    fn new(src: &str, base: usize, fiber: usize) -> Result<Self> {
        Ok(Parser { tokens: tokenize(src)?, pos: 0, base, fiber })
    }

    fn parse_all(mut self) -> Result<Expr> {
        if self.tokens.is_empty() {
            return Err(Error::Parse("empty expression".into()));
        }
        let e = self.expr()?;
        if self.pos != self.tokens.len() {
            return Err(Error::Parse(format!("unexpected token {:?}", self.tokens[self.pos])));
        }
        Ok(e)
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat_op(&mut self, c: char) -> bool {
        if self.peek() == Some(&Token::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = lhs + self.term()?;
            } else if self.eat_op('-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = lhs * self.unary()?;
            } else if self.eat_op('/') {
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat_op('-') {
            return Ok(-self.unary()?);
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if !self.eat_op('^') {
            return Ok(base);
        }
        let exponent = self.unary()?;
        let p = fold_constant(&exponent)
            .ok_or_else(|| Error::Parse("exponent must be a constant expression".into()))?;
        if p.fract() == 0.0 && p.abs() < 1e6 {
            Ok(base.powi(p as i32))
        } else {
            Ok(base.powf(p))
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self.peek().cloned().ok_or_else(|| Error::Parse("unexpected end of input".into()))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Expr::constant(v)),
            Token::Op('(') => {
                let e = self.expr()?;
                if !self.eat_op(')') {
                    return Err(Error::Parse("missing ')'".into()));
                }
                Ok(e)
            }
            Token::Ident(name) => match name.as_str() {
                "sqrt" | "exp" | "log" => {
                    if !self.eat_op('(') {
                        return Err(Error::Parse(format!("expected '(' after {name}")));
                    }
                    let arg = self.expr()?;
                    if !self.eat_op(')') {
                        return Err(Error::Parse("missing ')'".into()));
                    }
                    Ok(match name.as_str() {
                        "sqrt" => arg.sqrt(),
                        "exp" => arg.exp(),
                        _ => arg.ln(),
                    })
                }
                _ => self.variable(&name),
            },
            Token::Op(c) => Err(Error::Parse(format!("unexpected '{c}'"))),
        }
    }

    fn variable(&self, name: &str) -> Result<Expr> {
        let (prefix, digits) = name.split_at(1);
        let idx: usize = digits
            .parse()
            .map_err(|_| Error::Parse(format!("unknown identifier '{name}'")))?;
        match prefix {
            "x" if (1..=self.base).contains(&idx) => Ok(Expr::var(idx - 1)),
            "p" if (1..=self.fiber).contains(&idx) => Ok(Expr::var(self.base + idx - 1)),
            _ => Err(Error::Parse(format!("unknown identifier '{name}'"))),
        }
    }
}

fn fold_constant(e: &Expr) -> Option<f64> {
    Some(match &*e.0 {
        Node::Const(v) => *v,
        Node::Var(_) => return None,
        Node::Add(a, b) => fold_constant(a)? + fold_constant(b)?,
        Node::Sub(a, b) => fold_constant(a)? - fold_constant(b)?,
        Node::Mul(a, b) => fold_constant(a)? * fold_constant(b)?,
        Node::Div(a, b) => fold_constant(a)? / fold_constant(b)?,
        Node::Neg(a) => -fold_constant(a)?,
        Node::PowI(a, p) => fold_constant(a)?.powi(*p),
        Node::PowF(a, p) => fold_constant(a)?.powf(*p),
        Node::Sqrt(a) => fold_constant(a)?.sqrt(),
        Node::Exp(a) => fold_constant(a)?.exp(),
        Node::Ln(a) => fold_constant(a)?.ln(),
    })
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // scientific notation
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse().map_err(|_| Error::Parse(format!("bad number '{text}'")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}
