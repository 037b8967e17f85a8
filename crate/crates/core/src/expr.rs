//! The fixed expression vocabulary for pointwise cocycles on the torus.
//!
//! A matrix expression is a product of factors
//!
//! ```text
//! rot(s)  diag(s, s)  shear(s)  scale(s)  mat(s, s, s, s)  id
//! ```
//!
//! where each `s` is a scalar expression over the coordinates `u`, `v`, the
//! constant `pi`, numeric literals, `+ - * / ^`, parentheses and the
//! functions `sin`, `cos`, `exp`. For example `rot(2*pi*u) * diag(2, 0.5)`.

use std::fmt;

use crate::error::{LabError, Result};
use crate::matrix::Matrix2;

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Num(f64),
    U,
    V,
    Pi,
    Neg(Box<Scalar>),
    Bin(Op, Box<Scalar>, Box<Scalar>),
    Call(Func, Box<Scalar>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Identity,
    Rot(Scalar),
    Diag(Scalar, Scalar),
    Shear(Scalar),
    Scale(Scalar),
    Mat([Scalar; 4]),
}

/// A parsed matrix-valued expression in `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixExpr {
    factors: Vec<Factor>,
}

impl Scalar {
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        match self {
            Scalar::Num(x) => *x,
            Scalar::U => u,
            Scalar::V => v,
            Scalar::Pi => std::f64::consts::PI,
            Scalar::Neg(a) => -a.eval(u, v),
            Scalar::Bin(op, a, b) => {
                let (x, y) = (a.eval(u, v), b.eval(u, v));
                match op {
                    Op::Add => x + y,
                    Op::Sub => x - y,
                    Op::Mul => x * y,
                    Op::Div => x / y,
                    Op::Pow => x.powf(y),
                }
            }
            Scalar::Call(f, a) => {
                let x = a.eval(u, v);
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                }
            }
        }
    }
}

impl Factor {
    fn eval(&self, u: f64, v: f64) -> Matrix2 {
        match self {
            Factor::Identity => Matrix2::IDENTITY,
            Factor::Rot(a) => Matrix2::rotation(a.eval(u, v)),
            Factor::Diag(a, b) => Matrix2::diag(a.eval(u, v), b.eval(u, v)),
            Factor::Shear(a) => Matrix2::new(1.0, a.eval(u, v), 0.0, 1.0),
            Factor::Scale(a) => {
                let s = a.eval(u, v);
                Matrix2::diag(s, s)
            }
            Factor::Mat([a, b, c, d]) => Matrix2::new(a.eval(u, v), b.eval(u, v), c.eval(u, v), d.eval(u, v)),
        }
    }
}

impl MatrixExpr {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let expr = p.matrix()?;
        if p.pos != p.tokens.len() {
            return Err(LabError::Expression(format!("unexpected trailing input in {src:?}")));
        }
        Ok(expr)
    }

    pub fn eval(&self, u: f64, v: f64) -> Matrix2 {
        self.factors.iter().fold(Matrix2::IDENTITY, |acc, f| acc * f.eval(u, v))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Sym(char),
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
            let value = text
                .parse::<f64>()
                .map_err(|_| LabError::Expression(format!("bad number {text:?}")))?;
            out.push(Token::Num(value));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "()+-*/^,".contains(c) {
            out.push(Token::Sym(c));
            i += 1;
        } else {
            return Err(LabError::Expression(format!("unexpected character {c:?}")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Token::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(LabError::Expression(format!("expected {c:?} at token {}", self.pos)))
        }
    }

    fn matrix(&mut self) -> Result<MatrixExpr> {
        let mut factors = vec![self.factor()?];
        while self.eat('*') {
            factors.push(self.factor()?);
        }
        Ok(MatrixExpr { factors })
    }

    fn args(&mut self, n: usize) -> Result<Vec<Scalar>> {
        self.expect('(')?;
        let mut args = vec![self.expr()?];
        for _ in 1..n {
            self.expect(',')?;
            args.push(self.expr()?);
        }
        self.expect(')')?;
        Ok(args)
    }

    fn factor(&mut self) -> Result<Factor> {
        let name = match self.next() {
            Some(Token::Ident(name)) => name,
            other => return Err(LabError::Expression(format!("expected a matrix factor, found {other:?}"))),
        };
        let factor = match name.as_str() {
            "id" => Factor::Identity,
            "rot" => Factor::Rot(self.args(1)?.remove(0)),
            "shear" => Factor::Shear(self.args(1)?.remove(0)),
            "scale" => Factor::Scale(self.args(1)?.remove(0)),
            "diag" => {
                let mut a = self.args(2)?.into_iter();
                Factor::Diag(a.next().unwrap(), a.next().unwrap())
            }
            "mat" => {
                let mut a = self.args(4)?.into_iter();
                Factor::Mat([a.next().unwrap(), a.next().unwrap(), a.next().unwrap(), a.next().unwrap()])
            }
            other => return Err(LabError::Expression(format!("unknown matrix factor {other:?}"))),
        };
        Ok(factor)
    }

    fn expr(&mut self) -> Result<Scalar> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                Op::Add
            } else if self.eat('-') {
                Op::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Scalar::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Scalar> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                Op::Mul
            } else if self.eat('/') {
                Op::Div
            } else {
                return Ok(lhs);
            };
            lhs = Scalar::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Scalar> {
        if self.eat('-') {
            return Ok(Scalar::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Scalar::Bin(Op::Pow, Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Scalar> {
        match self.next() {
            Some(Token::Num(x)) => Ok(Scalar::Num(x)),
            Some(Token::Sym('(')) => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "u" => Ok(Scalar::U),
                "v" => Ok(Scalar::V),
                "pi" => Ok(Scalar::Pi),
                "sin" | "cos" | "exp" => {
                    let f = match name.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        _ => Func::Exp,
                    };
                    let arg = self.args(1)?.remove(0);
                    Ok(Scalar::Call(f, Box::new(arg)))
                }
                other => Err(LabError::Expression(format!("unknown identifier {other:?}"))),
            },
            other => Err(LabError::Expression(format!("unexpected token {other:?}"))),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Num(x) => write!(f, "{x:?}"),
            Scalar::U => write!(f, "u"),
            Scalar::V => write!(f, "v"),
            Scalar::Pi => write!(f, "pi"),
            Scalar::Neg(a) => write!(f, "(-{a})"),
            Scalar::Bin(op, a, b) => {
                let s = match op {
                    Op::Add => "+",
                    Op::Sub => "-",
                    Op::Mul => "*",
                    Op::Div => "/",
                    Op::Pow => "^",
                };
                write!(f, "({a} {s} {b})")
            }
            Scalar::Call(func, a) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                };
                write!(f, "{name}({a})")
            }
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Identity => write!(f, "id"),
            Factor::Rot(a) => write!(f, "rot({a})"),
            Factor::Diag(a, b) => write!(f, "diag({a}, {b})"),
            Factor::Shear(a) => write!(f, "shear({a})"),
            Factor::Scale(a) => write!(f, "scale({a})"),
            Factor::Mat([a, b, c, d]) => write!(f, "mat({a}, {b}, {c}, {d})"),
        }
    }
}

impl fmt::Display for MatrixExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, factor) in self.factors.iter().enumerate() {
            if i > 0 {
                write!(f, " * ")?;
            }
            write!(f, "{factor}")?;
        }
        Ok(())
    }
}
