//! Operator expressions such as `-0.5 * y` or `(a + 0.5 * adag)^2`.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' integer)?
//! atom   := number | 'i' | 'pi' | 'a' | 'adag' | 'x' | 'y' | 'n' | 'I' | '(' expr ')'
//! ```
//!
//! Division is only allowed by a scalar.

use std::fmt;

use crate::fock::{annihilation, creation, number, quadratures, Operator, Space, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct ExprError {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (at column {})", self.message, self.position + 1)
    }
}

impl std::error::Error for ExprError {}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent: 1e-3, 2.5E+4
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
            let v = text.parse::<f64>().map_err(|_| ExprError {
                position: start,
                message: format!("bad number `{text}`"),
            })?;
            out.push((start, Token::Num(v)));
        } else if ch.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push((start, Token::Ident(chars[start..i].iter().collect())));
        } else if "+-*/^()".contains(ch) {
            out.push((i, Token::Op(ch)));
            i += 1;
        } else {
            return Err(ExprError {
                position: i,
                message: format!("unexpected character `{ch}`"),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
enum Value {
    Scalar(C64),
    Op(Operator),
}

impl Value {
    fn into_op(self, space: &Space) -> Operator {
        match self {
            Value::Scalar(s) => Operator::identity(space) * s,
            Value::Op(o) => o,
        }
    }
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    space: &'a Space,
    len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map(|(p, _)| *p).unwrap_or(self.len)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError {
            position: self.here(),
            message: message.into(),
        })
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Value, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                let rhs = self.term()?;
                lhs = self.add(lhs, rhs, 1.0);
            } else if self.eat('-') {
                let rhs = self.term()?;
                lhs = self.add(lhs, rhs, -1.0);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn add(&self, lhs: Value, rhs: Value, sign: f64) -> Value {
        match (lhs, rhs) {
            (Value::Scalar(a), Value::Scalar(b)) => Value::Scalar(a + b * sign),
            (l, r) => Value::Op(&l.into_op(self.space) + &(r.into_op(self.space) * sign)),
        }
    }

    fn term(&mut self) -> Result<Value, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                let rhs = self.unary()?;
                lhs = match (lhs, rhs) {
                    (Value::Scalar(a), Value::Scalar(b)) => Value::Scalar(a * b),
                    (Value::Scalar(s), Value::Op(o)) | (Value::Op(o), Value::Scalar(s)) => Value::Op(o * s),
                    (Value::Op(p), Value::Op(q)) => Value::Op(&p * &q),
                };
            } else if self.eat('/') {
                let at = self.here();
                let rhs = self.unary()?;
                let Value::Scalar(s) = rhs else {
                    return Err(ExprError {
                        position: at,
                        message: "can only divide by a scalar".into(),
                    });
                };
                if s.norm() == 0.0 {
                    return Err(ExprError {
                        position: at,
                        message: "division by zero".into(),
                    });
                }
                lhs = match lhs {
                    Value::Scalar(a) => Value::Scalar(a / s),
                    Value::Op(o) => Value::Op(o * (C64::new(1.0, 0.0) / s)),
                };
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Value, ExprError> {
        if self.eat('-') {
            return Ok(match self.unary()? {
                Value::Scalar(s) => Value::Scalar(-s),
                Value::Op(o) => Value::Op(-o),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Value, ExprError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let k = match self.peek() {
            Some(Token::Num(v)) if v.fract() == 0.0 && *v >= 0.0 && *v <= 64.0 => *v as u32,
            _ => return self.err("exponent must be a non-negative integer"),
        };
        self.pos += 1;
        Ok(match base {
            Value::Scalar(s) => Value::Scalar(s.powu(k)),
            Value::Op(o) => {
                let mut acc = Operator::identity(self.space);
                for _ in 0..k {
                    acc = &acc * &o;
                }
                Value::Op(acc)
            }
        })
    }

    fn atom(&mut self) -> Result<Value, ExprError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of expression");
        };
        let at = self.here();
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Value::Scalar(C64::new(v, 0.0))),
            Token::Op('(') => {
                let v = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected `)`");
                }
                Ok(v)
            }
            Token::Op(c) => Err(ExprError {
                position: at,
                message: format!("unexpected `{c}`"),
            }),
            Token::Ident(name) => {
                let op = |r: crate::error::Result<Operator>| {
                    r.map(Value::Op).map_err(|e| ExprError {
                        position: at,
                        message: e.to_string(),
                    })
                };
                match name.as_str() {
                    "i" => Ok(Value::Scalar(C64::new(0.0, 1.0))),
                    "pi" => Ok(Value::Scalar(C64::new(std::f64::consts::PI, 0.0))),
                    "I" => Ok(Value::Op(Operator::identity(self.space))),
                    "a" => op(annihilation(self.space)),
                    "adag" => op(creation(self.space)),
                    "n" => op(number(self.space)),
                    "x" => op(quadratures(self.space).map(|q| q.0)),
                    "y" => op(quadratures(self.space).map(|q| q.1)),
                    other => Err(ExprError {
                        position: at,
                        message: format!("unknown symbol `{other}` (expected a, adag, x, y, n, I, i or pi)"),
                    }),
                }
            }
        }
    }
}

/// Evaluate `src` as an operator on `space`. A bare scalar `s` means `s·I`.
pub fn parse_operator(src: &str, space: &Space) -> Result<Operator, ExprError> {
    let tokens = tokenize(src)?;
    if tokens.is_empty() {
        return Err(ExprError {
            position: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        tokens,
        pos: 0,
        space,
        len: src.chars().count(),
    };
    let v = p.expr()?;
    if p.pos != p.tokens.len() {
        return p.err("trailing input");
    }
    Ok(v.into_op(space))
}
