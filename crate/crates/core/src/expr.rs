//! Arithmetic expressions over named ciphertexts.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr     = term , { ( "+" | "-" ) , term } ;
//! term     = unary , { "*" , unary } ;
//! unary    = "-" , unary | power ;
//! power    = atom , [ "^" , exponent ] ;
//! exponent = integer , [ "^" , exponent ] ;      (* right associative *)
//! atom     = integer | identifier | "(" , expr , ")" ;
//! integer  = digit , { digit } ;
//! identifier = ( letter | "_" ) , { letter | digit | "_" } ;
//! ```
//!
//! Exponents are nonnegative integer literals; `x^y` with a variable
//! exponent is a syntax error.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Lit(BigInt),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    pub fn lit(v: impl Into<BigInt>) -> Self {
        Expr::Lit(v.into())
    }

    pub fn var(name: &str) -> Self {
        Expr::Var(name.to_string())
    }

    /// Variable names in first-seen order, deduplicated.
    pub fn variables(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Var(name) = e {
                if seen.insert(name.clone()) {
                    out.push(name.clone());
                }
            }
        });
        out
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Lit(_) | Expr::Var(_) => {}
            Expr::Neg(x) | Expr::Pow(x, _) => x.visit(f),
            Expr::Add(x, y) | Expr::Sub(x, y) | Expr::Mul(x, y) => {
                x.visit(f);
                y.visit(f);
            }
        }
    }

    /// Plaintext evaluation; `None` if a variable is unbound.
    pub fn eval_plain(&self, env: &HashMap<String, BigInt>) -> Option<BigInt> {
        Some(match self {
            Expr::Lit(v) => v.clone(),
            Expr::Var(name) => env.get(name)?.clone(),
            Expr::Neg(x) => -x.eval_plain(env)?,
            Expr::Add(x, y) => x.eval_plain(env)? + y.eval_plain(env)?,
            Expr::Sub(x, y) => x.eval_plain(env)? - y.eval_plain(env)?,
            Expr::Mul(x, y) => x.eval_plain(env)? * y.eval_plain(env)?,
            Expr::Pow(x, k) => num_traits::Pow::pow(x.eval_plain(env)?, *k),
        })
    }

    /// Tree depth; a lone literal or variable has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Lit(_) | Expr::Var(_) => 0,
            Expr::Neg(x) | Expr::Pow(x, _) => 1 + x.depth(),
            Expr::Add(x, y) | Expr::Sub(x, y) | Expr::Mul(x, y) => 1 + x.depth().max(y.depth()),
        }
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized form; reparses to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) if v.sign() == num_bigint::Sign::Minus => write!(f, "(-{})", v.magnitude()),
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Var(name) => f.write_str(name),
            Expr::Neg(x) => write!(f, "(-{x})"),
            Expr::Add(x, y) => write!(f, "({x} + {y})"),
            Expr::Sub(x, y) => write!(f, "({x} - {y})"),
            Expr::Mul(x, y) => write!(f, "({x} * {y})"),
            Expr::Pow(x, k) => write!(f, "({x}^{k})"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("syntax error at column {}: {message}", .position + 1)]
pub struct ParseError {
    /// Byte offset into the input.
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    End,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Int(v) => write!(f, "integer {v}"),
            Token::Ident(s) => write!(f, "identifier `{s}`"),
            Token::Plus => f.write_str("`+`"),
            Token::Minus => f.write_str("`-`"),
            Token::Star => f.write_str("`*`"),
            Token::Caret => f.write_str("`^`"),
            Token::LParen => f.write_str("`(`"),
            Token::RParen => f.write_str("`)`"),
            Token::End => f.write_str("end of input"),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Token::Plus,
            b'-' => Token::Minus,
            b'*' => Token::Star,
            b'^' => Token::Caret,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                out.push((Token::Int(text[start..i].parse().expect("digits")), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Token::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().expect("in bounds");
                return Err(ParseError {
                    position: start,
                    message: format!("unknown token `{ch}`"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Token::End, text.len()));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error<T>(&self, message: String) -> Result<T, ParseError> {
        Err(ParseError {
            position: self.offset(),
            message,
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Token::Plus => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Token::Star {
            self.bump();
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Token::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Token::Caret {
            self.bump();
            let k = self.exponent()?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<u32, ParseError> {
        let at = self.offset();
        let base = match self.bump() {
            Token::Int(v) => v,
            other => {
                return Err(ParseError {
                    position: at,
                    message: format!("exponent must be a nonnegative integer literal, found {other}"),
                })
            }
        };
        let value = if *self.peek() == Token::Caret {
            self.bump();
            let inner = self.exponent()?;
            num_traits::Pow::pow(&base, inner)
        } else {
            base
        };
        u32::try_from(&value).map_err(|_| ParseError {
            position: at,
            message: format!("exponent {value} is too large"),
        })
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.bump() {
            Token::Int(v) => Ok(Expr::Lit(v)),
            Token::Ident(name) => Ok(Expr::Var(name)),
            Token::LParen => {
                let inner = self.expr()?;
                if *self.peek() != Token::RParen {
                    return self.error(format!("expected `)` to close `(` at column {}, found {}", at + 1, self.peek()));
                }
                self.bump();
                Ok(inner)
            }
            other => Err(ParseError {
                position: at,
                message: format!("expected a number, variable or `(`, found {other}"),
            }),
        }
    }
}

pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut parser = Parser {
        tokens: tokenize(text)?,
        pos: 0,
    };
    let expr = parser.expr()?;
    if *parser.peek() != Token::End {
        return parser.error(format!("unexpected {}", parser.peek()));
    }
    Ok(expr)
}
