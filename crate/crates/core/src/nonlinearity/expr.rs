//! Expression trees for scalar nonlinearities `f(s)`.
//!
//! Grammar (whitespace is ignored between tokens):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?              (right associative)
//! atom    := number | 's' | 'e'
//!          | ('log' | 'exp') '(' expr ')'
//!          | 'max' '(' expr ',' expr ')'
//!          | '(' expr ')'
//! number  := digits ['.' digits] [('e' | 'E') ['+' | '-'] digits]
//! ```
//!
//! `e` is Euler's number and `log` is the natural logarithm. An `e` directly
//! after a mantissa is read as an exponent marker only when a digit (or a sign
//! followed by a digit) comes next, so `2e3` is 2000 while `2*e` is 2e.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var,
    Euler,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Exp(Box<Node>),
    Log(Box<Node>),
    Max(Box<Node>, Box<Node>),
}

impl Node {
    pub fn constant(v: f64) -> Node {
        Node::Const(v)
    }

    pub fn pow(base: Node, exponent: Node) -> Node {
        Node::Pow(Box::new(base), Box::new(exponent))
    }

    pub fn mul(a: Node, b: Node) -> Node {
        Node::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Node, b: Node) -> Node {
        Node::Div(Box::new(a), Box::new(b))
    }

    pub fn add(a: Node, b: Node) -> Node {
        Node::Add(Box::new(a), Box::new(b))
    }

    pub fn log(a: Node) -> Node {
        Node::Log(Box::new(a))
    }

    pub fn max(a: Node, b: Node) -> Node {
        Node::Max(Box::new(a), Box::new(b))
    }

    /// Evaluates the tree at `s`, allowing negative intermediate and final
    /// values. NaN-producing operations are reported as domain errors.
    pub fn eval(&self, s: f64) -> Result<f64> {
        let v = match self {
            Node::Const(c) => *c,
            Node::Var => s,
            Node::Euler => std::f64::consts::E,
            Node::Neg(a) => -a.eval(s)?,
            Node::Add(a, b) => a.eval(s)? + b.eval(s)?,
            Node::Sub(a, b) => a.eval(s)? - b.eval(s)?,
            Node::Mul(a, b) => {
                let x = a.eval(s)?;
                let y = b.eval(s)?;
                // 0 * inf only arises from overflow in the other factor.
                if x == 0.0 || y == 0.0 {
                    0.0
                } else {
                    x * y
                }
            }
            Node::Div(a, b) => {
                let x = a.eval(s)?;
                let y = b.eval(s)?;
                if y == 0.0 {
                    return Err(domain(s, "division by zero"));
                }
                x / y
            }
            Node::Pow(a, b) => {
                let x = a.eval(s)?;
                let y = b.eval(s)?;
                if x < 0.0 && y.fract() != 0.0 {
                    return Err(domain(s, "negative base with non-integer exponent"));
                }
                if x == 0.0 && y < 0.0 {
                    return Err(domain(s, "zero raised to a negative power"));
                }
                x.powf(y)
            }
            Node::Exp(a) => a.eval(s)?.exp(),
            Node::Log(a) => {
                let x = a.eval(s)?;
                if x <= 0.0 {
                    return Err(domain(s, "log of a non-positive argument"));
                }
                x.ln()
            }
            Node::Max(a, b) => {
                let x = a.eval(s)?;
                let y = b.eval(s)?;
                x.max(y)
            }
        };
        if v.is_nan() {
            return Err(domain(s, "undefined value (NaN)"));
        }
        Ok(v)
    }
}

fn domain(s: f64, message: &str) -> Error {
    Error::Domain {
        s,
        message: message.to_string(),
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) if *c < 0.0 => write!(f, "(-{})", -c),
            Node::Const(c) => write!(f, "{c}"),
            Node::Var => write!(f, "s"),
            Node::Euler => write!(f, "e"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Pow(a, b) => write!(f, "({a}^{b})"),
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Log(a) => write!(f, "log({a})"),
            Node::Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}

/// A parsed nonlinearity together with the text it came from.
///
/// The tree is shared, so clones are cheap and safe to send across threads.
#[derive(Debug, Clone)]
pub struct NonlinearityExpr {
    root: Arc<Node>,
    source_text: String,
}

impl NonlinearityExpr {
    pub fn parse(text: &str) -> Result<Self> {
        let root = Parser::new(text).parse_all()?;
        Ok(Self {
            root: Arc::new(root),
            source_text: text.to_string(),
        })
    }

    pub fn from_node(root: Node, source_text: impl Into<String>) -> Self {
        Self {
            root: Arc::new(root),
            source_text: source_text.into(),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    /// Canonical, fully parenthesised rendering. Parsing it back yields a tree
    /// that evaluates identically.
    pub fn canonical(&self) -> String {
        self.root.to_string()
    }

    /// `f(s)` for `s >= 0`. Negative results and undefined values are errors;
    /// overflow is returned as `+inf`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(domain(s, "argument must be non-negative"));
        }
        let v = self.root.eval(s)?;
        if v < 0.0 {
            return Err(domain(s, "negative value"));
        }
        Ok(v)
    }

    /// Like [`eval`](Self::eval) but lets negative values through; used by the
    /// audit, which reports sign problems instead of failing on them.
    pub fn eval_signed(&self, s: f64) -> Result<f64> {
        self.root.eval(s)
    }

    pub fn is_zero_function(&self) -> bool {
        matches!(*self.root, Node::Const(c) if c == 0.0)
    }
}

impl fmt::Display for NonlinearityExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source_text)
    }
}

impl Serialize for NonlinearityExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.source_text)
    }
}

impl<'de> Deserialize<'de> for NonlinearityExpr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        NonlinearityExpr::parse(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
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
    End,
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    peeked: Option<(usize, Token)>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            text,
            bytes: text.as_bytes(),
            pos: 0,
            peeked: None,
        }
    }

    fn parse_all(&mut self) -> Result<Node> {
        let node = self.expr()?;
        let (at, tok) = self.next()?;
        if tok != Token::End {
            return Err(syntax(at, format!("unexpected {}", describe(&tok))));
        }
        Ok(node)
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            match self.peek()? {
                Token::Plus => {
                    self.next()?;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.next()?;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek()? {
                Token::Star => {
                    self.next()?;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Token::Slash => {
                    self.next()?;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.peek()? == Token::Minus {
            self.next()?;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek()? == Token::Caret {
            self.next()?;
            let exponent = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let (at, tok) = self.next()?;
        match tok {
            Token::Num(v) => Ok(Node::Const(v)),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            Token::Ident(name) => match name.as_str() {
                "s" => Ok(Node::Var),
                "e" => Ok(Node::Euler),
                "log" | "exp" => {
                    self.expect(Token::LParen)?;
                    let arg = self.expr()?;
                    self.expect(Token::RParen)?;
                    Ok(if name == "log" {
                        Node::Log(Box::new(arg))
                    } else {
                        Node::Exp(Box::new(arg))
                    })
                }
                "max" => {
                    self.expect(Token::LParen)?;
                    let a = self.expr()?;
                    self.expect(Token::Comma)?;
                    let b = self.expr()?;
                    self.expect(Token::RParen)?;
                    Ok(Node::Max(Box::new(a), Box::new(b)))
                }
                _ => Err(Error::UnknownIdentifier { offset: at, name }),
            },
            other => Err(syntax(at, format!("expected an operand, found {}", describe(&other)))),
        }
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        let (at, tok) = self.next()?;
        if tok == want {
            Ok(())
        } else {
            Err(syntax(
                at,
                format!("expected {}, found {}", describe(&want), describe(&tok)),
            ))
        }
    }

    fn peek(&mut self) -> Result<Token> {
        if self.peeked.is_none() {
            let t = self.lex()?;
            self.peeked = Some(t);
        }
        Ok(self.peeked.as_ref().map(|(_, t)| t.clone()).unwrap_or(Token::End))
    }

    fn next(&mut self) -> Result<(usize, Token)> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lex(),
        }
    }

    fn lex(&mut self) -> Result<(usize, Token)> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = self.bytes.get(self.pos) else {
            return Ok((start, Token::End));
        };
        let single = match c {
            b'+' => Some(Token::Plus),
            b'-' => Some(Token::Minus),
            b'*' => Some(Token::Star),
            b'/' => Some(Token::Slash),
            b'^' => Some(Token::Caret),
            b'(' => Some(Token::LParen),
            b')' => Some(Token::RParen),
            b',' => Some(Token::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            self.pos += 1;
            return Ok((start, tok));
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self.pos < self.bytes.len()
                && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
            {
                self.pos += 1;
            }
            return Ok((start, Token::Ident(self.text[start..self.pos].to_string())));
        }
        let ch = self.text[start..].chars().next().unwrap_or('?');
        Err(syntax(start, format!("unexpected character `{ch}`")))
    }

    fn number(&mut self, start: usize) -> Result<(usize, Token)> {
        let digits = |p: &mut usize, b: &[u8]| {
            let s = *p;
            while *p < b.len() && b[*p].is_ascii_digit() {
                *p += 1;
            }
            *p - s
        };
        let mut n = digits(&mut self.pos, self.bytes);
        if self.bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(&mut self.pos, self.bytes);
        }
        if n == 0 {
            return Err(syntax(start, "malformed number".to_string()));
        }
        if matches!(self.bytes.get(self.pos), Some(b'e') | Some(b'E')) {
            let mut look = self.pos + 1;
            if matches!(self.bytes.get(look), Some(b'+') | Some(b'-')) {
                look += 1;
            }
            if self.bytes.get(look).is_some_and(|b| b.is_ascii_digit()) {
                self.pos = look;
                digits(&mut self.pos, self.bytes);
            }
        }
        let lit = &self.text[start..self.pos];
        lit.parse::<f64>()
            .map(|v| (start, Token::Num(v)))
            .map_err(|_| syntax(start, format!("malformed number `{lit}`")))
    }
}

fn syntax(offset: usize, message: String) -> Error {
    Error::Syntax { offset, message }
}

fn describe(tok: &Token) -> String {
    match tok {
        Token::Num(v) => format!("number {v}"),
        Token::Ident(name) => format!("identifier `{name}`"),
        Token::Plus => "`+`".into(),
        Token::Minus => "`-`".into(),
        Token::Star => "`*`".into(),
        Token::Slash => "`/`".into(),
        Token::Caret => "`^`".into(),
        Token::LParen => "`(`".into(),
        Token::RParen => "`)`".into(),
        Token::Comma => "`,`".into(),
        Token::End => "end of input".into(),
    }
}
