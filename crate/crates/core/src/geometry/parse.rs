//! Text syntax for regions.
//!
//! ```text
//! box(lower=[-1, -1], upper=[1, 1])      box(-1, 1)^2
//! ball(center=[0, 0], radius=1)          ball(1)^3
//! halfspace(normal=[1, 0], offset=0)
//! halfspaces(halfspace(...), halfspace(...))
//! intersect(box(0, 1)^2, ball(1)^2)
//! whole(2)                               R^2
//! ```
//!
//! `Display` on [`ConvexRegion`] prints the long keyword form, which
//! parses back to an equal region.

use std::fmt;

use nalgebra::DVector;

use super::{ConvexRegion, Halfspace, RegionKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Equals,
    Caret,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '(' => out.push((start, Token::LParen)),
            ')' => out.push((start, Token::RParen)),
            '[' => out.push((start, Token::LBracket)),
            ']' => out.push((start, Token::RBracket)),
            ',' => out.push((start, Token::Comma)),
            '=' => out.push((start, Token::Equals)),
            '^' => out.push((start, Token::Caret)),
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &src[start..i];
                let tok = match word {
                    "inf" | "infinity" => Token::Number(f64::INFINITY),
                    _ => Token::Ident(word.to_string()),
                };
                out.push((start, tok));
                continue;
            }
            c if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' => {
                i += 1;
                if matches!(c, '-' | '+') && src[i..].starts_with("inf") {
                    i += 3;
                    if src[i..].starts_with("inity") {
                        i += 5;
                    }
                    let v = if c == '-' { f64::NEG_INFINITY } else { f64::INFINITY };
                    out.push((start, Token::Number(v)));
                    continue;
                }
                while i < bytes.len() {
                    let d = bytes[i];
                    let sign_after_exp = matches!(d, b'+' | b'-') && matches!(bytes[i - 1], b'e' | b'E');
                    if d.is_ascii_digit() || d == b'.' || d == b'e' || d == b'E' || sign_after_exp {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| Error::RegionSyntax {
                    position: start,
                    message: format!("bad number '{text}'"),
                })?;
                out.push((start, Token::Number(v)));
                continue;
            }
            other => {
                return Err(Error::RegionSyntax { position: start, message: format!("unexpected character '{other}'") });
            }
        }
        i += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Value {
    Number(f64),
    List(Vec<f64>),
    Region(ConvexRegion),
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::RegionSyntax { position: self.offset(), message: message.into() })
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {want:?}"))
        }
    }

    fn number(&mut self) -> Result<f64> {
        match self.peek() {
            Some(Token::Number(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => self.err("expected a number"),
        }
    }

    fn list(&mut self) -> Result<Vec<f64>> {
        self.expect(Token::LBracket)?;
        let mut out = Vec::new();
        if self.peek() == Some(&Token::RBracket) {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            out.push(self.number()?);
            match self.peek() {
                Some(Token::Comma) => self.pos += 1,
                Some(Token::RBracket) => {
                    self.pos += 1;
                    return Ok(out);
                }
                _ => return self.err("expected ',' or ']'"),
            }
        }
    }

    fn value(&mut self) -> Result<Value> {
        match self.peek() {
            Some(Token::Number(_)) => Ok(Value::Number(self.number()?)),
            Some(Token::LBracket) => Ok(Value::List(self.list()?)),
            Some(Token::Ident(_)) => Ok(Value::Region(self.region()?)),
            _ => self.err("expected a value"),
        }
    }

    /// Positional and `key=value` arguments inside parentheses.
    fn args(&mut self) -> Result<(Vec<Value>, Vec<(String, Value)>)> {
        let mut positional = Vec::new();
        let mut named = Vec::new();
        self.expect(Token::LParen)?;
        if self.peek() == Some(&Token::RParen) {
            self.pos += 1;
            return Ok((positional, named));
        }
        loop {
            let is_named = matches!(self.peek(), Some(Token::Ident(_)))
                && self.tokens.get(self.pos + 1).map(|(_, t)| t) == Some(&Token::Equals);
            if is_named {
                let Some(Token::Ident(key)) = self.peek().cloned() else { unreachable!() };
                self.pos += 2;
                let v = self.value()?;
                named.push((key, v));
            } else {
                if !named.is_empty() {
                    return self.err("positional argument after named argument");
                }
                positional.push(self.value()?);
            }
            match self.peek() {
                Some(Token::Comma) => self.pos += 1,
                Some(Token::RParen) => {
                    self.pos += 1;
                    return Ok((positional, named));
                }
                _ => return self.err("expected ',' or ')'"),
            }
        }
    }

    fn power(&mut self) -> Result<Option<usize>> {
        if self.peek() != Some(&Token::Caret) {
            return Ok(None);
        }
        self.pos += 1;
        let v = self.number()?;
        if v < 1.0 || v.fract() != 0.0 || v > 1e6 {
            return self.err("exponent must be a positive integer");
        }
        Ok(Some(v as usize))
    }

    fn region(&mut self) -> Result<ConvexRegion> {
        let start = self.offset();
        let name = match self.peek() {
            Some(Token::Ident(s)) => s.clone(),
            _ => return self.err("expected a region name"),
        };
        self.pos += 1;
        let (positional, named) =
            if self.peek() == Some(&Token::LParen) { self.args()? } else { (Vec::new(), Vec::new()) };
        let power = self.power()?;
        let build = Build { start, name: &name, positional, named, power };
        build.finish()
    }
}

struct Build<'a> {
    start: usize,
    name: &'a str,
    positional: Vec<Value>,
    named: Vec<(String, Value)>,
    power: Option<usize>,
}

impl Build<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::RegionSyntax { position: self.start, message: format!("{}: {}", self.name, message.into()) })
    }

    /// Look up argument `key`, falling back to positional slot `slot`.
    fn arg(&self, key: &str, slot: usize) -> Option<&Value> {
        self.named.iter().find(|(k, _)| k == key).map(|(_, v)| v).or_else(|| self.positional.get(slot))
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.named.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, _)) => self.err(format!("unknown argument '{k}'")),
            None => Ok(()),
        }
    }

    /// Vector argument: a list, or a scalar broadcast over the `^n` power.
    fn vector(&self, key: &str, slot: usize) -> Result<DVector<f64>> {
        match (self.arg(key, slot), self.power) {
            (Some(Value::List(v)), None) => Ok(DVector::from_vec(v.clone())),
            (Some(Value::List(_)), Some(_)) => self.err("'^n' only applies to scalar arguments"),
            (Some(Value::Number(x)), Some(n)) => Ok(DVector::from_element(n, *x)),
            (Some(Value::Number(_)), None) => self.err(format!("scalar '{key}' needs a '^n' dimension")),
            _ => self.err(format!("missing vector argument '{key}'")),
        }
    }

    fn scalar(&self, key: &str, slot: usize) -> Result<f64> {
        match self.arg(key, slot) {
            Some(Value::Number(x)) => Ok(*x),
            _ => self.err(format!("missing number argument '{key}'")),
        }
    }

    fn regions(&self) -> Result<Vec<ConvexRegion>> {
        if !self.named.is_empty() {
            return self.err("takes only positional region arguments");
        }
        self.positional
            .iter()
            .map(|v| match v {
                Value::Region(r) => Ok(r.clone()),
                _ => self.err("arguments must be regions"),
            })
            .collect()
    }

    fn finish(self) -> Result<ConvexRegion> {
        match self.name {
            "whole" | "R" | "whole_space" => {
                self.check_keys(&["n", "dim"])?;
                let n = match (self.arg("n", 0).or_else(|| self.arg("dim", 0)), self.power) {
                    (Some(Value::Number(v)), None) if *v >= 1.0 && v.fract() == 0.0 => *v as usize,
                    (None, Some(n)) => n,
                    _ => return self.err("expects a dimension, as whole(n) or R^n"),
                };
                ConvexRegion::whole_space(n)
            }
            "box" => {
                self.check_keys(&["lower", "upper"])?;
                ConvexRegion::boxed(self.vector("lower", 0)?, self.vector("upper", 1)?)
            }
            "ball" => {
                self.check_keys(&["center", "radius"])?;
                if let (Some(n), None, 1) = (self.power, self.arg("center", usize::MAX), self.positional.len()) {
                    let r = self.scalar("radius", 0)?;
                    return ConvexRegion::ball(DVector::zeros(n), r);
                }
                ConvexRegion::ball(self.vector("center", 0)?, self.scalar("radius", 1)?)
            }
            "halfspace" => {
                self.check_keys(&["normal", "offset"])?;
                ConvexRegion::halfspace(self.vector("normal", 0)?, self.scalar("offset", 1)?)
            }
            "halfspaces" => {
                let mut list = Vec::new();
                for r in self.regions()? {
                    match r.kind {
                        RegionKind::Halfspaces(hs) => list.extend(hs),
                        _ => return self.err("arguments must be halfspaces"),
                    }
                }
                ConvexRegion::halfspaces(list)
            }
            "intersect" | "intersection" => ConvexRegion::intersection(self.regions()?),
            other => self.err(format!(
                "unknown region '{other}' (expected box, ball, halfspace, halfspaces, intersect, whole)"
            )),
        }
    }
}

/// Parse a region from its text form.
pub fn parse_region(src: &str) -> Result<ConvexRegion> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0, end: src.len() };
    let region = p.region()?;
    if p.pos != p.tokens.len() {
        return p.err("trailing input");
    }
    Ok(region)
}

impl std::str::FromStr for ConvexRegion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_region(s)
    }
}

struct List<'a>(&'a DVector<f64>);

impl fmt::Display for List<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v:?}")?;
        }
        write!(f, "]")
    }
}

impl fmt::Display for Halfspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "halfspace(normal={}, offset={:?})", List(&self.normal), self.offset)
    }
}

impl fmt::Display for ConvexRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            RegionKind::WholeSpace => write!(f, "whole({})", self.dim),
            RegionKind::Box { lower, upper } => write!(f, "box(lower={}, upper={})", List(lower), List(upper)),
            RegionKind::Ball { center, radius } => write!(f, "ball(center={}, radius={radius:?})", List(center)),
            RegionKind::Halfspaces(hs) if hs.len() == 1 => write!(f, "{}", hs[0]),
            RegionKind::Halfspaces(hs) => {
                write!(f, "halfspaces(")?;
                for (i, h) in hs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{h}")?;
                }
                write!(f, ")")
            }
            RegionKind::Intersection(ms) => {
                write!(f, "intersect(")?;
                for (i, m) in ms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{m}")?;
                }
                write!(f, ")")
            }
        }
    }
}
