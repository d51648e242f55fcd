use num_complex::Complex64;
use thiserror::Error;

use super::ComplexPolynomial;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at position {position}: {kind}")]
pub struct ParseError {
    /// Byte offset into the input.
    pub position: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("malformed number literal `{0}`")]
    MalformedLiteral(String),
    #[error("exponent must be a non-negative integer")]
    NonIntegerExponent,
    #[error("division by a non-constant or zero expression")]
    BadDivision,
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("expected `{0}`")]
    Expected(char),
}

/// Parse a polynomial expression in `z1..zd`.
///
/// Grammar: complex literals (`2`, `0.5`, `1e-3`, `2i`, `i`), variables
/// `z1..zd`, binary `+ - * /` (division by constants only), integer powers
/// `^n`, unary minus and parentheses. The result is fully expanded.
pub fn parse_expression(text: &str, dim: usize) -> Result<ComplexPolynomial, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        dim,
    };
    let poly = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err(ParseErrorKind::UnexpectedChar(p.src[p.pos] as char)));
    }
    Ok(poly)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            position: self.pos,
            kind,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<ComplexPolynomial, ParseError> {
        let mut acc = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if op == b'+' { &acc + &rhs } else { &acc - &rhs };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<ComplexPolynomial, ParseError> {
        let mut acc = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            let op_pos = self.pos;
            self.pos += 1;
            let rhs = self.unary()?;
            if op == b'*' {
                acc = &acc * &rhs;
            } else {
                let c = rhs.coefficient(&vec![0; self.dim]);
                if !rhs.is_constant() || c == Complex64::new(0.0, 0.0) {
                    return Err(ParseError {
                        position: op_pos,
                        kind: ParseErrorKind::BadDivision,
                    });
                }
                acc = acc.scale(1.0 / c);
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<ComplexPolynomial, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-&self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<ComplexPolynomial, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let digits = &self.src[start..self.pos];
            let next_is_frac = matches!(self.src.get(self.pos), Some(b'.' | b'e' | b'E'));
            if digits.is_empty() || next_is_frac {
                return Err(ParseError {
                    position: start,
                    kind: ParseErrorKind::NonIntegerExponent,
                });
            }
            let n: u32 = std::str::from_utf8(digits)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or(ParseError {
                    position: start,
                    kind: ParseErrorKind::NonIntegerExponent,
                })?;
            return Ok(base.pow(n));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<ComplexPolynomial, ParseError> {
        let Some(ch) = self.peek() else {
            return Err(self.err(ParseErrorKind::UnexpectedEnd));
        };
        match ch {
            b'(' => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err(ParseErrorKind::Expected(')')));
                }
                self.pos += 1;
                Ok(inner)
            }
            b'0'..=b'9' | b'.' => self.number(),
            b'i' => {
                self.pos += 1;
                Ok(ComplexPolynomial::constant(self.dim, Complex64::new(0.0, 1.0)))
            }
            b'z' => self.variable(),
            other => Err(self.err(ParseErrorKind::UnexpectedChar(other as char))),
        }
    }

    fn number(&mut self) -> Result<ComplexPolynomial, ParseError> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).unwrap_or_default();
        let value: f64 = text.parse().map_err(|_| ParseError {
            position: start,
            kind: ParseErrorKind::MalformedLiteral(text.to_string()),
        })?;
        self.pos = i;
        // An `i` glued to the literal makes it imaginary.
        if self.pos < s.len() && s[self.pos] == b'i' {
            self.pos += 1;
            return Ok(ComplexPolynomial::constant(self.dim, Complex64::new(0.0, value)));
        }
        Ok(ComplexPolynomial::constant(self.dim, Complex64::new(value, 0.0)))
    }

    fn variable(&mut self) -> Result<ComplexPolynomial, ParseError> {
        let start = self.pos;
        self.pos += 1;
        let ds = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default().to_string();
        let idx: Option<usize> = std::str::from_utf8(&self.src[ds..self.pos])
            .ok()
            .and_then(|t| t.parse().ok());
        match idx {
            Some(k) if (1..=self.dim).contains(&k) => Ok(ComplexPolynomial::variable(self.dim, k - 1)),
            _ => Err(ParseError {
                position: start,
                kind: ParseErrorKind::UnknownVariable(name),
            }),
        }
    }
}
