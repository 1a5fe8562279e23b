//! Recursive-descent parser for the textual formula grammar.
//!
//! ```text
//! formula  := and ('|' and)*
//! and      := until ('&' until)*
//! until    := unary ('U' interval until)?
//! unary    := '!' unary | 'F' interval unary | 'G' interval unary | primary
//! primary  := 'TRUE' | '(' atom ')' | '(' formula ')'
//! atom     := linear ('>=' | '<=') number
//!           | 'norm2' '(' var (',' var)* ';' number (',' number)* ')' ('>=' | '<=') number
//! linear   := ['+'|'-'] term (('+'|'-') term)*
//! term     := number ['*' var] | var
//! interval := '[' integer ',' integer ']'
//! ```
//!
//! Implication is not part of the grammar; write `a -> b` as `!a | b`.

use thiserror::Error;

use super::formula::{Formula, Interval};
use super::predicate::{Predicate, PredicateError, PredicateKind};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unbounded temporal operator at byte {pos}; intervals must be finite")]
    Unbounded { pos: usize },
    #[error("variable x{index} at byte {pos} exceeds state dimension {dim}")]
    Dimension { pos: usize, index: usize, dim: usize },
    #[error("invalid predicate at byte {pos}: {source}")]
    Predicate {
        pos: usize,
        #[source]
        source: PredicateError,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Semi,
    Bang,
    Amp,
    Pipe,
    Ge,
    Le,
    Star,
    Plus,
    Minus,
    Num(String),
    Var(usize),
    Word(String),
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'[' => Some(Tok::LBrack),
            b']' => Some(Tok::RBrack),
            b',' => Some(Tok::Comma),
            b';' => Some(Tok::Semi),
            b'!' => Some(Tok::Bang),
            b'&' => Some(Tok::Amp),
            b'|' => Some(Tok::Pipe),
            b'*' => Some(Tok::Star),
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, start));
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'>' || c == b'<' {
            if bytes.get(i + 1) != Some(&b'=') {
                return Err(ParseError::Syntax {
                    pos: start,
                    msg: "only non-strict comparisons '>=' and '<=' are supported".into(),
                });
            }
            out.push((if c == b'>' { Tok::Ge } else { Tok::Le }, start));
            i += 2;
        } else if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            out.push((Tok::Num(text[start..i].to_string()), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &text[start..i];
            let var = word
                .strip_prefix('x')
                .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                .and_then(|d| d.parse().ok());
            match var {
                Some(idx) => out.push((Tok::Var(idx), start)),
                None => out.push((Tok::Word(word.to_string()), start)),
            }
        } else {
            let ch = text[start..].chars().next().unwrap_or('?');
            return Err(ParseError::Syntax {
                pos: start,
                msg: format!("unexpected character '{ch}'"),
            });
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<T> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    dim: usize,
    registry: Vec<Predicate<T>>,
}

impl<T: Scalar> Parser<T> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if t != Tok::End {
            self.at += 1;
        }
        t
    }

    fn err<R>(&self, msg: impl Into<String>) -> Result<R, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {what}, found {:?}", self.peek()))
        }
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Word(s) if s == w)
    }

    fn formula(&mut self) -> Result<Formula<T>, ParseError> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula<T>, ParseError> {
        let mut lhs = self.until()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.until()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula<T>, ParseError> {
        let lhs = self.unary()?;
        if self.is_word("U") {
            self.bump();
            let i = self.interval()?;
            let rhs = self.until()?;
            return Ok(Formula::until(lhs, i, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula<T>, ParseError> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(Formula::not(self.unary()?));
        }
        if self.is_word("F") || self.is_word("G") {
            let always = self.is_word("G");
            self.bump();
            let i = self.interval()?;
            let f = self.unary()?;
            return Ok(if always {
                Formula::always(i, f)
            } else {
                Formula::eventually(i, f)
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Formula<T>, ParseError> {
        if self.is_word("TRUE") {
            self.bump();
            return Ok(Formula::True);
        }
        if *self.peek() != Tok::LParen {
            return self.err(format!("expected formula, found {:?}", self.peek()));
        }
        self.bump();
        let starts_atom = matches!(
            self.peek(),
            Tok::Num(_) | Tok::Var(_) | Tok::Minus | Tok::Plus
        ) || self.is_word("norm2");
        let f = if starts_atom {
            self.atom()?
        } else {
            self.formula()?
        };
        self.expect(Tok::RParen, "')'")?;
        Ok(f)
    }

    fn interval(&mut self) -> Result<Interval, ParseError> {
        let pos = self.pos();
        if *self.peek() != Tok::LBrack {
            return Err(ParseError::Unbounded { pos });
        }
        self.bump();
        let lo = self.bound()?;
        self.expect(Tok::Comma, "','")?;
        let hi = self.bound()?;
        self.expect(Tok::RBrack, "']'")?;
        Interval::new(lo, hi).map_err(|e| ParseError::Syntax {
            pos,
            msg: e.to_string(),
        })
    }

    fn bound(&mut self) -> Result<usize, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(s) => s.parse::<usize>().map_err(|_| ParseError::Syntax {
                pos,
                msg: format!("interval bound '{s}' is not a nonnegative integer"),
            }),
            Tok::Word(w) if w.eq_ignore_ascii_case("inf") || w.eq_ignore_ascii_case("infinity") => {
                Err(ParseError::Unbounded { pos })
            }
            t => Err(ParseError::Syntax {
                pos,
                msg: format!("expected interval bound, found {t:?}"),
            }),
        }
    }

    fn number(&mut self) -> Result<T, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(s) => s.parse::<T>().map_err(|_| ParseError::Syntax {
                pos,
                msg: format!("malformed number '{s}'"),
            }),
            t => Err(ParseError::Syntax {
                pos,
                msg: format!("expected number, found {t:?}"),
            }),
        }
    }

    fn signed_number(&mut self) -> Result<T, ParseError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(-self.number()?)
            }
            Tok::Plus => {
                self.bump();
                self.number()
            }
            _ => self.number(),
        }
    }

    fn var(&mut self) -> Result<usize, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Var(index) if index < self.dim => Ok(index),
            Tok::Var(index) => Err(ParseError::Dimension {
                pos,
                index,
                dim: self.dim,
            }),
            t => Err(ParseError::Syntax {
                pos,
                msg: format!("expected state variable, found {t:?}"),
            }),
        }
    }

    fn comparison(&mut self) -> Result<bool, ParseError> {
        match self.bump() {
            Tok::Ge => Ok(true),
            Tok::Le => Ok(false),
            t => self.err(format!("expected '>=' or '<=', found {t:?}")),
        }
    }

    fn atom(&mut self) -> Result<Formula<T>, ParseError> {
        let pos = self.pos();
        let kind = if self.is_word("norm2") {
            self.norm_atom()?
        } else {
            self.linear_atom()?
        };
        Ok(Formula::atom(self.register(kind, pos)?))
    }

    fn linear_atom(&mut self) -> Result<PredicateKind<T>, ParseError> {
        let mut coeffs = vec![T::zero(); self.dim];
        let mut constant = T::zero();
        let mut first = true;
        loop {
            let sign = match self.peek() {
                Tok::Plus => {
                    self.bump();
                    T::one()
                }
                Tok::Minus => {
                    self.bump();
                    -T::one()
                }
                _ if first => T::one(),
                _ => break,
            };
            first = false;
            match self.peek().clone() {
                Tok::Var(_) => {
                    let i = self.var()?;
                    coeffs[i] += sign;
                }
                Tok::Num(_) => {
                    let c = self.number()?;
                    if *self.peek() == Tok::Star {
                        self.bump();
                        let i = self.var()?;
                        coeffs[i] += sign * c;
                    } else {
                        constant += sign * c;
                    }
                }
                t => return self.err(format!("expected term, found {t:?}")),
            }
        }
        let ge = self.comparison()?;
        let k = self.signed_number()?;
        Ok(if ge {
            PredicateKind::Affine {
                coeffs,
                offset: constant - k,
            }
        } else {
            PredicateKind::Affine {
                coeffs: coeffs.into_iter().map(|c| -c).collect(),
                offset: k - constant,
            }
        })
    }

    fn norm_atom(&mut self) -> Result<PredicateKind<T>, ParseError> {
        self.bump();
        self.expect(Tok::LParen, "'(' after norm2")?;
        let mut selector = vec![self.var()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            selector.push(self.var()?);
        }
        self.expect(Tok::Semi, "';' between variables and center")?;
        let mut center = vec![self.signed_number()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            center.push(self.signed_number()?);
        }
        self.expect(Tok::RParen, "')' closing norm2")?;
        let ge = self.comparison()?;
        let threshold = self.signed_number()?;
        Ok(if ge {
            PredicateKind::NormOutside {
                selector,
                center,
                threshold,
            }
        } else {
            PredicateKind::NormInside {
                selector,
                center,
                threshold,
            }
        })
    }

    /// Names atoms `p0, p1, ...` by first appearance; repeated atoms share a name.
    fn register(&mut self, kind: PredicateKind<T>, pos: usize) -> Result<Predicate<T>, ParseError> {
        if let Some(p) = self.registry.iter().find(|p| *p.kind() == kind) {
            return Ok(p.clone());
        }
        let name = format!("p{}", self.registry.len());
        let built = match kind {
            PredicateKind::Affine { coeffs, offset } => Predicate::affine(name, coeffs, offset),
            PredicateKind::NormInside {
                selector,
                center,
                threshold,
            } => Predicate::norm_inside(name, selector, center, threshold),
            PredicateKind::NormOutside {
                selector,
                center,
                threshold,
            } => Predicate::norm_outside(name, selector, center, threshold),
        }
        .map_err(|source| ParseError::Predicate { pos, source })?;
        self.registry.push(built.clone());
        Ok(built)
    }
}

/// Parses a formula over states of dimension `dim`.
pub fn parse_formula<T: Scalar>(text: &str, dim: usize) -> Result<Formula<T>, ParseError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        at: 0,
        dim,
        registry: Vec::new(),
    };
    let f = p.formula()?;
    if *p.peek() != Tok::End {
        return p.err(format!("unexpected trailing {:?}", p.peek()));
    }
    Ok(f)
}
