//! Recursive-descent parser for the textual formula syntax.
//!
//! ```text
//! or     := and ('|' and)*
//! and    := until ('&' until)*
//! until  := unary ('U[<=t]' until)?
//! unary  := '!' unary | 'G[<=t]' unary | 'F[<=t]' unary | '(' or ')' | ident
//! ```
//!
//! `U`, `G` and `F` are operators only when directly followed by a `[`
//! bound; otherwise they lex as ordinary identifiers.

use thiserror::Error;

use super::Formula;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("unexpected character `{ch}` at offset {pos}")]
    UnexpectedChar { pos: usize, ch: char },
    #[error("malformed time bound at offset {pos}: {reason}")]
    Bound { pos: usize, reason: String },
    #[error("negative bound {value} at offset {pos}")]
    NegativeBound { pos: usize, value: f64 },
    #[error("expected {expected} at offset {pos}, found {found}")]
    Expected {
        pos: usize,
        expected: &'static str,
        found: String,
    },
    #[error("empty formula")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Not,
    And,
    Or,
    LParen,
    RParen,
    Until(f64),
    Globally(f64),
    Finally(f64),
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Not => "`!`".into(),
            Tok::And => "`&`".into(),
            Tok::Or => "`|`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Until(b) => format!("`U[<={b}]`"),
            Tok::Globally(b) => format!("`G[<={b}]`"),
            Tok::Finally(b) => format!("`F[<={b}]`"),
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_char() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            let Some(c) = self.peek_char() else {
                return Ok(out);
            };
            let tok = match c {
                '!' => {
                    self.pos += 1;
                    Tok::Not
                }
                '&' => {
                    self.pos += 1;
                    Tok::And
                }
                '|' => {
                    self.pos += 1;
                    Tok::Or
                }
                '(' => {
                    self.pos += 1;
                    Tok::LParen
                }
                ')' => {
                    self.pos += 1;
                    Tok::RParen
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let ident = self.ident();
                    let after = self.pos;
                    self.skip_ws();
                    let is_op = matches!(ident, "U" | "G" | "F") && self.peek_char() == Some('[');
                    if is_op {
                        let bound = self.bound()?;
                        match ident {
                            "U" => Tok::Until(bound),
                            "G" => Tok::Globally(bound),
                            _ => Tok::Finally(bound),
                        }
                    } else {
                        self.pos = after;
                        Tok::Ident(ident.to_string())
                    }
                }
                ch => return Err(ParseError::UnexpectedChar { pos: start, ch }),
            };
            out.push((tok, start));
        }
    }

    fn ident(&mut self) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek_char() {
            if c.is_ascii_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        &self.src[start..self.pos]
    }

    /// Parses `[<= number]` starting at the opening bracket.
    fn bound(&mut self) -> Result<f64, ParseError> {
        let open = self.pos;
        let err = |pos: usize, reason: &str| ParseError::Bound {
            pos,
            reason: reason.to_string(),
        };
        self.pos += 1; // '['
        self.skip_ws();
        if !self.src[self.pos..].starts_with("<=") {
            return Err(err(self.pos, "expected `<=`"));
        }
        self.pos += 2;
        self.skip_ws();
        let num_start = self.pos;
        while let Some(c) = self.peek_char() {
            if c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E') {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = &self.src[num_start..self.pos];
        let value: f64 = text
            .parse()
            .map_err(|_| err(num_start, &format!("`{text}` is not a number")))?;
        if !value.is_finite() {
            return Err(err(num_start, "bound must be finite"));
        }
        if value < 0.0 {
            return Err(ParseError::NegativeBound {
                pos: num_start,
                value,
            });
        }
        self.skip_ws();
        if self.peek_char() != Some(']') {
            return Err(err(self.pos, "expected `]`"));
        }
        self.pos += 1;
        debug_assert!(self.pos > open);
        Ok(value)
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    idx: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.idx).map_or(self.end, |(_, p)| *p)
    }

    fn found(&self) -> String {
        self.peek().map_or_else(|| "end of input".to_string(), Tok::describe)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while self.peek() == Some(&Tok::Or) {
            self.idx += 1;
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.until()?;
        while self.peek() == Some(&Tok::And) {
            self.idx += 1;
            lhs = Formula::and(lhs, self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.unary()?;
        if let Some(Tok::Until(bound)) = self.peek() {
            let bound = *bound;
            self.idx += 1;
            let rhs = self.until()?;
            return Ok(Formula::until(bound, lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let pos = self.pos();
        let Some(tok) = self.peek().cloned() else {
            return Err(ParseError::Expected {
                pos,
                expected: "a formula",
                found: "end of input".into(),
            });
        };
        self.idx += 1;
        match tok {
            Tok::Not => Ok(Formula::not(self.unary()?)),
            Tok::Globally(b) => Ok(Formula::globally(b, self.unary()?)),
            Tok::Finally(b) => Ok(Formula::finally(b, self.unary()?)),
            Tok::Ident(name) => Ok(Formula::Atom(name)),
            Tok::LParen => {
                let inner = self.or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(ParseError::Expected {
                        pos: self.pos(),
                        expected: "`)`",
                        found: self.found(),
                    });
                }
                self.idx += 1;
                Ok(inner)
            }
            other => {
                self.idx -= 1;
                Err(ParseError::Expected {
                    pos,
                    expected: "a formula",
                    found: other.describe(),
                })
            }
        }
    }
}

/// Parses formula text such as `!u U[<=14] (G[<=0.8] p & !u U[<=5] d)`.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let toks = Lexer { src: text, pos: 0 }.tokens()?;
    if toks.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut p = Parser {
        toks,
        idx: 0,
        end: text.len(),
    };
    let f = p.or()?;
    if p.idx != p.toks.len() {
        return Err(ParseError::Expected {
            pos: p.pos(),
            expected: "end of input",
            found: p.found(),
        });
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bltl::{horizon, nested_bound};
    use proptest::prelude::*;

    const EQ10: &str =
        "!u U[<=14] (G[<=0.8] p & !u U[<=5] ((G[<=1] t1 | G[<=0.8] t2) & !u U[<=4] d))";

    fn a(s: &str) -> Formula {
        Formula::atom(s)
    }

    #[test]
    fn parses_case_study_mission() {
        let nu = || Formula::not(a("u"));
        let expected = Formula::until(
            14.0,
            nu(),
            Formula::and(
                Formula::globally(0.8, a("p")),
                Formula::until(
                    5.0,
                    nu(),
                    Formula::and(
                        Formula::or(Formula::globally(1.0, a("t1")), Formula::globally(0.8, a("t2"))),
                        Formula::until(4.0, nu(), a("d")),
                    ),
                ),
            ),
        );
        assert_eq!(parse_formula(EQ10).unwrap(), expected);
    }

    #[test]
    fn single_globally_node() {
        assert_eq!(parse_formula("G[<=1] p").unwrap(), Formula::globally(1.0, a("p")));
    }

    #[test]
    fn negative_bound_is_rejected() {
        let err = parse_formula("p U[<=-1] q").unwrap_err();
        assert!(matches!(err, ParseError::NegativeBound { pos: 6, .. }), "{err:?}");
        assert!(err.to_string().contains("negative bound"));
    }

    #[test]
    fn precedence_and_associativity() {
        // unary > U > & > |
        assert_eq!(
            parse_formula("a | b & c").unwrap(),
            Formula::or(a("a"), Formula::and(a("b"), a("c")))
        );
        assert_eq!(
            parse_formula("a & b U[<=1] c").unwrap(),
            Formula::and(a("a"), Formula::until(1.0, a("b"), a("c")))
        );
        assert_eq!(
            parse_formula("a U[<=1] b U[<=2] c").unwrap(),
            Formula::until(1.0, a("a"), Formula::until(2.0, a("b"), a("c")))
        );
        assert_eq!(
            parse_formula("!a U[<=1] b").unwrap(),
            Formula::until(1.0, Formula::not(a("a")), a("b"))
        );
        assert_eq!(parse_formula("a & b & c").unwrap(), Formula::and(Formula::and(a("a"), a("b")), a("c")));
    }

    #[test]
    fn operator_letters_can_be_atoms() {
        assert_eq!(
            parse_formula("U & G").unwrap(),
            Formula::and(a("U"), a("G"))
        );
        assert_eq!(
            parse_formula("F [ <= 2 ] G").unwrap(),
            Formula::finally(2.0, a("G"))
        );
    }

    #[test]
    fn syntax_errors_carry_positions() {
        assert!(matches!(parse_formula(""), Err(ParseError::Empty)));
        assert!(matches!(
            parse_formula("a & # b"),
            Err(ParseError::UnexpectedChar { pos: 4, ch: '#' })
        ));
        assert!(matches!(
            parse_formula("(a & b"),
            Err(ParseError::Expected { pos: 6, .. })
        ));
        assert!(matches!(parse_formula("a b"), Err(ParseError::Expected { pos: 2, .. })));
        assert!(matches!(parse_formula("G[<1] a"), Err(ParseError::Bound { .. })));
        assert!(matches!(parse_formula("G[<=x] a"), Err(ParseError::Bound { .. })));
        assert!(matches!(parse_formula("G[<=1 a"), Err(ParseError::Bound { .. })));
        assert!(matches!(parse_formula("a &"), Err(ParseError::Expected { .. })));
        assert!(matches!(parse_formula("& a"), Err(ParseError::Expected { pos: 0, .. })));
    }

    #[test]
    fn horizon_of_case_study() {
        let f = parse_formula(EQ10).unwrap();
        assert_eq!(nested_bound(&f), 23.0);
        assert_eq!(horizon(&f, 2.6), 9);
    }

    #[test]
    fn horizon_of_example_mission() {
        let f = parse_formula("!u U[<=6.2] (p & !u U[<=2.3] (G[<=0.2] t & !u U[<=2.3] d))").unwrap();
        assert!((nested_bound(&f) - 10.8).abs() < 1e-12);
        assert_eq!(horizon(&f, 2.6), 5);
    }

    #[test]
    fn horizon_of_atom_is_one() {
        assert_eq!(horizon(&a("p"), 1.0), 1);
    }

    #[test]
    fn horizon_on_exact_multiple() {
        assert_eq!(horizon(&parse_formula("G[<=5.2] p").unwrap(), 2.6), 2);
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        let bound = (0u32..200).prop_map(|n| n as f64 / 8.0);
        let leaf = prop::sample::select(vec!["p", "q", "u", "t1", "U", "G"]).prop_map(Formula::atom);
        leaf.prop_recursive(5, 32, 2, move |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
                (bound.clone(), inner.clone(), inner.clone()).prop_map(|(t, a, b)| Formula::until(t, a, b)),
                (bound.clone(), inner.clone()).prop_map(|(t, a)| Formula::finally(t, a)),
                (bound.clone(), inner).prop_map(|(t, a)| Formula::globally(t, a)),
            ]
        })
    }

    proptest! {
        #[test]
        fn pretty_print_round_trips(f in arb_formula()) {
            let text = f.to_string();
            let back = parse_formula(&text).unwrap();
            prop_assert_eq!(&back, &f, "text: {}", text);
        }

        #[test]
        fn horizon_monotone_in_stage_duration(f in arb_formula(), dt in 0.1f64..5.0, grow in 1.0f64..3.0) {
            prop_assert!(horizon(&f, dt * grow) <= horizon(&f, dt));
        }
    }
}
