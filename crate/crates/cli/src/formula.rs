//! Text syntax for visit formulas.
//!
//! ```text
//! expr    := conj (("or" | "|") conj)*
//! conj    := unary (("and" | "&") unary)*
//! unary   := ("not" | "!") unary
//!          | ("eventually" | "always") "[" num "," num "]" unary
//!          | "inside" "(" name ")"
//!          | "(" expr ")"
//! ```

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Inside(String),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Eventually([f64; 2], Box<Expr>),
    Always([f64; 2], Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("at column {column}: {message}")]
pub struct ParseError {
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(f64),
    Sym(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "'{w}'"),
            Tok::Num(n) => write!(f, "{n}"),
            Tok::Sym(c) => write!(f, "'{c}'"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if "[](),&|!".contains(c) {
            out.push((col, Tok::Sym(c)));
            i += 1;
        } else if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_digit() || ".eE".contains(chars[i]) || (("+-").contains(chars[i]) && "eE".contains(chars[i - 1]))) {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| ParseError {
                column: col,
                message: format!("bad number '{text}'"),
            })?;
            out.push((col, Tok::Num(v)));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '-') {
                i += 1;
            }
            out.push((col, Tok::Word(chars[start..i].iter().collect())));
        } else {
            return Err(ParseError {
                column: col,
                message: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map(|(c, _)| *c).unwrap_or(self.end)
    }

    fn err<T>(&self, message: String) -> Result<T, ParseError> {
        Err(ParseError {
            column: self.column(),
            message,
        })
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Sym(s)) if *s == c => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => self.err(format!("expected '{c}', found {t}")),
            None => self.err(format!("expected '{c}', found end of input")),
        }
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(x)) if x == w)
    }

    fn is_sym(&self, c: char) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == c)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut parts = vec![self.conj()?];
        while self.is_word("or") || self.is_sym('|') {
            self.pos += 1;
            parts.push(self.conj()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Expr::Or(parts) })
    }

    fn conj(&mut self) -> Result<Expr, ParseError> {
        let mut parts = vec![self.unary()?];
        while self.is_word("and") || self.is_sym('&') {
            self.pos += 1;
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Expr::And(parts) })
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        match self.peek() {
            Some(Tok::Num(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            Some(t) => self.err(format!("expected a number, found {t}")),
            None => self.err("expected a number, found end of input".into()),
        }
    }

    fn window(&mut self) -> Result<[f64; 2], ParseError> {
        self.expect_sym('[')?;
        let a = self.number()?;
        self.expect_sym(',')?;
        let b = self.number()?;
        self.expect_sym(']')?;
        Ok([a, b])
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let col = self.column();
        match self.next() {
            Some(Tok::Sym('!')) => Ok(Expr::Not(Box::new(self.unary()?))),
            Some(Tok::Sym('(')) => {
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Some(Tok::Word(w)) => match w.as_str() {
                "not" => Ok(Expr::Not(Box::new(self.unary()?))),
                "eventually" => {
                    let win = self.window()?;
                    Ok(Expr::Eventually(win, Box::new(self.unary()?)))
                }
                "always" => {
                    let win = self.window()?;
                    Ok(Expr::Always(win, Box::new(self.unary()?)))
                }
                "inside" => {
                    self.expect_sym('(')?;
                    let name = match self.next() {
                        Some(Tok::Word(n)) => n,
                        _ => {
                            self.pos -= 1;
                            return self.err("expected a region name".into());
                        }
                    };
                    self.expect_sym(')')?;
                    Ok(Expr::Inside(name))
                }
                other => Err(ParseError {
                    column: col,
                    message: format!("unknown keyword '{other}'"),
                }),
            },
            Some(t) => Err(ParseError {
                column: col,
                message: format!("unexpected {t}"),
            }),
            None => self.err("unexpected end of input".into()),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: src.chars().count() + 1,
    };
    let e = p.expr()?;
    if let Some(t) = p.peek() {
        return p.err(format!("trailing input starting at {t}"));
    }
    Ok(e)
}

impl Expr {
    /// Region names referenced by `inside(..)`, in order of appearance.
    pub fn names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Inside(n) => out.push(n),
            Expr::Not(c) | Expr::Eventually(_, c) | Expr::Always(_, c) => c.collect_names(out),
            Expr::And(cs) | Expr::Or(cs) => cs.iter().for_each(|c| c.collect_names(out)),
        }
    }

    /// Builds the robustness formula, resolving each region through `region`.
    pub fn to_stl<F, E>(&self, region: &F) -> Result<moment_ensemble::stl::StlFormula, E>
    where
        F: Fn(&str) -> Result<moment_ensemble::stl::StlFormula, E>,
    {
        use moment_ensemble::stl::StlFormula;
        Ok(match self {
            Expr::Inside(n) => region(n)?,
            Expr::Not(c) => StlFormula::Not(Box::new(c.to_stl(region)?)),
            Expr::And(cs) => StlFormula::And(cs.iter().map(|c| c.to_stl(region)).collect::<Result<_, _>>()?),
            Expr::Or(cs) => StlFormula::Or(cs.iter().map(|c| c.to_stl(region)).collect::<Result<_, _>>()?),
            Expr::Eventually(w, c) => StlFormula::eventually(*w, c.to_stl(region)?),
            Expr::Always(w, c) => StlFormula::always(*w, c.to_stl(region)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_windows() {
        let e = parse("eventually[14, 16] inside(goal) and not inside(a) or always[0,2.5](inside(b))").unwrap();
        let Expr::Or(parts) = e else { panic!("top level should be a disjunction") };
        assert_eq!(parts.len(), 2);
        assert!(matches!(&parts[0], Expr::And(c) if c.len() == 2));
        assert_eq!(parts[1], Expr::Always([0.0, 2.5], Box::new(Expr::Inside("b".into()))));
    }

    #[test]
    fn symbols_match_words() {
        assert_eq!(
            parse("!inside(a) & inside(b) | inside(c)").unwrap(),
            parse("not inside(a) and inside(b) or inside(c)").unwrap()
        );
    }

    #[test]
    fn names_in_order() {
        let e = parse("inside(w1) and eventually[1,2] (inside(w2) or inside(w1))").unwrap();
        assert_eq!(e.names(), vec!["w1", "w2", "w1"]);
    }

    #[test]
    fn errors_carry_columns() {
        let err = parse("eventually[1 2] inside(a)").unwrap_err();
        assert_eq!(err.column, 14);
        assert!(parse("inside(a) and").is_err());
        assert!(parse("inside(a) inside(b)").unwrap_err().message.contains("trailing"));
        assert!(parse("sometimes inside(a)").unwrap_err().message.contains("unknown keyword"));
        assert!(parse("inside(a) $").is_err());
    }
}
