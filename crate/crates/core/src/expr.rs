//! A small arithmetic expression language in `x` and `y`.
//!
//! Grammar: numbers, `x`, `y`, `+ - * / ^`, unary minus, parentheses and the
//! functions `exp` and `sqrt`. Expressions can be differentiated symbolically,
//! which is how manufactured right-hand sides `det D²u` are produced.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Sqrt(Box<Expr>),
}

/// Differentiation variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
}

use Expr::*;

fn b(e: Expr) -> Box<Expr> {
    Box::new(e)
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expression(format!(
                "unexpected {} in {src:?}",
                p.tokens[p.pos].describe()
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Num(c) => *c,
            X => x,
            Y => y,
            Neg(a) => -a.eval(x, y),
            Add(a, c) => a.eval(x, y) + c.eval(x, y),
            Sub(a, c) => a.eval(x, y) - c.eval(x, y),
            Mul(a, c) => a.eval(x, y) * c.eval(x, y),
            Div(a, c) => a.eval(x, y) / c.eval(x, y),
            Pow(a, c) => pow(a.eval(x, y), c.eval(x, y)),
            Exp(a) => a.eval(x, y).exp(),
            Sqrt(a) => a.eval(x, y).sqrt(),
        }
    }

    pub fn depends_on_xy(&self) -> bool {
        match self {
            Num(_) => false,
            X | Y => true,
            Neg(a) | Exp(a) | Sqrt(a) => a.depends_on_xy(),
            Add(a, c) | Sub(a, c) | Mul(a, c) | Div(a, c) | Pow(a, c) => {
                a.depends_on_xy() || c.depends_on_xy()
            }
        }
    }

    /// Symbolic partial derivative, simplified.
    ///
    /// Powers with a non-constant exponent are rejected: the grammar has no logarithm.
    pub fn diff(&self, var: Var) -> Result<Expr> {
        Ok(self.diff_raw(var)?.simplify())
    }

    fn diff_raw(&self, var: Var) -> Result<Expr> {
        Ok(match self {
            Num(_) => Num(0.0),
            X => Num(if var == Var::X { 1.0 } else { 0.0 }),
            Y => Num(if var == Var::Y { 1.0 } else { 0.0 }),
            Neg(a) => Neg(b(a.diff_raw(var)?)),
            Add(a, c) => Add(b(a.diff_raw(var)?), b(c.diff_raw(var)?)),
            Sub(a, c) => Sub(b(a.diff_raw(var)?), b(c.diff_raw(var)?)),
            Mul(a, c) => Add(
                b(Mul(b(a.diff_raw(var)?), c.clone())),
                b(Mul(a.clone(), b(c.diff_raw(var)?))),
            ),
            Div(a, c) => Div(
                b(Sub(
                    b(Mul(b(a.diff_raw(var)?), c.clone())),
                    b(Mul(a.clone(), b(c.diff_raw(var)?))),
                )),
                b(Pow(c.clone(), b(Num(2.0)))),
            ),
            Pow(a, e) => {
                let e = e.clone().simplify();
                let Num(p) = e else {
                    return Err(Error::Expression(format!(
                        "cannot differentiate {self}: exponent depends on x or y"
                    )));
                };
                Mul(
                    b(Mul(b(Num(p)), b(Pow(a.clone(), b(Num(p - 1.0)))))),
                    b(a.diff_raw(var)?),
                )
            }
            Exp(a) => Mul(b(self.clone()), b(a.diff_raw(var)?)),
            Sqrt(a) => Div(b(a.diff_raw(var)?), b(Mul(b(Num(2.0)), b(self.clone())))),
        })
    }

    /// Constant folding and removal of trivial terms.
    pub fn simplify(self) -> Expr {
        match self {
            Num(_) | X | Y => self,
            Neg(a) => match a.simplify() {
                Num(c) => Num(-c),
                Neg(inner) => *inner,
                other => Neg(b(other)),
            },
            Add(a, c) => match (a.simplify(), c.simplify()) {
                (Num(p), Num(q)) => Num(p + q),
                (Num(0.0), e) | (e, Num(0.0)) => e,
                (l, Neg(r)) => Sub(b(l), r),
                (l, r) => Add(b(l), b(r)),
            },
            Sub(a, c) => match (a.simplify(), c.simplify()) {
                (Num(p), Num(q)) => Num(p - q),
                (e, Num(0.0)) => e,
                (Num(0.0), e) => Neg(b(e)).simplify(),
                (l, Neg(r)) => Add(b(l), r),
                (l, r) => Sub(b(l), b(r)),
            },
            Mul(a, c) => match (a.simplify(), c.simplify()) {
                (Num(p), Num(q)) => Num(p * q),
                (Num(0.0), _) | (_, Num(0.0)) => Num(0.0),
                (Num(1.0), e) | (e, Num(1.0)) => e,
                (Num(m), e) | (e, Num(m)) if m == -1.0 => Neg(b(e)).simplify(),
                (Num(p), Mul(l, r)) if matches!(*l, Num(_)) => {
                    let Num(q) = *l else { unreachable!() };
                    Mul(b(Num(p * q)), r)
                }
                (Neg(l), Neg(r)) => Mul(l, r).simplify(),
                (Neg(l), r) | (r, Neg(l)) => Neg(b(Mul(l, b(r)).simplify())),
                (l, Num(p)) => Mul(b(Num(p)), b(l)),
                (l, r) => Mul(b(l), b(r)),
            },
            Div(a, c) => match (a.simplify(), c.simplify()) {
                (Num(p), Num(q)) if q != 0.0 => Num(p / q),
                (Num(0.0), _) => Num(0.0),
                (e, Num(1.0)) => e,
                (l, r) => Div(b(l), b(r)),
            },
            Pow(a, c) => match (a.simplify(), c.simplify()) {
                (Num(p), Num(q)) => Num(pow(p, q)),
                (_, Num(0.0)) => Num(1.0),
                (e, Num(1.0)) => e,
                (l, r) => Pow(b(l), b(r)),
            },
            Exp(a) => match a.simplify() {
                Num(c) => Num(c.exp()),
                e => Exp(b(e)),
            },
            Sqrt(a) => match a.simplify() {
                Num(c) if c >= 0.0 => Num(c.sqrt()),
                e => Sqrt(b(e)),
            },
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Add(..) | Sub(..) => 1,
            Mul(..) | Div(..) => 2,
            Neg(_) => 3,
            Pow(..) => 4,
            Num(c) if *c < 0.0 => 3,
            _ => 5,
        }
    }
}

fn pow(a: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
        a.powi(p as i32)
    } else {
        a.powf(p)
    }
}

impl FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Expr> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            // `{:?}` keeps a decimal point or exponent, so the text re-parses to the same value
            Num(c) => write!(f, "{c:?}"),
            X => write!(f, "x"),
            Y => write!(f, "y"),
            Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, 4)
            }
            Add(a, c) => {
                wrap(f, a, 1)?;
                write!(f, " + ")?;
                wrap(f, c, 2)
            }
            Sub(a, c) => {
                wrap(f, a, 1)?;
                write!(f, " - ")?;
                wrap(f, c, 2)
            }
            Mul(a, c) => {
                wrap(f, a, 2)?;
                write!(f, " * ")?;
                wrap(f, c, 3)
            }
            Div(a, c) => {
                wrap(f, a, 2)?;
                write!(f, " / ")?;
                wrap(f, c, 4)
            }
            Pow(a, c) => {
                wrap(f, a, 5)?;
                write!(f, "^")?;
                wrap(f, c, 4)
            }
            Exp(a) => write!(f, "exp({a})"),
            Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Num(c) => format!("number {c}"),
            Token::Ident(s) => format!("identifier {s:?}"),
            Token::Op(c) => format!("operator '{c}'"),
            Token::LParen => "'('".into(),
            Token::RParen => "')'".into(),
        }
    }
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
                .map_err(|_| Error::Expression(format!("malformed number {text:?}")))?;
            out.push(Token::Num(value));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else {
            out.push(match c {
                '+' | '-' | '*' | '/' | '^' => Token::Op(c),
                '(' => Token::LParen,
                ')' => Token::RParen,
                _ => return Err(Error::Expression(format!("unexpected character {c:?} in {src:?}"))),
            });
            i += 1;
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

    fn expect_rparen(&mut self) -> Result<()> {
        match self.next() {
            Some(Token::RParen) => Ok(()),
            Some(t) => Err(Error::Expression(format!("expected ')', found {}", t.describe()))),
            None => Err(Error::Expression("expected ')', found end of input".into())),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' { Add(b(lhs), b(rhs)) } else { Sub(b(lhs), b(rhs)) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' { Mul(b(lhs), b(rhs)) } else { Div(b(lhs), b(rhs)) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Neg(b(self.unary()?)))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Pow(b(base), b(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(c)) => Ok(Num(c)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "x" => Ok(X),
                "y" => Ok(Y),
                "exp" | "sqrt" => {
                    match self.next() {
                        Some(Token::LParen) => {}
                        _ => return Err(Error::Expression(format!("expected '(' after {name}"))),
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(if name == "exp" { Exp(b(arg)) } else { Sqrt(b(arg)) })
                }
                _ => Err(Error::Expression(format!("unknown identifier {name:?}"))),
            },
            Some(t) => Err(Error::Expression(format!("unexpected {}", t.describe()))),
            None => Err(Error::Expression("unexpected end of input".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn precedence_and_associativity() {
        let cases = [
            ("1 + 2 * 3", 7.0),
            ("(1 + 2) * 3", 9.0),
            ("2 ^ 3 ^ 2", 512.0),
            ("-2 ^ 2", -4.0),
            ("8 / 4 / 2", 1.0),
            ("1 - 2 - 3", -4.0),
            ("2.5e-1 * 4", 1.0),
            ("sqrt(16) + exp(0)", 5.0),
            ("x * y - x / y", 6.0 - 1.5),
        ];
        for (src, want) in cases {
            let got = Expr::parse(src).unwrap().eval(3.0, 2.0);
            assert!(close(got, want, 1e-15), "{src}: {got} != {want}");
        }
    }

    #[test]
    fn rejects_malformed_input() {
        for src in ["", "1 +", "(x", "x)", "sin(x)", "z", "2 $ 3", "exp x", "1..2"] {
            assert!(matches!(Expr::parse(src), Err(Error::Expression(_))), "{src}");
        }
    }

    #[test]
    fn display_reparses() {
        for src in [
            "exp((x^2 + y^2) / 2)",
            "-(x - y) ^ 2 / (1 + x * y)",
            "sqrt(1 + x) - -y",
            "2 ^ -x",
            "1e-3 * x - 0.5",
        ] {
            let e = Expr::parse(src).unwrap();
            let again = Expr::parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{src} -> {e}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let srcs = [
            "exp((x^2 + y^2) / 2)",
            "x^3 * y - y / (1 + x^2)",
            "sqrt(1 + x^2 + y^4)",
            "(x - 2 * y)^2 * exp(-x * y)",
        ];
        let h = 1e-6;
        for src in srcs {
            let e = Expr::parse(src).unwrap();
            let dx = e.diff(Var::X).unwrap();
            let dy = e.diff(Var::Y).unwrap();
            for &(x, y) in &[(0.3, 0.7), (0.9, 0.1), (0.5, 0.5)] {
                let fx = (e.eval(x + h, y) - e.eval(x - h, y)) / (2.0 * h);
                let fy = (e.eval(x, y + h) - e.eval(x, y - h)) / (2.0 * h);
                assert!(close(dx.eval(x, y), fx, 1e-8), "{src} d/dx");
                assert!(close(dy.eval(x, y), fy, 1e-8), "{src} d/dy");
            }
        }
    }

    #[test]
    fn variable_exponent_not_differentiable() {
        let e = Expr::parse("2 ^ x").unwrap();
        assert!(e.diff(Var::X).is_err());
        // a constant exponent written as an expression is fine
        let c = Expr::parse("x ^ (1 + 1)").unwrap();
        assert_eq!(c.diff(Var::X).unwrap().eval(3.0, 0.0), 6.0);
    }

    #[test]
    fn simplification_folds_constants() {
        let e = Expr::parse("0 * x + 1 * (2 + 3) - 0").unwrap().simplify();
        assert_eq!(e, Num(5.0));
        assert!(!e.depends_on_xy());
        let d = Expr::parse("x^2").unwrap().diff(Var::X).unwrap();
        assert_eq!(d.to_string(), "2.0 * x");
    }
}
