//! Surface-definition expression language.
//!
//! Grammar (EBNF), whitespace allowed between tokens:
//!
//! ```text
//! expr    = term , { ( "+" | "-" ) , term } ;
//! term    = unary , { ( "*" | "/" ) , unary } ;
//! unary   = "-" , unary | power ;
//! power   = primary , { "^" , integer } ;
//! primary = number | variable | function , "(" , expr , ")" | "(" , expr , ")" ;
//! variable = "u" | "v" ;
//! function = "sin" | "cos" | "exp" | "sqrt" | "log" ;
//! integer = digit , { digit } ;
//! number  = digit , { digit } , [ "." , { digit } ] , [ exponent ]
//!         | "." , digit , { digit } , [ exponent ] ;
//! exponent = ( "e" | "E" ) , [ "+" | "-" ] , digit , { digit } ;
//! digit   = "0" | "1" | "2" | "3" | "4" | "5" | "6" | "7" | "8" | "9" ;
//! ```
//!
//! Binary `+ - * /` are left-associative; `^` binds tighter than unary minus,
//! so `-u^2` is `-(u^2)`. Implicit multiplication (`2u`) is rejected.

use std::fmt;

use crate::error::{Error, Result};
use crate::jet::Jet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    U,
    V,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Log,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "log" => Func::Log,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn pow(base: Expr, n: u32) -> Expr {
        Expr::Pow(Box::new(base), n)
    }

    /// Truncated Taylor expansion about `(u, v)` to total order `order`.
    pub fn eval_jet(&self, at: (f64, f64), order: usize) -> Result<Jet> {
        Ok(match self {
            Expr::Num(x) => Jet::constant(*x, order),
            Expr::Var(Var::U) => Jet::var_u(at.0, order),
            Expr::Var(Var::V) => Jet::var_v(at.1, order),
            Expr::Neg(e) => e.eval_jet(at, order)?.scale(-1.0),
            Expr::Bin(op, l, r) => {
                let a = l.eval_jet(at, order)?;
                let b = r.eval_jet(at, order)?;
                match op {
                    BinOp::Add => &a + &b,
                    BinOp::Sub => &a - &b,
                    BinOp::Mul => &a * &b,
                    BinOp::Div => {
                        if b.value() == 0.0 {
                            return Err(Error::Domain(format!(
                                "division by zero at ({}, {})",
                                at.0, at.1
                            )));
                        }
                        a.div_jet(&b)?
                    }
                }
            }
            Expr::Pow(b, n) => b.eval_jet(at, order)?.powi(*n),
            Expr::Call(f, arg) => {
                let a = arg.eval_jet(at, order)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Sqrt => a.sqrt().map_err(|_| {
                        Error::Domain(format!("sqrt of {} at ({}, {})", a.value(), at.0, at.1))
                    })?,
                    Func::Log => a.ln().map_err(|_| {
                        Error::Domain(format!("log of {} at ({}, {})", a.value(), at.0, at.1))
                    })?,
                }
            }
        })
    }

    /// Plain value at a point.
    pub fn eval(&self, at: (f64, f64)) -> Result<f64> {
        Ok(self.eval_jet(at, 0)?.value())
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(x) if x.is_sign_negative() => 3,
            _ => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "(")?;
            self.write_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Num(x) => {
                if x.is_sign_negative() {
                    write!(f, "-{}", -x)
                } else {
                    write!(f, "{x}")
                }
            }
            Expr::Var(Var::U) => write!(f, "u"),
            Expr::Var(Var::V) => write!(f, "v"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.write_at(f, 3)
            }
            Expr::Bin(op, l, r) => {
                let (sym, lmin, rmin) = match op {
                    BinOp::Add => ("+", 1, 2),
                    BinOp::Sub => ("-", 1, 2),
                    BinOp::Mul => ("*", 2, 3),
                    BinOp::Div => ("/", 2, 3),
                };
                l.write_at(f, lmin)?;
                write!(f, "{sym}")?;
                r.write_at(f, rmin)
            }
            Expr::Pow(b, n) => {
                b.write_at(f, 4)?;
                write!(f, "^{n}")
            }
            Expr::Call(func, arg) => {
                write!(f, "{}(", func.name())?;
                arg.write_at(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

impl std::str::FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Expr> {
        parse(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Int(u32),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Returns the next token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((t, start));
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self
                .src
                .get(self.pos)
                .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_')
            {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos])
                .expect("ascii")
                .to_string();
            return Ok((Tok::Ident(name), start));
        }
        Err(Error::Syntax {
            offset: start,
            expected: vec!["token".into()],
        })
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize)> {
        let digits = |lx: &mut Self| {
            let s = lx.pos;
            while lx.src.get(lx.pos).is_some_and(u8::is_ascii_digit) {
                lx.pos += 1;
            }
            lx.pos - s
        };
        let int_digits = digits(self);
        let mut is_int = true;
        if self.src.get(self.pos) == Some(&b'.') {
            is_int = false;
            self.pos += 1;
            let frac = digits(self);
            if int_digits + frac == 0 {
                return Err(Error::Syntax {
                    offset: start,
                    expected: vec!["digit".into()],
                });
            }
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // not an exponent; leave `e` for the identifier check below
                self.pos = save;
            } else {
                is_int = false;
            }
        }
        // Reject implicit multiplication such as `2u`.
        if self
            .src
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_alphabetic() || *b == b'_' || *b == b'.')
        {
            return Err(Error::Syntax {
                offset: self.pos,
                expected: vec!["operator".into(), "')'".into(), "end of input".into()],
            });
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if is_int {
            if let Ok(n) = text.parse::<u32>() {
                return Ok((Tok::Int(n), start));
            }
        }
        let x: f64 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            expected: vec!["number".into()],
        })?;
        Ok((Tok::Num(x), start))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    at: usize,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<()> {
        let (t, at) = self.lexer.next()?;
        self.tok = t;
        self.at = at;
        Ok(())
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T> {
        Err(Error::Syntax {
            offset: self.at,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.tok == Tok::Minus {
            self.bump()?;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.primary()?;
        while self.tok == Tok::Caret {
            self.bump()?;
            match self.tok {
                Tok::Int(n) => {
                    self.bump()?;
                    base = Expr::pow(base, n);
                }
                _ => return self.fail(&["non-negative integer exponent"]),
            }
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        const START: &[&str] = &["number", "u", "v", "function", "'('", "'-'"];
        match self.tok.clone() {
            Tok::Num(x) => {
                self.bump()?;
                Ok(Expr::Num(x))
            }
            Tok::Int(n) => {
                self.bump()?;
                Ok(Expr::Num(n as f64))
            }
            Tok::Ident(name) => {
                let at = self.at;
                match name.as_str() {
                    "u" => {
                        self.bump()?;
                        Ok(Expr::Var(Var::U))
                    }
                    "v" => {
                        self.bump()?;
                        Ok(Expr::Var(Var::V))
                    }
                    _ => match Func::from_name(&name) {
                        Some(func) => {
                            self.bump()?;
                            if self.tok != Tok::LParen {
                                return self.fail(&["'('"]);
                            }
                            self.bump()?;
                            let arg = self.expr()?;
                            if self.tok != Tok::RParen {
                                return self.fail(&["')'"]);
                            }
                            self.bump()?;
                            Ok(Expr::Call(func, Box::new(arg)))
                        }
                        None => Err(Error::UnknownIdentifier { name, offset: at }),
                    },
                }
            }
            Tok::LParen => {
                self.bump()?;
                let e = self.expr()?;
                if self.tok != Tok::RParen {
                    return self.fail(&["')'"]);
                }
                self.bump()?;
                Ok(e)
            }
            _ => self.fail(START),
        }
    }
}

/// Parses an expression in `u` and `v`.
pub fn parse(source: &str) -> Result<Expr> {
    let mut p = Parser {
        lexer: Lexer {
            src: source.as_bytes(),
            pos: 0,
        },
        tok: Tok::End,
        at: 0,
    };
    p.bump()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return p.fail(&["operator", "end of input"]);
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u() -> Expr {
        Expr::Var(Var::U)
    }
    fn v() -> Expr {
        Expr::Var(Var::V)
    }

    #[test]
    fn parses_quadratic_form() {
        let e = parse("0.5*(u^2+v^2)").unwrap();
        let expected = Expr::bin(
            BinOp::Mul,
            Expr::num(0.5),
            Expr::bin(BinOp::Add, Expr::pow(u(), 2), Expr::pow(v(), 2)),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn parses_product() {
        assert_eq!(parse("u*v").unwrap(), Expr::bin(BinOp::Mul, u(), v()));
    }

    #[test]
    fn incomplete_power_reports_offset() {
        match parse("u^") {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_identifier() {
        assert!(matches!(
            parse("u + w"),
            Err(Error::UnknownIdentifier { ref name, offset: 4 }) if name == "w"
        ));
        assert!(matches!(parse("tan(u)"), Err(Error::UnknownIdentifier { .. })));
    }

    #[test]
    fn rejects_negative_exponent_and_implicit_product() {
        assert!(matches!(parse("u^-1"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse("u^1.5"), Err(Error::Syntax { .. })));
        assert!(matches!(parse("2u"), Err(Error::Syntax { offset: 1, .. })));
        assert!(matches!(parse(""), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse("(u"), Err(Error::Syntax { offset: 2, .. })));
    }

    #[test]
    fn precedence_and_associativity() {
        // unary minus binds looser than ^
        assert_eq!(parse("-u^2").unwrap(), Expr::Neg(Box::new(Expr::pow(u(), 2))));
        // left associativity
        assert_eq!(
            parse("u-v-1").unwrap(),
            Expr::bin(BinOp::Sub, Expr::bin(BinOp::Sub, u(), v()), Expr::num(1.0))
        );
        assert_eq!(
            parse("u/v*2").unwrap(),
            Expr::bin(BinOp::Mul, Expr::bin(BinOp::Div, u(), v()), Expr::num(2.0))
        );
        assert_eq!(
            parse("1e-3*u").unwrap(),
            Expr::bin(BinOp::Mul, Expr::num(1e-3), u())
        );
    }

    #[test]
    fn printing_round_trips() {
        for src in ["u-(v-1)", "-(u+v)^2", "u/(v*2)", "--u", "sin(u*v)^3", "(u^2)^3", "2*-u"] {
            let e = parse(src).unwrap();
            let printed = e.to_string();
            assert_eq!(parse(&printed).unwrap(), e, "{src} -> {printed}");
        }
    }

    #[test]
    fn jet_examples() {
        let j = parse("u*v").unwrap().eval_jet((1.0, 2.0), 2).unwrap();
        assert_eq!(j.value(), 2.0);
        assert_eq!(j.partial(1, 0), 2.0);
        assert_eq!(j.partial(0, 1), 1.0);
        assert_eq!(j.partial(1, 1), 1.0);
        assert_eq!(j.partial(2, 0), 0.0);
        assert_eq!(j.partial(0, 2), 0.0);

        let j = parse("u^3").unwrap().eval_jet((0.0, 0.0), 2).unwrap();
        assert!(j.coeffs().iter().all(|c| *c == 0.0));

        let j = parse("sin(u)").unwrap().eval_jet((0.0, 0.0), 3).unwrap();
        assert_eq!(j.value(), 0.0);
        assert_eq!(j.partial(1, 0), 1.0);
        assert_eq!(j.partial(2, 0), 0.0);
        assert!((j.coeff(3, 0) + 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn domain_error_at_base_point() {
        let e = parse("sqrt(u)").unwrap();
        assert!(matches!(e.eval_jet((-1.0, 0.0), 2), Err(Error::Domain(_))));
        let e = parse("log(u)").unwrap();
        assert!(matches!(e.eval_jet((0.0, 0.0), 2), Err(Error::Domain(_))));
        let e = parse("1/u").unwrap();
        assert!(matches!(e.eval_jet((0.0, 0.0), 2), Err(Error::Domain(_))));
    }
}
