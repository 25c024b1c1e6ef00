//! A small expression language for sources and boundary data in configuration files.
//!
//! Grammar, loosest binding first: `+ -`, then `* /`, then unary minus, then `^`
//! (right-associative). So `-x^2` is `-(x^2)` and `2^3^2` is `2^9`. Variables are `x`
//! and `y`, the only constant is `pi`, and the functions are `sin cos exp ln sqrt`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("{what} at byte {offset} when evaluating at ({x}, {y})")]
    Domain { what: String, offset: usize, x: f64, y: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

/// Syntax tree; `at` fields hold the byte offset of the operator or function name.
#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Pi,
    Neg(Box<Expr>),
    Bin { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr>, at: usize },
    Call { func: Func, arg: Box<Expr>, at: usize },
}

/// Structural equality that ignores source offsets.
impl PartialEq for Expr {
    fn eq(&self, other: &Expr) -> bool {
        match (self, other) {
            (Expr::Num(a), Expr::Num(b)) => a.to_bits() == b.to_bits(),
            (Expr::X, Expr::X) | (Expr::Y, Expr::Y) | (Expr::Pi, Expr::Pi) => true,
            (Expr::Neg(a), Expr::Neg(b)) => a == b,
            (Expr::Bin { op: o1, lhs: l1, rhs: r1, .. }, Expr::Bin { op: o2, lhs: l2, rhs: r2, .. }) => {
                o1 == o2 && l1 == l2 && r1 == r2
            }
            (Expr::Call { func: f1, arg: a1, .. }, Expr::Call { func: f2, arg: a2, .. }) => f1 == f2 && a1 == a2,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else {
            let tok = match c {
                b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                _ => {
                    let ch = src[i..].chars().next().unwrap_or('?');
                    return Err(ExprError::Syntax { offset: i, message: format!("unexpected character `{ch}`") });
                }
            };
            out.push((tok, i));
            i += 1;
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

const BP_ADD: u8 = 10;
const BP_MUL: u8 = 20;
const BP_NEG: u8 = 30;
const BP_POW: u8 = 40;

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr, ExprError> {
        let mut lhs = self.prefix()?;
        loop {
            let (tok, at) = self.peek().clone();
            let (op, lbp, rbp) = match tok {
                Tok::Op('+') => (BinOp::Add, BP_ADD, BP_ADD + 1),
                Tok::Op('-') => (BinOp::Sub, BP_ADD, BP_ADD + 1),
                Tok::Op('*') => (BinOp::Mul, BP_MUL, BP_MUL + 1),
                Tok::Op('/') => (BinOp::Div, BP_MUL, BP_MUL + 1),
                Tok::Op('^') => (BinOp::Pow, BP_POW, BP_POW - 1),
                Tok::End | Tok::RParen => break,
                other => {
                    return Err(ExprError::Syntax {
                        offset: at,
                        message: format!("expected an operator, found {}", describe(&other)),
                    })
                }
            };
            if lbp < min_bp {
                break;
            }
            self.next();
            let rhs = self.expr(rbp)?;
            lhs = Expr::Bin { op, lhs: Box::new(lhs), rhs: Box::new(rhs), at };
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr, ExprError> {
        let (tok, at) = self.next();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Op('-') => Ok(Expr::Neg(Box::new(self.expr(BP_NEG)?))),
            Tok::LParen => {
                let e = self.expr(0)?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::X),
                "y" => Ok(Expr::Y),
                "pi" => Ok(Expr::Pi),
                _ => match Func::lookup(&name) {
                    Some(func) => {
                        let (open, pos) = self.next();
                        if open != Tok::LParen {
                            return Err(ExprError::Syntax {
                                offset: pos,
                                message: format!("expected `(` after `{name}`, found {}", describe(&open)),
                            });
                        }
                        let arg = self.expr(0)?;
                        self.expect_rparen()?;
                        Ok(Expr::Call { func, arg: Box::new(arg), at })
                    }
                    None => Err(ExprError::UnknownIdentifier { name, offset: at }),
                },
            },
            other => Err(ExprError::Syntax {
                offset: at,
                message: format!("expected a number, variable, function or `(`, found {}", describe(&other)),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        let (tok, at) = self.next();
        if tok != Tok::RParen {
            return Err(ExprError::Syntax { offset: at, message: format!("expected `)`, found {}", describe(&tok)) });
        }
        Ok(())
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::End => "end of input".into(),
    }
}

pub fn parse(src: &str) -> Result<Expr, ExprError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr(0)?;
    let (tok, at) = p.peek().clone();
    if tok != Tok::End {
        return Err(ExprError::Syntax { offset: at, message: format!("unexpected {} after expression", describe(&tok)) });
    }
    Ok(e)
}

impl Expr {
    pub fn eval(&self, x: f64, y: f64) -> Result<f64, ExprError> {
        let domain = |what: &str, offset: usize| ExprError::Domain { what: what.to_string(), offset, x, y };
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Y => y,
            Expr::Pi => std::f64::consts::PI,
            Expr::Neg(a) => -a.eval(x, y)?,
            Expr::Bin { op, lhs, rhs, at } => {
                let a = lhs.eval(x, y)?;
                let b = rhs.eval(x, y)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(domain("division by zero", *at));
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        let v = a.powf(b);
                        if v.is_nan() {
                            return Err(domain("power of a negative base with a non-integer exponent", *at));
                        }
                        v
                    }
                }
            }
            Expr::Call { func, arg, at } => {
                let a = arg.eval(x, y)?;
                match func {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Ln => {
                        if a <= 0.0 {
                            return Err(domain("logarithm of a non-positive number", *at));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(domain("square root of a negative number", *at));
                        }
                        a.sqrt()
                    }
                }
            }
        })
    }

    /// Evaluation that maps domain errors to NaN, for use where non-finite samples are
    /// rejected with their location downstream.
    pub fn eval_or_nan(&self, x: f64, y: f64) -> f64 {
        self.eval(x, y).unwrap_or(f64::NAN)
    }
}

/// Fully parenthesized printing; the output parses back to an equal tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::X => f.write_str("x"),
            Expr::Y => f.write_str("y"),
            Expr::Pi => f.write_str("pi"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin { op, lhs, rhs, .. } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            Expr::Call { func, arg, .. } => write!(f, "{}({arg})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64, y: f64) -> f64 {
        parse(s).unwrap().eval(x, y).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("-x^2", 2.0, 0.0), -4.0);
        assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(ev("1 - 2 - 3", 0.0, 0.0), -4.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(ev("2 + 3 * 4", 0.0, 0.0), 14.0);
        assert_eq!(ev("-2 * 3", 0.0, 0.0), -6.0);
        assert_eq!(ev("2^-1", 0.0, 0.0), 0.5);
        assert_eq!(ev("--x", 3.0, 0.0), 3.0);
        assert!((ev("sin(pi*x)*sin(pi*y)*x*y", 0.5, 0.5) - 0.25).abs() < 1e-15);
        assert_eq!(ev("1.5e2 + .5", 0.0, 0.0), 150.5);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse("1 + * 2") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        match parse("sin x") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        match parse("(x + 1") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("x y"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("x # 1"), Err(ExprError::Syntax { offset: 2, .. })));
    }

    #[test]
    fn unknown_identifiers() {
        match parse("2 * tan(x)") {
            Err(ExprError::UnknownIdentifier { name, offset }) => {
                assert_eq!(name, "tan");
                assert_eq!(offset, 4);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn domain_errors() {
        let e = parse("1 / (x - 1)").unwrap();
        assert!(matches!(e.eval(1.0, 0.0), Err(ExprError::Domain { offset: 2, .. })));
        let e = parse("ln(x)").unwrap();
        assert!(matches!(e.eval(0.0, 0.0), Err(ExprError::Domain { offset: 0, .. })));
        assert!(e.eval_or_nan(-1.0, 0.0).is_nan());
        assert!(parse("sqrt(x)").unwrap().eval(-1.0, 0.0).is_err());
    }

    #[test]
    fn printing_round_trips() {
        for s in ["-x^2", "2^3^2", "sin(pi*x)*sin(pi*y)*x*y", "1e-7 - (x/y)", "exp(-(x+y))/3"] {
            let e = parse(s).unwrap();
            let printed = e.to_string();
            assert_eq!(parse(&printed).unwrap(), e, "{s} -> {printed}");
        }
    }
}
