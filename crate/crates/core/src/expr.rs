//! A small expression language for user-defined operations and generators.
//!
//! ```text
//! expr    = term (('+' | '-') term)*
//! term    = unary (('*' | '/') unary)*
//! unary   = '-' unary | power
//! power   = primary ('^' unary)?
//! primary = number | variable | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so
//! `-x^2 = -(x^2)` and `a^b^c = a^(b^c)`. Variables are `x1 … xn`; with
//! arity 1, `x` is accepted as well. There is no implicit multiplication.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Ln,
    Exp,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "ln" => Func::Ln,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Ln => "ln",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Zero-based argument index.
    Var(usize),
    Const(Constant),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at offset {position}: expected {expected}, found {found}")]
pub struct ParseError {
    /// Character offset; the input length means end of input.
    pub position: usize,
    pub expected: String,
    pub found: String,
}

impl ParseError {
    /// The source line with a caret under the offending offset.
    pub fn render(&self, src: &str) -> String {
        format!("{self}\n  {src}\n  {}^", " ".repeat(self.position))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("ln of non-positive value {0}")]
    Ln(f64),
    #[error("sqrt of negative value {0}")]
    Sqrt(f64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("zero raised to negative power {0}")]
    ZeroToNegative(f64),
    #[error("result is not a finite real")]
    NotFinite,
    #[error("expected {expected} arguments, got {got}")]
    Arity { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
    text: String,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if ch.is_ascii_digit() || (ch == '.' && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit())) {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // Exponent only when digits follow, so `2e` stays an error rather than 2·e.
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
            let value = text.parse::<f64>().map_err(|_| ParseError {
                position: start,
                expected: "number".into(),
                found: text.clone(),
            })?;
            out.push(Token {
                tok: Tok::Num(value),
                pos: start,
                text,
            });
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Token {
                tok: Tok::Ident(text.clone()),
                pos: start,
                text,
            });
        } else if "+-*/^()".contains(ch) {
            i += 1;
            out.push(Token {
                tok: Tok::Sym(ch),
                pos: start,
                text: ch.to_string(),
            });
        } else {
            return Err(ParseError {
                position: start,
                expected: "operand or operator".into(),
                found: ch.to_string(),
            });
        }
    }
    out.push(Token {
        tok: Tok::End,
        pos: chars.len(),
        text: "end of input".into(),
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    arity: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if t.tok != Tok::End {
            self.at += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        let t = self.peek();
        ParseError {
            position: t.pos,
            expected: expected.into(),
            found: t.text.clone(),
        }
    }

    fn eat(&mut self, sym: char) -> bool {
        if self.peek().tok == Tok::Sym(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(*v))
            }
            Tok::Sym('(') => {
                self.bump();
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("')'"));
                }
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(name) {
                    self.bump();
                    if !self.eat('(') {
                        return Err(self.error("'(' after function name"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(self.error("')'"));
                    }
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                let e = match name.as_str() {
                    "pi" => Expr::Const(Constant::Pi),
                    "e" => Expr::Const(Constant::E),
                    "x" if self.arity == 1 => Expr::Var(0),
                    _ => match self.variable_index(name) {
                        Some(i) => Expr::Var(i),
                        None => return Err(self.error(&self.variable_hint())),
                    },
                };
                self.bump();
                Ok(e)
            }
            _ => Err(self.error("operand")),
        }
    }

    fn variable_index(&self, name: &str) -> Option<usize> {
        let digits = name.strip_prefix('x')?;
        if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let i: usize = digits.parse().ok()?;
        (1..=self.arity).contains(&i).then(|| i - 1)
    }

    fn variable_hint(&self) -> String {
        match self.arity {
            1 => "operand (x, x1, number, constant or function)".into(),
            n => format!("operand (x1..x{n}, number, constant or function)"),
        }
    }
}

/// Parses `src` with variables `x1 … x{arity}`.
pub fn parse(src: &str, arity: usize) -> Result<Expr, ParseError> {
    assert!(arity >= 1, "arity must be at least 1");
    let mut p = Parser {
        tokens: tokenize(src)?,
        at: 0,
        arity,
    };
    let e = p.expr()?;
    if p.peek().tok != Tok::End {
        return Err(p.error("operator or end of input"));
    }
    Ok(e)
}

impl Expr {
    /// Evaluates at `args`; partial functions outside their domain yield an error.
    pub fn eval(&self, args: &[f64]) -> Result<f64, DomainError> {
        if let Some(i) = self.max_var() {
            if i >= args.len() {
                return Err(DomainError::Arity {
                    expected: i + 1,
                    got: args.len(),
                });
            }
        }
        let v = self.eval_unchecked(args)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DomainError::NotFinite)
        }
    }

    fn eval_unchecked(&self, args: &[f64]) -> Result<f64, DomainError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => args[*i],
            Expr::Const(Constant::Pi) => std::f64::consts::PI,
            Expr::Const(Constant::E) => std::f64::consts::E,
            Expr::Neg(e) => -e.eval_unchecked(args)?,
            Expr::Call(func, e) => {
                let a = e.eval_unchecked(args)?;
                match func {
                    Func::Ln if a <= 0.0 => return Err(DomainError::Ln(a)),
                    Func::Ln => a.ln(),
                    Func::Sqrt if a < 0.0 => return Err(DomainError::Sqrt(a)),
                    Func::Sqrt => a.sqrt(),
                    Func::Exp => a.exp(),
                    Func::Abs => a.abs(),
                }
            }
            Expr::Bin(op, l, r) => {
                let (a, b) = (l.eval_unchecked(args)?, r.eval_unchecked(args)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div if b == 0.0 => return Err(DomainError::DivisionByZero),
                    BinOp::Div => a / b,
                    BinOp::Pow if a == 0.0 && b < 0.0 => return Err(DomainError::ZeroToNegative(b)),
                    BinOp::Pow => a.powf(b),
                }
            }
        };
        if v.is_nan() {
            Err(DomainError::NotFinite)
        } else {
            Ok(v)
        }
    }

    /// Largest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Var(i) => Some(*i),
            Expr::Num(_) | Expr::Const(_) => None,
            Expr::Neg(e) | Expr::Call(_, e) => e.max_var(),
            Expr::Bin(_, l, r) => l.max_var().max(r.max_var()),
        }
    }

    /// Evaluation with domain errors mapped to NaN; overflow stays infinite
    /// so that limits at the ends of a domain remain visible.
    pub fn eval_or_nan(&self, args: &[f64]) -> f64 {
        if self.max_var().is_some_and(|i| i >= args.len()) {
            return f64::NAN;
        }
        self.eval_unchecked(args).unwrap_or(f64::NAN)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.fmt_at(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Const(Constant::Pi) => f.write_str("pi"),
            Expr::Const(Constant::E) => f.write_str("e"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.fmt_at(f, 3)
            }
            Expr::Call(func, e) => {
                write!(f, "{}(", func.name())?;
                e.fmt_at(f, 0)?;
                f.write_str(")")
            }
            Expr::Bin(op, l, r) => {
                let (lmin, rmin) = match op {
                    BinOp::Add | BinOp::Sub => (1, 2),
                    BinOp::Mul | BinOp::Div => (2, 3),
                    BinOp::Pow => (5, 3),
                };
                l.fmt_at(f, lmin)?;
                write!(f, " {} ", op.symbol())?;
                r.fmt_at(f, rmin)
            }
        }
    }
}

/// Canonical form: minimal parentheses, variables as `x1 … xn`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}
