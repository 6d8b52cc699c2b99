//! Arithmetic expressions over store columns, and out-of-core derivation of
//! new columns from them.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?           right associative
//! atom   := number | ident | '`' chars '`' | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! so `-2^2` is `-(2^2)` and `2^-1` is `0.5`. Column names that are not plain
//! identifiers go in backticks: `` log10(`m_{\chi}`) ``.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::store::ChainStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Log10,
    Ln,
    Exp,
    Sqrt,
    Abs,
}

impl Function {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "log10" => Function::Log10,
            "ln" => Function::Ln,
            "exp" => Function::Exp,
            "sqrt" => Function::Sqrt,
            "abs" => Function::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Function::Log10 => "log10",
            Function::Ln => "ln",
            Function::Exp => "exp",
            Function::Sqrt => "sqrt",
            Function::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Column(String),
    Number(f64),
    Neg(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Function, Box<Expr>),
}

impl Expr {
    pub fn column(name: impl Into<String>) -> Self {
        Expr::Column(name.into())
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn call(func: Function, arg: Expr) -> Self {
        Expr::Call(func, Box::new(arg))
    }

    pub fn negate(inner: Expr) -> Self {
        Expr::Neg(Box::new(inner))
    }

    /// Distinct column names referenced anywhere in the expression, sorted.
    pub fn columns(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expr::Column(name) => {
                out.insert(name);
            }
            Expr::Number(_) => {}
            Expr::Neg(inner) | Expr::Call(_, inner) => inner.collect_columns(out),
            Expr::Binary(_, lhs, rhs) => {
                lhs.collect_columns(out);
                rhs.collect_columns(out);
            }
        }
    }
}

fn is_ident(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

// Fully parenthesized so that the printed form re-parses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Column(name) if is_ident(name) && Function::from_name(name).is_none() => {
                write!(f, "{name}")
            }
            Expr::Column(name) => write!(f, "`{name}`"),
            Expr::Number(v) => write!(f, "{v:?}"),
            Expr::Neg(inner) => write!(f, "(-{inner})"),
            Expr::Binary(op, lhs, rhs) => write!(f, "({lhs} {} {rhs})", op.symbol()),
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Quoted(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(source: &str) -> Result<Vec<(usize, Token)>> {
    let chars: Vec<(usize, char)> = source.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '+' | '-' | '*' | '/' | '^' => {
                tokens.push((pos, Token::Op(c)));
                i += 1;
            }
            '(' => {
                tokens.push((pos, Token::LParen));
                i += 1;
            }
            ')' => {
                tokens.push((pos, Token::RParen));
                i += 1;
            }
            '`' => {
                let start = i + 1;
                let mut end = start;
                while end < chars.len() && chars[end].1 != '`' {
                    end += 1;
                }
                if end == chars.len() {
                    return Err(Error::Syntax {
                        position: pos,
                        message: "unterminated backtick-quoted column name".into(),
                    });
                }
                let name: String = chars[start..end].iter().map(|&(_, c)| c).collect();
                if name.is_empty() {
                    return Err(Error::Syntax {
                        position: pos,
                        message: "empty column name".into(),
                    });
                }
                tokens.push((pos, Token::Quoted(name)));
                i = end + 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut end = i;
                while end < chars.len() && (chars[end].1.is_ascii_digit() || chars[end].1 == '.') {
                    end += 1;
                }
                if end < chars.len() && matches!(chars[end].1, 'e' | 'E') {
                    let mut exp = end + 1;
                    if exp < chars.len() && matches!(chars[exp].1, '+' | '-') {
                        exp += 1;
                    }
                    if exp < chars.len() && chars[exp].1.is_ascii_digit() {
                        while exp < chars.len() && chars[exp].1.is_ascii_digit() {
                            exp += 1;
                        }
                        end = exp;
                    }
                }
                let text: String = chars[i..end].iter().map(|&(_, c)| c).collect();
                let value: f64 = text.parse().map_err(|_| Error::Syntax {
                    position: pos,
                    message: format!("invalid number '{text}'"),
                })?;
                tokens.push((pos, Token::Number(value)));
                i = end;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut end = i;
                while end < chars.len()
                    && (chars[end].1.is_ascii_alphanumeric() || chars[end].1 == '_')
                {
                    end += 1;
                }
                let text: String = chars[i..end].iter().map(|&(_, c)| c).collect();
                tokens.push((pos, Token::Ident(text)));
                i = end;
            }
            other => {
                return Err(Error::Syntax {
                    position: pos,
                    message: format!("unexpected character '{other}'"),
                })
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    index: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.index).map(|(_, t)| t)
    }

    fn position(&self) -> usize {
        self.tokens.get(self.index).map_or(self.end, |(p, _)| *p)
    }

    fn next(&mut self) -> Option<(usize, Token)> {
        let t = self.tokens.get(self.index).cloned();
        self.index += 1;
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            position: self.position(),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' {
                BinaryOp::Add
            } else {
                BinaryOp::Sub
            };
            self.index += 1;
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' {
                BinaryOp::Mul
            } else {
                BinaryOp::Div
            };
            self.index += 1;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some(Token::Op('-')) = self.peek() {
            self.index += 1;
            return Ok(Expr::negate(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.index += 1;
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let position = self.position();
        match self.next() {
            Some((_, Token::Number(v))) => Ok(Expr::Number(v)),
            Some((_, Token::Quoted(name))) => Ok(Expr::Column(name)),
            Some((_, Token::Ident(name))) => {
                if let Some(Token::LParen) = self.peek() {
                    let func = Function::from_name(&name)
                        .ok_or(Error::UnknownFunction { name, position })?;
                    self.index += 1;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::call(func, arg))
                } else {
                    Ok(Expr::Column(name))
                }
            }
            Some((_, Token::LParen)) => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Some((p, t)) => Err(Error::Syntax {
                position: p,
                message: format!("unexpected {}", describe(&t)),
            }),
            None => Err(Error::Syntax {
                position,
                message: "unexpected end of expression".into(),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.peek() {
            Some(Token::RParen) => {
                self.index += 1;
                Ok(())
            }
            _ => self.error("expected ')'"),
        }
    }
}

fn describe(t: &Token) -> String {
    match t {
        Token::Number(v) => format!("number {v}"),
        Token::Ident(s) => format!("identifier '{s}'"),
        Token::Quoted(s) => format!("column `{s}`"),
        Token::Op(c) => format!("operator '{c}'"),
        Token::LParen => "'('".into(),
        Token::RParen => "')'".into(),
    }
}

pub fn parse_expression(source: &str) -> Result<Expr> {
    let tokens = tokenize(source)?;
    let mut parser = Parser {
        tokens,
        index: 0,
        end: source.len(),
    };
    let expr = parser.expr()?;
    if parser.index < parser.tokens.len() {
        return parser.error("unexpected trailing input");
    }
    Ok(expr)
}

/// Column values available to an evaluation, keyed by column name.
pub type Bindings<'a> = HashMap<&'a str, &'a [f64]>;

/// Element-wise evaluation. Any non-finite intermediate (log of a
/// non-positive value, division by zero, overflow) aborts with the offending
/// row offset and subexpression.
pub fn evaluate_expression(expr: &Expr, bindings: &Bindings<'_>) -> Result<Vec<f64>> {
    let len = common_length(expr, bindings)?;
    eval_node(expr, bindings, len)
}

fn common_length(expr: &Expr, bindings: &Bindings<'_>) -> Result<usize> {
    let mut len = None;
    for name in expr.columns() {
        let values = bindings
            .get(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_owned()))?;
        match len {
            None => len = Some(values.len()),
            Some(n) if n != values.len() => {
                return Err(Error::Invalid(format!(
                    "bound columns differ in length ({n} vs {} for '{name}')",
                    values.len()
                )))
            }
            _ => {}
        }
    }
    // Literal-only expressions take their length from any binding.
    Ok(len
        .or_else(|| bindings.values().next().map(|v| v.len()))
        .unwrap_or(1))
}

fn domain_error(row: usize, expr: &Expr, message: &str) -> Error {
    Error::Domain {
        row: row as u64,
        expr: expr.to_string(),
        message: message.to_owned(),
    }
}

fn eval_node(expr: &Expr, bindings: &Bindings<'_>, len: usize) -> Result<Vec<f64>> {
    match expr {
        Expr::Column(name) => Ok(bindings[name.as_str()].to_vec()),
        Expr::Number(v) => Ok(vec![*v; len]),
        Expr::Neg(inner) => {
            let mut v = eval_node(inner, bindings, len)?;
            v.iter_mut().for_each(|x| *x = -*x);
            Ok(v)
        }
        Expr::Call(func, arg) => {
            let mut v = eval_node(arg, bindings, len)?;
            for (row, x) in v.iter_mut().enumerate() {
                let input = *x;
                *x = match func {
                    Function::Log10 | Function::Ln if input <= 0.0 => {
                        return Err(domain_error(row, expr, "logarithm of non-positive value"))
                    }
                    Function::Sqrt if input < 0.0 => {
                        return Err(domain_error(row, expr, "square root of negative value"))
                    }
                    Function::Log10 => input.log10(),
                    Function::Ln => input.ln(),
                    Function::Exp => input.exp(),
                    Function::Sqrt => input.sqrt(),
                    Function::Abs => input.abs(),
                };
                if !x.is_finite() {
                    return Err(domain_error(row, expr, "non-finite result"));
                }
            }
            Ok(v)
        }
        Expr::Binary(op, lhs, rhs) => {
            let mut a = eval_node(lhs, bindings, len)?;
            let b = eval_node(rhs, bindings, len)?;
            for (row, (x, &y)) in a.iter_mut().zip(&b).enumerate() {
                *x = match op {
                    BinaryOp::Add => *x + y,
                    BinaryOp::Sub => *x - y,
                    BinaryOp::Mul => *x * y,
                    BinaryOp::Div if y == 0.0 => {
                        return Err(domain_error(row, expr, "division by zero"))
                    }
                    BinaryOp::Div => *x / y,
                    BinaryOp::Pow => x.powf(y),
                };
                if !x.is_finite() {
                    return Err(domain_error(row, expr, "non-finite result"));
                }
            }
            Ok(a)
        }
    }
}

/// Evaluates `expr` chunk by chunk over `store` and appends the result as a
/// derived column named `name`. On any error the store is left unchanged.
pub fn derive_column(store: &ChainStore, name: &str, expr: &Expr) -> Result<ChainStore> {
    if store.has_column(name) {
        return Err(Error::DuplicateColumn(name.to_owned()));
    }
    let referenced: Vec<&str> = expr.columns().into_iter().collect();
    let mut readers = referenced
        .iter()
        .map(|c| store.column_reader(c))
        .collect::<Result<Vec<_>>>()?;

    let chunks = (0..store.n_chunks()).map(|index| {
        let buffers = readers
            .iter_mut()
            .map(|r| r.read_chunk(index))
            .collect::<Result<Vec<_>>>()?;
        let bindings: Bindings<'_> = referenced
            .iter()
            .copied()
            .zip(buffers.iter().map(|b| &b[..]))
            .collect();
        let len = store.chunk_range(index).len();
        let values = if referenced.is_empty() {
            eval_node(expr, &bindings, len)
        } else {
            evaluate_expression(expr, &bindings)
        };
        values.map_err(|e| match e {
            Error::Domain { row, expr, message } => Error::Domain {
                row: row + store.chunk_range(index).start as u64,
                expr,
                message,
            },
            other => other,
        })
    });

    let source = expr.to_string();
    store.append_derived_column(name, Some(&source), chunks)
}
