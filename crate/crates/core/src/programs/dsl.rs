//! A small loop-free language for single-input single-output programs.
//!
//! ```text
//! program  := { "param" IDENT [ "=" expr ] ";" } [ "output" ] expr
//! expr     := or
//! or       := and { "||" and }
//! and      := cmp { "&&" cmp }
//! cmp      := bitor [ ( "==" | "!=" | "<" | "<=" | ">" | ">=" ) bitor ]
//! bitor    := bitxor { "|" bitxor }
//! bitxor   := bitand { "^" bitand }
//! bitand   := shift { "&" shift }
//! shift    := sum { ( "<<" | ">>" ) sum }
//! sum      := product { ( "+" | "-" ) product }
//! product  := unary { ( "*" | "/" | "%" ) unary }
//! unary    := ( "!" | "~" ) unary | primary
//! primary  := INT | "true" | "false" | IDENT | IDENT "(" expr { "," expr } ")"
//!           | "(" expr ")" | if
//! if       := "if" expr "{" expr "}" "else" ( "{" expr "}" | if )
//! ```
//!
//! `A` is the secret input, `N` the input-space size and `K = floor(log2 N)`.
//! Integers are unsigned 64-bit; `+ - *` wrap, shifts by 64 or more give 0,
//! and division or remainder by zero is an evaluation error. Builtins:
//! `popcount(x)`, `isqrt(x)`, `log2(x)` (floor, error at 0), `min(a, b)`,
//! `max(a, b)`. Comments run from `#` or `//` to the end of the line.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unknown identifier `{name}` at {line}:{column}")]
    UnknownIdentifier { name: String, line: usize, column: usize },
    #[error("type error at {line}:{column}: {message}")]
    Type { line: usize, column: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalErrorKind {
    #[error("division by zero")]
    DivisionByZero,
    #[error("remainder by zero")]
    RemainderByZero,
    #[error("log2 of zero")]
    LogOfZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    Int,
    Bool,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ty::Int => "integer",
            Ty::Bool => "boolean",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    BitAnd,
    BitOr,
    BitXor,
    Shl,
    Shr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        use BinOp::*;
        match self {
            Add => "+",
            Sub => "-",
            Mul => "*",
            Div => "/",
            Rem => "%",
            BitAnd => "&",
            BitOr => "|",
            BitXor => "^",
            Shl => "<<",
            Shr => ">>",
            Eq => "==",
            Ne => "!=",
            Lt => "<",
            Le => "<=",
            Gt => ">",
            Ge => ">=",
            And => "&&",
            Or => "||",
        }
    }

    fn precedence(self) -> u8 {
        use BinOp::*;
        match self {
            Or => 1,
            And => 2,
            Eq | Ne | Lt | Le | Gt | Ge => 3,
            BitOr => 4,
            BitXor => 5,
            BitAnd => 6,
            Shl | Shr => 7,
            Add | Sub => 8,
            Mul | Div | Rem => 9,
        }
    }

    fn is_comparison(self) -> bool {
        self.precedence() == 3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    BitNot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Popcount,
    Isqrt,
    Log2,
    Min,
    Max,
}

impl Builtin {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "popcount" => Self::Popcount,
            "isqrt" => Self::Isqrt,
            "log2" => Self::Log2,
            "min" => Self::Min,
            "max" => Self::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Self::Popcount => "popcount",
            Self::Isqrt => "isqrt",
            Self::Log2 => "log2",
            Self::Min => "min",
            Self::Max => "max",
        }
    }

    fn arity(self) -> usize {
        match self {
            Self::Popcount | Self::Isqrt | Self::Log2 => 1,
            Self::Min | Self::Max => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(u64),
    Bool(bool),
    /// The secret input `A`.
    Input,
    /// `N`, the input-space size.
    Size,
    /// `K = floor(log2 N)`.
    Bits,
    /// Index into [`ProgramAst::params`].
    Param(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
    If {
        cond: Box<Expr>,
        then: Box<Expr>,
        otherwise: Box<Expr>,
    },
}

impl Expr {
    /// Whether the value can depend on `N` or `K` directly.
    pub fn mentions_size(&self) -> bool {
        match self {
            Expr::Size | Expr::Bits => true,
            Expr::Int(_) | Expr::Bool(_) | Expr::Input | Expr::Param(_) => false,
            Expr::Unary(_, e) => e.mentions_size(),
            Expr::Binary(_, l, r) => l.mentions_size() || r.mentions_size(),
            Expr::Call(_, args) => args.iter().any(Expr::mentions_size),
            Expr::If { cond, then, otherwise } => {
                cond.mentions_size() || then.mentions_size() || otherwise.mentions_size()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamDecl {
    pub name: String,
    /// May mention `N`, `K` and earlier parameters, never `A`.
    pub default: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramAst {
    pub params: Vec<ParamDecl>,
    pub body: Expr,
}

impl ProgramAst {
    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(u64),
    Ident(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

const SYMBOLS: [&str; 27] = [
    "<<", ">>", "==", "!=", "<=", ">=", "&&", "||", "+", "-", "*", "/", "%", "&", "|", "^", "<", ">", "!", "~", "(",
    ")", "{", "}", ",", ";", "=",
];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut column) = (0usize, 1usize, 1usize);
    let syntax = |line, column, message: String| ParseError::Syntax { line, column, message };

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            column = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_column) = (line, column);
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().filter(|&&c| c != '_').collect();
            column += i - start;
            let parsed = if let Some(hex) = text.strip_prefix("0x") {
                u64::from_str_radix(hex, 16)
            } else if let Some(bin) = text.strip_prefix("0b") {
                u64::from_str_radix(bin, 2)
            } else {
                text.parse::<u64>()
            };
            let value =
                parsed.map_err(|_| syntax(start_line, start_column, format!("invalid integer literal `{text}`")))?;
            tokens.push(Token { tok: Tok::Int(value), line: start_line, column: start_column });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            column += i - start;
            let ident: String = chars[start..i].iter().collect();
            tokens.push(Token { tok: Tok::Ident(ident), line: start_line, column: start_column });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        let symbol = SYMBOLS
            .iter()
            .find(|s| rest.starts_with(**s))
            .ok_or_else(|| syntax(line, column, format!("unexpected character `{c}`")))?;
        i += symbol.len();
        column += symbol.len();
        tokens.push(Token { tok: Tok::Sym(symbol), line: start_line, column: start_column });
    }
    tokens.push(Token { tok: Tok::Eof, line, column });
    Ok(tokens)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    params: &'a [ParamDecl],
    in_default: bool,
}

type Typed = (Expr, Ty);

const KEYWORDS: [&str; 6] = ["param", "output", "if", "else", "true", "false"];

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(x) if *x == s)
    }

    fn at_keyword(&self, k: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(x) if x == k)
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let t = self.peek();
        ParseError::Syntax { line: t.line, column: t.column, message: message.into() }
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.at_sym(s) {
            self.next();
            Ok(())
        } else {
            Err(self.error_here(format!("expected `{s}`, found {}", Self::describe(&self.peek().tok))))
        }
    }

    fn type_error(t: &Token, message: String) -> ParseError {
        ParseError::Type { line: t.line, column: t.column, message }
    }

    fn require(t: &Token, what: &str, actual: Ty, wanted: Ty) -> Result<(), ParseError> {
        if actual == wanted {
            Ok(())
        } else {
            Err(Self::type_error(t, format!("{what} expects {wanted} operands, found {actual}")))
        }
    }

    fn expr(&mut self) -> Result<Typed, ParseError> {
        self.binary_level(1)
    }

    fn binary_op_here(&self) -> Option<BinOp> {
        use BinOp::*;
        let Tok::Sym(s) = &self.peek().tok else { return None };
        Some(match *s {
            "+" => Add,
            "-" => Sub,
            "*" => Mul,
            "/" => Div,
            "%" => Rem,
            "&" => BitAnd,
            "|" => BitOr,
            "^" => BitXor,
            "<<" => Shl,
            ">>" => Shr,
            "==" => Eq,
            "!=" => Ne,
            "<" => Lt,
            "<=" => Le,
            ">" => Gt,
            ">=" => Ge,
            "&&" => And,
            "||" => Or,
            _ => return None,
        })
    }

    fn binary_level(&mut self, level: u8) -> Result<Typed, ParseError> {
        if level > 9 {
            return self.unary();
        }
        let (mut lhs, mut lhs_ty) = self.binary_level(level + 1)?;
        while let Some(op) = self.binary_op_here().filter(|op| op.precedence() == level) {
            let op_token = self.next();
            let (rhs, rhs_ty) = self.binary_level(level + 1)?;
            let result_ty = match op {
                BinOp::And | BinOp::Or => {
                    Self::require(&op_token, op.symbol(), lhs_ty, Ty::Bool)?;
                    Self::require(&op_token, op.symbol(), rhs_ty, Ty::Bool)?;
                    Ty::Bool
                }
                BinOp::Eq | BinOp::Ne => {
                    if lhs_ty != rhs_ty {
                        return Err(Self::type_error(&op_token, format!("cannot compare {lhs_ty} with {rhs_ty}")));
                    }
                    Ty::Bool
                }
                _ => {
                    Self::require(&op_token, op.symbol(), lhs_ty, Ty::Int)?;
                    Self::require(&op_token, op.symbol(), rhs_ty, Ty::Int)?;
                    if op.is_comparison() {
                        Ty::Bool
                    } else {
                        Ty::Int
                    }
                }
            };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
            lhs_ty = result_ty;
            if op.is_comparison() {
                if let Some(next) = self.binary_op_here().filter(|o| o.is_comparison()) {
                    return Err(self.error_here(format!(
                        "comparison operators do not chain; parenthesize before `{}`",
                        next.symbol()
                    )));
                }
                break;
            }
        }
        Ok((lhs, lhs_ty))
    }

    fn unary(&mut self) -> Result<Typed, ParseError> {
        if self.at_sym("!") || self.at_sym("~") {
            let op_token = self.next();
            let (operand, ty) = self.unary()?;
            return if op_token.tok == Tok::Sym("!") {
                Self::require(&op_token, "`!`", ty, Ty::Bool)?;
                Ok((Expr::Unary(UnaryOp::Not, Box::new(operand)), Ty::Bool))
            } else {
                Self::require(&op_token, "`~`", ty, Ty::Int)?;
                Ok((Expr::Unary(UnaryOp::BitNot, Box::new(operand)), Ty::Int))
            };
        }
        self.primary()
    }

    fn if_expr(&mut self) -> Result<Typed, ParseError> {
        let if_token = self.next();
        let (cond, cond_ty) = self.expr()?;
        if cond_ty != Ty::Bool {
            return Err(Self::type_error(&if_token, format!("`if` condition must be boolean, found {cond_ty}")));
        }
        self.expect_sym("{")?;
        let (then, then_ty) = self.expr()?;
        self.expect_sym("}")?;
        if !self.at_keyword("else") {
            return Err(self.error_here("`if` requires an `else` branch"));
        }
        self.next();
        let (otherwise, else_ty) = if self.at_keyword("if") {
            self.if_expr()?
        } else {
            self.expect_sym("{")?;
            let branch = self.expr()?;
            self.expect_sym("}")?;
            branch
        };
        if then_ty != else_ty {
            return Err(Self::type_error(&if_token, format!("`if` branches disagree: {then_ty} vs {else_ty}")));
        }
        let expr = Expr::If { cond: Box::new(cond), then: Box::new(then), otherwise: Box::new(otherwise) };
        Ok((expr, then_ty))
    }

    fn primary(&mut self) -> Result<Typed, ParseError> {
        let token = self.peek().clone();
        match &token.tok {
            Tok::Int(v) => {
                self.next();
                Ok((Expr::Int(*v), Ty::Int))
            }
            Tok::Sym("(") => {
                self.next();
                let inner = self.expr()?;
                self.expect_sym(")")?;
                Ok(inner)
            }
            Tok::Ident(name) if name == "if" => self.if_expr(),
            Tok::Ident(name) if name == "true" || name == "false" => {
                self.next();
                Ok((Expr::Bool(name == "true"), Ty::Bool))
            }
            Tok::Ident(name) if KEYWORDS.contains(&name.as_str()) => {
                Err(self.error_here(format!("unexpected keyword `{name}`")))
            }
            Tok::Ident(name) => {
                self.next();
                if self.at_sym("(") {
                    return self.call(&token, name);
                }
                let expr = match name.as_str() {
                    "A" if self.in_default => {
                        return Err(ParseError::Syntax {
                            line: token.line,
                            column: token.column,
                            message: "parameter defaults cannot depend on the input `A`".into(),
                        })
                    }
                    "A" => Expr::Input,
                    "N" => Expr::Size,
                    "K" => Expr::Bits,
                    _ => match self.params.iter().position(|p| &p.name == name) {
                        Some(i) => Expr::Param(i),
                        None => {
                            return Err(ParseError::UnknownIdentifier {
                                name: name.clone(),
                                line: token.line,
                                column: token.column,
                            })
                        }
                    },
                };
                Ok((expr, Ty::Int))
            }
            other => Err(self.error_here(format!("expected an expression, found {}", Self::describe(other)))),
        }
    }

    fn call(&mut self, name_token: &Token, name: &str) -> Result<Typed, ParseError> {
        let builtin = Builtin::lookup(name).ok_or_else(|| ParseError::UnknownIdentifier {
            name: name.to_string(),
            line: name_token.line,
            column: name_token.column,
        })?;
        self.expect_sym("(")?;
        let mut args = Vec::new();
        loop {
            let arg_token = self.peek().clone();
            let (arg, ty) = self.expr()?;
            Self::require(&arg_token, name, ty, Ty::Int)?;
            args.push(arg);
            if self.at_sym(",") {
                self.next();
            } else {
                break;
            }
        }
        self.expect_sym(")")?;
        if args.len() != builtin.arity() {
            return Err(Self::type_error(
                name_token,
                format!("`{name}` takes {} argument(s), got {}", builtin.arity(), args.len()),
            ));
        }
        Ok((Expr::Call(builtin, args), Ty::Int))
    }
}

/// Parses and type-checks a program. The body must be an integer expression.
pub fn parse_program(text: &str) -> Result<ProgramAst, ParseError> {
    let tokens = lex(text)?;
    let mut params: Vec<ParamDecl> = Vec::new();
    let mut pos = 0usize;

    loop {
        let mut parser = Parser { tokens: tokens.clone(), pos, params: &params, in_default: true };
        if !parser.at_keyword("param") {
            break;
        }
        parser.next();
        let name_token = parser.next();
        let name = match &name_token.tok {
            Tok::Ident(n) if !KEYWORDS.contains(&n.as_str()) && !matches!(n.as_str(), "A" | "N" | "K") => n.clone(),
            other => {
                return Err(ParseError::Syntax {
                    line: name_token.line,
                    column: name_token.column,
                    message: format!("expected a parameter name, found {}", Parser::describe(other)),
                })
            }
        };
        if params.iter().any(|p| p.name == name) || Builtin::lookup(&name).is_some() {
            return Err(ParseError::Syntax {
                line: name_token.line,
                column: name_token.column,
                message: format!("parameter `{name}` is already defined"),
            });
        }
        let default = if parser.at_sym("=") {
            parser.next();
            let value_token = parser.peek().clone();
            let (expr, ty) = parser.expr()?;
            Parser::require(&value_token, "a parameter default", ty, Ty::Int)?;
            Some(expr)
        } else {
            None
        };
        parser.expect_sym(";")?;
        pos = parser.pos;
        params.push(ParamDecl { name, default });
    }

    let mut parser = Parser { tokens, pos, params: &params, in_default: false };
    if parser.at_keyword("output") {
        parser.next();
    }
    let body_token = parser.peek().clone();
    let (body, ty) = parser.expr()?;
    if ty != Ty::Int {
        return Err(Parser::type_error(&body_token, format!("program output must be an integer, found {ty}")));
    }
    if parser.peek().tok != Tok::Eof {
        return Err(parser
            .error_here(format!("unexpected {} after the output expression", Parser::describe(&parser.peek().tok))));
    }
    Ok(ProgramAst { params, body })
}

// ---------------------------------------------------------------------------
// Pretty printing

struct ExprPrinter<'a> {
    expr: &'a Expr,
    params: &'a [ParamDecl],
}

impl ExprPrinter<'_> {
    fn child<'b>(&'b self, expr: &'b Expr) -> ExprPrinter<'b> {
        ExprPrinter { expr, params: self.params }
    }

    fn operand(&self, f: &mut fmt::Formatter<'_>, expr: &Expr, parent: u8, strict: bool) -> fmt::Result {
        let needs_parens = match expr {
            Expr::Binary(op, ..) => {
                let p = op.precedence();
                p < parent || (strict && p == parent)
            }
            _ => false,
        };
        if needs_parens {
            write!(f, "({})", self.child(expr))
        } else {
            write!(f, "{}", self.child(expr))
        }
    }
}

impl fmt::Display for ExprPrinter<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.expr {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Input => f.write_str("A"),
            Expr::Size => f.write_str("N"),
            Expr::Bits => f.write_str("K"),
            Expr::Param(i) => f.write_str(&self.params[*i].name),
            Expr::Unary(op, inner) => {
                f.write_str(match op {
                    UnaryOp::Not => "!",
                    UnaryOp::BitNot => "~",
                })?;
                if matches!(**inner, Expr::Binary(..)) {
                    write!(f, "({})", self.child(inner))
                } else {
                    write!(f, "{}", self.child(inner))
                }
            }
            Expr::Binary(op, lhs, rhs) => {
                let p = op.precedence();
                self.operand(f, lhs, p, op.is_comparison())?;
                write!(f, " {} ", op.symbol())?;
                self.operand(f, rhs, p, true)
            }
            Expr::Call(builtin, args) => {
                write!(f, "{}(", builtin.name())?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", self.child(arg))?;
                }
                f.write_str(")")
            }
            Expr::If { cond, then, otherwise } => {
                write!(f, "if {} {{ {} }} else ", self.child(cond), self.child(then))?;
                if matches!(**otherwise, Expr::If { .. }) {
                    write!(f, "{}", self.child(otherwise))
                } else {
                    write!(f, "{{ {} }}", self.child(otherwise))
                }
            }
        }
    }
}

impl fmt::Display for ProgramAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.params {
            match &p.default {
                Some(d) => writeln!(f, "param {} = {};", p.name, ExprPrinter { expr: d, params: &self.params })?,
                None => writeln!(f, "param {};", p.name)?,
            }
        }
        write!(f, "{}", ExprPrinter { expr: &self.body, params: &self.params })
    }
}

// ---------------------------------------------------------------------------
// Evaluation

/// Evaluation context; booleans are carried as 0/1 after type checking.
#[derive(Debug, Clone, Copy)]
pub struct Env<'a> {
    pub input: u64,
    pub size: u64,
    pub params: &'a [u64],
}

pub fn bits_of(size: u64) -> u64 {
    if size == 0 {
        0
    } else {
        63 - size.leading_zeros() as u64
    }
}

pub fn eval(expr: &Expr, env: &Env<'_>) -> Result<u64, EvalErrorKind> {
    Ok(match expr {
        Expr::Int(v) => *v,
        Expr::Bool(b) => *b as u64,
        Expr::Input => env.input,
        Expr::Size => env.size,
        Expr::Bits => bits_of(env.size),
        Expr::Param(i) => env.params[*i],
        Expr::Unary(UnaryOp::Not, e) => (eval(e, env)? == 0) as u64,
        Expr::Unary(UnaryOp::BitNot, e) => !eval(e, env)?,
        Expr::Binary(BinOp::And, l, r) => (eval(l, env)? != 0 && eval(r, env)? != 0) as u64,
        Expr::Binary(BinOp::Or, l, r) => (eval(l, env)? != 0 || eval(r, env)? != 0) as u64,
        Expr::Binary(op, l, r) => {
            let (a, b) = (eval(l, env)?, eval(r, env)?);
            match op {
                BinOp::Add => a.wrapping_add(b),
                BinOp::Sub => a.wrapping_sub(b),
                BinOp::Mul => a.wrapping_mul(b),
                BinOp::Div => a.checked_div(b).ok_or(EvalErrorKind::DivisionByZero)?,
                BinOp::Rem => a.checked_rem(b).ok_or(EvalErrorKind::RemainderByZero)?,
                BinOp::BitAnd => a & b,
                BinOp::BitOr => a | b,
                BinOp::BitXor => a ^ b,
                BinOp::Shl => u32::try_from(b).ok().and_then(|s| a.checked_shl(s)).unwrap_or(0),
                BinOp::Shr => u32::try_from(b).ok().and_then(|s| a.checked_shr(s)).unwrap_or(0),
                BinOp::Eq => (a == b) as u64,
                BinOp::Ne => (a != b) as u64,
                BinOp::Lt => (a < b) as u64,
                BinOp::Le => (a <= b) as u64,
                BinOp::Gt => (a > b) as u64,
                BinOp::Ge => (a >= b) as u64,
                BinOp::And | BinOp::Or => unreachable!("short-circuit operators handled above"),
            }
        }
        Expr::Call(builtin, args) => {
            let x = eval(&args[0], env)?;
            match builtin {
                Builtin::Popcount => x.count_ones() as u64,
                Builtin::Isqrt => x.isqrt(),
                Builtin::Log2 => x.checked_ilog2().ok_or(EvalErrorKind::LogOfZero)? as u64,
                Builtin::Min => x.min(eval(&args[1], env)?),
                Builtin::Max => x.max(eval(&args[1], env)?),
            }
        }
        Expr::If { cond, then, otherwise } => {
            if eval(cond, env)? != 0 {
                eval(then, env)?
            } else {
                eval(otherwise, env)?
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run(src: &str, input: u64, size: u64, params: &[u64]) -> Result<u64, EvalErrorKind> {
        let ast = parse_program(src).unwrap();
        eval(&ast.body, &Env { input, size, params })
    }

    #[test]
    fn parses_corpus_bodies() {
        let p1 = parse_program("if A % 8 == 0 { A } else { 1 }").unwrap();
        assert_eq!(
            p1.body,
            Expr::If {
                cond: Box::new(Expr::Binary(
                    BinOp::Eq,
                    Box::new(Expr::Binary(BinOp::Rem, Box::new(Expr::Input), Box::new(Expr::Int(8)))),
                    Box::new(Expr::Int(0)),
                )),
                then: Box::new(Expr::Input),
                otherwise: Box::new(Expr::Int(1)),
            }
        );
        let p2 = parse_program("A & ((1 << (K/8 + 1)) - 1)").unwrap();
        assert!(matches!(p2.body, Expr::Binary(BinOp::BitAnd, _, _)));
        let p4 = parse_program("param L; if A >= L { 1 } else { 0 }").unwrap();
        assert_eq!(p4.params.len(), 1);
    }

    #[test]
    fn evaluates_with_precedence() {
        assert_eq!(run("1 + 2 * 3", 0, 1, &[]), Ok(7));
        assert_eq!(run("if A & 1 == 0 { 10 } else { 20 }", 3, 4, &[]), Ok(20));
        assert_eq!(run("16 >> 2 + 1", 0, 1, &[]), Ok(2));
        assert_eq!(run("0 - 1", 0, 1, &[]), Ok(u64::MAX));
        assert_eq!(run("1 << 64", 0, 1, &[]), Ok(0));
        assert_eq!(run("popcount(0b1011) + isqrt(17) + log2(N)", 0, 1024, &[]), Ok(3 + 4 + 10));
        assert_eq!(run("max(A, 3) - min(A, 3)", 7, 8, &[]), Ok(4));
        assert_eq!(run("K", 0, 1000, &[]), Ok(9));
    }

    #[test]
    fn p2_mask_keeps_low_bits() {
        // 16-bit input: k = 2, mask is 0b111.
        assert_eq!(run("A & ((1 << (K/8 + 1)) - 1)", 0xFFFF, 1 << 16, &[]), Ok(7));
    }

    #[test]
    fn else_if_chains() {
        let src = "if A < 2 { 0 } else if A < 4 { 1 } else { 2 }";
        assert_eq!(run(src, 1, 8, &[]), Ok(0));
        assert_eq!(run(src, 3, 8, &[]), Ok(1));
        assert_eq!(run(src, 5, 8, &[]), Ok(2));
    }

    #[test]
    fn evaluation_errors() {
        assert_eq!(run("A / (A - A)", 3, 4, &[]), Err(EvalErrorKind::DivisionByZero));
        assert_eq!(run("A % 0", 3, 4, &[]), Err(EvalErrorKind::RemainderByZero));
        assert_eq!(run("log2(A)", 0, 4, &[]), Err(EvalErrorKind::LogOfZero));
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_program("if A == 1 { 1 }\n else { 2 ") {
            Err(ParseError::Syntax { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse_program("A +") {
            Err(ParseError::Syntax { line: 1, column: 4, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_program("1 < 2 < 3"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_program("A $ 2"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_program("if A == 1 { 1 }"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_program("param L = A; L"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_program("param L; param L; L"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_program("99999999999999999999999"), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn unknown_identifiers() {
        assert_eq!(parse_program("A + B"), Err(ParseError::UnknownIdentifier { name: "B".into(), line: 1, column: 5 }));
        assert!(matches!(parse_program("frobnicate(A)"), Err(ParseError::UnknownIdentifier { .. })));
        // Parameters are only visible after their declaration.
        assert!(matches!(parse_program("param L = M; param M; L"), Err(ParseError::UnknownIdentifier { .. })));
    }

    #[test]
    fn type_errors() {
        assert!(matches!(parse_program("(A == 1) + 2"), Err(ParseError::Type { .. })));
        assert!(matches!(parse_program("A == 1"), Err(ParseError::Type { .. })));
        assert!(matches!(parse_program("if A { 1 } else { 0 }"), Err(ParseError::Type { .. })));
        assert!(matches!(parse_program("if A == 0 { true } else { 0 }"), Err(ParseError::Type { .. })));
        assert!(matches!(parse_program("!A"), Err(ParseError::Type { .. })));
        assert!(matches!(parse_program("A && true"), Err(ParseError::Type { .. })));
        assert!(matches!(parse_program("min(A)"), Err(ParseError::Type { .. })));
        assert!(matches!(parse_program("(A == 1) == 2"), Err(ParseError::Type { .. })));
    }

    #[test]
    fn comments_and_output_keyword() {
        let ast =
            parse_program("# password check\nparam L = N / 2; // default\noutput if A == L { 1 } else { 0 }").unwrap();
        assert_eq!(ast.params[0].name, "L");
        assert!(ast.params[0].default.is_some());
    }

    #[test]
    fn pretty_print_round_trips_examples() {
        for src in [
            "if A % 8 == 0 { A } else { 1 }",
            "A & ((1 << (K/8 + 1)) - 1)",
            "param L = 1; if K % 2 == 0 { A % 2 } else if A == L { 1 } else { 0 }",
            "(A - 1) - (2 - A) * (3 + A)",
            "if !(A < 2 || A > 5 && true) { ~(A ^ 3) | 4 } else { N >> K }",
        ] {
            let ast = parse_program(src).unwrap();
            let printed = ast.to_string();
            assert_eq!(parse_program(&printed).unwrap(), ast, "{printed}");
        }
    }

    // Random well-typed integer expressions over A, N, K and one parameter.
    fn arb_int_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0u64..20).prop_map(Expr::Int),
            Just(Expr::Input),
            Just(Expr::Size),
            Just(Expr::Bits),
            Just(Expr::Param(0)),
        ];
        leaf.prop_recursive(4, 32, 3, |inner| {
            let arith = prop_oneof![
                Just(BinOp::Add),
                Just(BinOp::Sub),
                Just(BinOp::Mul),
                Just(BinOp::Div),
                Just(BinOp::Rem),
                Just(BinOp::BitAnd),
                Just(BinOp::BitOr),
                Just(BinOp::BitXor),
                Just(BinOp::Shl),
                Just(BinOp::Shr),
            ];
            let cmp = prop_oneof![
                Just(BinOp::Eq),
                Just(BinOp::Ne),
                Just(BinOp::Lt),
                Just(BinOp::Le),
                Just(BinOp::Gt),
                Just(BinOp::Ge),
            ];
            prop_oneof![
                (arith, inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::Binary(op, Box::new(l), Box::new(r))),
                inner.clone().prop_map(|e| Expr::Unary(UnaryOp::BitNot, Box::new(e))),
                inner.clone().prop_map(|e| Expr::Call(Builtin::Popcount, vec![e])),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Call(Builtin::Max, vec![a, b])),
                (cmp, inner.clone(), inner.clone(), inner.clone(), inner.clone(), any::<bool>()).prop_map(
                    |(op, l, r, t, e, negate)| {
                        let mut cond = Expr::Binary(op, Box::new(l), Box::new(r));
                        if negate {
                            cond = Expr::Unary(UnaryOp::Not, Box::new(cond));
                        }
                        Expr::If { cond: Box::new(cond), then: Box::new(t), otherwise: Box::new(e) }
                    }
                ),
            ]
        })
    }

    proptest! {
        #[test]
        fn parse_pretty_round_trip(body in arb_int_expr()) {
            let ast = ProgramAst {
                params: vec![ParamDecl { name: "L".into(), default: Some(Expr::Binary(BinOp::Div, Box::new(Expr::Size), Box::new(Expr::Int(2)))) }],
                body,
            };
            let printed = ast.to_string();
            let reparsed = parse_program(&printed).map_err(|e| TestCaseError::fail(format!("{e}: {printed}")))?;
            prop_assert_eq!(&reparsed, &ast);
            prop_assert_eq!(reparsed.to_string(), printed);
        }
    }
}
