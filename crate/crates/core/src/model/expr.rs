//! Integer expressions over the program input and local variables.
//!
//! Everything evaluates to an `i64`; predicates are expressions read as
//! "nonzero is true". Arithmetic wraps at 64 bits and division by zero
//! yields zero, so evaluation is total.

use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Lit(i64),
    /// Variable reference; the slot is resolved against the owning function.
    Var { name: String, slot: usize },
    /// `in[i]`, zero when out of range.
    Input(Box<Expr>),
    /// `len`, the input length.
    Len,
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// `is_digit(e)`: 1 when `e` is an ASCII digit code.
    IsDigit(Box<Expr>),
    /// `strlen(p)`: bytes from offset `p` up to the first NUL or the end.
    Strlen(Box<Expr>),
    /// `strncmp(p, "lit")`: C-style comparison of `len(lit)` input bytes at
    /// offset `p` against the literal; 0 when equal.
    Strncmp(Box<Expr>, Vec<u8>),
}

/// Read-only view of the machine state an expression sees.
pub struct EvalCtx<'a> {
    pub input: &'a [u8],
    pub vars: &'a [i64],
}

impl EvalCtx<'_> {
    fn byte(&self, idx: i64) -> i64 {
        if idx < 0 {
            return 0;
        }
        self.input.get(idx as usize).map_or(0, |&b| b as i64)
    }
}

impl Expr {
    pub fn eval(&self, ctx: &EvalCtx<'_>) -> i64 {
        match self {
            Expr::Lit(v) => *v,
            Expr::Var { slot, .. } => ctx.vars.get(*slot).copied().unwrap_or(0),
            Expr::Input(i) => ctx.byte(i.eval(ctx)),
            Expr::Len => ctx.input.len() as i64,
            Expr::Not(e) => (e.eval(ctx) == 0) as i64,
            Expr::Neg(e) => e.eval(ctx).wrapping_neg(),
            Expr::IsDigit(e) => (b'0' as i64..=b'9' as i64).contains(&e.eval(ctx)) as i64,
            Expr::Strlen(p) => {
                let start = p.eval(ctx);
                if start < 0 || start as usize >= ctx.input.len() {
                    return 0;
                }
                ctx.input[start as usize..]
                    .iter()
                    .take_while(|&&b| b != 0)
                    .count() as i64
            }
            Expr::Strncmp(p, lit) => {
                let start = p.eval(ctx);
                for (k, &want) in lit.iter().enumerate() {
                    let got = ctx.byte(start.wrapping_add(k as i64));
                    if got != want as i64 {
                        return if got < want as i64 { -1 } else { 1 };
                    }
                    if got == 0 {
                        break;
                    }
                }
                0
            }
            Expr::Bin(op, l, r) => {
                // Short-circuit so `&&`/`||` read like C.
                match op {
                    BinOp::And => return (l.eval(ctx) != 0 && r.eval(ctx) != 0) as i64,
                    BinOp::Or => return (l.eval(ctx) != 0 || r.eval(ctx) != 0) as i64,
                    _ => {}
                }
                let (a, b) = (l.eval(ctx), r.eval(ctx));
                match op {
                    BinOp::Add => a.wrapping_add(b),
                    BinOp::Sub => a.wrapping_sub(b),
                    BinOp::Mul => a.wrapping_mul(b),
                    BinOp::Div => {
                        if b == 0 {
                            0
                        } else {
                            a.wrapping_div(b)
                        }
                    }
                    BinOp::Rem => {
                        if b == 0 {
                            0
                        } else {
                            a.wrapping_rem(b)
                        }
                    }
                    BinOp::Lt => (a < b) as i64,
                    BinOp::Le => (a <= b) as i64,
                    BinOp::Gt => (a > b) as i64,
                    BinOp::Ge => (a >= b) as i64,
                    BinOp::Eq => (a == b) as i64,
                    BinOp::Ne => (a != b) as i64,
                    BinOp::And | BinOp::Or => unreachable!(),
                }
            }
        }
    }

    /// Names of all variables the expression reads.
    pub fn uses(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_uses(&mut out);
        out
    }

    fn collect_uses(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var { name, .. } => {
                out.insert(name.clone());
            }
            Expr::Lit(_) | Expr::Len => {}
            Expr::Input(e)
            | Expr::Not(e)
            | Expr::Neg(e)
            | Expr::IsDigit(e)
            | Expr::Strlen(e)
            | Expr::Strncmp(e, _) => e.collect_uses(out),
            Expr::Bin(_, l, r) => {
                l.collect_uses(out);
                r.collect_uses(out);
            }
        }
    }

    pub(crate) fn resolve_slots(&mut self, slot_of: &mut impl FnMut(&str) -> usize) {
        match self {
            Expr::Var { name, slot } => *slot = slot_of(name),
            Expr::Lit(_) | Expr::Len => {}
            Expr::Input(e)
            | Expr::Not(e)
            | Expr::Neg(e)
            | Expr::IsDigit(e)
            | Expr::Strlen(e)
            | Expr::Strncmp(e, _) => e.resolve_slots(slot_of),
            Expr::Bin(_, l, r) => {
                l.resolve_slots(slot_of);
                r.resolve_slots(slot_of);
            }
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        match self {
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Var { name, .. } => f.write_str(name),
            Expr::Input(i) => write!(f, "in[{i}]"),
            Expr::Len => f.write_str("len"),
            Expr::Not(e) => {
                f.write_str("!")?;
                e.fmt_prec(f, 6)
            }
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.fmt_prec(f, 6)
            }
            Expr::IsDigit(e) => write!(f, "is_digit({e})"),
            Expr::Strlen(e) => write!(f, "strlen({e})"),
            Expr::Strncmp(e, lit) => {
                write!(f, "strncmp({e}, \"")?;
                for &b in lit {
                    match b {
                        b'"' => f.write_str("\\\"")?,
                        b'\\' => f.write_str("\\\\")?,
                        0x20..=0x7e => write!(f, "{}", b as char)?,
                        _ => write!(f, "\\x{b:02x}")?,
                    }
                }
                f.write_str("\")")
            }
            Expr::Bin(op, l, r) => {
                let p = op.precedence();
                if p < parent {
                    f.write_str("(")?;
                }
                l.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                // Left-associative: the right operand needs strictly higher binding.
                r.fmt_prec(f, p + 1)?;
                if p < parent {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Ident(String),
    Str(Vec<u8>),
    Sym(&'static str),
}

fn tokenize(src: &str) -> Result<Vec<Tok>, String> {
    const SYMS: [&str; 19] = [
        "&&", "||", "==", "!=", "<=", ">=", "<", ">", "+", "-", "*", "/", "%", "!", "(", ")", "[",
        "]", ",",
    ];
    let bytes = src.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    'outer: while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let (radix, digits_start) =
                if c == b'0' && matches!(bytes.get(i + 1), Some(b'x') | Some(b'X')) {
                    i += 2;
                    (16, i)
                } else {
                    (10, i)
                };
            while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                i += 1;
            }
            let text = &src[digits_start..i];
            let v = i64::from_str_radix(text, radix)
                .map_err(|_| format!("bad integer literal `{}`", &src[start..i]))?;
            out.push(Tok::Int(v));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Tok::Ident(src[start..i].to_string()));
            continue;
        }
        if c == b'\'' || c == b'"' {
            let quote = c;
            i += 1;
            let mut lit = Vec::new();
            loop {
                let Some(&b) = bytes.get(i) else {
                    return Err("unterminated literal".into());
                };
                i += 1;
                if b == quote {
                    break;
                }
                if b == b'\\' {
                    let Some(&e) = bytes.get(i) else {
                        return Err("unterminated escape".into());
                    };
                    i += 1;
                    match e {
                        b'n' => lit.push(b'\n'),
                        b't' => lit.push(b'\t'),
                        b'0' => lit.push(0),
                        b'\\' | b'\'' | b'"' => lit.push(e),
                        b'x' => {
                            let hex = src.get(i..i + 2).ok_or("truncated \\x escape")?;
                            lit.push(u8::from_str_radix(hex, 16).map_err(|_| "bad \\x escape")?);
                            i += 2;
                        }
                        _ => return Err(format!("unknown escape `\\{}`", e as char)),
                    }
                } else {
                    lit.push(b);
                }
            }
            if quote == b'\'' {
                if lit.len() != 1 {
                    return Err("character literal must hold one byte".into());
                }
                out.push(Tok::Int(lit[0] as i64));
            } else {
                out.push(Tok::Str(lit));
            }
            continue;
        }
        for sym in SYMS {
            if src[i..].starts_with(sym) {
                out.push(Tok::Sym(sym));
                i += sym.len();
                continue 'outer;
            }
        }
        return Err(format!("unexpected character `{}`", c as char));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), String> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(format!("expected `{sym}`"))
        }
    }

    fn binop(&self) -> Option<BinOp> {
        let Some(Tok::Sym(s)) = self.peek() else {
            return None;
        };
        Some(match *s {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "&&" => BinOp::And,
            "||" => BinOp::Or,
            _ => return None,
        })
    }

    fn expr(&mut self, min_prec: u8) -> Result<Expr, String> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let p = op.precedence();
            if p < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.expr(p + 1)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, String> {
        if self.eat_sym("!") {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        if self.eat_sym("-") {
            return Ok(match self.unary()? {
                Expr::Lit(v) => Expr::Lit(v.wrapping_neg()),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, String> {
        let tok = self.peek().cloned().ok_or("unexpected end of expression")?;
        self.pos += 1;
        match tok {
            Tok::Int(v) => Ok(Expr::Lit(v)),
            Tok::Sym("(") => {
                let e = self.expr(0)?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "in" => {
                    self.expect_sym("[")?;
                    let e = self.expr(0)?;
                    self.expect_sym("]")?;
                    Ok(Expr::Input(Box::new(e)))
                }
                "len" => Ok(Expr::Len),
                "is_digit" | "strlen" => {
                    self.expect_sym("(")?;
                    let e = Box::new(self.expr(0)?);
                    self.expect_sym(")")?;
                    Ok(if name == "is_digit" {
                        Expr::IsDigit(e)
                    } else {
                        Expr::Strlen(e)
                    })
                }
                "strncmp" => {
                    self.expect_sym("(")?;
                    let e = Box::new(self.expr(0)?);
                    self.expect_sym(",")?;
                    let lit = match self.peek() {
                        Some(Tok::Str(s)) => s.clone(),
                        _ => return Err("strncmp expects a string literal".into()),
                    };
                    self.pos += 1;
                    self.expect_sym(")")?;
                    Ok(Expr::Strncmp(e, lit))
                }
                _ => Ok(Expr::Var { name, slot: 0 }),
            },
            Tok::Str(_) => Err("string literal only allowed in strncmp".into()),
            Tok::Sym(s) => Err(format!("unexpected `{s}`")),
        }
    }
}

/// Parses an expression. Variable slots are left at 0 until the owning
/// function resolves them.
pub fn parse_expr(src: &str) -> Result<Expr, String> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr(0)?;
    if p.pos != p.toks.len() {
        return Err(format!("trailing input after expression in `{src}`"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, input: &[u8]) -> i64 {
        let e = parse_expr(src).unwrap();
        e.eval(&EvalCtx { input, vars: &[] })
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", b""), 7);
        assert_eq!(eval("10 - 3 - 2", b""), 5);
        assert_eq!(eval("(1 + 2) * 3", b""), 9);
        assert_eq!(eval("1 < 2 && 3 < 2 || 1", b""), 1);
        assert_eq!(eval("!0 + 1", b""), 2);
    }

    #[test]
    fn input_reads_are_total() {
        assert_eq!(eval("in[0]", b"A"), 65);
        assert_eq!(eval("in[5]", b"A"), 0);
        assert_eq!(eval("in[-1]", b"A"), 0);
        assert_eq!(eval("len", b"abc"), 3);
    }

    #[test]
    fn wraps_at_64_bits() {
        assert_eq!(eval("9223372036854775807 + 1", b""), i64::MIN);
        assert_eq!(eval("7 / 0", b""), 0);
        assert_eq!(eval("7 % 0", b""), 0);
    }

    #[test]
    fn string_helpers() {
        let input = b"\x00_GLOBAL_Bob";
        assert_eq!(eval("strlen(1)", input), 11);
        assert_eq!(eval("strncmp(1, \"_GLOBAL_\")", input), 0);
        assert_ne!(eval("strncmp(2, \"_GLOBAL_\")", input), 0);
        assert_eq!(eval("is_digit(in[9])", input), 0);
        assert_eq!(eval("is_digit('7')", b""), 1);
        assert_eq!(eval("strlen(0)", b"ab\x00cd"), 2);
    }

    #[test]
    fn display_reparses_to_same_tree() {
        for src in [
            "a - (b - c)",
            "!(x < 3) && in[i + 1] != '0'",
            "strncmp(p, \"a\\\"b\") == 0 || strlen(p) >= 9",
            "-x * (y + 2)",
        ] {
            let e = parse_expr(src).unwrap();
            let again = parse_expr(&e.to_string()).unwrap();
            assert_eq!(e, again, "{src} -> {e}");
        }
    }

    #[test]
    fn reports_errors() {
        assert!(parse_expr("1 +").is_err());
        assert!(parse_expr("in[1").is_err());
        assert!(parse_expr("\"x\"").is_err());
        assert!(parse_expr("1 2").is_err());
        assert!(parse_expr("a $ b").is_err());
    }
}
