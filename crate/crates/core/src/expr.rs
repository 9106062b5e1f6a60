//! Coefficient expression language.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := unary ('^' factor)?
//! unary  := '-' unary | atom
//! atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Variables are `t`, `x`, `p`, `q`. `^` is right-associative exponentiation.

use std::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("parse error at byte {offset}: expected {}", expected.join(" or "))]
    Parse { offset: usize, expected: Vec<String> },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{name}` takes {expected} argument(s), got {found}")]
    ArityMismatch {
        name: String,
        expected: String,
        found: usize,
    },
    #[error("variable `{name}` is not allowed in {context}")]
    DisallowedVariable { name: char, context: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
    P,
    Q,
}

impl Var {
    pub fn name(self) -> char {
        match self {
            Var::T => 't',
            Var::X => 'x',
            Var::P => 'p',
            Var::Q => 'q',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
    Clamp,
    Erf,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "clamp" => Func::Clamp,
            "erf" => Func::Erf,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Clamp => "clamp",
            Func::Erf => "erf",
        }
    }

    fn check_arity(self, found: usize) -> Result<(), ExprError> {
        let (ok, expected) = match self {
            Func::Min | Func::Max => (found >= 2, "at least 2"),
            Func::Clamp => (found == 3, "3"),
            _ => (found == 1, "1"),
        };
        if ok {
            Ok(())
        } else {
            Err(ExprError::ArityMismatch {
                name: self.name().into(),
                expected: expected.into(),
                found,
            })
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

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Values bound to the four variables during evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Env {
    pub t: f64,
    pub x: f64,
    pub p: f64,
    pub q: f64,
}

impl Expr {
    /// Evaluates the expression. Domain errors (`log(-1)`, `sqrt(-1)`)
    /// produce NaN.
    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(v) => match v {
                Var::T => env.t,
                Var::X => env.x,
                Var::P => env.p,
                Var::Q => env.q,
            },
            Expr::Neg(e) => -e.eval(env),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(env), b.eval(env));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => {
                        if b == 2.0 {
                            a * a
                        } else {
                            a.powf(b)
                        }
                    }
                }
            }
            Expr::Call(f, args) => {
                let a0 = args[0].eval(env);
                match f {
                    Func::Sin => a0.sin(),
                    Func::Cos => a0.cos(),
                    Func::Exp => a0.exp(),
                    Func::Log => a0.ln(),
                    Func::Sqrt => a0.sqrt(),
                    Func::Abs => a0.abs(),
                    Func::Erf => libm::erf(a0),
                    Func::Min => args[1..].iter().fold(a0, |m, e| m.min(e.eval(env))),
                    Func::Max => args[1..].iter().fold(a0, |m, e| m.max(e.eval(env))),
                    Func::Clamp => {
                        let (lo, hi) = (args[1].eval(env), args[2].eval(env));
                        a0.max(lo).min(hi)
                    }
                }
            }
        }
    }

    pub fn eval_at(&self, t: f64, x: f64, p: f64, q: f64) -> f64 {
        self.eval(&Env { t, x, p, q })
    }

    /// Variables that occur in the expression, in first-use order.
    pub fn variables(&self) -> Vec<Var> {
        fn walk(e: &Expr, out: &mut Vec<Var>) {
            match e {
                Expr::Num(_) => {}
                Expr::Var(v) => {
                    if !out.contains(v) {
                        out.push(*v)
                    }
                }
                Expr::Neg(a) => walk(a, out),
                Expr::Bin(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Expr::Call(_, args) => args.iter().for_each(|a| walk(a, out)),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// Fails if the expression mentions a variable outside `allowed`.
    pub fn restrict(&self, allowed: &[Var], context: &str) -> Result<(), ExprError> {
        match self.variables().into_iter().find(|v| !allowed.contains(v)) {
            Some(v) => Err(ExprError::DisallowedVariable {
                name: v.name(),
                context: context.into(),
            }),
            None => Ok(()),
        }
    }
}

/// Fully parenthesized form that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expression(s)
    }
}

pub fn parse_expression(src: &str) -> Result<Expr, ExprError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.expected(&["operator", "end of input"]));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expected(&self, what: &[&str]) -> ExprError {
        ExprError::Parse {
            offset: self.pos,
            expected: what.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat(b'+') {
                BinOp::Add
            } else if self.eat(b'-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            let op = if self.eat(b'*') {
                BinOp::Mul
            } else if self.eat(b'/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.factor()?));
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.unary()?;
        if self.eat(b'^') {
            Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(self.factor()?)))
        } else {
            Ok(base)
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.atom()
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.expected(&["')'"]));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            _ => Err(self.expected(&["number", "identifier", "'('", "'-'"])),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut n = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(self);
        }
        if n == 0 {
            self.pos = start;
            return Err(self.expected(&["digit"]));
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = mark + 1;
                return Err(self.expected(&["exponent digits"]));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse().map(Expr::Num).map_err(|_| ExprError::Parse {
            offset: start,
            expected: vec!["number".into()],
        })
    }

    fn ident(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let var = match name {
            "t" => Some(Var::T),
            "x" => Some(Var::X),
            "p" => Some(Var::P),
            "q" => Some(Var::Q),
            _ => None,
        };
        if let Some(v) = var {
            return Ok(Expr::Var(v));
        }
        let func = Func::lookup(name).ok_or_else(|| ExprError::UnknownIdentifier {
            name: name.into(),
            offset: start,
        })?;
        if !self.eat(b'(') {
            return Err(self.expected(&["'('"]));
        }
        let mut args = vec![self.expr()?];
        while self.eat(b',') {
            args.push(self.expr()?);
        }
        if !self.eat(b')') {
            return Err(self.expected(&["','", "')'"]));
        }
        func.check_arity(args.len())?;
        Ok(Expr::Call(func, args))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eval(src: &str, env: Env) -> f64 {
        parse_expression(src).unwrap().eval(&env)
    }

    #[test]
    fn examples() {
        assert_eq!(
            eval(
                "p^2/2",
                Env {
                    p: 3.0,
                    ..Env::default()
                }
            ),
            4.5
        );
        assert_eq!(
            eval(
                "clamp(x,0,5)",
                Env {
                    x: 7.0,
                    ..Env::default()
                }
            ),
            5.0
        );
        assert_eq!(eval("1+2*3^2", Env::default()), 19.0);
    }

    #[test]
    fn power_is_right_associative() {
        assert_eq!(eval("2^3^2", Env::default()), 512.0);
        assert_eq!(eval("-2^2", Env::default()), 4.0);
        assert_eq!(eval("2*-3", Env::default()), -6.0);
        assert_eq!(eval("10-4-3", Env::default()), 3.0);
        assert_eq!(eval("1.5e1 + .5", Env::default()), 15.5);
    }

    #[test]
    fn functions_evaluate() {
        let env = Env {
            t: 0.5,
            x: -2.0,
            p: 4.0,
            q: 1.0,
        };
        assert_eq!(eval("abs(x) + sqrt(p) + max(t, q, 0)", env), 5.0);
        assert_eq!(eval("min(x, t)", env), -2.0);
        assert!((eval("erf(q)", env) - 0.842_700_792_949_714_9).abs() < 1e-15);
        assert!((eval("exp(log(p))", env) - 4.0).abs() < 1e-14);
        assert!(eval("log(x)", env).is_nan());
    }

    #[test]
    fn errors_carry_location() {
        match parse_expression("1 + * 2") {
            Err(ExprError::Parse { offset, expected }) => {
                assert_eq!(offset, 4);
                assert!(expected.iter().any(|e| e == "number"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_expression("y + 1"),
            Err(ExprError::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(
            parse_expression("clamp(x, 1)"),
            Err(ExprError::ArityMismatch { found: 2, .. })
        ));
        assert!(matches!(parse_expression("sin x"), Err(ExprError::Parse { .. })));
        assert!(matches!(parse_expression("(1 + 2"), Err(ExprError::Parse { .. })));
        assert!(matches!(
            parse_expression("1 2"),
            Err(ExprError::Parse { offset: 2, .. })
        ));
        assert!(matches!(
            parse_expression(""),
            Err(ExprError::Parse { offset: 0, .. })
        ));
        assert!(matches!(parse_expression("1e"), Err(ExprError::Parse { .. })));
    }

    #[test]
    fn restrict_rejects_foreign_variables() {
        let e = parse_expression("x + p").unwrap();
        assert!(e.restrict(&[Var::X, Var::P], "H").is_ok());
        assert!(e.restrict(&[Var::X], "U").is_err());
    }

    fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr {
        let leaf = depth == 0 || rng.random_bool(0.3);
        if leaf {
            return if rng.random_bool(0.5) {
                Expr::Num((rng.random_range(0.0..100.0f64) * 1000.0).round() / 1000.0)
            } else {
                Expr::Var([Var::T, Var::X, Var::P, Var::Q][rng.random_range(0..4)])
            };
        }
        match rng.random_range(0..4) {
            0 => Expr::Neg(Box::new(random_expr(rng, depth - 1))),
            1 | 2 => {
                let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow][rng.random_range(0..5)];
                Expr::Bin(
                    op,
                    Box::new(random_expr(rng, depth - 1)),
                    Box::new(random_expr(rng, depth - 1)),
                )
            }
            _ => {
                let f = [
                    Func::Sin,
                    Func::Cos,
                    Func::Exp,
                    Func::Log,
                    Func::Sqrt,
                    Func::Abs,
                    Func::Min,
                    Func::Max,
                    Func::Clamp,
                    Func::Erf,
                ][rng.random_range(0..10)];
                let arity = match f {
                    Func::Min | Func::Max => rng.random_range(2..4),
                    Func::Clamp => 3,
                    _ => 1,
                };
                Expr::Call(f, (0..arity).map(|_| random_expr(rng, depth - 1)).collect())
            }
        }
    }

    #[test]
    fn pretty_print_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let e = random_expr(&mut rng, 5);
            let printed = e.to_string();
            let back = parse_expression(&printed).unwrap();
            assert_eq!(back, e, "{printed}");
            assert_eq!(back.to_string(), printed);
        }
    }

    #[test]
    fn parsed_quadratic_matches_builtin() {
        let e = parse_expression("p^2/2").unwrap();
        let h = crate::problem::HamiltonianSpec::quadratic();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let p = rng.random_range(-50.0..50.0);
            assert!((e.eval_at(0.0, 0.0, p, 0.0) - h.eval(0.0, 0.0, p)).abs() <= 1e-15 * (1.0 + p * p));
        }
    }
}
