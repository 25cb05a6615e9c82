use indexmap::IndexMap;

use super::ScenarioError;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Min,
    Max,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "abs" => Some(Func::Abs),
            "min" => Some(Func::Min),
            "max" => Some(Func::Max),
            _ => None,
        }
    }
}

/// Expression over previously declared names, used for derived values and
/// `require` constraints.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Tag(String),
    Var(String),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
}

/// Intermediate evaluation result; booleans only exist inside expressions.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Eval {
    Num(f64),
    Tag(String),
    Bool(bool),
}

impl Eval {
    fn kind(&self) -> &'static str {
        match self {
            Eval::Num(_) => "number",
            Eval::Tag(_) => "tag",
            Eval::Bool(_) => "boolean",
        }
    }
}

impl Expr {
    /// Names referenced anywhere in the expression, in first-use order.
    pub fn names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Num(_) | Expr::Tag(_) => {}
            Expr::Var(n) => {
                if !out.contains(&n.as_str()) {
                    out.push(n);
                }
            }
            Expr::Neg(e) | Expr::Not(e) => e.collect_names(out),
            Expr::Binary(_, a, b) => {
                a.collect_names(out);
                b.collect_names(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_names(out)),
            Expr::If(c, a, b) => {
                c.collect_names(out);
                a.collect_names(out);
                b.collect_names(out);
            }
        }
    }

    pub(crate) fn eval(&self, env: &IndexMap<String, Value>, ctx: &str) -> Result<Eval, ScenarioError> {
        let mismatch = |detail: String| ScenarioError::TypeMismatch {
            name: ctx.to_string(),
            detail,
        };
        Ok(match self {
            Expr::Num(x) => Eval::Num(*x),
            Expr::Tag(s) => Eval::Tag(s.clone()),
            Expr::Var(n) => match env.get(n) {
                Some(Value::Real(x)) => Eval::Num(*x),
                Some(Value::Tag(s)) => Eval::Tag(s.clone()),
                None => {
                    return Err(ScenarioError::UnknownName {
                        name: n.clone(),
                        pos: None,
                    })
                }
            },
            Expr::Neg(e) => match e.eval(env, ctx)? {
                Eval::Num(x) => Eval::Num(-x),
                other => return Err(mismatch(format!("cannot negate a {}", other.kind()))),
            },
            Expr::Not(e) => match e.eval(env, ctx)? {
                Eval::Bool(b) => Eval::Bool(!b),
                other => return Err(mismatch(format!("`not` applied to a {}", other.kind()))),
            },
            Expr::If(c, a, b) => match c.eval(env, ctx)? {
                Eval::Bool(true) => a.eval(env, ctx)?,
                Eval::Bool(false) => b.eval(env, ctx)?,
                other => return Err(mismatch(format!("`if` condition is a {}", other.kind()))),
            },
            Expr::Call(f, args) => {
                let nums = args
                    .iter()
                    .map(|a| match a.eval(env, ctx)? {
                        Eval::Num(x) => Ok(x),
                        other => Err(mismatch(format!("{f:?} argument is a {}", other.kind()))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                match f {
                    Func::Abs => Eval::Num(nums[0].abs()),
                    Func::Min => Eval::Num(nums.iter().copied().fold(f64::INFINITY, f64::min)),
                    Func::Max => Eval::Num(nums.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                }
            }
            Expr::Binary(op, a, b) => {
                // short-circuit so that guarded divisions are safe
                if matches!(op, BinOp::And | BinOp::Or) {
                    let lhs = match a.eval(env, ctx)? {
                        Eval::Bool(x) => x,
                        other => return Err(mismatch(format!("logical operand is a {}", other.kind()))),
                    };
                    if (*op == BinOp::And && !lhs) || (*op == BinOp::Or && lhs) {
                        return Ok(Eval::Bool(lhs));
                    }
                    return match b.eval(env, ctx)? {
                        Eval::Bool(x) => Ok(Eval::Bool(x)),
                        other => Err(mismatch(format!("logical operand is a {}", other.kind()))),
                    };
                }
                let lhs = a.eval(env, ctx)?;
                let rhs = b.eval(env, ctx)?;
                match (op, lhs, rhs) {
                    (BinOp::Eq, l, r) => Eval::Bool(eval_eq(&l, &r).map_err(mismatch)?),
                    (BinOp::Ne, l, r) => Eval::Bool(!eval_eq(&l, &r).map_err(mismatch)?),
                    (op, Eval::Num(x), Eval::Num(y)) => match op {
                        BinOp::Add => Eval::Num(x + y),
                        BinOp::Sub => Eval::Num(x - y),
                        BinOp::Mul => Eval::Num(x * y),
                        BinOp::Div => {
                            if y == 0.0 {
                                return Err(ScenarioError::DivisionByZero { name: ctx.to_string() });
                            }
                            Eval::Num(x / y)
                        }
                        BinOp::Lt => Eval::Bool(x < y),
                        BinOp::Le => Eval::Bool(x <= y),
                        BinOp::Gt => Eval::Bool(x > y),
                        BinOp::Ge => Eval::Bool(x >= y),
                        BinOp::Eq | BinOp::Ne | BinOp::And | BinOp::Or => unreachable!(),
                    },
                    (op, l, r) => {
                        return Err(mismatch(format!(
                            "operator {op:?} applied to {} and {}",
                            l.kind(),
                            r.kind()
                        )))
                    }
                }
            }
        })
    }
}

fn eval_eq(l: &Eval, r: &Eval) -> Result<bool, String> {
    match (l, r) {
        (Eval::Num(x), Eval::Num(y)) => Ok(x == y),
        (Eval::Tag(x), Eval::Tag(y)) => Ok(x == y),
        (Eval::Bool(x), Eval::Bool(y)) => Ok(x == y),
        _ => Err(format!("cannot compare {} with {}", l.kind(), r.kind())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, Value)]) -> IndexMap<String, Value> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn guarded_division_short_circuits() {
        let e = Expr::Binary(
            BinOp::Or,
            Box::new(Expr::Binary(BinOp::Eq, Box::new(Expr::Var("d".into())), Box::new(Expr::Num(0.0)))),
            Box::new(Expr::Binary(
                BinOp::Gt,
                Box::new(Expr::Binary(BinOp::Div, Box::new(Expr::Num(1.0)), Box::new(Expr::Var("d".into())))),
                Box::new(Expr::Num(0.0)),
            )),
        );
        assert_eq!(e.eval(&env(&[("d", 0.0.into())]), "r").unwrap(), Eval::Bool(true));
    }

    #[test]
    fn tag_arithmetic_is_a_type_error() {
        let e = Expr::Binary(BinOp::Add, Box::new(Expr::Var("c".into())), Box::new(Expr::Num(1.0)));
        let err = e.eval(&env(&[("c", "clear".into())]), "x").unwrap_err();
        assert!(matches!(err, ScenarioError::TypeMismatch { .. }));
    }
}
