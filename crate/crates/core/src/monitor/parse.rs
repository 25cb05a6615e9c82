use super::formula::{Formula, Interval, Margin};
use super::MonitorError;
use crate::lex::{tokenize, Cursor, Pos, Tok};

const KEYWORDS: &[&str] = &["always", "eventually", "until", "not", "and", "or", "implies", "inf"];

/// Parses a specification such as `eventually[0,10] always (cte <= 1.5)`.
///
/// `lhs <= rhs` and `lhs < rhs` become `Atom(rhs - lhs)`; `>=` and `>`
/// become `Atom(lhs - rhs)`. Pointwise semantics make strict and non-strict
/// comparisons coincide.
pub fn parse_spec(source: &str) -> Result<Formula, MonitorError> {
    let toks = tokenize(source, false).map_err(|e| MonitorError::Syntax {
        pos: e.pos,
        message: e.message,
    })?;
    let mut p = SpecParser { cur: Cursor::new(toks) };
    let f = p.formula()?;
    if *p.cur.peek() != Tok::Eof {
        return Err(p.error(format!("unexpected {}", p.cur.peek())));
    }
    Ok(f)
}

struct SpecParser {
    cur: Cursor,
}

impl SpecParser {
    fn error(&self, message: impl Into<String>) -> MonitorError {
        MonitorError::Syntax {
            pos: self.cur.pos(),
            message: message.into(),
        }
    }

    fn error_at(pos: Pos, message: impl Into<String>) -> MonitorError {
        MonitorError::Syntax {
            pos,
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: &Tok) -> Result<(), MonitorError> {
        if self.cur.eat(tok) {
            Ok(())
        } else {
            Err(self.error(format!("expected {tok}, found {}", self.cur.peek())))
        }
    }

    fn formula(&mut self) -> Result<Formula, MonitorError> {
        let lhs = self.or()?;
        if self.cur.eat(&Tok::Arrow) || self.cur.eat_keyword("implies") {
            let rhs = self.formula()?;
            return Ok(Formula::or(Formula::not(lhs), rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, MonitorError> {
        let mut lhs = self.and()?;
        while self.cur.eat_keyword("or") {
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, MonitorError> {
        let mut lhs = self.unary()?;
        while self.cur.eat_keyword("and") {
            lhs = Formula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, MonitorError> {
        if self.cur.eat_keyword("not") {
            return Ok(Formula::not(self.unary()?));
        }
        if self.cur.eat_keyword("always") {
            let i = self.interval()?;
            return Ok(Formula::always(i, self.unary()?));
        }
        if self.cur.eat_keyword("eventually") {
            let i = self.interval()?;
            return Ok(Formula::eventually(i, self.unary()?));
        }
        let lhs = self.primary()?;
        if self.cur.eat_keyword("until") {
            let i = self.interval()?;
            let rhs = self.primary()?;
            return Ok(Formula::until(i, lhs, rhs));
        }
        Ok(lhs)
    }

    /// Optional `[lo, hi]` window; absent means `[0, inf]`.
    fn interval(&mut self) -> Result<Interval, MonitorError> {
        if !self.cur.eat(&Tok::LBracket) {
            return Ok(Interval::UNBOUNDED);
        }
        let pos = self.cur.pos();
        let lo = self.bound()?.ok_or_else(|| Self::error_at(pos, "lower bound cannot be `inf`"))?;
        self.expect(&Tok::Comma)?;
        let hi = self.bound()?;
        self.expect(&Tok::RBracket)?;
        let i = Interval { lo, hi };
        if !i.is_valid() {
            return Err(MonitorError::BadInterval(i.to_string()));
        }
        Ok(i)
    }

    fn bound(&mut self) -> Result<Option<f64>, MonitorError> {
        if self.cur.eat_keyword("inf") {
            return Ok(None);
        }
        let neg = self.cur.eat(&Tok::Minus);
        match self.cur.next().tok {
            Tok::Num(x) if neg => Err(MonitorError::BadInterval(format!("negative bound -{x}"))),
            Tok::Num(x) => Ok(Some(x)),
            other => Err(self.error(format!("expected interval bound, found {other}"))),
        }
    }

    fn primary(&mut self) -> Result<Formula, MonitorError> {
        if *self.cur.peek() == Tok::LParen {
            let mark = self.cur.mark();
            self.cur.next();
            if let Ok(f) = self.formula() {
                if self.cur.eat(&Tok::RParen) && !starts_arith_continuation(self.cur.peek()) {
                    return Ok(f);
                }
            }
            // parenthesised arithmetic such as `(a + b) <= 2`
            self.cur.reset(mark);
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Formula, MonitorError> {
        let lhs = self.sum()?;
        let pos = self.cur.pos();
        let tok = self.cur.next().tok;
        let rhs_first = match tok {
            Tok::Le | Tok::Lt => true,
            Tok::Ge | Tok::Gt => false,
            Tok::EqEq | Tok::NotEq | Tok::Assign => {
                return Err(Self::error_at(pos, format!("unsupported operator {tok}; use <=, <, >= or >")))
            }
            other => return Err(Self::error_at(pos, format!("expected comparison operator, found {other}"))),
        };
        let rhs = self.sum()?;
        Ok(Formula::Atom(if rhs_first {
            Margin::sub(rhs, lhs)
        } else {
            Margin::sub(lhs, rhs)
        }))
    }

    fn sum(&mut self) -> Result<Margin, MonitorError> {
        let mut lhs = self.product()?;
        loop {
            if self.cur.eat(&Tok::Plus) {
                lhs = Margin::Add(Box::new(lhs), Box::new(self.product()?));
            } else if self.cur.eat(&Tok::Minus) {
                lhs = Margin::Sub(Box::new(lhs), Box::new(self.product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Margin, MonitorError> {
        let mut lhs = self.neg()?;
        loop {
            if self.cur.eat(&Tok::Star) {
                lhs = Margin::Mul(Box::new(lhs), Box::new(self.neg()?));
            } else if self.cur.eat(&Tok::Slash) {
                lhs = Margin::Div(Box::new(lhs), Box::new(self.neg()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn neg(&mut self) -> Result<Margin, MonitorError> {
        if self.cur.eat(&Tok::Minus) {
            return Ok(match self.neg()? {
                Margin::Const(c) => Margin::Const(-c),
                m => Margin::Neg(Box::new(m)),
            });
        }
        self.term()
    }

    fn term(&mut self) -> Result<Margin, MonitorError> {
        let pos = self.cur.pos();
        match self.cur.next().tok {
            Tok::Num(x) => Ok(Margin::Const(x)),
            Tok::LParen => {
                let m = self.sum()?;
                self.expect(&Tok::RParen)?;
                Ok(m)
            }
            Tok::Ident(name) => {
                if *self.cur.peek() == Tok::LParen {
                    self.cur.next();
                    let a = self.sum()?;
                    let m = match name.as_str() {
                        "abs" => Margin::Abs(Box::new(a)),
                        "min" | "max" => {
                            self.expect(&Tok::Comma)?;
                            let b = self.sum()?;
                            if name == "min" {
                                Margin::Min(Box::new(a), Box::new(b))
                            } else {
                                Margin::Max(Box::new(a), Box::new(b))
                            }
                        }
                        _ => return Err(MonitorError::UnknownOperator(name)),
                    };
                    self.expect(&Tok::RParen)?;
                    return Ok(m);
                }
                if KEYWORDS.contains(&name.as_str()) {
                    return Err(Self::error_at(pos, format!("unexpected keyword `{name}`")));
                }
                Ok(Margin::Signal(name))
            }
            other => Err(Self::error_at(pos, format!("expected signal or number, found {other}"))),
        }
    }
}

fn starts_arith_continuation(tok: &Tok) -> bool {
    matches!(
        tok,
        Tok::Plus | Tok::Minus | Tok::Star | Tok::Slash | Tok::Le | Tok::Lt | Tok::Ge | Tok::Gt
    )
}
