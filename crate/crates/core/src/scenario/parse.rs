use std::collections::HashSet;

use indexmap::IndexMap;

use super::expr::{BinOp, Expr, Func};
use super::{Choice, Decl, DeclKind, Distribution, ExternalDomain, Requirement, ScenarioError, ScenarioProgram};
use crate::lex::{tokenize, Cursor, Pos, Tok};
use crate::value::Value;

const RESERVED: &[&str] = &[
    "require", "meta", "if", "then", "else", "and", "or", "not", "Uniform", "Options", "Constant", "External",
    "abs", "min", "max",
];

/// Parses and validates a scenario program.
pub fn parse_scenario(source: &str) -> Result<ScenarioProgram, ScenarioError> {
    let toks = tokenize(source, true).map_err(|e| ScenarioError::Syntax {
        pos: e.pos,
        message: e.message,
    })?;
    let mut p = Parser {
        cur: Cursor::new(toks),
        program: ScenarioProgram::default(),
        declared: HashSet::new(),
        all_names: HashSet::new(),
        external_ids: HashSet::new(),
    };
    p.collect_names(source)?;
    p.program_body()?;
    Ok(p.program)
}

struct Parser {
    cur: Cursor,
    program: ScenarioProgram,
    declared: HashSet<String>,
    /// Every name assigned anywhere in the file; used to tell forward
    /// references apart from plain typos.
    all_names: HashSet<String>,
    external_ids: HashSet<String>,
}

fn syntax(pos: Pos, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Syntax {
        pos,
        message: message.into(),
    }
}

impl Parser {
    fn collect_names(&mut self, source: &str) -> Result<(), ScenarioError> {
        let toks = tokenize(source, true).map_err(|e| syntax(e.pos, e.message))?;
        let mut at_line_start = true;
        for w in toks.windows(2) {
            if at_line_start {
                if let (Tok::Ident(n), Tok::Assign) = (&w[0].tok, &w[1].tok) {
                    self.all_names.insert(n.clone());
                }
            }
            at_line_start = w[0].tok == Tok::Newline;
        }
        Ok(())
    }

    fn program_body(&mut self) -> Result<(), ScenarioError> {
        loop {
            match self.cur.peek().clone() {
                Tok::Eof => return Ok(()),
                Tok::Newline => {
                    self.cur.next();
                }
                _ => {
                    self.statement()?;
                    let pos = self.cur.pos();
                    match self.cur.next().tok {
                        Tok::Newline | Tok::Eof => {}
                        other => return Err(syntax(pos, format!("expected end of line, found {other}"))),
                    }
                }
            }
        }
    }

    fn statement(&mut self) -> Result<(), ScenarioError> {
        let start = self.cur.pos();
        if self.cur.eat_keyword("require") {
            let expr = self.expr()?;
            self.check_refs(&expr, start)?;
            self.program.requires.push(Requirement { expr, line: start.line });
            return Ok(());
        }
        if self.cur.eat_keyword("meta") {
            let key = self.ident()?;
            self.expect(&Tok::Assign)?;
            let pos = self.cur.pos();
            let value = match self.cur.next().tok {
                Tok::Str(s) => s,
                Tok::Num(x) => x.to_string(),
                Tok::Ident(s) => s,
                other => return Err(syntax(pos, format!("expected metadata value, found {other}"))),
            };
            self.program.metadata.insert(key, value);
            return Ok(());
        }

        let name = self.ident()?;
        if RESERVED.contains(&name.as_str()) {
            return Err(syntax(start, format!("`{name}` is a reserved word")));
        }
        self.expect(&Tok::Assign)?;
        if self.declared.contains(&name) {
            return Err(ScenarioError::DuplicateName {
                name,
                pos: Some(start),
            });
        }

        let is_dist = matches!(self.cur.peek(), Tok::Ident(s) if matches!(s.as_str(), "Uniform" | "Options" | "Constant" | "External"))
            && *self.cur.peek_at(1) == Tok::LParen;
        let kind = if is_dist {
            DeclKind::Param(self.distribution(&name, start)?)
        } else {
            let e = self.expr()?;
            self.check_refs(&e, start)?;
            DeclKind::Derived(e)
        };
        self.declared.insert(name.clone());
        self.program.decls.push(Decl {
            name,
            kind,
            line: start.line,
        });
        Ok(())
    }

    fn check_refs(&self, e: &Expr, pos: Pos) -> Result<(), ScenarioError> {
        for n in e.names() {
            if !self.declared.contains(n) {
                let name = n.to_string();
                return Err(if self.all_names.contains(n) {
                    ScenarioError::ForwardReference { name, pos: Some(pos) }
                } else {
                    ScenarioError::UnknownName { name, pos: Some(pos) }
                });
            }
        }
        Ok(())
    }

    fn distribution(&mut self, name: &str, pos: Pos) -> Result<Distribution, ScenarioError> {
        let kind = self.ident()?;
        self.expect(&Tok::LParen)?;
        let dist = match kind.as_str() {
            "Uniform" => {
                let lo = self.const_num()?;
                self.expect(&Tok::Comma)?;
                let hi = self.const_num()?;
                check_bounds(name, lo, hi, pos)?;
                Distribution::Uniform { lo, hi }
            }
            "Constant" => Distribution::Constant(self.literal()?),
            "Options" => {
                self.expect(&Tok::LBrace)?;
                let mut entries = Vec::new();
                while *self.cur.peek() != Tok::RBrace {
                    let choice = if self.cur.eat(&Tok::LParen) {
                        let lo = self.const_num()?;
                        self.expect(&Tok::Comma)?;
                        let hi = self.const_num()?;
                        self.expect(&Tok::RParen)?;
                        check_bounds(name, lo, hi, pos)?;
                        Choice::Range(lo, hi)
                    } else {
                        Choice::Value(self.literal()?)
                    };
                    self.expect(&Tok::Colon)?;
                    let weight = self.const_num()?;
                    if weight < 0.0 {
                        return Err(ScenarioError::NegativeWeight {
                            name: name.to_string(),
                            weight,
                            pos: Some(pos),
                        });
                    }
                    entries.push((choice, weight));
                    if !self.cur.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(&Tok::RBrace)?;
                let total: f64 = entries.iter().map(|(_, w)| w).sum();
                if entries.is_empty() || total <= 0.0 || !total.is_finite() {
                    return Err(ScenarioError::EmptyOptions {
                        name: name.to_string(),
                        pos: Some(pos),
                    });
                }
                Distribution::Options(entries)
            }
            "External" => {
                let id = self.ident()?;
                self.expect(&Tok::Comma)?;
                let domain = if self.cur.eat(&Tok::LBracket) {
                    let mut vals = vec![self.literal()?];
                    while self.cur.eat(&Tok::Comma) {
                        vals.push(self.literal()?);
                    }
                    self.expect(&Tok::RBracket)?;
                    ExternalDomain::Discrete(vals)
                } else {
                    let lo = self.const_num()?;
                    self.expect(&Tok::Comma)?;
                    let hi = self.const_num()?;
                    if !(lo < hi) {
                        return Err(ScenarioError::InvalidBounds {
                            name: name.to_string(),
                            lo,
                            hi,
                            pos: Some(pos),
                        });
                    }
                    ExternalDomain::Continuous { lo, hi }
                };
                if !self.external_ids.insert(id.clone()) {
                    return Err(ScenarioError::DuplicateExternal { id, pos: Some(pos) });
                }
                Distribution::External { id, domain }
            }
            _ => unreachable!("checked by caller"),
        };
        self.expect(&Tok::RParen)?;
        Ok(dist)
    }

    fn literal(&mut self) -> Result<Value, ScenarioError> {
        if let Tok::Str(s) = self.cur.peek().clone() {
            self.cur.next();
            return Ok(Value::Tag(s));
        }
        Ok(Value::Real(self.const_num()?))
    }

    /// A numeric expression with no free names, folded at parse time.
    fn const_num(&mut self) -> Result<f64, ScenarioError> {
        let pos = self.cur.pos();
        let e = self.sum()?;
        if !e.names().is_empty() {
            return Err(syntax(pos, "distribution arguments must be constants"));
        }
        match e.eval(&IndexMap::new(), "constant")? {
            super::expr::Eval::Num(x) if x.is_finite() => Ok(x),
            _ => Err(syntax(pos, "expected a finite number")),
        }
    }

    fn ident(&mut self) -> Result<String, ScenarioError> {
        let pos = self.cur.pos();
        match self.cur.next().tok {
            Tok::Ident(s) => Ok(s),
            other => Err(syntax(pos, format!("expected identifier, found {other}"))),
        }
    }

    fn expect(&mut self, tok: &Tok) -> Result<(), ScenarioError> {
        let pos = self.cur.pos();
        let got = self.cur.next().tok;
        if &got == tok {
            Ok(())
        } else {
            Err(syntax(pos, format!("expected {tok}, found {got}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ScenarioError> {
        if self.cur.eat_keyword("if") {
            let c = self.expr()?;
            if !self.cur.eat_keyword("then") {
                return Err(syntax(self.cur.pos(), "expected `then`"));
            }
            let a = self.expr()?;
            if !self.cur.eat_keyword("else") {
                return Err(syntax(self.cur.pos(), "expected `else`"));
            }
            let b = self.expr()?;
            return Ok(Expr::If(Box::new(c), Box::new(a), Box::new(b)));
        }
        self.or()
    }

    fn or(&mut self) -> Result<Expr, ScenarioError> {
        let mut lhs = self.and()?;
        while self.cur.eat_keyword("or") {
            let rhs = self.and()?;
            lhs = Expr::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ScenarioError> {
        let mut lhs = self.not()?;
        while self.cur.eat_keyword("and") {
            let rhs = self.not()?;
            lhs = Expr::Binary(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, ScenarioError> {
        if self.cur.eat_keyword("not") {
            return Ok(Expr::Not(Box::new(self.not()?)));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Result<Expr, ScenarioError> {
        let lhs = self.sum()?;
        let op = match self.cur.peek() {
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            _ => return Ok(lhs),
        };
        self.cur.next();
        let rhs = self.sum()?;
        Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn sum(&mut self) -> Result<Expr, ScenarioError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.cur.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.cur.next();
            let rhs = self.product()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ScenarioError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.cur.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.cur.next();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ScenarioError> {
        if self.cur.eat(&Tok::Minus) {
            return Ok(match self.unary()? {
                Expr::Num(x) => Expr::Num(-x),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ScenarioError> {
        let pos = self.cur.pos();
        match self.cur.next().tok {
            Tok::Num(x) => Ok(Expr::Num(x)),
            Tok::Str(s) => Ok(Expr::Tag(s)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.cur.peek() == Tok::LParen {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| syntax(pos, format!("unknown function `{name}`")))?;
                    self.cur.next();
                    let mut args = vec![self.expr()?];
                    while self.cur.eat(&Tok::Comma) {
                        args.push(self.expr()?);
                    }
                    self.expect(&Tok::RParen)?;
                    if func == Func::Abs && args.len() != 1 {
                        return Err(syntax(pos, "`abs` takes exactly one argument"));
                    }
                    return Ok(Expr::Call(func, args));
                }
                if RESERVED.contains(&name.as_str()) {
                    return Err(syntax(pos, format!("unexpected keyword `{name}`")));
                }
                Ok(Expr::Var(name))
            }
            other => Err(syntax(pos, format!("expected expression, found {other}"))),
        }
    }
}

fn check_bounds(name: &str, lo: f64, hi: f64, pos: Pos) -> Result<(), ScenarioError> {
    if lo > hi {
        return Err(ScenarioError::InvalidBounds {
            name: name.to_string(),
            lo,
            hi,
            pos: Some(pos),
        });
    }
    Ok(())
}
