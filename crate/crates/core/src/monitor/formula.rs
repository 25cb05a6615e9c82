use std::fmt;

/// Real-valued expression over signals; an atom holds when its margin is
/// nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub enum Margin {
    Const(f64),
    Signal(String),
    Neg(Box<Margin>),
    Add(Box<Margin>, Box<Margin>),
    Sub(Box<Margin>, Box<Margin>),
    Mul(Box<Margin>, Box<Margin>),
    Div(Box<Margin>, Box<Margin>),
    Abs(Box<Margin>),
    Min(Box<Margin>, Box<Margin>),
    Max(Box<Margin>, Box<Margin>),
}

impl Margin {
    pub fn signal(name: &str) -> Margin {
        Margin::Signal(name.to_string())
    }

    pub fn sub(a: Margin, b: Margin) -> Margin {
        Margin::Sub(Box::new(a), Box::new(b))
    }

    pub fn add(a: Margin, b: Margin) -> Margin {
        Margin::Add(Box::new(a), Box::new(b))
    }

    pub fn abs(a: Margin) -> Margin {
        Margin::Abs(Box::new(a))
    }

    pub(crate) fn signals<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Margin::Const(_) => {}
            Margin::Signal(s) => {
                if !out.contains(&s.as_str()) {
                    out.push(s);
                }
            }
            Margin::Neg(a) | Margin::Abs(a) => a.signals(out),
            Margin::Add(a, b)
            | Margin::Sub(a, b)
            | Margin::Mul(a, b)
            | Margin::Div(a, b)
            | Margin::Min(a, b)
            | Margin::Max(a, b) => {
                a.signals(out);
                b.signals(out);
            }
        }
    }
}

/// Time window relative to the current sample; `hi = None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: Option<f64>,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval { lo: 0.0, hi: None };

    pub fn bounded(lo: f64, hi: f64) -> Interval {
        Interval { lo, hi: Some(hi) }
    }

    pub fn is_valid(&self) -> bool {
        self.lo >= 0.0 && self.lo.is_finite() && self.hi.is_none_or(|h| h >= self.lo && h.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Atom(Margin),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Always(Interval, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    /// `lhs until rhs`
    Until(Interval, Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn always(i: Interval, f: Formula) -> Formula {
        Formula::Always(i, Box::new(f))
    }

    pub fn eventually(i: Interval, f: Formula) -> Formula {
        Formula::Eventually(i, Box::new(f))
    }

    pub fn until(i: Interval, a: Formula, b: Formula) -> Formula {
        Formula::Until(i, Box::new(a), Box::new(b))
    }

    /// Signal names referenced by any atom.
    pub fn signals(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Formula::Atom(m) => m.signals(out),
            Formula::Not(f) | Formula::Always(_, f) | Formula::Eventually(_, f) => f.collect(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => {
                a.collect(out);
                b.collect(out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom(_) => 0,
            Formula::Not(f) | Formula::Always(_, f) | Formula::Eventually(_, f) => 1 + f.depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn has_negation(&self) -> bool {
        match self {
            Formula::Atom(_) => false,
            Formula::Not(_) => true,
            Formula::Always(_, f) | Formula::Eventually(_, f) => f.has_negation(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(_, a, b) => a.has_negation() || b.has_negation(),
        }
    }

    /// Applies `f` to every atom margin.
    pub fn map_atoms(&self, f: &impl Fn(&Margin) -> Margin) -> Formula {
        match self {
            Formula::Atom(m) => Formula::Atom(f(m)),
            Formula::Not(a) => Formula::not(a.map_atoms(f)),
            Formula::And(a, b) => Formula::and(a.map_atoms(f), b.map_atoms(f)),
            Formula::Or(a, b) => Formula::or(a.map_atoms(f), b.map_atoms(f)),
            Formula::Always(i, a) => Formula::always(*i, a.map_atoms(f)),
            Formula::Eventually(i, a) => Formula::eventually(*i, a.map_atoms(f)),
            Formula::Until(i, a, b) => Formula::until(*i, a.map_atoms(f), b.map_atoms(f)),
        }
    }
}

impl fmt::Display for Margin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Margin::Const(c) => write!(f, "{c:?}"),
            Margin::Signal(s) => f.write_str(s),
            Margin::Neg(a) => write!(f, "(-{a})"),
            Margin::Add(a, b) => write!(f, "({a} + {b})"),
            Margin::Sub(a, b) => write!(f, "({a} - {b})"),
            Margin::Mul(a, b) => write!(f, "({a} * {b})"),
            Margin::Div(a, b) => write!(f, "({a} / {b})"),
            Margin::Abs(a) => write!(f, "abs({a})"),
            Margin::Min(a, b) => write!(f, "min({a}, {b})"),
            Margin::Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(h) => write!(f, "[{:?}, {:?}]", self.lo, h),
            None => write!(f, "[{:?}, inf]", self.lo),
        }
    }
}

/// Prints in the textual grammar accepted by [`super::parse_spec`].
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(m) => write!(f, "({m} >= 0.0)"),
            Formula::Not(a) => write!(f, "not ({a})"),
            Formula::And(a, b) => write!(f, "({a}) and ({b})"),
            Formula::Or(a, b) => write!(f, "({a}) or ({b})"),
            Formula::Always(i, a) => write!(f, "always{i} ({a})"),
            Formula::Eventually(i, a) => write!(f, "eventually{i} ({a})"),
            Formula::Until(i, a, b) => write!(f, "({a}) until{i} ({b})"),
        }
    }
}
