//! STREL formulas: abstract syntax, a text parser, a canonical printer and
//! the structural analyses the monitor needs (surround expansion, horizon).
//!
//! The surface grammar, loosest binding first:
//!
//! ```text
//! formula  := or ( "U[" a "," b "]" or )*
//! or       := and ( "|" and )*
//! and      := spatial ( "&" spatial )*
//! spatial  := unary ( ( "R{" dist "<=" d "}" | "O{" dist "<=" d "}" ) unary )*
//! unary    := "!" unary | "F[" a "," b "]" unary | "G[" a "," b "]" unary
//!           | "E{" dist ">" d "}" unary | primary
//! primary  := "(" formula ")" | "true" | "false" | predicate | label
//! predicate:= "distTo(" x "," y ... ")" cmp r | "minPairDist" cmp r | "coord(" i ")" cmp r
//! cmp      := "<=" | ">"          dist := "hops" | "euclid"
//! ```

mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use parser::{parse, parse_with_labels, ParseError, ParseErrorKind};

/// Comparison of a predicate function against its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cmp {
    Le,
    Gt,
}

/// Real-valued function of an agent's state used inside a predicate atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PredicateFn {
    /// Euclidean distance from the agent to a fixed point.
    DistTo(Vec<f64>),
    /// Distance from the agent to its nearest teammate.
    MinPairDist,
    /// One coordinate of the agent position.
    Coord(usize),
}

/// Distance used by the spatial operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistanceFn {
    Hops,
    Euclid,
}

/// Which conjunct the surround macro uses for the escape part.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurroundVariant {
    /// `¬ E{f > d} φ1`: the agent cannot leave the φ1 region beyond `d`.
    #[default]
    NegatedEscape,
    /// `E{f > d} φ1`, without negation.
    Verbatim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    True,
    /// Attribute label test, `a_l == label`.
    Atom(String),
    Predicate {
        func: PredicateFn,
        cmp: Cmp,
        threshold: f64,
    },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Until {
        a: usize,
        b: usize,
        lhs: Box<Formula>,
        rhs: Box<Formula>,
    },
    Eventually {
        a: usize,
        b: usize,
        body: Box<Formula>,
    },
    Always {
        a: usize,
        b: usize,
        body: Box<Formula>,
    },
    Reach {
        dist: DistanceFn,
        bound: f64,
        lhs: Box<Formula>,
        rhs: Box<Formula>,
    },
    Escape {
        dist: DistanceFn,
        bound: f64,
        body: Box<Formula>,
    },
    Surround {
        dist: DistanceFn,
        bound: f64,
        lhs: Box<Formula>,
        rhs: Box<Formula>,
    },
}

impl Formula {
    pub fn atom(label: impl Into<String>) -> Self {
        Formula::Atom(label.into())
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(lhs: Formula, rhs: Formula) -> Self {
        Formula::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Formula, rhs: Formula) -> Self {
        Formula::Or(Box::new(lhs), Box::new(rhs))
    }

    pub fn until(a: usize, b: usize, lhs: Formula, rhs: Formula) -> Self {
        Formula::Until {
            a,
            b,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn eventually(a: usize, b: usize, body: Formula) -> Self {
        Formula::Eventually {
            a,
            b,
            body: Box::new(body),
        }
    }

    pub fn always(a: usize, b: usize, body: Formula) -> Self {
        Formula::Always {
            a,
            b,
            body: Box::new(body),
        }
    }

    pub fn reach(dist: DistanceFn, bound: f64, lhs: Formula, rhs: Formula) -> Self {
        Formula::Reach {
            dist,
            bound,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn escape(dist: DistanceFn, bound: f64, body: Formula) -> Self {
        Formula::Escape {
            dist,
            bound,
            body: Box::new(body),
        }
    }

    pub fn surround(dist: DistanceFn, bound: f64, lhs: Formula, rhs: Formula) -> Self {
        Formula::Surround {
            dist,
            bound,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    /// Number of future steps needed to evaluate the formula at the current step.
    pub fn horizon(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) | Formula::Predicate { .. } => 0,
            Formula::Not(f) => f.horizon(),
            Formula::And(l, r) | Formula::Or(l, r) => l.horizon().max(r.horizon()),
            Formula::Until { b, lhs, rhs, .. } => b + lhs.horizon().max(rhs.horizon()),
            Formula::Eventually { b, body, .. } | Formula::Always { b, body, .. } => {
                b + body.horizon()
            }
            Formula::Reach { lhs, rhs, .. } | Formula::Surround { lhs, rhs, .. } => {
                lhs.horizon().max(rhs.horizon())
            }
            Formula::Escape { body, .. } => body.horizon(),
        }
    }

    /// Replaces every surround node by its reach/escape expansion.
    pub fn expand_surround(&self, variant: SurroundVariant) -> Formula {
        match self {
            Formula::True | Formula::Atom(_) | Formula::Predicate { .. } => self.clone(),
            Formula::Not(f) => Formula::not(f.expand_surround(variant)),
            Formula::And(l, r) => Formula::and(l.expand_surround(variant), r.expand_surround(variant)),
            Formula::Or(l, r) => Formula::or(l.expand_surround(variant), r.expand_surround(variant)),
            Formula::Until { a, b, lhs, rhs } => Formula::until(
                *a,
                *b,
                lhs.expand_surround(variant),
                rhs.expand_surround(variant),
            ),
            Formula::Eventually { a, b, body } => {
                Formula::eventually(*a, *b, body.expand_surround(variant))
            }
            Formula::Always { a, b, body } => Formula::always(*a, *b, body.expand_surround(variant)),
            Formula::Reach {
                dist,
                bound,
                lhs,
                rhs,
            } => Formula::reach(
                *dist,
                *bound,
                lhs.expand_surround(variant),
                rhs.expand_surround(variant),
            ),
            Formula::Escape { dist, bound, body } => {
                Formula::escape(*dist, *bound, body.expand_surround(variant))
            }
            Formula::Surround {
                dist,
                bound,
                lhs,
                rhs,
            } => {
                let p = lhs.expand_surround(variant);
                let q = rhs.expand_surround(variant);
                surround_expansion(*dist, *bound, p, q, variant)
            }
        }
    }

    pub fn contains_surround(&self) -> bool {
        match self {
            Formula::True | Formula::Atom(_) | Formula::Predicate { .. } => false,
            Formula::Surround { .. } => true,
            Formula::Not(f) => f.contains_surround(),
            Formula::Eventually { body, .. }
            | Formula::Always { body, .. }
            | Formula::Escape { body, .. } => body.contains_surround(),
            Formula::And(l, r)
            | Formula::Or(l, r)
            | Formula::Until { lhs: l, rhs: r, .. }
            | Formula::Reach { lhs: l, rhs: r, .. } => l.contains_surround() || r.contains_surround(),
        }
    }

    /// Attribute labels referenced by the formula, in first-occurrence order.
    pub fn labels(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_labels(&mut out);
        out
    }

    fn collect_labels<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Formula::Atom(label) => {
                if !out.contains(&label.as_str()) {
                    out.push(label);
                }
            }
            Formula::True | Formula::Predicate { .. } => {}
            Formula::Not(f)
            | Formula::Eventually { body: f, .. }
            | Formula::Always { body: f, .. }
            | Formula::Escape { body: f, .. } => f.collect_labels(out),
            Formula::And(l, r)
            | Formula::Or(l, r)
            | Formula::Until { lhs: l, rhs: r, .. }
            | Formula::Reach { lhs: l, rhs: r, .. }
            | Formula::Surround { lhs: l, rhs: r, .. } => {
                l.collect_labels(out);
                r.collect_labels(out);
            }
        }
    }

    /// Largest coordinate index used by `coord(i)` / point arity of `distTo`,
    /// as the spatial dimension the formula requires.
    pub fn required_dim(&self) -> usize {
        match self {
            Formula::Predicate { func, .. } => match func {
                PredicateFn::DistTo(p) => p.len(),
                PredicateFn::Coord(i) => i + 1,
                PredicateFn::MinPairDist => 0,
            },
            Formula::True | Formula::Atom(_) => 0,
            Formula::Not(f)
            | Formula::Eventually { body: f, .. }
            | Formula::Always { body: f, .. }
            | Formula::Escape { body: f, .. } => f.required_dim(),
            Formula::And(l, r)
            | Formula::Or(l, r)
            | Formula::Until { lhs: l, rhs: r, .. }
            | Formula::Reach { lhs: l, rhs: r, .. }
            | Formula::Surround { lhs: l, rhs: r, .. } => l.required_dim().max(r.required_dim()),
        }
    }

    /// Widest temporal window (number of steps a single temporal operator
    /// aggregates over).
    pub fn max_window(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) | Formula::Predicate { .. } => 1,
            Formula::Not(f) | Formula::Escape { body: f, .. } => f.max_window(),
            Formula::Eventually { a, b, body } | Formula::Always { a, b, body } => {
                (b - a + 1).max(body.max_window())
            }
            Formula::Until { b, lhs, rhs, .. } => {
                (b + 1).max(lhs.max_window()).max(rhs.max_window())
            }
            Formula::And(l, r)
            | Formula::Or(l, r)
            | Formula::Reach { lhs: l, rhs: r, .. }
            | Formula::Surround { lhs: l, rhs: r, .. } => l.max_window().max(r.max_window()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::Atom(_) | Formula::Predicate { .. } => 1,
            Formula::Not(f)
            | Formula::Eventually { body: f, .. }
            | Formula::Always { body: f, .. }
            | Formula::Escape { body: f, .. } => 1 + f.depth(),
            Formula::And(l, r)
            | Formula::Or(l, r)
            | Formula::Until { lhs: l, rhs: r, .. }
            | Formula::Reach { lhs: l, rhs: r, .. }
            | Formula::Surround { lhs: l, rhs: r, .. } => 1 + l.depth().max(r.depth()),
        }
    }
}

fn surround_expansion(
    dist: DistanceFn,
    bound: f64,
    p: Formula,
    q: Formula,
    variant: SurroundVariant,
) -> Formula {
    let outside = Formula::not(Formula::or(p.clone(), q.clone()));
    let no_gap = Formula::not(Formula::reach(dist, bound, p.clone(), outside));
    let escape = Formula::escape(dist, bound, p.clone());
    let escape = match variant {
        SurroundVariant::NegatedEscape => Formula::not(escape),
        SurroundVariant::Verbatim => escape,
    };
    let touches = Formula::reach(dist, bound, p.clone(), q);
    Formula::and(p, Formula::and(no_gap, Formula::and(escape, touches)))
}

impl fmt::Display for Cmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cmp::Le => f.write_str("<="),
            Cmp::Gt => f.write_str(">"),
        }
    }
}

impl fmt::Display for DistanceFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceFn::Hops => f.write_str("hops"),
            DistanceFn::Euclid => f.write_str("euclid"),
        }
    }
}

impl fmt::Display for PredicateFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredicateFn::DistTo(p) => {
                f.write_str("distTo(")?;
                for (i, x) in p.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str(")")
            }
            PredicateFn::MinPairDist => f.write_str("minPairDist"),
            PredicateFn::Coord(i) => write!(f, "coord({i})"),
        }
    }
}

/// Canonical form: every binary operator is parenthesized, prefix operators
/// are not. Reparsing the output yields the same tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::Atom(label) => f.write_str(label),
            Formula::Predicate {
                func,
                cmp,
                threshold,
            } => write!(f, "{func} {cmp} {threshold}"),
            Formula::Not(inner) => write!(f, "!{inner}"),
            Formula::And(l, r) => write!(f, "({l} & {r})"),
            Formula::Or(l, r) => write!(f, "({l} | {r})"),
            Formula::Until { a, b, lhs, rhs } => write!(f, "({lhs} U[{a},{b}] {rhs})"),
            Formula::Eventually { a, b, body } => write!(f, "F[{a},{b}] {body}"),
            Formula::Always { a, b, body } => write!(f, "G[{a},{b}] {body}"),
            Formula::Reach {
                dist,
                bound,
                lhs,
                rhs,
            } => write!(f, "({lhs} R{{{dist} <= {bound}}} {rhs})"),
            Formula::Escape { dist, bound, body } => write!(f, "E{{{dist} > {bound}}} {body}"),
            Formula::Surround {
                dist,
                bound,
                lhs,
                rhs,
            } => write!(f, "({lhs} O{{{dist} <= {bound}}} {rhs})"),
        }
    }
}
