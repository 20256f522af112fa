//! Properties: LTL formulas over observation atoms, their normal forms, the
//! Büchi translation and a direct lasso evaluator.

mod buchi;
mod lasso;

pub use buchi::{lasso_accepted, to_buchi, BuchiAutomaton, BuchiState, BuchiTransition, Literal};
pub use lasso::{eval_ltl_on_lasso, eval_on_valuations};

use std::fmt;

use serde::Serialize;

use crate::scl::ast::CmpOp;
use crate::scl::design::Ref;
use crate::scl::types::Value;

/// Resolved LTL formula. Atoms are indices into an atom table.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum LtlFormula {
    True,
    False,
    Atom(usize),
    Not(Box<LtlFormula>),
    And(Box<LtlFormula>, Box<LtlFormula>),
    Or(Box<LtlFormula>, Box<LtlFormula>),
    Next(Box<LtlFormula>),
    Finally(Box<LtlFormula>),
    Globally(Box<LtlFormula>),
    Until(Box<LtlFormula>, Box<LtlFormula>),
    Release(Box<LtlFormula>, Box<LtlFormula>),
}

use LtlFormula as L;

impl LtlFormula {
    pub fn atom(i: usize) -> Self {
        L::Atom(i)
    }
    pub fn not(a: Self) -> Self {
        L::Not(Box::new(a))
    }
    pub fn and(a: Self, b: Self) -> Self {
        L::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: Self, b: Self) -> Self {
        L::Or(Box::new(a), Box::new(b))
    }
    pub fn implies(a: Self, b: Self) -> Self {
        L::or(L::not(a), b)
    }
    pub fn next(a: Self) -> Self {
        L::Next(Box::new(a))
    }
    pub fn finally(a: Self) -> Self {
        L::Finally(Box::new(a))
    }
    pub fn globally(a: Self) -> Self {
        L::Globally(Box::new(a))
    }
    pub fn until(a: Self, b: Self) -> Self {
        L::Until(Box::new(a), Box::new(b))
    }
    pub fn release(a: Self, b: Self) -> Self {
        L::Release(Box::new(a), Box::new(b))
    }

    /// Negation normal form: negations only directly above atoms, `F`/`G`
    /// rewritten to `U`/`R`.
    pub fn nnf(&self) -> LtlFormula {
        nnf(self, false)
    }

    pub fn negated(&self) -> LtlFormula {
        L::not(self.clone())
    }

    /// Number of temporal operators.
    pub fn temporal_depth(&self) -> usize {
        match self {
            L::True | L::False | L::Atom(_) => 0,
            L::Not(a) => a.temporal_depth(),
            L::And(a, b) | L::Or(a, b) => a.temporal_depth() + b.temporal_depth(),
            L::Next(a) | L::Finally(a) | L::Globally(a) => 1 + a.temporal_depth(),
            L::Until(a, b) | L::Release(a, b) => 1 + a.temporal_depth() + b.temporal_depth(),
        }
    }

    pub fn atoms(&self, out: &mut Vec<usize>) {
        match self {
            L::True | L::False => {}
            L::Atom(i) => {
                if !out.contains(i) {
                    out.push(*i)
                }
            }
            L::Not(a) | L::Next(a) | L::Finally(a) | L::Globally(a) => a.atoms(out),
            L::And(a, b) | L::Or(a, b) | L::Until(a, b) | L::Release(a, b) => {
                a.atoms(out);
                b.atoms(out);
            }
        }
    }

    /// Renders with atom names supplied by `name`.
    pub fn render(&self, name: &dyn Fn(usize) -> String) -> String {
        match self {
            L::True => "true".into(),
            L::False => "false".into(),
            L::Atom(i) => name(*i),
            L::Not(a) => format!("!{}", a.render(name)),
            L::And(a, b) => format!("({} && {})", a.render(name), b.render(name)),
            L::Or(a, b) => format!("({} || {})", a.render(name), b.render(name)),
            L::Next(a) => format!("X {}", a.render(name)),
            L::Finally(a) => format!("F {}", a.render(name)),
            L::Globally(a) => format!("G {}", a.render(name)),
            L::Until(a, b) => format!("({} U {})", a.render(name), b.render(name)),
            L::Release(a, b) => format!("({} R {})", a.render(name), b.render(name)),
        }
    }
}

impl fmt::Display for LtlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&|i| format!("p{i}")))
    }
}

fn nnf(f: &LtlFormula, neg: bool) -> LtlFormula {
    match (f, neg) {
        (L::True, false) | (L::False, true) => L::True,
        (L::True, true) | (L::False, false) => L::False,
        (L::Atom(i), false) => L::Atom(*i),
        (L::Atom(i), true) => L::not(L::Atom(*i)),
        (L::Not(a), _) => nnf(a, !neg),
        (L::And(a, b), false) | (L::Or(a, b), true) => L::and(nnf(a, neg), nnf(b, neg)),
        (L::Or(a, b), false) | (L::And(a, b), true) => L::or(nnf(a, neg), nnf(b, neg)),
        (L::Next(a), _) => L::next(nnf(a, neg)),
        (L::Finally(a), false) | (L::Globally(a), true) => L::until(L::True, nnf(a, neg)),
        (L::Globally(a), false) | (L::Finally(a), true) => L::release(L::False, nnf(a, neg)),
        (L::Until(a, b), false) => L::until(nnf(a, false), nnf(b, false)),
        (L::Until(a, b), true) => L::release(nnf(a, true), nnf(b, true)),
        (L::Release(a, b), false) => L::release(nnf(a, false), nnf(b, false)),
        (L::Release(a, b), true) => L::until(nnf(a, true), nnf(b, true)),
    }
}

/// An atomic proposition over an observation: `name op value`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AtomDef {
    /// Source text, e.g. `sw.req` or `hw.owner == SW`.
    pub text: String,
    pub name: String,
    #[serde(skip)]
    pub target: Ref,
    /// Position of the referenced value in an observation vector.
    pub obs: usize,
    pub op: CmpOp,
    pub value: Value,
}

impl AtomDef {
    pub fn holds(&self, obs: &[Value]) -> bool {
        self.op.apply(obs[self.obs], self.value)
    }
}

/// A resolved LTL property: formula plus its atom table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LtlProperty {
    pub formula: LtlFormula,
    pub atoms: Vec<AtomDef>,
}

impl LtlProperty {
    /// Truth value of every atom on one observation.
    pub fn valuation(&self, obs: &[Value]) -> Vec<bool> {
        self.atoms.iter().map(|a| a.holds(obs)).collect()
    }

    pub fn eval_on_lasso(&self, prefix: &[Vec<Value>], cycle: &[Vec<Value>]) -> bool {
        let p: Vec<Vec<bool>> = prefix.iter().map(|o| self.valuation(o)).collect();
        let l: Vec<Vec<bool>> = cycle.iter().map(|o| self.valuation(o)).collect();
        eval_ltl_on_lasso(&self.formula, &p, &l)
    }

    pub fn render(&self) -> String {
        self.formula.render(&|i| self.atoms[i].text.clone())
    }
}
