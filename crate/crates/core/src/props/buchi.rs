//! LTL to Büchi automata via a tableau over obligation sets.
//!
//! Each automaton state is a set of NNF formulas still to be satisfied (the
//! empty set is `true`) paired with a degeneralisation level. Expanding a
//! set yields transitions labelled with literal conjunctions. A transition
//! belongs to the acceptance set of an until-formula unless it postpones it.
//! Acceptance sets are merged with a counter: level `n` (the number of
//! untils) is accepting, and leaving it resets the counter.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use super::LtlFormula as L;
use super::LtlFormula;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Literal {
    pub atom: usize,
    pub positive: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BuchiState {
    /// Pending obligations, rendered for diagnostics.
    pub obligations: Vec<String>,
    pub level: usize,
    pub accepting: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BuchiTransition {
    pub from: usize,
    pub to: usize,
    /// Conjunction of literals; empty means `true`.
    pub label: Vec<Literal>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BuchiAutomaton {
    pub states: Vec<BuchiState>,
    pub initial: Vec<usize>,
    pub transitions: Vec<BuchiTransition>,
    /// Outgoing transition indices per state.
    #[serde(skip)]
    pub out: Vec<Vec<usize>>,
}

impl BuchiAutomaton {
    pub fn is_accepting(&self, q: usize) -> bool {
        self.states[q].accepting
    }

    /// Targets of transitions from `q` enabled by the atom valuation.
    pub fn step<'a>(&'a self, q: usize, val: &'a [bool]) -> impl Iterator<Item = usize> + 'a {
        self.out[q].iter().map(move |&t| &self.transitions[t]).filter(move |t| label_holds(&t.label, val)).map(|t| t.to)
    }
}

pub fn label_holds(label: &[Literal], val: &[bool]) -> bool {
    label.iter().all(|l| val[l.atom] == l.positive)
}

type FSet = BTreeSet<LtlFormula>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Expansion {
    lits: BTreeSet<Literal>,
    next: FSet,
    postponed: FSet,
}

fn expand(set: &FSet) -> Vec<Expansion> {
    let mut out = BTreeSet::new();
    let todo: Vec<LtlFormula> = set.iter().cloned().collect();
    go(todo, Expansion { lits: BTreeSet::new(), next: FSet::new(), postponed: FSet::new() }, &mut out);
    out.into_iter().collect()
}

fn go(mut todo: Vec<LtlFormula>, mut cur: Expansion, out: &mut BTreeSet<Expansion>) {
    while let Some(f) = todo.pop() {
        match f {
            L::True => {}
            L::False => return,
            L::Atom(a) => {
                if !add_lit(&mut cur, a, true) {
                    return;
                }
            }
            L::Not(inner) => match *inner {
                L::Atom(a) => {
                    if !add_lit(&mut cur, a, false) {
                        return;
                    }
                }
                other => panic!("formula not in negation normal form: !{other}"),
            },
            L::And(a, b) => {
                todo.push(*a);
                todo.push(*b);
            }
            L::Or(a, b) => {
                let mut t2 = todo.clone();
                t2.push(*b);
                go(t2, cur.clone(), out);
                todo.push(*a);
            }
            L::Next(a) => {
                insert_obligation(&mut cur.next, *a);
            }
            L::Until(ref a, ref b) => {
                // postpone: a now, the until again next
                let mut t2 = todo.clone();
                t2.push((**a).clone());
                let mut c2 = cur.clone();
                insert_obligation(&mut c2.next, f.clone());
                c2.postponed.insert(f.clone());
                go(t2, c2, out);
                // fulfil: b now
                todo.push((**b).clone());
            }
            L::Release(ref a, ref b) => {
                // b now, and the release again next
                let mut t2 = todo.clone();
                t2.push((**b).clone());
                let mut c2 = cur.clone();
                insert_obligation(&mut c2.next, f.clone());
                go(t2, c2, out);
                // release: both now
                todo.push((**a).clone());
                todo.push((**b).clone());
            }
            L::Finally(_) | L::Globally(_) => panic!("formula not in negation normal form: {f}"),
        }
    }
    out.insert(cur);
}

fn add_lit(cur: &mut Expansion, atom: usize, positive: bool) -> bool {
    if cur.lits.contains(&Literal { atom, positive: !positive }) {
        return false;
    }
    cur.lits.insert(Literal { atom, positive });
    true
}

fn insert_obligation(set: &mut FSet, f: LtlFormula) {
    if f != L::True {
        set.insert(f);
    }
}

fn untils(f: &LtlFormula, out: &mut Vec<LtlFormula>) {
    match f {
        L::True | L::False | L::Atom(_) => {}
        L::Not(a) | L::Next(a) | L::Finally(a) | L::Globally(a) => untils(a, out),
        L::And(a, b) | L::Or(a, b) | L::Release(a, b) => {
            untils(a, out);
            untils(b, out);
        }
        L::Until(a, b) => {
            untils(a, out);
            untils(b, out);
            if !out.contains(f) {
                out.push(f.clone());
            }
        }
    }
}

/// Translates `f` into a Büchi automaton accepting exactly the words that
/// satisfy it. The formula is normalised internally.
pub fn to_buchi(f: &LtlFormula) -> BuchiAutomaton {
    let f = f.nnf();
    let mut us = Vec::new();
    untils(&f, &mut us);
    let n = us.len();

    let mut init = FSet::new();
    insert_obligation(&mut init, f);

    let mut ids: BTreeMap<(FSet, usize), usize> = BTreeMap::new();
    let mut states = Vec::new();
    let mut keys: Vec<(FSet, usize)> = Vec::new();
    let mut transitions: Vec<BuchiTransition> = Vec::new();
    let mut cache: BTreeMap<FSet, Vec<Expansion>> = BTreeMap::new();
    let mut queue = VecDeque::new();

    let mut intern = |key: (FSet, usize), states: &mut Vec<BuchiState>, keys: &mut Vec<(FSet, usize)>, queue: &mut VecDeque<usize>| -> usize {
        if let Some(&id) = ids.get(&key) {
            return id;
        }
        let id = states.len();
        states.push(BuchiState {
            obligations: key.0.iter().map(|g| g.to_string()).collect(),
            level: key.1,
            accepting: key.1 == n,
        });
        ids.insert(key.clone(), id);
        keys.push(key);
        queue.push_back(id);
        id
    };

    let q0 = intern((init, 0), &mut states, &mut keys, &mut queue);
    while let Some(q) = queue.pop_front() {
        let (set, level) = keys[q].clone();
        let exps = cache.entry(set.clone()).or_insert_with(|| expand(&set)).clone();
        let mut seen = BTreeSet::new();
        for e in exps {
            let mut l = if level == n { 0 } else { level };
            while l < n && !e.postponed.contains(&us[l]) {
                l += 1;
            }
            let to = intern((e.next.clone(), l), &mut states, &mut keys, &mut queue);
            let label: Vec<Literal> = e.lits.iter().copied().collect();
            if seen.insert((to, label.clone())) {
                transitions.push(BuchiTransition { from: q, to, label });
            }
        }
    }

    let mut out = vec![Vec::new(); states.len()];
    for (i, t) in transitions.iter().enumerate() {
        out[t.from].push(i);
    }
    BuchiAutomaton { states, initial: vec![q0], transitions, out }
}

/// Automaton-side lasso membership: is `prefix · cycle^ω` accepted?
pub fn lasso_accepted(ba: &BuchiAutomaton, prefix: &[Vec<bool>], cycle: &[Vec<bool>]) -> bool {
    assert!(!cycle.is_empty());
    let word: Vec<&Vec<bool>> = prefix.iter().chain(cycle.iter()).collect();
    let len = word.len();
    let succ = |i: usize| if i + 1 < len { i + 1 } else { prefix.len() };
    let ns = ba.states.len();
    let node = |q: usize, i: usize| q * len + i;
    let edges = |v: usize| -> Vec<usize> {
        let (q, i) = (v / len, v % len);
        ba.step(q, word[i]).map(|q2| node(q2, succ(i))).collect()
    };
    // reachable product nodes
    let mut reach = vec![false; ns * len];
    let mut stack: Vec<usize> = ba.initial.iter().map(|&q| node(q, 0)).collect();
    for &v in &stack {
        reach[v] = true;
    }
    while let Some(v) = stack.pop() {
        for w in edges(v) {
            if !reach[w] {
                reach[w] = true;
                stack.push(w);
            }
        }
    }
    // an accepting reachable node that reaches itself
    for v in 0..ns * len {
        if !reach[v] || !ba.is_accepting(v / len) {
            continue;
        }
        let mut seen = vec![false; ns * len];
        let mut st = edges(v);
        while let Some(w) = st.pop() {
            if w == v {
                return true;
            }
            if !seen[w] {
                seen[w] = true;
                st.extend(edges(w));
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::super::eval_ltl_on_lasso;
    use super::*;

    fn p() -> LtlFormula {
        L::atom(0)
    }

    #[test]
    fn globally_p_is_one_accepting_state() {
        let ba = to_buchi(&L::globally(p()));
        assert_eq!(ba.states.len(), 1);
        assert!(ba.states[0].accepting);
        assert_eq!(ba.transitions, vec![BuchiTransition { from: 0, to: 0, label: vec![Literal { atom: 0, positive: true }] }]);
    }

    #[test]
    fn true_is_one_unconditional_loop() {
        let ba = to_buchi(&L::True);
        assert_eq!(ba.states.len(), 1);
        assert!(ba.states[0].accepting);
        assert_eq!(ba.transitions, vec![BuchiTransition { from: 0, to: 0, label: vec![] }]);
    }

    #[test]
    fn finally_p_has_waiting_and_satisfied_states() {
        let ba = to_buchi(&L::finally(p()));
        assert_eq!(ba.states.len(), 2);
        let waiting = ba.initial[0];
        assert!(!ba.states[waiting].accepting);
        assert!(ba.states.iter().any(|s| s.accepting));
    }

    #[test]
    fn agrees_with_the_evaluator_on_short_words() {
        let fs = [
            L::finally(p()),
            L::globally(p()),
            L::globally(L::finally(p())),
            L::finally(L::globally(p())),
            L::until(p(), L::atom(1)),
            L::release(p(), L::atom(1)),
            L::next(L::not(p())),
        ];
        let vals: Vec<Vec<bool>> = (0..4).map(|m| vec![m & 1 != 0, m & 2 != 0]).collect();
        for f in &fs {
            let ba = to_buchi(f);
            for a in &vals {
                for b in &vals {
                    for c in &vals {
                        let (pre, cyc) = (vec![a.clone()], vec![b.clone(), c.clone()]);
                        assert_eq!(lasso_accepted(&ba, &pre, &cyc), eval_ltl_on_lasso(f, &pre, &cyc), "{f}");
                    }
                }
            }
        }
    }
}
