//! Explicit-state verification: invariant, assertion and deadlock checking
//! by depth-first search, and LTL checking by nested depth-first search over
//! the product with a Büchi automaton for the negated formula.

mod trace;

pub use trace::{choice_json, replay, validate, Claim, ReplayError, Trace, TraceStep};

use std::collections::{HashMap, HashSet, VecDeque};

use serde::Serialize;
use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::kernel::{Bound, EnvPolicy, FaultKind, Kernel, KernelConfig, KernelError, KernelState, SchedChoice};
use crate::props::{to_buchi, LtlProperty};
use crate::scl::design::{Design, PropertyKind, RExpr};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckConfig {
    #[serde(flatten)]
    pub kernel: KernelConfig,
    pub env: EnvPolicy,
    pub state_cap: usize,
    pub check_deadlock: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            kernel: KernelConfig::default(),
            env: EnvPolicy::MostGeneral,
            state_cap: 5_000_000,
            check_deadlock: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Status {
    Pass,
    InvariantViolation,
    AssertionViolation,
    Deadlock,
    LtlViolation,
    DeltaOverflow,
    TimeBound,
}

impl Status {
    pub fn is_violation(self) -> bool {
        matches!(self, Status::InvariantViolation | Status::AssertionViolation | Status::Deadlock | Status::LtlViolation)
    }

    pub fn is_bound(self) -> bool {
        matches!(self, Status::DeltaOverflow | Status::TimeBound)
    }

    fn of_bound(b: Bound) -> Status {
        match b {
            Bound::DeltaOverflow => Status::DeltaOverflow,
            Bound::TimeBound => Status::TimeBound,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub states_stored: usize,
    pub transitions: usize,
    pub max_depth: usize,
    /// State expansions performed.
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub status: Status,
    pub property: Option<String>,
    pub stats: Stats,
    pub trace: Option<Trace>,
    /// Human-readable reason: which invariant or assertion, which bound.
    pub detail: Option<String>,
    /// Set for liveness verdicts on designs containing stubs.
    pub advisory: bool,
}

impl Verdict {
    pub fn to_json(&self, d: &Design, config: &CheckConfig) -> Json {
        let mut m = Map::new();
        m.insert("status".into(), json!(self.status));
        m.insert("property".into(), json!(self.property));
        m.insert("stats".into(), json!(self.stats));
        m.insert("config".into(), json!(config));
        m.insert("detail".into(), json!(self.detail));
        m.insert("advisory".into(), json!(self.advisory));
        m.insert("trace".into(), self.trace.as_ref().map_or(Json::Null, |t| t.to_json(d)));
        Json::Object(m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExploreError {
    #[error("state cap of {cap} states exceeded")]
    StateCap { cap: usize },
    #[error("no property named `{0}`")]
    UnknownProperty(String),
}

/// An invariant to check, with its display name.
pub struct Invariant<'a> {
    pub name: &'a str,
    pub expr: &'a RExpr,
}

/// First recorded bound, reported when no violation exists.
#[derive(Default)]
struct BoundHit(Option<KernelError>);

impl BoundHit {
    fn note(&mut self, e: KernelError) {
        if self.0.is_none() {
            self.0 = Some(e);
        }
    }

    fn verdict(self, property: Option<String>, stats: Stats) -> Verdict {
        match self.0 {
            None => Verdict { status: Status::Pass, property, stats, trace: None, detail: None, advisory: false },
            Some(e) => Verdict {
                status: Status::of_bound(e.bound()),
                property,
                stats,
                trace: None,
                detail: Some(e.to_string()),
                advisory: false,
            },
        }
    }
}

struct Frame {
    choice: SchedChoice,
    state: KernelState,
    succ: Vec<(SchedChoice, KernelState)>,
    next: usize,
}

fn safety_problem(k: &Kernel, s: &KernelState, invs: &[Invariant], deadlock: bool) -> Option<(Status, String)> {
    let d = k.design;
    if let Some(f) = s.fault {
        let p = &d.processes[f.process];
        let node = &p.cfg[f.loc as usize];
        let what = match f.kind {
            FaultKind::AssertionFailed => "assertion failed",
            FaultKind::OutOfRange => "value out of range",
        };
        return Some((Status::AssertionViolation, format!("{what} in {} at {} `{}`", p.name, node.pos, node.label)));
    }
    for inv in invs {
        if inv.expr.eval(s) == 0 {
            return Some((Status::InvariantViolation, format!("invariant `{}` violated", inv.name)));
        }
    }
    if deadlock && k.is_deadlock(s) {
        let waiting: Vec<&str> = s
            .procs
            .iter()
            .enumerate()
            .filter(|(_, p)| p.status != crate::kernel::Status::Terminated)
            .map(|(i, _)| d.processes[i].name.as_str())
            .collect();
        return Some((Status::Deadlock, format!("terminal state with waiting processes: {}", waiting.join(", "))));
    }
    None
}

/// Exhaustive DFS for assertion, invariant and (optionally) deadlock
/// violations. Reports the first violation in canonical DFS order.
pub fn check_safety(k: &Kernel, invs: &[Invariant], cfg: &CheckConfig, property: Option<String>) -> Result<Verdict, ExploreError> {
    let mut stats = Stats::default();
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let mut bound = BoundHit::default();
    let inits = match k.initial_states() {
        Ok(v) => v,
        Err(e) => {
            bound.note(e);
            vec![]
        }
    };
    for (c0, s0) in inits {
        if !seen.insert(k.encode(&s0)) {
            continue;
        }
        stats.states_stored += 1;
        let mut stack: Vec<Frame> = Vec::new();
        let mut pending = Some((c0, s0));
        loop {
            if let Some((choice, state)) = pending.take() {
                stats.max_depth = stats.max_depth.max(stack.len() + 1);
                if let Some((status, detail)) = safety_problem(k, &state, invs, cfg.check_deadlock) {
                    let mut path: Vec<(SchedChoice, KernelState)> =
                        stack.into_iter().map(|f| (f.choice, f.state)).collect();
                    path.push((choice, state));
                    return Ok(Verdict {
                        status,
                        property,
                        stats,
                        trace: Some(Trace::from_path(k, &path, None)),
                        detail: Some(detail),
                        advisory: false,
                    });
                }
                stats.steps += 1;
                let succ = match k.successors(&state) {
                    Ok(v) => v.into_iter().map(|t| (t.choice, t.state)).collect(),
                    Err(e) => {
                        bound.note(e);
                        vec![]
                    }
                };
                stack.push(Frame { choice, state, succ, next: 0 });
            }
            let Some(top) = stack.last_mut() else { break };
            if top.next < top.succ.len() {
                let (c, s) = top.succ[top.next].clone();
                top.next += 1;
                stats.transitions += 1;
                if seen.insert(k.encode(&s)) {
                    stats.states_stored += 1;
                    if stats.states_stored > cfg.state_cap {
                        return Err(ExploreError::StateCap { cap: cfg.state_cap });
                    }
                    pending = Some((c, s));
                }
            } else {
                stack.pop();
            }
        }
    }
    Ok(bound.verdict(property, stats))
}

/// Product node: interned kernel state and Büchi state.
type Node = (u32, u32);

struct Product<'k, 'd> {
    k: &'k Kernel<'d>,
    prop: &'k LtlProperty,
    ba: crate::props::BuchiAutomaton,
    ids: HashMap<Vec<u8>, u32>,
    states: Vec<KernelState>,
    /// Cached kernel successors per interned state.
    succ: HashMap<u32, Vec<(SchedChoice, u32)>>,
    bound: BoundHit,
    cap: usize,
    stats: Stats,
}

impl Product<'_, '_> {
    fn intern(&mut self, s: KernelState) -> Result<u32, ExploreError> {
        let b = self.k.encode(&s);
        if let Some(&i) = self.ids.get(&b) {
            return Ok(i);
        }
        let i = self.states.len() as u32;
        if self.states.len() >= self.cap {
            return Err(ExploreError::StateCap { cap: self.cap });
        }
        self.ids.insert(b, i);
        self.states.push(s);
        Ok(i)
    }

    fn kernel_succ(&mut self, s: u32) -> Result<Vec<(SchedChoice, u32)>, ExploreError> {
        if let Some(v) = self.succ.get(&s) {
            return Ok(v.clone());
        }
        self.stats.steps += 1;
        let st = self.states[s as usize].clone();
        let v = if self.k.is_terminal(&st) {
            vec![(SchedChoice::Stutter, s)]
        } else {
            match self.k.successors(&st) {
                Ok(ts) => {
                    let mut v = Vec::with_capacity(ts.len());
                    for t in ts {
                        v.push((t.choice, self.intern(t.state)?));
                    }
                    v
                }
                Err(e) => {
                    self.bound.note(e);
                    vec![]
                }
            }
        };
        self.succ.insert(s, v.clone());
        Ok(v)
    }

    /// Product successors in canonical order: kernel choice, then Büchi edge.
    fn succ(&mut self, n: Node) -> Result<Vec<(SchedChoice, Node)>, ExploreError> {
        let val = self.prop.valuation(&crate::kernel::observe_values(&self.states[n.0 as usize]));
        let qs: Vec<u32> = self.ba.step(n.1 as usize, &val).map(|q| q as u32).collect();
        if qs.is_empty() {
            return Ok(vec![]);
        }
        let ks = self.kernel_succ(n.0)?;
        let mut out = Vec::with_capacity(ks.len() * qs.len());
        for (c, s) in ks {
            for &q in &qs {
                out.push((c.clone(), (s, q)));
            }
        }
        Ok(out)
    }
}

/// Nested DFS for an accepting cycle in the product of the design with the
/// automaton of the negated formula. Finite runs stutter on their terminal
/// state.
pub fn check_ltl(k: &Kernel, prop: &LtlProperty, cfg: &CheckConfig, property: Option<String>) -> Result<Verdict, ExploreError> {
    let ba = to_buchi(&prop.formula.negated());
    let mut p = Product {
        k,
        prop,
        ba,
        ids: HashMap::new(),
        states: vec![],
        succ: HashMap::new(),
        bound: BoundHit::default(),
        cap: cfg.state_cap,
        stats: Stats::default(),
    };
    let advisory = !k.design.stubs.is_empty();
    let inits = match k.initial_states() {
        Ok(v) => v,
        Err(e) => {
            p.bound.note(e);
            vec![]
        }
    };
    let mut outer_seen: HashSet<Node> = HashSet::new();
    let mut inner_seen: HashSet<Node> = HashSet::new();
    let q0s: Vec<u32> = p.ba.initial.iter().map(|&q| q as u32).collect();
    for (c0, s0) in inits {
        let s0 = p.intern(s0)?;
        for &q0 in &q0s {
            let root = (s0, q0);
            if !outer_seen.insert(root) {
                continue;
            }
            // outer stack entries: (choice into node, node, successors, next)
            let mut stack: Vec<(SchedChoice, Node, Vec<(SchedChoice, Node)>, usize)> = Vec::new();
            let mut on_stack: HashMap<Node, usize> = HashMap::new();
            let s = p.succ(root)?;
            stack.push((c0.clone(), root, s, 0));
            on_stack.insert(root, 0);
            while let Some(top) = stack.last_mut() {
                if top.3 < top.2.len() {
                    let (c, n) = top.2[top.3].clone();
                    top.3 += 1;
                    p.stats.transitions += 1;
                    if outer_seen.insert(n) {
                        let s = p.succ(n)?;
                        on_stack.insert(n, stack.len());
                        stack.push((c, n, s, 0));
                        p.stats.max_depth = p.stats.max_depth.max(stack.len());
                    }
                    continue;
                }
                // post-order: seed an inner search from accepting nodes
                let node = top.1;
                if p.ba.is_accepting(node.1 as usize) {
                    if let Some((hit, inner_path)) = inner_dfs(&mut p, node, &on_stack, &mut inner_seen)? {
                        let mut path: Vec<(SchedChoice, KernelState)> =
                            stack.iter().map(|f| (f.0.clone(), p.states[f.1 .0 as usize].clone())).collect();
                        for (c, n) in inner_path {
                            path.push((c, p.states[n.0 as usize].clone()));
                        }
                        let ls = hit;
                        p.stats.states_stored = p.states.len();
                        let trace = Trace::from_path(k, &path, Some(ls));
                        return Ok(Verdict {
                            status: Status::LtlViolation,
                            property,
                            stats: p.stats,
                            trace: Some(trace),
                            detail: Some(format!("accepting cycle for the negation of `{}`", prop.render())),
                            advisory,
                        });
                    }
                }
                on_stack.remove(&node);
                stack.pop();
            }
        }
    }
    p.stats.states_stored = p.states.len();
    let mut v = std::mem::take(&mut p.bound).verdict(property, p.stats);
    v.advisory = advisory;
    Ok(v)
}

/// Searches from `seed` for a node on the outer stack. Returns the stack
/// index hit and the inner path (excluding `seed`).
#[allow(clippy::type_complexity)]
fn inner_dfs(
    p: &mut Product,
    seed: Node,
    on_stack: &HashMap<Node, usize>,
    seen: &mut HashSet<Node>,
) -> Result<Option<(usize, Vec<(SchedChoice, Node)>)>, ExploreError> {
    let mut stack: Vec<(SchedChoice, Node, Vec<(SchedChoice, Node)>, usize)> = Vec::new();
    let s = p.succ(seed)?;
    stack.push((SchedChoice::Stutter, seed, s, 0));
    while let Some(top) = stack.last_mut() {
        if top.3 < top.2.len() {
            let (c, n) = top.2[top.3].clone();
            top.3 += 1;
            p.stats.transitions += 1;
            if let Some(&idx) = on_stack.get(&n) {
                let mut path: Vec<(SchedChoice, Node)> = stack[1..].iter().map(|f| (f.0.clone(), f.1)).collect();
                path.push((c, n));
                return Ok(Some((idx, path)));
            }
            if seen.insert(n) {
                let s = p.succ(n)?;
                stack.push((c, n, s, 0));
            }
        } else {
            stack.pop();
        }
    }
    Ok(None)
}

/// Result of plain reachability with no property logic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSpace {
    pub states: usize,
    pub transitions: usize,
    pub terminals: Vec<KernelState>,
    /// Bounds hit during exploration (paths were truncated there).
    pub bounds: Vec<KernelError>,
}

/// Breadth-first enumeration of all reachable states.
pub fn enumerate_state_space(k: &Kernel, cap: usize) -> Result<StateSpace, ExploreError> {
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let mut queue = VecDeque::new();
    let mut out = StateSpace { states: 0, transitions: 0, terminals: vec![], bounds: vec![] };
    match k.initial_states() {
        Ok(v) => {
            for (_, s) in v {
                if seen.insert(k.encode(&s)) {
                    queue.push_back(s);
                }
            }
        }
        Err(e) => out.bounds.push(e),
    }
    while let Some(s) = queue.pop_front() {
        match k.successors(&s) {
            Ok(ts) => {
                if ts.is_empty() {
                    out.terminals.push(s);
                }
                for t in ts {
                    out.transitions += 1;
                    if seen.insert(k.encode(&t.state)) {
                        if seen.len() > cap {
                            return Err(ExploreError::StateCap { cap });
                        }
                        queue.push_back(t.state);
                    }
                }
            }
            Err(e) => {
                if !out.bounds.contains(&e) {
                    out.bounds.push(e);
                }
            }
        }
    }
    out.states = seen.len();
    Ok(out)
}

/// Checks a named design property: invariants by DFS (together with inline
/// assertions and, if enabled, deadlock), LTL formulas by nested DFS.
pub fn check_property(d: &Design, name: &str, cfg: &CheckConfig) -> Result<Verdict, ExploreError> {
    let prop = d.property(name).ok_or_else(|| ExploreError::UnknownProperty(name.to_string()))?;
    let k = Kernel::new(d, cfg.kernel.clone(), cfg.env);
    match &prop.kind {
        PropertyKind::Invariant(e) => check_safety(&k, &[Invariant { name, expr: e }], cfg, Some(name.to_string())),
        PropertyKind::Ltl(l) => check_ltl(&k, l, cfg, Some(name.to_string())),
    }
}

/// Checks assertions and deadlock only.
pub fn check_design(d: &Design, cfg: &CheckConfig) -> Result<Verdict, ExploreError> {
    let k = Kernel::new(d, cfg.kernel.clone(), cfg.env);
    check_safety(&k, &[], cfg, None)
}

/// One maximal run that always takes the first successor.
pub fn simulate(k: &Kernel, max_steps: usize) -> (Vec<(SchedChoice, KernelState)>, Option<KernelError>) {
    let mut path = Vec::new();
    let (c0, s0) = match k.initial_states() {
        Ok(mut v) if !v.is_empty() => v.remove(0),
        Ok(_) => return (path, None),
        Err(e) => return (path, Some(e)),
    };
    path.push((c0, s0));
    while path.len() < max_steps {
        let cur = &path.last().unwrap().1;
        match k.successors(cur) {
            Ok(mut ts) if !ts.is_empty() => {
                let t = ts.remove(0);
                path.push((t.choice, t.state));
            }
            Ok(_) => break,
            Err(e) => return (path, Some(e)),
        }
    }
    (path, None)
}
