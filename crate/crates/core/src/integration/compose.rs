//! Composition of a system with stubs, and replay of composition
//! counterexamples on the unstubbed system.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use super::{check_alphabet, IntegrationError, InterfaceAlphabet, InterfaceStub, LearnConfig, StubBinding};
use crate::explorer::{check_property, choice_json, CheckConfig, Trace, Verdict};
use crate::kernel::{encode_state, Kernel, KernelError, KernelState, SchedChoice};
use crate::scl::design::{Design, NameRef, PropertyKind};
use crate::scl::types::Value;
use crate::scl::{elaborate_with, DesignAst, ElabOptions};

/// Elaborates `ast` with each stub standing in for the instance it was
/// learned from.
pub fn compose(ast: &DesignAst, stubs: &[InterfaceStub]) -> Result<Design, IntegrationError> {
    let mut stubbed = BTreeSet::new();
    for s in stubs {
        if !ast.instances.iter().any(|i| i.name == s.component) {
            return Err(IntegrationError::UnknownInstance(s.component.clone()));
        }
        if !stubbed.insert(s.component.clone()) {
            return Err(IntegrationError::Invalid(format!("two stubs for instance `{}`", s.component)));
        }
    }
    let mut d = elaborate_with(ast, &ElabOptions { stubbed, ..Default::default() })?;
    let mut bindings = Vec::new();
    for s in stubs {
        let inst = d.instance(&s.component).expect("stubbed instance survives elaboration");
        check_alphabet(s, &InterfaceAlphabet::of_instance(&d, inst))?;
        bindings.push(StubBinding {
            instance: inst,
            stub: Arc::new(s.clone()),
            ports: d.instances[inst].ports.iter().map(|p| p.target).collect(),
        });
    }
    bindings.sort_by_key(|b| b.instance);
    d.stubs = bindings;
    Ok(d)
}

/// The design with only the named property kept.
pub fn select_property(ast: &DesignAst, property: &str) -> Result<DesignAst, IntegrationError> {
    let mut a = ast.clone();
    a.properties.retain(|p| p.name == property);
    if a.properties.is_empty() {
        return Err(IntegrationError::Explore(crate::explorer::ExploreError::UnknownProperty(property.to_string())));
    }
    Ok(a)
}

pub struct Composed {
    pub design: Design,
    pub verdict: Verdict,
}

/// Composes and checks one property. A Pass on a safety property carries
/// over to the real system within the horizon; a violation is a candidate
/// for [`replay_on_concrete`]. LTL verdicts with stubs are advisory.
pub fn compose_and_verify(
    ast: &DesignAst,
    stubs: &[InterfaceStub],
    property: &str,
    cfg: &CheckConfig,
) -> Result<Composed, IntegrationError> {
    let design = compose(&select_property(ast, property)?, stubs)?;
    let mut verdict = check_property(&design, property, cfg)?;
    if !design.stubs.is_empty() && matches!(design.property(property).map(|p| &p.kind), Some(PropertyKind::Ltl(_))) {
        verdict.advisory = true;
    }
    Ok(Composed { design, verdict })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    /// Index of the first composition step with no concrete counterpart.
    pub step: usize,
    /// The scheduler choice at that step, stub letters included.
    pub choice: serde_json::Value,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReplayOutcome {
    Confirmed(Trace),
    Spurious(Divergence),
}

impl ReplayOutcome {
    pub fn to_json(&self, concrete: &Design) -> serde_json::Value {
        match self {
            ReplayOutcome::Confirmed(t) => serde_json::json!({"outcome": "confirmed", "trace": t.to_json(concrete)}),
            ReplayOutcome::Spurious(d) => serde_json::json!({
                "outcome": "spurious",
                "step": d.step,
                "choice": d.choice,
                "reason": d.reason,
            }),
        }
    }
}

/// Searches `concrete` (the unstubbed system) for a run matching `trace`
/// from `composed`. Processes of stubbed instances run freely; every other
/// choice must match by name and every composed observable must agree.
pub fn replay_on_concrete(
    composed: &Design,
    concrete: &Design,
    trace: &Trace,
    cfg: &CheckConfig,
    limits: &LearnConfig,
) -> Result<ReplayOutcome, IntegrationError> {
    if composed.stubs.is_empty() {
        return Ok(ReplayOutcome::Confirmed(trace.clone()));
    }
    if trace.is_empty() {
        return Err(IntegrationError::Invalid("empty trace".into()));
    }
    let kc = Kernel::new(concrete, cfg.kernel.clone(), cfg.env);
    let m = Mapping::new(composed, concrete)?;

    struct Node {
        state: KernelState,
        idx: usize,
        parent: Option<usize>,
        choice: SchedChoice,
    }
    let mut nodes: Vec<Node> = Vec::new();
    let mut seen: HashSet<(Vec<u8>, usize)> = HashSet::new();
    let mut queue = VecDeque::new();
    let mut furthest = 0usize;
    let mut error: Option<KernelError> = None;
    let last = trace.len() - 1;

    for (c, s) in kc.initial_states()? {
        if m.choice_matches(&trace.steps[0].choice, &c) && m.obs_matches(&trace.steps[0], &s) && seen.insert((encode_state(&s), 0)) {
            nodes.push(Node { state: s, idx: 0, parent: None, choice: c });
            queue.push_back(nodes.len() - 1);
        }
    }
    while let Some(n) = queue.pop_front() {
        limits.poll(nodes.len())?;
        let (idx, state) = (nodes[n].idx, nodes[n].state.clone());
        furthest = furthest.max(idx);
        if idx == last {
            let path = {
                let mut p = vec![];
                let mut at = Some(n);
                while let Some(i) = at {
                    p.push(i);
                    at = nodes[i].parent;
                }
                p.reverse();
                p
            };
            let loop_start = match trace.loop_start {
                None => Some(None),
                Some(ls) => path.iter().position(|&i| nodes[i].idx == ls && nodes[i].state == state).map(Some),
            };
            if let Some(loop_start) = loop_start {
                let steps: Vec<(SchedChoice, KernelState)> =
                    path.iter().map(|&i| (nodes[i].choice.clone(), nodes[i].state.clone())).collect();
                return Ok(ReplayOutcome::Confirmed(Trace::from_path(&kc, &steps, loop_start)));
            }
            continue;
        }
        let want = &trace.steps[idx + 1];
        let mut next: Vec<(SchedChoice, KernelState, usize)> = Vec::new();
        if want.choice == SchedChoice::Stutter {
            if kc.is_terminal(&state) {
                next.push((SchedChoice::Stutter, state.clone(), idx + 1));
            }
        } else {
            match kc.successors(&state) {
                Ok(ts) => {
                    for t in ts {
                        if m.is_free(&t.choice) {
                            next.push((t.choice, t.state, idx));
                        } else if m.choice_matches(&want.choice, &t.choice) && m.obs_matches(want, &t.state) {
                            next.push((t.choice, t.state, idx + 1));
                        }
                    }
                }
                Err(e) => {
                    error.get_or_insert(e);
                }
            }
        }
        for (c, s, i) in next {
            if seen.insert((encode_state(&s), i)) {
                nodes.push(Node { state: s, idx: i, parent: Some(n), choice: c });
                queue.push_back(nodes.len() - 1);
            }
        }
    }
    if let Some(e) = error {
        return Err(e.into());
    }
    let step = if nodes.is_empty() { 0 } else { furthest + 1 };
    let step = step.min(last);
    let reason = if step == 0 {
        "no concrete initial state matches".to_string()
    } else if step == last && trace.loop_start.is_some() && furthest == last {
        "no concrete run closes the loop".to_string()
    } else {
        "no concrete behaviour produces this step".to_string()
    };
    Ok(ReplayOutcome::Spurious(Divergence { step, choice: choice_json(composed, &trace.steps[step].choice), reason }))
}

/// Name correspondence between a composed design and its concrete system.
struct Mapping {
    /// composed observable index -> concrete observable index
    obs: Vec<usize>,
    /// composed process -> concrete process
    procs: Vec<usize>,
    /// concrete input -> composed input
    inputs: Vec<Option<usize>>,
    /// concrete processes belonging to stubbed instances
    free: HashSet<usize>,
}

impl Mapping {
    fn new(a: &Design, c: &Design) -> Result<Mapping, IntegrationError> {
        let missing = |what: &str, name: &str| IntegrationError::Invalid(format!("{what} `{name}` of the composition is not in the concrete design"));
        let mut obs = Vec::with_capacity(a.obs_len());
        for name in a.obs_names() {
            match c.lookup(name) {
                Some(NameRef::Value(r)) => obs.push(c.obs_index(r)),
                _ => return Err(missing("observable", name)),
            }
        }
        let mut procs = Vec::new();
        for p in &a.processes {
            match c.lookup(&p.name) {
                Some(NameRef::Process(q)) => procs.push(q),
                _ => match c.processes.iter().position(|q| q.name == p.name) {
                    Some(q) => procs.push(q),
                    None => return Err(missing("process", &p.name)),
                },
            }
        }
        let by_name: HashMap<&str, usize> = a.inputs.iter().enumerate().map(|(i, x)| (x.name.as_str(), i)).collect();
        let inputs = c.inputs.iter().map(|x| by_name.get(x.name.as_str()).copied()).collect();
        let stubbed: HashSet<&str> = a.stubs.iter().map(|b| a.instances[b.instance].name.as_str()).collect();
        let free = c
            .processes
            .iter()
            .enumerate()
            .filter(|(_, p)| stubbed.contains(c.instances[p.instance].name.as_str()))
            .map(|(i, _)| i)
            .collect();
        Ok(Mapping { obs, procs, inputs, free })
    }

    fn is_free(&self, c: &SchedChoice) -> bool {
        matches!(c, SchedChoice::Run(p) if self.free.contains(p))
    }

    fn inputs_match(&self, a: &[Value], c: &[Value]) -> bool {
        self.inputs.iter().zip(c).all(|(m, v)| m.is_none_or(|i| a[i] == *v))
    }

    fn choice_matches(&self, a: &SchedChoice, c: &SchedChoice) -> bool {
        match (a, c) {
            (SchedChoice::Init { inputs: ia, .. }, SchedChoice::Init { inputs: ic, .. })
            | (SchedChoice::Time { inputs: ia, .. }, SchedChoice::Time { inputs: ic, .. }) => self.inputs_match(ia, ic),
            (SchedChoice::Run(p), SchedChoice::Run(q)) => self.procs[*p] == *q,
            (SchedChoice::Delta { .. }, SchedChoice::Delta { .. }) => true,
            (SchedChoice::Stutter, SchedChoice::Stutter) => true,
            _ => false,
        }
    }

    fn obs_matches(&self, step: &crate::explorer::TraceStep, s: &KernelState) -> bool {
        if step.time != s.time || step.delta != s.delta {
            return false;
        }
        let values = crate::kernel::observe_values(s);
        self.obs.iter().zip(&step.observations).all(|(&i, v)| values[i] == *v)
    }
}
