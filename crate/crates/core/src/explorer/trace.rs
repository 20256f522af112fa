//! Counterexample traces: construction, replay and JSON rendering.

use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::kernel::{self, FaultKind, Kernel, KernelError, KernelState, Phase, SchedChoice};
use crate::props::LtlProperty;
use crate::scl::design::{Design, RExpr};
use crate::scl::types::Value;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub choice: SchedChoice,
    pub time: u32,
    pub delta: u32,
    pub phase: Phase,
    /// Observation of the state reached by `choice`.
    pub observations: Vec<Value>,
}

/// A replayable run. Step 0 is the choice of initial state. For a lasso,
/// the last state equals the state at `loop_start`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub initial_state: Vec<u8>,
    pub steps: Vec<TraceStep>,
    pub loop_start: Option<usize>,
}

impl Trace {
    pub(crate) fn from_path(k: &Kernel, path: &[(SchedChoice, KernelState)], loop_start: Option<usize>) -> Trace {
        Trace {
            initial_state: k.encode(&path[0].1),
            steps: path
                .iter()
                .map(|(c, s)| {
                    let o = k.observe(s);
                    TraceStep { choice: c.clone(), time: o.time, delta: o.delta, phase: o.phase, observations: o.values }
                })
                .collect(),
            loop_start,
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Observation word for LTL evaluation: (prefix, cycle).
    pub fn lasso_word(&self) -> Option<(Vec<Vec<Value>>, Vec<Vec<Value>>)> {
        let ls = self.loop_start?;
        let obs: Vec<Vec<Value>> = self.steps.iter().map(|s| s.observations.clone()).collect();
        let n = obs.len();
        if ls + 1 >= n {
            return None;
        }
        Some((obs[..ls].to_vec(), obs[ls..n - 1].to_vec()))
    }

    pub fn to_json(&self, d: &Design) -> Json {
        let names = d.obs_names();
        let types = d.obs_types();
        let steps: Vec<Json> = self
            .steps
            .iter()
            .map(|s| {
                let mut obs = Map::new();
                for (i, v) in s.observations.iter().enumerate() {
                    obs.insert(names[i].to_string(), types[i].to_json(*v));
                }
                json!({
                    "choice": choice_json(d, &s.choice),
                    "time": s.time,
                    "delta": s.delta,
                    "phase": s.phase,
                    "observations": obs,
                })
            })
            .collect();
        let mut m = Map::new();
        m.insert("initial_state".into(), Json::String(kernel::hex(&self.initial_state)));
        m.insert("steps".into(), Json::Array(steps));
        if let Some(l) = self.loop_start {
            m.insert("loop_start".into(), json!(l));
        }
        Json::Object(m)
    }
}

pub fn choice_json(d: &Design, c: &SchedChoice) -> Json {
    let inputs = |v: &[Value]| -> Json {
        let mut m = Map::new();
        for (i, inp) in d.inputs.iter().enumerate() {
            m.insert(inp.name.clone(), inp.ty.to_json(v[i]));
        }
        Json::Object(m)
    };
    let stubs = |v: &[Option<usize>]| -> Json {
        let mut m = Map::new();
        for (b, sb) in d.stubs.iter().enumerate() {
            let l = v[b].map_or(Json::Null, |li| Json::String(sb.stub.alphabet.render_letter(&sb.stub.letters[li])));
            m.insert(d.instances[sb.instance].name.clone(), l);
        }
        Json::Object(m)
    };
    match c {
        SchedChoice::Init { inputs: i, stubs: s } => {
            let mut m = Map::new();
            m.insert("kind".into(), json!("init"));
            m.insert("inputs".into(), inputs(i));
            if !d.stubs.is_empty() {
                m.insert("stubs".into(), stubs(s));
            }
            Json::Object(m)
        }
        SchedChoice::Run(p) => json!({"kind": "run", "process": d.processes[*p].name}),
        SchedChoice::Delta { stubs: s } => {
            let mut m = Map::new();
            m.insert("kind".into(), json!("delta"));
            if !d.stubs.is_empty() {
                m.insert("stubs".into(), stubs(s));
            }
            Json::Object(m)
        }
        SchedChoice::Time { inputs: i, stubs: s } => {
            let mut m = Map::new();
            m.insert("kind".into(), json!("time"));
            m.insert("inputs".into(), inputs(i));
            if !d.stubs.is_empty() {
                m.insert("stubs".into(), stubs(s));
            }
            Json::Object(m)
        }
        SchedChoice::Stutter => json!({"kind": "stutter"}),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("trace is empty")]
    Empty,
    #[error("initial state does not decode or is not an initial state of the design")]
    BadInitialState,
    #[error("step {step}: choice is not enabled")]
    ChoiceNotEnabled { step: usize },
    #[error("step {step}: observation differs from the recorded one")]
    ObservationMismatch { step: usize },
    #[error("step {step}: {source}")]
    Kernel { step: usize, source: KernelError },
    #[error("lasso does not close: last state differs from the loop-start state")]
    OpenLasso,
    #[error("the final state does not exhibit the claimed violation")]
    NoViolation,
}

/// Re-executes a trace through the kernel and returns the visited states.
pub fn replay(k: &Kernel, t: &Trace) -> Result<Vec<KernelState>, ReplayError> {
    let first = t.steps.first().ok_or(ReplayError::Empty)?;
    let s0 = k.decode(&t.initial_state).ok_or(ReplayError::BadInitialState)?;
    let inits = k.initial_states().map_err(|e| ReplayError::Kernel { step: 0, source: e })?;
    if !inits.iter().any(|(c, s)| *c == first.choice && *s == s0) {
        return Err(ReplayError::BadInitialState);
    }
    let mut states = vec![s0];
    check_obs(k, &states[0], first, 0)?;
    for (i, step) in t.steps.iter().enumerate().skip(1) {
        let cur = states.last().unwrap();
        let next = if step.choice == SchedChoice::Stutter {
            if !k.is_terminal(cur) {
                return Err(ReplayError::ChoiceNotEnabled { step: i });
            }
            cur.clone()
        } else {
            let succ = k.successors(cur).map_err(|e| ReplayError::Kernel { step: i, source: e })?;
            succ.into_iter()
                .find(|tr| tr.choice == step.choice)
                .ok_or(ReplayError::ChoiceNotEnabled { step: i })?
                .state
        };
        check_obs(k, &next, step, i)?;
        states.push(next);
    }
    if let Some(ls) = t.loop_start {
        if ls >= states.len() || states.last() != Some(&states[ls]) {
            return Err(ReplayError::OpenLasso);
        }
    }
    Ok(states)
}

fn check_obs(k: &Kernel, s: &KernelState, step: &TraceStep, i: usize) -> Result<(), ReplayError> {
    let o = k.observe(s);
    if o.values != step.observations || o.time != step.time || o.delta != step.delta || o.phase != step.phase {
        return Err(ReplayError::ObservationMismatch { step: i });
    }
    Ok(())
}

/// What a trace is claimed to demonstrate.
pub enum Claim<'a> {
    Assertion,
    Invariant(&'a RExpr),
    Deadlock,
    Ltl(&'a LtlProperty),
}

/// Replays a trace and checks that it ends in the claimed violation.
pub fn validate(k: &Kernel, t: &Trace, claim: Claim) -> Result<(), ReplayError> {
    let states = replay(k, t)?;
    let last = states.last().unwrap();
    let ok = match claim {
        Claim::Assertion => last.fault.is_some_and(|f| matches!(f.kind, FaultKind::AssertionFailed | FaultKind::OutOfRange)),
        Claim::Invariant(e) => last.fault.is_none() && e.eval(last) == 0,
        Claim::Deadlock => k.is_deadlock(last),
        Claim::Ltl(p) => match t.lasso_word() {
            Some((pre, cyc)) => !p.eval_on_lasso(&pre, &cyc),
            None => false,
        },
    };
    if ok {
        Ok(())
    } else {
        Err(ReplayError::NoViolation)
    }
}
