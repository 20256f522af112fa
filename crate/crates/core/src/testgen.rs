//! Test generation: coverage goals, shortest witnesses found by
//! breadth-first search, and concretization of abstract tests to CSV
//! stimulus and expectation scripts.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::explorer::choice_json;
use crate::kernel::{encode_state, Kernel, KernelError, KernelState, SchedChoice};
use crate::scl::design::{Design, NameRef, ProcId, Ref, SigId};
use crate::scl::types::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Statements,
    Toggles,
}

impl std::str::FromStr for Criterion {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "statements" => Ok(Criterion::Statements),
            "toggles" => Ok(Criterion::Toggles),
            _ => Err(format!("unknown coverage criterion `{s}` (expected statements or toggles)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GoalKind {
    Statement { process: ProcId, loc: u32 },
    Toggle { signal: SigId, from: Value, to: Value },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CoverageGoal {
    pub id: String,
    pub kind: GoalKind,
}

/// Goals in a fixed order: statements (processes in elaboration order,
/// locations ascending), then toggles (signals by name, value pairs
/// lexicographic).
pub fn enumerate_goals(d: &Design, criteria: &[Criterion]) -> Vec<CoverageGoal> {
    let mut out = Vec::new();
    if criteria.contains(&Criterion::Statements) {
        for (p, proc_) in d.processes.iter().enumerate() {
            for loc in 0..proc_.cfg.len() as u32 {
                out.push(CoverageGoal { id: format!("stmt:{}:{loc}", proc_.name), kind: GoalKind::Statement { process: p, loc } });
            }
        }
    }
    if criteria.contains(&Criterion::Toggles) {
        let mut sigs: Vec<SigId> = (0..d.signals.len()).collect();
        sigs.sort_by(|a, b| d.signals[*a].name.cmp(&d.signals[*b].name));
        for s in sigs {
            let sig = &d.signals[s];
            for from in sig.ty.values() {
                for to in sig.ty.values().filter(|&v| v != from) {
                    out.push(CoverageGoal {
                        id: format!("toggle:{}:{}->{}", sig.name, sig.ty.render(from), sig.ty.render(to)),
                        kind: GoalKind::Toggle { signal: s, from, to },
                    });
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    pub time: u32,
    /// Open input name -> value, rendered.
    pub assignments: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    pub time: u32,
    pub signal: String,
    pub value: String,
}

/// A witness for one goal. Replaying `choices` from the initial state
/// covers the goal with the given stimulus and expectations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractTestCase {
    pub goal: String,
    pub stimulus: Vec<Stimulus>,
    pub expectations: Vec<Expectation>,
    /// Scheduler choices, rendered.
    pub schedule: Vec<Json>,
    #[serde(skip)]
    pub choices: Vec<SchedChoice>,
}

impl AbstractTestCase {
    pub fn steps(&self) -> usize {
        self.schedule.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum UncoveredReason {
    /// No reachable state covers the goal.
    Unreachable,
    /// The search hit a bound; the goal may lie beyond it.
    Bound(String),
}

impl fmt::Display for UncoveredReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UncoveredReason::Unreachable => f.write_str("unreachable"),
            UncoveredReason::Bound(b) => write!(f, "bound hit: {b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Uncovered {
    pub goal: String,
    pub reason: UncoveredReason,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generated {
    pub tests: Vec<AbstractTestCase>,
    pub uncovered: Vec<Uncovered>,
}

impl Generated {
    pub fn to_json(&self) -> Json {
        serde_json::json!({ "tests": self.tests, "uncovered": self.uncovered })
    }
}

struct Node {
    state: KernelState,
    parent: Option<usize>,
    choice: SchedChoice,
}

fn covers(goal: &GoalKind, from: &KernelState, choice: &SchedChoice, visited: &[u32], to: &KernelState) -> bool {
    match *goal {
        GoalKind::Statement { process, loc } => *choice == SchedChoice::Run(process) && visited.contains(&loc),
        GoalKind::Toggle { signal, from: a, to: b } => from.sig_cur[signal] == a && to.sig_cur[signal] == b,
    }
}

/// Breadth-first search for a shortest witness per goal. Successor order
/// is the kernel's canonical order, so ties go to the first choice.
pub fn generate_tests(k: &Kernel, goals: &[CoverageGoal], state_cap: usize) -> Generated {
    let d = k.design;
    let mut pending: Vec<usize> = (0..goals.len()).collect();
    let mut found: HashMap<usize, (usize, SchedChoice, KernelState)> = HashMap::new();
    let mut bounds: Vec<String> = Vec::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    let note = |b: String, bounds: &mut Vec<String>| {
        if !bounds.contains(&b) {
            bounds.push(b);
        }
    };
    match k.initial_states() {
        Ok(inits) => {
            for (c, s) in inits {
                if seen.insert(encode_state(&s)) {
                    nodes.push(Node { state: s, parent: None, choice: c });
                    queue.push_back(nodes.len() - 1);
                }
            }
        }
        Err(e) => note(e.to_string(), &mut bounds),
    }
    while let Some(n) = queue.pop_front() {
        if pending.is_empty() {
            break;
        }
        if seen.len() > state_cap {
            note(format!("state cap of {state_cap} states exceeded"), &mut bounds);
            break;
        }
        let ts = match k.successors(&nodes[n].state) {
            Ok(ts) => ts,
            Err(e) => {
                note(e.to_string(), &mut bounds);
                continue;
            }
        };
        for t in ts {
            pending.retain(|&g| {
                if covers(&goals[g].kind, &nodes[n].state, &t.choice, &t.visited, &t.state) {
                    found.insert(g, (n, t.choice.clone(), t.state.clone()));
                    false
                } else {
                    true
                }
            });
            if seen.insert(encode_state(&t.state)) {
                nodes.push(Node { state: t.state, parent: Some(n), choice: t.choice });
                queue.push_back(nodes.len() - 1);
            }
        }
    }
    let mut tests = Vec::new();
    let mut uncovered = Vec::new();
    for (g, goal) in goals.iter().enumerate() {
        match found.remove(&g) {
            Some((n, c, s)) => {
                let mut path = vec![(c, s)];
                let mut at = Some(n);
                while let Some(i) = at {
                    path.push((nodes[i].choice.clone(), nodes[i].state.clone()));
                    at = nodes[i].parent;
                }
                path.reverse();
                tests.push(test_case(d, &goal.id, &path));
            }
            None => {
                let dead = matches!(goal.kind, GoalKind::Statement { process, loc } if d.processes[process].dead.contains(&loc));
                let reason = if dead || bounds.is_empty() {
                    UncoveredReason::Unreachable
                } else {
                    UncoveredReason::Bound(bounds.join("; "))
                };
                uncovered.push(Uncovered { goal: goal.id.clone(), reason });
            }
        }
    }
    Generated { tests, uncovered }
}

fn test_case(d: &Design, goal: &str, path: &[(SchedChoice, KernelState)]) -> AbstractTestCase {
    AbstractTestCase {
        goal: goal.to_string(),
        stimulus: stimulus_of(d, path),
        expectations: expectations_of(d, path),
        schedule: path.iter().map(|(c, _)| choice_json(d, c)).collect(),
        choices: path.iter().map(|(c, _)| c.clone()).collect(),
    }
}

/// All inputs at time 0, then the inputs that change at each time step.
fn stimulus_of(d: &Design, path: &[(SchedChoice, KernelState)]) -> Vec<Stimulus> {
    let mut out = Vec::new();
    let mut prev: Option<&[Value]> = None;
    for (c, s) in path {
        let inputs = match c {
            SchedChoice::Init { inputs, .. } | SchedChoice::Time { inputs, .. } => inputs,
            _ => continue,
        };
        let assignments: BTreeMap<String, String> = d
            .inputs
            .iter()
            .enumerate()
            .filter(|(i, _)| prev.is_none_or(|p| p[*i] != inputs[*i]))
            .map(|(i, inp)| (inp.name.clone(), inp.ty.render(inputs[i])))
            .collect();
        if !assignments.is_empty() {
            out.push(Stimulus { time: s.time, assignments });
        }
        prev = Some(inputs);
    }
    out
}

/// Port signals sampled at the last state of each time instant.
fn expectations_of(d: &Design, path: &[(SchedChoice, KernelState)]) -> Vec<Expectation> {
    let mut last_at: BTreeMap<u32, &KernelState> = BTreeMap::new();
    for (_, s) in path {
        last_at.insert(s.time, s);
    }
    let mut ports: Vec<SigId> = (0..d.signals.len()).filter(|&i| d.signals[i].is_port()).collect();
    ports.sort_by(|a, b| d.signals[*a].name.cmp(&d.signals[*b].name));
    let mut out = Vec::new();
    for (t, s) in last_at {
        for &p in &ports {
            out.push(Expectation { time: t, signal: d.signals[p].name.clone(), value: d.signals[p].ty.render(s.sig_cur[p]) });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TestReplayError {
    #[error("step {0}: choice not enabled")]
    ChoiceNotEnabled(usize),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("the final step does not cover `{0}`")]
    NotCovered(String),
    #[error("stimulus differs from the one recorded")]
    Stimulus,
    #[error("expectations differ from the ones recorded")]
    Expectations,
    #[error("unknown goal `{0}`")]
    UnknownGoal(String),
    #[error("test has no schedule")]
    Empty,
}

/// Replays a test's schedule and checks that it covers its goal and
/// reproduces its stimulus and expectations.
pub fn replay_test(k: &Kernel, goals: &[CoverageGoal], tc: &AbstractTestCase) -> Result<(), TestReplayError> {
    let d = k.design;
    let goal = goals.iter().find(|g| g.id == tc.goal).ok_or_else(|| TestReplayError::UnknownGoal(tc.goal.clone()))?;
    let first = tc.choices.first().ok_or(TestReplayError::Empty)?;
    let (_, s0) = k.initial_states()?.into_iter().find(|(c, _)| c == first).ok_or(TestReplayError::ChoiceNotEnabled(0))?;
    let mut path = vec![(first.clone(), s0)];
    let mut last_cover = false;
    for (i, c) in tc.choices.iter().enumerate().skip(1) {
        let cur = &path.last().unwrap().1;
        let t = k.successors(cur)?.into_iter().find(|t| t.choice == *c).ok_or(TestReplayError::ChoiceNotEnabled(i))?;
        last_cover = covers(&goal.kind, cur, &t.choice, &t.visited, &t.state);
        path.push((t.choice, t.state));
    }
    if !last_cover {
        return Err(TestReplayError::NotCovered(goal.id.clone()));
    }
    if stimulus_of(d, &path) != tc.stimulus {
        return Err(TestReplayError::Stimulus);
    }
    if expectations_of(d, &path) != tc.expectations {
        return Err(TestReplayError::Expectations);
    }
    Ok(())
}

/// Whether some run of `component` (a single-instance design) under the
/// test's stimulus reproduces the test's expectations on the names the
/// component shares with `system`. Inputs not named by the stimulus stay
/// at their type's minimum.
pub fn reproducible_on(system: &Design, component: &Design, tc: &AbstractTestCase, k: &Kernel) -> bool {
    // expectation (time, component ref, rendered value)
    let mut expect: BTreeMap<u32, Vec<(Ref, String)>> = BTreeMap::new();
    for e in &tc.expectations {
        let Some(NameRef::Value(sys_ref)) = system.lookup(&e.signal) else { continue };
        let aliases = system.names.iter().filter(|(_, r)| **r == NameRef::Value(sys_ref)).map(|(n, _)| n);
        if let Some(r) = aliases.filter_map(|n| match component.lookup(n) {
            Some(NameRef::Value(r)) => Some(r),
            _ => None,
        })
        .next()
        {
            expect.entry(e.time).or_default().push((r, e.value.clone()));
        }
    }
    let end = tc.expectations.iter().map(|e| e.time).max().unwrap_or(0);
    // scripted input valuation at each time
    let mut script: BTreeMap<u32, Vec<Value>> = BTreeMap::new();
    let mut cur: Vec<Value> = component.inputs.iter().map(|i| i.ty.min()).collect();
    for st in &tc.stimulus {
        for (name, v) in &st.assignments {
            if let Some(i) = component.inputs.iter().position(|x| &x.name == name) {
                if let Some(v) = component.inputs[i].ty.parse_rendered(v) {
                    cur[i] = v;
                }
            }
        }
        script.insert(st.time, cur.clone());
    }
    let inputs_at = |t: u32| -> Vec<Value> {
        script
            .range(..=t)
            .next_back()
            .map(|(_, v)| v.clone())
            .unwrap_or_else(|| component.inputs.iter().map(|i| i.ty.min()).collect())
    };
    let matches = |s: &KernelState, t: u32| {
        expect.get(&t).is_none_or(|es| es.iter().all(|(r, v)| component.ty(*r).render(crate::scl::design::ValueSource::load(s, *r)) == *v))
    };
    let Ok(inits) = k.initial_states() else { return false };
    let mut seen = HashSet::new();
    let mut queue: VecDeque<KernelState> = VecDeque::new();
    for (c, s) in inits {
        if matches!(&c, SchedChoice::Init { inputs, .. } if *inputs == inputs_at(0)) && seen.insert(encode_state(&s)) {
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        if s.time == end && matches(&s, end) {
            return true;
        }
        let Ok(ts) = k.successors(&s) else { continue };
        if ts.is_empty() && s.time < end {
            // quiescent for good: later samples see this state
            if expect.range(s.time..=end).all(|(&t, _)| matches(&s, t)) {
                return true;
            }
        }
        for t in ts {
            let ok = match &t.choice {
                SchedChoice::Time { inputs, .. } => {
                    // leaving time s.time: s is its last state
                    *inputs == inputs_at(t.state.time)
                        && t.state.time <= end
                        && expect.range(s.time..t.state.time).all(|(&tm, _)| matches(&s, tm))
                }
                _ => true,
            };
            if ok && seen.insert(encode_state(&t.state)) {
                queue.push_back(t.state);
            }
        }
    }
    false
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelMap {
    pub channel: String,
    /// Rendered abstract value -> concrete value.
    pub values: BTreeMap<String, String>,
}

fn default_gap() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcretizationMap {
    /// Nanoseconds per abstract time unit.
    pub time_scale: u64,
    /// Abstract time units between consecutive tests in one script.
    #[serde(default = "default_gap")]
    pub test_gap: u32,
    /// Metadata for the target rig; not interpreted.
    #[serde(default)]
    pub header: BTreeMap<String, String>,
    pub channels: BTreeMap<String, ChannelMap>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConcretizeError {
    #[error("{}", unmapped_message(names, values))]
    Unmapped { names: BTreeSet<String>, values: BTreeSet<String> },
    #[error("concrete time overflows 64 bits")]
    TimeOverflow,
}

fn unmapped_message(names: &BTreeSet<String>, values: &BTreeSet<String>) -> String {
    let mut parts = Vec::new();
    if !names.is_empty() {
        parts.push(format!("no mapping for: {}", names.iter().cloned().collect::<Vec<_>>().join(", ")));
    }
    if !values.is_empty() {
        parts.push(format!("no value translation for: {}", values.iter().cloned().collect::<Vec<_>>().join(", ")));
    }
    parts.join("; ")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteScripts {
    /// `time_ns,channel,value` lines.
    pub stimulus: String,
    /// `time_ns,channel,expected` lines.
    pub expectations: String,
}

/// Translates tests into CSV scripts. Tests run back to back: each starts
/// `test_gap` units after the previous one's last stimulus or expectation.
/// Fails without output if any name or value is unmapped.
pub fn concretize(tests: &[AbstractTestCase], map: &ConcretizationMap) -> Result<ConcreteScripts, ConcretizeError> {
    let mut names = BTreeSet::new();
    let mut values = BTreeSet::new();
    let used = tests.iter().flat_map(|t| {
        t.stimulus
            .iter()
            .flat_map(|s| s.assignments.iter().map(|(n, v)| (n.as_str(), v.as_str())))
            .chain(t.expectations.iter().map(|e| (e.signal.as_str(), e.value.as_str())))
    });
    for (n, v) in used {
        match map.channels.get(n) {
            None => {
                names.insert(n.to_string());
            }
            Some(c) if !c.values.contains_key(v) => {
                values.insert(format!("{n}={v}"));
            }
            Some(_) => {}
        }
    }
    if !names.is_empty() || !values.is_empty() {
        return Err(ConcretizeError::Unmapped { names, values });
    }
    let ns = |offset: u64, t: u32| offset.checked_add(t as u64).and_then(|x| x.checked_mul(map.time_scale)).ok_or(ConcretizeError::TimeOverflow);
    let mut stimulus = String::new();
    let mut expectations = String::new();
    let mut offset = 0u64;
    for t in tests {
        for s in &t.stimulus {
            for (n, v) in &s.assignments {
                let c = &map.channels[n];
                stimulus.push_str(&format!("{},{},{}\n", ns(offset, s.time)?, c.channel, c.values[v]));
            }
        }
        for e in &t.expectations {
            let c = &map.channels[&e.signal];
            expectations.push_str(&format!("{},{},{}\n", ns(offset, e.time)?, c.channel, c.values[&e.value]));
        }
        let end = t.stimulus.iter().map(|s| s.time).chain(t.expectations.iter().map(|e| e.time)).max().unwrap_or(0);
        offset = offset.checked_add(end as u64 + map.test_gap as u64).ok_or(ConcretizeError::TimeOverflow)?;
    }
    Ok(ConcreteScripts { stimulus, expectations })
}

/// Names of `d` whose type is not fully covered by the map's value table.
pub fn map_gaps(d: &Design, map: &ConcretizationMap) -> Vec<String> {
    let mut out = Vec::new();
    let named = d.inputs.iter().map(|i| (&i.name, &i.ty)).chain(d.signals.iter().filter(|s| s.is_port()).map(|s| (&s.name, &s.ty)));
    for (name, ty) in named {
        match map.channels.get(name) {
            None => out.push(name.clone()),
            Some(c) => {
                for v in ty.values() {
                    if !c.values.contains_key(&ty.render(v)) {
                        out.push(format!("{name}={}", ty.render(v)));
                    }
                }
            }
        }
    }
    out
}
