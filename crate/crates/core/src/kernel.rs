//! The scheduler as a successor function over explicit states.
//!
//! Phase machine, evaluated in order:
//!
//! 1. some process is runnable: one successor per runnable process, which
//!    runs until it waits or terminates (signal writes are buffered);
//! 2. an update is due (a process ran, writes or delta notifications are
//!    pending, or a stub is busy): one delta step;
//! 3. something waits on time: a time step to the earliest wake-up,
//!    branching over environment inputs and stub letters;
//! 4. otherwise the state is terminal.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::integration::{Obligation, StepKind};
use crate::scl::design::*;
use crate::scl::types::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvPolicy {
    /// Every open input stays at its type's minimum.
    ClosedDefault,
    /// Open inputs take every value at time 0 and at every time step.
    MostGeneral,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KernelConfig {
    pub max_time: u32,
    pub max_delta: u32,
    /// Statements one process may execute in a single run before it is
    /// considered to livelock.
    pub step_limit: u32,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { max_time: 100, max_delta: 64, step_limit: 10_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Runnable,
    WaitingTime(u32),
    WaitingChange(Ref),
    WaitingEvent(EventId),
    Terminated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ProcState {
    pub status: Status,
    /// Next location to execute; `cfg.len()` is the exit.
    pub loc: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    TimeBoundary,
    DeltaBoundary,
    Terminal,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::TimeBoundary => "time",
            Phase::DeltaBoundary => "delta",
            Phase::Terminal => "terminal",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FaultKind {
    AssertionFailed,
    /// A value outside the target's type was assigned or written.
    OutOfRange,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Fault {
    pub process: ProcId,
    pub loc: u32,
    pub kind: FaultKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StubSlot {
    pub state: u32,
    pub obligation: Obligation,
    /// Absolute wake-up time for a `Timer` obligation.
    pub wake: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KernelState {
    pub time: u32,
    pub delta: u32,
    /// Kind of the last boundary crossed (time 0 counts as a time boundary).
    pub at_delta: bool,
    pub procs: Vec<ProcState>,
    pub sig_cur: Vec<Value>,
    pub sig_next: Vec<Option<Value>>,
    pub vars: Vec<Value>,
    pub inputs: Vec<Value>,
    /// A process ran since the last update.
    pub needs_update: bool,
    /// Sorted, deduplicated.
    pub pending_delta: Vec<EventId>,
    /// Sorted, deduplicated `(wake time, event)` pairs.
    pub pending_timed: Vec<(u32, EventId)>,
    pub stubs: Vec<StubSlot>,
    pub fault: Option<Fault>,
}

impl ValueSource for KernelState {
    fn load(&self, r: Ref) -> Value {
        match r {
            Ref::Signal(i) => self.sig_cur[i],
            Ref::Var(i) => self.vars[i],
            Ref::Input(i) => self.inputs[i],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SchedChoice {
    /// Choice of initial state: input valuation and stub letters.
    Init { inputs: Vec<Value>, stubs: Vec<Option<usize>> },
    Run(ProcId),
    Delta { stubs: Vec<Option<usize>> },
    Time { inputs: Vec<Value>, stubs: Vec<Option<usize>> },
    /// Repetition of a terminal state (LTL only).
    Stutter,
}

impl SchedChoice {
    pub fn kind(&self) -> &'static str {
        match self {
            SchedChoice::Init { .. } => "init",
            SchedChoice::Run(_) => "run",
            SchedChoice::Delta { .. } => "delta",
            SchedChoice::Time { .. } => "time",
            SchedChoice::Stutter => "stutter",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Transition {
    pub choice: SchedChoice,
    pub state: KernelState,
    /// Control locations executed, for `Run` choices.
    pub visited: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("delta overflow at time {time}: more than {max_delta} delta cycles")]
    DeltaOverflow { time: u32, max_delta: u32 },
    #[error("process {process} executed {limit} statements without suspending")]
    Livelock { process: String, limit: u32 },
    #[error("time bound: next event at {next} exceeds max_time {max_time}")]
    TimeBound { next: u32, max_time: u32 },
    #[error("stub for `{instance}` has no {kind} letter matching its inputs")]
    StubBlocked { instance: String, kind: StepKind },
}

/// Which horizon a kernel error counts as.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Bound {
    DeltaOverflow,
    TimeBound,
}

impl KernelError {
    pub fn bound(&self) -> Bound {
        match self {
            KernelError::DeltaOverflow { .. } | KernelError::Livelock { .. } => Bound::DeltaOverflow,
            KernelError::TimeBound { .. } | KernelError::StubBlocked { .. } => Bound::TimeBound,
        }
    }
}

/// Precomputed view of a design for fast successor generation.
pub struct Kernel<'d> {
    pub design: &'d Design,
    pub config: KernelConfig,
    pub env: EnvPolicy,
    /// Signal driven by a stub -> (binding, alphabet port).
    stub_driven: HashMap<SigId, (usize, usize)>,
}

impl<'d> Kernel<'d> {
    pub fn new(design: &'d Design, config: KernelConfig, env: EnvPolicy) -> Self {
        let mut stub_driven = HashMap::new();
        for (b, sb) in design.stubs.iter().enumerate() {
            for (j, r) in sb.ports.iter().enumerate() {
                if sb.is_out(j) {
                    if let Ref::Signal(s) = r {
                        stub_driven.insert(*s, (b, j));
                    }
                }
            }
        }
        Kernel { design, config, env, stub_driven }
    }

    fn input_valuations(&self, current: Option<&[Value]>) -> Vec<Vec<Value>> {
        match (self.env, current) {
            (EnvPolicy::ClosedDefault, Some(cur)) => vec![cur.to_vec()],
            (EnvPolicy::ClosedDefault, None) => vec![self.design.inputs.iter().map(|i| i.ty.min()).collect()],
            (EnvPolicy::MostGeneral, _) => all_valuations(self.design.inputs.iter().map(|i| &i.ty)),
        }
    }

    /// All processes runnable at location 0, declared initial values.
    pub fn base_state(&self, inputs: Vec<Value>) -> KernelState {
        let d = self.design;
        KernelState {
            time: 0,
            delta: 0,
            at_delta: false,
            procs: vec![ProcState { status: Status::Runnable, loc: 0 }; d.processes.len()],
            sig_cur: d.signals.iter().map(|s| s.init).collect(),
            sig_next: vec![None; d.signals.len()],
            vars: d.vars.iter().map(|v| v.init).collect(),
            inputs,
            needs_update: false,
            pending_delta: vec![],
            pending_timed: vec![],
            stubs: vec![StubSlot { state: 0, obligation: Obligation::Quiet, wake: None }; d.stubs.len()],
            fault: None,
        }
    }

    /// Initial states, each with the choice that selects it.
    pub fn initial_states(&self) -> Result<Vec<(SchedChoice, KernelState)>, KernelError> {
        let mut out = Vec::new();
        let mut blocked = None;
        for inputs in self.input_valuations(None) {
            let st = self.base_state(inputs.clone());
            match self.choose_stub_letters(&st, StepKind::Init) {
                Ok(combos) => {
                    for (letters, s2) in combos {
                        out.push((SchedChoice::Init { inputs: inputs.clone(), stubs: letters }, s2));
                    }
                }
                Err(e) => blocked = Some(e),
            }
        }
        match (out.is_empty(), blocked) {
            (true, Some(e)) => Err(e),
            _ => Ok(out),
        }
    }

    pub fn successors(&self, s: &KernelState) -> Result<Vec<Transition>, KernelError> {
        if s.fault.is_some() {
            return Ok(vec![]);
        }
        let runnable: Vec<ProcId> =
            (0..s.procs.len()).filter(|&p| s.procs[p].status == Status::Runnable).collect();
        if !runnable.is_empty() {
            return runnable
                .into_iter()
                .map(|p| {
                    let (state, visited) = self.run(s, p)?;
                    Ok(Transition { choice: SchedChoice::Run(p), state, visited })
                })
                .collect();
        }
        if needs_delta(s) {
            return self.delta_step(s);
        }
        if let Some(t) = next_wake(s) {
            return self.time_step(s, t);
        }
        Ok(vec![])
    }

    pub fn is_terminal(&self, s: &KernelState) -> bool {
        s.fault.is_some()
            || (!s.procs.iter().any(|p| p.status == Status::Runnable) && !needs_delta(s) && next_wake(s).is_none())
    }

    /// Terminal with at least one process that has not terminated.
    pub fn is_deadlock(&self, s: &KernelState) -> bool {
        s.fault.is_none() && self.is_terminal(s) && s.procs.iter().any(|p| p.status != Status::Terminated)
    }

    pub fn phase(&self, s: &KernelState) -> Phase {
        if self.is_terminal(s) {
            Phase::Terminal
        } else if s.at_delta {
            Phase::DeltaBoundary
        } else {
            Phase::TimeBoundary
        }
    }

    /// Values of all observables: signals, then inputs, then variables.
    pub fn observe(&self, s: &KernelState) -> Observation {
        Observation { values: observe_values(s), time: s.time, delta: s.delta, phase: self.phase(s) }
    }

    /// Runs process `p` to its next suspension point.
    pub fn run(&self, s: &KernelState, p: ProcId) -> Result<(KernelState, Vec<u32>), KernelError> {
        let d = self.design;
        let cfg = &d.processes[p].cfg;
        let exit = cfg.len() as u32;
        let mut st = s.clone();
        st.needs_update = true;
        let mut visited = Vec::new();
        let mut loc = st.procs[p].loc;
        let goto = |t: Target| match t {
            Target::Loc(l) => l,
            Target::Exit => exit,
        };
        let mut steps = 0u32;
        loop {
            if loc == exit {
                st.procs[p] = ProcState { status: Status::Terminated, loc };
                break;
            }
            steps += 1;
            if steps > self.config.step_limit {
                return Err(KernelError::Livelock { process: d.processes[p].name.clone(), limit: self.config.step_limit });
            }
            visited.push(loc);
            let node = &cfg[loc as usize];
            let fault = |st: &mut KernelState, kind| {
                st.fault = Some(Fault { process: p, loc, kind });
                st.procs[p].loc = loc;
            };
            match &node.kind {
                NodeKind::Entry { next } | NodeKind::Skip { next } => loc = goto(*next),
                NodeKind::Assign { var, value, next } => {
                    let v = value.eval(&st);
                    if !d.vars[*var].ty.contains(v) {
                        fault(&mut st, FaultKind::OutOfRange);
                        break;
                    }
                    st.vars[*var] = v;
                    loc = goto(*next);
                }
                NodeKind::Write { signal, value, next } => {
                    let v = value.eval(&st);
                    if !d.signals[*signal].ty.contains(v) {
                        fault(&mut st, FaultKind::OutOfRange);
                        break;
                    }
                    st.sig_next[*signal] = Some(v);
                    loc = goto(*next);
                }
                NodeKind::Branch { cond, then_to, else_to } => {
                    loc = goto(if cond.eval(&st) != 0 { *then_to } else { *else_to });
                }
                NodeKind::Wait { on, next } => {
                    let status = match on {
                        WaitOn::Time(n) => Status::WaitingTime(st.time.saturating_add(*n)),
                        WaitOn::Change(r) => Status::WaitingChange(*r),
                        WaitOn::Event(e) => Status::WaitingEvent(*e),
                    };
                    st.procs[p] = ProcState { status, loc: goto(*next) };
                    return Ok((st, visited));
                }
                NodeKind::Notify { event, when, next } => {
                    match when {
                        NotifyWhen::Immediate => {
                            for q in st.procs.iter_mut() {
                                if q.status == Status::WaitingEvent(*event) {
                                    q.status = Status::Runnable;
                                }
                            }
                        }
                        NotifyWhen::Delta => insert_sorted(&mut st.pending_delta, *event),
                        NotifyWhen::Time(n) => insert_sorted(&mut st.pending_timed, (st.time.saturating_add(*n), *event)),
                    }
                    loc = goto(*next);
                }
                NodeKind::Assert { cond, next } => {
                    if cond.eval(&st) == 0 {
                        fault(&mut st, FaultKind::AssertionFailed);
                        break;
                    }
                    loc = goto(*next);
                }
            }
        }
        Ok((st, visited))
    }

    /// Update phase without stubs: applies pending writes, delivers delta
    /// notifications, wakes change-waiters and increments the delta count.
    pub fn apply_update(&self, s: &KernelState) -> Result<KernelState, KernelError> {
        if s.delta >= self.config.max_delta {
            return Err(KernelError::DeltaOverflow { time: s.time, max_delta: self.config.max_delta });
        }
        let mut st = s.clone();
        st.delta += 1;
        st.at_delta = true;
        st.needs_update = false;
        for (i, nv) in st.sig_next.iter_mut().enumerate() {
            if let Some(v) = nv.take() {
                st.sig_cur[i] = v;
            }
        }
        let events = std::mem::take(&mut st.pending_delta);
        for q in st.procs.iter_mut() {
            if let Status::WaitingEvent(e) = q.status {
                if events.binary_search(&e).is_ok() {
                    q.status = Status::Runnable;
                }
            }
        }
        wake_changed(&mut st, &s.sig_cur, None);
        Ok(st)
    }

    /// Advances to time `t`, delivering due timed events and timer wake-ups.
    pub fn advance_time(&self, s: &KernelState, t: u32) -> Result<KernelState, KernelError> {
        if t > self.config.max_time {
            return Err(KernelError::TimeBound { next: t, max_time: self.config.max_time });
        }
        let mut st = s.clone();
        st.time = t;
        st.delta = 0;
        st.at_delta = false;
        let due: Vec<EventId> = st.pending_timed.iter().filter(|(w, _)| *w == t).map(|(_, e)| *e).collect();
        st.pending_timed.retain(|(w, _)| *w != t);
        for q in st.procs.iter_mut() {
            match q.status {
                Status::WaitingTime(w) if w == t => q.status = Status::Runnable,
                Status::WaitingEvent(e) if due.contains(&e) => q.status = Status::Runnable,
                _ => {}
            }
        }
        Ok(st)
    }

    /// Sets the open inputs, waking processes waiting on a changed one.
    pub fn change_inputs(&self, s: &KernelState, inputs: &[Value]) -> KernelState {
        let mut st = s.clone();
        st.inputs = inputs.to_vec();
        wake_changed(&mut st, &s.sig_cur, Some(&s.inputs));
        st
    }

    /// Every quiescent state reachable by running the runnable processes
    /// in all orders. Duplicates removed, first-discovery order.
    pub fn settle(&self, s: &KernelState) -> Result<Vec<KernelState>, KernelError> {
        let mut out = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![s.clone()];
        while let Some(cur) = stack.pop() {
            if !seen.insert(encode_state(&cur)) {
                continue;
            }
            let runnable: Vec<ProcId> = (0..cur.procs.len()).filter(|&p| cur.procs[p].status == Status::Runnable).collect();
            if runnable.is_empty() || cur.fault.is_some() {
                out.push(cur);
                continue;
            }
            for &p in runnable.iter().rev() {
                stack.push(self.run(&cur, p)?.0);
            }
        }
        Ok(out)
    }

    /// What a quiescent state still has scheduled.
    pub fn obligation(&self, s: &KernelState) -> Obligation {
        if needs_delta(s) {
            Obligation::Busy
        } else {
            match next_wake(s) {
                Some(t) => Obligation::Timer(t - s.time),
                None => Obligation::Quiet,
            }
        }
    }

    /// Earliest pending wake-up time, if any.
    pub fn next_wake(&self, s: &KernelState) -> Option<u32> {
        next_wake(s)
    }

    fn delta_step(&self, s: &KernelState) -> Result<Vec<Transition>, KernelError> {
        let st = self.apply_update(s)?;
        let combos = self.choose_stub_letters(&st, StepKind::Delta)?;
        Ok(combos
            .into_iter()
            .map(|(letters, mut s2)| {
                wake_changed(&mut s2, &st.sig_cur, None);
                Transition { choice: SchedChoice::Delta { stubs: letters }, state: s2, visited: vec![] }
            })
            .collect())
    }

    fn time_step(&self, s: &KernelState, t: u32) -> Result<Vec<Transition>, KernelError> {
        let st = self.advance_time(s, t)?;
        let mut out = Vec::new();
        let mut blocked = None;
        for inputs in self.input_valuations(Some(&s.inputs)) {
            let s1 = self.change_inputs(&st, &inputs);
            match self.choose_stub_letters(&s1, StepKind::Time) {
                Ok(combos) => {
                    for (letters, mut s2) in combos {
                        wake_changed(&mut s2, &s1.sig_cur, None);
                        out.push(Transition {
                            choice: SchedChoice::Time { inputs: inputs.clone(), stubs: letters },
                            state: s2,
                            visited: vec![],
                        });
                    }
                }
                Err(e) => blocked = Some(e),
            }
        }
        match (out.is_empty(), blocked) {
            (true, Some(e)) => Err(e),
            _ => Ok(out),
        }
    }

    /// All joint stub letter choices at a boundary of the given kind. Each
    /// result has the stubs' out-ports set and slots advanced. A stub that
    /// is not touched by the boundary (not busy, timer not due, in-ports
    /// unchanged since its last letter) stays put, shown as `None`.
    fn choose_stub_letters(
        &self,
        st: &KernelState,
        kind: StepKind,
    ) -> Result<Vec<(Vec<Option<usize>>, KernelState)>, KernelError> {
        let d = self.design;
        if d.stubs.is_empty() {
            return Ok(vec![(vec![], st.clone())]);
        }
        let stub_kind = |b: usize| match kind {
            StepKind::Time if st.stubs[b].wake == Some(st.time) => StepKind::Timeout,
            k => k,
        };
        // a stub must move on init, when busy, or when its timer is due
        let forced = |b: usize| {
            let slot = &st.stubs[b];
            kind == StepKind::Init || slot.obligation == Obligation::Busy || stub_kind(b) == StepKind::Timeout
        };
        // in-port values carried by the stub's last letter
        let last_letter = |b: usize| {
            let sb = &d.stubs[b];
            sb.stub.states[st.stubs[b].state as usize].last().map(|&li| &sb.stub.letters[li])
        };
        // candidates per stub: Some((letter, target state)) or None to stay
        let mut cands: Vec<Vec<Option<(usize, usize)>>> = Vec::with_capacity(d.stubs.len());
        for (b, sb) in d.stubs.iter().enumerate() {
            let mut c: Vec<Option<(usize, usize)>> = sb
                .stub
                .outgoing(st.stubs[b].state as usize)
                .filter(|t| {
                    let l = &sb.stub.letters[t.letter];
                    // in-ports not driven by stubs can be checked right away
                    l.kind == stub_kind(b)
                        && sb.ports.iter().enumerate().all(|(j, r)| {
                            sb.is_out(j) || self.stub_driver(*r).is_some() || st.load(*r) == l.values[j]
                        })
                })
                .map(|t| Some((t.letter, t.to)))
                .collect();
            if !forced(b) {
                c.push(None);
            }
            if c.is_empty() {
                return Err(KernelError::StubBlocked { instance: d.instances[sb.instance].name.clone(), kind: stub_kind(b) });
            }
            cands.push(c);
        }
        let mut out = Vec::new();
        let mut idx = vec![0usize; cands.len()];
        'outer: loop {
            let chosen: Vec<Option<(usize, usize)>> = idx.iter().zip(&cands).map(|(&i, c)| c[i]).collect();
            let mut s2 = st.clone();
            for (b, sb) in d.stubs.iter().enumerate() {
                if let Some((li, _)) = chosen[b] {
                    let l = &sb.stub.letters[li];
                    for (j, r) in sb.ports.iter().enumerate() {
                        if sb.is_out(j) {
                            if let Ref::Signal(sig) = r {
                                s2.sig_cur[*sig] = l.values[j];
                            }
                        }
                    }
                }
            }
            let consistent = d.stubs.iter().enumerate().all(|(b, sb)| {
                let ins = |l: &crate::integration::Letter| {
                    sb.ports.iter().enumerate().all(|(j, r)| sb.is_out(j) || s2.load(*r) == l.values[j])
                };
                match chosen[b] {
                    // moving without being forced needs an in-port change
                    Some((li, _)) => ins(&sb.stub.letters[li]) && (forced(b) || !last_letter(b).is_some_and(&ins)),
                    None => last_letter(b).is_some_and(ins),
                }
            });
            if consistent {
                for (b, sb) in d.stubs.iter().enumerate() {
                    if let Some((li, to)) = chosen[b] {
                        let ob = sb.stub.letters[li].obligation;
                        s2.stubs[b] = StubSlot {
                            state: to as u32,
                            obligation: ob,
                            wake: match ob {
                                // a stub timer beyond the horizon never fires
                                Obligation::Timer(dt) => {
                                    Some(st.time.saturating_add(dt)).filter(|w| *w <= self.config.max_time)
                                }
                                _ => None,
                            },
                        };
                    }
                }
                out.push((chosen.iter().map(|c| c.map(|c| c.0)).collect(), s2));
            }
            // odometer
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < cands[k].len() {
                    continue 'outer;
                }
                idx[k] = 0;
            }
            break;
        }
        if out.is_empty() {
            let sb = &d.stubs[0];
            return Err(KernelError::StubBlocked { instance: d.instances[sb.instance].name.clone(), kind: stub_kind(0) });
        }
        Ok(out)
    }

    fn stub_driver(&self, r: Ref) -> Option<(usize, usize)> {
        match r {
            Ref::Signal(s) => self.stub_driven.get(&s).copied(),
            _ => None,
        }
    }

    /// Canonical byte encoding; see `docs/state-serialization.md`.
    pub fn encode(&self, s: &KernelState) -> Vec<u8> {
        encode_state(s)
    }

    pub fn decode(&self, bytes: &[u8]) -> Option<KernelState> {
        decode_state(self.design, bytes)
    }
}

/// Projection of a state onto observable values, time and phase.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Observation {
    pub values: Vec<Value>,
    pub time: u32,
    pub delta: u32,
    pub phase: Phase,
}

pub fn observe_values(s: &KernelState) -> Vec<Value> {
    let mut v = Vec::with_capacity(s.sig_cur.len() + s.inputs.len() + s.vars.len());
    v.extend_from_slice(&s.sig_cur);
    v.extend_from_slice(&s.inputs);
    v.extend_from_slice(&s.vars);
    v
}

fn needs_delta(s: &KernelState) -> bool {
    s.needs_update
        || s.sig_next.iter().any(Option::is_some)
        || !s.pending_delta.is_empty()
        || s.stubs.iter().any(|b| b.obligation == Obligation::Busy)
}

fn next_wake(s: &KernelState) -> Option<u32> {
    let timed = s.pending_timed.first().map(|(t, _)| *t);
    let procs = s.procs.iter().filter_map(|p| match p.status {
        Status::WaitingTime(w) => Some(w),
        _ => None,
    });
    let stubs = s.stubs.iter().filter_map(|b| b.wake);
    timed.into_iter().chain(procs).chain(stubs).min()
}

fn wake_changed(s: &mut KernelState, old_sig: &[Value], old_inputs: Option<&[Value]>) {
    for i in 0..s.procs.len() {
        if let Status::WaitingChange(r) = s.procs[i].status {
            let changed = match r {
                Ref::Signal(x) => s.sig_cur[x] != old_sig[x],
                Ref::Input(x) => old_inputs.is_some_and(|o| o[x] != s.inputs[x]),
                Ref::Var(_) => false,
            };
            if changed {
                s.procs[i].status = Status::Runnable;
            }
        }
    }
}

fn insert_sorted<T: Ord>(v: &mut Vec<T>, x: T) {
    if let Err(i) = v.binary_search(&x) {
        v.insert(i, x);
    }
}

/// Cartesian product of type value sets, lexicographic.
pub fn all_valuations<'a>(types: impl Iterator<Item = &'a crate::scl::types::ScalarType>) -> Vec<Vec<Value>> {
    let mut out = vec![vec![]];
    for t in types {
        let mut next = Vec::new();
        for prefix in &out {
            for v in t.values() {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

// ---- canonical serialization ----

fn put_u(out: &mut Vec<u8>, mut x: u64) {
    loop {
        let b = (x & 0x7f) as u8;
        x >>= 7;
        if x == 0 {
            out.push(b);
            return;
        }
        out.push(b | 0x80);
    }
}

fn put_i(out: &mut Vec<u8>, x: i64) {
    put_u(out, ((x << 1) ^ (x >> 63)) as u64);
}

fn put_ref(out: &mut Vec<u8>, r: Ref) {
    let (tag, i) = match r {
        Ref::Signal(i) => (0, i),
        Ref::Var(i) => (1, i),
        Ref::Input(i) => (2, i),
    };
    out.push(tag);
    put_u(out, i as u64);
}

pub fn encode_state(s: &KernelState) -> Vec<u8> {
    let mut o = Vec::with_capacity(16 + 2 * (s.procs.len() + s.sig_cur.len() * 2 + s.vars.len()));
    put_u(&mut o, s.time as u64);
    put_u(&mut o, s.delta as u64);
    o.push(s.at_delta as u8);
    for p in &s.procs {
        match p.status {
            Status::Runnable => o.push(0),
            Status::WaitingTime(t) => {
                o.push(1);
                put_u(&mut o, t as u64);
            }
            Status::WaitingChange(r) => {
                o.push(2);
                put_ref(&mut o, r);
            }
            Status::WaitingEvent(e) => {
                o.push(3);
                put_u(&mut o, e as u64);
            }
            Status::Terminated => o.push(4),
        }
        put_u(&mut o, p.loc as u64);
    }
    for v in &s.sig_cur {
        put_i(&mut o, *v);
    }
    for v in &s.sig_next {
        match v {
            None => o.push(0),
            Some(x) => {
                o.push(1);
                put_i(&mut o, *x);
            }
        }
    }
    for v in &s.vars {
        put_i(&mut o, *v);
    }
    for v in &s.inputs {
        put_i(&mut o, *v);
    }
    o.push(s.needs_update as u8);
    put_u(&mut o, s.pending_delta.len() as u64);
    for e in &s.pending_delta {
        put_u(&mut o, *e as u64);
    }
    put_u(&mut o, s.pending_timed.len() as u64);
    for (t, e) in &s.pending_timed {
        put_u(&mut o, *t as u64);
        put_u(&mut o, *e as u64);
    }
    for b in &s.stubs {
        put_u(&mut o, b.state as u64);
        match b.obligation {
            Obligation::Busy => o.push(0),
            Obligation::Timer(dt) => {
                o.push(1);
                put_u(&mut o, dt as u64);
            }
            Obligation::Quiet => o.push(2),
        }
        match b.wake {
            None => o.push(0),
            Some(w) => {
                o.push(1);
                put_u(&mut o, w as u64);
            }
        }
    }
    match s.fault {
        None => o.push(0),
        Some(f) => {
            o.push(1);
            put_u(&mut o, f.process as u64);
            put_u(&mut o, f.loc as u64);
            o.push(match f.kind {
                FaultKind::AssertionFailed => 0,
                FaultKind::OutOfRange => 1,
            });
        }
    }
    o
}

struct Reader<'a> {
    b: &'a [u8],
    i: usize,
}

impl Reader<'_> {
    fn byte(&mut self) -> Option<u8> {
        let x = *self.b.get(self.i)?;
        self.i += 1;
        Some(x)
    }
    fn u(&mut self) -> Option<u64> {
        let mut x = 0u64;
        let mut shift = 0;
        loop {
            let b = self.byte()?;
            x |= ((b & 0x7f) as u64) << shift;
            if b & 0x80 == 0 {
                return Some(x);
            }
            shift += 7;
            if shift > 63 {
                return None;
            }
        }
    }
    fn u32(&mut self) -> Option<u32> {
        u32::try_from(self.u()?).ok()
    }
    fn i(&mut self) -> Option<i64> {
        let z = self.u()?;
        Some(((z >> 1) as i64) ^ -((z & 1) as i64))
    }
    fn r(&mut self) -> Option<Ref> {
        let tag = self.byte()?;
        let i = self.u()? as usize;
        Some(match tag {
            0 => Ref::Signal(i),
            1 => Ref::Var(i),
            2 => Ref::Input(i),
            _ => return None,
        })
    }
}

pub fn decode_state(d: &Design, bytes: &[u8]) -> Option<KernelState> {
    let mut r = Reader { b: bytes, i: 0 };
    let time = r.u32()?;
    let delta = r.u32()?;
    let at_delta = r.byte()? != 0;
    let mut procs = Vec::with_capacity(d.processes.len());
    for _ in 0..d.processes.len() {
        let status = match r.byte()? {
            0 => Status::Runnable,
            1 => Status::WaitingTime(r.u32()?),
            2 => Status::WaitingChange(r.r()?),
            3 => Status::WaitingEvent(r.u()? as usize),
            4 => Status::Terminated,
            _ => return None,
        };
        procs.push(ProcState { status, loc: r.u32()? });
    }
    let sig_cur = (0..d.signals.len()).map(|_| r.i()).collect::<Option<Vec<_>>>()?;
    let mut sig_next = Vec::with_capacity(d.signals.len());
    for _ in 0..d.signals.len() {
        sig_next.push(match r.byte()? {
            0 => None,
            1 => Some(r.i()?),
            _ => return None,
        });
    }
    let vars = (0..d.vars.len()).map(|_| r.i()).collect::<Option<Vec<_>>>()?;
    let inputs = (0..d.inputs.len()).map(|_| r.i()).collect::<Option<Vec<_>>>()?;
    let needs_update = r.byte()? != 0;
    let nd = r.u()? as usize;
    let pending_delta = (0..nd).map(|_| r.u().map(|x| x as usize)).collect::<Option<Vec<_>>>()?;
    let nt = r.u()? as usize;
    let mut pending_timed = Vec::with_capacity(nt);
    for _ in 0..nt {
        pending_timed.push((r.u32()?, r.u()? as usize));
    }
    let mut stubs = Vec::with_capacity(d.stubs.len());
    for _ in 0..d.stubs.len() {
        let state = r.u32()?;
        let obligation = match r.byte()? {
            0 => Obligation::Busy,
            1 => Obligation::Timer(r.u32()?),
            2 => Obligation::Quiet,
            _ => return None,
        };
        let wake = match r.byte()? {
            0 => None,
            1 => Some(r.u32()?),
            _ => return None,
        };
        stubs.push(StubSlot { state, obligation, wake });
    }
    let fault = match r.byte()? {
        0 => None,
        1 => Some(Fault {
            process: r.u()? as usize,
            loc: r.u32()?,
            kind: match r.byte()? {
                0 => FaultKind::AssertionFailed,
                1 => FaultKind::OutOfRange,
                _ => return None,
            },
        }),
        _ => return None,
    };
    if r.i != bytes.len() {
        return None;
    }
    Some(KernelState {
        time,
        delta,
        at_delta,
        procs,
        sig_cur,
        sig_next,
        vars,
        inputs,
        needs_update,
        pending_delta,
        pending_timed,
        stubs,
        fault,
    })
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn unhex(s: &str) -> Option<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return None;
    }
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok()).collect()
}
