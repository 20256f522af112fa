//! Promela emission.
//!
//! The emitted model mirrors the kernel's phase machine. Every process run
//! and every scheduler phase is one `d_step`, so the global states SPIN sees
//! are the kernel's states (plus a few pure control steps that change no
//! design value). Layout, in order:
//!
//! * header comment with toolchain version and source hash;
//! * horizon constants;
//! * globals: time, delta, baton, horizon flag, then per signal
//!   `<sig>_cur`, `<sig>_next`, `<sig>_wr`, per variable and open input one
//!   variable, per event `<ev>_dn` (delta tier) and `<ev>_tn[]` (timed
//!   tier, only for events with timed notifications), per process `_st`
//!   (0 runnable, 1 waiting on time, 2 on a change, 3 on an event, 4
//!   terminated), `_loc`, `_on` and `_wk`;
//! * scheduler macros and inlines;
//! * one proctype per process and the scheduler proctype;
//! * `ltl` blocks.
//!
//! Names follow [`mangle`]. Properties: an invariant `p` becomes
//! `ltl inv_p { [] (e) }`. An LTL property `p` becomes
//! `ltl ltl_p { X ((<> (sched__hz != 0)) || (f)) }`: the `X` skips the
//! declaration state before the initial input choice, and runs cut off by
//! a bound satisfy the claim, as the internal checker discards them.

mod mangle;
mod spin;

pub use mangle::{demangle, escape_component, mangle, unescape_component, Names};
pub use spin::{spin_crosscheck, spin_from_env, CrosscheckError, CrosscheckReport, SpinOutcome, SPIN_ENV};

use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kernel::{EnvPolicy, KernelConfig};
use crate::props::LtlFormula;
use crate::scl::ast::BinOp;
use crate::scl::design::*;
use crate::scl::pretty_print;
use crate::scl::types::ScalarType;

/// Slots per event for pending timed notifications.
pub const TIMED_SLOTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromelaError {
    #[error("`{name}` has type {ty}, wider than Promela's 32-bit int")]
    Width { name: String, ty: String },
    #[error("max_time {0} does not fit the emitted short time counter")]
    Horizon(u32),
    #[error("design has {0} processes; at most 254 are supported")]
    TooManyProcesses(usize),
    #[error("design contains interface stubs; Promela emission needs the concrete components")]
    Stubbed,
    #[error("no property named `{0}`")]
    UnknownProperty(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmitOptions {
    pub kernel: KernelConfig,
    pub env: EnvPolicy,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions { kernel: KernelConfig::default(), env: EnvPolicy::MostGeneral }
    }
}

/// Smallest Promela type holding every value of `ty`.
pub fn promela_type(name: &str, ty: &ScalarType) -> Result<&'static str, PromelaError> {
    let (lo, hi) = (ty.min(), ty.max());
    Ok(match ty {
        ScalarType::Bool => "bool",
        _ if lo >= 0 && hi <= 255 => "byte",
        _ if lo >= i16::MIN as i64 && hi <= i16::MAX as i64 => "short",
        _ if lo >= i32::MIN as i64 && hi <= i32::MAX as i64 => "int",
        _ => return Err(PromelaError::Width { name: name.to_string(), ty: ty.to_string() }),
    })
}

fn literal(ty: &ScalarType, v: i64) -> String {
    match ty {
        ScalarType::Bool => if v != 0 { "true" } else { "false" }.to_string(),
        _ => v.to_string(),
    }
}

/// Hex SHA-256 of the pretty-printed source.
pub fn source_hash(d: &Design) -> String {
    let h = Sha256::digest(pretty_print(&d.source).as_bytes());
    h.iter().map(|b| format!("{b:02x}")).collect()
}

struct ProcNames {
    st: String,
    loc: String,
    on: String,
    wk: String,
    proctype: String,
    /// Distinct change and event targets; `_on` indexes this list.
    ons: Vec<WaitOn>,
}

struct Emitter<'d> {
    d: &'d Design,
    opts: &'d EmitOptions,
    sig_cur: Vec<String>,
    sig_next: Vec<String>,
    sig_wr: Vec<String>,
    vars: Vec<String>,
    inputs: Vec<String>,
    ev_dn: Vec<String>,
    ev_tn: Vec<Option<String>>,
    ev_fire: Vec<String>,
    procs: Vec<ProcNames>,
    /// Signals some process waits on, with their change-flag index.
    watched: Vec<SigId>,
    props: Vec<String>,
}

const SCHED_NAMES: [&str; 16] = [
    "MAX_TIME",
    "MAX_DELTA",
    "STEP_LIMIT",
    "NO_WAKE",
    "sched__time",
    "sched__delta",
    "sched__baton",
    "sched__hz",
    "sched__ran",
    "sched__tmp",
    "sched__nw",
    "sched__steps",
    "sched__chg",
    "sched__oin",
    "sched__main",
    "sched__update",
];

const SCHED_MACROS: [&str; 6] =
    ["sched__runnable", "sched__delta_due", "sched__idle", "sched__due", "sched__pending", "sched__time_step"];

impl<'d> Emitter<'d> {
    fn new(d: &'d Design, opts: &'d EmitOptions, props: &[&Property]) -> Result<Self, PromelaError> {
        if !d.stubs.is_empty() {
            return Err(PromelaError::Stubbed);
        }
        if opts.kernel.max_time >= i16::MAX as u32 {
            return Err(PromelaError::Horizon(opts.kernel.max_time));
        }
        if d.processes.len() > 254 {
            return Err(PromelaError::TooManyProcesses(d.processes.len()));
        }
        for s in &d.signals {
            promela_type(&s.name, &s.ty)?;
        }
        for v in &d.vars {
            promela_type(&v.name, &v.ty)?;
        }
        for i in &d.inputs {
            promela_type(&i.name, &i.ty)?;
        }
        let mut n = Names::default();
        for s in SCHED_NAMES.iter().chain(SCHED_MACROS.iter()) {
            n.claim(s.to_string());
        }
        let mut e = Emitter {
            d,
            opts,
            sig_cur: vec![],
            sig_next: vec![],
            sig_wr: vec![],
            vars: vec![],
            inputs: vec![],
            ev_dn: vec![],
            ev_tn: vec![],
            ev_fire: vec![],
            procs: vec![],
            watched: vec![],
            props: vec![],
        };
        for s in &d.signals {
            let m = mangle(&s.name);
            e.sig_cur.push(n.claim(format!("{m}_cur")));
            e.sig_next.push(n.claim(format!("{m}_next")));
            e.sig_wr.push(n.claim(format!("{m}_wr")));
        }
        for v in &d.vars {
            e.vars.push(n.claim(mangle(&v.name)));
        }
        for i in &d.inputs {
            e.inputs.push(n.claim(mangle(&i.name)));
        }
        let timed: Vec<bool> = (0..d.events.len())
            .map(|ev| {
                d.processes.iter().any(|p| {
                    p.cfg.iter().any(|nd| matches!(nd.kind, NodeKind::Notify { event, when: NotifyWhen::Time(_), .. } if event == ev))
                })
            })
            .collect();
        for (i, ev) in d.events.iter().enumerate() {
            let m = mangle(&ev.name);
            e.ev_dn.push(n.claim(format!("{m}_dn")));
            e.ev_tn.push(timed[i].then(|| n.claim(format!("{m}_tn"))));
            e.ev_fire.push(n.claim(format!("{m}_fire")));
        }
        for p in &d.processes {
            let m = mangle(&p.name);
            let mut ons = Vec::new();
            for nd in &p.cfg {
                if let NodeKind::Wait { on, .. } = nd.kind {
                    if !matches!(on, WaitOn::Time(_)) && !ons.contains(&on) {
                        ons.push(on);
                    }
                    if let WaitOn::Change(Ref::Signal(s)) = on {
                        if !e.watched.contains(&s) {
                            e.watched.push(s);
                        }
                    }
                }
            }
            e.procs.push(ProcNames {
                st: n.claim(format!("{m}_st")),
                loc: n.claim(format!("{m}_loc")),
                on: n.claim(format!("{m}_on")),
                wk: n.claim(format!("{m}_wk")),
                proctype: n.claim(m),
                ons,
            });
        }
        e.watched.sort_unstable();
        for p in props {
            let m = mangle(&p.name);
            e.props.push(n.claim(match p.kind {
                PropertyKind::Invariant(_) => format!("inv_{m}"),
                PropertyKind::Ltl(_) => format!("ltl_{m}"),
            }));
        }
        Ok(e)
    }

    fn load(&self, r: Ref) -> &str {
        match r {
            Ref::Signal(i) => &self.sig_cur[i],
            Ref::Var(i) => &self.vars[i],
            Ref::Input(i) => &self.inputs[i],
        }
    }

    fn expr(&self, e: &RExpr) -> String {
        match e {
            RExpr::Const(v) => v.to_string(),
            RExpr::Load(r) => self.load(*r).to_string(),
            RExpr::Not(a) => format!("!{}", self.expr(a)),
            RExpr::Neg(a) => format!("(-{})", self.expr(a)),
            RExpr::Bin(op, l, r) => format!("({} {} {})", self.expr(l), binop(*op), self.expr(r)),
        }
    }

    fn ltl(&self, f: &LtlFormula, prop: &crate::props::LtlProperty) -> String {
        use LtlFormula as L;
        match f {
            L::True => "true".into(),
            L::False => "false".into(),
            L::Atom(i) => {
                let a = &prop.atoms[*i];
                format!("({} {} {})", self.load(a.target), a.op.symbol(), a.value)
            }
            L::Not(a) => format!("!{}", self.ltl(a, prop)),
            L::And(a, b) => format!("({} && {})", self.ltl(a, prop), self.ltl(b, prop)),
            L::Or(a, b) => format!("({} || {})", self.ltl(a, prop), self.ltl(b, prop)),
            L::Next(a) => format!("(X {})", self.ltl(a, prop)),
            L::Finally(a) => format!("(<> {})", self.ltl(a, prop)),
            L::Globally(a) => format!("([] {})", self.ltl(a, prop)),
            L::Until(a, b) => format!("({} U {})", self.ltl(a, prop), self.ltl(b, prop)),
            L::Release(a, b) => format!("({} V {})", self.ltl(a, prop), self.ltl(b, prop)),
        }
    }

    fn disjunction(parts: Vec<String>) -> String {
        if parts.is_empty() {
            "false".into()
        } else {
            format!("({})", parts.join(" || "))
        }
    }

    fn emit(&self, props: &[&Property]) -> String {
        let d = self.d;
        let k = &self.opts.kernel;
        let mut o = String::new();
        let w = &mut o;
        let _ = writeln!(w, "/* Generated by scver {} */", crate::VERSION);
        let _ = writeln!(w, "/* source sha256 {} */", source_hash(d));
        let env = match self.opts.env {
            EnvPolicy::MostGeneral => "most general",
            EnvPolicy::ClosedDefault => "closed default",
        };
        let _ = writeln!(w, "/* environment: {env} */");
        let _ = writeln!(w);
        let _ = writeln!(w, "#define MAX_TIME {}", k.max_time);
        let _ = writeln!(w, "#define MAX_DELTA {}", k.max_delta);
        let _ = writeln!(w, "#define STEP_LIMIT {}", k.step_limit);
        let _ = writeln!(w, "#define NO_WAKE (-1)");
        let _ = writeln!(w);
        let _ = writeln!(w, "/* scheduler */");
        let _ = writeln!(w, "short sched__time = 0;");
        let _ = writeln!(w, "byte sched__delta = 0;");
        let _ = writeln!(w, "byte sched__baton = 255;");
        let _ = writeln!(w, "byte sched__hz = 0;");
        let _ = writeln!(w, "bool sched__ran = false;");
        let _ = writeln!(w, "hidden int sched__tmp;");
        let _ = writeln!(w, "hidden short sched__nw;");
        let _ = writeln!(w, "hidden int sched__steps;");
        if !self.watched.is_empty() {
            let _ = writeln!(w, "hidden bool sched__chg[{}];", self.watched.len());
        }
        if !d.inputs.is_empty() {
            let _ = writeln!(w, "hidden int sched__oin[{}];", d.inputs.len());
        }
        if !d.signals.is_empty() {
            let _ = writeln!(w);
            let _ = writeln!(w, "/* signals */");
        }
        for (i, s) in d.signals.iter().enumerate() {
            let t = promela_type(&s.name, &s.ty).unwrap();
            let init = literal(&s.ty, s.init);
            let _ = writeln!(
                w,
                "{t} {} = {init}; {t} {} = {init}; bool {} = false;",
                self.sig_cur[i], self.sig_next[i], self.sig_wr[i]
            );
        }
        if !d.vars.is_empty() {
            let _ = writeln!(w);
            let _ = writeln!(w, "/* variables */");
        }
        for (i, v) in d.vars.iter().enumerate() {
            let t = promela_type(&v.name, &v.ty).unwrap();
            let _ = writeln!(w, "{t} {} = {};", self.vars[i], literal(&v.ty, v.init));
        }
        if !d.inputs.is_empty() {
            let _ = writeln!(w);
            let _ = writeln!(w, "/* open inputs */");
        }
        for (i, inp) in d.inputs.iter().enumerate() {
            let t = promela_type(&inp.name, &inp.ty).unwrap();
            let _ = writeln!(w, "{t} {} = {};", self.inputs[i], literal(&inp.ty, inp.ty.min()));
        }
        if !d.events.is_empty() {
            let _ = writeln!(w);
            let _ = writeln!(w, "/* events */");
        }
        for i in 0..d.events.len() {
            let _ = write!(w, "bool {} = false;", self.ev_dn[i]);
            if let Some(tn) = &self.ev_tn[i] {
                let _ = write!(w, " short {tn}[{TIMED_SLOTS}] = NO_WAKE;");
            }
            let _ = writeln!(w);
        }
        let _ = writeln!(w);
        let _ = writeln!(w, "/* processes: _st 0 runnable, 1 time, 2 change, 3 event, 4 terminated */");
        for p in &self.procs {
            let _ = writeln!(w, "byte {} = 0; short {} = 0; byte {} = 0; short {} = 0;", p.st, p.loc, p.on, p.wk);
        }
        let _ = writeln!(w);
        self.emit_macros(w);
        for ev in 0..d.events.len() {
            self.emit_fire(w, ev);
        }
        self.emit_update(w);
        self.emit_time_step(w);
        for pid in 0..d.processes.len() {
            self.emit_process(w, pid);
        }
        self.emit_scheduler(w);
        for (p, name) in props.iter().zip(&self.props) {
            let _ = writeln!(w);
            let _ = writeln!(w, "/* {}: {} */", p.name, p.text.trim());
            match &p.kind {
                PropertyKind::Invariant(e) => {
                    let _ = writeln!(w, "ltl {name} {{ [] ({}) }}", self.expr(e));
                }
                PropertyKind::Ltl(l) => {
                    let _ = writeln!(w, "ltl {name} {{ X ((<> (sched__hz != 0)) || ({})) }}", self.ltl(&l.formula, l));
                }
            }
        }
        o
    }

    fn emit_macros(&self, w: &mut String) {
        let runnable = Self::disjunction(self.procs.iter().map(|p| format!("{} == 0", p.st)).collect());
        let mut due_parts = vec![];
        let mut pending_parts = vec![];
        for (pid, p) in self.procs.iter().enumerate() {
            let waits_time = self.d.processes[pid].cfg.iter().any(|n| matches!(n.kind, NodeKind::Wait { on: WaitOn::Time(_), .. }));
            if waits_time {
                due_parts.push(format!("({} == 1 && {} <= MAX_TIME)", p.st, p.wk));
                pending_parts.push(format!("{} == 1", p.st));
            }
        }
        for tn in self.ev_tn.iter().flatten() {
            for s in 0..TIMED_SLOTS {
                due_parts.push(format!("({tn}[{s}] != NO_WAKE && {tn}[{s}] <= MAX_TIME)"));
                pending_parts.push(format!("{tn}[{s}] != NO_WAKE"));
            }
        }
        let mut delta_parts = vec!["sched__ran".to_string()];
        delta_parts.extend(self.sig_wr.iter().cloned());
        delta_parts.extend(self.ev_dn.iter().cloned());
        let _ = writeln!(w, "#define sched__runnable {runnable}");
        let _ = writeln!(w, "#define sched__delta_due {}", Self::disjunction(delta_parts));
        let _ = writeln!(w, "#define sched__idle (sched__baton == 0 && !sched__runnable && !sched__delta_due)");
        let _ = writeln!(w, "#define sched__due {}", Self::disjunction(due_parts));
        let _ = writeln!(w, "#define sched__pending {}", Self::disjunction(pending_parts));
    }

    /// Wakes the processes waiting on event `ev`.
    fn emit_fire(&self, w: &mut String, ev: EventId) {
        let _ = writeln!(w);
        let _ = writeln!(w, "inline {}() {{", self.ev_fire[ev]);
        let mut any = false;
        for p in &self.procs {
            if let Some(k) = p.ons.iter().position(|o| *o == WaitOn::Event(ev)) {
                any = true;
                let _ = writeln!(w, "  if");
                let _ = writeln!(w, "  :: {} == 3 && {} == {k} -> {} = 0; {} = 0", p.st, p.on, p.st, p.on);
                let _ = writeln!(w, "  :: else -> skip");
                let _ = writeln!(w, "  fi;");
            }
        }
        if !any {
            let _ = writeln!(w, "  skip");
        }
        let _ = writeln!(w, "}}");
    }

    /// Wakes processes waiting on a change of `r` when `changed` holds.
    fn wake_change(&self, w: &mut String, r: Ref, changed: &str, indent: &str) {
        for p in &self.procs {
            if let Some(k) = p.ons.iter().position(|o| *o == WaitOn::Change(r)) {
                let _ = writeln!(w, "{indent}if");
                let _ = writeln!(w, "{indent}:: {changed} && {} == 2 && {} == {k} -> {} = 0; {} = 0", p.st, p.on, p.st, p.on);
                let _ = writeln!(w, "{indent}:: else -> skip");
                let _ = writeln!(w, "{indent}fi;");
            }
        }
    }

    fn emit_update(&self, w: &mut String) {
        let d = self.d;
        let _ = writeln!(w);
        let _ = writeln!(w, "/* update phase: commit writes, deliver delta notifications, wake change waiters */");
        let _ = writeln!(w, "inline sched__update() {{");
        let _ = writeln!(w, "  sched__delta = sched__delta + 1;");
        let _ = writeln!(w, "  sched__ran = false;");
        for (i, s) in d.signals.iter().enumerate() {
            let init = literal(&s.ty, s.init);
            let (cur, next, wr) = (&self.sig_cur[i], &self.sig_next[i], &self.sig_wr[i]);
            let _ = writeln!(w, "  if");
            match self.watched.iter().position(|x| *x == i) {
                Some(c) => {
                    let _ = writeln!(w, "  :: {wr} -> sched__chg[{c}] = ({next} != {cur}); {cur} = {next}; {next} = {init}; {wr} = false");
                }
                None => {
                    let _ = writeln!(w, "  :: {wr} -> {cur} = {next}; {next} = {init}; {wr} = false");
                }
            }
            let _ = writeln!(w, "  :: else -> skip");
            let _ = writeln!(w, "  fi;");
        }
        for ev in 0..d.events.len() {
            let dn = &self.ev_dn[ev];
            let _ = writeln!(w, "  if");
            let _ = writeln!(w, "  :: {dn} -> {dn} = false; {}()", self.ev_fire[ev]);
            let _ = writeln!(w, "  :: else -> skip");
            let _ = writeln!(w, "  fi;");
        }
        for (c, &s) in self.watched.iter().enumerate() {
            self.wake_change(w, Ref::Signal(s), &format!("sched__chg[{c}]"), "  ");
            let _ = writeln!(w, "  sched__chg[{c}] = false;");
        }
        let _ = writeln!(w, "  skip");
        let _ = writeln!(w, "}}");
    }

    fn emit_time_step(&self, w: &mut String) {
        let d = self.d;
        let params: Vec<String> = (0..d.inputs.len()).map(|i| format!("v{i}")).collect();
        let _ = writeln!(w);
        let _ = writeln!(w, "/* time phase: advance to the earliest wake-up, then set the open inputs */");
        let _ = writeln!(w, "inline sched__time_step({}) {{", params.join(", "));
        let _ = writeln!(w, "  sched__nw = MAX_TIME + 1;");
        for (pid, p) in self.procs.iter().enumerate() {
            if d.processes[pid].cfg.iter().any(|n| matches!(n.kind, NodeKind::Wait { on: WaitOn::Time(_), .. })) {
                let _ = writeln!(w, "  if");
                let _ = writeln!(w, "  :: {} == 1 && {} < sched__nw -> sched__nw = {}", p.st, p.wk, p.wk);
                let _ = writeln!(w, "  :: else -> skip");
                let _ = writeln!(w, "  fi;");
            }
        }
        for tn in self.ev_tn.iter().flatten() {
            for s in 0..TIMED_SLOTS {
                let _ = writeln!(w, "  if");
                let _ = writeln!(w, "  :: {tn}[{s}] != NO_WAKE && {tn}[{s}] < sched__nw -> sched__nw = {tn}[{s}]");
                let _ = writeln!(w, "  :: else -> skip");
                let _ = writeln!(w, "  fi;");
            }
        }
        let _ = writeln!(w, "  sched__time = sched__nw;");
        let _ = writeln!(w, "  sched__delta = 0;");
        for (ev, tn) in self.ev_tn.iter().enumerate() {
            let Some(tn) = tn else { continue };
            for s in 0..TIMED_SLOTS {
                let _ = writeln!(w, "  if");
                let _ = writeln!(w, "  :: {tn}[{s}] == sched__nw -> {tn}[{s}] = NO_WAKE; {}()", self.ev_fire[ev]);
                let _ = writeln!(w, "  :: else -> skip");
                let _ = writeln!(w, "  fi;");
            }
        }
        for (pid, p) in self.procs.iter().enumerate() {
            if d.processes[pid].cfg.iter().any(|n| matches!(n.kind, NodeKind::Wait { on: WaitOn::Time(_), .. })) {
                let _ = writeln!(w, "  if");
                let _ = writeln!(w, "  :: {} == 1 && {} == sched__nw -> {} = 0; {} = 0", p.st, p.wk, p.st, p.wk);
                let _ = writeln!(w, "  :: else -> skip");
                let _ = writeln!(w, "  fi;");
            }
        }
        for (i, name) in self.inputs.iter().enumerate() {
            let _ = writeln!(w, "  sched__oin[{i}] = {name}; {name} = v{i};");
            self.wake_change(w, Ref::Input(i), &format!("{name} != sched__oin[{i}]"), "  ");
        }
        let _ = writeln!(w, "  skip");
        let _ = writeln!(w, "}}");
    }

    fn target(&self, pid: ProcId, t: Target) -> u32 {
        match t {
            Target::Loc(l) => l,
            Target::Exit => self.d.processes[pid].cfg.len() as u32,
        }
    }

    /// Stores `value` into `dst` with the kernel's range check.
    fn checked_store(&self, dst: &str, ty: &ScalarType, value: &RExpr) -> String {
        let needs_check = match (ty, value.as_const()) {
            (ScalarType::Int { .. }, Some(c)) => !ty.contains(c),
            (ScalarType::Int { .. }, None) => true,
            _ => false,
        };
        if needs_check {
            format!(
                "sched__tmp = {}; assert(sched__tmp >= {} && sched__tmp <= {}); {dst} = sched__tmp",
                self.expr(value),
                ty.min(),
                ty.max()
            )
        } else {
            format!("{dst} = {}", self.expr(value))
        }
    }

    fn emit_process(&self, w: &mut String, pid: ProcId) {
        let d = self.d;
        let p = &self.procs[pid];
        let info = &d.processes[pid];
        let exit = info.cfg.len() as u32;
        let (st, loc, on, wk) = (&p.st, &p.loc, &p.on, &p.wk);
        let _ = writeln!(w);
        let _ = writeln!(w, "/* {} */", info.name);
        let _ = writeln!(w, "active proctype {}() {{", p.proctype);
        let _ = writeln!(w, "  do");
        let _ = writeln!(w, "  :: d_step {{");
        let _ = writeln!(w, "       sched__baton == 0 && {st} == 0 ->");
        let _ = writeln!(w, "       sched__baton = {}; sched__ran = true; sched__steps = 0;", pid + 1);
        let _ = writeln!(w, "       do");
        let _ = writeln!(w, "       :: sched__steps >= STEP_LIMIT -> sched__hz = 3; break");
        let _ = writeln!(w, "       :: else ->");
        let _ = writeln!(w, "          sched__steps = sched__steps + 1;");
        let _ = writeln!(w, "          if");
        let ind = "             ";
        for (l, node) in info.cfg.iter().enumerate() {
            let go = |t: Target| format!("{loc} = {}", self.target(pid, t));
            let body = match &node.kind {
                NodeKind::Entry { next } | NodeKind::Skip { next } => go(*next),
                NodeKind::Assign { var, value, next } => {
                    format!("{}; {}", self.checked_store(&self.vars[*var], &d.vars[*var].ty, value), go(*next))
                }
                NodeKind::Write { signal, value, next } => format!(
                    "{}; {} = true; {}",
                    self.checked_store(&self.sig_next[*signal], &d.signals[*signal].ty, value),
                    self.sig_wr[*signal],
                    go(*next)
                ),
                NodeKind::Branch { cond, then_to, else_to } => format!(
                    "if\n{ind}:: {} -> {}\n{ind}:: else -> {}\n{ind}fi",
                    self.expr(cond),
                    go(*then_to),
                    go(*else_to)
                ),
                NodeKind::Wait { on: w_on, next } => match w_on {
                    WaitOn::Time(n) => format!(
                        "{st} = 1; {wk} = (sched__time + {n} > MAX_TIME -> MAX_TIME + 1 : sched__time + {n}); {}; break",
                        go(*next)
                    ),
                    other => {
                        let kind = if matches!(other, WaitOn::Event(_)) { 3 } else { 2 };
                        let k = p.ons.iter().position(|o| o == other).unwrap();
                        format!("{st} = {kind}; {on} = {k}; {}; break", go(*next))
                    }
                },
                NodeKind::Notify { event, when, next } => {
                    let act = match when {
                        NotifyWhen::Immediate => format!("{}()", self.ev_fire[*event]),
                        NotifyWhen::Delta => format!("{} = true", self.ev_dn[*event]),
                        NotifyWhen::Time(n) => self.timed_insert(*event, *n, ind),
                    };
                    format!("{act}; {}", go(*next))
                }
                NodeKind::Assert { cond, next } => format!("assert({}); {}", self.expr(cond), go(*next)),
            };
            let _ = writeln!(w, "{ind}/* {} */", node.label.replace("*/", "* /"));
            let _ = writeln!(w, "          :: {loc} == {l} -> {body}");
        }
        let _ = writeln!(w, "          :: {loc} == {exit} -> {st} = 4; break");
        let _ = writeln!(w, "          fi");
        let _ = writeln!(w, "       od;");
        let _ = writeln!(w, "       sched__baton = 0");
        let _ = writeln!(w, "     }}");
        let _ = writeln!(w, "  :: {st} == 4 -> break");
        let _ = writeln!(w, "  :: sched__hz != 0 -> break");
        let _ = writeln!(w, "  od");
        let _ = writeln!(w, "}}");
    }

    /// Adds a timed notification unless the same wake time is pending.
    fn timed_insert(&self, ev: EventId, n: u32, ind: &str) -> String {
        let tn = self.ev_tn[ev].as_ref().unwrap();
        let t = format!("(sched__time + {n} > MAX_TIME -> MAX_TIME + 1 : sched__time + {n})");
        let mut s = format!("sched__tmp = {t};\n{ind}if\n{ind}:: ");
        let present: Vec<String> = (0..TIMED_SLOTS).map(|i| format!("{tn}[{i}] == sched__tmp")).collect();
        let _ = write!(s, "{} -> skip\n{ind}", present.join(" || "));
        for i in 0..TIMED_SLOTS {
            let _ = write!(s, ":: else ->\n{ind}if\n{ind}:: {tn}[{i}] == NO_WAKE -> {tn}[{i}] = sched__tmp\n{ind}");
        }
        let _ = write!(s, ":: else -> assert(false) /* timed notification slots exhausted */\n{ind}");
        for _ in 0..TIMED_SLOTS {
            let _ = write!(s, "fi\n{ind}");
        }
        s.push_str("fi");
        s
    }

    fn emit_scheduler(&self, w: &mut String) {
        let d = self.d;
        let valuations: Vec<Vec<i64>> = match self.opts.env {
            EnvPolicy::MostGeneral => crate::kernel::all_valuations(d.inputs.iter().map(|i| &i.ty)),
            EnvPolicy::ClosedDefault => vec![d.inputs.iter().map(|i| i.ty.min()).collect()],
        };
        let args = |v: &[i64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let _ = writeln!(w);
        let _ = writeln!(w, "active proctype sched__main() {{");
        let _ = writeln!(w, "  /* initial input valuation */");
        let _ = writeln!(w, "  if");
        for v in &valuations {
            let sets: String = v.iter().enumerate().map(|(i, x)| format!("{} = {x}; ", self.inputs[i])).collect();
            let _ = writeln!(w, "  :: d_step {{ {sets}sched__baton = 0 }}");
        }
        let _ = writeln!(w, "  fi;");
        let _ = writeln!(w, "end_idle:");
        let _ = writeln!(w, "  do");
        let _ = writeln!(w, "  :: d_step {{ sched__baton == 0 && !sched__runnable && sched__delta_due && sched__delta < MAX_DELTA -> sched__update() }}");
        let _ = writeln!(w, "  :: d_step {{ sched__baton == 0 && !sched__runnable && sched__delta_due && sched__delta >= MAX_DELTA -> sched__hz = 2 }}; break");
        for v in &valuations {
            let next = match self.opts.env {
                EnvPolicy::MostGeneral => args(v),
                EnvPolicy::ClosedDefault => self.inputs.join(", "),
            };
            let _ = writeln!(w, "  :: d_step {{ sched__idle && sched__due -> sched__time_step({next}) }}");
        }
        let _ = writeln!(w, "  :: d_step {{ sched__idle && !sched__due && sched__pending -> sched__hz = 1 }}; break");
        let _ = writeln!(w, "  od");
        let _ = writeln!(w, "}}");
    }
}

fn binop(op: BinOp) -> &'static str {
    match op {
        BinOp::Or => "||",
        BinOp::And => "&&",
        BinOp::Eq => "==",
        BinOp::Ne => "!=",
        BinOp::Lt => "<",
        BinOp::Le => "<=",
        BinOp::Gt => ">",
        BinOp::Ge => ">=",
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
    }
}

/// Emits the design with the named properties (all of them for `None`).
pub fn emit_promela(d: &Design, properties: Option<&[&str]>, opts: &EmitOptions) -> Result<String, PromelaError> {
    let props: Vec<&Property> = match properties {
        None => d.properties.iter().collect(),
        Some(names) => names
            .iter()
            .map(|n| d.property(n).ok_or_else(|| PromelaError::UnknownProperty(n.to_string())))
            .collect::<Result<_, _>>()?,
    };
    let e = Emitter::new(d, opts, &props)?;
    Ok(e.emit(&props))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scl::{elaborate, parse};

    fn design(src: &str) -> Design {
        elaborate(&parse(src).unwrap()).unwrap()
    }

    #[test]
    fn signal_declares_three_globals() {
        let d = design("module M { signal s: bool = false; process P { s <= true; } } instance a: M;");
        let pml = emit_promela(&d, None, &EmitOptions::default()).unwrap();
        assert!(pml.contains("bool a__s_cur = false; bool a__s_next = false; bool a__s_wr = false;"), "{pml}");
    }

    #[test]
    fn invariant_becomes_an_always_block() {
        let d = design(
            "module M { var in_cs: bool = false; process P { in_cs = true; } }
             instance a: M; instance b: M;
             invariant mutex { !(a.in_cs && b.in_cs) }",
        );
        let pml = emit_promela(&d, None, &EmitOptions::default()).unwrap();
        assert!(pml.contains("ltl inv_mutex { [] (!(a__in_cs && b__in_cs)) }"), "{pml}");
    }

    #[test]
    fn emission_is_deterministic() {
        let src = "module M { in i: int[0..2]; out o: int[0..5]; event e;
                   process P { while true { wait(change i); o <= i + 1; notify(e, time 2); wait(event e); } } }
                   instance m: M;";
        let a = emit_promela(&design(src), None, &EmitOptions::default()).unwrap();
        let b = emit_promela(&design(src), None, &EmitOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("short m__e_tn[4] = NO_WAKE;"));
        assert!(a.contains("sched__time_step(2)"));
    }

    #[test]
    fn wide_ints_are_rejected() {
        let d = design("module M { var x: int[3000000000..3000000001] = 3000000000; process P { skip; } } instance m: M;");
        assert!(matches!(emit_promela(&d, None, &EmitOptions::default()), Err(PromelaError::Width { .. })));
    }

    #[test]
    fn types_pick_the_smallest_fit() {
        assert_eq!(promela_type("x", &ScalarType::Int { lo: 0, hi: 255 }).unwrap(), "byte");
        assert_eq!(promela_type("x", &ScalarType::Int { lo: -1, hi: 3 }).unwrap(), "short");
        assert_eq!(promela_type("x", &ScalarType::Int { lo: 0, hi: 70000 }).unwrap(), "int");
        assert_eq!(promela_type("x", &ScalarType::Enum { labels: vec!["A".into()] }).unwrap(), "byte");
    }

    #[test]
    fn suffix_clashes_are_disambiguated() {
        let d = design("module M { signal s: bool = false; var s_cur: bool = false; process P { s <= true; } } instance a: M;");
        let pml = emit_promela(&d, None, &EmitOptions::default()).unwrap();
        assert!(pml.contains("bool a__s_cur = false;"));
        assert!(pml.contains("bool a__s_cur_d1 = false;"));
    }

    #[test]
    fn unknown_property_is_an_error() {
        let d = design("module M { } instance m: M;");
        assert_eq!(
            emit_promela(&d, Some(&["nope"]), &EmitOptions::default()).unwrap_err(),
            PromelaError::UnknownProperty("nope".into())
        );
    }
}
