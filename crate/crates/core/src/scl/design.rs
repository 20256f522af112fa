//! The elaborated, fully instantiated design consumed by every back end.

use std::collections::BTreeMap;

use serde::Serialize;

use super::ast::{BinOp, DesignAst, Dir, Pos};
use super::types::{ScalarType, Value};
use crate::integration::StubBinding;
use crate::props::LtlProperty;

pub type SigId = usize;
pub type VarId = usize;
pub type InputId = usize;
pub type EventId = usize;
pub type ProcId = usize;
pub type InstId = usize;

/// Something that holds a value at runtime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Ref {
    Signal(SigId),
    Var(VarId),
    Input(InputId),
}

/// Where a qualified name points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NameRef {
    Value(Ref),
    Event(EventId),
    Process(ProcId),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalOrigin {
    /// A `signal` member of one instance.
    Internal,
    /// An out-port. Bound out-ports are the top-level signals joining a
    /// writer to its readers; `readers` lists the bound in-ports.
    OutPort { readers: Vec<String> },
}

#[derive(Clone, Debug, Serialize)]
pub struct SignalInfo {
    pub name: String,
    pub ty: ScalarType,
    pub init: Value,
    pub instance: InstId,
    pub origin: SignalOrigin,
    /// Process that writes this signal with `<=`, if any.
    pub writer: Option<ProcId>,
}

impl SignalInfo {
    pub fn is_top_level(&self) -> bool {
        matches!(&self.origin, SignalOrigin::OutPort { readers } if !readers.is_empty())
    }

    pub fn is_port(&self) -> bool {
        matches!(self.origin, SignalOrigin::OutPort { .. })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VarInfo {
    pub name: String,
    pub ty: ScalarType,
    pub init: Value,
    pub instance: InstId,
}

/// An unbound in-port, driven by the environment.
#[derive(Clone, Debug, Serialize)]
pub struct InputInfo {
    pub name: String,
    pub ty: ScalarType,
    pub instance: InstId,
}

#[derive(Clone, Debug, Serialize)]
pub struct EventInfo {
    pub name: String,
    pub instance: InstId,
}

#[derive(Clone, Debug, Serialize)]
pub struct PortInfo {
    pub name: String,
    pub dir: Dir,
    pub ty: ScalarType,
    /// Storage backing the port: the out-port's signal, the bound writer's
    /// signal, or an open input.
    pub target: Ref,
}

#[derive(Clone, Debug, Serialize)]
pub struct InstanceInfo {
    pub name: String,
    pub module: String,
    pub ports: Vec<PortInfo>,
    /// Instance whose behaviour is supplied by an interface stub.
    pub stubbed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Target {
    Loc(u32),
    Exit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum WaitOn {
    Time(u32),
    Change(Ref),
    Event(EventId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NotifyWhen {
    Immediate,
    Delta,
    Time(u32),
}

/// Resolved, type-checked expression. Booleans evaluate to 0/1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum RExpr {
    Const(Value),
    Load(Ref),
    Not(Box<RExpr>),
    Neg(Box<RExpr>),
    Bin(BinOp, Box<RExpr>, Box<RExpr>),
}

pub trait ValueSource {
    fn load(&self, r: Ref) -> Value;
}

impl RExpr {
    pub fn eval<S: ValueSource + ?Sized>(&self, src: &S) -> Value {
        match self {
            RExpr::Const(v) => *v,
            RExpr::Load(r) => src.load(*r),
            RExpr::Not(e) => (e.eval(src) == 0) as Value,
            RExpr::Neg(e) => e.eval(src).wrapping_neg(),
            RExpr::Bin(op, l, r) => {
                let a = l.eval(src);
                match op {
                    BinOp::And => return (a != 0 && r.eval(src) != 0) as Value,
                    BinOp::Or => return (a != 0 || r.eval(src) != 0) as Value,
                    _ => {}
                }
                let b = r.eval(src);
                match op {
                    BinOp::Eq => (a == b) as Value,
                    BinOp::Ne => (a != b) as Value,
                    BinOp::Lt => (a < b) as Value,
                    BinOp::Le => (a <= b) as Value,
                    BinOp::Gt => (a > b) as Value,
                    BinOp::Ge => (a >= b) as Value,
                    BinOp::Add => a.saturating_add(b),
                    BinOp::Sub => a.saturating_sub(b),
                    BinOp::Mul => a.saturating_mul(b),
                    BinOp::And | BinOp::Or => unreachable!(),
                }
            }
        }
    }

    pub fn as_const(&self) -> Option<Value> {
        match self {
            RExpr::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn refs(&self, out: &mut Vec<Ref>) {
        match self {
            RExpr::Const(_) => {}
            RExpr::Load(r) => out.push(*r),
            RExpr::Not(e) | RExpr::Neg(e) => e.refs(out),
            RExpr::Bin(_, l, r) => {
                l.refs(out);
                r.refs(out);
            }
        }
    }
}

/// One control location of a process.
#[derive(Clone, Debug, Serialize)]
pub enum NodeKind {
    Entry { next: Target },
    Assign { var: VarId, value: RExpr, next: Target },
    Write { signal: SigId, value: RExpr, next: Target },
    Branch { cond: RExpr, then_to: Target, else_to: Target },
    Wait { on: WaitOn, next: Target },
    Notify { event: EventId, when: NotifyWhen, next: Target },
    Assert { cond: RExpr, next: Target },
    Skip { next: Target },
}

#[derive(Clone, Debug, Serialize)]
pub struct Node {
    pub kind: NodeKind,
    pub pos: Pos,
    /// Short human-readable rendering of the statement.
    pub label: String,
}

impl Node {
    pub fn successors(&self) -> Vec<Target> {
        match &self.kind {
            NodeKind::Branch { then_to, else_to, .. } => vec![*then_to, *else_to],
            NodeKind::Entry { next }
            | NodeKind::Assign { next, .. }
            | NodeKind::Write { next, .. }
            | NodeKind::Wait { next, .. }
            | NodeKind::Notify { next, .. }
            | NodeKind::Assert { next, .. }
            | NodeKind::Skip { next } => vec![*next],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProcessInfo {
    pub name: String,
    pub instance: InstId,
    /// Control-flow graph; location 0 is the entry.
    pub cfg: Vec<Node>,
    /// Locations not reachable from the entry once constant branch
    /// conditions are folded.
    pub dead: Vec<u32>,
}

#[derive(Clone, Debug)]
pub enum PropertyKind {
    Invariant(RExpr),
    Ltl(LtlProperty),
}

#[derive(Clone, Debug)]
pub struct Property {
    pub name: String,
    pub kind: PropertyKind,
    /// Source text of the property body.
    pub text: String,
    pub pos: Pos,
}

#[derive(Clone, Debug, Serialize)]
pub struct Warning {
    pub pos: Pos,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct Design {
    pub instances: Vec<InstanceInfo>,
    pub signals: Vec<SignalInfo>,
    pub vars: Vec<VarInfo>,
    pub inputs: Vec<InputInfo>,
    pub events: Vec<EventInfo>,
    pub processes: Vec<ProcessInfo>,
    pub properties: Vec<Property>,
    pub names: BTreeMap<String, NameRef>,
    pub warnings: Vec<Warning>,
    /// Product of the cardinalities of every signal, variable and input type.
    pub value_space: u128,
    /// Interface stubs standing in for stubbed instances.
    pub stubs: Vec<StubBinding>,
    /// The syntax tree this design was elaborated from.
    pub source: DesignAst,
}

impl Design {
    pub fn ty(&self, r: Ref) -> &ScalarType {
        match r {
            Ref::Signal(i) => &self.signals[i].ty,
            Ref::Var(i) => &self.vars[i].ty,
            Ref::Input(i) => &self.inputs[i].ty,
        }
    }

    pub fn ref_name(&self, r: Ref) -> &str {
        match r {
            Ref::Signal(i) => &self.signals[i].name,
            Ref::Var(i) => &self.vars[i].name,
            Ref::Input(i) => &self.inputs[i].name,
        }
    }

    pub fn lookup(&self, name: &str) -> Option<NameRef> {
        self.names.get(name).copied()
    }

    pub fn property(&self, name: &str) -> Option<&Property> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn instance(&self, name: &str) -> Option<InstId> {
        self.instances.iter().position(|i| i.name == name)
    }

    /// Number of observable values: signals, then inputs, then variables.
    pub fn obs_len(&self) -> usize {
        self.signals.len() + self.inputs.len() + self.vars.len()
    }

    /// Position of a value in an observation vector.
    pub fn obs_index(&self, r: Ref) -> usize {
        match r {
            Ref::Signal(i) => i,
            Ref::Input(i) => self.signals.len() + i,
            Ref::Var(i) => self.signals.len() + self.inputs.len() + i,
        }
    }

    pub fn obs_ref(&self, idx: usize) -> Ref {
        let (s, i) = (self.signals.len(), self.inputs.len());
        if idx < s {
            Ref::Signal(idx)
        } else if idx < s + i {
            Ref::Input(idx - s)
        } else {
            Ref::Var(idx - s - i)
        }
    }

    /// Observable names in observation order.
    pub fn obs_names(&self) -> Vec<&str> {
        (0..self.obs_len()).map(|i| self.ref_name(self.obs_ref(i))).collect()
    }

    pub fn obs_types(&self) -> Vec<&ScalarType> {
        (0..self.obs_len()).map(|i| self.ty(self.obs_ref(i))).collect()
    }

    /// Total number of control locations over all processes.
    pub fn location_count(&self) -> usize {
        self.processes.iter().map(|p| p.cfg.len()).sum()
    }
}
