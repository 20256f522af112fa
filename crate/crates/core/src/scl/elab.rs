//! Elaboration: instance expansion, bind resolution, type checking and
//! lowering of process bodies to control-flow graphs.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use super::ast::*;
use super::design::*;
use super::pretty::{expr_to_string, ltl_to_string};
use super::types::{ScalarType, Value};
use crate::props::{AtomDef, LtlFormula, LtlProperty};

#[derive(Clone, Debug)]
pub struct ElabConfig {
    /// Largest admissible `hi - lo + 1` for an integer type.
    pub int_width_cap: u64,
    /// Largest admissible product of all value cardinalities.
    pub value_space_cap: u128,
}

impl Default for ElabConfig {
    fn default() -> Self {
        ElabConfig { int_width_cap: 1 << 16, value_space_cap: 1 << 64 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct ElabOptions {
    pub config: ElabConfig,
    /// Instances whose internals are replaced by an interface stub. Only
    /// their ports survive elaboration.
    pub stubbed: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ElabError {
    #[error("{pos}: duplicate {kind} `{name}`")]
    Duplicate { pos: Pos, kind: &'static str, name: String },
    #[error("{pos}: unknown module `{name}`")]
    UnknownModule { pos: Pos, name: String },
    #[error("{pos}: unknown name `{name}`")]
    UnknownName { pos: Pos, name: String },
    #[error("{pos}: type mismatch: {message}")]
    TypeMismatch { pos: Pos, message: String },
    #[error("{pos}: signal `{signal}` has more than one writer ({first}, {second})")]
    DuplicateWriter { pos: Pos, signal: String, first: String, second: String },
    #[error("{pos}: initial value {literal} of `{name}` is outside {ty}")]
    InitOutOfRange { pos: Pos, name: String, literal: String, ty: String },
    #[error("{pos}: literal {literal} is outside the type {ty} of `{name}`")]
    LiteralOutOfRange { pos: Pos, name: String, literal: String, ty: String },
    #[error("{pos}: invalid type: {message}")]
    InvalidType { pos: Pos, message: String },
    #[error("{pos}: `{name}` is internal to stubbed instance `{instance}`; only its ports are visible")]
    HiddenSymbol { pos: Pos, name: String, instance: String },
    #[error("{pos}: {message}")]
    Invalid { pos: Pos, message: String },
    #[error("design has no instances")]
    NoInstances,
    #[error("value space {space} exceeds the configured cap {cap}")]
    ValueSpaceTooLarge { space: u128, cap: u128 },
}

impl ElabError {
    pub fn pos(&self) -> Option<Pos> {
        match self {
            ElabError::Duplicate { pos, .. }
            | ElabError::UnknownModule { pos, .. }
            | ElabError::UnknownName { pos, .. }
            | ElabError::TypeMismatch { pos, .. }
            | ElabError::DuplicateWriter { pos, .. }
            | ElabError::InitOutOfRange { pos, .. }
            | ElabError::LiteralOutOfRange { pos, .. }
            | ElabError::InvalidType { pos, .. }
            | ElabError::HiddenSymbol { pos, .. }
            | ElabError::Invalid { pos, .. } => Some(*pos),
            ElabError::NoInstances | ElabError::ValueSpaceTooLarge { .. } => None,
        }
    }
}

type Result<T> = std::result::Result<T, ElabError>;

pub fn elaborate(ast: &DesignAst) -> Result<Design> {
    elaborate_with(ast, &ElabOptions::default())
}

pub fn elaborate_with(ast: &DesignAst, opts: &ElabOptions) -> Result<Design> {
    Elaborator::new(ast, opts).run()
}

/// The design reduced to one instance; all its in-ports become open inputs.
pub fn restrict_to_instance(ast: &DesignAst, instance: &str) -> DesignAst {
    DesignAst {
        modules: ast.modules.clone(),
        instances: ast.instances.iter().filter(|i| i.name == instance).cloned().collect(),
        binds: vec![],
        properties: vec![],
    }
}

/// The design without one instance, its binds, and properties naming it.
pub fn remove_instance(ast: &DesignAst, instance: &str) -> DesignAst {
    DesignAst {
        modules: ast.modules.clone(),
        instances: ast.instances.iter().filter(|i| i.name != instance).cloned().collect(),
        binds: ast.binds.iter().filter(|b| b.from.instance != instance && b.to.instance != instance).cloned().collect(),
        properties: ast.properties.iter().filter(|p| !property_mentions(p, instance)).cloned().collect(),
    }
}

fn property_mentions(p: &PropertyDecl, instance: &str) -> bool {
    let mut names = Vec::new();
    match &p.kind {
        super::ast::PropertyKind::Ltl(f) => ltl_names(f, &mut names),
        super::ast::PropertyKind::Invariant(e) => expr_names(e, &mut names),
    }
    names.iter().any(|n| n.first().map(String::as_str) == Some(instance))
}

fn ltl_names(f: &LtlAst, out: &mut Vec<Vec<String>>) {
    match f {
        LtlAst::Const(_) => {}
        LtlAst::Atom { name, .. } => out.push(name.clone()),
        LtlAst::Not(a) | LtlAst::Next(a) | LtlAst::Finally(a) | LtlAst::Globally(a) => ltl_names(a, out),
        LtlAst::And(a, b) | LtlAst::Or(a, b) | LtlAst::Implies(a, b) | LtlAst::Until(a, b) | LtlAst::Release(a, b) => {
            ltl_names(a, out);
            ltl_names(b, out);
        }
    }
}

fn expr_names(e: &Expr, out: &mut Vec<Vec<String>>) {
    match &e.kind {
        ExprKind::Name(n) => out.push(n.clone()),
        ExprKind::Unary(_, a) => expr_names(a, out),
        ExprKind::Binary(_, a, b) => {
            expr_names(a, out);
            expr_names(b, out);
        }
        _ => {}
    }
}

/// Expression type as seen by the checker: integer ranges are irrelevant.
#[derive(Clone, Debug, PartialEq, Eq)]
enum ETy {
    Bool,
    Int,
    Enum(Vec<String>),
}

impl ETy {
    fn of(t: &ScalarType) -> ETy {
        match t {
            ScalarType::Bool => ETy::Bool,
            ScalarType::Int { .. } => ETy::Int,
            ScalarType::Enum { labels } => ETy::Enum(labels.clone()),
        }
    }

    fn describe(&self) -> String {
        match self {
            ETy::Bool => "bool".into(),
            ETy::Int => "int".into(),
            ETy::Enum(l) => format!("enum {{ {} }}", l.join(", ")),
        }
    }
}

/// What a name means inside one module instance.
#[derive(Clone, Copy, Debug)]
enum Member {
    /// Readable value; `Some(sig)` if it may be written with `<=`.
    Value { r: Ref, writable: Option<SigId>, var: bool },
    Event(EventId),
    Process,
}

struct Elaborator<'a> {
    ast: &'a DesignAst,
    opts: &'a ElabOptions,
    modules: BTreeMap<&'a str, &'a ModuleDecl>,
    d: Design,
    /// Per instance: member name -> meaning.
    scopes: Vec<HashMap<String, Member>>,
    /// Per stubbed instance: names that exist but are hidden.
    hidden: Vec<BTreeSet<String>>,
}

impl<'a> Elaborator<'a> {
    fn new(ast: &'a DesignAst, opts: &'a ElabOptions) -> Self {
        Elaborator {
            ast,
            opts,
            modules: BTreeMap::new(),
            d: Design {
                instances: vec![],
                signals: vec![],
                vars: vec![],
                inputs: vec![],
                events: vec![],
                processes: vec![],
                properties: vec![],
                names: BTreeMap::new(),
                warnings: vec![],
                value_space: 1,
                stubs: vec![],
                source: ast.clone(),
            },
            scopes: vec![],
            hidden: vec![],
        }
    }

    fn run(mut self) -> Result<Design> {
        self.check_modules()?;
        if self.ast.instances.is_empty() {
            return Err(ElabError::NoInstances);
        }
        self.instances()?;
        self.binds()?;
        self.processes()?;
        self.properties()?;
        let mut space: u128 = 1;
        let cards = self
            .d
            .signals
            .iter()
            .map(|s| s.ty.cardinality())
            .chain(self.d.vars.iter().map(|v| v.ty.cardinality()))
            .chain(self.d.inputs.iter().map(|i| i.ty.cardinality()));
        for c in cards {
            space = space.saturating_mul(c as u128);
        }
        self.d.value_space = space;
        if space > self.opts.config.value_space_cap {
            return Err(ElabError::ValueSpaceTooLarge { space, cap: self.opts.config.value_space_cap });
        }
        Ok(self.d)
    }

    fn check_type(&self, t: &TypeExpr, pos: Pos) -> Result<ScalarType> {
        match t {
            TypeExpr::Int { lo, hi } => {
                if lo > hi {
                    return Err(ElabError::InvalidType { pos, message: format!("empty range int[{lo}..{hi}]") });
                }
                let width = (*hi as i128 - *lo as i128 + 1) as u128;
                if width > self.opts.config.int_width_cap as u128 {
                    return Err(ElabError::InvalidType {
                        pos,
                        message: format!("int[{lo}..{hi}] is wider than the cap of {} values", self.opts.config.int_width_cap),
                    });
                }
            }
            TypeExpr::Enum(labels) => {
                let mut seen = BTreeSet::new();
                for l in labels {
                    if !seen.insert(l) {
                        return Err(ElabError::Duplicate { pos, kind: "enum label", name: l.clone() });
                    }
                }
            }
            TypeExpr::Bool => {}
        }
        Ok(ScalarType::from_expr(t))
    }

    fn check_modules(&mut self) -> Result<()> {
        for m in &self.ast.modules {
            if self.modules.insert(&m.name, m).is_some() {
                return Err(ElabError::Duplicate { pos: m.span.pos(), kind: "module", name: m.name.clone() });
            }
            let mut names = BTreeSet::new();
            let members = m
                .ports
                .iter()
                .map(|p| (&p.name, p.span))
                .chain(m.signals.iter().map(|s| (&s.name, s.span)))
                .chain(m.vars.iter().map(|s| (&s.name, s.span)))
                .chain(m.events.iter().map(|e| (&e.name, e.span)))
                .chain(m.processes.iter().map(|p| (&p.name, p.span)));
            for (n, span) in members {
                if !names.insert(n) {
                    return Err(ElabError::Duplicate { pos: span.pos(), kind: "member", name: format!("{}.{n}", m.name) });
                }
            }
            for p in &m.ports {
                self.check_type(&p.ty, p.span.pos())?;
            }
            for s in m.signals.iter().chain(&m.vars) {
                let ty = self.check_type(&s.ty, s.span.pos())?;
                if ty.literal_value(&s.init).is_none() {
                    return Err(ElabError::InitOutOfRange {
                        pos: s.span.pos(),
                        name: format!("{}.{}", m.name, s.name),
                        literal: s.init.to_string(),
                        ty: ty.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    fn instances(&mut self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (iid, inst) in self.ast.instances.iter().enumerate() {
            if !seen.insert(&inst.name) {
                return Err(ElabError::Duplicate { pos: inst.span.pos(), kind: "instance", name: inst.name.clone() });
            }
            let m = *self
                .modules
                .get(inst.module.as_str())
                .ok_or_else(|| ElabError::UnknownModule { pos: inst.span.pos(), name: inst.module.clone() })?;
            let stubbed = self.opts.stubbed.contains(&inst.name);
            let mut scope = HashMap::new();
            let mut hidden = BTreeSet::new();
            let q = |n: &str| format!("{}.{n}", inst.name);
            let mut ports = Vec::new();
            for p in &m.ports {
                let ty = ScalarType::from_expr(&p.ty);
                let target = match p.dir {
                    Dir::Out => {
                        let id = self.d.signals.len();
                        self.d.signals.push(SignalInfo {
                            name: q(&p.name),
                            ty: ty.clone(),
                            init: ty.min(),
                            instance: iid,
                            origin: SignalOrigin::OutPort { readers: vec![] },
                            writer: None,
                        });
                        scope.insert(p.name.clone(), Member::Value { r: Ref::Signal(id), writable: Some(id), var: false });
                        Ref::Signal(id)
                    }
                    // Resolved once binds are known; provisionally an open input.
                    Dir::In => Ref::Input(usize::MAX),
                };
                ports.push(PortInfo { name: p.name.clone(), dir: p.dir, ty, target });
            }
            if stubbed {
                for n in m.signals.iter().chain(&m.vars).map(|s| &s.name) {
                    hidden.insert(n.clone());
                }
                hidden.extend(m.events.iter().map(|e| e.name.clone()));
                hidden.extend(m.processes.iter().map(|p| p.name.clone()));
            } else {
                for s in &m.signals {
                    let ty = ScalarType::from_expr(&s.ty);
                    let id = self.d.signals.len();
                    self.d.signals.push(SignalInfo {
                        name: q(&s.name),
                        init: ty.literal_value(&s.init).expect("checked"),
                        ty,
                        instance: iid,
                        origin: SignalOrigin::Internal,
                        writer: None,
                    });
                    scope.insert(s.name.clone(), Member::Value { r: Ref::Signal(id), writable: Some(id), var: false });
                }
                for v in &m.vars {
                    let ty = ScalarType::from_expr(&v.ty);
                    let id = self.d.vars.len();
                    self.d.vars.push(VarInfo {
                        name: q(&v.name),
                        init: ty.literal_value(&v.init).expect("checked"),
                        ty,
                        instance: iid,
                    });
                    scope.insert(v.name.clone(), Member::Value { r: Ref::Var(id), writable: None, var: true });
                }
                for e in &m.events {
                    let id = self.d.events.len();
                    self.d.events.push(EventInfo { name: q(&e.name), instance: iid });
                    scope.insert(e.name.clone(), Member::Event(id));
                }
                for p in &m.processes {
                    scope.insert(p.name.clone(), Member::Process);
                }
            }
            self.d.instances.push(InstanceInfo { name: inst.name.clone(), module: m.name.clone(), ports, stubbed });
            self.scopes.push(scope);
            self.hidden.push(hidden);
        }
        Ok(())
    }

    fn binds(&mut self) -> Result<()> {
        // in-port (instance, port index) -> source signal
        let mut bound: BTreeMap<(usize, usize), (SigId, Pos)> = BTreeMap::new();
        for b in &self.ast.binds {
            let pos = b.span.pos();
            let (fi, fp) = self.port(&b.from)?;
            let (ti, tp) = self.port(&b.to)?;
            let from = &self.d.instances[fi].ports[fp];
            let to = &self.d.instances[ti].ports[tp];
            if from.dir != Dir::Out {
                return Err(ElabError::Invalid { pos, message: format!("bind source {} is not an out-port", b.from) });
            }
            if to.dir != Dir::In {
                return Err(ElabError::Invalid { pos, message: format!("bind target {} is not an in-port", b.to) });
            }
            if from.ty != to.ty {
                return Err(ElabError::TypeMismatch {
                    pos,
                    message: format!("bind {} ({}) -> {} ({})", b.from, from.ty, b.to, to.ty),
                });
            }
            let Ref::Signal(sig) = from.target else { unreachable!() };
            if let Some((prev, _)) = bound.insert((ti, tp), (sig, pos)) {
                return Err(ElabError::DuplicateWriter {
                    pos,
                    signal: b.to.to_string(),
                    first: self.d.signals[prev].name.clone(),
                    second: b.from.to_string(),
                });
            }
            if let SignalOrigin::OutPort { readers } = &mut self.d.signals[sig].origin {
                readers.push(b.to.to_string());
            }
        }
        for iid in 0..self.d.instances.len() {
            for pi in 0..self.d.instances[iid].ports.len() {
                if self.d.instances[iid].ports[pi].dir != Dir::In {
                    continue;
                }
                let r = match bound.get(&(iid, pi)) {
                    Some(&(sig, _)) => Ref::Signal(sig),
                    None => {
                        let port = &self.d.instances[iid].ports[pi];
                        let id = self.d.inputs.len();
                        self.d.inputs.push(InputInfo {
                            name: format!("{}.{}", self.d.instances[iid].name, port.name),
                            ty: port.ty.clone(),
                            instance: iid,
                        });
                        Ref::Input(id)
                    }
                };
                self.d.instances[iid].ports[pi].target = r;
                let name = self.d.instances[iid].ports[pi].name.clone();
                self.scopes[iid].insert(name, Member::Value { r, writable: None, var: false });
            }
        }
        // global name table
        for (iid, inst) in self.d.instances.iter().enumerate() {
            for (n, m) in &self.scopes[iid] {
                let r = match m {
                    Member::Value { r, .. } => NameRef::Value(*r),
                    Member::Event(e) => NameRef::Event(*e),
                    Member::Process => continue,
                };
                self.d.names.insert(format!("{}.{n}", inst.name), r);
            }
        }
        Ok(())
    }

    fn port(&self, p: &PortRef) -> Result<(usize, usize)> {
        let pos = p.span.pos();
        let iid = self
            .d
            .instances
            .iter()
            .position(|i| i.name == p.instance)
            .ok_or_else(|| ElabError::UnknownName { pos, name: p.instance.clone() })?;
        let pi = self.d.instances[iid]
            .ports
            .iter()
            .position(|x| x.name == p.port)
            .ok_or_else(|| ElabError::UnknownName { pos, name: p.to_string() })?;
        Ok((iid, pi))
    }

    fn processes(&mut self) -> Result<()> {
        let mut writers: BTreeMap<SigId, (ProcId, Pos)> = BTreeMap::new();
        for (iid, inst) in self.ast.instances.iter().enumerate() {
            if self.d.instances[iid].stubbed {
                continue;
            }
            let m = self.modules[inst.module.as_str()];
            for p in &m.processes {
                let pid = self.d.processes.len();
                let mut lw = Lowering { el: self, iid, nodes: vec![], writes: vec![] };
                let entry = lw.push(NodeKind::Entry { next: Target::Exit }, p.span.pos(), format!("entry {}", p.name));
                let (first, exits) = lw.seq(&p.body)?;
                lw.set_next(entry, 0, first);
                for (loc, slot) in exits {
                    lw.set_next(loc, slot, Target::Exit);
                }
                let Lowering { nodes, writes, .. } = lw;
                for (sig, pos) in writes {
                    match writers.get(&sig) {
                        Some(&(other, _)) if other != pid => {
                            return Err(ElabError::DuplicateWriter {
                                pos,
                                signal: self.d.signals[sig].name.clone(),
                                first: self.d.processes[other].name.clone(),
                                second: format!("{}.{}", inst.name, p.name),
                            });
                        }
                        _ => {
                            writers.insert(sig, (pid, pos));
                        }
                    }
                }
                let dead = dead_locations(&nodes);
                for &l in &dead {
                    let n = &nodes[l as usize];
                    self.d.warnings.push(Warning {
                        pos: n.pos,
                        message: format!("unreachable code in process {}.{}: location {l} `{}`", inst.name, p.name, n.label),
                    });
                }
                self.d.processes.push(ProcessInfo { name: format!("{}.{}", inst.name, p.name), instance: iid, cfg: nodes, dead });
            }
        }
        for (sig, (pid, _)) in writers {
            self.d.signals[sig].writer = Some(pid);
        }
        Ok(())
    }

    fn properties(&mut self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for p in &self.ast.properties {
            let pos = p.span.pos();
            if !seen.insert(&p.name) {
                return Err(ElabError::Duplicate { pos, kind: "property", name: p.name.clone() });
            }
            let (kind, text) = match &p.kind {
                super::ast::PropertyKind::Invariant(e) => {
                    let scope = Scope::Design;
                    let (r, t) = self.expr(e, &scope, None)?;
                    if t != ETy::Bool {
                        return Err(ElabError::TypeMismatch {
                            pos,
                            message: format!("invariant `{}` is {}, expected bool", p.name, t.describe()),
                        });
                    }
                    (super::design::PropertyKind::Invariant(r), expr_to_string(e))
                }
                super::ast::PropertyKind::Ltl(f) => {
                    let mut atoms = Vec::new();
                    let formula = self.ltl(f, &mut atoms)?;
                    (super::design::PropertyKind::Ltl(LtlProperty { formula, atoms }), ltl_to_string(f))
                }
            };
            self.d.properties.push(Property { name: p.name.clone(), kind, text, pos });
        }
        Ok(())
    }

    fn ltl(&self, f: &LtlAst, atoms: &mut Vec<AtomDef>) -> Result<LtlFormula> {
        use LtlFormula as L;
        Ok(match f {
            LtlAst::Const(true) => L::True,
            LtlAst::Const(false) => L::False,
            LtlAst::Atom { name, cmp, span } => {
                let pos = span.pos();
                let (r, ty) = self.design_value(name, pos)?;
                let qname = name.join(".");
                let (op, value, text) = match cmp {
                    None => {
                        if ty != ScalarType::Bool {
                            return Err(ElabError::TypeMismatch { pos, message: format!("`{qname}` is {ty}, not bool") });
                        }
                        (CmpOp::Eq, 1, qname.clone())
                    }
                    Some((op, lit)) => {
                        let kind_ok = matches!(
                            (&ty, lit),
                            (ScalarType::Bool, Literal::Bool(_))
                                | (ScalarType::Int { .. }, Literal::Int(_))
                                | (ScalarType::Enum { .. }, Literal::Label(_))
                        );
                        if !kind_ok {
                            return Err(ElabError::TypeMismatch { pos, message: format!("`{qname}` is {ty}, compared with {lit}") });
                        }
                        if matches!(ty, ScalarType::Enum { .. } | ScalarType::Bool) && !matches!(op, CmpOp::Eq | CmpOp::Ne) {
                            return Err(ElabError::TypeMismatch { pos, message: format!("ordering comparison on {ty}") });
                        }
                        let v = ty.literal_value(lit).ok_or_else(|| ElabError::LiteralOutOfRange {
                            pos,
                            name: qname.clone(),
                            literal: lit.to_string(),
                            ty: ty.to_string(),
                        })?;
                        (*op, v, format!("{qname} {} {lit}", op.symbol()))
                    }
                };
                let obs = self.d.obs_index(r);
                let idx = match atoms.iter().position(|a| a.obs == obs && a.op == op && a.value == value) {
                    Some(i) => i,
                    None => {
                        atoms.push(AtomDef { text, name: qname, target: r, obs, op, value });
                        atoms.len() - 1
                    }
                };
                L::Atom(idx)
            }
            LtlAst::Not(a) => L::not(self.ltl(a, atoms)?),
            LtlAst::And(a, b) => L::and(self.ltl(a, atoms)?, self.ltl(b, atoms)?),
            LtlAst::Or(a, b) => L::or(self.ltl(a, atoms)?, self.ltl(b, atoms)?),
            LtlAst::Implies(a, b) => L::implies(self.ltl(a, atoms)?, self.ltl(b, atoms)?),
            LtlAst::Next(a) => L::next(self.ltl(a, atoms)?),
            LtlAst::Finally(a) => L::finally(self.ltl(a, atoms)?),
            LtlAst::Globally(a) => L::globally(self.ltl(a, atoms)?),
            LtlAst::Until(a, b) => L::until(self.ltl(a, atoms)?, self.ltl(b, atoms)?),
            LtlAst::Release(a, b) => L::release(self.ltl(a, atoms)?, self.ltl(b, atoms)?),
        })
    }

    /// Resolves an instance-qualified value name at design level.
    fn design_value(&self, name: &[String], pos: Pos) -> Result<(Ref, ScalarType)> {
        let q = name.join(".");
        if name.len() != 2 {
            return Err(ElabError::UnknownName { pos, name: q });
        }
        let Some(iid) = self.d.instances.iter().position(|i| i.name == name[0]) else {
            return Err(ElabError::UnknownName { pos, name: q });
        };
        if self.hidden[iid].contains(&name[1]) {
            return Err(ElabError::HiddenSymbol { pos, name: q, instance: name[0].clone() });
        }
        match self.scopes[iid].get(&name[1]) {
            Some(Member::Value { r, .. }) => Ok((*r, self.d.ty(*r).clone())),
            Some(_) => Err(ElabError::TypeMismatch { pos, message: format!("`{q}` is not a value") }),
            None => Err(ElabError::UnknownName { pos, name: q }),
        }
    }

    fn lookup(&self, name: &[String], scope: &Scope, pos: Pos) -> Result<Option<(Ref, ScalarType)>> {
        match scope {
            Scope::Design => {
                if name.len() == 1 {
                    return Ok(None);
                }
                self.design_value(name, pos).map(Some)
            }
            Scope::Instance(iid) => {
                if name.len() != 1 {
                    return Err(ElabError::UnknownName { pos, name: name.join(".") });
                }
                match self.scopes[*iid].get(&name[0]) {
                    Some(Member::Value { r, .. }) => Ok(Some((*r, self.d.ty(*r).clone()))),
                    Some(_) => Err(ElabError::TypeMismatch { pos, message: format!("`{}` is not a value", name[0]) }),
                    None => Ok(None),
                }
            }
        }
    }

    /// Type-checks and resolves an expression. `hint` lets bare enum labels
    /// resolve against the type of the other operand.
    fn expr(&self, e: &Expr, scope: &Scope, hint: Option<&ETy>) -> Result<(RExpr, ETy)> {
        let pos = e.span.pos();
        Ok(match &e.kind {
            ExprKind::Bool(b) => (RExpr::Const(*b as Value), ETy::Bool),
            ExprKind::Int(n) => (RExpr::Const(*n), ETy::Int),
            ExprKind::Name(parts) => match self.lookup(parts, scope, pos)? {
                Some((r, ty)) => (RExpr::Load(r), ETy::of(&ty)),
                None => {
                    if let (Some(ETy::Enum(labels)), [label]) = (hint, parts.as_slice()) {
                        if let Some(i) = labels.iter().position(|l| l == label) {
                            return Ok((RExpr::Const(i as Value), ETy::Enum(labels.clone())));
                        }
                    }
                    return Err(ElabError::UnknownName { pos, name: parts.join(".") });
                }
            },
            ExprKind::Unary(op, a) => {
                let (r, t) = self.expr(a, scope, None)?;
                match (op, &t) {
                    (UnOp::Not, ETy::Bool) => (RExpr::Not(Box::new(r)), ETy::Bool),
                    (UnOp::Neg, ETy::Int) => (RExpr::Neg(Box::new(r)), ETy::Int),
                    _ => {
                        return Err(ElabError::TypeMismatch {
                            pos,
                            message: format!("operator {} applied to {}", if *op == UnOp::Not { "!" } else { "-" }, t.describe()),
                        })
                    }
                }
            }
            ExprKind::Binary(op, a, b) => {
                // Resolve the operand that is not a bare label first.
                let (ra, ta, rb, tb) = if self.is_unresolved_label(a, scope) {
                    let (rb, tb) = self.expr(b, scope, None)?;
                    let (ra, ta) = self.expr(a, scope, Some(&tb))?;
                    (ra, ta, rb, tb)
                } else {
                    let (ra, ta) = self.expr(a, scope, None)?;
                    let (rb, tb) = self.expr(b, scope, Some(&ta))?;
                    (ra, ta, rb, tb)
                };
                let bad = || ElabError::TypeMismatch {
                    pos,
                    message: format!("operator {} applied to {} and {}", op.symbol(), ta.describe(), tb.describe()),
                };
                let ty = match op {
                    BinOp::And | BinOp::Or => {
                        if ta != ETy::Bool || tb != ETy::Bool {
                            return Err(bad());
                        }
                        ETy::Bool
                    }
                    BinOp::Eq | BinOp::Ne => {
                        if ta != tb {
                            return Err(bad());
                        }
                        ETy::Bool
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        if ta != ETy::Int || tb != ETy::Int {
                            return Err(bad());
                        }
                        ETy::Bool
                    }
                    BinOp::Add | BinOp::Sub | BinOp::Mul => {
                        if ta != ETy::Int || tb != ETy::Int {
                            return Err(bad());
                        }
                        ETy::Int
                    }
                };
                (RExpr::Bin(*op, Box::new(ra), Box::new(rb)), ty)
            }
        })
    }

    fn is_unresolved_label(&self, e: &Expr, scope: &Scope) -> bool {
        match &e.kind {
            ExprKind::Name(parts) if parts.len() == 1 => {
                matches!(self.lookup(parts, scope, e.span.pos()), Ok(None))
            }
            _ => false,
        }
    }
}

enum Scope {
    Design,
    Instance(usize),
}

struct Lowering<'e, 'a> {
    el: &'e Elaborator<'a>,
    iid: usize,
    nodes: Vec<Node>,
    writes: Vec<(SigId, Pos)>,
}

/// A dangling edge: (location, successor slot) to be patched.
type Hole = (u32, u8);

impl Lowering<'_, '_> {
    fn push(&mut self, kind: NodeKind, pos: Pos, label: String) -> u32 {
        self.nodes.push(Node { kind, pos, label });
        (self.nodes.len() - 1) as u32
    }

    fn set_next(&mut self, loc: u32, slot: u8, to: Target) {
        match (&mut self.nodes[loc as usize].kind, slot) {
            (NodeKind::Branch { then_to, .. }, 0) => *then_to = to,
            (NodeKind::Branch { else_to, .. }, _) => *else_to = to,
            (
                NodeKind::Entry { next }
                | NodeKind::Assign { next, .. }
                | NodeKind::Write { next, .. }
                | NodeKind::Wait { next, .. }
                | NodeKind::Notify { next, .. }
                | NodeKind::Assert { next, .. }
                | NodeKind::Skip { next },
                _,
            ) => *next = to,
        }
    }

    /// Lowers a statement sequence. Returns its entry (Exit when empty, in
    /// which case the caller must route around it) and its dangling exits.
    fn seq(&mut self, body: &[Stmt]) -> Result<(Target, Vec<Hole>)> {
        let mut entry = None;
        let mut holes: Vec<Hole> = Vec::new();
        for s in body {
            let (e, h) = self.stmt(s)?;
            for (loc, slot) in holes.drain(..) {
                self.set_next(loc, slot, Target::Loc(e));
            }
            entry.get_or_insert(e);
            holes = h;
        }
        Ok((entry.map(Target::Loc).unwrap_or(Target::Exit), holes))
    }

    fn scope(&self) -> Scope {
        Scope::Instance(self.iid)
    }

    fn member(&self, name: &str, pos: Pos) -> Result<Member> {
        self.el.scopes[self.iid]
            .get(name)
            .copied()
            .ok_or_else(|| ElabError::UnknownName { pos, name: name.to_string() })
    }

    fn typed(&self, e: &Expr, want: &ScalarType, what: &str) -> Result<RExpr> {
        let want_t = ETy::of(want);
        let (r, t) = self.el.expr(e, &self.scope(), Some(&want_t))?;
        if t != want_t {
            return Err(ElabError::TypeMismatch {
                pos: e.span.pos(),
                message: format!("{what} expects {}, got {}", want_t.describe(), t.describe()),
            });
        }
        Ok(r)
    }

    fn positive_time(n: i64, pos: Pos) -> Result<u32> {
        if n < 1 || n > u32::MAX as i64 {
            return Err(ElabError::Invalid { pos, message: format!("time delay {n} must be a positive 32-bit integer") });
        }
        Ok(n as u32)
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(u32, Vec<Hole>)> {
        let pos = s.span.pos();
        let scope = self.scope();
        let simple = |lw: &mut Self, kind: NodeKind, label: String| {
            let loc = lw.push(kind, pos, label);
            Ok((loc, vec![(loc, 0)]))
        };
        match &s.kind {
            StmtKind::Assign { target, value } => {
                let Member::Value { r: Ref::Var(var), var: true, .. } = self.member(target, pos)? else {
                    return Err(ElabError::Invalid { pos, message: format!("`=` target `{target}` is not a var") });
                };
                let ty = self.el.d.vars[var].ty.clone();
                let value_r = self.typed(value, &ty, &format!("assignment to `{target}`"))?;
                let label = format!("{target} = {}", expr_to_string(value));
                simple(self, NodeKind::Assign { var, value: value_r, next: Target::Exit }, label)
            }
            StmtKind::Write { target, value } => {
                let Member::Value { writable: Some(signal), .. } = self.member(target, pos)? else {
                    return Err(ElabError::Invalid {
                        pos,
                        message: format!("`<=` target `{target}` is not a signal or out-port"),
                    });
                };
                let ty = self.el.d.signals[signal].ty.clone();
                let value_r = self.typed(value, &ty, &format!("write to `{target}`"))?;
                self.writes.push((signal, pos));
                let label = format!("{target} <= {}", expr_to_string(value));
                simple(self, NodeKind::Write { signal, value: value_r, next: Target::Exit }, label)
            }
            StmtKind::If { cond, then_body, else_body } => {
                let c = self.typed(cond, &ScalarType::Bool, "`if` condition")?;
                let loc = self.push(
                    NodeKind::Branch { cond: c, then_to: Target::Exit, else_to: Target::Exit },
                    pos,
                    format!("if {}", expr_to_string(cond)),
                );
                let mut holes = Vec::new();
                let (te, th) = self.seq(then_body)?;
                match te {
                    Target::Loc(_) => {
                        self.set_next(loc, 0, te);
                        holes.extend(th);
                    }
                    Target::Exit => holes.push((loc, 0)),
                }
                let (ee, eh) = match else_body {
                    Some(b) => self.seq(b)?,
                    None => (Target::Exit, vec![]),
                };
                match ee {
                    Target::Loc(_) => {
                        self.set_next(loc, 1, ee);
                        holes.extend(eh);
                    }
                    Target::Exit => holes.push((loc, 1)),
                }
                Ok((loc, holes))
            }
            StmtKind::While { cond, body } => {
                let c = self.typed(cond, &ScalarType::Bool, "`while` condition")?;
                let loc = self.push(
                    NodeKind::Branch { cond: c, then_to: Target::Exit, else_to: Target::Exit },
                    pos,
                    format!("while {}", expr_to_string(cond)),
                );
                let (be, bh) = self.seq(body)?;
                match be {
                    Target::Loc(_) => {
                        self.set_next(loc, 0, be);
                        for (l, slot) in bh {
                            self.set_next(l, slot, Target::Loc(loc));
                        }
                    }
                    Target::Exit => self.set_next(loc, 0, Target::Loc(loc)),
                }
                Ok((loc, vec![(loc, 1)]))
            }
            StmtKind::Wait(w) => {
                let (on, label) = match w {
                    WaitAst::Time(n) => (WaitOn::Time(Self::positive_time(*n, pos)?), format!("wait(time {n})")),
                    WaitAst::Change(name) => {
                        let r = match self.member(name, pos)? {
                            Member::Value { r, var: false, .. } => r,
                            _ => {
                                return Err(ElabError::Invalid {
                                    pos,
                                    message: format!("`wait(change {name})` needs a signal or port"),
                                })
                            }
                        };
                        (WaitOn::Change(r), format!("wait(change {name})"))
                    }
                    WaitAst::Event(name) => match self.member(name, pos)? {
                        Member::Event(e) => (WaitOn::Event(e), format!("wait(event {name})")),
                        _ => return Err(ElabError::Invalid { pos, message: format!("`{name}` is not an event") }),
                    },
                };
                simple(self, NodeKind::Wait { on, next: Target::Exit }, label)
            }
            StmtKind::Notify { event, when } => {
                let Member::Event(e) = self.member(event, pos)? else {
                    return Err(ElabError::Invalid { pos, message: format!("`{event}` is not an event") });
                };
                let (w, label) = match when {
                    NotifyAst::Immediate => (NotifyWhen::Immediate, format!("notify({event})")),
                    NotifyAst::Delta => (NotifyWhen::Delta, format!("notify({event}, delta)")),
                    NotifyAst::Time(n) => (NotifyWhen::Time(Self::positive_time(*n, pos)?), format!("notify({event}, time {n})")),
                };
                simple(self, NodeKind::Notify { event: e, when: w, next: Target::Exit }, label)
            }
            StmtKind::Assert(cond) => {
                let c = self.typed(cond, &ScalarType::Bool, "assertion")?;
                let _ = &scope;
                simple(self, NodeKind::Assert { cond: c, next: Target::Exit }, format!("assert({})", expr_to_string(cond)))
            }
            StmtKind::Skip => simple(self, NodeKind::Skip { next: Target::Exit }, "skip".into()),
        }
    }
}

/// Value of an expression that reads nothing.
pub fn const_value(e: &RExpr) -> Option<Value> {
    struct NoSource;
    impl ValueSource for NoSource {
        fn load(&self, _: Ref) -> Value {
            unreachable!()
        }
    }
    let mut refs = Vec::new();
    e.refs(&mut refs);
    refs.is_empty().then(|| e.eval(&NoSource))
}

/// Locations unreachable from the entry once constant conditions are folded.
fn dead_locations(nodes: &[Node]) -> Vec<u32> {
    let mut seen = vec![false; nodes.len()];
    let mut stack = vec![0u32];
    seen[0] = true;
    while let Some(l) = stack.pop() {
        let n = &nodes[l as usize];
        let succ = match &n.kind {
            NodeKind::Branch { cond, then_to, else_to } => match const_value(cond) {
                Some(0) => vec![*else_to],
                Some(_) => vec![*then_to],
                None => vec![*then_to, *else_to],
            },
            _ => n.successors(),
        };
        for t in succ {
            if let Target::Loc(x) = t {
                if !seen[x as usize] {
                    seen[x as usize] = true;
                    stack.push(x);
                }
            }
        }
    }
    (0..nodes.len() as u32).filter(|&l| !seen[l as usize]).collect()
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    fn elab(src: &str) -> Result<Design> {
        elaborate(&parse(src).unwrap())
    }

    #[test]
    fn bind_becomes_one_top_level_signal() {
        let d = elab(
            "module M { in i: bool; out o: bool; process P { o <= !i; } }
             instance a: M; instance b: M; bind a.o -> b.i;",
        )
        .unwrap();
        let top: Vec<_> = d.signals.iter().filter(|s| s.is_top_level()).collect();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].name, "a.o");
        assert_eq!(d.lookup("b.i"), Some(NameRef::Value(Ref::Signal(0))));
        // a.i is unbound
        assert_eq!(d.inputs.iter().map(|i| i.name.as_str()).collect::<Vec<_>>(), ["a.i"]);
    }

    #[test]
    fn while_loop_lowers_to_four_locations() {
        let d = elab("module M { var b: bool = true; signal s: bool = false; process P { while b { s <= true; wait(time 1); } } } instance m: M;").unwrap();
        let cfg = &d.processes[0].cfg;
        assert_eq!(cfg.len(), 4);
        assert!(matches!(cfg[0].kind, NodeKind::Entry { next: Target::Loc(1) }));
        assert!(matches!(cfg[1].kind, NodeKind::Branch { then_to: Target::Loc(2), else_to: Target::Exit, .. }));
        assert!(matches!(cfg[2].kind, NodeKind::Write { next: Target::Loc(3), .. }));
        // loop edge back to the condition
        assert!(matches!(cfg[3].kind, NodeKind::Wait { on: WaitOn::Time(1), next: Target::Loc(1) }));
    }

    #[test]
    fn initial_value_out_of_range_is_rejected() {
        let err = elab("module M { signal s: int[0..3] = 7; } instance m: M;").unwrap_err();
        assert!(matches!(err, ElabError::InitOutOfRange { .. }), "{err}");
    }

    #[test]
    fn empty_design_is_rejected() {
        assert_eq!(elab("").unwrap_err(), ElabError::NoInstances);
    }

    #[test]
    fn unknown_module_and_mismatched_bind() {
        assert!(matches!(elab("instance a: Nope;").unwrap_err(), ElabError::UnknownModule { .. }));
        let err = elab(
            "module A { out o: bool; } module B { in i: int[0..1]; }
             instance a: A; instance b: B; bind a.o -> b.i;",
        )
        .unwrap_err();
        assert!(matches!(err, ElabError::TypeMismatch { .. }), "{err}");
    }

    #[test]
    fn two_writers_on_one_signal() {
        let err = elab("module M { signal s: bool = false; process P { s <= true; } process Q { s <= false; } } instance m: M;")
            .unwrap_err();
        assert!(matches!(err, ElabError::DuplicateWriter { .. }), "{err}");
    }

    #[test]
    fn property_with_undeclared_name() {
        let err = elab("module M { signal s: bool = false; } instance m: M; ltl p { G m.t }").unwrap_err();
        assert!(matches!(err, ElabError::UnknownName { .. }), "{err}");
    }

    #[test]
    fn ltl_literal_outside_type_range() {
        let err = elab("module M { var x: int[0..3] = 0; } instance m: M; ltl p { G (m.x == 5) }").unwrap_err();
        assert!(matches!(err, ElabError::LiteralOutOfRange { .. }), "{err}");
    }

    #[test]
    fn enum_labels_resolve_against_the_other_operand() {
        let d = elab(
            "module M { var st: enum { IDLE, BUSY } = IDLE; process P { if st == IDLE { st = BUSY; } } }
             instance m: M; invariant ok { m.st == IDLE || m.st == BUSY }",
        )
        .unwrap();
        assert_eq!(d.processes[0].cfg.len(), 3);
        let err = elab("module M { var st: enum { IDLE } = IDLE; process P { st = NOPE; } } instance m: M;").unwrap_err();
        assert!(matches!(err, ElabError::UnknownName { .. }));
    }

    #[test]
    fn write_to_var_and_assign_to_signal_are_rejected() {
        assert!(elab("module M { var v: bool = false; process P { v <= true; } } instance m: M;").is_err());
        assert!(elab("module M { signal s: bool = false; process P { s = true; } } instance m: M;").is_err());
        assert!(elab("module M { in i: bool; process P { i <= true; } } instance m: M;").is_err());
    }

    #[test]
    fn dead_branch_is_reported() {
        let d = elab("module M { var v: bool = false; process P { if false { v = true; } } } instance m: M;").unwrap();
        assert_eq!(d.processes[0].dead, vec![2]);
        assert_eq!(d.warnings.len(), 1);
        assert!(d.warnings[0].message.contains("location 2"));
    }

    #[test]
    fn value_space_is_product_and_capped() {
        let src = "module M { in i: int[0..3]; var v: bool = false; signal s: enum {A, B, C} = A; } instance m: M;";
        assert_eq!(elab(src).unwrap().value_space, 4 * 2 * 3);
        let opts = ElabOptions { config: ElabConfig { value_space_cap: 10, ..Default::default() }, ..Default::default() };
        assert!(matches!(
            elaborate_with(&parse(src).unwrap(), &opts).unwrap_err(),
            ElabError::ValueSpaceTooLarge { space: 24, cap: 10 }
        ));
    }

    #[test]
    fn stubbed_instance_hides_internals() {
        let src = "module M { in i: bool; out o: bool; var v: bool = false; process P { o <= i; } }
                   instance a: M; ltl p { G a.v }";
        let opts = ElabOptions { stubbed: ["a".to_string()].into(), ..Default::default() };
        let err = elaborate_with(&parse(src).unwrap(), &opts).unwrap_err();
        assert!(matches!(err, ElabError::HiddenSymbol { .. }), "{err}");
    }
}
