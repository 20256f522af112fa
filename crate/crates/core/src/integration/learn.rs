//! Stub learning and stub/component consistency by exploring a component
//! closed with a chaotic environment.
//!
//! The environment may, at every boundary, change the component's inputs,
//! take a delta step, or (when the component is not busy) advance time to
//! any instant up to the component's next wake-up. This is more permissive
//! than the kernel's own environment: in a composition, in-ports are driven
//! by other components and change at delta boundaries too.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use super::{IntegrationError, InterfaceAlphabet, InterfaceStub, LearnConfig, Letter, Obligation, StepKind, StubTransition};
use crate::kernel::{all_valuations, encode_state, EnvPolicy, Kernel, KernelConfig, KernelError, KernelState};
use crate::scl::design::{Design, Ref, ValueSource};
use crate::scl::{elab, elaborate, DesignAst};

/// A single component with its in-ports open.
pub struct Closure {
    design: Design,
    config: KernelConfig,
    ports: Vec<Ref>,
}

impl Closure {
    pub fn new(ast: &DesignAst, instance: &str, config: KernelConfig) -> Result<Closure, IntegrationError> {
        if !ast.instances.iter().any(|i| i.name == instance) {
            return Err(IntegrationError::UnknownInstance(instance.to_string()));
        }
        let design = elaborate(&elab::restrict_to_instance(ast, instance))?;
        let ports = design.instances[0].ports.iter().map(|p| p.target).collect();
        Ok(Closure { design, config, ports })
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn alphabet(&self) -> InterfaceAlphabet {
        InterfaceAlphabet::of_instance(&self.design, 0)
    }

    fn kernel(&self) -> Kernel<'_> {
        Kernel::new(&self.design, self.config.clone(), EnvPolicy::MostGeneral)
    }

    fn letter(&self, k: &Kernel, s: &KernelState, kind: StepKind) -> Letter {
        Letter { values: self.ports.iter().map(|r| s.load(*r)).collect(), kind, obligation: k.obligation(s) }
    }

    fn valuations(&self) -> Vec<Vec<i64>> {
        all_valuations(self.design.inputs.iter().map(|i| &i.ty))
    }

    /// Initial letters with the quiescent states they lead to.
    pub fn initial(&self) -> Result<Vec<(Letter, KernelState)>, KernelError> {
        let k = self.kernel();
        let mut out = Vec::new();
        for inputs in self.valuations() {
            for q in k.settle(&k.base_state(inputs))? {
                out.push((self.letter(&k, &q, StepKind::Init), q));
            }
        }
        Ok(dedup(out))
    }

    /// Every (letter, next quiescent state) the environment can provoke.
    /// Boundaries that leave the component untouched (not busy, timer not
    /// due, inputs unchanged) produce no letter.
    pub fn next(&self, q: &KernelState) -> Result<Vec<(Letter, KernelState)>, KernelError> {
        if q.fault.is_some() {
            return Ok(vec![]);
        }
        let k = self.kernel();
        let vals = self.valuations();
        let busy = k.obligation(q) == Obligation::Busy;
        let mut out = Vec::new();
        match k.apply_update(q) {
            Ok(u) => {
                for inputs in vals.iter().filter(|v| busy || **v != q.inputs) {
                    for s in k.settle(&k.change_inputs(&u, inputs))? {
                        out.push((self.letter(&k, &s, StepKind::Delta), s));
                    }
                }
            }
            Err(e) if busy => return Err(e),
            Err(_) => {}
        }
        if !busy {
            let wake = k.next_wake(q);
            let horizon = wake.unwrap_or(q.time + 1);
            for t in q.time + 1..=horizon.min(self.config.max_time) {
                let a = k.advance_time(q, t)?;
                let due = wake == Some(t);
                let kind = if due { StepKind::Timeout } else { StepKind::Time };
                for inputs in vals.iter().filter(|v| due || **v != q.inputs) {
                    for s in k.settle(&k.change_inputs(&a, inputs))? {
                        out.push((self.letter(&k, &s, kind), s));
                    }
                }
            }
        }
        Ok(dedup(out))
    }
}

fn dedup(v: Vec<(Letter, KernelState)>) -> Vec<(Letter, KernelState)> {
    let mut seen = HashSet::new();
    v.into_iter().filter(|(l, s)| seen.insert((l.clone(), encode_state(s)))).collect()
}

fn shift(window: &[usize], l: usize, h: usize) -> Vec<usize> {
    let mut w = window.to_vec();
    w.push(l);
    if w.len() > h {
        w.remove(0);
    }
    w
}

#[derive(Default)]
struct Builder {
    letters: Vec<Letter>,
    letter_ids: HashMap<Letter, usize>,
    windows: Vec<Vec<usize>>,
    window_ids: HashMap<Vec<usize>, usize>,
    transitions: BTreeSet<StubTransition>,
}

impl Builder {
    fn letter(&mut self, l: Letter) -> usize {
        if let Some(&i) = self.letter_ids.get(&l) {
            return i;
        }
        self.letters.push(l.clone());
        self.letter_ids.insert(l, self.letters.len() - 1);
        self.letters.len() - 1
    }

    fn window(&mut self, w: Vec<usize>) -> usize {
        if let Some(&i) = self.window_ids.get(&w) {
            return i;
        }
        self.windows.push(w.clone());
        self.window_ids.insert(w, self.windows.len() - 1);
        self.windows.len() - 1
    }
}

/// Learns an h-history stub for `instance` from all interface letter
/// sequences of length at most `k`.
pub fn learn_stub(ast: &DesignAst, instance: &str, k: usize, h: usize, config: &LearnConfig) -> Result<InterfaceStub, IntegrationError> {
    if k == 0 || h == 0 {
        return Err(IntegrationError::Invalid("learning depth and history must be at least 1".into()));
    }
    let c = Closure::new(ast, instance, config.kernel.clone())?;
    let mut b = Builder::default();
    b.window(vec![]);
    let mut seen: HashSet<(Vec<u8>, usize)> = HashSet::new();
    let mut queue: VecDeque<(KernelState, usize, usize)> = VecDeque::new();
    let mut frontier = Vec::new();
    for (l, q) in c.initial()? {
        let li = b.letter(l);
        let w = b.window(shift(&[], li, h));
        b.transitions.insert(StubTransition { from: 0, letter: li, to: w });
        if seen.insert((encode_state(&q), w)) {
            queue.push_back((q, w, 1));
        }
    }
    while let Some((q, w, depth)) = queue.pop_front() {
        config.poll(seen.len())?;
        if depth >= k {
            frontier.push((q, w));
            continue;
        }
        for (l, q2) in c.next(&q)? {
            let li = b.letter(l);
            let w2 = b.window(shift(&b.windows[w].clone(), li, h));
            b.transitions.insert(StubTransition { from: w, letter: li, to: w2 });
            if seen.insert((encode_state(&q2), w2)) {
                queue.push_back((q2, w2, depth + 1));
            }
        }
    }
    // saturated: one more level would add no stub state or transition
    let mut saturated = true;
    'f: for (q, w) in &frontier {
        for (l, q2) in c.next(q)? {
            let Some(&li) = b.letter_ids.get(&l) else {
                saturated = false;
                break 'f;
            };
            let w2 = shift(&b.windows[*w], li, h);
            let _ = q2;
            let known =
                b.window_ids.get(&w2).is_some_and(|&w2| b.transitions.contains(&StubTransition { from: *w, letter: li, to: w2 }));
            if !known {
                saturated = false;
                break 'f;
            }
        }
    }
    let inst = &c.design.instances[0];
    Ok(InterfaceStub::new(
        instance.to_string(),
        inst.module.clone(),
        k,
        h,
        c.alphabet(),
        b.letters,
        b.windows,
        b.transitions.into_iter().collect(),
        saturated,
    ))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConsistencyStatus {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsistencyReport {
    pub status: ConsistencyStatus,
    /// Shortest component letter sequence the stub rejects.
    pub witness: Option<Vec<Letter>>,
    /// (component state, stub state) pairs explored.
    pub explored: usize,
    pub k: usize,
}

impl ConsistencyReport {
    pub fn to_json(&self, alphabet: &InterfaceAlphabet) -> serde_json::Value {
        serde_json::json!({
            "status": match self.status { ConsistencyStatus::Pass => "pass", ConsistencyStatus::Fail => "fail" },
            "k": self.k,
            "explored": self.explored,
            "witness": self.witness.as_ref().map(|w| w.iter().map(|l| alphabet.render_letter(l)).collect::<Vec<_>>()),
        })
    }
}

/// Stale when the component's interface no longer matches the stub's.
pub fn check_alphabet(stub: &InterfaceStub, current: &InterfaceAlphabet) -> Result<(), IntegrationError> {
    let found = current.fingerprint();
    if found != stub.fingerprint || stub.alphabet.fingerprint() != stub.fingerprint {
        return Err(IntegrationError::Stale {
            instance: stub.component.clone(),
            detail: alphabet_diff(&stub.alphabet, current),
        });
    }
    Ok(())
}

fn alphabet_diff(old: &InterfaceAlphabet, new: &InterfaceAlphabet) -> String {
    let render = |a: &InterfaceAlphabet| {
        a.ports.iter().map(|p| format!("{} {}: {}", p.dir, p.name, p.ty)).collect::<Vec<_>>().join("; ")
    };
    format!("stub interface [{}], component interface [{}]", render(old), render(new))
}

/// Checks that every component letter sequence of length at most `k` is
/// accepted by `stub`; the first rejected sequence found is a shortest one.
pub fn check_consistency(
    ast: &DesignAst,
    instance: &str,
    stub: &InterfaceStub,
    k: usize,
    config: &LearnConfig,
) -> Result<ConsistencyReport, IntegrationError> {
    let c = Closure::new(ast, instance, config.kernel.clone())?;
    check_alphabet(stub, &c.alphabet())?;
    // node: (state, stub state, parent, letter)
    let mut nodes: Vec<(KernelState, usize, Option<usize>, Option<Letter>)> = Vec::new();
    let mut seen: HashSet<(Vec<u8>, usize)> = HashSet::new();
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    let witness = |nodes: &Vec<(KernelState, usize, Option<usize>, Option<Letter>)>, mut at: Option<usize>, last: Letter| {
        let mut w = vec![last];
        while let Some(i) = at {
            if let Some(l) = &nodes[i].3 {
                w.push(l.clone());
            }
            at = nodes[i].2;
        }
        w.reverse();
        w
    };
    let fail = |w: Vec<Letter>, explored| ConsistencyReport { status: ConsistencyStatus::Fail, witness: Some(w), explored, k };
    for (l, q) in c.initial()? {
        match stub.letter_index(&l).and_then(|li| stub.step(0, li)) {
            None => return Ok(fail(vec![l], nodes.len())),
            Some(s) => {
                if seen.insert((encode_state(&q), s)) {
                    nodes.push((q, s, None, Some(l)));
                    queue.push_back((nodes.len() - 1, 1));
                }
            }
        }
    }
    while let Some((i, depth)) = queue.pop_front() {
        config.poll(nodes.len())?;
        if depth >= k {
            continue;
        }
        let (q, s) = (nodes[i].0.clone(), nodes[i].1);
        for (l, q2) in c.next(&q)? {
            match stub.letter_index(&l).and_then(|li| stub.step(s, li)) {
                None => return Ok(fail(witness(&nodes, Some(i), l), nodes.len())),
                Some(s2) => {
                    if seen.insert((encode_state(&q2), s2)) {
                        nodes.push((q2, s2, Some(i), Some(l)));
                        queue.push_back((nodes.len() - 1, depth + 1));
                    }
                }
            }
        }
    }
    Ok(ConsistencyReport { status: ConsistencyStatus::Pass, witness: None, explored: nodes.len(), k })
}

/// A word of length at most `k` accepted by `a` but not by `b`, if any.
pub fn bounded_inclusion(a: &InterfaceStub, b: &InterfaceStub, k: usize) -> Option<Vec<Letter>> {
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    queue.push_back((0usize, 0usize, Vec::<Letter>::new()));
    seen.insert((0, 0));
    while let Some((sa, sb, word)) = queue.pop_front() {
        if word.len() >= k {
            continue;
        }
        for t in a.outgoing(sa) {
            let l = &a.letters[t.letter];
            let mut w = word.clone();
            w.push(l.clone());
            match b.letter_index(l).and_then(|li| b.step(sb, li)) {
                None => return Some(w),
                Some(sb2) => {
                    if seen.insert((t.to, sb2)) {
                        queue.push_back((t.to, sb2, w));
                    }
                }
            }
        }
    }
    None
}
