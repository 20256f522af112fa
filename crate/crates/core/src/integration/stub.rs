//! Interface alphabets and stub automata.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::scl::ast::Dir;
use crate::scl::design::{Design, InstId, Ref};
use crate::scl::types::{ScalarType, Value};

pub const STUB_FORMAT_VERSION: u32 = 1;

/// Which scheduler boundary produced a letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Init,
    Delta,
    /// Time advanced while the component's own timer was not yet due.
    Time,
    /// Time advanced to the component's own earliest timer.
    Timeout,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepKind::Init => "init",
            StepKind::Delta => "delta",
            StepKind::Time => "time",
            StepKind::Timeout => "timeout",
        })
    }
}

/// What the component still has scheduled once its processes have run
/// after a boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Obligation {
    /// Pending updates or delta notifications: the next step is a delta.
    Busy,
    /// Earliest timed wake-up, relative to the current time.
    Timer(u32),
    /// Nothing scheduled; only a change or event can wake it.
    Quiet,
}

impl fmt::Display for Obligation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Obligation::Busy => f.write_str("busy"),
            Obligation::Timer(dt) => write!(f, "timer({dt})"),
            Obligation::Quiet => f.write_str("quiet"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    /// One value per alphabet port, in alphabet order.
    pub values: Vec<Value>,
    pub kind: StepKind,
    pub obligation: Obligation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphabetPort {
    pub name: String,
    pub dir: Dir,
    #[serde(rename = "type")]
    pub ty: ScalarType,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceAlphabet {
    pub ports: Vec<AlphabetPort>,
}

impl InterfaceAlphabet {
    /// Ports of one instance, in declaration order.
    pub fn of_instance(d: &Design, inst: InstId) -> InterfaceAlphabet {
        InterfaceAlphabet {
            ports: d.instances[inst]
                .ports
                .iter()
                .map(|p| AlphabetPort { name: p.name.clone(), dir: p.dir, ty: p.ty.clone() })
                .collect(),
        }
    }

    /// SHA-256 over port names, directions and types.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.ports {
            h.update(p.name.as_bytes());
            h.update([0]);
            h.update(p.dir.to_string().as_bytes());
            h.update([0]);
            h.update(p.ty.to_string().as_bytes());
            h.update([0xff]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn render_letter(&self, l: &Letter) -> String {
        let ports: Vec<String> =
            self.ports.iter().zip(&l.values).map(|(p, v)| format!("{}={}", p.name, p.ty.render(*v))).collect();
        format!("{}[{}]/{}", l.kind, ports.join(","), l.obligation)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StubTransition {
    pub from: usize,
    pub letter: usize,
    pub to: usize,
}

/// Deterministic automaton over interface letters. State 0 is the initial
/// state (empty history); every other state is a window of up to `h` letters.
#[derive(Clone, Debug)]
pub struct InterfaceStub {
    pub component: String,
    pub module: String,
    pub k: usize,
    pub h: usize,
    pub toolchain_version: String,
    pub alphabet: InterfaceAlphabet,
    pub fingerprint: String,
    pub letters: Vec<Letter>,
    /// History window of each state, as letter indices.
    pub states: Vec<Vec<usize>>,
    pub transitions: Vec<StubTransition>,
    /// Every discovered state was expanded within the learning depth.
    pub saturated: bool,
    out: Vec<Vec<usize>>,
    index: HashMap<(usize, usize), usize>,
}

impl InterfaceStub {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        component: String,
        module: String,
        k: usize,
        h: usize,
        alphabet: InterfaceAlphabet,
        letters: Vec<Letter>,
        states: Vec<Vec<usize>>,
        mut transitions: Vec<StubTransition>,
        saturated: bool,
    ) -> InterfaceStub {
        transitions.sort();
        transitions.dedup();
        let fingerprint = alphabet.fingerprint();
        let mut s = InterfaceStub {
            component,
            module,
            k,
            h,
            toolchain_version: crate::VERSION.to_string(),
            alphabet,
            fingerprint,
            letters,
            states,
            transitions,
            saturated,
            out: vec![],
            index: HashMap::new(),
        };
        s.reindex();
        s
    }

    pub(crate) fn reindex(&mut self) {
        self.out = vec![Vec::new(); self.states.len()];
        self.index.clear();
        for (i, t) in self.transitions.iter().enumerate() {
            self.out[t.from].push(i);
            self.index.insert((t.from, t.letter), t.to);
        }
    }

    pub fn step(&self, state: usize, letter: usize) -> Option<usize> {
        self.index.get(&(state, letter)).copied()
    }

    /// Outgoing transitions of a state.
    pub fn outgoing(&self, state: usize) -> impl Iterator<Item = &StubTransition> + '_ {
        self.out[state].iter().map(move |&i| &self.transitions[i])
    }

    pub fn letter_index(&self, l: &Letter) -> Option<usize> {
        self.letters.iter().position(|x| x == l)
    }

    /// Removes one transition (used to build corrupted fixtures).
    pub fn remove_transition(&mut self, t: StubTransition) -> bool {
        let before = self.transitions.len();
        self.transitions.retain(|x| *x != t);
        self.reindex();
        before != self.transitions.len()
    }

    /// Adds a transition, interning the letter if new.
    pub fn add_transition(&mut self, from: usize, letter: Letter, to: usize) {
        let li = match self.letter_index(&letter) {
            Some(i) => i,
            None => {
                self.letters.push(letter);
                self.letters.len() - 1
            }
        };
        self.transitions.push(StubTransition { from, letter: li, to });
        self.transitions.sort();
        self.transitions.dedup();
        self.reindex();
    }

    /// Accepts a letter sequence iff every step has a transition.
    pub fn accepts(&self, word: &[Letter]) -> bool {
        let mut s = 0;
        for l in word {
            match self.letter_index(l).and_then(|li| self.step(s, li)) {
                Some(n) => s = n,
                None => return false,
            }
        }
        true
    }
}

/// A stub placed into a composed design.
#[derive(Clone, Debug)]
pub struct StubBinding {
    pub instance: InstId,
    pub stub: Arc<InterfaceStub>,
    /// Storage for each alphabet port: in-ports read a signal or an input,
    /// out-ports are signals driven by the stub.
    pub ports: Vec<Ref>,
}

impl StubBinding {
    pub fn is_out(&self, port: usize) -> bool {
        self.stub.alphabet.ports[port].dir == Dir::Out
    }
}
