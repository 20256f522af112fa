//! Stub files: versioned JSON.

use serde_json::{json, Value as Json};

use super::{
    IntegrationError, InterfaceAlphabet, InterfaceStub, Letter, Obligation, StepKind, StubTransition, STUB_FORMAT_VERSION,
};

impl InterfaceStub {
    pub fn to_json(&self) -> Json {
        let letters: Vec<Json> = self
            .letters
            .iter()
            .map(|l| {
                let values: Vec<Json> = self.alphabet.ports.iter().zip(&l.values).map(|(p, v)| p.ty.to_json(*v)).collect();
                json!({"kind": l.kind, "values": values, "obligation": obligation_json(l.obligation)})
            })
            .collect();
        json!({
            "format_version": STUB_FORMAT_VERSION,
            "component": self.component,
            "module": self.module,
            "k": self.k,
            "h": self.h,
            "toolchain_version": self.toolchain_version,
            "alphabet": self.alphabet,
            "fingerprint": self.fingerprint,
            "letters": letters,
            "states": self.states,
            "transitions": self.transitions,
            "saturated": self.saturated,
        })
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("stub serializes");
        s.push('\n');
        s
    }

    pub fn from_json(j: &Json) -> Result<InterfaceStub, IntegrationError> {
        let bad = |m: &str| IntegrationError::Format(m.to_string());
        let version = j.get("format_version").and_then(Json::as_u64).ok_or_else(|| bad("missing format_version"))?;
        if version != STUB_FORMAT_VERSION as u64 {
            return Err(bad(&format!("unsupported format_version {version} (expected {STUB_FORMAT_VERSION})")));
        }
        let str_field = |k: &str| j.get(k).and_then(Json::as_str).map(str::to_string).ok_or_else(|| bad(&format!("missing {k}")));
        let usize_field = |k: &str| j.get(k).and_then(Json::as_u64).map(|v| v as usize).ok_or_else(|| bad(&format!("missing {k}")));
        let alphabet: InterfaceAlphabet = serde_json::from_value(j.get("alphabet").cloned().ok_or_else(|| bad("missing alphabet"))?)
            .map_err(|e| bad(&format!("alphabet: {e}")))?;
        let mut letters = Vec::new();
        for (i, l) in j.get("letters").and_then(Json::as_array).ok_or_else(|| bad("missing letters"))?.iter().enumerate() {
            let kind: StepKind = serde_json::from_value(l.get("kind").cloned().unwrap_or(Json::Null))
                .map_err(|_| bad(&format!("letter {i}: bad kind")))?;
            let vals = l.get("values").and_then(Json::as_array).ok_or_else(|| bad(&format!("letter {i}: missing values")))?;
            if vals.len() != alphabet.ports.len() {
                return Err(bad(&format!("letter {i}: {} values for {} ports", vals.len(), alphabet.ports.len())));
            }
            let mut values = Vec::with_capacity(vals.len());
            for (p, v) in alphabet.ports.iter().zip(vals) {
                values.push(p.ty.from_json(v).ok_or_else(|| bad(&format!("letter {i}: value {v} is not a {}", p.ty)))?);
            }
            let obligation = parse_obligation(l.get("obligation")).ok_or_else(|| bad(&format!("letter {i}: bad obligation")))?;
            letters.push(Letter { values, kind, obligation });
        }
        let states: Vec<Vec<usize>> =
            serde_json::from_value(j.get("states").cloned().unwrap_or(Json::Null)).map_err(|e| bad(&format!("states: {e}")))?;
        let transitions: Vec<StubTransition> = serde_json::from_value(j.get("transitions").cloned().unwrap_or(Json::Null))
            .map_err(|e| bad(&format!("transitions: {e}")))?;
        if states.is_empty() {
            return Err(bad("no states"));
        }
        let mut det = std::collections::HashMap::new();
        for t in &transitions {
            if t.from >= states.len() || t.to >= states.len() || t.letter >= letters.len() {
                return Err(bad(&format!("transition {}-{}->{} out of range", t.from, t.letter, t.to)));
            }
            if det.insert((t.from, t.letter), t.to).is_some_and(|to| to != t.to) {
                return Err(bad(&format!("nondeterministic on state {} letter {}", t.from, t.letter)));
            }
        }
        let saturated = j.get("saturated").and_then(Json::as_bool).unwrap_or(false);
        let mut s = InterfaceStub::new(
            str_field("component")?,
            str_field("module")?,
            usize_field("k")?,
            usize_field("h")?,
            alphabet,
            letters,
            states,
            transitions,
            saturated,
        );
        s.toolchain_version = str_field("toolchain_version")?;
        // keep the recorded fingerprint so staleness is detectable
        s.fingerprint = str_field("fingerprint")?;
        Ok(s)
    }

    pub fn from_json_str(text: &str) -> Result<InterfaceStub, IntegrationError> {
        let j: Json = serde_json::from_str(text).map_err(|e| IntegrationError::Format(e.to_string()))?;
        InterfaceStub::from_json(&j)
    }
}

fn obligation_json(o: Obligation) -> Json {
    match o {
        Obligation::Busy => json!("busy"),
        Obligation::Quiet => json!("quiet"),
        Obligation::Timer(dt) => json!({"timer": dt}),
    }
}

fn parse_obligation(j: Option<&Json>) -> Option<Obligation> {
    match j? {
        Json::String(s) if s == "busy" => Some(Obligation::Busy),
        Json::String(s) if s == "quiet" => Some(Obligation::Quiet),
        Json::Object(m) => m.get("timer")?.as_u64().and_then(|v| u32::try_from(v).ok()).map(Obligation::Timer),
        _ => None,
    }
}
