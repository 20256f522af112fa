use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{Literal, TypeExpr};

/// All runtime values are integers: `false`/`true` are 0/1 and enum values
/// are label indices.
pub type Value = i64;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScalarType {
    Bool,
    Int { lo: i64, hi: i64 },
    Enum { labels: Vec<String> },
}

impl ScalarType {
    pub fn from_expr(t: &TypeExpr) -> ScalarType {
        match t {
            TypeExpr::Bool => ScalarType::Bool,
            TypeExpr::Int { lo, hi } => ScalarType::Int { lo: *lo, hi: *hi },
            TypeExpr::Enum(labels) => ScalarType::Enum { labels: labels.clone() },
        }
    }

    pub fn cardinality(&self) -> u64 {
        match self {
            ScalarType::Bool => 2,
            ScalarType::Int { lo, hi } => (*hi as i128 - *lo as i128 + 1).max(0) as u64,
            ScalarType::Enum { labels } => labels.len() as u64,
        }
    }

    pub fn min(&self) -> Value {
        match self {
            ScalarType::Int { lo, .. } => *lo,
            _ => 0,
        }
    }

    pub fn max(&self) -> Value {
        match self {
            ScalarType::Bool => 1,
            ScalarType::Int { hi, .. } => *hi,
            ScalarType::Enum { labels } => labels.len() as Value - 1,
        }
    }

    pub fn contains(&self, v: Value) -> bool {
        self.min() <= v && v <= self.max()
    }

    /// All values in ascending order.
    pub fn values(&self) -> impl Iterator<Item = Value> {
        self.min()..=self.max()
    }

    /// Resolves a literal against this type. Returns `None` when the literal
    /// is of the wrong kind or out of range.
    pub fn literal_value(&self, lit: &Literal) -> Option<Value> {
        let v = match (self, lit) {
            (ScalarType::Bool, Literal::Bool(b)) => *b as Value,
            (ScalarType::Int { .. }, Literal::Int(n)) => *n,
            (ScalarType::Enum { labels }, Literal::Label(l)) => {
                labels.iter().position(|x| x == l)? as Value
            }
            _ => return None,
        };
        self.contains(v).then_some(v)
    }

    /// Text form of a value: `true`, `3`, or an enum label.
    pub fn render(&self, v: Value) -> String {
        match self {
            ScalarType::Bool => (v != 0).to_string(),
            ScalarType::Int { .. } => v.to_string(),
            ScalarType::Enum { labels } => {
                labels.get(v as usize).cloned().unwrap_or_else(|| format!("#{v}"))
            }
        }
    }

    /// Inverse of [`ScalarType::render`].
    pub fn parse_rendered(&self, s: &str) -> Option<Value> {
        let v = match self {
            ScalarType::Bool => match s {
                "true" => 1,
                "false" => 0,
                _ => return None,
            },
            ScalarType::Int { .. } => s.parse().ok()?,
            ScalarType::Enum { labels } => labels.iter().position(|l| l == s)? as Value,
        };
        self.contains(v).then_some(v)
    }

    pub fn to_json(&self, v: Value) -> serde_json::Value {
        match self {
            ScalarType::Bool => serde_json::Value::Bool(v != 0),
            ScalarType::Int { .. } => serde_json::Value::from(v),
            ScalarType::Enum { .. } => serde_json::Value::String(self.render(v)),
        }
    }

    pub fn from_json(&self, j: &serde_json::Value) -> Option<Value> {
        let v = match (self, j) {
            (ScalarType::Bool, serde_json::Value::Bool(b)) => *b as Value,
            (ScalarType::Int { .. }, serde_json::Value::Number(n)) => n.as_i64()?,
            (ScalarType::Enum { .. }, serde_json::Value::String(s)) => {
                return self.parse_rendered(s)
            }
            _ => return None,
        };
        self.contains(v).then_some(v)
    }
}

impl fmt::Display for ScalarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarType::Bool => f.write_str("bool"),
            ScalarType::Int { lo, hi } => write!(f, "int[{lo}..{hi}]"),
            ScalarType::Enum { labels } => write!(f, "enum {{ {} }}", labels.join(", ")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinalities() {
        assert_eq!(ScalarType::Bool.cardinality(), 2);
        assert_eq!(ScalarType::Int { lo: -2, hi: 2 }.cardinality(), 5);
        assert_eq!(ScalarType::Enum { labels: vec!["A".into()] }.cardinality(), 1);
    }

    #[test]
    fn literal_range_check() {
        let t = ScalarType::Int { lo: 0, hi: 3 };
        assert_eq!(t.literal_value(&Literal::Int(3)), Some(3));
        assert_eq!(t.literal_value(&Literal::Int(7)), None);
        assert_eq!(t.literal_value(&Literal::Bool(true)), None);
    }

    #[test]
    fn render_and_parse_agree() {
        let e = ScalarType::Enum { labels: vec!["IDLE".into(), "BUSY".into()] };
        for v in e.values() {
            assert_eq!(e.parse_rendered(&e.render(v)), Some(v));
            assert_eq!(e.from_json(&e.to_json(v)), Some(v));
        }
    }
}
