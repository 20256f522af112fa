//! Identifier mangling.
//!
//! A qualified source name `inst.member` becomes `inst__member`. Inside a
//! component, an underscore is kept as is when it sits between two
//! alphanumerics and is not followed by `0`; every other underscore is
//! written `_0`. A component that starts with an underscore gets a leading
//! `0`. Encoded components therefore never contain `__` and never start or
//! end with `_`, so splitting on `__` recovers them and the scheme is
//! injective. Decoding drops a leading `0` and reads `_0` as `_`.

use std::collections::BTreeSet;

/// Encodes one name component.
pub fn escape_component(c: &str) -> String {
    let b = c.as_bytes();
    let mut out = String::with_capacity(c.len() + 2);
    if b.first() == Some(&b'_') {
        out.push('0');
    }
    for (i, ch) in c.chars().enumerate() {
        if ch != '_' {
            out.push(ch);
            continue;
        }
        let prev_ok = i > 0 && b[i - 1] != b'_';
        let next_ok = i + 1 < b.len() && b[i + 1] != b'_' && b[i + 1] != b'0';
        out.push_str(if prev_ok && next_ok { "_" } else { "_0" });
    }
    out
}

/// Inverse of [`escape_component`].
pub fn unescape_component(e: &str) -> String {
    let body = e.strip_prefix('0').unwrap_or(e);
    body.replace("_0", "_")
}

/// `a.b_c` -> `a__b_c`.
pub fn mangle(qualified: &str) -> String {
    qualified.split('.').map(escape_component).collect::<Vec<_>>().join("__")
}

pub fn demangle(m: &str) -> String {
    m.split("__").map(unescape_component).collect::<Vec<_>>().join(".")
}

/// Hands out Promela identifiers, never the same one twice. A derived name
/// (a mangled base plus a fixed suffix) that is already taken gets a
/// numbered `_dN` suffix; this only happens when a source name ends in one
/// of the emitter's own suffixes.
#[derive(Default)]
pub struct Names {
    taken: BTreeSet<String>,
}

impl Names {
    pub fn claim(&mut self, want: String) -> String {
        if self.taken.insert(want.clone()) {
            return want;
        }
        let mut n = 1;
        loop {
            let c = format!("{want}_d{n}");
            if self.taken.insert(c.clone()) {
                return c;
            }
            n += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_names_keep_their_underscores() {
        assert_eq!(mangle("a.s"), "a__s");
        assert_eq!(mangle("a.in_cs"), "a__in_cs");
    }

    #[test]
    fn adversarial_pairs_do_not_collide() {
        let pairs = [("a_b.c", "a.b_c"), ("a_.b", "a._b"), ("a__b.c", "a.b__c"), ("x_0.y", "x.y_0"), ("a._0", "a.__")];
        for (l, r) in pairs {
            assert_ne!(mangle(l), mangle(r), "{l} vs {r}");
        }
        assert_eq!(mangle("a_b.c"), "a_b__c");
        assert_eq!(mangle("a.b_c"), "a__b_c");
    }

    #[test]
    fn demangle_inverts_mangle() {
        for n in ["a.b", "a_.b", "_x.y_", "p__q.r", "x_0.y", "m.a_b_c", "k.___"] {
            assert_eq!(demangle(&mangle(n)), n, "{n} -> {}", mangle(n));
        }
    }

    proptest::proptest! {
        #[test]
        fn mangling_is_injective_on_identifiers(
            a in "[A-Za-z_][A-Za-z0-9_]{0,6}(\\.[A-Za-z_][A-Za-z0-9_]{0,6}){0,2}",
            b in "[A-Za-z_][A-Za-z0-9_]{0,6}(\\.[A-Za-z_][A-Za-z0-9_]{0,6}){0,2}",
        ) {
            proptest::prop_assert_eq!(demangle(&mangle(&a)), a.clone());
            if a != b {
                proptest::prop_assert_ne!(mangle(&a), mangle(&b));
            }
        }
    }

    #[test]
    fn claims_are_unique() {
        let mut n = Names::default();
        assert_eq!(n.claim("a__s_cur".into()), "a__s_cur");
        assert_eq!(n.claim("a__s_cur".into()), "a__s_cur_d1");
        assert_eq!(n.claim("a__s_cur".into()), "a__s_cur_d2");
    }
}
