//! Direct evaluation of LTL on ultimately periodic words. No automata.

use super::LtlFormula as L;
use super::LtlFormula;

/// Truth of `f` on `prefix · cycle^ω`, where each letter is the vector of
/// atom truth values. `cycle` must be nonempty.
pub fn eval_ltl_on_lasso(f: &LtlFormula, prefix: &[Vec<bool>], cycle: &[Vec<bool>]) -> bool {
    assert!(!cycle.is_empty(), "lasso loop must be nonempty");
    let word: Vec<&Vec<bool>> = prefix.iter().chain(cycle.iter()).collect();
    let n = word.len();
    let succ = |i: usize| if i + 1 < n { i + 1 } else { prefix.len() };
    eval(f, &word, &succ)[0]
}

/// Same as [`eval_ltl_on_lasso`] with the word given as one vector and the
/// loop start index.
pub fn eval_on_valuations(f: &LtlFormula, word: &[Vec<bool>], loop_start: usize) -> bool {
    eval_ltl_on_lasso(f, &word[..loop_start], &word[loop_start..])
}

fn eval(f: &LtlFormula, word: &[&Vec<bool>], succ: &dyn Fn(usize) -> usize) -> Vec<bool> {
    let n = word.len();
    match f {
        L::True => vec![true; n],
        L::False => vec![false; n],
        L::Atom(a) => word.iter().map(|v| v[*a]).collect(),
        L::Not(a) => eval(a, word, succ).into_iter().map(|b| !b).collect(),
        L::And(a, b) => {
            let (x, y) = (eval(a, word, succ), eval(b, word, succ));
            x.iter().zip(&y).map(|(p, q)| *p && *q).collect()
        }
        L::Or(a, b) => {
            let (x, y) = (eval(a, word, succ), eval(b, word, succ));
            x.iter().zip(&y).map(|(p, q)| *p || *q).collect()
        }
        L::Next(a) => {
            let x = eval(a, word, succ);
            (0..n).map(|i| x[succ(i)]).collect()
        }
        L::Finally(a) => until(&vec![true; n], &eval(a, word, succ), succ),
        L::Globally(a) => release(&vec![false; n], &eval(a, word, succ), succ),
        L::Until(a, b) => until(&eval(a, word, succ), &eval(b, word, succ), succ),
        L::Release(a, b) => release(&eval(a, word, succ), &eval(b, word, succ), succ),
    }
}

/// Least fixpoint of `v = q || (p && X v)`.
fn until(p: &[bool], q: &[bool], succ: &dyn Fn(usize) -> usize) -> Vec<bool> {
    let mut v = vec![false; p.len()];
    loop {
        let mut changed = false;
        for i in (0..p.len()).rev() {
            let nv = q[i] || (p[i] && v[succ(i)]);
            if nv != v[i] {
                v[i] = nv;
                changed = true;
            }
        }
        if !changed {
            return v;
        }
    }
}

/// Greatest fixpoint of `v = q && (p || X v)`.
fn release(p: &[bool], q: &[bool], succ: &dyn Fn(usize) -> usize) -> Vec<bool> {
    let mut v = vec![true; p.len()];
    loop {
        let mut changed = false;
        for i in (0..p.len()).rev() {
            let nv = q[i] && (p[i] || v[succ(i)]);
            if nv != v[i] {
                v[i] = nv;
                changed = true;
            }
        }
        if !changed {
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(bits: &[&[bool]]) -> Vec<Vec<bool>> {
        bits.iter().map(|b| b.to_vec()).collect()
    }

    #[test]
    fn globally_on_constant_loop() {
        assert!(eval_ltl_on_lasso(&L::globally(L::atom(0)), &[], &w(&[&[true]])));
    }

    #[test]
    fn finally_never_satisfied() {
        assert!(!eval_ltl_on_lasso(&L::finally(L::atom(0)), &w(&[&[false]]), &w(&[&[false]])));
    }

    #[test]
    fn until_across_prefix_and_loop() {
        // p U q on [p] · [q]^ω
        let f = L::until(L::atom(0), L::atom(1));
        assert!(eval_ltl_on_lasso(&f, &w(&[&[true, false]]), &w(&[&[false, true]])));
        // and it fails if p lapses before q arrives
        assert!(!eval_ltl_on_lasso(&f, &w(&[&[false, false]]), &w(&[&[false, true]])));
    }

    #[test]
    fn next_wraps_into_the_loop() {
        // positions: 0 ¬p | 1 ¬p, 2 p, then back to 1
        let (pre, cyc) = (w(&[&[false]]), w(&[&[false], &[true]]));
        assert!(eval_ltl_on_lasso(&L::next(L::next(L::atom(0))), &pre, &cyc));
        let x3 = L::next(L::next(L::next(L::atom(0))));
        assert!(!eval_ltl_on_lasso(&x3, &pre, &cyc));
    }

    #[test]
    fn infinitely_often_needs_the_loop() {
        let gf = L::globally(L::finally(L::atom(0)));
        assert!(eval_ltl_on_lasso(&gf, &w(&[&[true]]), &w(&[&[false], &[true]])));
        assert!(!eval_ltl_on_lasso(&gf, &w(&[&[true]]), &w(&[&[false]])));
    }
}
