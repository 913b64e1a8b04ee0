use super::{Formula, Valuation};

/// Progress `formula` through one label.
///
/// The result `r` satisfies: for every non-empty suffix `tau`,
/// `label . tau |= formula` iff `tau |= r`, and `end_check(r)` decides the
/// one-letter trace `[label]`. The result is in negation normal form and
/// simplified.
pub fn progress<A: Clone + Ord, V: Valuation<A>>(formula: &Formula<A>, label: &V) -> Formula<A> {
    progress_nnf(&formula.nnf().simplify(), label)
}

/// [`progress`] for a formula already in simplified negation normal form.
pub fn progress_nnf<A: Clone + Ord, V: Valuation<A>>(formula: &Formula<A>, label: &V) -> Formula<A> {
    step(formula, label).simplify()
}

/// `F true`: the remaining suffix is non-empty.
fn more<A>() -> Formula<A> {
    Formula::eventually(Formula::True)
}

/// `G false`: the remaining suffix is empty.
fn ended<A>() -> Formula<A> {
    Formula::always(Formula::False)
}

fn step<A: Clone + Ord, V: Valuation<A>>(f: &Formula<A>, label: &V) -> Formula<A> {
    use Formula::*;
    match f {
        True => True,
        False => False,
        Atom(a) => {
            if label.holds(a) {
                True
            } else {
                False
            }
        }
        Not(x) => Formula::not(step(x, label)),
        And(l, r) => Formula::and(step(l, label), step(r, label)),
        Or(l, r) => Formula::or(step(l, label), step(r, label)),
        Next(x) => Formula::and(more(), (**x).clone()),
        WeakNext(x) => Formula::or(ended(), (**x).clone()),
        Until(l, r) => Formula::or(step(r, label), Formula::and(step(l, label), f.clone())),
        Release(l, r) => Formula::and(step(r, label), Formula::or(step(l, label), f.clone())),
        Eventually(x) => Formula::or(step(x, label), f.clone()),
        Always(x) => Formula::and(step(x, label), f.clone()),
    }
}

/// Truth of a negation-normal-form residue on the empty suffix.
///
/// Literals, `Next`, `Until` and `Eventually` need a position and fail;
/// `WeakNext`, `Release` and `Always` hold vacuously. Formulas not in
/// negation normal form are normalized first.
pub fn end_check<A: Clone + Ord>(formula: &Formula<A>) -> bool {
    fn go<A>(f: &Formula<A>) -> bool {
        use Formula::*;
        match f {
            True => true,
            False => false,
            Atom(_) | Not(_) => false,
            And(l, r) => go(l) && go(r),
            Or(l, r) => go(l) || go(r),
            Next(_) | Until(..) | Eventually(_) => false,
            WeakNext(_) | Release(..) | Always(_) => true,
        }
    }
    if is_nnf(formula) {
        go(formula)
    } else {
        go(&formula.nnf())
    }
}

fn is_nnf<A>(f: &Formula<A>) -> bool {
    use Formula::*;
    match f {
        True | False | Atom(_) => true,
        Not(x) => matches!(**x, Atom(_)),
        Next(x) | WeakNext(x) | Eventually(x) | Always(x) => is_nnf(x),
        And(l, r) | Or(l, r) | Until(l, r) | Release(l, r) => is_nnf(l) && is_nnf(r),
    }
}
