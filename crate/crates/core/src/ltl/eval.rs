use super::{Formula, LtlError, Valuation};

/// Direct finite-trace satisfaction of `formula` at `position`.
///
/// Temporal operators are read off their quantifier definitions over the
/// positions `position..trace.len()`; nothing here shares code with
/// progression.
pub fn evaluate<A, V: Valuation<A>>(
    formula: &Formula<A>,
    trace: &[V],
    position: usize,
) -> Result<bool, LtlError> {
    if position >= trace.len() {
        return Err(LtlError::PositionOutOfRange {
            position,
            len: trace.len(),
        });
    }
    Ok(sat(formula, trace, position))
}

fn sat<A, V: Valuation<A>>(f: &Formula<A>, trace: &[V], i: usize) -> bool {
    use Formula::*;
    let n = trace.len();
    match f {
        True => true,
        False => false,
        Atom(a) => trace[i].holds(a),
        Not(x) => !sat(x, trace, i),
        And(l, r) => sat(l, trace, i) && sat(r, trace, i),
        Or(l, r) => sat(l, trace, i) || sat(r, trace, i),
        Next(x) => i + 1 < n && sat(x, trace, i + 1),
        WeakNext(x) => i + 1 >= n || sat(x, trace, i + 1),
        // exists j >= i: r at j, and l at every k in [i, j)
        Until(l, r) => (i..n).any(|j| sat(r, trace, j) && (i..j).all(|k| sat(l, trace, k))),
        // for all j >= i: r at j, or l at some k in [i, j)
        Release(l, r) => (i..n).all(|j| sat(r, trace, j) || (i..j).any(|k| sat(l, trace, k))),
        Eventually(x) => (i..n).any(|j| sat(x, trace, j)),
        Always(x) => (i..n).all(|j| sat(x, trace, j)),
    }
}
