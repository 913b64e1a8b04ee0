//! Finite-trace linear temporal logic.
//!
//! Formulas are interpreted over non-empty finite traces with a strong
//! `Next`. Three routes to the same semantics live here: direct evaluation
//! ([`evaluate`]), progression folded over a trace and closed with
//! [`end_check`], and the deterministic acceptor produced by [`compile`].
//!
//! Progression works on negation normal form. A residue formula describes the
//! obligation on the *remaining* suffix, which may be empty; [`end_check`]
//! decides a residue on the empty suffix.

mod automaton;
mod eval;
mod progress;

use std::collections::{BTreeSet, HashSet};
use std::hash::Hash;

use thiserror::Error;

use crate::sexpr::{self, SExpr};

pub use automaton::{compile, compile_with_bound, Automaton, StateId, DEFAULT_STATE_BOUND};
pub use eval::evaluate;
pub use progress::{end_check, progress, progress_nnf};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula<A> {
    True,
    False,
    Atom(A),
    Not(Box<Formula<A>>),
    And(Box<Formula<A>>, Box<Formula<A>>),
    Or(Box<Formula<A>>, Box<Formula<A>>),
    /// Strong next: fails at the last position.
    Next(Box<Formula<A>>),
    /// Weak next: holds at the last position.
    WeakNext(Box<Formula<A>>),
    Until(Box<Formula<A>>, Box<Formula<A>>),
    Release(Box<Formula<A>>, Box<Formula<A>>),
    Eventually(Box<Formula<A>>),
    Always(Box<Formula<A>>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LtlError {
    #[error("position {position} outside trace of length {len}")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("automaton exceeds the state bound of {bound}")]
    StateBound { bound: usize },
    #[error("formula mentions {0} distinct atoms; at most 24 are supported")]
    TooManyAtoms(usize),
    #[error(transparent)]
    Syntax(#[from] sexpr::SyntaxError),
    #[error("{pos}: {message}")]
    Parse { pos: sexpr::Pos, message: String },
}

/// Truth assignment for atoms at one trace position.
pub trait Valuation<A> {
    fn holds(&self, atom: &A) -> bool;
}

impl<A: Ord> Valuation<A> for BTreeSet<A> {
    fn holds(&self, atom: &A) -> bool {
        self.contains(atom)
    }
}

impl<A: Hash + Eq> Valuation<A> for HashSet<A> {
    fn holds(&self, atom: &A) -> bool {
        self.contains(atom)
    }
}

impl<A, V: Valuation<A> + ?Sized> Valuation<A> for &V {
    fn holds(&self, atom: &A) -> bool {
        (**self).holds(atom)
    }
}

/// Adapts a predicate into a [`Valuation`].
pub struct FnValuation<F>(pub F);

impl<A, F: Fn(&A) -> bool> Valuation<A> for FnValuation<F> {
    fn holds(&self, atom: &A) -> bool {
        (self.0)(atom)
    }
}

impl<A> Formula<A> {
    pub fn atom(a: A) -> Self {
        Formula::Atom(a)
    }
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Self) -> Self {
        Formula::Not(Box::new(f))
    }
    pub fn and(l: Self, r: Self) -> Self {
        Formula::And(Box::new(l), Box::new(r))
    }
    pub fn or(l: Self, r: Self) -> Self {
        Formula::Or(Box::new(l), Box::new(r))
    }
    pub fn implies(l: Self, r: Self) -> Self {
        Formula::or(Formula::not(l), r)
    }
    pub fn next(f: Self) -> Self {
        Formula::Next(Box::new(f))
    }
    pub fn weak_next(f: Self) -> Self {
        Formula::WeakNext(Box::new(f))
    }
    pub fn until(l: Self, r: Self) -> Self {
        Formula::Until(Box::new(l), Box::new(r))
    }
    pub fn release(l: Self, r: Self) -> Self {
        Formula::Release(Box::new(l), Box::new(r))
    }
    pub fn eventually(f: Self) -> Self {
        Formula::Eventually(Box::new(f))
    }
    pub fn always(f: Self) -> Self {
        Formula::Always(Box::new(f))
    }

    /// `a W b`, built from core operators as `(a U b) | G a`.
    pub fn weak_until(a: Self, b: Self) -> Self
    where
        A: Clone,
    {
        Formula::or(Formula::until(a.clone(), b), Formula::always(a))
    }

    /// Conjunction of all items; `True` when empty.
    pub fn all(items: impl IntoIterator<Item = Self>) -> Self {
        let mut items: Vec<_> = items.into_iter().collect();
        let Some(mut acc) = items.pop() else {
            return Formula::True;
        };
        while let Some(f) = items.pop() {
            acc = Formula::and(f, acc);
        }
        acc
    }

    /// Disjunction of all items; `False` when empty.
    pub fn any(items: impl IntoIterator<Item = Self>) -> Self {
        let mut items: Vec<_> = items.into_iter().collect();
        let Some(mut acc) = items.pop() else {
            return Formula::False;
        };
        while let Some(f) = items.pop() {
            acc = Formula::or(f, acc);
        }
        acc
    }

    pub fn depth(&self) -> usize {
        use Formula::*;
        match self {
            True | False | Atom(_) => 0,
            Not(f) | Next(f) | WeakNext(f) | Eventually(f) | Always(f) => 1 + f.depth(),
            And(l, r) | Or(l, r) | Until(l, r) | Release(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    pub fn atoms(&self) -> BTreeSet<A>
    where
        A: Ord + Clone,
    {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |a| {
            out.insert(a.clone());
        });
        out
    }

    pub fn visit_atoms<'a>(&'a self, f: &mut impl FnMut(&'a A)) {
        use Formula::*;
        match self {
            True | False => {}
            Atom(a) => f(a),
            Not(x) | Next(x) | WeakNext(x) | Eventually(x) | Always(x) => x.visit_atoms(f),
            And(l, r) | Or(l, r) | Until(l, r) | Release(l, r) => {
                l.visit_atoms(f);
                r.visit_atoms(f);
            }
        }
    }

    /// Rename atoms, keeping the structure.
    pub fn map_atoms<B>(&self, f: &mut impl FnMut(&A) -> B) -> Formula<B> {
        use Formula::*;
        match self {
            True => True,
            False => False,
            Atom(a) => Atom(f(a)),
            Not(x) => Formula::not(x.map_atoms(f)),
            Next(x) => Formula::next(x.map_atoms(f)),
            WeakNext(x) => Formula::weak_next(x.map_atoms(f)),
            Eventually(x) => Formula::eventually(x.map_atoms(f)),
            Always(x) => Formula::always(x.map_atoms(f)),
            And(l, r) => Formula::and(l.map_atoms(f), r.map_atoms(f)),
            Or(l, r) => Formula::or(l.map_atoms(f), r.map_atoms(f)),
            Until(l, r) => Formula::until(l.map_atoms(f), r.map_atoms(f)),
            Release(l, r) => Formula::release(l.map_atoms(f), r.map_atoms(f)),
        }
    }

    /// Rewrite derived operators into `{atom, true, not, and, next, until}`:
    /// `F x = true U x`, `G x = !F !x`, `a | b = !(!a & !b)`,
    /// `N x = !X !x`, `a R b = !(!a U !b)`.
    pub fn to_core(&self) -> Formula<A>
    where
        A: Clone,
    {
        use Formula::*;
        let n = Formula::not;
        match self {
            True => True,
            False => n(True),
            Atom(a) => Atom(a.clone()),
            Not(x) => n(x.to_core()),
            And(l, r) => Formula::and(l.to_core(), r.to_core()),
            Or(l, r) => n(Formula::and(n(l.to_core()), n(r.to_core()))),
            Next(x) => Formula::next(x.to_core()),
            WeakNext(x) => n(Formula::next(n(x.to_core()))),
            Until(l, r) => Formula::until(l.to_core(), r.to_core()),
            Release(l, r) => n(Formula::until(n(l.to_core()), n(r.to_core()))),
            Eventually(x) => Formula::until(True, x.to_core()),
            Always(x) => n(Formula::until(True, n(x.to_core()))),
        }
    }
}

impl<A: Clone + Ord> Formula<A> {
    /// Negation normal form: `Not` only wraps atoms.
    pub fn nnf(&self) -> Formula<A> {
        self.nnf_signed(true)
    }

    fn nnf_signed(&self, positive: bool) -> Formula<A> {
        use Formula::*;
        match (self, positive) {
            (True, true) | (False, false) => True,
            (True, false) | (False, true) => False,
            (Atom(a), true) => Atom(a.clone()),
            (Atom(a), false) => Formula::not(Atom(a.clone())),
            (Not(x), p) => x.nnf_signed(!p),
            (And(l, r), true) => Formula::and(l.nnf_signed(true), r.nnf_signed(true)),
            (And(l, r), false) => Formula::or(l.nnf_signed(false), r.nnf_signed(false)),
            (Or(l, r), true) => Formula::or(l.nnf_signed(true), r.nnf_signed(true)),
            (Or(l, r), false) => Formula::and(l.nnf_signed(false), r.nnf_signed(false)),
            (Next(x), true) => Formula::next(x.nnf_signed(true)),
            (Next(x), false) => Formula::weak_next(x.nnf_signed(false)),
            (WeakNext(x), true) => Formula::weak_next(x.nnf_signed(true)),
            (WeakNext(x), false) => Formula::next(x.nnf_signed(false)),
            (Until(l, r), true) => Formula::until(l.nnf_signed(true), r.nnf_signed(true)),
            (Until(l, r), false) => Formula::release(l.nnf_signed(false), r.nnf_signed(false)),
            (Release(l, r), true) => Formula::release(l.nnf_signed(true), r.nnf_signed(true)),
            (Release(l, r), false) => Formula::until(l.nnf_signed(false), r.nnf_signed(false)),
            (Eventually(x), true) => Formula::eventually(x.nnf_signed(true)),
            (Eventually(x), false) => Formula::always(x.nnf_signed(false)),
            (Always(x), true) => Formula::always(x.nnf_signed(true)),
            (Always(x), false) => Formula::eventually(x.nnf_signed(false)),
        }
    }

    /// Canonical simplification, applied bottom-up.
    ///
    /// Rules: `!true = false`, `!false = true`, `!!x = x`; `and`/`or` chains are
    /// flattened, sorted and deduplicated, units dropped, zeros absorb, and a
    /// literal next to its complement collapses a conjunction; `X false = false`,
    /// `N true = true`, `F false = false`, `G true = true`, `FF x = F x`,
    /// `GG x = G x`, `x U false = false`, `x R true = true`.
    ///
    /// Every rule also holds on the empty suffix, so residues keep their
    /// end-of-trace meaning.
    pub fn simplify(&self) -> Formula<A> {
        use Formula::*;
        match self {
            True | False | Atom(_) => self.clone(),
            Not(x) => match x.simplify() {
                True => False,
                False => True,
                Not(y) => *y,
                y => Formula::not(y),
            },
            And(..) => {
                let mut parts = Vec::new();
                self.collect_chain(true, &mut parts);
                Self::rebuild_chain(true, parts.iter().map(|p| p.simplify()).collect())
            }
            Or(..) => {
                let mut parts = Vec::new();
                self.collect_chain(false, &mut parts);
                Self::rebuild_chain(false, parts.iter().map(|p| p.simplify()).collect())
            }
            Next(x) => match x.simplify() {
                False => False,
                y => Formula::next(y),
            },
            WeakNext(x) => match x.simplify() {
                True => True,
                y => Formula::weak_next(y),
            },
            Eventually(x) => match x.simplify() {
                False => False,
                e @ Eventually(_) => e,
                y => Formula::eventually(y),
            },
            Always(x) => match x.simplify() {
                True => True,
                g @ Always(_) => g,
                y => Formula::always(y),
            },
            Until(l, r) => match r.simplify() {
                False => False,
                r => Formula::until(l.simplify(), r),
            },
            Release(l, r) => match r.simplify() {
                True => True,
                r => Formula::release(l.simplify(), r),
            },
        }
    }

    fn collect_chain<'a>(&'a self, conj: bool, out: &mut Vec<&'a Formula<A>>) {
        match (self, conj) {
            (Formula::And(l, r), true) | (Formula::Or(l, r), false) => {
                l.collect_chain(conj, out);
                r.collect_chain(conj, out);
            }
            _ => out.push(self),
        }
    }

    fn rebuild_chain(conj: bool, parts: Vec<Formula<A>>) -> Formula<A> {
        let (unit, zero) = if conj {
            (Formula::True, Formula::False)
        } else {
            (Formula::False, Formula::True)
        };
        let mut flat = Vec::with_capacity(parts.len());
        for p in parts {
            // simplified operands may themselves be chains of the same kind
            let mut inner = Vec::new();
            p.collect_chain(conj, &mut inner);
            flat.extend(inner.into_iter().cloned());
        }
        if flat.contains(&zero) {
            return zero;
        }
        flat.retain(|p| *p != unit);
        flat.sort();
        flat.dedup();
        let complementary = flat.iter().any(|p| match p {
            Formula::Not(inner) => {
                matches!(**inner, Formula::Atom(_)) && flat.binary_search(&**inner).is_ok()
            }
            _ => false,
        });
        // only for conjunctions: on the empty suffix both literals are false
        if conj && complementary {
            return zero;
        }
        let mut it = flat.into_iter().rev();
        let Some(mut acc) = it.next() else {
            return unit;
        };
        for p in it {
            acc = if conj {
                Formula::and(p, acc)
            } else {
                Formula::or(p, acc)
            };
        }
        acc
    }
}

impl<A> Formula<A> {
    /// Canonical s-expression rendering, e.g. `(always (not (have-photo t1 d1)))`.
    pub fn to_sexpr(&self, atom: &impl Fn(&A) -> String) -> String {
        use Formula::*;
        let un = |op: &str, x: &Formula<A>| format!("({op} {})", x.to_sexpr(atom));
        let bin = |op: &str, l: &Formula<A>, r: &Formula<A>| {
            format!("({op} {} {})", l.to_sexpr(atom), r.to_sexpr(atom))
        };
        match self {
            True => "true".into(),
            False => "false".into(),
            Atom(a) => atom(a),
            Not(x) => un("not", x),
            Next(x) => un("next", x),
            WeakNext(x) => un("weak-next", x),
            Eventually(x) => un("eventually", x),
            Always(x) => un("always", x),
            And(l, r) => bin("and", l, r),
            Or(l, r) => bin("or", l, r),
            Until(l, r) => bin("until", l, r),
            Release(l, r) => bin("release", l, r),
        }
    }
}

/// Parse the s-expression form written by [`Formula::to_sexpr`]. Anything that
/// is not an operator is handed to `atom`.
pub fn parse_formula<A>(
    text: &str,
    atom: &impl Fn(&SExpr) -> Result<A, String>,
) -> Result<Formula<A>, LtlError> {
    let exprs = sexpr::parse_all(text)?;
    match exprs.as_slice() {
        [one] => formula_from_sexpr(one, atom),
        _ => Err(LtlError::Parse {
            pos: exprs.get(1).map(SExpr::pos).unwrap_or_default(),
            message: format!("expected one formula, found {}", exprs.len()),
        }),
    }
}

pub fn formula_from_sexpr<A>(
    e: &SExpr,
    atom: &impl Fn(&SExpr) -> Result<A, String>,
) -> Result<Formula<A>, LtlError> {
    let err = |message: String| LtlError::Parse {
        pos: e.pos(),
        message,
    };
    if let Some(s) = e.as_symbol() {
        return match s {
            "true" => Ok(Formula::True),
            "false" => Ok(Formula::False),
            _ => atom(e).map(Formula::Atom).map_err(err),
        };
    }
    let items = e.as_list().expect("not a symbol");
    let head = e.head().unwrap_or_default();
    let args = &items[1.min(items.len())..];
    let sub = |i: usize| formula_from_sexpr(&args[i], atom);
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(err(format!("`{head}` takes {n} argument(s), got {}", args.len())))
        }
    };
    match head.as_str() {
        "not" => arity(1).and_then(|_| Ok(Formula::not(sub(0)?))),
        "next" => arity(1).and_then(|_| Ok(Formula::next(sub(0)?))),
        "weak-next" => arity(1).and_then(|_| Ok(Formula::weak_next(sub(0)?))),
        "eventually" => arity(1).and_then(|_| Ok(Formula::eventually(sub(0)?))),
        "always" => arity(1).and_then(|_| Ok(Formula::always(sub(0)?))),
        "until" => arity(2).and_then(|_| Ok(Formula::until(sub(0)?, sub(1)?))),
        "release" => arity(2).and_then(|_| Ok(Formula::release(sub(0)?, sub(1)?))),
        "and" | "or" => {
            if args.len() < 2 {
                return Err(err(format!("`{head}` takes at least 2 arguments")));
            }
            let parts = (0..args.len()).map(sub).collect::<Result<Vec<_>, _>>()?;
            Ok(if head == "and" {
                Formula::all(parts)
            } else {
                Formula::any(parts)
            })
        }
        _ => atom(e).map(Formula::Atom).map_err(err),
    }
}
