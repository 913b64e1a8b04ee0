use std::collections::HashMap;

use super::{end_check, progress_nnf, Formula, LtlError, Valuation};

pub const DEFAULT_STATE_BOUND: usize = 10_000;
const MAX_ATOMS: usize = 24;

pub type StateId = u32;

/// Deterministic finite-trace acceptor whose states are progressed formulas.
///
/// A trace is accepted when the state reached after reading every label is
/// accepting. Transitions are keyed by the bitmask of the formula's atoms
/// that hold in a label, so the alphabet is `2^atoms`.
#[derive(Debug, Clone)]
pub struct Automaton<A> {
    atoms: Vec<A>,
    states: Vec<Formula<A>>,
    index: HashMap<Formula<A>, StateId>,
    accepting: Vec<bool>,
    delta: HashMap<(StateId, u32), StateId>,
    bound: usize,
}

/// Compile `formula` into its full progression closure.
pub fn compile<A: Clone + Ord + std::hash::Hash>(formula: &Formula<A>) -> Result<Automaton<A>, LtlError> {
    compile_with_bound(formula, DEFAULT_STATE_BOUND)
}

pub fn compile_with_bound<A: Clone + Ord + std::hash::Hash>(
    formula: &Formula<A>,
    bound: usize,
) -> Result<Automaton<A>, LtlError> {
    let mut aut = Automaton::lazy(formula, bound)?;
    let letters = 1u32 << aut.atoms.len();
    let mut frontier = 0;
    while frontier < aut.states.len() {
        for mask in 0..letters {
            aut.advance_mask(frontier as StateId, mask)?;
        }
        frontier += 1;
    }
    Ok(aut)
}

impl<A: Clone + Ord + std::hash::Hash> Automaton<A> {
    /// An automaton holding only the initial state; transitions are computed
    /// on demand by [`Automaton::advance`].
    pub fn lazy(formula: &Formula<A>, bound: usize) -> Result<Self, LtlError> {
        let atoms: Vec<A> = formula.atoms().into_iter().collect();
        if atoms.len() > MAX_ATOMS {
            return Err(LtlError::TooManyAtoms(atoms.len()));
        }
        let mut aut = Automaton {
            atoms,
            states: Vec::new(),
            index: HashMap::new(),
            accepting: Vec::new(),
            delta: HashMap::new(),
            bound: bound.max(1),
        };
        aut.intern(formula.nnf().simplify())?;
        Ok(aut)
    }

    fn intern(&mut self, f: Formula<A>) -> Result<StateId, LtlError> {
        if let Some(&id) = self.index.get(&f) {
            return Ok(id);
        }
        if self.states.len() >= self.bound {
            return Err(LtlError::StateBound { bound: self.bound });
        }
        let id = self.states.len() as StateId;
        self.accepting.push(end_check(&f));
        self.states.push(f.clone());
        self.index.insert(f, id);
        Ok(id)
    }

    pub fn atoms(&self) -> &[A] {
        &self.atoms
    }

    /// The letter a label denotes for this automaton.
    pub fn mask<V: Valuation<A>>(&self, label: &V) -> u32 {
        self.atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| label.holds(a))
            .fold(0, |m, (i, _)| m | (1 << i))
    }

    pub fn advance_mask(&mut self, state: StateId, mask: u32) -> Result<StateId, LtlError> {
        if let Some(&next) = self.delta.get(&(state, mask)) {
            return Ok(next);
        }
        let letter = MaskLabel {
            atoms: &self.atoms,
            mask,
        };
        let residue = progress_nnf(&self.states[state as usize], &letter);
        let next = self.intern(residue)?;
        self.delta.insert((state, mask), next);
        Ok(next)
    }

    /// Transition, computing and caching it if needed.
    pub fn advance<V: Valuation<A>>(&mut self, state: StateId, label: &V) -> Result<StateId, LtlError> {
        let m = self.mask(label);
        self.advance_mask(state, m)
    }
}

impl<A> Automaton<A> {
    pub fn initial(&self) -> StateId {
        0
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Formula<A>] {
        &self.states
    }

    pub fn state(&self, id: StateId) -> &Formula<A> {
        &self.states[id as usize]
    }

    pub fn is_accepting(&self, id: StateId) -> bool {
        self.accepting[id as usize]
    }

    /// A state equal to `False`: no continuation can be accepted.
    pub fn is_dead(&self, id: StateId) -> bool {
        matches!(self.states[id as usize], Formula::False)
    }

    /// A state equal to `True`: every continuation is accepted.
    pub fn is_settled(&self, id: StateId) -> bool {
        matches!(self.states[id as usize], Formula::True)
    }

    /// Cached transition, if it has been computed.
    pub fn transition(&self, state: StateId, mask: u32) -> Option<StateId> {
        self.delta.get(&(state, mask)).copied()
    }
}

impl<A: Clone + Ord + std::hash::Hash> Automaton<A> {
    /// Run over a whole trace. Transitions missing from a lazy automaton are
    /// computed on the way.
    pub fn accepts<V: Valuation<A>>(&mut self, trace: &[V]) -> Result<bool, LtlError> {
        let mut s = self.initial();
        for label in trace {
            s = self.advance(s, label)?;
        }
        Ok(self.is_accepting(s))
    }
}

struct MaskLabel<'a, A> {
    atoms: &'a [A],
    mask: u32,
}

impl<A: Ord> Valuation<A> for MaskLabel<'_, A> {
    fn holds(&self, atom: &A) -> bool {
        match self.atoms.binary_search(atom) {
            Ok(i) => self.mask & (1 << i) != 0,
            Err(_) => false,
        }
    }
}
