//! Stochastic assessment of plans.
//!
//! The assessment model adds outcome rules to the deterministic world:
//! matching actions succeed with some probability and otherwise fail in a
//! stated way. Plans are scored open-loop (no replanning after a failure);
//! [`optimal_return`] gives the closed-loop optimum by expectimax.

use std::collections::{BTreeMap, HashMap};

use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::domain::{
    apply_unchecked, applicable, check_uav_action, Cell, JointAction, JointState, Observed, UavAction, World,
};
use crate::ltl::{Automaton, LtlError, StateId, DEFAULT_STATE_BOUND};
use crate::planner::{Plan, PlanError, Provenance, SearchConfig};
use crate::prefs::{PreferenceSet, Weights};
use crate::scalar::{pairwise_sum, Scalar};

pub type Probability = Ratio<i64>;

pub const DEFAULT_LEAF_BOUND: usize = 1 << 20;
pub const DEFAULT_EXPECTIMAX_BOUND: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionKind {
    Move,
    Photo,
    Pickup,
    Drop,
}

/// Which UAV actions a rule applies to. `entity` narrows photo, pickup and
/// drop to one target, pallet or asset (by index).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionPattern {
    pub kind: ActionKind,
    pub entity: Option<usize>,
}

impl ActionPattern {
    pub fn matches(&self, action: UavAction) -> bool {
        let (kind, entity) = match action {
            UavAction::Wait => return false,
            UavAction::Move(_) => (ActionKind::Move, None),
            UavAction::TakePhoto(t) => (ActionKind::Photo, Some(t)),
            UavAction::PickUp(p) => (ActionKind::Pickup, Some(p)),
            UavAction::Drop(a) => (ActionKind::Drop, Some(a)),
        };
        kind == self.kind && (self.entity.is_none() || self.entity == entity)
    }
}

/// Where the acting UAV must be for a rule to apply.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellPredicate {
    Anywhere,
    In(Vec<Cell>),
    /// Manhattan distance from `center` strictly greater than `radius`.
    Beyond { center: Cell, radius: u32 },
}

impl CellPredicate {
    pub fn matches(&self, cell: Cell) -> bool {
        match self {
            CellPredicate::Anywhere => true,
            CellPredicate::In(cells) => cells.contains(&cell),
            CellPredicate::Beyond { center, radius } => cell.manhattan(*center) > *radius,
        }
    }
}

/// Timesteps `t` with `t % modulus == remainder`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepFilter {
    pub modulus: u32,
    pub remainder: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Failure {
    /// Nothing happens and nothing is paid.
    NoEffect,
    /// The UAV goes down for the rest of the trace.
    UavLost,
    /// The cost is paid but the effect does not happen.
    ActionWasted,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OutcomeRule {
    pub action: ActionPattern,
    pub uav: Option<usize>,
    pub cells: CellPredicate,
    pub steps: Option<StepFilter>,
    /// `None` takes the model's default probability.
    pub success: Option<Probability>,
    pub on_failure: Failure,
}

impl OutcomeRule {
    pub fn matches(&self, state: &JointState, uav: usize, action: UavAction) -> bool {
        self.action.matches(action)
            && self.uav.is_none_or(|u| u == uav)
            && self.cells.matches(state.uav_at[uav])
            && self.steps.is_none_or(|f| f.modulus > 0 && state.t % f.modulus == f.remainder)
    }
}

/// One possibility for which pallets really exist.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hypothesis {
    pub probability: Probability,
    /// Pallets that are not really there; picking them up is wasted.
    pub phantom: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssessmentModel<S> {
    pub world: World,
    pub rules: Vec<OutcomeRule>,
    /// Empty means every pallet is where the world says.
    pub hypotheses: Vec<Hypothesis>,
    pub goal_reward: S,
    pub action_cost: S,
    /// Default ordering weight when parsing preferences for this model.
    pub ordering_reward: S,
    pub default_probability: Probability,
    pub discount: S,
    pub leaf_bound: usize,
    pub state_bound: usize,
}

impl<S: Scalar> AssessmentModel<S> {
    pub fn new(world: World) -> Self {
        AssessmentModel {
            world,
            rules: Vec::new(),
            hypotheses: Vec::new(),
            goal_reward: S::from_int(20),
            action_cost: S::from_int(1),
            ordering_reward: S::from_int(10),
            default_probability: Ratio::new(1, 2),
            discount: S::one(),
            leaf_bound: DEFAULT_LEAF_BOUND,
            state_bound: DEFAULT_EXPECTIMAX_BOUND,
        }
    }

    pub fn with_rules(mut self, rules: Vec<OutcomeRule>) -> Self {
        self.rules = rules;
        self
    }

    /// Preference weights for constraint files scored by this model.
    ///
    /// Only meaningful when the rewards are whole numbers.
    pub fn weights(&self) -> Weights {
        Weights {
            preference: self.goal_reward.to_f64().round() as i64,
            ordering: self.ordering_reward.to_f64().round() as i64,
        }
    }

    /// The same model in another scalar type.
    pub fn convert<T: Scalar>(&self) -> AssessmentModel<T> {
        let conv = |s: &S| {
            let x = s.to_f64();
            // whole numbers and simple fractions survive exactly
            let scaled = (x * 1_000_000.0).round() as i64;
            T::from_ratio(scaled, 1_000_000)
        };
        AssessmentModel {
            world: self.world.clone(),
            rules: self.rules.clone(),
            hypotheses: self.hypotheses.clone(),
            goal_reward: conv(&self.goal_reward),
            action_cost: conv(&self.action_cost),
            ordering_reward: conv(&self.ordering_reward),
            default_probability: self.default_probability,
            discount: conv(&self.discount),
            leaf_bound: self.leaf_bound,
            state_bound: self.state_bound,
        }
    }

    pub fn validate(&self) -> Result<(), AssessError> {
        let bad = |m: String| Err(AssessError::InvalidModel(m));
        for c in [&self.goal_reward, &self.action_cost, &self.ordering_reward] {
            if *c < S::zero() {
                return bad("rewards and costs must be nonnegative".into());
            }
        }
        if !(self.discount > S::zero() && self.discount <= S::one()) {
            return bad("discount must lie in (0, 1]".into());
        }
        let unit = |p: Probability| p >= Ratio::zero() && p <= Ratio::one();
        if !unit(self.default_probability) {
            return bad("default probability must lie in [0, 1]".into());
        }
        let w = &self.world;
        for (i, r) in self.rules.iter().enumerate() {
            if r.success.is_some_and(|p| !unit(p)) {
                return bad(format!("rule {i}: probability outside [0, 1]"));
            }
            if r.uav.is_some_and(|u| u >= w.uavs().len()) {
                return bad(format!("rule {i}: unknown UAV"));
            }
            let limit = match r.action.kind {
                ActionKind::Move => 0,
                ActionKind::Photo => w.targets().len(),
                ActionKind::Pickup => w.pallets().len(),
                ActionKind::Drop => w.assets().len(),
            };
            if r.action.entity.is_some_and(|e| e >= limit) {
                return bad(format!("rule {i}: unknown entity"));
            }
            let cells = match &r.cells {
                CellPredicate::Anywhere => vec![],
                CellPredicate::In(c) => c.clone(),
                CellPredicate::Beyond { center, .. } => vec![*center],
            };
            if cells.iter().any(|c| !w.grid().contains(*c)) {
                return bad(format!("rule {i}: cell outside the grid"));
            }
            if r.steps.is_some_and(|f| f.modulus == 0 || f.remainder >= f.modulus) {
                return bad(format!("rule {i}: step filter needs 0 <= remainder < modulus"));
            }
        }
        if !self.hypotheses.is_empty() {
            let total: Probability = self.hypotheses.iter().map(|h| h.probability).sum();
            if total != Ratio::one() || self.hypotheses.iter().any(|h| !unit(h.probability)) {
                return bad("hypothesis probabilities must sum to 1".into());
            }
            if self.hypotheses.iter().flat_map(|h| &h.phantom).any(|&p| p >= w.pallets().len()) {
                return bad("hypothesis names an unknown pallet".into());
            }
        }
        Ok(())
    }

    fn rule_for(&self, state: &JointState, uav: usize, action: UavAction) -> Option<&OutcomeRule> {
        self.rules.iter().find(|r| r.matches(state, uav, action))
    }

    fn hypotheses_or_certain(&self) -> Vec<Hypothesis> {
        if self.hypotheses.is_empty() {
            vec![Hypothesis {
                probability: Ratio::one(),
                phantom: vec![],
            }]
        } else {
            self.hypotheses.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssessError {
    #[error("outcome tree exceeds {bound} leaves; merge or simplify the outcome rules")]
    TooManyOutcomes { bound: usize },
    #[error("expectimax exceeds {bound} states")]
    StateBound { bound: usize },
    #[error("baseline return is zero")]
    ZeroBaseline,
    #[error("invalid assessment model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Automaton(#[from] LtlError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// One distinct way the plan can turn out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome<S> {
    pub probability: S,
    pub goals: Vec<String>,
    pub preferences: Vec<String>,
    pub orderings_preserved: usize,
    /// Paid actions.
    pub actions: u32,
    pub lost: Vec<String>,
    pub score: S,
}

/// Expected contribution of each score component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition<S> {
    pub goals: S,
    pub preferences: S,
    pub orderings: S,
    pub costs: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnReport<S> {
    pub expected_return: S,
    pub outcomes: Vec<Outcome<S>>,
    pub totals: Decomposition<S>,
}

impl<S: Scalar> ReturnReport<S> {
    pub fn probability_mass(&self) -> S {
        let ps: Vec<S> = self.outcomes.iter().map(|o| o.probability.clone()).collect();
        pairwise_sum(&ps)
    }
}

/// Trace-dependent bookkeeping shared by open-loop and closed-loop
/// evaluation.
struct Scorer<'a, S> {
    model: &'a AssessmentModel<S>,
    automata: Vec<Automaton<crate::domain::Proposition>>,
    weights: Vec<S>,
    orderings: Vec<(usize, usize, S)>,
    /// Whether first-satisfaction times must be kept per preference.
    timed: Vec<bool>,
    timed_goals: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Track {
    state: JointState,
    auts: SmallVec<[StateId; 8]>,
    first: SmallVec<[Option<u32>; 8]>,
    goal_first: SmallVec<[Option<u32>; 8]>,
    hypothesis: u8,
}

impl<'a, S: Scalar> Scorer<'a, S> {
    fn new(model: &'a AssessmentModel<S>, prefs: &PreferenceSet) -> Result<Self, AssessError> {
        let automata = prefs
            .lowered()
            .iter()
            .map(|f| Automaton::lazy(f, DEFAULT_STATE_BOUND))
            .collect::<Result<Vec<_>, _>>()?;
        let discounted = model.discount != S::one();
        let mut timed = vec![discounted; automata.len()];
        let orderings = prefs
            .ordering_indices()
            .into_iter()
            .map(|(a, b, w)| {
                timed[a] = true;
                timed[b] = true;
                (a, b, S::from_int(w))
            })
            .collect();
        Ok(Scorer {
            model,
            automata,
            weights: prefs.preferences.iter().map(|p| S::from_int(p.weight)).collect(),
            orderings,
            timed,
            timed_goals: discounted,
        })
    }

    fn observe(&mut self, state: JointState, prev: Option<&Track>, hypothesis: u8) -> Result<Track, AssessError> {
        let world = &self.model.world;
        let label = Observed { state: &state, world };
        let k = state.t;
        let mut auts = SmallVec::new();
        let mut first = SmallVec::new();
        for (i, aut) in self.automata.iter_mut().enumerate() {
            let from = prev.map_or(aut.initial(), |p| p.auts[i]);
            let s = aut.advance(from, &label)?;
            auts.push(s);
            let before = prev.and_then(|p| p.first[i]);
            first.push(if self.timed[i] && before.is_none() && aut.is_accepting(s) {
                Some(k)
            } else {
                before
            });
        }
        let goal_first = world
            .goals()
            .iter()
            .enumerate()
            .map(|(g, &goal)| {
                let before = prev.and_then(|p| p.goal_first[g]);
                if self.timed_goals && before.is_none() && state.goal_met(world, goal) {
                    Some(k)
                } else {
                    before
                }
            })
            .collect();
        Ok(Track {
            state,
            auts,
            first,
            goal_first,
            hypothesis,
        })
    }

    fn gamma(&self, k: Option<u32>) -> S {
        match k {
            Some(k) if self.model.discount != S::one() => self.model.discount.pow(k),
            _ => S::one(),
        }
    }

    /// Rewards earned by stopping here, without costs.
    fn rewards(&self, tr: &Track) -> (S, S, S) {
        let world = &self.model.world;
        let mut goals = S::zero();
        for (g, &goal) in world.goals().iter().enumerate() {
            if tr.state.goal_met(world, goal) {
                goals = goals + self.model.goal_reward.clone() * self.gamma(tr.goal_first[g]);
            }
        }
        let sat = |i: usize| self.automata[i].is_accepting(tr.auts[i]);
        let mut prefs = S::zero();
        for i in 0..self.automata.len() {
            if sat(i) {
                prefs = prefs + self.weights[i].clone() * self.gamma(tr.first[i]);
            }
        }
        let mut ords = S::zero();
        for (a, b, w) in &self.orderings {
            if let (true, true, Some(x), Some(y)) = (sat(*a), sat(*b), tr.first[*a], tr.first[*b]) {
                if x <= y {
                    ords = ords + w.clone() * self.gamma(Some(y));
                }
            }
        }
        (goals, prefs, ords)
    }

    fn stop_value(&self, tr: &Track) -> S {
        let (g, p, o) = self.rewards(tr);
        g + p + o
    }
}

/// Possible results of one UAV's action: probability, the action that
/// takes effect, paid cost, and whether the UAV is lost.
type Branch = (Probability, UavAction, u32, bool);

fn uav_branches<S: Scalar>(
    model: &AssessmentModel<S>,
    state: &JointState,
    phantom: &[usize],
    uav: usize,
    action: UavAction,
) -> SmallVec<[Branch; 2]> {
    let one = Ratio::one();
    let mut out = SmallVec::new();
    if action.is_wait() || state.is_down(uav) {
        out.push((one, UavAction::Wait, 0, false));
        return out;
    }
    let phantom_pickup = matches!(action, UavAction::PickUp(p) if phantom.contains(&p));
    if phantom_pickup || check_uav_action(state, &model.world, uav, action).is_err() {
        out.push((one, UavAction::Wait, 1, false));
        return out;
    }
    let Some(rule) = model.rule_for(state, uav, action) else {
        out.push((one, action, 1, false));
        return out;
    };
    let p = rule.success.unwrap_or(model.default_probability);
    if p > Ratio::zero() {
        out.push((p, action, 1, false));
    }
    if p < one {
        out.push(match rule.on_failure {
            Failure::NoEffect => (one - p, UavAction::Wait, 0, false),
            Failure::ActionWasted => (one - p, UavAction::Wait, 1, false),
            Failure::UavLost => (one - p, UavAction::Wait, 1, true),
        });
    }
    out
}

/// Joint outcomes: probability, effective joint action, paid cost, lost mask.
fn joint_branches<S: Scalar>(
    model: &AssessmentModel<S>,
    state: &JointState,
    phantom: &[usize],
    action: &JointAction,
) -> Vec<(Probability, JointAction, u32, u64)> {
    let mut out = vec![(Ratio::one(), JointAction(SmallVec::new()), 0u32, 0u64)];
    for (u, &a) in action.0.iter().enumerate() {
        let options = uav_branches(model, state, phantom, u, a);
        let mut next = Vec::with_capacity(out.len() * options.len());
        for (p, j, c, lost) in &out {
            for &(q, eff, cost, l) in &options {
                let mut j2 = j.clone();
                let mut eff = eff;
                // a pallet grabbed twice in one step goes to the first UAV
                if let UavAction::PickUp(pl) = eff {
                    if j2.0.contains(&UavAction::PickUp(pl)) {
                        eff = UavAction::Wait;
                    }
                }
                j2.0.push(eff);
                next.push((p * q, j2, c + cost, lost | if l { 1 << u } else { 0 }));
            }
        }
        out = next;
    }
    out
}

fn advance(world: &World, state: &JointState, effective: &JointAction, lost: u64) -> JointState {
    let mut next = apply_unchecked(state, effective, world);
    next.down |= lost;
    next
}

/// Expected return of executing `plan` open-loop in the assessment model.
///
/// Actions that are inapplicable in the state actually reached are paid for
/// and have no effect; actions of lost UAVs are skipped and not paid for.
pub fn expected_return<S: Scalar>(
    plan: &Plan,
    model: &AssessmentModel<S>,
    prefs: &PreferenceSet,
) -> Result<ReturnReport<S>, AssessError> {
    expected_return_of(&plan.actions, model, prefs)
}

/// [`expected_return`] for a bare action sequence.
pub fn expected_return_of<S: Scalar>(
    actions: &[JointAction],
    model: &AssessmentModel<S>,
    prefs: &PreferenceSet,
) -> Result<ReturnReport<S>, AssessError> {
    model.validate()?;
    let world = &model.world;
    let mut scorer = Scorer::new(model, prefs)?;
    let hyps = model.hypotheses_or_certain();
    // (track, paid cost) -> probability; exact merging keeps the tree small
    let mut dist: BTreeMap<(Track, u32), Probability> = BTreeMap::new();
    for (h, hyp) in hyps.iter().enumerate() {
        if hyp.probability.is_zero() {
            continue;
        }
        let root = scorer.observe(world.initial_state(), None, h as u8)?;
        *dist.entry((root, 0)).or_insert_with(Ratio::zero) += hyp.probability;
    }
    for action in actions {
        let mut next: BTreeMap<(Track, u32), Probability> = BTreeMap::new();
        for ((tr, cost), p) in &dist {
            let phantom = &hyps[tr.hypothesis as usize].phantom;
            for (q, eff, c, lost) in joint_branches(model, &tr.state, phantom, action) {
                let s = advance(world, &tr.state, &eff, lost);
                let child = scorer.observe(s, Some(tr), tr.hypothesis)?;
                *next.entry((child, cost + c)).or_insert_with(Ratio::zero) += p * q;
            }
            if next.len() > model.leaf_bound {
                return Err(AssessError::TooManyOutcomes {
                    bound: model.leaf_bound,
                });
            }
        }
        dist = next;
    }

    let mut outcomes = Vec::with_capacity(dist.len());
    let (mut gs, mut ps, mut os, mut cs, mut totals) = (vec![], vec![], vec![], vec![], vec![]);
    for ((tr, cost), p) in &dist {
        let prob = S::from_prob(*p);
        let (g, pr, o) = scorer.rewards(tr);
        let c = model.action_cost.clone() * S::from_int(*cost as i64);
        let score = g.clone() + pr.clone() + o.clone() - c.clone();
        gs.push(prob.clone() * g);
        ps.push(prob.clone() * pr);
        os.push(prob.clone() * o);
        cs.push(prob.clone() * c);
        totals.push(prob.clone() * score.clone());
        let sat = |i: usize| scorer.automata[i].is_accepting(tr.auts[i]);
        outcomes.push(Outcome {
            probability: prob,
            goals: world
                .goals()
                .iter()
                .filter(|&&g| tr.state.goal_met(world, g))
                .map(|&g| world.goal_id(g))
                .collect(),
            preferences: prefs
                .preferences
                .iter()
                .enumerate()
                .filter(|(i, _)| sat(*i))
                .map(|(_, p)| p.name.clone())
                .collect(),
            orderings_preserved: scorer
                .orderings
                .iter()
                .filter(|(a, b, _)| {
                    sat(*a) && sat(*b) && matches!((tr.first[*a], tr.first[*b]), (Some(x), Some(y)) if x <= y)
                })
                .count(),
            actions: *cost,
            lost: (0..world.uavs().len())
                .filter(|&u| tr.state.is_down(u) && world.uavs()[u].operational)
                .map(|u| world.uavs()[u].id.clone())
                .collect(),
            score,
        });
    }
    Ok(ReturnReport {
        expected_return: pairwise_sum(&totals),
        outcomes,
        totals: Decomposition {
            goals: pairwise_sum(&gs),
            preferences: pairwise_sum(&ps),
            orderings: pairwise_sum(&os),
            costs: pairwise_sum(&cs),
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalReport<S> {
    /// Closed-loop expectimax value: the UAVs observe every outcome and may
    /// stop at any step.
    pub value: S,
    /// Actions chosen along the most probable outcome, when they also form
    /// a valid plan in the base world.
    pub witness: Option<Plan>,
    /// Open-loop expected return of the witness.
    pub witness_return: Option<S>,
    /// Distinct states evaluated.
    pub states: usize,
}

struct Expectimax<'a, S> {
    scorer: Scorer<'a, S>,
    hyps: Vec<Hypothesis>,
    memo: HashMap<Track, (S, Option<JointAction>)>,
    horizon: u32,
}

impl<S: Scalar> Expectimax<'_, S> {
    fn actions(&self, tr: &Track) -> Vec<JointAction> {
        let world = &self.scorer.model.world;
        let phantom = &self.hyps[tr.hypothesis as usize].phantom;
        applicable(&tr.state, world)
            .into_iter()
            .filter(|a| {
                // phantom pickups are wasted, so waiting is never worse
                !a.0.iter().any(|x| matches!(x, UavAction::PickUp(p) if phantom.contains(p)))
            })
            .collect()
    }

    fn value(&mut self, tr: &Track) -> Result<S, AssessError> {
        if let Some((v, _)) = self.memo.get(tr) {
            return Ok(v.clone());
        }
        let model = self.scorer.model;
        let mut best = self.scorer.stop_value(tr);
        let mut choice = None;
        if tr.state.t < self.horizon {
            for action in self.actions(tr) {
                let phantom = self.hyps[tr.hypothesis as usize].phantom.clone();
                let mut terms = Vec::new();
                for (q, eff, c, lost) in joint_branches(model, &tr.state, &phantom, &action) {
                    let s = advance(&model.world, &tr.state, &eff, lost);
                    let child = self.scorer.observe(s, Some(tr), tr.hypothesis)?;
                    let v = self.value(&child)? - model.action_cost.clone() * S::from_int(c as i64);
                    terms.push(S::from_prob(q) * v);
                }
                let v = pairwise_sum(&terms);
                if v > best {
                    best = v;
                    choice = Some(action);
                }
            }
        }
        if self.memo.len() >= model.state_bound {
            return Err(AssessError::StateBound {
                bound: model.state_bound,
            });
        }
        self.memo.insert(tr.clone(), (best.clone(), choice));
        Ok(best)
    }
}

/// Exact closed-loop optimum by expectimax over joint actions and rule
/// outcomes up to the world's horizon.
///
/// Pallet hypotheses are resolved before the first step and are visible to
/// the policy. Ties prefer stopping, then the earliest joint action in
/// tie-break order.
pub fn optimal_return<S: Scalar>(
    model: &AssessmentModel<S>,
    prefs: &PreferenceSet,
) -> Result<OptimalReport<S>, AssessError> {
    model.validate()?;
    let world = &model.world;
    let hyps = model.hypotheses_or_certain();
    let mut ex = Expectimax {
        scorer: Scorer::new(model, prefs)?,
        hyps: hyps.clone(),
        memo: HashMap::new(),
        horizon: world.horizon(),
    };
    let mut terms = Vec::new();
    let mut roots = Vec::new();
    for (h, hyp) in hyps.iter().enumerate() {
        let root = ex.scorer.observe(world.initial_state(), None, h as u8)?;
        let v = ex.value(&root)?;
        terms.push(S::from_prob(hyp.probability) * v);
        roots.push((hyp.probability, root));
    }
    let value = pairwise_sum(&terms);

    // follow the most likely hypothesis and outcome
    let (_, mut tr) = roots
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .expect("at least one hypothesis");
    let mut actions = Vec::new();
    while let Some((_, Some(action))) = ex.memo.get(&tr).cloned() {
        let phantom = hyps[tr.hypothesis as usize].phantom.clone();
        let (_, eff, _, lost) = joint_branches(model, &tr.state, &phantom, &action)
            .into_iter()
            .reduce(|a, b| if b.0 > a.0 { b } else { a })
            .expect("at least one branch");
        let s = advance(world, &tr.state, &eff, lost);
        tr = ex.scorer.observe(s, Some(&tr), tr.hypothesis)?;
        actions.push(action);
    }
    let config = SearchConfig {
        goal_reward: model.goal_reward.to_f64().round() as i64,
        action_cost: model.action_cost.to_f64().round() as i64,
        ..SearchConfig::default()
    };
    let witness = Plan::from_actions(world, prefs, &config, actions, Provenance::Constrained).ok();
    let witness_return = match &witness {
        Some(p) => Some(expected_return(p, model, prefs)?.expected_return),
        None => None,
    };
    Ok(OptimalReport {
        value,
        witness,
        witness_return,
        states: ex.memo.len(),
    })
}

/// Signed percentage change from `from` to `to`.
pub fn percent_change<S: Scalar>(from: &S, to: &S) -> Result<S, AssessError> {
    if from.is_zero() {
        return Err(AssessError::ZeroBaseline);
    }
    Ok((to.clone() - from.clone()) / from.clone() * S::from_int(100))
}

/// `(candidate - baseline) / baseline * 100`.
pub fn improvement<S: Scalar>(baseline: &ReturnReport<S>, candidate: &ReturnReport<S>) -> Result<S, AssessError> {
    percent_change(&baseline.expected_return, &candidate.expected_return)
}

/// `(candidate - optimal) / optimal * 100`; zero or negative when the
/// candidate falls short of the optimum.
pub fn optimality<S: Scalar>(optimal: &S, candidate: &ReturnReport<S>) -> Result<S, AssessError> {
    percent_change(optimal, &candidate.expected_return)
}

/// Round half away from zero to one decimal place, as in report tables.
pub fn round1(x: f64) -> f64 {
    let r = (x * 10.0).round() / 10.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}
