//! Deterministic plan synthesis over the base world.
//!
//! Both planners run the same branch-and-bound search over the product of
//! the world with one progression automaton per preference. Mission goals
//! are hard; preferences and orderings only add reward.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::domain::{
    apply_unchecked, applicable, step, Goal, JointAction, JointState, Observed, StepError, UavAction, World,
};
use crate::ltl::{Automaton, LtlError, StateId, DEFAULT_STATE_BOUND};
use crate::prefs::{self, ConstraintKind, PreferenceSet};

pub const DEFAULT_GOAL_REWARD: i64 = 20;
pub const DEFAULT_ACTION_COST: i64 = 1;
pub const DEFAULT_NODE_BUDGET: usize = 2_000_000;

/// Order in which joint actions are generated, and so which of several
/// equally scored plans is returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Lexicographic over (UAV order in the world, `UavAction` order):
    /// wait, move n/s/e/w, photo, pickup, drop.
    #[default]
    Lexicographic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Overrides the world's horizon when set.
    pub horizon: Option<u32>,
    pub node_budget: usize,
    /// Keep only this many frontier nodes. Gives up exactness.
    pub beam_width: Option<usize>,
    pub tie_break: TieBreak,
    pub goal_reward: i64,
    pub action_cost: i64,
    /// Per-preference automaton size limit.
    pub automaton_bound: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            horizon: None,
            node_budget: DEFAULT_NODE_BUDGET,
            beam_width: None,
            tie_break: TieBreak::Lexicographic,
            goal_reward: DEFAULT_GOAL_REWARD,
            action_cost: DEFAULT_ACTION_COST,
            automaton_bound: DEFAULT_STATE_BOUND,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Baseline,
    Constrained,
}

/// Deterministic score decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Score {
    pub goals: i64,
    pub preferences: i64,
    pub orderings: i64,
    /// Number of non-wait UAV actions.
    pub actions: i64,
    pub total: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub actions: Vec<JointAction>,
    /// `trace[0]` is the initial state, `trace[k + 1] = step(trace[k], actions[k])`.
    pub trace: Vec<JointState>,
    pub provenance: Provenance,
    pub score: Score,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("no plan reaches every mission goal within horizon {horizon}")]
    Unsolvable { horizon: u32 },
    #[error("node budget of {budget} exhausted")]
    BudgetExhausted { budget: usize, best: Option<Box<Plan>> },
    #[error(transparent)]
    Automaton(#[from] LtlError),
    #[error("invalid horizon: {0}")]
    Horizon(#[from] crate::domain::DomainError),
    #[error("invalid plan: {0}")]
    Invalid(String),
}

/// A node of the search product.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProductNode {
    pub state: JointState,
    /// One automaton state per preference, in set order.
    pub automaton_states: SmallVec<[StateId; 8]>,
    /// First step at which each preference held on the trace prefix. Only
    /// tracked for preferences that appear in an ordering.
    pub first_sat: SmallVec<[Option<u32>; 8]>,
    /// Non-wait actions taken so far.
    pub actions: u32,
}

impl ProductNode {
    pub fn goal_progress(&self, world: &World) -> BTreeSet<usize> {
        (0..world.goals().len())
            .filter(|&g| self.state.goal_met(world, world.goals()[g]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bound {
    pub value: i64,
    /// False when some mission goal can no longer be reached; the node is
    /// then a dead end and `value` excludes that goal's reward.
    pub hard_goals_reachable: bool,
}

/// World, preferences, and their automata, built once per search.
pub struct Product<'a> {
    world: &'a World,
    config: &'a SearchConfig,
    automata: Vec<Automaton<crate::domain::Proposition>>,
    weights: Vec<i64>,
    orderings: Vec<(usize, usize, i64)>,
    tracked: Vec<bool>,
}

impl<'a> Product<'a> {
    pub fn new(world: &'a World, prefs: &PreferenceSet, config: &'a SearchConfig) -> Result<Self, LtlError> {
        let automata = prefs
            .lowered()
            .iter()
            .map(|f| Automaton::lazy(f, config.automaton_bound))
            .collect::<Result<Vec<_>, _>>()?;
        let orderings = prefs.ordering_indices();
        let mut tracked = vec![false; automata.len()];
        for &(a, b, _) in &orderings {
            tracked[a] = true;
            tracked[b] = true;
        }
        Ok(Product {
            world,
            config,
            automata,
            weights: prefs.preferences.iter().map(|p| p.weight).collect(),
            orderings,
            tracked,
        })
    }

    pub fn world(&self) -> &World {
        self.world
    }

    fn observe(
        &mut self,
        state: JointState,
        from: Option<&ProductNode>,
        actions: u32,
    ) -> Result<ProductNode, LtlError> {
        let label = Observed {
            state: &state,
            world: self.world,
        };
        let k = state.t;
        let mut auts = SmallVec::new();
        let mut first = SmallVec::new();
        for (i, aut) in self.automata.iter_mut().enumerate() {
            let prev = from.map_or(aut.initial(), |n| n.automaton_states[i]);
            // the root reads its own label from the automaton's initial state
            let s = aut.advance(prev, &label)?;
            auts.push(s);
            let before = from.and_then(|n| n.first_sat[i]);
            first.push(if self.tracked[i] && before.is_none() && aut.is_accepting(s) {
                Some(k)
            } else {
                before
            });
        }
        Ok(ProductNode {
            state,
            automaton_states: auts,
            first_sat: first,
            actions,
        })
    }

    pub fn root(&mut self) -> Result<ProductNode, LtlError> {
        self.observe(self.world.initial_state(), None, 0)
    }

    pub fn child(&mut self, node: &ProductNode, action: &JointAction) -> Result<ProductNode, LtlError> {
        let next = apply_unchecked(&node.state, action, self.world);
        self.observe(next, Some(node), node.actions + action.cost())
    }

    fn satisfied(&self, node: &ProductNode, i: usize) -> bool {
        self.automata[i].is_accepting(node.automaton_states[i])
    }

    /// Score of stopping at `node`. Mission goals are counted whether or not
    /// all of them hold.
    pub fn terminal_score(&self, node: &ProductNode) -> Score {
        let goals = node.goal_progress(self.world).len() as i64 * self.config.goal_reward;
        let preferences = (0..self.automata.len())
            .filter(|&i| self.satisfied(node, i))
            .map(|i| self.weights[i])
            .sum();
        let orderings = self
            .orderings
            .iter()
            .filter(|&&(a, b, _)| {
                self.satisfied(node, a)
                    && self.satisfied(node, b)
                    && matches!((node.first_sat[a], node.first_sat[b]), (Some(x), Some(y)) if x <= y)
            })
            .map(|o| o.2)
            .sum();
        let actions = node.actions as i64;
        Score {
            goals,
            preferences,
            orderings,
            actions,
            total: goals + preferences + orderings - actions * self.config.action_cost,
        }
    }

    /// Optimistic value of the best plan extending `node`.
    ///
    /// Every mission goal is assumed reached, every preference whose
    /// automaton is not dead assumed satisfied, and every ordering not yet
    /// broken assumed preserved. The remaining cost is at least one action
    /// per outstanding photo, pickup and drop, plus the longest trip any
    /// single outstanding goal requires.
    pub fn upper_bound(&self, node: &ProductNode) -> Bound {
        let world = self.world;
        let remaining = world.horizon().saturating_sub(node.state.t);
        if remaining == 0 {
            let s = self.terminal_score(node);
            return Bound {
                value: s.total,
                hard_goals_reachable: node.state.all_goals_met(world),
            };
        }
        let mut reachable = true;
        let mut goal_reward = 0;
        let mut acts = 0i64;
        let mut longest = 0i64;
        for &goal in world.goals() {
            if node.state.goal_met(world, goal) {
                goal_reward += self.config.goal_reward;
                continue;
            }
            match goal_lower_bound(&node.state, world, goal) {
                Some((moves, a)) => {
                    goal_reward += self.config.goal_reward;
                    acts += a;
                    longest = longest.max(moves);
                }
                None => reachable = false,
            }
        }
        let dead = |i: usize| self.automata[i].is_dead(node.automaton_states[i]);
        let preferences: i64 = (0..self.automata.len())
            .filter(|&i| !dead(i))
            .map(|i| self.weights[i])
            .sum();
        let orderings: i64 = self
            .orderings
            .iter()
            .filter(|&&(a, b, _)| {
                let broken = matches!((node.first_sat[a], node.first_sat[b]), (None, Some(_)));
                !dead(a) && !dead(b) && !broken
            })
            .map(|o| o.2)
            .sum();
        let cost = (node.actions as i64 + acts + longest) * self.config.action_cost;
        Bound {
            value: goal_reward + preferences + orderings - cost,
            hard_goals_reachable: reachable,
        }
    }
}

/// `(moves, other actions)` that any completion reaching `goal` needs, or
/// `None` when no operational UAV can reach it in time.
fn goal_lower_bound(state: &JointState, world: &World, goal: Goal) -> Option<(i64, i64)> {
    let t = state.t;
    let horizon = world.horizon();
    let remaining = horizon - t;
    let active = || (0..world.uavs().len()).filter(|&u| !state.is_down(u));
    match goal {
        Goal::Photo(target) => {
            let tr = &world.targets()[target];
            let mut best: Option<i64> = None;
            for u in active() {
                let here = state.uav_at[u];
                // the photo is taken from the state at time tau < horizon
                for tau in t..horizon {
                    let d = here.manhattan(tr.position(tau));
                    if d <= tau - t {
                        best = Some(best.map_or(d as i64, |b| b.min(d as i64)));
                    }
                }
            }
            best.map(|m| (m, 1))
        }
        Goal::Visit(asset) => {
            let cell = world.assets()[asset].location;
            active()
                .map(|u| state.uav_at[u].manhattan(cell))
                .filter(|&d| d <= remaining)
                .min()
                .map(|d| (d as i64, 0))
        }
        Goal::Deliver(asset) => {
            let cell = world.assets()[asset].location;
            let mut moves: Option<i64> = None;
            let mut acts: Option<i64> = None;
            let mut consider = |m: u32, a: u32| {
                if m + a <= remaining {
                    moves = Some(moves.map_or(m as i64, |x| x.min(m as i64)));
                    acts = Some(acts.map_or(a as i64, |x| x.min(a as i64)));
                }
            };
            for p in 0..world.pallets().len() {
                if !world.accepts(asset, p) || state.pallet_delivered(world, p) {
                    continue;
                }
                let origin = world.pallets()[p].location;
                for u in active() {
                    let here = state.uav_at[u];
                    if state.carrying[u] == Some(p as u8) {
                        consider(here.manhattan(cell), 1);
                    } else if world.uavs()[u].can_carry && state.pallet_at_origin(world, p) {
                        consider(here.manhattan(origin) + origin.manhattan(cell), 2);
                    }
                }
            }
            moves.zip(acts)
        }
    }
}

/// Free-function form of [`Product::upper_bound`].
pub fn upper_bound(node: &ProductNode, product: &Product<'_>) -> Bound {
    product.upper_bound(node)
}

type Key = (JointState, SmallVec<[StateId; 8]>, SmallVec<[Option<u32>; 8]>);

struct Entry {
    node: ProductNode,
    parent: Option<u32>,
    action: Option<JointAction>,
}

fn effective_world(world: &World, config: &SearchConfig) -> Result<World, PlanError> {
    Ok(match config.horizon {
        Some(h) if h != world.horizon() => world.with_horizon(h)?,
        _ => world.clone(),
    })
}

fn search(world: &World, prefs: &PreferenceSet, config: &SearchConfig, provenance: Provenance) -> Result<Plan, PlanError> {
    let world = effective_world(world, config)?;
    let mut product = Product::new(&world, prefs, config)?;
    let root = product.root()?;

    let mut arena: Vec<Entry> = Vec::new();
    let mut seen: HashMap<Key, u32> = HashMap::new();
    // (bound desc, depth asc, insertion order): among equal bounds the
    // shortest plan is found first
    let mut frontier: BTreeSet<(Reverse<i64>, u32, u32)> = BTreeSet::new();
    let mut best: Option<(i64, u32)> = None;

    let key_of = |n: &ProductNode| -> Key { (n.state.clone(), n.automaton_states.clone(), n.first_sat.clone()) };

    let consider = |product: &Product<'_>, node: &ProductNode, idx: u32, best: &mut Option<(i64, u32)>| {
        if node.state.all_goals_met(product.world()) {
            let v = product.terminal_score(node).total;
            if best.is_none_or(|(b, _)| v > b) {
                *best = Some((v, idx));
            }
        }
    };

    let root_bound = product.upper_bound(&root);
    seen.insert(key_of(&root), root.actions);
    arena.push(Entry {
        node: root,
        parent: None,
        action: None,
    });
    consider(&product, &arena[0].node, 0, &mut best);
    if root_bound.hard_goals_reachable {
        frontier.insert((Reverse(root_bound.value), 0, 0));
    }

    let mut expanded = 0usize;
    while let Some(item) = frontier.pop_first() {
        let (Reverse(bound), _, idx) = item;
        if best.is_some_and(|(b, _)| bound <= b) {
            break;
        }
        let node = arena[idx as usize].node.clone();
        if seen.get(&key_of(&node)).is_some_and(|&a| a < node.actions) {
            continue;
        }
        if node.state.t >= world.horizon() {
            continue;
        }
        expanded += 1;
        if expanded > config.node_budget {
            let best = match best {
                Some((_, i)) => Some(Box::new(reconstruct(&arena, i, &world, prefs, config, provenance)?)),
                None => None,
            };
            return Err(PlanError::BudgetExhausted {
                budget: config.node_budget,
                best,
            });
        }
        for action in applicable(&node.state, &world) {
            let child = product.child(&node, &action)?;
            let b = product.upper_bound(&child);
            if !b.hard_goals_reachable || best.is_some_and(|(v, _)| b.value <= v) {
                continue;
            }
            let key = key_of(&child);
            if seen.get(&key).is_some_and(|&a| a <= child.actions) {
                continue;
            }
            seen.insert(key, child.actions);
            let cidx = arena.len() as u32;
            let depth = child.state.t;
            arena.push(Entry {
                node: child,
                parent: Some(idx),
                action: Some(action),
            });
            consider(&product, &arena[cidx as usize].node, cidx, &mut best);
            frontier.insert((Reverse(b.value), depth, cidx));
        }
        if let Some(w) = config.beam_width {
            while frontier.len() > w.max(1) {
                frontier.pop_last();
            }
        }
    }

    match best {
        Some((value, i)) => {
            let plan = reconstruct(&arena, i, &world, prefs, config, provenance)?;
            debug_assert_eq!(plan.score.total, value);
            Ok(plan)
        }
        None => Err(PlanError::Unsolvable {
            horizon: world.horizon(),
        }),
    }
}

fn reconstruct(
    arena: &[Entry],
    mut idx: u32,
    world: &World,
    prefs: &PreferenceSet,
    config: &SearchConfig,
    provenance: Provenance,
) -> Result<Plan, PlanError> {
    let mut actions = Vec::new();
    while let Some(parent) = arena[idx as usize].parent {
        actions.push(arena[idx as usize].action.clone().expect("non-root has an action"));
        idx = parent;
    }
    actions.reverse();
    Plan::from_actions(world, prefs, config, actions, provenance)
}

/// Best plan for the mission goals alone.
pub fn plan_baseline(world: &World, config: &SearchConfig) -> Result<Plan, PlanError> {
    search(world, &PreferenceSet::default(), config, Provenance::Baseline)
}

/// Best plan for mission goals plus soft preferences.
///
/// With an empty preference set this returns exactly the plan of
/// [`plan_baseline`].
pub fn plan_with_preferences(world: &World, prefs: &PreferenceSet, config: &SearchConfig) -> Result<Plan, PlanError> {
    let provenance = if prefs.is_empty() {
        Provenance::Baseline
    } else {
        Provenance::Constrained
    };
    search(world, prefs, config, provenance)
}

impl Plan {
    /// Replay `actions` from the initial state and score the result.
    pub fn from_actions(
        world: &World,
        prefs: &PreferenceSet,
        config: &SearchConfig,
        actions: Vec<JointAction>,
        provenance: Provenance,
    ) -> Result<Plan, PlanError> {
        let world = effective_world(world, config)?;
        let mut trace = vec![world.initial_state()];
        for a in &actions {
            let next = step(trace.last().expect("non-empty"), a, &world)
                .map_err(|e: StepError| PlanError::Invalid(e.to_string()))?;
            trace.push(next);
        }
        let mut plan = Plan {
            actions,
            trace,
            provenance,
            score: Score::default(),
        };
        plan.score = explain(&plan, &world, prefs, config).score;
        Ok(plan)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Line format: one `t=<k> <uav>:<action> ...` line per step, then a
    /// `; score ...` footer.
    pub fn render(&self, world: &World) -> String {
        let mut out = String::new();
        for (k, a) in self.actions.iter().enumerate() {
            out.push_str(&format!("t={k}"));
            for (u, x) in a.0.iter().enumerate() {
                out.push_str(&format!(" {}:{}", world.uavs()[u].id, x.render(world)));
            }
            out.push('\n');
        }
        out.push_str(&format!("{}\n", self.score));
        out
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "; score goals={} preferences={} orderings={} actions={} total={}",
            self.goals, self.preferences, self.orderings, self.actions, self.total
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct PlanTextError {
    pub line: usize,
    pub message: String,
}

/// Read the joint actions back from the line format. `;` lines are ignored.
pub fn parse_plan_text(text: &str, world: &World) -> Result<Vec<JointAction>, PlanTextError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with(';') {
            continue;
        }
        let err = |message: String| PlanTextError { line: i + 1, message };
        let mut words = line.split_whitespace();
        let stamp = words.next().unwrap_or_default();
        let k: usize = stamp
            .strip_prefix("t=")
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| err(format!("expected t=<k>, found `{stamp}`")))?;
        if k != out.len() {
            return Err(err(format!("expected t={}, found t={k}", out.len())));
        }
        let mut joint = JointAction::wait(world.uavs().len());
        let mut given = vec![false; world.uavs().len()];
        for w in words {
            let (uav, action) = w
                .split_once(':')
                .ok_or_else(|| err(format!("expected <uav>:<action>, found `{w}`")))?;
            let u = world.uav_index(uav).ok_or_else(|| err(format!("unknown UAV `{uav}`")))?;
            if std::mem::replace(&mut given[u], true) {
                return Err(err(format!("UAV `{uav}` listed twice")));
            }
            joint.0[u] = UavAction::parse(action, world).ok_or_else(|| err(format!("unknown action `{action}`")))?;
        }
        out.push(joint);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceStatus {
    pub name: String,
    pub kind: ConstraintKind,
    pub weight: i64,
    pub satisfied: bool,
    pub first_sat: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderingStatus {
    pub earlier: String,
    pub later: String,
    pub weight: i64,
    pub preserved: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalStatus {
    pub id: String,
    pub achieved: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub goals: Vec<GoalStatus>,
    pub preferences: Vec<PreferenceStatus>,
    pub orderings: Vec<OrderingStatus>,
    pub score: Score,
}

/// Per-preference and per-ordering outcome of a plan, with a score
/// decomposition that sums to the plan's deterministic score.
pub fn explain(plan: &Plan, world: &World, prefs: &PreferenceSet, config: &SearchConfig) -> Explanation {
    let last = plan.trace.last().expect("trace holds the initial state");
    let labels: Vec<Observed<'_>> = plan.trace.iter().map(|state| Observed { state, world }).collect();
    let goals: Vec<GoalStatus> = world
        .goals()
        .iter()
        .map(|&g| GoalStatus {
            id: world.goal_id(g),
            achieved: last.goal_met(world, g),
        })
        .collect();
    let preferences: Vec<PreferenceStatus> = prefs
        .preferences
        .iter()
        .map(|p| {
            let first = prefs::first_satisfaction(&prefs::lower(&p.template), &labels);
            PreferenceStatus {
                name: p.name.clone(),
                kind: prefs::classify(p),
                weight: p.weight,
                satisfied: first.is_some(),
                first_sat: first,
            }
        })
        .collect();
    let times: std::collections::BTreeMap<String, u32> = preferences
        .iter()
        .filter_map(|p| p.first_sat.map(|t| (p.name.clone(), t)))
        .collect();
    let orderings: Vec<OrderingStatus> = prefs
        .orderings
        .iter()
        .map(|o| OrderingStatus {
            earlier: o.earlier.clone(),
            later: o.later.clone(),
            weight: o.weight,
            preserved: matches!((times.get(&o.earlier), times.get(&o.later)), (Some(a), Some(b)) if a <= b),
        })
        .collect();
    let goal_reward = goals.iter().filter(|g| g.achieved).count() as i64 * config.goal_reward;
    let pref_reward: i64 = preferences.iter().filter(|p| p.satisfied).map(|p| p.weight).sum();
    let ord_reward = prefs::score_orderings(prefs, &times).expect("names come from the set");
    let actions: i64 = plan.actions.iter().map(|a| a.cost() as i64).sum();
    Explanation {
        goals,
        preferences,
        orderings,
        score: Score {
            goals: goal_reward,
            preferences: pref_reward,
            orderings: ord_reward,
            actions,
            total: goal_reward + pref_reward + ord_reward - actions * config.action_cost,
        },
    }
}
