//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! Every oracle here is written against the definitions, not against the
//! library's own machinery: temporal formulas and preference templates are
//! evaluated by direct quantification over trace positions, plans are found
//! by exhaustive enumeration, and optimal returns by unmemoized expectimax.

use std::collections::BTreeSet;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resplan::assess::{
    expected_return, optimal_return, ActionKind, ActionPattern, AssessmentModel, CellPredicate, Failure,
    Hypothesis, OutcomeRule, StepFilter,
};
use resplan::domain::{
    applicable, step, Asset, Cell, Goal, Grid, JointAction, JointState, Pallet, Proposition, Target, TargetStatus,
    Uav, UavAction, World,
};
use resplan::ltl::{compile, end_check, evaluate, progress, Automaton, Formula, DEFAULT_STATE_BOUND};
use resplan::planner::{plan_baseline, plan_with_preferences, SearchConfig};
use resplan::prefs::{self, Condition, Ordering, Preference, PreferenceSet, Template};
use resplan::scenarios::{self, IntelligenceUpdate, Rewards, Scenario};
use resplan::Rational64;

/// Absolute tolerance for floating-point return comparisons.
const TOL: f64 = 1e-9;
const GOAL_REWARD: i64 = 20;
const ACTION_COST: i64 = 1;

const SEMANTICS_BUDGET: Duration = Duration::from_secs(60);
const PLANNER_BUDGET: Duration = Duration::from_secs(5 * 60);
const SCENARIO_BUDGET: Duration = Duration::from_secs(10 * 60);

type Outcome = Result<String, String>;

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Outcome); 8] = [
        ("semantics triple-equivalence", semantics),
        ("planner exactness", planner_exactness),
        ("assessment exactness", assessment_exactness),
        ("return arithmetic 35 / 5 / +10", arithmetic),
        ("scenario directionality", directionality),
        ("empty-constraints identity", empty_identity),
        ("parser and format round-trips", round_trips),
        ("cli compare on t1", cli_compare),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} ({secs:.1} s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Temporal semantics

type Label = BTreeSet<u8>;

/// LTLf with strong next, by quantification over positions.
fn holds(f: &Formula<u8>, trace: &[Label], i: usize) -> bool {
    use Formula::*;
    let n = trace.len();
    match f {
        True => true,
        False => false,
        Atom(a) => trace[i].contains(a),
        Not(x) => !holds(x, trace, i),
        And(a, b) => holds(a, trace, i) && holds(b, trace, i),
        Or(a, b) => holds(a, trace, i) || holds(b, trace, i),
        Next(x) => i + 1 < n && holds(x, trace, i + 1),
        WeakNext(x) => i + 1 == n || holds(x, trace, i + 1),
        Until(a, b) => (i..n).any(|j| holds(b, trace, j) && (i..j).all(|k| holds(a, trace, k))),
        Release(a, b) => (i..n).all(|j| holds(b, trace, j) || (i..j).any(|k| holds(a, trace, k))),
        Eventually(x) => (i..n).any(|j| holds(x, trace, j)),
        Always(x) => (i..n).all(|j| holds(x, trace, j)),
    }
}

fn battery() -> Vec<Formula<u8>> {
    type F = Formula<u8>;
    let p = || F::atom(0);
    let q = || F::atom(1);
    vec![
        F::until(p(), q()),
        F::release(p(), q()),
        F::always(F::eventually(p())),
        F::eventually(F::always(p())),
        F::next(p()),
        F::weak_next(p()),
        F::next(F::next(q())),
        F::not(F::next(F::True)),
        F::weak_next(F::False),
        F::always(F::implies(p(), F::eventually(q()))),
        F::eventually(F::and(p(), F::weak_next(F::False))),
        F::always(F::implies(p(), F::next(q()))),
        F::weak_until(p(), q()),
        F::or(F::always(F::not(q())), F::until(F::not(q()), F::and(p(), F::not(q())))),
        F::always(F::implies(
            p(),
            F::or(F::until(p(), F::always(F::not(p()))), F::always(p())),
        )),
        F::and(F::eventually(p()), F::eventually(F::not(p()))),
        F::until(F::True, F::and(p(), F::next(F::not(p())))),
        F::not(F::until(p(), F::or(q(), F::next(p())))),
        F::release(F::False, F::or(p(), q())),
        F::eventually(F::and(q(), F::next(F::always(F::not(q()))))),
    ]
}

fn all_traces(atoms: u8, max_len: usize) -> Vec<Vec<Label>> {
    let letters: Vec<Label> = (0..1u32 << atoms)
        .map(|m| (0..atoms).filter(|i| m & (1 << i) != 0).collect())
        .collect();
    let mut out = Vec::new();
    let mut layer = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|t: &Vec<Label>| {
                letters.iter().map(move |l| {
                    let mut t = t.clone();
                    t.push(l.clone());
                    t
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn random_formula(rng: &mut ChaCha8Rng, atoms: u8, depth: u32) -> Formula<u8> {
    type F = Formula<u8>;
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..6) {
            0 => F::True,
            1 => F::False,
            _ => F::atom(rng.gen_range(0..atoms)),
        };
    }
    let sub = |rng: &mut ChaCha8Rng| Box::new(random_formula(rng, atoms, depth - 1));
    match rng.gen_range(0..10) {
        0 => F::Not(sub(rng)),
        1 => F::And(sub(rng), sub(rng)),
        2 => F::Or(sub(rng), sub(rng)),
        3 => F::Next(sub(rng)),
        4 => F::WeakNext(sub(rng)),
        5 => F::Until(sub(rng), sub(rng)),
        6 => F::Release(sub(rng), sub(rng)),
        7 => F::Eventually(sub(rng)),
        8 => F::Always(sub(rng)),
        _ => F::Not(Box::new(F::Until(sub(rng), sub(rng)))),
    }
}

/// Compare direct evaluation, progression, the compiled acceptor and the
/// oracle on one trace.
fn agree(f: &Formula<u8>, aut: &mut Automaton<u8>, trace: &[Label]) -> Result<(), String> {
    let oracle = holds(f, trace, 0);
    let direct = evaluate(f, trace, 0).map_err(|e| e.to_string())?;
    let mut residue = f.clone();
    for l in trace {
        residue = progress(&residue, l);
    }
    let folded = end_check(&residue);
    let accepted = aut.accepts(trace).map_err(|e| e.to_string())?;
    ensure(direct == oracle && folded == oracle && accepted == oracle, || {
        format!(
            "{f:?} on {trace:?}: oracle {oracle}, evaluate {direct}, progression {folded}, automaton {accepted}"
        )
    })
}

fn semantics() -> Outcome {
    let start = Instant::now();
    let traces = all_traces(2, 5);
    let formulas = battery();
    let mut cases = 0;
    for f in &formulas {
        let mut aut = compile(f).map_err(|e| e.to_string())?;
        for t in &traces {
            agree(f, &mut aut, t)?;
            cases += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..10_000 {
        let f = random_formula(&mut rng, 3, 4);
        let len = rng.gen_range(1..=6);
        let trace: Vec<Label> = (0..len)
            .map(|_| (0..3u8).filter(|_| rng.gen_bool(0.5)).collect())
            .collect();
        // full closures of random formulas can be huge; read them lazily
        let mut aut = Automaton::lazy(&f, DEFAULT_STATE_BOUND).map_err(|e| e.to_string())?;
        agree(&f, &mut aut, &trace)?;
        cases += 1;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < SEMANTICS_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} compiled formulas x {} traces + 10000 random (lazy automaton), {cases} cases, 0 disagreements",
        formulas.len(),
        traces.len()
    ))
}

// ---------------------------------------------------------------------------
// Preference templates over plan traces

fn cond(c: &Condition, s: &JointState, w: &World) -> bool {
    match c {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(p) => s.holds(w, p),
        Formula::Not(x) => !cond(x, s, w),
        Formula::And(a, b) => cond(a, s, w) && cond(b, s, w),
        Formula::Or(a, b) => cond(a, s, w) || cond(b, s, w),
        other => panic!("temporal operator in a condition: {other:?}"),
    }
}

/// PDDL3 template semantics on a finite state sequence.
fn template_holds(t: &Template, trace: &[JointState], w: &World) -> bool {
    let at = |c: &Condition, i: usize| cond(c, &trace[i], w);
    let n = trace.len();
    match t {
        Template::Sometime(c) => (0..n).any(|i| at(c, i)),
        Template::Always(c) => (0..n).all(|i| at(c, i)),
        Template::SometimeAfter(a, b) => (0..n).all(|i| !at(a, i) || (i..n).any(|j| at(b, j))),
        Template::SometimeBefore(a, b) => (0..n).all(|j| !at(b, j) || (0..j).any(|i| at(a, i))),
        Template::AtMostOnce(c) => (1..n).filter(|&i| at(c, i) && !at(c, i - 1)).count() + usize::from(at(c, 0)) <= 1,
        Template::AtEnd(c) => at(c, n - 1),
    }
}

/// Earliest prefix end at which the template holds, if it holds overall.
fn first_sat(t: &Template, trace: &[JointState], w: &World) -> Option<usize> {
    if !template_holds(t, trace, w) {
        return None;
    }
    (1..=trace.len()).find(|&k| template_holds(t, &trace[..k], w)).map(|k| k - 1)
}

/// Preference and ordering reward of a trace.
fn preference_reward(set: &PreferenceSet, trace: &[JointState], w: &World) -> i64 {
    let firsts: Vec<Option<usize>> = set.preferences.iter().map(|p| first_sat(&p.template, trace, w)).collect();
    let mut total: i64 = set
        .preferences
        .iter()
        .zip(&firsts)
        .filter(|(_, f)| f.is_some())
        .map(|(p, _)| p.weight)
        .sum();
    for o in &set.orderings {
        let idx = |n: &str| set.preferences.iter().position(|p| p.name == n).unwrap();
        if let (Some(a), Some(b)) = (firsts[idx(&o.earlier)], firsts[idx(&o.later)]) {
            if a <= b {
                total += o.weight;
            }
        }
    }
    total
}

// ---------------------------------------------------------------------------
// Random small instances

fn rand_cell(rng: &mut ChaCha8Rng, g: Grid) -> Cell {
    Cell::new(rng.gen_range(0..g.width), rng.gen_range(0..g.height))
}

fn random_world(rng: &mut ChaCha8Rng, uavs: usize, max_side: i32, horizon: u32) -> World {
    loop {
        let g = Grid {
            width: rng.gen_range(2..=max_side),
            height: rng.gen_range(2..=max_side),
        };
        let us: Vec<Uav> = (0..uavs)
            .map(|i| Uav {
                id: format!("u{}", i + 1),
                start: rand_cell(rng, g),
                can_carry: rng.gen_bool(0.6),
                operational: true,
            })
            .collect();
        let targets: Vec<Target> = (0..rng.gen_range(1..=2))
            .map(|i| Target {
                id: format!("t{}", i + 1),
                trajectory: (0..rng.gen_range(1..=3)).map(|_| rand_cell(rng, g)).collect(),
                status: TargetStatus::Unknown,
            })
            .collect();
        let pallets: Vec<Pallet> = (0..rng.gen_range(0..=1))
            .map(|i| Pallet {
                id: format!("r{}", i + 1),
                location: rand_cell(rng, g),
            })
            .collect();
        let assets: Vec<Asset> = (0..rng.gen_range(0..=1))
            .map(|i| Asset {
                id: format!("a{}", i + 1),
                location: rand_cell(rng, g),
                needs_pallet: None,
            })
            .collect();
        let mut candidates: Vec<Goal> = (0..targets.len()).map(Goal::Photo).collect();
        candidates.extend((0..assets.len()).map(Goal::Visit));
        if !pallets.is_empty() && us.iter().any(|u| u.can_carry) {
            candidates.extend((0..assets.len()).map(Goal::Deliver));
        }
        let goals: Vec<Goal> = candidates.into_iter().filter(|_| rng.gen_bool(0.6)).collect();
        if let Ok(w) = World::new(g, us, targets, assets, pallets, horizon, goals) {
            return w;
        }
    }
}

fn random_prop(rng: &mut ChaCha8Rng, w: &World) -> Proposition {
    let u = rng.gen_range(0..w.uavs().len());
    loop {
        match rng.gen_range(0..6) {
            0 | 1 => {
                return Proposition::AgentLoc {
                    uav: u,
                    cell: rand_cell(rng, w.grid()),
                }
            }
            2 => {
                return Proposition::HavePhoto {
                    target: rng.gen_range(0..w.targets().len()),
                    uav: u,
                }
            }
            3 if !w.assets().is_empty() => {
                return Proposition::Visited {
                    asset: rng.gen_range(0..w.assets().len()),
                    uav: u,
                }
            }
            4 if !w.pallets().is_empty() => {
                return Proposition::CarryPallet {
                    pallet: rng.gen_range(0..w.pallets().len()),
                    uav: u,
                }
            }
            5 => return Proposition::TimeEq(rng.gen_range(0..=w.horizon())),
            _ => {}
        }
    }
}

fn random_condition(rng: &mut ChaCha8Rng, w: &World, depth: u32) -> Condition {
    if depth == 0 || rng.gen_bool(0.4) {
        return Formula::atom(random_prop(rng, w));
    }
    match rng.gen_range(0..3) {
        0 => Formula::not(random_condition(rng, w, depth - 1)),
        1 => Formula::and(random_condition(rng, w, depth - 1), random_condition(rng, w, depth - 1)),
        _ => Formula::or(random_condition(rng, w, depth - 1), random_condition(rng, w, depth - 1)),
    }
}

fn random_template(rng: &mut ChaCha8Rng, w: &World) -> Template {
    let c = |rng: &mut ChaCha8Rng| random_condition(rng, w, 2);
    match rng.gen_range(0..6) {
        0 => Template::Sometime(c(rng)),
        1 => Template::Always(c(rng)),
        2 => Template::SometimeAfter(c(rng), c(rng)),
        3 => Template::SometimeBefore(c(rng), c(rng)),
        4 => Template::AtMostOnce(c(rng)),
        _ => Template::AtEnd(c(rng)),
    }
}

fn random_prefs(rng: &mut ChaCha8Rng, w: &World, max: usize, prefix: &str) -> PreferenceSet {
    let n = rng.gen_range(0..=max);
    let preferences: Vec<Preference> = (0..n)
        .map(|i| Preference {
            name: format!("{prefix}{i}"),
            template: random_template(rng, w),
            weight: *[5, 10, 20, 35].choose(rng).unwrap(),
        })
        .collect();
    let mut orderings = Vec::new();
    if n >= 2 && rng.gen_bool(0.5) {
        let mut ix: Vec<usize> = (0..n).collect();
        ix.shuffle(rng);
        orderings.push(Ordering {
            earlier: preferences[ix[0]].name.clone(),
            later: preferences[ix[1]].name.clone(),
            weight: *[10, 15].choose(rng).unwrap(),
        });
    }
    PreferenceSet { preferences, orderings }
}

// ---------------------------------------------------------------------------
// Planner exactness

/// Best deterministic score over every action sequence within the horizon
/// whose final state meets all goals.
fn enumerate_best(w: &World, set: &PreferenceSet) -> Option<i64> {
    fn dfs(w: &World, set: &PreferenceSet, trace: &mut Vec<JointState>, cost: i64, best: &mut Option<i64>) {
        let last = trace.last().unwrap().clone();
        if last.all_goals_met(w) {
            let score = GOAL_REWARD * w.goals().len() as i64 + preference_reward(set, trace, w) - cost;
            *best = Some(best.map_or(score, |b| b.max(score)));
        }
        if last.t >= w.horizon() {
            return;
        }
        for a in applicable(&last, w) {
            trace.push(step(&last, &a, w).unwrap());
            dfs(w, set, trace, cost + ACTION_COST * a.cost() as i64, best);
            trace.pop();
        }
    }
    let mut best = None;
    dfs(w, set, &mut vec![w.initial_state()], 0, &mut best);
    best
}

fn planner_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let config = SearchConfig::default();
    let (mut solved, mut unsolvable) = (0, 0);
    for i in 0..36 {
        let w = if i >= 30 {
            // too short to reach most goals
            random_world(&mut rng, 1, 4, 1)
        } else if i % 3 == 2 {
            let h = rng.gen_range(3..=4);
            random_world(&mut rng, 2, 3, h)
        } else {
            let h = rng.gen_range(5..=8);
            random_world(&mut rng, 1, 4, h)
        };
        let set = random_prefs(&mut rng, &w, 3, "p");
        let oracle = enumerate_best(&w, &set);
        let got = plan_with_preferences(&w, &set, &config);
        match (oracle, got) {
            (Some(best), Ok(plan)) => {
                ensure(plan.score.total == best, || {
                    format!("instance {i}: planner {} vs enumeration {best}", plan.score.total)
                })?;
                let replayed = GOAL_REWARD * w.goals().len() as i64 + preference_reward(&set, &plan.trace, &w)
                    - ACTION_COST * plan.score.actions as i64;
                ensure(replayed == best, || format!("instance {i}: plan replays to {replayed}, not {best}"))?;
                solved += 1;
            }
            (None, Err(resplan::planner::PlanError::Unsolvable { .. })) => unsolvable += 1,
            (o, g) => return Err(format!("instance {i}: enumeration {o:?}, planner {:?}", g.map(|p| p.score))),
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < PLANNER_BUDGET, || format!("took {elapsed:?}"))?;
    ensure(solved >= 25, || format!("only {solved} solvable instances"))?;
    ensure(unsolvable >= 1, || "no unsolvable instance was generated".into())?;
    Ok(format!("{solved} solved + {unsolvable} unsolvable instances match enumeration exactly"))
}

// ---------------------------------------------------------------------------
// Assessment exactness

fn rule_for<'a>(rules: &'a [OutcomeRule], s: &JointState, u: usize, a: UavAction) -> Option<&'a OutcomeRule> {
    let kind_entity = match a {
        UavAction::Wait => return None,
        UavAction::Move(_) => (ActionKind::Move, None),
        UavAction::TakePhoto(t) => (ActionKind::Photo, Some(t)),
        UavAction::PickUp(p) => (ActionKind::Pickup, Some(p)),
        UavAction::Drop(x) => (ActionKind::Drop, Some(x)),
    };
    rules.iter().find(|r| {
        r.action.kind == kind_entity.0
            && (r.action.entity.is_none() || r.action.entity == kind_entity.1)
            && r.uav.is_none_or(|x| x == u)
            && match &r.cells {
                CellPredicate::Anywhere => true,
                CellPredicate::In(cs) => cs.contains(&s.uav_at[u]),
                CellPredicate::Beyond { center, radius } => s.uav_at[u].manhattan(*center) > *radius,
            }
            && r.steps.is_none_or(|f| s.t % f.modulus == f.remainder)
    })
}

/// (probability, effective action, cost, lost) for one UAV.
fn uav_outcomes(m: &AssessmentModel<f64>, s: &JointState, u: usize, a: UavAction) -> Vec<(f64, UavAction, i64, bool)> {
    if a.is_wait() {
        return vec![(1.0, a, 0, false)];
    }
    let Some(rule) = rule_for(&m.rules, s, u, a) else {
        return vec![(1.0, a, 1, false)];
    };
    let p = rule.success.unwrap_or(m.default_probability);
    let p = *p.numer() as f64 / *p.denom() as f64;
    let fail = match rule.on_failure {
        Failure::NoEffect => (1.0 - p, UavAction::Wait, 0, false),
        Failure::ActionWasted => (1.0 - p, UavAction::Wait, 1, false),
        Failure::UavLost => (1.0 - p, UavAction::Wait, 1, true),
    };
    vec![(p, a, 1, false), fail]
}

fn stop_reward(w: &World, set: &PreferenceSet, trace: &[JointState]) -> f64 {
    let last = trace.last().unwrap();
    let goals = w.goals().iter().filter(|g| last.goal_met(w, **g)).count() as i64;
    (GOAL_REWARD * goals + preference_reward(set, trace, w)) as f64
}

/// Expectimax over full histories with no memoization.
fn brute_expectimax(m: &AssessmentModel<f64>, set: &PreferenceSet, trace: &mut Vec<JointState>) -> f64 {
    let w = &m.world;
    let s = trace.last().unwrap().clone();
    let mut best = stop_reward(w, set, trace);
    if s.t >= w.horizon() {
        return best;
    }
    for a in applicable(&s, w) {
        let mut joint = vec![(1.0, Vec::new(), 0i64, 0u64)];
        for (u, &x) in a.0.iter().enumerate() {
            joint = joint
                .into_iter()
                .flat_map(|(p, eff, c, lost)| {
                    uav_outcomes(m, &s, u, x).into_iter().map(move |(q, e, k, l)| {
                        let mut eff = eff.clone();
                        eff.push(e);
                        (p * q, eff, c + k, lost | if l { 1u64 << u } else { 0 })
                    })
                })
                .collect();
        }
        let mut v = 0.0;
        for (p, eff, cost, lost) in joint {
            if p == 0.0 {
                continue;
            }
            let mut next = step(&s, &JointAction(eff.into_iter().collect()), w).unwrap();
            next.down |= lost;
            trace.push(next);
            v += p * (brute_expectimax(m, set, trace) - (ACTION_COST * cost) as f64);
            trace.pop();
        }
        if v > best {
            best = v;
        }
    }
    best
}

fn random_rule(rng: &mut ChaCha8Rng, w: &World) -> OutcomeRule {
    let kind = *[ActionKind::Move, ActionKind::Photo, ActionKind::Photo].choose(rng).unwrap();
    let entity = (kind == ActionKind::Photo && rng.gen_bool(0.5)).then(|| rng.gen_range(0..w.targets().len()));
    let cells = match rng.gen_range(0..3) {
        0 => CellPredicate::Anywhere,
        1 => CellPredicate::In((0..2).map(|_| rand_cell(rng, w.grid())).collect()),
        _ => CellPredicate::Beyond {
            center: w.uavs()[0].start,
            radius: rng.gen_range(0..2),
        },
    };
    OutcomeRule {
        action: ActionPattern { kind, entity },
        uav: rng.gen_bool(0.3).then(|| rng.gen_range(0..w.uavs().len())),
        cells,
        steps: rng.gen_bool(0.2).then_some(StepFilter {
            modulus: 2,
            remainder: rng.gen_range(0..2),
        }),
        success: rng
            .gen_bool(0.8)
            .then(|| Rational64::new(*[0, 1, 2, 3, 4].choose(rng).unwrap(), 4)),
        on_failure: *[Failure::NoEffect, Failure::ActionWasted, Failure::UavLost].choose(rng).unwrap(),
    }
}

fn mass_is_one(r: &resplan::ReturnReport) -> bool {
    (r.probability_mass() - 1.0).abs() <= TOL
}

fn assessment_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut reports = 0;
    let mut worst: f64 = 0.0;
    let instances = 12;
    for i in 0..instances {
        let w = if i % 3 == 2 {
            random_world(&mut rng, 2, 2, 3)
        } else {
            let h = rng.gen_range(4..=6);
            random_world(&mut rng, 1, 3, h)
        };
        let rules = (0..rng.gen_range(1..=2)).map(|_| random_rule(&mut rng, &w)).collect();
        let model = AssessmentModel::<f64>::new(w.clone()).with_rules(rules);
        let set = random_prefs(&mut rng, &w, 2, "p");
        let oracle = brute_expectimax(&model, &set, &mut vec![w.initial_state()]);
        let opt = optimal_return(&model, &set).map_err(|e| e.to_string())?;
        let diff = (opt.value - oracle).abs();
        worst = worst.max(diff);
        ensure(diff <= TOL, || format!("instance {i}: optimal_return {} vs brute force {oracle}", opt.value))?;
        let mut plans = Vec::new();
        if let Ok(p) = plan_with_preferences(&w, &set, &SearchConfig::default()) {
            plans.push(p);
        }
        plans.extend(opt.witness);
        for p in &plans {
            let r = expected_return(p, &model, &set).map_err(|e| e.to_string())?;
            ensure(mass_is_one(&r), || format!("instance {i}: probability mass {}", r.probability_mass()))?;
            ensure(r.expected_return <= opt.value + TOL, || {
                format!("instance {i}: a plan returns {} above the optimum {}", r.expected_return, opt.value)
            })?;
            reports += 1;
        }
    }
    Ok(format!(
        "{instances} instances within {TOL:e} (worst {worst:.1e}); {reports} reports conserve probability"
    ))
}

// ---------------------------------------------------------------------------
// Return arithmetic

fn corner_world(goals: Vec<Goal>) -> World {
    World::new(
        Grid { width: 3, height: 3 },
        vec![Uav {
            id: "uav1".into(),
            start: Cell::new(0, 0),
            can_carry: false,
            operational: true,
        }],
        vec![Target {
            id: "t1".into(),
            trajectory: vec![Cell::new(2, 2)],
            status: TargetStatus::Unknown,
        }],
        vec![Asset {
            id: "a1".into(),
            location: Cell::new(2, 2),
            needs_pallet: None,
        }],
        vec![],
        8,
        goals,
    )
    .unwrap()
}

fn arithmetic() -> Outcome {
    let r = |n: i64| Rational64::from_integer(n);
    let config = SearchConfig::default();

    // two goals reached with four moves and a photo
    let w = corner_world(vec![Goal::Photo(0), Goal::Visit(0)]);
    let plan = plan_baseline(&w, &config).map_err(|e| e.to_string())?;
    let model = AssessmentModel::<Rational64>::new(w.clone());
    let none = PreferenceSet::default();
    let det = expected_return(&plan, &model, &none).map_err(|e| e.to_string())?;
    ensure(plan.score.actions == 5 && det.expected_return == r(35), || {
        format!("{} actions, return {}", plan.score.actions, det.expected_return)
    })?;

    // the photo alone, taken in fog with even odds
    let w1 = corner_world(vec![Goal::Photo(0)]);
    let plan1 = plan_baseline(&w1, &config).map_err(|e| e.to_string())?;
    let fog = OutcomeRule {
        action: ActionPattern {
            kind: ActionKind::Photo,
            entity: None,
        },
        uav: None,
        cells: CellPredicate::In(vec![Cell::new(2, 2)]),
        steps: None,
        success: Some(Rational64::new(1, 2)),
        on_failure: Failure::ActionWasted,
    };
    let foggy = AssessmentModel::<Rational64>::new(w1).with_rules(vec![fog]);
    let f = expected_return(&plan1, &foggy, &none).map_err(|e| e.to_string())?;
    ensure(plan1.score.actions == 5 && f.expected_return == r(5), || {
        format!("fog: {} actions, return {}", plan1.score.actions, f.expected_return)
    })?;

    // the same plan with and without a preserved ordering
    let both = "(preference visit (sometime (visited a1 uav1)))\n(preference photo (sometime (have-photo t1 uav1)))\n";
    let plain = prefs::parse(both, &w).map_err(|e| e.to_string())?;
    let ordered = prefs::parse(&format!("{both}(ordering visit photo)"), &w).map_err(|e| e.to_string())?;
    let a = expected_return(&plan, &model, &plain).map_err(|e| e.to_string())?.expected_return;
    let b = expected_return(&plan, &model, &ordered).map_err(|e| e.to_string())?.expected_return;
    ensure(b - a == r(10), || format!("ordering adds {}", b - a))?;
    Ok("35 exactly, 5 exactly, +10 exactly".into())
}

// ---------------------------------------------------------------------------
// Scenarios

/// Regression values from the first computation: baseline, constrained, optimal.
const PINNED: [(&str, (i64, i64), (i64, i64), (i64, i64)); 6] = [
    ("t1", (58, 1), (68, 1), (68, 1)),
    ("t2", (34, 1), (41, 1), (41, 1)),
    ("t3", (11, 1), (31, 1), (31, 1)),
    ("t4", (27, 1), (32, 1), (32, 1)),
    ("t5", (207, 10), (33, 1), (33, 1)),
    ("t6", (23, 1), (29, 1), (32, 1)),
];

fn directionality() -> Outcome {
    let start = Instant::now();
    let all = scenarios::bundled();
    ensure(all.len() == 6, || format!("{} bundled scenarios", all.len()))?;
    let mut summary = Vec::new();
    for (s, (name, b, c, o)) in all.iter().zip(PINNED) {
        ensure(s.name == name, || format!("expected {name}, found {}", s.name))?;
        let cmp = s
            .compare::<Rational64>(&s.reference_constraints)
            .map_err(|e| format!("{name}: {e}"))?;
        let (base, cons, opt) = (cmp.baseline.expected_return, cmp.constrained.expected_return, cmp.optimal.value);
        ensure(base < cons && cons <= opt, || format!("{name}: base {base}, constrained {cons}, optimal {opt}"))?;
        let pinned = |(n, d): (i64, i64)| Rational64::new(n, d);
        ensure(base == pinned(b) && cons == pinned(c) && opt == pinned(o), || {
            format!("{name}: regression moved to {base} / {cons} / {opt}")
        })?;
        for r in [&cmp.baseline, &cmp.constrained] {
            ensure(r.probability_mass() == Rational64::from_integer(1), || format!("{name}: mass"))?;
        }
        summary.push(format!("{name} {base}<{cons}<={opt}"));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < SCENARIO_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(summary.join(", "))
}

fn empty_identity() -> Outcome {
    for s in scenarios::bundled() {
        let config = s.search_config();
        let base = plan_baseline(&s.world, &config).map_err(|e| e.to_string())?;
        let same = plan_with_preferences(&s.world, &PreferenceSet::default(), &config).map_err(|e| e.to_string())?;
        ensure(format!("{base:?}") == format!("{same:?}"), || format!("{}: plans differ", s.name))?;
    }
    Ok("six scenarios bit-identical".into())
}

// ---------------------------------------------------------------------------
// Round trips

fn random_scenario(rng: &mut ChaCha8Rng, i: usize) -> Scenario {
    let (uavs, horizon) = (rng.gen_range(1..=2), rng.gen_range(3..=12));
    let w = random_world(rng, uavs, 5, horizon);
    let operator = random_prefs(rng, &w, 2, "op");
    let reference = random_prefs(rng, &w, 2, "ref");
    let rules = (0..rng.gen_range(0..=3)).map(|_| random_rule(rng, &w)).collect();
    let hypotheses = if w.pallets().is_empty() || rng.gen_bool(0.5) {
        vec![]
    } else {
        vec![
            Hypothesis {
                probability: Rational64::new(1, 3),
                phantom: vec![0],
            },
            Hypothesis {
                probability: Rational64::new(2, 3),
                phantom: vec![],
            },
        ]
    };
    let words = ["fog", "over", "the", "ridge", "(4,2)", "expected;", "UAV", "late."];
    let text: Vec<String> = (0..rng.gen_range(0..3))
        .map(|_| {
            (0..rng.gen_range(1..6))
                .map(|_| *words.choose(rng).unwrap())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    Scenario {
        name: format!("gen-{i}"),
        title: if rng.gen_bool(0.5) { format!("Generated {i}") } else { String::new() },
        world: w,
        operator_preferences: operator,
        rewards: Rewards {
            goal_reward: *[20, 25].choose(rng).unwrap(),
            action_cost: rng.gen_range(0..=2),
            ordering_reward: 10,
            default_probability: Rational64::new(rng.gen_range(0..=4), 4),
            discount: Rational64::new(rng.gen_range(1..=10), 10),
        },
        update: IntelligenceUpdate {
            text: text.join("\n"),
            rules,
            hypotheses,
        },
        reference_constraints: reference,
    }
}

fn round_trips() -> Outcome {
    let mut n = 0;
    for (name, scn, reference) in scenarios::BUNDLED {
        let s = scenarios::bundled_named(name).unwrap();
        let text = scenarios::render(&s);
        ensure(scenarios::parse(&text).map_err(|e| e.to_string())? == s, || format!("{name} scenario"))?;
        let original = scenarios::parse(scn).map_err(|e| e.to_string())?;
        ensure(scenarios::parse(&scenarios::render(&original)).map_err(|e| e.to_string())? == original, || {
            format!("{name} file")
        })?;
        let set = s.parse_constraints(reference).map_err(|e| e.to_string())?;
        let back = s.parse_constraints(&prefs::render(&set, &s.world)).map_err(|e| e.to_string())?;
        ensure(back == set, || format!("{name} constraints"))?;
        n += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for i in 0..1000 {
        let w = random_world(&mut rng, 2, 5, 10);
        let set = random_prefs(&mut rng, &w, 4, "c");
        let text = prefs::render(&set, &w);
        let back = prefs::parse(&text, &w).map_err(|e| format!("set {i}: {e}\n{text}"))?;
        ensure(back == set, || format!("set {i} changed:\n{text}"))?;
    }
    for i in 0..1000 {
        let s = random_scenario(&mut rng, i);
        let text = scenarios::render(&s);
        let back = scenarios::parse(&text).map_err(|e| format!("scenario {i}: {e}\n{text}"))?;
        ensure(back == s, || format!("scenario {i} changed:\n{text}"))?;
    }
    Ok(format!("{n} bundled scenarios and constraint files, 1000 constraint sets, 1000 scenarios"))
}

// ---------------------------------------------------------------------------
// CLI

fn cli_compare() -> Outcome {
    let out = Command::new(env!("CARGO_BIN_EXE_resplan"))
        .args(["compare", "t1"])
        .output()
        .map_err(|e| e.to_string())?;
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    ensure(out.status.success(), || format!("exit {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr)))?;
    let row = stdout
        .lines()
        .find(|l| l.starts_with("t1 "))
        .ok_or_else(|| format!("no t1 row in\n{stdout}"))?;
    let cols: Vec<&str> = row.split_whitespace().collect();
    ensure(cols.len() == 6, || format!("row `{row}`"))?;
    let one_decimal = |s: &str| {
        let s = s.trim_end_matches('%').trim_start_matches(['+', '-']);
        matches!(s.split_once('.'), Some((i, f)) if !i.is_empty() && i.bytes().all(|b| b.is_ascii_digit()) && f.len() == 1 && f.bytes().all(|b| b.is_ascii_digit()))
    };
    ensure(cols[1..].iter().all(|c| one_decimal(c)), || format!("not 1-decimal: `{row}`"))?;
    let pct = |s: &str| s.trim_end_matches('%').parse::<f64>().unwrap_or(f64::NAN);
    let (imp, opt) = (pct(cols[4]), pct(cols[5]));
    ensure(imp > 0.0 && opt <= 0.0, || format!("improvement {imp}, optimality {opt}"))?;
    Ok(format!("`{}`", cols.join(" ")))
}
