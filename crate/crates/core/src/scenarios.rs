//! Scenario files and the bundled reconstructions.
//!
//! A scenario file is line oriented. The first meaningful line is the format
//! header, then `name` and `title`, then sections:
//!
//! ```text
//! scenario-format v1
//! name t1
//! title Fog in a specific area
//!
//! [world]
//! grid 8 6
//! horizon 12
//! uav uav1 4,4 carry
//! target t1 unknown 6,2 5,2 4,2
//! asset a1 4,0 needs r1
//! pallet r1 1,1
//! goal photo t1
//!
//! [operator-preferences]
//! (preference ...)
//!
//! [assessment]
//! goal-reward 20
//! rule photo in 4,2 5,2 p 0.5 fail action-wasted
//! hypothesis 1/2 phantom r1
//!
//! [update]
//! Free text, kept verbatim.
//!
//! [reference-constraints]
//! (preference ...)
//! ```
//!
//! `;` starts a comment everywhere except in `[update]`.

use std::path::Path;

use num_rational::Ratio;
use thiserror::Error;

use crate::assess::{
    self, ActionKind, ActionPattern, AssessError, AssessmentModel, CellPredicate, Failure, Hypothesis,
    OptimalReport, OutcomeRule, Probability, ReturnReport, StepFilter,
};
use crate::domain::{Asset, Cell, DomainError, Goal, Grid, Pallet, Target, TargetStatus, Uav, World};
use crate::planner::{self, Plan, PlanError, SearchConfig};
use crate::prefs::{self, PreferenceSet, PrefsError, Weights};
use crate::scalar::{parse_probability, render_probability, Scalar};
use crate::sexpr::Pos;

pub const FORMAT_VERSION: &str = "scenario-format v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rewards {
    pub goal_reward: i64,
    pub action_cost: i64,
    pub ordering_reward: i64,
    pub default_probability: Probability,
    pub discount: Probability,
}

impl Default for Rewards {
    fn default() -> Self {
        Rewards {
            goal_reward: planner::DEFAULT_GOAL_REWARD,
            action_cost: planner::DEFAULT_ACTION_COST,
            ordering_reward: prefs::DEFAULT_ORDERING_WEIGHT,
            default_probability: Ratio::new(1, 2),
            discount: Ratio::from_integer(1),
        }
    }
}

/// What changed after the plan was made. The text is for the operator; the
/// rules and hypotheses are for the assessment.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntelligenceUpdate {
    pub text: String,
    pub rules: Vec<OutcomeRule>,
    pub hypotheses: Vec<Hypothesis>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub title: String,
    pub world: World,
    pub operator_preferences: PreferenceSet,
    pub rewards: Rewards,
    pub update: IntelligenceUpdate,
    /// Constraints a domain expert wrote in response to the update.
    pub reference_constraints: PreferenceSet,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: `{field}`: {message}")]
    Field {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("`{field}`: {source}")]
    World {
        field: &'static str,
        #[source]
        source: DomainError,
    },
    #[error("[{section}] {source}")]
    Preferences {
        section: &'static str,
        #[source]
        source: PrefsError,
    },
    #[error("`assessment`: {0}")]
    Assessment(AssessError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ScenarioError {
    /// Position in the file, when the error has one.
    pub fn pos(&self) -> Option<Pos> {
        match self {
            ScenarioError::Syntax { line, column, .. } | ScenarioError::Field { line, column, .. } => Some(Pos {
                line: *line,
                column: *column,
            }),
            ScenarioError::Preferences { source, .. } => Some(source.pos()),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("constraints: {0}")]
    Constraints(#[from] PrefsError),
    #[error("planning: {0}")]
    Plan(#[from] PlanError),
    #[error("assessment: {0}")]
    Assess(#[from] AssessError),
    #[error("horizon: {0}")]
    Horizon(#[from] DomainError),
}

/// Baseline, constrained and optimal returns for one scenario.
#[derive(Debug, Clone)]
pub struct Comparison<S> {
    pub baseline_plan: Plan,
    pub constrained_plan: Plan,
    pub baseline: ReturnReport<S>,
    pub constrained: ReturnReport<S>,
    pub optimal: OptimalReport<S>,
}

impl<S: Scalar> Comparison<S> {
    /// Percent change of the constrained return over the baseline.
    pub fn improvement(&self) -> Result<S, AssessError> {
        assess::improvement(&self.baseline, &self.constrained)
    }

    /// Percent change of the constrained return relative to the optimum.
    pub fn optimality(&self) -> Result<S, AssessError> {
        assess::optimality(&self.optimal.value, &self.constrained)
    }
}

impl Scenario {
    pub fn weights(&self) -> Weights {
        Weights {
            preference: self.rewards.goal_reward,
            ordering: self.rewards.ordering_reward,
        }
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            goal_reward: self.rewards.goal_reward,
            action_cost: self.rewards.action_cost,
            ..SearchConfig::default()
        }
    }

    pub fn model<S: Scalar>(&self) -> AssessmentModel<S> {
        let r = &self.rewards;
        AssessmentModel {
            rules: self.update.rules.clone(),
            hypotheses: self.update.hypotheses.clone(),
            goal_reward: S::from_int(r.goal_reward),
            action_cost: S::from_int(r.action_cost),
            ordering_reward: S::from_int(r.ordering_reward),
            default_probability: r.default_probability,
            discount: S::from_prob(r.discount),
            ..AssessmentModel::new(self.world.clone())
        }
    }

    /// The same scenario with a different planning horizon.
    pub fn with_horizon(&self, horizon: u32) -> Result<Scenario, DomainError> {
        Ok(Scenario {
            world: self.world.with_horizon(horizon)?,
            ..self.clone()
        })
    }

    pub fn parse_constraints(&self, text: &str) -> Result<PreferenceSet, PrefsError> {
        prefs::parse_with(text, &self.world, self.weights())
    }

    /// The plan made before the update, from the operator's preferences.
    pub fn baseline_plan(&self, config: &SearchConfig) -> Result<Plan, PlanError> {
        planner::plan_with_preferences(&self.world, &self.operator_preferences, config)
    }

    /// The plan made after the update, with extra constraints.
    pub fn constrained_plan(&self, constraints: &PreferenceSet, config: &SearchConfig) -> Result<Plan, CompareError> {
        let all = self.operator_preferences.merged(constraints)?;
        Ok(planner::plan_with_preferences(&self.world, &all, config)?)
    }

    /// Plan with and without `constraints` and assess both under the update.
    ///
    /// Returns are scored against the operator's preferences only; the
    /// constraints are a means to a better plan, not a source of reward.
    pub fn compare<S: Scalar>(&self, constraints: &PreferenceSet) -> Result<Comparison<S>, CompareError> {
        let config = self.search_config();
        let baseline_plan = self.baseline_plan(&config)?;
        let constrained_plan = self.constrained_plan(constraints, &config)?;
        let model = self.model::<S>();
        let prefs = &self.operator_preferences;
        Ok(Comparison {
            baseline: assess::expected_return(&baseline_plan, &model, prefs)?,
            constrained: assess::expected_return(&constrained_plan, &model, prefs)?,
            optimal: assess::optimal_return(&model, prefs)?,
            baseline_plan,
            constrained_plan,
        })
    }
}

// ---------------------------------------------------------------------------
// Reading

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let body = line.split(';').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in body.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token {
                    text: &body[s..i],
                    column: body[..s].chars().count() + 1,
                });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &body[s..],
            column: body[..s].chars().count() + 1,
        });
    }
    out
}

struct Line<'a> {
    number: usize,
    toks: Vec<Token<'a>>,
}

impl<'a> Line<'a> {
    fn err(&self, idx: usize, field: &str, message: impl Into<String>) -> ScenarioError {
        let column = self
            .toks
            .get(idx)
            .map(|t| t.column)
            .or_else(|| self.toks.last().map(|t| t.column + t.text.chars().count()))
            .unwrap_or(1);
        ScenarioError::Field {
            line: self.number,
            column,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn arg(&self, idx: usize, field: &str, what: &str) -> Result<&'a str, ScenarioError> {
        self.toks
            .get(idx)
            .map(|t| t.text)
            .ok_or_else(|| self.err(idx, field, format!("missing {what}")))
    }

    fn int<T: std::str::FromStr>(&self, idx: usize, field: &str, what: &str) -> Result<T, ScenarioError> {
        let s = self.arg(idx, field, what)?;
        s.parse()
            .map_err(|_| self.err(idx, field, format!("expected {what}, got `{s}`")))
    }

    fn prob(&self, idx: usize, field: &str) -> Result<Probability, ScenarioError> {
        let s = self.arg(idx, field, "probability")?;
        parse_probability(s).ok_or_else(|| self.err(idx, field, format!("`{s}` is not a probability in [0, 1]")))
    }

    fn cell(&self, idx: usize, field: &str) -> Result<Cell, ScenarioError> {
        let s = self.arg(idx, field, "cell")?;
        parse_cell(s).ok_or_else(|| self.err(idx, field, format!("expected a cell `x,y`, got `{s}`")))
    }

    fn done(&self, idx: usize, field: &str) -> Result<(), ScenarioError> {
        match self.toks.get(idx) {
            Some(t) => Err(self.err(idx, field, format!("unexpected `{}`", t.text))),
            None => Ok(()),
        }
    }
}

fn parse_cell(s: &str) -> Option<Cell> {
    let (x, y) = s.split_once(',')?;
    Some(Cell {
        x: x.parse().ok()?,
        y: y.parse().ok()?,
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Top,
    World,
    Operator,
    Assessment,
    Update,
    Reference,
}

impl Section {
    fn from_header(s: &str) -> Option<Section> {
        Some(match s {
            "[world]" => Section::World,
            "[operator-preferences]" => Section::Operator,
            "[assessment]" => Section::Assessment,
            "[update]" => Section::Update,
            "[reference-constraints]" => Section::Reference,
            _ => return None,
        })
    }
}

/// A block of raw lines belonging to one section.
#[derive(Default)]
struct Block<'a> {
    first_line: usize,
    lines: Vec<&'a str>,
    seen: bool,
}

impl Block<'_> {
    fn text(&self) -> String {
        self.lines.join("\n")
    }
    fn origin(&self) -> Pos {
        Pos {
            line: self.first_line,
            column: 1,
        }
    }
}

pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
    let mut header = false;
    let mut section = Section::Top;
    let mut name = None;
    let mut title = String::new();
    let mut world_lines: Vec<Line> = Vec::new();
    let mut assess_lines: Vec<Line> = Vec::new();
    let mut operator = Block::default();
    let mut reference = Block::default();
    let mut update = Block::default();
    let mut seen = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let trimmed = raw.trim();
        if !header {
            if trimmed.is_empty() || trimmed.starts_with(';') {
                continue;
            }
            let toks = tokens(raw);
            let words: Vec<&str> = toks.iter().map(|t| t.text).collect();
            if words.first() != Some(&"scenario-format") {
                return Err(ScenarioError::Syntax {
                    line: number,
                    column: 1,
                    message: format!("expected `{FORMAT_VERSION}` header"),
                });
            }
            if words != ["scenario-format", "v1"] {
                return Err(ScenarioError::Field {
                    line: number,
                    column: toks.get(1).map_or(16, |t| t.column),
                    field: "scenario-format".into(),
                    message: "unsupported version, expected v1".into(),
                });
            }
            header = true;
            continue;
        }
        if section != Section::Update || trimmed.starts_with('[') {
            if let Some(next) = trimmed.starts_with('[').then(|| Section::from_header(trimmed)) {
                let next = next.ok_or_else(|| ScenarioError::Syntax {
                    line: number,
                    column: raw.find('[').unwrap_or(0) + 1,
                    message: format!("unknown section `{trimmed}`"),
                })?;
                if seen.contains(&(next as u8)) {
                    return Err(ScenarioError::Syntax {
                        line: number,
                        column: 1,
                        message: format!("section `{trimmed}` appears twice"),
                    });
                }
                seen.push(next as u8);
                section = next;
                let block = match next {
                    Section::Operator => Some(&mut operator),
                    Section::Reference => Some(&mut reference),
                    Section::Update => Some(&mut update),
                    _ => None,
                };
                if let Some(b) = block {
                    b.first_line = number + 1;
                    b.seen = true;
                }
                continue;
            }
        }
        match section {
            Section::Operator => operator.lines.push(raw),
            Section::Reference => reference.lines.push(raw),
            Section::Update => update.lines.push(raw),
            Section::Top | Section::World | Section::Assessment => {
                let toks = tokens(raw);
                if toks.is_empty() {
                    continue;
                }
                let line = Line { number, toks };
                match section {
                    Section::World => world_lines.push(line),
                    Section::Assessment => assess_lines.push(line),
                    _ => match line.toks[0].text {
                        "name" => {
                            let n = line.arg(1, "name", "scenario name")?;
                            line.done(2, "name")?;
                            name = Some(n.to_string());
                        }
                        "title" => {
                            let start = line.toks.get(1).map_or(raw.len(), |t| {
                                raw.char_indices().nth(t.column - 1).map_or(raw.len(), |(b, _)| b)
                            });
                            title = raw[start..].split(';').next().unwrap_or("").trim().to_string();
                        }
                        other => return Err(line.err(0, other, "unknown field before the first section")),
                    },
                }
            }
        }
    }
    if !header {
        return Err(ScenarioError::Syntax {
            line: 1,
            column: 1,
            message: format!("missing `{FORMAT_VERSION}` header"),
        });
    }
    let name = name.ok_or_else(|| ScenarioError::Field {
        line: 1,
        column: 1,
        field: "name".into(),
        message: "missing".into(),
    })?;
    if !seen.contains(&(Section::World as u8)) {
        return Err(ScenarioError::Field {
            line: text.lines().count().max(1),
            column: 1,
            field: "world".into(),
            message: "missing [world] section".into(),
        });
    }

    let world = read_world(&world_lines)?;
    let rewards_and_update = read_assessment(&assess_lines, &world)?;
    let (rewards, rules, hypotheses) = rewards_and_update;
    let weights = Weights {
        preference: rewards.goal_reward,
        ordering: rewards.ordering_reward,
    };
    let read_prefs = |b: &Block, section: &'static str| {
        prefs::parse_at(&b.text(), b.origin(), &world, weights).map_err(|source| ScenarioError::Preferences { section, source })
    };
    let operator_preferences = read_prefs(&operator, "operator-preferences")?;
    let reference_constraints = read_prefs(&reference, "reference-constraints")?;

    let scenario = Scenario {
        name,
        title,
        operator_preferences,
        rewards,
        update: IntelligenceUpdate {
            text: trim_block(&update.lines),
            rules,
            hypotheses,
        },
        reference_constraints,
        world,
    };
    scenario.model::<Ratio<i64>>().validate().map_err(ScenarioError::Assessment)?;
    Ok(scenario)
}

fn trim_block(lines: &[&str]) -> String {
    let start = lines.iter().position(|l| !l.trim().is_empty()).unwrap_or(lines.len());
    let end = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(start, |e| e + 1);
    lines[start..end]
        .iter()
        .map(|l| l.trim_end())
        .collect::<Vec<_>>()
        .join("\n")
}

fn read_world(lines: &[Line]) -> Result<World, ScenarioError> {
    let mut grid = None;
    let mut horizon = None;
    let mut uavs = Vec::new();
    let mut targets = Vec::new();
    let mut assets: Vec<Asset> = Vec::new();
    let mut pallets = Vec::new();
    // references resolved once every entity is known
    let mut needs: Vec<(usize, &Line)> = Vec::new();
    let mut goal_lines: Vec<&Line> = Vec::new();
    for line in lines {
        let key = line.toks[0].text;
        match key {
            "grid" => {
                let width = line.int(1, key, "width")?;
                let height = line.int(2, key, "height")?;
                line.done(3, key)?;
                grid = Some(Grid { width, height });
            }
            "horizon" => {
                horizon = Some(line.int::<u32>(1, key, "horizon")?);
                line.done(2, key)?;
            }
            "uav" => {
                let id = line.arg(1, key, "UAV id")?.to_string();
                let start = line.cell(2, key)?;
                let mut uav = Uav {
                    id,
                    start,
                    can_carry: false,
                    operational: true,
                };
                for (i, t) in line.toks.iter().enumerate().skip(3) {
                    match t.text {
                        "carry" => uav.can_carry = true,
                        "down" => uav.operational = false,
                        other => return Err(line.err(i, key, format!("unknown flag `{other}`, expected carry or down"))),
                    }
                }
                uavs.push(uav);
            }
            "target" => {
                let id = line.arg(1, key, "target id")?.to_string();
                let status = match line.arg(2, key, "status")? {
                    "unknown" => TargetStatus::Unknown,
                    "friendly" => TargetStatus::Friendly,
                    "hostile" => TargetStatus::Hostile,
                    other => {
                        return Err(line.err(2, key, format!("unknown status `{other}`, expected unknown, friendly or hostile")))
                    }
                };
                let trajectory = (3..line.toks.len()).map(|i| line.cell(i, key)).collect::<Result<Vec<_>, _>>()?;
                if trajectory.is_empty() {
                    return Err(line.err(3, key, "missing trajectory"));
                }
                targets.push(Target { id, trajectory, status });
            }
            "asset" => {
                let id = line.arg(1, key, "asset id")?.to_string();
                let location = line.cell(2, key)?;
                match line.toks.get(3).map(|t| t.text) {
                    None => {}
                    Some("needs") => {
                        line.arg(4, key, "pallet id")?;
                        line.done(5, key)?;
                        needs.push((assets.len(), line));
                    }
                    Some(other) => return Err(line.err(3, key, format!("unexpected `{other}`, expected needs"))),
                }
                assets.push(Asset {
                    id,
                    location,
                    needs_pallet: None,
                });
            }
            "pallet" => {
                let id = line.arg(1, key, "pallet id")?.to_string();
                let location = line.cell(2, key)?;
                line.done(3, key)?;
                pallets.push(Pallet { id, location });
            }
            "goal" => {
                line.arg(1, key, "goal kind")?;
                line.arg(2, key, "entity id")?;
                line.done(3, key)?;
                goal_lines.push(line);
            }
            other => return Err(line.err(0, other, "unknown world field")),
        }
    }
    let missing = |field: &str| ScenarioError::Field {
        line: lines.first().map_or(1, |l| l.number),
        column: 1,
        field: field.to_string(),
        message: "missing".into(),
    };
    let grid = grid.ok_or_else(|| missing("grid"))?;
    let horizon = horizon.ok_or_else(|| missing("horizon"))?;
    for (asset, line) in needs {
        let pid = line.toks[4].text;
        let p = pallets
            .iter()
            .position(|p: &Pallet| p.id == pid)
            .ok_or_else(|| line.err(4, "asset", format!("unknown pallet `{pid}`")))?;
        assets[asset].needs_pallet = Some(p);
    }
    let mut goals = Vec::new();
    for line in goal_lines {
        let id = line.toks[2].text;
        let find = |ids: Vec<&str>| ids.iter().position(|x| *x == id);
        let goal = match line.toks[1].text {
            "photo" => find(targets.iter().map(|t| t.id.as_str()).collect()).map(Goal::Photo),
            "visit" => find(assets.iter().map(|a| a.id.as_str()).collect()).map(Goal::Visit),
            "deliver" => find(assets.iter().map(|a| a.id.as_str()).collect()).map(Goal::Deliver),
            other => {
                return Err(line.err(1, "goal", format!("unknown goal kind `{other}`, expected photo, visit or deliver")))
            }
        };
        goals.push(goal.ok_or_else(|| line.err(2, "goal", format!("unknown entity `{id}`")))?);
    }
    World::new(grid, uavs, targets, assets, pallets, horizon, goals).map_err(|source| ScenarioError::World {
        field: "world",
        source,
    })
}

const RULE_KEYWORDS: [&str; 6] = ["uav", "in", "beyond", "steps", "p", "fail"];

fn read_assessment(
    lines: &[Line],
    world: &World,
) -> Result<(Rewards, Vec<OutcomeRule>, Vec<Hypothesis>), ScenarioError> {
    let mut rewards = Rewards::default();
    let mut rules = Vec::new();
    let mut hypotheses = Vec::new();
    for line in lines {
        let key = line.toks[0].text;
        match key {
            "goal-reward" | "action-cost" | "ordering-reward" => {
                let v: i64 = line.int(1, key, "whole number")?;
                if v < 0 {
                    return Err(line.err(1, key, "must be nonnegative"));
                }
                line.done(2, key)?;
                *match key {
                    "goal-reward" => &mut rewards.goal_reward,
                    "action-cost" => &mut rewards.action_cost,
                    _ => &mut rewards.ordering_reward,
                } = v;
            }
            "default-probability" => {
                rewards.default_probability = line.prob(1, key)?;
                line.done(2, key)?;
            }
            "discount" => {
                let d = line.prob(1, key)?;
                if d == Ratio::from_integer(0) {
                    return Err(line.err(1, key, "must be greater than 0"));
                }
                line.done(2, key)?;
                rewards.discount = d;
            }
            "rule" => rules.push(read_rule(line, world)?),
            "hypothesis" => {
                let probability = line.prob(1, key)?;
                let mut phantom = Vec::new();
                match line.toks.get(2).map(|t| t.text) {
                    None => {}
                    Some("phantom") => {
                        for i in 3..line.toks.len() {
                            let id = line.toks[i].text;
                            let p = world
                                .pallet_index(id)
                                .ok_or_else(|| line.err(i, key, format!("unknown pallet `{id}`")))?;
                            phantom.push(p);
                        }
                    }
                    Some(other) => return Err(line.err(2, key, format!("unexpected `{other}`, expected phantom"))),
                }
                hypotheses.push(Hypothesis { probability, phantom });
            }
            other => return Err(line.err(0, other, "unknown assessment field")),
        }
    }
    Ok((rewards, rules, hypotheses))
}

fn read_rule(line: &Line, world: &World) -> Result<OutcomeRule, ScenarioError> {
    const F: &str = "rule";
    let kind = match line.arg(1, F, "action kind")? {
        "move" => ActionKind::Move,
        "photo" => ActionKind::Photo,
        "pickup" => ActionKind::Pickup,
        "drop" => ActionKind::Drop,
        other => {
            return Err(line.err(1, F, format!("unknown action kind `{other}`, expected move, photo, pickup or drop")))
        }
    };
    let mut i = 2;
    let mut entity = None;
    if let Some(t) = line.toks.get(i).filter(|t| !RULE_KEYWORDS.contains(&t.text)) {
        let found = match kind {
            ActionKind::Move => None,
            ActionKind::Photo => world.target_index(t.text),
            ActionKind::Pickup => world.pallet_index(t.text),
            ActionKind::Drop => world.asset_index(t.text),
        };
        entity = Some(found.ok_or_else(|| line.err(i, F, format!("unknown entity `{}` for this action", t.text)))?);
        i += 1;
    }
    let mut rule = OutcomeRule {
        action: ActionPattern { kind, entity },
        uav: None,
        cells: CellPredicate::Anywhere,
        steps: None,
        success: None,
        on_failure: Failure::NoEffect,
    };
    let mut failure = None;
    while i < line.toks.len() {
        let kw = line.toks[i].text;
        match kw {
            "uav" => {
                let id = line.arg(i + 1, F, "UAV id")?;
                rule.uav = Some(
                    world
                        .uav_index(id)
                        .ok_or_else(|| line.err(i + 1, F, format!("unknown UAV `{id}`")))?,
                );
                i += 2;
            }
            "in" => {
                let mut cells = Vec::new();
                i += 1;
                while i < line.toks.len() && !RULE_KEYWORDS.contains(&line.toks[i].text) {
                    cells.push(line.cell(i, F)?);
                    i += 1;
                }
                if cells.is_empty() {
                    return Err(line.err(i, F, "`in` needs at least one cell"));
                }
                rule.cells = CellPredicate::In(cells);
            }
            "beyond" => {
                let center = line.cell(i + 1, F)?;
                let radius = line.int(i + 2, F, "radius")?;
                rule.cells = CellPredicate::Beyond { center, radius };
                i += 3;
            }
            "steps" => {
                let modulus = line.int(i + 1, F, "modulus")?;
                let remainder = line.int(i + 2, F, "remainder")?;
                rule.steps = Some(StepFilter { modulus, remainder });
                i += 3;
            }
            "p" => {
                rule.success = Some(line.prob(i + 1, F)?);
                i += 2;
            }
            "fail" => {
                failure = Some(match line.arg(i + 1, F, "failure mode")? {
                    "no-effect" => Failure::NoEffect,
                    "uav-lost" => Failure::UavLost,
                    "action-wasted" => Failure::ActionWasted,
                    other => {
                        return Err(line.err(
                            i + 1,
                            F,
                            format!("unknown failure mode `{other}`, expected no-effect, uav-lost or action-wasted"),
                        ))
                    }
                });
                i += 2;
            }
            other => return Err(line.err(i, F, format!("unexpected `{other}`"))),
        }
    }
    rule.on_failure = failure.ok_or_else(|| line.err(line.toks.len(), F, "missing `fail <mode>`"))?;
    Ok(rule)
}

/// Read a scenario file from disk.
pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&text)
}

// ---------------------------------------------------------------------------
// Writing

fn cell(c: Cell) -> String {
    format!("{},{}", c.x, c.y)
}

/// Canonical text; `parse(render(s))` gives back `s`.
pub fn render(s: &Scenario) -> String {
    let w = &s.world;
    let mut out = format!("{FORMAT_VERSION}\nname {}\n", s.name);
    if !s.title.is_empty() {
        out.push_str(&format!("title {}\n", s.title));
    }
    out.push_str(&format!(
        "\n[world]\ngrid {} {}\nhorizon {}\n",
        w.grid().width,
        w.grid().height,
        w.horizon()
    ));
    for u in w.uavs() {
        out.push_str(&format!("uav {} {}", u.id, cell(u.start)));
        if u.can_carry {
            out.push_str(" carry");
        }
        if !u.operational {
            out.push_str(" down");
        }
        out.push('\n');
    }
    for t in w.targets() {
        let path: Vec<String> = t.trajectory.iter().map(|c| cell(*c)).collect();
        out.push_str(&format!("target {} {} {}\n", t.id, t.status.as_str(), path.join(" ")));
    }
    for a in w.assets() {
        out.push_str(&format!("asset {} {}", a.id, cell(a.location)));
        if let Some(p) = a.needs_pallet {
            out.push_str(&format!(" needs {}", w.pallets()[p].id));
        }
        out.push('\n');
    }
    for p in w.pallets() {
        out.push_str(&format!("pallet {} {}\n", p.id, cell(p.location)));
    }
    for g in w.goals() {
        let (kind, id) = match *g {
            Goal::Photo(i) => ("photo", &w.targets()[i].id),
            Goal::Visit(i) => ("visit", &w.assets()[i].id),
            Goal::Deliver(i) => ("deliver", &w.assets()[i].id),
        };
        out.push_str(&format!("goal {kind} {id}\n"));
    }
    let weights = s.weights();
    if !s.operator_preferences.is_empty() {
        out.push_str("\n[operator-preferences]\n");
        out.push_str(&prefs::render_with(&s.operator_preferences, w, weights));
    }
    let r = &s.rewards;
    out.push_str(&format!(
        "\n[assessment]\ngoal-reward {}\naction-cost {}\nordering-reward {}\ndefault-probability {}\ndiscount {}\n",
        r.goal_reward,
        r.action_cost,
        r.ordering_reward,
        render_probability(r.default_probability),
        render_probability(r.discount)
    ));
    for rule in &s.update.rules {
        out.push_str(&render_rule(rule, w));
        out.push('\n');
    }
    for h in &s.update.hypotheses {
        out.push_str(&format!("hypothesis {}", render_probability(h.probability)));
        if !h.phantom.is_empty() {
            out.push_str(" phantom");
            for &p in &h.phantom {
                out.push_str(&format!(" {}", w.pallets()[p].id));
            }
        }
        out.push('\n');
    }
    if !s.update.text.is_empty() {
        out.push_str(&format!("\n[update]\n{}\n", s.update.text));
    }
    if !s.reference_constraints.is_empty() {
        out.push_str("\n[reference-constraints]\n");
        out.push_str(&prefs::render_with(&s.reference_constraints, w, weights));
    }
    out
}

pub fn render_rule(rule: &OutcomeRule, w: &World) -> String {
    let (kind, name) = match rule.action.kind {
        ActionKind::Move => ("move", None),
        ActionKind::Photo => ("photo", rule.action.entity.map(|e| &w.targets()[e].id)),
        ActionKind::Pickup => ("pickup", rule.action.entity.map(|e| &w.pallets()[e].id)),
        ActionKind::Drop => ("drop", rule.action.entity.map(|e| &w.assets()[e].id)),
    };
    let mut out = format!("rule {kind}");
    if let Some(n) = name {
        out.push_str(&format!(" {n}"));
    }
    if let Some(u) = rule.uav {
        out.push_str(&format!(" uav {}", w.uavs()[u].id));
    }
    match &rule.cells {
        CellPredicate::Anywhere => {}
        CellPredicate::In(cells) => {
            out.push_str(" in");
            for c in cells {
                out.push_str(&format!(" {}", cell(*c)));
            }
        }
        CellPredicate::Beyond { center, radius } => out.push_str(&format!(" beyond {} {radius}", cell(*center))),
    }
    if let Some(f) = rule.steps {
        out.push_str(&format!(" steps {} {}", f.modulus, f.remainder));
    }
    if let Some(p) = rule.success {
        out.push_str(&format!(" p {}", render_probability(p)));
    }
    let fail = match rule.on_failure {
        Failure::NoEffect => "no-effect",
        Failure::UavLost => "uav-lost",
        Failure::ActionWasted => "action-wasted",
    };
    out.push_str(&format!(" fail {fail}"));
    out
}

// ---------------------------------------------------------------------------
// Bundled scenarios

/// (name, scenario file, reference constraints file)
pub const BUNDLED: [(&str, &str, &str); 6] = [
    ("t1", include_str!("../scenarios/t1.scn"), include_str!("../scenarios/t1-ref.prefs")),
    ("t2", include_str!("../scenarios/t2.scn"), include_str!("../scenarios/t2-ref.prefs")),
    ("t3", include_str!("../scenarios/t3.scn"), include_str!("../scenarios/t3-ref.prefs")),
    ("t4", include_str!("../scenarios/t4.scn"), include_str!("../scenarios/t4-ref.prefs")),
    ("t5", include_str!("../scenarios/t5.scn"), include_str!("../scenarios/t5-ref.prefs")),
    ("t6", include_str!("../scenarios/t6.scn"), include_str!("../scenarios/t6-ref.prefs")),
];

fn bundled_entry(entry: &(&str, &str, &str)) -> Scenario {
    let (name, scn, reference) = *entry;
    let mut s = parse(scn).unwrap_or_else(|e| panic!("bundled scenario {name}: {e}"));
    s.reference_constraints = s
        .parse_constraints(reference)
        .unwrap_or_else(|e| panic!("bundled constraints {name}: {e}"));
    s
}

/// The six bundled scenarios with their reference constraints attached.
pub fn bundled() -> Vec<Scenario> {
    BUNDLED.iter().map(bundled_entry).collect()
}

pub fn bundled_named(name: &str) -> Option<Scenario> {
    BUNDLED.iter().find(|e| e.0.eq_ignore_ascii_case(name)).map(bundled_entry)
}
