//! Operator constraint language: PDDL3-style preferences over the world's
//! propositions, grounded against a [`World`] and lowered to temporal
//! formulas.
//!
//! ```text
//! (preference p1 (sometime-after (agentloc uav1 v4 v3) (have-photo t1 uav1)))
//! (forall (?t - target) (preference d2-to-targets (sometime (have-photo ?t d2))))
//! (ordering p1 d2-to-targets-t1)
//! (preference avoid (always (not (agentloc uav1 v4 v2))) :weight 30)
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Cell, Proposition, World};
use crate::ltl::{self, Formula, Valuation};
use crate::sexpr::{self, Pos, SExpr};

pub const DEFAULT_PREFERENCE_WEIGHT: i64 = 20;
pub const DEFAULT_ORDERING_WEIGHT: i64 = 10;

/// Propositional condition: only `True`, `False`, `Atom`, `Not`, `And`, `Or`.
pub type Condition = Formula<Proposition>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Template<C = Condition> {
    Sometime(C),
    Always(C),
    SometimeAfter(C, C),
    SometimeBefore(C, C),
    AtMostOnce(C),
    AtEnd(C),
}

impl<C> Template<C> {
    pub fn keyword(&self) -> &'static str {
        match self {
            Template::Sometime(_) => "sometime",
            Template::Always(_) => "always",
            Template::SometimeAfter(..) => "sometime-after",
            Template::SometimeBefore(..) => "sometime-before",
            Template::AtMostOnce(_) => "at-most-once",
            Template::AtEnd(_) => "at-end",
        }
    }

    pub fn operands(&self) -> Vec<&C> {
        match self {
            Template::Sometime(c) | Template::Always(c) | Template::AtMostOnce(c) | Template::AtEnd(c) => {
                vec![c]
            }
            Template::SometimeAfter(a, b) | Template::SometimeBefore(a, b) => vec![a, b],
        }
    }

    fn try_map<D, E>(&self, mut f: impl FnMut(&C) -> Result<D, E>) -> Result<Template<D>, E> {
        Ok(match self {
            Template::Sometime(c) => Template::Sometime(f(c)?),
            Template::Always(c) => Template::Always(f(c)?),
            Template::AtMostOnce(c) => Template::AtMostOnce(f(c)?),
            Template::AtEnd(c) => Template::AtEnd(f(c)?),
            Template::SometimeAfter(a, b) => Template::SometimeAfter(f(a)?, f(b)?),
            Template::SometimeBefore(a, b) => Template::SometimeBefore(f(a)?, f(b)?),
        })
    }
}

/// A template whose atoms may still mention `?variables`.
pub type PatternTemplate = Template<Formula<AtomPattern>>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomPattern {
    pub predicate: String,
    pub args: Vec<String>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preference {
    pub name: String,
    #[serde(skip)]
    pub template: Template,
    pub weight: i64,
}

impl Default for Template {
    fn default() -> Self {
        Template::Sometime(Formula::True)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ordering {
    pub earlier: String,
    pub later: String,
    pub weight: i64,
}

/// Named, weighted preferences plus orderings between them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PreferenceSet {
    pub preferences: Vec<Preference>,
    pub orderings: Vec<Ordering>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    /// Explicit location commands.
    Control,
    /// Properties the planner may achieve however it likes.
    Declarative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Weights {
    pub preference: i64,
    pub ordering: i64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            preference: DEFAULT_PREFERENCE_WEIGHT,
            ordering: DEFAULT_ORDERING_WEIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrefsError {
    #[error("{}: {}", .0.pos, .0.message)]
    Syntax(#[from] sexpr::SyntaxError),
    #[error("{pos}: {message}")]
    Malformed { pos: Pos, message: String },
    #[error("{pos}: unknown predicate `{name}`")]
    UnknownPredicate { pos: Pos, name: String },
    #[error("{pos}: unknown {kind} `{name}`")]
    UnknownEntity { pos: Pos, kind: &'static str, name: String },
    #[error("{pos}: type mismatch: `{name}` is a {found}, expected a {expected}")]
    TypeMismatch {
        pos: Pos,
        name: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("{pos}: duplicate preference name `{name}`")]
    DuplicateName { pos: Pos, name: String },
    #[error("{pos}: ordering refers to unknown preference `{name}`")]
    UnknownPreference { pos: Pos, name: String },
    #[error("{pos}: preference `{name}` cannot be ordered against itself")]
    SelfOrdering { pos: Pos, name: String },
    #[error("{pos}: unbound variable `{name}`")]
    NonGround { pos: Pos, name: String },
}

impl PrefsError {
    pub fn pos(&self) -> Pos {
        match self {
            PrefsError::Syntax(e) => e.pos,
            PrefsError::Malformed { pos, .. }
            | PrefsError::UnknownPredicate { pos, .. }
            | PrefsError::UnknownEntity { pos, .. }
            | PrefsError::TypeMismatch { pos, .. }
            | PrefsError::DuplicateName { pos, .. }
            | PrefsError::UnknownPreference { pos, .. }
            | PrefsError::SelfOrdering { pos, .. }
            | PrefsError::NonGround { pos, .. } => *pos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EntityType {
    Uav,
    Target,
    Asset,
    Pallet,
}

impl EntityType {
    fn name(self) -> &'static str {
        match self {
            EntityType::Uav => "uav",
            EntityType::Target => "target",
            EntityType::Asset => "asset",
            EntityType::Pallet => "pallet",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uav" | "uavs" | "drone" | "drones" => Some(EntityType::Uav),
            "target" | "targets" => Some(EntityType::Target),
            "asset" | "assets" => Some(EntityType::Asset),
            "pallet" | "pallets" => Some(EntityType::Pallet),
            _ => None,
        }
    }

    fn ids(self, world: &World) -> Vec<&str> {
        match self {
            EntityType::Uav => world.uavs().iter().map(|x| x.id.as_str()).collect(),
            EntityType::Target => world.targets().iter().map(|x| x.id.as_str()).collect(),
            EntityType::Asset => world.assets().iter().map(|x| x.id.as_str()).collect(),
            EntityType::Pallet => world.pallets().iter().map(|x| x.id.as_str()).collect(),
        }
    }

    fn lookup(self, world: &World, id: &str) -> Option<usize> {
        match self {
            EntityType::Uav => world.uav_index(id),
            EntityType::Target => world.target_index(id),
            EntityType::Asset => world.asset_index(id),
            EntityType::Pallet => world.pallet_index(id),
        }
    }

    fn of_entity(world: &World, id: &str) -> Option<Self> {
        [EntityType::Uav, EntityType::Target, EntityType::Asset, EntityType::Pallet]
            .into_iter()
            .find(|t| t.lookup(world, id).is_some())
    }
}

/// Argument slot of a predicate.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Entity(EntityType),
    Coord,
    Step,
}

fn signature(predicate: &str) -> Option<&'static [Slot]> {
    use EntityType::*;
    use Slot::*;
    Some(match predicate {
        "agentloc" => &[Entity(Uav), Coord, Coord],
        "have-photo" => &[Entity(Target), Entity(Uav)],
        "visited" => &[Entity(Asset), Entity(Uav)],
        "carry-pallet" => &[Entity(Pallet), Entity(Uav)],
        "delivered" => &[Entity(Pallet), Entity(Asset)],
        "t-eq" => &[Step],
        _ => return None,
    })
}

fn parse_number(s: &str) -> Option<i64> {
    s.strip_prefix(['v', 'V']).unwrap_or(s).parse().ok()
}

struct Parser<'w> {
    world: &'w World,
    weights: Weights,
}

impl<'w> Parser<'w> {
    fn malformed(pos: Pos, message: impl Into<String>) -> PrefsError {
        PrefsError::Malformed {
            pos,
            message: message.into(),
        }
    }

    fn symbol<'a>(&self, e: &'a SExpr, what: &str) -> Result<&'a str, PrefsError> {
        e.as_symbol()
            .ok_or_else(|| Self::malformed(e.pos(), format!("expected {what}")))
    }

    /// Condition with possibly-variable atoms.
    fn condition(&self, e: &SExpr, vars: &BTreeMap<String, EntityType>) -> Result<Formula<AtomPattern>, PrefsError> {
        if let Some(s) = e.as_symbol() {
            return match s {
                "true" => Ok(Formula::True),
                "false" => Ok(Formula::False),
                _ => Err(Self::malformed(e.pos(), format!("expected a condition, found `{s}`"))),
            };
        }
        let items = e.as_list().expect("list");
        let head = e
            .head()
            .ok_or_else(|| Self::malformed(e.pos(), "empty condition"))?;
        let args = &items[1..];
        match head.as_str() {
            "not" => {
                let [x] = args else {
                    return Err(Self::malformed(e.pos(), "`not` takes one argument"));
                };
                Ok(Formula::not(self.condition(x, vars)?))
            }
            "and" | "or" => {
                let parts = args
                    .iter()
                    .map(|a| self.condition(a, vars))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(if head == "and" {
                    Formula::all(parts)
                } else {
                    Formula::any(parts)
                })
            }
            "imply" => {
                let [a, b] = args else {
                    return Err(Self::malformed(e.pos(), "`imply` takes two arguments"));
                };
                Ok(Formula::implies(self.condition(a, vars)?, self.condition(b, vars)?))
            }
            _ => {
                let slots = signature(&head).ok_or_else(|| PrefsError::UnknownPredicate {
                    pos: e.pos(),
                    name: head.clone(),
                })?;
                if slots.len() != args.len() {
                    return Err(Self::malformed(
                        e.pos(),
                        format!("`{head}` takes {} argument(s), got {}", slots.len(), args.len()),
                    ));
                }
                let mut out = Vec::new();
                for (slot, arg) in slots.iter().zip(args) {
                    let s = self.symbol(arg, "an argument")?;
                    match slot {
                        Slot::Entity(ty) => {
                            if let Some(var) = s.strip_prefix('?') {
                                let bound = vars.get(var).ok_or_else(|| PrefsError::NonGround {
                                    pos: arg.pos(),
                                    name: s.to_string(),
                                })?;
                                if bound != ty {
                                    return Err(PrefsError::TypeMismatch {
                                        pos: arg.pos(),
                                        name: s.to_string(),
                                        expected: ty.name(),
                                        found: bound.name(),
                                    });
                                }
                            } else if ty.lookup(self.world, s).is_none() {
                                return Err(match EntityType::of_entity(self.world, s) {
                                    Some(found) => PrefsError::TypeMismatch {
                                        pos: arg.pos(),
                                        name: s.to_string(),
                                        expected: ty.name(),
                                        found: found.name(),
                                    },
                                    None => PrefsError::UnknownEntity {
                                        pos: arg.pos(),
                                        kind: ty.name(),
                                        name: s.to_string(),
                                    },
                                });
                            }
                        }
                        Slot::Coord | Slot::Step => {
                            if parse_number(s).is_none_or(|n| n < 0) {
                                return Err(Self::malformed(arg.pos(), format!("expected a number, found `{s}`")));
                            }
                        }
                    }
                    out.push(s.to_string());
                }
                Ok(Formula::Atom(AtomPattern {
                    predicate: head,
                    args: out,
                    pos: e.pos(),
                }))
            }
        }
    }

    fn template(&self, e: &SExpr, vars: &BTreeMap<String, EntityType>) -> Result<PatternTemplate, PrefsError> {
        let items = e
            .as_list()
            .ok_or_else(|| Self::malformed(e.pos(), "expected a template such as (sometime ...)"))?;
        let head = e.head().unwrap_or_default();
        let mut args = &items[1.min(items.len())..];
        // PDDL3 spells the final-state template `(at end phi)`
        let keyword = if head == "at" && args.first().and_then(SExpr::as_symbol) == Some("end") {
            args = &args[1..];
            "at-end".to_string()
        } else {
            head
        };
        let need = match keyword.as_str() {
            "sometime-after" | "sometime-before" => 2,
            "sometime" | "always" | "at-most-once" | "at-end" => 1,
            other => {
                return Err(Self::malformed(e.pos(), format!("unknown template `{other}`")));
            }
        };
        if args.len() != need {
            return Err(Self::malformed(
                e.pos(),
                format!("`{keyword}` takes {need} condition(s), got {}", args.len()),
            ));
        }
        let c = |i: usize| self.condition(&args[i], vars);
        Ok(match keyword.as_str() {
            "sometime" => Template::Sometime(c(0)?),
            "always" => Template::Always(c(0)?),
            "at-most-once" => Template::AtMostOnce(c(0)?),
            "at-end" => Template::AtEnd(c(0)?),
            "sometime-after" => Template::SometimeAfter(c(0)?, c(1)?),
            _ => Template::SometimeBefore(c(0)?, c(1)?),
        })
    }

    /// Split `(... :weight N)` off the tail of a list.
    fn weight<'a>(&self, items: &'a [SExpr], default: i64) -> Result<(&'a [SExpr], i64), PrefsError> {
        if items.len() >= 2 && items[items.len() - 2].as_symbol() == Some(":weight") {
            let w = &items[items.len() - 1];
            let value = self
                .symbol(w, "a weight")?
                .parse::<i64>()
                .ok()
                .filter(|v| *v >= 0)
                .ok_or_else(|| Self::malformed(w.pos(), "weight must be a non-negative integer"))?;
            Ok((&items[..items.len() - 2], value))
        } else {
            Ok((items, default))
        }
    }

    fn variables(&self, e: &SExpr) -> Result<Vec<(String, EntityType)>, PrefsError> {
        let items = e
            .as_list()
            .ok_or_else(|| Self::malformed(e.pos(), "expected a variable list"))?;
        let mut out = Vec::new();
        let mut pending: Vec<String> = Vec::new();
        let mut i = 0;
        while i < items.len() {
            let s = self.symbol(&items[i], "a variable")?;
            if s == "-" {
                let ty_expr = items
                    .get(i + 1)
                    .ok_or_else(|| Self::malformed(items[i].pos(), "missing type after `-`"))?;
                let ty_name = self.symbol(ty_expr, "a type")?;
                let ty = EntityType::parse(ty_name)
                    .ok_or_else(|| Self::malformed(ty_expr.pos(), format!("unknown type `{ty_name}`")))?;
                if pending.is_empty() {
                    return Err(Self::malformed(items[i].pos(), "type without variables"));
                }
                out.extend(pending.drain(..).map(|v| (v, ty)));
                i += 2;
            } else if let Some(v) = s.strip_prefix('?') {
                pending.push(v.to_string());
                i += 1;
            } else {
                return Err(Self::malformed(items[i].pos(), format!("expected a variable, found `{s}`")));
            }
        }
        if !pending.is_empty() {
            return Err(Self::malformed(e.pos(), "variables without a type"));
        }
        Ok(out)
    }

    fn preference(
        &self,
        e: &SExpr,
        vars: &[(String, EntityType)],
        out: &mut Vec<(Preference, Pos)>,
    ) -> Result<(), PrefsError> {
        let items = e.as_list().expect("list");
        let (items, weight) = self.weight(items, self.weights.preference)?;
        if items.len() != 3 {
            return Err(Self::malformed(e.pos(), "expected (preference <name> <template>)"));
        }
        let name = self.symbol(&items[1], "a preference name")?;
        let scope: BTreeMap<String, EntityType> = vars.iter().cloned().collect();
        let pattern = self.template(&items[2], &scope)?;
        // one grounding per combination of bound entities
        let domains: Vec<Vec<&str>> = vars.iter().map(|(_, ty)| ty.ids(self.world)).collect();
        let mut combo = vec![0usize; vars.len()];
        if domains.iter().any(Vec::is_empty) {
            return Ok(());
        }
        loop {
            let binding: BTreeMap<&str, &str> = vars
                .iter()
                .zip(&combo)
                .enumerate()
                .map(|(k, ((v, _), &i))| (v.as_str(), domains[k][i]))
                .collect();
            let ground_name = if vars.is_empty() {
                name.to_string()
            } else {
                let suffix: Vec<&str> = vars.iter().map(|(v, _)| binding[v.as_str()]).collect();
                format!("{name}-{}", suffix.join("-"))
            };
            let template = ground(&pattern, self.world, &binding)?;
            out.push((
                Preference {
                    name: ground_name,
                    template,
                    weight,
                },
                e.pos(),
            ));
            // odometer increment
            let mut k = vars.len();
            loop {
                if k == 0 {
                    return Ok(());
                }
                k -= 1;
                combo[k] += 1;
                if combo[k] < domains[k].len() {
                    break;
                }
                combo[k] = 0;
            }
        }
    }
}

fn resolve(world: &World, atom: &AtomPattern, binding: &BTreeMap<&str, &str>) -> Result<Proposition, PrefsError> {
    let mut args = Vec::with_capacity(atom.args.len());
    for a in &atom.args {
        if let Some(v) = a.strip_prefix('?') {
            let bound = binding.get(v).ok_or_else(|| PrefsError::NonGround {
                pos: atom.pos,
                name: a.clone(),
            })?;
            args.push(*bound);
        } else {
            args.push(a.as_str());
        }
    }
    let entity = |ty: EntityType, s: &str| {
        ty.lookup(world, s).ok_or_else(|| PrefsError::UnknownEntity {
            pos: atom.pos,
            kind: ty.name(),
            name: s.to_string(),
        })
    };
    let number = |s: &str| {
        parse_number(s)
            .filter(|n| *n >= 0)
            .ok_or_else(|| PrefsError::Malformed {
                pos: atom.pos,
                message: format!("expected a number, found `{s}`"),
            })
    };
    use EntityType::*;
    Ok(match atom.predicate.as_str() {
        "agentloc" => Proposition::AgentLoc {
            uav: entity(Uav, args[0])?,
            cell: Cell::new(number(args[1])? as i32, number(args[2])? as i32),
        },
        "have-photo" => Proposition::HavePhoto {
            target: entity(Target, args[0])?,
            uav: entity(Uav, args[1])?,
        },
        "visited" => Proposition::Visited {
            asset: entity(Asset, args[0])?,
            uav: entity(Uav, args[1])?,
        },
        "carry-pallet" => Proposition::CarryPallet {
            pallet: entity(Pallet, args[0])?,
            uav: entity(Uav, args[1])?,
        },
        "delivered" => Proposition::Delivered {
            pallet: entity(Pallet, args[0])?,
            asset: entity(Asset, args[1])?,
        },
        "t-eq" => Proposition::TimeEq(number(args[0])? as u32),
        other => {
            return Err(PrefsError::UnknownPredicate {
                pos: atom.pos,
                name: other.to_string(),
            })
        }
    })
}

fn ground(
    pattern: &PatternTemplate,
    world: &World,
    binding: &BTreeMap<&str, &str>,
) -> Result<Template, PrefsError> {
    pattern.try_map(|cond| ground_condition(cond, world, binding))
}

fn ground_condition(
    cond: &Formula<AtomPattern>,
    world: &World,
    binding: &BTreeMap<&str, &str>,
) -> Result<Condition, PrefsError> {
    // map_atoms cannot fail, so resolve first and then rebuild
    let mut resolved = Vec::new();
    let mut first_err = None;
    cond.visit_atoms(&mut |a| match resolve(world, a, binding) {
        Ok(p) => resolved.push(p),
        Err(e) => {
            first_err.get_or_insert(e);
        }
    });
    if let Some(e) = first_err {
        return Err(e);
    }
    let mut it = resolved.into_iter();
    Ok(cond.map_atoms(&mut |_| it.next().expect("one proposition per atom")))
}

/// Ground a template that should have no free variables.
pub fn ground_template(pattern: &PatternTemplate, world: &World) -> Result<Template, PrefsError> {
    ground(pattern, world, &BTreeMap::new())
}

/// Parse a constraint document against `world` with the default weights.
pub fn parse(text: &str, world: &World) -> Result<PreferenceSet, PrefsError> {
    parse_with(text, world, Weights::default())
}

pub fn parse_with(text: &str, world: &World, weights: Weights) -> Result<PreferenceSet, PrefsError> {
    parse_exprs(&sexpr::parse_all(text)?, world, weights)
}

/// Like [`parse_with`] for text embedded in a larger file starting at `origin`,
/// so that error positions refer to the enclosing file.
pub fn parse_at(text: &str, origin: Pos, world: &World, weights: Weights) -> Result<PreferenceSet, PrefsError> {
    parse_exprs(&sexpr::parse_all_at(text, origin)?, world, weights)
}

pub(crate) fn parse_exprs(exprs: &[SExpr], world: &World, weights: Weights) -> Result<PreferenceSet, PrefsError> {
    let parser = Parser { world, weights };
    let mut prefs: Vec<(Preference, Pos)> = Vec::new();
    let mut orderings: Vec<(Ordering, Pos, Pos)> = Vec::new();
    for e in exprs {
        let head = e
            .head()
            .ok_or_else(|| Parser::malformed(e.pos(), "expected (preference ...), (forall ...) or (ordering ...)"))?;
        let items = e.as_list().expect("list");
        match head.as_str() {
            "preference" => parser.preference(e, &[], &mut prefs)?,
            "forall" => {
                let [_, vars, body] = items else {
                    return Err(Parser::malformed(e.pos(), "expected (forall (<vars>) (preference ...))"));
                };
                let vars = parser.variables(vars)?;
                if body.head().as_deref() != Some("preference") {
                    return Err(Parser::malformed(body.pos(), "forall body must be a preference"));
                }
                parser.preference(body, &vars, &mut prefs)?;
            }
            "ordering" => {
                let (items, weight) = parser.weight(items, weights.ordering)?;
                let [_, a, b] = items else {
                    return Err(Parser::malformed(e.pos(), "expected (ordering <earlier> <later>)"));
                };
                orderings.push((
                    Ordering {
                        earlier: parser.symbol(a, "a preference name")?.to_string(),
                        later: parser.symbol(b, "a preference name")?.to_string(),
                        weight,
                    },
                    a.pos(),
                    b.pos(),
                ));
            }
            other => {
                return Err(Parser::malformed(e.pos(), format!("unknown top-level form `{other}`")));
            }
        }
    }
    let mut names = BTreeSet::new();
    for (p, pos) in &prefs {
        if !names.insert(p.name.clone()) {
            return Err(PrefsError::DuplicateName {
                pos: *pos,
                name: p.name.clone(),
            });
        }
    }
    for (o, pa, pb) in &orderings {
        for (n, pos) in [(&o.earlier, pa), (&o.later, pb)] {
            if !names.contains(n) {
                return Err(PrefsError::UnknownPreference {
                    pos: *pos,
                    name: n.clone(),
                });
            }
        }
        if o.earlier == o.later {
            return Err(PrefsError::SelfOrdering {
                pos: *pa,
                name: o.earlier.clone(),
            });
        }
    }
    Ok(PreferenceSet {
        preferences: prefs.into_iter().map(|(p, _)| p).collect(),
        orderings: orderings.into_iter().map(|(o, ..)| o).collect(),
    })
}

fn render_condition(c: &Condition, world: &World) -> String {
    c.to_sexpr(&|p: &Proposition| p.render(world))
}

/// Canonical text form; `parse(render(set))` gives back `set`.
pub fn render(set: &PreferenceSet, world: &World) -> String {
    render_with(set, world, Weights::default())
}

/// Canonical text form that omits weights equal to `defaults`.
pub fn render_with(set: &PreferenceSet, world: &World, defaults: Weights) -> String {
    let mut out = String::new();
    for p in &set.preferences {
        let ops: Vec<String> = p
            .template
            .operands()
            .into_iter()
            .map(|c| render_condition(c, world))
            .collect();
        out.push_str(&format!("(preference {} ({} {})", p.name, p.template.keyword(), ops.join(" ")));
        if p.weight != defaults.preference {
            out.push_str(&format!(" :weight {}", p.weight));
        }
        out.push_str(")\n");
    }
    for o in &set.orderings {
        out.push_str(&format!("(ordering {} {}", o.earlier, o.later));
        if o.weight != defaults.ordering {
            out.push_str(&format!(" :weight {}", o.weight));
        }
        out.push_str(")\n");
    }
    out
}

/// Finite-trace formula for a template. The condition semantics follow PDDL3:
///
/// * `sometime c` = `F c`, `always c` = `G c`
/// * `sometime-after a b` = `G (a -> F b)`
/// * `sometime-before a b`: `a` holds strictly before the first `b`, or `b`
///   never holds: `G !b | (!b U (a & !b))`
/// * `at-most-once c` = `G (c -> (c W G !c))`
/// * `at-end c` = `F (c & N false)`: `c` at the last position
pub fn lower(template: &Template) -> Formula<Proposition> {
    let n = Formula::not;
    match template {
        Template::Sometime(c) => Formula::eventually(c.clone()),
        Template::Always(c) => Formula::always(c.clone()),
        Template::SometimeAfter(a, b) => {
            Formula::always(Formula::implies(a.clone(), Formula::eventually(b.clone())))
        }
        Template::SometimeBefore(a, b) => Formula::or(
            Formula::always(n(b.clone())),
            Formula::until(n(b.clone()), Formula::and(a.clone(), n(b.clone()))),
        ),
        Template::AtMostOnce(c) => Formula::always(Formula::implies(
            c.clone(),
            Formula::weak_until(c.clone(), Formula::always(n(c.clone()))),
        )),
        Template::AtEnd(c) => Formula::eventually(Formula::and(c.clone(), Formula::weak_next(Formula::False))),
    }
}

/// Lower a template that may still contain variables.
pub fn lower_pattern(pattern: &PatternTemplate, world: &World) -> Result<Formula<Proposition>, PrefsError> {
    Ok(lower(&ground_template(pattern, world)?))
}

/// Location-directed preferences are control constraints; everything else is
/// declarative.
///
/// A preference is control when every atom (ignoring `t-eq`) is an
/// `agentloc` fact, or when it is a sequencing template (`sometime-after`,
/// `sometime-before`) with an operand made only of `agentloc` facts.
pub fn classify(pref: &Preference) -> ConstraintKind {
    let location_only = |c: &Condition| {
        let mut any = false;
        let mut all = true;
        c.visit_atoms(&mut |p| match p {
            Proposition::TimeEq(_) => {}
            p => {
                any = true;
                all &= p.is_location();
            }
        });
        any && all
    };
    let ops = pref.template.operands();
    let all_location = {
        let mut merged = Formula::True;
        for c in &ops {
            merged = Formula::and(merged, (*c).clone());
        }
        location_only(&merged)
    };
    let sequencing = matches!(pref.template, Template::SometimeAfter(..) | Template::SometimeBefore(..));
    if all_location || (sequencing && ops.iter().any(|c| location_only(c))) {
        ConstraintKind::Control
    } else {
        ConstraintKind::Declarative
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown preference `{0}`")]
pub struct UnknownName(pub String);

/// Reward from orderings: each pair `(a, b)` with both preferences satisfied
/// and `time(a) <= time(b)` earns its weight. `times` maps satisfied
/// preference names to the first step their formula held; missing names are
/// unsatisfied.
pub fn score_orderings(set: &PreferenceSet, times: &BTreeMap<String, u32>) -> Result<i64, UnknownName> {
    if let Some(name) = times.keys().find(|n| !set.preferences.iter().any(|p| &p.name == *n)) {
        return Err(UnknownName(name.clone()));
    }
    Ok(set
        .orderings
        .iter()
        .filter(|o| matches!((times.get(&o.earlier), times.get(&o.later)), (Some(a), Some(b)) if a <= b))
        .map(|o| o.weight)
        .sum())
}

impl PreferenceSet {
    pub fn is_empty(&self) -> bool {
        self.preferences.is_empty() && self.orderings.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Preference> {
        self.preferences.iter().find(|p| p.name == name)
    }

    pub fn lowered(&self) -> Vec<Formula<Proposition>> {
        self.preferences.iter().map(|p| lower(&p.template)).collect()
    }

    /// Union of two sets. Names must not clash.
    pub fn merged(&self, other: &PreferenceSet) -> Result<PreferenceSet, PrefsError> {
        let mut out = self.clone();
        for p in &other.preferences {
            if out.get(&p.name).is_some() {
                return Err(PrefsError::DuplicateName {
                    pos: Pos::default(),
                    name: p.name.clone(),
                });
            }
            out.preferences.push(p.clone());
        }
        out.orderings.extend(other.orderings.iter().cloned());
        Ok(out)
    }

    /// Ordering pairs as preference indices.
    pub fn ordering_indices(&self) -> Vec<(usize, usize, i64)> {
        let idx = |n: &str| {
            self.preferences
                .iter()
                .position(|p| p.name == n)
                .expect("orderings reference declared preferences")
        };
        self.orderings
            .iter()
            .map(|o| (idx(&o.earlier), idx(&o.later), o.weight))
            .collect()
    }
}

/// Satisfaction of one formula on a finite trace, plus the earliest prefix
/// length (as a step index) at which the prefix already satisfied it.
pub fn first_satisfaction<A: Clone + Ord, V: Valuation<A>>(formula: &Formula<A>, trace: &[V]) -> Option<u32> {
    let mut residue = formula.nnf().simplify();
    let mut first = None;
    for (k, label) in trace.iter().enumerate() {
        residue = ltl::progress_nnf(&residue, label);
        if first.is_none() && ltl::end_check(&residue) {
            first = Some(k as u32);
        }
    }
    if ltl::end_check(&residue) {
        first
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::fixtures::{asset, target, uav};
    use crate::domain::{Goal, Grid, Pallet};
    use crate::ltl::evaluate;
    use proptest::prelude::*;

    fn world() -> World {
        World::new(
            Grid { width: 8, height: 8 },
            vec![uav("uav1", 0, 0), uav("d1", 0, 7), uav("d2", 3, 3)],
            vec![target("t1", &[(4, 2)]), target("t2", &[(5, 5)])],
            vec![asset("a1", 4, 0)],
            vec![Pallet { id: "r1".into(), location: Cell::new(1, 1) }],
            12,
            vec![Goal::Photo(0), Goal::Photo(1)],
        )
        .unwrap()
    }

    fn photo(t: usize, u: usize) -> Proposition {
        Proposition::HavePhoto { target: t, uav: u }
    }

    #[test]
    fn single_sometime_preference() {
        let w = world();
        let set = parse("(preference p1 (sometime (have-photo t1 uav1)))", &w).unwrap();
        assert_eq!(set.preferences.len(), 1);
        let p = &set.preferences[0];
        assert_eq!(p.weight, 20);
        assert_eq!(lower(&p.template), Formula::eventually(Formula::atom(photo(0, 0))));
    }

    #[test]
    fn forall_grounds_per_entity() {
        let w = world();
        let set = parse(
            "(forall (?t - targets) (preference d2-to-targets (sometime (have-photo ?t d2))))",
            &w,
        )
        .unwrap();
        let names: Vec<_> = set.preferences.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["d2-to-targets-t1", "d2-to-targets-t2"]);
        assert_eq!(
            set.preferences[1].template,
            Template::Sometime(Formula::atom(photo(1, 2)))
        );
    }

    #[test]
    fn unknown_entity_is_rejected() {
        let w = world();
        let err = parse("(preference bad (sometime (have-photo t9 uav1)))", &w).unwrap_err();
        assert!(matches!(err, PrefsError::UnknownEntity { ref name, .. } if name == "t9"));
        assert_eq!(err.pos(), Pos { line: 1, column: 39 });
    }

    #[test]
    fn error_paths() {
        let w = world();
        let cases = [
            ("(preference p (sometime (photo t1 uav1)))", "unknown predicate"),
            ("(preference p (sometime (have-photo uav1 uav1)))", "type mismatch"),
            (
                "(forall (?u - uav) (preference p (sometime (have-photo ?u d1))))",
                "type mismatch",
            ),
            (
                "(preference p (sometime (have-photo t1 d1)))\n(preference p (always true))",
                "duplicate",
            ),
            ("(preference p (sometime (have-photo t1 d1))", "unclosed"),
            ("(ordering p q)", "unknown preference"),
            ("(preference p (sometime (have-photo ?t d1)))", "unbound"),
            ("(preference p (whenever true))", "unknown template"),
            ("(forall (?x - boats) (preference p (always true)))", "unknown type"),
        ];
        for (text, needle) in cases {
            let err = parse(text, &w).unwrap_err();
            assert!(err.to_string().contains(needle), "{text}: {err}");
        }
        let err = parse("(preference p (always true))\n(ordering p p)", &w).unwrap_err();
        assert!(matches!(err, PrefsError::SelfOrdering { .. }));
    }

    #[test]
    fn malformed_reports_line_and_column() {
        let w = world();
        let err = parse("; header\n(preference p1\n   (sometime (have-photo t1 uav1))\n", &w).unwrap_err();
        assert_eq!(err.pos(), Pos { line: 2, column: 1 });
    }

    #[test]
    fn weights_and_orderings() {
        let w = world();
        let set = parse(
            "(preference a (sometime (visited a1 d1)) :weight 5)\n\
             (preference b (at end (carry-pallet r1 d2)))\n\
             (ordering a b :weight 3)\n(ordering b a)",
            &w,
        )
        .unwrap();
        assert_eq!(set.preferences[0].weight, 5);
        assert!(matches!(set.preferences[1].template, Template::AtEnd(_)));
        assert_eq!(set.orderings[0].weight, 3);
        assert_eq!(set.orderings[1].weight, 10);
        assert_eq!(parse(&render(&set, &w), &w).unwrap(), set);
    }

    #[test]
    fn sometime_after_on_traces() {
        let a = Formula::atom(photo(0, 0));
        let b = Formula::atom(photo(1, 0));
        let f = lower(&Template::SometimeAfter(a, b));
        let l = |v: &[Proposition]| v.iter().copied().collect::<BTreeSet<_>>();
        let yes = [l(&[photo(0, 0)]), l(&[]), l(&[photo(1, 0)])];
        let no = [l(&[photo(0, 0)]), l(&[]), l(&[])];
        assert!(evaluate(&f, &yes, 0).unwrap());
        assert!(!evaluate(&f, &no, 0).unwrap());
    }

    #[test]
    fn always_not_holds_when_never_true() {
        let f = lower(&Template::Always(Formula::not(Formula::atom(photo(0, 0)))));
        let t = vec![BTreeSet::new(), BTreeSet::new()];
        assert!(evaluate(&f, &t, 0).unwrap());
    }

    #[test]
    fn classification_examples() {
        let w = world();
        let set = parse(
            "(preference off (always (agentloc d1 v0 v7)))\n\
             (preference photo (sometime (have-photo t2 d1)))\n\
             (preference seq (sometime-after (agentloc uav1 v4 v3) (have-photo t1 uav1)))\n\
             (preference mixed (always (or (have-photo t1 uav1) (not (agentloc uav1 v4 v2)))))",
            &w,
        )
        .unwrap();
        let kinds: Vec<_> = set.preferences.iter().map(classify).collect();
        use ConstraintKind::*;
        assert_eq!(kinds, [Control, Declarative, Control, Declarative]);
    }

    #[test]
    fn ordering_scores() {
        let w = world();
        let set = parse(
            "(preference a (sometime (visited a1 d1)))\n(preference b (sometime (visited a1 d2)))\n(ordering a b)",
            &w,
        )
        .unwrap();
        let times = |pairs: &[(&str, u32)]| pairs.iter().map(|(n, t)| (n.to_string(), *t)).collect();
        assert_eq!(score_orderings(&set, &times(&[("a", 2), ("b", 5)])).unwrap(), 10);
        assert_eq!(score_orderings(&set, &times(&[("b", 5)])).unwrap(), 0);
        assert_eq!(score_orderings(&set, &times(&[("a", 5), ("b", 5)])).unwrap(), 10);
        assert_eq!(score_orderings(&set, &times(&[("a", 6), ("b", 5)])).unwrap(), 0);
        assert!(score_orderings(&set, &times(&[("zz", 1)])).is_err());
    }

    #[test]
    fn non_ground_pattern_fails_to_lower() {
        let w = world();
        let pattern: PatternTemplate = Template::Sometime(Formula::atom(AtomPattern {
            predicate: "have-photo".into(),
            args: vec!["?t".into(), "d1".into()],
            pos: Pos::default(),
        }));
        assert!(matches!(lower_pattern(&pattern, &w), Err(PrefsError::NonGround { .. })));
    }

    // -- lowering soundness against template-specific checkers --

    type L = BTreeSet<u8>;

    fn direct(template: &Template<Formula<u8>>, trace: &[L]) -> bool {
        let holds = |c: &Formula<u8>, i: usize| evaluate(c, &trace[i..=i], 0).unwrap();
        let n = trace.len();
        match template {
            Template::Sometime(c) => (0..n).any(|i| holds(c, i)),
            Template::Always(c) => (0..n).all(|i| holds(c, i)),
            Template::SometimeAfter(a, b) => (0..n).all(|i| !holds(a, i) || (i..n).any(|j| holds(b, j))),
            Template::SometimeBefore(a, b) => match (0..n).find(|&j| holds(b, j)) {
                None => true,
                Some(j) => (0..j).any(|i| holds(a, i)),
            },
            Template::AtMostOnce(c) => {
                let blocks = (0..n).filter(|&i| holds(c, i) && (i == 0 || !holds(c, i - 1))).count();
                blocks <= 1
            }
            Template::AtEnd(c) => holds(c, n - 1),
        }
    }

    fn lower_small(t: &Template<Formula<u8>>) -> Formula<u8> {
        // same construction as `lower`, over a toy alphabet
        let dummy = |c: &Formula<u8>| c.map_atoms(&mut |a| Proposition::TimeEq(*a as u32));
        let lowered = lower(&t.try_map(|c| Ok::<_, ()>(dummy(c))).unwrap());
        lowered.map_atoms(&mut |p| match p {
            Proposition::TimeEq(k) => *k as u8,
            _ => unreachable!(),
        })
    }

    #[test]
    fn lowering_agrees_with_direct_checkers_exhaustively() {
        let p = Formula::atom(0u8);
        let q = Formula::atom(1u8);
        let pq = Formula::and(p.clone(), Formula::not(q.clone()));
        let templates = [
            Template::Sometime(p.clone()),
            Template::Always(pq.clone()),
            Template::SometimeAfter(p.clone(), q.clone()),
            Template::SometimeBefore(p.clone(), q.clone()),
            Template::SometimeBefore(pq.clone(), p.clone()),
            Template::AtMostOnce(p.clone()),
            Template::AtMostOnce(Formula::or(p.clone(), q.clone())),
            Template::AtEnd(q.clone()),
        ];
        for trace in crate::ltl::testing::all_traces(2, 5) {
            for t in &templates {
                let f = lower_small(t);
                assert_eq!(evaluate(&f, &trace, 0).unwrap(), direct(t, &trace), "{t:?} on {trace:?}");
            }
        }
    }

    #[test]
    fn first_satisfaction_tracks_earliest_prefix() {
        let f = Formula::eventually(Formula::atom(1u8));
        let t: Vec<L> = vec![L::new(), L::new(), [1].into(), L::new()];
        assert_eq!(first_satisfaction(&f, &t), Some(2));
        let g = Formula::always(Formula::atom(0u8));
        let t2: Vec<L> = vec![[0].into(), [0].into()];
        assert_eq!(first_satisfaction(&g, &t2), Some(0));
        let t3: Vec<L> = vec![[0].into(), L::new()];
        assert_eq!(first_satisfaction(&g, &t3), None);
    }

    // -- generated round trips --

    fn arb_condition(w: &World) -> BoxedStrategy<Condition> {
        let uavs = w.uavs().len();
        let targets = w.targets().len();
        let leaf = prop_oneof![
            (0..uavs, 0..8i32, 0..8i32).prop_map(|(uav, x, y)| Formula::atom(Proposition::AgentLoc {
                uav,
                cell: Cell::new(x, y)
            })),
            (0..targets, 0..uavs).prop_map(|(target, uav)| Formula::atom(Proposition::HavePhoto { target, uav })),
            (0..uavs).prop_map(|uav| Formula::atom(Proposition::Visited { asset: 0, uav })),
            (0..uavs).prop_map(|uav| Formula::atom(Proposition::CarryPallet { pallet: 0, uav })),
            Just(Formula::atom(Proposition::Delivered { pallet: 0, asset: 0 })),
            (0..20u32).prop_map(|k| Formula::atom(Proposition::TimeEq(k))),
        ];
        leaf.prop_recursive(3, 16, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| Formula::or(a, b)),
            ]
        })
        .boxed()
    }

    fn arb_set() -> impl Strategy<Value = PreferenceSet> {
        let w = world();
        let c = arb_condition(&w);
        let template = prop_oneof![
            c.clone().prop_map(Template::Sometime),
            c.clone().prop_map(Template::Always),
            c.clone().prop_map(Template::AtMostOnce),
            c.clone().prop_map(Template::AtEnd),
            (c.clone(), c.clone()).prop_map(|(a, b)| Template::SometimeAfter(a, b)),
            (c.clone(), c).prop_map(|(a, b)| Template::SometimeBefore(a, b)),
        ];
        let pref = (template, prop_oneof![Just(20i64), 0..100i64]);
        proptest::collection::vec(pref, 1..5).prop_flat_map(|ps| {
            let n = ps.len();
            let prefs: Vec<Preference> = ps
                .into_iter()
                .enumerate()
                .map(|(i, (template, weight))| Preference {
                    name: format!("p{i}"),
                    template,
                    weight,
                })
                .collect();
            let ords = proptest::collection::vec((0..n, 0..n, prop_oneof![Just(10i64), 0..50i64]), 0..3);
            (Just(prefs), ords).prop_map(|(preferences, ords)| PreferenceSet {
                preferences,
                orderings: ords
                    .into_iter()
                    .filter(|(a, b, _)| a != b)
                    .map(|(a, b, weight)| Ordering {
                        earlier: format!("p{a}"),
                        later: format!("p{b}"),
                        weight,
                    })
                    .collect(),
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn render_parse_round_trip(set in arb_set()) {
            let w = world();
            let text = render(&set, &w);
            prop_assert_eq!(parse(&text, &w).unwrap(), set);
        }

        #[test]
        fn classification_is_total(set in arb_set()) {
            for p in &set.preferences {
                let k = classify(p);
                prop_assert!(k == ConstraintKind::Control || k == ConstraintKind::Declarative);
            }
        }
    }

    #[test]
    fn forall_over_n_entities_yields_n() {
        let w = world();
        for (ty, n) in [("uav", 3), ("target", 2), ("asset", 1), ("pallet", 1)] {
            let text = format!("(forall (?x - {ty}) (preference g (always true)))");
            assert_eq!(parse(&text, &w).unwrap().preferences.len(), n);
        }
    }
}
