//! The deterministic base model: grid, vehicles, targets, assets and pallets,
//! lock-step joint actions and the proposition vocabulary used by every
//! temporal constraint.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

/// Default plan length bound when a scenario does not give one.
pub const DEFAULT_HORIZON: u32 = 20;

/// A grid coordinate. `x` grows eastwards, `y` grows northwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    pub fn offset(self, dir: Direction) -> Cell {
        let (dx, dy) = dir.delta();
        Cell::new(self.x + dx, self.y + dy)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    pub width: i32,
    pub height: i32,
}

impl Grid {
    pub fn contains(&self, cell: Cell) -> bool {
        (0..self.width).contains(&cell.x) && (0..self.height).contains(&cell.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    N,
    S,
    E,
    W,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::N, Direction::S, Direction::E, Direction::W];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::N => (0, 1),
            Direction::S => (0, -1),
            Direction::E => (1, 0),
            Direction::W => (-1, 0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::N => "n",
            Direction::S => "s",
            Direction::E => "e",
            Direction::W => "w",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Uav {
    pub id: String,
    pub start: Cell,
    pub can_carry: bool,
    pub operational: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TargetStatus {
    Unknown,
    Friendly,
    Hostile,
}

impl TargetStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetStatus::Unknown => "unknown",
            TargetStatus::Friendly => "friendly",
            TargetStatus::Hostile => "hostile",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub id: String,
    /// One cell per timestep; the last cell is held once the list runs out.
    pub trajectory: Vec<Cell>,
    pub status: TargetStatus,
}

impl Target {
    pub fn position(&self, t: u32) -> Cell {
        let idx = (t as usize).min(self.trajectory.len() - 1);
        self.trajectory[idx]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Asset {
    pub id: String,
    pub location: Cell,
    /// Index of the pallet this asset needs. `None` accepts any pallet.
    pub needs_pallet: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pallet {
    pub id: String,
    pub location: Cell,
}

/// A mission objective. Mission goals are hard: every plan must reach them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Goal {
    /// Some UAV holds a photo of the target.
    Photo(usize),
    /// Some UAV has been at the asset.
    Visit(usize),
    /// The asset has received a pallet it accepts.
    Deliver(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("grid must be at least 1x1, got {width}x{height}")]
    EmptyGrid { width: i32, height: i32 },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("{kind} `{id}` lies outside the grid at {cell}")]
    OutsideGrid {
        kind: &'static str,
        id: String,
        cell: Cell,
    },
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("target `{0}` has an empty trajectory")]
    EmptyTrajectory(String),
    #[error("asset `{asset}` needs unknown pallet index {pallet}")]
    UnknownPallet { asset: String, pallet: usize },
    #[error("goal refers to unknown {kind} index {index}")]
    UnknownGoalEntity { kind: &'static str, index: usize },
    #[error("world too large: {0}")]
    TooLarge(String),
    #[error("world needs at least one UAV")]
    NoUavs,
}

/// The immutable planning world. Operators may change objectives but never
/// this structure; all accessors hand out shared references.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct World {
    grid: Grid,
    uavs: Vec<Uav>,
    targets: Vec<Target>,
    assets: Vec<Asset>,
    pallets: Vec<Pallet>,
    horizon: u32,
    goals: Vec<Goal>,
}

impl World {
    pub fn new(
        grid: Grid,
        uavs: Vec<Uav>,
        targets: Vec<Target>,
        assets: Vec<Asset>,
        pallets: Vec<Pallet>,
        horizon: u32,
        goals: Vec<Goal>,
    ) -> Result<Self, DomainError> {
        if grid.width < 1 || grid.height < 1 {
            return Err(DomainError::EmptyGrid {
                width: grid.width,
                height: grid.height,
            });
        }
        if horizon < 1 {
            return Err(DomainError::ZeroHorizon);
        }
        if uavs.is_empty() {
            return Err(DomainError::NoUavs);
        }
        let inside = |kind: &'static str, id: &str, cell: Cell| {
            if grid.contains(cell) {
                Ok(())
            } else {
                Err(DomainError::OutsideGrid {
                    kind,
                    id: id.to_string(),
                    cell,
                })
            }
        };
        let mut seen = BTreeSet::new();
        let mut unique = |kind: &'static str, id: &str| {
            if seen.insert(id.to_string()) {
                Ok(())
            } else {
                Err(DomainError::DuplicateId {
                    kind,
                    id: id.to_string(),
                })
            }
        };
        for u in &uavs {
            unique("uav", &u.id)?;
            inside("uav", &u.id, u.start)?;
        }
        for t in &targets {
            unique("target", &t.id)?;
            if t.trajectory.is_empty() {
                return Err(DomainError::EmptyTrajectory(t.id.clone()));
            }
            for &c in &t.trajectory {
                inside("target", &t.id, c)?;
            }
        }
        for a in &assets {
            unique("asset", &a.id)?;
            inside("asset", &a.id, a.location)?;
            if let Some(p) = a.needs_pallet {
                if p >= pallets.len() {
                    return Err(DomainError::UnknownPallet {
                        asset: a.id.clone(),
                        pallet: p,
                    });
                }
            }
        }
        for p in &pallets {
            unique("pallet", &p.id)?;
            inside("pallet", &p.id, p.location)?;
        }
        for g in &goals {
            let (kind, index, len) = match *g {
                Goal::Photo(i) => ("target", i, targets.len()),
                Goal::Visit(i) => ("asset", i, assets.len()),
                Goal::Deliver(i) => ("asset", i, assets.len()),
            };
            if index >= len {
                return Err(DomainError::UnknownGoalEntity { kind, index });
            }
        }
        let n = uavs.len();
        let limits = [
            ("uavs", n),
            ("target x uav pairs", targets.len() * n),
            ("asset x uav pairs", assets.len() * n),
            ("pallet x asset pairs", pallets.len() * assets.len()),
        ];
        for (what, count) in limits {
            if count > 64 {
                return Err(DomainError::TooLarge(format!("{count} {what} (max 64)")));
            }
        }
        if pallets.len() > u8::MAX as usize {
            return Err(DomainError::TooLarge(format!("{} pallets", pallets.len())));
        }
        Ok(World {
            grid,
            uavs,
            targets,
            assets,
            pallets,
            horizon,
            goals,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }
    pub fn uavs(&self) -> &[Uav] {
        &self.uavs
    }
    pub fn targets(&self) -> &[Target] {
        &self.targets
    }
    pub fn assets(&self) -> &[Asset] {
        &self.assets
    }
    pub fn pallets(&self) -> &[Pallet] {
        &self.pallets
    }
    pub fn horizon(&self) -> u32 {
        self.horizon
    }
    pub fn goals(&self) -> &[Goal] {
        &self.goals
    }

    /// Same world with a different plan-length bound.
    pub fn with_horizon(&self, horizon: u32) -> Result<World, DomainError> {
        if horizon < 1 {
            return Err(DomainError::ZeroHorizon);
        }
        let mut w = self.clone();
        w.horizon = horizon;
        Ok(w)
    }

    pub fn uav_index(&self, id: &str) -> Option<usize> {
        self.uavs.iter().position(|u| u.id == id)
    }
    pub fn target_index(&self, id: &str) -> Option<usize> {
        self.targets.iter().position(|t| t.id == id)
    }
    pub fn asset_index(&self, id: &str) -> Option<usize> {
        self.assets.iter().position(|a| a.id == id)
    }
    pub fn pallet_index(&self, id: &str) -> Option<usize> {
        self.pallets.iter().position(|p| p.id == id)
    }

    pub fn accepts(&self, asset: usize, pallet: usize) -> bool {
        self.assets[asset].needs_pallet.is_none_or(|p| p == pallet)
    }

    pub fn goal_id(&self, goal: Goal) -> String {
        match goal {
            Goal::Photo(t) => format!("photo-{}", self.targets[t].id),
            Goal::Visit(a) => format!("visit-{}", self.assets[a].id),
            Goal::Deliver(a) => format!("deliver-{}", self.assets[a].id),
        }
    }

    pub fn initial_state(&self) -> JointState {
        let mut s = JointState {
            t: 0,
            uav_at: self.uavs.iter().map(|u| u.start).collect(),
            carrying: self.uavs.iter().map(|_| None).collect(),
            photos: 0,
            visited: 0,
            delivered: 0,
            down: 0,
        };
        for (i, u) in self.uavs.iter().enumerate() {
            if !u.operational {
                s.down |= 1 << i;
            }
        }
        s.mark_visits(self);
        s
    }

    pub(crate) fn photo_bit(&self, target: usize, uav: usize) -> u64 {
        1 << (target * self.uavs.len() + uav)
    }
    pub(crate) fn visit_bit(&self, asset: usize, uav: usize) -> u64 {
        1 << (asset * self.uavs.len() + uav)
    }
    pub(crate) fn deliver_bit(&self, pallet: usize, asset: usize) -> u64 {
        1 << (pallet * self.assets.len() + asset)
    }
}

/// Joint state of every vehicle and the monotone achievement sets.
///
/// Sets are bitmasks indexed by entity position in the [`World`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointState {
    pub t: u32,
    pub uav_at: SmallVec<[Cell; 4]>,
    pub carrying: SmallVec<[Option<u8>; 4]>,
    pub photos: u64,
    pub visited: u64,
    pub delivered: u64,
    /// UAVs that cannot act: out of service from the start, or lost.
    pub down: u64,
}

impl JointState {
    pub fn is_down(&self, uav: usize) -> bool {
        self.down & (1 << uav) != 0
    }

    pub fn has_photo(&self, world: &World, target: usize, uav: usize) -> bool {
        self.photos & world.photo_bit(target, uav) != 0
    }

    pub fn has_visited(&self, world: &World, asset: usize, uav: usize) -> bool {
        self.visited & world.visit_bit(asset, uav) != 0
    }

    pub fn is_delivered(&self, world: &World, pallet: usize, asset: usize) -> bool {
        self.delivered & world.deliver_bit(pallet, asset) != 0
    }

    pub fn pallet_delivered(&self, world: &World, pallet: usize) -> bool {
        (0..world.assets.len()).any(|a| self.is_delivered(world, pallet, a))
    }

    pub fn carrier_of(&self, pallet: usize) -> Option<usize> {
        self.carrying
            .iter()
            .position(|c| *c == Some(pallet as u8))
    }

    /// The pallet still sits at its original location.
    pub fn pallet_at_origin(&self, world: &World, pallet: usize) -> bool {
        self.carrier_of(pallet).is_none() && !self.pallet_delivered(world, pallet)
    }

    pub fn goal_met(&self, world: &World, goal: Goal) -> bool {
        let n = world.uavs.len();
        match goal {
            Goal::Photo(t) => (0..n).any(|u| self.has_photo(world, t, u)),
            Goal::Visit(a) => (0..n).any(|u| self.has_visited(world, a, u)),
            Goal::Deliver(a) => (0..world.pallets.len()).any(|p| self.is_delivered(world, p, a)),
        }
    }

    pub fn all_goals_met(&self, world: &World) -> bool {
        world.goals.iter().all(|&g| self.goal_met(world, g))
    }

    fn mark_visits(&mut self, world: &World) {
        for (u, &cell) in self.uav_at.iter().enumerate() {
            if self.down & (1 << u) != 0 {
                continue;
            }
            for (a, asset) in world.assets.iter().enumerate() {
                if asset.location == cell {
                    self.visited |= world.visit_bit(a, u);
                }
            }
        }
    }

    /// Truth of one grounded proposition in this state.
    pub fn holds(&self, world: &World, prop: &Proposition) -> bool {
        match *prop {
            Proposition::AgentLoc { uav, cell } => self.uav_at[uav] == cell,
            Proposition::HavePhoto { target, uav } => self.has_photo(world, target, uav),
            Proposition::Visited { asset, uav } => self.has_visited(world, asset, uav),
            Proposition::CarryPallet { pallet, uav } => self.carrying[uav] == Some(pallet as u8),
            Proposition::Delivered { pallet, asset } => self.is_delivered(world, pallet, asset),
            Proposition::TimeEq(k) => self.t == k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UavAction {
    Wait,
    Move(Direction),
    TakePhoto(usize),
    PickUp(usize),
    Drop(usize),
}

impl UavAction {
    pub fn is_wait(&self) -> bool {
        matches!(self, UavAction::Wait)
    }

    pub fn render(&self, world: &World) -> String {
        match *self {
            UavAction::Wait => "wait".into(),
            UavAction::Move(d) => format!("move-{}", d.as_str()),
            UavAction::TakePhoto(t) => format!("photo({})", world.targets[t].id),
            UavAction::PickUp(p) => format!("pickup({})", world.pallets[p].id),
            UavAction::Drop(a) => format!("drop({})", world.assets[a].id),
        }
    }

    pub fn parse(text: &str, world: &World) -> Option<UavAction> {
        let text = text.trim();
        if text == "wait" {
            return Some(UavAction::Wait);
        }
        if let Some(d) = text.strip_prefix("move-") {
            return Direction::ALL
                .into_iter()
                .find(|x| x.as_str() == d)
                .map(UavAction::Move);
        }
        let (head, rest) = text.split_once('(')?;
        let arg = rest.strip_suffix(')')?;
        match head {
            "photo" => world.target_index(arg).map(UavAction::TakePhoto),
            "pickup" => world.pallet_index(arg).map(UavAction::PickUp),
            "drop" => world.asset_index(arg).map(UavAction::Drop),
            _ => None,
        }
    }
}

/// One action per UAV, in world order. Down UAVs always hold `Wait`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointAction(pub SmallVec<[UavAction; 4]>);

impl JointAction {
    pub fn wait(n: usize) -> Self {
        JointAction(std::iter::repeat_n(UavAction::Wait, n).collect())
    }

    /// Number of non-`Wait` entries; each one costs one unit.
    pub fn cost(&self) -> u32 {
        self.0.iter().filter(|a| !a.is_wait()).count() as u32
    }
}

/// Why a per-UAV action cannot be taken.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("UAV is not operational")]
    NotOperational,
    #[error("move leaves the grid")]
    LeavesGrid,
    #[error("target is not in the UAV's cell")]
    TargetNotHere,
    #[error("UAV cannot carry pallets")]
    CannotCarry,
    #[error("UAV already carries a pallet")]
    AlreadyCarrying,
    #[error("pallet is not available in the UAV's cell")]
    PalletNotHere,
    #[error("UAV carries no pallet")]
    NotCarrying,
    #[error("UAV is not at the asset")]
    NotAtAsset,
    #[error("asset does not accept the carried pallet")]
    WrongPallet,
    #[error("pallet is picked up by more than one UAV")]
    ContestedPallet,
    #[error("unknown entity index")]
    UnknownEntity,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("joint action has {got} entries, world has {expected} UAVs")]
    Arity { expected: usize, got: usize },
    #[error("UAV `{uav}` cannot {action}: {violation}")]
    Inapplicable {
        uav: String,
        action: String,
        violation: Violation,
    },
    #[error("horizon {0} reached")]
    HorizonReached(u32),
}

/// Precondition check for a single UAV's action.
pub fn check_uav_action(
    state: &JointState,
    world: &World,
    uav: usize,
    action: UavAction,
) -> Result<(), Violation> {
    if action.is_wait() {
        return Ok(());
    }
    if state.is_down(uav) {
        return Err(Violation::NotOperational);
    }
    let here = state.uav_at[uav];
    match action {
        UavAction::Wait => Ok(()),
        UavAction::Move(d) => {
            if world.grid.contains(here.offset(d)) {
                Ok(())
            } else {
                Err(Violation::LeavesGrid)
            }
        }
        UavAction::TakePhoto(t) => {
            let target = world.targets.get(t).ok_or(Violation::UnknownEntity)?;
            if target.position(state.t) == here {
                Ok(())
            } else {
                Err(Violation::TargetNotHere)
            }
        }
        UavAction::PickUp(p) => {
            let pallet = world.pallets.get(p).ok_or(Violation::UnknownEntity)?;
            if !world.uavs[uav].can_carry {
                Err(Violation::CannotCarry)
            } else if state.carrying[uav].is_some() {
                Err(Violation::AlreadyCarrying)
            } else if pallet.location != here || !state.pallet_at_origin(world, p) {
                Err(Violation::PalletNotHere)
            } else {
                Ok(())
            }
        }
        UavAction::Drop(a) => {
            let asset = world.assets.get(a).ok_or(Violation::UnknownEntity)?;
            let Some(p) = state.carrying[uav] else {
                return Err(Violation::NotCarrying);
            };
            if asset.location != here {
                Err(Violation::NotAtAsset)
            } else if !world.accepts(a, p as usize) {
                Err(Violation::WrongPallet)
            } else {
                Ok(())
            }
        }
    }
}

/// Per-UAV applicable actions in tie-break order (the derived `Ord` of
/// [`UavAction`]).
pub fn uav_options(state: &JointState, world: &World, uav: usize) -> Vec<UavAction> {
    let mut out = vec![UavAction::Wait];
    if state.is_down(uav) {
        return out;
    }
    let candidates = Direction::ALL
        .into_iter()
        .map(UavAction::Move)
        .chain((0..world.targets.len()).map(UavAction::TakePhoto))
        .chain((0..world.pallets.len()).map(UavAction::PickUp))
        .chain((0..world.assets.len()).map(UavAction::Drop));
    out.extend(candidates.filter(|&a| check_uav_action(state, world, uav, a).is_ok()));
    out
}

fn contested(actions: &[UavAction]) -> bool {
    actions.iter().enumerate().any(|(i, a)| match a {
        UavAction::PickUp(p) => actions[i + 1..].contains(&UavAction::PickUp(*p)),
        _ => false,
    })
}

/// Every applicable joint action, in lexicographic (UAV order, action order)
/// order. Joint actions in which two UAVs grab the same pallet are excluded.
pub fn applicable(state: &JointState, world: &World) -> Vec<JointAction> {
    let options: Vec<Vec<UavAction>> = (0..world.uavs.len())
        .map(|u| uav_options(state, world, u))
        .collect();
    let mut out = Vec::new();
    let mut current: SmallVec<[UavAction; 4]> = SmallVec::new();
    fn rec(
        options: &[Vec<UavAction>],
        current: &mut SmallVec<[UavAction; 4]>,
        out: &mut Vec<JointAction>,
    ) {
        if current.len() == options.len() {
            if !contested(current) {
                out.push(JointAction(current.clone()));
            }
            return;
        }
        for &a in &options[current.len()] {
            current.push(a);
            rec(options, current, out);
            current.pop();
        }
    }
    rec(&options, &mut current, &mut out);
    out
}

/// Check a whole joint action against the state.
pub fn check_joint(state: &JointState, action: &JointAction, world: &World) -> Result<(), StepError> {
    if action.0.len() != world.uavs.len() {
        return Err(StepError::Arity {
            expected: world.uavs.len(),
            got: action.0.len(),
        });
    }
    if state.t >= world.horizon {
        return Err(StepError::HorizonReached(world.horizon));
    }
    for (u, &a) in action.0.iter().enumerate() {
        check_uav_action(state, world, u, a).map_err(|violation| StepError::Inapplicable {
            uav: world.uavs[u].id.clone(),
            action: a.render(world),
            violation,
        })?;
    }
    if let Some((u, a)) = action
        .0
        .iter()
        .enumerate()
        .find(|(i, a)| matches!(a, UavAction::PickUp(p) if action.0[i + 1..].contains(&UavAction::PickUp(*p))))
    {
        return Err(StepError::Inapplicable {
            uav: world.uavs[u].id.clone(),
            action: a.render(world),
            violation: Violation::ContestedPallet,
        });
    }
    Ok(())
}

/// Deterministic transition. Fails if any component is inapplicable.
pub fn step(state: &JointState, action: &JointAction, world: &World) -> Result<JointState, StepError> {
    check_joint(state, action, world)?;
    Ok(apply_unchecked(state, action, world))
}

/// Transition without precondition checks. Callers must have validated the
/// action with [`check_joint`] or built it from [`applicable`].
pub(crate) fn apply_unchecked(state: &JointState, action: &JointAction, world: &World) -> JointState {
    let mut next = state.clone();
    next.t += 1;
    for (u, &a) in action.0.iter().enumerate() {
        match a {
            UavAction::Wait => {}
            UavAction::Move(d) => next.uav_at[u] = state.uav_at[u].offset(d),
            UavAction::TakePhoto(t) => next.photos |= world.photo_bit(t, u),
            UavAction::PickUp(p) => next.carrying[u] = Some(p as u8),
            UavAction::Drop(asset) => {
                if let Some(p) = state.carrying[u] {
                    next.delivered |= world.deliver_bit(p as usize, asset);
                    next.carrying[u] = None;
                }
            }
        }
    }
    next.mark_visits(world);
    next
}

/// A grounded atomic proposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Proposition {
    AgentLoc { uav: usize, cell: Cell },
    HavePhoto { target: usize, uav: usize },
    Visited { asset: usize, uav: usize },
    CarryPallet { pallet: usize, uav: usize },
    Delivered { pallet: usize, asset: usize },
    TimeEq(u32),
}

impl Proposition {
    /// S-expression form, e.g. `(agentloc uav1 v4 v3)`.
    pub fn render(&self, world: &World) -> String {
        match *self {
            Proposition::AgentLoc { uav, cell } => {
                format!("(agentloc {} v{} v{})", world.uavs[uav].id, cell.x, cell.y)
            }
            Proposition::HavePhoto { target, uav } => {
                format!("(have-photo {} {})", world.targets[target].id, world.uavs[uav].id)
            }
            Proposition::Visited { asset, uav } => {
                format!("(visited {} {})", world.assets[asset].id, world.uavs[uav].id)
            }
            Proposition::CarryPallet { pallet, uav } => {
                format!("(carry-pallet {} {})", world.pallets[pallet].id, world.uavs[uav].id)
            }
            Proposition::Delivered { pallet, asset } => {
                format!("(delivered {} {})", world.pallets[pallet].id, world.assets[asset].id)
            }
            Proposition::TimeEq(k) => format!("(t-eq {k})"),
        }
    }

    pub fn is_location(&self) -> bool {
        matches!(self, Proposition::AgentLoc { .. })
    }
}

/// A state read as a valuation of [`Proposition`]s.
#[derive(Debug, Clone, Copy)]
pub struct Observed<'a> {
    pub state: &'a JointState,
    pub world: &'a World,
}

impl crate::ltl::Valuation<Proposition> for Observed<'_> {
    fn holds(&self, atom: &Proposition) -> bool {
        self.state.holds(self.world, atom)
    }
}

/// The exact set of propositions true in `state`. `TimeEq` is included for
/// the current timestep only.
pub fn propositions(state: &JointState, world: &World) -> BTreeSet<Proposition> {
    let mut out = BTreeSet::new();
    let n = world.uavs.len();
    for (uav, &cell) in state.uav_at.iter().enumerate() {
        out.insert(Proposition::AgentLoc { uav, cell });
        if let Some(p) = state.carrying[uav] {
            out.insert(Proposition::CarryPallet {
                pallet: p as usize,
                uav,
            });
        }
    }
    for target in 0..world.targets.len() {
        for uav in 0..n {
            if state.has_photo(world, target, uav) {
                out.insert(Proposition::HavePhoto { target, uav });
            }
        }
    }
    for asset in 0..world.assets.len() {
        for uav in 0..n {
            if state.has_visited(world, asset, uav) {
                out.insert(Proposition::Visited { asset, uav });
            }
        }
        for pallet in 0..world.pallets.len() {
            if state.is_delivered(world, pallet, asset) {
                out.insert(Proposition::Delivered { pallet, asset });
            }
        }
    }
    out.insert(Proposition::TimeEq(state.t));
    out
}

/// Indices into `world.goals()` achieved by the final state of `trace`.
pub fn goals_satisfied(trace: &[JointState], world: &World) -> BTreeSet<usize> {
    let Some(last) = trace.last() else {
        return BTreeSet::new();
    };
    world
        .goals
        .iter()
        .enumerate()
        .filter(|(_, &g)| last.goal_met(world, g))
        .map(|(i, _)| i)
        .collect()
}
