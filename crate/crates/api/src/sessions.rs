//! Replanning sessions, one JSON file each under a root directory.

use std::collections::HashMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use resplan::assess;
use resplan::domain::World;
use resplan::planner::{self, Explanation, Plan, Score};
use resplan::prefs::{self, ConstraintKind, PreferenceSet};
use resplan::scenarios::{self, CompareError, Scenario};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SESSION_ROOT_VAR: &str = "RESPLAN_SESSION_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Idle,
    Running,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanView {
    /// Plan in the text form `resplan plan` prints.
    pub text: String,
    /// Action names per step, one entry per UAV.
    pub steps: Vec<Vec<String>>,
    /// UAV cells per trace state, `[x, y]`.
    pub positions: Vec<Vec<[i32; 2]>>,
    pub score: Score,
    pub explanation: Explanation,
    pub expected_return: f64,
}

impl PlanView {
    fn new(plan: &Plan, world: &World, prefs: &PreferenceSet, config: &planner::SearchConfig, expected: f64) -> Self {
        PlanView {
            text: plan.render(world),
            steps: plan
                .actions
                .iter()
                .map(|a| a.0.iter().map(|x| x.render(world)).collect())
                .collect(),
            positions: plan
                .trace
                .iter()
                .map(|s| s.uav_at.iter().map(|c| [c.x, c.y]).collect())
                .collect(),
            score: plan.score,
            explanation: planner::explain(plan, world, prefs, config),
            expected_return: expected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintView {
    pub name: String,
    pub weight: i64,
    pub kind: ConstraintKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replan {
    pub constraints: Vec<ConstraintView>,
    pub plan: PlanView,
    pub optimal_return: f64,
    pub improvement: Option<f64>,
    pub optimality: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub scenario: String,
    /// The scenario as it was when the session started.
    pub scenario_text: String,
    pub status: Status,
    /// Bumped on every stored change.
    pub revision: u64,
    pub baseline: PlanView,
    pub constraints_text: Option<String>,
    pub replan: Option<Replan>,
    pub error: Option<String>,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("no session `{0}`")]
    NotFound(String),
    #[error("session `{0}` is already replanning")]
    Busy(String),
    #[error("session store: {0}")]
    Io(#[from] io::Error),
    #[error("session store: {0}")]
    Corrupt(#[from] serde_json::Error),
    #[error("{0}")]
    Scenario(#[from] scenarios::ScenarioError),
    #[error("{0}")]
    Compare(#[from] CompareError),
    #[error("{0}")]
    Plan(#[from] planner::PlanError),
    #[error("{0}")]
    Assess(#[from] assess::AssessError),
}

/// Build a new session with its baseline plan.
pub fn start(scenario: &Scenario, id: String) -> Result<Session, SessionError> {
    let config = scenario.search_config();
    let plan = scenario.baseline_plan(&config)?;
    let model = scenario.model::<f64>();
    let ret = assess::expected_return(&plan, &model, &scenario.operator_preferences)?;
    Ok(Session {
        id,
        scenario: scenario.name.clone(),
        scenario_text: scenarios::render(scenario),
        status: Status::Idle,
        revision: 0,
        baseline: PlanView::new(
            &plan,
            &scenario.world,
            &scenario.operator_preferences,
            &config,
            ret.expected_return,
        ),
        constraints_text: None,
        replan: None,
        error: None,
    })
}

/// Replan `scenario` with parsed constraints. This is the slow part.
pub fn replan(scenario: &Scenario, constraints: &PreferenceSet) -> Result<Replan, SessionError> {
    let c = scenario.compare::<f64>(constraints)?;
    let config = scenario.search_config();
    let all = scenario.operator_preferences.merged(constraints).map_err(CompareError::from)?;
    Ok(Replan {
        constraints: constraints
            .preferences
            .iter()
            .map(|p| ConstraintView {
                name: p.name.clone(),
                weight: p.weight,
                kind: prefs::classify(p),
            })
            .collect(),
        plan: PlanView::new(
            &c.constrained_plan,
            &scenario.world,
            &all,
            &config,
            c.constrained.expected_return,
        ),
        optimal_return: c.optimal.value,
        improvement: c.improvement().ok(),
        optimality: c.optimality().ok(),
    })
}

/// Sessions cached in memory and mirrored to disk.
pub struct Store {
    root: PathBuf,
    cache: Mutex<HashMap<String, Session>>,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Store> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Store {
            root,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Root from the environment, else `./resplan-sessions`.
    pub fn from_env() -> io::Result<Store> {
        let root = std::env::var_os(SESSION_ROOT_VAR)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("resplan-sessions"));
        Store::open(root)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}.json"))
    }

    fn write(&self, s: &Session) -> Result<(), SessionError> {
        let tmp = self.root.join(format!(".{}.tmp", s.id));
        std::fs::write(&tmp, serde_json::to_vec_pretty(s)?)?;
        std::fs::rename(tmp, self.path(&s.id))?;
        Ok(())
    }

    pub fn insert(&self, s: Session) -> Result<Session, SessionError> {
        let mut cache = self.cache.lock().expect("session cache poisoned");
        self.store(&mut cache, s)
    }

    fn store(&self, cache: &mut HashMap<String, Session>, mut s: Session) -> Result<Session, SessionError> {
        s.revision += 1;
        self.write(&s)?;
        cache.insert(s.id.clone(), s.clone());
        Ok(s)
    }

    pub fn get(&self, id: &str) -> Result<Session, SessionError> {
        let mut cache = self.cache.lock().expect("session cache poisoned");
        self.load(&mut cache, id)
    }

    fn load(&self, cache: &mut HashMap<String, Session>, id: &str) -> Result<Session, SessionError> {
        if let Some(s) = cache.get(id) {
            return Ok(s.clone());
        }
        // ids are generated here; anything else cannot name a file
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(SessionError::NotFound(id.to_string()));
        }
        let bytes = match std::fs::read(self.path(id)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(SessionError::NotFound(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        let s: Session = serde_json::from_slice(&bytes)?;
        cache.insert(id.to_string(), s.clone());
        Ok(s)
    }

    /// Load, change and store a session under one lock.
    fn update(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<(), SessionError>) -> Result<Session, SessionError> {
        let mut cache = self.cache.lock().expect("session cache poisoned");
        let mut s = self.load(&mut cache, id)?;
        f(&mut s)?;
        self.store(&mut cache, s)
    }

    /// Mark a session as running unless it already is.
    pub fn begin(&self, id: &str, constraints_text: &str) -> Result<Session, SessionError> {
        self.update(id, |s| {
            if s.status == Status::Running {
                return Err(SessionError::Busy(s.id.clone()));
            }
            s.status = Status::Running;
            s.constraints_text = Some(constraints_text.to_string());
            s.error = None;
            Ok(())
        })
    }

    pub fn finish(&self, id: &str, result: Result<Replan, SessionError>) -> Result<Session, SessionError> {
        self.update(id, |s| {
            match result {
                Ok(r) => {
                    s.status = Status::Idle;
                    s.replan = Some(r);
                }
                Err(e) => {
                    s.status = Status::Failed;
                    s.error = Some(e.to_string());
                }
            }
            Ok(())
        })
    }
}
