//! The `resplan` command line.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use resplan::assess::round1;
use resplan::planner::PlanError;
use resplan::prefs::PreferenceSet;
use resplan::scenarios::{self, Comparison, Scenario};

/// Exit codes other than success.
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_UNSOLVABLE: u8 = 2;
pub const EXIT_BUDGET: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "resplan", version, about = "Preference-based replanning for UAV missions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan a scenario, optionally with a constraints file.
    Plan {
        /// Bundled scenario name (t1..t6) or path to a scenario file.
        scenario: String,
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[arg(long)]
        horizon: Option<u32>,
        /// Give up after expanding this many search nodes.
        #[arg(long)]
        node_budget: Option<usize>,
        /// Write the plan here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate baseline, optimal and constrained expected returns.
    Compare {
        /// Scenario name, path, or `all` for the bundled set.
        scenario: String,
        /// Defaults to the scenario's reference constraints.
        #[arg(long)]
        constraints: Option<PathBuf>,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        let code = match e {
            PlanError::Unsolvable { .. } => EXIT_UNSOLVABLE,
            PlanError::BudgetExhausted { .. } => EXIT_BUDGET,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

pub fn resolve(name: &str) -> Result<Scenario, Failure> {
    if let Some(s) = scenarios::bundled_named(name) {
        return Ok(s);
    }
    let path = Path::new(name);
    if !path.exists() {
        return Err(Failure::input(format!(
            "`{name}` is neither a bundled scenario (t1..t6) nor a file"
        )));
    }
    scenarios::load(path).map_err(|e| Failure::input(format!("{name}: {e}")))
}

fn read_constraints(s: &Scenario, path: &Path) -> Result<PreferenceSet, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    s.parse_constraints(&text)
        .map_err(|e| Failure::input(format!("{}:{e}", path.display())))
}

/// Run `plan` and return the rendered plan.
pub fn plan(
    scenario: &str,
    constraints: Option<&Path>,
    horizon: Option<u32>,
    node_budget: Option<usize>,
) -> Result<String, Failure> {
    let mut s = resolve(scenario)?;
    if let Some(h) = horizon {
        s = s.with_horizon(h).map_err(|e| Failure::input(e.to_string()))?;
    }
    let extra = match constraints {
        Some(p) => read_constraints(&s, p)?,
        None => PreferenceSet::default(),
    };
    let mut config = s.search_config();
    if let Some(b) = node_budget {
        config.node_budget = b;
    }
    let plan = s.constrained_plan(&extra, &config).map_err(|e| match e {
        scenarios::CompareError::Plan(p) => Failure::from(p),
        other => Failure::input(other.to_string()),
    })?;
    Ok(plan.render(&s.world))
}

/// One table row: returns in f64, percentages rounded for display.
#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    pub base: f64,
    pub optimal: f64,
    pub constrained: f64,
    pub improvement: Option<f64>,
    pub optimality: Option<f64>,
}

impl Row {
    pub fn from_comparison(name: &str, c: &Comparison<f64>) -> Row {
        Row {
            name: name.to_string(),
            base: c.baseline.expected_return,
            optimal: c.optimal.value,
            constrained: c.constrained.expected_return,
            improvement: c.improvement().ok(),
            optimality: c.optimality().ok(),
        }
    }
}

pub fn compare_rows(scenario: &str, constraints: Option<&Path>) -> Result<Vec<Row>, Failure> {
    let list = if scenario.eq_ignore_ascii_case("all") {
        if constraints.is_some() {
            return Err(Failure::input("--constraints needs a single scenario, not `all`"));
        }
        scenarios::bundled()
    } else {
        vec![resolve(scenario)?]
    };
    let mut rows = Vec::new();
    for s in &list {
        let extra = match constraints {
            Some(p) => read_constraints(s, p)?,
            None => s.reference_constraints.clone(),
        };
        let c = s.compare::<f64>(&extra).map_err(|e| match e {
            scenarios::CompareError::Plan(p) => Failure::from(p),
            other => Failure::input(format!("{}: {other}", s.name)),
        })?;
        rows.push(Row::from_comparison(&s.name, &c));
    }
    Ok(rows)
}

fn pct(x: Option<f64>) -> String {
    match x {
        Some(v) if round1(v) == 0.0 => "0.0%".into(),
        Some(v) => format!("{:+.1}%", round1(v)),
        None => "n/a".into(),
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Fixed-width table with a mean row when there is more than one scenario.
pub fn render_table(rows: &[Row]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>10} {:>10} {:>12} {:>12} {:>11}",
        "Scenario", "Base", "Opt", "Constrained", "Improvement", "Optimality"
    );
    let line = |out: &mut String, name: &str, b: f64, o: f64, c: f64, imp: Option<f64>, opt: Option<f64>| {
        let _ = writeln!(
            out,
            "{:<10} {:>10.1} {:>10.1} {:>12.1} {:>12} {:>11}",
            name,
            round1(b),
            round1(o),
            round1(c),
            pct(imp),
            pct(opt)
        );
    };
    for r in rows {
        line(&mut out, &r.name, r.base, r.optimal, r.constrained, r.improvement, r.optimality);
    }
    if rows.len() > 1 {
        let m = |f: fn(&Row) -> f64| mean(rows.iter().map(f)).unwrap_or(0.0);
        line(
            &mut out,
            "mean",
            m(|r| r.base),
            m(|r| r.optimal),
            m(|r| r.constrained),
            mean(rows.iter().filter_map(|r| r.improvement)),
            mean(rows.iter().filter_map(|r| r.optimality)),
        );
    }
    out
}
