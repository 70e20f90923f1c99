//! Cooling schedules: divergence of `Σ ε_k^Γ` and replicate experiments
//! comparing schedules.

use serde::{Deserialize, Serialize};

use crate::analysis::analyze;
use crate::chain::GlobalState;
use crate::error::{PdlError, Result};
use crate::game::GameSpec;
use crate::params::PolicyParams;
use crate::policy::{Algorithm, Policy};
use crate::sim::{log_checkpoints, run_cooled, CooledReport, Schedule};

/// A schedule with the exponent it is judged against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub schedule: Schedule,
    pub gamma: f64,
    pub horizon: u64,
}

impl ScheduleSpec {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| match &self.schedule {
            Schedule::Constant { epsilon } => format!("constant({epsilon})"),
            Schedule::Polynomial { k0, gamma } => format!("polynomial({k0},{gamma})"),
            Schedule::Exponential { epsilon0, rate } => format!("exponential({epsilon0},{rate})"),
            Schedule::Table { values } => format!("table({})", values.len()),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    DivergesAnalytically,
    ConvergesAnalytically,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub gamma: f64,
    pub horizon: u64,
    /// `Σ_{k<horizon} ε_k^Γ`.
    pub partial_sum: f64,
    /// Contribution of the last nine tenths of the horizon.
    pub tail_sum: f64,
    pub verdict: Verdict,
}

fn analytic_verdict(schedule: &Schedule, gamma: f64) -> Verdict {
    match schedule {
        Schedule::Constant { .. } => Verdict::DivergesAnalytically,
        Schedule::Exponential { rate, .. } if *rate >= 1.0 => Verdict::DivergesAnalytically,
        Schedule::Exponential { .. } => Verdict::ConvergesAnalytically,
        // terms are (k + k0)^(-Γ/Γ')
        Schedule::Polynomial { gamma: g, .. } if gamma / g <= 1.0 => Verdict::DivergesAnalytically,
        Schedule::Polynomial { .. } => Verdict::ConvergesAnalytically,
        Schedule::Table { .. } => Verdict::Inconclusive,
    }
}

/// Whether `Σ ε_k^Γ` diverges, with partial sums up to `horizon`.
pub fn divergence_test(schedule: &Schedule, gamma: f64, horizon: u64) -> Result<DivergenceReport> {
    if !(gamma > 0.0) {
        return Err(PdlError::config("gamma", "must be positive"));
    }
    schedule.validate()?;
    let split = horizon / 10;
    let (mut head, mut tail) = (0.0, 0.0);
    for k in 0..horizon {
        let term = schedule.at(k).powf(gamma);
        if k < split {
            head += term;
        } else {
            tail += term;
        }
    }
    Ok(DivergenceReport {
        gamma,
        horizon,
        partial_sum: head + tail,
        tail_sum: tail,
        verdict: analytic_verdict(schedule, gamma),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleOutcome {
    pub name: String,
    pub divergence: DivergenceReport,
    pub run: CooledReport,
    /// Fractions never drop by more than the later checkpoint's interval.
    pub non_decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub algorithm: Algorithm,
    pub target: Vec<String>,
    pub outcomes: Vec<ScheduleOutcome>,
    /// Schedule names by final fraction, best first.
    pub ranking: Vec<String>,
}

/// Checkpoint fractions are non-decreasing up to Monte Carlo noise.
pub fn non_decreasing_within_ci(run: &CooledReport) -> bool {
    run.checkpoints.windows(2).all(|w| w[1].interval.1 >= w[0].fraction)
}

/// Runs every schedule from `D` and records how often replicates sit in the
/// predicted stochastically stable set.
pub fn schedule_experiment(
    game: &GameSpec,
    algorithm: Algorithm,
    params: &PolicyParams,
    schedules: &[ScheduleSpec],
    replicates: u64,
    seed: u64,
) -> Result<ExperimentReport> {
    if algorithm == Algorithm::Ritel {
        return Err(PdlError::input("cooling schedules apply to ITEL and IODL only"));
    }
    let analysis = analyze(game, algorithm, params, false, None)?;
    let target: Vec<GlobalState> = analysis.prediction.states.clone();
    let policy = Policy::new(algorithm, params.clone(), None)?;
    let mut outcomes = Vec::new();
    for spec in schedules {
        let divergence = divergence_test(&spec.schedule, spec.gamma, spec.horizon)?;
        let run = run_cooled(game, &policy, &spec.schedule, spec.horizon, seed, replicates, &target, &log_checkpoints(spec.horizon))?;
        outcomes.push(ScheduleOutcome {
            name: spec.label(),
            divergence,
            non_decreasing: non_decreasing_within_ci(&run),
            run,
        });
    }
    let mut order: Vec<(f64, String)> = outcomes
        .iter()
        .map(|o| (o.run.checkpoints.last().map_or(0.0, |c| c.fraction), o.name.clone()))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    Ok(ExperimentReport {
        algorithm,
        target: target.iter().map(ToString::to_string).collect(),
        outcomes,
        ranking: order.into_iter().map(|(_, n)| n).collect(),
    })
}
