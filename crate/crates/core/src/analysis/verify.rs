//! Predicted stochastically stable sets checked against exact stationary
//! distributions and simulated occupancy.

use serde::Serialize;

use super::predict::{analyze, SssCase};
use super::ritel_class::predict_sss_ritel;
use super::scc::classes_of_dense;
use super::stationary::{limit_distribution, stationary_distribution, StationaryError};
use crate::chain::ritel::build_ritel_numeric_chain;
use crate::chain::{GlobalState, DEFAULT_STATE_CAP};
use crate::error::Result;
use crate::game::{GameSpec, Quantization};
use crate::params::PolicyParams;
use crate::policy::{Algorithm, Policy};
use crate::sim::{merge_occupancy, run_replicates, SimParams};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsilonCheck {
    pub epsilon: f64,
    /// Stationary mass of the predicted set.
    pub predicted_mass: f64,
    /// Largest mass of a recurrent class outside the predicted set.
    pub max_other_mass: f64,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationCheck {
    pub epsilon: f64,
    pub replicates: u64,
    pub steps: u64,
    /// Post-burn-in share of time in the predicted set.
    pub occupancy: f64,
    /// Every absorbed run ended inside the predicted set.
    pub absorptions_inside: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub algorithm: Algorithm,
    pub predicted: Vec<String>,
    /// Formula and potential paths agree.
    pub paths_agree: bool,
    pub absorbing: bool,
    pub checks: Vec<EpsilonCheck>,
    /// Predicted mass grows as ε shrinks along the grid.
    pub monotone: bool,
    pub simulation: Option<SimulationCheck>,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

fn sorted_desc(grid: &[f64]) -> Vec<f64> {
    let mut g = grid.to_vec();
    g.sort_by(|a, b| b.total_cmp(a));
    g
}

fn monotone(checks: &[EpsilonCheck]) -> bool {
    checks.windows(2).all(|w| w[1].predicted_mass >= w[0].predicted_mass - 1e-12)
}

/// ITEL or IODL: exact stationary masses on the grid, plus an optional
/// simulation with `(params, replicates)`.
pub fn verify_theorem(
    game: &GameSpec,
    algorithm: Algorithm,
    params: &PolicyParams,
    eps_grid: &[f64],
    simulation: Option<(&SimParams, u64)>,
) -> Result<VerifyReport> {
    let analysis = analyze(game, algorithm, params, false, None)?;
    let predicted = analysis.predicted_indices();
    let absorbing = analysis.prediction.case == SssCase::Absorbing;
    let mut failures = Vec::new();
    let paths_agree = analysis.agree();
    if !paths_agree {
        failures.push("formula and potential minimizers differ".to_string());
    }
    let mut checks = Vec::new();
    for eps in sorted_desc(eps_grid) {
        let p = analysis.chain.eval_dense(eps);
        match stationary_distribution(&p) {
            Ok(st) => {
                let mass = |members: &[usize]| members.iter().map(|&i| st.pi[i]).sum::<f64>();
                let predicted_mass = mass(&predicted);
                let max_other_mass = analysis
                    .graph
                    .nodes
                    .iter()
                    .filter(|n| n.members.iter().all(|m| !predicted.contains(m)))
                    .map(|n| mass(&n.members))
                    .fold(0.0, f64::max);
                let pass = predicted_mass > max_other_mass;
                if !pass {
                    failures.push(format!("eps {eps}: predicted mass {predicted_mass} <= {max_other_mass}"));
                }
                checks.push(EpsilonCheck {
                    epsilon: eps,
                    predicted_mass,
                    max_other_mass,
                    residual: st.residual,
                    pass,
                });
            }
            Err(StationaryError::MultipleClosedClasses(closed)) if absorbing => {
                let inside = closed.iter().flatten().all(|i| predicted.contains(i));
                if !inside {
                    failures.push(format!("eps {eps}: a closed class lies outside the absorbing set"));
                }
                let identity = predicted.iter().all(|&i| p[i][i] == 1.0);
                if !identity {
                    failures.push(format!("eps {eps}: an absorbing state can be left"));
                }
            }
            Err(e) => failures.push(format!("eps {eps}: {e}")),
        }
    }
    let is_monotone = monotone(&checks);
    if !is_monotone {
        failures.push("predicted mass is not monotone in epsilon".to_string());
    }
    let states: Vec<GlobalState> = predicted.iter().map(|&i| analysis.chain.states[i].clone()).collect();
    let simulation = match simulation {
        Some((sp, replicates)) => {
            let policy = Policy::new(algorithm, params.clone(), None)?;
            let check = simulate_check(game, &policy, sp, replicates, &states)?;
            if absorbing && !check.absorptions_inside {
                failures.push("a run absorbed outside the predicted set".to_string());
            }
            Some(check)
        }
        None => None,
    };
    Ok(VerifyReport {
        algorithm,
        predicted: states.iter().map(ToString::to_string).collect(),
        paths_agree,
        absorbing,
        checks,
        monotone: is_monotone,
        simulation,
        failures,
    })
}

fn simulate_check(game: &GameSpec, policy: &Policy, sp: &SimParams, replicates: u64, target: &[GlobalState]) -> Result<SimulationCheck> {
    let reports = run_replicates(game, policy, sp, None, replicates)?;
    let occ = merge_occupancy(&reports, true);
    let occupancy = occ.iter().filter(|(s, _)| target.contains(s)).map(|(_, f)| f).sum();
    let absorptions_inside = reports
        .iter()
        .filter(|r| r.absorption.is_some())
        .all(|r| target.contains(&r.final_state));
    Ok(SimulationCheck {
        epsilon: sp.epsilon,
        replicates,
        steps: sp.steps,
        occupancy,
        absorptions_inside,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RitelMassCheck {
    pub epsilon: f64,
    pub period: usize,
    pub states: usize,
    pub closed_classes: usize,
    /// Long-run mass from D of states in the predicted superset.
    pub inside: f64,
    pub outside: f64,
}

/// RITEL: aggregate stationary mass of the predicted superset on the numeric
/// chain at each ε.
pub fn verify_ritel_superset(
    game: &GameSpec,
    quant: &Quantization,
    tau0: f64,
    params: &PolicyParams,
    eps_grid: &[f64],
) -> Result<Vec<RitelMassCheck>> {
    let prediction = predict_sss_ritel(game, quant, tau0, params, false)?;
    let policy = Policy::ritel(params.clone(), quant.clone());
    let mut out = Vec::new();
    for eps in sorted_desc(eps_grid) {
        let chain = build_ritel_numeric_chain(game, &policy, tau0, eps, DEFAULT_STATE_CAP)?;
        let dense = chain.dense();
        let closed = classes_of_dense(&dense).recurrent_classes().count();
        let pi = limit_distribution(&dense, 0).map_err(|e| crate::PdlError::internal(e.to_string()))?;
        let inside: f64 = chain
            .states
            .iter()
            .zip(&pi)
            .filter(|(s, _)| prediction.contains_state(s))
            .map(|(_, p)| p)
            .sum();
        out.push(RitelMassCheck {
            epsilon: eps,
            period: chain.tau,
            states: chain.len(),
            closed_classes: closed,
            inside,
            outside: 1.0 - inside,
        });
    }
    Ok(out)
}
