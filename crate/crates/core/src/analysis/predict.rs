//! Stochastically stable states of ITEL and IODL from game-level quantities,
//! cross-checked against potentials of the exact chain.

use std::collections::BTreeSet;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::chain::{GlobalState, PmpChain, DEFAULT_STATE_CAP};
use crate::error::{PdlError, Result};
use crate::game::{fmt_profile, GameSpec, Offset, Profile};
use crate::numeric::{fmt_q, q_string, Q};
use crate::params::PolicyParams;
use crate::policy::{AgentState, Algorithm, Benchmark, Policy};

use super::graph::{Potentials, ResistanceGraph};
use super::scc::recurrence_classes;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SssCase {
    /// Some profile gives every agent utility 1.
    Absorbing,
    /// Argmax of virtual welfare over equilibrium aligned states.
    Equilibria,
    /// Argmax of virtual welfare minus virtual stability.
    Tradeoff,
    /// Argmax of virtual welfare over all aligned states.
    Welfare,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlignedState {
    pub profile: Profile,
    #[serde(serialize_with = "ser_state")]
    pub state: GlobalState,
    #[serde(with = "q_string")]
    pub welfare: Q,
    #[serde(serialize_with = "ser_q")]
    pub virtual_welfare: Q,
    #[serde(serialize_with = "ser_opt")]
    pub virtual_stability: Option<Q>,
    pub equilibrium: bool,
    pub optimal: bool,
}

fn ser_state<S: serde::Serializer>(s: &GlobalState, ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_str(&s.to_string())
}

fn ser_q<S: serde::Serializer>(x: &Q, ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_str(&fmt_q(x))
}

fn ser_opt<S: serde::Serializer>(x: &Option<Q>, ser: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser.serialize_str(&fmt_q(v)),
        None => ser.serialize_none(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SssPrediction {
    pub algorithm: Algorithm,
    pub case: SssCase,
    #[serde(serialize_with = "ser_states")]
    pub states: Vec<GlobalState>,
    pub aligned: Vec<AlignedState>,
    pub warnings: Vec<String>,
}

fn ser_states<S: serde::Serializer>(v: &[GlobalState], ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.collect_seq(v.iter().map(|s| s.to_string()))
}

impl SssPrediction {
    pub fn profiles(&self) -> Vec<Profile> {
        self.states.iter().map(GlobalState::benchmark_profile).collect()
    }
}

/// The all-Content state committed to `profile` with exact benchmarks.
pub fn aligned_state(game: &GameSpec, profile: &[usize]) -> Result<GlobalState> {
    let k = game.profile_index(profile)?;
    (0..game.agent_count())
        .map(|i| Ok(AgentState::content(profile[i], Benchmark::Utility(game.deterministic_utility(i, k)?))))
        .collect::<Result<Vec<_>>>()
        .map(GlobalState)
}

/// Every aligned state with its virtual welfare and stability.
pub fn aligned_states(game: &GameSpec, params: &PolicyParams) -> Result<Vec<AlignedState>> {
    game.profiles()
        .map(|p| {
            Ok(AlignedState {
                state: aligned_state(game, &p)?,
                welfare: game.welfare(&p),
                virtual_welfare: game.virtual_welfare_profile(&p, &params.accept, Q::zero(), Offset::Plus),
                virtual_stability: game.virtual_stability_profile(&p, &params.explore, Q::zero(), Offset::Plus),
                equilibrium: game.is_rho_equilibrium(&p, Q::zero()),
                optimal: game.is_optimal_within(&p, Q::zero()),
                profile: p,
            })
        })
        .collect()
}

fn argmax<'a, I: Iterator<Item = &'a AlignedState>>(items: I, score: impl Fn(&AlignedState) -> Q) -> Vec<GlobalState> {
    let scored: Vec<(&AlignedState, Q)> = items.map(|a| (a, score(a))).collect();
    let Some(best) = scored.iter().map(|(_, s)| *s).max() else {
        return Vec::new();
    };
    let mut out: Vec<GlobalState> = scored.into_iter().filter(|(_, s)| *s == best).map(|(a, _)| a.state.clone()).collect();
    out.sort();
    out
}

fn assumption(strict: bool, warnings: &mut Vec<String>, message: String) -> Result<()> {
    if strict {
        Err(PdlError::Assumption(message))
    } else {
        warnings.push(message);
        Ok(())
    }
}

fn common_checks(game: &GameSpec, params: &PolicyParams, strict: bool) -> Result<Vec<String>> {
    if !game.is_deterministic() {
        return Err(PdlError::input("ITEL and IODL predictions need deterministic utilities"));
    }
    let mut warnings = Vec::new();
    if let Err(v) = params.validate(game.agent_count(), &game.all_means()) {
        assumption(strict, &mut warnings, format!("{}: {}", v.key, v.message))?;
    }
    if let Err(w) = game.check_interdependence() {
        assumption(
            strict,
            &mut warnings,
            format!("game is not interdependent: subset {:?} at {} moves no outsider", w.subset, fmt_profile(&w.profile)),
        )?;
    }
    Ok(warnings)
}

fn absorbing(aligned: &[AlignedState]) -> Vec<GlobalState> {
    let mut v: Vec<GlobalState> = aligned.iter().filter(|a| a.optimal).map(|a| a.state.clone()).collect();
    v.sort();
    v
}

pub fn predict_sss_itel(game: &GameSpec, params: &PolicyParams, strict: bool) -> Result<SssPrediction> {
    let warnings = common_checks(game, params, strict)?;
    let aligned = aligned_states(game, params)?;
    let optimal = absorbing(&aligned);
    let (case, states) = if !optimal.is_empty() {
        (SssCase::Absorbing, optimal)
    } else if aligned.iter().any(|a| a.equilibrium) {
        (SssCase::Equilibria, argmax(aligned.iter().filter(|a| a.equilibrium), |a| a.virtual_welfare))
    } else {
        let score = |a: &AlignedState| a.virtual_welfare - a.virtual_stability.expect("defined off equilibria");
        (SssCase::Tradeoff, argmax(aligned.iter(), score))
    };
    Ok(SssPrediction {
        algorithm: Algorithm::Itel,
        case,
        states,
        aligned,
        warnings,
    })
}

pub fn predict_sss_iodl(game: &GameSpec, params: &PolicyParams, strict: bool) -> Result<SssPrediction> {
    let warnings = common_checks(game, params, strict)?;
    let n = Q::from_integer(game.agent_count() as i128);
    for u in game.all_means() {
        let f = params.f(u);
        if f * n >= Q::one() {
            return Err(PdlError::Assumption(format!(
                "IODL needs F < 1/n on achievable utilities; F({}) = {}",
                fmt_q(&u),
                fmt_q(&f)
            )));
        }
    }
    let aligned = aligned_states(game, params)?;
    let optimal = absorbing(&aligned);
    let (case, states) = if !optimal.is_empty() {
        (SssCase::Absorbing, optimal)
    } else {
        (SssCase::Welfare, argmax(aligned.iter(), |a| a.virtual_welfare))
    };
    Ok(SssPrediction {
        algorithm: Algorithm::Iodl,
        case,
        states,
        aligned,
        warnings,
    })
}

/// Independent answer from the chain: closed classes of `P^ε` when there is
/// more than one, else the potential minimizers.
pub fn potential_states(chain: &PmpChain, graph: &ResistanceGraph, potentials: &Potentials) -> Vec<GlobalState> {
    let successors: Vec<Vec<usize>> = chain.rows.iter().map(|r| r.iter().map(|e| e.0).collect()).collect();
    let perturbed = recurrence_classes(&successors);
    let closed: Vec<usize> = perturbed.recurrent_classes().collect();
    let idx: BTreeSet<usize> = if closed.len() > 1 {
        closed.iter().flat_map(|c| perturbed.members[*c].iter().copied()).collect()
    } else {
        potentials
            .minimizers
            .iter()
            .flat_map(|n| graph.nodes[*n].members.iter().copied())
            .collect()
    };
    let mut out: Vec<GlobalState> = idx.into_iter().map(|i| chain.states[i].clone()).collect();
    out.sort();
    out
}

/// Formula prediction, exact chain and the arborescence answer together.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub prediction: SssPrediction,
    pub chain: PmpChain,
    pub graph: ResistanceGraph,
    pub potentials: Potentials,
    pub potential_states: Vec<GlobalState>,
}

impl Analysis {
    pub fn agree(&self) -> bool {
        self.prediction.states == self.potential_states
    }

    /// Indices of the predicted states in the chain.
    pub fn predicted_indices(&self) -> Vec<usize> {
        self.prediction.states.iter().filter_map(|s| self.chain.index_of(s)).collect()
    }
}

pub fn analyze(game: &GameSpec, algorithm: Algorithm, params: &PolicyParams, strict: bool, cap: Option<usize>) -> Result<Analysis> {
    let prediction = match algorithm {
        Algorithm::Itel => predict_sss_itel(game, params, strict)?,
        Algorithm::Iodl => predict_sss_iodl(game, params, strict)?,
        Algorithm::Ritel => return Err(PdlError::input("use the RITEL classification for RITEL")),
    };
    let policy = Policy::new(algorithm, params.clone(), None)?;
    let chain = PmpChain::build(game, &policy, cap.unwrap_or(DEFAULT_STATE_CAP))?;
    let graph = ResistanceGraph::from_chain(&chain);
    let potentials = graph.potentials();
    let potential_states = potential_states(&chain, &graph, &potentials);
    let analysis = Analysis {
        prediction,
        chain,
        graph,
        potentials,
        potential_states,
    };
    if strict && !analysis.agree() {
        return Err(PdlError::internal(format!(
            "formula states [{}] differ from potential minimizers [{}]",
            fmt_states(&analysis.prediction.states),
            fmt_states(&analysis.potential_states)
        )));
    }
    Ok(analysis)
}

pub fn fmt_states(states: &[GlobalState]) -> String {
    states.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("; ")
}
