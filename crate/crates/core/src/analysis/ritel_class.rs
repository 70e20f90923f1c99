//! Classification of all-Content RITEL states and the superset predictions
//! at state and action-profile level.

use std::collections::BTreeSet;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::chain::GlobalState;
use crate::error::{PdlError, Result};
use crate::game::{fmt_profile, GameSpec, Offset, Profile, Quantization};
use crate::large_dev::{bin_resistance, Distribution};
use crate::numeric::{fmt_q, q_from_f64, q_int, Q};
use crate::params::PolicyParams;
use crate::policy::{noise_margin, AgentState, Benchmark};

#[derive(Clone, Debug, Serialize)]
pub struct RitelStateInfo {
    pub profile: Profile,
    pub bins: Vec<u32>,
    #[serde(serialize_with = "ser_state")]
    pub state: GlobalState,
    pub strongly_aligned: bool,
    pub weakly_aligned: bool,
    pub equilibrium: bool,
    pub delta_equilibrium: bool,
    pub optimal: bool,
    pub absorbing_optimal: bool,
    #[serde(serialize_with = "ser_q")]
    pub virtual_welfare: Q,
    #[serde(serialize_with = "ser_opt_q")]
    pub stability_plus: Option<Q>,
    #[serde(serialize_with = "ser_opt_q")]
    pub stability_minus: Option<Q>,
    #[serde(serialize_with = "ser_resistance")]
    pub noise_resistance: f64,
}

fn ser_state<S: serde::Serializer>(s: &GlobalState, ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_str(&s.to_string())
}

fn ser_q<S: serde::Serializer>(x: &Q, ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_str(&fmt_q(x))
}

fn ser_opt_q<S: serde::Serializer>(x: &Option<Q>, ser: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser.serialize_str(&fmt_q(v)),
        None => ser.serialize_none(),
    }
}

fn ser_resistance<S: serde::Serializer>(x: &f64, ser: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() {
        ser.serialize_str("inf")
    } else {
        ser.serialize_f64(*x)
    }
}

/// Every weakly aligned state of a game.
#[derive(Clone, Debug, Serialize)]
pub struct RitelClassification {
    #[serde(serialize_with = "ser_q")]
    pub delta: Q,
    pub tau0: f64,
    pub states: Vec<RitelStateInfo>,
}

impl RitelClassification {
    pub fn find(&self, state: &GlobalState) -> Option<&RitelStateInfo> {
        self.states.iter().find(|s| &s.state == state)
    }

    fn subset(&self, pick: impl Fn(&RitelStateInfo) -> bool) -> BTreeSet<GlobalState> {
        self.states.iter().filter(|s| pick(s)).map(|s| s.state.clone()).collect()
    }

    pub fn strongly_aligned(&self) -> BTreeSet<GlobalState> {
        self.subset(|s| s.strongly_aligned)
    }

    pub fn weakly_aligned(&self) -> BTreeSet<GlobalState> {
        self.subset(|s| s.weakly_aligned)
    }

    pub fn equilibria(&self) -> BTreeSet<GlobalState> {
        self.subset(|s| s.equilibrium)
    }

    pub fn delta_equilibria(&self) -> BTreeSet<GlobalState> {
        self.subset(|s| s.delta_equilibrium)
    }

    pub fn optimal(&self) -> BTreeSet<GlobalState> {
        self.subset(|s| s.optimal)
    }

    pub fn absorbing_optimal(&self) -> BTreeSet<GlobalState> {
        self.subset(|s| s.absorbing_optimal)
    }
}

/// Content state committed to `profile` with benchmark `bins`.
pub fn bin_state(profile: &[usize], bins: &[u32]) -> GlobalState {
    GlobalState(
        profile
            .iter()
            .zip(bins)
            .map(|(a, b)| AgentState::content(*a, Benchmark::Bin(*b)))
            .collect(),
    )
}

fn is_weak(quant: &Quantization, mean: Q, degenerate: bool, bench: u32) -> Result<bool> {
    let nu = quant.bin_of(mean)?;
    if nu.abs_diff(bench) > 1 {
        return Ok(false);
    }
    Ok(degenerate || bench == 0 || mean != quant.lower(bench - 1))
}

pub fn classify_ritel_states(game: &GameSpec, quant: &Quantization, tau0: f64, params: &PolicyParams) -> Result<RitelClassification> {
    let n = game.agent_count();
    let top = quant.top();
    let lower = |b: u32| quant.lower(b.min(top));
    let mut states = Vec::new();
    for profile in game.profiles() {
        let k = game.profile_index(&profile)?;
        let means: Vec<Q> = (0..n).map(|i| game.mean_utility(i, &profile)).collect::<Result<_>>()?;
        let nu: Vec<u32> = means.iter().map(|m| quant.bin_of(*m)).collect::<Result<_>>()?;
        let choices: Vec<Vec<u32>> = (0..n)
            .map(|i| {
                let lo = nu[i].saturating_sub(1);
                let hi = (nu[i] + 1).min(top);
                (lo..=hi)
                    .filter(|b| is_weak(quant, means[i], game.utility_at(i, k).is_degenerate(), *b).unwrap_or(false))
                    .collect()
            })
            .collect();
        // deviation bins N_i(a_i, a_-i), per agent
        let deviations: Vec<Vec<u32>> = (0..n)
            .map(|i| {
                (0..game.action_counts()[i])
                    .filter(|a| *a != profile[i])
                    .map(|a| quant.bin_of(game.mean_utility(i, &game.deviate(&profile, i, a))?))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let dists: Vec<Distribution> = (0..n).map(|i| Distribution::from_model(game.utility_at(i, k))).collect();
        let mut combos: Vec<Vec<u32>> = vec![Vec::new()];
        for c in &choices {
            combos = combos
                .into_iter()
                .flat_map(|v| {
                    c.iter().map(move |b| {
                        let mut w = v.clone();
                        w.push(*b);
                        w
                    })
                })
                .collect();
        }
        for bins in combos {
            let strongly_aligned = bins == nu;
            let eq_with = |slack: u32| (0..n).all(|i| deviations[i].iter().all(|d| *d <= bins[i] + slack));
            let equilibrium = strongly_aligned && eq_with(0);
            let delta_equilibrium = eq_with(1);
            let optimal = bins.iter().all(|b| *b == top);
            let virtual_welfare = Q::one() - (0..n).map(|i| params.f(lower(bins[i]))).sum::<Q>();
            let min_g = |gap: u32, shift: u32| {
                (0..n)
                    .flat_map(|i| deviations[i].iter().map(move |d| (i, *d)))
                    .filter(|(i, d)| *d >= bins[*i] + gap)
                    .map(|(i, d)| params.g(lower(bins[i]), lower(d + shift)))
                    .min()
            };
            let stability_plus = if equilibrium { None } else { min_g(1, 1).map(|g| Q::one() - g) };
            let stability_minus = if delta_equilibrium { None } else { min_g(2, 0).map(|g| Q::one() - g) };
            let mut noise_resistance = f64::INFINITY;
            for i in 0..n {
                for v in (0..=top).filter(|v| v.abs_diff(bins[i]) > 1) {
                    noise_resistance = noise_resistance.min(bin_resistance(&dists[i], v, quant, tau0)?);
                }
            }
            states.push(RitelStateInfo {
                state: bin_state(&profile, &bins),
                profile: profile.clone(),
                bins,
                strongly_aligned,
                weakly_aligned: true,
                equilibrium,
                delta_equilibrium,
                optimal,
                absorbing_optimal: optimal && noise_resistance.is_infinite(),
                virtual_welfare,
                stability_plus,
                stability_minus,
                noise_resistance,
            });
        }
    }
    states.sort_by(|a, b| a.state.cmp(&b.state));
    Ok(RitelClassification {
        delta: quant.delta(),
        tau0,
        states,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RitelCase {
    Absorbing,
    Equilibria,
    NoEquilibria,
}

/// Action-profile level superset.
#[derive(Clone, Debug, Serialize)]
pub struct ProfileSuperset {
    pub case: RitelCase,
    /// Profiles defining the threshold.
    pub anchors: Vec<Profile>,
    #[serde(serialize_with = "ser_q")]
    pub threshold: Q,
    pub profiles: Vec<Profile>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RitelPrediction {
    pub classification: RitelClassification,
    pub case: RitelCase,
    #[serde(serialize_with = "ser_states")]
    pub superset: Vec<GlobalState>,
    pub profile_level: ProfileSuperset,
    pub warnings: Vec<String>,
}

fn ser_states<S: serde::Serializer>(v: &[GlobalState], ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.collect_seq(v.iter().map(|s| s.to_string()))
}

impl RitelPrediction {
    pub fn contains_state(&self, s: &GlobalState) -> bool {
        self.superset.binary_search(s).is_ok()
    }

    pub fn contains_profile(&self, p: &[usize]) -> bool {
        self.profile_level.profiles.iter().any(|x| x == p)
    }
}

fn state_superset(c: &RitelClassification) -> (RitelCase, Vec<GlobalState>) {
    let absorbing = c.absorbing_optimal();
    if !absorbing.is_empty() {
        return (RitelCase::Absorbing, absorbing.into_iter().collect());
    }
    let eq: Vec<&RitelStateInfo> = c.states.iter().filter(|s| s.equilibrium).collect();
    let set: BTreeSet<GlobalState> = if let Some(best) = eq.iter().map(|s| s.virtual_welfare).max() {
        c.states
            .iter()
            .filter(|s| s.optimal || (s.delta_equilibrium && s.virtual_welfare >= best))
            .map(|s| s.state.clone())
            .collect()
    } else {
        let best = c
            .states
            .iter()
            .filter(|s| s.strongly_aligned)
            .filter_map(|s| s.stability_plus.map(|t| s.virtual_welfare - t))
            .max();
        c.states
            .iter()
            .filter(|s| {
                s.delta_equilibrium
                    || match (best, s.stability_minus) {
                        (Some(b), Some(t)) => s.virtual_welfare - t >= b,
                        (None, _) => true,
                        _ => false,
                    }
            })
            .map(|s| s.state.clone())
            .collect()
    };
    let case = if eq.is_empty() { RitelCase::NoEquilibria } else { RitelCase::Equilibria };
    (case, set.into_iter().collect())
}

/// `1 − min G(μ − δ, M' + δ)` over improving deviations, without the
/// δ-equilibrium guard.
fn stability_plus_unguarded(game: &GameSpec, p: &[usize], params: &PolicyParams, delta: Q) -> Option<Q> {
    game.deviations(p)
        .filter_map(|(i, _, alt)| {
            let mu = game.mean_utility(i, p).ok()?;
            let m = game.mean_utility(i, &alt).ok()?;
            (m > mu).then(|| params.g(mu - delta, m + delta))
        })
        .min()
        .map(|g| Q::one() - g)
}

fn profile_superset(game: &GameSpec, params: &PolicyParams, delta: Q) -> ProfileSuperset {
    let zero = Q::zero();
    let three = delta * q_int(3);
    let tw = |p: &Profile, shift: Q, sign: Offset| game.virtual_welfare_profile(p, &params.accept, shift, sign);
    let profiles: Vec<Profile> = game.profiles().collect();
    let equilibria: Vec<&Profile> = profiles.iter().filter(|p| game.is_rho_equilibrium(p, zero)).collect();
    if !equilibria.is_empty() {
        let best = equilibria.iter().map(|p| tw(p, zero, Offset::Plus)).max().unwrap();
        let anchors: Vec<Profile> = equilibria.iter().filter(|p| tw(p, zero, Offset::Plus) == best).map(|p| (*p).clone()).collect();
        let threshold = anchors.iter().map(|p| tw(p, delta, Offset::Minus)).min().unwrap();
        let chosen = profiles
            .iter()
            .filter(|p| game.is_optimal_within(p, delta) || (game.is_rho_equilibrium(p, three) && tw(p, delta, Offset::Plus) >= threshold))
            .cloned()
            .collect();
        return ProfileSuperset {
            case: RitelCase::Equilibria,
            anchors,
            threshold,
            profiles: chosen,
        };
    }
    let score = |p: &Profile| {
        tw(p, zero, Offset::Plus) - game.virtual_stability_profile(p, &params.explore, zero, Offset::Plus).expect("no equilibria")
    };
    let best = profiles.iter().map(score).max().unwrap();
    let anchors: Vec<Profile> = profiles.iter().filter(|p| score(p) == best).cloned().collect();
    let threshold = anchors
        .iter()
        .map(|p| tw(p, delta, Offset::Minus) - stability_plus_unguarded(game, p, params, delta).expect("improving deviation exists"))
        .min()
        .unwrap();
    let chosen = profiles
        .iter()
        .filter(|p| {
            game.is_rho_equilibrium(p, three)
                || game
                    .virtual_stability_profile(p, &params.explore, delta, Offset::Minus)
                    .is_some_and(|s| tw(p, delta, Offset::Plus) - s >= threshold)
        })
        .cloned()
        .collect();
    ProfileSuperset {
        case: RitelCase::NoEquilibria,
        anchors,
        threshold,
        profiles: chosen,
    }
}

pub fn predict_sss_ritel(game: &GameSpec, quant: &Quantization, tau0: f64, params: &PolicyParams, strict: bool) -> Result<RitelPrediction> {
    let mut warnings = Vec::new();
    let mut check = |ok: bool, message: String| -> Result<()> {
        if ok {
            Ok(())
        } else if strict {
            Err(PdlError::Assumption(message))
        } else {
            warnings.push(message);
            Ok(())
        }
    };
    if let Err(w) = game.check_3delta_interdependence(quant.delta()) {
        check(
            false,
            format!("game is not 3δ-interdependent: subset {:?} at {}", w.subset, fmt_profile(&w.profile)),
        )?;
    }
    if let Err(v) = params.validate(game.agent_count(), &game.all_means()) {
        check(false, format!("{}: {}", v.key, v.message))?;
    }
    let tau0_q = q_from_f64(tau0).ok_or_else(|| PdlError::config("tau0", "must be finite"))?;
    let margin = noise_margin(tau0_q, quant.delta());
    check(
        margin >= Q::one(),
        format!("noise margin 2·τ0·δ² = {} is below 1", fmt_q(&margin)),
    )?;
    let classification = classify_ritel_states(game, quant, tau0, params)?;
    let (case, superset) = state_superset(&classification);
    let mut profile_level = profile_superset(game, params, quant.delta());
    if case == RitelCase::Absorbing {
        profile_level.case = RitelCase::Absorbing;
    }
    Ok(RitelPrediction {
        classification,
        case,
        superset,
        profile_level,
        warnings,
    })
}
