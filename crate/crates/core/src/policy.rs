//! Action and update policies of ITEL, IODL and RITEL.

use std::fmt;

use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::eps_poly::EpsPoly;
use crate::error::{PdlError, Result};
use crate::game::Quantization;
use crate::numeric::{fmt_q, q_int, to_f64, Q};
use crate::params::PolicyParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Itel,
    Iodl,
    Ritel,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Itel => "itel",
            Algorithm::Iodl => "iodl",
            Algorithm::Ritel => "ritel",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = PdlError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "itel" => Ok(Algorithm::Itel),
            "iodl" => Ok(Algorithm::Iodl),
            "ritel" => Ok(Algorithm::Ritel),
            other => Err(PdlError::config("algorithm", format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mood {
    Content,
    Discontent,
    Hopeful,
    Watchful,
}

impl Mood {
    pub fn letter(self) -> char {
        match self {
            Mood::Content => 'C',
            Mood::Discontent => 'D',
            Mood::Hopeful => 'H',
            Mood::Watchful => 'W',
        }
    }
}

/// Benchmark utility (ITEL/IODL) or bin (RITEL).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Benchmark {
    None,
    Utility(Q),
    Bin(u32),
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Benchmark::None => f.write_str("-"),
            Benchmark::Utility(u) => f.write_str(&fmt_q(u)),
            Benchmark::Bin(b) => write!(f, "b{b}"),
        }
    }
}

/// What an agent sees after playing: a utility, or the bin of a period mean.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Observation {
    Utility(Q),
    Bin(u32),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AgentState {
    pub mood: Mood,
    pub action: usize,
    pub benchmark: Benchmark,
}

impl AgentState {
    /// Discontent agents carry no benchmark; the sentinel makes them equal.
    pub fn discontent() -> Self {
        AgentState {
            mood: Mood::Discontent,
            action: 0,
            benchmark: Benchmark::None,
        }
    }

    pub fn content(action: usize, benchmark: Benchmark) -> Self {
        AgentState {
            mood: Mood::Content,
            action,
            benchmark,
        }
    }

    pub fn with_mood(&self, mood: Mood) -> Self {
        AgentState { mood, ..self.clone() }
    }

    pub fn is_discontent(&self) -> bool {
        self.mood == Mood::Discontent
    }
}

impl fmt::Display for AgentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mood {
            Mood::Discontent => f.write_str("D"),
            m => write!(f, "{}:{}:{}", m.letter(), self.action, self.benchmark),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decision {
    Accept,
    Revert,
    Reject,
    AdoptMood(Mood),
}

/// A decision probability. Clipped forms keep the exact `min(ε^r, cap)`
/// for numeric use; their polynomial form is `cap` when `r = 0` and `ε^r`
/// otherwise, which agrees with the clip for ε small enough.
#[derive(Clone, Debug, PartialEq)]
pub enum Prob {
    Poly(EpsPoly),
    ClipAccept { exponent: Q, cap: Q },
    ClipReject { exponent: Q, cap: Q },
}

impl Prob {
    pub fn one() -> Self {
        Prob::Poly(EpsPoly::one())
    }

    pub fn to_poly(&self) -> EpsPoly {
        match self {
            Prob::Poly(p) => p.clone(),
            Prob::ClipAccept { exponent, cap } if exponent.is_zero() => EpsPoly::constant(*cap),
            Prob::ClipAccept { exponent, .. } => EpsPoly::eps_pow(*exponent),
            Prob::ClipReject { exponent, cap } if exponent.is_zero() => EpsPoly::constant(Q::one() - *cap),
            Prob::ClipReject { exponent, .. } => EpsPoly::one_minus_eps_pow(*exponent),
        }
    }

    pub fn eval(&self, eps: f64) -> f64 {
        match self {
            Prob::Poly(p) => p.eval(eps),
            Prob::ClipAccept { exponent, cap } => clipped(eps, exponent, cap),
            Prob::ClipReject { exponent, cap } => 1.0 - clipped(eps, exponent, cap),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Prob::Poly(p) if p.is_zero())
    }
}

fn clipped(eps: f64, exponent: &Q, cap: &Q) -> f64 {
    let r = to_f64(exponent);
    let raw = if r == 0.0 { 1.0 } else { eps.powf(r) };
    raw.min(to_f64(cap))
}

/// Position of an observation relative to a benchmark. Exact comparison for
/// ITEL/IODL; RITEL ignores offsets of one bin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shift {
    Up,
    Near,
    Down,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub algorithm: Algorithm,
    pub params: PolicyParams,
    pub quant: Option<Quantization>,
}

impl Policy {
    pub fn itel(params: PolicyParams) -> Self {
        Policy {
            algorithm: Algorithm::Itel,
            params,
            quant: None,
        }
    }

    pub fn iodl(params: PolicyParams) -> Self {
        Policy {
            algorithm: Algorithm::Iodl,
            params,
            quant: None,
        }
    }

    pub fn ritel(params: PolicyParams, quant: Quantization) -> Self {
        Policy {
            algorithm: Algorithm::Ritel,
            params,
            quant: Some(quant),
        }
    }

    pub fn new(algorithm: Algorithm, params: PolicyParams, quant: Option<Quantization>) -> Result<Self> {
        match (algorithm, quant) {
            (Algorithm::Ritel, None) => Err(PdlError::config("delta", "RITEL needs a bin width")),
            (Algorithm::Ritel, q) => Ok(Policy {
                algorithm,
                params,
                quant: q,
            }),
            (a, _) => Ok(Policy {
                algorithm: a,
                params,
                quant: None,
            }),
        }
    }

    fn quant(&self) -> Result<&Quantization> {
        self.quant
            .as_ref()
            .ok_or_else(|| PdlError::internal("bin arithmetic without a quantization"))
    }

    /// Utility value standing for a benchmark in `F` and `G`: the utility
    /// itself, or the lower edge of a bin.
    fn level(&self, b: &Benchmark) -> Result<Q> {
        match b {
            Benchmark::Utility(u) => Ok(*u),
            Benchmark::Bin(v) => Ok(self.quant()?.lower(*v)),
            Benchmark::None => Err(PdlError::internal("benchmark of a discontent agent")),
        }
    }

    fn observed_benchmark(&self, obs: &Observation) -> Result<Benchmark> {
        match (self.algorithm, obs) {
            (Algorithm::Ritel, Observation::Bin(v)) => {
                if *v > self.quant()?.top() {
                    return Err(PdlError::input(format!("bin {v} beyond the top bin")));
                }
                Ok(Benchmark::Bin(*v))
            }
            (Algorithm::Itel | Algorithm::Iodl, Observation::Utility(u)) => {
                if *u < Q::zero() || *u > Q::one() {
                    return Err(PdlError::input(format!("utility {} outside [0,1]", fmt_q(u))));
                }
                Ok(Benchmark::Utility(*u))
            }
            _ => Err(PdlError::input(format!("observation {obs:?} does not match {}", self.algorithm))),
        }
    }

    /// Whether the benchmark is the best possible utility (`1` or `{1}`).
    pub fn is_top(&self, b: &Benchmark) -> bool {
        match b {
            Benchmark::Utility(u) => u.is_one(),
            Benchmark::Bin(v) => self.quant.is_some_and(|q| *v >= q.top()),
            Benchmark::None => false,
        }
    }

    fn shift(&self, observed: &Benchmark, bench: &Benchmark) -> Result<Shift> {
        match (observed, bench) {
            (Benchmark::Utility(u), Benchmark::Utility(b)) => Ok(match u.cmp(b) {
                std::cmp::Ordering::Greater => Shift::Up,
                std::cmp::Ordering::Equal => Shift::Near,
                std::cmp::Ordering::Less => Shift::Down,
            }),
            (Benchmark::Bin(v), Benchmark::Bin(b)) => {
                let d = *v as i64 - *b as i64;
                Ok(if d >= 2 {
                    Shift::Up
                } else if d <= -2 {
                    Shift::Down
                } else {
                    Shift::Near
                })
            }
            _ => Err(PdlError::internal("benchmark kind mismatch")),
        }
    }

    fn check_mood(&self, state: &AgentState) -> Result<()> {
        if self.algorithm == Algorithm::Iodl && matches!(state.mood, Mood::Hopeful | Mood::Watchful) {
            return Err(PdlError::input("IODL has no hopeful or watchful mood"));
        }
        Ok(())
    }

    /// Action-choice probabilities as polynomials in ε.
    pub fn action_distribution(&self, state: &AgentState, actions: usize) -> Result<Vec<(usize, EpsPoly)>> {
        self.check_mood(state)?;
        if state.action >= actions {
            return Err(PdlError::input(format!("benchmark action {} out of range", state.action)));
        }
        Ok(match state.mood {
            Mood::Discontent => {
                let share = Q::new(1, actions as i128);
                (0..actions).map(|a| (a, EpsPoly::constant(share))).collect()
            }
            Mood::Content if actions > 1 && !self.is_top(&state.benchmark) => {
                let each = EpsPoly::monomial(Q::new(1, actions as i128 - 1), Q::one());
                (0..actions)
                    .map(|a| {
                        if a == state.action {
                            (a, EpsPoly::one_minus_eps_pow(Q::one()))
                        } else {
                            (a, each.clone())
                        }
                    })
                    .collect()
            }
            _ => vec![(state.action, EpsPoly::one())],
        })
    }

    /// Outcomes of the update policy with their probabilities.
    pub fn update_distribution(
        &self,
        state: &AgentState,
        played: usize,
        obs: &Observation,
    ) -> Result<Vec<(Decision, AgentState, Prob)>> {
        self.check_mood(state)?;
        let observed = self.observed_benchmark(obs)?;
        let accept_to = AgentState::content(played, observed.clone());
        let revert = AgentState::content(state.action, state.benchmark.clone());
        let certain = |d: Decision, s: AgentState| vec![(d, s, Prob::one())];

        let outcomes = match state.mood {
            Mood::Discontent => {
                let exponent = self.params.f(self.level(&observed)?);
                let cap = self.params.clip;
                vec![
                    (Decision::Accept, accept_to, Prob::ClipAccept { exponent, cap }),
                    (Decision::Reject, AgentState::discontent(), Prob::ClipReject { exponent, cap }),
                ]
            }
            Mood::Content if played != state.action => {
                match self.shift(&observed, &state.benchmark)? {
                    Shift::Up => {
                        let g = self.params.g(self.level(&state.benchmark)?, self.level(&observed)?);
                        vec![
                            (Decision::Accept, accept_to, Prob::Poly(EpsPoly::eps_pow(g))),
                            (Decision::Revert, revert, Prob::Poly(EpsPoly::one_minus_eps_pow(g))),
                        ]
                    }
                    _ => certain(Decision::Revert, revert),
                }
            }
            Mood::Content => match (self.algorithm, self.shift(&observed, &state.benchmark)?) {
                (Algorithm::Iodl, Shift::Up) => certain(Decision::Accept, accept_to),
                (Algorithm::Iodl, Shift::Down) => certain(Decision::Reject, AgentState::discontent()),
                (_, Shift::Near) => certain(Decision::Revert, revert),
                (_, Shift::Up) => certain(Decision::AdoptMood(Mood::Hopeful), state.with_mood(Mood::Hopeful)),
                (_, Shift::Down) => certain(Decision::AdoptMood(Mood::Watchful), state.with_mood(Mood::Watchful)),
            },
            Mood::Hopeful => match self.shift(&observed, &state.benchmark)? {
                Shift::Up => certain(Decision::Accept, AgentState::content(state.action, observed)),
                Shift::Near => certain(Decision::Revert, revert),
                Shift::Down => certain(Decision::AdoptMood(Mood::Watchful), state.with_mood(Mood::Watchful)),
            },
            Mood::Watchful => match self.shift(&observed, &state.benchmark)? {
                Shift::Up => certain(Decision::AdoptMood(Mood::Hopeful), state.with_mood(Mood::Hopeful)),
                Shift::Near => certain(Decision::Revert, revert),
                Shift::Down => certain(Decision::Reject, AgentState::discontent()),
            },
        };
        Ok(outcomes.into_iter().filter(|(_, _, p)| !p.is_zero()).collect())
    }

    /// Draws an action with ε evaluated numerically.
    pub fn sample_action<R: Rng + ?Sized>(&self, state: &AgentState, actions: usize, eps: f64, rng: &mut R) -> usize {
        match state.mood {
            Mood::Discontent => rng.random_range(0..actions),
            Mood::Content if actions > 1 && !self.is_top(&state.benchmark) => {
                if rng.random::<f64>() < eps {
                    let k = rng.random_range(0..actions - 1);
                    if k >= state.action {
                        k + 1
                    } else {
                        k
                    }
                } else {
                    state.action
                }
            }
            _ => state.action,
        }
    }

    /// Draws the next agent state with ε evaluated numerically.
    pub fn sample_update<R: Rng + ?Sized>(
        &self,
        state: &AgentState,
        played: usize,
        obs: &Observation,
        eps: f64,
        rng: &mut R,
    ) -> Result<AgentState> {
        let mut outcomes = self.update_distribution(state, played, obs)?;
        if outcomes.len() == 1 {
            return Ok(outcomes.pop().expect("one outcome").1);
        }
        let x: f64 = rng.random();
        let mut acc = 0.0;
        let last = outcomes.len() - 1;
        for (k, (_, next, p)) in outcomes.iter().enumerate() {
            acc += p.eval(eps);
            if x < acc || k == last {
                return Ok(next.clone());
            }
        }
        unreachable!("non-empty outcome list")
    }
}

/// Sum of a distribution's polynomials; exactly one for a valid policy.
pub fn total(probs: impl IntoIterator<Item = EpsPoly>) -> EpsPoly {
    probs.into_iter().sum()
}

/// `τ(ε) = ⌈τ0 ln(1/ε)⌉`, at least 1.
pub fn period_length(tau0: f64, eps: f64) -> usize {
    ((tau0 * (1.0 / eps).ln()).ceil() as usize).max(1)
}

/// `R0 = 2 τ0 δ²`.
pub fn noise_margin(tau0: Q, delta: Q) -> Q {
    q_int(2) * tau0 * delta * delta
}
