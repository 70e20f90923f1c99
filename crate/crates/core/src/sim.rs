//! Monte Carlo runs of the learning dynamics: fixed ε, RITEL periods, and
//! cooling schedules.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chain::tails::sample_period_bin;
use crate::chain::GlobalState;
use crate::error::{PdlError, Result};
use crate::game::GameSpec;
use crate::numeric::{to_f64, Q};
use crate::policy::{period_length, Algorithm, Benchmark, Mood, Observation, Policy};

pub const DEFAULT_BURN_IN: f64 = 0.1;

/// Worker pool honoring `PDL_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("PDL_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| PdlError::config("PDL_THREADS", format!("`{v}` is not a thread count")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| PdlError::internal(e.to_string()))
}

/// RNG of one replicate: the seed picks the generator, the replicate index
/// its stream.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub epsilon: f64,
    /// Steps (ITEL/IODL) or periods (RITEL).
    pub steps: u64,
    pub seed: u64,
    #[serde(default)]
    pub tau0: Option<f64>,
    /// Fraction of the run discarded for the second occupancy table.
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    /// Record every k-th state.
    #[serde(default)]
    pub trace_every: Option<u64>,
    /// Turn assumption warnings into errors.
    #[serde(default)]
    pub strict: bool,
}

fn default_burn_in() -> f64 {
    DEFAULT_BURN_IN
}

impl SimParams {
    pub fn new(epsilon: f64, steps: u64, seed: u64) -> Self {
        SimParams {
            epsilon,
            steps,
            seed,
            tau0: None,
            burn_in: DEFAULT_BURN_IN,
            trace_every: None,
            strict: false,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(PdlError::config("epsilon", "must lie in (0,1)"));
        }
        if self.steps == 0 {
            return Err(PdlError::config("steps", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(PdlError::config("burn_in", "must lie in [0,1)"));
        }
        Ok(())
    }
}

/// One running trajectory.
pub struct Simulator<'a> {
    game: &'a GameSpec,
    policy: &'a Policy,
    supports: Vec<Vec<Vec<(Q, Q)>>>,
    tau: Option<usize>,
    pub epsilon: f64,
    state: GlobalState,
    rng: ChaCha8Rng,
}

impl<'a> Simulator<'a> {
    pub fn new(game: &'a GameSpec, policy: &'a Policy, epsilon: f64, tau0: Option<f64>, start: GlobalState, rng: ChaCha8Rng) -> Result<Self> {
        if start.0.len() != game.agent_count() {
            return Err(PdlError::input("initial state has the wrong number of agents"));
        }
        let tau = match policy.algorithm {
            Algorithm::Ritel => {
                let tau0 = tau0.ok_or_else(|| PdlError::config("tau0", "RITEL needs a period constant"))?;
                if tau0 <= 0.0 {
                    return Err(PdlError::config("tau0", "must be positive"));
                }
                Some(period_length(tau0, epsilon))
            }
            _ => {
                if !game.is_deterministic() {
                    return Err(PdlError::input("ITEL and IODL need deterministic utilities"));
                }
                None
            }
        };
        let supports = (0..game.agent_count())
            .map(|i| (0..game.profile_count()).map(|k| game.utility_at(i, k).support()).collect())
            .collect();
        Ok(Simulator {
            game,
            policy,
            supports,
            tau,
            epsilon,
            state: start,
            rng,
        })
    }

    pub fn state(&self) -> &GlobalState {
        &self.state
    }

    pub fn period(&self) -> Option<usize> {
        self.tau
    }

    /// One step, or one period under RITEL.
    pub fn step(&mut self) -> Result<&GlobalState> {
        let counts = self.game.action_counts();
        let profile: Vec<usize> = self
            .state
            .0
            .iter()
            .zip(counts)
            .map(|(s, &c)| self.policy.sample_action(s, c, self.epsilon, &mut self.rng))
            .collect();
        let k = self.game.profile_index(&profile)?;
        let mut next = Vec::with_capacity(profile.len());
        for (i, agent) in self.state.0.iter().enumerate() {
            let obs = match self.tau {
                Some(tau) => {
                    let quant = self.policy.quant.as_ref().expect("RITEL policy has bins");
                    Observation::Bin(sample_period_bin(&self.supports[i][k], tau, quant, &mut self.rng))
                }
                None => Observation::Utility(self.supports[i][k][0].0),
            };
            next.push(self.policy.sample_update(agent, profile[i], &obs, self.epsilon, &mut self.rng)?);
        }
        self.state = GlobalState(next);
        Ok(&self.state)
    }

    /// Whether the current state can never change.
    pub fn is_absorbed(&self) -> bool {
        is_absorbing(self.game, self.policy, &self.state)
    }
}

/// All agents Content at the top benchmark and certain to keep observing it.
pub fn is_absorbing(game: &GameSpec, policy: &Policy, state: &GlobalState) -> bool {
    if !state.0.iter().all(|a| a.mood == Mood::Content && policy.is_top(&a.benchmark)) {
        return false;
    }
    let Ok(k) = game.profile_index(&state.benchmark_profile()) else {
        return false;
    };
    state.0.iter().enumerate().all(|(i, a)| {
        let support = game.utility_at(i, k).support();
        match (&a.benchmark, &policy.quant) {
            (Benchmark::Bin(_), Some(quant)) => {
                let floor = quant.lower(quant.top().saturating_sub(1));
                support.iter().all(|(v, _)| *v >= floor)
            }
            _ => support.iter().all(|(v, _)| *v == Q::from_integer(1)),
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Absorption {
    pub step: u64,
    pub state: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub replicate: u64,
    pub params: SimParams,
    pub period: Option<usize>,
    /// Visits per state over all steps.
    pub counts: BTreeMap<GlobalState, u64>,
    /// Visits after the burn-in prefix.
    pub counts_after_burn_in: BTreeMap<GlobalState, u64>,
    pub absorption: Option<Absorption>,
    pub trace: Vec<(u64, GlobalState)>,
    pub final_state: GlobalState,
    pub warnings: Vec<String>,
}

fn fractions(counts: &BTreeMap<GlobalState, u64>) -> BTreeMap<GlobalState, f64> {
    let total: u64 = counts.values().sum();
    counts.iter().map(|(s, c)| (s.clone(), *c as f64 / total as f64)).collect()
}

impl RunReport {
    pub fn occupancy(&self) -> BTreeMap<GlobalState, f64> {
        fractions(&self.counts)
    }

    pub fn occupancy_after_burn_in(&self) -> BTreeMap<GlobalState, f64> {
        fractions(&self.counts_after_burn_in)
    }

    /// Share of post-burn-in time spent in states satisfying `pred`.
    pub fn fraction_where(&self, pred: impl Fn(&GlobalState) -> bool) -> f64 {
        let total: u64 = self.counts_after_burn_in.values().sum();
        let hit: u64 = self.counts_after_burn_in.iter().filter(|(s, _)| pred(s)).map(|(_, c)| c).sum();
        hit as f64 / total as f64
    }

    pub fn to_json(&self) -> Value {
        let table = |m: BTreeMap<GlobalState, f64>| -> Value {
            m.into_iter().map(|(s, f)| (s.to_string(), json!(f))).collect::<serde_json::Map<_, _>>().into()
        };
        json!({
            "algorithm": self.algorithm,
            "seed": self.seed,
            "replicate": self.replicate,
            "params": self.params,
            "period": self.period,
            "occupancy": table(self.occupancy()),
            "occupancy_after_burn_in": table(self.occupancy_after_burn_in()),
            "absorption": self.absorption,
            "trace": self.trace.iter().map(|(k, s)| json!([k, s.to_string()])).collect::<Vec<_>>(),
            "final_state": self.final_state.to_string(),
            "warnings": self.warnings,
        })
    }
}

/// Run-length accumulator; avoids hashing the state every step.
struct Tally {
    counts: HashMap<GlobalState, u64>,
    current: GlobalState,
    run: u64,
}

impl Tally {
    fn new(start: &GlobalState) -> Self {
        Tally {
            counts: HashMap::new(),
            current: start.clone(),
            run: 0,
        }
    }

    fn visit(&mut self, s: &GlobalState, times: u64) {
        if *s != self.current {
            self.flush();
            self.current = s.clone();
        }
        self.run += times;
    }

    fn flush(&mut self) {
        if self.run > 0 {
            *self.counts.entry(self.current.clone()).or_insert(0) += self.run;
            self.run = 0;
        }
    }

    fn finish(mut self) -> BTreeMap<GlobalState, u64> {
        self.flush();
        self.counts.into_iter().collect()
    }
}

/// One replicate at fixed ε.
pub fn run_once(game: &GameSpec, policy: &Policy, params: &SimParams, start: Option<&GlobalState>, replicate: u64) -> Result<RunReport> {
    params.check()?;
    let start = start.cloned().unwrap_or_else(|| GlobalState::all_discontent(game.agent_count()));
    let mut sim = Simulator::new(game, policy, params.epsilon, params.tau0, start.clone(), replicate_rng(params.seed, replicate))?;
    let burn = (params.steps as f64 * params.burn_in).floor() as u64;
    let mut all = Tally::new(&start);
    let mut kept = Tally::new(&start);
    let mut trace = Vec::new();
    let mut absorption = None;
    let mut step = 0u64;
    while step < params.steps {
        let s = sim.step()?.clone();
        step += 1;
        if let Some(every) = params.trace_every {
            if every > 0 && step % every == 0 {
                trace.push((step, s.clone()));
            }
        }
        if sim.is_absorbed() {
            let remaining = params.steps - step + 1;
            all.visit(&s, remaining);
            let kept_from = step.max(burn + 1);
            kept.visit(&s, params.steps + 1 - kept_from);
            absorption = Some(Absorption {
                step,
                state: s.to_string(),
            });
            break;
        }
        all.visit(&s, 1);
        if step > burn {
            kept.visit(&s, 1);
        }
    }
    Ok(RunReport {
        algorithm: policy.algorithm,
        seed: params.seed,
        replicate,
        params: params.clone(),
        period: sim.period(),
        counts: all.finish(),
        counts_after_burn_in: kept.finish(),
        absorption,
        trace,
        final_state: sim.state().clone(),
        warnings: Vec::new(),
    })
}

fn expect(policy: &Policy, algorithm: Algorithm) -> Result<()> {
    if policy.algorithm == algorithm {
        Ok(())
    } else {
        Err(PdlError::input(format!("policy is {} but {algorithm} was requested", policy.algorithm)))
    }
}

pub fn run_itel(game: &GameSpec, policy: &Policy, params: &SimParams) -> Result<RunReport> {
    expect(policy, Algorithm::Itel)?;
    run_once(game, policy, params, None, 0)
}

pub fn run_iodl(game: &GameSpec, policy: &Policy, params: &SimParams) -> Result<RunReport> {
    expect(policy, Algorithm::Iodl)?;
    run_once(game, policy, params, None, 0)
}

pub fn run_ritel(game: &GameSpec, policy: &Policy, params: &SimParams) -> Result<RunReport> {
    expect(policy, Algorithm::Ritel)?;
    let warnings = ritel_warnings(policy, params)?;
    let mut report = run_once(game, policy, params, None, 0)?;
    report.warnings = warnings;
    Ok(report)
}

/// Noise-margin check `2·τ0·δ² ≥ 1`; an error in strict mode.
pub fn ritel_warnings(policy: &Policy, params: &SimParams) -> Result<Vec<String>> {
    let (Some(quant), Some(tau0)) = (&policy.quant, params.tau0) else {
        return Ok(Vec::new());
    };
    let margin = 2.0 * tau0 * to_f64(&quant.delta()).powi(2);
    if margin >= 1.0 - 1e-12 {
        return Ok(Vec::new());
    }
    let msg = format!("noise margin 2*tau0*delta^2 = {margin} is below 1");
    if params.strict {
        Err(PdlError::Assumption(msg))
    } else {
        Ok(vec![msg])
    }
}

/// Independent replicates on the worker pool, in replicate order.
pub fn run_replicates(game: &GameSpec, policy: &Policy, params: &SimParams, start: Option<&GlobalState>, replicates: u64) -> Result<Vec<RunReport>> {
    let pool = thread_pool()?;
    pool.install(|| {
        (0..replicates)
            .into_par_iter()
            .map(|r| run_once(game, policy, params, start, r))
            .collect()
    })
}

/// Mean of per-replicate occupancies.
pub fn merge_occupancy(reports: &[RunReport], after_burn_in: bool) -> BTreeMap<GlobalState, f64> {
    let mut out: BTreeMap<GlobalState, f64> = BTreeMap::new();
    for r in reports {
        let occ = if after_burn_in { r.occupancy_after_burn_in() } else { r.occupancy() };
        for (s, f) in occ {
            *out.entry(s).or_insert(0.0) += f / reports.len() as f64;
        }
    }
    out
}

/// Non-increasing perturbation schedule `ε_k`, `k = 0, 1, ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    Constant { epsilon: f64 },
    /// `(k + k0)^(-1/Γ)`.
    Polynomial { k0: f64, gamma: f64 },
    /// `ε0 · rate^k`.
    Exponential { epsilon0: f64, rate: f64 },
    /// Explicit values; the last one repeats.
    Table { values: Vec<f64> },
}

impl Schedule {
    pub fn at(&self, k: u64) -> f64 {
        match self {
            Schedule::Constant { epsilon } => *epsilon,
            Schedule::Polynomial { k0, gamma } => (k as f64 + k0).powf(-1.0 / gamma),
            Schedule::Exponential { epsilon0, rate } => (epsilon0 * rate.powf(k as f64)).max(f64::MIN_POSITIVE),
            Schedule::Table { values } => values[(k as usize).min(values.len() - 1)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PdlError::config("schedule", m.to_string()));
        match self {
            Schedule::Constant { epsilon } if !(*epsilon > 0.0 && *epsilon < 1.0) => bad("epsilon must lie in (0,1)"),
            Schedule::Polynomial { k0, gamma } if !(*k0 >= 1.0 && *gamma > 0.0) => bad("needs k0 >= 1 and gamma > 0"),
            Schedule::Exponential { epsilon0, rate } if !(*epsilon0 > 0.0 && *epsilon0 < 1.0 && *rate > 0.0 && *rate <= 1.0) => {
                bad("needs epsilon0 in (0,1) and rate in (0,1]")
            }
            Schedule::Table { values } if values.is_empty() => bad("table is empty"),
            Schedule::Table { values } => {
                if values.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
                    return bad("values must lie in (0,1]");
                }
                if values.windows(2).any(|w| w[1] > w[0]) {
                    return bad("schedule must be non-increasing");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Share of replicates inside the target set at one checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Checkpoint {
    pub step: u64,
    pub epsilon: f64,
    pub inside: u64,
    pub replicates: u64,
    pub fraction: f64,
    pub interval: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CooledReport {
    pub algorithm: Algorithm,
    pub schedule: Schedule,
    pub seed: u64,
    pub horizon: u64,
    pub checkpoints: Vec<Checkpoint>,
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Logarithmically spaced checkpoints `10, 100, ...` up to `horizon`.
pub fn log_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut k = 10u64;
    while k < horizon {
        out.push(k);
        k = k.saturating_mul(10);
    }
    out.push(horizon);
    out
}

/// Replicates of the inhomogeneous chain; at step `k` the transition uses
/// `ε_k`.
pub fn run_cooled(
    game: &GameSpec,
    policy: &Policy,
    schedule: &Schedule,
    horizon: u64,
    seed: u64,
    replicates: u64,
    target: &[GlobalState],
    checkpoints: &[u64],
) -> Result<CooledReport> {
    if policy.algorithm == Algorithm::Ritel {
        return Err(PdlError::input("cooling schedules apply to ITEL and IODL only"));
    }
    schedule.validate()?;
    if horizon == 0 {
        return Err(PdlError::config("horizon", "must be positive"));
    }
    let mut marks: Vec<u64> = checkpoints.iter().copied().filter(|c| *c >= 1 && *c <= horizon).collect();
    marks.sort_unstable();
    marks.dedup();
    let pool = thread_pool()?;
    let hits: Vec<Vec<bool>> = pool.install(|| {
        (0..replicates)
            .into_par_iter()
            .map(|r| {
                let start = GlobalState::all_discontent(game.agent_count());
                let mut sim = Simulator::new(game, policy, schedule.at(0), None, start, replicate_rng(seed, r))?;
                let mut out = Vec::with_capacity(marks.len());
                let mut next_mark = 0;
                for k in 0..horizon {
                    sim.epsilon = schedule.at(k);
                    sim.step()?;
                    while next_mark < marks.len() && marks[next_mark] == k + 1 {
                        out.push(target.contains(sim.state()));
                        next_mark += 1;
                    }
                    if sim.is_absorbed() {
                        let inside = target.contains(sim.state());
                        out.resize(marks.len(), inside);
                        break;
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let checkpoints = marks
        .iter()
        .enumerate()
        .map(|(j, &step)| {
            let inside = hits.iter().filter(|h| h[j]).count() as u64;
            Checkpoint {
                step,
                epsilon: schedule.at(step - 1),
                inside,
                replicates,
                fraction: inside as f64 / replicates.max(1) as f64,
                interval: wilson_interval(inside, replicates),
            }
        })
        .collect();
    Ok(CooledReport {
        algorithm: policy.algorithm,
        schedule: schedule.clone(),
        seed,
        horizon,
        checkpoints,
    })
}
