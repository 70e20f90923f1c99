//! Reachable state space and transition matrix of the induced process.
//!
//! ITEL and IODL transitions are exact polynomials in ε; RITEL transitions
//! are numeric at a fixed ε (see [`ritel`]).

pub mod ritel;
pub mod tails;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use num_traits::Zero;
use serde_json::{json, Value};

use crate::eps_poly::EpsPoly;
use crate::error::{PdlError, Result};
use crate::game::GameSpec;
use crate::numeric::{Resistance, Q};
use crate::policy::{AgentState, Algorithm, Observation, Policy};

pub const DEFAULT_STATE_CAP: usize = 200_000;

/// Joint state; an all-discontent vector is the canonical state `D`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalState(pub Vec<AgentState>);

impl GlobalState {
    pub fn all_discontent(agents: usize) -> Self {
        GlobalState(vec![AgentState::discontent(); agents])
    }

    pub fn is_all_discontent(&self) -> bool {
        self.0.iter().all(AgentState::is_discontent)
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.0
    }

    pub fn benchmark_profile(&self) -> Vec<usize> {
        self.0.iter().map(|a| a.action).collect()
    }
}

impl fmt::Display for GlobalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_all_discontent() {
            return f.write_str("D");
        }
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

/// Exact chain of an ITEL or IODL process.
#[derive(Clone, Debug)]
pub struct PmpChain {
    pub algorithm: Algorithm,
    pub states: Vec<GlobalState>,
    index: HashMap<GlobalState, usize>,
    /// Sparse rows `(target, probability)` sorted by target.
    pub rows: Vec<Vec<(usize, EpsPoly)>>,
    /// Every clipped accept equals its polynomial form for ε at most this.
    pub clip_free_epsilon: f64,
}

/// Symbolic outgoing transitions of one state.
pub fn build_transition_row(game: &GameSpec, policy: &Policy, state: &GlobalState) -> Result<Vec<(GlobalState, EpsPoly)>> {
    let n = game.agent_count();
    let counts = game.action_counts();
    let per_agent: Vec<Vec<(usize, EpsPoly)>> = state
        .0
        .iter()
        .zip(counts)
        .map(|(s, &c)| policy.action_distribution(s, c))
        .collect::<Result<_>>()?;

    let mut acc: BTreeMap<GlobalState, EpsPoly> = BTreeMap::new();
    let mut choice = vec![0usize; n];
    loop {
        let profile: Vec<usize> = (0..n).map(|i| per_agent[i][choice[i]].0).collect();
        let action_prob = (0..n).fold(EpsPoly::one(), |p, i| &p * &per_agent[i][choice[i]].1);
        let pidx = game.profile_index(&profile)?;
        let mut partial: Vec<(Vec<AgentState>, EpsPoly)> = vec![(Vec::with_capacity(n), action_prob)];
        for (i, agent) in state.0.iter().enumerate() {
            let obs = Observation::Utility(game.deterministic_utility(i, pidx)?);
            let outcomes = policy.update_distribution(agent, profile[i], &obs)?;
            let mut next = Vec::with_capacity(partial.len() * outcomes.len());
            for (prefix, p) in &partial {
                for (_, s, prob) in &outcomes {
                    let mut v = prefix.clone();
                    v.push(s.clone());
                    next.push((v, p * &prob.to_poly()));
                }
            }
            partial = next;
        }
        for (agents, p) in partial {
            let entry = acc.entry(GlobalState(agents)).or_insert_with(EpsPoly::zero);
            *entry = &*entry + &p;
        }
        // odometer over joint actions
        let mut k = 0;
        loop {
            if k == n {
                return finish_row(state, acc);
            }
            choice[k] += 1;
            if choice[k] < per_agent[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

fn finish_row(state: &GlobalState, acc: BTreeMap<GlobalState, EpsPoly>) -> Result<Vec<(GlobalState, EpsPoly)>> {
    let total: EpsPoly = acc.values().cloned().sum();
    if !total.is_one() {
        return Err(PdlError::internal(format!("row of {state} sums to {total}, not 1")));
    }
    let mut row = Vec::with_capacity(acc.len());
    for (target, p) in acc {
        if p.is_zero() {
            continue;
        }
        p.resistance().map_err(|e| PdlError::internal(format!("transition {state} -> {target}: {e}")))?;
        row.push((target, p));
    }
    Ok(row)
}

/// Breadth-first closure from `D`.
pub fn enumerate_states(game: &GameSpec, policy: &Policy, cap: usize) -> Result<Vec<GlobalState>> {
    Ok(PmpChain::build(game, policy, cap)?.states)
}

impl PmpChain {
    pub fn build(game: &GameSpec, policy: &Policy, cap: usize) -> Result<Self> {
        if policy.algorithm == Algorithm::Ritel {
            return Err(PdlError::input("RITEL chains are numeric only"));
        }
        if !game.is_deterministic() {
            return Err(PdlError::input("ITEL and IODL need deterministic utilities"));
        }
        let start = GlobalState::all_discontent(game.agent_count());
        let mut states = vec![start.clone()];
        let mut index = HashMap::from([(start, 0usize)]);
        let mut rows: Vec<Vec<(usize, EpsPoly)>> = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        let mut pending: Vec<Option<Vec<(GlobalState, EpsPoly)>>> = vec![None];
        while let Some(i) = queue.pop_front() {
            let row = build_transition_row(game, policy, &states[i])?;
            for (target, _) in &row {
                if !index.contains_key(target) {
                    if states.len() >= cap {
                        return Err(PdlError::StateCap {
                            cap,
                            reached: states.len() + 1,
                        });
                    }
                    index.insert(target.clone(), states.len());
                    states.push(target.clone());
                    pending.push(None);
                    queue.push_back(states.len() - 1);
                }
            }
            pending[i] = Some(row);
        }
        for row in pending {
            let row = row.expect("every state expanded");
            let mut sparse: Vec<(usize, EpsPoly)> = row.into_iter().map(|(t, p)| (index[&t], p)).collect();
            sparse.sort_by_key(|e| e.0);
            rows.push(sparse);
        }
        let clip_free_epsilon = policy.params.clip_free_epsilon(&game.all_means());
        Ok(PmpChain {
            algorithm: policy.algorithm,
            states,
            index,
            rows,
            clip_free_epsilon,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, s: &GlobalState) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Index of `D`; always the first state.
    pub fn d_index(&self) -> usize {
        0
    }

    pub fn entry(&self, from: usize, to: usize) -> Option<&EpsPoly> {
        self.rows[from]
            .binary_search_by_key(&to, |e| e.0)
            .ok()
            .map(|k| &self.rows[from][k].1)
    }

    /// Constant terms of every entry: the matrix `P⁰`.
    pub fn unperturbed_limit(&self) -> Vec<Vec<(usize, Q)>> {
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|(t, p)| (*t, p.constant_term()))
                    .filter(|(_, c)| !c.is_zero())
                    .collect()
            })
            .collect()
    }

    /// Per-entry resistances.
    pub fn resistances(&self) -> Vec<Vec<(usize, Resistance)>> {
        self.rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|(t, p)| (*t, p.resistance().expect("validated at build")))
                    .collect()
            })
            .collect()
    }

    /// Sparse numeric rows at ε.
    pub fn eval_sparse(&self, eps: f64) -> Vec<Vec<(usize, f64)>> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|(t, p)| (*t, p.eval(eps))).collect())
            .collect()
    }

    /// Dense numeric matrix at ε.
    pub fn eval_dense(&self, eps: f64) -> Vec<Vec<f64>> {
        to_dense(&self.eval_sparse(eps), self.len())
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                json!({
                    "state": self.states[i].to_string(),
                    "transitions": row.iter().map(|(t, p)| json!([t, p])).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "algorithm": self.algorithm,
            "states": self.states.len(),
            "clip_free_epsilon": self.clip_free_epsilon,
            "rows": rows,
        })
    }
}

pub fn to_dense(rows: &[Vec<(usize, f64)>], n: usize) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|row| {
            let mut dense = vec![0.0; n];
            for (t, p) in row {
                dense[*t] += p;
            }
            dense
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::fixtures;
    use crate::numeric::q;
    use crate::params::PolicyParams;
    use crate::policy::{Benchmark, Mood};
    use num_traits::One;

    fn itel_chain(g: &GameSpec) -> PmpChain {
        PmpChain::build(g, &Policy::itel(PolicyParams::default()), DEFAULT_STATE_CAP).unwrap()
    }

    #[test]
    fn rows_are_stochastic() {
        let c = itel_chain(&fixtures::g1());
        for row in &c.rows {
            let s: EpsPoly = row.iter().map(|e| e.1.clone()).sum();
            assert!(s.is_one());
        }
        for eps in [0.3, 0.1, 0.01] {
            for row in c.eval_sparse(eps) {
                let s: f64 = row.iter().map(|e| e.1).sum();
                assert!((s - 1.0).abs() < 1e-10);
                assert!(row.iter().all(|e| (0.0..=1.0 + 1e-12).contains(&e.1)));
            }
        }
    }

    #[test]
    fn cap_trigger() {
        let err = PmpChain::build(&fixtures::g1(), &Policy::itel(PolicyParams::default()), 1).unwrap_err();
        assert!(matches!(err, PdlError::StateCap { cap: 1, .. }));
    }

    #[test]
    fn single_agent_single_action() {
        let g = GameSpec::from_tables(vec![1], &[vec![0.5]]).unwrap();
        let c = itel_chain(&g);
        let labels: Vec<String> = c.states.iter().map(|s| s.to_string()).collect();
        assert_eq!(labels, vec!["D", "C:0:0.5"]);
    }

    #[test]
    fn optimal_state_row_is_identity() {
        let g = fixtures::all_ones();
        let c = itel_chain(&g);
        let x = GlobalState(vec![AgentState::content(0, Benchmark::Utility(Q::one())); 2]);
        let i = c.index_of(&x).unwrap();
        assert_eq!(c.rows[i], vec![(i, EpsPoly::one())]);
    }

    #[test]
    fn aligned_states_absorb_in_the_limit() {
        let g = fixtures::g1();
        let c = itel_chain(&g);
        let p0 = c.unperturbed_limit();
        for profile in g.profiles() {
            let pi = g.profile_index(&profile).unwrap();
            let x = GlobalState(
                (0..2)
                    .map(|i| AgentState::content(profile[i], Benchmark::Utility(g.deterministic_utility(i, pi).unwrap())))
                    .collect(),
            );
            let k = c.index_of(&x).unwrap();
            assert_eq!(p0[k], vec![(k, Q::one())]);
        }
    }

    #[test]
    fn all_accept_from_d_has_summed_resistance() {
        let g = fixtures::g1();
        let c = itel_chain(&g);
        let x = GlobalState(vec![
            AgentState::content(1, Benchmark::Utility(q(4, 5))),
            AgentState::content(1, Benchmark::Utility(q(4, 5))),
        ]);
        let p = c.entry(c.d_index(), c.index_of(&x).unwrap()).unwrap();
        assert_eq!(p.resistance().unwrap(), Resistance::Finite(q(18, 100)));
        assert_eq!(p.leading().unwrap().1, q(1, 4));
    }

    #[test]
    fn d_self_loop_limit_matches_small_eps() {
        let c = itel_chain(&fixtures::g1());
        let d = c.d_index();
        let exact = c.entry(d, d).unwrap().constant_term();
        let numeric = c.entry(d, d).unwrap().eval(1e-160);
        assert_eq!(exact, Q::one());
        assert!((numeric - 1.0).abs() < 1e-6);
        let limit = c.unperturbed_limit();
        for row in &limit {
            assert_eq!(row.iter().map(|e| e.1).sum::<Q>(), Q::one());
        }
    }

    #[test]
    fn iodl_chain_has_no_intermediate_moods() {
        let c = PmpChain::build(&fixtures::g1(), &Policy::iodl(PolicyParams::default()), DEFAULT_STATE_CAP).unwrap();
        assert!(c
            .states
            .iter()
            .flat_map(|s| s.0.iter())
            .all(|a| matches!(a.mood, Mood::Content | Mood::Discontent)));
    }

    #[test]
    fn random_utilities_are_rejected() {
        assert!(PmpChain::build(&fixtures::noisy_g1(), &Policy::itel(PolicyParams::default()), 10).is_err());
    }

    #[test]
    fn convergence_to_the_limit() {
        let c = itel_chain(&fixtures::g1());
        let p0 = to_dense(
            &c.unperturbed_limit()
                .iter()
                .map(|r| r.iter().map(|(t, x)| (*t, crate::numeric::to_f64(x))).collect())
                .collect::<Vec<_>>(),
            c.len(),
        );
        let gaps: Vec<f64> = (1..=6)
            .map(|k| {
                let pe = c.eval_dense(10f64.powi(-k));
                pe.iter()
                    .zip(&p0)
                    .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] <= w[0]), "{gaps:?}");
    }
}
