//! Numeric RITEL chain at a fixed ε, one transition per period.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::error::{PdlError, Result};
use crate::game::GameSpec;
use crate::policy::{period_length, AgentState, Algorithm, Observation, Policy};

use super::tails::{bin_distribution, BinDistribution};
use super::GlobalState;

#[derive(Clone, Debug)]
pub struct NumericChain {
    pub states: Vec<GlobalState>,
    index: HashMap<GlobalState, usize>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub epsilon: f64,
    pub tau: usize,
}

impl NumericChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, s: &GlobalState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        super::to_dense(&self.rows, self.len())
    }
}

/// Bin distributions of every `(agent, profile)` at period length τ.
fn tail_table(game: &GameSpec, policy: &Policy, tau: usize) -> Result<Vec<Vec<BinDistribution>>> {
    let quant = policy.quant.ok_or_else(|| PdlError::config("delta", "RITEL needs a bin width"))?;
    (0..game.agent_count())
        .map(|i| {
            (0..game.profile_count())
                .map(|k| bin_distribution(game.utility_at(i, k), tau, &quant, Some(0x5eed ^ (i as u64) << 32 ^ k as u64)))
                .collect()
        })
        .collect()
}

fn row(
    game: &GameSpec,
    policy: &Policy,
    eps: f64,
    tails: &[Vec<BinDistribution>],
    state: &GlobalState,
) -> Result<BTreeMap<GlobalState, f64>> {
    let n = game.agent_count();
    let per_agent: Vec<Vec<(usize, f64)>> = state
        .0
        .iter()
        .zip(game.action_counts())
        .map(|(s, &c)| {
            policy
                .action_distribution(s, c)
                .map(|d| d.into_iter().map(|(a, p)| (a, p.eval(eps))).collect())
        })
        .collect::<Result<_>>()?;
    let mut acc: BTreeMap<GlobalState, f64> = BTreeMap::new();
    let mut choice = vec![0usize; n];
    loop {
        let profile: Vec<usize> = (0..n).map(|i| per_agent[i][choice[i]].0).collect();
        let action_prob: f64 = (0..n).map(|i| per_agent[i][choice[i]].1).product();
        let pidx = game.profile_index(&profile)?;
        let mut partial: Vec<(Vec<AgentState>, f64)> = vec![(Vec::with_capacity(n), action_prob)];
        for (i, agent) in state.0.iter().enumerate() {
            let mut outcomes: Vec<(AgentState, f64)> = Vec::new();
            for (bin, p_bin) in tails[i][pidx].support() {
                for (_, s, p) in policy.update_distribution(agent, profile[i], &Observation::Bin(bin))? {
                    outcomes.push((s, p_bin * p.eval(eps)));
                }
            }
            let mut next = Vec::with_capacity(partial.len() * outcomes.len());
            for (prefix, p) in &partial {
                for (s, q) in &outcomes {
                    let mut v = prefix.clone();
                    v.push(s.clone());
                    next.push((v, p * q));
                }
            }
            partial = next;
        }
        for (agents, p) in partial {
            if p > 0.0 {
                *acc.entry(GlobalState(agents)).or_insert(0.0) += p;
            }
        }
        let mut k = 0;
        loop {
            if k == n {
                return Ok(acc);
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

/// Breadth-first closure from `D` with period length `τ(ε)`.
pub fn build_ritel_numeric_chain(game: &GameSpec, policy: &Policy, tau0: f64, eps: f64, cap: usize) -> Result<NumericChain> {
    if policy.algorithm != Algorithm::Ritel {
        return Err(PdlError::input("numeric period chains are for RITEL"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(PdlError::config("epsilon", "must lie in (0,1)"));
    }
    let tau = period_length(tau0, eps);
    let tails = tail_table(game, policy, tau)?;
    let start = GlobalState::all_discontent(game.agent_count());
    let mut states = vec![start.clone()];
    let mut index = HashMap::from([(start, 0usize)]);
    let mut raw: Vec<Option<BTreeMap<GlobalState, f64>>> = vec![None];
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let r = row(game, policy, eps, &tails, &states[i])?;
        let total: f64 = r.values().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(PdlError::internal(format!("row of {} sums to {total}", states[i])));
        }
        for target in r.keys() {
            if !index.contains_key(target) {
                if states.len() >= cap {
                    return Err(PdlError::StateCap {
                        cap,
                        reached: states.len() + 1,
                    });
                }
                index.insert(target.clone(), states.len());
                states.push(target.clone());
                raw.push(None);
                queue.push_back(states.len() - 1);
            }
        }
        raw[i] = Some(r);
    }
    let rows = raw
        .into_iter()
        .map(|r| {
            let mut v: Vec<(usize, f64)> = r.expect("expanded").into_iter().map(|(t, p)| (index[&t], p)).collect();
            v.sort_by_key(|e| e.0);
            v
        })
        .collect();
    Ok(NumericChain {
        states,
        index,
        rows,
        epsilon: eps,
        tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{fixtures, Quantization};
    use crate::params::PolicyParams;

    #[test]
    fn small_fixture_chain_is_stochastic() {
        let policy = Policy::ritel(PolicyParams::default(), Quantization::with_bins(4));
        let c = build_ritel_numeric_chain(&fixtures::ritel_small(), &policy, 8.0, 0.05, 5000).unwrap();
        assert_eq!(c.tau, 24);
        for row in &c.rows {
            let s: f64 = row.iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-10);
        }
        assert!(c.len() < 2000, "{}", c.len());
    }

    #[test]
    fn wrong_algorithm() {
        let policy = Policy::itel(PolicyParams::default());
        assert!(build_ritel_numeric_chain(&fixtures::g1(), &policy, 8.0, 0.05, 10).is_err());
    }
}
