//! Finite games with deterministic or finite-support random utilities.

pub mod fixtures;

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::Serialize;
use serde_json::Value;

use crate::error::{PdlError, Result};
use crate::numeric::{fmt_q, q_int, QFlex, Q};
use crate::params::{AcceptCost, ExploreCost};

pub type Profile = Vec<usize>;

const WEIGHT_TOLERANCE: f64 = 1e-12;

/// Distribution of one agent's utility at one joint profile.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UtilityModel {
    Deterministic(Q),
    /// `(value, weight)` pairs sorted by value, weights summing to 1.
    FiniteSupport(Vec<(Q, Q)>),
}

impl UtilityModel {
    pub fn deterministic(value: Q) -> Result<Self> {
        if value < Q::zero() || value > Q::one() {
            return Err(PdlError::input(format!("utility {} outside [0,1]", fmt_q(&value))));
        }
        Ok(UtilityModel::Deterministic(value))
    }

    /// Validates and canonicalizes a support: merges repeated values and
    /// rescales weights whose total is within 1e-12 of one.
    pub fn finite_support(points: Vec<(Q, Q)>) -> Result<Self> {
        if points.is_empty() {
            return Err(PdlError::input("empty support"));
        }
        let mut merged: Vec<(Q, Q)> = Vec::with_capacity(points.len());
        let mut sorted = points;
        sorted.sort();
        for (v, w) in sorted {
            if v < Q::zero() || v > Q::one() {
                return Err(PdlError::input(format!("support value {} outside [0,1]", fmt_q(&v))));
            }
            if !w.is_positive() {
                return Err(PdlError::input(format!("non-positive weight {}", fmt_q(&w))));
            }
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += w,
                _ => merged.push((v, w)),
            }
        }
        let total: Q = merged.iter().map(|p| p.1).sum();
        if (crate::numeric::to_f64(&total) - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(PdlError::input(format!("weights sum to {}, not 1", fmt_q(&total))));
        }
        for p in merged.iter_mut() {
            p.1 /= total;
        }
        Ok(UtilityModel::FiniteSupport(merged))
    }

    pub fn bernoulli(p: Q) -> Result<Self> {
        if p.is_zero() || p.is_one() {
            return Self::finite_support(vec![(p, Q::one())]);
        }
        Self::finite_support(vec![(Q::zero(), Q::one() - p), (Q::one(), p)])
    }

    pub fn mean(&self) -> Q {
        match self {
            UtilityModel::Deterministic(v) => *v,
            UtilityModel::FiniteSupport(s) => s.iter().map(|(v, w)| *v * *w).sum(),
        }
    }

    /// `(value, weight)` pairs; a deterministic value is a single point.
    pub fn support(&self) -> Vec<(Q, Q)> {
        match self {
            UtilityModel::Deterministic(v) => vec![(*v, Q::one())],
            UtilityModel::FiniteSupport(s) => s.clone(),
        }
    }

    /// Whether the utility is almost surely constant.
    pub fn is_degenerate(&self) -> bool {
        match self {
            UtilityModel::Deterministic(_) => true,
            UtilityModel::FiniteSupport(s) => s.len() == 1,
        }
    }

    pub fn variance(&self) -> Q {
        let m = self.mean();
        self.support().iter().map(|(v, w)| (*v - m) * (*v - m) * *w).sum()
    }
}

impl Serialize for UtilityModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            UtilityModel::Deterministic(v) => QFlex(*v).serialize(s),
            UtilityModel::FiniteSupport(points) => {
                #[derive(Serialize)]
                struct Wire {
                    support: Vec<[QFlex; 2]>,
                }
                Wire {
                    support: points.iter().map(|(v, w)| [QFlex(*v), QFlex(*w)]).collect(),
                }
                .serialize(s)
            }
        }
    }
}

fn model_from_json(cell: &Value, path: &str) -> Result<UtilityModel> {
    match cell {
        Value::Object(map) => {
            if map.len() != 1 || !map.contains_key("support") {
                return Err(PdlError::config(path, "expected a number or {\"support\": [[v, w], ...]}"));
            }
            let pts: Vec<[QFlex; 2]> = serde_json::from_value(map["support"].clone())
                .map_err(|e| PdlError::config(format!("{path}.support"), e.to_string()))?;
            UtilityModel::finite_support(pts.into_iter().map(|[v, w]| (v.0, w.0)).collect())
                .map_err(|e| PdlError::config(path, e.to_string()))
        }
        other => {
            let v: QFlex = serde_json::from_value(other.clone())
                .map_err(|e| PdlError::config(path, e.to_string()))?;
            UtilityModel::deterministic(v.0).map_err(|e| PdlError::config(path, e.to_string()))
        }
    }
}

/// Utility quantization with bins `[kδ,(k+1)δ)` for `k < K` and the top bin
/// `{1}` with index `K = 1/δ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Quantization {
    top: u32,
}

impl Quantization {
    pub fn from_delta(delta: Q) -> Result<Self> {
        if !delta.is_positive() || delta > Q::one() {
            return Err(PdlError::config("delta", "bin width must lie in (0,1]"));
        }
        let inv = delta.recip();
        if !inv.is_integer() {
            return Err(PdlError::config("delta", format!("1/delta = {} is not an integer", fmt_q(&inv))));
        }
        Ok(Quantization {
            top: *inv.numer() as u32,
        })
    }

    pub fn with_bins(top: u32) -> Self {
        assert!(top > 0);
        Quantization { top }
    }

    pub fn delta(&self) -> Q {
        Q::new(1, self.top as i128)
    }

    /// Index of the top bin `{1}`.
    pub fn top(&self) -> u32 {
        self.top
    }

    pub fn bin_of(&self, u: Q) -> Result<u32> {
        if u < Q::zero() || u > Q::one() {
            return Err(PdlError::input(format!("utility {} outside [0,1]", fmt_q(&u))));
        }
        Ok((u * q_int(self.top as i128)).floor().to_integer() as u32)
    }

    /// `v⁻`: the lower edge, with `{1}⁻ = 1`.
    pub fn lower(&self, bin: u32) -> Q {
        Q::new(bin.min(self.top) as i128, self.top as i128)
    }

    /// `v⁺`: the upper edge, with `{1}⁺ = 1 + δ`.
    pub fn upper(&self, bin: u32) -> Q {
        Q::new(bin as i128 + 1, self.top as i128)
    }

    pub fn contains(&self, bin: u32, u: Q) -> bool {
        self.bin_of(u).map(|b| b == bin).unwrap_or(false)
    }

    pub fn label(&self, bin: u32) -> String {
        if bin >= self.top {
            "{1}".to_string()
        } else {
            format!("[{},{})", fmt_q(&self.lower(bin)), fmt_q(&self.upper(bin)))
        }
    }
}

/// Mean utilities and their bins at one profile.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileStats {
    pub means: Vec<Q>,
    pub bins: Vec<u32>,
}

/// Proper nonempty agent subset (bitmask) and profile violating
/// interdependence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterdependenceWitness {
    pub profile: Profile,
    pub subset: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Offset {
    Plus,
    Minus,
}

/// A finite normal-form game.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameSpec {
    action_counts: Vec<usize>,
    /// `utilities[agent][profile_index]`.
    utilities: Vec<Vec<UtilityModel>>,
}

impl GameSpec {
    pub fn new(action_counts: Vec<usize>, utilities: Vec<Vec<UtilityModel>>) -> Result<Self> {
        if action_counts.is_empty() {
            return Err(PdlError::input("a game needs at least one agent"));
        }
        if action_counts.iter().any(|&c| c == 0) {
            return Err(PdlError::input("every agent needs at least one action"));
        }
        let profiles: usize = action_counts.iter().product();
        if utilities.len() != action_counts.len() {
            return Err(PdlError::input(format!(
                "{} utility tables for {} agents",
                utilities.len(),
                action_counts.len()
            )));
        }
        if let Some(i) = utilities.iter().position(|u| u.len() != profiles) {
            return Err(PdlError::input(format!("agent {i} has a utility table of the wrong size")));
        }
        Ok(GameSpec {
            action_counts,
            utilities,
        })
    }

    /// Builds a deterministic game from row-major tables of decimal values.
    pub fn from_tables(action_counts: Vec<usize>, tables: &[Vec<f64>]) -> Result<Self> {
        let utilities = tables
            .iter()
            .map(|t| {
                t.iter()
                    .map(|x| {
                        let v = crate::numeric::q_from_f64(*x)
                            .ok_or_else(|| PdlError::input("non-finite utility"))?;
                        UtilityModel::deterministic(v)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(action_counts, utilities)
    }

    pub fn agent_count(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn profile_count(&self) -> usize {
        self.action_counts.iter().product()
    }

    pub fn profile_index(&self, profile: &[usize]) -> Result<usize> {
        if profile.len() != self.agent_count() {
            return Err(PdlError::input(format!("profile of length {} for {} agents", profile.len(), self.agent_count())));
        }
        let mut idx = 0;
        for (a, &count) in profile.iter().zip(&self.action_counts) {
            if *a >= count {
                return Err(PdlError::input(format!("action {a} out of range {count}")));
            }
            idx = idx * count + a;
        }
        Ok(idx)
    }

    pub fn profile_at(&self, mut index: usize) -> Profile {
        let mut out = vec![0; self.agent_count()];
        for (slot, &count) in out.iter_mut().zip(&self.action_counts).rev() {
            *slot = index % count;
            index /= count;
        }
        out
    }

    /// All profiles in row-major order.
    pub fn profiles(&self) -> impl Iterator<Item = Profile> + '_ {
        (0..self.profile_count()).map(|i| self.profile_at(i))
    }

    pub fn utility(&self, agent: usize, profile: &[usize]) -> Result<&UtilityModel> {
        if agent >= self.agent_count() {
            return Err(PdlError::input(format!("agent {agent} out of range")));
        }
        Ok(&self.utilities[agent][self.profile_index(profile)?])
    }

    pub fn utility_at(&self, agent: usize, profile_index: usize) -> &UtilityModel {
        &self.utilities[agent][profile_index]
    }

    pub fn mean_utility(&self, agent: usize, profile: &[usize]) -> Result<Q> {
        Ok(self.utility(agent, profile)?.mean())
    }

    fn mean_at(&self, agent: usize, profile: &[usize]) -> Q {
        self.utilities[agent][self.profile_index(profile).expect("valid profile")].mean()
    }

    pub fn is_deterministic(&self) -> bool {
        self.utilities.iter().flatten().all(|m| matches!(m, UtilityModel::Deterministic(_)))
    }

    /// Deterministic utility; an error for random models.
    pub fn deterministic_utility(&self, agent: usize, profile_index: usize) -> Result<Q> {
        match &self.utilities[agent][profile_index] {
            UtilityModel::Deterministic(v) => Ok(*v),
            UtilityModel::FiniteSupport(_) => Err(PdlError::input("random utility where a deterministic one is required")),
        }
    }

    /// Distinct mean utilities of an agent over all profiles.
    pub fn achievable_means(&self, agent: usize) -> Vec<Q> {
        let mut v: Vec<Q> = self.utilities[agent].iter().map(|m| m.mean()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn all_means(&self) -> Vec<Q> {
        let mut v: Vec<Q> = (0..self.agent_count()).flat_map(|i| self.achievable_means(i)).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn stats(&self, profile: &[usize], quant: &Quantization) -> Result<ProfileStats> {
        let means: Vec<Q> = (0..self.agent_count())
            .map(|i| self.mean_utility(i, profile))
            .collect::<Result<_>>()?;
        let bins = means.iter().map(|m| quant.bin_of(*m)).collect::<Result<_>>()?;
        Ok(ProfileStats { means, bins })
    }

    pub fn deviate(&self, profile: &[usize], agent: usize, action: usize) -> Profile {
        let mut p = profile.to_vec();
        p[agent] = action;
        p
    }

    /// Every unilateral deviation `(agent, action, deviated profile)`.
    pub fn deviations<'a>(&'a self, profile: &'a [usize]) -> impl Iterator<Item = (usize, usize, Profile)> + 'a {
        (0..self.agent_count()).flat_map(move |i| {
            (0..self.action_counts[i])
                .filter(move |&a| a != profile[i])
                .map(move |a| (i, a, self.deviate(profile, i, a)))
        })
    }

    fn interdependence_with(&self, threshold: Q) -> std::result::Result<(), InterdependenceWitness> {
        let n = self.agent_count();
        if n == 1 {
            return Ok(());
        }
        for profile in self.profiles() {
            for mask in 1u64..(1u64 << n) - 1 {
                let subset: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
                let outsiders: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 0).collect();
                let base: Vec<Q> = outsiders.iter().map(|&i| self.mean_at(i, &profile)).collect();
                let combos: usize = subset.iter().map(|&j| self.action_counts[j]).product();
                let found = (0..combos).any(|mut c| {
                    let mut alt = profile.clone();
                    for &j in &subset {
                        alt[j] = c % self.action_counts[j];
                        c /= self.action_counts[j];
                    }
                    outsiders.iter().zip(&base).any(|(&i, b)| {
                        let gap = (self.mean_at(i, &alt) - *b).abs();
                        gap.is_positive() && gap >= threshold
                    })
                });
                if !found {
                    return Err(InterdependenceWitness { profile, subset });
                }
            }
        }
        Ok(())
    }

    /// Every proper nonempty agent subset can change some outsider's mean
    /// utility by switching its own actions.
    pub fn check_interdependence(&self) -> std::result::Result<(), InterdependenceWitness> {
        self.interdependence_with(Q::zero())
    }

    /// As [`Self::check_interdependence`], with changes of at least `3δ`.
    pub fn check_3delta_interdependence(&self, delta: Q) -> std::result::Result<(), InterdependenceWitness> {
        self.interdependence_with(delta * q_int(3))
    }

    pub fn is_rho_equilibrium(&self, profile: &[usize], rho: Q) -> bool {
        self.deviations(profile)
            .all(|(i, _, alt)| self.mean_at(i, &alt) <= self.mean_at(i, profile) + rho)
    }

    pub fn find_rho_equilibria(&self, rho: Q) -> Vec<Profile> {
        self.profiles().filter(|p| self.is_rho_equilibrium(p, rho)).collect()
    }

    /// Sum of mean utilities.
    pub fn welfare(&self, profile: &[usize]) -> Q {
        (0..self.agent_count()).map(|i| self.mean_at(i, profile)).sum()
    }

    /// Largest unilateral mean improvement; `None` at an equilibrium.
    pub fn stability(&self, profile: &[usize]) -> Option<Q> {
        self.deviations(profile)
            .map(|(i, _, alt)| self.mean_at(i, &alt) - self.mean_at(i, profile))
            .filter(|g| g.is_positive())
            .max()
    }

    /// Whether every agent's mean utility is at least `1 − slack`.
    pub fn is_optimal_within(&self, profile: &[usize], slack: Q) -> bool {
        (0..self.agent_count()).all(|i| self.mean_at(i, profile) >= Q::one() - slack)
    }

    /// `1 − Σ F(μ_i ± δ)` with clamped arguments.
    pub fn virtual_welfare_profile(&self, profile: &[usize], f: &AcceptCost, delta: Q, sign: Offset) -> Q {
        let shift = match sign {
            Offset::Plus => delta,
            Offset::Minus => -delta,
        };
        Q::one()
            - (0..self.agent_count())
                .map(|i| f.eval(self.mean_at(i, profile) + shift))
                .sum::<Q>()
    }

    /// `1 − min G(...)` over improving deviations. The `+` form pairs
    /// `(μ − δ, M' + δ)` over deviations with `M' > μ` and needs a
    /// non-δ-equilibrium; the `−` form pairs `(μ + δ, M' − δ)` over deviations
    /// with `M' > μ + 3δ` and needs a non-3δ-equilibrium.
    pub fn virtual_stability_profile(&self, profile: &[usize], g: &ExploreCost, delta: Q, sign: Offset) -> Option<Q> {
        let (guard, bench_shift, obs_shift, gain) = match sign {
            Offset::Plus => (delta, -delta, delta, Q::zero()),
            Offset::Minus => (delta * q_int(3), delta, -delta, delta * q_int(3)),
        };
        if self.is_rho_equilibrium(profile, guard) {
            return None;
        }
        self.deviations(profile)
            .filter_map(|(i, _, alt)| {
                let mu = self.mean_at(i, profile);
                let m = self.mean_at(i, &alt);
                (m > mu + gain).then(|| g.eval(mu + bench_shift, m + obs_shift))
            })
            .min()
            .map(|gmin| Q::one() - gmin)
    }

    pub fn to_json(&self) -> Value {
        #[derive(Serialize)]
        struct Wire<'a> {
            agents: usize,
            actions_per_agent: &'a [usize],
            utilities: Vec<Value>,
        }
        let utilities = self
            .utilities
            .iter()
            .map(|table| self.nest(table, 0, 0))
            .collect();
        serde_json::to_value(Wire {
            agents: self.agent_count(),
            actions_per_agent: &self.action_counts,
            utilities,
        })
        .expect("game serializes")
    }

    fn nest(&self, table: &[UtilityModel], depth: usize, offset: usize) -> Value {
        if depth == self.agent_count() {
            return serde_json::to_value(&table[offset]).expect("utility serializes");
        }
        let count = self.action_counts[depth];
        Value::Array(
            (0..count)
                .map(|a| self.nest(table, depth + 1, offset * count + a))
                .collect(),
        )
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| PdlError::config("$", "game must be a JSON object"))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "agents" | "actions_per_agent" | "utilities") {
                return Err(PdlError::config(key.clone(), "unknown key"));
            }
        }
        let agents = obj
            .get("agents")
            .and_then(Value::as_u64)
            .ok_or_else(|| PdlError::config("agents", "missing or not a positive integer"))? as usize;
        let actions: Vec<usize> = obj
            .get("actions_per_agent")
            .cloned()
            .map(serde_json::from_value)
            .transpose()
            .map_err(|e| PdlError::config("actions_per_agent", e.to_string()))?
            .ok_or_else(|| PdlError::config("actions_per_agent", "missing"))?;
        if actions.len() != agents {
            return Err(PdlError::config("actions_per_agent", format!("{} entries for {agents} agents", actions.len())));
        }
        if agents == 0 || actions.iter().any(|&a| a == 0) {
            return Err(PdlError::config("actions_per_agent", "agents and action counts must be positive"));
        }
        let tables = obj
            .get("utilities")
            .and_then(Value::as_array)
            .ok_or_else(|| PdlError::config("utilities", "missing or not an array"))?;
        if tables.len() != agents {
            return Err(PdlError::config("utilities", format!("{} tables for {agents} agents", tables.len())));
        }
        let mut utilities = Vec::with_capacity(agents);
        for (i, t) in tables.iter().enumerate() {
            let mut flat = Vec::new();
            flatten(t, &actions, 0, &format!("utilities[{i}]"), &mut flat)?;
            utilities.push(flat);
        }
        Self::new(actions, utilities).map_err(|e| PdlError::config("utilities", e.to_string()))
    }
}

fn flatten(v: &Value, counts: &[usize], depth: usize, path: &str, out: &mut Vec<UtilityModel>) -> Result<()> {
    if depth == counts.len() {
        out.push(model_from_json(v, path)?);
        return Ok(());
    }
    let arr = v
        .as_array()
        .filter(|a| a.len() == counts[depth])
        .ok_or_else(|| PdlError::config(path, format!("expected an array of length {}", counts[depth])))?;
    for (k, child) in arr.iter().enumerate() {
        flatten(child, counts, depth + 1, &format!("{path}[{k}]"), out)?;
    }
    Ok(())
}

impl fmt::Display for GameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "game with actions {:?}", self.action_counts)
    }
}

pub fn fmt_profile(p: &[usize]) -> String {
    let parts: Vec<String> = p.iter().map(|a| a.to_string()).collect();
    format!("({})", parts.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::q;
    use crate::params::PolicyParams;
    use proptest::prelude::*;

    fn g1() -> GameSpec {
        fixtures::g1()
    }

    fn decoupled() -> GameSpec {
        GameSpec::from_tables(vec![2, 2], &[vec![0.2, 0.2, 0.6, 0.6], vec![0.3, 0.7, 0.3, 0.7]]).unwrap()
    }

    #[test]
    fn means() {
        assert_eq!(UtilityModel::Deterministic(q(4, 5)).mean(), q(4, 5));
        let sym = UtilityModel::finite_support(vec![(Q::zero(), q(1, 2)), (Q::one(), q(1, 2))]).unwrap();
        assert_eq!(sym.mean(), q(1, 2));
        let m = UtilityModel::finite_support(vec![(q(1, 5), q(1, 4)), (q(3, 5), q(3, 4))]).unwrap();
        assert_eq!(m.mean(), q(1, 5) * q(1, 4) + q(3, 5) * q(3, 4));
        assert_eq!(m.mean(), q(1, 2));
        assert!(g1().mean_utility(0, &[2, 0]).is_err());
        assert!(g1().mean_utility(5, &[0, 0]).is_err());
    }

    #[test]
    fn invalid_models() {
        assert!(UtilityModel::deterministic(q(3, 2)).is_err());
        assert!(UtilityModel::finite_support(vec![(q(1, 2), q(1, 2))]).is_err());
        assert!(UtilityModel::finite_support(vec![(q(1, 2), -q(1, 2)), (q(1, 4), q(3, 2))]).is_err());
        assert!(GameSpec::new(vec![], vec![]).is_err());
        assert!(GameSpec::new(vec![0], vec![vec![]]).is_err());
    }

    #[test]
    fn binning() {
        let b = Quantization::from_delta(q(1, 4)).unwrap();
        assert_eq!(b.bin_of(q(3, 10)).unwrap(), 1);
        assert_eq!(b.bin_of(Q::one()).unwrap(), 4);
        assert_eq!(b.bin_of(q(1, 4)).unwrap(), 1);
        assert!(b.bin_of(q(11, 10)).is_err());
        assert_eq!(b.label(4), "{1}");
        assert_eq!(b.label(1), "[0.25,0.5)");
        assert!(Quantization::from_delta(q(3, 10)).is_err());
    }

    #[test]
    fn interdependence() {
        let w = decoupled().check_interdependence().unwrap_err();
        assert_eq!(w.subset.len(), 1);
        assert!(g1().check_interdependence().is_ok());
        let single = GameSpec::from_tables(vec![3], &[vec![0.1, 0.5, 0.9]]).unwrap();
        assert!(single.check_interdependence().is_ok());
        assert!(g1().check_3delta_interdependence(q(1, 20)).is_ok());
        assert!(decoupled().check_3delta_interdependence(q(1, 20)).is_err());
    }

    /// Direct brute force: every (profile, subset) has a witness with a gap
    /// of at least `threshold`.
    fn brute_interdependent(g: &GameSpec, threshold: Q) -> bool {
        let n = g.agent_count();
        let profiles: Vec<Profile> = g.profiles().collect();
        for a in &profiles {
            for mask in 1..(1 << n) - 1 {
                let ok = profiles.iter().any(|alt| {
                    let same_outside = (0..n).all(|i| mask >> i & 1 == 1 || alt[i] == a[i]);
                    same_outside
                        && (0..n).any(|i| {
                            mask >> i & 1 == 0 && {
                                let gap = (g.mean_utility(i, alt).unwrap() - g.mean_utility(i, a).unwrap()).abs();
                                gap > Q::zero() && gap >= threshold
                            }
                        })
                });
                if !ok {
                    return false;
                }
            }
        }
        true
    }

    #[test]
    fn three_delta_interdependence_on_g1_matches_brute_force() {
        for d in [q(1, 20), q(1, 10)] {
            assert_eq!(
                g1().check_3delta_interdependence(d).is_ok(),
                brute_interdependent(&g1(), d * q_int(3))
            );
        }
    }

    #[test]
    fn equilibria() {
        assert_eq!(g1().find_rho_equilibria(Q::zero()), vec![vec![1, 1]]);
        assert!(fixtures::g2().find_rho_equilibria(Q::zero()).is_empty());
        let flat = GameSpec::from_tables(vec![2, 2], &[vec![0.5; 4], vec![0.5; 4]]).unwrap();
        assert_eq!(flat.find_rho_equilibria(Q::zero()).len(), 4);
    }

    #[test]
    fn welfare_and_stability() {
        let g = g1();
        assert_eq!(g.welfare(&[1, 1]), q(8, 5));
        assert_eq!(g.stability(&[1, 1]), None);
        assert_eq!(g.welfare(&[0, 0]), q(4, 5));
        assert_eq!(g.stability(&[0, 0]), Some(q(1, 5)));
        let zero = GameSpec::from_tables(vec![2, 2], &[vec![0.0; 4], vec![0.0; 4]]).unwrap();
        assert_eq!(zero.welfare(&[1, 0]), Q::zero());
    }

    #[test]
    fn virtual_welfare() {
        let g = g1();
        let f = PolicyParams::default().accept;
        let p = [1, 1];
        assert_eq!(g.virtual_welfare_profile(&p, &f, Q::zero(), Offset::Plus), q(82, 100));
        assert_eq!(g.virtual_welfare_profile(&p, &f, Q::zero(), Offset::Minus), q(82, 100));
        assert_eq!(g.virtual_welfare_profile(&p, &f, q(1, 20), Offset::Plus), q(84, 100));
        assert_eq!(g.virtual_welfare_profile(&p, &f, q(1, 20), Offset::Minus), q(80, 100));
    }

    #[test]
    fn virtual_stability_definedness() {
        let g = g1();
        let gf = PolicyParams::default().explore;
        assert_eq!(g.virtual_stability_profile(&[1, 1], &gf, Q::zero(), Offset::Plus), None);
        assert_eq!(
            g.virtual_stability_profile(&[0, 0], &gf, Q::zero(), Offset::Plus),
            Some(Q::one() - q(42, 100))
        );
        // every gain in G1 is 0.2, so a 0.1 band makes everything a 3δ-equilibrium
        assert_eq!(g.virtual_stability_profile(&[0, 0], &gf, q(1, 10), Offset::Minus), None);
    }

    #[test]
    fn json_roundtrip() {
        let g = fixtures::noisy_g1();
        let v = g.to_json();
        assert_eq!(GameSpec::from_json(&v).unwrap(), g);
        let g = g1();
        let text = serde_json::to_string(&g.to_json()).unwrap();
        assert!(text.contains("[[0.4,0.2],[0.6,0.8]]"));
        assert_eq!(GameSpec::from_json(&serde_json::from_str(&text).unwrap()).unwrap(), g);
    }

    #[test]
    fn json_errors_name_the_key() {
        let bad: Value = serde_json::json!({"agents": 1, "actions_per_agent": [2], "utilities": [[0.1, 1.5]]});
        match GameSpec::from_json(&bad) {
            Err(PdlError::Config { path, .. }) => assert_eq!(path, "utilities[0][1]"),
            other => panic!("unexpected {other:?}"),
        }
        let extra: Value = serde_json::json!({"agents": 1, "actions_per_agent": [1], "utilities": [[0.1]], "x": 1});
        assert!(GameSpec::from_json(&extra).is_err());
    }

    fn arb_game() -> impl Strategy<Value = GameSpec> {
        (1usize..4, 1usize..4, 1usize..3).prop_flat_map(|(a0, a1, a2)| {
            let counts = vec![a0, a1, a2];
            let size = a0 * a1 * a2;
            prop::collection::vec(prop::collection::vec(0i128..=20, size), 3).prop_map(move |tables| {
                let utilities = tables
                    .into_iter()
                    .map(|t| t.into_iter().map(|k| UtilityModel::Deterministic(q(k, 20))).collect())
                    .collect();
                GameSpec::new(counts.clone(), utilities).unwrap()
            })
        })
    }

    /// Games with means in [δ, 1−δ] so that no argument of F is clamped.
    fn arb_interior_game() -> impl Strategy<Value = GameSpec> {
        prop::collection::vec(prop::collection::vec(1i128..=19, 4), 2).prop_map(|tables| {
            let utilities = tables
                .into_iter()
                .map(|t| t.into_iter().map(|k| UtilityModel::Deterministic(q(k, 20))).collect())
                .collect();
            GameSpec::new(vec![2, 2], utilities).unwrap()
        })
    }

    proptest! {
        #[test]
        fn linear_virtual_welfare_identity(g in arb_interior_game()) {
            let f = AcceptCost::Linear { phi: q(1, 4), psi: q(1, 5) };
            let delta = q(1, 20);
            let n = q_int(2);
            for p in g.profiles() {
                let w = g.welfare(&p);
                let plus = g.virtual_welfare_profile(&p, &f, delta, Offset::Plus);
                let minus = g.virtual_welfare_profile(&p, &f, delta, Offset::Minus);
                prop_assert_eq!(plus, Q::one() - n * q(1, 4) + q(1, 5) * (w + n * delta));
                prop_assert_eq!(minus, Q::one() - n * q(1, 4) + q(1, 5) * (w - n * delta));
                prop_assert!(minus <= plus);
            }
        }

        #[test]
        fn equilibria_monotone_in_rho(g in arb_game(), r1 in 0i128..10, r2 in 0i128..10) {
            let (lo, hi) = (q(r1.min(r2), 20), q(r1.max(r2), 20));
            let small = g.find_rho_equilibria(lo);
            let large = g.find_rho_equilibria(hi);
            prop_assert!(small.iter().all(|p| large.contains(p)));
        }

        #[test]
        fn zero_band_matches_plain_interdependence(g in arb_game()) {
            prop_assert_eq!(
                g.check_3delta_interdependence(Q::zero()).is_ok(),
                g.check_interdependence().is_ok()
            );
            prop_assert_eq!(g.check_interdependence().is_ok(), brute_interdependent(&g, Q::zero()));
        }

        #[test]
        fn bin_of_is_monotone(a in 0i128..=1000, b in 0i128..=1000, k in 1u32..21) {
            let quant = Quantization::with_bins(k);
            let (lo, hi) = (q(a.min(b), 1000), q(a.max(b), 1000));
            prop_assert!(quant.bin_of(lo).unwrap() <= quant.bin_of(hi).unwrap());
        }
    }
}
