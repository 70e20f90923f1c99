//! Resistance functions `F` (accepting from discontent) and `G` (accepting an
//! exploration), the clip constant and their declared bounds.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{PdlError, Result};
use crate::numeric::{clamp_unit, fmt_q, q, q_flex, Q};

/// Resistance of accepting a utility from the discontent mood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum AcceptCost {
    /// `phi - psi * u`.
    Linear {
        #[serde(with = "q_flex")]
        phi: Q,
        #[serde(with = "q_flex")]
        psi: Q,
    },
    /// Piecewise-linear through `(u, value)` knots sorted by `u`.
    Table {
        #[serde(with = "q_flex::pairs")]
        table: Vec<(Q, Q)>,
    },
}

/// Resistance of accepting an explored utility `u` over the benchmark `ub`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ExploreCost {
    /// `phi - psi * (u - ub)`.
    Linear {
        #[serde(with = "q_flex")]
        phi: Q,
        #[serde(with = "q_flex")]
        psi: Q,
    },
    /// Bilinear on the grid `benchmarks x observed`; `values[b][o]`.
    Table {
        #[serde(with = "q_flex::list")]
        benchmarks: Vec<Q>,
        #[serde(with = "q_flex::list")]
        observed: Vec<Q>,
        #[serde(with = "q_flex::matrix")]
        values: Vec<Vec<Q>>,
    },
}

fn segment(knots: &[Q], x: Q) -> (usize, Q) {
    if knots.len() == 1 || x <= knots[0] {
        return (0, Q::zero());
    }
    let last = knots.len() - 1;
    if x >= knots[last] {
        return (last - 1, Q::one());
    }
    let k = knots.partition_point(|k| *k <= x) - 1;
    (k, (x - knots[k]) / (knots[k + 1] - knots[k]))
}

fn lerp(a: Q, b: Q, t: Q) -> Q {
    a + (b - a) * t
}

impl AcceptCost {
    pub fn eval(&self, u: Q) -> Q {
        let u = clamp_unit(u);
        match self {
            AcceptCost::Linear { phi, psi } => *phi - *psi * u,
            AcceptCost::Table { table } => {
                let xs: Vec<Q> = table.iter().map(|p| p.0).collect();
                let (k, t) = segment(&xs, u);
                if table.len() == 1 {
                    table[0].1
                } else {
                    lerp(table[k].1, table[k + 1].1, t)
                }
            }
        }
    }

    fn check_shape(&self) -> Result<()> {
        if let AcceptCost::Table { table } = self {
            if table.is_empty() || table.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(PdlError::config("F.table", "knots must be non-empty and strictly increasing"));
            }
        }
        Ok(())
    }
}

impl ExploreCost {
    pub fn eval(&self, benchmark: Q, observed: Q) -> Q {
        let (b, o) = (clamp_unit(benchmark), clamp_unit(observed));
        match self {
            ExploreCost::Linear { phi, psi } => *phi - *psi * (o - b),
            ExploreCost::Table {
                benchmarks,
                observed: obs,
                values,
            } => {
                let (i, s) = segment(benchmarks, b);
                let (j, t) = segment(obs, o);
                let i1 = (i + 1).min(benchmarks.len() - 1);
                let j1 = (j + 1).min(obs.len() - 1);
                let low = lerp(values[i][j], values[i][j1], t);
                let high = lerp(values[i1][j], values[i1][j1], t);
                lerp(low, high, s)
            }
        }
    }

    fn check_shape(&self) -> Result<()> {
        if let ExploreCost::Table {
            benchmarks,
            observed,
            values,
        } = self
        {
            let increasing = |v: &Vec<Q>| !v.is_empty() && v.windows(2).all(|w| w[0] < w[1]);
            if !increasing(benchmarks) || !increasing(observed) {
                return Err(PdlError::config("G", "grid axes must be non-empty and strictly increasing"));
            }
            if values.len() != benchmarks.len() || values.iter().any(|r| r.len() != observed.len()) {
                return Err(PdlError::config("G.values", "shape must be benchmarks x observed"));
            }
        }
        Ok(())
    }
}

/// `F`, `G`, the clip constant `c_F` and the bounds `F0`, `G0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyParams {
    #[serde(rename = "F")]
    pub accept: AcceptCost,
    #[serde(rename = "G")]
    pub explore: ExploreCost,
    #[serde(rename = "c_F", with = "q_flex")]
    pub clip: Q,
    #[serde(rename = "F0", with = "q_flex")]
    pub accept_bound: Q,
    #[serde(rename = "G0", with = "q_flex")]
    pub explore_bound: Q,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            accept: AcceptCost::Linear {
                phi: q(1, 4),
                psi: q(1, 5),
            },
            explore: ExploreCost::Linear {
                phi: q(1, 2),
                psi: q(2, 5),
            },
            clip: q(19, 20),
            accept_bound: q(1, 2),
            explore_bound: q(1, 2),
        }
    }
}

/// Which condition on the parameters failed.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionViolation {
    pub key: &'static str,
    pub message: String,
}

impl PolicyParams {
    pub fn f(&self, u: Q) -> Q {
        self.accept.eval(u)
    }

    pub fn g(&self, benchmark: Q, observed: Q) -> Q {
        self.explore.eval(benchmark, observed)
    }

    /// Checks `0 <= F <= F0/n`, `0 <= G < G0` for `ub < u`, `F0 + G0 <= 1`
    /// and `c_F` in `(0,1)` on the grid of multiples of 1/100 together with
    /// `extra` points (typically the achievable utilities of a game).
    pub fn validate(&self, agents: usize, extra: &[Q]) -> std::result::Result<(), ConditionViolation> {
        self.accept.check_shape().map_err(|e| ConditionViolation {
            key: "F",
            message: e.to_string(),
        })?;
        self.explore.check_shape().map_err(|e| ConditionViolation {
            key: "G",
            message: e.to_string(),
        })?;
        if self.clip <= Q::zero() || self.clip >= Q::one() {
            return Err(ConditionViolation {
                key: "c_F",
                message: format!("c_F = {} must lie in (0,1)", fmt_q(&self.clip)),
            });
        }
        if self.accept_bound + self.explore_bound > Q::one() {
            return Err(ConditionViolation {
                key: "F0",
                message: format!(
                    "F0 + G0 \\le 1 violated: {} + {} > 1",
                    fmt_q(&self.accept_bound),
                    fmt_q(&self.explore_bound)
                ),
            });
        }
        let mut grid: Vec<Q> = (0..=100).map(|k| q(k, 100)).collect();
        grid.extend(extra.iter().map(|x| clamp_unit(*x)));
        grid.sort();
        grid.dedup();
        let f_cap = self.accept_bound / Q::from_integer(agents as i128);
        for u in &grid {
            let f = self.f(*u);
            if f < Q::zero() || f > f_cap {
                return Err(ConditionViolation {
                    key: "F",
                    message: format!(
                        "0 <= F(u) <= F0/n violated at u = {}: F = {}, F0/n = {}",
                        fmt_q(u),
                        fmt_q(&f),
                        fmt_q(&f_cap)
                    ),
                });
            }
        }
        for (i, b) in grid.iter().enumerate() {
            for u in &grid[i + 1..] {
                let g = self.g(*b, *u);
                if g < Q::zero() || g >= self.explore_bound {
                    return Err(ConditionViolation {
                        key: "G",
                        message: format!(
                            "0 <= G(ub,u) < G0 violated at ({}, {}): G = {}",
                            fmt_q(b),
                            fmt_q(u),
                            fmt_q(&g)
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn require_valid(&self, agents: usize, extra: &[Q]) -> Result<()> {
        self.validate(agents, extra)
            .map_err(|v| PdlError::config(v.key, v.message))
    }

    /// Largest ε for which every clipped accept `min(ε^F, c_F)` with `F > 0`
    /// equals `ε^F`, over the given utilities.
    pub fn clip_free_epsilon(&self, utilities: &[Q]) -> f64 {
        let c = crate::numeric::to_f64(&self.clip);
        utilities
            .iter()
            .map(|u| crate::numeric::to_f64(&self.f(*u)))
            .filter(|f| *f > 0.0)
            .map(|f| c.powf(1.0 / f))
            .fold(1.0, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::q_int;

    #[test]
    fn defaults_satisfy_condition_with_equality() {
        let p = PolicyParams::default();
        assert!(p.validate(2, &[]).is_ok());
        assert_eq!(p.accept_bound + p.explore_bound, q_int(1));
        assert_eq!(p.f(q(4, 5)), q(9, 100));
        assert_eq!(p.g(q(2, 5), q(3, 5)), q(21, 50));
    }

    #[test]
    fn bound_sum_violation_names_the_condition() {
        let p = PolicyParams {
            accept_bound: q(7, 10),
            ..PolicyParams::default()
        };
        let err = p.validate(2, &[]).unwrap_err();
        assert!(err.message.contains("F0 + G0 \\le 1"));
    }

    #[test]
    fn f_above_share_is_rejected() {
        let p = PolicyParams::default();
        assert_eq!(p.validate(3, &[]).unwrap_err().key, "F");
    }

    #[test]
    fn arguments_are_clamped() {
        let p = PolicyParams::default();
        assert_eq!(p.f(q(11, 10)), p.f(q_int(1)));
        assert_eq!(p.f(q(-1, 10)), p.f(Q::zero()));
    }

    #[test]
    fn tabulated_forms_interpolate() {
        let f = AcceptCost::Table {
            table: vec![(Q::zero(), q(1, 4)), (q_int(1), q(1, 20))],
        };
        assert_eq!(f.eval(q(1, 2)), q(3, 20));
        let g = ExploreCost::Table {
            benchmarks: vec![Q::zero(), q_int(1)],
            observed: vec![Q::zero(), q_int(1)],
            values: vec![vec![q(1, 2), Q::zero()], vec![q(1, 2), q(1, 2)]],
        };
        assert_eq!(g.eval(Q::zero(), q_int(1)), Q::zero());
        assert_eq!(g.eval(q(1, 2), q(1, 2)), q(3, 8));
    }

    #[test]
    fn json_roundtrip() {
        let p = PolicyParams::default();
        let s = serde_json::to_string(&p).unwrap();
        let back: PolicyParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let literal: PolicyParams = serde_json::from_str(
            r#"{"F":{"phi":0.25,"psi":0.2},"G":{"phi":0.5,"psi":0.4},"c_F":0.95,"F0":0.5,"G0":0.5}"#,
        )
        .unwrap();
        assert_eq!(literal, p);
    }

    #[test]
    fn clip_free_range() {
        let p = PolicyParams::default();
        let eps = p.clip_free_epsilon(&[q_int(1)]);
        assert!((eps - 0.95f64.powf(20.0)).abs() < 1e-12);
    }
}
