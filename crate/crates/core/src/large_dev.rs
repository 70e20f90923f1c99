//! Cramér rate functions and resistances of period-mean observations.

use serde::Serialize;
use thiserror::Error;

use crate::chain::tails::log_observation_tail;
use crate::error::{PdlError, Result};
use crate::game::{Quantization, UtilityModel};
use crate::numeric::to_f64;
use crate::policy::period_length;

const MAX_SLOPE: f64 = 1e8;
const BISECTION_STEPS: usize = 300;

#[derive(Clone, Debug, PartialEq, Error)]
#[error("Legendre maximization did not converge for x = {x}: bracket [{lo}, {hi}]")]
pub struct NonConvergence {
    pub x: f64,
    pub lo: f64,
    pub hi: f64,
}

impl From<NonConvergence> for PdlError {
    fn from(e: NonConvergence) -> Self {
        PdlError::internal(e.to_string())
    }
}

/// Distribution of one observed utility.
#[derive(Clone, Debug, PartialEq)]
pub enum Distribution {
    /// `(value, weight)` with positive weights summing to one.
    Finite(Vec<(f64, f64)>),
    /// Validation family only; never a game utility.
    Gaussian { mean: f64, variance: f64 },
}

impl Distribution {
    pub fn from_model(model: &UtilityModel) -> Self {
        Distribution::Finite(model.support().iter().map(|(v, w)| (to_f64(v), to_f64(w))).collect())
    }

    pub fn bernoulli(p: f64) -> Self {
        let mut pts = Vec::new();
        if p < 1.0 {
            pts.push((0.0, 1.0 - p));
        }
        if p > 0.0 {
            pts.push((1.0, p));
        }
        Distribution::Finite(pts)
    }

    pub fn point_mass(x: f64) -> Self {
        Distribution::Finite(vec![(x, 1.0)])
    }

    pub fn gaussian(mean: f64, variance: f64) -> Self {
        Distribution::Gaussian { mean, variance }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Finite(p) => p.iter().map(|(v, w)| v * w).sum(),
            Distribution::Gaussian { mean, .. } => *mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Distribution::Finite(p) => {
                let m = self.mean();
                p.iter().map(|(v, w)| w * (v - m).powi(2)).sum()
            }
            Distribution::Gaussian { variance, .. } => *variance,
        }
    }

    /// Essential range.
    pub fn support_edges(&self) -> (f64, f64) {
        match self {
            Distribution::Finite(p) => (
                p.iter().map(|e| e.0).fold(f64::INFINITY, f64::min),
                p.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max),
            ),
            Distribution::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn is_degenerate(&self) -> bool {
        match self {
            Distribution::Finite(p) => p.len() == 1,
            Distribution::Gaussian { variance, .. } => *variance == 0.0,
        }
    }

    fn mass_at(&self, x: f64) -> f64 {
        match self {
            Distribution::Finite(p) => p.iter().filter(|e| e.0 == x).map(|e| e.1).sum(),
            Distribution::Gaussian { .. } => 0.0,
        }
    }

    /// `Λ(t) = log E[exp(tU)]`.
    pub fn lmgf(&self, t: f64) -> f64 {
        match self {
            Distribution::Finite(p) => {
                let m = p.iter().map(|(v, _)| t * v).fold(f64::NEG_INFINITY, f64::max);
                m + p.iter().map(|(v, w)| w * (t * v - m).exp()).sum::<f64>().ln()
            }
            Distribution::Gaussian { mean, variance } => mean * t + variance * t * t / 2.0,
        }
    }

    /// `Λ'(t)`, the mean of the exponentially tilted law.
    pub fn lmgf_slope(&self, t: f64) -> f64 {
        match self {
            Distribution::Finite(p) => {
                let m = p.iter().map(|(v, _)| t * v).fold(f64::NEG_INFINITY, f64::max);
                let (num, den) = p.iter().fold((0.0, 0.0), |(a, b), (v, w)| {
                    let e = w * (t * v - m).exp();
                    (a + v * e, b + e)
                });
                num / den
            }
            Distribution::Gaussian { mean, variance } => mean + variance * t,
        }
    }
}

/// Rate function `Λ*` of one distribution.
#[derive(Clone, Debug)]
pub struct RateFunction {
    pub dist: Distribution,
    pub mean: f64,
    pub support: (f64, f64),
}

impl RateFunction {
    pub fn new(dist: Distribution) -> Self {
        RateFunction {
            mean: dist.mean(),
            support: dist.support_edges(),
            dist,
        }
    }

    pub fn eval(&self, x: f64) -> std::result::Result<f64, NonConvergence> {
        legendre(&self.dist, x)
    }
}

/// `Λ*(x) = sup_t (tx − Λ(t))`.
pub fn legendre(dist: &Distribution, x: f64) -> std::result::Result<f64, NonConvergence> {
    let mu = dist.mean();
    let (lo, hi) = dist.support_edges();
    if x < lo || x > hi {
        return Ok(f64::INFINITY);
    }
    if dist.is_degenerate() || x == mu {
        return Ok(if x == mu { 0.0 } else { f64::INFINITY });
    }
    if x == hi || x == lo {
        return Ok(-dist.mass_at(x).ln());
    }
    let sign = if x > mu { 1.0 } else { -1.0 };
    let mut bound = 1.0;
    while sign * (dist.lmgf_slope(sign * bound) - x) < 0.0 {
        bound *= 2.0;
        if bound > MAX_SLOPE {
            return Err(NonConvergence {
                x,
                lo: 0.0,
                hi: sign * bound,
            });
        }
    }
    let (mut a, mut b) = (0.0f64, bound);
    for _ in 0..BISECTION_STEPS {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if sign * (dist.lmgf_slope(sign * m) - x) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let t = sign * 0.5 * (a + b);
    Ok((t * x - dist.lmgf(t)).max(0.0))
}

pub fn hoeffding_lower(x: f64, mu: f64) -> f64 {
    2.0 * (x - mu).powi(2)
}

pub fn bernstein_lower(x: f64, mu: f64, variance: f64) -> f64 {
    let d = (x - mu).abs();
    if d == 0.0 {
        return 0.0;
    }
    d * d / (2.0 * variance + 2.0 * d)
}

/// Resistance of a period mean landing in `bin`.
pub fn bin_resistance(dist: &Distribution, bin: u32, quant: &Quantization, tau0: f64) -> std::result::Result<f64, NonConvergence> {
    let lower = to_f64(&quant.lower(bin));
    let upper = to_f64(&quant.upper(bin));
    let mu = dist.mean();
    if mu >= lower && mu < upper {
        return Ok(0.0);
    }
    if dist.is_degenerate() {
        return Ok(f64::INFINITY);
    }
    let edge = if mu < lower { lower } else { upper };
    Ok(tau0 * legendre(dist, edge)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct SlopePoint {
    pub epsilon: f64,
    pub period: usize,
    pub log_probability: f64,
    /// `log P / log ε`; infinite when the bin is unreachable.
    pub slope: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateCheck {
    pub target: f64,
    pub points: Vec<SlopePoint>,
    /// Relative errors shrink along the grid as given.
    pub improving: bool,
}

impl RateCheck {
    pub fn relative_error(&self, k: usize) -> f64 {
        let s = self.points[k].slope;
        if self.target == 0.0 {
            s.abs()
        } else if self.target.is_infinite() && s.is_infinite() {
            0.0
        } else {
            (s - self.target).abs() / self.target
        }
    }
}

/// Slopes of exact tail probabilities against the predicted resistance.
pub fn empirical_rate_check(model: &UtilityModel, bin: u32, quant: &Quantization, tau0: f64, eps_grid: &[f64]) -> Result<RateCheck> {
    let dist = Distribution::from_model(model);
    let target = bin_resistance(&dist, bin, quant, tau0)?;
    let points = eps_grid
        .iter()
        .map(|&eps| {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(PdlError::config("grid", format!("epsilon {eps} outside (0,1)")));
            }
            let period = period_length(tau0, eps);
            let log_probability = log_observation_tail(model, period, bin, quant)?;
            Ok(SlopePoint {
                epsilon: eps,
                period,
                log_probability,
                slope: log_probability / eps.ln(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut check = RateCheck {
        target,
        points,
        improving: true,
    };
    check.improving = (1..check.points.len()).all(|k| check.relative_error(k) <= check.relative_error(k - 1));
    Ok(check)
}
