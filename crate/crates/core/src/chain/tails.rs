//! Distribution of the bin of a period mean `U^(τ) = (1/τ) Σ U_k`.

use num_integer::Integer;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{PdlError, Result};
use crate::game::{Quantization, UtilityModel};
use crate::numeric::{to_f64, Q};

/// Largest common grid denominator for exact convolution.
pub const MAX_GRID: i128 = 64;
/// Longest period for exact convolution.
pub const MAX_EXACT_TAU: usize = 512;
pub const MC_DRAWS: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub enum TailMethod {
    Exact,
    MonteCarlo { draws: u64, half_width: f64 },
}

/// Log-probabilities of every bin `0..=K`.
#[derive(Clone, Debug)]
pub struct BinDistribution {
    pub log_probs: Vec<f64>,
    pub method: TailMethod,
}

impl BinDistribution {
    pub fn prob(&self, bin: u32) -> f64 {
        self.log_probs.get(bin as usize).map_or(0.0, |l| l.exp())
    }

    pub fn log_prob(&self, bin: u32) -> f64 {
        self.log_probs.get(bin as usize).copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// `(bin, probability)` for bins of positive probability.
    pub fn support(&self) -> Vec<(u32, f64)> {
        self.log_probs
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_finite())
            .map(|(b, l)| (b as u32, l.exp()))
            .filter(|(_, p)| *p > 0.0)
            .collect()
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Common denominator of the support values, if at most [`MAX_GRID`].
fn common_grid(support: &[(Q, Q)]) -> Option<i128> {
    let mut l: i128 = 1;
    for (v, _) in support {
        l = l.lcm(v.denom());
        if l > MAX_GRID {
            return None;
        }
    }
    Some(l)
}

/// Bin of `sum / (τ L)` in exact integer arithmetic.
fn bin_of_sum(sum: i128, tau: usize, grid: i128, quant: &Quantization) -> u32 {
    let k = quant.top() as i128;
    ((sum * k) / (tau as i128 * grid)).min(k) as u32
}

/// Exact log-space τ-fold convolution when possible; Monte Carlo otherwise
/// (only when `mc_seed` is given).
pub fn bin_distribution(model: &UtilityModel, tau: usize, quant: &Quantization, mc_seed: Option<u64>) -> Result<BinDistribution> {
    if tau == 0 {
        return Err(PdlError::input("period length must be positive"));
    }
    let support = model.support();
    match common_grid(&support) {
        Some(grid) if tau <= MAX_EXACT_TAU => Ok(exact(&support, tau, grid, quant)),
        _ => match mc_seed {
            Some(seed) => Ok(monte_carlo(&support, tau, quant, seed)),
            None => Err(PdlError::input("no common grid for exact tails and Monte Carlo disabled")),
        },
    }
}

fn exact(support: &[(Q, Q)], tau: usize, grid: i128, quant: &Quantization) -> BinDistribution {
    let steps: Vec<(usize, f64)> = support
        .iter()
        .map(|(v, w)| ((*v * Q::from_integer(grid)).to_integer() as usize, to_f64(w).ln()))
        .collect();
    let width = grid as usize * tau + 1;
    let mut dp = vec![f64::NEG_INFINITY; width];
    dp[0] = 0.0;
    let mut reach = 0usize;
    let max_step = steps.iter().map(|s| s.0).max().unwrap_or(0);
    for _ in 0..tau {
        let mut next = vec![f64::NEG_INFINITY; width];
        for s in 0..=reach {
            let base = dp[s];
            if base == f64::NEG_INFINITY {
                continue;
            }
            for (j, lw) in &steps {
                let t = s + j;
                next[t] = log_add(next[t], base + lw);
            }
        }
        reach += max_step;
        dp = next;
    }
    let mut log_probs = vec![f64::NEG_INFINITY; quant.top() as usize + 1];
    for (s, l) in dp.iter().enumerate() {
        if *l > f64::NEG_INFINITY {
            let b = bin_of_sum(s as i128, tau, grid, quant) as usize;
            log_probs[b] = log_add(log_probs[b], *l);
        }
    }
    BinDistribution {
        log_probs,
        method: TailMethod::Exact,
    }
}

/// Draws `Σ_k U_k` over a period via multinomial support counts.
pub fn sample_period_sum<R: Rng + ?Sized>(support: &[(Q, Q)], tau: usize, rng: &mut R) -> Q {
    let mut remaining = tau as u64;
    let mut mass_left = 1.0f64;
    let mut sum = Q::zero();
    for (k, (v, w)) in support.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let count = if k + 1 == support.len() {
            remaining
        } else {
            let p = (to_f64(w) / mass_left).clamp(0.0, 1.0);
            Binomial::new(remaining, p).expect("valid binomial").sample(rng)
        };
        sum += *v * Q::from_integer(count as i128);
        remaining -= count;
        mass_left -= to_f64(w);
    }
    sum
}

/// Bin of one simulated period mean.
pub fn sample_period_bin<R: Rng + ?Sized>(support: &[(Q, Q)], tau: usize, quant: &Quantization, rng: &mut R) -> u32 {
    let mean = sample_period_sum(support, tau, rng) / Q::from_integer(tau as i128);
    let k = quant.top() as i128;
    (mean * Q::from_integer(k)).floor().to_integer().clamp(0, k) as u32
}

fn monte_carlo(support: &[(Q, Q)], tau: usize, quant: &Quantization, seed: u64) -> BinDistribution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; quant.top() as usize + 1];
    for _ in 0..MC_DRAWS {
        counts[sample_period_bin(support, tau, quant, &mut rng) as usize] += 1;
    }
    let n = MC_DRAWS as f64;
    let half_width = counts
        .iter()
        .map(|c| {
            let p = *c as f64 / n;
            1.96 * (p * (1.0 - p) / n).sqrt()
        })
        .fold(0.0, f64::max);
    BinDistribution {
        log_probs: counts.iter().map(|c| (*c as f64 / n).ln()).collect(),
        method: TailMethod::MonteCarlo {
            draws: MC_DRAWS,
            half_width,
        },
    }
}

/// `P(U^(τ) ∈ bin)`.
pub fn observation_tail(model: &UtilityModel, tau: usize, bin: u32, quant: &Quantization) -> Result<f64> {
    if bin > quant.top() {
        return Err(PdlError::input(format!("bin {bin} beyond the top bin")));
    }
    Ok(bin_distribution(model, tau, quant, Some(0))?.prob(bin))
}

/// `ln P(U^(τ) ∈ bin)`, exact only.
pub fn log_observation_tail(model: &UtilityModel, tau: usize, bin: u32, quant: &Quantization) -> Result<f64> {
    Ok(bin_distribution(model, tau, quant, None)?.log_prob(bin))
}
