//! Stationary distributions by Grassmann-Taksar-Heyman elimination.

use thiserror::Error;

use super::scc::classes_of_dense;

pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Stationary {
    /// Full-length vector; zero off the closed class.
    pub pi: Vec<f64>,
    pub support: Vec<usize>,
    /// `‖πP − π‖∞`.
    pub residual: f64,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum StationaryError {
    #[error("{} closed classes; the stationary distribution is not unique", .0.len())]
    MultipleClosedClasses(Vec<Vec<usize>>),
    #[error("row {row} sums to {sum}")]
    NotStochastic { row: usize, sum: f64 },
    #[error("residual {0:e} exceeds tolerance")]
    Residual(f64),
}

/// GTH on an irreducible stochastic matrix; no subtractions, so it stays
/// accurate for nearly decomposable chains.
pub fn gth(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    if n == 0 {
        return Vec::new();
    }
    let mut a: Vec<Vec<f64>> = p.to_vec();
    for k in (1..n).rev() {
        let s: f64 = a[k][..k].iter().sum();
        if s <= 0.0 {
            // state k cannot leave to lower indices; treat as a sink
            continue;
        }
        for row in a.iter_mut().take(k) {
            row[k] /= s;
        }
        for i in 0..k {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..k {
                let akj = a[k][j];
                a[i][j] += aik * akj;
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * a[i][k]).sum();
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    pi
}

pub fn residual(p: &[Vec<f64>], pi: &[f64]) -> f64 {
    let n = p.len();
    (0..n)
        .map(|j| ((0..n).map(|i| pi[i] * p[i][j]).sum::<f64>() - pi[j]).abs())
        .fold(0.0, f64::max)
}

/// Unique stationary distribution of a chain with one closed class.
pub fn stationary_distribution(p: &[Vec<f64>]) -> Result<Stationary, StationaryError> {
    for (row, r) in p.iter().enumerate() {
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(StationaryError::NotStochastic { row, sum });
        }
    }
    let classes = classes_of_dense(p);
    let closed: Vec<Vec<usize>> = classes.recurrent_classes().map(|c| classes.members[c].clone()).collect();
    if closed.len() != 1 {
        return Err(StationaryError::MultipleClosedClasses(closed));
    }
    let support = closed.into_iter().next().unwrap();
    let sub: Vec<Vec<f64>> = support.iter().map(|&i| support.iter().map(|&j| p[i][j]).collect()).collect();
    let local = gth(&sub);
    let mut pi = vec![0.0; p.len()];
    for (k, &i) in support.iter().enumerate() {
        pi[i] = local[k];
    }
    let res = residual(p, &pi);
    if res > RESIDUAL_TOLERANCE {
        return Err(StationaryError::Residual(res));
    }
    Ok(Stationary {
        pi,
        support,
        residual: res,
    })
}

/// Probability of ending in each closed class from `start`, by eliminating
/// transient states one at a time; like GTH it never subtracts.
fn absorption_weights(p: &[Vec<f64>], class_of: &[usize], closed: &[usize], start: usize) -> Vec<f64> {
    if let Some(k) = closed.iter().position(|&c| c == class_of[start]) {
        let mut w = vec![0.0; closed.len()];
        w[k] = 1.0;
        return w;
    }
    let column = |i: usize| closed.iter().position(|&c| c == class_of[i]);
    let transient: Vec<usize> = (0..p.len()).filter(|&i| column(i).is_none()).collect();
    let t = transient.len();
    let mut slot = vec![usize::MAX; p.len()];
    for (k, &i) in transient.iter().enumerate() {
        slot[i] = k;
    }
    // columns 0..t transient, then one per closed class; self-loops dropped
    let mut a = vec![vec![0.0; t + closed.len()]; t];
    for (r, &i) in transient.iter().enumerate() {
        for (j, &x) in p[i].iter().enumerate() {
            if x == 0.0 || j == i {
                continue;
            }
            match column(j) {
                Some(c) => a[r][t + c] += x,
                None => a[r][slot[j]] += x,
            }
        }
    }
    let s0 = slot[start];
    for k in (0..t).rev() {
        if k == s0 {
            continue;
        }
        let out: f64 = a[k].iter().enumerate().filter(|(j, _)| *j != k).map(|(_, x)| x).sum();
        if out <= 0.0 {
            continue;
        }
        let row_k = std::mem::take(&mut a[k]);
        for (r, row) in a.iter_mut().enumerate() {
            if r == k || row.is_empty() || row[k] == 0.0 {
                continue;
            }
            let share = row[k] / out;
            row[k] = 0.0;
            for (j, x) in row_k.iter().enumerate() {
                if j != k && *x != 0.0 {
                    row[j] += share * x;
                }
            }
            row[r] = 0.0;
        }
    }
    let exits = &a[s0][t..];
    let total: f64 = exits.iter().sum();
    exits.iter().map(|x| x / total).collect()
}

/// Long-run distribution from `start`: each closed class contributes its
/// stationary vector weighted by the probability of being absorbed there.
pub fn limit_distribution(p: &[Vec<f64>], start: usize) -> Result<Vec<f64>, StationaryError> {
    for (row, r) in p.iter().enumerate() {
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(StationaryError::NotStochastic { row, sum });
        }
    }
    let n = p.len();
    let classes = classes_of_dense(p);
    let closed: Vec<usize> = classes.recurrent_classes().collect();
    let weights = absorption_weights(p, &classes.class_of, &closed, start);
    let mut pi = vec![0.0; n];
    for (&c, weight) in closed.iter().zip(weights) {
        let members = &classes.members[c];
        if weight == 0.0 {
            continue;
        }
        let sub: Vec<Vec<f64>> = members.iter().map(|&i| members.iter().map(|&j| p[i][j]).collect()).collect();
        for (k, x) in gth(&sub).into_iter().enumerate() {
            pi[members[k]] += weight * x;
        }
    }
    let res = residual(p, &pi);
    if res > RESIDUAL_TOLERANCE || (pi.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(StationaryError::Residual(res));
    }
    Ok(pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_state_closed_form() {
        let (a, b) = (0.3, 0.1);
        let s = stationary_distribution(&[vec![1.0 - a, a], vec![b, 1.0 - b]]).unwrap();
        assert!((s.pi[0] - b / (a + b)).abs() < 1e-15);
    }

    #[test]
    fn transient_states_get_zero() {
        let p = vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.2, 0.8], vec![0.0, 0.6, 0.4]];
        let s = stationary_distribution(&p).unwrap();
        assert_eq!(s.pi[0], 0.0);
        assert_eq!(s.support, vec![1, 2]);
        assert!((s.pi[1] - 0.6 / 1.4).abs() < 1e-14);
    }

    #[test]
    fn two_absorbing_states_are_reported() {
        let p = vec![vec![1.0, 0.0, 0.0], vec![0.3, 0.4, 0.3], vec![0.0, 0.0, 1.0]];
        assert_eq!(
            stationary_distribution(&p).unwrap_err(),
            StationaryError::MultipleClosedClasses(vec![vec![0], vec![2]])
        );
    }

    #[test]
    fn limit_splits_by_absorption() {
        let p = vec![vec![1.0, 0.0, 0.0], vec![0.3, 0.4, 0.3], vec![0.0, 0.0, 1.0]];
        let pi = limit_distribution(&p, 1).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-14 && (pi[2] - 0.5).abs() < 1e-14);
        assert_eq!(limit_distribution(&p, 2).unwrap(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn limit_matches_unique_stationary() {
        let p = vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.2, 0.8], vec![0.0, 0.6, 0.4]];
        let pi = limit_distribution(&p, 0).unwrap();
        let st = stationary_distribution(&p).unwrap();
        for (a, b) in pi.iter().zip(&st.pi) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn nearly_decomposable_stays_accurate() {
        let e = 1e-14;
        let p = vec![vec![1.0 - e, e], vec![2.0 * e, 1.0 - 2.0 * e]];
        let s = stationary_distribution(&p).unwrap();
        assert!((s.pi[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn random_positive_matrices(raw in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 6), 6)) {
            let p: Vec<Vec<f64>> = raw.iter().map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(|x| x / s).collect()
            }).collect();
            let s = stationary_distribution(&p).unwrap();
            prop_assert!(s.residual <= RESIDUAL_TOLERANCE);
            prop_assert!((s.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
