//! Reference games used by tests, the acceptance suite and `pdl fixtures`.

use super::{GameSpec, UtilityModel};
use crate::numeric::{q, q_from_f64, Q};

fn two_by_two(u1: [[f64; 2]; 2], u2: [[f64; 2]; 2]) -> GameSpec {
    let flat = |u: [[f64; 2]; 2]| vec![u[0][0], u[0][1], u[1][0], u[1][1]];
    GameSpec::from_tables(vec![2, 2], &[flat(u1), flat(u2)]).expect("fixture is valid")
}

/// Unique equilibrium at (1,1), no optimal profile.
pub fn g1() -> GameSpec {
    two_by_two([[0.4, 0.2], [0.6, 0.8]], [[0.4, 0.6], [0.2, 0.8]])
}

/// Cyclic best responses: no pure equilibrium.
pub fn g2() -> GameSpec {
    two_by_two([[0.8, 0.2], [0.3, 0.6]], [[0.3, 0.7], [0.8, 0.4]])
}

/// Prisoner's dilemma: the welfare maximizer (0,0) is not an equilibrium.
pub fn dilemma() -> GameSpec {
    two_by_two([[0.6, 0.1], [0.7, 0.3]], [[0.6, 0.7], [0.1, 0.3]])
}

/// Two equilibria; (0,0) is a deep non-optimal trap next to (1,1).
pub fn trap() -> GameSpec {
    two_by_two([[0.6, 0.2], [0.4, 0.8]], [[0.6, 0.4], [0.2, 0.8]])
}

/// Profile (0,0) gives every agent utility 1.
pub fn all_ones() -> GameSpec {
    two_by_two([[1.0, 0.2], [0.4, 0.6]], [[1.0, 0.4], [0.2, 0.6]])
}

/// Bernoulli utilities whose means are the utilities of [`g1`].
pub fn noisy_g1() -> GameSpec {
    let base = g1();
    let utilities = (0..2)
        .map(|i| {
            (0..base.profile_count())
                .map(|k| UtilityModel::bernoulli(base.utility_at(i, k).mean()).expect("mean in [0,1]"))
                .collect()
        })
        .collect();
    GameSpec::new(vec![2, 2], utilities).expect("fixture is valid")
}

/// G1-shaped game with means at the centres of quarter bins and symmetric
/// two-point noise of half a bin, sized for an exact numeric chain with
/// δ = 1/4.
pub fn ritel_small() -> GameSpec {
    let spread = q(1, 8);
    let noisy = |m: f64| {
        let m: Q = q_from_f64(m).expect("finite");
        UtilityModel::finite_support(vec![(m - spread, q(1, 2)), (m + spread, q(1, 2))]).expect("valid")
    };
    let means = [[0.375, 0.125, 0.625, 0.875], [0.375, 0.625, 0.125, 0.875]];
    let utilities = means
        .iter()
        .map(|row| row.iter().map(|m| noisy(*m)).collect())
        .collect();
    GameSpec::new(vec![2, 2], utilities).expect("fixture is valid")
}

/// Named fixtures dumped by the CLI.
pub fn all() -> Vec<(&'static str, GameSpec)> {
    vec![
        ("g1", g1()),
        ("g2", g2()),
        ("dilemma", dilemma()),
        ("trap", trap()),
        ("all_ones", all_ones()),
        ("noisy_g1", noisy_g1()),
        ("ritel_small", ritel_small()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    #[test]
    fn fixture_shapes() {
        assert!(g2().check_interdependence().is_ok());
        assert!(g2().find_rho_equilibria(Q::zero()).is_empty());
        assert_eq!(dilemma().find_rho_equilibria(Q::zero()), vec![vec![1, 1]]);
        assert_eq!(trap().find_rho_equilibria(Q::zero()), vec![vec![0, 0], vec![1, 1]]);
        assert!(all_ones().is_optimal_within(&[0, 0], Q::zero()));
        assert_eq!(noisy_g1().mean_utility(0, &[1, 1]).unwrap(), q(4, 5));
        assert_eq!(ritel_small().mean_utility(1, &[1, 1]).unwrap(), q(7, 8));
        for (_, g) in all() {
            assert!(g.check_interdependence().is_ok());
        }
    }
}
