//! Offline comparators: the best fixed profile in hindsight and the per-epoch optimum.

use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::maps::{capped_gibbs_map, gibbs_map, matrix_gibbs_map};
use crate::rate::{gradient_matrices, rate, ChannelEpoch, ConstraintSet, PowerMode, TransmitProfile};

use super::waterfill::best_response;

/// A concave function of one profile per user.
pub trait Objective {
    fn constraints(&self) -> &[ConstraintSet];

    fn value(&self, profiles: &[TransmitProfile]) -> Result<f64>;

    /// `∂/∂P_{s,k}` for every user `s` and carrier `k`.
    fn gradients(&self, profiles: &[TransmitProfile]) -> Result<Vec<Vec<HermitianMatrix>>>;

    /// Divisor that turns the objective into a per-epoch average.
    fn scale(&self) -> f64 {
        1.0
    }
}

/// `Σ_t Φ(P; t)` for one user over a recorded channel sequence.
pub struct Hindsight<'a> {
    epochs: &'a [ChannelEpoch],
    constraints: [ConstraintSet; 1],
}

impl<'a> Hindsight<'a> {
    pub fn new(epochs: &'a [ChannelEpoch], constraints: &ConstraintSet) -> Result<Self> {
        if epochs.is_empty() {
            return Err(Error::InvalidInput("no epochs to optimise over".into()));
        }
        Ok(Self {
            epochs,
            constraints: [constraints.clone()],
        })
    }
}

impl Objective for Hindsight<'_> {
    fn constraints(&self) -> &[ConstraintSet] {
        &self.constraints
    }

    fn value(&self, profiles: &[TransmitProfile]) -> Result<f64> {
        self.epochs.iter().map(|e| rate(&profiles[0], e)).sum()
    }

    fn gradients(&self, profiles: &[TransmitProfile]) -> Result<Vec<Vec<HermitianMatrix>>> {
        let k = self.constraints[0].carriers();
        let mut acc: Vec<HermitianMatrix> = self.constraints[0]
            .open_dims()
            .into_iter()
            .map(HermitianMatrix::zeros)
            .collect();
        for e in self.epochs {
            let g = gradient_matrices(&profiles[0], e)?;
            for i in 0..k {
                acc[i] += &g[i];
            }
        }
        Ok(vec![acc])
    }

    fn scale(&self) -> f64 {
        self.epochs.len() as f64
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    pub max_iterations: usize,
    /// Target Frank–Wolfe gap, per unit of [`Objective::scale`].
    pub tolerance: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100_000,
            tolerance: 1e-5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub profiles: Vec<TransmitProfile>,
    pub value: f64,
    /// Certified bound on `max − value`, per unit of scale.
    pub gap: f64,
    pub iterations: usize,
}

/// `max_{P₀ ∈ X} Σ_k tr(G_k P₀_k)`: fill the carriers with the largest top
/// eigenvalue first, up to their caps.
pub fn linear_maximum(gradients: &[HermitianMatrix], constraints: &ConstraintSet) -> Result<f64> {
    let mut tops = gradients
        .iter()
        .map(|g| Ok(g.eigh()?.max()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .zip(constraints.caps().iter().copied())
        .collect::<Vec<_>>();
    tops.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut left = constraints.total_power();
    let mut best = 0.0;
    for (top, cap) in tops {
        let p = cap.min(left);
        best += p * top;
        left -= p;
        if left <= 0.0 {
            break;
        }
    }
    Ok(best)
}

/// `max_{X} ⟨∇f(P), P₀ − P⟩`, an upper bound on `f* − f(P)` for concave `f`.
pub fn frank_wolfe_gap(
    gradients: &[Vec<HermitianMatrix>],
    profiles: &[TransmitProfile],
    constraints: &[ConstraintSet],
) -> Result<f64> {
    let mut gap = 0.0;
    for ((g, p), cs) in gradients.iter().zip(profiles).zip(constraints) {
        let current: f64 = (0..cs.carriers()).map(|k| g[k].inner(&p.carrier_covariance(k))).sum();
        gap += linear_maximum(g, cs)? - current;
    }
    Ok(gap.max(0.0))
}

const MAX_STEP_FACTOR: f64 = 4.0;
const ROUNDOFF: f64 = 1e-15;

struct Scores {
    power: Vec<Vec<f64>>,
    covariance: Vec<Vec<HermitianMatrix>>,
}

fn profiles_from(scores: &Scores, constraints: &[ConstraintSet]) -> Result<Vec<TransmitProfile>> {
    constraints
        .iter()
        .enumerate()
        .map(|(s, cs)| {
            let budget = cs.total_power();
            let powers = match cs.mode() {
                PowerMode::Simple => gibbs_map(&scores.power[s])?
                    .into_inner()
                    .into_iter()
                    .map(|q| q * budget)
                    .collect(),
                PowerMode::Capped => capped_gibbs_map(&scores.power[s], cs.caps(), budget)?.powers,
            };
            let covs = scores.covariance[s]
                .iter()
                .map(matrix_gibbs_map)
                .collect::<Result<Vec<_>>>()?;
            TransmitProfile::new(powers, covs, cs)
        })
        .collect()
}

/// Maximises a concave objective over the product of the users' feasible
/// sets by entropic mirror ascent with an adaptive step, stopping once the
/// Frank–Wolfe gap certifies the tolerance.
pub fn maximize(objective: &dyn Objective, options: OracleOptions) -> Result<OracleSolution> {
    let cons = objective.constraints();
    let mut scores = Scores {
        power: cons.iter().map(|c| vec![0.0; c.carriers()]).collect(),
        covariance: cons
            .iter()
            .map(|c| c.open_dims().into_iter().map(HermitianMatrix::zeros).collect())
            .collect(),
    };
    let mut profiles = profiles_from(&scores, cons)?;
    let mut value = objective.value(&profiles)?;
    let mut grads = objective.gradients(&profiles)?;
    let norm = objective.scale();

    let gmax = grads
        .iter()
        .flatten()
        .map(|g| g.spectral_norm())
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let pmax = cons.iter().map(|c| c.total_power()).fold(0.0, f64::max);
    // Unbounded growth lets one long step starve a carrier or eigenmode,
    // which multiplicative updates then revive only very slowly.
    let max_step = if gmax > 0.0 { MAX_STEP_FACTOR / (pmax * gmax) } else { 1.0 };
    let mut step = max_step / MAX_STEP_FACTOR;

    let mut gap = frank_wolfe_gap(&grads, &profiles, cons)? / norm;
    let mut iterations = 0;
    while gap > options.tolerance {
        if iterations >= options.max_iterations || step < 1e-300 {
            return Err(Error::NotConverged { iterations, gap });
        }
        iterations += 1;
        let trial = Scores {
            power: scores
                .power
                .iter()
                .enumerate()
                .map(|(s, y)| {
                    let budget = cons[s].total_power();
                    y.iter()
                        .enumerate()
                        .map(|(k, v)| v + step * budget * grads[s][k].inner(profiles[s].covariances()[k].as_hermitian()))
                        .collect()
                })
                .collect(),
            covariance: scores
                .covariance
                .iter()
                .enumerate()
                .map(|(s, ys)| {
                    // Not weighted by p_k: a starved carrier must still learn
                    // its best directions or its marginal value stays too low.
                    let budget = cons[s].total_power();
                    ys.iter()
                        .enumerate()
                        .map(|(k, y)| y + &grads[s][k].scale(step * budget))
                        .collect()
                })
                .collect(),
        };
        let candidate = profiles_from(&trial, cons)?;
        let cand_value = objective.value(&candidate)?;
        if cand_value >= value - ROUNDOFF * value.abs() {
            scores = trial;
            profiles = candidate;
            value = cand_value;
            grads = objective.gradients(&profiles)?;
            gap = frank_wolfe_gap(&grads, &profiles, cons)? / norm;
            step = (step * 1.5).min(max_step);
        } else {
            step *= 0.5;
        }
    }
    Ok(OracleSolution {
        profiles,
        value,
        gap,
        iterations,
    })
}

/// Best fixed profile for one user over a recorded channel sequence.
pub fn best_fixed_oracle(
    epochs: &[ChannelEpoch],
    constraints: &ConstraintSet,
    options: OracleOptions,
) -> Result<OracleSolution> {
    maximize(&Hindsight::new(epochs, constraints)?, options)
}

/// Rate-maximising profile for a single epoch, by exact water-filling.
pub fn instantaneous_optimum(epoch: &ChannelEpoch, constraints: &ConstraintSet) -> Result<(TransmitProfile, f64)> {
    best_response(epoch, constraints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::{CMatrix, C64};
    use crate::policies::baselines::benchmark_set;
    use crate::rate::test_support::{random_matrix, random_profile};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_single_epoch_is_full_power() {
        let cs = ConstraintSet::unconstrained(1, 1, 2.0).unwrap();
        let e = ChannelEpoch::new(0, vec![CMatrix::from_element(1, 1, C64::new(1.5, 0.0))]).unwrap();
        let sol = best_fixed_oracle(&[e], &cs, OracleOptions::default()).unwrap();
        assert!((sol.value - (1.0f64 + 2.25 * 2.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn single_epoch_matches_water_filling() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for caps in [vec![1.0; 3], vec![0.5, 0.4, 0.3]] {
            for _ in 0..5 {
                let cs = ConstraintSet::new(1.0, caps.clone(), vec![CMatrix::identity(2, 2); 3]).unwrap();
                let e = ChannelEpoch::new(0, (0..3).map(|_| random_matrix(2, 2, &mut rng)).collect()).unwrap();
                let (_, wf) = instantaneous_optimum(&e, &cs).unwrap();
                let sol = best_fixed_oracle(std::slice::from_ref(&e), &cs, OracleOptions::default()).unwrap();
                assert!(sol.gap <= 1e-5);
                assert!(sol.value <= wf + 1e-10);
                assert!(wf - sol.value <= 1e-5, "{} vs {}", sol.value, wf);
            }
        }
    }

    #[test]
    fn constant_channels_match_per_epoch_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cs = ConstraintSet::unconstrained(2, 2, 1.0).unwrap();
        let e = ChannelEpoch::new(0, (0..2).map(|_| random_matrix(3, 2, &mut rng)).collect()).unwrap();
        let epochs = vec![e.clone(); 10];
        let (_, wf) = instantaneous_optimum(&e, &cs).unwrap();
        let sol = best_fixed_oracle(&epochs, &cs, OracleOptions::default()).unwrap();
        assert!((sol.value / 10.0 - wf).abs() <= 1e-5);
    }

    #[test]
    fn oracle_dominates_benchmarks_and_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cs = ConstraintSet::unconstrained(3, 3, 1.0).unwrap();
        let epochs: Vec<ChannelEpoch> = (0..20)
            .map(|t| ChannelEpoch::new(t, (0..3).map(|_| random_matrix(2, 3, &mut rng)).collect()).unwrap())
            .collect();
        let sol = best_fixed_oracle(&epochs, &cs, OracleOptions::default()).unwrap();
        let obj = Hindsight::new(&epochs, &cs).unwrap();
        for b in benchmark_set(&cs).unwrap() {
            assert!(obj.value(&[b.profile]).unwrap() <= sol.value + 1e-9);
        }
        for _ in 0..50 {
            assert!(obj.value(&[random_profile(&cs, &mut rng)]).unwrap() <= sol.value + 1e-9);
        }
    }

    #[test]
    fn linear_maximum_fills_best_carriers() {
        let cs = ConstraintSet::new(1.0, vec![0.5, 0.3, 1.0], vec![CMatrix::identity(2, 2); 3]).unwrap();
        let g = vec![
            HermitianMatrix::from_real_diagonal(&[1.0, 3.0]),
            HermitianMatrix::from_real_diagonal(&[5.0, 0.0]),
            HermitianMatrix::from_real_diagonal(&[2.0, 2.0]),
        ];
        // 0.3·5 + 0.5·3 + 0.2·2.
        assert!((linear_maximum(&g, &cs).unwrap() - 3.4).abs() < 1e-12);
    }

    #[test]
    fn iteration_limit_reports_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cs = ConstraintSet::unconstrained(3, 2, 1.0).unwrap();
        let e = ChannelEpoch::new(0, (0..3).map(|_| random_matrix(2, 2, &mut rng)).collect()).unwrap();
        let opts = OracleOptions { max_iterations: 1, tolerance: 1e-12 };
        match best_fixed_oracle(&[e], &cs, opts) {
            Err(Error::NotConverged { iterations, gap }) => {
                assert_eq!(iterations, 1);
                assert!(gap > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
