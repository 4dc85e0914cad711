//! Regret accounting, the no-regret bound and the efficiency ratio.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::policies::baselines::entropy_term;
use crate::rate::ConstraintSet;

/// Per-epoch payoffs of one user's policy and of its fixed benchmarks.
#[derive(Clone, Debug)]
pub struct RegretLedger {
    benchmarks: Vec<String>,
    policy: Vec<f64>,
    /// `comparators[b][t]`.
    comparators: Vec<Vec<f64>>,
    policy_total: f64,
    comparator_totals: Vec<f64>,
    gradient_bound: f64,
    noise_bound: f64,
    power: f64,
    eta: f64,
    entropy: f64,
    diameter: f64,
}

impl RegretLedger {
    pub fn new(benchmarks: Vec<String>, constraints: &ConstraintSet, eta: f64) -> Result<Self> {
        let entropy = entropy_term(&constraints.open_dims())?;
        Ok(Self {
            policy: Vec::new(),
            comparators: vec![Vec::new(); benchmarks.len()],
            comparator_totals: vec![0.0; benchmarks.len()],
            benchmarks,
            policy_total: 0.0,
            gradient_bound: 0.0,
            noise_bound: 0.0,
            power: constraints.total_power(),
            eta,
            entropy,
            diameter: constraints.diameter(),
        })
    }

    /// Records one epoch. `gradient_norm` is `max_k ‖M_k‖` of the true
    /// gradients and `noise_bound` the `Σ` in force for the observations.
    pub fn record(&mut self, policy: f64, comparators: &[f64], gradient_norm: f64, noise_bound: f64) -> Result<()> {
        if comparators.len() != self.benchmarks.len() {
            return Err(Error::dims(format!(
                "{} benchmark payoffs for {} benchmarks",
                comparators.len(),
                self.benchmarks.len()
            )));
        }
        self.policy.push(policy);
        self.policy_total += policy;
        for (b, &v) in comparators.iter().enumerate() {
            self.comparators[b].push(v);
            self.comparator_totals[b] += v;
        }
        self.gradient_bound = self.gradient_bound.max(gradient_norm);
        self.noise_bound = self.noise_bound.max(noise_bound);
        Ok(())
    }

    pub fn epochs(&self) -> usize {
        self.policy.len()
    }

    pub fn benchmarks(&self) -> &[String] {
        &self.benchmarks
    }

    pub fn policy_total(&self) -> f64 {
        self.policy_total
    }

    pub fn benchmark_total(&self, b: usize) -> f64 {
        self.comparator_totals[b]
    }

    /// Running `M` (plus `Σ` when observations are noisy).
    pub fn gradient_bound(&self) -> f64 {
        self.gradient_bound + self.noise_bound
    }

    pub fn noise_bound(&self) -> f64 {
        self.noise_bound
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// `Σ_{t ∈ epochs} [Φ(P₀;t) − Φ(P(t);t)]` over a zero-based epoch range.
    pub fn regret(&self, b: usize, epochs: Range<usize>) -> f64 {
        epochs.map(|t| self.comparators[b][t] - self.policy[t]).sum()
    }

    pub fn average_regret(&self, b: usize) -> Result<f64> {
        let t = self.epochs();
        if t == 0 {
            return Err(Error::InvalidInput("average regret of an empty ledger".into()));
        }
        Ok((self.comparator_totals[b] - self.policy_total) / t as f64)
    }

    /// Largest average regret over all benchmarks.
    pub fn max_average_regret(&self) -> Result<f64> {
        (0..self.benchmarks.len())
            .map(|b| self.average_regret(b))
            .try_fold(f64::NEG_INFINITY, |acc, r| Ok(acc.max(r?)))
    }

    /// `R = A/η + 4P²M²η` with the running `M`.
    pub fn bound_constant(&self) -> f64 {
        bound_constant(self.entropy, self.eta, self.power, self.gradient_bound())
    }

    /// `R/√T`.
    pub fn theoretical_bound(&self, epochs: usize) -> f64 {
        self.bound_constant() / (epochs.max(1) as f64).sqrt()
    }
}

/// `A/η + 4P²M²η`.
pub fn bound_constant(entropy: f64, eta: f64, power: f64, gradient_bound: f64) -> f64 {
    entropy / eta + 4.0 * (power * gradient_bound).powi(2) * eta
}

/// Normalised sum rate of a run of a static game.
#[derive(Clone, Debug, PartialEq)]
pub struct EfficiencyReport {
    pub sum_rates: Vec<f64>,
    pub psi_max: f64,
    pub psi_min: f64,
    pub efficiency: Vec<f64>,
    /// Number of feasible points examined for `psi_min`.
    pub vertex_samples: usize,
}

/// `eff(t) = (Ψ(t) − Ψ_min)/(Ψ_max − Ψ_min)`.
pub fn efficiency_series(sum_rates: &[f64], psi_max: f64, psi_min: f64, vertex_samples: usize) -> Result<EfficiencyReport> {
    let span = psi_max - psi_min;
    if !(span > 1e-12 * psi_max.abs().max(1.0)) {
        return Err(Error::DegenerateRatio { value: psi_max });
    }
    if let Some(bad) = sum_rates.iter().find(|&&v| v < psi_min - 1e-9 || v > psi_max + 1e-9) {
        return Err(Error::InvalidInput(format!(
            "sum rate {bad} outside [{psi_min}, {psi_max}]"
        )));
    }
    Ok(EfficiencyReport {
        sum_rates: sum_rates.to_vec(),
        psi_max,
        psi_min,
        efficiency: sum_rates.iter().map(|v| (v - psi_min) / span).collect(),
        vertex_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::optimal_eta;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ledger(benchmarks: usize) -> RegretLedger {
        let cs = ConstraintSet::unconstrained(2, 2, 1.0).unwrap();
        RegretLedger::new((0..benchmarks).map(|b| format!("b{b}")).collect(), &cs, 1.0).unwrap()
    }

    #[test]
    fn empty_ledger_has_no_average() {
        assert!(matches!(ledger(1).average_regret(0), Err(Error::InvalidInput(_))));
        assert!(ledger(1).record(1.0, &[1.0, 2.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn identical_streams_have_zero_regret() {
        let mut l = ledger(1);
        for _ in 0..10 {
            l.record(0.7, &[0.7], 1.0, 0.0).unwrap();
        }
        assert_eq!(l.average_regret(0).unwrap(), 0.0);
    }

    #[test]
    fn dominated_policy_regret_is_the_gap() {
        let mut l = ledger(1);
        for t in 0..20 {
            let v = (t as f64).sin();
            l.record(v, &[v + 0.25], 1.0, 0.0).unwrap();
        }
        assert!((l.average_regret(0).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn matches_naive_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut l = ledger(2);
        let (mut p, mut b) = (Vec::new(), Vec::new());
        for _ in 0..37 {
            let x = rng.gen_range(0.0..3.0);
            let y = rng.gen_range(0.0..3.0);
            p.push(x);
            b.push(y);
            l.record(x, &[y, 0.0], 1.0, 0.0).unwrap();
        }
        let naive = (b.iter().sum::<f64>() - p.iter().sum::<f64>()) / 37.0;
        assert!((l.average_regret(0).unwrap() - naive).abs() < 1e-12);
        assert_eq!(l.policy_total(), p.iter().fold(0.0, |a, x| a + x));
    }

    #[test]
    fn bound_examples() {
        let mut l = ledger(1);
        l.record(0.0, &[0.0], 1.0, 0.0).unwrap();
        let r = 3.0 * 2f64.ln() + 4.0;
        assert!((l.theoretical_bound(1) - r).abs() < 1e-12);
        assert!((l.theoretical_bound(100) - r / 10.0).abs() < 1e-12);
        assert!((r - 6.0794).abs() < 1e-4);

        let a = 3.0 * 2f64.ln();
        let eta = optimal_eta(1.0, 1.0, &[2, 2]).unwrap();
        let cs = ConstraintSet::unconstrained(2, 2, 1.0).unwrap();
        let mut l = RegretLedger::new(vec!["u".into()], &cs, eta).unwrap();
        l.record(0.0, &[0.0], 1.0, 0.0).unwrap();
        assert!((l.theoretical_bound(49) - 4.0 * a.sqrt() / 7.0).abs() < 1e-12);
    }

    #[test]
    fn noise_enlarges_the_gradient_bound() {
        let mut l = ledger(1);
        l.record(0.0, &[0.0], 1.0, 0.5).unwrap();
        l.record(0.0, &[0.0], 0.5, 0.25).unwrap();
        assert_eq!(l.gradient_bound(), 1.5);
    }

    #[test]
    fn efficiency_endpoints_and_degeneracy() {
        let r = efficiency_series(&[1.0, 2.0, 3.0], 3.0, 1.0, 10).unwrap();
        assert_eq!(r.efficiency, vec![0.0, 0.5, 1.0]);
        assert!(matches!(efficiency_series(&[1.0], 1.0, 1.0, 1), Err(Error::DegenerateRatio { .. })));
        assert!(efficiency_series(&[4.0], 3.0, 1.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn regret_is_additive(
            stream in proptest::collection::vec((0.0f64..5.0, 0.0f64..5.0), 1..60),
            split in 0.0f64..1.0,
        ) {
            let mut l = ledger(1);
            for (p, b) in &stream {
                l.record(*p, &[*b], 1.0, 0.0).unwrap();
            }
            let t = stream.len();
            let s = ((t as f64) * split) as usize;
            let whole = l.regret(0, 0..t);
            prop_assert!((whole - l.regret(0, 0..s) - l.regret(0, s..t)).abs() < 1e-9);
            prop_assert!((whole / t as f64 - l.average_regret(0).unwrap()).abs() < 1e-9);
        }
    }
}
