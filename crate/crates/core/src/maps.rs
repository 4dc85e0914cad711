//! Entropic choice maps.
//!
//! Each map is the unique maximiser of `⟨y, x⟩ − h(x)` over its feasible set
//! for a matching entropy `h`:
//!
//! | map                  | feasible set              | entropy                                   |
//! |----------------------|---------------------------|-------------------------------------------|
//! | [`gibbs_map`]        | probability simplex       | `Σ q ln q`                                |
//! | [`capped_gibbs_map`] | `{0 ≤ p ≤ c, Σ p = P}`    | `Σ p ln p + (c − p) ln(c − p)`            |
//! | [`matrix_gibbs_map`] | unit-trace PSD matrices   | `tr(Q ln Q)`                              |
//!
//! All maps shift their argument by its maximum before exponentiating, so
//! arbitrarily large scores are safe.

use crate::error::{Error, Result};
use crate::hermitian::{DensityMatrix, HermitianMatrix};

/// Point of the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Power vector in `{0 ≤ p_k ≤ caps_k, Σ p_k = budget}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CappedAllocation {
    pub powers: Vec<f64>,
    pub caps: Vec<f64>,
    pub budget: f64,
    /// Lagrange multiplier of the budget constraint. `-∞` when every cap binds.
    pub lambda: f64,
}

fn check_finite(y: &[f64]) -> Result<()> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("scores must be finite".into()));
    }
    Ok(())
}

/// Softmax `G_k(y) = e^{y_k} / Σ_ℓ e^{y_ℓ}`.
pub fn gibbs_map(y: &[f64]) -> Result<SimplexPoint> {
    if y.is_empty() {
        return Err(Error::InvalidInput("empty score vector".into()));
    }
    check_finite(y)?;
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = y.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= z);
    Ok(SimplexPoint(w))
}

/// `1 / (1 + e^{-x})` without overflow.
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn capped_total(y: &[f64], caps: &[f64], lambda: f64) -> f64 {
    y.iter()
        .zip(caps)
        .map(|(&yk, &ck)| ck * logistic(yk - lambda))
        .sum()
}

/// Solves `Σ_k c_k (1 + e^{λ − y_k})^{-1} = P` for λ by bisection and returns
/// `p_k = c_k (1 + e^{λ − y_k})^{-1}`.
pub fn capped_gibbs_map(y: &[f64], caps: &[f64], budget: f64) -> Result<CappedAllocation> {
    if y.len() != caps.len() || y.is_empty() {
        return Err(Error::dims(format!(
            "{} scores for {} caps",
            y.len(),
            caps.len()
        )));
    }
    check_finite(y)?;
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::InvalidInput(format!("budget must be positive, got {budget}")));
    }
    if caps.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(Error::InvalidInput("caps must be positive and finite".into()));
    }
    let cap_sum: f64 = caps.iter().sum();
    if budget > cap_sum * (1.0 + 1e-12) {
        return Err(Error::Infeasible { budget, cap_sum });
    }
    if budget >= cap_sum {
        return Ok(CappedAllocation {
            powers: caps.to_vec(),
            caps: caps.to_vec(),
            budget,
            lambda: f64::NEG_INFINITY,
        });
    }

    // Σ c_k σ(y_k − λ) is strictly decreasing in λ. With ℓ = ln(P / (S − P)),
    // λ = min y − ℓ gives every σ ≥ P/S (total ≥ P) and λ = max y − ℓ gives
    // every σ ≤ P/S (total ≤ P).
    let shift = (budget / (cap_sum - budget)).ln();
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = ymin - shift;
    let mut hi = ymax - shift;
    let mut widen = 1.0;
    while capped_total(y, caps, lo) < budget {
        lo -= widen;
        widen *= 2.0;
    }
    widen = 1.0;
    while capped_total(y, caps, hi) > budget {
        hi += widen;
        widen *= 2.0;
    }

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if capped_total(y, caps, mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (rlo, rhi) = (
        (capped_total(y, caps, lo) - budget).abs(),
        (capped_total(y, caps, hi) - budget).abs(),
    );
    let lambda = if rlo <= rhi { lo } else { hi };
    let powers = y
        .iter()
        .zip(caps)
        .map(|(&yk, &ck)| ck * logistic(yk - lambda))
        .collect();
    Ok(CappedAllocation {
        powers,
        caps: caps.to_vec(),
        budget,
        lambda,
    })
}

/// `exp(Y) / tr exp(Y)`.
pub fn matrix_gibbs_map(y: &HermitianMatrix) -> Result<DensityMatrix> {
    let eig = y.eigh()?;
    let max = eig.max();
    let z: f64 = eig.values.iter().map(|v| (v - max).exp()).sum();
    Ok(DensityMatrix::from_trusted(
        eig.reconstruct(|v| (v - max).exp() / z),
    ))
}

/// Entropy functions and their convex conjugates.
pub mod entropy {
    use super::*;

    fn xlogx(x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            x * x.ln()
        }
    }

    /// Gibbs–Shannon negentropy `Σ q ln q` on the simplex.
    pub fn shannon(q: &[f64]) -> Result<f64> {
        if q.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidInput("weights must be nonnegative".into()));
        }
        let s: f64 = q.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("weights sum to {s}, not 1")));
        }
        Ok(q.iter().map(|&v| xlogx(v)).sum())
    }

    /// Capped negentropy `Σ p ln p + (c − p) ln(c − p)` with `0 ln 0 = 0`.
    pub fn capped(p: &[f64], caps: &[f64]) -> Result<f64> {
        if p.len() != caps.len() {
            return Err(Error::dims("powers and caps differ in length"));
        }
        let mut h = 0.0;
        for (&pk, &ck) in p.iter().zip(caps) {
            if !(pk >= 0.0) || pk > ck {
                return Err(Error::InvalidInput(format!(
                    "power {pk} outside [0, {ck}]"
                )));
            }
            h += xlogx(pk) + xlogx(ck - pk);
        }
        Ok(h)
    }

    /// Von Neumann negentropy `tr(Q ln Q)`.
    pub fn von_neumann(q: &DensityMatrix) -> Result<f64> {
        Ok(q.as_hermitian()
            .eigenvalues()?
            .iter()
            .map(|&v| xlogx(v.max(0.0)))
            .sum())
    }

    /// Conjugate of [`shannon`]: `ln Σ e^{y_k}`.
    pub fn log_sum_exp(y: &[f64]) -> f64 {
        let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max + y.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
    }

    /// Conjugate of [`von_neumann`]: `ln tr exp(Y)`.
    pub fn log_trace_exp(y: &HermitianMatrix) -> Result<f64> {
        let values = y.eigenvalues()?;
        Ok(log_sum_exp(&values))
    }
}

#[cfg(test)]
mod tests {
    use super::entropy::*;
    use super::*;
    use crate::hermitian::{CMatrix, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gibbs_uniform_and_two_point() {
        let g = gibbs_map(&[0.0; 4]).unwrap();
        assert!(g.weights().iter().all(|&w| (w - 0.25).abs() < 1e-15));
        let g = gibbs_map(&[2f64.ln(), 0.0]).unwrap();
        assert!((g.weights()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((g.weights()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gibbs_survives_huge_scores() {
        let g = gibbs_map(&[1e6, 1e6 - 1.0, -1e6]).unwrap();
        let e = (-1f64).exp();
        assert!((g.weights()[0] - 1.0 / (1.0 + e)).abs() < 1e-12);
        assert_eq!(g.weights()[2], 0.0);
        assert!(gibbs_map(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn capped_symmetric() {
        let a = capped_gibbs_map(&[0.0, 0.0], &[1.0, 1.0], 1.0).unwrap();
        assert!(a.lambda.abs() < 1e-12);
        assert!((a.powers[0] - 0.5).abs() < 1e-12 && (a.powers[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn capped_quadratic_case() {
        // With x = e^λ: 3/(3 + x) + 1/(1 + x) = 1  ⇔  x² = 3.
        let a = capped_gibbs_map(&[3f64.ln(), 0.0], &[1.0, 1.0], 1.0).unwrap();
        assert!((a.lambda.exp() - 3f64.sqrt()).abs() < 1e-10);
        assert!((a.powers[0] - 0.633_974_596_215_561_3).abs() < 1e-10);
        assert!((a.powers[1] - 0.366_025_403_784_438_6).abs() < 1e-10);
    }

    #[test]
    fn capped_errors() {
        assert!(matches!(
            capped_gibbs_map(&[0.0, 0.0], &[0.4, 0.4], 1.0),
            Err(Error::Infeasible { .. })
        ));
        assert!(capped_gibbs_map(&[0.0], &[1.0], 0.0).is_err());
        assert!(capped_gibbs_map(&[0.0], &[1.0, 2.0], 1.0).is_err());
        let full = capped_gibbs_map(&[3.0, -2.0], &[0.5, 0.5], 1.0).unwrap();
        assert_eq!(full.powers, vec![0.5, 0.5]);
    }

    #[test]
    fn capped_residual_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..500 {
            let k = rng.gen_range(1..10);
            let y: Vec<f64> = (0..k).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let caps: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..3.0)).collect();
            let s: f64 = caps.iter().sum();
            let budget = s * rng.gen_range(0.01..0.99);
            let a = capped_gibbs_map(&y, &caps, budget).unwrap();
            let total: f64 = a.powers.iter().sum();
            assert!((total - budget).abs() < 1e-10 * budget, "{total} vs {budget}");
            assert!(a.powers.iter().zip(&caps).all(|(p, c)| *p >= 0.0 && p <= c));
        }
    }

    #[test]
    fn matrix_gibbs_cases() {
        let q = matrix_gibbs_map(&HermitianMatrix::zeros(3)).unwrap();
        assert!(q.as_hermitian().max_abs_diff(&HermitianMatrix::identity(3).scale(1.0 / 3.0)) < 1e-15);
        let q = matrix_gibbs_map(&HermitianMatrix::from_real_diagonal(&[2f64.ln(), 0.0])).unwrap();
        assert!(q.as_hermitian().max_abs_diff(&HermitianMatrix::from_real_diagonal(&[2.0 / 3.0, 1.0 / 3.0])) < 1e-14);
        let big = HermitianMatrix::from_real_diagonal(&[1e5, 0.0]);
        let q = matrix_gibbs_map(&big).unwrap();
        assert!((q.as_hermitian().trace() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn entropy_values() {
        assert!((shannon(&[0.25; 4]).unwrap() + 4f64.ln()).abs() < 1e-15);
        let q = DensityMatrix::maximally_mixed(3);
        assert!((von_neumann(&q).unwrap() + 3f64.ln()).abs() < 1e-14);
        assert!((log_trace_exp(&HermitianMatrix::zeros(3)).unwrap() - 3f64.ln()).abs() < 1e-14);
        assert!(shannon(&[-0.1, 1.1]).is_err());
        assert!(shannon(&[0.5, 0.6]).is_err());
        assert!(capped(&[1.5], &[1.0]).is_err());
        assert_eq!(capped(&[0.0, 1.0], &[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn fenchel_young_equalities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let k = rng.gen_range(1..8);
            let y: Vec<f64> = (0..k).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let g = gibbs_map(&y).unwrap();
            let lhs = log_sum_exp(&y);
            let pair: f64 = y.iter().zip(g.weights()).map(|(a, b)| a * b).sum();
            let rhs = pair - shannon(g.weights()).unwrap();
            assert!((lhs - rhs).abs() < 1e-9);

            let m = rng.gen_range(1..4);
            let ym = HermitianMatrix::new(CMatrix::from_fn(m, m, |_, _| {
                C64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
            }))
            .unwrap();
            let q = matrix_gibbs_map(&ym).unwrap();
            let lhs = log_trace_exp(&ym).unwrap();
            let rhs = ym.inner(q.as_hermitian()) - von_neumann(&q).unwrap();
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gibbs_is_shift_invariant(y in proptest::collection::vec(-20.0f64..20.0, 1..8), c in -100.0f64..100.0) {
                let a = gibbs_map(&y).unwrap();
                let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
                let b = gibbs_map(&shifted).unwrap();
                for (x, z) in a.weights().iter().zip(b.weights()) {
                    prop_assert!((x - z).abs() < 1e-12);
                }
            }

            #[test]
            fn gibbs_is_one_lipschitz(pair in (1usize..8).prop_flat_map(|k| (
                proptest::collection::vec(-10.0f64..10.0, k),
                proptest::collection::vec(-10.0f64..10.0, k)))) {
                let (y, z) = pair;
                let a = gibbs_map(&y).unwrap();
                let b = gibbs_map(&z).unwrap();
                let l1: f64 = a.weights().iter().zip(b.weights()).map(|(p, q)| (p - q).abs()).sum();
                let linf = y.iter().zip(&z).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                prop_assert!(l1 <= linf + 1e-12);
            }

            #[test]
            fn capped_total_is_decreasing_in_lambda(
                y in proptest::collection::vec(-5.0f64..5.0, 1..6),
                l1 in -5.0f64..5.0, dl in 1e-3f64..5.0) {
                let caps = vec![1.0; y.len()];
                prop_assert!(capped_total(&y, &caps, l1 + dl) < capped_total(&y, &caps, l1));
            }
        }
    }
}
