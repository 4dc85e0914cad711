//! Single-user water-filling with per-carrier caps, and the IWF/SWF dynamics
//! built on it.

use rand::Rng;

use crate::error::{Error, Result};
use crate::hermitian::{CMatrix, DensityMatrix, HermitianMatrix, C64};
use crate::noise::{NoiseModel, NoiseStats};
use crate::rate::{ChannelEpoch, ConstraintSet, TransmitProfile};

/// Powers `(μ_k − 1/g_i)^+` for a water level `μ_k`.
fn fill_at(inv_gains: &[f64], level: f64) -> f64 {
    inv_gains.iter().map(|&x| (level - x).max(0.0)).sum()
}

/// Level at which the modes of one carrier absorb exactly `amount`.
/// `inv_gains` must be sorted ascending and finite.
fn level_for(inv_gains: &[f64], amount: f64) -> f64 {
    let mut prefix = 0.0;
    for (j, &x) in inv_gains.iter().enumerate() {
        prefix += x;
        let level = (amount + prefix) / (j + 1) as f64;
        if inv_gains.get(j + 1).map_or(true, |&next| level <= next) {
            return level;
        }
    }
    unreachable!("the last candidate level always qualifies")
}

/// Water-filling over eigenmode gains `gains[k][i] ≥ 0` with
/// `Σ_i p_{k,i} ≤ caps[k]` and `Σ p = budget`. Returns per-mode powers.
///
/// Power that positive-gain modes cannot absorb because of the caps goes to
/// zero-gain carriers, which keeps the budget constraint tight.
pub fn water_fill(gains: &[Vec<f64>], caps: &[f64], budget: f64) -> Result<Vec<Vec<f64>>> {
    if gains.len() != caps.len() {
        return Err(Error::dims(format!("{} gain lists for {} caps", gains.len(), caps.len())));
    }
    let cap_sum: f64 = caps.iter().sum();
    if budget > cap_sum * (1.0 + 1e-12) {
        return Err(Error::Infeasible { budget, cap_sum });
    }
    let inv: Vec<Vec<f64>> = gains
        .iter()
        .map(|g| {
            let mut v: Vec<f64> = g.iter().filter(|&&x| x > 0.0).map(|&x| 1.0 / x).collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    let carrier_fill = |level: f64| -> f64 {
        inv.iter()
            .zip(caps)
            .map(|(v, &c)| fill_at(v, level).min(c))
            .sum()
    };
    let absorbable: f64 = inv
        .iter()
        .zip(caps)
        .filter(|(v, _)| !v.is_empty())
        .map(|(_, &c)| c)
        .sum();

    let mut carrier_power = vec![0.0; caps.len()];
    if absorbable <= budget {
        for (k, v) in inv.iter().enumerate() {
            if !v.is_empty() {
                carrier_power[k] = caps[k];
            }
        }
        let mut rest = budget - absorbable;
        let idle: Vec<usize> = (0..caps.len()).filter(|&k| inv[k].is_empty()).collect();
        let mut open = idle.clone();
        while rest > 0.0 && !open.is_empty() {
            let share = rest / open.len() as f64;
            let full: Vec<usize> = open.iter().copied().filter(|&k| caps[k] <= share).collect();
            if full.is_empty() {
                open.iter().for_each(|&k| carrier_power[k] = share);
                rest = 0.0;
            } else {
                for &k in &full {
                    carrier_power[k] = caps[k];
                    rest -= caps[k];
                }
                open.retain(|k| !full.contains(k));
            }
        }
    } else {
        let mut lo = 0.0;
        let mut hi = budget
            + inv
                .iter()
                .filter_map(|v| v.last().copied())
                .fold(0.0, f64::max);
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if carrier_fill(mid) < budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        for (k, v) in inv.iter().enumerate() {
            carrier_power[k] = fill_at(v, hi).min(caps[k]);
        }
        // Spread the bisection residual over the carriers below their caps.
        let total: f64 = carrier_power.iter().sum();
        let slack: Vec<usize> = (0..caps.len())
            .filter(|&k| !inv[k].is_empty() && carrier_power[k] > 0.0 && carrier_power[k] < caps[k])
            .collect();
        if !slack.is_empty() {
            let each = (budget - total) / slack.len() as f64;
            for k in slack {
                carrier_power[k] = (carrier_power[k] + each).clamp(0.0, caps[k]);
            }
        }
    }

    Ok(gains
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let p = carrier_power[k];
            if inv[k].is_empty() {
                let n = g.len().max(1) as f64;
                return vec![p / n; g.len()];
            }
            let level = level_for(&inv[k], p);
            g.iter()
                .map(|&x| if x > 0.0 { (level - 1.0 / x).max(0.0) } else { 0.0 })
                .collect()
        })
        .collect())
}

/// Rate-maximising profile against fixed Gram matrices `G_k = H̃_k†H̃_k`, and its value
/// `Σ_{k,i} ln(1 + g_{k,i} p_{k,i})`.
pub fn best_response_from_grams(
    grams: &[HermitianMatrix],
    constraints: &ConstraintSet,
) -> Result<(TransmitProfile, f64)> {
    if grams.len() != constraints.carriers() {
        return Err(Error::dims(format!("{} Gram matrices for {} carriers", grams.len(), constraints.carriers())));
    }
    let eigs = grams.iter().map(|g| g.eigh()).collect::<Result<Vec<_>>>()?;
    let gains: Vec<Vec<f64>> = eigs
        .iter()
        .map(|e| e.values.iter().map(|&x| x.max(0.0)).collect())
        .collect();
    let modes = water_fill(&gains, constraints.caps(), constraints.total_power())?;
    let mut value = 0.0;
    let mut powers = Vec::with_capacity(grams.len());
    let mut covs = Vec::with_capacity(grams.len());
    for ((e, g), p) in eigs.iter().zip(&gains).zip(&modes) {
        value += g.iter().zip(p).map(|(gi, pi)| (gi * pi).ln_1p()).sum::<f64>();
        let total: f64 = p.iter().sum();
        powers.push(total);
        let m = g.len();
        if total > 0.0 {
            let mut v = e.vectors.clone();
            for (j, pj) in p.iter().enumerate() {
                let w = (pj / total).sqrt();
                v.column_mut(j).iter_mut().for_each(|z| *z *= C64::new(w, 0.0));
            }
            covs.push(DensityMatrix::new(HermitianMatrix::gram(&v))?);
        } else {
            covs.push(DensityMatrix::maximally_mixed(m));
        }
    }
    Ok((TransmitProfile::new(powers, covs, constraints)?, value))
}

/// Single-user water-filling on the effective channels of one epoch.
pub fn best_response(epoch: &ChannelEpoch, constraints: &ConstraintSet) -> Result<(TransmitProfile, f64)> {
    let grams: Vec<HermitianMatrix> = epoch
        .channels
        .iter()
        .map(|h| HermitianMatrix::gram(&h.adjoint()))
        .collect();
    best_response_from_grams(&grams, constraints)
}

/// Gram matrix `H̃†H̃` of a reduced effective channel.
pub fn gram_of(h: &CMatrix) -> HermitianMatrix {
    HermitianMatrix::gram(&h.adjoint())
}

/// Water-filling against a Gram matrix seen through the noise model,
/// clipped back to the PSD cone.
pub fn noisy_best_response(
    epoch: &ChannelEpoch,
    cs: &ConstraintSet,
    noise: &NoiseModel,
    rng: &mut impl Rng,
    stats: &mut NoiseStats,
) -> Result<TransmitProfile> {
    let grams: Vec<HermitianMatrix> = epoch.channels.iter().map(gram_of).collect();
    let seen = noise
        .observe_gradients(&grams, rng, stats)?
        .into_iter()
        .map(|g| g.map_spectrum(|x| x.max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(best_response_from_grams(&seen, cs)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::test_support::{random_matrix, random_profile};
    use crate::rate::rate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_epoch(gains: &[f64]) -> ChannelEpoch {
        ChannelEpoch::new(
            0,
            gains.iter().map(|g| CMatrix::from_element(1, 1, C64::new(g.sqrt(), 0.0))).collect(),
        )
        .unwrap()
    }

    #[test]
    fn closed_form_two_gains() {
        // p_i = (μ − 1/g_i)^+ with μ = 2.
        let w = water_fill(&[vec![1.0, 0.5]], &[1.0], 1.0).unwrap();
        assert!((w[0][0] - 1.0).abs() < 1e-12 && w[0][1].abs() < 1e-12);
        let cs = ConstraintSet::unconstrained(2, 1, 1.0).unwrap();
        let (p, v) = best_response(&scalar_epoch(&[1.0, 0.5]), &cs).unwrap();
        assert!((p.powers()[0] - 1.0).abs() < 1e-12);
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn equal_gains_split_equally() {
        let w = water_fill(&[vec![2.0], vec![2.0], vec![2.0]], &[5.0; 3], 3.0).unwrap();
        assert!(w.iter().all(|p| (p[0] - 1.0).abs() < 1e-12));
    }

    #[test]
    fn caps_and_zero_gains() {
        // The strong carrier saturates; the rest refills the weak one.
        let w = water_fill(&[vec![10.0], vec![0.1]], &[0.3, 1.0], 1.0).unwrap();
        assert!((w[0][0] - 0.3).abs() < 1e-12 && (w[1][0] - 0.7).abs() < 1e-12);
        // Only zero-gain room left for the remainder.
        let w = water_fill(&[vec![1.0], vec![0.0, 0.0]], &[0.25, 1.0], 1.0).unwrap();
        assert!((w[0][0] - 0.25).abs() < 1e-12);
        assert!((w[1][0] - 0.375).abs() < 1e-12 && (w[1][1] - 0.375).abs() < 1e-12);
        assert!(water_fill(&[vec![1.0]], &[0.5], 1.0).is_err());
    }

    /// KKT check: active modes share a level, inactive ones lie above it.
    #[test]
    fn kkt_conditions_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..300 {
            let k = rng.gen_range(1..5);
            let gains: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..rng.gen_range(1..4)).map(|_| rng.gen_range(0.0..3.0)).collect())
                .collect();
            let budget = rng.gen_range(0.1..4.0);
            let caps: Vec<f64> = (0..k).map(|_| rng.gen_range(budget / k as f64..2.0 * budget)).collect();
            let w = water_fill(&gains, &caps, budget).unwrap();
            let total: f64 = w.iter().flatten().sum();
            assert!((total - budget).abs() < 1e-9 * budget);
            let mut free_levels = Vec::new();
            for (kk, (g, p)) in gains.iter().zip(&w).enumerate() {
                let pk: f64 = p.iter().sum();
                assert!(pk <= caps[kk] * (1.0 + 1e-12));
                let active: Vec<f64> = g.iter().zip(p).filter(|(_, &x)| x > 1e-12).map(|(gi, x)| x + 1.0 / gi).collect();
                for l in &active {
                    assert!((l - active[0]).abs() < 1e-8);
                }
                if let Some(&l) = active.first() {
                    for (gi, x) in g.iter().zip(p) {
                        if *x <= 1e-12 && *gi > 0.0 {
                            assert!(1.0 / gi >= l - 1e-8);
                        }
                    }
                    if pk < caps[kk] * (1.0 - 1e-9) {
                        free_levels.push(l);
                    }
                }
            }
            for l in &free_levels {
                assert!((l - free_levels[0]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn best_response_dominates_random_profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let cs = ConstraintSet::new(1.0, vec![0.6, 0.6, 0.6], vec![CMatrix::identity(2, 2); 3]).unwrap();
            let e = ChannelEpoch::new(0, (0..3).map(|_| random_matrix(2, 2, &mut rng)).collect()).unwrap();
            let (best, value) = best_response(&e, &cs).unwrap();
            assert!((rate(&best, &e).unwrap() - value).abs() < 1e-10);
            for _ in 0..20 {
                let p = random_profile(&cs, &mut rng);
                assert!(rate(&p, &e).unwrap() <= value + 1e-10);
            }
        }
    }
}
