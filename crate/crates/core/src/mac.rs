//! Static multiple-access channel: every secondary user transmits to one
//! common receiver and the objective is the sum rate.

use nalgebra::Cholesky;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::hermitian::{inv_sqrtm, CMatrix, DensityMatrix, HermitianMatrix, C64};
use crate::metrics::{efficiency_series, EfficiencyReport};
use crate::network::Scenario;
use crate::noise::{NoiseModel, NoiseStats};
use crate::policies::baselines::uniform_profile;
use crate::policies::oracle::{maximize, Objective, OracleOptions, OracleSolution};
use crate::policies::waterfill::{gram_of, noisy_best_response};
use crate::policies::AxlState;
use crate::rate::{log_det_pd, ChannelEpoch, ConstraintSet, TransmitProfile};
use crate::rng::stream;

const CHANNEL_STREAM: u64 = 2;

/// Certified gap for the sum capacity. Near the optimum the Frank–Wolfe gap
/// scales like the square root of the value error, so double precision
/// cannot certify much below this.
pub const CAPACITY_TOLERANCE: f64 = 1e-7;

/// Channels `H_{s,k}` (already restricted to the open dimensions) and the
/// noise-plus-primary-user covariance `W⁰_k` at the common receiver.
#[derive(Clone, Debug)]
pub struct MacInstance {
    constraints: Vec<ConstraintSet>,
    channels: Vec<Vec<CMatrix>>,
    base: Vec<HermitianMatrix>,
    base_log_det: Vec<f64>,
}

fn complex_gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * h, im * h)
    })
}

impl MacInstance {
    pub fn new(constraints: Vec<ConstraintSet>, channels: Vec<Vec<CMatrix>>, base: Vec<HermitianMatrix>) -> Result<Self> {
        if constraints.is_empty() || channels.len() != constraints.len() {
            return Err(Error::dims(format!(
                "{} users with constraints, {} with channels",
                constraints.len(),
                channels.len()
            )));
        }
        let k = base.len();
        let n = base.first().map_or(0, |w| w.dim());
        for (s, (cs, hs)) in constraints.iter().zip(&channels).enumerate() {
            if cs.carriers() != k || hs.len() != k {
                return Err(Error::dims(format!("user {s} does not have {k} carriers")));
            }
            for (kk, (h, m)) in hs.iter().zip(cs.open_dims()).enumerate() {
                if h.nrows() != n || h.ncols() != m {
                    return Err(Error::dims(format!("user {s} carrier {kk}: channel is {}x{}", h.nrows(), h.ncols())));
                }
            }
        }
        let base_log_det = base
            .iter()
            .map(|w| log_det_pd(w.as_matrix().clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            constraints,
            channels,
            base,
            base_log_det,
        })
    }

    /// Gaussian static channels for the secondary users of a scenario; all
    /// primary users are permanently on in their bands.
    pub fn from_config(config: &ScenarioConfig) -> Result<Self> {
        let scenario = Scenario::build(config)?;
        let n = config.rx_antennas;
        let k = config.subcarriers;
        let mut rng = stream(config.rng_seed, CHANNEL_STREAM);
        let channels = (0..config.num_su)
            .map(|s| {
                let cs = &scenario.constraints[s];
                (0..k)
                    .map(|kk| complex_gaussian(n, scenario.su_antennas[s], &mut rng) * cs.null_basis(kk))
                    .collect()
            })
            .collect();
        let per_antenna = config.pu_power / config.pu_tx_antennas as f64;
        let mut base = vec![CMatrix::identity(n, n) * C64::new(config.noise_power, 0.0); k];
        for band in &scenario.pu_carriers {
            for (kk, w) in base.iter_mut().enumerate() {
                let h = complex_gaussian(n, config.pu_tx_antennas, &mut rng);
                if band[kk] {
                    *w += &h * h.adjoint() * C64::new(per_antenna, 0.0);
                }
            }
        }
        Self::new(
            scenario.constraints,
            channels,
            base.into_iter().map(HermitianMatrix::symmetrized).collect(),
        )
    }

    pub fn users(&self) -> usize {
        self.constraints.len()
    }

    pub fn carriers(&self) -> usize {
        self.base.len()
    }

    pub fn channel(&self, s: usize, k: usize) -> &CMatrix {
        &self.channels[s][k]
    }

    /// `W⁰_k + Σ_{s ∉ skip} H_{s,k} P_{s,k} H_{s,k}†`.
    fn received(&self, profiles: &[TransmitProfile], k: usize, skip: Option<usize>) -> CMatrix {
        let mut w = self.base[k].as_matrix().clone();
        for (s, p) in profiles.iter().enumerate() {
            if Some(s) == skip || p.powers()[k] == 0.0 {
                continue;
            }
            let h = &self.channels[s][k];
            w += h * p.carrier_covariance(k).as_matrix() * h.adjoint();
        }
        HermitianMatrix::symmetrized(w).into_matrix()
    }

    fn check(&self, profiles: &[TransmitProfile]) -> Result<()> {
        if profiles.len() != self.users() {
            return Err(Error::dims(format!("{} profiles for {} users", profiles.len(), self.users())));
        }
        Ok(())
    }

    /// `Ψ = Σ_k [ln det(W⁰_k + Σ_s H P H†) − ln det W⁰_k]`.
    pub fn sum_rate(&self, profiles: &[TransmitProfile]) -> Result<f64> {
        self.check(profiles)?;
        let mut total = 0.0;
        for k in 0..self.carriers() {
            total += log_det_pd(self.received(profiles, k, None))? - self.base_log_det[k];
        }
        Ok(total)
    }

    /// `∂Ψ/∂P_{s,k}* = H_{s,k}† W_k^{-1} H_{s,k}`, which equals user `s`'s own
    /// rate gradient with everyone else treated as noise.
    pub fn sum_rate_gradients(&self, profiles: &[TransmitProfile]) -> Result<Vec<Vec<HermitianMatrix>>> {
        self.check(profiles)?;
        let mut out: Vec<Vec<HermitianMatrix>> = vec![Vec::with_capacity(self.carriers()); self.users()];
        for k in 0..self.carriers() {
            let chol = Cholesky::new(self.received(profiles, k, None))
                .ok_or_else(|| Error::InvalidInput("received covariance is not positive-definite".into()))?;
            for (s, row) in out.iter_mut().enumerate() {
                let h = &self.channels[s][k];
                row.push(HermitianMatrix::symmetrized(h.adjoint() * chol.solve(h)));
            }
        }
        Ok(out)
    }

    /// User `s`'s channels whitened against noise, primary users and every
    /// other secondary user.
    pub fn effective_epoch(&self, profiles: &[TransmitProfile], s: usize) -> Result<ChannelEpoch> {
        self.check(profiles)?;
        let channels = (0..self.carriers())
            .map(|k| {
                let w = HermitianMatrix::symmetrized(self.received(profiles, k, Some(s)));
                Ok(inv_sqrtm(&w)?.as_matrix() * &self.channels[s][k])
            })
            .collect::<Result<Vec<_>>>()?;
        ChannelEpoch::new(0, channels)
    }
}

impl Objective for MacInstance {
    fn constraints(&self) -> &[ConstraintSet] {
        &self.constraints
    }

    fn value(&self, profiles: &[TransmitProfile]) -> Result<f64> {
        self.sum_rate(profiles)
    }

    fn gradients(&self, profiles: &[TransmitProfile]) -> Result<Vec<Vec<HermitianMatrix>>> {
        self.sum_rate_gradients(profiles)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MacPolicy {
    Axl,
    /// Iterative water-filling: users best-respond one after another.
    Iwf,
    /// Simultaneous water-filling: all users best-respond at once.
    Swf,
}

impl MacPolicy {
    pub const ALL: [MacPolicy; 3] = [MacPolicy::Axl, MacPolicy::Iwf, MacPolicy::Swf];

    pub fn name(self) -> &'static str {
        match self {
            MacPolicy::Axl => "axl",
            MacPolicy::Iwf => "iwf",
            MacPolicy::Swf => "swf",
        }
    }
}

/// Sum rate of the profiles played at iterations `1..=n`.
#[derive(Clone, Debug)]
pub struct MacRun {
    pub policy: MacPolicy,
    pub noisy: bool,
    pub sum_rates: Vec<f64>,
    pub final_profiles: Vec<TransmitProfile>,
    pub noise_stats: NoiseStats,
}

/// Plays `iterations` rounds of a policy from the uniform profile.
pub fn run_dynamics(
    instance: &MacInstance,
    policy: MacPolicy,
    iterations: usize,
    eta: f64,
    noise: &NoiseModel,
    rng: &mut impl Rng,
) -> Result<MacRun> {
    let cons = &instance.constraints;
    let mut stats = NoiseStats::default();
    let mut sum_rates = Vec::with_capacity(iterations);
    let mut profiles = cons.iter().map(uniform_profile).collect::<Result<Vec<_>>>()?;
    let mut states = cons.iter().map(|cs| AxlState::new(cs, eta)).collect::<Result<Vec<_>>>()?;
    for it in 0..iterations {
        if policy == MacPolicy::Axl {
            profiles = states
                .iter()
                .zip(cons)
                .map(|(st, cs)| st.profile(cs))
                .collect::<Result<Vec<_>>>()?;
        }
        sum_rates.push(instance.sum_rate(&profiles)?);
        if it + 1 == iterations {
            break;
        }
        match policy {
            MacPolicy::Axl => {
                let grads = instance.sum_rate_gradients(&profiles)?;
                for (s, g) in grads.iter().enumerate() {
                    let seen = noise.observe_gradients(g, rng, &mut stats)?;
                    states[s] = states[s].update(&profiles[s], &seen)?;
                }
            }
            MacPolicy::Iwf => {
                for s in 0..instance.users() {
                    let e = instance.effective_epoch(&profiles, s)?;
                    profiles[s] = noisy_best_response(&e, &cons[s], noise, rng, &mut stats)?;
                }
            }
            MacPolicy::Swf => {
                profiles = (0..instance.users())
                    .map(|s| {
                        let e = instance.effective_epoch(&profiles, s)?;
                        noisy_best_response(&e, &cons[s], noise, rng, &mut stats)
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
        }
    }
    Ok(MacRun {
        policy,
        noisy: !noise.is_none(),
        sum_rates,
        final_profiles: profiles,
        noise_stats: stats,
    })
}

/// Maximum sum rate, certified by the oracle's Frank–Wolfe gap.
pub fn sum_capacity(instance: &MacInstance, tolerance: f64) -> Result<OracleSolution> {
    maximize(
        instance,
        OracleOptions {
            max_iterations: 100_000,
            tolerance,
        },
    )
}

/// A vertex of `{0 ≤ p ≤ caps, Σp = P}`: fill carriers to their caps in the given order.
fn vertex_powers(cs: &ConstraintSet, order: &[usize]) -> Vec<f64> {
    let mut powers = vec![0.0; cs.carriers()];
    let mut left = cs.total_power();
    for &k in order {
        let p = cs.caps()[k].min(left);
        powers[k] = p;
        left -= p;
        if left <= 0.0 {
            break;
        }
    }
    powers
}

fn rank_one(v: &CMatrix) -> Result<DensityMatrix> {
    DensityMatrix::normalized(&HermitianMatrix::gram(v))
}

/// Smallest sum rate over sampled extreme points of the joint feasible set
/// (rank-one covariances at vertices of each user's power polytope), and the
/// number of points examined.
///
/// The first candidate puts every user on its weakest carriers along their
/// weakest eigenmodes; the rest are random.
pub fn sum_rate_floor(instance: &MacInstance, samples: usize, rng: &mut impl Rng) -> Result<(f64, usize)> {
    let cons = &instance.constraints;
    let mut weakest = Vec::with_capacity(instance.users());
    for (s, cs) in cons.iter().enumerate() {
        let mut modes = Vec::with_capacity(cs.carriers());
        for k in 0..cs.carriers() {
            let w = HermitianMatrix::symmetrized(instance.base[k].as_matrix().clone());
            let h = inv_sqrtm(&w)?.as_matrix() * instance.channel(s, k);
            let e = gram_of(&h).eigh()?;
            let j = (0..e.values.len()).min_by(|&a, &b| e.values[a].total_cmp(&e.values[b])).unwrap_or(0);
            modes.push((e.values[j], e.vectors.column(j).into_owned()));
        }
        let mut order: Vec<usize> = (0..cs.carriers()).collect();
        order.sort_by(|&a, &b| modes[a].0.total_cmp(&modes[b].0));
        let covs = modes
            .iter()
            .map(|(_, v)| rank_one(&CMatrix::from_column_slice(v.len(), 1, v.as_slice())))
            .collect::<Result<Vec<_>>>()?;
        weakest.push(TransmitProfile::new(vertex_powers(cs, &order), covs, cs)?);
    }
    let mut best = instance.sum_rate(&weakest)?;
    let mut count = 1;
    let mut order: Vec<Vec<usize>> = cons.iter().map(|cs| (0..cs.carriers()).collect()).collect();
    while count < samples {
        let profiles = cons
            .iter()
            .zip(order.iter_mut())
            .map(|(cs, ord)| {
                ord.shuffle(rng);
                let covs = cs
                    .open_dims()
                    .into_iter()
                    .map(|m| rank_one(&complex_gaussian(m, 1, rng)))
                    .collect::<Result<Vec<_>>>()?;
                TransmitProfile::new(vertex_powers(cs, ord), covs, cs)
            })
            .collect::<Result<Vec<_>>>()?;
        best = best.min(instance.sum_rate(&profiles)?);
        count += 1;
    }
    Ok((best, count))
}

/// Efficiency of several runs on one instance with shared `Ψ_max`, `Ψ_min`.
///
/// `Ψ_max` is the certified oracle value, raised to any observed sum rate;
/// `Ψ_min` is the sampled vertex floor, lowered to any observed sum rate.
pub fn efficiency_reports(
    runs: &[MacRun],
    capacity: &OracleSolution,
    floor: (f64, usize),
) -> Result<Vec<EfficiencyReport>> {
    let observed = runs.iter().flat_map(|r| r.sum_rates.iter().copied());
    let (lo, hi) = observed.fold((floor.0, capacity.value), |(lo, hi), v| (lo.min(v), hi.max(v)));
    runs.iter()
        .map(|r| efficiency_series(&r.sum_rates, hi, lo, floor.1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::waterfill::best_response;
    use crate::rate::{gradient_matrices, rate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mac_config(users: usize, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            kind: crate::config::ExperimentKind::StaticMac,
            num_su: users,
            num_pu: 2,
            rx_antennas: 3,
            subcarriers: 4,
            rng_seed: seed,
            horizon: 50,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn gradients_match_single_user_view() {
        let inst = MacInstance::from_config(&mac_config(3, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let profiles: Vec<TransmitProfile> = inst
            .constraints
            .iter()
            .map(|cs| crate::rate::test_support::random_profile(cs, &mut rng))
            .collect();
        let grads = inst.sum_rate_gradients(&profiles).unwrap();
        for s in 0..3 {
            let e = inst.effective_epoch(&profiles, s).unwrap();
            let own = gradient_matrices(&profiles[s], &e).unwrap();
            for k in 0..4 {
                assert!(own[k].max_abs_diff(&grads[s][k]) < 1e-10);
            }
        }
    }

    #[test]
    fn sum_rate_chain_rule() {
        // Ψ = Φ_s(P_s) + ln det(W_{-s}) − ln det W⁰, summed over carriers.
        let inst = MacInstance::from_config(&mac_config(2, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let profiles: Vec<TransmitProfile> = inst
            .constraints
            .iter()
            .map(|cs| crate::rate::test_support::random_profile(cs, &mut rng))
            .collect();
        let psi = inst.sum_rate(&profiles).unwrap();
        let e = inst.effective_epoch(&profiles, 0).unwrap();
        let own = rate(&profiles[0], &e).unwrap();
        let others: f64 = (0..inst.carriers())
            .map(|k| log_det_pd(inst.received(&profiles, k, Some(0))).unwrap() - inst.base_log_det[k])
            .sum();
        assert!((psi - own - others).abs() < 1e-10);
    }

    #[test]
    fn single_user_capacity_is_water_filling() {
        let inst = MacInstance::from_config(&mac_config(1, 3)).unwrap();
        let uniform = vec![uniform_profile(&inst.constraints[0]).unwrap()];
        let e = inst.effective_epoch(&uniform, 0).unwrap();
        let (_, wf) = best_response(&e, &inst.constraints[0]).unwrap();
        let cap = sum_capacity(&inst, CAPACITY_TOLERANCE).unwrap();
        assert!((cap.value - wf).abs() < 1e-6, "{} vs {}", cap.value, wf);
    }

    #[test]
    fn iwf_fixed_point_is_nash() {
        let inst = MacInstance::from_config(&mac_config(3, 4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let run = run_dynamics(&inst, MacPolicy::Iwf, 200, 1.0, &NoiseModel::none(), &mut rng).unwrap();
        let profiles = &run.final_profiles;
        for s in 0..3 {
            let e = inst.effective_epoch(profiles, s).unwrap();
            let (br, value) = best_response(&e, &inst.constraints[s]).unwrap();
            assert!(br.l1_distance(&profiles[s]).unwrap() < 1e-6);
            assert!((rate(&profiles[s], &e).unwrap() - value).abs() < 1e-9);
        }
        let cap = sum_capacity(&inst, CAPACITY_TOLERANCE).unwrap();
        assert!((run.sum_rates.last().unwrap() - cap.value).abs() < 1e-6);
    }

    #[test]
    fn iwf_steps_never_lower_the_mover_rate() {
        let inst = MacInstance::from_config(&mac_config(3, 5)).unwrap();
        let mut profiles: Vec<TransmitProfile> = inst.constraints.iter().map(|cs| uniform_profile(cs).unwrap()).collect();
        for _ in 0..3 {
            for s in 0..3 {
                let e = inst.effective_epoch(&profiles, s).unwrap();
                let before = rate(&profiles[s], &e).unwrap();
                let (br, _) = best_response(&e, &inst.constraints[s]).unwrap();
                assert!(rate(&br, &e).unwrap() >= before - 1e-12);
                profiles[s] = br;
            }
        }
    }

    #[test]
    fn floor_lies_below_every_trajectory() {
        let inst = MacInstance::from_config(&mac_config(2, 6)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (floor, n) = sum_rate_floor(&inst, 200, &mut rng).unwrap();
        assert_eq!(n, 200);
        let run = run_dynamics(&inst, MacPolicy::Axl, 30, 1.0, &NoiseModel::none(), &mut rng).unwrap();
        assert!(run.sum_rates.iter().all(|&v| v >= floor));
        let cap = sum_capacity(&inst, CAPACITY_TOLERANCE).unwrap();
        assert!(run.sum_rates.iter().all(|&v| v <= cap.value + 1e-9));
    }

    #[test]
    fn dynamics_are_deterministic() {
        let inst = MacInstance::from_config(&mac_config(3, 7)).unwrap();
        let noise = NoiseModel {
            kind: crate::config::NoiseKind::TruncatedGaussian,
            magnitude: crate::noise::Magnitude::Relative(0.5),
        };
        for p in MacPolicy::ALL {
            let a = run_dynamics(&inst, p, 20, 1.0, &noise, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
            let b = run_dynamics(&inst, p, 20, 1.0, &noise, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
            assert_eq!(a.sum_rates, b.sum_rates);
        }
    }
}
