//! Dynamic multi-user environment: fading links, primary-user activity,
//! interference covariances and effective channels.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ScenarioConfig, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::fading::{JakesLink, OnOffProcess};
use crate::hermitian::{inv_sqrtm, CMatrix, HermitianMatrix, C64};
use crate::rate::{ChannelEpoch, ConstraintSet};
use crate::rng::stream;

/// Static description of a scenario derived from its config.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    /// Transmit antennas of each secondary user.
    pub su_antennas: Vec<usize>,
    /// Transmitter speeds in m/s: secondary users first, then primary users.
    pub speeds: Vec<f64>,
    pub constraints: Vec<ConstraintSet>,
    /// `pu_carriers[q][k]`: primary user `q` is licensed on carrier `k`.
    pub pu_carriers: Vec<Vec<bool>>,
}

impl Scenario {
    pub fn build(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(config.rng_seed, 0);
        let (mlo, mhi) = config.tx_antennas.bounds();
        let su_antennas: Vec<usize> = (0..config.num_su)
            .map(|_| rng.gen_range(mlo..=mhi))
            .collect();
        let (vlo, vhi) = config.user_speed.bounds();
        let speeds = (0..config.num_su + config.num_pu)
            .map(|_| if vhi > vlo { rng.gen_range(vlo..=vhi) } else { vlo })
            .collect();

        let k = config.subcarriers;
        let caps = config.caps();
        let mut forbidden: Vec<Vec<Option<CMatrix>>> = vec![vec![None; k]; config.num_su];
        for (i, ns) in config.null_shaping.iter().enumerate() {
            let field = format!("null_shaping[{i}]");
            let m = su_antennas[ns.user];
            if ns.directions.iter().any(|d| d.len() != m) {
                return Err(Error::config(
                    field,
                    format!("directions must have {m} entries (user {} antennas)", ns.user),
                ));
            }
            let u = CMatrix::from_fn(m, ns.directions.len(), |r, c| {
                let z = ns.directions[c][r];
                C64::new(z[0], z[1])
            });
            let carriers: Vec<usize> = ns.carriers.clone().unwrap_or_else(|| (0..k).collect());
            for kk in carriers {
                let slot = &mut forbidden[ns.user][kk];
                *slot = Some(match slot.take() {
                    None => u.clone(),
                    Some(prev) => {
                        let mut joined = CMatrix::zeros(m, prev.ncols() + u.ncols());
                        joined.columns_mut(0, prev.ncols()).copy_from(&prev);
                        joined.columns_mut(prev.ncols(), u.ncols()).copy_from(&u);
                        joined
                    }
                });
            }
        }
        let constraints = (0..config.num_su)
            .map(|s| {
                ConstraintSet::with_null_shaping(
                    config.total_power,
                    caps.clone(),
                    su_antennas[s],
                    &forbidden[s],
                )
                .map_err(|e| Error::config("null_shaping", format!("user {s}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;

        let band = config.pu_band();
        let pu_carriers = (0..config.num_pu)
            .map(|q| {
                let mut row = vec![false; k];
                for j in 0..band {
                    row[(q * band + j) % k] = true;
                }
                row
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            su_antennas,
            speeds,
            constraints,
            pu_carriers,
        })
    }

    pub fn num_su(&self) -> usize {
        self.config.num_su
    }

    pub fn num_pu(&self) -> usize {
        self.config.num_pu
    }

    pub fn carriers(&self) -> usize {
        self.config.subcarriers
    }

    pub fn doppler(&self, transmitter: usize) -> f64 {
        self.speeds[transmitter] * self.config.carrier_frequency / SPEED_OF_LIGHT
    }

    /// Antennas of transmitter `tx` (secondary users first).
    pub fn tx_antennas(&self, tx: usize) -> usize {
        if tx < self.num_su() {
            self.su_antennas[tx]
        } else {
            self.config.pu_tx_antennas
        }
    }
}

/// Evolving state of the whole network.
#[derive(Clone, Debug)]
pub struct NetworkState {
    scenario: Scenario,
    epoch: u64,
    /// `links[tx * num_su + rx]`, transmitters ordered SUs then PUs.
    links: Vec<JakesLink>,
    /// `channels[link][carrier]` at the current epoch.
    channels: Vec<Vec<CMatrix>>,
    pu_on: Vec<bool>,
    activity: OnOffProcess,
    activity_rng: ChaCha8Rng,
    /// Antenna-space covariances `[su][carrier]` currently transmitted.
    transmit: Vec<Vec<HermitianMatrix>>,
    bound_estimates: Vec<f64>,
}

/// RNG stream reserved for primary-user activity.
const ACTIVITY_STREAM: u64 = 1;
/// First RNG stream used for fading links.
const LINK_STREAM_BASE: u64 = 1 << 20;

impl NetworkState {
    pub fn new(scenario: Scenario) -> Self {
        let cfg = &scenario.config;
        let ns = scenario.num_su();
        let groups = if cfg.correlated_subcarriers { 1 } else { cfg.subcarriers };
        let mut links = Vec::with_capacity((ns + scenario.num_pu()) * ns);
        for tx in 0..ns + scenario.num_pu() {
            for rx in 0..ns {
                let gain = if tx < ns && tx != rx { cfg.cross_gain } else { 1.0 };
                let mut rng = stream(cfg.rng_seed, LINK_STREAM_BASE + (tx * ns + rx) as u64);
                links.push(JakesLink::new(
                    cfg.rx_antennas,
                    scenario.tx_antennas(tx),
                    groups,
                    scenario.doppler(tx),
                    gain,
                    &mut rng,
                ));
            }
        }
        let activity = OnOffProcess::new(cfg.pu_arrival_rate, cfg.pu_departure_rate);
        let mut activity_rng = stream(cfg.rng_seed, ACTIVITY_STREAM);
        let pu_on = (0..scenario.num_pu())
            .map(|_| activity.initial(&mut activity_rng))
            .collect();
        let transmit = (0..ns)
            .map(|s| vec![HermitianMatrix::zeros(scenario.su_antennas[s]); cfg.subcarriers])
            .collect();
        let mut state = Self {
            epoch: 0,
            links,
            channels: Vec::new(),
            pu_on,
            activity,
            activity_rng,
            transmit,
            bound_estimates: vec![0.0; ns],
            scenario,
        };
        state.refresh_channels();
        state
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn pu_active(&self) -> &[bool] {
        &self.pu_on
    }

    fn link_index(&self, tx: usize, rx: usize) -> usize {
        tx * self.scenario.num_su() + rx
    }

    fn refresh_channels(&mut self) {
        let cfg = &self.scenario.config;
        let time = self.epoch as f64 * cfg.epoch_duration;
        let k = cfg.subcarriers;
        self.channels = self
            .links
            .iter()
            .map(|link| {
                let w = link.phasors(time);
                let groups: Vec<CMatrix> = (0..link.groups()).map(|g| link.matrix_with(g, &w)).collect();
                if groups.len() == k {
                    groups
                } else {
                    vec![groups[0].clone(); k]
                }
            })
            .collect();
    }

    /// Moves to the next epoch: primary-user activity first, then fading.
    pub fn advance_epoch(&mut self) {
        let dt = self.scenario.config.epoch_duration;
        for on in self.pu_on.iter_mut() {
            *on = self.activity.step(*on, dt, &mut self.activity_rng);
        }
        self.epoch += 1;
        self.refresh_channels();
    }

    /// Raw channel `H_k^{tx→rx}` at the current epoch (link gain included).
    pub fn channel(&self, tx: usize, rx: usize, carrier: usize) -> &CMatrix {
        &self.channels[self.link_index(tx, rx)][carrier]
    }

    /// Sets the antenna-space covariances transmitted by secondary user `s`.
    pub fn set_transmit(&mut self, s: usize, lifted: Vec<HermitianMatrix>) -> Result<()> {
        if lifted.len() != self.scenario.carriers()
            || lifted.iter().any(|p| p.dim() != self.scenario.su_antennas[s])
        {
            return Err(Error::dims(format!("transmit covariances of user {s}")));
        }
        self.transmit[s] = lifted;
        Ok(())
    }

    pub fn transmit(&self, s: usize) -> &[HermitianMatrix] {
        &self.transmit[s]
    }

    /// `W_k = σ²I + Σ_{q≠s active} H_k^{qs} P_k^q H_k^{qs}†` at receiver `s`.
    pub fn mui_covariance(&self, s: usize, k: usize) -> HermitianMatrix {
        let cfg = &self.scenario.config;
        let n = cfg.rx_antennas;
        let mut w = CMatrix::identity(n, n) * C64::new(cfg.noise_power, 0.0);
        for q in 0..self.scenario.num_su() {
            if q == s || self.transmit[q][k].trace() == 0.0 {
                continue;
            }
            let h = self.channel(q, s, k);
            w += h * self.transmit[q][k].as_matrix() * h.adjoint();
        }
        for (j, &on) in self.pu_on.iter().enumerate() {
            if on && self.scenario.pu_carriers[j][k] {
                let h = self.channel(self.scenario.num_su() + j, s, k);
                let per_antenna = cfg.pu_power / cfg.pu_tx_antennas as f64;
                w += h * h.adjoint() * C64::new(per_antenna, 0.0);
            }
        }
        HermitianMatrix::symmetrized(w)
    }

    /// `H̃_k = W_k^{-1/2} H_k N_k` for every carrier of user `s`.
    pub fn effective_channels(&mut self, s: usize) -> Result<ChannelEpoch> {
        let cs = &self.scenario.constraints[s];
        let mut out = Vec::with_capacity(self.scenario.carriers());
        for k in 0..self.scenario.carriers() {
            let w = self.mui_covariance(s, k);
            let whiten = inv_sqrtm(&w)?;
            let direct = self.channel(s, s, k) * cs.null_basis(k);
            out.push(whiten.as_matrix() * direct);
        }
        let mut epoch = ChannelEpoch::new(self.epoch, out)?;
        self.bound_estimates[s] = self.bound_estimates[s].max(epoch.bound_estimate);
        epoch.bound_estimate = self.bound_estimates[s];
        Ok(epoch)
    }
}
