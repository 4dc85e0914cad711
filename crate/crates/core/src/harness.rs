//! Scenario orchestration: runs the dynamic regret, tracking and static-MAC
//! experiments and renders their CSV and metadata files.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ExperimentKind, NoiseKind, PolicyKind, ScenarioConfig};
use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::mac::{
    efficiency_reports, run_dynamics, sum_capacity, sum_rate_floor, MacInstance, MacPolicy, MacRun,
    CAPACITY_TOLERANCE,
};
use crate::metrics::{EfficiencyReport, RegretLedger};
use crate::network::{NetworkState, Scenario};
use crate::noise::{NoiseModel, NoiseStats};
use crate::policies::baselines::{benchmark_set, uniform_profile, Benchmark, RandomizedState};
use crate::policies::oracle::instantaneous_optimum;
use crate::policies::waterfill::noisy_best_response;
use crate::policies::AxlState;
use crate::rate::{gradient_matrices, rate, ChannelEpoch, ConstraintSet, TransmitProfile};
use crate::rng::stream;

/// Slack allowed on the regret bound.
pub const BOUND_SLACK: f64 = 1e-9;
/// Random extreme points examined for `Ψ_min`.
pub const VERTEX_SAMPLES: usize = 10_000;

const NOISE_STREAM_BASE: u64 = 1 << 16;
const POLICY_STREAM_BASE: u64 = 1 << 17;
const SHADOW_STREAM_BASE: u64 = 1 << 18;
const FLOOR_STREAM: u64 = 3;
const MAC_NOISE_STREAM: u64 = 4;

pub const REGRET_HEADER: &str = "epoch,user,benchmark,avg_regret,bound";
pub const TRACKING_HEADER: &str = "epoch,user,policy,rate_nats";
pub const EFFICIENCY_HEADER: &str = "iter,policy,noise,eff";

/// 17 significant digits.
fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Average-regret curves of one secondary user.
#[derive(Clone, Debug)]
pub struct UserRegret {
    pub benchmarks: Vec<String>,
    /// `avg_regret[t][b]` after `t + 1` epochs.
    pub avg_regret: Vec<Vec<f64>>,
    /// `R/√T` with the running `M` after `t + 1` epochs.
    pub bound: Vec<f64>,
    /// Realised `M` (plus `Σ` for noisy runs) at the end of the run.
    pub gradient_bound: f64,
    pub noise_bound: f64,
    pub bound_constant: f64,
}

impl UserRegret {
    /// Largest average regret over the benchmarks after `t + 1` epochs.
    pub fn max_regret(&self, t: usize) -> f64 {
        self.avg_regret[t].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn final_regret(&self) -> Option<&[f64]> {
        self.avg_regret.last().map(Vec::as_slice)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundViolation {
    pub user: usize,
    pub epoch: usize,
    pub benchmark: usize,
    pub avg_regret: f64,
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct RegretReport {
    pub policy: PolicyKind,
    pub noisy: bool,
    pub users: Vec<UserRegret>,
    pub noise_stats: NoiseStats,
}

impl RegretReport {
    /// Bound compliance is only claimed for AXL with exact gradients.
    pub fn bound_applies(&self) -> bool {
        self.policy == PolicyKind::Axl && !self.noisy
    }

    pub fn violations(&self) -> Vec<BoundViolation> {
        let mut out = Vec::new();
        for (user, u) in self.users.iter().enumerate() {
            for (epoch, (row, &bound)) in u.avg_regret.iter().zip(&u.bound).enumerate() {
                for (benchmark, &r) in row.iter().enumerate() {
                    if !(r <= bound + BOUND_SLACK) {
                        out.push(BoundViolation {
                            user,
                            epoch,
                            benchmark,
                            avg_regret: r,
                            bound,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackingRow {
    pub epoch: usize,
    pub user: usize,
    pub policy: &'static str,
    pub rate: f64,
}

#[derive(Clone, Debug)]
pub struct TrackingReport {
    pub policy: PolicyKind,
    pub noisy: bool,
    pub rows: Vec<TrackingRow>,
    pub noise_stats: NoiseStats,
}

#[derive(Clone, Debug)]
pub struct MacReport {
    pub runs: Vec<MacRun>,
    pub efficiency: Vec<EfficiencyReport>,
    /// Certified oracle value before it is raised to observed sum rates.
    pub capacity: f64,
    pub capacity_gap: f64,
    pub psi_max: f64,
    pub psi_min: f64,
    pub vertex_samples: usize,
}

impl MacReport {
    pub fn run(&self, policy: MacPolicy, noisy: bool) -> Option<(&MacRun, &EfficiencyReport)> {
        self.runs
            .iter()
            .zip(&self.efficiency)
            .find(|(r, _)| r.policy == policy && r.noisy == noisy)
    }
}

#[derive(Clone, Debug)]
pub enum Report {
    Regret(RegretReport),
    Tracking(TrackingReport),
    StaticMac(MacReport),
}

/// Contents of the files a run produces, keyed by file name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputFile {
    pub name: &'static str,
    pub contents: String,
}

#[derive(Serialize)]
struct Metadata<'a> {
    kind: &'a str,
    policy: &'a str,
    seed: u64,
    horizon: u64,
    eta: f64,
    noise: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    regret: Option<RegretMetadata>,
    #[serde(skip_serializing_if = "Option::is_none")]
    efficiency: Option<MacMetadata>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truncation_rate: Option<f64>,
}

#[derive(Serialize)]
struct RegretMetadata {
    /// `M` in the bound is the realised running maximum of `‖M_k‖`, plus `Σ` when noisy.
    gradient_bound: Vec<f64>,
    noise_bound: Vec<f64>,
    bound_constant: Vec<f64>,
    bound_checked: bool,
    violations: usize,
}

#[derive(Serialize)]
struct MacMetadata {
    psi_max: f64,
    psi_min: f64,
    capacity: f64,
    capacity_gap: f64,
    vertex_samples: usize,
}

fn noise_name(kind: NoiseKind, model: &NoiseModel) -> &'static str {
    if model.is_none() {
        return "none";
    }
    match kind {
        NoiseKind::None => "none",
        NoiseKind::BoundedUniform => "bounded-uniform",
        NoiseKind::TruncatedGaussian => "truncated-gaussian",
    }
}

impl Report {
    pub fn violations(&self) -> Vec<BoundViolation> {
        match self {
            Report::Regret(r) if r.bound_applies() => r.violations(),
            _ => Vec::new(),
        }
    }

    fn csv(&self) -> OutputFile {
        let mut out = String::new();
        match self {
            Report::Regret(r) => {
                out.push_str(REGRET_HEADER);
                out.push('\n');
                let epochs = r.users.first().map_or(0, |u| u.avg_regret.len());
                for t in 0..epochs {
                    for (s, u) in r.users.iter().enumerate() {
                        let bound = float(u.bound[t]);
                        for (name, v) in u.benchmarks.iter().zip(&u.avg_regret[t]) {
                            let _ = writeln!(out, "{},{s},{name},{},{bound}", t + 1, float(*v));
                        }
                        let _ = writeln!(out, "{},{s},max,{},{bound}", t + 1, float(u.max_regret(t)));
                    }
                }
                OutputFile {
                    name: "regret.csv",
                    contents: out,
                }
            }
            Report::Tracking(r) => {
                out.push_str(TRACKING_HEADER);
                out.push('\n');
                for row in &r.rows {
                    let _ = writeln!(out, "{},{},{},{}", row.epoch, row.user, row.policy, float(row.rate));
                }
                OutputFile {
                    name: "tracking.csv",
                    contents: out,
                }
            }
            Report::StaticMac(r) => {
                out.push_str(EFFICIENCY_HEADER);
                out.push('\n');
                for (run, eff) in r.runs.iter().zip(&r.efficiency) {
                    let noise = if run.noisy { "noisy" } else { "perfect" };
                    for (i, e) in eff.efficiency.iter().enumerate() {
                        let _ = writeln!(out, "{},{},{noise},{}", i + 1, run.policy.name(), float(*e));
                    }
                }
                OutputFile {
                    name: "efficiency.csv",
                    contents: out,
                }
            }
        }
    }

    fn metadata(&self, config: &ScenarioConfig) -> Result<OutputFile> {
        let model = NoiseModel::from_config(&config.noise_model);
        let mut meta = Metadata {
            kind: match config.kind {
                ExperimentKind::Regret => "regret",
                ExperimentKind::Tracking => "tracking",
                ExperimentKind::StaticMac => "static-mac",
            },
            policy: config.policy.name(),
            seed: config.rng_seed,
            horizon: config.horizon,
            eta: config.eta,
            noise: noise_name(config.noise_model.kind, &model),
            regret: None,
            efficiency: None,
            truncation_rate: None,
        };
        let stats = match self {
            Report::Regret(r) => {
                meta.policy = r.policy.name();
                meta.regret = Some(RegretMetadata {
                    gradient_bound: r.users.iter().map(|u| u.gradient_bound).collect(),
                    noise_bound: r.users.iter().map(|u| u.noise_bound).collect(),
                    bound_constant: r.users.iter().map(|u| u.bound_constant).collect(),
                    bound_checked: r.bound_applies(),
                    violations: self.violations().len(),
                });
                r.noise_stats
            }
            Report::Tracking(r) => {
                meta.policy = r.policy.name();
                r.noise_stats
            }
            Report::StaticMac(r) => {
                meta.policy = "axl,iwf,swf";
                meta.efficiency = Some(MacMetadata {
                    psi_max: r.psi_max,
                    psi_min: r.psi_min,
                    capacity: r.capacity,
                    capacity_gap: r.capacity_gap,
                    vertex_samples: r.vertex_samples,
                });
                r.runs.iter().fold(NoiseStats::default(), |acc, run| NoiseStats {
                    draws: acc.draws + run.noise_stats.draws,
                    rejections: acc.rejections + run.noise_stats.rejections,
                })
            }
        };
        if config.noise_model.kind == NoiseKind::TruncatedGaussian && !model.is_none() {
            meta.truncation_rate = Some(stats.truncation_rate());
        }
        let contents = toml::to_string(&meta).map_err(|e| Error::InvalidInput(format!("metadata: {e}")))?;
        Ok(OutputFile {
            name: "metadata.toml",
            contents,
        })
    }

    /// CSV data file followed by the metadata file.
    pub fn files(&self, config: &ScenarioConfig) -> Result<Vec<OutputFile>> {
        Ok(vec![self.csv(), self.metadata(config)?])
    }
}

/// Writes every output file into `dir`, creating it if needed.
pub fn write_files(files: &[OutputFile], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for f in files {
        std::fs::write(dir.join(f.name), &f.contents)?;
    }
    Ok(())
}

/// Runs the experiment selected by `config.kind`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Report> {
    config.validate()?;
    match config.kind {
        ExperimentKind::Regret | ExperimentKind::Tracking => run_dynamic(config),
        ExperimentKind::StaticMac => run_static_mac(config),
    }
}

enum Player {
    Axl(AxlState),
    Fixed(TransmitProfile),
    Randomized(RandomizedState),
    /// Best response to the channels seen in the previous epoch.
    WaterFill {
        simultaneous: bool,
        profile: TransmitProfile,
        last: Option<ChannelEpoch>,
    },
}

impl Player {
    fn new(kind: PolicyKind, cs: &ConstraintSet, config: &ScenarioConfig) -> Result<Self> {
        Ok(match kind {
            PolicyKind::Axl => Player::Axl(AxlState::new(cs, config.eta)?),
            PolicyKind::Uniform => Player::Fixed(uniform_profile(cs)?),
            PolicyKind::Randomized => Player::Randomized(RandomizedState::new(cs, config.randomized_discount)?),
            PolicyKind::Iwf | PolicyKind::Swf => Player::WaterFill {
                simultaneous: kind == PolicyKind::Swf,
                profile: uniform_profile(cs)?,
                last: None,
            },
        })
    }

    /// Profile for epoch `t`; sequential water-filling lets user `t mod S` move.
    #[allow(clippy::too_many_arguments)]
    fn profile(
        &mut self,
        cs: &ConstraintSet,
        user: usize,
        users: usize,
        t: usize,
        noise: &NoiseModel,
        rng: &mut impl Rng,
        stats: &mut NoiseStats,
    ) -> Result<TransmitProfile> {
        match self {
            Player::Axl(st) => st.profile(cs),
            Player::Fixed(p) => Ok(p.clone()),
            Player::Randomized(st) => st.profile(cs),
            Player::WaterFill {
                simultaneous,
                profile,
                last,
            } => {
                if let Some(e) = last.as_ref() {
                    if *simultaneous || (t - 1) % users == user {
                        *profile = noisy_best_response(e, cs, noise, rng, stats)?;
                    }
                }
                Ok(profile.clone())
            }
        }
    }

    fn observe(
        &mut self,
        played: &TransmitProfile,
        epoch: ChannelEpoch,
        gradients: &[HermitianMatrix],
        noise: &NoiseModel,
        rng: &mut impl Rng,
        stats: &mut NoiseStats,
    ) -> Result<()> {
        match self {
            Player::Axl(st) => {
                let seen = noise.observe_gradients(gradients, rng, stats)?;
                *st = st.update(played, &seen)?;
            }
            Player::Fixed(_) => {}
            Player::Randomized(st) => *st = st.step(rng),
            Player::WaterFill { last, .. } => *last = Some(epoch),
        }
        Ok(())
    }
}

fn spectral_max(gradients: &[HermitianMatrix]) -> Result<f64> {
    gradients.iter().try_fold(0.0f64, |acc, g| Ok(acc.max(g.spectral_norm()?)))
}

fn run_dynamic(config: &ScenarioConfig) -> Result<Report> {
    let scenario = Scenario::build(config)?;
    let cons = scenario.constraints.clone();
    let users = cons.len();
    let mut net = NetworkState::new(scenario);
    let noise = NoiseModel::from_config(&config.noise_model);
    let tracking = config.kind == ExperimentKind::Tracking;
    let seed = config.rng_seed;

    let mut players = cons
        .iter()
        .map(|cs| Player::new(config.policy, cs, config))
        .collect::<Result<Vec<_>>>()?;
    let mut rngs: Vec<ChaCha8Rng> = (0..users).map(|s| stream(seed, POLICY_STREAM_BASE + s as u64)).collect();
    let mut noise_rngs: Vec<ChaCha8Rng> = (0..users).map(|s| stream(seed, NOISE_STREAM_BASE + s as u64)).collect();
    let mut stats = NoiseStats::default();

    let benchmarks: Vec<Vec<Benchmark>> = if tracking {
        Vec::new()
    } else {
        cons.iter().map(benchmark_set).collect::<Result<_>>()?
    };
    let mut ledgers = benchmarks
        .iter()
        .zip(&cons)
        .map(|(b, cs)| RegretLedger::new(b.iter().map(|x| x.name.clone()).collect(), cs, config.eta))
        .collect::<Result<Vec<_>>>()?;
    let mut curves: Vec<(Vec<Vec<f64>>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); ledgers.len()];

    // Comparison policies evaluated on the same channels in tracking runs.
    let uniform = cons.iter().map(uniform_profile).collect::<Result<Vec<_>>>()?;
    let mut shadows = if tracking {
        cons.iter()
            .map(|cs| RandomizedState::new(cs, config.randomized_discount))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let mut shadow_rngs: Vec<ChaCha8Rng> = (0..users).map(|s| stream(seed, SHADOW_STREAM_BASE + s as u64)).collect();
    let mut rows = Vec::new();

    for t in 0..config.horizon as usize {
        let mut played = Vec::with_capacity(users);
        for (s, player) in players.iter_mut().enumerate() {
            played.push(player.profile(&cons[s], s, users, t, &noise, &mut rngs[s], &mut stats)?);
        }
        for (s, p) in played.iter().enumerate() {
            net.set_transmit(s, p.lifted(&cons[s]))?;
        }
        for s in 0..users {
            let epoch = net.effective_channels(s)?;
            let phi = rate(&played[s], &epoch)?;
            let gradients = gradient_matrices(&played[s], &epoch)?;
            let norm = spectral_max(&gradients)?;
            if tracking {
                let name = config.policy.name();
                rows.push(TrackingRow { epoch: t + 1, user: s, policy: name, rate: phi });
                let optimum = instantaneous_optimum(&epoch, &cons[s])?.1;
                rows.push(TrackingRow { epoch: t + 1, user: s, policy: "optimum", rate: optimum });
                if name != "uniform" {
                    let r = rate(&uniform[s], &epoch)?;
                    rows.push(TrackingRow { epoch: t + 1, user: s, policy: "uniform", rate: r });
                }
                if name != "randomized" {
                    let r = rate(&shadows[s].profile(&cons[s])?, &epoch)?;
                    rows.push(TrackingRow { epoch: t + 1, user: s, policy: "randomized", rate: r });
                    shadows[s] = shadows[s].step(&mut shadow_rngs[s]);
                }
            } else {
                let comparators = benchmarks[s]
                    .iter()
                    .map(|b| rate(&b.profile, &epoch))
                    .collect::<Result<Vec<_>>>()?;
                let sigma = gradients
                    .iter()
                    .try_fold(0.0f64, |acc, g| Ok::<_, Error>(acc.max(noise.bound(g.spectral_norm()?))))?;
                let ledger = &mut ledgers[s];
                ledger.record(phi, &comparators, norm, sigma)?;
                let done = ledger.epochs();
                let avg = (0..comparators.len())
                    .map(|b| (ledger.benchmark_total(b) - ledger.policy_total()) / done as f64)
                    .collect();
                curves[s].0.push(avg);
                curves[s].1.push(ledger.theoretical_bound(done));
            }
            players[s].observe(&played[s], epoch, &gradients, &noise, &mut noise_rngs[s], &mut stats)?;
        }
        net.advance_epoch();
    }

    let noisy = !noise.is_none();
    if tracking {
        return Ok(Report::Tracking(TrackingReport {
            policy: config.policy,
            noisy,
            rows,
            noise_stats: stats,
        }));
    }
    let users = ledgers
        .into_iter()
        .zip(curves)
        .map(|(l, (avg_regret, bound))| UserRegret {
            benchmarks: l.benchmarks().to_vec(),
            avg_regret,
            bound,
            gradient_bound: l.gradient_bound(),
            noise_bound: l.noise_bound(),
            bound_constant: l.bound_constant(),
        })
        .collect();
    Ok(Report::Regret(RegretReport {
        policy: config.policy,
        noisy,
        users,
        noise_stats: stats,
    }))
}

fn run_static_mac(config: &ScenarioConfig) -> Result<Report> {
    let instance = MacInstance::from_config(config)?;
    let iterations = config.horizon as usize;
    let noise = NoiseModel::from_config(&config.noise_model);
    let mut settings = vec![NoiseModel::none()];
    if !noise.is_none() {
        settings.push(noise);
    }
    let mut runs = Vec::new();
    for (i, model) in settings.iter().enumerate() {
        for (j, policy) in MacPolicy::ALL.into_iter().enumerate() {
            let mut rng = stream(config.rng_seed, MAC_NOISE_STREAM + ((i * 3 + j) as u64) * 16);
            runs.push(run_dynamics(&instance, policy, iterations, config.eta, model, &mut rng)?);
        }
    }
    let capacity = sum_capacity(&instance, CAPACITY_TOLERANCE)?;
    let floor = sum_rate_floor(&instance, VERTEX_SAMPLES, &mut stream(config.rng_seed, FLOOR_STREAM))?;
    let efficiency = efficiency_reports(&runs, &capacity, floor)?;
    let (psi_max, psi_min) = efficiency
        .first()
        .map_or((capacity.value, floor.0), |e| (e.psi_max, e.psi_min));
    Ok(Report::StaticMac(MacReport {
        runs,
        efficiency,
        capacity: capacity.value,
        capacity_gap: capacity.gap,
        psi_max,
        psi_min,
        vertex_samples: floor.1,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::oracle::Objective;
    use crate::policies::waterfill::best_response;

    fn small(kind: ExperimentKind, policy: PolicyKind, horizon: u64) -> ScenarioConfig {
        ScenarioConfig {
            kind,
            policy,
            subcarriers: 4,
            num_su: 2,
            num_pu: 1,
            horizon,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn zero_horizon_has_no_rows() {
        let cfg = small(ExperimentKind::Regret, PolicyKind::Axl, 0);
        let files = run_scenario(&cfg).unwrap().files(&cfg).unwrap();
        assert_eq!(files[0].contents, format!("{REGRET_HEADER}\n"));
    }

    #[test]
    fn regret_rows_and_bound() {
        let cfg = small(ExperimentKind::Regret, PolicyKind::Axl, 40);
        let report = run_scenario(&cfg).unwrap();
        let Report::Regret(r) = &report else { panic!() };
        assert_eq!(r.users.len(), 2);
        assert!(r.bound_applies());
        assert!(report.violations().is_empty());
        let csv = &report.files(&cfg).unwrap()[0].contents;
        // uniform, closed-0, closed-1 and max, per user and epoch.
        assert_eq!(csv.lines().count(), 1 + 40 * 2 * 4);
        let first: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(first[..3], ["1", "0", "uniform"]);
        let digits = first[3].trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(digits.len(), 18);
        assert!(first[3].parse::<f64>().is_ok());
    }

    #[test]
    fn uniform_policy_has_no_regret_against_itself() {
        let cfg = small(ExperimentKind::Regret, PolicyKind::Uniform, 20);
        let Report::Regret(r) = run_scenario(&cfg).unwrap() else { panic!() };
        for u in &r.users {
            assert!(u.avg_regret.iter().all(|row| row[0].abs() < 1e-12));
        }
    }

    #[test]
    fn tracking_optimum_dominates() {
        for policy in [PolicyKind::Axl, PolicyKind::Randomized, PolicyKind::Iwf, PolicyKind::Swf] {
            let cfg = small(ExperimentKind::Tracking, policy, 15);
            let Report::Tracking(r) = run_scenario(&cfg).unwrap() else { panic!() };
            let per = if policy == PolicyKind::Randomized { 3 } else { 4 };
            assert_eq!(r.rows.len(), 15 * 2 * per);
            for chunk in r.rows.chunks(per) {
                let opt = chunk.iter().find(|x| x.policy == "optimum").unwrap().rate;
                assert!(chunk.iter().all(|x| x.rate <= opt + 1e-9), "{chunk:?}");
            }
        }
    }

    #[test]
    fn simultaneous_water_filling_plays_the_best_response() {
        let cfg = ScenarioConfig {
            num_su: 1,
            ..small(ExperimentKind::Tracking, PolicyKind::Swf, 3)
        };
        // Without other users and with static channels the best response to
        // the last epoch is optimal for the next.
        let cfg = ScenarioConfig {
            user_speed: crate::config::Spread::Fixed(0.0),
            pu_arrival_rate: 1e-9,
            pu_departure_rate: 1e-9,
            ..cfg
        };
        let Report::Tracking(r) = run_scenario(&cfg).unwrap() else { panic!() };
        let later: Vec<&TrackingRow> = r.rows.iter().filter(|x| x.epoch > 1).collect();
        let swf = later.iter().find(|x| x.policy == "swf").unwrap().rate;
        let opt = later.iter().find(|x| x.policy == "optimum").unwrap().rate;
        assert!((swf - opt).abs() < 1e-9);

        let scenario = Scenario::build(&cfg).unwrap();
        let mut net = NetworkState::new(scenario.clone());
        let e = net.effective_channels(0).unwrap();
        assert!((best_response(&e, &scenario.constraints[0]).unwrap().1 - opt).abs() < 1e-9);
    }

    #[test]
    fn byte_identical_reruns() {
        let mut cfg = small(ExperimentKind::Regret, PolicyKind::Axl, 25);
        cfg.noise_model = crate::config::NoiseModelConfig {
            kind: NoiseKind::TruncatedGaussian,
            sigma: None,
            relative_level: Some(0.5),
        };
        let a = run_scenario(&cfg).unwrap().files(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap().files(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a[1].contents.contains("truncation_rate"));
        let Report::Regret(r) = run_scenario(&cfg).unwrap() else { panic!() };
        assert!(!r.bound_applies());
        assert!(r.users.iter().all(|u| u.noise_bound > 0.0));
    }

    #[test]
    fn single_user_mac_reaches_water_filling_capacity() {
        let cfg = ScenarioConfig {
            kind: ExperimentKind::StaticMac,
            num_su: 1,
            subcarriers: 4,
            rx_antennas: 3,
            horizon: 300,
            ..ScenarioConfig::default()
        };
        let Report::StaticMac(r) = run_scenario(&cfg).unwrap() else { panic!() };
        assert_eq!(r.runs.len(), 3);
        let instance = MacInstance::from_config(&cfg).unwrap();
        let cs = &instance.constraints()[0];
        let e = instance.effective_epoch(&[uniform_profile(cs).unwrap()], 0).unwrap();
        let (_, wf) = best_response(&e, cs).unwrap();
        assert!((r.capacity - wf).abs() < 1e-6, "{} vs {wf}", r.capacity);
        let (_, eff) = r.run(MacPolicy::Axl, false).unwrap();
        assert!(*eff.efficiency.last().unwrap() >= 0.999);
    }
}
