//! Augmented exponential learning.

use crate::error::{Error, Result};
use crate::hermitian::{DensityMatrix, HermitianMatrix};
use crate::maps::{capped_gibbs_map, gibbs_map, matrix_gibbs_map};
use crate::rate::{ConstraintSet, PowerMode, TransmitProfile};

/// Which parts of the profile are learned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Powers and covariances.
    Full,
    /// Powers only; every `Q_k` stays at `I/m_k`.
    PowerOnly,
    /// Covariances only; powers stay uniform.
    CovarianceOnly,
}

/// Learner state: `t` completed updates, power scores `y_k` and covariance
/// scores `Y_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct AxlState {
    t: u64,
    eta: f64,
    power_scores: Vec<f64>,
    covariance_scores: Vec<HermitianMatrix>,
    mode: PowerMode,
    variant: Variant,
}

impl AxlState {
    pub fn new(constraints: &ConstraintSet, eta: f64) -> Result<Self> {
        Self::with_variant(constraints, eta, Variant::Full)
    }

    pub fn with_variant(constraints: &ConstraintSet, eta: f64, variant: Variant) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidInput(format!("learning rate must be positive, got {eta}")));
        }
        Ok(Self {
            t: 0,
            eta,
            power_scores: vec![0.0; constraints.carriers()],
            covariance_scores: constraints
                .open_dims()
                .into_iter()
                .map(HermitianMatrix::zeros)
                .collect(),
            mode: constraints.mode(),
            variant,
        })
    }

    /// State with explicit scores after `t` updates.
    pub fn with_scores(
        constraints: &ConstraintSet,
        eta: f64,
        t: u64,
        power_scores: Vec<f64>,
        covariance_scores: Vec<HermitianMatrix>,
    ) -> Result<Self> {
        let mut s = Self::new(constraints, eta)?;
        if power_scores.len() != s.power_scores.len()
            || covariance_scores.len() != s.covariance_scores.len()
            || covariance_scores
                .iter()
                .zip(&s.covariance_scores)
                .any(|(a, b)| a.dim() != b.dim())
        {
            return Err(Error::dims("scores do not match the constraint set"));
        }
        if power_scores.iter().any(|v| !v.is_finite()) || covariance_scores.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidInput("scores must be finite".into()));
        }
        s.t = t;
        s.power_scores = power_scores;
        s.covariance_scores = covariance_scores;
        Ok(s)
    }

    /// Overrides the automatic simple/capped selection.
    pub fn with_power_mode(mut self, mode: PowerMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn epoch(&self) -> u64 {
        self.t
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn mode(&self) -> PowerMode {
        self.mode
    }

    pub fn power_scores(&self) -> &[f64] {
        &self.power_scores
    }

    pub fn covariance_scores(&self) -> &[HermitianMatrix] {
        &self.covariance_scores
    }

    /// `γ = η / √max(t, 1)`.
    pub fn discount(&self) -> f64 {
        self.eta / (self.t.max(1) as f64).sqrt()
    }

    pub fn profile(&self, constraints: &ConstraintSet) -> Result<TransmitProfile> {
        let gamma = self.discount();
        let budget = constraints.total_power();
        let k = constraints.carriers();
        let powers = if self.variant == Variant::CovarianceOnly {
            crate::policies::baselines::uniform_powers(constraints)?
        } else {
            let scaled: Vec<f64> = self.power_scores.iter().map(|v| gamma * v).collect();
            match self.mode {
                PowerMode::Simple => gibbs_map(&scaled)?
                    .into_inner()
                    .into_iter()
                    .map(|q| budget * q)
                    .collect(),
                PowerMode::Capped => capped_gibbs_map(&scaled, constraints.caps(), budget)?.powers,
            }
        };
        let covariances = if self.variant == Variant::PowerOnly {
            constraints
                .open_dims()
                .into_iter()
                .map(DensityMatrix::maximally_mixed)
                .collect()
        } else {
            (0..k)
                .map(|i| matrix_gibbs_map(&self.covariance_scores[i].scale(gamma)))
                .collect::<Result<Vec<_>>>()?
        };
        TransmitProfile::new(powers, covariances, constraints)
    }

    /// `y_k += P tr(M̂_k Q_k)`, `Y_k += p_k M̂_k`, `t += 1`.
    pub fn update(&self, profile: &TransmitProfile, observed: &[HermitianMatrix]) -> Result<Self> {
        if observed.len() != self.power_scores.len() || profile.carriers() != observed.len() {
            return Err(Error::dims(format!(
                "{} gradients for {} carriers",
                observed.len(),
                self.power_scores.len()
            )));
        }
        let budget = profile.total_power();
        let mut next = self.clone();
        for (k, m) in observed.iter().enumerate() {
            if m.dim() != next.covariance_scores[k].dim() {
                return Err(Error::dims(format!("gradient of carrier {k}")));
            }
            next.power_scores[k] += budget * m.inner(profile.covariances()[k].as_hermitian());
            next.covariance_scores[k] += &m.scale(profile.powers()[k]);
        }
        next.t += 1;
        Ok(next)
    }
}
