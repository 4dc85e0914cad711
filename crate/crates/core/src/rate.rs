//! Achievable rate of one secondary user, its gradients, and the feasible set.
//!
//! Everything here lives in the reduced (null-shaped) coordinates: carrier `k`
//! has `m_k` open dimensions spanned by the orthonormal columns of `N_k`, and
//! a covariance `Q_k` is an `m_k × m_k` density matrix. [`TransmitProfile::lifted`]
//! maps back to antenna space via `N_k (p_k Q_k) N_k†`.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::hermitian::{nullspace_basis, CMatrix, DensityMatrix, HermitianMatrix, C64};

const FEASIBILITY_TOL: f64 = 1e-9;

/// Power budget, per-carrier caps and null-shaping bases of one user.
#[derive(Clone, Debug)]
pub struct ConstraintSet {
    total_power: f64,
    caps: Vec<f64>,
    null_bases: Vec<CMatrix>,
}

/// Which power map a learner must use for a constraint set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PowerMode {
    /// Every cap is at least the total budget, so caps never bind.
    Simple,
    Capped,
}

impl ConstraintSet {
    pub fn new(total_power: f64, caps: Vec<f64>, null_bases: Vec<CMatrix>) -> Result<Self> {
        if caps.is_empty() || caps.len() != null_bases.len() {
            return Err(Error::InvalidConstraint(format!(
                "{} caps for {} null-shaping bases",
                caps.len(),
                null_bases.len()
            )));
        }
        if !(total_power > 0.0) || !total_power.is_finite() {
            return Err(Error::InvalidConstraint(format!(
                "total power must be positive, got {total_power}"
            )));
        }
        if caps.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidConstraint("per-carrier caps must be positive".into()));
        }
        let cap_sum: f64 = caps.iter().sum();
        if total_power > cap_sum * (1.0 + 1e-12) {
            return Err(Error::Infeasible {
                budget: total_power,
                cap_sum,
            });
        }
        for (k, n) in null_bases.iter().enumerate() {
            if n.ncols() == 0 || n.ncols() > n.nrows() {
                return Err(Error::InvalidConstraint(format!(
                    "carrier {k} has {} open dimensions out of {}",
                    n.ncols(),
                    n.nrows()
                )));
            }
            let defect = n.adjoint() * n - CMatrix::identity(n.ncols(), n.ncols());
            if defect.iter().any(|z| z.norm() > 1e-10) {
                return Err(Error::InvalidConstraint(format!(
                    "null-shaping basis of carrier {k} is not orthonormal"
                )));
            }
        }
        Ok(Self {
            total_power,
            caps,
            null_bases,
        })
    }

    /// `K` carriers, `m` antennas, no caps and no null-shaping.
    pub fn unconstrained(carriers: usize, antennas: usize, total_power: f64) -> Result<Self> {
        Self::new(
            total_power,
            vec![total_power; carriers],
            vec![CMatrix::identity(antennas, antennas); carriers],
        )
    }

    /// Builds the bases from forbidden-direction matrices `U_k` (one per
    /// carrier, `None` meaning unconstrained).
    pub fn with_null_shaping(
        total_power: f64,
        caps: Vec<f64>,
        antennas: usize,
        forbidden: &[Option<CMatrix>],
    ) -> Result<Self> {
        let bases = forbidden
            .iter()
            .map(|u| match u {
                Some(u) if u.nrows() != antennas => Err(Error::InvalidConstraint(format!(
                    "null-shaping matrix has {} rows for {antennas} antennas",
                    u.nrows()
                ))),
                Some(u) => nullspace_basis(u),
                None => Ok(CMatrix::identity(antennas, antennas)),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(total_power, caps, bases)
    }

    pub fn carriers(&self) -> usize {
        self.caps.len()
    }

    pub fn total_power(&self) -> f64 {
        self.total_power
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    pub fn null_basis(&self, k: usize) -> &CMatrix {
        &self.null_bases[k]
    }

    pub fn antennas(&self, k: usize) -> usize {
        self.null_bases[k].nrows()
    }

    pub fn open_dims(&self) -> Vec<usize> {
        self.null_bases.iter().map(|n| n.ncols()).collect()
    }

    pub fn mode(&self) -> PowerMode {
        if self.caps.iter().any(|&c| c < self.total_power) {
            PowerMode::Capped
        } else {
            PowerMode::Simple
        }
    }

    /// L¹ diameter of the feasible set in reduced coordinates.
    pub fn diameter(&self) -> f64 {
        2.0 * self.total_power
    }
}

/// Decision variable `P = diag(p_1 Q_1, …, p_K Q_K)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransmitProfile {
    powers: Vec<f64>,
    covariances: Vec<DensityMatrix>,
}

impl TransmitProfile {
    pub fn new(
        powers: Vec<f64>,
        covariances: Vec<DensityMatrix>,
        constraints: &ConstraintSet,
    ) -> Result<Self> {
        let dims = constraints.open_dims();
        if powers.len() != dims.len() || covariances.len() != dims.len() {
            return Err(Error::dims(format!(
                "profile has {} powers and {} covariances for {} carriers",
                powers.len(),
                covariances.len(),
                dims.len()
            )));
        }
        for (k, (q, &m)) in covariances.iter().zip(&dims).enumerate() {
            if q.dim() != m {
                return Err(Error::dims(format!(
                    "carrier {k}: covariance is {}x{} but {m} dimensions are open",
                    q.dim(),
                    q.dim()
                )));
            }
        }
        let budget = constraints.total_power();
        let tol = FEASIBILITY_TOL * budget.max(1.0);
        for (k, (&p, &cap)) in powers.iter().zip(constraints.caps()).enumerate() {
            if !(p >= -tol) || p > cap + tol {
                return Err(Error::InvalidInput(format!(
                    "carrier {k}: power {p} outside [0, {cap}]"
                )));
            }
        }
        let total: f64 = powers.iter().sum();
        if (total - budget).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "powers sum to {total}, budget is {budget}"
            )));
        }
        Ok(Self {
            powers: powers.into_iter().map(|p| p.max(0.0)).collect(),
            covariances,
        })
    }

    pub fn carriers(&self) -> usize {
        self.powers.len()
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn covariances(&self) -> &[DensityMatrix] {
        &self.covariances
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    /// `p_k Q_k` in reduced coordinates.
    pub fn carrier_covariance(&self, k: usize) -> HermitianMatrix {
        self.covariances[k].as_hermitian().scale(self.powers[k])
    }

    /// `N_k p_k Q_k N_k†` in antenna coordinates, one per carrier.
    pub fn lifted(&self, constraints: &ConstraintSet) -> Vec<HermitianMatrix> {
        (0..self.carriers())
            .map(|k| self.carrier_covariance(k).congruence(constraints.null_basis(k)))
            .collect()
    }

    /// `Σ_k ‖p_k Q_k − p'_k Q'_k‖₁` (trace norm per carrier).
    pub fn l1_distance(&self, other: &TransmitProfile) -> Result<f64> {
        let mut d = 0.0;
        for k in 0..self.carriers() {
            d += (&self.carrier_covariance(k) - &other.carrier_covariance(k)).trace_norm()?;
        }
        Ok(d)
    }
}

/// Effective channels `H̃_k = W_k^{-1/2} H_k N_k` seen by one user in one epoch.
#[derive(Clone, Debug)]
pub struct ChannelEpoch {
    pub epoch: u64,
    /// `n_k × m_k` per carrier.
    pub channels: Vec<CMatrix>,
    /// Running maximum of `‖H̃_k‖`; bounds `‖M_k‖` by its square.
    pub bound_estimate: f64,
}

impl ChannelEpoch {
    pub fn new(epoch: u64, channels: Vec<CMatrix>) -> Result<Self> {
        if channels
            .iter()
            .any(|h| h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()))
        {
            return Err(Error::InvalidInput("channel has non-finite entries".into()));
        }
        let mut bound: f64 = 0.0;
        for h in &channels {
            bound = bound.max(operator_norm(h)?);
        }
        Ok(Self {
            epoch,
            channels,
            bound_estimate: bound,
        })
    }

    pub fn carriers(&self) -> usize {
        self.channels.len()
    }
}

/// Spectral norm of a rectangular matrix.
pub fn operator_norm(h: &CMatrix) -> Result<f64> {
    if h.is_empty() {
        return Ok(0.0);
    }
    let gram = if h.nrows() <= h.ncols() {
        HermitianMatrix::gram(h)
    } else {
        HermitianMatrix::gram(&h.adjoint())
    };
    Ok(gram.spectral_norm()?.max(0.0).sqrt())
}

fn check_dims(profile: &TransmitProfile, epoch: &ChannelEpoch) -> Result<()> {
    if profile.carriers() != epoch.carriers() {
        return Err(Error::dims(format!(
            "profile has {} carriers, channel epoch has {}",
            profile.carriers(),
            epoch.carriers()
        )));
    }
    for (k, (q, h)) in profile.covariances().iter().zip(&epoch.channels).enumerate() {
        if h.ncols() != q.dim() {
            return Err(Error::dims(format!(
                "carrier {k}: channel has {} columns, covariance is {}x{}",
                h.ncols(),
                q.dim(),
                q.dim()
            )));
        }
    }
    Ok(())
}

/// `I + H X H†`, positive-definite for PSD `X`.
fn whitened_gram(h: &CMatrix, x: &HermitianMatrix) -> CMatrix {
    let n = h.nrows();
    let mut a = h * x.as_matrix() * h.adjoint();
    for i in 0..n {
        a[(i, i)] += C64::new(1.0, 0.0);
    }
    HermitianMatrix::symmetrized(a).into_matrix()
}

pub(crate) fn log_det_pd(a: CMatrix) -> Result<f64> {
    let n = a.nrows();
    let chol = Cholesky::new(a).ok_or_else(|| {
        Error::InvalidInput("log-det argument is not positive-definite".into())
    })?;
    let l = chol.l_dirty();
    Ok((0..n).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// `ln det(I + H̃ (p Q) H̃†)` for one carrier.
pub fn carrier_rate(h: &CMatrix, covariance: &HermitianMatrix) -> Result<f64> {
    if h.nrows() == 0 {
        return Ok(0.0);
    }
    log_det_pd(whitened_gram(h, covariance))
}

/// `Φ(P; t) = Σ_k ln det(I + H̃_k p_k Q_k H̃_k†)` in nats.
pub fn rate(profile: &TransmitProfile, epoch: &ChannelEpoch) -> Result<f64> {
    check_dims(profile, epoch)?;
    let mut total = 0.0;
    for (k, h) in epoch.channels.iter().enumerate() {
        if profile.powers()[k] == 0.0 {
            continue;
        }
        total += carrier_rate(h, &profile.carrier_covariance(k))?;
    }
    Ok(total)
}

/// `H̃† (I + H̃ X H̃†)^{-1} H̃`.
pub fn carrier_gradient(h: &CMatrix, covariance: &HermitianMatrix) -> Result<HermitianMatrix> {
    if h.nrows() == 0 {
        return Ok(HermitianMatrix::zeros(h.ncols()));
    }
    let a = whitened_gram(h, covariance);
    let chol = Cholesky::new(a).ok_or_else(|| {
        Error::InvalidInput("gradient kernel is not positive-definite".into())
    })?;
    let z = chol.solve(h);
    Ok(HermitianMatrix::symmetrized(h.adjoint() * z))
}

/// Matrix gradients `M_k = ∂Φ/∂P_k*`, one per carrier.
pub fn gradient_matrices(
    profile: &TransmitProfile,
    epoch: &ChannelEpoch,
) -> Result<Vec<HermitianMatrix>> {
    check_dims(profile, epoch)?;
    epoch
        .channels
        .iter()
        .enumerate()
        .map(|(k, h)| carrier_gradient(h, &profile.carrier_covariance(k)))
        .collect()
}

/// `v_k = P tr(M_k Q_k)`, the marginal utility of normalised power `q_k = p_k/P`.
pub fn marginal_utilities_from(
    profile: &TransmitProfile,
    gradients: &[HermitianMatrix],
) -> Vec<f64> {
    let budget = profile.total_power();
    gradients
        .iter()
        .zip(profile.covariances())
        .map(|(m, q)| budget * m.inner(q.as_hermitian()))
        .collect()
}

pub fn marginal_utilities(profile: &TransmitProfile, epoch: &ChannelEpoch) -> Result<Vec<f64>> {
    let grads = gradient_matrices(profile, epoch)?;
    Ok(marginal_utilities_from(profile, &grads))
}

/// `V_k = p_k M_k`.
pub fn covariance_gradients_from(
    profile: &TransmitProfile,
    gradients: &[HermitianMatrix],
) -> Vec<HermitianMatrix> {
    gradients
        .iter()
        .zip(profile.powers())
        .map(|(m, &p)| m.scale(p))
        .collect()
}

pub fn covariance_gradients(
    profile: &TransmitProfile,
    epoch: &ChannelEpoch,
) -> Result<Vec<HermitianMatrix>> {
    let grads = gradient_matrices(profile, epoch)?;
    Ok(covariance_gradients_from(profile, &grads))
}

/// `H̃_k N_k`: restricts a channel to the open dimensions of a carrier.
pub fn reduce_by_null_shaping(raw: &CMatrix, basis: &CMatrix) -> Result<CMatrix> {
    if raw.ncols() != basis.nrows() {
        return Err(Error::dims(format!(
            "channel has {} columns, null-shaping basis has {} rows",
            raw.ncols(),
            basis.nrows()
        )));
    }
    Ok(raw * basis)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use rand::Rng;

    pub fn random_matrix(r: usize, c: usize, rng: &mut impl Rng) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    pub fn random_density(m: usize, rng: &mut impl Rng) -> DensityMatrix {
        let g = random_matrix(m, m, rng);
        DensityMatrix::normalized(&HermitianMatrix::gram(&g)).unwrap()
    }

    pub fn random_profile(cs: &ConstraintSet, rng: &mut impl Rng) -> TransmitProfile {
        let k = cs.carriers();
        let powers = loop {
            let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            let p: Vec<f64> = w.iter().map(|x| x / s * cs.total_power()).collect();
            if p.iter().zip(cs.caps()).all(|(a, b)| a <= b) {
                break p;
            }
        };
        let covs = cs
            .open_dims()
            .into_iter()
            .map(|m| random_density(m, rng))
            .collect();
        TransmitProfile::new(powers, covs, cs).unwrap()
    }
}
