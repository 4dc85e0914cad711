//! Fixed and randomized comparison policies, and the tuned learning rate.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hermitian::{CMatrix, DensityMatrix, HermitianMatrix, C64};
use crate::rate::{ConstraintSet, TransmitProfile};

/// `η* = √A / (2PM)` with `A = ln K + Σ_k ln m_k`, the minimiser of
/// `R(η) = A/η + 4P²M²η`.
pub fn optimal_eta(power: f64, gradient_bound: f64, open_dims: &[usize]) -> Result<f64> {
    let a = entropy_term(open_dims)?;
    if !(power > 0.0 && gradient_bound > 0.0) || !(power * gradient_bound).is_finite() {
        return Err(Error::InvalidInput(format!(
            "power and gradient bound must be positive, got {power} and {gradient_bound}"
        )));
    }
    if a == 0.0 {
        return Err(Error::InvalidInput(
            "one carrier with one open dimension leaves nothing to learn".into(),
        ));
    }
    Ok(a.sqrt() / (2.0 * power * gradient_bound))
}

/// `A = ln K + Σ_k ln m_k`.
pub fn entropy_term(open_dims: &[usize]) -> Result<f64> {
    if open_dims.is_empty() || open_dims.contains(&0) {
        return Err(Error::InvalidInput("need at least one carrier and one open dimension each".into()));
    }
    Ok((open_dims.len() as f64).ln() + open_dims.iter().map(|&m| (m as f64).ln()).sum::<f64>())
}

/// `P/K` per carrier, clipped to the caps with the excess shared equally among
/// the carriers still below their caps.
pub fn uniform_powers(constraints: &ConstraintSet) -> Result<Vec<f64>> {
    let caps = constraints.caps();
    let mut powers = vec![0.0; caps.len()];
    let mut open: Vec<usize> = (0..caps.len()).collect();
    let mut remaining = constraints.total_power();
    while !open.is_empty() && remaining > 0.0 {
        let share = remaining / open.len() as f64;
        let saturated: Vec<usize> = open.iter().copied().filter(|&k| caps[k] <= share).collect();
        if saturated.is_empty() {
            for &k in &open {
                powers[k] = share;
            }
            remaining = 0.0;
        } else {
            for &k in &saturated {
                powers[k] = caps[k];
                remaining -= caps[k];
            }
            open.retain(|k| !saturated.contains(k));
        }
    }
    if remaining > 1e-9 * constraints.total_power() {
        return Err(Error::Infeasible {
            budget: constraints.total_power(),
            cap_sum: caps.iter().sum(),
        });
    }
    Ok(powers)
}

pub fn uniform_profile(constraints: &ConstraintSet) -> Result<TransmitProfile> {
    let covs = constraints
        .open_dims()
        .into_iter()
        .map(DensityMatrix::maximally_mixed)
        .collect();
    TransmitProfile::new(uniform_powers(constraints)?, covs, constraints)
}

/// Fixed comparison profile with a display name.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub name: String,
    pub profile: TransmitProfile,
}

/// Uniform power with the listed reduced-basis dimensions closed on every carrier.
pub fn closed_dimension_profile(constraints: &ConstraintSet, closed: &[usize]) -> Result<TransmitProfile> {
    let powers = uniform_powers(constraints)?;
    let covs = constraints
        .open_dims()
        .into_iter()
        .map(|m| {
            if closed.iter().any(|&c| c >= m) {
                return Err(Error::InvalidInput(format!("cannot close dimension beyond {m}")));
            }
            let keep = m - closed.len();
            if keep == 0 {
                return Err(Error::InvalidInput("closing every transmit dimension".into()));
            }
            let diag: Vec<f64> = (0..m)
                .map(|i| if closed.contains(&i) { 0.0 } else { 1.0 / keep as f64 })
                .collect();
            DensityMatrix::new(HermitianMatrix::from_real_diagonal(&diag))
        })
        .collect::<Result<Vec<_>>>()?;
    TransmitProfile::new(powers, covs, constraints)
}

/// The uniform profile plus every profile closing one or two of the transmit
/// dimensions available on all carriers.
pub fn benchmark_set(constraints: &ConstraintSet) -> Result<Vec<Benchmark>> {
    let mut out = vec![Benchmark {
        name: "uniform".into(),
        profile: uniform_profile(constraints)?,
    }];
    let m = constraints.open_dims().into_iter().min().unwrap_or(1);
    let mut subsets: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
    for i in 0..m {
        for j in (i + 1)..m {
            subsets.push(vec![i, j]);
        }
    }
    for closed in subsets.into_iter().filter(|s| s.len() < m) {
        let name = format!(
            "closed-{}",
            closed.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("-")
        );
        out.push(Benchmark {
            name,
            profile: closed_dimension_profile(constraints, &closed)?,
        });
    }
    Ok(out)
}

/// `GG† / tr(GG†)` with `G` an `m × m` standard complex Gaussian matrix.
pub fn sample_unit_trace_psd(m: usize, rng: &mut impl Rng) -> DensityMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let g = CMatrix::from_fn(m, m, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * h, im * h)
    });
    let gram = HermitianMatrix::gram(&g);
    let tr = gram.trace();
    DensityMatrix::from_trusted(gram.scale(1.0 / tr))
}

/// Uniform power with covariances `Q(t+1) = (1 − r) Q(t) + r R(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomizedState {
    discount: f64,
    covariances: Vec<DensityMatrix>,
}

impl RandomizedState {
    pub fn new(constraints: &ConstraintSet, discount: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&discount) {
            return Err(Error::InvalidInput(format!("discount must lie in [0, 1], got {discount}")));
        }
        Ok(Self {
            discount,
            covariances: constraints
                .open_dims()
                .into_iter()
                .map(DensityMatrix::maximally_mixed)
                .collect(),
        })
    }

    pub fn covariances(&self) -> &[DensityMatrix] {
        &self.covariances
    }

    pub fn profile(&self, constraints: &ConstraintSet) -> Result<TransmitProfile> {
        TransmitProfile::new(uniform_powers(constraints)?, self.covariances.clone(), constraints)
    }

    pub fn step(&self, rng: &mut impl Rng) -> Self {
        let r = self.discount;
        let covariances = self
            .covariances
            .iter()
            .map(|q| {
                let sample = sample_unit_trace_psd(q.dim(), rng);
                let mix = &q.as_hermitian().scale(1.0 - r) + &sample.as_hermitian().scale(r);
                DensityMatrix::from_trusted(mix)
            })
            .collect();
        Self {
            discount: r,
            covariances,
        }
    }
}
