//! Imperfect gradient observations `M̂_k = M_k + Ξ_k`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{NoiseKind, NoiseModelConfig};
use crate::error::Result;
use crate::hermitian::{CMatrix, HermitianMatrix, C64};

/// Truncation point of the Gaussian perturbation, in standard deviations.
pub const TRUNCATION: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Magnitude {
    Absolute(f64),
    /// Fraction of the spectral norm of the matrix being perturbed.
    Relative(f64),
}

/// Zero-mean Hermitian perturbations with a hard spectral-norm bound.
///
/// * bounded-uniform: entries uniform in the unit square (diagonal real),
///   scaled so that `‖Ξ‖ ≤ Σ` where `Σ` is the magnitude.
/// * truncated-gaussian: entries with unit variance (real diagonal, circular
///   off-diagonal) redrawn whenever one exceeds [`TRUNCATION`], scaled by
///   `magnitude/m` so the root-mean-square Frobenius norm is about the
///   magnitude; the bound is `Σ = TRUNCATION · magnitude`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub magnitude: Magnitude,
}

/// Counters kept while drawing perturbations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NoiseStats {
    pub draws: u64,
    pub rejections: u64,
}

impl NoiseStats {
    /// Fraction of Gaussian candidates discarded by the truncation.
    pub fn truncation_rate(&self) -> f64 {
        let total = self.draws + self.rejections;
        if total == 0 {
            0.0
        } else {
            self.rejections as f64 / total as f64
        }
    }
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            magnitude: Magnitude::Absolute(0.0),
        }
    }

    pub fn from_config(cfg: &NoiseModelConfig) -> Self {
        let magnitude = match (cfg.sigma, cfg.relative_level) {
            (Some(s), _) => Magnitude::Absolute(s),
            (None, Some(r)) => Magnitude::Relative(r),
            (None, None) => Magnitude::Absolute(0.0),
        };
        Self {
            kind: cfg.kind,
            magnitude,
        }
    }

    pub fn is_none(&self) -> bool {
        self.kind == NoiseKind::None
            || matches!(self.magnitude, Magnitude::Absolute(s) | Magnitude::Relative(s) if s == 0.0)
    }

    fn magnitude_for(&self, reference_norm: f64) -> f64 {
        match self.magnitude {
            Magnitude::Absolute(s) => s,
            Magnitude::Relative(r) => r * reference_norm,
        }
    }

    /// Spectral-norm bound `Σ` of a perturbation of a matrix with norm `reference_norm`.
    pub fn bound(&self, reference_norm: f64) -> f64 {
        let s = self.magnitude_for(reference_norm);
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::BoundedUniform => s,
            NoiseKind::TruncatedGaussian => TRUNCATION * s,
        }
    }

    /// One perturbation of dimension `m` for a matrix with norm `reference_norm`.
    pub fn sample(
        &self,
        m: usize,
        reference_norm: f64,
        rng: &mut impl Rng,
        stats: &mut NoiseStats,
    ) -> HermitianMatrix {
        let s = self.magnitude_for(reference_norm);
        if self.kind == NoiseKind::None || s == 0.0 || m == 0 {
            return HermitianMatrix::zeros(m);
        }
        stats.draws += 1;
        let mut z = CMatrix::zeros(m, m);
        match self.kind {
            NoiseKind::None => unreachable!(),
            NoiseKind::BoundedUniform => {
                // |entry| ≤ √2, so ‖G‖ ≤ ‖G‖_F ≤ √2·m.
                let scale = s / (2f64.sqrt() * m as f64);
                for i in 0..m {
                    z[(i, i)] = C64::new(rng.gen_range(-1.0..1.0) * scale, 0.0);
                    for j in (i + 1)..m {
                        let v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale;
                        z[(i, j)] = v;
                        z[(j, i)] = v.conj();
                    }
                }
            }
            NoiseKind::TruncatedGaussian => {
                // Every |entry| ≤ TRUNCATION, so ‖G‖ ≤ TRUNCATION·m.
                let scale = s / m as f64;
                let h = std::f64::consts::FRAC_1_SQRT_2;
                'draw: loop {
                    for i in 0..m {
                        let d: f64 = rng.sample(StandardNormal);
                        if d.abs() > TRUNCATION {
                            stats.rejections += 1;
                            continue 'draw;
                        }
                        z[(i, i)] = C64::new(d * scale, 0.0);
                        for j in (i + 1)..m {
                            let re: f64 = rng.sample(StandardNormal);
                            let im: f64 = rng.sample(StandardNormal);
                            let v = C64::new(re * h, im * h);
                            if v.norm() > TRUNCATION {
                                stats.rejections += 1;
                                continue 'draw;
                            }
                            z[(i, j)] = v * scale;
                            z[(j, i)] = v.conj() * scale;
                        }
                    }
                    break;
                }
            }
        }
        HermitianMatrix::symmetrized(z)
    }

    /// `M̂_k = M_k + Ξ_k`; relative magnitudes refer to `‖M_k‖`.
    pub fn observe_gradients(
        &self,
        gradients: &[HermitianMatrix],
        rng: &mut impl Rng,
        stats: &mut NoiseStats,
    ) -> Result<Vec<HermitianMatrix>> {
        if self.is_none() {
            return Ok(gradients.to_vec());
        }
        gradients
            .iter()
            .map(|m| {
                let norm = match self.magnitude {
                    Magnitude::Relative(_) => m.spectral_norm()?,
                    Magnitude::Absolute(_) => 0.0,
                };
                Ok(m + &self.sample(m.dim(), norm, rng, stats))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(kind: NoiseKind, s: f64) -> NoiseModel {
        NoiseModel {
            kind,
            magnitude: Magnitude::Absolute(s),
        }
    }

    #[test]
    fn zero_magnitude_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut st = NoiseStats::default();
        let g = vec![HermitianMatrix::from_real_diagonal(&[0.3, 0.7])];
        for kind in [NoiseKind::None, NoiseKind::BoundedUniform, NoiseKind::TruncatedGaussian] {
            let out = model(kind, 0.0).observe_gradients(&g, &mut rng, &mut st).unwrap();
            assert_eq!(out, g);
        }
        assert_eq!(st.draws, 0);
    }

    #[test]
    fn perturbations_respect_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut st = NoiseStats::default();
        for kind in [NoiseKind::BoundedUniform, NoiseKind::TruncatedGaussian] {
            let nm = model(kind, 0.8);
            for m in 1..=4 {
                for _ in 0..2000 {
                    let x = nm.sample(m, 0.0, &mut rng, &mut st);
                    assert!(x.spectral_norm().unwrap() <= nm.bound(0.0) + 1e-12);
                }
            }
        }
        assert_eq!(st.draws, 16_000);
    }

    #[test]
    fn relative_magnitude_tracks_norm() {
        let nm = NoiseModel {
            kind: NoiseKind::TruncatedGaussian,
            magnitude: Magnitude::Relative(0.5),
        };
        assert!((nm.bound(2.0) - 5.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut st = NoiseStats::default();
        let g = vec![HermitianMatrix::from_real_diagonal(&[2.0, 1.0])];
        for _ in 0..500 {
            let out = nm.observe_gradients(&g, &mut rng, &mut st).unwrap();
            assert!((&out[0] - &g[0]).spectral_norm().unwrap() <= 5.0 + 1e-12);
        }
    }

    /// Entrywise sample mean within 4 standard errors of zero.
    #[test]
    fn perturbations_are_unbiased() {
        let n = 100_000;
        for kind in [NoiseKind::BoundedUniform, NoiseKind::TruncatedGaussian] {
            let nm = model(kind, 1.0);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut st = NoiseStats::default();
            let m = 3;
            let mut sum = vec![0.0; 2 * m * m];
            let mut sq = vec![0.0; 2 * m * m];
            for _ in 0..n {
                let x = nm.sample(m, 0.0, &mut rng, &mut st);
                for (i, z) in x.as_matrix().iter().enumerate() {
                    for (j, v) in [z.re, z.im].into_iter().enumerate() {
                        sum[2 * i + j] += v;
                        sq[2 * i + j] += v * v;
                    }
                }
            }
            for (s, q) in sum.iter().zip(&sq) {
                let mean = s / n as f64;
                let sd = (q / n as f64 - mean * mean).max(0.0).sqrt();
                assert!(mean.abs() <= 4.0 * sd / (n as f64).sqrt() + 1e-15, "{kind:?}: {mean}");
            }
        }
    }

    #[test]
    fn gaussian_truncation_is_rare() {
        let nm = model(NoiseKind::TruncatedGaussian, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut st = NoiseStats::default();
        for _ in 0..20_000 {
            nm.sample(3, 0.0, &mut rng, &mut st);
        }
        // P(|N(0,1)| > 5) ≈ 5.7e-7 per real coordinate.
        assert!(st.truncation_rate() < 1e-3);
    }
}
