//! Jakes sum-of-sinusoids Rayleigh fading and on/off primary-user activity.

use std::f64::consts::PI;

use rand::Rng;

use crate::hermitian::{CMatrix, C64};

/// Oscillators per channel entry.
pub const OSCILLATORS: usize = 16;

/// Time-varying `rows × cols` MIMO channel on each of several carrier groups.
///
/// Every entry is `g/√N Σ_n exp(j(ω_n t + φ_n))` with arrival angles
/// `α_n = π(n + ½)/N` on `(0, π)`, Doppler shifts `ω_n = 2π f_d cos α_n`
/// shared by the link, and independent uniform phases per entry.
#[derive(Clone, Debug)]
pub struct JakesLink {
    rows: usize,
    cols: usize,
    gain: f64,
    omegas: [f64; OSCILLATORS],
    /// `[group][entry (column-major)][oscillator]`, pre-scaled by `g/√N`.
    coefficients: Vec<Vec<[C64; OSCILLATORS]>>,
}

impl JakesLink {
    pub fn new(
        rows: usize,
        cols: usize,
        groups: usize,
        doppler_hz: f64,
        gain: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut omegas = [0.0; OSCILLATORS];
        for (n, w) in omegas.iter_mut().enumerate() {
            let alpha = PI * (n as f64 + 0.5) / OSCILLATORS as f64;
            *w = 2.0 * PI * doppler_hz * alpha.cos();
        }
        let amp = gain / (OSCILLATORS as f64).sqrt();
        let coefficients = (0..groups)
            .map(|_| {
                (0..rows * cols)
                    .map(|_| {
                        let mut c = [C64::new(0.0, 0.0); OSCILLATORS];
                        for z in c.iter_mut() {
                            *z = C64::from_polar(amp, rng.gen_range(0.0..2.0 * PI));
                        }
                        c
                    })
                    .collect()
            })
            .collect();
        Self {
            rows,
            cols,
            gain,
            omegas,
            coefficients,
        }
    }

    pub fn groups(&self) -> usize {
        self.coefficients.len()
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// `exp(j ω_n t)` for every oscillator.
    pub fn phasors(&self, time: f64) -> [C64; OSCILLATORS] {
        let mut w = [C64::new(0.0, 0.0); OSCILLATORS];
        for (z, &om) in w.iter_mut().zip(&self.omegas) {
            let (s, c) = (om * time).sin_cos();
            *z = C64::new(c, s);
        }
        w
    }

    pub fn matrix_with(&self, group: usize, phasors: &[C64; OSCILLATORS]) -> CMatrix {
        let coeffs = &self.coefficients[group];
        CMatrix::from_fn(self.rows, self.cols, |r, c| {
            let cn = &coeffs[c * self.rows + r];
            cn.iter().zip(phasors).map(|(a, b)| a * b).sum()
        })
    }

    /// Channel of one carrier group at `time` seconds.
    pub fn matrix_at(&self, group: usize, time: f64) -> CMatrix {
        self.matrix_with(group, &self.phasors(time))
    }
}

/// Two-state continuous-time Markov chain: OFF→ON at rate `arrival`,
/// ON→OFF at rate `departure`.
#[derive(Clone, Copy, Debug)]
pub struct OnOffProcess {
    arrival: f64,
    departure: f64,
}

impl OnOffProcess {
    pub fn new(arrival: f64, departure: f64) -> Self {
        Self { arrival, departure }
    }

    pub fn stationary_on(&self) -> f64 {
        self.arrival / (self.arrival + self.departure)
    }

    /// `P(ON at t + dt | state at t)`.
    pub fn on_probability(&self, currently_on: bool, dt: f64) -> f64 {
        let pi = self.stationary_on();
        let decay = (-(self.arrival + self.departure) * dt).exp();
        if currently_on {
            pi + (1.0 - pi) * decay
        } else {
            pi * (1.0 - decay)
        }
    }

    pub fn initial(&self, rng: &mut impl Rng) -> bool {
        rng.gen::<f64>() < self.stationary_on()
    }

    pub fn step(&self, currently_on: bool, dt: f64, rng: &mut impl Rng) -> bool {
        rng.gen::<f64>() < self.on_probability(currently_on, dt)
    }
}

/// `J₀(x) = (1/π) ∫₀^π cos(x sin θ) dθ`, by composite Simpson's rule.
#[cfg(test)]
pub(crate) fn bessel_j0(x: f64) -> f64 {
    let n = 2000;
    let h = PI / n as f64;
    let f = |th: f64| (x * th.sin()).cos();
    let mut s = f(0.0) + f(PI);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0 / PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn j0_reference_values() {
        // Abramowitz & Stegun Table 9.1.
        assert!((bessel_j0(0.0) - 1.0).abs() < 1e-14);
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-12);
        assert!((bessel_j0(2.404_825_557_695_773)).abs() < 1e-12);
        assert!((bessel_j0(5.0) + 0.177_596_771_314_338_3).abs() < 1e-12);
    }

    #[test]
    fn zero_doppler_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let link = JakesLink::new(2, 3, 2, 0.0, 1.0, &mut rng);
        assert_eq!(link.matrix_at(1, 0.0), link.matrix_at(1, 123.4));
    }

    #[test]
    fn gain_scales_entries() {
        let a = JakesLink::new(2, 2, 1, 10.0, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
        let b = JakesLink::new(2, 2, 1, 10.0, 0.5, &mut ChaCha8Rng::seed_from_u64(3));
        let d = a.matrix_at(0, 0.7) * C64::new(0.5, 0.0) - b.matrix_at(0, 0.7);
        assert!(d.iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn unit_average_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut acc = 0.0;
        let n = 4000;
        for _ in 0..n {
            let link = JakesLink::new(1, 1, 1, 10.0, 1.0, &mut rng);
            acc += link.matrix_at(0, 0.37)[(0, 0)].norm_sqr();
        }
        // Var |h|² = 1 - 1/N for N random-phase unit phasors.
        let se = (1.0f64 / n as f64).sqrt();
        assert!((acc / n as f64 - 1.0).abs() < 4.0 * se);
    }

    #[test]
    fn ensemble_autocorrelation_is_bessel() {
        // Averaging over phases leaves exactly (1/N) Σ cos(ω_n τ), a midpoint
        // rule for the J₀ integral.
        let rng = &mut ChaCha8Rng::seed_from_u64(0);
        let fd = 50.0;
        let link = JakesLink::new(1, 1, 1, fd, 1.0, rng);
        for i in 0..40 {
            let tau = i as f64 * 1e-3;
            let mean: f64 = link.omegas.iter().map(|w| (w * tau).cos()).sum::<f64>() / OSCILLATORS as f64;
            assert!((mean - bessel_j0(2.0 * PI * fd * tau)).abs() < 1e-3);
        }
    }

    #[test]
    fn on_off_transitions() {
        let p = OnOffProcess::new(2.0, 3.0);
        assert!((p.stationary_on() - 0.4).abs() < 1e-15);
        assert_eq!(p.on_probability(true, 0.0), 1.0);
        assert_eq!(p.on_probability(false, 0.0), 0.0);
        assert!((p.on_probability(false, 1e3) - 0.4).abs() < 1e-12);
        // Stationarity: π P(on|on) + (1-π) P(on|off) = π.
        let dt = 0.013;
        let pi = p.stationary_on();
        let next = pi * p.on_probability(true, dt) + (1.0 - pi) * p.on_probability(false, dt);
        assert!((next - pi).abs() < 1e-15);
        // First-order rates.
        assert!((p.on_probability(false, 1e-6) / 1e-6 - 2.0).abs() < 1e-4);
        assert!(((1.0 - p.on_probability(true, 1e-6)) / 1e-6 - 3.0).abs() < 1e-4);
    }

    #[test]
    fn on_off_empirical_duty_cycle() {
        let p = OnOffProcess::new(1.0, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut on = p.initial(&mut rng);
        let n = 200_000;
        let mut count = 0;
        for _ in 0..n {
            on = p.step(on, 5e-3, &mut rng);
            count += on as usize;
        }
        assert!((count as f64 / n as f64 - 0.2).abs() < 0.01);
    }
}
