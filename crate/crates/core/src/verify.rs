//! Brute-force checks of the choice maps against direct numerical
//! maximisation of their defining concave programs.

use rand::Rng;

use crate::error::Result;
use crate::hermitian::{CMatrix, HermitianMatrix, C64};
use crate::maps::{capped_gibbs_map, gibbs_map, matrix_gibbs_map};
use crate::rng::stream;

const MAX_ITERATIONS: usize = 400_000;
const RESIDUAL_TOL: f64 = 1e-13;

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn safe_ln(x: f64) -> f64 {
    x.max(1e-300).ln()
}

/// Euclidean projection onto `{x ≥ 0, Σx = total}`.
pub fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut theta = 0.0;
    for (j, &x) in u.iter().enumerate() {
        prefix += x;
        let t = (prefix - total) / (j + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Euclidean projection onto `{0 ≤ x ≤ caps, Σx = total}`.
pub fn project_capped(v: &[f64], caps: &[f64], total: f64) -> Vec<f64> {
    let fill = |tau: f64| -> f64 { v.iter().zip(caps).map(|(x, c)| (x - tau).clamp(0.0, *c)).sum() };
    let mut lo = v.iter().zip(caps).map(|(x, c)| x - c).fold(f64::INFINITY, f64::min);
    let mut hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fill(mid) > total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    v.iter().zip(caps).map(|(x, c)| (x - tau).clamp(0.0, *c)).collect()
}

/// Spectral projected gradient ascent on a concave `f`, stopped once the
/// fixed-point residual `‖x − Π(x + ∇f(x))‖_∞` is below `RESIDUAL_TOL`.
fn projected_ascent(
    start: Vec<f64>,
    value: impl Fn(&[f64]) -> f64,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
    project: impl Fn(&[f64]) -> Vec<f64>,
) -> Vec<f64> {
    let along = |x: &[f64], g: &[f64], s: f64| -> Vec<f64> {
        let moved: Vec<f64> = x.iter().zip(g).map(|(a, b)| a + s * b).collect();
        project(&moved)
    };
    let mut x = start;
    let mut fx = value(&x);
    let mut g = gradient(&x);
    let mut step = 1.0;
    for _ in 0..MAX_ITERATIONS {
        if max_abs(&along(&x, &g, 1.0), &x) < RESIDUAL_TOL {
            break;
        }
        let mut s = step;
        let (cand, fc) = loop {
            let c = along(&x, &g, s);
            let fc = value(&c);
            let ascent: f64 = c.iter().zip(&x).zip(&g).map(|((ci, xi), gi)| (ci - xi) * gi).sum();
            if fc >= fx + 1e-4 * ascent - 1e-15 * fx.abs() || s < 1e-16 {
                break (c, fc);
            }
            s *= 0.5;
        };
        let gc = gradient(&cand);
        let dx: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
        let dxx: f64 = dx.iter().map(|d| d * d).sum();
        let dxg: f64 = dx.iter().zip(gc.iter().zip(&g)).map(|(d, (a, b))| d * (a - b)).sum();
        step = if dxg < 0.0 { (dxx / -dxg).clamp(1e-10, 1e10) } else { 1e10f64.min(2.0 * s) };
        x = cand;
        fx = fc;
        g = gc;
    }
    x
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Maximiser of `⟨y,q⟩ − Σ q ln q` over the simplex.
pub fn gibbs_oracle(y: &[f64]) -> Vec<f64> {
    let k = y.len();
    projected_ascent(
        vec![1.0 / k as f64; k],
        |q| q.iter().zip(y).map(|(qi, yi)| qi * yi - xlogx(*qi)).sum(),
        |q| q.iter().zip(y).map(|(qi, yi)| yi - safe_ln(*qi) - 1.0).collect(),
        |v| project_simplex(v, 1.0),
    )
}

/// Maximiser of `⟨y,p⟩ − Σ [p ln p + (c−p) ln(c−p)]` over the capped simplex.
pub fn capped_oracle(y: &[f64], caps: &[f64], budget: f64) -> Vec<f64> {
    let cap_sum: f64 = caps.iter().sum();
    let start: Vec<f64> = caps.iter().map(|c| c * budget / cap_sum).collect();
    projected_ascent(
        start,
        |p| {
            p.iter()
                .zip(y)
                .zip(caps)
                .map(|((pi, yi), ci)| pi * yi - xlogx(*pi) - xlogx(ci - pi))
                .sum()
        },
        |p| {
            p.iter()
                .zip(y)
                .zip(caps)
                .map(|((pi, yi), ci)| yi - safe_ln(*pi) + safe_ln(ci - pi))
                .collect()
        },
        |v| project_capped(v, caps, budget),
    )
}

/// Hermitian matrices as real vectors `(re, im)` of every entry, so that the
/// Euclidean inner product is `Re tr(AB†)`.
fn flatten(a: &HermitianMatrix) -> Vec<f64> {
    a.as_matrix().iter().flat_map(|z| [z.re, z.im]).collect()
}

fn unflatten(v: &[f64], m: usize) -> HermitianMatrix {
    HermitianMatrix::symmetrized(CMatrix::from_iterator(
        m,
        m,
        v.chunks(2).map(|c| C64::new(c[0], c[1])),
    ))
}

fn project_spectrahedron(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let e = a.eigh()?;
    let w = project_simplex(e.values.as_slice(), 1.0);
    let mut v = e.vectors.clone();
    for (j, wj) in w.iter().enumerate() {
        v.column_mut(j).iter_mut().for_each(|z| *z *= C64::new(wj.sqrt(), 0.0));
    }
    Ok(HermitianMatrix::gram(&v))
}

/// Maximiser of `tr(YQ) − tr(Q ln Q)` over unit-trace PSD matrices.
pub fn matrix_gibbs_oracle(y: &HermitianMatrix) -> Result<HermitianMatrix> {
    if !y.is_finite() {
        return Err(crate::Error::InvalidInput("non-finite score matrix".into()));
    }
    let m = y.dim();
    let x = projected_ascent(
        flatten(&HermitianMatrix::identity(m).scale(1.0 / m as f64)),
        |v| {
            let q = unflatten(v, m);
            let ent: f64 = q.eigenvalues().map_or(f64::NAN, |ev| ev.into_iter().map(xlogx).sum());
            y.inner(&q) - ent
        },
        |v| {
            let q = unflatten(v, m);
            let log_q = q.map_spectrum(safe_ln).expect("finite iterate");
            flatten(&(&(y - &log_q) - &HermitianMatrix::identity(m)))
        },
        |v| flatten(&project_spectrahedron(&unflatten(v, m)).expect("finite iterate")),
    );
    Ok(unflatten(&x, m))
}

/// Largest deviation between each map and its oracle.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MapResiduals {
    pub instances: usize,
    pub gibbs: f64,
    pub capped: f64,
    pub matrix: f64,
    /// Largest `|Σ p − P| / P` of the capped map.
    pub lambda_residual: f64,
}

impl MapResiduals {
    pub fn max(&self) -> f64 {
        self.gibbs.max(self.capped).max(self.matrix)
    }
}

fn random_hermitian(m: usize, scale: f64, rng: &mut impl Rng) -> HermitianMatrix {
    let a = CMatrix::from_fn(m, m, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    HermitianMatrix::symmetrized((&a + a.adjoint()) * C64::new(0.5 * scale, 0.0))
}

/// Runs every oracle on `instances` random problems with `K ≤ 5`, `m ≤ 3`.
pub fn verify_maps(instances: usize, seed: u64) -> Result<MapResiduals> {
    let mut rng = stream(seed, 0);
    let mut out = MapResiduals {
        instances,
        ..MapResiduals::default()
    };
    for _ in 0..instances {
        let k = rng.gen_range(1..=5);
        let y: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let g = gibbs_map(&y)?;
        out.gibbs = out.gibbs.max(max_abs(g.weights(), &gibbs_oracle(&y)));

        let caps: Vec<f64> = (0..k).map(|_| rng.gen_range(0.3..1.5)).collect();
        let cap_sum: f64 = caps.iter().sum();
        let budget = rng.gen_range(0.1..0.9) * cap_sum;
        let c = capped_gibbs_map(&y, &caps, budget)?;
        out.capped = out.capped.max(max_abs(&c.powers, &capped_oracle(&y, &caps, budget)));
        let total: f64 = c.powers.iter().sum();
        out.lambda_residual = out.lambda_residual.max((total - budget).abs() / budget);

        let m = rng.gen_range(1..=3);
        let ym = random_hermitian(m, 2.0, &mut rng);
        let q = matrix_gibbs_map(&ym)?;
        out.matrix = out.matrix.max(q.as_hermitian().max_abs_diff(&matrix_gibbs_oracle(&ym)?));
    }
    Ok(out)
}
