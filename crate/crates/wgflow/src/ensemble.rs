//! Particle-ensemble container and kernel density score estimation.
//!
//! An ensemble is an `n × d` block of particle positions representing a
//! uniform empirical measure (every particle carries weight `1/n`). The
//! Gaussian-kernel density estimate built on an ensemble supplies the
//! `∇log ρ` and `∇log p(θ)` terms of the particle flow; the score is the
//! ratio `Σᵢ ∇K(θ, θⁱ) / Σᵢ K(θ, θⁱ)`, in which any kernel normalisation
//! constant cancels.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Mat};
use crate::math;
use crate::rng::Prng;

/// What an ensemble stands for inside the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleRole {
    Prior,
    PosteriorApprox,
    Nominal,
}

impl EnsembleRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnsembleRole::Prior => "prior",
            EnsembleRole::PosteriorApprox => "posterior_approx",
            EnsembleRole::Nominal => "nominal",
        }
    }
}

/// `n × d` particle positions with uniform weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    particles: Vec<f64>,
    n: usize,
    d: usize,
    role: EnsembleRole,
}

impl ParticleEnsemble {
    /// Builds an ensemble from flat row-major positions.
    pub fn new(particles: Vec<f64>, n: usize, d: usize, role: EnsembleRole) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "ensemble needs n >= 1 and d >= 1, got n = {n}, d = {d}"
            )));
        }
        if particles.len() != n * d {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                n * d,
                particles.len()
            )));
        }
        if particles.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite particle coordinate".into()));
        }
        Ok(ParticleEnsemble {
            particles,
            n,
            d,
            role,
        })
    }

    /// 1-D convenience constructor.
    pub fn from_scalars(values: &[f64], role: EnsembleRole) -> Result<Self> {
        ParticleEnsemble::new(values.to_vec(), values.len(), 1, role)
    }

    /// Draws `n` particles from a Gaussian with the given mean and covariance.
    pub fn sample_gaussian(
        n: usize,
        mean: &[f64],
        covariance: &Mat,
        role: EnsembleRole,
        rng: &mut Prng,
    ) -> Result<Self> {
        let d = mean.len();
        if covariance.rows() != d || covariance.cols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: covariance.rows(),
            });
        }
        let chol = Cholesky::new(covariance)?;
        let l = chol.factor();
        let mut particles = vec![0.0; n * d];
        let mut z = vec![0.0; d];
        for i in 0..n {
            for zj in z.iter_mut() {
                *zj = rng.next_standard_normal();
            }
            for r in 0..d {
                let mut acc = mean[r];
                for (c, zc) in z.iter().enumerate().take(r + 1) {
                    acc += l[(r, c)] * zc;
                }
                particles[i * d + r] = acc;
            }
        }
        ParticleEnsemble::new(particles, n, d, role)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn role(&self) -> EnsembleRole {
        self.role
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.particles[i * self.d..(i + 1) * self.d]
    }

    pub fn positions(&self) -> &[f64] {
        &self.particles
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.particles.chunks_exact(self.d)
    }

    /// Same positions under a different role tag.
    pub fn with_role(&self, role: EnsembleRole) -> Self {
        ParticleEnsemble {
            particles: self.particles.clone(),
            n: self.n,
            d: self.d,
            role,
        }
    }

    /// Componentwise sample mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for p in self.iter() {
            for (acc, x) in m.iter_mut().zip(p.iter()) {
                *acc += x;
            }
        }
        for acc in m.iter_mut() {
            *acc /= self.n as f64;
        }
        m
    }
}

/// Kernel normalisation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `exp(-‖a-b‖² / 2h)`.
    Unnormalized,
    /// Multiplied by `(2πh)^(-d/2)` so the KDE integrates to one.
    Normalized,
}

/// Gaussian kernel configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub bandwidth: f64,
    pub normalization: Normalization,
}

impl KernelConfig {
    pub fn new(bandwidth: f64, normalization: Normalization) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::InvalidInput(format!(
                "kernel bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(KernelConfig {
            bandwidth,
            normalization,
        })
    }

    pub fn unnormalized(bandwidth: f64) -> Result<Self> {
        KernelConfig::new(bandwidth, Normalization::Unnormalized)
    }

    pub fn normalized(bandwidth: f64) -> Result<Self> {
        KernelConfig::new(bandwidth, Normalization::Normalized)
    }
}

/// Exponents below this are treated as full underflow of the kernel sum.
pub const UNDERFLOW_EXPONENT: f64 = -700.0;

/// Log-density floor returned when every kernel term underflows.
pub const LOG_DENSITY_FLOOR: f64 = -700.0;

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

/// Median-heuristic bandwidth `h = med² / ln n`, with `med` the median of the
/// `n(n-1)/2` distinct pairwise Euclidean distances.
pub fn median_bandwidth(ensemble: &ParticleEnsemble) -> Result<f64> {
    let n = ensemble.len();
    if n < 2 {
        return Err(Error::DegenerateEnsemble(
            "median bandwidth needs at least two particles",
        ));
    }
    let mut distances = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            distances.push(math::sqrt(squared_distance(
                ensemble.particle(i),
                ensemble.particle(j),
            )));
        }
    }
    distances.sort_unstable_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let m = distances.len();
    let med = if m % 2 == 1 {
        distances[m / 2]
    } else {
        0.5 * (distances[m / 2 - 1] + distances[m / 2])
    };
    if med == 0.0 {
        return Err(Error::DegenerateEnsemble(
            "median pairwise distance is zero (duplicate particles)",
        ));
    }
    let h = med * med / math::ln(n as f64);
    debug_assert!(h.is_finite() && h > 0.0);
    Ok(h)
}

/// Gaussian kernel `K(a, b)` under the given configuration. Symmetric in its
/// arguments and maximal at zero distance.
pub fn gaussian_kernel(a: &[f64], b: &[f64], cfg: &KernelConfig) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let value = math::exp(-squared_distance(a, b) / (2.0 * cfg.bandwidth));
    Ok(match cfg.normalization {
        Normalization::Unnormalized => value,
        Normalization::Normalized => value * normalization_constant(a.len(), cfg.bandwidth),
    })
}

/// `(2πh)^(-d/2)`.
fn normalization_constant(d: usize, h: f64) -> f64 {
    math::powf(2.0 * core::f64::consts::PI * h, -(d as f64) / 2.0)
}

/// KDE score `∇log ρ̃` at each evaluation point: row `m` is
/// `Σᵢ ∇K(θₘ, θⁱ) / Σᵢ K(θₘ, θⁱ)`.
///
/// Normalisation constants cancel in the ratio, so the output does not depend
/// on `cfg.normalization`. If every kernel value underflows at some point the
/// score there is 0/0; that point is reported as a far-field error instead.
pub fn kde_score(eval_points: &Mat, samples: &ParticleEnsemble, cfg: &KernelConfig) -> Result<Mat> {
    if eval_points.cols() != samples.dim() {
        return Err(Error::DimensionMismatch {
            expected: samples.dim(),
            found: eval_points.cols(),
        });
    }
    let h = cfg.bandwidth;
    let d = samples.dim();
    let mut out = Mat::zeros(eval_points.rows(), d);
    let mut weights = vec![0.0; samples.len()];
    for m in 0..eval_points.rows() {
        let point = eval_points.row(m);
        let mut max_exponent = f64::NEG_INFINITY;
        for (w, sample) in weights.iter_mut().zip(samples.iter()) {
            let exponent = -squared_distance(point, sample) / (2.0 * h);
            *w = exponent;
            if exponent > max_exponent {
                max_exponent = exponent;
            }
        }
        if max_exponent < UNDERFLOW_EXPONENT {
            return Err(Error::FarField { point: m });
        }
        let mut total = 0.0;
        for w in weights.iter_mut() {
            *w = math::exp(*w - max_exponent);
            total += *w;
        }
        let row = out.row_mut(m);
        for (w, sample) in weights.iter().zip(samples.iter()) {
            for k in 0..d {
                // ∇θ K = -(θ - θⁱ)/h · K, shared factors cancel in the ratio.
                row[k] += w * (-(point[k] - sample[k]) / h);
            }
        }
        for value in row.iter_mut() {
            *value /= total;
        }
    }
    Ok(out)
}

/// Log of the normalised KDE, `log[(1/n) Σᵢ K_norm(θₘ, θⁱ)]`, per evaluation
/// point, computed with log-sum-exp. Fully underflowed points return
/// [`LOG_DENSITY_FLOOR`] instead of `-∞`.
pub fn kde_log_density(
    eval_points: &Mat,
    samples: &ParticleEnsemble,
    cfg: &KernelConfig,
) -> Result<Vec<f64>> {
    if cfg.normalization != Normalization::Normalized {
        return Err(Error::InvalidInput(
            "kde_log_density requires a normalized kernel".into(),
        ));
    }
    if eval_points.cols() != samples.dim() {
        return Err(Error::DimensionMismatch {
            expected: samples.dim(),
            found: eval_points.cols(),
        });
    }
    let h = cfg.bandwidth;
    let d = samples.dim();
    let log_const = -(d as f64) / 2.0 * math::ln(2.0 * core::f64::consts::PI * h);
    let log_inv_n = -math::ln(samples.len() as f64);
    let mut out = Vec::with_capacity(eval_points.rows());
    let mut exponents = vec![0.0; samples.len()];
    for m in 0..eval_points.rows() {
        let point = eval_points.row(m);
        let mut max_exponent = f64::NEG_INFINITY;
        for (e, sample) in exponents.iter_mut().zip(samples.iter()) {
            *e = -squared_distance(point, sample) / (2.0 * h);
            if *e > max_exponent {
                max_exponent = *e;
            }
        }
        if max_exponent < UNDERFLOW_EXPONENT {
            out.push(LOG_DENSITY_FLOOR);
            continue;
        }
        let sum: f64 = exponents.iter().map(|e| math::exp(e - max_exponent)).sum();
        out.push(log_inv_n + log_const + max_exponent + math::ln(sum));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(points: &[f64], d: usize) -> Mat {
        Mat::from_rows(points.len() / d, d, points)
    }

    #[test]
    fn median_bandwidth_three_points() {
        // Pairwise distances {1, 1, 2} -> median 1, h = 1/ln 3.
        let e = ParticleEnsemble::from_scalars(&[0.0, 1.0, 2.0], EnsembleRole::Prior).unwrap();
        let h = median_bandwidth(&e).unwrap();
        assert!((h - 1.0 / 3.0_f64.ln()).abs() < 1e-15);
        assert!((h - 0.9102392266268373).abs() < 1e-12);
    }

    #[test]
    fn median_bandwidth_rejects_duplicates() {
        let e = ParticleEnsemble::from_scalars(&[5.0, 5.0, 5.0], EnsembleRole::Prior).unwrap();
        assert!(matches!(
            median_bandwidth(&e),
            Err(Error::DegenerateEnsemble(_))
        ));
    }

    #[test]
    fn median_bandwidth_rejects_singleton() {
        let e = ParticleEnsemble::from_scalars(&[0.0], EnsembleRole::Prior).unwrap();
        assert!(matches!(
            median_bandwidth(&e),
            Err(Error::DegenerateEnsemble(_))
        ));
    }

    #[test]
    fn median_bandwidth_two_points_is_valid() {
        let e = ParticleEnsemble::from_scalars(&[0.0, 1.0], EnsembleRole::Prior).unwrap();
        let h = median_bandwidth(&e).unwrap();
        assert!((h - 1.0 / 2.0_f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn median_bandwidth_invariances() {
        let base = ParticleEnsemble::new(
            vec![0.1, 0.4, -1.3, 2.0, 0.7, -0.2, 1.1, 0.9],
            4,
            2,
            EnsembleRole::Prior,
        )
        .unwrap();
        let h = median_bandwidth(&base).unwrap();

        // Permute particles.
        let permuted = ParticleEnsemble::new(
            vec![1.1, 0.9, 0.1, 0.4, 0.7, -0.2, -1.3, 2.0],
            4,
            2,
            EnsembleRole::Prior,
        )
        .unwrap();
        assert!((median_bandwidth(&permuted).unwrap() - h).abs() < 1e-15);

        // Rigid translation.
        let shifted: Vec<f64> = base
            .positions()
            .iter()
            .enumerate()
            .map(|(k, x)| x + if k % 2 == 0 { 10.0 } else { -3.0 })
            .collect();
        let shifted = ParticleEnsemble::new(shifted, 4, 2, EnsembleRole::Prior).unwrap();
        assert!((median_bandwidth(&shifted).unwrap() - h).abs() < 1e-12);
    }

    #[test]
    fn kernel_zero_distance_and_unit_exponent() {
        let cfg = KernelConfig::unnormalized(0.5).unwrap();
        let a = [1.0, 2.0];
        assert!((gaussian_kernel(&a, &a, &cfg).unwrap() - 1.0).abs() < 1e-15);
        // ‖a-b‖² = 2h = 1 -> e^{-1}.
        let b = [1.0, 3.0];
        let k = gaussian_kernel(&a, &b, &cfg).unwrap();
        assert!((k - (-1.0_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn normalized_kernel_uses_the_dimension_exponent() {
        // (2πh)^(-d/2) at zero distance; d = 2 gives 1/(2πh) regardless of
        // the sample count the kernel is later summed over.
        let h = 0.4;
        let cfg = KernelConfig::normalized(h).unwrap();
        let a = [0.3, -0.7];
        let k = gaussian_kernel(&a, &a, &cfg).unwrap();
        assert!((k - 1.0 / (2.0 * core::f64::consts::PI * h)).abs() < 1e-15);
    }

    #[test]
    fn kernel_symmetry_and_bound() {
        let cfg = KernelConfig::unnormalized(1.3).unwrap();
        let pairs = [
            ([0.3, -0.8], [1.4, 0.2]),
            ([2.0, 2.0], [-1.0, 0.5]),
            ([0.0, 0.0], [0.0, 0.0]),
        ];
        for (a, b) in pairs {
            let kab = gaussian_kernel(&a, &b, &cfg).unwrap();
            let kba = gaussian_kernel(&b, &a, &cfg).unwrap();
            assert_eq!(kab, kba);
            assert!(kab <= gaussian_kernel(&a, &a, &cfg).unwrap());
        }
    }

    #[test]
    fn kernel_rejects_dimension_mismatch() {
        let cfg = KernelConfig::unnormalized(1.0).unwrap();
        assert!(matches!(
            gaussian_kernel(&[0.0], &[0.0, 1.0], &cfg),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn score_single_sample_closed_form() {
        let h = 0.7;
        let cfg = KernelConfig::unnormalized(h).unwrap();
        let samples = ParticleEnsemble::from_scalars(&[0.4], EnsembleRole::Prior).unwrap();
        let points = eval(&[1.5], 1);
        let score = kde_score(&points, &samples, &cfg).unwrap();
        assert!((score[(0, 0)] - (-(1.5 - 0.4) / h)).abs() < 1e-14);

        // At the sample itself the score vanishes.
        let at_sample = eval(&[0.4], 1);
        let score = kde_score(&at_sample, &samples, &cfg).unwrap();
        assert_eq!(score[(0, 0)], 0.0);
    }

    #[test]
    fn score_symmetric_pair_vanishes_at_midpoint() {
        let cfg = KernelConfig::unnormalized(1.0).unwrap();
        let samples = ParticleEnsemble::from_scalars(&[-1.0, 1.0], EnsembleRole::Prior).unwrap();
        let points = eval(&[0.0], 1);
        let score = kde_score(&points, &samples, &cfg).unwrap();
        assert!(score[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn score_independent_of_normalization() {
        let samples = ParticleEnsemble::new(
            vec![0.0, 0.0, 1.0, -0.5, -0.3, 0.8],
            3,
            2,
            EnsembleRole::Prior,
        )
        .unwrap();
        let points = eval(&[0.2, 0.1, -1.0, 0.4], 2);
        let h = 0.9;
        let unnorm = kde_score(&points, &samples, &KernelConfig::unnormalized(h).unwrap()).unwrap();
        let norm = kde_score(&points, &samples, &KernelConfig::normalized(h).unwrap()).unwrap();
        assert_eq!(unnorm, norm);
    }

    #[test]
    fn score_far_field_errors() {
        let cfg = KernelConfig::unnormalized(1e-3).unwrap();
        let samples = ParticleEnsemble::from_scalars(&[0.0], EnsembleRole::Prior).unwrap();
        let points = eval(&[100.0], 1);
        assert_eq!(
            kde_score(&points, &samples, &cfg).unwrap_err(),
            Error::FarField { point: 0 }
        );
    }

    #[test]
    fn log_density_single_sample_at_itself() {
        let cfg = KernelConfig::normalized(1.0).unwrap();
        let samples = ParticleEnsemble::from_scalars(&[2.0], EnsembleRole::Prior).unwrap();
        let points = eval(&[2.0], 1);
        let ld = kde_log_density(&points, &samples, &cfg).unwrap();
        // log((2π)^(-1/2)) = -0.5 log 2π.
        assert!((ld[0] - (-0.9189385332046727)).abs() < 1e-14);
    }

    #[test]
    fn log_density_permutation_and_symmetry() {
        let cfg = KernelConfig::normalized(0.8).unwrap();
        let samples =
            ParticleEnsemble::from_scalars(&[-1.0, 0.5, 1.0, -0.5], EnsembleRole::Prior).unwrap();
        let permuted =
            ParticleEnsemble::from_scalars(&[0.5, -0.5, -1.0, 1.0], EnsembleRole::Prior).unwrap();
        let points = eval(&[0.3, -0.9], 1);
        let a = kde_log_density(&points, &samples, &cfg).unwrap();
        let b = kde_log_density(&points, &permuted, &cfg).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }

        // Symmetric sample set: symmetric eval points get equal values.
        let sym_points = eval(&[0.7, -0.7], 1);
        let v = kde_log_density(&sym_points, &samples, &cfg).unwrap();
        assert!((v[0] - v[1]).abs() < 1e-12);
    }

    #[test]
    fn log_density_underflow_floors() {
        let cfg = KernelConfig::normalized(1e-3).unwrap();
        let samples = ParticleEnsemble::from_scalars(&[0.0], EnsembleRole::Prior).unwrap();
        let points = eval(&[500.0], 1);
        let ld = kde_log_density(&points, &samples, &cfg).unwrap();
        assert_eq!(ld[0], LOG_DENSITY_FLOOR);
    }

    #[test]
    fn sample_gaussian_matches_moments() {
        let mut rng = Prng::seed_from(17);
        let cov = Mat::from_rows(2, 2, &[0.5, 0.2, 0.2, 0.8]);
        let e = ParticleEnsemble::sample_gaussian(
            20_000,
            &[1.0, -2.0],
            &cov,
            EnsembleRole::Prior,
            &mut rng,
        )
        .unwrap();
        let mean = e.mean();
        assert!((mean[0] - 1.0).abs() < 0.02);
        assert!((mean[1] + 2.0).abs() < 0.02);
        let mut c00 = 0.0;
        let mut c01 = 0.0;
        let mut c11 = 0.0;
        for p in e.iter() {
            let dx = p[0] - mean[0];
            let dy = p[1] - mean[1];
            c00 += dx * dx;
            c01 += dx * dy;
            c11 += dy * dy;
        }
        let n = e.len() as f64;
        assert!((c00 / n - 0.5).abs() < 0.03);
        assert!((c01 / n - 0.2).abs() < 0.03);
        assert!((c11 / n - 0.8).abs() < 0.03);
    }

    #[test]
    fn ensemble_rejects_bad_input() {
        assert!(ParticleEnsemble::new(vec![], 0, 1, EnsembleRole::Prior).is_err());
        assert!(ParticleEnsemble::new(vec![f64::NAN], 1, 1, EnsembleRole::Prior).is_err());
        assert!(ParticleEnsemble::new(vec![1.0, 2.0], 1, 1, EnsembleRole::Prior).is_err());
    }
}
