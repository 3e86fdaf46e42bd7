//! Gaussian-process surrogate of the likelihood potential.
//!
//! For expensive forward models the flow can avoid differencing model outputs
//! directly: the quadratic data-misfit potential `V_L(θ) = ½ rᵀ Σ⁻¹ r` is
//! observed at the current particles and regressed with a zero-mean GP under
//! an RBF kernel `k(θ, θ*) = λ exp(-‖θ - θ*‖² / 2l²)`. The posterior mean and
//! its analytic gradient then stand in for the potential and its gradient;
//! `-∇V_L` is the log-likelihood gradient up to θ-independent terms.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gradients::GaussianLikelihood;
use crate::linalg::{Cholesky, Mat};
use crate::math;

/// Hyperparameter selection for [`gp_fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HyperPolicy {
    /// Explicit `(amplitude, bandwidth, noise)`.
    Fixed {
        amplitude: f64,
        bandwidth: f64,
        noise: f64,
    },
    /// `l` = median pairwise distance of the inputs, `λ` = sample variance of
    /// the values (floored at 1e-12), `σ = 0.01 √λ`.
    Heuristic,
    /// Grid search over `{0.5, 1, 2}×` the heuristic values, maximising the
    /// log marginal likelihood.
    GridSearch,
}

/// Fitted GP over potential observations.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    train_inputs: Mat,
    train_values: Vec<f64>,
    amplitude: f64,
    bandwidth: f64,
    noise: f64,
    chol: Cholesky,
    /// `K(Θ,Θ)⁻¹ V_L`, cached at fit time.
    weights: Vec<f64>,
}

/// Quadratic misfit potential `V_L = ½ rᵀ Σ⁻¹ r`; nonnegative, zero only at a
/// zero residual.
pub fn potential(lik: &GaussianLikelihood, y_model: &[f64]) -> Result<f64> {
    let r = lik.residual(y_model)?;
    let quad = {
        // ½ rᵀ Σ⁻¹ r through the likelihood's cached factorisation.
        let whitened = lik.whiten_residual(y_model)?;
        r.iter()
            .zip(whitened.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
    };
    Ok(0.5 * quad)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

fn rbf(a: &[f64], b: &[f64], amplitude: f64, bandwidth: f64) -> f64 {
    amplitude * math::exp(-squared_distance(a, b) / (2.0 * bandwidth * bandwidth))
}

fn median_input_distance(inputs: &Mat) -> f64 {
    let m = inputs.rows();
    if m < 2 {
        return 1.0;
    }
    let mut distances = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            distances.push(math::sqrt(squared_distance(inputs.row(i), inputs.row(j))));
        }
    }
    distances.sort_unstable_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let k = distances.len();
    let med = if k % 2 == 1 {
        distances[k / 2]
    } else {
        0.5 * (distances[k / 2 - 1] + distances[k / 2])
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

fn heuristic_hypers(inputs: &Mat, values: &[f64]) -> (f64, f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
    let amplitude = var.max(1e-12);
    let bandwidth = median_input_distance(inputs);
    let noise = 1e-2 * math::sqrt(amplitude);
    (amplitude, bandwidth, noise)
}

/// Gram factorisation with a jitter ladder: starts at `1e-10 λ` and doubles
/// until `1e-4 λ`, after which the factorisation error is returned.
fn factor_gram(inputs: &Mat, amplitude: f64, bandwidth: f64, noise: f64) -> Result<Cholesky> {
    let m = inputs.rows();
    let mut gram = Mat::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let k = rbf(inputs.row(i), inputs.row(j), amplitude, bandwidth);
            gram[(i, j)] = k;
            gram[(j, i)] = k;
        }
    }
    for i in 0..m {
        gram[(i, i)] += noise * noise;
    }
    match Cholesky::new(&gram) {
        Ok(c) => Ok(c),
        Err(_) => {
            let mut jitter = 1e-10 * amplitude;
            let cap = 1e-4 * amplitude;
            let mut applied = 0.0;
            while jitter <= cap {
                for i in 0..m {
                    gram[(i, i)] += jitter - applied;
                }
                applied = jitter;
                if let Ok(c) = Cholesky::new(&gram) {
                    return Ok(c);
                }
                jitter *= 2.0;
            }
            Err(Error::NotPositiveDefinite)
        }
    }
}

fn log_marginal_likelihood(values: &[f64], chol: &Cholesky) -> f64 {
    let mut y = values.to_vec();
    chol.forward_solve_in_place(&mut y);
    let quad: f64 = y.iter().map(|v| v * v).sum();
    let m = values.len() as f64;
    -0.5 * quad - 0.5 * chol.log_det() - 0.5 * m * math::ln(2.0 * core::f64::consts::PI)
}

/// Fits the GP on potential observations.
pub fn gp_fit(inputs: &Mat, values: &[f64], policy: HyperPolicy) -> Result<GpSurrogate> {
    let m = inputs.rows();
    if m == 0 {
        return Err(Error::InvalidInput(
            "gp_fit needs at least one point".into(),
        ));
    }
    if values.len() != m {
        return Err(Error::SizeMismatch {
            expected: m,
            found: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite training value".into()));
    }

    let (amplitude, bandwidth, noise) = match policy {
        HyperPolicy::Fixed {
            amplitude,
            bandwidth,
            noise,
        } => {
            if !(amplitude > 0.0) || !(bandwidth > 0.0) || !(noise >= 0.0) {
                return Err(Error::InvalidInput(
                    "GP hyperparameters must satisfy λ > 0, l > 0, σ >= 0".into(),
                ));
            }
            (amplitude, bandwidth, noise)
        }
        HyperPolicy::Heuristic => heuristic_hypers(inputs, values),
        HyperPolicy::GridSearch => {
            let (a0, l0, s0) = heuristic_hypers(inputs, values);
            let scales = [0.5, 1.0, 2.0];
            let mut best = (a0, l0, s0);
            let mut best_lml = f64::NEG_INFINITY;
            for &sa in &scales {
                for &sl in &scales {
                    for &ss in &scales {
                        let cand = (a0 * sa, l0 * sl, s0 * ss);
                        if let Ok(chol) = factor_gram(inputs, cand.0, cand.1, cand.2) {
                            let lml = log_marginal_likelihood(values, &chol);
                            if lml > best_lml {
                                best_lml = lml;
                                best = cand;
                            }
                        }
                    }
                }
            }
            best
        }
    };

    let chol = factor_gram(inputs, amplitude, bandwidth, noise)?;
    let weights = chol.solve(values);
    Ok(GpSurrogate {
        train_inputs: inputs.clone(),
        train_values: values.to_vec(),
        amplitude,
        bandwidth,
        noise,
        chol,
        weights,
    })
}

impl GpSurrogate {
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn train_values(&self) -> &[f64] {
        &self.train_values
    }

    /// Posterior mean `μ(θ*) = k(θ*, Θ) K(Θ,Θ)⁻¹ V_L` at each point.
    pub fn mean(&self, eval_points: &Mat) -> Result<Vec<f64>> {
        self.check_dim(eval_points)?;
        let mut out = Vec::with_capacity(eval_points.rows());
        for p in 0..eval_points.rows() {
            let point = eval_points.row(p);
            let mut acc = 0.0;
            for (j, w) in self.weights.iter().enumerate() {
                acc += rbf(
                    point,
                    self.train_inputs.row(j),
                    self.amplitude,
                    self.bandwidth,
                ) * w;
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Posterior variance `k(θ*,θ*) - k(θ*,Θ) K(Θ,Θ)⁻¹ k(Θ,θ*)`, exposed for
    /// diagnostics.
    pub fn variance(&self, eval_points: &Mat) -> Result<Vec<f64>> {
        self.check_dim(eval_points)?;
        let m = self.train_inputs.rows();
        let mut out = Vec::with_capacity(eval_points.rows());
        let mut cross = vec![0.0; m];
        for p in 0..eval_points.rows() {
            let point = eval_points.row(p);
            for (j, c) in cross.iter_mut().enumerate() {
                *c = rbf(
                    point,
                    self.train_inputs.row(j),
                    self.amplitude,
                    self.bandwidth,
                );
            }
            let solved = self.chol.solve(&cross);
            let reduction: f64 = cross.iter().zip(solved.iter()).map(|(a, b)| a * b).sum();
            out.push(self.amplitude - reduction);
        }
        Ok(out)
    }

    fn check_dim(&self, eval_points: &Mat) -> Result<()> {
        if eval_points.cols() != self.train_inputs.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.train_inputs.cols(),
                found: eval_points.cols(),
            });
        }
        Ok(())
    }
}

/// Gradient of the posterior mean at each point: component `d` is
/// `Σⱼ wⱼ · (-(θ*_d - Θ_{j,d}) / l²) · k(θ*, Θⱼ)`.
pub fn gp_mean_gradient(surrogate: &GpSurrogate, eval_points: &Mat) -> Result<Mat> {
    surrogate.check_dim(eval_points)?;
    let d = eval_points.cols();
    let inv_l2 = 1.0 / (surrogate.bandwidth * surrogate.bandwidth);
    let mut out = Mat::zeros(eval_points.rows(), d);
    for p in 0..eval_points.rows() {
        let point = eval_points.row(p);
        for (j, w) in surrogate.weights.iter().enumerate() {
            let train = surrogate.train_inputs.row(j);
            let k = rbf(point, train, surrogate.amplitude, surrogate.bandwidth);
            let wk = w * k;
            let row = out.row_mut(p);
            for (c, value) in row.iter_mut().enumerate() {
                *value += wk * (-(point[c] - train[c]) * inv_l2);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Prng;

    #[test]
    fn potential_zero_residual() {
        let lik = GaussianLikelihood::diagonal(vec![1.0, 2.0], &[0.5, 0.5]).unwrap();
        assert_eq!(potential(&lik, &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn potential_scalar_case() {
        // Σ = 0.25, r = 1: ½ · 1 · 4 · 1 = 2.
        let lik = GaussianLikelihood::diagonal(vec![1.0], &[0.25]).unwrap();
        assert!((potential(&lik, &[0.0]).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn potential_even_in_residual() {
        let lik = GaussianLikelihood::diagonal(vec![0.0, 0.0], &[0.3, 0.7]).unwrap();
        let plus = potential(&lik, &[0.4, -1.2]).unwrap();
        let minus = potential(&lik, &[-0.4, 1.2]).unwrap();
        assert!((plus - minus).abs() < 1e-14);
        assert!(plus > 0.0);
    }

    #[test]
    fn single_point_noiseless_interpolates() {
        let inputs = Mat::from_rows(1, 1, &[0.3]);
        let s = gp_fit(
            &inputs,
            &[2.5],
            HyperPolicy::Fixed {
                amplitude: 1.7,
                bandwidth: 0.5,
                noise: 0.0,
            },
        )
        .unwrap();
        let mu = s.mean(&inputs).unwrap();
        assert!((mu[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn single_point_noisy_shrinks_towards_zero() {
        // μ(θ₀) = λ v / (λ + σ²) for a 1×1 system.
        let inputs = Mat::from_rows(1, 1, &[0.0]);
        let (amplitude, noise, v) = (2.0, 0.5, 3.0);
        let s = gp_fit(
            &inputs,
            &[v],
            HyperPolicy::Fixed {
                amplitude,
                bandwidth: 1.0,
                noise,
            },
        )
        .unwrap();
        let mu = s.mean(&inputs).unwrap();
        let expected = amplitude * v / (amplitude + noise * noise);
        assert!((mu[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn mean_decays_to_zero_far_away() {
        let inputs = Mat::from_rows(1, 1, &[0.0]);
        let s = gp_fit(
            &inputs,
            &[4.0],
            HyperPolicy::Fixed {
                amplitude: 1.0,
                bandwidth: 0.3,
                noise: 0.0,
            },
        )
        .unwrap();
        let far = s.mean(&Mat::from_rows(1, 1, &[50.0])).unwrap();
        assert!(far[0].abs() < 1e-300);
    }

    #[test]
    fn gradient_vanishes_at_lone_training_point() {
        let inputs = Mat::from_rows(1, 2, &[0.4, -0.2]);
        let s = gp_fit(
            &inputs,
            &[1.0],
            HyperPolicy::Fixed {
                amplitude: 1.0,
                bandwidth: 0.8,
                noise: 0.0,
            },
        )
        .unwrap();
        let g = gp_mean_gradient(&s, &inputs).unwrap();
        assert_eq!(g[(0, 0)], 0.0);
        assert_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn gradient_vanishes_by_symmetry() {
        let inputs = Mat::from_rows(2, 1, &[-1.0, 1.0]);
        let s = gp_fit(
            &inputs,
            &[0.7, 0.7],
            HyperPolicy::Fixed {
                amplitude: 1.0,
                bandwidth: 1.0,
                noise: 1e-3,
            },
        )
        .unwrap();
        let g = gp_mean_gradient(&s, &Mat::from_rows(1, 1, &[0.0])).unwrap();
        assert!(g[(0, 0)].abs() < 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Prng::seed_from(99);
        let m = 30;
        let d = 2;
        let coords: Vec<f64> = (0..m * d).map(|_| rng.next_standard_normal()).collect();
        let inputs = Mat::from_rows(m, d, &coords);
        let values: Vec<f64> = (0..m)
            .map(|i| {
                let row = inputs.row(i);
                0.5 * (row[0] * row[0] + 0.3 * row[1] * row[1]) + 0.1 * row[0] * row[1]
            })
            .collect();
        let s = gp_fit(&inputs, &values, HyperPolicy::Heuristic).unwrap();

        let step = 1e-5 * s.bandwidth();
        for _ in 0..100 {
            let point = [rng.next_standard_normal(), rng.next_standard_normal()];
            let grad = gp_mean_gradient(&s, &Mat::from_rows(1, d, &point)).unwrap();
            for c in 0..d {
                let mut plus = point;
                plus[c] += step;
                let mut minus = point;
                minus[c] -= step;
                let mu_plus = s.mean(&Mat::from_rows(1, d, &plus)).unwrap()[0];
                let mu_minus = s.mean(&Mat::from_rows(1, d, &minus)).unwrap()[0];
                let fd = (mu_plus - mu_minus) / (2.0 * step);
                let rel = (grad[(0, c)] - fd).abs() / fd.abs().max(1e-8);
                assert!(rel < 1e-4, "component {c}: {} vs {fd}", grad[(0, c)]);
            }
        }
    }

    #[test]
    fn variance_bounds_and_training_point_behaviour() {
        let mut rng = Prng::seed_from(3);
        let m = 20;
        let coords: Vec<f64> = (0..m).map(|_| 2.0 * rng.next_standard_normal()).collect();
        let inputs = Mat::from_rows(m, 1, &coords);
        let values: Vec<f64> = coords.iter().map(|x| x * x).collect();
        let s = gp_fit(
            &inputs,
            &values,
            HyperPolicy::Fixed {
                amplitude: 2.0,
                bandwidth: 0.7,
                noise: 0.0,
            },
        )
        .unwrap();

        let grid: Vec<f64> = (0..50).map(|i| -4.0 + 8.0 * i as f64 / 49.0).collect();
        let var = s.variance(&Mat::from_rows(50, 1, &grid)).unwrap();
        for v in &var {
            assert!(*v >= -1e-8, "variance must be nonnegative, got {v}");
            assert!(*v <= 2.0 + 1e-6, "variance bounded by the amplitude");
        }

        // At noiseless training points the variance collapses.
        let at_train = s.variance(&inputs).unwrap();
        for v in &at_train {
            assert!(v.abs() <= 1e-8 * 2.0, "residual variance {v}");
        }
    }

    #[test]
    fn duplicate_training_point_leaves_mean_unchanged() {
        let inputs = Mat::from_rows(3, 1, &[0.0, 1.0, 2.0]);
        let values = [1.0, 0.5, 2.0];
        // Zero noise: the duplicate makes the Gram singular and the jitter
        // ladder has to absorb it without moving the interpolant.
        let policy = HyperPolicy::Fixed {
            amplitude: 1.0,
            bandwidth: 0.9,
            noise: 0.0,
        };
        let base = gp_fit(&inputs, &values, policy).unwrap();

        let dup_inputs = Mat::from_rows(4, 1, &[0.0, 1.0, 2.0, 1.0]);
        let dup_values = [1.0, 0.5, 2.0, 0.5];
        let dup = gp_fit(&dup_inputs, &dup_values, policy).unwrap();

        let grid: Vec<f64> = (0..20).map(|i| -1.0 + 4.0 * i as f64 / 19.0).collect();
        let grid = Mat::from_rows(20, 1, &grid);
        let a = base.mean(&grid).unwrap();
        let b = dup.mean(&grid).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn rejects_non_finite_values() {
        let inputs = Mat::from_rows(1, 1, &[0.0]);
        assert!(gp_fit(&inputs, &[f64::NAN], HyperPolicy::Heuristic).is_err());
    }
}
