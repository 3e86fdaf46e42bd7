//! Direct density-ratio estimation between two particle sets.
//!
//! The prior-flow velocity is multiplied by `g(θ) = ρ_t(θ) / p_t(θ)`; rather
//! than estimating both densities and dividing, the relative ratio
//! `p_nu / (α p_nu + (1-α) p_de)` is fitted directly by relative
//! unconstrained least-squares importance fitting: a Gaussian-kernel
//! expansion over centers drawn from the numerator samples, with a
//! closed-form ridge solution and the ridge picked by k-fold cross-validation
//! of the least-squares objective. Coefficients may go negative, so
//! evaluations are clipped to a positive band before they multiply a step
//! size.
//!
//! A KDE-quotient fallback is available for ablation.

use alloc::vec;
use alloc::vec::Vec;

use crate::ensemble::{self, KernelConfig, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Mat};
use crate::math;
use crate::rng::Prng;

/// Knobs for [`fit_density_ratio`].
#[derive(Debug, Clone)]
pub struct RatioSettings {
    /// Relative-ratio mixture weight in `[0, 1]`; 0 recovers the plain ratio.
    pub alpha_mix: f64,
    /// Ridge candidates for cross-validation, ascending.
    pub lambda_grid: Vec<f64>,
    /// Cross-validation folds.
    pub n_folds: usize,
    /// Centers are all numerator samples up to this count, then a seeded
    /// subsample of exactly this count.
    pub max_centers: usize,
    /// `(g_min, g_max)` clip band applied at evaluation.
    pub clip: (f64, f64),
}

impl Default for RatioSettings {
    fn default() -> Self {
        RatioSettings {
            alpha_mix: 0.1,
            lambda_grid: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            n_folds: 5,
            max_centers: 200,
            clip: (1e-3, 1e3),
        }
    }
}

impl RatioSettings {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha_mix) {
            return Err(Error::InvalidInput(alloc::format!(
                "alpha_mix must lie in [0, 1], got {}",
                self.alpha_mix
            )));
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidInput(
                "lambda grid must be nonempty and positive".into(),
            ));
        }
        if !(self.clip.0 > 0.0) || self.clip.1 < self.clip.0 {
            return Err(Error::InvalidInput(
                "clip bounds need 0 < g_min <= g_max".into(),
            ));
        }
        Ok(())
    }
}

/// Fitted kernel expansion of the relative density ratio.
#[derive(Debug, Clone)]
pub struct DensityRatioModel {
    centers: Mat,
    coefficients: Vec<f64>,
    /// Gaussian-kernel bandwidth `h` (same convention as the KDE kernel).
    bandwidth: f64,
    alpha_mix: f64,
    ridge: f64,
    clip: (f64, f64),
}

impl DensityRatioModel {
    pub fn n_centers(&self) -> usize {
        self.centers.rows()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn alpha_mix(&self) -> f64 {
        self.alpha_mix
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

/// Either estimator behind one evaluation surface; the flow picks by config.
#[derive(Debug, Clone)]
pub enum RatioModel {
    Rulsif(DensityRatioModel),
    KdeQuotient(KdeRatioModel),
}

impl RatioModel {
    pub fn evaluate(&self, points: &Mat) -> Result<Vec<f64>> {
        match self {
            RatioModel::Rulsif(m) => Ok(evaluate_ratio(m, points)),
            RatioModel::KdeQuotient(m) => m.evaluate(points),
        }
    }
}

/// KDE-quotient fallback: `exp(log ρ̃_nu - log p̃_de)`, clipped.
#[derive(Debug, Clone)]
pub struct KdeRatioModel {
    numerator: ParticleEnsemble,
    denominator: ParticleEnsemble,
    kernel_nu: KernelConfig,
    kernel_de: KernelConfig,
    clip: (f64, f64),
}

impl KdeRatioModel {
    pub fn fit(
        numerator: &ParticleEnsemble,
        denominator: &ParticleEnsemble,
        clip: (f64, f64),
    ) -> Result<Self> {
        if numerator.dim() != denominator.dim() {
            return Err(Error::DimensionMismatch {
                expected: numerator.dim(),
                found: denominator.dim(),
            });
        }
        let kernel_nu = KernelConfig::normalized(ensemble::median_bandwidth(numerator)?)?;
        let kernel_de = KernelConfig::normalized(ensemble::median_bandwidth(denominator)?)?;
        Ok(KdeRatioModel {
            numerator: numerator.clone(),
            denominator: denominator.clone(),
            kernel_nu,
            kernel_de,
            clip,
        })
    }

    pub fn evaluate(&self, points: &Mat) -> Result<Vec<f64>> {
        let log_nu = ensemble::kde_log_density(points, &self.numerator, &self.kernel_nu)?;
        let log_de = ensemble::kde_log_density(points, &self.denominator, &self.kernel_de)?;
        Ok(log_nu
            .iter()
            .zip(log_de.iter())
            .map(|(a, b)| clamp(math::exp(a - b), self.clip))
            .collect())
    }
}

fn clamp(value: f64, (lo, hi): (f64, f64)) -> f64 {
    if value < lo {
        lo
    } else if value > hi {
        hi
    } else {
        value
    }
}

/// Indices of `e`'s particles in lexicographic coordinate order. Fold
/// assignment and sum order both run over this ordering, which makes the fit
/// invariant under permutations of the input samples.
fn canonical_order(e: &ParticleEnsemble) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..e.len()).collect();
    idx.sort_unstable_by(|&a, &b| {
        let ra = e.particle(a);
        let rb = e.particle(b);
        for (x, y) in ra.iter().zip(rb.iter()) {
            match x.partial_cmp(y).expect("particle coordinates are finite") {
                core::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        core::cmp::Ordering::Equal
    });
    idx
}

fn gaussian(a: &[f64], b: &[f64], h: f64) -> f64 {
    let mut sq = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let diff = x - y;
        sq += diff * diff;
    }
    math::exp(-sq / (2.0 * h))
}

/// Kernel design matrix: row per sample (in `order`), column per center.
fn design(e: &ParticleEnsemble, order: &[usize], centers: &Mat, h: f64) -> Mat {
    let mut phi = Mat::zeros(order.len(), centers.rows());
    for (row, &i) in order.iter().enumerate() {
        let sample = e.particle(i);
        let out = phi.row_mut(row);
        for c in 0..centers.rows() {
            out[c] = gaussian(sample, centers.row(c), h);
        }
    }
    phi
}

/// Accumulates `Σ φφᵀ` and `Σ φ` over the selected design rows.
fn accumulate(phi: &Mat, rows: &[usize], gram: &mut Mat, mean: &mut [f64]) {
    let c = phi.cols();
    for &r in rows {
        let row = phi.row(r);
        for i in 0..c {
            let ri = row[i];
            mean[i] += ri;
            for j in 0..=i {
                gram[(i, j)] += ri * row[j];
            }
        }
    }
}

fn symmetrize_lower(gram: &mut Mat) {
    for i in 0..gram.rows() {
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
    }
}

struct RulsifObjective {
    /// `α/n_nu Σ φφᵀ + (1-α)/n_de Σ φφᵀ`.
    h_mat: Mat,
    /// `1/n_nu Σ φ_nu`.
    h_vec: Vec<f64>,
}

fn build_objective(
    phi_nu: &Mat,
    nu_rows: &[usize],
    phi_de: &Mat,
    de_rows: &[usize],
    alpha: f64,
) -> RulsifObjective {
    let c = phi_nu.cols();
    let mut gram_nu = Mat::zeros(c, c);
    let mut sum_nu = vec![0.0; c];
    accumulate(phi_nu, nu_rows, &mut gram_nu, &mut sum_nu);
    let mut gram_de = Mat::zeros(c, c);
    let mut sum_de = vec![0.0; c];
    accumulate(phi_de, de_rows, &mut gram_de, &mut sum_de);

    let w_nu = alpha / nu_rows.len().max(1) as f64;
    let w_de = (1.0 - alpha) / de_rows.len().max(1) as f64;
    let mut h_mat = Mat::zeros(c, c);
    for i in 0..c {
        for j in 0..=i {
            h_mat[(i, j)] = w_nu * gram_nu[(i, j)] + w_de * gram_de[(i, j)];
        }
    }
    symmetrize_lower(&mut h_mat);
    let h_vec = sum_nu
        .iter()
        .map(|s| s / nu_rows.len().max(1) as f64)
        .collect();
    RulsifObjective { h_mat, h_vec }
}

fn solve_ridge(obj: &RulsifObjective, ridge: f64) -> Result<Vec<f64>> {
    let c = obj.h_vec.len();
    let mut system = obj.h_mat.clone();
    for i in 0..c {
        system[(i, i)] += ridge;
    }
    let chol = Cholesky::new(&system)?;
    Ok(chol.solve(&obj.h_vec))
}

/// `J(β) = ½ βᵀ H β - hᵀ β` under the given objective.
fn least_squares_objective(obj: &RulsifObjective, beta: &[f64]) -> f64 {
    let hb = obj.h_mat.mul_vec(beta);
    let quad: f64 = beta.iter().zip(hb.iter()).map(|(a, b)| a * b).sum();
    let lin: f64 = beta.iter().zip(obj.h_vec.iter()).map(|(a, b)| a * b).sum();
    0.5 * quad - lin
}

/// Fits the relative density ratio `numerator / (α·numerator +
/// (1-α)·denominator)` from the two sample sets.
///
/// The kernel bandwidth comes from the median heuristic over the pooled
/// samples; `rng` is consumed only when the numerator exceeds
/// `settings.max_centers` and a center subsample must be drawn.
pub fn fit_density_ratio(
    numerator: &ParticleEnsemble,
    denominator: &ParticleEnsemble,
    settings: &RatioSettings,
    rng: &mut Prng,
) -> Result<DensityRatioModel> {
    settings.validate()?;
    if numerator.dim() != denominator.dim() {
        return Err(Error::DimensionMismatch {
            expected: numerator.dim(),
            found: denominator.dim(),
        });
    }
    let d = numerator.dim();

    // Median-heuristic bandwidth over the pooled samples.
    let mut pooled = numerator.positions().to_vec();
    pooled.extend_from_slice(denominator.positions());
    let pooled = ParticleEnsemble::new(
        pooled,
        numerator.len() + denominator.len(),
        d,
        numerator.role(),
    )?;
    let bandwidth = ensemble::median_bandwidth(&pooled)?;

    let nu_order = canonical_order(numerator);
    let de_order = canonical_order(denominator);

    // Centers from the numerator, in canonical order.
    let centers = if numerator.len() <= settings.max_centers {
        let mut data = Vec::with_capacity(numerator.len() * d);
        for &i in &nu_order {
            data.extend_from_slice(numerator.particle(i));
        }
        Mat::from_rows(numerator.len(), d, &data)
    } else {
        let mut picks = rng.sample_indices(numerator.len(), settings.max_centers);
        picks.sort_unstable();
        let mut data = Vec::with_capacity(picks.len() * d);
        for &slot in &picks {
            data.extend_from_slice(numerator.particle(nu_order[slot]));
        }
        Mat::from_rows(picks.len(), d, &data)
    };

    let phi_nu = design(numerator, &nu_order, &centers, bandwidth);
    let phi_de = design(denominator, &de_order, &centers, bandwidth);
    let all_nu: Vec<usize> = (0..phi_nu.rows()).collect();
    let all_de: Vec<usize> = (0..phi_de.rows()).collect();
    let full = build_objective(&phi_nu, &all_nu, &phi_de, &all_de, settings.alpha_mix);

    // Ridge selection by k-fold cross-validation of the objective.
    let k = settings.n_folds.min(numerator.len()).min(denominator.len());
    let ridge = if k >= 2 && settings.lambda_grid.len() > 1 {
        let fold_of = |row: usize| row % k;
        let mut best = (f64::INFINITY, *settings.lambda_grid.last().unwrap());
        for &lambda in &settings.lambda_grid {
            let mut score = 0.0;
            let mut usable = true;
            for fold in 0..k {
                let train_nu: Vec<usize> = all_nu
                    .iter()
                    .copied()
                    .filter(|&r| fold_of(r) != fold)
                    .collect();
                let test_nu: Vec<usize> = all_nu
                    .iter()
                    .copied()
                    .filter(|&r| fold_of(r) == fold)
                    .collect();
                let train_de: Vec<usize> = all_de
                    .iter()
                    .copied()
                    .filter(|&r| fold_of(r) != fold)
                    .collect();
                let test_de: Vec<usize> = all_de
                    .iter()
                    .copied()
                    .filter(|&r| fold_of(r) == fold)
                    .collect();
                let train =
                    build_objective(&phi_nu, &train_nu, &phi_de, &train_de, settings.alpha_mix);
                let beta = match solve_ridge(&train, lambda) {
                    Ok(b) => b,
                    Err(_) => {
                        usable = false;
                        break;
                    }
                };
                let test =
                    build_objective(&phi_nu, &test_nu, &phi_de, &test_de, settings.alpha_mix);
                score += least_squares_objective(&test, &beta);
            }
            if usable && score < best.0 {
                best = (score, lambda);
            }
        }
        best.1
    } else {
        settings.lambda_grid[settings.lambda_grid.len() / 2]
    };

    // Final fit; escalate the ridge if the system is still singular.
    let mut coefficients = None;
    let mut used_ridge = ridge;
    for &lambda in settings.lambda_grid.iter().filter(|&&l| l >= ridge) {
        if let Ok(beta) = solve_ridge(&full, lambda) {
            coefficients = Some(beta);
            used_ridge = lambda;
            break;
        }
    }
    let coefficients = coefficients.ok_or(Error::SingularSystem)?;

    Ok(DensityRatioModel {
        centers,
        coefficients,
        bandwidth,
        alpha_mix: settings.alpha_mix,
        ridge: used_ridge,
        clip: settings.clip,
    })
}

/// Evaluates the fitted expansion, clipped to the model's band.
pub fn evaluate_ratio(model: &DensityRatioModel, points: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.rows());
    for p in 0..points.rows() {
        let point = points.row(p);
        let mut acc = 0.0;
        for (c, beta) in model.coefficients.iter().enumerate() {
            acc += beta * gaussian(point, model.centers.row(c), model.bandwidth);
        }
        out.push(clamp(acc, model.clip));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::EnsembleRole;

    fn normal_samples(n: usize, mean: f64, std: f64, seed: u64) -> ParticleEnsemble {
        let mut rng = Prng::seed_from(seed);
        let values: Vec<f64> = (0..n)
            .map(|_| mean + std * rng.next_standard_normal())
            .collect();
        ParticleEnsemble::from_scalars(&values, EnsembleRole::PosteriorApprox).unwrap()
    }

    fn as_points(e: &ParticleEnsemble) -> Mat {
        Mat::from_rows(e.len(), e.dim(), e.positions())
    }

    #[test]
    fn equal_samples_estimate_unity() {
        let nu = normal_samples(200, 0.0, 1.0, 10);
        let de = normal_samples(200, 0.0, 1.0, 20);
        let mut rng = Prng::seed_from(1);
        let model = fit_density_ratio(&nu, &de, &RatioSettings::default(), &mut rng).unwrap();
        let values = evaluate_ratio(&model, &as_points(&nu));
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((0.8..=1.2).contains(&mean), "mean ratio {mean}");
    }

    #[test]
    fn degenerate_mixture_targets_unity() {
        let nu = normal_samples(150, 0.5, 1.0, 3);
        let de = normal_samples(150, -0.5, 1.2, 4);
        let settings = RatioSettings {
            alpha_mix: 1.0,
            ..RatioSettings::default()
        };
        let mut rng = Prng::seed_from(2);
        let model = fit_density_ratio(&nu, &de, &settings, &mut rng).unwrap();
        let values = evaluate_ratio(&model, &as_points(&nu));
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((0.9..=1.1).contains(&mean), "mean ratio {mean}");
    }

    #[test]
    fn evaluations_respect_clip_bounds() {
        let nu = normal_samples(60, 0.0, 0.3, 5);
        let de = normal_samples(60, 6.0, 0.3, 6);
        let settings = RatioSettings {
            clip: (0.5, 2.0),
            ..RatioSettings::default()
        };
        let mut rng = Prng::seed_from(3);
        let model = fit_density_ratio(&nu, &de, &settings, &mut rng).unwrap();
        let grid: Vec<f64> = (0..100).map(|i| -2.0 + 10.0 * i as f64 / 99.0).collect();
        let values = evaluate_ratio(&model, &Mat::from_rows(100, 1, &grid));
        for v in values {
            assert!((0.5..=2.0).contains(&v), "clipped value {v}");
        }
    }

    #[test]
    fn clamp_passes_interior_values_through() {
        let model = DensityRatioModel {
            centers: Mat::from_rows(1, 1, &[0.0]),
            coefficients: vec![0.7],
            bandwidth: 1.0,
            alpha_mix: 0.1,
            ridge: 0.1,
            clip: (1e-3, 1e3),
        };
        // At the center the kernel is one, so the raw value is exactly 0.7.
        let v = evaluate_ratio(&model, &Mat::from_rows(1, 1, &[0.0]));
        assert_eq!(v[0], 0.7);

        // A negative raw expansion clips to g_min.
        let negative = DensityRatioModel {
            coefficients: vec![-0.3],
            ..model
        };
        let v = evaluate_ratio(&negative, &Mat::from_rows(1, 1, &[0.0]));
        assert_eq!(v[0], 1e-3);
    }

    #[test]
    fn separated_samples_order_statistic() {
        let nu = normal_samples(100, 0.0, 0.5, 8);
        let de = normal_samples(100, 5.0, 0.5, 9);
        let mut rng = Prng::seed_from(4);
        let model = fit_density_ratio(&nu, &de, &RatioSettings::default(), &mut rng).unwrap();
        let at_nu = evaluate_ratio(&model, &as_points(&nu));
        let at_de = evaluate_ratio(&model, &as_points(&de));
        let wins = at_nu
            .iter()
            .zip(at_de.iter())
            .filter(|(a, b)| a > b)
            .count();
        assert!(
            wins * 10 >= at_nu.len() * 9,
            "only {wins} of {} pairs",
            at_nu.len()
        );
    }

    #[test]
    fn permutation_of_samples_is_invisible() {
        let nu = normal_samples(80, 0.0, 1.0, 11);
        let de = normal_samples(80, 0.6, 1.0, 12);
        let mut rng = Prng::seed_from(5);
        let base = fit_density_ratio(&nu, &de, &RatioSettings::default(), &mut rng).unwrap();

        // Reverse both sample orders.
        let rev = |e: &ParticleEnsemble| {
            let mut values: Vec<f64> = e.positions().to_vec();
            values.reverse();
            ParticleEnsemble::from_scalars(&values, e.role()).unwrap()
        };
        let mut rng = Prng::seed_from(5);
        let permuted =
            fit_density_ratio(&rev(&nu), &rev(&de), &RatioSettings::default(), &mut rng).unwrap();

        let grid: Vec<f64> = (0..40).map(|i| -3.0 + 7.0 * i as f64 / 39.0).collect();
        let grid = Mat::from_rows(40, 1, &grid);
        let a = evaluate_ratio(&base, &grid);
        let b = evaluate_ratio(&permuted, &grid);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn two_gaussians_rank_correlation() {
        // Known 1D pair: N(0,1) vs N(1,1). With α = 0 the true ratio is
        // monotone decreasing; the fit must preserve the ordering on a grid.
        let nu = normal_samples(500, 0.0, 1.0, 21);
        let de = normal_samples(500, 1.0, 1.0, 22);
        let settings = RatioSettings {
            alpha_mix: 0.0,
            ..RatioSettings::default()
        };
        let mut rng = Prng::seed_from(6);
        let model = fit_density_ratio(&nu, &de, &settings, &mut rng).unwrap();

        let grid: Vec<f64> = (0..50).map(|i| -2.0 + 5.0 * i as f64 / 49.0).collect();
        let fitted = evaluate_ratio(&model, &Mat::from_rows(50, 1, &grid));
        let truth: Vec<f64> = grid
            .iter()
            .map(|t| {
                let log_r = 0.5 - t; // log[N(0,1)/N(1,1)](t)
                libm::exp(log_r)
            })
            .collect();
        let rho = spearman(&fitted, &truth);
        assert!(rho > 0.9, "rank correlation {rho}");
    }

    #[test]
    fn kde_quotient_fallback_behaves() {
        let nu = normal_samples(150, 0.0, 1.0, 31);
        let de = normal_samples(150, 0.0, 1.0, 32);
        let model = KdeRatioModel::fit(&nu, &de, (1e-3, 1e3)).unwrap();
        let values = model.evaluate(&as_points(&nu)).unwrap();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((0.7..=1.4).contains(&mean), "mean kde ratio {mean}");
        for v in values {
            assert!(v > 0.0);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let nu = normal_samples(10, 0.0, 1.0, 41);
        let de = ParticleEnsemble::new(vec![0.0; 20], 10, 2, EnsembleRole::Prior).unwrap();
        let mut rng = Prng::seed_from(7);
        assert!(matches!(
            fit_density_ratio(&nu, &de, &RatioSettings::default(), &mut rng),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn spearman(a: &[f64], b: &[f64]) -> f64 {
        fn ranks(x: &[f64]) -> Vec<f64> {
            let mut idx: Vec<usize> = (0..x.len()).collect();
            idx.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).unwrap());
            let mut r = vec![0.0; x.len()];
            for (rank, &i) in idx.iter().enumerate() {
                r[i] = rank as f64;
            }
            r
        }
        let ra = ranks(a);
        let rb = ranks(b);
        let n = a.len() as f64;
        let mean = (n - 1.0) / 2.0;
        let mut cov = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for (x, y) in ra.iter().zip(rb.iter()) {
            cov += (x - mean) * (y - mean);
            va += (x - mean) * (x - mean);
            vb += (y - mean) * (y - mean);
        }
        cov / (va.sqrt() * vb.sqrt())
    }
}
