//! Gaussian regression model for scattering data: data simulation, the
//! Gaussian prior on `E_D`, log-likelihood and posterior with gradients,
//! MAP estimation, and the discretization-bias diagnostic.
//!
//! All log-densities are unnormalized: MCMC and optimization only consume
//! differences, so additive constants are dropped throughout.

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, BoundaryQuadrature};
use crate::lie::{CoefficientField, CoefficientVector, MatrixField};
use crate::numerics::pairwise_sum;
use crate::rng::CounterRng;
use crate::transport::{ray_with_derivatives, scattering_data, OdeOptions};
use crate::zernike::{eigenvalue, RealBasis};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

/// An unnormalized log-density with gradient; the shared interface of the
/// posterior, its surrogate, and synthetic optimization targets.
pub trait LogDensity: Sync {
    fn value_and_grad(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)>;
}

/// Prior `Π = N(0, (N δ_N²)^{-1} Λ_α)` with `Λ_α = diag(λ_ℓ^{-α})` and
/// `δ_N = N^{-α/(2α+2)}` (disk dimension `d = 2` is hard-wired).
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub alpha: f64,
    pub n_data: usize,
    pub dim: usize,
    pub m: usize,
}

impl PriorSpec {
    pub fn new(alpha: f64, n_data: usize, dim: usize, m: usize) -> Result<Self> {
        if alpha <= 0.0 || n_data == 0 {
            return Err(Error::invalid("prior needs alpha > 0 and N >= 1"));
        }
        let dm = m * (m - 1) / 2;
        if m < 2 || dim == 0 || dim % dm != 0 {
            return Err(Error::dim("prior dimension must be a positive multiple of d_m"));
        }
        Ok(PriorSpec {
            alpha,
            n_data,
            dim,
            m,
        })
    }

    pub fn delta_n(&self) -> f64 {
        (self.n_data as f64).powf(-self.alpha / (2.0 * self.alpha + 2.0))
    }

    /// `N δ_N²`, the prior precision scaling.
    pub fn scaling(&self) -> f64 {
        self.n_data as f64 * self.delta_n().powi(2)
    }

    fn so_dim(&self) -> usize {
        self.m * (self.m - 1) / 2
    }

    /// `λ_ℓ^α` for the coordinate at flat index `j = ℓ·d_m + i`.
    pub fn precision_weight(&self, flat: usize) -> f64 {
        eigenvalue(flat / self.so_dim()).powf(self.alpha)
    }

    /// Marginal prior standard deviation of coordinate `j`.
    pub fn marginal_sd(&self, flat: usize) -> f64 {
        1.0 / (self.scaling() * self.precision_weight(flat)).sqrt()
    }

    /// Bias threshold `δ_N / (2√m + 1)` for the discretization diagnostic.
    pub fn bias_threshold(&self) -> f64 {
        self.delta_n() / (2.0 * (self.m as f64).sqrt() + 1.0)
    }

    /// Draws one sample from the prior, keyed by `(seed, index)`.
    pub fn sample(&self, seed: u64, index: u64) -> DVector<f64> {
        let rng = CounterRng::new(seed);
        DVector::from_iterator(
            self.dim,
            (0..self.dim)
                .map(|j| self.marginal_sd(j) * rng.standard_normal(index, j as u64)),
        )
    }
}

/// `log π(θ)` up to constants: `-(N δ_N²/2) Σ λ_ℓ^α θ_{ℓ,i}²`, with gradient.
pub fn log_prior(theta: &CoefficientVector, prior: &PriorSpec) -> (f64, DVector<f64>) {
    let s = prior.scaling();
    let mut value = 0.0;
    let mut grad = DVector::zeros(theta.dim());
    for j in 0..theta.dim() {
        let w = prior.precision_weight(j);
        let t = theta.values[j];
        value -= 0.5 * s * w * t * t;
        grad[j] = -s * w * t;
    }
    (value, grad)
}

/// One record: fan-beam point plus noisy scattering matrix.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub m: usize,
    pub points: Vec<BoundaryPoint>,
    pub y: Vec<DMatrix<f64>>,
    pub seed: u64,
    pub noise_scale: f64,
    /// Provenance of the ground truth (free-form, embedded in artifacts).
    pub truth_meta: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Simulates `Y_i = C_Φ(X_i, V_i) + noise_scale·ε_i` with `(X_i, V_i) ~ λ`
/// (α uniform on `[-π/2, π/2]`, β uniform on `[0, 2π)`) and all `m²` noise
/// entries i.i.d. standard normal. Deterministic given the seed.
pub fn simulate_dataset(
    truth: &dyn MatrixField,
    n: usize,
    noise_scale: f64,
    seed: u64,
    opts: &OdeOptions,
    truth_meta: impl Into<String>,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("dataset needs at least one record"));
    }
    let m = truth.size();
    let rng = CounterRng::new(seed);
    let records: Vec<Result<(BoundaryPoint, DMatrix<f64>)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let i = i as u64;
            let alpha = -PI / 2.0 + PI * rng.uniform(i, 0);
            let beta = 2.0 * PI * rng.uniform(i, 1);
            let p = BoundaryPoint::new(alpha, beta)?;
            let mut y = scattering_data(truth, &p, opts)?.value;
            for j in 0..m {
                for k in 0..m {
                    y[(j, k)] +=
                        noise_scale * rng.standard_normal(i, 1 + (j * m + k) as u64);
                }
            }
            Ok((p, y))
        })
        .collect();
    let mut points = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for r in records {
        let (p, v) = r?;
        points.push(p);
        y.push(v);
    }
    Ok(Dataset {
        m,
        points,
        y,
        seed,
        noise_scale,
        truth_meta: truth_meta.into(),
    })
}

/// Everything needed to evaluate the posterior: data, prior, basis, and
/// ODE options.
pub struct PosteriorContext {
    pub dataset: Dataset,
    pub prior: PriorSpec,
    pub basis: Arc<RealBasis>,
    pub ode: OdeOptions,
}

impl PosteriorContext {
    pub fn new(dataset: Dataset, prior: PriorSpec, ode: OdeOptions) -> Result<Self> {
        if dataset.m != prior.m {
            return Err(Error::dim("dataset and prior disagree on m"));
        }
        let dm = prior.so_dim();
        let basis = Arc::new(RealBasis::new(prior.dim / dm));
        Ok(PosteriorContext {
            dataset,
            prior,
            basis,
            ode,
        })
    }

    pub fn coefficients(&self, theta: &DVector<f64>) -> Result<CoefficientVector> {
        if theta.len() != self.prior.dim {
            return Err(Error::dim(format!(
                "theta has {} coordinates, model has {}",
                theta.len(),
                self.prior.dim
            )));
        }
        CoefficientVector::new(self.prior.m, theta.clone())
    }

    pub fn field(&self, theta: &CoefficientVector) -> Result<CoefficientField> {
        CoefficientField::new(theta.clone(), self.basis.clone())
    }
}

/// `ℓ_N(θ) = -½ Σ_i ‖Y_i - C_θ(p_i)‖_F²` and its gradient
/// `∂_j ℓ_N = Σ_i ⟨Y_i - C_θ(p_i), Ċ_θ[b_j](p_i)⟩_F`.
///
/// The per-ray terms are computed in parallel and reduced in index order,
/// so the result does not depend on the worker count.
pub fn log_likelihood(
    theta: &CoefficientVector,
    ctx: &PosteriorContext,
) -> Result<(f64, DVector<f64>)> {
    let field = ctx.field(theta)?;
    let dim = theta.dim();
    let per_ray: Vec<Result<(f64, DVector<f64>)>> = (0..ctx.dataset.len())
        .into_par_iter()
        .map(|i| {
            let sweep = ray_with_derivatives(&field, &ctx.dataset.points[i], &ctx.ode)?;
            let resid = &ctx.dataset.y[i] - &sweep.value;
            let mut g = DVector::zeros(dim);
            for (j, col) in sweep.derivatives.iter().enumerate() {
                g[j] = resid.dot(col);
            }
            Ok((resid.norm_squared(), g))
        })
        .collect();
    let mut sq = Vec::with_capacity(per_ray.len());
    let mut grad = DVector::zeros(dim);
    for r in per_ray {
        let (s, g) = r?;
        sq.push(s);
        grad += g;
    }
    Ok((-0.5 * pairwise_sum(&sq), grad))
}

/// `log π(θ | data) = ℓ_N(θ) + log π(θ)` (unnormalized) with gradient.
pub fn log_posterior(
    theta: &CoefficientVector,
    ctx: &PosteriorContext,
) -> Result<(f64, DVector<f64>)> {
    let (lv, lg) = log_likelihood(theta, ctx)?;
    let (pv, pg) = log_prior(theta, &ctx.prior);
    Ok((lv + pv, lg + pg))
}

/// Posterior as a [`LogDensity`].
pub struct PosteriorDensity<'a> {
    pub ctx: &'a PosteriorContext,
}

impl LogDensity for PosteriorDensity<'_> {
    fn value_and_grad(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let coeffs = self.ctx.coefficients(theta)?;
        log_posterior(&coeffs, self.ctx)
    }
}

#[derive(Debug, Clone)]
pub struct MapReport {
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub value: f64,
}

/// Gradient ascent with Armijo backtracking (`c = 1e-4`, shrink `0.5`)
/// until `‖∇‖ ≤ tol` or the iteration budget runs out. Non-convergence is
/// reported in the flag, not as an error.
pub fn map_estimate(
    objective: &dyn LogDensity,
    init: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, MapReport)> {
    const ARMIJO_C: f64 = 1e-4;
    let mut theta = init.clone();
    let (mut value, mut grad) = objective.value_and_grad(&theta)?;
    let mut step = 1.0;
    for it in 0..max_iter {
        let gn = grad.norm();
        if !gn.is_finite() {
            return Err(Error::numeric("MAP gradient is not finite"));
        }
        if gn <= tol {
            return Ok((
                theta,
                MapReport {
                    converged: true,
                    iterations: it,
                    grad_norm: gn,
                    value,
                },
            ));
        }
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta + &grad * step;
            let (cv, cg) = objective.value_and_grad(&cand)?;
            if cv >= value + ARMIJO_C * step * gn * gn {
                theta = cand;
                value = cv;
                grad = cg;
                step *= 2.0;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // line search exhausted: gradient scale is below float resolution
            let gn = grad.norm();
            return Ok((
                theta,
                MapReport {
                    converged: gn <= tol,
                    iterations: it + 1,
                    grad_norm: gn,
                    value,
                },
            ));
        }
    }
    let gn = grad.norm();
    Ok((
        theta,
        MapReport {
            converged: gn <= tol,
            iterations: max_iter,
            grad_norm: gn,
            value,
        },
    ))
}

#[derive(Debug, Clone)]
pub struct BiasReport {
    /// `‖C_{Φ★} - C_{Φ★,D}‖_{L²_λ}` by boundary quadrature.
    pub bias: f64,
    /// `δ_N / (2√m + 1)`.
    pub threshold: f64,
}

/// Discretization bias of a ground truth against its `E_D` projection.
pub fn bias_norm(
    truth: &dyn MatrixField,
    projection: &CoefficientField,
    rule: &BoundaryQuadrature,
    opts: &OdeOptions,
    prior: &PriorSpec,
) -> Result<BiasReport> {
    if truth.size() != projection.size() {
        return Err(Error::dim("truth and projection sizes differ"));
    }
    let sq: Vec<Result<f64>> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(p, w)| {
            let a = scattering_data(truth, p, opts)?.value;
            let b = scattering_data(projection, p, opts)?.value;
            Ok(w * (a - b).norm_squared())
        })
        .collect();
    let mut terms = Vec::with_capacity(sq.len());
    for t in sq {
        terms.push(t?);
    }
    Ok(BiasReport {
        bias: pairwise_sum(&terms).sqrt(),
        threshold: prior.bias_threshold(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::boundary_quadrature;
    use crate::lie::{project_to_coefficients, BumpField};
    use approx::assert_abs_diff_eq;

    fn quick_ode() -> OdeOptions {
        OdeOptions {
            step_fraction: 5e-3,
            ..OdeOptions::default()
        }
    }

    fn small_context(n: usize, noise: f64, seed: u64) -> PosteriorContext {
        let truth = BumpField::new(2, 0.8, vec![0.6]).unwrap();
        let ode = quick_ode();
        let dataset = simulate_dataset(&truth, n, noise, seed, &ode, "bump r0=0.8").unwrap();
        let prior = PriorSpec::new(6.0, n, 6, 2).unwrap();
        PosteriorContext::new(dataset, prior, ode).unwrap()
    }

    fn random_theta(ctx: &PosteriorContext, seed: u64, scale: f64) -> CoefficientVector {
        let rng = CounterRng::new(seed);
        let v = DVector::from_iterator(
            ctx.prior.dim,
            (0..ctx.prior.dim).map(|j| scale * rng.standard_normal(0, j as u64)),
        );
        ctx.coefficients(&v).unwrap()
    }

    #[test]
    fn prior_spec_constants() {
        let prior = PriorSpec::new(6.0, 500, 6, 2).unwrap();
        let expect = (500f64).powf(-6.0 / 14.0);
        assert_abs_diff_eq!(prior.delta_n(), expect, epsilon = 1e-15);
        assert_abs_diff_eq!(
            prior.bias_threshold(),
            expect / (2.0 * 2f64.sqrt() + 1.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn log_prior_cases() {
        let prior = PriorSpec::new(6.0, 500, 6, 2).unwrap();

        let zero = CoefficientVector::zeros(2, 6).unwrap();
        let (v, g) = log_prior(&zero, &prior);
        assert_eq!(v, 0.0);
        assert_eq!(g.norm(), 0.0);

        // unit vector at ℓ = 0
        let mut unit = DVector::zeros(6);
        unit[0] = 1.0;
        let (v, _) = log_prior(&CoefficientVector::new(2, unit).unwrap(), &prior);
        let lam0 = eigenvalue(0).powf(6.0);
        assert_abs_diff_eq!(v, -0.5 * prior.scaling() * lam0, epsilon = 1e-18);

        // gradient vs central differences
        let rng = CounterRng::new(3);
        let theta = CoefficientVector::new(
            2,
            DVector::from_iterator(6, (0..6).map(|j| rng.standard_normal(0, j as u64))),
        )
        .unwrap();
        let (_, g) = log_prior(&theta, &prior);
        let t = 1e-6;
        for j in 0..6 {
            let mut up = theta.clone();
            up.values[j] += t;
            let mut dn = theta.clone();
            dn.values[j] -= t;
            let fd = (log_prior(&up, &prior).0 - log_prior(&dn, &prior).0) / (2.0 * t);
            assert_abs_diff_eq!(g[j], fd, epsilon = 1e-8);
        }
    }

    #[test]
    fn simulated_data_properties() {
        let ode = quick_ode();
        // noiseless data stays in SO(m)
        let truth = BumpField::new(2, 0.8, vec![0.8]).unwrap();
        let ds = simulate_dataset(&truth, 16, 0.0, 7, &ode, "t").unwrap();
        for y in &ds.y {
            assert!((y.transpose() * y - DMatrix::identity(2, 2)).norm() < 1e-8);
        }

        // zero field, noiseless: all identities
        let ds = simulate_dataset(&crate::lie::ZeroField { m: 2 }, 8, 0.0, 7, &ode, "z").unwrap();
        for y in &ds.y {
            assert!((y - DMatrix::identity(2, 2)).norm() < 1e-12);
        }

        // fixed seed reproduces bit for bit
        let a = simulate_dataset(&truth, 12, 1.0, 99, &ode, "t").unwrap();
        let b = simulate_dataset(&truth, 12, 1.0, 99, &ode, "t").unwrap();
        for i in 0..12 {
            assert_eq!(a.points[i].alpha().to_bits(), b.points[i].alpha().to_bits());
            assert_eq!(a.points[i].beta().to_bits(), b.points[i].beta().to_bits());
            for (x, y) in a.y[i].iter().zip(b.y[i].iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn likelihood_vanishes_on_noiseless_in_model_truth() {
        // truth already in E_D: simulate from the projected field
        let ode = quick_ode();
        let bump = BumpField::new(2, 0.8, vec![0.6]).unwrap();
        let basis = Arc::new(RealBasis::new(6));
        let rule = crate::geometry::disk_quadrature(64, 64);
        let proj = project_to_coefficients(&bump, 6, &basis, &rule).unwrap();
        let pf = CoefficientField::new(proj.clone(), basis).unwrap();
        let dataset = simulate_dataset(&pf, 10, 0.0, 5, &ode, "proj").unwrap();
        let prior = PriorSpec::new(6.0, 10, 6, 2).unwrap();
        let ctx = PosteriorContext::new(dataset, prior, ode).unwrap();
        let (v, g) = log_likelihood(&proj, &ctx).unwrap();
        assert!(v.abs() < 1e-15, "value {v}");
        assert!(g.norm() < 1e-7, "grad norm {}", g.norm());
    }

    #[test]
    fn likelihood_gradient_matches_directional_fd() {
        for (m, dim, seed) in [(2usize, 6usize, 1u64), (3, 18, 2)] {
            let truth = BumpField::new(m, 0.8, vec![0.5; m * (m - 1) / 2]).unwrap();
            let ode = quick_ode();
            let dataset = simulate_dataset(&truth, 20, 1.0, seed, &ode, "b").unwrap();
            let prior = PriorSpec::new(6.0, 20, dim, m).unwrap();
            let ctx = PosteriorContext::new(dataset, prior, ode).unwrap();
            let rng = CounterRng::new(seed + 10);
            for trial in 0..5 {
                let theta = random_theta(&ctx, 100 + trial, 0.3);
                let h = DVector::from_iterator(
                    dim,
                    (0..dim).map(|j| rng.standard_normal(trial, j as u64)),
                );
                let (_, g) = log_likelihood(&theta, &ctx).unwrap();
                let t = 1e-5;
                let up = ctx.coefficients(&(&theta.values + &h * t)).unwrap();
                let dn = ctx.coefficients(&(&theta.values - &h * t)).unwrap();
                let fd = (log_likelihood(&up, &ctx).unwrap().0
                    - log_likelihood(&dn, &ctx).unwrap().0)
                    / (2.0 * t);
                let dir = g.dot(&h);
                let rel = (dir - fd).abs() / dir.abs().max(1e-12);
                assert!(rel < 1e-5, "m={m} trial={trial} rel err {rel}");
            }
        }
    }

    #[test]
    fn likelihood_invariant_under_permutation() {
        let ctx = small_context(15, 1.0, 3);
        let theta = random_theta(&ctx, 4, 0.4);
        let (v, _) = log_likelihood(&theta, &ctx).unwrap();
        // reverse the records
        let mut ds = ctx.dataset.clone();
        ds.points.reverse();
        ds.y.reverse();
        let ctx2 = PosteriorContext::new(ds, ctx.prior.clone(), ctx.ode.clone()).unwrap();
        let (v2, _) = log_likelihood(&theta, &ctx2).unwrap();
        assert_abs_diff_eq!(v, v2, epsilon = 1e-9);
    }

    #[test]
    fn likelihood_decreases_with_noise_scale() {
        // at θ = truth the value is -||ε||²/2, so scaling the noise up makes
        // it more negative; checked on the average over 50 seeds
        let truth = BumpField::new(2, 0.8, vec![0.6]).unwrap();
        let ode = quick_ode();
        let basis = Arc::new(RealBasis::new(6));
        let rule = crate::geometry::disk_quadrature(64, 64);
        let proj = project_to_coefficients(&truth, 6, &basis, &rule).unwrap();
        let mut lo = 0.0;
        let mut hi = 0.0;
        for seed in 0..50u64 {
            for (scale, acc) in [(0.5, &mut lo), (1.5, &mut hi)] {
                let ds = simulate_dataset(&truth, 6, scale, seed, &ode, "t").unwrap();
                let prior = PriorSpec::new(6.0, 6, 6, 2).unwrap();
                let ctx = PosteriorContext::new(ds, prior, ode.clone()).unwrap();
                *acc += log_likelihood(&proj, &ctx).unwrap().0;
            }
        }
        assert!(hi / 50.0 < lo / 50.0, "lo={lo} hi={hi}");
    }

    #[test]
    fn posterior_is_sum_of_parts() {
        let ctx = small_context(10, 1.0, 11);
        let theta = random_theta(&ctx, 12, 0.5);
        let (lv, lg) = log_likelihood(&theta, &ctx).unwrap();
        let (pv, pg) = log_prior(&theta, &ctx.prior);
        let (v, g) = log_posterior(&theta, &ctx).unwrap();
        assert_eq!(v, lv + pv);
        assert_eq!((lg + pg - g).norm(), 0.0);
    }

    #[test]
    fn map_solves_ridge_quadratic() {
        // objective -½‖θ - a‖² - (s/2)‖θ‖² has the closed-form maximizer
        // a/(1 + s)
        struct Ridge {
            a: DVector<f64>,
            s: f64,
        }
        impl LogDensity for Ridge {
            fn value_and_grad(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
                let d = theta - &self.a;
                let v = -0.5 * d.norm_squared() - 0.5 * self.s * theta.norm_squared();
                let g = -d - theta * self.s;
                Ok((v, g))
            }
        }
        let a = DVector::from_row_slice(&[1.0, -2.0, 0.5, 3.0]);
        let obj = Ridge { a: a.clone(), s: 0.25 };
        let init = DVector::zeros(4);
        let (theta, report) = map_estimate(&obj, &init, 1e-8, 500).unwrap();
        assert!(report.converged);
        assert!(report.grad_norm <= 1e-8);
        let expect = a / 1.25;
        assert!((theta - expect).amax() < 1e-7);
    }

    #[test]
    fn map_stays_at_noiseless_truth() {
        let ode = quick_ode();
        let bump = BumpField::new(2, 0.8, vec![0.5]).unwrap();
        let basis = Arc::new(RealBasis::new(6));
        let rule = crate::geometry::disk_quadrature(64, 64);
        let proj = project_to_coefficients(&bump, 6, &basis, &rule).unwrap();
        let pf = CoefficientField::new(proj.clone(), basis).unwrap();
        let dataset = simulate_dataset(&pf, 12, 0.0, 5, &ode, "proj").unwrap();
        // weak prior so the likelihood stationary point dominates
        let prior = PriorSpec::new(6.0, 12, 6, 2).unwrap();
        let ctx = PosteriorContext::new(dataset, prior, ode).unwrap();
        let obj = PosteriorDensity { ctx: &ctx };
        let (theta, report) = map_estimate(&obj, &proj.values, 1e-6, 100).unwrap();
        assert!(report.grad_norm <= 1e-6);
        assert!((theta - &proj.values).norm() < 1e-6);
    }

    #[test]
    fn bias_norm_behaviour() {
        let ode = quick_ode();
        let rule = boundary_quadrature(24, 24);
        let disk_rule = crate::geometry::disk_quadrature(64, 64);
        let bump = BumpField::new(2, 0.8, vec![0.9]).unwrap();
        let basis = Arc::new(RealBasis::new(36));
        let prior = PriorSpec::new(6.0, 500, 6, 2).unwrap();

        // truth in E_D projects to itself: bias at solver tolerance
        let proj6 = project_to_coefficients(&bump, 6, &basis, &disk_rule).unwrap();
        let pf6 = CoefficientField::new(proj6.clone(), basis.clone()).unwrap();
        let self_bias = bias_norm(&pf6, &pf6, &rule, &ode, &prior).unwrap();
        assert!(self_bias.bias < 1e-10);

        // bias decreases in D for the bump truth
        let mut last = f64::INFINITY;
        for dim in [3usize, 10, 21, 36] {
            let proj = project_to_coefficients(&bump, dim, &basis, &disk_rule).unwrap();
            let pf = CoefficientField::new(proj, basis.clone()).unwrap();
            let report = bias_norm(&bump, &pf, &rule, &ode, &prior).unwrap();
            assert!(
                report.bias < last + 1e-12,
                "bias not decreasing at D={dim}: {} vs {last}",
                report.bias
            );
            last = report.bias;
        }

        // threshold arithmetic for N=500, alpha=6, m=2
        let expect = (500f64).powf(-6.0 / 14.0) / (2.0 * 2f64.sqrt() + 1.0);
        assert_abs_diff_eq!(prior.bias_threshold(), expect, epsilon = 1e-15);
    }
}
