//! Log-concave surrogate for the posterior: the likelihood is smoothly cut
//! off at radius `~η` around a base point `θ_init` and a stiff convex tail
//! `K·γ_η(‖θ-θ_init‖)` is subtracted, leaving the posterior untouched on
//! `‖θ-θ_init‖ ≤ η/2` and strongly log-concave far away.
//!
//! `γ_η` is the mollification of the shifted square `(t - 5η/8)²₊` by a
//! compactly supported bump of half-width `η/8`; `α` is a smooth cutoff
//! equal to 1 on `[0, 3/4]` and 0 on `[7/8, ∞)`. The mollifier and cutoff
//! are one admissible instantiation of their qualitative requirements.

use crate::error::{Error, Result};
use crate::numerics::gauss_legendre_on;
use crate::rng::CounterRng;
use crate::stats::{log_posterior, log_prior, LogDensity, PosteriorContext};
use nalgebra::{DMatrix, DVector};
use std::sync::OnceLock;

/// Normalization of the standard bump `exp(-1/(1-u²))` on `(-1, 1)`,
/// computed once by quadrature (value ≈ 2.25228).
fn bump_normalization() -> f64 {
    static CELL: OnceLock<f64> = OnceLock::new();
    *CELL.get_or_init(|| {
        // midpoint rule with 1e6 cells; the integrand vanishes to all
        // orders at the endpoints so this is far beyond f64 accuracy
        let n = 1_000_000;
        let h = 2.0 / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            let u = -1.0 + (i as f64 + 0.5) * h;
            total += (-1.0 / (1.0 - u * u)).exp();
        }
        1.0 / (total * h)
    })
}

/// Mollifier `φ_h(x) = h⁻¹ φ(x/h)` with `φ(u) = c·exp(-1/(1-u²))` on
/// `(-1, 1)`, zero outside, `∫φ = 1`.
pub fn mollifier(x: f64, h: f64) -> f64 {
    assert!(h > 0.0);
    let u = x / h;
    if u.abs() >= 1.0 {
        0.0
    } else {
        bump_normalization() * (-1.0 / (1.0 - u * u)).exp() / h
    }
}

/// `γ̃_η(t) = (t - 5η/8)²` for `t ≥ 5η/8`, zero below.
fn gamma_tilde(t: f64, eta: f64) -> (f64, f64) {
    let s = t - 0.625 * eta;
    if s <= 0.0 {
        (0.0, 0.0)
    } else {
        (s * s, 2.0 * s)
    }
}

/// Mollified convex tail `γ_η = φ_{η/8} ∗ γ̃_η` and its derivative, both by
/// Gauss quadrature over the intersection of the kernel support with the
/// support of `γ̃_η`.
pub fn gamma_eta(t: f64, eta: f64, conv_nodes: usize) -> (f64, f64) {
    assert!(eta > 0.0 && t >= 0.0);
    let h = eta / 8.0;
    // γ̃(t - s) vanishes for s ≥ t - 5η/8
    let upper = (t - 0.625 * eta).min(h);
    if upper <= -h {
        return (0.0, 0.0);
    }
    let (nodes, weights) = gauss_legendre_on(conv_nodes, -h, upper);
    let mut value = 0.0;
    let mut deriv = 0.0;
    for (&s, &w) in nodes.iter().zip(&weights) {
        let phi = mollifier(s, h);
        let (g, dg) = gamma_tilde(t - s, eta);
        value += w * phi * g;
        deriv += w * phi * dg;
    }
    (value, deriv)
}

/// Smooth cutoff with `α(t) = 1` on `[0, 3/4]`, `0` on `[7/8, ∞)`, strictly
/// decreasing in between; returns `(α(t), α'(t))`.
pub fn alpha_cutoff(t: f64) -> (f64, f64) {
    assert!(t >= 0.0);
    if t <= 0.75 {
        return (1.0, 0.0);
    }
    if t >= 0.875 {
        return (0.0, 0.0);
    }
    // transition S(u) = B(u)/(B(u)+B(1-u)) with B(u) = exp(-1/u),
    // reparametrized so u runs 1 -> 0 across [3/4, 7/8]
    let u = (0.875 - t) * 8.0;
    let b = (-1.0 / u).exp();
    let c = (-1.0 / (1.0 - u)).exp();
    let s = b / (b + c);
    let db = b / (u * u);
    let dc = -c / ((1.0 - u) * (1.0 - u));
    let ds = (db * c - b * dc) / ((b + c) * (b + c));
    (s, -8.0 * ds)
}

/// Parameters of the surrogate construction.
#[derive(Debug, Clone)]
pub struct SurrogateSpec {
    /// Cutoff radius.
    pub eta: f64,
    /// Tail stiffness `K`.
    pub k_big: f64,
    /// Base point; the chain initializer.
    pub theta_init: DVector<f64>,
    /// Gauss nodes for the mollification integral.
    pub conv_nodes: usize,
}

impl SurrogateSpec {
    /// Default parameters `η = D⁻²/ln N`, `K = ceil(N ln N / η²)`.
    pub fn with_defaults(dim: usize, n_data: usize, theta_init: DVector<f64>) -> Self {
        let eta = default_eta(dim, n_data);
        SurrogateSpec {
            eta,
            k_big: (n_data as f64 * (n_data as f64).ln() / (eta * eta)).ceil(),
            theta_init,
            conv_nodes: 64,
        }
    }

    /// The stiffness floor `N ln N / η²` (with `κ₁ = 0`); values of `K`
    /// below it void the log-concavity guarantee.
    pub fn k_floor(n_data: usize, eta: f64) -> f64 {
        n_data as f64 * (n_data as f64).ln() / (eta * eta)
    }

    /// Warning when `K` sits below the floor; not an error.
    pub fn stiffness_warning(&self, n_data: usize) -> Option<String> {
        let floor = Self::k_floor(n_data, self.eta);
        (self.k_big < floor).then(|| {
            format!(
                "surrogate stiffness K = {:.3e} below the floor N ln N / eta^2 = {floor:.3e}",
                self.k_big
            )
        })
    }
}

pub fn default_eta(dim: usize, n_data: usize) -> f64 {
    1.0 / ((dim as f64).powi(2) * (n_data as f64).ln())
}

/// Surrogate log-posterior
/// `α(r/η)·ℓ_N(θ) - K·γ_η(r) + log π(θ)` with `r = ‖θ - θ_init‖`, and its
/// gradient. For `r ≤ η/2` both modifications vanish identically and the
/// call is routed through [`log_posterior`] itself, so values and
/// gradients in the warm region agree bit for bit.
pub fn surrogate_logpost(
    theta: &DVector<f64>,
    ctx: &PosteriorContext,
    spec: &SurrogateSpec,
) -> Result<(f64, DVector<f64>)> {
    if theta.len() != spec.theta_init.len() {
        return Err(Error::dim("theta and theta_init lengths differ"));
    }
    let coeffs = ctx.coefficients(theta)?;
    let offset = theta - &spec.theta_init;
    let r = offset.norm();
    if r <= 0.5 * spec.eta {
        return log_posterior(&coeffs, ctx);
    }
    let (like, like_grad) = crate::stats::log_likelihood(&coeffs, ctx)?;
    let (pv, pg) = log_prior(&coeffs, &ctx.prior);
    let (a, da) = alpha_cutoff(r / spec.eta);
    let (g, dg) = gamma_eta(r, spec.eta, spec.conv_nodes);
    let value = a * like - spec.k_big * g + pv;
    // radial chain rule; r > 0 here so the direction is well defined
    let radial = like * da / spec.eta - spec.k_big * dg;
    let grad = like_grad * a + &offset * (radial / r) + pg;
    Ok((value, grad))
}

/// Surrogate as a [`LogDensity`].
pub struct SurrogateDensity<'a> {
    pub ctx: &'a PosteriorContext,
    pub spec: &'a SurrogateSpec,
}

impl LogDensity for SurrogateDensity<'_> {
    fn value_and_grad(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        surrogate_logpost(theta, self.ctx, self.spec)
    }
}

/// Result of a log-concavity probe.
#[derive(Debug, Clone)]
pub struct ConcavityProbe {
    /// Smallest eigenvalue of the finite-difference Hessian of
    /// `-log π̃` over all probe points.
    pub min_eigenvalue: f64,
    /// Probe point attaining the minimum.
    pub worst_point: DVector<f64>,
}

/// Probes log-concavity of the surrogate empirically: at `n_points`
/// stratified probe locations (near `θ_init`, on the shell at radius `~η`,
/// and in the far tail) the Hessian of `-log π̃` is formed by central
/// differences of the gradient and its smallest eigenvalue recorded.
pub fn logconcavity_probe(
    ctx: &PosteriorContext,
    spec: &SurrogateSpec,
    n_points: usize,
    seed: u64,
) -> Result<ConcavityProbe> {
    if n_points == 0 {
        return Err(Error::invalid("need at least one probe point"));
    }
    let dim = spec.theta_init.len();
    let rng = CounterRng::new(seed);
    let fd = 1e-3 * spec.eta;
    let mut min_eig = f64::INFINITY;
    let mut worst = spec.theta_init.clone();
    for q in 0..n_points {
        // unit direction from normalized gaussians
        let mut u = DVector::from_iterator(
            dim,
            (0..dim).map(|j| rng.standard_normal(q as u64, j as u64)),
        );
        let un = u.norm();
        if un == 0.0 {
            continue;
        }
        u /= un;
        let radius = match q % 3 {
            0 => 0.5 * spec.eta * rng.uniform(1000 + q as u64, 0),
            1 => spec.eta * (0.9 + 0.2 * rng.uniform(1000 + q as u64, 0)),
            _ => spec.eta * (2.0 + 6.0 * rng.uniform(1000 + q as u64, 0)),
        };
        let probe = &spec.theta_init + u * radius;
        let mut hess = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            let mut up = probe.clone();
            up[i] += fd;
            let mut dn = probe.clone();
            dn[i] -= fd;
            let (_, gp) = surrogate_logpost(&up, ctx, spec)?;
            let (_, gn) = surrogate_logpost(&dn, ctx, spec)?;
            let col = (gn - gp) / (2.0 * fd); // minus: Hessian of -log
            hess.column_mut(i).copy_from(&col);
        }
        // symmetrize before the eigensolve
        let sym = (&hess + hess.transpose()) * 0.5;
        let eig = sym.symmetric_eigenvalues();
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if lo < min_eig {
            min_eig = lo;
            worst = probe;
        }
    }
    Ok(ConcavityProbe {
        min_eigenvalue: min_eig,
        worst_point: worst,
    })
}
