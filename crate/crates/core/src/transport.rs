//! Transport ODE solvers along chords: scattering data `C_Φ`, integrating
//! factors, the attenuated X-ray transform, Gateaux derivatives of
//! `Φ ↦ C_Φ`, and the pseudolinearisation residual.
//!
//! Along a chord `γ(t) = x + tv`, `t ∈ [0, τ]`, the propagator `R` solves
//! `R' + Φ(γ(t)) R = 0` with end value `R(τ) = I`; the scattering datum is
//! `C_Φ = R(0)`. Every transform in this module reduces to the weighted
//! chord integral
//!
//! ```text
//! I_att g = R_att(0) ∫₀^τ R_att(t)^{-1} g(γ(t)) dt,
//! ```
//!
//! where the attenuation acts on `m×m` values by left multiplication,
//! conjugation (`Ξ = [Φ,·]`), or a two-sided product `A ↦ ΦA - AΨ`. The
//! propagator of the conjugation/two-sided action factors through the
//! plain `m×m` propagators (`R_Ξ(t) A = R_Φ(t) A R_Ψ(t)^{-1}`), so nothing
//! is ever flattened to `m²×m²`.
//!
//! One propagator sweep per chord serves `C_Φ`, all `D` basis derivatives,
//! and any second derivative; this is the module's central cost decision:
//! a gradient costs one ODE solve plus `D` quadrature accumulations per
//! data point, not `D` ODE solves.

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, Chord};
use crate::lie::{CoefficientField, MatrixField};
use crate::numerics::{gauss_legendre_on, mat_axpy, polar_orthogonalize};
use nalgebra::{DMatrix, Vector2};
use num_complex::Complex64;

/// Fixed-step RK4 options for chord solves.
#[derive(Debug, Clone)]
pub struct OdeOptions {
    /// Maximal RK4 step as a fraction of the chord length.
    pub step_fraction: f64,
    /// Absolute floor on the step; short chords do not get shorter steps.
    pub step_floor: f64,
    /// Project the propagator back to the orthogonal group every 32 steps.
    pub reorthogonalize: bool,
    /// Gauss nodes per chord for the transform quadratures.
    pub chord_nodes: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            step_fraction: 1e-3,
            step_floor: 1e-4,
            reorthogonalize: false,
            chord_nodes: 48,
        }
    }
}

impl OdeOptions {
    pub fn max_step(&self, tau: f64) -> f64 {
        (self.step_fraction * tau).max(self.step_floor)
    }
}

/// Scattering datum `C_Φ(x, v) ∈ SO(m)` at one boundary point.
#[derive(Debug, Clone)]
pub struct ScatteringDatum {
    pub point: BoundaryPoint,
    pub value: DMatrix<f64>,
}

struct StepBufs {
    k1: DMatrix<f64>,
    k2: DMatrix<f64>,
    k3: DMatrix<f64>,
    k4: DMatrix<f64>,
    stage: DMatrix<f64>,
}

impl StepBufs {
    fn new(m: usize) -> Self {
        StepBufs {
            k1: DMatrix::zeros(m, m),
            k2: DMatrix::zeros(m, m),
            k3: DMatrix::zeros(m, m),
            k4: DMatrix::zeros(m, m),
            stage: DMatrix::zeros(m, m),
        }
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction) with a
/// fixed RK4 step of magnitude at most `max_step`.
#[allow(clippy::too_many_arguments)]
fn rk4_to<F>(
    f: &mut F,
    t0: f64,
    t1: f64,
    y: &mut DMatrix<f64>,
    max_step: f64,
    bufs: &mut StepBufs,
    step_count: &mut u64,
    reorthogonalize: bool,
) where
    F: FnMut(f64, &DMatrix<f64>, &mut DMatrix<f64>),
{
    let len = (t1 - t0).abs();
    if len == 0.0 {
        return;
    }
    let n = (len / max_step).ceil().max(1.0) as usize;
    let h = (t1 - t0) / n as f64;
    for i in 0..n {
        let t = t0 + i as f64 * h;
        f(t, y, &mut bufs.k1);
        bufs.stage.copy_from(y);
        mat_axpy(&mut bufs.stage, 0.5 * h, &bufs.k1);
        f(t + 0.5 * h, &bufs.stage, &mut bufs.k2);
        bufs.stage.copy_from(y);
        mat_axpy(&mut bufs.stage, 0.5 * h, &bufs.k2);
        f(t + 0.5 * h, &bufs.stage, &mut bufs.k3);
        bufs.stage.copy_from(y);
        mat_axpy(&mut bufs.stage, h, &bufs.k3);
        f(t + h, &bufs.stage, &mut bufs.k4);
        mat_axpy(y, h / 6.0, &bufs.k1);
        mat_axpy(y, h / 3.0, &bufs.k2);
        mat_axpy(y, h / 3.0, &bufs.k3);
        mat_axpy(y, h / 6.0, &bufs.k4);
        *step_count += 1;
        if reorthogonalize && *step_count % 32 == 0 {
            polar_orthogonalize(y);
        }
    }
}

/// The propagator `R_Φ` of one chord, sampled at the chord's Gauss nodes
/// and at the influx endpoint (`R(0) = C_Φ`). Glancing chords carry no
/// interior nodes and an identity endpoint.
#[derive(Debug, Clone)]
pub struct ChordPropagator {
    pub chord: Chord,
    /// Gauss nodes in `(0, τ)`, ascending.
    pub nodes: Vec<f64>,
    /// Gauss weights for `∫₀^τ · dt`.
    pub weights: Vec<f64>,
    r: Vec<DMatrix<f64>>,
    r_inv: Vec<DMatrix<f64>>,
    pub r0: DMatrix<f64>,
    pub r0_inv: DMatrix<f64>,
}

impl ChordPropagator {
    pub fn node_r(&self, j: usize) -> &DMatrix<f64> {
        &self.r[j]
    }

    pub fn node_r_inv(&self, j: usize) -> &DMatrix<f64> {
        &self.r_inv[j]
    }

    /// `R(0) Σ_j w_j R(t_j)^{-1} G_j R(t_j)` for node samples `G_j`; this is
    /// `I_Ξ(g)·C_Φ` when `G_j = g(γ(t_j))`.
    pub fn conjugated_integral<G>(&self, mut g_at: G) -> DMatrix<f64>
    where
        G: FnMut(usize, Vector2<f64>) -> DMatrix<f64>,
    {
        let m = self.r0.nrows();
        let mut acc = DMatrix::zeros(m, m);
        for (j, (&t, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let gj = g_at(j, self.chord.point_unchecked(t));
            acc += (&self.r_inv[j] * gj * &self.r[j]) * w;
        }
        &self.r0 * acc
    }
}

/// Solves `(X + Φ)R = 0`, `R(τ) = I` along the chord through `p` and
/// samples `R`, `R^{-1}` at the chord's Gauss nodes.
pub fn integrating_factor(
    field: &dyn MatrixField,
    p: &BoundaryPoint,
    opts: &OdeOptions,
) -> Result<ChordPropagator> {
    let chord = Chord::from_boundary(p);
    let m = field.size();
    let eye = DMatrix::identity(m, m);
    if chord.is_glancing() {
        return Ok(ChordPropagator {
            chord,
            nodes: Vec::new(),
            weights: Vec::new(),
            r: Vec::new(),
            r_inv: Vec::new(),
            r0: eye.clone(),
            r0_inv: eye,
        });
    }
    let (nodes, weights) = gauss_legendre_on(opts.chord_nodes, 0.0, chord.tau);
    let max_step = opts.max_step(chord.tau);

    let mut phi = DMatrix::zeros(m, m);
    let chord_for_f = chord.clone();
    let mut f = move |t: f64, y: &DMatrix<f64>, out: &mut DMatrix<f64>| {
        field.eval_into(chord_for_f.point_unchecked(t), &mut phi);
        out.gemm(-1.0, &phi, y, 0.0);
    };

    let mut bufs = StepBufs::new(m);
    let mut steps = 0u64;
    let mut r = eye.clone();
    let mut r_samples = vec![DMatrix::zeros(0, 0); nodes.len()];
    let mut t_cur = chord.tau;
    for j in (0..nodes.len()).rev() {
        rk4_to(
            &mut f,
            t_cur,
            nodes[j],
            &mut r,
            max_step,
            &mut bufs,
            &mut steps,
            opts.reorthogonalize,
        );
        t_cur = nodes[j];
        r_samples[j] = r.clone();
    }
    rk4_to(
        &mut f,
        t_cur,
        0.0,
        &mut r,
        max_step,
        &mut bufs,
        &mut steps,
        opts.reorthogonalize,
    );

    if !r.iter().all(|x| x.is_finite()) {
        return Err(Error::numeric(format!(
            "propagator diverged on chord (alpha={}, beta={}); check the field for non-finite values",
            p.alpha(),
            p.beta()
        )));
    }
    let mut r_inv = Vec::with_capacity(r_samples.len());
    for s in &r_samples {
        r_inv.push(s.clone().try_inverse().ok_or_else(|| {
            Error::numeric("propagator sample is singular; attenuation too stiff for the step size")
        })?);
    }
    let r0_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::numeric("endpoint propagator is singular"))?;
    Ok(ChordPropagator {
        chord,
        nodes,
        weights,
        r: r_samples,
        r_inv,
        r0: r,
        r0_inv,
    })
}

/// Scattering datum `C_Φ(x, v) = R_Φ(0)` by backward RK4 from the exit
/// point. Glancing chords return the identity.
pub fn scattering_data(
    field: &dyn MatrixField,
    p: &BoundaryPoint,
    opts: &OdeOptions,
) -> Result<ScatteringDatum> {
    let chord = Chord::from_boundary(p);
    let m = field.size();
    if chord.is_glancing() {
        return Ok(ScatteringDatum {
            point: *p,
            value: DMatrix::identity(m, m),
        });
    }
    // single uniform segment over [0, τ]; no node recording needed here
    let mut phi = DMatrix::zeros(m, m);
    let chord_for_f = chord.clone();
    let mut f = move |t: f64, y: &DMatrix<f64>, out: &mut DMatrix<f64>| {
        field.eval_into(chord_for_f.point_unchecked(t), &mut phi);
        out.gemm(-1.0, &phi, y, 0.0);
    };
    let mut bufs = StepBufs::new(m);
    let mut steps = 0u64;
    let mut r = DMatrix::identity(m, m);
    rk4_to(
        &mut f,
        chord.tau,
        0.0,
        &mut r,
        opts.max_step(chord.tau),
        &mut bufs,
        &mut steps,
        opts.reorthogonalize,
    );
    if !r.iter().all(|x| x.is_finite()) {
        return Err(Error::numeric(format!(
            "scattering solve diverged on chord (alpha={}, beta={}); check the field for non-finite values",
            p.alpha(),
            p.beta()
        )));
    }
    Ok(ScatteringDatum { point: *p, value: r })
}

/// Attenuation acting on matrix-valued integrands.
pub enum Attenuation<'a> {
    /// No attenuation; plain matrix-valued line integral.
    None { size: usize },
    /// `A ↦ Φ(x)·A`.
    Left(&'a dyn MatrixField),
    /// `A ↦ [Φ(x), A]`.
    Commutator(&'a dyn MatrixField),
    /// `A ↦ Φ(x)A - AΨ(x)`.
    TwoSided(&'a dyn MatrixField, &'a dyn MatrixField),
}

/// Attenuated X-ray transform `I_att g (x, v)` of a matrix-valued
/// integrand along the chord through `p`.
pub fn attenuated_xray(
    att: &Attenuation,
    g: &dyn Fn(Vector2<f64>) -> DMatrix<f64>,
    p: &BoundaryPoint,
    opts: &OdeOptions,
) -> Result<DMatrix<f64>> {
    match att {
        Attenuation::None { size } => {
            let chord = Chord::from_boundary(p);
            let mut acc = DMatrix::zeros(*size, *size);
            if chord.is_glancing() {
                return Ok(acc);
            }
            let (nodes, weights) = gauss_legendre_on(opts.chord_nodes, 0.0, chord.tau);
            for (&t, &w) in nodes.iter().zip(&weights) {
                acc += g(chord.point_unchecked(t)) * w;
            }
            Ok(acc)
        }
        Attenuation::Left(phi) => {
            let prop = integrating_factor(*phi, p, opts)?;
            let m = phi.size();
            let mut acc = DMatrix::zeros(m, m);
            for (j, (&t, &w)) in prop.nodes.iter().zip(&prop.weights).enumerate() {
                acc += (prop.node_r_inv(j) * g(prop.chord.point_unchecked(t))) * w;
            }
            Ok(&prop.r0 * acc)
        }
        Attenuation::Commutator(phi) => {
            let prop = integrating_factor(*phi, p, opts)?;
            let inner = prop.conjugated_integral(|_, x| g(x));
            Ok(inner * &prop.r0_inv)
        }
        Attenuation::TwoSided(phi, psi) => {
            let pa = integrating_factor(*phi, p, opts)?;
            let pb = integrating_factor(*psi, p, opts)?;
            let m = phi.size();
            let mut acc = DMatrix::zeros(m, m);
            for (j, (&t, &w)) in pa.nodes.iter().zip(&pa.weights).enumerate() {
                acc += (pa.node_r_inv(j) * g(pa.chord.point_unchecked(t)) * pb.node_r(j)) * w;
            }
            Ok(&pa.r0 * acc * &pb.r0_inv)
        }
    }
}

/// Complex scalar line integral `∫₀^τ f(γ(t)) dt` (the unattenuated
/// transform `I₀` on scalars).
pub fn line_integral_complex(
    f: &dyn Fn(Vector2<f64>) -> Complex64,
    p: &BoundaryPoint,
    n_nodes: usize,
) -> Complex64 {
    let chord = Chord::from_boundary(p);
    if chord.is_glancing() {
        return Complex64::new(0.0, 0.0);
    }
    let (nodes, weights) = gauss_legendre_on(n_nodes, 0.0, chord.tau);
    let mut acc = Complex64::new(0.0, 0.0);
    for (&t, &w) in nodes.iter().zip(&weights) {
        acc += f(chord.point_unchecked(t)) * w;
    }
    acc
}

/// First Gateaux derivative `Ċ_Φ[h] = I_Ξ h · C_Φ` with `Ξ = [Φ, ·]`.
pub fn first_derivative(
    phi: &dyn MatrixField,
    h: &dyn MatrixField,
    p: &BoundaryPoint,
    opts: &OdeOptions,
) -> Result<DMatrix<f64>> {
    if phi.size() != h.size() {
        return Err(Error::dim("field sizes differ"));
    }
    let prop = integrating_factor(phi, p, opts)?;
    let mut hbuf = DMatrix::zeros(h.size(), h.size());
    Ok(prop.conjugated_integral(|_, x| {
        h.eval_into(x, &mut hbuf);
        hbuf.clone()
    }))
}

/// Derivative of the chord's scattering datum in every basis direction
/// `ê_ℓ A_i` of `E_D`, computed from one propagator sweep. Column order is
/// the coefficient layout (ℓ-major, so(m)-component-minor); columns agree
/// with [`first_derivative`] applied per direction.
pub fn all_basis_derivatives(
    theta: &CoefficientField,
    p: &BoundaryPoint,
    opts: &OdeOptions,
) -> Result<Vec<DMatrix<f64>>> {
    Ok(ray_with_derivatives(theta, p, opts)?.derivatives)
}

/// Scattering datum plus all basis derivatives for one chord.
pub struct RaySweep {
    pub value: DMatrix<f64>,
    pub derivatives: Vec<DMatrix<f64>>,
}

pub fn ray_with_derivatives(
    theta: &CoefficientField,
    p: &BoundaryPoint,
    opts: &OdeOptions,
) -> Result<RaySweep> {
    let m = theta.size();
    let dm = theta.skew.dim();
    let n_ell = theta.coeffs.max_ell() + 1;
    let dim = n_ell * dm;
    let prop = integrating_factor(theta, p, opts)?;
    let mut acc = vec![DMatrix::<f64>::zeros(m, m); dim];
    let mut evals = vec![0.0; n_ell];
    for (j, (&t, &w)) in prop.nodes.iter().zip(&prop.weights).enumerate() {
        let x = prop.chord.point_unchecked(t);
        theta.basis.eval_all(x, &mut evals);
        for (i, a) in theta.skew.mats().iter().enumerate() {
            // B = R^{-1} A_i R shared across all ℓ at this node
            let b = prop.node_r_inv(j) * a * prop.node_r(j);
            for (ell, &e) in evals.iter().enumerate() {
                mat_axpy(&mut acc[ell * dm + i], w * e, &b);
            }
        }
    }
    let derivatives = acc.into_iter().map(|a| &prop.r0 * a).collect();
    Ok(RaySweep {
        value: prop.r0,
        derivatives,
    })
}

/// Second Gateaux derivative `C̈_Φ[h] = I_Ξ[h V_h] · C_Φ`, where `V_h`
/// solves the auxiliary transport problem `(X + Ξ)V = -2h`, `V(τ) = 0`.
pub fn second_derivative(
    phi: &dyn MatrixField,
    h: &dyn MatrixField,
    p: &BoundaryPoint,
    opts: &OdeOptions,
) -> Result<DMatrix<f64>> {
    if phi.size() != h.size() {
        return Err(Error::dim("field sizes differ"));
    }
    let prop = integrating_factor(phi, p, opts)?;
    let v = auxiliary_v(phi, h, &prop, opts)?;
    let mut hbuf = DMatrix::zeros(h.size(), h.size());
    Ok(prop.conjugated_integral(|j, x| {
        h.eval_into(x, &mut hbuf);
        &hbuf * &v[j]
    }))
}

/// Samples of `V_h` at the propagator's Gauss nodes.
pub(crate) fn auxiliary_v(
    phi: &dyn MatrixField,
    h: &dyn MatrixField,
    prop: &ChordPropagator,
    opts: &OdeOptions,
) -> Result<Vec<DMatrix<f64>>> {
    let m = phi.size();
    let chord = prop.chord.clone();
    let max_step = opts.max_step(chord.tau);
    let mut phibuf = DMatrix::zeros(m, m);
    let mut hbuf = DMatrix::zeros(m, m);
    let chord_for_f = chord.clone();
    let mut f = move |t: f64, y: &DMatrix<f64>, out: &mut DMatrix<f64>| {
        let x = chord_for_f.point_unchecked(t);
        phi.eval_into(x, &mut phibuf);
        h.eval_into(x, &mut hbuf);
        // V' = -[Φ, V] - 2h
        out.gemm(-1.0, &phibuf, y, 0.0);
        out.gemm(1.0, y, &phibuf, 1.0);
        mat_axpy(out, -2.0, &hbuf);
    };
    let mut bufs = StepBufs::new(m);
    let mut steps = 0u64;
    let mut v = DMatrix::zeros(m, m);
    let mut samples = vec![DMatrix::zeros(0, 0); prop.nodes.len()];
    let mut t_cur = chord.tau;
    for j in (0..prop.nodes.len()).rev() {
        rk4_to(
            &mut f,
            t_cur,
            prop.nodes[j],
            &mut v,
            max_step,
            &mut bufs,
            &mut steps,
            false,
        );
        t_cur = prop.nodes[j];
        samples[j] = v.clone();
    }
    if samples.iter().any(|s| !s.iter().all(|x| x.is_finite())) {
        return Err(Error::numeric("auxiliary transport solution diverged"));
    }
    Ok(samples)
}

/// Frobenius norm of `C_Φ C_Ψ^{-1} - I - I_{Ξ(Φ,Ψ)}(Φ - Ψ)` at one chord;
/// the identity is exact, so the residual measures solver error.
pub fn pseudolinearisation_residual(
    phi: &dyn MatrixField,
    psi: &dyn MatrixField,
    p: &BoundaryPoint,
    opts: &OdeOptions,
) -> Result<f64> {
    let m = phi.size();
    if psi.size() != m {
        return Err(Error::dim("field sizes differ"));
    }
    let pa = integrating_factor(phi, p, opts)?;
    let pb = integrating_factor(psi, p, opts)?;
    let lhs = &pa.r0 * &pb.r0_inv - DMatrix::identity(m, m);
    let mut fa = DMatrix::zeros(m, m);
    let mut fb = DMatrix::zeros(m, m);
    let mut acc = DMatrix::zeros(m, m);
    for (j, (&t, &w)) in pa.nodes.iter().zip(&pa.weights).enumerate() {
        let x = pa.chord.point_unchecked(t);
        phi.eval_into(x, &mut fa);
        psi.eval_into(x, &mut fb);
        fa -= &fb;
        acc += (pa.node_r_inv(j) * &fa * pb.node_r(j)) * w;
    }
    let rhs = &pa.r0 * acc * &pb.r0_inv;
    Ok((lhs - rhs).norm())
}
