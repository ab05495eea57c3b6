//! Spectral analysis of the linearised transform: the discretized gradient
//! operator on `E_D`, singular-value stability scans, the SVD identities of
//! the unattenuated transform, expected-Hessian curvature, and the
//! normal-operator quadratic form.
//!
//! Boundary norms in this module use the area form `dα dβ` — the
//! convention in which the singular values of the unattenuated transform
//! are `sqrt(4π/(n+1))`. The probability measure `λ = dα dβ/(2π²)` used by
//! the statistical model differs by the constant factor `2π²`;
//! [`expected_hessian_form`] (an expectation over `λ`) is the one quantity
//! reported in the probability convention, and the assembled curvature
//! matrices carry the `2π²` factor so that their spectra line up with the
//! gradient matrix.

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, BoundaryQuadrature, DiskQuadrature, BOUNDARY_AREA};
use crate::lie::{
    project_to_coefficients, CoefficientField, CoefficientVector, MatrixField,
};
use crate::rng::CounterRng;
use crate::transport::{
    integrating_factor, line_integral_complex, ray_with_derivatives, scattering_data,
    OdeOptions,
};
use crate::zernike::{
    boundary_psi, pair_to_single, single_to_pair, sobolev_norm, zernike_norm, PsiSign, RealBasis,
    ZernikeIndex,
};
use nalgebra::{DMatrix, DVector, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

/// Discretization of the gradient operator `h ↦ Ċ_θ[h]` on `E_D`: an
/// `M×D` matrix whose rows are `sqrt(2π² w_p)` times the flattened entries
/// of `Ċ_θ[b_j]` at the boundary quadrature nodes, so `‖A h‖₂²` is the
/// quadrature of the squared `dα dβ` norm of `Ċ_θ[h]`.
#[derive(Debug, Clone)]
pub struct GradientMatrix {
    pub a: DMatrix<f64>,
    pub dim: usize,
    pub n_nodes: usize,
    pub m: usize,
}

impl GradientMatrix {
    /// Smallest singular value by dense SVD.
    pub fn sigma_min(&self) -> f64 {
        self.a
            .clone()
            .singular_values()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Assembles the gradient matrix at `θ` over a boundary rule.
pub fn gradient_matrix(
    theta: &CoefficientField,
    rule: &BoundaryQuadrature,
    opts: &OdeOptions,
) -> Result<GradientMatrix> {
    let m = theta.size();
    let dim = theta.coeffs.dim();
    let rows_per_node = m * m;
    let blocks: Vec<Result<Vec<f64>>> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(p, w)| {
            let sweep = ray_with_derivatives(theta, p, opts)?;
            let scale = (BOUNDARY_AREA * w).sqrt();
            let mut block = vec![0.0; rows_per_node * dim];
            for (j, col) in sweep.derivatives.iter().enumerate() {
                for (e, &v) in col.iter().enumerate() {
                    block[e * dim + j] = scale * v;
                }
            }
            Ok(block)
        })
        .collect();
    let mut a = DMatrix::zeros(rule.nodes.len() * rows_per_node, dim);
    for (q, block) in blocks.into_iter().enumerate() {
        let block = block?;
        for e in 0..rows_per_node {
            for j in 0..dim {
                a[(q * rows_per_node + e, j)] = block[e * dim + j];
            }
        }
    }
    Ok(GradientMatrix {
        a,
        dim,
        n_nodes: rule.nodes.len(),
        m,
    })
}

/// One row of a stability scan.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub dim: usize,
    pub sigma_min_sq: f64,
    /// `σ_min² · √D`, the quantity whose flatness witnesses the
    /// `D^{-1/2}` gradient-stability scaling.
    pub normalized: f64,
}

/// Scans `σ_min(A)²·√D` at `θ = proj_{E_D}(truth)` over a list of
/// dimensions.
pub fn stability_scan(
    truth: &dyn MatrixField,
    d_list: &[usize],
    disk_rule: &DiskQuadrature,
    boundary_rule: &BoundaryQuadrature,
    opts: &OdeOptions,
) -> Result<Vec<ScanRow>> {
    let m = truth.size();
    let dm = m * (m - 1) / 2;
    let max_dim = d_list.iter().copied().max().unwrap_or(0);
    if max_dim == 0 {
        return Err(Error::invalid("empty dimension list"));
    }
    let basis = Arc::new(RealBasis::new(max_dim.div_ceil(dm)));
    let mut rows = Vec::with_capacity(d_list.len());
    for &dim in d_list {
        if dim == 0 || dim % dm != 0 {
            return Err(Error::dim(format!("dimension {dim} not a multiple of d_m")));
        }
        let proj = project_to_coefficients(truth, dim, &basis, disk_rule)?;
        let field = CoefficientField::new(proj, basis.clone())?;
        let a = gradient_matrix(&field, boundary_rule, opts)?;
        let smin = a.sigma_min();
        rows.push(ScanRow {
            dim,
            sigma_min_sq: smin * smin,
            normalized: smin * smin * (dim as f64).sqrt(),
        });
    }
    Ok(rows)
}

/// Deviations of the computed transform from the SVD identity
/// `I₀ Ẑ_nk = sqrt(4π/(n+1)) ψ̂⁺_nk` for all `0 ≤ k ≤ n ≤ n_max`.
#[derive(Debug, Clone)]
pub struct SvdCheck {
    /// Worst absolute deviation over all norm, diagonal and cross checks.
    pub worst: f64,
    /// Per-index `(n, k, ‖I₀Ẑ‖ deviation, |<I₀Ẑ, ψ̂⁺>| deviation)`.
    pub rows: Vec<(u32, u32, f64, f64)>,
}

/// Computes `I₀ Ẑ_nk` on the boundary grid by line integrals and checks
/// the norms and inner products against the closed-form singular values.
pub fn svd_identity_check(
    n_max: u32,
    rule: &BoundaryQuadrature,
    opts: &OdeOptions,
) -> Result<SvdCheck> {
    let count = pair_to_single(n_max, n_max) + 1;
    let table = crate::zernike::ZernikeTable::new(n_max);
    let n_nodes = rule.nodes.len();

    // transform values and normalized psi grids, one row per (n,k)
    let mut transform = vec![vec![Complex64::new(0.0, 0.0); n_nodes]; count];
    let mut psi_hat = vec![vec![Complex64::new(0.0, 0.0); n_nodes]; count];
    for ell in 0..count {
        let (n, k) = single_to_pair(ell);
        let idx = ZernikeIndex { n, k };
        let znorm = zernike_norm(idx);
        let grid: Vec<Complex64> = rule
            .nodes
            .par_iter()
            .map(|p| {
                line_integral_complex(
                    &|x| table.eval(idx, Complex64::new(x.x, x.y)) / znorm,
                    p,
                    opts.chord_nodes,
                )
            })
            .collect();
        transform[ell] = grid;
        let raw: Vec<Complex64> = rule
            .nodes
            .iter()
            .map(|p| boundary_psi(n, k as i64, PsiSign::Plus, p))
            .collect();
        let norm = area_norm(&raw, rule).sqrt();
        psi_hat[ell] = raw.into_iter().map(|v| v / norm).collect();
    }

    let mut worst: f64 = 0.0;
    let mut rows = Vec::with_capacity(count);
    for ell in 0..count {
        let (n, k) = single_to_pair(ell);
        let sigma = (4.0 * PI / (n as f64 + 1.0)).sqrt();
        let norm_dev = (area_norm(&transform[ell], rule).sqrt() - sigma).abs();
        let diag_dev = (area_inner(&transform[ell], &psi_hat[ell], rule).norm() - sigma).abs();
        worst = worst.max(norm_dev).max(diag_dev);
        for other in 0..count {
            if other != ell {
                let cross = area_inner(&transform[ell], &psi_hat[other], rule).norm();
                worst = worst.max(cross);
            }
        }
        rows.push((n, k, norm_dev, diag_dev));
    }
    Ok(SvdCheck { worst, rows })
}

fn area_norm(values: &[Complex64], rule: &BoundaryQuadrature) -> f64 {
    values
        .iter()
        .zip(&rule.weights)
        .map(|(v, w)| w * BOUNDARY_AREA * v.norm_sqr())
        .sum()
}

fn area_inner(a: &[Complex64], b: &[Complex64], rule: &BoundaryQuadrature) -> Complex64 {
    a.iter()
        .zip(b)
        .zip(&rule.weights)
        .map(|((x, y), w)| *w * BOUNDARY_AREA * x * y.conj())
        .sum()
}

/// `-E_{Φ★} hᵀ ∇²ℓ(θ) h = ‖Ċ_θ[h]‖²_{L²_λ} - <C_{Φ★} - C_θ, C̈_θ[h]>_{L²_λ}`
/// by boundary quadrature (probability measure, matching the expectation
/// over `(X, V) ~ λ`).
pub fn expected_hessian_form(
    truth: &dyn MatrixField,
    theta: &CoefficientField,
    h: &CoefficientVector,
    rule: &BoundaryQuadrature,
    opts: &OdeOptions,
) -> Result<f64> {
    let h_field = CoefficientField::new(h.clone(), theta.basis.clone())?;
    let terms: Vec<Result<f64>> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(p, w)| {
            let prop = integrating_factor(theta, p, opts)?;
            let mut hbuf = DMatrix::zeros(theta.size(), theta.size());
            let cdot = prop.conjugated_integral(|_, x| {
                h_field.eval_into(x, &mut hbuf);
                hbuf.clone()
            });
            let v = crate::transport::auxiliary_v(theta, &h_field, &prop, opts)?;
            let cddot = prop.conjugated_integral(|j, x| {
                h_field.eval_into(x, &mut hbuf);
                &hbuf * &v[j]
            });
            let cstar = scattering_data(truth, p, opts)?.value;
            let delta = cstar - &prop.r0;
            Ok(w * (cdot.norm_squared() - delta.dot(&cddot)))
        })
        .collect();
    let mut vals = Vec::with_capacity(terms.len());
    for t in terms {
        vals.push(t?);
    }
    Ok(crate::numerics::pairwise_sum(&vals))
}

/// Assembles the full `D×D` expected-Hessian quadratic form columnwise, in
/// the area-form scaling (`2π²` times the expectation), so that at
/// `Φ = Φ★` its spectrum equals that of `AᵀA` from [`gradient_matrix`].
pub fn expected_hessian_matrix(
    truth: &dyn MatrixField,
    theta: &CoefficientField,
    rule: &BoundaryQuadrature,
    opts: &OdeOptions,
) -> Result<DMatrix<f64>> {
    let m = theta.size();
    let dm = theta.skew.dim();
    let n_ell = theta.coeffs.max_ell() + 1;
    let dim = n_ell * dm;
    let per_node: Vec<Result<DMatrix<f64>>> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(p, w)| {
            let sweep = ray_with_derivatives(theta, p, opts)?;
            let prop = integrating_factor(theta, p, opts)?;
            let cstar = scattering_data(truth, p, opts)?.value;
            let delta = &cstar - &prop.r0;
            let g = prop.nodes.len();

            // basis samples along the chord
            let mut evals = vec![vec![0.0; n_ell]; g];
            for (q, &t) in prop.nodes.iter().enumerate() {
                theta
                    .basis
                    .eval_all(prop.chord.point_unchecked(t), &mut evals[q]);
            }

            // V_j for all D directions in one batched backward solve
            let vs = batched_basis_v(theta, &prop, opts)?;

            // T_q = (R0 R_q^{-1})^T Δ R_q^T turns <Δ, R0 R^{-1} G R> into <G, T_q>
            let mut t_mats = Vec::with_capacity(g);
            for q in 0..g {
                let left = &prop.r0 * prop.node_r_inv(q);
                t_mats.push(left.transpose() * &delta * prop.node_r(q).transpose());
            }

            // S[a][j][q] = <A_a V_j(q), T_q>
            let mut s = vec![vec![vec![0.0; g]; dim]; dm];
            for q in 0..g {
                for j in 0..dim {
                    for (a_idx, a) in theta.skew.mats().iter().enumerate() {
                        s[a_idx][j][q] = (a * &vs[j][q]).dot(&t_mats[q]);
                    }
                }
            }

            let mut h = DMatrix::zeros(dim, dim);
            for i in 0..dim {
                let (ell_i, a_i) = (i / dm, i % dm);
                for j in i..dim {
                    let (ell_j, a_j) = (j / dm, j % dm);
                    let grad_term = sweep.derivatives[i].dot(&sweep.derivatives[j]);
                    let mut ddot = 0.0;
                    for q in 0..g {
                        ddot += prop.weights[q]
                            * 0.5
                            * (evals[q][ell_i] * s[a_i][j][q] + evals[q][ell_j] * s[a_j][i][q]);
                    }
                    let val = w * BOUNDARY_AREA * (grad_term - ddot);
                    h[(i, j)] = val;
                    h[(j, i)] = val;
                }
            }
            Ok(h)
        })
        .collect();
    let mut total = DMatrix::zeros(dim, dim);
    for t in per_node {
        total += t?;
    }
    Ok(total)
}

/// Backward transport solves for all basis directions at once; the field
/// and basis evaluations along the chord are shared across directions.
fn batched_basis_v(
    theta: &CoefficientField,
    prop: &crate::transport::ChordPropagator,
    opts: &OdeOptions,
) -> Result<Vec<Vec<DMatrix<f64>>>> {
    let m = theta.size();
    let dm = theta.skew.dim();
    let n_ell = theta.coeffs.max_ell() + 1;
    let dim = n_ell * dm;
    let g = prop.nodes.len();
    let chord = prop.chord.clone();
    let tau = chord.tau;
    let max_step = opts.max_step(tau);
    let mut v = vec![DMatrix::<f64>::zeros(m, m); dim];
    let mut samples = vec![vec![DMatrix::<f64>::zeros(0, 0); g]; dim];

    let mut phi = DMatrix::zeros(m, m);
    let mut evals = vec![0.0; n_ell];
    let mut k = vec![vec![DMatrix::<f64>::zeros(m, m); dim]; 4];
    let mut stage = vec![DMatrix::<f64>::zeros(m, m); dim];

    // one RK4 stage for the whole batch: out_j = -[Φ, y_j] - 2 e_{ℓ(j)} A_{i(j)}
    let mut eval_stage = |t: f64,
                          ys: &[DMatrix<f64>],
                          outs: &mut [DMatrix<f64>],
                          phi: &mut DMatrix<f64>,
                          evals: &mut [f64]| {
        let x = chord.point_unchecked(t);
        theta.eval_into(x, phi);
        theta.basis.eval_all(x, evals);
        for (j, out) in outs.iter_mut().enumerate() {
            let (ell, a_idx) = (j / dm, j % dm);
            out.gemm(-1.0, phi, &ys[j], 0.0);
            out.gemm(1.0, &ys[j], phi, 1.0);
            crate::numerics::mat_axpy(out, -2.0 * evals[ell], theta.skew.mat(a_idx));
        }
    };

    let mut t_cur = tau;
    for rec in (0..g).rev() {
        let t_target = prop.nodes[rec];
        let len = t_cur - t_target;
        if len > 0.0 {
            let n_steps = (len / max_step).ceil().max(1.0) as usize;
            let h = -len / n_steps as f64;
            for sidx in 0..n_steps {
                let t = t_cur + sidx as f64 * h;
                let (k1, rest) = k.split_at_mut(1);
                eval_stage(t, &v, &mut k1[0], &mut phi, &mut evals);
                for j in 0..dim {
                    stage[j].copy_from(&v[j]);
                    crate::numerics::mat_axpy(&mut stage[j], 0.5 * h, &k1[0][j]);
                }
                let (k2, rest2) = rest.split_at_mut(1);
                eval_stage(t + 0.5 * h, &stage, &mut k2[0], &mut phi, &mut evals);
                for j in 0..dim {
                    stage[j].copy_from(&v[j]);
                    crate::numerics::mat_axpy(&mut stage[j], 0.5 * h, &k2[0][j]);
                }
                let (k3, k4) = rest2.split_at_mut(1);
                eval_stage(t + 0.5 * h, &stage, &mut k3[0], &mut phi, &mut evals);
                for j in 0..dim {
                    stage[j].copy_from(&v[j]);
                    crate::numerics::mat_axpy(&mut stage[j], h, &k3[0][j]);
                }
                eval_stage(t + h, &stage, &mut k4[0], &mut phi, &mut evals);
                for j in 0..dim {
                    crate::numerics::mat_axpy(&mut v[j], h / 6.0, &k1[0][j]);
                    crate::numerics::mat_axpy(&mut v[j], h / 3.0, &k2[0][j]);
                    crate::numerics::mat_axpy(&mut v[j], h / 3.0, &k3[0][j]);
                    crate::numerics::mat_axpy(&mut v[j], h / 6.0, &k4[0][j]);
                }
            }
            t_cur = t_target;
        } else {
            t_cur = t_target;
        }
        for j in 0..dim {
            samples[j][rec] = v[j].clone();
        }
    }
    for row in &samples {
        for s in row {
            if !s.iter().all(|x| x.is_finite()) {
                return Err(Error::numeric("batched auxiliary solve diverged"));
            }
        }
    }
    Ok(samples)
}

/// One probe of the local-curvature scan.
#[derive(Debug, Clone)]
pub struct CurvatureProbe {
    pub radius: f64,
    /// `λ_min(-E∇²ℓ)·√D` in the area-form scaling.
    pub normalized_min_eig: f64,
}

/// Samples `n_probe` points uniformly in the ball of radius `eta` around
/// `θ★,D` and reports `λ_min` of the assembled expected Hessian, scaled by
/// `√D`.
#[allow(clippy::too_many_arguments)]
pub fn curvature_scan(
    truth: &dyn MatrixField,
    dim: usize,
    eta: f64,
    n_probe: usize,
    seed: u64,
    disk_rule: &DiskQuadrature,
    boundary_rule: &BoundaryQuadrature,
    opts: &OdeOptions,
) -> Result<Vec<CurvatureProbe>> {
    let m = truth.size();
    let dm = m * (m - 1) / 2;
    if dim == 0 || dim % dm != 0 {
        return Err(Error::dim("dim must be a positive multiple of d_m"));
    }
    let basis = Arc::new(RealBasis::new(dim / dm));
    let center = project_to_coefficients(truth, dim, &basis, disk_rule)?;
    let rng = CounterRng::new(seed);
    let mut probes = Vec::with_capacity(n_probe);
    for q in 0..n_probe {
        let mut u = DVector::from_iterator(
            dim,
            (0..dim).map(|j| rng.standard_normal(q as u64, j as u64)),
        );
        let norm = u.norm();
        if norm > 0.0 {
            u /= norm;
        }
        let radius = eta * rng.uniform(10_000 + q as u64, 0).powf(1.0 / dim as f64);
        let theta = CoefficientVector::new(m, &center.values + u * radius)?;
        let field = CoefficientField::new(theta, basis.clone())?;
        let hess = expected_hessian_matrix(truth, &field, boundary_rule, opts)?;
        let min_eig = hess
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        probes.push(CurvatureProbe {
            radius,
            normalized_min_eig: min_eig * (dim as f64).sqrt(),
        });
    }
    Ok(probes)
}

/// Stability-constant witness: the ratio
/// `‖f‖²_{H̃^{-1/2}} / ‖I_Ξ f‖²` (area form) for `f ∈ E_D`, bounded by the
/// normal-operator stability constant.
pub fn normal_form_check(
    theta: &CoefficientField,
    f: &CoefficientVector,
    rule: &BoundaryQuadrature,
    opts: &OdeOptions,
) -> Result<f64> {
    if f.values.norm() == 0.0 {
        return Err(Error::invalid("ratio undefined for f = 0"));
    }
    if f.m != theta.coeffs.m {
        return Err(Error::dim("group sizes differ"));
    }
    let f_field = CoefficientField::new(f.clone(), theta.basis.clone())?;
    let dm = f.so_dim();
    let sob = sobolev_norm(f.values.as_slice(), dm, -0.5);
    let terms: Vec<Result<f64>> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(p, w)| {
            let prop = integrating_factor(theta, p, opts)?;
            let mut fbuf = DMatrix::zeros(f.m, f.m);
            let inner = prop.conjugated_integral(|_, x| {
                f_field.eval_into(x, &mut fbuf);
                fbuf.clone()
            });
            // I_Ξ f = (inner)·R0^{-1}; conjugation by the orthogonal R0
            // preserves the Frobenius norm but is kept for generality
            let ixi = inner * &prop.r0_inv;
            Ok(w * BOUNDARY_AREA * ixi.norm_squared())
        })
        .collect();
    let mut vals = Vec::with_capacity(terms.len());
    for t in terms {
        vals.push(t?);
    }
    let denom = crate::numerics::pairwise_sum(&vals);
    if denom <= 0.0 {
        return Err(Error::numeric("transform of f vanished"));
    }
    Ok(sob * sob / denom)
}
