//! `so(m)`-valued matrix fields on the disk: the Frobenius-orthonormal
//! skew basis, the coefficient-to-field map `θ ↦ Φ_θ`, commutator action,
//! and `L²`-projection onto the finite-dimensional space `E_D`.

use crate::error::{Error, Result};
use crate::geometry::DiskQuadrature;
use crate::zernike::RealBasis;
use nalgebra::{DMatrix, DVector, Vector2};
use std::sync::Arc;

/// Frobenius-orthonormal basis of `so(m)`: `(E_pq - E_qp)/√2` for `p < q`
/// in lexicographic order.
#[derive(Debug, Clone)]
pub struct SkewBasis {
    m: usize,
    mats: Vec<DMatrix<f64>>,
}

pub fn so_basis(m: usize) -> Result<SkewBasis> {
    if m < 2 {
        return Err(Error::invalid(format!("so({m}) needs m >= 2")));
    }
    let s = 1.0 / std::f64::consts::SQRT_2;
    let mut mats = Vec::with_capacity(m * (m - 1) / 2);
    for p in 0..m {
        for q in (p + 1)..m {
            let mut a = DMatrix::zeros(m, m);
            a[(p, q)] = s;
            a[(q, p)] = -s;
            mats.push(a);
        }
    }
    Ok(SkewBasis { m, mats })
}

impl SkewBasis {
    pub fn m(&self) -> usize {
        self.m
    }

    /// `dim so(m) = m(m-1)/2`.
    pub fn dim(&self) -> usize {
        self.mats.len()
    }

    pub fn mat(&self, i: usize) -> &DMatrix<f64> {
        &self.mats[i]
    }

    pub fn mats(&self) -> &[DMatrix<f64>] {
        &self.mats
    }

    /// Frobenius coefficients of a (skew) matrix in this basis.
    pub fn coefficients_of(&self, a: &DMatrix<f64>) -> Vec<f64> {
        self.mats
            .iter()
            .map(|b| frobenius_inner(a, b))
            .collect()
    }
}

pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `[Φ, A] = ΦA - AΦ`.
pub fn commutator_action(phi: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    phi * a - a * phi
}

/// Coefficients of a field in `E_D`, stored ℓ-major / so(m)-component-minor:
/// `θ[ℓ·d_m + i]` multiplies `ê_ℓ A_i`. By Parseval the Euclidean norm of
/// `θ` equals the `L²(D)` norm of `Φ_θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub m: usize,
    pub values: DVector<f64>,
}

impl CoefficientVector {
    pub fn new(m: usize, values: DVector<f64>) -> Result<Self> {
        let dm = m * (m - 1) / 2;
        if m < 2 || dm == 0 {
            return Err(Error::invalid("coefficient vector needs m >= 2"));
        }
        if values.len() == 0 || values.len() % dm != 0 {
            return Err(Error::dim(format!(
                "coefficient length {} not a positive multiple of d_m = {dm}",
                values.len()
            )));
        }
        Ok(CoefficientVector { m, values })
    }

    pub fn zeros(m: usize, dim: usize) -> Result<Self> {
        CoefficientVector::new(m, DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn so_dim(&self) -> usize {
        self.m * (self.m - 1) / 2
    }

    /// Largest single index ℓ carried by this vector.
    pub fn max_ell(&self) -> usize {
        self.dim() / self.so_dim() - 1
    }

    pub fn get(&self, ell: usize, i: usize) -> f64 {
        self.values[ell * self.so_dim() + i]
    }
}

/// A matrix-valued field on the closed disk. Implementations must be pure
/// and safe to evaluate concurrently.
pub trait MatrixField: Send + Sync {
    /// Matrix size `m`.
    fn size(&self) -> usize;

    /// Writes the field value at `p` into `out` (an `m×m` matrix).
    fn eval_into(&self, p: Vector2<f64>, out: &mut DMatrix<f64>);

    fn eval(&self, p: Vector2<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.size(), self.size());
        self.eval_into(p, &mut out);
        out
    }
}

/// The zero field.
#[derive(Debug, Clone)]
pub struct ZeroField {
    pub m: usize,
}

impl MatrixField for ZeroField {
    fn size(&self) -> usize {
        self.m
    }

    fn eval_into(&self, _p: Vector2<f64>, out: &mut DMatrix<f64>) {
        out.fill(0.0);
    }
}

/// Field `Φ_θ = Σ_{ℓ,i} θ_{ℓ,i} ê_ℓ A_i` determined by a coefficient vector.
#[derive(Clone)]
pub struct CoefficientField {
    pub coeffs: CoefficientVector,
    pub basis: Arc<RealBasis>,
    pub skew: SkewBasis,
}

impl CoefficientField {
    pub fn new(coeffs: CoefficientVector, basis: Arc<RealBasis>) -> Result<Self> {
        let skew = so_basis(coeffs.m)?;
        if basis.dim() < coeffs.max_ell() + 1 {
            return Err(Error::dim(format!(
                "basis covers {} indices, coefficients need {}",
                basis.dim(),
                coeffs.max_ell() + 1
            )));
        }
        Ok(CoefficientField {
            coeffs,
            basis,
            skew,
        })
    }
}

impl MatrixField for CoefficientField {
    fn size(&self) -> usize {
        self.coeffs.m
    }

    fn eval_into(&self, p: Vector2<f64>, out: &mut DMatrix<f64>) {
        let dm = self.skew.dim();
        debug_assert!(dm <= 32);
        let mut acc = [0.0f64; 32];
        let n_ell = self.coeffs.max_ell() + 1;
        for ell in 0..n_ell {
            let e = self.basis.eval(ell, p);
            let base = ell * dm;
            for (i, slot) in acc.iter_mut().enumerate().take(dm) {
                *slot += e * self.coeffs.values[base + i];
            }
        }
        out.fill(0.0);
        for (i, &c) in acc.iter().enumerate().take(dm) {
            if c != 0.0 {
                out.zip_apply(self.skew.mat(i), |o, a| *o += c * a);
            }
        }
    }
}

/// Smooth compactly supported radial bump times a fixed `so(m)` direction:
/// `Φ(x) = exp(1 - 1/(1 - (|x|/r0)²)) Σ_i amp_i A_i` inside `|x| < r0`.
#[derive(Debug, Clone)]
pub struct BumpField {
    skew: SkewBasis,
    pub radius: f64,
    pub amplitudes: Vec<f64>,
}

impl BumpField {
    pub fn new(m: usize, radius: f64, amplitudes: Vec<f64>) -> Result<Self> {
        let skew = so_basis(m)?;
        if !(0.0 < radius && radius < 1.0) {
            return Err(Error::invalid("bump radius must lie in (0, 1)"));
        }
        if amplitudes.len() != skew.dim() {
            return Err(Error::dim(format!(
                "need {} amplitudes for so({m})",
                skew.dim()
            )));
        }
        Ok(BumpField {
            skew,
            radius,
            amplitudes,
        })
    }

    pub fn profile(&self, r: f64) -> f64 {
        let u = r / self.radius;
        if u >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - u * u)).exp()
        }
    }
}

impl MatrixField for BumpField {
    fn size(&self) -> usize {
        self.skew.m()
    }

    fn eval_into(&self, p: Vector2<f64>, out: &mut DMatrix<f64>) {
        let b = self.profile(p.norm());
        out.fill(0.0);
        if b == 0.0 {
            return;
        }
        for (i, &amp) in self.amplitudes.iter().enumerate() {
            if amp != 0.0 {
                out.zip_apply(self.skew.mat(i), |o, a| *o += b * amp * a);
            }
        }
    }
}

/// `L²(D)`-projection of a field onto `E_D`: `θ_{ℓ,i} = <f, ê_ℓ A_i>`.
pub fn project_to_coefficients(
    field: &dyn MatrixField,
    dim: usize,
    basis: &RealBasis,
    rule: &DiskQuadrature,
) -> Result<CoefficientVector> {
    let m = field.size();
    let skew = so_basis(m)?;
    let dm = skew.dim();
    if dim == 0 || dim % dm != 0 {
        return Err(Error::dim(format!("dim {dim} not a multiple of d_m = {dm}")));
    }
    let n_ell = dim / dm;
    if basis.dim() < n_ell {
        return Err(Error::dim("basis does not cover the requested dimension"));
    }
    let mut theta = DVector::zeros(dim);
    let mut vals = vec![0.0; n_ell];
    let mut fmat = DMatrix::zeros(m, m);
    for (p, w) in rule.nodes.iter().zip(&rule.weights) {
        field.eval_into(*p, &mut fmat);
        basis.eval_all(*p, &mut vals[..]);
        for (i, a) in skew.mats().iter().enumerate() {
            let frob = frobenius_inner(&fmat, a);
            if frob == 0.0 {
                continue;
            }
            for (ell, &e) in vals.iter().enumerate() {
                theta[ell * dm + i] += w * e * frob;
            }
        }
    }
    CoefficientVector::new(m, theta)
}

/// Projection with a refinement check: recomputes on a doubled rule and
/// errors if any coefficient moves by more than `1e-8`.
pub fn project_to_coefficients_checked(
    field: &dyn MatrixField,
    dim: usize,
    basis: &RealBasis,
    rule: &DiskQuadrature,
) -> Result<CoefficientVector> {
    let coarse = project_to_coefficients(field, dim, basis, rule)?;
    let fine_rule = crate::geometry::disk_quadrature(rule.n_r * 2, rule.n_phi * 2);
    let fine = project_to_coefficients(field, dim, basis, &fine_rule)?;
    let gap = (&coarse.values - &fine.values).amax();
    if gap > 1e-8 {
        return Err(Error::numeric(format!(
            "projection quadrature not converged: doubling moved coefficients by {gap:.3e}"
        )));
    }
    Ok(fine)
}
