//! Complex and real Zernike polynomials, single-index ordering, spectral
//! eigenvalues, Zernike-scale Sobolev norms, and the fan-beam boundary
//! basis `ψ±_nk`.
//!
//! `Z_nk(z) = (1/k!) ∂_z^k ( z^n (1/z - z̄)^k )` expands into the monomial
//! double sum
//!
//! ```text
//! Z_nk(z) = Σ_{j=max(0, 2k-n)}^{k} (-1)^j C(k,j) (n-k+j)!/(k! (n-2k+j)!) z^{n-2k+j} z̄^j
//! ```
//!
//! which is precomputed once per index into a coefficient table; all
//! evaluations and analytic derivatives run off that table.

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPoint, BoundaryQuadrature, DiskQuadrature};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Double index of a Zernike polynomial, `0 ≤ k ≤ n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ZernikeIndex {
    pub n: u32,
    pub k: u32,
}

impl ZernikeIndex {
    pub fn new(n: u32, k: u32) -> Result<Self> {
        if k > n {
            return Err(Error::invalid(format!("zernike index k={k} > n={n}")));
        }
        Ok(ZernikeIndex { n, k })
    }
}

/// Pyramid enumeration `(0,0),(1,0),(1,1),(2,0),...` of the double indices.
pub fn single_to_pair(ell: usize) -> (u32, u32) {
    let mut n = (((8 * ell + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    while (n + 1) * (n + 2) / 2 <= ell {
        n += 1;
    }
    while n * (n + 1) / 2 > ell {
        n -= 1;
    }
    ((n) as u32, (ell - n * (n + 1) / 2) as u32)
}

/// Inverse of [`single_to_pair`].
pub fn pair_to_single(n: u32, k: u32) -> usize {
    let n = n as usize;
    n * (n + 1) / 2 + k as usize
}

/// Spectral eigenvalue `λ_ℓ = ((1 + n_ℓ)/(4π))²` attached to the single
/// index; the squared singular values of the unattenuated transform.
pub fn eigenvalue(ell: usize) -> f64 {
    let (n, _) = single_to_pair(ell);
    ((1.0 + n as f64) / (4.0 * PI)).powi(2)
}

/// `‖Z_nk‖_{L²(D)} = sqrt(π/(n+1))`.
pub fn zernike_norm(idx: ZernikeIndex) -> f64 {
    (PI / (idx.n as f64 + 1.0)).sqrt()
}

#[derive(Debug, Clone, Copy)]
struct MonomialTerm {
    c: f64,
    // exponents of z and z̄; both step by one across a table row
    a: u32,
    b: u32,
}

fn monomial_table(n: u32, k: u32) -> Vec<MonomialTerm> {
    let (n, k) = (n as i64, k as i64);
    let j0 = 0.max(2 * k - n);
    let mut terms = Vec::with_capacity((k - j0 + 1) as usize);
    for j in j0..=k {
        // (-1)^j C(k,j) (n-k+j)! / (k! (n-2k+j)!) built as a stepwise product
        let mut c = if j % 2 == 0 { 1.0 } else { -1.0 };
        for t in 0..j {
            // C(k,j) = prod (k-t)/(t+1)
            c *= (k - t) as f64 / (t + 1) as f64;
        }
        for t in (n - 2 * k + j + 1)..=(n - k + j) {
            c *= t as f64;
        }
        for t in 1..=k {
            c /= t as f64;
        }
        terms.push(MonomialTerm {
            c,
            a: (n - 2 * k + j) as u32,
            b: j as u32,
        });
    }
    terms
}

#[inline]
fn eval_terms(terms: &[MonomialTerm], z: Complex64) -> Complex64 {
    let Some(first) = terms.first() else {
        return Complex64::new(0.0, 0.0);
    };
    let zb = z.conj();
    let mut zp = z.powu(first.a);
    let mut wp = zb.powu(first.b);
    let mut acc = Complex64::new(0.0, 0.0);
    for t in terms {
        acc += t.c * zp * wp;
        zp *= z;
        wp *= zb;
    }
    acc
}

/// Precomputed monomial tables for all `Z_nk` up to a maximal degree,
/// together with tables for `∂_z Z_nk` and `∂_z̄ Z_nk`.
#[derive(Debug, Clone)]
pub struct ZernikeTable {
    n_max: u32,
    value: Vec<Vec<MonomialTerm>>,
    dz: Vec<Vec<MonomialTerm>>,
    dzbar: Vec<Vec<MonomialTerm>>,
}

impl ZernikeTable {
    pub fn new(n_max: u32) -> Self {
        let count = pair_to_single(n_max, n_max) + 1;
        let mut value = Vec::with_capacity(count);
        let mut dz = Vec::with_capacity(count);
        let mut dzbar = Vec::with_capacity(count);
        for ell in 0..count {
            let (n, k) = single_to_pair(ell);
            let terms = monomial_table(n, k);
            dz.push(
                terms
                    .iter()
                    .filter(|t| t.a > 0)
                    .map(|t| MonomialTerm {
                        c: t.c * t.a as f64,
                        a: t.a - 1,
                        b: t.b,
                    })
                    .collect(),
            );
            dzbar.push(
                terms
                    .iter()
                    .filter(|t| t.b > 0)
                    .map(|t| MonomialTerm {
                        c: t.c * t.b as f64,
                        a: t.a,
                        b: t.b - 1,
                    })
                    .collect(),
            );
            value.push(terms);
        }
        ZernikeTable {
            n_max,
            value,
            dz,
            dzbar,
        }
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    fn slot(&self, idx: ZernikeIndex) -> usize {
        assert!(
            idx.n <= self.n_max,
            "degree {} exceeds table maximum {}",
            idx.n,
            self.n_max
        );
        pair_to_single(idx.n, idx.k)
    }

    /// Unnormalized `Z_nk(z)`.
    pub fn eval(&self, idx: ZernikeIndex, z: Complex64) -> Complex64 {
        eval_terms(&self.value[self.slot(idx)], z)
    }

    pub fn eval_dz(&self, idx: ZernikeIndex, z: Complex64) -> Complex64 {
        eval_terms(&self.dz[self.slot(idx)], z)
    }

    pub fn eval_dzbar(&self, idx: ZernikeIndex, z: Complex64) -> Complex64 {
        eval_terms(&self.dzbar[self.slot(idx)], z)
    }

    /// `Z_nk` with the out-of-range convention `Z_nk = 0` for `n < 0`,
    /// `k < 0` or `k > n`.
    pub fn eval_or_zero(&self, n: i64, k: i64, z: Complex64) -> Complex64 {
        if n < 0 || k < 0 || k > n {
            Complex64::new(0.0, 0.0)
        } else {
            self.eval(
                ZernikeIndex {
                    n: n as u32,
                    k: k as u32,
                },
                z,
            )
        }
    }
}

/// Residual of one of the three Zernike structure identities at `z`:
///
/// 1. `z Z_nk = (1 - k/(n+1)) Z_{n+1,k} - (k/(n+1)) Z_{n-1,k-1}`
/// 2. `(1 - z z̄) ∂_z̄ Z_nk = (n-k+1)(z Z_nk - Z_{n+1,k})`
/// 3. `∂_φ Z_nk = i (n-2k) Z_nk` (angular derivative `∂_φ = i(z∂_z - z̄∂_z̄)`)
///
/// The table must cover degree `n+1`.
pub fn zernike_identity_residual(
    table: &ZernikeTable,
    idx: ZernikeIndex,
    z: Complex64,
    which: u8,
) -> Result<f64> {
    let n = idx.n as i64;
    let k = idx.k as i64;
    if idx.n + 1 > table.n_max() {
        return Err(Error::invalid("table does not cover degree n+1"));
    }
    let znk = table.eval(idx, z);
    let res = match which {
        1 => {
            let lhs = z * znk;
            let rhs = (1.0 - k as f64 / (n as f64 + 1.0)) * table.eval_or_zero(n + 1, k, z)
                - (k as f64 / (n as f64 + 1.0)) * table.eval_or_zero(n - 1, k - 1, z);
            (lhs - rhs).norm()
        }
        2 => {
            let lhs = (1.0 - (z * z.conj()).re) * table.eval_dzbar(idx, z);
            let rhs = (n as f64 - k as f64 + 1.0) * (z * znk - table.eval_or_zero(n + 1, k, z));
            (lhs - rhs).norm()
        }
        3 => {
            let i = Complex64::new(0.0, 1.0);
            let lhs = i * (z * table.eval_dz(idx, z) - z.conj() * table.eval_dzbar(idx, z));
            let rhs = i * (n as f64 - 2.0 * k as f64) * znk;
            (lhs - rhs).norm()
        }
        w => return Err(Error::invalid(format!("identity selector {w} not in 1..=3"))),
    };
    Ok(res)
}

#[derive(Debug, Clone, Copy)]
enum RealPart {
    Re,
    Im,
}

#[derive(Debug, Clone, Copy)]
struct RealMode {
    slot: usize,
    part: RealPart,
    scale: f64,
}

/// Real orthonormal basis `ê_ℓ` of `L²(D)`: real/imaginary parts of the
/// Zernike polynomials in pyramid order, normalized by `sqrt((n+1)/π)`.
#[derive(Debug, Clone)]
pub struct RealBasis {
    table: ZernikeTable,
    modes: Vec<RealMode>,
    dim: usize,
}

impl RealBasis {
    /// Basis covering single indices `0..dim` (plus one extra degree so the
    /// identity checks stay in range).
    pub fn new(dim: usize) -> Self {
        let (n_top, _) = single_to_pair(dim.max(1) - 1);
        let table = ZernikeTable::new(n_top + 1);
        let modes = (0..dim)
            .map(|ell| {
                let (n, k) = single_to_pair(ell);
                let scale = ((n as f64 + 1.0) / PI).sqrt();
                let m = n as i64 - 2 * k as i64;
                if m > 0 {
                    RealMode {
                        slot: pair_to_single(n, k),
                        part: RealPart::Re,
                        scale: std::f64::consts::SQRT_2 * scale,
                    }
                } else if m == 0 {
                    RealMode {
                        slot: pair_to_single(n, k),
                        part: RealPart::Re,
                        scale,
                    }
                } else {
                    RealMode {
                        slot: pair_to_single(n, n - k),
                        part: RealPart::Im,
                        scale: std::f64::consts::SQRT_2 * scale,
                    }
                }
            })
            .collect();
        RealBasis { table, modes, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn table(&self) -> &ZernikeTable {
        &self.table
    }

    /// `ê_ℓ(p)`.
    pub fn eval(&self, ell: usize, p: nalgebra::Vector2<f64>) -> f64 {
        let z = Complex64::new(p.x, p.y);
        let mode = &self.modes[ell];
        let v = eval_terms(&self.table.value[mode.slot], z);
        match mode.part {
            RealPart::Re => mode.scale * v.re,
            RealPart::Im => mode.scale * v.im,
        }
    }

    /// Evaluates `ê_0, ..., ê_{out.len()-1}` at `p` into `out`; the slice
    /// may request fewer indices than the basis carries, never more.
    pub fn eval_all(&self, p: nalgebra::Vector2<f64>, out: &mut [f64]) {
        assert!(out.len() <= self.dim);
        for (ell, slot) in out.iter_mut().enumerate() {
            *slot = self.eval(ell, p);
        }
    }
}

/// Sobolev norm on the Zernike scale: `sqrt(Σ_ℓ (1+n_ℓ)^{2s} Σ_i c_{ℓ,i}²)`
/// for coefficients stored ℓ-major with `comps` components per index.
pub fn sobolev_norm(values: &[f64], comps: usize, s: f64) -> f64 {
    assert!(comps >= 1 && values.len() % comps == 0);
    let mut total = 0.0;
    for (ell, chunk) in values.chunks_exact(comps).enumerate() {
        let (n, _) = single_to_pair(ell);
        let w = (1.0 + n as f64).powf(2.0 * s);
        total += w * chunk.iter().map(|c| c * c).sum::<f64>();
    }
    total.sqrt()
}

/// Sign selector for the boundary basis `ψ±`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PsiSign {
    Plus,
    Minus,
}

/// Unnormalized boundary basis function in fan-beam coordinates:
///
/// `ψ⁺_nk(α,β) = ((-1)^n / 4π) e^{i(n-2k)(α+β)} (e^{i(n+1)α} + (-1)^n e^{-i(n+1)α})`
/// and `ψ⁻_nk = e^{i(α+β+π)} ψ⁺_nk`.
pub fn boundary_psi(n: u32, k: i64, sign: PsiSign, p: &BoundaryPoint) -> Complex64 {
    let alpha = p.alpha();
    let beta = p.beta();
    let nf = n as f64;
    let m = nf - 2.0 * k as f64;
    let parity = if n % 2 == 0 { 1.0 } else { -1.0 };
    let osc = Complex64::from_polar(1.0, m * (alpha + beta));
    let wing = Complex64::from_polar(1.0, (nf + 1.0) * alpha)
        + parity * Complex64::from_polar(1.0, -(nf + 1.0) * alpha);
    let plus = parity / (4.0 * PI) * osc * wing;
    match sign {
        PsiSign::Plus => plus,
        PsiSign::Minus => Complex64::from_polar(1.0, alpha + beta + PI) * plus,
    }
}

/// `ψ̂±_nk` normalized to unit `L²_λ` norm, with the normalization constants
/// obtained once by quadrature and cached.
#[derive(Debug, Clone)]
pub struct NormalizedBoundaryBasis {
    n_max: u32,
    // norms[pair_to_single(n,k)] for k in 0..=n; the norm does not depend
    // on the sign
    norms: Vec<f64>,
}

impl NormalizedBoundaryBasis {
    pub fn new(n_max: u32, rule: &BoundaryQuadrature) -> Self {
        let count = pair_to_single(n_max, n_max) + 1;
        let mut norms = vec![0.0; count];
        for (ell, norm) in norms.iter_mut().enumerate() {
            let (n, k) = single_to_pair(ell);
            let mut total = 0.0;
            for (p, w) in rule.nodes.iter().zip(&rule.weights) {
                total += w * boundary_psi(n, k as i64, PsiSign::Plus, p).norm_sqr();
            }
            *norm = total.sqrt();
        }
        NormalizedBoundaryBasis { n_max, norms }
    }

    pub fn norm(&self, n: u32, k: u32) -> f64 {
        assert!(n <= self.n_max && k <= n);
        self.norms[pair_to_single(n, k)]
    }

    pub fn eval(&self, n: u32, k: u32, sign: PsiSign, p: &BoundaryPoint) -> Complex64 {
        boundary_psi(n, k as i64, sign, p) / self.norm(n, k)
    }
}

/// Gram matrix of `{ê_ℓ : ℓ < dim}` under a disk quadrature rule; the
/// orthonormality witness used by tests and projection diagnostics.
pub fn real_basis_gram(basis: &RealBasis, rule: &DiskQuadrature) -> nalgebra::DMatrix<f64> {
    let d = basis.dim();
    let mut gram = nalgebra::DMatrix::zeros(d, d);
    let mut vals = vec![0.0; d];
    for (p, w) in rule.nodes.iter().zip(&rule.weights) {
        basis.eval_all(*p, &mut vals);
        for i in 0..d {
            for j in i..d {
                gram[(i, j)] += w * vals[i] * vals[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    gram
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry;
    use crate::rng::CounterRng;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector2;

    fn random_disk_point(rng: &CounterRng, i: u64) -> Complex64 {
        let r = rng.uniform(0, i).sqrt() * 0.999;
        let phi = 2.0 * PI * rng.uniform(1, i);
        Complex64::from_polar(r, phi)
    }

    #[test]
    fn ordering_is_bijective() {
        let mut expect = Vec::new();
        for n in 0..150u32 {
            for k in 0..=n {
                expect.push((n, k));
            }
        }
        for (ell, &(n, k)) in expect.iter().enumerate().take(10_000) {
            assert_eq!(single_to_pair(ell), (n, k));
            assert_eq!(pair_to_single(n, k), ell);
        }
    }

    #[test]
    fn eigenvalue_examples() {
        assert_abs_diff_eq!(eigenvalue(0), 1.0 / (16.0 * PI * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(eigenvalue(1), 1.0 / (4.0 * PI * PI), epsilon = 1e-15);
        // monotone nondecreasing
        for ell in 1..500 {
            assert!(eigenvalue(ell) >= eigenvalue(ell - 1));
        }
    }

    #[test]
    fn eigenvalue_linear_growth_band() {
        // c1*l <= lambda_l <= c2*l with c1 = 1/(32 pi^2), c2 = 1/pi^2
        let c1 = 1.0 / (32.0 * PI * PI);
        let c2 = 1.0 / (PI * PI);
        for ell in 1..10_000 {
            let lam = eigenvalue(ell);
            assert!(lam >= c1 * ell as f64, "lower bound fails at {ell}");
            assert!(lam <= c2 * ell as f64, "upper bound fails at {ell}");
        }
    }

    #[test]
    fn zernike_k0_is_power() {
        let table = ZernikeTable::new(8);
        let z = Complex64::new(0.5, 0.0);
        let v = table.eval(ZernikeIndex { n: 3, k: 0 }, z);
        assert_abs_diff_eq!(v.re, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn zernike_11_is_minus_conjugate() {
        let table = ZernikeTable::new(4);
        let rng = CounterRng::new(9);
        for i in 0..50 {
            let z = random_disk_point(&rng, i);
            let v = table.eval(ZernikeIndex { n: 1, k: 1 }, z);
            assert!((v + z.conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn rotation_symmetry() {
        // Z_nk(u z) = u^{n-2k} Z_nk(z) for |u| = 1
        let table = ZernikeTable::new(9);
        let rng = CounterRng::new(2);
        for i in 0..100 {
            let z = random_disk_point(&rng, i);
            let u = Complex64::from_polar(1.0, 2.0 * PI * rng.uniform(7, i));
            for n in 0..=8u32 {
                for k in 0..=n {
                    let idx = ZernikeIndex { n, k };
                    let lhs = table.eval(idx, u * z);
                    let rhs = u.powi(n as i32 - 2 * k as i32) * table.eval(idx, z);
                    assert!((lhs - rhs).norm() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn conjugation_symmetry() {
        // conj(Z_nk)(z) = (-1)^n Z_{n,n-k}(z)
        let table = ZernikeTable::new(9);
        let rng = CounterRng::new(4);
        for i in 0..100 {
            let z = random_disk_point(&rng, i);
            for n in 0..=8u32 {
                for k in 0..=n {
                    let lhs = table.eval(ZernikeIndex { n, k }, z).conj();
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    let rhs = sign * table.eval(ZernikeIndex { n, k: n - k }, z);
                    assert!((lhs - rhs).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn norms_by_quadrature_and_formula() {
        let table = ZernikeTable::new(6);
        let rule = geometry::disk_quadrature(16, 32);
        for n in 0..=6u32 {
            for k in 0..=n {
                let idx = ZernikeIndex { n, k };
                let mut total = 0.0;
                for (p, w) in rule.nodes.iter().zip(&rule.weights) {
                    total += w * table.eval(idx, Complex64::new(p.x, p.y)).norm_sqr();
                }
                assert_abs_diff_eq!(total.sqrt(), zernike_norm(idx), epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(zernike_norm(ZernikeIndex { n: 0, k: 0 }), PI.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            zernike_norm(ZernikeIndex { n: 3, k: 1 }),
            (PI / 4.0).sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn sup_norm_is_one_on_the_disk() {
        // max over a fine grid approaches 1 (attained on the boundary)
        let table = ZernikeTable::new(6);
        for (n, k) in [(2u32, 1u32), (4, 2), (5, 1), (6, 3)] {
            let mut best = 0.0f64;
            for ir in 0..100 {
                let r = ir as f64 / 99.0;
                for ip in 0..100 {
                    let z = Complex64::from_polar(r, 2.0 * PI * ip as f64 / 100.0);
                    best = best.max(table.eval(ZernikeIndex { n, k }, z).norm());
                }
            }
            assert!((best - 1.0).abs() < 1e-6, "sup |Z_{n}{k}| = {best}");
        }
    }

    #[test]
    fn identities_hold_at_random_points() {
        let table = ZernikeTable::new(9);
        let rng = CounterRng::new(31);
        for i in 0..100 {
            let z = random_disk_point(&rng, i);
            for n in 0..=8u32 {
                for k in 0..=n {
                    let idx = ZernikeIndex { n, k };
                    for which in 1..=3u8 {
                        let r = zernike_identity_residual(&table, idx, z, which).unwrap();
                        assert!(r <= 1e-10, "identity {which} residual {r} at n={n} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn identity_first_base_case() {
        // z * Z_00 - Z_10 = 0 exactly
        let table = ZernikeTable::new(2);
        let r = zernike_identity_residual(
            &table,
            ZernikeIndex { n: 0, k: 0 },
            Complex64::new(0.3, -0.4),
            1,
        )
        .unwrap();
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-16);
    }

    #[test]
    fn real_basis_constant_mode() {
        let basis = RealBasis::new(6);
        let v = basis.eval(0, Vector2::new(0.3, -0.2));
        assert_abs_diff_eq!(v, 1.0 / PI.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn real_basis_gram_is_identity() {
        let basis = RealBasis::new(66);
        // products have degree <= 20: n_r > 10, n_phi > 40
        let rule = geometry::disk_quadrature(16, 48);
        let gram = real_basis_gram(&basis, &rule);
        for i in 0..66 {
            for j in 0..66 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram[(i, j)] - expect).abs() < 1e-10,
                    "gram[{i},{j}] = {}",
                    gram[(i, j)]
                );
            }
        }
    }

    #[test]
    fn real_basis_sup_norm_growth() {
        // sup_{l<=D} max |e_l| <= sqrt(2(n+1)/pi) pointwise, and the
        // D^{1/4}-normalized sup stays in a factor-4 band
        let dims = [3usize, 10, 21, 36, 55];
        let mut ratios = Vec::new();
        for &d in &dims {
            let basis = RealBasis::new(d);
            let mut sup = 0.0f64;
            for ell in 0..d {
                let (n, _) = single_to_pair(ell);
                let bound = (2.0 * (n as f64 + 1.0) / PI).sqrt();
                let mut best = 0.0f64;
                for ir in 0..60 {
                    let r = ir as f64 / 59.0;
                    for ip in 0..60 {
                        let phi = 2.0 * PI * ip as f64 / 60.0;
                        let p = Vector2::new(r * phi.cos(), r * phi.sin());
                        best = best.max(basis.eval(ell, p).abs());
                    }
                }
                assert!(best <= bound + 1e-9);
                sup = sup.max(best);
            }
            ratios.push(sup / (d as f64).powf(0.25));
        }
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
        assert!(hi / lo < 4.0, "normalized sup ratios {ratios:?}");
    }

    #[test]
    fn sobolev_norm_cases() {
        // s = 0: euclidean norm
        let vals = [0.3, -1.2, 0.5, 2.0];
        let expect = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_abs_diff_eq!(sobolev_norm(&vals, 1, 0.0), expect, epsilon = 1e-15);

        // unit vector at an index with n_l = 3, s = 1 gives (1+3)^1... norm 4
        let mut unit = vec![0.0; 10];
        unit[pair_to_single(3, 1)] = 1.0;
        assert_abs_diff_eq!(sobolev_norm(&unit, 1, 1.0), 4.0, epsilon = 1e-15);

        // H^{-1/2} is dominated by L2
        let rng = CounterRng::new(8);
        for trial in 0..20 {
            let v: Vec<f64> = (0..12)
                .map(|j| rng.standard_normal(trial, j))
                .collect();
            assert!(sobolev_norm(&v, 1, -0.5) <= sobolev_norm(&v, 1, 0.0) + 1e-14);
        }
    }

    #[test]
    fn psi_plus_base_case_is_cos_alpha() {
        // psi+_00 = cos(alpha)/(2 pi)
        let rng = CounterRng::new(6);
        for i in 0..50 {
            let alpha = -PI / 2.0 + PI * rng.uniform(0, i);
            let beta = 2.0 * PI * rng.uniform(1, i);
            let p = BoundaryPoint::new(alpha, beta).unwrap();
            let v = boundary_psi(0, 0, PsiSign::Plus, &p);
            assert_abs_diff_eq!(v.re, alpha.cos() / (2.0 * PI), epsilon = 1e-14);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn psi_minus_same_modulus() {
        let rng = CounterRng::new(13);
        for i in 0..50 {
            let alpha = -PI / 2.0 + PI * rng.uniform(0, i);
            let beta = 2.0 * PI * rng.uniform(1, i);
            let p = BoundaryPoint::new(alpha, beta).unwrap();
            let a = boundary_psi(4, 1, PsiSign::Plus, &p).norm();
            let b = boundary_psi(4, 1, PsiSign::Minus, &p).norm();
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn psi_hat_orthonormal() {
        let rule = geometry::boundary_quadrature(64, 64);
        let basis = NormalizedBoundaryBasis::new(5, &rule);
        // self inner products
        for n in 0..=5u32 {
            for k in 0..=n {
                let mut total = Complex64::new(0.0, 0.0);
                for (p, w) in rule.nodes.iter().zip(&rule.weights) {
                    let v = basis.eval(n, k, PsiSign::Plus, p);
                    total += *w * v * v.conj();
                }
                assert_abs_diff_eq!(total.re, 1.0, epsilon = 1e-10);
            }
        }
        // cross: plus vs plus for distinct indices and plus vs minus always
        let pairs = [(0u32, 0u32), (1, 0), (2, 1), (3, 1), (5, 2)];
        for &(n1, k1) in &pairs {
            for &(n2, k2) in &pairs {
                let mut pp = Complex64::new(0.0, 0.0);
                let mut pm = Complex64::new(0.0, 0.0);
                for (p, w) in rule.nodes.iter().zip(&rule.weights) {
                    let a = basis.eval(n1, k1, PsiSign::Plus, p);
                    let bp = basis.eval(n2, k2, PsiSign::Plus, p);
                    let bm = basis.eval(n2, k2, PsiSign::Minus, p);
                    pp += *w * a * bp.conj();
                    pm += *w * a * bm.conj();
                }
                if (n1, k1) != (n2, k2) {
                    assert!(pp.norm() < 1e-10, "<psi+_{n1}{k1}, psi+_{n2}{k2}> = {pp}");
                }
                assert!(pm.norm() < 1e-10, "<psi+_{n1}{k1}, psi-_{n2}{k2}> = {pm}");
            }
        }
    }

    #[test]
    fn psi_norm_converges_under_refinement() {
        // doubling the rule changes the psi_52 norm by < 1e-10 beyond 64x64
        let coarse = NormalizedBoundaryBasis::new(5, &geometry::boundary_quadrature(64, 64));
        let fine = NormalizedBoundaryBasis::new(5, &geometry::boundary_quadrature(128, 128));
        assert!((coarse.norm(5, 2) - fine.norm(5, 2)).abs() < 1e-10);
    }
}
