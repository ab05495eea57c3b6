//! Shared numerical kernels: Gauss-Legendre rules, matrix exponential,
//! polar re-orthogonalization.

use nalgebra::DMatrix;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// nodes ascending. Computed by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi-type initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, dp) = legendre_with_derivative(n, 0.0);
        weights[n / 2] = 2.0 / (dp * dp);
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = if (x * x - 1.0).abs() < 1e-300 {
        // endpoint formula, unused by interior Gauss nodes
        0.5 * (n * (n + 1)) as f64 * x.powi(n as i32 + 1)
    } else {
        n as f64 * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let c = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|&t| mid + c * t).collect(),
        w.iter().map(|&wi| c * wi).collect(),
    )
}

/// Matrix exponential by scaling-and-squaring with a degree-6 Padé
/// approximant. Reference/oracle path; not tuned for large norms.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let m = a.nrows();
    assert_eq!(m, a.ncols());
    let norm = a.iter().map(|x| x.abs()).fold(0.0f64, f64::max) * m as f64;
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let b = a * 2f64.powi(-s);

    // Padé [6/6] coefficients of exp.
    const C: [f64; 7] = [
        1.0,
        0.5,
        5.0 / 44.0,
        1.0 / 66.0,
        1.0 / 792.0,
        1.0 / 15840.0,
        1.0 / 665280.0,
    ];
    let eye = DMatrix::identity(m, m);
    let mut num = &eye * C[0];
    let mut den = eye.clone();
    let mut pow = eye.clone();
    for (j, &cj) in C.iter().enumerate().skip(1) {
        pow = &pow * &b;
        num += &pow * cj;
        if j % 2 == 0 {
            den += &pow * cj;
        } else {
            den -= &pow * cj;
        }
    }
    let mut e = den
        .lu()
        .solve(&num)
        .expect("pade denominator is nonsingular for scaled input");
    for _ in 0..s {
        e = &e * &e;
    }
    e
}

/// Projects a near-orthogonal matrix onto the orthogonal group via the
/// polar factor of its SVD.
pub fn polar_orthogonalize(r: &mut DMatrix<f64>) {
    let svd = r.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd vt");
    *r = u * vt;
}

/// `y += a·x` entrywise without allocating.
#[inline]
pub fn mat_axpy(y: &mut DMatrix<f64>, a: f64, x: &DMatrix<f64>) {
    y.zip_apply(x, |yi, xi| *yi += a * xi);
}

/// Fixed-order pairwise sum; deterministic and more accurate than a left fold.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        // n-point rule is exact for degree <= 2n-1
        for n in 1..=12 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let num: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&xi, &wi)| wi * xi.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 0 {
                    2.0 / (deg as f64 + 1.0)
                } else {
                    0.0
                };
                assert_abs_diff_eq!(num, exact, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gauss_weights_positive_and_sum_two() {
        for n in [1, 2, 5, 16, 48, 128] {
            let (x, w) = gauss_legendre(n);
            assert!(w.iter().all(|&wi| wi > 0.0));
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            for i in 1..n {
                assert!(x[i] > x[i - 1]);
            }
        }
    }

    #[test]
    fn expm_matches_rotation() {
        // exp(t J) is a rotation by t for J = [[0,1],[-1,0]]
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        for t in [0.1, 1.0, 2.5, -3.0] {
            let e = expm(&(j.clone() * t));
            let expect =
                DMatrix::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
            assert!((e - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn expm_diagonal() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.3, -1.2, 2.0]));
        let e = expm(&d);
        for i in 0..3 {
            assert_abs_diff_eq!(e[(i, i)], d[(i, i)].exp(), epsilon = 1e-13);
        }
    }

    #[test]
    fn polar_projection_restores_orthogonality() {
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let mut r = expm(&(j * 0.7));
        // perturb
        r[(0, 0)] += 1e-6;
        polar_orthogonalize(&mut r);
        let defect = (r.transpose() * &r - DMatrix::identity(2, 2)).norm();
        assert!(defect < 1e-12);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert_abs_diff_eq!(pairwise_sum(&xs), naive, epsilon = 1e-9);
    }
}
