//! Hermitian eigendecomposition by cyclic complex Jacobi rotations.

use ndarray::{Array2, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenpairs of a Hermitian matrix. Column `i` of `vectors` pairs with `values[i]`;
/// values are sorted in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: Array2<Complex64>,
}

const MAX_SWEEPS: usize = 100;

fn frobenius(m: &Array2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest deviation from Hermitian symmetry, `max |m_ij - conj(m_ji)|`.
pub fn hermitian_defect(m: &Array2<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_eig(m: &Array2<Complex64>) -> Result<HermitianEig> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::invalid(format!(
            "matrix must be square and non-empty, got {:?}",
            m.dim()
        )));
    }
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let norm = frobenius(m);
    let defect = hermitian_defect(m);
    if defect > 1e-9 * norm.max(1.0) {
        return Err(Error::invalid(format!(
            "matrix is not Hermitian (defect {defect:e})"
        )));
    }

    // Symmetrize: (m + m^H) / 2.
    let mut a = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        a[[i, i]] = Complex64::new(m[[i, i]].re, 0.0);
        for j in i + 1..n {
            let v = (m[[i, j]] + m[[j, i]].conj()) * 0.5;
            a[[i, j]] = v;
            a[[j, i]] = v.conj();
        }
    }
    let mut v = Array2::<Complex64>::eye(n);

    let tol = f64::EPSILON * norm.max(f64::MIN_POSITIVE);
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].re.total_cmp(&a[[i, i]].re));
    let values = order.iter().map(|&i| a[[i, i]].re).collect();
    let vectors = v.select(Axis(1), &order);
    Ok(HermitianEig { values, vectors })
}

/// Zeroes `a[p][q]` with the unitary `U = [[c, s e^{i phi}], [-s e^{-i phi}, c]]`,
/// where `phi = arg a[p][q]`, updating `a <- U^H a U` and `v <- v U`.
fn rotate(a: &mut Array2<Complex64>, v: &mut Array2<Complex64>, p: usize, q: usize) {
    let apq = a[[p, q]];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[[p, p]].re;
    let aqq = a[[q, q]].re;
    if mag < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[[p, q]] = Complex64::new(0.0, 0.0);
        a[[q, p]] = Complex64::new(0.0, 0.0);
        return;
    }
    let zeta = (aqq - app) / (2.0 * mag);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
    } else {
        -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let ph = apq / mag;
    let s_ph = ph * s; // s e^{i phi}
    let s_ph_conj = s_ph.conj(); // s e^{-i phi}
    let n = a.nrows();

    // a <- a U (columns p, q)
    for r in 0..n {
        let arp = a[[r, p]];
        let arq = a[[r, q]];
        a[[r, p]] = arp * c - arq * s_ph_conj;
        a[[r, q]] = arp * s_ph + arq * c;
    }
    // a <- U^H a (rows p, q)
    for col in 0..n {
        let apc = a[[p, col]];
        let aqc = a[[q, col]];
        a[[p, col]] = apc * c - aqc * s_ph;
        a[[q, col]] = apc * s_ph_conj + aqc * c;
    }
    a[[p, q]] = Complex64::new(0.0, 0.0);
    a[[q, p]] = Complex64::new(0.0, 0.0);
    a[[p, p]] = Complex64::new(a[[p, p]].re, 0.0);
    a[[q, q]] = Complex64::new(a[[q, q]].re, 0.0);

    for r in 0..n {
        let vrp = v[[r, p]];
        let vrq = v[[r, q]];
        v[[r, p]] = vrp * c - vrq * s_ph_conj;
        v[[r, q]] = vrp * s_ph + vrq * c;
    }
}

/// `m^H` for a complex matrix.
pub fn conj_transpose(m: &Array2<Complex64>) -> Array2<Complex64> {
    m.t().mapv(|z| z.conj())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> Array2<Complex64> {
        let b = Array2::from_shape_fn((n, n), |_| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        (&b + &conj_transpose(&b)).mapv(|z| z * 0.5)
    }

    fn check_decomposition(m: &Array2<Complex64>, eig: &HermitianEig) {
        let n = m.nrows();
        let norm = frobenius(m);
        for i in 0..n {
            let vi = eig.vectors.column(i);
            let mv = m.dot(&vi);
            let resid: f64 = mv
                .iter()
                .zip(vi.iter())
                .map(|(a, b)| (a - b * eig.values[i]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(resid < 1e-8 * norm.max(1.0), "residual {resid}");
        }
        let gram = conj_transpose(&eig.vectors).dot(&eig.vectors);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - c(want, 0.0)).norm() < 1e-8);
            }
        }
        assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let eig = hermitian_eig(&Array2::eye(4)).unwrap();
        assert_eq!(eig.values, vec![1.0; 4]);
    }

    #[test]
    fn diagonal_keeps_standard_basis() {
        let mut m = Array2::zeros((2, 2));
        m[[0, 0]] = c(1.0, 0.0);
        m[[1, 1]] = c(3.0, 0.0);
        let eig = hermitian_eig(&m).unwrap();
        assert_eq!(eig.values, vec![3.0, 1.0]);
        assert!((eig.vectors[[1, 0]].norm() - 1.0).abs() < 1e-15);
        assert!((eig.vectors[[0, 1]].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_complex_closed_form() {
        // [[2, i], [-i, 2]] has eigenvalues 3 and 1.
        let m = ndarray::arr2(&[[c(2.0, 0.0), c(0.0, 1.0)], [c(0.0, -1.0), c(2.0, 0.0)]]);
        let eig = hermitian_eig(&m).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
        check_decomposition(&m, &eig);
    }

    #[test]
    fn random_hermitian_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 3, 16, 30, 90] {
            let m = random_hermitian(&mut rng, n);
            let eig = hermitian_eig(&m).unwrap();
            check_decomposition(&m, &eig);
            // m = V diag(lambda) V^H
            let mut d = Array2::<Complex64>::zeros((n, n));
            for i in 0..n {
                d[[i, i]] = c(eig.values[i], 0.0);
            }
            let rebuilt = eig.vectors.dot(&d).dot(&conj_transpose(&eig.vectors));
            let err = frobenius(&(&rebuilt - &m));
            assert!(err < 1e-9 * frobenius(&m).max(1.0));
        }
    }

    #[test]
    fn psd_matrix_has_nonnegative_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = Array2::from_shape_fn((16, 4), |_| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let m = b.dot(&conj_transpose(&b));
        let eig = hermitian_eig(&m).unwrap();
        assert!(eig.values.iter().all(|&l| l >= -1e-10));
        assert!(eig.values[4] < 1e-10);
    }

    #[test]
    fn rejects_non_square_and_non_hermitian() {
        assert!(hermitian_eig(&Array2::zeros((2, 3))).is_err());
        let m = ndarray::arr2(&[[c(1.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
        assert!(hermitian_eig(&m).is_err());
        // Tiny asymmetry is tolerated and symmetrized away.
        let m = ndarray::arr2(&[[c(1.0, 0.0), c(0.5, 1e-12)], [c(0.5, 0.0), c(1.0, 0.0)]]);
        assert!(hermitian_eig(&m).is_ok());
    }
}
