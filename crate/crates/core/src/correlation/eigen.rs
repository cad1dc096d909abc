//! Cyclic Jacobi eigensolver for complex Hermitian matrices.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

/// Off-diagonal mass, relative to the Frobenius norm, below which a sweep
/// sequence is considered converged.
const OFF_DIAGONAL_TOL: f64 = 1e-15;

/// Rotation budget per matrix dimension.
const ROTATIONS_PER_DIM: usize = 10_000;

/// Eigendecomposition `A = V diag(values) V^H` with eigenvalues sorted in
/// descending order and orthonormal eigenvectors as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex<f64>>,
}

/// Diagonalize a Hermitian matrix. Only the Hermitian part of `a` is used.
pub fn hermitian_eigen(a: &DMatrix<Complex<f64>>) -> Result<HermitianEigen> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "hermitian_eigen (square)",
            expected: n,
            actual: a.ncols(),
        });
    }
    let mut m = a.clone();
    // Symmetrize so round-off asymmetry in the input cannot stall the sweep.
    for j in 0..n {
        m[(j, j)] = Complex::new(m[(j, j)].re, 0.0);
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    let mut v = DMatrix::<Complex<f64>>::identity(n, n);

    let frob = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let budget = ROTATIONS_PER_DIM.saturating_mul(n.max(1));
    let mut rotations = 0usize;

    loop {
        let off = off_diagonal_norm(&m);
        if off <= OFF_DIAGONAL_TOL * frob || off == 0.0 {
            break;
        }
        if rotations >= budget {
            return Err(Error::EigenSolver(format!(
                "off-diagonal norm {off:e} after {rotations} rotations (dimension {n})"
            )));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                rotations += 1;
                rotate(&mut m, &mut v, p, q, apq / r, r);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    // Stable sort keeps ties in index order, which makes degenerate
    // eigenvectors deterministic.
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));

    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

fn off_diagonal_norm(m: &DMatrix<Complex<f64>>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                s += m[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Zero `m[(p, q)]` with a unitary plane rotation and accumulate it into `v`.
///
/// The rotation is `D R` where `D = diag(1, conj(phase))` on the (p, q) plane
/// makes the pivot real and `R` is the classic real Jacobi rotation.
fn rotate(
    m: &mut DMatrix<Complex<f64>>,
    v: &mut DMatrix<Complex<f64>>,
    p: usize,
    q: usize,
    phase: Complex<f64>,
    r: f64,
) {
    let n = m.nrows();
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;

    let theta = (aqq - app) / (2.0 * r);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let ph_conj = phase.conj();
    // Column and row q pick up the phase: m <- D^H m D with D_qq = conj(phase).
    for k in 0..n {
        m[(k, q)] *= ph_conj;
    }
    for k in 0..n {
        m[(q, k)] *= phase;
    }
    for k in 0..n {
        v[(k, q)] *= ph_conj;
    }

    // Real rotation R with R_pp = R_qq = c, R_qp = -s, R_pq = s.
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = mkp * c - mkq * s;
        m[(k, q)] = mkp * s + mkq * c;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = mpk * c - mqk * s;
        m[(q, k)] = mpk * s + mqk * c;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * s;
        v[(k, q)] = vkp * s + vkq * c;
    }

    m[(p, q)] = Complex::new(0.0, 0.0);
    m[(q, p)] = Complex::new(0.0, 0.0);
    m[(p, p)] = Complex::new(app - t * r, 0.0);
    m[(q, q)] = Complex::new(aqq + t * r, 0.0);
}
