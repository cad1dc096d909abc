//! Transmit and reflective beamformers.
//!
//! The rate is monotone in `x = (w^T R_S w*) (beta_r v^H R~_I v + beta_ba)`
//! and the two factors depend on disjoint variables, so each is maximized
//! on its own: `w` is the scaled conjugate of the dominant eigenvector of
//! `R_S`, and since `R~_I` is entrywise nonnegative a co-phased `v` attains
//! `v^H R~_I v = sum(R~_I) = ||R_I||_F^2`.

use std::f64::consts::TAU;

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{PathLossSet, SystemConfig};
use crate::correlation::{
    dominant_eigenpair, ula_correlation, upa_correlation, CVector, CorrelationMatrix, GridShape,
};
use crate::error::{Error, Result};
use crate::kgr::{kgr_closed_form, KgrReport};
use crate::probing::Beamformers;
use crate::rng::complex_normal;

/// Planar arrays up to this many elements get a full eigendecomposition when
/// computing the achieved value; larger ones use the Kronecker factors.
const FULL_EIGEN_LIMIT: usize = 1024;

/// `w = sqrt(P_A) conj(u_max)`, so that `w^T R_S w* = P_A lambda_max`.
pub fn optimal_transmit(r_s: &CorrelationMatrix, p_a: f64) -> Result<CVector> {
    if !(p_a > 0.0) {
        return Err(Error::invalid("p_a", format!("{p_a} must be > 0")));
    }
    let (_, u) = dominant_eigenpair(r_s)?;
    Ok(u.conjugate() * Complex::new(p_a.sqrt(), 0.0))
}

/// Co-phased reflection vector `v_n = e^{j theta}`.
pub fn optimal_reflection(n: usize, theta: f64) -> Result<CVector> {
    if n == 0 {
        return Err(Error::invalid("n", "RIS must have at least one element"));
    }
    if !(0.0..TAU).contains(&theta) {
        return Err(Error::invalid("theta", format!("{theta} is outside [0, 2pi)")));
    }
    Ok(CVector::from_element(n, Complex::from_polar(1.0, theta)))
}

/// Isotropic random direction scaled to `||w||^2 = P_A`.
pub fn random_transmit<R: Rng + ?Sized>(m: usize, p_a: f64, rng: &mut R) -> CVector {
    let w0 = CVector::from_fn(m, |_, _| complex_normal(rng, 1.0));
    let norm = w0.norm();
    w0 * Complex::new(p_a.sqrt() / norm, 0.0)
}

/// Phases drawn i.i.d. uniform on `[0, 2pi)`.
pub fn random_reflection<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (CVector, Vec<f64>) {
    let theta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
    let v = CVector::from_iterator(n, theta.iter().map(|&t| Complex::from_polar(1.0, t)));
    (v, theta)
}

/// Analytic sandwich on `w_opt^T R_S w_opt*` for a planar array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub shape: GridShape,
    pub rho: f64,
    pub p_a: f64,
    /// Rayleigh quotient of the all-ones vector, per dimension.
    pub f_lower: f64,
    /// All-ones quadratic form of the circulant extension, evaluated numerically.
    pub f_upper: f64,
    /// Closed form of the circulant row sum, `(1 + rho - 2 rho^N) / (1 - rho)` per dimension.
    pub f_upper_row_sum: f64,
    /// `(1 + rho)(1 - rho^(N-1)) / (1 - rho)` per dimension.
    pub f_upper_factored: f64,
    /// `(1 + rho^2)(1 - rho^(NH-1))(1 - rho^(NV-1)) / (1 - rho)^2`.
    pub f_upper_single_factor: f64,
    /// `P_A lambda_max(R_S)`.
    pub achieved: f64,
}

fn ula_lower(n: usize, rho: f64) -> f64 {
    let nf = n as f64;
    (nf * (1.0 - rho * rho) - 2.0 * rho * (1.0 - rho.powi(n as i32))) / (nf * (1.0 - rho).powi(2))
}

/// `(1 / (2N - 1)) 1^T C 1` where `C` is the `(2N-1)`-point circulant whose
/// leading `N x N` block is the Toeplitz ULA correlation.
pub fn circulant_upper(n: usize, rho: f64) -> f64 {
    let len = 2 * n - 1;
    let first_row: Vec<f64> = (0..len).map(|k| rho.powi(k.min(len - k) as i32)).collect();
    let c = DMatrix::from_fn(len, len, |i, j| first_row[(j + len - i) % len]);
    let ones = nalgebra::DVector::from_element(len, 1.0);
    (ones.transpose() * c * &ones)[(0, 0)] / len as f64
}

fn ula_row_sum(n: usize, rho: f64) -> f64 {
    (1.0 + rho - 2.0 * rho.powi(n as i32)) / (1.0 - rho)
}

fn ula_factored(n: usize, rho: f64) -> f64 {
    (1.0 + rho) * (1.0 - rho.powi(n as i32 - 1)) / (1.0 - rho)
}

pub fn lemma2_bounds(shape: GridShape, rho: f64, p_a: f64) -> Result<BoundsReport> {
    shape.validate()?;
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid("rho", format!("{rho} is outside [0, 1)")));
    }
    let (nh, nv) = (shape.horizontal, shape.vertical);
    let lambda = if shape.total() <= FULL_EIGEN_LIMIT {
        dominant_eigenpair(&upa_correlation(shape, rho)?)?.0
    } else {
        dominant_eigenpair(&ula_correlation(nh, rho)?)?.0
            * dominant_eigenpair(&ula_correlation(nv, rho)?)?.0
    };
    let single = (1.0 + rho * rho) * (1.0 - rho.powi(nh as i32 - 1)) * (1.0 - rho.powi(nv as i32 - 1))
        / (1.0 - rho).powi(2);
    Ok(BoundsReport {
        shape,
        rho,
        p_a,
        f_lower: p_a * ula_lower(nh, rho) * ula_lower(nv, rho),
        f_upper: p_a * circulant_upper(nh, rho) * circulant_upper(nv, rho),
        f_upper_row_sum: p_a * ula_row_sum(nh, rho) * ula_row_sum(nv, rho),
        f_upper_factored: p_a * ula_factored(nh, rho) * ula_factored(nv, rho),
        f_upper_single_factor: p_a * single,
        achieved: p_a * lambda,
    })
}

/// Optimal `(w, v)` and the resulting closed-form report.
pub fn joint_optimize(
    r_s: &CorrelationMatrix,
    r_i: &CorrelationMatrix,
    pl: &PathLossSet,
    config: &SystemConfig,
) -> Result<(Beamformers, KgrReport)> {
    let w = optimal_transmit(r_s, config.p_a)?;
    let theta = vec![0.0; r_i.dim()];
    let bf = Beamformers::from_phases(w, theta, config.p_a)?;
    let report = kgr_closed_form(r_s, r_i, &bf, pl, config)?;
    Ok((bf, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::{hadamard_self, ris_sinc_correlation, RisLayout};
    use crate::kgr::{reflection_gain, transmit_gain};
    use crate::rng::{substream, Domain};

    #[test]
    fn transmit_examples() {
        let id = CorrelationMatrix::identity(4).unwrap();
        let w = optimal_transmit(&id, 2.0).unwrap();
        assert!((transmit_gain(&id, &w).unwrap() - 2.0).abs() < 1e-12);
        assert!((w.norm_squared() - 2.0).abs() < 1e-12);

        let r = ula_correlation(2, 0.3).unwrap();
        let w = optimal_transmit(&r, 1.0).unwrap();
        assert!((transmit_gain(&r, &w).unwrap() - 1.3).abs() < 1e-12);
    }

    #[test]
    fn reflection_examples() {
        let id = CorrelationMatrix::identity(9).unwrap();
        let v = optimal_reflection(9, 0.0).unwrap();
        assert!((reflection_gain(&hadamard_self(&id), &v).unwrap() - 9.0).abs() < 1e-12);

        let layout = RisLayout::with_spacing_fraction(GridShape::square(8).unwrap(), 0.25, 0.1).unwrap();
        let r_i = ris_sinc_correlation(&layout).unwrap();
        let v = optimal_reflection(64, 1.0).unwrap();
        let t = reflection_gain(&hadamard_self(&r_i), &v).unwrap();
        assert!((t - r_i.frobenius_sq()).abs() < 1e-9 * t);

        assert!(optimal_reflection(0, 0.0).is_err());
        assert!(optimal_reflection(3, TAU).is_err());
    }

    #[test]
    fn random_beamformers_are_feasible() {
        let mut rng = substream(0, Domain::Auxiliary, 0);
        for _ in 0..100 {
            let w = random_transmit(16, 0.1, &mut rng);
            assert!((w.norm_squared() - 0.1).abs() < 1e-15);
            let (v, theta) = random_reflection(10, &mut rng);
            assert!(theta.iter().all(|t| (0.0..TAU).contains(t)));
            assert!(v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn circulant_matches_row_sum() {
        for n in [1, 2, 3, 8, 31] {
            for rho in [0.0, 0.3, 0.9] {
                let exact = circulant_upper(n, rho);
                assert!((exact - ula_row_sum(n, rho)).abs() < 1e-12, "n={n} rho={rho}");
            }
        }
    }

    #[test]
    fn bounds_at_zero_correlation() {
        let b = lemma2_bounds(GridShape::new(3, 5).unwrap(), 0.0, 0.7).unwrap();
        assert!((b.f_lower - 0.7).abs() < 1e-12);
        assert!((b.f_upper - 0.7).abs() < 1e-12);
        assert!((b.achieved - 0.7).abs() < 1e-12);
        assert!(lemma2_bounds(GridShape::square(2).unwrap(), 1.0, 1.0).is_err());
    }
}
