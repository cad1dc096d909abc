//! Spatial correlation matrices for the base-station array and the RIS.
//!
//! Base-station correlation follows the exponential Toeplitz model per linear
//! array, with planar arrays approximated by a Kronecker product of a
//! horizontal and a vertical linear array. RIS correlation follows the
//! isotropic-scattering sinc kernel evaluated on the element lattice.

mod eigen;

use std::fmt::Write as _;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use eigen::{hermitian_eigen, HermitianEigen};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex<f64>>;
pub type CVector = DVector<Complex<f64>>;

/// Tolerance for the Hermitian and unit-diagonal invariants.
pub const STRUCTURE_TOL: f64 = 1e-12;
/// Eigenvalues down to this value are treated as numerical zeros.
pub const PSD_TOL: f64 = -1e-10;
/// Largest dimension a planar array may expand to.
pub const MAX_DIM: usize = 1 << 16;
/// Residual bound `||R u - lambda u||` accepted for a dominant eigenpair.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelationKind {
    UlaToeplitz,
    UpaKronecker,
    RisSinc,
    Identity,
    Custom,
}

/// Element counts of a rectangular array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    pub horizontal: usize,
    pub vertical: usize,
}

impl GridShape {
    pub fn new(horizontal: usize, vertical: usize) -> Result<Self> {
        let shape = GridShape {
            horizontal,
            vertical,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn square(side: usize) -> Result<Self> {
        Self::new(side, side)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizontal == 0 || self.vertical == 0 {
            return Err(Error::invalid(
                "grid",
                format!("{}x{} has a zero dimension", self.horizontal, self.vertical),
            ));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.horizontal * self.vertical
    }
}

impl std::fmt::Display for GridShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.horizontal, self.vertical)
    }
}

/// Planar RIS lattice. Elements are indexed row-major: element
/// `row * horizontal + col` sits at `(col * spacing, row * spacing, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RisLayout {
    pub grid: GridShape,
    /// Element pitch in meters.
    pub spacing: f64,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
}

impl RisLayout {
    pub fn new(grid: GridShape, spacing: f64, wavelength: f64) -> Result<Self> {
        let layout = RisLayout {
            grid,
            spacing,
            wavelength,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Layout with the pitch given as a fraction of the wavelength.
    pub fn with_spacing_fraction(grid: GridShape, fraction: f64, wavelength: f64) -> Result<Self> {
        Self::new(grid, fraction * wavelength, wavelength)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::invalid("spacing", format!("{} must be > 0", self.spacing)));
        }
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::invalid(
                "wavelength",
                format!("{} must be > 0", self.wavelength),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.grid.total()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.len());
        for row in 0..self.grid.vertical {
            for col in 0..self.grid.horizontal {
                out.push([col as f64 * self.spacing, row as f64 * self.spacing, 0.0]);
            }
        }
        out
    }
}

/// Hermitian PSD correlation matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: CMatrix,
    kind: CorrelationKind,
}

impl CorrelationMatrix {
    /// Wrap a user-supplied matrix after checking every invariant.
    pub fn custom(entries: CMatrix) -> Result<Self> {
        let corr = CorrelationMatrix {
            entries,
            kind: CorrelationKind::Custom,
        };
        corr.check_invariants()?;
        Ok(corr)
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "dimension must be >= 1"));
        }
        Ok(CorrelationMatrix {
            entries: CMatrix::identity(n, n),
            kind: CorrelationKind::Identity,
        })
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn kind(&self) -> CorrelationKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|z| z.im == 0.0)
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Hermitian within 1e-12, unit diagonal within 1e-12, and minimum
    /// eigenvalue at least -1e-10.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.entries.nrows();
        if n == 0 {
            return Err(Error::invalid("entries", "empty matrix"));
        }
        if self.entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "correlation matrix (square)",
                expected: n,
                actual: self.entries.ncols(),
            });
        }
        let mut deviation: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let d = (self.entries[(i, j)] - self.entries[(j, i)].conj()).norm();
                deviation = deviation.max(d);
            }
        }
        if deviation > STRUCTURE_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        for i in 0..n {
            let d = self.entries[(i, i)];
            if (d - Complex::new(1.0, 0.0)).norm() > STRUCTURE_TOL {
                return Err(Error::NonUnitDiagonal {
                    index: i,
                    value: d.re,
                });
            }
        }
        let min = min_eigenvalue(&self.entries)?;
        if min < PSD_TOL {
            return Err(Error::NotPositiveSemidefinite {
                min_eigenvalue: min,
            });
        }
        Ok(())
    }

    /// Row-major CSV, one line per row, each entry written as `re,im`.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut out = String::new();
        for i in 0..n {
            for j in 0..n {
                if j > 0 {
                    out.push(',');
                }
                let z = self.entries[(i, j)];
                let _ = write!(out, "{:e},{:e}", z.re, z.im);
            }
            out.push('\n');
        }
        out
    }

    /// Parse the CSV written by [`CorrelationMatrix::to_csv`] as a custom matrix.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<Complex<f64>>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let nums = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::invalid("csv", format!("line {}: {e}", lineno + 1)))?;
            if nums.len() % 2 != 0 {
                return Err(Error::invalid(
                    "csv",
                    format!("line {}: odd number of values", lineno + 1),
                ));
            }
            rows.push(nums.chunks(2).map(|p| Complex::new(p[0], p[1])).collect());
        }
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::invalid(
                "csv",
                format!("row {} has {} entries, expected {n}", i + 1, r.len()),
            ));
        }
        Self::custom(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

fn min_eigenvalue(m: &CMatrix) -> Result<f64> {
    Ok(hermitian_eigen(m)?
        .values
        .last()
        .copied()
        .unwrap_or(0.0))
}

/// `sin(pi x) / (pi x)` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

fn validate_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid("rho", format!("{rho} is outside [0, 1)")));
    }
    Ok(())
}

/// Exponential-correlation linear array: entry `(i, j)` is `rho^|i-j|`.
pub fn ula_correlation(n: usize, rho: f64) -> Result<CorrelationMatrix> {
    validate_rho(rho)?;
    if n == 0 {
        return Err(Error::invalid("n", "array size must be >= 1"));
    }
    if rho == 0.0 {
        return Ok(CorrelationMatrix {
            entries: CMatrix::identity(n, n),
            kind: CorrelationKind::UlaToeplitz,
        });
    }
    let powers: Vec<f64> = (0..n).map(|k| rho.powi(k as i32)).collect();
    let entries = CMatrix::from_fn(n, n, |i, j| Complex::new(powers[i.abs_diff(j)], 0.0));
    Ok(CorrelationMatrix {
        entries,
        kind: CorrelationKind::UlaToeplitz,
    })
}

/// Planar array correlation `R_h (x) R_v`.
pub fn upa_correlation(shape: GridShape, rho: f64) -> Result<CorrelationMatrix> {
    shape.validate()?;
    validate_rho(rho)?;
    let total = shape
        .horizontal
        .checked_mul(shape.vertical)
        .filter(|&t| t <= MAX_DIM)
        .ok_or_else(|| Error::invalid("grid", format!("{shape} exceeds {MAX_DIM} elements")))?;
    if rho == 0.0 || total == 1 {
        return Ok(CorrelationMatrix {
            entries: CMatrix::identity(total, total),
            kind: CorrelationKind::UpaKronecker,
        });
    }
    let h = ula_correlation(shape.horizontal, rho)?;
    let v = ula_correlation(shape.vertical, rho)?;
    Ok(CorrelationMatrix {
        entries: h.entries.kronecker(&v.entries),
        kind: CorrelationKind::UpaKronecker,
    })
}

/// Isotropic-scattering RIS correlation: `sinc(2 |u_n - u_m| / lambda)`.
pub fn ris_sinc_correlation(layout: &RisLayout) -> Result<CorrelationMatrix> {
    layout.validate()?;
    let pos = layout.positions();
    let n = pos.len();
    let mut entries = CMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = ((pos[i][0] - pos[j][0]).powi(2)
                + (pos[i][1] - pos[j][1]).powi(2)
                + (pos[i][2] - pos[j][2]).powi(2))
            .sqrt();
            let c = Complex::new(sinc(2.0 * d / layout.wavelength), 0.0);
            entries[(i, j)] = c;
            entries[(j, i)] = c;
        }
    }
    Ok(CorrelationMatrix {
        entries,
        kind: CorrelationKind::RisSinc,
    })
}

/// `R^T o R`, the matrix driving the reflection quadratic form. For Hermitian
/// input every entry equals `|R_ij|^2`.
pub fn hadamard_self(corr: &CorrelationMatrix) -> DMatrix<f64> {
    let r = &corr.entries;
    DMatrix::from_fn(r.nrows(), r.ncols(), |i, j| (r[(j, i)] * r[(i, j)]).re)
}

/// Hermitian PSD square root through the eigendecomposition.
pub fn matrix_sqrt(corr: &CorrelationMatrix) -> Result<CMatrix> {
    let eig = hermitian_eigen(&corr.entries)?;
    let min = eig.values.last().copied().unwrap_or(0.0);
    if min < PSD_TOL {
        return Err(Error::NotPositiveSemidefinite {
            min_eigenvalue: min,
        });
    }
    let n = corr.dim();
    let roots: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let scaled = CMatrix::from_fn(n, n, |i, k| eig.vectors[(i, k)] * roots[k]);
    let mut s = &scaled * eig.vectors.adjoint();
    // Exact Hermitian symmetry, and exactly real output for real input.
    let real = corr.is_real();
    for j in 0..n {
        for i in j..n {
            let z = 0.5 * (s[(i, j)] + s[(j, i)].conj());
            let z = if real { Complex::new(z.re, 0.0) } else { z };
            s[(i, j)] = z;
            s[(j, i)] = z.conj();
        }
    }
    Ok(s)
}

/// Largest eigenvalue and its unit eigenvector, with the first nonzero
/// component rotated onto the positive real axis.
pub fn dominant_eigenpair(corr: &CorrelationMatrix) -> Result<(f64, CVector)> {
    dominant_eigenpair_of(&corr.entries)
}

pub(crate) fn dominant_eigenpair_of(m: &CMatrix) -> Result<(f64, CVector)> {
    let eig = hermitian_eigen(m)?;
    let lambda = eig.values[0];
    let mut u: CVector = eig.vectors.column(0).into_owned();
    let norm = u.norm();
    u /= Complex::new(norm, 0.0);

    let threshold = 1e-12;
    if let Some(k) = u.iter().position(|z| z.norm() > threshold) {
        let phase = u[k].conj() / u[k].norm();
        u *= phase;
        u[k] = Complex::new(u[k].re, 0.0);
    }

    let residual = (m * &u - &u * Complex::new(lambda, 0.0)).norm();
    if residual > EIGEN_RESIDUAL_TOL {
        return Err(Error::EigenSolver(format!(
            "dominant eigenpair residual {residual:e} exceeds {EIGEN_RESIDUAL_TOL:e}"
        )));
    }
    Ok((lambda, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn real_entries(c: &CorrelationMatrix) -> DMatrix<f64> {
        c.entries().map(|z| z.re)
    }

    fn dense_lambda_max(c: &CorrelationMatrix) -> f64 {
        SymmetricEigen::new(real_entries(c)).eigenvalues.max()
    }

    #[test]
    fn ula_examples() {
        let r = ula_correlation(2, 0.0).unwrap();
        assert_eq!(r.entries(), &CMatrix::identity(2, 2));

        let r = ula_correlation(3, 0.5).unwrap();
        let expect = [[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]];
        for (i, row) in expect.iter().enumerate() {
            for (j, &e) in row.iter().enumerate() {
                assert_eq!(r.entries()[(i, j)].re, e);
            }
        }
        r.check_invariants().unwrap();

        let r = ula_correlation(2, 0.3).unwrap();
        assert!((dense_lambda_max(&r) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn ula_rejects_bad_input() {
        assert!(ula_correlation(0, 0.3).is_err());
        assert!(ula_correlation(3, -0.1).is_err());
        assert!(ula_correlation(3, 1.0).is_err());
    }

    #[test]
    fn upa_examples() {
        let r = upa_correlation(GridShape::new(1, 1).unwrap(), 0.7).unwrap();
        assert_eq!(r.dim(), 1);
        assert_eq!(r.entries()[(0, 0)], Complex::new(1.0, 0.0));

        let r = upa_correlation(GridShape::square(2).unwrap(), 0.0).unwrap();
        assert_eq!(r.entries(), &CMatrix::identity(4, 4));

        let r = upa_correlation(GridShape::square(2).unwrap(), 0.3).unwrap();
        assert!((dense_lambda_max(&r) - 1.69).abs() < 1e-12);
        r.check_invariants().unwrap();
    }

    #[test]
    fn upa_dimension_guard() {
        let err = upa_correlation(GridShape::new(300, 300).unwrap(), 0.3);
        assert!(err.is_err());
    }

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(1.0).abs() < 1e-15);
        assert!((sinc(0.5) - 2.0 / std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn ris_sinc_examples() {
        let lambda = 0.1;
        let half = RisLayout::with_spacing_fraction(GridShape::square(2).unwrap(), 0.5, lambda).unwrap();
        let r = ris_sinc_correlation(&half).unwrap();
        // element 0 at (0,0), 1 at (d,0), 2 at (0,d), 3 at (d,d)
        assert!(r.entries()[(0, 1)].re.abs() < 1e-15);
        assert!(r.entries()[(0, 2)].re.abs() < 1e-15);
        let diag = 2f64.sqrt();
        let expect = (diag * std::f64::consts::PI).sin() / (diag * std::f64::consts::PI);
        assert!((r.entries()[(0, 3)].re - expect).abs() < 1e-12);
        assert!((r.entries()[(0, 3)].re - (-0.216_954_294_377_476)).abs() < 1e-12);
        r.check_invariants().unwrap();

        let quarter = RisLayout::with_spacing_fraction(GridShape::new(2, 1).unwrap(), 0.25, lambda).unwrap();
        let r = ris_sinc_correlation(&quarter).unwrap();
        assert!((r.entries()[(0, 1)].re - std::f64::consts::FRAC_2_PI).abs() < 1e-12);
    }

    #[test]
    fn ris_layout_is_row_major() {
        let layout = RisLayout::new(GridShape::new(3, 2).unwrap(), 0.05, 0.1).unwrap();
        let p = layout.positions();
        assert_eq!(p.len(), 6);
        assert_eq!(p[1], [0.05, 0.0, 0.0]);
        assert_eq!(p[3], [0.0, 0.05, 0.0]);
        assert!(RisLayout::new(GridShape::new(3, 2).unwrap(), 0.0, 0.1).is_err());
        assert!(RisLayout::new(GridShape::new(3, 2).unwrap(), 0.05, -1.0).is_err());
    }

    #[test]
    fn hadamard_examples() {
        let id = CorrelationMatrix::identity(3).unwrap();
        assert_eq!(hadamard_self(&id), DMatrix::identity(3, 3));

        let r = ula_correlation(2, 0.5).unwrap();
        let h = hadamard_self(&r);
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[1.0, 0.25, 0.25, 1.0]));
        assert!((h.sum() - r.frobenius_sq()).abs() < 1e-12);
    }

    #[test]
    fn sqrt_round_trip() {
        let id = CorrelationMatrix::identity(4).unwrap();
        let s = matrix_sqrt(&id).unwrap();
        assert!((s - CMatrix::identity(4, 4)).norm() < 1e-14);

        let r = ula_correlation(2, 0.5).unwrap();
        let s = matrix_sqrt(&r).unwrap();
        assert!((&s * &s - r.entries()).norm() / r.entries().norm() < 1e-10);

        let layout = RisLayout::with_spacing_fraction(GridShape::square(8).unwrap(), 0.25, 0.1).unwrap();
        let r = ris_sinc_correlation(&layout).unwrap();
        let s = matrix_sqrt(&r).unwrap();
        assert!((&s * &s - r.entries()).norm() / r.entries().norm() < 1e-10);
        assert!(s.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn custom_rejects_invalid() {
        let not_psd = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex::new(1.0, 0.0),
                Complex::new(2.0, 0.0),
                Complex::new(2.0, 0.0),
                Complex::new(1.0, 0.0),
            ],
        );
        assert!(matches!(
            CorrelationMatrix::custom(not_psd),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
        let not_herm = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex::new(1.0, 0.0),
                Complex::new(0.2, 0.1),
                Complex::new(0.2, 0.1),
                Complex::new(1.0, 0.0),
            ],
        );
        assert!(matches!(
            CorrelationMatrix::custom(not_herm),
            Err(Error::NotHermitian { .. })
        ));
        let bad_diag = CMatrix::identity(2, 2) * Complex::new(2.0, 0.0);
        assert!(matches!(
            CorrelationMatrix::custom(bad_diag),
            Err(Error::NonUnitDiagonal { .. })
        ));
    }

    #[test]
    fn custom_complex_hermitian_accepted() {
        let c = Complex::new(0.3, 0.4);
        let m = CMatrix::from_row_slice(2, 2, &[Complex::new(1.0, 0.0), c, c.conj(), Complex::new(1.0, 0.0)]);
        let r = CorrelationMatrix::custom(m).unwrap();
        let (lambda, u) = dominant_eigenpair(&r).unwrap();
        assert!((lambda - 1.5).abs() < 1e-12);
        assert_eq!(u[0].im, 0.0);
        assert!(u[0].re > 0.0);
        let s = matrix_sqrt(&r).unwrap();
        assert!((&s * &s - r.entries()).norm() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let r = ula_correlation(3, 0.4).unwrap();
        let parsed = CorrelationMatrix::from_csv(&r.to_csv()).unwrap();
        assert_eq!(parsed.entries(), r.entries());
        assert_eq!(parsed.kind(), CorrelationKind::Custom);
        assert!(CorrelationMatrix::from_csv("1,0,0\n").is_err());
    }

    #[test]
    fn dominant_eigenpair_examples() {
        let (l, u) = dominant_eigenpair(&CorrelationMatrix::identity(5).unwrap()).unwrap();
        assert_eq!(l, 1.0);
        assert!((u.norm() - 1.0).abs() < 1e-15);

        let (l, u) = dominant_eigenpair(&ula_correlation(2, 0.3).unwrap()).unwrap();
        assert!((l - 1.3).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((u[0] - Complex::new(h, 0.0)).norm() < 1e-14);
        assert!((u[1] - Complex::new(h, 0.0)).norm() < 1e-14);

        let r = upa_correlation(GridShape::square(4).unwrap(), 0.3).unwrap();
        let (l, _) = dominant_eigenpair(&r).unwrap();
        assert!((l - dense_lambda_max(&r)).abs() < 1e-9);
    }
}
