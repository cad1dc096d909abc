//! System geometry, path loss and Kronecker-model channel sampling.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::correlation::{
    matrix_sqrt, ris_sinc_correlation, upa_correlation, CMatrix, CVector, CorrelationMatrix,
    GridShape, RisLayout,
};
use crate::error::{Error, Result};
use crate::rng::complex_normal;

/// Convert dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Convert a dB ratio to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// How a link's path-loss coefficient is formed from distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathLossConvention {
    /// `beta = sqrt(zeta0 d^-alpha)`, then scaled by `beta^(1/2)` in the
    /// channel model. Default; reproduces the published curves.
    #[default]
    Root,
    /// `beta = zeta0 d^-alpha`.
    Linear,
}

/// Node positions (meters) and large-scale propagation constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub alice: [f64; 2],
    pub bob: [f64; 2],
    pub ris: [f64; 2],
    pub eve: Option<[f64; 2]>,
    /// Exponent of the direct links (Alice-Bob, and every direct link to Eve).
    pub alpha_ba: f64,
    pub alpha_ar: f64,
    /// Exponent of RIS-Bob, also used for RIS-Eve.
    pub alpha_br: f64,
    /// Path loss at 1 m, linear.
    pub zeta0: f64,
    pub convention: PathLossConvention,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            alice: [0.0, 0.0],
            bob: [70.0, 0.0],
            ris: [50.0, 10.0],
            eve: None,
            alpha_ba: 4.0,
            alpha_ar: 2.0,
            alpha_br: 2.0,
            zeta0: db_to_linear(-30.0),
            convention: PathLossConvention::Root,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let mut nodes = vec![("alice", self.alice), ("bob", self.bob), ("ris", self.ris)];
        if let Some(e) = self.eve {
            nodes.push(("eve", e));
        }
        for (name, p) in &nodes {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::invalid("geometry", format!("{name} position is not finite")));
            }
        }
        for (i, a) in nodes.iter().enumerate() {
            for b in &nodes[i + 1..] {
                if distance(a.1, b.1) == 0.0 {
                    return Err(Error::CoincidentNodes { a: a.0, b: b.0 });
                }
            }
        }
        for (name, alpha) in [
            ("alpha_ba", self.alpha_ba),
            ("alpha_ar", self.alpha_ar),
            ("alpha_br", self.alpha_br),
        ] {
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(Error::invalid(name, format!("{alpha} must be > 0")));
            }
        }
        if !(self.zeta0.is_finite() && self.zeta0 > 0.0) {
            return Err(Error::invalid("zeta0", format!("{} must be > 0", self.zeta0)));
        }
        Ok(())
    }

    fn link(&self, d: f64, alpha: f64) -> f64 {
        let power = self.zeta0 * d.powf(-alpha);
        match self.convention {
            PathLossConvention::Root => power.sqrt(),
            PathLossConvention::Linear => power,
        }
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Path-loss coefficients of every link toward Eve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvePathLoss {
    pub beta_ae: f64,
    pub beta_re: f64,
    pub beta_be: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossSet {
    pub beta_ba: f64,
    pub beta_ar: f64,
    pub beta_br: f64,
    pub eve: Option<EvePathLoss>,
}

impl PathLossSet {
    /// Cascaded RIS link coefficient `beta_ar * beta_br`.
    pub fn beta_r(&self) -> f64 {
        self.beta_ar * self.beta_br
    }

    /// The same links with the RIS removed.
    pub fn without_ris(&self) -> Self {
        PathLossSet {
            beta_ar: 0.0,
            beta_br: 0.0,
            ..*self
        }
    }
}

pub fn path_losses(geometry: &Geometry) -> Result<PathLossSet> {
    geometry.validate()?;
    let g = geometry;
    let eve = g.eve.map(|e| EvePathLoss {
        beta_ae: g.link(distance(g.alice, e), g.alpha_ba),
        beta_re: g.link(distance(g.ris, e), g.alpha_br),
        beta_be: g.link(distance(g.bob, e), g.alpha_ba),
    });
    Ok(PathLossSet {
        beta_ba: g.link(distance(g.alice, g.bob), g.alpha_ba),
        beta_ar: g.link(distance(g.alice, g.ris), g.alpha_ar),
        beta_br: g.link(distance(g.bob, g.ris), g.alpha_br),
        eve,
    })
}

/// Everything needed to build correlation matrices and simulate probing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub bs_grid: GridShape,
    pub ris_layout: RisLayout,
    /// Eve's antenna count; zero disables Eve entirely.
    pub eve_antennas: usize,
    /// Base-station correlation index.
    pub rho: f64,
    /// Alice's power budget, watts.
    pub p_a: f64,
    /// Bob's transmit power, watts.
    pub p_b: f64,
    /// Noise variance at Alice, watts. Also used at Bob and Eve unless overridden.
    pub sigma2: f64,
    pub sigma2_bob: Option<f64>,
    pub sigma2_eve: Option<f64>,
    pub geometry: Geometry,
}

impl Default for SystemConfig {
    /// 4x4 BS array with rho = 0.3, 8x8 RIS at half-wavelength pitch,
    /// P = 20 dBm and noise at -80 dBm.
    fn default() -> Self {
        SystemConfig {
            bs_grid: GridShape {
                horizontal: 4,
                vertical: 4,
            },
            ris_layout: RisLayout {
                grid: GridShape {
                    horizontal: 8,
                    vertical: 8,
                },
                spacing: 0.05,
                wavelength: 0.1,
            },
            eve_antennas: 0,
            rho: 0.3,
            p_a: dbm_to_watts(20.0),
            p_b: dbm_to_watts(20.0),
            sigma2: dbm_to_watts(-80.0),
            sigma2_bob: None,
            sigma2_eve: None,
            geometry: Geometry::default(),
        }
    }
}

impl SystemConfig {
    pub fn m(&self) -> usize {
        self.bs_grid.total()
    }

    pub fn n(&self) -> usize {
        self.ris_layout.len()
    }

    pub fn noise_alice(&self) -> f64 {
        self.sigma2
    }

    pub fn noise_bob(&self) -> f64 {
        self.sigma2_bob.unwrap_or(self.sigma2)
    }

    pub fn noise_eve(&self) -> f64 {
        self.sigma2_eve.unwrap_or(self.sigma2)
    }

    pub fn validate(&self) -> Result<()> {
        self.bs_grid.validate()?;
        self.ris_layout.validate()?;
        self.geometry.validate()?;
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::invalid("rho", format!("{} is outside [0, 1)", self.rho)));
        }
        for (name, p) in [("p_a", self.p_a), ("p_b", self.p_b)] {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::invalid(name, format!("{p} must be > 0")));
            }
        }
        for (name, s) in [
            ("sigma2", Some(self.sigma2)),
            ("sigma2_bob", self.sigma2_bob),
            ("sigma2_eve", self.sigma2_eve),
        ] {
            if let Some(s) = s {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::invalid(name, format!("{s} must be > 0")));
                }
            }
        }
        if self.eve_antennas > 0 && self.geometry.eve.is_none() {
            return Err(Error::invalid(
                "eve_antennas",
                "Eve has antennas but no position",
            ));
        }
        Ok(())
    }

    /// `R_S` for the configured planar array.
    pub fn bs_correlation(&self) -> Result<CorrelationMatrix> {
        upa_correlation(self.bs_grid, self.rho)
    }

    /// `R_I` from the sinc kernel on the configured lattice.
    pub fn ris_correlation(&self) -> Result<CorrelationMatrix> {
        ris_sinc_correlation(&self.ris_layout)
    }
}

/// Eve's channels: RIS-Eve `K x N`, Alice-Eve `K x M`, Bob-Eve `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct EveChannels {
    pub g_re: CMatrix,
    pub h_ae: CMatrix,
    pub h_eb: CVector,
}

/// One draw of the reciprocal channels. Reverse directions are transposes of
/// the stored ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// RIS to Alice, `M x N`.
    pub g_ra: CMatrix,
    /// Bob to RIS, `N`.
    pub h_br: CVector,
    /// Bob to Alice, `M`.
    pub h_ba: CVector,
    pub eve: Option<EveChannels>,
}

impl ChannelRealization {
    pub fn g_ar(&self) -> CMatrix {
        self.g_ra.transpose()
    }

    pub fn h_rb(&self) -> &CVector {
        &self.h_br
    }

    pub fn h_ab(&self) -> &CVector {
        &self.h_ba
    }

    pub fn m(&self) -> usize {
        self.g_ra.nrows()
    }

    pub fn n(&self) -> usize {
        self.g_ra.ncols()
    }
}

/// Square-root factor kept real when the correlation matrix is real.
#[derive(Debug, Clone)]
enum Factor {
    Real(DMatrix<f64>),
    Complex(CMatrix),
}

impl Factor {
    fn new(corr: &CorrelationMatrix) -> Result<Self> {
        let s = matrix_sqrt(corr)?;
        Ok(if s.iter().all(|z| z.im == 0.0) {
            Factor::Real(s.map(|z| z.re))
        } else {
            Factor::Complex(s)
        })
    }

    fn dim(&self) -> usize {
        match self {
            Factor::Real(m) => m.nrows(),
            Factor::Complex(m) => m.nrows(),
        }
    }

    fn to_complex(&self) -> CMatrix {
        match self {
            Factor::Real(m) => m.map(|x| Complex::new(x, 0.0)),
            Factor::Complex(m) => m.clone(),
        }
    }

    fn apply(&self, x: &CVector) -> CVector {
        match self {
            Factor::Real(m) => {
                let re = m * x.map(|z| z.re);
                let im = m * x.map(|z| z.im);
                CVector::from_fn(re.len(), |i, _| Complex::new(re[i], im[i]))
            }
            Factor::Complex(m) => m * x,
        }
    }
}

/// Precomputed square roots and path losses for repeated channel draws.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    sqrt_s: Factor,
    sqrt_i: Factor,
    sqrt_s_t: CMatrix,
    sqrt_i_t: CMatrix,
    pl: PathLossSet,
    eve_antennas: usize,
}

impl ChannelSampler {
    pub fn new(config: &SystemConfig, r_s: &CorrelationMatrix, r_i: &CorrelationMatrix) -> Result<Self> {
        let pl = path_losses(&config.geometry)?;
        Self::with_path_losses(config, r_s, r_i, pl)
    }

    pub fn with_path_losses(
        config: &SystemConfig,
        r_s: &CorrelationMatrix,
        r_i: &CorrelationMatrix,
        pl: PathLossSet,
    ) -> Result<Self> {
        if r_s.dim() != config.m() {
            return Err(Error::DimensionMismatch {
                context: "R_S vs BS array",
                expected: config.m(),
                actual: r_s.dim(),
            });
        }
        if r_i.dim() != config.n() {
            return Err(Error::DimensionMismatch {
                context: "R_I vs RIS lattice",
                expected: config.n(),
                actual: r_i.dim(),
            });
        }
        if config.eve_antennas > 0 && pl.eve.is_none() {
            return Err(Error::invalid("eve_antennas", "Eve has antennas but no position"));
        }
        let sqrt_s = Factor::new(r_s)?;
        let sqrt_i = Factor::new(r_i)?;
        let sqrt_s_t = sqrt_s.to_complex().transpose();
        let sqrt_i_t = sqrt_i.to_complex().transpose();
        Ok(ChannelSampler {
            sqrt_s,
            sqrt_i,
            sqrt_s_t,
            sqrt_i_t,
            pl,
            eve_antennas: config.eve_antennas,
        })
    }

    pub fn path_losses(&self) -> &PathLossSet {
        &self.pl
    }

    /// Draw one realization. Variates are consumed in a fixed order: the
    /// `M x N` core of `G_ra` column by column, then Bob-RIS, then Bob-Alice,
    /// then Eve's channels when enabled.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let m = self.sqrt_s.dim();
        let n = self.sqrt_i.dim();
        let amp_ar = self.pl.beta_ar.sqrt();

        let g_ra = match (&self.sqrt_s, &self.sqrt_i) {
            (Factor::Real(s), Factor::Real(i)) => {
                let mut re = DMatrix::<f64>::zeros(m, n);
                let mut im = DMatrix::<f64>::zeros(m, n);
                for c in 0..n {
                    for r in 0..m {
                        let z = complex_normal(rng, 1.0);
                        re[(r, c)] = z.re;
                        im[(r, c)] = z.im;
                    }
                }
                let re = s * re * i;
                let im = s * im * i;
                CMatrix::from_fn(m, n, |r, c| Complex::new(amp_ar * re[(r, c)], amp_ar * im[(r, c)]))
            }
            _ => {
                let core = CMatrix::from_fn(m, n, |_, _| complex_normal(rng, 1.0));
                self.sqrt_s.to_complex() * core * self.sqrt_i.to_complex()
                    * Complex::new(amp_ar, 0.0)
            }
        };

        let core_br = CVector::from_fn(n, |_, _| complex_normal(rng, 1.0));
        let h_br = self.sqrt_i.apply(&core_br) * Complex::new(self.pl.beta_br.sqrt(), 0.0);
        let core_ba = CVector::from_fn(m, |_, _| complex_normal(rng, 1.0));
        let h_ba = self.sqrt_s.apply(&core_ba) * Complex::new(self.pl.beta_ba.sqrt(), 0.0);

        let eve = match (self.eve_antennas, self.pl.eve) {
            (k, Some(epl)) if k > 0 => {
                let core_re = CMatrix::from_fn(k, n, |_, _| complex_normal(rng, 1.0));
                let core_ae = CMatrix::from_fn(k, m, |_, _| complex_normal(rng, 1.0));
                let core_eb = CVector::from_fn(k, |_, _| complex_normal(rng, 1.0));
                Some(EveChannels {
                    g_re: core_re * &self.sqrt_i_t * Complex::new(epl.beta_re.sqrt(), 0.0),
                    h_ae: core_ae * &self.sqrt_s_t * Complex::new(epl.beta_ae.sqrt(), 0.0),
                    h_eb: core_eb * Complex::new(epl.beta_be.sqrt(), 0.0),
                })
            }
            _ => None,
        };

        ChannelRealization { g_ra, h_br, h_ba, eve }
    }
}

/// Draw one realization for `config` with the given correlation matrices.
pub fn sample_channels<R: Rng + ?Sized>(
    config: &SystemConfig,
    r_s: &CorrelationMatrix,
    r_i: &CorrelationMatrix,
    rng: &mut R,
) -> Result<ChannelRealization> {
    Ok(ChannelSampler::new(config, r_s, r_i)?.sample(rng))
}
