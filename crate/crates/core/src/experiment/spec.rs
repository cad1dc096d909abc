use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, dbm_to_watts, Geometry, PathLossConvention, SystemConfig};
use crate::correlation::{GridShape, RisLayout};
use crate::error::{Error, Result};

/// Beamforming strategies compared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    OptimalBoth,
    RandomBoth,
    OptimalWRandomV,
    RandomWOptimalV,
    /// Optimal transmit beamformer with the RIS removed.
    NoRisOptimalW,
    /// Beamformers designed as if both arrays were uncorrelated (random `w`
    /// and random `v`), evaluated on the true correlated channel.
    IidAssumption,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::OptimalBoth,
        Scheme::RandomBoth,
        Scheme::OptimalWRandomV,
        Scheme::RandomWOptimalV,
        Scheme::NoRisOptimalW,
        Scheme::IidAssumption,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::OptimalBoth => "optimal_both",
            Scheme::RandomBoth => "random_both",
            Scheme::OptimalWRandomV => "optimal_w_random_v",
            Scheme::RandomWOptimalV => "random_w_optimal_v",
            Scheme::NoRisOptimalW => "no_ris_optimal_w",
            Scheme::IidAssumption => "iid_assumption",
        }
    }

    pub fn from_name(name: &str) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn random_w(self) -> bool {
        matches!(
            self,
            Scheme::RandomBoth | Scheme::RandomWOptimalV | Scheme::IidAssumption
        )
    }

    pub fn random_v(self) -> bool {
        matches!(
            self,
            Scheme::RandomBoth | Scheme::OptimalWRandomV | Scheme::IidAssumption
        )
    }

    pub fn is_random(self) -> bool {
        self.random_w() || self.random_v()
    }

    pub(crate) fn index(self) -> u64 {
        Scheme::ALL.iter().position(|&s| s == self).unwrap() as u64
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// Common transmit power `P_A = P_B`, dBm.
    Power { power_dbm: Vec<f64> },
    /// RIS lattice sizes crossed with element pitches (fractions of a wavelength).
    RisElements {
        grids: Vec<GridShape>,
        spacings: Vec<f64>,
    },
    /// BS array sizes crossed with correlation indices.
    BsAntennas { grids: Vec<GridShape>, rho: Vec<f64> },
}

/// One point of a sweep with the system it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub power_dbm: f64,
    pub spacing_lambda: f64,
    pub config: SystemConfig,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub base: SystemConfig,
    /// Common transmit power of the base system, dBm.
    pub base_power_dbm: f64,
    pub sweep: Sweep,
    pub schemes: Vec<Scheme>,
    /// Monte Carlo trials per (point, scheme); zero skips the Monte Carlo column.
    pub trials: usize,
    /// Beamformer draws averaged for the random schemes.
    pub random_draws: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    /// Sweep points in output order: for two-parameter sweeps the second
    /// parameter (spacing or rho) is the outer loop.
    pub fn points(&self) -> Vec<SweepPoint> {
        let spacing = self.base.ris_layout.spacing / self.base.ris_layout.wavelength;
        let mut out = Vec::new();
        match &self.sweep {
            Sweep::Power { power_dbm } => {
                for &p in power_dbm {
                    let config = SystemConfig {
                        p_a: dbm_to_watts(p),
                        p_b: dbm_to_watts(p),
                        ..self.base.clone()
                    };
                    out.push((p, spacing, config));
                }
            }
            Sweep::RisElements { grids, spacings } => {
                for &s in spacings {
                    for &g in grids {
                        let mut config = self.base.clone();
                        config.ris_layout = RisLayout {
                            grid: g,
                            spacing: s * config.ris_layout.wavelength,
                            wavelength: config.ris_layout.wavelength,
                        };
                        out.push((self.base_power_dbm, s, config));
                    }
                }
            }
            Sweep::BsAntennas { grids, rho } => {
                for &r in rho {
                    for &g in grids {
                        let config = SystemConfig {
                            bs_grid: g,
                            rho: r,
                            ..self.base.clone()
                        };
                        out.push((self.base_power_dbm, spacing, config));
                    }
                }
            }
        }
        out.into_iter()
            .enumerate()
            .map(|(index, (power_dbm, spacing_lambda, config))| SweepPoint {
                index,
                power_dbm,
                spacing_lambda,
                config,
            })
            .collect()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::ConfigSyntax(e.to_string()))?;
        file.into_spec()
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }
}

fn default_seed() -> u64 {
    20_220_912
}

fn default_draws() -> usize {
    100
}

fn default_schemes() -> Vec<String> {
    Scheme::ALL.iter().map(|s| s.name().to_owned()).collect()
}

/// On-disk experiment description (TOML). Every key has a default, so a
/// file only needs the keys it changes plus a `[sweep]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub trials: usize,
    #[serde(default = "default_draws")]
    pub random_draws: usize,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<String>,
    #[serde(default)]
    pub system: SystemFile,
    pub sweep: SweepFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemFile {
    /// `[horizontal, vertical]` BS antenna counts.
    pub bs_grid: [usize; 2],
    pub rho: f64,
    /// `[horizontal, vertical]` RIS element counts.
    pub ris_grid: [usize; 2],
    /// RIS pitch as a fraction of the wavelength.
    pub ris_spacing: f64,
    pub wavelength_m: f64,
    /// `P_A = P_B` unless overridden below.
    pub power_dbm: f64,
    pub power_a_dbm: Option<f64>,
    pub power_b_dbm: Option<f64>,
    pub noise_dbm: f64,
    pub noise_bob_dbm: Option<f64>,
    pub noise_eve_dbm: Option<f64>,
    pub eve_antennas: usize,
    pub pathloss_convention: PathLossConvention,
    pub geometry: GeometryFile,
}

impl Default for SystemFile {
    fn default() -> Self {
        SystemFile {
            bs_grid: [4, 4],
            rho: 0.3,
            ris_grid: [8, 8],
            ris_spacing: 0.5,
            wavelength_m: 0.1,
            power_dbm: 20.0,
            power_a_dbm: None,
            power_b_dbm: None,
            noise_dbm: -80.0,
            noise_bob_dbm: None,
            noise_eve_dbm: None,
            eve_antennas: 0,
            pathloss_convention: PathLossConvention::Root,
            geometry: GeometryFile::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryFile {
    pub alice: [f64; 2],
    pub bob: [f64; 2],
    pub ris: [f64; 2],
    pub eve: Option<[f64; 2]>,
    pub alpha_ba: f64,
    pub alpha_ar: f64,
    pub alpha_br: f64,
    /// Path loss at 1 m, dB.
    pub zeta0_db: f64,
}

impl Default for GeometryFile {
    fn default() -> Self {
        GeometryFile {
            alice: [0.0, 0.0],
            bob: [70.0, 0.0],
            ris: [50.0, 10.0],
            eve: None,
            alpha_ba: 4.0,
            alpha_ar: 2.0,
            alpha_br: 2.0,
            zeta0_db: -30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepFile {
    Power {
        power_dbm: Vec<f64>,
    },
    RisElements {
        grids: Vec<[usize; 2]>,
        spacings: Vec<f64>,
    },
    BsAntennas {
        grids: Vec<[usize; 2]>,
        rho: Vec<f64>,
    },
}

fn grid(key: &str, g: [usize; 2]) -> Result<GridShape> {
    GridShape::new(g[0], g[1]).map_err(|_| Error::config(key, "grid dimensions must be >= 1"))
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::config(key, format!("{v} must be a positive number")))
    }
}

fn finite(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("{v} is not finite")))
    }
}

fn rho(key: &str, v: f64) -> Result<f64> {
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::config(key, format!("{v} is outside [0, 1)")))
    }
}

fn nonempty<T>(key: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        Err(Error::config(key, "list must not be empty"))
    } else {
        Ok(())
    }
}

impl ConfigFile {
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Validate every key and build the experiment.
    pub fn into_spec(self) -> Result<ExperimentSpec> {
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        nonempty("schemes", &self.schemes)?;
        let mut schemes = Vec::new();
        for (i, s) in self.schemes.iter().enumerate() {
            let scheme = Scheme::from_name(s).ok_or_else(|| {
                Error::config(
                    format!("schemes[{i}]"),
                    format!(
                        "unknown scheme `{s}` (expected one of {})",
                        Scheme::ALL.map(|s| s.name()).join(", ")
                    ),
                )
            })?;
            if schemes.contains(&scheme) {
                return Err(Error::config(format!("schemes[{i}]"), format!("duplicate scheme `{s}`")));
            }
            schemes.push(scheme);
        }
        if self.trials != 0 && self.trials < crate::kgr::MIN_MC_TRIALS {
            return Err(Error::config(
                "trials",
                format!("must be 0 or at least {}", crate::kgr::MIN_MC_TRIALS),
            ));
        }
        if schemes.iter().any(|s| s.is_random()) && self.random_draws == 0 {
            return Err(Error::config("random_draws", "must be >= 1 when a random scheme is listed"));
        }

        let s = &self.system;
        let g = &s.geometry;
        let wavelength = positive("system.wavelength_m", s.wavelength_m)?;
        let power = finite("system.power_dbm", s.power_dbm)?;
        let p_a = finite("system.power_a_dbm", s.power_a_dbm.unwrap_or(power))?;
        let p_b = finite("system.power_b_dbm", s.power_b_dbm.unwrap_or(power))?;
        let noise = finite("system.noise_dbm", s.noise_dbm)?;
        let geometry = Geometry {
            alice: g.alice,
            bob: g.bob,
            ris: g.ris,
            eve: g.eve,
            alpha_ba: positive("system.geometry.alpha_ba", g.alpha_ba)?,
            alpha_ar: positive("system.geometry.alpha_ar", g.alpha_ar)?,
            alpha_br: positive("system.geometry.alpha_br", g.alpha_br)?,
            zeta0: db_to_linear(finite("system.geometry.zeta0_db", g.zeta0_db)?),
            convention: s.pathloss_convention,
        };
        geometry
            .validate()
            .map_err(|e| Error::config("system.geometry", e.to_string()))?;
        if s.eve_antennas > 0 && g.eve.is_none() {
            return Err(Error::config(
                "system.geometry.eve",
                "required when system.eve_antennas > 0",
            ));
        }
        let base = SystemConfig {
            bs_grid: grid("system.bs_grid", s.bs_grid)?,
            ris_layout: RisLayout {
                grid: grid("system.ris_grid", s.ris_grid)?,
                spacing: positive("system.ris_spacing", s.ris_spacing)? * wavelength,
                wavelength,
            },
            eve_antennas: s.eve_antennas,
            rho: rho("system.rho", s.rho)?,
            p_a: dbm_to_watts(p_a),
            p_b: dbm_to_watts(p_b),
            sigma2: dbm_to_watts(noise),
            sigma2_bob: s
                .noise_bob_dbm
                .map(|v| finite("system.noise_bob_dbm", v).map(dbm_to_watts))
                .transpose()?,
            sigma2_eve: s
                .noise_eve_dbm
                .map(|v| finite("system.noise_eve_dbm", v).map(dbm_to_watts))
                .transpose()?,
            geometry,
        };

        let sweep = match self.sweep {
            SweepFile::Power { power_dbm } => {
                nonempty("sweep.power_dbm", &power_dbm)?;
                for (i, &p) in power_dbm.iter().enumerate() {
                    finite(&format!("sweep.power_dbm[{i}]"), p)?;
                }
                Sweep::Power { power_dbm }
            }
            SweepFile::RisElements { grids, spacings } => {
                nonempty("sweep.grids", &grids)?;
                nonempty("sweep.spacings", &spacings)?;
                let grids = grids
                    .iter()
                    .enumerate()
                    .map(|(i, &g)| grid(&format!("sweep.grids[{i}]"), g))
                    .collect::<Result<Vec<_>>>()?;
                for (i, &sp) in spacings.iter().enumerate() {
                    positive(&format!("sweep.spacings[{i}]"), sp)?;
                }
                Sweep::RisElements { grids, spacings }
            }
            SweepFile::BsAntennas { grids, rho: rhos } => {
                nonempty("sweep.grids", &grids)?;
                nonempty("sweep.rho", &rhos)?;
                let grids = grids
                    .iter()
                    .enumerate()
                    .map(|(i, &g)| grid(&format!("sweep.grids[{i}]"), g))
                    .collect::<Result<Vec<_>>>()?;
                for (i, &r) in rhos.iter().enumerate() {
                    rho(&format!("sweep.rho[{i}]"), r)?;
                }
                Sweep::BsAntennas { grids, rho: rhos }
            }
        };

        Ok(ExperimentSpec {
            name: self.name,
            base,
            base_power_dbm: power,
            sweep,
            schemes,
            trials: self.trials,
            random_draws: self.random_draws,
            seed: self.seed,
        })
    }
}

pub const PRESETS: [&str; 3] = ["fig2", "fig3", "fig4"];

fn squares(range: std::ops::RangeInclusive<usize>) -> Vec<[usize; 2]> {
    range.map(|k| [k, k]).collect()
}

/// Built-in experiment definitions for the three published figures.
///
/// - `fig2`: KGR against transmit power, 0 to 30 dBm in 2 dB steps, every scheme.
/// - `fig3`: KGR against RIS size (4x4 to 10x10) for pitches of 1/2, 1/4 and 1/8 wavelength.
/// - `fig4`: KGR against BS array size (1x1 to 8x8) for rho in {0, 0.3, 0.6}.
pub fn preset(name: &str) -> Option<ConfigFile> {
    let base = |name: &str, schemes: &[Scheme], sweep: SweepFile| ConfigFile {
        name: name.to_owned(),
        seed: default_seed(),
        trials: 0,
        random_draws: default_draws(),
        schemes: schemes.iter().map(|s| s.name().to_owned()).collect(),
        system: SystemFile::default(),
        sweep,
    };
    match name {
        "fig2" => Some(base(
            "fig2",
            &Scheme::ALL,
            SweepFile::Power {
                power_dbm: (0..=15).map(|k| 2.0 * k as f64).collect(),
            },
        )),
        "fig3" => Some(base(
            "fig3",
            &[Scheme::OptimalBoth, Scheme::IidAssumption],
            SweepFile::RisElements {
                grids: squares(4..=10),
                spacings: vec![0.5, 0.25, 0.125],
            },
        )),
        "fig4" => Some(base(
            "fig4",
            &[
                Scheme::OptimalBoth,
                Scheme::IidAssumption,
                Scheme::RandomWOptimalV,
            ],
            SweepFile::BsAntennas {
                grids: squares(1..=8),
                rho: vec![0.0, 0.3, 0.6],
            },
        )),
        _ => None,
    }
}
