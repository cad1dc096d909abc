//! Three-step channel probing: uplink sounding by Bob, downlink sounding by
//! Alice through her beamformer, and Alice's combination of her uplink
//! estimate into a scalar gain reciprocal to Bob's.
//!
//! Pilots are unit-modulus, so the least-squares estimate is the received
//! signal times the pilot's conjugate and the pilot value drops out. The
//! functions below work directly on the estimates.

use nalgebra::Complex;
use rand::Rng;

use crate::channel::{ChannelRealization, SystemConfig};
use crate::correlation::CVector;
use crate::error::{Error, Result};
use crate::rng::complex_normal;

pub const UNIT_MODULUS_TOL: f64 = 1e-12;
pub const POWER_TOL: f64 = 1e-12;

/// Transmit beamformer `w` at Alice and reflection vector `v` at the RIS.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformers {
    pub w: CVector,
    pub v: CVector,
    /// Phases that generated `v`, when known.
    pub theta: Option<Vec<f64>>,
}

impl Beamformers {
    /// Checks `||w||^2 <= p_a` and `|v_n| = 1`.
    pub fn new(w: CVector, v: CVector, p_a: f64) -> Result<Self> {
        let bf = Beamformers { w, v, theta: None };
        bf.validate(p_a)?;
        Ok(bf)
    }

    pub fn from_phases(w: CVector, theta: Vec<f64>, p_a: f64) -> Result<Self> {
        let v = CVector::from_iterator(theta.len(), theta.iter().map(|&t| Complex::from_polar(1.0, t)));
        let bf = Beamformers {
            w,
            v,
            theta: Some(theta),
        };
        bf.validate(p_a)?;
        Ok(bf)
    }

    pub fn validate(&self, p_a: f64) -> Result<()> {
        let power = self.w.norm_squared();
        if !(power <= p_a + POWER_TOL) {
            return Err(Error::invalid(
                "w",
                format!("||w||^2 = {power:e} exceeds the power budget {p_a:e}"),
            ));
        }
        if let Some((n, z)) = self
            .v
            .iter()
            .enumerate()
            .find(|(_, z)| (z.norm() - 1.0).abs() > UNIT_MODULUS_TOL)
        {
            return Err(Error::invalid(
                "v",
                format!("|v[{n}]| = {} is not unit modulus", z.norm()),
            ));
        }
        Ok(())
    }

    pub fn w_power(&self) -> f64 {
        self.w.norm_squared()
    }
}

/// Eve's uplink and downlink estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct EveObservation {
    pub uplink: CVector,
    pub downlink: CVector,
}

/// Additive noise drawn during one probing round.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraws {
    pub uplink: CVector,
    pub downlink: Complex<f64>,
}

/// Result of one full probing round.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbingObservation {
    /// Alice's combined gain `w^T h_a^u`.
    pub h_hat_a: Complex<f64>,
    /// Bob's downlink estimate.
    pub h_hat_b: Complex<f64>,
    pub eve: Option<EveObservation>,
    pub noise: NoiseDraws,
}

fn check_dims(ch: &ChannelRealization, bf: &Beamformers) -> Result<()> {
    if bf.w.len() != ch.m() {
        return Err(Error::DimensionMismatch {
            context: "w vs BS antennas",
            expected: ch.m(),
            actual: bf.w.len(),
        });
    }
    if bf.v.len() != ch.n() {
        return Err(Error::DimensionMismatch {
            context: "v vs RIS elements",
            expected: ch.n(),
            actual: bf.v.len(),
        });
    }
    Ok(())
}

/// `G_ra diag(v) h_br + h_ba`: the composite Bob-to-Alice channel.
pub fn composite_channel(ch: &ChannelRealization, v: &CVector) -> CVector {
    let reflected = ch.h_br.component_mul(v);
    &ch.g_ra * reflected + &ch.h_ba
}

/// Noiseless uplink estimate `sqrt(P_B) (G_ra diag(v) h_br + h_ba)`.
pub fn uplink_signal(ch: &ChannelRealization, bf: &Beamformers, p_b: f64) -> Result<CVector> {
    check_dims(ch, bf)?;
    Ok(composite_channel(ch, &bf.v) * Complex::new(p_b.sqrt(), 0.0))
}

/// Noiseless downlink estimate `(h_rb^T diag(v) G_ar + h_ab^T) w`.
pub fn downlink_signal(ch: &ChannelRealization, bf: &Beamformers) -> Result<Complex<f64>> {
    check_dims(ch, bf)?;
    // Evaluated in the downlink order: row vector first, then w.
    let row = ch.h_br.component_mul(&bf.v).transpose() * ch.g_ar() + ch.h_ab().transpose();
    Ok((row * &bf.w)[(0, 0)])
}

/// Alice's LS uplink estimate with `CN(0, sigma2 I_M)` estimation noise.
pub fn uplink_sound<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    bf: &Beamformers,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<CVector> {
    let mut est = uplink_signal(ch, bf, config.p_b)?;
    let var = config.noise_alice();
    for z in est.iter_mut() {
        *z += complex_normal(rng, var);
    }
    Ok(est)
}

/// Bob's LS downlink estimate with `CN(0, sigma_b^2)` noise.
pub fn downlink_sound<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    bf: &Beamformers,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<Complex<f64>> {
    Ok(downlink_signal(ch, bf)? + complex_normal(rng, config.noise_bob()))
}

/// `w^T h_a^u` (plain transpose, no conjugation).
pub fn combine_uplink(h_hat_a_u: &CVector, w: &CVector) -> Result<Complex<f64>> {
    if h_hat_a_u.len() != w.len() {
        return Err(Error::DimensionMismatch {
            context: "combine_uplink",
            expected: w.len(),
            actual: h_hat_a_u.len(),
        });
    }
    Ok(w.iter().zip(h_hat_a_u.iter()).map(|(a, b)| a * b).sum())
}

/// Eve's uplink `sqrt(P_B)(G_re diag(v) h_br + h_be)` and downlink
/// `(G_re diag(v) G_ar + H_ae) w`, each with `CN(0, sigma_e^2)` noise.
pub fn eve_observe<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    bf: &Beamformers,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<EveObservation> {
    check_dims(ch, bf)?;
    let eve = ch.eve.as_ref().ok_or(Error::MissingEve)?;
    let var = config.noise_eve();
    let reflected = ch.h_br.component_mul(&bf.v);
    let mut uplink = (&eve.g_re * reflected + &eve.h_eb) * Complex::new(config.p_b.sqrt(), 0.0);
    let through_ris = &eve.g_re * bf.v.component_mul(&(ch.g_ar() * &bf.w));
    let mut downlink = through_ris + &eve.h_ae * &bf.w;
    for z in uplink.iter_mut() {
        *z += complex_normal(rng, var);
    }
    for z in downlink.iter_mut() {
        *z += complex_normal(rng, var);
    }
    Ok(EveObservation { uplink, downlink })
}

/// One full round. Noise is drawn in protocol order: Alice's uplink noise,
/// Bob's downlink noise, then Eve's (uplink, downlink) when she is present.
pub fn probe<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    bf: &Beamformers,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<ProbingObservation> {
    let clean_up = uplink_signal(ch, bf, config.p_b)?;
    let uplink_noise = CVector::from_fn(ch.m(), |_, _| complex_normal(rng, config.noise_alice()));
    let h_hat_a = combine_uplink(&(&clean_up + &uplink_noise), &bf.w)?;

    let downlink_noise = complex_normal(rng, config.noise_bob());
    let h_hat_b = downlink_signal(ch, bf)? + downlink_noise;

    let eve = if ch.eve.is_some() {
        Some(eve_observe(ch, bf, config, rng)?)
    } else {
        None
    };

    Ok(ProbingObservation {
        h_hat_a,
        h_hat_b,
        eve,
        noise: NoiseDraws {
            uplink: uplink_noise,
            downlink: downlink_noise,
        },
    })
}
