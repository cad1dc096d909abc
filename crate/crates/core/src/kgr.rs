//! Key generation rate: the closed form, the general 2x2 covariance form it
//! specializes, and a Monte Carlo estimate built from simulated probing
//! rounds that serves as an independent check on both.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{path_losses, ChannelSampler, PathLossSet, SystemConfig};
use crate::correlation::{hadamard_self, CVector, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::probing::{probe, Beamformers};
use crate::rng::{substream, Domain};

type Estimates = (Complex<f64>, Complex<f64>);

/// Trials simulated per parallel work unit.
const CHUNK: usize = 1024;
pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const MIN_MC_TRIALS: usize = 10_000;

/// Second moments of the two legitimate estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariances {
    pub r_aa: f64,
    pub r_bb: f64,
    pub r_ab: Complex<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KgrReport {
    pub r_aa: f64,
    pub r_bb: f64,
    pub r_ab: Complex<f64>,
    /// `w^T R_S w* (beta_r v^H R~_I v + beta_ba)`, the quantity the rate is
    /// monotone in.
    pub x: f64,
    pub kgr_bits: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub bits: f64,
    pub std_error: f64,
    pub trials: usize,
    pub sample: Covariances,
}

/// `w^T R w*`.
pub fn transmit_gain(r_s: &CorrelationMatrix, w: &CVector) -> Result<f64> {
    if w.len() != r_s.dim() {
        return Err(Error::DimensionMismatch {
            context: "w vs R_S",
            expected: r_s.dim(),
            actual: w.len(),
        });
    }
    let wc = w.conjugate();
    let q = (w.transpose() * r_s.entries() * wc)[(0, 0)];
    Ok(q.re.max(0.0))
}

/// `v^H R~ v` for a real nonnegative `R~`.
pub fn reflection_gain(r_tilde: &DMatrix<f64>, v: &CVector) -> Result<f64> {
    if v.len() != r_tilde.nrows() {
        return Err(Error::DimensionMismatch {
            context: "v vs R_I",
            expected: r_tilde.nrows(),
            actual: v.len(),
        });
    }
    let n = v.len();
    let mut acc = Complex::new(0.0, 0.0);
    for j in 0..n {
        let mut col = Complex::new(0.0, 0.0);
        for i in 0..n {
            col += v[i].conj() * r_tilde[(i, j)];
        }
        acc += col * v[j];
    }
    Ok(acc.re.max(0.0))
}

/// The monotone argument `x = q (beta_r t + beta_ba)`.
pub fn lemma1_x(
    r_s: &CorrelationMatrix,
    r_i: &CorrelationMatrix,
    bf: &Beamformers,
    pl: &PathLossSet,
) -> Result<f64> {
    let q = transmit_gain(r_s, &bf.w)?;
    let t = reflection_gain(&hadamard_self(r_i), &bf.v)?;
    Ok(x_from_parts(q, t, pl))
}

pub(crate) fn x_from_parts(q: f64, t: f64, pl: &PathLossSet) -> f64 {
    q * (pl.beta_r() * t + pl.beta_ba)
}

pub fn covariances(
    r_s: &CorrelationMatrix,
    r_i: &CorrelationMatrix,
    bf: &Beamformers,
    pl: &PathLossSet,
    config: &SystemConfig,
) -> Result<Covariances> {
    let x = lemma1_x(r_s, r_i, bf, pl)?;
    Ok(covariances_from_x(x, bf.w_power(), config))
}

fn covariances_from_x(x: f64, w_power: f64, config: &SystemConfig) -> Covariances {
    Covariances {
        r_aa: config.p_b * x + w_power * config.noise_alice(),
        r_bb: x + config.noise_bob(),
        r_ab: Complex::new(config.p_b.sqrt() * x, 0.0),
    }
}

/// `log2(R_aa R_bb / det)` with `det = R_aa R_bb - |R_ab|^2`.
pub fn kgr_general(r_aa: f64, r_bb: f64, r_ab: Complex<f64>) -> Result<f64> {
    if !(r_aa > 0.0 && r_bb > 0.0) {
        return Err(Error::DegenerateCovariance(format!(
            "variances must be positive (R_aa = {r_aa:e}, R_bb = {r_bb:e})"
        )));
    }
    let prod = r_aa * r_bb;
    let det = prod - r_ab.norm_sqr();
    if !(det > 0.0) {
        return Err(Error::DegenerateCovariance(format!(
            "covariance determinant {det:e} is not positive"
        )));
    }
    Ok((prod / det).log2().max(0.0))
}

/// Closed-form rate for equal noise at Alice and Bob, as a function of `x`.
pub fn kgr_from_x(x: f64, w_power: f64, p_b: f64, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("sigma2", format!("{sigma2} must be > 0")));
    }
    if !(x >= 0.0) {
        return Err(Error::invalid("x", format!("{x} must be >= 0")));
    }
    let num = (p_b * x + w_power * sigma2) * (x + sigma2);
    let den = (w_power + p_b) * sigma2 * x + w_power * sigma2 * sigma2;
    Ok((num / den).log2().max(0.0))
}

pub fn kgr_closed_form(
    r_s: &CorrelationMatrix,
    r_i: &CorrelationMatrix,
    bf: &Beamformers,
    pl: &PathLossSet,
    config: &SystemConfig,
) -> Result<KgrReport> {
    let x = lemma1_x(r_s, r_i, bf, pl)?;
    report_from_x(x, bf.w_power(), config)
}

pub(crate) fn report_from_x(x: f64, w_power: f64, config: &SystemConfig) -> Result<KgrReport> {
    let cov = covariances_from_x(x, w_power, config);
    let kgr_bits = if config.noise_alice() == config.noise_bob() {
        kgr_from_x(x, w_power, config.p_b, config.sigma2)?
    } else {
        kgr_general(cov.r_aa, cov.r_bb, cov.r_ab)?
    };
    Ok(KgrReport {
        r_aa: cov.r_aa,
        r_bb: cov.r_bb,
        r_ab: cov.r_ab,
        x,
        kgr_bits,
    })
}

/// Monte Carlo estimate with the path losses implied by `config.geometry`.
pub fn kgr_monte_carlo(
    config: &SystemConfig,
    r_s: &CorrelationMatrix,
    r_i: &CorrelationMatrix,
    bf: &Beamformers,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    let pl = path_losses(&config.geometry)?;
    kgr_monte_carlo_with(config, r_s, r_i, bf, &pl, trials, seed)
}

/// Simulate `trials` independent probing rounds (fresh channel and noise
/// each), estimate the covariance of `(h_a, h_b)` and return the Gaussian
/// mutual information with a bootstrap standard error.
///
/// Trial `i` draws everything from stream `(seed, Trial, i)`, and sums are
/// reduced in trial order, so the result does not depend on the thread count.
pub fn kgr_monte_carlo_with(
    config: &SystemConfig,
    r_s: &CorrelationMatrix,
    r_i: &CorrelationMatrix,
    bf: &Beamformers,
    pl: &PathLossSet,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if trials < MIN_MC_TRIALS {
        return Err(Error::invalid(
            "trials",
            format!("{trials} < {MIN_MC_TRIALS} Monte Carlo trials"),
        ));
    }
    bf.validate(config.p_a)?;
    let sampler = ChannelSampler::with_path_losses(config, r_s, r_i, *pl)?;

    let chunks = trials.div_ceil(CHUNK);
    let per_chunk: Vec<Result<Vec<Estimates>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(trials);
            (lo..hi)
                .map(|t| {
                    let mut rng = substream(seed, Domain::Trial, t as u64);
                    let ch = sampler.sample(&mut rng);
                    let obs = probe(&ch, bf, config, &mut rng)?;
                    Ok((obs.h_hat_a, obs.h_hat_b))
                })
                .collect()
        })
        .collect();
    let mut samples = Vec::with_capacity(trials);
    for chunk in per_chunk {
        samples.extend(chunk?);
    }

    let sample = sample_covariances(samples.iter().copied())?;
    let bits = kgr_general(sample.r_aa, sample.r_bb, sample.r_ab)?;

    let boot: Vec<Result<f64>> = (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, Domain::Bootstrap, r as u64);
            let n = samples.len();
            let picks: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let cov = sample_covariances(picks.iter().map(|&i| samples[i]))?;
            kgr_general(cov.r_aa, cov.r_bb, cov.r_ab)
        })
        .collect();
    let boot = boot.into_iter().collect::<Result<Vec<f64>>>()?;
    let mean = boot.iter().sum::<f64>() / boot.len() as f64;
    let var = boot.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (boot.len() - 1) as f64;

    Ok(MonteCarloEstimate {
        bits,
        std_error: var.sqrt(),
        trials,
        sample,
    })
}

/// Unbiased sample covariances with mean removal.
pub fn sample_covariances<I>(pairs: I) -> Result<Covariances>
where
    I: Iterator<Item = (Complex<f64>, Complex<f64>)> + Clone,
{
    let mut n = 0usize;
    let (mut sa, mut sb) = (Complex::new(0.0, 0.0), Complex::new(0.0, 0.0));
    for (a, b) in pairs.clone() {
        sa += a;
        sb += b;
        n += 1;
    }
    if n < 2 {
        return Err(Error::DegenerateCovariance(format!("{n} samples")));
    }
    let nf = n as f64;
    let (ma, mb) = (sa / nf, sb / nf);
    let (mut caa, mut cbb, mut cab) = (0.0, 0.0, Complex::new(0.0, 0.0));
    for (a, b) in pairs {
        let (da, db) = (a - ma, b - mb);
        caa += da.norm_sqr();
        cbb += db.norm_sqr();
        cab += da * db.conj();
    }
    let d = nf - 1.0;
    let cov = Covariances {
        r_aa: caa / d,
        r_bb: cbb / d,
        r_ab: cab / d,
    };
    if !(cov.r_aa > 0.0 && cov.r_bb > 0.0) || !cov.r_aa.is_finite() || !cov.r_bb.is_finite() {
        return Err(Error::DegenerateCovariance(format!(
            "sample variances R_aa = {:e}, R_bb = {:e}",
            cov.r_aa, cov.r_bb
        )));
    }
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SystemConfig;
    use crate::correlation::{CVector, GridShape, RisLayout};
    use crate::probing::Beamformers;

    fn scalar_config(p: f64, sigma2: f64) -> SystemConfig {
        SystemConfig {
            bs_grid: GridShape::square(1).unwrap(),
            ris_layout: RisLayout::new(GridShape::square(1).unwrap(), 0.05, 0.1).unwrap(),
            p_a: p,
            p_b: p,
            sigma2,
            ..SystemConfig::default()
        }
    }

    fn unit(n: usize) -> CVector {
        CVector::from_element(n, Complex::new(1.0, 0.0))
    }

    #[test]
    fn general_examples() {
        assert_eq!(kgr_general(3.0, 5.0, Complex::new(0.0, 0.0)).unwrap(), 0.0);
        let b = kgr_general(2.0, 2.0, Complex::new(1.0, 0.0)).unwrap();
        assert!((b - (4.0f64 / 3.0).log2()).abs() < 1e-15);
        assert!((b - 0.415).abs() < 1e-3);
        assert!(kgr_general(1.0, 1.0, Complex::new(1.0, 0.0)).is_err());
        assert!(kgr_general(0.0, 1.0, Complex::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn scalar_covariances_by_hand() {
        let (p, s2) = (2.0, 0.5);
        let cfg = scalar_config(p, s2);
        let id = CorrelationMatrix::identity(1).unwrap();
        let bf = Beamformers::new(CVector::from_element(1, Complex::new(p.sqrt(), 0.0)), unit(1), p).unwrap();
        let pl = PathLossSet {
            beta_ba: 0.25,
            beta_ar: 0.5,
            beta_br: 0.5,
            eve: None,
        };
        // q = p, t = 1, x = p (0.25 + 0.25)
        let x = p * 0.5;
        let cov = covariances(&id, &id, &bf, &pl, &cfg).unwrap();
        assert!((cov.r_aa - (p * x + p * s2)).abs() < 1e-15);
        assert!((cov.r_bb - (x + s2)).abs() < 1e-15);
        assert!((cov.r_ab.re - p.sqrt() * x).abs() < 1e-15 && cov.r_ab.im == 0.0);
        let report = kgr_closed_form(&id, &id, &bf, &pl, &cfg).unwrap();
        let general = kgr_general(cov.r_aa, cov.r_bb, cov.r_ab).unwrap();
        assert!((report.kgr_bits - general).abs() < 1e-12 * general);
    }

    #[test]
    fn zero_path_loss_gives_zero() {
        let cfg = scalar_config(1.0, 1.0);
        let id = CorrelationMatrix::identity(1).unwrap();
        let bf = Beamformers::new(unit(1), unit(1), 1.0).unwrap();
        let pl = PathLossSet {
            beta_ba: 0.0,
            beta_ar: 0.0,
            beta_br: 0.0,
            eve: None,
        };
        let cov = covariances(&id, &id, &bf, &pl, &cfg).unwrap();
        assert_eq!((cov.r_aa, cov.r_bb, cov.r_ab.norm()), (1.0, 1.0, 0.0));
        assert_eq!(kgr_closed_form(&id, &id, &bf, &pl, &cfg).unwrap().kgr_bits, 0.0);
    }

    #[test]
    fn x_examples() {
        let id = CorrelationMatrix::identity(3).unwrap();
        let w = CVector::from_fn(3, |i, _| if i == 0 { Complex::new(1.0, 0.0) } else { Complex::new(0.0, 0.0) });
        let bf = Beamformers::new(w.clone(), unit(2), 1.0).unwrap();
        let ri = CorrelationMatrix::identity(2).unwrap();
        let pl = PathLossSet {
            beta_ba: 1.0,
            beta_ar: 0.0,
            beta_br: 0.0,
            eve: None,
        };
        assert!((lemma1_x(&id, &ri, &bf, &pl).unwrap() - 1.0).abs() < 1e-15);
        let bf2 = Beamformers::new(w * Complex::new(2f64.sqrt(), 0.0), unit(2), 2.0).unwrap();
        assert!((lemma1_x(&id, &ri, &bf2, &pl).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn monotone_on_log_grid() {
        let mut prev = kgr_from_x(0.0, 0.1, 0.1, 1e-11).unwrap();
        assert_eq!(prev, 0.0);
        for k in 0..=1400 {
            let x = 10f64.powf(-16.0 + k as f64 * 0.01);
            let b = kgr_from_x(x, 0.1, 0.1, 1e-11).unwrap();
            assert!(b >= prev, "x = {x:e}");
            assert!(b > 0.0);
            prev = b;
        }
    }

    #[test]
    fn rate_grows_with_power() {
        let cfg = SystemConfig::default();
        let r_s = cfg.bs_correlation().unwrap();
        let r_i = cfg.ris_correlation().unwrap();
        let pl = path_losses(&cfg.geometry).unwrap();
        let mut prev = -1.0;
        for dbm in [10.0, 20.0, 30.0] {
            let p = crate::channel::dbm_to_watts(dbm);
            let cfg = SystemConfig { p_a: p, p_b: p, ..cfg.clone() };
            let (_, rep) = crate::beamforming::joint_optimize(&r_s, &r_i, &pl, &cfg).unwrap();
            assert!(rep.kgr_bits > prev);
            prev = rep.kgr_bits;
        }
    }

    #[test]
    fn unequal_noise_uses_general_form() {
        let mut cfg = scalar_config(1.0, 1.0);
        cfg.sigma2_bob = Some(2.0);
        let rep = report_from_x(3.0, 1.0, &cfg).unwrap();
        let expect = ((3.0 + 1.0) * (3.0 + 2.0) / ((3.0 + 1.0) * (3.0 + 2.0) - 9.0f64)).log2();
        assert!((rep.kgr_bits - expect).abs() < 1e-14);
    }

    #[test]
    fn sample_covariance_removes_mean() {
        let pairs = [(1.0, 2.0), (3.0, 2.0), (2.0, 5.0)]
            .map(|(a, b)| (Complex::new(a, 0.0), Complex::new(b, 0.0)));
        let cov = sample_covariances(pairs.iter().copied()).unwrap();
        assert!((cov.r_aa - 1.0).abs() < 1e-15);
        assert!((cov.r_bb - 3.0).abs() < 1e-15);
        assert!(cov.r_ab.re.abs() < 1e-15);
        assert!(sample_covariances(pairs[..1].iter().copied()).is_err());
    }

    #[test]
    fn monte_carlo_small_case() {
        let cfg = scalar_config(1.0, 0.5);
        let id = CorrelationMatrix::identity(1).unwrap();
        let bf = Beamformers::new(unit(1), unit(1), 1.0).unwrap();
        let pl = PathLossSet {
            beta_ba: 0.25,
            beta_ar: 0.5,
            beta_br: 0.5,
            eve: None,
        };
        let closed = kgr_closed_form(&id, &id, &bf, &pl, &cfg).unwrap().kgr_bits;
        let mc = kgr_monte_carlo_with(&cfg, &id, &id, &bf, &pl, MIN_MC_TRIALS, 7).unwrap();
        assert!((mc.bits - closed).abs() <= (0.02 * closed).max(3.0 * mc.std_error), "{} vs {closed}", mc.bits);
        let again = kgr_monte_carlo_with(&cfg, &id, &id, &bf, &pl, MIN_MC_TRIALS, 7).unwrap();
        assert_eq!(mc.bits.to_bits(), again.bits.to_bits());
        assert!(kgr_monte_carlo_with(&cfg, &id, &id, &bf, &pl, MIN_MC_TRIALS - 1, 7).is_err());
    }

    #[test]
    fn monte_carlo_without_links_is_near_zero() {
        let cfg = scalar_config(1.0, 0.5);
        let id = CorrelationMatrix::identity(1).unwrap();
        let bf = Beamformers::new(unit(1), unit(1), 1.0).unwrap();
        let pl = PathLossSet {
            beta_ba: 0.0,
            beta_ar: 0.0,
            beta_br: 0.0,
            eve: None,
        };
        let mc = kgr_monte_carlo_with(&cfg, &id, &id, &bf, &pl, MIN_MC_TRIALS, 3).unwrap();
        assert!(mc.bits.abs() <= 3.0 * mc.std_error + 1e-4, "{} +- {}", mc.bits, mc.std_error);
    }
}
