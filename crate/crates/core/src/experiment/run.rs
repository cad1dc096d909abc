use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamforming::{lemma2_bounds, optimal_reflection, optimal_transmit, random_reflection, random_transmit};
use crate::channel::{path_losses, PathLossSet};
use crate::correlation::{hadamard_self, CorrelationMatrix, GridShape};
use crate::error::{Error, Result};
use crate::kgr::{kgr_monte_carlo_with, reflection_gain, report_from_x, transmit_gain, x_from_parts};
use crate::probing::Beamformers;
use crate::rng::{combine, substream, Domain};

use super::spec::{ExperimentSpec, Scheme, SweepPoint};
use super::VERSION;

/// One (sweep point, scheme) result. Random schemes report the mean over
/// their beamformer draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub sweep_index: usize,
    pub power_dbm: f64,
    pub bs_grid: GridShape,
    pub rho: f64,
    pub ris_grid: GridShape,
    pub spacing_lambda: f64,
    pub scheme: Scheme,
    pub kgr_bits: f64,
    /// Sample standard deviation across draws (zero for deterministic schemes).
    pub kgr_std_bits: f64,
    pub draws: usize,
    pub x_watts: f64,
    pub q_watts: f64,
    pub t: f64,
    pub mc_trials: usize,
    /// Closed form for the exact beamformer the Monte Carlo run used.
    pub mc_closed_form_bits: Option<f64>,
    pub mc_estimate_bits: Option<f64>,
    pub mc_stderr_bits: Option<f64>,
    pub f_lower_watts: f64,
    pub f_upper_watts: f64,
    pub achieved_watts: f64,
    pub seed: u64,
    pub version: String,
}

impl ResultRow {
    pub fn m(&self) -> usize {
        self.bs_grid.total()
    }

    pub fn n(&self) -> usize {
        self.ris_grid.total()
    }
}

/// Run on the current rayon pool.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let rows: Vec<Result<Vec<ResultRow>>> = spec
        .points()
        .into_par_iter()
        .map(|point| run_point(spec, &point))
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

/// Run on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(spec: &ExperimentSpec, threads: usize) -> Result<Vec<ResultRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    pool.install(|| run_experiment(spec))
}

struct Draw {
    bf: Beamformers,
    q: f64,
    t: f64,
}

fn run_point(spec: &ExperimentSpec, point: &SweepPoint) -> Result<Vec<ResultRow>> {
    let config = &point.config;
    config.validate()?;
    let r_s = config.bs_correlation()?;
    let r_i = config.ris_correlation()?;
    let r_tilde = hadamard_self(&r_i);
    let pl = path_losses(&config.geometry)?;
    let bounds = lemma2_bounds(config.bs_grid, config.rho, config.p_a)?;
    let w_opt = optimal_transmit(&r_s, config.p_a)?;
    let v_opt = optimal_reflection(config.n(), 0.0)?;

    let mut rows = Vec::with_capacity(spec.schemes.len());
    for &scheme in &spec.schemes {
        let scheme_pl = match scheme {
            Scheme::NoRisOptimalW => pl.without_ris(),
            _ => pl,
        };
        let n_draws = if scheme.is_random() { spec.random_draws } else { 1 };
        let draws = (0..n_draws)
            .map(|d| {
                // Keyed by (scheme, draw) only, so every sweep point sees the
                // same random directions and curves stay smooth.
                let mut rng = substream(spec.seed, Domain::Beamformer, combine(&[scheme.index(), d as u64]));
                let w = if scheme.random_w() {
                    random_transmit(config.m(), config.p_a, &mut rng)
                } else {
                    w_opt.clone()
                };
                let (v, theta) = if scheme.random_v() {
                    random_reflection(config.n(), &mut rng)
                } else {
                    (v_opt.clone(), vec![0.0; config.n()])
                };
                let bf = Beamformers { w, v, theta: Some(theta) };
                bf.validate(config.p_a)?;
                let q = transmit_gain(&r_s, &bf.w)?;
                let t = reflection_gain(&r_tilde, &bf.v)?;
                Ok(Draw { bf, q, t })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut kgr = Vec::with_capacity(draws.len());
        let mut xs = Vec::with_capacity(draws.len());
        for d in &draws {
            let x = x_from_parts(d.q, d.t, &scheme_pl);
            kgr.push(report_from_x(x, d.bf.w_power(), config)?.kgr_bits);
            xs.push(x);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let kgr_mean = mean(&kgr);
        let kgr_std = if kgr.len() > 1 {
            (kgr.iter().map(|k| (k - kgr_mean).powi(2)).sum::<f64>() / (kgr.len() - 1) as f64).sqrt()
        } else {
            0.0
        };

        let (mc_closed, mc_est, mc_se) = if spec.trials > 0 {
            let first = &draws[0];
            let closed = report_from_x(x_from_parts(first.q, first.t, &scheme_pl), first.bf.w_power(), config)?.kgr_bits;
            let mc_seed = combine(&[spec.seed, point.index as u64, scheme.index()]);
            let est = monte_carlo(config, &r_s, &r_i, &first.bf, &scheme_pl, spec.trials, mc_seed)?;
            (Some(closed), Some(est.0), Some(est.1))
        } else {
            (None, None, None)
        };

        rows.push(ResultRow {
            experiment: spec.name.clone(),
            sweep_index: point.index,
            power_dbm: point.power_dbm,
            bs_grid: config.bs_grid,
            rho: config.rho,
            ris_grid: config.ris_layout.grid,
            spacing_lambda: point.spacing_lambda,
            scheme,
            kgr_bits: kgr_mean,
            kgr_std_bits: kgr_std,
            draws: draws.len(),
            x_watts: mean(&xs),
            q_watts: mean(&draws.iter().map(|d| d.q).collect::<Vec<_>>()),
            t: mean(&draws.iter().map(|d| d.t).collect::<Vec<_>>()),
            mc_trials: spec.trials,
            mc_closed_form_bits: mc_closed,
            mc_estimate_bits: mc_est,
            mc_stderr_bits: mc_se,
            f_lower_watts: bounds.f_lower,
            f_upper_watts: bounds.f_upper,
            achieved_watts: bounds.achieved,
            seed: spec.seed,
            version: VERSION.to_owned(),
        });
    }
    Ok(rows)
}

fn monte_carlo(
    config: &crate::channel::SystemConfig,
    r_s: &CorrelationMatrix,
    r_i: &CorrelationMatrix,
    bf: &Beamformers,
    pl: &PathLossSet,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let est = kgr_monte_carlo_with(config, r_s, r_i, bf, pl, trials, seed)?;
    Ok((est.bits, est.std_error))
}

/// Power (dBm) at which a scheme's KGR curve reaches `level`, by linear
/// interpolation between neighbouring sweep points.
fn power_at_level(rows: &[ResultRow], scheme: Scheme, level: f64) -> Result<f64> {
    let mut curve: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.scheme == scheme)
        .map(|r| (r.power_dbm, r.kgr_bits))
        .collect();
    if curve.is_empty() {
        return Err(Error::MissingScheme(scheme.name().to_owned()));
    }
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    if curve.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::invalid(
            "rows",
            format!("scheme `{scheme}` has repeated power values; dbm_gain needs a power sweep"),
        ));
    }
    let (lo, hi) = curve
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    if !(lo..=hi).contains(&level) {
        return Err(Error::LevelOutOfRange {
            scheme: scheme.name().to_owned(),
            level,
            min: lo,
            max: hi,
        });
    }
    for w in curve.windows(2) {
        let ((p0, k0), (p1, k1)) = (w[0], w[1]);
        if (k0 <= level && level <= k1) || (k1 <= level && level <= k0) {
            if k1 == k0 {
                return Ok(p0);
            }
            return Ok(p0 + (level - k0) * (p1 - p0) / (k1 - k0));
        }
    }
    Ok(curve[0].0)
}

/// Horizontal gap in dB between two KGR-versus-power curves at a given KGR
/// level: positive when `scheme_a` needs less power than `scheme_b`.
pub fn dbm_gain(rows: &[ResultRow], scheme_a: Scheme, scheme_b: Scheme, kgr_level: f64) -> Result<f64> {
    let pa = power_at_level(rows, scheme_a, kgr_level)?;
    let pb = power_at_level(rows, scheme_b, kgr_level)?;
    Ok(pb - pa)
}
