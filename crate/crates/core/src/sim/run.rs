use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{linear_to_db, Averaging, ExperimentConfig, PointParams, Scenario, SchemeTag, SweepAxis};
use crate::chanmodel::{derive_seed, generate_channels, partition_svd, perturb_ecsi, sample_csi_error, ChannelSet, CsiErrorModel};
use crate::error::{Error, Result};
use crate::perturb::{compute_moments, predict_naive_powers, simulate_naive_with};
use crate::robust::{fdd_receiver, tdd_receiver, FddOptions};
use crate::txscheme::{self, design_artificial_noise, design_known_ecsi, SinrReport};

const CHUNK: usize = 64;
const STREAM_CHANNEL: u64 = 0;
const STREAM_CSI_ERROR: u64 = 1;
const STREAM_ECSI: u64 = 2;

/// Second-order predictions are not trusted above this `sigma_H` (dB).
pub const VALIDITY_LIMIT_DB: f64 = -10.0;

pub const VERSION: &str = concat!("wiretap-core ", env!("CARGO_PKG_VERSION"));

const DB_PER_NEPER: f64 = 10.0 / std::f64::consts::LN_10;

/// A linear-domain average with its standard error, also in dB.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub mean_db: f64,
    pub stderr_db: f64,
}

impl Estimate {
    fn new(mean: f64, stderr: f64) -> Self {
        let stderr_db = if mean > 0.0 { DB_PER_NEPER * stderr / mean } else { f64::INFINITY };
        Self { mean, stderr, mean_db: linear_to_db(mean), stderr_db }
    }

    fn nan() -> Self {
        Self { mean: f64::NAN, stderr: f64::NAN, mean_db: f64::NAN, stderr_db: f64::NAN }
    }
}

/// Running sums of a per-trial pair (numerator, denominator).
#[derive(Clone, Copy, Debug, Default)]
struct PairSums {
    x: f64,
    xx: f64,
    y: f64,
    yy: f64,
    xy: f64,
    ratio: f64,
    ratio_sq: f64,
}

impl PairSums {
    fn push(&mut self, x: f64, y: f64) {
        let r = x / y;
        self.x += x;
        self.xx += x * x;
        self.y += y;
        self.yy += y * y;
        self.xy += x * y;
        self.ratio += r;
        self.ratio_sq += r * r;
    }

    fn merge(&mut self, o: &PairSums) {
        self.x += o.x;
        self.xx += o.xx;
        self.y += o.y;
        self.yy += o.yy;
        self.xy += o.xy;
        self.ratio += o.ratio;
        self.ratio_sq += o.ratio_sq;
    }

    fn mean_ratio(&self, n: usize) -> Estimate {
        mean_estimate(self.ratio, self.ratio_sq, n)
    }

    /// `sum x / sum y` with a delta-method standard error.
    fn ratio_of_means(&self, n: usize) -> Estimate {
        if n == 0 {
            return Estimate::nan();
        }
        let nf = n as f64;
        let (mx, my) = (self.x / nf, self.y / nf);
        let r = mx / my;
        if n == 1 {
            return Estimate::new(r, 0.0);
        }
        let d = nf - 1.0;
        let vx = (self.xx - nf * mx * mx) / d;
        let vy = (self.yy - nf * my * my) / d;
        let cxy = (self.xy - nf * mx * my) / d;
        let var = ((vx - 2.0 * r * cxy + r * r * vy) / (my * my * nf)).max(0.0);
        Estimate::new(r, var.sqrt())
    }
}

fn mean_estimate(sum: f64, sum_sq: f64, n: usize) -> Estimate {
    if n == 0 {
        return Estimate::nan();
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    Estimate::new(mean, (var / nf).sqrt())
}

/// The two ways of averaging SINR over trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinrStats {
    /// Arithmetic mean of the per-trial linear SINR.
    pub mean_linear: Estimate,
    /// Mean output signal power over mean interference-plus-noise power,
    /// both at the unit-norm receiver.
    pub ratio_of_expectations: Estimate,
}

impl SinrStats {
    pub fn get(&self, averaging: Averaging) -> Estimate {
        match averaging {
            Averaging::MeanLinear => self.mean_linear,
            Averaging::RatioOfExpectations => self.ratio_of_expectations,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointStats {
    /// Trials contributing to the averages.
    pub trials: usize,
    pub bob: SinrStats,
    pub eve: Option<SinrStats>,
    /// Mean over trials of the clamped secrecy-rate proxy (bits per use).
    pub secrecy: Option<Estimate>,
    pub outages: usize,
    /// Trials dropped because a closed-form prediction left its validity range.
    pub invalid: usize,
    /// Trials where Bob's covariance model needed diagonal loading.
    pub loaded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config: ExperimentConfig,
    pub master_seed: u64,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub axis_values: Vec<f64>,
    /// `sigma_H` above the range where the second-order analysis is trusted.
    pub extrapolated: Vec<bool>,
    pub series: BTreeMap<SchemeTag, Vec<PointStats>>,
    pub metadata: Metadata,
}

impl SweepResult {
    pub fn series(&self, tag: SchemeTag) -> Option<&[PointStats]> {
        self.series.get(&tag).map(|v| v.as_slice())
    }

    /// Bob's averaged SINR along the axis, in the configured averaging domain.
    pub fn bob(&self, tag: SchemeTag) -> Option<Vec<Estimate>> {
        let avg = self.metadata.config.averaging;
        self.series(tag).map(|s| s.iter().map(|p| p.bob.get(avg)).collect())
    }

    pub fn eve(&self, tag: SchemeTag) -> Option<Vec<Estimate>> {
        let avg = self.metadata.config.averaging;
        self.series(tag).and_then(|s| s.iter().map(|p| p.eve.map(|e| e.get(avg))).collect())
    }

    pub fn secrecy(&self, tag: SchemeTag) -> Option<Vec<Estimate>> {
        self.series(tag).and_then(|s| s.iter().map(|p| p.secrecy).collect())
    }
}

#[derive(Clone, Copy, Default)]
struct Acc {
    n: usize,
    bob: PairSums,
    eve: PairSums,
    sec: [f64; 2],
    outages: usize,
    invalid: usize,
    loaded: usize,
}

impl Acc {
    fn push(&mut self, r: &SinrReport, loaded: bool) {
        self.n += 1;
        self.bob.push(r.bob_signal, r.bob_interference_noise);
        self.eve.push(r.eve_signal, r.eve_interference_noise);
        self.sec[0] += r.secrecy_capacity;
        self.sec[1] += r.secrecy_capacity * r.secrecy_capacity;
        self.outages += r.outage as usize;
        self.loaded += loaded as usize;
    }

    fn merge(&mut self, o: &Acc) {
        self.n += o.n;
        self.bob.merge(&o.bob);
        self.eve.merge(&o.eve);
        self.sec[0] += o.sec[0];
        self.sec[1] += o.sec[1];
        self.outages += o.outages;
        self.invalid += o.invalid;
        self.loaded += o.loaded;
    }

    fn finish(&self, eve: bool) -> PointStats {
        let stats = |p: &PairSums| SinrStats {
            mean_linear: p.mean_ratio(self.n),
            ratio_of_expectations: p.ratio_of_means(self.n),
        };
        PointStats {
            trials: self.n,
            bob: stats(&self.bob),
            eve: eve.then(|| stats(&self.eve)),
            secrecy: eve.then(|| {
                let mut s = mean_estimate(self.sec[0], self.sec[1], self.n);
                s.mean_db = f64::NAN;
                s.stderr_db = f64::NAN;
                s
            }),
            outages: self.outages,
            invalid: self.invalid,
            loaded: self.loaded,
        }
    }
}

/// Every scheme of `cfg` on one trial at one sweep point. All schemes share
/// the trial's channel, CSI error and ECSI draws.
fn run_trial(cfg: &ExperimentConfig, pt: &PointParams, trial: u64, accs: &mut [Acc]) -> Result<()> {
    let seed = cfg.master_seed;
    let chan = generate_channels(pt.na, pt.nb, pt.ne.max(1), 1.0, derive_seed(seed, trial, STREAM_CHANNEL))?
        .with_link_budget(cfg.power_p(), cfg.sigma_b_sq, cfg.sigma_e_sq)?;
    let svd = partition_svd(&chan.h_ba)?;
    let err = CsiErrorModel::iid(pt.sigma_h_sq)?;
    let dh = sample_csi_error(&err, pt.nb, pt.na, derive_seed(seed, trial, STREAM_CSI_ERROR))?;
    let moments = if cfg.schemes.iter().any(|s| s.needs_moments()) {
        Some(compute_moments(&svd, &err)?)
    } else {
        None
    };
    let s = pt.target_sinr;
    for (acc, tag) in accs.iter_mut().zip(&cfg.schemes) {
        match tag {
            SchemeTag::Perfect => {
                let scheme = design_artificial_noise(&chan, &svd, s)?;
                acc.push(&txscheme::evaluate_default(&chan, &scheme)?, false);
            }
            SchemeTag::KnownEcsi => {
                acc.push(&known_ecsi_trial(cfg, &chan, &chan.h_ea, s)?, false);
            }
            SchemeTag::ImperfectEcsi => {
                let h_tilde = perturb_ecsi(&chan.h_ea, cfg.gamma_ecsi, derive_seed(seed, trial, STREAM_ECSI))?;
                acc.push(&known_ecsi_trial(cfg, &chan, &h_tilde, s)?, false);
            }
            SchemeTag::Naive => acc.push(&simulate_naive_with(&chan, &svd, &dh, s)?, false),
            SchemeTag::RobustFdd => {
                let opts = FddOptions { jam_through_estimate: cfg.jam_through_estimate };
                let (_, r, ctx) = fdd_receiver(&chan, &(&chan.h_ba + &dh), s, opts)?;
                acc.push(&r, ctx.loaded);
            }
            SchemeTag::RobustTdd => {
                let m = moments.as_ref().expect("moments computed for TDD");
                let (_, r, ctx) = tdd_receiver(&chan, &svd, m, &dh, s)?;
                acc.push(&r, ctx.loaded);
            }
            SchemeTag::AnalyticNaive => {
                let m = moments.as_ref().expect("moments computed for prediction");
                match predict_naive_powers(&svd, m, &chan, s) {
                    Ok(p) => {
                        let r = SinrReport {
                            sinr_b: p.sinr(),
                            sinr_e: 0.0,
                            secrecy_capacity: 0.0,
                            outage: p.outage,
                            bob_signal: p.signal,
                            bob_interference_noise: p.interference_noise,
                            eve_signal: 0.0,
                            eve_interference_noise: 1.0,
                        };
                        acc.push(&r, false);
                    }
                    Err(Error::ValidityRange(_)) => acc.invalid += 1,
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(())
}

/// Alice beamforms against `h_ea_assumed`; Eve's MMSE receiver and SINR use the true channel.
fn known_ecsi_trial(
    cfg: &ExperimentConfig,
    chan: &ChannelSet,
    h_ea_assumed: &crate::chanmodel::ChannelMatrix,
    s: f64,
) -> Result<SinrReport> {
    let scheme = design_known_ecsi(chan, h_ea_assumed, s, cfg.known_ecsi_power)?;
    txscheme::evaluate_default(chan, &scheme)
}

fn run_point(cfg: &ExperimentConfig, pt: &PointParams) -> Result<Vec<Acc>> {
    let k = cfg.schemes.len();
    let n_chunks = cfg.trials.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<Acc>>> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let mut accs = vec![Acc::default(); k];
            for t in ci * CHUNK..((ci + 1) * CHUNK).min(cfg.trials) {
                run_trial(cfg, pt, t as u64, &mut accs)?;
            }
            Ok(accs)
        })
        .collect();
    let mut total = vec![Acc::default(); k];
    for p in parts {
        for (a, b) in total.iter_mut().zip(&p?) {
            a.merge(b);
        }
    }
    Ok(total)
}

/// Runs every sweep point of `cfg`. Trials are seeded from `master_seed` and
/// the trial index only, so schemes and sweep points see paired draws and the
/// result does not depend on the number of worker threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let (axis, axis_values, points) = cfg.points()?;
    let mut series: BTreeMap<SchemeTag, Vec<PointStats>> =
        cfg.schemes.iter().map(|&t| (t, Vec::with_capacity(points.len()))).collect();
    for pt in &points {
        let accs = run_point(cfg, pt)?;
        for (tag, acc) in cfg.schemes.iter().zip(&accs) {
            series.get_mut(tag).expect("series per scheme").push(acc.finish(tag.has_eve()));
        }
    }
    let extrapolated = points.iter().map(|p| p.sigma_h_db > VALIDITY_LIMIT_DB).collect();
    Ok(SweepResult {
        axis,
        axis_values,
        extrapolated,
        series,
        metadata: Metadata { config: cfg.clone(), master_seed: cfg.master_seed, version: VERSION.to_string() },
    })
}

/// Measured naive SINR next to its closed-form prediction across `sigma_H`.
/// Compare `ratio_of_expectations` of the two series.
pub fn run_prediction_comparison(cfg: &ExperimentConfig) -> Result<SweepResult> {
    if cfg.scenario != Scenario::Fig2Prediction {
        return Err(Error::Config("prediction comparison needs the fig2_prediction scenario".into()));
    }
    for need in [SchemeTag::Naive, SchemeTag::AnalyticNaive] {
        if !cfg.schemes.contains(&need) {
            return Err(Error::Config(format!("prediction comparison needs scheme `{need}`")));
        }
    }
    run_experiment(cfg)
}

/// Eve's SINR across `ne` with unknown, perfect and imperfect ECSI.
pub fn run_ecsi_comparison(cfg: &ExperimentConfig) -> Result<SweepResult> {
    if cfg.scenario != Scenario::Fig1NeSweep {
        return Err(Error::Config("ECSI comparison needs the fig1_ne_sweep scenario".into()));
    }
    let mut cfg = cfg.clone();
    cfg.schemes.extend([SchemeTag::Perfect, SchemeTag::KnownEcsi, SchemeTag::ImperfectEcsi]);
    run_experiment(&cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::Sweep;

    #[test]
    fn single_perfect_trial_hits_target() {
        let cfg = ExperimentConfig {
            trials: 1,
            sigma_h_db: Sweep::One(f64::NEG_INFINITY),
            schemes: [SchemeTag::Perfect].into_iter().collect(),
            ..Default::default()
        };
        let r = run_experiment(&cfg).unwrap();
        let p = r.series(SchemeTag::Perfect).unwrap()[0];
        assert!((p.bob.mean_linear.mean - 100.0).abs() < 1e-9 * 100.0);
        assert_eq!(p.trials, 1);
        assert_eq!(p.bob.mean_linear.stderr, 0.0);
    }

    #[test]
    fn vanishing_error_collapses_every_scheme_onto_target() {
        let cfg = ExperimentConfig {
            trials: 20,
            sigma_h_db: Sweep::One(-200.0),
            schemes: [SchemeTag::Naive, SchemeTag::RobustFdd, SchemeTag::RobustTdd, SchemeTag::AnalyticNaive]
                .into_iter()
                .collect(),
            ..Default::default()
        };
        let r = run_experiment(&cfg).unwrap();
        for (_, s) in &r.series {
            let p = s[0];
            let outage_free = p.outages == 0;
            if outage_free {
                assert!((p.bob.mean_linear.mean_db - 20.0).abs() < 1e-6, "{p:?}");
                assert!((p.bob.ratio_of_expectations.mean_db - 20.0).abs() < 1e-6, "{p:?}");
            }
        }
    }

    #[test]
    fn series_lengths_match_axis() {
        let cfg = ExperimentConfig {
            trials: 5,
            target_sinr_db: Sweep::Many(vec![0.0, 10.0, 30.0]),
            ..Default::default()
        };
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.axis, SweepAxis::TargetSinrDb);
        for s in r.series.values() {
            assert_eq!(s.len(), 3);
            assert!(s.iter().all(|p| p.bob.mean_linear.stderr.is_finite() && p.bob.ratio_of_expectations.stderr.is_finite()));
        }
        // 30 dB with P = 20 dB is out of reach for most channels.
        assert!(r.series[&SchemeTag::Perfect][2].outages > 0);
    }

    #[test]
    fn wrong_scenario_is_a_config_error() {
        let cfg = ExperimentConfig::default();
        assert!(matches!(run_prediction_comparison(&cfg), Err(Error::Config(_))));
        assert!(matches!(run_ecsi_comparison(&cfg), Err(Error::Config(_))));
    }
}
