use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::txscheme::KnownEcsiPower;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Fig1NeSweep,
    Fig2Prediction,
    Fig3SinrVsTarget,
    Fig4Secrecy,
    Fig5SigmaSweep,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeTag {
    /// Artificial noise designed from the true channel (unknown ECSI).
    Perfect,
    KnownEcsi,
    ImperfectEcsi,
    Naive,
    RobustFdd,
    RobustTdd,
    /// Closed-form second-order prediction of the naive scheme.
    AnalyticNaive,
}

impl SchemeTag {
    pub const ALL: [SchemeTag; 7] = [
        SchemeTag::Perfect,
        SchemeTag::KnownEcsi,
        SchemeTag::ImperfectEcsi,
        SchemeTag::Naive,
        SchemeTag::RobustFdd,
        SchemeTag::RobustTdd,
        SchemeTag::AnalyticNaive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeTag::Perfect => "perfect",
            SchemeTag::KnownEcsi => "known_ecsi",
            SchemeTag::ImperfectEcsi => "imperfect_ecsi",
            SchemeTag::Naive => "naive",
            SchemeTag::RobustFdd => "robust_fdd",
            SchemeTag::RobustTdd => "robust_tdd",
            SchemeTag::AnalyticNaive => "analytic_naive",
        }
    }

    /// Needs the second-order moments of Bob's channel.
    pub fn needs_moments(self) -> bool {
        matches!(self, SchemeTag::RobustTdd | SchemeTag::AnalyticNaive)
    }

    pub fn has_eve(self) -> bool {
        self != SchemeTag::AnalyticNaive
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SchemeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{s}`")))
    }
}

/// How SINR is averaged over trials for headline curves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Mean signal power over mean interference-plus-noise power.
    #[default]
    RatioOfExpectations,
    /// Arithmetic mean of the per-trial linear SINR.
    MeanLinear,
}

/// A scalar or a list of sweep values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sweep<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Copy> Sweep<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            Sweep::One(x) => vec![*x],
            Sweep::Many(v) => v.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::One(_) => 1,
            Sweep::Many(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<T> From<T> for Sweep<T> {
    fn from(x: T) -> Self {
        Sweep::One(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Na,
    Nb,
    Ne,
    TargetSinrDb,
    SigmaHDb,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Na => "na",
            SweepAxis::Nb => "nb",
            SweepAxis::Ne => "ne",
            SweepAxis::TargetSinrDb => "target_sinr_db",
            SweepAxis::SigmaHDb => "sigma_h_db",
        }
    }
}

/// One sweep point, all quantities linear.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointParams {
    pub na: usize,
    pub nb: usize,
    pub ne: usize,
    pub target_sinr: f64,
    /// Variance of each CSI error entry.
    pub sigma_h_sq: f64,
    pub sigma_h_db: f64,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub na: Sweep<usize>,
    pub nb: Sweep<usize>,
    pub ne: Sweep<usize>,
    pub target_sinr_db: Sweep<f64>,
    /// `20 log10 sigma_H`, so the error variance is `10^(sigma_h_db / 10)`.
    pub sigma_h_db: Sweep<f64>,
    pub gamma_ecsi: f64,
    pub trials: usize,
    pub power_db: f64,
    pub sigma_b_sq: f64,
    pub sigma_e_sq: f64,
    pub master_seed: u64,
    pub schemes: BTreeSet<SchemeTag>,
    /// FDD receiver propagates the jamming through the estimate instead of the true channel.
    pub jam_through_estimate: bool,
    pub known_ecsi_power: KnownEcsiPower,
    pub averaging: Averaging,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Custom,
            na: Sweep::One(5),
            nb: Sweep::One(5),
            ne: Sweep::One(5),
            target_sinr_db: Sweep::One(20.0),
            sigma_h_db: Sweep::One(-10.0),
            gamma_ecsi: 0.05,
            trials: 3000,
            power_db: 20.0,
            sigma_b_sq: 1.0,
            sigma_e_sq: 1.0,
            master_seed: 0,
            schemes: [SchemeTag::Perfect, SchemeTag::Naive, SchemeTag::RobustFdd, SchemeTag::RobustTdd]
                .into_iter()
                .collect(),
            jam_through_estimate: false,
            known_ecsi_power: KnownEcsiPower::FixedQos,
            averaging: Averaging::RatioOfExpectations,
        }
    }
}

fn schemes(tags: &[SchemeTag]) -> BTreeSet<SchemeTag> {
    tags.iter().copied().collect()
}

impl ExperimentConfig {
    /// Experimental defaults of one figure scenario.
    pub fn preset(scenario: Scenario) -> Self {
        let base = Self { scenario, ..Self::default() };
        match scenario {
            Scenario::Fig1NeSweep => Self {
                na: Sweep::One(4),
                nb: Sweep::One(4),
                ne: Sweep::Many((1..=20).collect()),
                schemes: schemes(&[SchemeTag::Perfect, SchemeTag::KnownEcsi, SchemeTag::ImperfectEcsi]),
                ..base
            },
            Scenario::Fig2Prediction => Self {
                sigma_h_db: Sweep::Many(vec![-30.0, -27.5, -25.0, -22.5, -20.0, -17.5, -15.0, -12.5, -10.0, -7.5, -5.0]),
                schemes: schemes(&[SchemeTag::Naive, SchemeTag::AnalyticNaive]),
                ..base
            },
            Scenario::Fig3SinrVsTarget => Self {
                target_sinr_db: Sweep::Many(vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0]),
                ..base
            },
            Scenario::Fig4Secrecy => Self {
                target_sinr_db: Sweep::Many(vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0]),
                schemes: schemes(&[
                    SchemeTag::Perfect,
                    SchemeTag::KnownEcsi,
                    SchemeTag::Naive,
                    SchemeTag::RobustFdd,
                    SchemeTag::RobustTdd,
                ]),
                ..base
            },
            Scenario::Fig5SigmaSweep => Self {
                sigma_h_db: Sweep::Many(vec![-40.0, -35.0, -30.0, -25.0, -20.0, -15.0, -10.0, -5.0]),
                ..base
            },
            Scenario::Custom => base,
        }
    }

    pub fn power_p(&self) -> f64 {
        db_to_linear(self.power_db)
    }

    /// The swept parameter. When nothing is swept the scenario's natural axis is used.
    pub fn axis(&self) -> Result<SweepAxis> {
        let lens = [
            (SweepAxis::Na, self.na.len()),
            (SweepAxis::Nb, self.nb.len()),
            (SweepAxis::Ne, self.ne.len()),
            (SweepAxis::TargetSinrDb, self.target_sinr_db.len()),
            (SweepAxis::SigmaHDb, self.sigma_h_db.len()),
        ];
        let swept: Vec<SweepAxis> = lens.iter().filter(|(_, n)| *n > 1).map(|(a, _)| *a).collect();
        match swept.as_slice() {
            [] => Ok(match self.scenario {
                Scenario::Fig1NeSweep => SweepAxis::Ne,
                Scenario::Fig2Prediction | Scenario::Fig5SigmaSweep => SweepAxis::SigmaHDb,
                _ => SweepAxis::TargetSinrDb,
            }),
            [a] => Ok(*a),
            _ => Err(Error::Config(format!(
                "at most one parameter may be swept, got {}",
                swept.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.trials < 1 {
            return cfg("trials must be ≥ 1".into());
        }
        for (name, n) in [
            ("na", self.na.len()),
            ("nb", self.nb.len()),
            ("ne", self.ne.len()),
            ("target_sinr_db", self.target_sinr_db.len()),
            ("sigma_h_db", self.sigma_h_db.len()),
        ] {
            if n == 0 {
                return cfg(format!("sweep list `{name}` must not be empty"));
            }
        }
        if self.schemes.is_empty() {
            return cfg("at least one scheme is required".into());
        }
        self.axis()?;
        if self.na.values().iter().chain(&self.nb.values()).any(|&n| n == 0) {
            return cfg("na and nb must be ≥ 1".into());
        }
        if self.ne.values().contains(&0) {
            if let Some(s) = self.schemes.iter().find(|s| s.has_eve()) {
                return cfg(format!("scheme `{s}` requires an eavesdropper channel (ne ≥ 1)"));
            }
        }
        if let Some(s) = self.schemes.iter().find(|s| s.needs_moments()) {
            for na in self.na.values() {
                for nb in self.nb.values() {
                    if na < nb {
                        return cfg(format!("scheme `{s}` requires na ≥ nb, got na={na}, nb={nb}"));
                    }
                }
            }
        }
        let finite = |x: f64| x.is_finite();
        if !self.target_sinr_db.values().into_iter().all(finite) {
            return cfg("target_sinr_db must be finite".into());
        }
        if self.sigma_h_db.values().iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return cfg("sigma_h_db must be a number below +inf".into());
        }
        if !(0.0..=1.0).contains(&self.gamma_ecsi) {
            return cfg(format!("gamma_ecsi must lie in [0, 1], got {}", self.gamma_ecsi));
        }
        if !finite(self.power_db) {
            return cfg("power_db must be finite".into());
        }
        for (name, v) in [("sigma_b_sq", self.sigma_b_sq), ("sigma_e_sq", self.sigma_e_sq)] {
            if !(v > 0.0) || !v.is_finite() {
                return cfg(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// Sweep points in axis order.
    pub fn points(&self) -> Result<(SweepAxis, Vec<f64>, Vec<PointParams>)> {
        self.validate()?;
        let axis = self.axis()?;
        let first = |s: &Sweep<usize>| s.values()[0];
        let firstf = |s: &Sweep<f64>| s.values()[0];
        let base = |na, nb, ne, s_db: f64, h_db: f64| PointParams {
            na,
            nb,
            ne,
            target_sinr: db_to_linear(s_db),
            sigma_h_sq: db_to_linear(h_db),
            sigma_h_db: h_db,
        };
        let (na, nb, ne) = (first(&self.na), first(&self.nb), first(&self.ne));
        let (s_db, h_db) = (firstf(&self.target_sinr_db), firstf(&self.sigma_h_db));
        let (values, pts): (Vec<f64>, Vec<PointParams>) = match axis {
            SweepAxis::Na => self.na.values().into_iter().map(|v| (v as f64, base(v, nb, ne, s_db, h_db))).unzip(),
            SweepAxis::Nb => self.nb.values().into_iter().map(|v| (v as f64, base(na, v, ne, s_db, h_db))).unzip(),
            SweepAxis::Ne => self.ne.values().into_iter().map(|v| (v as f64, base(na, nb, v, s_db, h_db))).unzip(),
            SweepAxis::TargetSinrDb => {
                self.target_sinr_db.values().into_iter().map(|v| (v, base(na, nb, ne, v, h_db))).unzip()
            }
            SweepAxis::SigmaHDb => {
                self.sigma_h_db.values().into_iter().map(|v| (v, base(na, nb, ne, s_db, v))).unzip()
            }
        };
        Ok((axis, values, pts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for s in [
            Scenario::Fig1NeSweep,
            Scenario::Fig2Prediction,
            Scenario::Fig3SinrVsTarget,
            Scenario::Fig4Secrecy,
            Scenario::Fig5SigmaSweep,
            Scenario::Custom,
        ] {
            let c = ExperimentConfig::preset(s);
            c.validate().unwrap();
            assert_eq!(c.trials, 3000);
            assert_eq!(c.power_p(), 100.0);
        }
    }

    #[test]
    fn rejects_zero_trials_and_double_sweeps() {
        let c = ExperimentConfig { trials: 0, ..Default::default() };
        assert_eq!(c.validate(), Err(Error::Config("trials must be ≥ 1".into())));
        let c = ExperimentConfig {
            ne: Sweep::Many(vec![1, 2]),
            target_sinr_db: Sweep::Many(vec![1.0, 2.0]),
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = ExperimentConfig { sigma_h_db: Sweep::Many(vec![]), ..Default::default() };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn eve_schemes_need_an_eve_channel() {
        let c = ExperimentConfig {
            ne: Sweep::One(0),
            schemes: schemes(&[SchemeTag::KnownEcsi]),
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(m)) if m.contains("known_ecsi")));
        let c = ExperimentConfig {
            ne: Sweep::One(0),
            schemes: schemes(&[SchemeTag::AnalyticNaive]),
            ..Default::default()
        };
        c.validate().unwrap();
    }

    #[test]
    fn sigma_axis_is_amplitude_in_db() {
        let c = ExperimentConfig { sigma_h_db: Sweep::Many(vec![-20.0, -10.0]), ..Default::default() };
        let (axis, vals, pts) = c.points().unwrap();
        assert_eq!(axis, SweepAxis::SigmaHDb);
        assert_eq!(vals, vec![-20.0, -10.0]);
        assert!((pts[0].sigma_h_sq - 0.01).abs() < 1e-15);
        assert!((pts[1].sigma_h_sq - 0.1).abs() < 1e-15);
    }

    #[test]
    fn db_round_trip() {
        let mut x = -100.0;
        while x <= 100.0 {
            assert!((linear_to_db(db_to_linear(x)) - x).abs() < 1e-12);
            x += 0.37;
        }
    }
}
