//! Experiment drivers: fidelity curves, time searches, parameter sweeps and
//! the end-to-end factoring pipeline.

mod protocol;
mod search;
mod sweep;

pub use protocol::{extract_factors, run_protocol, FactorOutcome, FactorPair, FactorReport, ProtocolRun, TauSource};
pub use search::{
    fidelity_curve, first_threshold_time, optimal_time, FidelitySeries, OptimalTime, PeakKind, ThresholdOutcome,
};
pub use sweep::{sweep, SweepAxis, SweepPoint, SweepRow, SweepSpec, SweepTable, TauMode};

use crate::analytic::DiagonalEnsemble;
use crate::dissipative::{BathSpec, Probe};
use crate::error::{Error, Result};
use crate::model::{validate_params, CoherentAmplitude, JointState12, SystemParams, TargetN, TrialWindow};
use crate::state_prep::{build_thermal_joint, ThermalSpec, WindowMode};

/// Default level whose first excursion defines the optimal time.
pub const DEFAULT_PEAK_LEVEL: f64 = 0.5;
/// Default population above which a pair is reported.
pub const DEFAULT_WEIGHT_THRESHOLD: f64 = 0.05;

/// `points` equally spaced times from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl TauGrid {
    pub fn new(start: f64, stop: f64, points: usize) -> Result<Self> {
        let g = Self { start, stop, points };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::EmptyGrid);
        }
        let ok = self.start.is_finite() && self.stop.is_finite() && self.start >= 0.0;
        if !ok || (self.points > 1 && self.stop <= self.start) {
            return Err(Error::InvalidConfig(vec![format!(
                "tau grid needs 0 <= start < stop (got {}..{})",
                self.start, self.stop
            )]));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + step * i as f64).collect()
    }
}

/// Everything needed to run one protocol instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub params: SystemParams,
    pub thermal: ThermalSpec,
    pub bath: BathSpec,
    pub probe: Probe,
    pub target: TargetN,
    pub alpha: CoherentAmplitude,
    pub window_mode: WindowMode,
    /// Measurement time; the optimal time is searched when absent.
    pub tau: Option<f64>,
    pub peak_level: f64,
    pub weight_threshold: f64,
    pub curve: TauGrid,
}

impl ProtocolConfig {
    /// Single coupling `g (nm)^k`, thermal inputs at `temperature`, lossless
    /// oscillator 3 and a diagnostic curve over `[0, 1]`.
    pub fn standard(omegas: [f64; 3], order: u32, strength: f64, temperature: f64, target: TargetN, alpha: f64) -> Result<Self> {
        let params = SystemParams::single(omegas[0], omegas[1], omegas[2], order, strength);
        let bath = BathSpec::thermal(&params, temperature, 0.0)?;
        Ok(Self {
            params,
            thermal: ThermalSpec::new(temperature),
            bath,
            probe: Probe::default(),
            target,
            alpha: CoherentAmplitude::real(alpha),
            window_mode: WindowMode::FullSupport,
            tau: None,
            peak_level: DEFAULT_PEAK_LEVEL,
            weight_threshold: DEFAULT_WEIGHT_THRESHOLD,
            curve: TauGrid { start: 0.0, stop: 1.0, points: 1001 },
        })
    }

    pub fn with_gamma3(mut self, gamma3: f64) -> Self {
        self.bath.gamma[2] = gamma3;
        self
    }

    pub fn with_alpha_modulus(mut self, modulus: f64) -> Self {
        self.alpha = CoherentAmplitude::from_polar(modulus, self.alpha.0.arg());
        self
    }

    /// Strength and order of the first coupling, `(0, 1)` when uncoupled.
    pub fn leading_coupling(&self) -> (f64, u32) {
        self.params.couplings.first().map_or((0.0, 1), |c| (c.strength, c.order))
    }

    /// Checks every field; all violations are collected.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        let mut collect = |r: Result<()>| {
            if let Err(e) = r {
                match e {
                    Error::InvalidConfig(list) => v.extend(list),
                    other => v.push(other.to_string()),
                }
            }
        };
        collect(self.thermal.validate());
        collect(self.bath.validate_ansatz());
        collect(self.curve.validate());
        let mut own = Vec::new();
        if !(self.alpha.0.re.is_finite() && self.alpha.0.im.is_finite()) {
            own.push(format!("alpha finite (got {})", self.alpha.0));
        }
        if let Some(t) = self.tau {
            if !(t.is_finite() && t >= 0.0) {
                own.push(format!("tau >= 0 (got {t})"));
            }
        }
        if !(self.peak_level > 0.0 && self.peak_level < 1.0) {
            own.push(format!("peak_level in (0, 1) (got {})", self.peak_level));
        }
        if !(self.weight_threshold > 0.0 && self.weight_threshold < 1.0) {
            own.push(format!("weight_threshold in (0, 1) (got {})", self.weight_threshold));
        }
        let paper = TrialWindow::for_target(self.target);
        let window = match self.window_mode {
            WindowMode::Explicit(w) => w,
            WindowMode::PaperWindow => paper,
            // the adaptive window starts at 0 and always covers the paper window
            WindowMode::FullSupport => TrialWindow { n_min: 0, n_max: paper.n_max },
        };
        own.extend(validate_params(&self.params, &window, self.target.value()).violations);
        v.extend(own);
        if v.is_empty() { Ok(()) } else { Err(Error::InvalidConfig(v)) }
    }
}

/// The parameter sets behind the four published figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Fidelity against time for three coupling strengths, N = 15.
    Fig2,
    /// Time to first reach `F = 0.9` against `g` for `k = 1..4`.
    Fig3,
    /// Fidelity against `|alpha|` for three damping rates.
    Fig4,
    /// N = 35 with larger amplitudes.
    Fig5,
}

pub const FIG_OMEGAS: [f64; 3] = [1.5, 2.0, 1.0];
pub const FIG_TEMPERATURE: f64 = 3.0;

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Fig2, Preset::Fig3, Preset::Fig4, Preset::Fig5];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Base configuration of the preset.
    pub fn config(self) -> ProtocolConfig {
        let (n, alpha) = match self {
            Preset::Fig2 | Preset::Fig4 => (15, 5.0),
            Preset::Fig3 => (15, 6.0),
            Preset::Fig5 => (35, 10.0),
        };
        let target = TargetN::new(n).expect("preset targets are valid");
        ProtocolConfig::standard(FIG_OMEGAS, 1, 1.0, FIG_TEMPERATURE, target, alpha).expect("preset parameters are valid")
    }

    /// Parameter varied between the curves plotted together, and its values.
    pub fn curve_axis(self) -> (SweepAxis, Vec<f64>) {
        match self {
            Preset::Fig2 => (SweepAxis::G, vec![1.0, 0.9, 0.8]),
            Preset::Fig3 => (SweepAxis::K, vec![1.0, 2.0, 3.0, 4.0]),
            Preset::Fig4 => (SweepAxis::Gamma3, vec![0.0, 0.5, 1.0]),
            Preset::Fig5 => (SweepAxis::Alpha, vec![6.0, 8.0, 10.0]),
        }
    }

    /// Configurations whose curves are plotted together.
    pub fn curve_series(self) -> Vec<ProtocolConfig> {
        let base = self.config();
        let (axis, values) = self.curve_axis();
        values.into_iter().map(|v| axis.apply(&base, v).expect("preset series values are valid")).collect()
    }

    /// The sweep reproducing the figure's x-axis.
    pub fn sweep_spec(self) -> SweepSpec {
        match self {
            Preset::Fig2 => SweepSpec {
                axis: SweepAxis::G,
                grid: vec![0.8, 0.9, 1.0],
                series: None,
                tau_mode: TauMode::Optimal,
            },
            Preset::Fig3 => SweepSpec {
                axis: SweepAxis::G,
                grid: (0..11).map(|i| 0.5 + 0.1 * i as f64).collect(),
                series: Some((SweepAxis::K, vec![1.0, 2.0, 3.0, 4.0])),
                tau_mode: TauMode::Threshold(0.9),
            },
            Preset::Fig4 => SweepSpec {
                axis: SweepAxis::Alpha,
                grid: (0..=20).map(|i| 3.0 + 0.25 * i as f64).collect(),
                series: Some((SweepAxis::Gamma3, vec![0.0, 0.5, 1.0])),
                tau_mode: TauMode::Reference,
            },
            Preset::Fig5 => SweepSpec {
                axis: SweepAxis::Alpha,
                grid: (0..=16).map(|i| 4.0 + 0.5 * i as f64).collect(),
                series: None,
                tau_mode: TauMode::Optimal,
            },
        }
    }
}

/// Precomputed ensemble of a configuration, ready for repeated fidelity
/// evaluations.
#[derive(Debug, Clone)]
pub struct Evaluator {
    pub config: ProtocolConfig,
    pub state: JointState12,
    pub ensemble: DiagonalEnsemble,
}

/// Relative weight (to the factor mass) below which terms do not set the
/// scan resolution.
pub const SCAN_WEIGHT_CUT: f64 = 1e-4;
/// Grid points per period of the fastest significant oscillation.
pub const SCAN_POINTS_PER_PERIOD: f64 = 64.0;

impl Evaluator {
    pub fn new(config: &ProtocolConfig) -> Result<Self> {
        config.validate()?;
        let state = build_thermal_joint(&config.params, &config.thermal, config.window_mode, config.target)?;
        let ensemble = DiagonalEnsemble::new(&state, &config.params, config.target)?;
        Ok(Self { config: config.clone(), state, ensemble })
    }

    pub fn is_lossless(&self) -> bool {
        self.config.bath.gamma3() == 0.0
    }

    /// `(F, A)` at time `tau`.
    pub fn outcome(&self, tau: f64) -> Result<(f64, f64)> {
        if self.is_lossless() {
            self.ensemble.fidelity_and_born(self.config.alpha, tau)
        } else {
            let o = self.ensemble.dissipative_fidelity(self.config.alpha, &self.config.bath, self.config.probe, tau)?;
            Ok((o.fidelity, o.born_probability))
        }
    }

    pub fn fidelity(&self, tau: f64) -> Result<f64> {
        Ok(self.outcome(tau)?.0)
    }

    /// Scan step resolving the fastest significant gap, `None` when every
    /// gap vanishes.
    pub fn scan_step(&self) -> Option<f64> {
        let g = self.ensemble.significant_max_gap(SCAN_WEIGHT_CUT);
        (g > 0.0).then(|| 2.0 * std::f64::consts::PI / (SCAN_POINTS_PER_PERIOD * g))
    }

    /// One recurrence period `2 pi / g_min`.
    pub fn horizon(&self) -> Option<f64> {
        self.config.params.min_positive_strength().map(|g| 2.0 * std::f64::consts::PI / g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_grid_values() {
        let g = TauGrid::new(0.0, 1.0, 5).unwrap();
        assert_eq!(g.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(matches!(TauGrid::new(0.0, 1.0, 0), Err(Error::EmptyGrid)));
        assert!(TauGrid::new(1.0, 0.5, 3).is_err());
    }

    #[test]
    fn presets_are_valid() {
        for p in Preset::ALL {
            p.config().validate().unwrap();
            assert_eq!(Preset::from_name(p.name()), Some(p));
            for c in p.curve_series() {
                c.validate().unwrap();
            }
        }
        assert_eq!(Preset::Fig5.config().target.value(), 35);
    }

    #[test]
    fn validation_collects_all_violations() {
        let mut c = Preset::Fig2.config();
        c.peak_level = 1.5;
        c.weight_threshold = 0.0;
        c.bath.gamma[0] = 0.1;
        let Err(Error::InvalidConfig(v)) = c.validate() else { panic!() };
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn four_needs_the_full_support_window() {
        let mut c = Preset::Fig2.config();
        c.target = TargetN::new(4).unwrap();
        let run = run_protocol(&c).unwrap();
        assert_eq!(run.report.pairs.iter().map(|p| (p.r, p.s)).collect::<Vec<_>>(), vec![(2, 2)]);
        c.window_mode = WindowMode::PaperWindow;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn lossless_evaluator_matches_closed_form() {
        let c = Preset::Fig2.config();
        let e = Evaluator::new(&c).unwrap();
        let closed = crate::analytic::thermal_fidelity_closed_form(
            &c.params,
            &c.thermal,
            c.target,
            c.alpha,
            0.335,
            c.window_mode,
        )
        .unwrap();
        assert_eq!(e.fidelity(0.335).unwrap(), closed);
    }
}
