//! One- and two-parameter sweeps.

use rayon::prelude::*;

use super::{Evaluator, ProtocolConfig, ThresholdOutcome};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    /// Strength of the single coupling.
    G,
    /// Order of the single coupling.
    K,
    /// Modulus of the coherent amplitude.
    Alpha,
    Gamma3,
    /// Measurement time.
    Tau,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 5] = [SweepAxis::G, SweepAxis::K, SweepAxis::Alpha, SweepAxis::Gamma3, SweepAxis::Tau];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::G => "g",
            SweepAxis::K => "k",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Gamma3 => "gamma3",
            SweepAxis::Tau => "tau",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    /// `config` with this parameter set to `value`.
    pub fn apply(self, config: &ProtocolConfig, value: f64) -> Result<ProtocolConfig> {
        let (g, k) = config.leading_coupling();
        let mut c = config.clone();
        match self {
            SweepAxis::G => c.params = c.params.with_single_coupling(k, value),
            SweepAxis::K => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                    return Err(Error::Domain(format!("coupling order must be a positive integer (got {value})")));
                }
                c.params = c.params.with_single_coupling(value as u32, g);
            }
            SweepAxis::Alpha => c = c.with_alpha_modulus(value),
            SweepAxis::Gamma3 => c = c.with_gamma3(value),
            SweepAxis::Tau => c.tau = Some(value),
        }
        Ok(c)
    }
}

/// Measurement time used at every sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauMode {
    Fixed(f64),
    /// Optimal time of each point.
    Optimal,
    /// First time each point reaches the level.
    Threshold(f64),
    /// Optimal time of the base configuration without damping, shared by all points.
    Reference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    /// Optional second parameter; one series per value.
    pub series: Option<(SweepAxis, Vec<f64>)>,
    pub tau_mode: TauMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub tau: f64,
    pub fidelity: f64,
    pub born_probability: f64,
    pub ideal_probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub series: Option<f64>,
    pub value: f64,
    /// Point, or the error that stopped this row.
    pub result: std::result::Result<SweepPoint, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub base: ProtocolConfig,
    pub spec: SweepSpec,
    /// Time shared by all rows under [`TauMode::Reference`].
    pub reference_tau: Option<f64>,
    /// Series-major, in grid order.
    pub rows: Vec<SweepRow>,
}

fn evaluate_point(config: &ProtocolConfig, mode: TauMode) -> Result<SweepPoint> {
    let eval = Evaluator::new(config)?;
    let tau = match (config.tau, mode) {
        (Some(t), _) => t,
        (None, TauMode::Fixed(t)) => t,
        (None, TauMode::Optimal) => {
            eval.optimal_time()?.ok_or_else(|| Error::Domain("no optimal time: all couplings vanish".to_string()))?.tau
        }
        (None, TauMode::Threshold(theta)) => match eval.first_threshold_time(theta)? {
            ThresholdOutcome::Reached { tau, .. } => tau,
            ThresholdOutcome::NeverReached { scanned_to } => {
                return Err(Error::Domain(format!("F = {theta} never reached up to tau = {scanned_to}")))
            }
        },
        (None, TauMode::Reference) => unreachable!("reference time is resolved before evaluation"),
    };
    let (fidelity, born_probability) = eval.outcome(tau)?;
    Ok(SweepPoint { tau, fidelity, born_probability, ideal_probability: eval.ensemble.factor_mass })
}

/// Evaluates every grid point (and series value); rows are independent and
/// run concurrently, and a failing row does not stop the sweep.
pub fn sweep(config: &ProtocolConfig, spec: &SweepSpec) -> Result<SweepTable> {
    if spec.grid.is_empty() || spec.series.as_ref().is_some_and(|(_, s)| s.is_empty()) {
        return Err(Error::EmptyGrid);
    }
    config.validate()?;
    let (mode, reference_tau) = match spec.tau_mode {
        TauMode::Reference => {
            let mut lossless = config.clone().with_gamma3(0.0);
            lossless.tau = None;
            let t = Evaluator::new(&lossless)?
                .optimal_time()?
                .ok_or_else(|| Error::Domain("no reference time: all couplings vanish".to_string()))?
                .tau;
            (TauMode::Fixed(t), Some(t))
        }
        m => (m, None),
    };
    let series: Vec<Option<f64>> = match &spec.series {
        Some((_, values)) => values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let cells: Vec<(Option<f64>, f64)> = series.iter().flat_map(|&s| spec.grid.iter().map(move |&v| (s, v))).collect();
    let rows = cells
        .into_par_iter()
        .map(|(s, value)| {
            let configured = match (s, &spec.series) {
                (Some(sv), Some((axis, _))) => axis.apply(config, sv),
                _ => Ok(config.clone()),
            }
            .and_then(|c| spec.axis.apply(&c, value));
            let result = configured.and_then(|c| evaluate_point(&c, mode)).map_err(|e| e.to_string());
            SweepRow { series: s, value, result }
        })
        .collect();
    Ok(SweepTable { base: config.clone(), spec: spec.clone(), reference_tau, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Preset;

    #[test]
    fn empty_grid_is_rejected() {
        let spec = SweepSpec { axis: SweepAxis::Alpha, grid: vec![], series: None, tau_mode: TauMode::Optimal };
        assert_eq!(sweep(&Preset::Fig2.config(), &spec), Err(Error::EmptyGrid));
    }

    #[test]
    fn row_errors_are_recorded() {
        let spec = SweepSpec { axis: SweepAxis::K, grid: vec![1.0, 1.5, 2.0], series: None, tau_mode: TauMode::Fixed(0.3) };
        let t = sweep(&Preset::Fig2.config(), &spec).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(t.rows[0].result.is_ok() && t.rows[2].result.is_ok());
        assert!(t.rows[1].result.as_ref().unwrap_err().contains("positive integer"));
    }

    #[test]
    fn gamma_sweep_decreases() {
        let spec = SweepSpec { axis: SweepAxis::Gamma3, grid: vec![0.0, 0.5, 1.0], series: None, tau_mode: TauMode::Reference };
        let t = sweep(&Preset::Fig4.config(), &spec).unwrap();
        let f: Vec<f64> = t.rows.iter().map(|r| r.result.as_ref().unwrap().fidelity).collect();
        assert!(f[0] > f[1] && f[1] > f[2], "{f:?}");
        assert!((t.reference_tau.unwrap() - 0.335).abs() < 0.02);
    }

    #[test]
    fn series_are_series_major() {
        let spec = SweepSpec {
            axis: SweepAxis::Alpha,
            grid: vec![3.0, 4.0],
            series: Some((SweepAxis::Gamma3, vec![0.0, 1.0])),
            tau_mode: TauMode::Fixed(0.335),
        };
        let t = sweep(&Preset::Fig2.config(), &spec).unwrap();
        let keys: Vec<(Option<f64>, f64)> = t.rows.iter().map(|r| (r.series, r.value)).collect();
        assert_eq!(keys, vec![(Some(0.0), 3.0), (Some(0.0), 4.0), (Some(1.0), 3.0), (Some(1.0), 4.0)]);
    }
}
