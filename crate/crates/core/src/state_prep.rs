//! Initial joint states of oscillators 1 and 2.

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::{JointState12, SystemParams, TargetN, TrialWindow, Weights};

/// Default omitted-tail mass for full-support thermal states.
pub const DEFAULT_TAIL_CUTOFF: f64 = 1e-12;

/// Temperature (units of omega3 / k_B) and truncation of a thermal input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalSpec {
    pub temperature: f64,
    pub tail_cutoff: f64,
}

impl ThermalSpec {
    pub fn new(temperature: f64) -> Self {
        Self { temperature, tail_cutoff: DEFAULT_TAIL_CUTOFF }
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            v.push(format!("T > 0 (got {})", self.temperature));
        }
        if !(self.tail_cutoff > 0.0 && self.tail_cutoff <= 1e-6) {
            v.push(format!("tail_cutoff in (0, 1e-6] (got {})", self.tail_cutoff));
        }
        if v.is_empty() { Ok(()) } else { Err(Error::InvalidConfig(v)) }
    }
}

/// How the trial window of a thermal input is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    /// `[0, n*]` with `n*` adaptive; raw weights, flagged as sub-normalized.
    FullSupport,
    /// `[2, ceil(N/2)]`, renormalized to unit trace.
    PaperWindow,
    /// Caller-supplied window, renormalized to unit trace.
    Explicit(TrialWindow),
}

impl WindowMode {
    pub fn label(&self) -> &'static str {
        match self {
            WindowMode::FullSupport => "full-support",
            WindowMode::PaperWindow => "paper-window",
            WindowMode::Explicit(_) => "explicit",
        }
    }
}

fn check_domain(omega: f64, temperature: f64) -> Result<()> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::Domain(format!("temperature must be positive (got {temperature})")));
    }
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::Domain(format!("frequency must be positive (got {omega})")));
    }
    Ok(())
}

/// Boltzmann weight `(1 - e^{-w/T}) e^{-n w/T}` of the number state `|n>`.
pub fn thermal_probability(omega: f64, temperature: f64, n: u32) -> Result<f64> {
    check_domain(omega, temperature)?;
    let x = omega / temperature;
    Ok(-(-x).exp_m1() * (-(n as f64) * x).exp())
}

/// Bose-Einstein occupation `1 / (e^{w/T} - 1)`.
pub fn mean_occupation(omega: f64, temperature: f64) -> Result<f64> {
    check_domain(omega, temperature)?;
    Ok(1.0 / (omega / temperature).exp_m1())
}

/// Smallest `n` whose marginal tail `sum_{n' > n} p_n' = e^{-(n+1) w/T}`
/// drops below `cutoff`.
fn tail_level(omega: f64, temperature: f64, cutoff: f64) -> u32 {
    let x = omega / temperature;
    let mut n = 0u32;
    while (-((n + 1) as f64) * x).exp() >= cutoff {
        n += 1;
    }
    n
}

/// Diagonal thermal state `p_1n p_2m` of oscillators 1 and 2.
pub fn build_thermal_joint(
    params: &SystemParams,
    spec: &ThermalSpec,
    mode: WindowMode,
    target: TargetN,
) -> Result<JointState12> {
    spec.validate()?;
    let t = spec.temperature;
    let (window, renormalize) = match mode {
        WindowMode::FullSupport => {
            // each marginal tail below cutoff/2 so the joint tail is below cutoff
            let half = spec.tail_cutoff / 2.0;
            let top = tail_level(params.omega1, t, half).max(tail_level(params.omega2, t, half)).max(1);
            (TrialWindow::new(0, top)?, false)
        }
        WindowMode::PaperWindow => (TrialWindow::for_target(target), true),
        WindowMode::Explicit(w) => (TrialWindow::new(w.n_min, w.n_max)?, true),
    };
    let p1: Vec<f64> = (window.n_min..=window.n_max)
        .map(|n| thermal_probability(params.omega1, t, n))
        .collect::<Result<_>>()?;
    let p2: Vec<f64> = (window.n_min..=window.n_max)
        .map(|m| thermal_probability(params.omega2, t, m))
        .collect::<Result<_>>()?;
    let mut weights: Vec<f64> = p1.iter().flat_map(|a| p2.iter().map(move |b| a * b)).collect();
    if renormalize {
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
    }
    JointState12::new(window, Weights::Diagonal(weights), !renormalize)
}

/// Equal mixture of every `|n, m>` in the window.
pub fn build_uniform_joint(window: TrialWindow) -> Result<JointState12> {
    let dim = TrialWindow::new(window.n_min, window.n_max)?.dim();
    JointState12::new(window, Weights::Diagonal(vec![1.0 / dim as f64; dim]), false)
}

/// Arbitrary user-supplied weight matrix, possibly with coherences.
pub fn build_custom_joint(window: TrialWindow, weights: CMatrix) -> Result<JointState12> {
    JointState12::new(window, Weights::Dense(weights), false)
}
