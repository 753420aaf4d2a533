//! Factor extraction and the end-to-end pipeline.

use std::time::Instant;

use super::{Evaluator, FidelitySeries, PeakKind, ProtocolConfig};
use crate::analytic::{conditional_reduction, ConditionalResult};
use crate::dissipative::dissipative_conditional_reduction;
use crate::error::{Error, Result};
use crate::model::{factor_pairs_in_window, validate_params, TargetN};

/// An ordered pair of trial factors with its population in the reduced state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorPair {
    pub r: u32,
    pub s: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorOutcome {
    /// At least one integer-verified pair above the weight threshold.
    Success,
    /// `N` has no non-trivial factor pair inside the trial window.
    NoFactorPairInWindow,
    /// All couplings vanish, so conditioning leaves the input unchanged.
    MeasurementUninformative,
    /// Factor pairs exist in the window but none was resolved.
    NoVerifiedPair,
}

impl FactorOutcome {
    pub fn label(self) -> &'static str {
        match self {
            FactorOutcome::Success => "success",
            FactorOutcome::NoFactorPairInWindow => "no factor pair in window",
            FactorOutcome::MeasurementUninformative => "measurement uninformative",
            FactorOutcome::NoVerifiedPair => "no verified pair",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorReport {
    pub n: u64,
    /// Verified pairs, `r * s = N` in integer arithmetic.
    pub pairs: Vec<FactorPair>,
    /// Pairs above the threshold that fail verification.
    pub contaminants: Vec<FactorPair>,
    pub born_probability: f64,
    pub ideal_probability: f64,
    pub tau: f64,
    pub success: bool,
    pub outcome: FactorOutcome,
}

/// Reads the populations of the reduced state and reports every pair at or
/// above `weight_threshold`, split by integer verification.
pub fn extract_factors(result: &ConditionalResult, target: TargetN, weight_threshold: f64) -> Result<FactorReport> {
    if !(weight_threshold > 0.0 && weight_threshold < 1.0) {
        return Err(Error::Domain(format!("weight threshold must lie in (0, 1) (got {weight_threshold})")));
    }
    let n = target.value();
    let mut pairs = Vec::new();
    let mut contaminants = Vec::new();
    for idx in 0..result.window.dim() {
        let weight = result.rho_r.population(idx);
        if weight < weight_threshold {
            continue;
        }
        let (r, s) = result.window.pair(idx);
        let verified = r >= 2 && s >= 2 && (r as u64).checked_mul(s as u64) == Some(n);
        let pair = FactorPair { r, s, weight };
        if verified { pairs.push(pair) } else { contaminants.push(pair) }
    }
    let success = !pairs.is_empty();
    Ok(FactorReport {
        n,
        pairs,
        contaminants,
        born_probability: result.born_probability,
        ideal_probability: result.ideal_probability,
        tau: result.tau,
        success,
        outcome: if success { FactorOutcome::Success } else { FactorOutcome::NoVerifiedPair },
    })
}

/// Where the measurement time of a run came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauSource {
    Configured,
    FirstExcursion,
    GlobalMaximum,
    /// No search was possible or needed; `tau = 0`.
    NotSearched,
}

impl TauSource {
    pub fn label(self) -> &'static str {
        match self {
            TauSource::Configured => "configured",
            TauSource::FirstExcursion => "first-excursion",
            TauSource::GlobalMaximum => "global-maximum",
            TauSource::NotSearched => "not-searched",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub report: FactorReport,
    pub curve: FidelitySeries,
    pub tau_source: TauSource,
    pub warnings: Vec<String>,
    pub threads: usize,
    pub wall_clock_seconds: f64,
}

/// Prepare, evolve, condition and extract; errors carry the stage name.
pub fn run_protocol(config: &ProtocolConfig) -> Result<ProtocolRun> {
    let started = Instant::now();
    let eval = Evaluator::new(config).map_err(|e| e.in_stage("prepare"))?;
    let window = eval.state.window();
    let warnings = validate_params(&config.params, &window, config.target.value()).warnings;
    let curve = eval.fidelity_curve(&config.curve.values()).map_err(|e| e.in_stage("curve"))?;

    let has_factors = !factor_pairs_in_window(config.target, &window).is_empty();
    let uncoupled = config.params.is_uncoupled();
    let (tau, tau_source) = match config.tau {
        Some(t) => (t, TauSource::Configured),
        None if !has_factors || uncoupled => (0.0, TauSource::NotSearched),
        None => match eval.optimal_time().map_err(|e| e.in_stage("evolve"))? {
            Some(t) if t.kind == PeakKind::FirstExcursion => (t.tau, TauSource::FirstExcursion),
            Some(t) => (t.tau, TauSource::GlobalMaximum),
            None => (0.0, TauSource::NotSearched),
        },
    };

    let conditioned = if eval.is_lossless() {
        conditional_reduction(&eval.state, config.alpha, &config.params, config.target, tau)
    } else {
        dissipative_conditional_reduction(&eval.state, &config.params, &config.bath, config.probe, config.target, config.alpha, tau)
    }
    .map_err(|e| e.in_stage("condition"))?;

    let mut report = extract_factors(&conditioned, config.target, config.weight_threshold).map_err(|e| e.in_stage("extract"))?;
    if !has_factors {
        report.outcome = FactorOutcome::NoFactorPairInWindow;
    } else if uncoupled {
        report.outcome = FactorOutcome::MeasurementUninformative;
        report.success = false;
    }
    Ok(ProtocolRun {
        report,
        curve,
        tau_source,
        warnings,
        threads: rayon::current_num_threads(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Preset;
    use crate::model::{TrialWindow, Weights};
    use crate::state_prep::WindowMode;

    fn pair_set(r: &FactorReport) -> Vec<(u32, u32)> {
        let mut v: Vec<_> = r.pairs.iter().map(|p| (p.r, p.s)).collect();
        v.sort();
        v
    }

    #[test]
    fn fig2_pipeline_factors_fifteen() {
        let c = Preset::Fig2.config().with_alpha_modulus(7.0);
        let run = run_protocol(&c).unwrap();
        assert!(run.report.success);
        assert_eq!(pair_set(&run.report), vec![(3, 5), (5, 3)]);
        assert!((run.report.ideal_probability - 3.65e-3).abs() < 3.65e-3 * 0.005);
        assert_eq!(run.tau_source, TauSource::FirstExcursion);
    }

    #[test]
    fn prime_target_has_no_pairs() {
        let mut c = Preset::Fig2.config();
        c.target = TargetN::new(13).unwrap();
        c.window_mode = WindowMode::Explicit(TrialWindow::new(2, 7).unwrap());
        let run = run_protocol(&c).unwrap();
        assert!(!run.report.success);
        assert!(run.report.pairs.is_empty());
        assert_eq!(run.report.outcome, FactorOutcome::NoFactorPairInWindow);
    }

    #[test]
    fn uncoupled_run_is_uninformative() {
        let mut c = Preset::Fig2.config();
        c.window_mode = WindowMode::PaperWindow;
        c.params = c.params.with_single_coupling(1, 0.0);
        let run = run_protocol(&c).unwrap();
        assert_eq!(run.report.outcome, FactorOutcome::MeasurementUninformative);
        assert!(!run.report.success);
        assert!(run.warnings.iter().any(|w| w.contains("no information")));
    }

    #[test]
    fn unverified_heavy_pairs_are_contaminants() {
        let window = TrialWindow::new(2, 4).unwrap();
        let mut w = vec![0.0; window.dim()];
        w[window.index(3, 4).unwrap()] = 0.7;
        w[window.index(2, 2).unwrap()] = 0.3;
        let result = ConditionalResult {
            window,
            rho_r: Weights::Diagonal(w),
            born_probability: 1.0,
            ideal_probability: 0.0,
            tau: 0.1,
        };
        let r = extract_factors(&result, TargetN::new(15).unwrap(), 0.05).unwrap();
        assert!(!r.success);
        assert_eq!(r.contaminants.len(), 2);
        assert!(extract_factors(&result, TargetN::new(12).unwrap(), 0.05).unwrap().success);
        assert!(extract_factors(&result, TargetN::new(12).unwrap(), 1.0).is_err());
    }

    #[test]
    fn stage_labels_are_attached() {
        let mut c = Preset::Fig2.config();
        c.peak_level = 2.0;
        let err = run_protocol(&c).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "prepare", .. }));
        assert!(matches!(err.root(), Error::InvalidConfig(_)));
    }
}
