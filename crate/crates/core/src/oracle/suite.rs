//! Oracle-equivalence checks: each row compares an engine result with its
//! brute-force Fock-space counterpart.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{
    coherent_fock_vector, lindblad_rk4_evolve, recommended_dimension, reconstruct_gaussian, rk4_step_bound, unitary_overlap_oracle,
};
use crate::analytic::{
    coherent_overlap, conditional_reduction, factor_fidelity, factor_target_state, rotation_frequency, thermal_fidelity_closed_form,
    RotationFrequency,
};
use crate::dissipative::{damped_trajectory, BathSpec};
use crate::error::Result;
use crate::linalg;
use crate::model::{CoherentAmplitude, SystemParams, TargetN};
use crate::state_prep::{build_thermal_joint, ThermalSpec, WindowMode};

pub const OVERLAP_TOLERANCE: f64 = 1e-8;
pub const OVERLAP_ABS_TOLERANCE: f64 = 1e-12;
pub const DAMPED_TOLERANCE: f64 = 1e-6;
pub const UHLMANN_TOLERANCE: f64 = 1e-9;

/// Amplitude of the relative overlap grid. Each level phase `Omega tau l` is
/// rounded at about `1e-13` absolute, while `|eps|` can fall to
/// `exp(-4 |alpha|^2)`, so relative accuracy needs moderate `|alpha|`.
pub const OVERLAP_GRID_ALPHA: f64 = 2.0;
/// Amplitude of the absolute overlap grid and of the damped grid.
pub const REFERENCE_ALPHA: f64 = 5.0;
/// Fock dimension of the absolute overlap grid; the truncation rule leaves a
/// deficit near `1e-11` at `REFERENCE_ALPHA`, above the absolute tolerance.
pub const REFERENCE_DIM: usize = 80;
/// Fock dimension of the damped grid. Displaced thermal states are
/// super-Poissonian, and at `REFERENCE_ALPHA` with `nu` near 1 the coherent
/// truncation rule leaves a deficit near `1e-6`.
pub const DAMPED_DIM: usize = 90;

const GRID_PAIRS: [(u32, u32); 10] = [(2, 7), (3, 5), (5, 3), (2, 2), (3, 4), (4, 4), (2, 8), (6, 7), (8, 8), (0, 3)];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OracleOptions {
    /// Small smoke subset of every grid.
    pub quick: bool,
    /// Forces the Fock dimension instead of the truncation rule.
    pub dim_override: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: &'static str,
    pub case: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub error: Option<String>,
}

impl CheckRow {
    fn from_result(check: &'static str, case: String, tolerance: f64, r: Result<f64>) -> Self {
        match r {
            Ok(deviation) => Self { check, case, deviation, tolerance, error: None },
            Err(e) => Self { check, case, deviation: f64::NAN, tolerance, error: Some(e.to_string()) },
        }
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.deviation < self.tolerance
    }
}

impl fmt::Display for CheckRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "ok" } else { "FAIL" };
        match &self.error {
            Some(e) => write!(f, "{:<12} {:<40} {:>12} {:>10.1e}  {status}: {e}", self.check, self.case, "-", self.tolerance),
            None => write!(f, "{:<12} {:<40} {:>12.3e} {:>10.1e}  {status}", self.check, self.case, self.deviation, self.tolerance),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleReport {
    pub rows: Vec<CheckRow>,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(CheckRow::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.passed())
    }

    /// Largest deviation of one check; `NaN` rows count as failures, not maxima.
    pub fn max_deviation(&self, check: &str) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.check == check && r.error.is_none())
            .map(|r| r.deviation)
            .reduce(f64::max)
    }

    /// Checks in order of first appearance.
    pub fn checks(&self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.check) {
                out.push(r.check);
            }
        }
        out
    }
}

fn reference_params() -> SystemParams {
    SystemParams::single(1.5, 2.0, 1.0, 1, 1.0)
}

fn fifteen() -> TargetN {
    TargetN::new(15).expect("15 is a valid target")
}

/// Bath occupation of a unit-frequency oscillator at `T = 3`.
fn reference_nbar3() -> f64 {
    1.0 / ((1.0f64 / 3.0).exp() - 1.0)
}

fn analytic_overlap(alpha: CoherentAmplitude, params: &SystemParams, n: u32, m: u32, tau: f64) -> Result<Complex64> {
    let reference = rotation_frequency(params, 3, 5)?;
    let branch = rotation_frequency(params, n, m)?;
    Ok(coherent_overlap(alpha, reference, branch, tau).0)
}

/// Analytic overlap vs truncated-Fock inner product: relative error over
/// 10 `(n, m)` pairs and 10 times, plus an absolute sweep at larger `|alpha|`.
pub fn overlap_checks(opts: OracleOptions) -> Vec<CheckRow> {
    let params = reference_params();
    let n = fifteen().value();
    let (pairs, taus): (&[(u32, u32)], Vec<f64>) = if opts.quick {
        (&GRID_PAIRS[..2], vec![0.035, 0.335, 0.635])
    } else {
        (&GRID_PAIRS[..], (0..10).map(|i| 0.035 + 0.1 * i as f64).collect())
    };
    let mut cases = Vec::new();
    for (alpha, check, tol, dim) in [
        (OVERLAP_GRID_ALPHA, "overlap", OVERLAP_TOLERANCE, recommended_dimension(OVERLAP_GRID_ALPHA)),
        (REFERENCE_ALPHA, "overlap-abs", OVERLAP_ABS_TOLERANCE, REFERENCE_DIM),
    ] {
        let dim = opts.dim_override.unwrap_or(dim);
        for &(a, b) in pairs {
            for &tau in &taus {
                cases.push((alpha, check, tol, dim, a, b, tau));
            }
        }
    }
    cases
        .into_par_iter()
        .map(|(alpha, check, tol, dim, a, b, tau)| {
            let amp = CoherentAmplitude::real(alpha);
            let r = unitary_overlap_oracle(amp.0, &params, n, a, b, tau, dim).and_then(|oracle| {
                let exact = analytic_overlap(amp, &params, a, b, tau)?;
                let diff = (oracle - exact).norm();
                Ok(if check == "overlap" { diff / exact.norm() } else { diff })
            });
            let case = format!("|a|={alpha} (n,m)=({a},{b}) tau={tau:.3} d={dim}");
            CheckRow::from_result(check, case, tol, r)
        })
        .collect()
}

/// Exact displaced-thermal trajectory vs RK4 integration of the master
/// equation, trace distance over `Omega x gamma3 x tau`.
pub fn damped_checks(opts: OracleOptions) -> Vec<CheckRow> {
    let (omegas, gammas, taus): (&[f64], &[f64], &[f64]) = if opts.quick {
        (&[1.0, 4.0], &[0.5], &[0.1])
    } else {
        (&[1.0, 4.0, 16.0], &[0.0, 0.5, 1.0], &[0.1, 0.335, 0.6])
    };
    let nbar3 = reference_nbar3();
    let alpha = CoherentAmplitude::real(REFERENCE_ALPHA);
    let dim = opts.dim_override.unwrap_or(DAMPED_DIM);
    let mut cases = Vec::new();
    for &omega in omegas {
        for &gamma in gammas {
            for &tau in taus {
                cases.push((omega, gamma, tau));
            }
        }
    }
    cases
        .into_par_iter()
        .map(|(omega, gamma, tau)| {
            let bath = BathSpec { gamma: [0.0, 0.0, gamma], nbar: [0.0, 0.0, nbar3] };
            let r = coherent_fock_vector(alpha.0, dim).and_then(|v| {
                let dt = rk4_step_bound(omega, &bath);
                let integrated = lindblad_rk4_evolve(&v.projector(), omega, &bath, tau, dt)?;
                let exact = damped_trajectory(alpha, RotationFrequency(omega), &bath, tau);
                integrated.trace_distance(&reconstruct_gaussian(&exact, dim)?)
            });
            let case = format!("Omega={omega} gamma3={gamma} tau={tau} d={dim}");
            CheckRow::from_result("damped", case, DAMPED_TOLERANCE, r)
        })
        .collect()
}

/// Uhlmann fidelity of the reduced state vs the thermal closed form.
///
/// The trial window is evaluated with full dense matrices; the full-support
/// window (thousands of levels) through the exact support-block reduction.
pub fn uhlmann_checks(opts: OracleOptions) -> Vec<CheckRow> {
    let params = reference_params();
    let thermal = ThermalSpec::new(3.0);
    let target = fifteen();
    let (alphas, taus): (&[f64], &[f64]) = if opts.quick {
        (&[5.0], &[0.335])
    } else {
        (&[3.0, 5.0, 8.0], &[0.1, 0.2, 0.335, 0.5, 0.8])
    };
    let mut cases = Vec::new();
    for mode in [WindowMode::PaperWindow, WindowMode::FullSupport] {
        for &alpha in alphas {
            for &tau in taus {
                cases.push((mode, alpha, tau));
            }
        }
    }
    cases
        .into_par_iter()
        .map(|(mode, alpha, tau)| {
            let amp = CoherentAmplitude::real(alpha);
            let r = (|| {
                let state = build_thermal_joint(&params, &thermal, mode, target)?;
                let reduced = conditional_reduction(&state, amp, &params, target, tau)?;
                let factor = factor_target_state(&state, &params, target, tau)?;
                let dense = match mode {
                    WindowMode::FullSupport => factor_fidelity(&factor, &reduced)?,
                    _ => linalg::uhlmann_fidelity(&factor.rho_f.to_dense(), &reduced.rho_r.to_dense())?,
                };
                let closed = thermal_fidelity_closed_form(&params, &thermal, target, amp, tau, mode)?;
                Ok((dense - closed).abs())
            })();
            let case = format!("{} |a|={alpha} tau={tau}", mode.label());
            CheckRow::from_result("uhlmann", case, UHLMANN_TOLERANCE, r)
        })
        .collect()
}

/// Runs every oracle check.
pub fn run_suite(opts: OracleOptions) -> OracleReport {
    let mut rows = overlap_checks(opts);
    rows.extend(damped_checks(opts));
    rows.extend(uhlmann_checks(opts));
    OracleReport { rows }
}
