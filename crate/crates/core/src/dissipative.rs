//! Damped oscillator 3 under a thermal bath.
//!
//! With oscillators 1 and 2 in a diagonal (thermal) state their populations
//! are stationary, and each `|n,m>` branch drives oscillator 3 through a
//! damped harmonic oscillator master equation at frequency `Omega_nm`. A
//! coherent initial state stays Gaussian: a displaced thermal state with
//! mean amplitude `mu` and added occupation `nu`.

use num_complex::Complex64;

use crate::analytic::{ConditionalResult, DiagonalEnsemble, RotationFrequency, VANISHING_NORM};
use crate::error::{Error, Result};
use crate::model::{CoherentAmplitude, JointState12, SystemParams, TargetN, Weights};
use crate::state_prep::{build_thermal_joint, mean_occupation, ThermalSpec, WindowMode};

/// Damping rates and bath occupations of the three oscillators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    pub gamma: [f64; 3],
    pub nbar: [f64; 3],
}

impl BathSpec {
    /// No damping at all.
    pub fn lossless() -> Self {
        Self { gamma: [0.0; 3], nbar: [0.0; 3] }
    }

    /// Damping on oscillator 3 only, bath occupations taken from the
    /// temperature of the thermal input.
    pub fn thermal(params: &SystemParams, temperature: f64, gamma3: f64) -> Result<Self> {
        Ok(Self {
            gamma: [0.0, 0.0, gamma3],
            nbar: [
                mean_occupation(params.omega1, temperature)?,
                mean_occupation(params.omega2, temperature)?,
                mean_occupation(params.omega3, temperature)?,
            ],
        })
    }

    pub fn gamma3(&self) -> f64 {
        self.gamma[2]
    }

    pub fn nbar3(&self) -> f64 {
        self.nbar[2]
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        for j in 0..3 {
            if !(self.gamma[j].is_finite() && self.gamma[j] >= 0.0) {
                v.push(format!("gamma{} >= 0 (got {})", j + 1, self.gamma[j]));
            }
            if !(self.nbar[j].is_finite() && self.nbar[j] >= 0.0) {
                v.push(format!("nbar{} >= 0 (got {})", j + 1, self.nbar[j]));
            }
        }
        if v.is_empty() { Ok(()) } else { Err(Error::InvalidConfig(v)) }
    }

    /// Only oscillator 3 may be damped: dissipators on oscillators 1 and 2
    /// would couple the `|n,m>` branches.
    pub fn validate_ansatz(&self) -> Result<()> {
        self.validate()?;
        if self.gamma[0] != 0.0 || self.gamma[1] != 0.0 {
            return Err(Error::InvalidConfig(vec!["gamma1 = gamma2 = 0 required".to_string()]));
        }
        Ok(())
    }
}

/// Displaced thermal state `D(mu) rho_th(nu) D(mu)^dagger` of oscillator 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedGaussianState {
    pub mu: Complex64,
    pub nu: f64,
}

impl DampedGaussianState {
    pub fn coherent(alpha: CoherentAmplitude) -> Self {
        Self { mu: alpha.0, nu: 0.0 }
    }

    /// Exact evolution for a time `tau` at rotation frequency `omega`.
    pub fn evolve(self, omega: f64, gamma: f64, nbar: f64, tau: f64) -> Self {
        let decay = (-gamma * tau).exp();
        Self {
            mu: self.mu * Complex64::new(-0.5 * gamma * tau, -omega * tau).exp(),
            nu: self.nu * decay - nbar * (-gamma * tau).exp_m1(),
        }
    }
}

/// State of oscillator 3 at time `tau` for the branch rotating at `omega`:
/// `mu = alpha e^{-(i Omega + gamma3/2) tau}`, `nu = nbar3 (1 - e^{-gamma3 tau})`.
pub fn damped_trajectory(alpha: CoherentAmplitude, omega: RotationFrequency, bath: &BathSpec, tau: f64) -> DampedGaussianState {
    DampedGaussianState::coherent(alpha).evolve(omega.0, bath.gamma3(), bath.nbar3(), tau)
}

/// Coherent-state expectation `<beta| rho |beta>` of a displaced thermal
/// state.
pub fn q_overlap(beta: Complex64, state: &DampedGaussianState) -> f64 {
    let s = 1.0 + state.nu;
    (-(beta - state.mu).norm_sqr() / s).exp() / s
}

/// Which coherent state oscillator 3 is projected on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Probe {
    /// The damped factor-branch amplitude `alpha e^{-(i Omega_N + gamma3/2) tau}`.
    #[default]
    Damped,
    /// The lossless factor-branch amplitude `alpha e^{-i Omega_N tau}`.
    Lossless,
}

/// Fidelity and Born probability of a dissipative conditional measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipativeOutcome {
    pub fidelity: f64,
    pub born_probability: f64,
}

/// Conditional weights `q_nm` of every ensemble term.
///
/// Evaluated in the frame rotating at `Omega_N`: `q` depends only on
/// `|beta - mu|`, which a common rotation leaves unchanged, and the branch
/// frequencies become the exactly-known gaps.
fn branch_weights(alpha: CoherentAmplitude, bath: &BathSpec, probe: Probe, tau: f64) -> impl Fn(f64) -> f64 + '_ {
    let beta = match probe {
        Probe::Damped => damped_trajectory(alpha, RotationFrequency(0.0), bath, tau).mu,
        Probe::Lossless => alpha.0,
    };
    move |gap: f64| {
        let state = damped_trajectory(alpha, RotationFrequency(-gap), bath, tau);
        q_overlap(beta, &state)
    }
}

impl DiagonalEnsemble {
    /// `(F, A)` with oscillator 3 damped.
    pub fn dissipative_fidelity(&self, alpha: CoherentAmplitude, bath: &BathSpec, probe: Probe, tau: f64) -> Result<DissipativeOutcome> {
        let (factor, born) = self.conditional_sums(branch_weights(alpha, bath, probe, tau));
        if !(born >= VANISHING_NORM) {
            return Err(Error::VanishingNorm(born));
        }
        Ok(DissipativeOutcome { fidelity: (factor / born).clamp(0.0, 1.0), born_probability: born })
    }
}

/// Reduced state of oscillators 1 and 2 after conditioning a damped
/// oscillator 3; diagonal inputs only.
pub fn dissipative_conditional_reduction(
    state: &JointState12,
    params: &SystemParams,
    bath: &BathSpec,
    probe: Probe,
    target: TargetN,
    alpha: CoherentAmplitude,
    tau: f64,
) -> Result<ConditionalResult> {
    bath.validate_ansatz()?;
    let ensemble = DiagonalEnsemble::new(state, params, target)?;
    let q = branch_weights(alpha, bath, probe, tau);
    let unnormalized: Vec<f64> = ensemble.terms.iter().map(|t| t.weight * q(t.gap)).collect();
    let born: f64 = unnormalized.iter().sum();
    if !(born >= VANISHING_NORM) {
        return Err(Error::VanishingNorm(born));
    }
    let ideal = ensemble.terms.iter().filter(|t| t.is_factor).map(|t| t.weight).sum();
    Ok(ConditionalResult {
        window: state.window(),
        rho_r: Weights::Diagonal(unnormalized.into_iter().map(|w| w / born).collect()),
        born_probability: born,
        ideal_probability: ideal,
        tau,
    })
}

/// Fidelity of the factor state for thermal inputs with a damped oscillator 3:
/// `F = sum_{rs=N} p q_N / sum_nm p q_nm`.
#[allow(clippy::too_many_arguments)]
pub fn dissipative_thermal_fidelity(
    params: &SystemParams,
    thermal: &ThermalSpec,
    bath: &BathSpec,
    probe: Probe,
    target: TargetN,
    alpha: CoherentAmplitude,
    tau: f64,
    mode: WindowMode,
) -> Result<DissipativeOutcome> {
    bath.validate_ansatz()?;
    let state = build_thermal_joint(params, thermal, mode, target)?;
    DiagonalEnsemble::new(&state, params, target)?.dissipative_fidelity(alpha, bath, probe, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::thermal_fidelity_closed_form;
    use proptest::prelude::*;

    fn fig_params() -> SystemParams {
        SystemParams::single(1.5, 2.0, 1.0, 1, 1.0)
    }

    fn bath(gamma3: f64) -> BathSpec {
        BathSpec::thermal(&fig_params(), 3.0, gamma3).unwrap()
    }

    fn n15() -> TargetN {
        TargetN::new(15).unwrap()
    }

    #[test]
    fn lossless_limit_is_rotation() {
        let a = CoherentAmplitude::from_polar(2.0, 0.3);
        let s = damped_trajectory(a, RotationFrequency(16.0), &bath(0.0), 0.7);
        assert!((s.mu - a.0 * Complex64::new(0.0, -16.0 * 0.7).exp()).norm() < 1e-14);
        assert_eq!(s.nu, 0.0);
    }

    #[test]
    fn long_time_limit_is_thermal() {
        let b = bath(1.0);
        let s = damped_trajectory(CoherentAmplitude::real(5.0), RotationFrequency(3.0), &b, 60.0);
        assert!(s.mu.norm() < 1e-12);
        assert!((s.nu - b.nbar3()).abs() < 1e-12);
    }

    #[test]
    fn q_overlap_examples() {
        let mu = Complex64::new(1.0, -2.0);
        assert!((q_overlap(mu, &DampedGaussianState { mu, nu: 0.0 }) - 1.0).abs() < 1e-15);
        let beta = Complex64::new(0.3, 0.4);
        let pure = DampedGaussianState { mu, nu: 0.0 };
        assert!((q_overlap(beta, &pure) - (-(beta - mu).norm_sqr()).exp()).abs() < 1e-15);
        // thermal Q function at the origin: sum over the vacuum component only
        let oracle: f64 = 1.0 / 3.0;
        assert!((q_overlap(mu, &DampedGaussianState { mu, nu: 2.0 }) - oracle).abs() < 1e-15);
    }

    #[test]
    fn lossless_pipeline_reproduces_closed_form() {
        for mode in [WindowMode::FullSupport, WindowMode::PaperWindow] {
            for (alpha, tau) in [(3.0, 0.335), (5.0, 0.2), (8.0, 0.9)] {
                let a = CoherentAmplitude::real(alpha);
                let d = dissipative_thermal_fidelity(&fig_params(), &ThermalSpec::new(3.0), &bath(0.0), Probe::Damped, n15(), a, tau, mode).unwrap();
                let c = thermal_fidelity_closed_form(&fig_params(), &ThermalSpec::new(3.0), n15(), a, tau, mode).unwrap();
                assert!((d.fidelity - c).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn damping_hurts_small_amplitudes() {
        let run = |alpha: f64, gamma3: f64| {
            dissipative_thermal_fidelity(&fig_params(), &ThermalSpec::new(3.0), &bath(gamma3), Probe::Damped, n15(), CoherentAmplitude::real(alpha), 0.335, WindowMode::FullSupport)
                .unwrap()
                .fidelity
        };
        assert!(run(3.0, 1.0) < run(3.0, 0.0));
        assert!(run(5.0, 1.0) < run(5.0, 0.5) && run(5.0, 0.5) < run(5.0, 0.0));
    }

    #[test]
    fn damping_on_modes_one_and_two_is_rejected() {
        let mut b = bath(0.5);
        b.gamma[0] = 0.1;
        let r = dissipative_thermal_fidelity(&fig_params(), &ThermalSpec::new(3.0), &b, Probe::Damped, n15(), CoherentAmplitude::real(5.0), 0.3, WindowMode::FullSupport);
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn conditional_reduction_is_normalized() {
        let state = build_thermal_joint(&fig_params(), &ThermalSpec::new(3.0), WindowMode::FullSupport, n15()).unwrap();
        let r = dissipative_conditional_reduction(&state, &fig_params(), &bath(0.5), Probe::Damped, n15(), CoherentAmplitude::real(6.0), 0.335).unwrap();
        assert!((r.rho_r.trace() - 1.0).abs() < 1e-12);
        assert!((r.ideal_probability / 3.65e-3 - 1.0).abs() < 5e-3);
    }

    proptest! {
        #[test]
        fn trajectory_is_a_semigroup(
            re in -5.0f64..5.0, im in -5.0f64..5.0, omega in 0.0f64..30.0,
            gamma in 0.0f64..2.0, nbar in 0.0f64..3.0, t1 in 0.0f64..2.0, t2 in 0.0f64..2.0,
        ) {
            let s0 = DampedGaussianState::coherent(CoherentAmplitude(Complex64::new(re, im)));
            let direct = s0.evolve(omega, gamma, nbar, t1 + t2);
            let composed = s0.evolve(omega, gamma, nbar, t1).evolve(omega, gamma, nbar, t2);
            prop_assert!((direct.mu - composed.mu).norm() < 1e-12);
            prop_assert!((direct.nu - composed.nu).abs() < 1e-12);
            prop_assert!(direct.nu >= 0.0 && direct.nu <= nbar + 1e-15);
        }

        #[test]
        fn q_overlap_is_a_bounded_decreasing_profile(nu in 0.0f64..5.0, r1 in 0.0f64..6.0, r2 in 0.0f64..6.0, phase in 0.0f64..std::f64::consts::TAU) {
            let state = DampedGaussianState { mu: Complex64::new(0.5, -0.5), nu };
            let at = |r: f64| q_overlap(state.mu + Complex64::from_polar(r, phase), &state);
            prop_assert!(at(r1) > 0.0 && at(r1) <= 1.0);
            if r2 > r1 + 1e-6 {
                prop_assert!(at(r1) > at(r2));
            }
        }
    }
}
