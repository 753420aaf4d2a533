//! Closed-form evolution and conditional measurement.
//!
//! The Hamiltonian is diagonal in the number basis of oscillators 1 and 2, so
//! conditioning on a coherent state of oscillator 3 only rescales each entry
//! of the joint weight matrix by the overlaps `eps_nm`. Nothing here builds a
//! three-mode state.

use std::collections::btree_map::{BTreeMap, Entry};
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{factor_pairs_in_window, CoherentAmplitude, JointState12, SystemParams, TargetN, TrialWindow, Weights};
use crate::state_prep::{build_thermal_joint, ThermalSpec, WindowMode};

/// Conditional probabilities below this are treated as zero.
pub const VANISHING_NORM: f64 = 1e-30;

/// Phase-space rotation frequency `Omega_nm = omega3 + sum_k g_k (nm)^k`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RotationFrequency(pub f64);

/// Overlap `eps_nm = <alpha_N(t)|alpha_nm(t)>` of two rotated coherent states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapCoefficient(pub Complex64);

impl OverlapCoefficient {
    pub fn modulus(self) -> f64 {
        self.0.norm()
    }
}

fn integer_power(product: u64, order: u32) -> Result<u128> {
    (product as u128).checked_pow(order).ok_or(Error::Overflow { product, order })
}

fn pair_product(n: u32, m: u32) -> u64 {
    n as u64 * m as u64
}

/// `omega3 + sum_k g_k (n m)^k`, with `(n m)^k` evaluated in exact integer
/// arithmetic.
pub fn rotation_frequency(params: &SystemParams, n: u32, m: u32) -> Result<RotationFrequency> {
    let nm = pair_product(n, m);
    let mut omega = params.omega3;
    for c in &params.couplings {
        omega += c.strength * integer_power(nm, c.order)? as f64;
    }
    Ok(RotationFrequency(omega))
}

/// `Omega_N - Omega_nm` for the product `nm`. The integer differences
/// `N^k - (nm)^k` are formed exactly before scaling by `g_k`, so factor
/// products give an exact zero.
pub fn frequency_gap(params: &SystemParams, target: TargetN, product: u64) -> Result<f64> {
    let mut gap = 0.0;
    for c in &params.couplings {
        let a = integer_power(target.value(), c.order)?;
        let b = integer_power(product, c.order)?;
        let diff = if a >= b { (a - b) as f64 } else { -((b - a) as f64) };
        gap += c.strength * diff;
    }
    Ok(gap)
}

/// `exp(-|alpha|^2 (1 - e^{i gap tau}))`.
pub fn overlap_from_gap(alpha: CoherentAmplitude, gap: f64, tau: f64) -> OverlapCoefficient {
    let a2 = alpha.modulus_sqr();
    let (s, c) = (gap * tau).sin_cos();
    OverlapCoefficient(Complex64::new(-a2 * (1.0 - c), a2 * s).exp())
}

/// `|eps|^2 = exp(-2 |alpha|^2 (1 - cos(gap tau)))`.
#[inline]
pub fn overlap_sqr_from_gap(alpha_sqr: f64, gap: f64, tau: f64) -> f64 {
    (-2.0 * alpha_sqr * (1.0 - (gap * tau).cos())).exp()
}

/// Overlap between the coherent state rotating at `omega_ref` and the one
/// rotating at `omega_nm`, both started from `alpha`.
pub fn coherent_overlap(
    alpha: CoherentAmplitude,
    omega_ref: RotationFrequency,
    omega_nm: RotationFrequency,
    tau: f64,
) -> OverlapCoefficient {
    overlap_from_gap(alpha, omega_ref.0 - omega_nm.0, tau)
}

/// `e^{i[(n'-n) omega1 + (m'-m) omega2] tau}`, the free-evolution phase of
/// the coherence `|n,m><n',m'|`.
pub fn evolved_phase_factor(n: u32, n_prime: u32, m: u32, m_prime: u32, params: &SystemParams, tau: f64) -> Complex64 {
    let dn = n_prime as f64 - n as f64;
    let dm = m_prime as f64 - m as f64;
    Complex64::from_polar(1.0, (dn * params.omega1 + dm * params.omega2) * tau)
}

/// Reduced state of oscillators 1 and 2 after a successful conditional
/// measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalResult {
    pub window: TrialWindow,
    /// Unit-trace reduced density matrix.
    pub rho_r: Weights,
    /// Born probability of the conditioning outcome.
    pub born_probability: f64,
    /// Raw weight on factor states, `sum_{rs=N} p^{rs}_{rs}`.
    pub ideal_probability: f64,
    pub tau: f64,
}

/// Normalized restriction of the (phase-evolved) input state to factor pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorState {
    pub window: TrialWindow,
    pub rho_f: Weights,
    /// Flat indices of the factor pairs.
    pub support: Vec<usize>,
    /// `A_f = sum_{rs=N} p^{rs}_{rs}`.
    pub normalization: f64,
}

fn overlaps(state: &JointState12, alpha: CoherentAmplitude, params: &SystemParams, target: TargetN, tau: f64) -> Result<Vec<Complex64>> {
    let window = state.window();
    window
        .pairs()
        .map(|(n, m)| Ok(overlap_from_gap(alpha, frequency_gap(params, target, pair_product(n, m))?, tau).0))
        .collect()
}

fn factor_indices(window: &TrialWindow, target: TargetN) -> Vec<usize> {
    factor_pairs_in_window(target, window)
        .into_iter()
        .filter_map(|(r, s)| window.index(r, s))
        .collect()
}

/// Projects oscillator 3 onto `|alpha_N(tau)>` and returns the normalized
/// reduced state of oscillators 1 and 2.
pub fn conditional_reduction(
    state: &JointState12,
    alpha: CoherentAmplitude,
    params: &SystemParams,
    target: TargetN,
    tau: f64,
) -> Result<ConditionalResult> {
    let window = state.window();
    let eps = overlaps(state, alpha, params, target, tau)?;
    let weights = state.weights();
    let born: f64 = (0..window.dim()).map(|i| weights.population(i) * eps[i].norm_sqr()).sum();
    if !(born >= VANISHING_NORM) {
        return Err(Error::VanishingNorm(born));
    }
    let ideal: f64 = factor_indices(&window, target).iter().map(|&i| weights.population(i)).sum();
    let rho_r = match weights {
        Weights::Diagonal(d) => Weights::Diagonal(d.iter().zip(&eps).map(|(p, e)| p * e.norm_sqr() / born).collect()),
        Weights::Dense(p) => {
            let dim = window.dim();
            let mut out = CMatrix::from_fn(dim, dim, |i, j| {
                let (n, m) = window.pair(i);
                let (n2, m2) = window.pair(j);
                p[(i, j)] * evolved_phase_factor(n, n2, m, m2, params, tau) * eps[i] * eps[j].conj() / born
            });
            out = linalg::symmetrize(&out);
            Weights::Dense(out)
        }
    };
    Ok(ConditionalResult { window, rho_r, born_probability: born, ideal_probability: ideal, tau })
}

/// The state of the factors: the input restricted to `rs = r's' = N` and
/// renormalized.
pub fn factor_target_state(state: &JointState12, params: &SystemParams, target: TargetN, tau: f64) -> Result<FactorState> {
    let window = state.window();
    let support = factor_indices(&window, target);
    let weights = state.weights();
    let normalization: f64 = support.iter().map(|&i| weights.population(i)).sum();
    if support.is_empty() || normalization <= 0.0 {
        return Err(Error::NoFactors(target.value()));
    }
    let rho_f = match weights {
        Weights::Diagonal(d) => {
            let mut out = vec![0.0; d.len()];
            for &i in &support {
                out[i] = d[i] / normalization;
            }
            Weights::Diagonal(out)
        }
        Weights::Dense(p) => {
            let dim = window.dim();
            let mut out = CMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
            for &i in &support {
                for &j in &support {
                    let (n, m) = window.pair(i);
                    let (n2, m2) = window.pair(j);
                    out[(i, j)] = p[(i, j)] * evolved_phase_factor(n, n2, m, m2, params, tau) / normalization;
                }
            }
            Weights::Dense(out)
        }
    };
    Ok(FactorState { window, rho_f, support, normalization })
}

pub use crate::linalg::uhlmann_fidelity;

fn block(weights: &Weights, support: &[usize]) -> CMatrix {
    CMatrix::from_fn(support.len(), support.len(), |a, b| match weights {
        Weights::Diagonal(d) => {
            if a == b { Complex64::new(d[support[a]], 0.0) } else { Complex64::new(0.0, 0.0) }
        }
        Weights::Dense(m) => m[(support[a], support[b])],
    })
}

/// Uhlmann fidelity between the factor state and a conditional result.
///
/// `sqrt(rho_f)` vanishes outside the factor support, so only the support
/// block of `rho_r` enters; the fidelity is evaluated on that block exactly.
pub fn factor_fidelity(factor: &FactorState, result: &ConditionalResult) -> Result<f64> {
    if factor.window != result.window {
        return Err(Error::DimensionMismatch(factor.window.dim(), result.window.dim()));
    }
    let f = block(&factor.rho_f, &factor.support);
    let r = block(&result.rho_r, &factor.support);
    Ok(linalg::uhlmann_unchecked(&f, &r))
}

/// One number state of a diagonal ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleTerm {
    pub n: u32,
    pub m: u32,
    pub weight: f64,
    /// `Omega_N - Omega_nm`.
    pub gap: f64,
    pub is_factor: bool,
}

/// Total weight of all number states sharing one product `nm`, and thus one
/// frequency gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapLevel {
    pub product: u64,
    pub gap: f64,
    pub weight: f64,
    pub factor_weight: f64,
}

/// Precomputed populations and frequency gaps of a diagonal input, the form
/// in which every fidelity sweep is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalEnsemble {
    pub target: TargetN,
    pub terms: Vec<EnsembleTerm>,
    /// `terms` grouped by product, ascending.
    pub levels: Vec<GapLevel>,
    /// `A_f`, the raw weight on factor states.
    pub factor_mass: f64,
    pub total_mass: f64,
}

impl DiagonalEnsemble {
    pub fn new(state: &JointState12, params: &SystemParams, target: TargetN) -> Result<Self> {
        let Weights::Diagonal(d) = state.weights() else {
            return Err(Error::Domain("diagonal ensemble needs a diagonal joint state".to_string()));
        };
        let window = state.window();
        let factors = factor_indices(&window, target);
        let mut terms = Vec::with_capacity(d.len());
        let mut levels: BTreeMap<u64, GapLevel> = BTreeMap::new();
        for (i, &weight) in d.iter().enumerate() {
            let (n, m) = window.pair(i);
            let product = pair_product(n, m);
            let is_factor = factors.contains(&i);
            let level = match levels.entry(product) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => {
                    let gap = frequency_gap(params, target, product)?;
                    e.insert(GapLevel { product, gap, weight: 0.0, factor_weight: 0.0 })
                }
            };
            level.weight += weight;
            if is_factor {
                level.factor_weight += weight;
            }
            terms.push(EnsembleTerm { n, m, weight, gap: level.gap, is_factor });
        }
        let factor_mass = factors.iter().map(|&i| d[i]).sum();
        let total_mass = d.iter().sum();
        Ok(Self { target, terms, levels: levels.into_values().collect(), factor_mass, total_mass })
    }

    pub fn has_factors(&self) -> bool {
        self.factor_mass > 0.0
    }

    /// `(sum over factors of p q, sum over all of p q)` for a per-term
    /// conditional weight `q(gap)`.
    pub fn conditional_sums(&self, q: impl Fn(f64) -> f64) -> (f64, f64) {
        let mut factor = 0.0;
        let mut total = 0.0;
        for level in &self.levels {
            let q = q(level.gap);
            total += level.weight * q;
            factor += level.factor_weight * q;
        }
        (factor, total)
    }

    /// `(F, A)` for lossless evolution at time `tau`.
    pub fn fidelity_and_born(&self, alpha: CoherentAmplitude, tau: f64) -> Result<(f64, f64)> {
        let a2 = alpha.modulus_sqr();
        let (factor, born) = self.conditional_sums(|gap| overlap_sqr_from_gap(a2, gap, tau));
        if !(born >= VANISHING_NORM) {
            return Err(Error::VanishingNorm(born));
        }
        Ok(((factor / born).clamp(0.0, 1.0), born))
    }

    /// Upper bound on the lossless fidelity over `[tau_a, tau_b]`: every
    /// `|eps|^2` is replaced by its minimum on the interval.
    pub fn fidelity_upper_bound(&self, alpha: CoherentAmplitude, tau_a: f64, tau_b: f64) -> f64 {
        let two_a2 = 2.0 * alpha.modulus_sqr();
        let (factor, total) = self.conditional_sums(|gap| {
            let (pa, pb) = (gap.abs() * tau_a, gap.abs() * tau_b);
            let worst = if pb - pa >= 2.0 * PI || PI + 2.0 * PI * ((pa - PI) / (2.0 * PI)).ceil() <= pb {
                2.0
            } else {
                (1.0 - pa.cos()).max(1.0 - pb.cos())
            };
            (-two_a2 * worst).exp()
        });
        if total > 0.0 { factor / total } else { 1.0 }
    }

    /// Largest `|gap|` among non-factor terms with weight at least
    /// `relative * A_f` (or `relative * total` without factors).
    pub fn significant_max_gap(&self, relative: f64) -> f64 {
        let reference = if self.has_factors() { self.factor_mass } else { self.total_mass };
        let cut = relative * reference;
        self.levels
            .iter()
            .filter(|l| l.factor_weight == 0.0 && l.weight >= cut)
            .map(|l| l.gap.abs())
            .fold(0.0, f64::max)
    }
}

/// Closed-form fidelity `sum_{rs=N} p_1r p_2s / sum_nm p_1n p_2m |eps_nm|^2`
/// for thermal inputs; no matrices are built.
pub fn thermal_fidelity_closed_form(
    params: &SystemParams,
    thermal: &ThermalSpec,
    target: TargetN,
    alpha: CoherentAmplitude,
    tau: f64,
    mode: WindowMode,
) -> Result<f64> {
    let state = build_thermal_joint(params, thermal, mode, target)?;
    let ensemble = DiagonalEnsemble::new(&state, params, target)?;
    Ok(ensemble.fidelity_and_born(alpha, tau)?.0)
}
