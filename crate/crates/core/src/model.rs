//! Protocol-level domain types shared by every engine.
//!
//! Units: hbar = 1 and all frequencies are expressed in units of the third
//! oscillator's frequency, so `omega3` is normally 1 and times are the
//! dimensionless `tau = omega3 * t`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Hermiticity and PSD tolerance for joint states.
pub const JOINT_STATE_TOLERANCE: f64 = 1e-10;
/// Trace tolerance for normalized joint states.
pub const TRACE_TOLERANCE: f64 = 1e-12;

/// One nonlinear term `g_k (n1 n2)^k n3` of the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub order: u32,
    pub strength: f64,
}

impl Coupling {
    pub fn new(order: u32, strength: f64) -> Self {
        Self { order, strength }
    }
}

/// Oscillator frequencies and nonlinear couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub omega1: f64,
    pub omega2: f64,
    pub omega3: f64,
    pub couplings: Vec<Coupling>,
}

impl SystemParams {
    pub fn new(omega1: f64, omega2: f64, omega3: f64, couplings: Vec<Coupling>) -> Self {
        Self { omega1, omega2, omega3, couplings }
    }

    /// Single coupling of order `k` and strength `g`.
    pub fn single(omega1: f64, omega2: f64, omega3: f64, order: u32, strength: f64) -> Self {
        Self::new(omega1, omega2, omega3, vec![Coupling::new(order, strength)])
    }

    /// Copy of `self` with the couplings replaced by one term.
    pub fn with_single_coupling(&self, order: u32, strength: f64) -> Self {
        Self { couplings: vec![Coupling::new(order, strength)], ..self.clone() }
    }

    /// Smallest strictly positive coupling strength.
    pub fn min_positive_strength(&self) -> Option<f64> {
        self.couplings
            .iter()
            .map(|c| c.strength)
            .filter(|&g| g > 0.0)
            .min_by(f64::total_cmp)
    }

    pub fn is_uncoupled(&self) -> bool {
        self.couplings.iter().all(|c| c.strength == 0.0)
    }
}

/// Range of trial factors `[n_min, n_max]` encoded in oscillators 1 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrialWindow {
    pub n_min: u32,
    pub n_max: u32,
}

impl TrialWindow {
    pub fn new(n_min: u32, n_max: u32) -> Result<Self> {
        let window = Self { n_min, n_max };
        match window.violation() {
            Some(v) => Err(Error::InvalidConfig(vec![v])),
            None => Ok(window),
        }
    }

    /// The window `[2, ceil(N/2)]` of all non-trivial trial factors.
    pub fn for_target(n: TargetN) -> Self {
        Self { n_min: 2, n_max: n.value().div_ceil(2) as u32 }
    }

    fn violation(&self) -> Option<String> {
        (self.n_max < self.n_min.saturating_add(1)).then(|| {
            format!("n_max >= n_min+1 (got n_min={}, n_max={})", self.n_min, self.n_max)
        })
    }

    /// Number of levels per oscillator.
    pub fn levels(&self) -> usize {
        (self.n_max - self.n_min + 1) as usize
    }

    /// Dimension of the joint index space.
    pub fn dim(&self) -> usize {
        self.levels() * self.levels()
    }

    pub fn contains(&self, n: u32) -> bool {
        (self.n_min..=self.n_max).contains(&n)
    }

    /// Flat index of the pair `(n, m)`.
    pub fn index(&self, n: u32, m: u32) -> Option<usize> {
        (self.contains(n) && self.contains(m))
            .then(|| (n - self.n_min) as usize * self.levels() + (m - self.n_min) as usize)
    }

    /// Pair `(n, m)` at flat index `idx`.
    pub fn pair(&self, idx: usize) -> (u32, u32) {
        let w = self.levels();
        (self.n_min + (idx / w) as u32, self.n_min + (idx % w) as u32)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.dim()).map(|i| self.pair(i))
    }
}

/// The integer to be factored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TargetN(u64);

impl TargetN {
    pub const MIN: u64 = 4;

    pub fn new(n: u64) -> Result<Self> {
        if n < Self::MIN {
            return Err(Error::InvalidConfig(vec![format!("N >= 4 (got {n})")]));
        }
        Ok(Self(n))
    }

    pub fn value(self) -> u64 {
        self.0
    }
}

/// Coherent amplitude of oscillator 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentAmplitude(pub Complex64);

impl CoherentAmplitude {
    pub fn real(alpha: f64) -> Self {
        Self(Complex64::new(alpha, 0.0))
    }

    pub fn from_polar(modulus: f64, phase: f64) -> Self {
        Self(Complex64::from_polar(modulus, phase))
    }

    pub fn modulus(self) -> f64 {
        self.0.norm()
    }

    pub fn modulus_sqr(self) -> f64 {
        self.0.norm_sqr()
    }
}

/// Weight matrix of a joint state of oscillators 1 and 2.
#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    /// Populations only; no coherences.
    Diagonal(Vec<f64>),
    /// Full Hermitian matrix over the joint index space.
    Dense(CMatrix),
}

impl Weights {
    pub fn dim(&self) -> usize {
        match self {
            Weights::Diagonal(d) => d.len(),
            Weights::Dense(m) => m.nrows(),
        }
    }

    pub fn population(&self, idx: usize) -> f64 {
        match self {
            Weights::Diagonal(d) => d[idx],
            Weights::Dense(m) => m[(idx, idx)].re,
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.population(i)).sum()
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            Weights::Diagonal(d) => {
                DMatrix::from_fn(d.len(), d.len(), |i, j| if i == j { Complex64::new(d[i], 0.0) } else { Complex64::new(0.0, 0.0) })
            }
            Weights::Dense(m) => m.clone(),
        }
    }
}

/// Joint (possibly mixed) state `p^{n'm'}_{nm}` of oscillators 1 and 2.
///
/// A state may be deliberately sub-normalized when it is the truncation of a
/// distribution with infinite support; `trace_deficit` marks that case and
/// such states are never renormalized behind the caller's back.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState12 {
    window: TrialWindow,
    weights: Weights,
    trace_deficit: bool,
}

impl JointState12 {
    pub fn new(window: TrialWindow, weights: Weights, trace_deficit: bool) -> Result<Self> {
        if let Some(v) = window.violation() {
            return Err(Error::InvalidConfig(vec![v]));
        }
        if weights.dim() != window.dim() {
            return Err(Error::DimensionMismatch(weights.dim(), window.dim()));
        }
        match &weights {
            Weights::Diagonal(d) => {
                if let Some(&bad) = d.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Domain(format!("non-finite weight {bad}")));
                }
                let min = d.iter().copied().fold(f64::INFINITY, f64::min);
                if min < -JOINT_STATE_TOLERANCE {
                    return Err(Error::NotPsd(min));
                }
            }
            Weights::Dense(m) => {
                let defect = linalg::hermitian_defect(m);
                if !defect.is_finite() || defect > JOINT_STATE_TOLERANCE {
                    return Err(Error::NotHermitian(defect));
                }
                let min = linalg::min_eigenvalue(m);
                if min < -JOINT_STATE_TOLERANCE {
                    return Err(Error::NotPsd(min));
                }
            }
        }
        let trace = weights.trace();
        let trace_ok = if trace_deficit {
            trace > 0.0 && trace <= 1.0 + TRACE_TOLERANCE
        } else {
            (trace - 1.0).abs() <= TRACE_TOLERANCE
        };
        if !trace_ok {
            return Err(Error::InvalidTrace(trace));
        }
        Ok(Self { window, weights, trace_deficit })
    }

    pub fn window(&self) -> TrialWindow {
        self.window
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn trace_deficit(&self) -> bool {
        self.trace_deficit
    }

    pub fn trace(&self) -> f64 {
        self.weights.trace()
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.weights, Weights::Diagonal(_))
    }

    /// Population of the number state `|n, m>`; zero outside the window.
    pub fn population(&self, n: u32, m: u32) -> f64 {
        self.window.index(n, m).map_or(0.0, |i| self.weights.population(i))
    }
}

/// Outcome of [`validate_params`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_runnable(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(self.violations))
        }
    }
}

/// Checks a configuration against every domain invariant.
pub fn validate_params(params: &SystemParams, window: &TrialWindow, n: u64) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (name, value) in [("omega1", params.omega1), ("omega2", params.omega2), ("omega3", params.omega3)] {
        if !(value.is_finite() && value > 0.0) {
            report.violations.push(format!("{name} > 0 (got {value})"));
        }
    }
    let mut orders: Vec<u32> = Vec::with_capacity(params.couplings.len());
    for c in &params.couplings {
        if c.order == 0 {
            report.violations.push("coupling order k >= 1 (got 0)".to_string());
        }
        if orders.contains(&c.order) {
            report.violations.push(format!("coupling orders distinct (k={} repeated)", c.order));
        }
        orders.push(c.order);
        if !(c.strength.is_finite() && c.strength >= 0.0) {
            report.violations.push(format!("coupling strength g_{} >= 0 (got {})", c.order, c.strength));
        }
    }
    if params.is_uncoupled() {
        report.warnings.push("all couplings are zero: the measurement carries no information".to_string());
    }
    if let Some(v) = window.violation() {
        report.violations.push(v);
    }
    if n < TargetN::MIN {
        report.violations.push(format!("N >= 4 (got {n})"));
    }
    report
}

/// Ordered non-trivial factor pairs `(r, s)`, `r * s = N`, `r, s >= 2`, with
/// both factors inside the window.
pub fn factor_pairs_in_window(n: TargetN, window: &TrialWindow) -> Vec<(u32, u32)> {
    let target = n.value();
    let lo = window.n_min.max(2);
    (lo..=window.n_max)
        .filter(|&r| target.is_multiple_of(r as u64))
        .filter_map(|r| {
            let s = target / r as u64;
            (s >= 2 && s <= window.n_max as u64 && s >= lo as u64).then_some((r, s as u32))
        })
        .collect()
}
