//! Fidelity curves and time searches.

use rayon::prelude::*;

use super::{Evaluator, ProtocolConfig};
use crate::error::{Error, Result};

/// Levels whose first crossings are recorded on every curve.
pub const CURVE_THRESHOLDS: [f64; 2] = [0.5, 0.9];
/// Upper bound on scanned grid points; the scan interval is shortened to it.
pub const MAX_SCAN_POINTS: usize = 4_000_000;
const SCAN_CHUNK: usize = 2048;
/// Block sizes of the bounded first-crossing scan.
const BOUND_BLOCK: usize = 1 << 14;
const BOUND_LEAF: usize = 32;
const REFINE_RELATIVE: f64 = 1e-14;

/// A fidelity curve with its located maxima and threshold crossings.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelitySeries {
    pub tau_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub metadata: ProtocolConfig,
    /// Refined local maxima `(tau, F)`.
    pub extrema: Vec<(f64, f64)>,
    /// `(theta, tau)` of the first crossing of each level in [`CURVE_THRESHOLDS`].
    pub threshold_crossings: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakKind {
    /// Maximum of the first excursion above the peak level.
    FirstExcursion,
    /// The level is never reached; best value within one recurrence period.
    GlobalMaximum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalTime {
    pub tau: f64,
    pub fidelity: f64,
    pub born_probability: f64,
    pub kind: PeakKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdOutcome {
    Reached { tau: f64, fidelity: f64 },
    /// No crossing on `(0, scanned_to]`.
    NeverReached { scanned_to: f64 },
}

impl ThresholdOutcome {
    pub fn tau(&self) -> Option<f64> {
        match *self {
            ThresholdOutcome::Reached { tau, .. } => Some(tau),
            ThresholdOutcome::NeverReached { .. } => None,
        }
    }
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
fn golden_max(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..200 {
        if b - a <= REFINE_RELATIVE * b.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc >= fd { (c, fc) } else { (d, fd) })
}

/// Smallest `tau` in `(lo, hi]` with `F >= theta`, given `F(hi) >= theta`.
fn bisect_up(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, theta: f64) -> Result<f64> {
    while hi - lo > REFINE_RELATIVE * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? >= theta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Scan grid `tau_i = i h`, `i = 1..=points`, evaluated in parallel chunks.
struct Scan<'a> {
    eval: &'a Evaluator,
    h: f64,
    points: usize,
}

impl<'a> Scan<'a> {
    fn new(eval: &'a Evaluator) -> Option<Self> {
        let h = eval.scan_step()?;
        let horizon = eval.horizon()?;
        let points = ((horizon / h).ceil() as usize).clamp(1, MAX_SCAN_POINTS);
        Some(Self { eval, h, points })
    }

    fn tau(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    fn end(&self) -> f64 {
        self.tau(self.points)
    }

    /// First index with `F >= level`.
    ///
    /// For lossless evaluation, blocks whose fidelity upper bound stays below
    /// `level` are skipped; the points that are evaluated, and hence the
    /// result, are the same as for a plain scan.
    fn first_at_least(&self, level: f64) -> Result<Option<usize>> {
        if !self.eval.is_lossless() {
            let mut hit = None;
            self.for_each(1, |i, v| {
                if v >= level {
                    hit = Some(i);
                }
                hit.is_none()
            })?;
            return Ok(hit);
        }
        let mut start = 1;
        while start <= self.points {
            let end = (start + BOUND_BLOCK).min(self.points + 1);
            if let Some(i) = self.first_in(start, end, level)? {
                return Ok(Some(i));
            }
            start = end;
        }
        Ok(None)
    }

    fn first_in(&self, a: usize, b: usize, level: f64) -> Result<Option<usize>> {
        let bound = self.eval.ensemble.fidelity_upper_bound(self.eval.config.alpha, self.tau(a), self.tau(b - 1));
        if bound < level * (1.0 - 1e-12) {
            return Ok(None);
        }
        if b - a <= BOUND_LEAF {
            for i in a..b {
                if self.eval.fidelity(self.tau(i))? >= level {
                    return Ok(Some(i));
                }
            }
            return Ok(None);
        }
        let mid = a + (b - a) / 2;
        match self.first_in(a, mid, level)? {
            Some(i) => Ok(Some(i)),
            None => self.first_in(mid, b, level),
        }
    }

    /// Visits `(i, F(tau_i))` from `start` on, in order, until `visit`
    /// returns `false`.
    fn for_each(&self, mut start: usize, mut visit: impl FnMut(usize, f64) -> bool) -> Result<()> {
        while start <= self.points {
            let end = (start + SCAN_CHUNK).min(self.points + 1);
            let values: Vec<f64> = (start..end)
                .into_par_iter()
                .map(|i| self.eval.fidelity(self.tau(i)))
                .collect::<Result<_>>()?;
            for (offset, v) in values.into_iter().enumerate() {
                if !visit(start + offset, v) {
                    return Ok(());
                }
            }
            start = end;
        }
        Ok(())
    }
}

impl Evaluator {
    /// Optimal measurement time; `None` when the couplings vanish.
    pub fn optimal_time(&self) -> Result<Option<OptimalTime>> {
        let Some(scan) = Scan::new(self) else { return Ok(None) };
        let level = self.config.peak_level;
        let (kind, i) = match scan.first_at_least(level)? {
            Some(first) => {
                let mut peak = (first, self.fidelity(scan.tau(first))?);
                scan.for_each(first + 1, |i, v| {
                    if v > peak.1 {
                        peak = (i, v);
                    }
                    v >= level
                })?;
                (PeakKind::FirstExcursion, peak.0)
            }
            None => {
                let mut best: Option<(usize, f64)> = None;
                scan.for_each(1, |i, v| {
                    if best.is_none_or(|(_, b)| v > b) {
                        best = Some((i, v));
                    }
                    true
                })?;
                match best {
                    Some((i, _)) => (PeakKind::GlobalMaximum, i),
                    None => return Ok(None),
                }
            }
        };
        let (tau, _) = golden_max(|t| self.fidelity(t), scan.tau(i - 1), scan.tau(i + 1))?;
        let (fidelity, born_probability) = self.outcome(tau)?;
        Ok(Some(OptimalTime { tau, fidelity, born_probability, kind }))
    }

    /// First time the fidelity reaches `theta`.
    pub fn first_threshold_time(&self, theta: f64) -> Result<ThresholdOutcome> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Domain(format!("threshold must lie in (0, 1) (got {theta})")));
        }
        let Some(scan) = Scan::new(self) else {
            // constant curve
            let f = self.fidelity(0.0)?;
            return Ok(if f >= theta {
                ThresholdOutcome::Reached { tau: 0.0, fidelity: f }
            } else {
                ThresholdOutcome::NeverReached { scanned_to: f64::INFINITY }
            });
        };
        match scan.first_at_least(theta)? {
            Some(i) => {
                let tau = bisect_up(|t| self.fidelity(t), scan.tau(i - 1), scan.tau(i), theta)?;
                Ok(ThresholdOutcome::Reached { tau, fidelity: self.fidelity(tau)? })
            }
            None => Ok(ThresholdOutcome::NeverReached { scanned_to: scan.end() }),
        }
    }

    /// Fidelity on an ascending grid with refined maxima and crossings.
    pub fn fidelity_curve(&self, tau_grid: &[f64]) -> Result<FidelitySeries> {
        if tau_grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if tau_grid.windows(2).any(|w| !(w[1] > w[0])) || tau_grid[0] < 0.0 {
            return Err(Error::Domain("tau grid must be non-negative and strictly ascending".to_string()));
        }
        let values: Vec<f64> = tau_grid.par_iter().map(|&t| self.fidelity(t)).collect::<Result<_>>()?;
        let mut extrema = Vec::new();
        for i in 1..values.len().saturating_sub(1) {
            if values[i - 1] < values[i] && values[i] >= values[i + 1] {
                extrema.push(golden_max(|t| self.fidelity(t), tau_grid[i - 1], tau_grid[i + 1])?);
            }
        }
        let mut threshold_crossings = Vec::new();
        for theta in CURVE_THRESHOLDS {
            if let Some(i) = values.iter().position(|&v| v >= theta) {
                let tau = if i == 0 { tau_grid[0] } else { bisect_up(|t| self.fidelity(t), tau_grid[i - 1], tau_grid[i], theta)? };
                threshold_crossings.push((theta, tau));
            }
        }
        Ok(FidelitySeries { tau_grid: tau_grid.to_vec(), values, metadata: self.config.clone(), extrema, threshold_crossings })
    }
}

/// Optimal measurement time of a configuration.
pub fn optimal_time(config: &ProtocolConfig) -> Result<Option<OptimalTime>> {
    Evaluator::new(config)?.optimal_time()
}

/// Smallest `tau > 0` with `F(tau) >= theta`, searched over one recurrence
/// period.
pub fn first_threshold_time(config: &ProtocolConfig, theta: f64) -> Result<ThresholdOutcome> {
    Evaluator::new(config)?.first_threshold_time(theta)
}

/// Fidelity curve of a configuration.
pub fn fidelity_curve(config: &ProtocolConfig, tau_grid: &[f64]) -> Result<FidelitySeries> {
    Evaluator::new(config)?.fidelity_curve(tau_grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Preset;

    #[test]
    fn fig2_optimal_time() {
        let c = Preset::Fig2.config();
        let t = optimal_time(&c).unwrap().unwrap();
        assert_eq!(t.kind, PeakKind::FirstExcursion);
        assert!((t.tau - 0.335).abs() < 0.02, "{t:?}");
    }

    #[test]
    fn optimal_time_scales_with_coupling() {
        let base = Preset::Fig2.config();
        let at = |g: f64| {
            let c = ProtocolConfig { params: base.params.with_single_coupling(1, g), ..base.clone() };
            optimal_time(&c).unwrap().unwrap().tau
        };
        let (t1, t08) = (at(1.0), at(0.8));
        assert!((t08 - t1 / 0.8).abs() < 1e-9 * t08, "{t1} {t08}");
    }

    #[test]
    fn uncoupled_curve_is_constant() {
        let mut c = Preset::Fig2.config();
        c.params = c.params.with_single_coupling(1, 0.0);
        assert!(optimal_time(&c).unwrap().is_none());
        let s = fidelity_curve(&c, &[0.0, 0.3, 0.6, 0.9]).unwrap();
        assert!(s.values.iter().all(|&v| v == s.values[0]));
        assert!(s.extrema.is_empty());
    }

    #[test]
    fn tiny_amplitude_never_reaches_threshold() {
        let c = Preset::Fig3.config().with_alpha_modulus(0.1);
        assert!(matches!(first_threshold_time(&c, 0.999999).unwrap(), ThresholdOutcome::NeverReached { .. }));
        assert!(first_threshold_time(&c, 1.0).is_err());
    }

    #[test]
    fn threshold_is_a_first_crossing() {
        let c = Preset::Fig3.config();
        let e = Evaluator::new(&c).unwrap();
        let tau = e.first_threshold_time(0.9).unwrap().tau().unwrap();
        assert!(e.fidelity(tau).unwrap() >= 0.9);
        assert!(e.fidelity(tau * (1.0 - 1e-9)).unwrap() < 0.9);
        let h = e.scan_step().unwrap();
        let mut t = h;
        while t < tau * (1.0 - 1e-9) {
            assert!(e.fidelity(t).unwrap() < 0.9);
            t += h / 4.0;
        }
    }

    #[test]
    fn curve_records_extrema_and_crossings() {
        let c = Preset::Fig2.config();
        let grid: Vec<f64> = (0..=400).map(|i| i as f64 * 0.0025).collect();
        let s = fidelity_curve(&c, &grid).unwrap();
        assert!(s.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(s.extrema.iter().any(|&(t, _)| (t - 0.336).abs() < 0.01));
        assert_eq!(s.threshold_crossings[0].0, 0.5);
        assert!(fidelity_curve(&c, &[]).is_err());
        assert!(fidelity_curve(&c, &[0.2, 0.1]).is_err());
    }
}
