//! Brute-force truncated-Fock validation layer.
//!
//! Nothing in this module calls into the analytic or dissipative engines:
//! coherent states, rotation frequencies, thermal weights and the damped
//! dynamics are all recomputed here from scratch in the number basis.

pub mod suite;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dissipative::{BathSpec, DampedGaussianState};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::SystemParams;

/// Largest acceptable `1 - <c|c>` of a truncated coherent state.
pub const MAX_TRUNCATION_DEFICIT: f64 = 1e-8;

/// `ceil(|alpha|^2 + 6|alpha|) + 10` levels.
pub fn recommended_dimension(alpha_modulus: f64) -> usize {
    (alpha_modulus * alpha_modulus + 6.0 * alpha_modulus).ceil() as usize + 10
}

/// Pure state of one oscillator in a truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    pub amplitudes: Vec<Complex64>,
}

impl FockVector {
    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `1 - <c|c>`.
    pub fn deficit(&self) -> f64 {
        1.0 - self.norm_sqr()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FockVector) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    /// Applies `exp(-i omega tau a^dagger a)`.
    pub fn rotated(&self, omega: f64, tau: f64) -> FockVector {
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(l, c)| c * Complex64::from_polar(1.0, -omega * tau * l as f64))
            .collect();
        FockVector { amplitudes }
    }

    pub fn projector(&self) -> FockDensityMatrix {
        let col = nalgebra::DVector::from_column_slice(&self.amplitudes);
        FockDensityMatrix { matrix: &col * col.adjoint() }
    }
}

/// Coherent state `e^{-|alpha|^2/2} sum_n alpha^n / sqrt(n!) |n>` on `dim`
/// levels, built from the log-recurrence `ln|c_n| = ln|c_{n-1}| + ln|alpha| - ln(n)/2`.
pub fn coherent_fock_vector(alpha: Complex64, dim: usize) -> Result<FockVector> {
    if dim < 2 {
        return Err(Error::InsufficientDimension { dim, deficit: 1.0 });
    }
    let r = alpha.norm();
    let phase = alpha.arg();
    let mut amplitudes = Vec::with_capacity(dim);
    if r == 0.0 {
        amplitudes.push(Complex64::new(1.0, 0.0));
        amplitudes.resize(dim, Complex64::new(0.0, 0.0));
    } else {
        let ln_r = r.ln();
        let mut ln_mod = -0.5 * r * r;
        for n in 0..dim {
            if n > 0 {
                ln_mod += ln_r - 0.5 * (n as f64).ln();
            }
            amplitudes.push(Complex64::from_polar(ln_mod.exp(), phase * n as f64));
        }
    }
    let v = FockVector { amplitudes };
    let deficit = v.deficit();
    if deficit > MAX_TRUNCATION_DEFICIT {
        return Err(Error::InsufficientDimension { dim, deficit });
    }
    Ok(v)
}

fn oracle_rotation(params: &SystemParams, product: u64) -> f64 {
    params.omega3
        + params
            .couplings
            .iter()
            .map(|c| c.strength * (product as f64).powi(c.order as i32))
            .sum::<f64>()
}

/// `<alpha_N(tau)|alpha_nm(tau)>` by explicit rotation and inner product of
/// truncated coherent vectors.
pub fn unitary_overlap_oracle(alpha: Complex64, params: &SystemParams, target: u64, n: u32, m: u32, tau: f64, dim: usize) -> Result<Complex64> {
    let v = coherent_fock_vector(alpha, dim)?;
    let reference = v.rotated(oracle_rotation(params, target), tau);
    let branch = v.rotated(oracle_rotation(params, n as u64 * m as u64), tau);
    Ok(reference.inner(&branch))
}

/// Density matrix of one oscillator in a truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockDensityMatrix {
    pub matrix: CMatrix,
}

impl FockDensityMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.matrix).re
    }

    /// `Tr(a rho)`.
    pub fn mean_amplitude(&self) -> Complex64 {
        (1..self.dim()).map(|n| (n as f64).sqrt() * self.matrix[(n, n - 1)]).sum()
    }

    pub fn mean_occupation(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.matrix[(n, n)].re).sum()
    }

    pub fn trace_distance(&self, other: &FockDensityMatrix) -> Result<f64> {
        linalg::trace_distance(&self.matrix, &other.matrix)
    }
}

/// Largest step accepted by [`lindblad_rk4_evolve`].
pub fn rk4_step_bound(omega: f64, bath: &BathSpec) -> f64 {
    1e-3 / omega.abs().max(bath.gamma3() * (bath.nbar3() + 1.0))
}

/// Right-hand side of the damped-oscillator master equation with truncated
/// ladder operators, `a|n> = sqrt(n)|n-1>` on `d` levels.
struct Generator {
    d: usize,
    omega: f64,
    down: f64,
    up: f64,
    sqrt_n: Vec<f64>,
    /// `(a a^dagger)_{nn}`, zero on the top level of the truncated space.
    aad: Vec<f64>,
}

impl Generator {
    fn new(d: usize, omega: f64, bath: &BathSpec) -> Self {
        let (gamma, nbar) = (bath.gamma3(), bath.nbar3());
        Self {
            d,
            omega,
            down: gamma * (nbar + 1.0) / 2.0,
            up: gamma * nbar / 2.0,
            sqrt_n: (0..d).map(|n| (n as f64).sqrt()).collect(),
            aad: (0..d).map(|n| if n + 1 < d { (n + 1) as f64 } else { 0.0 }).collect(),
        }
    }

    /// `out = L(rho)`, both column-major `d x d`.
    fn apply(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let d = self.d;
        let zero = Complex64::new(0.0, 0.0);
        for j in 0..d {
            for i in 0..d {
                let r = rho[i + j * d];
                let lower = if i + 1 < d && j + 1 < d {
                    rho[i + 1 + (j + 1) * d] * (self.sqrt_n[i + 1] * self.sqrt_n[j + 1])
                } else {
                    zero
                };
                let raise = if i > 0 && j > 0 { rho[i - 1 + (j - 1) * d] * (self.sqrt_n[i] * self.sqrt_n[j]) } else { zero };
                let rotation = Complex64::new(0.0, -self.omega * (i as f64 - j as f64)) * r;
                out[i + j * d] = rotation
                    + (2.0 * lower - r * (i + j) as f64) * self.down
                    + (2.0 * raise - r * (self.aad[i] + self.aad[j])) * self.up;
            }
        }
    }
}

fn symmetrize_in_place(m: &mut [Complex64], d: usize) {
    for j in 0..d {
        m[j + j * d].im = 0.0;
        for i in j + 1..d {
            let avg = 0.5 * (m[i + j * d] + m[j + i * d].conj());
            m[i + j * d] = avg;
            m[j + i * d] = avg.conj();
        }
    }
}

/// Classical RK4 with a fixed step `dt`, re-symmetrized after every step.
/// Returns `samples + 1` snapshots evenly spaced in steps (first is `rho0`).
pub fn lindblad_rk4_trajectory(
    rho0: &FockDensityMatrix,
    omega: f64,
    bath: &BathSpec,
    tau: f64,
    dt: f64,
    samples: usize,
) -> Result<Vec<FockDensityMatrix>> {
    if !(dt > 0.0 && tau >= 0.0) {
        return Err(Error::Domain(format!("need dt > 0 and tau >= 0 (dt={dt}, tau={tau})")));
    }
    let steps = ((tau / dt).ceil() as usize).max(1);
    let h = tau / steps as f64;
    let samples = samples.max(1);
    let d = rho0.dim();
    let generator = Generator::new(d, omega, bath);
    let zero = Complex64::new(0.0, 0.0);
    let mut rho: Vec<Complex64> = rho0.matrix.as_slice().to_vec();
    let mut k = vec![zero; d * d];
    let mut stage = vec![zero; d * d];
    let mut acc = vec![zero; d * d];
    let to_matrix = |v: &[Complex64]| FockDensityMatrix { matrix: DMatrix::from_column_slice(d, d, v) };
    let mut snapshots = vec![rho0.clone()];
    let mut next_sample = 1;
    for step in 1..=steps {
        generator.apply(&rho, &mut k);
        for idx in 0..d * d {
            acc[idx] = k[idx];
            stage[idx] = rho[idx] + k[idx] * (h / 2.0);
        }
        generator.apply(&stage, &mut k);
        for idx in 0..d * d {
            acc[idx] += k[idx] * 2.0;
            stage[idx] = rho[idx] + k[idx] * (h / 2.0);
        }
        generator.apply(&stage, &mut k);
        for idx in 0..d * d {
            acc[idx] += k[idx] * 2.0;
            stage[idx] = rho[idx] + k[idx] * h;
        }
        generator.apply(&stage, &mut k);
        for idx in 0..d * d {
            rho[idx] += (acc[idx] + k[idx]) * (h / 6.0);
        }
        symmetrize_in_place(&mut rho, d);
        while next_sample <= samples && step * samples >= next_sample * steps {
            snapshots.push(to_matrix(&rho));
            next_sample += 1;
        }
    }
    let trace: f64 = (0..d).map(|n| rho[n + n * d].re).sum();
    let drift = (trace - rho0.trace()).abs();
    if tau > 0.0 && drift / tau.max(1.0) > 1e-8 {
        return Err(Error::StepTooLarge(format!("trace drift {drift:e} over tau = {tau}")));
    }
    Ok(snapshots)
}

/// RK4 integration of the damped oscillator at frequency `omega` up to `tau`.
pub fn lindblad_rk4_evolve(rho0: &FockDensityMatrix, omega: f64, bath: &BathSpec, tau: f64, dt: f64) -> Result<FockDensityMatrix> {
    let bound = rk4_step_bound(omega, bath);
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge(format!("dt = {dt:e} exceeds the stability bound {bound:e}")));
    }
    lindblad_rk4_evolve_unchecked(rho0, omega, bath, tau, dt)
}

/// Like [`lindblad_rk4_evolve`] without the step bound; used for order studies.
pub fn lindblad_rk4_evolve_unchecked(rho0: &FockDensityMatrix, omega: f64, bath: &BathSpec, tau: f64, dt: f64) -> Result<FockDensityMatrix> {
    let mut trajectory = lindblad_rk4_trajectory(rho0, omega, bath, tau, dt, 1)?;
    Ok(trajectory.pop().expect("trajectory has a final snapshot"))
}

/// Extra levels used while exponentiating the displacement generator.
const DISPLACEMENT_PADDING: usize = 40;

/// `D(mu) rho_th(nu) D(mu)^dagger` on `dim` levels. The displacement is the
/// matrix exponential of `mu a^dagger - conj(mu) a` in a padded space.
pub fn reconstruct_gaussian(state: &DampedGaussianState, dim: usize) -> Result<FockDensityMatrix> {
    let (mu, nu) = (state.mu, state.nu);
    if !(nu >= 0.0) {
        return Err(Error::Domain(format!("thermal occupation must be non-negative (got {nu})")));
    }
    let big = dim + DISPLACEMENT_PADDING;
    let zero = Complex64::new(0.0, 0.0);
    let mut generator = DMatrix::from_element(big, big, zero);
    for n in 1..big {
        let s = (n as f64).sqrt();
        // a^dagger |n-1> = sqrt(n) |n>
        generator[(n, n - 1)] += mu * s;
        generator[(n - 1, n)] -= mu.conj() * s;
    }
    let displacement = generator.exp();
    let thermal = DMatrix::from_fn(big, big, |i, j| {
        if i == j {
            Complex64::new((nu / (1.0 + nu)).powi(i as i32) / (1.0 + nu), 0.0)
        } else {
            zero
        }
    });
    let full = &displacement * thermal * displacement.adjoint();
    let matrix = full.view((0, 0), (dim, dim)).into_owned();
    let out = FockDensityMatrix { matrix: linalg::symmetrize(&matrix) };
    let deficit = 1.0 - out.trace();
    if deficit > MAX_TRUNCATION_DEFICIT {
        return Err(Error::InsufficientDimension { dim, deficit });
    }
    Ok(out)
}
