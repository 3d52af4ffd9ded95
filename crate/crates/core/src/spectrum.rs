//! Radial Dirichlet spectrum of the unit disk and the disk resonator.
//!
//! Only radially symmetric eigenfunctions have nonzero mean over the disk,
//! so the modes carrying a coupling coefficient are indexed by the zeros
//! `j_{0,n}` of `J_0`:
//!
//! * eigenvalue `λ_n = j_{0,n}²`,
//! * normalized eigenfunction `φ_n(r) = J_0(j_{0,n} r) / (√π J_1(j_{0,n}))`,
//! * coupling `c_n = ∫_D φ_n = 2√π / j_{0,n}` (sign chosen positive).
//!
//! The resonator `Δw + αw = 0` in `B_ρ`, `w = 1` on `∂B_ρ` has both a modal
//! series (`resonator_series`) and the closed form `J_0(√α r)/J_0(√α ρ)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::bessel::{bessel_j, bessel_j_real};
use crate::error::{Error, Result};

/// One radial Dirichlet mode of the unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskMode {
    pub index: usize,
    pub bessel_zero: f64,
    pub eigenvalue: f64,
    pub coupling: f64,
    /// `J_1(j_{0,n})`; its sign makes every `c_n` positive.
    pub j1_at_zero: f64,
}

impl DiskMode {
    /// Normalized radial eigenfunction at `r` in `[0, 1]`, signed so that
    /// its mean over the disk is positive.
    pub fn eigenfunction(&self, r: f64) -> Result<f64> {
        Ok(bessel_j_real(0, self.bessel_zero * r)? / (PI.sqrt() * self.j1_at_zero))
    }
}

/// McMahon's expansion for the n-th zero of `J_0`.
fn mcmahon_j0_zero(n: usize) -> f64 {
    let b = (n as f64 - 0.25) * PI;
    let e = 8.0 * b;
    b + 1.0 / e - 124.0 / (3.0 * e.powi(3)) + 120_928.0 / (15.0 * e.powi(5))
        - 401_743_168.0 / (105.0 * e.powi(7))
}

/// n-th positive zero of `J_0` (1-based), to about 1e-14 relative.
pub fn j0_zero(n: usize) -> Result<f64> {
    assert!(n >= 1);
    let mut x = mcmahon_j0_zero(n);
    if n > 30 {
        // the expansion error is already below 1e-15 here
        return Ok(x);
    }
    for _ in 0..50 {
        let j0 = bessel_j_real(0, x)?;
        let j1 = bessel_j_real(1, x)?;
        let step = j0 / (-j1);
        x -= step;
        if step.abs() < 1e-15 * x {
            break;
        }
    }
    Ok(x)
}

/// First `N` radial Dirichlet modes of the unit disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    modes: Vec<DiskMode>,
}

impl SpectrumTable {
    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidInput("spectrum table needs at least one mode".into()));
        }
        let modes = (1..=count)
            .map(|n| {
                let z = j0_zero(n)?;
                let j1 = bessel_j_real(1, z)?;
                Ok(DiskMode {
                    index: n,
                    bessel_zero: z,
                    eigenvalue: z * z,
                    coupling: 2.0 * PI.sqrt() / z,
                    j1_at_zero: j1,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { modes })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[DiskMode] {
        &self.modes
    }

    pub fn mode(&self, n: usize) -> &DiskMode {
        &self.modes[n - 1]
    }

    pub fn eigenvalue(&self, n: usize) -> f64 {
        self.modes[n - 1].eigenvalue
    }

    /// `Σ_{n≤N} c_n²`; tends to π.
    pub fn coupling_mass(&self) -> f64 {
        self.modes.iter().map(|m| m.coupling * m.coupling).sum()
    }

    /// Distance from `z` to the truncated spectrum `{λ_1, …, λ_N}`.
    ///
    /// Meaningful only when the table reaches past `|z| + λ_1`; callers size
    /// the table accordingly.
    pub fn dist_to_spectrum(&self, z: Complex64) -> f64 {
        let pos = self.modes.partition_point(|m| m.eigenvalue < z.re);
        let lo = pos.saturating_sub(1);
        let hi = (pos + 1).min(self.modes.len());
        self.modes[lo..hi]
            .iter()
            .map(|m| (z - m.eigenvalue).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether the table satisfies the sizing contract for `z`.
    pub fn covers(&self, z: Complex64) -> bool {
        self.modes.last().map(|m| m.eigenvalue).unwrap_or(0.0) > z.norm() + self.modes[0].eigenvalue
    }
}

/// Resonator frequency parameter `α` and disk radius `ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    pub alpha: Complex64,
    pub rho: f64,
}

impl ResonatorParams {
    pub fn new(alpha: Complex64, rho: f64) -> Self {
        Self { alpha, rho }
    }

    /// `√α` with `Im √α ≥ 0`.
    pub fn wavenumber(&self) -> Complex64 {
        principal_sqrt(self.alpha)
    }

    /// `αρ²`, the disk-scaled spectral parameter.
    pub fn scaled(&self) -> Complex64 {
        self.alpha * self.rho * self.rho
    }
}

/// Square root on the branch with nonnegative imaginary part.
pub fn principal_sqrt(z: Complex64) -> Complex64 {
    let s = z.sqrt();
    if s.im < 0.0 {
        -s
    } else {
        s
    }
}

const SINGULAR_TOL: f64 = 1e-13;

/// Partial sum `1 + Σ_{n≤N} αρ² c_n/(λ_n − αρ²) φ_n(r/ρ)`.
pub fn resonator_series(r: f64, params: ResonatorParams, table: &SpectrumTable, n: usize) -> Result<Complex64> {
    if n > table.len() {
        return Err(Error::TableTooSmall { have: table.len(), need: n });
    }
    let s = params.scaled();
    if table.dist_to_spectrum(s) <= SINGULAR_TOL * table.eigenvalue(1) {
        return Err(Error::ResonanceSingularity(format!("αρ² = {s} lies on the Dirichlet spectrum")));
    }
    let x = r / params.rho;
    let mut w = Complex64::new(1.0, 0.0);
    for mode in &table.modes()[..n] {
        w += s * mode.coupling / (mode.eigenvalue - s) * mode.eigenfunction(x)?;
    }
    Ok(w)
}

/// `J_0(√α r)/J_0(√α ρ)`.
pub fn resonator_closed(r: f64, params: ResonatorParams) -> Result<Complex64> {
    let k = params.wavenumber();
    let den = bessel_j(0, k * params.rho)?;
    if den.norm() <= SINGULAR_TOL {
        return Err(Error::ResonanceSingularity(format!("J_0(√α ρ) vanishes for α = {}", params.alpha)));
    }
    Ok(bessel_j(0, k * r)? / den)
}

/// `∫_{B_ρ} w = 2πρ J_1(√α ρ)/(√α J_0(√α ρ))`, with the `α → 0` limit `πρ²`.
pub fn resonator_mean(params: ResonatorParams) -> Result<Complex64> {
    let rho = params.rho;
    let k = params.wavenumber();
    let z = k * rho;
    if z.norm() < 1e-4 {
        // J_1(z)/(z J_0(z)) = 1/2 + z²/16 + z⁴/96 + O(z⁶)
        let z2 = z * z;
        return Ok(2.0 * PI * rho * rho * (0.5 + z2 / 16.0 + z2 * z2 / 96.0));
    }
    let den = bessel_j(0, z)?;
    if den.norm() <= SINGULAR_TOL {
        return Err(Error::ResonanceSingularity(format!("J_0(√α ρ) vanishes for α = {}", params.alpha)));
    }
    Ok(2.0 * PI * rho * rho * bessel_j(1, z)? / (z * den))
}

/// `∫_{B_ρ} |w|² = 2π ∫_0^ρ |w(r)|² r dr` by Gauss–Legendre in `r`.
pub fn resonator_energy(params: ResonatorParams) -> Result<f64> {
    let rule = crate::quadrature::GaussLegendre::new(48);
    let rho = params.rho;
    let k = params.wavenumber();
    let den = bessel_j(0, k * rho)?;
    if den.norm() <= SINGULAR_TOL {
        return Err(Error::ResonanceSingularity(format!("J_0(√α ρ) vanishes for α = {}", params.alpha)));
    }
    let mut acc = 0.0;
    for (x, w) in rule.on(0.0, rho) {
        acc += w * x * (bessel_j(0, k * x)? / den).norm_sqr();
    }
    Ok(2.0 * PI * acc)
}
