//! Two-dimensional TM scattering: direct multiple scattering by a sampled rod
//! assembly, the homogenized disk, and the comparison between the two.
//!
//! Time dependence `e^{−iωt}`; outgoing waves are `H_n = H_n^{(1)}`, so every
//! radiated field satisfies the radiation condition by construction.

pub mod farfield;
pub mod foldy_lax;
pub mod homogenized;
pub mod study;
pub mod tmatrix;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::RealCylinder;
use crate::error::Result;

pub use farfield::FarField;
pub use foldy_lax::{solve_foldy_lax, truncation_heuristic, FoldyLaxSolution, RodScatteringProblem};
pub use homogenized::{solve_homogenized_disk, HomogenizedDiskProblem, HomogenizedSolution};
pub use study::{convergence_study, select_off_resonant_k0, StudyConfig, StudyRecord, StudyReport};
pub use tmatrix::{rod_tmatrix, ModeMatching};

/// Unit-amplitude plane wave `e^{ik d·x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneWave {
    pub direction: [f64; 2],
}

impl PlaneWave {
    pub fn from_angle(phi: f64) -> Self {
        Self { direction: [phi.cos(), phi.sin()] }
    }

    /// Normalized direction.
    pub fn unit(&self) -> [f64; 2] {
        let n = self.direction[0].hypot(self.direction[1]);
        [self.direction[0] / n, self.direction[1] / n]
    }

    pub fn angle(&self) -> f64 {
        self.direction[1].atan2(self.direction[0])
    }

    pub fn at(&self, k: f64, x: [f64; 2]) -> Complex64 {
        let d = self.unit();
        Complex64::from_polar(1.0, k * (d[0] * x[0] + d[1] * x[1]))
    }
}

/// `Σ_{m=−L}^{L} c_m Z_m e^{imθ}` from a table `Z_0..Z_L` with
/// `Z_{−m} = (−1)^m Z_m`.
pub(crate) fn synthesize(c: &[Complex64], z: &[Complex64], theta: f64, l: usize) -> Complex64 {
    let mut acc = c[l] * z[0];
    for m in 1..=l {
        let e = Complex64::from_polar(1.0, m as f64 * theta);
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        acc += z[m] * (c[l + m] * e + sign * c[l - m] * e.conj());
    }
    acc
}

/// Outgoing multipole sources, orders `−L..=L` per center, with the
/// exciting coefficients each source saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipoles {
    pub k: f64,
    pub l: usize,
    pub incident: PlaneWave,
    pub centers: Vec<[f64; 2]>,
    /// Flattened `s_{p,n}` at index `p(2L+1) + n + L`.
    pub scattered: Vec<Complex64>,
    /// Regular-wave coefficients of the field exciting each source.
    pub exciting: Vec<Complex64>,
}

impl Multipoles {
    fn width(&self) -> usize {
        2 * self.l + 1
    }

    /// Scattered field at `x`, valid outside every source disk.
    pub fn scattered_field(&self, x: [f64; 2]) -> Result<Complex64> {
        let w = self.width();
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, c) in self.centers.iter().enumerate() {
            let dx = [x[0] - c[0], x[1] - c[1]];
            let r = dx[0].hypot(dx[1]);
            let h = RealCylinder::new(self.l, self.k * r)?.hankel1();
            acc += synthesize(&self.scattered[p * w..(p + 1) * w], &h, dx[1].atan2(dx[0]), self.l);
        }
        Ok(acc)
    }

    /// Incident plus scattered field.
    pub fn exterior_field(&self, x: [f64; 2]) -> Result<Complex64> {
        Ok(self.incident.at(self.k, x) + self.scattered_field(x)?)
    }

    /// Far-field amplitude `f(φ)` with `u_s ~ f(φ) e^{ikr}/√r`.
    pub fn amplitude(&self, phi: f64) -> Complex64 {
        let w = self.width();
        let l = self.l as i64;
        let pref = (2.0 / (std::f64::consts::PI * self.k)).sqrt() * Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4);
        let xhat = [phi.cos(), phi.sin()];
        let modes: Vec<Complex64> =
            (-l..=l).map(|n| Complex64::new(0.0, -1.0).powi(n as i32) * Complex64::from_polar(1.0, n as f64 * phi)).collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, c) in self.centers.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -self.k * (xhat[0] * c[0] + xhat[1] * c[1]));
            let s = &self.scattered[p * w..(p + 1) * w];
            let inner: Complex64 = s.iter().zip(&modes).map(|(a, b)| a * b).sum();
            acc += phase * inner;
        }
        pref * acc
    }

    /// Absorption cross section `−(4/k) Σ [Re(s̄ q) + |s|²]`.
    pub fn absorption(&self) -> f64 {
        let sum: f64 = self.scattered.iter().zip(&self.exciting).map(|(s, q)| (s.conj() * q).re + s.norm_sqr()).sum();
        -4.0 / self.k * sum
    }

    /// Extinction from the forward amplitude.
    pub fn extinction(&self) -> f64 {
        let fwd = self.amplitude(self.incident.angle());
        -(8.0 * std::f64::consts::PI / self.k).sqrt() * (Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4) * fwd).re
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthesize_matches_direct_sum() {
        let c: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        let z = [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.5), Complex64::new(0.7, -0.4)];
        let th = 0.83;
        let mut direct = Complex64::new(0.0, 0.0);
        for m in -2i32..=2 {
            let zm = if m < 0 && m % 2 != 0 { -z[m.unsigned_abs() as usize] } else { z[m.unsigned_abs() as usize] };
            direct += c[(m + 2) as usize] * zm * Complex64::from_polar(1.0, m as f64 * th);
        }
        assert!((synthesize(&c, &z, th, 2) - direct).norm() < 1e-14);
    }
}
