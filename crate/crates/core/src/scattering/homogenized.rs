//! The homogenized obstacle: a disk of radius `R` filled with `(ε_eff, μ)`.
//!
//! Inside, `−div(ε_eff⁻¹ ∇u) − k0² μ u = 0`, so the interior wavenumber is
//! `k_int = k0 √(ε_eff μ)`; across `r = R`, `u⁺ = u⁻` and
//! `∂_r u⁺ = ε_eff⁻¹ ∂_r u⁻`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::foldy_lax::plane_wave_coefficients;
use super::tmatrix::{match_modes, ModeMatching};
use super::{synthesize, Multipoles, PlaneWave};
use crate::bessel::{bessel_j_array, signed_orders_with_derivative, RealCylinder};
use crate::cell::EffTensor;
use crate::error::{Error, Result};
use crate::spectrum::principal_sqrt;

/// Interface nodes used by the transmission residual.
const INTERFACE_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogenizedDiskProblem {
    pub radius: f64,
    pub eps_eff: f64,
    pub mu: Complex64,
    pub k0: f64,
    pub incident: PlaneWave,
    /// Harmonic order; `⌈k0 R⌉ + 10` when absent.
    #[serde(default)]
    pub l: Option<usize>,
}

impl HomogenizedDiskProblem {
    pub fn new(radius: f64, eps_eff: f64, mu: Complex64, k0: f64, incident: PlaneWave) -> Self {
        Self { radius, eps_eff, mu, k0, incident, l: None }
    }

    /// Build from a cell tensor, rejecting anisotropy above `tol` relative
    /// to the scalar part.
    pub fn from_tensor(tensor: &EffTensor, tol: f64, radius: f64, mu: Complex64, k0: f64, incident: PlaneWave) -> Result<Self> {
        let (lo, hi) = tensor.eigenvalues();
        let spread = (hi - lo) / tensor.scalar();
        if spread > tol {
            return Err(Error::Anisotropic(format!(
                "eigenvalues {lo} and {hi} differ by {spread:e} relative; this solver needs a scalar permittivity"
            )));
        }
        Ok(Self::new(radius, tensor.scalar(), mu, k0, incident))
    }

    pub fn order(&self) -> usize {
        self.l.unwrap_or((self.k0 * self.radius).ceil() as usize + 10)
    }

    /// `k0 √(ε_eff μ)` with nonnegative imaginary part.
    pub fn interior_wavenumber(&self) -> Complex64 {
        self.k0 * principal_sqrt(self.eps_eff * self.mu)
    }
}

/// Series solution of the homogenized problem.
#[derive(Debug, Clone)]
pub struct HomogenizedSolution {
    pub problem: HomogenizedDiskProblem,
    pub multipoles: Multipoles,
    pub matching: ModeMatching,
    /// Interior coefficients of `J_m(k_int r) e^{imθ}`.
    pub interior: Vec<Complex64>,
    /// Largest relative jump of `u` or of the weighted flux over the
    /// interface nodes.
    pub interface_residual: f64,
}

pub fn solve_homogenized_disk(problem: &HomogenizedDiskProblem) -> Result<HomogenizedSolution> {
    if !(problem.eps_eff > 0.0) {
        return Err(Error::InvalidInput(format!("eps_eff must be positive, got {}", problem.eps_eff)));
    }
    if problem.mu.im < 0.0 {
        return Err(Error::InvalidInput(format!("Im mu must be nonnegative, got {}", problem.mu.im)));
    }
    let l = problem.order();
    let k = problem.k0;
    let k_int = problem.interior_wavenumber();
    let w = k_int / (k * problem.eps_eff);
    let matching = match_modes(k, problem.radius, k_int, w, l)?;
    let q = plane_wave_coefficients(k, &problem.incident, [0.0, 0.0], l);
    let s: Vec<Complex64> = q.iter().zip(&matching.t).map(|(q, t)| q * t).collect();
    let interior = matching.interior(&q, &s);
    let multipoles = Multipoles { k, l, incident: problem.incident, centers: vec![[0.0, 0.0]], scattered: s, exciting: q };
    let mut sol = HomogenizedSolution { problem: *problem, multipoles, matching, interior, interface_residual: 0.0 };
    sol.interface_residual = sol.transmission_residual()?;
    Ok(sol)
}

impl HomogenizedSolution {
    /// Total field at `x`.
    pub fn field(&self, x: [f64; 2]) -> Result<Complex64> {
        let r = x[0].hypot(x[1]);
        if r < self.problem.radius {
            let j = bessel_j_array(self.multipoles.l, self.matching.k_in * r)?;
            Ok(synthesize(&self.interior, &j, x[1].atan2(x[0]), self.multipoles.l))
        } else {
            self.multipoles.exterior_field(x)
        }
    }

    fn transmission_residual(&self) -> Result<f64> {
        let l = self.multipoles.l;
        let k = self.multipoles.k;
        let rad = self.problem.radius;
        let ext = RealCylinder::new(l + 1, k * rad)?;
        let (j, dj) = signed_orders_with_derivative(&ext.j, l);
        let (h, dh) = signed_orders_with_derivative(&ext.hankel1(), l);
        let jin_tab = bessel_j_array(l + 1, self.matching.k_in * rad)?;
        let (jin, djin) = signed_orders_with_derivative(&jin_tab, l);
        let q = &self.multipoles.exciting;
        let s = &self.multipoles.scattered;
        let c = &self.interior;
        let kin = self.matching.k_in;
        let (mut du, mut dflux, mut umax, mut fmax) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for node in 0..INTERFACE_NODES {
            let th = 2.0 * std::f64::consts::PI * node as f64 / INTERFACE_NODES as f64;
            let z = Complex64::new(0.0, 0.0);
            let (mut up, mut um, mut fp, mut fm) = (z, z, z, z);
            for i in 0..2 * l + 1 {
                let e = Complex64::from_polar(1.0, (i as f64 - l as f64) * th);
                up += (q[i] * j[i] + s[i] * h[i]) * e;
                um += c[i] * jin[i] * e;
                fp += k * (q[i] * dj[i] + s[i] * dh[i]) * e;
                fm += kin * c[i] * djin[i] * e / self.problem.eps_eff;
            }
            du = du.max((up - um).norm());
            dflux = dflux.max((fp - fm).norm());
            umax = umax.max(up.norm());
            fmax = fmax.max(fp.norm());
        }
        Ok((du / umax).max(dflux / fmax))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matched_medium_is_transparent() {
        let p = HomogenizedDiskProblem::new(1.0, 1.0, Complex64::new(1.0, 0.0), 0.9, PlaneWave::from_angle(0.2));
        let sol = solve_homogenized_disk(&p).unwrap();
        assert!(sol.multipoles.scattered.iter().all(|s| s.norm() < 1e-14));
    }

    #[test]
    fn lossy_permeability_absorbs() {
        let p = HomogenizedDiskProblem::new(1.0, 2.6, Complex64::new(1.4, 0.3), 0.7, PlaneWave::from_angle(0.0));
        let sol = solve_homogenized_disk(&p).unwrap();
        let ff = super::super::FarField::from_multipoles(&sol.multipoles, 720);
        assert!(ff.absorption > 0.0);
        assert!(ff.optical_theorem_gap() < 1e-10, "{}", ff.optical_theorem_gap());
    }

    #[test]
    fn interface_conditions_hold() {
        for mu in [Complex64::new(-2.0, 0.4), Complex64::new(3.0, 0.05)] {
            let p = HomogenizedDiskProblem::new(1.0, 2.6, mu, 0.8, PlaneWave::from_angle(1.0));
            let sol = solve_homogenized_disk(&p).unwrap();
            assert!(sol.interface_residual < 1e-10, "{}", sol.interface_residual);
        }
    }

    #[test]
    fn anisotropic_tensor_is_rejected() {
        let t = EffTensor {
            e11: 2.0,
            e12: 0.3,
            e22: 2.5,
            lower: 1.5,
            upper: 4.0,
            resolution: 64,
            supercell_n: 1,
            ensemble_size: 1,
            stderr: 0.0,
            discretization_error: 0.0,
        };
        let r = HomogenizedDiskProblem::from_tensor(&t, 1e-3, 1.0, Complex64::new(1.0, 0.1), 0.5, PlaneWave::from_angle(0.0));
        assert!(matches!(r, Err(Error::Anisotropic(_))));
    }
}
