//! Far-field pattern and cross sections.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Multipoles;
use crate::io::{fmt_f64, CsvTable};

/// Default number of observation angles.
pub const DEFAULT_ANGLES: usize = 720;

/// Far-field amplitude on a uniform grid of `[0, 2π)` with cross sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarField {
    pub angles: Vec<f64>,
    pub amplitude: Vec<Complex64>,
    /// `∫ |f|² dφ` by the trapezoidal rule.
    pub scattering: f64,
    /// From the sources and their exciting fields.
    pub absorption: f64,
    /// From the forward amplitude.
    pub extinction: f64,
}

impl FarField {
    pub fn from_multipoles(m: &Multipoles, n_angles: usize) -> Self {
        let angles: Vec<f64> = (0..n_angles).map(|i| 2.0 * std::f64::consts::PI * i as f64 / n_angles as f64).collect();
        let amplitude: Vec<Complex64> = angles.iter().map(|&a| m.amplitude(a)).collect();
        let scattering = amplitude.iter().map(|f| f.norm_sqr()).sum::<f64>() * 2.0 * std::f64::consts::PI / n_angles as f64;
        Self { angles, amplitude, scattering, absorption: m.absorption(), extinction: m.extinction() }
    }

    /// `|σ_ext − σ_sca − σ_abs| / σ_ext`.
    pub fn optical_theorem_gap(&self) -> f64 {
        (self.extinction - self.scattering - self.absorption).abs() / self.extinction.abs()
    }

    /// Discrete `L²(0, 2π)` norm.
    pub fn l2_norm(&self) -> f64 {
        (self.amplitude.iter().map(|f| f.norm_sqr()).sum::<f64>() * 2.0 * std::f64::consts::PI / self.amplitude.len() as f64).sqrt()
    }

    /// `‖f − g‖ / ‖g‖` on a shared grid.
    pub fn relative_gap(&self, reference: &FarField) -> f64 {
        assert_eq!(self.amplitude.len(), reference.amplitude.len(), "far fields on different grids");
        let num: f64 = self.amplitude.iter().zip(&reference.amplitude).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = reference.amplitude.iter().map(|b| b.norm_sqr()).sum();
        (num / den).sqrt()
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["angle", "re_f", "im_f"]);
        t.comments.push(format!(
            "scattering={} absorption={} extinction={}",
            fmt_f64(self.scattering),
            fmt_f64(self.absorption),
            fmt_f64(self.extinction)
        ));
        for (a, f) in self.angles.iter().zip(&self.amplitude) {
            t.push(vec![*a, f.re, f.im]);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scattering::PlaneWave;

    fn monopole(s0: Complex64) -> Multipoles {
        Multipoles {
            k: 1.1,
            l: 1,
            incident: PlaneWave::from_angle(0.4),
            centers: vec![[0.0, 0.0]],
            scattered: vec![Complex64::new(0.0, 0.0), s0, Complex64::new(0.0, 0.0)],
            exciting: vec![Complex64::new(0.0, 0.0); 3],
        }
    }

    #[test]
    fn monopole_is_isotropic() {
        let ff = FarField::from_multipoles(&monopole(Complex64::new(0.3, -0.2)), 64);
        let m0 = ff.amplitude[0].norm();
        assert!(ff.amplitude.iter().all(|f| (f.norm() - m0).abs() < 1e-10 * m0));
    }

    #[test]
    fn amplitude_is_linear() {
        let a = FarField::from_multipoles(&monopole(Complex64::new(0.3, -0.2)), 16);
        let b = FarField::from_multipoles(&monopole(Complex64::new(0.6, -0.4)), 16);
        for (x, y) in a.amplitude.iter().zip(&b.amplitude) {
            assert!((2.0 * x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn csv_has_expected_header() {
        let ff = FarField::from_multipoles(&monopole(Complex64::new(0.3, -0.2)), 8);
        let text = ff.to_csv().render();
        assert!(text.lines().any(|l| l == "angle,re_f,im_f"));
        let back = CsvTable::parse(&text).unwrap();
        assert_eq!(back.rows.len(), 8);
    }
}
