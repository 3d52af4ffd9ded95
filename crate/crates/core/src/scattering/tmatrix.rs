//! Single-cylinder transmission problem.
//!
//! Outside a disk of radius `R` the field is `q J_m(k r) + s H_m(k r)`,
//! inside `c J_m(k_in r)`, and across `r = R` both `u` and `a ∂_r u` are
//! continuous with `a = 1` outside. Writing `x = kR`, `y = k_in R` and
//! `w = a_in k_in / k`, the matching gives
//!
//! ```text
//! s = T q,  T = −(J'(x)J(y) − w J'(y)J(x)) / (H'(x)J(y) − w J'(y)H(x)),
//! c = (q J(x) + s H(x)) / J(y).
//! ```
//!
//! For a rod of the η-scaled medium, `a_in = η²/ε`, `k_in = k0√ε/η`, so
//! `y = k0√ε ρ` and `w = η/√ε = x/y`: only the optical radius and `k0ηρ`
//! enter.

use num_complex::Complex64;

use crate::bessel::{bessel_j_array, signed_orders_with_derivative, RealCylinder};
use crate::error::{Error, Result};
use crate::spectrum::principal_sqrt;

/// Per-order matching data for orders `−L..=L` (index `m + L`).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeMatching {
    pub l: usize,
    /// `T_m`.
    pub t: Vec<Complex64>,
    /// `J_m(x)/J_m(y)` and `H_m(x)/J_m(y)`, which turn `(q, s)` into the
    /// interior coefficient.
    pub interior_j: Vec<Complex64>,
    pub interior_h: Vec<Complex64>,
    /// Interior wavenumber `k_in`.
    pub k_in: Complex64,
    pub radius: f64,
}

impl ModeMatching {
    /// Interior coefficients from exciting and scattered ones.
    pub fn interior(&self, q: &[Complex64], s: &[Complex64]) -> Vec<Complex64> {
        (0..q.len()).map(|i| q[i] * self.interior_j[i] + s[i] * self.interior_h[i]).collect()
    }
}

/// Solve the matching for exterior wavenumber `k`, radius `radius`, interior
/// wavenumber `k_in` and flux weight `w = a_in k_in / k`.
pub fn match_modes(k: f64, radius: f64, k_in: Complex64, w: Complex64, l: usize) -> Result<ModeMatching> {
    if !(k > 0.0 && radius > 0.0) {
        return Err(Error::InvalidInput("wavenumber and radius must be positive".into()));
    }
    let x = k * radius;
    let y = k_in * radius;
    let ext = RealCylinder::new(l + 1, x)?;
    let (jx, djx) = signed_orders_with_derivative(&ext.j, l);
    let h1 = ext.hankel1();
    let (hx, dhx) = signed_orders_with_derivative(&h1, l);
    let jy_tab = bessel_j_array(l + 1, y)?;
    let (jy, djy) = signed_orders_with_derivative(&jy_tab, l);
    let n = 2 * l + 1;
    let mut t = Vec::with_capacity(n);
    let mut ij = Vec::with_capacity(n);
    let mut ih = Vec::with_capacity(n);
    for i in 0..n {
        let num = djx[i] * jy[i] - w * djy[i] * jx[i];
        let den = dhx[i] * jy[i] - w * djy[i] * hx[i];
        if den.norm() == 0.0 || !den.is_finite() || jy[i].norm() == 0.0 {
            return Err(Error::SingularMatching(format!("order {} at k = {k}, k_in = {k_in}", i as i64 - l as i64)));
        }
        t.push(-num / den);
        ij.push(jx[i] / jy[i]);
        ih.push(hx[i] / jy[i]);
    }
    Ok(ModeMatching { l, t, interior_j: ij, interior_h: ih, k_in, radius })
}

/// Reflection coefficients `T_m`, `m = −L..=L`, of a rod of the η-scaled
/// medium: radius `ηρ`, material `ε/η²`, flux coefficient `η²/ε` inside.
pub fn rod_matching(k0: f64, eta: f64, rho: f64, eps: Complex64, l: usize) -> Result<ModeMatching> {
    let sq = principal_sqrt(eps);
    let k_in = k0 * sq / eta;
    let w = eta / sq;
    let m = match_modes(k0, eta * rho, k_in, w, l)?;
    if eps.im == 0.0 && m.t.iter().any(|t| !t.is_finite()) {
        return Err(Error::SingularMatching("lossless interior resonance".into()));
    }
    Ok(m)
}

/// `T_m` of a rod, indexed `m + L`.
pub fn rod_tmatrix(k0: f64, eta: f64, rho: f64, eps: Complex64, l: usize) -> Result<Vec<Complex64>> {
    Ok(rod_matching(k0, eta, rho, eps, l)?.t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrast_free_rod_does_not_scatter() {
        // ε = η² makes the rod indistinguishable from the background
        let eta = 0.25;
        let t = rod_tmatrix(0.8, eta, 0.3, Complex64::new(eta * eta, 0.0), 4).unwrap();
        assert!(t.iter().all(|v| v.norm() < 1e-14), "{t:?}");
    }

    #[test]
    fn lossless_modes_are_unitary() {
        for (k0, eta) in [(0.6, 0.125), (0.9, 0.25), (0.3, 1.0)] {
            let t = rod_tmatrix(k0, eta, 0.375, Complex64::new(100.0, 0.0), 5).unwrap();
            for v in t {
                assert!(((1.0 + 2.0 * v).norm() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn opposite_orders_agree() {
        let t = rod_tmatrix(0.7, 0.125, 0.375, Complex64::new(100.0, 5.0), 3).unwrap();
        for m in 1..=3 {
            assert!((t[3 + m] - t[3 - m]).norm() < 1e-14 * t[3 + m].norm().max(1e-300));
        }
    }

    #[test]
    fn lossy_rod_absorbs() {
        let t = rod_tmatrix(0.64, 0.125, 0.375, Complex64::new(100.0, 5.0), 3).unwrap();
        // absorption per mode: −Re T − |T|² > 0
        for v in t {
            assert!(-v.re - v.norm_sqr() > 0.0);
        }
    }
}
