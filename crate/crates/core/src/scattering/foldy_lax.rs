//! Multiple scattering by a finite rod assembly.
//!
//! Each rod radiates `Σ_n s_{p,n} H_n(k r_p) e^{inθ_p}`. Graf's addition
//! theorem re-expands the wave of rod `p'` about rod `p` as
//! `Σ_m G_{mn} J_m(k r_p) e^{imθ_p}` with
//! `G_{mn} = H_{n−m}(k d) e^{i(n−m)β}`, `d e^{iβ} = c_p − c_{p'}`, and the
//! self-consistent system is `(I − T G) s = T q^inc`. Unknowns are scaled by
//! `|H_n(k R_p)|` before the dense LU solve, which keeps the high orders of
//! small rods from swamping the pivots.

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::tmatrix::{rod_matching, ModeMatching};
use super::{Multipoles, PlaneWave};
use crate::bessel::{bessel_j_array, RealCylinder};
use crate::error::{Error, Result};
use crate::microstructure::RodSet;

/// Default cap on the dense system size (complex unknowns).
pub const MAX_UNKNOWNS: usize = 10_000;

/// Relative residual the dense solve must reach.
pub const SOLVE_RESIDUAL: f64 = 1e-10;

/// Per-rod order from the wave-zone heuristic
/// `max(4, ⌈|k0√ε| ρ η e/2⌉ + 6)`.
pub fn truncation_heuristic(k0: f64, eta: f64, rho: f64, eps: Complex64) -> usize {
    let z = k0 * eps.sqrt().norm() * rho * eta * std::f64::consts::E / 2.0;
    4usize.max(z.ceil() as usize + 6)
}

/// A rod assembly lit by a plane wave.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RodScatteringProblem {
    pub rods: RodSet,
    pub k0: f64,
    pub incident: PlaneWave,
    /// Harmonic order kept on every rod.
    pub l: usize,
    #[serde(default = "default_cap")]
    pub max_unknowns: usize,
}

fn default_cap() -> usize {
    MAX_UNKNOWNS
}

impl RodScatteringProblem {
    pub fn new(rods: RodSet, k0: f64, incident: PlaneWave, l: usize) -> Self {
        Self { rods, k0, incident, l, max_unknowns: MAX_UNKNOWNS }
    }

    pub fn unknowns(&self) -> usize {
        self.rods.len() * (2 * self.l + 1)
    }
}

/// Solved assembly.
#[derive(Debug, Clone)]
pub struct FoldyLaxSolution {
    pub multipoles: Multipoles,
    pub matchings: Vec<ModeMatching>,
    /// Interior coefficients per rod, orders `−L..=L`.
    pub interior: Vec<Vec<Complex64>>,
    /// Achieved relative residual of the scaled system.
    pub residual: f64,
}

/// `H_n(kd) e^{inβ}` for `n = −2L..=2L`, index `n + 2L`.
fn graf_row(k: f64, d: [f64; 2], l: usize) -> Result<Vec<Complex64>> {
    let r = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let beta = d[1].atan2(d[0]);
    let h = RealCylinder::new(2 * l, k * r)?.hankel1();
    let mut out = vec![Complex64::new(0.0, 0.0); 4 * l + 1];
    for n in 0..=2 * l {
        let e = Complex64::from_polar(1.0, n as f64 * beta);
        out[2 * l + n] = h[n] * e;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        out[2 * l - n] = sign * h[n] * e.conj();
    }
    Ok(out)
}

/// Incident coefficients `e^{ik d̂·c} i^m e^{−imφ}` about `c`.
pub(crate) fn plane_wave_coefficients(k: f64, wave: &PlaneWave, c: [f64; 2], l: usize) -> Vec<Complex64> {
    let d = wave.unit();
    let phase = Complex64::from_polar(1.0, k * (d[0] * c[0] + d[1] * c[1]));
    let phi = d[1].atan2(d[0]);
    (-(l as i64)..=l as i64)
        .map(|m| phase * Complex64::i().powi(m as i32) * Complex64::from_polar(1.0, -(m as f64) * phi))
        .collect()
}

/// Solve the assembly to `SOLVE_RESIDUAL`.
pub fn solve_foldy_lax(problem: &RodScatteringProblem) -> Result<FoldyLaxSolution> {
    let k = problem.k0;
    let l = problem.l;
    let w = 2 * l + 1;
    let rods = &problem.rods;
    let np = rods.len();
    let n = np * w;
    if n > problem.max_unknowns {
        return Err(Error::TooLarge { unknowns: n, cap: problem.max_unknowns });
    }
    let matchings = rods
        .rods
        .iter()
        .map(|r| rod_matching(k, rods.eta, r.triple.rho, r.eps, l))
        .collect::<Result<Vec<_>>>()?;
    let centers: Vec<[f64; 2]> = rods.rods.iter().map(|r| r.center).collect();
    let mut scale = Vec::with_capacity(n);
    for r in &rods.rods {
        let h = RealCylinder::new(l, k * r.radius)?.hankel1();
        for m in -(l as i64)..=l as i64 {
            scale.push(h[m.unsigned_abs() as usize].norm());
        }
    }

    let mut a = Mat::<Complex64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = Complex64::new(1.0, 0.0);
    }
    for p in 0..np {
        for q in 0..np {
            if p == q {
                continue;
            }
            let d = [centers[p][0] - centers[q][0], centers[p][1] - centers[q][1]];
            let g = graf_row(k, d, l)?;
            for mi in 0..w {
                let row = p * w + mi;
                let tm = matchings[p].t[mi] * scale[row];
                for ni in 0..w {
                    let col = q * w + ni;
                    a[(row, col)] = -tm * g[2 * l + ni - mi] / scale[col];
                }
            }
        }
    }
    let mut incident = Vec::with_capacity(n);
    let mut b = Mat::<Complex64>::zeros(n, 1);
    for p in 0..np {
        let qinc = plane_wave_coefficients(k, &problem.incident, centers[p], l);
        for mi in 0..w {
            let row = p * w + mi;
            b[(row, 0)] = matchings[p].t[mi] * qinc[mi] * scale[row];
            incident.push(qinc[mi]);
        }
    }

    let x = a.partial_piv_lu().solve(&b);
    let mut rnorm = 0.0;
    let mut bnorm = 0.0;
    for i in 0..n {
        let mut acc = -b[(i, 0)];
        for j in 0..n {
            acc += a[(i, j)] * x[(j, 0)];
        }
        rnorm += acc.norm_sqr();
        bnorm += b[(i, 0)].norm_sqr();
    }
    let residual = if bnorm > 0.0 { (rnorm / bnorm).sqrt() } else { rnorm.sqrt() };
    if !residual.is_finite() || residual > SOLVE_RESIDUAL {
        return Err(Error::NoConvergence(format!("dense solve residual {residual:e} above {SOLVE_RESIDUAL:e}")));
    }
    drop(a);

    let scattered: Vec<Complex64> = (0..n).map(|i| x[(i, 0)] / scale[i]).collect();
    // local exciting field q_p = s_p / T_p is ill-posed where T vanishes, so
    // rebuild it from the incident wave and the other rods
    let mut exciting = incident;
    for p in 0..np {
        for q in 0..np {
            if p == q {
                continue;
            }
            let d = [centers[p][0] - centers[q][0], centers[p][1] - centers[q][1]];
            let g = graf_row(k, d, l)?;
            for mi in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for ni in 0..w {
                    acc += g[2 * l + ni - mi] * scattered[q * w + ni];
                }
                exciting[p * w + mi] += acc;
            }
        }
    }
    let interior = (0..np)
        .map(|p| matchings[p].interior(&exciting[p * w..(p + 1) * w], &scattered[p * w..(p + 1) * w]))
        .collect();
    let multipoles = Multipoles { k, l, incident: problem.incident, centers, scattered, exciting };
    Ok(FoldyLaxSolution { multipoles, matchings, interior, residual })
}

impl FoldyLaxSolution {
    /// Index of the rod whose disk contains `x`.
    pub fn rod_containing(&self, x: [f64; 2]) -> Option<usize> {
        self.multipoles.centers.iter().zip(&self.matchings).position(|(c, m)| (x[0] - c[0]).hypot(x[1] - c[1]) < m.radius)
    }

    /// `∫ |u|²` over the disk of rod `p`, from the interior expansion.
    pub fn rod_energy(&self, p: usize, order: usize) -> Result<f64> {
        let m = &self.matchings[p];
        let l = self.multipoles.l;
        let c = &self.interior[p];
        let gl = crate::quadrature::GaussLegendre::new(order);
        let mut acc = 0.0;
        for (r, w) in gl.on(0.0, m.radius) {
            let j = bessel_j_array(l, m.k_in * r)?;
            let mut s = c[l].norm_sqr() * j[0].norm_sqr();
            for k in 1..=l {
                s += (c[l + k].norm_sqr() + c[l - k].norm_sqr()) * j[k].norm_sqr();
            }
            acc += w * r * s;
        }
        Ok(2.0 * std::f64::consts::PI * acc)
    }

    /// Total field at `x`: interior expansion inside a rod, incident plus
    /// outgoing waves elsewhere.
    pub fn field(&self, x: [f64; 2]) -> Result<Complex64> {
        let mp = &self.multipoles;
        for (p, c) in mp.centers.iter().enumerate() {
            let dx = [x[0] - c[0], x[1] - c[1]];
            let r = (dx[0] * dx[0] + dx[1] * dx[1]).sqrt();
            let m = &self.matchings[p];
            if r < m.radius {
                let j = bessel_j_array(mp.l, m.k_in * r)?;
                let theta = dx[1].atan2(dx[0]);
                return Ok(super::synthesize(&self.interior[p], &j, theta, mp.l));
            }
        }
        mp.exterior_field(x)
    }
}
