//! Vanishing-absorption limit of `μ_eff`.
//!
//! The law is `γ(dρ) ⊗ g(a)da ⊗ δ_h` on `(ρ, Re ε, Im ε)`. With
//! `f_n(s) = (λ_n/k0²) ∫ g(λ_n/(k0²ρ²) + s) γ(dρ)`, each modal term becomes
//!
//! ```text
//! I_{h,n} = −∫ρ²dγ − ∫ s/(s² + h²) f_n(s) ds + i ∫ h/(s² + h²) f_n(s) ds,
//! ```
//!
//! and as `h ↓ 0` the last two integrals tend to `−PV∫ f_n(s)/s ds` and
//! `iπ f_n(0)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{truncation_index, SeriesControl};
use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::law::{make_rod_law, CenterLaw, ComponentLaw, LipschitzDensity, PermittivityLaw, RodLaw};
use crate::quadrature::integrate_adaptive;
use crate::spectrum::SpectrumTable;

/// Absolute tolerance of the per-mode integrals.
const MODE_TOL: f64 = 1e-12;

/// Radius law `γ`, real-permittivity density `g`, absorption `h` and
/// wavenumber `k0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitAbsorptionSetup {
    pub gamma: ComponentLaw,
    pub g: LipschitzDensity,
    pub h: f64,
    pub k0: f64,
}

impl LimitAbsorptionSetup {
    pub fn new(gamma: ComponentLaw, g: LipschitzDensity, h: f64, k0: f64) -> Result<Self> {
        let (lo, hi) = gamma.support();
        if !(lo > 0.0 && hi <= 0.5) {
            return Err(Error::InvalidLaw(format!("radius law support [{lo}, {hi}] must lie in (0, 1/2]")));
        }
        if !(h >= 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("absorption h = {h} must be finite and nonnegative")));
        }
        if !(k0 > 0.0 && k0.is_finite()) {
            return Err(Error::InvalidInput(format!("k0 = {k0} must be positive")));
        }
        Ok(Self { gamma, g, h, k0 })
    }

    /// Dirac mass at `ρ0` with the hat `g(a) = 10⁻²(10 − |a − 100|)⁺`.
    pub fn reference(h: f64, k0: f64) -> Result<Self> {
        Self::new(ComponentLaw::dirac(0.35), LipschitzDensity::hat(100.0, 10.0)?, h, k0)
    }

    pub fn with_h(&self, h: f64) -> Result<Self> {
        Self::new(self.gamma.clone(), self.g.clone(), h, self.k0)
    }

    pub fn with_k0(&self, k0: f64) -> Result<Self> {
        Self::new(self.gamma.clone(), self.g.clone(), self.h, k0)
    }

    /// The centered rod law with `Im ε = h` and margin `delta`.
    pub fn to_rod_law(&self, delta: f64) -> Result<RodLaw> {
        make_rod_law(
            CenterLaw::fixed(0.5, 0.5),
            self.gamma.clone(),
            PermittivityLaw { re: ComponentLaw::Density(self.g.clone()), im: ComponentLaw::dirac(self.h) },
            delta,
        )
    }

    fn radius_second_moment(&self) -> f64 {
        self.gamma.second_moment()
    }

    /// Shift `λ_n/(k0²ρ²)` of mode `n` at radius `ρ`.
    fn shift(&self, lambda: f64, rho: f64) -> f64 {
        lambda / (self.k0 * self.k0 * rho * rho)
    }

    /// Support of `f_n` in `s`.
    fn profile_support(&self, lambda: f64) -> (f64, f64) {
        let (glo, ghi) = self.g.support();
        let (rlo, rhi) = self.gamma.support();
        (glo - self.shift(lambda, rlo), ghi - self.shift(lambda, rhi))
    }

    /// Kinks of `f_n` in `s`: images of the knots of `g` (exact for a Dirac
    /// radius law; panel edges otherwise).
    fn profile_breakpoints(&self, lambda: f64) -> Vec<f64> {
        let (rlo, rhi) = self.gamma.support();
        let mut out = Vec::new();
        for &k in self.g.knots() {
            out.push(k - self.shift(lambda, rlo));
            out.push(k - self.shift(lambda, rhi));
        }
        out
    }

    /// Lipschitz constant of `f_n`.
    fn profile_lipschitz(&self, lambda: f64) -> f64 {
        lambda / (self.k0 * self.k0) * self.g.lipschitz()
    }
}

/// `f_n(s) = (λ_n/k0²) ∫ g(λ_n/(k0²ρ²) + s) γ(dρ)`.
pub fn f_n_profile(n: usize, s: f64, setup: &LimitAbsorptionSetup, table: &SpectrumTable) -> Result<f64> {
    if n == 0 || n > table.len() {
        return Err(Error::TableTooSmall { have: table.len(), need: n });
    }
    Ok(profile(table.eigenvalue(n), s, setup))
}

fn profile(lambda: f64, s: f64, setup: &LimitAbsorptionSetup) -> f64 {
    let scale = lambda / (setup.k0 * setup.k0);
    match &setup.gamma {
        ComponentLaw::Dirac { value } => scale * setup.g.density(setup.shift(lambda, *value) + s),
        law => {
            // breakpoints where the shifted argument crosses a knot of g
            let (rlo, rhi) = law.support();
            let mut bps: Vec<f64> = setup
                .g
                .knots()
                .iter()
                .filter(|&&k| k > s)
                .map(|&k| (lambda / (setup.k0 * setup.k0 * (k - s))).sqrt())
                .filter(|&r| r > rlo && r < rhi)
                .collect();
            if let ComponentLaw::Density(d) = law {
                bps.extend(d.knots().iter().copied());
            }
            let f = |rho: f64| setup.g.density(setup.shift(lambda, rho) + s) * law.density(rho).unwrap_or(0.0);
            integrate_adaptive(f, rlo, rhi, &bps, 1e-14).map(|(v, _)| scale * v).unwrap_or(f64::NAN)
        }
    }
}

/// A real function with compact support `[lo, hi]`, its declared Lipschitz
/// constant and the abscissae of its kinks.
pub struct PvIntegrand<'a> {
    pub f: &'a (dyn Fn(f64) -> f64 + Sync),
    pub support: (f64, f64),
    pub lipschitz: Option<f64>,
    pub breakpoints: Vec<f64>,
}

/// Cauchy principal value `PV ∫ f(s)/s ds`.
///
/// On the symmetric window `|s| < a`, `a = min(1, half the distance from 0 to
/// the nearer support edge)`, the integral is folded to
/// `∫_0^a (f(s) − f(−s))/s ds`, whose integrand is bounded by `2L`. The rest
/// is a regular integral. Both parts use adaptive Gauss–Kronrod split at the
/// kinks of `f`.
pub fn pv_quotient_integral(p: &PvIntegrand<'_>, tol: f64) -> Result<f64> {
    if p.lipschitz.is_none() {
        return Err(Error::MissingLipschitz);
    }
    let (lo, hi) = p.support;
    let f = p.f;
    let q = |s: f64| f(s) / s;
    if lo >= 0.0 || hi <= 0.0 {
        // Lipschitz with compact support: f vanishes at the edge, f(s)/s is bounded
        return Ok(integrate_adaptive(q, lo, hi, &p.breakpoints, tol)?.0);
    }
    let a = (0.5 * (-lo).min(hi)).min(1.0);
    let folded: Vec<f64> = p.breakpoints.iter().map(|b| b.abs()).filter(|&b| b < a).collect();
    let (window, _) = integrate_adaptive(|s| (f(s) - f(-s)) / s, 0.0, a, &folded, tol / 3.0)?;
    let (left, _) = integrate_adaptive(q, lo, -a, &p.breakpoints, tol / 3.0)?;
    let (right, _) = integrate_adaptive(q, a, hi, &p.breakpoints, tol / 3.0)?;
    Ok(window + left + right)
}

fn truncation(setup: &LimitAbsorptionSetup, ctrl: &SeriesControl) -> Result<(usize, f64)> {
    let (glo, ghi) = setup.g.support();
    let (_, rhi) = setup.gamma.support();
    let a = glo.abs().max(ghi.abs()).hypot(setup.h) * rhi * rhi * setup.k0 * setup.k0;
    truncation_index(a, a * rhi * rhi, ctrl)
}

/// Result of a limit-absorption evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitValue {
    pub h: f64,
    pub mu: Complex64,
    pub n_modes: usize,
    pub tail_bound: f64,
}

/// `μ_h = 1 + Σ_n c_n² I_{h,n}` for `h > 0`.
pub fn mu_eff_h(setup: &LimitAbsorptionSetup, ctrl: &SeriesControl, table: &SpectrumTable) -> Result<LimitValue> {
    let h = setup.h;
    if !(h > 0.0) {
        return Err(Error::InvalidInput("mu_eff_h needs h > 0; use mu_eff_limit for h = 0".into()));
    }
    let (n, tail_bound) = truncation(setup, ctrl)?;
    if n > table.len() {
        return Err(Error::TableTooSmall { have: table.len(), need: n });
    }
    let r2 = setup.radius_second_moment();
    let terms = table.modes()[..n]
        .par_iter()
        .map(|m| {
            let lam = m.eigenvalue;
            let (lo, hi) = setup.profile_support(lam);
            let mut bps = setup.profile_breakpoints(lam);
            bps.extend([0.0, -h, h]);
            let f = |s: f64| profile(lam, s, setup);
            let (re, _) = integrate_adaptive(|s| s / (s * s + h * h) * f(s), lo, hi, &bps, MODE_TOL)?;
            let (im, _) = integrate_adaptive(|s| h / (s * s + h * h) * f(s), lo, hi, &bps, MODE_TOL)?;
            Ok(m.coupling * m.coupling * Complex64::new(-r2 - re, im))
        })
        .collect::<Result<Vec<Complex64>>>()?;
    Ok(LimitValue { h, mu: 1.0 + terms.into_iter().sum::<Complex64>(), n_modes: n, tail_bound })
}

/// `μ_0 = 1 − π∫ρ²dγ + Σ_n c_n² (−PV∫ f_n(s)/s ds + iπ f_n(0))`.
///
/// The `−π∫ρ²dγ` term is distributed over the modes as `−c_n²∫ρ²dγ` so
/// that each summand decays like `λ_n⁻²` and the tail majorant applies.
pub fn mu_eff_limit(setup: &LimitAbsorptionSetup, ctrl: &SeriesControl, table: &SpectrumTable) -> Result<LimitValue> {
    let setup0 = setup.with_h(0.0)?;
    let (n, tail_bound) = truncation(&setup0, ctrl)?;
    if n > table.len() {
        return Err(Error::TableTooSmall { have: table.len(), need: n });
    }
    let r2 = setup0.radius_second_moment();
    let terms = table.modes()[..n]
        .par_iter()
        .map(|m| {
            let lam = m.eigenvalue;
            let f = |s: f64| profile(lam, s, &setup0);
            let integrand = PvIntegrand {
                f: &f,
                support: setup0.profile_support(lam),
                lipschitz: Some(setup0.profile_lipschitz(lam)),
                breakpoints: setup0.profile_breakpoints(lam),
            };
            let pv = pv_quotient_integral(&integrand, MODE_TOL)?;
            Ok(m.coupling * m.coupling * Complex64::new(-r2 - pv, PI * f(0.0)))
        })
        .collect::<Result<Vec<Complex64>>>()?;
    Ok(LimitValue { h: 0.0, mu: 1.0 + terms.into_iter().sum::<Complex64>(), n_modes: n, tail_bound })
}

/// `π Σ_{n≤N} c_n² f_n(0)`, the residue part of `Im μ_0`.
pub fn residue_sum(setup: &LimitAbsorptionSetup, table: &SpectrumTable, n: usize) -> f64 {
    PI * table.modes()[..n.min(table.len())]
        .iter()
        .map(|m| m.coupling * m.coupling * profile(m.eigenvalue, 0.0, setup))
        .sum::<f64>()
}

/// Table size sufficient for every `h` in `hs` at this setup.
pub fn table_for_limit(setup: &LimitAbsorptionSetup, hs: &[f64], ctrl: &SeriesControl) -> Result<SpectrumTable> {
    let mut need = truncation(&setup.with_h(0.0)?, ctrl)?.0;
    for &h in hs {
        need = need.max(truncation(&setup.with_h(h)?, ctrl)?.0);
    }
    SpectrumTable::new(need + 2)
}

/// Limit-absorption sweep: rows of `(k0, h, μ)`, with `h = 0` rows holding `μ_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCurve {
    pub rows: Vec<(f64, LimitValue)>,
}

impl LimitCurve {
    pub fn sweep(
        setup: &LimitAbsorptionSetup,
        k0s: &[f64],
        hs: &[f64],
        ctrl: &SeriesControl,
        table: &SpectrumTable,
    ) -> Result<Self> {
        let mut rows = Vec::with_capacity(k0s.len() * hs.len());
        for &h in hs {
            for &k0 in k0s {
                let s = setup.with_k0(k0)?.with_h(h)?;
                let v = if h == 0.0 { mu_eff_limit(&s, ctrl, table)? } else { mu_eff_h(&s, ctrl, table)? };
                rows.push((k0, v));
            }
        }
        Ok(Self { rows })
    }

    /// CSV `k0,lambda,re_mu,im_mu,n_modes,tail_bound,h`.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["k0", "lambda", "re_mu", "im_mu", "n_modes", "tail_bound", "h"]);
        for (k0, v) in &self.rows {
            t.push(vec![*k0, 2.0 * PI / k0, v.mu.re, v.mu.im, v.n_modes as f64, v.tail_bound, v.h]);
        }
        t
    }
}
