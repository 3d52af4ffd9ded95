//! Effective permeability of the rod medium.
//!
//! For a law `p` on `(θ, ρ, ε)`,
//!
//! ```text
//! μ_eff(k0) = 1 + Σ_n c_n² E[ερ⁴k0² / (λ_n − ερ²k0²)]
//!           = 1 − πE[ρ²] + E[2πρ J_1(k0√ε ρ) / (k0√ε J_0(k0√ε ρ))].
//! ```
//!
//! The first form is the modal series, the second the Bessel closed form it
//! sums to. Both only see the `(ρ, ε)` marginal of the law.

pub mod limit;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::law::{RodLaw, RodTriple, Scheme};
use crate::quadrature::GaussLegendre;
use crate::rng::stream_rng;
use crate::spectrum::{resonator_closed, resonator_energy, resonator_mean, resonator_series, ResonatorParams, SpectrumTable};

/// Truncation and conditioning controls for modal sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeriesControl {
    pub max_modes: usize,
    pub tail_tol: f64,
    /// Minimum allowed `dist(ερ²k0², σ_0)` for lossless triples.
    pub guard_dist: f64,
    /// Gauss points per density panel in law expectations.
    pub quad_order: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self { max_modes: 20_000, tail_tol: 1e-8, guard_dist: 0.0, quad_order: 64 }
    }
}

/// Upper bound on `Σ_{n>N} 1/λ_n²`, from `j_{0,n} > (n − 1/4)π`.
fn inverse_square_tail(n: usize) -> f64 {
    let m = n as f64 - 0.25;
    1.0 / (3.0 * PI.powi(4) * m.powi(3))
}

/// Smallest `N` whose analytic tail majorant is below `ctrl.tail_tol`.
///
/// `sup_alpha_rho2` bounds `|ε|ρ²k0²` and `sup_weight` bounds `|ε|ρ⁴k0²` over
/// the support. Once `λ_n ≥ 2|ερ²k0²|` every term is at most
/// `2 · 4π/λ_n · |ε|ρ⁴k0²/λ_n`. Returns `(N, tail_bound)`.
pub fn truncation_index(sup_alpha_rho2: f64, sup_weight: f64, ctrl: &SeriesControl) -> Result<(usize, f64)> {
    let bound = |n: usize| 8.0 * PI * sup_weight * inverse_square_tail(n);
    let lower_eig = |n: usize| ((n as f64 - 0.25) * PI).powi(2);
    let mut n = 1usize;
    while bound(n) > ctrl.tail_tol || lower_eig(n + 1) < 2.0 * sup_alpha_rho2 {
        n = if n < 64 { n + 1 } else { n + n / 8 };
        if n > ctrl.max_modes {
            return Err(Error::NoConvergence(format!(
                "modal truncation needs more than max_modes = {} terms",
                ctrl.max_modes
            )));
        }
    }
    // refine downward to the smallest admissible index
    let mut lo = n / 2;
    let mut hi = n;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if bound(mid) <= ctrl.tail_tol && lower_eig(mid + 1) >= 2.0 * sup_alpha_rho2 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((hi, bound(hi)))
}

/// Table size covering every truncation up to `max_modes`.
pub fn table_for(law: &RodLaw, k0_max: f64, ctrl: &SeriesControl) -> Result<SpectrumTable> {
    let (n, _) = law_truncation(law, k0_max, ctrl)?;
    SpectrumTable::new(n + 2)
}

fn law_truncation(law: &RodLaw, k0: f64, ctrl: &SeriesControl) -> Result<(usize, f64)> {
    let (_, rhi) = law.radius().support();
    let a = law.sup_eps_rho2() * k0 * k0;
    truncation_index(a, a * rhi * rhi, ctrl)
}

/// `μ_eff` with its truncation metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuValue {
    pub mu: Complex64,
    pub n_modes: usize,
    pub tail_bound: f64,
    /// Quadrature error estimate of the law expectation.
    pub quad_error: f64,
}

fn check_resonance(rho: f64, eps: Complex64, k0: f64, table: &SpectrumTable, guard: f64) -> Result<()> {
    let s = eps * rho * rho * k0 * k0;
    let d = table.dist_to_spectrum(s);
    if d <= 1e-13 * table.eigenvalue(1) {
        return Err(Error::ResonanceSingularity(format!("ερ²k0² = {s} is an eigenvalue")));
    }
    if eps.im == 0.0 && d < guard {
        return Err(Error::ResonanceProximity { dist: d, guard });
    }
    Ok(())
}

/// `Σ_{n≤N} c_n² ερ⁴k0²/(λ_n − ερ²k0²)` for one `(ρ, ε)`.
pub fn modal_sum(rho: f64, eps: Complex64, k0: f64, table: &SpectrumTable, n: usize) -> Complex64 {
    let s = eps * rho * rho * k0 * k0;
    let w = s * rho * rho;
    table.modes()[..n]
        .iter()
        .map(|m| m.coupling * m.coupling * w / (m.eigenvalue - s))
        .sum()
}

/// Modal series for `μ_eff(k0)` with adaptive truncation.
pub fn mu_eff_series(k0: f64, law: &RodLaw, ctrl: &SeriesControl, table: &SpectrumTable) -> Result<MuValue> {
    let (n, tail_bound) = law_truncation(law, k0, ctrl)?;
    if n > table.len() {
        return Err(Error::TableTooSmall { have: table.len(), need: n });
    }
    let est = law.marginal_expectation(
        |rho, eps| {
            check_resonance(rho, eps, k0, table, ctrl.guard_dist)?;
            Ok(modal_sum(rho, eps, k0, table, n))
        },
        &Scheme::Gauss { order: ctrl.quad_order },
    )?;
    Ok(MuValue { mu: 1.0 + est.value, n_modes: n, tail_bound, quad_error: est.error })
}

/// Closed form `1 − πE[ρ²] + E[∫_{B_ρ} w]` with Gauss order 64.
pub fn mu_eff_closed(k0: f64, law: &RodLaw) -> Result<Complex64> {
    Ok(mu_eff_closed_with(k0, law, 64)?.value)
}

/// Closed form with an explicit quadrature order.
pub fn mu_eff_closed_with(k0: f64, law: &RodLaw, order: usize) -> Result<crate::law::Estimate> {
    let est = law.marginal_expectation(
        |rho, eps| {
            let mean = resonator_mean(ResonatorParams::new(eps * k0 * k0, rho))?;
            Ok(1.0 - PI * rho * rho + mean)
        },
        &Scheme::Gauss { order },
    )?;
    Ok(est)
}

/// `Λ(y)` for a single triple: 1 outside the rod, the resonator field inside.
pub fn lambda_sample(triple: &RodTriple, y: [f64; 2], k0: f64) -> Result<Complex64> {
    let r = ((y[0] - triple.center[0]).powi(2) + (y[1] - triple.center[1]).powi(2)).sqrt();
    if r >= triple.rho {
        return Ok(Complex64::new(1.0, 0.0));
    }
    resonator_closed(r, ResonatorParams::new(triple.eps * k0 * k0, triple.rho))
}

/// Modal-series variant of [`lambda_sample`] truncated at `n` modes.
pub fn lambda_sample_series(triple: &RodTriple, y: [f64; 2], k0: f64, table: &SpectrumTable, n: usize) -> Result<Complex64> {
    let r = ((y[0] - triple.center[0]).powi(2) + (y[1] - triple.center[1]).powi(2)).sqrt();
    if r >= triple.rho {
        return Ok(Complex64::new(1.0, 0.0));
    }
    resonator_series(r, ResonatorParams::new(triple.eps * k0 * k0, triple.rho), table, n)
}

/// `∫_Y Λ(y) dy` for one triple, by polar quadrature of [`lambda_sample`]
/// over the rod plus the exterior area.
pub fn lambda_cell_mean(triple: &RodTriple, k0: f64, order: usize) -> Result<Complex64> {
    let rule = GaussLegendre::new(order);
    let n_phi = 2 * order;
    let mut inside = Complex64::new(0.0, 0.0);
    for (r, wr) in rule.on(0.0, triple.rho) {
        for k in 0..n_phi {
            let phi = 2.0 * PI * k as f64 / n_phi as f64;
            let y = [triple.center[0] + r * phi.cos(), triple.center[1] + r * phi.sin()];
            inside += wr * r * (2.0 * PI / n_phi as f64) * lambda_sample(triple, y, k0)?;
        }
    }
    Ok(1.0 - PI * triple.rho * triple.rho + inside)
}

/// `E|Λ|² = E[(1 − πρ²) + 2π∫_0^ρ |w(r)|² r dr]`.
///
/// With a Monte Carlo scheme the estimate instead samples `(θ, ρ, ε)` and a
/// uniform `y ∈ Y` and averages `|Λ(y)|²`.
pub fn lambda_second_moment(law: &RodLaw, k0: f64, scheme: &Scheme) -> Result<crate::law::Estimate> {
    match *scheme {
        Scheme::Gauss { .. } => law.marginal_expectation(
            |rho, eps| {
                let e = resonator_energy(ResonatorParams::new(eps * k0 * k0, rho))?;
                Ok(Complex64::new(1.0 - PI * rho * rho + e, 0.0))
            },
            scheme,
        ),
        Scheme::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidInput("Monte Carlo needs at least two samples".into()));
            }
            let mut rng = stream_rng(seed, 0);
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for k in 0..samples {
                let t = law.sample(&mut rng);
                let y = [rand::Rng::random::<f64>(&mut rng), rand::Rng::random::<f64>(&mut rng)];
                let v = lambda_sample(&t, y, k0)?.norm_sqr();
                let d = v - mean;
                mean += d / (k + 1) as f64;
                m2 += d * (v - mean);
            }
            let var = m2 / (samples - 1) as f64;
            Ok(crate::law::Estimate { value: Complex64::new(mean, 0.0), error: (var / samples as f64).sqrt() })
        }
    }
}

/// Internal resonant wavenumbers `ν_n = sqrt(Re(λ_n/(ερ²)))`, evaluated at
/// the point masses of the law or, for spread components, at the midpoint of
/// their support.
pub fn resonant_wavenumbers(law: &RodLaw, table: &SpectrumTable, n: usize) -> Result<Vec<f64>> {
    if n > table.len() {
        return Err(Error::TableTooSmall { have: table.len(), need: n });
    }
    let mid = |c: &crate::law::ComponentLaw| {
        let (lo, hi) = c.support();
        0.5 * (lo + hi)
    };
    let rho = mid(law.radius());
    if rho <= 0.0 {
        return Err(Error::InvalidInput("resonant wavenumbers need a positive radius".into()));
    }
    let eps = Complex64::new(mid(&law.permittivity().re), mid(&law.permittivity().im));
    Ok(table.modes()[..n]
        .iter()
        .map(|m| (m.eigenvalue / (eps * rho * rho)).re.sqrt())
        .collect())
}

/// SHA-256 of the canonical JSON form of a law, in hex.
pub fn law_digest(law: &RodLaw) -> String {
    let json = serde_json::to_vec(law).expect("law serializes");
    hex(&Sha256::digest(json))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// One sample of a dispersion curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionPoint {
    pub k0: f64,
    pub lambda: f64,
    pub mu: Complex64,
    pub n_modes: usize,
    pub tail_bound: f64,
}

/// `k0 ↦ μ_eff(k0)` sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionCurve {
    pub points: Vec<DispersionPoint>,
    pub law_digest: String,
    pub control: SeriesControl,
}

impl DispersionCurve {
    /// Evaluate the modal series at every `k0`. With `nan_on_failure`, points
    /// where the evaluation fails (on or too near a resonance) are recorded
    /// as NaN instead of aborting the sweep.
    pub fn sweep(
        law: &RodLaw,
        k0s: &[f64],
        ctrl: &SeriesControl,
        table: &SpectrumTable,
        nan_on_failure: bool,
    ) -> Result<Self> {
        let points = k0s
            .par_iter()
            .map(|&k0| match mu_eff_series(k0, law, ctrl, table) {
                Ok(v) => Ok(DispersionPoint {
                    k0,
                    lambda: 2.0 * PI / k0,
                    mu: v.mu,
                    n_modes: v.n_modes,
                    tail_bound: v.tail_bound,
                }),
                Err(e @ (Error::ResonanceSingularity(_) | Error::ResonanceProximity { .. })) => {
                    if nan_on_failure {
                        Ok(DispersionPoint {
                            k0,
                            lambda: 2.0 * PI / k0,
                            mu: Complex64::new(f64::NAN, f64::NAN),
                            n_modes: 0,
                            tail_bound: f64::NAN,
                        })
                    } else {
                        Err(e)
                    }
                }
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points, law_digest: law_digest(law), control: *ctrl })
    }

    /// CSV `k0,lambda,re_mu,im_mu,n_modes,tail_bound`.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["k0", "lambda", "re_mu", "im_mu", "n_modes", "tail_bound"]);
        for p in &self.points {
            t.push(vec![p.k0, p.lambda, p.mu.re, p.mu.im, p.n_modes as f64, p.tail_bound]);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::{make_rod_law, CenterLaw, ComponentLaw, PermittivityLaw};

    fn eps0() -> Complex64 {
        Complex64::new(100.0, 5.0)
    }

    #[test]
    fn truncation_meets_tolerance() {
        let ctrl = SeriesControl::default();
        let (n, b) = truncation_index(14.0, 2.0, &ctrl).unwrap();
        assert!(b <= ctrl.tail_tol);
        assert!(8.0 * PI * 2.0 * inverse_square_tail(n - 1) > ctrl.tail_tol);
        let tiny = SeriesControl { max_modes: 10, ..ctrl };
        assert!(truncation_index(14.0, 2.0, &tiny).is_err());
    }

    #[test]
    fn small_k0_gives_one() {
        let law = RodLaw::dirac(0.375, eps0(), 0.1).unwrap();
        let t = SpectrumTable::new(50).unwrap();
        let v = mu_eff_series(1e-6, &law, &SeriesControl::default(), &t).unwrap();
        assert!((v.mu - 1.0).norm() < 1e-9);
        assert!((mu_eff_closed(1e-6, &law).unwrap() - 1.0).norm() < 1e-9);
    }

    #[test]
    fn zero_radius_gives_exactly_one() {
        let law = RodLaw::dirac(0.0, eps0(), 0.1).unwrap();
        let t = SpectrumTable::new(50).unwrap();
        assert_eq!(mu_eff_series(0.7, &law, &SeriesControl::default(), &t).unwrap().mu, Complex64::new(1.0, 0.0));
        assert_eq!(mu_eff_closed(0.7, &law).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn series_matches_closed_form_for_dirac_law() {
        let law = RodLaw::dirac(0.375, eps0(), 0.1).unwrap();
        let ctrl = SeriesControl::default();
        let t = table_for(&law, 1.1, &ctrl).unwrap();
        for k0 in [0.3, 0.5, 0.64, 0.8, 1.05] {
            let s = mu_eff_series(k0, &law, &ctrl, &t).unwrap();
            let c = mu_eff_closed(k0, &law).unwrap();
            assert!((s.mu - c).norm() < 1e-6, "k0={k0}: {} vs {c}", s.mu);
        }
    }

    #[test]
    fn closed_form_is_real_below_first_resonance() {
        let law = RodLaw::dirac(0.375, Complex64::new(100.0, 0.0), 0.1).unwrap();
        let v = mu_eff_closed(0.5, &law).unwrap();
        assert_eq!(v.im, 0.0);
        assert!(v.re > 1.0);
    }

    #[test]
    fn on_resonance_is_an_error() {
        let t = SpectrumTable::new(200).unwrap();
        let eps = Complex64::new(100.0, 0.0);
        let rho = 0.375;
        let k0 = (t.eigenvalue(1) / (eps.re * rho * rho)).sqrt();
        let law = RodLaw::dirac(rho, eps, 0.1).unwrap();
        let ctrl = SeriesControl::default();
        // k0 is only accurate to rounding, so either the exact test or the guard fires
        let guarded = SeriesControl { guard_dist: 1e-6, ..ctrl };
        let r = mu_eff_series(k0, &law, &guarded, &t);
        assert!(matches!(r, Err(Error::ResonanceSingularity(_)) | Err(Error::ResonanceProximity { .. })));
    }

    #[test]
    fn resonant_wavenumber_example() {
        let law = RodLaw::dirac(0.375, Complex64::new(100.0, 0.0), 0.1).unwrap();
        let t = SpectrumTable::new(3).unwrap();
        let nu = resonant_wavenumbers(&law, &t, 3).unwrap();
        assert!((nu[0] - 0.6412).abs() < 1e-3);
        assert!((2.0 * PI / nu[0] - 9.80).abs() < 5e-3);
        assert!(nu.windows(2).all(|w| w[1] > w[0]));
        let zero = RodLaw::dirac(0.0, Complex64::new(100.0, 0.0), 0.1).unwrap();
        assert!(resonant_wavenumbers(&zero, &t, 1).is_err());
    }

    #[test]
    fn lambda_sample_branches() {
        let t = RodTriple { center: [0.5, 0.5], rho: 0.375, eps: eps0() };
        assert_eq!(lambda_sample(&t, [0.95, 0.5], 0.6).unwrap(), Complex64::new(1.0, 0.0));
        let v = lambda_sample(&t, [0.6, 0.5], 0.0).unwrap();
        assert!((v - 1.0).norm() < 1e-15);
    }

    #[test]
    fn cell_mean_identity() {
        let t = RodTriple { center: [0.45, 0.52], rho: 0.375, eps: eps0() };
        for k0 in [0.3, 0.64, 0.9] {
            let direct = lambda_cell_mean(&t, k0, 40).unwrap();
            let closed = 1.0 - PI * t.rho * t.rho + resonator_mean(ResonatorParams::new(t.eps * k0 * k0, t.rho)).unwrap();
            assert!((direct - closed).norm() < 1e-6, "{direct} vs {closed}");
        }
    }

    #[test]
    fn dispersion_csv_columns() {
        let law = RodLaw::dirac(0.375, eps0(), 0.1).unwrap();
        let ctrl = SeriesControl::default();
        let t = table_for(&law, 1.0, &ctrl).unwrap();
        let c = DispersionCurve::sweep(&law, &[0.4, 0.6, 1.0], &ctrl, &t, false).unwrap();
        let csv = c.to_csv();
        assert_eq!(csv.header, ["k0", "lambda", "re_mu", "im_mu", "n_modes", "tail_bound"]);
        assert_eq!(csv.rows.len(), 3);
        assert_eq!(c.law_digest.len(), 64);
    }

    #[test]
    fn random_radius_law_series_matches_closed() {
        let law = make_rod_law(
            CenterLaw::fixed(0.5, 0.5),
            ComponentLaw::uniform(0.3, 0.45),
            PermittivityLaw::fixed(eps0()),
            0.05,
        )
        .unwrap();
        let ctrl = SeriesControl { quad_order: 32, ..SeriesControl::default() };
        let t = table_for(&law, 0.9, &ctrl).unwrap();
        let s = mu_eff_series(0.6, &law, &ctrl, &t).unwrap();
        let c = mu_eff_closed_with(0.6, &law, 32).unwrap();
        assert!((s.mu - c.value).norm() < 1e-6);
    }
}
