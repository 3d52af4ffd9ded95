//! Direct versus homogenized scattering as `η → 0`.
//!
//! For each `η` and seed the rod assembly filling the disk `|x| < R` is
//! solved directly and compared with the homogenized disk in three ways:
//! far-field `L²` gap, ball averages of radius `√η` at interior probes
//! against the same averages of `μ u`, and the scattered field on the circle
//! `|x| = 2R`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::farfield::{FarField, DEFAULT_ANGLES};
use super::foldy_lax::{solve_foldy_lax, truncation_heuristic, FoldyLaxSolution, RodScatteringProblem, MAX_UNKNOWNS};
use super::homogenized::{solve_homogenized_disk, HomogenizedDiskProblem, HomogenizedSolution};
use super::PlaneWave;
use crate::error::{Error, Result};
use crate::law::{RodLaw, Scheme};
use crate::microstructure::{sample_microstructure, Obstacle};
use crate::permeability::{lambda_second_moment, mu_eff_series, SeriesControl};
use crate::quadrature::GaussLegendre;
use crate::spectrum::SpectrumTable;

/// Inputs of a convergence study. `eps_eff` and `mu` come from the cell and
/// permeability modules.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub law: RodLaw,
    pub k0: f64,
    pub radius: f64,
    pub etas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub probes: Vec<[f64; 2]>,
    pub eps_eff: f64,
    pub mu: Complex64,
    #[serde(default = "default_incident")]
    pub incident: PlaneWave,
    /// Per-rod harmonic order; the wave-zone heuristic when absent.
    #[serde(default)]
    pub rod_order: Option<usize>,
    #[serde(default = "default_angles")]
    pub n_angles: usize,
    /// Radial and angular nodes of the ball-average rule.
    #[serde(default = "default_ball")]
    pub ball_nodes: [usize; 2],
    #[serde(default = "default_exterior")]
    pub exterior_nodes: usize,
    #[serde(default = "default_cap")]
    pub max_unknowns: usize,
    /// Also compare `∫_Ω |u_η|²` with both candidate limits.
    #[serde(default)]
    pub norm_identity: bool,
}

fn default_incident() -> PlaneWave {
    PlaneWave::from_angle(0.0)
}
fn default_angles() -> usize {
    DEFAULT_ANGLES
}
fn default_ball() -> [usize; 2] {
    [32, 64]
}
fn default_exterior() -> usize {
    32
}
fn default_cap() -> usize {
    MAX_UNKNOWNS
}

impl StudyConfig {
    pub fn new(law: RodLaw, k0: f64, radius: f64, eps_eff: f64, mu: Complex64) -> Self {
        Self {
            law,
            k0,
            radius,
            etas: vec![0.25, 0.125, 0.0625],
            seeds: vec![1],
            probes: vec![[0.0, 0.0]],
            eps_eff,
            mu,
            incident: default_incident(),
            rod_order: None,
            n_angles: DEFAULT_ANGLES,
            ball_nodes: default_ball(),
            exterior_nodes: default_exterior(),
            max_unknowns: MAX_UNKNOWNS,
            norm_identity: false,
        }
    }
}

/// One direct solve compared with the homogenized solution.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub eta: f64,
    pub seed: u64,
    pub n_rods: usize,
    pub farfield_L2_gap: f64,
    pub interior_gap: f64,
    pub exterior_gap: f64,
}

/// Solver health for one record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub eta: f64,
    pub seed: u64,
    pub rod_order: usize,
    pub unknowns: usize,
    pub residual: f64,
    pub optical_theorem_gap: f64,
    pub absorption: f64,
}

/// Largest pairwise far-field distance between seeds at one `η`, relative
/// to `‖f_hom‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedSpread {
    pub eta: f64,
    pub spread: f64,
}

/// `∫_Ω |u_η|²` against `E|Λ|² ∫_Ω |u|²` and `E|Λ|² ∫_Ω |μ u|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormIdentityRecord {
    pub eta: f64,
    pub seed: u64,
    pub direct: f64,
    pub candidate_u: f64,
    pub candidate_bu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyReport {
    pub k0: f64,
    pub radius: f64,
    pub eps_eff: f64,
    pub mu: Complex64,
    pub homogenized_interface_residual: f64,
    pub records: Vec<StudyRecord>,
    pub seed_spread: Vec<SeedSpread>,
    pub diagnostics: Vec<SolveDiagnostics>,
    /// `E|Λ|²` at `k0`, when the norm identity was requested.
    pub lambda_second_moment: Option<f64>,
    pub norm_identity: Vec<NormIdentityRecord>,
}

impl StudyReport {
    /// Records averaged over seeds, in the order of `etas`.
    pub fn mean_by_eta(&self) -> Vec<StudyRecord> {
        let mut out: Vec<StudyRecord> = Vec::new();
        for r in &self.records {
            if out.iter().any(|o| o.eta == r.eta) {
                continue;
            }
            let same: Vec<&StudyRecord> = self.records.iter().filter(|o| o.eta == r.eta).collect();
            let n = same.len() as f64;
            out.push(StudyRecord {
                eta: r.eta,
                seed: r.seed,
                n_rods: r.n_rods,
                farfield_L2_gap: same.iter().map(|o| o.farfield_L2_gap).sum::<f64>() / n,
                interior_gap: same.iter().map(|o| o.interior_gap).sum::<f64>() / n,
                exterior_gap: same.iter().map(|o| o.exterior_gap).sum::<f64>() / n,
            });
        }
        out
    }
}

/// Average of `f` over the disk of radius `a` about `c`: Gauss–Legendre in
/// `r` (weight `r dr`) and the trapezoidal rule in angle.
fn ball_average<F>(f: F, c: [f64; 2], a: f64, nodes: [usize; 2]) -> Result<Complex64>
where
    F: Fn([f64; 2]) -> Result<Complex64> + Sync,
{
    let gl = GaussLegendre::new(nodes[0]);
    let pts: Vec<(f64, f64)> = gl.on(0.0, a).collect();
    let nphi = nodes[1];
    let dphi = 2.0 * std::f64::consts::PI / nphi as f64;
    let rows = pts
        .par_iter()
        .map(|&(r, w)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..nphi {
                let t = (j as f64 + 0.5) * dphi;
                acc += f([c[0] + r * t.cos(), c[1] + r * t.sin()])?;
            }
            Ok(acc * w * r * dphi)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().sum::<Complex64>() / (std::f64::consts::PI * a * a))
}

/// `∫_Ω |u_η|²` for the disk `|x| < radius`: a midpoint grid of spacing
/// `η/8` outside the rods plus the exact interior integrals.
fn direct_energy(sol: &FoldyLaxSolution, radius: f64, eta: f64) -> Result<f64> {
    let h = eta / 8.0;
    let n = (2.0 * radius / h).ceil() as usize;
    let h = 2.0 * radius / n as f64;
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let y = -radius + (i as f64 + 0.5) * h;
            let mut acc = 0.0;
            for j in 0..n {
                let x = [-radius + (j as f64 + 0.5) * h, y];
                if x[0].hypot(x[1]) >= radius || sol.rod_containing(x).is_some() {
                    continue;
                }
                acc += sol.multipoles.exterior_field(x)?.norm_sqr();
            }
            Ok(acc * h * h)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut total: f64 = rows.iter().sum();
    for p in 0..sol.matchings.len() {
        total += sol.rod_energy(p, 24)?;
    }
    Ok(total)
}

/// `∫_Ω |u|²` for the homogenized field by polar Gauss quadrature.
fn homogenized_energy(hom: &HomogenizedSolution, radius: f64) -> Result<f64> {
    let gl = GaussLegendre::new(64);
    let nphi = 128;
    let dphi = 2.0 * std::f64::consts::PI / nphi as f64;
    let mut acc = 0.0;
    for (r, w) in gl.on(0.0, radius) {
        for j in 0..nphi {
            let t = j as f64 * dphi;
            acc += w * r * dphi * hom.field([r * t.cos(), r * t.sin()])?.norm_sqr();
        }
    }
    Ok(acc)
}

fn exterior_nodes(radius: f64, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            [2.0 * radius * t.cos(), 2.0 * radius * t.sin()]
        })
        .collect()
}

struct Reference {
    far: FarField,
    balls: Vec<Vec<Complex64>>,
    exterior: Vec<Complex64>,
}

fn compare(
    cfg: &StudyConfig,
    eta: f64,
    seed: u64,
    sol: &FoldyLaxSolution,
    far: &FarField,
    reference: &Reference,
    eta_index: usize,
) -> Result<StudyRecord> {
    let a = eta.sqrt();
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, p) in cfg.probes.iter().enumerate() {
        let direct = ball_average(|x| sol.field(x), *p, a, cfg.ball_nodes)?;
        let limit = reference.balls[eta_index][i];
        num += (direct - limit).norm();
        den += limit.norm();
    }
    let interior_gap = if cfg.probes.is_empty() { f64::NAN } else { num / den };
    let mut ext_num = 0.0f64;
    let mut ext_den = 0.0f64;
    for (x, uh) in exterior_nodes(cfg.radius, cfg.exterior_nodes).iter().zip(&reference.exterior) {
        let ud = sol.multipoles.scattered_field(*x)?;
        ext_num = ext_num.max((ud - uh).norm());
        ext_den = ext_den.max(uh.norm());
    }
    Ok(StudyRecord {
        eta,
        seed,
        n_rods: sol.multipoles.centers.len(),
        farfield_L2_gap: far.relative_gap(&reference.far),
        interior_gap,
        exterior_gap: ext_num / ext_den,
    })
}

/// Run the study over every `(η, seed)` pair.
pub fn convergence_study(cfg: &StudyConfig) -> Result<StudyReport> {
    if cfg.etas.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::InvalidInput("study needs at least one eta and one seed".into()));
    }
    let hom_problem = HomogenizedDiskProblem::new(cfg.radius, cfg.eps_eff, cfg.mu, cfg.k0, cfg.incident);
    let hom = solve_homogenized_disk(&hom_problem)?;
    let mu = cfg.mu;
    let balls = cfg
        .etas
        .iter()
        .map(|&eta| {
            cfg.probes
                .iter()
                .map(|p| Ok(mu * ball_average(|x| hom.field(x), *p, eta.sqrt(), cfg.ball_nodes)?))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let exterior = exterior_nodes(cfg.radius, cfg.exterior_nodes)
        .iter()
        .map(|x| hom.multipoles.scattered_field(*x))
        .collect::<Result<Vec<_>>>()?;
    let reference = Reference { far: FarField::from_multipoles(&hom.multipoles, cfg.n_angles), balls, exterior };

    let (lambda2, hom_energy) = if cfg.norm_identity {
        let m2 = lambda_second_moment(&cfg.law, cfg.k0, &Scheme::Gauss { order: 16 })?.value.re;
        (Some(m2), homogenized_energy(&hom, cfg.radius)?)
    } else {
        (None, 0.0)
    };
    let mut norm_identity = Vec::new();

    let obstacle = Obstacle::Disk { center: [0.0, 0.0], radius: cfg.radius };
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    let mut seed_spread = Vec::new();
    for (ei, &eta) in cfg.etas.iter().enumerate() {
        let mut fars: Vec<FarField> = Vec::new();
        for &seed in &cfg.seeds {
            let rods = sample_microstructure(&cfg.law, eta, &obstacle, seed);
            let order = cfg.rod_order.unwrap_or_else(|| {
                rods.rods
                    .iter()
                    .map(|r| truncation_heuristic(cfg.k0, eta, r.triple.rho, r.eps))
                    .max()
                    .unwrap_or(4)
            });
            let mut problem = RodScatteringProblem::new(rods, cfg.k0, cfg.incident, order);
            problem.max_unknowns = cfg.max_unknowns;
            let unknowns = problem.unknowns();
            let sol = solve_foldy_lax(&problem)?;
            let far = FarField::from_multipoles(&sol.multipoles, cfg.n_angles);
            records.push(compare(cfg, eta, seed, &sol, &far, &reference, ei)?);
            diagnostics.push(SolveDiagnostics {
                eta,
                seed,
                rod_order: order,
                unknowns,
                residual: sol.residual,
                optical_theorem_gap: far.optical_theorem_gap(),
                absorption: far.absorption,
            });
            if let Some(m2) = lambda2 {
                norm_identity.push(NormIdentityRecord {
                    eta,
                    seed,
                    direct: direct_energy(&sol, cfg.radius, eta)?,
                    candidate_u: m2 * hom_energy,
                    candidate_bu: m2 * cfg.mu.norm_sqr() * hom_energy,
                });
            }
            fars.push(far);
        }
        if fars.len() > 1 {
            let norm = reference.far.l2_norm();
            let mut spread = 0.0f64;
            for i in 0..fars.len() {
                for j in i + 1..fars.len() {
                    spread = spread.max(fars[i].relative_gap(&fars[j]) * fars[j].l2_norm() / norm);
                }
            }
            seed_spread.push(SeedSpread { eta, spread });
        }
    }
    Ok(StudyReport {
        k0: cfg.k0,
        radius: cfg.radius,
        eps_eff: cfg.eps_eff,
        mu: cfg.mu,
        homogenized_interface_residual: hom.interface_residual,
        records,
        seed_spread,
        diagnostics,
        lambda_second_moment: lambda2,
        norm_identity,
    })
}

/// Distance from `k0² ε ρ²` to `{λ_n}` over the bounding box of the law's
/// support, and `μ_eff` there; picks the `k0` with the largest distance
/// among those with `|Re μ_eff| ≤ max_abs_re_mu`.
pub fn select_off_resonant_k0(
    law: &RodLaw,
    k0s: &[f64],
    max_abs_re_mu: f64,
    ctrl: &SeriesControl,
    table: &SpectrumTable,
) -> Result<(f64, Complex64)> {
    let (rlo, rhi) = law.radius().support();
    let (elo, ehi) = law.permittivity().re.support();
    let (ilo, ihi) = law.permittivity().im.support();
    let mut best: Option<(f64, f64, Complex64)> = None;
    for &k0 in k0s {
        let s = k0 * k0;
        let box_re = (elo * rlo * rlo * s, ehi * rhi * rhi * s);
        let box_im = (ilo * rlo * rlo * s, ihi * rhi * rhi * s);
        let dist = table
            .modes()
            .iter()
            .map(|m| {
                let dx = (box_re.0 - m.eigenvalue).max(m.eigenvalue - box_re.1).max(0.0);
                let dy = box_im.0.max(0.0);
                dx.hypot(dy)
            })
            .fold(f64::INFINITY, f64::min);
        let mu = mu_eff_series(k0, law, ctrl, table)?.mu;
        if mu.re.abs() > max_abs_re_mu {
            continue;
        }
        if best.map_or(true, |(_, d, _)| dist > d) {
            best = Some((k0, dist, mu));
        }
    }
    best.map(|(k, _, mu)| (k, mu))
        .ok_or_else(|| Error::InvalidInput(format!("no k0 in the grid keeps |Re mu| <= {max_abs_re_mu}")))
}
