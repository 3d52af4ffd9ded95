//! Effective permittivity from the perforated cell problem.
//!
//! `ε_eff z·z` is the least mean energy `∫|σ|²` over periodic solenoidal
//! fields `σ` with mean `z` that vanish on the rods. In two dimensions
//! `σ = ∇^⊥ψ = (∂₂ψ, −∂₁ψ)`, where `ψ − a·x` is periodic with `a = (−z₂, z₁)`
//! and `ψ` is constant on each rod. The problem becomes a scalar
//! minimization of `∫|∇ψ|²`, solved here on a cell-centered grid with the
//! five-point stencil: nodes inside a rod are merged into one unknown, and
//! the quasi-periodic jump of `ψ` is carried by the wrap-around edges.

mod cg;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::{filling_ratio, RodLaw};
use crate::rng::{cell_stream, derive_seed, stream_rng};

/// Relative residual of the linear solves.
pub const CG_TOL: f64 = 1e-10;

/// An inclusion in the (super)cell, in unit-cell lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hole {
    Disk { center: [f64; 2], radius: f64 },
    /// Axis-aligned square `|y − center|_∞ < half_width`.
    Square { center: [f64; 2], half_width: f64 },
}

impl Hole {
    fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Hole::Disk { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                dx * dx + dy * dy < radius * radius
            }
            Hole::Square { center, half_width } => {
                (p[0] - center[0]).abs() < half_width && (p[1] - center[1]).abs() < half_width
            }
        }
    }

    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let (c, r) = match *self {
            Hole::Disk { center, radius } => (center, radius),
            Hole::Square { center, half_width } => (center, half_width),
        };
        ([c[0] - r, c[1] - r], [c[0] + r, c[1] + r])
    }
}

/// Discrete cell problem on an `n × n` supercell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellProblem {
    pub holes: Vec<Hole>,
    pub supercell_n: usize,
    /// Grid points per unit-cell edge.
    pub resolution: usize,
    /// Mean field `z`.
    pub direction: [f64; 2],
}

/// Discrete minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    /// Grid side `N = supercell_n · resolution`.
    pub side: usize,
    /// `ψ` at the nodes `((i + ½)h, (j + ½)h)`, row-major in `j`.
    pub psi: Vec<f64>,
    /// `σ = (∂₂ψ, −∂₁ψ)` at the nodes by centered differences.
    pub sigma: Vec<[f64; 2]>,
    /// Mean energy, the discrete `ε_eff z·z`.
    pub energy: f64,
    pub iterations: usize,
}

/// Grid topology shared by the solves for different directions.
struct Assembly {
    side: usize,
    /// Unknown index of every node.
    unknown: Vec<u32>,
    laplacian: cg::EdgeLaplacian,
    /// `(edge index into laplacian.edges, axis)` for wrap-around edges.
    wraps: Vec<(usize, usize)>,
    /// For each node, the edge index to its +x and +y neighbour, if the edge
    /// is kept (not interior to a hole).
    edge_of: Vec<[Option<u32>; 2]>,
}

impl CellProblem {
    fn validate(&self) -> Result<()> {
        if self.resolution < 16 {
            return Err(Error::InvalidInput(format!("resolution {} is below 16", self.resolution)));
        }
        if self.supercell_n == 0 {
            return Err(Error::InvalidInput("supercell_n must be positive".into()));
        }
        let mut owner = std::collections::HashSet::new();
        for h in &self.holes {
            let (lo, hi) = h.bounds();
            let cx = lo[0].floor();
            let cy = lo[1].floor();
            if hi[0] > cx + 1.0 || hi[1] > cy + 1.0 || lo[0] <= cx || lo[1] <= cy {
                return Err(Error::InvalidInput("every hole must lie strictly inside one unit cell".into()));
            }
            let n = self.supercell_n as f64;
            if cx < 0.0 || cy < 0.0 || cx >= n || cy >= n {
                return Err(Error::InvalidInput("hole outside the supercell".into()));
            }
            if !owner.insert((cx as i64, cy as i64)) {
                return Err(Error::InvalidInput("at most one hole per unit cell".into()));
            }
        }
        Ok(())
    }

    fn assemble(&self) -> Result<Assembly> {
        self.validate()?;
        let r = self.resolution;
        let side = self.supercell_n * r;
        let h = 1.0 / r as f64;
        let nodes = side * side;
        if nodes >= u32::MAX as usize / 2 {
            return Err(Error::TooLarge { unknowns: nodes, cap: u32::MAX as usize / 2 });
        }
        // hole label per node, searched only within the hole's unit cell
        let mut label = vec![u32::MAX; nodes];
        for (k, hole) in self.holes.iter().enumerate() {
            let (lo, hi) = hole.bounds();
            let i0 = ((lo[0] / h) - 0.5).floor().max(0.0) as usize;
            let j0 = ((lo[1] / h) - 0.5).floor().max(0.0) as usize;
            let i1 = (((hi[0] / h) - 0.5).ceil() as usize).min(side - 1);
            let j1 = (((hi[1] / h) - 0.5).ceil() as usize).min(side - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    if hole.contains([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]) {
                        label[j * side + i] = k as u32;
                    }
                }
            }
        }
        let mut hole_unknown = vec![u32::MAX; self.holes.len()];
        let mut unknown = vec![0u32; nodes];
        let mut count = 0u32;
        for p in 0..nodes {
            let l = label[p];
            if l == u32::MAX {
                unknown[p] = count;
                count += 1;
            } else {
                if hole_unknown[l as usize] == u32::MAX {
                    hole_unknown[l as usize] = count;
                    count += 1;
                }
                unknown[p] = hole_unknown[l as usize];
            }
        }
        let mut edges = Vec::with_capacity(2 * nodes);
        let mut wraps = Vec::new();
        let mut edge_of = vec![[None, None]; nodes];
        for j in 0..side {
            for i in 0..side {
                let p = j * side + i;
                let nbrs = [(j * side + (i + 1) % side, i + 1 == side), (((j + 1) % side) * side + i, j + 1 == side)];
                for (axis, &(q, wrap)) in nbrs.iter().enumerate() {
                    let (up, uq) = (unknown[p], unknown[q]);
                    if up == uq && !wrap {
                        continue;
                    }
                    if up == uq {
                        // a hole spanning the wrap is excluded by validation
                        unreachable!("hole crosses the periodic boundary");
                    }
                    edge_of[p][axis] = Some(edges.len() as u32);
                    if wrap {
                        wraps.push((edges.len(), axis));
                    }
                    edges.push((up, uq));
                }
            }
        }
        Ok(Assembly { side, unknown, laplacian: cg::EdgeLaplacian::new(count as usize, edges), wraps, edge_of })
    }
}

impl Assembly {
    /// Per-edge jump `L a_axis` carried by wrap edges for mean field `z`.
    fn jumps(&self, z: [f64; 2], supercell_n: usize) -> Vec<(usize, f64)> {
        let a = [-z[1], z[0]];
        let l = supercell_n as f64;
        self.wraps.iter().map(|&(e, axis)| (e, l * a[axis])).collect()
    }

    fn solve(&self, z: [f64; 2], supercell_n: usize) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let jumps = self.jumps(z, supercell_n);
        let mut rhs = vec![0.0; self.laplacian.n];
        for &(e, b) in &jumps {
            let (p, q) = self.laplacian.edges[e];
            rhs[q as usize] -= b;
            rhs[p as usize] += b;
        }
        let max_iter = 50 * self.side + 2000;
        let (x, it) = cg::solve(&self.laplacian, &rhs, CG_TOL, max_iter)?;
        let mut diffs: Vec<f64> = self.laplacian.edges.iter().map(|&(p, q)| x[q as usize] - x[p as usize]).collect();
        for &(e, b) in &jumps {
            diffs[e] += b;
        }
        Ok((x, diffs, it))
    }
}

/// Solve the cell problem for `problem.direction`.
pub fn solve_cell_stream(problem: &CellProblem) -> Result<CellSolution> {
    let asm = problem.assemble()?;
    let (x, diffs, iterations) = asm.solve(problem.direction, problem.supercell_n)?;
    let l2 = (problem.supercell_n * problem.supercell_n) as f64;
    let energy = diffs.iter().map(|d| d * d).sum::<f64>() / l2;
    let side = asm.side;
    let h = 1.0 / problem.resolution as f64;
    let a = [-problem.direction[1], problem.direction[0]];
    let psi: Vec<f64> = (0..side * side)
        .map(|p| {
            let (i, j) = (p % side, p / side);
            x[asm.unknown[p] as usize] + a[0] * (i as f64 + 0.5) * h + a[1] * (j as f64 + 0.5) * h
        })
        .collect();
    // centered differences of ψ from the edge differences (jumps included)
    let edge_diff = |p: usize, axis: usize| asm.edge_of[p][axis].map_or(0.0, |e| diffs[e as usize]);
    let sigma = (0..side * side)
        .map(|p| {
            let (i, j) = (p % side, p / side);
            let west = j * side + (i + side - 1) % side;
            let south = ((j + side - 1) % side) * side + i;
            let d1 = 0.5 * (edge_diff(p, 0) + edge_diff(west, 0)) / h;
            let d2 = 0.5 * (edge_diff(p, 1) + edge_diff(south, 1)) / h;
            [d2, -d1]
        })
        .collect();
    Ok(CellSolution { side, psi, sigma, energy, iterations })
}

/// Discrete tensor `ε_ij = (1/L²) Σ_e Δ^i_e Δ^j_e` of one configuration.
fn cell_tensor(holes: Vec<Hole>, supercell_n: usize, resolution: usize) -> Result<[f64; 3]> {
    let problem = CellProblem { holes, supercell_n, resolution, direction: [1.0, 0.0] };
    let asm = problem.assemble()?;
    let (_, d1, _) = asm.solve([1.0, 0.0], supercell_n)?;
    let (_, d2, _) = asm.solve([0.0, 1.0], supercell_n)?;
    let l2 = (supercell_n * supercell_n) as f64;
    let e11 = d1.iter().map(|d| d * d).sum::<f64>() / l2;
    let e22 = d2.iter().map(|d| d * d).sum::<f64>() / l2;
    let e12 = d1.iter().zip(&d2).map(|(a, b)| a * b).sum::<f64>() / l2;
    Ok([e11, e12, e22])
}

/// Supercell settings for random laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RveSpec {
    pub supercell_n: usize,
    pub ensemble_size: usize,
    pub seed: u64,
    /// Largest acceptable ensemble standard error, if any.
    #[serde(default)]
    pub max_stderr: Option<f64>,
}

impl Default for RveSpec {
    fn default() -> Self {
        Self { supercell_n: 4, ensemble_size: 8, seed: 0, max_stderr: None }
    }
}

/// Effective permittivity with its bounds and error metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffTensor {
    pub e11: f64,
    pub e12: f64,
    pub e22: f64,
    /// `1/(1 − πE[ρ²])`.
    pub lower: f64,
    /// `C(δ)`, the square-hole energy.
    pub upper: f64,
    pub resolution: usize,
    pub supercell_n: usize,
    pub ensemble_size: usize,
    /// Largest ensemble standard error over the entries (0 for one cell).
    pub stderr: f64,
    /// `|E_R − E_{R/2}|` on the scalar part.
    pub discretization_error: f64,
}

impl EffTensor {
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.e11, self.e12], [self.e12, self.e22]]
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = 0.5 * (self.e11 + self.e22);
        let d = (0.25 * (self.e11 - self.e22).powi(2) + self.e12 * self.e12).sqrt();
        (m - d, m + d)
    }

    /// Mean of the diagonal, the value used for isotropic laws.
    pub fn scalar(&self) -> f64 {
        0.5 * (self.e11 + self.e22)
    }

    pub fn quadratic_form(&self, z: [f64; 2]) -> f64 {
        self.e11 * z[0] * z[0] + 2.0 * self.e12 * z[0] * z[1] + self.e22 * z[1] * z[1]
    }

    /// Richardson estimate `2E_R − E_{R/2}` of the scalar part under
    /// first-order boundary error.
    pub fn richardson(&self, coarse_scalar: f64) -> f64 {
        2.0 * self.scalar() - coarse_scalar
    }
}

fn dirac_hole(law: &RodLaw) -> Hole {
    Hole::Disk { center: [law.center().x.mean(), law.center().y.mean()], radius: law.radius().mean() }
}

fn sample_holes(law: &RodLaw, n: usize, seed: u64) -> Vec<Hole> {
    let mut out = Vec::with_capacity(n * n);
    for cj in 0..n {
        for ci in 0..n {
            let mut rng = stream_rng(seed, cell_stream(ci as i64, cj as i64));
            let t = law.sample(&mut rng);
            if t.rho > 0.0 {
                out.push(Hole::Disk { center: [ci as f64 + t.center[0], cj as f64 + t.center[1]], radius: t.rho });
            }
        }
    }
    out
}

/// `ε_eff` for a law.
///
/// A point-mass radius needs one periodic cell; other laws are averaged over
/// `rve.ensemble_size` sampled supercells in parallel. The discretization
/// error compares the scalar part at `resolution` and `resolution / 2`.
pub fn eps_eff_tensor(law: &RodLaw, resolution: usize, rve: &RveSpec) -> Result<EffTensor> {
    let (lower, upper) = eps_bounds(law, law.delta(), resolution)?;
    if law.radius().is_dirac() {
        let hole = dirac_hole(law);
        let holes: Vec<Hole> = if law.radius().mean() > 0.0 { vec![hole] } else { vec![] };
        let [e11, e12, e22] = cell_tensor(holes.clone(), 1, resolution)?;
        let disc = if resolution / 2 >= 16 {
            let [c11, _, c22] = cell_tensor(holes, 1, resolution / 2)?;
            (0.5 * (e11 + e22) - 0.5 * (c11 + c22)).abs()
        } else {
            f64::NAN
        };
        return Ok(EffTensor {
            e11,
            e12,
            e22,
            lower,
            upper,
            resolution,
            supercell_n: 1,
            ensemble_size: 1,
            stderr: 0.0,
            discretization_error: disc,
        });
    }
    if rve.ensemble_size < 2 {
        return Err(Error::InvalidInput("a random radius needs an ensemble of at least two supercells".into()));
    }
    let n = rve.supercell_n;
    let members = (0..rve.ensemble_size)
        .into_par_iter()
        .map(|m| {
            let holes = sample_holes(law, n, derive_seed(rve.seed, m as u64));
            let fine = cell_tensor(holes.clone(), n, resolution)?;
            let coarse = if resolution / 2 >= 16 { Some(cell_tensor(holes, n, resolution / 2)?) } else { None };
            Ok((fine, coarse))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = members.len() as f64;
    let mut mean = [0.0; 3];
    for (f, _) in &members {
        for k in 0..3 {
            mean[k] += f[k] / m;
        }
    }
    let mut stderr: f64 = 0.0;
    for k in 0..3 {
        let var = members.iter().map(|(f, _)| (f[k] - mean[k]).powi(2)).sum::<f64>() / (m - 1.0);
        stderr = stderr.max((var / m).sqrt());
    }
    let disc = if members.iter().all(|(_, c)| c.is_some()) {
        let coarse: f64 = members.iter().map(|(_, c)| {
            let c = c.expect("checked");
            0.5 * (c[0] + c[2])
        }).sum::<f64>() / m;
        (0.5 * (mean[0] + mean[2]) - coarse).abs()
    } else {
        f64::NAN
    };
    if let Some(tol) = rve.max_stderr {
        if stderr > tol {
            return Err(Error::EnsembleVariance { stderr, tol });
        }
    }
    Ok(EffTensor {
        e11: mean[0],
        e12: mean[1],
        e22: mean[2],
        lower,
        upper,
        resolution,
        supercell_n: n,
        ensemble_size: rve.ensemble_size,
        stderr,
        discretization_error: disc,
    })
}

/// `(1/(1 − πE[ρ²]), C(δ))`, the latter from the cell with the square
/// `{dist(y, ∂Y) > δ}` removed.
pub fn eps_bounds(law: &RodLaw, delta: f64, resolution: usize) -> Result<(f64, f64)> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidInput(format!("delta = {delta} must lie in (0, 1/2)")));
    }
    let lower = 1.0 / (1.0 - filling_ratio(law));
    Ok((lower, square_hole_energy(delta, resolution)?))
}

/// `C(δ)`.
pub fn square_hole_energy(delta: f64, resolution: usize) -> Result<f64> {
    let hole = Hole::Square { center: [0.5, 0.5], half_width: 0.5 - delta };
    let [e11, _, e22] = cell_tensor(vec![hole], 1, resolution)?;
    Ok(0.5 * (e11 + e22))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(c: [f64; 2], r: f64) -> Hole {
        Hole::Disk { center: c, radius: r }
    }

    #[test]
    fn empty_cell_is_identity() {
        let p = CellProblem { holes: vec![], supercell_n: 1, resolution: 16, direction: [0.6, 0.8] };
        let s = solve_cell_stream(&p).unwrap();
        assert!((s.energy - 1.0).abs() < 1e-12);
        for sg in &s.sigma {
            assert!((sg[0] - 0.6).abs() < 1e-9 && (sg[1] - 0.8).abs() < 1e-9);
        }
        let t = cell_tensor(vec![], 2, 16).unwrap();
        assert!((t[0] - 1.0).abs() < 1e-12 && t[1].abs() < 1e-12 && (t[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_turn_symmetry() {
        let t = cell_tensor(vec![disk([0.5, 0.5], 0.3)], 1, 64).unwrap();
        assert!((t[0] - t[2]).abs() < 1e-8);
        assert!(t[1].abs() < 1e-8);
    }

    #[test]
    fn sigma_vanishes_in_hole_and_has_mean_z() {
        let p = CellProblem { holes: vec![disk([0.5, 0.5], 0.3)], supercell_n: 1, resolution: 32, direction: [1.0, 0.0] };
        let s = solve_cell_stream(&p).unwrap();
        let idx = |i: usize, j: usize| j * s.side + i;
        let centre = s.sigma[idx(16, 16)];
        assert!(centre[0].abs() < 1e-9 && centre[1].abs() < 1e-9);
        // mean of ∂₂ψ over the cell is z₁ exactly through the jump
        let m0: f64 = s.sigma.iter().map(|v| v[0]).sum::<f64>() / s.sigma.len() as f64;
        assert!((m0 - 1.0).abs() < 1e-9, "{m0}");
    }

    #[test]
    fn linearity_in_direction() {
        let holes = vec![disk([0.45, 0.55], 0.25)];
        let t = cell_tensor(holes.clone(), 1, 48).unwrap();
        let z = [1.0, 1.0];
        let p = CellProblem { holes, supercell_n: 1, resolution: 48, direction: z };
        let s = solve_cell_stream(&p).unwrap();
        let q = t[0] + 2.0 * t[1] + t[2];
        assert!((s.energy - q).abs() < 1e-8 * q);
    }

    #[test]
    fn validation_rejects_bad_problems() {
        let low = CellProblem { holes: vec![], supercell_n: 1, resolution: 8, direction: [1.0, 0.0] };
        assert!(solve_cell_stream(&low).is_err());
        let crossing = CellProblem { holes: vec![disk([0.1, 0.5], 0.2)], supercell_n: 1, resolution: 16, direction: [1.0, 0.0] };
        assert!(solve_cell_stream(&crossing).is_err());
    }

    #[test]
    fn square_hole_dominates_disk() {
        let law = RodLaw::dirac(0.375, num_complex::Complex64::new(100.0, 5.0), 0.1).unwrap();
        let t = eps_eff_tensor(&law, 64, &RveSpec::default()).unwrap();
        let (lo, hi) = t.eigenvalues();
        assert!(lo >= t.lower && hi <= t.upper, "{t:?}");
        assert!(eps_bounds(&law, 0.5, 64).is_err());
    }
}
