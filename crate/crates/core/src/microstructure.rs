//! Finite realizations of the η-scaled random rod lattice inside an obstacle.
//!
//! One realization draws a single uniform lattice shift `y ∈ Y`, keeps every
//! cell `η(j − y + Y)` fully inside the obstacle, and places in each kept cell
//! a rod with its own i.i.d. triple drawn from the cell's private stream.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::io::CsvTable;
use crate::law::{RodLaw, RodTriple};
use crate::rng::{cell_stream, stream_rng, SHIFT_STREAM};

/// Macroscopic domain filled with rods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Obstacle {
    Disk { center: [f64; 2], radius: f64 },
    Rectangle { min: [f64; 2], max: [f64; 2] },
}

impl Obstacle {
    pub fn unit_disk() -> Self {
        Self::Disk { center: [0.0, 0.0], radius: 1.0 }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Self::Disk { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                dx * dx + dy * dy <= radius * radius
            }
            Self::Rectangle { min, max } => p[0] >= min[0] && p[0] <= max[0] && p[1] >= min[1] && p[1] <= max[1],
        }
    }

    /// Whether the closed square `[lo, lo + side]²` lies inside; both shapes
    /// are convex, so the four corners decide.
    pub fn contains_square(&self, lo: [f64; 2], side: f64) -> bool {
        [[0.0, 0.0], [side, 0.0], [0.0, side], [side, side]]
            .iter()
            .all(|c| self.contains([lo[0] + c[0], lo[1] + c[1]]))
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            Self::Disk { center, radius } => {
                ([center[0] - radius, center[1] - radius], [center[0] + radius, center[1] + radius])
            }
            Self::Rectangle { min, max } => (min, max),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Self::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Self::Rectangle { min, max } => (max[0] - min[0]) * (max[1] - min[1]),
        }
    }
}

/// One rod of a realization, in obstacle coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rod {
    /// Lattice index `j` of the generating cell.
    pub cell: [i64; 2],
    pub center: [f64; 2],
    /// Physical radius `η ρ_j`.
    pub radius: f64,
    /// Unscaled relative permittivity `ε_j`; the rod material is `ε_j/η²`.
    pub eps: Complex64,
    /// The triple the rod was built from, in cell coordinates.
    pub triple: RodTriple,
}

/// A sampled rod assembly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RodSet {
    pub eta: f64,
    pub obstacle: Obstacle,
    pub seed: u64,
    /// Lattice shift `y ∈ Y`.
    pub shift: [f64; 2],
    pub rods: Vec<Rod>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    eta: f64,
    seed: u64,
    obstacle: &'a Obstacle,
}

impl RodSet {
    pub fn len(&self) -> usize {
        self.rods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rods.is_empty()
    }

    /// Lower-left corner of the generating cell of `rod`.
    pub fn cell_origin(&self, rod: &Rod) -> [f64; 2] {
        [
            self.eta * (rod.cell[0] as f64 - self.shift[0]),
            self.eta * (rod.cell[1] as f64 - self.shift[1]),
        ]
    }

    /// Rod area over the area of the retained cells.
    pub fn area_fraction(&self) -> f64 {
        if self.rods.is_empty() {
            return 0.0;
        }
        let rods: f64 = self.rods.iter().map(|r| std::f64::consts::PI * r.radius * r.radius).sum();
        rods / (self.rods.len() as f64 * self.eta * self.eta)
    }

    /// CSV export `x,y,radius,re_eps,im_eps`.
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&["x", "y", "radius", "re_eps", "im_eps"]);
        for r in &self.rods {
            t.push(vec![r.center[0], r.center[1], r.radius, r.eps.re, r.eps.im]);
        }
        t
    }

    /// JSON sidecar `{eta, seed, obstacle}`.
    pub fn sidecar_json(&self) -> String {
        serde_json::to_string_pretty(&Sidecar { eta: self.eta, seed: self.seed, obstacle: &self.obstacle })
            .expect("sidecar serializes")
    }
}

/// Sample the rods of one realization.
///
/// Deterministic in `(law, eta, obstacle, seed)`. When no cell fits the
/// result is empty.
pub fn sample_microstructure(law: &RodLaw, eta: f64, obstacle: &Obstacle, seed: u64) -> RodSet {
    assert!(eta > 0.0, "eta must be positive");
    let mut shift_rng = stream_rng(seed, SHIFT_STREAM);
    let shift = [shift_rng.random::<f64>(), shift_rng.random::<f64>()];
    let (bmin, bmax) = obstacle.bounding_box();
    let jlo = [(bmin[0] / eta + shift[0]).floor() as i64, (bmin[1] / eta + shift[1]).floor() as i64];
    let jhi = [(bmax[0] / eta + shift[0]).ceil() as i64, (bmax[1] / eta + shift[1]).ceil() as i64];
    let mut rods = Vec::new();
    for j2 in jlo[1]..=jhi[1] {
        for j1 in jlo[0]..=jhi[0] {
            let origin = [eta * (j1 as f64 - shift[0]), eta * (j2 as f64 - shift[1])];
            if !obstacle.contains_square(origin, eta) {
                continue;
            }
            let mut rng = stream_rng(seed, cell_stream(j1, j2));
            let triple = law.sample(&mut rng);
            rods.push(Rod {
                cell: [j1, j2],
                center: [origin[0] + eta * triple.center[0], origin[1] + eta * triple.center[1]],
                radius: eta * triple.rho,
                eps: triple.eps,
                triple,
            });
        }
    }
    RodSet { eta, obstacle: *obstacle, seed, shift, rods }
}
