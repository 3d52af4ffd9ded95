//! Probability laws on rod triples `(θ, ρ, ε)` and expectations under them.
//!
//! A [`RodLaw`] is a product of one-dimensional [`ComponentLaw`]s: the two
//! center coordinates, the radius, and the real and imaginary parts of the
//! permittivity. Each component is a point mass, a uniform interval or a
//! piecewise-linear Lipschitz density, which is enough for every law used in
//! practice and keeps Gauss quadrature exact on polynomial integrands.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::rng::stream_rng;
use crate::spectrum::SpectrumTable;

/// Tolerance on the admissibility inequality `dist(θ, ∂Y) ≥ ρ + δ`.
pub const ADMISSIBILITY_TOL: f64 = 1e-12;

/// Piecewise-linear probability density, zero outside its knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDensity", into = "RawDensity")]
pub struct LipschitzDensity {
    xs: Vec<f64>,
    ys: Vec<f64>,
    lipschitz: f64,
    cumulative: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawDensity {
    knots: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lipschitz: Option<f64>,
}

impl TryFrom<RawDensity> for LipschitzDensity {
    type Error = Error;
    fn try_from(raw: RawDensity) -> Result<Self> {
        let d = LipschitzDensity::new(raw.knots.iter().map(|k| (k[0], k[1])).collect())?;
        match raw.lipschitz {
            Some(l) => d.with_lipschitz(l),
            None => Ok(d),
        }
    }
}

impl From<LipschitzDensity> for RawDensity {
    fn from(d: LipschitzDensity) -> Self {
        RawDensity {
            knots: d.xs.iter().zip(&d.ys).map(|(&x, &y)| [x, y]).collect(),
            lipschitz: Some(d.lipschitz),
        }
    }
}

impl LipschitzDensity {
    /// Density through `(x, g(x))` knots. The first and last values must be
    /// zero so the density is Lipschitz on the whole line, and the total mass
    /// must be 1 within 1e-12.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidLaw("density needs at least two knots".into()));
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = knots.into_iter().unzip();
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidLaw("density knots must be finite".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidLaw("density abscissae must be strictly increasing".into()));
        }
        if ys.iter().any(|&y| y < 0.0) {
            return Err(Error::InvalidLaw("density values must be nonnegative".into()));
        }
        if ys[0] != 0.0 || ys[ys.len() - 1] != 0.0 {
            return Err(Error::InvalidLaw("density must vanish at both end knots".into()));
        }
        let mut cumulative = vec![0.0];
        let mut lipschitz: f64 = 0.0;
        for i in 0..xs.len() - 1 {
            let dx = xs[i + 1] - xs[i];
            let mass = 0.5 * (ys[i] + ys[i + 1]) * dx;
            cumulative.push(cumulative[i] + mass);
            lipschitz = lipschitz.max((ys[i + 1] - ys[i]).abs() / dx);
        }
        let total = cumulative[cumulative.len() - 1];
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidLaw(format!("density integrates to {total}, expected 1")));
        }
        Ok(Self { xs, ys, lipschitz, cumulative })
    }

    /// Declare a Lipschitz constant; it must dominate the largest slope.
    pub fn with_lipschitz(mut self, l: f64) -> Result<Self> {
        if !(l >= self.lipschitz * (1.0 - 1e-12)) {
            return Err(Error::InvalidLaw(format!(
                "declared Lipschitz constant {l} is below the largest slope {}",
                self.lipschitz
            )));
        }
        self.lipschitz = l;
        Ok(self)
    }

    /// Symmetric hat of unit mass centered at `center` with half-width `w`.
    pub fn hat(center: f64, w: f64) -> Result<Self> {
        Self::new(vec![(center - w, 0.0), (center, 1.0 / w), (center + w, 0.0)])
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn support(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x > lo && x < hi) {
            return 0.0;
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ys[i] + t * (self.ys[i + 1] - self.ys[i])
    }

    /// Inverse CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        let target = u.clamp(0.0, 1.0) * self.cumulative[self.cumulative.len() - 1];
        let i = self
            .cumulative
            .partition_point(|&c| c < target)
            .clamp(1, self.xs.len() - 1)
            - 1;
        let rem = target - self.cumulative[i];
        let y0 = self.ys[i];
        let dx = self.xs[i + 1] - self.xs[i];
        let m = (self.ys[i + 1] - y0) / dx;
        // solve y0 t + m t²/2 = rem in its cancellation-free form
        let disc = (y0 * y0 + 2.0 * m * rem).max(0.0);
        let den = y0 + disc.sqrt();
        let t = if den > 0.0 { 2.0 * rem / den } else { 0.0 };
        self.xs[i] + t.clamp(0.0, dx)
    }

    fn nodes_on(&self, a: f64, b: f64, rule: &GaussLegendre, out: &mut Vec<(f64, f64)>) {
        // split at knots so the weight is linear on every panel
        let mut edges = vec![a];
        edges.extend(self.xs.iter().copied().filter(|&k| k > a && k < b));
        edges.push(b);
        for w in edges.windows(2) {
            out.extend(rule.on(w[0], w[1]).map(|(x, wt)| (x, wt * self.density(x))));
        }
    }
}

/// Law of one real component of a rod triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentLaw {
    Dirac { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Density(LipschitzDensity),
}

impl ComponentLaw {
    pub fn dirac(value: f64) -> Self {
        Self::Dirac { value }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self::Uniform { lo, hi }
    }

    fn validate(&self, name: &str) -> Result<()> {
        match *self {
            Self::Dirac { value } if !value.is_finite() => {
                Err(Error::InvalidLaw(format!("{name}: point mass must be finite")))
            }
            Self::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                Err(Error::InvalidLaw(format!("{name}: uniform law needs finite lo < hi")))
            }
            _ => Ok(()),
        }
    }

    /// Closed support interval.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::Dirac { value } => (*value, *value),
            Self::Uniform { lo, hi } => (*lo, *hi),
            Self::Density(d) => d.support(),
        }
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self, Self::Dirac { .. })
    }

    /// Density at `x`; `None` for a point mass.
    pub fn density(&self, x: f64) -> Option<f64> {
        match self {
            Self::Dirac { .. } => None,
            Self::Uniform { lo, hi } => Some(if x >= *lo && x <= *hi { 1.0 / (hi - lo) } else { 0.0 }),
            Self::Density(d) => Some(d.density(x)),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Self::Dirac { value } => *value,
            Self::Uniform { lo, hi } => lo + u * (hi - lo),
            Self::Density(d) => d.quantile(u),
        }
    }

    /// Probability of the event `{x > 0}`.
    pub fn mass_above_zero(&self) -> f64 {
        match self {
            Self::Dirac { value } => f64::from(u8::from(*value > 0.0)),
            Self::Uniform { lo, hi } => (hi - lo.max(0.0)).max(0.0) / (hi - lo),
            Self::Density(d) => {
                let (lo, hi) = d.support();
                if hi <= 0.0 {
                    return 0.0;
                }
                let mut out = Vec::new();
                d.nodes_on(lo.max(0.0), hi, &GaussLegendre::new(4), &mut out);
                out.iter().map(|p| p.1).sum()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn second_moment(&self) -> f64 {
        self.moment(2)
    }

    fn moment(&self, k: i32) -> f64 {
        match self {
            Self::Dirac { value } => value.powi(k),
            _ => self.nodes(8).iter().map(|(x, w)| w * x.powi(k)).sum(),
        }
    }

    /// Quadrature nodes and probability weights: one node for a point mass,
    /// `order` Gauss points per linear panel otherwise.
    pub fn nodes(&self, order: usize) -> Vec<(f64, f64)> {
        match self {
            Self::Dirac { value } => vec![(*value, 1.0)],
            Self::Uniform { lo, hi } => {
                let rule = GaussLegendre::new(order);
                rule.on(*lo, *hi).map(|(x, w)| (x, w / (hi - lo))).collect()
            }
            Self::Density(d) => {
                let rule = GaussLegendre::new(order);
                let mut out = Vec::new();
                let (lo, hi) = d.support();
                d.nodes_on(lo, hi, &rule, &mut out);
                out
            }
        }
    }

    /// Like [`nodes`](Self::nodes), with panels graded geometrically toward
    /// each declared singular point. `budget` is the number of grading levels.
    pub fn graded_nodes(&self, order: usize, singular: &[f64], budget: usize) -> Result<Vec<(f64, f64)>> {
        let (lo, hi) = self.support();
        let inside: Vec<f64> = singular.iter().copied().filter(|&s| s >= lo && s <= hi).collect();
        if inside.is_empty() {
            return Ok(self.nodes(order));
        }
        if self.is_dirac() || budget == 0 {
            return Err(Error::SingularityOverlap { at: inside[0] });
        }
        let mut cuts = inside.clone();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut panels = Vec::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let sa = inside.contains(&a);
            let sb = inside.contains(&b);
            let mid = 0.5 * (a + b);
            if sa {
                grade(a, mid, budget, &mut panels);
            } else {
                panels.push((a, mid));
            }
            if sb {
                grade(b, mid, budget, &mut panels);
            } else {
                panels.push((mid, b));
            }
        }
        let rule = GaussLegendre::new(order);
        let mut out = Vec::new();
        for (a, b) in panels {
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            match self {
                Self::Density(d) => d.nodes_on(a, b, &rule, &mut out),
                _ => out.extend(rule.on(a, b).map(|(x, w)| (x, w * self.density(x).unwrap_or(0.0)))),
            }
        }
        Ok(out)
    }
}

/// Panels `[s + d/2^{k+1}, s + d/2^k]` for `k < levels` plus the innermost
/// one, with `d = far − s`.
fn grade(s: f64, far: f64, levels: usize, out: &mut Vec<(f64, f64)>) {
    let d = far - s;
    let mut outer = 1.0;
    for _ in 0..levels {
        let inner = 0.5 * outer;
        out.push((s + d * inner, s + d * outer));
        outer = inner;
    }
    out.push((s, s + d * outer));
}

/// Law of the rod center in the unit cell `Y = (0, 1)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterLaw {
    pub x: ComponentLaw,
    pub y: ComponentLaw,
}

impl CenterLaw {
    pub fn fixed(x: f64, y: f64) -> Self {
        Self { x: ComponentLaw::dirac(x), y: ComponentLaw::dirac(y) }
    }
}

/// Law of the relative permittivity `ε` inside the rods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermittivityLaw {
    pub re: ComponentLaw,
    pub im: ComponentLaw,
}

impl PermittivityLaw {
    pub fn fixed(eps: Complex64) -> Self {
        Self { re: ComponentLaw::dirac(eps.re), im: ComponentLaw::dirac(eps.im) }
    }
}

/// One rod description: center in `Y`, radius, relative permittivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RodTriple {
    pub center: [f64; 2],
    pub rho: f64,
    pub eps: Complex64,
}

/// Component selector, used to declare integrand singularities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    CenterX,
    CenterY,
    Radius,
    EpsRe,
    EpsIm,
}

/// A point where the integrand blows up along one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    pub component: Component,
    pub at: f64,
}

/// Expectation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    /// Tensor Gauss–Legendre with `order` points per density panel. The
    /// error estimate is the gap to the rule of half the order.
    Gauss { order: usize },
    /// Plain Monte Carlo; the error is the standard error of the mean.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
}

/// Product law on `(θ, ρ, ε)` with the admissibility margin `δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRodLaw", into = "RawRodLaw")]
pub struct RodLaw {
    center: CenterLaw,
    radius: ComponentLaw,
    permittivity: PermittivityLaw,
    delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRodLaw {
    center: CenterLaw,
    radius: ComponentLaw,
    permittivity: PermittivityLaw,
    delta: f64,
}

impl TryFrom<RawRodLaw> for RodLaw {
    type Error = Error;
    fn try_from(r: RawRodLaw) -> Result<Self> {
        make_rod_law(r.center, r.radius, r.permittivity, r.delta)
    }
}

impl From<RodLaw> for RawRodLaw {
    fn from(l: RodLaw) -> Self {
        RawRodLaw { center: l.center, radius: l.radius, permittivity: l.permittivity, delta: l.delta }
    }
}

/// Validate and assemble a rod law.
///
/// Checks the admissibility margin `dist(θ, ∂Y) ≥ ρ + δ` on the extremes of
/// the supports (closed inequality) and that `Im ε ≥ 0` on its support.
pub fn make_rod_law(
    center: CenterLaw,
    radius: ComponentLaw,
    permittivity: PermittivityLaw,
    delta: f64,
) -> Result<RodLaw> {
    center.x.validate("center.x")?;
    center.y.validate("center.y")?;
    radius.validate("radius")?;
    permittivity.re.validate("permittivity.re")?;
    permittivity.im.validate("permittivity.im")?;
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidLaw(format!("margin delta = {delta} must lie in (0, 1/2)")));
    }
    let (rlo, rhi) = radius.support();
    if rlo < 0.0 || rhi > 0.5 {
        return Err(Error::InvalidLaw(format!("radius support [{rlo}, {rhi}] must lie in [0, 1/2]")));
    }
    let (xlo, xhi) = center.x.support();
    let (ylo, yhi) = center.y.support();
    let wall = xlo.min(1.0 - xhi).min(ylo).min(1.0 - yhi);
    if wall < rhi + delta - ADMISSIBILITY_TOL {
        return Err(Error::MarginViolation(format!(
            "nearest center is {wall} from the cell boundary, below rho_max + delta = {}",
            rhi + delta
        )));
    }
    let (ilo, _) = permittivity.im.support();
    if ilo < 0.0 {
        return Err(Error::NegativeImaginaryPermittivity(ilo));
    }
    Ok(RodLaw { center, radius, permittivity, delta })
}

impl RodLaw {
    /// Centered rod with fixed radius and permittivity.
    pub fn dirac(rho: f64, eps: Complex64, delta: f64) -> Result<Self> {
        make_rod_law(CenterLaw::fixed(0.5, 0.5), ComponentLaw::dirac(rho), PermittivityLaw::fixed(eps), delta)
    }

    pub fn center(&self) -> &CenterLaw {
        &self.center
    }

    pub fn radius(&self) -> &ComponentLaw {
        &self.radius
    }

    pub fn permittivity(&self) -> &PermittivityLaw {
        &self.permittivity
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Same law with a different center distribution.
    pub fn with_center(&self, center: CenterLaw) -> Result<Self> {
        make_rod_law(center, self.radius.clone(), self.permittivity.clone(), self.delta)
    }

    /// Same law with the permittivity imaginary part replaced by a point
    /// mass at `h`.
    pub fn with_imag_shift(&self, h: f64) -> Result<Self> {
        let eps = PermittivityLaw { re: self.permittivity.re.clone(), im: ComponentLaw::dirac(h) };
        make_rod_law(self.center.clone(), self.radius.clone(), eps, self.delta)
    }

    fn component(&self, c: Component) -> &ComponentLaw {
        match c {
            Component::CenterX => &self.center.x,
            Component::CenterY => &self.center.y,
            Component::Radius => &self.radius,
            Component::EpsRe => &self.permittivity.re,
            Component::EpsIm => &self.permittivity.im,
        }
    }

    /// Whether every component is a point mass.
    pub fn is_deterministic(&self) -> bool {
        ALL.iter().all(|&c| self.component(c).is_dirac())
    }

    /// Largest `|ε| ρ²` over the support.
    pub fn sup_eps_rho2(&self) -> f64 {
        let (_, rhi) = self.radius.support();
        let (rlo, rehi) = self.permittivity.re.support();
        let (_, imhi) = self.permittivity.im.support();
        let re = rlo.abs().max(rehi.abs());
        (re * re + imhi * imhi).sqrt() * rhi * rhi
    }

    /// Draw one triple from a uniform vector `u ∈ [0,1)^5`.
    pub fn triple_from_uniforms(&self, u: [f64; 5]) -> RodTriple {
        RodTriple {
            center: [self.center.x.quantile(u[0]), self.center.y.quantile(u[1])],
            rho: self.radius.quantile(u[2]),
            eps: Complex64::new(self.permittivity.re.quantile(u[3]), self.permittivity.im.quantile(u[4])),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> RodTriple {
        let u: [f64; 5] = std::array::from_fn(|_| rng.random::<f64>());
        self.triple_from_uniforms(u)
    }

    fn tensor_nodes(
        &self,
        components: &[Component],
        order: usize,
        singular: &[Singularity],
        budget: usize,
    ) -> Result<Vec<(RodTriple, f64)>> {
        let mut grid: Vec<([f64; 5], f64)> = vec![(self.midpoint(), 1.0)];
        for &c in components {
            let pts: Vec<f64> = singular.iter().filter(|s| s.component == c).map(|s| s.at).collect();
            let nodes = self.component(c).graded_nodes(order, &pts, budget)?;
            let slot = c as usize;
            grid = grid
                .iter()
                .flat_map(|(base, w)| {
                    nodes.iter().map(move |&(x, wx)| {
                        let mut p = *base;
                        p[slot] = x;
                        (p, w * wx)
                    })
                })
                .collect();
        }
        Ok(grid
            .into_iter()
            .map(|(p, w)| {
                (RodTriple { center: [p[0], p[1]], rho: p[2], eps: Complex64::new(p[3], p[4]) }, w)
            })
            .collect())
    }

    fn midpoint(&self) -> [f64; 5] {
        std::array::from_fn(|i| {
            let (lo, hi) = self.component(ALL[i]).support();
            0.5 * (lo + hi)
        })
    }

    fn quadrature<F>(&self, f: &F, components: &[Component], order: usize, singular: &[Singularity], budget: usize) -> Result<Complex64>
    where
        F: Fn(&RodTriple) -> Result<Complex64> + Sync,
    {
        let nodes = self.tensor_nodes(components, order, singular, budget)?;
        let vals = nodes
            .par_iter()
            .map(|(t, w)| Ok(*w * f(t)?))
            .collect::<Result<Vec<Complex64>>>()?;
        Ok(vals.into_iter().sum())
    }

    fn estimate<F>(&self, f: &F, components: &[Component], scheme: &Scheme, singular: &[Singularity], budget: usize) -> Result<Estimate>
    where
        F: Fn(&RodTriple) -> Result<Complex64> + Sync,
    {
        match *scheme {
            Scheme::Gauss { order } => {
                if order == 0 {
                    return Err(Error::InvalidInput("Gauss order must be positive".into()));
                }
                let fine = self.quadrature(f, components, order, singular, budget)?;
                let random = components.iter().any(|&c| !self.component(c).is_dirac());
                let error = if random {
                    let coarse = self.quadrature(f, components, (order / 2).max(1), singular, budget)?;
                    (fine - coarse).norm()
                } else {
                    0.0
                };
                Ok(Estimate { value: fine, error })
            }
            Scheme::MonteCarlo { samples, seed } => {
                if samples < 2 {
                    return Err(Error::InvalidInput("Monte Carlo needs at least two samples".into()));
                }
                let mut rng = stream_rng(seed, 0);
                let mut mean = Complex64::new(0.0, 0.0);
                let mut m2 = 0.0;
                for k in 0..samples {
                    let v = f(&self.sample(&mut rng))?;
                    let d = v - mean;
                    mean += d / (k + 1) as f64;
                    m2 += (d.conj() * (v - mean)).re;
                }
                let var = m2 / (samples - 1) as f64;
                Ok(Estimate { value: mean, error: (var / samples as f64).sqrt() })
            }
        }
    }

    /// `E[f(θ, ρ, ε)]`.
    pub fn expectation<F>(&self, f: F, scheme: &Scheme) -> Result<Estimate>
    where
        F: Fn(&RodTriple) -> Result<Complex64> + Sync,
    {
        self.estimate(&f, &ALL, scheme, &[], 0)
    }

    /// `E[f]` with declared singular points, each refined by `budget`
    /// geometric grading levels. A declared point inside a support with zero
    /// budget is an error.
    pub fn expectation_with_singularities<F>(
        &self,
        f: F,
        scheme: &Scheme,
        singular: &[Singularity],
        budget: usize,
    ) -> Result<Estimate>
    where
        F: Fn(&RodTriple) -> Result<Complex64> + Sync,
    {
        self.estimate(&f, &ALL, scheme, singular, budget)
    }

    /// `E[f(ρ, ε)]` for integrands that ignore the center; the center
    /// components are not integrated, so the result does not depend on the
    /// center law at all.
    pub fn marginal_expectation<F>(&self, f: F, scheme: &Scheme) -> Result<Estimate>
    where
        F: Fn(f64, Complex64) -> Result<Complex64> + Sync,
    {
        let g = |t: &RodTriple| f(t.rho, t.eps);
        match scheme {
            Scheme::Gauss { .. } => self.estimate(&g, &MARGINAL, scheme, &[], 0),
            Scheme::MonteCarlo { .. } => {
                let law = self.with_center(CenterLaw::fixed(0.5, 0.5))?;
                law.estimate(&g, &ALL, scheme, &[], 0)
            }
        }
    }

    /// Points where `ε ρ² k0²` can hit the real axis: the intervals of the
    /// real image of `Re ε ρ² k0²` when `Im ε` can vanish.
    fn real_image(&self, k0: f64) -> Option<(f64, f64)> {
        let (ilo, _) = self.permittivity.im.support();
        if ilo > 0.0 {
            return None;
        }
        let (rlo, rhi) = self.radius.support();
        let (elo, ehi) = self.permittivity.re.support();
        let corners = [elo * rlo * rlo, elo * rhi * rhi, ehi * rlo * rlo, ehi * rhi * rhi];
        let lo = corners.iter().copied().fold(f64::INFINITY, f64::min) * k0 * k0;
        let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max) * k0 * k0;
        Some((lo, hi))
    }
}

const ALL: [Component; 5] = [Component::CenterX, Component::CenterY, Component::Radius, Component::EpsRe, Component::EpsIm];
const MARGINAL: [Component; 3] = [Component::Radius, Component::EpsRe, Component::EpsIm];

/// `π E[ρ²]`, the mean area fraction of the rods.
pub fn filling_ratio(law: &RodLaw) -> f64 {
    PI * law.radius.second_moment()
}

/// Verdicts on the two well-posedness hypotheses of a law at wavenumber `k0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// `∫ dist(ερ²k0², σ_0)^{-(2+r)} dp`, `+∞` when divergence is detected.
    pub hyp_integral_value: f64,
    pub hyp_holds: bool,
    /// `p{Im ε > 0}`.
    pub dissipation_mass: f64,
    pub dissipation_holds: bool,
    pub r_used: f64,
}

/// Gauss order used for the hypothesis integral.
const HYP_ORDER: usize = 32;

/// Evaluate both hypotheses.
///
/// Divergence is decided analytically first: if `Im ε` can vanish and the
/// real image of `ερ²k0²` over the support reaches an eigenvalue, the
/// integrand has a non-integrable singularity and the value is `+∞`.
/// Otherwise the integral is computed by Gauss quadrature.
pub fn check_hypotheses(law: &RodLaw, k0: f64, r: f64, table: &SpectrumTable) -> Result<HypothesisReport> {
    if !(k0 > 0.0 && r > 0.0) {
        return Err(Error::InvalidInput("k0 and r must be positive".into()));
    }
    let reach = law.sup_eps_rho2() * k0 * k0;
    if !table.covers(Complex64::new(reach, 0.0)) {
        let need = ((reach + table.eigenvalue(1)).sqrt() / PI + 2.0).ceil() as usize;
        return Err(Error::TableTooSmall { have: table.len(), need });
    }
    let crosses = law.real_image(k0).is_some_and(|(lo, hi)| {
        table.modes().iter().any(|m| m.eigenvalue >= lo && m.eigenvalue <= hi)
    });
    let hyp_integral_value = if crosses {
        f64::INFINITY
    } else {
        let est = law.marginal_expectation(
            |rho, eps| {
                let d = table.dist_to_spectrum(eps * rho * rho * k0 * k0);
                Ok(Complex64::new(d.powf(-(2.0 + r)), 0.0))
            },
            &Scheme::Gauss { order: HYP_ORDER },
        )?;
        est.value.re
    };
    let dissipation_mass = law.permittivity.im.mass_above_zero();
    Ok(HypothesisReport {
        hyp_integral_value,
        hyp_holds: hyp_integral_value.is_finite(),
        dissipation_mass,
        dissipation_holds: dissipation_mass > 0.0,
        r_used: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps0() -> Complex64 {
        Complex64::new(100.0, 5.0)
    }

    #[test]
    fn admissibility_examples() {
        assert!(RodLaw::dirac(0.375, eps0(), 0.1).is_ok());
        let uniform = make_rod_law(
            CenterLaw::fixed(0.5, 0.5),
            ComponentLaw::uniform(0.3, 0.45),
            PermittivityLaw::fixed(eps0()),
            0.05,
        );
        assert!(uniform.is_ok());
        assert!(matches!(RodLaw::dirac(0.475, eps0(), 0.05), Err(Error::MarginViolation(_))));
        assert!(matches!(
            RodLaw::dirac(0.3, Complex64::new(10.0, -1.0), 0.1),
            Err(Error::NegativeImaginaryPermittivity(_))
        ));
        let moving = make_rod_law(
            CenterLaw { x: ComponentLaw::uniform(0.4, 0.6), y: ComponentLaw::dirac(0.5) },
            ComponentLaw::dirac(0.3),
            PermittivityLaw::fixed(eps0()),
            0.1,
        );
        assert!(moving.is_ok());
        let too_far = moving.unwrap().with_center(CenterLaw {
            x: ComponentLaw::uniform(0.35, 0.6),
            y: ComponentLaw::dirac(0.5),
        });
        assert!(matches!(too_far, Err(Error::MarginViolation(_))));
    }

    #[test]
    fn density_validation() {
        assert!(LipschitzDensity::new(vec![(90.0, 0.0), (100.0, 0.1), (110.0, 0.0)]).is_ok());
        assert!(LipschitzDensity::new(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)]).is_err());
        assert!(LipschitzDensity::new(vec![(0.0, 0.0), (1.0, 3.0), (2.0, 0.0)]).is_err());
        let d = LipschitzDensity::hat(100.0, 10.0).unwrap();
        assert!((d.lipschitz() - 1e-2).abs() < 1e-15);
        assert!(d.clone().with_lipschitz(1e-4).is_err());
        assert_eq!(d.density(95.0), 0.05);
        assert!((d.quantile(0.5) - 100.0).abs() < 1e-12);
        assert!((d.quantile(0.125) - 95.0).abs() < 1e-12);
    }

    #[test]
    fn filling_ratio_examples() {
        let l = RodLaw::dirac(0.375, eps0(), 0.1).unwrap();
        assert!((filling_ratio(&l) - 0.4417864669110646).abs() < 1e-12);
        let u = make_rod_law(
            CenterLaw::fixed(0.5, 0.5),
            ComponentLaw::uniform(0.3, 0.45),
            PermittivityLaw::fixed(eps0()),
            0.05,
        )
        .unwrap();
        assert!((filling_ratio(&u) - 0.1425 * PI).abs() < 1e-14);
        assert_eq!(filling_ratio(&RodLaw::dirac(0.0, eps0(), 0.1).unwrap()), 0.0);
    }

    #[test]
    fn expectations_of_moments() {
        let u = make_rod_law(
            CenterLaw::fixed(0.5, 0.5),
            ComponentLaw::uniform(0.3, 0.45),
            PermittivityLaw::fixed(eps0()),
            0.05,
        )
        .unwrap();
        let one = u.expectation(|_| Ok(Complex64::new(1.0, 0.0)), &Scheme::Gauss { order: 8 }).unwrap();
        assert!((one.value.re - 1.0).abs() < 1e-15);
        let r2 = u
            .expectation(|t| Ok(Complex64::new(t.rho * t.rho, 0.0)), &Scheme::Gauss { order: 8 })
            .unwrap();
        assert!((r2.value.re - 0.1425).abs() < 1e-15);
    }

    #[test]
    fn dirac_expectation_has_zero_error() {
        let l = RodLaw::dirac(0.375, eps0(), 0.1).unwrap();
        let e = l.expectation(|t| Ok(t.eps * t.rho.exp()), &Scheme::Gauss { order: 16 }).unwrap();
        assert_eq!(e.error, 0.0);
        assert_eq!(e.value, eps0() * 0.375f64.exp());
    }

    #[test]
    fn monte_carlo_agrees_with_gauss() {
        let law = make_rod_law(
            CenterLaw { x: ComponentLaw::uniform(0.4, 0.6), y: ComponentLaw::dirac(0.5) },
            ComponentLaw::uniform(0.2, 0.3),
            PermittivityLaw {
                re: ComponentLaw::Density(LipschitzDensity::hat(50.0, 10.0).unwrap()),
                im: ComponentLaw::uniform(0.0, 2.0),
            },
            0.05,
        )
        .unwrap();
        let f = |t: &RodTriple| Ok((t.eps * t.rho * t.rho).sqrt() + t.center[0]);
        let g = law.expectation(f, &Scheme::Gauss { order: 16 }).unwrap();
        let mc = law.expectation(f, &Scheme::MonteCarlo { samples: 100_000, seed: 11 }).unwrap();
        assert!(g.error < 1e-12);
        assert!((g.value - mc.value).norm() < 3.0 * mc.error, "{:?} {:?}", g, mc);
    }

    #[test]
    fn singularity_without_budget_is_an_error() {
        let law = make_rod_law(
            CenterLaw::fixed(0.5, 0.5),
            ComponentLaw::uniform(0.2, 0.3),
            PermittivityLaw::fixed(eps0()),
            0.1,
        )
        .unwrap();
        let sing = [Singularity { component: Component::Radius, at: 0.25 }];
        let f = |t: &RodTriple| Ok(Complex64::new((t.rho - 0.25).abs().powf(-0.5), 0.0));
        let err = law.expectation_with_singularities(f, &Scheme::Gauss { order: 8 }, &sing, 0);
        assert!(matches!(err, Err(Error::SingularityOverlap { .. })));
        // ∫_{0.2}^{0.3} |ρ − 1/4|^{-1/2} dρ / 0.1 = 4 √0.05 / 0.1
        let exact = 4.0 * 0.05f64.sqrt() / 0.1;
        let v = law.expectation_with_singularities(f, &Scheme::Gauss { order: 16 }, &sing, 40).unwrap();
        assert!((v.value.re - exact).abs() < 1e-5 * exact, "{} vs {exact}", v.value.re);
    }

    #[test]
    fn hypotheses_for_lossy_dirac_law() {
        let table = SpectrumTable::new(40).unwrap();
        let l = RodLaw::dirac(0.375, eps0(), 0.1).unwrap();
        let rep = check_hypotheses(&l, 0.64, 0.5, &table).unwrap();
        assert!(rep.hyp_holds && rep.dissipation_holds);
        assert_eq!(rep.dissipation_mass, 1.0);
    }

    #[test]
    fn hypotheses_fail_on_lossless_crossing() {
        let table = SpectrumTable::new(40).unwrap();
        let g = LipschitzDensity::hat(100.0, 10.0).unwrap();
        let law = make_rod_law(
            CenterLaw::fixed(0.5, 0.5),
            ComponentLaw::dirac(0.35),
            PermittivityLaw { re: ComponentLaw::Density(g), im: ComponentLaw::dirac(0.0) },
            0.1,
        )
        .unwrap();
        // λ_1/(k0² ρ²) = 100 at this k0
        let k0 = (table.eigenvalue(1) / (100.0 * 0.35 * 0.35)).sqrt();
        let rep = check_hypotheses(&law, k0, 0.5, &table).unwrap();
        assert!(!rep.hyp_holds && rep.hyp_integral_value.is_infinite());
        assert!(!rep.dissipation_holds);
        let shifted = law.with_imag_shift(0.5).unwrap();
        let rep = check_hypotheses(&shifted, k0, 0.5, &table).unwrap();
        assert!(rep.hyp_holds && rep.dissipation_holds);
    }

    #[test]
    fn law_json_round_trip_validates() {
        let l = RodLaw::dirac(0.375, eps0(), 0.1).unwrap();
        let s = serde_json::to_string(&l).unwrap();
        let back: RodLaw = serde_json::from_str(&s).unwrap();
        assert_eq!(back, l);
        let bad = s.replace("0.375", "0.475");
        assert!(serde_json::from_str::<RodLaw>(&bad).is_err());
    }
}
