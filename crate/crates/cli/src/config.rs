//! Run configuration: one JSON document, parsed with field paths in every
//! diagnostic and validated before any command runs.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use resonant_homog::cell::RveSpec;
use resonant_homog::law::{ComponentLaw, LipschitzDensity, RodLaw};
use resonant_homog::microstructure::Obstacle;
use resonant_homog::permeability::SeriesControl;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Evenly spaced grid, or explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default)]
    pub from: Option<f64>,
    #[serde(default)]
    pub to: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

impl Grid {
    pub fn points(&self, path: &str) -> Result<Vec<f64>, CliError> {
        let pts = match (&self.values, self.from, self.to, self.count) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => {
                if n < 2 {
                    return Err(CliError::config(format!("{path}.count"), "needs at least 2 points"));
                }
                (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
            }
            _ => return Err(CliError::config(path, "give either `values` or all of `from`, `to`, `count`")),
        };
        if pts.is_empty() {
            return Err(CliError::config(path, "grid is empty"));
        }
        if let Some(i) = pts.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(CliError::config(format!("{path}[{i}]"), "grid values must be positive and finite"));
        }
        Ok(pts)
    }
}

/// Wavenumber grid, given directly or through the wavelength `λ = 2π/k0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub k0: Option<Grid>,
    #[serde(default)]
    pub lambda: Option<Grid>,
    /// Absorption levels for `mu-limit`; `0` selects the limit formula.
    #[serde(default)]
    pub h: Vec<f64>,
}

/// Which variable a sweep was specified in, for plot axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Abscissa {
    K0,
    Lambda,
}

impl SweepConfig {
    pub fn k0s(&self) -> Result<(Vec<f64>, Abscissa), CliError> {
        match (&self.k0, &self.lambda) {
            (Some(g), None) => Ok((g.points("sweep.k0")?, Abscissa::K0)),
            (None, Some(g)) => Ok((g.points("sweep.lambda")?.into_iter().map(|l| 2.0 * PI / l).collect(), Abscissa::Lambda)),
            _ => Err(CliError::config("sweep", "give exactly one of `k0` or `lambda`")),
        }
    }
}

/// Radius law and real-permittivity density of a lossless medium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitLaw {
    pub gamma: ComponentLaw,
    pub g: LipschitzDensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericsConfig {
    pub series: SeriesControl,
    /// Exponent `r` in the integrability hypothesis.
    pub hypothesis_r: f64,
    pub seed: u64,
    /// Cell grid resolution for `eps-eff`.
    pub resolution: usize,
    pub rve: RveSpec,
    /// Scale parameter and obstacle for `sample`.
    pub eta: f64,
    pub obstacle: Obstacle,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            series: SeriesControl::default(),
            hypothesis_r: 1.0,
            seed: 0,
            resolution: 256,
            rve: RveSpec::default(),
            eta: 0.125,
            obstacle: Obstacle::unit_disk(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterConfig {
    pub k0: f64,
    pub eta: f64,
    pub obstacle: Obstacle,
    pub incident_angle: f64,
    /// Per-rod order; the wave-zone heuristic when absent.
    pub rod_order: Option<usize>,
    pub n_angles: usize,
    pub max_unknowns: usize,
    /// Also solve the homogenized disk (needs a disk obstacle).
    pub homogenized: bool,
    /// Largest relative eigenvalue spread accepted as isotropic.
    pub anisotropy_tol: f64,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        Self {
            k0: 1.0,
            eta: 0.125,
            obstacle: Obstacle::unit_disk(),
            incident_angle: 0.0,
            rod_order: None,
            n_angles: 720,
            max_unknowns: resonant_homog::scattering::foldy_lax::MAX_UNKNOWNS,
            homogenized: true,
            anisotropy_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    /// Fixed wavenumber; otherwise chosen from `k0_grid`.
    pub k0: Option<f64>,
    pub k0_grid: Grid,
    pub max_abs_re_mu: f64,
    pub radius: f64,
    pub etas: Vec<f64>,
    /// Defaults to `[seed, seed + 1]`.
    pub seeds: Option<Vec<u64>>,
    pub probes: Vec<[f64; 2]>,
    pub rod_order: Option<usize>,
    pub n_angles: usize,
    pub ball_nodes: [usize; 2],
    pub exterior_nodes: usize,
    pub norm_identity: bool,
    pub max_unknowns: usize,
    pub anisotropy_tol: f64,
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            k0: None,
            k0_grid: Grid { from: Some(0.2), to: Some(1.3), count: Some(23), values: None },
            max_abs_re_mu: 3.0,
            radius: 1.0,
            etas: vec![0.25, 0.125, 0.0625],
            seeds: None,
            probes: vec![[0.0, 0.0], [0.3, 0.2], [-0.2, -0.35]],
            rod_order: Some(3),
            n_angles: 720,
            ball_nodes: [32, 64],
            exterior_nodes: 32,
            norm_identity: false,
            max_unknowns: resonant_homog::scattering::foldy_lax::MAX_UNKNOWNS,
            anisotropy_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<String>,
    pub prefix: String,
    pub svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, prefix: String::new(), svg: true }
    }
}

/// The whole configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// If present, must agree with the command on the command line.
    #[serde(default)]
    pub command: Option<String>,
    /// Named rod laws; names become file suffixes.
    #[serde(default)]
    pub laws: BTreeMap<String, RodLaw>,
    #[serde(default)]
    pub limit: Option<LimitLaw>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub scatter: Option<ScatterConfig>,
    #[serde(default)]
    pub study: Option<StudySection>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Parsed configuration with the digest of its canonical form.
pub struct Loaded {
    pub config: RunConfig,
    pub digest: String,
}

pub fn parse(text: &str) -> Result<Loaded, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::config("<document>", format!("not valid JSON: {e}")))?;
    let canonical = serde_json::to_string(&value).expect("JSON values serialize");
    let digest = Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::config(if path == "." { "<document>".to_string() } else { path }, e.into_inner().to_string())
    })?;
    Ok(Loaded { config, digest })
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::config(path, format!("must be positive and finite, got {v}")))
    }
}

fn name_ok(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl RunConfig {
    /// Check the sections `command` needs against the module preconditions.
    pub fn validate(&self, command: &str) -> Result<(), CliError> {
        if let Some(c) = &self.command {
            if c != command {
                return Err(CliError::config("command", format!("config is for `{c}` but `{command}` was requested")));
            }
        }
        for name in self.laws.keys() {
            if !name_ok(name) {
                return Err(CliError::config(format!("laws.{name}"), "law names may only use letters, digits, `_` and `-`"));
            }
        }
        let needs_laws = matches!(command, "mu-sweep" | "eps-eff" | "sample" | "scatter" | "validate");
        if needs_laws && self.laws.is_empty() {
            return Err(CliError::config("laws", "at least one law is required"));
        }
        if matches!(command, "scatter" | "validate") && self.laws.len() != 1 {
            return Err(CliError::config("laws", format!("`{command}` takes exactly one law, got {}", self.laws.len())));
        }
        let n = &self.numerics;
        positive("numerics.hypothesis_r", n.hypothesis_r)?;
        positive("numerics.series.tail_tol", n.series.tail_tol)?;
        positive("numerics.eta", n.eta)?;
        if n.series.max_modes == 0 {
            return Err(CliError::config("numerics.series.max_modes", "must be positive"));
        }
        if n.series.quad_order < 2 {
            return Err(CliError::config("numerics.series.quad_order", "needs at least 2 points"));
        }
        if !(n.series.guard_dist >= 0.0) {
            return Err(CliError::config("numerics.series.guard_dist", "must be nonnegative"));
        }
        if n.resolution < 16 || n.resolution % 2 != 0 {
            return Err(CliError::config("numerics.resolution", "must be even and at least 16"));
        }
        if n.rve.supercell_n == 0 || n.rve.ensemble_size == 0 {
            return Err(CliError::config("numerics.rve", "supercell_n and ensemble_size must be positive"));
        }
        match command {
            "mu-sweep" => {
                self.sweep_section()?.k0s()?;
            }
            "mu-limit" => {
                if self.limit.is_none() {
                    return Err(CliError::config("limit", "required by `mu-limit`"));
                }
                let s = self.sweep_section()?;
                s.k0s()?;
                if s.h.is_empty() {
                    return Err(CliError::config("sweep.h", "required by `mu-limit`"));
                }
                if let Some(i) = s.h.iter().position(|h| !(h.is_finite() && *h >= 0.0)) {
                    return Err(CliError::config(format!("sweep.h[{i}]"), "absorption levels must be finite and nonnegative"));
                }
            }
            "scatter" => {
                let s = self.scatter.as_ref().ok_or_else(|| CliError::config("scatter", "required by `scatter`"))?;
                positive("scatter.k0", s.k0)?;
                positive("scatter.eta", s.eta)?;
                if s.n_angles < 8 {
                    return Err(CliError::config("scatter.n_angles", "needs at least 8 angles"));
                }
                if s.homogenized && !matches!(s.obstacle, Obstacle::Disk { center, .. } if center == [0.0, 0.0]) {
                    return Err(CliError::config("scatter.homogenized", "the homogenized solver needs a disk obstacle centered at the origin"));
                }
            }
            "validate" => {
                let s = self.study_section();
                if let Some(k) = s.k0 {
                    positive("study.k0", k)?;
                } else {
                    s.k0_grid.points("study.k0_grid")?;
                }
                positive("study.radius", s.radius)?;
                positive("study.max_abs_re_mu", s.max_abs_re_mu)?;
                if s.etas.is_empty() {
                    return Err(CliError::config("study.etas", "needs at least one value"));
                }
                if let Some(i) = s.etas.iter().position(|e| !(e.is_finite() && *e > 0.0 && *e <= 1.0)) {
                    return Err(CliError::config(format!("study.etas[{i}]"), "must lie in (0, 1]"));
                }
                if let Some(seeds) = &s.seeds {
                    if seeds.is_empty() {
                        return Err(CliError::config("study.seeds", "needs at least one seed"));
                    }
                }
                if s.ball_nodes[0] == 0 || s.ball_nodes[1] == 0 {
                    return Err(CliError::config("study.ball_nodes", "must be positive"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn sweep_section(&self) -> Result<&SweepConfig, CliError> {
        self.sweep.as_ref().ok_or_else(|| CliError::config("sweep", "required by this command"))
    }

    pub fn study_section(&self) -> StudySection {
        self.study.clone().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_name_their_path() {
        let err = parse(r#"{"numerics": {"seeed": 3}}"#).err().unwrap();
        assert_eq!(err.code(), 2);
        assert!(err.to_string().contains("numerics"), "{err}");
    }

    #[test]
    fn lambda_grid_maps_to_wavenumbers() {
        let s = SweepConfig { k0: None, lambda: Some(Grid { from: None, to: None, count: None, values: Some(vec![2.0 * PI]) }), h: vec![] };
        let (k, a) = s.k0s().unwrap();
        assert_eq!(a, Abscissa::Lambda);
        assert!((k[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn digest_ignores_whitespace_and_key_order() {
        let a = parse(r#"{"numerics": {"seed": 3, "eta": 0.5}}"#).unwrap();
        let b = parse("{ \"numerics\" : { \"eta\": 0.5,\n \"seed\": 3 } }").unwrap();
        assert_eq!(a.digest, b.digest);
    }
}
