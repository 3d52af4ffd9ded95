//! Command implementations. Every command returns the files it wrote.

use std::path::PathBuf;

use num_complex::Complex64;
use resonant_homog::cell::{eps_eff_tensor, EffTensor, RveSpec};
use resonant_homog::io::{write_atomic, CsvTable};
use resonant_homog::law::{check_hypotheses, RodLaw};
use resonant_homog::microstructure::{sample_microstructure, Obstacle};
use resonant_homog::permeability::limit::{table_for_limit, LimitAbsorptionSetup, LimitCurve};
use resonant_homog::permeability::{law_digest, mu_eff_series, table_for, DispersionCurve};
use resonant_homog::scattering::{
    convergence_study, select_off_resonant_k0, solve_foldy_lax, solve_homogenized_disk, truncation_heuristic,
    FarField, HomogenizedDiskProblem, PlaneWave, RodScatteringProblem, StudyConfig, StudyReport,
};

use crate::config::{Abscissa, RunConfig};
use crate::svg::{emit_svg, Axes, Curve};
use crate::{CliError, Command};

pub struct Context {
    pub command: Command,
    pub config: RunConfig,
    pub digest: String,
    pub seed: u64,
    pub force: bool,
    pub out: PathBuf,
}

pub fn dispatch(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    match ctx.command {
        Command::MuSweep => mu_sweep(ctx),
        Command::MuLimit => mu_limit(ctx),
        Command::EpsEff => eps_eff(ctx),
        Command::Sample => sample(ctx),
        Command::Scatter => scatter(ctx),
        Command::Validate => validate(ctx),
    }
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(format!("{}{name}", self.config.output.prefix))
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        write_atomic(&path, contents.as_bytes()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    /// Write a CSV with the digest and seed header ahead of its own comments.
    fn write_csv(&self, name: &str, mut table: CsvTable, extra: &[String]) -> Result<PathBuf, CliError> {
        let mut comments = vec![
            format!("resonant-homog {}", self.command.name()),
            format!("config_sha256={} seed={}", self.digest, self.seed),
        ];
        comments.extend(extra.iter().cloned());
        comments.append(&mut table.comments);
        table.comments = comments;
        self.write(name, &table.render())
    }

    fn write_svg(&self, name: &str, curves: &[Curve], axes: Axes) -> Result<Option<PathBuf>, CliError> {
        if !self.config.output.svg || curves.is_empty() {
            return Ok(None);
        }
        self.write(name, &emit_svg(curves, &axes)).map(Some)
    }

    fn rve(&self) -> RveSpec {
        RveSpec { seed: self.seed, ..self.config.numerics.rve }
    }

    fn single_law(&self) -> (&str, &RodLaw) {
        let (name, law) = self.config.laws.iter().next().expect("validated: exactly one law");
        (name.as_str(), law)
    }

    /// Fail with exit 3 when a hypothesis fails at any `k0`, unless forced.
    fn check(&self, name: &str, law: &RodLaw, k0s: &[f64], table: &resonant_homog::spectrum::SpectrumTable) -> Result<(), CliError> {
        let r = self.config.numerics.hypothesis_r;
        let mut failed = Vec::new();
        let mut dissipative = true;
        for &k0 in k0s {
            let rep = check_hypotheses(law, k0, r, table)?;
            dissipative &= rep.dissipation_holds;
            if !rep.hyp_holds {
                failed.push(k0);
            }
        }
        if self.force || (failed.is_empty() && dissipative) {
            return Ok(());
        }
        let mut why = Vec::new();
        if !dissipative {
            why.push("Im eps vanishes almost surely".to_string());
        }
        if let Some(k0) = failed.first() {
            why.push(format!(
                "the integrability condition fails at {} of {} wavenumbers, first at k0 = {k0}",
                failed.len(),
                k0s.len()
            ));
        }
        Err(CliError::Hypothesis(format!("law `{name}`: {}", why.join("; "))))
    }
}

fn x_of(abscissa: Abscissa, k0: f64) -> f64 {
    match abscissa {
        Abscissa::K0 => k0,
        Abscissa::Lambda => 2.0 * std::f64::consts::PI / k0,
    }
}

fn x_label(abscissa: Abscissa) -> &'static str {
    match abscissa {
        Abscissa::K0 => "k0",
        Abscissa::Lambda => "lambda = 2 pi / k0",
    }
}

fn mu_sweep(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &ctx.config;
    let (k0s, abscissa) = cfg.sweep_section()?.k0s()?;
    let kmax = k0s.iter().cloned().fold(0.0, f64::max);
    let ctrl = cfg.numerics.series;
    let mut files = Vec::new();
    let mut curves = Vec::new();
    for (name, law) in &cfg.laws {
        let table = table_for(law, kmax, &ctrl)?;
        ctx.check(name, law, &k0s, &table)?;
        let curve = DispersionCurve::sweep(law, &k0s, &ctrl, &table, ctx.force)?;
        let extra = [format!("law={name} law_sha256={}", curve.law_digest)];
        files.push(ctx.write_csv(&format!("mu_{name}.csv"), curve.to_csv(), &extra)?);
        let pts = |f: fn(Complex64) -> f64| curve.points.iter().map(|p| (x_of(abscissa, p.k0), f(p.mu))).collect();
        curves.push(Curve { label: format!("Re mu ({name})"), points: pts(|m| m.re) });
        curves.push(Curve { label: format!("Im mu ({name})"), points: pts(|m| m.im) });
    }
    let axes = Axes { title: "effective permeability".into(), x_label: x_label(abscissa).into(), y_label: "mu_eff".into() };
    files.extend(ctx.write_svg("mu.svg", &curves, axes)?);
    Ok(files)
}

/// The limit law is lossless by construction, so the dissipation hypothesis
/// is not checked here.
fn mu_limit(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &ctx.config;
    let lim = cfg.limit.as_ref().expect("validated: limit section");
    let sweep = cfg.sweep_section()?;
    let (k0s, abscissa) = sweep.k0s()?;
    let kmax = k0s.iter().cloned().fold(0.0, f64::max);
    let ctrl = cfg.numerics.series;
    let setup = LimitAbsorptionSetup::new(lim.gamma.clone(), lim.g.clone(), 0.0, kmax)
        .map_err(|e| CliError::config("limit", e))?;
    let table = table_for_limit(&setup, &sweep.h, &ctrl)?;
    let curve = LimitCurve::sweep(&setup, &k0s, &sweep.h, &ctrl, &table)?;
    let mut files = vec![ctx.write_csv("mu_limit.csv", curve.to_csv(), &[])?];
    let mut curves = Vec::new();
    for &h in &sweep.h {
        let rows: Vec<_> = curve.rows.iter().filter(|(_, v)| v.h == h).collect();
        curves.push(Curve { label: format!("Re mu (h={h})"), points: rows.iter().map(|(k, v)| (x_of(abscissa, *k), v.mu.re)).collect() });
        curves.push(Curve { label: format!("Im mu (h={h})"), points: rows.iter().map(|(k, v)| (x_of(abscissa, *k), v.mu.im)).collect() });
    }
    let axes = Axes { title: "limit absorption".into(), x_label: x_label(abscissa).into(), y_label: "mu_h".into() };
    files.extend(ctx.write_svg("mu_limit.svg", &curves, axes)?);
    Ok(files)
}

fn tensor_csv(t: &EffTensor) -> CsvTable {
    let mut c = CsvTable::new(&[
        "e11", "e12", "e22", "scalar", "lower", "upper", "resolution", "supercell_n", "ensemble_size", "stderr",
        "discretization_error",
    ]);
    c.push(vec![
        t.e11,
        t.e12,
        t.e22,
        t.scalar(),
        t.lower,
        t.upper,
        t.resolution as f64,
        t.supercell_n as f64,
        t.ensemble_size as f64,
        t.stderr,
        t.discretization_error,
    ]);
    c
}

fn eps_eff(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &ctx.config;
    let mut files = Vec::new();
    for (name, law) in &cfg.laws {
        let t = eps_eff_tensor(law, cfg.numerics.resolution, &ctx.rve())?;
        let extra = [format!("law={name} law_sha256={}", law_digest(law))];
        files.push(ctx.write_csv(&format!("eps_eff_{name}.csv"), tensor_csv(&t), &extra)?);
    }
    Ok(files)
}

fn sample(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &ctx.config;
    let mut files = Vec::new();
    for (name, law) in &cfg.laws {
        let set = sample_microstructure(law, cfg.numerics.eta, &cfg.numerics.obstacle, ctx.seed);
        let extra = [format!("law={name} law_sha256={} n_rods={}", law_digest(law), set.len())];
        files.push(ctx.write_csv(&format!("rods_{name}.csv"), set.to_csv(), &extra)?);
        files.push(ctx.write(&format!("rods_{name}.json"), &(set.sidecar_json() + "\n"))?);
    }
    Ok(files)
}

/// Largest `(ρ, ε)` the law can produce, for the order heuristic.
fn extreme_rod(law: &RodLaw) -> (f64, Complex64) {
    let rho = law.radius().support().1;
    let eps = Complex64::new(law.permittivity().re.support().1, law.permittivity().im.support().1);
    (rho, eps)
}

fn scalar_permittivity(law: &RodLaw, ctx: &Context, tol: f64) -> Result<f64, CliError> {
    let t = eps_eff_tensor(law, ctx.config.numerics.resolution, &ctx.rve())?;
    let (lo, hi) = t.eigenvalues();
    if (hi - lo) / t.scalar() > tol {
        return Err(CliError::Numerical(format!(
            "effective tensor eigenvalues {lo} and {hi} are not isotropic within {tol:e}"
        )));
    }
    Ok(t.scalar())
}

fn farfield_curve(label: &str, ff: &FarField) -> Curve {
    Curve {
        label: label.into(),
        points: ff.angles.iter().zip(&ff.amplitude).map(|(a, f)| (a.to_degrees(), f.norm())).collect(),
    }
}

fn scatter(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &ctx.config;
    let s = cfg.scatter.as_ref().expect("validated: scatter section");
    let (name, law) = ctx.single_law();
    let ctrl = cfg.numerics.series;
    let table = table_for(law, s.k0, &ctrl)?;
    ctx.check(name, law, &[s.k0], &table)?;
    let set = sample_microstructure(law, s.eta, &s.obstacle, ctx.seed);
    let (rho, eps) = extreme_rod(law);
    let l = s.rod_order.unwrap_or_else(|| truncation_heuristic(s.k0, s.eta, rho, eps));
    let incident = PlaneWave::from_angle(s.incident_angle);
    let mut problem = RodScatteringProblem::new(set, s.k0, incident, l);
    problem.max_unknowns = s.max_unknowns;
    let n_rods = problem.rods.len();
    let sol = solve_foldy_lax(&problem)?;
    let ff = FarField::from_multipoles(&sol.multipoles, s.n_angles);
    let extra = [format!(
        "law={name} eta={} n_rods={n_rods} rod_order={l} residual={:e} optical_theorem_gap={:e}",
        s.eta,
        sol.residual,
        ff.optical_theorem_gap()
    )];
    let mut files = vec![ctx.write_csv("farfield.csv", ff.to_csv(), &extra)?];
    let mut curves = vec![farfield_curve(&format!("direct, eta={}", s.eta), &ff)];
    if s.homogenized {
        let Obstacle::Disk { radius, .. } = s.obstacle else { unreachable!("validated: disk obstacle") };
        let eps_eff = scalar_permittivity(law, ctx, s.anisotropy_tol)?;
        let mu = mu_eff_series(s.k0, law, &ctrl, &table)?.mu;
        let hom = solve_homogenized_disk(&HomogenizedDiskProblem::new(radius, eps_eff, mu, s.k0, incident))?;
        let hff = FarField::from_multipoles(&hom.multipoles, s.n_angles);
        let extra = [format!("eps_eff={eps_eff} re_mu={} im_mu={} gap={:e}", mu.re, mu.im, ff.relative_gap(&hff))];
        files.push(ctx.write_csv("farfield_hom.csv", hff.to_csv(), &extra)?);
        curves.push(farfield_curve("homogenized", &hff));
    }
    let axes = Axes { title: "far-field amplitude".into(), x_label: "angle (degrees)".into(), y_label: "|f|".into() };
    files.extend(ctx.write_svg("farfield.svg", &curves, axes)?);
    Ok(files)
}

fn study_csv(rep: &StudyReport) -> CsvTable {
    let mut t = CsvTable::new(&["eta", "seed", "n_rods", "farfield_L2_gap", "interior_gap", "exterior_gap"]);
    for r in &rep.records {
        t.push(vec![r.eta, r.seed as f64, r.n_rods as f64, r.farfield_L2_gap, r.interior_gap, r.exterior_gap]);
    }
    t
}

fn validate(ctx: &Context) -> Result<Vec<PathBuf>, CliError> {
    let cfg = &ctx.config;
    let s = cfg.study_section();
    let (name, law) = ctx.single_law();
    let ctrl = cfg.numerics.series;
    let (k0, mu) = match s.k0 {
        Some(k0) => {
            let table = table_for(law, k0, &ctrl)?;
            (k0, mu_eff_series(k0, law, &ctrl, &table)?.mu)
        }
        None => {
            let grid = s.k0_grid.points("study.k0_grid")?;
            let kmax = grid.iter().cloned().fold(0.0, f64::max);
            let table = table_for(law, kmax, &ctrl)?;
            select_off_resonant_k0(law, &grid, s.max_abs_re_mu, &ctrl, &table)?
        }
    };
    let table = table_for(law, k0, &ctrl)?;
    ctx.check(name, law, &[k0], &table)?;
    let eps_eff = scalar_permittivity(law, ctx, s.anisotropy_tol)?;
    let mut study = StudyConfig::new(law.clone(), k0, s.radius, eps_eff, mu);
    study.etas = s.etas.clone();
    study.seeds = s.seeds.clone().unwrap_or(vec![ctx.seed, ctx.seed + 1]);
    study.probes = s.probes.clone();
    study.rod_order = s.rod_order;
    study.n_angles = s.n_angles;
    study.ball_nodes = s.ball_nodes;
    study.exterior_nodes = s.exterior_nodes;
    study.max_unknowns = s.max_unknowns;
    study.norm_identity = s.norm_identity;
    let rep = convergence_study(&study)?;
    let json = serde_json::to_string_pretty(&rep).expect("report serializes") + "\n";
    let mut files = vec![ctx.write("study.json", &json)?];
    let extra = [format!("law={name} k0={k0} eps_eff={eps_eff} re_mu={} im_mu={}", mu.re, mu.im)];
    files.push(ctx.write_csv("study.csv", study_csv(&rep), &extra)?);
    let means = rep.mean_by_eta();
    let curve = |label: &str, f: fn(&resonant_homog::scattering::StudyRecord) -> f64| Curve {
        label: label.into(),
        points: means.iter().map(|r| (r.eta, f(r))).collect(),
    };
    let curves = [
        curve("far-field L2 gap", |r| r.farfield_L2_gap),
        curve("interior gap", |r| r.interior_gap),
        curve("exterior gap", |r| r.exterior_gap),
    ];
    let axes = Axes { title: format!("homogenization gaps at k0 = {k0}"), x_label: "eta".into(), y_label: "relative gap".into() };
    files.extend(ctx.write_svg("study.svg", &curves, axes)?);
    Ok(files)
}
