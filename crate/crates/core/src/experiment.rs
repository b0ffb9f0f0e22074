//! Experiment configuration and artifact writers behind the `isoflow` binary.
//!
//! A configuration is a flat `key = value` map. Values come from built-in
//! defaults, then an optional config file, then command-line overrides.
//! Every run writes `manifest.json` before any other artifact; if the run
//! fails, everything it wrote is removed again.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;

use crate::disorder::{self, ThermalParams};
use crate::equilibrium::{self, CanonicalParams};
use crate::error::{Error, Result};
use crate::flow::{self, Analytic2x2Solution, FlowParams, FlowVariant};
use crate::fokker_planck::{self, FpGrid};
use crate::hermitian::{angle_difference, to_bloch, BlochDecomposition, HermitianMatrix};
use crate::stats::{ks_one_sample, total_variation};
use crate::stochastic::{self, EnsembleSpec, NoiseConfig, Scheme, Thermalizer, HISTOGRAM_BINS};
use crate::su3;
use crate::Convention;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Flow,
    Thermalize,
    Equilibrium,
    Fpde,
    Averages,
    Partition,
    Figures,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Flow,
        Command::Thermalize,
        Command::Equilibrium,
        Command::Fpde,
        Command::Averages,
        Command::Partition,
        Command::Figures,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Flow => "flow",
            Command::Thermalize => "thermalize",
            Command::Equilibrium => "equilibrium",
            Command::Fpde => "fpde",
            Command::Averages => "averages",
            Command::Partition => "partition",
            Command::Figures => "figures",
        }
    }

    /// Recognized keys with their defaults.
    pub fn defaults(self) -> Vec<(&'static str, &'static str)> {
        const HALF_PI: &str = "1.5707963267948966";
        const THIRD_PI: &str = "1.0471975511965976";
        let two_level = [("lambda", "1"), ("mu", "2"), ("nu", "1"), ("u0", "0"), ("v", "0")];
        let mut keys: Vec<(&str, &str)> = match self {
            Command::Flow => vec![
                ("theta0", THIRD_PI),
                ("phi0", "0"),
                ("dt", "0.001"),
                ("t_final", "5"),
                ("variant", "with_unitary"),
                ("stride", "10"),
            ],
            Command::Thermalize => vec![
                ("theta0", HALF_PI),
                ("phi0", "0"),
                ("dt", "0.001"),
                ("t_final", "auto"),
                ("paths", "10000"),
                ("scheme", "angle_em"),
                ("convention", "section6"),
                ("record_stride", "100"),
                ("keep_trajectories", "false"),
                ("dim", "2"),
            ],
            Command::Equilibrium => vec![("convention", "section6"), ("samples", "100000"), ("n_theta", "181")],
            Command::Fpde => vec![
                ("convention", "section6"),
                ("n_theta", "256"),
                ("tol", "1e-6"),
                ("max_steps", "20000000"),
                ("init", "bump"),
                ("bump_center", HALF_PI),
                ("bump_width", "0.1"),
            ],
            Command::Averages => vec![
                ("beta", "2"),
                ("convention", "section6"),
                ("t_min", "0.02"),
                ("t_max", "5"),
                ("points", "200"),
                ("samples", "10000"),
            ],
            Command::Partition => vec![
                ("lambdas", "0,0.5,1,2"),
                ("energies", "-1,0,1"),
                ("g_eigs", "-1,0,1"),
                ("nodes", "48"),
                ("samples", "1000000"),
            ],
            Command::Figures => vec![
                ("which", "all"),
                ("tau_min", "0.01"),
                ("tau_max", "100"),
                ("points", "200"),
                ("t_min", "0.02"),
                ("t_max", "5"),
                ("samples", "10000"),
                ("convention", "section6"),
            ],
        };
        match self {
            Command::Partition => {}
            Command::Averages => {
                keys.extend([("lambda", "10"), ("mu", "2"), ("nu", "1"), ("u0", "0"), ("v", "0")]);
            }
            Command::Figures => {
                keys.extend([("lambda", "10"), ("mu", "2"), ("nu", "1")]);
            }
            _ => keys.extend(two_level),
        }
        keys.sort_by_key(|(k, _)| *k);
        keys
    }
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(vec![format!("unknown command `{s}`")]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    /// Fully resolved parameters, defaults included.
    pub params: BTreeMap<String, String>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

/// Parses `key = value` lines; `#` and `;` start comments.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut problems = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                out.insert(k.trim().replace('-', "_"), v.trim().to_string());
            }
            _ => problems.push(format!("line {}: expected `key = value`, got `{}`", n + 1, raw.trim())),
        }
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(Error::Config(problems))
    }
}

impl ExperimentConfig {
    /// Resolves defaults, then `file` entries, then `overrides`. `seed` and
    /// `out` may appear as keys in either source.
    pub fn resolve(
        command: Command,
        file: &BTreeMap<String, String>,
        overrides: &BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut params: BTreeMap<String, String> = command
            .defaults()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let mut seed = "1".to_string();
        let mut out = "out".to_string();
        let mut problems = Vec::new();
        for source in [file, overrides] {
            for (k, v) in source {
                match k.as_str() {
                    "seed" => seed = v.clone(),
                    "out" | "output_dir" => out = v.clone(),
                    _ if params.contains_key(k) => {
                        params.insert(k.clone(), v.clone());
                    }
                    _ => problems.push(format!("unknown key `{k}` for command `{}`", command.name())),
                }
            }
        }
        let seed = match seed.parse::<u64>() {
            Ok(s) => s,
            Err(_) => {
                problems.push(format!("seed: expected a 64-bit unsigned integer, got `{seed}`"));
                0
            }
        };
        let cfg = Self {
            command,
            params,
            seed,
            output_dir: PathBuf::from(out),
        };
        problems.extend(cfg.validate());
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(problems))
        }
    }

    fn raw(&self, key: &str) -> &str {
        self.params.get(key).map(String::as_str).unwrap_or("")
    }

    fn real(&self, key: &str) -> f64 {
        self.raw(key).parse().unwrap_or(f64::NAN)
    }

    fn count(&self, key: &str) -> usize {
        self.raw(key).parse().unwrap_or(0)
    }

    fn list(&self, key: &str) -> Vec<f64> {
        self.raw(key)
            .split(',')
            .map(|x| x.trim().parse().unwrap_or(f64::NAN))
            .collect()
    }

    fn triple(&self, key: &str) -> [f64; 3] {
        let v = self.list(key);
        [v[0], v[1], v[2]]
    }

    fn convention(&self) -> Convention {
        self.raw("convention").parse().unwrap_or_default()
    }

    /// Every violation, not just the first.
    fn validate(&self) -> Vec<String> {
        let mut p = Vec::new();
        for (k, v) in &self.params {
            let ok = match k.as_str() {
                "lambda" | "mu" | "dt" | "tol" | "bump_width" | "t_min" | "t_max" | "tau_min" | "tau_max" => {
                    v.parse::<f64>().map(|x| x > 0.0 && x.is_finite()).unwrap_or(false)
                }
                "nu" | "beta" => v.parse::<f64>().map(|x| x >= 0.0 && !x.is_nan()).unwrap_or(false),
                "u0" | "v" | "theta0" | "phi0" | "bump_center" => v.parse::<f64>().map(f64::is_finite).unwrap_or(false),
                "t_final" => v == "auto" || v.parse::<f64>().map(|x| x > 0.0 && x.is_finite()).unwrap_or(false),
                "stride" | "paths" | "record_stride" | "samples" | "max_steps" | "points" | "nodes" | "n_theta" => {
                    v.parse::<usize>().map(|x| x > 0).unwrap_or(false)
                }
                "variant" => v.parse::<FlowVariant>().is_ok(),
                "scheme" => v.parse::<Scheme>().is_ok(),
                "convention" => v.parse::<Convention>().is_ok(),
                "keep_trajectories" => v == "true" || v == "false",
                "dim" => v == "2" || v == "3",
                "init" => v == "bump" || v == "uniform",
                "which" => matches!(v.as_str(), "2" | "3" | "4" | "all"),
                "lambdas" => self.list(k).iter().all(|x| *x >= 0.0 && x.is_finite()),
                "energies" | "g_eigs" => {
                    let xs = self.list(k);
                    xs.len() == 3 && xs.iter().all(|x| x.is_finite())
                }
                _ => true,
            };
            if !ok {
                p.push(format!("{k}: invalid value `{v}`"));
            }
        }
        if self.command == Command::Thermalize && self.raw("dim") == "3" && self.raw("scheme") != "matrix_conjugation" {
            p.push("dim = 3 requires scheme = matrix_conjugation".to_string());
        }
        p
    }
}

/// Failure of a CLI run.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl RunError {
    /// 2 for invalid input, 3 for numerical guards, 1 for i/o failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Core(e) if e.is_numerical_guard() => 3,
            RunError::Core(_) => 2,
            RunError::Io(_) => 1,
        }
    }
}

/// Tracks written files so a failed run can clean up after itself.
struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
    created_dir: bool,
}

impl Artifacts {
    fn create<F>(&mut self, name: &str, f: F) -> std::result::Result<(), RunError>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::result::Result<(), RunError>,
    {
        let path = self.dir.join(name);
        if !self.written.contains(&path) {
            self.written.push(path.clone());
        }
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> std::result::Result<(), RunError> {
        self.create(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::other)?;
            writeln!(w)?;
            Ok(())
        })
    }

    fn names(&self) -> Vec<String> {
        self.written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .filter(|n| n != MANIFEST)
            .collect()
    }

    fn remove_all(&self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub artifacts: Vec<String>,
}

fn manifest(cfg: &ExperimentConfig, started: u64, extra: serde_json::Value) -> serde_json::Value {
    let mut m = json!({
        "toolkit": "isoflow",
        "version": VERSION,
        "command": cfg.command,
        "seed": cfg.seed,
        "output_dir": cfg.output_dir,
        "params": cfg.params,
        "started_unix_seconds": started,
    });
    if let (Some(obj), serde_json::Value::Object(more)) = (m.as_object_mut(), extra) {
        obj.extend(more);
    }
    m
}

/// Runs a resolved configuration and writes its artifacts.
pub fn run(cfg: &ExperimentConfig) -> std::result::Result<RunReport, RunError> {
    let created_dir = !cfg.output_dir.exists();
    fs::create_dir_all(&cfg.output_dir)?;
    let mut art = Artifacts {
        dir: cfg.output_dir.clone(),
        written: Vec::new(),
        created_dir,
    };
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let result = art
        .json(MANIFEST, &manifest(cfg, started, json!({ "status": "running" })))
        .and_then(|_| dispatch(cfg, &mut art));
    match result {
        Ok(()) => {
            let done = manifest(
                cfg,
                started,
                json!({
                    "status": "ok",
                    "wall_clock_seconds": clock.elapsed().as_secs_f64(),
                    "artifacts": art.names(),
                }),
            );
            art.json(MANIFEST, &done)?;
            Ok(RunReport {
                output_dir: cfg.output_dir.clone(),
                artifacts: art.names(),
            })
        }
        Err(e) => {
            art.remove_all();
            Err(e)
        }
    }
}

fn dispatch(cfg: &ExperimentConfig, art: &mut Artifacts) -> std::result::Result<(), RunError> {
    match cfg.command {
        Command::Flow => run_flow(cfg, art, "trajectory.csv", "flow_summary.json"),
        Command::Thermalize => run_thermalize(cfg, art),
        Command::Equilibrium => run_equilibrium(cfg, art),
        Command::Fpde => run_fpde(cfg, art),
        Command::Averages => run_averages(cfg, art),
        Command::Partition => run_partition(cfg, art),
        Command::Figures => run_figures(cfg, art),
    }
}

fn canonical(cfg: &ExperimentConfig) -> CanonicalParams {
    let has = |k: &str| cfg.params.contains_key(k);
    CanonicalParams {
        lambda: cfg.real("lambda"),
        mu: cfg.real("mu"),
        nu: cfg.real("nu"),
        u0: if has("u0") { cfg.real("u0") } else { 0.0 },
        v: if has("v") { cfg.real("v") } else { 0.0 },
        convention: if has("convention") {
            cfg.convention()
        } else {
            Convention::Section6
        },
    }
}

fn run_flow(
    cfg: &ExperimentConfig,
    art: &mut Artifacts,
    csv: &str,
    summary: &str,
) -> std::result::Result<(), RunError> {
    let (lambda, mu) = (cfg.real("lambda"), cfg.real("mu"));
    let b0 = BlochDecomposition::new(cfg.real("u0"), cfg.real("nu"), cfg.real("theta0"), cfg.real("phi0"));
    let g = HermitianMatrix::z_reference(cfg.real("v"), mu);
    let variant: FlowVariant = cfg.raw("variant").parse()?;
    let params = FlowParams::new(lambda, cfg.real("dt"), cfg.real("t_final"))
        .with_variant(variant)
        .with_stride(cfg.count("stride"));
    let traj = flow::integrate(&b0.to_matrix(), &g, &params)?;
    art.create(csv, |w| Ok(flow::write_trajectory_csv(&traj, w)?))?;

    // deviation from the closed-form solution along the recorded samples
    let exact = Analytic2x2Solution::new(&b0, lambda, mu).ok();
    let mut max_matrix_error: Option<f64> = exact.map(|_| 0.0);
    let mut max_phase_error: f64 = 0.0;
    for s in &traj.samples {
        if let Some(x) = &exact {
            let reference = match variant {
                FlowVariant::PureGradient => x.at(s.t),
                FlowVariant::WithUnitary => x.at_with_unitary(s.t, mu),
            };
            let e = s.h.sub(&reference)?.frobenius_norm();
            max_matrix_error = max_matrix_error.map(|m| m.max(e));
        }
        let b = to_bloch(&s.h)?;
        let expected = match variant {
            FlowVariant::PureGradient => b0.phi,
            FlowVariant::WithUnitary => b0.phi + mu * s.t,
        };
        if b.theta.sin() > 1e-6 {
            max_phase_error = max_phase_error.max(angle_difference(b.phi, expected).abs());
        }
    }
    let last = traj.last();
    let value = json!({
        "variant": variant,
        "steps": params.steps(),
        "samples": traj.samples.len(),
        "fixed_point": traj.fixed_point,
        "max_eigen_drift": traj.max_eigen_drift,
        "final_alignment": flow::alignment_norm(&last.h, &g)?,
        "final_energy": last.h.trace_product(&g)?,
        "minimal_energy": flow::minimal_energy(&last.h, &g)?,
        "max_error_vs_closed_form": max_matrix_error,
        "max_phase_error": max_phase_error,
    });
    art.json(summary, &value)
}

fn run_thermalize(cfg: &ExperimentConfig, art: &mut Artifacts) -> std::result::Result<(), RunError> {
    let p = canonical(cfg);
    let scheme: Scheme = cfg.raw("scheme").parse()?;
    let model = if cfg.raw("dim") == "3" {
        // spectrum nu * (-1, 0, 1) starting anti-aligned with G = (mu/2) diag(-1, 0, 1)
        let h0 = HermitianMatrix::diagonal(&[p.nu, 0.0, -p.nu]);
        let g = HermitianMatrix::diagonal(&[-0.5 * p.mu, 0.0, 0.5 * p.mu]);
        let noise = NoiseConfig::for_convention(p.convention, 2.0 * p.nu, cfg.seed);
        Thermalizer::new(h0, g, p.lambda, noise)?
    } else {
        let b0 = BlochDecomposition::new(p.u0, p.nu, cfg.real("theta0"), cfg.real("phi0"));
        Thermalizer::two_level(&b0, p.v, p.mu, p.lambda, p.convention, cfg.seed)?
    };
    let omega = model.omega()?;
    let t_final = if cfg.raw("t_final") == "auto" {
        10.0 / omega.max(model.noise.diffusion_d)
    } else {
        cfg.real("t_final")
    };
    let mut spec = EnsembleSpec::new(cfg.count("paths"), cfg.real("dt"), t_final, scheme);
    spec.record_stride = cfg.count("record_stride");
    spec.keep_trajectories = cfg.raw("keep_trajectories") == "true";
    let res = stochastic::run_ensemble(&model, &spec)?;

    if model.h0.dim() == 2 {
        art.create("paths.csv", |w| Ok(res.write_csv(w)?))?;
        // stationary law exp(-(omega / D) cos(theta))
        let a = omega / model.noise.diffusion_d;
        let summary = res.summary();
        let stationary = equilibrium::marginal_bin_probabilities(a, HISTOGRAM_BINS);
        let empirical = summary.histogram.probabilities();
        let edges = summary.histogram.edges();
        art.create("histogram.csv", |w| {
            writeln!(w, "cos_lo,cos_hi,empirical,stationary")?;
            for k in 0..HISTOGRAM_BINS {
                writeln!(w, "{},{},{},{}", edges[k], edges[k + 1], empirical[k], stationary[k])?;
            }
            Ok(())
        })?;
        let samples = res.cos_theta_samples();
        let value = json!({
            "scheme": scheme,
            "n_paths": spec.n_paths,
            "dt": spec.dt,
            "t_final": t_final,
            "omega": omega,
            "diffusion_d": model.noise.diffusion_d,
            "stationary_exponent": a,
            "mean_cos": summary.cos_theta,
            "mean_cos_closed_form": equilibrium::mean_cos_coupling(2.0 * a),
            "total_variation": total_variation(&empirical, &stationary),
            "ks_vs_stationary": ks_one_sample(&samples, |c| equilibrium::cos_theta_cdf(c, a)),
            "max_eigen_drift": summary.max_eigen_drift,
        });
        art.json("thermalize_summary.json", &value)
    } else {
        let energies = res.energies();
        art.create("energies.csv", |w| {
            writeln!(w, "path_id,tr_hg")?;
            for (i, e) in energies.iter().enumerate() {
                writeln!(w, "{i},{e}")?;
            }
            Ok(())
        })?;
        let value = json!({
            "scheme": scheme,
            "n_paths": spec.n_paths,
            "dt": spec.dt,
            "t_final": t_final,
            "effective_coupling": model.effective_coupling(),
            "mean_tr_hg": crate::stats::MeanEstimate::from_samples(&energies),
            "max_eigen_drift": res.max_eigen_drift(),
        });
        art.json("thermalize_summary.json", &value)
    }
}

fn run_equilibrium(cfg: &ExperimentConfig, art: &mut Artifacts) -> std::result::Result<(), RunError> {
    let p = canonical(cfg);
    p.validate()?;
    let n = cfg.count("n_theta").max(2);
    art.create("density.csv", |w| {
        writeln!(w, "theta,cos_theta,density")?;
        for k in 0..n {
            let t = PI * k as f64 / (n - 1) as f64;
            writeln!(w, "{},{},{}", t, t.cos(), equilibrium::density(t, &p))?;
        }
        Ok(())
    })?;
    let mut rng = crate::stats::stream_rng(cfg.seed, 0);
    let draws: Vec<f64> = (0..cfg.count("samples"))
        .map(|_| equilibrium::sample_cos_theta(&p, &mut rng))
        .collect();
    let mh = equilibrium::mean_hamiltonian(&p);
    let value = json!({
        "a": p.a(),
        "mean_cos": equilibrium::mean_cos(&p),
        "sampled_mean_cos": crate::stats::MeanEstimate::from_samples(&draws),
        "mean_hamiltonian": serde_json::to_value(&mh).map_err(io::Error::other)?,
    });
    art.json("equilibrium_summary.json", &value)
}

fn run_fpde(cfg: &ExperimentConfig, art: &mut Artifacts) -> std::result::Result<(), RunError> {
    let p = canonical(cfg);
    p.validate()?;
    let d = match p.convention {
        Convention::Section6 => 2.0 * p.nu,
        Convention::Canonical => 2.0,
    };
    if !(d > 0.0) {
        return Err(Error::invalid("nu", "must be positive for a diffusive solve").into());
    }
    let omega = p.lambda * p.nu * p.mu;
    let grid = FpGrid::at_cfl_limit(cfg.count("n_theta"), d)?;
    let q0 = match cfg.raw("init") {
        "uniform" => grid.uniform_theta(),
        _ => grid.bump(cfg.real("bump_center"), cfg.real("bump_width")),
    };
    let out = fokker_planck::evolve_to_stationarity(&q0, &grid, omega, d, cfg.real("tol"), cfg.count("max_steps"))?;
    art.create("profile.csv", |w| {
        Ok(fokker_planck::write_profile_csv(&out.profile, &grid, omega, d, w)?)
    })?;
    art.create("residuals.csv", |w| {
        Ok(fokker_planck::write_residuals_csv(
            &out.residual_history,
            grid.dt_pde,
            w,
        )?)
    })?;
    let discrete = fokker_planck::discrete_stationary_profile(&grid, omega, d);
    let value = json!({
        "n_theta": grid.n_theta,
        "dt_pde": grid.dt_pde,
        "omega": omega,
        "diffusion_d": d,
        "steps": out.steps,
        "t_reached": out.t_reached,
        "mass": grid.mass(&out.profile),
        "mean_cos": fokker_planck::mean_cos_of_profile(&out.profile, &grid),
        "mean_cos_closed_form": equilibrium::mean_cos_coupling(2.0 * omega / d),
        "l1_to_discrete_stationary": grid.l1_distance(&out.profile, &discrete),
    });
    art.json("fpde_summary.json", &value)
}

fn run_averages(cfg: &ExperimentConfig, art: &mut Artifacts) -> std::result::Result<(), RunError> {
    let p = canonical(cfg);
    let rows = disorder::average_curve(
        &p,
        cfg.real("t_min"),
        cfg.real("t_max"),
        cfg.count("points"),
        cfg.count("samples"),
        cfg.seed,
    )?;
    art.create("averages.csv", |w| Ok(disorder::write_average_csv(&rows, w)?))?;
    let t = ThermalParams::new(cfg.real("beta"))?;
    let g = HermitianMatrix::z_reference(p.v, p.mu);
    let mc = disorder::quenched_average_seeded(
        &g,
        &p,
        &t,
        cfg.count("samples").max(disorder::MIN_QUENCHED_SAMPLES),
        cfg.seed,
    )?;
    let value = json!({
        "beta": t.beta,
        "quenched_closed": disorder::quenched_closed_g(&p, &t)?,
        "quenched_mc": mc,
        "annealed_closed": disorder::annealed_closed_g(&p, &t)?,
        "annealed_numeric": disorder::annealed_average(&g, &p, &t)?,
        "quenched_zero_temperature": disorder::quenched_ground_limit(&p)?,
    });
    art.json("averages_summary.json", &value)
}

fn run_partition(cfg: &ExperimentConfig, art: &mut Artifacts) -> std::result::Result<(), RunError> {
    let rows = su3::partition_table(
        &cfg.triple("energies"),
        &cfg.triple("g_eigs"),
        &cfg.list("lambdas"),
        cfg.count("nodes"),
        cfg.count("samples"),
        cfg.seed,
    )?;
    art.create("partition.csv", |w| Ok(su3::write_partition_csv(&rows, w)?))
}

fn run_figures(cfg: &ExperimentConfig, art: &mut Artifacts) -> std::result::Result<(), RunError> {
    let which = cfg.raw("which");
    let all = which == "all";
    if all || which == "2" {
        let mut flow_cfg = cfg.clone();
        flow_cfg.params = Command::Flow
            .defaults()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        run_flow(&flow_cfg, art, "fig2_trajectory.csv", "fig2_summary.json")?;
    }
    let p = CanonicalParams::new(cfg.real("lambda"), cfg.real("mu"), cfg.real("nu")).with_convention(cfg.convention());
    if all || which == "3" {
        let rows = equilibrium::mean_cos_curve(&p, cfg.real("tau_min"), cfg.real("tau_max"), cfg.count("points"))?;
        art.create("fig3_mean_cos.csv", |w| Ok(equilibrium::write_mean_cos_csv(&rows, w)?))?;
    }
    if all || which == "4" {
        let rows = disorder::average_curve(
            &p,
            cfg.real("t_min"),
            cfg.real("t_max"),
            cfg.count("points"),
            cfg.count("samples"),
            cfg.seed,
        )?;
        art.create("fig4_averages.csv", |w| Ok(disorder::write_average_csv(&rows, w)?))?;
    }
    Ok(())
}

/// Reads and parses a config file.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(vec![format!("cannot read config `{}`: {e}", path.display())]))?;
    parse_config_text(&text)
}
