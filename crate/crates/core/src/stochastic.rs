//! Stochastic isospectral flow
//!
//! ```text
//! dH = -lambda [H, [H, G]] dt + [H, dOmega]
//! ```
//!
//! with `dOmega` an anti-Hermitian white-noise increment. For 2x2 Hamiltonians
//! the motion lives on the Bloch sphere; in coordinates
//!
//! ```text
//! dtheta = (omega sin(theta) + D cot(theta)) dt + sqrt(D) (dW1 + dW2)
//! dphi   = -sqrt(D) / sin(theta) (dW1 - dW2)
//! ```
//!
//! where `omega = lambda nu mu` and `D` is the diffusion coefficient of the
//! Fokker-Planck equation (`h^{theta theta} = 2D`). The `D cot(theta)` term is
//! the Christoffel correction `-1/2 Gamma^theta_{phi phi} h^{phi phi}` needed
//! when the covariant Ito equation is integrated in raw coordinates.
//!
//! Three schemes are provided: Euler-Maruyama in angles, Euler-Maruyama in the
//! pole-free coordinate `z = cos(theta)`, and an exactly isospectral
//! matrix scheme `H' = e^{-Xi} H e^{Xi}` that works for any N.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{eigensystem, to_bloch, traceless_generators, wrap_angle, BlochDecomposition, HermitianMatrix};
use crate::matrix::{ComplexMatrix, C64};
use crate::stats::{map_indexed, stream_rng, Histogram, MeanEstimate};
use crate::Convention;

/// Bins used for cos(theta) histograms in summaries.
pub const HISTOGRAM_BINS: usize = 50;
/// `dt <= STEP_GUARD / max(omega, D)`.
pub const STEP_GUARD: f64 = 0.01;

/// Point on the isospectral sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereState {
    pub theta: f64,
    pub phi: f64,
}

impl SphereState {
    /// Folds arbitrary angles onto `theta in [0, pi]`, `phi in [0, 2 pi)`.
    /// Passing through a pole shifts the azimuth by `pi`.
    pub fn new(theta: f64, phi: f64) -> Self {
        let mut t = theta.rem_euclid(TAU);
        let mut p = phi;
        if t > PI {
            t = TAU - t;
            p += PI;
        }
        Self {
            theta: t,
            phi: wrap_angle(p),
        }
    }

    pub fn from_z(z: f64, phi: f64) -> Self {
        Self::new(z.clamp(-1.0, 1.0).acos(), phi)
    }

    pub fn cos_theta(&self) -> f64 {
        self.theta.cos()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Fokker-Planck theta-theta diffusion coefficient `D`.
    pub diffusion_d: f64,
    pub convention: Convention,
    pub master_seed: u64,
}

impl NoiseConfig {
    /// `D = 2 nu`: stationary law `exp(-lambda mu cos(theta) / 2)`.
    pub fn section6(nu: f64, master_seed: u64) -> Self {
        Self {
            diffusion_d: 2.0 * nu,
            convention: Convention::Section6,
            master_seed,
        }
    }

    /// `D = 2`: stationary law `exp(-lambda tr(HG))`.
    pub fn canonical(master_seed: u64) -> Self {
        Self {
            diffusion_d: 2.0,
            convention: Convention::Canonical,
            master_seed,
        }
    }

    pub fn for_convention(convention: Convention, nu: f64, master_seed: u64) -> Self {
        match convention {
            Convention::Section6 => Self::section6(nu, master_seed),
            Convention::Canonical => Self::canonical(master_seed),
        }
    }

    /// Checks `D` against the convention; `nu` is the spectral spread of `H`.
    pub fn validate(&self, nu: f64) -> Result<()> {
        if !(self.diffusion_d > 0.0 && self.diffusion_d.is_finite()) {
            return Err(Error::invalid("diffusion_d", "must be positive and finite"));
        }
        let expected = match self.convention {
            Convention::Section6 => 2.0 * nu,
            Convention::Canonical => 2.0,
        };
        if (self.diffusion_d - expected).abs() > 1e-12 * expected.max(1.0) {
            return Err(Error::invalid(
                "diffusion_d",
                format!(
                    "convention {} requires D = {expected}, got {}",
                    self.convention, self.diffusion_d
                ),
            ));
        }
        Ok(())
    }

    /// Standard deviation per generator and unit time for the matrix scheme,
    /// `s = sqrt(D / 2)`: with `dOmega = i s sum_a T_a dW_a` the Bloch vector
    /// picks up tangential variance `4 s^2 = 2 D` per unit time.
    pub fn noise_scale(&self) -> f64 {
        (0.5 * self.diffusion_d).sqrt()
    }
}

/// Coefficients of the sphere SDE.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereDynamics {
    pub omega: f64,
    pub diffusion_d: f64,
}

/// Coordinate drift of theta, `omega sin(theta) + D cot(theta)`.
pub fn drift_theta(theta: f64, omega: f64, diffusion_d: f64) -> Result<f64> {
    let s = theta.sin();
    if !(theta > 0.0 && theta < PI) || s == 0.0 {
        return Err(Error::AtPole { theta });
    }
    Ok(omega * s + diffusion_d * theta.cos() / s)
}

/// Distance from a pole inside which [`step_angle`] switches to the pole chart.
pub const POLE_CHART_RADIUS: f64 = 0.25;

/// Euler-Maruyama step in `(theta, phi)` with reflection at the poles.
/// `dw1`, `dw2` are Wiener increments of variance `dt`.
///
/// Within [`POLE_CHART_RADIUS`] of a pole the same dynamics is stepped in
/// geodesic polar coordinates around that pole. A plain step there lets the
/// `D cot(theta)` drift overshoot by whole radians and biases the ensemble.
pub fn step_angle(s: SphereState, dynamics: &SphereDynamics, dt: f64, dw1: f64, dw2: f64) -> SphereState {
    if s.theta < POLE_CHART_RADIUS {
        return step_pole_chart(s.theta, s.phi, dynamics.omega, dynamics, dt, dw1, dw2, false);
    }
    if s.theta > PI - POLE_CHART_RADIUS {
        return step_pole_chart(PI - s.theta, s.phi, -dynamics.omega, dynamics, dt, dw1, dw2, true);
    }
    let (sin, cos) = s.theta.sin_cos();
    let drift = dynamics.omega * sin + dynamics.diffusion_d * cos / sin;
    let amp = dynamics.diffusion_d.sqrt();
    SphereState::new(
        s.theta + drift * dt + amp * (dw1 + dw2),
        s.phi - amp * (dw1 - dw2) / sin,
    )
}

/// One step for the geodesic distance `r` from a pole, written as a point
/// `r (cos phi, sin phi)` of the tangent plane. Planar Brownian motion already
/// carries the `D / r` radial drift, so only the regular remainder
/// `D (cot r - 1/r)` is added, and the angular noise is rescaled by `r / sin r`.
#[allow(clippy::too_many_arguments)]
fn step_pole_chart(
    r: f64,
    phi: f64,
    omega: f64,
    dynamics: &SphereDynamics,
    dt: f64,
    dw1: f64,
    dw2: f64,
    south: bool,
) -> SphereState {
    let d = dynamics.diffusion_d;
    let amp = d.sqrt();
    let cot_remainder = if r > 1e-4 { 1.0 / r.tan() - 1.0 / r } else { -r / 3.0 };
    let stretch = if r > 1e-8 { r / r.sin() } else { 1.0 };
    let radial_noise = amp * (dw1 + dw2);
    let dr = (omega * r.sin() + d * cot_remainder) * dt + if south { -radial_noise } else { radial_noise };
    let tangential = -amp * (dw1 - dw2) * stretch;
    let (sp, cp) = phi.sin_cos();
    let x = (r + dr) * cp - tangential * sp;
    let y = (r + dr) * sp + tangential * cp;
    let r_new = x.hypot(y);
    let phi_new = if r_new > 0.0 { y.atan2(x) } else { phi };
    let theta = if south { PI - r_new } else { r_new };
    SphereState::new(theta, phi_new)
}

/// Euler-Maruyama step for `z = cos(theta)`:
/// `dz = [-omega (1 - z^2) - 2 D z] dt + sqrt(2 D (1 - z^2)) dW`, clamped.
pub fn step_z(z: f64, dynamics: &SphereDynamics, dt: f64, dw: f64) -> f64 {
    let one_minus = (1.0 - z * z).max(0.0);
    let drift = -dynamics.omega * one_minus - 2.0 * dynamics.diffusion_d * z;
    (z + drift * dt + (2.0 * dynamics.diffusion_d * one_minus).sqrt() * dw).clamp(-1.0, 1.0)
}

/// Precomputed pieces of the matrix-conjugation scheme.
#[derive(Clone, Debug)]
pub struct MatrixStepper {
    g: ComplexMatrix,
    /// `i T_a` for the traceless Hermitian generators `T_a`.
    skew_generators: Vec<ComplexMatrix>,
    lambda: f64,
    noise_scale: f64,
}

impl MatrixStepper {
    pub fn new(g: &HermitianMatrix, lambda: f64, noise_scale: f64) -> Self {
        let skew_generators = traceless_generators(g.dim())
            .into_iter()
            .map(|t| t.as_matrix().scale(C64::new(0.0, 1.0)))
            .collect();
        Self {
            g: g.as_matrix().clone(),
            skew_generators,
            lambda,
            noise_scale,
        }
    }

    pub fn noise_dimension(&self) -> usize {
        self.skew_generators.len()
    }

    /// `H' = e^{-Xi} H e^{Xi}` with `Xi = -lambda [H, G] dt + s sum_a (i T_a) dw_a`.
    pub fn step(&self, h: &ComplexMatrix, dt: f64, dw: &[f64]) -> ComplexMatrix {
        debug_assert_eq!(dw.len(), self.skew_generators.len());
        let mut xi = h.commutator(&self.g);
        xi.scale_real_mut(-self.lambda * dt);
        for (gen, w) in self.skew_generators.iter().zip(dw) {
            xi.add_scaled(self.noise_scale * w, gen);
        }
        let u = xi.expm();
        u.adjoint_mul(&h.matmul(&u)).hermitian_part()
    }
}

/// One matrix-conjugation step. `dw` holds `N^2 - 1` increments of variance
/// `dt`, one per traceless generator.
pub fn step_matrix(
    h: &HermitianMatrix,
    g: &HermitianMatrix,
    lambda: f64,
    noise_scale: f64,
    dt: f64,
    dw: &[f64],
) -> Result<HermitianMatrix> {
    if h.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            left: h.dim(),
            right: g.dim(),
        });
    }
    let n = h.dim();
    if dw.len() != n * n - 1 {
        return Err(Error::invalid(
            "dw",
            format!("expected {} increments, got {}", n * n - 1, dw.len()),
        ));
    }
    let stepper = MatrixStepper::new(g, lambda, noise_scale);
    Ok(HermitianMatrix::hermitian_part_of(&stepper.step(h.as_matrix(), dt, dw)))
}

/// Gaussian increment with variance `dt`.
pub fn wiener_increment<R: Rng + ?Sized>(rng: &mut R, dt: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * dt.sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    AngleEm,
    ZEm,
    MatrixConjugation,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "angle_em" => Ok(Self::AngleEm),
            "z_em" => Ok(Self::ZEm),
            "matrix_conjugation" => Ok(Self::MatrixConjugation),
            other => Err(Error::invalid(
                "scheme",
                format!("expected angle_em|z_em|matrix_conjugation, got `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_paths: usize,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub record_stride: usize,
    /// Keep strided trajectories (sphere states) for every path.
    pub keep_trajectories: bool,
}

impl EnsembleSpec {
    pub fn new(n_paths: usize, dt: f64, t_final: f64, scheme: Scheme) -> Self {
        Self {
            n_paths,
            dt,
            t_final,
            scheme,
            record_stride: 1,
            keep_trajectories: false,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths", "must be at least 1"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::invalid("t_final", "must be positive and finite"));
        }
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride", "must be at least 1"));
        }
        Ok(())
    }
}

fn spread(h: &HermitianMatrix) -> Result<f64> {
    let e = eigensystem(h)?.values;
    Ok(e[e.len() - 1] - e[0])
}

/// Initial Hamiltonian, reference `G`, coupling and noise of one stochastic
/// flow.
#[derive(Clone, Debug)]
pub struct Thermalizer {
    pub h0: HermitianMatrix,
    pub g: HermitianMatrix,
    pub lambda: f64,
    pub noise: NoiseConfig,
}

impl Thermalizer {
    pub fn new(h0: HermitianMatrix, g: HermitianMatrix, lambda: f64, noise: NoiseConfig) -> Result<Self> {
        if h0.dim() != g.dim() {
            return Err(Error::DimensionMismatch {
                left: h0.dim(),
                right: g.dim(),
            });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", "must be positive and finite"));
        }
        noise.validate(spread(&h0)?)?;
        Ok(Self { h0, g, lambda, noise })
    }

    /// 2x2 model with `G = v/2 + mu/2 sigma_z`; the noise follows `convention`.
    pub fn two_level(
        initial: &BlochDecomposition,
        v: f64,
        mu: f64,
        lambda: f64,
        convention: Convention,
        master_seed: u64,
    ) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::invalid("mu", "must be positive"));
        }
        Self::new(
            initial.to_matrix(),
            HermitianMatrix::z_reference(v, mu),
            lambda,
            NoiseConfig::for_convention(convention, initial.nu, master_seed),
        )
    }

    /// `lambda * spread(H) * spread(G)`; equals `lambda nu mu` for 2x2.
    pub fn omega(&self) -> Result<f64> {
        Ok(self.lambda * spread(&self.h0)? * spread(&self.g)?)
    }

    /// Coupling `lambda'` of the stationary law `exp(-lambda' tr(HG))`, i.e.
    /// `2 lambda / D`.
    pub fn effective_coupling(&self) -> f64 {
        2.0 * self.lambda / self.noise.diffusion_d
    }

    /// Sphere coefficients; needs a 2x2 model with `G` diagonal and its
    /// larger eigenvalue first (axis along +z).
    pub fn sphere_dynamics(&self) -> Result<SphereDynamics> {
        if self.h0.dim() != 2 {
            return Err(Error::UnsupportedDimension {
                dim: self.h0.dim(),
                reason: "sphere schemes need a 2x2 Hamiltonian",
            });
        }
        if self.g.get(0, 1).norm() > 0.0 {
            return Err(Error::invalid("g", "sphere schemes need G diagonal (axis along z)"));
        }
        let mu = self.g.get(0, 0).re - self.g.get(1, 1).re;
        if !(mu > 0.0) {
            return Err(Error::invalid("g", "sphere schemes need G_00 > G_11"));
        }
        Ok(SphereDynamics {
            omega: self.lambda * spread(&self.h0)? * mu,
            diffusion_d: self.noise.diffusion_d,
        })
    }

    pub fn initial_sphere(&self) -> Result<SphereState> {
        let b = to_bloch(&self.h0)?;
        Ok(SphereState::new(b.theta, b.phi))
    }

    /// Largest admissible time step, `0.01 / max(omega, D)`.
    pub fn max_dt(&self) -> Result<f64> {
        Ok(STEP_GUARD / self.omega()?.max(self.noise.diffusion_d))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub theta: f64,
    pub phi: f64,
}

#[derive(Clone, Debug)]
pub struct PathOutcome {
    pub path_id: usize,
    /// Terminal sphere point (2x2 models only).
    pub terminal: Option<SphereState>,
    /// Terminal matrix (matrix scheme only).
    pub terminal_matrix: Option<HermitianMatrix>,
    /// `tr(H_T G)`.
    pub energy: f64,
    /// Largest eigenvalue deviation from the initial spectrum (matrix scheme).
    pub eigen_drift: f64,
    pub trajectory: Vec<TrajectoryPoint>,
}

#[derive(Clone, Debug)]
pub struct EnsembleResult {
    pub spec: EnsembleSpec,
    pub paths: Vec<PathOutcome>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleSummary {
    pub n_paths: usize,
    pub cos_theta: MeanEstimate,
    pub histogram: Histogram,
    pub max_eigen_drift: f64,
}

impl EnsembleResult {
    pub fn cos_theta_samples(&self) -> Vec<f64> {
        self.paths
            .iter()
            .filter_map(|p| p.terminal.map(|s| s.cos_theta()))
            .collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.energy).collect()
    }

    pub fn max_eigen_drift(&self) -> f64 {
        self.paths.iter().map(|p| p.eigen_drift).fold(0.0, f64::max)
    }

    pub fn summary(&self) -> EnsembleSummary {
        let cos = self.cos_theta_samples();
        EnsembleSummary {
            n_paths: self.paths.len(),
            cos_theta: MeanEstimate::from_samples(&cos),
            histogram: Histogram::new(-1.0, 1.0, HISTOGRAM_BINS, cos.iter().copied()),
            max_eigen_drift: self.max_eigen_drift(),
        }
    }

    /// CSV `path_id,t,theta,phi,cos_theta`: the recorded trajectories, or the
    /// terminal states when none were kept.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "path_id,t,theta,phi,cos_theta")?;
        for p in &self.paths {
            if p.trajectory.is_empty() {
                if let Some(s) = p.terminal {
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        p.path_id,
                        self.spec.t_final,
                        s.theta,
                        s.phi,
                        s.cos_theta()
                    )?;
                }
            } else {
                for q in &p.trajectory {
                    writeln!(w, "{},{},{},{},{}", p.path_id, q.t, q.theta, q.phi, q.theta.cos())?;
                }
            }
        }
        Ok(())
    }
}

/// Runs `spec.n_paths` independent paths. Path `i` draws from ChaCha stream
/// `i` under `noise.master_seed`, so results do not depend on how paths are
/// scheduled across threads.
pub fn run_ensemble(model: &Thermalizer, spec: &EnsembleSpec) -> Result<EnsembleResult> {
    spec.validate()?;
    let limit = model.max_dt()?;
    if spec.dt > limit {
        return Err(Error::StepGuard { dt: spec.dt, limit });
    }
    let sphere = match spec.scheme {
        Scheme::AngleEm | Scheme::ZEm => Some(model.sphere_dynamics()?),
        Scheme::MatrixConjugation => None,
    };
    let bloch0 = if model.h0.dim() == 2 {
        Some(to_bloch(&model.h0)?)
    } else {
        None
    };
    let stepper = MatrixStepper::new(&model.g, model.lambda, model.noise.noise_scale());
    let eig0 = eigensystem(&model.h0)?.values;

    let run_path = |i: usize| -> Result<PathOutcome> {
        let mut rng = stream_rng(model.noise.master_seed, i as u64);
        match spec.scheme {
            Scheme::AngleEm | Scheme::ZEm => {
                let dynamics = sphere.expect("checked above");
                let b = bloch0.expect("2x2 checked above");
                Ok(run_sphere_path(i, model, spec, &dynamics, &b, &mut rng))
            }
            Scheme::MatrixConjugation => run_matrix_path(i, model, spec, &stepper, &eig0, &mut rng),
        }
    };
    let paths = map_indexed(spec.n_paths, run_path)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleResult { spec: *spec, paths })
}

fn sphere_energy(b: &BlochDecomposition, s: &SphereState, g: &HermitianMatrix) -> f64 {
    BlochDecomposition::new(b.u, b.nu, s.theta, s.phi)
        .to_matrix()
        .trace_product(g)
        .expect("2x2")
}

fn run_sphere_path<R: Rng>(
    id: usize,
    model: &Thermalizer,
    spec: &EnsembleSpec,
    dynamics: &SphereDynamics,
    b: &BlochDecomposition,
    rng: &mut R,
) -> PathOutcome {
    let steps = spec.steps();
    let dt = spec.dt;
    let mut s = SphereState::new(b.theta, b.phi);
    let mut z = s.cos_theta();
    let mut trajectory = Vec::new();
    if spec.keep_trajectories {
        trajectory.push(TrajectoryPoint {
            t: 0.0,
            theta: s.theta,
            phi: s.phi,
        });
    }
    for k in 1..=steps {
        match spec.scheme {
            Scheme::AngleEm => {
                let dw1 = wiener_increment(rng, dt);
                let dw2 = wiener_increment(rng, dt);
                s = step_angle(s, dynamics, dt, dw1, dw2);
            }
            _ => {
                let dw = wiener_increment(rng, dt);
                let dw_phi = wiener_increment(rng, dt);
                let sin = (1.0 - z * z).max(0.0).sqrt().max(1e-12);
                z = step_z(z, dynamics, dt, dw);
                let phi = s.phi - (2.0 * dynamics.diffusion_d).sqrt() * dw_phi / sin;
                s = SphereState::from_z(z, phi);
            }
        }
        if spec.keep_trajectories && (k % spec.record_stride == 0 || k == steps) {
            trajectory.push(TrajectoryPoint {
                t: k as f64 * dt,
                theta: s.theta,
                phi: s.phi,
            });
        }
    }
    PathOutcome {
        path_id: id,
        terminal: Some(s),
        terminal_matrix: None,
        energy: sphere_energy(b, &s, &model.g),
        eigen_drift: 0.0,
        trajectory,
    }
}

fn max_drift(h: &ComplexMatrix, eig0: &[f64]) -> Result<f64> {
    let e = eigensystem(&HermitianMatrix::hermitian_part_of(h))?.values;
    Ok(e.iter().zip(eig0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn run_matrix_path<R: Rng>(
    id: usize,
    model: &Thermalizer,
    spec: &EnsembleSpec,
    stepper: &MatrixStepper,
    eig0: &[f64],
    rng: &mut R,
) -> Result<PathOutcome> {
    let steps = spec.steps();
    let dt = spec.dt;
    let n = model.h0.dim();
    let mut h = model.h0.as_matrix().clone();
    let mut dw = vec![0.0; stepper.noise_dimension()];
    let mut trajectory = Vec::new();
    let mut drift: f64 = 0.0;
    let sphere_point = |h: &ComplexMatrix| -> Result<SphereState> {
        let b = to_bloch(&HermitianMatrix::hermitian_part_of(h))?;
        Ok(SphereState::new(b.theta, b.phi))
    };
    if spec.keep_trajectories && n == 2 {
        let s = sphere_point(&h)?;
        trajectory.push(TrajectoryPoint {
            t: 0.0,
            theta: s.theta,
            phi: s.phi,
        });
    }
    for k in 1..=steps {
        for w in dw.iter_mut() {
            *w = wiener_increment(rng, dt);
        }
        h = stepper.step(&h, dt, &dw);
        if spec.keep_trajectories && (k % spec.record_stride == 0 || k == steps) {
            drift = drift.max(max_drift(&h, eig0)?);
            if n == 2 {
                let s = sphere_point(&h)?;
                trajectory.push(TrajectoryPoint {
                    t: k as f64 * dt,
                    theta: s.theta,
                    phi: s.phi,
                });
            }
        }
    }
    drift = drift.max(max_drift(&h, eig0)?);
    let terminal_matrix = HermitianMatrix::hermitian_part_of(&h);
    let terminal = if n == 2 { Some(sphere_point(&h)?) } else { None };
    Ok(PathOutcome {
        path_id: id,
        terminal,
        energy: terminal_matrix.trace_product(&model.g)?,
        terminal_matrix: Some(terminal_matrix),
        eigen_drift: drift,
        trajectory,
    })
}
