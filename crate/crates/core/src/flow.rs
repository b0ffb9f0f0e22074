//! Deterministic double-bracket flow
//!
//! ```text
//! dH/dt = -lambda [H, [H, G]]                 (pure gradient)
//! dH/dt = -i [H, G] - lambda [H, [H, G]]      (with unitary term)
//! ```
//!
//! integrated with classical RK4, plus the exact solution of the 2x2 case.
//! The flow is isospectral and decreases the energy `tr(HG)`; RK4 does not
//! preserve the spectrum exactly, so eigenvalue drift is monitored and
//! reported.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{self, eigensystem, to_bloch, BlochDecomposition, HermitianMatrix, DEFAULT_GAP_TOL};
use crate::matrix::{ComplexMatrix, C64, I};

/// Upper bound on `dt * lambda * |G| * |H0|` (spectral norms).
pub const STABILITY_LIMIT: f64 = 0.1;
/// Allowed per-step increase of `tr(HG)` before integration aborts.
pub const MONOTONE_TOL: f64 = 1e-12;
const FIXED_POINT_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowVariant {
    #[default]
    PureGradient,
    WithUnitary,
}

impl std::str::FromStr for FlowVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure_gradient" => Ok(Self::PureGradient),
            "with_unitary" => Ok(Self::WithUnitary),
            other => Err(Error::invalid(
                "variant",
                format!("expected pure_gradient|with_unitary, got `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub lambda: f64,
    pub dt: f64,
    pub t_final: f64,
    pub variant: FlowVariant,
    /// Record every `stride`-th step (the final state is always recorded).
    pub stride: usize,
}

impl FlowParams {
    pub fn new(lambda: f64, dt: f64, t_final: f64) -> Self {
        Self {
            lambda,
            dt,
            t_final,
            variant: FlowVariant::PureGradient,
            stride: 1,
        }
    }

    pub fn with_variant(mut self, variant: FlowVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda", "must be positive and finite"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::invalid("t_final", "must be positive and finite"));
        }
        if self.dt > self.t_final {
            return Err(Error::invalid("dt", "must not exceed t_final"));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride", "must be at least 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

fn check_dims(h: &HermitianMatrix, g: &HermitianMatrix) -> Result<()> {
    if h.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            left: h.dim(),
            right: g.dim(),
        });
    }
    Ok(())
}

/// Right-hand side of the flow for the given variant.
pub fn flow_rhs(h: &ComplexMatrix, g: &ComplexMatrix, lambda: f64, variant: FlowVariant) -> ComplexMatrix {
    let x = h.commutator(g);
    let mut rhs = h.commutator(&x).scale_real(-lambda);
    if variant == FlowVariant::WithUnitary {
        rhs = &rhs - &x.scale(I);
    }
    rhs
}

fn rk4(h: &ComplexMatrix, g: &ComplexMatrix, lambda: f64, variant: FlowVariant, dt: f64) -> ComplexMatrix {
    let f = |m: &ComplexMatrix| flow_rhs(m, g, lambda, variant);
    let k1 = f(h);
    let k2 = f(&(h + &k1.scale_real(0.5 * dt)));
    let k3 = f(&(h + &k2.scale_real(0.5 * dt)));
    let k4 = f(&(h + &k3.scale_real(dt)));
    let mut incr = k1;
    incr += &k2.scale_real(2.0);
    incr += &k3.scale_real(2.0);
    incr += &k4;
    (h + &incr.scale_real(dt / 6.0)).hermitian_part()
}

/// One RK4 step of size `p.dt`. Degenerate `H` is rejected because the
/// gradient flow's fixed points are then not isolated.
pub fn flow_step(h: &HermitianMatrix, g: &HermitianMatrix, p: &FlowParams) -> Result<HermitianMatrix> {
    check_dims(h, g)?;
    let gap = eigensystem(h)?.min_gap();
    if gap <= DEFAULT_GAP_TOL {
        return Err(Error::Degenerate {
            gap,
            tol: DEFAULT_GAP_TOL,
        });
    }
    let next = rk4(h.as_matrix(), g.as_matrix(), p.lambda, p.variant, p.dt);
    Ok(HermitianMatrix::hermitian_part_of(&next))
}

/// `|[H, G]|_F`.
pub fn alignment_norm(h: &HermitianMatrix, g: &HermitianMatrix) -> Result<f64> {
    Ok(hermitian::commutator(h, g)?.frobenius_norm())
}

/// Classification of an initial state that already commutes with `G`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPoint {
    /// `tr(HG)` is minimal over the isospectral manifold.
    Stable,
    /// Commutes with `G` but `tr(HG)` is not minimal (e.g. the anti-aligned
    /// north pole in 2x2). The flow stays here; no perturbation is applied.
    Unstable,
}

#[derive(Clone, Debug)]
pub struct FlowSample {
    pub t: f64,
    pub h: HermitianMatrix,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<FlowSample>,
    pub fixed_point: Option<FixedPoint>,
    /// Largest eigenvalue deviation from the initial spectrum over the
    /// recorded samples.
    pub max_eigen_drift: f64,
}

impl Trajectory {
    pub fn last(&self) -> &FlowSample {
        self.samples.last().expect("trajectory is never empty")
    }
}

/// Smallest `tr(HG)` over the isospectral orbit of `H`: eigenvalues of `H`
/// ascending paired with eigenvalues of `G` descending.
pub fn minimal_energy(h: &HermitianMatrix, g: &HermitianMatrix) -> Result<f64> {
    check_dims(h, g)?;
    let e = eigensystem(h)?.values;
    let gv = eigensystem(g)?.values;
    Ok(e.iter().zip(gv.iter().rev()).map(|(a, b)| a * b).sum())
}

/// Largest `dt * lambda * |G| * |H0|` allowed by [`STABILITY_LIMIT`].
pub fn stability_product(h0: &HermitianMatrix, g: &HermitianMatrix, p: &FlowParams) -> Result<f64> {
    Ok(p.dt * p.lambda * g.operator_norm()? * h0.operator_norm()?)
}

/// Integrates from `h0` to `p.t_final`, recording every `p.stride` steps.
///
/// Aborts if `tr(HG)` increases by more than [`MONOTONE_TOL`] in a step.
pub fn integrate(h0: &HermitianMatrix, g: &HermitianMatrix, p: &FlowParams) -> Result<Trajectory> {
    check_dims(h0, g)?;
    p.validate()?;
    let product = stability_product(h0, g, p)?;
    if product > STABILITY_LIMIT {
        return Err(Error::StabilityGuard {
            product,
            limit: STABILITY_LIMIT,
        });
    }
    let eig0 = eigensystem(h0)?;
    if eig0.min_gap() <= DEFAULT_GAP_TOL {
        return Err(Error::Degenerate {
            gap: eig0.min_gap(),
            tol: DEFAULT_GAP_TOL,
        });
    }

    let steps = p.steps();
    let mut samples = vec![FlowSample { t: 0.0, h: h0.clone() }];

    if alignment_norm(h0, g)? < FIXED_POINT_TOL {
        let energy = h0.trace_product(g)?;
        let min = minimal_energy(h0, g)?;
        let scale = h0.frobenius_norm() * g.frobenius_norm();
        let kind = if energy <= min + 1e-12 * scale.max(1.0) {
            FixedPoint::Stable
        } else {
            FixedPoint::Unstable
        };
        for k in (p.stride..=steps).step_by(p.stride) {
            samples.push(FlowSample {
                t: k as f64 * p.dt,
                h: h0.clone(),
            });
        }
        if !steps.is_multiple_of(p.stride) {
            samples.push(FlowSample {
                t: steps as f64 * p.dt,
                h: h0.clone(),
            });
        }
        return Ok(Trajectory {
            samples,
            fixed_point: Some(kind),
            max_eigen_drift: 0.0,
        });
    }

    let gm = g.as_matrix();
    let mut h = h0.as_matrix().clone();
    let mut energy = h0.trace_product(g)?;
    let mut max_drift: f64 = 0.0;
    for k in 1..=steps {
        h = rk4(&h, gm, p.lambda, p.variant, p.dt);
        let current = HermitianMatrix::hermitian_part_of(&h);
        let e = current.trace_product(g)?;
        if e - energy > MONOTONE_TOL {
            return Err(Error::MonotonicityViolated {
                step: k,
                increase: e - energy,
            });
        }
        energy = e;
        if k % p.stride == 0 || k == steps {
            let eig = eigensystem(&current)?;
            let drift = eig
                .values
                .iter()
                .zip(&eig0.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            max_drift = max_drift.max(drift);
            samples.push(FlowSample {
                t: k as f64 * p.dt,
                h: current,
            });
        }
    }
    Ok(Trajectory {
        samples,
        fixed_point: None,
        max_eigen_drift: max_drift,
    })
}

/// Exact solution of the 2x2 pure-gradient flow with reference
/// `G = v/2 + mu/2 sigma_z`:
///
/// ```text
/// H_t = 1/2 [[u0 - nu tanh(w t - c0),          nu sech(w t - c0) e^{i phi0}],
///            [nu sech(w t - c0) e^{-i phi0},   u0 + nu tanh(w t - c0)      ]]
/// ```
///
/// with `w = lambda nu mu` and `c0 = artanh(cos theta0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analytic2x2Solution {
    pub u0: f64,
    pub nu: f64,
    pub c0: f64,
    pub phi0: f64,
    pub omega: f64,
}

impl Analytic2x2Solution {
    pub fn new(initial: &BlochDecomposition, lambda: f64, mu: f64) -> Result<Self> {
        if !(initial.theta > 0.0 && initial.theta < std::f64::consts::PI) {
            return Err(Error::invalid(
                "theta0",
                "must lie strictly inside (0, pi) for a finite c0",
            ));
        }
        if !(initial.nu > 0.0) || !(lambda > 0.0) || !(mu > 0.0) {
            return Err(Error::invalid("omega", "lambda, nu and mu must be positive"));
        }
        Ok(Self {
            u0: initial.u,
            nu: initial.nu,
            c0: initial.theta.cos().atanh(),
            phi0: initial.phi,
            omega: lambda * initial.nu * mu,
        })
    }

    pub fn theta_at(&self, t: f64) -> f64 {
        let x = self.omega * t - self.c0;
        (1.0 / x.cosh()).atan2(-x.tanh())
    }

    pub fn at(&self, t: f64) -> HermitianMatrix {
        self.at_with_phase(t, self.phi0)
    }

    /// Solution of the flow with the unitary term: identical polar motion,
    /// azimuth `phi0 + mu t`.
    pub fn at_with_unitary(&self, t: f64, mu: f64) -> HermitianMatrix {
        self.at_with_phase(t, self.phi0 + mu * t)
    }

    fn at_with_phase(&self, t: f64, phi: f64) -> HermitianMatrix {
        let x = self.omega * t - self.c0;
        let tanh = x.tanh();
        let sech = 1.0 / x.cosh();
        let off = C64::from_polar(0.5 * self.nu * sech, phi);
        let m = ComplexMatrix::from_row_major(vec![
            C64::new(0.5 * (self.u0 - self.nu * tanh), 0.0),
            off,
            off.conj(),
            C64::new(0.5 * (self.u0 + self.nu * tanh), 0.0),
        ])
        .expect("2x2");
        HermitianMatrix::hermitian_part_of(&m)
    }
}

pub fn analytic_2x2(s: &Analytic2x2Solution, t: f64) -> HermitianMatrix {
    s.at(t)
}

/// CSV with columns `t`, row-major `hIJ_re,hIJ_im`, then `theta,phi` for 2x2
/// trajectories, then `eig1..eigN`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    let n = traj.samples[0].h.dim();
    let mut header = vec!["t".to_string()];
    for i in 0..n {
        for j in 0..n {
            header.push(format!("h{i}{j}_re"));
            header.push(format!("h{i}{j}_im"));
        }
    }
    if n == 2 {
        header.push("theta".into());
        header.push("phi".into());
    }
    header.extend((1..=n).map(|k| format!("eig{k}")));
    writeln!(w, "{}", header.join(","))?;

    for s in &traj.samples {
        let mut row = vec![format!("{}", s.t)];
        for i in 0..n {
            for j in 0..n {
                let z = s.h.get(i, j);
                row.push(format!("{}", z.re));
                row.push(format!("{}", z.im));
            }
        }
        if n == 2 {
            let b = to_bloch(&s.h).map_err(io::Error::other)?;
            row.push(format!("{}", b.theta));
            row.push(format!("{}", b.phi));
        }
        let eig = eigensystem(&s.h).map_err(io::Error::other)?;
        row.extend(eig.values.iter().map(|e| format!("{e}")));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
