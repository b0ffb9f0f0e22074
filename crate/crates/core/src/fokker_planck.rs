//! Axisymmetric Fokker-Planck equation on the sphere.
//!
//! The unknown `q(theta)` is the probability density with respect to
//! `dtheta` (so `q = (pi / 2) sin(theta) rho` for a density `rho` w.r.t.
//! `dV`). It obeys the conservative equation
//!
//! ```text
//! dq/dt = -d/dtheta [ (omega sin + D cot) q ] + D d2q/dtheta2
//!       = d/dtheta [ D w d/dtheta (q / w) ],   w = sin(theta) exp(-k (1 + cos(theta))),  k = omega / D
//! ```
//!
//! The second form is discretized on a cell-centred grid with face fluxes
//! `F = -D w_face (q_{i+1}/w_{i+1} - q_i/w_i) / dtheta`, so the discrete
//! stationary state is exactly `q_i ∝ w(theta_i)`, mass is conserved to
//! rounding and the poles carry zero flux.

use std::f64::consts::PI;
use std::io::{self, Write};

use serde::Serialize;

use crate::equilibrium::density_a;
use crate::error::{Error, Result};

pub const MIN_CELLS: usize = 64;
/// `dt <= CFL_FACTOR * dtheta^2 / (2 D)`.
pub const CFL_FACTOR: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FpGrid {
    pub n_theta: usize,
    pub dt_pde: f64,
}

impl FpGrid {
    pub fn new(n_theta: usize, dt_pde: f64) -> Result<Self> {
        if n_theta < MIN_CELLS {
            return Err(Error::invalid(
                "n_theta",
                format!("must be at least {MIN_CELLS}, got {n_theta}"),
            ));
        }
        if !(dt_pde > 0.0 && dt_pde.is_finite()) {
            return Err(Error::invalid("dt_pde", "must be positive and finite"));
        }
        Ok(Self { n_theta, dt_pde })
    }

    /// Grid running at the largest step the guard admits for diffusion `d`.
    pub fn at_cfl_limit(n_theta: usize, d: f64) -> Result<Self> {
        let dth = PI / n_theta as f64;
        Self::new(n_theta, CFL_FACTOR * dth * dth / (2.0 * d))
    }

    pub fn dtheta(&self) -> f64 {
        PI / self.n_theta as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dtheta()
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n_theta).map(|i| self.theta(i)).collect()
    }

    pub fn cfl_limit(&self, d: f64) -> f64 {
        CFL_FACTOR * self.dtheta().powi(2) / (2.0 * d)
    }

    pub fn mass(&self, q: &[f64]) -> f64 {
        q.iter().sum::<f64>() * self.dtheta()
    }

    pub fn l1_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * self.dtheta()
    }

    fn normalized(&self, mut q: Vec<f64>) -> Vec<f64> {
        let m = self.mass(&q);
        for x in &mut q {
            *x /= m;
        }
        q
    }

    /// Constant density in `theta`.
    pub fn uniform_theta(&self) -> Vec<f64> {
        vec![1.0 / PI; self.n_theta]
    }

    /// Normalized Gaussian bump in `theta`.
    pub fn bump(&self, center: f64, width: f64) -> Vec<f64> {
        self.normalized(
            self.thetas()
                .into_iter()
                .map(|t| (-0.5 * ((t - center) / width).powi(2)).exp())
                .collect(),
        )
    }
}

fn weight(theta: f64, k: f64) -> f64 {
    theta.sin() * (-k * (1.0 + theta.cos())).exp()
}

/// Closed-form stationary density `k sin(theta) e^{-k cos(theta)} / (2 sinh k)`
/// sampled at the cell centres.
pub fn stationary_profile(grid: &FpGrid, omega: f64, d: f64) -> Vec<f64> {
    let k = omega / d;
    grid.thetas()
        .into_iter()
        .map(|t| 0.5 * PI * t.sin() * density_a(t.cos(), k))
        .collect()
}

/// Exact fixed point of [`fp_step`]: `w(theta_i)` normalized on the grid.
pub fn discrete_stationary_profile(grid: &FpGrid, omega: f64, d: f64) -> Vec<f64> {
    let k = omega / d;
    grid.normalized(grid.thetas().into_iter().map(|t| weight(t, k)).collect())
}

/// Precomputed conductances of the flux-form operator.
#[derive(Clone, Debug)]
pub struct FpOperator {
    grid: FpGrid,
    d: f64,
    inv_w: Vec<f64>,
    /// `D w_{i+1/2} / dtheta^2` for interior faces `i = 0..n-1`.
    face: Vec<f64>,
}

impl FpOperator {
    pub fn new(grid: &FpGrid, omega: f64, d: f64) -> Result<Self> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::invalid("D", "must be positive and finite"));
        }
        if !omega.is_finite() {
            return Err(Error::invalid("omega", "must be finite"));
        }
        let limit = grid.cfl_limit(d);
        if grid.dt_pde > limit {
            return Err(Error::Cfl { dt: grid.dt_pde, limit });
        }
        let k = omega / d;
        let dth = grid.dtheta();
        let n = grid.n_theta;
        // rescale so the largest weight is 1, avoiding underflow for large k
        let shift = if k > 0.0 { 0.0 } else { -2.0 * k };
        let w = |t: f64| weight(t, k) * (-shift).exp();
        let inv_w = (0..n).map(|i| 1.0 / w(grid.theta(i))).collect();
        let face = (1..n).map(|i| d * w(i as f64 * dth) / (dth * dth)).collect();
        Ok(Self {
            grid: *grid,
            d,
            inv_w,
            face,
        })
    }

    pub fn grid(&self) -> &FpGrid {
        &self.grid
    }

    pub fn diffusion(&self) -> f64 {
        self.d
    }

    /// `dq/dt` of the conservative equation.
    pub fn rhs(&self, q: &[f64], out: &mut [f64]) {
        let n = q.len();
        out.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n - 1 {
            // flux through face i+1/2 divided by dtheta
            let f = -self.face[i] * (q[i + 1] * self.inv_w[i + 1] - q[i] * self.inv_w[i]);
            out[i] -= f;
            out[i + 1] += f;
        }
    }

    /// Forward-Euler step in place; returns `||q_new - q_old||_1` (w.r.t. dtheta).
    pub fn step(&self, q: &mut [f64], scratch: &mut [f64]) -> f64 {
        self.rhs(q, scratch);
        let dt = self.grid.dt_pde;
        let mut change = 0.0;
        for (x, r) in q.iter_mut().zip(scratch.iter()) {
            *x += dt * r;
            change += (dt * r).abs();
        }
        change * self.grid.dtheta()
    }
}

fn check_profile(q: &[f64], grid: &FpGrid) -> Result<()> {
    if q.len() != grid.n_theta {
        return Err(Error::DimensionMismatch {
            left: q.len(),
            right: grid.n_theta,
        });
    }
    if q.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid("q", "density must be finite and nonnegative"));
    }
    let m = grid.mass(q);
    if (m - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("q", format!("mass must be 1, got {m}")));
    }
    Ok(())
}

/// One explicit step of the conservative equation.
pub fn fp_step(q: &[f64], grid: &FpGrid, omega: f64, d: f64) -> Result<Vec<f64>> {
    check_profile(q, grid)?;
    let op = FpOperator::new(grid, omega, d)?;
    let mut out = q.to_vec();
    let mut scratch = vec![0.0; q.len()];
    op.step(&mut out, &mut scratch);
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct Stationarity {
    pub profile: Vec<f64>,
    pub t_reached: f64,
    pub steps: usize,
    /// `(step, ||q_{k+1} - q_k||_1 / dt)` sampled along the run.
    pub residual_history: Vec<(usize, f64)>,
}

/// Residuals are recorded this often (and at the final step).
pub const RESIDUAL_EVERY: usize = 1000;

/// Steps until `||q_{k+1} - q_k||_1 / dt < tol`.
pub fn evolve_to_stationarity(
    q0: &[f64],
    grid: &FpGrid,
    omega: f64,
    d: f64,
    tol: f64,
    max_steps: usize,
) -> Result<Stationarity> {
    check_profile(q0, grid)?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let op = FpOperator::new(grid, omega, d)?;
    let mut q = q0.to_vec();
    let mut scratch = vec![0.0; q.len()];
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;
    for k in 1..=max_steps {
        residual = op.step(&mut q, &mut scratch) / grid.dt_pde;
        if residual < tol {
            history.push((k, residual));
            return Ok(Stationarity {
                profile: q,
                t_reached: k as f64 * grid.dt_pde,
                steps: k,
                residual_history: history,
            });
        }
        if k % RESIDUAL_EVERY == 0 {
            history.push((k, residual));
        }
    }
    Err(Error::NotConverged {
        steps: max_steps,
        last: residual,
        tol,
        residual_history: history,
    })
}

/// `<cos(theta)>` of a profile (midpoint rule).
pub fn mean_cos_of_profile(q: &[f64], grid: &FpGrid) -> f64 {
    q.iter().enumerate().map(|(i, x)| x * grid.theta(i).cos()).sum::<f64>() * grid.dtheta()
}

/// Mass of a piecewise-constant profile in `bins` equal `cos(theta)` bins on
/// `[-1, 1]`, using exact overlaps of each cell with each bin.
pub fn bin_into_cos(q: &[f64], grid: &FpGrid, bins: usize) -> Vec<f64> {
    let dth = grid.dtheta();
    let mut out = vec![0.0; bins];
    for (b, slot) in out.iter_mut().enumerate() {
        let c_lo = -1.0 + 2.0 * b as f64 / bins as f64;
        let c_hi = -1.0 + 2.0 * (b + 1) as f64 / bins as f64;
        // cos is decreasing: the bin is theta in [acos(c_hi), acos(c_lo)]
        let (t_lo, t_hi) = (c_hi.clamp(-1.0, 1.0).acos(), c_lo.clamp(-1.0, 1.0).acos());
        let first = ((t_lo / dth).floor() as usize).min(grid.n_theta - 1);
        let last = ((t_hi / dth).floor() as usize).min(grid.n_theta - 1);
        for (i, &qi) in q.iter().enumerate().take(last + 1).skip(first) {
            let a = (i as f64 * dth).max(t_lo);
            let e = ((i + 1) as f64 * dth).min(t_hi);
            if e > a {
                *slot += qi * (e - a);
            }
        }
    }
    out
}

/// Finite-difference evaluation of the conservative operator
/// `-d/dtheta[(omega sin + D cot) q] + D q''` at interior nodes (ends are 0).
pub fn conservative_operator(q: &[f64], grid: &FpGrid, omega: f64, d: f64) -> Vec<f64> {
    let h = grid.dtheta();
    let flux = |i: usize| {
        let t = grid.theta(i);
        (omega * t.sin() + d * t.cos() / t.sin()) * q[i]
    };
    let n = q.len();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = -(flux(i + 1) - flux(i - 1)) / (2.0 * h) + d * (q[i + 1] - 2.0 * q[i] + q[i - 1]) / (h * h);
    }
    out
}

/// Finite-difference evaluation of the non-conservative operator
/// `-omega (cos + sin d/dtheta) rho + D d2rho/dtheta2` acting on a density
/// `rho` w.r.t. `dV` (`D = 2 nu` in the section6 convention). It shares the
/// stationary solution `exp(-(omega/D) cos(theta))` but does not conserve
/// probability.
pub fn printed_operator(rho: &[f64], grid: &FpGrid, omega: f64, d: f64) -> Vec<f64> {
    let h = grid.dtheta();
    let n = rho.len();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let (s, c) = grid.theta(i).sin_cos();
        let d1 = (rho[i + 1] - rho[i - 1]) / (2.0 * h);
        let d2 = (rho[i + 1] - 2.0 * rho[i] + rho[i - 1]) / (h * h);
        out[i] = -omega * (c * rho[i] + s * d1) + d * d2;
    }
    out
}

pub fn write_profile_csv<W: Write>(q: &[f64], grid: &FpGrid, omega: f64, d: f64, mut w: W) -> io::Result<()> {
    let stat = stationary_profile(grid, omega, d);
    writeln!(w, "theta,q,q_stationary,abs_error")?;
    for (i, (x, s)) in q.iter().zip(&stat).enumerate() {
        writeln!(w, "{},{},{},{}", grid.theta(i), x, s, (x - s).abs())?;
    }
    Ok(())
}

pub fn write_residuals_csv<W: Write>(history: &[(usize, f64)], dt: f64, mut w: W) -> io::Result<()> {
    writeln!(w, "step,t,residual")?;
    for (k, r) in history {
        writeln!(w, "{},{},{}", k, *k as f64 * dt, r)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_guards() {
        assert!(FpGrid::new(32, 1e-5).is_err());
        let grid = FpGrid::new(64, 1.0).unwrap();
        assert!(matches!(FpOperator::new(&grid, 1.0, 1.0), Err(Error::Cfl { .. })));
    }

    #[test]
    fn discrete_stationary_is_a_fixed_point() {
        let grid = FpGrid::at_cfl_limit(128, 2.0).unwrap();
        let q = discrete_stationary_profile(&grid, 4.0, 2.0);
        let next = fp_step(&q, &grid, 4.0, 2.0).unwrap();
        assert!(grid.l1_distance(&q, &next) < 1e-12);
    }

    #[test]
    fn stationary_profile_is_normalized() {
        let grid = FpGrid::at_cfl_limit(256, 2.0).unwrap();
        for omega in [0.0, 1.0, 10.0, 60.0] {
            let m = grid.mass(&stationary_profile(&grid, omega, 2.0));
            // midpoint rule: error grows with the sharpness k = omega / D
            assert!((m - 1.0).abs() < 1e-5 * (1.0 + omega * omega), "omega={omega} mass={m}");
        }
    }

    #[test]
    fn conserves_mass() {
        let grid = FpGrid::at_cfl_limit(64, 2.0).unwrap();
        let op = FpOperator::new(&grid, 2.0, 2.0).unwrap();
        let mut q = grid.bump(1.0, 0.1);
        let mut scratch = vec![0.0; q.len()];
        for _ in 0..10_000 {
            op.step(&mut q, &mut scratch);
        }
        assert!((grid.mass(&q) - 1.0).abs() < 1e-12);
        assert!(q.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn both_operators_annihilate_the_stationary_law() {
        let grid = FpGrid::at_cfl_limit(512, 2.0).unwrap();
        let (omega, d) = (2.0, 2.0);
        let k = omega / d;
        let q = stationary_profile(&grid, omega, d);
        let rho: Vec<f64> = grid.thetas().iter().map(|t| (-k * t.cos()).exp()).collect();
        let lq = conservative_operator(&q, &grid, omega, d);
        let lr = printed_operator(&rho, &grid, omega, d);
        let inner = 8..grid.n_theta - 8;
        let max = |v: &[f64]| v[inner.clone()].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(max(&lq) < 1e-3, "{}", max(&lq));
        assert!(max(&lr) < 1e-3, "{}", max(&lr));

        // a profile off equilibrium is not annihilated
        let q_off = grid.bump(1.0, 0.3);
        assert!(max(&conservative_operator(&q_off, &grid, omega, d)) > 0.1);
    }

    #[test]
    fn printed_operator_does_not_conserve_mass() {
        // integrate L rho against dV for a non-stationary rho
        let grid = FpGrid::at_cfl_limit(512, 2.0).unwrap();
        let rho: Vec<f64> = grid.thetas().iter().map(|t| 1.0 + 0.5 * t.cos()).collect();
        let lr = printed_operator(&rho, &grid, 2.0, 2.0);
        let drift: f64 = lr.iter().enumerate().map(|(i, x)| x * grid.theta(i).sin()).sum::<f64>() * grid.dtheta();
        assert!(drift.abs() > 0.1, "{drift}");
    }

    #[test]
    fn binning_preserves_mass() {
        let grid = FpGrid::at_cfl_limit(100, 2.0).unwrap();
        let q = grid.bump(2.0, 0.4);
        let bins = bin_into_cos(&q, &grid, 50);
        assert!((bins.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_convergence_reports_history() {
        let grid = FpGrid::at_cfl_limit(64, 2.0).unwrap();
        let q = grid.bump(1.5, 0.05);
        match evolve_to_stationarity(&q, &grid, 2.0, 2.0, 1e-12, 2500) {
            Err(Error::NotConverged { residual_history, .. }) => assert_eq!(residual_history.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}
