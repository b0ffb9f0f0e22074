//! Canonical equilibrium over 2x2 Hamiltonians.
//!
//! On the isospectral sphere the stationary law is
//! `rho(theta) = a / (pi sinh a) * exp(-a cos(theta))` with respect to
//! `dV = 1/4 sin(theta) dtheta dphi`. The exponent `a` depends on the
//! [`Convention`]: `lambda mu / 2` for `Section6`, `lambda nu mu / 2` for
//! `Canonical` (the literal `exp(-lambda tr(HG))`).

use std::f64::consts::{FRAC_1_PI, PI, TAU};
use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{BlochDecomposition, HermitianMatrix};
use crate::stochastic::SphereState;
use crate::Convention;

/// Below this exponent the sampler and density use the uniform limit.
pub const SMALL_A: f64 = 1e-6;
/// Below this value of `lambda mu` the mean uses its Taylor series.
pub const SERIES_LAMBDA_MU: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalParams {
    /// Inverse Hamiltonian temperature.
    pub lambda: f64,
    /// Gap of the reference Hamiltonian `G`.
    pub mu: f64,
    /// Gap of the system Hamiltonian.
    pub nu: f64,
    /// Trace of the system Hamiltonian.
    pub u0: f64,
    /// Trace of `G`.
    pub v: f64,
    pub convention: Convention,
}

impl CanonicalParams {
    pub fn new(lambda: f64, mu: f64, nu: f64) -> Self {
        Self {
            lambda,
            mu,
            nu,
            u0: 0.0,
            v: 0.0,
            convention: Convention::Section6,
        }
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    pub fn with_traces(mut self, u0: f64, v: f64) -> Self {
        self.u0 = u0;
        self.v = v;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            problems.push("lambda must be positive and finite");
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            problems.push("mu must be positive and finite");
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            problems.push("nu must be nonnegative and finite");
        }
        if !(self.u0.is_finite() && self.v.is_finite()) {
            problems.push("u0 and v must be finite");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid("canonical params", problems.join("; ")))
        }
    }

    /// Effective `lambda mu`: the product that appears in the closed forms.
    pub fn coupling(&self) -> f64 {
        match self.convention {
            Convention::Section6 => self.lambda * self.mu,
            Convention::Canonical => self.lambda * self.nu * self.mu,
        }
    }

    /// Exponent `a` of `exp(-a cos(theta))`.
    pub fn a(&self) -> f64 {
        0.5 * self.coupling()
    }
}

/// Equilibrium density with respect to `dV = 1/4 sin(theta) dtheta dphi`.
pub fn density(theta: f64, p: &CanonicalParams) -> f64 {
    density_a(theta.cos(), p.a())
}

/// `a / (pi sinh a) e^{-a c}`, written to avoid overflow for large `a`.
pub fn density_a(cos_theta: f64, a: f64) -> f64 {
    if a.abs() < SMALL_A {
        return FRAC_1_PI * (1.0 - a * cos_theta);
    }
    // a / sinh(a) e^{-ac} = 2a e^{-a(1+c)} / (1 - e^{-2a})
    2.0 * a * (-a * (1.0 + cos_theta)).exp() / (-(-2.0 * a).exp_m1()) * FRAC_1_PI
}

/// Inverse-CDF transform of a uniform `u in [0, 1)` to `c = cos(theta)` with
/// density proportional to `e^{-a c}` on `[-1, 1]`.
pub fn cos_theta_from_uniform(a: f64, u: f64) -> f64 {
    if a.abs() < SMALL_A {
        return 2.0 * u - 1.0;
    }
    // e^{-a(c+1)} = 1 - u (1 - e^{-2a}); log1p/expm1 keep this exact for large a
    let c = -1.0 - (u * (-2.0 * a).exp_m1()).ln_1p() / a;
    c.clamp(-1.0, 1.0)
}

pub fn sample_cos_theta<R: Rng + ?Sized>(p: &CanonicalParams, rng: &mut R) -> f64 {
    cos_theta_from_uniform(p.a(), rng.random::<f64>())
}

/// Equilibrium sphere point: sampled `theta`, uniform `phi`.
pub fn sample_sphere<R: Rng + ?Sized>(p: &CanonicalParams, rng: &mut R) -> SphereState {
    let c = sample_cos_theta(p, rng);
    SphereState::new(c.acos(), TAU * rng.random::<f64>())
}

/// Equilibrium Hamiltonian with trace `u0` and gap `nu`.
pub fn sample_hamiltonian<R: Rng + ?Sized>(p: &CanonicalParams, rng: &mut R) -> HermitianMatrix {
    let s = sample_sphere(p, rng);
    BlochDecomposition::new(p.u0, p.nu, s.theta, s.phi).to_matrix()
}

/// CDF of `cos(theta)` under the equilibrium density.
pub fn cos_theta_cdf(c: f64, a: f64) -> f64 {
    let c = c.clamp(-1.0, 1.0);
    if a.abs() < SMALL_A {
        return 0.5 * (c + 1.0);
    }
    (-a * (c + 1.0)).exp_m1() / (-2.0 * a).exp_m1()
}

/// Probability of each of `bins` equal-width `cos(theta)` bins on `[-1, 1]`.
pub fn marginal_bin_probabilities(a: f64, bins: usize) -> Vec<f64> {
    (0..bins)
        .map(|k| {
            let lo = -1.0 + 2.0 * k as f64 / bins as f64;
            let hi = -1.0 + 2.0 * (k + 1) as f64 / bins as f64;
            cos_theta_cdf(hi, a) - cos_theta_cdf(lo, a)
        })
        .collect()
}

/// `<cos(theta)> = 2/(lambda mu) - coth(lambda mu / 2)` for the effective
/// coupling of `p`.
pub fn mean_cos(p: &CanonicalParams) -> f64 {
    mean_cos_coupling(p.coupling())
}

/// `2/x - coth(x/2)`, with the series `-x/6 + x^3/360` near zero.
pub fn mean_cos_coupling(x: f64) -> f64 {
    if x.abs() < SERIES_LAMBDA_MU {
        return -x / 6.0 + x.powi(3) / 360.0;
    }
    2.0 / x - 1.0 / (0.5 * x).tanh()
}

/// Equilibrium mean `1/2 diag(u0 + nu <c>, u0 - nu <c>)`.
pub fn mean_hamiltonian(p: &CanonicalParams) -> HermitianMatrix {
    let m = p.nu * mean_cos(p);
    HermitianMatrix::diagonal(&[0.5 * (p.u0 + m), 0.5 * (p.u0 - m)])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanCosRow {
    pub tau: f64,
    pub mean_cos: f64,
}

/// `<cos(theta)>` against `tau = 1/lambda` on a log-spaced grid.
pub fn mean_cos_curve(base: &CanonicalParams, tau_min: f64, tau_max: f64, points: usize) -> Result<Vec<MeanCosRow>> {
    if !(tau_min > 0.0 && tau_max > tau_min) || points < 2 {
        return Err(Error::invalid(
            "tau grid",
            "need 0 < tau_min < tau_max and at least 2 points",
        ));
    }
    let (l0, l1) = (tau_min.ln(), tau_max.ln());
    Ok((0..points)
        .map(|k| {
            let tau = (l0 + (l1 - l0) * k as f64 / (points - 1) as f64).exp();
            let p = CanonicalParams {
                lambda: 1.0 / tau,
                ..*base
            };
            MeanCosRow {
                tau,
                mean_cos: mean_cos(&p),
            }
        })
        .collect())
}

pub fn write_mean_cos_csv<W: Write>(rows: &[MeanCosRow], mut w: W) -> io::Result<()> {
    writeln!(w, "tau,mean_cos")?;
    for r in rows {
        writeln!(w, "{},{}", r.tau, r.mean_cos)?;
    }
    Ok(())
}

/// Total sphere volume under `dV`, `pi`.
pub const SPHERE_VOLUME: f64 = PI;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    fn integrate_theta(f: impl Fn(f64) -> f64) -> f64 {
        // dV integrated over phi: (2 pi / 4) sin(theta) dtheta
        GaussLegendre::new(64).integrate(0.0, PI, |t| f(t) * 0.5 * PI * t.sin())
    }

    #[test]
    fn normalized_and_mean_matches_quadrature() {
        for x in [0.1, 1.0, 2.0, 10.0, 50.0] {
            let p = CanonicalParams::new(x / 2.0, 2.0, 1.0);
            let z = integrate_theta(|t| density(t, &p));
            assert!((z - 1.0).abs() < 1e-10, "x={x} z={z}");
            let m = integrate_theta(|t| t.cos() * density(t, &p));
            assert!((m - mean_cos(&p)).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn total_volume_is_pi() {
        assert!((integrate_theta(|_| 1.0) - SPHERE_VOLUME).abs() < 1e-12);
    }

    #[test]
    fn density_point_value() {
        let p = CanonicalParams::new(1.0, 2.0, 1.0);
        let expected = 2.0 / (2.0 * PI * 1.0f64.sinh()) * 1.0f64.exp();
        assert!((density(PI, &p) - expected).abs() < 1e-14);
    }

    #[test]
    fn conventions_differ_by_nu() {
        let p = CanonicalParams::new(1.0, 2.0, 3.0);
        assert_eq!(p.a(), 1.0);
        assert_eq!(p.with_convention(Convention::Canonical).a(), 3.0);
    }

    #[test]
    fn series_branch_is_continuous() {
        let x = SERIES_LAMBDA_MU;
        let series = -x / 6.0 + x.powi(3) / 360.0;
        let direct = 2.0 / x - 1.0 / (0.5 * x).tanh();
        assert!((series - direct).abs() < 1e-10);
        assert_eq!(mean_cos_coupling(0.0), 0.0);
    }

    #[test]
    fn sampler_inverts_cdf() {
        for a in [1e-8, 0.3, 1.0, 40.0, 400.0] {
            for u in [0.0, 0.1, 0.5, 0.9, 0.999999] {
                let c = cos_theta_from_uniform(a, u);
                assert!((-1.0..=1.0).contains(&c));
                assert!((cos_theta_cdf(c, a) - u).abs() < 1e-9, "a={a} u={u}");
            }
        }
    }

    #[test]
    fn bin_probabilities_sum_to_one() {
        let p = marginal_bin_probabilities(3.0, 50);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mean_hamiltonian_shrinks_spectrum() {
        let p = CanonicalParams::new(1.0, 2.0, 1.0).with_traces(0.4, 0.0);
        let m = mean_hamiltonian(&p);
        assert_eq!(m.get(0, 1).norm(), 0.0);
        let (e0, e1) = (m.get(0, 0).re, m.get(1, 1).re);
        assert!(e0 > -0.3 && e0 < 0.7 && e1 > -0.3 && e1 < 0.7);
        assert!((m.trace() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn curve_is_log_spaced() {
        let rows = mean_cos_curve(&CanonicalParams::new(1.0, 2.0, 1.0), 1e-2, 1e2, 200).unwrap();
        assert_eq!(rows.len(), 200);
        assert!((rows[0].tau - 1e-2).abs() < 1e-15 && (rows[199].tau - 1e2).abs() < 1e-10);
    }
}
