//! Eigenframes of 3x3 Hamiltonians and the partition function
//! `Z(lambda) = ∫ exp(-lambda tr(HG)) dV` over an isospectral orbit.
//!
//! A frame is parametrized by `(vartheta, varphi, alpha)` in `[0, pi]` and
//! `(xi, eta, beta3)` in `[0, 2 pi)`. With `s = sin(vartheta/2)`,
//! `C = cos(vartheta/2)`, `c = cos(varphi/2)`, `s' = sin(varphi/2)` and
//! `(ca, sa) = (cos(alpha/2), sin(alpha/2))` the eigenvectors, in the
//! eigenbasis of `G`, are
//!
//! ```text
//! E1 = ( s c,                         s s' e^{i xi},                          C e^{i eta} )
//! E2 = ( ca C c - sa s' e^{i beta3},  (ca C s' + sa c e^{i beta3}) e^{i xi},  -ca s e^{i eta} )
//! E3 = ( sa C c + ca s' e^{i beta3},  (sa C s' - ca c e^{i beta3}) e^{i xi},  -sa s e^{i eta} )
//! ```
//!
//! and the invariant volume element is
//! `dV = (1/128) sin(alpha) sin(vartheta)(1 - cos(vartheta)) sin(varphi)` times
//! the six differentials, with total volume `pi^3 / 2`.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::matrix::{ComplexMatrix, C64};
use crate::quadrature::GaussLegendre;
use crate::stats::{map_indexed, stream_rng, MeanEstimate, Welford};

/// `pi^3 / 2`.
pub const TOTAL_VOLUME: f64 = PI * PI * PI / 2.0;
pub const DEFAULT_NODES: usize = 48;
/// Relative quadrature error above which [`partition_function`] fails.
pub const QUADRATURE_TOL: f64 = 0.01;
const MC_BLOCK: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Su3Frame {
    pub vartheta: f64,
    pub varphi: f64,
    pub alpha: f64,
    pub xi: f64,
    pub eta: f64,
    pub beta3: f64,
    /// Eigenvalues attached to `E1, E2, E3`.
    pub energies: [f64; 3],
}

impl Su3Frame {
    pub fn new(angles: [f64; 6], energies: [f64; 3]) -> Self {
        let [vartheta, varphi, alpha, xi, eta, beta3] = angles;
        Self {
            vartheta,
            varphi,
            alpha,
            xi,
            eta,
            beta3,
            energies,
        }
    }
}

/// Unitary whose columns are `E1, E2, E3` in the `G` eigenbasis.
pub fn build_frame(f: &Su3Frame) -> ComplexMatrix {
    let (s, cc) = (0.5 * f.vartheta).sin_cos();
    let (sp, c) = (0.5 * f.varphi).sin_cos();
    let (sa, ca) = (0.5 * f.alpha).sin_cos();
    let eb = C64::from_polar(1.0, f.beta3);
    let ex = C64::from_polar(1.0, f.xi);
    let ee = C64::from_polar(1.0, f.eta);
    let re = |x: f64| C64::new(x, 0.0);
    let cols = [
        [re(s * c), ex * (s * sp), ee * cc],
        [
            re(ca * cc * c) - eb * (sa * sp),
            ex * (re(ca * cc * sp) + eb * (sa * c)),
            ee * (-ca * s),
        ],
        [
            re(sa * cc * c) + eb * (ca * sp),
            ex * (re(sa * cc * sp) - eb * (ca * c)),
            ee * (-sa * s),
        ],
    ];
    ComplexMatrix::from_fn(3, |row, col| cols[col][row])
}

/// `|<g_j|E_i>|^2` as `p[j][i]`; independent of `xi` and `eta`.
pub fn overlap_moduli(vartheta: f64, varphi: f64, alpha: f64, beta3: f64) -> [[f64; 3]; 3] {
    let (s, cc) = (0.5 * vartheta).sin_cos();
    let (sp, c) = (0.5 * varphi).sin_cos();
    let (sa, ca) = (0.5 * alpha).sin_cos();
    let cb = beta3.cos();
    let cross = 2.0 * sa * ca * cc * c * sp * cb;
    [
        [
            s * s * c * c,
            ca * ca * cc * cc * c * c + sa * sa * sp * sp - cross,
            sa * sa * cc * cc * c * c + ca * ca * sp * sp + cross,
        ],
        [
            s * s * sp * sp,
            ca * ca * cc * cc * sp * sp + sa * sa * c * c + cross,
            sa * sa * cc * cc * sp * sp + ca * ca * c * c - cross,
        ],
        [cc * cc, ca * ca * s * s, sa * sa * s * s],
    ]
}

/// `H = sum_i E_i |E_i><E_i|` in the `G` eigenbasis.
pub fn hamiltonian(f: &Su3Frame) -> HermitianMatrix {
    let u = build_frame(f);
    let d = ComplexMatrix::from_diagonal(&f.energies.map(|e| C64::new(e, 0.0)));
    HermitianMatrix::hermitian_part_of(&u.matmul(&d).matmul(&u.adjoint()))
}

fn trace_from_moduli(p: &[[f64; 3]; 3], e: &[f64; 3], g: &[f64; 3]) -> f64 {
    let mut t = 0.0;
    for j in 0..3 {
        for i in 0..3 {
            t += g[j] * e[i] * p[j][i];
        }
    }
    t
}

/// `tr(HG) = sum_ij E_i g_j |<g_j|E_i>|^2` for `G = diag(g_eigs)`.
pub fn trace_hg(f: &Su3Frame, g_eigs: &[f64; 3]) -> f64 {
    let p = overlap_moduli(f.vartheta, f.varphi, f.alpha, f.beta3);
    trace_from_moduli(&p, &f.energies, g_eigs)
}

/// Density of `dV` with respect to the six angle differentials.
pub fn volume_weight(f: &Su3Frame) -> f64 {
    weight4(f.vartheta, f.varphi, f.alpha)
}

fn weight4(vartheta: f64, varphi: f64, alpha: f64) -> f64 {
    alpha.sin() * vartheta.sin() * (1.0 - vartheta.cos()) * varphi.sin() / 128.0
}

/// Frame drawn from the normalized `dV`: `cos(alpha)`, `cos(varphi)` uniform,
/// `cos(vartheta) = 1 - 2 sqrt(U)`, phases uniform.
pub fn sample_frame_volume<R: Rng + ?Sized>(energies: [f64; 3], rng: &mut R) -> Su3Frame {
    let alpha = (2.0 * rng.random::<f64>() - 1.0).acos();
    let varphi = (2.0 * rng.random::<f64>() - 1.0).acos();
    let vartheta = (1.0 - 2.0 * rng.random::<f64>().sqrt()).clamp(-1.0, 1.0).acos();
    Su3Frame::new(
        [
            vartheta,
            varphi,
            alpha,
            TAU * rng.random::<f64>(),
            TAU * rng.random::<f64>(),
            TAU * rng.random::<f64>(),
        ],
        energies,
    )
}

/// Haar-distributed unitary: Gram-Schmidt on a complex Gaussian matrix.
/// This equals QR with a positive diagonal in `R`, which makes the law
/// invariant under left and right multiplication.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let mut cols: Vec<Vec<C64>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect()
        })
        .collect();
    for k in 0..n {
        for j in 0..k {
            let (done, rest) = cols.split_at_mut(k);
            let proj: C64 = done[j].iter().zip(rest[0].iter()).map(|(a, b)| a.conj() * b).sum();
            for (x, q) in rest[0].iter_mut().zip(done[j].iter()) {
                *x -= proj * q;
            }
        }
        let norm = cols[k].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for x in cols[k].iter_mut() {
            *x /= norm;
        }
    }
    ComplexMatrix::from_fn(n, |i, j| cols[j][i])
}

/// `tr(U diag(E) U^dagger diag(g))`.
pub fn trace_hg_unitary(u: &ComplexMatrix, e: &[f64; 3], g: &[f64; 3]) -> f64 {
    let mut t = 0.0;
    for j in 0..3 {
        for i in 0..3 {
            t += g[j] * e[i] * u[(j, i)].norm_sqr();
        }
    }
    t
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum PartitionMethod {
    /// Tensor Gauss-Legendre over `(vartheta, varphi, alpha, beta3)`.
    Quadrature { nodes: usize },
    /// Uniform sampling of the angle box, weighted by [`volume_weight`].
    MonteCarlo { samples: usize, seed: u64 },
    /// Haar unitaries, rescaled by [`TOTAL_VOLUME`].
    Haar { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PartitionEstimate {
    pub z: f64,
    /// `|Z_n - Z_{n/2}|` for quadrature, one standard error for sampling.
    pub error: f64,
}

fn check_inputs(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", "must be nonnegative and finite"));
    }
    Ok(())
}

/// Quadrature value at a fixed number of nodes per dimension.
pub fn quadrature_z(e: &[f64; 3], g: &[f64; 3], lambda: f64, nodes: usize) -> f64 {
    let gl = GaussLegendre::new(nodes);
    let ang = gl.on_interval(0.0, PI);
    let phase = gl.on_interval(0.0, TAU);
    // the xi and eta integrals contribute (2 pi)^2
    let rows = map_indexed(ang.len(), |a| {
        let (vt, wv) = ang[a];
        let mut sum = 0.0;
        for &(vp, wp) in &ang {
            for &(al, wa) in &ang {
                let w = wv * wp * wa * weight4(vt, vp, al);
                if w == 0.0 {
                    continue;
                }
                for &(b3, wb) in &phase {
                    let p = overlap_moduli(vt, vp, al, b3);
                    sum += w * wb * (-lambda * trace_from_moduli(&p, e, g)).exp();
                }
            }
        }
        sum
    });
    TAU * TAU * rows.iter().sum::<f64>()
}

fn monte_carlo_z(e: &[f64; 3], g: &[f64; 3], lambda: f64, samples: usize, seed: u64) -> MeanEstimate {
    let blocks = samples.div_ceil(MC_BLOCK);
    // box volume pi^3 * 2 pi for (vartheta, varphi, alpha, beta3), times (2 pi)^2
    let scale = PI.powi(3) * TAU.powi(3);
    let parts = map_indexed(blocks, |b| {
        let mut rng = stream_rng(seed, b as u64);
        let mut acc = Welford::default();
        for _ in 0..MC_BLOCK.min(samples - b * MC_BLOCK) {
            let vt = PI * rng.random::<f64>();
            let vp = PI * rng.random::<f64>();
            let al = PI * rng.random::<f64>();
            let b3 = TAU * rng.random::<f64>();
            let p = overlap_moduli(vt, vp, al, b3);
            acc.push(scale * weight4(vt, vp, al) * (-lambda * trace_from_moduli(&p, e, g)).exp());
        }
        acc
    });
    parts.into_iter().fold(Welford::default(), Welford::merge).finish()
}

fn haar_z(e: &[f64; 3], g: &[f64; 3], lambda: f64, samples: usize, seed: u64) -> MeanEstimate {
    let blocks = samples.div_ceil(MC_BLOCK);
    let parts = map_indexed(blocks, |b| {
        let mut rng = stream_rng(seed, b as u64);
        let mut acc = Welford::default();
        for _ in 0..MC_BLOCK.min(samples - b * MC_BLOCK) {
            let u = haar_unitary(3, &mut rng);
            acc.push(TOTAL_VOLUME * (-lambda * trace_hg_unitary(&u, e, g)).exp());
        }
        acc
    });
    parts.into_iter().fold(Welford::default(), Welford::merge).finish()
}

/// `Z(lambda)` for `H` with spectrum `e` and `G = diag(g)`.
pub fn partition_function(
    e: &[f64; 3],
    g: &[f64; 3],
    lambda: f64,
    method: PartitionMethod,
) -> Result<PartitionEstimate> {
    check_inputs(lambda)?;
    match method {
        PartitionMethod::Quadrature { nodes } => {
            if nodes < 4 {
                return Err(Error::invalid("nodes", "need at least 4 nodes per dimension"));
            }
            let z = quadrature_z(e, g, lambda, nodes);
            let coarse = quadrature_z(e, g, lambda, nodes / 2);
            let error = (z - coarse).abs();
            let relative = error / z.abs();
            if !(relative <= QUADRATURE_TOL) {
                return Err(Error::QuadratureNotConverged { relative });
            }
            Ok(PartitionEstimate { z, error })
        }
        PartitionMethod::MonteCarlo { samples, seed } | PartitionMethod::Haar { samples, seed } => {
            if samples < 2 {
                return Err(Error::invalid("samples", "need at least 2 samples"));
            }
            let est = if matches!(method, PartitionMethod::MonteCarlo { .. }) {
                monte_carlo_z(e, g, lambda, samples, seed)
            } else {
                haar_z(e, g, lambda, samples, seed)
            };
            Ok(PartitionEstimate {
                z: est.mean,
                error: est.standard_error,
            })
        }
    }
}

/// Two-level analogue: `∫ exp(-lambda tr(HG)) (1/4) sin(theta) dtheta dphi`
/// by Gauss-Legendre in `theta`, for `H` with trace `u` and gap `nu`, and
/// `G` with trace `v` and gap `mu`.
pub fn partition_function_2x2(u: f64, nu: f64, v: f64, mu: f64, lambda: f64, nodes: usize) -> f64 {
    let gl = GaussLegendre::new(nodes);
    TAU * 0.25
        * gl.integrate(0.0, PI, |t| {
            t.sin() * (-lambda * 0.5 * (u * v + nu * mu * t.cos())).exp()
        })
}

/// Closed form of [`partition_function_2x2`]: `pi e^{-lambda u v / 2} sinh(a) / a`
/// with `a = lambda nu mu / 2`.
pub fn partition_function_2x2_closed(u: f64, nu: f64, v: f64, mu: f64, lambda: f64) -> f64 {
    let a = 0.5 * lambda * nu * mu;
    let shape = if a.abs() < 1e-8 {
        1.0 + a * a / 6.0
    } else {
        a.sinh() / a
    };
    PI * (-0.5 * lambda * u * v).exp() * shape
}

/// `tr(HG) = A + B cos(beta3)` at fixed `(vartheta, varphi, alpha)`.
pub fn beta3_coefficients(vartheta: f64, varphi: f64, alpha: f64, e: &[f64; 3], g: &[f64; 3]) -> (f64, f64) {
    let t0 = trace_from_moduli(&overlap_moduli(vartheta, varphi, alpha, 0.0), e, g);
    let tp = trace_from_moduli(&overlap_moduli(vartheta, varphi, alpha, PI), e, g);
    (0.5 * (t0 + tp), 0.5 * (t0 - tp))
}

/// `∫_0^{2 pi} exp(-lambda tr(HG)) dbeta3` by quadrature.
pub fn beta3_kernel(
    vartheta: f64,
    varphi: f64,
    alpha: f64,
    e: &[f64; 3],
    g: &[f64; 3],
    lambda: f64,
    nodes: usize,
) -> f64 {
    GaussLegendre::new(nodes).integrate(0.0, TAU, |b| {
        let p = overlap_moduli(vartheta, varphi, alpha, b);
        (-lambda * trace_from_moduli(&p, e, g)).exp()
    })
}

/// Modified Bessel function `I0` by its power series.
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PartitionRow {
    pub lambda: f64,
    pub z_quadrature: f64,
    pub z_mc: f64,
    pub z_mc_se: f64,
    pub z_haar: f64,
    pub z_haar_se: f64,
}

/// `Z` on a list of couplings by all three methods. Sampling at coupling
/// index `k` uses seed `seed + k`.
pub fn partition_table(
    e: &[f64; 3],
    g: &[f64; 3],
    lambdas: &[f64],
    nodes: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<PartitionRow>> {
    lambdas
        .iter()
        .enumerate()
        .map(|(k, &lambda)| {
            let s = seed.wrapping_add(k as u64);
            let q = partition_function(e, g, lambda, PartitionMethod::Quadrature { nodes })?;
            let mc = partition_function(e, g, lambda, PartitionMethod::MonteCarlo { samples, seed: s })?;
            let haar = partition_function(e, g, lambda, PartitionMethod::Haar { samples, seed: s })?;
            Ok(PartitionRow {
                lambda,
                z_quadrature: q.z,
                z_mc: mc.z,
                z_mc_se: mc.error,
                z_haar: haar.z,
                z_haar_se: haar.error,
            })
        })
        .collect()
}

pub fn write_partition_csv<W: Write>(rows: &[PartitionRow], mut w: W) -> io::Result<()> {
    writeln!(w, "lambda,Z_quadrature,Z_mc,Z_mc_se,Z_haar,Z_haar_se")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.lambda, r.z_quadrature, r.z_mc, r.z_mc_se, r.z_haar, r.z_haar_se
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: [f64; 3] = [-1.0, 0.0, 1.0];

    fn random_frame<R: Rng>(rng: &mut R) -> Su3Frame {
        Su3Frame::new(
            [
                PI * rng.random::<f64>(),
                PI * rng.random::<f64>(),
                PI * rng.random::<f64>(),
                TAU * rng.random::<f64>(),
                TAU * rng.random::<f64>(),
                TAU * rng.random::<f64>(),
            ],
            [-0.7, 0.2, 1.3],
        )
    }

    #[test]
    fn frames_are_unitary() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..1000 {
            assert!(build_frame(&random_frame(&mut rng)).unitarity_defect() < 1e-12);
        }
    }

    #[test]
    fn pole_frame() {
        let f = Su3Frame::new([0.0, 0.4, 0.0, 0.3, 1.2, 0.5], E);
        let u = build_frame(&f);
        assert!(u[(0, 0)].norm() < 1e-15 && u[(1, 0)].norm() < 1e-15);
        assert!((u[(2, 0)] - C64::from_polar(1.0, 1.2)).norm() < 1e-15);
    }

    #[test]
    fn moduli_match_frame() {
        let mut rng = stream_rng(2, 0);
        for _ in 0..100 {
            let f = random_frame(&mut rng);
            let u = build_frame(&f);
            let p = overlap_moduli(f.vartheta, f.varphi, f.alpha, f.beta3);
            for j in 0..3 {
                for i in 0..3 {
                    assert!((p[j][i] - u[(j, i)].norm_sqr()).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn haar_is_unitary() {
        let mut rng = stream_rng(3, 0);
        for _ in 0..100 {
            assert!(haar_unitary(3, &mut rng).unitarity_defect() < 1e-13);
        }
    }

    #[test]
    fn volume_and_weight() {
        let f = Su3Frame::new([0.0, 1.0, 1.0, 0.0, 0.0, 0.0], E);
        assert_eq!(volume_weight(&f), 0.0);
        let z = quadrature_z(&E, &E, 0.0, 16);
        assert!((z - TOTAL_VOLUME).abs() < 1e-9 * TOTAL_VOLUME);
    }

    #[test]
    fn constant_reference_gives_scaled_volume() {
        let g = [0.7; 3];
        let e = [-1.0, 0.5, 2.0];
        let z = partition_function(&e, &g, 1.3, PartitionMethod::Quadrature { nodes: 16 }).unwrap();
        let expected = TOTAL_VOLUME * (-1.3f64 * 0.7 * 1.5).exp();
        assert!((z.z - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn trace_is_affine_in_cos_beta3() {
        let (a, b) = beta3_coefficients(1.0, 2.0, 0.7, &E, &E);
        let t = trace_from_moduli(&overlap_moduli(1.0, 2.0, 0.7, 1.1), &E, &E);
        assert!((t - (a + b * 1.1f64.cos())).abs() < 1e-14);
    }

    #[test]
    fn bessel_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((bessel_i0(10.0) - 2_815.716_628_466_254).abs() < 1e-9);
    }

    #[test]
    fn two_level_matches_closed_form() {
        for lambda in [0.0, 0.5, 3.0] {
            let q = partition_function_2x2(0.4, 1.0, 0.2, 2.0, lambda, 32);
            let c = partition_function_2x2_closed(0.4, 1.0, 0.2, 2.0, lambda);
            assert!((q - c).abs() < 1e-12 * c);
        }
    }
}
