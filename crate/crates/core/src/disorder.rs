//! Thermal expectations over a random Hamiltonian ensemble.
//!
//! A system Hamiltonian drawn from the canonical ensemble is put in contact
//! with a heat bath at inverse temperature `beta`. The *quenched* average
//! takes the Gibbs expectation per Hamiltonian and then averages over the
//! ensemble; the *annealed* average takes the Gibbs expectation at the
//! ensemble-mean Hamiltonian.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{mean_cos_coupling, mean_hamiltonian, sample_hamiltonian, CanonicalParams};
use crate::error::{Error, Result};
use crate::hermitian::{eigensystem, HermitianMatrix};
use crate::stats::{map_indexed, stream_rng, MeanEstimate, Welford};

pub const MIN_QUENCHED_SAMPLES: usize = 100;
/// Samples per RNG stream in [`quenched_average_seeded`].
pub const BLOCK_SIZE: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    /// Bath inverse temperature; `f64::INFINITY` selects the ground state.
    pub beta: f64,
}

impl ThermalParams {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(Error::invalid("beta", format!("must be nonnegative, got {beta}")));
        }
        Ok(Self { beta })
    }

    pub fn from_temperature(t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::invalid("T", format!("must be positive, got {t}")));
        }
        Self::new(1.0 / t)
    }

    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }
}

/// `tr(O e^{-beta H}) / tr(e^{-beta H})`, evaluated in the eigenbasis of `H`
/// with Boltzmann factors measured from the ground energy.
pub fn gibbs_expectation(o: &HermitianMatrix, h: &HermitianMatrix, beta: f64) -> Result<f64> {
    if o.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            left: o.dim(),
            right: h.dim(),
        });
    }
    if !(beta >= 0.0) {
        return Err(Error::invalid("beta", format!("must be nonnegative, got {beta}")));
    }
    let n = h.dim();
    if beta == 0.0 {
        return Ok(o.trace() / n as f64);
    }
    let es = eigensystem(h)?;
    let e0 = es.values[0];
    let om = o.as_matrix();
    let (mut num, mut den) = (0.0, 0.0);
    for (k, &e) in es.values.iter().enumerate() {
        let gap = e - e0;
        let w = if gap == 0.0 { 1.0 } else { (-beta * gap).exp() };
        if w == 0.0 {
            continue;
        }
        let v = es.vector(k);
        let mut diag = 0.0;
        for i in 0..n {
            for j in 0..n {
                diag += (v[i].conj() * om[(i, j)] * v[j]).re;
            }
        }
        num += w * diag;
        den += w;
    }
    Ok(num / den)
}

/// Gibbs expectation at the ensemble-mean Hamiltonian.
pub fn annealed_average(o: &HermitianMatrix, p: &CanonicalParams, t: &ThermalParams) -> Result<f64> {
    p.validate()?;
    gibbs_expectation(o, &mean_hamiltonian(p), t.beta)
}

/// Quenched average from `n_samples` exact equilibrium draws.
pub fn quenched_average_mc<R: Rng + ?Sized>(
    o: &HermitianMatrix,
    p: &CanonicalParams,
    t: &ThermalParams,
    n_samples: usize,
    rng: &mut R,
) -> Result<MeanEstimate> {
    check_quenched(o, p, n_samples)?;
    let mut acc = Welford::default();
    for _ in 0..n_samples {
        acc.push(gibbs_expectation(o, &sample_hamiltonian(p, rng), t.beta)?);
    }
    Ok(acc.finish())
}

fn check_quenched(o: &HermitianMatrix, p: &CanonicalParams, n_samples: usize) -> Result<()> {
    p.validate()?;
    if n_samples < MIN_QUENCHED_SAMPLES {
        return Err(Error::invalid(
            "n_samples",
            format!("need at least {MIN_QUENCHED_SAMPLES}, got {n_samples}"),
        ));
    }
    if o.dim() != 2 {
        return Err(Error::DimensionMismatch {
            left: o.dim(),
            right: 2,
        });
    }
    Ok(())
}

/// Block-parallel quenched average: block `b` of [`BLOCK_SIZE`] samples uses
/// stream `b` under `seed`, and blocks are merged in order, so the result is
/// independent of thread count.
pub fn quenched_average_seeded(
    o: &HermitianMatrix,
    p: &CanonicalParams,
    t: &ThermalParams,
    n_samples: usize,
    seed: u64,
) -> Result<MeanEstimate> {
    check_quenched(o, p, n_samples)?;
    let blocks = n_samples.div_ceil(BLOCK_SIZE);
    let partial = map_indexed(blocks, |b| -> Result<Welford> {
        let mut rng = stream_rng(seed, b as u64);
        let len = BLOCK_SIZE.min(n_samples - b * BLOCK_SIZE);
        let mut acc = Welford::default();
        for _ in 0..len {
            acc.push(gibbs_expectation(o, &sample_hamiltonian(p, &mut rng), t.beta)?);
        }
        Ok(acc)
    });
    let mut total = Welford::default();
    for w in partial {
        total = total.merge(w?);
    }
    Ok(total.finish())
}

/// Quenched average over given Hamiltonians, e.g. terminal states of a
/// stochastic ensemble.
pub fn quenched_average_over_states(
    o: &HermitianMatrix,
    states: &[HermitianMatrix],
    t: &ThermalParams,
) -> Result<MeanEstimate> {
    let mut acc = Welford::default();
    for h in states {
        acc.push(gibbs_expectation(o, h, t.beta)?);
    }
    Ok(acc.finish())
}

fn require_traceless(p: &CanonicalParams) -> Result<()> {
    p.validate()?;
    if p.v != 0.0 {
        return Err(Error::TracefulReference { v: p.v });
    }
    Ok(())
}

fn half_beta_nu(p: &CanonicalParams, t: &ThermalParams) -> f64 {
    if p.nu == 0.0 {
        0.0
    } else {
        0.5 * t.beta * p.nu
    }
}

/// `<G>_Q = (mu/2) tanh(beta nu / 2) (coth(lambda mu / 2) - 2/(lambda mu))`
/// for `G = (mu/2) sigma_z`.
pub fn quenched_closed_g(p: &CanonicalParams, t: &ThermalParams) -> Result<f64> {
    require_traceless(p)?;
    Ok(-0.5 * p.mu * half_beta_nu(p, t).tanh() * mean_cos_coupling(p.coupling()))
}

/// `<G>_A = (mu/2) tanh[(beta nu / 2)(coth(lambda mu / 2) - 2/(lambda mu))]`.
pub fn annealed_closed_g(p: &CanonicalParams, t: &ThermalParams) -> Result<f64> {
    require_traceless(p)?;
    let m = -mean_cos_coupling(p.coupling());
    let x = if m == 0.0 { 0.0 } else { half_beta_nu(p, t) * m };
    Ok(0.5 * p.mu * x.tanh())
}

/// Zero-temperature limit of the quenched average,
/// `(mu/2)(coth(lambda mu / 2) - 2/(lambda mu))`.
pub fn quenched_ground_limit(p: &CanonicalParams) -> Result<f64> {
    require_traceless(p)?;
    Ok(-0.5 * p.mu * mean_cos_coupling(p.coupling()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AverageRow {
    pub temperature: f64,
    pub quenched_closed: f64,
    pub quenched_mc: f64,
    pub quenched_se: f64,
    pub annealed: f64,
}

/// Quenched (closed form and Monte Carlo) and annealed `<G>` on `points`
/// evenly spaced temperatures in `[t_min, t_max]`. Point `k` draws from
/// stream `k` under `seed`.
pub fn average_curve(
    p: &CanonicalParams,
    t_min: f64,
    t_max: f64,
    points: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<AverageRow>> {
    require_traceless(p)?;
    if !(t_min > 0.0 && t_max > t_min) || points < 2 {
        return Err(Error::invalid("T grid", "need 0 < T_min < T_max and at least 2 points"));
    }
    let g = HermitianMatrix::z_reference(p.v, p.mu);
    let rows = map_indexed(points, |k| -> Result<AverageRow> {
        let temperature = t_min + (t_max - t_min) * k as f64 / (points - 1) as f64;
        let t = ThermalParams::from_temperature(temperature)?;
        let mut rng = stream_rng(seed, k as u64);
        let mc = quenched_average_mc(&g, p, &t, samples, &mut rng)?;
        Ok(AverageRow {
            temperature,
            quenched_closed: quenched_closed_g(p, &t)?,
            quenched_mc: mc.mean,
            quenched_se: mc.standard_error,
            annealed: annealed_closed_g(p, &t)?,
        })
    });
    rows.into_iter().collect()
}

pub fn write_average_csv<W: Write>(rows: &[AverageRow], mut w: W) -> io::Result<()> {
    writeln!(w, "T,G_quenched_closed,G_quenched_mc,G_quenched_se,G_annealed")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.temperature, r.quenched_closed, r.quenched_mc, r.quenched_se, r.annealed
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::BlochDecomposition;

    fn unit_gap(lambda: f64) -> CanonicalParams {
        CanonicalParams::new(lambda, 2.0, 1.0)
    }

    #[test]
    fn identity_has_unit_expectation() {
        let h = BlochDecomposition::new(0.3, 2.0, 0.7, 1.1).to_matrix();
        for beta in [0.0, 1.0, 1e6, f64::INFINITY] {
            let v = gibbs_expectation(&HermitianMatrix::identity(2), &h, beta).unwrap();
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn large_beta_projects_on_ground_state() {
        let h = HermitianMatrix::diagonal(&[2.0, -1.0, 0.5]);
        let o = HermitianMatrix::diagonal(&[10.0, 20.0, 30.0]);
        assert_eq!(gibbs_expectation(&o, &h, 1e6).unwrap(), 20.0);
        assert_eq!(gibbs_expectation(&o, &h, f64::INFINITY).unwrap(), 20.0);
        assert!((gibbs_expectation(&o, &h, 0.0).unwrap() - 20.0).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let e = gibbs_expectation(&HermitianMatrix::identity(3), &HermitianMatrix::identity(2), 1.0);
        assert!(matches!(e, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn closed_forms_at_reference_point() {
        let p = unit_gap(10.0);
        let t = ThermalParams::new(2.0).unwrap();
        assert!((quenched_closed_g(&p, &t).unwrap() - 1.0f64.tanh() * (10.0f64.tanh().recip() - 0.1)).abs() < 1e-15);
        assert!((annealed_closed_g(&p, &t).unwrap() - 0.9f64.tanh()).abs() < 1e-6);
        let cold = ThermalParams::new(f64::INFINITY).unwrap();
        assert!((quenched_closed_g(&p, &cold).unwrap() - 0.9).abs() < 1e-7);
        assert_eq!(annealed_closed_g(&p, &cold).unwrap(), 1.0);
        let hot = ThermalParams::new(0.0).unwrap();
        assert_eq!(quenched_closed_g(&p, &hot).unwrap(), 0.0);
        assert_eq!(annealed_closed_g(&p, &hot).unwrap(), 0.0);
    }

    #[test]
    fn closed_forms_need_traceless_reference() {
        let p = unit_gap(1.0).with_traces(0.0, 0.5);
        assert!(matches!(
            quenched_closed_g(&p, &ThermalParams::new(1.0).unwrap()),
            Err(Error::TracefulReference { .. })
        ));
    }

    #[test]
    fn infinite_temperature_quenched_is_exact() {
        let o = HermitianMatrix::pauli_x()
            .add(&HermitianMatrix::identity(2).scale(3.0))
            .unwrap();
        let mut rng = stream_rng(3, 0);
        let est = quenched_average_mc(&o, &unit_gap(1.0), &ThermalParams::new(0.0).unwrap(), 200, &mut rng).unwrap();
        assert_eq!(est.mean, 3.0);
        assert_eq!(est.standard_error, 0.0);
    }

    #[test]
    fn too_few_samples_rejected() {
        let mut rng = stream_rng(3, 0);
        let g = HermitianMatrix::pauli_z();
        assert!(quenched_average_mc(&g, &unit_gap(1.0), &ThermalParams::new(1.0).unwrap(), 99, &mut rng).is_err());
    }

    #[test]
    fn seeded_average_is_deterministic() {
        let g = HermitianMatrix::pauli_z();
        let t = ThermalParams::new(1.0).unwrap();
        let a = quenched_average_seeded(&g, &unit_gap(2.0), &t, 10_000, 5).unwrap();
        let b = quenched_average_seeded(&g, &unit_gap(2.0), &t, 10_000, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n, 10_000);
    }
}
