//! Random Hamiltonians relaxing to thermal equilibrium.
//!
//! The crate integrates the double-bracket gradient flow `dH/dt = -lambda [H, [H, G]]`
//! and its stochastic extension on isospectral manifolds, checks convergence to
//! the canonical density `exp(-lambda tr(HG))`, and computes quenched and
//! annealed thermal averages over the resulting Hamiltonian ensemble.
//!
//! Modules, bottom up:
//!
//! - [`matrix`], [`hermitian`]: small dense complex linear algebra, Bloch form.
//! - [`flow`]: deterministic double-bracket flow (RK4) and its exact 2x2 solution.
//! - [`stochastic`]: angle, pole-free `z = cos(theta)` and matrix-conjugation SDE schemes.
//! - [`equilibrium`]: closed-form canonical density on the Bloch sphere.
//! - [`fokker_planck`]: conservative finite-volume solver for the density.
//! - [`disorder`]: Gibbs, annealed and quenched averages.
//! - [`su3`]: 3x3 eigenframes, volume element and partition function.
//! - [`experiment`]: config parsing and artifact writers behind the `isoflow` CLI.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod disorder;
pub mod equilibrium;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod fokker_planck;
pub mod hermitian;
pub mod matrix;
pub mod quadrature;
pub mod stats;
pub mod stochastic;
pub mod su3;

pub use error::{Error, Result};
pub use hermitian::{BlochDecomposition, HermitianMatrix};
pub use matrix::{ComplexMatrix, C64};

/// Normalization convention shared by the noise model and the equilibrium
/// density.
///
/// `Section6` uses the noise amplitude `sqrt(2 nu)`, giving the stationary
/// density `exp(-lambda mu cos(theta) / 2)` independent of the gap `nu`.
/// `Canonical` uses unit noise (`D = 2`), giving `exp(-lambda tr(HG))`, i.e.
/// the exponent carries an extra factor `nu`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    #[default]
    Section6,
    Canonical,
}

impl std::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "section6" => Ok(Convention::Section6),
            "canonical" => Ok(Convention::Canonical),
            other => Err(Error::invalid(
                "convention",
                format!("expected section6|canonical, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for Convention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Convention::Section6 => "section6",
            Convention::Canonical => "canonical",
        })
    }
}
