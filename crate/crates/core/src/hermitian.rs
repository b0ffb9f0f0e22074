//! Hermitian matrices, their spectra, and the Bloch parameterization of the
//! 2x2 case.
//!
//! Bloch convention: a 2x2 Hamiltonian is written
//!
//! ```text
//! H = u/2 * 1 + nu/2 * [[cos t,            sin t * e^{+i phi}],
//!                       [sin t * e^{-i phi}, -cos t          ]]
//! ```
//!
//! so the polar coordinate satisfies `z = cos(theta)` (theta = pi is the
//! state aligned with the south pole) and the azimuth `phi` is the phase of
//! the upper-right entry. With this orientation the unitary term `-i[H, G]`
//! advances `phi` at the rate `+mu`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, C64, I, ONE, ZERO};

/// Hermiticity is checked relative to `max(1, max|H_ij|)`.
pub const HERMITICITY_TOL: f64 = 1e-12;
pub const DEFAULT_GAP_TOL: f64 = 1e-9;
pub const MAX_DIM: usize = 8;

const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixLiteral", into = "MatrixLiteral")]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Accepts `m` if it is Hermitian to within [`HERMITICITY_TOL`] and stores
    /// its exact Hermitian part.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let scale = m.max_abs().max(1.0);
        let deviation = m.hermiticity_defect();
        if deviation > HERMITICITY_TOL * scale {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self(m.hermitian_part()))
    }

    /// `(m + m^dagger)/2`; always Hermitian.
    pub fn hermitian_part_of(m: &ComplexMatrix) -> Self {
        Self(m.hermitian_part())
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let d: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
        Self(ComplexMatrix::from_diagonal(&d))
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n))
    }

    pub fn pauli_x() -> Self {
        Self(ComplexMatrix::from_fn(2, |i, j| if i != j { ONE } else { ZERO }))
    }

    pub fn pauli_y() -> Self {
        Self(ComplexMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 1) => -I,
            (1, 0) => I,
            _ => ZERO,
        }))
    }

    pub fn pauli_z() -> Self {
        Self::diagonal(&[1.0, -1.0])
    }

    /// Reference Hamiltonian `v/2 * 1 + mu/2 * sigma_z` (axis along z).
    pub fn z_reference(v: f64, mu: f64) -> Self {
        Self::diagonal(&[0.5 * (v + mu), 0.5 * (v - mu)])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant().re
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.frobenius_norm()
    }

    /// Spectral norm, `max |E_i|`.
    pub fn operator_norm(&self) -> Result<f64> {
        let eig = eigensystem(self)?;
        Ok(eig.values.iter().fold(0.0f64, |m, e| m.max(e.abs())))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_dim(self, other)?;
        Ok(Self(&self.0 - &other.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale_real(s))
    }

    /// `Re tr(self * other)`.
    pub fn trace_product(&self, other: &Self) -> Result<f64> {
        same_dim(self, other)?;
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for k in 0..n {
                acc += (self.0[(i, k)] * other.0[(k, i)]).re;
            }
        }
        Ok(acc)
    }

    /// `U^dagger H U` for unitary `U`, re-Hermitized.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self(u.adjoint_mul(&self.0.matmul(u)).hermitian_part())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matrix literal serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Literal(e.to_string()))
    }
}

/// Row-major JSON literal: one array per row, one `[re, im]` pair per entry.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixLiteral(pub Vec<Vec<[f64; 2]>>);

impl From<HermitianMatrix> for MatrixLiteral {
    fn from(h: HermitianMatrix) -> Self {
        let n = h.dim();
        MatrixLiteral(
            (0..n)
                .map(|i| (0..n).map(|j| [h.0[(i, j)].re, h.0[(i, j)].im]).collect())
                .collect(),
        )
    }
}

impl TryFrom<MatrixLiteral> for HermitianMatrix {
    type Error = Error;

    fn try_from(lit: MatrixLiteral) -> Result<Self> {
        let n = lit.0.len();
        if n == 0 || lit.0.iter().any(|row| row.len() != n) {
            return Err(Error::Literal(format!(
                "expected a square matrix, got {n} rows of uneven length"
            )));
        }
        let m = ComplexMatrix::from_fn(n, |i, j| C64::new(lit.0[i][j][0], lit.0[i][j][1]));
        HermitianMatrix::new(m)
    }
}

fn same_dim(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// `AB - BA`, which is anti-Hermitian for Hermitian `A`, `B`.
pub fn commutator(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<ComplexMatrix> {
    same_dim(a, b)?;
    Ok(a.0.commutator(&b.0))
}

/// `[H, [H, G]]`.
pub fn double_bracket(h: &HermitianMatrix, g: &HermitianMatrix) -> Result<HermitianMatrix> {
    let inner = commutator(h, g)?;
    Ok(HermitianMatrix::hermitian_part_of(&h.0.commutator(&inner)))
}

#[derive(Clone, Debug)]
pub struct Eigensystem {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: ComplexMatrix,
}

impl Eigensystem {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        let n = self.values.len();
        (0..n).map(|i| self.vectors[(i, k)]).collect()
    }

    pub fn min_gap(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Eigenvalues (ascending, ties kept in original index order) and orthonormal
/// eigenvectors. Closed form for N = 2, cyclic complex Jacobi otherwise.
pub fn eigensystem(h: &HermitianMatrix) -> Result<Eigensystem> {
    match h.dim() {
        0 => Err(Error::UnsupportedDimension {
            dim: 0,
            reason: "empty matrix",
        }),
        1 => Ok(Eigensystem {
            values: vec![h.0[(0, 0)].re],
            vectors: ComplexMatrix::identity(1),
        }),
        2 => Ok(eigensystem_2x2(h)),
        n if n <= MAX_DIM => Ok(jacobi(h)),
        n => Err(Error::UnsupportedDimension {
            dim: n,
            reason: "dense eigensolver limited to N <= 8",
        }),
    }
}

fn eigensystem_2x2(h: &HermitianMatrix) -> Eigensystem {
    let a = h.0[(0, 0)].re;
    let d = h.0[(1, 1)].re;
    let b = h.0[(0, 1)];
    let half_diff = 0.5 * (a - d);
    let r = half_diff.hypot(b.norm());
    let mean = 0.5 * (a + d);
    if r == 0.0 {
        return Eigensystem {
            values: vec![mean, mean],
            vectors: ComplexMatrix::identity(2),
        };
    }
    let half_theta = 0.5 * b.norm().atan2(half_diff);
    let (s, c) = half_theta.sin_cos();
    let phase = if b.norm() > 0.0 { b / b.norm() } else { ONE };
    // low: (-s e^{i phi}, c), high: (c, s e^{-i phi})
    let vectors = ComplexMatrix::from_row_major(vec![-phase * s, C64::new(c, 0.0), C64::new(c, 0.0), phase.conj() * s])
        .expect("2x2");
    Eigensystem {
        values: vec![mean - r, mean + r],
        vectors,
    }
}

fn off_diagonal_mass(a: &ComplexMatrix) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn jacobi(h: &HermitianMatrix) -> Eigensystem {
    let n = h.dim();
    let mut a = h.0.clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_mass(&a) <= JACOBI_TOL * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Real Jacobi rotation on [[app, mag], [mag, aqq]].
                let theta = 0.5 * (aqq - app) / mag;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Rotation R acting on columns p, q:
                // R_pp = c, R_pq = s, R_qp = -s conj(phase), R_qq = c conj(phase)
                let r_pp = C64::new(c, 0.0);
                let r_pq = C64::new(s, 0.0);
                let r_qp = -phase.conj() * s;
                let r_qq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * r_pp + akq * r_qp;
                    a[(k, q)] = akp * r_pq + akq * r_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = r_pp.conj() * apk + r_qp.conj() * aqk;
                    a[(q, k)] = r_pq.conj() * apk + r_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * r_pp + vkq * r_qp;
                    v[(k, q)] = vkp * r_pq + vkq * r_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, |row, col| v[(row, order[col])]);
    Eigensystem { values, vectors }
}

/// True when every pair of consecutive eigenvalues is separated by more than
/// `gap_tol`.
pub fn is_nondegenerate(h: &HermitianMatrix, gap_tol: f64) -> Result<bool> {
    Ok(eigensystem(h)?.min_gap() > gap_tol)
}

/// Hermitian traceless generators `T_a` with `tr(T_a T_b) = 2 delta_ab`
/// (the Pauli matrices for N = 2, Gell-Mann matrices for N = 3).
pub fn traceless_generators(n: usize) -> Vec<HermitianMatrix> {
    let mut out = Vec::with_capacity(n * n - 1);
    for j in 0..n {
        for k in j + 1..n {
            let mut sym = ComplexMatrix::zeros(n);
            sym[(j, k)] = ONE;
            sym[(k, j)] = ONE;
            out.push(HermitianMatrix(sym));
            let mut anti = ComplexMatrix::zeros(n);
            anti[(j, k)] = -I;
            anti[(k, j)] = I;
            out.push(HermitianMatrix(anti));
        }
    }
    for l in 1..n {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut diag = vec![0.0; n];
        for d in diag.iter_mut().take(l) {
            *d = norm;
        }
        diag[l] = -(l as f64) * norm;
        out.push(HermitianMatrix::diagonal(&diag));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochDecomposition {
    /// Trace, `E1 + E2`.
    pub u: f64,
    /// Gap, `E2 - E1 >= 0`.
    pub nu: f64,
    pub theta: f64,
    pub phi: f64,
}

impl BlochDecomposition {
    pub fn new(u: f64, nu: f64, theta: f64, phi: f64) -> Self {
        Self { u, nu, theta, phi }
    }

    /// Unit Bloch vector in the orientation documented at module level.
    pub fn direction(&self) -> [f64; 3] {
        let (s, c) = self.theta.sin_cos();
        [s * self.phi.cos(), -s * self.phi.sin(), c]
    }

    pub fn to_matrix(&self) -> HermitianMatrix {
        from_bloch(self)
    }
}

pub fn from_bloch(b: &BlochDecomposition) -> HermitianMatrix {
    let (s, c) = b.theta.sin_cos();
    let off = C64::from_polar(0.5 * b.nu * s, b.phi);
    HermitianMatrix(
        ComplexMatrix::from_row_major(vec![
            C64::new(0.5 * (b.u + b.nu * c), 0.0),
            off,
            off.conj(),
            C64::new(0.5 * (b.u - b.nu * c), 0.0),
        ])
        .expect("2x2"),
    )
}

/// Inverse of [`from_bloch`]; `phi` is reported in `[0, 2 pi)` and is 0 when
/// `sin(theta) = 0`.
pub fn to_bloch(h: &HermitianMatrix) -> Result<BlochDecomposition> {
    if h.dim() != 2 {
        return Err(Error::UnsupportedDimension {
            dim: h.dim(),
            reason: "Bloch decomposition is defined for 2x2 matrices",
        });
    }
    let a = h.0[(0, 0)].re;
    let d = h.0[(1, 1)].re;
    let b = h.0[(0, 1)];
    let diff = a - d;
    let off = 2.0 * b.norm();
    let nu = diff.hypot(off);
    let theta = if nu == 0.0 { 0.0 } else { off.atan2(diff) };
    let phi = if b.norm() == 0.0 { 0.0 } else { wrap_angle(b.arg()) };
    Ok(BlochDecomposition {
        u: a + d,
        nu,
        theta,
        phi,
    })
}

/// Maps an angle into `[0, 2 pi)`.
pub fn wrap_angle(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Smallest signed difference `a - b` modulo `2 pi`, in `(-pi, pi]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn pauli_commutator_is_two_i_sigma_z() {
        let comm = commutator(&HermitianMatrix::pauli_x(), &HermitianMatrix::pauli_y()).unwrap();
        let expected = HermitianMatrix::pauli_z().as_matrix().scale(c(0.0, 2.0));
        assert!(comm.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn self_commutator_vanishes() {
        let h = from_bloch(&BlochDecomposition::new(0.3, 1.2, 0.4, 2.0));
        assert_eq!(commutator(&h, &h).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = HermitianMatrix::identity(2);
        let b = HermitianMatrix::identity(3);
        assert!(matches!(
            commutator(&a, &b),
            Err(Error::DimensionMismatch { left: 2, right: 3 })
        ));
        assert!(double_bracket(&a, &b).is_err());
    }

    #[test]
    fn diagonal_pair_has_zero_double_bracket() {
        let h = HermitianMatrix::diagonal(&[1.0, -2.0, 0.5]);
        let g = HermitianMatrix::diagonal(&[0.3, 0.1, -4.0]);
        assert_eq!(double_bracket(&h, &g).unwrap().frobenius_norm(), 0.0);
    }

    #[test]
    fn rejects_non_hermitian_input() {
        let m = ComplexMatrix::from_row_major(vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)]).unwrap();
        assert!(matches!(HermitianMatrix::new(m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn identity_spectrum() {
        let e = eigensystem(&HermitianMatrix::identity(4)).unwrap();
        assert_eq!(e.values, vec![1.0; 4]);
        assert!(e.vectors.unitarity_defect() < 1e-15);
    }

    #[test]
    fn bloch_spectrum_is_half_gap() {
        let h = from_bloch(&BlochDecomposition::new(0.0, 1.0, 1.1, 0.3));
        let e = eigensystem(&h).unwrap();
        assert!((e.values[0] + 0.5).abs() < 1e-15);
        assert!((e.values[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn north_pole_bloch_matrix() {
        let h = from_bloch(&BlochDecomposition::new(0.0, 2.0, 0.0, 0.0));
        assert!(
            h.as_matrix()
                .max_abs_diff(HermitianMatrix::diagonal(&[1.0, -1.0]).as_matrix())
                < 1e-15
        );
        let h = from_bloch(&BlochDecomposition::new(2.0, 0.0, 1.3, 4.0));
        assert!(h.as_matrix().max_abs_diff(HermitianMatrix::identity(2).as_matrix()) < 1e-15);
    }

    #[test]
    fn to_bloch_requires_two_by_two() {
        assert!(to_bloch(&HermitianMatrix::identity(3)).is_err());
    }

    #[test]
    fn degenerate_predicate() {
        assert!(!is_nondegenerate(&HermitianMatrix::identity(3), DEFAULT_GAP_TOL).unwrap());
        assert!(is_nondegenerate(&HermitianMatrix::diagonal(&[0.0, 1.0, 2.0]), DEFAULT_GAP_TOL).unwrap());
    }

    #[test]
    fn jacobi_ties_keep_index_order() {
        let h = HermitianMatrix::diagonal(&[2.0, 1.0, 2.0, 1.0]);
        let e = eigensystem(&h).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 2.0, 2.0]);
        assert_eq!(e.vectors[(1, 0)], ONE);
        assert_eq!(e.vectors[(3, 1)], ONE);
        assert_eq!(e.vectors[(0, 2)], ONE);
    }

    #[test]
    fn jacobi_residuals_on_dense_matrix() {
        let m = ComplexMatrix::from_fn(6, |i, j| {
            let (i, j) = (i as f64, j as f64);
            c((i + j).cos() + if i == j { i } else { 0.0 }, (i - j) * 0.25)
        });
        let h = HermitianMatrix::hermitian_part_of(&m);
        let e = eigensystem(&h).unwrap();
        assert!(e.vectors.unitarity_defect() < 1e-12);
        let norm = h.frobenius_norm();
        for k in 0..6 {
            let v = e.vector(k);
            for i in 0..6 {
                let hv: C64 = (0..6).map(|j| h.get(i, j) * v[j]).sum();
                assert!((hv - v[i] * e.values[k]).norm() <= 1e-10 * norm);
            }
        }
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn too_large_is_rejected() {
        assert!(eigensystem(&HermitianMatrix::identity(9)).is_err());
    }

    #[test]
    fn generators_are_orthonormal_under_trace() {
        for n in 2..=4 {
            let gens = traceless_generators(n);
            assert_eq!(gens.len(), n * n - 1);
            for (a, ga) in gens.iter().enumerate() {
                assert!(ga.trace().abs() < 1e-15);
                for (b, gb) in gens.iter().enumerate() {
                    let t = ga.trace_product(gb).unwrap();
                    let expected = if a == b { 2.0 } else { 0.0 };
                    assert!((t - expected).abs() < 1e-14, "n={n} a={a} b={b} t={t}");
                }
            }
        }
        let paulis = traceless_generators(2);
        assert_eq!(paulis[0], HermitianMatrix::pauli_x());
        assert_eq!(paulis[1], HermitianMatrix::pauli_y());
        assert_eq!(paulis[2], HermitianMatrix::pauli_z());
    }

    #[test]
    fn json_literal_round_trip() {
        let h = from_bloch(&BlochDecomposition::new(0.5, 1.5, 0.7, 1.9));
        let text = h.to_json();
        assert!(text.starts_with("[[["));
        assert_eq!(HermitianMatrix::from_json(&text).unwrap(), h);
        assert!(HermitianMatrix::from_json("[[[1,0],[0,1]],[[0,0],[1,0]]]").is_err());
        assert!(HermitianMatrix::from_json("[[[1,0]],[[0,0],[1,0]]]").is_err());
    }

    #[test]
    fn angle_helpers() {
        assert_eq!(wrap_angle(-0.5), TAU - 0.5);
        assert!((angle_difference(0.1, TAU - 0.1) - 0.2).abs() < 1e-15);
    }
}
