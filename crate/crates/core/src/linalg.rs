//! Dense complex linear algebra for device-scale operators.
//!
//! Everything here is dense: the devices we certify live in a few dozen
//! dimensions at most. Operator functions (`|M|`, `M/|M|`, `exp(itH)`) are all
//! spectral maps over one Hermitian eigendecomposition.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative threshold below which an eigenvalue counts as zero in [`operator_sign`].
pub const DEFAULT_ZERO_TOL: f64 = 1e-10;

/// Absolute Hermiticity tolerance accepted by [`hermitian_eig`].
pub const HERMITIAN_TOL: f64 = 1e-10;

const EIG_MAX_ITER: usize = 100_000;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Which side of the bipartition an operator lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Party {
    A,
    B,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::A => f.write_str("Alice"),
            Party::B => f.write_str("Bob"),
        }
    }
}

/// Square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    inner: DMatrix<C64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major nested rows. Rows must form a non-empty square.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidShape("matrix has no rows".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidShape(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        Self {
            inner: DMatrix::from_fn(dim, dim, f),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: DMatrix::zeros(dim, dim),
        }
    }

    pub fn diag(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { r(values[i]) } else { r(0.0) })
    }

    pub fn pauli_x() -> Self {
        Self::from_fn(2, |i, j| if i != j { r(1.0) } else { r(0.0) })
    }

    pub fn pauli_z() -> Self {
        Self::diag(&[1.0, -1.0])
    }

    /// `(X + Z)/√2`.
    pub fn pauli_d() -> Self {
        (&Self::pauli_x() + &Self::pauli_z()).scale(std::f64::consts::FRAC_1_SQRT_2)
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.inner[(i, j)]
    }

    pub fn rows(&self) -> Vec<Vec<C64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.inner[(i, j)]).collect())
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            inner: self.inner.adjoint(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            inner: &self.inner * r(s),
        }
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            inner: self.inner.kronecker(&other.inner),
        }
    }

    /// Direct sum `self ⊕ I_extra`.
    pub fn pad_identity(&self, extra: usize) -> Self {
        let d = self.dim();
        Self::from_fn(d + extra, |i, j| {
            if i < d && j < d {
                self.inner[(i, j)]
            } else if i == j {
                r(1.0)
            } else {
                r(0.0)
            }
        })
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "matrix-vector product",
                expected: self.dim(),
                found: v.dim(),
            });
        }
        Ok(StateVector {
            inner: &self.inner * &v.inner,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "max_abs_diff dimension mismatch");
        self.inner
            .iter()
            .zip(other.inner.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// max |M − M†| entrywise.
    pub fn hermiticity_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// max |M² − I| entrywise.
    pub fn involution_deviation(&self) -> f64 {
        (self * self).max_abs_diff(&Self::identity(self.dim()))
    }

    /// max |M†M − I| entrywise.
    pub fn unitarity_deviation(&self) -> f64 {
        (&self.adjoint() * self).max_abs_diff(&Self::identity(self.dim()))
    }

    pub fn hermitian_part(&self) -> Self {
        (self + &self.adjoint()).scale(0.5)
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        &(self * other) + &(other * self)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// `U M U†`.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        &(u * self) * &u.adjoint()
    }

    pub fn trace(&self) -> C64 {
        self.inner.trace()
    }

    pub(crate) fn as_inner(&self) -> &DMatrix<C64> {
        &self.inner
    }

    pub(crate) fn from_inner(inner: DMatrix<C64>) -> Self {
        assert_eq!(inner.nrows(), inner.ncols());
        Self { inner }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner * &rhs.inner,
        }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner + &rhs.inner,
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner - &rhs.inner,
        }
    }
}

/// Complex column vector; physical states have unit 2-norm.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    inner: DVector<C64>,
}

impl StateVector {
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidShape("state has no amplitudes".into()));
        }
        Ok(Self {
            inner: DVector::from_vec(amps),
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: DVector::zeros(dim),
        }
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.inner[k] = r(1.0);
        v
    }

    /// `(|00⟩ + |11⟩)/√2`.
    pub fn phi_plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            inner: DVector::from_vec(vec![r(s), r(0.0), r(0.0), r(s)]),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.inner.as_slice()
    }

    pub fn amplitude(&self, k: usize) -> C64 {
        self.inner[k]
    }

    pub fn norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scale(1.0 / n))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            inner: &self.inner * r(s),
        }
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Self {
            inner: &self.inner * s,
        }
    }

    /// ⟨self|other⟩ (antilinear in `self`).
    pub fn inner(&self, other: &Self) -> C64 {
        self.inner.dotc(&other.inner)
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            inner: self.inner.kronecker(&other.inner),
        }
    }

    /// ⟨ψ|O|ψ⟩.
    pub fn expectation(&self, op: &ComplexMatrix) -> Result<C64> {
        Ok(self.inner(&op.apply(self)?))
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (&self.inner - &other.inner).norm()
    }
}

impl Add for &StateVector {
    type Output = StateVector;
    fn add(self, rhs: Self) -> StateVector {
        StateVector {
            inner: &self.inner + &rhs.inner,
        }
    }
}

impl Sub for &StateVector {
    type Output = StateVector;
    fn sub(self, rhs: Self) -> StateVector {
        StateVector {
            inner: &self.inner - &rhs.inner,
        }
    }
}

/// Spectral decomposition `M = V diag(values) V†`, values ascending.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEig {
    /// `V diag(f(λ)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let v = self.vectors.as_inner();
        let n = v.nrows();
        let mut scaled = v.clone();
        for (k, &lambda) in self.values.iter().enumerate() {
            let fk = f(lambda);
            for i in 0..n {
                scaled[(i, k)] *= fk;
            }
        }
        ComplexMatrix::from_inner(scaled * v.adjoint())
    }

    pub fn max_abs_value(&self) -> f64 {
        self.values.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEig> {
    let deviation = m.hermiticity_deviation();
    if deviation > HERMITIAN_TOL * m.max_abs().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    let sym = m.hermitian_part();
    let eig = nalgebra::SymmetricEigen::try_new(sym.inner, f64::EPSILON, EIG_MAX_ITER)
        .ok_or(Error::EigenConvergence)?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let n = order.len();
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEig {
        values,
        vectors: ComplexMatrix::from_inner(vectors),
    })
}

/// `|M| = √(M²)` for Hermitian `M`.
pub fn operator_abs(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(hermitian_eig(m)?.map(|l| r(l.abs())))
}

/// `M/|M|`, with eigenvalue +1 on the (numerical) kernel of `M`.
///
/// An eigenvalue counts as zero when `|λ| ≤ zero_tol · max|λ|`; the zero matrix maps to `I`.
pub fn operator_sign(m: &ComplexMatrix, zero_tol: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(m)?;
    let cutoff = zero_tol * eig.max_abs_value();
    if eig.max_abs_value() == 0.0 {
        return Ok(ComplexMatrix::identity(m.dim()));
    }
    Ok(eig.map(|l| if l.abs() <= cutoff || l > 0.0 { r(1.0) } else { r(-1.0) }))
}

/// `exp(i t H)` for Hermitian `H`.
pub fn unitary_exp(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    Ok(hermitian_eig(h)?.map(|l| C64::from_polar(1.0, t * l)))
}

/// Embeds a local operator into the bipartite space: `op ⊗ I` for A, `I ⊗ op` for B.
pub fn tensor_embed(op: &ComplexMatrix, party: Party, dims: (usize, usize)) -> Result<ComplexMatrix> {
    let (da, db) = dims;
    let expected = match party {
        Party::A => da,
        Party::B => db,
    };
    if op.dim() != expected {
        return Err(Error::DimensionMismatch {
            context: "tensor_embed",
            expected,
            found: op.dim(),
        });
    }
    Ok(match party {
        Party::A => op.kron(&ComplexMatrix::identity(db)),
        Party::B => ComplexMatrix::identity(da).kron(op),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn random_hermitian(seed: &[f64], n: usize) -> ComplexMatrix {
        let mut k = 0;
        let mut next = || {
            let v = seed[k % seed.len()] * (1.0 + k as f64 * 0.37).sin();
            k += 1;
            v
        };
        let mut m = ComplexMatrix::zeros(n);
        let mut rows = m.rows();
        for i in 0..n {
            rows[i][i] = r(next());
            for j in (i + 1)..n {
                let z = c(next(), next());
                rows[i][j] = z;
                rows[j][i] = z.conj();
            }
        }
        m = ComplexMatrix::from_rows(&rows).unwrap();
        m
    }

    fn reconstruct(e: &HermitianEig) -> ComplexMatrix {
        e.map(r)
    }

    #[test]
    fn eig_of_z_is_sorted_standard_basis() {
        let e = hermitian_eig(&ComplexMatrix::pauli_z()).unwrap();
        assert_eq!(e.values, vec![-1.0, 1.0]);
        assert_abs_diff_eq!(e.vectors.get(1, 0).norm(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors.get(0, 1).norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eig_of_x_has_plus_minus_eigenvectors() {
        let e = hermitian_eig(&ComplexMatrix::pauli_x()).unwrap();
        assert_abs_diff_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        // (|0⟩ - |1⟩)/√2 up to phase for λ = -1
        let v0 = (e.vectors.get(0, 0), e.vectors.get(1, 0));
        assert_abs_diff_eq!((v0.0 + v0.1).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v0.0.norm(), FRAC_1_SQRT_2, epsilon = 1e-14);
        let v1 = (e.vectors.get(0, 1), e.vectors.get(1, 1));
        assert_abs_diff_eq!((v1.0 - v1.1).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn eig_reconstructs_random_6x6() {
        let h = random_hermitian(&[0.3, -1.2, 0.8, 2.1, -0.4, 0.9, 1.7], 6);
        let e = hermitian_eig(&h).unwrap();
        assert!(reconstruct(&e).max_abs_diff(&h) <= 1e-10);
        assert!(e.vectors.unitarity_deviation() <= 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_rows(&[vec![r(0.0), r(1.0)], vec![r(0.0), r(0.0)]]).unwrap();
        match hermitian_eig(&m) {
            Err(Error::NotHermitian { deviation }) => assert_abs_diff_eq!(deviation, 1.0),
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn abs_examples() {
        let a = operator_abs(&ComplexMatrix::diag(&[2.0, -3.0])).unwrap();
        assert!(a.max_abs_diff(&ComplexMatrix::diag(&[2.0, 3.0])) < 1e-14);
        let a = operator_abs(&ComplexMatrix::pauli_x()).unwrap();
        assert!(a.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-14);
        // B0 + B1 = √2 X for the Tsirelson-point measurements
        let b0 = ComplexMatrix::pauli_d();
        let b1 = (&ComplexMatrix::pauli_x() - &ComplexMatrix::pauli_z()).scale(FRAC_1_SQRT_2);
        let sum = &b0 + &b1;
        // direct 2x2 check: sum is √2 X entrywise
        assert!(sum.max_abs_diff(&ComplexMatrix::pauli_x().scale(SQRT_2)) < 1e-15);
        let a = operator_abs(&sum).unwrap();
        assert!(a.max_abs_diff(&ComplexMatrix::identity(2).scale(SQRT_2)) < 1e-14);
    }

    #[test]
    fn sign_examples() {
        let s = operator_sign(&ComplexMatrix::diag(&[2.0, 0.0, -3.0]), DEFAULT_ZERO_TOL).unwrap();
        assert!(s.max_abs_diff(&ComplexMatrix::diag(&[1.0, 1.0, -1.0])) < 1e-14);
        let s = operator_sign(&ComplexMatrix::pauli_x().scale(SQRT_2), DEFAULT_ZERO_TOL).unwrap();
        assert!(s.max_abs_diff(&ComplexMatrix::pauli_x()) < 1e-14);
        let s = operator_sign(&ComplexMatrix::identity(3), DEFAULT_ZERO_TOL).unwrap();
        assert!(s.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-14);
        let s = operator_sign(&ComplexMatrix::zeros(3), DEFAULT_ZERO_TOL).unwrap();
        assert!(s.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn embed_examples() {
        let x = ComplexMatrix::pauli_x();
        let z = ComplexMatrix::pauli_z();
        let xa = tensor_embed(&x, Party::A, (2, 2)).unwrap();
        assert_eq!(xa, x.kron(&ComplexMatrix::identity(2)));
        let zb = tensor_embed(&z, Party::B, (2, 2)).unwrap();
        assert!(xa.commutator(&zb).max_abs() == 0.0);

        // explicit Kronecker oracle: I3 ⊗ Z is diag(1,-1,1,-1,1,-1)
        let zb3 = tensor_embed(&z, Party::B, (3, 2)).unwrap();
        assert_eq!(zb3.dim(), 6);
        let oracle = ComplexMatrix::diag(&[1.0, -1.0, 1.0, -1.0, 1.0, -1.0]);
        assert_eq!(zb3.max_abs_diff(&oracle), 0.0);

        assert!(matches!(
            tensor_embed(&x, Party::B, (2, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn unitary_exp_of_z() {
        let u = unitary_exp(&ComplexMatrix::pauli_z(), 0.3).unwrap();
        assert_abs_diff_eq!((u.get(0, 0) - C64::from_polar(1.0, 0.3)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((u.get(1, 1) - C64::from_polar(1.0, -0.3)).norm(), 0.0, epsilon = 1e-14);
    }

    fn hermitian_strategy() -> impl Strategy<Value = ComplexMatrix> {
        (1usize..6).prop_flat_map(|n| {
            prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |xs| {
                let mut rows = vec![vec![r(0.0); n]; n];
                let mut k = 0;
                for i in 0..n {
                    rows[i][i] = r(xs[k]);
                    k += 1;
                    for j in (i + 1)..n {
                        let z = c(xs[k], xs[k + 1]);
                        k += 2;
                        rows[i][j] = z;
                        rows[j][i] = z.conj();
                    }
                }
                ComplexMatrix::from_rows(&rows).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn sign_is_hermitian_involution(m in hermitian_strategy()) {
            let s = operator_sign(&m, DEFAULT_ZERO_TOL).unwrap();
            prop_assert!(s.hermiticity_deviation() <= 1e-10);
            prop_assert!(s.involution_deviation() <= 1e-10);
        }

        #[test]
        fn sign_times_abs_reconstructs(m in hermitian_strategy()) {
            let e = hermitian_eig(&m).unwrap();
            let gap = e.values.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min);
            prop_assume!(gap > 1e-6 * e.max_abs_value().max(1e-300));
            let s = operator_sign(&m, DEFAULT_ZERO_TOL).unwrap();
            let a = operator_abs(&m).unwrap();
            prop_assert!((&s * &a).max_abs_diff(&m) <= 1e-9);
        }

        #[test]
        fn embedding_preserves_hermiticity_and_unitarity(m in hermitian_strategy(), other in 1usize..4) {
            let s = operator_sign(&m, DEFAULT_ZERO_TOL).unwrap();
            let d = s.dim();
            let ea = tensor_embed(&s, Party::A, (d, other)).unwrap();
            let eb = tensor_embed(&s, Party::B, (other, d)).unwrap();
            for e in [ea, eb] {
                prop_assert!(e.hermiticity_deviation() <= 1e-10);
                prop_assert!(e.unitarity_deviation() <= 1e-10);
            }
        }

        #[test]
        fn unitaries_preserve_norm(m in hermitian_strategy(), t in -3.0f64..3.0) {
            let u = unitary_exp(&m, t).unwrap();
            let n = u.dim();
            let v = StateVector::from_amplitudes((0..n).map(|k| c(k as f64 + 0.5, 1.0 - k as f64)).collect()).unwrap();
            let w = u.apply(&v).unwrap();
            prop_assert!((w.norm() - v.norm()).abs() <= 1e-12 * v.norm().max(1.0));
        }
    }
}
