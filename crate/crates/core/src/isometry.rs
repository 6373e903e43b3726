//! The local extraction isometry and the measured self-testing errors.
//!
//! Register layout of every output vector is fixed as
//! `(device A, device B, ancilla A, ancilla B)`, i.e. amplitude index
//! `((iA·dB + iB)·2 + a)·2 + b`.
//!
//! Per party the circuit is: ancilla |0⟩, Hadamard, controlled-Z′ on the
//! device, Hadamard, controlled-X′ on the device.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use serde::Serialize;

use crate::derive::DerivedOperators;
use crate::device::{names, DeviceModel};
use crate::error::{Error, Result};
use crate::linalg::{r, tensor_embed, ComplexMatrix, Party, StateVector, C64};

/// Below this raw norm the candidate junk state is considered meaningless.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Pauli {
    I,
    X,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::I, Pauli::X, Pauli::Z];

    pub fn matrix(self) -> ComplexMatrix {
        match self {
            Pauli::I => ComplexMatrix::identity(2),
            Pauli::X => ComplexMatrix::pauli_x(),
            Pauli::Z => ComplexMatrix::pauli_z(),
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pauli::I => "I",
            Pauli::X => "X",
            Pauli::Z => "Z",
        };
        f.write_str(s)
    }
}

/// Which measured Bob setting is pushed through the isometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BSetting {
    B0,
    B1,
}

impl BSetting {
    pub fn name(self) -> &'static str {
        match self {
            BSetting::B0 => names::B0,
            BSetting::B1 => names::B1,
        }
    }

    /// Ideal qubit action: (X ± Z)/√2.
    pub fn ideal(self) -> ComplexMatrix {
        let x = ComplexMatrix::pauli_x();
        let z = ComplexMatrix::pauli_z();
        match self {
            BSetting::B0 => (&x + &z).scale(FRAC_1_SQRT_2),
            BSetting::B1 => (&x - &z).scale(FRAC_1_SQRT_2),
        }
    }
}

#[derive(Clone, Copy)]
enum Ancilla {
    A,
    B,
}

/// Device registers plus the two ancilla qubits.
struct Register {
    dev: usize,
    amps: Vec<C64>,
}

impl Register {
    fn new(input: &StateVector) -> Self {
        let dev = input.dim();
        let mut amps = vec![r(0.0); dev * 4];
        for (d, &a) in input.amplitudes().iter().enumerate() {
            amps[d * 4] = a;
        }
        Self { dev, amps }
    }

    fn idx(d: usize, a: usize, b: usize) -> usize {
        (d * 2 + a) * 2 + b
    }

    fn hadamard(&mut self, anc: Ancilla) {
        for d in 0..self.dev {
            for other in 0..2 {
                let (i0, i1) = match anc {
                    Ancilla::A => (Self::idx(d, 0, other), Self::idx(d, 1, other)),
                    Ancilla::B => (Self::idx(d, other, 0), Self::idx(d, other, 1)),
                };
                let (x, y) = (self.amps[i0], self.amps[i1]);
                self.amps[i0] = (x + y) * FRAC_1_SQRT_2;
                self.amps[i1] = (x - y) * FRAC_1_SQRT_2;
            }
        }
    }

    /// Applies `op` (already embedded on the device space) where `anc` is |1⟩.
    fn controlled(&mut self, anc: Ancilla, op: &ComplexMatrix) -> Result<()> {
        for other in 0..2 {
            let pos = |d: usize| match anc {
                Ancilla::A => Self::idx(d, 1, other),
                Ancilla::B => Self::idx(d, other, 1),
            };
            let slice = StateVector::from_amplitudes((0..self.dev).map(|d| self.amps[pos(d)]).collect())?;
            let out = op.apply(&slice)?;
            for d in 0..self.dev {
                self.amps[pos(d)] = out.amplitude(d);
            }
        }
        Ok(())
    }

    fn into_state(self) -> Result<StateVector> {
        StateVector::from_amplitudes(self.amps)
    }
}

fn check_dims(state: &StateVector, ops: &DerivedOperators) -> Result<()> {
    let (da, db) = ops.dims();
    if state.dim() != da * db {
        return Err(Error::DimensionMismatch {
            context: "isometry input",
            expected: da * db,
            found: state.dim(),
        });
    }
    Ok(())
}

/// Runs the extraction circuit on an arbitrary device vector.
pub fn isometry_circuit(input: &StateVector, ops: &DerivedOperators) -> Result<StateVector> {
    check_dims(input, ops)?;
    let [xa, za, xb, zb] = ops.embedded()?;
    let mut reg = Register::new(input);
    reg.hadamard(Ancilla::A);
    reg.hadamard(Ancilla::B);
    reg.controlled(Ancilla::A, &za)?;
    reg.controlled(Ancilla::B, &zb)?;
    reg.hadamard(Ancilla::A);
    reg.hadamard(Ancilla::B);
    reg.controlled(Ancilla::A, &xa)?;
    reg.controlled(Ancilla::B, &xb)?;
    reg.into_state()
}

fn derived_for(ops: &DerivedOperators, m: Pauli, party: Party) -> ComplexMatrix {
    let (x, z) = match party {
        Party::A => (&ops.xa, &ops.za),
        Party::B => (&ops.xb, &ops.zb),
    };
    match m {
        Pauli::I => ComplexMatrix::identity(x.dim()),
        Pauli::X => x.clone(),
        Pauli::Z => z.clone(),
    }
}

/// Φ(M′_A N′_B |ψ′⟩).
pub fn apply_isometry(state: &StateVector, ops: &DerivedOperators, m: Pauli, n: Pauli) -> Result<StateVector> {
    check_dims(state, ops)?;
    let local = derived_for(ops, m, Party::A).kron(&derived_for(ops, n, Party::B));
    isometry_circuit(&local.apply(state)?, ops)
}

/// Closed-form four-term expansion of Φ(|ψ′⟩), computed without the circuit.
pub fn expansion_oracle(state: &StateVector, ops: &DerivedOperators) -> Result<StateVector> {
    check_dims(state, ops)?;
    let [xa, za, xb, zb] = ops.embedded()?;
    let id = ComplexMatrix::identity(state.dim());
    let pa = &id + &za;
    let ma = &id - &za;
    let pb = &id + &zb;
    let mb = &id - &zb;
    let terms = [
        (&pa * &pb).apply(state)?,
        (&(&xb * &pa) * &mb).apply(state)?,
        (&(&xa * &ma) * &pb).apply(state)?,
        (&(&(&xa * &xb) * &ma) * &mb).apply(state)?,
    ];
    let mut amps = vec![r(0.0); state.dim() * 4];
    for (k, term) in terms.iter().enumerate() {
        for (d, &z) in term.amplitudes().iter().enumerate() {
            amps[d * 4 + k] = z * 0.25;
        }
    }
    StateVector::from_amplitudes(amps)
}

/// Candidate junk: (I+Z′_A)(I+Z′_B)|ψ′⟩/(2√2), normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct Junk {
    pub state: StateVector,
    pub raw_norm: f64,
}

/// (I+Z′_A)(I+Z′_B)|ψ′⟩/(2√2) before normalization.
pub fn unnormalized_junk(state: &StateVector, ops: &DerivedOperators) -> Result<StateVector> {
    check_dims(state, ops)?;
    let dims = ops.dims();
    let id = ComplexMatrix::identity(state.dim());
    let pa = &id + &tensor_embed(&ops.za, Party::A, dims)?;
    let pb = &id + &tensor_embed(&ops.zb, Party::B, dims)?;
    Ok((&pa * &pb).apply(state)?.scale(1.0 / (2.0 * std::f64::consts::SQRT_2)))
}

pub fn junk_candidate(state: &StateVector, ops: &DerivedOperators, degeneracy_tol: f64) -> Result<Junk> {
    let v = unnormalized_junk(state, ops)?;
    let raw_norm = v.norm();
    if raw_norm < degeneracy_tol {
        return Err(Error::DegenerateExtraction {
            raw_norm,
            tolerance: degeneracy_tol,
        });
    }
    Ok(Junk {
        state: v.scale(1.0 / raw_norm),
        raw_norm,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionResult {
    /// Φ(|ψ′⟩)
    pub output_state: StateVector,
    pub junk: StateVector,
    pub junk_norm_raw: f64,
    pub errors: BTreeMap<(Pauli, Pauli), f64>,
}

impl ExtractionResult {
    pub fn max_error(&self) -> f64 {
        self.errors.values().copied().fold(0.0, f64::max)
    }
}

/// `junk ⊗ target` in the fixed register layout.
fn with_junk(junk: &StateVector, target: &StateVector) -> StateVector {
    junk.kron(target)
}

pub fn extraction_error(state: &StateVector, ops: &DerivedOperators) -> Result<ExtractionResult> {
    extraction_error_with(state, ops, DEFAULT_DEGENERACY_TOL)
}

pub fn extraction_error_with(state: &StateVector, ops: &DerivedOperators, degeneracy_tol: f64) -> Result<ExtractionResult> {
    let junk = junk_candidate(state, ops, degeneracy_tol)?;
    let phi = StateVector::phi_plus();
    let mut errors = BTreeMap::new();
    let mut output_state = None;
    for m in Pauli::ALL {
        for n in Pauli::ALL {
            let out = apply_isometry(state, ops, m, n)?;
            let target = with_junk(&junk.state, &m.matrix().kron(&n.matrix()).apply(&phi)?);
            errors.insert((m, n), out.distance(&target));
            if m == Pauli::I && n == Pauli::I {
                output_state = Some(out);
            }
        }
    }
    Ok(ExtractionResult {
        output_state: output_state.expect("identity pair evaluated"),
        junk: junk.state,
        junk_norm_raw: junk.raw_norm,
        errors,
    })
}

/// ‖Φ(M′_A B′ᵢ|ψ′⟩) − junk ⊗ M_A((X ± Z)/√2)_B|φ₊⟩‖ for the measured Bob setting.
pub fn b_measured_error(device: &DeviceModel, ops: &DerivedOperators, m: Pauli, which: BSetting) -> Result<f64> {
    let junk = junk_candidate(&device.state, ops, DEFAULT_DEGENERACY_TOL)?;
    let b = device.observable(Party::B, which.name())?;
    let local = derived_for(ops, m, Party::A).kron(b);
    let out = isometry_circuit(&local.apply(&device.state)?, ops)?;
    let ideal = m.matrix().kron(&which.ideal()).apply(&StateVector::phi_plus())?;
    Ok(out.distance(&with_junk(&junk.state, &ideal)))
}

/// Smallest error over all unit junk vectors for one (M, N) pair.
///
/// Slack analysis only; certification always uses the fixed candidate junk.
pub fn best_junk_error(state: &StateVector, ops: &DerivedOperators, m: Pauli, n: Pauli) -> Result<f64> {
    let out = apply_isometry(state, ops, m, n)?;
    let target = m.matrix().kron(&n.matrix()).apply(&StateVector::phi_plus())?;
    let dev = state.dim();
    let mut overlap_sq = 0.0;
    for d in 0..dev {
        let mut w = r(0.0);
        for k in 0..4 {
            w += target.amplitude(k).conj() * out.amplitude(d * 4 + k);
        }
        overlap_sq += w.norm_sqr();
    }
    let out_sq = out.norm().powi(2);
    Ok((out_sq + 1.0 - 2.0 * overlap_sq.sqrt()).max(0.0).sqrt())
}
