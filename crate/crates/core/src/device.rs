//! Bipartite devices and the correlation functionals computed from them.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{tensor_embed, ComplexMatrix, Party, StateVector};

pub const STATE_NORM_TOL: f64 = 1e-12;
pub const OBSERVABLE_TOL: f64 = 1e-10;
pub const IMAG_TOL: f64 = 1e-10;

/// Tsirelson's bound, 2√2.
pub const TSIRELSON: f64 = 2.0 * SQRT_2;

pub mod names {
    pub const A0: &str = "A0";
    pub const A1: &str = "A1";
    pub const B0: &str = "B0";
    pub const B1: &str = "B1";
    pub const XA: &str = "XA";
    pub const ZA: &str = "ZA";
    pub const XB: &str = "XB";
    pub const ZB: &str = "ZB";
    pub const DB: &str = "DB";
}

/// Which correlation test a device is meant for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Chsh,
    #[serde(rename = "my")]
    MayersYao,
}

impl Mode {
    pub fn required_observables(self) -> (&'static [&'static str], &'static [&'static str]) {
        match self {
            Mode::Chsh => (&[names::A0, names::A1], &[names::B0, names::B1]),
            Mode::MayersYao => (&[names::XA, names::ZA], &[names::XB, names::ZB, names::DB]),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Chsh => f.write_str("chsh"),
            Mode::MayersYao => f.write_str("my"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "chsh" => Ok(Mode::Chsh),
            "my" | "mayers-yao" => Ok(Mode::MayersYao),
            other => Err(format!("unknown mode `{other}` (expected chsh or my)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ViolationKind {
    StateNorm,
    StateDimension,
    ObservableDimension,
    NotHermitian,
    NotInvolution,
}

/// One failed device invariant.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Violation {
    pub subject: String,
    pub kind: ViolationKind,
    pub deviation: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::StateNorm => "‖ψ‖≠1",
            ViolationKind::StateDimension => "state dimension ≠ dA·dB",
            ViolationKind::ObservableDimension => "dimension mismatch",
            ViolationKind::NotHermitian => "O≠O†",
            ViolationKind::NotInvolution => "O²≠I",
        };
        write!(f, "{}: {}, deviation {}", self.subject, what, self.deviation)
    }
}

/// Shared pure state plus named ±1-valued local observables.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviceModel {
    pub dims: (usize, usize),
    pub state: StateVector,
    pub alice: BTreeMap<String, ComplexMatrix>,
    pub bob: BTreeMap<String, ComplexMatrix>,
}

impl DeviceModel {
    pub fn new(
        dims: (usize, usize),
        state: StateVector,
        alice: BTreeMap<String, ComplexMatrix>,
        bob: BTreeMap<String, ComplexMatrix>,
    ) -> Self {
        Self {
            dims,
            state,
            alice,
            bob,
        }
    }

    pub fn observable(&self, party: Party, name: &str) -> Result<&ComplexMatrix> {
        let map = match party {
            Party::A => &self.alice,
            Party::B => &self.bob,
        };
        map.get(name).ok_or_else(|| Error::UnknownObservable {
            party,
            name: name.to_string(),
        })
    }

    /// Checks every type invariant; an empty list means the device is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let (da, db) = self.dims;
        if da == 0 || db == 0 || self.state.dim() != da * db {
            out.push(Violation {
                subject: "state".into(),
                kind: ViolationKind::StateDimension,
                deviation: (self.state.dim() as f64 - (da * db) as f64).abs(),
            });
        }
        let norm_dev = (self.state.norm() - 1.0).abs();
        if norm_dev > STATE_NORM_TOL {
            out.push(Violation {
                subject: "state".into(),
                kind: ViolationKind::StateNorm,
                deviation: norm_dev,
            });
        }
        for (map, d) in [(&self.alice, da), (&self.bob, db)] {
            for (name, op) in map {
                if op.dim() != d {
                    out.push(Violation {
                        subject: name.clone(),
                        kind: ViolationKind::ObservableDimension,
                        deviation: (op.dim() as f64 - d as f64).abs(),
                    });
                    continue;
                }
                let h = op.hermiticity_deviation();
                if h > OBSERVABLE_TOL {
                    out.push(Violation {
                        subject: name.clone(),
                        kind: ViolationKind::NotHermitian,
                        deviation: h,
                    });
                }
                let s = op.involution_deviation();
                if s > OBSERVABLE_TOL {
                    out.push(Violation {
                        subject: name.clone(),
                        kind: ViolationKind::NotInvolution,
                        deviation: s,
                    });
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidDevice(v))
        }
    }

    pub fn embed(&self, party: Party, op: &ComplexMatrix) -> Result<ComplexMatrix> {
        tensor_embed(op, party, self.dims)
    }

    /// ⟨ψ|(M_A ⊗ I)(I ⊗ N_B)|ψ⟩ for arbitrary local operators.
    pub fn local_expectation(&self, ma: &ComplexMatrix, nb: &ComplexMatrix) -> Result<f64> {
        let op = &self.embed(Party::A, ma)? * &self.embed(Party::B, nb)?;
        let z = self.state.expectation(&op)?;
        if z.im.abs() > IMAG_TOL {
            return Err(Error::NonRealExpectation { imag: z.im });
        }
        Ok(z.re)
    }

    pub fn correlation(&self, alice: &str, bob: &str) -> Result<f64> {
        let ma = self.observable(Party::A, alice)?;
        let nb = self.observable(Party::B, bob)?;
        self.local_expectation(ma, nb)
    }

    /// CHSH combination ⟨A0B0⟩+⟨A0B1⟩+⟨A1B0⟩−⟨A1B1⟩ and its deficit from 2√2.
    pub fn chsh_value(&self) -> Result<ChshValue> {
        use names::*;
        let value = self.correlation(A0, B0)? + self.correlation(A0, B1)?
            + self.correlation(A1, B0)?
            - self.correlation(A1, B1)?;
        Ok(ChshValue {
            value,
            epsilon: (TSIRELSON - value).max(0.0),
        })
    }

    /// All six Mayers-Yao correlations and their maximal deviation from the ideal.
    pub fn my_deviation(&self) -> Result<(CorrelationTable, f64)> {
        let mut table = CorrelationTable::default();
        let mut eps: f64 = 0.0;
        for (m, n, ideal) in my_targets() {
            let v = self.correlation(m, n)?;
            eps = eps.max((v - ideal).abs());
            table.entries.insert((m.to_string(), n.to_string()), v);
        }
        Ok((table, eps))
    }

    /// Observed deviation ε for the given test.
    pub fn deviation(&self, mode: Mode) -> Result<f64> {
        match mode {
            Mode::Chsh => Ok(self.chsh_value()?.epsilon),
            Mode::MayersYao => Ok(self.my_deviation()?.1),
        }
    }

    /// Device seen in local bases rotated by `ua ⊗ ub`.
    pub fn conjugated(&self, ua: &ComplexMatrix, ub: &ComplexMatrix) -> Result<Self> {
        let u = ua.kron(ub);
        Ok(Self {
            dims: self.dims,
            state: u.apply(&self.state)?,
            alice: self
                .alice
                .iter()
                .map(|(k, v)| (k.clone(), v.conjugate_by(ua)))
                .collect(),
            bob: self
                .bob
                .iter()
                .map(|(k, v)| (k.clone(), v.conjugate_by(ub)))
                .collect(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChshValue {
    pub value: f64,
    /// max(0, 2√2 − value)
    pub epsilon: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorrelationTable {
    pub entries: BTreeMap<(String, String), f64>,
}

impl CorrelationTable {
    pub fn get(&self, alice: &str, bob: &str) -> Option<f64> {
        self.entries.get(&(alice.to_string(), bob.to_string())).copied()
    }
}

/// `(M, N, ⟨φ₊|M⊗N|φ₊⟩)` for M ∈ {X,Z}, N ∈ {X,Z,D}.
pub fn my_targets() -> [(&'static str, &'static str, f64); 6] {
    use names::*;
    let d = std::f64::consts::FRAC_1_SQRT_2;
    [
        (XA, XB, 1.0),
        (XA, ZB, 0.0),
        (XA, DB, d),
        (ZA, XB, 0.0),
        (ZA, ZB, 1.0),
        (ZA, DB, d),
    ]
}

/// CHSH deficit from four correlation values, clamped at zero.
pub fn chsh_epsilon(a0b0: f64, a0b1: f64, a1b0: f64, a1b1: f64) -> f64 {
    (TSIRELSON - (a0b0 + a0b1 + a1b0 - a1b1)).max(0.0)
}
