//! Versioned JSON documents for devices and certification reports.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use selftest::linalg::{c, C64};
use selftest::{CertificationReport, ComplexMatrix, DeviceModel, Mode, StateVector};

use crate::CliError;

pub const DEVICE_SCHEMA: &str = "selftest.device/1";
pub const REPORT_SCHEMA: &str = "selftest.report/1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A complex number as `[re, im]`.
pub type Pair = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observables {
    pub alice: BTreeMap<String, Vec<Vec<Pair>>>,
    pub bob: BTreeMap<String, Vec<Vec<Pair>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DeviceDocument {
    pub schema_version: String,
    pub dims: [usize; 2],
    pub state: Vec<Pair>,
    pub observables: Observables,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

fn to_pair(z: C64) -> Pair {
    [z.re, z.im]
}

fn matrix_to_rows(m: &ComplexMatrix) -> Vec<Vec<Pair>> {
    m.rows().into_iter().map(|row| row.into_iter().map(to_pair).collect()).collect()
}

fn rows_to_matrix(subject: &str, rows: &[Vec<Pair>]) -> Result<ComplexMatrix, CliError> {
    let rows: Vec<Vec<C64>> = rows
        .iter()
        .map(|row| row.iter().map(|p| c(p[0], p[1])).collect())
        .collect();
    ComplexMatrix::from_rows(&rows).map_err(|e| CliError::Schema(format!("observable {subject}: {e}")))
}

impl DeviceDocument {
    pub fn from_model(device: &DeviceModel, metadata: BTreeMap<String, serde_json::Value>) -> Self {
        let convert = |m: &BTreeMap<String, ComplexMatrix>| m.iter().map(|(k, v)| (k.clone(), matrix_to_rows(v))).collect();
        Self {
            schema_version: DEVICE_SCHEMA.to_string(),
            dims: [device.dims.0, device.dims.1],
            state: device.state.amplitudes().iter().copied().map(to_pair).collect(),
            observables: Observables {
                alice: convert(&device.alice),
                bob: convert(&device.bob),
            },
            metadata,
        }
    }

    /// Schema-level conversion; device invariants are checked separately.
    pub fn to_model(&self) -> Result<DeviceModel, CliError> {
        if self.schema_version != DEVICE_SCHEMA {
            return Err(CliError::Schema(format!(
                "unrecognized schemaVersion `{}` (expected `{DEVICE_SCHEMA}`)",
                self.schema_version
            )));
        }
        if self.state.is_empty() {
            return Err(CliError::Schema("state has no amplitudes".into()));
        }
        let state = StateVector::from_amplitudes(self.state.iter().map(|p| c(p[0], p[1])).collect())
            .map_err(|e| CliError::Schema(format!("state: {e}")))?;
        let convert = |prefix: &str, m: &BTreeMap<String, Vec<Vec<Pair>>>| {
            m.iter()
                .map(|(k, rows)| rows_to_matrix(&format!("{prefix}.{k}"), rows).map(|mat| (k.clone(), mat)))
                .collect::<Result<BTreeMap<_, _>, _>>()
        };
        Ok(DeviceModel::new(
            (self.dims[0], self.dims[1]),
            state,
            convert("alice", &self.observables.alice)?,
            convert("bob", &self.observables.bob)?,
        ))
    }
}

pub fn parse_device(bytes: &[u8]) -> Result<DeviceDocument, CliError> {
    serde_json::from_slice(bytes).map_err(|e| CliError::Parse(format!("device document: {e}")))
}

/// A device read from disk, validated, together with its raw bytes' digest.
pub struct LoadedDevice {
    pub model: DeviceModel,
    pub document: DeviceDocument,
    pub digest: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load_device(path: &Path) -> Result<LoadedDevice, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let document = parse_device(&bytes)?;
    let model = document.to_model()?;
    let violations = model.validate();
    if !violations.is_empty() {
        return Err(CliError::Core(selftest::Error::InvalidDevice(violations)));
    }
    Ok(LoadedDevice {
        model,
        document,
        digest: sha256_hex(&bytes),
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportDocument<'a> {
    pub schema_version: &'static str,
    pub mode: Mode,
    pub inputs_digest: String,
    pub tool_version: &'static str,
    pub report: &'a CertificationReport,
}

impl<'a> ReportDocument<'a> {
    pub fn new(report: &'a CertificationReport, inputs_digest: String) -> Self {
        Self {
            schema_version: REPORT_SCHEMA,
            mode: report.mode,
            inputs_digest,
            tool_version: TOOL_VERSION,
            report,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(format!("serialization: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use selftest::explorer::{canonical_chsh_device, FamilyKind, FamilySpec, make_family};

    #[test]
    fn round_trip_is_exact() {
        let spec = FamilySpec::new(FamilyKind::Random, Mode::Chsh, (3, 2), 17);
        let device = make_family(&spec).unwrap().remove(0);
        let doc = DeviceDocument::from_model(&device, BTreeMap::new());
        let text = serde_json::to_string(&doc).unwrap();
        let back = parse_device(text.as_bytes()).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_model().unwrap(), device);
    }

    #[test]
    fn schema_errors() {
        let mut doc = DeviceDocument::from_model(&canonical_chsh_device(), BTreeMap::new());
        doc.schema_version = "other/2".into();
        assert!(matches!(doc.to_model(), Err(CliError::Schema(_))));
        assert!(matches!(parse_device(b"{\"schemaVersion\": "), Err(CliError::Parse(_))));
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
