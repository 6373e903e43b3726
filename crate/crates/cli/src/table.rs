//! Guarantees available from a correlation table alone, without a device model.

use std::collections::BTreeMap;

use serde::Serialize;

use selftest::bounds::{b_operator_bound, my_fidelity_bound, theorem1_bound};
use selftest::derive::{budget_for, EpsilonBudget};
use selftest::device::{chsh_epsilon, my_targets, names};
use selftest::Mode;

use crate::CliError;

pub const TABLE_SCHEMA: &str = "selftest.correlations/1";

const ALICE: [&str; 4] = [names::A0, names::A1, names::XA, names::ZA];
const BOB: [&str; 5] = [names::B0, names::B1, names::XB, names::ZB, names::DB];

/// Expectation values keyed by concatenated observable names, e.g. `A0B1` or `ZADB`.
pub fn parse_table(bytes: &[u8]) -> Result<BTreeMap<String, f64>, CliError> {
    let table: BTreeMap<String, f64> =
        serde_json::from_slice(bytes).map_err(|e| CliError::Parse(format!("correlation table: {e}")))?;
    for (key, value) in &table {
        let known = ALICE
            .iter()
            .any(|a| key.strip_prefix(a).is_some_and(|rest| BOB.contains(&rest)));
        if !known {
            return Err(CliError::Schema(format!("unknown correlation `{key}`")));
        }
        if !(-1.0..=1.0).contains(value) {
            return Err(CliError::Schema(format!("correlation `{key}` = {value} outside [-1, 1]")));
        }
    }
    Ok(table)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TableReport {
    pub schema_version: &'static str,
    pub mode: Mode,
    pub epsilon: f64,
    pub budgets: EpsilonBudget,
    /// Extraction-error bound composed from the certifying budgets.
    pub theorem1_bound: f64,
    /// CHSH only.
    pub b_operator_bound: Option<f64>,
    pub fidelity_bound: Option<f64>,
    pub note: &'static str,
}

fn lookup(table: &BTreeMap<String, f64>, a: &str, b: &str) -> Result<f64, CliError> {
    table
        .get(&format!("{a}{b}"))
        .copied()
        .ok_or_else(|| CliError::Schema(format!("missing correlation `{a}{b}`")))
}

pub fn table_epsilon(table: &BTreeMap<String, f64>, mode: Mode) -> Result<f64, CliError> {
    Ok(match mode {
        Mode::Chsh => chsh_epsilon(
            lookup(table, names::A0, names::B0)?,
            lookup(table, names::A0, names::B1)?,
            lookup(table, names::A1, names::B0)?,
            lookup(table, names::A1, names::B1)?,
        ),
        Mode::MayersYao => {
            let mut eps = 0.0f64;
            for (a, b, ideal) in my_targets() {
                eps = eps.max((lookup(table, a, b)? - ideal).abs());
            }
            eps
        }
    })
}

pub fn table_report(table: &BTreeMap<String, f64>, mode: Mode) -> Result<TableReport, CliError> {
    let epsilon = table_epsilon(table, mode)?;
    let budgets = budget_for(mode, epsilon);
    let theorem1 = theorem1_bound(budgets.certifying_eps1(), budgets.certifying_eps2())?;
    let b = match mode {
        Mode::Chsh if epsilon == 0.0 => Some(0.0),
        Mode::Chsh => b_operator_bound(epsilon).ok(),
        Mode::MayersYao => None,
    };
    let fidelity = match mode {
        Mode::MayersYao => Some(my_fidelity_bound(epsilon)?),
        Mode::Chsh => None,
    };
    Ok(TableReport {
        schema_version: TABLE_SCHEMA,
        mode,
        epsilon,
        budgets,
        theorem1_bound: theorem1,
        b_operator_bound: b,
        fidelity_bound: fidelity,
        note: "correlation table only: no device model, so no isometry or extraction error is evaluated",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    fn chsh(values: [f64; 4]) -> BTreeMap<String, f64> {
        ["A0B0", "A0B1", "A1B0", "A1B1"]
            .iter()
            .zip(values)
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    #[test]
    fn exact_chsh_table() {
        let d = FRAC_1_SQRT_2;
        let rep = table_report(&chsh([d, d, d, -d]), Mode::Chsh).unwrap();
        assert!(rep.epsilon <= 1e-15);
        assert!(rep.budgets.eps1 <= 1e-7 && rep.theorem1_bound <= 1e-3);
    }

    #[test]
    fn chsh_table_at_2_80() {
        let rep = table_report(&chsh([0.7, 0.7, 0.7, -0.7]), Mode::Chsh).unwrap();
        assert_abs_diff_eq!(rep.epsilon, 2.0 * SQRT_2 - 2.8, epsilon = 1e-15);
        assert_abs_diff_eq!(rep.epsilon, 0.02843, epsilon = 1e-5);
        assert_abs_diff_eq!(rep.budgets.eps1, 2.0 * (rep.epsilon * SQRT_2).sqrt(), epsilon = 1e-15);
        assert!(rep.b_operator_bound.is_some());
    }

    #[test]
    fn my_table() {
        let d = FRAC_1_SQRT_2;
        let t: BTreeMap<String, f64> = [
            ("XAXB", 0.99),
            ("XAZB", 0.0),
            ("XADB", d),
            ("ZAXB", 0.0),
            ("ZAZB", 1.0),
            ("ZADB", d),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let rep = table_report(&t, Mode::MayersYao).unwrap();
        assert_abs_diff_eq!(rep.epsilon, 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(rep.budgets.eps2, 0.02f64.sqrt(), epsilon = 1e-15);
        assert!(rep.fidelity_bound.is_some());
    }

    #[test]
    fn table_errors() {
        assert!(parse_table(br#"{"A0B0": 1.5}"#).is_err());
        assert!(parse_table(br#"{"Q0B0": 0.5}"#).is_err());
        assert!(parse_table(br#"{"A0B0": "x"}"#).is_err());
        let partial = parse_table(br#"{"A0B0": 0.5}"#).unwrap();
        assert!(table_report(&partial, Mode::Chsh).is_err());
    }
}
