//! Closed-form robustness bounds and the certification engine.

use std::f64::consts::SQRT_2;
use std::fmt;

use serde::Serialize;

use crate::derive::{
    appendix_chsh_residuals, appendix_my_residuals, budget_for, chsh_keys, condition_residuals,
    extraction_estimates, my_keys, operators_for, EpsilonBudget, ResidualSet,
};
use crate::device::{DeviceModel, Mode};
use crate::error::{Error, Result};
use crate::isometry::{
    b_measured_error, extraction_error, isometry_circuit, unnormalized_junk, BSetting, ExtractionResult, Pauli,
};
use crate::linalg::StateVector;

pub const DEFAULT_CERT_TOL: f64 = 1e-9;

/// ε at which the fidelity formula is compared with the quoted prose value.
pub const FIDELITY_PROSE_EPSILON: f64 = 1e-4;
/// Fidelity value quoted in prose for [`FIDELITY_PROSE_EPSILON`].
pub const FIDELITY_PROSE_VALUE: f64 = 0.20;

fn check_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeArgument { name, value })
    }
}

/// (11ε₁ + 5ε₂)/2
pub fn theorem1_bound(eps1: f64, eps2: f64) -> Result<f64> {
    check_nonnegative("eps1", eps1)?;
    check_nonnegative("eps2", eps2)?;
    Ok((11.0 * eps1 + 5.0 * eps2) / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StateBounds {
    /// ε₁ + 2ε₂
    pub pre_normalization: f64,
    /// (3/2)ε₁ + (5/2)ε₂
    pub normalized: f64,
}

pub fn state_bounds(eps1: f64, eps2: f64) -> Result<StateBounds> {
    check_nonnegative("eps1", eps1)?;
    check_nonnegative("eps2", eps2)?;
    Ok(StateBounds {
        pre_normalization: eps1 + 2.0 * eps2,
        normalized: 1.5 * eps1 + 2.5 * eps2,
    })
}

fn b_operator_formula(epsilon: f64) -> f64 {
    SQRT_2 * epsilon + 2.0 * SQRT_2 * (epsilon * SQRT_2).powf(0.25)
}

/// √2ε + 2√2(ε√2)^{1/4}, for 0 < ε < 1.
pub fn b_operator_bound(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::EpsilonOutOfRange {
            value: epsilon,
            domain: "(0, 1)",
        });
    }
    Ok(b_operator_formula(epsilon))
}

/// 1 − ¼(9√2ε + 2^{1/4}·100·ε^{1/2} + 2^{3/8}·60·ε^{3/4}), clamped at 0.
pub fn my_fidelity_bound(epsilon: f64) -> Result<f64> {
    check_nonnegative("epsilon", epsilon)?;
    let loss = 9.0 * SQRT_2 * epsilon
        + 2f64.powf(0.25) * 100.0 * epsilon.sqrt()
        + 2f64.powf(0.375) * 60.0 * epsilon.powf(0.75);
    Ok((1.0 - loss / 4.0).max(0.0))
}

/// The fidelity formula next to the prose value at the same ε, without adjudicating.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FidelityComparison {
    pub epsilon: f64,
    pub formula_value: f64,
    pub prose_value: f64,
    pub discrepancy: bool,
}

impl fmt::Display for FidelityComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "fidelity bound at ε = {:e}: formula {:.6}, prose {:.2}{}",
            self.epsilon,
            self.formula_value,
            self.prose_value,
            if self.discrepancy { " [DISCREPANCY]" } else { "" }
        )
    }
}

pub fn fidelity_prose_comparison() -> FidelityComparison {
    let formula_value = my_fidelity_bound(FIDELITY_PROSE_EPSILON).expect("positive epsilon");
    FidelityComparison {
        epsilon: FIDELITY_PROSE_EPSILON,
        formula_value,
        prose_value: FIDELITY_PROSE_VALUE,
        discrepancy: (formula_value - FIDELITY_PROSE_VALUE).abs() > 0.005,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

/// One measured quantity compared against one bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportRow {
    pub name: String,
    /// The bound this row checks, by role and formula.
    pub anchor: String,
    pub relation: Relation,
    /// `None` when the quantity could not be measured (degenerate extraction).
    pub measured: Option<f64>,
    /// Bound used for `pass`.
    pub bound: f64,
    /// Leading-order bound as printed, when it differs from `bound`.
    pub printed_bound: Option<f64>,
    /// Bound with every term of the estimate chain kept, when it differs.
    pub exact_bound: Option<f64>,
    pub pass: bool,
    /// Distance to the bound on the safe side; negative means violated.
    pub slack: Option<f64>,
}

impl ReportRow {
    fn new(name: impl Into<String>, anchor: impl Into<String>, relation: Relation, measured: Option<f64>, bound: f64, tol: f64) -> Self {
        let slack = measured.map(|m| match relation {
            Relation::Le => bound - m,
            Relation::Ge => m - bound,
        });
        Self {
            name: name.into(),
            anchor: anchor.into(),
            relation,
            measured,
            bound,
            printed_bound: None,
            exact_bound: None,
            pass: slack.is_some_and(|s| s >= -tol),
            slack,
        }
    }

    fn le(name: impl Into<String>, anchor: impl Into<String>, measured: Option<f64>, bound: f64, tol: f64) -> Self {
        Self::new(name, anchor, Relation::Le, measured, bound, tol)
    }

    fn ge(name: impl Into<String>, anchor: impl Into<String>, measured: Option<f64>, bound: f64, tol: f64) -> Self {
        Self::new(name, anchor, Relation::Ge, measured, bound, tol)
    }

    fn grades(mut self, printed: Option<f64>, exact: Option<f64>) -> Self {
        self.printed_bound = printed;
        self.exact_bound = exact;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CertificationReport {
    pub mode: Mode,
    /// Observed deviation from the ideal correlations.
    pub epsilon: f64,
    /// Whether ε lies in the range where the budget formulas are claimed (ε < 1).
    pub premise_holds: bool,
    pub cert_tol: f64,
    pub budgets: EpsilonBudget,
    pub residuals: ResidualSet,
    pub measured_eps1: f64,
    pub measured_eps2: f64,
    /// Condition residuals against the ε-budget.
    pub conditions: Vec<ReportRow>,
    /// Intermediate estimates of the budget derivation and the extraction proof.
    pub appendix: Vec<ReportRow>,
    /// One row per (M, N) pair, bounded via the measured residuals.
    pub extraction: Vec<ReportRow>,
    /// Measured Bob settings pushed through the isometry (CHSH only).
    pub b_operator: Vec<ReportRow>,
    pub state_error: ReportRow,
    /// Maximal extraction error against the bound composed from the ε-budget.
    pub end_to_end: ReportRow,
    pub fidelity_bound: f64,
    pub fidelity_comparison: FidelityComparison,
    pub degenerate: Option<String>,
}

impl CertificationReport {
    pub fn rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.conditions
            .iter()
            .chain(&self.appendix)
            .chain(&self.extraction)
            .chain(&self.b_operator)
            .chain([&self.state_error, &self.end_to_end])
    }

    pub fn all_pass(&self) -> bool {
        self.rows().all(|r| r.pass)
    }

    pub fn failures(&self) -> Vec<&ReportRow> {
        self.rows().filter(|r| !r.pass).collect()
    }

    pub fn row(&self, name: &str) -> Option<&ReportRow> {
        self.rows().find(|r| r.name == name)
    }

    pub fn max_extraction_error(&self) -> Option<f64> {
        self.extraction
            .iter()
            .map(|r| r.measured)
            .try_fold(0.0f64, |acc, m| m.map(|v| acc.max(v)))
    }
}

/// Number of rows `certify` emits in each mode.
pub fn expected_row_count(mode: Mode) -> usize {
    let appendix = match mode {
        Mode::Chsh => CHSH_APPENDIX_ROWS,
        Mode::MayersYao => MY_APPENDIX_ROWS,
    } + GENERIC_APPENDIX_ROWS;
    let b = if mode == Mode::Chsh { 6 } else { 0 };
    4 + appendix + 9 + b + 2
}

const CHSH_APPENDIX_ROWS: usize = 13;
const MY_APPENDIX_ROWS: usize = 6;
const GENERIC_APPENDIX_ROWS: usize = 7;

fn condition_rows(res: &ResidualSet, b: &EpsilonBudget, tol: f64) -> Vec<ReportRow> {
    let e1 = b.certifying_eps1();
    let e2 = b.certifying_eps2();
    let anti = |name: &str, v: f64| {
        ReportRow::le(name, "anticommutation budget: 2ε₁", Some(v), 2.0 * e1, tol)
            .grades(Some(2.0 * b.eps1), Some(2.0 * b.eps1_exact))
    };
    let diff = |name: &str, v: f64| {
        ReportRow::le(name, "correlation budget: ε₂", Some(v), e2, tol).grades(Some(b.eps2), Some(b.eps2_exact))
    };
    vec![
        anti("condition.anticomm_a", res.anticomm_a),
        anti("condition.anticomm_b", res.anticomm_b),
        diff("condition.diff_x", res.diff_x),
        diff("condition.diff_z", res.diff_z),
    ]
}

fn chsh_appendix_rows(device: &DeviceModel, b: &EpsilonBudget, tol: f64) -> Result<Vec<ReportRow>> {
    use chsh_keys::*;
    let m = appendix_chsh_residuals(device)?;
    let delta = b.delta.unwrap_or(0.0);
    let sd = delta.sqrt();
    let ep = b.eps_prime;
    let lin = SQRT_2 * (1.0 - ep);
    let align = (sd + 2.0 * ep).max(0.0).sqrt();
    let key = |k: &str| format!("appendix.{k}");
    let rows = vec![
        ReportRow::ge(key(COMMUTATOR_PRODUCT), "squared CHSH operator: 4 − δ", Some(m[COMMUTATOR_PRODUCT]), 4.0 - delta, tol),
        ReportRow::le(key(A0A1_PLUS_B1B0), "product alignment: √δ", Some(m[A0A1_PLUS_B1B0]), sd, tol),
        ReportRow::le(key(A0A1_MINUS_B0B1), "product alignment: √δ", Some(m[A0A1_MINUS_B0B1]), sd, tol),
        ReportRow::le(key(A1A0_MINUS_B1B0), "product alignment: √δ", Some(m[A1A0_MINUS_B1B0]), sd, tol),
        ReportRow::le(key(A1A0_PLUS_B0B1), "product alignment: √δ", Some(m[A1A0_PLUS_B0B1]), sd, tol),
        ReportRow::le(key(ANTICOMM_A), "measured anticommutator: 2√δ", Some(m[ANTICOMM_A]), 2.0 * sd, tol),
        ReportRow::le(key(ANTICOMM_B), "measured anticommutator: 2√δ", Some(m[ANTICOMM_B]), 2.0 * sd, tol),
        ReportRow::ge(key(XA_B_SUM), "X′_A(B′₀+B′₁) correlation: √2(1−ε′)", Some(m[XA_B_SUM]), lin, tol),
        ReportRow::ge(key(ZA_B_DIFF), "Z′_A(B′₀−B′₁) correlation: √2(1−ε′)", Some(m[ZA_B_DIFF]), lin, tol),
        ReportRow::le(key(XA_MINUS_B_SUM), "X′_A alignment: √(ε₁+2ε′)", Some(m[XA_MINUS_B_SUM]), align, tol),
        ReportRow::le(key(XB_MINUS_B_SUM), "X′_B alignment: √(ε₁+2ε′)", Some(m[XB_MINUS_B_SUM]), align, tol),
        ReportRow::le(key(ZA_MINUS_B_DIFF), "Z′_A alignment: √(ε₁+2ε′)", Some(m[ZA_MINUS_B_DIFF]), align, tol),
        ReportRow::le(key(ZB_MINUS_B_DIFF), "Z′_B alignment: √(ε₁+2ε′)", Some(m[ZB_MINUS_B_DIFF]), align, tol),
    ];
    debug_assert_eq!(rows.len(), CHSH_APPENDIX_ROWS);
    Ok(rows)
}

fn my_appendix_rows(device: &DeviceModel, b: &EpsilonBudget, tol: f64) -> Result<Vec<ReportRow>> {
    use my_keys::*;
    let m = appendix_my_residuals(device)?;
    let e = b.epsilon;
    let ep = b.eps_prime;
    let r2e = (2.0 * e).sqrt();
    let key = |k: &str| format!("appendix.{k}");
    let rows = vec![
        ReportRow::le(key(S_NORM), "(X′_A+Z′_A)/√2 norm: √(1+ε+√(2ε))", Some(m[S_NORM]), (1.0 + e + r2e).sqrt(), tol),
        ReportRow::le(key(DB_MINUS_S), "D′_B alignment: ε′", Some(m[DB_MINUS_S]), ep, tol),
        ReportRow::le(key(ANTICOMM_A), "Alice anticommutator: 2(1+√2)ε′", Some(m[ANTICOMM_A]), 2.0 * (1.0 + SQRT_2) * ep, tol),
        ReportRow::le(key(ZAXA_MINUS_XBZB), "product transfer: 2√(2ε)", Some(m[ZAXA_MINUS_XBZB]), 2.0 * r2e, tol),
        ReportRow::le(key(XAZA_MINUS_ZBXB), "product transfer: 2√(2ε)", Some(m[XAZA_MINUS_ZBXB]), 2.0 * r2e, tol),
        ReportRow::le(
            key(ANTICOMM_B),
            "Bob anticommutator: 2(1+√2)ε′ + 4√(2ε)",
            Some(m[ANTICOMM_B]),
            2.0 * (1.0 + SQRT_2) * ep + 4.0 * r2e,
            tol,
        ),
    ];
    debug_assert_eq!(rows.len(), MY_APPENDIX_ROWS);
    Ok(rows)
}

/// Rows of the generic extraction proof, driven by the measured ε₁, ε₂.
fn generic_appendix_rows(
    state: &StateVector,
    ops: &crate::derive::DerivedOperators,
    e1: f64,
    e2: f64,
    tol: f64,
) -> Result<Vec<ReportRow>> {
    let est = extraction_estimates(state, ops)?;
    let junk = unnormalized_junk(state, ops)?;
    let raw = junk.norm();
    let pre = isometry_circuit(state, ops)?.distance(&junk.kron(&StateVector::phi_plus()));
    let printed_lo = (1.0 - e1 - e2).max(0.0).sqrt();
    let exact_lo = (1.0 - e1 - e2 - e2 * e2 / 4.0).max(0.0).sqrt();
    let rows = vec![
        ReportRow::le("appendix.expect_za", "local marginal: ε₁+ε₂", Some(est.expect_za.abs()), e1 + e2, tol),
        ReportRow::le("appendix.expect_zb", "local marginal: ε₁+ε₂", Some(est.expect_zb.abs()), e1 + e2, tol),
        ReportRow::le("appendix.junk_norm_upper", "junk norm: √(1+ε₁+ε₂)", Some(raw), (1.0 + e1 + e2).sqrt(), tol),
        ReportRow::ge("appendix.junk_norm_lower", "junk norm: √(1−ε₁−ε₂−ε₂²/4)", Some(raw), exact_lo, tol)
            .grades(Some(printed_lo), Some(exact_lo)),
        ReportRow::le(
            "appendix.cross_terms",
            "mixed projector terms: 2ε₂",
            Some(est.cross_term_ab.max(est.cross_term_ba)),
            2.0 * e2,
            tol,
        ),
        ReportRow::le("appendix.outer_terms_gap", "outer terms: 4(ε₁+ε₂)", Some(est.outer_terms_gap), 4.0 * (e1 + e2), tol),
        ReportRow::le("appendix.state_pre_normalization", "unnormalized state: ε₁+2ε₂", Some(pre), e1 + 2.0 * e2, tol),
    ];
    debug_assert_eq!(rows.len(), GENERIC_APPENDIX_ROWS);
    Ok(rows)
}

fn extraction_rows(result: Option<&ExtractionResult>, bound: f64, tol: f64) -> Vec<ReportRow> {
    let mut rows = Vec::with_capacity(9);
    for m in Pauli::ALL {
        for n in Pauli::ALL {
            let measured = result.map(|r| r.errors[&(m, n)]);
            rows.push(ReportRow::le(
                format!("extraction.{m}{n}"),
                "extraction error: (11ε₁+5ε₂)/2",
                measured,
                bound,
                tol,
            ));
        }
    }
    rows
}

fn b_rows(device: &DeviceModel, ops: &crate::derive::DerivedOperators, epsilon: f64, usable: bool, tol: f64) -> Result<Vec<ReportRow>> {
    let bound = b_operator_formula(epsilon);
    let mut rows = Vec::with_capacity(6);
    for m in Pauli::ALL {
        for which in [BSetting::B0, BSetting::B1] {
            let measured = if usable {
                Some(b_measured_error(device, ops, m, which)?)
            } else {
                None
            };
            rows.push(ReportRow::le(
                format!("b_operator.{m}{}", which.name()),
                "measured Bob setting: √2ε + 2√2(ε√2)^{1/4}",
                measured,
                bound,
                tol,
            ));
        }
    }
    Ok(rows)
}

/// Full measured-vs-bound report for `device` under the given test.
pub fn certify(device: &DeviceModel, mode: Mode, cert_tol: f64) -> Result<CertificationReport> {
    device.ensure_valid()?;
    if !(cert_tol >= 0.0) {
        return Err(Error::NegativeArgument {
            name: "cert_tol",
            value: cert_tol,
        });
    }
    let epsilon = device.deviation(mode)?;
    let budgets = budget_for(mode, epsilon);
    let ops = operators_for(device, mode)?;
    let state = &device.state;
    let residuals = condition_residuals(state, &ops)?;
    let (e1, e2) = (residuals.eps1(), residuals.eps2());

    let conditions = condition_rows(&residuals, &budgets, cert_tol);
    let mut appendix = match mode {
        Mode::Chsh => chsh_appendix_rows(device, &budgets, cert_tol)?,
        Mode::MayersYao => my_appendix_rows(device, &budgets, cert_tol)?,
    };
    appendix.extend(generic_appendix_rows(state, &ops, e1, e2, cert_tol)?);

    let (extraction_result, degenerate) = match extraction_error(state, &ops) {
        Ok(r) => (Some(r), None),
        Err(Error::DegenerateExtraction { raw_norm, tolerance }) => (
            None,
            Some(format!("junk norm {raw_norm:.3e} below degeneracy tolerance {tolerance:.1e}")),
        ),
        Err(e) => return Err(e),
    };
    let t1 = theorem1_bound(e1, e2)?;
    let extraction = extraction_rows(extraction_result.as_ref(), t1, cert_tol);

    let b_operator = match mode {
        Mode::Chsh => b_rows(device, &ops, epsilon, extraction_result.is_some(), cert_tol)?,
        Mode::MayersYao => Vec::new(),
    };

    let sb = state_bounds(e1, e2)?;
    let state_error = ReportRow::le(
        "state_error",
        "normalized state: (3/2)ε₁+(5/2)ε₂",
        extraction_result.as_ref().map(|r| r.errors[&(Pauli::I, Pauli::I)]),
        sb.normalized,
        cert_tol,
    );

    let printed = theorem1_bound(budgets.eps1, budgets.eps2)?;
    let exact = theorem1_bound(budgets.eps1_exact, budgets.eps2_exact)?;
    let end_to_end = ReportRow::le(
        "end_to_end",
        "extraction error from ε-budget: (11ε₁+5ε₂)/2",
        extraction_result.as_ref().map(|r| r.max_error()),
        printed.max(exact),
        cert_tol,
    )
    .grades(Some(printed), Some(exact));

    let report = CertificationReport {
        mode,
        epsilon,
        premise_holds: epsilon < 1.0,
        cert_tol,
        budgets,
        residuals,
        measured_eps1: e1,
        measured_eps2: e2,
        conditions,
        appendix,
        extraction,
        b_operator,
        state_error,
        end_to_end,
        fidelity_bound: my_fidelity_bound(epsilon)?,
        fidelity_comparison: fidelity_prose_comparison(),
        degenerate,
    };
    assert_eq!(report.rows().count(), expected_row_count(mode), "report rows must be exhaustive");
    Ok(report)
}
