//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any fails.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, SQRT_2};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use selftest::bounds::{certify, fidelity_prose_comparison, my_fidelity_bound, CertificationReport, DEFAULT_CERT_TOL};
use selftest::derive::{chsh_budget, condition_residuals, my_budget, operators_for};
use selftest::device::{my_targets, TSIRELSON};
use selftest::explorer::{canonical_chsh_device, canonical_my_device, make_family, FamilyKind, FamilySpec, ParameterValue};
use selftest::isometry::{apply_isometry, expansion_oracle, extraction_error, junk_candidate, Pauli, DEFAULT_DEGENERACY_TOL};
use selftest::{DeviceModel, Mode, StateVector};
use selftest_cli::document::{parse_device, DeviceDocument};

const CERT_TOL: f64 = DEFAULT_CERT_TOL;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn range(start: f64, stop: f64, steps: usize) -> ParameterValue {
    ParameterValue::Range { start, stop, steps }
}

fn family(kind: FamilyKind, mode: Mode, dims: (usize, usize), seed: u64, param: Option<(&str, ParameterValue)>) -> Vec<DeviceModel> {
    let mut spec = FamilySpec::new(kind, mode, dims, seed);
    if let Some((name, value)) = param {
        spec = spec.with(name, value);
    }
    make_family(&spec).expect("family spec is valid")
}

/// Bounded-noise devices: tilted, state-noise (p ≤ 0.05), measurement-noise (η ≤ 0.3), junk-embedded.
fn corpus(mode: Mode) -> Vec<DeviceModel> {
    let theta_lo = match mode {
        Mode::Chsh => 0.55,
        Mode::MayersYao => 0.65,
    };
    let theta = || range(theta_lo, FRAC_PI_4 - 0.005, 35);
    let base_seed = match mode {
        Mode::Chsh => 100,
        Mode::MayersYao => 200,
    };
    let mut out = Vec::new();
    out.extend(family(FamilyKind::Tilted, mode, (2, 2), base_seed, Some(("theta", range(theta_lo, FRAC_PI_4 - 0.005, 70)))));
    for (k, dims) in [(2, 2), (3, 2)].into_iter().enumerate() {
        out.extend(family(FamilyKind::StateNoise, mode, dims, base_seed + 1 + k as u64, Some(("p", range(0.001, 0.05, 35)))));
    }
    for (k, dims) in [(2, 2), (2, 3)].into_iter().enumerate() {
        out.extend(family(FamilyKind::MeasurementNoise, mode, dims, base_seed + 3 + k as u64, Some(("eta", range(0.01, 0.3, 35)))));
    }
    for (k, dims) in [(4, 4), (2, 4)].into_iter().enumerate() {
        out.extend(family(FamilyKind::JunkEmbedded, mode, dims, base_seed + 5 + k as u64, Some(("theta", theta()))));
    }
    out
}

struct Corpus {
    devices: Vec<DeviceModel>,
    reports: Vec<CertificationReport>,
}

fn certified(mode: Mode) -> &'static Corpus {
    static CHSH: OnceLock<Corpus> = OnceLock::new();
    static MY: OnceLock<Corpus> = OnceLock::new();
    let cell = match mode {
        Mode::Chsh => &CHSH,
        Mode::MayersYao => &MY,
    };
    cell.get_or_init(|| {
        let devices = corpus(mode);
        let reports = devices
            .iter()
            .map(|d| certify(d, mode, CERT_TOL).expect("corpus devices are valid"))
            .collect();
        Corpus { devices, reports }
    })
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let d = canonical_chsh_device();
    let chsh = d.chsh_value().unwrap().value;
    let ops = operators_for(&d, Mode::Chsh).unwrap();
    let res = condition_residuals(&d.state, &ops).unwrap();
    let max_res = [res.anticomm_a, res.anticomm_b, res.diff_x, res.diff_z].into_iter().fold(0.0, f64::max);
    let ext = extraction_error(&d.state, &ops).unwrap();
    let junk = junk_candidate(&d.state, &ops, DEFAULT_DEGENERACY_TOL).unwrap();
    let junk_dist = junk.state.distance(&StateVector::basis(4, 0));
    let elapsed = start.elapsed();
    let pass = (chsh - TSIRELSON).abs() <= 1e-9
        && max_res <= 1e-9
        && ext.errors.len() == 9
        && ext.max_error() <= 1e-8
        && junk_dist <= 1e-9
        && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "|CHSH-2√2|={:.1e} (≤1e-9), max residual {:.1e} (≤1e-9), max error {:.1e} (≤1e-8), junk dist {:.1e} (≤1e-9), {:?} (<1s)",
            (chsh - TSIRELSON).abs(),
            max_res,
            ext.max_error(),
            junk_dist,
            elapsed
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let d = canonical_my_device();
    let (table, eps) = d.my_deviation().unwrap();
    let worst_corr = my_targets()
        .iter()
        .map(|(a, b, ideal)| (table.get(a, b).unwrap() - ideal).abs())
        .fold(0.0, f64::max);
    let ext = extraction_error(&d.state, &operators_for(&d, Mode::MayersYao).unwrap()).unwrap();
    let elapsed = start.elapsed();
    let pass = eps <= 1e-12 && worst_corr <= 1e-12 && ext.max_error() <= 1e-8 && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "ε={eps:.1e}, worst correlation deviation {worst_corr:.1e} (≤1e-12), max error {:.1e} (≤1e-8), {elapsed:?} (<1s)",
            ext.max_error()
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut n = 0;
    let mut worst_oracle = 0.0f64;
    let mut worst_norm = 0.0f64;
    let mut seed = 3000;
    for da in 2..=4 {
        for db in 2..=4 {
            for mode in [Mode::Chsh, Mode::MayersYao] {
                seed += 1;
                let spec = FamilySpec::new(FamilyKind::Random, mode, (da, db), seed).with_repeats(6);
                for d in make_family(&spec).unwrap() {
                    let ops = operators_for(&d, mode).unwrap();
                    let circuit = apply_isometry(&d.state, &ops, Pauli::I, Pauli::I).unwrap();
                    let closed = expansion_oracle(&d.state, &ops).unwrap();
                    worst_oracle = worst_oracle.max(circuit.distance(&closed));
                    worst_norm = worst_norm.max((circuit.norm() - d.state.norm()).abs());
                    n += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = n >= 100 && worst_oracle <= 1e-12 && worst_norm <= 1e-12 && elapsed < Duration::from_secs(30);
    outcome(
        pass,
        format!("{n} random devices, dA,dB∈{{2,3,4}}: circuit vs closed form {worst_oracle:.1e} (≤1e-12), norm change {worst_norm:.1e} (≤1e-12), {elapsed:?} (<30s)"),
    )
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut n = 0;
    let mut failures = 0;
    let mut worst_ratio = 0.0f64;
    for mode in [Mode::Chsh, Mode::MayersYao] {
        for rep in &certified(mode).reports {
            let bound = (11.0 * rep.measured_eps1 + 5.0 * rep.measured_eps2) / 2.0;
            let err = rep.max_extraction_error().unwrap_or(f64::INFINITY);
            if err > bound + CERT_TOL {
                failures += 1;
            }
            if bound > 0.0 {
                worst_ratio = worst_ratio.max(err / bound);
            }
            n += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = n >= 200 && failures == 0 && elapsed < Duration::from_secs(120);
    outcome(
        pass,
        format!("{n} devices, {failures} over (11ε₁+5ε₂)/2 + 1e-9, worst error/bound {worst_ratio:.3}, {elapsed:?} (<2min)"),
    )
}

fn criterion_5() -> Outcome {
    let c = certified(Mode::Chsh);
    let mut n = 0;
    let mut budget_failures = Vec::new();
    // anticommB violations split by parity of Bob's dimension.
    let (mut odd_n, mut odd_fail, mut even_n, mut even_fail, mut worst_b) = (0, 0, 0, 0, 0.0f64);
    for (rep, device) in c.reports.iter().zip(&c.devices) {
        let eps = rep.epsilon;
        if !(eps > 0.0 && eps < 0.2) {
            continue;
        }
        n += 1;
        let e1 = 2.0 * (eps * SQRT_2).sqrt();
        let e2 = 4.0 * (eps * SQRT_2).powf(0.25);
        let r = &rep.residuals;
        if r.anticomm_a > 2.0 * e1 + CERT_TOL {
            budget_failures.push(format!("anticommA ε={eps:.3e}"));
        }
        if r.diff_x > e2 + CERT_TOL || r.diff_z > e2 + CERT_TOL {
            budget_failures.push(format!("diff ε={eps:.3e}"));
        }
        let bad_b = r.anticomm_b > 1e-9;
        worst_b = worst_b.max(r.anticomm_b);
        if device.dims.1 % 2 == 1 {
            odd_n += 1;
            odd_fail += usize::from(bad_b);
        } else {
            even_n += 1;
            even_fail += usize::from(bad_b);
        }
    }
    outcome(
        n >= 200 && budget_failures.is_empty() && odd_fail + even_fail == 0,
        format!(
            "{n} CHSH devices with ε∈(0,0.2); anticommA/diff budget violations {} {:?}; anticommB > 1e-9: {even_fail}/{even_n} with even dB, {odd_fail}/{odd_n} with odd dB (max {worst_b:.2e}; odd dB forces a 1-dim block where B0 = ±B1)",
            budget_failures.len(),
            budget_failures.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn criterion_6() -> Outcome {
    let c = certified(Mode::MayersYao);
    let mut n = 0;
    let mut failures = Vec::new();
    for rep in &c.reports {
        let eps = rep.epsilon;
        if !(eps > 0.0 && eps < 0.1) {
            continue;
        }
        n += 1;
        let t = 2.0 * eps;
        let e1 = 2.0 * (1.0 + SQRT_2) * t.powf(0.25) + 4.0 * t.sqrt() + (5.0 + 3.0 * SQRT_2) / 2.0 * t.powf(0.75);
        let e2 = t.sqrt();
        let r = &rep.residuals;
        if r.anticomm_a.max(r.anticomm_b) > 2.0 * e1 + CERT_TOL {
            failures.push(format!("anticomm ε={eps:.3e}"));
        }
        if r.diff_x.max(r.diff_z) > e2 + CERT_TOL {
            failures.push(format!("diff ε={eps:.3e} ratio {:.12}", r.diff_x.max(r.diff_z) / e2));
        }
    }
    outcome(
        n >= 200 && failures.is_empty(),
        format!("{n} MY devices with ε∈(0,0.1), {} budget violations {:?}", failures.len(), failures.iter().take(3).collect::<Vec<_>>()),
    )
}

fn criterion_7() -> Outcome {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut tally = |name: &'static str, ok: bool| {
        let e = counts.entry(name).or_default();
        e.0 += 1;
        if !ok {
            e.1 += 1;
        }
    };
    for mode in [Mode::Chsh, Mode::MayersYao] {
        for rep in &certified(mode).reports {
            let row = |n: &str| rep.row(n).unwrap_or_else(|| panic!("missing row {n}"));
            if mode == Mode::Chsh {
                let b = chsh_budget(rep.epsilon);
                let comm = row("appendix.commutator_product").measured.unwrap();
                tally("δ-chain", comm >= 4.0 - b.delta.unwrap() - CERT_TOL);
                let lin = row("appendix.xa_times_b_sum").measured.unwrap();
                tally("X′_A(B′₀+B′₁) ≥ √2(1−ε′)", lin >= SQRT_2 * (1.0 - b.eps_prime) - CERT_TOL);
            } else {
                let b = my_budget(rep.epsilon);
                let s = row("appendix.s_norm").measured.unwrap();
                tally("‖(X′_A+Z′_A)/√2 ψ′‖", s <= (1.0 + b.epsilon + (2.0 * b.epsilon).sqrt()).sqrt() + CERT_TOL);
            }
            let (e1, e2) = (rep.measured_eps1, rep.measured_eps2);
            let za = row("appendix.expect_za").measured.unwrap();
            tally("|⟨Z′_A⟩| ≤ ε₁+ε₂", za <= e1 + e2 + CERT_TOL);
            let raw = row("appendix.junk_norm_upper").measured.unwrap();
            tally(
                "junk rawNorm ∈ [√(1−ε₁−ε₂), √(1+ε₁+ε₂)]",
                raw <= (1.0 + e1 + e2).sqrt() + CERT_TOL && raw >= (1.0 - e1 - e2).max(0.0).sqrt() - CERT_TOL,
            );
        }
    }
    let failures: usize = counts.values().map(|c| c.1).sum();
    let detail = counts
        .iter()
        .map(|(k, (n, f))| format!("{k}: {f}/{n} fail"))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(failures == 0, detail)
}

fn criterion_8() -> Outcome {
    let c = certified(Mode::Chsh);
    let mut n = 0;
    let mut failures = 0;
    let mut worst = 0.0f64;
    for rep in &c.reports {
        let eps = rep.epsilon;
        let bound = SQRT_2 * eps + 2.0 * SQRT_2 * (eps * SQRT_2).powf(0.25);
        for row in &rep.b_operator {
            let m = row.measured.unwrap_or(f64::INFINITY);
            n += 1;
            if m > bound + CERT_TOL {
                failures += 1;
            }
            if bound > 0.0 {
                worst = worst.max(m / bound);
            }
        }
    }
    outcome(
        n > 0 && failures == 0,
        format!("{n} measured-B rows, {failures} over √2ε+2√2(ε√2)^{{1/4}} + 1e-9, worst ratio {worst:.3}"),
    )
}

fn criterion_9() -> Outcome {
    let at_zero = my_fidelity_bound(0.0).unwrap();
    let grid: Vec<f64> = (0..100).map(|k| my_fidelity_bound(0.1 * k as f64 / 99.0).unwrap()).collect();
    let monotone = grid.windows(2).all(|w| w[1] <= w[0]);
    let cmp = fidelity_prose_comparison();
    println!("    {cmp}");
    outcome(
        at_zero == 1.0 && monotone,
        format!(
            "F(0)={at_zero}, nonincreasing on 100-point grid: {monotone}, at ε=1e-4 formula {:.6} vs prose {:.2}, discrepancy flag {}",
            cmp.formula_value, cmp.prose_value, cmp.discrepancy
        ),
    )
}

fn run_cli(args: &[&str], dir: &Path) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_selftest"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
        .status
        .code()
        .unwrap_or(-1)
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let mut notes = Vec::new();
    let mut pass = true;

    std::fs::write(
        p.join("family.json"),
        r#"{"kind":"state-noise","mode":"chsh","parameters":{"p":{"start":0.0,"stop":0.05,"steps":6}},"dims":[2,2],"seed":7,"repeats":2}"#,
    )
    .unwrap();
    let a = run_cli(&["sweep", "--family", "family.json", "--out", "a.csv"], p);
    let b = run_cli(&["sweep", "--family", "family.json", "--out", "b.csv"], p);
    let same = std::fs::read(p.join("a.csv")).ok() == std::fs::read(p.join("b.csv")).ok() && a == 0 && b == 0;
    pass &= same;
    notes.push(format!("sweep byte-identical: {same}"));

    let spec = FamilySpec::new(FamilyKind::Random, Mode::MayersYao, (3, 4), 99);
    let device = make_family(&spec).unwrap().remove(0);
    let doc = DeviceDocument::from_model(&device, BTreeMap::new());
    let back = parse_device(serde_json::to_string(&doc).unwrap().as_bytes()).unwrap().to_model().unwrap();
    let round = back == device;
    pass &= round;
    notes.push(format!("document round-trip identical: {round}"));

    let mut degenerate = canonical_chsh_device();
    degenerate.state = StateVector::basis(4, 3);
    let write_doc = |name: &str, d: &DeviceModel| {
        std::fs::write(p.join(name), serde_json::to_vec(&DeviceDocument::from_model(d, BTreeMap::new())).unwrap()).unwrap();
    };
    write_doc("good.json", &canonical_chsh_device());
    write_doc("degenerate.json", &degenerate);
    let mut bad = serde_json::to_value(DeviceDocument::from_model(&canonical_chsh_device(), BTreeMap::new())).unwrap();
    bad["observables"]["alice"]["A0"] = serde_json::json!([[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]]);
    std::fs::write(p.join("nonunitary.json"), bad.to_string()).unwrap();
    let good_text = std::fs::read_to_string(p.join("good.json")).unwrap();
    std::fs::write(p.join("truncated.json"), &good_text[..good_text.len() / 2]).unwrap();
    std::fs::write(
        p.join("table.json"),
        format!(r#"{{"A0B0":{d},"A0B1":{d},"A1B0":{d},"A1B1":{m}}}"#, d = FRAC_1_SQRT_2, m = -FRAC_1_SQRT_2),
    )
    .unwrap();

    let matrix: Vec<(&str, Vec<&str>, i32)> = vec![
        ("good device", vec!["certify", "--device", "good.json", "--mode", "chsh", "--out", "r1.json"], 0),
        ("failing rows", vec!["certify", "--device", "degenerate.json", "--mode", "chsh", "--out", "r2.json"], 1),
        ("non-unitary observable", vec!["certify", "--device", "nonunitary.json", "--mode", "chsh", "--out", "r3.json"], 2),
        ("truncated file", vec!["certify", "--device", "truncated.json", "--mode", "chsh", "--out", "r4.json"], 2),
        ("missing --mode", vec!["certify", "--device", "good.json", "--out", "r5.json"], 2),
        ("missing file", vec!["certify", "--device", "absent.json", "--mode", "chsh", "--out", "r6.json"], 2),
        ("wrong mode observables", vec!["certify", "--device", "good.json", "--mode", "my", "--out", "r7.json"], 2),
        ("exact table", vec!["correlations", "--table", "table.json", "--mode", "chsh"], 0),
        ("table missing entries", vec!["correlations", "--table", "table.json", "--mode", "my"], 2),
        ("search budget 0", vec!["search", "--mode", "chsh", "--epsilon-ceiling", "0.01", "--budget", "0", "--out", "s"], 2),
    ];
    let mut bad_codes = Vec::new();
    for (label, args, expected) in &matrix {
        let code = run_cli(args, p);
        if code != *expected {
            bad_codes.push(format!("{label}: got {code}, want {expected}"));
        }
    }
    for partial in ["r3.json", "r4.json", "r5.json", "r6.json", "r7.json"] {
        if p.join(partial).exists() {
            bad_codes.push(format!("partial output {partial} left behind"));
        }
    }
    pass &= bad_codes.is_empty();
    notes.push(format!("exit-code matrix {}/{} as expected {:?}", matrix.len() - bad_codes.len().min(matrix.len()), matrix.len(), bad_codes));
    outcome(pass, notes.join("; "))
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "exact CHSH point", criterion_1),
        (2, "exact Mayers-Yao point", criterion_2),
        (3, "circuit vs closed-form expansion", criterion_3),
        (4, "extraction-error certification", criterion_4),
        (5, "CHSH ε-budget certification", criterion_5),
        (6, "Mayers-Yao ε-budget certification", criterion_6),
        (7, "intermediate estimate suites", criterion_7),
        (8, "measured-B operator bound", criterion_8),
        (9, "fidelity formula", criterion_9),
        (10, "determinism and I/O", criterion_10),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} [{}] {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
