//! Device families, parameter sweeps and a seeded worst-case search.
//!
//! Every random draw comes from a ChaCha stream keyed by `(seed, point index)`,
//! so serial and parallel sweeps produce identical records.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{certify, DEFAULT_CERT_TOL};
use crate::device::{names, DeviceModel, Mode};
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eig, operator_sign, r, unitary_exp, ComplexMatrix, StateVector, C64, DEFAULT_ZERO_TOL};

/// Measurement-noise strengths above this leave the small-ε regime.
pub const MAX_MEASUREMENT_NOISE: f64 = 0.5;

fn observables(pairs: Vec<(&str, ComplexMatrix)>) -> BTreeMap<String, ComplexMatrix> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// |φ₊⟩ with A0 = X, A1 = Z, B0 = (X+Z)/√2, B1 = (X−Z)/√2.
pub fn canonical_chsh_device() -> DeviceModel {
    let x = ComplexMatrix::pauli_x();
    let z = ComplexMatrix::pauli_z();
    DeviceModel::new(
        (2, 2),
        StateVector::phi_plus(),
        observables(vec![(names::A0, x.clone()), (names::A1, z.clone())]),
        observables(vec![
            (names::B0, (&x + &z).scale(FRAC_1_SQRT_2)),
            (names::B1, (&x - &z).scale(FRAC_1_SQRT_2)),
        ]),
    )
}

/// |φ₊⟩ with XA = XB = X, ZA = ZB = Z, DB = (X+Z)/√2.
pub fn canonical_my_device() -> DeviceModel {
    let x = ComplexMatrix::pauli_x();
    let z = ComplexMatrix::pauli_z();
    DeviceModel::new(
        (2, 2),
        StateVector::phi_plus(),
        observables(vec![(names::XA, x.clone()), (names::ZA, z.clone())]),
        observables(vec![
            (names::XB, x.clone()),
            (names::ZB, z.clone()),
            (names::DB, ComplexMatrix::pauli_d()),
        ]),
    )
}

pub fn canonical_device(mode: Mode) -> DeviceModel {
    match mode {
        Mode::Chsh => canonical_chsh_device(),
        Mode::MayersYao => canonical_my_device(),
    }
}

/// Qubit state `Σ amp_ij |ij⟩` placed on the lowest levels of a (dA, dB) system.
fn embed_qubit_state(amps: [[C64; 2]; 2], dims: (usize, usize)) -> Result<StateVector> {
    let mut v = vec![r(0.0); dims.0 * dims.1];
    for (i, row) in amps.iter().enumerate() {
        for (j, &a) in row.iter().enumerate() {
            v[i * dims.1 + j] = a;
        }
    }
    StateVector::from_amplitudes(v)
}

fn tilted_amps(theta: f64) -> [[C64; 2]; 2] {
    [[r(theta.cos()), r(0.0)], [r(0.0), r(theta.sin())]]
}

/// Canonical device of `mode` on `dims`, observables extended by +1 on the extra levels.
pub fn padded_canonical(mode: Mode, dims: (usize, usize), theta: f64) -> Result<DeviceModel> {
    check_dims(dims)?;
    let base = canonical_device(mode);
    let pad = |m: &BTreeMap<String, ComplexMatrix>, d: usize| {
        m.iter().map(|(k, v)| (k.clone(), v.pad_identity(d - 2))).collect()
    };
    Ok(DeviceModel::new(
        dims,
        embed_qubit_state(tilted_amps(theta), dims)?,
        pad(&base.alice, dims.0),
        pad(&base.bob, dims.1),
    ))
}

/// `base ⊗ ancilla`, regrouped so each party holds (its base system, its ancilla half).
///
/// Observables act as identity on the ancilla.
pub fn embed_junk(base: &DeviceModel, ancilla: &StateVector, ancilla_dims: (usize, usize)) -> Result<DeviceModel> {
    let (da, db) = base.dims;
    let (ka, kb) = ancilla_dims;
    if ancilla.dim() != ka * kb {
        return Err(Error::DimensionMismatch {
            context: "ancilla state",
            expected: ka * kb,
            found: ancilla.dim(),
        });
    }
    let nb = db * kb;
    let mut v = vec![r(0.0); da * ka * nb];
    for i in 0..da {
        for j in 0..db {
            let s = base.state.amplitude(i * db + j);
            for a in 0..ka {
                for b in 0..kb {
                    v[(i * ka + a) * nb + j * kb + b] = s * ancilla.amplitude(a * kb + b);
                }
            }
        }
    }
    let extend = |m: &BTreeMap<String, ComplexMatrix>, k: usize| {
        m.iter()
            .map(|(name, o)| (name.clone(), o.kron(&ComplexMatrix::identity(k))))
            .collect()
    };
    Ok(DeviceModel::new(
        (da * ka, nb),
        StateVector::from_amplitudes(v)?,
        extend(&base.alice, ka),
        extend(&base.bob, kb),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Tilted,
    StateNoise,
    MeasurementNoise,
    JunkEmbedded,
    Random,
}

impl FamilyKind {
    fn allowed_parameters(self) -> &'static [&'static str] {
        match self {
            FamilyKind::Tilted => &["theta"],
            FamilyKind::StateNoise => &["p"],
            FamilyKind::MeasurementNoise => &["eta"],
            FamilyKind::JunkEmbedded => &["theta"],
            FamilyKind::Random => &[],
        }
    }

    fn required_parameters(self) -> &'static [&'static str] {
        match self {
            FamilyKind::JunkEmbedded => &[],
            other => other.allowed_parameters(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParameterValue {
    Value(f64),
    /// `steps` evenly spaced points from `start` to `stop` inclusive.
    Range { start: f64, stop: f64, steps: usize },
}

impl ParameterValue {
    pub fn points(&self) -> Vec<f64> {
        match *self {
            ParameterValue::Value(v) => vec![v],
            ParameterValue::Range { start, steps: 1, .. } => vec![start],
            ParameterValue::Range { start, stop, steps } => (0..steps)
                .map(|k| start + (stop - start) * k as f64 / (steps - 1) as f64)
                .collect(),
        }
    }
}

fn default_repeats() -> usize {
    1
}

fn default_mode() -> Mode {
    Mode::Chsh
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub parameters: BTreeMap<String, ParameterValue>,
    pub dims: (usize, usize),
    #[serde(default)]
    pub seed: u64,
    /// Independent draws per parameter point.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn check_dims(dims: (usize, usize)) -> Result<()> {
    if dims.0 < 2 || dims.1 < 2 {
        return Err(Error::InvalidFamily(format!("dims must be at least 2, got {dims:?}")));
    }
    Ok(())
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, mode: Mode, dims: (usize, usize), seed: u64) -> Self {
        Self {
            kind,
            mode,
            parameters: BTreeMap::new(),
            dims,
            seed,
            repeats: 1,
        }
    }

    pub fn with(mut self, name: &str, value: ParameterValue) -> Self {
        self.parameters.insert(name.to_string(), value);
        self
    }

    pub fn with_repeats(mut self, repeats: usize) -> Self {
        self.repeats = repeats;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_dims(self.dims)?;
        if self.kind == FamilyKind::JunkEmbedded && (!self.dims.0.is_multiple_of(2) || !self.dims.1.is_multiple_of(2)) {
            return Err(Error::InvalidFamily(format!(
                "junk-embedded dims must be even, got {:?}",
                self.dims
            )));
        }
        let allowed = self.kind.allowed_parameters();
        for name in self.parameters.keys() {
            if !allowed.contains(&name.as_str()) {
                return Err(Error::InvalidFamily(format!("unknown parameter `{name}` for {:?}", self.kind)));
            }
        }
        for name in self.kind.required_parameters() {
            if !self.parameters.contains_key(*name) {
                return Err(Error::InvalidFamily(format!("missing parameter `{name}`")));
            }
        }
        for (name, value) in &self.parameters {
            let finite = match *value {
                ParameterValue::Value(v) => v.is_finite(),
                ParameterValue::Range { start, stop, .. } => start.is_finite() && stop.is_finite(),
            };
            if !finite {
                return Err(Error::InvalidFamily(format!("parameter `{name}` is not finite")));
            }
            let (lo, hi) = match name.as_str() {
                "p" => (0.0, 1.0),
                "eta" => (0.0, MAX_MEASUREMENT_NOISE),
                _ => (f64::NEG_INFINITY, f64::INFINITY),
            };
            if let Some(bad) = value.points().into_iter().find(|v| *v < lo || *v > hi) {
                return Err(Error::InvalidFamily(format!("parameter `{name}` = {bad} outside [{lo}, {hi}]")));
            }
        }
        if self.repeats == 0 {
            return Err(Error::InvalidFamily("repeats must be at least 1".into()));
        }
        Ok(())
    }

    /// Parameter assignments in generation order: cartesian product by name, then repeats.
    pub fn points(&self) -> Result<Vec<BTreeMap<String, f64>>> {
        self.validate()?;
        let mut grid = vec![BTreeMap::new()];
        for (name, value) in &self.parameters {
            let values = value.points();
            grid = grid
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.insert(name.clone(), *v);
                        q
                    })
                })
                .collect();
        }
        Ok(grid
            .into_iter()
            .flat_map(|p| std::iter::repeat_n(p, self.repeats))
            .collect())
    }

    fn rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }

    /// The device at one grid point.
    pub fn device_at(&self, index: usize, params: &BTreeMap<String, f64>) -> Result<DeviceModel> {
        let mut rng = self.rng(index);
        let dims = self.dims;
        match self.kind {
            FamilyKind::Tilted => padded_canonical(self.mode, dims, params["theta"]),
            FamilyKind::StateNoise => {
                let p = params["p"];
                let mut d = padded_canonical(self.mode, dims, FRAC_PI_4)?;
                let phi = d.state.clone();
                let g = gaussian_vector(&mut rng, dims.0 * dims.1);
                let e = (&g - &phi.scale_c(phi.inner(&g))).normalized()?;
                d.state = &phi.scale((1.0 - p).sqrt()) + &e.scale(p.sqrt());
                d.state = d.state.normalized()?;
                Ok(d)
            }
            FamilyKind::MeasurementNoise => {
                let eta = params["eta"];
                let mut d = padded_canonical(self.mode, dims, FRAC_PI_4)?;
                for map in [&mut d.alice, &mut d.bob] {
                    for o in map.values_mut() {
                        let h = random_hermitian(&mut rng, o.dim())?;
                        *o = reproject(&o.conjugate_by(&unitary_exp(&h, eta)?))?;
                    }
                }
                Ok(d)
            }
            FamilyKind::JunkEmbedded => {
                let theta = params.get("theta").copied().unwrap_or(FRAC_PI_4);
                let base = padded_canonical(self.mode, (2, 2), theta)?;
                let k = (dims.0 / 2, dims.1 / 2);
                let ancilla = gaussian_vector(&mut rng, k.0 * k.1).normalized()?;
                embed_junk(&base, &ancilla, k)
            }
            FamilyKind::Random => {
                let (a_names, b_names) = self.mode.required_observables();
                let mut draw = |list: &[&str], d: usize| -> Result<BTreeMap<String, ComplexMatrix>> {
                    list.iter()
                        .map(|n| random_observable(&mut rng, d).map(|o| (n.to_string(), o)))
                        .collect()
                };
                let alice = draw(a_names, dims.0)?;
                let bob = draw(b_names, dims.1)?;
                let state = gaussian_vector(&mut rng, dims.0 * dims.1).normalized()?;
                Ok(DeviceModel::new(dims, state, alice, bob))
            }
        }
    }
}

/// All devices of a family, in point order.
pub fn make_family(spec: &FamilySpec) -> Result<Vec<DeviceModel>> {
    spec.points()?
        .iter()
        .enumerate()
        .map(|(i, p)| spec.device_at(i, p))
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn gaussian_vector(rng: &mut ChaCha8Rng, dim: usize) -> StateVector {
    StateVector::from_amplitudes((0..dim).map(|_| gaussian(rng)).collect()).expect("nonzero dimension")
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, dim: usize) -> ComplexMatrix {
    let entries: Vec<C64> = (0..dim * dim).map(|_| gaussian(rng)).collect();
    ComplexMatrix::from_fn(dim, |i, j| entries[i * dim + j])
}

/// Hermitian matrix with spectral radius 1.
pub fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> Result<ComplexMatrix> {
    let h = gaussian_matrix(rng, dim).hermitian_part();
    let radius = hermitian_eig(&h)?.max_abs_value();
    Ok(h.scale(1.0 / radius))
}

/// Unitary from Gram-Schmidt orthonormalization of a Gaussian matrix's columns.
pub fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> Result<ComplexMatrix> {
    let g = gaussian_matrix(rng, dim);
    let mut cols: Vec<StateVector> = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut v = StateVector::from_amplitudes((0..dim).map(|i| g.get(i, j)).collect())?;
        for q in &cols {
            v = &v - &q.scale_c(q.inner(&v));
        }
        cols.push(v.normalized()?);
    }
    Ok(ComplexMatrix::from_fn(dim, |i, j| cols[j].amplitude(i)))
}

/// U·diag(±1)·U† with at least one eigenvalue of each sign.
pub fn random_observable(rng: &mut ChaCha8Rng, dim: usize) -> Result<ComplexMatrix> {
    let u = random_unitary(rng, dim)?;
    let mut signs: Vec<f64> = (0..dim).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    signs[0] = 1.0;
    signs[dim - 1] = -1.0;
    let flip = rng.random_range(0..dim);
    signs.swap(0, flip);
    Ok(ComplexMatrix::diag(&signs).conjugate_by(&u))
}

/// Nearest Hermitian involution, cleaning up rounding after a conjugation.
fn reproject(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    operator_sign(&m.hermitian_part(), DEFAULT_ZERO_TOL)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRecord {
    pub index: usize,
    pub parameters: BTreeMap<String, f64>,
    pub epsilon: f64,
    pub measured_eps1: f64,
    pub measured_eps2: f64,
    /// `None` when extraction was degenerate.
    pub max_extraction_error: Option<f64>,
    pub theorem1_bound: f64,
    /// theorem1_bound − max_extraction_error
    pub slack: Option<f64>,
    pub all_pass: bool,
    pub note: Option<String>,
}

/// Certifies one device and condenses the report into a record.
pub fn evaluate_device(
    device: &DeviceModel,
    mode: Mode,
    index: usize,
    parameters: BTreeMap<String, f64>,
    cert_tol: f64,
) -> Result<SweepRecord> {
    let report = certify(device, mode, cert_tol)?;
    let bound = report.extraction[0].bound;
    let max_err = report.max_extraction_error();
    Ok(SweepRecord {
        index,
        parameters,
        epsilon: report.epsilon,
        measured_eps1: report.measured_eps1,
        measured_eps2: report.measured_eps2,
        max_extraction_error: max_err,
        theorem1_bound: bound,
        slack: max_err.map(|m| bound - m),
        all_pass: report.all_pass(),
        note: report.degenerate.clone(),
    })
}

/// One record per grid point; `threads == 0` uses the global pool size.
pub fn sweep(spec: &FamilySpec, threads: usize) -> Result<Vec<SweepRecord>> {
    let points = spec.points()?;
    let run = || {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let device = spec.device_at(i, p)?;
                evaluate_device(&device, spec.mode, i, p.clone(), DEFAULT_CERT_TOL)
            })
            .collect::<Result<Vec<_>>>()
    };
    if threads == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidFamily(format!("thread pool: {e}")))?
            .install(run)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchSpace {
    /// Only the tilt angle of the canonical device.
    Tilted,
    /// State perturbation plus a unitary perturbation per observable.
    General,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub mode: Mode,
    pub epsilon_ceiling: f64,
    pub dims: (usize, usize),
    /// Number of device evaluations, including the seed proposal.
    pub budget: usize,
    pub seed: u64,
    pub space: SearchSpace,
    /// Size of the random perturbation applied to the canonical seed proposal.
    pub start_spread: f64,
    /// Initial proposal scale; adapted within [step/1000, 10·step] as proposals are accepted or rejected.
    pub step: f64,
    pub initial_temperature: f64,
    /// Geometric cooling ratio per iteration.
    pub cooling: f64,
}

impl SearchConfig {
    pub fn new(mode: Mode, epsilon_ceiling: f64, dims: (usize, usize), budget: usize, seed: u64) -> Self {
        Self {
            mode,
            epsilon_ceiling,
            dims,
            budget,
            seed,
            space: SearchSpace::General,
            start_spread: 0.0,
            step: 0.05,
            initial_temperature: 0.05,
            cooling: 0.995,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon_ceiling > 0.0 && self.epsilon_ceiling < 1.0) {
            return Err(Error::InvalidSearch(format!(
                "epsilon ceiling must lie in (0, 1), got {}",
                self.epsilon_ceiling
            )));
        }
        if self.budget == 0 {
            return Err(Error::InvalidSearch("budget must be at least 1".into()));
        }
        if !(self.cooling > 0.0 && self.cooling <= 1.0) {
            return Err(Error::InvalidSearch(format!("cooling ratio must lie in (0, 1], got {}", self.cooling)));
        }
        if !(self.step >= 0.0 && self.start_spread >= 0.0 && self.initial_temperature >= 0.0) {
            return Err(Error::InvalidSearch("step, spread and temperature must be nonnegative".into()));
        }
        check_dims(self.dims).map_err(|e| Error::InvalidSearch(e.to_string()))
    }
}

/// A point of the search space.
#[derive(Clone, Debug)]
struct Candidate {
    theta: f64,
    state_shift: Vec<C64>,
    /// Generators of the unitary perturbation, one per observable.
    generators: Vec<ComplexMatrix>,
}

impl Candidate {
    fn canonical(cfg: &SearchConfig) -> Self {
        let (a, b) = cfg.mode.required_observables();
        let generators = a
            .iter()
            .map(|_| ComplexMatrix::zeros(cfg.dims.0))
            .chain(b.iter().map(|_| ComplexMatrix::zeros(cfg.dims.1)))
            .collect();
        Self {
            theta: FRAC_PI_4,
            state_shift: vec![r(0.0); cfg.dims.0 * cfg.dims.1],
            generators,
        }
    }

    fn perturbed(&self, cfg: &SearchConfig, scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut next = self.clone();
        let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
        next.theta += scale * normal(rng);
        if cfg.space == SearchSpace::General {
            for z in &mut next.state_shift {
                *z += gaussian(rng) * scale;
            }
            for g in &mut next.generators {
                *g = &*g + &gaussian_matrix(rng, g.dim()).hermitian_part().scale(scale);
            }
        }
        next
    }

    fn device(&self, cfg: &SearchConfig) -> Result<DeviceModel> {
        let mut d = padded_canonical(cfg.mode, cfg.dims, self.theta)?;
        if cfg.space == SearchSpace::Tilted {
            return Ok(d);
        }
        let shift = StateVector::from_amplitudes(self.state_shift.clone())?;
        d.state = (&d.state + &shift).normalized()?;
        let (a, b) = cfg.mode.required_observables();
        let mut gens = self.generators.iter();
        for (map, list) in [(&mut d.alice, a), (&mut d.bob, b)] {
            for name in list.iter() {
                let g = gens.next().expect("one generator per observable");
                let o = map.get_mut(*name).expect("canonical observable");
                *o = reproject(&o.conjugate_by(&unitary_exp(g, 1.0)?))?;
            }
        }
        Ok(d)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SearchOutcome {
    Found {
        device: DeviceModel,
        record: SweepRecord,
        evaluations: usize,
    },
    /// Every evaluated proposal exceeded the ε ceiling or was degenerate.
    NotFound { evaluations: usize, smallest_epsilon: f64 },
}

struct Evaluated {
    device: DeviceModel,
    record: SweepRecord,
}

impl Evaluated {
    fn feasible(&self, ceiling: f64) -> bool {
        self.record.epsilon <= ceiling && self.record.max_extraction_error.is_some()
    }

    fn objective(&self) -> f64 {
        self.record.max_extraction_error.unwrap_or(f64::NEG_INFINITY)
    }
}

const STEP_GROWTH: f64 = 1.05;
const STEP_SHRINK: f64 = 0.9;

/// Seeded simulated annealing maximizing the extraction error under `ε ≤ ceiling`.
///
/// The result is the best device seen; no global optimality is implied.
pub fn worst_case_search(cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let evaluate = |cand: &Candidate, i: usize| -> Result<Evaluated> {
        let device = cand.device(cfg)?;
        let mut params = BTreeMap::new();
        params.insert("theta".to_string(), cand.theta);
        let record = evaluate_device(&device, cfg.mode, i, params, DEFAULT_CERT_TOL)?;
        Ok(Evaluated { device, record })
    };

    let mut current_cand = Candidate::canonical(cfg).perturbed(cfg, cfg.start_spread, &mut rng);
    let mut current = evaluate(&current_cand, 0)?;
    let mut smallest_epsilon = current.record.epsilon;
    let mut best: Option<Evaluated> = None;
    let mut temperature = cfg.initial_temperature;
    let mut step = cfg.step;
    let ceiling = cfg.epsilon_ceiling;

    for i in 1..=cfg.budget {
        if current.feasible(ceiling) && best.as_ref().is_none_or(|b| current.objective() > b.objective()) {
            best = Some(Evaluated {
                device: current.device.clone(),
                record: current.record.clone(),
            });
        }
        if i == cfg.budget {
            break;
        }
        let cand = current_cand.perturbed(cfg, step, &mut rng);
        let next = evaluate(&cand, i)?;
        smallest_epsilon = smallest_epsilon.min(next.record.epsilon);
        let u: f64 = rng.random();
        let accept = match (current.feasible(ceiling), next.feasible(ceiling)) {
            (_, false) if current.feasible(ceiling) => false,
            (false, false) => next.record.epsilon < current.record.epsilon,
            (false, true) => true,
            _ => {
                let gain = next.objective() - current.objective();
                gain >= 0.0 || (temperature > 0.0 && u < (gain / temperature).exp())
            }
        };
        if accept {
            current_cand = cand;
            current = next;
            step = (step * STEP_GROWTH).min(cfg.step * 10.0);
        } else {
            step = (step * STEP_SHRINK).max(cfg.step * 1e-3);
        }
        temperature *= cfg.cooling;
    }

    Ok(match best {
        Some(b) => SearchOutcome::Found {
            device: b.device,
            record: b.record,
            evaluations: cfg.budget,
        },
        None => SearchOutcome::NotFound {
            evaluations: cfg.budget,
            smallest_epsilon,
        },
    })
}
