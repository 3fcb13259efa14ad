//! The 7-qubit teleportation circuit: Bell-pair creation, the encoding window,
//! measurement rotations and the heralded projection.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::evolution::{EvolutionConfig, EvolutionPlan, NoiseModel, RateConvention};
use crate::gates::{
    check_alpha, EncodingCircuit, EncodingKind, GateKind, GateSegment, ScheduleTemplate, BELL_ANGLE,
    GATE_TIME,
};
use crate::tensor_core::{qubit_bit, DensityMatrix, ZERO};

pub const NUM_QUBITS: usize = 7;
pub const SOURCE_QUBIT: usize = 1;
pub const TARGET_QUBIT: usize = 7;
pub const BELL_PAIRS: [(usize, usize); 3] = [(2, 5), (3, 4), (6, 7)];
pub const DEFAULT_MEASURED_PAIR: (usize, usize) = (3, 4);

pub const T1: f64 = 2.0;
pub const T2: f64 = 10.0;
pub const T3: f64 = 12.0;

/// Below this the heralded outcome is treated as impossible.
pub const MIN_SUCCESS_PROBABILITY: f64 = 1e-12;

/// Timing slack when comparing segment windows.
const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ProtocolSchedule {
    pub kind: EncodingKind,
    pub alpha: f64,
    pub segments: Vec<GateSegment>,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub measured_pair: (usize, usize),
}

impl ProtocolSchedule {
    /// Checks the timestamps, segment windows and that no qubit is driven twice at once.
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.t1 && self.t1 < self.t2 && self.t2 < self.t3) {
            return Err(Error::InvalidSchedule(format!(
                "timestamps must satisfy 0 < t1 < t2 < t3, got {}, {}, {}",
                self.t1, self.t2, self.t3
            )));
        }
        for seg in &self.segments {
            if seg.start < -TIME_TOL || seg.end() > self.t3 + TIME_TOL {
                return Err(Error::InvalidSchedule(format!(
                    "segment {} on {:?} spans [{}, {}] outside [0, {}]",
                    seg.label,
                    seg.sites,
                    seg.start,
                    seg.end(),
                    self.t3
                )));
            }
            if seg.sites.iter().any(|&q| q == 0 || q > NUM_QUBITS) {
                return Err(Error::InvalidSites(format!("{:?} not within 1..=7", seg.sites)));
            }
        }
        for (i, a) in self.segments.iter().enumerate() {
            for b in &self.segments[i + 1..] {
                let overlap = a.start < b.end() - TIME_TOL && b.start < a.end() - TIME_TOL;
                if !overlap {
                    continue;
                }
                if let Some(&q) = a.sites.iter().find(|q| b.sites.contains(q)) {
                    return Err(Error::OverlappingSegments { qubit: q, time: a.start.max(b.start) });
                }
            }
        }
        Ok(())
    }

    pub fn encoding_segments(&self) -> impl Iterator<Item = &GateSegment> {
        self.segments
            .iter()
            .filter(move |s| s.start >= self.t1 - TIME_TOL && s.end() <= self.t2 + TIME_TOL)
    }
}

fn check_pair(pair: (usize, usize)) -> Result<()> {
    let (a, b) = pair;
    if a == b || a == 0 || b == 0 || a > NUM_QUBITS || b > NUM_QUBITS {
        return Err(Error::InvalidSites(format!("measured pair {pair:?} must be two distinct qubits in 1..=7")));
    }
    Ok(())
}

fn bell_creation_segments() -> Result<Vec<GateSegment>> {
    let mut segments = Vec::new();
    for (a, b) in BELL_PAIRS {
        segments.push(GateSegment::from_kind(GateKind::Xx, BELL_ANGLE, vec![a, b], 0.0, GATE_TIME)?);
        segments.push(GateSegment::from_kind(GateKind::Rz, BELL_ANGLE, vec![a], GATE_TIME, GATE_TIME)?);
    }
    Ok(segments)
}

fn measurement_segments(pair: (usize, usize)) -> Result<Vec<GateSegment>> {
    let (a, b) = pair;
    Ok(vec![
        GateSegment::from_kind(GateKind::Cnot, 0.0, vec![a, b], T2, GATE_TIME)?,
        GateSegment::from_kind(GateKind::Had, 0.0, vec![a], T2 + GATE_TIME, GATE_TIME)?,
    ])
}

/// Full schedule with the bundled encoding-window transcription and the measurement on (3, 4).
pub fn build_schedule(kind: EncodingKind, alpha: f64) -> Result<ProtocolSchedule> {
    build_schedule_with(kind, alpha, kind.default_template(), DEFAULT_MEASURED_PAIR)
}

/// Full schedule from an explicit encoding-window transcription and measured pair.
pub fn build_schedule_with(
    kind: EncodingKind,
    alpha: f64,
    template: &ScheduleTemplate,
    measured_pair: (usize, usize),
) -> Result<ProtocolSchedule> {
    check_alpha(alpha)?;
    check_pair(measured_pair)?;
    let circuit = EncodingCircuit::from_template(kind, alpha, template)?;
    for seg in circuit.encoder.iter().chain(&circuit.decoder) {
        if seg.start < T1 - TIME_TOL || seg.end() > T2 + TIME_TOL {
            return Err(Error::InvalidSchedule(format!(
                "encoding gate {} on {:?} spans [{}, {}] outside the window [{T1}, {T2}]",
                seg.label,
                seg.sites,
                seg.start,
                seg.end()
            )));
        }
    }
    let mut segments = bell_creation_segments()?;
    segments.extend(circuit.encoder);
    segments.extend(circuit.decoder);
    segments.extend(measurement_segments(measured_pair)?);
    let schedule = ProtocolSchedule { kind, alpha, segments, t1: T1, t2: T2, t3: T3, measured_pair };
    schedule.validate()?;
    Ok(schedule)
}

/// The six Pauli eigenstates averaged over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputState {
    XPlus,
    XMinus,
    YPlus,
    YMinus,
    ZPlus,
    ZMinus,
}

impl InputState {
    pub const ALL: [InputState; 6] = [
        InputState::XPlus,
        InputState::XMinus,
        InputState::YPlus,
        InputState::YMinus,
        InputState::ZPlus,
        InputState::ZMinus,
    ];

    pub fn label(self) -> &'static str {
        match self {
            InputState::XPlus => "X+",
            InputState::XMinus => "X-",
            InputState::YPlus => "Y+",
            InputState::YMinus => "Y-",
            InputState::ZPlus => "Z+",
            InputState::ZMinus => "Z-",
        }
    }

    pub fn vector(self) -> [Complex64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (re, im) = (Complex64::new(s, 0.0), Complex64::new(0.0, s));
        match self {
            InputState::XPlus => [re, re],
            InputState::XMinus => [re, -re],
            InputState::YPlus => [re, im],
            InputState::YMinus => [re, -im],
            InputState::ZPlus => [Complex64::new(1.0, 0.0), ZERO],
            InputState::ZMinus => [ZERO, Complex64::new(1.0, 0.0)],
        }
    }

    /// The antipodal eigenstate of the same Pauli operator.
    pub fn orthogonal(self) -> InputState {
        match self {
            InputState::XPlus => InputState::XMinus,
            InputState::XMinus => InputState::XPlus,
            InputState::YPlus => InputState::YMinus,
            InputState::YMinus => InputState::YPlus,
            InputState::ZPlus => InputState::ZMinus,
            InputState::ZMinus => InputState::ZPlus,
        }
    }
}

impl fmt::Display for InputState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for InputState {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        InputState::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| format!("unknown input state '{s}'"))
    }
}

/// `|phi><phi|` on qubit 1, `|0>` on the other six.
pub fn initial_state(phi: InputState) -> DensityMatrix {
    let mut psi = vec![ZERO; 1 << NUM_QUBITS];
    let [a, b] = phi.vector();
    psi[0] = a;
    psi[qubit_bit(SOURCE_QUBIT, NUM_QUBITS)] = b;
    DensityMatrix::from_pure(&psi).expect("unit-norm product state")
}

#[derive(Debug, Clone)]
pub struct MeasurementOutcome {
    pub post_state: DensityMatrix,
    pub success_probability: f64,
}

/// Projection of the default measured pair onto `|00>`.
pub fn bell_measurement(rho: &DensityMatrix) -> Result<MeasurementOutcome> {
    bell_measurement_on(rho, DEFAULT_MEASURED_PAIR)
}

/// Projects qubits `pair` onto `|00>` (the image of `|Phi+>` after CNOT and HAD)
/// and renormalizes.
pub fn bell_measurement_on(rho: &DensityMatrix, pair: (usize, usize)) -> Result<MeasurementOutcome> {
    check_pair(pair)?;
    let n = rho.num_qubits();
    if pair.0 > n || pair.1 > n {
        return Err(Error::InvalidSites(format!("measured pair {pair:?} outside a {n}-qubit state")));
    }
    let mask = qubit_bit(pair.0, n) | qubit_bit(pair.1, n);
    let m = rho.matrix();
    let d = rho.dim();
    let probability: f64 = (0..d).filter(|i| i & mask == 0).map(|i| m[(i, i)].re).sum();
    if !(probability >= MIN_SUCCESS_PROBABILITY) {
        return Err(Error::PostselectionImpossible { probability });
    }
    let scale = 1.0 / probability;
    let projected = m.map_with_location(|r, c, z| if (r | c) & mask == 0 { z * scale } else { ZERO });
    Ok(MeasurementOutcome {
        post_state: DensityMatrix::from_raw(n, projected),
        success_probability: probability,
    })
}

/// Numerical settings of a protocol run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dt: f64,
    pub rate_convention: RateConvention,
    pub measured_pair: (usize, usize),
    /// Replacement encoding-window transcriptions; `None` uses the bundled ones.
    pub scrambling_template: Option<Arc<ScheduleTemplate>>,
    pub swap_template: Option<Arc<ScheduleTemplate>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dt: EvolutionConfig::DEFAULT_DT,
            rate_convention: RateConvention::Kraus,
            measured_pair: DEFAULT_MEASURED_PAIR,
            scrambling_template: None,
            swap_template: None,
        }
    }
}

impl RunConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self { dt, ..Self::default() }
    }

    pub fn template(&self, kind: EncodingKind) -> &ScheduleTemplate {
        let custom = match kind {
            EncodingKind::Scrambling => &self.scrambling_template,
            EncodingKind::Swap => &self.swap_template,
        };
        custom.as_deref().unwrap_or_else(|| kind.default_template())
    }

    pub fn schedule(&self, kind: EncodingKind, alpha: f64) -> Result<ProtocolSchedule> {
        build_schedule_with(kind, alpha, self.template(kind), self.measured_pair)
    }
}

/// Checkpoints of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub input: InputState,
    pub rho_t1: DensityMatrix,
    pub rho_t2: DensityMatrix,
    pub rho_t3_pre: DensityMatrix,
    pub outcome: MeasurementOutcome,
}

/// A schedule with its evolution maps precomputed, reusable across input states.
#[derive(Debug, Clone)]
pub struct PreparedProtocol {
    schedule: ProtocolSchedule,
    plan: EvolutionPlan,
}

impl PreparedProtocol {
    pub fn new(schedule: ProtocolSchedule, noise: &NoiseModel, dt: f64) -> Result<Self> {
        schedule.validate()?;
        let cfg = EvolutionConfig::new(dt)?;
        for t in [schedule.t1, schedule.t2, schedule.t3] {
            cfg.bin_index(t)?;
        }
        let plan = EvolutionPlan::new(NUM_QUBITS, &schedule.segments, noise, &cfg)?;
        Ok(Self { schedule, plan })
    }

    pub fn from_config(kind: EncodingKind, alpha: f64, gamma: f64, cfg: &RunConfig) -> Result<Self> {
        let noise = NoiseModel::with_convention(gamma, cfg.rate_convention)?;
        Self::new(cfg.schedule(kind, alpha)?, &noise, cfg.dt)
    }

    pub fn schedule(&self) -> &ProtocolSchedule {
        &self.schedule
    }

    pub fn run(&self, phi: InputState) -> Result<Trajectory> {
        let s = &self.schedule;
        let rho_t1 = self.plan.evolve(&initial_state(phi), 0.0, s.t1)?;
        let rho_t2 = self.plan.evolve(&rho_t1, s.t1, s.t2)?;
        let rho_t3_pre = self.plan.evolve(&rho_t2, s.t2, s.t3)?;
        let outcome = bell_measurement_on(&rho_t3_pre, s.measured_pair)?;
        Ok(Trajectory { input: phi, rho_t1, rho_t2, rho_t3_pre, outcome })
    }
}

pub fn run_protocol(
    kind: EncodingKind,
    alpha: f64,
    gamma: f64,
    phi: InputState,
    cfg: &RunConfig,
) -> Result<Trajectory> {
    PreparedProtocol::from_config(kind, alpha, gamma, cfg)?.run(phi)
}
