//! Fidelity, purity and logarithmic negativity, plus averaging over the six inputs.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gates::EncodingKind;
use crate::protocol::{InputState, PreparedProtocol, RunConfig, Trajectory, NUM_QUBITS, TARGET_QUBIT};
use crate::tensor_core::{
    hermitian_eigenvalues, partial_trace, partial_transpose, ComplexMatrix, DensityMatrix, QubitSubset,
};

/// Eigenvalues of the partial transpose smaller than this in magnitude count as zero.
pub const NEGATIVITY_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    /// A Bell pair carries exactly one unit.
    #[default]
    Two,
    E,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Two => x.log2(),
            LogBase::E => x.ln(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LogBase::Two => "2",
            LogBase::E => "e",
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LogBase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "2" => Ok(LogBase::Two),
            "e" | "E" => Ok(LogBase::E),
            other => Err(format!("unknown log base '{other}' (expected \"2\" or \"e\")")),
        }
    }
}

/// What "total entanglement" sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EntanglementSum {
    /// The six contiguous bipartitions `1..k | k+1..7`.
    #[default]
    Cuts,
    /// The two-qubit reduced states of the six neighboring pairs `(k, k+1)`.
    NeighborPairs,
}

impl EntanglementSum {
    pub fn name(self) -> &'static str {
        match self {
            EntanglementSum::Cuts => "cuts",
            EntanglementSum::NeighborPairs => "neighbor_pairs",
        }
    }
}

impl fmt::Display for EntanglementSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EntanglementSum {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cuts" => Ok(EntanglementSum::Cuts),
            "neighbor_pairs" => Ok(EntanglementSum::NeighborPairs),
            other => Err(format!("unknown entanglement sum '{other}' (expected cuts or neighbor_pairs)")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimConfig {
    pub run: RunConfig,
    pub log_base: LogBase,
    pub entanglement_sum: EntanglementSum,
}

impl SimConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self { run: RunConfig::with_dt(dt), ..Self::default() }
    }
}

/// `<phi| rho7 |phi>` for a single-qubit state.
pub fn fidelity(rho7: &DensityMatrix, phi: InputState) -> Result<f64> {
    if rho7.num_qubits() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "fidelity needs a single-qubit state, got {} qubits",
            rho7.num_qubits()
        )));
    }
    let v = phi.vector();
    let m = rho7.matrix();
    let mut acc = num_complex::Complex64::new(0.0, 0.0);
    for r in 0..2 {
        for c in 0..2 {
            acc += v[r].conj() * m[(r, c)] * v[c];
        }
    }
    Ok(acc.re)
}

/// `Tr rho^2`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    matrix_purity(rho.matrix())
}

fn matrix_purity(m: &ComplexMatrix) -> f64 {
    // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho.
    m.norm_squared()
}

/// Negativity `sum_i (|l_i| - l_i) / 2` over the spectrum of the partial transpose.
pub fn negativity(rho: &DensityMatrix, subsystem_b: &QubitSubset) -> Result<f64> {
    let eig = hermitian_eigenvalues(&partial_transpose(rho, subsystem_b)?)?;
    Ok(eig.iter().filter(|&&l| l < -NEGATIVITY_CUTOFF).map(|l| -l).sum())
}

/// `log(1 + 2 N)`.
pub fn log_negativity(rho: &DensityMatrix, subsystem_b: &QubitSubset, base: LogBase) -> Result<f64> {
    Ok(base.log(1.0 + 2.0 * negativity(rho, subsystem_b)?))
}

/// Sum of log negativities over the six bonds of the 7-qubit chain.
pub fn total_negativity(rho: &DensityMatrix, sum: EntanglementSum, base: LogBase) -> Result<f64> {
    let n = rho.num_qubits();
    if n < 2 {
        return Err(Error::DimensionMismatch("total negativity needs at least two qubits".into()));
    }
    let mut total = 0.0;
    for k in 1..n {
        total += match sum {
            EntanglementSum::Cuts => log_negativity(rho, &QubitSubset::range(k + 1, n, n)?, base)?,
            EntanglementSum::NeighborPairs => {
                let pair = partial_trace(rho, &QubitSubset::new(vec![k, k + 1], n)?)?;
                log_negativity(&pair, &QubitSubset::new(vec![2], 2)?, base)?
            }
        };
    }
    Ok(total)
}

/// Reduced state of the target qubit.
pub fn target_state(rho: &DensityMatrix) -> Result<DensityMatrix> {
    partial_trace(rho, &QubitSubset::new(vec![TARGET_QUBIT], rho.num_qubits())?)
}

/// Bipartition between qubits 3 and 4.
pub fn cut34() -> QubitSubset {
    QubitSubset::range(4, NUM_QUBITS, NUM_QUBITS).expect("4..=7 is a valid subset")
}

/// Total entanglement at the three checkpoints; `t3` is after the projection.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EntanglementCheckpoints {
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub t3: Option<f64>,
}

impl EntanglementCheckpoints {
    pub fn from_trajectory(traj: &Trajectory, cfg: &SimConfig) -> Result<Self> {
        let tot = |rho: &DensityMatrix| total_negativity(rho, cfg.entanglement_sum, cfg.log_base);
        Ok(Self {
            t1: Some(tot(&traj.rho_t1)?),
            t2: Some(tot(&traj.rho_t2)?),
            t3: Some(tot(&traj.outcome.post_state)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaKind {
    /// Change during the encoding window, `E(t2) - E(t1)`.
    Unitary,
    /// Change across the measurement, `E(t3) - E(t2)`.
    Measurement,
}

pub fn delta_e(checkpoints: &EntanglementCheckpoints, which: DeltaKind) -> Result<f64> {
    let get = |v: Option<f64>, name| v.ok_or(Error::MissingCheckpoint(name));
    Ok(match which {
        DeltaKind::Unitary => get(checkpoints.t2, "t2")? - get(checkpoints.t1, "t1")?,
        DeltaKind::Measurement => get(checkpoints.t3, "t3")? - get(checkpoints.t2, "t2")?,
    })
}

/// Metrics of one input state.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub input: InputState,
    pub fidelity: f64,
    pub purity: f64,
    pub neg_cut34: f64,
    pub entanglement: EntanglementCheckpoints,
    pub success_probability: f64,
}

impl RunMetrics {
    pub fn from_trajectory(traj: &Trajectory, cfg: &SimConfig) -> Result<Self> {
        let post = &traj.outcome.post_state;
        Ok(Self {
            input: traj.input,
            fidelity: fidelity(&target_state(post)?, traj.input)?,
            purity: purity(post),
            neg_cut34: log_negativity(post, &cut34(), cfg.log_base)?,
            entanglement: EntanglementCheckpoints::from_trajectory(traj, cfg)?,
            success_probability: traj.outcome.success_probability,
        })
    }
}

/// Averages over the six input states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub fidelity_avg: f64,
    /// Mean of the per-input `Tr rho^2`.
    pub purity_avg: f64,
    /// `Tr(rho_mean^2)` of the input-averaged final state.
    pub purity_of_mean: f64,
    pub neg_cut34: f64,
    pub neg_total_t1: f64,
    pub neg_total_t2: f64,
    pub neg_total_t3: f64,
    pub delta_e_u: f64,
    pub delta_e_m: f64,
    pub success_prob_avg: f64,
}

/// Runs all six inputs for one grid point and averages in a fixed order.
pub fn average_over_inputs(kind: EncodingKind, alpha: f64, gamma: f64, cfg: &SimConfig) -> Result<MetricsRecord> {
    let prepared = PreparedProtocol::from_config(kind, alpha, gamma, &cfg.run)?;
    let runs: Vec<(InputState, Result<(RunMetrics, DensityMatrix)>)> = InputState::ALL
        .par_iter()
        .map(|&phi| {
            let result = prepared.run(phi).and_then(|traj| {
                let metrics = RunMetrics::from_trajectory(&traj, cfg)?;
                Ok((metrics, traj.outcome.post_state))
            });
            (phi, result)
        })
        .collect();

    let mut failed = Vec::new();
    let mut ok = Vec::new();
    for (phi, result) in runs {
        match result {
            Ok(v) => ok.push(v),
            Err(Error::PostselectionImpossible { .. }) => failed.push(phi.label().to_string()),
            Err(e) => return Err(e),
        }
    }
    if !failed.is_empty() {
        return Err(Error::PostselectionFailedInputs { labels: failed });
    }
    Ok(aggregate(&ok))
}

fn aggregate(runs: &[(RunMetrics, DensityMatrix)]) -> MetricsRecord {
    let count = runs.len() as f64;
    let mean = |f: &dyn Fn(&RunMetrics) -> f64| runs.iter().map(|(m, _)| f(m)).sum::<f64>() / count;
    let checkpoint = |f: &dyn Fn(&EntanglementCheckpoints) -> Option<f64>| {
        mean(&|m: &RunMetrics| f(&m.entanglement).unwrap_or(f64::NAN))
    };
    let mut mean_state = runs[0].1.matrix().clone();
    for (_, rho) in &runs[1..] {
        mean_state += rho.matrix();
    }
    mean_state /= num_complex::Complex64::new(count, 0.0);
    let delta = |which| {
        mean(&|m: &RunMetrics| delta_e(&m.entanglement, which).unwrap_or(f64::NAN))
    };
    MetricsRecord {
        fidelity_avg: mean(&|m| m.fidelity),
        purity_avg: mean(&|m| m.purity),
        purity_of_mean: matrix_purity(&mean_state),
        neg_cut34: mean(&|m| m.neg_cut34),
        neg_total_t1: checkpoint(&|e| e.t1),
        neg_total_t2: checkpoint(&|e| e.t2),
        neg_total_t3: checkpoint(&|e| e.t3),
        delta_e_u: delta(DeltaKind::Unitary),
        delta_e_m: delta(DeltaKind::Measurement),
        success_prob_avg: mean(&|m| m.success_probability),
    }
}
