//! Trotterized open-system evolution.
//!
//! Each time bin of width `dt` applies the unitary sandwich `U rho U^dagger`
//! (with `U` the product of the active segments' `exp(-i H dt)`), followed by
//! the per-qubit dephasing channel with Kraus operators
//! `K1 = 1 + n (e^{-gamma dt} - 1)`, `K2 = sqrt(1 - e^{-2 gamma dt}) n`,
//! `n = (1 + Z) / 2`.
//!
//! [`evolve_stepwise`] performs that loop literally. [`EvolutionPlan`] computes
//! the same map faster: between two consecutive segment boundaries the bin map
//! is a tensor product of channels on disjoint supports (one per active segment,
//! plus plain dephasing on idle qubits), so a run of `K` identical bins is the
//! product of each local channel raised to the `K`-th power.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gates::GateSegment;
use crate::tensor_core::{
    conjugate_local, local_offsets, qubit_bit, rest_bases, ComplexMatrix, DensityMatrix, ONE, ZERO,
};

/// Relative tolerance for times landing on the step grid.
pub const GRID_TOL: f64 = 1e-9;

/// How the dephasing rate `gamma` enters the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum RateConvention {
    /// Coherences decay as `e^{-gamma t}` (the Kraus pair as written).
    #[default]
    Kraus,
    /// Coherences decay as `e^{-gamma t / 2}`, the literal master-equation rate.
    Lindblad,
}

impl RateConvention {
    pub fn name(self) -> &'static str {
        match self {
            RateConvention::Kraus => "kraus",
            RateConvention::Lindblad => "lindblad",
        }
    }
}

impl fmt::Display for RateConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RateConvention {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "kraus" => Ok(RateConvention::Kraus),
            "lindblad" => Ok(RateConvention::Lindblad),
            other => Err(format!("unknown rate convention '{other}' (expected kraus or lindblad)")),
        }
    }
}

/// Local dephasing on every qubit with jump operator `n_i = (1 + Z_i) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    gamma: f64,
    convention: RateConvention,
}

impl NoiseModel {
    pub fn new(gamma: f64) -> Result<Self> {
        Self::with_convention(gamma, RateConvention::Kraus)
    }

    pub fn with_convention(gamma: f64, convention: RateConvention) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::OutOfRange(format!("gamma = {gamma} must be >= 0")));
        }
        Ok(Self { gamma, convention })
    }

    pub fn noiseless() -> Self {
        Self { gamma: 0.0, convention: RateConvention::Kraus }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn convention(&self) -> RateConvention {
        self.convention
    }

    /// Rate handed to the Kraus pair.
    pub fn effective_gamma(&self) -> f64 {
        match self.convention {
            RateConvention::Kraus => self.gamma,
            RateConvention::Lindblad => 0.5 * self.gamma,
        }
    }

    /// `n = (1 + Z) / 2 = |0><0|`.
    pub fn jump_operator() -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
}

impl EvolutionConfig {
    pub const DEFAULT_DT: f64 = 0.01;

    pub fn new(dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::OutOfRange(format!("dt = {dt} must be positive")));
        }
        Ok(Self { dt })
    }

    /// Index of the bin boundary at `t`, or an error if `t` is off the grid.
    pub fn bin_index(&self, t: f64) -> Result<u64> {
        let k = (t / self.dt).round();
        if k < 0.0 || (k * self.dt - t).abs() > GRID_TOL * t.abs().max(1.0) {
            return Err(Error::OffGrid { time: t, dt: self.dt });
        }
        Ok(k as u64)
    }
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self { dt: Self::DEFAULT_DT }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrausPair {
    pub k1: ComplexMatrix,
    pub k2: ComplexMatrix,
}

impl KrausPair {
    /// `max |K1^dagger K1 + K2^dagger K2 - 1|`.
    pub fn completeness_defect(&self) -> f64 {
        let sum = self.k1.adjoint() * &self.k1 + self.k2.adjoint() * &self.k2;
        let id = ComplexMatrix::identity(2, 2);
        sum.iter().zip(id.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// Single-qubit dephasing Kraus pair for one bin.
pub fn dephasing_kraus(gamma: f64, dt: f64) -> Result<KrausPair> {
    if !(gamma >= 0.0) {
        return Err(Error::OutOfRange(format!("gamma = {gamma} must be >= 0")));
    }
    if !(dt > 0.0) {
        return Err(Error::OutOfRange(format!("dt = {dt} must be positive")));
    }
    let n = NoiseModel::jump_operator();
    let id = ComplexMatrix::identity(2, 2);
    let decay = (-gamma * dt).exp();
    let k1 = &id + &n * Complex64::new(decay - 1.0, 0.0);
    let k2 = &n * Complex64::new((-(-2.0 * gamma * dt).exp_m1()).sqrt(), 0.0);
    Ok(KrausPair { k1, k2 })
}

/// Superoperator `sum_j K_j (x) conj(K_j)` acting on row-major `vec(X)`.
pub(crate) fn superop_from_kraus(kraus: &[&ComplexMatrix]) -> ComplexMatrix {
    let d = kraus[0].nrows();
    let mut s = ComplexMatrix::zeros(d * d, d * d);
    for k in kraus {
        s += k.kronecker(&k.map(|z| z.conj()));
    }
    s
}

/// In-place application of a local superoperator `s` on `sites`.
pub(crate) fn apply_local_superop(rho: &mut ComplexMatrix, s: &ComplexMatrix, sites: &[usize], n: usize) {
    let offsets = local_offsets(sites, n);
    let bases = rest_bases(sites, n);
    let d = rho.nrows();
    let k = offsets.len();
    let data = rho.as_mut_slice();
    let mut block = vec![ZERO; k * k];
    for &cb in &bases {
        for &rb in &bases {
            for (j, &oj) in offsets.iter().enumerate() {
                for (l, &ol) in offsets.iter().enumerate() {
                    block[j * k + l] = data[(cb | ol) * d + (rb | oj)];
                }
            }
            for (j, &oj) in offsets.iter().enumerate() {
                for (l, &ol) in offsets.iter().enumerate() {
                    let row = j * k + l;
                    let mut acc = ZERO;
                    for (m, x) in block.iter().enumerate() {
                        acc += s[(row, m)] * x;
                    }
                    data[(cb | ol) * d + (rb | oj)] = acc;
                }
            }
        }
    }
}

/// One dissipative bin: the dephasing channel applied qubit by qubit.
pub fn dissipative_step(rho: &DensityMatrix, noise: &NoiseModel, dt: f64) -> Result<DensityMatrix> {
    let n = rho.num_qubits();
    let kraus = dephasing_kraus(noise.effective_gamma(), dt)?;
    let s = superop_from_kraus(&[&kraus.k1, &kraus.k2]);
    let mut out = rho.clone();
    for q in 1..=n {
        apply_local_superop(out.matrix_mut(), &s, &[q], n);
    }
    Ok(out)
}

fn check_disjoint(segments: &[&GateSegment], time: f64) -> Result<()> {
    let mut used = 0usize;
    for seg in segments {
        for &q in &seg.sites {
            if used & (1 << q) != 0 {
                return Err(Error::OverlappingSegments { qubit: q, time });
            }
            used |= 1 << q;
        }
    }
    Ok(())
}

/// One unitary bin: `rho -> U rho U^dagger` with `U = prod exp(-i H_seg dt)`.
pub fn unitary_step(rho: &DensityMatrix, segments: &[&GateSegment], dt: f64) -> Result<DensityMatrix> {
    check_disjoint(segments, f64::NAN)?;
    let n = rho.num_qubits();
    let mut out = rho.clone();
    for seg in segments {
        conjugate_local(out.matrix_mut(), &seg.step_unitary(dt), &seg.sites, n);
    }
    Ok(out)
}

/// Bin-index window of each segment.
fn segment_bins(segments: &[GateSegment], cfg: &EvolutionConfig) -> Result<Vec<(u64, u64)>> {
    segments
        .iter()
        .map(|s| Ok((cfg.bin_index(s.start)?, cfg.bin_index(s.end())?)))
        .collect()
}

/// Reference integrator: one unitary bin then one dissipative bin, repeated.
pub fn evolve_stepwise(
    rho: &DensityMatrix,
    segments: &[GateSegment],
    noise: &NoiseModel,
    cfg: &EvolutionConfig,
    t_from: f64,
    t_to: f64,
) -> Result<DensityMatrix> {
    let (k_from, k_to) = (cfg.bin_index(t_from)?, cfg.bin_index(t_to)?);
    if k_from >= k_to {
        return Err(Error::OutOfRange(format!("t_from = {t_from} must precede t_to = {t_to}")));
    }
    let bins = segment_bins(segments, cfg)?;
    let mut state = rho.clone();
    for k in k_from..k_to {
        let active: Vec<&GateSegment> = segments
            .iter()
            .zip(&bins)
            .filter(|(_, &(a, b))| a <= k && k < b)
            .map(|(s, _)| s)
            .collect();
        check_disjoint(&active, k as f64 * cfg.dt)?;
        state = unitary_step(&state, &active, cfg.dt)?;
        state = dissipative_step(&state, noise, cfg.dt)?;
    }
    Ok(state)
}

/// Channel of `count` identical bins restricted to one active segment's qubits.
#[derive(Debug, Clone)]
struct LocalChannel {
    sites: Vec<usize>,
    superop: ComplexMatrix,
}

/// Map of a run of identical bins.
#[derive(Debug, Clone)]
struct SlotMap {
    channels: Vec<LocalChannel>,
    idle_mask: usize,
    /// Coherence factor of the idle qubits indexed by the number of differing idle bits.
    idle_decay: Vec<f64>,
}

impl SlotMap {
    fn apply(&self, rho: &mut ComplexMatrix, n: usize) {
        for ch in &self.channels {
            apply_local_superop(rho, &ch.superop, &ch.sites, n);
        }
        if self.idle_decay.iter().any(|&f| f != 1.0) {
            let d = rho.nrows();
            let data = rho.as_mut_slice();
            for c in 0..d {
                for r in 0..d {
                    let m = ((r ^ c) & self.idle_mask).count_ones() as usize;
                    if m > 0 {
                        data[c * d + r] *= self.idle_decay[m];
                    }
                }
            }
        }
    }
}

fn matrix_power(m: &ComplexMatrix, mut exp: u64) -> ComplexMatrix {
    let mut result = ComplexMatrix::identity(m.nrows(), m.ncols());
    let mut base = m.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result = &result * &base;
        }
        exp >>= 1;
        if exp > 0 {
            base = &base * &base;
        }
    }
    result
}

/// Precomputed step maps for one schedule, noise model and step size.
///
/// Shareable across threads; every input state of a protocol reuses the same plan.
#[derive(Debug, Clone)]
pub struct EvolutionPlan {
    n: usize,
    dt: f64,
    gamma_eff: f64,
    segments: Vec<GateSegment>,
    bins: Vec<(u64, u64)>,
    /// One-bin superoperator of each segment (unitary sandwich then dephasing of its qubits).
    bin_superops: Vec<ComplexMatrix>,
    /// Slot maps for the canonical partition between consecutive segment boundaries.
    slots: HashMap<(u64, u64), SlotMap>,
    boundaries: Vec<u64>,
}

impl EvolutionPlan {
    pub fn new(
        num_qubits: usize,
        segments: &[GateSegment],
        noise: &NoiseModel,
        cfg: &EvolutionConfig,
    ) -> Result<Self> {
        let bins = segment_bins(segments, cfg)?;
        let gamma_eff = noise.effective_gamma();
        let bin_superops = segments
            .iter()
            .map(|seg| {
                let u = seg.step_unitary(cfg.dt);
                let k = seg.sites.len();
                let dim = 1 << k;
                let unitary_part = u.kronecker(&u.map(|z| z.conj()));
                // Row-major vec index j * dim + l holds X[j, l]; dephasing scales it by
                // e^{-gamma dt} per differing bit.
                let decay = ComplexMatrix::from_fn(dim * dim, dim * dim, |r, c| {
                    if r == c {
                        let m = ((r / dim) ^ (r % dim)).count_ones() as f64;
                        Complex64::new((-gamma_eff * cfg.dt * m).exp(), 0.0)
                    } else {
                        ZERO
                    }
                });
                decay * unitary_part
            })
            .collect();
        let mut boundaries: Vec<u64> = bins.iter().flat_map(|&(a, b)| [a, b]).collect();
        boundaries.push(0);
        boundaries.sort_unstable();
        boundaries.dedup();
        let mut plan = Self {
            n: num_qubits,
            dt: cfg.dt,
            gamma_eff,
            segments: segments.to_vec(),
            bins,
            bin_superops,
            slots: HashMap::new(),
            boundaries,
        };
        for w in plan.boundaries.windows(2) {
            let (a, b) = (w[0], w[1]);
            let map = plan.slot_map(a, b)?;
            plan.slots.insert((a, b), map);
        }
        Ok(plan)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn slot_map(&self, a: u64, b: u64) -> Result<SlotMap> {
        let active: Vec<usize> =
            (0..self.segments.len()).filter(|&i| self.bins[i].0 <= a && b <= self.bins[i].1).collect();
        let refs: Vec<&GateSegment> = active.iter().map(|&i| &self.segments[i]).collect();
        check_disjoint(&refs, a as f64 * self.dt)?;
        let count = b - a;
        let mut busy = 0usize;
        let channels = active
            .iter()
            .map(|&i| {
                let seg = &self.segments[i];
                for &q in &seg.sites {
                    busy |= qubit_bit(q, self.n);
                }
                LocalChannel { sites: seg.sites.clone(), superop: matrix_power(&self.bin_superops[i], count) }
            })
            .collect();
        let idle_mask = ((1usize << self.n) - 1) & !busy;
        let idle_decay =
            (0..=self.n).map(|m| (-self.gamma_eff * self.dt * (count * m as u64) as f64).exp()).collect();
        Ok(SlotMap { channels, idle_mask, idle_decay })
    }

    /// Evolves `rho` from `t_from` to `t_to`; both must lie on the step grid.
    pub fn evolve(&self, rho: &DensityMatrix, t_from: f64, t_to: f64) -> Result<DensityMatrix> {
        if rho.num_qubits() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "plan is for {} qubits, state has {}",
                self.n,
                rho.num_qubits()
            )));
        }
        let cfg = EvolutionConfig { dt: self.dt };
        let (k_from, k_to) = (cfg.bin_index(t_from)?, cfg.bin_index(t_to)?);
        if k_from >= k_to {
            return Err(Error::OutOfRange(format!("t_from = {t_from} must precede t_to = {t_to}")));
        }
        let mut cuts: Vec<u64> =
            self.boundaries.iter().copied().filter(|&k| k > k_from && k < k_to).collect();
        cuts.insert(0, k_from);
        cuts.push(k_to);
        let mut state = rho.clone();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            match self.slots.get(&(a, b)) {
                Some(map) => map.apply(state.matrix_mut(), self.n),
                None => self.slot_map(a, b)?.apply(state.matrix_mut(), self.n),
            }
        }
        Ok(state)
    }
}

/// Evolves `rho` under `segments` and dephasing from `t_from` to `t_to`.
pub fn evolve(
    rho: &DensityMatrix,
    segments: &[GateSegment],
    noise: &NoiseModel,
    cfg: &EvolutionConfig,
    t_from: f64,
    t_to: f64,
) -> Result<DensityMatrix> {
    EvolutionPlan::new(rho.num_qubits(), segments, noise, cfg)?.evolve(rho, t_from, t_to)
}
