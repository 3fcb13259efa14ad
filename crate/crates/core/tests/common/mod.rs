//! Noiseless state-vector reference for the teleportation circuit.
//!
//! Gates are applied as exact closed-form matrices in schedule order, with no
//! time discretization, so it is independent of the Trotterized engine.

#![allow(dead_code)]

use num_complex::Complex64;

use noisy_teleport::gates::{EncodingKind, GateKind};
use noisy_teleport::protocol::{InputState, BELL_PAIRS};
use noisy_teleport::tensor_core::{ComplexMatrix, DensityMatrix};

pub const N: usize = 7;

fn bit(q: usize) -> usize {
    1 << (N - q)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn xx(psi: &mut [Complex64], a: usize, b: usize, phi: f64) {
    let flip = bit(a) | bit(b);
    let (cos, sin) = ((phi / 2.0).cos(), (phi / 2.0).sin());
    let old = psi.to_vec();
    for i in 0..psi.len() {
        psi[i] = old[i] * cos + old[i ^ flip] * c(0.0, sin);
    }
}

pub fn rz(psi: &mut [Complex64], q: usize, phi: f64) {
    for (i, amp) in psi.iter_mut().enumerate() {
        let sign = if i & bit(q) == 0 { 1.0 } else { -1.0 };
        *amp *= Complex64::from_polar(1.0, sign * phi / 2.0);
    }
}

pub fn cnot(psi: &mut [Complex64], control: usize, target: usize) {
    for i in 0..psi.len() {
        if i & bit(control) != 0 && i & bit(target) == 0 {
            psi.swap(i, i | bit(target));
        }
    }
}

/// Standard Hadamard; the global phase of the engine's gate does not matter here.
pub fn hadamard(psi: &mut [Complex64], q: usize) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..psi.len() {
        if i & bit(q) == 0 {
            let (x, y) = (psi[i], psi[i | bit(q)]);
            psi[i] = (x + y) * s;
            psi[i | bit(q)] = (x - y) * s;
        }
    }
}

/// `1 + (e^{i pi e} - 1) P_singlet`.
pub fn pswap(psi: &mut [Complex64], a: usize, b: usize, exponent: f64) {
    let w = Complex64::from_polar(1.0, std::f64::consts::PI * exponent) - 1.0;
    for i in 0..psi.len() {
        if i & (bit(a) | bit(b)) == bit(b) {
            let j = i ^ bit(a) ^ bit(b);
            // Component along (|01> - |10>) / sqrt 2, applied back with the same vector.
            let s = (psi[i] - psi[j]) * 0.5 * w;
            psi[i] += s;
            psi[j] -= s;
        }
    }
}

fn apply(psi: &mut [Complex64], kind: GateKind, sites: &[usize], param: f64) {
    match kind {
        GateKind::Xx => xx(psi, sites[0], sites[1], param),
        GateKind::Rz => rz(psi, sites[0], param),
        GateKind::Cnot => cnot(psi, sites[0], sites[1]),
        GateKind::Had => hadamard(psi, sites[0]),
        GateKind::ParamSwap => pswap(psi, sites[0], sites[1], param),
    }
}

/// Pure states at t1, t2 and t3 (before the projection).
pub struct OracleRun {
    pub t1: Vec<Complex64>,
    pub t2: Vec<Complex64>,
    pub t3: Vec<Complex64>,
}

pub fn run(kind: EncodingKind, alpha: f64, phi: InputState, pair: (usize, usize)) -> OracleRun {
    let mut psi = vec![c(0.0, 0.0); 1 << N];
    let [a0, a1] = phi.vector();
    psi[0] = a0;
    psi[bit(1)] = a1;
    for (a, b) in BELL_PAIRS {
        xx(&mut psi, a, b, std::f64::consts::FRAC_PI_2);
        rz(&mut psi, a, std::f64::consts::FRAC_PI_2);
    }
    let t1 = psi.clone();
    let mut entries = kind.default_template().entries.clone();
    entries.sort_by(|x, y| x.start.total_cmp(&y.start));
    for e in &entries {
        apply(&mut psi, e.kind, &e.sites, e.param.eval(alpha));
    }
    let t2 = psi.clone();
    cnot(&mut psi, pair.0, pair.1);
    hadamard(&mut psi, pair.0);
    OracleRun { t1, t2, t3: psi }
}

pub fn density(psi: &[Complex64]) -> DensityMatrix {
    DensityMatrix::from_pure(psi).unwrap()
}

/// Probability of `|00>` on `pair` and the normalized projected state.
pub fn project(psi: &[Complex64], pair: (usize, usize)) -> (f64, Vec<Complex64>) {
    let mask = bit(pair.0) | bit(pair.1);
    let mut out: Vec<Complex64> =
        psi.iter().enumerate().map(|(i, &a)| if i & mask == 0 { a } else { c(0.0, 0.0) }).collect();
    let p: f64 = out.iter().map(|a| a.norm_sqr()).sum();
    for a in &mut out {
        *a /= p.sqrt();
    }
    (p, out)
}

/// Reduced state of qubit 7, summed directly from amplitudes.
pub fn qubit7(psi: &[Complex64]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(2, 2);
    for rest in (0..psi.len()).step_by(2) {
        for r in 0..2 {
            for col in 0..2 {
                m[(r, col)] += psi[rest | r] * psi[rest | col].conj();
            }
        }
    }
    m
}

pub fn fidelity(psi_post: &[Complex64], phi: InputState) -> f64 {
    let m = qubit7(psi_post);
    let v = phi.vector();
    let mut acc = c(0.0, 0.0);
    for r in 0..2 {
        for col in 0..2 {
            acc += v[r].conj() * m[(r, col)] * v[col];
        }
    }
    acc.re
}
