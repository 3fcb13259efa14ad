//! Acceptance criteria. Each test prints one `criterion N ... PASS|FAIL` line
//! before asserting, so `cargo test --test acceptance -- --nocapture` gives a summary.

mod common;

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};

use noisy_teleport::evolution::dephasing_kraus;
use noisy_teleport::gates::EncodingKind::{self, Scrambling, Swap};
use noisy_teleport::metrics::{
    average_over_inputs, cut34, fidelity, log_negativity, purity, target_state, LogBase, MetricsRecord, SimConfig,
};
use noisy_teleport::protocol::{InputState, PreparedProtocol, RunConfig, DEFAULT_MEASURED_PAIR};
use noisy_teleport::sweep::SweepConfig;
use noisy_teleport::tensor_core::{frobenius_distance, partial_transpose, DensityMatrix, QubitSubset};

const BOTH: [EncodingKind; 2] = [Scrambling, Swap];

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {n} [{name}]: {} ({detail})", if pass { "PASS" } else { "FAIL" });
}

/// Input-averaged fidelity, purity and 34-cut entanglement.
#[derive(Debug, Clone, Copy)]
struct Quick {
    fidelity: f64,
    purity: f64,
    purity_of_mean: f64,
    neg_cut34: f64,
}

type Key = (EncodingKind, u64, u64, u64, (usize, usize));

fn quick_with(kind: EncodingKind, alpha: f64, gamma: f64, dt: f64, pair: (usize, usize)) -> Quick {
    static CACHE: OnceLock<Mutex<HashMap<Key, Quick>>> = OnceLock::new();
    let key = (kind, alpha.to_bits(), gamma.to_bits(), dt.to_bits(), pair);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(q) = cache.lock().unwrap().get(&key) {
        return *q;
    }
    let cfg = RunConfig { measured_pair: pair, ..RunConfig::with_dt(dt) };
    let prepared = PreparedProtocol::from_config(kind, alpha, gamma, &cfg).unwrap();
    let (mut f, mut p, mut e) = (0.0, 0.0, 0.0);
    let mut mean = noisy_teleport::tensor_core::ComplexMatrix::zeros(128, 128);
    for phi in InputState::ALL {
        let post = prepared.run(phi).unwrap().outcome.post_state;
        f += fidelity(&target_state(&post).unwrap(), phi).unwrap();
        p += purity(&post);
        e += log_negativity(&post, &cut34(), LogBase::Two).unwrap();
        mean += post.matrix();
    }
    mean /= num_complex::Complex64::new(6.0, 0.0);
    let q = Quick { fidelity: f / 6.0, purity: p / 6.0, purity_of_mean: mean.norm_squared(), neg_cut34: e / 6.0 };
    cache.lock().unwrap().insert(key, q);
    q
}

fn quick(kind: EncodingKind, alpha: f64, gamma: f64) -> Quick {
    quick_with(kind, alpha, gamma, 0.01, DEFAULT_MEASURED_PAIR)
}

fn full(kind: EncodingKind, alpha: f64, gamma: f64) -> MetricsRecord {
    average_over_inputs(kind, alpha, gamma, &SimConfig::default()).unwrap()
}

#[test]
fn criterion_01_perfect_teleportation() {
    let values: Vec<f64> = BOTH.iter().map(|&k| quick(k, 1.0, 0.0).fidelity).collect();
    let pass = values.iter().all(|f| (f - 1.0).abs() <= 1e-3);
    report(1, "perfect teleportation", pass, &format!("F(scr) = {:.6}, F(swap) = {:.6}, target 1 +- 1e-3", values[0], values[1]));
    assert!(pass);
}

#[test]
fn criterion_02_random_target() {
    let mut worst: f64 = 0.0;
    for kind in BOTH {
        for gamma in [0.0, 0.03, 0.06] {
            worst = worst.max((quick(kind, 0.0, gamma).fidelity - 0.5).abs());
        }
    }
    let pass = worst <= 1e-3;
    report(2, "random target", pass, &format!("max |F - 1/2| = {worst:.2e} over gamma in {{0, 0.03, 0.06}}, both protocols"));
    assert!(pass);
}

#[test]
fn criterion_03_noiseless_purity() {
    let mut worst: f64 = 0.0;
    for kind in BOTH {
        for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
            worst = worst.max((quick(kind, alpha, 0.0).purity - 1.0).abs());
        }
    }
    let pass = worst <= 1e-6;
    report(3, "noiseless purity", pass, &format!("max |P - 1| = {worst:.2e}"));
    assert!(pass);
}

#[test]
fn criterion_04_purity_floor() {
    let q = quick(Scrambling, 1.0, 0.06);
    let target = 1.0 / 32.0;
    let rel = (q.purity - target).abs() / target;
    let pass = rel <= 0.05;
    report(
        4,
        "purity floor",
        pass,
        &format!(
            "P = {:.5} (input-averaged Tr rho^2), Tr(mean rho)^2 = {:.5}, target {target} +- 5%, relative error {:.1}%",
            q.purity,
            q.purity_of_mean,
            100.0 * rel
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_cut_entanglement_endpoints() {
    let mut lines = Vec::new();
    let mut pass = true;
    for kind in BOTH {
        let (e0, e1) = (quick(kind, 0.0, 0.0).neg_cut34, quick(kind, 1.0, 0.0).neg_cut34);
        pass &= (e0 - 1.0).abs() <= 2e-2 && (e1 - 2.0).abs() <= 2e-2;
        lines.push(format!("{kind}: E(0) = {e0:.4}, E(1) = {e1:.4}"));
    }
    report(5, "cut entanglement endpoints", pass, &lines.join("; "));
    assert!(pass);
}

#[test]
fn criterion_06_entanglement_budget() {
    let mut lines = Vec::new();
    let mut pass = true;
    for kind in BOTH {
        let (r0, r1) = (full(kind, 0.0, 0.0), full(kind, 1.0, 0.0));
        pass &= r0.delta_e_u.abs() <= 2e-2 && (r1.delta_e_u - 6.0).abs() <= 2e-2 && (r0.delta_e_m + 1.0).abs() <= 2e-2;
        lines.push(format!(
            "{kind}: dE_U(0) = {:.4}, dE_U(1) = {:.4}, dE_M(0) = {:.4}",
            r0.delta_e_u, r1.delta_e_u, r0.delta_e_m
        ));
    }
    report(6, "entanglement budget", pass, &lines.join("; "));
    assert!(pass);
}

fn upper_alphas() -> Vec<f64> {
    (5..=10).map(|i| i as f64 / 10.0).collect()
}

#[test]
fn criterion_07_two_regime_crossover() {
    let cut = |gamma: f64| -> Vec<f64> { upper_alphas().iter().map(|&a| quick(Scrambling, a, gamma).neg_cut34).collect() };
    let weak = cut(0.02);
    let strong = cut(0.06);
    let near = cut(0.038);
    let increasing = weak.windows(2).all(|w| w[1] > w[0]);
    let decreasing = strong.windows(2).all(|w| w[1] < w[0]);
    let spread = near.iter().cloned().fold(f64::MIN, f64::max) - near.iter().cloned().fold(f64::MAX, f64::min);

    // Sign change of the mean slope over [0.5, 1].
    let slope = |gamma: f64| quick(Scrambling, 1.0, gamma).neg_cut34 - quick(Scrambling, 0.5, gamma).neg_cut34;
    let (mut lo, mut hi) = (0.02, 0.06);
    let bracketed = slope(lo) > 0.0 && slope(hi) < 0.0;
    for _ in 0..10 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma_c = 0.5 * (lo + hi);
    let pass = increasing && decreasing && spread < 0.1 && bracketed && (0.019..=0.076).contains(&gamma_c);
    report(
        7,
        "two-regime crossover",
        pass,
        &format!(
            "increasing at 0.02: {increasing}, decreasing at 0.06: {decreasing}, spread at 0.038 = {spread:.4}, gamma_c = {gamma_c:.4}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_swap_monotonicity() {
    let alphas = SweepConfig::default().alpha_grid.values();
    let mut worst = f64::INFINITY;
    for gamma in [0.0, 0.038, 0.06] {
        let values: Vec<f64> = alphas.iter().map(|&a| quick(Swap, a, gamma).neg_cut34).collect();
        for w in values.windows(2) {
            worst = worst.min(w[1] - w[0]);
        }
    }
    let pass = worst >= -1e-3;
    report(
        8,
        "swap monotonicity",
        pass,
        &format!("smallest step of E(alpha) = {worst:.2e} over the default {}-point alpha grid", alphas.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_09_perfect_scrambler() {
    let values: Vec<(String, f64)> = [(1, 6), (2, 5), (3, 4)]
        .into_iter()
        .map(|pair| (format!("{pair:?}"), quick_with(Scrambling, 1.0, 0.0, 0.01, pair).fidelity))
        .collect();
    let pass = values.iter().all(|(_, f)| (f - 1.0).abs() <= 1e-3);
    let detail: Vec<String> = values.iter().map(|(p, f)| format!("{p}: F = {f:.6}")).collect();
    report(9, "perfect scrambler", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn criterion_10_property_suite() {
    let mut failures = Vec::new();

    // CPTP along the trajectory.
    let mut worst_trace: f64 = 0.0;
    let mut worst_eig = f64::INFINITY;
    for kind in BOTH {
        let prepared = PreparedProtocol::from_config(kind, 0.7, 0.05, &RunConfig::default()).unwrap();
        for phi in [InputState::XPlus, InputState::YMinus] {
            let t = prepared.run(phi).unwrap();
            for rho in [&t.rho_t1, &t.rho_t2, &t.rho_t3_pre, &t.outcome.post_state] {
                worst_trace = worst_trace.max((rho.trace().re - 1.0).abs());
                worst_eig = worst_eig.min(rho.min_eigenvalue().unwrap());
            }
        }
    }
    if worst_trace > 1e-12 || worst_eig < -1e-8 {
        failures.push(format!("CPTP: trace error {worst_trace:.1e}, min eigenvalue {worst_eig:.1e}"));
    }

    let mut worst_kraus: f64 = 0.0;
    for gamma in [0.0, 0.038, 0.06, 1.0] {
        for dt in [0.0025, 0.01, 0.1] {
            worst_kraus = worst_kraus.max(dephasing_kraus(gamma, dt).unwrap().completeness_defect());
        }
    }
    if worst_kraus > 1e-14 {
        failures.push(format!("Kraus completeness {worst_kraus:.1e}"));
    }

    let traj = PreparedProtocol::from_config(Scrambling, 0.6, 0.03, &RunConfig::default()).unwrap().run(InputState::YPlus).unwrap();
    let b = QubitSubset::new(vec![2, 5, 6], 7).unwrap();
    let once = DensityMatrix::new(partial_transpose(&traj.rho_t2, &b).unwrap()).unwrap();
    if partial_transpose(&once, &b).unwrap() != *traj.rho_t2.matrix() {
        failures.push("partial transpose is not an involution".into());
    }

    // Trotter self-convergence on random grid points.
    let mut rng = rand::rngs::StdRng::seed_from_u64(20_240_607);
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..5 {
        let kind = if rng.random_bool(0.5) { Scrambling } else { Swap };
        let alpha: f64 = rng.random_range(0.0..=1.0);
        let gamma: f64 = rng.random_range(0.0..=0.06);
        let [a, b, c] = [0.01, 0.005, 0.0025].map(|dt| quick_with(kind, alpha, gamma, dt, DEFAULT_MEASURED_PAIR));
        for (name, get) in [
            ("fidelity", (|q: &Quick| q.fidelity) as fn(&Quick) -> f64),
            ("purity", |q: &Quick| q.purity),
            ("neg_cut34", |q: &Quick| q.neg_cut34),
        ] {
            let (d1, d2) = ((get(&a) - get(&b)).abs(), (get(&b) - get(&c)).abs());
            if d1 > 5.0 * d2 + 1e-6 {
                failures.push(format!("{kind} alpha={alpha:.3} gamma={gamma:.4} {name}: |dt - dt/2| = {d1:.2e}, |dt/2 - dt/4| = {d2:.2e}"));
            }
            if d2 > 1e-12 {
                worst_ratio = worst_ratio.max(d1 / d2);
            }
        }
    }

    // Noiseless engine against exact gate products.
    let mut worst_distance: f64 = 0.0;
    for kind in BOTH {
        for alpha in [0.0, rng.random_range(0.0..=1.0), 1.0] {
            let prepared = PreparedProtocol::from_config(kind, alpha, 0.0, &RunConfig::default()).unwrap();
            for phi in InputState::ALL {
                let t = prepared.run(phi).unwrap();
                let o = common::run(kind, alpha, phi, DEFAULT_MEASURED_PAIR);
                for (rho, psi) in [(&t.rho_t1, &o.t1), (&t.rho_t2, &o.t2), (&t.rho_t3_pre, &o.t3)] {
                    worst_distance = worst_distance.max(frobenius_distance(rho.matrix(), common::density(psi).matrix()));
                }
            }
        }
    }
    if worst_distance > 1e-6 {
        failures.push(format!("oracle distance {worst_distance:.1e}"));
    }

    let pass = failures.is_empty();
    let detail = if pass {
        format!(
            "trace error {worst_trace:.1e}, min eigenvalue {worst_eig:.1e}, Kraus defect {worst_kraus:.1e}, \
             max Trotter ratio {worst_ratio:.2}, oracle distance {worst_distance:.1e}"
        )
    } else {
        failures.join("; ")
    };
    report(10, "property suite", pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_11_qualitative_decay() {
    let gammas: Vec<f64> = (1..=12).map(|i| 0.005 * i as f64).collect();
    let mut failures = Vec::new();
    let series = |kind| -> Vec<Quick> { gammas.iter().map(|&g| quick(kind, 1.0, g)).collect() };
    let (scr, swap) = (series(Scrambling), series(Swap));
    for (kind, s) in [(Scrambling, &scr), (Swap, &swap)] {
        if !s.windows(2).all(|w| w[1].fidelity < w[0].fidelity) {
            failures.push(format!("{kind} fidelity not strictly decreasing"));
        }
        if !s.windows(2).all(|w| w[1].purity < w[0].purity) {
            failures.push(format!("{kind} purity not strictly decreasing"));
        }
    }
    for (i, &g) in gammas.iter().enumerate() {
        if g >= 0.02 - 1e-12 && scr[i].fidelity >= swap[i].fidelity {
            failures.push(format!("F(scr) >= F(swap) at gamma = {g}"));
        }
    }
    let pass = failures.is_empty();
    let detail = if pass {
        format!(
            "F(scr) {:.4} -> {:.4}, F(swap) {:.4} -> {:.4} over gamma 0.005..0.06",
            scr[0].fidelity, scr[11].fidelity, swap[0].fidelity, swap[11].fidelity
        )
    } else {
        failures.join("; ")
    };
    report(11, "qualitative decay", pass, &detail);
    assert!(pass);
}
