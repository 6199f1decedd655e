//! Acceptance suite: every release gate runs here, one test per criterion,
//! each printing a `[PASS] criterion N` line (run with `--nocapture` to see
//! them). Grid parameters and thresholds come from the configs/ directory
//! so the CLI and this suite share one source of truth.

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use topdown::circuit::{random_ports, LayeredCircuit};
use topdown::gates::{build_gate, GateKind};
use topdown::linalg::{dft_matrix, sample_haar_unitary, CMatrix, PhasePlane, RngSeed, Unitary};
use topdown::metrics::{pure_fidelity, success_probability, trace_distance_bound, uhlmann_fidelity};
use topdown::quantum::{
    apply_local_gate, maximally_entangled, mub_family, simulate_coincidences, tomography,
    witness_dimension, SimulationOptions,
};
use topdown::recovery::{generate_dataset, loss_and_gradient, recover_u1, RecoveryConfig};
use topdown::sweep::{aggregate, run_sweep, SweepResultRow, SweepSpec, SweepSummaryRow};
use topdown::wfm::{
    backward_stack_at, forward_stack_at, plane_overlap_objective, run_wfm, update_plane, WfmConfig,
};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load_json(name: &str) -> serde_json::Value {
    let path = configs_dir().join(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("bad JSON in {name}: {e}"))
}

fn load_sweep_spec(name: &str) -> SweepSpec {
    serde_json::from_value(load_json(name)["sweep"].clone())
        .unwrap_or_else(|e| panic!("bad sweep spec in {name}: {e}"))
}

fn golden(path: &[&str]) -> f64 {
    let mut v = load_json("golden.json");
    for key in path {
        v = v[key].clone();
    }
    v.as_f64().unwrap_or_else(|| panic!("missing golden value {path:?}"))
}

/// μ ± σ/√N per (gate, grid point), keyed for trend checks.
fn summaries_for(rows: &[SweepResultRow]) -> Vec<SweepSummaryRow> {
    aggregate(rows).expect("rows present")
}

fn mean_se(s: &SweepSummaryRow, fidelity: bool) -> (f64, f64) {
    let (mean, std) = if fidelity {
        (s.f_mean, s.f_std)
    } else {
        (s.s_mean, s.s_std)
    };
    (mean, std / (s.count as f64).sqrt())
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for (a, b) in x.iter().zip(y) {
        num += (a - mx) * (b - my);
        dx += (a - mx).powi(2);
        dy += (b - my).powi(2);
    }
    num / (dx.sqrt() * dy.sqrt())
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// The Fig. 4a/4b sweep is shared between criteria 1 and 2.
fn fig4a_rows() -> &'static (Vec<SweepResultRow>, f64) {
    static ROWS: OnceLock<(Vec<SweepResultRow>, f64)> = OnceLock::new();
    ROWS.get_or_init(|| {
        let spec = load_sweep_spec("fig4a.json");
        let start = Instant::now();
        let rows = run_sweep(&spec).expect("fig4a sweep");
        (rows, start.elapsed().as_secs_f64())
    })
}

#[test]
fn criterion_01_fidelity_increases_with_mixer_dimension() {
    let (rows, elapsed) = fig4a_rows();
    let summary = summaries_for(rows);
    let n_values = [12usize, 25, 50, 100, 200];
    for gate in ["identity", "z", "x", "fourier", "random"] {
        let mut means = Vec::new();
        for &n in &n_values {
            let s = summary
                .iter()
                .find(|s| s.gate.label() == gate && s.n == n)
                .unwrap_or_else(|| panic!("missing point n={n} gate={gate}"));
            assert_eq!(s.count, 100, "100 realizations per point");
            means.push(s.f_mean);
        }
        for w in means.windows(2) {
            assert!(
                w[1] > w[0],
                "criterion 1 FAILED for gate {gate}: means {means:?} not strictly increasing"
            );
        }
    }
    assert!(
        elapsed <= 600.0,
        "criterion 1 FAILED: sweep took {elapsed:.1}s > 10 min"
    );
    println!(
        "[PASS] criterion 1: mean fidelity strictly increasing in n for all 5 gates \
         (d=6, L=2, 100 realizations, sweep {elapsed:.1}s)"
    );
}

#[test]
fn criterion_02_success_probability_flat_at_small_d_over_n() {
    let (rows, _) = fig4a_rows();
    let summary = summaries_for(rows);
    let mut worst: f64 = 0.0;
    for gate in ["identity", "z", "x", "fourier", "random"] {
        let s_at = |n: usize| {
            summary
                .iter()
                .find(|s| s.gate.label() == gate && s.n == n)
                .map(|s| s.s_mean)
                .expect("grid point")
        };
        let spread = (s_at(100) - s_at(200)).abs();
        worst = worst.max(spread);
        assert!(
            spread <= 0.05,
            "criterion 2 FAILED for gate {gate}: spread {spread:.4} > 0.05"
        );
    }
    println!(
        "[PASS] criterion 2: mean success-probability spread across n ∈ {{100, 200}} \
         ≤ 0.05 for every gate (worst {worst:.4})"
    );
}

#[test]
fn criterion_03_fidelity_and_success_rise_with_depth() {
    let spec = load_sweep_spec("fig4cd.json");
    let rows = run_sweep(&spec).expect("fig4cd sweep");
    let summary = summaries_for(&rows);
    let l_values = [1usize, 2, 4, 8, 12];
    for gate in ["identity", "z", "x", "fourier", "random"] {
        for fidelity in [true, false] {
            let stats: Vec<(f64, f64)> = l_values
                .iter()
                .map(|&l| {
                    let s = summary
                        .iter()
                        .find(|s| s.gate.label() == gate && s.l == l)
                        .unwrap_or_else(|| panic!("missing point L={l} gate={gate}"));
                    mean_se(s, fidelity)
                })
                .collect();
            for w in stats.windows(2) {
                let ((m0, se0), (m1, se1)) = (w[0], w[1]);
                let slack = (se0 * se0 + se1 * se1).sqrt();
                assert!(
                    m1 >= m0 - slack,
                    "criterion 3 FAILED for gate {gate} ({}): {m1:.5} < {m0:.5} - {slack:.5}",
                    if fidelity { "fidelity" } else { "success" }
                );
            }
        }
    }
    println!(
        "[PASS] criterion 3: mean fidelity and success probability non-decreasing in \
         L ∈ {{1,2,4,8,12}} within one standard error (d=6, n=200, all gates)"
    );
}

#[test]
fn criterion_04_collapse_onto_nl_over_d2() {
    let mut rows = Vec::new();
    for name in ["fig4e_d2.json", "fig4e_d4.json", "fig4e_d8.json"] {
        rows.extend(run_sweep(&load_sweep_spec(name)).expect("fig4e sweep"));
    }
    // pool gates and realizations per (n, d, L) grid point; the fixed-d/n
    // design makes points with equal nL/d² genuinely comparable
    let mut points: Vec<(f64, Vec<f64>)> = Vec::new();
    for row in &rows {
        let x = (row.n * row.l) as f64 / (row.d * row.d) as f64;
        if let Some((_, fs)) = points
            .iter_mut()
            .find(|(px, _)| (*px - x).abs() < 1e-12)
        {
            fs.push(row.fidelity);
        } else {
            points.push((x, vec![row.fidelity]));
        }
    }
    let xs: Vec<f64> = points.iter().map(|(x, _)| *x).collect();
    let means: Vec<f64> = points
        .iter()
        .map(|(_, fs)| fs.iter().sum::<f64>() / fs.len() as f64)
        .collect();
    let rho = spearman(&xs, &means);
    let rho_min = golden(&["collapse", "spearman_min"]);
    assert!(
        rho >= rho_min,
        "criterion 4 FAILED: Spearman {rho:.4} < {rho_min}"
    );

    let threshold = golden(&["collapse", "nl_over_d2_threshold"]);
    let f_min = golden(&["collapse", "fidelity_beyond_threshold"]);
    for (x, mean) in xs.iter().zip(&means) {
        if *x >= threshold {
            assert!(
                *mean >= f_min,
                "criterion 4 FAILED: mean fidelity {mean:.5} < {f_min} at nL/d² = {x}"
            );
        }
    }
    println!(
        "[PASS] criterion 4: fidelity vs nL/d² collapse has Spearman {rho:.4} ≥ {rho_min} \
         and mean fidelity ≥ {f_min} beyond nL/d² = {threshold}"
    );
}

#[test]
fn criterion_05_success_probability_saturates_at_twice_d_planes() {
    let spec = load_sweep_spec("fig4_insert.json");
    let l_over_d = golden(&["depth_scaling", "l_over_d"]);
    assert_eq!(
        spec.l_grid[0] as f64,
        l_over_d * spec.d_grid[0] as f64,
        "insert config must sit at L = 2d"
    );
    let rows = run_sweep(&spec).expect("fig4 insert sweep");
    let summary = summaries_for(&rows);
    let s_min = golden(&["depth_scaling", "success_min"]);
    for s in &summary {
        assert!(
            s.s_mean >= s_min,
            "criterion 5 FAILED for gate {}: mean S {:.4} < {s_min}",
            s.gate,
            s.s_mean
        );
    }
    let pooled: f64 =
        rows.iter().map(|r| r.success_probability).sum::<f64>() / rows.len() as f64;
    assert!(pooled >= s_min);
    println!(
        "[PASS] criterion 5: mean success probability {pooled:.4} ≥ {s_min} at \
         L = 2d (d=4, n=64, L=8, all gates)"
    );
}

#[test]
fn criterion_06_wfm_update_monotone_and_optimal() {
    // 1000 plane updates drawn from live WFM coordinate-ascent trajectories
    let mut updates = 0usize;
    let mut checked_random = 0usize;
    let mut circuit_seed = 0u64;
    'outer: loop {
        circuit_seed += 1;
        let n = 16;
        let d = 3;
        let depth = 4;
        let u = sample_haar_unitary(n, RngSeed(9000 + circuit_seed)).unwrap();
        let inp = random_ports(n, d, RngSeed(9100 + circuit_seed)).unwrap();
        let outp = random_ports(n, d, RngSeed(9200 + circuit_seed)).unwrap();
        let mut circuit = LayeredCircuit::new(
            vec![u; depth + 1],
            vec![PhasePlane::zeros(n); depth],
            inp,
            outp,
        )
        .unwrap();
        let target = build_gate(GateKind::RandomUnitary(RngSeed(9300 + circuit_seed)), d).unwrap();
        let phi0 = circuit.output_ports().mode_stack() * target.matrix();
        let mut prev_obj = f64::NEG_INFINITY;
        for _ in 0..4 {
            for p in (1..=depth).chain((1..=depth).rev()) {
                let fwd =
                    forward_stack_at(&circuit, &circuit.input_ports().mode_stack(), p).unwrap();
                let bwd = backward_stack_at(&circuit, &phi0, p).unwrap();
                let before = plane_overlap_objective(&fwd, &bwd, circuit.planes()[p - 1]2);
                let plane = update_plane(&fwd, &bwd, &circuit.planes()[p - 1]).unwrap();
                let after = plane_overlap_objective(&fwd, &bwd, &plane);
                assert!(
                    after >= before - 1e-9,
                    "criterion 6 FAILED: update decreased the objective"
                );
                assert!(
                    before >= prev_obj - 1e-9,
                    "criterion 6 FAILED: objective decreased between updates"
                );
                // the closed form beats 1000 random diagonal planes
                let mut rng_seed = RngSeed(777).mix(&[updates as u64]);
                for k in 0..1000u64 {
                    rng_seed = rng_seed.mix(&[k]);
                    let mut rng = rng_seed.rng();
                    use rand::Rng;
                    let candidate = PhasePlane::new(
                        (0..n)
                            .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                            .collect(),
                    );
                    let obj = plane_overlap_objective(&fwd, &bwd, &candidate);
                    assert!(
                        obj <= after + 1e-9,
                        "criterion 6 FAILED: random plane beat the closed form"
                    );
                    checked_random += 1;
                }
                circuit.set_plane_for_test(p - 1, plane);
                prev_obj = after;
                updates += 1;
                if updates >= 1000 {
                    break 'outer;
                }
            }
        }
    }
    println!(
        "[PASS] criterion 6: {updates} WFM updates monotone to 1e-9 and unbeaten by \
         {checked_random} random planes"
    );
}

#[test]
fn criterion_07_metric_identities() {
    for k in 0..100u64 {
        let d = 2 + (k % 9) as usize;
        let u = sample_haar_unitary(d, RngSeed(500 + k)).unwrap();
        assert!((pure_fidelity(u.matrix(), &u).unwrap() - 1.0).abs() <= 1e-10);
        assert!((success_probability(u.matrix(), &u).unwrap() - 1.0).abs() <= 1e-10);
        // scale/phase invariance
        let scale = num_complex::Complex64::from_polar(0.3 + (k as f64) * 0.01, k as f64);
        let scaled = u.matrix() * scale;
        assert!((pure_fidelity(&scaled, &u).unwrap() - 1.0).abs() <= 1e-10);
    }
    assert!((trace_distance_bound(0.75).unwrap() - 0.5).abs() <= 1e-10);
    println!(
        "[PASS] criterion 7: pure-fidelity scale/phase invariance, F(U,U)=1, S(U,U)=1, \
         √(1−0.75)=0.5 on 100 random instances at 1e-10"
    );
}

#[test]
fn criterion_08_channel_state_duality() {
    let mut worst: f64 = 0.0;
    for k in 0..100u64 {
        let d = 2 + (k % 4) as usize; // d ∈ {2,3,4,5}
        let n = 32;
        let u = sample_haar_unitary(n, RngSeed(40_000 + k)).unwrap();
        let circuit = LayeredCircuit::new(
            vec![u; 3],
            vec![PhasePlane::zeros(n); 2],
            random_ports(n, d, RngSeed(41_000 + k)).unwrap(),
            random_ports(n, d, RngSeed(42_000 + k)).unwrap(),
        )
        .unwrap();
        let target = build_gate(GateKind::RandomUnitary(RngSeed(43_000 + k)), d).unwrap();
        let cfg = WfmConfig {
            max_sweeps: 30,
            ..WfmConfig::default()
        };
        let (solved, _) = run_wfm(&circuit, &target, &cfg).unwrap();
        let t_eff = solved.effective_transform();

        let phi = maximally_entangled(d).unwrap();
        let (out, _) = apply_local_gate(&phi, &t_eff).unwrap();
        let (ideal, _) = apply_local_gate(&phi, target.matrix()).unwrap();
        let state_f = uhlmann_fidelity(out.density(), ideal.density()).unwrap();
        let channel_f = pure_fidelity(&t_eff, &target).unwrap();
        let gap = (state_f - channel_f).abs();
        worst = worst.max(gap);
        assert!(
            gap <= 1e-6,
            "criterion 8 FAILED: duality gap {gap:.2e} on circuit {k} (d={d})"
        );
    }
    println!(
        "[PASS] criterion 8: bipartite Uhlmann fidelity equals channel fidelity within \
         1e-6 on 100 synthesized circuits (worst gap {worst:.2e})"
    );
}

#[test]
fn criterion_09_mub_suite() {
    for d in [2usize, 3, 5, 7] {
        let family = mub_family(d).unwrap();
        assert_eq!(family.len(), d + 1);
        for i in 0..family.len() {
            for j in (i + 1)..family.len() {
                for a in 0..d {
                    for b in 0..d {
                        let overlap =
                            family[i].state(a).dotc(&family[j].state(b)).norm_sqr();
                        assert!(
                            (overlap - 1.0 / d as f64).abs() <= 1e-10,
                            "criterion 9 FAILED at d={d}, bases ({i},{j})"
                        );
                    }
                }
            }
        }
    }
    println!(
        "[PASS] criterion 9: all MUB pairs satisfy |⟨·|·⟩|² = 1/d ± 1e-10 for d ∈ {{2,3,5,7}}"
    );
}

#[test]
fn criterion_10_tomography_round_trip() {
    for d in [2usize, 3] {
        let state = maximally_entangled(d).unwrap();
        let family = mub_family(d).unwrap();
        let table =
            simulate_coincidences(&state, &family, &family, &SimulationOptions::exact(1e4))
                .unwrap();
        let recon = tomography(&table, &family, &family).unwrap();
        let f = uhlmann_fidelity(recon.density(), state.density()).unwrap();
        assert!(
            f >= 0.999,
            "criterion 10 FAILED: noiseless d={d} fidelity {f:.6} < 0.999"
        );
    }

    let d = 2;
    let state = maximally_entangled(d).unwrap();
    let family = mub_family(d).unwrap();
    let mut total = 0.0;
    let seeds = 50u64;
    for s in 0..seeds {
        let table = simulate_coincidences(
            &state,
            &family,
            &family,
            &SimulationOptions::poisson(1e4, RngSeed(8_000 + s)),
        )
        .unwrap();
        let recon = tomography(&table, &family, &family).unwrap();
        total += uhlmann_fidelity(recon.density(), state.density()).unwrap();
    }
    let mean = total / seeds as f64;
    assert!(
        mean >= 0.98,
        "criterion 10 FAILED: Poisson mean fidelity {mean:.5} < 0.98 over 50 seeds"
    );
    println!(
        "[PASS] criterion 10: tomography round-trip ≥ 0.999 noiseless (d ∈ {{2,3}}), \
         Poisson mean {mean:.5} ≥ 0.98 over 50 seeds"
    );
}

#[test]
fn criterion_11_witness_arithmetic() {
    assert_eq!(witness_dimension(0.689, 5).unwrap(), 4);
    assert_eq!(witness_dimension(0.838, 5).unwrap(), 5);
    println!(
        "[PASS] criterion 11: F=0.689 at d=5 certifies 4 dimensions; F=0.838 certifies 5"
    );
}

#[test]
fn criterion_12_transfer_matrix_recovery() {
    let start = Instant::now();

    // analytic gradient vs central finite differences on 4x4 instances
    let n = 4;
    let u1 = sample_haar_unitary(n, RngSeed(61)).unwrap();
    let u2 = dft_matrix(n).unwrap();
    let data = generate_dataset(&u1, &u2, (16, 16, 32), RngSeed(62), None).unwrap();
    let mut rng = RngSeed(63).rng();
    use rand::Rng;
    let point = CMatrix::from_fn(n, n, |_, _| {
        num_complex::Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let (_, grad) = loss_and_gradient(&point, data.records(), data.u2(), data.input_field());
    let h = 1e-5;
    let mut max_rel: f64 = 0.0;
    let loss_at = |u: &CMatrix| -> f64 {
        let (l, _) = loss_and_gradient(u, data.records(), data.u2(), data.input_field());
        l
    };
    for j in 0..n {
        for k in 0..n {
            for part in 0..2 {
                let delta = if part == 0 {
                    num_complex::Complex64::new(h, 0.0)
                } else {
                    num_complex::Complex64::new(0.0, h)
                };
                let mut up = point.clone();
                up[(j, k)] += delta;
                let mut dn = point.clone();
                dn[(j, k)] -= delta;
                let fd = (loss_at(&up) - loss_at(&dn)) / (2.0 * h);
                let an = if part == 0 { grad[(j, k)].re } else { grad[(j, k)].im };
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-12);
                max_rel = max_rel.max(rel);
            }
        }
    }
    assert!(
        max_rel <= 1e-4,
        "criterion 12 FAILED: gradient error {max_rel:.2e} > 1e-4"
    );

    // n=16, noiseless, 4n² records (the shipped tm_recover_n16 geometry)
    let n = 16;
    let u1 = sample_haar_unitary(n, RngSeed(71)).unwrap();
    let u2 = dft_matrix(n).unwrap();
    let data = generate_dataset(&u1, &u2, (256, 256, 512), RngSeed(72), None).unwrap();
    let (_, report) = recover_u1(&data, &RecoveryConfig::default()).expect("recovery converges");
    assert!(
        report.holdout_intensity_r2 >= 0.99,
        "criterion 12 FAILED: holdout R² {:.5} < 0.99",
        report.holdout_intensity_r2
    );
    let fid = report.unitary_fidelity.expect("ground truth present");
    assert!(
        fid >= 0.99,
        "criterion 12 FAILED: recovery fidelity {fid:.5} < 0.99"
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed <= 300.0,
        "criterion 12 FAILED: took {elapsed:.1}s > 5 min"
    );
    println!(
        "[PASS] criterion 12: gradient error {max_rel:.2e} ≤ 1e-4; n=16 recovery R² \
         {:.5} and fidelity {fid:.5} ≥ 0.99 in {elapsed:.1}s",
        report.holdout_intensity_r2
    );
}
