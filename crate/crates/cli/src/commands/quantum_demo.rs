//! `topdown quantum-demo`: synthesize a gate, act on half of an entangled
//! pair, simulate MUB coincidence measurements, reconstruct the state, and
//! certify its entanglement dimensionality.
//!
//! In two-bases mode the device itself is the measurement: an identity
//! circuit reads out the pixel basis and a Fourier circuit reads out the
//! first MUB, and the two-basis witness bounds the fidelity from those
//! correlations alone.

use serde::Serialize;
use topdown::circuit::{CircuitSpec, LayeredCircuit, MixerKind};
use topdown::gates::{build_gate, GateKind};
use topdown::linalg::RngSeed;
use topdown::metrics::{pure_fidelity, success_probability, uhlmann_fidelity};
use topdown::quantum::{
    apply_local_gate, maximally_entangled, maximally_mixed_bipartite, mub_family,
    simulate_coincidences, tomography, two_basis_fidelity_bound, witness_dimension,
    BipartiteState, CoincidenceTable, SimulationOptions,
};
use topdown::sweep::PortPolicy;
use topdown::wfm::run_wfm;

use crate::artifact::{write_csv_artifact, write_json_artifact, ArtifactHeader};
use crate::config::{resolve_gate, BasesMode, InputState, QuantumDemoConfig};
use crate::{CliError, Context};

#[derive(Serialize)]
struct GateReport {
    gate: String,
    channel_fidelity: f64,
    success_probability: f64,
    post_selection: f64,
    wfm_sweeps: usize,
}

#[derive(Serialize)]
struct DemoReport<'a> {
    header: &'a ArtifactHeader,
    mode: &'static str,
    d: usize,
    n: usize,
    #[serde(rename = "L")]
    depth: usize,
    input_state: &'static str,
    rate: f64,
    poisson: bool,
    gates: Vec<GateReport>,
    /// Uhlmann fidelity of the reconstruction against the ideal output
    /// (full mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    reconstruction_fidelity: Option<f64>,
    /// Fidelity to the maximally entangled reference used by the witness:
    /// reconstructed in full mode, the two-basis lower bound otherwise.
    witness_fidelity: f64,
    witnessed_dimension: usize,
    coincidences_path: String,
}

fn synthesize_gate(
    cfg: &QuantumDemoConfig,
    base: RngSeed,
    gate: GateKind,
) -> Result<(LayeredCircuit, usize), CliError> {
    let ports = |tag: u64| -> Result<Vec<usize>, CliError> {
        match cfg.port_policy {
            PortPolicy::Random => topdown::circuit::random_ports(cfg.n, cfg.d, base.mix(&[tag]))
                .map(|p| p.indices().to_vec())
                .map_err(CliError::from_setup),
            PortPolicy::FirstD => Ok((0..cfg.d).collect()),
        }
    };
    let spec = CircuitSpec {
        n: cfg.n,
        depth: cfg.depth,
        mixer_kind: cfg.mixer_kind.clone(),
        mixer_seed: match cfg.mixer_kind {
            MixerKind::HaarShared | MixerKind::HaarPerLayer => Some(base.mix(&[1])),
            _ => None,
        },
        trailing_mixer: true,
        input_ports: ports(2)?,
        output_ports: ports(3)?,
        phases: vec![],
    };
    let circuit = spec.build().map_err(CliError::from_setup)?;
    let target = build_gate(gate, cfg.d).map_err(CliError::from_setup)?;
    let (solved, report) =
        run_wfm(&circuit, &target, &cfg.wfm).map_err(CliError::from_run)?;
    if let Some(t) = cfg.wfm.fidelity_target {
        if report.final_fidelity < t {
            return Err(CliError::target_not_met(format!(
                "gate {gate}: fidelity {:.6} below target {t}",
                report.final_fidelity
            )));
        }
    }
    Ok((solved, report.sweeps_used))
}

fn input_state(cfg: &QuantumDemoConfig) -> Result<BipartiteState, CliError> {
    match cfg.input_state {
        InputState::PhiPlus => maximally_entangled(cfg.d).map_err(CliError::from_setup),
        InputState::MaximallyMixed => {
            maximally_mixed_bipartite(cfg.d).map_err(CliError::from_setup)
        }
    }
}

pub fn run(ctx: Context) -> Result<(), CliError> {
    let cfg: &QuantumDemoConfig = ctx
        .config
        .quantum_demo
        .as_ref()
        .ok_or_else(|| CliError::config("config has no \"quantum-demo\" section"))?;
    if cfg.d > cfg.n || cfg.d < 2 {
        return Err(CliError::config(format!(
            "need 2 ≤ d ≤ n, got d={} n={}",
            cfg.d, cfg.n
        )));
    }
    if cfg.rate <= 0.0 {
        return Err(CliError::config("rate must be positive"));
    }
    let family = mub_family(cfg.d).map_err(CliError::from_setup)?;
    let base = ctx.base_seed;
    let rho_in = input_state(cfg)?;

    match cfg.bases_mode {
        BasesMode::Full => run_full(&ctx, cfg, base, &family, &rho_in),
        BasesMode::TwoBases => run_two_bases(&ctx, cfg, base, &family, &rho_in),
    }
}

fn run_full(
    ctx: &Context,
    cfg: &QuantumDemoConfig,
    base: RngSeed,
    family: &[topdown::quantum::MubBasis],
    rho_in: &BipartiteState,
) -> Result<(), CliError> {
    let gate_kind = resolve_gate(&cfg.gate, base)?;
    let target = build_gate(gate_kind, cfg.d).map_err(CliError::from_setup)?;
    let (solved, sweeps) = synthesize_gate(cfg, base, gate_kind)?;
    let t_eff = solved.effective_transform();
    let channel_fidelity = pure_fidelity(&t_eff, &target).map_err(CliError::from_run)?;
    let success = success_probability(&t_eff, &target).map_err(CliError::from_run)?;
    log::info!("gate {gate_kind}: channel fidelity {channel_fidelity:.6}, S {success:.6}");

    let (rho_out, post_selection) =
        apply_local_gate(rho_in, &t_eff).map_err(CliError::from_run)?;

    let opts = SimulationOptions {
        rate: cfg.rate,
        poisson_seed: cfg.poisson_seed.map(RngSeed),
        alice_efficiency: None,
        bob_efficiency: None,
    };
    let table =
        simulate_coincidences(&rho_out, family, family, &opts).map_err(CliError::from_run)?;
    let coincidences_path = ctx.out_dir.join("coincidences.csv");
    let mut csv = Vec::new();
    table.write_csv(&mut csv).map_err(CliError::from_run)?;
    write_csv_artifact(&coincidences_path, &ctx.header, &csv)?;

    let reconstructed = tomography(&table, family, family).map_err(CliError::from_run)?;

    // ideal output of the configured input through the exact target gate
    let (ideal_out, _) =
        apply_local_gate(rho_in, target.matrix()).map_err(CliError::from_run)?;
    let reconstruction_fidelity =
        uhlmann_fidelity(reconstructed.density(), ideal_out.density())
            .map_err(CliError::from_run)?;

    // witness reference: the maximally entangled state carried through the
    // ideal gate (itself maximally entangled)
    let phi = maximally_entangled(cfg.d).map_err(CliError::from_setup)?;
    let (witness_ref, _) =
        apply_local_gate(&phi, target.matrix()).map_err(CliError::from_run)?;
    let witness_fidelity = uhlmann_fidelity(reconstructed.density(), witness_ref.density())
        .map_err(CliError::from_run)?
        .clamp(0.0, 1.0);
    let witnessed_dimension =
        witness_dimension(witness_fidelity, cfg.d).map_err(CliError::from_run)?;

    let report = DemoReport {
        header: &ctx.header,
        mode: "full",
        d: cfg.d,
        n: cfg.n,
        depth: cfg.depth,
        input_state: match cfg.input_state {
            InputState::PhiPlus => "phi-plus",
            InputState::MaximallyMixed => "maximally-mixed",
        },
        rate: cfg.rate,
        poisson: cfg.poisson_seed.is_some(),
        gates: vec![GateReport {
            gate: gate_kind.to_string(),
            channel_fidelity,
            success_probability: success,
            post_selection,
            wfm_sweeps: sweeps,
        }],
        reconstruction_fidelity: Some(reconstruction_fidelity),
        witness_fidelity,
        witnessed_dimension,
        coincidences_path: coincidences_path.display().to_string(),
    };
    emit(ctx, report)
}

fn run_two_bases(
    ctx: &Context,
    cfg: &QuantumDemoConfig,
    base: RngSeed,
    family: &[topdown::quantum::MubBasis],
    rho_in: &BipartiteState,
) -> Result<(), CliError> {
    let d = cfg.d;
    let alice = &family[0..2];
    let pixel = std::slice::from_ref(&family[0]);

    // the same physical device is reprogrammed per basis: identity reads
    // out the pixel basis, the Fourier gate reads out MUB 1
    let mut tables: Vec<CoincidenceTable> = Vec::new();
    let mut gates = Vec::new();
    for (ordinal, gate_kind) in [GateKind::Identity, GateKind::Fourier].into_iter().enumerate() {
        let target = build_gate(gate_kind, d).map_err(CliError::from_setup)?;
        let (solved, sweeps) = synthesize_gate(cfg, base, gate_kind)?;
        let t_eff = solved.effective_transform();
        let channel_fidelity = pure_fidelity(&t_eff, &target).map_err(CliError::from_run)?;
        let success = success_probability(&t_eff, &target).map_err(CliError::from_run)?;
        let (rho_out, post_selection) =
            apply_local_gate(rho_in, &t_eff).map_err(CliError::from_run)?;
        let opts = SimulationOptions {
            rate: cfg.rate,
            poisson_seed: cfg
                .poisson_seed
                .map(|s| RngSeed(s).mix(&[ordinal as u64])),
            alice_efficiency: None,
            bob_efficiency: None,
        };
        // Bob detects in the pixel basis after his circuit
        tables.push(
            simulate_coincidences(&rho_out, alice, pixel, &opts)
                .map_err(CliError::from_run)?,
        );
        gates.push(GateReport {
            gate: gate_kind.to_string(),
            channel_fidelity,
            success_probability: success,
            post_selection,
            wfm_sweeps: sweeps,
        });
        log::info!(
            "gate {gate_kind}: channel fidelity {channel_fidelity:.6}, S {success:.6}"
        );
    }

    // assemble the 2×2 basis grid: Bob's effective basis is the gate index
    let mut counts = Vec::with_capacity(4 * d * d);
    for mu in 0..2 {
        for table in &tables {
            for a in 0..d {
                for b in 0..d {
                    counts.push(table.get(mu, 0, a, b).expect("simulated grid"));
                }
            }
        }
    }
    let combined = CoincidenceTable::from_counts(d, vec![0, 1], vec![0, 1], counts)
        .map_err(CliError::from_run)?;
    let coincidences_path = ctx.out_dir.join("coincidences.csv");
    let mut csv = Vec::new();
    combined.write_csv(&mut csv).map_err(CliError::from_run)?;
    write_csv_artifact(&coincidences_path, &ctx.header, &csv)?;

    let bound = two_basis_fidelity_bound(&combined)
        .map_err(CliError::from_run)?
        .clamp(0.0, 1.0);
    let witnessed_dimension = witness_dimension(bound, d).map_err(CliError::from_run)?;

    let report = DemoReport {
        header: &ctx.header,
        mode: "two-bases",
        d,
        n: cfg.n,
        depth: cfg.depth,
        input_state: match cfg.input_state {
            InputState::PhiPlus => "phi-plus",
            InputState::MaximallyMixed => "maximally-mixed",
        },
        rate: cfg.rate,
        poisson: cfg.poisson_seed.is_some(),
        gates,
        reconstruction_fidelity: None,
        witness_fidelity: bound,
        witnessed_dimension,
        coincidences_path: coincidences_path.display().to_string(),
    };
    emit(ctx, report)
}

fn emit(ctx: &Context, report: DemoReport<'_>) -> Result<(), CliError> {
    let path = ctx.out_dir.join("demo_report.json");
    write_json_artifact(&path, &report)?;
    println!(
        "{}",
        serde_json::to_string(&report).map_err(|e| CliError::io(e.to_string()))?
    );
    log::info!(
        "witness fidelity {:.6}, certified dimension {}",
        report.witness_fidelity,
        report.witnessed_dimension
    );
    Ok(())
}
