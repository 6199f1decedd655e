//! `topdown synthesize`: build the circuit, run wavefront matching, write
//! the solved circuit JSON, and report fidelity/success probability.

use serde::Serialize;
use topdown::circuit::{CircuitSpec, MixerKind};
use topdown::gates::build_gate;
use topdown::sweep::PortPolicy;

use crate::artifact::{write_json_artifact, ArtifactHeader};
use crate::config::{resolve_gate, SynthesizeConfig};
use crate::{CliError, Context};

#[derive(Serialize)]
struct CircuitArtifact<'a> {
    header: &'a ArtifactHeader,
    #[serde(flatten)]
    circuit: &'a CircuitSpec,
}

#[derive(Serialize)]
struct Summary<'a> {
    header: &'a ArtifactHeader,
    n: usize,
    d: usize,
    #[serde(rename = "L")]
    depth: usize,
    gate: String,
    fidelity: f64,
    success_probability: f64,
    trace_overlap: f64,
    sweeps_used: usize,
    circuit_path: String,
}

pub fn run(ctx: Context) -> Result<(), CliError> {
    let synth: &SynthesizeConfig = ctx
        .config
        .synthesize
        .as_ref()
        .ok_or_else(|| CliError::config("config has no \"synthesize\" section"))?;
    if synth.d > synth.n || synth.d == 0 {
        return Err(CliError::config(format!(
            "need 1 ≤ d ≤ n, got d={} n={}",
            synth.d, synth.n
        )));
    }
    let base = ctx.base_seed;
    let gate_kind = resolve_gate(&synth.gate, base)?;
    let target = build_gate(gate_kind, synth.d).map_err(CliError::from_setup)?;

    let ports = |tag: u64| -> Result<Vec<usize>, CliError> {
        match synth.port_policy {
            PortPolicy::Random => topdown::circuit::random_ports(synth.n, synth.d, base.mix(&[tag]))
                .map(|p| p.indices().to_vec())
                .map_err(CliError::from_setup),
            PortPolicy::FirstD => Ok((0..synth.d).collect()),
        }
    };
    let input_ports = match &synth.input_ports {
        Some(list) => list.clone(),
        None => ports(2)?,
    };
    let output_ports = match &synth.output_ports {
        Some(list) => list.clone(),
        None => ports(3)?,
    };

    let mixer_seed = match synth.mixer_kind {
        MixerKind::HaarShared | MixerKind::HaarPerLayer => Some(base.mix(&[1])),
        _ => None,
    };
    let mut spec = CircuitSpec {
        n: synth.n,
        depth: synth.depth,
        mixer_kind: synth.mixer_kind.clone(),
        mixer_seed,
        trailing_mixer: synth.trailing_mixer,
        input_ports,
        output_ports,
        phases: vec![],
    };
    let circuit = spec.build().map_err(CliError::from_setup)?;

    log::info!(
        "synthesizing {} gate: d={} n={} L={}",
        gate_kind,
        synth.d,
        synth.n,
        synth.depth
    );
    let (solved, report) =
        topdown::wfm::run_wfm(&circuit, &target, &synth.wfm).map_err(CliError::from_run)?;
    spec.phases = solved
        .planes()
        .iter()
        .map(|p| p.phases().to_vec())
        .collect();

    let circuit_path = ctx.out_dir.join("circuit.json");
    write_json_artifact(
        &circuit_path,
        &CircuitArtifact {
            header: &ctx.header,
            circuit: &spec,
        },
    )?;

    let summary = Summary {
        header: &ctx.header,
        n: synth.n,
        d: synth.d,
        depth: synth.depth,
        gate: gate_kind.to_string(),
        fidelity: report.final_fidelity,
        success_probability: report.final_success_probability,
        trace_overlap: report.final_trace_overlap,
        sweeps_used: report.sweeps_used,
        circuit_path: circuit_path.display().to_string(),
    };
    println!(
        "{}",
        serde_json::to_string(&summary).map_err(|e| CliError::io(e.to_string()))?
    );
    log::info!(
        "fidelity {:.6}, success probability {:.6}, {} sweeps",
        report.final_fidelity,
        report.final_success_probability,
        report.sweeps_used
    );

    if let Some(target_fidelity) = synth.wfm.fidelity_target {
        if report.final_fidelity < target_fidelity {
            return Err(CliError::target_not_met(format!(
                "fidelity {:.6} below target {target_fidelity}",
                report.final_fidelity
            )));
        }
    }
    Ok(())
}
