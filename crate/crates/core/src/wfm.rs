//! Wavefront matching: iteratively set each phase plane to align the
//! forward-propagated inputs with the backward-propagated targets.
//!
//! At plane p the device splits as `T = B_p P_p F_p`; the plane update
//! `θ_p(q) = arg(Σ_a φ_{a,(p)}(q) · ψ*_{a,(p)}(q))` maximizes
//! `Re Σ_a ⟨φ_{a,(p)}|P_p|ψ_{a,(p)}⟩ = Σ_q |c_p(q)|` over all diagonal
//! phase-only planes, so the overlap objective never decreases. One sweep
//! visits planes 1→L and then L→1, with every update seeing the latest
//! phases of all other planes.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::circuit::LayeredCircuit;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, PhasePlane, RngSeed, Unitary};
use crate::metrics::{pure_fidelity, success_probability};

/// Phase-plane initialization policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseInit {
    /// All phases zero.
    Zero,
    /// Seeded uniform phases in (−π, π], for local-optimum studies.
    Random(RngSeed),
}

impl Default for PhaseInit {
    fn default() -> Self {
        PhaseInit::Zero
    }
}

/// Stopping rules for the sweep loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WfmConfig {
    /// One sweep = planes 1→L then L→1.
    pub max_sweeps: usize,
    /// Stop when the absolute fidelity gain over a full sweep drops below this.
    pub convergence_tol: f64,
    /// Stop early once the fidelity reaches this value.
    pub fidelity_target: Option<f64>,
    pub init: PhaseInit,
}

impl Default for WfmConfig {
    fn default() -> Self {
        WfmConfig {
            max_sweeps: 100,
            convergence_tol: 1e-6,
            fidelity_target: None,
            init: PhaseInit::Zero,
        }
    }
}

impl WfmConfig {
    fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfiguration("max_sweeps must be ≥ 1".into()));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::InvalidConfiguration(
                "convergence_tol must be ≥ 0".into(),
            ));
        }
        if let Some(t) = self.fidelity_target {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidConfiguration(format!(
                    "fidelity_target {t} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of a synthesis run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WfmReport {
    pub sweeps_used: usize,
    /// Fidelity before any update, then after each half-sweep.
    pub fidelity_history: Vec<f64>,
    pub final_fidelity: f64,
    pub final_success_probability: f64,
    /// The matching-trace surrogate `|Tr(T†T̃)|/d`, recorded for comparison
    /// with the fidelity used by the stopping rule.
    pub final_trace_overlap: f64,
}

/// Forward section applied to a stack of input fields:
/// `F_p = U_p P_{p-1} U_{p-1} … P_1 U_1` for a 1-based plane index p.
pub fn forward_stack_at(c: &LayeredCircuit, inputs: &CMatrix, p: usize) -> Result<CMatrix> {
    check_plane_index(c, p)?;
    let mut x = inputs.clone();
    for j in 1..=p {
        x = c.mixers()[j - 1].matrix() * x;
        if j < p {
            c.planes()[j - 1].scale_rows(&mut x);
        }
    }
    Ok(x)
}

/// Adjoint of the downstream section applied to a stack of output fields:
/// `B_p† = U_{p+1}† P_{p+1}† … U_{L+1}†`.
pub fn backward_stack_at(c: &LayeredCircuit, outputs: &CMatrix, p: usize) -> Result<CMatrix> {
    check_plane_index(c, p)?;
    let depth = c.depth();
    let mut y = outputs.clone();
    for j in (p..=depth).rev() {
        y = c.mixers()[j].matrix().ad_mul(&y);
        if j > p {
            c.planes()[j - 1].scale_rows_conj(&mut y);
        }
    }
    Ok(y)
}

/// Input mode a propagated onto plane p (`|ψ_{a,(p)}⟩ = F_p|ψ_a⟩`).
pub fn forward_field(c: &LayeredCircuit, a: usize, p: usize) -> Result<CVector> {
    let d = c.logical_dim();
    if a >= d {
        return Err(Error::IndexOutOfRange(format!("input mode {a} of {d}")));
    }
    let col = CMatrix::from_fn(c.ambient_dim(), 1, |i, _| c.input_ports().modes()[a][i]);
    Ok(forward_stack_at(c, &col, p)?.column(0).into_owned())
}

/// Output mode a propagated backward onto plane p (`|φ_{a,(p)}⟩ = B_p†|φ_a⟩`).
pub fn backward_field(c: &LayeredCircuit, a: usize, p: usize) -> Result<CVector> {
    let d = c.logical_dim();
    if a >= d {
        return Err(Error::IndexOutOfRange(format!("output mode {a} of {d}")));
    }
    let col = CMatrix::from_fn(c.ambient_dim(), 1, |i, _| c.output_ports().modes()[a][i]);
    Ok(backward_stack_at(c, &col, p)?.column(0).into_owned())
}

/// The closed-form plane update from matched field stacks (columns = modes):
/// `θ(q) = arg(Σ_a φ_a(q)·ψ*_a(q))`, keeping the previous phase wherever the
/// overlap amplitude is exactly zero.
pub fn update_plane(
    forward: &CMatrix,
    backward: &CMatrix,
    previous: &PhasePlane,
) -> Result<PhasePlane> {
    if forward.shape() != backward.shape() || forward.nrows() != previous.len() {
        return Err(Error::DimensionMismatch(format!(
            "field stacks {}x{} vs {}x{} with plane length {}",
            forward.nrows(),
            forward.ncols(),
            backward.nrows(),
            backward.ncols(),
            previous.len()
        )));
    }
    let n = forward.nrows();
    let mut phases = Vec::with_capacity(n);
    for q in 0..n {
        let mut c_q = Complex64::new(0.0, 0.0);
        for a in 0..forward.ncols() {
            c_q += backward[(q, a)] * forward[(q, a)].conj();
        }
        if c_q.norm() == 0.0 {
            phases.push(previous.phases()[q]);
        } else {
            phases.push(c_q.arg());
        }
    }
    Ok(PhasePlane::new(phases))
}

/// The objective maximized by [`update_plane`]:
/// `Re Σ_a ⟨φ_a|P|ψ_a⟩ = Σ_q Re(e^{iθ_q}·conj(c_q))`.
pub fn plane_overlap_objective(
    forward: &CMatrix,
    backward: &CMatrix,
    plane: &PhasePlane,
) -> f64 {
    let mut total = 0.0;
    for q in 0..forward.nrows() {
        let mut c_q = Complex64::new(0.0, 0.0);
        for a in 0..forward.ncols() {
            c_q += backward[(q, a)] * forward[(q, a)].conj();
        }
        total += (Complex64::from_polar(1.0, plane.phases()[q]) * c_q.conj()).re;
    }
    total
}

/// Recompute the update for plane p of a circuit against a target gate, with
/// all fields using the circuit's current phases.
pub fn update_plane_at(
    c: &LayeredCircuit,
    target: &Unitary,
    p: usize,
) -> Result<PhasePlane> {
    check_target(c, target)?;
    let fwd = forward_stack_at(c, &c.input_ports().mode_stack(), p)?;
    let outputs = c.output_ports().mode_stack() * target.matrix();
    let bwd = backward_stack_at(c, &outputs, p)?;
    update_plane(&fwd, &bwd, &c.planes()[p - 1])
}

fn check_plane_index(c: &LayeredCircuit, p: usize) -> Result<()> {
    if p == 0 || p > c.depth() {
        return Err(Error::IndexOutOfRange(format!(
            "plane {p} of a depth-{} circuit",
            c.depth()
        )));
    }
    Ok(())
}

fn check_target(c: &LayeredCircuit, target: &Unitary) -> Result<()> {
    if target.dim() != c.logical_dim() {
        return Err(Error::InvalidConfiguration(format!(
            "target of dimension {} for a circuit with {} ports",
            target.dim(),
            c.logical_dim()
        )));
    }
    Ok(())
}

struct Evaluation {
    fidelity: f64,
    success: f64,
    trace_overlap: f64,
}

fn evaluate(c: &LayeredCircuit, target: &Unitary) -> Result<Evaluation> {
    let t_eff = c.effective_transform();
    let fidelity = pure_fidelity(&t_eff, target)?.min(1.0);
    let success = success_probability(&t_eff, target)?;
    let overlap: Complex64 = (0..target.dim())
        .map(|i| t_eff.column(i).dotc(&target.matrix().column(i).into_owned()))
        .sum();
    Ok(Evaluation {
        fidelity,
        success,
        trace_overlap: overlap.norm() / target.dim() as f64,
    })
}

fn initial_planes(n: usize, depth: usize, init: PhaseInit) -> Vec<PhasePlane> {
    match init {
        PhaseInit::Zero => vec![PhasePlane::zeros(n); depth],
        PhaseInit::Random(seed) => (0..depth)
            .map(|p| {
                let mut rng = seed.mix(&[p as u64]).rng();
                PhasePlane::new((0..n).map(|_| rng.random_range(-PI..PI)).collect())
            })
            .collect(),
    }
}

/// Run wavefront matching for `target` on the circuit, returning the solved
/// circuit (mixers untouched, planes replaced) and a report.
///
/// Output spatial targets are the embedded columns of the gate,
/// `|φ_a⟩ = Σ_b T_{ba}|out_b⟩`. The update order per sweep is plane 1→L then
/// L→1; fidelity is recorded after each half-sweep and the loop stops at
/// `max_sweeps`, at `fidelity_target`, or when a full sweep gains less than
/// `convergence_tol`.
pub fn run_wfm(
    c: &LayeredCircuit,
    target: &Unitary,
    cfg: &WfmConfig,
) -> Result<(LayeredCircuit, WfmReport)> {
    cfg.validate()?;
    check_target(c, target)?;

    let n = c.ambient_dim();
    let depth = c.depth();
    let mut circuit = c.with_planes(initial_planes(n, depth, cfg.init))?;

    let psi0 = circuit.input_ports().mode_stack();
    let phi0 = circuit.output_ports().mode_stack() * target.matrix();

    let mut eval = evaluate(&circuit, target)?;
    let mut history = vec![eval.fidelity];
    let mut sweeps_used = 0;
    let target_reached =
        |fid: f64| cfg.fidelity_target.map(|t| fid >= t).unwrap_or(false);

    'sweeps: for _ in 0..cfg.max_sweeps {
        let fid_at_sweep_start = eval.fidelity;
        for half in 0..2 {
            if half == 0 {
                // ascending pass: backward fields precomputed with current
                // phases stay valid because only planes below p change
                let bw = backward_fields_all(&circuit, &phi0);
                let mut x = psi0.clone();
                for p in 1..=depth {
                    x = circuit.mixers()[p - 1].matrix() * x;
                    let plane = update_plane(&x, &bw[p - 1], &circuit.planes()[p - 1])?;
                    circuit.set_plane(p - 1, plane);
                    circuit.planes()[p - 1].scale_rows(&mut x);
                }
            } else {
                // descending pass: forward fields precomputed, planes above p
                // updated incrementally
                let fw = forward_fields_all(&circuit, &psi0);
                let mut y = phi0.clone();
                for p in (1..=depth).rev() {
                    y = circuit.mixers()[p].matrix().ad_mul(&y);
                    let plane = update_plane(&fw[p - 1], &y, &circuit.planes()[p - 1])?;
                    circuit.set_plane(p - 1, plane);
                    circuit.planes()[p - 1].scale_rows_conj(&mut y);
                }
            }
            eval = evaluate(&circuit, target)?;
            history.push(eval.fidelity);
            if target_reached(eval.fidelity) {
                sweeps_used += 1;
                break 'sweeps;
            }
        }
        sweeps_used += 1;
        if (eval.fidelity - fid_at_sweep_start).abs() < cfg.convergence_tol {
            break;
        }
    }

    let report = WfmReport {
        sweeps_used,
        final_fidelity: eval.fidelity,
        final_success_probability: eval.success,
        final_trace_overlap: eval.trace_overlap,
        fidelity_history: history,
    };
    Ok((circuit, report))
}

/// Backward fields at every plane with the circuit's current phases.
fn backward_fields_all(c: &LayeredCircuit, phi0: &CMatrix) -> Vec<CMatrix> {
    let depth = c.depth();
    let mut out = vec![CMatrix::zeros(0, 0); depth];
    let mut y = phi0.clone();
    for p in (1..=depth).rev() {
        y = c.mixers()[p].matrix().ad_mul(&y);
        out[p - 1] = y.clone();
        if p > 1 {
            c.planes()[p - 1].scale_rows_conj(&mut y);
        }
    }
    out
}

/// Forward fields at every plane with the circuit's current phases.
fn forward_fields_all(c: &LayeredCircuit, psi0: &CMatrix) -> Vec<CMatrix> {
    let depth = c.depth();
    let mut out = vec![CMatrix::zeros(0, 0); depth];
    let mut x = psi0.clone();
    for p in 1..=depth {
        x = c.mixers()[p - 1].matrix() * x;
        out[p - 1] = x.clone();
        if p < depth {
            c.planes()[p - 1].scale_rows(&mut x);
        }
    }
    out
}
