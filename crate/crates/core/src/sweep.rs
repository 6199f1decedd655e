//! Grid experiments over (n, d, L), gate families, and mixer kinds: the
//! scalability study behind the fidelity/success-probability trends.
//!
//! Every row derives its seed from the base seed and its grid coordinates
//! (a splitmix64 absorption chain), so any row can be recomputed in
//! isolation and results are independent of worker count.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use crate::circuit::{random_ports, LayeredCircuit, MixerKind, PortEmbedding};
use crate::error::{Error, Result};
use crate::gates::{build_gate, GateKind};
use crate::linalg::{dft_matrix, sample_haar_unitary, PhasePlane, RngSeed, Unitary};
use crate::wfm::{run_wfm, WfmConfig};

/// Gate families for sweep grids; `Random` draws a fresh Haar gate per
/// realization from the row seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateFamily {
    Identity,
    PauliZ,
    PauliX,
    Fourier,
    Random,
}

/// All five families studied in the scalability runs.
pub const ALL_GATE_FAMILIES: [GateFamily; 5] = [
    GateFamily::Identity,
    GateFamily::PauliZ,
    GateFamily::PauliX,
    GateFamily::Fourier,
    GateFamily::Random,
];

impl GateFamily {
    pub fn label(&self) -> &'static str {
        match self {
            GateFamily::Identity => "identity",
            GateFamily::PauliZ => "z",
            GateFamily::PauliX => "x",
            GateFamily::Fourier => "fourier",
            GateFamily::Random => "random",
        }
    }

    fn ordinal(&self) -> u64 {
        match self {
            GateFamily::Identity => 0,
            GateFamily::PauliZ => 1,
            GateFamily::PauliX => 2,
            GateFamily::Fourier => 3,
            GateFamily::Random => 4,
        }
    }

    /// Concrete gate for one realization.
    pub fn concrete(&self, gate_seed: RngSeed) -> GateKind {
        match self {
            GateFamily::Identity => GateKind::Identity,
            GateFamily::PauliZ => GateKind::PauliZ,
            GateFamily::PauliX => GateKind::PauliX,
            GateFamily::Fourier => GateKind::Fourier,
            GateFamily::Random => GateKind::RandomUnitary(gate_seed),
        }
    }
}

impl fmt::Display for GateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for GateFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(GateFamily::Identity),
            "z" => Ok(GateFamily::PauliZ),
            "x" => Ok(GateFamily::PauliX),
            "fourier" => Ok(GateFamily::Fourier),
            "random" => Ok(GateFamily::Random),
            other => Err(Error::InvalidConfiguration(format!(
                "unknown gate family {other:?}"
            ))),
        }
    }
}

impl Serialize for GateFamily {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for GateFamily {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// How port indices are assigned per realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PortPolicy {
    /// Sampled uniformly without replacement from the row seed.
    #[default]
    Random,
    /// The first d ambient modes on both sides.
    FirstD,
}

/// A grid experiment: every (n, d, L) × gate × realization combination.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub n_grid: Vec<usize>,
    pub d_grid: Vec<usize>,
    pub l_grid: Vec<usize>,
    pub gates: Vec<GateFamily>,
    #[serde(default = "default_mixer_kind")]
    pub mixer_kind: MixerKind,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub port_policy: PortPolicy,
    pub base_seed: RngSeed,
    #[serde(default)]
    pub wfm: WfmConfig,
}

fn default_mixer_kind() -> MixerKind {
    MixerKind::HaarShared
}

fn default_realizations() -> usize {
    100
}

/// One completed synthesis run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResultRow {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub gate: GateFamily,
    pub mixer_kind: String,
    pub realization: usize,
    pub seed: RngSeed,
    pub fidelity: f64,
    pub success_probability: f64,
    pub sweeps_used: usize,
    pub wall_time_ms: f64,
}

/// The documented per-row seed: the base seed absorbing
/// (n, d, L, gate ordinal, realization) through splitmix64.
pub fn row_seed(
    base: RngSeed,
    n: usize,
    d: usize,
    l: usize,
    gate: GateFamily,
    realization: usize,
) -> RngSeed {
    base.mix(&[
        n as u64,
        d as u64,
        l as u64,
        gate.ordinal(),
        realization as u64,
    ])
}

/// Synthesize one grid-point realization. The row seed alone determines the
/// mixers, ports, and (for the random family) the target gate.
pub fn run_single(
    spec: &SweepSpec,
    n: usize,
    d: usize,
    l: usize,
    gate: GateFamily,
    realization: usize,
) -> Result<SweepResultRow> {
    let seed = row_seed(spec.base_seed, n, d, l, gate, realization);
    let start = Instant::now();

    let mixer_count = l + 1;
    let mixers: Vec<Unitary> = match &spec.mixer_kind {
        MixerKind::HaarShared => {
            let u = sample_haar_unitary(n, seed.mix(&[1]))?;
            vec![u; mixer_count]
        }
        MixerKind::HaarPerLayer => (0..mixer_count)
            .map(|j| sample_haar_unitary(n, seed.mix(&[1, j as u64])))
            .collect::<Result<_>>()?,
        MixerKind::Dft => vec![dft_matrix(n)?; mixer_count],
        MixerKind::File(path) => {
            let m = crate::matio::load_matrix(path)?;
            vec![Unitary::new(m)?; mixer_count]
        }
    };
    let (input, output) = match spec.port_policy {
        PortPolicy::Random => (
            random_ports(n, d, seed.mix(&[2]))?,
            random_ports(n, d, seed.mix(&[3]))?,
        ),
        PortPolicy::FirstD => {
            let ports: Vec<usize> = (0..d).collect();
            (
                PortEmbedding::canonical(n, ports.clone())?,
                PortEmbedding::canonical(n, ports)?,
            )
        }
    };
    let target = build_gate(gate.concrete(seed.mix(&[4])), d)?;
    let circuit = LayeredCircuit::new(mixers, vec![PhasePlane::zeros(n); l], input, output)?;
    let (_, report) = run_wfm(&circuit, &target, &spec.wfm)?;

    Ok(SweepResultRow {
        n,
        d,
        l,
        gate,
        mixer_kind: spec.mixer_kind.sweep_label(),
        realization,
        seed,
        fidelity: report.final_fidelity,
        success_probability: report.final_success_probability,
        sweeps_used: report.sweeps_used,
        wall_time_ms: start.elapsed().as_secs_f64() * 1000.0,
    })
}

/// Run the whole grid. Rows are computed in parallel but returned in the
/// deterministic nesting order n → d → L → gate → realization; infeasible
/// points (d > n) are skipped with a logged diagnostic.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepResultRow>> {
    if spec.realizations == 0 {
        return Err(Error::InvalidConfiguration(
            "realizations must be ≥ 1".into(),
        ));
    }
    if spec.n_grid.is_empty()
        || spec.d_grid.is_empty()
        || spec.l_grid.is_empty()
        || spec.gates.is_empty()
    {
        return Err(Error::InvalidConfiguration("empty sweep grid".into()));
    }
    if spec.l_grid.contains(&0) {
        return Err(Error::InvalidConfiguration("depth 0 in l_grid".into()));
    }
    let mut tasks = Vec::new();
    for &n in &spec.n_grid {
        for &d in &spec.d_grid {
            if d > n {
                log::warn!("skipping infeasible grid point d={d} > n={n}");
                continue;
            }
            if d == 0 {
                return Err(Error::InvalidConfiguration("d = 0 in grid".into()));
            }
            for &l in &spec.l_grid {
                for &gate in &spec.gates {
                    for r in 0..spec.realizations {
                        tasks.push((n, d, l, gate, r));
                    }
                }
            }
        }
    }
    tasks
        .par_iter()
        .map(|&(n, d, l, gate, r)| run_single(spec, n, d, l, gate, r))
        .collect()
}

/// Per-(grid point × gate) statistics, with the derived scaling columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummaryRow {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub gate: GateFamily,
    pub mixer_kind: String,
    pub count: usize,
    pub f_mean: f64,
    pub f_std: f64,
    pub s_mean: f64,
    pub s_std: f64,
    pub nl_over_d2: f64,
    pub l_over_d: f64,
}

/// Group rows by (n, d, L, gate, mixer) in first-appearance order; means and
/// population standard deviations per group.
pub fn aggregate(rows: &[SweepResultRow]) -> Result<Vec<SweepSummaryRow>> {
    if rows.is_empty() {
        return Err(Error::InvalidConfiguration(
            "cannot aggregate an empty row set".into(),
        ));
    }
    let mut order: Vec<(usize, usize, usize, GateFamily, String)> = Vec::new();
    let mut groups: std::collections::HashMap<
        (usize, usize, usize, GateFamily, String),
        Vec<&SweepResultRow>,
    > = std::collections::HashMap::new();
    for row in rows {
        let key = (row.n, row.d, row.l, row.gate, row.mixer_kind.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(row);
    }
    let stat = |values: &[f64]| -> (f64, f64) {
        let count = values.len() as f64;
        let mean = values.iter().sum::<f64>() / count;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
        (mean, var.sqrt())
    };
    Ok(order
        .into_iter()
        .map(|key| {
            let members = &groups[&key];
            let (f_mean, f_std) =
                stat(&members.iter().map(|r| r.fidelity).collect::<Vec<_>>());
            let (s_mean, s_std) = stat(
                &members
                    .iter()
                    .map(|r| r.success_probability)
                    .collect::<Vec<_>>(),
            );
            let (n, d, l, gate, mixer_kind) = key;
            SweepSummaryRow {
                n,
                d,
                l,
                gate,
                mixer_kind,
                count: members.len(),
                f_mean,
                f_std,
                s_mean,
                s_std,
                nl_over_d2: (n * l) as f64 / (d * d) as f64,
                l_over_d: l as f64 / d as f64,
            }
        })
        .collect())
}

pub const ROWS_CSV_HEADER: &str =
    "n,d,L,gate,mixer_kind,realization,seed,fidelity,success_prob,sweeps_used,wall_time_ms";
pub const SUMMARY_CSV_HEADER: &str =
    "n,d,L,gate,mixer_kind,count,f_mean,f_std,s_mean,s_std,nl_over_d2,l_over_d";

pub fn write_rows_csv<W: Write>(w: &mut W, rows: &[SweepResultRow]) -> Result<()> {
    writeln!(w, "{ROWS_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.d,
            r.l,
            r.gate,
            r.mixer_kind,
            r.realization,
            r.seed,
            r.fidelity,
            r.success_probability,
            r.sweeps_used,
            r.wall_time_ms
        )?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(w: &mut W, rows: &[SweepSummaryRow]) -> Result<()> {
    writeln!(w, "{SUMMARY_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.d,
            r.l,
            r.gate,
            r.mixer_kind,
            r.count,
            r.f_mean,
            r.f_std,
            r.s_mean,
            r.s_std,
            r.nl_over_d2,
            r.l_over_d
        )?;
    }
    Ok(())
}
