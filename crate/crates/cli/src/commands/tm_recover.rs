//! `topdown tm-recover`: generate (or load) a speckle dataset, recover the
//! hidden mixer by gradient descent, and write the report and estimate.

use serde::Serialize;
use std::path::Path;
use topdown::linalg::{dft_matrix, sample_haar_unitary, RngSeed};
use topdown::matio;
use topdown::recovery::{
    generate_dataset, recover_u1, RecoveryError, RecoveryReport, SpeckleDataset,
};

use crate::artifact::{write_json_artifact, ArtifactHeader};
use crate::config::TmRecoverConfig;
use crate::{CliError, Context};

#[derive(Serialize)]
struct Report<'a> {
    header: &'a ArtifactHeader,
    n: usize,
    records: usize,
    noise: f64,
    diverged: bool,
    #[serde(flatten)]
    recovery: &'a RecoveryReport,
    estimate_path: String,
}

fn build_dataset(
    cfg: &TmRecoverConfig,
    base: RngSeed,
) -> Result<SpeckleDataset, CliError> {
    if let Some(path) = &cfg.dataset_path {
        return SpeckleDataset::load(Path::new(path)).map_err(CliError::from_setup);
    }
    let n = cfg.n.ok_or_else(|| {
        CliError::config("tm-recover needs either dataset_path or generator size n")
    })?;
    if n == 0 {
        return Err(CliError::config("n must be ≥ 1"));
    }
    let counts = cfg.counts.unwrap_or((n * n, n * n, 2 * n * n));
    let u1 = sample_haar_unitary(n, base.mix(&[10])).map_err(CliError::from_setup)?;
    let u2 = match cfg.u2_kind.as_str() {
        "dft" => dft_matrix(n).map_err(CliError::from_setup)?,
        "haar" => sample_haar_unitary(n, base.mix(&[11])).map_err(CliError::from_setup)?,
        other => {
            return Err(CliError::config(format!(
                "u2_kind must be dft or haar, got {other:?}"
            )))
        }
    };
    let mut data = generate_dataset(&u1, &u2, counts, base.mix(&[12]), cfg.noise)
        .map_err(CliError::from_setup)?;
    data.set_u2_kind(cfg.u2_kind.clone());
    Ok(data)
}

pub fn run(ctx: Context) -> Result<(), CliError> {
    let cfg: &TmRecoverConfig = ctx
        .config
        .tm_recover
        .as_ref()
        .ok_or_else(|| CliError::config("config has no \"tm-recover\" section"))?;
    let data = build_dataset(cfg, ctx.base_seed)?;
    log::info!(
        "recovering a {0}x{0} mixer from {1} intensity records",
        data.dim(),
        data.len()
    );
    if cfg.save_dataset {
        let dir = ctx.out_dir.join("dataset");
        data.save(&dir).map_err(CliError::from_run)?;
        log::info!("dataset saved to {}", dir.display());
    }

    let (estimate, recovery, diverged) = match recover_u1(&data, &cfg.recovery) {
        Ok((estimate, report)) => (estimate, report, false),
        Err(RecoveryError::Diverged { best, .. }) => {
            log::warn!("optimization diverged; writing best iterate");
            (best.0, best.1, true)
        }
        Err(RecoveryError::Other(e)) => return Err(CliError::from_setup(e)),
    };

    let estimate_path = ctx.out_dir.join("u1_recovered.cmat");
    {
        let mut bytes = Vec::new();
        matio::write_matrix(&mut bytes, &estimate).map_err(CliError::from_run)?;
        crate::artifact::write_atomic(&estimate_path, &bytes)?;
    }
    let report = Report {
        header: &ctx.header,
        n: data.dim(),
        records: data.len(),
        noise: data.noise(),
        diverged,
        recovery: &recovery,
        estimate_path: estimate_path.display().to_string(),
    };
    write_json_artifact(&ctx.out_dir.join("recovery_report.json"), &report)?;
    println!(
        "{}",
        serde_json::to_string(&report).map_err(|e| CliError::io(e.to_string()))?
    );
    log::info!(
        "holdout R² {:.6}, unitary fidelity {:?}, {} epochs",
        recovery.holdout_intensity_r2,
        recovery.unitary_fidelity,
        recovery.iterations
    );
    if diverged {
        return Err(CliError::optimization(
            "optimization diverged; best iterate written",
        ));
    }
    Ok(())
}
