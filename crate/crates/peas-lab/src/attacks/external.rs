//! File protocol for plugging in attacks this crate does not implement.
//!
//! Per job: a work directory receives the start image (raw tensor file,
//! label included) plus a JSON sidecar with the budget; the configured
//! command runs with the job directory as its final argument and must write
//! `adversarial.img` in the same format. Budget invariants are re-validated
//! on ingestion and violations rejected.

use super::{AttackResult, AttackSpec};
use crate::data::{read_raw_tensor_file, write_raw_tensor_file};
use crate::error::{Error, Result};
use crate::tensor::{ImageTensor, LabeledSample};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

static JOB_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalAttackConfig {
    /// Command and fixed arguments; the job directory is appended.
    pub command: Vec<String>,
    /// Parent directory for per-job work directories.
    pub work_dir: PathBuf,
}

#[derive(Serialize)]
struct JobSidecar<'a> {
    input: &'a str,
    output: &'a str,
    label: usize,
    epsilon: f32,
    steps: usize,
    step_size: f32,
    seed: u64,
}

pub fn attack_external(
    config: &ExternalAttackConfig,
    start: &ImageTensor,
    y: usize,
    spec: &AttackSpec,
) -> Result<AttackResult> {
    if config.command.is_empty() {
        return Err(Error::ExternalAttack("empty command".to_string()));
    }
    start.expect_displayable("external attack start")?;

    let job_id = JOB_COUNTER.fetch_add(1, Ordering::Relaxed);
    let job_dir = config.work_dir.join(format!("job-{:08x}-{job_id}", spec.seed));
    std::fs::create_dir_all(&job_dir)?;

    let input_path = job_dir.join("input.img");
    write_raw_tensor_file(&input_path, &LabeledSample::new(start.clone(), y))?;
    let sidecar = JobSidecar {
        input: "input.img",
        output: "adversarial.img",
        label: y,
        epsilon: spec.epsilon,
        steps: spec.steps,
        step_size: spec.step_size,
        seed: spec.seed,
    };
    std::fs::write(job_dir.join("spec.json"), serde_json::to_string_pretty(&sidecar)?)?;

    let output = Command::new(&config.command[0])
        .args(&config.command[1..])
        .arg(&job_dir)
        .output()
        .map_err(|e| Error::ExternalAttack(format!("failed to spawn {:?}: {e}", config.command[0])))?;
    if !output.status.success() {
        return Err(Error::ExternalAttack(format!(
            "command exited with {}: {}",
            output.status,
            String::from_utf8_lossy(&output.stderr).trim()
        )));
    }

    let produced = read_raw_tensor_file(&job_dir.join("adversarial.img"))?;
    if produced.image.shape() != start.shape() {
        return Err(Error::shape(
            "external attack output",
            format!("{:?}", start.shape()),
            format!("{:?}", produced.image.shape()),
        ));
    }
    let result = AttackResult {
        adversarial: produced.image,
        queries_used: 0,
        success_on_source: false,
    };
    result.validate_budget(start, spec.epsilon)?;
    Ok(result)
}
