//! Per-epoch metrics CSV and JSON evaluation reports.

use serde::{Deserialize, Serialize};

use qigl_core::training::EpochRecord;

pub const CSV_HEADER: &str = "epoch,L_D,L_G,frechet,wall_seconds";

/// `# config_hash=<hash>` followed by the column header.
pub fn csv_preamble(config_hash: &str) -> String {
    format!("# config_hash={config_hash}\n{CSV_HEADER}\n")
}

/// Row for the untrained model: losses are not defined yet.
pub fn csv_initial_row(initial_frechet: f64) -> String {
    format!("0,,,{initial_frechet},0\n")
}

pub fn csv_row(record: &EpochRecord, wall_seconds: f64) -> String {
    format!(
        "{},{},{},{},{}\n",
        record.epoch, record.critic_loss, record.generator_loss, record.frechet, wall_seconds
    )
}

/// The data rows of `text` whose epoch is at most `epoch`.
pub fn csv_rows_through(text: &str, epoch: u64) -> String {
    let mut out = String::new();
    for line in text.lines() {
        let row_epoch = line.split(',').next().and_then(|e| e.parse::<u64>().ok());
        if row_epoch.is_some_and(|e| e <= epoch) {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Non-comparability disclaimer; always the first field.
    pub note: String,
    pub frechet: f64,
    pub n_samples: usize,
    pub space: String,
    pub seed: u64,
    pub checkpoint_epoch: u64,
    pub config_hash: String,
    /// Real-vs-real distance between the two halves of the real features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_half_baseline: Option<f64>,
}

impl EvaluationReport {
    pub fn from_core(report: &qigl_core::evaluation::MetricsReport, config_hash: &str) -> Self {
        Self {
            note: report.note.clone(),
            frechet: report.frechet,
            n_samples: report.n_samples,
            space: report.space.as_str().into(),
            seed: report.seed,
            checkpoint_epoch: report.checkpoint_epoch,
            config_hash: config_hash.into(),
            split_half_baseline: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
