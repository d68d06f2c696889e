//! JSON-lines report records. Every line is one object whose `record` field
//! names its kind; the schemas are listed in `docs/reports.md`.

use std::io::Write;

use mdh_core::diagnostics::Checkpoint;
use mdh_core::model::SelectionSummary;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct FitRecord {
    pub n: u64,
    pub dim: usize,
    pub depth: u32,
    pub nodes: usize,
    pub leaves: usize,
    pub degenerate_steps: u64,
    pub shuffle_seed: Option<u64>,
    pub model: String,
}

#[derive(Debug, Serialize)]
pub struct Pick {
    pub kmax: usize,
    pub k: usize,
}

#[derive(Debug, Serialize)]
pub struct SelectionRecord {
    pub method: String,
    pub k: usize,
    pub clusters: Vec<usize>,
    pub ss_curve: Vec<f64>,
    pub pruned_order: Vec<usize>,
    pub picks: Vec<Pick>,
    pub degenerate_kmax: usize,
}

impl SelectionRecord {
    pub fn new(summary: &SelectionSummary, clusters: &[usize]) -> Self {
        let (picks, degenerate_kmax) = match &summary.selection {
            Some(sel) => (
                sel.picks.iter().map(|&(kmax, k)| Pick { kmax, k }).collect(),
                sel.degenerate,
            ),
            None => (Vec::new(), 0),
        };
        Self {
            method: summary.method.clone(),
            k: summary.k,
            clusters: clusters.to_vec(),
            ss_curve: summary.ss_curve.clone(),
            pruned_order: summary.pruned_order.clone(),
            picks,
            degenerate_kmax,
        }
    }
}

#[derive(Debug, Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    Fit(FitRecord),
    Selection(SelectionRecord),
    Warning {
        message: String,
    },
    Eval {
        n: usize,
        k_pred: usize,
        k_truth: usize,
        nmi: f64,
        ari: f64,
    },
    Checkpoint(Checkpoint),
    Summary {
        steps: u64,
        checkpoints: usize,
        final_v: Vec<f64>,
        final_b: f64,
        final_b_raw: f64,
        final_sigma_hat: f64,
        final_grad_v_tangent_norm: f64,
        final_grad_b_abs: f64,
    },
}

pub fn emit<W: Write + ?Sized>(out: &mut W, record: &Record) -> Result<(), CliError> {
    serde_json::to_writer(&mut *out, record)?;
    out.write_all(b"\n")?;
    Ok(())
}
