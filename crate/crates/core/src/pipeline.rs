//! End-to-end beam prediction: codebook synthesis, pattern sweep and peak search.

use serde::{Deserialize, Serialize};

use crate::aperture::{coding_matrix, ApertureSpec, CodingMatrix, Direction};
use crate::error::Result;
use crate::farfield::{beam_metrics_toward, pattern_cut, BeamMetrics, PatternCut};
use crate::refdata::{compare_predictions, load_reference, DeviationReport, ReferenceMode, TableId};

/// Sweep used for peak prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
    pub refine: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            start_deg: -90.0,
            stop_deg: 90.0,
            step_deg: 0.25,
            refine: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub coding: CodingMatrix,
    pub cut: PatternCut,
    pub metrics: BeamMetrics,
}

/// Codes the aperture for `incident -> target` and locates the reflected beam.
/// Equal lobes resolve toward the target.
pub fn predict_peak(
    spec: &ApertureSpec,
    incident_scan_deg: f64,
    target_scan_deg: f64,
    sweep: &SweepConfig,
) -> Result<Prediction> {
    let incident = Direction::from_scan(incident_scan_deg)?;
    let target = Direction::from_scan(target_scan_deg)?;
    let coding = coding_matrix(spec, incident, target)?;
    let cut = pattern_cut(spec, &coding, incident, sweep.start_deg, sweep.stop_deg, sweep.step_deg)?;
    let metrics = beam_metrics_toward(&cut, sweep.refine, target_scan_deg)?;
    Ok(Prediction {
        coding,
        cut,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableValidation {
    pub table: TableId,
    pub simulated: DeviationReport,
    pub measured: DeviationReport,
}

/// Predicts every row of a bundled table and scores it against both reference columns.
pub fn validate_table(
    spec: &ApertureSpec,
    table: TableId,
    sweep: &SweepConfig,
) -> Result<TableValidation> {
    let entries = load_reference(table)?;
    let peaks = entries
        .iter()
        .map(|e| {
            predict_peak(spec, e.incident_scan_deg, e.target_scan_deg, sweep)
                .map(|p| p.metrics.peak_angle_deg)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(TableValidation {
        table,
        simulated: compare_predictions(&entries, &peaks, ReferenceMode::Simulated)?,
        measured: compare_predictions(&entries, &peaks, ReferenceMode::Measured)?,
    })
}
