//! Bundled beam-steering tables of the 10 x 10 prototype and the scoring of
//! predicted beam directions against them.
//!
//! Angles are signed x-z scan angles; a tabulated `(0, X)` tuple becomes `X`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const T1_JSON: &str = include_str!("../data/t1.json");
const T2_JSON: &str = include_str!("../data/t2.json");
const T3_JSON: &str = include_str!("../data/t3.json");
const PROTOTYPE_JSON: &str = include_str!("../data/prototype.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableId {
    T1,
    T2,
    T3,
}

impl TableId {
    pub const ALL: [TableId; 3] = [TableId::T1, TableId::T2, TableId::T3];

    pub fn as_str(self) -> &'static str {
        match self {
            TableId::T1 => "T1",
            TableId::T2 => "T2",
            TableId::T3 => "T3",
        }
    }

    fn source(self) -> &'static str {
        match self {
            TableId::T1 => T1_JSON,
            TableId::T2 => T2_JSON,
            TableId::T3 => T3_JSON,
        }
    }
}

impl std::fmt::Display for TableId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "T1" | "1" => Ok(TableId::T1),
            "T2" | "2" => Ok(TableId::T2),
            "T3" | "3" => Ok(TableId::T3),
            other => Err(Error::domain(
                "table id",
                format!("unknown table `{other}` (expected T1, T2 or T3)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceEntry {
    pub table_id: TableId,
    pub incident_scan_deg: f64,
    pub target_scan_deg: f64,
    pub simulated_gain_dbi: f64,
    pub measured_scan_deg: f64,
    pub measured_s21_db: f64,
}

/// On-disk table schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableFile {
    pub table: TableId,
    pub incident_scan_deg: f64,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub target_deg: f64,
    pub sim_gain_dbi: f64,
    pub meas_deg: f64,
    pub meas_s21_db: f64,
}

impl TableFile {
    pub fn entries(&self) -> Result<Vec<ReferenceEntry>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                for (name, v) in [
                    ("incident", self.incident_scan_deg),
                    ("target", r.target_deg),
                    ("measured", r.meas_deg),
                ] {
                    if !(v > -90.0 && v < 90.0) {
                        return Err(Error::invalid(
                            format!("{} row {} {name} angle", self.table, i + 1),
                            format!("must lie in (-90, 90), got {v}"),
                        ));
                    }
                }
                Ok(ReferenceEntry {
                    table_id: self.table,
                    incident_scan_deg: self.incident_scan_deg,
                    target_scan_deg: r.target_deg,
                    simulated_gain_dbi: r.sim_gain_dbi,
                    measured_scan_deg: r.meas_deg,
                    measured_s21_db: r.meas_s21_db,
                })
            })
            .collect()
    }

    pub fn from_entries(table: TableId, entries: &[ReferenceEntry]) -> Result<Self> {
        let incident = entries.first().map_or(0.0, |e| e.incident_scan_deg);
        if entries
            .iter()
            .any(|e| e.table_id != table || e.incident_scan_deg != incident)
        {
            return Err(Error::invalid(
                "entries",
                "all entries must share one table and incidence",
            ));
        }
        Ok(TableFile {
            table,
            incident_scan_deg: incident,
            rows: entries
                .iter()
                .map(|e| TableRow {
                    target_deg: e.target_scan_deg,
                    sim_gain_dbi: e.simulated_gain_dbi,
                    meas_deg: e.measured_scan_deg,
                    meas_s21_db: e.measured_s21_db,
                })
                .collect(),
        })
    }
}

pub fn load_table_file(table_id: TableId) -> Result<TableFile> {
    let file: TableFile = serde_json::from_str(table_id.source())?;
    if file.table != table_id {
        return Err(Error::invalid(
            "bundled table",
            format!("{table_id} file is labelled {}", file.table),
        ));
    }
    Ok(file)
}

/// Rows of a bundled table, in printed order.
pub fn load_reference(table_id: TableId) -> Result<Vec<ReferenceEntry>> {
    load_table_file(table_id)?.entries()
}

pub fn load_reference_by_name(name: &str) -> Result<Vec<ReferenceEntry>> {
    load_reference(name.parse()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReferenceMode {
    #[default]
    Simulated,
    Measured,
}

impl ReferenceMode {
    fn angle(self, e: &ReferenceEntry) -> f64 {
        match self {
            ReferenceMode::Simulated => e.target_scan_deg,
            ReferenceMode::Measured => e.measured_scan_deg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub reference_deg: f64,
    pub predicted_deg: f64,
    pub deviation_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub reference: ReferenceMode,
    pub per_entry: Vec<Deviation>,
    pub mean_abs_deviation: f64,
    pub max_abs_deviation: f64,
}

impl DeviationReport {
    /// Aligned-column table, one line per entry plus the aggregate line.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:>10} {:>12} {:>12}\n",
            "ref_deg", "predicted", "deviation"
        );
        for d in &self.per_entry {
            out.push_str(&format!(
                "{:>10.2} {:>12.3} {:>+12.3}\n",
                d.reference_deg, d.predicted_deg, d.deviation_deg
            ));
        }
        out.push_str(&format!(
            "mean |dev| = {:.3} deg, max |dev| = {:.3} deg\n",
            self.mean_abs_deviation, self.max_abs_deviation
        ));
        out
    }
}

/// `predicted - reference` per entry with mean and max of the absolute values.
pub fn compare_predictions(
    entries: &[ReferenceEntry],
    predicted_peaks: &[f64],
    reference: ReferenceMode,
) -> Result<DeviationReport> {
    if entries.len() != predicted_peaks.len() {
        return Err(Error::domain(
            "predictions",
            format!(
                "{} predictions for {} reference entries",
                predicted_peaks.len(),
                entries.len()
            ),
        ));
    }
    let per_entry: Vec<Deviation> = entries
        .iter()
        .zip(predicted_peaks)
        .map(|(e, &p)| {
            let r = reference.angle(e);
            Deviation {
                reference_deg: r,
                predicted_deg: p,
                deviation_deg: p - r,
            }
        })
        .collect();
    let n = per_entry.len().max(1) as f64;
    let mean_abs_deviation = per_entry.iter().map(|d| d.deviation_deg.abs()).sum::<f64>() / n;
    let max_abs_deviation = per_entry
        .iter()
        .map(|d| d.deviation_deg.abs())
        .fold(0.0, f64::max);
    Ok(DeviationReport {
        reference,
        per_entry,
        mean_abs_deviation,
        max_abs_deviation,
    })
}

/// Improvement of a device over a baseline reflector, in dB.
pub fn gain_improvement(s21_device_db: f64, s21_baseline_db: f64) -> f64 {
    s21_device_db - s21_baseline_db
}

/// Prototype constants: geometry, unit-cell response and the copper-plate comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeMetadata {
    pub frequency_ghz: f64,
    pub band_ghz: [f64; 2],
    pub array: ArrayMetadata,
    pub stack: StackMetadata,
    pub unit_cell: UnitCellMetadata,
    pub copper_plate_s21_db: f64,
    pub ris_s21_db: f64,
    pub f_over_d: f64,
    pub measurement_sweep_deg: [f64; 3],
    pub coding_figure_panels: Vec<String>,
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayMetadata {
    pub m: usize,
    pub n: usize,
    pub cell_mm: f64,
    pub aperture_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackMetadata {
    pub h1_mm: f64,
    pub h2_mm: f64,
    pub h_air_mm: f64,
    pub h_air_sweep_mm: [f64; 2],
    pub eps_sub: f64,
    pub tan_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitCellMetadata {
    pub on_s11_db: f64,
    pub off_s11_db: f64,
    pub phase_range_deg: f64,
    pub patch_radius_mm: f64,
    pub slot_radius_mm: f64,
    pub ground_gap_mm: f64,
    pub ground_slot_width_mm: f64,
    pub ground_slot_length_mm: f64,
}

pub fn prototype_metadata() -> Result<PrototypeMetadata> {
    Ok(serde_json::from_str(PROTOTYPE_JSON)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows_as_printed() {
        let t1 = load_reference(TableId::T1).unwrap();
        assert_eq!(t1.len(), 6);
        assert_eq!(
            (t1[0].target_scan_deg, t1[0].simulated_gain_dbi, t1[0].measured_scan_deg, t1[0].measured_s21_db),
            (0.0, 10.2, 4.0, -45.2)
        );
        let t2 = load_reference(TableId::T2).unwrap();
        assert_eq!(t2.len(), 5);
        assert_eq!(t2[4].incident_scan_deg, 30.0);
        assert_eq!(
            (t2[4].target_scan_deg, t2[4].simulated_gain_dbi, t2[4].measured_scan_deg, t2[4].measured_s21_db),
            (-30.0, 9.5, -33.0, -46.3)
        );
        let t3 = load_reference(TableId::T3).unwrap();
        assert_eq!(t3[2].incident_scan_deg, -30.0);
        assert_eq!(
            (t3[2].target_scan_deg, t3[2].simulated_gain_dbi, t3[2].measured_scan_deg, t3[2].measured_s21_db),
            (26.0, 9.4, 25.0, -45.8)
        );
    }

    #[test]
    fn unknown_table() {
        assert!(load_reference_by_name("T4").is_err());
        assert_eq!(load_reference_by_name("t2").unwrap().len(), 5);
    }

    #[test]
    fn deviation_arithmetic() {
        let t1 = load_reference(TableId::T1).unwrap();
        let exact: Vec<f64> = t1.iter().map(|e| e.target_scan_deg).collect();
        let r = compare_predictions(&t1, &exact, ReferenceMode::Simulated).unwrap();
        assert_eq!((r.mean_abs_deviation, r.max_abs_deviation), (0.0, 0.0));

        let two = &t1[..2];
        let r = compare_predictions(two, &[3.0, -22.0], ReferenceMode::Simulated).unwrap();
        assert_eq!(r.per_entry[0].deviation_deg, 3.0);
        assert_eq!(r.per_entry[1].deviation_deg, -5.0);
        assert_eq!((r.mean_abs_deviation, r.max_abs_deviation), (4.0, 5.0));

        assert!(compare_predictions(&t1, &[0.0], ReferenceMode::Simulated).is_err());
    }

    #[test]
    fn tabulated_measured_versus_simulated() {
        let t1 = load_reference(TableId::T1).unwrap();
        let measured: Vec<f64> = t1.iter().map(|e| e.measured_scan_deg).collect();
        let r = compare_predictions(&t1, &measured, ReferenceMode::Simulated).unwrap();
        let abs: Vec<f64> = r.per_entry.iter().map(|d| d.deviation_deg.abs()).collect();
        assert_eq!(abs, vec![4.0, 7.0, 4.0, 4.0, 1.0, 3.0]);
        assert!((r.mean_abs_deviation - 23.0 / 6.0).abs() < 1e-12);
        assert!((r.mean_abs_deviation - 3.83).abs() < 5e-3);
        assert!(r.to_text().contains("mean |dev| = 3.833"));
    }

    #[test]
    fn copper_plate_improvement() {
        let meta = prototype_metadata().unwrap();
        assert_eq!(gain_improvement(meta.ris_s21_db, meta.copper_plate_s21_db), -45.2 - (-54.2));
        assert!((gain_improvement(-45.2, -54.2) - 9.0).abs() < 1e-12);
        assert_eq!(gain_improvement(-50.0, -50.0), 0.0);
        assert_eq!(gain_improvement(-45.2, -54.2), -gain_improvement(-54.2, -45.2));
    }

    #[test]
    fn table_files_round_trip() {
        for id in TableId::ALL {
            let entries = load_reference(id).unwrap();
            let json = serde_json::to_string(&TableFile::from_entries(id, &entries).unwrap()).unwrap();
            let back: TableFile = serde_json::from_str(&json).unwrap();
            assert_eq!(back.entries().unwrap(), entries);
        }
    }

    #[test]
    fn printed_decimals_survive() {
        // Printed strings from the three tables, parsed and re-rendered.
        let t1 = load_reference(TableId::T1).unwrap();
        let printed = ["10.2", "9.9", "9.6", "9.5", "9.48", "9.41"];
        for (e, p) in t1.iter().zip(printed) {
            assert_eq!(e.simulated_gain_dbi, p.parse::<f64>().unwrap());
            assert_eq!(format!("{}", e.simulated_gain_dbi), p);
        }
        let s21: Vec<String> = t1.iter().map(|e| format!("{:.1}", e.measured_s21_db)).collect();
        assert_eq!(s21, ["-45.2", "-49.0", "-55.3", "-55.5", "-58.3", "-58.5"]);
    }
}
