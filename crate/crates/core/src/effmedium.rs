//! Effective-medium model of the layered unit cell.
//!
//! The cell is two FR4 substrates (`h1`, `h2`) with an air gap `h_air`
//! between the ground layer and the second substrate. Everything here is a
//! pure function of the stack geometry and supplied field or current samples;
//! no field solution is performed.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::{SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};

/// Substrate and air-gap geometry with material constants.
///
/// Lengths are in millimetres, the frequency in GHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerStack {
    pub h1: f64,
    pub h2: f64,
    pub h_air: f64,
    pub eps_sub: f64,
    pub eps_air: f64,
    pub tan_delta: f64,
    pub f0_ghz: f64,
}

impl LayerStack {
    /// The fabricated prototype: 2 mm and 1.6 mm FR4 with a 0.5 mm air gap at 3.5 GHz.
    pub const PROTOTYPE: LayerStack = LayerStack {
        h1: 2.0,
        h2: 1.6,
        h_air: 0.5,
        eps_sub: 4.4,
        eps_air: 1.0,
        tan_delta: 0.02,
        f0_ghz: 3.5,
    };

    pub fn new(
        h1: f64,
        h2: f64,
        h_air: f64,
        eps_sub: f64,
        eps_air: f64,
        tan_delta: f64,
        f0_ghz: f64,
    ) -> Result<Self> {
        let stack = LayerStack {
            h1,
            h2,
            h_air,
            eps_sub,
            eps_air,
            tan_delta,
            f0_ghz,
        };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, reason: &str, value: f64| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("{reason}, got {value}")))
            }
        };
        check(self.h1.is_finite() && self.h1 > 0.0, "h1", "must be > 0", self.h1)?;
        check(self.h2.is_finite() && self.h2 > 0.0, "h2", "must be > 0", self.h2)?;
        check(
            self.h_air.is_finite() && self.h_air >= 0.0,
            "h_air",
            "must be >= 0",
            self.h_air,
        )?;
        check(
            self.eps_sub.is_finite() && self.eps_sub >= 1.0,
            "eps_sub",
            "must be >= 1",
            self.eps_sub,
        )?;
        check(
            self.eps_air.is_finite() && self.eps_air >= 1.0,
            "eps_air",
            "must be >= 1",
            self.eps_air,
        )?;
        check(
            self.tan_delta.is_finite() && self.tan_delta >= 0.0,
            "tan_delta",
            "must be >= 0",
            self.tan_delta,
        )?;
        check(
            self.f0_ghz.is_finite() && self.f0_ghz > 0.0,
            "f0",
            "must be > 0",
            self.f0_ghz,
        )
    }

    pub fn with_air_gap(mut self, h_air: f64) -> Self {
        self.h_air = h_air;
        self
    }

    /// Combined substrate thickness `h1 + h2` in mm.
    pub fn substrate_thickness(&self) -> f64 {
        self.h1 + self.h2
    }

    /// Total physical thickness `h1 + h2 + h_air` in mm.
    pub fn total_thickness(&self) -> f64 {
        self.substrate_thickness() + self.h_air
    }

    /// Absolute permittivity product `eps_air * eps_sub`.
    pub fn eps_r(&self) -> f64 {
        self.eps_air * self.eps_sub
    }

    /// Free-space wavelength at `f0` in mm.
    pub fn wavelength_mm(&self) -> f64 {
        free_space_wavelength_mm(self.f0_ghz)
    }
}

impl Default for LayerStack {
    fn default() -> Self {
        LayerStack::PROTOTYPE
    }
}

/// Free-space wavelength in mm for a frequency in GHz.
pub fn free_space_wavelength_mm(f_ghz: f64) -> f64 {
    SPEED_OF_LIGHT / (f_ghz * 1e9) * 1e3
}

/// Which closed form to use for the effective permittivity of the stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PermittivityMode {
    /// `eps_r h / ((h1 + h2) eps_sub + eps_air h_air)`, the typeset expression.
    /// Equals 1 at zero air gap and grows with it.
    AsPrinted,
    /// Series-capacitor form `eps_sub eps_air h / (eps_air (h1 + h2) + eps_sub h_air)`.
    #[default]
    Series,
}

impl std::str::FromStr for PermittivityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "series" => Ok(PermittivityMode::Series),
            "as_printed" | "printed" => Ok(PermittivityMode::AsPrinted),
            other => Err(Error::invalid(
                "permittivity mode",
                format!("expected `series` or `as_printed`, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for PermittivityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PermittivityMode::AsPrinted => "as_printed",
            PermittivityMode::Series => "series",
        })
    }
}

pub fn effective_permittivity(stack: &LayerStack, mode: PermittivityMode) -> Result<f64> {
    stack.validate()?;
    let h = stack.total_thickness();
    let h_sub = stack.substrate_thickness();
    let (value, denominator_field) = match mode {
        PermittivityMode::AsPrinted => (
            stack.eps_r() * h / (h_sub * stack.eps_sub + stack.eps_air * stack.h_air),
            "h1 + h2",
        ),
        // Factored so that h_air = 0 gives eps_sub * (x / x) = eps_sub exactly.
        PermittivityMode::Series => (
            stack.eps_sub
                * (stack.eps_air * h / (stack.eps_air * h_sub + stack.eps_sub * stack.h_air)),
            "h1 + h2",
        ),
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::domain(
            denominator_field,
            format!("effective permittivity is not finite ({value})"),
        ))
    }
}

/// Electrical thickness `h / (lambda0 sqrt(eps_eff))`.
pub fn electrical_thickness(stack: &LayerStack, mode: PermittivityMode) -> Result<f64> {
    let eps_eff = effective_permittivity(stack, mode)?;
    Ok(stack.total_thickness() / (stack.wavelength_mm() * eps_eff.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Fr4,
    Other,
}

impl std::str::FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FR4" => Ok(Region::Fr4),
            "OTHER" => Ok(Region::Other),
            other => Err(Error::invalid(
                "region",
                format!("expected FR4 or OTHER, got `{other}`"),
            )),
        }
    }
}

/// One discretised field sample: `|E|` in V/m over a cell of volume `volume_mm3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub e_mag: f64,
    pub volume_mm3: f64,
    pub region: Region,
}

impl FieldSample {
    fn energy_weight(&self) -> f64 {
        self.e_mag * self.e_mag * self.volume_mm3
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldRegionSamples {
    samples: Vec<FieldSample>,
}

impl FieldRegionSamples {
    pub fn new(samples: Vec<FieldSample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if !(s.e_mag.is_finite() && s.e_mag >= 0.0) {
                return Err(Error::invalid(
                    format!("sample {i} e_mag"),
                    format!("must be finite and >= 0, got {}", s.e_mag),
                ));
            }
            if !(s.volume_mm3.is_finite() && s.volume_mm3 >= 0.0) {
                return Err(Error::invalid(
                    format!("sample {i} volume"),
                    format!("must be finite and >= 0, got {}", s.volume_mm3),
                ));
            }
        }
        Ok(FieldRegionSamples { samples })
    }

    pub fn samples(&self) -> &[FieldSample] {
        &self.samples
    }

    /// Midpoint sum of `|E|^2 dV` (V^2 mm / m^2) over the samples matching `filter`.
    fn energy_sum(&self, filter: impl Fn(&FieldSample) -> bool) -> f64 {
        self.samples
            .iter()
            .filter(|s| filter(s))
            .map(FieldSample::energy_weight)
            .sum()
    }
}

/// Dielectric loss power in watts dissipated in the FR4-tagged samples:
/// `(omega eps0 eps_sub tan_delta / 2) * sum |E|^2 dV`.
pub fn dielectric_loss_power(fields: &FieldRegionSamples, stack: &LayerStack) -> Result<f64> {
    stack.validate()?;
    if !fields.samples.iter().any(|s| s.region == Region::Fr4) {
        return Err(Error::domain("fields", "no FR4-tagged samples"));
    }
    let omega = 2.0 * PI * stack.f0_ghz * 1e9;
    let integral_m3 = fields.energy_sum(|s| s.region == Region::Fr4) * 1e-9;
    Ok(omega * VACUUM_PERMITTIVITY * stack.eps_sub * stack.tan_delta / 2.0 * integral_m3)
}

/// Fraction of stored electric energy inside FR4.
pub fn loss_participation_ratio(fields: &FieldRegionSamples) -> Result<f64> {
    let total = fields.energy_sum(|_| true);
    if !(total > 0.0) {
        return Err(Error::domain("fields", "total field energy is zero"));
    }
    let fr4 = fields.energy_sum(|s| s.region == Region::Fr4);
    Ok((fr4 / total).clamp(0.0, 1.0))
}

pub fn effective_loss_tangent(lpr: f64, tan_delta_fr4: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lpr) {
        return Err(Error::domain("lpr", format!("must lie in [0, 1], got {lpr}")));
    }
    if !(tan_delta_fr4.is_finite() && tan_delta_fr4 >= 0.0) {
        return Err(Error::domain(
            "tan_delta_fr4",
            format!("must be >= 0, got {tan_delta_fr4}"),
        ));
    }
    Ok(lpr * tan_delta_fr4)
}

/// A point of an air-gap sweep: reflection phase range and mean reflection magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FomSample {
    pub h_air: f64,
    pub delta_phi_deg: f64,
    pub delta_s11_db: f64,
}

impl FomSample {
    pub fn new(h_air: f64, delta_phi_deg: f64, delta_s11_db: f64) -> Result<Self> {
        if !(delta_phi_deg > 0.0 && delta_phi_deg <= 360.0) {
            return Err(Error::invalid(
                "delta_phi",
                format!("must lie in (0, 360], got {delta_phi_deg}"),
            ));
        }
        if !(delta_s11_db.is_finite() && delta_s11_db <= 0.0) {
            return Err(Error::invalid(
                "delta_s11_db",
                format!("must be finite and <= 0, got {delta_s11_db}"),
            ));
        }
        if !(h_air.is_finite() && h_air >= 0.0) {
            return Err(Error::invalid("h_air", format!("must be >= 0, got {h_air}")));
        }
        Ok(FomSample {
            h_air,
            delta_phi_deg,
            delta_s11_db,
        })
    }

    pub fn fom(&self) -> Result<f64> {
        phase_amplitude_fom(self.delta_phi_deg, self.delta_s11_db)
    }
}

/// Mean of the ON and OFF reflection magnitudes in dB, the `delta |S11|` convention.
pub fn mean_reflection_db(on_db: f64, off_db: f64) -> f64 {
    0.5 * (on_db + off_db)
}

/// Phase range per dB of reflection loss, `delta_phi / |delta_s11_db|`.
pub fn phase_amplitude_fom(delta_phi_deg: f64, delta_s11_db: f64) -> Result<f64> {
    if !(delta_phi_deg > 0.0) {
        return Err(Error::domain(
            "delta_phi",
            format!("must be > 0, got {delta_phi_deg}"),
        ));
    }
    if delta_s11_db == 0.0 || !delta_s11_db.is_finite() {
        return Err(Error::domain(
            "delta_s11_db",
            format!("FoM is unbounded for reflection magnitude {delta_s11_db} dB"),
        ));
    }
    Ok(delta_phi_deg / delta_s11_db.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AirGapOptimum {
    pub h_air_opt: f64,
    pub fom_values: Vec<f64>,
}

/// Grid argmax of the FoM over an air-gap sweep. Ties go to the smaller gap.
pub fn optimize_air_gap(samples: &[FomSample]) -> Result<AirGapOptimum> {
    if samples.is_empty() {
        return Err(Error::domain("samples", "air-gap sweep is empty"));
    }
    if samples.len() < 2 {
        return Err(Error::invalid("samples", "need at least two sweep points"));
    }
    if let Some(w) = samples.windows(2).find(|w| !(w[1].h_air > w[0].h_air)) {
        return Err(Error::invalid(
            "h_air",
            format!(
                "sweep must be strictly increasing ({} followed by {})",
                w[0].h_air, w[1].h_air
            ),
        ));
    }
    let fom_values = samples.iter().map(FomSample::fom).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, &f) in fom_values.iter().enumerate().skip(1) {
        if f > fom_values[best] {
            best = i;
        }
    }
    Ok(AirGapOptimum {
        h_air_opt: samples[best].h_air,
        fom_values,
    })
}

/// Sampled `|J_00|` magnitudes over the unit-cell metallisation.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentMap {
    values: Grid<f64>,
    cell_pitch_mm: f64,
}

impl CurrentMap {
    pub fn new(values: Grid<f64>, cell_pitch_mm: f64) -> Result<Self> {
        if let Some((r, c, v)) = values.indexed().find(|(_, _, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(
                format!("current map cell ({r}, {c})"),
                format!("must be finite and >= 0, got {v}"),
            ));
        }
        if !(cell_pitch_mm.is_finite() && cell_pitch_mm > 0.0) {
            return Err(Error::invalid(
                "cell_pitch",
                format!("must be > 0, got {cell_pitch_mm}"),
            ));
        }
        Ok(CurrentMap {
            values,
            cell_pitch_mm,
        })
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.values
    }

    pub fn cell_pitch_mm(&self) -> f64 {
        self.cell_pitch_mm
    }

    fn max_value(&self) -> f64 {
        self.values.values().iter().copied().fold(0.0, f64::max)
    }
}

pub const DEFAULT_PLATEAU_TOL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridCoord {
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViaLocation {
    /// Fractional centroid of the plateau in grid-index units.
    pub centroid_row: f64,
    pub centroid_col: f64,
    /// Centroid measured from the grid corner, each cell centre sitting at `(index + 0.5) * pitch`.
    pub x_mm: f64,
    pub y_mm: f64,
    pub nearest: GridCoord,
    pub plateau_size: usize,
}

/// Centroid of the cells whose current is within `plateau_tol` of the maximum.
pub fn select_via_location(map: &CurrentMap, plateau_tol: f64) -> Result<ViaLocation> {
    if !(0.0..1.0).contains(&plateau_tol) {
        return Err(Error::invalid(
            "plateau_tol",
            format!("must lie in [0, 1), got {plateau_tol}"),
        ));
    }
    let max = map.max_value();
    if !(max > 0.0) {
        return Err(Error::domain("current map", "all values are zero"));
    }
    let threshold = (1.0 - plateau_tol) * max;
    let plateau: Vec<(usize, usize)> = map
        .values
        .indexed()
        .filter(|(_, _, v)| **v >= threshold)
        .map(|(r, c, _)| (r, c))
        .collect();
    let n = plateau.len() as f64;
    let centroid_row = plateau.iter().map(|&(r, _)| r as f64).sum::<f64>() / n;
    let centroid_col = plateau.iter().map(|&(_, c)| c as f64).sum::<f64>() / n;

    // Nearest cell by Euclidean distance; exact ties resolve to the lowest (row, col).
    let mut nearest = GridCoord { row: 0, col: 0 };
    let mut best = f64::INFINITY;
    for (r, c, _) in map.values.indexed() {
        let d = (r as f64 - centroid_row).powi(2) + (c as f64 - centroid_col).powi(2);
        if d < best {
            best = d;
            nearest = GridCoord { row: r, col: c };
        }
    }

    Ok(ViaLocation {
        centroid_row,
        centroid_col,
        x_mm: (centroid_col + 0.5) * map.cell_pitch_mm,
        y_mm: (centroid_row + 0.5) * map.cell_pitch_mm,
        nearest,
        plateau_size: plateau.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedCandidate {
    pub coord: GridCoord,
    pub score: f64,
}

/// Orders via candidates by first-order phase sensitivity `|J_00|^2 |dZ|`.
/// The sort is stable, so equal scores keep their input order.
pub fn rank_via_candidates(
    map: &CurrentMap,
    candidates: &[GridCoord],
    delta_z: f64,
) -> Result<Vec<RankedCandidate>> {
    let mut ranked = candidates
        .iter()
        .map(|&coord| {
            let j = map.values.get(coord.row, coord.col).ok_or_else(|| {
                Error::domain(
                    format!("candidate ({}, {})", coord.row, coord.col),
                    format!(
                        "outside the {}x{} current map",
                        map.values.rows(),
                        map.values.cols()
                    ),
                )
            })?;
            Ok(RankedCandidate {
                coord,
                score: j * j * delta_z.abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(ranked)
}
