//! Array geometry, phase-gradient synthesis and 1-bit coding.
//!
//! Layout: the grid has `rows` x `cols` elements stored row-major. Column `j`
//! sits at `x = j * dx` and row `i` at `y = i * dy` (0-based indices here;
//! the same element is `(j + 1, i + 1)` in the 1-based formula notation).
//! With this layout a beam steered in the x-z plane gives column stripes and
//! identical rows, which is how coding patterns are usually drawn.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::effmedium::free_space_wavelength_mm;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Half-width of the tie band around `|psi| = pi/2`, in radians.
///
/// Phases within this distance of the decision circle map to state 0, so the
/// tie-break survives the rounding introduced by adding multiples of 2 pi.
pub const QUANTIZER_TIE_EPS: f64 = 1e-9;

/// Degree-argument sine and cosine, exact at multiples of 90 degrees.
pub fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let r = deg.rem_euclid(360.0);
    if r == 0.0 {
        (0.0, 1.0)
    } else if r == 90.0 {
        (1.0, 0.0)
    } else if r == 180.0 {
        (0.0, -1.0)
    } else if r == 270.0 {
        (-1.0, 0.0)
    } else {
        deg.to_radians().sin_cos()
    }
}

/// Propagation direction in standard spherical coordinates (degrees).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    theta_deg: f64,
    phi_deg: f64,
}

impl Direction {
    pub const BROADSIDE: Direction = Direction {
        theta_deg: 0.0,
        phi_deg: 0.0,
    };

    pub fn new(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        if !(0.0..=90.0).contains(&theta_deg) {
            return Err(Error::invalid(
                "theta",
                format!("must lie in [0, 90] degrees, got {theta_deg}"),
            ));
        }
        if !(phi_deg > -180.0 && phi_deg <= 180.0) {
            return Err(Error::invalid(
                "phi",
                format!("must lie in (-180, 180] degrees, got {phi_deg}"),
            ));
        }
        Ok(Direction { theta_deg, phi_deg })
    }

    /// Signed scan angle in the x-z principal plane: `theta = |scan|`,
    /// `phi = 0` for non-negative scans and `180` otherwise. This is also
    /// how a tabulated `(0, X)` tuple is interpreted.
    pub fn from_scan(scan_deg: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&scan_deg) {
            return Err(Error::invalid(
                "scan angle",
                format!("must lie in [-90, 90] degrees, got {scan_deg}"),
            ));
        }
        let phi = if scan_deg < 0.0 { 180.0 } else { 0.0 };
        Direction::new(scan_deg.abs(), phi)
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta_deg
    }

    pub fn phi_deg(&self) -> f64 {
        self.phi_deg
    }

    /// `(sin t cos p, sin t sin p, cos t)`.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = sin_cos_deg(self.theta_deg);
        let (sp, cp) = sin_cos_deg(self.phi_deg);
        [st * cp, st * sp, ct]
    }
}

/// Array layout and per-element reflection model.
#[derive(Debug, Clone, PartialEq)]
pub struct ApertureSpec {
    rows: usize,
    cols: usize,
    dx_mm: f64,
    dy_mm: f64,
    wavelength_mm: f64,
    alpha: f64,
    q_exponent: f64,
    alpha_grid: Option<Grid<f64>>,
}

impl ApertureSpec {
    pub fn new(
        rows: usize,
        cols: usize,
        dx_mm: f64,
        dy_mm: f64,
        wavelength_mm: f64,
        alpha: f64,
        q_exponent: f64,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(
                "array size",
                format!("need at least one element, got {rows}x{cols}"),
            ));
        }
        for (field, v) in [("dx", dx_mm), ("dy", dy_mm), ("wavelength", wavelength_mm)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, format!("must be > 0, got {v}")));
            }
        }
        check_alpha("alpha", alpha)?;
        if !(q_exponent.is_finite() && q_exponent >= 0.0) {
            return Err(Error::invalid(
                "q",
                format!("must be >= 0, got {q_exponent}"),
            ));
        }
        Ok(ApertureSpec {
            rows,
            cols,
            dx_mm,
            dy_mm,
            wavelength_mm,
            alpha,
            q_exponent,
            alpha_grid: None,
        })
    }

    /// The 10 x 10 prototype: 17 mm pitch, free-space wavelength at 3.5 GHz, alpha = 1, q = 1.
    pub fn prototype() -> Self {
        ApertureSpec::new(10, 10, 17.0, 17.0, free_space_wavelength_mm(3.5), 1.0, 1.0)
            .expect("prototype aperture is valid")
    }

    /// Replaces the uniform amplitude with one value per element.
    pub fn with_alpha_grid(mut self, grid: Grid<f64>) -> Result<Self> {
        grid.ensure_shape(self.rows, self.cols)?;
        for (r, c, &a) in grid.indexed() {
            check_alpha(&format!("alpha ({r}, {c})"), a)?;
        }
        self.alpha_grid = Some(grid);
        Ok(self)
    }

    pub fn with_q_exponent(mut self, q: f64) -> Result<Self> {
        if !(q.is_finite() && q >= 0.0) {
            return Err(Error::invalid("q", format!("must be >= 0, got {q}")));
        }
        self.q_exponent = q;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        check_alpha("alpha", alpha)?;
        self.alpha = alpha;
        self.alpha_grid = None;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dx_mm(&self) -> f64 {
        self.dx_mm
    }

    pub fn dy_mm(&self) -> f64 {
        self.dy_mm
    }

    pub fn wavelength_mm(&self) -> f64 {
        self.wavelength_mm
    }

    pub fn wavenumber(&self) -> f64 {
        TAU / self.wavelength_mm
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn q_exponent(&self) -> f64 {
        self.q_exponent
    }

    /// Reflection amplitude of element `(row, col)`.
    pub fn alpha_at(&self, row: usize, col: usize) -> f64 {
        self.alpha_grid.as_ref().map_or(self.alpha, |g| g[(row, col)])
    }

    pub fn x_mm(&self, col: usize) -> f64 {
        col as f64 * self.dx_mm
    }

    pub fn y_mm(&self, row: usize) -> f64 {
        row as f64 * self.dy_mm
    }
}

fn check_alpha(field: &str, alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must lie in (0, 1], got {alpha}")))
    }
}

/// `(x, y)` in mm for every element.
pub fn element_positions(spec: &ApertureSpec) -> Grid<(f64, f64)> {
    Grid::from_fn(spec.rows, spec.cols, |r, c| (spec.x_mm(c), spec.y_mm(r)))
}

/// Continuous reflection phases in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    phases: Grid<f64>,
}

impl PhaseProfile {
    pub fn new(phases: Grid<f64>) -> Result<Self> {
        if let Some((r, c, v)) = phases.indexed().find(|(_, _, v)| !v.is_finite()) {
            return Err(Error::invalid(
                format!("phase ({r}, {c})"),
                format!("must be finite, got {v}"),
            ));
        }
        Ok(PhaseProfile { phases })
    }

    pub fn phases(&self) -> &Grid<f64> {
        &self.phases
    }

    pub fn shape(&self) -> (usize, usize) {
        self.phases.shape()
    }
}

fn planar_phase(spec: &ApertureSpec, transverse: [f64; 2]) -> PhaseProfile {
    let k0 = spec.wavenumber();
    let phases = Grid::from_fn(spec.rows, spec.cols, |r, c| {
        -k0 * (spec.x_mm(c) * transverse[0] + spec.y_mm(r) * transverse[1])
    });
    PhaseProfile { phases }
}

/// Phase gradient that co-phases every element toward `target`:
/// `psi = -k0 p . (u_target - u_inc)`.
pub fn steering_phase_profile(
    spec: &ApertureSpec,
    incident: Direction,
    target: Direction,
) -> PhaseProfile {
    let ut = target.unit_vector();
    let ui = incident.unit_vector();
    planar_phase(spec, [ut[0] - ui[0], ut[1] - ui[1]])
}

/// Spatial phase of the incident plane wave at each element, `-k0 p . u_inc`.
pub fn incident_phase(spec: &ApertureSpec, incident: Direction) -> PhaseProfile {
    let ui = incident.unit_vector();
    planar_phase(spec, [ui[0], ui[1]])
}

/// One of the two realisable reflection states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum PhaseState {
    /// 0 rad.
    Zero,
    /// pi rad.
    Pi,
}

impl PhaseState {
    pub fn bit(self) -> u8 {
        match self {
            PhaseState::Zero => 0,
            PhaseState::Pi => 1,
        }
    }

    pub fn phase(self) -> f64 {
        match self {
            PhaseState::Zero => 0.0,
            PhaseState::Pi => PI,
        }
    }

    /// `exp(j psi)`, exactly +1 or -1.
    pub fn sign(self) -> f64 {
        match self {
            PhaseState::Zero => 1.0,
            PhaseState::Pi => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            PhaseState::Zero => PhaseState::Pi,
            PhaseState::Pi => PhaseState::Zero,
        }
    }
}

impl From<PhaseState> for u8 {
    fn from(s: PhaseState) -> u8 {
        s.bit()
    }
}

impl TryFrom<u8> for PhaseState {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(PhaseState::Zero),
            1 => Ok(PhaseState::Pi),
            other => Err(format!("phase state must be 0 or 1, got {other}")),
        }
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(psi: f64) -> f64 {
    let w = (psi + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Nearest state on the phase circle; the tie circle `|psi| = pi/2` maps to 0.
pub fn quantize_phase(psi: f64) -> PhaseState {
    if wrap_phase(psi).abs() <= PI / 2.0 + QUANTIZER_TIE_EPS {
        PhaseState::Zero
    } else {
        PhaseState::Pi
    }
}

/// An `rows x cols` 1-bit coding, optionally with the profile it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct CodingMatrix {
    states: Grid<PhaseState>,
    source: Option<PhaseProfile>,
}

impl CodingMatrix {
    pub fn new(states: Grid<PhaseState>) -> Self {
        CodingMatrix {
            states,
            source: None,
        }
    }

    pub fn uniform(rows: usize, cols: usize, state: PhaseState) -> Self {
        CodingMatrix::new(Grid::from_fn(rows, cols, |_, _| state))
    }

    pub fn from_bits(rows: Vec<Vec<u8>>) -> Result<Self> {
        let grid = Grid::from_rows(rows)?;
        let mut states = Vec::with_capacity(grid.values().len());
        for (r, c, &b) in grid.indexed() {
            states.push(
                PhaseState::try_from(b).map_err(|e| Error::invalid(format!("state ({r}, {c})"), e))?,
            );
        }
        let mut it = states.into_iter();
        Ok(CodingMatrix::new(Grid::from_fn(grid.rows(), grid.cols(), |_, _| {
            it.next().expect("sized above")
        })))
    }

    pub fn states(&self) -> &Grid<PhaseState> {
        &self.states
    }

    pub fn source(&self) -> Option<&PhaseProfile> {
        self.source.as_ref()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.states.shape()
    }

    pub fn bits(&self) -> Grid<u8> {
        self.states.map(|s| s.bit())
    }

    /// Flips every element (a global pi shift).
    pub fn inverted(&self) -> Self {
        CodingMatrix {
            states: self.states.map(|s| s.flipped()),
            source: None,
        }
    }

    /// Left-right mirror (column `j` to `cols - 1 - j`).
    pub fn mirrored(&self) -> Self {
        let cols = self.states.cols();
        CodingMatrix::new(Grid::from_fn(self.states.rows(), cols, |r, c| {
            self.states[(r, cols - 1 - c)]
        }))
    }

    /// One line per row of `0`/`1` characters.
    pub fn to_text_grid(&self) -> String {
        let mut out = String::with_capacity(self.states.rows() * (self.states.cols() + 1));
        for row in self.states.row_iter() {
            out.extend(row.iter().map(|s| if s.bit() == 0 { '0' } else { '1' }));
            out.push('\n');
        }
        out
    }

    pub fn from_text_grid(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(i, line)| {
                line.chars()
                    .map(|ch| match ch {
                        '0' => Ok(0),
                        '1' => Ok(1),
                        other => Err(Error::Parse {
                            line: i as u64 + 1,
                            reason: format!("unexpected character `{other}`"),
                        }),
                    })
                    .collect::<Result<Vec<u8>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        CodingMatrix::from_bits(rows)
    }

    /// True when every row carries the same states.
    pub fn rows_identical(&self) -> bool {
        let first = self.states.row(0);
        self.states.row_iter().all(|r| r == first)
    }

    /// Lengths of the runs of equal states along row `row`.
    pub fn row_runs(&self, row: usize) -> Vec<(PhaseState, usize)> {
        let mut runs: Vec<(PhaseState, usize)> = Vec::new();
        for &s in self.states.row(row) {
            match runs.last_mut() {
                Some((last, n)) if *last == s => *n += 1,
                _ => runs.push((s, 1)),
            }
        }
        runs
    }
}

pub fn quantize_1bit(profile: &PhaseProfile) -> Result<CodingMatrix> {
    let phases = profile.phases();
    if let Some((r, c, v)) = phases.indexed().find(|(_, _, v)| !v.is_finite()) {
        return Err(Error::domain(
            format!("phase ({r}, {c})"),
            format!("cannot quantize non-finite phase {v}"),
        ));
    }
    Ok(CodingMatrix {
        states: phases.map(|&psi| quantize_phase(psi)),
        source: Some(profile.clone()),
    })
}

pub fn coding_matrix(
    spec: &ApertureSpec,
    incident: Direction,
    target: Direction,
) -> Result<CodingMatrix> {
    quantize_1bit(&steering_phase_profile(spec, incident, target))
}

/// JSON form of a coding matrix. Indices in `states` are 0-based, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingMatrixFile {
    pub m: usize,
    pub n: usize,
    pub dx_mm: f64,
    pub dy_mm: f64,
    pub states: Vec<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incident_scan_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_scan_deg: Option<f64>,
}

impl CodingMatrixFile {
    pub fn new(spec: &ApertureSpec, coding: &CodingMatrix) -> Self {
        CodingMatrixFile {
            m: coding.shape().0,
            n: coding.shape().1,
            dx_mm: spec.dx_mm(),
            dy_mm: spec.dy_mm(),
            states: coding.bits().to_rows(),
            incident_scan_deg: None,
            target_scan_deg: None,
        }
    }

    pub fn coding(&self) -> Result<CodingMatrix> {
        let coding = CodingMatrix::from_bits(self.states.clone())?;
        if coding.shape() != (self.m, self.n) {
            return Err(Error::ShapeMismatch {
                expected_rows: self.m,
                expected_cols: self.n,
                rows: coding.shape().0,
                cols: coding.shape().1,
            });
        }
        Ok(coding)
    }
}
