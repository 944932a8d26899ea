//! `risbeam` command-line front end.
//!
//! Settings resolve in three layers: prototype defaults, then the flat
//! `key = value` file given by `--config`, then explicit flags.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::aperture::{coding_matrix, ApertureSpec, CodingMatrix, CodingMatrixFile, Direction, PhaseState};
use crate::effmedium::{
    effective_loss_tangent, effective_permittivity, electrical_thickness, loss_participation_ratio,
    optimize_air_gap, select_via_location, CurrentMap, FieldRegionSamples, FieldSample, FomSample,
    LayerStack, PermittivityMode, Region, DEFAULT_PLATEAU_TOL,
};
use crate::error::{Error, Result};
use crate::farfield::{beam_metrics, beam_metrics_toward, pattern_cut, BeamMetricsFile};
use crate::grid::Grid;
use crate::linksim::{all_zero_codebook, cophase_codebook, simulate, LinkScenario, ScenarioFile};
use crate::pipeline::{validate_table, SweepConfig};
use crate::refdata::TableId;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "risbeam", version, about = "1-bit RIS design chain: unit cell, codebooks, beam patterns, table validation and QPSK links")]
pub struct Cli {
    /// Flat `key = value` settings file (keys match the long flag names with `_` for `-`).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Seed for every random stream (u64).
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(flatten)]
    pub array: ArrayArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ArrayArgs {
    /// Design frequency in GHz [default: 3.5].
    #[arg(long, global = true, value_name = "GHZ")]
    pub frequency_ghz: Option<f64>,
    /// Element rows M [default: 10].
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// Element columns N [default: 10].
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Column pitch in mm [default: 17].
    #[arg(long, global = true, value_name = "MM")]
    pub dx_mm: Option<f64>,
    /// Row pitch in mm [default: 17].
    #[arg(long, global = true, value_name = "MM")]
    pub dy_mm: Option<f64>,
    /// Per-element reflection amplitude in (0, 1] [default: 1].
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Element-factor exponent q of cos^q(theta), >= 0 [default: 1].
    #[arg(long, global = true)]
    pub q: Option<f64>,
    /// First scan angle of pattern sweeps in degrees [default: -90].
    #[arg(long, global = true, value_name = "DEG", allow_hyphen_values = true)]
    pub angle_start: Option<f64>,
    /// Last scan angle of pattern sweeps in degrees [default: 90].
    #[arg(long, global = true, value_name = "DEG", allow_hyphen_values = true)]
    pub angle_stop: Option<f64>,
    /// Sweep step in degrees [default: 0.25].
    #[arg(long, global = true, value_name = "DEG")]
    pub angle_step: Option<f64>,
    /// Report grid peaks without parabolic refinement.
    #[arg(long, global = true)]
    pub no_refine: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Effective-medium report of the layer stack, with optional loss, FoM and via inputs.
    Unitcell(UnitcellArgs),
    /// Synthesize a 1-bit coding matrix for one incidence/target pair.
    Codebook(CodebookArgs),
    /// Far-field x-z cut of a coding matrix file.
    Pattern(PatternArgs),
    /// Predict every row of a bundled steering table and report deviations.
    Validate(ValidateArgs),
    /// QPSK Monte Carlo through the direct plus RIS channel.
    Qpsk(QpskArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct UnitcellArgs {
    /// Upper FR4 thickness in mm [default: 2].
    #[arg(long, value_name = "MM")]
    pub h1: Option<f64>,
    /// Lower FR4 thickness in mm [default: 1.6].
    #[arg(long, value_name = "MM")]
    pub h2: Option<f64>,
    /// Air-gap height in mm [default: 0.5].
    #[arg(long, value_name = "MM")]
    pub h_air: Option<f64>,
    /// Substrate relative permittivity [default: 4.4].
    #[arg(long)]
    pub eps_sub: Option<f64>,
    /// Gap relative permittivity [default: 1].
    #[arg(long)]
    pub eps_air: Option<f64>,
    /// Substrate loss tangent [default: 0.02].
    #[arg(long)]
    pub tan_delta: Option<f64>,
    /// Formula used for the electrical thickness: series or as_printed [default: series].
    #[arg(long, value_name = "MODE")]
    pub permittivity_mode: Option<PermittivityMode>,
    /// Air-gap sweep CSV with header `h_air,delta_phi,delta_s11_db` (mm, deg, dB).
    #[arg(long, value_name = "CSV")]
    pub fom_sweep: Option<PathBuf>,
    /// Field samples CSV with header `e_mag,volume,region` (V/m, mm^3, FR4|OTHER).
    #[arg(long, value_name = "CSV")]
    pub fields: Option<PathBuf>,
    /// Surface current magnitude CSV with header `row,col,value`.
    #[arg(long, value_name = "CSV")]
    pub current_map: Option<PathBuf>,
    /// Cell pitch of the current map in mm [default: dx].
    #[arg(long, value_name = "MM")]
    pub cell_pitch_mm: Option<f64>,
    /// Relative plateau tolerance for via placement, in [0, 1) [default: 0.01].
    #[arg(long)]
    pub plateau_tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct CodebookArgs {
    /// Incidence scan angle in the x-z plane, degrees.
    #[arg(long, value_name = "DEG", default_value_t = 0.0, allow_hyphen_values = true)]
    pub incident: f64,
    /// Target reflection scan angle in the x-z plane, degrees.
    #[arg(long, value_name = "DEG", allow_hyphen_values = true)]
    pub target: f64,
}

#[derive(Debug, Clone, Args)]
pub struct PatternArgs {
    /// Coding matrix JSON as written by `codebook`.
    #[arg(long, value_name = "JSON")]
    pub codebook: PathBuf,
    /// Incidence scan angle in degrees [default: the file's, else 0].
    #[arg(long, value_name = "DEG", allow_hyphen_values = true)]
    pub incident: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// T1, T2, T3 or all.
    #[arg(long, value_name = "ID", default_value = "all")]
    pub table: String,
}

#[derive(Debug, Clone, Args)]
pub struct QpskArgs {
    /// Scenario JSON; omitted means i.i.d. CN(0, 1) channels drawn from the seed.
    #[arg(long, value_name = "JSON")]
    pub scenario: Option<PathBuf>,
    /// cophase, allzero, or a coding matrix JSON path.
    #[arg(long, value_name = "SOURCE", default_value = "cophase")]
    pub codebook: String,
    /// Noise variance sigma^2 for seeded scenarios (linear) [default: 0.1].
    #[arg(long)]
    pub noise_var: Option<f64>,
    /// Symbol energy E_s for seeded scenarios (linear) [default: 1].
    #[arg(long)]
    pub symbol_energy: Option<f64>,
    /// Number of QPSK symbols.
    #[arg(long, default_value_t = 10_000)]
    pub symbols: usize,
    /// Seeded scenarios without a direct Tx-Rx path.
    #[arg(long)]
    pub no_direct: bool,
    /// Also run the direct-path-only baseline.
    #[arg(long)]
    pub baseline: bool,
}

/// Resolved array and sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub frequency_ghz: f64,
    pub m: usize,
    pub n: usize,
    pub dx_mm: f64,
    pub dy_mm: f64,
    pub alpha: f64,
    pub q_exponent: f64,
    pub sweep: SweepConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            frequency_ghz: 3.5,
            m: 10,
            n: 10,
            dx_mm: 17.0,
            dy_mm: 17.0,
            alpha: 1.0,
            q_exponent: 1.0,
            sweep: SweepConfig::default(),
            seed: 0,
            out: PathBuf::from("risbeam-out"),
        }
    }
}

impl RunConfig {
    pub fn aperture(&self) -> Result<ApertureSpec> {
        if !(self.frequency_ghz.is_finite() && self.frequency_ghz > 0.0) {
            return Err(Error::invalid(
                "frequency_ghz",
                format!("must be > 0, got {}", self.frequency_ghz),
            ));
        }
        let wavelength = crate::effmedium::free_space_wavelength_mm(self.frequency_ghz);
        ApertureSpec::new(self.m, self.n, self.dx_mm, self.dy_mm, wavelength, self.alpha, self.q_exponent)
    }
}

/// Parsed `--config` file: key to (value, line).
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: BTreeMap<String, (String, u64)>,
}

const CONFIG_KEYS: &[&str] = &[
    "frequency_ghz", "m", "n", "dx_mm", "dy_mm", "alpha", "q", "angle_start", "angle_stop",
    "angle_step", "refine", "seed", "out", "h1", "h2", "h_air", "eps_sub", "eps_air", "tan_delta",
    "permittivity_mode", "plateau_tol", "cell_pitch_mm", "noise_var", "symbol_energy",
];

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = (i + 1) as u64;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Parse {
                line,
                reason: format!("expected `key = value`, got `{body}`"),
            })?;
            let key = key.trim().replace('-', "_");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::Parse {
                    line,
                    reason: format!("unknown key `{key}`"),
                });
            }
            entries.insert(key, (value.trim().to_string(), line));
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v.parse().map(Some).map_err(|e| Error::Parse {
                line: *line,
                reason: format!("`{key}`: {e}"),
            }),
        }
    }
}

fn layered<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn resolve_config(cli: &Cli, file: &ConfigFile) -> Result<RunConfig> {
    let d = RunConfig::default();
    let a = &cli.array;
    let refine_file: Option<bool> = file.get("refine")?;
    Ok(RunConfig {
        frequency_ghz: layered(a.frequency_ghz, file.get("frequency_ghz")?, d.frequency_ghz),
        m: layered(a.m, file.get("m")?, d.m),
        n: layered(a.n, file.get("n")?, d.n),
        dx_mm: layered(a.dx_mm, file.get("dx_mm")?, d.dx_mm),
        dy_mm: layered(a.dy_mm, file.get("dy_mm")?, d.dy_mm),
        alpha: layered(a.alpha, file.get("alpha")?, d.alpha),
        q_exponent: layered(a.q, file.get("q")?, d.q_exponent),
        sweep: SweepConfig {
            start_deg: layered(a.angle_start, file.get("angle_start")?, d.sweep.start_deg),
            stop_deg: layered(a.angle_stop, file.get("angle_stop")?, d.sweep.stop_deg),
            step_deg: layered(a.angle_step, file.get("angle_step")?, d.sweep.step_deg),
            refine: if a.no_refine { false } else { refine_file.unwrap_or(d.sweep.refine) },
        },
        seed: layered(cli.seed, file.get("seed")?, d.seed),
        out: layered(cli.out.clone(), file.get("out")?, d.out),
    })
}

fn resolve_stack(args: &UnitcellArgs, file: &ConfigFile, f0: f64) -> Result<LayerStack> {
    let p = LayerStack::PROTOTYPE;
    LayerStack::new(
        layered(args.h1, file.get("h1")?, p.h1),
        layered(args.h2, file.get("h2")?, p.h2),
        layered(args.h_air, file.get("h_air")?, p.h_air),
        layered(args.eps_sub, file.get("eps_sub")?, p.eps_sub),
        layered(args.eps_air, file.get("eps_air")?, p.eps_air),
        layered(args.tan_delta, file.get("tan_delta")?, p.tan_delta),
        f0,
    )
}

/// Runs with the process arguments and returns the exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                EXIT_INPUT
            } else {
                EXIT_DOMAIN
            }
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let config = resolve_config(cli, &file)?;
    fs::create_dir_all(&config.out)?;
    if fs::metadata(&config.out)?.permissions().readonly() {
        return Err(Error::invalid(
            "out",
            format!("{} is not writable", config.out.display()),
        ));
    }
    match &cli.command {
        Command::Unitcell(a) => cmd_unitcell(&config, &file, a),
        Command::Codebook(a) => cmd_codebook(&config, a),
        Command::Pattern(a) => cmd_pattern(&config, a),
        Command::Validate(a) => cmd_validate(&config, a),
        Command::Qpsk(a) => cmd_qpsk(&config, &file, a),
    }
}

fn write(config: &RunConfig, name: &str, contents: &str) -> Result<PathBuf> {
    let path = config.out.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn write_json<T: Serialize>(config: &RunConfig, name: &str, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(config, name, &text)
}

/// Reads a headed CSV whose columns must be exactly `header`; yields each
/// record with its 1-based line number.
fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<(u64, Vec<String>)>> {
    let text = fs::read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let csv_err = |e: csv::Error| Error::Parse {
        line: e.position().map_or(0, |p| p.line()),
        reason: e.to_string(),
    };
    let found: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::Parse {
            line: 1,
            reason: format!("expected header `{}`, got `{}`", header.join(","), found.join(",")),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            reason: "no data rows".into(),
        });
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(line: u64, name: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| Error::Parse {
        line,
        reason: format!("{name} `{raw}`: {e}"),
    })
}

fn at_line<T>(line: u64, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { .. } | Error::Io(_) => e,
        other => Error::Parse {
            line,
            reason: other.to_string(),
        },
    })
}

pub fn read_fom_sweep(path: &Path) -> Result<Vec<FomSample>> {
    read_csv(path, &["h_air", "delta_phi", "delta_s11_db"])?
        .into_iter()
        .map(|(line, r)| {
            let h = field(line, "h_air", &r[0])?;
            let phi = field(line, "delta_phi", &r[1])?;
            let s11 = field(line, "delta_s11_db", &r[2])?;
            at_line(line, FomSample::new(h, phi, s11))
        })
        .collect()
}

pub fn read_field_samples(path: &Path) -> Result<FieldRegionSamples> {
    let samples = read_csv(path, &["e_mag", "volume", "region"])?
        .into_iter()
        .map(|(line, r)| {
            Ok(FieldSample {
                e_mag: field(line, "e_mag", &r[0])?,
                volume_mm3: field(line, "volume", &r[1])?,
                region: at_line(line, r[2].parse::<Region>())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FieldRegionSamples::new(samples)
}

pub fn read_current_map(path: &Path, pitch_mm: f64) -> Result<CurrentMap> {
    let rows = read_csv(path, &["row", "col", "value"])?;
    let mut cells = Vec::with_capacity(rows.len());
    for (line, r) in rows {
        let row: usize = field(line, "row", &r[0])?;
        let col: usize = field(line, "col", &r[1])?;
        let value: f64 = field(line, "value", &r[2])?;
        cells.push((line, row, col, value));
    }
    let n_rows = cells.iter().map(|c| c.1).max().unwrap_or(0) + 1;
    let n_cols = cells.iter().map(|c| c.2).max().unwrap_or(0) + 1;
    let mut grid: Grid<Option<f64>> = Grid::from_fn(n_rows, n_cols, |_, _| None);
    for (line, row, col, value) in cells {
        if grid[(row, col)].replace(value).is_some() {
            return Err(Error::Parse {
                line,
                reason: format!("duplicate cell ({row}, {col})"),
            });
        }
    }
    if let Some((r, c, _)) = grid.indexed().find(|(_, _, v)| v.is_none()) {
        return Err(Error::invalid(
            "current map",
            format!("cell ({r}, {c}) missing from a {n_rows}x{n_cols} map"),
        ));
    }
    CurrentMap::new(grid.map(|v| v.unwrap_or(0.0)), pitch_mm)
}

#[derive(Debug, Serialize)]
struct UnitcellReport {
    h1_mm: f64,
    h2_mm: f64,
    h_air_mm: f64,
    eps_sub: f64,
    eps_air: f64,
    tan_delta: f64,
    f0_ghz: f64,
    eps_eff_series: f64,
    eps_eff_as_printed: f64,
    permittivity_mode: String,
    electrical_thickness: f64,
    loss_participation_ratio: Option<f64>,
    effective_loss_tangent: Option<f64>,
    fom: Option<Vec<FomRow>>,
    h_air_opt_mm: Option<f64>,
    via: Option<ViaReport>,
}

#[derive(Debug, Serialize)]
struct FomRow {
    h_air_mm: f64,
    delta_phi_deg: f64,
    delta_s11_db: f64,
    fom: f64,
}

#[derive(Debug, Serialize)]
struct ViaReport {
    x_mm: f64,
    y_mm: f64,
    nearest_row: usize,
    nearest_col: usize,
    plateau_size: usize,
}

pub fn cmd_unitcell(config: &RunConfig, file: &ConfigFile, args: &UnitcellArgs) -> Result<()> {
    let stack = resolve_stack(args, file, config.frequency_ghz)?;
    let mode = layered(args.permittivity_mode, file.get("permittivity_mode")?, PermittivityMode::default());
    let series = effective_permittivity(&stack, PermittivityMode::Series)?;
    let printed = effective_permittivity(&stack, PermittivityMode::AsPrinted)?;
    let thickness = electrical_thickness(&stack, mode)?;

    let (lpr, tan_eff) = match &args.fields {
        Some(p) => {
            let lpr = loss_participation_ratio(&read_field_samples(p)?)?;
            (Some(lpr), Some(effective_loss_tangent(lpr, stack.tan_delta)?))
        }
        None => (None, None),
    };
    let (fom, h_opt) = match &args.fom_sweep {
        Some(p) => {
            let samples = read_fom_sweep(p)?;
            let opt = optimize_air_gap(&samples)?;
            let rows: Vec<FomRow> = samples
                .iter()
                .zip(&opt.fom_values)
                .map(|(s, &f)| FomRow {
                    h_air_mm: s.h_air,
                    delta_phi_deg: s.delta_phi_deg,
                    delta_s11_db: s.delta_s11_db,
                    fom: f,
                })
                .collect();
            (Some(rows), Some(opt.h_air_opt))
        }
        None => (None, None),
    };
    let via = match &args.current_map {
        Some(p) => {
            let pitch = layered(args.cell_pitch_mm, file.get("cell_pitch_mm")?, config.dx_mm);
            let tol = layered(args.plateau_tol, file.get("plateau_tol")?, DEFAULT_PLATEAU_TOL);
            let loc = select_via_location(&read_current_map(p, pitch)?, tol)?;
            Some(ViaReport {
                x_mm: loc.x_mm,
                y_mm: loc.y_mm,
                nearest_row: loc.nearest.row,
                nearest_col: loc.nearest.col,
                plateau_size: loc.plateau_size,
            })
        }
        None => None,
    };

    println!(
        "stack: h1 = {} mm, h2 = {} mm, h_air = {} mm, eps_sub = {}, tan_delta = {}, f0 = {} GHz",
        stack.h1, stack.h2, stack.h_air, stack.eps_sub, stack.tan_delta, stack.f0_ghz
    );
    println!("eps_eff SERIES     = {series:.4}");
    println!("eps_eff AS_PRINTED = {printed:.4}");
    println!("electrical thickness ({mode}) = {thickness:.5} wavelengths");
    if let (Some(l), Some(t)) = (lpr, tan_eff) {
        println!("loss participation = {l:.4}, effective tan_delta = {t:.5}");
    }
    if let Some(rows) = &fom {
        println!("{:>10} {:>12} {:>12} {:>10}", "h_air_mm", "dphi_deg", "dS11_dB", "fom");
        for r in rows {
            println!(
                "{:>10.3} {:>12.2} {:>12.2} {:>10.3}",
                r.h_air_mm, r.delta_phi_deg, r.delta_s11_db, r.fom
            );
        }
    }
    if let Some(h) = h_opt {
        println!("h_air_opt = {h} mm");
    }
    if let Some(v) = &via {
        println!(
            "via at ({:.3}, {:.3}) mm, nearest cell ({}, {}), plateau of {}",
            v.x_mm, v.y_mm, v.nearest_row, v.nearest_col, v.plateau_size
        );
    }

    let report = UnitcellReport {
        h1_mm: stack.h1,
        h2_mm: stack.h2,
        h_air_mm: stack.h_air,
        eps_sub: stack.eps_sub,
        eps_air: stack.eps_air,
        tan_delta: stack.tan_delta,
        f0_ghz: stack.f0_ghz,
        eps_eff_series: series,
        eps_eff_as_printed: printed,
        permittivity_mode: mode.to_string(),
        electrical_thickness: thickness,
        loss_participation_ratio: lpr,
        effective_loss_tangent: tan_eff,
        fom,
        h_air_opt_mm: h_opt,
        via,
    };
    write_json(config, "unitcell.json", &report)?;
    Ok(())
}

/// One line per distinct row pattern: the bit string and its run lengths.
pub fn stripe_summary(coding: &CodingMatrix) -> String {
    let (rows, cols) = coding.shape();
    let mut out = format!("{rows}x{cols} coding, ");
    out.push_str(if coding.rows_identical() {
        "rows identical\n"
    } else {
        "rows differ\n"
    });
    let bits = coding.bits();
    let mut seen: Vec<&[u8]> = Vec::new();
    for r in 0..rows {
        let row = bits.row(r);
        if seen.contains(&row) {
            continue;
        }
        seen.push(row);
        let text: String = row.iter().map(|b| char::from(b'0' + b)).collect();
        let runs: Vec<String> = coding.row_runs(r).iter().map(|(_, n)| n.to_string()).collect();
        out.push_str(&format!("row {r}: {text} runs {}\n", runs.join(" ")));
    }
    out
}

pub fn cmd_codebook(config: &RunConfig, args: &CodebookArgs) -> Result<()> {
    let spec = config.aperture()?;
    let incident = Direction::from_scan(args.incident)?;
    let target = Direction::from_scan(args.target)?;
    let coding = coding_matrix(&spec, incident, target)?;
    let mut file = CodingMatrixFile::new(&spec, &coding);
    file.incident_scan_deg = Some(args.incident);
    file.target_scan_deg = Some(args.target);
    write_json(config, "codebook.json", &file)?;
    write(config, "codebook.txt", &coding.to_text_grid())?;
    print!("{}", stripe_summary(&coding));
    Ok(())
}

pub fn cmd_pattern(config: &RunConfig, args: &PatternArgs) -> Result<()> {
    let spec = config.aperture()?;
    let file: CodingMatrixFile = serde_json::from_str(&fs::read_to_string(&args.codebook)?)?;
    let coding = file.coding()?;
    if coding.shape() != (spec.rows(), spec.cols()) {
        return Err(Error::ShapeMismatch {
            expected_rows: spec.rows(),
            expected_cols: spec.cols(),
            rows: coding.shape().0,
            cols: coding.shape().1,
        });
    }
    let incident_deg = args.incident.or(file.incident_scan_deg).unwrap_or(0.0);
    let incident = Direction::from_scan(incident_deg)?;
    let s = &config.sweep;
    let cut = pattern_cut(&spec, &coding, incident, s.start_deg, s.stop_deg, s.step_deg)?;
    let metrics = match file.target_scan_deg {
        Some(t) => beam_metrics_toward(&cut, s.refine, t)?,
        None => beam_metrics(&cut, s.refine)?,
    };
    write(config, "pattern.csv", &cut.to_csv())?;
    write_json(config, "beam.json", &BeamMetricsFile::from(&metrics))?;
    println!(
        "peak {:.3} deg at {:.3} dB, hpbw {}, sll {}",
        metrics.peak_angle_deg,
        metrics.peak_db,
        metrics
            .half_power_beamwidth_deg
            .map_or("n/a".to_string(), |v| format!("{v:.3} deg")),
        metrics
            .sidelobe_level_db
            .map_or("n/a".to_string(), |v| format!("{v:.3} dB")),
    );
    Ok(())
}

pub fn cmd_validate(config: &RunConfig, args: &ValidateArgs) -> Result<()> {
    let spec = config.aperture()?;
    let tables: Vec<TableId> = if args.table.eq_ignore_ascii_case("all") {
        TableId::ALL.to_vec()
    } else {
        vec![args.table.parse().map_err(|_| {
            Error::invalid("table", format!("unknown table `{}`", args.table))
        })?]
    };
    for id in tables {
        let v = validate_table(&spec, id, &config.sweep)?;
        write_json(config, &format!("validate_{id}.json"), &v)?;
        println!("{id} against simulated directions");
        print!("{}", v.simulated.to_text());
        println!("{id} against measured directions");
        print!("{}", v.measured.to_text());
    }
    Ok(())
}

pub fn cmd_qpsk(config: &RunConfig, file: &ConfigFile, args: &QpskArgs) -> Result<()> {
    let scenario = match &args.scenario {
        Some(p) => {
            let f: ScenarioFile = serde_json::from_str(&fs::read_to_string(p)?)?;
            let s = f.scenario()?;
            if f.rng_seed == 0 {
                s.with_seed(config.seed)
            } else {
                s
            }
        }
        None => {
            let noise_var = layered(args.noise_var, file.get("noise_var")?, 0.1);
            let es = layered(args.symbol_energy, file.get("symbol_energy")?, 1.0);
            let s = LinkScenario::seeded(config.m, config.n, noise_var, es, config.seed, !args.no_direct)?;
            write_json(config, "scenario.json", &ScenarioFile::from_scenario(&s))?;
            s
        }
    };
    if args.symbols == 0 {
        return Err(Error::invalid("symbols", "need at least one symbol"));
    }
    let coding = match args.codebook.as_str() {
        "cophase" => cophase_codebook(&scenario)?,
        "allzero" => all_zero_codebook(&scenario),
        path => {
            let f: CodingMatrixFile = serde_json::from_str(&fs::read_to_string(path)?)?;
            f.coding()?
        }
    };
    let run = simulate(&scenario, Some(&coding), args.symbols)?;
    write(config, "constellation.csv", &run.constellation_csv())?;
    write_json(config, "summary.json", &run.summary(&scenario))?;
    let ones = coding.states().values().iter().filter(|&&s| s == PhaseState::Pi).count();
    println!(
        "RIS ({}, {ones} elements at pi): |h_eff| = {:.6}, SER = {:.6}, d_min = {:.6}",
        args.codebook,
        run.h_eff.norm(),
        run.ser,
        run.d_min
    );
    if args.baseline {
        let base = simulate(&scenario, None, args.symbols)?;
        write(config, "constellation_no_ris.csv", &base.constellation_csv())?;
        write_json(config, "summary_no_ris.json", &base.summary(&scenario))?;
        println!(
            "no RIS: |h_d| = {:.6}, SER = {:.6}, d_min = {:.6}",
            base.h_eff.norm(),
            base.ser,
            base.d_min
        );
    }
    Ok(())
}
