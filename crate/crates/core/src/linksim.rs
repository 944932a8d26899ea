//! QPSK over the RIS effective channel: mapping, AWGN, zero-forcing
//! equalisation, centroid minimum distance and symbol error rate.
//!
//! Randomness is drawn from ChaCha8 streams derived from the scenario seed:
//! stream 0 for generated channels, 1 for receiver noise and 2 for payload
//! bits. Equal seeds therefore give bitwise identical runs.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::aperture::{quantize_1bit, CodingMatrix, PhaseProfile, PhaseState};
use crate::error::{Error, Result};
use crate::grid::Grid;

const CHANNEL_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const BITS_STREAM: u64 = 2;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Circularly-symmetric complex Gaussian sample with total variance `var`.
fn complex_gaussian(rng: &mut impl Rng, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkScenario {
    pub h_direct: Complex64,
    pub h_tx: Grid<Complex64>,
    pub h_rx: Grid<Complex64>,
    pub noise_var: f64,
    pub symbol_energy: f64,
    pub rng_seed: u64,
}

impl LinkScenario {
    pub fn new(
        h_direct: Complex64,
        h_tx: Grid<Complex64>,
        h_rx: Grid<Complex64>,
        noise_var: f64,
        symbol_energy: f64,
        rng_seed: u64,
    ) -> Result<Self> {
        h_rx.ensure_shape(h_tx.rows(), h_tx.cols())?;
        if !(noise_var.is_finite() && noise_var >= 0.0) {
            return Err(Error::invalid(
                "noise_var",
                format!("must be >= 0, got {noise_var}"),
            ));
        }
        if !(symbol_energy.is_finite() && symbol_energy > 0.0) {
            return Err(Error::invalid(
                "symbol_energy",
                format!("must be > 0, got {symbol_energy}"),
            ));
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !finite(&h_direct) || !h_tx.values().iter().all(finite) || !h_rx.values().iter().all(finite) {
            return Err(Error::invalid("channel", "coefficients must be finite"));
        }
        Ok(LinkScenario {
            h_direct,
            h_tx,
            h_rx,
            noise_var,
            symbol_energy,
            rng_seed,
        })
    }

    /// I.i.d. CN(0, 1) Tx-RIS and RIS-Rx coefficients (and direct path when
    /// `with_direct`), drawn from the seed's channel stream.
    pub fn seeded(
        rows: usize,
        cols: usize,
        noise_var: f64,
        symbol_energy: f64,
        seed: u64,
        with_direct: bool,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("array size", "need at least one element"));
        }
        let mut rng = rng_for(seed, CHANNEL_STREAM);
        let h_tx = Grid::from_fn(rows, cols, |_, _| complex_gaussian(&mut rng, 1.0));
        let h_rx = Grid::from_fn(rows, cols, |_, _| complex_gaussian(&mut rng, 1.0));
        let h_direct = if with_direct {
            complex_gaussian(&mut rng, 1.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        LinkScenario::new(h_direct, h_tx, h_rx, noise_var, symbol_energy, seed)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.h_tx.shape()
    }

    pub fn with_noise_var(mut self, noise_var: f64) -> Result<Self> {
        if !(noise_var.is_finite() && noise_var >= 0.0) {
            return Err(Error::invalid(
                "noise_var",
                format!("must be >= 0, got {noise_var}"),
            ));
        }
        self.noise_var = noise_var;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    /// Cascaded coefficient `h_t h_r` per element.
    pub fn cascade(&self) -> Grid<Complex64> {
        Grid::from_fn(self.h_tx.rows(), self.h_tx.cols(), |r, c| {
            self.h_tx[(r, c)] * self.h_rx[(r, c)]
        })
    }
}

/// QPSK symbols with Gray labels: `00 -> +1+j`, `01 -> -1+j`, `11 -> -1-j`,
/// `10 -> +1-j`, scaled by `sqrt(E_s)`.
pub fn qpsk_modulate(bits: &[u8], symbol_energy: f64) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::invalid(
            "bits",
            format!("QPSK needs an even bit count, got {}", bits.len()),
        ));
    }
    if !(symbol_energy > 0.0) {
        return Err(Error::invalid(
            "symbol_energy",
            format!("must be > 0, got {symbol_energy}"),
        ));
    }
    let scale = symbol_energy.sqrt();
    bits.chunks_exact(2)
        .enumerate()
        .map(|(k, pair)| {
            let level = |b: u8| match b {
                0 => Ok(1.0),
                1 => Ok(-1.0),
                other => Err(Error::invalid(
                    format!("bit {}", 2 * k),
                    format!("must be 0 or 1, got {other}"),
                )),
            };
            Ok(Complex64::new(scale * level(pair[1])?, scale * level(pair[0])?))
        })
        .collect()
}

/// Minimum-distance QPSK decision, returned as the Gray label.
pub fn detect_bits(symbol: Complex64) -> [u8; 2] {
    [u8::from(symbol.im < 0.0), u8::from(symbol.re < 0.0)]
}

/// Cluster index 0..4 (the Gray label read as a binary number).
pub fn cluster_index(symbol: Complex64) -> usize {
    let [b0, b1] = detect_bits(symbol);
    2 * b0 as usize + b1 as usize
}

pub fn cluster_indices(symbols: &[Complex64]) -> Vec<usize> {
    symbols.iter().map(|&s| cluster_index(s)).collect()
}

/// `h_d + sum h_t exp(j psi) h_r` with `psi` in {0, pi}.
pub fn effective_channel(scenario: &LinkScenario, coding: &CodingMatrix) -> Result<Complex64> {
    let (rows, cols) = scenario.shape();
    coding.states().ensure_shape(rows, cols)?;
    let mut sum = scenario.h_direct;
    for r in 0..rows {
        for c in 0..cols {
            sum += scenario.h_tx[(r, c)] * scenario.h_rx[(r, c)] * coding.states()[(r, c)].sign();
        }
    }
    Ok(sum)
}

/// 1-bit codebook aligning each cascaded term with the direct path (or with
/// the real axis when there is none).
pub fn cophase_codebook(scenario: &LinkScenario) -> Result<CodingMatrix> {
    let reference = if scenario.h_direct == Complex64::new(0.0, 0.0) {
        0.0
    } else {
        scenario.h_direct.arg()
    };
    let ideal = scenario.cascade().map(|g| reference - g.arg());
    quantize_1bit(&PhaseProfile::new(ideal)?)
}

/// `r_k = h s_k + n_k` with CN(0, noise_var) noise from the scenario's noise stream.
pub fn transmit(scenario: &LinkScenario, symbols: &[Complex64], h: Complex64) -> Result<Vec<Complex64>> {
    if !(h.re.is_finite() && h.im.is_finite()) {
        return Err(Error::invalid("channel", format!("non-finite gain {h}")));
    }
    let mut rng = rng_for(scenario.rng_seed, NOISE_STREAM);
    Ok(symbols
        .iter()
        .map(|&s| {
            let n = complex_gaussian(&mut rng, scenario.noise_var);
            h * s + n
        })
        .collect())
}

/// Zero-forcing equaliser `r_k / h`.
pub fn equalize(received: &[Complex64], h_eff: Complex64) -> Result<Vec<Complex64>> {
    if h_eff.norm_sqr() == 0.0 {
        return Err(Error::domain("h_eff", "channel is in deep fade (h_eff = 0)"));
    }
    Ok(received.iter().map(|&r| r / h_eff).collect())
}

const CLUSTER_NAMES: [&str; 4] = ["00 (+1+j)", "01 (-1+j)", "10 (+1-j)", "11 (-1-j)"];

/// Minimum pairwise distance between the four cluster centroids.
pub fn min_constellation_distance(equalized: &[Complex64], assignments: &[usize]) -> Result<f64> {
    if equalized.len() != assignments.len() {
        return Err(Error::invalid(
            "assignments",
            format!(
                "length {} differs from {} symbols",
                assignments.len(),
                equalized.len()
            ),
        ));
    }
    let mut sums = [Complex64::new(0.0, 0.0); 4];
    let mut counts = [0usize; 4];
    for (&z, &a) in equalized.iter().zip(assignments) {
        if a >= 4 {
            return Err(Error::invalid("assignments", format!("cluster index {a} out of range")));
        }
        sums[a] += z;
        counts[a] += 1;
    }
    if let Some(k) = counts.iter().position(|&n| n == 0) {
        return Err(Error::domain(
            format!("cluster {}", CLUSTER_NAMES[k]),
            "no symbols assigned",
        ));
    }
    let centroids: Vec<Complex64> = sums
        .iter()
        .zip(counts)
        .map(|(s, n)| s / n as f64)
        .collect();
    let mut best = f64::INFINITY;
    for i in 0..4 {
        for j in i + 1..4 {
            best = best.min((centroids[i] - centroids[j]).norm());
        }
    }
    Ok(best)
}

/// Fraction of symbols whose minimum-distance decision differs from the reference.
pub fn symbol_error_rate(equalized: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    if equalized.len() != reference.len() {
        return Err(Error::invalid(
            "reference symbols",
            format!(
                "length {} differs from {} equalised symbols",
                reference.len(),
                equalized.len()
            ),
        ));
    }
    if equalized.is_empty() {
        return Err(Error::invalid("symbols", "empty stream"));
    }
    let errors = equalized
        .iter()
        .zip(reference)
        .filter(|(&e, &r)| detect_bits(e) != detect_bits(r))
        .count();
    Ok(errors as f64 / equalized.len() as f64)
}

/// Uniform random payload of `2 * n_symbols` bits from the seed's bit stream.
pub fn random_bits(seed: u64, n_symbols: usize) -> Vec<u8> {
    let mut rng = rng_for(seed, BITS_STREAM);
    (0..2 * n_symbols).map(|_| rng.gen_range(0..=1u8)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStream {
    pub bits: Vec<u8>,
    pub symbols: Vec<Complex64>,
    pub received: Vec<Complex64>,
    pub equalized: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkRun {
    pub stream: SymbolStream,
    pub h_eff: Complex64,
    pub ser: f64,
    pub d_min: f64,
}

/// End-to-end run through the RIS with `coding`, or over the direct path
/// alone when `coding` is `None`.
pub fn simulate(scenario: &LinkScenario, coding: Option<&CodingMatrix>, n_symbols: usize) -> Result<LinkRun> {
    let h_eff = match coding {
        Some(c) => effective_channel(scenario, c)?,
        None => scenario.h_direct,
    };
    let bits = random_bits(scenario.rng_seed, n_symbols);
    let symbols = qpsk_modulate(&bits, scenario.symbol_energy)?;
    let received = transmit(scenario, &symbols, h_eff)?;
    let equalized = equalize(&received, h_eff)?;
    let ser = symbol_error_rate(&equalized, &symbols)?;
    let d_min = min_constellation_distance(&equalized, &cluster_indices(&symbols))?;
    Ok(LinkRun {
        stream: SymbolStream {
            bits,
            symbols,
            received,
            equalized,
        },
        h_eff,
        ser,
        d_min,
    })
}

impl LinkRun {
    /// `index,tx_re,tx_im,rx_re,rx_im,eq_re,eq_im,detected_bits`.
    pub fn constellation_csv(&self) -> String {
        let s = &self.stream;
        let mut out = String::from("index,tx_re,tx_im,rx_re,rx_im,eq_re,eq_im,detected_bits\n");
        for k in 0..s.symbols.len() {
            let [b0, b1] = detect_bits(s.equalized[k]);
            out.push_str(&format!(
                "{k},{},{},{},{},{},{},{b0}{b1}\n",
                s.symbols[k].re,
                s.symbols[k].im,
                s.received[k].re,
                s.received[k].im,
                s.equalized[k].re,
                s.equalized[k].im
            ));
        }
        out
    }

    pub fn summary(&self, scenario: &LinkScenario) -> LinkSummary {
        LinkSummary {
            ser: self.ser,
            d_min: self.d_min,
            h_eff_re: self.h_eff.re,
            h_eff_im: self.h_eff.im,
            noise_var: scenario.noise_var,
            seed: scenario.rng_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSummary {
    pub ser: f64,
    pub d_min: f64,
    pub h_eff_re: f64,
    pub h_eff_im: f64,
    pub noise_var: f64,
    pub seed: u64,
}

/// JSON scenario file; complex numbers are `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub h_direct: [f64; 2],
    pub h_tx: Vec<Vec<[f64; 2]>>,
    pub h_rx: Vec<Vec<[f64; 2]>>,
    pub noise_var: f64,
    pub symbol_energy: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl ScenarioFile {
    pub fn scenario(&self) -> Result<LinkScenario> {
        let to_grid = |rows: &Vec<Vec<[f64; 2]>>| {
            Grid::from_rows(
                rows.iter()
                    .map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
                    .collect(),
            )
        };
        LinkScenario::new(
            Complex64::new(self.h_direct[0], self.h_direct[1]),
            to_grid(&self.h_tx)?,
            to_grid(&self.h_rx)?,
            self.noise_var,
            self.symbol_energy,
            self.rng_seed,
        )
    }

    pub fn from_scenario(s: &LinkScenario) -> Self {
        let rows = |g: &Grid<Complex64>| {
            g.row_iter()
                .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
                .collect()
        };
        ScenarioFile {
            h_direct: [s.h_direct.re, s.h_direct.im],
            h_tx: rows(&s.h_tx),
            h_rx: rows(&s.h_rx),
            noise_var: s.noise_var,
            symbol_energy: s.symbol_energy,
            rng_seed: s.rng_seed,
        }
    }
}

/// All-zero codebook of the scenario's shape.
pub fn all_zero_codebook(scenario: &LinkScenario) -> CodingMatrix {
    let (rows, cols) = scenario.shape();
    CodingMatrix::uniform(rows, cols, PhaseState::Zero)
}
