//! Domain types: array/waveform configuration, targets, grid maps and the
//! sparse scene tensor.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{RadarError, Result};
use crate::tensor::Tensor3;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Relative tolerance (in bins) for deciding that a parameter sits on a grid point.
pub const ON_GRID_TOL: f64 = 1e-9;

/// Full array/waveform geometry plus every thinning choice.
///
/// Antenna positions are integers in units of half a wavelength, so the
/// virtual element index of the pair `(m, q)` is `tx_positions[m] + rx_positions[q]`.
/// Selected Fourier coefficients `k` lie in `[-N/2, N/2 - 1]` and land on the
/// global frequency grid at `k + f_m * pri`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    pub wavelength: f64,
    pub full_tx_count: usize,
    pub full_rx_count: usize,
    pub tx_count: usize,
    pub rx_count: usize,
    pub tx_positions: Vec<usize>,
    pub rx_positions: Vec<usize>,
    pub pri: f64,
    pub pulse_count: usize,
    /// `tx_count` rows of `pulse_count` 0/1 flags.
    pub pulse_schedule: Vec<Vec<u8>>,
    pub coeffs_per_channel: usize,
    pub fourier_bins: usize,
    pub tx_baseband_freqs: Vec<f64>,
    pub freq_index_set: Vec<i64>,
    pub carrier_freq: f64,
    /// Drop the `f_m * wavelength / c` term from the spatial phase.
    #[serde(default)]
    pub narrowband: bool,
}

impl RadarConfig {
    /// The desk-scale reference geometry: `TN = 16`, `TR = 20`, `P = 16`,
    /// two transmitters at `{0, 1}` and five receivers at `{2, 5, 11, 13, 15}`
    /// (half-wavelength units), four Fourier coefficients and four pulses per
    /// transmitter.
    pub fn reference() -> Self {
        let pri = 1.6e-5;
        let wavelength = 0.03;
        let schedule = schedule_from_pulses(16, &[vec![0, 1, 11, 15], vec![2, 3, 4, 7]]);
        Self {
            wavelength,
            full_tx_count: 2,
            full_rx_count: 10,
            tx_count: 2,
            rx_count: 5,
            tx_positions: vec![0, 1],
            rx_positions: vec![2, 5, 11, 13, 15],
            pri,
            pulse_count: 16,
            pulse_schedule: schedule,
            coeffs_per_channel: 4,
            fourier_bins: 8,
            tx_baseband_freqs: vec![4.0 / pri, 12.0 / pri],
            freq_index_set: vec![-4, -2, -1, 3],
            carrier_freq: SPEED_OF_LIGHT / wavelength,
            narrowband: true,
        }
    }

    /// The reference grid with nothing thinned: transmitters at `{0, 10}`, all
    /// ten receivers, all eight Fourier coefficients and every pulse, so the
    /// index set is the largest one the geometry allows.
    pub fn fully_sampled() -> Self {
        let base = Self::reference();
        Self {
            rx_count: 10,
            tx_positions: vec![0, 10],
            rx_positions: (0..10).collect(),
            pulse_schedule: vec![vec![1; 16]; 2],
            coeffs_per_channel: 8,
            freq_index_set: (-4..4).collect(),
            ..base
        }
    }

    /// Copy of this configuration with a new pulse schedule given as pulse
    /// index lists, one per transmitter.
    pub fn with_pulses(&self, pulses: &[Vec<usize>]) -> Result<Self> {
        let mut out = self.clone();
        out.pulse_schedule = schedule_from_pulses(self.pulse_count, pulses);
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(RadarError::Config(msg));
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return err(format!("wavelength must be positive, got {}", self.wavelength));
        }
        if !(self.pri.is_finite() && self.pri > 0.0) {
            return err(format!("pri must be positive, got {}", self.pri));
        }
        if self.full_tx_count == 0 || self.full_rx_count == 0 {
            return err("full array sizes must be at least 1".into());
        }
        if self.fourier_bins == 0 || self.pulse_count == 0 {
            return err("fourier_bins and pulse_count must be at least 1".into());
        }
        if self.tx_count == 0 || self.tx_count > self.full_tx_count {
            return err(format!(
                "tx_count {} must lie in [1, {}]",
                self.tx_count, self.full_tx_count
            ));
        }
        if self.rx_count == 0 || self.rx_count > self.full_rx_count {
            return err(format!(
                "rx_count {} must lie in [1, {}]",
                self.rx_count, self.full_rx_count
            ));
        }
        if self.tx_positions.len() != self.tx_count {
            return err(format!(
                "expected {} tx positions, got {}",
                self.tx_count,
                self.tx_positions.len()
            ));
        }
        if self.rx_positions.len() != self.rx_count {
            return err(format!(
                "expected {} rx positions, got {}",
                self.rx_count,
                self.rx_positions.len()
            ));
        }
        if self.tx_baseband_freqs.len() != self.tx_count {
            return err(format!(
                "expected {} baseband frequencies, got {}",
                self.tx_count,
                self.tx_baseband_freqs.len()
            ));
        }

        let tr = self.doa_bins();
        for (name, positions) in [("tx", &self.tx_positions), ("rx", &self.rx_positions)] {
            let mut sorted = positions.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return err(format!("duplicate {name} position"));
            }
        }
        for &xi in &self.tx_positions {
            for &zeta in &self.rx_positions {
                let v = xi + zeta;
                if v >= tr {
                    return err(format!("virtual element {v} outside [0, {}]", tr - 1));
                }
            }
        }

        if self.pulse_schedule.len() != self.tx_count {
            return err(format!(
                "pulse schedule has {} rows, expected {}",
                self.pulse_schedule.len(),
                self.tx_count
            ));
        }
        for (m, row) in self.pulse_schedule.iter().enumerate() {
            if row.len() != self.pulse_count {
                return err(format!(
                    "pulse schedule row {m} has {} entries, expected {}",
                    row.len(),
                    self.pulse_count
                ));
            }
            if row.iter().any(|&d| d > 1) {
                return err(format!("pulse schedule row {m} is not binary"));
            }
        }
        if self.total_pulses() == 0 {
            return err("no transmitter emits any pulse".into());
        }

        if self.freq_index_set.len() != self.coeffs_per_channel {
            return err(format!(
                "freq_index_set has {} entries, expected {}",
                self.freq_index_set.len(),
                self.coeffs_per_channel
            ));
        }
        if self.coeffs_per_channel == 0 || self.coeffs_per_channel > self.fourier_bins {
            return err(format!(
                "coeffs_per_channel {} must lie in [1, {}]",
                self.coeffs_per_channel, self.fourier_bins
            ));
        }
        let half = (self.fourier_bins / 2) as i64;
        let (lo, hi) = (-half, self.fourier_bins as i64 - half - 1);
        let mut ks = self.freq_index_set.clone();
        ks.sort_unstable();
        ks.dedup();
        if ks.len() != self.freq_index_set.len() {
            return err("freq_index_set contains duplicates".into());
        }
        if let Some(k) = ks.iter().find(|&&k| k < lo || k > hi) {
            return err(format!("coefficient index {k} outside [{lo}, {hi}]"));
        }

        let tn = self.delay_bins() as i64;
        for (m, &fm) in self.tx_baseband_freqs.iter().enumerate() {
            let shift = fm * self.pri;
            if !shift.is_finite() || (shift - shift.round()).abs() > 1e-6 {
                return err(format!(
                    "transmitter {m}: f_m * pri = {shift} is not an integer"
                ));
            }
            for &k in &ks {
                let g = k + shift.round() as i64;
                if g < 0 || g >= tn {
                    return err(format!(
                        "transmitter {m}: coefficient {k} maps to global bin {g} outside [0, {}]",
                        tn - 1
                    ));
                }
            }
        }

        if !(self.carrier_freq.is_finite() && self.carrier_freq > 0.0) {
            return err("carrier_freq must be positive".into());
        }
        let fc = SPEED_OF_LIGHT / self.wavelength;
        if ((self.carrier_freq - fc) / fc).abs() > 1e-6 {
            return err(format!(
                "carrier_freq {} inconsistent with wavelength (expected {fc})",
                self.carrier_freq
            ));
        }
        Ok(())
    }

    /// `TN`, the size of the delay grid.
    pub fn delay_bins(&self) -> usize {
        self.full_tx_count * self.fourier_bins
    }

    /// `TR`, the size of the virtual array / DoA grid.
    pub fn doa_bins(&self) -> usize {
        self.full_tx_count * self.full_rx_count
    }

    /// `P`, the size of the Doppler grid.
    pub fn doppler_bins(&self) -> usize {
        self.pulse_count
    }

    pub fn grid_shape(&self) -> [usize; 3] {
        [self.delay_bins(), self.doa_bins(), self.doppler_bins()]
    }

    pub fn pulses_for(&self, tx: usize) -> Vec<usize> {
        self.pulse_schedule[tx]
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != 0)
            .map(|(p, _)| p)
            .collect()
    }

    /// `P_m` for every transmitter.
    pub fn pulses_per_tx(&self) -> Vec<usize> {
        self.pulse_schedule
            .iter()
            .map(|row| row.iter().filter(|&&d| d != 0).count())
            .collect()
    }

    pub fn total_pulses(&self) -> usize {
        self.pulses_per_tx().iter().sum()
    }

    /// Integer shift `f_m * pri` of transmitter `tx` on the global frequency grid.
    pub fn freq_shift(&self, tx: usize) -> i64 {
        (self.tx_baseband_freqs[tx] * self.pri).round() as i64
    }

    pub fn global_freq_index(&self, tx: usize, k: i64) -> usize {
        (k + self.freq_shift(tx)) as usize
    }

    pub fn virtual_index(&self, tx: usize, rx: usize) -> usize {
        self.tx_positions[tx] + self.rx_positions[rx]
    }

    /// Spatial phase coefficient of the pair `(tx, rx)`: the virtual element
    /// position in wavelengths, scaled by `1 + f_m * wavelength / c` unless
    /// the narrowband flag is set.
    pub fn beta(&self, tx: usize, rx: usize) -> f64 {
        let position = self.virtual_index(tx, rx) as f64 / 2.0;
        if self.narrowband {
            position
        } else {
            position * (1.0 + self.tx_baseband_freqs[tx] * self.wavelength / SPEED_OF_LIGHT)
        }
    }

    pub fn grid(&self) -> GridMaps {
        GridMaps {
            pri: self.pri,
            delay_bins: self.delay_bins(),
            doa_bins: self.doa_bins(),
            doppler_bins: self.doppler_bins(),
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Builds a 0/1 schedule from per-transmitter pulse index lists.
pub fn schedule_from_pulses(pulse_count: usize, pulses: &[Vec<usize>]) -> Vec<Vec<u8>> {
    pulses
        .iter()
        .map(|list| {
            let mut row = vec![0u8; pulse_count];
            for &p in list {
                if p < pulse_count {
                    row[p] = 1;
                }
            }
            row
        })
        .collect()
}

/// A Swerling-0 point target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "TargetRecord", into = "TargetRecord")]
pub struct Target {
    pub amplitude: Complex64,
    /// Round-trip delay in seconds.
    pub delay: f64,
    /// Sine of the azimuth.
    pub doa: f64,
    /// Doppler frequency in Hz.
    pub doppler: f64,
}

#[derive(Serialize, Deserialize)]
struct TargetRecord {
    amplitude_re: f64,
    amplitude_im: f64,
    delay_s: f64,
    doa: f64,
    doppler_hz: f64,
}

impl From<TargetRecord> for Target {
    fn from(r: TargetRecord) -> Self {
        Target {
            amplitude: Complex64::new(r.amplitude_re, r.amplitude_im),
            delay: r.delay_s,
            doa: r.doa,
            doppler: r.doppler_hz,
        }
    }
}

impl From<Target> for TargetRecord {
    fn from(t: Target) -> Self {
        TargetRecord {
            amplitude_re: t.amplitude.re,
            amplitude_im: t.amplitude.im,
            delay_s: t.delay,
            doa: t.doa,
            doppler_hz: t.doppler,
        }
    }
}

impl Target {
    pub fn new(amplitude: Complex64, delay: f64, doa: f64, doppler: f64) -> Self {
        Self {
            amplitude,
            delay,
            doa,
            doppler,
        }
    }

    /// Target sitting exactly on grid cell `[n, j, p]`.
    pub fn on_grid(config: &RadarConfig, cell: [usize; 3], amplitude: Complex64) -> Self {
        let grid = config.grid();
        Self::new(
            amplitude,
            grid.delay(cell[0]),
            grid.doa(cell[1]),
            grid.doppler(cell[2]),
        )
    }

    pub fn validate(&self, config: &RadarConfig) -> Result<()> {
        let tau = config.pri;
        let ok = self.amplitude.re.is_finite()
            && self.amplitude.im.is_finite()
            && self.delay >= 0.0
            && self.delay < tau
            && self.doa.abs() <= 1.0
            && self.doppler.abs() <= 0.5 / tau * (1.0 + 1e-12);
        if ok {
            Ok(())
        } else {
            Err(RadarError::Argument(format!(
                "target parameters out of range: delay {} s, doa {}, doppler {} Hz",
                self.delay, self.doa, self.doppler
            )))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TargetScene {
    pub targets: Vec<Target>,
}

impl TargetScene {
    pub fn new(targets: Vec<Target>) -> Self {
        Self { targets }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn validate(&self, config: &RadarConfig) -> Result<()> {
        self.targets.iter().try_for_each(|t| t.validate(config))
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Bijections between grid indices and physical parameter values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMaps {
    pub pri: f64,
    pub delay_bins: usize,
    pub doa_bins: usize,
    pub doppler_bins: usize,
}

impl GridMaps {
    pub fn delay_bin_width(&self) -> f64 {
        self.pri / self.delay_bins as f64
    }

    pub fn doa_bin_width(&self) -> f64 {
        2.0 / self.doa_bins as f64
    }

    pub fn doppler_bin_width(&self) -> f64 {
        1.0 / (self.doppler_bins as f64 * self.pri)
    }

    pub fn delay(&self, n: usize) -> f64 {
        self.delay_bin_width() * n as f64
    }

    pub fn doa(&self, j: usize) -> f64 {
        -1.0 + self.doa_bin_width() * j as f64
    }

    /// Doppler of bin `p`, wrapped into `[-1/(2 pri), 1/(2 pri))`.
    pub fn doppler(&self, p: usize) -> f64 {
        let p = p as i64;
        let bins = self.doppler_bins as i64;
        let signed = if 2 * p >= bins { p - bins } else { p };
        signed as f64 * self.doppler_bin_width()
    }

    /// Fractional delay bin, in `[0, TN)` for in-range delays.
    pub fn delay_position(&self, delay: f64) -> f64 {
        delay / self.delay_bin_width()
    }

    pub fn doa_position(&self, doa: f64) -> f64 {
        (doa + 1.0) / self.doa_bin_width()
    }

    /// Fractional Doppler bin reduced modulo `P` into `[0, P)`.
    pub fn doppler_position(&self, doppler: f64) -> f64 {
        (doppler / self.doppler_bin_width()).rem_euclid(self.doppler_bins as f64)
    }

    /// Grid cell of a parameter triple when every coordinate is on the grid.
    pub fn cell_of(&self, target: &Target) -> std::result::Result<[usize; 3], String> {
        let exact = |pos: f64, bins: usize, what: &str| {
            let r = pos.round();
            if (pos - r).abs() > ON_GRID_TOL * bins.max(1) as f64 {
                return Err(format!("{what} sits at fractional bin {pos}"));
            }
            let idx = (r as i64).rem_euclid(bins as i64) as usize;
            Ok(idx)
        };
        let n = exact(self.delay_position(target.delay), self.delay_bins, "delay")?;
        let j = exact(self.doa_position(target.doa), self.doa_bins, "doa")?;
        let p = exact(
            self.doppler_position(target.doppler),
            self.doppler_bins,
            "doppler",
        )?;
        Ok([n, j, p])
    }
}

/// The `TN x TR x P` unknown with a handful of nonzero cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSceneTensor {
    pub shape: [usize; 3],
    pub support: Vec<[usize; 3]>,
    pub amplitudes: Vec<Complex64>,
}

impl SparseSceneTensor {
    pub fn new(
        shape: [usize; 3],
        support: Vec<[usize; 3]>,
        amplitudes: Vec<Complex64>,
    ) -> Result<Self> {
        if support.len() != amplitudes.len() {
            return Err(RadarError::Shape(format!(
                "{} support triples but {} amplitudes",
                support.len(),
                amplitudes.len()
            )));
        }
        for (i, s) in support.iter().enumerate() {
            if (0..3).any(|d| s[d] >= shape[d]) {
                return Err(RadarError::Index(format!(
                    "triple {s:?} outside shape {shape:?}"
                )));
            }
            if support[..i].contains(s) {
                return Err(RadarError::Argument(format!("duplicate support triple {s:?}")));
            }
        }
        Ok(Self {
            shape,
            support,
            amplitudes,
        })
    }

    pub fn nnz(&self) -> usize {
        self.support.len()
    }

    pub fn to_dense(&self) -> Tensor3 {
        let mut t = Tensor3::zeros(self.shape);
        for (s, &a) in self.support.iter().zip(&self.amplitudes) {
            t[*s] += a;
        }
        t
    }
}
