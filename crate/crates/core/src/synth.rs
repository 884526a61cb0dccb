//! Observation index sets, measurement synthesis and noise injection.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RadarError, Result};
use crate::model::{RadarConfig, SparseSceneTensor, TargetScene};
use crate::tensor::Tensor3;

/// Which transmitter, receiver and selected coefficient produced an observed triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub tx: usize,
    pub rx: usize,
    pub coeff: i64,
}

/// The observed triples `Γ` (sorted lexicographically) and their projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSets {
    pub shape: [usize; 3],
    pub gamma: Vec<[usize; 3]>,
    pub origins: Vec<Origin>,
    pub omega: Vec<usize>,
    pub lambda: Vec<usize>,
    pub pi: Vec<usize>,
    pub per_tx_pulses: Vec<Vec<usize>>,
}

impl IndexSets {
    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// Linear index `g·TR·P + v·P + p` of each observed triple.
    pub fn linear_indices(&self) -> Vec<usize> {
        let [_, tr, p] = self.shape;
        self.gamma
            .iter()
            .map(|t| t[0] * tr * p + t[1] * p + t[2])
            .collect()
    }

    /// Values at the observed triples of a full-size tensor.
    pub fn restrict(&self, full: &Tensor3) -> Result<Vec<Complex64>> {
        if full.dims() != self.shape {
            return Err(RadarError::Shape(format!(
                "tensor {:?} does not match observation grid {:?}",
                full.dims(),
                self.shape
            )));
        }
        Ok(self.gamma.iter().map(|&t| full[t]).collect())
    }

    /// Full-size tensor holding `values` on `Γ` and zeros elsewhere.
    pub fn embed(&self, values: &[Complex64]) -> Result<Tensor3> {
        if values.len() != self.gamma.len() {
            return Err(RadarError::Shape(format!(
                "{} values for {} observed triples",
                values.len(),
                self.gamma.len()
            )));
        }
        let mut out = Tensor3::zeros(self.shape);
        for (&t, &v) in self.gamma.iter().zip(values) {
            out[t] = v;
        }
        Ok(out)
    }
}

/// Runs the transmitter / receiver / pulse / coefficient loop and collects
/// every triple a transmitter actually illuminates.
pub fn build_index_sets(config: &RadarConfig) -> Result<IndexSets> {
    config.validate()?;
    let mut gamma: BTreeMap<[usize; 3], Origin> = BTreeMap::new();
    for m in 0..config.tx_count {
        for q in 0..config.rx_count {
            for p in 0..config.pulse_count {
                if config.pulse_schedule[m][p] == 0 {
                    continue;
                }
                // flat spectra: |H_m| = 1 on every selected coefficient
                for &k in &config.freq_index_set {
                    let triple = [config.global_freq_index(m, k), config.virtual_index(m, q), p];
                    let origin = Origin { tx: m, rx: q, coeff: k };
                    if let Some(prev) = gamma.insert(triple, origin) {
                        return Err(RadarError::Ambiguous {
                            first: prev.tx,
                            second: m,
                            triple,
                        });
                    }
                }
            }
        }
    }
    let mut omega: Vec<usize> = gamma.keys().map(|t| t[0]).collect();
    let mut lambda: Vec<usize> = gamma.keys().map(|t| t[1]).collect();
    let mut pi: Vec<usize> = gamma.keys().map(|t| t[2]).collect();
    for s in [&mut omega, &mut lambda, &mut pi] {
        s.sort_unstable();
        s.dedup();
    }
    let (gamma, origins) = gamma.into_iter().unzip();
    Ok(IndexSets {
        shape: config.grid_shape(),
        gamma,
        origins,
        omega,
        lambda,
        pi,
        per_tx_pulses: (0..config.tx_count).map(|m| config.pulses_for(m)).collect(),
    })
}

/// Observed Fourier coefficients on `Γ`, in the order of `IndexSets::gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialMeasurementTensor {
    pub shape: [usize; 3],
    pub indices: Vec<[usize; 3]>,
    pub values: Vec<Complex64>,
    /// Per-entry complex noise variance that has been applied (0 when noiseless).
    pub noise_variance: f64,
}

/// One `(k, v, p, re, im)` row of the flat file format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub k: usize,
    pub v: usize,
    pub p: usize,
    pub re: f64,
    pub im: f64,
}

#[derive(Serialize, Deserialize)]
struct MeasurementFile {
    shape: [usize; 3],
    noise_variance: f64,
    entries: Vec<MeasurementRow>,
}

impl PartialMeasurementTensor {
    pub fn zeros(sets: &IndexSets) -> Self {
        Self {
            shape: sets.shape,
            indices: sets.gamma.clone(),
            values: vec![Complex64::new(0.0, 0.0); sets.len()],
            noise_variance: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Checks that the entries are keyed exactly by `Γ`.
    pub fn check_against(&self, sets: &IndexSets) -> Result<()> {
        if self.shape != sets.shape || self.indices != sets.gamma {
            return Err(RadarError::Shape(
                "measurement entries do not match the observation index set".into(),
            ));
        }
        Ok(())
    }

    pub fn rows(&self) -> Vec<MeasurementRow> {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(t, z)| MeasurementRow {
                k: t[0],
                v: t[1],
                p: t[2],
                re: z.re,
                im: z.im,
            })
            .collect()
    }

    fn from_rows(shape: [usize; 3], noise_variance: f64, rows: Vec<MeasurementRow>) -> Result<Self> {
        let mut rows = rows;
        rows.sort_by_key(|r| [r.k, r.v, r.p]);
        if rows.windows(2).any(|w| [w[0].k, w[0].v, w[0].p] == [w[1].k, w[1].v, w[1].p]) {
            return Err(RadarError::Argument("duplicate measurement triple".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.k >= shape[0] || r.v >= shape[1] || r.p >= shape[2]) {
            return Err(RadarError::Index(format!(
                "measurement triple ({}, {}, {}) outside grid {shape:?}",
                r.k, r.v, r.p
            )));
        }
        Ok(Self {
            shape,
            indices: rows.iter().map(|r| [r.k, r.v, r.p]).collect(),
            values: rows.iter().map(|r| Complex64::new(r.re, r.im)).collect(),
            noise_variance,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let file = MeasurementFile {
            shape: self.shape,
            noise_variance: self.noise_variance,
            entries: self.rows(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MeasurementFile = serde_json::from_str(text)?;
        Self::from_rows(file.shape, file.noise_variance, file.entries)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV row format; the grid shape and noise level come from the caller.
    pub fn read_csv<R: std::io::Read>(input: R, shape: [usize; 3], noise_variance: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<MeasurementRow>, _>>()?;
        Self::from_rows(shape, noise_variance, rows)
    }

    /// Writes JSON, or CSV when the path ends in `.csv`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e == "csv") {
            self.write_csv(std::fs::File::create(path)?)
        } else {
            Ok(std::fs::write(path, self.to_json()?)?)
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Evaluates the continuous-parameter echo model at every observed triple:
/// `Σ_l α_l e^{j2π β_mq ϑ_l} e^{-j2π k τ_l/τ} e^{-j2π f_m τ_l} e^{-j2π f_l^D p τ}`.
pub fn synthesize(scene: &TargetScene, config: &RadarConfig, sets: &IndexSets) -> Result<PartialMeasurementTensor> {
    scene.validate(config)?;
    if sets.shape != config.grid_shape() {
        return Err(RadarError::Shape(format!(
            "index sets built for grid {:?}, config grid is {:?}",
            sets.shape,
            config.grid_shape()
        )));
    }
    let tau = config.pri;
    let values = sets
        .gamma
        .iter()
        .zip(&sets.origins)
        .map(|(t, o)| {
            let beta = config.beta(o.tx, o.rx);
            let fm = config.tx_baseband_freqs[o.tx];
            let p = t[2] as f64;
            scene
                .targets
                .iter()
                .map(|tg| {
                    let phase = 2.0 * PI * beta * tg.doa
                        - 2.0 * PI * o.coeff as f64 * tg.delay / tau
                        - 2.0 * PI * fm * tg.delay
                        - 2.0 * PI * tg.doppler * p * tau;
                    tg.amplitude * Complex64::from_polar(1.0, phase)
                })
                .sum()
        })
        .collect();
    Ok(PartialMeasurementTensor {
        shape: sets.shape,
        indices: sets.gamma.clone(),
        values,
        noise_variance: 0.0,
    })
}

/// Sparse grid tensor of an all-on-grid scene. Targets on a shared cell add up.
pub fn scene_to_tensor(scene: &TargetScene, config: &RadarConfig) -> Result<SparseSceneTensor> {
    scene.validate(config)?;
    let grid = config.grid();
    let mut cells: Vec<[usize; 3]> = Vec::new();
    let mut amps: Vec<Complex64> = Vec::new();
    for (index, t) in scene.targets.iter().enumerate() {
        let cell = grid
            .cell_of(t)
            .map_err(|reason| RadarError::OffGrid { index, reason })?;
        match cells.iter().position(|c| *c == cell) {
            Some(i) => amps[i] += t.amplitude,
            None => {
                cells.push(cell);
                amps.push(t.amplitude);
            }
        }
    }
    SparseSceneTensor::new(config.grid_shape(), cells, amps)
}

/// Per-entry noise variance for a matched-filter SNR (linear), with flat unit spectra:
/// `σ² = (M K)² / (SNR · K Q Σ_m P_m)`.
pub fn noise_variance(config: &RadarConfig, snr_linear: f64) -> f64 {
    let mk = (config.tx_count * config.coeffs_per_channel) as f64;
    let denom = snr_linear * (config.coeffs_per_channel * config.rx_count * config.total_pulses()) as f64;
    mk * mk / denom
}

/// Adds circular complex Gaussian noise calibrated to `snr_db`.
/// `snr_db = +∞` is the noiseless sentinel.
///
/// The draw for a triple depends only on `seed` and the triple's position in
/// the full grid, so two schedules sharing a triple see the same noise there.
pub fn add_noise(
    z: &PartialMeasurementTensor,
    snr_db: f64,
    config: &RadarConfig,
    seed: u64,
) -> Result<PartialMeasurementTensor> {
    if snr_db == f64::INFINITY {
        return Ok(z.clone());
    }
    if !snr_db.is_finite() {
        return Err(RadarError::Argument(format!("snr_db must be finite or +inf, got {snr_db}")));
    }
    let sigma2 = noise_variance(config, 10f64.powf(snr_db / 10.0));
    let scale = (sigma2 / 2.0).sqrt();
    let [_, tr, p] = z.shape;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = z.clone();
    for (v, t) in out.values.iter_mut().zip(&z.indices) {
        let cell = (t[0] * tr + t[1]) * p + t[2];
        // four 32-bit words per cell
        rng.set_word_pos(4 * cell as u128);
        *v += standard_complex_normal(&mut rng) * scale;
    }
    out.noise_variance = z.noise_variance + sigma2;
    Ok(out)
}

/// Box-Muller pair: real and imaginary parts are independent `N(0, 1)`.
fn standard_complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    // u1 in (0, 1] keeps the logarithm finite
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64;
    let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    Complex64::from_polar((-2.0 * u1.ln()).sqrt(), 2.0 * PI * u2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{schedule_from_pulses, Target};
    use crate::tensor::{build_dictionaries, multilinear_product};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn tiny_config() -> RadarConfig {
        let pri = 1e-5;
        RadarConfig {
            wavelength: 0.03,
            full_tx_count: 1,
            full_rx_count: 4,
            tx_count: 1,
            rx_count: 1,
            tx_positions: vec![1],
            rx_positions: vec![2],
            pri,
            pulse_count: 1,
            pulse_schedule: vec![vec![1]],
            coeffs_per_channel: 1,
            fourier_bins: 4,
            tx_baseband_freqs: vec![2.0 / pri],
            freq_index_set: vec![-1],
            carrier_freq: crate::model::SPEED_OF_LIGHT / 0.03,
            narrowband: true,
        }
    }

    #[test]
    fn singleton_configuration_has_one_triple() {
        let sets = build_index_sets(&tiny_config()).unwrap();
        assert_eq!(sets.gamma, vec![[1, 3, 0]]);
        assert_eq!(sets.omega, vec![1]);
        assert_eq!(sets.lambda, vec![3]);
        assert_eq!(sets.pi, vec![0]);
    }

    #[test]
    fn reference_configuration_has_160_triples() {
        let cfg = RadarConfig::reference();
        let sets = build_index_sets(&cfg).unwrap();
        assert_eq!(sets.len(), 4 * 5 * 8);
        assert_eq!(sets.omega.len(), 8);
        assert_eq!(sets.lambda.len(), 10);
        assert_eq!(sets.pi.len(), 8);
        let lin = sets.linear_indices();
        assert!(lin.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn unused_pulse_is_absent() {
        let cfg = RadarConfig::reference()
            .with_pulses(&[vec![0, 1, 2], vec![1, 2, 4]])
            .unwrap();
        let sets = build_index_sets(&cfg).unwrap();
        assert_eq!(sets.pi, vec![0, 1, 2, 4]);
        assert!(!sets.gamma.iter().any(|t| t[2] == 3));
    }

    #[test]
    fn overlapping_transmitters_are_ambiguous() {
        // tx positions {0, 3} make virtual element 5 appear for both transmitters
        let mut cfg = RadarConfig::reference()
            .with_pulses(&[vec![0, 1], vec![0, 1]])
            .unwrap();
        cfg.tx_positions = vec![0, 3];
        // disjoint spectra keep the observations separable
        assert_eq!(build_index_sets(&cfg).unwrap().len(), 4 * 5 * 4);
        cfg.tx_baseband_freqs = vec![4.0 / cfg.pri, 4.0 / cfg.pri];
        assert!(matches!(
            build_index_sets(&cfg),
            Err(RadarError::Ambiguous { first: 0, second: 1, .. })
        ));
    }

    #[test]
    fn empty_scene_synthesizes_zeros() {
        let cfg = RadarConfig::reference();
        let sets = build_index_sets(&cfg).unwrap();
        let z = synthesize(&TargetScene::default(), &cfg, &sets).unwrap();
        assert_eq!(z.len(), 160);
        assert!(z.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn zero_parameter_target_gives_all_ones() {
        let cfg = RadarConfig::reference();
        let sets = build_index_sets(&cfg).unwrap();
        let scene = TargetScene::new(vec![Target::new(c(1.0, 0.0), 0.0, 0.0, 0.0)]);
        let z = synthesize(&scene, &cfg, &sets).unwrap();
        assert!(z.values.iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn on_grid_target_matches_multilinear_path() {
        let cfg = RadarConfig::reference();
        let sets = build_index_sets(&cfg).unwrap();
        let d = build_dictionaries(&cfg).unwrap();
        let scene = TargetScene::new(vec![Target::on_grid(&cfg, [3, 7, 2], c(2.0, 1.0))]);
        let z = synthesize(&scene, &cfg, &sets).unwrap();
        let x = scene_to_tensor(&scene, &cfg).unwrap().to_dense();
        let full = multilinear_product(&x, &d.delay, &d.steering, &d.doppler).unwrap();
        let oracle = sets.restrict(&full).unwrap();
        let err: f64 = z.values.iter().zip(&oracle).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 1e-10 * z.norm(), "err {err}");
    }

    #[test]
    fn scene_tensor_holds_amplitudes() {
        let cfg = RadarConfig::reference();
        let one = TargetScene::new(vec![Target::on_grid(&cfg, [3, 7, 2], c(2.0, 1.0))]);
        let x = scene_to_tensor(&one, &cfg).unwrap();
        assert_eq!(x.support, vec![[3, 7, 2]]);
        assert_eq!(x.amplitudes, vec![c(2.0, 1.0)]);

        let four = TargetScene::new(
            [[0, 0, 0], [3, 7, 2], [10, 4, 9], [15, 19, 15]]
                .iter()
                .map(|&cell| Target::on_grid(&cfg, cell, c(1.0, 0.0)))
                .collect(),
        );
        assert_eq!(scene_to_tensor(&four, &cfg).unwrap().nnz(), 4);
    }

    #[test]
    fn off_grid_target_is_rejected() {
        let cfg = RadarConfig::reference();
        let bin = cfg.pri / 16.0;
        let scene = TargetScene::new(vec![Target::new(c(1.0, 0.0), 1.5 * bin, 0.0, 0.0)]);
        assert!(matches!(
            scene_to_tensor(&scene, &cfg),
            Err(RadarError::OffGrid { index: 0, .. })
        ));
    }

    #[test]
    fn reference_noise_variance() {
        let cfg = RadarConfig::reference();
        for snr in [0.5, 1.0, 10.0] {
            let expect = 64.0 / (snr * 160.0);
            assert!((noise_variance(&cfg, snr) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn infinite_snr_leaves_data_untouched_and_nan_is_rejected() {
        let cfg = RadarConfig::reference();
        let sets = build_index_sets(&cfg).unwrap();
        let scene = TargetScene::new(vec![Target::on_grid(&cfg, [1, 2, 3], c(1.0, 0.0))]);
        let z = synthesize(&scene, &cfg, &sets).unwrap();
        assert_eq!(add_noise(&z, f64::INFINITY, &cfg, 1).unwrap(), z);
        assert!(matches!(add_noise(&z, f64::NAN, &cfg, 1), Err(RadarError::Argument(_))));
        assert!(add_noise(&z, f64::NEG_INFINITY, &cfg, 1).is_err());
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let cfg = RadarConfig::reference();
        let sets = build_index_sets(&cfg).unwrap();
        let z = PartialMeasurementTensor::zeros(&sets);
        let a = add_noise(&z, 3.0, &cfg, 42).unwrap();
        let b = add_noise(&z, 3.0, &cfg, 42).unwrap();
        let other = add_noise(&z, 3.0, &cfg, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, other);
    }

    #[test]
    fn empirical_noise_variance_matches_target() {
        let cfg = RadarConfig::reference();
        let sets = build_index_sets(&cfg).unwrap();
        let z = PartialMeasurementTensor::zeros(&sets);
        let snr_db = 0.0;
        let sigma2 = noise_variance(&cfg, 1.0);
        // 625 draws x 160 entries = 10^5 samples
        let mut acc = 0.0;
        let mut count = 0usize;
        for seed in 0..625 {
            let n = add_noise(&z, snr_db, &cfg, seed).unwrap();
            acc += n.values.iter().map(|v| v.norm_sqr()).sum::<f64>();
            count += n.len();
        }
        let empirical = acc / count as f64;
        assert!(((empirical - sigma2) / sigma2).abs() < 0.05, "{empirical} vs {sigma2}");
    }

    #[test]
    fn measurement_file_roundtrip() {
        let cfg = RadarConfig::reference();
        let sets = build_index_sets(&cfg).unwrap();
        let scene = TargetScene::new(vec![Target::on_grid(&cfg, [1, 2, 3], c(0.5, -1.0))]);
        let z = add_noise(&synthesize(&scene, &cfg, &sets).unwrap(), 10.0, &cfg, 5).unwrap();
        let back = PartialMeasurementTensor::from_json(&z.to_json().unwrap()).unwrap();
        assert_eq!(back, z);
        let mut buf = Vec::new();
        z.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k,v,p,re,im"));
        let back = PartialMeasurementTensor::read_csv(&buf[..], z.shape, z.noise_variance).unwrap();
        assert_eq!(back, z);
    }

    #[test]
    fn schedule_helper_marks_pulses() {
        assert_eq!(schedule_from_pulses(4, &[vec![0, 3]]), vec![vec![1, 0, 0, 1]]);
    }
}
