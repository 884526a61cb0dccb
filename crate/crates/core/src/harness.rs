//! Seeded Monte-Carlo sweeps over SNR, schedule and algorithm.
//!
//! Every trial draws its scene and noise seed from its own ChaCha stream
//! `(master_seed, trial)`, so results do not depend on how trials are spread
//! over worker threads. Per-trial outcomes are gathered in trial order and
//! summed afterwards.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{RadarError, Result};
use crate::metrics::{aperture_occupancy, hit_match};
use crate::model::{RadarConfig, Target, TargetScene};
use crate::omp::{omp_recover, support_to_scene};
use crate::synth::{add_noise, build_index_sets, synthesize, IndexSets, PartialMeasurementTensor};
use crate::tc::{tc_estimate, TcSolverConfig};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Omp,
    Tc,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Omp => "omp",
            Algorithm::Tc => "tc",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = RadarError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omp" => Ok(Algorithm::Omp),
            "tc" => Ok(Algorithm::Tc),
            other => Err(RadarError::Argument(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// How thinning the pulse train trades off against transmitted energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    /// Fewer pulses, each carrying proportionally more energy.
    TotalEnergyFixed,
    /// Fewer pulses at unchanged per-pulse energy.
    SinglePulseEnergyFixed,
}

impl EnergyMode {
    pub fn name(self) -> &'static str {
        match self {
            EnergyMode::TotalEnergyFixed => "tef",
            EnergyMode::SinglePulseEnergyFixed => "spef",
        }
    }

    /// dB added to the nominal SNR before noise calibration.
    ///
    /// The calibration ties σ² to `1/Σ P_m`, so at a fixed nominal SNR the
    /// coherent gain over all observed entries falls 20 dB per decade of
    /// occupancy. Adding back `20·log10(ref/nao)` holds total energy fixed;
    /// adding only `10·log10(ref/nao)` holds per-pulse energy fixed.
    pub fn snr_offset_db(self, nao: f64, reference_nao: f64) -> f64 {
        let ratio = 10.0 * (reference_nao / nao).log10();
        match self {
            EnergyMode::TotalEnergyFixed => 2.0 * ratio,
            EnergyMode::SinglePulseEnergyFixed => ratio,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeModel {
    /// `1` for every target.
    Unit,
    /// Unit modulus, uniform phase.
    #[default]
    UnitRandomPhase,
    /// Circular complex Gaussian with unit variance.
    ComplexGaussian,
}

impl AmplitudeModel {
    fn draw(self, rng: &mut ChaCha8Rng) -> Complex64 {
        match self {
            AmplitudeModel::Unit => Complex64::new(1.0, 0.0),
            AmplitudeModel::UnitRandomPhase => {
                Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
            }
            AmplitudeModel::ComplexGaussian => {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im) / 2f64.sqrt()
            }
        }
    }
}

/// Physical parameter windows for off-grid draws, each half-open `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterRanges {
    pub delay_s: [f64; 2],
    pub doa: [f64; 2],
    pub doppler_hz: [f64; 2],
}

impl ParameterRanges {
    /// The whole unambiguous domain of `config`.
    pub fn full(config: &RadarConfig) -> Self {
        let half = 0.5 / config.pri;
        Self {
            delay_s: [0.0, config.pri],
            doa: [-1.0, 1.0],
            doppler_hz: [-half, half],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneGenerator {
    /// The same scene in every trial, read from a JSON file.
    FixedSceneFile { path: PathBuf },
    /// The same scene in every trial, given inline.
    Fixed { scene: TargetScene },
    /// Distinct grid cells drawn uniformly.
    RandomOnGrid {
        targets: usize,
        #[serde(default)]
        amplitude: AmplitudeModel,
    },
    /// Continuous parameters drawn uniformly from `ranges` (default: the
    /// whole domain), redrawn until every pair of targets is at least
    /// `min_separation_bins` apart along some axis.
    RandomOffGrid {
        targets: usize,
        #[serde(default)]
        amplitude: AmplitudeModel,
        #[serde(default)]
        ranges: Option<ParameterRanges>,
        #[serde(default = "default_separation")]
        min_separation_bins: f64,
    },
}

fn default_separation() -> f64 {
    1.0
}

fn default_reference_nao() -> f64 {
    1.0
}

fn default_scatter_trials() -> usize {
    1
}

impl SceneGenerator {
    fn target_count(&self, fixed: Option<&TargetScene>) -> usize {
        match self {
            SceneGenerator::FixedSceneFile { .. } | SceneGenerator::Fixed { .. } => fixed.map_or(0, |s| s.len()),
            SceneGenerator::RandomOnGrid { targets, .. } | SceneGenerator::RandomOffGrid { targets, .. } => *targets,
        }
    }

    fn draw(&self, fixed: Option<&TargetScene>, config: &RadarConfig, rng: &mut ChaCha8Rng) -> Result<TargetScene> {
        match self {
            SceneGenerator::FixedSceneFile { .. } | SceneGenerator::Fixed { .. } => {
                Ok(fixed.cloned().unwrap_or_default())
            }
            SceneGenerator::RandomOnGrid { targets, amplitude } => {
                let [tn, tr, p] = config.grid_shape();
                if *targets > tn * tr * p {
                    return Err(RadarError::Argument(format!("{targets} targets exceed the grid")));
                }
                let mut cells: Vec<[usize; 3]> = Vec::with_capacity(*targets);
                while cells.len() < *targets {
                    let cell = [rng.random_range(0..tn), rng.random_range(0..tr), rng.random_range(0..p)];
                    if !cells.contains(&cell) {
                        cells.push(cell);
                    }
                }
                Ok(TargetScene::new(
                    cells
                        .into_iter()
                        .map(|cell| {
                            let a = amplitude.draw(rng);
                            Target::on_grid(config, cell, a)
                        })
                        .collect(),
                ))
            }
            SceneGenerator::RandomOffGrid {
                targets,
                amplitude,
                ranges,
                min_separation_bins,
            } => {
                let r = ranges.unwrap_or_else(|| ParameterRanges::full(config));
                let uniform = |rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]| lo + (hi - lo) * rng.random::<f64>();
                let mut out: Vec<Target> = Vec::with_capacity(*targets);
                let mut attempts = 0usize;
                while out.len() < *targets {
                    attempts += 1;
                    if attempts > 10_000 * targets.max(&1) {
                        return Err(RadarError::Argument(
                            "cannot place targets with the requested separation".into(),
                        ));
                    }
                    let t = Target::new(
                        Complex64::new(1.0, 0.0),
                        uniform(rng, r.delay_s),
                        uniform(rng, r.doa),
                        uniform(rng, r.doppler_hz),
                    );
                    let apart = out.iter().all(|o| {
                        let e = crate::metrics::bin_errors(o, &t, config);
                        e.iter().any(|&x| x >= *min_separation_bins)
                    });
                    if apart {
                        out.push(t);
                    }
                }
                for t in out.iter_mut() {
                    t.amplitude = amplitude.draw(rng);
                    t.validate(config)?;
                }
                Ok(TargetScene::new(out))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub radar: RadarConfig,
    pub scene_generator: SceneGenerator,
    /// Nominal SNR points; the energy mode turns them into calibration SNRs.
    pub snr_grid_db: Vec<f64>,
    /// Append a noiseless point (reported as `inf`).
    #[serde(default)]
    pub noiseless: bool,
    pub trials: usize,
    pub master_seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub energy_mode: EnergyMode,
    /// Occupancy at which nominal and calibration SNR coincide.
    #[serde(default = "default_reference_nao")]
    pub reference_nao: f64,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub tc_solver: TcSolverConfig,
    /// How many leading trials contribute to the scatter output.
    #[serde(default = "default_scatter_trials")]
    pub scatter_trials: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RadarError::Argument(m));
        self.radar.validate()?;
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if let Some(x) = self.snr_grid_db.iter().find(|x| !x.is_finite()) {
            return bad(format!("SNR grid entry {x} is not finite"));
        }
        if self.snr_grid_db.is_empty() && !self.noiseless {
            return bad("no SNR points".into());
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms selected".into());
        }
        if !(self.reference_nao.is_finite() && self.reference_nao > 0.0) {
            return bad("reference_nao must be positive".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        self.tc_solver.validate()
    }

    /// Nominal SNR points, with `+inf` for the noiseless one.
    pub fn snr_points(&self) -> Vec<f64> {
        let mut points = self.snr_grid_db.clone();
        if self.noiseless {
            points.push(f64::INFINITY);
        }
        points
    }

    /// Reads one spec or an array of specs.
    pub fn load_all(path: impl AsRef<Path>) -> Result<Vec<Self>> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        if value.is_array() {
            Ok(serde_json::from_value(value)?)
        } else {
            Ok(vec![serde_json::from_value(value)?])
        }
    }
}

/// Aggregate over all trials at one `(algorithm, SNR)` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: Algorithm,
    pub nao: f64,
    pub energy_mode: EnergyMode,
    pub snr_db: f64,
    pub effective_snr_db: f64,
    pub hits: usize,
    pub targets: usize,
    pub hit_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Trials that produced an estimate.
    pub trials: usize,
    /// Trials whose recovery returned an error; excluded from the rate.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterEntry {
    pub algorithm: Algorithm,
    pub nao: f64,
    pub snr_db: f64,
    pub trial: usize,
    /// `[delay_s, doa, doppler_hz]` per true target.
    pub truth: Vec<[f64; 3]>,
    pub estimate: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub rows: Vec<ResultRow>,
    pub scatter: Vec<ScatterEntry>,
}

impl ExperimentResults {
    pub fn extend(&mut self, other: ExperimentResults) {
        self.rows.extend(other.rows);
        self.scatter.extend(other.scatter);
    }

    /// `(snr_db, hit_rate)` of the rows matching one curve, in SNR order.
    pub fn curve(&self, algorithm: Algorithm, nao: f64, mode: EnergyMode) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.algorithm == algorithm && r.energy_mode == mode && (r.nao - nao).abs() < 1e-12)
            .map(|r| (r.snr_db, r.hit_rate))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts
    }
}

/// Wilson score interval at 95% for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the bounds are exactly 0 and 1 at the extremes; avoid rounding residue
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// First SNR at which a curve reaches `level`, by linear interpolation
/// between neighbouring points. `None` if it never does or starts above it.
pub fn level_crossing(curve: &[(f64, f64)], level: f64) -> Option<f64> {
    curve.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if y0 < level && y1 >= level {
            Some(x0 + (level - y0) * (x1 - x0) / (y1 - y0))
        } else {
            None
        }
    })
}

/// Per-trial RNG: a ChaCha stream keyed by the master seed, one stream per trial.
pub fn trial_rng(master_seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial as u64);
    rng
}

/// Recovers a scene of `targets` targets with the chosen algorithm.
pub fn recover(
    algorithm: Algorithm,
    z: &PartialMeasurementTensor,
    sets: &IndexSets,
    config: &RadarConfig,
    targets: usize,
    solver: &TcSolverConfig,
) -> Result<TargetScene> {
    match algorithm {
        Algorithm::Omp => Ok(support_to_scene(&omp_recover(z, sets, config, targets)?, config)),
        Algorithm::Tc => Ok(tc_estimate(z, sets, config, targets, solver)?.1),
    }
}

/// Outcome of one trial at one `(algorithm, SNR)` point.
enum Outcome {
    Scored { hits: usize, targets: usize, estimate: Option<TargetScene> },
    Failed,
}

fn triples(scene: &TargetScene) -> Vec<[f64; 3]> {
    scene.targets.iter().map(|t| [t.delay, t.doa, t.doppler]).collect()
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResults> {
    spec.validate()?;
    let config = &spec.radar;
    let sets = build_index_sets(config)?;
    let fixed = match &spec.scene_generator {
        SceneGenerator::FixedSceneFile { path } => Some(TargetScene::from_json_file(path)?),
        SceneGenerator::Fixed { scene } => Some(scene.clone()),
        _ => None,
    };
    if let Some(scene) = &fixed {
        scene.validate(config)?;
    }
    let targets = spec.scene_generator.target_count(fixed.as_ref());
    if targets == 0 {
        return Err(RadarError::Argument("scene has no targets".into()));
    }
    let (_, nao) = aperture_occupancy(config);
    let offset = spec.energy_mode.snr_offset_db(nao, spec.reference_nao);
    let snrs = spec.snr_points();
    let points: Vec<(Algorithm, f64)> = spec
        .algorithms
        .iter()
        .flat_map(|&a| snrs.iter().map(move |&s| (a, s)))
        .collect();

    let run_trial = |trial: usize| -> Result<(TargetScene, Vec<Outcome>)> {
        let mut rng = trial_rng(spec.master_seed, trial);
        let scene = spec.scene_generator.draw(fixed.as_ref(), config, &mut rng)?;
        let noise_seed = rng.next_u64();
        let clean = synthesize(&scene, config, &sets)?;
        let keep = trial < spec.scatter_trials;
        let outcomes = points
            .iter()
            .map(|&(algorithm, snr)| {
                let noisy = match add_noise(&clean, snr + offset, config, noise_seed) {
                    Ok(z) => z,
                    Err(_) => return Outcome::Failed,
                };
                match recover(algorithm, &noisy, &sets, config, targets, &spec.tc_solver) {
                    Ok(est) => Outcome::Scored {
                        hits: hit_match(&scene, &est, config).hits,
                        targets: scene.len(),
                        estimate: keep.then_some(est),
                    },
                    Err(_) => Outcome::Failed,
                }
            })
            .collect();
        Ok((scene, outcomes))
    };

    let per_trial: Vec<Result<(TargetScene, Vec<Outcome>)>> = match spec.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| RadarError::Argument(format!("thread pool: {e}")))?
            .install(|| (0..spec.trials).into_par_iter().map(run_trial).collect()),
        None => (0..spec.trials).into_par_iter().map(run_trial).collect(),
    };
    let per_trial: Vec<(TargetScene, Vec<Outcome>)> = per_trial.into_iter().collect::<Result<_>>()?;

    let mut results = ExperimentResults::default();
    for (i, &(algorithm, snr)) in points.iter().enumerate() {
        let (mut hits, mut total, mut ok, mut failed) = (0, 0, 0, 0);
        for (trial, (scene, outcomes)) in per_trial.iter().enumerate() {
            match &outcomes[i] {
                Outcome::Scored {
                    hits: h,
                    targets: t,
                    estimate,
                } => {
                    hits += h;
                    total += t;
                    ok += 1;
                    if let Some(est) = estimate {
                        results.scatter.push(ScatterEntry {
                            algorithm,
                            nao,
                            snr_db: snr,
                            trial,
                            truth: triples(scene),
                            estimate: triples(est),
                        });
                    }
                }
                Outcome::Failed => failed += 1,
            }
        }
        let (ci_low, ci_high) = wilson_interval(hits, total);
        results.rows.push(ResultRow {
            algorithm,
            nao,
            energy_mode: spec.energy_mode,
            snr_db: snr,
            effective_snr_db: snr + offset,
            hits,
            targets: total,
            hit_rate: if total > 0 { hits as f64 / total as f64 } else { 0.0 },
            ci_low,
            ci_high,
            trials: ok,
            failed,
        });
    }
    Ok(results)
}

/// Runs several specs back to back and concatenates their results.
pub fn run_sweep(specs: &[ExperimentSpec]) -> Result<ExperimentResults> {
    let mut all = ExperimentResults::default();
    for spec in specs {
        all.extend(run_experiment(spec)?);
    }
    Ok(all)
}

fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

/// `algorithm,nao,energy_mode,snr_db,hit_rate,ci_low,ci_high,trials`.
pub fn write_results_csv<W: Write>(results: &ExperimentResults, out: W) -> Result<()> {
    if results.rows.is_empty() {
        return Err(RadarError::Argument("no results to write".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["algorithm", "nao", "energy_mode", "snr_db", "hit_rate", "ci_low", "ci_high", "trials"])?;
    for r in &results.rows {
        w.write_record([
            r.algorithm.name().to_string(),
            fmt_f64(r.nao),
            r.energy_mode.name().to_string(),
            fmt_f64(r.snr_db),
            fmt_f64(r.hit_rate),
            fmt_f64(r.ci_low),
            fmt_f64(r.ci_high),
            r.trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Scatter entries as JSON; infinite SNRs become `null`.
pub fn scatter_json(results: &ExperimentResults) -> Result<String> {
    let entries: Vec<serde_json::Value> = results
        .scatter
        .iter()
        .map(|s| {
            let mut v = serde_json::to_value(s)?;
            if !s.snr_db.is_finite() {
                v["snr_db"] = serde_json::Value::Null;
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    Ok(serde_json::to_string_pretty(&entries)?)
}

/// Writes the results CSV and the scatter JSON.
pub fn emit_plot_data(results: &ExperimentResults, csv_path: impl AsRef<Path>, scatter_path: impl AsRef<Path>) -> Result<()> {
    if results.rows.is_empty() {
        return Err(RadarError::Argument("no results to write".into()));
    }
    write_results_csv(results, BufWriter::new(File::create(csv_path)?))?;
    let mut f = BufWriter::new(File::create(scatter_path)?);
    f.write_all(scatter_json(results)?.as_bytes())?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn base_spec() -> ExperimentSpec {
        let cfg = RadarConfig::reference();
        let scene = TargetScene::new(vec![
            Target::on_grid(&cfg, [2, 3, 1], c(1.0, 0.0)),
            Target::on_grid(&cfg, [11, 8, 14], c(0.0, 1.0)),
        ]);
        ExperimentSpec {
            name: None,
            radar: cfg,
            scene_generator: SceneGenerator::Fixed { scene },
            snr_grid_db: vec![],
            noiseless: true,
            trials: 1,
            master_seed: 3,
            algorithms: vec![Algorithm::Omp],
            energy_mode: EnergyMode::TotalEnergyFixed,
            reference_nao: 1.0,
            workers: None,
            tc_solver: TcSolverConfig::default(),
            scatter_trials: 1,
        }
    }

    #[test]
    fn noiseless_fixed_scene_is_fully_hit() {
        let res = run_experiment(&base_spec()).unwrap();
        assert_eq!(res.rows.len(), 1);
        assert_eq!(res.rows[0].hit_rate, 1.0);
        assert_eq!(res.rows[0].trials, 1);
        assert_eq!(res.scatter.len(), 1);
    }

    #[test]
    fn energy_offsets() {
        let tef = EnergyMode::TotalEnergyFixed;
        let spef = EnergyMode::SinglePulseEnergyFixed;
        assert_eq!(tef.snr_offset_db(1.0, 1.0), 0.0);
        assert!((spef.snr_offset_db(0.5, 1.0) - 3.0103).abs() < 1e-4);
        assert!((spef.snr_offset_db(0.25, 1.0) - 6.0206).abs() < 1e-4);
        assert!((tef.snr_offset_db(0.25, 1.0) - 12.0412).abs() < 1e-4);
    }

    #[test]
    fn wilson_interval_examples() {
        // 8/10: centre (0.8 + 1.92/10)/(1.384), half-width 1.96·sqrt(0.016 + 0.00096)/1.384
        let (lo, hi) = wilson_interval(8, 10);
        assert!((lo - 0.4902).abs() < 1e-3 && (hi - 0.9433).abs() < 1e-3, "{lo} {hi}");
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
        let (lo, hi) = wilson_interval(0, 50);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
    }

    #[test]
    fn crossing_interpolates() {
        let curve = [(0.0, 0.1), (2.0, 0.3), (4.0, 0.7), (6.0, 0.9)];
        assert!((level_crossing(&curve, 0.5).unwrap() - 3.0).abs() < 1e-12);
        assert!(level_crossing(&curve, 0.95).is_none());
    }

    #[test]
    fn trial_streams_are_independent_of_order() {
        let a: Vec<u64> = (0..4).map(|t| trial_rng(9, t).next_u64()).collect();
        let b: Vec<u64> = (0..4).rev().map(|t| trial_rng(9, t).next_u64()).collect();
        assert_eq!(a, b.into_iter().rev().collect::<Vec<_>>());
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let mut spec = base_spec();
        spec.scene_generator = SceneGenerator::RandomOnGrid {
            targets: 2,
            amplitude: AmplitudeModel::UnitRandomPhase,
        };
        spec.snr_grid_db = vec![-20.0, -10.0];
        spec.trials = 24;
        spec.workers = Some(1);
        let one = run_experiment(&spec).unwrap();
        spec.workers = Some(4);
        let four = run_experiment(&spec).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn off_grid_draws_respect_ranges_and_separation() {
        let cfg = RadarConfig::reference();
        let generator = SceneGenerator::RandomOffGrid {
            targets: 3,
            amplitude: AmplitudeModel::Unit,
            ranges: Some(ParameterRanges {
                delay_s: [0.0, cfg.pri / 2.0],
                doa: [-0.5, 0.5],
                doppler_hz: [0.0, 1000.0],
            }),
            min_separation_bins: 1.0,
        };
        for trial in 0..20 {
            let s = generator.draw(None, &cfg, &mut trial_rng(1, trial)).unwrap();
            assert_eq!(s.len(), 3);
            for t in &s.targets {
                assert!(t.delay < cfg.pri / 2.0 && t.doa.abs() <= 0.5 && (0.0..1000.0).contains(&t.doppler));
            }
            for i in 0..3 {
                for j in i + 1..3 {
                    let e = crate::metrics::bin_errors(&s.targets[i], &s.targets[j], &cfg);
                    assert!(e.iter().any(|&x| x >= 1.0));
                }
            }
        }
    }

    #[test]
    fn csv_rows_and_empty_rejection() {
        let res = run_experiment(&base_spec()).unwrap();
        let mut buf = Vec::new();
        write_results_csv(&res, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "algorithm,nao,energy_mode,snr_db,hit_rate,ci_low,ci_high,trials");
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("omp,0.25,tef,inf,1,"));
        let empty = ExperimentResults::default();
        assert!(matches!(write_results_csv(&empty, Vec::new()), Err(RadarError::Argument(_))));
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_plot_data(&empty, dir.path().join("a.csv"), dir.path().join("b.json")).is_err());
        emit_plot_data(&res, dir.path().join("a.csv"), dir.path().join("b.json")).unwrap();
        let scatter: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("b.json")).unwrap()).unwrap();
        assert!(scatter[0]["snr_db"].is_null());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = base_spec();
        let text = serde_json::to_string(&spec).unwrap();
        let back: ExperimentSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let invalid = ExperimentSpec { trials: 0, ..spec };
        assert!(run_experiment(&invalid).is_err());
    }
}
