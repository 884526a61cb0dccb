//! Hit-or-miss scoring, aperture occupancy and small-instance feasibility checks.

use serde::{Deserialize, Serialize};

use crate::error::{RadarError, Result};
use crate::linalg::svd;
use crate::model::{RadarConfig, Target, TargetScene};
use crate::synth::IndexSets;
use crate::tensor::{dft_matrix, steering_matrix, CMatrix};

/// Largest column count for which [`spark`] enumerates subsets.
pub const SPARK_MAX_COLUMNS: usize = 12;
/// Largest `2L` for which [`feasibility_check`] attempts the spark test.
pub const SPARK_MAX_TWICE_TARGETS: usize = 6;
/// Relative singular-value floor for deciding linear dependence.
const DEPENDENCE_TOL: f64 = 1e-9;

/// One accepted truth/estimate pairing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub truth: usize,
    pub estimate: usize,
    /// Delay, DoA and Doppler errors in native bins.
    pub errors: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitMatch {
    pub hits: usize,
    pub assignment: Vec<Pairing>,
}

/// Absolute delay, DoA and Doppler errors in units of one native bin. The
/// Doppler error is taken around the circle of circumference `1/τ`.
pub fn bin_errors(truth: &Target, estimate: &Target, config: &RadarConfig) -> [f64; 3] {
    let grid = config.grid();
    let delay = (truth.delay - estimate.delay).abs() / grid.delay_bin_width();
    let doa = (truth.doa - estimate.doa).abs() / grid.doa_bin_width();
    let period = 1.0 / config.pri;
    let wrapped = (truth.doppler - estimate.doppler).rem_euclid(period);
    let doppler = wrapped.min(period - wrapped) / grid.doppler_bin_width();
    [delay, doa, doppler]
}

/// Greedy one-to-one matching. Among pairs whose three errors are all below
/// one bin, the closest (Euclidean norm of the bin errors) is taken first;
/// ties go to the lowest `(truth, estimate)` indices.
pub fn hit_match(truth: &TargetScene, estimate: &TargetScene, config: &RadarConfig) -> HitMatch {
    let mut candidates: Vec<(f64, usize, usize, [f64; 3])> = Vec::new();
    for (i, t) in truth.targets.iter().enumerate() {
        for (j, e) in estimate.targets.iter().enumerate() {
            let errors = bin_errors(t, e, config);
            if errors.iter().all(|&x| x < 1.0) {
                let dist = errors.iter().map(|x| x * x).sum::<f64>().sqrt();
                candidates.push((dist, i, j, errors));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut truth_used = vec![false; truth.len()];
    let mut est_used = vec![false; estimate.len()];
    let mut assignment = Vec::new();
    for (_, i, j, errors) in candidates {
        if truth_used[i] || est_used[j] {
            continue;
        }
        truth_used[i] = true;
        est_used[j] = true;
        assignment.push(Pairing {
            truth: i,
            estimate: j,
            errors,
        });
    }
    assignment.sort_by_key(|p| p.truth);
    HitMatch {
        hits: assignment.len(),
        assignment,
    }
}

/// Total hits over total true targets.
pub fn hit_rate(trials: &[(TargetScene, TargetScene)], config: &RadarConfig) -> Result<f64> {
    if trials.is_empty() {
        return Err(RadarError::Argument("hit rate of an empty trial list".into()));
    }
    let targets: usize = trials.iter().map(|(t, _)| t.len()).sum();
    if targets == 0 {
        return Err(RadarError::Argument("no true targets in any trial".into()));
    }
    let hits: usize = trials.iter().map(|(t, e)| hit_match(t, e, config).hits).sum();
    Ok(hits as f64 / targets as f64)
}

/// `(Σ_m P_m, Σ_m P_m / (M·P))`.
pub fn aperture_occupancy(config: &RadarConfig) -> (usize, f64) {
    let ao = config.total_pulses();
    (ao, ao as f64 / (config.tx_count * config.pulse_count) as f64)
}

/// Smallest number of linearly dependent columns, found by trying every
/// column subset in increasing size. `None` when all columns are
/// independent. Refuses matrices with more than [`SPARK_MAX_COLUMNS`] columns.
pub fn spark(m: &CMatrix) -> Result<Option<usize>> {
    let n = m.ncols();
    if n > SPARK_MAX_COLUMNS {
        return Err(RadarError::Capability(format!(
            "exhaustive spark limited to {SPARK_MAX_COLUMNS} columns, got {n}"
        )));
    }
    let scale = m.iter().map(|x| x.norm()).fold(0.0, f64::max);
    for size in 1..=n {
        if size > m.nrows() {
            // more columns than rows are always dependent
            return Ok(Some(size));
        }
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            let cols = CMatrix::from_fn(m.nrows(), size, |r, c| m[(r, subset[c])]);
            let s = svd(&cols)?;
            let smallest = s.singular_values.last().copied().unwrap_or(0.0);
            if !(smallest > DEPENDENCE_TOL * scale) {
                return Ok(Some(size));
            }
            if !next_combination(&mut subset, n) {
                break;
            }
        }
    }
    Ok(None)
}

/// Advances `subset` to the next combination of `0..n` in lexicographic order.
fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exact spark of each row-selected mode matrix; `None` entries mean no
/// dependent subset exists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparkReport {
    pub delay: Option<usize>,
    pub doa: Option<usize>,
    pub doppler: Option<usize>,
    /// Every mode's spark exceeds `2L`.
    pub exceeds_twice_targets: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub targets: usize,
    pub required: usize,
    pub frequency_count: usize,
    pub channel_count: usize,
    pub pulse_count: usize,
    pub frequencies_ok: bool,
    pub channels_ok: bool,
    pub pulses_ok: bool,
    pub feasible: bool,
    /// Some mode meets the `2L` requirement with no margin.
    pub boundary: bool,
    pub spark: Option<SparkReport>,
    /// Why the spark test was skipped, when it was.
    pub note: Option<String>,
}

/// Compares the distinct observed frequencies, virtual channels and pulses
/// with `2L`, and on small instances also computes the exact spark of the
/// row-selected delay, steering and Doppler dictionaries.
pub fn feasibility_check(sets: &IndexSets, targets: usize) -> FeasibilityReport {
    let required = 2 * targets;
    let counts = [sets.omega.len(), sets.lambda.len(), sets.pi.len()];
    let ok = counts.map(|c| c >= required);
    let mut report = FeasibilityReport {
        targets,
        required,
        frequency_count: counts[0],
        channel_count: counts[1],
        pulse_count: counts[2],
        frequencies_ok: ok[0],
        channels_ok: ok[1],
        pulses_ok: ok[2],
        feasible: ok.iter().all(|&x| x),
        boundary: counts.contains(&required),
        spark: None,
        note: None,
    };
    match mode_sparks(sets, targets) {
        Ok(s) => report.spark = Some(s),
        Err(e) => report.note = Some(e.to_string()),
    }
    report
}

fn mode_sparks(sets: &IndexSets, targets: usize) -> Result<SparkReport> {
    let required = 2 * targets;
    if required > SPARK_MAX_TWICE_TARGETS {
        return Err(RadarError::Capability(format!(
            "spark test limited to 2L <= {SPARK_MAX_TWICE_TARGETS}, got {required}"
        )));
    }
    let [tn, tr, p] = sets.shape;
    let select = |full: CMatrix, rows: &[usize]| CMatrix::from_fn(rows.len(), full.ncols(), |r, c| full[(rows[r], c)]);
    let delay = spark(&select(dft_matrix(tn), &sets.omega))?;
    let doa = spark(&select(steering_matrix(tr), &sets.lambda))?;
    let doppler = spark(&select(dft_matrix(p), &sets.pi))?;
    let exceeds = [delay, doa, doppler].iter().all(|s| s.is_none_or(|s| s > required));
    Ok(SparkReport {
        delay,
        doa,
        doppler,
        exceeds_twice_targets: exceeds,
    })
}
