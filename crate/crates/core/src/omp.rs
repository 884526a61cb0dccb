//! Tensor-domain orthogonal matching pursuit on the native delay / DoA / Doppler grid.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{RadarError, Result};
use crate::linalg::svd;
use crate::model::{RadarConfig, SparseSceneTensor, Target, TargetScene};
use crate::synth::{IndexSets, PartialMeasurementTensor};
use crate::tensor::{
    build_dictionaries, khatri_rao_support, multilinear_product, CMatrix, CVector, Dictionaries, Tensor3,
};

/// Relative singular-value floor below which the support matrix counts as rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmpResult {
    /// Selected grid cells in selection order.
    pub support: Vec<[usize; 3]>,
    pub amplitudes: Vec<Complex64>,
    /// `‖residual‖₂` before the first iteration and after each one.
    pub residual_norm_history: Vec<f64>,
    pub recovered: SparseSceneTensor,
}

/// Runs exactly `sparsity` greedy iterations: back-project the zero-filled
/// residual through the adjoint dictionaries, add the strongest unused cell,
/// refit all amplitudes by least squares on the observed entries, update the
/// residual.
pub fn omp_recover(
    z: &PartialMeasurementTensor,
    sets: &IndexSets,
    config: &RadarConfig,
    sparsity: usize,
) -> Result<OmpResult> {
    if sparsity == 0 {
        return Err(RadarError::Argument("sparsity must be at least 1".into()));
    }
    if sets.len() < sparsity {
        return Err(RadarError::Argument(format!(
            "{} observations cannot determine {sparsity} amplitudes",
            sets.len()
        )));
    }
    z.check_against(sets)?;
    let dicts = build_dictionaries(config)?;
    let (support, amplitudes, history) = greedy_pursuit(z, sets, &dicts, sparsity)?;
    let recovered = SparseSceneTensor::new(sets.shape, support.clone(), amplitudes.clone())?;
    Ok(OmpResult {
        support,
        amplitudes,
        residual_norm_history: history,
        recovered,
    })
}

/// Selected cells, their amplitudes and the residual history.
type Pursuit = (Vec<[usize; 3]>, Vec<Complex64>, Vec<f64>);

/// The pursuit loop over an arbitrary set of dictionaries whose rows match
/// the measurement grid.
pub(crate) fn greedy_pursuit(
    z: &PartialMeasurementTensor,
    sets: &IndexSets,
    dicts: &Dictionaries,
    sparsity: usize,
) -> Result<Pursuit> {
    let (ah, bh, fh) = dicts.adjoints();

    let observed = CVector::from_column_slice(&z.values);
    let mut residual = observed.clone();
    let mut support: Vec<[usize; 3]> = Vec::with_capacity(sparsity);
    let mut amplitudes = CVector::zeros(0);
    let mut history = vec![residual.norm()];

    for _ in 0..sparsity {
        let r = sets.embed(residual.as_slice())?;
        let projection = multilinear_product(&r, &ah, &bh, &fh)?;
        let next = strongest_unused(&projection, &support);
        support.push(next);

        let u = khatri_rao_support(&support, dicts, &sets.gamma)?;
        amplitudes = least_squares(&u, &observed, &support)?;
        residual = &observed - &u * &amplitudes;
        history.push(residual.norm());
    }

    Ok((support, amplitudes.iter().copied().collect(), history))
}

/// Argmax of `|Y|` over cells not yet selected; ties go to the lowest
/// lexicographic `(n, j, p)`.
fn strongest_unused(projection: &Tensor3, support: &[[usize; 3]]) -> [usize; 3] {
    let [d0, d1, d2] = projection.dims();
    let mut best: Option<([usize; 3], f64)> = None;
    for n in 0..d0 {
        for j in 0..d1 {
            for p in 0..d2 {
                let cell = [n, j, p];
                if support.contains(&cell) {
                    continue;
                }
                let mag = projection[cell].norm();
                if best.is_none_or(|(_, m)| mag > m) {
                    best = Some((cell, mag));
                }
            }
        }
    }
    best.map(|(c, _)| c).unwrap_or([0, 0, 0])
}

/// Minimum-norm least-squares solve through an SVD; rejects rank-deficient
/// support matrices, naming the cells that take part in the dependency.
fn least_squares(u: &CMatrix, b: &CVector, support: &[[usize; 3]]) -> Result<CVector> {
    if u.nrows() < u.ncols() {
        return Err(RadarError::Singular(support.to_vec()));
    }
    let d = svd(u)?;
    let smax = d.largest();
    let smin = d.singular_values.last().copied().unwrap_or(0.0);
    if !(smin > RANK_TOL * smax.max(f64::MIN_POSITIVE)) {
        let null = d.v.column(d.v.ncols() - 1);
        let colliding = support
            .iter()
            .zip(null.iter())
            .filter(|(_, c)| c.norm() > 1e-6)
            .map(|(s, _)| *s)
            .collect();
        return Err(RadarError::Singular(colliding));
    }
    Ok(d.solve(b, RANK_TOL))
}

/// Maps each recovered cell onto physical parameters through the grid maps.
pub fn support_to_scene(result: &OmpResult, config: &RadarConfig) -> TargetScene {
    TargetScene::new(
        result
            .support
            .iter()
            .zip(&result.amplitudes)
            .map(|(&cell, &a)| Target::on_grid(config, cell, a))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RadarConfig;
    use crate::synth::{build_index_sets, synthesize};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn full_config() -> RadarConfig {
        // every pulse on both transmitters
        let cfg = RadarConfig::reference();
        cfg.with_pulses(&[(0..16).collect(), (0..16).collect()]).unwrap()
    }

    #[test]
    fn single_target_exact_recovery() {
        let cfg = full_config();
        let sets = build_index_sets(&cfg).unwrap();
        let truth = TargetScene::new(vec![Target::on_grid(&cfg, [6, 13, 9], c(0.8, -0.3))]);
        let z = synthesize(&truth, &cfg, &sets).unwrap();
        let res = omp_recover(&z, &sets, &cfg, 1).unwrap();
        assert_eq!(res.support, vec![[6, 13, 9]]);
        assert!((res.amplitudes[0] - c(0.8, -0.3)).norm() < 1e-8);
        assert!(res.residual_norm_history[1] < 1e-8 * z.norm());
    }

    #[test]
    fn four_reference_targets_are_found() {
        let cfg = RadarConfig::reference();
        let sets = build_index_sets(&cfg).unwrap();
        let cells = [[2, 3, 1], [7, 12, 5], [11, 8, 14], [14, 17, 10]];
        let truth = TargetScene::new(cells.iter().map(|&cell| Target::on_grid(&cfg, cell, c(1.0, 0.0))).collect());
        let z = synthesize(&truth, &cfg, &sets).unwrap();
        let res = omp_recover(&z, &sets, &cfg, 4).unwrap();
        let mut got = res.support.clone();
        got.sort();
        assert_eq!(got, cells.to_vec());
        for a in &res.amplitudes {
            assert!((a - c(1.0, 0.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn zero_measurements_pick_the_first_cell() {
        let cfg = RadarConfig::reference();
        let sets = build_index_sets(&cfg).unwrap();
        let z = PartialMeasurementTensor::zeros(&sets);
        let res = omp_recover(&z, &sets, &cfg, 1).unwrap();
        assert_eq!(res.support, vec![[0, 0, 0]]);
        assert_eq!(res.amplitudes[0].norm(), 0.0);
        assert_eq!(res.residual_norm_history, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_measurements_never_reselect_a_cell() {
        let cfg = RadarConfig::reference();
        let sets = build_index_sets(&cfg).unwrap();
        let z = PartialMeasurementTensor::zeros(&sets);
        let res = omp_recover(&z, &sets, &cfg, 3).unwrap();
        assert_eq!(res.support, vec![[0, 0, 0], [0, 0, 1], [0, 0, 2]]);
    }

    #[test]
    fn rejects_bad_sparsity() {
        let cfg = RadarConfig::reference();
        let sets = build_index_sets(&cfg).unwrap();
        let z = PartialMeasurementTensor::zeros(&sets);
        assert!(matches!(omp_recover(&z, &sets, &cfg, 0), Err(RadarError::Argument(_))));
        assert!(omp_recover(&z, &sets, &cfg, 161).is_err());
    }

    #[test]
    fn dependent_columns_are_reported() {
        let d = crate::tensor::dictionaries_for_shape([2, 1, 1]);
        // only one observed row: two distinct cells cannot be separated
        let u = khatri_rao_support(&[[0, 0, 0], [1, 0, 0]], &d, &[[0, 0, 0]]).unwrap();
        let b = CVector::from_element(1, c(1.0, 0.0));
        match least_squares(&u, &b, &[[0, 0, 0], [1, 0, 0]]) {
            Err(RadarError::Singular(cells)) => assert_eq!(cells.len(), 2),
            other => panic!("expected singular error, got {other:?}"),
        }
        // rows 0 and 2 of a 4-point DFT cannot tell cells 0 and 2 apart
        let d = crate::tensor::dictionaries_for_shape([4, 1, 1]);
        let support = [[0, 0, 0], [2, 0, 0]];
        let u = khatri_rao_support(&support, &d, &[[0, 0, 0], [2, 0, 0]]).unwrap();
        let b = CVector::from_element(2, c(1.0, 0.0));
        match least_squares(&u, &b, &support) {
            Err(RadarError::Singular(cells)) => assert_eq!(cells, vec![[0, 0, 0], [2, 0, 0]]),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn support_maps_to_grid_parameters() {
        let cfg = RadarConfig::reference();
        let tau = cfg.pri;
        let mk = |support: Vec<[usize; 3]>| OmpResult {
            amplitudes: vec![c(1.0, 0.0); support.len()],
            recovered: SparseSceneTensor::new([16, 20, 16], support.clone(), vec![c(1.0, 0.0); support.len()]).unwrap(),
            support,
            residual_norm_history: vec![],
        };
        let s = support_to_scene(&mk(vec![[0, 0, 0]]), &cfg);
        assert_eq!((s.targets[0].delay, s.targets[0].doa, s.targets[0].doppler), (0.0, -1.0, 0.0));
        let s = support_to_scene(&mk(vec![[3, 7, 2]]), &cfg);
        assert!((s.targets[0].delay - 3.0 * tau / 16.0).abs() < 1e-18);
        assert!((s.targets[0].doppler - 2.0 / (16.0 * tau)).abs() < 1e-9);
        assert!((s.targets[0].doa - (-1.0 + 0.7)).abs() < 1e-12);
    }
}
