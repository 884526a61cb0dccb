//! Hankel-regularized low-CP-rank tensor completion for off-grid targets.
//!
//! Minimizes
//!
//! ```text
//! Σ_l ‖H(a_l)‖_* + ‖H(b_l)‖_* + ‖H(f_l)‖_*  +  μ/2 ‖P_Γ(Σ_l a_l ∘ b_l ∘ f_l) − P_Γ(Z)‖²
//! ```
//!
//! by block-coordinate descent over targets and modes. Every factor-vector
//! block is a nuclear-norm-plus-diagonal-quadratic problem solved by ADMM
//! with singular-value thresholding. A block update is kept only when it
//! lowers its block objective, and after each sweep the three factor scales
//! of each target are rebalanced (an exact minimization over the scales), so
//! the objective never increases.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{RadarError, Result};
use crate::linalg::svd;
use crate::hankel::{
    anti_diagonal_counts, dominant_pole, hankel_adjoint, hankel_nuclear_norm, hankelize, singular_value_threshold,
    singular_values,
};
use crate::model::{RadarConfig, Target, TargetScene};
use crate::omp::greedy_pursuit;
use crate::synth::{synthesize, IndexSets, PartialMeasurementTensor};
use crate::tensor::{oversampled_dictionaries, vandermonde_vectors, CMatrix, CVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TcInit {
    OmpWarmStart,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TcSolverConfig {
    /// Data-fit weight μ. `None` uses `10·|Γ| / ‖P_Γ Z‖₂`.
    pub mu: Option<f64>,
    pub max_iters: usize,
    /// Stop once an outer sweep lowers the objective by less than this fraction.
    pub tol: f64,
    pub init: TcInit,
    pub inner_admm_iters: usize,
    /// ADMM penalty in units of `1/σ₁(H(x))`: each thresholding step removes
    /// `σ₁/rho` from the singular values of the factor's Hankel lift.
    pub rho: f64,
    /// Seed for random initialization.
    pub seed: u64,
    /// Grid refinement used by the pursuit that seeds the warm start; 1 uses
    /// the native grid.
    pub warm_start_oversampling: usize,
}

impl Default for TcSolverConfig {
    fn default() -> Self {
        Self {
            mu: None,
            max_iters: 200,
            tol: 1e-7,
            init: TcInit::OmpWarmStart,
            inner_admm_iters: 40,
            rho: 10.0,
            seed: 0,
            warm_start_oversampling: 2,
        }
    }
}

impl TcSolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(RadarError::Argument(format!("tc solver: {m}")));
        if let Some(mu) = self.mu {
            if !(mu.is_finite() && mu > 0.0) {
                return bad("mu must be positive");
            }
        }
        if self.max_iters == 0 || self.inner_admm_iters == 0 {
            return bad("iteration counts must be positive");
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad("tol must lie in (0, 1)");
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return bad("rho must be positive");
        }
        if self.warm_start_oversampling == 0 {
            return bad("warm_start_oversampling must be at least 1");
        }
        Ok(())
    }
}

/// Rank-`L` CP factors, each vector scaled to unit first entry with the
/// overall scale folded into `amplitudes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpFactors {
    pub a_factors: Vec<Vec<Complex64>>,
    pub b_factors: Vec<Vec<Complex64>>,
    pub f_factors: Vec<Vec<Complex64>>,
    pub amplitudes: Vec<Complex64>,
}

impl CpFactors {
    pub fn rank(&self) -> usize {
        self.amplitudes.len()
    }

    /// Factors of a known scene, straight from the Vandermonde model.
    pub fn from_scene(scene: &TargetScene, config: &RadarConfig) -> Result<Self> {
        let mut out = CpFactors {
            a_factors: vec![],
            b_factors: vec![],
            f_factors: vec![],
            amplitudes: vec![],
        };
        for t in &scene.targets {
            let (a, b, f) = vandermonde_vectors(t, config)?;
            out.a_factors.push(a.iter().copied().collect());
            out.b_factors.push(b.iter().copied().collect());
            out.f_factors.push(f.iter().copied().collect());
            out.amplitudes.push(t.amplitude);
        }
        Ok(out)
    }

    fn from_raw(raw: &[[CVector; 3]]) -> Self {
        let mut out = CpFactors {
            a_factors: vec![],
            b_factors: vec![],
            f_factors: vec![],
            amplitudes: vec![],
        };
        for factors in raw {
            let mut amp = Complex64::new(1.0, 0.0);
            let mut normalized: Vec<Vec<Complex64>> = Vec::with_capacity(3);
            for v in factors {
                let lead = v[0];
                if lead.norm() > 1e-12 * v.norm().max(f64::MIN_POSITIVE) {
                    amp *= lead;
                    normalized.push(v.iter().map(|x| x / lead).collect());
                } else {
                    // leading entry vanished; keep the raw vector, scale stays in it
                    normalized.push(v.iter().copied().collect());
                }
            }
            out.f_factors.push(normalized.pop().unwrap_or_default());
            out.b_factors.push(normalized.pop().unwrap_or_default());
            out.a_factors.push(normalized.pop().unwrap_or_default());
            out.amplitudes.push(amp);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcResult {
    pub factors: CpFactors,
    /// Objective at the initialization and after every outer sweep.
    pub objective_history: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub mu: f64,
}

impl TcResult {
    /// Writes the `iteration,objective` trace as CSV.
    pub fn write_trace<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "objective"])?;
        for (i, obj) in self.objective_history.iter().enumerate() {
            w.write_record([i.to_string(), format!("{obj:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `10·|Γ| / ‖P_Γ Z‖₂`, or 1 for all-zero data.
pub fn default_mu(z: &PartialMeasurementTensor) -> f64 {
    let norm = z.norm();
    if norm > 0.0 {
        10.0 * z.len() as f64 / norm
    } else {
        1.0
    }
}

struct Problem<'a> {
    gamma: &'a [[usize; 3]],
    data: &'a [Complex64],
    mu: f64,
}

impl Problem<'_> {
    fn predictions(&self, f: &[CVector; 3]) -> Vec<Complex64> {
        self.gamma.iter().map(|t| f[0][t[0]] * f[1][t[1]] * f[2][t[2]]).collect()
    }

    fn objective(&self, factors: &[[CVector; 3]], preds: &[Vec<Complex64>]) -> f64 {
        let reg: f64 = factors
            .iter()
            .flat_map(|f| f.iter())
            .map(hankel_nuclear_norm)
            .sum();
        let misfit: f64 = (0..self.data.len())
            .map(|e| {
                let model: Complex64 = preds.iter().map(|p| p[e]).sum();
                (model - self.data[e]).norm_sqr()
            })
            .sum();
        reg + 0.5 * self.mu * misfit
    }
}

/// One factor-vector block: `min_x ‖H(x)‖_* + μ/2 Σ_e |x[i_e]·s_e − r_e|²`.
struct Block {
    coord: Vec<usize>,
    scale: Vec<Complex64>,
    target: Vec<Complex64>,
    mu: f64,
}

impl Block {
    fn objective(&self, x: &CVector) -> f64 {
        let misfit: f64 = self
            .coord
            .iter()
            .zip(&self.scale)
            .zip(&self.target)
            .map(|((&i, &s), &r)| (x[i] * s - r).norm_sqr())
            .sum();
        hankel_nuclear_norm(x) + 0.5 * self.mu * misfit
    }

    /// Scaled ADMM on `H(x) = Y`, started at `start` with dual `dual`
    /// (updated in place). Returns the iterate with the lowest block objective.
    fn solve(&self, start: &CVector, dual: &mut Option<CMatrix>, iters: usize, rho_factor: f64) -> CVector {
        let n = start.len();
        let mut weight = vec![0.0; n];
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        for ((&i, &s), &r) in self.coord.iter().zip(&self.scale).zip(&self.target) {
            weight[i] += s.norm_sqr();
            rhs[i] += s.conj() * r;
        }
        if n < 2 {
            // no Hankel structure: soft-shrink the scalar least-squares fit
            let mut x = start.clone();
            for i in 0..n {
                if weight[i] > 0.0 {
                    let ls = rhs[i] / weight[i];
                    let shrink = (1.0 - 1.0 / (self.mu * weight[i] * ls.norm()).max(1e-300)).max(0.0);
                    x[i] = ls * shrink;
                }
            }
            return x;
        }
        let counts = anti_diagonal_counts(n);
        let Ok(mut y) = hankelize(start) else {
            return start.clone();
        };
        // threshold 1/ρ tracks the spectral scale of the factor
        let scale = singular_values(&y).first().copied().filter(|s| *s > 0.0 && s.is_finite());
        let scale = scale.unwrap_or_else(|| {
            let w: f64 = weight.iter().sum();
            if w > 0.0 {
                rhs.iter().map(|b| b.norm()).sum::<f64>() / w
            } else {
                1.0
            }
        });
        let rho = rho_factor / scale.max(f64::MIN_POSITIVE);
        let mut u = match dual.take() {
            Some(u) if u.shape() == y.shape() => u,
            _ => CMatrix::zeros(y.nrows(), y.ncols()),
        };

        let mut x = start.clone();
        let mut best = (self.objective(start), start.clone());
        for _ in 0..iters {
            let pulled = hankel_adjoint(&(&y - &u));
            for i in 0..n {
                x[i] = (rhs[i] * self.mu + pulled[i] * rho) / (self.mu * weight[i] + rho * counts[i]);
            }
            let hx = hankelize(&x).expect("length checked above");
            y = singular_value_threshold(&(&hx + &u), 1.0 / rho);
            u += hx - &y;
            let obj = self.objective(&x);
            if obj < best.0 {
                best = (obj, x.clone());
            }
        }
        *dual = Some(u);
        best.1
    }
}

/// Solves the completion problem for `rank` targets.
pub fn tc_recover(
    z: &PartialMeasurementTensor,
    sets: &IndexSets,
    config: &RadarConfig,
    rank: usize,
    solver: &TcSolverConfig,
) -> Result<TcResult> {
    if rank == 0 {
        return Err(RadarError::Argument("rank must be at least 1".into()));
    }
    solver.validate()?;
    z.check_against(sets)?;
    config.validate()?;
    let mu = solver.mu.unwrap_or_else(|| default_mu(z));
    let problem = Problem {
        gamma: &sets.gamma,
        data: &z.values,
        mu,
    };

    let mut factors = match solver.init {
        TcInit::OmpWarmStart => warm_start(z, sets, config, rank, solver.warm_start_oversampling)
            .or_else(|_| random_start(z, config, rank, solver.seed))?,
        TcInit::Random => random_start(z, config, rank, solver.seed)?,
    };
    for f in factors.iter_mut() {
        rebalance(f);
    }
    let mut preds: Vec<Vec<Complex64>> = factors.iter().map(|f| problem.predictions(f)).collect();
    let mut history = vec![problem.objective(&factors, &preds)];
    let mut duals: Vec<[Option<CMatrix>; 3]> = vec![[None, None, None]; rank];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..solver.max_iters {
        iterations += 1;
        for l in 0..rank {
            for mode in 0..3 {
                let others: Vec<usize> = (0..rank).filter(|&o| o != l).collect();
                let (o1, o2) = match mode {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                let block = Block {
                    coord: sets.gamma.iter().map(|t| t[mode]).collect(),
                    scale: sets
                        .gamma
                        .iter()
                        .map(|t| factors[l][o1][t[o1]] * factors[l][o2][t[o2]])
                        .collect(),
                    target: (0..sets.len())
                        .map(|e| z.values[e] - others.iter().map(|&o| preds[o][e]).sum::<Complex64>())
                        .collect(),
                    mu,
                };
                let current = &factors[l][mode];
                let candidate = block.solve(current, &mut duals[l][mode], solver.inner_admm_iters, solver.rho);
                if candidate.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                    return Err(RadarError::Numerical(format!(
                        "non-finite iterate in target {l}, mode {mode}"
                    )));
                }
                if block.objective(&candidate) <= block.objective(current) {
                    factors[l][mode] = candidate;
                    preds[l] = problem.predictions(&factors[l]);
                }
            }
            rebalance(&mut factors[l]);
            preds[l] = problem.predictions(&factors[l]);
        }
        let obj = problem.objective(&factors, &preds);
        if !obj.is_finite() {
            return Err(RadarError::Numerical("objective became non-finite".into()));
        }
        let prev = *history.last().unwrap_or(&obj);
        history.push(obj);
        if prev - obj < solver.tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    Ok(TcResult {
        factors: CpFactors::from_raw(&factors),
        objective_history: history,
        converged,
        iterations,
        mu,
    })
}

/// Equalizes the three Hankel nuclear norms of a target's factors while
/// keeping their outer product fixed; this minimizes the regularizer over
/// the scale freedom.
fn rebalance(f: &mut [CVector; 3]) {
    let norms: Vec<f64> = f.iter().map(hankel_nuclear_norm).collect();
    if norms.iter().any(|&n| !(n > 0.0 && n.is_finite())) {
        return;
    }
    let geo = (norms[0] * norms[1] * norms[2]).cbrt();
    for (v, n) in f.iter_mut().zip(&norms) {
        *v *= Complex64::new(geo / n, 0.0);
    }
}

/// Pursuit on a `factor`-times refined grid, each selected cell turned into
/// Vandermonde factors carrying its amplitude.
fn warm_start(
    z: &PartialMeasurementTensor,
    sets: &IndexSets,
    config: &RadarConfig,
    rank: usize,
    factor: usize,
) -> Result<Vec<[CVector; 3]>> {
    if sets.len() < rank {
        return Err(RadarError::Argument(format!(
            "{} observations cannot determine {rank} targets",
            sets.len()
        )));
    }
    let [tn, tr, p] = config.grid_shape();
    let dicts = oversampled_dictionaries([tn, tr, p], factor);
    let (support, amplitudes, _) = greedy_pursuit(z, sets, &dicts, rank)?;
    let tau = config.pri;
    support
        .iter()
        .zip(&amplitudes)
        .map(|(&[n, j, c], &amp)| {
            let delay = n as f64 * tau / (factor * tn) as f64;
            let doa = -1.0 + 2.0 * j as f64 / (factor * tr) as f64;
            let doppler = wrap_half_open(c as f64 / (factor * p) as f64, 0.5) / tau;
            let (a, b, f) = vandermonde_vectors(&Target::new(amp, delay, doa, doppler), config)?;
            let amp = if amp.norm() > 0.0 { amp } else { Complex64::new(1e-3, 0.0) };
            Ok([a * amp, b, f])
        })
        .collect()
}

fn random_start(
    z: &PartialMeasurementTensor,
    config: &RadarConfig,
    rank: usize,
    seed: u64,
) -> Result<Vec<[CVector; 3]>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rms = if z.is_empty() { 1.0 } else { z.norm() / (z.len() as f64).sqrt() };
    let per_factor = (rms / rank as f64).cbrt();
    let shape = config.grid_shape();
    Ok((0..rank)
        .map(|_| {
            let mut draw = |n: usize| {
                CVector::from_fn(n, |_, _| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im) * (per_factor / 2f64.sqrt())
                })
            };
            [draw(shape[0]), draw(shape[1]), draw(shape[2])]
        })
        .collect())
}

/// Reads delay, DoA and Doppler off the dominant pole of each factor vector.
/// Amplitudes are taken from the factors; see [`refit_amplitudes`].
pub fn extract_parameters(factors: &CpFactors, config: &RadarConfig) -> Result<TargetScene> {
    let tau = config.pri;
    let mut targets = Vec::with_capacity(factors.rank());
    for index in 0..factors.rank() {
        let pole = |v: &[Complex64], what: &str| {
            let v = CVector::from_column_slice(v);
            let scale = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
            if v.len() < 2 {
                return Ok(Complex64::new(1.0, 0.0));
            }
            if !(scale > 1e-12) {
                return Err(RadarError::Extraction {
                    index,
                    reason: format!("{what} factor is numerically zero"),
                });
            }
            dominant_pole(&v.unscale(scale)).ok_or_else(|| RadarError::Extraction {
                index,
                reason: format!("no dominant exponential in {what} factor"),
            })
        };
        let za = pole(&factors.a_factors[index], "delay")?;
        let zb = pole(&factors.b_factors[index], "DoA")?;
        let zf = pole(&factors.f_factors[index], "Doppler")?;

        let delay = (-za.arg() / (2.0 * PI)).rem_euclid(1.0) * tau;
        let delay = if delay >= tau { 0.0 } else { delay };
        let doa = wrap_half_open(zb.arg() / PI, 1.0);
        let doppler = wrap_half_open(-zf.arg() / (2.0 * PI), 0.5) / tau;
        targets.push(Target::new(factors.amplitudes[index], delay, doa, doppler));
    }
    Ok(TargetScene::new(targets))
}

/// Maps `x` into `[-half, half)` modulo `2·half`.
fn wrap_half_open(x: f64, half: f64) -> f64 {
    let period = 2.0 * half;
    let w = (x + half).rem_euclid(period) - half;
    if w >= half {
        -half
    } else {
        w
    }
}

/// Least-squares amplitudes of the continuous-parameter echo model at the
/// given parameters, fitted to the observed entries.
pub fn refit_amplitudes(
    scene: &TargetScene,
    z: &PartialMeasurementTensor,
    sets: &IndexSets,
    config: &RadarConfig,
) -> Result<TargetScene> {
    if scene.is_empty() {
        return Ok(scene.clone());
    }
    z.check_against(sets)?;
    let mut columns = Vec::with_capacity(scene.len());
    for t in &scene.targets {
        let unit = TargetScene::new(vec![Target::new(Complex64::new(1.0, 0.0), t.delay, t.doa, t.doppler)]);
        columns.push(synthesize(&unit, config, sets)?.values);
    }
    let m = CMatrix::from_fn(sets.len(), scene.len(), |e, l| columns[l][e]);
    let b = CVector::from_column_slice(&z.values);
    let amps = svd(&m)?.solve(&b, 1e-10);
    Ok(TargetScene::new(
        scene
            .targets
            .iter()
            .zip(amps.iter())
            .map(|(t, &a)| Target { amplitude: a, ..*t })
            .collect(),
    ))
}

/// Completion followed by parameter extraction and an amplitude refit.
pub fn tc_estimate(
    z: &PartialMeasurementTensor,
    sets: &IndexSets,
    config: &RadarConfig,
    rank: usize,
    solver: &TcSolverConfig,
) -> Result<(TcResult, TargetScene)> {
    let result = tc_recover(z, sets, config, rank, solver)?;
    let scene = extract_parameters(&result.factors, config)?;
    let scene = refit_amplitudes(&scene, z, sets, config)?;
    Ok((result, scene))
}
