//! Entanglement monotones: pure-state reduction through the Schmidt
//! spectrum, the convex-roof extension to mixed states, and the constructor
//! `D_max - P(rho_A)` built from a validated predictability measure.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{
    check_criteria, CandidateMeasure, CriteriaReport, MeasureKind, ToleranceProfile,
};
use crate::measures::{shannon_entropy, ProbabilityVector};
use crate::optimize::{bfgs, BfgsOptions};
use crate::random::{ginibre, simplex_point, RngSeed};
use crate::state::{
    hermitian_eig, schmidt_decompose, DensityMatrix, PureState, SchmidtDecomposition, StateJson,
    RANK_TOL,
};
use crate::{Complex64, ComplexMatrix, ComplexVector, Error, Result};

type SpectrumFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A symmetric concave function on probability vectors, lifted to states
/// through their spectrum.
#[derive(Clone)]
pub struct SymmetricConcaveFn {
    name: String,
    eval: Arc<SpectrumFn>,
}

impl fmt::Debug for SymmetricConcaveFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymmetricConcaveFn")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

const REGISTRATION_DIMS: std::ops::RangeInclusive<usize> = 2..=6;
const REGISTRATION_SAMPLES: usize = 200;
const REGISTRATION_TOL: f64 = 1e-9;

impl SymmetricConcaveFn {
    /// Register `f` after sampled checks of permutation invariance,
    /// concavity and nonnegativity.
    pub fn register(
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        seed: RngSeed,
    ) -> Result<Self> {
        let name = name.into();
        let reject = |reason: String| Error::MeasureRejected {
            name: name.clone(),
            reason,
        };
        let mut rng = seed.rng();
        for d in REGISTRATION_DIMS {
            for _ in 0..REGISTRATION_SAMPLES {
                let p = simplex_point(d, &mut rng);
                let q = simplex_point(d, &mut rng);
                let fp = f(&p);
                if !fp.is_finite() || fp < -REGISTRATION_TOL {
                    return Err(reject(format!("value {fp} at {p:?}")));
                }
                let mut shuffled = p.clone();
                rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
                let fs = f(&shuffled);
                if (fs - fp).abs() > REGISTRATION_TOL {
                    return Err(reject(format!(
                        "not permutation invariant: {p:?} -> {fp}, {shuffled:?} -> {fs}"
                    )));
                }
                let t: f64 = rng.random();
                let mix: Vec<f64> = p
                    .iter()
                    .zip(&q)
                    .map(|(a, b)| t * a + (1.0 - t) * b)
                    .collect();
                let chord = t * fp + (1.0 - t) * f(&q);
                let at_mix = f(&mix);
                if at_mix < chord - REGISTRATION_TOL {
                    return Err(reject(format!("not concave: f(mix) = {at_mix} < {chord}")));
                }
            }
        }
        Ok(Self {
            name,
            eval: Arc::new(f),
        })
    }

    fn trusted(name: &str, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(f),
        }
    }

    /// Shannon entropy in bits.
    pub fn shannon() -> Self {
        Self::trusted("shannon", shannon_entropy)
    }

    /// `1 - sum p^2`.
    pub fn linear_entropy() -> Self {
        Self::trusted("linear_entropy", |p| {
            1.0 - p.iter().map(|x| x * x).sum::<f64>()
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, p: &ProbabilityVector) -> f64 {
        (self.eval)(p.as_slice())
    }

    fn eval_slice(&self, p: &[f64]) -> f64 {
        (self.eval)(p)
    }

    /// `f(eig(rho))`.
    pub fn lift(&self, rho: &DensityMatrix) -> f64 {
        self.eval(&ProbabilityVector::spectrum(rho))
    }
}

/// `f` on the Schmidt coefficients, padded with zeros to `d_A` entries.
pub fn monotone_pure(f: &SymmetricConcaveFn, psi: &PureState) -> f64 {
    let mut coeffs = schmidt_decompose(psi).coeffs;
    coeffs.resize(psi.dim_a().max(coeffs.len()), 0.0);
    f.eval_slice(&coeffs)
}

#[derive(Clone, Debug)]
pub struct RoofOptions {
    /// Ensemble size `m`; `None` means `rank^2`.
    pub ensemble_size: Option<usize>,
    pub restarts: usize,
    pub seed: RngSeed,
    pub bfgs: BfgsOptions,
    /// Decompositions of `rho` to try as additional starting points.
    pub warm_starts: Vec<Vec<(f64, PureState)>>,
}

impl RoofOptions {
    pub fn new(seed: RngSeed) -> Self {
        Self {
            ensemble_size: None,
            restarts: 32,
            seed,
            bfgs: BfgsOptions::default(),
            warm_starts: Vec::new(),
        }
    }
}

/// Best ensemble found by [`convex_roof`]. `value` is an upper bound on the
/// true roof.
#[derive(Clone, Debug)]
pub struct RoofResult {
    pub value: f64,
    pub ensemble: Vec<(f64, PureState)>,
    /// BFGS iterations of the winning start.
    pub iterations: usize,
    pub converged: bool,
    pub ensemble_size: usize,
    pub restarts: usize,
    pub best_start: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoofComponentJson {
    pub weight: f64,
    pub state: StateJson,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoofResultJson {
    pub value: f64,
    pub upper_bound: bool,
    pub ensemble: Vec<RoofComponentJson>,
    pub iterations: usize,
    pub converged: bool,
    pub ensemble_size: usize,
    pub restarts: usize,
    pub best_start: usize,
}

impl RoofResult {
    /// `sum p_j |Psi_j><Psi_j|`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self
            .ensemble
            .first()
            .map_or(0, |(_, s)| s.amplitudes().len());
        let mut m = ComplexMatrix::zeros(n, n);
        for (p, s) in &self.ensemble {
            let a = s.amplitudes();
            m += (a * a.adjoint()).scale(*p);
        }
        m
    }

    pub fn to_json(&self) -> RoofResultJson {
        RoofResultJson {
            value: self.value,
            upper_bound: true,
            ensemble: self
                .ensemble
                .iter()
                .map(|(p, s)| RoofComponentJson {
                    weight: *p,
                    state: s.to_json(),
                })
                .collect(),
            iterations: self.iterations,
            converged: self.converged,
            ensemble_size: self.ensemble_size,
            restarts: self.restarts,
            best_start: self.best_start,
        }
    }
}

/// Weights below this are dropped from reported ensembles.
const WEIGHT_CUTOFF: f64 = 1e-14;

struct RoofProblem<'a> {
    f: &'a SymmetricConcaveFn,
    dims: (usize, usize),
    /// Columns `w_i = sqrt(lambda_i) v_i` over the support of rho.
    w: ComplexMatrix,
    m: usize,
}

impl RoofProblem<'_> {
    fn rank(&self) -> usize {
        self.w.ncols()
    }

    fn unpack(&self, x: &[f64]) -> ComplexMatrix {
        let r = self.rank();
        ComplexMatrix::from_fn(self.m, r, |j, i| {
            let k = 2 * (j * r + i);
            Complex64::new(x[k], x[k + 1])
        })
    }

    fn pack(a: &ComplexMatrix) -> Vec<f64> {
        let (m, r) = a.shape();
        let mut x = vec![0.0; 2 * m * r];
        for j in 0..m {
            for i in 0..r {
                let k = 2 * (j * r + i);
                x[k] = a[(j, i)].re;
                x[k + 1] = a[(j, i)].im;
            }
        }
        x
    }

    /// `A (A^dagger A)^{-1/2}`, or `None` when `A` is rank deficient.
    fn isometry(a: &ComplexMatrix) -> Option<ComplexMatrix> {
        let gram = a.adjoint() * a;
        let eig = hermitian_eig(&gram).ok()?;
        if eig.values.iter().any(|&l| l < 1e-12) {
            return None;
        }
        Some(a * eig.map_spectrum(|l| Complex64::new(1.0 / l.sqrt(), 0.0)))
    }

    /// Unnormalized ensemble members `sum_i U_ji w_i` as columns.
    fn members(&self, u: &ComplexMatrix) -> ComplexMatrix {
        &self.w * u.transpose()
    }

    fn reduced_spectrum(&self, psi: &ComplexVector, p: f64) -> Vec<f64> {
        let (da, db) = self.dims;
        let c = ComplexMatrix::from_fn(da, db, |j, k| psi[j * db + k]);
        let rho = (&c * c.adjoint()).unscale(p);
        if da == 2 {
            let det = (rho[(0, 0)].re * rho[(1, 1)].re - rho[(0, 1)].norm_sqr()).max(0.0);
            let tr = rho[(0, 0)].re + rho[(1, 1)].re;
            let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
            return vec![((tr + disc) / 2.0).max(0.0), ((tr - disc) / 2.0).max(0.0)];
        }
        let mut vals = crate::state::hermitian_eigenvalues(&rho).unwrap_or_else(|_| vec![0.0; da]);
        vals.iter_mut().for_each(|v| *v = v.max(0.0));
        vals
    }

    fn cost(&self, x: &[f64]) -> f64 {
        let Some(u) = Self::isometry(&self.unpack(x)) else {
            return f64::INFINITY;
        };
        let psis = self.members(&u);
        (0..self.m)
            .map(|j| {
                let col = psis.column(j).into_owned();
                let p = col.norm_squared();
                if p <= WEIGHT_CUTOFF {
                    0.0
                } else {
                    p * self.f.eval_slice(&self.reduced_spectrum(&col, p))
                }
            })
            .sum()
    }

    fn ensemble(&self, x: &[f64]) -> Option<Vec<(f64, PureState)>> {
        let u = Self::isometry(&self.unpack(x))?;
        let psis = self.members(&u);
        let (da, db) = self.dims;
        Some(
            (0..self.m)
                .filter_map(|j| {
                    let col = psis.column(j).into_owned();
                    let p = col.norm_squared();
                    (p > WEIGHT_CUTOFF).then(|| (p, PureState::from_trusted(da, db, col)))
                })
                .collect(),
        )
    }

    /// Coordinates reproducing a given decomposition:
    /// `U_ji = <w_i | sqrt(p_j) psi_j> / lambda_i`.
    fn coordinates_of(&self, decomposition: &[(f64, PureState)]) -> Result<Vec<f64>> {
        if decomposition.len() > self.m {
            return Err(Error::Config(format!(
                "warm start has {} members but the ensemble size is {}",
                decomposition.len(),
                self.m
            )));
        }
        let r = self.rank();
        let mut u = ComplexMatrix::zeros(self.m, r);
        for (j, (p, psi)) in decomposition.iter().enumerate() {
            if psi.amplitudes().len() != self.w.nrows() {
                return Err(Error::Dimension(
                    "warm start state has the wrong dimension".into(),
                ));
            }
            let v = psi.amplitudes().scale(p.max(0.0).sqrt());
            for i in 0..r {
                let wi = self.w.column(i);
                u[(j, i)] = wi.dotc(&v) / wi.norm_squared();
            }
        }
        // complete to an isometry when the decomposition is shorter than m
        let gap = ComplexMatrix::identity(r, r) - u.adjoint() * &u;
        if gap.iter().map(|z| z.norm()).fold(0.0, f64::max) > 1e-6 {
            return Err(Error::Validation(
                "warm start does not decompose rho".into(),
            ));
        }
        Ok(Self::pack(&u))
    }
}

/// Convex roof `min sum_j p_j f(Tr_B Psi_j)` over decompositions of `rho`
/// with `ensemble_size` members.
///
/// Decompositions are parametrized as `Psi_j ∝ sum_i U_ji w_i` with `U` an
/// `m x r` isometry and `w_i` the weighted eigenvectors of `rho`. Each
/// restart runs BFGS from a random Ginibre point (seed split per restart);
/// the smallest value wins.
pub fn convex_roof(
    f: &SymmetricConcaveFn,
    rho: &DensityMatrix,
    dims: (usize, usize),
    ensemble_size: usize,
    restarts: usize,
    seed: RngSeed,
) -> Result<RoofResult> {
    let opts = RoofOptions {
        ensemble_size: Some(ensemble_size),
        restarts,
        ..RoofOptions::new(seed)
    };
    convex_roof_with(f, rho, dims, &opts)
}

pub fn convex_roof_with(
    f: &SymmetricConcaveFn,
    rho: &DensityMatrix,
    dims: (usize, usize),
    opts: &RoofOptions,
) -> Result<RoofResult> {
    let (da, db) = dims;
    if da * db != rho.dim() {
        return Err(Error::Dimension(format!(
            "dims {da}x{db} do not match state dimension {}",
            rho.dim()
        )));
    }
    if opts.restarts == 0 {
        return Err(Error::Config("restarts must be at least 1".into()));
    }
    let eig = rho.eigen();
    let support: Vec<usize> = (0..rho.dim())
        .filter(|&i| eig.values[i] > RANK_TOL)
        .collect();
    let r = support.len();
    let m = opts.ensemble_size.unwrap_or(r * r);
    if m < r {
        return Err(Error::Config(format!(
            "ensemble size {m} is below the rank {r}"
        )));
    }
    let total: f64 = support.iter().map(|&i| eig.values[i]).sum();
    let w = ComplexMatrix::from_fn(rho.dim(), r, |row, i| {
        eig.vectors[(row, support[i])] * (eig.values[support[i]] / total).sqrt()
    });

    if r == 1 {
        let psi = PureState::from_trusted(da, db, w.column(0).into_owned());
        return Ok(RoofResult {
            value: monotone_pure(f, &psi),
            ensemble: vec![(1.0, psi)],
            iterations: 0,
            converged: true,
            ensemble_size: m,
            restarts: opts.restarts,
            best_start: 0,
        });
    }

    let problem = RoofProblem { f, dims, w, m };
    let mut starts: Vec<Vec<f64>> = (0..opts.restarts)
        .map(|i| {
            let mut rng = opts.seed.split(i as u64).rng();
            RoofProblem::pack(&ginibre(m, r, &mut rng))
        })
        .collect();
    for ws in &opts.warm_starts {
        starts.push(problem.coordinates_of(ws)?);
    }

    let runs: Vec<_> = starts
        .par_iter()
        .map(|x0| bfgs(|x| problem.cost(x), x0, &opts.bfgs))
        .collect();
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.value < runs[best].value {
            best = i;
        }
    }
    let run = &runs[best];
    let ensemble = problem
        .ensemble(&run.x)
        .ok_or_else(|| Error::Validation("optimizer ended on a degenerate isometry".into()))?;
    let value = ensemble
        .iter()
        .map(|(p, psi)| p * monotone_pure(f, psi))
        .sum();
    Ok(RoofResult {
        value,
        ensemble,
        iterations: run.iterations,
        converged: run.converged,
        ensemble_size: m,
        restarts: opts.restarts,
        best_start: best,
    })
}

type Saturation = dyn Fn(usize) -> f64 + Send + Sync;

/// A predictability measure with its criteria report and saturation
/// constant `D_max(d)`.
#[derive(Clone)]
pub struct RegisteredMeasure {
    measure: CandidateMeasure,
    saturation: Arc<Saturation>,
    report: CriteriaReport,
}

impl fmt::Debug for RegisteredMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegisteredMeasure")
            .field("measure", &self.measure)
            .field("passed", &self.report.passed())
            .finish_non_exhaustive()
    }
}

impl RegisteredMeasure {
    /// Run the criteria harness and keep the report. Registration itself
    /// never fails on a bad measure; the monotone constructors do.
    pub fn register(
        measure: CandidateMeasure,
        saturation: impl Fn(usize) -> f64 + Send + Sync + 'static,
        profile: &ToleranceProfile,
        seed: RngSeed,
    ) -> Result<Self> {
        let report = check_criteria(&measure, profile, seed)?;
        Ok(Self {
            measure,
            saturation: Arc::new(saturation),
            report,
        })
    }

    /// Attach an existing report (it must belong to `measure`).
    pub fn with_report(
        measure: CandidateMeasure,
        saturation: impl Fn(usize) -> f64 + Send + Sync + 'static,
        report: CriteriaReport,
    ) -> Result<Self> {
        if report.measure != measure.name() {
            return Err(Error::Config(format!(
                "report for {} attached to {}",
                report.measure,
                measure.name()
            )));
        }
        Ok(Self {
            measure,
            saturation: Arc::new(saturation),
            report,
        })
    }

    /// Entropic predictability with `D_max(d) = log2 d`.
    pub fn p_vn(profile: &ToleranceProfile, seed: RngSeed) -> Result<Self> {
        Self::register(
            crate::criteria::p_vn(),
            |d| (d as f64).log2(),
            profile,
            seed,
        )
    }

    pub fn measure(&self) -> &CandidateMeasure {
        &self.measure
    }

    pub fn report(&self) -> &CriteriaReport {
        &self.report
    }

    pub fn saturation(&self, d: usize) -> f64 {
        (self.saturation)(d)
    }

    fn gate(&self) -> Result<()> {
        let reject = |reason: String| Error::MeasureRejected {
            name: self.measure.name().to_string(),
            reason,
        };
        if self.measure.kind() != MeasureKind::P {
            return Err(reject("not a predictability measure".into()));
        }
        if !self.report.passed() {
            let failed: Vec<String> = self
                .report
                .failed_criteria()
                .iter()
                .map(|c| c.to_string())
                .collect();
            return Err(reject(format!("failed criteria {}", failed.join(", "))));
        }
        Ok(())
    }
}

/// `D_max(d) - P(diag(eig rho_A))` for a reduced state. Evaluating `P` on
/// the spectrum makes the result a function of the spectrum alone.
pub fn theorem_monotone_reduced(p: &RegisteredMeasure, rho_a: &DensityMatrix) -> Result<f64> {
    p.gate()?;
    let spec = ProbabilityVector::spectrum(rho_a);
    let diag = DensityMatrix::diagonal(spec.as_slice())?;
    Ok(p.saturation(rho_a.dim()) - p.measure.evaluate(&diag)?)
}

/// `D_max(d_A) - P(rho_A)` on a pure joint state, with `rho_A` taken in its
/// eigenbasis (Schmidt coefficients padded to `d_A`).
pub fn theorem_monotone(p: &RegisteredMeasure, joint: &PureState) -> Result<f64> {
    p.gate()?;
    let mut coeffs = schmidt_decompose(joint).coeffs;
    coeffs.resize(joint.dim_a().max(coeffs.len()), 0.0);
    coeffs.truncate(joint.dim_a());
    let diag = DensityMatrix::diagonal(&coeffs)?;
    Ok(p.saturation(joint.dim_a()) - p.measure.evaluate(&diag)?)
}

/// [`theorem_monotone`] divided by `D_max(d_A)`.
pub fn theorem_monotone_normalized(p: &RegisteredMeasure, joint: &PureState) -> Result<f64> {
    let value = theorem_monotone(p, joint)?;
    let dmax = p.saturation(joint.dim_a());
    if dmax <= 0.0 {
        return Err(Error::Validation(format!(
            "saturation constant {dmax} is not positive"
        )));
    }
    Ok(value / dmax)
}

/// `(sum sqrt(lambda))^2 - 1`.
pub fn robustness_pure(schmidt: &SchmidtDecomposition) -> f64 {
    let s: f64 = schmidt.coeffs.iter().map(|l| l.max(0.0).sqrt()).sum();
    s * s - 1.0
}

/// Whether `P(rho_A) + C(rho_A)` vanishes (to 1e-9), the signature of a
/// maximally mixed reduced state.
pub fn maximal_state_check(
    p: &CandidateMeasure,
    c: &CandidateMeasure,
    joint: &PureState,
) -> Result<bool> {
    let rho_a = joint.reduced_a();
    Ok(p.evaluate(&rho_a)? + c.evaluate(&rho_a)? <= 1e-9)
}

/// `max |rho - I/d| <= 1e-9`.
pub fn is_maximally_mixed(rho: &DensityMatrix) -> bool {
    let d = rho.dim();
    let target = DensityMatrix::maximally_mixed(d);
    crate::state::max_abs(&(rho.matrix() - target.matrix())) <= 1e-9
}
