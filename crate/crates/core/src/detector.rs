//! Quanton coupled to a path detector.
//!
//! Path `j` of the quanton imprints the detector state `|d_j>`, giving the
//! joint state `sum_j a_j |j>_A ⊗ |d_j>_B`. Imprint states may overlap;
//! detector readouts are restricted to orthonormal projective bases, so each
//! readout yields a genuine probability distribution over outcomes.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measures::{
    predictability_vn, rel_entropy_coherence, shannon_entropy, vn_entropy, ZERO_PROB,
};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::random::{haar_vector, unitary_with, RngSeed};
use crate::state::{
    hermitian_eig, max_abs, orthonormality_gap, DensityMatrix, PureState, STATE_TOL,
};
use crate::{Complex64, ComplexMatrix, ComplexVector, Error, Result};

/// Sub-ensembles with probability at or below this are dropped.
pub const OUTCOME_CUTOFF: f64 = 1e-12;
/// Tolerance for `sum_k p_k rho_k = rho_A`.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;

/// Path amplitudes and detector imprint states.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorConfig {
    amplitudes: Vec<Complex64>,
    detectors: Vec<ComplexVector>,
}

impl DetectorConfig {
    pub fn new(amplitudes: Vec<Complex64>, detectors: Vec<ComplexVector>) -> Result<Self> {
        let d_a = amplitudes.len();
        if d_a == 0 {
            return Err(Error::Dimension("at least one path is required".into()));
        }
        if detectors.len() != d_a {
            return Err(Error::Dimension(format!(
                "{} detector states for {d_a} paths",
                detectors.len()
            )));
        }
        let d_b = detectors[0].len();
        if d_b < d_a || detectors.iter().any(|v| v.len() != d_b) {
            return Err(Error::Dimension(format!(
                "detector states must share a dimension of at least {d_a}"
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::Validation(format!("amplitude norm {norm} is not 1")));
        }
        for (j, v) in detectors.iter().enumerate() {
            let n = v.norm();
            if !n.is_finite() || (n - 1.0).abs() > STATE_TOL {
                return Err(Error::Validation(format!(
                    "detector state {j} has norm {n}"
                )));
            }
        }
        Ok(Self {
            amplitudes,
            detectors,
        })
    }

    /// Detector states `|j>` in `C^{d_A}`: a perfect which-way record.
    pub fn orthogonal(amplitudes: &[Complex64]) -> Result<Self> {
        let d = amplitudes.len();
        let dets = (0..d).map(|j| basis_vector(d, j)).collect();
        Self::new(amplitudes.to_vec(), dets)
    }

    /// Every path leaves the detector in `|0>` of `C^{d_b}`: no record.
    pub fn identical(amplitudes: &[Complex64], d_b: usize) -> Result<Self> {
        let d = amplitudes.len();
        Self::new(amplitudes.to_vec(), vec![basis_vector(d_b.max(1), 0); d])
    }

    /// Detector states with every pairwise overlap `<d_j|d_k> = c`,
    /// `c` in `[0, 1]`: the columns of the square root of the Gram matrix
    /// `(1 - c) I + c J`.
    pub fn equal_overlap(amplitudes: &[Complex64], c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::Config(format!("overlap {c} outside [0, 1]")));
        }
        let d = amplitudes.len();
        let gram = ComplexMatrix::from_fn(d, d, |j, k| {
            Complex64::new(if j == k { 1.0 } else { c }, 0.0)
        });
        let root = hermitian_eig(&gram)?.map_spectrum(|v| Complex64::new(v.max(0.0).sqrt(), 0.0));
        let dets = (0..d)
            .map(|j| {
                let col = root.column(j).into_owned();
                let n = col.norm();
                col.unscale(n)
            })
            .collect();
        Self::new(amplitudes.to_vec(), dets)
    }

    /// Two paths, detector states `|0>` and `cos t |0> + sin t |1>`.
    pub fn qubit_with_overlap(amplitudes: [Complex64; 2], overlap: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&overlap) {
            return Err(Error::Config(format!("overlap {overlap} outside [-1, 1]")));
        }
        let s = (1.0 - overlap * overlap).max(0.0).sqrt();
        let d1 =
            ComplexVector::from_vec(vec![Complex64::new(overlap, 0.0), Complex64::new(s, 0.0)]);
        Self::new(amplitudes.to_vec(), vec![basis_vector(2, 0), d1])
    }

    /// Haar-random amplitudes and independent Haar-random detector states in
    /// `C^{d_b}`.
    pub fn random_with<R: Rng + ?Sized>(d_a: usize, d_b: usize, rng: &mut R) -> Result<Self> {
        if d_a == 0 || d_b < d_a {
            return Err(Error::Dimension(format!(
                "need 1 <= d_A <= d_B, got {d_a}x{d_b}"
            )));
        }
        let amps = haar_vector(d_a, rng);
        let dets = (0..d_a).map(|_| haar_vector(d_b, rng)).collect();
        Self::new(amps.iter().copied().collect(), dets)
    }

    pub fn dim_a(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn dim_b(&self) -> usize {
        self.detectors[0].len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn detectors(&self) -> &[ComplexVector] {
        &self.detectors
    }

    pub fn joint_state(&self) -> PureState {
        build_joint_state(self)
    }

    pub fn to_json(&self) -> DetectorConfigJson {
        DetectorConfigJson {
            amps_re: self.amplitudes.iter().map(|a| a.re).collect(),
            amps_im: self.amplitudes.iter().map(|a| a.im).collect(),
            detectors: self
                .detectors
                .iter()
                .map(|v| {
                    [
                        v.iter().map(|z| z.re).collect(),
                        v.iter().map(|z| z.im).collect(),
                    ]
                })
                .collect(),
        }
    }
}

fn basis_vector(d: usize, j: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(d);
    v[j] = Complex64::new(1.0, 0.0);
    v
}

/// `{amps_re, amps_im, detectors: [[re, im], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfigJson {
    pub amps_re: Vec<f64>,
    pub amps_im: Vec<f64>,
    pub detectors: Vec<[Vec<f64>; 2]>,
}

impl TryFrom<DetectorConfigJson> for DetectorConfig {
    type Error = Error;
    fn try_from(js: DetectorConfigJson) -> Result<Self> {
        if js.amps_re.len() != js.amps_im.len() {
            return Err(Error::Dimension(
                "amps_re and amps_im differ in length".into(),
            ));
        }
        let amps = js
            .amps_re
            .iter()
            .zip(&js.amps_im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect();
        let dets = js
            .detectors
            .iter()
            .map(|[re, im]| {
                if re.len() != im.len() {
                    return Err(Error::Dimension("detector re/im lengths differ".into()));
                }
                Ok(ComplexVector::from_iterator(
                    re.len(),
                    re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        DetectorConfig::new(amps, dets)
    }
}

/// `sum_j a_j |j>_A ⊗ |d_j>_B`.
pub fn build_joint_state(config: &DetectorConfig) -> PureState {
    let (d_a, d_b) = (config.dim_a(), config.dim_b());
    let mut amps = ComplexVector::zeros(d_a * d_b);
    for (j, (a, det)) in config.amplitudes.iter().zip(&config.detectors).enumerate() {
        for (k, z) in det.iter().enumerate() {
            amps[j * d_b + k] = a * z;
        }
    }
    PureState::from_trusted(d_a, d_b, amps)
}

/// Orthonormal basis of the detector space, vectors as columns.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementBasis {
    vectors: ComplexMatrix,
}

impl MeasurementBasis {
    pub fn new(vectors: ComplexMatrix) -> Result<Self> {
        if !vectors.is_square() || vectors.nrows() == 0 {
            return Err(Error::Dimension(
                "a basis needs d vectors of dimension d".into(),
            ));
        }
        let gap = orthonormality_gap(&vectors);
        if gap > 1e-9 {
            return Err(Error::Validation(format!(
                "basis is not orthonormal (gap {gap:e})"
            )));
        }
        Ok(Self { vectors })
    }

    pub fn computational(d: usize) -> Self {
        Self {
            vectors: ComplexMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vectors(&self) -> &ComplexMatrix {
        &self.vectors
    }
}

/// One detector outcome: probability and conditional quanton state.
#[derive(Clone, Debug)]
pub struct SubEnsemble {
    pub outcome: usize,
    pub probability: f64,
    pub state: DensityMatrix,
}

/// Quanton state sorted by detector outcome.
#[derive(Clone, Debug)]
pub struct SubEnsembleSet {
    dim_a: usize,
    entries: Vec<SubEnsemble>,
    basis: MeasurementBasis,
}

impl SubEnsembleSet {
    pub fn entries(&self) -> &[SubEnsemble] {
        &self.entries
    }

    pub fn basis(&self) -> &MeasurementBasis {
        &self.basis
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    /// `sum_k p_k rho_k`.
    pub fn averaged_state(&self) -> ComplexMatrix {
        self.entries
            .iter()
            .fold(ComplexMatrix::zeros(self.dim_a, self.dim_a), |acc, e| {
                acc + e.state.matrix().scale(e.probability)
            })
    }
}

/// Measure the detector of `joint` in `basis` and sort the quanton into
/// conditional states.
pub fn sort_ensemble(joint: &PureState, basis: &MeasurementBasis) -> Result<SubEnsembleSet> {
    if basis.dim() != joint.dim_b() {
        return Err(Error::Dimension(format!(
            "basis of dimension {} for a detector of dimension {}",
            basis.dim(),
            joint.dim_b()
        )));
    }
    // column k holds (I ⊗ <b_k|)|Psi>
    let branches = joint.coefficient_matrix() * basis.vectors.conjugate();
    let mut entries = Vec::new();
    for k in 0..basis.dim() {
        let phi = branches.column(k).into_owned();
        let p = phi.norm_squared();
        if p > OUTCOME_CUTOFF {
            let unit = phi.unscale(p.sqrt());
            entries.push(SubEnsemble {
                outcome: k,
                probability: p,
                state: DensityMatrix::from_trusted(&unit * unit.adjoint()),
            });
        }
    }
    Ok(SubEnsembleSet {
        dim_a: joint.dim_a(),
        entries,
        basis: basis.clone(),
    })
}

/// Which-way knowledge `log2 d_A - sum_k p_k S(diag rho_k)`.
pub fn distinguishability_vn(sub: &SubEnsembleSet) -> f64 {
    let avg: f64 = sub
        .entries
        .iter()
        .map(|e| e.probability * shannon_entropy(&e.state.diagonal_probs()))
        .sum();
    (sub.dim_a as f64).log2() - avg
}

/// `sum_k p_k C_re(rho_k)`.
pub fn avg_coherence(sub: &SubEnsembleSet) -> f64 {
    sub.entries
        .iter()
        .map(|e| e.probability * rel_entropy_coherence(&e.state))
        .sum()
}

fn check_reconstruction(rho_a: &DensityMatrix, sub: &SubEnsembleSet) -> Result<()> {
    if rho_a.dim() != sub.dim_a {
        return Err(Error::Dimension(
            "sub-ensembles and state differ in dimension".into(),
        ));
    }
    let gap = max_abs(&(sub.averaged_state() - rho_a.matrix()));
    if gap > RECONSTRUCTION_TOL {
        return Err(Error::Validation(format!(
            "sub-ensembles do not average to the given state (gap {gap:e})"
        )));
    }
    Ok(())
}

/// `E = S(diag rho_A) - sum_k p_k S(diag rho_k)`: the part of the which-way
/// knowledge not already available as predictability.
pub fn e_gap_diag(rho_a: &DensityMatrix, sub: &SubEnsembleSet) -> Result<f64> {
    check_reconstruction(rho_a, sub)?;
    let avg: f64 = sub
        .entries
        .iter()
        .map(|e| e.probability * shannon_entropy(&e.state.diagonal_probs()))
        .sum();
    Ok(shannon_entropy(&rho_a.diagonal_probs()) - avg)
}

/// `S(rho_A) - sum_k p_k S(rho_k)`, the full entropy gap.
pub fn e_gap_full(rho_a: &DensityMatrix, sub: &SubEnsembleSet) -> Result<f64> {
    check_reconstruction(rho_a, sub)?;
    let avg: f64 = sub
        .entries
        .iter()
        .map(|e| e.probability * vn_entropy(&e.state))
        .sum();
    Ok(vn_entropy(rho_a) - avg)
}

/// Distinguishability for `basis` straight from the branch amplitudes.
/// Equals [`distinguishability_vn`] of the sorted ensemble; used inside the
/// maximization where building sub-ensembles would dominate the cost.
fn distinguishability_fast(coeffs: &ComplexMatrix, basis: &ComplexMatrix) -> f64 {
    let branches = coeffs * basis.conjugate();
    let d_a = coeffs.nrows();
    let mut conditional = 0.0;
    for k in 0..branches.ncols() {
        let mut p = 0.0;
        let mut h = 0.0;
        for j in 0..d_a {
            let q = branches[(j, k)].norm_sqr();
            p += q;
            if q > ZERO_PROB {
                h -= q * q.log2();
            }
        }
        if p > ZERO_PROB {
            h += p * p.log2();
        }
        conditional += h;
    }
    (d_a as f64).log2() - conditional
}

/// Hermitian generator from `d^2` reals: diagonal first, then `(re, im)`
/// of the strict upper triangle.
fn generator(x: &[f64], d: usize) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(d, d);
    let mut idx = d;
    for i in 0..d {
        h[(i, i)] = Complex64::new(x[i], 0.0);
        for j in (i + 1)..d {
            let z = Complex64::new(x[idx], x[idx + 1]);
            idx += 2;
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

/// `exp(i H)` through the spectral decomposition of `H`.
pub fn unitary_from_generator(x: &[f64], d: usize) -> ComplexMatrix {
    let eig = hermitian_eig(&generator(x, d)).expect("generator is Hermitian by construction");
    eig.map_spectrum(|v| Complex64::from_polar(1.0, v))
}

/// Cayley map `(I - i H)^{-1} (I + i H)`: unitary for Hermitian `H` and
/// much cheaper than the exponential inside the search loop.
fn cayley(h: &ComplexMatrix) -> ComplexMatrix {
    let d = h.nrows();
    let ih = h * Complex64::new(0.0, 1.0);
    let id = ComplexMatrix::identity(d, d);
    (&id - &ih)
        .lu()
        .solve(&(&id + &ih))
        .expect("I - iH is invertible for Hermitian H")
}

#[derive(Clone, Debug)]
pub struct MaximizeOptions {
    pub restarts: usize,
    pub seed: RngSeed,
    /// Extra starting bases searched in addition to the random restarts.
    pub warm_starts: Vec<MeasurementBasis>,
    pub simplex: NelderMeadOptions,
}

impl MaximizeOptions {
    pub fn new(restarts: usize, seed: RngSeed) -> Self {
        Self {
            restarts,
            seed,
            warm_starts: Vec::new(),
            simplex: NelderMeadOptions {
                max_evals: 3_000,
                initial_step: 0.4,
                f_tol: 1e-11,
                x_tol: 1e-6,
                polish_rounds: 1,
            },
        }
    }
}

/// Best distinguishability found and the basis attaining it.
#[derive(Clone, Debug)]
pub struct MaximizedDistinguishability {
    pub value: f64,
    pub basis: MeasurementBasis,
    /// Index of the winning start (random restarts first, then warm starts).
    pub start_index: usize,
    pub evaluations: usize,
}

/// Largest distinguishability over orthonormal detector bases.
///
/// Each start is a reference basis `W` (the computational basis for restart
/// 0, Haar-random for the rest, then any warm starts); the search moves over
/// `W (I - iH)^{-1} (I + iH)` with Nelder-Mead on the `d_B (d_B - 1)` real
/// off-diagonal parameters of `H`.
/// Restarts use seeds split from the master seed; the reduction keeps the
/// first strict maximum, so results do not depend on scheduling.
pub fn maximize_distinguishability(
    joint: &PureState,
    restarts: usize,
    seed: RngSeed,
) -> Result<(f64, MeasurementBasis)> {
    let best = maximize_distinguishability_with(joint, &MaximizeOptions::new(restarts, seed))?;
    Ok((best.value, best.basis))
}

pub fn maximize_distinguishability_with(
    joint: &PureState,
    opts: &MaximizeOptions,
) -> Result<MaximizedDistinguishability> {
    if opts.restarts < 1 {
        return Err(Error::Config("restarts must be at least 1".into()));
    }
    let d_b = joint.dim_b();
    for w in &opts.warm_starts {
        if w.dim() != d_b {
            return Err(Error::Dimension(
                "warm-start basis dimension differs from the detector".into(),
            ));
        }
    }
    let coeffs = joint.coefficient_matrix();
    let mut starts: Vec<ComplexMatrix> = (0..opts.restarts)
        .map(|i| {
            if i == 0 {
                ComplexMatrix::identity(d_b, d_b)
            } else {
                unitary_with(d_b, &mut opts.seed.split(i as u64).rng())
            }
        })
        .collect();
    starts.extend(opts.warm_starts.iter().map(|w| w.vectors.clone()));

    let runs: Vec<(f64, ComplexMatrix, usize)> = starts
        .par_iter()
        .map(|reference| {
            // phases of the basis vectors do not affect the statistics, so
            // the diagonal of the generator stays at zero
            let full = |y: &[f64]| {
                let mut x = vec![0.0; d_b];
                x.extend_from_slice(y);
                x
            };
            let objective = |y: &[f64]| {
                let u = reference * cayley(&generator(&full(y), d_b));
                -distinguishability_fast(&coeffs, &u)
            };
            let y0 = vec![0.0; d_b * (d_b - 1)];
            let start_value = -objective(&y0);
            let m = nelder_mead(objective, &y0, &opts.simplex);
            if -m.value > start_value {
                (
                    -m.value,
                    reference * cayley(&generator(&full(&m.x), d_b)),
                    m.evaluations,
                )
            } else {
                (start_value, reference.clone(), m.evaluations)
            }
        })
        .collect();

    let evaluations = runs.iter().map(|r| r.2).sum();
    let (start_index, (_, basis, _)) = runs
        .into_iter()
        .enumerate()
        .reduce(|best, cur| if cur.1 .0 > best.1 .0 { cur } else { best })
        .expect("at least one start");
    // re-orthonormalize away round-off from the products
    let basis = MeasurementBasis::new(basis.clone()).unwrap_or_else(|_| {
        let (q, _) = basis.qr().unpack();
        MeasurementBasis { vectors: q }
    });
    let value = distinguishability_vn(&sort_ensemble(joint, &basis)?);
    Ok(MaximizedDistinguishability {
        value,
        basis,
        start_index,
        evaluations,
    })
}

/// All complementarity quantities for one configuration and readout basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ComplementarityRecord {
    pub P: f64,
    pub C_re: f64,
    pub D: f64,
    pub C_avg: f64,
    pub E_diag: f64,
    pub E_script: f64,
    pub D_max: f64,
    /// `log2 d_A - (C_re + P)`.
    pub slack_eq6: f64,
    /// `log2 d_A - (D + C_avg)`.
    pub slack_eq8: f64,
}

impl ComplementarityRecord {
    /// Evaluate every quantity; `d_max` is the maximized distinguishability
    /// for the configuration.
    pub fn evaluate(config: &DetectorConfig, basis: &MeasurementBasis, d_max: f64) -> Result<Self> {
        let joint = config.joint_state();
        let rho_a = joint.reduced_a();
        let sub = sort_ensemble(&joint, basis)?;
        let log_d = (config.dim_a() as f64).log2();
        let p = predictability_vn(&rho_a);
        let c_re = rel_entropy_coherence(&rho_a);
        let d = distinguishability_vn(&sub);
        let c_avg = avg_coherence(&sub);
        Ok(Self {
            P: p,
            C_re: c_re,
            D: d,
            C_avg: c_avg,
            E_diag: e_gap_diag(&rho_a, &sub)?,
            E_script: e_gap_full(&rho_a, &sub)?,
            D_max: d_max,
            slack_eq6: log_d - (c_re + p),
            slack_eq8: log_d - (d + c_avg),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::unitary_with;
    use crate::state::schmidt_decompose;
    use approx::assert_abs_diff_eq;

    fn real(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    fn uniform(d: usize) -> Vec<Complex64> {
        real(&vec![1.0 / (d as f64).sqrt(); d])
    }

    #[test]
    fn identical_detectors_give_product_state() {
        let cfg = DetectorConfig::identical(&real(&[0.6, 0.8]), 2).unwrap();
        assert_eq!(schmidt_decompose(&cfg.joint_state()).rank(), 1);
    }

    #[test]
    fn orthogonal_uniform_is_maximally_entangled() {
        for d in 2..=4 {
            let cfg = DetectorConfig::orthogonal(&uniform(d)).unwrap();
            let s = schmidt_decompose(&cfg.joint_state());
            assert!(s.coeffs.iter().all(|&l| (l - 1.0 / d as f64).abs() < 1e-14));
        }
    }

    #[test]
    fn joint_state_is_normalized() {
        let mut rng = RngSeed(1).rng();
        for d in 2..=4 {
            for _ in 0..20 {
                let amps = haar_vector(d, &mut rng);
                let dets = (0..d).map(|_| haar_vector(d + 1, &mut rng)).collect();
                let cfg = DetectorConfig::new(amps.as_slice().to_vec(), dets).unwrap();
                assert!((cfg.joint_state().amplitudes().norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn config_validation() {
        let bad_norm = DetectorConfig::new(
            real(&[1.0, 1.0]),
            vec![basis_vector(2, 0), basis_vector(2, 1)],
        );
        assert!(matches!(bad_norm, Err(Error::Validation(_))));
        let short_b = DetectorConfig::new(
            real(&[0.6, 0.8]),
            vec![basis_vector(1, 0), basis_vector(1, 0)],
        );
        assert!(matches!(short_b, Err(Error::Dimension(_))));
        let bad_det = DetectorConfig::new(
            real(&[0.6, 0.8]),
            vec![
                basis_vector(2, 0),
                ComplexVector::from_vec(real(&[1.0, 1.0])),
            ],
        );
        assert!(matches!(bad_det, Err(Error::Validation(_))));
        assert!(DetectorConfig::equal_overlap(&uniform(3), 1.5).is_err());
    }

    #[test]
    fn equal_overlap_has_requested_gram() {
        for d in 2..=4 {
            for &c in &[0.0, 0.3, 0.9, 1.0] {
                let cfg = DetectorConfig::equal_overlap(&uniform(d), c).unwrap();
                for j in 0..d {
                    for k in 0..d {
                        let want = if j == k { 1.0 } else { c };
                        assert!(
                            (cfg.detectors()[j].dotc(&cfg.detectors()[k]).re - want).abs() < 1e-12
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let cfg = DetectorConfig::qubit_with_overlap(
            [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)],
            0.3,
        )
        .unwrap();
        let text = serde_json::to_string(&cfg.to_json()).unwrap();
        let back: DetectorConfigJson = serde_json::from_str(&text).unwrap();
        let back = DetectorConfig::try_from(back).unwrap();
        assert_eq!(back.amplitudes(), cfg.amplitudes());
        for (a, b) in back.detectors().iter().zip(cfg.detectors()) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(serde_json::from_str::<DetectorConfigJson>(
            r#"{"amps_re":[1],"amps_im":[0],"detectors":[[[1],[0]]],"extra":0}"#
        )
        .is_err());
    }

    #[test]
    fn orthogonal_detectors_sorted_in_detector_basis() {
        let amps = real(&[0.5, 0.5f64.sqrt(), 0.5]);
        let cfg = DetectorConfig::orthogonal(&amps).unwrap();
        let sub = sort_ensemble(&cfg.joint_state(), &MeasurementBasis::computational(3)).unwrap();
        assert_eq!(sub.entries().len(), 3);
        for (k, e) in sub.entries().iter().enumerate() {
            assert_abs_diff_eq!(e.probability, amps[k].norm_sqr(), epsilon = 1e-14);
            assert!(
                max_abs(&(e.state.matrix() - DensityMatrix::basis_state(3, k).matrix())) < 1e-14
            );
        }
    }

    #[test]
    fn identical_detectors_leave_quanton_unchanged() {
        let mut rng = RngSeed(3).rng();
        let amps = haar_vector(3, &mut rng);
        let cfg = DetectorConfig::identical(amps.as_slice(), 3).unwrap();
        let joint = cfg.joint_state();
        let basis = MeasurementBasis::new(unitary_with(3, &mut rng)).unwrap();
        let sub = sort_ensemble(&joint, &basis).unwrap();
        for e in sub.entries() {
            assert!(max_abs(&(e.state.matrix() - joint.reduced_a().matrix())) < 1e-12);
        }
    }

    #[test]
    fn outcome_probabilities_sum_to_one() {
        let mut rng = RngSeed(4).rng();
        for _ in 0..50 {
            let amps = haar_vector(3, &mut rng);
            let dets = (0..3).map(|_| haar_vector(4, &mut rng)).collect();
            let cfg = DetectorConfig::new(amps.as_slice().to_vec(), dets).unwrap();
            let joint = cfg.joint_state();
            let sub = sort_ensemble(
                &joint,
                &MeasurementBasis::new(unitary_with(4, &mut rng)).unwrap(),
            )
            .unwrap();
            let total: f64 = sub.entries().iter().map(|e| e.probability).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            assert!(max_abs(&(sub.averaged_state() - joint.reduced_a().matrix())) < 1e-12);
        }
        let cfg = DetectorConfig::orthogonal(&uniform(2)).unwrap();
        assert!(matches!(
            sort_ensemble(&cfg.joint_state(), &MeasurementBasis::computational(3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn distinguishability_endpoints() {
        for d in 2..=4 {
            let cfg = DetectorConfig::orthogonal(&uniform(d)).unwrap();
            let sub =
                sort_ensemble(&cfg.joint_state(), &MeasurementBasis::computational(d)).unwrap();
            assert_abs_diff_eq!(
                distinguishability_vn(&sub),
                (d as f64).log2(),
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(avg_coherence(&sub), 0.0, epsilon = 1e-12);
        }
        let mut rng = RngSeed(5).rng();
        let amps = haar_vector(3, &mut rng);
        let cfg = DetectorConfig::identical(amps.as_slice(), 3).unwrap();
        let joint = cfg.joint_state();
        let sub = sort_ensemble(
            &joint,
            &MeasurementBasis::new(unitary_with(3, &mut rng)).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(
            distinguishability_vn(&sub),
            predictability_vn(&joint.reduced_a()),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            avg_coherence(&sub),
            rel_entropy_coherence(&joint.reduced_a()),
            epsilon = 1e-10
        );
    }

    /// Closed form for two paths with amplitudes (a0, a1), detector states
    /// |0> and cos t|0> + sin t|1>, read out in the computational basis:
    /// outcome 0 has branch (a0, a1 cos t), outcome 1 has branch (0, a1 sin t).
    fn qubit_distinguishability_oracle(a0: f64, a1: f64, c: f64) -> f64 {
        let q00 = a0 * a0;
        let q10 = a1 * a1 * c * c;
        let p0 = q00 + q10;
        let h0 = if p0 > 0.0 {
            crate::measures::binary_entropy(q00 / p0)
        } else {
            0.0
        };
        // outcome 1 is a basis state of A, entropy 0
        1.0 - p0 * h0
    }

    #[test]
    fn distinguishability_matches_overlap_sweep_oracle() {
        let (a0, a1) = (0.6, 0.8);
        for i in 0..=20 {
            let c = i as f64 / 20.0;
            let cfg =
                DetectorConfig::qubit_with_overlap(real(&[a0, a1]).try_into().unwrap(), c).unwrap();
            let sub =
                sort_ensemble(&cfg.joint_state(), &MeasurementBasis::computational(2)).unwrap();
            assert_abs_diff_eq!(
                distinguishability_vn(&sub),
                qubit_distinguishability_oracle(a0, a1, c),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn gap_endpoints_and_identity() {
        for d in 2..=4 {
            let cfg = DetectorConfig::orthogonal(&uniform(d)).unwrap();
            let joint = cfg.joint_state();
            let rho_a = joint.reduced_a();
            let sub = sort_ensemble(&joint, &MeasurementBasis::computational(d)).unwrap();
            assert_abs_diff_eq!(
                e_gap_diag(&rho_a, &sub).unwrap(),
                (d as f64).log2(),
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                e_gap_full(&rho_a, &sub).unwrap(),
                vn_entropy(&rho_a),
                epsilon = 1e-12
            );
        }
        let mut rng = RngSeed(8).rng();
        for _ in 0..100 {
            let d = 2 + rng.random_range(0..3usize);
            let amps = haar_vector(d, &mut rng);
            let dets = (0..d).map(|_| haar_vector(d, &mut rng)).collect();
            let cfg = DetectorConfig::new(amps.as_slice().to_vec(), dets).unwrap();
            let joint = cfg.joint_state();
            let rho_a = joint.reduced_a();
            let sub = sort_ensemble(
                &joint,
                &MeasurementBasis::new(unitary_with(d, &mut rng)).unwrap(),
            )
            .unwrap();
            let e = e_gap_diag(&rho_a, &sub).unwrap();
            assert!(e >= -1e-10);
            assert!(e_gap_full(&rho_a, &sub).unwrap() >= -1e-10);
            assert!((distinguishability_vn(&sub) - predictability_vn(&rho_a) - e).abs() < 1e-10);
        }
        let cfg = DetectorConfig::identical(&uniform(3), 3).unwrap();
        let joint = cfg.joint_state();
        let sub = sort_ensemble(&joint, &MeasurementBasis::computational(3)).unwrap();
        assert_abs_diff_eq!(
            e_gap_diag(&joint.reduced_a(), &sub).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            e_gap_full(&joint.reduced_a(), &sub).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gap_rejects_mismatched_state() {
        let cfg = DetectorConfig::orthogonal(&real(&[0.6, 0.8])).unwrap();
        let sub = sort_ensemble(&cfg.joint_state(), &MeasurementBasis::computational(2)).unwrap();
        let other = DensityMatrix::maximally_mixed(2);
        assert!(matches!(
            e_gap_diag(&other, &sub),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            e_gap_full(&other, &sub),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn fast_distinguishability_matches_sorted_route() {
        let mut rng = RngSeed(9).rng();
        for _ in 0..50 {
            let amps = haar_vector(3, &mut rng);
            let dets = (0..3).map(|_| haar_vector(3, &mut rng)).collect();
            let joint = DetectorConfig::new(amps.as_slice().to_vec(), dets)
                .unwrap()
                .joint_state();
            let u = unitary_with(3, &mut rng);
            let slow = distinguishability_vn(
                &sort_ensemble(&joint, &MeasurementBasis::new(u.clone()).unwrap()).unwrap(),
            );
            assert!(
                (slow - distinguishability_fast(&joint.coefficient_matrix(), &u)).abs() < 1e-12
            );
        }
    }

    #[test]
    fn generator_exponential_is_unitary() {
        let mut rng = RngSeed(10).rng();
        for d in 1..=4 {
            let x: Vec<f64> = (0..d * d).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert!(orthonormality_gap(&unitary_from_generator(&x, d)) < 1e-12);
        }
        assert!(
            max_abs(&(unitary_from_generator(&[0.0; 9], 3) - ComplexMatrix::identity(3, 3)))
                < 1e-15
        );
    }

    #[test]
    fn maximum_for_orthogonal_detectors_is_log_d() {
        let mut rng = RngSeed(11).rng();
        for d in 2..=3 {
            let amps = haar_vector(d, &mut rng);
            let cfg = DetectorConfig::orthogonal(amps.as_slice()).unwrap();
            let (v, basis) =
                maximize_distinguishability(&cfg.joint_state(), 4, RngSeed(1)).unwrap();
            assert!(((d as f64).log2() - v).abs() < 1e-6, "d={d}: {v}");
            assert!(orthonormality_gap(basis.vectors()) < 1e-9);
        }
    }

    #[test]
    fn maximum_for_identical_detectors_is_predictability() {
        let mut rng = RngSeed(12).rng();
        let amps = haar_vector(3, &mut rng);
        let cfg = DetectorConfig::identical(amps.as_slice(), 3).unwrap();
        let joint = cfg.joint_state();
        let (v, _) = maximize_distinguishability(&joint, 3, RngSeed(2)).unwrap();
        assert!((v - predictability_vn(&joint.reduced_a())).abs() < 1e-6);
    }

    #[test]
    fn maximum_matches_grid_search_for_qubits() {
        // 2x2 unitaries up to phases: columns (cos t, e^{i f} sin t) and
        // (-e^{-i f} sin t, cos t); global and per-column phases do not
        // change outcome probabilities.
        let amps = real(&[0.6, 0.8]);
        let cfg =
            DetectorConfig::qubit_with_overlap(amps.clone().try_into().unwrap(), 0.5).unwrap();
        let joint = cfg.joint_state();
        let coeffs = joint.coefficient_matrix();
        let n = 400;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=n {
            let t = std::f64::consts::FRAC_PI_2 * i as f64 / n as f64;
            for k in 0..=n / 4 {
                let f = std::f64::consts::TAU * k as f64 / (n / 4) as f64;
                let e = Complex64::from_polar(1.0, f);
                let u = ComplexMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        Complex64::new(t.cos(), 0.0),
                        -e.conj() * t.sin(),
                        e * t.sin(),
                        Complex64::new(t.cos(), 0.0),
                    ],
                );
                best = best.max(distinguishability_fast(&coeffs, &u));
            }
        }
        let (v, _) = maximize_distinguishability(&joint, 8, RngSeed(3)).unwrap();
        assert!(v >= best - 1e-4, "optimizer {v} below grid {best}");
        assert!(v <= best + 1e-4, "optimizer {v} above grid {best}");
    }

    #[test]
    fn maximize_requires_a_restart() {
        let cfg = DetectorConfig::orthogonal(&uniform(2)).unwrap();
        assert!(matches!(
            maximize_distinguishability(&cfg.joint_state(), 0, RngSeed(0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn maximize_is_deterministic_and_beats_warm_start() {
        let mut rng = RngSeed(13).rng();
        let amps = haar_vector(3, &mut rng);
        let dets = (0..3).map(|_| haar_vector(3, &mut rng)).collect();
        let joint = DetectorConfig::new(amps.as_slice().to_vec(), dets)
            .unwrap()
            .joint_state();
        let a = maximize_distinguishability(&joint, 4, RngSeed(5)).unwrap();
        let b = maximize_distinguishability(&joint, 4, RngSeed(5)).unwrap();
        assert_eq!(a.0, b.0);
        let warm = MeasurementBasis::new(unitary_with(3, &mut rng)).unwrap();
        let warm_value = distinguishability_vn(&sort_ensemble(&joint, &warm).unwrap());
        let mut opts = MaximizeOptions::new(1, RngSeed(6));
        opts.warm_starts.push(warm);
        let m = maximize_distinguishability_with(&joint, &opts).unwrap();
        assert!(m.value >= warm_value - 1e-12);
    }

    #[test]
    fn record_fields_are_consistent() {
        let cfg = DetectorConfig::equal_overlap(&uniform(3), 0.4).unwrap();
        let rec = ComplementarityRecord::evaluate(&cfg, &MeasurementBasis::computational(3), 1.2)
            .unwrap();
        assert!(rec.slack_eq6 >= -1e-10 && rec.slack_eq8 >= -1e-9);
        assert!((rec.D - rec.P - rec.E_diag).abs() < 1e-10);
        assert_eq!(rec.D_max, 1.2);
    }
}
