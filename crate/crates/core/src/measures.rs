//! Scalar complementarity measures on single-system states.
//!
//! All entropies are in bits with `0 log 0 = 0`; probabilities below
//! [`ZERO_PROB`] are treated as exact zeros.

use serde::{Deserialize, Serialize};

use crate::detector::DetectorConfig;
use crate::state::{DensityMatrix, PureState, RANK_TOL};
use crate::{Complex64, ComplexMatrix, Error, Result};

pub const ZERO_PROB: f64 = 1e-15;
/// Components above `-SIMPLEX_CLIP` are clipped to zero in [`ProbabilityVector`].
pub const SIMPLEX_CLIP: f64 = 1e-12;

/// A point of the probability simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(mut p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Validation("empty probability vector".into()));
        }
        for x in p.iter_mut() {
            if !x.is_finite() || *x < -SIMPLEX_CLIP {
                return Err(Error::Validation(format!("invalid probability {x}")));
            }
            *x = x.max(0.0);
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::Validation(format!("probabilities sum to {s}")));
        }
        Ok(Self(p))
    }

    /// Eigenvalues of a density matrix, padded with zeros to `len`.
    pub fn spectrum(rho: &DensityMatrix) -> Self {
        Self(rho.eigenvalues().into_iter().map(|x| x.max(0.0)).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn padded(&self, len: usize) -> Self {
        let mut p = self.0.clone();
        p.resize(len.max(p.len()), 0.0);
        Self(p)
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;
    fn try_from(p: Vec<f64>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Self {
        p.0
    }
}

/// `-sum p log2 p`.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > ZERO_PROB)
        .map(|&x| -x * x.log2())
        .sum::<f64>()
        .max(0.0)
}

/// `h(x) = -x log2 x - (1-x) log2 (1-x)`.
pub fn binary_entropy(x: f64) -> f64 {
    shannon_entropy(&[x, 1.0 - x])
}

/// Von Neumann entropy `S(rho)` in bits.
pub fn vn_entropy(rho: &DensityMatrix) -> f64 {
    shannon_entropy(&rho.eigenvalues())
}

/// Relative entropy of coherence `S(diag rho) - S(rho)`.
pub fn rel_entropy_coherence(rho: &DensityMatrix) -> f64 {
    (shannon_entropy(&rho.diagonal_probs()) - vn_entropy(rho)).max(0.0)
}

/// Entropic predictability `log2 d - S(diag rho)`.
pub fn predictability_vn(rho: &DensityMatrix) -> f64 {
    predictability_of_probs(&rho.diagonal_probs())
}

/// `log2 d - H(p)`.
pub fn predictability_of_probs(p: &[f64]) -> f64 {
    ((p.len() as f64).log2() - shannon_entropy(p)).max(0.0)
}

/// Qubit predictability `|rho_00 - rho_11|`.
pub fn qubit_predictability(rho: &DensityMatrix) -> Result<f64> {
    require_dim(rho, 2, "qubit predictability")?;
    Ok((rho.matrix()[(0, 0)].re - rho.matrix()[(1, 1)].re).abs())
}

/// Qubit visibility `2 |rho_01|`.
pub fn qubit_visibility(rho: &DensityMatrix) -> Result<f64> {
    require_dim(rho, 2, "qubit visibility")?;
    Ok(2.0 * rho.matrix()[(0, 1)].norm())
}

fn require_dim(rho: &DensityMatrix, d: usize, what: &str) -> Result<()> {
    if rho.dim() != d {
        return Err(Error::Dimension(format!(
            "{what} needs dimension {d}, got {}",
            rho.dim()
        )));
    }
    Ok(())
}

/// `2 |a_00 a_11 - a_01 a_10|` for a two-qubit pure state.
pub fn concurrence_pure_2q(psi: &PureState) -> Result<f64> {
    if psi.dims() != (2, 2) {
        return Err(Error::Dimension(format!(
            "concurrence needs a 2x2 state, got {}x{}",
            psi.dim_a(),
            psi.dim_b()
        )));
    }
    let a = psi.amplitudes();
    Ok((2.0 * (a[0] * a[3] - a[1] * a[2]).norm()).min(1.0))
}

/// `sigma_y ⊗ sigma_y` in the A-major product basis. Its entries are real.
pub(crate) fn spin_flip_operator() -> ComplexMatrix {
    let z = Complex64::new(0.0, 0.0);
    let p = Complex64::new(1.0, 0.0);
    let m = -p;
    ComplexMatrix::from_row_slice(4, 4, &[z, z, z, m, z, z, p, z, z, p, z, z, m, z, z, z])
}

/// Wootters concurrence of a two-qubit state.
///
/// With `rho = sum_i |w_i><w_i|` over subnormalized eigenvectors, the
/// spin-flip values `mu_i` are the singular values of the symmetric matrix
/// `tau_ij = <w_i| sigma_y⊗sigma_y |w_j*>`. Working with `tau` instead of the
/// square roots of the spectrum of `rho rho~` keeps vanishing `mu_i` at
/// round-off level, so pure inputs agree with [`concurrence_pure_2q`].
pub fn concurrence_mixed_2q(rho: &DensityMatrix) -> Result<f64> {
    require_dim(rho, 4, "two-qubit concurrence")?;
    let eig = rho.eigen();
    let support: Vec<usize> = (0..4).filter(|&i| eig.values[i] > RANK_TOL).collect();
    let flip = spin_flip_operator();
    let w: Vec<_> = support
        .iter()
        .map(|&i| eig.vectors.column(i).scale(eig.values[i].sqrt()))
        .collect();
    let r = w.len();
    let tau = ComplexMatrix::from_fn(r, r, |i, j| w[i].dotc(&(&flip * w[j].conjugate())));
    let mut mu: Vec<f64> = tau.singular_values().iter().copied().collect();
    mu.sort_by(|a, b| b.total_cmp(a));
    let c = mu.first().copied().unwrap_or(0.0) - mu.iter().skip(1).sum::<f64>();
    Ok(c.clamp(0.0, 1.0))
}

/// Entanglement of formation `h((1 + sqrt(1 - C^2)) / 2)` in bits.
pub fn eof_2q(rho: &DensityMatrix) -> Result<f64> {
    let c = concurrence_mixed_2q(rho)?;
    Ok(eof_from_concurrence(c))
}

pub fn eof_from_concurrence(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    binary_entropy(0.5 * (1.0 + (1.0 - c * c).max(0.0).sqrt()))
}

/// Qureshi-type entanglement measure
/// `(1/(d_A-1)) sum_{j != k} sqrt(rho_jj rho_kk) (1 - |<d_j|d_k>|)`.
///
/// The sum runs over ordered pairs, so each unordered pair contributes twice.
pub fn e_script_q(config: &DetectorConfig) -> Result<f64> {
    let d = config.dim_a();
    if d < 2 {
        return Err(Error::Dimension("needs at least two paths".into()));
    }
    let probs: Vec<f64> = config.amplitudes().iter().map(|a| a.norm_sqr()).collect();
    let dets = config.detectors();
    let mut sum = 0.0;
    for j in 0..d {
        for k in 0..d {
            if j != k {
                let overlap = dets[j].dotc(&dets[k]).norm().min(1.0);
                sum += (probs[j] * probs[k]).sqrt() * (1.0 - overlap);
            }
        }
    }
    Ok(sum / (d - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{
        density_with, haar_pure_with, haar_random_bipartite, random_unitary, RngSeed,
    };
    use crate::state::{dephase, purify};
    use crate::ComplexVector;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn plus_state(d: usize) -> DensityMatrix {
        let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
        DensityMatrix::from_vector(&ComplexVector::from_element(d, amp)).unwrap()
    }

    fn orthogonal_qubit_config(a: [f64; 2]) -> DetectorConfig {
        DetectorConfig::orthogonal(&[Complex64::new(a[0], 0.0), Complex64::new(a[1], 0.0)]).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let pure = crate::random::haar_random_pure(4, RngSeed(1))
            .unwrap()
            .density();
        assert_abs_diff_eq!(vn_entropy(&pure), 0.0, epsilon = 1e-10);
        for d in 1..=6 {
            assert_abs_diff_eq!(
                vn_entropy(&DensityMatrix::maximally_mixed(d)),
                (d as f64).log2(),
                epsilon = 1e-12
            );
        }
        // -(0.5 log 0.5 + 2 * 0.25 log 0.25) = 0.5 + 1 = 1.5
        let rho = DensityMatrix::diagonal(&[0.5, 0.25, 0.25]).unwrap();
        assert_abs_diff_eq!(vn_entropy(&rho), 1.5, epsilon = 1e-14);
    }

    #[test]
    fn coherence_examples() {
        let diag = DensityMatrix::diagonal(&[0.2, 0.3, 0.5]).unwrap();
        assert_abs_diff_eq!(rel_entropy_coherence(&diag), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rel_entropy_coherence(&plus_state(2)), 1.0, epsilon = 1e-12);
        for d in 2..=6 {
            assert_abs_diff_eq!(
                rel_entropy_coherence(&plus_state(d)),
                (d as f64).log2(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn predictability_examples() {
        for d in 2..=6 {
            let top = DensityMatrix::basis_state(d, 0);
            assert_abs_diff_eq!(predictability_vn(&top), (d as f64).log2(), epsilon = 1e-14);
            assert_abs_diff_eq!(
                predictability_vn(&DensityMatrix::maximally_mixed(d)),
                0.0,
                epsilon = 1e-14
            );
        }
        // 1 - h(0.25), h(0.25) = 0.25*2 + 0.75*log2(4/3)
        let h = 0.5 + 0.75 * (4.0f64 / 3.0).log2();
        let rho = DensityMatrix::diagonal(&[0.75, 0.25]).unwrap();
        assert_abs_diff_eq!(predictability_vn(&rho), 1.0 - h, epsilon = 1e-14);
        assert_abs_diff_eq!(
            predictability_vn(&rho),
            0.188_721_875_540_867,
            epsilon = 1e-12
        );
    }

    #[test]
    fn pure_concurrence_examples() {
        let bell = PureState::maximally_entangled(2);
        assert_abs_diff_eq!(concurrence_pure_2q(&bell).unwrap(), 1.0, epsilon = 1e-14);
        let prod = haar_random_bipartite(2, 1, RngSeed(2)).unwrap();
        let other = haar_random_bipartite(2, 1, RngSeed(3)).unwrap();
        let p = PureState::product(prod.amplitudes(), other.amplitudes()).unwrap();
        assert_abs_diff_eq!(concurrence_pure_2q(&p).unwrap(), 0.0, epsilon = 1e-15);
        let joint = orthogonal_qubit_config([0.8f64.sqrt(), 0.2f64.sqrt()]).joint_state();
        assert_abs_diff_eq!(concurrence_pure_2q(&joint).unwrap(), 0.8, epsilon = 1e-14);
        assert!(matches!(
            concurrence_pure_2q(&PureState::maximally_entangled(3)),
            Err(Error::Dimension(_))
        ));
    }

    /// Textbook route: square roots of the eigenvalues of
    /// `sqrt(rho) rho~ sqrt(rho)`.
    fn concurrence_by_spectrum(rho: &DensityMatrix) -> f64 {
        let flip = spin_flip_operator();
        let tilde = &flip * rho.matrix().conjugate() * &flip;
        let root = rho
            .eigen()
            .map_spectrum(|v| Complex64::new(v.max(0.0).sqrt(), 0.0));
        let m = &root * tilde * &root;
        let mut mu: Vec<f64> = crate::state::hermitian_eigenvalues(&m)
            .unwrap()
            .iter()
            .map(|v| v.max(0.0).sqrt())
            .collect();
        mu.sort_by(|a, b| b.total_cmp(a));
        (mu[0] - mu[1] - mu[2] - mu[3]).max(0.0)
    }

    #[test]
    fn mixed_concurrence_examples() {
        let bell = PureState::maximally_entangled(2).density();
        assert_abs_diff_eq!(concurrence_mixed_2q(&bell).unwrap(), 1.0, epsilon = 1e-12);
        let sep = DensityMatrix::diagonal(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_abs_diff_eq!(concurrence_mixed_2q(&sep).unwrap(), 0.0, epsilon = 1e-14);
        assert!(concurrence_mixed_2q(&DensityMatrix::maximally_mixed(3)).is_err());
        // Werner state p|Bell><Bell| + (1-p) I/4 has C = max(0, (3p - 1)/2).
        for &p in &[0.2, 1.0 / 3.0, 0.5, 0.9] {
            let w = DensityMatrix::mixture(&[
                (p, &bell),
                (1.0 - p, &DensityMatrix::maximally_mixed(4)),
            ])
            .unwrap();
            assert_abs_diff_eq!(
                concurrence_mixed_2q(&w).unwrap(),
                ((3.0 * p - 1.0) / 2.0).max(0.0),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn mixed_concurrence_agrees_with_pure_formula() {
        let mut rng = RngSeed(77).rng();
        for _ in 0..1000 {
            let psi = haar_pure_with(2, 2, &mut rng);
            let a = concurrence_pure_2q(&psi).unwrap();
            let b = concurrence_mixed_2q(&psi.density()).unwrap();
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn mixed_concurrence_agrees_with_spectral_route() {
        let mut rng = RngSeed(78).rng();
        for rank in 2..=4 {
            for _ in 0..200 {
                let rho = density_with(4, rank, &mut rng).unwrap();
                let a = concurrence_mixed_2q(&rho).unwrap();
                let b = concurrence_by_spectrum(&rho);
                assert!((a - b).abs() <= 1e-6, "rank {rank}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn eof_examples() {
        let bell = PureState::maximally_entangled(2).density();
        assert_abs_diff_eq!(eof_2q(&bell).unwrap(), 1.0, epsilon = 1e-12);
        let prod = DensityMatrix::basis_state(4, 2);
        assert_abs_diff_eq!(eof_2q(&prod).unwrap(), 0.0, epsilon = 1e-14);
        let mut rng = RngSeed(5).rng();
        for _ in 0..200 {
            let psi = haar_pure_with(2, 2, &mut rng);
            let e = eof_2q(&psi.density()).unwrap();
            assert!((e - vn_entropy(&psi.reduced_a())).abs() <= 1e-9);
        }
    }

    #[test]
    fn e_script_q_examples() {
        let ident =
            DetectorConfig::identical(&[Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)], 2)
                .unwrap();
        assert_abs_diff_eq!(e_script_q(&ident).unwrap(), 0.0, epsilon = 1e-15);
        let uniform = orthogonal_qubit_config([0.5f64.sqrt(), 0.5f64.sqrt()]);
        assert_abs_diff_eq!(e_script_q(&uniform).unwrap(), 1.0, epsilon = 1e-14);
        let single = DetectorConfig::orthogonal(&[Complex64::new(1.0, 0.0)]).unwrap();
        assert!(matches!(e_script_q(&single), Err(Error::Dimension(_))));
    }

    #[test]
    fn e_script_q_on_orthogonal_detectors_uses_schmidt_weights() {
        let mut rng = RngSeed(6).rng();
        for d in 2..=4 {
            for _ in 0..50 {
                let amps = crate::random::haar_vector(d, &mut rng);
                let cfg = DetectorConfig::orthogonal(amps.as_slice()).unwrap();
                let lambda = crate::state::schmidt_decompose(&cfg.joint_state()).coeffs;
                let mut s = 0.0;
                for j in 0..d {
                    for k in 0..d {
                        if j != k {
                            s += (lambda[j] * lambda[k]).sqrt();
                        }
                    }
                }
                assert!((e_script_q(&cfg).unwrap() - s / (d - 1) as f64).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn triality_on_haar_states() {
        let mut rng = RngSeed(9).rng();
        for _ in 0..2000 {
            let psi = haar_pure_with(2, 2, &mut rng);
            let ra = psi.reduced_a();
            let p = qubit_predictability(&ra).unwrap();
            let v = qubit_visibility(&ra).unwrap();
            let c = concurrence_pure_2q(&psi).unwrap();
            assert!((p * p + v * v + c * c - 1.0).abs() <= 1e-10);
            assert!(p * p + v * v <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn probability_vector_validation() {
        assert!(ProbabilityVector::new(vec![0.5, 0.5]).is_ok());
        assert_eq!(
            ProbabilityVector::new(vec![1.0 + 1e-13, -1e-13])
                .unwrap()
                .as_slice(),
            &[1.0 + 1e-13, 0.0]
        );
        assert!(ProbabilityVector::new(vec![1.1, -0.1]).is_err());
        assert!(ProbabilityVector::new(vec![0.5, 0.4]).is_err());
        assert!(ProbabilityVector::new(vec![]).is_err());
    }

    fn mixed_state(dim: usize, seed: u64) -> DensityMatrix {
        let mut rng = RngSeed(seed).rng();
        let rank = 1 + (seed as usize % dim);
        density_with(dim, rank, &mut rng).unwrap()
    }

    proptest! {
        #[test]
        fn entropic_complementarity(dim in 2usize..=6, seed in any::<u64>()) {
            let rho = mixed_state(dim, seed);
            let total = rel_entropy_coherence(&rho) + predictability_vn(&rho);
            prop_assert!(total <= (dim as f64).log2() + 1e-10);
            if rho.rank() == 1 {
                prop_assert!((total - (dim as f64).log2()).abs() <= 1e-9);
            } else {
                prop_assert!(total < (dim as f64).log2() - 1e-9);
            }
        }

        #[test]
        fn predictability_is_permutation_invariant(p in proptest::collection::vec(0.01f64..1.0, 2..=6), shift in 1usize..6) {
            let s: f64 = p.iter().sum();
            let p: Vec<f64> = p.iter().map(|x| x / s).collect();
            let mut q = p.clone();
            q.rotate_left(shift % p.len());
            let a = predictability_vn(&DensityMatrix::diagonal(&p).unwrap());
            let b = predictability_vn(&DensityMatrix::diagonal(&q).unwrap());
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn predictability_is_convex(dim in 2usize..=6, seed in any::<u64>(), lambda in 0.0f64..=1.0) {
            let a = mixed_state(dim, seed);
            let b = mixed_state(dim, seed.wrapping_add(1));
            let mix = DensityMatrix::mixture(&[(lambda, &a), (1.0 - lambda, &b)]).unwrap();
            prop_assert!(predictability_vn(&mix) <= lambda * predictability_vn(&a) + (1.0 - lambda) * predictability_vn(&b) + 1e-10);
        }

        #[test]
        fn entropy_is_unitarily_invariant(dim in 1usize..=6, seed in any::<u64>()) {
            let rho = mixed_state(dim, seed);
            let u = random_unitary(dim, RngSeed(seed ^ 0xabc));
            prop_assert!((vn_entropy(&rho) - vn_entropy(&rho.conjugate(&u).unwrap())).abs() <= 1e-9);
        }

        #[test]
        fn entropy_bounds(dim in 1usize..=6, seed in any::<u64>()) {
            let rho = mixed_state(dim, seed);
            let s = vn_entropy(&rho);
            prop_assert!(s >= 0.0 && s <= (dim as f64).log2() + 1e-12);
            // Purification check: S(rho) equals the entropy of the ancilla marginal.
            let p = purify(&rho);
            prop_assert!((vn_entropy(&p.reduced_b()) - s).abs() < 1e-9);
            prop_assert!(rel_entropy_coherence(&dephase(&rho)) < 1e-12);
        }
    }
}
