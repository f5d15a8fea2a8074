//! Seeded sampling of states and unitaries.
//!
//! Every sampler draws from a [`ChaCha8Rng`] built from an [`RngSeed`].
//! Parallel sweeps derive worker seeds with [`RngSeed::split`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::state::{DensityMatrix, PureState};
use crate::{Complex64, ComplexMatrix, ComplexVector, Error, Result};

/// Master seed; identical seeds give identical sample sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Seed for worker (or restart) `i`: `seed XOR i`.
    pub fn split(self, i: u64) -> RngSeed {
        RngSeed(self.0 ^ i)
    }
}

impl From<u64> for RngSeed {
    fn from(s: u64) -> Self {
        RngSeed(s)
    }
}

/// Standard complex normal sample (`E|z|^2 = 1`).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Ginibre matrix with i.i.d. standard complex normal entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Haar-random unit vector with the global phase fixed so the first nonzero
/// amplitude is real and positive.
pub fn haar_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexVector {
    let v = ComplexVector::from_fn(dim, |_, _| complex_normal(rng));
    let norm = v.norm();
    let lead = v
        .iter()
        .find(|z| z.norm() > 0.0)
        .copied()
        .unwrap_or(Complex64::new(1.0, 0.0));
    let phase = lead.conj() / lead.norm();
    v.map(|z| z * phase / norm)
}

pub fn haar_pure_with<R: Rng + ?Sized>(dim_a: usize, dim_b: usize, rng: &mut R) -> PureState {
    PureState::from_trusted(dim_a, dim_b, haar_vector(dim_a * dim_b, rng))
}

/// Haar-random single-system pure state.
pub fn haar_random_pure(dim: usize, seed: RngSeed) -> Result<PureState> {
    if dim == 0 {
        return Err(Error::Dimension("dimension must be at least 1".into()));
    }
    Ok(haar_pure_with(dim, 1, &mut seed.rng()))
}

/// Haar-random pure state on `C^{d_a} ⊗ C^{d_b}`.
pub fn haar_random_bipartite(dim_a: usize, dim_b: usize, seed: RngSeed) -> Result<PureState> {
    if dim_a == 0 || dim_b == 0 {
        return Err(Error::Dimension("dimensions must be at least 1".into()));
    }
    Ok(haar_pure_with(dim_a, dim_b, &mut seed.rng()))
}

/// Haar unitary: QR of a Ginibre matrix with the phases of `R`'s diagonal
/// absorbed into `Q`.
pub fn unitary_with<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    assert!(dim >= 1, "unitary dimension must be at least 1");
    let qr = ginibre(dim, dim, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        q.column_mut(j).iter_mut().for_each(|z| *z *= phase);
    }
    q
}

pub fn random_unitary(dim: usize, seed: RngSeed) -> ComplexMatrix {
    unitary_with(dim, &mut seed.rng())
}

/// `G G^dagger / Tr` for a `dim x rank` Ginibre `G` (Hilbert-Schmidt induced
/// measure restricted to the given rank).
pub fn density_with<R: Rng + ?Sized>(
    dim: usize,
    rank: usize,
    rng: &mut R,
) -> Result<DensityMatrix> {
    if rank == 0 || rank > dim {
        return Err(Error::Dimension(format!("rank {rank} not in 1..={dim}")));
    }
    let g = ginibre(dim, rank, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    Ok(DensityMatrix::from_trusted(m.unscale(tr)))
}

pub fn random_density_matrix(dim: usize, rank: usize, seed: RngSeed) -> Result<DensityMatrix> {
    density_with(dim, rank, &mut seed.rng())
}

/// Point on the probability simplex, uniform (flat Dirichlet).
pub fn simplex_point<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    let mut p: Vec<f64> = (0..dim)
        .map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln())
        .collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}
