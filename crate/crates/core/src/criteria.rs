//! Randomized validation of predictability and visibility measures against
//! the six standard criteria:
//!
//! * C1: continuity,
//! * C2: invariance under relabelling of the basis states,
//! * C3: extreme value when one `rho_jj = 1` (maximum for P, minimum for V),
//! * C4: the opposite extreme on uniform diagonals (P) or on pure states with
//!   uniform diagonal (V),
//! * C5: no increase under a small population transfer from a larger to a
//!   smaller diagonal entry (P), or under a small decrease of one `|rho_jk|` (V),
//! * C6: convexity.
//!
//! Sampling can only find violations, so a PASS verdict means no violation
//! was found among the sampled states at the profile's tolerances.

use std::collections::BTreeMap;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::measures::{predictability_vn, rel_entropy_coherence};
use crate::random::{density_with, simplex_point, RngSeed};
use crate::state::{DensityMatrix, StateJson};
use crate::{Complex64, ComplexMatrix, ComplexVector, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeasureKind {
    /// Predictability (particle aspect).
    P,
    /// Visibility or coherence (wave aspect).
    V,
}

type EvalFn = dyn Fn(&DensityMatrix) -> f64 + Send + Sync;

/// A named measure under test.
#[derive(Clone)]
pub struct CandidateMeasure {
    name: String,
    kind: MeasureKind,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for CandidateMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CandidateMeasure")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

impl CandidateMeasure {
    pub fn new(
        name: impl Into<String>,
        kind: MeasureKind,
        eval: impl Fn(&DensityMatrix) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            kind,
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    /// Evaluate, turning panics and non-finite output into errors.
    pub fn evaluate(&self, rho: &DensityMatrix) -> Result<f64> {
        let out = catch_unwind(AssertUnwindSafe(|| (self.eval)(rho)));
        match out {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(v) => Err(Error::Evaluation {
                name: self.name.clone(),
                reason: format!("non-finite value {v}"),
            }),
            Err(_) => Err(Error::Evaluation {
                name: self.name.clone(),
                reason: "evaluation panicked".into(),
            }),
        }
    }
}

/// Entropic predictability.
pub fn p_vn() -> CandidateMeasure {
    CandidateMeasure::new("p_vn", MeasureKind::P, predictability_vn)
}

/// Relative entropy of coherence as a visibility.
pub fn c_re() -> CandidateMeasure {
    CandidateMeasure::new("c_re", MeasureKind::V, rel_entropy_coherence)
}

/// Breaks only C2: `max(P_vn, log2 d * max(0, 2 rho_00 - 1))` favours
/// population in the first basis state. The second branch is nonzero only
/// when `rho_00 > 1/2`, where state 0 is the strict maximum, so transfers and
/// extremes behave like a good predictability.
pub fn decoy_rho00() -> CandidateMeasure {
    CandidateMeasure::new("decoy_rho00", MeasureKind::P, |rho| {
        let d = rho.dim() as f64;
        let biased = d.log2() * (2.0 * rho.matrix()[(0, 0)].re - 1.0).max(0.0);
        predictability_vn(rho).max(biased)
    })
}

/// Breaks only C6: a concave, increasing function of the normalized largest
/// population, `log2 d * sin(pi/2 * (d max_j rho_jj - 1)/(d - 1))`.
pub fn decoy_concave() -> CandidateMeasure {
    CandidateMeasure::new("decoy_concave", MeasureKind::P, |rho| {
        let d = rho.dim() as f64;
        let top = rho.diagonal_probs().into_iter().fold(0.0, f64::max);
        let t = ((d * top - 1.0) / (d - 1.0)).clamp(0.0, 1.0);
        d.log2() * (std::f64::consts::FRAC_PI_2 * t).sin()
    })
}

/// Height of the jump in [`decoy_jump`].
pub const JUMP_HEIGHT: f64 = 0.5;

/// Breaks only C1: `P_vn` plus [`JUMP_HEIGHT`] exactly on the basis states.
/// Raising a convex function on extreme points keeps it convex.
pub fn decoy_jump() -> CandidateMeasure {
    CandidateMeasure::new("decoy_jump", MeasureKind::P, |rho| {
        let top = rho.diagonal_probs().into_iter().fold(0.0, f64::max);
        predictability_vn(rho) + if top >= 1.0 - 1e-12 { JUMP_HEIGHT } else { 0.0 }
    })
}

pub const BUILTIN_MEASURES: [&str; 5] =
    ["p_vn", "c_re", "decoy_rho00", "decoy_concave", "decoy_jump"];

/// Look up a built-in measure by name.
pub fn builtin(name: &str) -> Option<CandidateMeasure> {
    match name {
        "p_vn" => Some(p_vn()),
        "c_re" => Some(c_re()),
        "decoy_rho00" => Some(decoy_rho00()),
        "decoy_concave" => Some(decoy_concave()),
        "decoy_jump" => Some(decoy_jump()),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Criterion {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
}

impl Criterion {
    pub const ALL: [Criterion; 6] = [
        Criterion::C1,
        Criterion::C2,
        Criterion::C3,
        Criterion::C4,
        Criterion::C5,
        Criterion::C6,
    ];

    fn index(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Thresholds and sample sizes for [`check_criteria`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceProfile {
    /// Trace-norm size of continuity perturbations.
    pub continuity_delta: f64,
    /// C1 fails when `|m(sigma) - m(rho)| / delta` exceeds this.
    pub continuity_ratio_bound: f64,
    pub equality_tol: f64,
    pub transfer_epsilon: f64,
    pub convexity_tol: f64,
    /// Samples per criterion.
    pub samples: usize,
    pub dims: Vec<usize>,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        Self {
            continuity_delta: 1e-6,
            continuity_ratio_bound: 1e3,
            equality_tol: 1e-9,
            transfer_epsilon: 1e-4,
            convexity_tol: 1e-9,
            samples: 2000,
            dims: (2..=6).collect(),
        }
    }
}

impl ToleranceProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("continuity_delta", self.continuity_delta),
            ("continuity_ratio_bound", self.continuity_ratio_bound),
            ("equality_tol", self.equality_tol),
            ("transfer_epsilon", self.transfer_epsilon),
            ("convexity_tol", self.convexity_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be positive".into()));
        }
        if self.dims.is_empty() || self.dims.iter().any(|&d| d < 2) {
            return Err(Error::Config(
                "dims must be a non-empty list of values >= 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// `states = [rho, sigma]`, `weights = [delta]`: `|m(sigma) - m(rho)| / delta > threshold`.
    Continuity,
    /// `states = [rho, relabelled rho]`: values differ by more than `threshold`.
    Permutation,
    /// `states = [extreme, sample]`: `m(extreme) < m(sample) - threshold`.
    NotMaximal,
    /// `states = [extreme, sample]`: `m(extreme) > m(sample) + threshold`.
    NotMinimal,
    /// `states = [before, after]`: `m(after) > m(before) + threshold`.
    Increase,
    /// `states = parts`, `weights = mixture weights`:
    /// `m(sum w rho) > sum w m(rho) + threshold`.
    Convexity,
    /// `states = [rho]`: evaluation failed or was not finite.
    NonFinite,
}

/// A concrete violation that can be re-evaluated.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Witness {
    pub criterion: Criterion,
    pub kind: WitnessKind,
    #[serde(with = "state_list")]
    pub states: Vec<DensityMatrix>,
    pub weights: Vec<f64>,
    /// Measure values at the time the violation was recorded.
    pub values: Vec<f64>,
    pub threshold: f64,
    /// Size of the violation beyond the threshold's reference quantity.
    pub violation: f64,
}

mod state_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        states: &[DensityMatrix],
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let js: Vec<StateJson> = states
            .iter()
            .map(|r| r.to_json([r.dim(), 1]).expect("dims match by construction"))
            .collect();
        js.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<DensityMatrix>, D::Error> {
        let js = Vec::<StateJson>::deserialize(d)?;
        js.iter()
            .map(|j| {
                j.parse()
                    .map(|p| p.density())
                    .map_err(serde::de::Error::custom)
            })
            .collect()
    }
}

impl Witness {
    /// Re-evaluate the measure on the stored states; `Ok(true)` when the
    /// violation reproduces.
    pub fn recheck(&self, m: &CandidateMeasure) -> Result<bool> {
        let s = &self.states;
        let need = |n: usize| -> Result<()> {
            if s.len() < n {
                Err(Error::Validation("witness has too few states".into()))
            } else {
                Ok(())
            }
        };
        Ok(match self.kind {
            WitnessKind::Continuity => {
                need(2)?;
                let delta = *self
                    .weights
                    .first()
                    .ok_or_else(|| Error::Validation("missing delta".into()))?;
                (m.evaluate(&s[1])? - m.evaluate(&s[0])?).abs() / delta > self.threshold
            }
            WitnessKind::Permutation => {
                need(2)?;
                (m.evaluate(&s[1])? - m.evaluate(&s[0])?).abs() > self.threshold
            }
            WitnessKind::NotMaximal => {
                need(2)?;
                m.evaluate(&s[0])? < m.evaluate(&s[1])? - self.threshold
            }
            WitnessKind::NotMinimal => {
                need(2)?;
                m.evaluate(&s[0])? > m.evaluate(&s[1])? + self.threshold
            }
            WitnessKind::Increase => {
                need(2)?;
                m.evaluate(&s[1])? > m.evaluate(&s[0])? + self.threshold
            }
            WitnessKind::Convexity => {
                need(1)?;
                let parts: Vec<(f64, &DensityMatrix)> =
                    self.weights.iter().copied().zip(s.iter()).collect();
                let mix = DensityMatrix::mixture(&parts)?;
                let chord: f64 = parts
                    .iter()
                    .map(|(w, r)| m.evaluate(r).map(|v| w * v))
                    .sum::<Result<f64>>()?;
                m.evaluate(&mix)? > chord + self.threshold
            }
            WitnessKind::NonFinite => {
                need(1)?;
                m.evaluate(&s[0]).is_err()
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    /// Comparisons actually performed.
    pub samples: usize,
    /// Largest violation seen (0 when none).
    pub max_violation: f64,
}

/// Outcome of [`check_criteria`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub measure: String,
    pub kind: MeasureKind,
    pub verdicts: BTreeMap<Criterion, Verdict>,
    /// One witness (the largest violation) per failed criterion, plus any
    /// evaluation failures recorded under C1.
    pub witnesses: Vec<Witness>,
    pub profile: ToleranceProfile,
    pub seed: RngSeed,
    pub samples_used: usize,
    pub note: String,
}

impl CriteriaReport {
    pub fn passed(&self) -> bool {
        self.verdicts.values().all(|v| v.pass)
    }

    pub fn failed_criteria(&self) -> Vec<Criterion> {
        self.verdicts
            .iter()
            .filter(|(_, v)| !v.pass)
            .map(|(c, _)| *c)
            .collect()
    }

    pub fn witness_for(&self, c: Criterion) -> Option<&Witness> {
        self.witnesses.iter().find(|w| w.criterion == c)
    }
}

/// Result of a single probe.
#[derive(Clone, Debug)]
pub struct ProbeOutcome {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    /// Inputs on which evaluation failed.
    pub failures: Vec<Witness>,
}

struct Tally {
    criterion: Criterion,
    samples: usize,
    worst: Option<Witness>,
    failures: Vec<Witness>,
}

impl Tally {
    fn new(criterion: Criterion) -> Self {
        Self {
            criterion,
            samples: 0,
            worst: None,
            failures: Vec::new(),
        }
    }

    fn eval(&mut self, m: &CandidateMeasure, rho: &DensityMatrix) -> Option<f64> {
        match m.evaluate(rho) {
            Ok(v) => Some(v),
            Err(_) => {
                self.failures.push(Witness {
                    criterion: Criterion::C1,
                    kind: WitnessKind::NonFinite,
                    states: vec![rho.clone()],
                    weights: vec![],
                    values: vec![],
                    threshold: 0.0,
                    violation: f64::INFINITY,
                });
                None
            }
        }
    }

    fn record(&mut self, violation: f64, make: impl FnOnce() -> Witness) {
        self.samples += 1;
        if violation > 0.0 && self.worst.as_ref().is_none_or(|w| violation > w.violation) {
            let mut w = make();
            w.violation = violation;
            self.worst = Some(w);
        }
    }

    fn finish(self) -> ProbeOutcome {
        let max_violation = self.worst.as_ref().map_or(0.0, |w| w.violation);
        ProbeOutcome {
            verdict: Verdict {
                pass: self.worst.is_none()
                    && (self.criterion != Criterion::C1 || self.failures.is_empty()),
                samples: self.samples,
                max_violation,
            },
            witness: self.worst,
            failures: self.failures,
        }
    }
}

fn probe_rng(seed: RngSeed, c: Criterion) -> ChaCha8Rng {
    seed.split(c.index().wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .rng()
}

fn diag_state(p: &[f64]) -> DensityMatrix {
    DensityMatrix::diagonal(p).expect("simplex points are valid diagonals")
}

/// Pure state with uniform populations and random phases.
fn phased_uniform(d: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let amp = 1.0 / (d as f64).sqrt();
    let v = ComplexVector::from_fn(d, |i, _| {
        if i == 0 {
            Complex64::new(amp, 0.0)
        } else {
            Complex64::from_polar(amp, rng.random_range(0.0..std::f64::consts::TAU))
        }
    });
    DensityMatrix::from_pure(&crate::state::PureState::from_trusted(d, 1, v))
}

/// Mix of Haar-induced mixed states of random rank and targeted boundary
/// states (basis states, uniform diagonals, near-degenerate and skewed
/// diagonals).
fn draw_state(d: usize, i: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    match i % 10 {
        0..=4 => {
            let rank = rng.random_range(1..=d);
            density_with(d, rank, rng).expect("rank within range")
        }
        5 => DensityMatrix::basis_state(d, rng.random_range(0..d)),
        6 => {
            if rng.random_bool(0.5) {
                DensityMatrix::maximally_mixed(d)
            } else {
                phased_uniform(d, rng)
            }
        }
        7 => {
            let mut p: Vec<f64> = (0..d)
                .map(|_| 1.0 + rng.random_range(-1e-3..1e-3))
                .collect();
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|x| *x /= s);
            diag_state(&p)
        }
        8 => {
            let mut p = simplex_point(d, rng);
            let j = rng.random_range(0..d);
            let big = rng.random_range(0.5..0.99);
            p.iter_mut().for_each(|x| *x *= 1.0 - big);
            p[j] += big;
            diag_state(&p)
        }
        _ => diag_state(&simplex_point(d, rng)),
    }
}

fn dim_for(prof: &ToleranceProfile, i: usize) -> usize {
    prof.dims[i % prof.dims.len()]
}

/// C1: perturb by exactly `continuity_delta` in trace norm and bound the
/// difference quotient.
pub fn probe_continuity(
    m: &CandidateMeasure,
    prof: &ToleranceProfile,
    seed: RngSeed,
) -> ProbeOutcome {
    let mut rng = probe_rng(seed, Criterion::C1);
    let mut tally = Tally::new(Criterion::C1);
    let delta = prof.continuity_delta;
    for i in 0..prof.samples {
        let d = dim_for(prof, i);
        let rho = draw_state(d, i / prof.dims.len(), &mut rng);
        let target = density_with(d, d, &mut rng).expect("full rank");
        let dist = rho.trace_distance(&target).expect("same dimension");
        if dist < 1e-12 {
            continue;
        }
        let t = delta / dist;
        let sigma =
            DensityMatrix::mixture(&[(1.0 - t, &rho), (t, &target)]).expect("valid weights");
        let (Some(a), Some(b)) = (tally.eval(m, &rho), tally.eval(m, &sigma)) else {
            continue;
        };
        let ratio = (b - a).abs() / delta;
        let excess = ratio - prof.continuity_ratio_bound;
        tally.record(if excess > 0.0 { ratio } else { 0.0 }, || Witness {
            criterion: Criterion::C1,
            kind: WitnessKind::Continuity,
            states: vec![rho.clone(), sigma.clone()],
            weights: vec![delta],
            values: vec![a, b],
            threshold: prof.continuity_ratio_bound,
            violation: 0.0,
        });
    }
    tally.finish()
}

fn permute(rho: &DensityMatrix, perm: &[usize]) -> DensityMatrix {
    let d = rho.dim();
    let m = ComplexMatrix::from_fn(d, d, |i, j| rho.matrix()[(perm[i], perm[j])]);
    DensityMatrix::from_trusted(m)
}

/// C2: compare against a random non-trivial relabelling of the basis.
pub fn probe_permutation(
    m: &CandidateMeasure,
    prof: &ToleranceProfile,
    seed: RngSeed,
) -> ProbeOutcome {
    let mut rng = probe_rng(seed, Criterion::C2);
    let mut tally = Tally::new(Criterion::C2);
    for i in 0..prof.samples {
        let d = dim_for(prof, i);
        let rho = draw_state(d, i / prof.dims.len(), &mut rng);
        let mut perm: Vec<usize> = (0..d).collect();
        while perm.iter().enumerate().all(|(a, &b)| a == b) {
            perm.shuffle(&mut rng);
        }
        let swapped = permute(&rho, &perm);
        let (Some(a), Some(b)) = (tally.eval(m, &rho), tally.eval(m, &swapped)) else {
            continue;
        };
        let diff = (a - b).abs();
        tally.record(if diff > prof.equality_tol { diff } else { 0.0 }, || {
            Witness {
                criterion: Criterion::C2,
                kind: WitnessKind::Permutation,
                states: vec![rho.clone(), swapped.clone()],
                weights: vec![],
                values: vec![a, b],
                threshold: prof.equality_tol,
                violation: 0.0,
            }
        });
    }
    tally.finish()
}

/// C3 and C4: extremes against a reference sample per dimension.
///
/// For P the basis states must be maximal and uniform-diagonal states
/// minimal; for V the basis states must be minimal and pure states with
/// uniform diagonal maximal.
pub fn probe_extremes(
    m: &CandidateMeasure,
    prof: &ToleranceProfile,
    seed: RngSeed,
) -> (ProbeOutcome, ProbeOutcome) {
    let mut rng = probe_rng(seed, Criterion::C3);
    let mut c3 = Tally::new(Criterion::C3);
    let mut c4 = Tally::new(Criterion::C4);
    let per_dim = prof.samples.div_ceil(prof.dims.len()).max(1);
    let tol = prof.equality_tol;
    for &d in &prof.dims {
        let mut reference: Vec<(f64, DensityMatrix)> = Vec::with_capacity(per_dim);
        for i in 0..per_dim {
            let rho = draw_state(d, i, &mut rng);
            if let Some(v) = c3.eval(m, &rho) {
                reference.push((v, rho));
            }
        }
        let Some(hi) = reference.iter().max_by(|a, b| a.0.total_cmp(&b.0)).cloned() else {
            continue;
        };
        let Some(lo) = reference.iter().min_by(|a, b| a.0.total_cmp(&b.0)).cloned() else {
            continue;
        };
        let basis: Vec<DensityMatrix> = (0..d).map(|j| DensityMatrix::basis_state(d, j)).collect();
        let mut uniform = vec![DensityMatrix::maximally_mixed(d)];
        let n_uniform = (per_dim / 10).max(4);
        match m.kind() {
            MeasureKind::P => {
                for k in 0..n_uniform {
                    let pure = phased_uniform(d, &mut rng);
                    if k % 2 == 0 {
                        uniform.push(pure);
                    } else {
                        let w = rng.random_range(0.0..1.0);
                        let mix = DensityMatrix::mixture(&[
                            (w, &pure),
                            (1.0 - w, &DensityMatrix::maximally_mixed(d)),
                        ])
                        .expect("valid weights");
                        uniform.push(mix);
                    }
                }
            }
            MeasureKind::V => {
                uniform.clear();
                for _ in 0..n_uniform {
                    uniform.push(phased_uniform(d, &mut rng));
                }
            }
        }
        let (top_set, bottom_set, top_tally, bottom_tally) = match m.kind() {
            MeasureKind::P => (&basis, &uniform, &mut c3, &mut c4),
            MeasureKind::V => (&uniform, &basis, &mut c4, &mut c3),
        };
        for ext in top_set {
            let Some(v) = top_tally.eval(m, ext) else {
                continue;
            };
            let short = hi.0 - tol - v;
            top_tally.record(short.max(0.0), || Witness {
                criterion: top_tally_criterion(m.kind(), true),
                kind: WitnessKind::NotMaximal,
                states: vec![ext.clone(), hi.1.clone()],
                weights: vec![],
                values: vec![v, hi.0],
                threshold: tol,
                violation: 0.0,
            });
        }
        for ext in bottom_set {
            let Some(v) = bottom_tally.eval(m, ext) else {
                continue;
            };
            let over = v - (lo.0 + tol);
            bottom_tally.record(over.max(0.0), || Witness {
                criterion: top_tally_criterion(m.kind(), false),
                kind: WitnessKind::NotMinimal,
                states: vec![ext.clone(), lo.1.clone()],
                weights: vec![],
                values: vec![v, lo.0],
                threshold: tol,
                violation: 0.0,
            });
        }
    }
    (c3.finish(), c4.finish())
}

fn top_tally_criterion(kind: MeasureKind, top: bool) -> Criterion {
    match (kind, top) {
        (MeasureKind::P, true) | (MeasureKind::V, false) => Criterion::C3,
        _ => Criterion::C4,
    }
}

/// C5: small population transfer (P) or coherence reduction (V). Moves that
/// would leave the set of states, or for P that would cross the two
/// populations (`rho_kk + eps > rho_jj - eps`), are skipped.
pub fn probe_transfer(
    m: &CandidateMeasure,
    prof: &ToleranceProfile,
    seed: RngSeed,
) -> ProbeOutcome {
    let mut rng = probe_rng(seed, Criterion::C5);
    let mut tally = Tally::new(Criterion::C5);
    let eps = prof.transfer_epsilon;
    for i in 0..prof.samples {
        let d = dim_for(prof, i);
        let rho = draw_state(d, i / prof.dims.len(), &mut rng);
        let Some(after) = (match m.kind() {
            MeasureKind::P => population_transfer(&rho, eps, &mut rng),
            MeasureKind::V => coherence_reduction(&rho, eps, &mut rng),
        }) else {
            continue;
        };
        let (Some(a), Some(b)) = (tally.eval(m, &rho), tally.eval(m, &after)) else {
            continue;
        };
        let rise = b - a;
        tally.record(if rise > prof.equality_tol { rise } else { 0.0 }, || {
            Witness {
                criterion: Criterion::C5,
                kind: WitnessKind::Increase,
                states: vec![rho.clone(), after.clone()],
                weights: vec![eps],
                values: vec![a, b],
                threshold: prof.equality_tol,
                violation: 0.0,
            }
        });
    }
    tally.finish()
}

/// `rho_jj -> rho_jj - eps`, `rho_kk -> rho_kk + eps` for a random pair with
/// `rho_jj - eps >= rho_kk + eps`.
pub fn population_transfer(
    rho: &DensityMatrix,
    eps: f64,
    rng: &mut impl Rng,
) -> Option<DensityMatrix> {
    let p = rho.diagonal_probs();
    let d = p.len();
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|j| (0..d).map(move |k| (j, k)))
        .filter(|&(j, k)| j != k && p[k] + eps <= p[j] - eps)
        .collect();
    let &(j, k) = pairs.choose(rng)?;
    let mut m = rho.matrix().clone();
    m[(j, j)] -= Complex64::new(eps, 0.0);
    m[(k, k)] += Complex64::new(eps, 0.0);
    DensityMatrix::new(m).ok()
}

/// `|rho_jk| -> |rho_jk| - eps` (phase kept) for a random pair with
/// `|rho_jk| > eps`.
pub fn coherence_reduction(
    rho: &DensityMatrix,
    eps: f64,
    rng: &mut impl Rng,
) -> Option<DensityMatrix> {
    let d = rho.dim();
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|j| ((j + 1)..d).map(move |k| (j, k)))
        .filter(|&(j, k)| rho.matrix()[(j, k)].norm() > eps)
        .collect();
    let &(j, k) = pairs.choose(rng)?;
    let mut m = rho.matrix().clone();
    let z = m[(j, k)];
    let reduced = z * ((z.norm() - eps) / z.norm());
    m[(j, k)] = reduced;
    m[(k, j)] = reduced.conj();
    DensityMatrix::new(m).ok()
}

/// C6: random two- and three-state mixtures.
pub fn probe_convexity(
    m: &CandidateMeasure,
    prof: &ToleranceProfile,
    seed: RngSeed,
) -> ProbeOutcome {
    let mut rng = probe_rng(seed, Criterion::C6);
    let mut tally = Tally::new(Criterion::C6);
    for i in 0..prof.samples {
        let d = dim_for(prof, i);
        let n = 2 + (i / prof.dims.len()) % 2;
        let parts: Vec<DensityMatrix> = (0..n)
            .map(|k| draw_state(d, i / prof.dims.len() + 3 * k, &mut rng))
            .collect();
        let weights = simplex_point(n, &mut rng);
        let pairs: Vec<(f64, &DensityMatrix)> = weights.iter().copied().zip(parts.iter()).collect();
        let mix = DensityMatrix::mixture(&pairs).expect("valid weights");
        let Some(values) = parts
            .iter()
            .map(|r| tally.eval(m, r))
            .collect::<Option<Vec<f64>>>()
        else {
            continue;
        };
        let Some(at_mix) = tally.eval(m, &mix) else {
            continue;
        };
        let chord: f64 = weights.iter().zip(&values).map(|(w, v)| w * v).sum();
        let excess = at_mix - chord;
        tally.record(
            if excess > prof.convexity_tol {
                excess
            } else {
                0.0
            },
            || {
                let mut vals = values.clone();
                vals.push(at_mix);
                Witness {
                    criterion: Criterion::C6,
                    kind: WitnessKind::Convexity,
                    states: parts.clone(),
                    weights: weights.clone(),
                    values: vals,
                    threshold: prof.convexity_tol,
                    violation: 0.0,
                }
            },
        );
    }
    tally.finish()
}

/// Run all six probes. Deterministic for a fixed `(seed, profile)`.
pub fn check_criteria(
    m: &CandidateMeasure,
    prof: &ToleranceProfile,
    seed: RngSeed,
) -> Result<CriteriaReport> {
    prof.validate()?;
    let (c3, c4) = probe_extremes(m, prof, seed);
    let outcomes = [
        (Criterion::C1, probe_continuity(m, prof, seed)),
        (Criterion::C2, probe_permutation(m, prof, seed)),
        (Criterion::C3, c3),
        (Criterion::C4, c4),
        (Criterion::C5, probe_transfer(m, prof, seed)),
        (Criterion::C6, probe_convexity(m, prof, seed)),
    ];
    let mut verdicts = BTreeMap::new();
    let mut witnesses = Vec::new();
    let mut failures = Vec::new();
    let mut samples_used = 0;
    for (c, out) in outcomes {
        samples_used += out.verdict.samples;
        verdicts.insert(c, out.verdict);
        witnesses.extend(out.witness);
        failures.extend(out.failures);
    }
    if let Some(first) = failures.into_iter().next() {
        // evaluation errors count against C1 regardless of which probe hit them
        let v = verdicts.get_mut(&Criterion::C1).expect("C1 present");
        v.pass = false;
        v.max_violation = f64::INFINITY;
        witnesses.retain(|w| w.criterion != Criterion::C1);
        witnesses.insert(0, first);
    }
    witnesses.sort_by_key(|w| w.criterion);
    Ok(CriteriaReport {
        measure: m.name().to_string(),
        kind: m.kind(),
        verdicts,
        witnesses,
        profile: prof.clone(),
        seed,
        samples_used,
        note: "PASS means no violation was found among the sampled states at these tolerances"
            .into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ToleranceProfile {
        ToleranceProfile {
            samples: 600,
            ..Default::default()
        }
    }

    #[test]
    fn builtins_resolve() {
        for name in BUILTIN_MEASURES {
            assert_eq!(builtin(name).unwrap().name(), name);
        }
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn p_vn_passes_everything() {
        let r = check_criteria(&p_vn(), &small(), RngSeed(1)).unwrap();
        assert!(r.passed(), "{:?}", r.verdicts);
        assert!(r.witnesses.is_empty());
    }

    #[test]
    fn rho00_fails_permutation_with_the_swap_witness() {
        let m = CandidateMeasure::new("rho00", MeasureKind::P, |r| r.matrix()[(0, 0)].re);
        let out = probe_permutation(&m, &small(), RngSeed(2));
        assert!(!out.verdict.pass);
        assert!(out.witness.unwrap().recheck(&m).unwrap());
        // the explicit (0.9, 0.1) swap
        let a = diag_state(&[0.9, 0.1]);
        let b = permute(&a, &[1, 0]);
        let w = Witness {
            criterion: Criterion::C2,
            kind: WitnessKind::Permutation,
            states: vec![a, b],
            weights: vec![],
            values: vec![],
            threshold: 1e-9,
            violation: 0.8,
        };
        assert!(w.recheck(&m).unwrap());
        assert!(!w.recheck(&p_vn()).unwrap());
    }

    #[test]
    fn step_function_fails_continuity() {
        let m = CandidateMeasure::new("step", MeasureKind::P, |r| {
            if r.matrix()[(0, 0)].re > 0.5 {
                1.0
            } else {
                0.0
            }
        });
        let prof = ToleranceProfile {
            dims: vec![2],
            ..small()
        };
        let out = probe_continuity(&m, &prof, RngSeed(3));
        assert!(!out.verdict.pass);
        let w = out.witness.unwrap();
        assert!(w.recheck(&m).unwrap());
        assert!(!w.recheck(&p_vn()).unwrap());
    }

    #[test]
    fn constant_passes_continuity() {
        let m = CandidateMeasure::new("const", MeasureKind::P, |_| 0.3);
        assert!(probe_continuity(&m, &small(), RngSeed(4)).verdict.pass);
    }

    #[test]
    fn c_re_passes_permutation() {
        assert!(
            probe_permutation(&c_re(), &small(), RngSeed(5))
                .verdict
                .pass
        );
    }

    #[test]
    fn extremes_of_p_vn_and_c_re() {
        let (c3, c4) = probe_extremes(&p_vn(), &small(), RngSeed(6));
        assert!(c3.verdict.pass && c4.verdict.pass);
        let (c3, c4) = probe_extremes(&c_re(), &small(), RngSeed(6));
        assert!(c3.verdict.pass && c4.verdict.pass);
    }

    #[test]
    fn anti_measure_fails_transfer() {
        let m = CandidateMeasure::new("anti", MeasureKind::P, |r| -predictability_vn(r));
        let out = probe_transfer(&m, &small(), RngSeed(7));
        assert!(!out.verdict.pass);
        assert!(out.witness.unwrap().recheck(&m).unwrap());
        assert!(probe_transfer(&p_vn(), &small(), RngSeed(7)).verdict.pass);
    }

    #[test]
    fn transfer_guard_skips_crossing_moves() {
        let mut rng = RngSeed(8).rng();
        let rho = diag_state(&[0.50005, 0.49995]);
        assert!(population_transfer(&rho, 1e-4, &mut rng).is_none());
        let rho = diag_state(&[0.6, 0.4]);
        let after = population_transfer(&rho, 1e-4, &mut rng).unwrap();
        assert!((after.diagonal_probs()[0] - 0.5999).abs() < 1e-15);
    }

    #[test]
    fn concave_decoy_fails_convexity() {
        let out = probe_convexity(&decoy_concave(), &small(), RngSeed(9));
        assert!(!out.verdict.pass);
        assert!(out.witness.unwrap().recheck(&decoy_concave()).unwrap());
        assert!(probe_convexity(&p_vn(), &small(), RngSeed(9)).verdict.pass);
    }

    #[test]
    fn single_state_mixture_is_trivially_convex() {
        let rho = density_with(3, 2, &mut RngSeed(10).rng()).unwrap();
        let w = Witness {
            criterion: Criterion::C6,
            kind: WitnessKind::Convexity,
            states: vec![rho],
            weights: vec![1.0],
            values: vec![],
            threshold: 1e-9,
            violation: 0.0,
        };
        assert!(!w.recheck(&decoy_concave()).unwrap());
    }

    #[test]
    fn non_finite_output_is_a_c1_failure() {
        let m = CandidateMeasure::new("nan", MeasureKind::P, |r| {
            if r.dim() == 3 {
                f64::NAN
            } else {
                0.0
            }
        });
        let r = check_criteria(&m, &small(), RngSeed(11)).unwrap();
        assert!(!r.verdicts[&Criterion::C1].pass);
        let w = r.witness_for(Criterion::C1).unwrap();
        assert_eq!(w.kind, WitnessKind::NonFinite);
        assert!(w.recheck(&m).unwrap());
        let panicky = CandidateMeasure::new("panic", MeasureKind::P, |_| panic!("boom"));
        assert!(panicky
            .evaluate(&DensityMatrix::maximally_mixed(2))
            .is_err());
    }

    #[test]
    fn report_is_deterministic_and_serializes() {
        let a = check_criteria(&decoy_rho00(), &small(), RngSeed(12)).unwrap();
        let b = check_criteria(&decoy_rho00(), &small(), RngSeed(12)).unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        assert_eq!(ja, serde_json::to_string(&b).unwrap());
        let back: CriteriaReport = serde_json::from_str(&ja).unwrap();
        for w in &back.witnesses {
            assert!(w.recheck(&decoy_rho00()).unwrap());
        }
    }

    #[test]
    fn profile_validation() {
        assert!(ToleranceProfile::default().validate().is_ok());
        let bad = ToleranceProfile {
            samples: 0,
            ..Default::default()
        };
        assert!(matches!(
            check_criteria(&p_vn(), &bad, RngSeed(0)),
            Err(Error::Config(_))
        ));
        let bad = ToleranceProfile {
            dims: vec![1],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ToleranceProfile {
            equality_tol: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
