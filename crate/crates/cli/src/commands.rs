//! The four subcommands. Each returns its rendered output and whether every
//! check passed.

use duality_core::criteria::{builtin, check_criteria, CriteriaReport, BUILTIN_MEASURES};
use duality_core::detector::{
    avg_coherence, distinguishability_vn, e_gap_diag, maximize_distinguishability, sort_ensemble,
    ComplementarityRecord, DetectorConfig, MeasurementBasis,
};
use duality_core::measures::{
    concurrence_pure_2q, eof_2q, predictability_vn, qubit_predictability, qubit_visibility,
    rel_entropy_coherence,
};
use duality_core::monotones::{convex_roof_with, RoofOptions, RoofResultJson, SymmetricConcaveFn};
use duality_core::random::{density_with, haar_pure_with, unitary_with, RngSeed};
use duality_core::state::{DensityMatrix, StateJson};
use duality_core::{Complex64, ComplexVector};
use log::info;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{CriteriaConfig, RoofConfig, SweepConfig, VerifyConfig};
use crate::report::{format_g12, CheckRecord, Envelope, SuiteReport};
use crate::CliError;

/// Output of a command.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub text: String,
    pub pass: bool,
    /// Metadata for outputs that cannot embed it (the sweep CSV).
    pub sidecar: Option<String>,
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

struct Tracker {
    worst: f64,
    samples: usize,
}

impl Tracker {
    fn new() -> Self {
        Self {
            worst: f64::NEG_INFINITY,
            samples: 0,
        }
    }

    fn push(&mut self, v: f64) {
        self.worst = self.worst.max(v);
        self.samples += 1;
    }

    fn record(self, name: &str, anchor: &str, tolerance: f64) -> CheckRecord {
        CheckRecord {
            name: name.into(),
            paper_anchor: anchor.into(),
            samples: self.samples,
            max_violation: self.worst,
            tolerance,
            pass: self.worst <= tolerance,
        }
    }
}

fn single_dims(cfg: &VerifyConfig) -> Vec<usize> {
    match cfg.dims {
        Some([a, _]) => vec![a],
        None => (2..=6).collect(),
    }
}

fn detector_dims(cfg: &VerifyConfig, i: usize) -> (usize, usize) {
    match cfg.dims {
        Some([a, b]) => (a, b),
        None => {
            let d = 2 + i % 3;
            (d, d)
        }
    }
}

/// Run the inequality and identity suites.
pub fn cmd_verify(cfg: &VerifyConfig) -> Result<Outcome, CliError> {
    let seed = RngSeed(cfg.validate()?);
    let n = cfg.samples;
    let mut checks = Vec::new();

    info!("duality on qubit states");
    let mut rng = seed.split(1).rng();
    let mut t = Tracker::new();
    for _ in 0..n {
        let rank = rng.random_range(1..=2);
        let rho = density_with(2, rank, &mut rng)?;
        let (p, v) = (qubit_predictability(&rho)?, qubit_visibility(&rho)?);
        t.push(p * p + v * v - 1.0);
    }
    checks.push(t.record("duality_qubit", "P^2 + V^2 <= 1", 1e-10));

    info!("triality on two-qubit pure states");
    let mut rng = seed.split(2).rng();
    let mut t = Tracker::new();
    for _ in 0..n {
        let psi = haar_pure_with(2, 2, &mut rng);
        let ra = psi.reduced_a();
        let (p, v, c) = (
            qubit_predictability(&ra)?,
            qubit_visibility(&ra)?,
            concurrence_pure_2q(&psi)?,
        );
        t.push((p * p + v * v + c * c - 1.0).abs());
    }
    checks.push(t.record("triality_two_qubit", "P^2 + V^2 + C^2 = 1", 1e-10));

    info!("entropic complementarity");
    let mut rng = seed.split(3).rng();
    let (mut mixed, mut pure) = (Tracker::new(), Tracker::new());
    for d in single_dims(cfg) {
        let log_d = (d as f64).log2();
        for _ in 0..n {
            let rank = rng.random_range(1..=d);
            let rho = density_with(d, rank, &mut rng)?;
            mixed.push(rel_entropy_coherence(&rho) + predictability_vn(&rho) - log_d);
            let rho = haar_pure_with(d, 1, &mut rng).density();
            pure.push((rel_entropy_coherence(&rho) + predictability_vn(&rho) - log_d).abs());
        }
    }
    checks.push(mixed.record("entropic_complementarity", "C_re + P_vn <= log2 d", 1e-10));
    checks.push(pure.record(
        "entropic_saturation_pure",
        "C_re + P_vn = log2 d on pure states",
        1e-9,
    ));

    info!("distinguishability relations");
    let mut rng = seed.split(4).rng();
    let (mut eq8, mut identity) = (Tracker::new(), Tracker::new());
    for i in 0..n {
        let (da, db) = detector_dims(cfg, i);
        let det = DetectorConfig::random_with(da, db, &mut rng)?;
        let basis = MeasurementBasis::new(unitary_with(db, &mut rng))?;
        let joint = det.joint_state();
        let rho_a = joint.reduced_a();
        let sub = sort_ensemble(&joint, &basis)?;
        let d = distinguishability_vn(&sub);
        eq8.push(d + avg_coherence(&sub) - (da as f64).log2());
        identity.push((d - predictability_vn(&rho_a) - e_gap_diag(&rho_a, &sub)?).abs());
    }
    checks.push(eq8.record(
        "distinguishability_coherence",
        "D_vn + C_re(avg) <= log2 d_A",
        1e-9,
    ));
    checks.push(identity.record("decomposition_identity", "D_vn = P_vn + E", 1e-10));

    info!("hierarchy with basis maximization");
    let mut rng = seed.split(5).rng();
    let mut t = Tracker::new();
    for i in 0..cfg.hierarchy_samples {
        let (da, db) = detector_dims(cfg, i);
        let det = DetectorConfig::random_with(da, db, &mut rng)?;
        let basis = MeasurementBasis::new(unitary_with(db, &mut rng))?;
        let joint = det.joint_state();
        let d = distinguishability_vn(&sort_ensemble(&joint, &basis)?);
        let (d_max, _) =
            maximize_distinguishability(&joint, cfg.restarts, seed.split(1000 + i as u64))?;
        let p = predictability_vn(&joint.reduced_a());
        t.push((p - d).max(d - d_max));
    }
    checks.push(t.record("hierarchy", "P_vn <= D_vn <= D_max", 1e-6));

    let pass = checks.iter().all(|c| c.pass);
    let report = SuiteReport {
        checks,
        notes: vec![
            "max_violation is lhs - rhs for inequalities and |lhs - rhs| for equalities".into(),
        ],
    };
    Ok(Outcome {
        text: to_json(&Envelope::new("verify", seed.0, cfg, pass, report)),
        pass,
        sidecar: None,
    })
}

pub const SWEEP_HEADER: &str = "overlap,P,D,C_avg,E_diag,E_script,D_max,slack_eq6,slack_eq8";

fn sweep_amplitudes(cfg: &SweepConfig) -> Vec<Complex64> {
    let d = cfg.dims[0];
    let raw = cfg.amplitudes.clone().unwrap_or_else(|| vec![1.0; d]);
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    raw.iter().map(|x| Complex64::new(x / norm, 0.0)).collect()
}

/// Equal-overlap detector configuration, padded with zeros into `C^{d_B}`.
fn sweep_config(amps: &[Complex64], overlap: f64, d_b: usize) -> Result<DetectorConfig, CliError> {
    let base = DetectorConfig::equal_overlap(amps, overlap)?;
    let dets = base
        .detectors()
        .iter()
        .map(|v| {
            ComplexVector::from_fn(d_b, |i, _| {
                if i < v.len() {
                    v[i]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
        })
        .collect();
    Ok(DetectorConfig::new(amps.to_vec(), dets)?)
}

/// Complementarity quantities along an overlap grid, as CSV.
pub fn cmd_sweep(cfg: &SweepConfig) -> Result<Outcome, CliError> {
    let seed = RngSeed(cfg.validate()?);
    let amps = sweep_amplitudes(cfg);
    let basis = MeasurementBasis::computational(cfg.dims[1]);
    let mut text = String::from(SWEEP_HEADER);
    text.push('\n');
    let mut pass = true;
    for (i, c) in cfg.grid().into_iter().enumerate() {
        info!("overlap {c}");
        let det = sweep_config(&amps, c, cfg.dims[1])?;
        let (d_max, _) =
            maximize_distinguishability(&det.joint_state(), cfg.restarts, seed.split(i as u64))?;
        let r = ComplementarityRecord::evaluate(&det, &basis, d_max)?;
        pass &= r.slack_eq6 >= -1e-10 && r.slack_eq8 >= -1e-9 && r.D <= r.D_max + 1e-6;
        let row = [
            c,
            r.P,
            r.D,
            r.C_avg,
            r.E_diag,
            r.E_script,
            r.D_max,
            r.slack_eq6,
            r.slack_eq8,
        ];
        text.push_str(
            &row.iter()
                .map(|&x| format_g12(x))
                .collect::<Vec<_>>()
                .join(","),
        );
        text.push('\n');
    }
    let meta = Envelope::new(
        "sweep",
        seed.0,
        cfg,
        pass,
        serde_json::json!({ "columns": SWEEP_HEADER }),
    );
    Ok(Outcome {
        text,
        pass,
        sidecar: Some(to_json(&meta)),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoofReport {
    pub dims: [usize; 2],
    pub roof: RoofResultJson,
    /// Closed-form entanglement of formation, for two-qubit inputs.
    pub eof_2q: Option<f64>,
    /// `roof - eof_2q`.
    pub gap: Option<f64>,
}

/// Convex-roof entanglement of formation for a state file.
pub fn cmd_roof(cfg: &RoofConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let path = cfg.input.as_ref().expect("validated");
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let js: StateJson = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("malformed state file {}: {e}", path.display())))?;
    let rho: DensityMatrix = js.parse()?.density();
    let dims = cfg.dims.unwrap_or(js.dims);
    if dims[0] * dims[1] != rho.dim() {
        return Err(CliError::Config(format!(
            "dims {}x{} do not match a state of dimension {}",
            dims[0],
            dims[1],
            rho.dim()
        )));
    }
    let seed = RngSeed(cfg.seed.unwrap_or(0));
    let opts = RoofOptions {
        ensemble_size: cfg.ensemble_size,
        restarts: cfg.restarts,
        ..RoofOptions::new(seed)
    };
    let result = convex_roof_with(
        &SymmetricConcaveFn::shannon(),
        &rho,
        (dims[0], dims[1]),
        &opts,
    )?;
    let exact = if dims == [2, 2] {
        Some(eof_2q(&rho)?)
    } else {
        None
    };
    let gap = exact.map(|e| result.value - e);
    let pass = gap.is_none_or(|g| (-1e-9..=cfg.tolerance).contains(&g));
    let report = RoofReport {
        dims,
        roof: result.to_json(),
        eof_2q: exact,
        gap,
    };
    Ok(Outcome {
        text: to_json(&Envelope::new("roof", seed.0, cfg, pass, report)),
        pass,
        sidecar: None,
    })
}

/// Criteria report for a built-in measure.
pub fn cmd_criteria(cfg: &CriteriaConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let name = cfg.measure.as_deref().expect("validated");
    let measure = builtin(name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown measure `{name}`; available: {}",
            BUILTIN_MEASURES.join(", ")
        ))
    })?;
    let seed = RngSeed(cfg.seed.unwrap_or(0));
    let report: CriteriaReport = check_criteria(&measure, &cfg.profile, seed)?;
    let pass = report.passed();
    Ok(Outcome {
        text: to_json(&Envelope::new("criteria", seed.0, cfg, pass, report)),
        pass,
        sidecar: None,
    })
}
