//! Structure-prediction oracles: the trait, a deterministic synthetic
//! landscape, and helpers shared with the remote adapters.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{fnv1a, mix_seed, mutate_at_distance, random_sequence};
use crate::seq::{ReferenceContext, Sequence};
use crate::structure::StructureModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("oracle budget exhausted ({limit} calls)")]
    BudgetExhausted { limit: usize },
    #[error("remote error: HTTP {status}: {body}")]
    Remote { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("timed out after {0} s")]
    Timeout(u64),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}

/// Predicted models for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub models: Vec<StructureModel>,
    pub chosen_index: usize,
    #[serde(skip)]
    pub wall_time_ms: u64,
    pub oracle_id: String,
}

impl OracleResult {
    /// Validates the models and picks the most confident one.
    pub fn new(
        models: Vec<StructureModel>,
        oracle_id: impl Into<String>,
    ) -> Result<Self, OracleError> {
        if models.is_empty() {
            return Err(OracleError::SchemaViolation("no models returned".into()));
        }
        for (i, m) in models.iter().enumerate() {
            if m.plddt.is_none() {
                return Err(OracleError::SchemaViolation(format!(
                    "model {i} has no pLDDT"
                )));
            }
            m.validate()
                .map_err(|e| OracleError::SchemaViolation(format!("model {i}: {e}")))?;
        }
        let chosen_index = select_best_model(&models);
        Ok(Self {
            models,
            chosen_index,
            wall_time_ms: 0,
            oracle_id: oracle_id.into(),
        })
    }

    pub fn chosen(&self) -> &StructureModel {
        &self.models[self.chosen_index]
    }
}

/// Index of the model with the highest mean pLDDT; ties go to the lowest index.
pub fn select_best_model(models: &[StructureModel]) -> usize {
    let mut best = 0;
    let mut best_mean = f64::NEG_INFINITY;
    for (i, m) in models.iter().enumerate() {
        let mean = m.mean_plddt().unwrap_or(f64::NEG_INFINITY);
        if mean > best_mean {
            best = i;
            best_mean = mean;
        }
    }
    best
}

/// Maps a sequence to predicted structures. Implementations do not cache
/// and do not count budget; see [`crate::evaluate::Evaluator`].
pub trait Oracle: Send + Sync {
    fn predict(&self, seq: &Sequence) -> Result<OracleResult, OracleError>;

    fn id(&self) -> String;
}

impl<T: Oracle + ?Sized> Oracle for Box<T> {
    fn predict(&self, seq: &Sequence) -> Result<OracleResult, OracleError> {
        (**self).predict(seq)
    }

    fn id(&self) -> String {
        (**self).id()
    }
}

/// Ideal α-helix Cα trace: residue `i` (0-based) at
/// `(r cos iθ, r sin iθ, i h)` with r = 2.3 Å, θ = 100°, h = 1.5 Å.
pub fn generate_reference_trace(length: usize) -> StructureModel {
    const RADIUS: f64 = 2.3;
    const RISE: f64 = 1.5;
    let theta = 100f64.to_radians();
    let ca_coords = (0..length)
        .map(|i| {
            let a = i as f64 * theta;
            [RADIUS * a.cos(), RADIUS * a.sin(), i as f64 * RISE]
        })
        .collect();
    StructureModel {
        ca_coords,
        plddt: None,
        source_id: format!("ideal-helix-{length}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub window: usize,
    /// Å of displacement at full local mismatch.
    pub displacement_scale: f64,
    /// Upper bound of the uniform pLDDT noise; 0 disables noise.
    pub plddt_noise: f64,
    pub num_models: usize,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            window: 5,
            displacement_scale: 8.0,
            plddt_noise: 3.0,
            num_models: 2,
        }
    }
}

/// A cheap, deterministic stand-in for a folding model.
///
/// Quality is driven by the local mismatch against a hidden target sequence:
/// a residue whose centered window disagrees with the target on a fraction
/// `m` of positions gets pLDDT `100 (1 - m) - ε` and is displaced by
/// `scale * m` Å along a fixed per-position direction.
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    pub hidden_target: Sequence,
    pub reference_trace: StructureModel,
    pub noise_seed: u64,
    pub params: SyntheticParams,
}

impl SyntheticOracle {
    pub fn new(hidden_target: Sequence, reference_trace: StructureModel, noise_seed: u64) -> Self {
        assert_eq!(hidden_target.len(), reference_trace.len());
        Self {
            hidden_target,
            reference_trace,
            noise_seed,
            params: SyntheticParams::default(),
        }
    }

    pub fn with_params(mut self, params: SyntheticParams) -> Self {
        self.params = params;
        self
    }

    /// Per-residue local mismatch fraction; overhang beyond the target counts
    /// as mismatch.
    pub fn mismatch_profile(&self, seq: &Sequence) -> Vec<f64> {
        let target = self.hidden_target.as_bytes();
        let query = seq.as_bytes();
        let mismatch: Vec<bool> = query
            .iter()
            .enumerate()
            .map(|(i, r)| target.get(i) != Some(r))
            .collect();
        let half = self.params.window / 2;
        (0..query.len())
            .map(|i| {
                let lo = i.saturating_sub(half);
                let hi = (i + half + 1).min(query.len());
                mismatch[lo..hi].iter().filter(|&&m| m).count() as f64 / (hi - lo) as f64
            })
            .collect()
    }

    fn direction(&self, position: usize) -> Vector3<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.noise_seed, position as u64));
        loop {
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                return v / n;
            }
        }
    }

    fn base_coord(&self, i: usize) -> Vector3<f64> {
        let trace = &self.reference_trace.ca_coords;
        if let Some(c) = trace.get(i) {
            return Vector3::from(*c);
        }
        // Extend past the end of the reference along its last bond.
        let last = Vector3::from(trace[trace.len() - 1]);
        let step = if trace.len() > 1 {
            last - Vector3::from(trace[trace.len() - 2])
        } else {
            Vector3::new(0.0, 0.0, 3.8)
        };
        last + step * (i + 1 - trace.len()) as f64
    }

    pub fn fold(&self, seq: &Sequence) -> OracleResult {
        let m = self.mismatch_profile(seq);
        let mut noise_rng =
            ChaCha8Rng::seed_from_u64(mix_seed(self.noise_seed, fnv1a(seq.as_bytes())));
        let noise = self.params.plddt_noise;
        let plddt: Vec<f64> = m
            .iter()
            .map(|mi| {
                let eps = if noise > 0.0 {
                    noise_rng.random_range(0.0..=noise)
                } else {
                    0.0
                };
                (100.0 * (1.0 - mi) - eps).clamp(0.0, 100.0)
            })
            .collect();
        let coords = |scale: f64| -> Vec<[f64; 3]> {
            m.iter()
                .enumerate()
                .map(|(i, mi)| (self.base_coord(i) + self.direction(i) * (scale * mi)).into())
                .collect()
        };
        let primary = StructureModel {
            ca_coords: coords(self.params.displacement_scale),
            plddt: Some(plddt.clone()),
            source_id: "synthetic-model".into(),
        };
        let mut models = Vec::new();
        if self.params.num_models > 1 {
            let decoy = StructureModel {
                ca_coords: coords(self.params.displacement_scale * 1.5),
                plddt: Some(plddt.iter().map(|p| (p - 10.0).max(0.0)).collect()),
                source_id: "synthetic-decoy".into(),
            };
            models.extend(std::iter::repeat_n(decoy, self.params.num_models - 1));
        }
        models.push(primary);
        let chosen_index = select_best_model(&models);
        OracleResult {
            models,
            chosen_index,
            wall_time_ms: 0,
            oracle_id: self.id(),
        }
    }
}

/// A complete synthetic design problem: a hidden target folding onto an
/// ideal helix, and a start sequence a fixed Hamming distance away.
#[derive(Debug, Clone)]
pub struct SyntheticCase {
    pub target: Sequence,
    pub start: Sequence,
    pub ctx: ReferenceContext,
    pub oracle: SyntheticOracle,
}

impl SyntheticCase {
    pub fn generate(
        length: usize,
        start_distance: usize,
        seed: u64,
        params: SyntheticParams,
    ) -> Self {
        let target = random_sequence(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, 1)), length);
        let start = mutate_at_distance(
            &mut ChaCha8Rng::seed_from_u64(mix_seed(seed, 2)),
            &target,
            start_distance,
        );
        let trace = generate_reference_trace(length);
        let ctx = ReferenceContext::new(None, trace.clone(), vec![]).expect("no ligand sites");
        let oracle =
            SyntheticOracle::new(target.clone(), trace, mix_seed(seed, 3)).with_params(params);
        Self {
            target,
            start,
            ctx,
            oracle,
        }
    }
}

impl Oracle for SyntheticOracle {
    fn predict(&self, seq: &Sequence) -> Result<OracleResult, OracleError> {
        Ok(self.fold(seq))
    }

    fn id(&self) -> String {
        format!("synthetic-{}", self.noise_seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{ca_rmsd, tm_score};

    fn target(len: usize, seed: u64) -> Sequence {
        crate::rng::random_sequence(&mut ChaCha8Rng::seed_from_u64(seed), len)
    }

    #[test]
    fn helix_trace() {
        let one = generate_reference_trace(1);
        assert_eq!(one.ca_coords, vec![[2.3, 0.0, 0.0]]);
        let h = generate_reference_trace(50);
        let d: Vec<f64> = h
            .ca_coords
            .windows(2)
            .map(|w| (Vector3::from(w[1]) - Vector3::from(w[0])).norm())
            .collect();
        assert!(d.iter().all(|x| (x - d[0]).abs() < 1e-9));
        assert_eq!(generate_reference_trace(50), h);
    }

    #[test]
    fn target_folds_to_reference() {
        let t = target(40, 1);
        let oracle = SyntheticOracle::new(t.clone(), generate_reference_trace(40), 9);
        let res = oracle.fold(&t);
        assert_eq!(res.models.len(), 2);
        assert_eq!(res.chosen_index, 1);
        let chosen = res.chosen();
        assert!(chosen.plddt.as_ref().unwrap().iter().all(|&p| p >= 97.0));
        assert!(ca_rmsd(chosen, &oracle.reference_trace).unwrap() < 1e-9);

        let quiet = oracle.clone().with_params(SyntheticParams {
            plddt_noise: 0.0,
            ..Default::default()
        });
        assert!((quiet.fold(&t).chosen().mean_plddt().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_mutation_is_local() {
        let t = target(30, 2);
        let oracle = SyntheticOracle::new(t.clone(), generate_reference_trace(30), 3).with_params(
            SyntheticParams {
                plddt_noise: 0.0,
                ..Default::default()
            },
        );
        let p = 14; // 0-based
        let other = if t.as_bytes()[p] == b'A' { b'C' } else { b'A' };
        let mutant = t.with_substitutions(&[(p, other)]);
        let plddt = oracle.fold(&mutant).chosen().plddt.clone().unwrap();
        for (i, v) in plddt.iter().enumerate() {
            if i.abs_diff(p) <= 2 {
                assert!((v - 80.0).abs() < 1e-12, "{i}: {v}");
            } else {
                assert_eq!(*v, 100.0);
            }
        }
    }

    #[test]
    fn all_different_is_far() {
        let t = target(60, 4);
        let oracle = SyntheticOracle::new(t.clone(), generate_reference_trace(60), 5);
        let all_diff = Sequence::new(
            t.as_str()
                .bytes()
                .map(|b| if b == b'W' { 'G' } else { 'W' })
                .collect::<String>(),
        )
        .unwrap();
        assert!(oracle.mismatch_profile(&all_diff).iter().all(|&m| m == 1.0));
        let res = oracle.fold(&all_diff);
        // Both models bottom out at pLDDT 0, so the tie goes to the decoy.
        assert_eq!(res.chosen_index, 0);
        let chosen = res.chosen().clone();
        let primary = res.models.last().unwrap();
        let dev: Vec<f64> = primary
            .ca_coords
            .iter()
            .zip(&oracle.reference_trace.ca_coords)
            .map(|(a, b)| (Vector3::from(*a) - Vector3::from(*b)).norm())
            .collect();
        assert!(dev.iter().all(|d| (d - 8.0).abs() < 1e-9));
        assert!(tm_score(&chosen, &oracle.reference_trace).unwrap().score < 0.5);
    }

    #[test]
    fn length_overhang_counts_as_mismatch() {
        let t = target(10, 6);
        let oracle = SyntheticOracle::new(t.clone(), generate_reference_trace(10), 5);
        let longer = Sequence::new(format!("{}AAA", t)).unwrap();
        let m = oracle.mismatch_profile(&longer);
        assert_eq!(m.len(), 13);
        assert_eq!(m[12], 1.0);
        assert_eq!(oracle.fold(&longer).chosen().len(), 13);
    }

    #[test]
    fn deterministic() {
        let t = target(25, 7);
        let oracle = SyntheticOracle::new(t.clone(), generate_reference_trace(25), 11);
        let q = t.with_substitutions(&[(3, b'W'), (17, b'P')]);
        assert_eq!(oracle.fold(&q), oracle.fold(&q));
    }

    #[test]
    fn best_model_selection_ties_to_lowest() {
        let m = |p: f64| StructureModel::new(vec![[0.0; 3]], Some(vec![p]), "m").unwrap();
        assert_eq!(select_best_model(&[m(50.0), m(70.0), m(70.0)]), 1);
        assert!(OracleResult::new(vec![], "x").is_err());
        let bad = StructureModel {
            ca_coords: vec![[0.0; 3]; 2],
            plddt: Some(vec![1.0]),
            source_id: String::new(),
        };
        assert!(matches!(
            OracleResult::new(vec![bad], "x"),
            Err(OracleError::SchemaViolation(_))
        ));
    }

    #[test]
    fn landscape_is_monotone_along_mutation_chains() {
        // Noise-free: each extra mismatch strictly lowers mean pLDDT.
        for seed in 0..20u64 {
            let len = 6 + (seed as usize % 7);
            let t = target(len, 100 + seed);
            let oracle = SyntheticOracle::new(t.clone(), generate_reference_trace(len), seed)
                .with_params(SyntheticParams {
                    plddt_noise: 0.0,
                    ..Default::default()
                });
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (0..len).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let mut current = t.clone();
            let mut last = oracle.fold(&current).chosen().mean_plddt().unwrap();
            for &p in &order {
                let r = t.as_bytes()[p];
                let other = crate::seq::ALPHABET[(crate::seq::residue_index(r).unwrap() + 1) % 20];
                current = current.with_substitutions(&[(p, other)]);
                let now = oracle.fold(&current).chosen().mean_plddt().unwrap();
                assert!(now < last, "seed {seed}: {now} !< {last}");
                last = now;
            }
        }
    }
}
