//! Cα traces, rigid superposition and structural fidelity metrics.
//!
//! All comparisons are positional: residue `i` of the model is paired with
//! residue `i` of the reference, so both traces must have the same length.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StructureError {
    #[error("length mismatch: {0} vs {1} residues")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite coordinate at residue {0}")]
    NonFinite(usize),
    #[error("pLDDT array has {0} values for {1} residues")]
    PlddtLength(usize, usize),
    #[error("pLDDT value {value} at residue {residue} is outside [0, 100]")]
    PlddtRange { residue: usize, value: f64 },
}

/// One Cα per residue, in Å, with optional per-residue pLDDT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureModel {
    pub ca_coords: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plddt: Option<Vec<f64>>,
    #[serde(default)]
    pub source_id: String,
}

impl StructureModel {
    pub fn new(
        ca_coords: Vec<[f64; 3]>,
        plddt: Option<Vec<f64>>,
        source_id: impl Into<String>,
    ) -> Result<Self, StructureError> {
        let model = Self {
            ca_coords,
            plddt,
            source_id: source_id.into(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), StructureError> {
        if self.ca_coords.is_empty() {
            return Err(StructureError::EmptyInput);
        }
        if let Some(i) = self
            .ca_coords
            .iter()
            .position(|c| c.iter().any(|v| !v.is_finite()))
        {
            return Err(StructureError::NonFinite(i + 1));
        }
        if let Some(plddt) = &self.plddt {
            if plddt.len() != self.ca_coords.len() {
                return Err(StructureError::PlddtLength(
                    plddt.len(),
                    self.ca_coords.len(),
                ));
            }
            if let Some((i, &value)) = plddt
                .iter()
                .enumerate()
                .find(|(_, v)| !(0.0..=100.0).contains(*v))
            {
                return Err(StructureError::PlddtRange {
                    residue: i + 1,
                    value,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ca_coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ca_coords.is_empty()
    }

    pub fn points(&self) -> Vec<Vector3<f64>> {
        self.ca_coords.iter().map(|c| Vector3::from(*c)).collect()
    }

    pub fn mean_plddt(&self) -> Option<f64> {
        self.plddt.as_deref().and_then(|p| aggregate_plddt(p).ok())
    }

    /// Applies `x -> R x + t` to every coordinate.
    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        let ca_coords = self
            .ca_coords
            .iter()
            .map(|c| (rotation * Vector3::from(*c) + translation).into())
            .collect();
        Self {
            ca_coords,
            plddt: self.plddt.clone(),
            source_id: self.source_id.clone(),
        }
    }
}

/// Rigid motion mapping the moving trace onto the fixed one: `y ≈ R x + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Superposition {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub rmsd: f64,
    /// Set when the cross-covariance has rank < 2 (collinear or coincident
    /// points); the rotation is still a proper rotation minimizing the RMSD.
    pub degenerate: bool,
}

impl Superposition {
    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }
}

fn centroid(points: &[Vector3<f64>], weights: &[f64]) -> Vector3<f64> {
    let total: f64 = weights.iter().sum();
    points
        .iter()
        .zip(weights)
        .fold(Vector3::zeros(), |acc, (p, w)| acc + p * *w)
        / total
}

/// Weighted Kabsch fit. Points with zero weight are carried along but do not
/// influence the fit; the reported RMSD is over the weighted set.
pub(crate) fn kabsch_weighted(
    moving: &[Vector3<f64>],
    fixed: &[Vector3<f64>],
    weights: &[f64],
) -> Superposition {
    let cm = centroid(moving, weights);
    let cf = centroid(fixed, weights);
    let mut h = Matrix3::zeros();
    for ((m, f), w) in moving.iter().zip(fixed).zip(weights) {
        if *w > 0.0 {
            h += (m - cm) * (f - cf).transpose() * *w;
        }
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let sigma = svd.singular_values;
    let largest = sigma.max();
    let mut sorted = [sigma[0], sigma[1], sigma[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    let degenerate = largest <= f64::EPSILON || sorted[1] <= 1e-9 * largest;

    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    // Flip the axis with the smallest singular value to avoid a reflection.
    let smallest = (0..3)
        .min_by(|&a, &b| sigma[a].total_cmp(&sigma[b]))
        .expect("three singular values");
    let mut correction = Matrix3::identity();
    if d < 0.0 {
        correction[(smallest, smallest)] = -1.0;
    }
    let rotation = if largest <= f64::EPSILON {
        Matrix3::identity()
    } else {
        v * correction * u.transpose()
    };
    let translation = cf - rotation * cm;

    let total: f64 = weights.iter().sum();
    let sq: f64 = moving
        .iter()
        .zip(fixed)
        .zip(weights)
        .map(|((m, f), w)| w * (rotation * m + translation - f).norm_squared())
        .sum();
    Superposition {
        rotation,
        translation,
        rmsd: (sq / total).max(0.0).sqrt(),
        degenerate,
    }
}

fn check_pair(a: &StructureModel, b: &StructureModel) -> Result<(), StructureError> {
    if a.len() != b.len() {
        return Err(StructureError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StructureError::EmptyInput);
    }
    Ok(())
}

/// Optimal least-squares superposition of `moving` onto `fixed`.
///
/// Fewer than three residues, or collinear traces, are reported through
/// [`Superposition::degenerate`] rather than as an error.
pub fn kabsch_superpose(
    moving: &StructureModel,
    fixed: &StructureModel,
) -> Result<Superposition, StructureError> {
    check_pair(moving, fixed)?;
    let weights = vec![1.0; moving.len()];
    let mut sup = kabsch_weighted(&moving.points(), &fixed.points(), &weights);
    sup.degenerate |= moving.len() < 3;
    Ok(sup)
}

/// Cα-RMSD after optimal superposition.
pub fn ca_rmsd(pred: &StructureModel, reference: &StructureModel) -> Result<f64, StructureError> {
    Ok(kabsch_superpose(pred, reference)?.rmsd)
}

/// TM-score distance scale for a reference of `l_ref` residues, floored at 0.5 Å.
pub fn tm_d0(l_ref: usize) -> f64 {
    if l_ref <= 15 {
        return 0.5;
    }
    (1.24 * ((l_ref - 15) as f64).cbrt() - 1.8).max(0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmAlignment {
    pub score: f64,
    pub superposition: Superposition,
    pub d0: f64,
    /// Reference has 15 residues or fewer; `d0` sits at its 0.5 Å floor.
    pub short_chain: bool,
}

fn tm_sum(distances_sq: impl Iterator<Item = f64>, d0: f64) -> f64 {
    let d0_sq = d0 * d0;
    distances_sq.map(|d2| 1.0 / (1.0 + d2 / d0_sq)).sum()
}

struct TmSearch<'a> {
    moving: &'a [Vector3<f64>],
    fixed: &'a [Vector3<f64>],
    d0: f64,
    best: Option<(f64, Superposition)>,
}

impl TmSearch<'_> {
    fn distances_sq(&self, sup: &Superposition) -> Vec<f64> {
        self.moving
            .iter()
            .zip(self.fixed)
            .map(|(m, f)| (sup.apply(m) - f).norm_squared())
            .collect()
    }

    fn score(&mut self, sup: Superposition) -> Vec<f64> {
        let d2 = self.distances_sq(&sup);
        let tm = tm_sum(d2.iter().copied(), self.d0) / self.fixed.len() as f64;
        if self.best.as_ref().is_none_or(|(b, _)| tm > *b) {
            self.best = Some((tm, sup));
        }
        d2
    }

    fn fit(&self, mask: &[bool]) -> Superposition {
        let w: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        kabsch_weighted(self.moving, self.fixed, &w)
    }

    /// Superpose on the inliers, re-select inliers under `cutoff`, repeat
    /// until the inlier set stops changing.
    fn refine(&mut self, seed: Vec<bool>, cutoff: f64) -> Superposition {
        let n = self.moving.len();
        let min_inliers = n.min(3);
        let mut mask = seed;
        let mut sup = self.fit(&mask);
        for _ in 0..30 {
            let d2 = self.score(sup.clone());
            let mut c = cutoff;
            let next = loop {
                let next: Vec<bool> = d2.iter().map(|&d| d < c * c).collect();
                if next.iter().filter(|&&b| b).count() >= min_inliers {
                    break next;
                }
                c += 0.5;
            };
            if next == mask {
                break;
            }
            mask = next;
            sup = self.fit(&mask);
        }
        sup
    }

    /// Fixed-point iteration of the TM objective itself: a weighted Kabsch
    /// fit where each pair is weighted by `1 / (1 + d²/d0²)²`.
    fn polish(&mut self, start: Superposition) {
        let mut sup = start;
        let mut last = f64::NEG_INFINITY;
        for _ in 0..100 {
            let d2 = self.score(sup.clone());
            let tm = tm_sum(d2.iter().copied(), self.d0);
            if tm - last < 1e-12 {
                break;
            }
            last = tm;
            let d0_sq = self.d0 * self.d0;
            let w: Vec<f64> = d2.iter().map(|d| (1.0 + d / d0_sq).powi(-2)).collect();
            sup = kabsch_weighted(self.moving, self.fixed, &w);
        }
    }
}

/// TM-score of `pred` against `reference`, normalized by the reference length.
///
/// Seeds the search with contiguous windows of length L, L/2 and L/4, then
/// alternates superposition and inlier selection over a short schedule of
/// distance cutoffs. Chains of 15 residues or fewer are also seeded from
/// every residue pair. The strongest starts are polished by iterating the TM
/// objective's own fixed-point equation and the best is kept.
pub fn tm_score(
    pred: &StructureModel,
    reference: &StructureModel,
) -> Result<TmAlignment, StructureError> {
    check_pair(pred, reference)?;
    let moving = pred.points();
    let fixed = reference.points();
    let n = fixed.len();
    let d0 = tm_d0(n);
    let mut search = TmSearch {
        moving: &moving,
        fixed: &fixed,
        d0,
        best: None,
    };

    let d0_search = d0.clamp(4.5, 8.0);
    let mut cutoffs = vec![d0_search, d0_search.min((d0 / 2.0).max(3.0)), d0.max(1.0)];
    cutoffs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let mut windows = vec![n, n / 2, n / 4];
    windows.retain(|&w| w >= 3.min(n));
    windows.dedup();
    let step = (n / 8).max(1);
    let mut starts = Vec::new();
    for &w in &windows {
        let mut start = 0;
        while start + w <= n {
            let seed: Vec<bool> = (0..n).map(|i| i >= start && i < start + w).collect();
            for &c in &cutoffs {
                starts.push(search.refine(seed.clone(), c));
            }
            if w == n {
                break;
            }
            start += step;
        }
    }
    if n <= 15 {
        for i in 0..n {
            for j in i + 1..n {
                let seed: Vec<bool> = (0..n).map(|k| k == i || k == j).collect();
                starts.push(search.fit(&seed));
            }
        }
    }
    // Long chains: polishing the strongest few starts is enough.
    if n > 15 {
        let mut scored: Vec<(f64, Superposition)> = starts
            .into_iter()
            .map(|sup| (tm_sum(search.distances_sq(&sup).into_iter(), d0), sup))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        starts = scored.into_iter().take(4).map(|(_, sup)| sup).collect();
    }
    for sup in starts {
        search.polish(sup);
    }
    let (score, mut superposition) = search.best.expect("scored");
    // Report the all-residue RMSD under the chosen superposition.
    let d2 = moving
        .iter()
        .zip(&fixed)
        .map(|(m, f)| (superposition.apply(m) - f).norm_squared());
    superposition.rmsd = (d2.sum::<f64>() / n as f64).sqrt();
    Ok(TmAlignment {
        score: score.min(1.0),
        superposition,
        d0,
        short_chain: n <= 15,
    })
}

/// Which superposition to measure per-residue deviations under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuperpositionPolicy {
    #[default]
    BestTm,
    BestRmsd,
}

/// Per-residue Cα distances after superposition, in Å.
pub fn per_residue_deviation(
    pred: &StructureModel,
    reference: &StructureModel,
    policy: SuperpositionPolicy,
) -> Result<Vec<f64>, StructureError> {
    let sup = match policy {
        SuperpositionPolicy::BestTm => tm_score(pred, reference)?.superposition,
        SuperpositionPolicy::BestRmsd => kabsch_superpose(pred, reference)?,
    };
    Ok(deviations_under(pred, reference, &sup))
}

fn deviations_under(
    pred: &StructureModel,
    reference: &StructureModel,
    sup: &Superposition,
) -> Vec<f64> {
    pred.points()
        .iter()
        .zip(reference.points())
        .map(|(m, f)| (sup.apply(m) - f).norm())
        .collect()
}

/// Mean pLDDT rescaled to [0, 1].
pub fn aggregate_plddt(per_residue: &[f64]) -> Result<f64, StructureError> {
    if per_residue.is_empty() {
        return Err(StructureError::EmptyInput);
    }
    Ok(per_residue.iter().sum::<f64>() / per_residue.len() as f64 / 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityMetrics {
    pub mean_plddt_01: f64,
    pub tm_score: f64,
    pub ca_rmsd: f64,
    pub per_residue_deviation: Vec<f64>,
    pub per_residue_plddt: Vec<f64>,
}

/// All fidelity metrics of a predicted model (which must carry pLDDT)
/// against the reference backbone.
pub fn fidelity_metrics(
    pred: &StructureModel,
    reference: &StructureModel,
    policy: SuperpositionPolicy,
) -> Result<FidelityMetrics, StructureError> {
    check_pair(pred, reference)?;
    let per_residue_plddt = pred.plddt.clone().ok_or(StructureError::EmptyInput)?;
    let tm = tm_score(pred, reference)?;
    let rmsd = kabsch_superpose(pred, reference)?;
    let sup = match policy {
        SuperpositionPolicy::BestTm => &tm.superposition,
        SuperpositionPolicy::BestRmsd => &rmsd,
    };
    Ok(FidelityMetrics {
        mean_plddt_01: aggregate_plddt(&per_residue_plddt)?,
        tm_score: tm.score,
        ca_rmsd: rmsd.rmsd,
        per_residue_deviation: deviations_under(pred, reference, sup),
        per_residue_plddt,
    })
}
