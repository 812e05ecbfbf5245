//! Registration diagnostics: Dice overlap, label transport, determinant
//! statistics and relative mismatch.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::continuation::det_bounds_ok;
use crate::distance::{dist_value, DistanceKind};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::optimizer::mismatch_ratio;
use crate::scalar::Real;
use crate::transport::{compose_trajectory, solve_state, InterpMethod, InterpPlan, Trajectory, TransportConfig};

/// Integer label per voxel; `0` is background.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVolume {
    grid: Grid,
    labels: Vec<i32>,
}

impl LabelVolume {
    pub fn new(grid: Grid, labels: Vec<i32>) -> Result<Self> {
        if labels.len() != grid.len() {
            return Err(Error::Contract(format!("{} labels for {} voxels", labels.len(), grid.len())));
        }
        if let Some(bad) = labels.iter().find(|&&l| l < 0) {
            return Err(Error::Contract(format!("negative label {bad}")));
        }
        Ok(Self { grid, labels })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> i32) -> Result<Self> {
        let labels = (0..grid.len()).map(|i| f(&grid.point::<f64>(i)[..grid.dim()])).collect();
        Self::new(grid, labels)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    /// Foreground ids present in the volume.
    pub fn ids(&self) -> BTreeSet<i32> {
        self.labels.iter().copied().filter(|&l| l != 0).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiceScore {
    pub id: i32,
    pub score: f64,
    /// Both volumes lack the id; the score is reported as 1.
    pub empty: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiceReport {
    pub per_label: Vec<DiceScore>,
    /// Overlap of the merged foreground (all listed ids).
    pub union: DiceScore,
}

fn overlap(a: impl Iterator<Item = (bool, bool)>, id: i32) -> DiceScore {
    let (mut both, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (x, y) in a {
        both += (x && y) as usize;
        na += x as usize;
        nb += y as usize;
    }
    if na + nb == 0 {
        DiceScore { id, score: 1.0, empty: true }
    } else {
        DiceScore { id, score: 2.0 * both as f64 / (na + nb) as f64, empty: false }
    }
}

/// `2|A∩B| / (|A|+|B|)` per id (default: ids present in either volume).
pub fn dice(a: &LabelVolume, b: &LabelVolume, ids: Option<&[i32]>) -> Result<DiceReport> {
    a.grid.check_same(&b.grid)?;
    let ids: Vec<i32> = match ids {
        Some(ids) => ids.to_vec(),
        None => a.ids().union(&b.ids()).copied().collect(),
    };
    let per_label = ids
        .iter()
        .map(|&id| overlap(a.labels.iter().zip(&b.labels).map(|(&x, &y)| (x == id, y == id)), id))
        .collect();
    let set: BTreeSet<i32> = ids.iter().copied().collect();
    let union = overlap(a.labels.iter().zip(&b.labels).map(|(x, y)| (set.contains(x), set.contains(y))), 0);
    Ok(DiceReport { per_label, union })
}

/// Nearest-neighbour resampling of labels at the full-interval departure map of `v`.
pub fn transport_labels<T: Real>(labels: &LabelVolume, v: &VectorField<T>, transport: TransportConfig) -> Result<LabelVolume> {
    labels.grid.check_same(v.grid())?;
    let map = compose_trajectory(&Trajectory::new(v, transport)?)?;
    let plan = InterpPlan::new(*v.grid(), &map, InterpMethod::Nearest)?;
    let values: Vec<T> = labels.labels.iter().map(|&l| T::from_i32(l).expect("label fits")).collect();
    let moved = plan.apply(&ScalarField::new(*v.grid(), values)?)?;
    let out = moved.values().iter().map(|x| x.to_i32().expect("copied label")).collect();
    LabelVolume::new(labels.grid, out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

/// Statistics of `det f(1)` over all voxels.
pub fn detgrad_stats<T: Real>(v: &VectorField<T>, transport: TransportConfig) -> Result<DetStats> {
    let b = det_bounds_ok(v, 0.5, transport)?;
    Ok(DetStats { min: b.min, mean: b.mean, max: b.max })
}

/// `dist(m(1), m₁) / dist(m₀, m₁)`; `(0, true)` when the inputs already agree.
pub fn relative_mismatch<T: Real>(
    m0: &ScalarField<T>,
    m1: &ScalarField<T>,
    v: &VectorField<T>,
    distance: DistanceKind,
    transport: TransportConfig,
) -> Result<(f64, bool)> {
    let traj = Trajectory::new(v, transport)?;
    let m0 = m0.clone().with_grid(*v.grid())?;
    let deformed = solve_state(&traj, &m0)?;
    let d = dist_value(deformed.last(), m1, distance)?.to_f64_lossy();
    let d0 = dist_value(&m0, m1, distance)?.to_f64_lossy();
    Ok(mismatch_ratio(d, d0))
}

/// Per-label summary across several registrations, one row per id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub label: i32,
    pub count: usize,
    pub mean: f64,
    pub stdev: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Aggregates per-label Dice over reports; `label = 0` carries the union score.
pub fn summarize_dice(reports: &[DiceReport]) -> Vec<LabelSummary> {
    let mut ids: BTreeSet<i32> = BTreeSet::new();
    for r in reports {
        ids.extend(r.per_label.iter().map(|s| s.id));
    }
    let mut rows = Vec::new();
    let mut push = |label: i32, mut xs: Vec<f64>| {
        if xs.is_empty() {
            return;
        }
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        rows.push(LabelSummary {
            label,
            count: xs.len(),
            mean,
            stdev: var.sqrt(),
            min: xs[0],
            q25: quantile(&xs, 0.25),
            median: quantile(&xs, 0.5),
            q75: quantile(&xs, 0.75),
            max: xs[xs.len() - 1],
        });
    };
    push(0, reports.iter().map(|r| r.union.score).collect());
    for id in ids {
        let xs = reports
            .iter()
            .flat_map(|r| r.per_label.iter().filter(|s| s.id == id && !s.empty).map(|s| s.score))
            .collect();
        push(id, xs);
    }
    rows
}
