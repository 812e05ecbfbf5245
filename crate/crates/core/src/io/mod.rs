//! Volume files, job configuration, synthetic problems and report emission.

mod report;
mod synth;
mod volume;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use report::{write_dice_csv, write_json, write_label_summary_csv, write_trials_csv, IntensityRanges, RunReport, SearchSummary, REPORT_SCHEMA_VERSION};
pub use synth::{synth_case, AnalyticVelocity, SynthCase, SynthKind, COMPRESS_AMPLITUDE, ROTATION_RATE, SWIRL_AMPLITUDE, TRANSLATION_LENGTH};
pub use volume::{read_volume, write_volume, Dtype, Volume, VolumeData, MAGIC, VERSION};

use crate::continuation::SearchConfig;
use crate::diffops::{DiffScheme, IncompressibilityMode};
use crate::distance::DistanceKind;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::kkt::{PrecondKind, PrecondVariant, RegConfig};
use crate::optimizer::{ForcingMode, OptimizerConfig};
use crate::scalar::Real;
use crate::transport::{InterpMethod, TransportConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

/// Every user-visible knob of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JobConfig {
    pub alpha: f64,
    /// Near-incompressible penalty weight; `None` disables the penalty.
    pub beta: Option<f64>,
    /// Relative gradient reduction `ε_opt`.
    pub eps_opt: f64,
    pub eps_det: f64,
    pub nt: usize,
    pub max_iter: usize,
    pub distance: DistanceKind,
    pub precond: PrecondVariant,
    pub interp: InterpMethod,
    pub scheme: DiffScheme,
    pub forcing: ForcingMode,
    pub seed: u64,
    pub threads: Option<usize>,
    pub precision: Precision,
    pub out_dir: PathBuf,
}

impl Default for JobConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-2,
            beta: Some(1e-4),
            eps_opt: 5e-2,
            eps_det: 0.1,
            nt: 4,
            max_iter: 50,
            distance: DistanceKind::Ssd,
            precond: PrecondVariant::H0,
            interp: InterpMethod::CubicLagrange,
            scheme: DiffScheme::Fd8,
            forcing: ForcingMode::Superlinear,
            seed: 0,
            threads: None,
            precision: Precision::F64,
            out_dir: PathBuf::from("."),
        }
    }
}

impl JobConfig {
    pub fn validate(&self) -> Result<()> {
        self.reg().validate()?;
        self.optimizer().validate()?;
        self.search().validate()?;
        if self.nt == 0 {
            return Err(Error::Contract("nt must be >= 1".into()));
        }
        Ok(())
    }

    pub fn reg(&self) -> RegConfig {
        let incomp = match self.beta {
            Some(beta) => IncompressibilityMode::NearIncompressible { beta },
            None => IncompressibilityMode::None,
        };
        RegConfig { incomp, ..RegConfig::default() }.with_alpha(self.alpha)
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            eps_opt: self.eps_opt,
            max_iter: self.max_iter,
            forcing: self.forcing,
            precond: PrecondKind::new(self.precond),
            ..OptimizerConfig::default()
        }
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig { eps_det: self.eps_det, beta: self.beta.unwrap_or(SearchConfig::default().beta), ..SearchConfig::default() }
    }

    pub fn transport(&self) -> TransportConfig {
        TransportConfig { interp: self.interp, scheme: self.scheme }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityRange {
    pub min: f64,
    pub max: f64,
}

/// Affine rescale onto `[0, 1]`. A constant image maps to zero.
pub fn normalize_intensity<T: Real>(f: &ScalarField<T>) -> (ScalarField<T>, IntensityRange) {
    let (lo, hi) = (f.min_value(), f.max_value());
    let range = IntensityRange { min: lo.to_f64_lossy(), max: hi.to_f64_lossy() };
    if hi > lo {
        let s = T::one() / (hi - lo);
        (f.map(|x| ((x - lo) * s).max(T::zero()).min(T::one())), range)
    } else {
        (f.map(|_| T::zero()), range)
    }
}
