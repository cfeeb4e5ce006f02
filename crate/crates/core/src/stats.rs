//! Correlation and summary statistics over layer-wise measurements.

use std::collections::BTreeMap;
use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summation;

/// Sample standard deviation (n - 1 denominator).
pub fn sample_std(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Parameter(format!(
            "standard deviation needs at least 2 values, got {}",
            values.len()
        )));
    }
    let mean = summation::mean(values).unwrap();
    let squares: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    Ok((summation::sum(&squares) / (values.len() - 1) as f64).sqrt())
}

/// Standard error of the mean: sample std over sqrt(n).
pub fn sem(values: &[f64]) -> Result<f64> {
    Ok(sample_std(values)? / (values.len() as f64).sqrt())
}

/// Sample Pearson correlation coefficient.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Parameter(format!("series lengths differ ({} vs {})", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::Parameter(format!("correlation needs at least 3 points, got {}", x.len())));
    }
    let mx = summation::mean(x).unwrap();
    let my = summation::mean(y).unwrap();
    let dx: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let dy: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sxy = summation::sum(&dx.iter().zip(&dy).map(|(a, b)| a * b).collect::<Vec<_>>());
    let sxx = summation::sum(&dx.iter().map(|a| a * a).collect::<Vec<_>>());
    let syy = summation::sum(&dy.iter().map(|b| b * b).collect::<Vec<_>>());
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("a series has zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Training {
    Pretrained,
    Finetuned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSize {
    Base,
    Large,
}

/// Per-layer convexity and accuracy of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSeries {
    pub model_id: String,
    pub layers: Vec<u32>,
    pub convexity: Vec<f64>,
    pub oooa: Vec<f64>,
    pub training: Training,
    pub size: ModelSize,
}

impl LayerSeries {
    pub fn new(
        model_id: impl Into<String>,
        layers: Vec<u32>,
        convexity: Vec<f64>,
        oooa: Vec<f64>,
        training: Training,
        size: ModelSize,
    ) -> Result<Self> {
        let model_id = model_id.into();
        if layers.len() != convexity.len() || layers.len() != oooa.len() {
            return Err(Error::Validation(format!(
                "model `{model_id}`: {} layers, {} convexity values, {} accuracy values",
                layers.len(),
                convexity.len(),
                oooa.len()
            )));
        }
        if layers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!("model `{model_id}`: layers not strictly ascending")));
        }
        Ok(Self {
            model_id,
            layers,
            convexity,
            oooa,
            training,
            size,
        })
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Number of leading layers that belong to the first half: `ceil(L / 2)`.
    pub fn first_half_len(&self) -> usize {
        self.len().div_ceil(2)
    }

    /// Position of layer `i` as a fraction of depth in `[0, 1]`.
    pub fn depth_fraction(&self, i: usize) -> f64 {
        if self.len() <= 1 {
            0.0
        } else {
            i as f64 / (self.len() - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    All,
    /// First `ceil(L/2)` layers of each model vs the rest.
    Halves,
    PerModel,
    PretrainedVsFinetuned,
    /// Normalized depth in `[0,1]` split into this many equal bins, pooled across models.
    DepthBins(usize),
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grouping::All => write!(f, "all"),
            Grouping::Halves => write!(f, "halves"),
            Grouping::PerModel => write!(f, "per_model"),
            Grouping::PretrainedVsFinetuned => write!(f, "pretrained_vs_finetuned"),
            Grouping::DepthBins(n) => write!(f, "depth_bins:{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCorrelation {
    pub r: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupedCorrelation {
    pub groups: BTreeMap<String, GroupCorrelation>,
    /// Groups that could not produce a coefficient, with the reason.
    pub skipped: BTreeMap<String, String>,
}

fn group_keys(series: &LayerSeries, i: usize, grouping: Grouping) -> String {
    match grouping {
        Grouping::All => "all".into(),
        Grouping::Halves => {
            if i < series.first_half_len() {
                "first_half".into()
            } else {
                "second_half".into()
            }
        }
        Grouping::PerModel => series.model_id.clone(),
        Grouping::PretrainedVsFinetuned => match series.training {
            Training::Pretrained => "pretrained".into(),
            Training::Finetuned => "finetuned".into(),
        },
        Grouping::DepthBins(bins) => {
            let bins = bins.max(1);
            let bin = ((series.depth_fraction(i) * bins as f64) as usize).min(bins - 1);
            format!("depth_{bin:02}")
        }
    }
}

/// Pools (convexity, accuracy) points within each group and correlates them.
pub fn correlate_grouped(series: &[LayerSeries], grouping: Grouping) -> GroupedCorrelation {
    let mut pooled: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for s in series {
        for i in 0..s.len() {
            let entry = pooled.entry(group_keys(s, i, grouping)).or_default();
            entry.0.push(s.convexity[i]);
            entry.1.push(s.oooa[i]);
        }
    }
    let mut out = GroupedCorrelation::default();
    for (key, (x, y)) in pooled {
        if x.len() < 3 {
            warn!("group `{key}` has {} point(s); skipped", x.len());
            out.skipped.insert(key, format!("{} point(s), need 3", x.len()));
            continue;
        }
        match pearson_r(&x, &y) {
            Ok(r) => {
                out.groups.insert(key, GroupCorrelation { r, n_points: x.len() });
            }
            Err(e) => {
                warn!("group `{key}`: {e}; skipped");
                out.skipped.insert(key, e.to_string());
            }
        }
    }
    out
}
