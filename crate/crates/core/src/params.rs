//! Run parameters for the demographic clustering engine.

use std::fmt;

/// How record-to-cluster similarity is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    /// Against every member record.
    Exact,
    /// Against per-field histograms and frequency tables.
    #[default]
    Histogram,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Histogram => "histogram",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token.to_ascii_lowercase().as_str() {
            "exact" => Some(Mode::Exact),
            "histogram" => Some(Mode::Histogram),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamsError {
    #[error("max_clusters must be >= 1")]
    MaxClusters,
    #[error("max_passes must be >= 1")]
    MaxPasses,
    #[error("accuracy must lie strictly between 0 and 1, got {0}")]
    Accuracy(f64),
    #[error("similarity_threshold must lie in [0, 1], got {0}")]
    Threshold(f64),
    #[error("histogram_bins must be >= 1")]
    Bins,
}

/// Defaults reproduce the retail run: at most 4 clusters, 3 passes,
/// accuracy 0.5, plus a neutral similarity threshold of 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub max_clusters: usize,
    pub max_passes: usize,
    pub accuracy: f64,
    pub similarity_threshold: f64,
    pub histogram_bins: usize,
    pub mode: Mode,
    pub seed: u64,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            max_clusters: 4,
            max_passes: 3,
            accuracy: 0.5,
            similarity_threshold: 0.5,
            histogram_bins: 64,
            mode: Mode::Histogram,
            seed: 0,
        }
    }
}

impl RunParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.max_clusters < 1 {
            return Err(ParamsError::MaxClusters);
        }
        if self.max_passes < 1 {
            return Err(ParamsError::MaxPasses);
        }
        if !(self.accuracy > 0.0 && self.accuracy < 1.0) {
            return Err(ParamsError::Accuracy(self.accuracy));
        }
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return Err(ParamsError::Threshold(self.similarity_threshold));
        }
        if self.histogram_bins < 1 {
            return Err(ParamsError::Bins);
        }
        Ok(())
    }

    pub fn exact(mut self) -> Self {
        self.mode = Mode::Exact;
        self
    }
}
