use serde::{Deserialize, Serialize};

/// How a log marginal likelihood was computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalMethod {
    ExactNig,
    ClosedGprior,
    Laplace,
    LaplacePenalized,
    /// Exact Gaussian evidence for a known-variance linear model.
    ExactGaussian,
}

/// Which model-independent constants are included in the value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantConvention {
    /// A genuine log density of the data.
    Full,
    /// The NIG marginal without `−(n/2)log π + α log 2λ + log Γ(α+n/2) − log Γ(α)`,
    /// which are shared by every model fitted to the same data.
    Kernel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogMarginal {
    pub value: f64,
    pub method: MarginalMethod,
    pub convention: ConstantConvention,
    /// Set when an improper prior was used; only ratios between models are meaningful.
    pub comparison_only: bool,
}

impl LogMarginal {
    pub fn full(value: f64, method: MarginalMethod) -> Self {
        Self { value, method, convention: ConstantConvention::Full, comparison_only: false }
    }

    pub fn kernel(value: f64, method: MarginalMethod) -> Self {
        Self { value, method, convention: ConstantConvention::Kernel, comparison_only: false }
    }
}
