//! Correlations, OLS with year fixed effects, kernel densities and group trends.

mod corr;
mod kde;
mod ols;
mod trend;

pub use corr::{average_ranks, correlation_matrix, pearson, spearman, CorrelationMatrix};
pub use kde::{kde_auto_grid, kde_density, linspace, quantile, silverman_bandwidth, trapezoid, Bandwidth, KdeCurve};
pub use ols::{design_matrix, ols_fit, Coefficient, Design, RegressionResult};
pub use trend::{group_trend, grouped_pearson, median, welch_t_test, GroupBy, GroupStat, WelchTest};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {found}")]
    TooFewObservations { needed: usize, found: usize },
    #[error("{n} observations do not identify {params} parameters")]
    InsufficientObservations { n: usize, params: usize },
    #[error("design matrix is rank deficient in columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("empty input")]
    EmptyInput,
    #[error("input columns differ in length")]
    LengthMismatch,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("both samples have zero variance")]
    ZeroVariance,
}
