//! Chi-squared thresholds for the detection test.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Value below which a chi-squared variable with `dof` degrees of freedom
/// falls with the given probability.
pub fn chi_squared_quantile(probability: f64, dof: f64) -> f64 {
    ChiSquared::new(dof).expect("positive degrees of freedom").inverse_cdf(probability)
}
