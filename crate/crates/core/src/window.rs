//! Rules of thumb for the window half-width σ and its uniform prior.

use std::fmt;
use std::str::FromStr;

use crate::error::{ModeError, Result};
use crate::model::{ols_residuals, Dataset};
use crate::scalar::Scalar;
use crate::special::{robust_scales, RobustScales};

/// Silverman-type plug-in constant.
pub const SILVERMAN_CONSTANT: f64 = 1.3643;
/// Kernel factor δ for the uniform kernel.
pub const UNIFORM_KERNEL_DELTA: f64 = 1.3510;
/// IQR of the standard normal.
pub const NORMAL_IQR: f64 = 1.349;
/// Consistency factor turning the MAD into a normal standard deviation.
pub const MAD_TO_SD: f64 = 1.4826;

fn check_scale<T: Scalar>(sd_hat: T) -> Result<()> {
    if sd_hat > T::zero() && sd_hat.is_finite() {
        Ok(())
    } else {
        Err(ModeError::domain(format!("scale estimate must be positive, got {sd_hat}")))
    }
}

/// `3·sd`: about 99.7% of a symmetric bell-shaped sample.
pub fn empirical_rule<T: Scalar>(sd_hat: T) -> Result<T> {
    check_scale(sd_hat)?;
    Ok(T::of(3.0) * sd_hat)
}

/// `4·sd`: at least 93.75% of any sample, by Chebyshev's inequality.
pub fn chebyshev_rule<T: Scalar>(sd_hat: T) -> Result<T> {
    check_scale(sd_hat)?;
    Ok(T::of(4.0) * sd_hat)
}

/// `1.3643·δ·n^(-0.2)·min(sd, IQR/1.349)` with δ = 1.3510. When `mad` is
/// given the robust scale becomes `1.4826·MAD` instead of `IQR/1.349`.
pub fn silverman_rule<T: Scalar>(n: usize, sd_hat: T, iqr: Option<T>, mad: Option<T>) -> Result<T> {
    if n < 2 {
        return Err(ModeError::domain(format!("silverman rule needs n >= 2, got {n}")));
    }
    check_scale(sd_hat)?;
    let robust = match (mad, iqr) {
        (Some(m), _) => T::of(MAD_TO_SD) * m,
        (None, Some(q)) => q / T::of(NORMAL_IQR),
        (None, None) => {
            return Err(ModeError::domain("silverman rule needs an IQR or a MAD"));
        }
    };
    if robust < T::zero() {
        return Err(ModeError::domain(format!("robust scale must be nonnegative, got {robust}")));
    }
    let factor = T::of(SILVERMAN_CONSTANT * UNIFORM_KERNEL_DELTA) * T::of_usize(n).powf(T::of(-0.2));
    Ok(factor * sd_hat.min(robust))
}

/// Classical mode-regression bandwidth `k·mad·n^(-0.143)`, with `mad` the
/// median absolute deviation of the OLS residuals.
pub fn kemp_bandwidth<T: Scalar>(k: T, mad_of_ols_residuals: T, n: usize) -> Result<T> {
    if n < 2 {
        return Err(ModeError::domain(format!("bandwidth rule needs n >= 2, got {n}")));
    }
    if !(k > T::zero()) || mad_of_ols_residuals < T::zero() {
        return Err(ModeError::domain("bandwidth rule needs k > 0 and mad >= 0"));
    }
    Ok(k * mad_of_ols_residuals * T::of_usize(n).powf(T::of(-0.143)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowRule {
    Empirical,
    Chebyshev,
    Silverman,
}

impl WindowRule {
    pub fn apply<T: Scalar>(self, n: usize, scales: &RobustScales<T>) -> Result<T> {
        match self {
            WindowRule::Empirical => empirical_rule(scales.sd),
            WindowRule::Chebyshev => chebyshev_rule(scales.sd),
            WindowRule::Silverman => silverman_rule(n, scales.sd, Some(scales.iqr), None),
        }
    }
}

impl FromStr for WindowRule {
    type Err = ModeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "empirical" => Ok(WindowRule::Empirical),
            "chebyshev" => Ok(WindowRule::Chebyshev),
            "silverman" => Ok(WindowRule::Silverman),
            other => Err(ModeError::Parse(format!(
                "unknown window rule `{other}` (expected empirical, chebyshev or silverman)"
            ))),
        }
    }
}

impl fmt::Display for WindowRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindowRule::Empirical => "empirical",
            WindowRule::Chebyshev => "chebyshev",
            WindowRule::Silverman => "silverman",
        })
    }
}

/// Which sample the rules measure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScaleSource {
    /// Residuals of the least-squares fit.
    #[default]
    OlsResiduals,
    /// The raw response.
    Response,
}

/// Robust scales of the OLS residuals (or of `y`).
pub fn data_scales<T: Scalar>(data: &Dataset<T>, source: ScaleSource) -> Result<RobustScales<T>> {
    match source {
        ScaleSource::OlsResiduals => robust_scales(&ols_residuals(data)?),
        ScaleSource::Response => robust_scales(data.y()),
    }
}

/// Window width from a single rule applied to the data.
pub fn window_from_rule<T: Scalar>(data: &Dataset<T>, rule: WindowRule, source: ScaleSource) -> Result<T> {
    rule.apply(data.n(), &data_scales(data, source)?)
}

/// `(w1, w2)` for a Uniform(w1, w2) prior on σ from precomputed scales.
pub fn sigma_prior_interval_from_scales<T: Scalar>(
    n: usize,
    scales: &RobustScales<T>,
    rule_low: WindowRule,
    rule_high: WindowRule,
) -> Result<(T, T)> {
    let w1 = rule_low.apply(n, scales)?;
    let w2 = rule_high.apply(n, scales)?;
    if !(w1 > T::zero() && w1 < w2) {
        return Err(ModeError::BadInterval { low: w1.as_f64(), high: w2.as_f64() });
    }
    Ok((w1, w2))
}

/// `(w1, w2)` from OLS-residual scales. The customary pairing is
/// (silverman, chebyshev).
pub fn sigma_prior_interval<T: Scalar>(
    data: &Dataset<T>,
    rule_low: WindowRule,
    rule_high: WindowRule,
) -> Result<(T, T)> {
    sigma_prior_interval_with_source(data, rule_low, rule_high, ScaleSource::OlsResiduals)
}

pub fn sigma_prior_interval_with_source<T: Scalar>(
    data: &Dataset<T>,
    rule_low: WindowRule,
    rule_high: WindowRule,
    source: ScaleSource,
) -> Result<(T, T)> {
    sigma_prior_interval_from_scales(data.n(), &data_scales(data, source)?, rule_low, rule_high)
}
