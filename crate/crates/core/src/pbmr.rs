//! Parametric Bayesian mode regression: the posterior of `(β, σ)` under the
//! mode-uniform working likelihood.
//!
//! The joint log-posterior is
//!
//! ```text
//! count(β, σ) - n·log(2σ) + log π(β) + log π(σ)
//! ```
//!
//! The `-n·log(2σ)` term penalises wide windows while the capture count
//! rewards them, so σ is sampled jointly under a bounded uniform prior.

use crate::error::{ModeError, Result};
use crate::linalg::{self, Matrix};
use crate::mcmc::{run_chain, Chain, SamplerConfig};
use crate::model::{capture_count, check_sigma, ols_init, working_loglik_from_count, Dataset, ModeParams};
use crate::scalar::Scalar;
use crate::special::{robust_scales, Rng};

/// Prior on a single regression coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaPrior<T> {
    /// Improper uniform on the real line.
    Flat,
    Normal { mean: T, sd: T },
}

impl<T: Scalar> BetaPrior<T> {
    pub fn normal(mean: T, sd: T) -> Result<Self> {
        if !(sd > T::zero() && sd.is_finite() && mean.is_finite()) {
            return Err(ModeError::domain(format!("normal prior needs finite mean and sd > 0, got ({mean}, {sd})")));
        }
        Ok(BetaPrior::Normal { mean, sd })
    }

    #[inline]
    pub fn log_density(&self, b: T) -> T {
        match *self {
            BetaPrior::Flat => T::zero(),
            BetaPrior::Normal { mean, sd } => {
                let z = (b - mean) / sd;
                -T::of(0.5) * z * z - sd.ln() - T::of(0.5) * (T::TAU()).ln()
            }
        }
    }
}

/// Prior on the window half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SigmaPrior<T> {
    Fixed(T),
    /// Uniform on the open interval `(low, high)`.
    Uniform { low: T, high: T },
}

impl<T: Scalar> SigmaPrior<T> {
    pub fn uniform(low: T, high: T) -> Result<Self> {
        if !(low > T::zero() && low < high && high.is_finite()) {
            return Err(ModeError::BadInterval { low: low.as_f64(), high: high.as_f64() });
        }
        Ok(SigmaPrior::Uniform { low, high })
    }

    pub fn fixed(value: T) -> Result<Self> {
        check_sigma(value)?;
        Ok(SigmaPrior::Fixed(value))
    }

    #[inline]
    pub fn log_density(&self, sigma: T) -> T {
        match *self {
            SigmaPrior::Fixed(v) if sigma == v => T::zero(),
            SigmaPrior::Fixed(_) => T::neg_infinity(),
            SigmaPrior::Uniform { low, high } if sigma > low && sigma < high => -(high - low).ln(),
            SigmaPrior::Uniform { .. } => T::neg_infinity(),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, SigmaPrior::Fixed(_))
    }

    /// Fixed value, or the midpoint of the interval.
    pub fn initial_value(&self) -> T {
        match *self {
            SigmaPrior::Fixed(v) => v,
            SigmaPrior::Uniform { low, high } => (low + high) / T::of(2.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriorSpec<T> {
    pub beta_priors: Vec<BetaPrior<T>>,
    pub sigma_prior: SigmaPrior<T>,
}

impl<T: Scalar> PriorSpec<T> {
    /// Independent flat priors on all `p` coefficients.
    pub fn flat(p: usize, sigma_prior: SigmaPrior<T>) -> Self {
        PriorSpec { beta_priors: vec![BetaPrior::Flat; p], sigma_prior }
    }

    pub fn beta_log_density(&self, beta: &[T]) -> T {
        self.beta_priors.iter().zip(beta).map(|(pr, &b)| pr.log_density(b)).sum()
    }

    fn check(&self, p: usize) -> Result<()> {
        if self.beta_priors.len() != p {
            return Err(ModeError::dim(format!("{} coefficient priors for {p} coefficients", self.beta_priors.len())));
        }
        Ok(())
    }
}

/// Log-posterior of `(β, σ)` up to a constant; `-∞` outside the σ prior's
/// support.
pub fn pbmr_log_posterior<T: Scalar>(params: &ModeParams<T>, data: &Dataset<T>, prior: &PriorSpec<T>) -> Result<T> {
    data.check_beta(&params.beta)?;
    prior.check(data.p())?;
    Ok(log_posterior_unchecked(data, prior, &params.beta, params.sigma))
}

#[inline]
fn log_posterior_unchecked<T: Scalar>(data: &Dataset<T>, prior: &PriorSpec<T>, beta: &[T], sigma: T) -> T {
    let log_prior_sigma = prior.sigma_prior.log_density(sigma);
    if log_prior_sigma == T::neg_infinity() || !(sigma > T::zero()) {
        return T::neg_infinity();
    }
    let count = capture_count(data, beta, sigma);
    working_loglik_from_count(count, data.n(), sigma) + prior.beta_log_density(beta) + log_prior_sigma
}

/// Parameter names of a PBMR chain: coefficients, then `sigma` when it is
/// sampled.
pub fn pbmr_param_names<T: Scalar>(data: &Dataset<T>, prior: &PriorSpec<T>) -> Vec<String> {
    let mut names = data.column_names().to_vec();
    if !prior.sigma_prior.is_fixed() {
        names.push("sigma".into());
    }
    names
}

/// Proposal scales from the least-squares standard errors.
pub fn ols_proposal_scales<T: Scalar>(data: &Dataset<T>) -> Result<Vec<T>> {
    let beta = ols_init(data)?;
    let res = data.residuals(&beta);
    let s = robust_scales(&res)?.sd.max(T::of(1e-8));
    let xtx = data.x().gram();
    let p = data.p();
    let mut scales = Vec::with_capacity(p);
    for j in 0..p {
        let mut e = vec![T::zero(); p];
        e[j] = T::one();
        let col = linalg::solve(&xtx, &e)?;
        scales.push(s * col[j].max(T::zero()).sqrt() * T::of(2.4));
    }
    Ok(scales)
}

/// Sampler settings starting at the OLS solution (and the σ midpoint), with
/// proposal scales from the OLS standard errors.
pub fn default_pbmr_config<T: Scalar>(
    data: &Dataset<T>,
    prior: &PriorSpec<T>,
    n_burnin: usize,
    n_keep: usize,
) -> Result<SamplerConfig<T>> {
    let mut init = ols_init(data)?;
    let mut scales = ols_proposal_scales(data)?;
    if let SigmaPrior::Uniform { low, high } = prior.sigma_prior {
        init.push(prior.sigma_prior.initial_value());
        scales.push((high - low) / T::of(10.0));
    }
    Ok(SamplerConfig::new(n_burnin, n_keep, init, scales))
}

/// Samples the PBMR posterior. The state is `β` followed by `σ` unless σ is
/// fixed.
pub fn fit_pbmr<T: Scalar>(
    data: &Dataset<T>,
    prior: &PriorSpec<T>,
    config: &SamplerConfig<T>,
    rng: &mut Rng,
) -> Result<Chain<T>> {
    prior.check(data.p())?;
    let p = data.p();
    let width = p + usize::from(!prior.sigma_prior.is_fixed());
    if config.init.len() != width {
        return Err(ModeError::dim(format!("initial state has {} entries, expected {width}", config.init.len())));
    }
    if let SigmaPrior::Fixed(sigma) = prior.sigma_prior {
        if capture_count(data, &config.init, sigma) == 0 {
            return Err(ModeError::Initialization(format!(
                "no observation lies within sigma = {sigma} of the initial fit; use a larger sigma"
            )));
        }
        let target = |theta: &[T]| log_posterior_unchecked(data, prior, theta, sigma);
        Ok(run_chain(target, config, rng)?.with_names(pbmr_param_names(data, prior)))
    } else {
        let target = |theta: &[T]| log_posterior_unchecked(data, prior, &theta[..p], theta[p]);
        Ok(run_chain(target, config, rng)?.with_names(pbmr_param_names(data, prior)))
    }
}

/// Stored draw with the highest log target; ties go to the earliest draw.
pub fn map_estimate<T: Scalar>(chain: &Chain<T>) -> Result<Vec<T>> {
    let mut best: Option<(usize, T)> = None;
    for (i, &lp) in chain.log_target.iter().enumerate() {
        if best.is_none_or(|(_, b)| lp > b) {
            best = Some((i, lp));
        }
    }
    best.map(|(i, _)| chain.draws[i].clone()).ok_or(ModeError::Empty("chain"))
}

/// Capture count of the best-count draw's coefficients at a fixed σ.
pub fn best_draw_count<T: Scalar>(chain: &Chain<T>, data: &Dataset<T>, sigma: T) -> usize {
    chain
        .draws
        .iter()
        .map(|d| capture_count(data, &d[..data.p()], sigma))
        .max()
        .unwrap_or(0)
}

/// Information matrix of the asymptotic normal approximation evaluated at a
/// point estimate (a thin wrapper kept next to the sampler for reporting).
pub fn information_at<T: Scalar>(data: &Dataset<T>, beta: &[T], sigma: T) -> Result<Matrix<T>> {
    crate::model::fisher_info_estimate(&ModeParams::new(beta.to_vec(), sigma)?, data)
}
