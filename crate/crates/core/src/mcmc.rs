//! Random-walk Metropolis with burn-in scale adaptation, plus the Geweke and
//! effective-sample-size diagnostics.
//!
//! The default scheme updates one coordinate per sub-step with a Gaussian
//! step and steers each coordinate's acceptance rate toward 0.44 during
//! burn-in by multiplying or dividing its scale by 1.1 every
//! `adapt_interval` attempts. Scales are frozen once burn-in ends, so the
//! kept segment is a time-homogeneous Markov chain.

use crate::error::{ModeError, Result};
use crate::scalar::Scalar;
use crate::special::Rng;

/// Minimum number of kept draws for the diagnostics.
pub const MIN_DIAGNOSTIC_DRAWS: usize = 100;

const ADAPT_FACTOR: f64 = 1.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateScheme {
    /// One coordinate per sub-step (target acceptance 0.44).
    Componentwise,
    /// Whole-vector proposals (target acceptance 0.234).
    Block,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig<T> {
    pub n_burnin: usize,
    pub n_keep: usize,
    pub init: Vec<T>,
    pub initial_scales: Vec<T>,
    pub target_acceptance: T,
    pub adapt_interval: usize,
    pub scheme: UpdateScheme,
}

impl<T: Scalar> SamplerConfig<T> {
    pub fn new(n_burnin: usize, n_keep: usize, init: Vec<T>, initial_scales: Vec<T>) -> Self {
        SamplerConfig {
            n_burnin,
            n_keep,
            init,
            initial_scales,
            target_acceptance: T::of(0.44),
            adapt_interval: 100,
            scheme: UpdateScheme::Componentwise,
        }
    }

    /// Switches to whole-vector proposals with target acceptance 0.234.
    pub fn block(mut self) -> Self {
        self.scheme = UpdateScheme::Block;
        self.target_acceptance = T::of(0.234);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_keep == 0 {
            return Err(ModeError::Config("n_keep must be positive".into()));
        }
        if self.init.is_empty() || self.init.len() != self.initial_scales.len() {
            return Err(ModeError::dim(format!(
                "init has {} entries, initial_scales {}",
                self.init.len(),
                self.initial_scales.len()
            )));
        }
        if self.initial_scales.iter().any(|s| !(*s > T::zero() && s.is_finite())) {
            return Err(ModeError::Config("proposal scales must be positive and finite".into()));
        }
        if !(self.target_acceptance > T::zero() && self.target_acceptance < T::one()) {
            return Err(ModeError::Config("target acceptance must lie in (0, 1)".into()));
        }
        if self.adapt_interval == 0 {
            return Err(ModeError::Config("adapt_interval must be positive".into()));
        }
        Ok(())
    }
}

/// Kept posterior draws with their log-target values.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain<T> {
    pub names: Vec<String>,
    pub draws: Vec<Vec<T>>,
    pub log_target: Vec<T>,
    /// Per-update acceptance fractions over the kept segment.
    pub acceptance_rates: Vec<T>,
    pub seed: u64,
    pub n_burnin: usize,
    pub n_keep: usize,
    pub proposal_scales: Vec<T>,
}

impl<T: Scalar> Chain<T> {
    /// Chain from externally supplied draws (e.g. a CSV dump).
    pub fn from_draws(names: Vec<String>, draws: Vec<Vec<T>>, log_target: Vec<T>) -> Result<Self> {
        if draws.len() != log_target.len() {
            return Err(ModeError::dim(format!("{} draws, {} log-target values", draws.len(), log_target.len())));
        }
        if draws.iter().any(|d| d.len() != names.len()) {
            return Err(ModeError::dim("draw width differs from parameter names"));
        }
        let n_keep = draws.len();
        Ok(Chain {
            names,
            draws,
            log_target,
            acceptance_rates: Vec::new(),
            seed: 0,
            n_burnin: 0,
            n_keep,
            proposal_scales: Vec::new(),
        })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        debug_assert_eq!(names.len(), self.dim());
        self.names = names;
        self
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.draws.iter().map(|d| d[j]).collect()
    }
}

/// Coordinate-wise Metropolis kernel with per-coordinate adaptive scales.
/// Shared by the generic sampler and the β step of the mixture sampler.
#[derive(Clone, Debug)]
pub(crate) struct ComponentwiseMh<T> {
    pub(crate) scales: Vec<T>,
    target: T,
    interval: usize,
    window_accepted: Vec<usize>,
    window_tried: Vec<usize>,
    accepted: Vec<usize>,
    tried: Vec<usize>,
}

impl<T: Scalar> ComponentwiseMh<T> {
    pub(crate) fn new(scales: Vec<T>, target: T, interval: usize) -> Self {
        let d = scales.len();
        ComponentwiseMh {
            scales,
            target,
            interval,
            window_accepted: vec![0; d],
            window_tried: vec![0; d],
            accepted: vec![0; d],
            tried: vec![0; d],
        }
    }

    /// One Metropolis sub-step on coordinate `j`. Non-finite proposals are
    /// rejected.
    pub(crate) fn step<F: Fn(&[T]) -> T>(
        &mut self,
        j: usize,
        x: &mut [T],
        lp: &mut T,
        log_target: &F,
        rng: &mut Rng,
        adapt: bool,
    ) -> bool {
        let z: T = rng.standard_normal();
        let u: T = rng.uniform();
        let old = x[j];
        x[j] = old + self.scales[j] * z;
        let proposed = log_target(x);
        let accept = proposed.is_finite() && u.ln() < proposed - *lp;
        if accept {
            *lp = proposed;
        } else {
            x[j] = old;
        }
        self.record(j, accept, adapt);
        accept
    }

    fn record(&mut self, j: usize, accept: bool, adapt: bool) {
        self.tried[j] += 1;
        self.accepted[j] += usize::from(accept);
        if !adapt {
            return;
        }
        self.window_tried[j] += 1;
        self.window_accepted[j] += usize::from(accept);
        if self.window_tried[j] == self.interval {
            let rate = T::of_usize(self.window_accepted[j]) / T::of_usize(self.interval);
            let f = T::of(ADAPT_FACTOR);
            if rate > self.target {
                self.scales[j] *= f;
            } else {
                self.scales[j] /= f;
            }
            self.window_tried[j] = 0;
            self.window_accepted[j] = 0;
        }
    }

    pub(crate) fn reset_counts(&mut self) {
        self.accepted.iter_mut().for_each(|c| *c = 0);
        self.tried.iter_mut().for_each(|c| *c = 0);
        self.window_accepted.iter_mut().for_each(|c| *c = 0);
        self.window_tried.iter_mut().for_each(|c| *c = 0);
    }

    pub(crate) fn acceptance_rates(&self) -> Vec<T> {
        self.accepted
            .iter()
            .zip(&self.tried)
            .map(|(&a, &t)| if t == 0 { T::zero() } else { T::of_usize(a) / T::of_usize(t) })
            .collect()
    }
}

/// Runs the adaptive random-walk Metropolis sampler and returns the kept
/// draws (one per sweep over all coordinates).
pub fn run_chain<T, F>(log_target: F, config: &SamplerConfig<T>, rng: &mut Rng) -> Result<Chain<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> T,
{
    config.validate()?;
    let mut x = config.init.clone();
    let mut lp = log_target(&x);
    if !lp.is_finite() {
        return Err(ModeError::Initialization(format!(
            "log target is {lp} at the initial point {:?}",
            x.iter().map(|v| v.as_f64()).collect::<Vec<_>>()
        )));
    }
    let d = x.len();
    let mut kernel = ComponentwiseMh::new(config.initial_scales.clone(), config.target_acceptance, config.adapt_interval);
    let mut draws = Vec::with_capacity(config.n_keep);
    let mut lps = Vec::with_capacity(config.n_keep);
    for iter in 0..config.n_burnin + config.n_keep {
        let adapt = iter < config.n_burnin;
        if iter == config.n_burnin {
            kernel.reset_counts();
        }
        match config.scheme {
            UpdateScheme::Componentwise => {
                for j in 0..d {
                    kernel.step(j, &mut x, &mut lp, &log_target, rng, adapt);
                }
            }
            UpdateScheme::Block => block_step(&mut kernel, &mut x, &mut lp, &log_target, rng, adapt),
        }
        if !adapt {
            draws.push(x.clone());
            lps.push(lp);
        }
    }
    Ok(Chain {
        names: (0..d).map(|j| format!("theta{j}")).collect(),
        draws,
        log_target: lps,
        acceptance_rates: kernel.acceptance_rates(),
        seed: rng.seed(),
        n_burnin: config.n_burnin,
        n_keep: config.n_keep,
        proposal_scales: kernel.scales,
    })
}

fn block_step<T: Scalar, F: Fn(&[T]) -> T>(
    kernel: &mut ComponentwiseMh<T>,
    x: &mut [T],
    lp: &mut T,
    log_target: &F,
    rng: &mut Rng,
    adapt: bool,
) {
    let old = x.to_vec();
    for (xj, &s) in x.iter_mut().zip(&kernel.scales) {
        let z: T = rng.standard_normal();
        *xj += s * z;
    }
    let u: T = rng.uniform();
    let proposed = log_target(x);
    let accept = proposed.is_finite() && u.ln() < proposed - *lp;
    if accept {
        *lp = proposed;
    } else {
        x.copy_from_slice(&old);
    }
    // every coordinate shares the block's outcome; adapting them in lockstep
    // keeps the proposal shape fixed
    for j in 0..x.len() {
        kernel.record(j, accept, adapt);
    }
}

fn autocovariances<T: Scalar>(x: &[T], mean: T, max_lag: usize) -> impl Iterator<Item = T> + '_ {
    let n = T::of_usize(x.len());
    (0..max_lag.min(x.len())).map(move |k| {
        x.iter().zip(&x[k..]).map(|(&a, &b)| (a - mean) * (b - mean)).sum::<T>() / n
    })
}

/// Effective sample size of a series by Geyer's initial monotone positive
/// sequence. Zero-variance series return their length; the result is capped
/// at the length.
pub fn ess_of_series<T: Scalar>(x: &[T]) -> T {
    let n = x.len();
    if n < 2 {
        return T::of_usize(n);
    }
    let mean = x.iter().copied().sum::<T>() / T::of_usize(n);
    let mut acov = autocovariances(x, mean, n);
    let gamma0 = acov.next().unwrap_or(T::zero());
    if !(gamma0 > T::zero()) {
        return T::of_usize(n);
    }
    // pairs (ρ_{2m}, ρ_{2m+1}); the first pair starts at ρ₀ = 1
    let mut sum_pairs = T::zero();
    let mut prev_pair = T::infinity();
    let mut even = T::one();
    loop {
        let odd = match acov.next() {
            Some(g) => g / gamma0,
            None => break,
        };
        let pair = (even + odd).min(prev_pair);
        if pair <= T::zero() {
            break;
        }
        sum_pairs += pair;
        prev_pair = pair;
        even = match acov.next() {
            Some(g) => g / gamma0,
            None => break,
        };
    }
    let tau = (T::of(2.0) * sum_pairs - T::one()).max(T::one() / T::of_usize(n));
    (T::of_usize(n) / tau).min(T::of_usize(n))
}

/// Geweke z-score comparing the first 10% with the last 50% of a series,
/// with spectral variance at zero taken from the effective sample size.
pub fn geweke_of_series<T: Scalar>(x: &[T]) -> T {
    let n = x.len();
    let a = &x[..n / 10];
    let b = &x[n - n / 2..];
    let stats = |s: &[T]| {
        let m = s.iter().copied().sum::<T>() / T::of_usize(s.len());
        let var = s.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::of_usize(s.len());
        (m, var / ess_of_series(s))
    };
    let (ma, va) = stats(a);
    let (mb, vb) = stats(b);
    let diff = ma - mb;
    let se = (va + vb).sqrt();
    if se > T::zero() {
        diff / se
    } else if diff == T::zero() {
        T::zero()
    } else {
        diff.signum() * T::infinity()
    }
}

fn diagnostic_column<T: Scalar>(chain: &Chain<T>, component: usize) -> Result<Vec<T>> {
    if component >= chain.dim() {
        return Err(ModeError::dim(format!("component {component} of a {}-dimensional chain", chain.dim())));
    }
    if chain.len() < MIN_DIAGNOSTIC_DRAWS {
        return Err(ModeError::ChainTooShort { len: chain.len(), min: MIN_DIAGNOSTIC_DRAWS });
    }
    Ok(chain.column(component))
}

/// Geweke convergence z-score; `|z| > 3` is reported as non-convergence.
pub fn geweke_z<T: Scalar>(chain: &Chain<T>, component: usize) -> Result<T> {
    Ok(geweke_of_series(&diagnostic_column(chain, component)?))
}

pub fn effective_sample_size<T: Scalar>(chain: &Chain<T>, component: usize) -> Result<T> {
    Ok(ess_of_series(&diagnostic_column(chain, component)?))
}
