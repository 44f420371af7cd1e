//! Nonparametric Bayesian mode regression: the error density is a truncated
//! Dirichlet-process scale mixture of symmetric uniforms, sampled by a
//! blocked Gibbs sweep with Metropolis steps for β and the concentration M.
//!
//! One sweep runs allocation, sticks, atoms, then one Metropolis sub-step per
//! coefficient and one for `log M`. The β target is the log prior when every
//! residual lies strictly inside its allocated window and `-∞` otherwise,
//! which keeps the allocations feasible for the next sweep.

use crate::error::{ModeError, Result};
use crate::mcmc::{Chain, ComponentwiseMh, SamplerConfig};
use crate::model::{ols_residuals, Dataset};
use crate::pbmr::BetaPrior;
use crate::scalar::Scalar;
use crate::special::{sample_beta, Rng};
use crate::window::{window_from_rule, ScaleSource, WindowRule};

pub const DEFAULT_TRUNCATION: usize = 30;

/// Base endpoint d: the chebyshev rule on OLS residuals, widened to 1.05
/// times the largest absolute OLS residual when that is larger so the
/// least-squares start is admissible.
pub fn default_base_endpoint<T: Scalar>(data: &Dataset<T>) -> Result<T> {
    let d = window_from_rule(data, WindowRule::Chebyshev, ScaleSource::OlsResiduals)?;
    let widest = ols_residuals(data)?.into_iter().fold(T::zero(), |m, r| m.max(r.abs()));
    Ok(d.max(T::of(1.05) * widest))
}

/// Hyperparameters of the mixture model.
#[derive(Clone, Debug, PartialEq)]
pub struct NbmrHyper<T> {
    /// Truncation level K.
    pub truncation: usize,
    /// Uniform prior interval for the concentration M.
    pub m_prior: (T, T),
    /// Upper endpoint of the uniform base distribution.
    pub d: T,
    pub beta_priors: Vec<BetaPrior<T>>,
}

impl<T: Scalar> NbmrHyper<T> {
    /// K = 30, M ~ U(0.1, 10) and Normal(0, 100²) coefficient priors.
    pub fn new(p: usize, d: T) -> Self {
        NbmrHyper {
            truncation: DEFAULT_TRUNCATION,
            m_prior: (T::of(0.1), T::of(10.0)),
            d,
            beta_priors: vec![BetaPrior::Normal { mean: T::zero(), sd: T::of(100.0) }; p],
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        if self.truncation == 0 {
            return Err(ModeError::Config("truncation level must be at least 1".into()));
        }
        let (lo, hi) = self.m_prior;
        if !(lo > T::zero() && lo < hi && hi.is_finite()) {
            return Err(ModeError::BadInterval { low: lo.as_f64(), high: hi.as_f64() });
        }
        if !(self.d > T::zero() && self.d.is_finite()) {
            return Err(ModeError::domain(format!("base endpoint d must be positive, got {}", self.d)));
        }
        if self.beta_priors.len() != p {
            return Err(ModeError::dim(format!("{} coefficient priors for {p} coefficients", self.beta_priors.len())));
        }
        Ok(())
    }
}

/// Truncated stick-breaking state.
#[derive(Clone, Debug, PartialEq)]
pub struct DpState<T> {
    pub sticks: Vec<T>,
    pub weights: Vec<T>,
    pub atoms: Vec<T>,
    pub alloc: Vec<usize>,
    pub m: T,
    pub d: T,
}

impl<T: Scalar> DpState<T> {
    pub fn new(sticks: Vec<T>, atoms: Vec<T>, alloc: Vec<usize>, m: T, d: T) -> Result<Self> {
        if sticks.len() != atoms.len() || sticks.is_empty() {
            return Err(ModeError::dim(format!("{} sticks, {} atoms", sticks.len(), atoms.len())));
        }
        if alloc.iter().any(|&z| z >= atoms.len()) {
            return Err(ModeError::dim("allocation index beyond the truncation level"));
        }
        if atoms.iter().any(|&s| !(s > T::zero() && s <= d)) {
            return Err(ModeError::domain("atoms must lie in (0, d]"));
        }
        let weights = stick_weights(&sticks)?;
        Ok(DpState { sticks, weights, atoms, alloc, m, d })
    }

    pub fn truncation(&self) -> usize {
        self.atoms.len()
    }

    pub fn cluster_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.truncation()];
        for &z in &self.alloc {
            counts[z] += 1;
        }
        counts
    }

    pub fn occupied_clusters(&self) -> usize {
        self.cluster_counts().iter().filter(|&&c| c > 0).count()
    }

    /// Mixture mean of the atoms, `Σ w_k σ_k`.
    pub fn sigma_bar(&self) -> T {
        self.weights.iter().zip(&self.atoms).map(|(&w, &s)| w * s).sum()
    }
}

/// `w_k = v_k ∏_{l<k} (1 - v_l)`; requires `v_K = 1`.
pub fn stick_weights<T: Scalar>(sticks: &[T]) -> Result<Vec<T>> {
    match sticks.last() {
        Some(&v) if v == T::one() => {}
        Some(&v) => return Err(ModeError::domain(format!("last stick must be 1, got {v}"))),
        None => return Err(ModeError::Empty("stick vector")),
    }
    if sticks.iter().any(|&v| !(v >= T::zero() && v <= T::one())) {
        return Err(ModeError::domain("sticks must lie in [0, 1]"));
    }
    let k = sticks.len();
    let mut weights = Vec::with_capacity(k);
    let mut remaining = T::one();
    let mut total = T::zero();
    for &v in &sticks[..k - 1] {
        // capping at the unallocated mass keeps the running total at most 1
        let w = (v * remaining).min(T::one() - total);
        remaining *= T::one() - v;
        total += w;
        weights.push(w);
    }
    // the leftover mass makes a left-to-right sum come out at exactly one
    weights.push(T::one() - total);
    Ok(weights)
}

/// Density of the truncated mixture `Σ w_k U(-σ_k, σ_k)` at `u`.
pub fn mixture_density<T: Scalar>(u: T, state: &DpState<T>) -> T {
    state
        .weights
        .iter()
        .zip(&state.atoms)
        .filter(|(_, &s)| u.abs() < s)
        .map(|(&w, &s)| w / (T::of(2.0) * s))
        .sum()
}

/// Draws every allocation from masses `∝ w_k/(2σ_k)·I(|r_i| < σ_k)`.
pub fn gibbs_alloc<T: Scalar>(state: &mut DpState<T>, residuals: &[T], rng: &mut Rng) -> Result<()> {
    let k = state.truncation();
    let mut mass = vec![T::zero(); k];
    state.alloc.resize(residuals.len(), 0);
    for (i, &r) in residuals.iter().enumerate() {
        let a = r.abs();
        let mut total = T::zero();
        for j in 0..k {
            let s = state.atoms[j];
            let m = if a < s { state.weights[j] / s } else { T::zero() };
            mass[j] = m;
            total += m;
        }
        if !(total > T::zero()) {
            return Err(ModeError::Invariant(format!("observation {i} (residual {r}) fits no mixture component")));
        }
        let target = rng.uniform::<T>() * total;
        let mut acc = T::zero();
        let mut chosen = None;
        for (j, &m) in mass.iter().enumerate() {
            if m > T::zero() {
                chosen = Some(j);
                acc += m;
                if target < acc {
                    break;
                }
            }
        }
        // the last feasible component absorbs any rounding shortfall
        state.alloc[i] = chosen.expect("positive total implies a feasible component");
    }
    Ok(())
}

/// `v_k ~ Beta(1 + n_k, M + Σ_{l>k} n_l)` for `k < K`, `v_K = 1`.
pub fn gibbs_sticks<T: Scalar>(state: &mut DpState<T>, rng: &mut Rng) -> Result<()> {
    let counts = state.cluster_counts();
    let k = state.truncation();
    let mut downstream: usize = counts.iter().sum();
    // keep 1 - v_k representable so the concentration update sees a finite
    // log density
    let cap = T::one() - T::epsilon();
    for j in 0..k - 1 {
        downstream -= counts[j];
        let a = T::one() + T::of_usize(counts[j]);
        let b = state.m + T::of_usize(downstream);
        state.sticks[j] = sample_beta(rng, a, b)?.min(cap);
    }
    state.sticks[k - 1] = T::one();
    state.weights = stick_weights(&state.sticks)?;
    Ok(())
}

/// Inverse-CDF draw from the density `∝ σ^{-n}` on `(a, d]`.
pub fn sample_atom<T: Scalar>(a: T, d: T, n: usize, u: T) -> T {
    let ratio = (d / a).ln();
    let sigma = if n == 1 {
        a * (u * ratio).exp()
    } else {
        let e = T::one() - T::of_usize(n);
        // 1 - (d/a)^{1-n}, accurate when d/a is close to 1
        let span = -(e * ratio).exp_m1();
        a * ((-u * span).ln_1p() / e).exp()
    };
    sigma.max(a + a.abs() * T::epsilon()).min(d)
}

/// Redraws every atom: truncated power law above the cluster's largest
/// residual when occupied, the Uniform(0, d) base draw when empty.
pub fn gibbs_atoms<T: Scalar>(state: &mut DpState<T>, residuals: &[T], rng: &mut Rng) -> Result<()> {
    let k = state.truncation();
    let mut max_abs = vec![T::zero(); k];
    let mut worst = vec![T::zero(); k];
    let mut counts = vec![0usize; k];
    for (&z, &r) in state.alloc.iter().zip(residuals) {
        counts[z] += 1;
        if r.abs() >= max_abs[z] {
            max_abs[z] = r.abs();
            worst[z] = r;
        }
    }
    let d = state.d;
    for j in 0..k {
        let u: T = rng.uniform();
        if counts[j] == 0 {
            state.atoms[j] = d * u;
            continue;
        }
        let a = max_abs[j];
        if a >= d {
            return Err(ModeError::EndpointTooSmall { endpoint: d.as_f64(), residual: worst[j].as_f64() });
        }
        state.atoms[j] = if a > T::zero() { sample_atom(a, d, counts[j], u) } else { d * u };
    }
    Ok(())
}

/// Log density of `log M` given the sticks under a uniform prior on M,
/// including the Jacobian of the log transform.
fn log_m_target<T: Scalar>(log_m: T, sticks: &[T], prior: (T, T)) -> T {
    let m = log_m.exp();
    if !(m > prior.0 && m < prior.1) {
        return T::neg_infinity();
    }
    let k = sticks.len() - 1;
    let s: T = sticks[..k].iter().map(|&v| (-v).ln_1p()).sum();
    T::of_usize(k) * m.ln() + (m - T::one()) * s + log_m
}

/// Samples and per-sweep summaries of a mixture fit.
#[derive(Clone, Debug)]
pub struct NbmrFit<T> {
    /// Columns: coefficients, `sigma_bar`, `occupied_clusters`.
    pub chain: Chain<T>,
    /// True when the last component was ever occupied, suggesting a larger
    /// truncation level.
    pub hit_truncation: bool,
    pub final_state: DpState<T>,
    pub m_draws: Vec<T>,
}

fn beta_target<T: Scalar>(data: &Dataset<T>, priors: &[BetaPrior<T>], state: &DpState<T>, beta: &[T]) -> T {
    for i in 0..data.n() {
        if !(data.residual(i, beta).abs() < state.atoms[state.alloc[i]]) {
            return T::neg_infinity();
        }
    }
    priors.iter().zip(beta).map(|(p, &b)| p.log_density(b)).sum()
}

fn log_joint<T: Scalar>(data: &Dataset<T>, priors: &[BetaPrior<T>], state: &DpState<T>, beta: &[T]) -> T {
    let lik: T = state.alloc.iter().map(|&z| -(T::of(2.0) * state.atoms[z]).ln()).sum();
    lik + beta_target(data, priors, state, beta)
}

/// Runs the blocked Gibbs sampler. `config.init` and
/// `config.initial_scales` cover the coefficients only; the log-M step
/// starts at scale 0.5 and adapts alongside them during burn-in.
pub fn fit_nbmr<T: Scalar>(
    data: &Dataset<T>,
    hyper: &NbmrHyper<T>,
    config: &SamplerConfig<T>,
    rng: &mut Rng,
) -> Result<NbmrFit<T>> {
    let p = data.p();
    hyper.validate(p)?;
    config.validate()?;
    if config.init.len() != p {
        return Err(ModeError::dim(format!("initial state has {} entries, expected {p}", config.init.len())));
    }
    let mut beta = config.init.clone();
    let residuals = data.residuals(&beta);
    if let Some(worst) = residuals.iter().copied().find(|r| r.abs() >= hyper.d) {
        return Err(ModeError::Initialization(
            ModeError::EndpointTooSmall { endpoint: hyper.d.as_f64(), residual: worst.as_f64() }.to_string(),
        ));
    }
    let k = hyper.truncation;
    let (m_lo, m_hi) = hyper.m_prior;
    // everything starts in the first component, whose atom is the endpoint
    let mut sticks = vec![T::of(0.5); k];
    sticks[k - 1] = T::one();
    let mut atoms = vec![hyper.d; k];
    for a in atoms.iter_mut().skip(1) {
        *a = hyper.d * rng.uniform::<T>();
    }
    let m0 = (m_lo * m_hi).sqrt();
    let mut state = DpState::new(sticks, atoms, vec![0; data.n()], m0, hyper.d)?;

    let mut beta_kernel = ComponentwiseMh::new(config.initial_scales.clone(), config.target_acceptance, config.adapt_interval);
    let mut m_kernel = ComponentwiseMh::new(vec![T::of(0.5)], config.target_acceptance, config.adapt_interval);

    let mut names = data.column_names().to_vec();
    names.push("sigma_bar".into());
    names.push("occupied_clusters".into());
    let mut draws = Vec::with_capacity(config.n_keep);
    let mut lps = Vec::with_capacity(config.n_keep);
    let mut m_draws = Vec::with_capacity(config.n_keep);
    let mut hit_truncation = false;

    for iter in 0..config.n_burnin + config.n_keep {
        let adapt = iter < config.n_burnin;
        if iter == config.n_burnin {
            beta_kernel.reset_counts();
            m_kernel.reset_counts();
        }
        let res = data.residuals(&beta);
        gibbs_alloc(&mut state, &res, rng)?;
        gibbs_sticks(&mut state, rng)?;
        gibbs_atoms(&mut state, &res, rng)?;

        let target = |b: &[T]| beta_target(data, &hyper.beta_priors, &state, b);
        let mut lp = target(&beta);
        if !lp.is_finite() {
            return Err(ModeError::Invariant("allocations infeasible after the atom update".into()));
        }
        for j in 0..p {
            beta_kernel.step(j, &mut beta, &mut lp, &target, rng, adapt);
        }

        let sticks = &state.sticks;
        let m_target = |x: &[T]| log_m_target(x[0], sticks, hyper.m_prior);
        let mut log_m = [state.m.ln()];
        let mut m_lp = m_target(&log_m);
        m_kernel.step(0, &mut log_m, &mut m_lp, &m_target, rng, adapt);
        state.m = log_m[0].exp();

        let occupied = state.occupied_clusters();
        hit_truncation |= state.alloc.iter().any(|&z| z == k - 1) && k > 1;
        if !adapt {
            let mut row = beta.clone();
            row.push(state.sigma_bar());
            row.push(T::of_usize(occupied));
            draws.push(row);
            lps.push(log_joint(data, &hyper.beta_priors, &state, &beta));
            m_draws.push(state.m);
        }
    }

    let mut acceptance_rates = beta_kernel.acceptance_rates();
    acceptance_rates.push(T::one());
    acceptance_rates.push(T::one());
    let mut proposal_scales = beta_kernel.scales.clone();
    proposal_scales.extend([T::zero(), T::zero()]);
    let chain = Chain {
        names,
        draws,
        log_target: lps,
        acceptance_rates,
        seed: rng.seed(),
        n_burnin: config.n_burnin,
        n_keep: config.n_keep,
        proposal_scales,
    };
    Ok(NbmrFit { chain, hit_truncation, final_state: state, m_draws })
}
