//! Empirical-likelihood Bayesian mode regression.
//!
//! The moment function is the derivative of the rectangular kernel,
//! `g(x, y, β) = r·I(|r| < σ)·x` with `r = y - x'β`. For each β the profile
//! empirical likelihood ratio `ℜ(β) = ∏ n p_i` comes from the dual problem
//! `max_λ Σ log(1 + λ'g_i)`, and the posterior is `π(β)·ℜ(β)`.

use crate::error::{ModeError, Result};
use crate::linalg::{self, add_outer, dot, Matrix};
use crate::mcmc::{run_chain, Chain, SamplerConfig};
use crate::model::{check_sigma, Dataset};
use crate::pbmr::PriorSpec;
use crate::scalar::Scalar;
use crate::special::Rng;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100;

/// Solution of the inner Lagrange problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ElSolution<T> {
    pub lambda: Vec<T>,
    pub weights: Vec<T>,
    /// `log ℜ(β) = -Σ log(1 + λ'g_i)`; `-∞` when infeasible.
    pub log_el_ratio: T,
    pub feasible: bool,
}

impl<T: Scalar> ElSolution<T> {
    fn infeasible(p: usize, n: usize) -> Self {
        ElSolution {
            lambda: vec![T::zero(); p],
            weights: vec![T::zero(); n],
            log_el_ratio: T::neg_infinity(),
            feasible: false,
        }
    }
}

/// `r·I(|r| < σ)·x`.
pub fn moment_g<T: Scalar>(x: &[T], y: T, beta: &[T], sigma: T) -> Result<Vec<T>> {
    check_sigma(sigma)?;
    if x.len() != beta.len() {
        return Err(ModeError::dim(format!("covariate length {} vs coefficient length {}", x.len(), beta.len())));
    }
    let r = y - dot(x, beta);
    let l = if r.abs() < sigma { r } else { T::zero() };
    Ok(x.iter().map(|&xj| l * xj).collect())
}

/// Moment matrix with row `i` equal to `g(x_i, y_i, β)`.
pub fn moment_matrix<T: Scalar>(data: &Dataset<T>, beta: &[T], sigma: T) -> Result<Matrix<T>> {
    data.check_beta(beta)?;
    check_sigma(sigma)?;
    let (n, p) = (data.n(), data.p());
    let mut g = Vec::with_capacity(n * p);
    for i in 0..n {
        let r = data.residual(i, beta);
        let l = if r.abs() < sigma { r } else { T::zero() };
        g.extend(data.x().row(i).iter().map(|&xj| l * xj));
    }
    Matrix::from_row_major(n, p, g)
}

/// Log-star: `log z` above `eps`, its second-order Taylor expansion at
/// `eps` below. Returns value, first and second derivative.
#[inline]
fn log_star<T: Scalar>(z: T, eps: T) -> (T, T, T) {
    if z >= eps {
        (z.ln(), z.recip(), -(z * z).recip())
    } else {
        let t = z / eps;
        let v = eps.ln() - T::of(1.5) + T::of(2.0) * t - T::of(0.5) * t * t;
        (v, (T::of(2.0) - t) / eps, -(eps * eps).recip())
    }
}

fn dual_objective<T: Scalar>(g: &Matrix<T>, lambda: &[T], eps: T) -> T {
    (0..g.rows()).map(|i| log_star(T::one() + dot(lambda, g.row(i)), eps).0).sum()
}

/// Maximises `Σ log*(1 + λ'g_i)` by damped Newton steps.
pub fn el_inner_solve<T: Scalar>(g: &Matrix<T>, tol: T, max_iter: usize) -> Result<ElSolution<T>> {
    let (n, p) = (g.rows(), g.cols());
    if n <= p {
        return Err(ModeError::domain(format!("empirical likelihood needs n > p, got n = {n}, p = {p}")));
    }
    if g.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(ModeError::NonFinite("moment matrix".into()));
    }
    // zero must lie strictly inside the range of every coordinate that moves
    for j in 0..p {
        let col = g.column(j);
        let any_neg = col.iter().any(|&v| v < T::zero());
        let any_pos = col.iter().any(|&v| v > T::zero());
        if any_neg != any_pos {
            return Ok(ElSolution::infeasible(p, n));
        }
    }
    let eps = T::one() / T::of_usize(n);
    let mut lambda = vec![T::zero(); p];
    let mut obj = dual_objective(g, &lambda, eps);
    let mut grad_norm = T::infinity();
    let mut converged = false;
    for _ in 0..max_iter {
        let mut grad = vec![T::zero(); p];
        let mut hess = Matrix::zeros(p, p);
        for i in 0..n {
            let gi = g.row(i);
            let (_, d1, d2) = log_star(T::one() + dot(&lambda, gi), eps);
            for (gr, &v) in grad.iter_mut().zip(gi) {
                *gr += d1 * v;
            }
            // negative Hessian, positive semidefinite
            add_outer(&mut hess, gi, -d2);
        }
        grad_norm = grad.iter().map(|&v| v * v).sum::<T>().sqrt();
        if grad_norm <= tol {
            converged = true;
            break;
        }
        let step = newton_direction(&hess, &grad)?;
        let decrement = dot(&grad, &step);
        if decrement.abs() <= T::of(1e-10) {
            // inside the quadratic-convergence region, where the objective
            // gain drops below its own rounding error
            for (l, s) in lambda.iter_mut().zip(&step) {
                *l += *s;
            }
            obj = dual_objective(g, &lambda, eps);
            continue;
        }
        let mut t = T::one();
        let mut improved = false;
        for _ in 0..60 {
            let cand: Vec<T> = lambda.iter().zip(&step).map(|(&l, &s)| l + t * s).collect();
            let cand_obj = dual_objective(g, &cand, eps);
            if cand_obj >= obj {
                lambda = cand;
                obj = cand_obj;
                improved = true;
                break;
            }
            t *= T::of(0.5);
        }
        if !improved {
            // stalled at rounding level; accept if the gradient is small
            converged = grad_norm <= tol.sqrt();
            break;
        }
    }
    if !converged {
        return Err(ModeError::NoConvergence { iterations: max_iter, grad_norm: grad_norm.as_f64() });
    }
    let denoms: Vec<T> = (0..n).map(|i| T::one() + dot(&lambda, g.row(i))).collect();
    if denoms.iter().any(|&z| z <= eps) {
        return Ok(ElSolution::infeasible(p, n));
    }
    let nf = T::of_usize(n);
    let weights: Vec<T> = denoms.iter().map(|&z| (nf * z).recip()).collect();
    // an interior optimum has Σ p_i = 1 exactly; a shortfall means λ ran off
    // along a recession direction (zero on the boundary of the hull)
    let mass: T = weights.iter().copied().sum();
    if (mass - T::one()).abs() > T::of(1e-6) {
        return Ok(ElSolution::infeasible(p, n));
    }
    let log_el_ratio = -denoms.iter().map(|&z| z.ln()).sum::<T>();
    Ok(ElSolution { lambda, weights, log_el_ratio: log_el_ratio.min(T::zero()), feasible: true })
}

fn newton_direction<T: Scalar>(hess: &Matrix<T>, grad: &[T]) -> Result<Vec<T>> {
    if let Ok(step) = linalg::solve(hess, grad) {
        if step.iter().all(|v| v.is_finite()) {
            return Ok(step);
        }
    }
    // singular curvature: ridge it
    let p = grad.len();
    let ridge = (hess.max_abs() * T::of(1e-8)).max(T::of(1e-12));
    let mut rows = Vec::with_capacity(p);
    for i in 0..p {
        let mut row = hess.row(i).to_vec();
        row[i] += ridge;
        rows.push(row);
    }
    linalg::solve(&Matrix::from_rows(&rows)?, grad)
}

/// `log ℜ(β)` at window half-width σ.
pub fn profile_log_el<T: Scalar>(beta: &[T], data: &Dataset<T>, sigma: T) -> Result<T> {
    let g = moment_matrix(data, beta, sigma)?;
    Ok(el_inner_solve(&g, T::of(DEFAULT_TOL), DEFAULT_MAX_ITER)?.log_el_ratio)
}

/// `(1/n) Σ g_i g_i'` with its smallest eigenvalue.
pub fn el_v11<T: Scalar>(g: &Matrix<T>) -> Result<(Matrix<T>, T)> {
    let (n, p) = (g.rows(), g.cols());
    if n == 0 {
        return Err(ModeError::Empty("moment matrix"));
    }
    let mut v = Matrix::zeros(p, p);
    for i in 0..n {
        add_outer(&mut v, g.row(i), T::one());
    }
    v.scale(T::one() / T::of_usize(n));
    let min_eig = linalg::symmetric_eigenvalues(&v).first().copied().unwrap_or(T::zero());
    Ok((v, min_eig))
}

/// Smallest number of observations that must sit inside the window for β
/// to have positive posterior mass.
pub fn min_support(n: usize) -> usize {
    n.div_ceil(4)
}

/// Log posterior `log π(β) + log ℜ(β)`; `-∞` when fewer than `⌈n/4⌉`
/// residuals are in the window or the inner problem is infeasible.
pub fn elbmr_log_posterior<T: Scalar>(beta: &[T], data: &Dataset<T>, prior: &PriorSpec<T>, sigma: T) -> T {
    let Ok(g) = moment_matrix(data, beta, sigma) else {
        return T::neg_infinity();
    };
    let support = (0..g.rows()).filter(|&i| g.row(i).iter().any(|&v| v != T::zero())).count();
    if support < min_support(data.n()) {
        return T::neg_infinity();
    }
    match el_inner_solve(&g, T::of(DEFAULT_TOL), DEFAULT_MAX_ITER) {
        Ok(sol) if sol.feasible => sol.log_el_ratio + prior.beta_log_density(beta),
        _ => T::neg_infinity(),
    }
}

/// Samples the EL posterior with σ held fixed. Any σ prior in `prior` is
/// ignored.
pub fn fit_elbmr<T: Scalar>(
    data: &Dataset<T>,
    prior: &PriorSpec<T>,
    sigma: T,
    config: &SamplerConfig<T>,
    rng: &mut Rng,
) -> Result<Chain<T>> {
    check_sigma(sigma)?;
    if prior.beta_priors.len() != data.p() {
        return Err(ModeError::dim(format!("{} coefficient priors for {} coefficients", prior.beta_priors.len(), data.p())));
    }
    if config.init.len() != data.p() {
        return Err(ModeError::dim(format!("initial state has {} entries, expected {}", config.init.len(), data.p())));
    }
    if !elbmr_log_posterior(&config.init, data, prior, sigma).is_finite() {
        return Err(ModeError::Initialization(format!(
            "empirical likelihood is zero at the initial coefficients for sigma = {sigma}; widen the window"
        )));
    }
    let target = |beta: &[T]| elbmr_log_posterior(beta, data, prior, sigma);
    Ok(run_chain(target, config, rng)?.with_names(data.column_names().to_vec()))
}
