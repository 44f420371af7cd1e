//! Datasets, the step-loss and the mode-uniform working likelihood.
//!
//! The working likelihood of a linear mode `y = x'β + ε` (ε with mode zero)
//! rewards every observation that falls inside the window `|y - x'β| ≤ σ`:
//!
//! ```text
//! ℓ(β, σ) = #{i : |yᵢ - xᵢ'β| ≤ σ} - n·log(2σ)
//! ```
//!
//! At fixed σ the maximiser over β is the classical maximum-capture estimator,
//! which [`lee_grid_estimate`] computes by exhaustive search.

use crate::error::{ModeError, Result};
use crate::linalg::{self, add_outer, dot, Matrix};
use crate::scalar::Scalar;

/// Response vector plus full-rank design matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    y: Vec<T>,
    x: Matrix<T>,
    column_names: Vec<String>,
}

impl<T: Scalar> Dataset<T> {
    /// Validates shape, finiteness and full column rank.
    pub fn new(y: Vec<T>, x: Matrix<T>, column_names: Vec<String>) -> Result<Self> {
        let (n, p) = (x.rows(), x.cols());
        if y.len() != n {
            return Err(ModeError::dim(format!("{} responses for {n} design rows", y.len())));
        }
        if column_names.len() != p {
            return Err(ModeError::dim(format!("{} column names for {p} columns", column_names.len())));
        }
        if p == 0 || n < p {
            return Err(ModeError::dim(format!("need n >= p >= 1, got n = {n}, p = {p}")));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(ModeError::NonFinite("response".into()));
        }
        if x.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(ModeError::NonFinite("design matrix".into()));
        }
        let rank = linalg::column_rank(&x);
        if rank < p {
            return Err(ModeError::RankDeficient { rank, cols: p });
        }
        Ok(Dataset { y, x, column_names })
    }

    /// Builds a dataset from covariate rows, optionally prepending an
    /// all-ones column named `intercept`.
    pub fn from_covariates(
        y: Vec<T>,
        covariates: &[Vec<T>],
        names: &[String],
        intercept: bool,
    ) -> Result<Self> {
        let rows: Vec<Vec<T>> = covariates
            .iter()
            .map(|r| {
                let mut row = Vec::with_capacity(r.len() + 1);
                if intercept {
                    row.push(T::one());
                }
                row.extend_from_slice(r);
                row
            })
            .collect();
        let mut column_names = Vec::with_capacity(names.len() + 1);
        if intercept {
            column_names.push("intercept".to_string());
        }
        column_names.extend(names.iter().cloned());
        let x = if rows.is_empty() {
            Matrix::zeros(0, column_names.len())
        } else {
            Matrix::from_rows(&rows)?
        };
        Self::new(y, x, column_names)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Whether the first column is identically one.
    pub fn has_intercept(&self) -> bool {
        (0..self.n()).all(|i| self.x[(i, 0)] == T::one())
    }

    #[inline]
    pub fn residual(&self, i: usize, beta: &[T]) -> T {
        self.y[i] - dot(self.x.row(i), beta)
    }

    pub fn residuals(&self, beta: &[T]) -> Vec<T> {
        (0..self.n()).map(|i| self.residual(i, beta)).collect()
    }

    pub(crate) fn check_beta(&self, beta: &[T]) -> Result<()> {
        if beta.len() != self.p() {
            return Err(ModeError::dim(format!(
                "beta has {} entries, design has {} columns",
                beta.len(),
                self.p()
            )));
        }
        Ok(())
    }
}

/// Coefficients and window half-width.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeParams<T> {
    pub beta: Vec<T>,
    pub sigma: T,
}

impl<T: Scalar> ModeParams<T> {
    pub fn new(beta: Vec<T>, sigma: T) -> Result<Self> {
        check_sigma(sigma)?;
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(ModeError::NonFinite("beta".into()));
        }
        Ok(ModeParams { beta, sigma })
    }
}

pub(crate) fn check_sigma<T: Scalar>(sigma: T) -> Result<()> {
    if sigma > T::zero() && sigma.is_finite() {
        Ok(())
    } else {
        Err(ModeError::domain(format!("window half-width must be positive and finite, got {sigma}")))
    }
}

/// Step loss `I[|z - μ|/σ ≥ 1]`. The boundary `|z - μ| = σ` is a loss.
pub fn step_loss<T: Scalar>(z: T, mu: T, sigma: T) -> Result<u8> {
    check_sigma(sigma)?;
    Ok(u8::from((z - mu).abs() / sigma >= T::one()))
}

/// Number of observations with `|yᵢ - xᵢ'β| ≤ σ` (boundary captured).
pub fn indicator_count<T: Scalar>(params: &ModeParams<T>, data: &Dataset<T>) -> Result<usize> {
    data.check_beta(&params.beta)?;
    Ok(capture_count(data, &params.beta, params.sigma))
}

#[inline]
pub(crate) fn capture_count<T: Scalar>(data: &Dataset<T>, beta: &[T], sigma: T) -> usize {
    (0..data.n()).filter(|&i| data.residual(i, beta).abs() <= sigma).count()
}

/// Working log-likelihood `count(β, σ) - n·log(2σ)`.
pub fn mode_working_loglik<T: Scalar>(params: &ModeParams<T>, data: &Dataset<T>) -> Result<T> {
    check_sigma(params.sigma)?;
    let count = indicator_count(params, data)?;
    Ok(working_loglik_from_count(count, data.n(), params.sigma))
}

#[inline]
pub(crate) fn working_loglik_from_count<T: Scalar>(count: usize, n: usize, sigma: T) -> T {
    T::of_usize(count) - T::of_usize(n) * (T::of(2.0) * sigma).ln()
}

/// One axis of the search grid: `lo, lo + step, …` up to `hi`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridAxis<T> {
    pub lo: T,
    pub hi: T,
    pub step: T,
}

impl<T: Scalar> GridAxis<T> {
    pub fn new(lo: T, hi: T, step: T) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || step <= T::zero() || hi < lo {
            return Err(ModeError::domain(format!("invalid grid axis [{lo}, {hi}] step {step}")));
        }
        Ok(GridAxis { lo, hi, step })
    }

    pub fn n_points(&self) -> usize {
        // Tolerate a trailing point lost to rounding in (hi - lo) / step.
        let span = ((self.hi - self.lo) / self.step + T::of(1e-9)).floor();
        span.to_usize().unwrap_or(usize::MAX).saturating_add(1)
    }

    #[inline]
    pub fn point(&self, k: usize) -> T {
        self.lo + T::of_usize(k) * self.step
    }
}

/// Cartesian search grid with a cap on the total number of points.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec<T> {
    pub axes: Vec<GridAxis<T>>,
    pub cap: usize,
}

impl<T: Scalar> GridSpec<T> {
    pub const DEFAULT_CAP: usize = 50_000_000;

    pub fn new(axes: Vec<GridAxis<T>>) -> Self {
        GridSpec { axes, cap: Self::DEFAULT_CAP }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn size(&self) -> u128 {
        self.axes.iter().map(|a| a.n_points() as u128).product()
    }
}

/// Maximiser of the capture count over a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridEstimate<T> {
    pub beta: Vec<T>,
    pub count: usize,
}

/// Classical maximum-capture estimator by exhaustive grid search.
///
/// Points are visited in lexicographic order and only a strictly larger count
/// replaces the incumbent, so ties resolve to the lexicographically smallest
/// maximiser.
pub fn lee_grid_estimate<T: Scalar>(
    data: &Dataset<T>,
    sigma: T,
    grid: &GridSpec<T>,
) -> Result<GridEstimate<T>> {
    check_sigma(sigma)?;
    if grid.axes.len() != data.p() {
        return Err(ModeError::dim(format!(
            "grid has {} axes, design has {} columns",
            grid.axes.len(),
            data.p()
        )));
    }
    let size = grid.size();
    if size > grid.cap as u128 {
        return Err(ModeError::GridTooLarge { size, cap: grid.cap });
    }
    let lens: Vec<usize> = grid.axes.iter().map(GridAxis::n_points).collect();
    let mut idx = vec![0usize; lens.len()];
    let mut beta: Vec<T> = grid.axes.iter().map(|a| a.point(0)).collect();
    let mut best = GridEstimate { beta: beta.clone(), count: capture_count(data, &beta, sigma) };
    'outer: loop {
        // odometer increment, last axis fastest
        let mut axis = lens.len();
        loop {
            if axis == 0 {
                break 'outer;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < lens[axis] {
                beta[axis] = grid.axes[axis].point(idx[axis]);
                break;
            }
            idx[axis] = 0;
            beta[axis] = grid.axes[axis].point(0);
        }
        let count = capture_count(data, &beta, sigma);
        if count > best.count {
            best = GridEstimate { beta: beta.clone(), count };
            if count == data.n() {
                break;
            }
        }
    }
    Ok(best)
}

/// Empirical information `(1/n) Σ I(|rᵢ| ≤ σ) xᵢxᵢ'`.
///
/// The scalar form is the average capture indicator; for vector β each
/// captured row contributes its outer product.
pub fn fisher_info_estimate<T: Scalar>(params: &ModeParams<T>, data: &Dataset<T>) -> Result<Matrix<T>> {
    data.check_beta(&params.beta)?;
    let p = data.p();
    let mut info = Matrix::zeros(p, p);
    for i in 0..data.n() {
        if data.residual(i, &params.beta).abs() <= params.sigma {
            add_outer(&mut info, data.x().row(i), T::one());
        }
    }
    info.scale(T::one() / T::of_usize(data.n()));
    Ok(info)
}

/// Least-squares coefficients from the normal equations. Used for chain
/// initialisation and residual scales, never as a mode estimate.
pub fn ols_init<T: Scalar>(data: &Dataset<T>) -> Result<Vec<T>> {
    let xtx = data.x().gram();
    let xty = data.x().tr_mul_vec(data.y());
    linalg::solve(&xtx, &xty)
}

/// Residuals of the least-squares fit.
pub fn ols_residuals<T: Scalar>(data: &Dataset<T>) -> Result<Vec<T>> {
    let beta = ols_init(data)?;
    Ok(data.residuals(&beta))
}
