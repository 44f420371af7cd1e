//! Seeded generators for the two simulation designs.
//!
//! Design 1: `y = β0 + β1·x + ε`, `x ~ N(0, 1)`, with a standard normal,
//! a half-log F(2, 2), or a contaminated normal error; every case has its
//! error mode at 0.
//!
//! Design 2: `y = β0 + β1·x + (1 + v·x)·ε` with `x = χ²₃/√6` and the
//! rescaled log-gamma error `ε = -λ·ln Z`, `Z ~ Gamma(α, 1/α)`. λ makes the
//! unconditional error variance one, using the analytic moments
//! `E x = 3/√6` and `E x² = 2.5`.

use std::fmt;
use std::str::FromStr;

use crate::error::{ModeError, Result};
use crate::model::Dataset;
use crate::scalar::Scalar;
use crate::special::{sample_chisq3_scaled, sample_f22, sample_ln_gamma, trigamma, Rng};

/// Share of the contaminated-normal error drawn from the shifted component.
pub const CONTAMINATION_RATE: f64 = 0.2;
pub const CONTAMINANT_MEAN: f64 = 2.5;
/// Both mixture components have variance 1/4.
pub const MIXTURE_SD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCase {
    Normal,
    /// `½·ln F` with `F ~ F(2, 2)`: the logistic density with scale ½.
    FisherZ,
    /// `0.8·N(0, ¼) + 0.2·N(2.5, ¼)`.
    Contaminated,
}

impl FromStr for ErrorCase {
    type Err = ModeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(ErrorCase::Normal),
            "fisherz" => Ok(ErrorCase::FisherZ),
            "contaminated" => Ok(ErrorCase::Contaminated),
            other => Err(ModeError::Parse(format!(
                "unknown error case `{other}` (expected normal, fisherz or contaminated)"
            ))),
        }
    }
}

impl fmt::Display for ErrorCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorCase::Normal => "normal",
            ErrorCase::FisherZ => "fisherz",
            ErrorCase::Contaminated => "contaminated",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scenario<T> {
    Example1 { case: ErrorCase },
    Example2 { alpha: T, v: T },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec<T> {
    pub scenario: Scenario<T>,
    pub n: usize,
    pub beta_true: Vec<T>,
    pub seed: u64,
}

impl<T: Scalar> ScenarioSpec<T> {
    /// Design 1 with β = (1, 2).
    pub fn example1(case: ErrorCase, n: usize, seed: u64) -> Self {
        ScenarioSpec { scenario: Scenario::Example1 { case }, n, beta_true: vec![T::one(), T::of(2.0)], seed }
    }

    /// Design 2 with β = (0, 1).
    pub fn example2(alpha: T, v: T, n: usize, seed: u64) -> Self {
        ScenarioSpec { scenario: Scenario::Example2 { alpha, v }, n, beta_true: vec![T::zero(), T::one()], seed }
    }

    pub fn with_beta(mut self, beta_true: Vec<T>) -> Self {
        self.beta_true = beta_true;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(ModeError::domain(format!("need at least 3 observations, got {}", self.n)));
        }
        if self.beta_true.len() != 2 || self.beta_true.iter().any(|b| !b.is_finite()) {
            return Err(ModeError::dim("true coefficients must be a finite (intercept, slope) pair"));
        }
        if let Scenario::Example2 { alpha, v } = self.scenario {
            check_example2(alpha, v)?;
        }
        Ok(())
    }
}

fn check_example2<T: Scalar>(alpha: T, v: T) -> Result<()> {
    if !(alpha > T::zero() && alpha.is_finite()) {
        return Err(ModeError::domain(format!("alpha must be positive, got {alpha}")));
    }
    if !(v >= T::zero() && v.is_finite()) {
        return Err(ModeError::domain(format!("v must be nonnegative, got {v}")));
    }
    Ok(())
}

/// Generated data together with the error terms behind it.
#[derive(Clone, Debug)]
pub struct SimulatedData<T> {
    pub data: Dataset<T>,
    /// `y - x'β_true`.
    pub error_terms: Vec<T>,
    /// The unscaled ε (equal to `error_terms` in design 1).
    pub base_errors: Vec<T>,
}

/// One contaminated-normal draw and whether it came from the shifted
/// component.
pub fn sample_contaminated<T: Scalar>(rng: &mut Rng) -> (T, bool) {
    let contaminant = rng.next_f64() < CONTAMINATION_RATE;
    let z: f64 = rng.standard_normal();
    let centre = if contaminant { CONTAMINANT_MEAN } else { 0.0 };
    (T::of(centre + MIXTURE_SD * z), contaminant)
}

pub fn sample_error_case<T: Scalar>(case: ErrorCase, rng: &mut Rng) -> T {
    match case {
        ErrorCase::Normal => rng.standard_normal(),
        ErrorCase::FisherZ => T::of(0.5) * sample_f22::<T>(rng).ln(),
        ErrorCase::Contaminated => sample_contaminated(rng).0,
    }
}

/// `[(1 + 2·E(x)·v + E(x²)·v²)·ψ′(α)]^{-1/2}`.
pub fn lambda_err<T: Scalar>(alpha: T, v: T) -> Result<T> {
    check_example2(alpha, v)?;
    let ex = T::of(3.0 / 6f64.sqrt());
    let ex2 = T::of(2.5);
    let scale = T::one() + T::of(2.0) * ex * v + ex2 * v * v;
    Ok((scale * trigamma(alpha)?).sqrt().recip())
}

/// `-λ·ln Z` with `Z ~ Gamma(α, 1/α)`; `ln Z` is drawn directly so tiny
/// shapes do not underflow.
pub fn sample_log_gamma_error<T: Scalar>(alpha: T, lambda: T, rng: &mut Rng) -> Result<T> {
    Ok(-lambda * sample_ln_gamma(rng, alpha, alpha.recip())?)
}

fn assemble<T: Scalar>(x: Vec<T>, errors: Vec<T>, base: Vec<T>, beta: &[T]) -> Result<SimulatedData<T>> {
    let y: Vec<T> = x.iter().zip(&errors).map(|(&xi, &e)| beta[0] + beta[1] * xi + e).collect();
    let rows: Vec<Vec<T>> = x.into_iter().map(|xi| vec![xi]).collect();
    let data = Dataset::from_covariates(y, &rows, &["x1".to_string()], true)?;
    Ok(SimulatedData { data, error_terms: errors, base_errors: base })
}

/// Design 1 data drawn from `rng`; the scenario's own seed is not consulted.
pub fn gen_example1<T: Scalar>(spec: &ScenarioSpec<T>, rng: &mut Rng) -> Result<SimulatedData<T>> {
    spec.validate()?;
    let Scenario::Example1 { case } = spec.scenario else {
        return Err(ModeError::Config("design 1 generator called with a design 2 scenario".into()));
    };
    let mut x = Vec::with_capacity(spec.n);
    let mut e = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        x.push(rng.standard_normal());
        e.push(sample_error_case(case, rng));
    }
    assemble(x, e.clone(), e, &spec.beta_true)
}

/// Design 2 data drawn from `rng`; the scenario's own seed is not consulted.
pub fn gen_example2<T: Scalar>(spec: &ScenarioSpec<T>, rng: &mut Rng) -> Result<SimulatedData<T>> {
    spec.validate()?;
    let Scenario::Example2 { alpha, v } = spec.scenario else {
        return Err(ModeError::Config("design 2 generator called with a design 1 scenario".into()));
    };
    let lambda = lambda_err(alpha, v)?;
    let mut x = Vec::with_capacity(spec.n);
    let mut eps = Vec::with_capacity(spec.n);
    let mut err = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let xi: T = sample_chisq3_scaled(rng);
        let e = sample_log_gamma_error(alpha, lambda, rng)?;
        x.push(xi);
        eps.push(e);
        err.push((T::one() + v * xi) * e);
    }
    assemble(x, err, eps, &spec.beta_true)
}

/// Generates the scenario from its own seed.
pub fn simulate<T: Scalar>(spec: &ScenarioSpec<T>) -> Result<SimulatedData<T>> {
    let mut rng = Rng::new(spec.seed);
    match spec.scenario {
        Scenario::Example1 { .. } => gen_example1(spec, &mut rng),
        Scenario::Example2 { .. } => gen_example2(spec, &mut rng),
    }
}
