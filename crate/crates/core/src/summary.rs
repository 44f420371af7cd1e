//! Posterior summaries over one or more pooled chains.
//!
//! Pooled values are sorted before any moment is accumulated, so every
//! summary is invariant to the order in which chains are supplied.

use serde::{Deserialize, Serialize};

use crate::error::{ModeError, Result};
use crate::linalg::Matrix;
use crate::mcmc::{ess_of_series, geweke_of_series, Chain, MIN_DIAGNOSTIC_DRAWS};
use crate::scalar::Scalar;
use crate::special::sort_values;

/// Shortest interval over consecutive order statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hpd<T> {
    pub lo: T,
    pub hi: T,
    /// A disjoint window at most 10% wider exists, hinting at multimodality.
    pub competing_window: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSummary<T> {
    pub name: String,
    pub mean: T,
    pub sd: T,
    pub hpd95: Hpd<T>,
}

/// Shortest window holding `⌈prob·N⌉` of the sorted values; ties go to the
/// leftmost window.
pub fn hpd_interval<T: Scalar>(values: &[T], prob: T) -> Result<Hpd<T>> {
    if values.is_empty() {
        return Err(ModeError::Empty("draw pool"));
    }
    if !(prob > T::zero() && prob <= T::one()) {
        return Err(ModeError::domain(format!("coverage must lie in (0, 1], got {prob}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ModeError::NonFinite("posterior draws".into()));
    }
    let mut s = values.to_vec();
    sort_values(&mut s);
    Ok(hpd_sorted(&s, prob))
}

fn hpd_sorted<T: Scalar>(s: &[T], prob: T) -> Hpd<T> {
    let n = s.len();
    let m = (prob * T::of_usize(n)).ceil().to_usize().unwrap_or(n).clamp(1, n);
    let mut best = 0;
    for i in 1..=n - m {
        if s[i + m - 1] - s[i] < s[best + m - 1] - s[best] {
            best = i;
        }
    }
    let (lo, hi) = (s[best], s[best + m - 1]);
    let limit = (hi - lo) * T::of(1.1);
    let competing_window = (0..=n - m).any(|i| {
        let (a, b) = (s[i], s[i + m - 1]);
        (b < lo || a > hi) && b - a <= limit
    });
    Hpd { lo, hi, competing_window }
}

fn check_layout<T: Scalar>(chains: &[Chain<T>]) -> Result<&[String]> {
    let first = chains.first().ok_or(ModeError::Empty("chain list"))?;
    for c in &chains[1..] {
        if c.names != first.names {
            return Err(ModeError::dim(format!("chain parameters {:?} differ from {:?}", c.names, first.names)));
        }
    }
    Ok(&first.names)
}

/// All draws of column `j` across chains, sorted.
pub fn pooled_sorted<T: Scalar>(chains: &[Chain<T>], j: usize) -> Vec<T> {
    let mut v: Vec<T> = chains.iter().flat_map(|c| c.draws.iter().map(move |d| d[j])).collect();
    sort_values(&mut v);
    v
}

fn mean_sd<T: Scalar>(sorted: &[T]) -> (T, T) {
    let n = T::of_usize(sorted.len());
    let mean = sorted.iter().copied().sum::<T>() / n;
    let sd = if sorted.len() > 1 {
        (sorted.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one())).sqrt()
    } else {
        T::zero()
    };
    (mean, sd)
}

/// Pooled mean, sd and 95% HPD of every parameter.
pub fn posterior_summary<T: Scalar>(chains: &[Chain<T>]) -> Result<Vec<ParamSummary<T>>> {
    let names = check_layout(chains)?;
    let mut out = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let pooled = pooled_sorted(chains, j);
        if pooled.is_empty() {
            return Err(ModeError::Empty("draw pool"));
        }
        if pooled.iter().any(|v| !v.is_finite()) {
            return Err(ModeError::NonFinite(format!("draws of {name}")));
        }
        let (mean, sd) = mean_sd(&pooled);
        out.push(ParamSummary { name: name.clone(), mean, sd, hpd95: hpd_sorted(&pooled, T::of(0.95)) });
    }
    Ok(out)
}

/// Sample covariance (denominator `N - 1`) of the pooled draws.
pub fn chain_covariance<T: Scalar>(chains: &[Chain<T>]) -> Result<Matrix<T>> {
    let names = check_layout(chains)?;
    let p = names.len();
    let total: usize = chains.iter().map(Chain::len).sum();
    if total < 2 {
        return Err(ModeError::ChainTooShort { len: total, min: 2 });
    }
    let means: Vec<T> = (0..p).map(|j| mean_sd(&pooled_sorted(chains, j)).0).collect();
    let mut acc = vec![T::zero(); p * p];
    for d in chains.iter().flat_map(|c| &c.draws) {
        for a in 0..p {
            let da = d[a] - means[a];
            for b in a..p {
                acc[a * p + b] += da * (d[b] - means[b]);
            }
        }
    }
    let denom = T::of_usize(total - 1);
    let mut data = vec![T::zero(); p * p];
    for a in 0..p {
        for b in a..p {
            let v = acc[a * p + b] / denom;
            data[a * p + b] = v;
            data[b * p + a] = v;
        }
    }
    Matrix::from_row_major(p, p, data)
}

/// `N` times the pooled chain covariance, `N` the number of pooled draws.
///
/// This is the rescaling prescribed for the MCMC estimate of the
/// estimator's information matrix. Dimensionally it scales with the
/// covariance rather than its inverse, so treat it as a label-faithful
/// quantity rather than an established inverse-covariance estimate.
pub fn scaled_inverse_cov<T: Scalar>(chains: &[Chain<T>]) -> Result<Matrix<T>> {
    let mut cov = chain_covariance(chains)?;
    let total: usize = chains.iter().map(Chain::len).sum();
    cov.scale(T::of_usize(total));
    Ok(cov)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamReport {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub hpd95: [f64; 2],
}

/// Machine-readable fit summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub params: Vec<ParamReport>,
    /// Per parameter: share of kept transitions where the value moved.
    pub acceptance: Vec<f64>,
    /// Per parameter: sum of per-chain effective sample sizes.
    pub ess: Vec<Option<f64>>,
    /// Per parameter: the Geweke z with the largest magnitude across chains.
    pub geweke_z: Vec<Option<f64>>,
    pub seed: u64,
    pub method: String,
    pub n_chains: usize,
}

fn move_rate<T: Scalar>(chains: &[Chain<T>], j: usize) -> f64 {
    let (mut moves, mut steps) = (0usize, 0usize);
    for c in chains {
        for w in c.draws.windows(2) {
            moves += usize::from(w[0][j] != w[1][j]);
            steps += 1;
        }
    }
    if steps == 0 {
        0.0
    } else {
        moves as f64 / steps as f64
    }
}

/// Builds the report. Diagnostics are `None` when a chain is shorter than
/// [`MIN_DIAGNOSTIC_DRAWS`].
pub fn summary_report<T: Scalar>(chains: &[Chain<T>], method: &str, seed: u64) -> Result<SummaryReport> {
    let summaries = posterior_summary(chains)?;
    let p = summaries.len();
    let long_enough = chains.iter().all(|c| c.len() >= MIN_DIAGNOSTIC_DRAWS);
    let mut acceptance = Vec::with_capacity(p);
    let mut ess = Vec::with_capacity(p);
    let mut geweke = Vec::with_capacity(p);
    for j in 0..p {
        acceptance.push(move_rate(chains, j));
        if !long_enough {
            ess.push(None);
            geweke.push(None);
            continue;
        }
        let mut per_chain: Vec<f64> = chains.iter().map(|c| ess_of_series(&c.column(j)).as_f64()).collect();
        per_chain.sort_by(f64::total_cmp);
        ess.push(Some(per_chain.iter().sum()));
        let mut zs: Vec<f64> = chains.iter().map(|c| geweke_of_series(&c.column(j)).as_f64()).collect();
        // ordering by (|z|, z) keeps the choice independent of chain order
        zs.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
        geweke.push(zs.last().copied());
    }
    let params = summaries
        .into_iter()
        .map(|s| ParamReport {
            name: s.name,
            mean: s.mean.as_f64(),
            sd: s.sd.as_f64(),
            hpd95: [s.hpd95.lo.as_f64(), s.hpd95.hi.as_f64()],
        })
        .collect();
    Ok(SummaryReport { params, acceptance, ess, geweke_z: geweke, seed, method: method.into(), n_chains: chains.len() })
}

/// Plain-text rendering with one row per parameter.
pub fn render_table(report: &SummaryReport) -> String {
    let width = report.params.iter().map(|p| p.name.len()).max().unwrap_or(4).max(9);
    let mut out = format!(
        "method {}  chains {}  seed {}\n{:<width$} {:>10} {:>10} {:>22} {:>7} {:>9} {:>8}\n",
        report.method, report.n_chains, report.seed, "parameter", "mean", "S.D.", "95% HPD", "accept", "ESS", "Geweke"
    );
    let opt = |v: Option<f64>, prec: usize| v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"));
    for (i, p) in report.params.iter().enumerate() {
        let hpd = format!("({:.4}, {:.4})", p.hpd95[0], p.hpd95[1]);
        out.push_str(&format!(
            "{:<width$} {:>10.4} {:>10.4} {:>22} {:>7.3} {:>9} {:>8}\n",
            p.name,
            p.mean,
            p.sd,
            hpd,
            report.acceptance[i],
            opt(report.ess[i], 0),
            opt(report.geweke_z[i], 2)
        ));
    }
    out
}
