//! Special functions, the seeded generator and the handful of distributions
//! the simulation studies and samplers draw from.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ModeError, Result};
use crate::scalar::Scalar;

/// Deterministic pseudo-random stream.
///
/// The algorithm is part of the reproducibility contract: ChaCha with 8
/// rounds, keyed through `SeedableRng::seed_from_u64`. Uniforms take the top
/// 53 bits of one `u64`; normals use Box–Muller on two uniforms with the
/// sine branch discarded, so every draw consumes a fixed number of words
/// and no state is cached between calls.
#[derive(Clone, Debug)]
pub struct Rng {
    inner: ChaCha8Rng,
    seed: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { inner: ChaCha8Rng::seed_from_u64(seed), seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    pub fn open01(&mut self) -> f64 {
        loop {
            let u = self.next_f64();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform on `(0, 1)` in the target scalar type.
    pub fn uniform<T: Scalar>(&mut self) -> T {
        loop {
            let u = T::of(self.open01());
            if u > T::zero() && u < T::one() {
                return u;
            }
        }
    }

    /// Index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_f64() * n as f64) as usize).min(n - 1)
    }

    pub fn standard_normal<T: Scalar>(&mut self) -> T {
        let u1 = self.open01();
        let u2 = self.next_f64();
        T::of((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos())
    }

    /// Exponential with mean one.
    pub fn exponential<T: Scalar>(&mut self) -> T {
        T::of(-self.open01().ln())
    }
}

/// Trigamma `ψ′(x)`: recurrence `ψ′(x) = ψ′(x+1) + 1/x²` up to `x ≥ 10`, then
/// the asymptotic series in Bernoulli numbers.
pub fn trigamma<T: Scalar>(x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(ModeError::domain(format!("trigamma requires x > 0, got {x}")));
    }
    let mut acc = T::zero();
    let mut z = x;
    let ten = T::of(10.0);
    while z < ten {
        acc += T::one() / (z * z);
        z += T::one();
    }
    let inv = T::one() / z;
    let inv2 = inv * inv;
    // B2/x³ - B4/x⁵ + ... with Bernoulli numbers folded in
    const COEF: [f64; 7] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
        7.0 / 6.0,
    ];
    let series = COEF.iter().rev().fold(T::zero(), |s, &c| s * inv2 + T::of(c));
    let tail = inv + inv2 / T::of(2.0) + inv * inv2 * series;
    Ok(acc + tail)
}

/// Gamma draw with the given shape and scale (mean `shape·scale`).
///
/// Marsaglia–Tsang squeeze/rejection for shape ≥ 1; for shape < 1 a draw at
/// shape + 1 is multiplied by `U^(1/shape)`.
pub fn sample_gamma<T: Scalar>(rng: &mut Rng, shape: T, scale: T) -> Result<T> {
    if !(shape > T::zero() && shape.is_finite() && scale > T::zero() && scale.is_finite()) {
        return Err(ModeError::domain(format!(
            "gamma requires positive finite shape and scale, got ({shape}, {scale})"
        )));
    }
    Ok(T::of(standard_gamma(rng, shape.as_f64())) * scale)
}

/// Logarithm of a gamma draw, computed without forming the draw itself so
/// that tiny shapes (where `U^(1/shape)` underflows) stay finite.
pub fn sample_ln_gamma<T: Scalar>(rng: &mut Rng, shape: T, scale: T) -> Result<T> {
    if !(shape > T::zero() && shape.is_finite() && scale > T::zero() && scale.is_finite()) {
        return Err(ModeError::domain(format!(
            "gamma requires positive finite shape and scale, got ({shape}, {scale})"
        )));
    }
    let a = shape.as_f64();
    let ln_std = if a < 1.0 {
        standard_gamma(rng, a + 1.0).ln() + rng.open01().ln() / a
    } else {
        standard_gamma(rng, a).ln()
    };
    Ok(T::of(ln_std) + scale.ln())
}

pub(crate) fn standard_gamma(rng: &mut Rng, shape: f64) -> f64 {
    if shape < 1.0 {
        let g = standard_gamma(rng, shape + 1.0);
        let u = rng.open01();
        return g * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.standard_normal();
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = rng.open01();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Beta draw as a ratio of gammas.
pub fn sample_beta<T: Scalar>(rng: &mut Rng, a: T, b: T) -> Result<T> {
    let x = sample_gamma(rng, a, T::one())?;
    let y = sample_gamma(rng, b, T::one())?;
    let s = x + y;
    if s > T::zero() {
        Ok(x / s)
    } else {
        // both underflowed: fall back on the mean
        Ok(a / (a + b))
    }
}

/// F(2, 2) draw as the ratio of two independent mean-one exponentials.
pub fn sample_f22<T: Scalar>(rng: &mut Rng) -> T {
    let a: T = rng.exponential();
    let b: T = rng.exponential();
    a / b
}

/// χ²₃ draw rescaled to unit variance (`χ²₃/√6`).
pub fn sample_chisq3_scaled<T: Scalar>(rng: &mut Rng) -> T {
    let s: f64 = (0..3)
        .map(|_| {
            let z: f64 = rng.standard_normal();
            z * z
        })
        .sum();
    T::of(s / 6f64.sqrt())
}

/// Sample standard deviation, interquartile range and (unscaled) median
/// absolute deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobustScales<T> {
    pub sd: T,
    pub iqr: T,
    pub mad: T,
}

/// Quantile by linear interpolation between order statistics
/// (`h = (n-1)q`), applied to sorted data.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], q: T) -> T {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = T::of_usize(n - 1) * q;
    let lo = h.floor().to_usize().unwrap_or(0).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    let frac = h - T::of_usize(lo);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub(crate) fn sort_values<T: Scalar>(v: &mut [T]) {
    v.sort_by(|a, b| a.partial_cmp(b).expect("values are not NaN"));
}

pub fn median<T: Scalar>(v: &[T]) -> T {
    let mut s = v.to_vec();
    sort_values(&mut s);
    quantile_sorted(&s, T::of(0.5))
}

pub fn mean<T: Scalar>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::of_usize(v.len())
}

/// Sample variance with the `n - 1` denominator.
pub fn variance<T: Scalar>(v: &[T]) -> T {
    let m = mean(v);
    v.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::of_usize(v.len() - 1)
}

pub fn robust_scales<T: Scalar>(v: &[T]) -> Result<RobustScales<T>> {
    if v.len() < 2 {
        return Err(ModeError::domain(format!("robust scales need at least 2 values, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(ModeError::NonFinite("scale input".into()));
    }
    let sd = variance(v).sqrt();
    let mut sorted = v.to_vec();
    sort_values(&mut sorted);
    let iqr = quantile_sorted(&sorted, T::of(0.75)) - quantile_sorted(&sorted, T::of(0.25));
    let med = quantile_sorted(&sorted, T::of(0.5));
    let dev: Vec<T> = v.iter().map(|&x| (x - med).abs()).collect();
    Ok(RobustScales { sd, iqr, mad: median(&dev) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn trigamma_identities() {
        assert_relative_eq!(trigamma(1.0).unwrap(), PI * PI / 6.0, max_relative = 1e-10);
        assert_relative_eq!(trigamma(0.5).unwrap(), PI * PI / 2.0, max_relative = 1e-10);
        let partial: f64 = (1..10).map(|k| 1.0 / (k * k) as f64).sum();
        assert_relative_eq!(trigamma(10.0).unwrap(), PI * PI / 6.0 - partial, max_relative = 1e-10);
        assert_relative_eq!(trigamma(10.0).unwrap(), 0.105_166_335_681_685_75, max_relative = 1e-12);
        assert!(trigamma(0.0).is_err());
        assert!(trigamma(-1.5).is_err());
    }

    #[test]
    fn trigamma_recurrence() {
        for &x in &[0.1f64, 0.5, 1.0, 2.0, 7.3] {
            let lhs = trigamma(x).unwrap();
            let rhs = trigamma(x + 1.0).unwrap() + 1.0 / (x * x);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs(), "x = {x}");
        }
    }

    #[test]
    fn trigamma_in_f32() {
        assert!((trigamma(1.0f32).unwrap() - 1.644_934).abs() < 1e-5);
    }

    #[test]
    fn gamma_moments() {
        let mut rng = Rng::new(11);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_gamma(&mut rng, 5.0, 0.2).unwrap()).collect();
        assert!((mean(&draws) - 1.0).abs() < 0.01);
        assert!((variance(&draws) - 0.2).abs() < 0.01);
        assert!(draws.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn gamma_small_shape_mean() {
        let mut rng = Rng::new(12);
        let draws: Vec<f64> = (0..400_000).map(|_| sample_gamma(&mut rng, 0.3, 2.0).unwrap()).collect();
        assert!((mean(&draws) - 0.6).abs() < 0.01);
    }

    #[test]
    fn gamma_shape_one_is_exponential() {
        let mut rng = Rng::new(13);
        let scale = 1.5;
        let mut draws: Vec<f64> = (0..100_000).map(|_| sample_gamma(&mut rng, 1.0, scale).unwrap()).collect();
        sort_values(&mut draws);
        let n = draws.len() as f64;
        let ks = draws
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - (-x / scale).exp();
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS distance {ks}");
    }

    #[test]
    fn ln_gamma_matches_gamma_stream() {
        let mut a = Rng::new(21);
        let mut b = Rng::new(21);
        for _ in 0..1000 {
            let g: f64 = sample_gamma(&mut a, 2.5, 0.4).unwrap();
            let lg: f64 = sample_ln_gamma(&mut b, 2.5, 0.4).unwrap();
            assert_relative_eq!(g.ln(), lg, max_relative = 1e-12);
        }
        let mut rng = Rng::new(22);
        let draws: Vec<f64> = (0..200_000).map(|_| sample_ln_gamma(&mut rng, 0.05, 20.0).unwrap()).collect();
        assert!(draws.iter().all(|x| x.is_finite()));
        // E ln Z = digamma(0.05) + ln 20
        let expected = -20.497_844_991_299_9 + 20f64.ln();
        assert!((mean(&draws) - expected).abs() < 0.15, "{}", mean(&draws));
    }

    #[test]
    fn gamma_rejects_bad_parameters() {
        let mut rng = Rng::new(0);
        assert!(sample_gamma(&mut rng, 0.0, 1.0).is_err());
        assert!(sample_gamma(&mut rng, 1.0, -1.0).is_err());
        assert!(sample_gamma(&mut rng, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn f22_is_symmetric_about_one() {
        let mut rng = Rng::new(14);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_f22(&mut rng)).collect();
        assert!((median(&draws) - 1.0).abs() < 0.02);
        let below = draws.iter().filter(|&&z| z <= 1.0).count() as f64 / n as f64;
        assert!((below - 0.5).abs() < 0.01);
        // W = log(Z)/2 has density 2e^{2w}/(1+e^{2w})², peaked at zero
        let w: Vec<f64> = draws.iter().map(|z| 0.5 * z.ln()).collect();
        assert_eq!(crate::testutil::mode_bin_center(&w, 0.2), 0.0);
    }

    #[test]
    fn chisq3_scaled_moments() {
        let mut rng = Rng::new(15);
        let draws: Vec<f64> = (0..1_000_000).map(|_| sample_chisq3_scaled(&mut rng)).collect();
        assert!((variance(&draws) - 1.0).abs() < 0.02);
        assert!((mean(&draws) - 3.0 / 6f64.sqrt()).abs() < 0.01);
        assert!(draws.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn robust_scale_cases() {
        let s = robust_scales(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!((s.sd, s.iqr, s.mad), (0.0, 0.0, 0.0));
        let s = robust_scales(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(s.mad, 1.0);
        assert_eq!(s.iqr, 2.0);
        assert_relative_eq!(s.sd, 2.5f64.sqrt(), epsilon = 1e-15);
        let v = [0.3, -1.2, 4.4, 2.0, 0.9, -0.7];
        let a = robust_scales(&v).unwrap();
        let b = robust_scales(&v.map(|x| 2.5 * x)).unwrap();
        assert_relative_eq!(b.sd, 2.5 * a.sd, max_relative = 1e-14);
        assert_relative_eq!(b.iqr, 2.5 * a.iqr, max_relative = 1e-14);
        assert_relative_eq!(b.mad, 2.5 * a.mad, max_relative = 1e-14);
        assert!(robust_scales(&[1.0]).is_err());
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(99);
        let mut b = Rng::new(99);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
            assert_eq!(sample_gamma(&mut a, 0.7, 1.0).unwrap(), sample_gamma(&mut b, 0.7, 1.0).unwrap());
        }
    }
}
