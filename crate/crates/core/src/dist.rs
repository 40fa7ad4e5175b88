//! Special functions, log densities and random variates.
//!
//! Gamma-family draws are produced in log space so that Dirichlet and Beta
//! variates with very small parameters (weak-limit concentrations such as
//! `gamma / L`) never collapse to an all-zero vector.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // float methods come from std when a dependency links it
use num_traits::Float;
use rand_distr::{Distribution, Gamma, Open01, StandardNormal};

use crate::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Smallest value a simplex entry is allowed to take after sampling.
pub const SIMPLEX_FLOOR: f64 = f64::MIN_POSITIVE;

/// `log(1 + exp(x))`, branching at `|x| > 35`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// The logistic function `exp(x) / (1 + exp(x))` without overflow.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Inverse of the standard normal CDF (Wichura's AS 241, PPND16).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((r * 2509.080_928_730_122_7 + 33430.575_583_588_128) * r + 67265.770_927_008_700)
                * r
                + 45921.953_931_549_871)
                * r
                + 13731.693_765_509_461)
                * r
                + 1971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((r * 5226.495_278_852_545_5 + 28729.085_735_721_943) * r + 39307.895_800_092_710)
                * r
                + 21213.794_301_586_596)
                * r
                + 5394.196_021_424_751_1)
                * r
                + 687.187_007_492_057_91)
                * r
                + 42.313_330_701_600_911)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        (((((((r * 7.745_450_142_783_414_1e-4 + 0.022_723_844_989_269_184) * r + 0.241_780_725_177_450_61)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((r * 1.050_750_071_644_416_9e-9 + 5.475_938_084_995_344_9e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_07)
                * r
                + 0.689_767_334_985_100_05)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_758_8)
                * r
                + 1.0)
    } else {
        let r = r - 5.0;
        (((((((r * 2.010_334_399_292_288_1e-7 + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_123)
            * r
            + 0.296_560_571_828_504_89)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103_3)
            / (((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_446e-7) * r
                + 1.846_318_317_510_054_7e-5)
                * r
                + 7.868_691_311_456_132_6e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_81)
                * r
                + 0.599_832_206_555_887_94)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// `log N(x | mean, var * I)`.
pub fn normal_iso_ln_pdf(x: &[f64], mean: &[f64], var: f64) -> f64 {
    let sq: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * x.len() as f64 * (LN_2PI + var.ln()) - 0.5 * sq / var
}

pub fn normal_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln()) - 0.5 * (x - mean) * (x - mean) / var
}

/// Log density of `N(mean, var)` truncated to `(lo, hi)`.
pub fn truncated_normal_ln_pdf(x: f64, mean: f64, var: f64, lo: f64, hi: f64) -> f64 {
    if x <= lo || x >= hi {
        return f64::NEG_INFINITY;
    }
    let sd = var.sqrt();
    let mass = normal_cdf((hi - mean) / sd) - normal_cdf((lo - mean) / sd);
    normal_ln_pdf(x, mean, var) - mass.ln()
}

/// Inverse-gamma log density with shape `a` and scale `b`.
pub fn inv_gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Gamma log density with shape and rate.
pub fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

pub fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return f64::NEG_INFINITY;
    }
    ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()
}

/// Dirichlet log density. Entries are floored at [`SIMPLEX_FLOOR`] so that
/// sampled simplices with underflowed coordinates stay finite.
pub fn dirichlet_ln_pdf(x: &[f64], alpha: &[f64]) -> f64 {
    let total: f64 = alpha.iter().sum();
    let mut out = ln_gamma(total);
    for (&xi, &ai) in x.iter().zip(alpha) {
        out += (ai - 1.0) * xi.max(SIMPLEX_FLOOR).ln() - ln_gamma(ai);
    }
    out
}

pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform draw on the open interval (0, 1).
pub fn open_uniform<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    Open01.sample(rng)
}

/// Log of a `Gamma(shape, 1)` variate; stays finite for tiny shapes.
pub fn ln_gamma_variate<R: rand::Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    debug_assert!(shape > 0.0);
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        g.ln()
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        g.ln() + open_uniform(rng).ln() / shape
    }
}

/// Gamma variate with shape and rate.
pub fn gamma<R: rand::Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    (ln_gamma_variate(rng, shape) - rate.ln()).exp()
}

/// Inverse-gamma variate with shape and scale.
pub fn inv_gamma<R: rand::Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    (scale.ln() - ln_gamma_variate(rng, shape)).exp()
}

/// Beta variate. `b == 0` is the point mass at one and `a == 0` the point
/// mass at zero.
pub fn beta<R: rand::Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    if b <= 0.0 {
        return 1.0;
    }
    if a <= 0.0 {
        return 0.0;
    }
    let la = ln_gamma_variate(rng, a);
    let lb = ln_gamma_variate(rng, b);
    // a / (a + b) = 1 / (1 + exp(lb - la))
    logistic(la - lb)
}

/// Dirichlet variate; every coordinate is at least [`SIMPLEX_FLOOR`].
pub fn dirichlet<R: rand::Rng + ?Sized>(rng: &mut R, alpha: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = alpha.iter().map(|&a| ln_gamma_variate(rng, a)).collect();
    let total = log_sum_exp(&logs);
    let mut out: Vec<f64> = logs.iter().map(|l| (l - total).exp().max(SIMPLEX_FLOOR)).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

pub fn bernoulli<R: rand::Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

pub fn binomial<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, p: f64) -> usize {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    rand_distr::Binomial::new(n as u64, p).expect("valid binomial").sample(rng) as usize
}

/// Draws an index with probability proportional to `exp(log_weights)`.
pub fn categorical_ln<R: rand::Rng + ?Sized>(rng: &mut R, log_weights: &[f64]) -> Option<usize> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let total: f64 = log_weights.iter().map(|w| (w - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (k, w) in log_weights.iter().enumerate() {
        let p = (w - max).exp();
        if p > 0.0 {
            last = Some(k);
            if u < p {
                return Some(k);
            }
            u -= p;
        }
    }
    last
}

/// Draws from `N(mean, var)` truncated to `(lo, hi)` by inverting the CDF.
///
/// Works on whichever tail keeps the CDF values representable; when the
/// whole interval lies beyond about 37 standard deviations an exponential
/// rejection sampler on the one-sided tail takes over.
pub fn truncated_normal<R: rand::Rng + ?Sized>(rng: &mut R, mean: f64, var: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo < hi) || !(var > 0.0) || !mean.is_finite() {
        return Err(Error::Parameter(alloc::format!(
            "truncated normal with mean {mean}, variance {var} on ({lo}, {hi})"
        )));
    }
    let sd = var.sqrt();
    let (mut a, mut b) = ((lo - mean) / sd, (hi - mean) / sd);
    // Mirror so that the interval touches the lower half of the line.
    let flip = a > 0.0;
    if flip {
        (a, b) = (-b, -a);
    }
    let pa = normal_cdf(a);
    let pb = normal_cdf(b);
    let z = if pb - pa > 1e-300 && pb > 0.0 {
        let u = pa + open_uniform(rng) * (pb - pa);
        normal_quantile(u).clamp(a, b)
    } else {
        // Both bounds deep in the lower tail: sample the mirrored upper tail.
        -tail_normal(rng, -b, -a)
    };
    let z = if flip { -z } else { z };
    let x = mean + sd * z;
    // Guard the open interval against rounding onto a bound.
    Ok(x.clamp(lo + (hi - lo) * 1e-15, hi - (hi - lo) * 1e-15))
}

/// Standard normal restricted to `[c, d]` with `c > 0` (Robert 1995).
fn tail_normal<R: rand::Rng + ?Sized>(rng: &mut R, c: f64, d: f64) -> f64 {
    let rate = 0.5 * (c + (c * c + 4.0).sqrt());
    loop {
        let x = c - open_uniform(rng).ln() / rate;
        if x > d {
            continue;
        }
        if open_uniform(rng).ln() <= -0.5 * (x - rate) * (x - rate) {
            return x;
        }
    }
}

/// Mean of `N(mean, var)` truncated to `(lo, hi)`.
pub fn truncated_normal_mean(mean: f64, var: f64, lo: f64, hi: f64) -> f64 {
    let sd = var.sqrt();
    let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
    let mass = normal_cdf(b) - normal_cdf(a);
    mean + sd * (phi(a) - phi(b)) / mass
}
