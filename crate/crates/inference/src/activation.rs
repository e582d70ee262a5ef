use num_bigint::BigInt;
use num_traits::pow;

use crate::fixed::to_fixed;
use crate::InferenceError;

/// Chebyshev-Gauss nodes used for the projection integrals.
const NODES: usize = 4096;
/// Grid points for the reported deviation.
const GRID: usize = 20_000;

/// Float polynomial approximating `max(0, x)` on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluFit {
    /// Power-basis coefficients, highest degree first: `coeffs[j]` multiplies `x^(m - j)`.
    pub coeffs: Vec<f64>,
    pub interval: (f64, f64),
    /// Upper bound on `max |R(x) - relu(x)|` over the interval.
    pub max_deviation: f64,
}

impl ReluFit {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().fold(0.0, |acc, &k| acc * x + k)
    }

    /// Coefficients on the `10^n` grid.
    pub fn to_fixed(&self, n: u32) -> Result<PolyActivation, InferenceError> {
        let k = self.coeffs.iter().map(|&c| to_fixed(c, n)).collect::<Result<_, _>>()?;
        Ok(PolyActivation {
            k,
            n,
            interval: self.interval,
        })
    }
}

/// Truncated Chebyshev series of `relu` on `[lo, hi]`, degree `m`.
pub fn fit_relu_poly(degree: usize, lo: f64, hi: f64) -> Result<ReluFit, InferenceError> {
    if !(2..=16).contains(&degree) || !(lo.is_finite() && hi.is_finite()) || !(lo < 0.0 && 0.0 < hi) {
        return Err(InferenceError::Interval { lo, hi, degree });
    }
    let half = (hi - lo) / 2.0;
    let mid = (hi + lo) / 2.0;

    let mut cheb = vec![0.0; degree + 1];
    for j in 0..NODES {
        let theta = (2 * j + 1) as f64 * std::f64::consts::PI / (2 * NODES) as f64;
        let fx = (theta.cos() * half + mid).max(0.0);
        for (k, c) in cheb.iter_mut().enumerate() {
            *c += fx * (k as f64 * theta).cos();
        }
    }
    for c in cheb.iter_mut() {
        *c *= 2.0 / NODES as f64;
    }
    cheb[0] /= 2.0;

    // power basis in t, lowest first, via T_{k+1} = 2t T_k - T_{k-1}
    let mut in_t = vec![0.0; degree + 1];
    let mut prev = vec![1.0];
    let mut cur = vec![0.0, 1.0];
    in_t[0] += cheb[0];
    for &ck in &cheb[1..=degree] {
        for (i, v) in cur.iter().enumerate() {
            in_t[i] += ck * v;
        }
        let mut next = vec![0.0; cur.len() + 1];
        for (i, v) in cur.iter().enumerate() {
            next[i + 1] += 2.0 * v;
        }
        for (i, v) in prev.iter().enumerate() {
            next[i] -= v;
        }
        prev = std::mem::replace(&mut cur, next);
    }

    // t = (x - mid) / half, substituted by Horner on polynomials in x
    let mut in_x = vec![0.0; 1];
    for &c in in_t.iter().rev() {
        let mut next = vec![0.0; in_x.len() + 1];
        for (i, v) in in_x.iter().enumerate() {
            next[i + 1] += v / half;
            next[i] -= v * mid / half;
        }
        next[0] += c;
        next.truncate(degree + 1);
        in_x = next;
    }
    in_x.resize(degree + 1, 0.0);
    let coeffs: Vec<f64> = in_x.into_iter().rev().collect();
    let mut fit = ReluFit {
        coeffs,
        interval: (lo, hi),
        max_deviation: 0.0,
    };
    // |T_k'| <= k^2 on [-1, 1]
    let slope = cheb.iter().enumerate().map(|(k, c)| c.abs() * (k * k) as f64).sum::<f64>() / half;
    fit.max_deviation = deviation_bound(&fit, slope);
    Ok(fit)
}

/// Grid maximum of `|R - relu|` plus a Lipschitz margin for the gaps;
/// `slope` bounds `|R'|` on the interval.
fn deviation_bound(fit: &ReluFit, slope: f64) -> f64 {
    let (lo, hi) = fit.interval;
    let h = (hi - lo) / GRID as f64;
    let mut worst = fit.eval(0.0).abs();
    for i in 0..=GRID {
        let x = lo + i as f64 * h;
        worst = worst.max((fit.eval(x) - x.max(0.0)).abs());
    }
    worst + h / 2.0 * (slope + 1.0)
}

/// `R(x) = sum k_j x^(m-j)` on the `10^n` grid.
///
/// Evaluated homogeneously as `sum k_j x^(m-j) c^j` with `c = 10^n`, so an
/// input at scale `10^n` yields an output at scale `10^(n(m+1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyActivation {
    /// Fixed-point coefficients, highest degree first.
    pub k: Vec<BigInt>,
    pub n: u32,
    pub interval: (f64, f64),
}

impl PolyActivation {
    pub fn degree(&self) -> usize {
        self.k.len() - 1
    }

    pub fn c(&self) -> BigInt {
        pow(BigInt::from(10), self.n as usize)
    }

    /// Factor by which one activation raises the scale of its input.
    pub fn magnification(&self) -> BigInt {
        pow(BigInt::from(10), self.n as usize * self.degree())
    }

    pub fn eval_fixed(&self, x: &BigInt) -> BigInt {
        let m = self.degree();
        let c = self.c();
        self.k
            .iter()
            .enumerate()
            .map(|(j, k)| k * pow(x.clone(), m - j) * pow(c.clone(), j))
            .sum()
    }
}
