//! Univariate discrete distributions on the non-negative integers.
//!
//! These are the laws used for renewal jumps (`J - 1`) and for the
//! marginals and partial sums of circular spacing vectors. Every PMF is
//! evaluated in log-space and exponentiated last, so population sizes in
//! the thousands do not overflow binomial coefficients.
//!
//! `Forward(inner)` is the forward transform of `inner`:
//! `Pr(X_F = k) = Pr(X >= k) / E(X + 1)`. It is the law of the initial
//! delay `J0 - 1` of an equilibrium renewal chain whose jumps are
//! `1 + inner`.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::special::{
    beta_inc_reg, gamma_inc_lower_reg, ln_choose, ln_factorial, ln_pow,
    ln_rising_over_factorial, KahanSum,
};

/// Tail mass below which infinite supports are cut.
pub const TAIL_TOLERANCE: f64 = 1e-12;

/// A discrete law on `{0, 1, 2, ...}`.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscreteDist {
    Bernoulli { p: f64 },
    Binomial { n: u64, p: f64 },
    /// `Pr(X = x) = p (1 - p)^x`.
    Geometric { p: f64 },
    /// `Pr(X = x) = Γ(r + x) / (x! Γ(r)) p^r (1 - p)^x`, real `r > 0`.
    NegBinomial { r: f64, p: f64 },
    Poisson { lambda: f64 },
    /// Number of marked items in `m` draws without replacement from an
    /// urn of `total` items, `r` of them marked.
    Hypergeometric { m: u64, r: u64, total: u64 },
    /// Negative hypergeometric `NH(m, r, R)` with real `0 < r <= R`.
    NegHypergeometric { m: u64, r: f64, total: f64 },
    /// Uniform on `{0, ..., a}`.
    Uniform { a: u64 },
    /// Point mass at `c`.
    Degenerate { c: u64 },
    /// Forward transform of the inner law.
    Forward(Box<DiscreteDist>),
}

/// Mean and variance of a distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

fn check_prob(name: &str, p: f64, allow_zero: bool) -> Result<()> {
    let ok = p.is_finite() && p <= 1.0 && (p > 0.0 || (allow_zero && p == 0.0));
    if ok {
        Ok(())
    } else {
        Err(Error::domain(format!("{name}: probability p = {p} outside its domain")))
    }
}

impl DiscreteDist {
    /// Checks the parameter domain.
    pub fn validate(&self) -> Result<()> {
        match *self {
            DiscreteDist::Bernoulli { p } => check_prob("bernoulli", p, true),
            DiscreteDist::Binomial { p, .. } => check_prob("binomial", p, true),
            DiscreteDist::Geometric { p } => check_prob("geometric", p, false),
            DiscreteDist::NegBinomial { r, p } => {
                if !(r.is_finite() && r > 0.0) {
                    return Err(Error::domain(format!("neg_binomial: r = {r} must be > 0")));
                }
                check_prob("neg_binomial", p, false)
            }
            DiscreteDist::Poisson { lambda } => {
                if lambda.is_finite() && lambda > 0.0 {
                    Ok(())
                } else {
                    Err(Error::domain(format!("poisson: lambda = {lambda} must be > 0")))
                }
            }
            DiscreteDist::Hypergeometric { m, r, total } => {
                if m <= total && r <= total {
                    Ok(())
                } else {
                    Err(Error::domain(format!(
                        "hypergeometric: need m <= R and r <= R (m = {m}, r = {r}, R = {total})"
                    )))
                }
            }
            DiscreteDist::NegHypergeometric { r, total, .. } => {
                if r.is_finite() && total.is_finite() && r > 0.0 && total >= r {
                    Ok(())
                } else {
                    Err(Error::domain(format!(
                        "neg_hypergeometric: need 0 < r <= R (r = {r}, R = {total})"
                    )))
                }
            }
            DiscreteDist::Uniform { .. } | DiscreteDist::Degenerate { .. } => Ok(()),
            DiscreteDist::Forward(ref inner) => inner.validate(),
        }
    }

    /// Smallest and (when finite) largest support point.
    pub fn support(&self) -> (u64, Option<u64>) {
        match *self {
            DiscreteDist::Bernoulli { .. } => (0, Some(1)),
            DiscreteDist::Binomial { n, .. } => (0, Some(n)),
            DiscreteDist::Geometric { .. }
            | DiscreteDist::NegBinomial { .. }
            | DiscreteDist::Poisson { .. } => (0, None),
            DiscreteDist::Hypergeometric { m, r, total } => {
                ((m + r).saturating_sub(total), Some(m.min(r)))
            }
            DiscreteDist::NegHypergeometric { m, r, total } => {
                if total == r {
                    (m, Some(m))
                } else {
                    (0, Some(m))
                }
            }
            DiscreteDist::Uniform { a } => (0, Some(a)),
            DiscreteDist::Degenerate { c } => (c, Some(c)),
            DiscreteDist::Forward(ref inner) => (0, inner.support().1),
        }
    }

    /// Log of the PMF at `x`; `-inf` outside the support. Parameters are
    /// assumed valid.
    pub fn ln_pmf(&self, x: u64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || hi.is_some_and(|h| x > h) {
            return f64::NEG_INFINITY;
        }
        let xf = x as f64;
        match *self {
            DiscreteDist::Bernoulli { p } => {
                if x == 1 {
                    ln_pow(p, 1.0)
                } else {
                    ln_pow(1.0 - p, 1.0)
                }
            }
            DiscreteDist::Binomial { n, p } => {
                ln_choose(n, x) + ln_pow(p, xf) + ln_pow(1.0 - p, (n - x) as f64)
            }
            DiscreteDist::Geometric { p } => libm::log(p) + ln_pow(1.0 - p, xf),
            DiscreteDist::NegBinomial { r, p } => {
                ln_rising_over_factorial(r, x) + r * libm::log(p) + ln_pow(1.0 - p, xf)
            }
            DiscreteDist::Poisson { lambda } => -lambda + xf * libm::log(lambda) - ln_factorial(x),
            DiscreteDist::Hypergeometric { m, r, total } => {
                ln_choose(r, x) + ln_choose(total - r, m - x) - ln_choose(total, m)
            }
            DiscreteDist::NegHypergeometric { m, r, total } => {
                if total == r {
                    return 0.0;
                }
                ln_rising_over_factorial(r, x) + ln_rising_over_factorial(total - r, m - x)
                    - ln_rising_over_factorial(total, m)
            }
            DiscreteDist::Uniform { a } => -libm::log(a as f64 + 1.0),
            DiscreteDist::Degenerate { .. } => 0.0,
            DiscreteDist::Forward(_) => libm::log(self.pmf_unchecked(x)),
        }
    }

    pub(crate) fn pmf_unchecked(&self, x: u64) -> f64 {
        match self {
            DiscreteDist::Forward(inner) => inner.survival(x) / (inner.mean() + 1.0),
            _ => libm::exp(self.ln_pmf(x)),
        }
    }

    /// Probability mass at `x`.
    pub fn pmf(&self, x: u64) -> Result<f64> {
        self.validate()?;
        Ok(self.pmf_unchecked(x))
    }

    /// `Pr(X >= x)`.
    pub fn survival(&self, x: u64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 1.0;
        }
        if hi.is_some_and(|h| x > h) {
            return 0.0;
        }
        let xf = x as f64;
        match *self {
            DiscreteDist::Binomial { n, p } => beta_inc_reg(p, xf, (n - x) as f64 + 1.0),
            DiscreteDist::Geometric { p } => libm::exp(ln_pow(1.0 - p, xf)),
            DiscreteDist::NegBinomial { r, p } => beta_inc_reg(1.0 - p, xf, r),
            DiscreteDist::Poisson { lambda } => gamma_inc_lower_reg(xf, lambda),
            DiscreteDist::Uniform { a } => (a + 1 - x) as f64 / (a as f64 + 1.0),
            DiscreteDist::Forward(ref inner) => forward_survival(inner, x),
            _ => {
                let h = hi.expect("finite support");
                let mut acc = KahanSum::new();
                for k in x..=h {
                    acc.add(libm::exp(self.ln_pmf(k)));
                }
                acc.value().min(1.0)
            }
        }
    }

    /// `Pr(X <= x)`.
    pub fn cdf(&self, x: u64) -> f64 {
        match self.support().1 {
            Some(h) if x >= h => 1.0,
            _ => 1.0 - self.survival(x + 1),
        }
    }

    /// Mean, assuming valid parameters.
    pub fn mean(&self) -> f64 {
        self.moments_unchecked().mean
    }

    fn moments_unchecked(&self) -> Moments {
        let (mean, variance) = match *self {
            DiscreteDist::Bernoulli { p } => (p, p * (1.0 - p)),
            DiscreteDist::Binomial { n, p } => {
                let n = n as f64;
                (n * p, n * p * (1.0 - p))
            }
            DiscreteDist::Geometric { p } => ((1.0 - p) / p, (1.0 - p) / (p * p)),
            DiscreteDist::NegBinomial { r, p } => (r * (1.0 - p) / p, r * (1.0 - p) / (p * p)),
            DiscreteDist::Poisson { lambda } => (lambda, lambda),
            DiscreteDist::Hypergeometric { m, r, total } => {
                let (m, r, big) = (m as f64, r as f64, total as f64);
                let var = if total <= 1 {
                    0.0
                } else {
                    m * r * (big - r) / (big * big) * (big - m) / (big - 1.0)
                };
                (m * r / big, var)
            }
            DiscreteDist::NegHypergeometric { m, r, total } => {
                let m = m as f64;
                (
                    m * r / total,
                    m * r * (total - r) / (total * total) * (total + m) / (total + 1.0),
                )
            }
            DiscreteDist::Uniform { a } => {
                let a = a as f64;
                (a / 2.0, ((a + 1.0) * (a + 1.0) - 1.0) / 12.0)
            }
            DiscreteDist::Degenerate { c } => (c as f64, 0.0),
            DiscreteDist::Forward(ref inner) => {
                let m1 = faulhaber_unchecked(inner, 1);
                let m2 = faulhaber_unchecked(inner, 2);
                (m1, (m2 - m1 * m1).max(0.0))
            }
        };
        Moments { mean, variance }
    }

    /// Closed-form mean and variance; forward transforms go through their
    /// Faulhaber moments.
    pub fn mean_var(&self) -> Result<Moments> {
        self.validate()?;
        Ok(self.moments_unchecked())
    }

    /// Forward transform. The geometric law is its own forward transform
    /// and a point mass at `c` maps to the uniform law on `{0, ..., c}`.
    pub fn forward(&self) -> Result<DiscreteDist> {
        self.validate()?;
        Ok(match *self {
            DiscreteDist::Geometric { p } => DiscreteDist::Geometric { p },
            DiscreteDist::Degenerate { c } => DiscreteDist::Uniform { a: c },
            _ => DiscreteDist::Forward(Box::new(self.clone())),
        })
    }

    /// `E(X_F^m) = E[F_m(X)] / E(X + 1)` for the forward transform `X_F` of
    /// this law, with `F_m(x) = 0^m + 1^m + ... + x^m`. Orders 1 and 2.
    pub fn faulhaber_moment(&self, order: u32) -> Result<f64> {
        self.validate()?;
        if !(1..=2).contains(&order) {
            return Err(Error::Unsupported(format!(
                "faulhaber moment of order {order}; only orders 1 and 2 are available"
            )));
        }
        Ok(faulhaber_unchecked(self, order))
    }

    /// Largest support point kept when the tail beyond it has mass below
    /// `tol`. Finite supports return their upper end.
    pub fn truncation_point(&self, tol: f64) -> u64 {
        if let Some(h) = self.support().1 {
            return h;
        }
        if let DiscreteDist::Forward(inner) = self {
            return forward_truncation(inner, tol);
        }
        // smallest K with Pr(X >= K + 1) < tol
        let mut hi = (libm::ceil(self.mean()) as u64).max(1);
        while self.survival(hi + 1) >= tol {
            hi *= 2;
        }
        let mut lo = 0u64;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.survival(mid + 1) < tol {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    /// PMF values on `{0, ..., truncation_point(tol)}`.
    pub fn pmf_table(&self, tol: f64) -> Vec<f64> {
        let top = self.truncation_point(tol);
        (0..=top).map(|x| self.pmf_unchecked(x)).collect()
    }

    /// One draw by inversion of the CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        self.invert(u)
    }

    /// Quantile-style inversion: the smallest `x` with `F(x) > u`.
    pub fn invert(&self, u: f64) -> u64 {
        match *self {
            DiscreteDist::Bernoulli { p } => u64::from(u < p),
            DiscreteDist::Degenerate { c } => c,
            DiscreteDist::Uniform { a } => ((u * (a as f64 + 1.0)) as u64).min(a),
            DiscreteDist::Geometric { p } => {
                if p >= 1.0 {
                    0
                } else {
                    // floor(ln(1 - u) / ln(1 - p))
                    let x = libm::log1p(-u) / libm::log1p(-p);
                    if x.is_finite() {
                        libm::floor(x) as u64
                    } else {
                        u64::MAX
                    }
                }
            }
            DiscreteDist::Binomial { n, p } => {
                if p > 0.5 {
                    n - DiscreteDist::Binomial { n, p: 1.0 - p }.invert(1.0 - u).min(n)
                } else {
                    let odds = p / (1.0 - p);
                    self.walk(u, |x| (n - x) as f64 / (x + 1) as f64 * odds)
                }
            }
            DiscreteDist::NegBinomial { r, p } => {
                self.walk(u, |x| (r + x as f64) / (x + 1) as f64 * (1.0 - p))
            }
            DiscreteDist::Poisson { lambda } => self.walk(u, |x| lambda / (x + 1) as f64),
            DiscreteDist::Hypergeometric { m, r, total } => self.walk(u, |x| {
                ((r - x) as f64 / (x + 1) as f64) * ((m - x) as f64 / (total + x + 1 - r - m) as f64)
            }),
            DiscreteDist::NegHypergeometric { m, r, total } => {
                if total == r {
                    return m;
                }
                self.walk(u, |x| {
                    let xf = x as f64;
                    let mx = (m - x) as f64;
                    (r + xf) / (xf + 1.0) * mx / (total - r + mx - 1.0)
                })
            }
            DiscreteDist::Forward(ref inner) => {
                let (_, hi) = inner.support();
                let norm = inner.mean() + 1.0;
                let mut surv = 1.0;
                let mut x = 0u64;
                let mut cum = surv / norm;
                while u >= cum {
                    if hi.is_some_and(|h| x >= h) {
                        break;
                    }
                    surv -= inner.pmf_unchecked(x);
                    if surv <= 0.0 {
                        break;
                    }
                    x += 1;
                    cum += surv / norm;
                }
                x
            }
        }
    }

    /// Sequential search from the bottom of the support, stepping the PMF
    /// with `ratio(x) = p(x + 1) / p(x)`.
    fn walk(&self, u: f64, ratio: impl Fn(u64) -> f64) -> u64 {
        let (lo, hi) = self.support();
        let ln_p0 = self.ln_pmf(lo);
        if ln_p0 < -700.0 {
            return self.invert_by_table(u);
        }
        let mut p = libm::exp(ln_p0);
        let mut cum = p;
        let mut x = lo;
        while u >= cum {
            if hi.is_some_and(|h| x >= h) {
                return x;
            }
            p *= ratio(x);
            if p <= 0.0 {
                return x;
            }
            x += 1;
            cum += p;
        }
        x
    }

    fn invert_by_table(&self, u: f64) -> u64 {
        let (lo, _) = self.support();
        let top = self.truncation_point(1e-16);
        let logs: Vec<f64> = (lo..=top).map(|x| self.ln_pmf(x)).collect();
        let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logs.iter().map(|l| libm::exp(l - peak)).collect();
        let total: f64 = weights.iter().sum();
        let target = u * total;
        let mut cum = 0.0;
        for (i, w) in weights.iter().enumerate() {
            cum += w;
            if target < cum {
                return lo + i as u64;
            }
        }
        top
    }
}

fn faulhaber_unchecked(d: &DiscreteDist, order: u32) -> f64 {
    let norm = d.mean() + 1.0;
    match order {
        1 => {
            // E[X(X+1)/2] = (var + mean^2 + mean) / 2
            let m = d.moments_unchecked();
            (m.variance + m.mean * m.mean + m.mean) / 2.0 / norm
        }
        _ => {
            let (lo, _) = d.support();
            let top = d.truncation_point(1e-17);
            let mut acc = KahanSum::new();
            for x in lo..=top {
                let xf = x as f64;
                let f2 = xf * (xf + 1.0) * (2.0 * xf + 1.0) / 6.0;
                acc.add(f2 * d.pmf_unchecked(x));
            }
            acc.value() / norm
        }
    }
}

/// Survival values `Pr(X >= k)` of `inner` for `k = 0..len`.
fn survival_run(inner: &DiscreteDist, len: u64) -> Vec<f64> {
    (0..len).map(|k| inner.survival(k)).collect()
}

fn forward_survival(inner: &DiscreteDist, x: u64) -> f64 {
    let norm = inner.mean() + 1.0;
    let top = inner.truncation_point(1e-18);
    if x > top {
        return 0.0;
    }
    let mut acc = KahanSum::new();
    for k in x..=top {
        acc.add(inner.survival(k));
    }
    (acc.value() / norm).min(1.0)
}

fn forward_truncation(inner: &DiscreteDist, tol: f64) -> u64 {
    let norm = inner.mean() + 1.0;
    let top = inner.truncation_point(1e-18);
    let surv = survival_run(inner, top + 1);
    // suffix[k] = sum_{j >= k} S(j)
    let mut suffix = 0.0;
    for k in (0..=top).rev() {
        suffix += surv[k as usize];
        if suffix / norm >= tol {
            return k;
        }
    }
    0
}

/// Jump law `J - 1` of the renewal families indexed by a sampling rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateFamily {
    /// Negative binomial with shape `r`; `r = 1` gives Bernoulli sampling.
    NegBinomial { r: f64 },
    Poisson,
    /// Binomial with `r` trials; needs `r >= (1 - pi) / pi`.
    Binomial { r: u64 },
    /// Deterministic jumps of length `1 / pi` (integer).
    Systematic,
}

impl RateFamily {
    /// The jump law `J - 1` giving `E(J) = 1 / pi`.
    pub fn jump_for_rate(self, pi: f64) -> Result<DiscreteDist> {
        if !(pi > 0.0 && pi <= 1.0) {
            return Err(Error::domain(format!("sampling rate {pi} outside (0, 1]")));
        }
        let odds = (1.0 - pi) / pi;
        let d = match self {
            RateFamily::NegBinomial { r } => DiscreteDist::NegBinomial {
                r,
                p: r * pi / (r * pi + 1.0 - pi),
            },
            RateFamily::Poisson => {
                if odds == 0.0 {
                    DiscreteDist::Degenerate { c: 0 }
                } else {
                    DiscreteDist::Poisson { lambda: odds }
                }
            }
            RateFamily::Binomial { r } => {
                if (r as f64) < odds - 1e-12 {
                    return Err(Error::domain(format!(
                        "binomial spacings need r >= (1 - pi) / pi = {odds}, got {r}"
                    )));
                }
                let p = if r == 0 { 0.0 } else { (odds / r as f64).min(1.0) };
                DiscreteDist::Binomial { n: r, p }
            }
            RateFamily::Systematic => {
                let step = 1.0 / pi;
                let c = libm::round(step);
                if (step - c).abs() > 1e-9 {
                    return Err(Error::domain(format!(
                        "systematic spacing needs 1 / pi integer, got {step}"
                    )));
                }
                DiscreteDist::Degenerate { c: c as u64 - 1 }
            }
        };
        d.validate()?;
        Ok(d)
    }

    /// Variance of the jump `J` at rate `pi`, from the closed forms.
    pub fn jump_variance(self, pi: f64) -> f64 {
        let odds = (1.0 - pi) / pi;
        match self {
            RateFamily::NegBinomial { r } => odds + odds * odds / r,
            RateFamily::Poisson => odds,
            RateFamily::Binomial { r } => odds - odds * odds / r as f64,
            RateFamily::Systematic => 0.0,
        }
    }
}
