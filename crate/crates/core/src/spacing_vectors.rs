//! Exchangeable integer vectors used as circular spacings.
//!
//! A fixed-size circular design with population `N` and sample size `n`
//! draws `J - 1_n` from one of the laws below, with total `m = N - n`
//! spread over `n` components.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::dists::DiscreteDist;
use crate::error::{Error, Result};
use crate::special::{ln_choose, ln_factorial, ln_rising_over_factorial, KahanSum};

/// Family of an exchangeable spacing law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpacingFamily {
    /// Multivariate negative hypergeometric with common `r > 0`.
    /// `r = 1` gives simple random sampling.
    Mnh { r: f64 },
    /// Multinomial with equal cell probabilities `1 / n`.
    Multinomial,
    /// Multivariate hypergeometric with common integer `r`, `n r >= m`.
    Mh { r: u64 },
}

/// Exchangeable law on vectors of `n` non-negative integers summing to `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacingVectorDist {
    family: SpacingFamily,
    m: u64,
    n: usize,
}

impl SpacingVectorDist {
    pub fn new(family: SpacingFamily, m: u64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("spacing vector dimension must be at least 1"));
        }
        match family {
            SpacingFamily::Mnh { r } => {
                if !(r.is_finite() && r > 0.0) {
                    return Err(Error::domain(format!("mnh: r = {r} must be > 0")));
                }
            }
            SpacingFamily::Multinomial => {}
            SpacingFamily::Mh { r } => {
                if (n as u64).saturating_mul(r) < m {
                    return Err(Error::domain(format!(
                        "mh: n * r = {} is below the total m = {m}; support is empty",
                        n as u64 * r
                    )));
                }
            }
        }
        Ok(Self { family, m, n })
    }

    pub fn family(&self) -> SpacingFamily {
        self.family
    }

    /// Component total.
    pub fn total(&self) -> u64 {
        self.m
    }

    /// Number of components.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Log-PMF of `x`; errors on wrong length or sum.
    pub fn ln_pmf_vector(&self, x: &[u64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::domain(format!(
                "spacing vector has length {}, expected {}",
                x.len(),
                self.n
            )));
        }
        let sum: u64 = x.iter().sum();
        if sum != self.m {
            return Err(Error::domain(format!(
                "spacing vector sums to {sum}, expected {}",
                self.m
            )));
        }
        // Summing in sorted order makes the value exactly symmetric.
        let mut sorted = x.to_vec();
        sorted.sort_unstable();
        let n = self.n as f64;
        let m = self.m;
        let mut acc = KahanSum::new();
        match self.family {
            SpacingFamily::Mnh { r } => {
                acc.add(-ln_rising_over_factorial(n * r, m));
                for &xi in &sorted {
                    acc.add(ln_rising_over_factorial(r, xi));
                }
            }
            SpacingFamily::Multinomial => {
                acc.add(ln_factorial(m) - m as f64 * libm::log(n));
                for &xi in &sorted {
                    acc.add(-ln_factorial(xi));
                }
            }
            SpacingFamily::Mh { r } => {
                if sorted.last().is_some_and(|&top| top > r) {
                    return Ok(f64::NEG_INFINITY);
                }
                acc.add(-ln_choose(self.n as u64 * r, m));
                for &xi in &sorted {
                    acc.add(ln_choose(r, xi));
                }
            }
        }
        Ok(acc.value())
    }

    /// PMF of `x`.
    pub fn pmf_vector(&self, x: &[u64]) -> Result<f64> {
        self.ln_pmf_vector(x).map(libm::exp)
    }

    /// Law of one component.
    pub fn marginal(&self) -> DiscreteDist {
        self.partial_sum_law(1)
    }

    /// Law of the sum of any `j` components, `1 <= j <= n`.
    pub fn sum_distribution(&self, j: usize) -> Result<DiscreteDist> {
        if j == 0 || j > self.n {
            return Err(Error::domain(format!(
                "partial sum of {j} components requested from a vector of {}",
                self.n
            )));
        }
        Ok(self.partial_sum_law(j))
    }

    fn partial_sum_law(&self, j: usize) -> DiscreteDist {
        let m = self.m;
        if j == self.n {
            return DiscreteDist::Degenerate { c: m };
        }
        match self.family {
            SpacingFamily::Mnh { r } => DiscreteDist::NegHypergeometric {
                m,
                r: j as f64 * r,
                total: self.n as f64 * r,
            },
            SpacingFamily::Multinomial => DiscreteDist::Binomial {
                n: m,
                p: j as f64 / self.n as f64,
            },
            SpacingFamily::Mh { r } => DiscreteDist::Hypergeometric {
                m,
                r: j as u64 * r,
                total: self.n as u64 * r,
            },
        }
    }

    /// Variance of one component (equivalently of one circular spacing).
    pub fn component_variance(&self) -> f64 {
        let n = self.n as f64;
        let m = self.m as f64;
        let base = m / n * (1.0 - 1.0 / n);
        match self.family {
            SpacingFamily::Mnh { r } => base * (r * n + m) / (r * n + 1.0),
            SpacingFamily::Multinomial => base,
            SpacingFamily::Mh { r } => {
                let rn = r as f64 * n;
                if rn <= 1.0 {
                    0.0
                } else {
                    base * (rn - m) / (rn - 1.0)
                }
            }
        }
    }

    /// One draw, component by component from the conditional law of each
    /// component given the remaining total; the last takes the remainder.
    pub fn sample_vector<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.n);
        self.sample_into(rng, &mut out);
        out
    }

    /// Like [`sample_vector`](Self::sample_vector), reusing `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<u64>) {
        out.clear();
        let mut remaining = self.m;
        for i in 0..self.n - 1 {
            let left = (self.n - i) as u64;
            let x = if remaining == 0 {
                0
            } else {
                let cond = match self.family {
                    SpacingFamily::Mnh { r } => DiscreteDist::NegHypergeometric {
                        m: remaining,
                        r,
                        total: left as f64 * r,
                    },
                    SpacingFamily::Multinomial => DiscreteDist::Binomial {
                        n: remaining,
                        p: 1.0 / left as f64,
                    },
                    SpacingFamily::Mh { r } => DiscreteDist::Hypergeometric {
                        m: remaining,
                        r,
                        total: left * r,
                    },
                };
                cond.sample(rng)
            };
            out.push(x);
            remaining -= x;
        }
        out.push(remaining);
    }
}

/// All compositions of `m` into `n` non-negative parts, in lexicographic
/// order. Intended for small enumeration checks.
pub fn compositions(m: u64, n: usize) -> Vec<Vec<u64>> {
    fn rec(m: u64, n: usize, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if n == 1 {
            prefix.push(m);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for x in 0..=m {
            prefix.push(x);
            rec(m - x, n - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(m, n, &mut Vec::with_capacity(n), &mut out);
    }
    out
}
