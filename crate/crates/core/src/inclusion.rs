//! First- and second-order inclusion probabilities.
//!
//! Every function taking a `jump: &DiscreteDist` reads it as the law of
//! `J - 1`, the same convention as [`Design`](crate::designs::Design).
//! Joint probabilities of fixed-size circular designs depend only on the
//! circular gap `l - k (mod N)` and are stored per gap.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::designs::{Design, DesignKind};
use crate::dists::DiscreteDist;
use crate::error::{Error, Result};
use crate::spacing_vectors::{SpacingFamily, SpacingVectorDist};
use crate::special::{ln_beta, ln_choose, ln_factorial, ln_gamma, ln_pow, KahanSum};

/// Tolerance for identities that must hold exactly in exact arithmetic.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-9;

/// `f^{j*}(k)`: probability that `j` i.i.d. jumps sum to `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionTable {
    j_max: usize,
    k_max: usize,
    values: Vec<f64>,
}

impl ConvolutionTable {
    /// Builds the table from `jump_pmf[k] = Pr(J = k)`; `jump_pmf[0]` is
    /// ignored and entries past the end count as zero.
    pub fn from_jump_pmf(jump_pmf: &[f64], j_max: usize, k_max: usize) -> Self {
        let width = k_max + 1;
        let mut values = vec![0.0; (j_max + 1) * width];
        if j_max == 0 {
            return Self { j_max, k_max, values };
        }
        for k in 1..=k_max.min(jump_pmf.len().saturating_sub(1)) {
            values[width + k] = jump_pmf[k];
        }
        for j in 2..=j_max {
            let (done, rest) = values.split_at_mut(j * width);
            let prev = &done[(j - 1) * width..];
            let first = &done[width..2 * width];
            let row = &mut rest[..width];
            let mut any = false;
            for k in j..=k_max {
                let mut acc = KahanSum::new();
                for t in 1..=k - (j - 1) {
                    let a = first[t];
                    if a != 0.0 {
                        acc.add(a * prev[k - t]);
                    }
                }
                row[k] = acc.value();
                any |= row[k] != 0.0;
            }
            if !any {
                break;
            }
        }
        Self { j_max, k_max, values }
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// `f^{j*}(k)`; zero outside the table.
    pub fn get(&self, j: usize, k: usize) -> f64 {
        if j == 0 || j > self.j_max || k > self.k_max {
            0.0
        } else {
            self.values[j * (self.k_max + 1) + k]
        }
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let w = self.k_max + 1;
        &self.values[j * w..(j + 1) * w]
    }

    /// `sum_{j=1}^{min(k, j_max)} f^{j*}(k)`: the probability that some
    /// partial sum of jumps hits `k` exactly.
    pub fn renewal_density(&self, k: usize) -> f64 {
        (1..=k.min(self.j_max))
            .map(|j| self.get(j, k))
            .collect::<KahanSum>()
            .value()
    }
}

/// Convolution table for the jump `J = 1 + X`, `X ~ jump`.
pub fn convolve(jump: &DiscreteDist, j_max: usize, k_max: usize) -> Result<ConvolutionTable> {
    Ok(ConvolutionTable::from_jump_pmf(&jump_pmf(jump, k_max)?, j_max, k_max))
}

/// `Pr(J = k)` for `k = 0..=k_max`.
fn jump_pmf(jump: &DiscreteDist, k_max: usize) -> Result<Vec<f64>> {
    jump.validate()?;
    let mut pmf = vec![0.0; k_max + 1];
    for (k, slot) in pmf.iter_mut().enumerate().skip(1) {
        *slot = jump.pmf((k - 1) as u64)?;
    }
    Ok(pmf)
}

/// First-order inclusion probabilities of a simple renewal chain on
/// `{1..N}`: `pi_k = sum_j f^{j*}(k)`.
pub fn pi_first_renewal(jump: &DiscreteDist, population: usize) -> Result<Vec<f64>> {
    let table = convolve(jump, population, population)?;
    Ok((1..=population).map(|k| table.renewal_density(k)).collect())
}

/// First-order inclusion probabilities of an equilibrium renewal chain.
///
/// Evaluated from the delay law and the renewal density, then checked to be
/// flat at `1 / E(J)`.
pub fn pi_first_equilibrium(jump: &DiscreteDist, population: usize) -> Result<Vec<f64>> {
    let table = convolve(jump, population, population)?;
    let delay = jump.forward()?;
    // delay_pmf[t] = Pr(J0 = t)
    let mut delay_pmf = vec![0.0; population + 1];
    for (t, slot) in delay_pmf.iter_mut().enumerate().skip(1) {
        *slot = delay.pmf((t - 1) as u64)?;
    }
    let density: Vec<f64> = (0..=population).map(|t| table.renewal_density(t)).collect();
    let rate = 1.0 / (1.0 + jump.mean());
    let mut pi = Vec::with_capacity(population);
    for k in 1..=population {
        let mut acc = KahanSum::new();
        acc.add(delay_pmf[k]);
        for t in 1..k {
            acc.add(delay_pmf[k - t] * density[t]);
        }
        let v = acc.value();
        if (v - rate).abs() > CONSISTENCY_TOLERANCE {
            return Err(Error::Consistency(format!(
                "equilibrium inclusion probability of unit {k} is {v}, expected {rate}"
            )));
        }
        pi.push(v);
    }
    Ok(pi)
}

/// `Pr(l in S | k in S)` for renewal chains with `l - k = gap >= 1`.
///
/// Closed forms for geometric, negative binomial, Poisson, binomial and
/// degenerate jumps; convolution table otherwise.
pub fn renewal_conditional(jump: &DiscreteDist, gap: usize) -> Result<f64> {
    jump.validate()?;
    if gap == 0 {
        return Err(Error::domain("gap must be positive"));
    }
    let g = gap as u64;
    let v = match *jump {
        DiscreteDist::Geometric { p } => p,
        DiscreteDist::Degenerate { c } => {
            if g.is_multiple_of(c + 1) {
                1.0
            } else {
                0.0
            }
        }
        DiscreteDist::NegBinomial { r, p } => sum_terms(g, |j| {
            let (jf, x) = (j as f64, g - j);
            let jr = jf * r;
            ln_gamma(jr + x as f64) - ln_factorial(x) - ln_gamma(jr)
                + jr * libm::log(p)
                + ln_pow(1.0 - p, x as f64)
        }),
        DiscreteDist::Poisson { lambda } => sum_terms(g, |j| {
            let (jl, x) = (j as f64 * lambda, g - j);
            -jl + ln_pow(jl, x as f64) - ln_factorial(x)
        }),
        DiscreteDist::Binomial { n, p } => sum_terms(g, |j| {
            let x = g - j;
            let trials = j * n;
            if x > trials {
                f64::NEG_INFINITY
            } else {
                ln_choose(trials, x) + ln_pow(p, x as f64) + ln_pow(1.0 - p, (trials - x) as f64)
            }
        }),
        _ => convolve(jump, gap, gap)?.renewal_density(gap),
    };
    Ok(v)
}

/// Generic conditional probability from the convolution table only.
pub fn renewal_conditional_generic(jump: &DiscreteDist, gap: usize) -> Result<f64> {
    if gap == 0 {
        return Err(Error::domain("gap must be positive"));
    }
    Ok(convolve(jump, gap, gap)?.renewal_density(gap))
}

// sum_{j=1}^{g} exp(term(j)), skipping impossible terms.
fn sum_terms(g: u64, term: impl Fn(u64) -> f64) -> f64 {
    let mut acc = KahanSum::new();
    for j in 1..=g {
        let t = term(j);
        if t > f64::NEG_INFINITY {
            acc.add(libm::exp(t));
        }
    }
    acc.value()
}

/// `pi_kl = pi * sum_{j=1}^{l-k} f^{j*}(l - k)` for an equilibrium renewal
/// chain with rate `pi`.
pub fn pi_joint_renewal(jump: &DiscreteDist, rate: f64, k: usize, l: usize) -> Result<f64> {
    if k >= l {
        return Err(Error::domain(format!("need k < l, got k = {k}, l = {l}")));
    }
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::domain(format!("rate {rate} must lie in (0, 1]")));
    }
    Ok(rate * renewal_conditional(jump, l - k)?)
}

/// `f_j(x) = Pr(J_1 + ... + J_j = x)` for the positive spacings of a
/// circular design.
pub fn spacing_sum_pmf(spacings: &SpacingVectorDist, j: usize, x: u64) -> Result<f64> {
    if j == 0 || j > spacings.dim() || x < j as u64 {
        return Ok(0.0);
    }
    spacings.sum_distribution(j)?.pmf(x - j as u64)
}

/// `Pr(l in S | k in S)` for a circular design at circular gap `gap`,
/// from the sum distributions of the spacings.
pub fn circular_conditional_generic(spacings: &SpacingVectorDist, gap: usize) -> Result<f64> {
    let population = population_of(spacings);
    check_gap(gap, population)?;
    let mut acc = KahanSum::new();
    for j in 1..=gap.min(spacings.dim()) {
        acc.add(spacing_sum_pmf(spacings, j, gap as u64)?);
    }
    Ok(acc.value())
}

/// `Pr(l in S | k in S)` for a circular design from the family closed form.
pub fn circular_conditional(spacings: &SpacingVectorDist, gap: usize) -> Result<f64> {
    let population = population_of(spacings);
    check_gap(gap, population)?;
    let n = spacings.dim() as u64;
    let m = spacings.total();
    let g = gap as u64;
    let top = g.min(n - 1);
    let v = match spacings.family() {
        SpacingFamily::Mnh { r } if r == 1.0 => {
            return Ok((n - 1) as f64 / (population - 1) as f64);
        }
        SpacingFamily::Mnh { r } => {
            let nf = n as f64;
            let big = (m + n) as f64;
            sum_range(top, g, m, |j| {
                let jf = j as f64;
                let gf = g as f64;
                let a = gf + jf * (r - 1.0);
                ln_choose(m, g - j) + ln_beta(a, big + nf * (r - 1.0) - a)
                    - ln_beta(jf * r, (nf - jf) * r)
            })
        }
        SpacingFamily::Multinomial => sum_range(top, g, m, |j| {
            let q = j as f64 / n as f64;
            let x = g - j;
            ln_choose(m, x) + ln_pow(q, x as f64) + ln_pow(1.0 - q, (m - x) as f64)
        }),
        SpacingFamily::Mh { r } => {
            let norm = ln_choose(r * n, m);
            sum_range(top, g, m, |j| {
                let x = g - j;
                ln_choose(j * r, x) + ln_choose(r * n - j * r, m - x) - norm
            })
        }
    };
    Ok(v)
}

// sum over j in 1..=top with 0 <= g - j <= m.
fn sum_range(top: u64, g: u64, m: u64, term: impl Fn(u64) -> f64) -> f64 {
    let mut acc = KahanSum::new();
    for j in 1..=top {
        if g - j > m {
            continue;
        }
        let t = term(j);
        if t > f64::NEG_INFINITY {
            acc.add(libm::exp(t));
        }
    }
    acc.value()
}

fn population_of(spacings: &SpacingVectorDist) -> usize {
    spacings.total() as usize + spacings.dim()
}

fn check_gap(gap: usize, population: usize) -> Result<()> {
    if gap == 0 || gap >= population {
        Err(Error::domain(format!(
            "gap {gap} must lie in 1..={}",
            population.saturating_sub(1)
        )))
    } else {
        Ok(())
    }
}

/// Joint inclusion probability of two units at circular distance `gap` in a
/// fixed-size circular design with uniform start.
pub fn pi_joint_fixed(spacings: &SpacingVectorDist, gap: usize) -> Result<f64> {
    let n = spacings.dim();
    Ok(n as f64 / population_of(spacings) as f64 * circular_conditional(spacings, gap)?)
}

/// Same as [`pi_joint_fixed`] through the generic sum-distribution route.
pub fn pi_joint_fixed_generic(spacings: &SpacingVectorDist, gap: usize) -> Result<f64> {
    let n = spacings.dim();
    Ok(n as f64 / population_of(spacings) as f64 * circular_conditional_generic(spacings, gap)?)
}

/// `f_j(x)` for `1 <= j <= n`, `0 <= x <= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacingSumTable {
    population: usize,
    size: usize,
    values: Vec<f64>,
}

impl SpacingSumTable {
    pub fn new(spacings: &SpacingVectorDist) -> Result<Self> {
        let population = population_of(spacings);
        let size = spacings.dim();
        let width = population + 1;
        let mut values = vec![0.0; (size + 1) * width];
        for j in 1..=size {
            for x in j..=population {
                values[j * width + x] = spacing_sum_pmf(spacings, j, x as u64)?;
            }
        }
        Ok(Self {
            population,
            size,
            values,
        })
    }

    pub fn get(&self, j: usize, x: usize) -> f64 {
        if j == 0 || j > self.size || x > self.population {
            0.0
        } else {
            self.values[j * (self.population + 1) + x]
        }
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

/// Row sums of the matrix mapping the start distribution to first-order
/// inclusion probabilities of a circular design. Every row must sum to `n`.
pub fn matrix_a_rowsums(table: &SpacingSumTable) -> Result<Vec<f64>> {
    let big_n = table.population();
    let n = table.size();
    let cond = |x: usize| -> f64 {
        (1..=x.min(n))
            .map(|j| table.get(j, x))
            .collect::<KahanSum>()
            .value()
    };
    let mut sums = Vec::with_capacity(big_n);
    for k in 1..=big_n {
        let mut acc = KahanSum::new();
        for t in 1..=big_n {
            let a = match t.cmp(&k) {
                core::cmp::Ordering::Equal => 1.0,
                core::cmp::Ordering::Less => cond(k - t),
                core::cmp::Ordering::Greater => cond(big_n + k - t),
            };
            acc.add(a);
        }
        let s = acc.value();
        if (s - n as f64).abs() > CONSISTENCY_TOLERANCE {
            return Err(Error::Consistency(format!(
                "row {k} of the start-to-inclusion matrix sums to {s}, expected {n}"
            )));
        }
        sums.push(s);
    }
    Ok(sums)
}

/// `Delta_kl = pi_kl - pi_k pi_l` for `k != l`.
pub fn delta(pi_k: f64, pi_l: f64, pi_kl: f64) -> f64 {
    pi_kl - pi_k * pi_l
}

/// `Delta_kk = pi_k (1 - pi_k)`.
pub fn delta_self(pi_k: f64) -> f64 {
    pi_k * (1.0 - pi_k)
}

/// Read access to first- and second-order inclusion probabilities.
pub trait InclusionProbabilities {
    fn population(&self) -> usize;
    /// `pi_k`, 1-based.
    fn pi(&self, k: usize) -> f64;
    /// `pi_kl` for `k != l`, 1-based; `pi_kk = pi_k`.
    fn pikl(&self, k: usize, l: usize) -> f64;

    fn delta(&self, k: usize, l: usize) -> f64 {
        if k == l {
            delta_self(self.pi(k))
        } else {
            delta(self.pi(k), self.pi(l), self.pikl(k, l))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Layout {
    /// Conditional probability indexed by circular gap.
    Circular,
    /// Conditional probability indexed by `l - k`, `k < l`.
    Renewal,
}

/// Inclusion probabilities of a design, stored as the first-order vector and
/// the conditional inclusion curve `Pr(l in S | k in S)` by gap.
#[derive(Debug, Clone, PartialEq)]
pub struct JointProbMatrix {
    pi: Vec<f64>,
    conditional: Vec<f64>,
    layout: Layout,
}

impl JointProbMatrix {
    pub fn for_design(design: &Design) -> Result<Self> {
        let big_n = design.population();
        match design.kind() {
            DesignKind::Circular { spacings } => Self::circular(spacings),
            DesignKind::Renewal { jump } => {
                Self::renewal_with(pi_first_renewal(jump, big_n)?, jump)
            }
            DesignKind::EquilibriumRenewal { jump } => {
                Self::renewal_with(pi_first_equilibrium(jump, big_n)?, jump)
            }
        }
    }

    pub fn circular(spacings: &SpacingVectorDist) -> Result<Self> {
        let big_n = population_of(spacings);
        let rate = spacings.dim() as f64 / big_n as f64;
        let mut conditional = vec![0.0; big_n];
        for (gap, slot) in conditional.iter_mut().enumerate().skip(1) {
            *slot = circular_conditional(spacings, gap)?;
        }
        Ok(Self {
            pi: vec![rate; big_n],
            conditional,
            layout: Layout::Circular,
        })
    }

    fn renewal_with(pi: Vec<f64>, jump: &DiscreteDist) -> Result<Self> {
        let big_n = pi.len();
        let mut conditional = vec![0.0; big_n];
        match jump {
            DiscreteDist::Geometric { .. }
            | DiscreteDist::Degenerate { .. }
            | DiscreteDist::NegBinomial { .. }
            | DiscreteDist::Poisson { .. }
            | DiscreteDist::Binomial { .. } => {
                for (gap, slot) in conditional.iter_mut().enumerate().skip(1) {
                    *slot = renewal_conditional(jump, gap)?;
                }
            }
            _ => {
                let table = convolve(jump, big_n, big_n)?;
                for (gap, slot) in conditional.iter_mut().enumerate().skip(1) {
                    *slot = table.renewal_density(gap);
                }
            }
        }
        Ok(Self {
            pi,
            conditional,
            layout: Layout::Renewal,
        })
    }

    pub fn pi_vec(&self) -> &[f64] {
        &self.pi
    }

    /// `Pr(l in S | k in S)` at `gap`, `1 <= gap < N`.
    pub fn conditional(&self, gap: usize) -> f64 {
        self.conditional.get(gap).copied().unwrap_or(0.0)
    }

    pub fn is_circular(&self) -> bool {
        self.layout == Layout::Circular
    }

    /// `(gap, pi_{1,1+gap}, Delta_{1,1+gap})` for `gap = 1..N-1`.
    pub fn curve(&self) -> Vec<(usize, f64, f64)> {
        (1..self.pi.len())
            .map(|gap| {
                let pkl = self.pikl(1, 1 + gap);
                (gap, pkl, self.delta(1, 1 + gap))
            })
            .collect()
    }
}

impl InclusionProbabilities for JointProbMatrix {
    fn population(&self) -> usize {
        self.pi.len()
    }

    fn pi(&self, k: usize) -> f64 {
        self.pi[k - 1]
    }

    fn pikl(&self, k: usize, l: usize) -> f64 {
        if k == l {
            return self.pi(k);
        }
        let (lo, hi) = if k < l { (k, l) } else { (l, k) };
        self.pi(lo) * self.conditional[hi - lo]
    }
}
