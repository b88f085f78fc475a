//! Brute-force ground truth for small populations.
//!
//! Circular designs are enumerated over every `n`-subset. Renewal chains are
//! enumerated over every subset of `{1..N}` (`N <= 16`), each with its exact
//! probability: the delay (or first jump) lands on the first unit, the
//! following jumps hit the gaps exactly, and the last jump overshoots `N`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::designs::{design_pmf, Design, DesignKind};
use crate::dists::DiscreteDist;
use crate::error::{Error, Result};
use crate::inclusion::{InclusionProbabilities, JointProbMatrix};
use crate::special::{ln_choose, KahanSum};

/// Largest number of subsets a circular enumeration may visit.
pub const MAX_SUBSETS: f64 = 1e6;
/// Largest population for renewal subset enumeration.
pub const MAX_RENEWAL_POPULATION: usize = 16;
/// Smallest replicate count accepted by [`frequency_check`].
pub const MIN_FREQUENCY_REPS: usize = 10_000;

/// Every subset with its design probability, and the exact inclusion
/// probabilities they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignEnumeration {
    population: usize,
    pub entries: Vec<(Vec<usize>, f64)>,
    pub pi: Vec<f64>,
    pikl: Vec<f64>,
    pub total_mass: f64,
}

impl DesignEnumeration {
    fn from_entries(population: usize, entries: Vec<(Vec<usize>, f64)>) -> Self {
        let mut pi_acc = vec![KahanSum::new(); population];
        let mut pikl_acc = vec![KahanSum::new(); population * population];
        let mut mass = KahanSum::new();
        for (s, p) in &entries {
            if *p == 0.0 {
                continue;
            }
            mass.add(*p);
            for (a, &k) in s.iter().enumerate() {
                pi_acc[k - 1].add(*p);
                for &l in &s[a + 1..] {
                    pikl_acc[(k - 1) * population + l - 1].add(*p);
                }
            }
        }
        let pi: Vec<f64> = pi_acc.iter().map(KahanSum::value).collect();
        let mut pikl: Vec<f64> = pikl_acc.iter().map(KahanSum::value).collect();
        for k in 0..population {
            pikl[k * population + k] = pi[k];
            for l in k + 1..population {
                pikl[l * population + k] = pikl[k * population + l];
            }
        }
        Self {
            population,
            entries,
            pi,
            pikl,
            total_mass: mass.value(),
        }
    }

    /// `P(s)` for a sorted subset, zero if it was never listed.
    pub fn probability(&self, units: &[usize]) -> f64 {
        self.entries
            .iter()
            .find(|(s, _)| s == units)
            .map_or(0.0, |(_, p)| *p)
    }
}

impl InclusionProbabilities for DesignEnumeration {
    fn population(&self) -> usize {
        self.population
    }

    fn pi(&self, k: usize) -> f64 {
        self.pi[k - 1]
    }

    fn pikl(&self, k: usize, l: usize) -> f64 {
        self.pikl[(k - 1) * self.population + l - 1]
    }
}

/// Evaluates the design probability of every `n`-subset, in colex order.
pub fn enumerate_circular(design: &Design) -> Result<DesignEnumeration> {
    let Some(n) = design.sample_size() else {
        return Err(Error::domain("enumerate_circular needs a circular design"));
    };
    let big_n = design.population();
    let count = libm::exp(ln_choose(big_n as u64, n as u64));
    if count > MAX_SUBSETS + 0.5 {
        return Err(Error::TooLarge {
            subsets: count,
            limit: MAX_SUBSETS,
        });
    }
    let mut entries = Vec::with_capacity(libm::round(count) as usize);
    let mut subset: Vec<usize> = (1..=n).collect();
    loop {
        let p = design_pmf(design, &subset)?;
        entries.push((subset.clone(), p));
        if !next_colex(&mut subset, big_n) {
            break;
        }
    }
    Ok(DesignEnumeration::from_entries(big_n, entries))
}

// Advances a sorted subset of {1..N} to its colex successor.
fn next_colex(subset: &mut [usize], big_n: usize) -> bool {
    let n = subset.len();
    for i in 0..n {
        let limit = if i + 1 < n { subset[i + 1] } else { big_n + 1 };
        if subset[i] + 1 < limit {
            subset[i] += 1;
            for (j, slot) in subset.iter_mut().enumerate().take(i) {
                *slot = j + 1;
            }
            return true;
        }
    }
    false
}

/// Enumerates all `2^N` subsets of a renewal chain with their exact
/// probabilities. `jump` is the law of `J - 1`.
pub fn enumerate_renewal(
    jump: &DiscreteDist,
    population: usize,
    equilibrium: bool,
) -> Result<DesignEnumeration> {
    jump.validate()?;
    if population == 0 || population > MAX_RENEWAL_POPULATION {
        return Err(Error::TooLarge {
            subsets: libm::pow(2.0, population as f64),
            limit: libm::pow(2.0, MAX_RENEWAL_POPULATION as f64),
        });
    }
    let big_n = population;
    // step[t] = Pr(J = t), over[t] = Pr(J > t)
    let step: Vec<f64> = (0..=big_n)
        .map(|t| if t == 0 { 0.0 } else { jump.pmf_unchecked(t as u64 - 1) })
        .collect();
    let over: Vec<f64> = (0..=big_n).map(|t| jump.survival(t as u64)).collect();
    let (first, first_over) = if equilibrium {
        let delay = jump.forward()?;
        let first: Vec<f64> = (0..=big_n)
            .map(|t| if t == 0 { 0.0 } else { delay.pmf_unchecked(t as u64 - 1) })
            .collect();
        (first, delay.survival(big_n as u64))
    } else {
        (step.clone(), over[big_n])
    };

    let mut entries = Vec::with_capacity(1 << big_n);
    for mask in 0u32..(1u32 << big_n) {
        let units: Vec<usize> = (0..big_n).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect();
        let p = match (units.first(), units.last()) {
            (Some(&a), Some(&z)) => {
                let mut p = first[a];
                for w in units.windows(2) {
                    p *= step[w[1] - w[0]];
                }
                p * over[big_n - z]
            }
            _ => first_over,
        };
        entries.push((units, p));
    }
    Ok(DesignEnumeration::from_entries(big_n, entries))
}

/// Exact enumeration for any design small enough to enumerate.
pub fn enumerate(design: &Design) -> Result<DesignEnumeration> {
    match design.kind() {
        DesignKind::Circular { .. } => enumerate_circular(design),
        DesignKind::Renewal { jump } => enumerate_renewal(jump, design.population(), false),
        DesignKind::EquilibriumRenewal { jump } => {
            enumerate_renewal(jump, design.population(), true)
        }
    }
}

/// Empirical-versus-exact comparison from repeated draws.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyReport {
    pub reps: usize,
    /// Largest `|z|` over first-order inclusion frequencies.
    pub max_abs_z_inclusion: f64,
    /// Largest `|z|` over subset frequencies, when the design was enumerable.
    pub max_abs_z_subset: Option<f64>,
    /// Subsets with positive exact probability that were compared.
    pub subsets_compared: usize,
    /// Distinct samples observed (populations up to 64 units).
    pub distinct_samples: Option<usize>,
}

/// Draws `reps` samples and compares frequencies with exact probabilities.
///
/// A frequency observed where the exact probability is 0 or 1 and differs
/// from it gives an infinite `z`.
pub fn frequency_check<R: Rng + ?Sized>(
    design: &Design,
    reps: usize,
    rng: &mut R,
) -> Result<FrequencyReport> {
    if reps < MIN_FREQUENCY_REPS {
        return Err(Error::domain(format!(
            "frequency check needs at least {MIN_FREQUENCY_REPS} replicates, got {reps}"
        )));
    }
    let big_n = design.population();
    let exact = enumerate(design).ok();
    let pi: Vec<f64> = match &exact {
        Some(e) => e.pi.clone(),
        None => JointProbMatrix::for_design(design)?.pi_vec().to_vec(),
    };
    let track = big_n <= 64;
    let mut counts = vec![0u64; big_n];
    let mut subsets: BTreeMap<u64, u64> = BTreeMap::new();
    for _ in 0..reps {
        let draw = design.draw(rng);
        let mut mask = 0u64;
        for &k in &draw.units {
            counts[k - 1] += 1;
            if track {
                mask |= 1 << (k - 1);
            }
        }
        if track {
            *subsets.entry(mask).or_insert(0) += 1;
        }
    }
    let r = reps as f64;
    let max_abs_z_inclusion = counts
        .iter()
        .zip(&pi)
        .map(|(&c, &p)| z_score(c as f64 / r, p, r))
        .fold(0.0, f64::max);

    let (max_abs_z_subset, subsets_compared) = match (&exact, track) {
        (Some(e), true) => {
            let mut worst: f64 = 0.0;
            let mut compared = 0;
            let mut seen = 0u64;
            for (s, p) in &e.entries {
                let mask = s.iter().fold(0u64, |m, &k| m | 1 << (k - 1));
                let c = subsets.get(&mask).copied().unwrap_or(0);
                seen += c;
                if *p > 0.0 {
                    compared += 1;
                }
                worst = worst.max(z_score(c as f64 / r, *p, r));
            }
            // draws that fall outside the enumerated support
            if seen < reps as u64 {
                worst = f64::INFINITY;
            }
            (Some(worst), compared)
        }
        _ => (None, 0),
    };
    Ok(FrequencyReport {
        reps,
        max_abs_z_inclusion,
        max_abs_z_subset,
        subsets_compared,
        distinct_samples: track.then_some(subsets.len()),
    })
}

fn z_score(freq: f64, p: f64, reps: f64) -> f64 {
    let sd = libm::sqrt(p * (1.0 - p) / reps);
    if sd > 0.0 {
        libm::fabs(freq - p) / sd
    } else if (freq - p).abs() > 1e-12 {
        f64::INFINITY
    } else {
        0.0
    }
}
