//! Horvitz-Thompson estimation with two variance estimators.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::inclusion::InclusionProbabilities;
use crate::special::{normal_quantile, KahanSum};

/// Values of the interest variable for units `1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationData {
    y: Vec<f64>,
}

impl PopulationData {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::domain("population must have at least one unit"));
        }
        if let Some(k) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("value of unit {} is not finite", k + 1)));
        }
        Ok(Self { y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `y_k`, 1-based.
    pub fn value(&self, k: usize) -> f64 {
        self.y[k - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn total(&self) -> f64 {
        self.y.iter().copied().collect::<KahanSum>().value()
    }

    pub fn mean(&self) -> f64 {
        self.total() / self.y.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceMethod {
    /// Horvitz-Thompson form.
    Ht,
    /// Sen-Yates-Grundy form, fixed-size designs only.
    Syg,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub point: f64,
    pub variance: f64,
    /// `None` when the variance estimate is negative.
    pub ci: Option<(f64, f64)>,
    pub method: VarianceMethod,
}

fn check_units<P: InclusionProbabilities + ?Sized>(
    units: &[usize],
    pop: &PopulationData,
    probs: &P,
) -> Result<()> {
    if probs.population() != pop.len() {
        return Err(Error::domain(format!(
            "population has {} units but the inclusion probabilities cover {}",
            pop.len(),
            probs.population()
        )));
    }
    for &k in units {
        if k == 0 || k > pop.len() {
            return Err(Error::domain(format!(
                "unit {k} lies outside 1..={}",
                pop.len()
            )));
        }
        let p = probs.pi(k);
        if !(p > 0.0) {
            return Err(Error::domain(format!(
                "unit {k} was sampled but has inclusion probability {p}"
            )));
        }
    }
    Ok(())
}

fn joint(probs: &(impl InclusionProbabilities + ?Sized), k: usize, l: usize) -> Result<f64> {
    let v = probs.pikl(k, l);
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::NonEstimable { k, l })
    }
}

/// `sum_{k in S} y_k / pi_k`.
pub fn ht_total<P: InclusionProbabilities + ?Sized>(
    units: &[usize],
    pop: &PopulationData,
    probs: &P,
) -> Result<f64> {
    check_units(units, pop, probs)?;
    Ok(units
        .iter()
        .map(|&k| pop.value(k) / probs.pi(k))
        .collect::<KahanSum>()
        .value())
}

/// `sum_{k,l in S} y_k y_l / (pi_k pi_l) * Delta_kl / pi_kl`, `pi_kk = pi_k`.
pub fn var_ht<P: InclusionProbabilities + ?Sized>(
    units: &[usize],
    pop: &PopulationData,
    probs: &P,
) -> Result<f64> {
    check_units(units, pop, probs)?;
    let mut acc = KahanSum::new();
    for (a, &k) in units.iter().enumerate() {
        let pk = probs.pi(k);
        let ek = pop.value(k) / pk;
        acc.add(ek * ek * (1.0 - pk));
        for &l in &units[a + 1..] {
            let pl = probs.pi(l);
            let pkl = joint(probs, k, l)?;
            let el = pop.value(l) / pl;
            acc.add(2.0 * ek * el * (pkl - pk * pl) / pkl);
        }
    }
    Ok(acc.value())
}

/// `-1/2 sum_{k != l in S} (y_k/pi_k - y_l/pi_l)^2 Delta_kl / pi_kl`.
pub fn var_syg<P: InclusionProbabilities + ?Sized>(
    units: &[usize],
    pop: &PopulationData,
    probs: &P,
) -> Result<f64> {
    check_units(units, pop, probs)?;
    let mut acc = KahanSum::new();
    for (a, &k) in units.iter().enumerate() {
        let pk = probs.pi(k);
        let ek = pop.value(k) / pk;
        for &l in &units[a + 1..] {
            let pl = probs.pi(l);
            let pkl = joint(probs, k, l)?;
            let d = ek - pop.value(l) / pl;
            acc.add(-d * d * (pkl - pk * pl) / pkl);
        }
    }
    Ok(acc.value())
}

/// Normal-theory interval `point +/- z sqrt(variance)` at confidence `level`.
pub fn confidence_interval(point: f64, variance: f64, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("confidence level {level} must lie in (0, 1)")));
    }
    if variance.is_nan() {
        return Err(Error::domain("variance is NaN"));
    }
    if variance < 0.0 {
        return Err(Error::NegativeVariance(variance));
    }
    let half = normal_quantile(0.5 + level / 2.0) * libm::sqrt(variance);
    Ok((point - half, point + half))
}

/// Total estimate with the chosen variance estimator and interval.
pub fn estimate_total<P: InclusionProbabilities + ?Sized>(
    units: &[usize],
    pop: &PopulationData,
    probs: &P,
    method: VarianceMethod,
    level: f64,
) -> Result<EstimateResult> {
    let point = ht_total(units, pop, probs)?;
    let variance = match method {
        VarianceMethod::Ht => var_ht(units, pop, probs)?,
        VarianceMethod::Syg => var_syg(units, pop, probs)?,
    };
    let ci = match confidence_interval(point, variance, level) {
        Ok(ci) => Some(ci),
        Err(Error::NegativeVariance(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(EstimateResult {
        point,
        variance,
        ci,
        method,
    })
}

/// Mean estimate: the total estimate scaled by `1 / N`.
pub fn estimate_mean<P: InclusionProbabilities + ?Sized>(
    units: &[usize],
    pop: &PopulationData,
    probs: &P,
    method: VarianceMethod,
    level: f64,
) -> Result<EstimateResult> {
    let t = estimate_total(units, pop, probs, method, level)?;
    let n = pop.len() as f64;
    Ok(EstimateResult {
        point: t.point / n,
        variance: t.variance / (n * n),
        ci: t.ci.map(|(a, b)| (a / n, b / n)),
        method,
    })
}
