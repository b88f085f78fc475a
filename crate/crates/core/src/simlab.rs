//! Replicated simulation study on a trended, autocorrelated population.
//!
//! The population is `y_k = k + z_k` with an AR(1) noise `z`. Each design is
//! drawn `reps` times; every replicate estimates the population mean with the
//! HT estimator and a variance estimator (Sen-Yates-Grundy for fixed-size
//! designs, HT otherwise) and builds a normal confidence interval.
//!
//! Replicates use independent ChaCha20 streams keyed by
//! `(seed, design index, replicate index)`, and summaries reduce outcomes in
//! replicate order, so any execution order gives identical reports.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::designs::{Design, DesignKind};
use crate::error::{Error, Result};
use crate::estimation::{confidence_interval, ht_total, var_ht, PopulationData};
use crate::inclusion::{InclusionProbabilities, JointProbMatrix};
use crate::spacing_vectors::SpacingFamily;
use crate::special::KahanSum;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedDesign {
    pub name: String,
    pub design: Design,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub population: usize,
    pub sample_size: usize,
    pub reps: usize,
    pub seed: u64,
    pub designs: Vec<NamedDesign>,
    pub ar_coefficient: f64,
    pub noise_sd: f64,
    pub ci_level: f64,
}

impl StudyConfig {
    /// The ten designs of the reference study on `N = 200`, `n = 50`.
    pub fn reference(reps: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            population: 200,
            sample_size: 50,
            reps,
            seed,
            designs: designs_of_paper(200, 50)?,
            ar_coefficient: 0.6,
            noise_sd: 0.3,
            ci_level: 0.95,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::domain("reps must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.ar_coefficient) {
            return Err(Error::domain(format!(
                "AR coefficient {} must lie in [0, 1)",
                self.ar_coefficient
            )));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::domain(format!(
                "noise sd {} must be positive",
                self.noise_sd
            )));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::domain(format!(
                "confidence level {} must lie in (0, 1)",
                self.ci_level
            )));
        }
        if self.sample_size == 0 || self.sample_size > self.population {
            return Err(Error::domain(format!(
                "sample size {} must lie in 1..={}",
                self.sample_size, self.population
            )));
        }
        for d in &self.designs {
            if d.design.population() != self.population {
                return Err(Error::domain(format!(
                    "design {} has population {}, the study uses {}",
                    d.name,
                    d.design.population(),
                    self.population
                )));
            }
        }
        Ok(())
    }
}

/// MNH `r` in {0.5, 1, 5, 10, 50}, multinomial, MH `r` in {50, 10, 6, 4},
/// in decreasing order of spacing variance.
pub fn designs_of_paper(population: usize, size: usize) -> Result<Vec<NamedDesign>> {
    let mut out = Vec::with_capacity(10);
    for r in [0.5, 1.0, 5.0, 10.0, 50.0] {
        let name = if r == 1.0 {
            String::from("MNH r=1 (SRS)")
        } else {
            format!("MNH r={r}")
        };
        out.push(NamedDesign {
            name,
            design: Design::circular(population, size, SpacingFamily::Mnh { r })?,
        });
    }
    out.push(NamedDesign {
        name: String::from("MULT"),
        design: Design::circular(population, size, SpacingFamily::Multinomial)?,
    });
    for r in [50, 10, 6, 4] {
        out.push(NamedDesign {
            name: format!("MH r={r}"),
            design: Design::circular(population, size, SpacingFamily::Mh { r })?,
        });
    }
    Ok(out)
}

/// `y_k = k + z_k`, `z_k = rho z_{k-1} + e_k`, `e_k ~ N(0, sd^2)`, with `z_0`
/// drawn from the stationary law.
pub fn trend_ar1<R: Rng + ?Sized>(population: usize, rho: f64, sd: f64, rng: &mut R) -> Vec<f64> {
    let z0: f64 = rng.sample(StandardNormal);
    let mut z = z0 * sd / libm::sqrt(1.0 - rho * rho);
    (1..=population)
        .map(|k| {
            let e: f64 = rng.sample(StandardNormal);
            z = rho * z + sd * e;
            k as f64 + z
        })
        .collect()
}

pub fn gen_population<R: Rng + ?Sized>(cfg: &StudyConfig, rng: &mut R) -> Result<PopulationData> {
    cfg.validate()?;
    PopulationData::new(trend_ar1(
        cfg.population,
        cfg.ar_coefficient,
        cfg.noise_sd,
        rng,
    ))
}

/// RNG for the population of a study.
pub fn population_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// RNG for replicate `rep` of design `design`. Streams never collide with
/// the population stream or with each other for `rep < 2^40`.
pub fn replicate_rng(seed: u64, design: usize, rep: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((design as u64 + 1) << 40) | rep as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReplicateOutcome {
    Estimate {
        estimate: f64,
        variance: f64,
        covered: bool,
    },
    /// A sampled pair had zero joint inclusion probability.
    Excluded,
}

/// `Delta_kl / pi_kl` by circular gap for a fixed-size circular design;
/// `None` where `pi_kl = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SygWeights {
    rate: f64,
    weights: Vec<Option<f64>>,
}

impl SygWeights {
    pub fn new(matrix: &JointProbMatrix) -> Self {
        let big_n = matrix.population();
        let rate = matrix.pi(1);
        let mut weights = Vec::with_capacity(big_n);
        weights.push(None);
        for gap in 1..big_n {
            let pkl = matrix.pikl(1, 1 + gap);
            weights.push((pkl > 0.0).then(|| 1.0 - rate * rate / pkl));
        }
        Self { rate, weights }
    }

    /// Whether some gap has a zero joint probability.
    pub fn has_null_gaps(&self) -> bool {
        self.weights[1..].iter().any(Option::is_none)
    }

    /// SYG estimate of the variance of the HT total, `None` if some sampled
    /// pair is not estimable.
    pub fn var_total(&self, units: &[usize], y: &[f64]) -> Option<f64> {
        let mut acc = KahanSum::new();
        for (a, &k) in units.iter().enumerate() {
            let yk = y[k - 1];
            for &l in &units[a + 1..] {
                let w = self.weights[l - k]?;
                let d = yk - y[l - 1];
                acc.add(-d * d * w);
            }
        }
        Some(acc.value() / (self.rate * self.rate))
    }
}

#[derive(Debug, Clone)]
enum Prepared {
    Circular(SygWeights),
    General(JointProbMatrix),
}

/// Per-design summary.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSummary {
    pub name: String,
    /// `100 * mean(estimate - true mean) / SE`.
    pub br: f64,
    /// Simulation standard deviation of the estimates.
    pub se: f64,
    /// Square root of the mean variance estimate.
    pub revar: f64,
    /// Standard deviation of the variance estimates over the simulation
    /// variance of the estimates.
    pub cv: f64,
    /// Percentage of intervals containing the true mean.
    pub coverage: f64,
    pub reps: usize,
    pub excluded: usize,
    pub null_joint_gaps: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub seed: u64,
    pub reps: usize,
    pub population_mean: f64,
    pub designs: Vec<DesignSummary>,
}

/// A configured study with its population and per-design precomputation.
#[derive(Debug, Clone)]
pub struct Study {
    cfg: StudyConfig,
    population: PopulationData,
    true_mean: f64,
    prepared: Vec<Prepared>,
}

impl Study {
    pub fn new(cfg: StudyConfig) -> Result<Self> {
        let population = gen_population(&cfg, &mut population_rng(cfg.seed))?;
        let mut prepared = Vec::with_capacity(cfg.designs.len());
        for d in &cfg.designs {
            let matrix = JointProbMatrix::for_design(&d.design)?;
            prepared.push(match d.design.kind() {
                DesignKind::Circular { .. } => Prepared::Circular(SygWeights::new(&matrix)),
                _ => Prepared::General(matrix),
            });
        }
        let true_mean = population.mean();
        Ok(Self {
            cfg,
            population,
            true_mean,
            prepared,
        })
    }

    pub fn config(&self) -> &StudyConfig {
        &self.cfg
    }

    pub fn population(&self) -> &PopulationData {
        &self.population
    }

    pub fn true_mean(&self) -> f64 {
        self.true_mean
    }

    /// Runs replicate `rep` of design `index`.
    pub fn replicate(&self, index: usize, rep: usize) -> ReplicateOutcome {
        let design = &self.cfg.designs[index].design;
        let mut rng = replicate_rng(self.cfg.seed, index, rep);
        let big_n = self.cfg.population as f64;
        let y = self.population.values();
        let (total, var_total) = match &self.prepared[index] {
            Prepared::Circular(w) => {
                let mut units = Vec::with_capacity(self.cfg.sample_size);
                let mut scratch = Vec::with_capacity(self.cfg.sample_size);
                design
                    .draw_circular_units(&mut rng, &mut units, &mut scratch)
                    .expect("prepared as circular");
                let total = units
                    .iter()
                    .map(|&k| y[k - 1])
                    .collect::<KahanSum>()
                    .value()
                    / w.rate;
                match w.var_total(&units, y) {
                    Some(v) => (total, v),
                    None => return ReplicateOutcome::Excluded,
                }
            }
            Prepared::General(m) => {
                let units = design.draw(&mut rng).units;
                let total = ht_total(&units, &self.population, m);
                let var = var_ht(&units, &self.population, m);
                match (total, var) {
                    (Ok(t), Ok(v)) => (t, v),
                    _ => return ReplicateOutcome::Excluded,
                }
            }
        };
        let estimate = total / big_n;
        let variance = var_total / (big_n * big_n);
        let covered = if variance <= 0.0 {
            // degenerate interval
            (estimate - self.true_mean).abs() <= 1e-9 * (1.0 + self.true_mean.abs())
        } else {
            match confidence_interval(estimate, variance, self.cfg.ci_level) {
                Ok((lo, hi)) => lo <= self.true_mean && self.true_mean <= hi,
                Err(_) => false,
            }
        };
        ReplicateOutcome::Estimate {
            estimate,
            variance,
            covered,
        }
    }

    /// Reduces outcomes, given in replicate order, for design `index`.
    pub fn summarize(&self, index: usize, outcomes: &[ReplicateOutcome]) -> DesignSummary {
        let mut est = Vec::with_capacity(outcomes.len());
        let mut var = Vec::with_capacity(outcomes.len());
        let mut covered = 0usize;
        let mut excluded = 0usize;
        for o in outcomes {
            match *o {
                ReplicateOutcome::Estimate {
                    estimate,
                    variance,
                    covered: c,
                } => {
                    est.push(estimate);
                    var.push(variance);
                    covered += c as usize;
                }
                ReplicateOutcome::Excluded => excluded += 1,
            }
        }
        let (mean_est, var_est) = mean_and_variance(&est);
        let (mean_var, var_var) = mean_and_variance(&var);
        let se = libm::sqrt(var_est);
        let bias = mean_est - self.true_mean;
        let br = if se > 0.0 { 100.0 * bias / se } else { 0.0 };
        let cv = if var_est > 0.0 {
            libm::sqrt(var_var) / var_est
        } else {
            0.0
        };
        let coverage = if est.is_empty() {
            0.0
        } else {
            100.0 * covered as f64 / est.len() as f64
        };
        let null_joint_gaps = match &self.prepared[index] {
            Prepared::Circular(w) => w.has_null_gaps(),
            Prepared::General(_) => false,
        };
        DesignSummary {
            name: self.cfg.designs[index].name.clone(),
            br,
            se,
            revar: libm::sqrt(mean_var.max(0.0)),
            cv,
            coverage,
            reps: outcomes.len(),
            excluded,
            null_joint_gaps,
        }
    }

    /// Sequential run of every design.
    pub fn run(&self) -> StudyReport {
        let designs = (0..self.cfg.designs.len())
            .map(|i| {
                let outcomes: Vec<_> = (0..self.cfg.reps).map(|r| self.replicate(i, r)).collect();
                self.summarize(i, &outcomes)
            })
            .collect();
        self.report(designs)
    }

    pub fn report(&self, designs: Vec<DesignSummary>) -> StudyReport {
        StudyReport {
            seed: self.cfg.seed,
            reps: self.cfg.reps,
            population_mean: self.true_mean,
            designs,
        }
    }
}

/// Runs the study sequentially.
pub fn run_study(cfg: StudyConfig) -> Result<StudyReport> {
    Ok(Study::new(cfg)?.run())
}

// Mean and unbiased variance (divisor R - 1; 0 when R < 2).
fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let r = xs.len() as f64;
    let mean = xs.iter().copied().collect::<KahanSum>().value() / r;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = xs
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .collect::<KahanSum>()
        .value();
    (mean, ss / (r - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::var_syg;
    use alloc::vec;

    fn small_config(designs: Vec<NamedDesign>, reps: usize) -> StudyConfig {
        StudyConfig {
            population: 60,
            sample_size: 12,
            reps,
            seed: 42,
            designs,
            ar_coefficient: 0.6,
            noise_sd: 0.3,
            ci_level: 0.95,
        }
    }

    #[test]
    fn noiseless_population_is_the_trend() {
        let mut rng = population_rng(1);
        let y = trend_ar1(20, 0.6, 0.0, &mut rng);
        assert_eq!(y, (1..=20).map(|k| k as f64).collect::<Vec<_>>());
    }

    #[test]
    fn noise_is_ar1() {
        let mut rng = population_rng(7);
        let y = trend_ar1(100_000, 0.6, 0.3, &mut rng);
        let z: Vec<f64> = y.iter().enumerate().map(|(i, v)| v - (i + 1) as f64).collect();
        let (m, v) = mean_and_variance(&z);
        let lag: f64 = z.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>()
            / (z.len() - 1) as f64;
        assert!((lag / v - 0.6).abs() < 0.01);
        assert!((v - 0.09 / 0.64).abs() < 0.01);
    }

    #[test]
    fn reference_population_mean() {
        let cfg = StudyConfig::reference(1, 3).unwrap();
        let pop = gen_population(&cfg, &mut population_rng(3)).unwrap();
        assert!((pop.mean() - 100.5).abs() < 0.2);
    }

    #[test]
    fn paper_designs_are_ordered_by_spacing_variance() {
        let ds = designs_of_paper(200, 50).unwrap();
        assert_eq!(ds.len(), 10);
        assert_eq!(
            ds[1].design,
            Design::circular(200, 50, SpacingFamily::Mnh { r: 1.0 }).unwrap()
        );
        let vars: Vec<f64> = ds
            .iter()
            .map(|d| match d.design.kind() {
                DesignKind::Circular { spacings } => spacings.component_variance(),
                _ => unreachable!(),
            })
            .collect();
        assert!(vars.windows(2).all(|w| w[0] > w[1]), "{vars:?}");
    }

    #[test]
    fn weights_match_generic_syg() {
        let d = Design::circular(40, 8, SpacingFamily::Mnh { r: 3.0 }).unwrap();
        let m = JointProbMatrix::for_design(&d).unwrap();
        let w = SygWeights::new(&m);
        let mut rng = population_rng(5);
        let y = trend_ar1(40, 0.6, 0.3, &mut rng);
        let pop = PopulationData::new(y.clone()).unwrap();
        for rep in 0..50 {
            let units = d.draw(&mut replicate_rng(5, 0, rep)).units;
            let a = w.var_total(&units, &y).unwrap();
            let b = var_syg(&units, &pop, &m).unwrap();
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn census_has_no_error() {
        let mut cfg = small_config(vec![], 50);
        cfg.sample_size = 60;
        cfg.designs = vec![NamedDesign {
            name: "census".into(),
            design: Design::circular(60, 60, SpacingFamily::Multinomial).unwrap(),
        }];
        let rep = run_study(cfg).unwrap();
        let s = &rep.designs[0];
        assert!(s.se < 1e-12);
        assert_eq!(s.coverage, 100.0);
        assert_eq!(s.excluded, 0);
    }

    #[test]
    fn srs_variance_matches_classical_formula() {
        let srs = NamedDesign {
            name: "srs".into(),
            design: Design::circular(60, 12, SpacingFamily::Mnh { r: 1.0 }).unwrap(),
        };
        let reps = 20_000;
        let study = Study::new(small_config(vec![srs], reps)).unwrap();
        let rep = study.run();
        let (_, s2) = mean_and_variance(study.population().values());
        let want = (1.0 - 12.0 / 60.0) * s2 / 12.0;
        let got = rep.designs[0].se * rep.designs[0].se;
        // sd of a sample variance is about var * sqrt(2 / (R - 1)) for
        // near-normal estimates
        let sd = want * libm::sqrt(2.0 / (reps as f64 - 1.0));
        assert!((got - want).abs() < 3.0 * sd, "{got} vs {want}");
    }

    #[test]
    fn replicates_are_reproducible_in_any_order() {
        let ds = designs_of_paper(60, 12).unwrap();
        let study = Study::new(small_config(ds, 200)).unwrap();
        let a = study.run();
        let b = Study::new(study.config().clone()).unwrap().run();
        assert_eq!(a, b);
        let rev: Vec<_> = (0..200).rev().map(|r| study.replicate(3, r)).collect();
        let fwd: Vec<_> = rev.into_iter().rev().collect();
        assert_eq!(study.summarize(3, &fwd), a.designs[3]);
    }

    #[test]
    fn renewal_designs_use_ht_variance() {
        let d = NamedDesign {
            name: "poisson".into(),
            design: Design::equilibrium(60, crate::dists::DiscreteDist::Poisson { lambda: 4.0 })
                .unwrap(),
        };
        let rep = run_study(small_config(vec![d], 2000)).unwrap();
        assert_eq!(rep.designs[0].excluded, 0);
        assert!(rep.designs[0].br.abs() < 10.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_config(vec![], 10);
        cfg.ar_coefficient = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_config(vec![], 0);
        assert!(cfg.validate().is_err());
        cfg.reps = 1;
        cfg.noise_sd = 0.0;
        assert!(cfg.validate().is_err());
    }
}
