//! JSON descriptions of distributions, designs and studies.

use serde::{Deserialize, Serialize};
use spacing_core::simlab::{designs_of_paper, NamedDesign, StudyConfig};
use spacing_core::{Design, DesignKind, DiscreteDist, SpacingFamily};

/// A univariate law on `{0, 1, ...}`, tagged by `"family"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Bernoulli { p: f64 },
    Binomial { n: u64, p: f64 },
    Geometric { p: f64 },
    NegBinomial { r: f64, p: f64 },
    Poisson { lambda: f64 },
    Hypergeometric { m: u64, r: u64, total: u64 },
    NegHypergeometric { m: u64, r: f64, total: f64 },
    Uniform { a: u64 },
    Degenerate { c: u64 },
    Forward { inner: Box<DistSpec> },
}

impl DistSpec {
    pub fn to_dist(&self) -> spacing_core::Result<DiscreteDist> {
        let d = match self {
            DistSpec::Bernoulli { p } => DiscreteDist::Bernoulli { p: *p },
            DistSpec::Binomial { n, p } => DiscreteDist::Binomial { n: *n, p: *p },
            DistSpec::Geometric { p } => DiscreteDist::Geometric { p: *p },
            DistSpec::NegBinomial { r, p } => DiscreteDist::NegBinomial { r: *r, p: *p },
            DistSpec::Poisson { lambda } => DiscreteDist::Poisson { lambda: *lambda },
            DistSpec::Hypergeometric { m, r, total } => DiscreteDist::Hypergeometric {
                m: *m,
                r: *r,
                total: *total,
            },
            DistSpec::NegHypergeometric { m, r, total } => DiscreteDist::NegHypergeometric {
                m: *m,
                r: *r,
                total: *total,
            },
            DistSpec::Uniform { a } => DiscreteDist::Uniform { a: *a },
            DistSpec::Degenerate { c } => DiscreteDist::Degenerate { c: *c },
            DistSpec::Forward { inner } => DiscreteDist::Forward(Box::new(inner.to_dist()?)),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn from_dist(d: &DiscreteDist) -> Self {
        match d {
            DiscreteDist::Bernoulli { p } => DistSpec::Bernoulli { p: *p },
            DiscreteDist::Binomial { n, p } => DistSpec::Binomial { n: *n, p: *p },
            DiscreteDist::Geometric { p } => DistSpec::Geometric { p: *p },
            DiscreteDist::NegBinomial { r, p } => DistSpec::NegBinomial { r: *r, p: *p },
            DiscreteDist::Poisson { lambda } => DistSpec::Poisson { lambda: *lambda },
            DiscreteDist::Hypergeometric { m, r, total } => DistSpec::Hypergeometric {
                m: *m,
                r: *r,
                total: *total,
            },
            DiscreteDist::NegHypergeometric { m, r, total } => DistSpec::NegHypergeometric {
                m: *m,
                r: *r,
                total: *total,
            },
            DiscreteDist::Uniform { a } => DistSpec::Uniform { a: *a },
            DiscreteDist::Degenerate { c } => DistSpec::Degenerate { c: *c },
            DiscreteDist::Forward(inner) => DistSpec::Forward {
                inner: Box::new(DistSpec::from_dist(inner)),
            },
        }
    }
}

/// Spacing family of a circular design. `srs` is shorthand for `mnh` with
/// `r = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpacingSpec {
    Mnh { r: f64 },
    Mnom,
    Mh { r: u64 },
    Srs,
}

impl SpacingSpec {
    pub fn to_family(&self) -> SpacingFamily {
        match self {
            SpacingSpec::Mnh { r } => SpacingFamily::Mnh { r: *r },
            SpacingSpec::Srs => SpacingFamily::Mnh { r: 1.0 },
            SpacingSpec::Mnom => SpacingFamily::Multinomial,
            SpacingSpec::Mh { r } => SpacingFamily::Mh { r: *r },
        }
    }

    pub fn from_family(f: SpacingFamily) -> Self {
        match f {
            SpacingFamily::Mnh { r } => SpacingSpec::Mnh { r },
            SpacingFamily::Multinomial => SpacingSpec::Mnom,
            SpacingFamily::Mh { r } => SpacingSpec::Mh { r },
        }
    }
}

/// A design, tagged by `"kind"`. Renewal jumps give the law of `J - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSpec {
    Circular {
        #[serde(rename = "N")]
        population: usize,
        n: usize,
        spacings: SpacingSpec,
    },
    Renewal {
        #[serde(rename = "N")]
        population: usize,
        jump: DistSpec,
    },
    Equilibrium {
        #[serde(rename = "N")]
        population: usize,
        jump: DistSpec,
    },
}

impl DesignSpec {
    pub fn to_design(&self) -> spacing_core::Result<Design> {
        match self {
            DesignSpec::Circular {
                population,
                n,
                spacings,
            } => Design::circular(*population, *n, spacings.to_family()),
            DesignSpec::Renewal { population, jump } => {
                Design::renewal(*population, jump.to_dist()?)
            }
            DesignSpec::Equilibrium { population, jump } => {
                Design::equilibrium(*population, jump.to_dist()?)
            }
        }
    }

    pub fn from_design(d: &Design) -> Self {
        let population = d.population();
        match d.kind() {
            DesignKind::Circular { spacings } => DesignSpec::Circular {
                population,
                n: spacings.dim(),
                spacings: SpacingSpec::from_family(spacings.family()),
            },
            DesignKind::Renewal { jump } => DesignSpec::Renewal {
                population,
                jump: DistSpec::from_dist(jump),
            },
            DesignKind::EquilibriumRenewal { jump } => DesignSpec::Equilibrium {
                population,
                jump: DistSpec::from_dist(jump),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedDesignSpec {
    pub name: String,
    pub design: DesignSpec,
}

fn default_ar() -> f64 {
    0.6
}

fn default_noise() -> f64 {
    0.3
}

fn default_level() -> f64 {
    0.95
}

/// Simulation study settings. Without `designs`, the ten reference designs
/// for `(N, n)` are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    #[serde(rename = "N")]
    pub population: usize,
    pub n: usize,
    pub reps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub designs: Option<Vec<NamedDesignSpec>>,
    #[serde(default = "default_ar")]
    pub ar_coefficient: f64,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default = "default_level")]
    pub ci_level: f64,
}

impl StudySpec {
    /// Builds the study configuration; `seed` must be set by now.
    pub fn to_config(&self, seed: u64) -> spacing_core::Result<StudyConfig> {
        let designs = match &self.designs {
            Some(list) => list
                .iter()
                .map(|d| {
                    Ok(NamedDesign {
                        name: d.name.clone(),
                        design: d.design.to_design()?,
                    })
                })
                .collect::<spacing_core::Result<Vec<_>>>()?,
            None => designs_of_paper(self.population, self.n)?,
        };
        let cfg = StudyConfig {
            population: self.population,
            sample_size: self.n,
            reps: self.reps,
            seed,
            designs,
            ar_coefficient: self.ar_coefficient,
            noise_sd: self.noise_sd,
            ci_level: self.ci_level,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_circular_form() {
        let s: DesignSpec = serde_json::from_str(
            r#"{"kind":"circular","N":200,"n":50,"spacings":{"family":"mnh","r":5.0}}"#,
        )
        .unwrap();
        let d = s.to_design().unwrap();
        assert_eq!(d, Design::circular(200, 50, SpacingFamily::Mnh { r: 5.0 }).unwrap());
    }

    #[test]
    fn srs_alias() {
        let s: DesignSpec =
            serde_json::from_str(r#"{"kind":"circular","N":10,"n":2,"spacings":{"family":"srs"}}"#)
                .unwrap();
        let back = DesignSpec::from_design(&s.to_design().unwrap());
        assert_eq!(
            back,
            DesignSpec::Circular {
                population: 10,
                n: 2,
                spacings: SpacingSpec::Mnh { r: 1.0 }
            }
        );
    }

    #[test]
    fn nested_forward_jump() {
        let s: DesignSpec = serde_json::from_str(
            r#"{"kind":"renewal","N":30,"jump":{"family":"forward","inner":{"family":"poisson","lambda":2.0}}}"#,
        )
        .unwrap();
        assert!(s.to_design().is_ok());
    }

    #[test]
    fn rejects_unknown_families_and_fields() {
        assert!(serde_json::from_str::<DesignSpec>(
            r#"{"kind":"circular","N":10,"n":2,"spacings":{"family":"zipf"}}"#
        )
        .is_err());
        assert!(serde_json::from_str::<DesignSpec>(
            r#"{"kind":"circular","N":10,"n":2,"m":3,"spacings":{"family":"mnom"}}"#
        )
        .is_err());
    }

    #[test]
    fn study_defaults() {
        let s: StudySpec = serde_json::from_str(r#"{"N":200,"n":50,"reps":10}"#).unwrap();
        let cfg = s.to_config(4).unwrap();
        assert_eq!(cfg.designs.len(), 10);
        assert_eq!(cfg.ar_coefficient, 0.6);
        assert_eq!(cfg.noise_sd, 0.3);
        assert_eq!(cfg.ci_level, 0.95);
    }
}
