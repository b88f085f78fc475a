//! Sampling designs built from spacings between selected units.
//!
//! Three classes are supported:
//!
//! * simple renewal chains: the sample is the set of partial sums of i.i.d.
//!   positive jumps that fall in `{1..N}`;
//! * equilibrium renewal chains: as above, but the first selected unit is
//!   drawn from the forward transform of the jump law so every unit has
//!   inclusion probability `1 / E(J)`;
//! * fixed-size circular designs: a uniform start `J0` followed by `n`
//!   exchangeable spacings summing to `N`, read modulo `N`.
//!
//! Unit indexes are 1-based.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::dists::DiscreteDist;
use crate::error::{Error, Result};
use crate::spacing_vectors::{SpacingFamily, SpacingVectorDist};

#[derive(Debug, Clone, PartialEq)]
pub enum DesignKind {
    /// `jump` is the law of `J - 1`.
    Renewal { jump: DiscreteDist },
    /// `jump` is the law of `J - 1`; the delay is its forward transform.
    EquilibriumRenewal { jump: DiscreteDist },
    /// Spacings `J - 1_n` with dimension `n` and total `N - n`.
    Circular { spacings: SpacingVectorDist },
}

/// A sampling design on the population `{1..N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    kind: DesignKind,
    population: usize,
}

/// One realized sample.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SampleDraw {
    /// Selected units, strictly increasing, 1-based.
    pub units: Vec<usize>,
    /// Realized spacings. For renewal designs, `units[i]` is the sum of
    /// `spacings[..=i]` (the first entry is `J0` for equilibrium chains and
    /// `J1` otherwise). For circular designs, `J0` followed by `J1..Jn`.
    pub spacings: Vec<u64>,
    /// Seed of the stream the draw came from, when known.
    pub seed: Option<u64>,
}

impl Design {
    pub fn renewal(population: usize, jump: DiscreteDist) -> Result<Self> {
        jump.validate()?;
        check_population(population)?;
        Ok(Self {
            kind: DesignKind::Renewal { jump },
            population,
        })
    }

    pub fn equilibrium(population: usize, jump: DiscreteDist) -> Result<Self> {
        jump.validate()?;
        check_population(population)?;
        Ok(Self {
            kind: DesignKind::EquilibriumRenewal { jump },
            population,
        })
    }

    pub fn circular(population: usize, size: usize, family: SpacingFamily) -> Result<Self> {
        check_population(population)?;
        if size == 0 || size > population {
            return Err(Error::domain(format!(
                "sample size {size} must lie in 1..={population}"
            )));
        }
        let spacings = SpacingVectorDist::new(family, (population - size) as u64, size)?;
        Ok(Self {
            kind: DesignKind::Circular { spacings },
            population,
        })
    }

    pub fn kind(&self) -> &DesignKind {
        &self.kind
    }

    /// `N`.
    pub fn population(&self) -> usize {
        self.population
    }

    /// `n` for fixed-size designs.
    pub fn sample_size(&self) -> Option<usize> {
        match &self.kind {
            DesignKind::Circular { spacings } => Some(spacings.dim()),
            _ => None,
        }
    }

    pub fn is_fixed_size(&self) -> bool {
        self.sample_size().is_some()
    }

    /// `1 / E(J)` for renewal kinds, `n / N` for circular designs.
    pub fn rate(&self) -> f64 {
        match &self.kind {
            DesignKind::Renewal { jump } | DesignKind::EquilibriumRenewal { jump } => {
                1.0 / (1.0 + jump.mean())
            }
            DesignKind::Circular { spacings } => spacings.dim() as f64 / self.population as f64,
        }
    }

    /// Draws one sample.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> SampleDraw {
        match &self.kind {
            DesignKind::Renewal { jump } => renewal_chain(self.population, jump, None, rng),
            DesignKind::EquilibriumRenewal { jump } => {
                let delay = jump.forward().expect("validated at construction");
                renewal_chain(self.population, jump, Some(&delay), rng)
            }
            DesignKind::Circular { spacings } => {
                let mut draw = SampleDraw::default();
                let mut buf = Vec::with_capacity(spacings.dim());
                circular_into(self.population, spacings, rng, &mut draw.units, &mut buf);
                draw.spacings.push(draw.units_start());
                draw.spacings.extend(buf.iter().map(|x| x + 1));
                draw.units.sort_unstable();
                draw
            }
        }
    }

    /// Fills `units` with a circular draw (sorted), reusing `scratch`.
    /// Hot-loop variant of [`draw`](Self::draw) for fixed-size designs.
    pub fn draw_circular_units<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        units: &mut Vec<usize>,
        scratch: &mut Vec<u64>,
    ) -> Result<()> {
        let DesignKind::Circular { spacings } = &self.kind else {
            return Err(Error::domain("design is not a circular design"));
        };
        circular_into(self.population, spacings, rng, units, scratch);
        units.sort_unstable();
        Ok(())
    }
}

impl SampleDraw {
    // Before sorting, the last circular position is J0 itself.
    fn units_start(&self) -> u64 {
        *self.units.last().unwrap_or(&0) as u64
    }
}

fn check_population(population: usize) -> Result<()> {
    if population == 0 {
        Err(Error::domain("population size must be at least 1"))
    } else {
        Ok(())
    }
}

fn renewal_chain<R: Rng + ?Sized>(
    population: usize,
    jump: &DiscreteDist,
    delay: Option<&DiscreteDist>,
    rng: &mut R,
) -> SampleDraw {
    let mut draw = SampleDraw::default();
    let n = population as u64;
    let mut pos = match delay {
        Some(d) => {
            let j0 = 1u64.saturating_add(d.sample(rng));
            if j0 > n {
                return draw;
            }
            draw.spacings.push(j0);
            draw.units.push(j0 as usize);
            j0
        }
        None => 0,
    };
    loop {
        let j = 1u64.saturating_add(jump.sample(rng));
        pos = pos.saturating_add(j);
        if pos > n {
            return draw;
        }
        draw.spacings.push(j);
        draw.units.push(pos as usize);
    }
}

// Units come out in circular order starting after J0 and ending at J0.
fn circular_into<R: Rng + ?Sized>(
    population: usize,
    spacings: &SpacingVectorDist,
    rng: &mut R,
    units: &mut Vec<usize>,
    scratch: &mut Vec<u64>,
) {
    let start = rng.random_range(1..=population);
    spacings.sample_into(rng, scratch);
    units.clear();
    let mut pos = start;
    for &x in scratch.iter() {
        pos += x as usize + 1;
        units.push((pos - 1) % population + 1);
    }
}

/// Draws from a simple renewal design.
pub fn draw_renewal<R: Rng + ?Sized>(design: &Design, rng: &mut R) -> Result<SampleDraw> {
    match design.kind() {
        DesignKind::Renewal { .. } => Ok(design.draw(rng)),
        _ => Err(Error::domain("draw_renewal needs a simple renewal design")),
    }
}

/// Draws from an equilibrium renewal design.
pub fn draw_equilibrium<R: Rng + ?Sized>(design: &Design, rng: &mut R) -> Result<SampleDraw> {
    match design.kind() {
        DesignKind::EquilibriumRenewal { .. } => Ok(design.draw(rng)),
        _ => Err(Error::domain("draw_equilibrium needs an equilibrium renewal design")),
    }
}

/// Draws from a fixed-size circular design.
pub fn draw_circular<R: Rng + ?Sized>(design: &Design, rng: &mut R) -> Result<SampleDraw> {
    match design.kind() {
        DesignKind::Circular { .. } => Ok(design.draw(rng)),
        _ => Err(Error::domain("draw_circular needs a circular design")),
    }
}

/// Circular spacings `x_{i+1} - x_i` and the wrap gap `N + x_1 - x_n` of a
/// sorted sample, each minus one.
pub fn circular_gaps(population: usize, units: &[usize], out: &mut Vec<u64>) {
    out.clear();
    for w in units.windows(2) {
        out.push((w[1] - w[0] - 1) as u64);
    }
    if let (Some(&first), Some(&last)) = (units.first(), units.last()) {
        out.push((population + first - last - 1) as u64);
    }
}

/// Probability of the sample `units` under a circular design:
/// `P(s) = (n / N) Pr(J = spacings of s)`.
pub fn design_pmf(design: &Design, units: &[usize]) -> Result<f64> {
    let DesignKind::Circular { spacings } = design.kind() else {
        return Err(Error::domain("design_pmf needs a circular design"));
    };
    let n = spacings.dim();
    let big_n = design.population();
    if units.len() != n {
        return Err(Error::domain(format!(
            "sample has {} units, the design has fixed size {n}",
            units.len()
        )));
    }
    if units.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("sample units must be strictly increasing"));
    }
    if units[0] < 1 || units[n - 1] > big_n {
        return Err(Error::domain(format!("sample units must lie in 1..={big_n}")));
    }
    let mut gaps = Vec::with_capacity(n);
    circular_gaps(big_n, units, &mut gaps);
    Ok(n as f64 / big_n as f64 * spacings.pmf_vector(&gaps)?)
}
