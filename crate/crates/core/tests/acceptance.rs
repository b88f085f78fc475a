//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use spacing_core::designs::Design;
use spacing_core::estimation::{ht_total, var_syg, PopulationData};
use spacing_core::inclusion::{
    convolve, matrix_a_rowsums, pi_first_equilibrium, pi_first_renewal, pi_joint_fixed,
    renewal_conditional, ConvolutionTable, InclusionProbabilities, SpacingSumTable,
};
use spacing_core::oracle::enumerate_circular;
use spacing_core::simlab::{Study, StudyConfig};
use spacing_core::{DesignKind, DiscreteDist, RateFamily, SpacingFamily, SpacingVectorDist};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// Smallest r with (1 - rate) / (r rate) <= 1, guarding against rounding up
// an exact integer.
fn min_binomial_trials(rate: f64) -> u64 {
    ((1.0 - rate) / rate - 1e-9).ceil() as u64
}

fn example_one() -> Check {
    let pi = pi_first_renewal(&DiscreteDist::Bernoulli { p: 0.5 }, 4).map_err(|e| e.to_string())?;
    let want = [0.5, 0.75, 0.625, 0.6875];
    let err = pi
        .iter()
        .zip(want)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(err < 1e-12, || format!("pi = {pi:?}, max error {err:e}"))?;
    Ok(format!("pi = {pi:?}, max error {err:e}"))
}

fn equilibrium_flatness() -> Check {
    let start = Instant::now();
    let rate: f64 = 1.0 / 30.0;
    let binom_r = min_binomial_trials(rate);
    let families = [
        RateFamily::NegBinomial { r: 0.5 },
        RateFamily::NegBinomial { r: 1.0 },
        RateFamily::NegBinomial { r: 2.0 },
        RateFamily::NegBinomial { r: 8.0 },
        RateFamily::Poisson,
        RateFamily::Binomial { r: binom_r },
    ];
    let mut worst: f64 = 0.0;
    for fam in families {
        let jump = fam.jump_for_rate(rate).map_err(|e| e.to_string())?;
        let pi = pi_first_equilibrium(&jump, 300).map_err(|e| format!("{fam:?}: {e}"))?;
        let err = pi.iter().map(|p| (p - rate).abs()).fold(0.0, f64::max);
        ensure(err <= 1e-9, || format!("{fam:?}: max deviation {err:e}"))?;
        worst = worst.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("max deviation {worst:e} over 6 families, {secs:.2} s"))
}

fn bernoulli_recovery() -> Check {
    let mut worst: f64 = 0.0;
    for rate in [0.3, 1.0 / 30.0] {
        let jump = DiscreteDist::NegBinomial { r: 1.0, p: rate };
        for gap in 1..=200 {
            let pkl = rate * renewal_conditional(&jump, gap).map_err(|e| e.to_string())?;
            worst = worst.max((pkl - rate * rate).abs());
        }
    }
    ensure(worst < 1e-12, || format!("max error {worst:e}"))?;
    Ok(format!("max error {worst:e}"))
}

fn closed_forms_vs_convolution() -> Check {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for rate in [0.1, 1.0 / 30.0] {
        let rmin = min_binomial_trials(rate);
        let fams = [
            RateFamily::NegBinomial { r: 0.5 },
            RateFamily::NegBinomial { r: 2.0 },
            RateFamily::NegBinomial { r: 8.0 },
            RateFamily::Poisson,
            RateFamily::Binomial { r: rmin },
            RateFamily::Binomial { r: 2 * rmin },
        ];
        for fam in fams {
            let jump = fam.jump_for_rate(rate).map_err(|e| e.to_string())?;
            let table = convolve(&jump, 150, 150).map_err(|e| e.to_string())?;
            for gap in 1..=150 {
                let closed = rate * renewal_conditional(&jump, gap).map_err(|e| e.to_string())?;
                let generic = rate * table.renewal_density(gap);
                let err = (closed - generic).abs();
                ensure(err <= 1e-10, || {
                    format!("{fam:?} rate {rate} gap {gap}: {closed} vs {generic}")
                })?;
                worst = worst.max(err);
                count += 1;
            }
        }
    }
    Ok(format!("{count} grid points, max error {worst:e}"))
}

fn feasible_families(big_n: usize, n: usize) -> Vec<SpacingFamily> {
    let rmin = (big_n - n).div_ceil(n) as u64;
    vec![
        SpacingFamily::Mnh { r: 1.0 },
        SpacingFamily::Mnh { r: 0.5 },
        SpacingFamily::Mnh { r: 2.0 },
        SpacingFamily::Multinomial,
        SpacingFamily::Mh { r: rmin.max(1) },
        SpacingFamily::Mh { r: rmin.max(1) + 2 },
    ]
}

fn fixed_size_oracle() -> Check {
    let (mut mass_err, mut pi_err, mut pikl_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut cases = 0;
    for big_n in [6, 8, 9] {
        for n in [2, 3] {
            for fam in feasible_families(big_n, n) {
                let d = Design::circular(big_n, n, fam).map_err(|e| e.to_string())?;
                let DesignKind::Circular { spacings } = d.kind() else { unreachable!() };
                let e = enumerate_circular(&d).map_err(|e| e.to_string())?;
                mass_err = mass_err.max((e.total_mass - 1.0).abs());
                let rate = n as f64 / big_n as f64;
                for k in 1..=big_n {
                    pi_err = pi_err.max((e.pi(k) - rate).abs());
                    for l in k + 1..=big_n {
                        let f = pi_joint_fixed(spacings, l - k).map_err(|e| e.to_string())?;
                        pikl_err = pikl_err.max((e.pikl(k, l) - f).abs());
                    }
                }
                cases += 1;
            }
        }
    }
    let summary = format!(
        "{cases} designs: mass error {mass_err:e}, pi error {pi_err:e}, joint error {pikl_err:e}"
    );
    ensure(mass_err <= 1e-10 && pi_err <= 1e-10 && pikl_err <= 1e-9, || summary.clone())?;
    Ok(summary)
}

fn srs_closed_form() -> Check {
    let mut worst: f64 = 0.0;
    for (big_n, n) in [(10, 2), (8, 3), (200, 50), (57, 13)] {
        let sp = SpacingVectorDist::new(SpacingFamily::Mnh { r: 1.0 }, (big_n - n) as u64, n)
            .map_err(|e| e.to_string())?;
        let want = (n * (n - 1)) as f64 / (big_n * (big_n - 1)) as f64;
        for gap in 1..big_n {
            let v = pi_joint_fixed(&sp, gap).map_err(|e| e.to_string())?;
            worst = worst.max((v - want).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("SRS max error {worst:e}"))?;
    let mh = SpacingVectorDist::new(SpacingFamily::Mh { r: 5 }, 8, 2).map_err(|e| e.to_string())?;
    let null = pi_joint_fixed(&mh, 1).map_err(|e| e.to_string())?;
    ensure(null == 0.0, || format!("MH null gap gave {null:e}"))?;
    Ok(format!("SRS max error {worst:e}; MH null gap exactly 0"))
}

// Sample variance with a 3-sigma band from the sample fourth moment.
fn variance_band(xs: &[f64]) -> (f64, f64) {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / r;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / r;
    let var = m2 * r / (r - 1.0);
    let sd = ((m4 - m2 * m2).max(0.0) / r).sqrt();
    (var, 3.0 * sd)
}

fn spacing_variance_tables() -> Check {
    const DRAWS: usize = 1_000_000;
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let renewal = [
        (RateFamily::NegBinomial { r: 0.5 }, 0.1),
        (RateFamily::NegBinomial { r: 2.0 }, 1.0 / 30.0),
        (RateFamily::NegBinomial { r: 8.0 }, 0.2),
        (RateFamily::Poisson, 0.2),
        (RateFamily::Poisson, 0.1),
        (RateFamily::Poisson, 1.0 / 30.0),
        (RateFamily::Binomial { r: 10 }, 0.1),
        (RateFamily::Binomial { r: 40 }, 1.0 / 30.0),
        (RateFamily::Binomial { r: 20 }, 0.2),
    ];
    for (fam, rate) in renewal {
        let jump = fam.jump_for_rate(rate).map_err(|e| e.to_string())?;
        let xs: Vec<f64> = (0..DRAWS).map(|_| (1 + jump.sample(&mut rng)) as f64).collect();
        let (var, band) = variance_band(&xs);
        let want = fam.jump_variance(rate);
        let z = (var - want).abs() / (band / 3.0);
        ensure((var - want).abs() <= band, || {
            format!("{fam:?} rate {rate}: sampled {var}, formula {want}")
        })?;
        worst = worst.max(z);
    }
    let fixed = [
        (SpacingFamily::Mnh { r: 0.5 }, 200, 50),
        (SpacingFamily::Mnh { r: 5.0 }, 100, 10),
        (SpacingFamily::Mnh { r: 50.0 }, 60, 20),
        (SpacingFamily::Multinomial, 200, 50),
        (SpacingFamily::Multinomial, 100, 10),
        (SpacingFamily::Multinomial, 60, 20),
        (SpacingFamily::Mh { r: 4 }, 200, 50),
        (SpacingFamily::Mh { r: 10 }, 100, 10),
        (SpacingFamily::Mh { r: 50 }, 60, 20),
    ];
    let mut buf = Vec::new();
    for (fam, big_n, n) in fixed {
        let sp = SpacingVectorDist::new(fam, (big_n - n) as u64, n).map_err(|e| e.to_string())?;
        let xs: Vec<f64> = (0..DRAWS)
            .map(|i| {
                sp.sample_into(&mut rng, &mut buf);
                (1 + buf[i % n]) as f64
            })
            .collect();
        let (var, band) = variance_band(&xs);
        let want = sp.component_variance();
        let z = (var - want).abs() / (band / 3.0);
        ensure((var - want).abs() <= band, || {
            format!("{fam:?} N={big_n} n={n}: sampled {var}, formula {want}")
        })?;
        worst = worst.max(z);
    }
    Ok(format!("18 parameter points, largest |z| {worst:.2}"))
}

fn estimator_unbiasedness() -> Check {
    let noise = [0.31, -1.2, 0.05, 0.77, -0.4, 1.9, -0.66, 0.12, -1.05];
    let y: Vec<f64> = (1..=9).map(|k| k as f64 + noise[k - 1]).collect();
    let pop = PopulationData::new(y).map_err(|e| e.to_string())?;
    let t = pop.total();
    let (mut bias, mut vbias): (f64, f64) = (0.0, 0.0);
    for fam in [
        SpacingFamily::Mnh { r: 1.0 },
        SpacingFamily::Mnh { r: 2.0 },
        SpacingFamily::Multinomial,
    ] {
        let d = Design::circular(9, 3, fam).map_err(|e| e.to_string())?;
        let e = enumerate_circular(&d).map_err(|e| e.to_string())?;
        let (mut m, mut m2, mut vs) = (0.0, 0.0, 0.0);
        for (s, p) in &e.entries {
            let est = ht_total(s, &pop, &e).map_err(|e| e.to_string())?;
            m += p * est;
            m2 += p * est * est;
            vs += p * var_syg(s, &pop, &e).map_err(|e| e.to_string())?;
        }
        let v = m2 - m * m;
        bias = bias.max((m - t).abs());
        vbias = vbias.max((vs - v).abs());
        ensure((m - t).abs() <= 1e-9 && (vs - v).abs() <= 1e-9, || {
            format!("{fam:?}: E[ht] {m} vs {t}; E[syg] {vs} vs {v}")
        })?;
    }
    Ok(format!("total error {bias:e}, variance error {vbias:e}"))
}

fn random_pmf(rng: &mut ChaCha20Rng) -> Vec<f64> {
    let len = rng.random_range(2..=12);
    let mut w: Vec<f64> = (0..=len)
        .map(|k| if k == 0 { 0.0 } else { rng.random::<f64>() })
        .collect();
    // leave some holes in the support
    for _ in 0..len / 3 {
        let k = rng.random_range(1..=len);
        w[k] = 0.0;
    }
    w[len] += 0.05;
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn appendix_identities() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let (mut lemma, mut flat): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let pmf = random_pmf(&mut rng);
        let cdf = |x: usize| pmf.iter().take(x + 1).sum::<f64>();
        let mu: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let t = ConvolutionTable::from_jump_pmf(&pmf, 100, 100);
        for j in 1..=5 {
            for k in 1..=30 {
                let lhs: f64 = (1..=k).map(|s| t.get(j + 1, s)).sum();
                let rhs: f64 = (1..=k).map(|s| t.get(j, s) * cdf(k - s)).sum();
                lemma = lemma.max((lhs - rhs).abs());
            }
        }
        let delay = |k: usize| (1.0 - cdf(k - 1)) / mu;
        for k in 1..=100 {
            let v = delay(k) + (1..k).map(|s| delay(k - s) * t.renewal_density(s)).sum::<f64>();
            flat = flat.max((v - 1.0 / mu).abs());
        }
    }
    ensure(lemma <= 1e-10 && flat <= 1e-10, || {
        format!("convolution identity error {lemma:e}, flatness error {flat:e}")
    })?;
    let mut rows: f64 = 0.0;
    let mut designs = 0;
    for big_n in 2..=10 {
        for n in 1..=big_n {
            for fam in feasible_families(big_n, n) {
                let sp = SpacingVectorDist::new(fam, (big_n - n) as u64, n)
                    .map_err(|e| e.to_string())?;
                let table = SpacingSumTable::new(&sp).map_err(|e| e.to_string())?;
                let sums = matrix_a_rowsums(&table).map_err(|e| format!("{fam:?}: {e}"))?;
                for s in sums {
                    rows = rows.max((s - n as f64).abs());
                }
                designs += 1;
            }
        }
    }
    Ok(format!(
        "convolution identity error {lemma:e}, flatness error {flat:e}, \
         row-sum error {rows:e} over {designs} designs"
    ))
}

fn simulation_study() -> Check {
    const REPS: usize = 20_000;
    let start = Instant::now();
    let cfg = StudyConfig::reference(REPS, 1).map_err(|e| e.to_string())?;
    let study = Study::new(cfg).map_err(|e| e.to_string())?;
    let report = study.run();
    let secs = start.elapsed().as_secs_f64();
    for d in &report.designs {
        println!(
            "      {:<14} BR {:>6.2}  SE {:.4}  REVAR {:.4}  CV {:.3}  coverage {:>6.2}  excluded {}",
            d.name, d.br, d.se, d.revar, d.cv, d.coverage, d.excluded
        );
    }
    println!("      {REPS} replicates in {secs:.1} s");
    let mut failures = Vec::new();
    for d in &report.designs {
        if d.br.abs() >= 1.0 {
            failures.push(format!("|BR| of {} is {:.3}", d.name, d.br.abs()));
        }
        if d.excluded > 0 {
            failures.push(format!("{} excluded {} replicates", d.name, d.excluded));
        }
    }
    // SE of an estimated standard deviation is about SE / sqrt(2 (R - 1)).
    let mc = |se: f64| se / (2.0 * (REPS as f64 - 1.0)).sqrt();
    for w in report.designs.windows(2) {
        let slack = 2.0 * (mc(w[0].se).powi(2) + mc(w[1].se).powi(2)).sqrt();
        if w[1].se > w[0].se + slack {
            failures.push(format!(
                "SE increases from {} ({:.4}) to {} ({:.4})",
                w[0].name, w[0].se, w[1].name, w[1].se
            ));
        }
    }
    for d in &report.designs {
        if d.name == "MH r=4" {
            continue;
        }
        let ratio = d.revar / d.se;
        if !(0.97..=1.03).contains(&ratio) {
            failures.push(format!("REVAR/SE of {} is {ratio:.4}", d.name));
        }
    }
    let coverage = |name: &str| {
        report
            .designs
            .iter()
            .find(|d| d.name == name)
            .map(|d| d.coverage)
            .unwrap_or(f64::NAN)
    };
    let mult = coverage("MULT");
    if !(92.0..=95.0).contains(&mult) {
        failures.push(format!("MULT coverage {mult:.2}"));
    }
    let mh4 = coverage("MH r=4");
    if !(mh4 < 60.0) {
        failures.push(format!("MH r=4 coverage {mh4:.2}"));
    }
    let mh6 = coverage("MH r=6");
    if !(mh6 < 90.0) {
        failures.push(format!("MH r=6 coverage {mh6:.2}"));
    }
    if secs >= 120.0 {
        failures.push(format!("runtime {secs:.1} s"));
    }
    if failures.is_empty() {
        Ok(format!("10 designs, {REPS} replicates, {secs:.1} s"))
    } else {
        Err(failures.join("; "))
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("renewal inclusion probabilities of the two-point jump", example_one),
        ("equilibrium flatness across jump families", equilibrium_flatness),
        ("Bernoulli joint probabilities from the negative binomial form", bernoulli_recovery),
        ("renewal closed forms against convolution sums", closed_forms_vs_convolution),
        ("fixed-size enumeration against inclusion formulas", fixed_size_oracle),
        ("SRS joint probability and MH null gap", srs_closed_form),
        ("spacing variances against sampled spacings", spacing_variance_tables),
        ("HT and SYG unbiasedness by enumeration", estimator_unbiasedness),
        ("convolution, flatness and row-sum identities", appendix_identities),
        ("simulation study on a trended autocorrelated population", simulation_study),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
