//! Locale-free text output: numbers with 15 significant digits and CSV.

use std::io::Write;

/// Formats like C's `%.15g`: 15 significant digits, trailing zeros removed,
/// scientific notation for exponents below -4 or at least 15.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // The exponent after rounding to 15 digits decides the style.
    let sci = format!("{:.14e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..15).contains(&exp) {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (14 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV writer with `\n` line endings.
pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .flexible(true)
        .from_writer(w)
}

/// Reads numbers from a CSV file: every field of every row, skipping a
/// first row that does not parse as numbers (a header).
pub fn read_numbers(text: &str) -> Result<Vec<f64>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let parsed: Result<Vec<f64>, _> = rec
            .iter()
            .filter(|f| !f.is_empty())
            .map(str::parse::<f64>)
            .collect();
        match parsed {
            Ok(v) => out.extend(v),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(format!("row {}: {e}", i + 1)),
        }
    }
    Ok(out)
}

/// Reads unit indexes (positive integers) the same way as [`read_numbers`].
pub fn read_units(text: &str) -> Result<Vec<usize>, String> {
    read_numbers(text)?
        .into_iter()
        .map(|x| {
            if x >= 1.0 && x.fract() == 0.0 && x < usize::MAX as f64 {
                Ok(x as usize)
            } else {
                Err(format!("{x} is not a unit index"))
            }
        })
        .collect()
}
