//! Plain-text chain output formats.
//!
//! * `samples.tsv`: one row per retained iteration with θ, the log posterior
//!   and the acceptance of the parameter and latent steps.
//! * `counts.tsv`: colonised count at every week, one row per retained
//!   iteration.
//! * `*.rle`: a lattice of non-negative integers stored column by column
//!   (one line per individual) as run-length pairs `value*length`.
//!
//! Floats are written in Rust's shortest round-trip form, so every file reads
//! back to the exact values that were written.

use std::fmt::Write as _;
use std::path::Path;

use rippler_core::{ColonisationMatrix, IterationRecord, ModelParams};

use crate::error::{CliError, CliResult};

pub const SAMPLES_HEADER: &str =
    "iteration\tbeta_g\tbeta_h\tdelta_a\tdelta_s\tlog_posterior\tparam_accepted\tlatent_accepted\tlatent_proposed";

pub fn samples_row(rec: &IterationRecord) -> String {
    let t = rec.theta;
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
        rec.iteration,
        t.beta_g,
        t.beta_h,
        t.delta_a,
        t.delta_s,
        rec.log_posterior,
        u8::from(rec.param_accepted),
        rec.latent.accepted,
        rec.latent.proposed
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub iteration: u64,
    pub theta: ModelParams,
    pub log_posterior: f64,
    pub param_accepted: bool,
    pub latent_accepted: u64,
    pub latent_proposed: u64,
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, s: Option<&str>, name: &str) -> CliResult<T> {
    s.and_then(|v| v.parse().ok())
        .ok_or_else(|| CliError::parse(path, line, format!("bad or missing {name}")))
}

pub fn read_samples(path: &Path) -> CliResult<Vec<SampleRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == SAMPLES_HEADER => {}
        _ => return Err(CliError::corrupt(path, "unexpected header")),
    }
    let mut rows = Vec::new();
    for (i, l) in lines {
        let line = i + 1;
        let mut f = l.split('\t');
        let iteration = field(path, line, f.next(), "iteration")?;
        let mut theta = [0.0; 4];
        for (k, name) in ModelParams::NAMES.iter().enumerate() {
            theta[k] = field(path, line, f.next(), name)?;
        }
        let log_posterior = field(path, line, f.next(), "log_posterior")?;
        let param_accepted: u8 = field(path, line, f.next(), "param_accepted")?;
        rows.push(SampleRow {
            iteration,
            theta: ModelParams::from_array(theta),
            log_posterior,
            param_accepted: param_accepted == 1,
            latent_accepted: field(path, line, f.next(), "latent_accepted")?,
            latent_proposed: field(path, line, f.next(), "latent_proposed")?,
        });
    }
    Ok(rows)
}

pub fn counts_header(n_steps: usize) -> String {
    let mut h = String::from("iteration");
    for t in 0..=n_steps {
        write!(h, "\tt{t}").unwrap();
    }
    h
}

pub fn counts_row(iteration: u64, counts: &[usize]) -> String {
    let mut s = iteration.to_string();
    for c in counts {
        write!(s, "\t{c}").unwrap();
    }
    s.push('\n');
    s
}

/// Colonised-count rows as (iteration, counts).
pub fn read_counts(path: &Path) -> CliResult<Vec<(u64, Vec<usize>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let width = match lines.next() {
        Some((_, h)) if h.starts_with("iteration\t") => h.split('\t').count() - 1,
        _ => return Err(CliError::corrupt(path, "unexpected header")),
    };
    let mut rows = Vec::new();
    for (i, l) in lines {
        let mut f = l.split('\t');
        let iteration = field(path, i + 1, f.next(), "iteration")?;
        let counts: Vec<usize> = f.map(|v| field(path, i + 1, Some(v), "count")).collect::<CliResult<_>>()?;
        if counts.len() != width {
            return Err(CliError::parse(path, i + 1, format!("expected {width} counts, found {}", counts.len())));
        }
        rows.push((iteration, counts));
    }
    Ok(rows)
}

/// Encodes a row-major lattice of `rows × cols` values column by column.
pub fn encode_rle(values: &[u64], rows: usize, cols: usize) -> String {
    assert_eq!(values.len(), rows * cols);
    let mut out = format!("# rows={rows} cols={cols}\n");
    for j in 0..cols {
        write!(out, "{j}\t").unwrap();
        let mut t = 0;
        let mut first = true;
        while t < rows {
            let v = values[t * cols + j];
            let mut len = 1;
            while t + len < rows && values[(t + len) * cols + j] == v {
                len += 1;
            }
            if !first {
                out.push(' ');
            }
            write!(out, "{v}*{len}").unwrap();
            first = false;
            t += len;
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`encode_rle`]: (values, rows, cols).
pub fn decode_rle(text: &str, path: &Path) -> CliResult<(Vec<u64>, usize, usize)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CliError::corrupt(path, "empty file"))?;
    let dims: Vec<usize> = header
        .strip_prefix("# rows=")
        .and_then(|r| r.split_once(" cols="))
        .and_then(|(r, c)| Some(vec![r.parse().ok()?, c.parse().ok()?]))
        .ok_or_else(|| CliError::corrupt(path, "bad header"))?;
    let (rows, cols) = (dims[0], dims[1]);
    let mut values = vec![0; rows * cols];
    let mut seen = 0;
    for (i, l) in lines.enumerate() {
        let line = i + 2;
        let (j, runs) = l.split_once('\t').ok_or_else(|| CliError::parse(path, line, "missing tab"))?;
        let j: usize = field(path, line, Some(j), "column")?;
        if j != seen || j >= cols {
            return Err(CliError::parse(path, line, "columns out of order"));
        }
        let mut t = 0;
        for run in runs.split(' ') {
            let (v, len) = run.split_once('*').ok_or_else(|| CliError::parse(path, line, "bad run"))?;
            let v: u64 = field(path, line, Some(v), "value")?;
            let len: usize = field(path, line, Some(len), "run length")?;
            if t + len > rows {
                return Err(CliError::parse(path, line, "runs overflow the column"));
            }
            for r in t..t + len {
                values[r * cols + j] = v;
            }
            t += len;
        }
        if t != rows {
            return Err(CliError::parse(path, line, "runs do not fill the column"));
        }
        seen += 1;
    }
    if seen != cols {
        return Err(CliError::corrupt(path, format!("expected {cols} columns, found {seen}")));
    }
    Ok((values, rows, cols))
}

pub fn encode_lattice(x: &ColonisationMatrix) -> String {
    let values: Vec<u64> = x.as_slice().iter().map(|&v| u64::from(v)).collect();
    encode_rle(&values, x.n_rows(), x.n_individuals())
}

pub fn read_lattice(path: &Path) -> CliResult<ColonisationMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let (values, rows, cols) = decode_rle(&text, path)?;
    if rows == 0 || values.iter().any(|&v| v > 1) {
        return Err(CliError::corrupt(path, "not a 0/1 lattice"));
    }
    let rows: Vec<Vec<u8>> = values.chunks(cols).map(|r| r.iter().map(|&v| v as u8).collect()).collect();
    Ok(ColonisationMatrix::from_rows(&rows)?)
}
