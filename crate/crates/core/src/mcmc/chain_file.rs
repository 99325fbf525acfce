//! Append-only text format for saved chain states.
//!
//! ```text
//! # bernstein-yett chain v1
//! # k 5 5
//! # r 0
//! # theta 0
//! # config <one line>
//! iter,w0,...,loglik,logprior
//! 0,2.0000000000000000e-1,...
//! ```

use crate::error::{Error, Result};
use crate::yett::{Degree, YettCopula};
use std::io::{BufRead, Write};

pub const CHAIN_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "# bernstein-yett chain v";

#[derive(Debug, Clone, PartialEq)]
pub struct ChainHeader {
    pub degree: Degree,
    /// Length of the stored upper triangle of `R` (0 when absent).
    pub r_len: usize,
    /// Number of stored marginal parameters.
    pub theta_len: usize,
    /// Free-form, single-line echo of the run settings.
    pub config: String,
}

impl ChainHeader {
    pub fn columns(&self) -> Vec<String> {
        let mut cols = vec!["iter".to_string()];
        cols.extend((0..self.degree.cell_count()).map(|c| format!("w{c}")));
        let d = self.degree.dims();
        if self.r_len > 0 {
            for i in 0..d {
                for j in i + 1..d {
                    cols.push(format!("r{i}{j}"));
                }
            }
        }
        cols.extend((0..self.theta_len).map(|t| format!("theta{t}")));
        cols.push("loglik".into());
        cols.push("logprior".into());
        cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRecord {
    pub iteration: usize,
    pub masses: Vec<f64>,
    pub r_upper: Vec<f64>,
    pub theta: Vec<f64>,
    pub loglik: f64,
    pub log_prior: f64,
}

impl ChainRecord {
    pub fn copula(&self, degree: &Degree) -> Result<YettCopula> {
        YettCopula::from_masses_with_tol(degree.clone(), self.masses.clone(), 1e-9)
    }
}

/// Writes the header once, then one flushed line per record, so an
/// interrupted run leaves a readable prefix.
pub struct ChainWriter<W: Write> {
    out: W,
    header: ChainHeader,
}

impl<W: Write> ChainWriter<W> {
    pub fn new(mut out: W, header: ChainHeader) -> Result<Self> {
        if header.config.contains('\n') {
            return Err(Error::InvalidParameter("config echo must be a single line".into()));
        }
        writeln!(out, "{MAGIC}{CHAIN_FORMAT_VERSION}")?;
        let k: Vec<String> = header.degree.as_slice().iter().map(usize::to_string).collect();
        writeln!(out, "# k {}", k.join(" "))?;
        writeln!(out, "# r {}", header.r_len)?;
        writeln!(out, "# theta {}", header.theta_len)?;
        writeln!(out, "# config {}", header.config)?;
        writeln!(out, "{}", header.columns().join(","))?;
        out.flush()?;
        Ok(ChainWriter { out, header })
    }

    pub fn header(&self) -> &ChainHeader {
        &self.header
    }

    pub fn write(&mut self, rec: &ChainRecord) -> Result<()> {
        if rec.masses.len() != self.header.degree.cell_count()
            || rec.r_upper.len() != self.header.r_len
            || rec.theta.len() != self.header.theta_len
        {
            return Err(Error::InvalidData("record does not match chain header".into()));
        }
        let mut line = rec.iteration.to_string();
        for v in rec.masses.iter().chain(&rec.r_upper).chain(&rec.theta).chain([&rec.loglik, &rec.log_prior]) {
            line.push(',');
            line.push_str(&format!("{v:.16e}"));
        }
        writeln!(self.out, "{line}")?;
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub header: ChainHeader,
    pub records: Vec<ChainRecord>,
    /// The file ended in a malformed line; `records` holds what came before.
    pub truncated: bool,
}

fn header_value<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    let line = line.ok_or_else(|| Error::Parse(format!("chain header ends before `{key}`")))?;
    line.strip_prefix(&format!("# {key}"))
        .map(str::trim)
        .ok_or_else(|| Error::Parse(format!("expected `# {key}` header line, found `{line}`")))
}

pub fn read_chain<R: BufRead>(mut input: R) -> Result<Chain> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    // every record is written with its newline, so an unterminated last
    // line is a partial write even when it happens to parse
    let complete = text.ends_with('\n');
    let mut lines: Vec<&str> = text.lines().collect();
    let partial = if complete { None } else { lines.pop() };
    let mut it = lines.into_iter();
    let first = it.next().ok_or_else(|| Error::Parse("empty chain file".into()))?;
    let version: u32 = first
        .strip_prefix(MAGIC)
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Parse("not a chain file".into()))?;
    if version != CHAIN_FORMAT_VERSION {
        return Err(Error::Parse(format!("chain format v{version} is not supported")));
    }
    let k = header_value(it.next(), "k")?
        .split_whitespace()
        .map(|v| v.parse::<usize>().map_err(|e| Error::Parse(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let degree = Degree::new(k)?;
    let r_len = header_value(it.next(), "r")?.parse().map_err(|_| Error::Parse("bad `r` header".into()))?;
    let theta_len = header_value(it.next(), "theta")?.parse().map_err(|_| Error::Parse("bad `theta` header".into()))?;
    let config = header_value(it.next(), "config")?.to_string();
    let header = ChainHeader { degree, r_len, theta_len, config };
    let cols = it.next().ok_or_else(|| Error::Parse("missing column line".into()))?;
    if cols.split(',').count() != header.columns().len() {
        return Err(Error::Parse("column line does not match header".into()));
    }

    let cells = header.degree.cell_count();
    let width = header.columns().len();
    let mut records = Vec::new();
    let mut truncated = false;
    for (n, line) in it.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parsed = (fields.len() == width)
            .then(|| {
                let iteration = fields[0].parse::<usize>().ok()?;
                let vals = fields[1..].iter().map(|f| f.parse::<f64>().ok()).collect::<Option<Vec<f64>>>()?;
                Some((iteration, vals))
            })
            .flatten();
        let Some((iteration, vals)) = parsed else {
            log::warn!("chain record {} is malformed; keeping the {} records before it", n + 1, records.len());
            truncated = true;
            break;
        };
        let (masses, rest) = vals.split_at(cells);
        let (r_upper, rest) = rest.split_at(r_len);
        let (theta, rest) = rest.split_at(theta_len);
        records.push(ChainRecord {
            iteration,
            masses: masses.to_vec(),
            r_upper: r_upper.to_vec(),
            theta: theta.to_vec(),
            loglik: rest[0],
            log_prior: rest[1],
        });
    }
    if partial.is_some() && !truncated {
        log::warn!("chain file ends in a partial record; keeping the {} records before it", records.len());
        truncated = true;
    }
    Ok(Chain { header, records, truncated })
}
