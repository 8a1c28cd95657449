//! Versioned plain-text file formats, a binary grid variant for large
//! rasters, and flat key=value configuration.
//!
//! Floating-point values are written with 17 significant digits so every
//! reader recovers the written value exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::analysis::{DeletionReport, Histogram, RegressionResult, StudyReport};
use crate::field::{FieldError, GridGeometry, OrientationGrid, RegionOfInterest, ScalarGrid};
use crate::geometry::Point;
use crate::inference::{DependenceReport, PosteriorTrace, TraceRecord, UpdateKind};
use crate::point_process::{PcfCurve, PooledPcf};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("expected header {expected:?}, found {found:?}")]
    Header { expected: String, found: String },
    #[error(transparent)]
    Field(#[from] FieldError),
}

fn parse_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        message: message.into(),
    }
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Non-empty, non-comment lines with their 1-based numbers.
struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(r: R) -> Self {
        Lines {
            inner: r.lines(),
            number: 0,
        }
    }

    fn next_line(&mut self) -> Result<Option<(usize, String)>, IoError> {
        for l in self.inner.by_ref() {
            self.number += 1;
            let l = l?;
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok(Some((self.number, t.to_string())));
        }
        Ok(None)
    }

    fn expect_line(&mut self, what: &str) -> Result<(usize, String), IoError> {
        self.next_line()?
            .ok_or_else(|| parse_err(self.number + 1, format!("missing {what}")))
    }

    fn header(&mut self, expected: &str) -> Result<(), IoError> {
        let (_, l) = self.expect_line("header")?;
        if l != expected {
            return Err(IoError::Header {
                expected: expected.into(),
                found: l,
            });
        }
        Ok(())
    }
}

fn parse_token<T: FromStr>(tok: &str, line: usize, what: &str) -> Result<T, IoError> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("invalid {what} {tok:?}")))
}

/// Contents of a field grid file.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldGrid {
    Orientation(OrientationGrid),
    Scalar(ScalarGrid),
    Mask(RegionOfInterest),
}

impl FieldGrid {
    pub fn kind(&self) -> &'static str {
        match self {
            FieldGrid::Orientation(_) => "orientation",
            FieldGrid::Scalar(_) => "scalar",
            FieldGrid::Mask(_) => "mask",
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        match self {
            FieldGrid::Orientation(g) => g.geometry(),
            FieldGrid::Scalar(g) => g.geometry(),
            FieldGrid::Mask(g) => g.geometry(),
        }
    }

    /// Pixel values with NaN for excluded pixels; masks as 0/1.
    fn values(&self) -> Vec<f64> {
        match self {
            FieldGrid::Orientation(g) => g.angles().to_vec(),
            FieldGrid::Scalar(g) => g.values().to_vec(),
            FieldGrid::Mask(g) => g.mask().iter().map(|&m| m as u8 as f64).collect(),
        }
    }

    fn from_values(kind: &str, geom: GridGeometry, values: Vec<f64>) -> Result<Self, IoError> {
        Ok(match kind {
            "orientation" => FieldGrid::Orientation(OrientationGrid::from_angles(geom, values)?),
            "scalar" => FieldGrid::Scalar(ScalarGrid::new(geom, values)?),
            "mask" => {
                let mask = values
                    .iter()
                    .map(|v| match *v {
                        x if x == 0.0 => Ok(false),
                        x if x == 1.0 => Ok(true),
                        x => Err(parse_err(0, format!("mask value {x}"))),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                FieldGrid::Mask(RegionOfInterest::new(geom, mask)?)
            }
            other => return Err(parse_err(3, format!("unknown grid kind {other:?}"))),
        })
    }

    pub fn into_orientation(self) -> Option<OrientationGrid> {
        match self {
            FieldGrid::Orientation(g) => Some(g),
            _ => None,
        }
    }

    pub fn into_scalar(self) -> Option<ScalarGrid> {
        match self {
            FieldGrid::Scalar(g) => Some(g),
            _ => None,
        }
    }

    pub fn into_mask(self) -> Option<RegionOfInterest> {
        match self {
            FieldGrid::Mask(g) => Some(g),
            _ => None,
        }
    }
}

/// Grids with more cells than this are written in the binary variant by
/// [`write_grid_auto`].
pub const BINARY_THRESHOLD: usize = 4_000_000;

const BINARY_MAGIC: &[u8; 8] = b"FGRIDB01";

pub fn write_grid<W: Write>(grid: &FieldGrid, mut w: W) -> Result<(), IoError> {
    let g = grid.geometry();
    writeln!(w, "FIELDGRID v1")?;
    writeln!(w, "{} {} {}", g.width, g.height, fmt_f64(g.pixel_size))?;
    writeln!(w, "{}", grid.kind())?;
    let values = grid.values();
    let mask = matches!(grid, FieldGrid::Mask(_));
    let mut row = String::new();
    for y in 0..g.height {
        row.clear();
        for x in 0..g.width {
            if x > 0 {
                row.push(' ');
            }
            let v = values[g.index(x, y)];
            if v.is_nan() {
                row.push('X');
            } else if mask {
                row.push(if v == 1.0 { '1' } else { '0' });
            } else {
                row.push_str(&fmt_f64(v));
            }
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// Binary variant: magic `FGRIDB01`, then little-endian u64 width, u64
/// height, f64 pixel size, u64 kind-name length and the kind name, u64
/// value count and that many f64 values (NaN for excluded pixels).
pub fn write_grid_binary<W: Write>(grid: &FieldGrid, mut w: W) -> Result<(), IoError> {
    let g = grid.geometry();
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(g.width as u64).to_le_bytes())?;
    w.write_all(&(g.height as u64).to_le_bytes())?;
    w.write_all(&g.pixel_size.to_le_bytes())?;
    let kind = grid.kind().as_bytes();
    w.write_all(&(kind.len() as u64).to_le_bytes())?;
    w.write_all(kind)?;
    let values = grid.values();
    w.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_grid_auto<W: Write>(grid: &FieldGrid, w: W) -> Result<(), IoError> {
    if grid.geometry().len() > BINARY_THRESHOLD {
        write_grid_binary(grid, w)
    } else {
        write_grid(grid, w)
    }
}

fn read_grid_text<R: BufRead>(r: R) -> Result<FieldGrid, IoError> {
    let mut lines = Lines::new(r);
    lines.header("FIELDGRID v1")?;
    let (ln, dims) = lines.expect_line("dimensions")?;
    let toks: Vec<&str> = dims.split_whitespace().collect();
    if toks.len() != 3 {
        return Err(parse_err(ln, "expected `width height pixel_size`"));
    }
    let width: usize = parse_token(toks[0], ln, "width")?;
    let height: usize = parse_token(toks[1], ln, "height")?;
    let pixel_size: f64 = parse_token(toks[2], ln, "pixel size")?;
    let geom = GridGeometry::new(width, height).with_pixel_size(pixel_size);
    let (_, kind) = lines.expect_line("kind")?;
    let mut values = Vec::with_capacity(width * height);
    while let Some((ln, l)) = lines.next_line()? {
        for tok in l.split_whitespace() {
            values.push(if tok == "X" {
                f64::NAN
            } else {
                parse_token(tok, ln, "value")?
            });
        }
    }
    if values.len() != width * height {
        return Err(parse_err(lines.number, format!("expected {} values, found {}", width * height, values.len())));
    }
    FieldGrid::from_values(&kind, geom, values)
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, IoError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_grid_binary_body<R: Read>(mut r: R) -> Result<FieldGrid, IoError> {
    let width = read_u64(&mut r)? as usize;
    let height = read_u64(&mut r)? as usize;
    let pixel_size = f64::from_bits(read_u64(&mut r)?);
    let kind_len = read_u64(&mut r)? as usize;
    if kind_len > 64 {
        return Err(parse_err(0, "corrupt kind length"));
    }
    let mut kind = vec![0u8; kind_len];
    r.read_exact(&mut kind)?;
    let kind = String::from_utf8(kind).map_err(|_| parse_err(0, "kind is not UTF-8"))?;
    let count = read_u64(&mut r)? as usize;
    if count != width * height {
        return Err(parse_err(0, format!("expected {} values, found {count}", width * height)));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(f64::from_bits(read_u64(&mut r)?));
    }
    FieldGrid::from_values(&kind, GridGeometry::new(width, height).with_pixel_size(pixel_size), values)
}

/// Reads either variant, recognised by its first bytes.
pub fn read_grid<R: BufRead>(mut r: R) -> Result<FieldGrid, IoError> {
    let head = r.fill_buf()?;
    if head.starts_with(BINARY_MAGIC) {
        r.consume(BINARY_MAGIC.len());
        read_grid_binary_body(r)
    } else {
        read_grid_text(r)
    }
}

/// Points with optional labels (`None` for unknown).
#[derive(Clone, Debug, PartialEq)]
pub struct PointsFile {
    pub points: Vec<Point>,
    pub labels: Option<Vec<Option<bool>>>,
}

pub fn write_points<W: Write>(file: &PointsFile, mut w: W) -> Result<(), IoError> {
    writeln!(w, "POINTS v1")?;
    writeln!(w, "{}", file.points.len())?;
    for (i, p) in file.points.iter().enumerate() {
        write!(w, "{} {}", fmt_f64(p.x), fmt_f64(p.y))?;
        if let Some(labels) = &file.labels {
            let l = match labels.get(i).copied().flatten() {
                Some(true) => "1",
                Some(false) => "0",
                None => "?",
            };
            write!(w, " {l}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_points<R: BufRead>(r: R) -> Result<PointsFile, IoError> {
    let mut lines = Lines::new(r);
    lines.header("POINTS v1")?;
    let (ln, n) = lines.expect_line("point count")?;
    let n: usize = parse_token(&n, ln, "point count")?;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut any_label = false;
    for _ in 0..n {
        let (ln, l) = lines.expect_line("point")?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if !(2..=3).contains(&toks.len()) {
            return Err(parse_err(ln, "expected `x y [label]`"));
        }
        let x: f64 = parse_token(toks[0], ln, "x")?;
        let y: f64 = parse_token(toks[1], ln, "y")?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(parse_err(ln, "non-finite coordinate"));
        }
        points.push(Point::new(x, y));
        labels.push(match toks.get(2) {
            None => None,
            Some(t) => {
                any_label = true;
                match *t {
                    "1" => Some(true),
                    "0" => Some(false),
                    "?" => None,
                    other => return Err(parse_err(ln, format!("invalid label {other:?}"))),
                }
            }
        });
    }
    if let Some((ln, _)) = lines.next_line()? {
        return Err(parse_err(ln, "more points than declared"));
    }
    Ok(PointsFile {
        points,
        labels: any_label.then_some(labels),
    })
}

pub fn write_trace<W: Write>(records: &[TraceRecord], mut w: W) -> Result<(), IoError> {
    writeln!(w, "TRACE v1")?;
    for r in records {
        writeln!(
            w,
            "{} {} {} {} {} {}",
            r.t,
            fmt_f64(r.lambda),
            fmt_f64(r.beta),
            fmt_f64(r.gamma),
            r.kind.as_str(),
            r.accepted as u8
        )?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(r: R) -> Result<Vec<TraceRecord>, IoError> {
    let mut lines = Lines::new(r);
    lines.header("TRACE v1")?;
    let mut out = Vec::new();
    while let Some((ln, l)) = lines.next_line()? {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 6 {
            return Err(parse_err(ln, "expected `t lambda beta gamma move accepted`"));
        }
        let kind: UpdateKind = toks[4].parse().map_err(|e: String| parse_err(ln, e))?;
        let accepted = match toks[5] {
            "1" => true,
            "0" => false,
            other => return Err(parse_err(ln, format!("invalid accepted flag {other:?}"))),
        };
        out.push(TraceRecord {
            t: parse_token(toks[0], ln, "t")?,
            lambda: parse_token(toks[1], ln, "lambda")?,
            beta: parse_token(toks[2], ln, "beta")?,
            gamma: parse_token(toks[3], ln, "gamma")?,
            kind,
            accepted,
        });
    }
    Ok(out)
}

/// Per-point label-1 frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelRow {
    pub index: usize,
    pub point: Point,
    pub freq1: f64,
}

pub fn write_labels<W: Write>(points: &[Point], freq: &[f64], mut w: W) -> Result<(), IoError> {
    writeln!(w, "LABELS v1")?;
    for (i, (p, f)) in points.iter().zip(freq).enumerate() {
        writeln!(w, "{i} {} {} {}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(*f))?;
    }
    Ok(())
}

pub fn read_labels<R: BufRead>(r: R) -> Result<Vec<LabelRow>, IoError> {
    let mut lines = Lines::new(r);
    lines.header("LABELS v1")?;
    let mut out = Vec::new();
    while let Some((ln, l)) = lines.next_line()? {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(parse_err(ln, "expected `i x y freq1`"));
        }
        out.push(LabelRow {
            index: parse_token(toks[0], ln, "index")?,
            point: Point::new(parse_token(toks[1], ln, "x")?, parse_token(toks[2], ln, "y")?),
            freq1: parse_token(toks[3], ln, "frequency")?,
        });
    }
    Ok(out)
}

/// Joint label samples: `SAMPLES v1`, `m k`, then m rows of k digits.
pub fn write_samples<W: Write>(samples: &[Vec<bool>], k: usize, mut w: W) -> Result<(), IoError> {
    writeln!(w, "SAMPLES v1")?;
    writeln!(w, "{} {k}", samples.len())?;
    let mut row = String::with_capacity(k);
    for s in samples {
        row.clear();
        row.extend(s.iter().map(|&l| if l { '1' } else { '0' }));
        writeln!(w, "{row}")?;
    }
    Ok(())
}

pub fn read_samples<R: BufRead>(r: R) -> Result<Vec<Vec<bool>>, IoError> {
    let mut lines = Lines::new(r);
    lines.header("SAMPLES v1")?;
    let (ln, dims) = lines.expect_line("dimensions")?;
    let toks: Vec<&str> = dims.split_whitespace().collect();
    if toks.len() != 2 {
        return Err(parse_err(ln, "expected `m k`"));
    }
    let m: usize = parse_token(toks[0], ln, "sample count")?;
    let k: usize = parse_token(toks[1], ln, "point count")?;
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, l) = if k == 0 { (lines.number, String::new()) } else { lines.expect_line("sample")? };
        if l.len() != k {
            return Err(parse_err(ln, format!("expected {k} labels")));
        }
        out.push(
            l.chars()
                .map(|c| match c {
                    '1' => Ok(true),
                    '0' => Ok(false),
                    other => Err(parse_err(ln, format!("invalid label {other:?}"))),
                })
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok(out)
}

/// Writes the trace, label frequencies and joint samples of a run.
pub fn write_posterior<W1: Write, W2: Write, W3: Write>(
    trace: &PosteriorTrace,
    points: &[Point],
    trace_out: W1,
    labels_out: W2,
    samples_out: W3,
) -> Result<(), IoError> {
    write_trace(&trace.records, trace_out)?;
    write_labels(points, &trace.label_frequencies, labels_out)?;
    write_samples(&trace.label_samples, points.len(), samples_out)
}

/// Flat `key = value` configuration; `#` starts a comment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse<R: BufRead>(r: R) -> Result<Self, IoError> {
        let mut entries = BTreeMap::new();
        for (i, l) in r.lines().enumerate() {
            let l = l?;
            let l = l.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| parse_err(i + 1, "expected `key = value`"))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(parse_err(i + 1, "empty key"));
            }
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Config { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Typed value of `key`, `None` when absent.
    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, IoError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| parse_err(0, format!("invalid value {v:?} for {key}"))),
        }
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), IoError> {
        for (k, v) in &self.entries {
            writeln!(w, "{k} = {v}")?;
        }
        Ok(())
    }
}

pub fn format_regression(r: &RegressionResult) -> String {
    let mut s = String::new();
    let kv = [
        ("beta0", r.beta0),
        ("beta1", r.beta1),
        ("se0", r.se0),
        ("se1", r.se1),
        ("ci0_lower", r.ci0.0),
        ("ci0_upper", r.ci0.1),
        ("ci1_lower", r.ci1.0),
        ("ci1_upper", r.ci1.1),
        ("p_value_intercept", r.p_value_intercept),
        ("log_likelihood", r.log_likelihood),
    ];
    for (k, v) in kv {
        let _ = writeln!(s, "{k} = {}", fmt_f64(v));
    }
    let _ = writeln!(s, "patches = {}", r.data.len());
    let _ = writeln!(s, "iterations = {}", r.iterations);
    s
}

pub fn format_study(report: &StudyReport) -> String {
    let mut s = String::new();
    for r in &report.replicates {
        let _ = writeln!(s, "REPLICATE {}", r.index);
        let _ = writeln!(s, "field_set = {}", r.field_set);
        let _ = writeln!(s, "seed = {}", r.seed);
        let _ = writeln!(s, "n_random = {}", r.n_random);
        let _ = writeln!(s, "n_necessary = {}", r.n_necessary);
        let names = ["lambda", "beta", "gamma"];
        let truth = [r.truth.lambda, r.truth.beta, r.truth.gamma];
        let post = [r.posterior_mean.lambda, r.posterior_mean.beta, r.posterior_mean.gamma];
        for k in 0..3 {
            let _ = writeln!(s, "true_{} = {}", names[k], fmt_f64(truth[k]));
            let _ = writeln!(s, "mean_{} = {}", names[k], fmt_f64(post[k]));
            let _ = writeln!(
                s,
                "interval_{} = {} {}",
                names[k],
                fmt_f64(r.intervals[k].0),
                fmt_f64(r.intervals[k].1)
            );
            let _ = writeln!(s, "covered_{} = {}", names[k], r.covered[k] as u8);
        }
        let a = &r.acceptance;
        let _ = writeln!(s, "accept_lambda = {}", fmt_f64(a.lambda.rate()));
        let _ = writeln!(s, "accept_beta_gamma = {}", fmt_f64(a.beta_gamma.rate()));
        let _ = writeln!(s, "accept_flip = {}", fmt_f64(a.flip.rate()));
        let _ = writeln!(s, "random_recognised = {}", fmt_f64(r.random_recognised));
        let _ = writeln!(s, "necessary_recognised = {}", fmt_f64(r.necessary_recognised));
        let _ = writeln!(s, "END");
    }
    let c = report.coverage_counts();
    let _ = writeln!(s, "SUMMARY");
    let _ = writeln!(s, "replicates = {}", report.replicates.len());
    let _ = writeln!(s, "covered = {} {} {}", c[0], c[1], c[2]);
    let _ = writeln!(s, "beta_overestimated = {}", report.beta_overestimated());
    s
}

pub fn format_histogram(h: &Histogram) -> String {
    let mut s = format!("# bin_width {}\n", fmt_f64(h.bin_width));
    for (c, n) in h.centers.iter().zip(&h.counts) {
        let _ = writeln!(s, "{} {n}", fmt_f64(*c));
    }
    s
}

pub fn format_deletion(r: &DeletionReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "replicates = {}", r.records.len());
    let _ = writeln!(s, "scorer_failures = {}", r.scorer_failures);
    let _ = writeln!(s, "share_greater = {}", fmt_f64(r.share_greater));
    let _ = writeln!(s, "share_se = {}", fmt_f64(r.share_se));
    let _ = writeln!(s, "mean_relative_difference = {}", fmt_f64(r.mean_relative_difference));
    let _ = writeln!(s, "relative_difference_se = {}", fmt_f64(r.relative_difference_se));
    s
}

pub fn format_dependence(r: &DependenceReport) -> String {
    let mut s = String::new();
    let c = r.table.counts;
    let e = r.expected;
    let _ = writeln!(s, "table = {} {} {} {}", c[0][0], c[0][1], c[1][0], c[1][1]);
    let _ = writeln!(
        s,
        "expected = {} {} {} {}",
        fmt_f64(e[0][0]),
        fmt_f64(e[0][1]),
        fmt_f64(e[1][0]),
        fmt_f64(e[1][1])
    );
    let _ = writeln!(s, "kl_bits = {}", fmt_f64(r.kl_bits));
    let _ = writeln!(s, "correlation = {}", fmt_f64(r.correlation));
    let _ = writeln!(s, "correlation_se = {}", fmt_f64(r.correlation_se));
    let _ = writeln!(s, "batches = {}", r.batch_correlations.len());
    s
}

pub fn format_pcf(c: &PcfCurve) -> String {
    let mut s = String::from("# r g\n");
    for (r, g) in c.r.iter().zip(&c.g) {
        let _ = writeln!(s, "{} {}", fmt_f64(*r), fmt_f64(*g));
    }
    s
}

pub fn format_pooled_pcf(p: &PooledPcf) -> String {
    let mut s = String::from("# r mean sd lower upper\n");
    for k in 0..p.r.len() {
        let _ = writeln!(
            s,
            "{} {} {} {} {}",
            fmt_f64(p.r[k]),
            fmt_f64(p.mean[k]),
            fmt_f64(p.sd[k]),
            fmt_f64(p.lower[k]),
            fmt_f64(p.upper[k])
        );
    }
    s
}

/// Two-column `m count` data for the regression, as produced by
/// [`crate::analysis::PatchCounts::regression_data`].
pub fn read_regression_data<R: BufRead>(r: R) -> Result<Vec<(f64, u64)>, IoError> {
    let mut lines = Lines::new(r);
    let mut out = Vec::new();
    while let Some((ln, l)) = lines.next_line()? {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(ln, "expected `m count`"));
        }
        out.push((parse_token(toks[0], ln, "m")?, parse_token(toks[1], ln, "count")?));
    }
    Ok(out)
}

pub fn write_regression_data<W: Write>(data: &[(f64, u64)], mut w: W) -> Result<(), IoError> {
    writeln!(w, "# m count")?;
    for (m, c) in data {
        writeln!(w, "{} {c}", fmt_f64(*m))?;
    }
    Ok(())
}
