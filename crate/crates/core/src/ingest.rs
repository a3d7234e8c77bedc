//! Trace ingestion: RSS and ground-truth CSV logs to aligned frames.
//!
//! RSS log columns: `timestamp_ms,sensor_id,rss_db`.
//! Truth log columns: `timestamp_ms,target_id,x_m,y_m`.
//!
//! Timestamps are bucketed into ticks of `bucket_ms`; tick `b` is centered at
//! `b · bucket_ms`. A frame is emitted for a tick only when every sensor
//! reported in it (the latest reading wins) and every target has a truth fix
//! within half a bucket of the tick center.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{floored_distance, DeploymentMap, Location};
use crate::measurement::MeasurementFrame;

pub const RSS_HEADER: [&str; 3] = ["timestamp_ms", "sensor_id", "rss_db"];
pub const TRUTH_HEADER: [&str; 4] = ["timestamp_ms", "target_id", "x_m", "y_m"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub timestamp_ms: u64,
    pub sensor_id: usize,
    pub rss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRecord {
    pub timestamp_ms: u64,
    pub target_id: usize,
    pub location: Location,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestConfig {
    pub bucket_ms: u64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self { bucket_ms: 200 }
    }
}

/// Bucket accounting over the overlap of the two logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DropReport {
    pub total_buckets: u64,
    pub emitted: u64,
    /// Buckets where at least one sensor did not report.
    pub incomplete: u64,
    /// Complete buckets without a truth fix for every target.
    pub missing_truth: u64,
}

impl DropReport {
    pub fn dropped(&self) -> u64 {
        self.incomplete + self.missing_truth
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aligned {
    pub frames: Vec<MeasurementFrame>,
    pub report: DropReport,
    pub targets: usize,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a CSV with the given header, handing each row and its line number
/// to `row`.
fn read_rows<R: Read>(
    reader: R,
    header: &[&str],
    mut row: impl FnMut(u64, &csv::StringRecord) -> Result<()>,
) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let found = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(parse_err(
            1,
            format!(
                "expected header `{}`, found `{}`",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rec = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut rec).map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        if !more {
            return Ok(());
        }
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        row(line, &rec)?;
    }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str, line: u64) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| parse_err(line, format!("bad {name} `{raw}`")))
}

fn finite(v: f64, name: &str, line: u64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_err(line, format!("{name} must be finite")))
    }
}

/// Parses an RSS log for a deployment of `sensors` sensors.
pub fn read_rss<R: Read>(reader: R, sensors: usize) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    read_rows(reader, &RSS_HEADER, |line, rec| {
        let sensor_id: usize = field(rec, 1, "sensor_id", line)?;
        if sensor_id >= sensors {
            return Err(parse_err(line, format!("sensor_id {sensor_id} outside 0..{sensors}")));
        }
        out.push(TraceRecord {
            timestamp_ms: field(rec, 0, "timestamp_ms", line)?,
            sensor_id,
            rss: finite(field(rec, 2, "rss_db", line)?, "rss_db", line)?,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn read_truth<R: Read>(reader: R) -> Result<Vec<TruthRecord>> {
    let mut out = Vec::new();
    read_rows(reader, &TRUTH_HEADER, |line, rec| {
        let x = finite(field(rec, 2, "x_m", line)?, "x_m", line)?;
        let y = finite(field(rec, 3, "y_m", line)?, "y_m", line)?;
        out.push(TruthRecord {
            timestamp_ms: field(rec, 0, "timestamp_ms", line)?,
            target_id: field(rec, 1, "target_id", line)?,
            location: Location::new(x, y),
        });
        Ok(())
    })?;
    Ok(out)
}

fn bucket_of(ts: u64, bucket_ms: u64) -> u64 {
    (ts + bucket_ms / 2) / bucket_ms
}

/// Aligns parsed records into complete frames.
pub fn align(rss: &[TraceRecord], truth: &[TruthRecord], map: &DeploymentMap, cfg: IngestConfig) -> Result<Aligned> {
    if cfg.bucket_ms == 0 {
        return Err(Error::param("bucket length must be positive"));
    }
    let s = map.len();
    if rss.is_empty() || truth.is_empty() {
        return Err(Error::Alignment("a log contains no records".into()));
    }
    let targets = truth.iter().map(|r| r.target_id).max().unwrap_or(0) + 1;

    // latest reading per (bucket, sensor); equal timestamps go to the later row
    let mut readings: BTreeMap<u64, Vec<Option<(u64, f64)>>> = BTreeMap::new();
    for r in rss {
        let slot = &mut readings
            .entry(bucket_of(r.timestamp_ms, cfg.bucket_ms))
            .or_insert_with(|| vec![None; s])[r.sensor_id];
        if slot.is_none_or(|(ts, _)| r.timestamp_ms >= ts) {
            *slot = Some((r.timestamp_ms, r.rss));
        }
    }

    for r in truth {
        if !map.area().contains(&r.location) {
            log::warn!(
                "truth fix for target {} at {} ms lies outside the deployment area",
                r.target_id,
                r.timestamp_ms
            );
        }
    }
    let half = cfg.bucket_ms as f64 / 2.0;
    // nearest fix per (bucket, target) within half a bucket of the center
    let mut fixes: BTreeMap<u64, Vec<Option<(f64, Location)>>> = BTreeMap::new();
    for r in truth {
        let b = bucket_of(r.timestamp_ms, cfg.bucket_ms);
        let lo = b.saturating_sub(1);
        for cand in lo..=b + 1 {
            let offset = (r.timestamp_ms as f64 - (cand * cfg.bucket_ms) as f64).abs();
            if offset > half {
                continue;
            }
            let slot = &mut fixes.entry(cand).or_insert_with(|| vec![None; targets])[r.target_id];
            if slot.is_none_or(|(best, _)| offset <= best) {
                *slot = Some((offset, r.location));
            }
        }
    }

    let (r_lo, r_hi) = (*readings.keys().next().unwrap(), *readings.keys().next_back().unwrap());
    let t_lo = truth.iter().map(|r| r.timestamp_ms).min().unwrap();
    let t_hi = truth.iter().map(|r| r.timestamp_ms).max().unwrap();
    let (t_lo, t_hi) = (bucket_of(t_lo, cfg.bucket_ms), bucket_of(t_hi, cfg.bucket_ms));
    let (lo, hi) = (r_lo.max(t_lo), r_hi.min(t_hi));
    if lo > hi {
        return Err(Error::Alignment("the RSS and truth logs do not overlap in time".into()));
    }

    let mut report = DropReport {
        total_buckets: hi - lo + 1,
        ..DropReport::default()
    };
    let mut frames = Vec::new();
    for b in lo..=hi {
        let z: Option<Vec<f64>> = readings
            .get(&b)
            .and_then(|v| v.iter().map(|o| o.map(|(_, z)| z)).collect());
        let Some(z) = z else {
            report.incomplete += 1;
            continue;
        };
        let locs: Option<Vec<Location>> = fixes
            .get(&b)
            .and_then(|v| v.iter().map(|o| o.map(|(_, l)| l)).collect());
        let Some(locs) = locs else {
            report.missing_truth += 1;
            continue;
        };
        frames.push(MeasurementFrame::new(b, z, Some(locs))?);
        report.emitted += 1;
    }
    if report.dropped() > 0 {
        log::info!(
            "dropped {} of {} buckets ({} incomplete, {} without truth)",
            report.dropped(),
            report.total_buckets,
            report.incomplete,
            report.missing_truth
        );
    }
    Ok(Aligned {
        frames,
        report,
        targets,
    })
}

/// Reads both logs and aligns them.
pub fn parse_traces(rss_path: &Path, truth_path: &Path, map: &DeploymentMap, cfg: IngestConfig) -> Result<Aligned> {
    let rss = read_rss(open(rss_path)?, map.len()).map_err(|e| e.context(rss_path.display()))?;
    let truth = read_truth(open(truth_path)?).map_err(|e| e.context(truth_path.display()))?;
    align(&rss, &truth, map, cfg)
}

/// Writes every reading of `frames` as an RSS log, stamped at tick centers.
pub fn write_rss<W: Write>(writer: W, frames: &[MeasurementFrame], cfg: IngestConfig) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RSS_HEADER)?;
    for f in frames {
        let ts = (f.t * cfg.bucket_ms).to_string();
        for (i, z) in f.z.iter().enumerate() {
            w.write_record([ts.as_str(), &i.to_string(), &z.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

/// Writes the ground truth of `frames` as a truth log.
pub fn write_truth<W: Write>(writer: W, frames: &[MeasurementFrame], cfg: IngestConfig) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRUTH_HEADER)?;
    for f in frames {
        let ts = (f.t * cfg.bucket_ms).to_string();
        for (r, l) in f.truth_or_err()?.iter().enumerate() {
            w.write_record([ts.as_str(), &r.to_string(), &l.x.to_string(), &l.y.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn save_traces(rss_path: &Path, truth_path: &Path, frames: &[MeasurementFrame], cfg: IngestConfig) -> Result<()> {
    write_rss(create(rss_path)?, frames, cfg)?;
    write_truth(create(truth_path)?, frames, cfg)
}

/// `(distance to sensor i, reading of sensor i)` for every single-target frame.
pub fn build_fit_dataset(frames: &[MeasurementFrame], map: &DeploymentMap, i: usize) -> Result<Vec<(f64, f64)>> {
    if i >= map.len() {
        return Err(Error::param(format!("sensor {i} outside 0..{}", map.len())));
    }
    let s = map.sensor(i);
    frames
        .iter()
        .map(|f| {
            f.check_len(map.len())?;
            let truth = f.truth_or_err()?;
            if truth.len() != 1 {
                return Err(Error::Unsupported(format!(
                    "frame at tick {} has {} targets; fitting needs single-target data",
                    f.t,
                    truth.len()
                )));
            }
            Ok((floored_distance(&truth[0], &s), f.z[i]))
        })
        .collect()
}
