//! On-disk formats: rig JSON, sequence CSV, model and report JSON.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use kpls_retarget::evaluation::CyclicReport;
use kpls_retarget::retarget::{FaceRig, FeaturePointFrame, RetargetModel};
use serde::{Deserialize, Serialize};

pub const MODEL_FORMAT: &str = "kpls-retarget-model";
pub const MODEL_VERSION: u32 = 1;
pub const REPORT_FORMAT: &str = "kpls-retarget-report";
pub const REPORT_VERSION: u32 = 1;

/// A parsed sequence file. `points` is known from the header even when there are no rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub frames: Vec<FeaturePointFrame>,
    pub points: Option<usize>,
    /// Row flagged in the optional `neutral` column.
    pub neutral: Option<usize>,
}

pub fn read_rig(path: &Path) -> Result<FaceRig> {
    let file = File::open(path).with_context(|| format!("cannot open rig {}", path.display()))?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .with_context(|| format!("invalid rig {}", path.display()))
}

pub fn write_rig(path: &Path, rig: &FaceRig) -> Result<()> {
    write_json(path, rig)
}

fn expected_column(i: usize) -> String {
    let axis = ["x", "y", "z"][i % 3];
    format!("p{}{axis}", i / 3)
}

pub fn read_sequence(path: &Path) -> Result<Sequence> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read sequence {}", path.display()))?;
    if text.trim().is_empty() {
        return Ok(Sequence {
            frames: Vec::new(),
            points: None,
            neutral: None,
        });
    }
    let where_ = |line: u64| format!("{}:{line}", path.display());
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .with_context(|| format!("{}: unreadable header", where_(1)))?
        .clone();
    if header.get(0) != Some("frame") {
        bail!("{}: first column must be `frame`", where_(1));
    }
    let has_neutral = header.get(1) == Some("neutral");
    let first = if has_neutral { 2 } else { 1 };
    let coords: Vec<&str> = header.iter().skip(first).collect();
    if coords.is_empty() || !coords.len().is_multiple_of(3) {
        bail!(
            "{}: expected p0x,p0y,p0z,... columns, found {} coordinate columns",
            where_(1),
            coords.len()
        );
    }
    for (i, name) in coords.iter().enumerate() {
        if *name != expected_column(i) {
            bail!(
                "{}: column {} is `{name}`, expected `{}`",
                where_(1),
                first + i + 1,
                expected_column(i)
            );
        }
    }
    let points = coords.len() / 3;

    let mut frames = Vec::new();
    let mut neutral = None;
    for record in reader.records() {
        let record = record.with_context(|| format!("{}: malformed record", path.display()))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize| record.get(col).unwrap_or("");
        let time_index: usize = field(0).parse().with_context(|| {
            format!(
                "{}: column `frame`: invalid frame index {:?}",
                where_(line),
                field(0)
            )
        })?;
        if has_neutral {
            match field(1) {
                "0" | "" => {}
                "1" => {
                    if neutral.replace(frames.len()).is_some() {
                        bail!("{}: more than one row is flagged neutral", where_(line));
                    }
                }
                other => bail!(
                    "{}: column `neutral` must be 0 or 1, got {other:?}",
                    where_(line)
                ),
            }
        }
        let mut pts = Vec::with_capacity(points);
        for p in 0..points {
            let mut xyz = [0.0; 3];
            for (k, v) in xyz.iter_mut().enumerate() {
                let col = first + 3 * p + k;
                let raw = field(col);
                *v = raw
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .with_context(|| {
                        format!(
                            "{}: column `{}`: invalid number {raw:?}",
                            where_(line),
                            expected_column(3 * p + k)
                        )
                    })?;
            }
            pts.push(xyz);
        }
        frames.push(FeaturePointFrame::new(time_index, pts));
    }
    Ok(Sequence {
        frames,
        points: Some(points),
        neutral,
    })
}

/// Writes frames with 17 significant digits. `neutral` adds the flag column.
pub fn write_sequence(
    path: &Path,
    frames: &[FeaturePointFrame],
    points: usize,
    neutral: Option<usize>,
) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["frame".to_string()];
    if neutral.is_some() {
        header.push("neutral".into());
    }
    header.extend((0..3 * points).map(expected_column));
    w.write_record(&header)?;
    for (row, f) in frames.iter().enumerate() {
        if f.points.len() != points {
            bail!(
                "frame {} has {} points, expected {points}",
                f.time_index,
                f.points.len()
            );
        }
        let mut rec = vec![f.time_index.to_string()];
        if let Some(n) = neutral {
            rec.push(u8::from(n == row).to_string());
        }
        rec.extend(f.points.iter().flatten().map(|x| format!("{x:.16e}")));
        w.write_record(&rec)?;
    }
    w.flush()
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Versioned container for a trained model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub method: String,
    pub pairs: usize,
    pub components: Option<usize>,
    pub model: RetargetModel,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

fn check_header(path: &Path, text: &str, format: &str, version: u32) -> Result<()> {
    let h: Header = serde_json::from_str(text)
        .with_context(|| format!("{}: not a {format} file", path.display()))?;
    if h.format != format {
        bail!(
            "{}: format is {:?}, expected {format:?}",
            path.display(),
            h.format
        );
    }
    if h.version != version {
        bail!(
            "{}: unsupported {format} version {} (this build reads version {version})",
            path.display(),
            h.version
        );
    }
    Ok(())
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read model {}", path.display()))?;
    check_header(path, &text, MODEL_FORMAT, MODEL_VERSION)?;
    serde_json::from_str(&text).with_context(|| format!("invalid model {}", path.display()))
}

pub fn write_model(path: &Path, model: &ModelFile) -> Result<()> {
    write_json(path, model)
}

/// Cyclic evaluation results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub format: String,
    pub version: u32,
    pub reports: Vec<CyclicReport>,
    /// `"<first> <= <other>"` lines comparing the first method with each other one.
    pub orderings: Vec<String>,
    /// Error reduction of the first method relative to each other one, in percent.
    pub improvements: Vec<Improvement>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Improvement {
    pub baseline: String,
    pub percent: Option<f64>,
}

pub fn write_report(path: &Path, report: &ReportFile) -> Result<()> {
    write_json(path, report)
}

#[cfg(test)]
pub fn read_report(path: &Path) -> Result<ReportFile> {
    let text = std::fs::read_to_string(path)?;
    check_header(path, &text, REPORT_FORMAT, REPORT_VERSION)?;
    Ok(serde_json::from_str(&text)?)
}

/// Per-frame errors as `frame,method,error`.
pub fn write_frame_errors(path: &Path, reports: &[CyclicReport]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(["frame", "method", "error"])?;
    for r in reports {
        for (t, e) in r.per_frame_errors.iter().enumerate() {
            w.write_record([t.to_string(), r.method.clone(), format!("{e:.16e}")])?;
        }
    }
    w.flush()
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
