//! Feature file reader/writer.
//!
//! The format is a line-oriented text file:
//!
//! ```text
//! OCPAD-FEATURES v1 dim=<D>
//! <split>,<client_id>,<label>,<attack_type>,<video_id>,<frame_index>,<v1>,...,<vD>
//! ```
//!
//! `attack_type` is the empty field for real records. Floats are written
//! with Rust's shortest round-trip formatting, so save -> load -> save is
//! byte-identical; the writer always emits splits in the fixed order
//! enrolment, train, dev, test with records in stored order, LF line
//! endings, and a trailing newline.

use super::{Dataset, FeatureRecord, Label, SplitName};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

const MAGIC: &str = "OCPAD-FEATURES v1";

pub fn render_features(ds: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} dim={}", ds.dim);
    for name in SplitName::ALL {
        for r in &ds.split(name).records {
            let _ = write!(
                out,
                "{},{},{},{},{},{}",
                name.as_str(),
                r.client_id,
                r.label.as_str(),
                r.attack_type.as_deref().unwrap_or(""),
                r.video_id,
                r.frame_index
            );
            for v in r.vector.iter() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn save_features(ds: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, render_features(ds))?;
    Ok(())
}

pub fn load_features(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_features(&text)
}

pub fn parse_features(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, message: "empty file".into() })?;
    let dim = parse_header(header)?;
    let mut ds = Dataset::new(dim)?;

    for (idx, line) in lines {
        let line_no = idx + 1;
        let fail = |message: String| Error::Parse { line: line_no, message };
        if line.is_empty() {
            return Err(fail("empty record line".into()));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 + dim {
            return Err(fail(format!("expected {} fields, got {}", 6 + dim, fields.len())));
        }
        let split = SplitName::parse(fields[0])
            .ok_or_else(|| fail(format!("unknown split {:?}", fields[0])))?;
        let label = match fields[2] {
            "real" => Label::Real,
            "attack" => Label::Attack,
            other => return Err(fail(format!("unknown label {other:?}"))),
        };
        let attack_type = match (label, fields[3]) {
            (Label::Real, "") => None,
            (Label::Real, t) => {
                return Err(fail(format!("real record carries attack type {t:?}")))
            }
            (Label::Attack, "") => {
                return Err(fail("attack record missing attack type".into()))
            }
            (Label::Attack, t) => Some(t.to_string()),
        };
        let frame_index: u32 = fields[5]
            .parse()
            .map_err(|_| fail(format!("bad frame index {:?}", fields[5])))?;
        let mut values = Vec::with_capacity(dim);
        for raw in &fields[6..] {
            let v: f64 = raw
                .parse()
                .map_err(|_| fail(format!("bad feature value {raw:?}")))?;
            if !v.is_finite() {
                return Err(fail(format!("non-finite feature value {raw:?}")));
            }
            values.push(v);
        }
        let record = FeatureRecord::new(
            fields[1].to_string(),
            label,
            attack_type,
            fields[4].to_string(),
            frame_index,
            Vector::new(values).map_err(|e| fail(e.to_string()))?,
        )
        .map_err(|e| fail(e.to_string()))?;
        ds.push(split, record).map_err(|e| fail(e.to_string()))?;
    }
    Ok(ds)
}

fn parse_header(header: &str) -> Result<usize> {
    let fail = |message: String| Error::Parse { line: 1, message };
    let rest = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| fail(format!("bad magic, expected {MAGIC:?}")))?;
    let dim_part = rest
        .strip_prefix(" dim=")
        .ok_or_else(|| fail("header missing dim=<D>".into()))?;
    let dim: usize = dim_part
        .parse()
        .map_err(|_| fail(format!("bad dimension {dim_part:?}")))?;
    if dim == 0 {
        return Err(fail("dimension must be positive".into()));
    }
    Ok(dim)
}
