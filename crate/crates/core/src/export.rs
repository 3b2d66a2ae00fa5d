//! Flat text export for detector-training toolchains.
//!
//! One box per line: `frame class cx cy cz l w h yaw score`, fields separated
//! by single spaces, floats in fixed notation with six decimals.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{OrientedBox3, Point3};
use crate::scene::Annotation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Flat,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" | "txt" => Ok(ExportFormat::Flat),
            other => Err(Error::Export(format!("unknown format '{other}' (expected 'flat')"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatBox {
    pub frame: u64,
    pub class_label: String,
    pub box3: OrientedBox3,
    pub score: f64,
}

pub fn export(annotations: &[Annotation], format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::Flat => to_flat(annotations),
    }
}

pub fn to_flat(annotations: &[Annotation]) -> Result<String> {
    let mut out = String::new();
    for a in annotations {
        if a.class_label.is_empty() || a.class_label.chars().any(char::is_whitespace) {
            return Err(Error::Export(format!(
                "class label {:?} of track {} cannot be written as a single token",
                a.class_label, a.track_id
            )));
        }
        let b = &a.box3;
        let c = b.center();
        let _ = writeln!(
            out,
            "{} {} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
            a.frame, a.class_label, c.x, c.y, c.z, b.length(), b.width(), b.height(), b.yaw(), a.score
        );
    }
    Ok(out)
}

/// Parses the flat format back. Blank lines are ignored.
pub fn parse_flat(text: &str) -> Result<Vec<FlatBox>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Export(format!("line {}: {what}", n + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 10 {
            return Err(bad(&format!("expected 10 fields, found {}", fields.len())));
        }
        let frame = fields[0].parse().map_err(|_| bad("frame is not an integer"))?;
        let mut v = [0.0; 8];
        for (slot, f) in v.iter_mut().zip(&fields[2..]) {
            *slot = f.parse().map_err(|_| bad(&format!("'{f}' is not a number")))?;
        }
        let box3 = OrientedBox3::new(Point3::new(v[0], v[1], v[2]), v[3], v[4], v[5], v[6])
            .map_err(|e| bad(&e.to_string()))?;
        out.push(FlatBox {
            frame,
            class_label: fields[1].to_string(),
            box3,
            score: v[7],
        });
    }
    Ok(out)
}
