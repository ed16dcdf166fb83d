//! Tab-separated manifest, one image per line:
//!
//! ```text
//! image  width  height  left_grade  left_center  left_roi  right_grade  right_center  right_roi
//! ```
//!
//! `image` is relative to the manifest's directory; `width`/`height` are
//! the original raster extents. Grades are 0..=4, centres `x,y` at the
//! working (network input) scale, ROIs `x,y,w,h` at original scale. An
//! absent field is written `-`. Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DataError, Result};
use crate::geom::{BBox, Side};
use crate::imageproc::{read_pgm, GrayImage};
use crate::nn::GRADES;

pub const MANIFEST_HEADER: &str =
    "# image\twidth\theight\tleft_grade\tleft_center\tleft_roi\tright_grade\tright_center\tright_roi";

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KneeAnnotation {
    pub grade: Option<u8>,
    pub center: Option<(f64, f64)>,
    pub roi: Option<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub left: KneeAnnotation,
    pub right: KneeAnnotation,
}

impl ManifestRecord {
    pub fn knee(&self, side: Side) -> &KneeAnnotation {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn knee_mut(&mut self, side: Side) -> &mut KneeAnnotation {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }

    /// Highest annotated grade of the two knees.
    pub fn max_grade(&self) -> Option<u8> {
        self.left.grade.max(self.right.grade)
    }

    fn to_line(&self) -> String {
        fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
            v.map_or_else(|| "-".to_string(), f)
        }
        let mut line = format!("{}\t{}\t{}", self.image, self.width, self.height);
        for k in [&self.left, &self.right] {
            let _ = write!(
                line,
                "\t{}\t{}\t{}",
                opt(k.grade, |g| g.to_string()),
                opt(k.center, |(x, y)| format!("{x},{y}")),
                opt(k.roi, |b| b.to_string()),
            );
        }
        line
    }

    fn validate(&self) -> std::result::Result<(), String> {
        for side in Side::BOTH {
            let k = self.knee(side);
            if let Some(g) = k.grade {
                if g as usize >= GRADES {
                    return Err(format!("{side} grade {g} outside 0..={}", GRADES - 1));
                }
            }
            if let Some((x, y)) = k.center {
                if !(x.is_finite() && y.is_finite() && x >= 0.0 && y >= 0.0) {
                    return Err(format!("{side} centre ({x}, {y}) is not a valid position"));
                }
            }
            if let Some(b) = k.roi {
                if b.is_empty() {
                    return Err(format!("{side} roi {b} has zero area"));
                }
                if b.x < 0 || b.y < 0 || b.right() > self.width as i64 || b.bottom() > self.height as i64 {
                    return Err(format!("{side} roi {b} exceeds the {}x{} image", self.width, self.height));
                }
            }
        }
        if self.width == 0 || self.height == 0 {
            return Err("image extents must be positive".into());
        }
        Ok(())
    }
}

fn parse_field<T>(s: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> std::result::Result<Option<T>, String> {
    if s == "-" {
        return Ok(None);
    }
    parse(s).map(Some).ok_or_else(|| format!("bad {what} `{s}`"))
}

fn parse_line(line: &str) -> std::result::Result<ManifestRecord, String> {
    let f: Vec<&str> = line.split('\t').map(str::trim).collect();
    if f.len() != 9 {
        return Err(format!("expected 9 tab-separated fields, found {}", f.len()));
    }
    let dim = |s: &str, what: &str| s.parse::<usize>().map_err(|_| format!("bad {what} `{s}`"));
    let knee = |i: usize| -> std::result::Result<KneeAnnotation, String> {
        Ok(KneeAnnotation {
            grade: parse_field(f[i], "grade", |s| s.parse::<u8>().ok())?,
            center: parse_field(f[i + 1], "centre", |s| {
                let (x, y) = s.split_once(',')?;
                Some((x.trim().parse().ok()?, y.trim().parse().ok()?))
            })?,
            roi: parse_field(f[i + 2], "roi", |s| s.parse::<BBox>().ok())?,
        })
    };
    let rec = ManifestRecord {
        image: f[0].to_string(),
        width: dim(f[1], "width")?,
        height: dim(f[2], "height")?,
        left: knee(3)?,
        right: knee(6)?,
    };
    rec.validate()?;
    Ok(rec)
}

/// Parse manifest text without touching the filesystem.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| parse_line(l).map_err(|msg| DataError::Parse { line: i + 1, msg }))
        .collect()
}

/// Records plus the directory their image paths are relative to.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn image_path(&self, index: usize) -> PathBuf {
        self.root.join(&self.records[index].image)
    }

    pub fn load_image(&self, index: usize) -> Result<GrayImage> {
        Ok(read_pgm(self.image_path(index))?)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            root: self.root.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Knees per grade over both sides.
    pub fn grade_counts(&self) -> [usize; GRADES] {
        let mut counts = [0; GRADES];
        for r in &self.records {
            for side in Side::BOTH {
                if let Some(g) = r.knee(side).grade {
                    counts[g as usize] += 1;
                }
            }
        }
        counts
    }

    pub fn summary(&self) -> String {
        let counts = self.grade_counts();
        let total: usize = counts.iter().sum();
        let mut out = format!("{} images, {} graded knees\n", self.len(), total);
        for (g, c) in counts.iter().enumerate() {
            let pct = if total > 0 { 100.0 * *c as f64 / total as f64 } else { 0.0 };
            let _ = writeln!(out, "  grade {g}: {c:>6} ({pct:.1}%)");
        }
        out
    }
}

/// Read and validate a manifest; every referenced image must exist.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let records = parse_manifest(&fs::read_to_string(path)?)?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    for r in &records {
        let p = root.join(&r.image);
        if !p.is_file() {
            return Err(DataError::MissingImage(p));
        }
    }
    if records.is_empty() {
        log::warn!("manifest {} has no records", path.display());
    }
    Ok(Dataset { root, records })
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<()> {
    let mut text = String::from(MANIFEST_HEADER);
    text.push('\n');
    for r in records {
        text.push_str(&r.to_line());
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> ManifestRecord {
        ManifestRecord {
            image: "a.pgm".into(),
            width: 100,
            height: 80,
            left: KneeAnnotation {
                grade: Some(3),
                center: Some((70.25, 40.0)),
                roi: Some(BBox::new(50, 20, 40, 25)),
            },
            right: KneeAnnotation::default(),
        }
    }

    #[test]
    fn line_roundtrip() {
        let r = record();
        assert_eq!(parse_manifest(&r.to_line()).unwrap(), vec![r]);
    }

    #[test]
    fn grade_five_names_line() {
        let text = format!("{MANIFEST_HEADER}\n\na.pgm\t10\t10\t5\t-\t-\t-\t-\t-\n");
        match parse_manifest(&text) {
            Err(DataError::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("grade 5"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn roi_outside_image_rejected() {
        let mut r = record();
        r.left.roi = Some(BBox::new(90, 0, 20, 10));
        assert!(parse_manifest(&r.to_line()).is_err());
    }

    #[test]
    fn missing_image_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        write_manifest(&path, &[record()]).unwrap();
        assert!(matches!(load_manifest(&path), Err(DataError::MissingImage(_))));
        write_manifest(&path, &[]).unwrap();
        assert!(load_manifest(&path).unwrap().is_empty());
    }
}
