//! Detections as tab-separated text:
//! `image  side  center_x  center_y  bbox  score  method`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Detection, LocateError, Method, Result};
use crate::geom::{BBox, Side};

const HEADER: &str = "# image\tside\tcenter_x\tcenter_y\tbbox\tscore\tmethod";

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub image: String,
    pub detection: Detection,
}

pub fn write_detections(path: impl AsRef<Path>, records: &[DetectionRecord]) -> Result<()> {
    let mut text = String::from(HEADER);
    text.push('\n');
    for r in records {
        let d = &r.detection;
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.image, d.side, d.center.0, d.center.1, d.bbox, d.score, d.method
        );
    }
    fs::write(path, text)?;
    Ok(())
}

fn parse_line(line: &str) -> std::result::Result<DetectionRecord, String> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != 7 {
        return Err(format!("expected 7 fields, found {}", f.len()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("bad number `{s}`: {e}"));
    Ok(DetectionRecord {
        image: f[0].to_string(),
        detection: Detection {
            side: f[1].parse::<Side>()?,
            center: (num(f[2])?, num(f[3])?),
            bbox: f[4].parse::<BBox>()?,
            score: num(f[5])?,
            method: f[6].parse::<Method>()?,
        },
    })
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<Vec<DetectionRecord>> {
    fs::read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| parse_line(l).map_err(|msg| LocateError::Parse { line: i + 1, msg }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("detections.txt");
        let recs = vec![DetectionRecord {
            image: "images/a.pgm".into(),
            detection: Detection {
                side: Side::Right,
                center: (12.5, 40.0),
                bbox: BBox::new(3, 4, 50, 60),
                score: -0.125,
                method: Method::FcnRoi,
            },
        }];
        write_detections(&path, &recs).unwrap();
        assert_eq!(read_detections(&path).unwrap(), recs);
    }
}
