//! Predictions as tab-separated text:
//! `image  side  bbox  p0 .. p4  grade  continuous`, with `-` for a missing
//! continuous grade.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{KneePrediction, QuantifyError, Result};
use crate::geom::{BBox, Side};
use crate::nn::GRADES;

const HEADER: &str = "# image\tside\tbbox\tp0\tp1\tp2\tp3\tp4\tgrade\tcontinuous";
const FIELDS: usize = 5 + GRADES;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub image: String,
    pub side: Side,
    pub bbox: BBox,
    pub prediction: KneePrediction,
}

pub fn write_predictions(path: impl AsRef<Path>, records: &[PredictionRecord]) -> Result<()> {
    let mut text = String::from(HEADER);
    text.push('\n');
    for r in records {
        let p = &r.prediction;
        let _ = write!(text, "{}\t{}\t{}", r.image, r.side, r.bbox);
        for v in p.probs {
            let _ = write!(text, "\t{v}");
        }
        let cont = p.grade_continuous.map_or("-".to_string(), |c| c.to_string());
        let _ = writeln!(text, "\t{}\t{cont}", p.grade_discrete);
    }
    fs::write(path, text)?;
    Ok(())
}

fn parse_line(line: &str) -> std::result::Result<PredictionRecord, String> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != FIELDS {
        return Err(format!("expected {FIELDS} fields, found {}", f.len()));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("bad number `{s}`: {e}"));
    let mut probs = [0.0; GRADES];
    for (p, s) in probs.iter_mut().zip(&f[3..3 + GRADES]) {
        *p = num(s)?;
    }
    let grade = f[3 + GRADES].parse::<u8>().map_err(|e| format!("bad grade: {e}"))?;
    if grade as usize >= GRADES {
        return Err(format!("grade {grade} out of range"));
    }
    let continuous = match f[4 + GRADES] {
        "-" => None,
        s => Some(num(s)?),
    };
    Ok(PredictionRecord {
        image: f[0].to_string(),
        side: f[1].parse()?,
        bbox: f[2].parse()?,
        prediction: KneePrediction {
            probs,
            grade_discrete: grade,
            grade_continuous: continuous,
            out_of_range: continuous.is_some_and(|c| !(0.0..=(GRADES - 1) as f64).contains(&c)),
        },
    })
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    fs::read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| parse_line(l).map_err(|msg| QuantifyError::Parse { line: i + 1, msg }))
        .collect()
}
