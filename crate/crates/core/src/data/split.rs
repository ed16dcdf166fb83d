use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, ManifestRecord, Result};

/// Record indices of each partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// False when some stratum was too small and the split fell back to a
    /// plain shuffle.
    pub stratified: bool,
}

/// Spread `total` over strata in proportion to `quotas`, by largest
/// remainder, never exceeding `caps`.
fn apportion(total: usize, quotas: &[f64], caps: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = quotas
        .iter()
        .zip(caps)
        .map(|(&q, &c)| (q.floor() as usize).min(c))
        .collect();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut left = total.saturating_sub(out.iter().sum());
    while left > 0 {
        let before = left;
        for &i in &order {
            if left > 0 && out[i] < caps[i] {
                out[i] += 1;
                left -= 1;
            }
        }
        if left == before {
            break;
        }
    }
    out
}

/// Deterministic train/validation/test partition.
///
/// Strata are keyed by the higher grade of an image's two knees
/// (ungraded images form their own stratum). Global sizes are
/// `round(train_frac * n)` and `round(val_frac * n)`; the test set takes
/// the rest. If any stratum has fewer than 3 images the split is a plain
/// seeded shuffle.
pub fn split(records: &[ManifestRecord], train_frac: f64, val_frac: f64, seed: u64) -> Result<Split> {
    if !(train_frac > 0.0 && val_frac >= 0.0 && train_frac + val_frac < 1.0) {
        return Err(DataError::InvalidConfig(format!(
            "split fractions train={train_frac} val={val_frac} must be positive and leave a test share"
        )));
    }
    let n = records.len();
    let n_train = (train_frac * n as f64).round() as usize;
    let n_val = ((val_frac * n as f64).round() as usize).min(n - n_train.min(n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut strata: BTreeMap<Option<u8>, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        strata.entry(r.max_grade()).or_default().push(i);
    }
    let stratified = strata.values().all(|s| s.len() >= 3);
    if !stratified {
        log::warn!("a grade stratum has fewer than 3 images; splitting without stratification");
        strata = BTreeMap::from([(None, (0..n).collect())]);
    }
    let groups: Vec<Vec<usize>> = strata
        .into_values()
        .map(|mut g| {
            g.shuffle(&mut rng);
            g
        })
        .collect();
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let train_q: Vec<f64> = sizes.iter().map(|&s| s as f64 * train_frac).collect();
    let train_n = apportion(n_train, &train_q, &sizes);
    let rest: Vec<usize> = sizes.iter().zip(&train_n).map(|(s, t)| s - t).collect();
    let val_q: Vec<f64> = sizes.iter().map(|&s| s as f64 * val_frac).collect();
    let val_n = apportion(n_val, &val_q, &rest);

    let mut out = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        stratified,
    };
    for ((g, &t), &v) in groups.iter().zip(&train_n).zip(&val_n) {
        out.train.extend_from_slice(&g[..t]);
        out.val.extend_from_slice(&g[t..t + v]);
        out.test.extend_from_slice(&g[t + v..]);
    }
    for part in [&mut out.train, &mut out.val, &mut out.test] {
        part.sort_unstable();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::KneeAnnotation;

    fn records(n: usize) -> Vec<ManifestRecord> {
        (0..n)
            .map(|i| ManifestRecord {
                image: format!("{i}.pgm"),
                width: 10,
                height: 10,
                left: KneeAnnotation {
                    grade: Some((i % 5) as u8),
                    ..Default::default()
                },
                right: KneeAnnotation::default(),
            })
            .collect()
    }

    #[test]
    fn sizes_and_determinism() {
        let r = records(100);
        let s = split(&r, 0.7, 0.1, 3).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (70, 10, 20));
        assert!(s.stratified);
        assert_eq!(s, split(&r, 0.7, 0.1, 3).unwrap());
        assert_ne!(s.train, split(&r, 0.7, 0.1, 4).unwrap().train);
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn tiny_strata_fall_back() {
        let s = split(&records(7), 0.7, 0.1, 0).unwrap();
        assert!(!s.stratified);
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), 7);
    }

    #[test]
    fn bad_fractions() {
        assert!(split(&records(10), 0.9, 0.1, 0).is_err());
        assert!(split(&records(10), 0.0, 0.1, 0).is_err());
    }
}
