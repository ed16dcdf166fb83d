//! Brute-force reference implementations and random instance generators
//! shared by the integration tests.

#![allow(dead_code)]

use kneeoa::geom::BBox;
use kneeoa::imageproc::{BinaryMask, Component, GrayImage};
use rand::Rng;

/// Jaccard index by enumerating every pixel of the union's bounding region.
pub fn jaccard_pixels(a: &BBox, b: &BBox) -> f64 {
    let inside = |r: &BBox, x: i64, y: i64| x >= r.x && x < r.x + r.w && y >= r.y && y < r.y + r.h;
    let (x0, y0) = (a.x.min(b.x), a.y.min(b.y));
    let (x1, y1) = ((a.x + a.w).max(b.x + b.w), (a.y + a.h).max(b.y + b.h));
    let (mut inter, mut union) = (0u64, 0u64);
    for y in y0..y1 {
        for x in x0..x1 {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    inter as f64 / union as f64
}

/// Per-class counts straight from the definitions.
pub struct ClassOracle {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub support: Vec<usize>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub mse: f64,
}

pub fn class_oracle(preds: &[usize], labels: &[usize], k: usize) -> ClassOracle {
    let pairs: Vec<(usize, usize)> = preds.iter().copied().zip(labels.iter().copied()).collect();
    let mut o = ClassOracle {
        precision: vec![],
        recall: vec![],
        f1: vec![],
        support: vec![],
        accuracy: 0.0,
        macro_f1: 0.0,
        mse: 0.0,
    };
    for c in 0..k {
        let tp = pairs.iter().filter(|&&(p, l)| p == c && l == c).count();
        let fp = pairs.iter().filter(|&&(p, l)| p == c && l != c).count();
        let fne = pairs.iter().filter(|&&(p, l)| p != c && l == c).count();
        let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let r = if tp + fne == 0 { 0.0 } else { tp as f64 / (tp + fne) as f64 };
        o.precision.push(p);
        o.recall.push(r);
        o.f1.push(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) });
        o.support.push(tp + fne);
    }
    let n = pairs.len() as f64;
    o.accuracy = pairs.iter().filter(|(p, l)| p == l).count() as f64 / n;
    o.macro_f1 = o.f1.iter().sum::<f64>() / k as f64;
    o.mse = pairs.iter().map(|&(p, l)| (p as f64 - l as f64).powi(2)).sum::<f64>() / n;
    o
}

/// One-vs-rest AUC as the Mann-Whitney statistic over all positive and
/// negative pairs, ties counting one half.
pub fn auc_pairs(probs: &[Vec<f64>], labels: &[usize], class: usize) -> Option<f64> {
    let pos: Vec<f64> = probs.iter().zip(labels).filter(|(_, &l)| l == class).map(|(p, _)| p[class]).collect();
    let neg: Vec<f64> = probs.iter().zip(labels).filter(|(_, &l)| l != class).map(|(p, _)| p[class]).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for &p in &pos {
        for &q in &neg {
            wins += if p > q {
                1.0
            } else if p == q {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

/// Euclidean template distance at every stride-grid window, computed in
/// floating point from scratch.
pub fn distance_map_naive(img: &GrayImage, tpl: &GrayImage, stride: usize) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    let mut y = 0;
    while y + tpl.height() <= img.height() {
        let mut row = Vec::new();
        let mut x = 0;
        while x + tpl.width() <= img.width() {
            let mut acc = 0.0f64;
            for ty in 0..tpl.height() {
                for tx in 0..tpl.width() {
                    let d = img.get(x + tx, y + ty) as f64 - tpl.get(tx, ty) as f64;
                    acc += d * d;
                }
            }
            row.push(acc.sqrt());
            x += stride;
        }
        rows.push(row);
        y += stride;
    }
    rows
}

/// Otsu threshold by exhaustive search with exact rational comparison of
/// the between-class variance `(n1 s0 - n0 s1)^2 / (n0 n1)`; lowest
/// maximiser wins.
pub fn otsu_exhaustive(pixels: &[u8]) -> Option<u8> {
    let mut best: Option<(u8, i128, i128)> = None;
    for t in 0..255u32 {
        let (mut n0, mut s0, mut n1, mut s1) = (0i128, 0i128, 0i128, 0i128);
        for &v in pixels {
            if u32::from(v) <= t {
                n0 += 1;
                s0 += i128::from(v);
            } else {
                n1 += 1;
                s1 += i128::from(v);
            }
        }
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let num = (n1 * s0 - n0 * s1).pow(2);
        let den = n0 * n1;
        let better = match best {
            None => true,
            Some((_, bn, bd)) => num * bd > bn * den,
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }
    best.map(|b| b.0)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// 8-connected components by union-find, in the library's order: area
/// descending, then bounding-box top, then left.
pub fn components_union_find(mask: &BinaryMask) -> Vec<Component> {
    let (w, h) = (mask.width(), mask.height());
    let mut parent: Vec<usize> = (0..w * h).collect();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            for (dx, dy) in [(1i64, 0i64), (-1, 1), (0, 1), (1, 1)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx >= 0 && (nx as usize) < w && (ny as usize) < h && mask.get(nx as usize, ny as usize) {
                    let (a, b) = (find(&mut parent, y * w + x), find(&mut parent, ny as usize * w + nx as usize));
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<(usize, usize)>> = Default::default();
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                let r = find(&mut parent, y * w + x);
                groups.entry(r).or_default().push((x, y));
            }
        }
    }
    let mut out: Vec<Component> = groups
        .into_values()
        .map(|px| {
            let n = px.len() as f64;
            let x0 = px.iter().map(|p| p.0).min().unwrap();
            let x1 = px.iter().map(|p| p.0).max().unwrap();
            let y0 = px.iter().map(|p| p.1).min().unwrap();
            let y1 = px.iter().map(|p| p.1).max().unwrap();
            Component {
                area: px.len(),
                centroid: (
                    px.iter().map(|p| p.0 as f64).sum::<f64>() / n,
                    px.iter().map(|p| p.1 as f64).sum::<f64>() / n,
                ),
                bbox: BBox::new(x0 as i64, y0 as i64, (x1 - x0 + 1) as i64, (y1 - y0 + 1) as i64),
            }
        })
        .collect();
    out.sort_by_key(|c| (std::cmp::Reverse(c.area), c.bbox.y, c.bbox.x));
    out
}

pub fn random_box(rng: &mut impl Rng, extent: i64) -> BBox {
    BBox::new(
        rng.gen_range(0..extent),
        rng.gen_range(0..extent),
        rng.gen_range(1..=extent / 2),
        rng.gen_range(1..=extent / 2),
    )
}

pub fn random_image(rng: &mut impl Rng, w: usize, h: usize, levels: u8) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| {
        let l = rng.gen_range(0..levels) as u32;
        (l * 255 / (levels as u32 - 1).max(1)) as u8
    })
}

pub fn random_mask(rng: &mut impl Rng, w: usize, h: usize, density: f64) -> BinaryMask {
    let bits = (0..w * h).map(|_| rng.gen_bool(density)).collect();
    BinaryMask::new(w, h, bits).unwrap()
}

/// Probability rows drawn from a coarse grid so that ties occur.
pub fn random_probs(rng: &mut impl Rng, n: usize, k: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0..6) as f64 + 0.5).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        })
        .collect()
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

/// Compare one library metric with its oracle on a random instance drawn
/// from `rng`. `Err` describes the first disagreement.
pub type OracleCheck = fn(&mut rand_chacha::ChaCha8Rng) -> Result<(), String>;

pub const ORACLE_CHECKS: &[(&str, OracleCheck)] = &[
    ("jaccard", check_jaccard),
    ("classification_report", check_classification),
    ("roc_auc_ovr", check_roc),
    ("template_distance_map", check_template),
    ("otsu_threshold", check_otsu),
    ("connected_components", check_components),
];

pub fn check_jaccard(rng: &mut rand_chacha::ChaCha8Rng) -> Result<(), String> {
    let (a, b) = (random_box(rng, 24), random_box(rng, 24));
    let got = kneeoa::metrics::jaccard(&a, &b).map_err(|e| e.to_string())?;
    let want = jaccard_pixels(&a, &b);
    if got == want {
        Ok(())
    } else {
        Err(format!("{a} vs {b}: {got} != {want}"))
    }
}

pub fn check_classification(rng: &mut rand_chacha::ChaCha8Rng) -> Result<(), String> {
    let n = rng.gen_range(1..60);
    let k = 5;
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let preds: Vec<usize> = labels
        .iter()
        .map(|&l| if rng.gen_bool(0.5) { l } else { rng.gen_range(0..k) })
        .collect();
    let r = kneeoa::metrics::classification_report(&preds, &labels).map_err(|e| e.to_string())?;
    let o = class_oracle(&preds, &labels, k);
    let vec_close = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| close(*x, *y));
    if !vec_close(&r.precision, &o.precision)
        || !vec_close(&r.recall, &o.recall)
        || !vec_close(&r.f1, &o.f1)
        || r.support != o.support
        || !close(r.accuracy, o.accuracy)
        || !close(r.macro_f1, o.macro_f1)
        || !close(r.mse, o.mse)
    {
        return Err(format!("preds {preds:?} labels {labels:?}"));
    }
    for (c, row) in r.confusion.iter().enumerate() {
        for (p, &v) in row.iter().enumerate() {
            let want = preds.iter().zip(&labels).filter(|&(&pp, &ll)| pp == p && ll == c).count();
            if v != want {
                return Err(format!("confusion[{c}][{p}] {v} != {want}"));
            }
        }
    }
    Ok(())
}

pub fn check_roc(rng: &mut rand_chacha::ChaCha8Rng) -> Result<(), String> {
    let n = rng.gen_range(2..40);
    let k = 5;
    let probs = random_probs(rng, n, k);
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let r = kneeoa::metrics::roc_auc_ovr(&probs, &labels).map_err(|e| e.to_string())?;
    let want: Vec<Option<f64>> = (0..k).map(|c| auc_pairs(&probs, &labels, c)).collect();
    let same = r.per_class.iter().zip(&want).all(|(a, b)| match (a, b) {
        (Some(a), Some(b)) => close(*a, *b),
        (None, None) => true,
        _ => false,
    });
    let defined: Vec<f64> = want.iter().flatten().copied().collect();
    let macro_want = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let macro_ok = match (r.macro_auc, macro_want) {
        (Some(a), Some(b)) => close(a, b),
        (None, None) => true,
        _ => false,
    };
    if same && macro_ok {
        Ok(())
    } else {
        Err(format!("{:?} != {want:?}", r.per_class))
    }
}

pub fn check_template(rng: &mut rand_chacha::ChaCha8Rng) -> Result<(), String> {
    let (w, h) = (rng.gen_range(4..20), rng.gen_range(4..20));
    let img = random_image(rng, w, h, 200);
    let (tw, th) = (rng.gen_range(1..=w.min(6)), rng.gen_range(1..=h.min(6)));
    let tpl = random_image(rng, tw, th, 200);
    let stride = rng.gen_range(1..4);
    let got = kneeoa::imageproc::template_distance_map(&img, &tpl, stride).map_err(|e| e.to_string())?;
    let want = distance_map_naive(&img, &tpl, stride);
    if got.height() != want.len() || got.width() != want[0].len() {
        return Err(format!("map {}x{} vs {}x{}", got.width(), got.height(), want[0].len(), want.len()));
    }
    for (i, row) in want.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !close(got.get(j, i), v) {
                return Err(format!("cell ({j},{i}) {} != {v}", got.get(j, i)));
            }
        }
    }
    Ok(())
}

pub fn check_otsu(rng: &mut rand_chacha::ChaCha8Rng) -> Result<(), String> {
    let levels = rng.gen_range(2..=255u8);
    let (w, h) = (rng.gen_range(1..16), rng.gen_range(2..16));
    let img = random_image(rng, w, h, levels);
    let got = kneeoa::imageproc::otsu_threshold(&img).ok();
    let want = otsu_exhaustive(img.pixels());
    if got == want {
        Ok(())
    } else {
        Err(format!("{got:?} != {want:?} on {:?}", img.pixels()))
    }
}

pub fn check_components(rng: &mut rand_chacha::ChaCha8Rng) -> Result<(), String> {
    let density = rng.gen_range(0.05..0.7);
    let (w, h) = (rng.gen_range(1..20), rng.gen_range(1..20));
    let mask = random_mask(rng, w, h, density);
    let got = kneeoa::imageproc::connected_components(&mask);
    let want = components_union_find(&mask);
    let same = got.len() == want.len()
        && got.iter().zip(&want).all(|(a, b)| {
            a.area == b.area && a.bbox == b.bbox && close(a.centroid.0, b.centroid.0) && close(a.centroid.1, b.centroid.1)
        });
    if same {
        Ok(())
    } else {
        Err(format!("{} components vs {}", got.len(), want.len()))
    }
}

/// `(layer, printed output shape, shape the layer rules give where the
/// printed one is inconsistent)`.
pub type ShapeRow = (&'static str, [usize; 3], Option<[usize; 3]>);

const CNN_TRUNK_TAIL: [ShapeRow; 4] = [
    ("maxPool3", [96, 11, 17], None),
    ("conv4-1", [128, 11, 17], None),
    ("conv4-2", [128, 11, 17], None),
    ("maxPool4", [128, 5, 8], None),
];

pub fn published_shapes(preset: &str) -> Vec<ShapeRow> {
    let deep = |last: Vec<ShapeRow>| {
        let mut rows: Vec<ShapeRow> = vec![
            ("conv1", [32, 100, 150], None),
            ("maxPool1", [32, 49, 74], None),
            ("conv2-1", [64, 49, 74], None),
            ("conv2-2", [64, 49, 74], None),
            ("maxPool2", [64, 24, 36], None),
            ("conv3-1", [96, 24, 36], None),
            ("conv3-2", [96, 24, 36], None),
        ];
        rows.extend(CNN_TRUNK_TAIL);
        rows.extend(last);
        rows
    };
    match preset {
        // The FCN table lists no shapes; these follow from same-padded 3x3
        // convolutions, 2x2 pooling and 8x upsampling of a 256x256 input.
        "fcn-center-best" => vec![
            ("conv1", [32, 256, 256], None),
            ("maxPool1", [32, 128, 128], None),
            ("conv2_1", [32, 128, 128], None),
            ("conv2_2", [32, 128, 128], None),
            ("maxPool2", [32, 64, 64], None),
            ("conv3_1", [64, 64, 64], None),
            ("conv3_2", [64, 64, 64], None),
            ("maxPool3", [64, 32, 32], None),
            ("conv4_1", [96, 32, 32], None),
            ("conv4_2", [96, 32, 32], None),
            ("upSamp5", [96, 256, 256], None),
            ("conv5", [1, 256, 256], None),
        ],
        "cnn-clsf-best" => vec![
            ("conv1", [32, 100, 150], None),
            ("maxPool1", [32, 49, 74], None),
            ("conv2", [64, 49, 74], None),
            ("maxPool2", [64, 24, 36], None),
            ("conv3", [96, 24, 36], None),
            ("maxPool3", [96, 11, 17], None),
            ("conv4", [128, 11, 17], None),
            ("maxPool4", [128, 5, 8], None),
            ("fc5", [1024, 1, 1], None),
            ("fc6", [5, 1, 1], None),
        ],
        "cnn-reg-best" => vec![
            ("conv1", [32, 100, 158], Some([32, 100, 150])),
            ("maxPool1", [32, 49, 74], None),
            ("conv2", [64, 49, 74], None),
            ("maxPool2", [64, 24, 36], None),
            ("conv3-1", [64, 24, 36], None),
            ("conv3-2", [64, 24, 36], None),
            ("maxPool3", [64, 11, 17], None),
            ("conv4-1", [96, 11, 17], Some([128, 11, 17])),
            ("conv4-2", [96, 11, 17], Some([128, 11, 17])),
            ("maxPool4", [96, 5, 8], Some([128, 5, 8])),
            ("fc5", [1024, 1, 1], None),
            ("fc6", [1, 1, 1], None),
        ],
        "cnn-joint-best" => deep(vec![
            ("fc5", [512, 1, 1], None),
            ("fc6-Clsf", [5, 1, 1], None),
            ("fc6-Reg", [1, 1, 1], None),
        ]),
        "cnn-ordinal" => deep(vec![
            ("fc5", [512, 1, 1], None),
            ("fc6-Clsf", [5, 1, 1], None),
            ("fc7-Reg", [1, 1, 1], None),
        ]),
        other => panic!("no published shapes for {other}"),
    }
}

pub const SHAPE_PRESETS: [&str; 5] = ["fcn-center-best", "cnn-clsf-best", "cnn-reg-best", "cnn-joint-best", "cnn-ordinal"];

/// Compare a preset's layer shapes against the published rows. Returns the
/// number of rows checked and the number that follow a documented
/// divergence.
pub fn check_shapes(preset: &str) -> Result<(usize, usize), String> {
    let spec = kneeoa::nn::preset(preset).map_err(|e| e.to_string())?;
    let shapes = spec.shapes().map_err(|e| e.to_string())?;
    let rows = published_shapes(preset);
    let mut divergent = 0;
    for (layer, printed, rule) in &rows {
        let got = shapes
            .iter()
            .find(|s| s.name == *layer)
            .ok_or_else(|| format!("{preset}: no layer {layer}"))?;
        let mut got3 = [1usize; 3];
        for (slot, &v) in got3.iter_mut().zip(&got.output) {
            *slot = v;
        }
        let want = rule.unwrap_or(*printed);
        divergent += usize::from(rule.is_some());
        if got3 != want {
            return Err(format!("{preset}/{layer}: {:?} != {want:?}", got.output));
        }
    }
    Ok((rows.len(), divergent))
}

/// `(preset, layer, aperture)` stated for the localisation networks.
pub const APERTURES: [(&str, &str, usize); 5] = [
    ("fcn-initial", "conv5", 9),
    ("fcn-conv4", "conv4", 11),
    ("fcn-pool2", "conv7", 34),
    ("fcn-pool3", "conv7", 42),
    ("fcn-center-best", "conv4_2", 66),
];
