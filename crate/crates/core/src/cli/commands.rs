use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{
    DetectArgs, EvaluateArgs, ExtractArgs, GradcheckArgs, MaskArg, OptimizerArg, PipelineArgs, RfArgs, RunDir, SynthArgs,
    TrainCnnArgs, TrainFcnArgs,
};
use crate::data::{load_manifest, synth_generate, Dataset, MaskMode, ManifestRecord, SyntheticConfig};
use crate::error::{Context, Error, Result};
use crate::geom::{BBox, Side};
use crate::gradsuite::{self, CaseResult, Precision, NETWORK_TOLERANCE, OPS};
use crate::imageproc::{write_pgm, GrayImage};
use crate::locate::{
    collect_svm_samples, extract_roi, extract_templates, fcn_localize_centers, fcn_localize_roi, fcn_samples,
    locate_templates, preprocess_downscale, svm_detect, train_fcn as fit_fcn, write_detections, CenterRegion,
    DetectionRecord, FcnTrainConfig, KneeDetections, LinearModel, Method, SvmConfig, SvmDetectConfig, TemplateConfig,
    ROI_HEIGHT, ROI_WIDTH,
};
use crate::metrics::{classification_report, detection_report, roc_auc_ovr, DetectionReport};
use crate::nn::{
    default_rf_layer, load_checkpoint, preset, receptive_field, save_checkpoint, EpochStats, OptimizerConfig, GRADES,
    PRESET_NAMES,
};
use crate::parallel::par_map;
use crate::quantify::{
    evaluate_quantifier, knee_samples, train_quantifier, write_predictions, KneeSet, Pipeline, PredictionRecord,
    TrainConfig,
};
use crate::reference;

/// Centre annotations are given on a square canvas of this size.
const ANNOTATION_CANVAS: f64 = 256.0;
/// Templates kept per grade.
const TEMPLATES_PER_GRADE: usize = 5;

fn manifest_path(data: &Path) -> PathBuf {
    if data.is_dir() {
        data.join("manifest.tsv")
    } else {
        data.to_path_buf()
    }
}

fn load_dataset(data: &Path) -> Result<Dataset> {
    let path = manifest_path(data);
    load_manifest(&path).context(|| format!("loading dataset {}", path.display()))
}

fn load_images(ds: &Dataset, threads: usize) -> Result<Vec<GrayImage>> {
    let idx: Vec<usize> = (0..ds.len()).collect();
    par_map(&idx, threads, |&i| {
        ds.load_image(i)
            .context(|| format!("reading {}", ds.image_path(i).display()))
    })
    .into_iter()
    .collect()
}

fn optimizer(kind: OptimizerArg, lr: Option<f64>) -> OptimizerConfig {
    let base = match kind {
        OptimizerArg::Adam => OptimizerConfig::adam(),
        OptimizerArg::Sgd => OptimizerConfig::sgd(),
    };
    match lr {
        Some(lr) => base.with_lr(lr),
        None => base,
    }
}

fn record_history(run: &mut RunDir, history: &[EpochStats]) {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
    for e in history {
        run.metric(
            &format!("epoch.{}", e.epoch),
            format!(
                "train_loss={:.6} val_loss={} val_accuracy={} val_mse={}",
                e.train_loss,
                opt(e.val_loss),
                opt(e.val_accuracy),
                opt(e.val_mse)
            ),
        );
    }
}

fn annotated_rois(records: &[ManifestRecord]) -> BTreeMap<(String, Side), BBox> {
    records
        .iter()
        .flat_map(|r| Side::BOTH.map(|s| (r.image.clone(), s, r.knee(s).roi)))
        .filter_map(|(i, s, roi)| roi.map(|b| ((i, s), b)))
        .collect()
}

fn detection_metrics(run: &mut RunDir, report: &DetectionReport) {
    for (name, f) in ["ji_gt_0", "ji_ge_0.25", "ji_ge_0.5", "ji_ge_0.75"].iter().zip(report.fractions) {
        run.metric(&format!("detection.{name}"), format!("{f:.6}"));
    }
    run.metric("detection.ji_mean", format!("{:.6}", report.mean));
    run.metric("detection.ji_std", format!("{:.6}", report.std));
}

fn reference_footer() -> String {
    let mut out = String::from("\nPublished OAI/MOST figures (context only, not reproduced here)\n");
    for r in reference::ALL {
        let _ = writeln!(out, "  {:<40} {:.3}", r.name, r.value);
    }
    out
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let mut run = RunDir::create(&a.out)?;
    run.write_config("synth", a)?;
    let cfg = SyntheticConfig {
        count: a.count,
        width: a.width,
        height: a.height,
        noise: a.noise,
        seed: a.seed,
        ..Default::default()
    };
    let set = synth_generate(&cfg)?;
    let ds = set.write(&a.out).context(|| format!("writing dataset to {}", a.out.display()))?;
    run.metric("images", ds.len());
    for (g, c) in ds.grade_counts().iter().enumerate() {
        run.metric(&format!("grade.{g}"), c);
    }
    run.write("report.txt", &ds.summary())?;
    run.finish()
}

pub fn train_fcn(a: &TrainFcnArgs) -> Result<()> {
    let spec = preset(&a.preset)?;
    let [_, h, w] = spec.input_shape;
    let mode = match a.mask {
        MaskArg::Roi => MaskMode::Roi,
        MaskArg::Center => MaskMode::Center,
    };
    let ds = load_dataset(&a.data)?;
    let val_ds = a.val_data.as_deref().map(load_dataset).transpose()?;
    let mut run = RunDir::create(&a.out)?;
    run.write_config("train-fcn", a)?;

    let train = fcn_samples(&load_images(&ds, 1)?, &ds.records, mode, (w, h))?;
    let val = match &val_ds {
        Some(v) => Some(fcn_samples(&load_images(v, 1)?, &v.records, mode, (w, h))?),
        None => None,
    };
    for (i, why) in &train.skipped {
        log::warn!("skipping {}: {why}", ds.records[*i].image);
    }
    let cfg = FcnTrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        optimizer: optimizer(a.optimizer, a.lr),
        seed: a.seed,
    };
    let (net, history) = fit_fcn(&spec, &train, val.as_ref(), &cfg)?;
    save_checkpoint(&net, None, a.epochs as u64, run.path("fcn.oakn"))?;

    run.metric("preset", &a.preset);
    run.metric("train_samples", train.len());
    run.metric("skipped", train.skipped.len());
    if let Some(v) = &val {
        run.metric("val_samples", v.len());
    }
    record_history(&mut run, &history);
    run.finish()
}

/// Knees to learn template or SVM appearance from: the working raster and
/// the annotated centres scaled onto it.
fn working_samples(ds: &Dataset, images: &[GrayImage], downscale: f64) -> Result<Vec<(GrayImage, Vec<(f64, f64, Option<u8>)>)>> {
    images
        .iter()
        .zip(&ds.records)
        .map(|(img, rec)| {
            let work = preprocess_downscale(img, downscale)?;
            let (sx, sy) = (
                work.width() as f64 / ANNOTATION_CANVAS,
                work.height() as f64 / ANNOTATION_CANVAS,
            );
            let centres = Side::BOTH
                .iter()
                .filter_map(|&s| rec.knee(s).center.map(|(x, y)| (x * sx, y * sy, rec.knee(s).grade)))
                .collect();
            Ok((work, centres))
        })
        .collect()
}

enum Detector {
    Fcn(Box<crate::nn::Network<f32>>, Option<CenterRegion>),
    Template(Vec<GrayImage>, TemplateConfig),
    Svm(LinearModel, SvmDetectConfig, f64),
}

impl Detector {
    fn run(&self, img: &GrayImage) -> crate::locate::Result<KneeDetections> {
        match self {
            Detector::Fcn(net, None) => fcn_localize_roi(img, net),
            Detector::Fcn(net, Some(region)) => fcn_localize_centers(img, net, region),
            Detector::Template(templates, cfg) => locate_templates(img, templates, cfg),
            Detector::Svm(model, cfg, downscale) => {
                let work = preprocess_downscale(img, *downscale)?;
                svm_detect(&work, model, (img.width(), img.height()), cfg)
            }
        }
    }
}

fn build_detector(a: &DetectArgs, run: &mut RunDir) -> Result<Detector> {
    let need = |flag: &str| Error::Usage(format!("--method {} requires --{flag}", a.method));
    match a.method {
        Method::FcnRoi | Method::FcnCenter => {
            let path = a.model.as_ref().ok_or_else(|| need("model"))?;
            let net = load_checkpoint::<f32>(path)
                .context(|| format!("loading {}", path.display()))?
                .network;
            let centers = (a.method == Method::FcnCenter).then(|| CenterRegion {
                canvas: (a.canvas.w, a.canvas.h),
                region: a.region.map_or(CenterRegion::default().region, |r| (r.w, r.h)),
            });
            Ok(Detector::Fcn(Box::new(net), centers))
        }
        Method::Template => {
            let path = a.train_data.as_ref().ok_or_else(|| need("train-data"))?;
            let ds = load_dataset(path)?;
            let work = working_samples(&ds, &load_images(&ds, 1)?, a.downscale)?;
            let mut picked: Vec<(&GrayImage, (f64, f64))> = Vec::new();
            let mut per_grade = [0usize; GRADES];
            for (img, centres) in &work {
                for &(x, y, grade) in centres {
                    let slot = grade.map_or(0, |g| g as usize);
                    if per_grade[slot] < TEMPLATES_PER_GRADE {
                        per_grade[slot] += 1;
                        picked.push((img, (x, y)));
                    }
                }
            }
            if picked.is_empty() {
                return Err(Error::Usage(format!("{} has no annotated knee centres", path.display())));
            }
            let templates = extract_templates(&picked, a.window.w)?;
            run.metric("templates", templates.len());
            let defaults = TemplateConfig::default();
            Ok(Detector::Template(
                templates,
                TemplateConfig {
                    stride: a.stride,
                    region: a.region.map_or(defaults.region, |r| (r.w, r.h)),
                    downscale: a.downscale,
                },
            ))
        }
        Method::Svm => {
            let path = a.train_data.as_ref().ok_or_else(|| need("train-data"))?;
            let ds = load_dataset(path)?;
            let work = working_samples(&ds, &load_images(&ds, 1)?, a.downscale)?;
            let samples: Vec<(&GrayImage, Vec<(f64, f64)>)> = work
                .iter()
                .map(|(img, c)| (img, c.iter().map(|&(x, y, _)| (x, y)).collect()))
                .collect();
            let patch = (a.window.w, a.window.h);
            let (xs, ys) = collect_svm_samples(&samples, patch, a.negatives, a.seed)?;
            let cfg = SvmConfig {
                seed: a.seed,
                ..Default::default()
            };
            let fit = crate::locate::train_svm(&xs, &ys, patch, &cfg)?;
            fit.model.save(run.path("svm.json"))?;
            run.metric("svm.samples", xs.len());
            run.metric("svm.objective", format!("{:.6}", fit.objective.last().copied().unwrap_or(f64::NAN)));
            let defaults = SvmDetectConfig::default();
            Ok(Detector::Svm(
                fit.model,
                SvmDetectConfig {
                    stride: a.stride,
                    region: a.region.map_or(defaults.region, |r| (r.w, r.h)),
                },
                a.downscale,
            ))
        }
    }
}

pub fn detect(a: &DetectArgs, threads: usize) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let mut run = RunDir::create(&a.out)?;
    run.write_config("detect", a)?;
    let detector = build_detector(a, &mut run)?;
    let images = load_images(&ds, threads)?;

    let results = par_map(&images, threads, |img| detector.run(img));
    let mut records = Vec::new();
    let mut failures = 0;
    for (rec, res) in ds.records.iter().zip(results) {
        match res {
            Ok(d) => records.extend(d.iter().map(|det| DetectionRecord {
                image: rec.image.clone(),
                detection: det.clone(),
            })),
            Err(e) => {
                failures += 1;
                log::warn!("{}: {e}", rec.image);
            }
        }
    }
    write_detections(run.path("detections.txt"), &records)?;
    run.metric("method", a.method);
    run.metric("images", ds.len());
    run.metric("detections", records.len());
    run.metric("failures", failures);

    let gts = annotated_rois(&ds.records);
    if !gts.is_empty() {
        let dets = records
            .iter()
            .map(|r| ((r.image.clone(), r.detection.side), r.detection.bbox))
            .collect();
        let report = detection_report(&dets, &gts)?;
        detection_metrics(&mut run, &report);
        run.write("report.txt", &(report.to_table(a.method.as_str()) + &reference_footer()))?;
    }
    run.finish()
}

fn knee_file(image: &str, side: Side) -> String {
    let stem = Path::new(image)
        .file_stem()
        .map_or_else(|| image.to_string(), |s| s.to_string_lossy().into_owned());
    format!("knees/{stem}_{side}.pgm")
}

pub fn extract(a: &ExtractArgs, threads: usize) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let detected: Option<HashMap<(String, Side), BBox>> = match &a.detections {
        Some(p) => Some(
            crate::locate::read_detections(p)
                .context(|| format!("reading {}", p.display()))?
                .into_iter()
                .map(|r| ((r.image, r.detection.side), r.detection.bbox))
                .collect(),
        ),
        None => None,
    };
    let mut run = RunDir::create(&a.out)?;
    run.write_config("extract", a)?;
    fs::create_dir_all(run.path("knees")).context(|| "creating knees directory".to_string())?;
    let images = load_images(&ds, threads)?;

    let mut index = String::from("# file\timage\tside\tbbox\tgrade\n");
    let (mut written, mut missing) = (0, 0);
    for (rec, img) in ds.records.iter().zip(&images) {
        for side in [Side::Right, Side::Left] {
            let bbox = match &detected {
                Some(map) => map.get(&(rec.image.clone(), side)).copied(),
                None => rec.knee(side).roi,
            };
            let Some(bbox) = bbox else {
                missing += 1;
                continue;
            };
            let crop = crate::quantify::canonical(extract_roi(img, bbox, ROI_WIDTH, ROI_HEIGHT)?, side);
            let file = knee_file(&rec.image, side);
            write_pgm(run.path(&file), &crop).context(|| format!("writing {file}"))?;
            let grade = rec.knee(side).grade.map_or("-".to_string(), |g| g.to_string());
            let _ = writeln!(index, "{file}\t{}\t{side}\t{bbox}\t{grade}", rec.image);
            written += 1;
        }
    }
    run.write("knees.tsv", &index)?;
    run.metric("knees", written);
    run.metric("missing_regions", missing);
    run.finish()
}

fn labelled_knees(ds: &Dataset, threads: usize) -> Result<KneeSet> {
    let set = knee_samples(&load_images(ds, threads)?, &ds.records)?;
    for (image, side, why) in &set.skipped {
        log::warn!("skipping {image} {side}: {why}");
    }
    Ok(set)
}

pub fn train_cnn(a: &TrainCnnArgs, threads: usize) -> Result<()> {
    let name = a.preset.clone().unwrap_or_else(|| a.mode.desk_preset().to_string());
    let spec = preset(&name)?;
    let ds = load_dataset(&a.data)?;
    let mut run = RunDir::create(&a.out)?;
    run.write_config("train-cnn", a)?;

    let knees = labelled_knees(&ds, threads)?;
    let cfg = TrainConfig {
        mode: a.mode,
        epochs: a.epochs,
        batch_size: a.batch_size,
        optimizer: optimizer(a.optimizer, a.lr),
        w_reg: a.w_reg,
        seed: a.seed,
        validation_fraction: a.val_frac,
    };
    let (net, history) = train_quantifier(&knees.samples, &spec, &cfg)?;
    save_checkpoint(&net, None, a.epochs as u64, run.path("cnn.oakn"))?;

    run.metric("preset", &name);
    run.metric("mode", a.mode);
    run.metric("train_knees", history.train_knees);
    run.metric("train_samples", history.train_samples);
    run.metric("val_knees", history.val_knees);
    run.metric("skipped", knees.skipped.len());
    record_history(&mut run, &history.epochs);
    run.finish()
}

fn grade_report(preds: &[usize], labels: &[usize], probs: &[Vec<f64>]) -> Result<(String, Option<f64>)> {
    let report = classification_report(preds, labels)?;
    let roc = roc_auc_ovr(probs, labels)?;
    let mut text = report.to_table();
    if let Some(auc) = roc.macro_auc {
        let _ = writeln!(text, "\nMacro one-vs-rest AUC {auc:.3}");
    }
    Ok((text, roc.macro_auc))
}

pub fn evaluate(a: &EvaluateArgs, threads: usize) -> Result<()> {
    let net = load_checkpoint::<f32>(&a.model)
        .context(|| format!("loading {}", a.model.display()))?
        .network;
    let ds = load_dataset(&a.data)?;
    let mut run = RunDir::create(&a.out)?;
    run.write_config("evaluate", a)?;

    let knees = labelled_knees(&ds, threads)?;
    if knees.samples.is_empty() {
        return Err(Error::Usage(format!("{} has no graded knees with regions", a.data.display())));
    }
    let crops: Vec<&GrayImage> = knees.samples.iter().map(|k| &k.crop).collect();
    let grades: Vec<u8> = knees.samples.iter().map(|k| k.grade).collect();
    let eval = evaluate_quantifier(&net, &crops, &grades, a.w_reg)?;

    let rois = annotated_rois(&ds.records);
    let records: Vec<PredictionRecord> = knees
        .samples
        .iter()
        .zip(&eval.predictions)
        .map(|(k, p)| PredictionRecord {
            image: k.image.clone(),
            side: k.side,
            bbox: rois[&(k.image.clone(), k.side)],
            prediction: p.clone(),
        })
        .collect();
    write_predictions(run.path("predictions.txt"), &records)?;

    let preds: Vec<usize> = eval.predictions.iter().map(|p| p.grade_discrete as usize).collect();
    let labels: Vec<usize> = grades.iter().map(|&g| g as usize).collect();
    let probs: Vec<Vec<f64>> = eval.predictions.iter().map(|p| p.probs.to_vec()).collect();
    let (mut text, auc) = grade_report(&preds, &labels, &probs)?;
    let _ = writeln!(text, "Loss {:.4}  Continuous MSE {:.4}", eval.loss, eval.mse);
    if let Some(m) = eval.mse_rounded {
        let _ = writeln!(text, "Rounded continuous MSE {m:.4}");
    }
    text.push_str(&reference_footer());
    run.write("report.txt", &text)?;

    run.metric("knees", records.len());
    run.metric("loss", format!("{:.6}", eval.loss));
    run.metric("accuracy", format!("{:.6}", eval.accuracy));
    run.metric("mse", format!("{:.6}", eval.mse));
    if let Some(m) = eval.mse_rounded {
        run.metric("mse_rounded", format!("{m:.6}"));
    }
    if let Some(auc) = auc {
        run.metric("macro_auc", format!("{auc:.6}"));
    }
    run.finish()
}

pub fn pipeline(a: &PipelineArgs, threads: usize) -> Result<()> {
    let mut pipe = Pipeline::load(&a.fcn, &a.cnn).context(|| "loading pipeline checkpoints".to_string())?;
    if a.centers {
        pipe = pipe.with_centers(CenterRegion {
            canvas: (a.canvas.w, a.canvas.h),
            region: (a.region.w, a.region.h),
        });
    }
    let ds = load_dataset(&a.data)?;
    let mut run = RunDir::create(&a.out)?;
    run.write_config("pipeline", a)?;
    let images = load_images(&ds, threads)?;

    let idx: Vec<usize> = (0..ds.len()).collect();
    let results = par_map(&idx, threads, |&i| pipe.run_named(&ds.records[i].image, &images[i]));
    let (mut preds, mut dets) = (Vec::new(), Vec::new());
    let mut failures = 0;
    for (rec, res) in ds.records.iter().zip(results) {
        match res {
            Ok(knees) => {
                for k in knees {
                    dets.push(DetectionRecord {
                        image: rec.image.clone(),
                        detection: k.detection.clone(),
                    });
                    preds.push(PredictionRecord {
                        image: rec.image.clone(),
                        side: k.detection.side,
                        bbox: k.detection.bbox,
                        prediction: k.prediction,
                    });
                }
            }
            Err(e) => {
                failures += 1;
                log::warn!("{e}");
            }
        }
    }
    write_predictions(run.path("predictions.txt"), &preds)?;
    write_detections(run.path("detections.txt"), &dets)?;
    run.metric("mode", pipe.mode);
    run.metric("images", ds.len());
    run.metric("predictions", preds.len());
    run.metric("failures", failures);

    let mut text = String::new();
    let gts = annotated_rois(&ds.records);
    if !gts.is_empty() {
        let keyed = dets
            .iter()
            .map(|r| ((r.image.clone(), r.detection.side), r.detection.bbox))
            .collect();
        let report = detection_report(&keyed, &gts)?;
        detection_metrics(&mut run, &report);
        text.push_str(&report.to_table("pipeline"));
        text.push('\n');
    }
    let grades: HashMap<(String, Side), u8> = ds
        .records
        .iter()
        .flat_map(|r| Side::BOTH.map(|s| (r.image.clone(), s, r.knee(s).grade)))
        .filter_map(|(i, s, g)| g.map(|g| ((i, s), g)))
        .collect();
    let graded: Vec<(usize, usize, Vec<f64>)> = preds
        .iter()
        .filter_map(|p| {
            grades
                .get(&(p.image.clone(), p.side))
                .map(|&g| (p.prediction.grade_discrete as usize, g as usize, p.prediction.probs.to_vec()))
        })
        .collect();
    if !graded.is_empty() {
        let preds: Vec<usize> = graded.iter().map(|g| g.0).collect();
        let labels: Vec<usize> = graded.iter().map(|g| g.1).collect();
        let probs: Vec<Vec<f64>> = graded.iter().map(|g| g.2.clone()).collect();
        let (table, _) = grade_report(&preds, &labels, &probs)?;
        let acc = preds.iter().zip(&labels).filter(|(p, l)| p == l).count() as f64 / preds.len() as f64;
        run.metric("accuracy", format!("{acc:.6}"));
        text.push_str(&table);
    }
    if !text.is_empty() {
        text.push_str(&reference_footer());
        run.write("report.txt", &text)?;
    }
    run.finish()
}

fn check_lines(results: &[CaseResult]) -> (String, usize) {
    let mut text = String::new();
    let mut failed = 0;
    for (op, p, worst, ok) in gradsuite::summarize(results) {
        if !ok {
            failed += 1;
        }
        let verdict = if ok { "pass" } else { "FAIL" };
        let _ = writeln!(text, "{op:<22} {p}  max rel err {worst:.2e}  tol {:.0e}  {verdict}", p.tolerance());
    }
    (text, failed)
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<()> {
    if let Some(bad) = a.op.iter().find(|o| !OPS.contains(&o.as_str())) {
        return Err(Error::Usage(format!("unknown operation `{bad}`; known: {}", OPS.join(", "))));
    }
    let mut run = a.out.as_ref().map(RunDir::create).transpose()?;
    if let Some(r) = &run {
        r.write_config("gradcheck", a)?;
    }
    let mut report = String::new();
    let mut failed = 0;
    let mut checks = 0;
    for p in a.precision.list() {
        let ops: Vec<&str> = if a.all {
            gradsuite::ops(p)
        } else {
            a.op.iter().map(String::as_str).collect()
        };
        let mut results = Vec::new();
        for op in ops {
            for seed in 0..a.seeds {
                results.extend(gradsuite::check_op(op, p, seed)?);
            }
        }
        checks += results.len();
        let (text, f) = check_lines(&results);
        failed += f;
        report.push_str(&text);
    }
    if a.networks {
        for name in PRESET_NAMES {
            let spec = gradsuite::check_spec(name)?;
            let r = gradsuite::check_network_sample(&spec, 0, 64, 2)?;
            let ok = r.passes(NETWORK_TOLERANCE);
            checks += 1;
            failed += usize::from(!ok);
            let verdict = if ok { "pass" } else { "FAIL" };
            let _ = writeln!(
                report,
                "{:<22} {}  max rel err {:.2e}  tol {NETWORK_TOLERANCE:.0e}  {verdict}",
                format!("net:{name}"),
                Precision::F32,
                r.max_rel_error
            );
        }
    }
    print!("{report}");
    if let Some(r) = &mut run {
        r.write("report.txt", &report)?;
        r.metric("checks", checks);
        r.metric("failed", failed);
        r.finish()?;
    }
    if failed > 0 {
        return Err(Error::Failed(format!("{failed} gradient check groups exceed their tolerance")));
    }
    Ok(())
}

pub fn rf(a: &RfArgs) -> Result<()> {
    let spec = preset(&a.preset)?;
    let layer = match &a.layer {
        Some(l) => l.clone(),
        None => default_rf_layer(&spec)
            .ok_or_else(|| Error::Usage(format!("preset `{}` has no convolution or pooling layer", a.preset)))?
            .to_string(),
    };
    let value = receptive_field(&spec, &layer)?;
    println!("{value}");
    if let Some(out) = &a.out {
        let mut run = RunDir::create(out)?;
        run.write_config("rf", a)?;
        run.metric("preset", &a.preset);
        run.metric("layer", &layer);
        run.metric("receptive_field", value);
        run.finish()?;
    }
    Ok(())
}
