//! Pixel-level evaluation: confusion matrices, derived metrics, ROC points
//! and the superpixel-count sweep.
//!
//! Matrices are pooled over every pixel of a dataset before metrics are
//! computed (micro-aggregation). Metrics whose denominator is zero are
//! `None` and serialize as `null`.

use std::fmt::Write as _;
use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::imaging::{BinaryMask, ImageRgb};
use crate::pipeline::{BowfireModel, DetectionMode, Method};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub const fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl std::ops::Add for ConfusionMatrix {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::new(
            self.tp + o.tp,
            self.fp + o.fp,
            self.fn_ + o.fn_,
            self.tn + o.tn,
        )
    }
}

/// Per-pixel tally with fire as the positive class.
pub fn confusion(pred: &BinaryMask, truth: &BinaryMask) -> Result<ConfusionMatrix> {
    if pred.dims() != truth.dims() {
        return Err(Error::dims(pred.dims(), truth.dims()));
    }
    let mut m = ConfusionMatrix::default();
    for (&p, &t) in pred.bits().iter().zip(truth.bits()) {
        match (p, t) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    Ok(m)
}

/// Component-wise sum.
pub fn aggregate(matrices: &[ConfusionMatrix]) -> Result<ConfusionMatrix> {
    if matrices.is_empty() {
        return Err(Error::NoData(
            "cannot aggregate an empty list of matrices".into(),
        ));
    }
    Ok(matrices
        .iter()
        .copied()
        .fold(ConfusionMatrix::default(), |a, b| a + b))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub fpr: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(m: &ConfusionMatrix) -> Metrics {
    let precision = ratio(m.tp, m.tp + m.fp);
    let recall = ratio(m.tp, m.tp + m.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    Metrics {
        precision,
        recall,
        f1,
        fpr: ratio(m.fp, m.fp + m.tn),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetTag {
    Fire,
    NonFire,
    Complete,
}

impl DatasetTag {
    pub fn name(self) -> &'static str {
        match self {
            DatasetTag::Fire => "fire",
            DatasetTag::NonFire => "non-fire",
            DatasetTag::Complete => "complete",
        }
    }
}

/// Parameters echoed into every report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub ksp: usize,
    pub m: f64,
    pub k: usize,
    pub bins: usize,
}

impl ReportParams {
    pub fn of(model: &BowfireModel) -> Self {
        Self {
            ksp: model.slic.k_sp,
            m: model.slic.m,
            k: model.texture.k(),
            bins: model.color.bins(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub description: String,
    pub dataset: DatasetTag,
    pub images: usize,
    pub params: ReportParams,
    pub matrix: ConfusionMatrix,
    #[serde(flatten)]
    pub metrics: Metrics,
}

/// One evaluation item: an image and its ground truth.
pub trait Sample: Sync {
    fn name(&self) -> String;
    fn load(&self) -> Result<(ImageRgb, BinaryMask)>;
}

/// Sample already held in memory.
#[derive(Clone, Debug)]
pub struct InMemorySample {
    pub name: String,
    pub image: ImageRgb,
    pub truth: BinaryMask,
}

impl Sample for InMemorySample {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn load(&self) -> Result<(ImageRgb, BinaryMask)> {
        Ok((self.image.clone(), self.truth.clone()))
    }
}

pub type Predictor<'a> = Box<dyn Fn(&ImageRgb) -> Result<BinaryMask> + Sync + 'a>;

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))
}

/// Confusion matrix of every predictor on every sample, indexed
/// `[predictor][sample]`. Each image is decoded once; up to `jobs` images are
/// processed at a time and results keep sample order.
pub fn confusions<S: Sample>(
    samples: &[S],
    predictors: &[Predictor<'_>],
    jobs: usize,
) -> Result<Vec<Vec<ConfusionMatrix>>> {
    let per_sample: Vec<Vec<ConfusionMatrix>> = thread_pool(jobs)?.install(|| {
        samples
            .par_iter()
            .map(|s| {
                let (img, truth) = s.load()?;
                if img.dims() != truth.dims() {
                    return Err(Error::Dataset {
                        path: s.name().into(),
                        message: format!(
                            "mask is {}x{} but image is {}x{}",
                            truth.width(),
                            truth.height(),
                            img.width(),
                            img.height()
                        ),
                    });
                }
                predictors
                    .iter()
                    .map(|p| confusion(&p(&img)?, &truth))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok((0..predictors.len())
        .map(|i| per_sample.iter().map(|row| row[i]).collect())
        .collect())
}

/// Fire and non-fire evaluation corpora; either may be absent.
pub struct EvalDatasets<'a, S> {
    pub fire: Option<&'a [S]>,
    pub non_fire: Option<&'a [S]>,
}

impl<S> Clone for EvalDatasets<'_, S> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<S> Copy for EvalDatasets<'_, S> {}

struct Scored {
    method: Method,
    params: ReportParams,
    fire: Option<Vec<ConfusionMatrix>>,
    non_fire: Option<Vec<ConfusionMatrix>>,
}

fn report(s: &Scored, dataset: DatasetTag, matrices: &[ConfusionMatrix]) -> Result<EvalReport> {
    let matrix = aggregate(matrices)?;
    Ok(EvalReport {
        method: s.method.name().to_string(),
        description: s.method.description().to_string(),
        dataset,
        images: matrices.len(),
        params: s.params,
        matrix,
        metrics: metrics(&matrix),
    })
}

fn reports_for(s: &Scored) -> Result<Vec<EvalReport>> {
    let mut out = Vec::new();
    if let Some(f) = &s.fire {
        out.push(report(s, DatasetTag::Fire, f)?);
    }
    if let Some(n) = &s.non_fire {
        out.push(report(s, DatasetTag::NonFire, n)?);
    }
    if let (Some(f), Some(n)) = (&s.fire, &s.non_fire) {
        let all: Vec<_> = f.iter().chain(n).copied().collect();
        out.push(report(s, DatasetTag::Complete, &all)?);
    }
    Ok(out)
}

/// Scores each `(method, model)` pair on the datasets. Reports come out
/// pair-major, then fire / non-fire / complete.
pub fn evaluate_runs<S: Sample>(
    runs: &[(Method, BowfireModel)],
    datasets: EvalDatasets<'_, S>,
    jobs: usize,
) -> Result<Vec<EvalReport>> {
    let present: Vec<&[S]> = [datasets.fire, datasets.non_fire]
        .into_iter()
        .flatten()
        .collect();
    if present.is_empty() || present.iter().all(|d| d.is_empty()) {
        return Err(Error::NoData("no evaluation images".into()));
    }
    if let Some(empty) = [(datasets.fire, "fire"), (datasets.non_fire, "non-fire")]
        .iter()
        .find_map(|(d, name)| d.filter(|d| d.is_empty()).map(|_| name))
    {
        return Err(Error::NoData(format!("{empty} dataset has no images")));
    }

    let predictors: Vec<Predictor<'_>> = runs
        .iter()
        .map(|(method, model)| -> Predictor<'_> { Box::new(move |img| method.run(model, img)) })
        .collect();
    let fire = datasets
        .fire
        .map(|d| confusions(d, &predictors, jobs))
        .transpose()?;
    let non_fire = datasets
        .non_fire
        .map(|d| confusions(d, &predictors, jobs))
        .transpose()?;

    let mut reports = Vec::new();
    for (i, (method, model)) in runs.iter().enumerate() {
        let scored = Scored {
            method: *method,
            params: ReportParams::of(model),
            fire: fire.as_ref().map(|m| m[i].clone()),
            non_fire: non_fire.as_ref().map(|m| m[i].clone()),
        };
        reports.extend(reports_for(&scored)?);
    }
    Ok(reports)
}

pub fn evaluate_methods<S: Sample>(
    model: &BowfireModel,
    methods: &[Method],
    datasets: EvalDatasets<'_, S>,
    jobs: usize,
) -> Result<Vec<EvalReport>> {
    let runs: Vec<_> = methods.iter().map(|&m| (m, model.clone())).collect();
    evaluate_runs(&runs, datasets, jobs)
}

/// The superpixel counts swept by default.
pub const DEFAULT_KSP_SWEEP: [usize; 6] = [50, 100, 150, 200, 250, 300];

/// Fused-mode reports for each superpixel count, ksp-major.
pub fn sweep_ksp<S: Sample>(
    model: &BowfireModel,
    datasets: EvalDatasets<'_, S>,
    ksp_values: &[usize],
    jobs: usize,
) -> Result<Vec<EvalReport>> {
    if ksp_values.is_empty() {
        return Err(Error::InvalidParameter("empty K_sp list".into()));
    }
    let runs: Vec<_> = ksp_values
        .iter()
        .map(|&k| (Method::Bowfire(DetectionMode::Fused), model.with_ksp(k)))
        .collect();
    evaluate_runs(&runs, datasets, jobs)
}

/// `(fpr, recall)` of each report; reports lacking either are skipped.
pub fn roc_points(reports: &[EvalReport]) -> Vec<(f64, f64)> {
    reports
        .iter()
        .filter_map(|r| match (r.metrics.fpr, r.metrics.recall) {
            (Some(fpr), Some(recall)) => Some((fpr, recall)),
            _ => {
                log::warn!(
                    "skipping ROC point for {} on {}: undefined recall or FPR",
                    r.method,
                    r.dataset.name()
                );
                None
            }
        })
        .collect()
}

pub fn write_roc_csv<W: io::Write>(w: W, points: &[(f64, f64)]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["fpr", "recall"])?;
    for &(fpr, recall) in points {
        wr.serialize((fpr, recall))?;
    }
    wr.flush()?;
    Ok(())
}

/// One row of the sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ksp: usize,
    pub dataset: DatasetTag,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub fpr: Option<f64>,
}

impl From<&EvalReport> for SweepRow {
    fn from(r: &EvalReport) -> Self {
        Self {
            ksp: r.params.ksp,
            dataset: r.dataset,
            precision: r.metrics.precision,
            recall: r.metrics.recall,
            f1: r.metrics.f1,
            fpr: r.metrics.fpr,
        }
    }
}

pub fn write_sweep_csv<W: io::Write>(w: W, reports: &[EvalReport]) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in reports {
        wr.serialize(SweepRow::from(r))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: io::Read>(r: R) -> csv::Result<Vec<SweepRow>> {
    csv::Reader::from_reader(r).deserialize().collect()
}

/// Aligned-column text rendering.
pub fn format_table(reports: &[EvalReport]) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:<9} {:>5} {:>7} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "method", "dataset", "ksp", "images", "tp", "fp", "fn", "tn", "precision", "recall", "f1"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<14} {:<9} {:>5} {:>7} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}  fpr={}",
            r.method,
            r.dataset.name(),
            r.params.ksp,
            r.images,
            r.matrix.tp,
            r.matrix.fp,
            r.matrix.fn_,
            r.matrix.tn,
            cell(r.metrics.precision),
            cell(r.metrics.recall),
            cell(r.metrics.f1),
            cell(r.metrics.fpr),
        );
    }
    out
}
