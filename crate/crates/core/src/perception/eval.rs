use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::Detection;
use crate::geometry::oriented_iou;
use crate::scenario::{LabeledBox, ObjectClass};

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall <= 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ClassMetrics {
    pub n_gt: usize,
    pub n_det: usize,
    pub tp: usize,
    pub fp: usize,
    pub precision: f64,
    pub recall: f64,
    pub ap: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub overall: ClassMetrics,
    /// Only classes that occur in the detections or the ground truth.
    pub per_class: BTreeMap<ObjectClass, ClassMetrics>,
}

/// Detections and labels of one frame.
#[derive(Debug, Clone, Default)]
pub struct FrameResult {
    pub detections: Vec<Detection>,
    pub labels: Vec<LabeledBox>,
}

/// Greedy matching on one frame: returns `(confidence, is_tp)` per detection
/// of `class`, and the number of labels of that class.
fn match_frame(frame: &FrameResult, class: ObjectClass, iou_thr: f64) -> (Vec<(f64, bool)>, usize) {
    let gts: Vec<&LabeledBox> = frame.labels.iter().filter(|g| g.class == class).collect();
    let mut dets: Vec<&Detection> = frame
        .detections
        .iter()
        .filter(|d| d.class == class)
        .collect();
    dets.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let mut taken = vec![false; gts.len()];
    let mut out = Vec::with_capacity(dets.len());
    for d in dets {
        let best = gts
            .iter()
            .enumerate()
            .filter(|(k, _)| !taken[*k])
            .map(|(k, g)| (k, oriented_iou(&d.bbox, &g.footprint()).unwrap_or(0.0)))
            .fold(None, |acc: Option<(usize, f64)>, (k, iou)| match acc {
                Some((_, best)) if best >= iou => acc,
                _ => Some((k, iou)),
            });
        match best {
            Some((k, iou)) if iou >= iou_thr => {
                taken[k] = true;
                out.push((d.confidence, true));
            }
            _ => out.push((d.confidence, false)),
        }
    }
    (out, gts.len())
}

/// All-point interpolated area under the precision/recall curve of
/// confidence-ranked detections.
fn average_precision(mut ranked: Vec<(f64, bool)>, n_gt: usize) -> f64 {
    if n_gt == 0 || ranked.is_empty() {
        return 0.0;
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut tp = 0usize;
    let mut recall = Vec::with_capacity(ranked.len());
    let mut precision = Vec::with_capacity(ranked.len());
    for (k, (_, hit)) in ranked.iter().enumerate() {
        tp += *hit as usize;
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        ap += (r - prev_r) * p;
        prev_r = *r;
    }
    ap
}

fn metrics(ranked: Vec<(f64, bool)>, n_gt: usize) -> ClassMetrics {
    let n_det = ranked.len();
    let tp = ranked.iter().filter(|(_, hit)| *hit).count();
    let precision = if n_det == 0 {
        0.0
    } else {
        tp as f64 / n_det as f64
    };
    let recall = if n_gt == 0 {
        0.0
    } else {
        tp as f64 / n_gt as f64
    };
    ClassMetrics {
        n_gt,
        n_det,
        tp,
        fp: n_det - tp,
        precision,
        recall,
        ap: average_precision(ranked, n_gt),
        f1: f1_score(precision, recall),
    }
}

/// Evaluate detections against labels over many frames. Overall precision
/// and recall pool all classes; overall AP is the mean over classes that
/// have labels.
pub fn evaluate_frames(frames: &[FrameResult], iou_thr: f64) -> EvalReport {
    let mut per_class = BTreeMap::new();
    let mut pooled = Vec::new();
    let mut pooled_gt = 0;
    let mut aps = Vec::new();
    for class in ObjectClass::ALL {
        let mut ranked = Vec::new();
        let mut n_gt = 0;
        for f in frames {
            let (r, n) = match_frame(f, class, iou_thr);
            ranked.extend(r);
            n_gt += n;
        }
        if ranked.is_empty() && n_gt == 0 {
            continue;
        }
        pooled.extend(ranked.iter().copied());
        pooled_gt += n_gt;
        let m = metrics(ranked, n_gt);
        if n_gt > 0 {
            aps.push(m.ap);
        }
        per_class.insert(class, m);
    }
    let mut overall = metrics(pooled, pooled_gt);
    overall.ap = if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    };
    EvalReport {
        iou_threshold: iou_thr,
        overall,
        per_class,
    }
}

/// Single-frame evaluation.
pub fn evaluate(dets: &[Detection], gts: &[LabeledBox], iou_thr: f64) -> EvalReport {
    evaluate_frames(
        &[FrameResult {
            detections: dets.to_vec(),
            labels: gts.to_vec(),
        }],
        iou_thr,
    )
}

#[derive(Serialize)]
struct CsvRow<'a> {
    class: &'a str,
    iou_threshold: f64,
    n_gt: usize,
    n_det: usize,
    tp: usize,
    fp: usize,
    precision: f64,
    recall: f64,
    ap: f64,
    f1: f64,
}

impl EvalReport {
    fn rows(&self) -> impl Iterator<Item = (&'static str, &ClassMetrics)> {
        self.per_class
            .iter()
            .map(|(c, m)| (c.as_str(), m))
            .chain(std::iter::once(("Overall", &self.overall)))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        for (class, m) in self.rows() {
            wr.serialize(CsvRow {
                class,
                iou_threshold: self.iou_threshold,
                n_gt: m.n_gt,
                n_det: m.n_det,
                tp: m.tp,
                fp: m.fp,
                precision: m.precision,
                recall: m.recall,
                ap: m.ap,
                f1: m.f1,
            })?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Percentages, one row per class, in a fixed-width text table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "IoU threshold {:.2}", self.iou_threshold);
        let _ = writeln!(
            s,
            "{:<12} {:>10} {:>10} {:>10} {:>10}",
            "Class", "Precision", "Recall", "AP", "F1"
        );
        for (class, m) in self.rows() {
            let _ = writeln!(
                s,
                "{:<12} {:>9.2}% {:>9.2}% {:>9.2}% {:>9.2}%",
                class,
                100.0 * m.precision,
                100.0 * m.recall,
                100.0 * m.ap,
                100.0 * m.f1
            );
        }
        s
    }
}
