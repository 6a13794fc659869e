//! Trainable HOG + linear-classifier sliding-window detector, used for the
//! face, nose and coin stages. Descriptors follow the Dalal-Triggs recipe:
//! unsigned orientation histograms per cell, overlapping 2x2-cell blocks
//! with L2-hys normalization. The classifier is a linear SVM trained by
//! subgradient descent on the regularized hinge loss with hard-negative
//! mining.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{bbox_iou, BBox};
use crate::ingest::Manifest;
use crate::par;
use crate::raster::Raster;
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HogParams {
    pub cell_size: usize,
    pub orientation_bins: usize,
    /// block side, in cells
    pub block_size: usize,
    /// block stride, in cells
    pub block_stride: usize,
    /// detection window, in pixels (must divide into whole cells)
    pub window_w: usize,
    pub window_h: usize,
    pub pyramid_scale: f64,
    pub nms_iou: f64,
    pub decision_threshold: f64,
}

impl HogParams {
    pub fn with_window(window_w: usize, window_h: usize) -> Self {
        HogParams {
            cell_size: 8,
            orientation_bins: 9,
            block_size: 2,
            block_stride: 1,
            window_w,
            window_h,
            pyramid_scale: 1.2,
            nms_iou: 0.5,
            decision_threshold: 0.0,
        }
    }

    /// canonical nose window
    pub fn nose() -> Self {
        Self::with_window(64, 48)
    }

    /// canonical coin window
    pub fn coin() -> Self {
        Self::with_window(48, 48)
    }

    /// canonical face window
    pub fn face() -> Self {
        Self::with_window(80, 80)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cell_size == 0 || self.orientation_bins == 0 || self.block_size == 0 {
            return Err(Error::InvalidArgument("HOG sizes must be >= 1".into()));
        }
        if self.window_w % self.cell_size != 0 || self.window_h % self.cell_size != 0 {
            return Err(Error::InvalidArgument(format!(
                "window {}x{} not divisible into {}px cells",
                self.window_w, self.window_h, self.cell_size
            )));
        }
        if self.pyramid_scale <= 1.0 {
            return Err(Error::InvalidArgument("pyramid scale must be > 1".into()));
        }
        Ok(())
    }

    pub fn cells_w(&self) -> usize {
        self.window_w / self.cell_size
    }

    pub fn cells_h(&self) -> usize {
        self.window_h / self.cell_size
    }

    fn blocks_w(&self) -> usize {
        (self.cells_w() - self.block_size) / self.block_stride + 1
    }

    fn blocks_h(&self) -> usize {
        (self.cells_h() - self.block_size) / self.block_stride + 1
    }

    /// Length of the descriptor for one detection window.
    pub fn descriptor_len(&self) -> usize {
        self.blocks_w() * self.blocks_h() * self.block_size * self.block_size * self.orientation_bins
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetectorClass {
    Face,
    Nose,
    Coin,
}

impl DetectorClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectorClass::Face => "face",
            DetectorClass::Nose => "nose",
            DetectorClass::Coin => "coin",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "face" => Ok(DetectorClass::Face),
            "nose" => Ok(DetectorClass::Nose),
            "coin" => Ok(DetectorClass::Coin),
            other => Err(Error::InvalidArgument(format!("unknown detector class '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorModel {
    pub params: HogParams,
    pub class: DetectorClass,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub meta: TrainingMeta,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingMeta {
    pub seed: u64,
    pub positives: u32,
    pub mining_rounds: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
}

/// Gradient-orientation cell histograms for the whole image, row-major
/// over cells. Gradients use central differences on the (luma) grayscale;
/// votes are split linearly between the two nearest unsigned bins.
fn cell_histograms(gray: &Raster, params: &HogParams) -> (Vec<f64>, usize, usize) {
    let w = gray.width() as usize;
    let h = gray.height() as usize;
    let cs = params.cell_size;
    let nbins = params.orientation_bins;
    let cw = w / cs;
    let ch = h / cs;
    let mut hist = vec![0.0; cw * ch * nbins];
    let data = gray.data();
    let px = |x: usize, y: usize| data[y * w + x] as f64;
    for y in 0..h {
        let cy = y / cs;
        if cy >= ch {
            break;
        }
        for x in 0..w {
            let cx = x / cs;
            if cx >= cw {
                continue;
            }
            let gx = px(x.min(w - 2) + 1, y) - px(x.max(1) - 1, y);
            let gy = px(x, y.min(h - 2) + 1) - px(x, y.max(1) - 1);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            // unsigned orientation in [0, pi)
            let mut theta = gy.atan2(gx);
            if theta < 0.0 {
                theta += std::f64::consts::PI;
            }
            if theta >= std::f64::consts::PI {
                theta -= std::f64::consts::PI;
            }
            let pos = theta / std::f64::consts::PI * nbins as f64 - 0.5;
            let lo = pos.floor();
            let frac = pos - lo;
            let b0 = ((lo as i64).rem_euclid(nbins as i64)) as usize;
            let b1 = (b0 + 1) % nbins;
            let base = (cy * cw + cx) * nbins;
            hist[base + b0] += mag * (1.0 - frac);
            hist[base + b1] += mag * frac;
        }
    }
    (hist, cw, ch)
}

/// Block-normalize (L2-hys, clip 0.2) the cell grid into one descriptor for
/// the window whose top-left cell is (cell_x, cell_y).
fn window_descriptor(
    hist: &[f64],
    grid_w: usize,
    params: &HogParams,
    cell_x: usize,
    cell_y: usize,
    out: &mut Vec<f64>,
) {
    let nbins = params.orientation_bins;
    let bs = params.block_size;
    out.clear();
    for by in 0..params.blocks_h() {
        for bx in 0..params.blocks_w() {
            let start = out.len();
            for cy in 0..bs {
                for cx in 0..bs {
                    let gx = cell_x + bx * params.block_stride + cx;
                    let gy = cell_y + by * params.block_stride + cy;
                    let base = (gy * grid_w + gx) * nbins;
                    out.extend_from_slice(&hist[base..base + nbins]);
                }
            }
            l2_hys(&mut out[start..]);
        }
    }
}

fn l2_hys(block: &mut [f64]) {
    const EPS: f64 = 1e-10;
    const CLIP: f64 = 0.2;
    let norm = (block.iter().map(|v| v * v).sum::<f64>() + EPS * EPS).sqrt();
    for v in block.iter_mut() {
        *v = (*v / norm).min(CLIP);
    }
    let norm = (block.iter().map(|v| v * v).sum::<f64>() + EPS * EPS).sqrt();
    for v in block.iter_mut() {
        *v /= norm;
    }
}

/// HOG descriptor of a full image whose size equals one detection window.
pub fn hog_descriptor(image: &Raster, params: &HogParams) -> Result<Vec<f64>> {
    params.validate()?;
    let gray = image.to_grayscale();
    if (gray.width() as usize) < params.window_w || (gray.height() as usize) < params.window_h {
        return Err(Error::ShapeMismatch(format!(
            "image {}x{} smaller than detection window {}x{}",
            gray.width(),
            gray.height(),
            params.window_w,
            params.window_h
        )));
    }
    let (hist, grid_w, _) = cell_histograms(&gray, params);
    let mut out = Vec::with_capacity(params.descriptor_len());
    window_descriptor(&hist, grid_w, params, 0, 0, &mut out);
    Ok(out)
}

/// Descriptor for `bbox` computed exactly the way [`detect`] sees windows:
/// downscale the whole image so the box spans one detection window, then
/// read the cell-aligned window nearest the box (shifted by `dx`/`dy`
/// cells). Training on these keeps train and test descriptors in the same
/// distribution; descriptors of isolated resized crops differ at the
/// borders and off the cell grid.
fn descriptor_at(
    gray: &Raster,
    bbox: &BBox,
    params: &HogParams,
    extra_scale: f64,
    dx: isize,
    dy: isize,
) -> Option<Vec<f64>> {
    let scale = bbox.w / params.window_w as f64 * extra_scale;
    if !(scale.is_finite() && scale > 0.0) {
        return None;
    }
    let lw = (gray.width() as f64 / scale).round().max(1.0) as u32;
    let lh = (gray.height() as f64 / scale).round().max(1.0) as u32;
    if (lw as usize) < params.window_w || (lh as usize) < params.window_h {
        return None;
    }
    let level = if scale == 1.0 { gray.clone() } else { gray.resize_bilinear(lw, lh) };
    let (hist, grid_w, grid_h) = cell_histograms(&level, params);
    let max_cx = grid_w.checked_sub(params.cells_w())?;
    let max_cy = grid_h.checked_sub(params.cells_h())?;
    let cell = params.cell_size as f64;
    let cx = ((bbox.x / scale / cell).round() as isize + dx).clamp(0, max_cx as isize) as usize;
    let cy = ((bbox.y / scale / cell).round() as isize + dy).clamp(0, max_cy as isize) as usize;
    let mut out = Vec::with_capacity(params.descriptor_len());
    window_descriptor(&hist, grid_w, params, cx, cy, &mut out);
    Some(out)
}

fn score(weights: &[f64], bias: f64, descriptor: &[f64]) -> f64 {
    weights.iter().zip(descriptor).map(|(w, d)| w * d).sum::<f64>() + bias
}

/// Greedy NMS: keep the highest-scoring box among any pair overlapping
/// more than `iou_threshold`.
pub fn non_max_suppression(mut dets: Vec<Detection>, iou_threshold: f64) -> Vec<Detection> {
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut kept: Vec<Detection> = Vec::new();
    for d in dets {
        if kept.iter().all(|k| bbox_iou(&k.bbox, &d.bbox) <= iou_threshold) {
            kept.push(d);
        }
    }
    kept
}

pub fn best_detection(dets: &[Detection]) -> Option<Detection> {
    dets.iter()
        .copied()
        .max_by(|a, b| a.score.total_cmp(&b.score))
}

/// Positive training example: an image with the ground-truth boxes of the
/// target class.
pub struct PositiveSet<'a> {
    pub manifest: &'a Manifest,
    /// per record, the ground-truth box(es) around the object
    pub boxes: Vec<Vec<BBox>>,
}

/// Hinge-loss subgradient trainer with hard-negative mining.
pub struct TrainOptions {
    pub lambda: f64,
    pub epochs: usize,
    pub mining_rounds: usize,
    pub negatives_per_round: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            lambda: 1e-4,
            epochs: 100,
            mining_rounds: 2,
            negatives_per_round: 10_000,
        }
    }
}

pub fn train_detector(
    positives: &PositiveSet,
    negatives: &[Raster],
    class: DetectorClass,
    params: HogParams,
    rng: &SeededRng,
    opts: &TrainOptions,
) -> Result<DetectorModel> {
    params.validate()?;
    if positives.manifest.is_empty() || positives.boxes.iter().all(|b| b.is_empty()) {
        return Err(Error::DegenerateData("no positive boxes".into()));
    }
    if negatives.is_empty() {
        return Err(Error::DegenerateData("no negative images".into()));
    }

    // positive descriptors from ground-truth boxes, extracted on the same
    // pyramid/cell grid the detector scans, with scale and one-cell offset
    // jitter so window snapping at test time stays in distribution
    let mut pos_desc: Vec<Vec<f64>> = Vec::new();
    let mut pos_images: Vec<(Raster, Vec<BBox>)> = Vec::new();
    for (record, boxes) in positives.manifest.records.iter().zip(&positives.boxes) {
        let image = record.load_image()?;
        let gray = image.to_grayscale();
        for b in boxes {
            for extra_scale in [1.0 / 1.1, 1.0, 1.1] {
                for (dx, dy) in [(0, 0), (-1, 0), (0, 1)] {
                    if let Some(d) = descriptor_at(&gray, b, &params, extra_scale, dx, dy) {
                        pos_desc.push(d);
                    }
                }
            }
        }
        pos_images.push((image, boxes.clone()));
    }
    if pos_desc.is_empty() {
        return Err(Error::DegenerateData("no usable positive windows".into()));
    }

    // initial negatives: random windows from backgrounds plus positive
    // images away from the ground truth
    let mut mine_rng = rng.child("negatives");
    let mut neg_desc: Vec<Vec<f64>> = Vec::new();
    let initial = opts.negatives_per_round.min(pos_desc.len().max(16) * 8);
    sample_random_negatives(negatives, &pos_images, &params, &mut mine_rng, initial, &mut neg_desc)?;
    if neg_desc.is_empty() {
        return Err(Error::DegenerateData("could not sample any negative window".into()));
    }

    let dim = params.descriptor_len();
    if pos_desc.iter().chain(&neg_desc).all(|d| d == &pos_desc[0]) {
        return Err(Error::DegenerateData("all training descriptors identical".into()));
    }

    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let mut train_rng = rng.child("svm");
    train_hinge(&mut weights, &mut bias, &pos_desc, &neg_desc, opts, &mut train_rng);

    // hard-negative mining: rescan negative sources with the current model
    for round in 0..opts.mining_rounds {
        let model = DetectorModel {
            params,
            class,
            weights: weights.clone(),
            bias,
            meta: TrainingMeta {
                seed: rng.seed(),
                positives: pos_desc.len() as u32,
                mining_rounds: round as u32,
            },
        };
        let mut hard: Vec<Vec<f64>> = Vec::new();
        for neg in negatives {
            let gray = neg.to_grayscale();
            for det in detect(neg, &model) {
                if hard.len() >= opts.negatives_per_round {
                    break;
                }
                if let Some(d) = descriptor_at(&gray, &det.bbox, &params, 1.0, 0, 0) {
                    hard.push(d);
                }
            }
        }
        for (image, boxes) in &pos_images {
            let gray = image.to_grayscale();
            for det in detect(image, &model) {
                if hard.len() >= opts.negatives_per_round {
                    break;
                }
                if boxes.iter().all(|b| bbox_iou(b, &det.bbox) < 0.3) {
                    if let Some(d) = descriptor_at(&gray, &det.bbox, &params, 1.0, 0, 0) {
                        hard.push(d);
                    }
                }
            }
        }
        if hard.is_empty() {
            break;
        }
        neg_desc.extend(hard);
        train_hinge(&mut weights, &mut bias, &pos_desc, &neg_desc, opts, &mut train_rng);
    }

    Ok(DetectorModel {
        params,
        class,
        weights,
        bias,
        meta: TrainingMeta {
            seed: rng.seed(),
            positives: pos_desc.len() as u32,
            mining_rounds: opts.mining_rounds as u32,
        },
    })
}

fn sample_random_negatives(
    negatives: &[Raster],
    pos_images: &[(Raster, Vec<BBox>)],
    params: &HogParams,
    rng: &mut SeededRng,
    budget: usize,
    out: &mut Vec<Vec<f64>>,
) -> Result<()> {
    let mut sources: Vec<(&Raster, &[BBox])> = negatives.iter().map(|r| (r, &[] as &[BBox])).collect();
    for (img, boxes) in pos_images {
        sources.push((img, boxes.as_slice()));
    }
    let grays: Vec<Raster> = sources.iter().map(|(img, _)| img.to_grayscale()).collect();
    let mut attempts = 0usize;
    while out.len() < budget && attempts < budget * 4 {
        attempts += 1;
        let si = rng.gen_range_usize(0, sources.len());
        let (img, gt) = sources[si];
        let w = img.width() as usize;
        let h = img.height() as usize;
        if w < params.window_w || h < params.window_h {
            continue;
        }
        // random pyramid level, then a random window at that scale
        let max_scale = (w as f64 / params.window_w as f64).min(h as f64 / params.window_h as f64);
        let scale = rng.gen_range_f64(1.0, max_scale.max(1.0 + 1e-9));
        let ww = params.window_w as f64 * scale;
        let wh = params.window_h as f64 * scale;
        let x = rng.gen_range_f64(0.0, w as f64 - ww);
        let y = rng.gen_range_f64(0.0, h as f64 - wh);
        let bbox = BBox::new(x, y, ww, wh);
        if gt.iter().any(|g| bbox_iou(g, &bbox) > 0.3) {
            continue;
        }
        if let Some(d) = descriptor_at(&grays[si], &bbox, params, 1.0, 0, 0) {
            out.push(d);
        }
    }
    Ok(())
}

/// Pegasos-style subgradient descent on
/// lambda/2 |w|^2 + mean hinge(y * (w.x + b)).
fn train_hinge(
    weights: &mut [f64],
    bias: &mut f64,
    pos: &[Vec<f64>],
    neg: &[Vec<f64>],
    opts: &TrainOptions,
    rng: &mut SeededRng,
) {
    let mut examples: Vec<(&[f64], f64)> = Vec::with_capacity(pos.len() + neg.len());
    // positives weighted up when outnumbered so the margin does not
    // collapse; capped so single positive steps cannot swamp the negatives
    let pos_weight = (neg.len() as f64 / pos.len() as f64).clamp(1.0, 4.0);
    for d in pos {
        examples.push((d, 1.0));
    }
    for d in neg {
        examples.push((d, -1.0));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut t = 0usize;
    for _ in 0..opts.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (opts.lambda * t as f64);
            let (x, y) = examples[i];
            let margin = y * (score(weights, *bias, x));
            let shrink = 1.0 - eta * opts.lambda;
            for w in weights.iter_mut() {
                *w *= shrink;
            }
            if margin < 1.0 {
                let step = eta * y * if y > 0.0 { pos_weight } else { 1.0 };
                for (w, &xi) in weights.iter_mut().zip(x) {
                    *w += step * xi;
                }
                *bias += step * 0.1; // bias learns slowly, unregularized
            }
        }
    }
}

/// Sliding-window detection over an image pyramid, NMS applied, boxes in
/// original-image coordinates sorted by descending score.
pub fn detect(image: &Raster, model: &DetectorModel) -> Vec<Detection> {
    let mut all = non_max_suppression(detect_raw(image, model), model.params.nms_iou);
    all.sort_by(|a, b| b.score.total_cmp(&a.score));
    all
}

/// All above-threshold windows before NMS. Neighbouring windows around a
/// true object carry sub-step position/scale information that NMS throws
/// away; [`average_box`] recovers it.
pub fn detect_raw(image: &Raster, model: &DetectorModel) -> Vec<Detection> {
    let params = &model.params;
    let gray = image.to_grayscale();

    // pyramid levels until the window no longer fits
    let mut scales = Vec::new();
    let mut scale = 1.0f64;
    loop {
        let w = (gray.width() as f64 / scale) as usize;
        let h = (gray.height() as f64 / scale) as usize;
        if w < params.window_w || h < params.window_h {
            break;
        }
        scales.push(scale);
        scale *= params.pyramid_scale;
    }

    let level_dets: Vec<Vec<Detection>> = par::map_slice(&scales, |&s| detect_at_scale(&gray, model, s));
    level_dets.into_iter().flatten().collect()
}

/// Score-weighted mean of the raw detections overlapping `anchor` by more
/// than `iou_threshold` (the anchor included). The pyramid quantises scale
/// and the cell grid quantises position; averaging the cluster of windows
/// that fired on the same object recovers sub-step accuracy.
pub fn average_box(raw: &[Detection], anchor: &Detection, iou_threshold: f64) -> BBox {
    let (mut sx, mut sy, mut sw, mut sh, mut total) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for d in raw {
        if bbox_iou(&d.bbox, &anchor.bbox) > iou_threshold {
            let w = d.score.max(1e-9);
            sx += w * (d.bbox.x + d.bbox.w / 2.0);
            sy += w * (d.bbox.y + d.bbox.h / 2.0);
            sw += w * d.bbox.w;
            sh += w * d.bbox.h;
            total += w;
        }
    }
    if total <= 0.0 {
        return anchor.bbox;
    }
    let (cx, cy, w, h) = (sx / total, sy / total, sw / total, sh / total);
    BBox::new(cx - w / 2.0, cy - h / 2.0, w, h)
}

/// Sequential variant of [`detect`] for the bench comparison.
pub fn detect_seq(image: &Raster, model: &DetectorModel) -> Vec<Detection> {
    let params = &model.params;
    let gray = image.to_grayscale();
    let mut all = Vec::new();
    let mut scale = 1.0f64;
    loop {
        let w = (gray.width() as f64 / scale) as usize;
        let h = (gray.height() as f64 / scale) as usize;
        if w < params.window_w || h < params.window_h {
            break;
        }
        all.extend(detect_at_scale(&gray, model, scale));
        scale *= params.pyramid_scale;
    }
    let mut all = non_max_suppression(all, params.nms_iou);
    all.sort_by(|a, b| b.score.total_cmp(&a.score));
    all
}

fn detect_at_scale(gray: &Raster, model: &DetectorModel, scale: f64) -> Vec<Detection> {
    let params = &model.params;
    let level = if scale == 1.0 {
        gray.clone()
    } else {
        gray.resize_bilinear(
            (gray.width() as f64 / scale).round().max(1.0) as u32,
            (gray.height() as f64 / scale).round().max(1.0) as u32,
        )
    };
    let w = level.width() as usize;
    let h = level.height() as usize;
    if w < params.window_w || h < params.window_h {
        return Vec::new();
    }
    let (hist, grid_w, grid_h) = cell_histograms(&level, params);
    let mut dets = Vec::new();
    let mut desc = Vec::with_capacity(params.descriptor_len());
    // window strides one cell at a time
    for cy in 0..=(grid_h.saturating_sub(params.cells_h())) {
        for cx in 0..=(grid_w.saturating_sub(params.cells_w())) {
            window_descriptor(&hist, grid_w, params, cx, cy, &mut desc);
            let s = score(&model.weights, model.bias, &desc);
            if s > params.decision_threshold {
                let bbox = BBox::new(
                    (cx * params.cell_size) as f64,
                    (cy * params.cell_size) as f64,
                    params.window_w as f64,
                    params.window_h as f64,
                )
                .scaled(scale);
                dets.push(Detection { bbox, score: s });
            }
        }
    }
    dets
}

// ---- model file: magic HOGD, version, class tag, params, weights, bias ----

const MAGIC: &[u8; 4] = b"HOGD";
const VERSION: u32 = 1;

pub fn save_detector(model: &DetectorModel, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(match model.class {
        DetectorClass::Face => 0,
        DetectorClass::Nose => 1,
        DetectorClass::Coin => 2,
    });
    let p = &model.params;
    for v in [
        p.cell_size,
        p.orientation_bins,
        p.block_size,
        p.block_stride,
        p.window_w,
        p.window_h,
    ] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in [p.pyramid_scale, p.nms_iou, p.decision_threshold] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&model.meta.seed.to_le_bytes());
    buf.extend_from_slice(&model.meta.positives.to_le_bytes());
    buf.extend_from_slice(&model.meta.mining_rounds.to_le_bytes());
    buf.extend_from_slice(&(model.weights.len() as u64).to_le_bytes());
    for w in &model.weights {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    buf.extend_from_slice(&model.bias.to_le_bytes());
    std::fs::write(path, &buf).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_detector(path: &Path) -> Result<DetectorModel> {
    let bad = |message: &str| Error::ModelFormat {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    let buf = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cur = std::io::Cursor::new(buf.as_slice());
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).map_err(|_| bad("truncated"))?;
    if &magic != MAGIC {
        return Err(bad("bad magic, not a HOGD detector file"));
    }
    let mut u32b = [0u8; 4];
    cur.read_exact(&mut u32b).map_err(|_| bad("truncated"))?;
    if u32::from_le_bytes(u32b) != VERSION {
        return Err(bad("unsupported version"));
    }
    let mut tag = [0u8; 1];
    cur.read_exact(&mut tag).map_err(|_| bad("truncated"))?;
    let class = match tag[0] {
        0 => DetectorClass::Face,
        1 => DetectorClass::Nose,
        2 => DetectorClass::Coin,
        _ => return Err(bad("unknown class tag")),
    };
    let read_u32 = |cur: &mut std::io::Cursor<&[u8]>| -> Result<u32> {
        let mut b = [0u8; 4];
        cur.read_exact(&mut b).map_err(|_| bad("truncated"))?;
        Ok(u32::from_le_bytes(b))
    };
    let cell_size = read_u32(&mut cur)? as usize;
    let orientation_bins = read_u32(&mut cur)? as usize;
    let block_size = read_u32(&mut cur)? as usize;
    let block_stride = read_u32(&mut cur)? as usize;
    let window_w = read_u32(&mut cur)? as usize;
    let window_h = read_u32(&mut cur)? as usize;
    let read_f64 = |cur: &mut std::io::Cursor<&[u8]>| -> Result<f64> {
        let mut b = [0u8; 8];
        cur.read_exact(&mut b).map_err(|_| bad("truncated"))?;
        Ok(f64::from_le_bytes(b))
    };
    let pyramid_scale = read_f64(&mut cur)?;
    let nms_iou = read_f64(&mut cur)?;
    let decision_threshold = read_f64(&mut cur)?;
    let mut b8 = [0u8; 8];
    cur.read_exact(&mut b8).map_err(|_| bad("truncated"))?;
    let seed = u64::from_le_bytes(b8);
    let positives = read_u32(&mut cur)?;
    let mining_rounds = read_u32(&mut cur)?;
    cur.read_exact(&mut b8).map_err(|_| bad("truncated"))?;
    let n = u64::from_le_bytes(b8) as usize;
    let params = HogParams {
        cell_size,
        orientation_bins,
        block_size,
        block_stride,
        window_w,
        window_h,
        pyramid_scale,
        nms_iou,
        decision_threshold,
    };
    params.validate().map_err(|e| Error::ModelFormat {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if n != params.descriptor_len() {
        return Err(bad("weight length does not match HOG parameters"));
    }
    let mut weights = Vec::with_capacity(n);
    for _ in 0..n {
        let mut b = [0u8; 8];
        cur.read_exact(&mut b).map_err(|_| bad("truncated in weights"))?;
        weights.push(f64::from_le_bytes(b));
    }
    cur.read_exact(&mut b8).map_err(|_| bad("truncated"))?;
    let bias = f64::from_le_bytes(b8);
    Ok(DetectorModel {
        params,
        class,
        weights,
        bias,
        meta: TrainingMeta {
            seed,
            positives,
            mining_rounds,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_length_arithmetic() {
        // 64x64 window, 8px cells, 9 bins, 2x2 blocks, stride 1:
        // 7*7 blocks * 2*2 cells * 9 bins = 1764
        let p = HogParams::with_window(64, 64);
        assert_eq!(p.descriptor_len(), 1764);
        // nose window 64x48 -> 7*5*36 = 1260
        assert_eq!(HogParams::nose().descriptor_len(), 1260);
    }

    #[test]
    fn flat_image_zero_descriptor() {
        let p = HogParams::with_window(16, 16);
        let img = Raster::filled(16, 16, 1, 128);
        let d = hog_descriptor(&img, &p).unwrap();
        assert!(d.iter().all(|&v| v.abs() < 1e-6), "flat image must give ~zero descriptor");
    }

    #[test]
    fn vertical_edge_concentrates_horizontal_gradient() {
        // left half dark, right half bright: gradient points along +x,
        // unsigned orientation ~0 -> energy in the wrap-around bins 0/8
        let p = HogParams {
            cell_size: 8,
            orientation_bins: 9,
            block_size: 1,
            block_stride: 1,
            window_w: 8,
            window_h: 8,
            pyramid_scale: 1.2,
            nms_iou: 0.5,
            decision_threshold: 0.0,
        };
        let mut img = Raster::filled(8, 8, 1, 0);
        for y in 0..8 {
            for x in 4..8 {
                img.set(x, y, 0, 200);
            }
        }
        let d = hog_descriptor(&img, &p).unwrap();
        assert_eq!(d.len(), 9);
        let edge_energy = d[0] + d[8];
        let total: f64 = d.iter().sum();
        assert!(edge_energy > 0.9 * total, "descriptor {d:?}");
    }

    #[test]
    fn brightness_offset_invariance() {
        let p = HogParams::with_window(16, 16);
        let mut img = Raster::filled(16, 16, 1, 60);
        for y in 0..16 {
            for x in 0..16 {
                img.set(x, y, 0, 60 + ((x * 7 + y * 3) % 60) as u8);
            }
        }
        let mut shifted = img.clone();
        for v in shifted.data_mut() {
            *v += 50; // non-saturating offset
        }
        let a = hog_descriptor(&img, &p).unwrap();
        let b = hog_descriptor(&shifted, &p).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn nms_no_overlapping_pairs() {
        let dets = vec![
            Detection { bbox: BBox::new(0.0, 0.0, 10.0, 10.0), score: 1.0 },
            Detection { bbox: BBox::new(2.0, 0.0, 10.0, 10.0), score: 0.9 },
            Detection { bbox: BBox::new(30.0, 30.0, 10.0, 10.0), score: 0.8 },
        ];
        let kept = non_max_suppression(dets, 0.5);
        assert_eq!(kept.len(), 2);
        for i in 0..kept.len() {
            for j in i + 1..kept.len() {
                assert!(bbox_iou(&kept[i].bbox, &kept[j].bbox) <= 0.5);
            }
        }
    }

    #[test]
    fn best_detection_policy() {
        assert_eq!(best_detection(&[]), None);
        let one = Detection { bbox: BBox::new(0.0, 0.0, 1.0, 1.0), score: 0.5 };
        assert_eq!(best_detection(&[one]), Some(one));
        let two = Detection { bbox: BBox::new(5.0, 5.0, 1.0, 1.0), score: 0.9 };
        assert_eq!(best_detection(&[one, two]), Some(two));
    }

    #[test]
    fn detector_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.hogd");
        let params = HogParams::coin();
        let model = DetectorModel {
            params,
            class: DetectorClass::Coin,
            weights: (0..params.descriptor_len()).map(|i| i as f64 * 0.001).collect(),
            bias: -0.25,
            meta: TrainingMeta { seed: 9, positives: 12, mining_rounds: 2 },
        };
        save_detector(&model, &path).unwrap();
        assert_eq!(load_detector(&path).unwrap(), model);
    }
}
