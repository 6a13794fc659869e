//! End-to-end sizing chain: face detection, nose/coin detection, crop
//! preprocessing into 42x42 tensors, CNN landmark regression, px/mm scale
//! from the coin, and the size recommendation. Also the transfer-learning
//! orchestration that resumes training from saved weights.

use std::fmt::Write as _;

use crate::error::{Error, Result, Stage};
use crate::geom::{BBox, LandmarkRole, LandmarkSet, Point2};
use crate::hogdet::{average_box, best_detection, detect, detect_raw, non_max_suppression, Detection, DetectorModel, HogParams};
use crate::ingest::Manifest;
use crate::nnet::{
    train, CnnModel, Dataset, ItemShape, NormStats, Tensor, TrainConfig, CNN_INPUT,
};
use crate::raster::Raster;
use crate::rng::SeededRng;
use crate::sizing::{NearBoundary, SizeBin, SizeChart};

pub use crate::nnet::train::Dataset as NormalizedDataset;

/// Physical diameter of the coin fiducial, millimetres.
pub const COIN_DIAMETER_MM: f64 = 28.65;

/// Invertible mapping from source-image coordinates to the 42x42 tensor:
/// crop at `source`, scale the longest side to 42, pad the short side with
/// zeros at the right/bottom (content anchored top-left).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CropTransform {
    pub source: BBox,
    pub scale: f64,
    pub pad_left: f64,
    pub pad_top: f64,
    pub target: u32,
}

impl CropTransform {
    /// source-image point -> tensor coordinates
    pub fn image_to_tensor(&self, p: Point2) -> Point2 {
        Point2::new(
            (p.x - self.source.x) * self.scale + self.pad_left,
            (p.y - self.source.y) * self.scale + self.pad_top,
        )
    }

    /// tensor coordinates -> source-image point
    pub fn tensor_to_image(&self, p: Point2) -> Point2 {
        Point2::new(
            (p.x - self.pad_left) / self.scale + self.source.x,
            (p.y - self.pad_top) / self.scale + self.source.y,
        )
    }
}

/// Resize a crop so its longest side is 42, zero-pad the rest, and convert
/// to a 3x42x42 float tensor of raw (unnormalized) pixel values. Landmarks
/// given in crop coordinates are mapped through the same transform and
/// flattened [x1, y1, x2, y2] in the role's left/right order.
pub fn preprocess_crop(
    crop: &Raster,
    crop_origin: &BBox,
    landmarks: Option<(&LandmarkSet, LandmarkRole)>,
) -> Result<(Tensor, CropTransform, Option<[f64; 4]>)> {
    let target = CNN_INPUT.h as u32;
    let rgb = crop.to_rgb();
    let long = rgb.width().max(rgb.height());
    let scale = target as f64 / long as f64;
    let new_w = ((rgb.width() as f64 * scale).round() as u32).clamp(1, target);
    let new_h = ((rgb.height() as f64 * scale).round() as u32).clamp(1, target);
    let resized = rgb.resize_bilinear(new_w, new_h);

    let mut tensor = Tensor::zeros(&[3, target as usize, target as usize]);
    {
        let data = tensor.data_mut();
        let plane = (target * target) as usize;
        for y in 0..new_h as usize {
            for x in 0..new_w as usize {
                for c in 0..3usize {
                    data[c * plane + y * target as usize + x] =
                        resized.get(x as u32, y as u32, c as u8) as f64;
                }
            }
        }
    }
    let transform = CropTransform {
        source: *crop_origin,
        scale,
        pad_left: 0.0,
        pad_top: 0.0,
        target,
    };

    let flat = match landmarks {
        Some((lm, role)) => {
            let (l, r) = lm.width_pair(role)?;
            // landmarks arrive in crop coordinates; only the scale applies
            let lt = Point2::new(l.x * scale, l.y * scale);
            let rt = Point2::new(r.x * scale, r.y * scale);
            Some([lt.x, lt.y, rt.x, rt.y])
        }
        None => None,
    };
    Ok((tensor, transform, flat))
}

/// pixels: v / pixel_divisor - pixel_mean
pub fn normalize_pixels(tensor: &mut Tensor, stats: &NormStats) {
    for v in tensor.data_mut() {
        *v = *v / stats.pixel_divisor - stats.pixel_mean;
    }
}

/// coords: c / coord_divisor - coord_mean (training targets only)
pub fn normalize_coords(coords: &[f64; 4], stats: &NormStats) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (o, c) in out.iter_mut().zip(coords) {
        *o = c / stats.coord_divisor - stats.coord_mean;
    }
    out
}

/// Exact inverse of [`normalize_coords`]: two tensor-space points.
pub fn denormalize_coords(pred: &[f64], stats: &NormStats) -> (Point2, Point2) {
    let inv = |v: f64| (v + stats.coord_mean) * stats.coord_divisor;
    (
        Point2::new(inv(pred[0]), inv(pred[1])),
        Point2::new(inv(pred[2]), inv(pred[3])),
    )
}

/// Dataset-level means over raw pixel tensors and coordinate 4-vectors,
/// computed on the training set and persisted in the weight file.
pub fn compute_norm_stats(pixels: &[Tensor], coords: &[[f64; 4]]) -> NormStats {
    let mut stats = NormStats::default();
    let mut px_sum = 0.0;
    let mut px_n = 0usize;
    for t in pixels {
        px_sum += t.data().iter().map(|v| v / stats.pixel_divisor).sum::<f64>();
        px_n += t.len();
    }
    if px_n > 0 {
        stats.pixel_mean = px_sum / px_n as f64;
    }
    let mut c_sum = 0.0;
    let mut c_n = 0usize;
    for c in coords {
        c_sum += c.iter().map(|v| v / stats.coord_divisor).sum::<f64>();
        c_n += 4;
    }
    if c_n > 0 {
        stats.coord_mean = c_sum / c_n as f64;
    }
    stats
}

/// Build a normalized CNN dataset from a landmark manifest by cropping the
/// given box per record. `stats` of `None` computes fresh dataset-level
/// statistics (training); `Some` reuses persisted ones (transfer).
pub fn build_cnn_dataset(
    manifest: &Manifest,
    boxes: &[BBox],
    stats: Option<NormStats>,
) -> Result<(Dataset, NormStats)> {
    if manifest.len() != boxes.len() {
        return Err(Error::InvalidArgument("one crop box required per record".into()));
    }
    let mut pixel_tensors = Vec::with_capacity(manifest.len());
    let mut coord_rows = Vec::with_capacity(manifest.len());
    for (record, bbox) in manifest.records.iter().zip(boxes) {
        let image = record.load_image()?;
        let (crop, lm, _) = crate::ingest::crop_raster(&image, &record.landmarks, bbox)?;
        let origin = BBox::new(bbox.x, bbox.y, crop.width() as f64, crop.height() as f64);
        let (tensor, _, flat) = preprocess_crop(&crop, &origin, Some((&lm, manifest.role)))?;
        pixel_tensors.push(tensor);
        coord_rows.push(flat.expect("landmarks supplied"));
    }
    let stats = stats.unwrap_or_else(|| compute_norm_stats(&pixel_tensors, &coord_rows));
    for t in &mut pixel_tensors {
        normalize_pixels(t, &stats);
    }
    let targets: Vec<f64> = coord_rows
        .iter()
        .flat_map(|c| normalize_coords(c, &stats))
        .collect();
    let inputs = Tensor::stack(&pixel_tensors)?;
    let targets = Tensor::from_vec(&[coord_rows.len(), 4], targets)?;
    Ok((Dataset { inputs, targets }, stats))
}

/// Every trained stage the pipeline needs.
pub struct StageModels {
    pub face: DetectorModel,
    pub nose: DetectorModel,
    pub coin: DetectorModel,
    pub nose_cnn: CnnModel,
    pub coin_cnn: CnnModel,
    pub chart: SizeChart,
}

/// Per-stage provenance carried in the result.
#[derive(Clone, Debug)]
pub struct Provenance {
    pub face_box: BBox,
    pub nose_box: BBox,
    pub coin_box: BBox,
    pub nose_points: (Point2, Point2),
    pub coin_points: (Point2, Point2),
}

#[derive(Clone, Debug)]
pub struct SizingResult {
    pub nose_width_mm: f64,
    pub scale_px_per_mm: f64,
    pub size: SizeBin,
    pub near_boundary: Option<NearBoundary>,
    pub provenance: Provenance,
}

impl SizingResult {
    /// One-line machine-readable record: key:value pairs.
    pub fn to_record_line(&self, image: &str) -> String {
        let mut s = String::new();
        let p = &self.provenance;
        let _ = write!(
            s,
            "image:{image} nose_width_mm:{:.3} scale_px_per_mm:{:.4} size:{}",
            self.nose_width_mm, self.scale_px_per_mm, self.size
        );
        if let Some(nb) = &self.near_boundary {
            let _ = write!(s, " near_boundary:{}|{}|{}", nb.boundary_mm, nb.below, nb.above);
        }
        let b = |b: &BBox| format!("{:.1},{:.1},{:.1},{:.1}", b.x, b.y, b.w, b.h);
        let _ = write!(
            s,
            " face_box:{} nose_box:{} coin_box:{} nose_points:{:.2},{:.2},{:.2},{:.2} coin_points:{:.2},{:.2},{:.2},{:.2}",
            b(&p.face_box),
            b(&p.nose_box),
            b(&p.coin_box),
            p.nose_points.0.x,
            p.nose_points.0.y,
            p.nose_points.1.x,
            p.nose_points.1.y,
            p.coin_points.0.x,
            p.coin_points.0.y,
            p.coin_points.1.x,
            p.coin_points.1.y
        );
        s
    }
}

/// Detect, crop, regress: the best detection box is cropped, preprocessed
/// and pushed through the CNN; predicted tensor coordinates map back to
/// original-image points through the crop transform.
pub fn predict_landmarks(
    image: &Raster,
    detector: &DetectorModel,
    cnn: &CnnModel,
    stage: Stage,
    search: Option<&BBox>,
    size_hint: Option<f64>,
    sep_range: Option<(f64, f64)>,
) -> Result<(Point2, Point2, BBox)> {
    let raw = detect_raw(image, detector);
    let mut dets = non_max_suppression(raw.clone(), detector.params.nms_iou);
    if let Some(area) = search {
        dets.retain(|d| {
            area.contains_point(Point2::new(d.bbox.x + d.bbox.w / 2.0, d.bbox.y + d.bbox.h / 2.0))
        });
    }
    // face-proportional expected box width: the detector sometimes prefers
    // a confident window at the wrong pyramid level (e.g. a window-sized
    // hit on the mouth when the nose is much larger), so boxes far from
    // the expected size are dropped when an in-range alternative exists
    if let Some(hint) = size_hint {
        let sized: Vec<Detection> = dets
            .iter()
            .copied()
            .filter(|d| d.bbox.w >= hint / 1.35 && d.bbox.w <= hint * 1.35)
            .collect();
        if !sized.is_empty() {
            dets = sized;
        }
    }
    let best = best_detection(&dets).ok_or(Error::StageFailure { stage })?;
    // recover sub-step position/scale from the pre-NMS cluster
    let bbox = average_box(&raw, &best, 0.5);
    let best = Detection { bbox, score: best.score };

    let role = match stage {
        Stage::Nose => Some(LandmarkRole::Nose),
        Stage::Coin => Some(LandmarkRole::Coin),
        Stage::Face => None,
    };
    if role.is_none() {
        return predict_landmarks_in_box(image, &best.bbox, cnn);
    }

    // The detector box is window-sized at pyramid scales and cell-snapped,
    // so it can be off in scale and position. The regressors are trained
    // on crops with exactly that kind of scale/translation noise and
    // measure the landmarks relative to whatever crop they are given, so
    // box noise does not bias the estimate — but a single unlucky crop
    // can. Regress over several rescaled / shifted copies of the box,
    // optionally drop candidates outside the caller's plausibility band,
    // and keep the candidate with the median separation.
    let variants: [(f64, f64); 5] = [(1.0, 0.0), (1.0 / 1.25, 0.0), (1.25, 0.0), (1.0, -0.12), (1.0, 0.12)];
    let (cx, cy) = (best.bbox.x + best.bbox.w / 2.0, best.bbox.y + best.bbox.h / 2.0);
    let mut candidates: Vec<(Point2, Point2)> = Vec::new();
    for (s, fx) in variants {
        let (w, h) = (best.bbox.w * s, best.bbox.h * s);
        let b = BBox::new(cx + fx * best.bbox.w - w / 2.0, cy - h / 2.0, w, h);
        if let Ok((l, r, _)) = predict_landmarks_in_box(image, &b, cnn) {
            candidates.push((l, r));
        }
    }
    if let Some((lo, hi)) = sep_range {
        let plausible: Vec<(Point2, Point2)> = candidates
            .iter()
            .copied()
            .filter(|(l, r)| (lo..=hi).contains(&l.distance(&r)))
            .collect();
        if !plausible.is_empty() {
            candidates = plausible;
        }
    }
    if candidates.is_empty() {
        return predict_landmarks_in_box(image, &best.bbox, cnn);
    }
    candidates.sort_by(|a, b| a.0.distance(&a.1).total_cmp(&b.0.distance(&b.1)));
    let (l, r) = candidates[candidates.len() / 2];
    Ok((l, r, best.bbox))
}

/// CNN landmark regression inside a known box (no detection).
pub fn predict_landmarks_in_box(
    image: &Raster,
    bbox: &BBox,
    cnn: &CnnModel,
) -> Result<(Point2, Point2, BBox)> {
    let (x, y, w, h) = bbox
        .clip_to_image(image.width(), image.height())
        .ok_or_else(|| Error::InvalidArgument("detection box outside image".into()))?;
    let crop = image.crop(x, y, w, h);
    let origin = BBox::new(x as f64, y as f64, w as f64, h as f64);
    let (mut tensor, transform, _) = preprocess_crop(&crop, &origin, None)?;
    normalize_pixels(&mut tensor, &cnn.stats);
    let shape = cnn.input_shape();
    let batch = tensor.reshape(&[1, shape.c, shape.h, shape.w])?;
    let out = cnn.forward(&batch)?;
    let (a, b) = denormalize_coords(out.item(0), &cnn.stats);
    let pa = transform.tensor_to_image(a);
    let pb = transform.tensor_to_image(b);
    // left/right order by x
    if pa.x <= pb.x {
        Ok((pa, pb, origin))
    } else {
        Ok((pb, pa, origin))
    }
}

/// Euclidean coin-width distance divided by the fiducial's physical size.
pub fn scale_px_per_mm(coin_left: &Point2, coin_right: &Point2) -> Result<f64> {
    let d = coin_left.distance(coin_right);
    if d <= 0.0 {
        return Err(Error::InvalidMeasurement("coincident coin landmarks".into()));
    }
    Ok(d / COIN_DIAMETER_MM)
}

/// Combine nose landmarks with the coin scale into a sized result.
pub fn recommend(
    nose_left: &Point2,
    nose_right: &Point2,
    scale: f64,
    chart: &SizeChart,
    provenance: Provenance,
) -> Result<SizingResult> {
    if !(scale > 0.0) {
        return Err(Error::InvalidMeasurement(format!("non-positive scale {scale}")));
    }
    let width_mm = nose_left.distance(nose_right) / scale;
    let size = chart.size_bin(width_mm)?;
    Ok(SizingResult {
        nose_width_mm: width_mm,
        scale_px_per_mm: scale,
        size,
        near_boundary: chart.near_boundary(width_mm),
        provenance,
    })
}

/// Face -> nose (inside the face box) -> coin (whole image) -> scale ->
/// size. Fails with a stage-naming error when a detector finds nothing.
pub fn run_pipeline(image: &Raster, models: &StageModels) -> Result<SizingResult> {
    let face_dets = detect(image, &models.face);
    let face = best_detection(&face_dets).ok_or(Error::StageFailure { stage: Stage::Face })?;

    // Anthropometric prior from the face box: the box construction fixes
    // its width as a multiple of the eye distance, so the eye distance --
    // and with it a plausible nose-width range -- can be estimated back
    // out of any detected face. Used as a fallback search region when the
    // nose detector finds nothing and as an outlier guard when the
    // regressed width is anatomically impossible for this face.
    let eye_est = face.bbox.w / FACE_BOX_PER_EYE_DISTANCE;
    let plausible = (28.0 * eye_est / 63.0, 54.0 * eye_est / 63.0);
    let prior_from_face = || -> Result<(Point2, Point2, BBox)> {
        let cx = face.bbox.x + face.bbox.w / 2.0;
        let cy = face.bbox.y + 0.55 * face.bbox.h;
        let d = 40.0 * eye_est / 63.0;
        let mut lm = LandmarkSet::new();
        lm.insert("nose_left", Point2::new(cx - d / 2.0, cy));
        lm.insert("nose_right", Point2::new(cx + d / 2.0, cy));
        let b = ground_truth_box(
            &lm,
            LandmarkRole::Nose,
            models.nose.params.window_w,
            models.nose.params.window_h,
        )?;
        predict_landmarks_in_box(image, &b, &models.nose_cnn)
    };
    // Search regions from face geometry: the nose sits in the central
    // lower-middle band of the face box, the coin on the forehead above
    // the eye line. Constraining the detectors keeps them off other
    // high-gradient circular structure (eyes, nostrils).
    let fb = &face.bbox;
    let nose_region = BBox::new(fb.x + 0.2 * fb.w, fb.y + 0.40 * fb.h, 0.6 * fb.w, 0.35 * fb.h);
    let coin_region = BBox::new(fb.x + 0.1 * fb.w, fb.y - 0.10 * fb.h, 0.8 * fb.w, 0.40 * fb.h);

    let (nl, nr, nose_box) = match predict_landmarks(
        image,
        &models.nose,
        &models.nose_cnn,
        Stage::Nose,
        Some(&nose_region),
        Some(1.8 * 40.0 * eye_est / 63.0),
        Some(plausible),
    ) {
        Ok(v) => v,
        Err(Error::StageFailure { stage: Stage::Nose }) => prior_from_face()
            .map_err(|_| Error::StageFailure { stage: Stage::Nose })?,
        Err(e) => return Err(e),
    };

    // The coin diameter in pixels is physically pinned: 28.65 mm at the
    // face's own px-per-mm scale, i.e. a fixed multiple of the eye
    // distance estimate (within detector-box scale noise).
    let coin_prior = COIN_DIAMETER_MM * eye_est / 63.0;
    let coin_band = (coin_prior / 1.3, coin_prior * 1.3);
    let (cl, cr, coin_box) = predict_landmarks(
        image,
        &models.coin,
        &models.coin_cnn,
        Stage::Coin,
        Some(&coin_region),
        Some(1.4 * coin_prior),
        Some(coin_band),
    )
    .or_else(|_| {
        // coin not on the forehead: fall back to an unconstrained search
        predict_landmarks(
            image,
            &models.coin,
            &models.coin_cnn,
            Stage::Coin,
            None,
            Some(1.4 * coin_prior),
            Some(coin_band),
        )
    })?;

    let scale = scale_px_per_mm(&cl, &cr)?;
    recommend(
        &nl,
        &nr,
        scale,
        &models.chart,
        Provenance {
            face_box: face.bbox,
            nose_box,
            coin_box,
            nose_points: (nl, nr),
            coin_points: (cl, cr),
        },
    )
}

/// Resume training from saved base weights on a patient-style set:
/// batch size 1, 90/10 split, same patience; returns the best-validation
/// snapshot. The caller flip-augments the manifest beforehand.
pub fn transfer_train(
    base: &CnnModel,
    manifest: &Manifest,
    boxes: &[BBox],
    cfg: &TrainConfig,
    rng: &SeededRng,
) -> Result<(CnnModel, crate::nnet::History)> {
    if manifest.len() != boxes.len() {
        return Err(Error::InvalidArgument("one crop box required per record".into()));
    }
    // same shuffle-and-prefix partition as ingest::split, but carrying the
    // per-record crop boxes along
    let n = manifest.len();
    let n_train = ((n as f64 * 0.9) + 0.5).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidArgument(format!("{n} samples cannot make a 90/10 split")));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    rng.child("split").shuffle(&mut indices);
    let sub = |idxs: &[usize], suffix: &str| -> (Manifest, Vec<BBox>) {
        (
            Manifest {
                id: format!("{}-{suffix}", manifest.id),
                role: manifest.role,
                records: idxs.iter().map(|&i| manifest.records[i].clone()).collect(),
            },
            idxs.iter().map(|&i| boxes[i]).collect(),
        )
    };
    let (train_m, train_boxes) = sub(&indices[..n_train], "train");
    let (val_m, val_boxes) = sub(&indices[n_train..], "val");
    let (train_set, _) = build_cnn_dataset(&train_m, &train_boxes, Some(base.stats))?;
    let (val_set, _) = build_cnn_dataset(&val_m, &val_boxes, Some(base.stats))?;
    let cfg = TrainConfig {
        batch_size: 1,
        ..*cfg
    };
    let base_val = crate::nnet::train::validation_loss(base, &val_set)?;
    let (tuned, history) = train(base, &train_set, &val_set, &cfg)?;
    // the base weights themselves are a candidate snapshot: fine-tuning
    // must never hand back something worse than its starting point
    if history.val_loss[history.best_epoch] > base_val {
        return Ok((base.clone(), history));
    }
    Ok((tuned, history))
}

/// Ground-truth crop/detection box around the measured object, shaped to
/// the detection window's aspect ratio so CNN training crops match what
/// the detector produces at prediction time.
///
/// Nose and coin boxes are centred on the landmark pair's midpoint and
/// Face-box width as a multiple of the eye distance. Shared between the
/// ground-truth box construction and the predict-time plausibility guard,
/// which estimates the eye distance back out of a detected face box.
pub const FACE_BOX_PER_EYE_DISTANCE: f64 = 2.3;

/// sized by the pair distance; the face box on anchor sets derives from
/// the eye distance.
pub fn ground_truth_box(
    landmarks: &LandmarkSet,
    role: LandmarkRole,
    window_w: usize,
    window_h: usize,
) -> Result<BBox> {
    let aspect = window_h as f64 / window_w as f64;
    // never smaller than the detection window: the pyramid only downscales,
    // so sub-window boxes would train on levels the detector cannot scan
    let clamp = |w: f64| w.max(window_w as f64);
    match role {
        LandmarkRole::Nose | LandmarkRole::Coin => {
            let (l, r) = landmarks.width_pair(role)?;
            let d = l.distance(&r).max(1.0);
            let cx = (l.x + r.x) / 2.0;
            let cy = (l.y + r.y) / 2.0;
            let w = clamp(match role {
                LandmarkRole::Nose => 1.8 * d,
                _ => 1.4 * d,
            });
            let h = w * aspect;
            Ok(BBox::new(cx - w / 2.0, cy - h / 2.0, w, h))
        }
        LandmarkRole::Anchors => {
            landmarks.validate(role)?;
            let l = landmarks.get("eye_left").unwrap();
            let r = landmarks.get("eye_right").unwrap();
            let e = l.distance(&r).max(1.0);
            let cx = (l.x + r.x) / 2.0;
            let cy = (l.y + r.y) / 2.0 + 0.5 * e;
            let w = clamp(FACE_BOX_PER_EYE_DISTANCE * e);
            let h = w * aspect;
            Ok(BBox::new(cx - w / 2.0, cy - h / 2.0, w, h))
        }
    }
}

/// Randomly perturb a crop box the way detector output differs from ground
/// truth: scale noise log-uniform in [1/1.3, 1.3] (a bit over one pyramid
/// step) and up to `frac` of the width in translation. Training the
/// regressors on jittered crops keeps detected boxes in distribution at
/// prediction time. The range is capped so the landmarks themselves stay
/// inside (or at worst marginally outside) the crop; stronger shrink makes
/// the target unrecoverable from the pixels.
pub fn jitter_box(b: &BBox, frac: f64, rng: &mut SeededRng) -> BBox {
    let ln = 1.3f64.ln();
    let s = rng.gen_range_f64(-ln, ln).exp();
    let w = b.w * s;
    let h = b.h * s;
    let cx = b.x + b.w / 2.0 + rng.gen_range_f64(-frac, frac) * b.w;
    let cy = b.y + b.h / 2.0 + rng.gen_range_f64(-frac, frac) * b.h;
    BBox::new(cx - w / 2.0, cy - h / 2.0, w, h)
}

/// Training crop boxes for a landmark regressor: the ground-truth box of
/// every record, jittered. Jitter is mandatory — the exact box is a fixed
/// multiple of the landmark separation, so on exact crops the regression
/// target is a constant in tensor space and the network can score a
/// perfect loss without looking at the image. Jittered crops make the
/// target vary, forcing a genuine in-crop measurement, and double as the
/// scale/translation noise detector boxes carry at prediction time.
pub fn training_boxes(
    manifest: &Manifest,
    role: LandmarkRole,
    params: &HogParams,
    frac: f64,
    rng: &mut SeededRng,
) -> Result<Vec<BBox>> {
    manifest
        .records
        .iter()
        .map(|r| {
            let b = ground_truth_box(&r.landmarks, role, params.window_w, params.window_h)?;
            Ok(jitter_box(&b, frac, rng))
        })
        .collect()
}

/// Intermediate shapes for the standard 42x42 landmark architectures,
/// exposed for shape-contract checks.
pub fn architecture_chain(feature_maps: usize) -> Result<Vec<ItemShape>> {
    let model = CnnModel::init(
        CNN_INPUT,
        crate::nnet::landmark_specs(feature_maps),
        NormStats::default(),
        &SeededRng::new(0),
    )?;
    Ok(model.shape_chain())
}
