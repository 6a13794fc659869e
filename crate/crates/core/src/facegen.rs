//! Procedural schematic-face corpus with exactly known geometry.
//!
//! Real patient photos cannot ship with the code, so demos, benches and the
//! end-to-end tests train and evaluate on drawn faces instead: an elliptical
//! head with eyes, nose ridge, nostril marks and a mouth, on a noisy
//! background. The eye distance fixes the pixel scale (63 mm assumed, the
//! same convention the synthesizer uses to size the coin), and the nostril
//! marks are placed so the nose width in millimetres is known exactly.

use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::geom::{LandmarkRole, LandmarkSet, Point2};
use crate::ingest::{save_manifest, Manifest, SampleRecord, SourceTag};
use crate::raster::Raster;
use crate::rng::SeededRng;
use crate::sizing::SizeChart;
use crate::synthgen::{generate_dataset, procedural_asset, CoinAsset, CoinSide, ScaleMode, SynthConfig};

/// mean adult inter-pupillary distance assumed by the scale convention
pub const EYE_DISTANCE_MM: f64 = 63.0;

pub const CANVAS_W: u32 = 220;
pub const CANVAS_H: u32 = 264;

#[derive(Clone, Copy, Debug)]
pub struct FaceParams {
    /// eye centre-to-centre distance, pixels
    pub eye_px: f64,
    /// nostril-to-nostril width, millimetres
    pub nose_mm: f64,
    /// face centre
    pub cx: f64,
    pub cy: f64,
}

#[derive(Clone, Debug)]
pub struct FaceSample {
    pub image: Raster,
    pub anchors: LandmarkSet,
    pub nose: LandmarkSet,
    pub width_mm: f64,
}

fn hash2(x: u32, y: u32, salt: u64) -> u8 {
    let mut v = (x as u64)
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((y as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f))
        .wrapping_add(salt);
    v ^= v >> 33;
    v = v.wrapping_mul(0xff51_afd7_ed55_8ccd);
    v ^= v >> 33;
    (v & 0xff) as u8
}

fn noisy_background(w: u32, h: u32, base: u8, amp: u8, salt: u64) -> Raster {
    let mut img = Raster::filled(w, h, 3, base);
    for y in 0..h {
        for x in 0..w {
            let n = (hash2(x / 2, y / 2, salt) % (2 * amp + 1)) as i32 - amp as i32;
            for c in 0..3 {
                let v = img.get(x, y, c) as i32 + n;
                img.set(x, y, c, v.clamp(0, 255) as u8);
            }
        }
    }
    img
}

fn fill_ellipse(img: &mut Raster, cx: f64, cy: f64, rx: f64, ry: f64, color: [u8; 3]) {
    let x0 = (cx - rx).floor().max(0.0) as u32;
    let x1 = ((cx + rx).ceil() as u32).min(img.width().saturating_sub(1));
    let y0 = (cy - ry).floor().max(0.0) as u32;
    let y1 = ((cy + ry).ceil() as u32).min(img.height().saturating_sub(1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = (x as f64 - cx) / rx;
            let dy = (y as f64 - cy) / ry;
            if dx * dx + dy * dy <= 1.0 {
                for c in 0..3 {
                    img.set(x, y, c, color[c as usize]);
                }
            }
        }
    }
}

fn fill_disc(img: &mut Raster, cx: f64, cy: f64, r: f64, color: [u8; 3]) {
    fill_ellipse(img, cx, cy, r, r, color);
}

fn fill_rect(img: &mut Raster, cx: f64, cy: f64, hw: f64, hh: f64, color: [u8; 3]) {
    let x0 = (cx - hw).floor().max(0.0) as u32;
    let x1 = ((cx + hw).ceil() as u32).min(img.width().saturating_sub(1));
    let y0 = (cy - hh).floor().max(0.0) as u32;
    let y1 = ((cy + hh).ceil() as u32).min(img.height().saturating_sub(1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            for c in 0..3 {
                img.set(x, y, c, color[c as usize]);
            }
        }
    }
}

/// Draw one face. The anchors (eyes, nose tip) and the nostril landmarks
/// are exact by construction; nose width in px is `nose_mm * eye_px / 63`.
pub fn schematic_face(p: &FaceParams, salt: u64) -> FaceSample {
    let mut img = noisy_background(CANVAS_W, CANVAS_H, 52, 14, salt);
    let scale = p.eye_px / EYE_DISTANCE_MM; // px per mm
    let fw = p.eye_px * 1.05;
    let fh = p.eye_px * 1.35;
    let skin = [206, 188, 168];
    let dark = [34, 30, 28];
    let mid = [120, 104, 92];
    fill_ellipse(&mut img, p.cx, p.cy, fw, fh, skin);

    let eye_y = p.cy - 0.28 * fh;
    let eye_l = Point2::new(p.cx - p.eye_px / 2.0, eye_y);
    let eye_r = Point2::new(p.cx + p.eye_px / 2.0, eye_y);
    let er = 0.10 * p.eye_px + 2.0;
    for e in [&eye_l, &eye_r] {
        fill_ellipse(&mut img, e.x, e.y, er * 1.4, er, [240, 240, 240]);
        fill_disc(&mut img, e.x, e.y, er * 0.62, dark);
    }
    // brows
    for e in [&eye_l, &eye_r] {
        fill_rect(&mut img, e.x, e.y - er * 2.2, er * 1.5, 1.5, mid);
    }

    let nose_px = p.nose_mm * scale;
    let nose_y = p.cy + 0.18 * fh;
    let nose_l = Point2::new(p.cx - nose_px / 2.0, nose_y);
    let nose_r = Point2::new(p.cx + nose_px / 2.0, nose_y);
    let tip = Point2::new(p.cx, nose_y);
    // ridge from between the eyes down to the tip, then wings + nostrils
    fill_rect(&mut img, p.cx, (eye_y + nose_y) / 2.0, 2.0, (nose_y - eye_y) / 2.0, mid);
    fill_ellipse(&mut img, p.cx, nose_y - 1.0, nose_px / 2.0, 0.16 * nose_px + 2.0, [160, 140, 124]);
    let nr = 0.075 * nose_px + 1.5;
    fill_disc(&mut img, nose_l.x, nose_l.y, nr, dark);
    fill_disc(&mut img, nose_r.x, nose_r.y, nr, dark);

    // mouth
    fill_ellipse(&mut img, p.cx, p.cy + 0.58 * fh, 0.32 * fw, 3.5, [140, 60, 60]);

    let img = img.gaussian_blur(0.6);

    let mut anchors = LandmarkSet::new();
    anchors.insert("eye_left", eye_l);
    anchors.insert("eye_right", eye_r);
    anchors.insert("nose_tip", tip);
    let mut nose = LandmarkSet::new();
    nose.insert("nose_left", nose_l);
    nose.insert("nose_right", nose_r);
    FaceSample { image: img, anchors, nose, width_mm: p.nose_mm }
}

/// Background-plus-clutter image containing no face, nose or coin; used to
/// sample detector negatives.
pub fn negative_image(rng: &mut SeededRng, salt: u64) -> Raster {
    let mut img = noisy_background(CANVAS_W, CANVAS_H, 60, 18, salt);
    for _ in 0..6 {
        let cx = rng.gen_range_f64(10.0, CANVAS_W as f64 - 10.0);
        let cy = rng.gen_range_f64(10.0, CANVAS_H as f64 - 10.0);
        let hw = rng.gen_range_f64(4.0, 26.0);
        let hh = rng.gen_range_f64(4.0, 26.0);
        let v = rng.gen_range_f64(20.0, 200.0) as u8;
        fill_rect(&mut img, cx, cy, hw, hh, [v, v, v]);
    }
    img.gaussian_blur(0.6)
}

/// Sample a nose width away from the chart boundaries: uniform inside each
/// bin shrunk by `margin_mm` on both sides, bins drawn round-robin so all
/// four sizes appear.
pub fn sample_width(i: usize, rng: &mut SeededRng, margin_mm: f64) -> f64 {
    let chart = SizeChart::default();
    let [b0, b1, b2] = *chart.boundaries();
    let ranges = [
        (b0 - 6.0, b0),
        (b0, b1),
        (b1, b2),
        (b2, b2 + 4.0),
    ];
    let (lo, hi) = ranges[i % 4];
    rng.gen_range_f64(lo + margin_mm, hi - margin_mm)
}

/// One fully generated corpus on disk: composites with the coin applied,
/// plus role-specific manifests over the same composite images.
pub struct Corpus {
    pub dir: PathBuf,
    /// coin-role manifest with ground-truth width/size attached
    pub coin: Manifest,
    pub nose: Manifest,
    pub anchors: Manifest,
    /// background images for negative sampling
    pub negatives: Vec<Raster>,
    /// clean faces (no coin), extra coin-detector negatives
    pub clean_faces: Vec<Raster>,
}

/// Draw `n` faces, composite one coin onto each, and write everything under
/// `dir` (`faces/` and `synth/` subdirectories, one manifest per role).
pub fn build_corpus(dir: &Path, n: usize, seed: u64) -> Result<Corpus> {
    let rng = SeededRng::new(seed);
    let faces_dir = dir.join("faces");
    let synth_dir = dir.join("synth");
    std::fs::create_dir_all(&faces_dir).map_err(|source| crate::error::Error::Io {
        path: faces_dir.clone(),
        source,
    })?;

    let mut face_records = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = rng.child_indexed("facegen", i);
        let p = FaceParams {
            eye_px: r.gen_range_f64(72.0, 92.0),
            nose_mm: sample_width(i, &mut r, 1.6),
            cx: CANVAS_W as f64 / 2.0 + r.gen_range_f64(-8.0, 8.0),
            cy: CANVAS_H as f64 * 0.58 + r.gen_range_f64(-6.0, 6.0),
        };
        let sample = schematic_face(&p, seed.wrapping_add(i as u64));
        let path = faces_dir.join(format!("face_{i:05}.png"));
        sample.image.save_png(&path)?;
        face_records.push(SampleRecord {
            image_path: path,
            landmarks: sample.anchors.clone(),
            width_mm: None,
            size: None,
            source: SourceTag::PublicFaces,
        });
        samples.push(sample);
    }
    let face_manifest = Manifest {
        id: "schematic-faces".into(),
        role: LandmarkRole::Anchors,
        records: face_records,
    };
    save_manifest(&face_manifest, &faces_dir.join("manifest.csv"))?;

    let assets: Vec<CoinAsset> = (0..6)
        .map(|i| {
            let side = if i % 2 == 0 { CoinSide::Heads } else { CoinSide::Tails };
            procedural_asset(&format!("proc_{i}"), side, 96)
        })
        .collect();
    // Schematic-face coins land around 26-33 px across, a fraction of
    // what a real photo yields, so the default blur range would erase the
    // rim entirely; scale the blur ceiling down in rough proportion.
    let synth_cfg = SynthConfig {
        blur_sigma: (1.0, 1.8),
        ..SynthConfig::default()
    };
    let generated = generate_dataset(
        &face_manifest,
        &assets,
        ScaleMode::Ipd,
        &synth_cfg,
        &rng.child("synth"),
        &synth_dir,
    )?;

    let chart = SizeChart::default();
    let mut coin_records = Vec::new();
    let mut nose_records = Vec::new();
    let mut anchor_records = Vec::new();
    for rec in &generated.manifest.records {
        // composites are named coin_{face index}.png
        let stem = rec.image_path.file_stem().unwrap().to_string_lossy();
        let i: usize = stem.trim_start_matches("coin_").parse().map_err(|_| {
            crate::error::Error::InvalidArgument(format!("unexpected composite name {stem}"))
        })?;
        let s = &samples[i];
        let mut coin_rec = rec.clone();
        coin_rec.width_mm = Some(s.width_mm);
        coin_rec.size = Some(chart.size_bin(s.width_mm)?);
        coin_records.push(coin_rec);
        nose_records.push(SampleRecord {
            image_path: rec.image_path.clone(),
            landmarks: s.nose.clone(),
            width_mm: Some(s.width_mm),
            size: Some(chart.size_bin(s.width_mm)?),
            source: SourceTag::SyntheticCoin,
        });
        anchor_records.push(SampleRecord {
            image_path: rec.image_path.clone(),
            landmarks: s.anchors.clone(),
            width_mm: None,
            size: None,
            source: SourceTag::SyntheticCoin,
        });
    }
    let coin = Manifest { id: "corpus-coin".into(), role: LandmarkRole::Coin, records: coin_records };
    let nose = Manifest { id: "corpus-nose".into(), role: LandmarkRole::Nose, records: nose_records };
    let anchors = Manifest {
        id: "corpus-anchors".into(),
        role: LandmarkRole::Anchors,
        records: anchor_records,
    };
    save_manifest(&coin, &synth_dir.join("coin.csv"))?;
    save_manifest(&nose, &synth_dir.join("nose.csv"))?;
    save_manifest(&anchors, &synth_dir.join("anchors.csv"))?;

    let mut neg_rng = rng.child("negatives");
    let negatives: Vec<Raster> = (0..12)
        .map(|i| negative_image(&mut neg_rng, seed.wrapping_mul(31).wrapping_add(i)))
        .collect();
    let clean_faces: Vec<Raster> = samples.iter().take(12).map(|s| s.image.clone()).collect();

    Ok(Corpus { dir: dir.to_path_buf(), coin, nose, anchors, negatives, clean_faces })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_geometry_exact() {
        let p = FaceParams { eye_px: 63.0, nose_mm: 40.0, cx: 110.0, cy: 150.0 };
        let s = schematic_face(&p, 1);
        let (l, r) = (s.nose.get("nose_left").unwrap(), s.nose.get("nose_right").unwrap());
        // eye_px = 63 makes the scale exactly 1 px/mm
        assert!((l.distance(&r) - 40.0).abs() < 1e-9);
        let (el, er) = (s.anchors.get("eye_left").unwrap(), s.anchors.get("eye_right").unwrap());
        assert!((el.distance(&er) - 63.0).abs() < 1e-9);
    }

    #[test]
    fn widths_stay_inside_bins() {
        let chart = SizeChart::default();
        let mut rng = SeededRng::new(9).child("w");
        for i in 0..200 {
            let w = sample_width(i, &mut rng, 1.2);
            let bin = chart.size_bin(w).unwrap();
            assert_eq!(bin.ordinal(), i % 4, "width {w} landed in the wrong bin");
            let [b0, b1, b2] = *chart.boundaries();
            let margin = [b0, b1, b2].iter().map(|b| (w - b).abs()).fold(f64::MAX, f64::min);
            assert!(margin >= 1.2, "width {w} too close to a boundary");
        }
    }

    #[test]
    fn corpus_small_smoke() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = build_corpus(dir.path(), 8, 77).unwrap();
        assert_eq!(corpus.nose.len(), corpus.coin.len());
        assert!(corpus.coin.len() >= 6, "too many placements skipped");
        for rec in &corpus.coin.records {
            assert!(rec.image_path.exists());
            assert!(rec.width_mm.is_some() && rec.size.is_some());
        }
    }
}
