//! Artificial coin dataset generation: composite a photographed coin onto
//! face images, scaled from the eye distance, randomly rotated, offset,
//! blurred and brightness/contrast jittered. A metadata sidecar records
//! the per-sample draws so range conformance can be audited.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geom::{LandmarkRole, LandmarkSet, Point2};
use crate::ingest::{Manifest, SampleRecord, SourceTag};
use crate::par;
use crate::raster::Raster;
use crate::rng::SeededRng;

/// Photograph of one coin side with its disc annotated in asset pixels.
#[derive(Clone, Debug)]
pub struct CoinAsset {
    pub id: String,
    pub image: Raster,
    pub center: Point2,
    pub radius: f64,
    pub side: CoinSide,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoinSide {
    Heads,
    Tails,
}

impl CoinAsset {
    pub fn validate(&self) -> Result<()> {
        let inside = self.center.x - self.radius >= 0.0
            && self.center.y - self.radius >= 0.0
            && self.center.x + self.radius <= self.image.width() as f64
            && self.center.y + self.radius <= self.image.height() as f64;
        if !inside || self.radius <= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "coin circle (center {:?}, radius {}) not inside {}x{} asset",
                self.center,
                self.radius,
                self.image.width(),
                self.image.height()
            )));
        }
        Ok(())
    }
}

/// Which eye distance scales the coin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleMode {
    /// intra-ocular (pupil-to-pupil) distance
    Ipd,
    /// inner eye-corner distance
    InnerCorner,
}

#[derive(Clone, Copy, Debug)]
pub struct SynthConfig {
    /// rotation range, degrees
    pub rotation_deg: (f64, f64),
    /// gaussian blur sigma range (exclusive bounds)
    pub blur_sigma: (f64, f64),
    /// brightness/contrast jitter fraction
    pub jitter: f64,
    /// uniform placement offset, as fractions of the coin diameter
    pub offset_frac: (f64, f64),
    /// coin-diameter / eye-distance ratios
    pub r_ipd: f64,
    pub r_inner: f64,
    /// physical coin diameter, millimetres
    pub coin_diameter_mm: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rotation_deg: (-60.0, 60.0),
            blur_sigma: (1.0, 4.0),
            jitter: 0.20,
            offset_frac: (0.5, 0.5),
            // 28.65 mm coin vs mean 63 mm inter-pupillary / 35 mm
            // inner-canthal distances
            r_ipd: 28.65 / 63.0,
            r_inner: 28.65 / 35.0,
            coin_diameter_mm: 28.65,
        }
    }
}

/// Per-sample draws recorded for the range-conformance checks.
#[derive(Clone, Debug)]
pub struct SynthMeta {
    pub sample: String,
    pub asset_id: String,
    pub angle_deg: f64,
    pub sigma: f64,
    pub brightness: f64,
    pub contrast: f64,
    pub offset_x: f64,
    pub offset_y: f64,
    pub target_diameter_px: f64,
}

/// Coin diameter in pixels implied by the face's eye distance.
pub fn target_coin_diameter_px(anchors: &LandmarkSet, mode: ScaleMode, cfg: &SynthConfig) -> Result<f64> {
    let left = anchors
        .get("eye_left")
        .ok_or_else(|| Error::InvalidArgument("missing landmark 'eye_left'".into()))?;
    let right = anchors
        .get("eye_right")
        .ok_or_else(|| Error::InvalidArgument("missing landmark 'eye_right'".into()))?;
    let dist = left.distance(&right);
    if dist <= 0.0 {
        return Err(Error::InvalidArgument("degenerate eye anchors: zero eye distance".into()));
    }
    let ratio = match mode {
        ScaleMode::Ipd => cfg.r_ipd,
        ScaleMode::InnerCorner => cfg.r_inner,
    };
    Ok(dist * ratio)
}

struct CoinLayer {
    /// composited pixels: (x, y, rgb)
    pixels: Vec<(i64, i64, [f64; 3])>,
    left: Point2,
    right: Point2,
}

/// Render the asset's disc scaled to `diameter` px and rotated by
/// `angle_deg`, centred at `center` in face coordinates. Returns the layer
/// pixels plus the rotated disc's horizontal extremes.
fn render_coin(asset: &CoinAsset, center: Point2, diameter: f64, angle_deg: f64) -> CoinLayer {
    let radius = diameter / 2.0;
    let angle = angle_deg.to_radians();
    let (sin, cos) = angle.sin_cos();
    let src = asset.image.to_rgb();
    let scale = asset.radius / radius; // face px -> asset px
    let mut pixels = Vec::new();
    let r_ceil = radius.ceil() as i64;
    let cx = center.x;
    let cy = center.y;
    for dy in -r_ceil..=r_ceil {
        for dx in -r_ceil..=r_ceil {
            // sample at pixel center
            let fx = dx as f64;
            let fy = dy as f64;
            if (fx * fx + fy * fy).sqrt() > radius {
                continue;
            }
            // inverse-rotate into asset frame
            let ax = asset.center.x + (fx * cos + fy * sin) * scale;
            let ay = asset.center.y + (-fx * sin + fy * cos) * scale;
            let rgb = bilinear_rgb(&src, ax, ay);
            pixels.push(((cx.round() as i64) + dx, (cy.round() as i64) + dy, rgb));
        }
    }
    // the rotated disc's horizontal extremes are the ends of the
    // horizontal chord through the centre
    let ccx = cx.round();
    let ccy = cy.round();
    CoinLayer {
        pixels,
        left: Point2::new(ccx - radius, ccy),
        right: Point2::new(ccx + radius, ccy),
    }
}

fn bilinear_rgb(img: &Raster, x: f64, y: f64) -> [f64; 3] {
    let xc = x.clamp(0.0, (img.width() - 1) as f64);
    let yc = y.clamp(0.0, (img.height() - 1) as f64);
    let x0 = xc.floor() as u32;
    let y0 = yc.floor() as u32;
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let wx = xc - x0 as f64;
    let wy = yc - y0 as f64;
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let c = c as u8;
        let top = img.get(x0, y0, c) as f64 * (1.0 - wx) + img.get(x1, y0, c) as f64 * wx;
        let bot = img.get(x0, y1, c) as f64 * (1.0 - wx) + img.get(x1, y1, c) as f64 * wx;
        *o = top * (1.0 - wy) + bot * wy;
    }
    out
}

/// Outcome of compositing one face.
pub struct PlacedCoin {
    pub image: Raster,
    pub landmarks: LandmarkSet,
    pub meta: SynthMeta,
}

/// Composite `asset` onto `face`. Transform order: scale to the target
/// diameter, rotate, place at the base position plus a uniform offset,
/// blur the coin region, then jitter its brightness/contrast. The offset
/// is resampled up to 10 times if the coin would leave the image; `None`
/// signals a skipped sample.
pub fn place_coin(
    face: &Raster,
    anchors: &LandmarkSet,
    mode: ScaleMode,
    asset: &CoinAsset,
    cfg: &SynthConfig,
    rng: &mut SeededRng,
    sample_name: &str,
) -> Result<Option<PlacedCoin>> {
    asset.validate()?;
    anchors.validate(LandmarkRole::Anchors)?;
    let diameter = target_coin_diameter_px(anchors, mode, cfg)?;
    let radius = diameter / 2.0;

    // base position: x at the nose tip, y above the highest landmark
    let nose_tip = anchors.get("nose_tip").expect("validated");
    let highest_y = anchors
        .iter()
        .map(|(_, p)| p.y)
        .fold(f64::INFINITY, f64::min);
    let base = Point2::new(nose_tip.x, highest_y - 0.75 * diameter);

    let angle = rng.gen_range_f64(cfg.rotation_deg.0, cfg.rotation_deg.1);
    let sigma = rng.gen_range_f64(cfg.blur_sigma.0, cfg.blur_sigma.1);
    let brightness = rng.gen_range_f64(-cfg.jitter, cfg.jitter);
    let contrast = rng.gen_range_f64(-cfg.jitter, cfg.jitter);

    let mut placed_center = None;
    let mut offset = (0.0, 0.0);
    for _ in 0..10 {
        let ox = rng.gen_range_f64(-cfg.offset_frac.0, cfg.offset_frac.0) * diameter;
        let oy = rng.gen_range_f64(-cfg.offset_frac.1, cfg.offset_frac.1) * diameter;
        let c = Point2::new(base.x + ox, base.y + oy);
        let margin = radius + 1.0;
        if c.x - margin >= 0.0
            && c.y - margin >= 0.0
            && c.x + margin < face.width() as f64
            && c.y + margin < face.height() as f64
        {
            placed_center = Some(c);
            offset = (ox, oy);
            break;
        }
    }
    let Some(center) = placed_center else {
        return Ok(None);
    };

    let layer = render_coin(asset, center, diameter, angle);
    let mut out = face.to_rgb();
    for &(x, y, rgb) in &layer.pixels {
        if x < 0 || y < 0 || x >= out.width() as i64 || y >= out.height() as i64 {
            continue;
        }
        for c in 0..3u8 {
            out.set(x as u32, y as u32, c, rgb[c as usize].round().clamp(0.0, 255.0) as u8);
        }
    }

    // blur and jitter inside the coin's blur-support region only
    let support = radius + 3.0 * sigma;
    let x0 = ((center.x - support).floor().max(0.0)) as u32;
    let y0 = ((center.y - support).floor().max(0.0)) as u32;
    let x1 = ((center.x + support).ceil() as u32).min(out.width() - 1);
    let y1 = ((center.y + support).ceil() as u32).min(out.height() - 1);
    let region = out.crop(x0, y0, x1 - x0 + 1, y1 - y0 + 1);
    let blurred = region.gaussian_blur(sigma);
    for y in 0..blurred.height() {
        for x in 0..blurred.width() {
            // restrict writes to the coin disc plus blur support
            let fx = (x0 + x) as f64 - center.x;
            let fy = (y0 + y) as f64 - center.y;
            if (fx * fx + fy * fy).sqrt() > support {
                continue;
            }
            for c in 0..3u8 {
                let v = blurred.get(x, y, c) as f64;
                let adjusted = (v - 128.0) * (1.0 + contrast) + 128.0 + 255.0 * brightness;
                out.set(x0 + x, y0 + y, c, adjusted.round().clamp(0.0, 255.0) as u8);
            }
        }
    }

    let mut landmarks = LandmarkSet::new();
    landmarks.insert("coin_left", layer.left);
    landmarks.insert("coin_right", layer.right);
    Ok(Some(PlacedCoin {
        image: out,
        landmarks,
        meta: SynthMeta {
            sample: sample_name.to_string(),
            asset_id: asset.id.clone(),
            angle_deg: angle,
            sigma,
            brightness,
            contrast,
            offset_x: offset.0,
            offset_y: offset.1,
            target_diameter_px: diameter,
        },
    }))
}

/// Generated dataset: manifest of composited samples plus the metadata rows.
pub struct GeneratedDataset {
    pub manifest: Manifest,
    pub metadata: Vec<SynthMeta>,
}

/// Composite one coin per input face (faces whose offsets never fit are
/// skipped), writing PNGs, a coin-role manifest and a metadata sidecar to
/// `out_dir`. Each face gets its own child rng so the result does not
/// depend on evaluation order.
pub fn generate_dataset(
    faces: &Manifest,
    assets: &[CoinAsset],
    mode: ScaleMode,
    cfg: &SynthConfig,
    rng: &SeededRng,
    out_dir: &Path,
) -> Result<GeneratedDataset> {
    if faces.is_empty() {
        return Err(Error::InvalidArgument("no input faces".into()));
    }
    if assets.is_empty() {
        return Err(Error::InvalidArgument("no coin assets".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let indices: Vec<usize> = (0..faces.records.len()).collect();
    let results: Vec<Result<Option<(SampleRecord, SynthMeta, Raster, PathBuf)>>> =
        par::map_slice(&indices, |&i| {
            let record = &faces.records[i];
            let mut face_rng = rng.child_indexed("face", i);
            let asset = &assets[face_rng.gen_range_usize(0, assets.len())];
            let image = record.load_image()?;
            let name = format!("coin_{i:05}");
            let placed = place_coin(
                &image,
                &record.landmarks,
                mode,
                asset,
                cfg,
                &mut face_rng,
                &name,
            )?;
            Ok(placed.map(|p| {
                let path = out_dir.join(format!("{name}.png"));
                let sample = SampleRecord {
                    image_path: path.clone(),
                    landmarks: p.landmarks,
                    width_mm: None,
                    size: None,
                    source: SourceTag::SyntheticCoin,
                };
                (sample, p.meta, p.image, path)
            }))
        });

    let mut records = Vec::new();
    let mut metadata = Vec::new();
    for r in results {
        if let Some((sample, meta, image, path)) = r? {
            image.save_png(&path)?;
            records.push(sample);
            metadata.push(meta);
        }
    }
    if records.is_empty() {
        return Err(Error::AllSamplesSkipped(
            "every face rejected the coin placement".into(),
        ));
    }

    let manifest = Manifest {
        id: format!("{}-coins", faces.id),
        role: LandmarkRole::Coin,
        records,
    };
    crate::ingest::save_manifest(&manifest, &out_dir.join("manifest.csv"))?;
    write_metadata(&metadata, &out_dir.join("metadata.csv"))?;
    Ok(GeneratedDataset { manifest, metadata })
}

pub fn write_metadata(rows: &[SynthMeta], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let io_err = |e: csv::Error| Error::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record([
        "sample",
        "asset_id",
        "angle_deg",
        "sigma",
        "brightness",
        "contrast",
        "offset_x",
        "offset_y",
        "target_diameter_px",
    ])
    .map_err(io_err)?;
    for m in rows {
        w.write_record([
            m.sample.clone(),
            m.asset_id.clone(),
            format!("{}", m.angle_deg),
            format!("{}", m.sigma),
            format!("{}", m.brightness),
            format!("{}", m.contrast),
            format!("{}", m.offset_x),
            format!("{}", m.offset_y),
            format!("{}", m.target_diameter_px),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

/// A procedurally drawn coin asset for tests and the synthetic corpus:
/// a shaded disc with a radial spoke pattern so rotation is observable.
pub fn procedural_asset(id: &str, side: CoinSide, size: u32) -> CoinAsset {
    let mut img = Raster::filled(size, size, 3, 30);
    let c = (size as f64 - 1.0) / 2.0;
    let radius = c * 0.9;
    for y in 0..size {
        for x in 0..size {
            let dx = x as f64 - c;
            let dy = y as f64 - c;
            let r = (dx * dx + dy * dy).sqrt();
            if r <= radius {
                let theta = dy.atan2(dx);
                let spokes = match side {
                    CoinSide::Heads => 5.0,
                    CoinSide::Tails => 8.0,
                };
                let ring = (1.0 - r / radius).powf(0.5);
                let v = 170.0 + 50.0 * (theta * spokes).sin() * ring + 20.0 * ring;
                for ch in 0..3u8 {
                    let tint = if ch == 2 { 0.75 } else { 1.0 }; // gold-ish
                    img.set(x, y, ch, (v * tint).round().clamp(0.0, 255.0) as u8);
                }
            }
        }
    }
    CoinAsset {
        id: id.to_string(),
        image: img,
        center: Point2::new(c, c),
        radius,
        side,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anchors() -> LandmarkSet {
        let mut lm = LandmarkSet::new();
        lm.insert("eye_left", Point2::new(100.0, 100.0));
        lm.insert("eye_right", Point2::new(163.0, 100.0));
        lm.insert("nose_tip", Point2::new(131.0, 140.0));
        lm
    }

    #[test]
    fn target_diameter_from_eye_distance() {
        let cfg = SynthConfig {
            r_ipd: 0.455,
            ..SynthConfig::default()
        };
        let d = target_coin_diameter_px(&anchors(), ScaleMode::Ipd, &cfg).unwrap();
        assert!((d - 63.0 * 0.455).abs() < 1e-9, "63 * 0.455 = 28.665, got {d}");
    }

    #[test]
    fn degenerate_anchors_rejected() {
        let mut lm = anchors();
        lm.insert("eye_right", Point2::new(100.0, 100.0));
        assert!(target_coin_diameter_px(&lm, ScaleMode::Ipd, &SynthConfig::default()).is_err());
    }

    #[test]
    fn diameter_linear_in_eye_distance() {
        let cfg = SynthConfig::default();
        let single = target_coin_diameter_px(&anchors(), ScaleMode::Ipd, &cfg).unwrap();
        let mut wide = anchors();
        wide.insert("eye_right", Point2::new(226.0, 100.0));
        let double = target_coin_diameter_px(&wide, ScaleMode::Ipd, &cfg).unwrap();
        assert!((double - 2.0 * single).abs() < 1e-9);
    }

    #[test]
    fn placed_landmark_separation_matches_target() {
        let face = Raster::filled(300, 300, 3, 90);
        let asset = procedural_asset("a0", CoinSide::Heads, 64);
        let cfg = SynthConfig::default();
        let mut rng = SeededRng::new(4);
        let placed = place_coin(&face, &anchors(), ScaleMode::Ipd, &asset, &cfg, &mut rng, "t")
            .unwrap()
            .expect("placement fits");
        let l = placed.landmarks.get("coin_left").unwrap();
        let r = placed.landmarks.get("coin_right").unwrap();
        let sep = l.distance(&r);
        assert!(
            (sep - placed.meta.target_diameter_px).abs() <= 0.5,
            "separation {sep} vs target {}",
            placed.meta.target_diameter_px
        );
    }

    #[test]
    fn same_seed_pixel_identical() {
        let face = Raster::filled(300, 300, 3, 90);
        let asset = procedural_asset("a0", CoinSide::Tails, 64);
        let cfg = SynthConfig::default();
        let a = place_coin(&face, &anchors(), ScaleMode::Ipd, &asset, &cfg, &mut SeededRng::new(7), "t")
            .unwrap()
            .unwrap();
        let b = place_coin(&face, &anchors(), ScaleMode::Ipd, &asset, &cfg, &mut SeededRng::new(7), "t")
            .unwrap()
            .unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.landmarks, b.landmarks);
    }

    #[test]
    fn pixels_outside_support_untouched() {
        let face = Raster::filled(300, 300, 3, 90);
        let asset = procedural_asset("a0", CoinSide::Heads, 64);
        let cfg = SynthConfig::default();
        let mut rng = SeededRng::new(12);
        let placed = place_coin(&face, &anchors(), ScaleMode::Ipd, &asset, &cfg, &mut rng, "t")
            .unwrap()
            .unwrap();
        let l = placed.landmarks.get("coin_left").unwrap();
        let r = placed.landmarks.get("coin_right").unwrap();
        let center = Point2::new((l.x + r.x) / 2.0, l.y);
        let radius = (r.x - l.x) / 2.0;
        let support = radius + 3.0 * placed.meta.sigma + 1.0;
        let mut changed_outside = 0;
        for y in 0..300u32 {
            for x in 0..300u32 {
                let d = Point2::new(x as f64, y as f64).distance(&center);
                if d > support && placed.image.get(x, y, 0) != 90 {
                    changed_outside += 1;
                }
            }
        }
        assert_eq!(changed_outside, 0);
    }

    #[test]
    fn tiny_face_skips_placement() {
        // coin too large to ever fit: every offset resample fails
        let face = Raster::filled(40, 40, 3, 90);
        let mut lm = LandmarkSet::new();
        lm.insert("eye_left", Point2::new(2.0, 30.0));
        lm.insert("eye_right", Point2::new(38.0, 30.0));
        lm.insert("nose_tip", Point2::new(20.0, 36.0));
        let asset = procedural_asset("a0", CoinSide::Heads, 64);
        let cfg = SynthConfig {
            r_ipd: 2.0, // 72 px coin in a 40 px image
            ..SynthConfig::default()
        };
        let mut rng = SeededRng::new(3);
        let placed = place_coin(&face, &lm, ScaleMode::Ipd, &asset, &cfg, &mut rng, "t").unwrap();
        assert!(placed.is_none());
    }
}
