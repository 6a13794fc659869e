//! Manifest loading, seeded train/validation splits, horizontal-flip
//! augmentation and landmark-aware cropping.
//!
//! Manifest CSV format: header
//! `image,role,name1_x,name1_y,...[,width_mm][,size]`, paths relative to
//! the manifest file, size codes `S|M|L|TL`.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geom::{BBox, LandmarkRole, LandmarkSet, Point2};
use crate::raster::Raster;
use crate::rng::SeededRng;
use crate::sizing::{SizeBin, SizeChart};

/// Where a sample came from; informational, carried through manifests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SourceTag {
    #[default]
    PublicFaces,
    SyntheticCoin,
    PatientStyle,
}

impl SourceTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceTag::PublicFaces => "public-faces",
            SourceTag::SyntheticCoin => "synthetic-coin",
            SourceTag::PatientStyle => "patient-style",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "public-faces" => Ok(SourceTag::PublicFaces),
            "synthetic-coin" => Ok(SourceTag::SyntheticCoin),
            "patient-style" => Ok(SourceTag::PatientStyle),
            other => Err(Error::InvalidArgument(format!("unknown source tag '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SampleRecord {
    pub image_path: PathBuf,
    pub landmarks: LandmarkSet,
    pub width_mm: Option<f64>,
    pub size: Option<SizeBin>,
    pub source: SourceTag,
}

impl SampleRecord {
    pub fn load_image(&self) -> Result<Raster> {
        Raster::load(&self.image_path)
    }
}

#[derive(Clone, Debug)]
pub struct Manifest {
    pub id: String,
    pub role: LandmarkRole,
    pub records: Vec<SampleRecord>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Load and validate a manifest CSV. Images are resolved relative to the
/// manifest location but not read here.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let err = |message: String| Error::Manifest {
        path: path.to_path_buf(),
        message,
    };
    let row_err = |row: usize, message: String| Error::ManifestRow {
        path: path.to_path_buf(),
        row,
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| err(e.to_string()))?
        .clone();
    let columns: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    if columns.len() < 2 || columns[0] != "image" || columns[1] != "role" {
        return Err(err("header must start with 'image,role'".into()));
    }

    // coordinate columns come in name_x/name_y pairs; width_mm and size
    // are optional trailers
    let mut coord_names: Vec<String> = Vec::new();
    let mut width_col = None;
    let mut size_col = None;
    let mut i = 2;
    while i < columns.len() {
        match columns[i].as_str() {
            "width_mm" => {
                width_col = Some(i);
                i += 1;
            }
            "size" => {
                size_col = Some(i);
                i += 1;
            }
            name_x if name_x.ends_with("_x") => {
                let name = &name_x[..name_x.len() - 2];
                let expect_y = format!("{name}_y");
                if columns.get(i + 1).map(String::as_str) != Some(expect_y.as_str()) {
                    return Err(err(format!("column '{name_x}' not followed by '{expect_y}'")));
                }
                coord_names.push(name.to_string());
                i += 2;
            }
            other => return Err(err(format!("unexpected column '{other}'"))),
        }
    }

    let base = path.parent().unwrap_or(Path::new("."));
    let chart = SizeChart::default();
    let mut records = Vec::new();
    let mut role: Option<LandmarkRole> = None;

    for (idx, result) in reader.records().enumerate() {
        let row = idx + 2; // 1-based, after the header
        let record = result.map_err(|e| row_err(row, e.to_string()))?;
        if record.len() != columns.len() {
            return Err(row_err(
                row,
                format!("expected {} fields, found {}", columns.len(), record.len()),
            ));
        }
        let image_path = base.join(record.get(0).unwrap().trim());
        let row_role = LandmarkRole::parse(record.get(1).unwrap().trim())
            .map_err(|e| row_err(row, e.to_string()))?;
        match role {
            None => role = Some(row_role),
            Some(declared) if declared != row_role => {
                return Err(row_err(
                    row,
                    format!("role '{}' differs from declared '{}'", row_role.as_str(), declared.as_str()),
                ))
            }
            _ => {}
        }

        let mut landmarks = LandmarkSet::new();
        for (k, name) in coord_names.iter().enumerate() {
            let x: f64 = record
                .get(2 + 2 * k)
                .unwrap()
                .trim()
                .parse()
                .map_err(|_| row_err(row, format!("bad {name}_x value")))?;
            let y: f64 = record
                .get(3 + 2 * k)
                .unwrap()
                .trim()
                .parse()
                .map_err(|_| row_err(row, format!("bad {name}_y value")))?;
            landmarks.insert(name, Point2::new(x, y));
        }
        landmarks
            .validate(row_role)
            .map_err(|e| row_err(row, e.to_string()))?;

        let width_mm = match width_col {
            Some(c) => {
                let v = record.get(c).unwrap().trim();
                if v.is_empty() {
                    None
                } else {
                    Some(v.parse::<f64>().map_err(|_| row_err(row, "bad width_mm".into()))?)
                }
            }
            None => None,
        };
        let size = match size_col {
            Some(c) => {
                let v = record.get(c).unwrap().trim();
                if v.is_empty() {
                    None
                } else {
                    Some(SizeBin::parse(v).map_err(|e| row_err(row, e.to_string()))?)
                }
            }
            None => None,
        };
        if let (Some(w), Some(s)) = (width_mm, size) {
            let expected = chart.size_bin(w).map_err(|e| row_err(row, e.to_string()))?;
            if expected != s {
                return Err(row_err(
                    row,
                    format!("width {w} mm maps to {expected} but size column says {s}"),
                ));
            }
        }

        records.push(SampleRecord {
            image_path,
            landmarks,
            width_mm,
            size,
            source: SourceTag::PublicFaces,
        });
    }

    if records.is_empty() {
        return Err(err("manifest contains no records".into()));
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "manifest".to_string());
    Ok(Manifest {
        id,
        role: role.expect("non-empty manifest has a role"),
        records,
    })
}

/// Write a manifest in the same CSV format `load_manifest` reads.
/// Coordinate columns follow the role's required-name order; extra
/// landmark names are not written.
pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let names = manifest.role.required_names();
    let mut header = vec!["image".to_string(), "role".to_string()];
    for n in names {
        header.push(format!("{n}_x"));
        header.push(format!("{n}_y"));
    }
    let has_width = manifest.records.iter().any(|r| r.width_mm.is_some());
    let has_size = manifest.records.iter().any(|r| r.size.is_some());
    if has_width {
        header.push("width_mm".into());
    }
    if has_size {
        header.push("size".into());
    }
    let io_err = |e: csv::Error| Error::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    writer.write_record(&header).map_err(io_err)?;
    let base = path.parent().unwrap_or(Path::new("."));
    for r in &manifest.records {
        let rel = r.image_path.strip_prefix(base).unwrap_or(&r.image_path);
        let mut row = vec![rel.to_string_lossy().into_owned(), manifest.role.as_str().to_string()];
        for n in names {
            let p = r.landmarks.get(n).ok_or_else(|| Error::Manifest {
                path: path.to_path_buf(),
                message: format!("record missing landmark '{n}'"),
            })?;
            row.push(format!("{}", p.x));
            row.push(format!("{}", p.y));
        }
        if has_width {
            row.push(r.width_mm.map(|w| format!("{w}")).unwrap_or_default());
        }
        if has_size {
            row.push(r.size.map(|s| s.code().to_string()).unwrap_or_default());
        }
        writer.write_record(&row).map_err(io_err)?;
    }
    writer.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

/// Seeded disjoint train/validation partition. Indices are shuffled with
/// the "split" child stream; |train| = round-half-up(n * fraction).
pub fn split(manifest: &Manifest, train_fraction: f64, rng: &SeededRng) -> Result<(Manifest, Manifest)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} not in (0,1)"
        )));
    }
    let n = manifest.len();
    let n_train = ((n as f64 * train_fraction) + 0.5).floor() as usize;
    let mut indices: Vec<usize> = (0..n).collect();
    rng.child("split").shuffle(&mut indices);
    let take = |idxs: &[usize], suffix: &str| Manifest {
        id: format!("{}-{suffix}", manifest.id),
        role: manifest.role,
        records: idxs.iter().map(|&i| manifest.records[i].clone()).collect(),
    };
    Ok((take(&indices[..n_train], "train"), take(&indices[n_train..], "val")))
}

/// Repeat every record `k` times (record 0 k times, then record 1, ...).
/// Used to draw several independently jittered training crops per sample.
pub fn repeat_records(manifest: &Manifest, k: usize) -> Manifest {
    Manifest {
        id: format!("{}-x{k}", manifest.id),
        role: manifest.role,
        records: manifest
            .records
            .iter()
            .flat_map(|r| std::iter::repeat(r.clone()).take(k))
            .collect(),
    }
}

/// Mirror a sample column-wise: x' = (W-1) - x, paired left/right names
/// swapped so left.x <= right.x still holds. Returns the flipped image too
/// so callers can persist it.
pub fn flip_horizontal(sample: &SampleRecord) -> Result<(Raster, SampleRecord)> {
    let image = sample.load_image()?;
    let flipped = image.flip_horizontal();
    let w = image.width() as f64;
    let swap = |name: &str| -> String {
        if let Some(stem) = name.strip_suffix("_left") {
            format!("{stem}_right")
        } else if let Some(stem) = name.strip_suffix("_right") {
            format!("{stem}_left")
        } else {
            name.to_string()
        }
    };
    let landmarks: LandmarkSet = sample
        .landmarks
        .iter()
        .map(|(name, p)| (swap(name), Point2::new((w - 1.0) - p.x, p.y)))
        .collect();
    let mut out = sample.clone();
    out.landmarks = landmarks;
    Ok((flipped, out))
}

/// Flip every record, writing mirrored images next to the originals with a
/// `_flip` suffix, and return the manifest doubled (originals then flips).
pub fn augment_with_flips(manifest: &Manifest, out_dir: &Path) -> Result<Manifest> {
    let mut records = manifest.records.clone();
    for sample in &manifest.records {
        let (image, mut flipped) = flip_horizontal(sample)?;
        let stem = sample
            .image_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "sample".into());
        let path = out_dir.join(format!("{stem}_flip.png"));
        image.save_png(&path)?;
        flipped.image_path = path;
        records.push(flipped);
    }
    Ok(Manifest {
        id: format!("{}-aug", manifest.id),
        role: manifest.role,
        records,
    })
}

/// Crop a sample's image to `bbox` (clipped to the image). Landmarks are
/// translated into crop coordinates; the returned mask flags, per landmark
/// in iteration order, whether it landed inside the crop.
pub fn crop(
    sample: &SampleRecord,
    bbox: &BBox,
) -> Result<(Raster, LandmarkSet, Vec<bool>)> {
    let image = sample.load_image()?;
    crop_raster(&image, &sample.landmarks, bbox)
}

pub fn crop_raster(
    image: &Raster,
    landmarks: &LandmarkSet,
    bbox: &BBox,
) -> Result<(Raster, LandmarkSet, Vec<bool>)> {
    let (x, y, w, h) = bbox
        .clip_to_image(image.width(), image.height())
        .ok_or_else(|| Error::InvalidArgument("crop box fully outside image".into()))?;
    let sub = image.crop(x, y, w, h);
    let crop_box = BBox::new(x as f64, y as f64, w as f64, h as f64);
    let mut inside = Vec::with_capacity(landmarks.len());
    let translated: LandmarkSet = landmarks
        .iter()
        .map(|(name, p)| {
            inside.push(crop_box.contains_point(p));
            (name.to_string(), Point2::new(p.x - x as f64, p.y - y as f64))
        })
        .collect();
    Ok((sub, translated, inside))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_manifest(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    fn dummy_png(dir: &Path, name: &str, w: u32, h: u32) -> PathBuf {
        let path = dir.join(name);
        Raster::filled(w, h, 3, 50).save_png(&path).unwrap();
        path
    }

    #[test]
    fn load_valid_nose_manifest() {
        let dir = tempfile::tempdir().unwrap();
        dummy_png(dir.path(), "a.png", 20, 20);
        dummy_png(dir.path(), "b.png", 20, 20);
        let p = write_manifest(
            dir.path(),
            "m.csv",
            "image,role,nose_left_x,nose_left_y,nose_right_x,nose_right_y\n\
             a.png,nose,3,10,12,10\n\
             b.png,nose,4,9,15,9\n",
        );
        let m = load_manifest(&p).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.role, LandmarkRole::Nose);
        assert_eq!(m.records[0].landmarks.get("nose_left"), Some(Point2::new(3.0, 10.0)));
    }

    #[test]
    fn row_arity_error_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_manifest(
            dir.path(),
            "m.csv",
            "image,role,nose_left_x,nose_left_y,nose_right_x,nose_right_y\n\
             a.png,nose,3,10,12\n",
        );
        let e = load_manifest(&p).unwrap_err();
        match e {
            Error::ManifestRow { row, .. } => assert_eq!(row, 2),
            other => panic!("expected row error, got {other}"),
        }
    }

    #[test]
    fn empty_manifest_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_manifest(
            dir.path(),
            "m.csv",
            "image,role,nose_left_x,nose_left_y,nose_right_x,nose_right_y\n",
        );
        assert!(matches!(load_manifest(&p), Err(Error::Manifest { .. })));
    }

    #[test]
    fn width_size_consistency_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_manifest(
            dir.path(),
            "m.csv",
            "image,role,nose_left_x,nose_left_y,nose_right_x,nose_right_y,width_mm,size\n\
             a.png,nose,3,10,12,10,36.0,M\n",
        );
        assert!(load_manifest(&p).is_err());
    }

    fn toy_manifest(n: usize) -> Manifest {
        let mut lm = LandmarkSet::new();
        lm.insert("nose_left", Point2::new(1.0, 1.0));
        lm.insert("nose_right", Point2::new(5.0, 1.0));
        Manifest {
            id: "toy".into(),
            role: LandmarkRole::Nose,
            records: (0..n)
                .map(|i| SampleRecord {
                    image_path: PathBuf::from(format!("{i}.png")),
                    landmarks: lm.clone(),
                    width_mm: None,
                    size: None,
                    source: SourceTag::PublicFaces,
                })
                .collect(),
        }
    }

    #[test]
    fn split_sizes_match_paper_ratios() {
        let rng = SeededRng::new(1);
        let m = toy_manifest(10);
        let (tr, va) = split(&m, 0.7, &rng).unwrap();
        assert_eq!((tr.len(), va.len()), (7, 3));
        let (tr, va) = split(&m, 0.9, &rng).unwrap();
        assert_eq!((tr.len(), va.len()), (9, 1));
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let m = toy_manifest(23);
        let (a1, b1) = split(&m, 0.7, &SeededRng::new(5)).unwrap();
        let (a2, b2) = split(&m, 0.7, &SeededRng::new(5)).unwrap();
        let paths = |m: &Manifest| -> Vec<_> { m.records.iter().map(|r| r.image_path.clone()).collect() };
        assert_eq!(paths(&a1), paths(&a2));
        assert_eq!(paths(&b1), paths(&b2));
        let mut all: Vec<_> = paths(&a1).into_iter().chain(paths(&b1)).collect();
        all.sort();
        let mut orig = paths(&m);
        orig.sort();
        assert_eq!(all, orig);
    }

    #[test]
    fn flip_mirrors_and_swaps() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("f.png");
        let mut img = Raster::filled(100, 40, 3, 10);
        img.set(10, 20, 0, 200);
        img.save_png(&img_path).unwrap();
        let mut lm = LandmarkSet::new();
        lm.insert("nose_left", Point2::new(10.0, 20.0));
        lm.insert("nose_right", Point2::new(30.0, 20.0));
        let sample = SampleRecord {
            image_path: img_path,
            landmarks: lm,
            width_mm: None,
            size: None,
            source: SourceTag::PublicFaces,
        };
        let (flipped_img, flipped) = flip_horizontal(&sample).unwrap();
        // W=100: x=10 mirrors to 89 and becomes the right-side landmark
        assert_eq!(flipped.landmarks.get("nose_right"), Some(Point2::new(89.0, 20.0)));
        assert_eq!(flipped.landmarks.get("nose_left"), Some(Point2::new(69.0, 20.0)));
        flipped.landmarks.validate(LandmarkRole::Nose).unwrap();
        assert_eq!(flipped_img.get(89, 20, 0), 200);
    }

    #[test]
    fn crop_translates_landmarks() {
        let img = Raster::filled(100, 100, 3, 0);
        let mut lm = LandmarkSet::new();
        lm.insert("p", Point2::new(50.0, 50.0));
        let (sub, out, inside) = crop_raster(&img, &lm, &BBox::new(40.0, 40.0, 20.0, 20.0)).unwrap();
        assert_eq!((sub.width(), sub.height()), (20, 20));
        assert_eq!(out.get("p"), Some(Point2::new(10.0, 10.0)));
        assert_eq!(inside, vec![true]);
    }

    #[test]
    fn crop_clips_and_errors() {
        let img = Raster::filled(50, 50, 3, 0);
        let lm = LandmarkSet::new();
        let (sub, _, _) = crop_raster(&img, &lm, &BBox::new(-10.0, 0.0, 20.0, 20.0)).unwrap();
        assert_eq!((sub.width(), sub.height()), (10, 20));
        assert!(crop_raster(&img, &lm, &BBox::new(100.0, 100.0, 5.0, 5.0)).is_err());
    }
}
