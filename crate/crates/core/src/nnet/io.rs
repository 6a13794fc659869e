//! Weight file format: magic `PAPW`, version, layer spec table,
//! normalization stats, little-endian f64 parameters, trailing CRC32.
//! Round trips are bit-exact so transfer learning resumes from the same
//! numbers it saved.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{CnnModel, ItemShape, LayerParams, LayerSpec, NormStats};

const MAGIC: &[u8; 4] = b"PAPW";
const VERSION: u32 = 1;

pub fn save_weights(model: &CnnModel, path: &Path) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let s = model.input_shape();
    for v in [s.c, s.h, s.w] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(model.specs().len() as u32).to_le_bytes());
    for spec in model.specs() {
        let (tag, arg): (u8, u32) = match *spec {
            LayerSpec::Conv { out_maps } => (0, out_maps as u32),
            LayerSpec::MaxPool => (1, 0),
            LayerSpec::Dense { units } => (2, units as u32),
            LayerSpec::DenseLinear { units } => (3, units as u32),
        };
        buf.push(tag);
        buf.extend_from_slice(&arg.to_le_bytes());
    }
    let st = model.stats;
    for v in [st.pixel_divisor, st.pixel_mean, st.coord_divisor, st.coord_mean] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for layer in model.layers() {
        for v in layer.weights.iter().chain(&layer.bias) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());

    std::fs::write(path, &buf).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_weights(path: &Path) -> Result<CnnModel> {
    let bad = |message: &str| Error::ModelFormat {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    let buf = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if buf.len() < 8 {
        return Err(bad("file truncated before header"));
    }
    let (body, crc_bytes) = buf.split_at(buf.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    if crc32(body) != stored {
        return Err(bad("CRC mismatch (file corrupt or truncated)"));
    }

    let mut cur = std::io::Cursor::new(body);
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).map_err(|_| bad("file truncated"))?;
    if &magic != MAGIC {
        return Err(bad("bad magic, not a PAPW weight file"));
    }
    let version = read_u32(&mut cur).map_err(|_| bad("file truncated"))?;
    if version != VERSION {
        return Err(Error::ModelFormat {
            path: path.to_path_buf(),
            message: format!("unsupported version {version}"),
        });
    }
    let c = read_u32(&mut cur).map_err(|_| bad("file truncated"))? as usize;
    let h = read_u32(&mut cur).map_err(|_| bad("file truncated"))? as usize;
    let w = read_u32(&mut cur).map_err(|_| bad("file truncated"))? as usize;
    let input_shape = ItemShape { c, h, w };
    let n_layers = read_u32(&mut cur).map_err(|_| bad("file truncated"))? as usize;

    let mut specs = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let mut tag = [0u8; 1];
        cur.read_exact(&mut tag).map_err(|_| bad("file truncated"))?;
        let arg = read_u32(&mut cur).map_err(|_| bad("file truncated"))? as usize;
        specs.push(match tag[0] {
            0 => LayerSpec::Conv { out_maps: arg },
            1 => LayerSpec::MaxPool,
            2 => LayerSpec::Dense { units: arg },
            3 => LayerSpec::DenseLinear { units: arg },
            t => {
                return Err(Error::ModelFormat {
                    path: path.to_path_buf(),
                    message: format!("unknown layer tag {t}"),
                })
            }
        });
    }

    let stats = NormStats {
        pixel_divisor: read_f64(&mut cur).map_err(|_| bad("file truncated"))?,
        pixel_mean: read_f64(&mut cur).map_err(|_| bad("file truncated"))?,
        coord_divisor: read_f64(&mut cur).map_err(|_| bad("file truncated"))?,
        coord_mean: read_f64(&mut cur).map_err(|_| bad("file truncated"))?,
    };

    let mut shape = input_shape;
    let mut layers = Vec::with_capacity(n_layers);
    for spec in &specs {
        let (nw, nb) = spec.param_counts(shape);
        let mut params = LayerParams {
            weights: Vec::with_capacity(nw),
            bias: Vec::with_capacity(nb),
        };
        for _ in 0..nw {
            params.weights.push(read_f64(&mut cur).map_err(|_| bad("file truncated in weights"))?);
        }
        for _ in 0..nb {
            params.bias.push(read_f64(&mut cur).map_err(|_| bad("file truncated in biases"))?);
        }
        shape = spec.output_shape(shape).map_err(|e| Error::ModelFormat {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        layers.push(params);
    }
    if cur.position() as usize != body.len() {
        return Err(bad("trailing bytes after parameters"));
    }

    CnnModel::from_parts(input_shape, specs, layers, stats)
}

/// Load `path` and verify its layer stack matches `expected` (used when the
/// transfer phase must resume a specific architecture).
pub fn load_weights_expecting(path: &Path, expected: &[LayerSpec]) -> Result<CnnModel> {
    let model = load_weights(path)?;
    if model.specs() != expected {
        return Err(Error::ShapeMismatch(format!(
            "weight file {} holds {:?}, expected {:?}",
            path.display(),
            model.specs(),
            expected
        )));
    }
    Ok(model)
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// CRC-32 (IEEE 802.3), table-driven.
pub fn crc32(data: &[u8]) -> u32 {
    static TABLE: std::sync::OnceLock<[u32; 256]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = [0u32; 256];
        for (i, e) in t.iter_mut().enumerate() {
            let mut c = i as u32;
            for _ in 0..8 {
                c = if c & 1 != 0 { 0xEDB88320 ^ (c >> 1) } else { c >> 1 };
            }
            *e = c;
        }
        t
    });
    let mut crc = 0xFFFFFFFFu32;
    for &b in data {
        crc = table[((crc ^ b as u32) & 0xFF) as usize] ^ (crc >> 8);
    }
    !crc
}

// binary writer kept symmetric with the reader above
#[allow(dead_code)]
fn write_all(w: &mut impl Write, bytes: &[u8]) -> std::io::Result<()> {
    w.write_all(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{landmark_specs, Tensor, COIN_FEATURE_MAPS, CNN_INPUT, NOSE_FEATURE_MAPS};
    use crate::rng::SeededRng;

    #[test]
    fn crc32_known_vector() {
        assert_eq!(crc32(b"123456789"), 0xCBF43926);
    }

    fn small_model(seed: u64) -> CnnModel {
        CnnModel::init(
            ItemShape { c: 1, h: 6, w: 6 },
            vec![
                LayerSpec::Conv { out_maps: 2 },
                LayerSpec::MaxPool,
                LayerSpec::Dense { units: 5 },
                LayerSpec::DenseLinear { units: 4 },
            ],
            NormStats {
                pixel_mean: 0.42,
                coord_mean: -0.1,
                ..NormStats::default()
            },
            &SeededRng::new(seed),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.papw");
        let model = small_model(1);
        save_weights(&model, &path).unwrap();
        let loaded = load_weights(&path).unwrap();
        assert_eq!(model, loaded);

        let mut rng = SeededRng::new(2);
        let batch = Tensor::from_vec(
            &[1, 1, 6, 6],
            (0..36).map(|_| rng.gen_range_f64(-1.0, 1.0)).collect(),
        )
        .unwrap();
        let a = model.forward(&batch).unwrap();
        let b = loaded.forward(&batch).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn truncated_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.papw");
        save_weights(&small_model(3), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_weights(&path), Err(Error::ModelFormat { .. })));
    }

    #[test]
    fn nose_weights_do_not_load_into_coin_spec() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nose.papw");
        let nose = CnnModel::init(
            CNN_INPUT,
            landmark_specs(NOSE_FEATURE_MAPS),
            NormStats::default(),
            &SeededRng::new(4),
        )
        .unwrap();
        save_weights(&nose, &path).unwrap();
        let err = load_weights_expecting(&path, &landmark_specs(COIN_FEATURE_MAPS)).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));
    }
}
