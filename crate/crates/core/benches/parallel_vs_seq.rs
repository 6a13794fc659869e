//! Rayon-parallel vs sequential comparison for the two hot paths: pyramid
//! sliding-window detection and batched CNN forward passes. The parallel
//! variants are the default; `--no-default-features` removes rayon and makes
//! `detect`/`forward` fall back to the same sequential code measured here.

use criterion::{criterion_group, criterion_main, Criterion};

use masksize::facegen::{schematic_face, FaceParams};
use masksize::hogdet::{detect, detect_seq, train_detector, DetectorClass, HogParams, PositiveSet, TrainOptions};
use masksize::ingest::{Manifest, SampleRecord, SourceTag};
use masksize::nnet::{landmark_specs, CnnModel, NormStats, Tensor, CNN_INPUT, NOSE_FEATURE_MAPS};
use masksize::pipeline::ground_truth_box;
use masksize::rng::SeededRng;
use masksize::{LandmarkRole, Raster};

fn test_face() -> (Raster, masksize::geom::LandmarkSet) {
    let p = FaceParams { eye_px: 63.0, nose_mm: 40.0, cx: 110.0, cy: 150.0 };
    let s = schematic_face(&p, 3);
    (s.image, s.anchors)
}

fn quick_detector() -> masksize::hogdet::DetectorModel {
    let dir = tempfile::tempdir().unwrap();
    let (image, anchors) = test_face();
    let path = dir.path().join("f.png");
    image.save_png(&path).unwrap();
    let manifest = Manifest {
        id: "bench".into(),
        role: LandmarkRole::Anchors,
        records: vec![SampleRecord {
            image_path: path,
            landmarks: anchors.clone(),
            width_mm: None,
            size: None,
            source: SourceTag::PublicFaces,
        }],
    };
    let params = HogParams::face();
    let b = ground_truth_box(&anchors, LandmarkRole::Anchors, params.window_w, params.window_h).unwrap();
    let positives = PositiveSet { manifest: &manifest, boxes: vec![vec![b]] };
    let negatives = vec![Raster::filled(220, 264, 3, 70)];
    let rng = SeededRng::new(5);
    let opts = TrainOptions { epochs: 5, mining_rounds: 0, ..Default::default() };
    train_detector(&positives, &negatives, DetectorClass::Face, params, &rng, &opts).unwrap()
}

fn bench_detect(c: &mut Criterion) {
    let model = quick_detector();
    let (image, _) = test_face();
    let mut g = c.benchmark_group("detect_pyramid");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| detect(&image, &model)));
    g.bench_function("sequential", |b| b.iter(|| detect_seq(&image, &model)));
    g.finish();
}

fn bench_forward(c: &mut Criterion) {
    let rng = SeededRng::new(11);
    let model = CnnModel::init(
        CNN_INPUT,
        landmark_specs(NOSE_FEATURE_MAPS),
        NormStats::default(),
        &rng,
    )
    .unwrap();
    let n = 16;
    let mut r = rng.child("data");
    let data: Vec<f64> = (0..n * CNN_INPUT.len()).map(|_| r.gen_range_f64(-0.5, 0.5)).collect();
    let batch = Tensor::from_vec(&[n, 3, 42, 42], data).unwrap();
    let mut g = c.benchmark_group("cnn_forward_batch16");
    g.sample_size(10);
    g.bench_function("parallel", |b| b.iter(|| model.forward(&batch).unwrap()));
    g.bench_function("sequential", |b| b.iter(|| model.forward_seq(&batch).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_detect, bench_forward);
criterion_main!(benches);
