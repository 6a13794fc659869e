// temporary tuning probe; not part of the deliverable
// mirrors the acceptance end-to-end stack with extra diagnostics
use std::path::PathBuf;
use std::time::Instant;

use masksize::eval::evaluate_manifest;
use masksize::facegen::build_corpus;
use masksize::geom::{BBox, LandmarkRole};
use masksize::hogdet::{train_detector, DetectorClass, HogParams, PositiveSet, TrainOptions};
use masksize::ingest::{split, Manifest};
use masksize::nnet::{
    landmark_specs, train, CnnModel, TrainConfig, CNN_INPUT, COIN_FEATURE_MAPS, NOSE_FEATURE_MAPS,
};
use masksize::pipeline::{build_cnn_dataset, ground_truth_box, StageModels};
use masksize::rng::SeededRng;
use masksize::sizing::SizeChart;

fn main() {
    let t0 = Instant::now();
    let dir = PathBuf::from("/tmp/probe_corpus");
    let mdir = PathBuf::from("/tmp/probe_models");
    let arg = |i: usize, d: usize| std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let nose_epochs = arg(1, 120);
    let coin_epochs = arg(2, 150);
    let nose_take = arg(3, 90);
    let coin_take = arg(4, 160);

    let load = std::env::var("PROBE_LOAD").is_ok();
    if !load {
        let _ = std::fs::remove_dir_all(&dir);
    }
    let corpus = build_corpus(&dir, 230, 42).unwrap();
    eprintln!("[{:?}] corpus built: {} composites", t0.elapsed(), corpus.coin.len());
    let rng = SeededRng::new(7);

    let (train_coin, heldout) = split(&corpus.coin, 0.8, &rng.child("holdout")).unwrap();
    let keep: std::collections::BTreeSet<PathBuf> =
        train_coin.records.iter().map(|r| r.image_path.clone()).collect();
    let filter = |m: &Manifest| Manifest {
        id: m.id.clone(),
        role: m.role,
        records: m.records.iter().filter(|r| keep.contains(&r.image_path)).cloned().collect(),
    };
    let train_nose = filter(&corpus.nose);
    let train_anchors = filter(&corpus.anchors);
    let take = |m: &Manifest, n: usize| Manifest {
        id: m.id.clone(),
        role: m.role,
        records: m.records.iter().take(n).cloned().collect(),
    };

    let models = if load {
        StageModels {
            face: masksize::hogdet::load_detector(&mdir.join("face.hogd")).unwrap(),
            nose: masksize::hogdet::load_detector(&mdir.join("nose.hogd")).unwrap(),
            coin: masksize::hogdet::load_detector(&mdir.join("coin.hogd")).unwrap(),
            nose_cnn: masksize::nnet::io::load_weights(&mdir.join("nose.papw")).unwrap(),
            coin_cnn: masksize::nnet::io::load_weights(&mdir.join("coin.papw")).unwrap(),
            chart: SizeChart::default(),
        }
    } else {
        let mut detectors = Vec::new();
        for (class, manifest, params, role) in [
            (DetectorClass::Face, &train_anchors, HogParams::face(), LandmarkRole::Anchors),
            (DetectorClass::Nose, &train_nose, HogParams::nose(), LandmarkRole::Nose),
            (DetectorClass::Coin, &train_coin, HogParams::coin(), LandmarkRole::Coin),
        ] {
            let t = Instant::now();
            let sub = take(manifest, manifest.len());
            let boxes: Vec<Vec<BBox>> = sub
                .records
                .iter()
                .map(|r| {
                    vec![ground_truth_box(&r.landmarks, role, params.window_w, params.window_h)
                        .unwrap()]
                })
                .collect();
            let mut negs = corpus.negatives.clone();
            if class == DetectorClass::Coin {
                negs.extend(corpus.clean_faces.iter().cloned());
            }
            let positives = PositiveSet { manifest: &sub, boxes };
            let opts = TrainOptions { epochs: 60, ..Default::default() };
            let model = train_detector(
                &positives,
                &negs,
                class,
                params,
                &rng.child(&format!("det-{class:?}")),
                &opts,
            )
            .unwrap();
            eprintln!("[{:?}] {class:?} detector trained in {:?}", t0.elapsed(), t.elapsed());
            detectors.push(model);
        }

        let mut cnns = Vec::new();
        for (role, maps, manifest, epochs, take_n) in [
            (LandmarkRole::Nose, NOSE_FEATURE_MAPS, &train_nose, nose_epochs, nose_take),
            (LandmarkRole::Coin, COIN_FEATURE_MAPS, &train_coin, coin_epochs, coin_take),
        ] {
            let t = Instant::now();
            let params = match role {
                LandmarkRole::Nose => HogParams::nose(),
                _ => HogParams::coin(),
            };
            let sub = take(manifest, take_n);
            let (tr, va) = split(&sub, 0.85, &rng.child("cnn-split")).unwrap();
            let tr = masksize::ingest::repeat_records(&tr, 2);
            let mut jrng = rng.child("boxjitter");
            let train_boxes =
                masksize::pipeline::training_boxes(&tr, role, &params, 0.12, &mut jrng).unwrap();
            let val_boxes =
                masksize::pipeline::training_boxes(&va, role, &params, 0.12, &mut jrng).unwrap();
            let (train_set, stats) = build_cnn_dataset(&tr, &train_boxes, None).unwrap();
            let (val_set, _) = build_cnn_dataset(&va, &val_boxes, Some(stats)).unwrap();
            let cfg = TrainConfig {
                batch_size: 8,
                max_epochs: epochs,
                patience: 50,
                seed: 7,
                ..Default::default()
            };
            let model =
                CnnModel::init(CNN_INPUT, landmark_specs(maps), stats, &rng.child("init")).unwrap();
            let (trained, hist) = train(&model, &train_set, &val_set, &cfg).unwrap();
            eprintln!(
                "[{:?}] {role:?} cnn ({} items): {} epochs in {:?}, best {} val {:.6}",
                t0.elapsed(),
                tr.len(),
                hist.val_loss.len(),
                t.elapsed(),
                hist.best_epoch,
                hist.val_loss[hist.best_epoch],
            );
            cnns.push(trained);
        }

        let models = StageModels {
            face: detectors[0].clone(),
            nose: detectors[1].clone(),
            coin: detectors[2].clone(),
            nose_cnn: cnns[0].clone(),
            coin_cnn: cnns[1].clone(),
            chart: SizeChart::default(),
        };
        let _ = std::fs::create_dir_all(&mdir);
        masksize::hogdet::save_detector(&models.face, &mdir.join("face.hogd")).unwrap();
        masksize::hogdet::save_detector(&models.nose, &mdir.join("nose.hogd")).unwrap();
        masksize::hogdet::save_detector(&models.coin, &mdir.join("coin.hogd")).unwrap();
        masksize::nnet::io::save_weights(&models.nose_cnn, &mdir.join("nose.papw")).unwrap();
        masksize::nnet::io::save_weights(&models.coin_cnn, &mdir.join("coin.papw")).unwrap();
        models
    };

    let t = Instant::now();
    let (report, outcomes) = evaluate_manifest(&heldout, &models).unwrap();
    eprintln!("[{:?}] eval {} samples in {:?}", t0.elapsed(), heldout.len(), t.elapsed());
    println!("{}", report.render());
    println!("failures: {}", report.failures);
    for o in &outcomes {
        if let Some(f) = &o.failure {
            eprintln!("  FAIL {} actual {}: {}", o.image, o.actual, f);
        }
    }

    // attribution: index nose records by path
    let nose_by_path: std::collections::BTreeMap<&PathBuf, usize> = corpus
        .nose
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (&r.image_path, i))
        .collect();
    eprintln!("--- attribution (held-out split) ---");
    for (i, crec) in heldout.records.iter().enumerate() {
        let nrec = &corpus.nose.records[nose_by_path[&crec.image_path]];
        let img = crec.load_image().unwrap();
        let (ngl, ngr) = nrec.landmarks.width_pair(LandmarkRole::Nose).unwrap();
        let (cgl, cgr) = crec.landmarks.width_pair(LandmarkRole::Coin).unwrap();
        let gt_nose = ngl.distance(&ngr);
        let gt_coin = cgl.distance(&cgr);
        let res = masksize::pipeline::run_pipeline(&img, &models);
        let (pipe_nose, pipe_coin) = match &res {
            Ok(r) => (
                r.provenance.nose_points.0.distance(&r.provenance.nose_points.1),
                r.provenance.coin_points.0.distance(&r.provenance.coin_points.1),
            ),
            Err(_) => (f64::NAN, f64::NAN),
        };
        let np = HogParams::nose();
        let cp = HogParams::coin();
        let nbox =
            ground_truth_box(&nrec.landmarks, LandmarkRole::Nose, np.window_w, np.window_h)
                .unwrap();
        let cbox =
            ground_truth_box(&crec.landmarks, LandmarkRole::Coin, cp.window_w, cp.window_h)
                .unwrap();
        let (gl, gr, _) =
            masksize::pipeline::predict_landmarks_in_box(&img, &nbox, &models.nose_cnn).unwrap();
        let gtbox_nose = gl.distance(&gr);
        let (gl, gr, _) =
            masksize::pipeline::predict_landmarks_in_box(&img, &cbox, &models.coin_cnn).unwrap();
        let gtbox_coin = gl.distance(&gr);
        if let Ok(r) = &res {
            let pv = &r.provenance;
            eprintln!(
                "       boxes: face {:?} | nose det {:?} gt {:?} iou {:.2} | coin det {:?} gt {:?} iou {:.2}",
                pv.face_box, pv.nose_box, nbox, masksize::geom::bbox_iou(&pv.nose_box, &nbox),
                pv.coin_box, cbox, masksize::geom::bbox_iou(&pv.coin_box, &cbox)
            );
        }
        eprintln!(
            "  [{i:02}] nose gt {gt_nose:6.2} pipe {pipe_nose:6.2} gtbox {gtbox_nose:6.2} | coin gt {gt_coin:6.2} pipe {pipe_coin:6.2} gtbox {gtbox_coin:6.2} | width gt {:.1} pred {:?} {}",
            crec.width_mm.unwrap(),
            res.as_ref().ok().map(|r| (r.nose_width_mm * 10.0).round() / 10.0),
            res.as_ref().err().map(|e| e.to_string()).unwrap_or_default()
        );
    }
}
