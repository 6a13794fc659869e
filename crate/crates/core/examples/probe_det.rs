// temporary detector diagnostics; not part of the deliverable
use masksize::facegen::build_corpus;
use masksize::geom::{bbox_iou, LandmarkRole};
use masksize::hogdet::{detect, train_detector, DetectorClass, HogParams, PositiveSet, TrainOptions};
use masksize::pipeline::ground_truth_box;
use masksize::rng::SeededRng;

fn main() {
    let dir = std::path::PathBuf::from("/tmp/probe_det");
    let _ = std::fs::remove_dir_all(&dir);
    let corpus = build_corpus(&dir, 40, 42).unwrap();
    let rng = SeededRng::new(7);

    for (class, manifest, params, role) in [
        (DetectorClass::Face, &corpus.anchors, HogParams::face(), LandmarkRole::Anchors),
        (DetectorClass::Nose, &corpus.nose, HogParams::nose(), LandmarkRole::Nose),
        (DetectorClass::Coin, &corpus.coin, HogParams::coin(), LandmarkRole::Coin),
    ] {
        let boxes: Vec<Vec<_>> = manifest
            .records
            .iter()
            .map(|r| vec![ground_truth_box(&r.landmarks, role, params.window_w, params.window_h).unwrap()])
            .collect();
        let gt0 = boxes[0][0];
        let pos = PositiveSet { manifest, boxes };
        let opts = TrainOptions { epochs: 60, ..Default::default() };
        let model =
            train_detector(&pos, &corpus.negatives, class, params, &rng.child("d"), &opts).unwrap();
        eprintln!("=== {class:?} window {}x{} gt0 {:.0}x{:.0}", params.window_w, params.window_h, gt0.w, gt0.h);
        for idx in [0usize, 1, 2] {
            let img = manifest.records[idx].load_image().unwrap();
            let dets = detect(&img, &model);
            let gt = ground_truth_box(&manifest.records[idx].landmarks, role, params.window_w, params.window_h).unwrap();
            eprintln!(
                "img {idx}: {} detections{}",
                dets.len(),
                if dets.is_empty() { " (none)".to_string() } else {
                    let d = &dets[0];
                    format!(", best score {:.3} box {:.0},{:.0},{:.0}x{:.0} iou {:.2}", d.score, d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h, bbox_iou(&d.bbox, &gt))
                }
            );
        }
    }
}
