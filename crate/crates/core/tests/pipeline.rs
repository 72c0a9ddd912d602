use ish_core::eval::{Experiment, Metric};
use ish_core::harris::detect_adaptive;
use ish_core::hashfile::{HashRecord, FORMAT_VERSION};
use ish_core::synth::{self, Scene};
use ish_core::transform::{apply, TransformSpec, VariantMode};
use ish_core::{analyze, compute_ish, distance_sp, Error, GrayImage, HashParams, Point};

fn square(size: usize, lo: usize, hi: usize) -> GrayImage {
    GrayImage::from_fn(size, size, |x, y| {
        if (lo..hi).contains(&x) && (lo..hi).contains(&y) {
            0.9
        } else {
            0.1
        }
    })
}

fn best_pairing(a: &[Point], b: &[Point]) -> f64 {
    fn go(a: &[Point], b: &[Point], used: &mut Vec<bool>, i: usize, worst: f64, best: &mut f64) {
        if i == a.len() {
            *best = best.min(worst);
            return;
        }
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                go(a, b, used, i + 1, worst.max(a[i].dist(&b[j])), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
    best
}

#[test]
fn doubling_a_square_doubles_scale_and_diameter() {
    let params = HashParams::default();
    let small = detect_adaptive(&square(200, 40, 160), &params).unwrap();
    let large = detect_adaptive(&square(400, 80, 320), &params).unwrap();
    assert_eq!((small.len(), large.len()), (4, 4));
    let ratio = |a: f64, b: f64| (b / a - 2.0).abs() / 2.0;
    assert!(ratio(small.sigma_star, large.sigma_star) < 0.05);
    assert!(ratio(small.diameter, large.diameter) < 0.05);

    let centre = |set: &ish_core::CornerSet, c: f64| -> Vec<Point> {
        set.points()
            .iter()
            .map(|p| Point::new((p.x - c) / set.diameter, (p.y - c) / set.diameter))
            .collect()
    };
    let worst = best_pairing(&centre(&small, 99.5), &centre(&large, 199.5));
    assert!(worst < 0.05, "normalised points differ by {worst}");
}

#[test]
fn hashing_is_deterministic() {
    let img = Scene::random(4, 160).render();
    let params = HashParams::default();
    let a = analyze(&img, &params).unwrap();
    let b = analyze(&img, &params).unwrap();
    assert_eq!(a.spectral, b.spectral);
    let bytes = ish_core::image::encode_pgm(&img, 255);
    assert_eq!(
        HashRecord::new(a.spectral, a.ordered, &bytes).to_binary(),
        HashRecord::new(b.spectral, b.ordered, &bytes).to_binary()
    );
}

#[test]
fn quarter_turn_barely_moves_the_hash() {
    let params = HashParams::default();
    for seed in 0..4 {
        let img = Scene::random(seed, 160).render();
        let h = compute_ish(&img, &params).unwrap();
        let r = compute_ish(&img.rot90(), &params).unwrap();
        assert_eq!(h.n_c(), r.n_c());
        let scale = h.magnitudes.iter().map(|m| m * m).sum::<f64>().sqrt();
        match distance_sp(&h, &r, params.k) {
            Ok(d) => assert!(d < 0.05 * scale, "seed {seed}: {d} vs {scale}"),
            Err(Error::UndefinedDistance(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn transformed_quarter_turn_equals_grid_rotation() {
    let img = Scene::random(9, 96).render();
    let turned = apply(&img, &TransformSpec::rotation(std::f64::consts::FRAC_PI_2)).unwrap();
    assert_eq!(turned, img.rot90());
}

#[test]
fn analysis_fields_agree() {
    let img = Scene::random(2, 160).render();
    let a = analyze(&img, &HashParams::default()).unwrap();
    let n = a.corners.len();
    assert_eq!(a.graph.len(), n);
    assert_eq!(a.saliency.len(), n);
    assert_eq!(a.spectral.n_c(), n);
    assert_eq!(a.ordered.n_c(), n);
    assert_eq!(a.spectral.sigma_star, a.corners.sigma_star);
    assert_eq!(a.spectral.diameter, a.graph.diameter);
    let energy: f64 = a.saliency.iter().map(|v| v * v).sum();
    let spectral: f64 = a.spectral.magnitudes.iter().map(|v| v * v).sum();
    assert!((energy - spectral).abs() <= 1e-9 * energy.max(1e-300));
}

#[test]
fn hash_files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let img = Scene::random(1, 128).render();
    let path = dir.path().join("scene.pgm");
    ish_core::image::save_pgm(&img, &path, 255).unwrap();
    let loaded = ish_core::image::load_image(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let a = analyze(&loaded, &HashParams::default()).unwrap();
    let record = HashRecord::new(a.spectral, a.ordered, &bytes);
    for encoded in [record.to_text().into_bytes(), record.to_binary()] {
        let back = HashRecord::parse(&encoded).unwrap();
        assert_eq!(back, record);
    }
    assert!(record
        .to_text()
        .contains(&format!("format_version={FORMAT_VERSION}")));
}

#[test]
fn small_experiment_is_reproducible() {
    let images = synth::corpus(4, 128, 3);
    let names: Vec<String> = (0..4).map(|i| format!("img{i}")).collect();
    let ex = Experiment::run(
        &images,
        &names,
        2,
        VariantMode::Rotations,
        1,
        &HashParams::default(),
    )
    .unwrap();
    assert_eq!(ex.pairs.positives(), 8);
    let report = ex.roc(Metric::Ord, None).unwrap();
    assert!((0.0..=1.0).contains(&report.auc));
    let again = Experiment::run(
        &images,
        &names,
        2,
        VariantMode::Rotations,
        1,
        &HashParams::default(),
    )
    .unwrap();
    assert_eq!(again.roc(Metric::Ord, None).unwrap().auc, report.auc);
}
