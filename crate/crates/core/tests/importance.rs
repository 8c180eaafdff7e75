mod common;

use common::{identity_camera, small_spec, splat};
use gscomp::adp::{self, PruningPlan};
use gscomp::importance::{self, ImportanceConfig, ImportanceScores};
use gscomp::render::{self, Camera};
use gscomp::scenegen;
use gscomp::{metrics, GaussianModel};

fn model_of(rows: &[Vec<f32>]) -> GaussianModel {
    let mut m = GaussianModel::new();
    for r in rows {
        m.push_row(r, false);
    }
    m
}

#[test]
fn behind_every_camera_scores_zero() {
    let cam = identity_camera(32, 32, 30.0);
    let m = model_of(&[
        splat([0.0, 0.0, 2.0], 0.05, 0.8, [0.9, 0.2, 0.2]),
        splat([0.0, 0.0, -2.0], 0.05, 0.8, [0.9, 0.2, 0.2]),
    ]);
    let s = importance::compute_scores(&m, &[cam]).unwrap();
    assert!(s.scores[0] > 0.0);
    assert_eq!(s.scores[1], 0.0);
    assert_eq!(s.hits[1], 0);
}

#[test]
fn opacity_ratio_carries_into_scores() {
    // The projected variance is 0.3 + 0.02 px², which puts the 1/255 alpha
    // cutoff of both opacities between the same two pixel rings, so both
    // Gaussians touch the same 3×3 block.
    let f = 50.0;
    let z = 2.0f32;
    let s_world = (0.02f64).sqrt() * z as f64 / f;
    let cam = identity_camera(64, 64, f);
    let at = |px: f32| px * z / f as f32;
    let m = model_of(&[
        splat([at(-12.0), at(0.0), z], s_world as f32, 0.9, [0.5; 3]),
        splat([at(12.0), at(0.0), z], s_world as f32, 0.1, [0.5; 3]),
    ]);
    let stats = render::accumulate_stats(&m, &[cam]).unwrap();
    assert_eq!(stats.hits[0], stats.hits[1], "hit counts must match first");
    assert_eq!(stats.hits[0], 9);
    let s = importance::from_hits(&m, &stats, &ImportanceConfig::default()).unwrap();
    let ratio = s.scores[0] / s.scores[1];
    assert!((ratio - 9.0).abs() < 1e-5, "ratio {ratio}");
}

#[test]
fn fully_occluded_scores_zero() {
    let cam = identity_camera(48, 48, 40.0);
    // Three near-opaque screens leave transmittance ≈ 1e-6 < 1e-4.
    let mut rows: Vec<Vec<f32>> = (0..3)
        .map(|k| splat([0.0, 0.0, 1.0 + 0.01 * k as f32], 1.0, 0.99, [0.3, 0.6, 0.9]))
        .collect();
    rows.push(splat([0.0, 0.0, 3.0], 0.02, 0.9, [1.0, 1.0, 1.0]));
    let m = model_of(&rows);
    // Per-pixel oracle: transmittance left after the screens at the hidden
    // Gaussian's center pixel.
    let (img, _) = render::render(&m, &cam, false).unwrap();
    let alpha_front = 0.99f64;
    assert!((1.0 - alpha_front).powi(3) < 1e-4);
    let s = importance::compute_scores(&m, &[cam]).unwrap();
    assert_eq!(s.hits[3], 0);
    assert_eq!(s.scores[3], 0.0);
    assert!(img.pixel(24, 24)[0] > 0.0);
}

#[test]
fn duplicated_views_double_scores() {
    let scene = scenegen::generate(&small_spec(4, 800)).unwrap();
    let once = importance::compute_scores(&scene.model, &scene.cameras).unwrap();
    let twice_cams: Vec<Camera> = scene.cameras.iter().chain(&scene.cameras).cloned().collect();
    let twice = importance::compute_scores(&scene.model, &twice_cams).unwrap();
    for (a, b) in once.scores.iter().zip(&twice.scores) {
        assert_eq!(2.0 * a, *b);
    }
    assert_eq!(once.rank_descending, twice.rank_descending);
}

#[test]
fn equal_volumes_rank_by_hits_times_opacity() {
    let scene = scenegen::generate(&small_spec(5, 600)).unwrap();
    let mut m = scene.model.clone();
    for r in 0..m.len() {
        for c in gscomp::model::SCALE {
            m.set(r, c, (0.02f64).ln() as f32);
        }
    }
    let s = importance::compute_scores(&m, &scene.cameras).unwrap();
    let plain: Vec<f64> = (0..m.len()).map(|r| s.hits[r] as f64 * m.opacity(r) as f64).collect();
    assert_eq!(s.rank_descending, importance::rank_descending(&plain));
}

#[test]
fn scoring_is_deterministic() {
    let scene = scenegen::generate(&small_spec(6, 1500)).unwrap();
    let a = importance::compute_scores(&scene.model, &scene.cameras).unwrap();
    let b = importance::compute_scores(&scene.model, &scene.cameras).unwrap();
    assert_eq!(a, b);
}

#[test]
fn injected_low_rows_rank_last() {
    let scene = scenegen::generate(&small_spec(7, 4000)).unwrap();
    let s = importance::compute_scores(&scene.model, &scene.cameras).unwrap();
    let n_low = scene.low_importance.iter().filter(|&&l| l).count();
    let bottom = &s.rank_descending[s.len() - n_low..];
    let overlap = bottom.iter().filter(|&&r| scene.low_importance[r]).count();
    assert!(overlap as f64 >= 0.95 * n_low as f64, "{overlap} of {n_low}");
}

#[test]
fn score_exports() {
    let s = ImportanceScores::from_scores(vec![0.5, 2.0, 0.0]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("s.bin");
    let csv = dir.path().join("s.csv");
    s.write_binary(&bin).unwrap();
    s.write_csv(&csv).unwrap();
    let bytes = std::fs::read(&bin).unwrap();
    assert_eq!(bytes.len(), 12);
    assert_eq!(f32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2.0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(2).unwrap().ends_with(",0"));
}

#[test]
fn pruned_size_is_monotone() {
    for n in [1usize, 7, 10, 333, 1000] {
        let mut prev = u64::MAX;
        for b in 0..=10 {
            let c = PruningPlan::new(0.0, b as f64 / 10.0).unwrap().counts(n);
            let size = adp::pruned_byte_size(c);
            assert!(size <= prev);
            prev = size;
        }
        // Growing the masked band at fixed beta.
        let mut prev = u64::MAX;
        for a in (0..=10).rev() {
            let c = PruningPlan::new(a as f64 / 10.0 * 0.8, 0.2).unwrap().counts(n);
            let size = adp::pruned_byte_size(c);
            assert!(size <= prev);
            prev = size;
        }
    }
}

#[test]
fn pruning_twice_with_trivial_ranking_is_stable() {
    let scene = scenegen::generate(&small_spec(8, 1000)).unwrap();
    let s = importance::compute_scores(&scene.model, &scene.cameras).unwrap();
    let plan = PruningPlan::new(0.35, 0.25).unwrap();
    let once = adp::apply_pruning(&scene.model, &s, &plan).unwrap();
    let counts = plan.counts(scene.model.len());
    // On the pruned model the same split is alpha' = full / N', beta' = 0.
    let again_plan = PruningPlan::new(counts.full as f64 / once.len() as f64, 0.0).unwrap();
    let twice = adp::apply_pruning(&once, &ImportanceScores::trivial(once.len()), &again_plan).unwrap();
    assert_eq!(once, twice);
}

#[test]
fn no_plan_beats_identity() {
    let scene = scenegen::generate(&small_spec(9, 1500)).unwrap();
    let s = importance::compute_scores(&scene.model, &scene.cameras).unwrap();
    let base = render::render_views(&scene.model, &scene.cameras).unwrap();
    let psnr = |p: PruningPlan| {
        let m = adp::apply_pruning(&scene.model, &s, &p).unwrap();
        metrics::quality_against(&base, &m, &scene.cameras, metrics::REFERENCE_PSNR_DB)
            .unwrap()
            .psnr
    };
    let id = psnr(PruningPlan::IDENTITY);
    for p in adp::CandidateGrid::default().points() {
        assert!(id >= psnr(p.plan()));
    }
}
