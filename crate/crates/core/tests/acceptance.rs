//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails. Criterion 9 needs a real pretrained
//! scene and runs only when `GSCOMP_TRUCK_PLY` and `GSCOMP_TRUCK_CAMERAS` are
//! set.

mod common;

use std::time::{Duration, Instant};

use common::{identity_camera, splat};
use gscomp::adp::{self, CandidateGrid};
use gscomp::fgc;
use gscomp::foa::{self, CompressOptions, Constraint, Evaluation};
use gscomp::importance;
use gscomp::metrics::{self, REFERENCE_PSNR_DB};
use gscomp::model::{ROW_WIDTH, SH_ADV};
use gscomp::mpq::{self, ProbeGranularity, QuantizationPlan};
use gscomp::render::{self, Camera, ImageBuffer, RenderOptions};
use gscomp::scenegen::{self, SceneRng, SceneSpec};
use gscomp::sh::C0;
use gscomp::{ply, GaussianModel};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

/// Fixture used by the criteria that name "the default fixture".
fn default_scene() -> scenegen::Scene {
    scenegen::generate(&SceneSpec::default()).expect("default fixture")
}

/// Smaller seeded fixtures for the multi-scene criteria.
fn seeded_spec(seed: u64) -> SceneSpec {
    SceneSpec {
        seed,
        n_gaussians: 50_000,
        n_cameras: 16,
        ..SceneSpec::default()
    }
}

fn c1_quantization_bound() -> Outcome {
    let mut rng = SceneRng::new(101);
    let mut violations = 0usize;
    let mut elements = 0usize;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let len = (10f64.powf(rng.range(0.0, 5.0)).round() as usize).clamp(1, 100_000);
        let bits = if rng.uniform() < 0.5 { 4 } else { 8 };
        let groups = 1 + (rng.uniform() * 1000.0) as u32;
        // Regions whose magnitudes differ by up to 200×.
        let regions = 1 + (rng.uniform() * 8.0) as usize;
        let mut v = Vec::with_capacity(len);
        for r in 0..regions {
            let n = len * (r + 1) / regions - len * r / regions;
            let mag = if rng.uniform() < 0.5 { 1.0 } else { 200.0 };
            let center = rng.range(-5.0, 5.0) * mag;
            for _ in 0..n {
                v.push((center + rng.normal() * mag) as f32);
            }
        }
        let q = mpq::quantize_channel(&v, bits, groups).unwrap();
        let d = mpq::dequantize_channel(&q).unwrap();
        for (i, (x, y)) in v.iter().zip(&d).enumerate() {
            let r = q.ranges[i / q.group_size];
            // Half a step, plus the f32 representation error of the decoded
            // value.
            let bound = r.step(bits) / 2.0 + 2.0 * f32::EPSILON as f64 * (r.min.abs().max(r.max.abs()) as f64);
            let err = (*x as f64 - *y as f64).abs();
            if err > bound {
                violations += 1;
            }
            if r.step(bits) > 0.0 {
                worst = worst.max(err / r.step(bits));
            }
        }
        elements += v.len();
    }
    check(
        violations == 0,
        format!("{violations} violations over {elements} elements, worst error {worst:.4} steps"),
    )
}

fn c2_grouped_benefit() -> Outcome {
    let scene = default_scene();
    let (m, cams) = (&scene.model, &scene.cameras[..32.min(scene.cameras.len())]);
    let base = render::render_views(m, cams).unwrap();
    let run = |groups: u32| {
        let plan = QuantizationPlan::default().with_group_count(groups);
        let (_, decoded) = mpq::apply_quantization(m, &plan).unwrap();
        let q = metrics::quality_against(&base, &decoded, cams, REFERENCE_PSNR_DB).unwrap();
        (q.psnr, mpq::reconstruction_sse(m, &decoded))
    };
    let (p1, e1) = run(1);
    let (p1000, e1000) = run(1000);
    check(
        p1000 - p1 >= 0.1 && e1000 < e1,
        format!("PSNR 1 group {p1:.3} dB, 1000 groups {p1000:.3} dB (+{:.3}); SSE {e1:.4e} -> {e1000:.4e}", p1000 - p1),
    )
}

fn c3_sensitivity_order() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for seed in [1, 2, 3] {
        let scene = scenegen::generate(&seeded_spec(seed)).unwrap();
        let base = render::render_views(&scene.model, &scene.cameras).unwrap();
        let gaps =
            mpq::probe_channel_sensitivity(&scene.model, &scene.cameras, &base, 1000, ProbeGranularity::Groups).unwrap();
        let pos = gaps.gap("Position").unwrap();
        let sh = gaps.gap("SHAdv").unwrap();
        ok &= pos > sh;
        parts.push(format!("seed {seed}: Position {pos:.3} dB vs SHAdv {sh:.3} dB"));
    }
    check(ok, parts.join("; "))
}

fn c4_adp_dominance() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for seed in [1, 2, 3] {
        let scene = scenegen::generate(&seeded_spec(seed)).unwrap();
        let (m, cams) = (&scene.model, &scene.cameras);
        let scores = importance::compute_scores(m, cams).unwrap();
        let base = render::render_views(m, cams).unwrap();
        let psnr = |pruned: &GaussianModel| {
            metrics::quality_against(&base, pruned, cams, REFERENCE_PSNR_DB).unwrap().psnr
        };
        let row_p = adp::row_prune_only(m, &scores, 0.5).unwrap();
        let (row_size, row_psnr) = (row_p.byte_size(), psnr(&row_p));
        let mut best: Option<(f64, u64, adp::GridPoint)> = None;
        for point in CandidateGrid::default().points() {
            let pruned = adp::apply_pruning(m, &scores, &point.plan()).unwrap();
            if pruned.byte_size() > row_size {
                continue;
            }
            let p = psnr(&pruned);
            if best.is_none_or(|b| p > b.0) {
                best = Some((p, pruned.byte_size(), point));
            }
        }
        let (bp, bs, bpt) = best.unwrap();
        ok &= bp >= row_psnr + 0.1;
        parts.push(format!(
            "seed {seed}: Row-P {row_psnr:.2} dB / {row_size} B, ADP ({}, {}) {bp:.2} dB / {bs} B",
            bpt.row_prune, bpt.sh_fraction
        ));
    }
    check(ok, parts.join("; "))
}

fn c5_foa() -> Outcome {
    // Scripted evaluator: every boundary position on a 33-long path.
    let len = 33;
    let mut scripted_ok = true;
    let mut max_evals = 0;
    for boundary in -1i64..len as i64 {
        let out = foa::search(len, &Constraint::MaxPsnrDropDb(1.0), 1 << 30, |i| {
            Ok(Evaluation {
                psnr_drop_db: if (i as i64) <= boundary { 0.5 } else { 1.5 } + i as f64 * 1e-3,
                psnr: 40.0,
                ssim: 1.0,
                estimated_bytes: 10_000 - i as u64,
            })
        })
        .unwrap();
        let expected_feasible = boundary >= 0;
        scripted_ok &= out.feasible == expected_feasible;
        if expected_feasible {
            scripted_ok &= out.chosen as i64 == boundary;
        }
        max_evals = max_evals.max(out.trace.evaluations());
    }
    scripted_ok &= max_evals <= 17;

    let scene = default_scene();
    let res = foa::compress(
        &scene.model,
        &scene.cameras,
        &Constraint::MaxPsnrDropDb(1.0),
        &CompressOptions::default(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.fgc");
    std::fs::write(&path, &res.bytes).unwrap();
    let decoded = fgc::load_fgc(&path).unwrap().model.dequantize().unwrap();
    let cams = &scene.cameras[..32.min(scene.cameras.len())];
    let base = render::render_views(&scene.model, cams).unwrap();
    let post = metrics::quality_against(&base, &decoded, cams, REFERENCE_PSNR_DB).unwrap();
    let diff = (post.psnr_drop_db - res.quality.psnr_drop_db).abs();
    let ok = scripted_ok && res.feasible && post.psnr_drop_db < 1.0 && diff <= 1e-6 && res.ratio >= 8.0;
    check(
        ok,
        format!(
            "scripted: max {max_evals} evaluations, boundaries {}; pipeline: drop {:.4} dB (report diff {diff:.1e}), ratio {:.2}x, {} evaluations",
            if scripted_ok { "all found" } else { "MISSED" },
            post.psnr_drop_db,
            res.ratio,
            res.trace.evaluations()
        ),
    )
}

fn random_model(rng: &mut SceneRng) -> GaussianModel {
    let n = match (rng.uniform() * 4.0) as u32 {
        0 => (rng.uniform() * 5.0) as usize,
        1 => (rng.uniform() * 200.0) as usize,
        _ => (rng.uniform() * 3000.0) as usize,
    };
    let mut m = GaussianModel::with_capacity(n);
    let mask_p = rng.uniform();
    let mut row = [0.0f32; ROW_WIDTH];
    for _ in 0..n {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (rng.normal() * (1.0 + c as f64)) as f32;
        }
        m.push_row(&row, rng.uniform() < mask_p);
    }
    m
}

fn random_plan(rng: &mut SceneRng) -> QuantizationPlan {
    let mut plan = QuantizationPlan::uniform(8, 1 + (rng.uniform() * 1200.0) as u32);
    for b in &mut plan.bitwidths {
        if rng.uniform() < 0.5 {
            *b = 4;
        }
    }
    plan
}

fn c6_round_trip() -> Outcome {
    let mut rng = SceneRng::new(606);
    let mut mismatches = 0;
    for _ in 0..200 {
        let m = random_model(&mut rng);
        let plan = random_plan(&mut rng);
        let beta = rng.uniform() * 0.5;
        let pruning = adp::PruningPlan::new(rng.uniform() * (1.0 - beta), beta).unwrap();
        let (q, decoded) = mpq::apply_quantization(&m, &plan).unwrap();
        let bytes = fgc::write_fgc(&q, &pruning).unwrap();
        let file = fgc::read_fgc(&bytes).unwrap();
        let back = file.model.dequantize().unwrap();
        let bit_equal = back.len() == decoded.len()
            && back.sh_mask() == decoded.sh_mask()
            && back.data().iter().zip(decoded.data()).all(|(a, b)| a.to_bits() == b.to_bits());
        if !bit_equal || bytes.len() as u64 != fgc::estimate_compressed_size(&q) || file.pruning != pruning {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("{mismatches} of 200 pairs differ"))
}

fn random_render_scene(seed: u64) -> (GaussianModel, Camera) {
    let spec = SceneSpec {
        seed,
        n_gaussians: 1500,
        n_cameras: 3,
        image_width: 61,
        image_height: 47,
        scale_range: [0.01, 0.08],
        low_importance_fraction: 0.0,
        ..SceneSpec::default()
    };
    let scene = scenegen::generate(&spec).unwrap();
    let mut m = scene.model;
    // Exact duplicates exercise the tie break.
    for r in 0..20 {
        let row = m.row(r * 7).to_vec();
        m.push_row(&row, false);
    }
    (m, scene.cameras[(seed % 3) as usize].clone())
}

fn same_pixels(a: &ImageBuffer, b: &ImageBuffer) -> bool {
    a.width == b.width && a.height == b.height && a.rgb.iter().zip(&b.rgb).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn c7_renderer() -> Outcome {
    // Single splat centered on a pixel: color · opacity.
    let cam = identity_camera(33, 33, 40.0);
    let color = [0.8f32, 0.35, 0.1];
    let opacity = 0.6f32;
    let mut m = GaussianModel::new();
    m.push_row(&splat([0.0, 0.0, 2.0], 0.05, opacity, color), false);
    let (img, _) = render::render(&m, &cam, false).unwrap();
    let px = img.pixel(16, 16);
    let dc = (color[0] - 0.5) / C0;
    let expected_r = (0.5 + C0 * dc) * opacity;
    let single_err = (0..3)
        .map(|c| {
            let dc = (color[c] - 0.5) / C0;
            ((0.5 + C0 * dc) * opacity - px[c]).abs()
        })
        .fold(0.0f32, f32::max);
    let single_ok = single_err <= 1e-6 && (px[0] - expected_r).abs() <= 1e-6;

    let mut perm_ok = true;
    let mut mask_ok = true;
    let mut tile_ok = true;
    for seed in 0..10u64 {
        let (m, cam) = random_render_scene(seed);
        let (reference, _) = render::render(&m, &cam, false).unwrap();

        let mut rng = SceneRng::new(seed + 1000);
        let mut order: Vec<usize> = (0..m.len()).collect();
        for i in (1..order.len()).rev() {
            let j = (rng.uniform() * (i + 1) as f64) as usize;
            order.swap(i, j);
        }
        let (permuted, _) = render::render(&m.select_rows(&order), &cam, false).unwrap();
        perm_ok &= same_pixels(&reference, &permuted);

        let mut masked = m.clone();
        let mut zeroed = m.clone();
        for r in (0..m.len()).step_by(3) {
            masked.set_sh_mask(r, true);
            for c in SH_ADV {
                zeroed.set(r, c, 0.0);
            }
        }
        let (a, _) = render::render(&masked, &cam, false).unwrap();
        let (b, _) = render::render(&zeroed, &cam, false).unwrap();
        mask_ok &= same_pixels(&a, &b);

        for ts in [1, 5, 8, 13, 64] {
            let (t, _) = render::render_with(&m, &cam, false, &RenderOptions { tile_size: ts }).unwrap();
            tile_ok &= same_pixels(&reference, &t);
        }
    }
    check(
        single_ok && perm_ok && mask_ok && tile_ok,
        format!(
            "single-splat error {single_err:.1e}; permutation {}; masked SH {}; tiles {}",
            if perm_ok { "exact" } else { "DIFFERS" },
            if mask_ok { "exact" } else { "DIFFERS" },
            if tile_ok { "exact" } else { "DIFFERS" }
        ),
    )
}

fn naive_psnr(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    let mut sum = 0.0;
    for y in 0..a.height {
        for x in 0..a.width {
            let (p, q) = (a.pixel(x, y), b.pixel(x, y));
            for c in 0..3 {
                let d = p[c] as f64 - q[c] as f64;
                sum += d * d;
            }
        }
    }
    let mse = sum / (a.width * a.height * 3) as f64;
    10.0 * (1.0 / mse).log10()
}

fn naive_ssim(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    let k = 11;
    let sigma = 1.5f64;
    let mut w = vec![0.0f64; k * k];
    for i in 0..k {
        for j in 0..k {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            w[i * k + j] = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let (c1, c2) = (1e-4, 9e-4);
    let mut sum = 0.0;
    let mut count = 0usize;
    for c in 0..3 {
        for y0 in 0..=a.height - k {
            for x0 in 0..=a.width - k {
                let (mut ma, mut mb, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..k {
                    for j in 0..k {
                        let wt = w[i * k + j];
                        let pa = a.pixel(x0 + j, y0 + i)[c] as f64;
                        let pb = b.pixel(x0 + j, y0 + i)[c] as f64;
                        ma += wt * pa;
                        mb += wt * pb;
                        aa += wt * pa * pa;
                        bb += wt * pb * pb;
                        ab += wt * pa * pb;
                    }
                }
                let (va, vb, cov) = (aa - ma * ma, bb - mb * mb, ab - ma * mb);
                sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
    }
    sum / count as f64
}

fn c8_metrics() -> Outcome {
    let mut rng = SceneRng::new(808);
    let mut psnr_err = 0.0f64;
    let mut ssim_err = 0.0f64;
    for _ in 0..50 {
        let w = 11 + (rng.uniform() * 30.0) as usize;
        let h = 11 + (rng.uniform() * 30.0) as usize;
        let noise = rng.range(0.001, 0.3);
        let a: Vec<f32> = (0..w * h * 3).map(|_| rng.uniform() as f32).collect();
        let b: Vec<f32> = a
            .iter()
            .map(|&v| (v as f64 + rng.normal() * noise).clamp(0.0, 1.0) as f32)
            .collect();
        let ia = ImageBuffer::from_rgb(w, h, a).unwrap();
        let ib = ImageBuffer::from_rgb(w, h, b).unwrap();
        psnr_err = psnr_err.max((metrics::psnr(&ia, &ib).unwrap() - naive_psnr(&ia, &ib)).abs());
        ssim_err = ssim_err.max((metrics::ssim(&ia, &ib).unwrap() - naive_ssim(&ia, &ib)).abs());
    }
    let black = ImageBuffer::black(16, 16);
    let gray = ImageBuffer::from_rgb(16, 16, vec![0.5; 16 * 16 * 3]).unwrap();
    let closed = metrics::psnr(&black, &gray).unwrap();
    let closed_ok = (metrics::mse(&black, &gray).unwrap() - 0.25).abs() < 1e-15 && (closed - 6.0206).abs() <= 1e-4;
    check(
        psnr_err <= 1e-9 && ssim_err <= 1e-6 && closed_ok,
        format!("max PSNR error {psnr_err:.1e} dB, max SSIM error {ssim_err:.1e}, MSE 0.25 -> {closed:.5} dB"),
    )
}

fn c9_truck() -> Outcome {
    let (Ok(ply_path), Ok(cam_path)) = (std::env::var("GSCOMP_TRUCK_PLY"), std::env::var("GSCOMP_TRUCK_CAMERAS"))
    else {
        return Outcome::Skip("set GSCOMP_TRUCK_PLY and GSCOMP_TRUCK_CAMERAS to run".into());
    };
    let model = ply::load_ply(&ply_path).unwrap();
    let cams = render::load_cameras(&cam_path).unwrap();
    let input_bytes = std::fs::metadata(&ply_path).unwrap().len();
    let options = CompressOptions {
        input_bytes: Some(input_bytes),
        ..Default::default()
    };
    let res = foa::compress(&model, &cams, &Constraint::MaxPsnrDropDb(1.0), &options).unwrap();
    check(
        res.feasible && res.reduction_pct >= 90.0,
        format!(
            "{:.2} MiB -> {:.2} MiB, reduction {:.1}%, drop {:.3} dB, feasible {}",
            input_bytes as f64 / (1 << 20) as f64,
            res.output_bytes as f64 / (1 << 20) as f64,
            res.reduction_pct,
            res.quality.psnr_drop_db,
            res.feasible
        ),
    )
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "quantization error bound", limit: Some(Duration::from_secs(10)), run: c1_quantization_bound },
        Criterion { id: 2, name: "grouped quantization benefit", limit: Some(Duration::from_secs(30)), run: c2_grouped_benefit },
        Criterion { id: 3, name: "channel sensitivity ordering", limit: Some(Duration::from_secs(60)), run: c3_sensitivity_order },
        Criterion { id: 4, name: "ADP dominance over row pruning", limit: Some(Duration::from_secs(120)), run: c4_adp_dominance },
        Criterion { id: 5, name: "FOA search and 1 dB budget", limit: Some(Duration::from_secs(120)), run: c5_foa },
        Criterion { id: 6, name: "FGC round trip", limit: Some(Duration::from_secs(60)), run: c6_round_trip },
        Criterion { id: 7, name: "renderer oracles", limit: Some(Duration::from_secs(60)), run: c7_renderer },
        Criterion { id: 8, name: "metric oracles", limit: Some(Duration::from_secs(30)), run: c8_metrics },
        Criterion { id: 9, name: "pretrained Truck reduction", limit: None, run: c9_truck },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.id.to_string() == *f || c.name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = (c.run)();
        let elapsed = t.elapsed();
        let over = c.limit.is_some_and(|l| elapsed > l);
        let limit = c.limit.map_or("unbounded".to_string(), |l| format!("limit {}s", l.as_secs()));
        let (status, detail) = match outcome {
            Outcome::Pass(d) if !over => ("PASS", d),
            Outcome::Pass(d) => ("FAIL", format!("{d}; over time")),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::Skip(d) => ("SKIP", d),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {}: {status} {} [{:.2}s, {limit}] {detail}",
            c.id,
            c.name,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
