//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use bgmatte::brm::{extract_bg_info, BackgroundState};
use bgmatte::matting::{project_alpha, BackgroundPrior, DetailParams};
use bgmatte::metrics::{
    boundary_mask, loss_alpha_hr, loss_bg, mad, mse, ofd_filter, BoundaryWeightMask, OfdParams,
};
use bgmatte::pipeline::{run_sequence, PipelineConfig};
use bgmatte::prm::{
    grid_size_for, patch_budget, refine, run_prm, select_patches, FlawMap, PatchGrid, PatchSchedule, PrmParams,
};
use bgmatte::synth::{
    build_clip, clear_block_union, composite, BackgroundConfig, ForegroundConfig, MotionConfig, Primitive,
    SynthConfig,
};
use bgmatte::types::downsample4x;
use bgmatte::{AlphaMatte, Frame, Resolution, SemanticMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

// ---------------------------------------------------------------------------
// 1. Background restoration update against a per-pixel scalar reference.

// Literal scalar form of the update with masks as 0/1 multipliers.
fn reference_update(f: &mut [f64], m: &mut u8, info: &[f64], s: f64) {
    let is_bg = (1.0 - s) > 0.5;
    let new = if *m == 0 && is_bg { 1.0 } else { 0.0 };
    let avg = if *m == 1 && is_bg { 1.0 } else { 0.0 };
    for c in 0..3 {
        let tmp = f[c] + new * info[c];
        f[c] = (1.0 - avg) * tmp + avg * ((tmp + info[c]) / 2.0);
    }
    *m += new as u8;
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (w, h, frames) = (16, 16, 20);
    for seq in 0..200 {
        let mut state = BackgroundState::new(w, h).unwrap();
        let mut f = vec![0.0; w * h * 3];
        let mut m = vec![0u8; w * h];
        for t in 0..frames {
            let frame_4x = Frame::new(t + 1, w, h, (0..w * h * 3).map(|_| rng.gen::<f64>()).collect()).unwrap();
            let s: Vec<f64> = (0..w * h)
                .map(|_| match rng.gen_range(0..4) {
                    0 => 0.5,
                    1 => 0.0,
                    2 => 1.0,
                    _ => rng.gen(),
                })
                .collect();
            let semantic = SemanticMap::new(w, h, s.clone()).unwrap();
            let info = extract_bg_info(&frame_4x, &semantic).unwrap();
            state = state.update(&info, &semantic).unwrap().0;
            for p in 0..w * h {
                let px: Vec<f64> = (0..3).map(|c| (1.0 - s[p]) * frame_4x.data()[p * 3 + c]).collect();
                reference_update(&mut f[p * 3..p * 3 + 3], &mut m[p], &px, s[p]);
            }
            let same_f = state.content().iter().zip(&f).all(|(a, b)| a.to_bits() == b.to_bits());
            ensure!(same_f && state.mask() == &m[..], "sequence {seq} frame {} diverges", t + 1);
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("200 sequences x 20 frames bit-exact in {:.2}s", elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------------------
// 2. Static background: coverage matches the geometric oracle and restored
// content equals the quarter-resolution true background bit for bit.

fn criterion_2() -> Outcome {
    let config = SynthConfig {
        width: 128,
        height: 96,
        clip_length: 24,
        seed: 3,
        margin: 0,
        fanout: 1,
        motion: MotionConfig::still(),
        foreground: ForegroundConfig {
            primitives: vec![Primitive::disc(14.0)],
            feather: 2.0,
            color: [0.9, 0.8, 0.7],
            start: [30.0, 48.0],
            velocity: [8.0, 0.5],
        },
        background: BackgroundConfig::default(),
    };
    let clip = build_clip(&config).unwrap();
    let seq = &clip.sequence;
    let (qw, qh) = (32, 24);
    let true_bg = downsample4x(&seq.background.as_ref().unwrap()[0]).unwrap();

    let mut state = BackgroundState::new(qw, qh).unwrap();
    let mut first_copy = vec![false; qw * qh];
    for (frame, alpha) in seq.frames().iter().zip(seq.alpha.as_ref().unwrap()) {
        // Foreground wherever any pixel of the 4x4 block has alpha above zero.
        let s: Vec<f64> = (0..qw * qh)
            .map(|b| {
                let (bx, by) = (b % qw, b / qw);
                let covered = (0..16).any(|i| alpha.get(bx * 4 + i % 4, by * 4 + i / 4) > 0.0);
                if covered {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let semantic = SemanticMap::new(qw, qh, s).unwrap();
        let info = extract_bg_info(&downsample4x(frame).unwrap(), &semantic).unwrap();
        let (next, trace) = state.update(&info, &semantic).unwrap();
        for (fc, &n) in first_copy.iter_mut().zip(&trace.newly_restored) {
            *fc |= n;
        }
        state = next;
    }
    let oracle = clear_block_union(&config, 4);
    ensure!(oracle.iter().all(|&v| v), "scene leaves some block always covered");
    let covered_initially = seq.alpha.as_ref().unwrap()[0].values().iter().filter(|&&a| a > 0.0).count();
    ensure!(covered_initially > 0, "portrait must occlude part of frame 1");
    for (i, (&m, &o)) in state.mask().iter().zip(&oracle).enumerate() {
        ensure!((m == 1) == o, "block {i}: bgM={m} oracle={o}");
    }
    let mut exact = 0;
    for p in 0..qw * qh {
        if first_copy[p] {
            for c in 0..3 {
                let (got, want) = (state.content()[p * 3 + c], true_bg.data()[p * 3 + c]);
                ensure!(got.to_bits() == want.to_bits(), "block {p} channel {c}: {got} != {want}");
            }
            exact += 1;
        }
    }
    Ok(format!("{}/{} blocks restored per oracle, {exact} bit-exact", state.restored_count(), qw * qh))
}

// ---------------------------------------------------------------------------
// 3. Grid rule over 50 resolutions.

fn criterion_3() -> Outcome {
    let mut sizes: Vec<(usize, usize)> = vec![
        (4096, 4096),
        (4096, 2160),
        (4097, 2160),
        (3840, 2160),
        (1920, 1080),
        (512, 512),
        (8192, 4320),
        (7680, 4320),
        (4095, 4095),
        (32, 32),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    while sizes.len() < 50 {
        sizes.push((rng.gen_range(32..=8192), rng.gen_range(32..=8192)));
    }
    let (mut small, mut large) = (0, 0);
    for &(w, h) in &sizes {
        let grid = PatchGrid::new(w, h).map_err(|e| format!("{w}x{h}: {e}"))?;
        if w.max(h) <= 4096 {
            ensure!(grid.k == 16 && grid_size_for(w, h) == 16, "{w}x{h}: k={}", grid.k);
            ensure!(grid.max_patch_area() <= 256 * 256, "{w}x{h}: patch area {}", grid.max_patch_area());
            small += 1;
        } else {
            ensure!(grid.k == 32, "{w}x{h}: k={}", grid.k);
            large += 1;
        }
        let covered: usize = grid.rects().map(|r| r.area()).sum();
        ensure!(covered == w * h, "{w}x{h}: patches cover {covered}");
    }
    Ok(format!("{} resolutions ({small} with k=16, {large} with k=32)", sizes.len()))
}

// ---------------------------------------------------------------------------
// 4. Budget and refinement reduction on random schedules.

fn criterion_4() -> Outcome {
    let resolutions = [(512, 512), (1920, 1080), (3840, 2160), (8192, 4320)];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = f64::INFINITY;
    for trial in 0..100 {
        let (w, h) = resolutions[trial % resolutions.len()];
        let grid = PatchGrid::new(w, h).unwrap();
        let flaws = FlawMap {
            k: grid.k,
            scores: (0..grid.len()).map(|_| rng.gen::<f64>()).collect(),
        };
        let xi = rng.gen_range(0.0..0.5);
        let schedule = select_patches(&flaws, xi, 0.15).unwrap();
        let budget = patch_budget(0.15, grid.k);
        ensure!(
            budget == (0.15 * (grid.k * grid.k) as f64).ceil() as usize,
            "budget {budget} for k={}",
            grid.k
        );
        ensure!(schedule.selected.len() <= budget, "trial {trial}: {} > {budget}", schedule.selected.len());
        let refined: usize = schedule.selected.iter().map(|&i| grid.rect(i).area()).sum();
        let reduction = (w * h) as f64 / refined.max(1) as f64;
        ensure!(reduction >= 6.5, "trial {trial} at {w}x{h}: reduction {reduction:.3}");
        worst = worst.min(reduction);
    }
    // Count pixels actually rewritten by a refinement at 512x512.
    let frame = Frame::filled(1, 512, 512, [0.5, 0.5, 0.5]).unwrap();
    let coarse = AlphaMatte::new(512, 512, (0..512 * 512).map(|i| ((i % 512) as f64 / 511.0).min(1.0)).collect(), Resolution::Full).unwrap();
    let grid = PatchGrid::new(512, 512).unwrap();
    let flaws = FlawMap {
        k: 16,
        scores: (0..256).map(|_| rng.gen::<f64>()).collect(),
    };
    let schedule = select_patches(&flaws, 0.0, 0.15).unwrap();
    let prior = BackgroundPrior::known(Frame::filled(0, 512, 512, [0.1, 0.1, 0.1]).unwrap());
    let r = refine(&frame, &coarse, &grid, &schedule, &prior, 8, DetailParams::default()).unwrap();
    let rewritten = r.refined_pixels + r.skipped_patches * grid.max_patch_area();
    ensure!(rewritten == 39 * 32 * 32, "refine touched {rewritten} pixels");
    Ok(format!("100 schedules within budget, worst reduction {worst:.3}x"))
}

// ---------------------------------------------------------------------------
// 5. Empty schedule copies the coarse matte exactly.

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (w, h) = (320, 200);
    let coarse = AlphaMatte::new(w, h, (0..w * h).map(|_| rng.gen::<f64>()).collect(), Resolution::Full).unwrap();
    let frame = Frame::new(1, w, h, (0..w * h * 3).map(|_| rng.gen::<f64>()).collect()).unwrap();
    let prior = BackgroundPrior::known(Frame::filled(0, w, h, [0.2, 0.3, 0.4]).unwrap());
    let grid = PatchGrid::new(w, h).unwrap();
    let out = refine(&frame, &coarse, &grid, &PatchSchedule::empty(0.01, 0.15), &prior, 8, DetailParams::default()).unwrap();
    let same = |m: &AlphaMatte| m.values().iter().zip(coarse.values()).all(|(a, b)| a.to_bits() == b.to_bits());
    ensure!(same(&out.matte) && out.refined_pixels == 0, "explicit empty schedule altered the matte");
    let params = PrmParams {
        cap: 0.0,
        ..PrmParams::default()
    };
    let via_cap = run_prm(&frame, &coarse, &prior, &params).unwrap();
    ensure!(same(&via_cap.refined.matte), "cap = 0 altered the matte");
    Ok("refine with no selected patches is a bitwise copy".into())
}

// ---------------------------------------------------------------------------
// 6. Alpha recovery on synthetic clips with a static known background.

fn criterion_6() -> Outcome {
    let scenes = [
        (11u64, [0.9, 0.85, 0.95], [0.3, 0.35, 0.4], 6.0),
        (12, [0.95, 0.75, 0.2], [0.25, 0.3, 0.55], 5.0),
        (13, [0.1, 0.15, 0.1], [0.6, 0.55, 0.5], 4.0),
    ];
    let mut detail = Vec::new();
    for (seed, color, mean, speed) in scenes {
        let config = SynthConfig {
            width: 256,
            height: 256,
            clip_length: 30,
            seed,
            margin: 0,
            fanout: 1,
            motion: MotionConfig::still(),
            foreground: ForegroundConfig {
                primitives: vec![
                    Primitive::disc(36.0),
                    Primitive {
                        offset: [0.0, 56.0],
                        radius: 22.0,
                        half_length: 20.0,
                        angle: std::f64::consts::FRAC_PI_2,
                    },
                ],
                feather: 3.0,
                color,
                start: [-40.0, 110.0],
                velocity: [speed, 0.0],
            },
            background: BackgroundConfig {
                mean,
                amplitude: 0.1,
                period: 160.0,
            },
        };
        let clip = build_clip(&config).unwrap();
        let seq = &clip.sequence;
        let truth = seq.alpha.as_ref().unwrap();
        let backgrounds = seq.background.as_ref().unwrap();
        let out = run_sequence(seq.frames(), PipelineConfig::default()).unwrap();

        let (mut band_err, mut band_n, mut contrast) = (0.0, 0usize, 0.0);
        let mut full = 0.0;
        for t in 0..seq.len() {
            let (pred, gt) = (&out.mattes[t], &truth[t]);
            full += mad(pred, gt).unwrap();
            let band = boundary_mask(gt, 2);
            for (i, &wgt) in band.weights.iter().enumerate() {
                if wgt > 1.0 {
                    band_err += (pred.values()[i] - gt.values()[i]).abs();
                    band_n += 1;
                    let b = &backgrounds[t].data()[i * 3..i * 3 + 3];
                    contrast += (0..3).map(|c| (color[c] - b[c]).abs()).sum::<f64>() / 3.0;
                }
            }
        }
        ensure!(band_n > 0, "seed {seed}: empty band");
        let contrast = contrast / band_n as f64;
        ensure!(contrast >= 0.2, "seed {seed}: band contrast {contrast:.3} below 0.2");
        let band_mad = band_err / band_n as f64;
        let full_e4 = full / seq.len() as f64 * 1e4;
        ensure!(band_mad <= 0.02, "seed {seed}: band MAD {band_mad:.4}");
        ensure!(full_e4 <= 200.0, "seed {seed}: full-frame MAD_e4 {full_e4:.1}");
        detail.push(format!("band MAD {band_mad:.4}, MAD_e4 {full_e4:.1}"));
    }
    Ok(detail.join("; "))
}

// ---------------------------------------------------------------------------
// 7. Metrics against hand-computed values.

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn criterion_7() -> Outcome {
    let (w, h) = (8usize, 6usize);
    let n = (w * h) as f64;
    let eps = 1e-6;
    let charb = |d: f64| (d * d + eps * eps).sqrt();
    let gt_vals: Vec<f64> = (0..w * h).map(|i| (i % 7) as f64 / 10.0).collect();
    let gt = AlphaMatte::new(w, h, gt_vals.clone(), Resolution::Full).unwrap();
    let matte = |v: Vec<f64>| AlphaMatte::new(w, h, v, Resolution::Full).unwrap();
    let uniform = BoundaryWeightMask::uniform(w, h);
    // γ = 4 on columns 3 and 4, 1 elsewhere
    let banded = BoundaryWeightMask {
        width: w,
        height: h,
        weights: (0..w * h).map(|i| if (3..5).contains(&(i % w)) { 4.0 } else { 1.0 }).collect(),
    };

    // constant offset
    let offset = matte(gt_vals.iter().map(|v| v + 0.25).collect());
    ensure!(close(mad(&offset, &gt).unwrap(), 0.25), "mad offset");
    ensure!(close(mse(&offset, &gt).unwrap(), 0.0625), "mse offset");
    ensure!(close(loss_alpha_hr(&offset, &gt, &uniform, eps).unwrap().value, charb(0.25)), "alpha loss offset");

    // complement
    let comp = matte(gt_vals.iter().map(|v| 1.0 - v).collect());
    let want_mad = gt_vals.iter().map(|v| (1.0 - 2.0 * v).abs()).sum::<f64>() / n;
    let want_mse = gt_vals.iter().map(|v| (1.0 - 2.0 * v).powi(2)).sum::<f64>() / n;
    let want_loss = gt_vals.iter().map(|v| charb(1.0 - 2.0 * v)).sum::<f64>() / n;
    ensure!(close(mad(&comp, &gt).unwrap(), want_mad), "mad complement");
    ensure!(close(mse(&comp, &gt).unwrap(), want_mse), "mse complement");
    ensure!(close(loss_alpha_hr(&comp, &gt, &uniform, eps).unwrap().value, want_loss), "alpha loss complement");

    // single-pixel delta
    let mut one = gt_vals.clone();
    one[17] += 0.3;
    let one = matte(one);
    ensure!(close(mad(&one, &gt).unwrap(), 0.3 / n), "mad delta");
    ensure!(close(mse(&one, &gt).unwrap(), 0.09 / n), "mse delta");
    ensure!(
        close(loss_alpha_hr(&one, &gt, &uniform, eps).unwrap().value, (charb(0.3) + (n - 1.0) * eps) / n),
        "alpha loss delta"
    );

    // error only inside the γ band: MAD/MSE unweighted, losses weighted by 4
    let in_band = matte(gt_vals.iter().enumerate().map(|(i, v)| if (3..5).contains(&(i % w)) { v + 0.2 } else { *v }).collect());
    let band_px = (2 * h) as f64;
    ensure!(close(mad(&in_band, &gt).unwrap(), 0.2 * band_px / n), "mad band");
    ensure!(close(mse(&in_band, &gt).unwrap(), 0.04 * band_px / n), "mse band");
    let want = (4.0 * band_px * charb(0.2) + (n - band_px) * eps) / n;
    ensure!(close(loss_alpha_hr(&in_band, &gt, &banded, eps).unwrap().value, want), "alpha loss band");

    // identical inputs hit the ε floor
    ensure!(mad(&gt, &gt).unwrap() == 0.0 && mse(&gt, &gt).unwrap() == 0.0, "mad/mse floor");
    let want = (4.0 * band_px + (n - band_px)) * eps / n;
    ensure!(close(loss_alpha_hr(&gt, &gt, &banded, eps).unwrap().value, want), "alpha loss floor");

    // background loss: the same five cases over a two-frame sequence
    let bg_vals: Vec<f64> = (0..w * h * 3).map(|i| (i % 5) as f64 / 8.0).collect();
    let bg = Frame::new(1, w, h, bg_vals.clone()).unwrap();
    let frame = |v: Vec<f64>| Frame::new(1, w, h, v).unwrap();
    let truth = vec![bg.clone(), bg.clone()];
    let n3 = n * 3.0;
    let cases: Vec<(&str, Frame, &BoundaryWeightMask, f64)> = vec![
        ("offset", frame(bg_vals.iter().map(|v| v + 0.1).collect()), &uniform, charb(0.1)),
        (
            "complement",
            frame(bg_vals.iter().map(|v| 1.0 - v).collect()),
            &uniform,
            bg_vals.iter().map(|v| charb(1.0 - 2.0 * v)).sum::<f64>() / n3,
        ),
        (
            "delta",
            frame(bg_vals.iter().enumerate().map(|(i, v)| if i == 40 { v + 0.5 } else { *v }).collect()),
            &uniform,
            (charb(0.5) + (n3 - 1.0) * eps) / n3,
        ),
        (
            "band",
            frame(bg_vals.iter().enumerate().map(|(i, v)| if (3..5).contains(&((i / 3) % w)) { v + 0.2 } else { *v }).collect()),
            &banded,
            (4.0 * band_px * 3.0 * charb(0.2) + (n - band_px) * 3.0 * eps) / n3,
        ),
        ("floor", bg.clone(), &banded, (4.0 * band_px + (n - band_px)) * 3.0 * eps / n3),
    ];
    for (name, pred, gamma, per_frame) in cases {
        let got = loss_bg(&[pred.clone(), pred], &truth, std::slice::from_ref(gamma), eps).unwrap().value;
        ensure!(close(got, 2.0 * per_frame), "background loss {name}: {got} vs {}", 2.0 * per_frame);
    }
    Ok("5 cases each for mad, mse, loss_bg, loss_alpha_hr within 1e-9".into())
}

// ---------------------------------------------------------------------------
// 8. Composite-then-solve round trip.

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (w, h) = (128, 128);
    let fg = Frame::new(1, w, h, (0..w * h * 3).map(|_| rng.gen::<f64>()).collect()).unwrap();
    let bg = Frame::new(1, w, h, (0..w * h * 3).map(|_| rng.gen::<f64>()).collect()).unwrap();
    let alpha = AlphaMatte::new(w, h, (0..w * h).map(|_| rng.gen::<f64>()).collect(), Resolution::Full).unwrap();
    let image = composite(&fg, &alpha, &bg).unwrap();
    let (mut err, mut n) = (0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            let (f, b) = (fg.pixel(x, y), bg.pixel(x, y));
            let d2: f64 = (0..3).map(|c| (f[c] - b[c]).powi(2)).sum();
            if d2 < 0.04 {
                continue;
            }
            let (a, _) = project_alpha(image.pixel(x, y), f, b, 1e-4);
            err += (a - alpha.get(x, y)).abs();
            n += 1;
        }
    }
    let m = err / n as f64;
    ensure!(m <= 1e-6, "MAD {m:e} over {n} pixels");
    Ok(format!("MAD {m:.2e} over {n} pixels"))
}

// ---------------------------------------------------------------------------
// 9. Flicker filter corrects injected flickers and nothing else.

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (w, h, frames) = (32, 32, 12);
    // slow per-pixel ramps, well inside the flicker tolerance
    let base: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.3..0.7)).collect();
    let slope: Vec<f64> = (0..w * h).map(|_| rng.gen_range(-0.01..0.01)).collect();
    let mut values: Vec<Vec<f64>> = (0..frames)
        .map(|t| (0..w * h).map(|p| base[p] + slope[p] * t as f64).collect())
        .collect();
    let clean = values.clone();
    let mut injected = Vec::new();
    for p in 0..w * h {
        let mut t = 1 + rng.gen_range(0..3);
        while t < frames - 1 {
            if rng.gen_bool(0.3) {
                let v = clean[t][p];
                values[t][p] = if v < 0.5 { v + 0.45 } else { v - 0.45 };
                injected.push((t, p));
                t += 2; // keep neighbours clean
            }
            t += 1;
        }
    }
    let mattes: Vec<AlphaMatte> = values
        .iter()
        .map(|v| AlphaMatte::new(w, h, v.clone(), Resolution::Full).unwrap())
        .collect();
    let out = ofd_filter(&mattes, OfdParams::default()).unwrap();
    for &(t, p) in &injected {
        let want = (clean[t - 1][p] + clean[t + 1][p]) / 2.0;
        ensure!(out.mattes[t].values()[p] == want, "frame {t} pixel {p} not corrected");
    }
    let mut untouched = 0;
    for t in 0..frames {
        for p in 0..w * h {
            if injected.contains(&(t, p)) {
                continue;
            }
            ensure!(out.mattes[t].values()[p] == values[t][p], "frame {t} pixel {p} changed");
            untouched += 1;
        }
    }
    ensure!(out.changed == injected.len(), "{} changed for {} injected", out.changed, injected.len());
    Ok(format!("{} flickers corrected, {untouched} other samples unchanged", injected.len()))
}

// ---------------------------------------------------------------------------
// 10. CLI determinism and runtime on a 100-frame 512x512 clip.

fn run_cli(args: &[&str], threads: Option<&str>) -> Result<Duration, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bgmatte"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("BGMATTE_THREADS", t);
    }
    let start = Instant::now();
    let out = cmd.output().map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(elapsed)
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != "effective.cfg")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let cfg = root.join("clip.cfg");
    std::fs::write(
        &cfg,
        "synth.width = 512\nsynth.height = 512\nsynth.clip_length = 100\nsynth.margin = 96\n\
         synth.radius = 60\nsynth.start = -70, 200\nsynth.velocity = 6, 0\nsynth.bg_period = 256\n",
    )
    .unwrap();
    let s = |p: &Path| p.to_str().unwrap().to_owned();
    let clip = root.join("clip");
    run_cli(&["synth", "--config", &s(&cfg), "--output", &s(&clip)], None)?;
    let frames = clip.join("frames");
    let (a, b) = (root.join("a"), root.join("b"));
    let first = run_cli(&["matte", "--input", &s(&frames), "--output", &s(&a)], None)?;
    let second = run_cli(&["matte", "--input", &s(&frames), "--output", &s(&b)], Some("2"))?;
    let (fa, fb) = (dir_bytes(&a), dir_bytes(&b));
    ensure!(fa.len() == 101, "expected 100 mattes and a report, found {} files", fa.len());
    ensure!(fa == fb, "outputs differ between runs");
    let slowest = first.max(second);
    ensure!(slowest < Duration::from_secs(60), "slowest run took {slowest:?}");
    Ok(format!(
        "byte-identical across runs; {:.1}s and {:.1}s on {} core(s)",
        first.as_secs_f64(),
        second.as_secs_f64(),
        std::thread::available_parallelism().map_or(1, |n| n.get())
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("restoration update matches scalar reference", criterion_1),
        ("static background restored exactly", criterion_2),
        ("patch grid rule", criterion_3),
        ("patch budget and refinement reduction", criterion_4),
        ("empty schedule copies coarse matte", criterion_5),
        ("known-background alpha recovery", criterion_6),
        ("metric closed forms", criterion_7),
        ("composite/solve round trip", criterion_8),
        ("flicker filter", criterion_9),
        ("cli determinism and runtime", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
