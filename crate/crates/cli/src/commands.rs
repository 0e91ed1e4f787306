use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bgmatte::brm::{extract_bg_info, BackgroundState};
use bgmatte::matting::{ClassicalPredictor, Predictor, SemanticContext};
use bgmatte::metrics::{boundary_mask, loss_alpha_hr, loss_bg_frame, mad, mse, REPORT_SCALE};
use bgmatte::pipeline::Pipeline;
use bgmatte::synth::build_dataset;
use bgmatte::types::{downsample4x, quarter_dims};
use bgmatte::{AlphaMatte, Resolution, SemanticMap};
use serde::Serialize;

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::io::{
    ensure_dir, frame_name, list_sequence, read_frame, read_frame16, read_matte, read_semantic, state_paths,
    write_frame, write_matte, write_state, write_text_atomic,
};

pub const CONFIG_ECHO: &str = "effective.cfg";

fn echo_config(config: &Config, dir: &Path) -> Result<()> {
    write_text_atomic(&dir.join(CONFIG_ECHO), &config.save())
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing {what} (flag or io.{what} in the config)")))
}

/// Writes frames, ground-truth alpha, background and foreground for each clip.
pub fn cmd_synth(config: &Config) -> Result<Vec<PathBuf>> {
    let output = required(&config.io.output, "output")?;
    let synth = config.synth.to_config();
    let clips = build_dataset(&synth)?;
    ensure_dir(output)?;
    echo_config(config, output)?;
    let mut dirs = Vec::new();
    for (i, clip) in clips.iter().enumerate() {
        let dir = if clips.len() == 1 {
            output.to_path_buf()
        } else {
            output.join(format!("clip_{:04}", i + 1))
        };
        let seq = &clip.sequence;
        let parts = [
            ("frames", Some(seq.frames())),
            ("background", seq.background.as_deref()),
            ("foreground", seq.foreground.as_deref()),
        ];
        for (name, frames) in parts {
            let sub = dir.join(name);
            ensure_dir(&sub)?;
            for (t, frame) in frames.expect("synthetic clips carry ground truth").iter().enumerate() {
                write_frame(frame, &sub.join(frame_name(t + 1)))?;
            }
        }
        let alpha_dir = dir.join("alpha");
        ensure_dir(&alpha_dir)?;
        for (t, alpha) in seq.alpha.as_ref().expect("ground truth alpha").iter().enumerate() {
            write_matte(alpha, &alpha_dir.join(frame_name(t + 1)))?;
        }
        let json = serde_json::to_string_pretty(&clip.config).expect("config serializes");
        write_text_atomic(&dir.join("clip.json"), &json)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

#[derive(Debug, Clone)]
pub struct MatteSummary {
    pub frames: usize,
    pub restored: usize,
    pub restorable: usize,
    pub ofd_changed: usize,
}

/// Mattes every frame of the input sequence.
pub fn cmd_matte(config: &Config, dump_state: bool) -> Result<MatteSummary> {
    let input = required(&config.io.input, "input")?;
    let output = required(&config.io.output, "output")?;
    let paths = list_sequence(input)?;
    ensure_dir(output)?;
    echo_config(config, output)?;
    let state_dir = output.join("state");
    if dump_state {
        ensure_dir(&state_dir)?;
    }

    let first = read_frame(&paths[0], 1)?;
    let mut pipeline = Pipeline::new(config.pipeline(), first.width(), first.height())?;
    let mut reports = String::new();
    let mut pending_first = Some(first);
    for (i, path) in paths.iter().enumerate() {
        let frame = match pending_first.take() {
            Some(f) => f,
            None => read_frame(path, i + 1)?,
        };
        let (report, ready) = pipeline.push(&frame)?;
        let _ = writeln!(reports, "{}", serde_json::to_string(&report).expect("report serializes"));
        for (t, matte) in ready {
            write_matte(&matte, &output.join(frame_name(t)))?;
        }
        if dump_state {
            write_state(&pipeline.state().background, &state_dir, i + 1)?;
        }
    }
    for (t, matte) in pipeline.finish() {
        write_matte(&matte, &output.join(frame_name(t)))?;
    }
    write_text_atomic(&output.join("frames.jsonl"), &reports)?;
    let bg = &pipeline.state().background;
    Ok(MatteSummary {
        frames: paths.len(),
        restored: bg.restored_count(),
        restorable: bg.width() * bg.height(),
        ofd_changed: pipeline.ofd_changed(),
    })
}

/// Background restoration only, dumping `bgF`/`bgM` after every frame.
/// Semantic maps come from `io.semantic` (quarter-resolution grayscale PNGs
/// with the frame names) or from the classical estimator.
pub fn cmd_restore_bg(config: &Config) -> Result<BackgroundState> {
    let input = required(&config.io.input, "input")?;
    let output = required(&config.io.output, "output")?;
    let paths = list_sequence(input)?;
    ensure_dir(output)?;
    echo_config(config, output)?;

    let predictor = ClassicalPredictor::new(config.classical);
    let mut state: Option<BackgroundState> = None;
    let mut previous: Option<SemanticMap> = None;
    let mut reference = None;
    for (i, path) in paths.iter().enumerate() {
        let t = i + 1;
        let frame = read_frame(path, t)?;
        let frame_4x = downsample4x(&frame)?;
        let current = match state.take() {
            Some(s) => s,
            None => {
                let (w, h) = quarter_dims(frame.width(), frame.height());
                BackgroundState::new(w, h)?
            }
        };
        let reference = reference.get_or_insert_with(|| frame_4x.clone());
        let semantic = match &config.io.semantic {
            Some(dir) => read_semantic(&dir.join(frame_name(t)))?,
            None => {
                let ctx = SemanticContext {
                    prior: &current,
                    previous_semantic: previous.as_ref(),
                    reference: Some(reference),
                };
                predictor.semantic(&frame_4x, &ctx)?
            }
        };
        // given maps go to restoration untouched
        let restore = match &config.io.semantic {
            Some(_) => semantic.clone(),
            None => predictor.restoration_semantic(&semantic)?,
        };
        let info = extract_bg_info(&frame_4x, &restore)?;
        let (next, _) = current.update(&info, &restore)?;
        write_state(&next, output, t)?;
        previous = Some(semantic);
        state = Some(next);
    }
    Ok(state.expect("at least one frame"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameScore {
    pub frame: usize,
    pub mad_e4: f64,
    pub mse_e4: f64,
    pub loss_alpha_hr: f64,
    /// Present when restored-background dumps and true backgrounds exist.
    pub loss_bg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub frames: usize,
    pub mad_e4: f64,
    pub mse_e4: f64,
    pub loss_alpha_hr: f64,
    pub loss_bg: Option<f64>,
}

fn quarter_alpha(alpha: &AlphaMatte) -> Result<AlphaMatte> {
    let (w, h) = quarter_dims(alpha.width(), alpha.height());
    let mut values = Vec::with_capacity(w * h);
    for by in 0..h {
        for bx in 0..w {
            let mut sum = 0.0;
            for i in 0..16 {
                sum += alpha.get(bx * 4 + i % 4, by * 4 + i / 4);
            }
            values.push(sum / 16.0);
        }
    }
    Ok(AlphaMatte::new(w, h, values, Resolution::Coarse)?)
}

/// Scores predicted mattes against ground truth. `truth` may be a synth clip
/// directory (with `alpha/`) or a directory of mattes.
pub fn cmd_eval(config: &Config) -> Result<(Vec<FrameScore>, EvalSummary)> {
    let input = required(&config.io.input, "input")?;
    let truth = required(&config.io.truth, "truth")?;
    let alpha_dir = if truth.join("alpha").is_dir() {
        truth.join("alpha")
    } else {
        truth.to_path_buf()
    };
    let predicted = list_sequence(input)?;
    let expected = list_sequence(&alpha_dir)?;
    if predicted.len() != expected.len() {
        return Err(CliError::Mismatch(format!(
            "{} predicted mattes in {} but {} ground-truth mattes in {}",
            predicted.len(),
            input.display(),
            expected.len(),
            alpha_dir.display()
        )));
    }
    let bg_dir = truth.join("background");
    let state_dir = input.join("state");
    let eps = config.loss_epsilon;
    let radius = config.loss_boundary_radius;

    let mut scores = Vec::with_capacity(predicted.len());
    for (i, (p, g)) in predicted.iter().zip(&expected).enumerate() {
        let t = i + 1;
        let pred = read_matte(p)?;
        let gt = read_matte(g)?;
        let gamma = boundary_mask(&gt, radius);
        let (bg_f, _) = state_paths(&state_dir, t);
        let true_bg = bg_dir.join(frame_name(t));
        let loss_bg = if bg_f.is_file() && true_bg.is_file() {
            let restored = read_frame16(&bg_f)?;
            let target = downsample4x(&read_frame(&true_bg, t)?)?;
            let weights = boundary_mask(&quarter_alpha(&gt)?, radius);
            Some(loss_bg_frame(&restored.with_index(t), &target, &weights, eps)?.value)
        } else {
            None
        };
        scores.push(FrameScore {
            frame: t,
            mad_e4: mad(&pred, &gt)? * REPORT_SCALE,
            mse_e4: mse(&pred, &gt)? * REPORT_SCALE,
            loss_alpha_hr: loss_alpha_hr(&pred, &gt, &gamma, eps)?.value,
            loss_bg,
        });
    }
    let n = scores.len() as f64;
    let summary = EvalSummary {
        frames: scores.len(),
        mad_e4: scores.iter().map(|s| s.mad_e4).sum::<f64>() / n,
        mse_e4: scores.iter().map(|s| s.mse_e4).sum::<f64>() / n,
        loss_alpha_hr: scores.iter().map(|s| s.loss_alpha_hr).sum(),
        loss_bg: scores.iter().map(|s| s.loss_bg).sum(),
    };
    if let Some(output) = &config.io.output {
        ensure_dir(output)?;
        echo_config(config, output)?;
        write_text_atomic(&output.join("eval.jsonl"), &eval_lines(&scores, &summary))?;
    }
    Ok((scores, summary))
}

/// One JSON object per frame, then the summary with `"summary": true`.
pub fn eval_lines(scores: &[FrameScore], summary: &EvalSummary) -> String {
    let mut out = String::new();
    for s in scores {
        let _ = writeln!(out, "{}", serde_json::to_string(s).expect("score serializes"));
    }
    let mut total = serde_json::to_value(summary).expect("summary serializes");
    total["summary"] = serde_json::Value::Bool(true);
    let _ = writeln!(out, "{total}");
    out
}
