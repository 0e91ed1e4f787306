//! Flat `section.key = value` configuration.
//!
//! Every key has a default; a file only lists what it changes. Lines starting
//! with `#` are comments. Unknown keys and out-of-range values are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bgmatte::matting::{Bootstrap, ClassicalParams};
use bgmatte::metrics::OfdParams;
use bgmatte::pipeline::PipelineConfig;
use bgmatte::prm::PrmParams;
use bgmatte::synth::{BackgroundConfig, ForegroundConfig, MotionConfig, Primitive, SynthConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Head disc over a shoulder capsule.
    Portrait,
    Disc,
}

impl Shape {
    fn as_str(self) -> &'static str {
        match self {
            Shape::Portrait => "portrait",
            Shape::Disc => "disc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub width: usize,
    pub height: usize,
    pub clip_length: usize,
    pub seed: u64,
    pub margin: usize,
    pub fanout: usize,
    pub shape: Shape,
    pub radius: f64,
    pub feather: f64,
    pub fg_color: [f64; 3],
    pub start: [f64; 2],
    pub velocity: [f64; 2],
    pub motion: MotionConfig,
    pub background: BackgroundConfig,
}

impl Default for SynthSettings {
    fn default() -> Self {
        let c = SynthConfig::default();
        Self {
            width: c.width,
            height: c.height,
            clip_length: c.clip_length,
            seed: c.seed,
            margin: c.margin,
            fanout: c.fanout,
            shape: Shape::Portrait,
            radius: 18.0,
            feather: c.foreground.feather,
            fg_color: c.foreground.color,
            start: c.foreground.start,
            velocity: c.foreground.velocity,
            motion: c.motion,
            background: c.background,
        }
    }
}

impl SynthSettings {
    pub fn to_config(&self) -> SynthConfig {
        let r = self.radius;
        let primitives = match self.shape {
            Shape::Disc => vec![Primitive::disc(r)],
            Shape::Portrait => vec![
                Primitive::disc(r),
                Primitive {
                    offset: [0.0, r * 17.0 / 9.0],
                    radius: r * 7.0 / 9.0,
                    half_length: r * 8.0 / 9.0,
                    angle: 0.0,
                },
            ],
        };
        SynthConfig {
            width: self.width,
            height: self.height,
            clip_length: self.clip_length,
            seed: self.seed,
            margin: self.margin,
            fanout: self.fanout,
            motion: self.motion,
            foreground: ForegroundConfig {
                primitives,
                feather: self.feather,
                color: self.fg_color,
                start: self.start,
                velocity: self.velocity,
            },
            background: self.background,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IoPaths {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub semantic: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub predictor: String,
    pub classical: ClassicalParams,
    pub prm: PrmParams,
    pub ofd_enabled: bool,
    pub ofd: OfdParams,
    pub loss_epsilon: f64,
    pub loss_boundary_radius: usize,
    pub synth: SynthSettings,
    pub io: IoPaths,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            predictor: "classical".into(),
            classical: ClassicalParams::default(),
            prm: PrmParams::default(),
            ofd_enabled: true,
            ofd: OfdParams::default(),
            loss_epsilon: 1e-6,
            loss_boundary_radius: 2,
            synth: SynthSettings::default(),
            io: IoPaths::default(),
        }
    }
}

enum Field<'a> {
    F64(&'a mut f64, Bound, Bound),
    Usize(&'a mut usize, usize, usize),
    U64(&'a mut u64),
    Bool(&'a mut bool),
    Name(&'a mut String),
    Path(&'a mut Option<PathBuf>),
    Pair(&'a mut [f64; 2]),
    Triple(&'a mut [f64; 3], f64, f64),
    Bootstrap(&'a mut Bootstrap),
    Shape(&'a mut Shape),
    /// `0` means automatic.
    GridK(&'a mut Option<usize>),
}

#[derive(Clone, Copy)]
enum Bound {
    Incl(f64),
    Excl(f64),
    Open,
}

impl Bound {
    fn describe(self, lower: bool) -> String {
        match (self, lower) {
            (Bound::Incl(v), true) => format!("[{v}"),
            (Bound::Excl(v), true) => format!("({v}"),
            (Bound::Incl(v), false) => format!("{v}]"),
            (Bound::Excl(v), false) => format!("{v})"),
            (Bound::Open, true) => "(-inf".into(),
            (Bound::Open, false) => "inf)".into(),
        }
    }
}

use Bound::{Excl, Incl, Open};

const UNIT: (Bound, Bound) = (Incl(0.0), Incl(1.0));
const POSITIVE_UNIT: (Bound, Bound) = (Excl(0.0), Incl(1.0));
const NON_NEGATIVE: (Bound, Bound) = (Incl(0.0), Open);
const ANY: (Bound, Bound) = (Open, Open);

impl Config {
    fn fields(&mut self) -> Vec<(&'static str, Field<'_>)> {
        fn f(v: &mut f64, (lo, hi): (Bound, Bound)) -> Field<'_> {
            Field::F64(v, lo, hi)
        }
        let c = &mut self.classical;
        let p = &mut self.prm;
        let s = &mut self.synth;
        vec![
            ("predictor.name", Field::Name(&mut self.predictor)),
            ("semantic.theta", f(&mut c.theta, UNIT)),
            ("semantic.sigma", f(&mut c.sigma, POSITIVE_UNIT)),
            ("semantic.initial", f(&mut c.initial, UNIT)),
            ("semantic.bootstrap", Field::Bootstrap(&mut c.bootstrap)),
            ("semantic.restore_hard", Field::Bool(&mut c.restore_hard)),
            ("semantic.guard", Field::Usize(&mut c.guard, 0, 16)),
            ("band.lo", f(&mut c.band_lo, UNIT)),
            ("band.hi", f(&mut c.band_hi, UNIT)),
            ("band.radius", Field::Usize(&mut c.band_radius, 0, 64)),
            ("detail.delta", f(&mut c.detail.delta, POSITIVE_UNIT)),
            ("detail.confident", f(&mut c.detail.confident, UNIT)),
            ("detail.confident_erode", Field::Usize(&mut c.detail.confident_erode, 0, 64)),
            ("prm.xi", f(&mut p.xi, UNIT)),
            ("prm.cap", f(&mut p.cap, UNIT)),
            ("prm.halo", Field::Usize(&mut p.halo, 0, 1024)),
            ("prm.force_k", Field::GridK(&mut p.force_k)),
            ("prm.transition_weight", f(&mut p.flaw.transition_weight, NON_NEGATIVE)),
            ("prm.gradient_weight", f(&mut p.flaw.gradient_weight, NON_NEGATIVE)),
            ("prm.flaw_lo", f(&mut p.flaw.lo, UNIT)),
            ("prm.flaw_hi", f(&mut p.flaw.hi, UNIT)),
            ("ofd.enabled", Field::Bool(&mut self.ofd_enabled)),
            ("ofd.close_tol", f(&mut self.ofd.close_tol, UNIT)),
            ("ofd.flicker_tol", f(&mut self.ofd.flicker_tol, UNIT)),
            ("loss.epsilon", f(&mut self.loss_epsilon, POSITIVE_UNIT)),
            ("loss.boundary_radius", Field::Usize(&mut self.loss_boundary_radius, 0, 64)),
            ("synth.width", Field::Usize(&mut s.width, 4, 16384)),
            ("synth.height", Field::Usize(&mut s.height, 4, 16384)),
            ("synth.clip_length", Field::Usize(&mut s.clip_length, 1, 100_000)),
            ("synth.seed", Field::U64(&mut s.seed)),
            ("synth.margin", Field::Usize(&mut s.margin, 0, 16384)),
            ("synth.fanout", Field::Usize(&mut s.fanout, 1, 10_000)),
            ("synth.shape", Field::Shape(&mut s.shape)),
            ("synth.radius", f(&mut s.radius, NON_NEGATIVE)),
            ("synth.feather", f(&mut s.feather, NON_NEGATIVE)),
            ("synth.fg_color", Field::Triple(&mut s.fg_color, 0.0, 1.0)),
            ("synth.start", Field::Pair(&mut s.start)),
            ("synth.velocity", Field::Pair(&mut s.velocity)),
            ("synth.drift_translation", Field::Pair(&mut s.motion.drift_translation)),
            ("synth.drift_rotation", f(&mut s.motion.drift_rotation, ANY)),
            ("synth.drift_scale", f(&mut s.motion.drift_scale, ANY)),
            ("synth.jitter_translation", f(&mut s.motion.jitter_translation, NON_NEGATIVE)),
            ("synth.jitter_rotation", f(&mut s.motion.jitter_rotation, NON_NEGATIVE)),
            ("synth.jitter_scale", f(&mut s.motion.jitter_scale, NON_NEGATIVE)),
            ("synth.bg_mean", Field::Triple(&mut s.background.mean, 0.0, 1.0)),
            ("synth.bg_amplitude", f(&mut s.background.amplitude, NON_NEGATIVE)),
            ("synth.bg_period", f(&mut s.background.period, (Excl(0.0), Open))),
            ("io.input", Field::Path(&mut self.io.input)),
            ("io.output", Field::Path(&mut self.io.output)),
            ("io.truth", Field::Path(&mut self.io.truth)),
            ("io.semantic", Field::Path(&mut self.io.semantic)),
        ]
    }

    pub fn keys() -> Vec<&'static str> {
        Config::default().fields().into_iter().map(|(k, _)| k).collect()
    }

    /// Sets one key from its textual value, validating the range.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut fields = self.fields();
        let Some((_, field)) = fields.iter_mut().find(|(k, _)| *k == key) else {
            return Err(CliError::Range {
                key: key.into(),
                message: "unknown key".into(),
            });
        };
        let range = |message: String| CliError::Range {
            key: key.into(),
            message,
        };
        let number = |text: &str| -> Result<f64> {
            let v: f64 = text.trim().parse().map_err(|_| range(format!("expected a number, got {text:?}")))?;
            if !v.is_finite() {
                return Err(range(format!("{v} is not finite")));
            }
            Ok(v)
        };
        let list = |text: &str, n: usize| -> Result<Vec<f64>> {
            let parts: Vec<&str> = text.split(',').collect();
            if parts.len() != n {
                return Err(range(format!("expected {n} comma-separated numbers, got {text:?}")));
            }
            parts.into_iter().map(number).collect()
        };
        let integer = |text: &str| -> Result<u64> {
            text.parse().map_err(|_| range(format!("expected a non-negative integer, got {text:?}")))
        };

        match field {
            Field::F64(slot, lo, hi) => {
                let v = number(value)?;
                let above = match *lo {
                    Incl(b) => v >= b,
                    Excl(b) => v > b,
                    Open => true,
                };
                let below = match *hi {
                    Incl(b) => v <= b,
                    Excl(b) => v < b,
                    Open => true,
                };
                if !(above && below) {
                    return Err(range(format!(
                        "{v} outside {}, {}",
                        lo.describe(true),
                        hi.describe(false)
                    )));
                }
                **slot = v;
            }
            Field::Usize(slot, lo, hi) => {
                let v = integer(value)?;
                if v < *lo as u64 || v > *hi as u64 {
                    return Err(range(format!("{v} outside [{lo}, {hi}]")));
                }
                **slot = v as usize;
            }
            Field::U64(slot) => **slot = integer(value)?,
            Field::Bool(slot) => {
                **slot = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(range(format!("expected true or false, got {value:?}"))),
                }
            }
            Field::Name(slot) => {
                if value != "classical" {
                    return Err(range(format!("unknown predictor {value:?}; available: classical")));
                }
                **slot = value.into();
            }
            Field::Path(slot) => **slot = (!value.is_empty()).then(|| PathBuf::from(value)),
            Field::Pair(slot) => {
                let v = list(value, 2)?;
                **slot = [v[0], v[1]];
            }
            Field::Triple(slot, lo, hi) => {
                let v = list(value, 3)?;
                if let Some(bad) = v.iter().find(|x| **x < *lo || **x > *hi) {
                    return Err(range(format!("{bad} outside [{lo}, {hi}]")));
                }
                **slot = [v[0], v[1], v[2]];
            }
            Field::Bootstrap(slot) => {
                **slot = Bootstrap::parse(value)
                    .ok_or_else(|| range(format!("expected first-frame or none, got {value:?}")))?;
            }
            Field::Shape(slot) => {
                **slot = match value {
                    "portrait" => Shape::Portrait,
                    "disc" => Shape::Disc,
                    _ => return Err(range(format!("expected portrait or disc, got {value:?}"))),
                }
            }
            Field::GridK(slot) => {
                let v = integer(value)?;
                if v > 1024 {
                    return Err(range(format!("{v} outside [0, 1024]")));
                }
                **slot = (v > 0).then_some(v as usize);
            }
        }
        Ok(())
    }

    /// Checks relations between keys that single-key ranges cannot express.
    pub fn validate(&self) -> Result<()> {
        let c = &self.classical;
        if c.band_lo >= c.band_hi {
            return Err(CliError::Range {
                key: "band.lo".into(),
                message: format!("must be below band.hi ({} >= {})", c.band_lo, c.band_hi),
            });
        }
        if self.prm.flaw.lo >= self.prm.flaw.hi {
            return Err(CliError::Range {
                key: "prm.flaw_lo".into(),
                message: format!("must be below prm.flaw_hi ({} >= {})", self.prm.flaw.lo, self.prm.flaw.hi),
            });
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut config = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_error = |message: String| CliError::Parse {
                origin: origin.into(),
                line: n + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_error(format!("expected `key = value`, got {line:?}")))?;
            let key = key.trim();
            if !Self::keys().contains(&key) {
                return Err(parse_error(format!("unknown key {key:?}")));
            }
            config.set(key, value.trim()).map_err(|e| match e {
                CliError::Range { key, message } => CliError::Range {
                    key,
                    message: format!("{message} ({origin}:{})", n + 1),
                },
                other => other,
            })?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Every key with its effective value, in a form [`Config::parse`] reads back.
    pub fn save(&self) -> String {
        let mut copy = self.clone();
        let mut out = String::from("# effective configuration\n");
        for (key, field) in copy.fields() {
            let value = match field {
                Field::F64(v, ..) => v.to_string(),
                Field::Usize(v, ..) => v.to_string(),
                Field::U64(v) => v.to_string(),
                Field::Bool(v) => v.to_string(),
                Field::Name(v) => v.clone(),
                Field::Path(v) => v.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
                Field::Pair(v) => format!("{}, {}", v[0], v[1]),
                Field::Triple(v, ..) => format!("{}, {}, {}", v[0], v[1], v[2]),
                Field::Bootstrap(v) => v.as_str().into(),
                Field::Shape(v) => v.as_str().into(),
                Field::GridK(v) => v.unwrap_or(0).to_string(),
            };
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            classical: self.classical,
            prm: PrmParams {
                detail: self.classical.detail,
                ..self.prm
            },
            ofd: self.ofd_enabled.then_some(self.ofd),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::parse("", "empty").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.prm.xi, 0.01);
        assert_eq!(c.prm.cap, 0.15);
        assert_eq!(c.loss_epsilon, 1e-6);
    }

    #[test]
    fn range_error_names_key() {
        let err = Config::parse("prm.xi = 2.0", "t").unwrap_err();
        match err {
            CliError::Range { key, .. } => assert_eq!(key, "prm.xi"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = Config::parse("# c\nprm.xi = 0.1\nprm.bogus = 1\n", "cfg").unwrap_err();
        match err {
            CliError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(Config::parse("no equals sign", "cfg"), Err(CliError::Parse { line: 1, .. })));
    }

    #[test]
    fn save_round_trips() {
        let mut c = Config::default();
        c.set("prm.xi", "0.0123456789").unwrap();
        c.set("synth.fg_color", "0.1, 0.2, 0.3").unwrap();
        c.set("semantic.bootstrap", "none").unwrap();
        c.set("prm.force_k", "8").unwrap();
        c.set("io.output", "/tmp/out dir").unwrap();
        c.set("ofd.enabled", "false").unwrap();
        c.set("synth.drift_rotation", "-0.001").unwrap();
        let again = Config::parse(&c.save(), "echo").unwrap();
        assert_eq!(again, c);
        assert_eq!(Config::parse(&Config::default().save(), "d").unwrap(), Config::default());
    }

    #[test]
    fn cross_key_check() {
        assert!(matches!(
            Config::parse("band.lo = 0.9\nband.hi = 0.5", "t"),
            Err(CliError::Range { key, .. }) if key == "band.lo"
        ));
    }

    #[test]
    fn bad_values() {
        for text in ["prm.halo = -1", "ofd.enabled = yes", "synth.fg_color = 1, 2", "predictor.name = learned", "prm.cap = nan"] {
            assert!(matches!(Config::parse(text, "t"), Err(CliError::Range { .. })), "{text}");
        }
    }
}
