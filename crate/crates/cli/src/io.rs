//! PNG frame sequences, mattes and background-state dumps.
//!
//! Frames are `%06d.png`, numbered contiguously from `000001`. Everything is
//! written under a temporary name and renamed into place once complete.

use std::fs;
use std::path::{Path, PathBuf};

use bgmatte::brm::{render_background, BackgroundState};
use bgmatte::{AlphaMatte, Frame, Resolution, SemanticMap, VideoSequence};
use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};

use crate::error::{CliError, Result};

pub fn frame_name(index: usize) -> String {
    format!("{index:06}.png")
}

/// Paths of `000001.png ..= N` in `dir`. Fails on the first missing index.
pub fn list_sequence(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut indices = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(stem) = name.strip_suffix(".png") else { continue };
        if stem.len() == 6 && stem.bytes().all(|b| b.is_ascii_digit()) {
            indices.push(stem.parse::<usize>().expect("six digits"));
        }
    }
    indices.sort_unstable();
    if indices.is_empty() {
        return Err(CliError::Gap {
            dir: dir.display().to_string(),
            index: 1,
        });
    }
    for (i, &index) in indices.iter().enumerate() {
        if index != i + 1 {
            return Err(CliError::Gap {
                dir: dir.display().to_string(),
                index: i + 1,
            });
        }
    }
    Ok(indices.iter().map(|&i| dir.join(frame_name(i))).collect())
}

fn open(path: &Path) -> Result<DynamicImage> {
    image::open(path).map_err(|e| CliError::io(path, e))
}

fn describe(img: &DynamicImage) -> String {
    format!("{:?}", img.color())
}

/// Reads an 8-bit RGB frame, mapping samples to `[0, 1]` by `/255`.
pub fn read_frame(path: &Path, index: usize) -> Result<Frame> {
    let img = open(path)?;
    let DynamicImage::ImageRgb8(rgb) = img else {
        return Err(CliError::Format {
            path: path.display().to_string(),
            expected: "8-bit RGB",
            found: describe(&img),
        });
    };
    let (w, h) = rgb.dimensions();
    let data = rgb.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
    Ok(Frame::new(index, w as usize, h as usize, data)?)
}

pub fn read_sequence(dir: &Path) -> Result<VideoSequence> {
    let frames = list_sequence(dir)?
        .iter()
        .enumerate()
        .map(|(i, path)| read_frame(path, i + 1))
        .collect::<Result<Vec<_>>>()?;
    Ok(VideoSequence::new(frames)?)
}

/// Reads a single-channel map, 16-bit (`/65535`) or 8-bit (`/255`).
pub fn read_gray(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = match img {
        DynamicImage::ImageLuma16(g) => g.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
        DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        other => {
            return Err(CliError::Format {
                path: path.display().to_string(),
                expected: "grayscale",
                found: describe(&other),
            })
        }
    };
    Ok((w, h, values))
}

pub fn read_matte(path: &Path) -> Result<AlphaMatte> {
    let (w, h, values) = read_gray(path)?;
    Ok(AlphaMatte::new(w, h, values, Resolution::Full)?)
}

pub fn read_semantic(path: &Path) -> Result<SemanticMap> {
    let (w, h, values) = read_gray(path)?;
    Ok(SemanticMap::new(w, h, values)?)
}

fn quantize16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round_ties_even() as u16
}

fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8
}

/// Writes `img` to `path` through a temporary file in the same directory.
fn save_atomic(img: &DynamicImage, path: &Path) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::io(path, "not a file path"))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.partial"));
    img.save_with_format(&tmp, ImageFormat::Png).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn write_text_atomic(path: &Path, text: &str) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::io(path, "not a file path"))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.partial"));
    fs::write(&tmp, text).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// 16-bit grayscale, `round_ties_even(value * 65535)`.
pub fn write_matte(matte: &AlphaMatte, path: &Path) -> Result<()> {
    let (w, h) = matte.dims();
    let raw: Vec<u16> = matte.values().iter().map(|&v| quantize16(v)).collect();
    let buf = ImageBuffer::<Luma<u16>, _>::from_raw(w as u32, h as u32, raw).expect("buffer size");
    save_atomic(&DynamicImage::ImageLuma16(buf), path)
}

pub fn write_semantic(map: &SemanticMap, path: &Path) -> Result<()> {
    let (w, h) = map.dims();
    let raw: Vec<u16> = map.values().iter().map(|&v| quantize16(v)).collect();
    let buf = ImageBuffer::<Luma<u16>, _>::from_raw(w as u32, h as u32, raw).expect("buffer size");
    save_atomic(&DynamicImage::ImageLuma16(buf), path)
}

/// 8-bit RGB.
pub fn write_frame(frame: &Frame, path: &Path) -> Result<()> {
    let raw: Vec<u8> = frame.data().iter().map(|&v| quantize8(v)).collect();
    let buf = ImageBuffer::<Rgb<u8>, _>::from_raw(frame.width() as u32, frame.height() as u32, raw)
        .expect("buffer size");
    save_atomic(&DynamicImage::ImageRgb8(buf), path)
}

/// 16-bit RGB, for content that should survive a round trip more precisely.
pub fn write_frame16(frame: &Frame, path: &Path) -> Result<()> {
    let raw: Vec<u16> = frame.data().iter().map(|&v| quantize16(v)).collect();
    let buf = ImageBuffer::<Rgb<u16>, _>::from_raw(frame.width() as u32, frame.height() as u32, raw)
        .expect("buffer size");
    save_atomic(&DynamicImage::ImageRgb16(buf), path)
}

pub fn read_frame16(path: &Path) -> Result<Frame> {
    let img = open(path)?;
    let DynamicImage::ImageRgb16(rgb) = img else {
        return Err(CliError::Format {
            path: path.display().to_string(),
            expected: "16-bit RGB",
            found: describe(&img),
        });
    };
    let (w, h) = rgb.dimensions();
    let data = rgb.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect();
    Ok(Frame::new(0, w as usize, h as usize, data)?)
}

pub fn state_paths(dir: &Path, t: usize) -> (PathBuf, PathBuf) {
    (dir.join(format!("{t:06}_bgF.png")), dir.join(format!("{t:06}_bgM.png")))
}

/// `bgF` as 16-bit RGB (unrestored pixels black) and `bgM` as 8-bit `{0, 255}`.
pub fn write_state(state: &BackgroundState, dir: &Path, t: usize) -> Result<()> {
    let (f_path, m_path) = state_paths(dir, t);
    write_frame16(&render_background(state).frame, &f_path)?;
    let (w, h) = state.dims();
    let raw: Vec<u8> = state.mask().iter().map(|&m| if m == 1 { 255 } else { 0 }).collect();
    let buf = ImageBuffer::<Luma<u8>, _>::from_raw(w as u32, h as u32, raw).expect("buffer size");
    save_atomic(&DynamicImage::ImageLuma8(buf), &m_path)
}
