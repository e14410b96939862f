use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use image::{ExtendedColorType, ImageEncoder};

use ctrlforge::physics::{CameraSel, Image, RenderMode};
use ctrlforge::rlcore::Environment;
use ctrlforge::suite::{self, LoadOptions};

use crate::policy::{Policy, PolicyKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Ppm,
    Png,
}

impl FromStr for Format {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ppm" => Ok(Format::Ppm),
            "png" => Ok(Format::Png),
            _ => Err(anyhow!("unknown image format '{s}', expected ppm or png")),
        }
    }
}

impl Format {
    fn extension(self, mode: RenderMode) -> &'static str {
        match (self, mode) {
            (Format::Png, _) => "png",
            (Format::Ppm, RenderMode::Rgb) => "ppm",
            // single-channel maps are greymaps
            (Format::Ppm, _) => "pgm",
        }
    }
}

pub fn parse_mode(s: &str) -> Result<RenderMode> {
    match s {
        "rgb" => Ok(RenderMode::Rgb),
        "depth" => Ok(RenderMode::Depth),
        "segmentation" => Ok(RenderMode::Segmentation),
        _ => Err(anyhow!("unknown render mode '{s}', expected rgb, depth or segmentation")),
    }
}

/// `WxH`, e.g. `84x84`.
pub fn parse_size(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| anyhow!("size '{s}' is not of the form WxH"))?;
    let w: usize = w.trim().parse().with_context(|| format!("bad width in '{s}'"))?;
    let h: usize = h.trim().parse().with_context(|| format!("bad height in '{s}'"))?;
    if w == 0 || h == 0 {
        bail!("size '{s}' must be positive");
    }
    Ok((w, h))
}

/// `free`, a camera index or a camera name.
pub fn parse_camera(s: &str) -> CameraSel {
    match s {
        "free" | "-1" => CameraSel::Free,
        _ => s.parse::<usize>().map_or_else(|_| CameraSel::Name(s.to_string()), CameraSel::Index),
    }
}

#[derive(Clone, Debug)]
pub struct RenderJob {
    pub task: String,
    pub frames: usize,
    pub out: PathBuf,
    pub camera: CameraSel,
    pub size: (usize, usize),
    pub mode: RenderMode,
    pub format: Format,
    pub seed: u64,
    pub policy: PolicyKind,
}

/// Depth is written in millimetres, saturating at 65.535 m. Segmentation
/// maps hold geom index + 1 with 0 for background. Both are 16-bit greymaps.
fn save(img: &Image, format: Format, path: &Path) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let grey: Option<Vec<u16>> = match img {
        Image::Rgb(_) => None,
        Image::Depth(g) => Some(g.data.iter().map(|d| (d * 1000.0).round().clamp(0.0, 65535.0) as u16).collect()),
        Image::Segmentation(g) => Some(g.data.iter().map(|&i| (i + 1).clamp(0, 65535) as u16).collect()),
    };
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = std::io::BufWriter::new(file);
    let r: Result<()> = match (format, img.as_rgb(), grey) {
        (Format::Png, Some(rgb), _) => png(&mut out, &rgb.to_bytes(), w, h, ExtendedColorType::Rgb8),
        (Format::Png, None, Some(g)) => {
            // the encoder takes 16-bit samples in native byte order
            let bytes: Vec<u8> = g.iter().flat_map(|v| v.to_ne_bytes()).collect();
            png(&mut out, &bytes, w, h, ExtendedColorType::L16)
        }
        (Format::Ppm, Some(rgb), _) => {
            write!(out, "P6\n{w} {h}\n255\n")?;
            out.write_all(&rgb.to_bytes())?;
            Ok(())
        }
        (Format::Ppm, None, Some(g)) => {
            write!(out, "P5\n{w} {h}\n65535\n")?;
            let bytes: Vec<u8> = g.iter().flat_map(|v| v.to_be_bytes()).collect();
            out.write_all(&bytes)?;
            Ok(())
        }
        (_, None, None) => unreachable!("every mode is rgb or grey"),
    };
    r.and_then(|_| Ok(out.flush()?))
        .with_context(|| format!("writing {}", path.display()))
}

fn png(out: impl Write, bytes: &[u8], w: u32, h: u32, color: ExtendedColorType) -> Result<()> {
    image::codecs::png::PngEncoder::new(out).write_image(bytes, w, h, color)?;
    Ok(())
}

/// Renders the first `frames` control steps of an episode. Returns the
/// written paths.
pub fn render(job: &RenderJob) -> Result<Vec<PathBuf>> {
    if job.frames == 0 {
        bail!("--frames must be at least 1");
    }
    let mut env = suite::load_id(&job.task, &LoadOptions::seed(job.seed))?;
    let mut pi = Policy::new(job.policy, &env, job.seed)?;
    fs::create_dir_all(&job.out).with_context(|| format!("creating {}", job.out.display()))?;
    let mut ts = env.reset()?;
    let mut written = Vec::with_capacity(job.frames);
    for k in 0..job.frames {
        if k > 0 {
            ts = if ts.is_last() {
                env.reset()?
            } else {
                let a = pi.act(&env, &ts)?;
                env.step(&a)?
            };
        }
        let physics = env.physics_mut().expect("suite envs have physics");
        let img = physics.render(job.size.0, job.size.1, job.camera.clone(), job.mode)?;
        let path = job.out.join(format!("frame_{k:05}.{}", job.format.extension(job.mode)));
        save(&img, job.format, &path)?;
        written.push(path);
    }
    Ok(written)
}
