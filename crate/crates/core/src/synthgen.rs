//! Seeded synthetic multi-view action corpus: filled shapes following a
//! per-class motion program, seen through per-view affine warps.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorio::{read_frame, write_frame, Frame, PnmFormat, SequenceMeta, VideoSequence};

/// Number of distinct motion programs; classes beyond this would repeat.
pub const MAX_CLASSES: usize = 6;

const BACKGROUND: [f64; 3] = [0.2, 0.2, 0.2];
const SHAPE_COLOR: [f64; 3] = [0.9, 0.6, 0.3];
const BASE_HALF_SIZE: f64 = 0.12;
// Width/height bias per motion program; the sliding rectangle is a little
// wider and the bobbing one a little taller than the subject's own aspect.
const CLASS_ASPECT: [f64; 3] = [1.2, 1.0, 1.0 / 1.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub subjects: usize,
    pub views: usize,
    pub frames_per_video: usize,
    pub frame_side: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_classes: 3,
            subjects: 8,
            views: 3,
            frames_per_video: 16,
            frame_side: 64,
            noise_sigma: 0.02,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_classes", self.num_classes),
            ("subjects", self.subjects),
            ("views", self.views),
            ("frames_per_video", self.frames_per_video),
            ("frame_side", self.frame_side),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be positive")));
        }
        if self.num_classes > MAX_CLASSES {
            return Err(Error::invalid(format!("at most {MAX_CLASSES} classes are supported")));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Linear map about the frame center, `q = A (p - c) + c`, in unit
/// coordinates with x to the right and y down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewWarp {
    pub a: [[f64; 2]; 2],
}

impl ViewWarp {
    pub const IDENTITY: ViewWarp = ViewWarp {
        a: [[1.0, 0.0], [0.0, 1.0]],
    };

    /// View 1 is the identity, 2 a horizontal shear, 3 a shrink; views from
    /// 4 on mirror one of the first three.
    pub fn for_view(view_id: u32) -> ViewWarp {
        let base = match (view_id.max(1) - 1) % 3 {
            0 => ViewWarp::IDENTITY,
            1 => ViewWarp {
                a: [[1.0, 0.2], [0.0, 1.0]],
            },
            _ => ViewWarp {
                a: [[0.85, 0.0], [0.0, 0.85]],
            },
        };
        if view_id >= 4 {
            ViewWarp {
                a: [[-base.a[0][0], -base.a[0][1]], base.a[1]],
            }
        } else {
            base
        }
    }

    pub fn apply(&self, p: (f64, f64)) -> (f64, f64) {
        let (x, y) = (p.0 - 0.5, p.1 - 0.5);
        (
            self.a[0][0] * x + self.a[0][1] * y + 0.5,
            self.a[1][0] * x + self.a[1][1] * y + 0.5,
        )
    }

    pub fn invert(&self, q: (f64, f64)) -> (f64, f64) {
        let [[a, b], [c, d]] = self.a;
        let det = a * d - b * c;
        let (x, y) = (q.0 - 0.5, q.1 - 0.5);
        ((d * x - b * y) / det + 0.5, (a * y - c * x) / det + 0.5)
    }
}

/// Per-subject perturbations shared by every class and view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectTraits {
    pub size: f64,
    pub speed: f64,
    pub aspect: f64,
}

impl SubjectTraits {
    pub fn draw(seed: u64, subject_id: u32) -> SubjectTraits {
        let mut rng = stream_rng(seed, 1, u64::from(subject_id));
        SubjectTraits {
            size: rng.random_range(0.85..1.15),
            speed: rng.random_range(0.8..1.2),
            aspect: rng.random_range(0.8..1.25),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeKind {
    Rectangle,
    Ellipse,
}

/// Shape pose at one instant, in canonical (unwarped) unit coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeState {
    pub kind: ShapeKind,
    pub cx: f64,
    pub cy: f64,
    pub half_w: f64,
    pub half_h: f64,
}

impl ShapeState {
    pub fn contains(&self, p: (f64, f64)) -> bool {
        let dx = (p.0 - self.cx) / self.half_w;
        let dy = (p.1 - self.cy) / self.half_h;
        match self.kind {
            ShapeKind::Rectangle => dx.abs() <= 1.0 && dy.abs() <= 1.0,
            ShapeKind::Ellipse => dx * dx + dy * dy <= 1.0,
        }
    }
}

/// Motion program of `class_id` at frame `t` (0-based) of `n`. The second
/// value is true when the trajectory had to be clamped into the frame.
///
/// Class 0 slides a rectangle left to right, class 1 slides a pulsing
/// ellipse the same way and class 2 bobs a rectangle vertically. Classes
/// 3 to 5 replay those programs backwards in time.
pub fn shape_state(class_id: u32, traits: &SubjectTraits, t: usize, n: usize) -> (ShapeState, bool) {
    let mut tau = if n > 1 { t as f64 / (n - 1) as f64 } else { 0.0 };
    if class_id >= 3 {
        tau = 1.0 - tau;
    }
    let half = BASE_HALF_SIZE * traits.size;
    let aspect = traits.aspect * CLASS_ASPECT[(class_id % 3) as usize];
    let mut s = ShapeState {
        kind: ShapeKind::Rectangle,
        cx: 0.5,
        cy: 0.5,
        half_w: half * aspect.sqrt(),
        half_h: half / aspect.sqrt(),
    };
    match class_id % 3 {
        0 => s.cx = 0.5 + (tau - 0.5) * 0.5 * traits.speed,
        1 => {
            let pulse = 1.0 + 0.15 * (2.0 * std::f64::consts::PI * tau).sin();
            s.kind = ShapeKind::Ellipse;
            s.cx = 0.5 + (tau - 0.5) * 0.5 * traits.speed;
            s.half_w *= pulse;
            s.half_h *= pulse;
        }
        _ => s.cy = 0.5 - 0.25 * traits.speed * (1.5 * std::f64::consts::PI * tau).sin(),
    }
    let cx = s.cx.clamp(s.half_w.min(0.5), (1.0 - s.half_w).max(0.5));
    let cy = s.cy.clamp(s.half_h.min(0.5), (1.0 - s.half_h).max(0.5));
    let clamped = cx != s.cx || cy != s.cy;
    s.cx = cx;
    s.cy = cy;
    (s, clamped)
}

fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 48) | index);
    rng
}

fn pixel_center(i: usize, side: usize) -> f64 {
    (i as f64 + 0.5) / side as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub id: String,
    pub rgb: VideoSequence,
    pub depth: VideoSequence,
}

impl SynthSample {
    pub fn meta(&self) -> SequenceMeta {
        self.rgb.meta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    /// Sorted by id.
    pub samples: Vec<SynthSample>,
    pub warnings: Vec<String>,
}

pub fn sequence_id(meta: &SequenceMeta) -> String {
    format!("c{:02}_s{:02}_v{:02}", meta.class_id, meta.subject_id, meta.view_id)
}

/// Renders one paired sequence. RGB frames get Gaussian noise; depth frames
/// stay binary and get isolated background speckles with probability
/// `noise_sigma` per pixel.
pub fn render_sequence(cfg: &SynthConfig, meta: SequenceMeta) -> Result<(SynthSample, Vec<String>)> {
    let traits = SubjectTraits::draw(cfg.seed, meta.subject_id);
    let warp = ViewWarp::for_view(meta.view_id);
    let index = (u64::from(meta.class_id) << 32) | (u64::from(meta.subject_id) << 16) | u64::from(meta.view_id);
    let mut rng = stream_rng(cfg.seed, 2, index);
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let side = cfg.frame_side;
    let n = cfg.frames_per_video;
    let id = sequence_id(&meta);
    let mut warnings = Vec::new();
    let mut rgb_frames = Vec::with_capacity(n);
    let mut depth_frames = Vec::with_capacity(n);
    for t in 0..n {
        let (shape, clamped) = shape_state(meta.class_id, &traits, t, n);
        if clamped {
            warnings.push(format!("{id}: frame {} trajectory clamped to the frame", t + 1));
        }
        let mut inside = vec![false; side * side];
        for y in 0..side {
            for x in 0..side {
                inside[y * side + x] = shape.contains(warp.invert((pixel_center(x, side), pixel_center(y, side))));
            }
        }
        let mut rgb = vec![0.0; 3 * side * side];
        for (c, plane) in rgb.chunks_mut(side * side).enumerate() {
            for (v, &on) in plane.iter_mut().zip(&inside) {
                let base = if on { SHAPE_COLOR[c] } else { BACKGROUND[c] };
                let jitter = if cfg.noise_sigma > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                *v = (base + jitter).clamp(0.0, 1.0);
            }
        }
        let depth: Vec<f64> = inside
            .iter()
            .map(|&on| {
                let speckle = cfg.noise_sigma > 0.0 && rng.random_bool(cfg.noise_sigma.min(1.0));
                if on || speckle {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        rgb_frames.push(Frame::new(side, side, 3, rgb)?);
        depth_frames.push(Frame::new(side, side, 1, depth)?);
    }
    let sample = SynthSample {
        id,
        rgb: VideoSequence::new(rgb_frames, meta)?,
        depth: VideoSequence::new(depth_frames, meta)?,
    };
    Ok((sample, warnings))
}

/// Every (class, subject, view) combination; class ids start at 0, subject
/// and view ids at 1.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut metas = Vec::new();
    for class_id in 0..cfg.num_classes as u32 {
        for subject_id in 1..=cfg.subjects as u32 {
            for view_id in 1..=cfg.views as u32 {
                metas.push(SequenceMeta {
                    class_id,
                    subject_id,
                    view_id,
                });
            }
        }
    }
    let rendered = metas
        .par_iter()
        .map(|m| render_sequence(cfg, *m))
        .collect::<Result<Vec<_>>>()?;
    let mut samples = Vec::with_capacity(rendered.len());
    let mut warnings = Vec::new();
    for (s, w) in rendered {
        samples.push(s);
        warnings.extend(w);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    samples.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(SynthCorpus {
        config: cfg.clone(),
        samples,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub class_id: u32,
    pub subject_id: u32,
    pub view_id: u32,
    pub frames: usize,
    /// Directories relative to the manifest file.
    pub rgb: String,
    pub depth: String,
}

impl ManifestEntry {
    pub fn meta(&self) -> SequenceMeta {
        SequenceMeta {
            class_id: self.class_id,
            subject_id: self.subject_id,
            view_id: self.view_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub num_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
    pub sequences: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for e in &self.sequences {
            if !ids.insert(e.id.as_str()) {
                return Err(Error::invalid(format!("duplicate sequence id {:?}", e.id)));
            }
            if e.class_id as usize >= self.num_classes {
                return Err(Error::invalid(format!("{}: class {} out of range", e.id, e.class_id)));
            }
        }
        Ok(())
    }

    /// `(id, meta)` pairs in manifest order, as taken by `make_splits`.
    pub fn metadata(&self) -> Vec<(String, SequenceMeta)> {
        self.sequences.iter().map(|e| (e.id.clone(), e.meta())).collect()
    }

    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.sequences.iter().find(|e| e.id == id)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Manifest> {
        let m: Manifest = serde_json::from_slice(&fs::read(path)?)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

pub fn corpus_manifest(corpus: &SynthCorpus) -> Manifest {
    Manifest {
        num_classes: corpus.config.num_classes,
        synth: Some(corpus.config.clone()),
        sequences: corpus
            .samples
            .iter()
            .map(|s| {
                let m = s.meta();
                ManifestEntry {
                    id: s.id.clone(),
                    class_id: m.class_id,
                    subject_id: m.subject_id,
                    view_id: m.view_id,
                    frames: s.rgb.len(),
                    rgb: format!("rgb/{}", s.id),
                    depth: format!("depth/{}", s.id),
                }
            })
            .collect(),
    }
}

fn frame_name(t: usize, fmt: PnmFormat) -> String {
    format!("frame_{:04}.{}", t + 1, fmt.extension())
}

/// Writes frames as 8-bit PPM/PGM files plus `manifest.json` under `dir`.
pub fn write_corpus(corpus: &SynthCorpus, dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    let manifest = corpus_manifest(corpus);
    corpus
        .samples
        .par_iter()
        .zip(&manifest.sequences)
        .try_for_each(|(s, e)| -> Result<()> {
            for (video, sub, fmt) in [
                (&s.rgb, &e.rgb, PnmFormat::Pixmap),
                (&s.depth, &e.depth, PnmFormat::Graymap),
            ] {
                let out = dir.join(sub);
                fs::create_dir_all(&out)?;
                for (t, f) in video.frames().iter().enumerate() {
                    write_frame(f, out.join(frame_name(t, fmt)), fmt)?;
                }
            }
            Ok(())
        })?;
    fs::write(dir.join(MANIFEST_FILE), manifest.to_json()?)?;
    Ok(manifest)
}

/// Loads the RGB and depth videos of one manifest entry.
pub fn load_entry(manifest_dir: impl AsRef<Path>, entry: &ManifestEntry) -> Result<(VideoSequence, VideoSequence)> {
    let base = manifest_dir.as_ref();
    let load = |sub: &str, fmt: PnmFormat| -> Result<VideoSequence> {
        let frames = (0..entry.frames)
            .map(|t| read_frame(base.join(sub).join(frame_name(t, fmt)), fmt))
            .collect::<Result<Vec<_>>>()?;
        VideoSequence::new(frames, entry.meta())
    };
    Ok((
        load(&entry.rgb, PnmFormat::Pixmap)?,
        load(&entry.depth, PnmFormat::Graymap)?,
    ))
}
