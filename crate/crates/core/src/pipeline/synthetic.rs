//! Synthetic six-band scenes with exact land-cover truth: two forest types,
//! a wide river and thin 1-2 pixel river branches.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{default_class_names, BandRaster, ClassMap, MultispectralScene, Rect, Region};
use crate::rng;

pub const DEEP_FOREST: usize = 0;
pub const LIGHT_FOREST: usize = 1;
pub const RIVER: usize = 2;

pub const DEFAULT_BAND_IDS: [&str; 6] = ["B1", "B2", "B3", "B4", "B5", "B7"];

/// Mean reflectance of each class in each band (rows follow class order).
pub const DEFAULT_CLASS_MEANS: [[f64; 6]; 3] = [
    [0.25, 0.30, 0.22, 0.55, 0.35, 0.20],
    [0.40, 0.48, 0.42, 0.70, 0.55, 0.40],
    [0.35, 0.38, 0.30, 0.12, 0.10, 0.08],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectFill {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub class: usize,
}

/// Polyline painted with a given stroke width; a pixel belongs to the
/// stroke when its center lies within `width / 2` of the line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stroke {
    pub points: Vec<[f64; 2]>,
    pub width: f64,
    pub class: usize,
}

/// Class geometry of a synthetic scene. Rectangles and then strokes are
/// painted in order over `background`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticLayout {
    pub width: usize,
    pub height: usize,
    pub band_ids: Vec<String>,
    pub class_names: Vec<String>,
    /// `class_means[class][band]`.
    pub class_means: Vec<Vec<f64>>,
    pub background: usize,
    #[serde(default)]
    pub rects: Vec<RectFill>,
    #[serde(default)]
    pub strokes: Vec<Stroke>,
    /// Pure-class rectangles suitable as classifier training regions.
    #[serde(default)]
    pub training: Vec<RectFill>,
}

impl SyntheticLayout {
    /// Deep forest on the left, light forest on the right, a meandering wide
    /// river, and thin branches of width 1 and 2 whose placement depends on
    /// `seed`.
    pub fn standard(width: usize, height: usize, seed: u64) -> Result<Self> {
        if width < 16 || height < 16 {
            return Err(Error::TooSmall(format!(
                "standard layout needs at least 16x16, got {width}x{height}"
            )));
        }
        let mut r = rng::seeded(rng::derive_seed(seed, 0x1a70));
        let (wf, hf) = (width as f64, height as f64);
        let split = (0.45 * wf).round() as usize;
        let mut rects = vec![RectFill {
            x: split,
            y: 0,
            w: width - split,
            h: height,
            class: LIGHT_FOREST,
        }];
        // A light clearing inside the deep forest and a deep stand inside the light one.
        let cw = (0.12 * wf).max(2.0) as usize;
        let ch = (0.12 * hf).max(2.0) as usize;
        let cx = r.random_range(1..(split - cw).max(2));
        let cy = r.random_range(1..(height - ch - 1));
        rects.push(RectFill {
            x: cx,
            y: cy,
            w: cw,
            h: ch,
            class: LIGHT_FOREST,
        });

        let river_width = (0.07 * wf).max(4.0);
        let phase = r.random_range(0.0..std::f64::consts::TAU);
        let center =
            |y: f64| 0.68 * wf + 0.05 * wf * (phase + 3.0 * std::f64::consts::PI * y / hf).sin();
        let main: Vec<[f64; 2]> = (0..=32)
            .map(|i| {
                let y = hf * i as f64 / 32.0;
                [center(y), y]
            })
            .collect();
        let mut strokes = vec![Stroke {
            points: main,
            width: river_width,
            class: RIVER,
        }];

        let branches = ((height as f64 / 24.0).round() as usize).clamp(3, 12);
        for b in 0..branches {
            let y0 = hf * (b as f64 + 0.5 + r.random_range(-0.25..0.25)) / branches as f64;
            let x0 = center(y0);
            let leftward = b % 3 != 2;
            let len = if leftward {
                x0 - r.random_range(0.05..0.2) * wf
            } else {
                wf - x0
            };
            let angle: f64 = r.random_range(-0.5..0.5);
            let dir = if leftward { -1.0 } else { 1.0 };
            let mut points = Vec::new();
            let wiggle = r.random_range(0.0..std::f64::consts::TAU);
            for i in 0..=16 {
                let t = i as f64 / 16.0;
                let x = x0 + dir * t * len;
                let y = y0 + angle * t * len + 1.5 * (wiggle + 6.0 * t).sin();
                points.push([x, y]);
            }
            strokes.push(Stroke {
                points,
                width: if b % 2 == 0 { 1.0 } else { 2.0 },
                class: RIVER,
            });
        }

        let tw = (0.1 * wf).max(2.0) as usize;
        let th = (0.2 * hf).max(2.0) as usize;
        let mut training = vec![
            RectFill {
                x: 1,
                y: 1,
                w: tw,
                h: th,
                class: DEEP_FOREST,
            },
            RectFill {
                x: width - tw - 1,
                y: height - th - 1,
                w: tw,
                h: th,
                class: LIGHT_FOREST,
            },
        ];
        // Short slabs along the wide river's centerline.
        let slab_w = ((river_width / 2.0) as usize).max(1);
        for i in 0..8 {
            let y = (i * height / 8) & !1;
            let x = (center(y as f64 + 1.0) - slab_w as f64 / 2.0)
                .round()
                .max(0.0) as usize;
            training.push(RectFill {
                x: x.min(width - slab_w),
                y,
                w: slab_w,
                h: 2,
                class: RIVER,
            });
        }
        Ok(Self {
            width,
            height,
            band_ids: DEFAULT_BAND_IDS.iter().map(|s| s.to_string()).collect(),
            class_names: default_class_names(),
            class_means: DEFAULT_CLASS_MEANS.iter().map(|m| m.to_vec()).collect(),
            background: DEEP_FOREST,
            rects,
            strokes,
            training,
        })
    }

    /// Three axis-aligned constant regions, no strokes. Region borders sit on
    /// even coordinates so every 2x2 block is pure.
    pub fn three_regions(width: usize, height: usize) -> Result<Self> {
        if width < 6 || height < 2 || !width.is_multiple_of(2) || !height.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "three-region layout needs even size >= 6x2, got {width}x{height}"
            )));
        }
        let third = (width / 3) & !1;
        let mut layout = Self::standard(16, 16, 0)?;
        layout.width = width;
        layout.height = height;
        layout.background = DEEP_FOREST;
        layout.rects = vec![
            RectFill {
                x: third,
                y: 0,
                w: third,
                h: height,
                class: LIGHT_FOREST,
            },
            RectFill {
                x: 2 * third,
                y: 0,
                w: width - 2 * third,
                h: height,
                class: RIVER,
            },
        ];
        layout.strokes.clear();
        layout.training = vec![
            RectFill {
                x: 0,
                y: 0,
                w: third,
                h: height,
                class: DEEP_FOREST,
            },
            RectFill {
                x: third,
                y: 0,
                w: third,
                h: height,
                class: LIGHT_FOREST,
            },
            RectFill {
                x: 2 * third,
                y: 0,
                w: width - 2 * third,
                h: height,
                class: RIVER,
            },
        ];
        Ok(layout)
    }

    fn validate(&self) -> Result<()> {
        let classes = self.class_names.len();
        let bad = |msg: String| Err(Error::InvalidArgument(format!("degenerate layout: {msg}")));
        if self.width == 0 || self.height == 0 {
            return bad(format!("{}x{} frame", self.width, self.height));
        }
        if self.band_ids.is_empty() {
            return bad("no bands".into());
        }
        if self.class_means.len() != classes
            || self
                .class_means
                .iter()
                .any(|m| m.len() != self.band_ids.len())
        {
            return bad(format!(
                "class means must be {classes} x {}",
                self.band_ids.len()
            ));
        }
        if self
            .class_means
            .iter()
            .flatten()
            .any(|v| !(0.0..=1.0).contains(v))
        {
            return bad("class means must lie in [0, 1]".into());
        }
        let classes_used = std::iter::once(self.background)
            .chain(self.rects.iter().map(|r| r.class))
            .chain(self.strokes.iter().map(|s| s.class))
            .chain(self.training.iter().map(|r| r.class));
        for c in classes_used {
            if c >= classes {
                return bad(format!("class index {c} out of range"));
            }
        }
        for r in self.rects.iter().chain(&self.training) {
            if r.w == 0 || r.h == 0 || r.x + r.w > self.width || r.y + r.h > self.height {
                return bad(format!("rectangle {r:?} outside the frame or empty"));
            }
        }
        for s in &self.strokes {
            if s.points.len() < 2
                || !(s.width > 0.0)
                || s.points.iter().flatten().any(|v| !v.is_finite())
            {
                return bad("stroke needs two finite points and positive width".into());
            }
        }
        Ok(())
    }

    /// Pixel-level truth labels.
    pub fn paint(&self) -> Result<ClassMap> {
        self.validate()?;
        let (w, h) = (self.width, self.height);
        let mut labels = vec![self.background; w * h];
        for r in &self.rects {
            for y in r.y..r.y + r.h {
                labels[y * w + r.x..y * w + r.x + r.w].fill(r.class);
            }
        }
        for s in &self.strokes {
            let half = s.width / 2.0;
            for seg in s.points.windows(2) {
                let (a, b) = (seg[0], seg[1]);
                let x_lo = (a[0].min(b[0]) - half).floor().max(0.0) as usize;
                let x_hi = ((a[0].max(b[0]) + half).ceil().max(0.0) as usize).min(w);
                let y_lo = (a[1].min(b[1]) - half).floor().max(0.0) as usize;
                let y_hi = ((a[1].max(b[1]) + half).ceil().max(0.0) as usize).min(h);
                for y in y_lo..y_hi {
                    for x in x_lo..x_hi {
                        if segment_distance([x as f64 + 0.5, y as f64 + 0.5], a, b) <= half {
                            labels[y * w + x] = s.class;
                        }
                    }
                }
            }
        }
        ClassMap::with_default_palette(w, h, labels)
    }

    pub fn training_regions(&self) -> Vec<Region> {
        self.training
            .iter()
            .map(|r| Region {
                rect: Rect {
                    x: r.x,
                    y: r.y,
                    w: r.w,
                    h: r.h,
                },
                class: r.class,
            })
            .collect()
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    ((p[0] - a[0] - t * dx).powi(2) + (p[1] - a[1] - t * dy).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub scene: MultispectralScene,
    /// Pixel-level labels.
    pub truth: ClassMap,
    pub training_regions: Vec<Region>,
}

/// Fills each pixel with its class signature plus Gaussian noise of
/// standard deviation `noise`, clamped to `[0, 1]` and stored at 8 bits.
pub fn make_synthetic_scene(
    layout: &SyntheticLayout,
    noise: f64,
    seed: u64,
) -> Result<SyntheticScene> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise level {noise} must be finite and >= 0"
        )));
    }
    let truth = layout.paint()?;
    let normal = Normal::new(0.0, noise).expect("validated noise level");
    let bands = layout
        .band_ids
        .iter()
        .enumerate()
        .map(|(b, id)| {
            let mut r = rng::seeded(rng::derive_seed(seed, b as u64 + 1));
            let bytes: Vec<u8> = truth
                .labels()
                .iter()
                .map(|&c| {
                    let v = layout.class_means[c][b]
                        + if noise > 0.0 {
                            normal.sample(&mut r)
                        } else {
                            0.0
                        };
                    (v.clamp(0.0, 1.0) * 255.0).round() as u8
                })
                .collect();
            BandRaster::from_u8(id.clone(), layout.width, layout.height, &bytes)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SyntheticScene {
        scene: MultispectralScene::new(bands)?,
        truth,
        training_regions: layout.training_regions(),
    })
}

/// Block labels of the pixel truth after `factor`-fold enlargement: each
/// pixel label is replicated `factor x factor`, then every 2x2 block takes
/// its majority class, ties going to the higher class index.
pub fn block_truth(pixel_truth: &ClassMap, factor: usize) -> Result<ClassMap> {
    if factor == 0 {
        return Err(Error::InvalidArgument("factor must be >= 1".into()));
    }
    let (w, h) = (
        pixel_truth.width() * factor / 2,
        pixel_truth.height() * factor / 2,
    );
    if w == 0 || h == 0 {
        return Err(Error::TooSmall("truth map has no 2x2 block".into()));
    }
    let classes = pixel_truth.palette().len();
    let mut labels = Vec::with_capacity(w * h);
    let mut counts = vec![0usize; classes];
    for by in 0..h {
        for bx in 0..w {
            counts.fill(0);
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                counts[pixel_truth.get((2 * bx + dx) / factor, (2 * by + dy) / factor)] += 1;
            }
            let best = (0..classes)
                .rev()
                .max_by_key(|&c| (counts[c], c))
                .expect("at least one class");
            labels.push(best);
        }
    }
    ClassMap::new(w, h, labels, pixel_truth.palette().to_vec())
}
