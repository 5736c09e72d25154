//! Built-in synthetic scenes with queryable ground truth.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::glyphs::{Glyph, GLYPH_SIZE};
use super::{GroundTruth, GtObject, Scene, SyntheticScene};
use crate::error::{Error, Result};
use crate::geom::BBox;
use crate::spike::DEFAULT_TICK_NS;

#[derive(Debug, Clone, PartialEq)]
pub struct UniformScene {
    pub width: u32,
    pub height: u32,
    pub duration: u64,
    pub radiance: f64,
}

impl UniformScene {
    pub fn new(width: u32, height: u32, duration: u64, radiance: f64) -> Self {
        UniformScene {
            width,
            height,
            duration,
            radiance,
        }
    }
}

impl Scene for UniformScene {
    fn width(&self) -> u32 {
        self.width
    }
    fn height(&self) -> u32 {
        self.height
    }
    fn duration_ticks(&self) -> u64 {
        self.duration
    }
    fn radiance(&self, _x: u32, _y: u32, _t: u64) -> f64 {
        self.radiance
    }
}

impl GroundTruth for UniformScene {
    fn objects_at(&self, _t: u64) -> Vec<GtObject> {
        Vec::new()
    }
}

/// Static scene with an arbitrary per-pixel radiance map.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelsScene {
    pub width: u32,
    pub height: u32,
    pub duration: u64,
    levels: Vec<f64>,
}

impl LevelsScene {
    pub fn from_fn(
        width: u32,
        height: u32,
        duration: u64,
        f: impl Fn(u32, u32) -> f64,
    ) -> Self {
        let levels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y).max(0.0))
            .collect();
        LevelsScene {
            width,
            height,
            duration,
            levels,
        }
    }

    /// Left half at `left`, right half at `right`.
    pub fn split(width: u32, height: u32, duration: u64, left: f64, right: f64) -> Self {
        LevelsScene::from_fn(width, height, duration, |x, _| {
            if x < width / 2 {
                left
            } else {
                right
            }
        })
    }
}

impl Scene for LevelsScene {
    fn width(&self) -> u32 {
        self.width
    }
    fn height(&self) -> u32 {
        self.height
    }
    fn duration_ticks(&self) -> u64 {
        self.duration
    }
    fn radiance(&self, x: u32, y: u32, _t: u64) -> f64 {
        self.levels[y as usize * self.width as usize + x as usize]
    }
}

impl GroundTruth for LevelsScene {
    fn objects_at(&self, _t: u64) -> Vec<GtObject> {
        Vec::new()
    }
}

/// Full-height vertical bar sliding along +x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovingBar {
    pub width: u32,
    pub height: u32,
    pub duration: u64,
    /// Left edge position at tick 0, in pixels.
    pub x0: f64,
    pub speed: f64,
    pub bar_width: f64,
    pub bright: f64,
    pub dark: f64,
}

pub fn scene_moving_bar(
    width: u32,
    height: u32,
    duration: u64,
    speed_px_per_tick: f64,
    bar_width: f64,
    bright: f64,
    dark: f64,
) -> MovingBar {
    MovingBar {
        width,
        height,
        duration,
        x0: 0.0,
        speed: speed_px_per_tick,
        bar_width,
        bright,
        dark,
    }
}

impl MovingBar {
    pub fn left_edge(&self, t: u64) -> f64 {
        self.x0 + self.speed * t as f64
    }

    pub fn covers(&self, x: u32, t: u64) -> bool {
        let left = self.left_edge(t);
        let cx = x as f64 + 0.5;
        cx >= left && cx < left + self.bar_width
    }
}

impl Scene for MovingBar {
    fn width(&self) -> u32 {
        self.width
    }
    fn height(&self) -> u32 {
        self.height
    }
    fn duration_ticks(&self) -> u64 {
        self.duration
    }
    fn radiance(&self, x: u32, _y: u32, t: u64) -> f64 {
        if self.covers(x, t) {
            self.bright
        } else {
            self.dark
        }
    }
}

impl GroundTruth for MovingBar {
    fn objects_at(&self, t: u64) -> Vec<GtObject> {
        let covered: Vec<u32> = (0..self.width).filter(|&x| self.covers(x, t)).collect();
        match (covered.first(), covered.last()) {
            (Some(&lo), Some(&hi)) => vec![GtObject {
                id: 0,
                bbox: BBox::new(lo as i64, 0, hi as i64, self.height as i64 - 1),
                label: None,
            }],
            _ => Vec::new(),
        }
    }
}

/// Ball dropped under constant acceleration that comes to rest on a floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FallingBall {
    pub width: u32,
    pub height: u32,
    pub duration: u64,
    pub radius: f64,
    pub x: f64,
    pub y0: f64,
    /// Initial downward velocity, px/tick.
    pub vy0: f64,
    /// Downward acceleration, px/tick^2.
    pub gravity: f64,
    /// Row of the floor surface; the ball rests with its bottom on it.
    pub floor_y: f64,
    pub bright: f64,
    pub dark: f64,
}

pub fn scene_falling_ball(
    width: u32,
    height: u32,
    duration: u64,
    radius: f64,
    gravity: f64,
) -> FallingBall {
    FallingBall {
        width,
        height,
        duration,
        radius,
        x: width as f64 / 2.0,
        y0: radius + 1.0,
        vy0: 0.0,
        gravity,
        floor_y: height as f64,
        bright: 200.0,
        dark: 15.0,
    }
}

impl FallingBall {
    /// First (fractional) tick at which the ball touches the floor.
    pub fn landing_tick(&self) -> f64 {
        let drop = self.floor_y - self.radius - self.y0;
        if drop <= 0.0 {
            return 0.0;
        }
        if self.gravity == 0.0 {
            return if self.vy0 > 0.0 { drop / self.vy0 } else { f64::INFINITY };
        }
        (-self.vy0 + (self.vy0 * self.vy0 + 2.0 * self.gravity * drop).sqrt()) / self.gravity
    }

    pub fn center_y(&self, t: u64) -> f64 {
        let t = t as f64;
        let y = self.y0 + self.vy0 * t + 0.5 * self.gravity * t * t;
        y.min(self.floor_y - self.radius)
    }

    fn inside(&self, x: u32, y: u32, t: u64) -> bool {
        let dx = x as f64 + 0.5 - self.x;
        let dy = y as f64 + 0.5 - self.center_y(t);
        dx * dx + dy * dy < self.radius * self.radius
    }
}

impl Scene for FallingBall {
    fn width(&self) -> u32 {
        self.width
    }
    fn height(&self) -> u32 {
        self.height
    }
    fn duration_ticks(&self) -> u64 {
        self.duration
    }
    fn radiance(&self, x: u32, y: u32, t: u64) -> f64 {
        if self.inside(x, y, t) {
            self.bright
        } else {
            self.dark
        }
    }
}

impl GroundTruth for FallingBall {
    fn objects_at(&self, t: u64) -> Vec<GtObject> {
        let cy = self.center_y(t);
        let r = self.radius.ceil() as i64 + 1;
        let (cx, cyi) = (self.x.floor() as i64, cy.floor() as i64);
        let mut bbox: Option<BBox> = None;
        for y in (cyi - r).max(0)..=(cyi + r).min(self.height as i64 - 1) {
            for x in (cx - r).max(0)..=(cx + r).min(self.width as i64 - 1) {
                if self.inside(x as u32, y as u32, t) {
                    bbox.get_or_insert(BBox::point(x, y)).include(x, y);
                }
            }
        }
        bbox.map(|bbox| GtObject {
            id: 0,
            bbox,
            label: None,
        })
        .into_iter()
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub w: f64,
    pub h: f64,
    /// Top-left corner at tick 0.
    pub x0: f64,
    pub y0: f64,
    pub vx: f64,
    pub vy: f64,
    pub radiance: f64,
}

impl BoxSpec {
    fn origin(&self, t: u64) -> (f64, f64) {
        (
            self.x0 + self.vx * t as f64,
            self.y0 + self.vy * t as f64,
        )
    }

    fn covers(&self, x: u32, y: u32, t: u64) -> bool {
        let (ox, oy) = self.origin(t);
        let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
        cx >= ox && cx < ox + self.w && cy >= oy && cy < oy + self.h
    }
}

/// Rectangles translating at constant velocity over a dark ground.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovingBoxes {
    pub width: u32,
    pub height: u32,
    pub duration: u64,
    pub dark: f64,
    pub boxes: Vec<BoxSpec>,
}

impl MovingBoxes {
    /// Two `size`-pixel boxes in separate horizontal lanes, crossing the
    /// frame in opposite directions at `speed` px/tick.
    ///
    /// Each box sits just outside the frame until it enters at tick `enter`;
    /// the scene lasts until the boxes reach the opposite side 4 px from
    /// the border.
    pub fn two_lanes(width: u32, height: u32, size: f64, speed: f64, enter: u64) -> Self {
        let travel = (width as f64 - 8.0 - size) / speed;
        let lead = speed * enter as f64;
        let lane = |y0: f64, x0: f64, vx: f64| BoxSpec {
            w: size,
            h: size,
            x0,
            y0: y0.round(),
            vx,
            vy: 0.0,
            radiance: 200.0,
        };
        MovingBoxes {
            width,
            height,
            duration: enter + travel.floor() as u64,
            dark: 15.0,
            boxes: vec![
                lane(height as f64 * 0.25 - size / 2.0, 4.0 - lead, speed),
                lane(
                    height as f64 * 0.75 - size / 2.0,
                    width as f64 - 4.0 - size + lead,
                    -speed,
                ),
            ],
        }
    }

    /// First tick at which every box lies wholly inside the frame.
    pub fn all_inside_from(&self) -> Option<u64> {
        (0..self.duration).find(|&t| {
            self.boxes.iter().all(|b| {
                let (ox, oy) = b.origin(t);
                ox >= 0.0
                    && oy >= 0.0
                    && ox + b.w <= self.width as f64
                    && oy + b.h <= self.height as f64
            })
        })
    }
}

impl Scene for MovingBoxes {
    fn width(&self) -> u32 {
        self.width
    }
    fn height(&self) -> u32 {
        self.height
    }
    fn duration_ticks(&self) -> u64 {
        self.duration
    }
    fn radiance(&self, x: u32, y: u32, t: u64) -> f64 {
        self.boxes
            .iter()
            .find(|b| b.covers(x, y, t))
            .map_or(self.dark, |b| b.radiance)
    }
}

impl GroundTruth for MovingBoxes {
    fn objects_at(&self, t: u64) -> Vec<GtObject> {
        self.boxes
            .iter()
            .enumerate()
            .filter_map(|(id, b)| {
                let (ox, oy) = b.origin(t);
                // pixel centers inside [o, o + size)
                let x_min = (ox - 0.5).ceil() as i64;
                let y_min = (oy - 0.5).ceil() as i64;
                let x_max = (ox + b.w - 0.5).ceil() as i64 - 1;
                let y_max = (oy + b.h - 0.5).ceil() as i64 - 1;
                if x_max < x_min || y_max < y_min {
                    return None;
                }
                BBox::new(x_min, y_min, x_max, y_max)
                    .clip(self.width, self.height)
                    .map(|bbox| GtObject {
                        id: id as u32,
                        bbox,
                        label: None,
                    })
            })
            .collect()
    }
}

/// Rotating disc carrying bright characters on its face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotatingDisc {
    pub width: u32,
    pub height: u32,
    pub duration: u64,
    pub tick_ns: u64,
    pub glyphs: String,
    pub rpm: f64,
    pub radius_px: f64,
    pub center: (f64, f64),
    /// Distance of each character's center from the disc center.
    pub glyph_radius_px: f64,
    /// Pixels per bitmap cell.
    pub glyph_scale: f64,
    /// Disc angle at tick 0, in radians.
    pub phase: f64,
    pub ground: f64,
    pub disc: f64,
    pub bright: f64,
}

impl Default for RotatingDisc {
    fn default() -> Self {
        RotatingDisc {
            width: 96,
            height: 96,
            duration: 1000,
            tick_ns: DEFAULT_TICK_NS,
            glyphs: "PKU".into(),
            rpm: 2400.0,
            radius_px: 46.0,
            center: (48.0, 48.0),
            glyph_radius_px: 30.0,
            glyph_scale: 1.0,
            phase: 0.0,
            ground: 12.0,
            disc: 24.0,
            bright: 220.0,
        }
    }
}

pub fn scene_rotating_disc(
    chars: &str,
    rpm: f64,
    radius_px: f64,
    center: (f64, f64),
) -> Result<RotatingDisc> {
    let disc = RotatingDisc {
        glyphs: chars.into(),
        rpm,
        radius_px,
        center,
        glyph_radius_px: radius_px * 0.65,
        ..RotatingDisc::default()
    };
    disc.validate()?;
    Ok(disc)
}

impl RotatingDisc {
    pub fn validate(&self) -> Result<()> {
        if !(self.rpm > 0.0) {
            return Err(Error::Argument(format!("rpm must be positive, got {}", self.rpm)));
        }
        if self.glyphs.is_empty() {
            return Err(Error::Argument("disc needs at least one character".into()));
        }
        if let Some(c) = self.glyphs.chars().find(|&c| Glyph::get(c).is_none()) {
            return Err(Error::Argument(format!("no bitmap for character {c:?}")));
        }
        let (cx, cy) = self.center;
        let r = self.radius_px;
        if !(r > 0.0)
            || cx - r < 0.0
            || cy - r < 0.0
            || cx + r > self.width as f64
            || cy + r > self.height as f64
        {
            return Err(Error::range(
                "disc radius",
                format!(
                    "radius {r} at ({cx}, {cy}) does not fit {}x{}",
                    self.width, self.height
                ),
            ));
        }
        if self.glyph_radius_px + self.glyph_half_diagonal() > r {
            return Err(Error::range(
                "glyph radius",
                format!(
                    "characters at radius {} overflow disc radius {r}",
                    self.glyph_radius_px
                ),
            ));
        }
        Ok(())
    }

    fn glyph_half_diagonal(&self) -> f64 {
        GLYPH_SIZE as f64 * self.glyph_scale * std::f64::consts::FRAC_1_SQRT_2
    }

    /// Ticks per revolution.
    pub fn period_ticks(&self) -> f64 {
        60.0e9 / (self.rpm * self.tick_ns as f64)
    }

    /// Disc angle at tick `t`, in `[0, 2*pi)` plus the initial phase.
    pub fn angle(&self, t: u64) -> f64 {
        let revs = (t as f64 * self.tick_ns as f64 * self.rpm) / 60.0e9;
        2.0 * PI * revs.fract() + self.phase
    }

    fn chars(&self) -> Vec<Glyph> {
        self.glyphs.chars().filter_map(Glyph::get).collect()
    }

    /// Center of character `i` at tick `t`, in pixel coordinates.
    pub fn glyph_center(&self, i: usize, t: u64) -> (f64, f64) {
        let n = self.glyphs.chars().count() as f64;
        let a = self.angle(t) + 2.0 * PI * i as f64 / n - PI / 2.0;
        (
            self.center.0 + self.glyph_radius_px * a.cos(),
            self.center.1 + self.glyph_radius_px * a.sin(),
        )
    }

    fn glyph_lit_at(&self, glyph: &Glyph, gc: (f64, f64), angle: f64, px: f64, py: f64) -> bool {
        let (dx, dy) = (px - gc.0, py - gc.1);
        let (s, c) = angle.sin_cos();
        // rotate back into the character's upright frame
        let lx = c * dx + s * dy;
        let ly = -s * dx + c * dy;
        let half = GLYPH_SIZE as f64 / 2.0;
        let col = (lx / self.glyph_scale + half).floor() as i64;
        let row = (ly / self.glyph_scale + half).floor() as i64;
        glyph.lit(col, row)
    }

    fn lit_glyph(&self, x: u32, y: u32, t: u64) -> Option<usize> {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let (dx, dy) = (px - self.center.0, py - self.center.1);
        let dist = (dx * dx + dy * dy).sqrt();
        if (dist - self.glyph_radius_px).abs() > self.glyph_half_diagonal() + 1.0 {
            return None;
        }
        let angle = self.angle(t);
        self.glyphs.chars().filter_map(Glyph::get).enumerate().find_map(|(i, g)| {
            let gc = self.glyph_center(i, t);
            self.glyph_lit_at(&g, gc, angle, px, py).then_some(i)
        })
    }

    /// Pixel bounding box of character `i` as rendered at tick `t`.
    pub fn glyph_bbox(&self, i: usize, t: u64) -> Option<BBox> {
        let glyph = *self.chars().get(i)?;
        let angle = self.angle(t);
        let gc = self.glyph_center(i, t);
        let reach = self.glyph_half_diagonal().ceil() as i64 + 1;
        let (gx, gy) = (gc.0.floor() as i64, gc.1.floor() as i64);
        let mut bbox: Option<BBox> = None;
        for y in (gy - reach).max(0)..=(gy + reach).min(self.height as i64 - 1) {
            for x in (gx - reach).max(0)..=(gx + reach).min(self.width as i64 - 1) {
                if self.glyph_lit_at(&glyph, gc, angle, x as f64 + 0.5, y as f64 + 0.5) {
                    bbox.get_or_insert(BBox::point(x, y)).include(x, y);
                }
            }
        }
        bbox
    }
}

impl Scene for RotatingDisc {
    fn width(&self) -> u32 {
        self.width
    }
    fn height(&self) -> u32 {
        self.height
    }
    fn duration_ticks(&self) -> u64 {
        self.duration
    }
    fn radiance(&self, x: u32, y: u32, t: u64) -> f64 {
        if self.lit_glyph(x, y, t).is_some() {
            return self.bright;
        }
        let dx = x as f64 + 0.5 - self.center.0;
        let dy = y as f64 + 0.5 - self.center.1;
        if dx * dx + dy * dy <= self.radius_px * self.radius_px {
            self.disc
        } else {
            self.ground
        }
    }
}

impl GroundTruth for RotatingDisc {
    fn objects_at(&self, t: u64) -> Vec<GtObject> {
        (0..self.glyphs.chars().count())
            .filter_map(|i| {
                self.glyph_bbox(i, t).map(|bbox| GtObject {
                    id: i as u32,
                    bbox,
                    label: Some(i),
                })
            })
            .collect()
    }
}

/// Linear speed of a point at `radius_m` on a disc spinning at `rpm`, in m/s.
pub fn linear_velocity(rpm: f64, radius_m: f64) -> Result<f64> {
    if !(rpm > 0.0) || !(radius_m > 0.0) {
        return Err(Error::Argument(format!(
            "rpm and radius must be positive, got {rpm} and {radius_m}"
        )));
    }
    Ok(rpm / 60.0 * 2.0 * PI * radius_m)
}

/// Declarative scene description used by config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SceneSpec {
    Uniform {
        width: u32,
        height: u32,
        duration: u64,
        radiance: f64,
    },
    RotatingDisc(RotatingDisc),
    MovingBar(MovingBar),
    FallingBall(FallingBall),
    MovingBoxes(MovingBoxes),
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec::RotatingDisc(RotatingDisc::default())
    }
}

impl SceneSpec {
    pub fn build(&self) -> Result<Box<dyn SyntheticScene>> {
        Ok(match self {
            SceneSpec::Uniform {
                width,
                height,
                duration,
                radiance,
            } => {
                if !(*radiance >= 0.0) {
                    return Err(Error::Argument("radiance must be nonnegative".into()));
                }
                Box::new(UniformScene::new(*width, *height, *duration, *radiance))
            }
            SceneSpec::RotatingDisc(d) => {
                d.validate()?;
                Box::new(d.clone())
            }
            SceneSpec::MovingBar(b) => Box::new(b.clone()),
            SceneSpec::FallingBall(b) => Box::new(b.clone()),
            SceneSpec::MovingBoxes(b) => Box::new(b.clone()),
        })
    }

    pub fn dims(&self) -> (u32, u32) {
        match self {
            SceneSpec::Uniform { width, height, .. } => (*width, *height),
            SceneSpec::RotatingDisc(d) => (d.width, d.height),
            SceneSpec::MovingBar(b) => (b.width, b.height),
            SceneSpec::FallingBall(b) => (b.width, b.height),
            SceneSpec::MovingBoxes(b) => (b.width, b.height),
        }
    }
}
