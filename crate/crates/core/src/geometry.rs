//! Room, LED and photodetector geometry.
//!
//! Coordinates are in meters with the origin at a floor corner of the room,
//! `z` pointing up. Arrays are laid out on horizontal planes.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Returns the unit vector along `self`, or a geometry error for a zero
    /// or non-finite vector.
    pub fn normalized(self) -> Result<Vec3> {
        let n = self.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::Geometry(format!("cannot normalize {self:?}")));
        }
        Ok(self * (1.0 / n))
    }

    /// Rotation by `angle` radians about the vertical line through `pivot`.
    pub fn rotate_about_vertical(self, pivot: Vec3, angle: f64) -> Vec3 {
        let (s, c) = angle.sin_cos();
        let dx = self.x - pivot.x;
        let dy = self.y - pivot.y;
        Vec3::new(pivot.x + c * dx - s * dy, pivot.y + s * dx + c * dy, self.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

/// Room dimensions and the heights of the LED and detector planes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomConfig {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub tx_height: f64,
    pub rx_height: f64,
}

impl Default for RoomConfig {
    fn default() -> Self {
        Self {
            length: 5.0,
            width: 5.0,
            height: 3.5,
            tx_height: 3.0,
            rx_height: 0.8,
        }
    }
}

impl RoomConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("room.length", self.length),
            ("room.width", self.width),
            ("room.height", self.height),
            ("room.tx_height", self.tx_height),
            ("room.rx_height", self.rx_height),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(name, format!("must be positive, got {v}")));
            }
        }
        if self.rx_height >= self.tx_height {
            return Err(Error::validation(
                "room.rx_height",
                "detector plane must lie below the LED plane",
            ));
        }
        if self.tx_height > self.height {
            return Err(Error::validation(
                "room.tx_height",
                "LED plane cannot be above the ceiling",
            ));
        }
        Ok(())
    }

    /// Center of the floor plan at height `z`.
    pub fn center_at(&self, z: f64) -> Vec3 {
        Vec3::new(self.length / 2.0, self.width / 2.0, z)
    }

    fn contains_footprint(&self, p: Vec3) -> bool {
        const SLACK: f64 = 1e-9;
        p.x >= -SLACK && p.x <= self.length + SLACK && p.y >= -SLACK && p.y <= self.width + SLACK
    }
}

/// A Lambertian source (LED).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emitter {
    pub position: Vec3,
    pub normal: Vec3,
}

impl Emitter {
    pub const DOWN: Vec3 = Vec3::new(0.0, 0.0, -1.0);

    /// Ceiling-mounted LED facing straight down.
    pub fn facing_down(position: Vec3) -> Self {
        Self {
            position,
            normal: Self::DOWN,
        }
    }
}

/// A photodetector with its optical front end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detector {
    pub position: Vec3,
    pub normal: Vec3,
    /// Active area in m².
    pub area: f64,
    /// Field-of-view half angle in radians.
    pub fov: f64,
    /// Responsivity in A/W.
    pub responsivity: f64,
}

impl Detector {
    pub const UP: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub fn facing_up(position: Vec3, area: f64, fov: f64, responsivity: f64) -> Result<Self> {
        let d = Self {
            position,
            normal: Self::UP,
            area,
            fov,
            responsivity,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.area.is_finite() && self.area > 0.0) {
            return Err(Error::validation("receiver.area", "must be positive"));
        }
        if !(self.fov > 0.0 && self.fov <= std::f64::consts::FRAC_PI_2) {
            return Err(Error::validation("receiver.fov", "must lie in (0°, 90°]"));
        }
        if !(self.responsivity.is_finite() && self.responsivity > 0.0) {
            return Err(Error::validation("receiver.responsivity", "must be positive"));
        }
        if (self.normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::validation("receiver.normal", "must be a unit vector"));
        }
        Ok(())
    }
}

/// A rectangular array of points on a horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    /// Center of the array; `center.z` is the plane height.
    pub center: Vec3,
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Smallest square grid holding at least `n` points.
    pub fn square_for(n: usize, spacing: f64, center: Vec3) -> Self {
        let side = (1..).find(|s| s * s >= n).unwrap_or(1);
        Self {
            rows: side,
            cols: side,
            spacing,
            center,
        }
    }
}

/// Positions of a grid in row-major order starting from the (min x, min y)
/// corner; `x` varies fastest.
pub fn grid_positions(spec: &GridSpec, room: &RoomConfig) -> Result<Vec<Vec3>> {
    if spec.rows == 0 || spec.cols == 0 {
        return Err(Error::Config("grid must have at least one row and column".into()));
    }
    if !(spec.spacing.is_finite() && spec.spacing > 0.0) {
        return Err(Error::Config(format!("grid spacing must be positive, got {}", spec.spacing)));
    }
    if !spec.center.is_finite() {
        return Err(Error::Config("grid center must be finite".into()));
    }
    let x0 = (spec.cols as f64 - 1.0) / 2.0;
    let y0 = (spec.rows as f64 - 1.0) / 2.0;
    let points: Vec<Vec3> = (0..spec.rows)
        .flat_map(|r| (0..spec.cols).map(move |c| (r, c)))
        .map(|(r, c)| {
            Vec3::new(
                spec.center.x + (c as f64 - x0) * spec.spacing,
                spec.center.y + (r as f64 - y0) * spec.spacing,
                spec.center.z,
            )
        })
        .collect();
    if let Some(p) = points.iter().find(|p| !room.contains_footprint(**p)) {
        return Err(Error::Config(format!(
            "{}x{} grid with spacing {} m exceeds the room footprint at ({:.3}, {:.3})",
            spec.rows, spec.cols, spec.spacing, p.x, p.y
        )));
    }
    Ok(points)
}

/// Emergence cosine, incidence cosine and distance of a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkAngles {
    pub cos_phi: f64,
    pub cos_theta: f64,
    pub distance: f64,
}

pub fn link_angles(e: &Emitter, d: &Detector) -> Result<LinkAngles> {
    let v = d.position - e.position;
    let distance = v.norm();
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::Geometry(format!(
            "emitter and detector coincide at {:?}",
            e.position
        )));
    }
    Ok(LinkAngles {
        cos_phi: e.normal.dot(v) / distance,
        cos_theta: -d.normal.dot(v) / distance,
        distance,
    })
}
