//! Coordinates, room description and surface discretization.
//!
//! Axes: `x` spans the room width, `y` its length and `z` its height, with the
//! origin at a floor corner. Azimuth is measured counterclockwise from `+x` in
//! the horizontal plane; elevation is measured from the horizontal plane,
//! positive upwards.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid room: {0}")]
    InvalidRoom(String),
    #[error("element size {size} m must be positive and at most the smallest face dimension {limit} m")]
    InvalidElementSize { size: f64, limit: f64 },
    #[error("grid step {step} m must be positive and at most the smaller floor dimension {limit} m")]
    InvalidGridStep { step: f64, limit: f64 },
    #[error("invalid discretization policy: {0}")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const UP: Vec3 = Vec3::new(0.0, 0.0, 1.0);
    pub const DOWN: Vec3 = Vec3::new(0.0, 0.0, -1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction. Returns the zero vector unchanged.
    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        if n == 0.0 {
            self
        } else {
            self * (1.0 / n)
        }
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    /// Horizontal (x-y plane) distance.
    pub fn horizontal_distance(self, other: Vec3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Unit direction for an azimuth/elevation pair given in degrees.
///
/// Azimuth wraps modulo 360. Elevations of exactly ±90 return the vertical
/// axis irrespective of azimuth.
pub fn az_el_to_direction(az_deg: f64, el_deg: f64) -> Vec3 {
    if el_deg == 90.0 {
        return Vec3::UP;
    }
    if el_deg == -90.0 {
        return Vec3::DOWN;
    }
    let az = az_deg.rem_euclid(360.0).to_radians();
    let el = el_deg.to_radians();
    let (sin_el, cos_el) = el.sin_cos();
    let (sin_az, cos_az) = az.sin_cos();
    Vec3::new(cos_el * cos_az, cos_el * sin_az, sin_el).normalized()
}

/// An empty rectangular room.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Room {
    pub width_x: f64,
    pub length_y: f64,
    pub height_z: f64,
    pub reflectivity_ceiling: f64,
    pub reflectivity_walls: f64,
    pub reflectivity_floor: f64,
    /// Height of the communication floor (receiver plane).
    pub comm_floor_z: f64,
}

impl Room {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let dims = [
            ("width_x", self.width_x),
            ("length_y", self.length_y),
            ("height_z", self.height_z),
        ];
        for (name, v) in dims {
            if !(v.is_finite() && v > 0.0) {
                return Err(GeometryError::InvalidRoom(format!("{name} must be > 0, got {v}")));
            }
        }
        let rhos = [
            ("reflectivity_ceiling", self.reflectivity_ceiling),
            ("reflectivity_walls", self.reflectivity_walls),
            ("reflectivity_floor", self.reflectivity_floor),
        ];
        for (name, v) in rhos {
            if !(0.0..=1.0).contains(&v) {
                return Err(GeometryError::InvalidRoom(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        if !(self.comm_floor_z >= 0.0 && self.comm_floor_z < self.height_z) {
            return Err(GeometryError::InvalidRoom(format!(
                "comm_floor_z must lie in [0, height_z), got {}",
                self.comm_floor_z
            )));
        }
        Ok(())
    }

    pub fn centre(&self) -> Vec3 {
        Vec3::new(self.width_x / 2.0, self.length_y / 2.0, self.height_z / 2.0)
    }

    pub fn smallest_dimension(&self) -> f64 {
        self.width_x.min(self.length_y).min(self.height_z)
    }

    /// Same room with every surface made perfectly absorbing.
    pub fn blackened(mut self) -> Room {
        self.reflectivity_ceiling = 0.0;
        self.reflectivity_walls = 0.0;
        self.reflectivity_floor = 0.0;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Face {
    Floor,
    Ceiling,
    /// Wall in the plane `x = 0`.
    WallX0,
    /// Wall in the plane `x = width`.
    WallX1,
    /// Wall in the plane `y = 0`.
    WallY0,
    /// Wall in the plane `y = length`.
    WallY1,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::Floor,
        Face::Ceiling,
        Face::WallX0,
        Face::WallX1,
        Face::WallY0,
        Face::WallY1,
    ];

    /// Inward-facing unit normal.
    pub fn normal(self) -> Vec3 {
        match self {
            Face::Floor => Vec3::UP,
            Face::Ceiling => Vec3::DOWN,
            Face::WallX0 => Vec3::new(1.0, 0.0, 0.0),
            Face::WallX1 => Vec3::new(-1.0, 0.0, 0.0),
            Face::WallY0 => Vec3::new(0.0, 1.0, 0.0),
            Face::WallY1 => Vec3::new(0.0, -1.0, 0.0),
        }
    }

    pub fn reflectivity(self, room: &Room) -> f64 {
        match self {
            Face::Floor => room.reflectivity_floor,
            Face::Ceiling => room.reflectivity_ceiling,
            _ => room.reflectivity_walls,
        }
    }

    /// The two in-plane extents of the face, in the order they are tiled.
    pub fn extents(self, room: &Room) -> (f64, f64) {
        match self {
            Face::Floor | Face::Ceiling => (room.width_x, room.length_y),
            Face::WallX0 | Face::WallX1 => (room.length_y, room.height_z),
            Face::WallY0 | Face::WallY1 => (room.width_x, room.height_z),
        }
    }

    pub fn area(self, room: &Room) -> f64 {
        let (a, b) = self.extents(room);
        a * b
    }

    fn point(self, room: &Room, u: f64, v: f64) -> Vec3 {
        match self {
            Face::Floor => Vec3::new(u, v, 0.0),
            Face::Ceiling => Vec3::new(u, v, room.height_z),
            Face::WallX0 => Vec3::new(0.0, u, v),
            Face::WallX1 => Vec3::new(room.width_x, u, v),
            Face::WallY0 => Vec3::new(u, 0.0, v),
            Face::WallY1 => Vec3::new(u, room.length_y, v),
        }
    }
}

/// A small patch of a room surface acting as a Lambertian re-emitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceElement {
    pub centre: Vec3,
    /// Unit normal pointing into the room.
    pub normal: Vec3,
    pub area: f64,
    pub reflectivity: f64,
    pub emission_order: f64,
    /// Diagonal of the patch; pairs of patches closer than this are not coupled.
    pub diagonal: f64,
    pub face: Face,
}

/// Element edge lengths for the two reflection orders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizationPolicy {
    pub first_order_element: f64,
    pub second_order_element: f64,
}

impl DiscretizationPolicy {
    pub fn new(first_order_element: f64, second_order_element: f64) -> Result<Self, GeometryError> {
        let p = DiscretizationPolicy {
            first_order_element,
            second_order_element,
        };
        p.validate()?;
        Ok(p)
    }

    /// Both orders tiled with the same element size.
    pub fn uniform(element: f64) -> Result<Self, GeometryError> {
        Self::new(element, element)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.first_order_element > 0.0 && self.second_order_element > 0.0) {
            return Err(GeometryError::InvalidPolicy(
                "element sizes must be positive".into(),
            ));
        }
        if self.second_order_element < self.first_order_element {
            return Err(GeometryError::InvalidPolicy(format!(
                "second_order_element ({}) must be >= first_order_element ({})",
                self.second_order_element, self.first_order_element
            )));
        }
        Ok(())
    }
}

/// Splits `[0, len)` into tiles of `size`, the final one possibly shorter.
/// Returns `(centre, width)` pairs.
fn tile_axis(len: f64, size: f64) -> Vec<(f64, f64)> {
    let full = (len / size + 1e-9).floor() as usize;
    let mut tiles: Vec<(f64, f64)> = (0..full)
        .map(|i| ((i as f64 + 0.5) * size, size))
        .collect();
    let rest = len - full as f64 * size;
    if rest > 1e-9 * len {
        tiles.push((len - rest / 2.0, rest));
    }
    tiles
}

/// Tiles all six faces of the room into square elements of `element_size`.
///
/// Faces appear in [`Face::ALL`] order; within a face elements are row-major
/// over the face's second extent then first. When the size does not divide a
/// face the last row and column hold smaller elements.
pub fn discretize_room(room: &Room, element_size: f64) -> Result<Vec<SurfaceElement>, GeometryError> {
    room.validate()?;
    let limit = room.smallest_dimension();
    if !(element_size > 0.0 && element_size <= limit * (1.0 + 1e-12)) {
        return Err(GeometryError::InvalidElementSize {
            size: element_size,
            limit,
        });
    }
    let mut out = Vec::new();
    for face in Face::ALL {
        let (lu, lv) = face.extents(room);
        let us = tile_axis(lu, element_size);
        let vs = tile_axis(lv, element_size);
        let rho = face.reflectivity(room);
        let normal = face.normal();
        for &(v, dv) in &vs {
            for &(u, du) in &us {
                out.push(SurfaceElement {
                    centre: face.point(room, u, v),
                    normal,
                    area: du * dv,
                    reflectivity: rho,
                    emission_order: 1.0,
                    diagonal: du.hypot(dv),
                    face,
                });
            }
        }
    }
    Ok(out)
}

/// Receiver lattice on the communication floor.
#[derive(Debug, Clone, PartialEq)]
pub struct CfGrid {
    pub nx: usize,
    pub ny: usize,
    pub step: f64,
    /// Row-major: index `j * nx + i` holds the point at column `i`, row `j`.
    pub points: Vec<Vec3>,
}

impl CfGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Index of the lattice point closest to `(x, y)`.
    pub fn nearest(&self, x: f64, y: f64) -> usize {
        let i = ((x / self.step - 0.5).round().max(0.0) as usize).min(self.nx - 1);
        let j = ((y / self.step - 0.5).round().max(0.0) as usize).min(self.ny - 1);
        self.index(i, j)
    }
}

/// Evaluation lattice on the plane `z = comm_floor_z`, inset from the walls by
/// half a step.
pub fn cf_grid(room: &Room, step: f64) -> Result<CfGrid, GeometryError> {
    room.validate()?;
    let limit = room.width_x.min(room.length_y);
    if !(step > 0.0 && step <= limit * (1.0 + 1e-12)) {
        return Err(GeometryError::InvalidGridStep { step, limit });
    }
    let count = |len: f64| ((len / step + 1e-9).floor() as usize).max(1);
    let nx = count(room.width_x);
    let ny = count(room.length_y);
    let mut points = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            points.push(Vec3::new(
                (i as f64 + 0.5) * step,
                (j as f64 + 0.5) * step,
                room.comm_floor_z,
            ));
        }
    }
    Ok(CfGrid {
        nx,
        ny,
        step,
        points,
    })
}
