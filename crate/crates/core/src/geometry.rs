//! Small fixed-size vector type and the triangle primitives built on it.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// A 3D vector or point, in meters when used as a position.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

/// Positions and directions share one representation.
pub type Point3<T> = Vec3<T>;

impl<T: Real> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn from_f64(v: [f64; 3]) -> Self {
        Self::new(T::lit(v[0]), T::lit(v[1]), T::lit(v[2]))
    }

    #[inline]
    pub fn to_f64(self) -> [f64; 3] {
        [self.x.as_f64(), self.y.as_f64(), self.z.as_f64()]
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction, or `None` for a zero vector.
    #[inline]
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self / n)
        } else {
            None
        }
    }

    #[inline]
    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    #[inline]
    pub fn component_min(self, o: Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    #[inline]
    pub fn component_max(self, o: Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    /// Unsigned angle to `o` in radians, in `[0, π]`.
    pub fn angle_to(self, o: Self) -> T {
        let denom = self.norm() * o.norm();
        if denom <= T::zero() {
            return T::zero();
        }
        let c = (self.dot(o) / denom).max(-T::one()).min(T::one());
        c.acos()
    }
}

impl<T: Real> Index<usize> for Vec3<T> {
    type Output = T;

    #[inline]
    fn index(&self, axis: usize) -> &T {
        match axis {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("axis {axis} out of range"),
        }
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn div(self, s: T) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb<T> {
    pub min: Point3<T>,
    pub max: Point3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn new(min: Point3<T>, max: Point3<T>) -> Self {
        Self { min, max }
    }

    /// The empty box; growing it by any point yields that point.
    pub fn empty() -> Self {
        let inf = T::infinity();
        Self {
            min: Vec3::new(inf, inf, inf),
            max: Vec3::new(-inf, -inf, -inf),
        }
    }

    pub fn from_points<I: IntoIterator<Item = Point3<T>>>(points: I) -> Self {
        points.into_iter().fold(Self::empty(), |b, p| b.grown(p))
    }

    #[inline]
    pub fn grown(self, p: Point3<T>) -> Self {
        Self {
            min: self.min.component_min(p),
            max: self.max.component_max(p),
        }
    }

    #[inline]
    pub fn union(self, o: Self) -> Self {
        Self {
            min: self.min.component_min(o.min),
            max: self.max.component_max(o.max),
        }
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|a| self.min[a] <= self.max[a])
    }

    pub fn extent(&self) -> Vec3<T> {
        self.max - self.min
    }

    pub fn center(&self) -> Point3<T> {
        (self.min + self.max) * T::lit(0.5)
    }

    /// Closed containment test (boundary counts as inside).
    #[inline]
    pub fn contains(&self, p: Point3<T>) -> bool {
        (0..3).all(|a| self.min[a] <= p[a] && p[a] <= self.max[a])
    }

    pub fn longest_axis(&self) -> usize {
        let e = self.extent();
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }

    /// Squared distance from `p` to the box (zero inside).
    #[inline]
    pub fn distance_squared(&self, p: Point3<T>) -> T {
        let mut d = T::zero();
        for a in 0..3 {
            let v = if p[a] < self.min[a] {
                self.min[a] - p[a]
            } else if p[a] > self.max[a] {
                p[a] - self.max[a]
            } else {
                T::zero()
            };
            d = d + v * v;
        }
        d
    }

    /// Slab test for the segment `p + t·d`, `t ∈ [0, 1]`.
    pub fn intersects_segment(&self, p: Point3<T>, d: Vec3<T>) -> bool {
        let mut t0 = T::zero();
        let mut t1 = T::one();
        for a in 0..3 {
            if d[a] == T::zero() {
                if p[a] < self.min[a] || p[a] > self.max[a] {
                    return false;
                }
                continue;
            }
            let inv = T::one() / d[a];
            let mut ta = (self.min[a] - p[a]) * inv;
            let mut tb = (self.max[a] - p[a]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
        true
    }

    /// Box grown by `pad` on every side.
    pub fn padded(self, pad: T) -> Self {
        let v = Vec3::new(pad, pad, pad);
        Self {
            min: self.min - v,
            max: self.max + v,
        }
    }
}

/// Returns `(area, unit normal)` of triangle `abc`, normal oriented by winding.
/// `None` when the triangle is degenerate.
pub fn triangle_area_normal<T: Real>(
    a: Point3<T>,
    b: Point3<T>,
    c: Point3<T>,
) -> Option<(T, Vec3<T>)> {
    let cr = (b - a).cross(c - a);
    let len = cr.norm();
    if !(len > T::zero()) || !len.is_finite() {
        return None;
    }
    Some((len * T::lit(0.5), cr / len))
}

/// Closest point to `p` on triangle `abc` (region classification on the
/// barycentric Voronoi regions of the triangle).
pub fn closest_point_on_triangle<T: Real>(
    p: Point3<T>,
    a: Point3<T>,
    b: Point3<T>,
    c: Point3<T>,
) -> Point3<T> {
    let zero = T::zero();
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= zero && d2 <= zero {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= zero && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= zero && d1 >= zero && d3 <= zero {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= zero && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= zero && d2 >= zero && d6 <= zero {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= zero && (d4 - d3) >= zero && (d5 - d6) >= zero {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = T::one() / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[inline]
pub fn point_triangle_distance<T: Real>(
    p: Point3<T>,
    a: Point3<T>,
    b: Point3<T>,
    c: Point3<T>,
) -> T {
    p.distance(closest_point_on_triangle(p, a, b, c))
}

/// Parameter `t` at which the line `origin + t·dir` crosses triangle `abc`
/// (Möller–Trumbore). Lines parallel to the triangle plane report no hit.
pub fn line_triangle_param<T: Real>(
    origin: Point3<T>,
    dir: Vec3<T>,
    a: Point3<T>,
    b: Point3<T>,
    c: Point3<T>,
) -> Option<T> {
    let e1 = b - a;
    let e2 = c - a;
    let h = dir.cross(e2);
    let det = e1.dot(h);
    let scale = e1.norm() * e2.norm() * dir.norm();
    if det.abs() <= T::epsilon() * T::lit(16.0) * scale {
        return None;
    }
    let inv = T::one() / det;
    let s = origin - a;
    let u = s.dot(h) * inv;
    if u < T::zero() || u > T::one() {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < T::zero() || u + v > T::one() {
        return None;
    }
    Some(e2.dot(q) * inv)
}
