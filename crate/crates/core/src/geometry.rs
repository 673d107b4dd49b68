//! Planar geometry used by the simulator and the fitness metrics.
//!
//! Polygons are plain vertex rings (`&[Point]`), implicitly closed: the last
//! vertex connects back to the first.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ZERO: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Point> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, o: Point) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Point {
    fn sub_assign(&mut self, o: Point) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Point {
    type Output = Point;
    fn div(self, s: f64) -> Point {
        Point::new(self.x / s, self.y / s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Iterator over the closed edges `(v[i], v[i+1 mod n])` of a ring.
pub fn edges(ring: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    let n = ring.len();
    (0..n).map(move |i| (ring[i], ring[(i + 1) % n]))
}

pub fn perimeter(ring: &[Point]) -> f64 {
    if ring.len() < 2 {
        return 0.0;
    }
    edges(ring).map(|(a, b)| a.dist(b)).sum()
}

/// Shoelace area, positive for counter-clockwise rings.
pub fn signed_area(ring: &[Point]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    0.5 * edges(ring).map(|(a, b)| a.cross(b)).sum::<f64>()
}

/// Area centroid; falls back to the vertex mean for degenerate rings.
pub fn centroid(ring: &[Point]) -> Point {
    let n = ring.len();
    if n == 0 {
        return Point::ZERO;
    }
    // Shift to the first vertex to limit cancellation.
    let o = ring[0];
    let mut a2 = 0.0;
    let mut c = Point::ZERO;
    for (p, q) in edges(ring) {
        let (p, q) = (p - o, q - o);
        let w = p.cross(q);
        a2 += w;
        c += (p + q) * w;
    }
    if a2.abs() <= 1e-12 * perimeter(ring).powi(2).max(f64::MIN_POSITIVE) {
        let sum = ring.iter().fold(Point::ZERO, |acc, &p| acc + p);
        return sum / n as f64;
    }
    o + c / (3.0 * a2)
}

/// Even-odd point-in-polygon test.
pub fn contains_point(ring: &[Point], p: Point) -> bool {
    let mut inside = false;
    for (a, b) in edges(ring) {
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Distance from `p` to the segment `a`–`b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len_sq = ab.norm_sq();
    if len_sq == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Distance along the ray `origin + s*dir` (s > 0) to the nearest crossing
/// with the ring boundary. `dir` need not be unit; the result is in units of
/// `|dir|`-scaled length, i.e. true distance when `dir` is unit.
pub fn ray_first_hit(ring: &[Point], origin: Point, dir: Point) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (a, b) in edges(ring) {
        let e = b - a;
        let denom = dir.cross(e);
        if denom == 0.0 {
            continue;
        }
        let ao = a - origin;
        let s = ao.cross(e) / denom;
        let t = ao.cross(dir) / denom;
        if s > 0.0 && (0.0..=1.0).contains(&t) {
            best = Some(best.map_or(s, |b: f64| b.min(s)));
        }
    }
    best
}

/// Convex hull in counter-clockwise order (Andrew's monotone chain).
///
/// Collinear boundary points and duplicates are dropped. One or two distinct
/// input points yield a one- or two-vertex hull.
pub fn convex_hull(points: &[Point]) -> Result<Vec<Point>> {
    if points.is_empty() {
        return Err(Error::Geometry("convex hull of an empty point set".into()));
    }
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Ok(pts);
    }

    let turn = |o: Point, a: Point, b: Point| (a - o).cross(b - o);
    let mut hull: Vec<Point> = Vec::with_capacity(pts.len() + 1);
    for &p in &pts {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    Ok(hull)
}

/// Minimum width of a convex polygon by rotating calipers: the smallest
/// extent of the hull measured perpendicular to one of its edges.
///
/// Expects a counter-clockwise convex ring as produced by [`convex_hull`];
/// fewer than three vertices give zero.
pub fn min_width(hull: &[Point]) -> f64 {
    let n = hull.len();
    if n < 3 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    let mut j = 1;
    for i in 0..n {
        let a = hull[i];
        let b = hull[(i + 1) % n];
        let e = b - a;
        let len = e.norm();
        if len == 0.0 {
            continue;
        }
        let height = |p: Point| e.cross(p - a) / len;
        let mut steps = 0;
        while steps < n && height(hull[(j + 1) % n]) > height(hull[j]) {
            j = (j + 1) % n;
            steps += 1;
        }
        best = best.min(height(hull[j]));
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

/// Ratio of the convex hull's perimeter to the ring's perimeter.
pub fn convexity(ring: &[Point]) -> Result<f64> {
    if ring.len() < 3 {
        return Err(Error::Geometry("convexity needs at least 3 vertices".into()));
    }
    let p = perimeter(ring);
    if p <= 0.0 || !p.is_finite() {
        return Err(Error::Geometry("convexity of a zero-perimeter polygon".into()));
    }
    let hull = convex_hull(ring)?;
    let ph = perimeter(&hull);
    Ok((ph / p).min(1.0))
}

/// Unsigned interior angles in `(0, 2π)`, one per vertex whose two incident
/// edges have non-zero length.
pub fn interior_angles(ring: &[Point]) -> Vec<f64> {
    let n = ring.len();
    if n < 3 {
        return Vec::new();
    }
    let orient = if signed_area(ring) >= 0.0 { 1.0 } else { -1.0 };
    (0..n)
        .filter_map(|i| {
            let prev = ring[(i + n - 1) % n];
            let cur = ring[i];
            let next = ring[(i + 1) % n];
            let e_in = cur - prev;
            let e_out = next - cur;
            if e_in.norm_sq() == 0.0 || e_out.norm_sq() == 0.0 {
                return None;
            }
            let turn = e_in.cross(e_out).atan2(e_in.dot(e_out));
            Some(std::f64::consts::PI - orient * turn)
        })
        .collect()
}

/// Regular polygon with `n` vertices, counter-clockwise from angle `phase`.
pub fn regular_polygon(center: Point, radius: f64, n: usize, phase: f64) -> Vec<Point> {
    (0..n)
        .map(|i| {
            let a = phase + std::f64::consts::TAU * i as f64 / n as f64;
            center + Point::new(a.cos(), a.sin()) * radius
        })
        .collect()
}

/// Clips a ring to an axis-aligned rectangle (Sutherland–Hodgman).
pub fn clip_to_rect(ring: &[Point], min: Point, max: Point) -> Vec<Point> {
    type Inside = fn(Point, Point, Point) -> bool;
    type Cut = fn(Point, Point, Point, Point) -> Point;
    let planes: [(Inside, Cut); 4] = [
        (|p, lo, _| p.x >= lo.x, |a, b, lo, _| lerp_x(a, b, lo.x)),
        (|p, _, hi| p.x <= hi.x, |a, b, _, hi| lerp_x(a, b, hi.x)),
        (|p, lo, _| p.y >= lo.y, |a, b, lo, _| lerp_y(a, b, lo.y)),
        (|p, _, hi| p.y <= hi.y, |a, b, _, hi| lerp_y(a, b, hi.y)),
    ];
    let mut out = ring.to_vec();
    for (inside, cut) in planes {
        if out.is_empty() {
            break;
        }
        let input = std::mem::take(&mut out);
        let n = input.len();
        for i in 0..n {
            let cur = input[i];
            let prev = input[(i + n - 1) % n];
            let (ci, pi) = (inside(cur, min, max), inside(prev, min, max));
            if ci {
                if !pi {
                    out.push(cut(prev, cur, min, max));
                }
                out.push(cur);
            } else if pi {
                out.push(cut(prev, cur, min, max));
            }
        }
    }
    out
}

/// Area of the union of `rings`, optionally restricted to the rectangle
/// `clip = (min, max)`. Each ring is filled with the even-odd rule, so
/// self-intersecting rings are handled and overlaps count once.
///
/// Exact up to rounding: the plane is cut into vertical slabs at every vertex
/// and edge crossing, and inside a slab the covered length is linear in x.
pub fn union_area(rings: &[Vec<Point>], clip: Option<(Point, Point)>) -> f64 {
    let segs: Vec<(Point, Point)> = rings
        .iter()
        .filter(|r| r.len() >= 3)
        .flat_map(|r| edges(r))
        .filter(|(a, b)| a.x != b.x)
        .collect();
    if segs.is_empty() {
        return 0.0;
    }
    let mut xs: Vec<f64> = rings.iter().flatten().map(|p| p.x).collect();
    for i in 0..segs.len() {
        let (a, b) = segs[i];
        for &(c, d) in &segs[i + 1..] {
            if a.x.max(b.x) < c.x.min(d.x) || c.x.max(d.x) < a.x.min(b.x) {
                continue;
            }
            let (r, s) = (b - a, d - c);
            let denom = r.cross(s);
            if denom == 0.0 {
                continue;
            }
            let t = (c - a).cross(s) / denom;
            let u = (c - a).cross(r) / denom;
            if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
                xs.push(a.x + r.x * t);
            }
        }
    }
    if let Some((lo, hi)) = clip {
        xs.push(lo.x);
        xs.push(hi.x);
        xs.retain(|&x| x >= lo.x && x <= hi.x);
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let mut area = 0.0;
    let mut spans: Vec<(f64, f64)> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for w in xs.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let xm = 0.5 * (x0 + x1);
        spans.clear();
        for ring in rings.iter().filter(|r| r.len() >= 3) {
            ys.clear();
            for (a, b) in edges(ring) {
                if (a.x < xm) != (b.x < xm) {
                    ys.push(a.y + (xm - a.x) / (b.x - a.x) * (b.y - a.y));
                }
            }
            ys.sort_by(f64::total_cmp);
            spans.extend(ys.chunks_exact(2).map(|p| (p[0], p[1])));
        }
        if let Some((lo, hi)) = clip {
            for s in spans.iter_mut() {
                *s = (s.0.max(lo.y), s.1.min(hi.y));
            }
        }
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut covered = 0.0;
        let mut cur: Option<(f64, f64)> = None;
        for &(y0, y1) in spans.iter().filter(|s| s.1 > s.0) {
            cur = match cur {
                Some((c0, c1)) if y0 <= c1 => Some((c0, c1.max(y1))),
                Some((c0, c1)) => {
                    covered += c1 - c0;
                    Some((y0, y1))
                }
                None => Some((y0, y1)),
            };
        }
        if let Some((c0, c1)) = cur {
            covered += c1 - c0;
        }
        area += (x1 - x0) * covered;
    }
    area
}

fn lerp_x(a: Point, b: Point, x: f64) -> Point {
    let t = (x - a.x) / (b.x - a.x);
    Point::new(x, a.y + t * (b.y - a.y))
}

fn lerp_y(a: Point, b: Point, y: f64) -> Point {
    let t = (y - a.y) / (b.y - a.y);
    Point::new(a.x + t * (b.x - a.x), y)
}
