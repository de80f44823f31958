//! Hierarchical Triangular Mesh: a quad-tree of spherical triangles
//! ("trixels") rooted at the eight faces of an octahedron.
//!
//! Ids follow the published HTM numbering. A root id is `0b10ff` for the
//! southern faces S0–S3 and `0b11ff` for the northern faces N0–N3; every
//! subdivision appends two bits naming the child (0–2 for the corner
//! children, 3 for the center child). The level of an id is therefore
//! `(bit_length - 4) / 2`.
//!
//! Root faces, with `v0 = +z`, `v1 = +x`, `v2 = +y`, `v3 = -x`, `v4 = -y`,
//! `v5 = -z`:
//!
//! | name | id | vertices     |
//! |------|----|--------------|
//! | S0   | 8  | v1, v5, v2   |
//! | S1   | 9  | v2, v5, v3   |
//! | S2   | 10 | v3, v5, v4   |
//! | S3   | 11 | v4, v5, v1   |
//! | N0   | 12 | v1, v0, v4   |
//! | N1   | 13 | v4, v0, v3   |
//! | N2   | 14 | v3, v0, v2   |
//! | N3   | 15 | v2, v0, v1   |
//!
//! For a trixel `(a, b, c)` with edge midpoints `w0 = mid(b, c)`,
//! `w1 = mid(c, a)`, `w2 = mid(a, b)` the children are
//! `0: (a, w2, w1)`, `1: (b, w0, w2)`, `2: (c, w1, w0)`, `3: (w0, w1, w2)`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Deepest level accepted by [`locate`].
pub const MAX_LOCATE_LEVEL: u32 = 20;
/// Deepest level an id can encode in 64 bits.
pub const MAX_ID_LEVEL: u32 = 30;
/// Surface area of the Earth used for cell-size estimates.
pub const EARTH_SURFACE_KM2: f64 = 5.101e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HtmError {
    #[error("coordinate is not finite: lat {lat}, lon {lon}")]
    NonFinite { lat: f64, lon: f64 },
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("level {level} outside 0..={max}")]
    InvalidLevel { level: u32, max: u32 },
    #[error("{0} is not a valid trixel id")]
    InvalidId(u64),
    #[error("segments per edge must be at least 1")]
    InvalidSegments,
}

/// A latitude/longitude pair in degrees. Longitude is kept in `[-180, 180)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, HtmError> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(HtmError::NonFinite { lat, lon });
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(HtmError::LatitudeOutOfRange(lat));
        }
        let mut lon = (lon + 180.0).rem_euclid(360.0) - 180.0;
        if lon >= 180.0 {
            lon -= 360.0;
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    pub fn to_vector(&self) -> UnitVector {
        point_to_vector(*self)
    }
}

/// A point on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitVector {
    /// Normalizes `(x, y, z)`; `None` for the zero or a non-finite vector.
    pub fn new(x: f64, y: f64, z: f64) -> Option<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        Some(UnitVector {
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    pub fn dot(&self, o: &UnitVector) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    fn cross(&self, o: &UnitVector) -> [f64; 3] {
        [
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        ]
    }

    /// Normalized chord midpoint.
    pub fn midpoint(&self, o: &UnitVector) -> UnitVector {
        UnitVector::new(self.x + o.x, self.y + o.y, self.z + o.z)
            .expect("midpoint of antipodal vertices")
    }

    pub fn to_geo(&self) -> GeoPoint {
        let lat = self.z.atan2(self.x.hypot(self.y)).to_degrees();
        let lon = self.y.atan2(self.x).to_degrees();
        GeoPoint::new(lat.clamp(-90.0, 90.0), lon).expect("finite unit vector")
    }
}

/// Geographic to Cartesian conversion on the unit sphere.
pub fn point_to_vector(p: GeoPoint) -> UnitVector {
    let (lat, lon) = (p.lat.to_radians(), p.lon.to_radians());
    UnitVector::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin())
        .expect("cos/sin pair is never zero")
}

/// Path-encoded trixel identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrixelId(u64);

impl TrixelId {
    pub fn new(raw: u64) -> Result<Self, HtmError> {
        let bits = 64 - raw.leading_zeros();
        if bits < 4 || !bits.is_multiple_of(2) {
            return Err(HtmError::InvalidId(raw));
        }
        Ok(TrixelId(raw))
    }

    pub fn raw(&self) -> u64 {
        self.0
    }

    pub fn level(&self) -> u32 {
        (64 - self.0.leading_zeros() - 4) / 2
    }

    pub fn parent(&self) -> Option<TrixelId> {
        (self.level() > 0).then_some(TrixelId(self.0 >> 2))
    }

    pub fn child(&self, k: u8) -> TrixelId {
        debug_assert!(k < 4);
        TrixelId((self.0 << 2) | k as u64)
    }

    /// The enclosing trixel at `level`, which must not exceed this id's level.
    pub fn ancestor(&self, level: u32) -> Option<TrixelId> {
        let own = self.level();
        (level <= own).then(|| TrixelId(self.0 >> (2 * (own - level))))
    }

    pub fn is_northern(&self) -> bool {
        (self.0 >> (2 * self.level() + 2)) & 1 == 1
    }
}

impl fmt::Display for TrixelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::str::FromStr for TrixelId {
    type Err = HtmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw: u64 = s.trim().parse().map_err(|_| HtmError::InvalidId(0))?;
        TrixelId::new(raw)
    }
}

/// A spherical triangle with counterclockwise vertices seen from outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trixel {
    pub id: TrixelId,
    pub vertices: [UnitVector; 3],
}

const V: [UnitVector; 6] = [
    UnitVector { x: 0.0, y: 0.0, z: 1.0 },
    UnitVector { x: 1.0, y: 0.0, z: 0.0 },
    UnitVector { x: 0.0, y: 1.0, z: 0.0 },
    UnitVector { x: -1.0, y: 0.0, z: 0.0 },
    UnitVector { x: 0.0, y: -1.0, z: 0.0 },
    UnitVector { x: 0.0, y: 0.0, z: -1.0 },
];

const ROOTS: [(u64, [usize; 3]); 8] = [
    (8, [1, 5, 2]),
    (9, [2, 5, 3]),
    (10, [3, 5, 4]),
    (11, [4, 5, 1]),
    (12, [1, 0, 4]),
    (13, [4, 0, 3]),
    (14, [3, 0, 2]),
    (15, [2, 0, 1]),
];

/// The eight level-0 faces in id order (S0..S3, N0..N3).
pub fn root_faces() -> [Trixel; 8] {
    ROOTS.map(|(id, [a, b, c])| Trixel {
        id: TrixelId(id),
        vertices: [V[a], V[b], V[c]],
    })
}

impl Trixel {
    pub fn level(&self) -> u32 {
        self.id.level()
    }

    /// Children in id order: three corners, then the center.
    pub fn children(&self) -> [Trixel; 4] {
        let [a, b, c] = self.vertices;
        let w0 = b.midpoint(&c);
        let w1 = c.midpoint(&a);
        let w2 = a.midpoint(&b);
        [[a, w2, w1], [b, w0, w2], [c, w1, w0], [w0, w1, w2]]
            .into_iter()
            .enumerate()
            .map(|(k, vertices)| Trixel {
                id: self.id.child(k as u8),
                vertices,
            })
            .collect::<Vec<_>>()
            .try_into()
            .expect("four children")
    }

    /// Signed edge tests; all three nonnegative means the point is inside.
    fn edge_signs(&self, p: &UnitVector) -> [f64; 3] {
        let [a, b, c] = &self.vertices;
        let dot = |n: [f64; 3]| n[0] * p.x + n[1] * p.y + n[2] * p.z;
        [dot(a.cross(b)), dot(b.cross(c)), dot(c.cross(a))]
    }

    pub fn contains(&self, p: &UnitVector) -> bool {
        self.edge_signs(p).iter().all(|&s| s >= 0.0)
    }

    /// Spherical excess, computed from `tan(E/2) = |a·(b×c)| / (1 + a·b + b·c + c·a)`.
    pub fn area(&self) -> f64 {
        let [a, b, c] = &self.vertices;
        let bc = b.cross(c);
        let triple = a.x * bc[0] + a.y * bc[1] + a.z * bc[2];
        let denom = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
        2.0 * triple.abs().atan2(denom)
    }

    /// Normalized vertex average; always strictly inside the trixel.
    pub fn center(&self) -> UnitVector {
        let [a, b, c] = &self.vertices;
        UnitVector::new(a.x + b.x + c.x, a.y + b.y + c.y, a.z + b.z + c.z)
            .expect("nondegenerate trixel")
    }

    pub fn from_id(id: TrixelId) -> Result<Trixel, HtmError> {
        let level = id.level();
        if level > MAX_ID_LEVEL {
            return Err(HtmError::InvalidId(id.raw()));
        }
        let root = id.raw() >> (2 * level);
        let mut t = root_faces()[(root - 8) as usize];
        for step in (0..level).rev() {
            let k = (id.raw() >> (2 * step)) & 3;
            t = t.children()[k as usize];
        }
        Ok(t)
    }
}

fn pick<'a>(candidates: impl Iterator<Item = &'a Trixel> + Clone, p: &UnitVector) -> &'a Trixel {
    if let Some(t) = candidates.clone().find(|t| t.contains(p)) {
        return t;
    }
    // Rounding can leave a point just outside every candidate along a shared
    // outer edge; take the one it misses by the least.
    let slack = |t: &Trixel| t.edge_signs(p).into_iter().fold(f64::INFINITY, f64::min);
    candidates
        .reduce(|best, t| if slack(t) > slack(best) { t } else { best })
        .expect("nonempty candidates")
}

fn check_level(level: u32) -> Result<(), HtmError> {
    if level > MAX_LOCATE_LEVEL {
        return Err(HtmError::InvalidLevel {
            level,
            max: MAX_LOCATE_LEVEL,
        });
    }
    Ok(())
}

/// The trixel at `level` containing `v`, found by descent from the root faces.
pub fn locate_vector(v: &UnitVector, level: u32) -> Result<Trixel, HtmError> {
    check_level(level)?;
    let roots = root_faces();
    let mut t = *pick(roots.iter(), v);
    for _ in 0..level {
        let kids = t.children();
        t = *pick(kids.iter(), v);
    }
    Ok(t)
}

pub fn locate(p: GeoPoint, level: u32) -> Result<TrixelId, HtmError> {
    Ok(locate_vector(&p.to_vector(), level)?.id)
}

/// Number of trixels at `level`: `8 · 4^level`.
pub fn trixel_count(level: u32) -> Option<u64> {
    4u64.checked_pow(level)?.checked_mul(8)
}

/// Average trixel area at `level` on a sphere of the given area.
pub fn mean_cell_area(level: u32, sphere_area_km2: f64) -> f64 {
    // 4^level overflows u64 past level 30 but stays exact in f64 powers of two
    sphere_area_km2 / (8.0 * 4f64.powi(level as i32))
}

/// Every trixel at `level`, in ascending id order.
pub fn all_trixels(level: u32) -> Vec<Trixel> {
    let mut current: Vec<Trixel> = root_faces().to_vec();
    for _ in 0..level {
        current = current.iter().flat_map(|t| t.children()).collect();
    }
    current
}

/// Closed counterclockwise ring along the three great-circle edges, with
/// `segments_per_edge` pieces per edge. The first point is repeated last.
pub fn trixel_polygon(id: TrixelId, segments_per_edge: u32) -> Result<Vec<GeoPoint>, HtmError> {
    if segments_per_edge == 0 {
        return Err(HtmError::InvalidSegments);
    }
    let t = Trixel::from_id(id)?;
    let mut ring = Vec::with_capacity(3 * segments_per_edge as usize + 1);
    for e in 0..3 {
        let (a, b) = (t.vertices[e], t.vertices[(e + 1) % 3]);
        for s in 0..segments_per_edge {
            let f = s as f64 / segments_per_edge as f64;
            let v = UnitVector::new(
                a.x + f * (b.x - a.x),
                a.y + f * (b.y - a.y),
                a.z + f * (b.z - a.z),
            )
            .expect("edge of a trixel never passes through the origin");
            ring.push(v.to_geo());
        }
    }
    ring.push(ring[0]);
    Ok(ring)
}

/// Total area of the unit sphere.
pub const SPHERE_AREA: f64 = 4.0 * PI;

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &UnitVector, b: [f64; 3]) -> bool {
        (a.x - b[0]).abs() < 1e-15 && (a.y - b[1]).abs() < 1e-15 && (a.z - b[2]).abs() < 1e-15
    }

    #[test]
    fn geographic_axes() {
        assert!(close(&GeoPoint::new(90.0, 0.0).unwrap().to_vector(), [0.0, 0.0, 1.0]));
        assert!(close(&GeoPoint::new(0.0, 0.0).unwrap().to_vector(), [1.0, 0.0, 0.0]));
        assert!(close(&GeoPoint::new(0.0, 90.0).unwrap().to_vector(), [0.0, 1.0, 0.0]));
    }

    #[test]
    fn geo_point_validation() {
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(0.0, f64::INFINITY).is_err());
        assert!(GeoPoint::new(90.5, 0.0).is_err());
        assert_eq!(GeoPoint::new(10.0, 180.0).unwrap().lon(), -180.0);
        assert_eq!(GeoPoint::new(10.0, 190.0).unwrap().lon(), -170.0);
        assert_eq!(GeoPoint::new(10.0, -540.0).unwrap().lon(), -180.0);
    }

    #[test]
    fn root_faces_are_an_octahedron() {
        let faces = root_faces();
        assert_eq!(faces.len(), 8);
        for v in V {
            let uses = faces
                .iter()
                .filter(|f| f.vertices.contains(&v))
                .count();
            assert_eq!(uses, 4);
        }
        for f in &faces {
            let [a, b, c] = &f.vertices;
            let n = a.cross(b);
            assert!(n[0] * c.x + n[1] * c.y + n[2] * c.z > 0.0, "{:?} not ccw", f.id);
            assert_eq!(f.level(), 0);
        }
    }

    #[test]
    fn children_shift_back_to_parent() {
        for f in root_faces() {
            for (k, c) in f.children().iter().enumerate() {
                assert_eq!(c.level(), 1);
                assert_eq!(c.id.raw() >> 2, f.id.raw());
                assert_eq!(c.id.raw() & 3, k as u64);
                assert_eq!(c.id.parent(), Some(f.id));
            }
        }
    }

    #[test]
    fn id_validation_and_level() {
        assert!(TrixelId::new(0).is_err());
        assert!(TrixelId::new(7).is_err());
        assert!(TrixelId::new(16).is_err()); // odd bit length
        assert_eq!(TrixelId::new(8).unwrap().level(), 0);
        assert_eq!(TrixelId::new(32).unwrap().level(), 1);
        assert!(TrixelId::new(8).unwrap().parent().is_none());
        assert!(!TrixelId::new(9 << 4).unwrap().is_northern());
        assert!(TrixelId::new(15 << 4).unwrap().is_northern());
    }

    #[test]
    fn centroid_of_n3_locates_to_n3() {
        let v = UnitVector::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(locate_vector(&v, 0).unwrap().id.raw(), 15);
    }

    #[test]
    fn locate_rejects_deep_levels() {
        let p = GeoPoint::new(0.0, 0.0).unwrap();
        assert!(matches!(locate(p, 21), Err(HtmError::InvalidLevel { .. })));
        assert!(locate(p, 20).is_ok());
    }

    #[test]
    fn poles_and_vertices_are_deterministic() {
        for (lat, lon) in [(90.0, 0.0), (-90.0, 0.0), (0.0, 0.0), (0.0, -180.0), (0.0, 90.0)] {
            let p = GeoPoint::new(lat, lon).unwrap();
            let a = locate(p, 12).unwrap();
            assert_eq!(a, locate(p, 12).unwrap());
            assert_eq!(a.ancestor(0), Some(locate(p, 0).unwrap()));
        }
    }

    #[test]
    fn counts() {
        assert_eq!(trixel_count(0), Some(8));
        assert_eq!(trixel_count(6), Some(32768));
        assert_eq!(trixel_count(13), Some(536_870_912));
        for l in 0..=12 {
            assert_eq!(trixel_count(l), Some(8 * 4u64.pow(l)));
        }
        assert_eq!(trixel_count(30), Some(1 << 63));
        assert_eq!(trixel_count(31), None);
    }

    #[test]
    fn cell_areas() {
        assert_eq!(mean_cell_area(0, EARTH_SURFACE_KM2), EARTH_SURFACE_KM2 / 8.0);
        let a6 = mean_cell_area(6, EARTH_SURFACE_KM2);
        assert!((a6 - 15500.0).abs() / 15500.0 < 0.01, "{a6}");
        let a13 = mean_cell_area(13, EARTH_SURFACE_KM2);
        assert!((a13 - 0.95).abs() < 0.005, "{a13}");
    }

    #[test]
    fn polygon_ring_shape() {
        let id = locate(GeoPoint::new(40.7, -74.0).unwrap(), 6).unwrap();
        let ring = trixel_polygon(id, 1).unwrap();
        assert_eq!(ring.len(), 4);
        assert_eq!(ring[0], ring[3]);
        let ring = trixel_polygon(id, 5).unwrap();
        assert_eq!(ring.len(), 16);
        for p in &ring {
            let v = p.to_vector();
            assert!((v.dot(&v) - 1.0).abs() < 1e-12);
        }
        assert!(matches!(trixel_polygon(id, 0), Err(HtmError::InvalidSegments)));
    }

    #[test]
    fn ring_center_locates_back() {
        for raw in [8u64, 15, 8 << 6 | 0b100111, 14 << 10 | 0b1101100011] {
            let id = TrixelId::new(raw).unwrap();
            let ring = trixel_polygon(id, 3).unwrap();
            let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
            for p in &ring[..ring.len() - 1] {
                let v = p.to_vector();
                x += v.x;
                y += v.y;
                z += v.z;
            }
            let c = UnitVector::new(x, y, z).unwrap();
            assert_eq!(locate_vector(&c, id.level()).unwrap().id, id);
        }
    }
}
