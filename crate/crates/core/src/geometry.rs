//! Planar primitives: rings, centroids, segment distances, projection.

use crate::dataset::{Point, PolygonPart, Ring};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Signed shoelace area of a closed ring (positive when counter-clockwise).
pub fn ring_signed_area(ring: &[Point]) -> f64 {
    ring.windows(2)
        .map(|w| w[0].x * w[1].y - w[1].x * w[0].y)
        .sum::<f64>()
        / 2.0
}

/// Area-weighted centroid of the outer rings of a (multi)polygon. Returns
/// `None` when the total area is zero.
pub fn polygon_centroid(parts: &[PolygonPart]) -> Option<Point> {
    let mut area = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for part in parts {
        let ring = &part.outer;
        let a = ring_signed_area(ring);
        let (mut sx, mut sy) = (0.0, 0.0);
        for w in ring.windows(2) {
            let cross = w[0].x * w[1].y - w[1].x * w[0].y;
            sx += (w[0].x + w[1].x) * cross;
            sy += (w[0].y + w[1].y) * cross;
        }
        // sx / (6a) is the part centroid; weight it by |a|.
        let sign = a.signum();
        area += a.abs();
        cx += sign * sx / 6.0;
        cy += sign * sy / 6.0;
    }
    (area > 0.0).then(|| Point::new(cx / area, cy / area))
}

fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

pub fn point_segment_dist2(p: &Point, a: &Point, b: &Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.dist2(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.dist2(&Point::new(a.x + t * dx, a.y + t * dy))
}

/// True when the open segments cross at a single interior point.
fn segments_cross(a: &Point, b: &Point, c: &Point, d: &Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Squared distance between segments `ab` and `cd`.
pub fn segment_dist2(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    if segments_cross(a, b, c, d) {
        return 0.0;
    }
    point_segment_dist2(a, c, d)
        .min(point_segment_dist2(b, c, d))
        .min(point_segment_dist2(c, a, b))
        .min(point_segment_dist2(d, a, b))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RingDefect {
    TooFewVertices,
    NotClosed,
    NonFinite,
    SelfIntersecting,
}

/// Drops consecutive repeated vertices.
pub fn dedup_ring(ring: &[Point]) -> Ring {
    let mut out: Ring = Vec::with_capacity(ring.len());
    for p in ring {
        if out.last() != Some(p) {
            out.push(*p);
        }
    }
    out
}

/// Checks that a ring is closed, has at least three distinct vertices and no
/// two edges touch except adjacent edges at their shared vertex.
pub fn check_ring(ring: &Ring) -> Result<(), RingDefect> {
    if ring.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(RingDefect::NonFinite);
    }
    if ring.first() != ring.last() {
        return Err(RingDefect::NotClosed);
    }
    let ring = dedup_ring(ring);
    if ring.len() < 4 {
        return Err(RingDefect::TooFewVertices);
    }
    let m = ring.len() - 1;
    for i in 0..m {
        for j in i + 1..m {
            let (a, b) = (&ring[i], &ring[i + 1]);
            let (c, d) = (&ring[j], &ring[j + 1]);
            let shared = if j == i + 1 {
                Some((b, a, d))
            } else if i == 0 && j == m - 1 {
                Some((a, b, c))
            } else {
                None
            };
            match shared {
                // Adjacent edges fold back onto each other only when collinear
                // and pointing the same way from the shared vertex.
                Some((v, p, q)) => {
                    let same_way = (p.x - v.x) * (q.x - v.x) + (p.y - v.y) * (q.y - v.y) > 0.0;
                    if orient(v, p, q) == 0.0 && same_way {
                        return Err(RingDefect::SelfIntersecting);
                    }
                }
                None => {
                    if segment_dist2(a, b, c, d) == 0.0 {
                        return Err(RingDefect::SelfIntersecting);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Equirectangular projection about `ref_lat_deg`: `x = R * lon * cos(lat0)`,
/// `y = R * lat`, angles in radians.
pub fn project_equirectangular(lon_deg: f64, lat_deg: f64, ref_lat_deg: f64) -> Point {
    let phi0 = ref_lat_deg.to_radians();
    Point::new(
        EARTH_RADIUS_M * lon_deg.to_radians() * phi0.cos(),
        EARTH_RADIUS_M * lat_deg.to_radians(),
    )
}
