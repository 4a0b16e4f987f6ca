//! Convex hull volumes of small point sets in dimensions 1 to 3.

use crate::convexfn::dot;

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Convex hull of planar points (Andrew's monotone chain), counterclockwise,
/// collinear points dropped.
pub fn hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && turn(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && turn(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Shoelace area of a simple polygon.
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        acc += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * acc.abs()
}

/// n-dimensional volume of the convex hull of `points` (each of length `n`).
pub fn hull_volume(points: &[Vec<f64>], n: usize) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    match n {
        1 => {
            let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        }
        2 => {
            let pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
            polygon_area(&hull_2d(&pts))
        }
        3 => hull_volume_3d(points),
        _ => panic!("hull volume only for n <= 3"),
    }
}

/// Sums `area(F) · dist(centroid, F) / 3` over the supporting planes found
/// by enumerating point triples.
fn hull_volume_3d(points: &[Vec<f64>]) -> f64 {
    let mut pts: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !pts.iter().any(|q| q == p) {
            pts.push(p.clone());
        }
    }
    if pts.len() < 4 {
        return 0.0;
    }
    let scale = pts
        .iter()
        .flatten()
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
        .max(1e-300);
    let eps = 1e-12 * scale;
    let centroid: Vec<f64> = (0..3)
        .map(|k| pts.iter().map(|p| p[k]).sum::<f64>() / pts.len() as f64)
        .collect();

    // (unit outward normal, offset)
    let mut planes: Vec<([f64; 3], f64)> = Vec::new();
    let m = pts.len();
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let nrm = cross(&sub(&pts[j], &pts[i]), &sub(&pts[k], &pts[i]));
                let len = dot(&nrm, &nrm).sqrt();
                if len <= eps * scale {
                    continue;
                }
                let mut u = [nrm[0] / len, nrm[1] / len, nrm[2] / len];
                let mut off = dot(&u, &pts[i]);
                let (mut above, mut below) = (false, false);
                for p in &pts {
                    let d = dot(&u, p) - off;
                    above |= d > eps;
                    below |= d < -eps;
                }
                if above && below {
                    continue;
                }
                if above {
                    u = [-u[0], -u[1], -u[2]];
                    off = -off;
                }
                let known = planes.iter().any(|(v, o)| {
                    (v[0] - u[0]).abs() < 1e-9 && (v[1] - u[1]).abs() < 1e-9 && (v[2] - u[2]).abs() < 1e-9
                        && (o - off).abs() < 1e-9 * scale
                });
                if !known {
                    planes.push((u, off));
                }
            }
        }
    }

    let mut vol = 0.0;
    for (u, off) in planes {
        let height = off - dot(&u, &centroid);
        if height <= eps {
            continue;
        }
        // orthonormal basis of the plane
        let a = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let e1 = {
            let c = cross(&u, &a);
            let l = dot(&c, &c).sqrt();
            [c[0] / l, c[1] / l, c[2] / l]
        };
        let e2 = cross(&u, &e1);
        let face: Vec<[f64; 2]> = pts
            .iter()
            .filter(|p| (dot(&u, p) - off).abs() <= eps)
            .map(|p| [dot(&e1, p), dot(&e2, p)])
            .collect();
        vol += polygon_area(&hull_2d(&face)) * height / 3.0;
    }
    vol
}
