//! Signed Radon measures on bounded regions: a finite atomic part plus a
//! density sampled on a quadrature grid, paired against compactly supported
//! C² bumps.

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub const MIN_ORDER: usize = 2;
pub const MAX_ORDER: usize = 64;
pub const DEFAULT_ORDER: usize = 32;

/// Bounded region: an axis-aligned box or a closed Euclidean ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let r = Region::Box { lo, hi };
        r.validate()?;
        Ok(r)
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let r = Region::Ball { center, radius };
        r.validate()?;
        Ok(r)
    }

    /// `[lo, hi]ⁿ`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        Region::Box {
            lo: vec![lo; n],
            hi: vec![hi; n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Region::Box { lo, hi } => {
                check_dim(lo.len(), hi.len())?;
                if lo.is_empty() || lo.len() > 3 {
                    return Err(Error::OutOfRange(format!("region dimension {}", lo.len())));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
                    return Err(Error::Invalid("box needs finite lo < hi componentwise".into()));
                }
            }
            Region::Ball { center, radius } => {
                if center.is_empty() || center.len() > 3 {
                    return Err(Error::OutOfRange(format!(
                        "region dimension {}",
                        center.len()
                    )));
                }
                if !(*radius > 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Invalid("ball needs finite center and radius > 0".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Box { lo, .. } => lo.len(),
            Region::Ball { center, .. } => center.len(),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Region::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            Region::Ball { radius, .. } => unit_ball_volume(self.dim()) * radius.powi(self.dim() as i32),
        }
    }

    /// Membership with the atom tie rule: boxes are half-open `[lo, hi)`,
    /// balls are closed.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Box { lo, hi } => {
                x.len() == lo.len()
                    && x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *a <= *v && *v < *b)
            }
            Region::Ball { center, radius } => {
                x.len() == center.len() && dist2(x, center) <= radius * radius
            }
        }
    }

    /// Closed membership, used for quadrature nodes and bump supports.
    pub fn contains_closed(&self, x: &[f64]) -> bool {
        match self {
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *a <= *v && *v <= *b),
            Region::Ball { center, radius } => dist2(x, center) <= radius * radius,
        }
    }

    /// Euclidean distance from `x` to the region (0 inside).
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Region::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (a, b))| {
                    let d = if v < a { a - v } else if v > b { v - b } else { 0.0 };
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            Region::Ball { center, radius } => (dist2(x, center).sqrt() - radius).max(0.0),
        }
    }

    /// Smallest axis-aligned box containing the region.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Box { lo, hi } => (lo.clone(), hi.clone()),
            Region::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// The closed ball `B_r(center)` contained in the region, of maximal radius,
    /// centred at `center`; `None` when `center` is outside.
    pub fn inner_radius_at(&self, center: &[f64]) -> Option<f64> {
        match self {
            Region::Box { lo, hi } => {
                let r = center
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(c, (a, b))| (c - a).min(b - c))
                    .fold(f64::INFINITY, f64::min);
                (r > 0.0).then_some(r)
            }
            Region::Ball { center: c0, radius } => {
                let r = radius - dist2(center, c0).sqrt();
                (r > 0.0).then_some(r)
            }
        }
    }
}

fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => unreachable!(),
    }
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `φ(x) = amplitude · (1 - |x - center|²/r²)^power` on `B_r(center)`, zero outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: Vec<f64>,
    pub radius: f64,
    pub power: u32,
    pub amplitude: f64,
}

impl TestFunction {
    pub fn new(center: Vec<f64>, radius: f64, power: u32, amplitude: f64) -> Result<Self> {
        let phi = Self {
            center,
            radius,
            power,
            amplitude,
        };
        phi.validate()?;
        Ok(phi)
    }

    /// Unit-amplitude cubic bump.
    pub fn bump(center: Vec<f64>, radius: f64) -> Self {
        Self {
            center,
            radius,
            power: 3,
            amplitude: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.power < 3 {
            return Err(Error::OutOfRange(format!(
                "bump power {} < 3 is not C²",
                self.power
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) || !self.amplitude.is_finite() {
            return Err(Error::Invalid("bump needs finite radius > 0 and amplitude".into()));
        }
        if self.center.is_empty() || self.center.len() > 3 {
            return Err(Error::OutOfRange(format!("bump dimension {}", self.center.len())));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn sup_norm(&self) -> f64 {
        self.amplitude.abs()
    }

    pub fn support(&self) -> Region {
        Region::Ball {
            center: self.center.clone(),
            radius: self.radius,
        }
    }

    #[inline]
    fn q(&self, x: &[f64]) -> f64 {
        dist2(x, &self.center) / (self.radius * self.radius)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let q = self.q(x);
        if q >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - q).powi(self.power as i32)
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let q = self.q(x);
        if q >= 1.0 {
            return vec![0.0; x.len()];
        }
        let p = self.power as f64;
        let r2 = self.radius * self.radius;
        let coef = -self.amplitude * p * (1.0 - q).powi(self.power as i32 - 1) * 2.0 / r2;
        x.iter().zip(&self.center).map(|(a, c)| coef * (a - c)).collect()
    }

    /// Hessian entries as dense rows.
    pub fn hessian_rows(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = x.len();
        let q = self.q(x);
        let mut out = vec![vec![0.0; n]; n];
        if q >= 1.0 {
            return out;
        }
        let p = self.power as f64;
        let r2 = self.radius * self.radius;
        let pi = self.power as i32;
        let rank_one = self.amplitude * p * (p - 1.0) * (1.0 - q).powi(pi - 2) * 4.0 / (r2 * r2);
        let iso = -self.amplitude * p * (1.0 - q).powi(pi - 1) * 2.0 / r2;
        for i in 0..n {
            for j in 0..n {
                let di = x[i] - self.center[i];
                let dj = x[j] - self.center[j];
                out[i][j] = rank_one * di * dj + if i == j { iso } else { 0.0 };
            }
        }
        out
    }

    /// Analytic upper bound on the spectral norm of `D²φ` over ℝⁿ.
    pub fn hessian_bound(&self) -> f64 {
        let p = self.power as f64;
        self.amplitude.abs() * (4.0 * p * (p - 1.0) + 2.0 * p) / (self.radius * self.radius)
    }
}

/// Quadrature rule on a region: positive weights summing to its volume.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    pub region: Region,
    pub order: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Tensor shape of the node array (last axis fastest).
    pub shape: Vec<usize>,
}

impl QuadratureGrid {
    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }

    /// Pairs of node indices adjacent along one tensor axis.
    pub fn neighbor_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let total: usize = self.shape.iter().product();
        let dims = self.shape.len();
        for axis in 0..dims {
            let stride: usize = self.shape[axis + 1..].iter().product();
            for idx in 0..total {
                let coord = (idx / stride) % self.shape[axis];
                if coord + 1 < self.shape[axis] {
                    out.push((idx, idx + stride));
                }
            }
        }
        out
    }
}

fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(order).expect("order >= 2");
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

fn mapped_rule(order: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    gauss_legendre(order)
        .into_iter()
        .map(|(x, w)| (mid + half * x, half * w))
        .collect()
}

fn tensor(rules: &[Vec<(f64, f64)>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut nodes = vec![Vec::new()];
    let mut weights = vec![1.0];
    for rule in rules {
        let mut next_nodes = Vec::with_capacity(nodes.len() * rule.len());
        let mut next_weights = Vec::with_capacity(nodes.len() * rule.len());
        for (x, w) in nodes.iter().zip(&weights) {
            for (t, v) in rule {
                let mut y = x.clone();
                y.push(*t);
                next_nodes.push(y);
                next_weights.push(w * v);
            }
        }
        nodes = next_nodes;
        weights = next_weights;
    }
    (nodes, weights)
}

/// Tensor Gauss-Legendre on boxes; polar (n = 2) or spherical (n = 3)
/// product rules on balls, Gauss-Legendre in the radius and in `cos θ` with
/// an equispaced azimuth of `2·order` points.
pub fn make_grid(region: &Region, order: usize) -> Result<QuadratureGrid> {
    region.validate()?;
    if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
        return Err(Error::OutOfRange(format!(
            "quadrature order {order} outside {MIN_ORDER}..={MAX_ORDER}"
        )));
    }
    let n = region.dim();
    let (nodes, weights, shape) = match region {
        Region::Box { lo, hi } => {
            let rules: Vec<_> = lo.iter().zip(hi).map(|(a, b)| mapped_rule(order, *a, *b)).collect();
            let (nodes, weights) = tensor(&rules);
            (nodes, weights, vec![order; n])
        }
        Region::Ball { center, radius } => ball_grid(center, *radius, order),
    };
    Ok(QuadratureGrid {
        region: region.clone(),
        order,
        nodes,
        weights,
        shape,
    })
}

fn ball_grid(center: &[f64], radius: f64, order: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<usize>) {
    let n = center.len();
    let radial = mapped_rule(order, 0.0, radius);
    let azimuth = 2 * order;
    let dphi = 2.0 * PI / azimuth as f64;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    match n {
        1 => {
            for (x, w) in mapped_rule(order, center[0] - radius, center[0] + radius) {
                nodes.push(vec![x]);
                weights.push(w);
            }
            (nodes, weights, vec![order])
        }
        2 => {
            for (r, wr) in &radial {
                for k in 0..azimuth {
                    let phi = (k as f64 + 0.5) * dphi;
                    nodes.push(vec![center[0] + r * phi.cos(), center[1] + r * phi.sin()]);
                    weights.push(wr * r * dphi);
                }
            }
            (nodes, weights, vec![order, azimuth])
        }
        3 => {
            let polar = gauss_legendre(order);
            for (r, wr) in &radial {
                for (ct, wt) in &polar {
                    let st = (1.0 - ct * ct).sqrt();
                    for k in 0..azimuth {
                        let phi = (k as f64 + 0.5) * dphi;
                        nodes.push(vec![
                            center[0] + r * st * phi.cos(),
                            center[1] + r * st * phi.sin(),
                            center[2] + r * ct,
                        ]);
                        weights.push(wr * r * r * wt * dphi);
                    }
                }
            }
            (nodes, weights, vec![order, order, azimuth])
        }
        _ => unreachable!(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: Vec<f64>,
    pub mass: f64,
}

/// Density sampled at the nodes of `make_grid(region, order)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "DensityRepr", try_from = "DensityRepr")]
pub struct Density {
    pub grid: QuadratureGrid,
    pub values: Vec<f64>,
}

/// On-disk form of a density: the grid is rebuilt from region and order.
#[derive(Serialize, Deserialize)]
struct DensityRepr {
    region: Region,
    order: usize,
    values: Vec<f64>,
}

impl From<Density> for DensityRepr {
    fn from(d: Density) -> Self {
        Self {
            region: d.grid.region,
            order: d.grid.order,
            values: d.values,
        }
    }
}

impl TryFrom<DensityRepr> for Density {
    type Error = Error;

    fn try_from(r: DensityRepr) -> Result<Self> {
        let grid = make_grid(&r.region, r.order)?;
        if grid.len() != r.values.len() {
            return Err(Error::Invalid(format!(
                "density has {} values but the grid has {} nodes",
                r.values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values: r.values })
    }
}

/// Real signed Radon measure: atoms plus an optional grid density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadonMeasure {
    pub dim: usize,
    pub atoms: Vec<Atom>,
    pub density: Option<Density>,
}

impl RadonMeasure {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            atoms: Vec::new(),
            density: None,
        }
    }

    pub fn atomic(dim: usize, atoms: Vec<Atom>) -> Self {
        Self {
            dim,
            atoms,
            density: None,
        }
    }

    pub fn with_density(grid: QuadratureGrid, values: Vec<f64>) -> Result<Self> {
        check_dim(grid.len(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite density value".into()));
        }
        Ok(Self {
            dim: grid.dim(),
            atoms: Vec::new(),
            density: Some(Density { grid, values }),
        })
    }

    /// Lebesgue measure restricted to `region`.
    pub fn lebesgue(region: &Region, order: usize) -> Result<Self> {
        let grid = make_grid(region, order)?;
        let values = vec![1.0; grid.len()];
        Self::with_density(grid, values)
    }

    /// Total signed mass.
    pub fn mass(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.mass).sum();
        let dens = self.density.as_ref().map_or(0.0, |d| {
            d.grid.weights.iter().zip(&d.values).map(|(w, v)| w * v).sum()
        });
        atoms + dens
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    x: a.x.clone(),
                    mass: c * a.mass,
                })
                .collect(),
            density: self.density.as_ref().map(|d| Density {
                grid: d.grid.clone(),
                values: d.values.iter().map(|v| c * v).collect(),
            }),
        }
    }

    /// Sum of two measures; densities must live on the same grid.
    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim, other.dim)?;
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        let density = match (&self.density, &other.density) {
            (None, None) => None,
            (Some(d), None) | (None, Some(d)) => Some(d.clone()),
            (Some(a), Some(b)) => {
                if a.grid != b.grid {
                    return Err(Error::Invalid("cannot add densities on different grids".into()));
                }
                Some(Density {
                    grid: a.grid.clone(),
                    values: a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(),
                })
            }
        };
        Ok(Self {
            dim: self.dim,
            atoms,
            density,
        })
    }
}

/// `∫ φ dμ`.
pub fn pair(mu: &RadonMeasure, phi: &TestFunction) -> Result<f64> {
    check_dim(mu.dim, phi.dim())?;
    let atoms: f64 = mu.atoms.iter().map(|a| a.mass * phi.eval(&a.x)).sum();
    let dens = mu.density.as_ref().map_or(0.0, |d| {
        d.grid
            .nodes
            .iter()
            .zip(&d.grid.weights)
            .zip(&d.values)
            .map(|((x, w), v)| w * v * phi.eval(x))
            .sum()
    });
    Ok(atoms + dens)
}

/// Total variation of the represented measure on `region`.
pub fn total_variation(mu: &RadonMeasure, region: &Region) -> Result<f64> {
    check_dim(mu.dim, region.dim())?;
    let atoms: f64 = mu
        .atoms
        .iter()
        .filter(|a| region.contains(&a.x))
        .map(|a| a.mass.abs())
        .sum();
    let dens = mu.density.as_ref().map_or(0.0, |d| {
        d.grid
            .nodes
            .iter()
            .zip(&d.grid.weights)
            .zip(&d.values)
            .filter(|((x, _), _)| region.contains_closed(x))
            .map(|((_, w), v)| w * v.abs())
            .sum()
    });
    Ok(atoms + dens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_json_round_trip() {
        let region = Region::new_ball(vec![0.0, 0.0], 1.0).unwrap();
        let grid = make_grid(&region, 4).unwrap();
        let values: Vec<f64> = grid.nodes.iter().map(|x| 1.0 + x[0]).collect();
        let mut mu = RadonMeasure::with_density(grid, values).unwrap();
        mu.atoms.push(Atom { x: vec![0.5, -0.25], mass: 2.0 });
        let text = serde_json::to_string(&mu).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["density"]["order"], 4);
        assert!(v["density"]["region"]["ball"].is_object());
        assert!(v["density"].get("grid").is_none());
        let back: RadonMeasure = serde_json::from_str(&text).unwrap();
        assert_eq!(back, mu);
        let truncated = text.replacen("\"values\":[", "\"values\":[9.0,", 1);
        assert!(serde_json::from_str::<RadonMeasure>(&truncated).is_err());
    }

    #[test]
    fn box_grid_size_and_volume() {
        let g = make_grid(&Region::cube(2, 0.0, 1.0), 4).unwrap();
        assert_eq!(g.len(), 16);
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ball_area() {
        let g = make_grid(&Region::new_ball(vec![0.0, 0.0], 1.0).unwrap(), 32).unwrap();
        assert!((g.weights.iter().sum::<f64>() - PI).abs() < 1e-4);
        for n in 1..=3 {
            let r = Region::new_ball(vec![0.3; n], 1.7).unwrap();
            let g = make_grid(&r, 8).unwrap();
            let s: f64 = g.weights.iter().sum();
            assert!((s - r.volume()).abs() < 1e-10 * r.volume(), "n={n}");
            assert!(g.nodes.iter().all(|x| r.contains_closed(x)));
            assert!(g.weights.iter().all(|w| *w > 0.0));
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        let g = make_grid(&Region::cube(1, -1.0, 1.0), 8).unwrap();
        let v = g.integrate(|x| x[0].powi(6));
        assert!((v - 2.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn order_range() {
        let r = Region::cube(1, 0.0, 1.0);
        assert!(make_grid(&r, 1).is_err());
        assert!(make_grid(&r, 65).is_err());
        assert!(make_grid(&r, 64).is_ok());
    }

    #[test]
    fn refinement_is_stable_for_polynomials() {
        let r = Region::new_box(vec![-0.5, 0.0], vec![1.0, 2.0]).unwrap();
        let poly = |x: &[f64]| x[0].powi(5) * x[1].powi(3) - 2.0 * x[0] * x[1] + 0.5;
        let a = make_grid(&r, 6).unwrap().integrate(poly);
        let b = make_grid(&r, 12).unwrap().integrate(poly);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn pairing_anchors() {
        let phi = TestFunction::bump(vec![0.0], 1.0);
        let delta = RadonMeasure::atomic(1, vec![Atom { x: vec![0.0], mass: 2.0 }]);
        assert_eq!(pair(&delta, &phi).unwrap(), 2.0);
        let leb = RadonMeasure::lebesgue(&Region::cube(1, -1.0, 1.0), 8).unwrap();
        // ∫_{-1}^{1} (1 - x²)³ dx = 32/35
        assert!((pair(&leb, &phi).unwrap() - 32.0 / 35.0).abs() < 1e-10);
        assert_eq!(pair(&RadonMeasure::zero(1), &phi).unwrap(), 0.0);
        let phi2 = TestFunction::bump(vec![0.0, 0.0], 1.0);
        assert!(matches!(pair(&leb, &phi2), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn total_variation_anchors() {
        let a = Region::cube(2, -1.0, 1.0);
        let delta = RadonMeasure::atomic(2, vec![Atom { x: vec![0.0, 0.0], mass: -3.0 }]);
        assert_eq!(total_variation(&delta, &a).unwrap(), 3.0);
        let leb = RadonMeasure::lebesgue(&Region::cube(2, 0.0, 1.0), 6).unwrap();
        assert!((total_variation(&leb, &Region::cube(2, 0.0, 1.0)).unwrap() - 1.0).abs() < 1e-10);
        let mixed = RadonMeasure::atomic(
            2,
            vec![
                Atom { x: vec![0.5, 0.0], mass: 1.0 },
                Atom { x: vec![-0.5, 0.0], mass: -1.0 },
            ],
        );
        assert_eq!(total_variation(&mixed, &a).unwrap(), 2.0);
        assert_eq!(mixed.mass(), 0.0);
    }

    #[test]
    fn box_tie_rule() {
        let b = Region::cube(1, -1.0, 1.0);
        assert!(b.contains(&[-1.0]));
        assert!(!b.contains(&[1.0]));
        let ball = Region::new_ball(vec![0.0], 1.0).unwrap();
        assert!(ball.contains(&[1.0]));
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let phi = TestFunction::new(vec![0.1, -0.2, 0.3], 1.3, 4, -0.7).unwrap();
        let x = [0.4, 0.1, -0.2];
        let g = phi.gradient(&x);
        let h = phi.hessian_rows(&x);
        let step = 1e-5;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += step;
            xm[i] -= step;
            let fd = (phi.eval(&xp) - phi.eval(&xm)) / (2.0 * step);
            assert!((fd - g[i]).abs() < 1e-8);
            let gp = phi.gradient(&xp);
            let gm = phi.gradient(&xm);
            for j in 0..3 {
                let fd = (gp[j] - gm[j]) / (2.0 * step);
                assert!((fd - h[i][j]).abs() < 1e-7);
            }
        }
        assert!(TestFunction::new(vec![0.0], 1.0, 2, 1.0).is_err());
    }

    #[test]
    fn neighbor_pairs_cover_each_axis() {
        let g = make_grid(&Region::cube(2, 0.0, 1.0), 3).unwrap();
        let pairs = g.neighbor_pairs();
        assert_eq!(pairs.len(), 12);
        for (a, b) in pairs {
            let d: usize = g.nodes[a]
                .iter()
                .zip(&g.nodes[b])
                .filter(|(x, y)| x != y)
                .count();
            assert_eq!(d, 1);
        }
    }
}
