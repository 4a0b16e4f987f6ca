//! Local functionals `Ψ(f; ·)` evaluated as Radon measures.
//!
//! Integrand families are evaluated by quadrature from the exact jet of `f`;
//! the discrete Monge-Ampère operator of a max-affine function is computed
//! exactly as a sum of atoms at the vertices of its subdivision.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convexfn::{dot, norm2, AffineMap, Body, ConvexFunction, Jet, Piece};
use crate::error::{check_dim, Error, Result};
use crate::geometry::hull_volume;
use crate::linalg::{mixed_discriminant, mixed_discriminant_with_multiplicity, SymMatrix};
use crate::measure::{make_grid, Atom, QuadratureGrid, RadonMeasure, Region};

/// Upper limit on the number of pieces accepted by [`discrete_ma`].
pub const MAX_PIECES: usize = 64;

/// Monomial `coeff · x^α · s^p · v^β` of a top-degree weight `ψ(x)[s, v]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightMonomial {
    pub coeff: f64,
    #[serde(default)]
    pub x_pow: Vec<u32>,
    #[serde(default)]
    pub s_pow: u32,
    #[serde(default)]
    pub v_pow: Vec<u32>,
}

/// `coeff · s^p · v^β · minor_{rows, cols}(D²f)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinorTerm {
    pub coeff: f64,
    #[serde(default)]
    pub s_pow: u32,
    #[serde(default)]
    pub v_pow: Vec<u32>,
    #[serde(default)]
    pub rows: Vec<usize>,
    #[serde(default)]
    pub cols: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub spec: FunctionalSpec,
}

/// Description of a local functional on `Conv(ℝⁿ, ℝ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSpec {
    pub dim: usize,
    #[serde(flatten)]
    pub kind: SpecKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SpecKind {
    /// `f^a |∇f|^{2b} D(D²f[c], Id[n-c])`.
    #[serde(rename = "efam")]
    EFam { a: u32, b: u32, c: usize },
    /// `f^a |∇f|^{2(b-1)} D(D²f[c], ∇f∇fᵀ, Id[n-c-1])`.
    #[serde(rename = "ffam")]
    FFam { a: u32, b: u32, c: usize },
    /// Planar family `f^b |∇f|^{2(j-1)} D(D²f, sym(∇f ⊗ I∇f))`, `I` the
    /// counterclockwise quarter turn.
    #[serde(rename = "ftilde")]
    FTilde { b: u32, j: u32 },
    /// `ψ(x)[f, ∇f] det D²f`.
    #[serde(rename = "top_degree")]
    TopDegree { weight: Vec<WeightMonomial> },
    /// `P(f, ∇f, D²f)` with `P` a polynomial in `(s, v)` times minors.
    #[serde(rename = "poly_minor")]
    PolyMinor { terms: Vec<MinorTerm> },
    /// Exact Monge-Ampère measure of a max-affine function.
    #[serde(rename = "discrete_ma")]
    DiscreteMa,
    #[serde(rename = "lin_comb")]
    LinComb { terms: Vec<Term> },
    /// `δ₀` when `f` has a kink at the origin, else zero (n = 1).
    #[serde(rename = "discontinuous_1d")]
    Discontinuous1d,
}

impl FunctionalSpec {
    pub fn new(dim: usize, kind: SpecKind) -> Result<Self> {
        let s = Self { dim, kind };
        s.validate()?;
        Ok(s)
    }

    pub fn efam(dim: usize, a: u32, b: u32, c: usize) -> Result<Self> {
        Self::new(dim, SpecKind::EFam { a, b, c })
    }

    pub fn ffam(dim: usize, a: u32, b: u32, c: usize) -> Result<Self> {
        Self::new(dim, SpecKind::FFam { a, b, c })
    }

    pub fn ftilde(b: u32, j: u32) -> Result<Self> {
        Self::new(2, SpecKind::FTilde { b, j })
    }

    /// Real Monge-Ampère operator `E^{0,0}_n`.
    pub fn monge_ampere(dim: usize) -> Self {
        Self {
            dim,
            kind: SpecKind::EFam { a: 0, b: 0, c: dim },
        }
    }

    /// Hessian measure `E^{0,0}_k`.
    pub fn hessian_measure(dim: usize, k: usize) -> Result<Self> {
        Self::efam(dim, 0, 0, k)
    }

    pub fn lin_comb(dim: usize, terms: Vec<(f64, FunctionalSpec)>) -> Result<Self> {
        Self::new(
            dim,
            SpecKind::LinComb {
                terms: terms
                    .into_iter()
                    .map(|(coeff, spec)| Term { coeff, spec })
                    .collect(),
            },
        )
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s).map_err(|e| Error::Invalid(e.to_string()))?;
        spec.validate()?;
        Ok(spec.canonical())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim;
        if !(1..=3).contains(&n) {
            return Err(Error::OutOfRange(format!("dimension {n} not in 1..=3")));
        }
        match &self.kind {
            SpecKind::EFam { c, .. } => {
                if *c > n {
                    return Err(Error::OutOfRange(format!("E-family needs c <= n, got c={c}")));
                }
            }
            SpecKind::FFam { b, c, .. } => {
                if n < 2 {
                    return Err(Error::OutOfRange("F-family is empty for n = 1".into()));
                }
                if *b < 1 || *c < 1 || *c > n - 1 {
                    return Err(Error::OutOfRange(format!(
                        "F-family needs b >= 1 and 1 <= c <= n-1, got b={b}, c={c}"
                    )));
                }
            }
            SpecKind::FTilde { j, .. } => {
                if n != 2 {
                    return Err(Error::OutOfRange("F-tilde family exists only for n = 2".into()));
                }
                if *j < 1 {
                    return Err(Error::OutOfRange("F-tilde needs j >= 1".into()));
                }
            }
            SpecKind::TopDegree { weight } => {
                for m in weight {
                    if !m.x_pow.is_empty() {
                        check_dim(n, m.x_pow.len())?;
                    }
                    if !m.v_pow.is_empty() {
                        check_dim(n, m.v_pow.len())?;
                    }
                    if !m.coeff.is_finite() {
                        return Err(Error::Invalid("non-finite weight coefficient".into()));
                    }
                }
            }
            SpecKind::PolyMinor { terms } => {
                for t in terms {
                    if !t.v_pow.is_empty() {
                        check_dim(n, t.v_pow.len())?;
                    }
                    check_dim(t.rows.len(), t.cols.len())?;
                    for set in [&t.rows, &t.cols] {
                        if set.len() > n
                            || set.iter().any(|&i| i >= n)
                            || set.windows(2).any(|w| w[0] >= w[1])
                        {
                            return Err(Error::Invalid(format!(
                                "minor index set {set:?} must be strictly increasing within 0..{n}"
                            )));
                        }
                    }
                    if !t.coeff.is_finite() {
                        return Err(Error::Invalid("non-finite minor coefficient".into()));
                    }
                }
            }
            SpecKind::DiscreteMa => {}
            SpecKind::Discontinuous1d => {
                if n != 1 {
                    return Err(Error::OutOfRange("discontinuous functional is defined for n = 1".into()));
                }
            }
            SpecKind::LinComb { terms } => {
                if terms.is_empty() {
                    return Err(Error::Invalid("empty linear combination".into()));
                }
                for t in terms {
                    check_dim(n, t.spec.dim)?;
                    t.spec.validate()?;
                    if !t.coeff.is_finite() {
                        return Err(Error::Invalid("non-finite combination coefficient".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Canonical form: minor symbols with `rows <= cols`.
    pub fn canonical(mut self) -> Self {
        match &mut self.kind {
            SpecKind::PolyMinor { terms } => {
                for t in terms.iter_mut() {
                    if t.rows > t.cols {
                        std::mem::swap(&mut t.rows, &mut t.cols);
                    }
                }
            }
            SpecKind::LinComb { terms } => {
                for t in terms.iter_mut() {
                    t.spec = t.spec.clone().canonical();
                }
            }
            _ => {}
        }
        self
    }

    /// Formal degree of homogeneity (the largest one for mixed specs).
    pub fn homogeneity_degree(&self) -> usize {
        let n = self.dim;
        match &self.kind {
            SpecKind::EFam { a, b, c } | SpecKind::FFam { a, b, c } => *a as usize + 2 * *b as usize + c,
            SpecKind::FTilde { b, j } => *b as usize + 2 * *j as usize + 1,
            SpecKind::TopDegree { weight } => weight
                .iter()
                .map(|m| n + m.s_pow as usize + m.v_pow.iter().sum::<u32>() as usize)
                .max()
                .unwrap_or(n),
            SpecKind::PolyMinor { terms } => terms
                .iter()
                .map(|t| t.s_pow as usize + t.v_pow.iter().sum::<u32>() as usize + t.rows.len())
                .max()
                .unwrap_or(0),
            SpecKind::DiscreteMa => n,
            SpecKind::Discontinuous1d => 0,
            SpecKind::LinComb { terms } => terms
                .iter()
                .map(|t| t.spec.homogeneity_degree())
                .max()
                .unwrap_or(0),
        }
    }

    /// Degree of polynomiality in the added affine function.
    pub fn polynomial_degree(&self) -> usize {
        match &self.kind {
            SpecKind::EFam { a, b, .. } | SpecKind::FFam { a, b, .. } => *a as usize + 2 * *b as usize,
            SpecKind::FTilde { b, j } => *b as usize + 2 * *j as usize,
            SpecKind::TopDegree { weight } => weight
                .iter()
                .map(|m| m.s_pow as usize + m.v_pow.iter().sum::<u32>() as usize)
                .max()
                .unwrap_or(0),
            SpecKind::PolyMinor { terms } => terms
                .iter()
                .map(|t| t.s_pow as usize + t.v_pow.iter().sum::<u32>() as usize)
                .max()
                .unwrap_or(0),
            SpecKind::DiscreteMa | SpecKind::Discontinuous1d => 0,
            SpecKind::LinComb { terms } => terms
                .iter()
                .map(|t| t.spec.polynomial_degree())
                .max()
                .unwrap_or(0),
        }
    }

    /// True when every term has the same degree of homogeneity.
    pub fn is_homogeneous(&self) -> bool {
        let n = self.dim;
        let k = self.homogeneity_degree();
        match &self.kind {
            SpecKind::TopDegree { weight } => weight
                .iter()
                .all(|m| n + m.s_pow as usize + m.v_pow.iter().sum::<u32>() as usize == k),
            SpecKind::PolyMinor { terms } => terms
                .iter()
                .all(|t| t.s_pow as usize + t.v_pow.iter().sum::<u32>() as usize + t.rows.len() == k),
            SpecKind::LinComb { terms } => terms
                .iter()
                .all(|t| t.spec.is_homogeneous() && t.spec.homogeneity_degree() == k),
            SpecKind::Discontinuous1d => false,
            _ => true,
        }
    }

    fn is_pointwise(&self) -> bool {
        !matches!(
            self.kind,
            SpecKind::DiscreteMa | SpecKind::Discontinuous1d | SpecKind::LinComb { .. }
        )
    }
}

fn monomial(v: &[f64], pows: &[u32]) -> f64 {
    pows.iter().zip(v).map(|(p, x)| x.powi(*p as i32)).product()
}

/// Quarter-turn `I v` (counterclockwise).
pub fn quarter_turn(v: &[f64]) -> [f64; 2] {
    [-v[1], v[0]]
}

/// Node value of a pointwise spec from the jet of `f` at `x`.
fn integrand(spec: &FunctionalSpec, jet: &Jet, x: &[f64]) -> Result<f64> {
    let n = spec.dim;
    let g2 = norm2(&jet.grad);
    Ok(match &spec.kind {
        SpecKind::EFam { a, b, c } => {
            jet.value.powi(*a as i32)
                * g2.powi(*b as i32)
                * mixed_discriminant_with_multiplicity(&jet.hess, *c, None, n)?
        }
        SpecKind::FFam { a, b, c } => {
            let ggt = SymMatrix::outer(&jet.grad);
            jet.value.powi(*a as i32)
                * g2.powi(*b as i32 - 1)
                * mixed_discriminant_with_multiplicity(&jet.hess, *c, Some(&ggt), n)?
        }
        SpecKind::FTilde { b, j } => {
            let mixed = SymMatrix::sym_outer(&jet.grad, &quarter_turn(&jet.grad));
            jet.value.powi(*b as i32) * g2.powi(*j as i32 - 1) * mixed_discriminant(&[jet.hess, mixed])?
        }
        SpecKind::TopDegree { weight } => {
            let w: f64 = weight
                .iter()
                .map(|m| {
                    m.coeff
                        * monomial(x, &m.x_pow)
                        * jet.value.powi(m.s_pow as i32)
                        * monomial(&jet.grad, &m.v_pow)
                })
                .sum();
            w * jet.hess.det()
        }
        SpecKind::PolyMinor { terms } => terms
            .iter()
            .map(|t| {
                t.coeff
                    * jet.value.powi(t.s_pow as i32)
                    * monomial(&jet.grad, &t.v_pow)
                    * jet.hess.minor(&t.rows, &t.cols)
            })
            .sum(),
        _ => unreachable!("not a pointwise spec"),
    })
}

/// `f ∘ g`, staying max-affine when `f` is.
pub fn compose(f: &ConvexFunction, g: &AffineMap) -> Result<ConvexFunction> {
    check_dim(f.dim, g.dim())?;
    if let Body::MaxAffine { pieces } = &f.body {
        let pieces = pieces
            .iter()
            .map(|p| Piece::new(g.apply_transpose(&p.v), dot(&p.v, &g.w) + p.b))
            .collect();
        return ConvexFunction::max_affine(pieces);
    }
    f.clone().pullback(g.clone())
}

/// `Ψ(f; ·)` restricted to `region`.
///
/// Integrand families need every leaf of `f` to be smooth. Max/min nodes
/// of smooth functions are accepted as long as every crease crossed by the
/// grid is C¹ (no gradient jump), in which case the measure has no singular
/// part and the branch-wise density is exact.
pub fn evaluate(
    spec: &FunctionalSpec,
    f: &ConvexFunction,
    region: &Region,
    order: usize,
) -> Result<RadonMeasure> {
    evaluate_mapped(spec, f, region, order, None)
}

/// `[π(g)Ψ](f; B) = Ψ(f ∘ g; g⁻¹(B))` as a measure on `B`.
pub fn pushforward_affine(
    spec: &FunctionalSpec,
    f: &ConvexFunction,
    g: &AffineMap,
    region: &Region,
    order: usize,
) -> Result<RadonMeasure> {
    evaluate_mapped(spec, f, region, order, Some(g))
}

fn evaluate_mapped(
    spec: &FunctionalSpec,
    f: &ConvexFunction,
    region: &Region,
    order: usize,
    g: Option<&AffineMap>,
) -> Result<RadonMeasure> {
    spec.validate()?;
    check_dim(spec.dim, f.dim)?;
    check_dim(spec.dim, region.dim())?;
    if let Some(g) = g {
        check_dim(spec.dim, g.dim())?;
    }
    let n = spec.dim;
    match &spec.kind {
        SpecKind::LinComb { terms } => {
            let mut acc = RadonMeasure::zero(n);
            for t in terms {
                let m = evaluate_mapped(&t.spec, f, region, order, g)?;
                acc = acc.add(&m.scaled(t.coeff))?;
            }
            Ok(acc)
        }
        SpecKind::DiscreteMa | SpecKind::Discontinuous1d => {
            let fg = match g {
                Some(g) => compose(f, g)?,
                None => f.clone(),
            };
            let atoms = if matches!(spec.kind, SpecKind::DiscreteMa) {
                discrete_ma_atoms(&fg)?
            } else {
                discontinuous_atoms(&fg)?
            };
            let atoms = atoms
                .into_iter()
                .map(|a| Atom {
                    x: g.map_or(a.x.clone(), |g| g.apply(&a.x)),
                    mass: a.mass,
                })
                .filter(|a| region.contains(&a.x))
                .collect();
            Ok(RadonMeasure::atomic(n, atoms))
        }
        _ => {
            debug_assert!(spec.is_pointwise());
            let grid = make_grid(region, order)?;
            let values = match g {
                None => density_values(spec, f, &grid, None, 1.0)?,
                Some(g) => {
                    let fg = compose(f, g)?;
                    let ginv = g.inverse()?;
                    density_values(spec, &fg, &grid, Some(&ginv), 1.0 / g.det().abs())?
                }
            };
            RadonMeasure::with_density(grid, values)
        }
    }
}

fn density_values(
    spec: &FunctionalSpec,
    f: &ConvexFunction,
    grid: &QuadratureGrid,
    node_map: Option<&AffineMap>,
    jacobian: f64,
) -> Result<Vec<f64>> {
    if !f.has_smooth_leaves() {
        return Err(Error::NotC2(
            "integrand functionals need smooth leaves (max-affine has a singular Hessian measure)".into(),
        ));
    }
    let points: Vec<Vec<f64>> = grid
        .nodes
        .iter()
        .map(|y| node_map.map_or_else(|| y.clone(), |m| m.apply(y)))
        .collect();
    let evaluated: Vec<(f64, Vec<bool>)> = points
        .par_iter()
        .map(|x| {
            let mut branches = Vec::new();
            let jet = f.piecewise_jet(x, &mut branches).map_err(kink_is_crease)?;
            Ok((integrand(spec, &jet, x)? * jacobian, branches))
        })
        .collect::<Result<_>>()?;
    if f.lattice_nodes() > 0 {
        for (a, b) in grid.neighbor_pairs() {
            if evaluated[a].1 != evaluated[b].1 {
                check_crease(f, &points[a], &points[b], &evaluated[a].1)?;
            }
        }
    }
    Ok(evaluated.into_iter().map(|(v, _)| v).collect())
}

fn kink_is_crease(e: Error) -> Error {
    match e {
        Error::NotDifferentiable { point } => Error::NotC2(format!("kink at {point:?}")),
        e => e,
    }
}

/// Locates a branch switch on the segment `[xa, xb]` by bisection and
/// rejects it when the gradient jumps across.
fn check_crease(f: &ConvexFunction, xa: &[f64], xb: &[f64], sig_a: &[bool]) -> Result<()> {
    let at = |t: f64| -> Vec<f64> { xa.iter().zip(xb).map(|(a, b)| a + t * (b - a)).collect() };
    let signature = |x: &[f64]| -> Result<(Vec<bool>, Vec<f64>)> {
        let mut br = Vec::new();
        let jet = f.piecewise_jet(x, &mut br).map_err(kink_is_crease)?;
        Ok((br, jet.grad))
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if signature(&at(mid))?.0 == sig_a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (_, g_lo) = signature(&at(lo))?;
    let (_, g_hi) = signature(&at(hi))?;
    let jump = norm2(&g_lo.iter().zip(&g_hi).map(|(a, b)| a - b).collect::<Vec<_>>()).sqrt();
    let scale = 1.0 + norm2(&g_lo).sqrt();
    if jump > 1e-6 * scale {
        return Err(Error::NotC2(format!(
            "crease with gradient jump {jump:.3e} near {:?}",
            at(lo)
        )));
    }
    Ok(())
}

fn discontinuous_atoms(f: &ConvexFunction) -> Result<Vec<Atom>> {
    check_dim(1, f.dim)?;
    let right = f.directional_derivative(&[0.0], &[1.0])?;
    let left = -f.directional_derivative(&[0.0], &[-1.0])?;
    Ok(if (right - left).abs() > 1e-9 {
        vec![Atom { x: vec![0.0], mass: 1.0 }]
    } else {
        Vec::new()
    })
}

/// Exact Monge-Ampère measure of a max-affine `f`, restricted to `region`.
pub fn discrete_ma(f: &ConvexFunction, region: &Region) -> Result<RadonMeasure> {
    check_dim(f.dim, region.dim())?;
    let atoms = discrete_ma_atoms(f)?
        .into_iter()
        .filter(|a| region.contains(&a.x))
        .collect();
    Ok(RadonMeasure::atomic(f.dim, atoms))
}

/// All atoms of `MA(f)` on ℝⁿ: one per vertex of the subdivision induced
/// by the pieces, with mass the volume of the hull of the active slopes.
pub fn discrete_ma_atoms(f: &ConvexFunction) -> Result<Vec<Atom>> {
    let Body::MaxAffine { pieces } = &f.body else {
        return Err(Error::WrongRepresentation(
            "discrete Monge-Ampère needs a max-affine function".into(),
        ));
    };
    let n = f.dim;
    if pieces.len() > MAX_PIECES {
        return Err(Error::OutOfRange(format!(
            "{} pieces exceed the limit of {MAX_PIECES}",
            pieces.len()
        )));
    }
    for (i, p) in pieces.iter().enumerate() {
        if pieces[i + 1..].iter().any(|q| q == p) {
            return Err(Error::DegenerateSubdivision(format!("piece {i} appears twice")));
        }
    }
    let scale = pieces
        .iter()
        .map(|p| p.b.abs().max(p.v.iter().fold(0.0f64, |a, x| a.max(x.abs()))))
        .fold(1.0f64, f64::max);

    let mut vertices: Vec<Vec<f64>> = Vec::new();
    for subset in combinations(pieces.len(), n + 1) {
        let base = &pieces[subset[0]];
        let rows: Vec<Vec<f64>> = subset[1..]
            .iter()
            .map(|&i| pieces[i].v.iter().zip(&base.v).map(|(a, b)| a - b).collect())
            .collect();
        let rhs: Vec<f64> = subset[1..].iter().map(|&i| base.b - pieces[i].b).collect();
        let Some(x) = solve_small(&rows, &rhs) else {
            continue;
        };
        let fx = f.value(&x);
        let tol = 1e-9 * (scale + fx.abs() + scale * norm2(&x).sqrt());
        if subset.iter().any(|&i| fx - pieces[i].eval(&x) > tol) {
            continue;
        }
        let xscale = 1.0 + norm2(&x).sqrt();
        if !vertices
            .iter()
            .any(|y| norm2(&y.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>()).sqrt() <= 1e-9 * xscale)
        {
            vertices.push(x);
        }
    }

    let mut atoms = Vec::new();
    for x in vertices {
        let fx = f.value(&x);
        let tol = 1e-9 * (scale + fx.abs() + scale * norm2(&x).sqrt());
        let slopes: Vec<Vec<f64>> = pieces
            .iter()
            .filter(|p| fx - p.eval(&x) <= tol)
            .map(|p| p.v.clone())
            .collect();
        let mass = hull_volume(&slopes, n);
        if mass > 0.0 {
            // adding zero turns -0.0 into 0.0
            let x = x.into_iter().map(|v| v + 0.0).collect();
            atoms.push(Atom { x, mass });
        }
    }
    atoms.sort_by(|a, b| {
        a.x.iter()
            .zip(&b.x)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(atoms)
}

/// Solves the square system by Cramer's rule; `None` when near-singular.
fn solve_small(rows: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rows.len();
    let det = |m: &[Vec<f64>]| -> f64 {
        match n {
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            3 => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
            _ => unreachable!(),
        }
    };
    let d = det(rows);
    let scale = rows.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
    if d.abs() <= 1e-12 * scale.powi(n as i32) || scale == 0.0 {
        return None;
    }
    Some(
        (0..n)
            .map(|k| {
                let mut m = rows.to_vec();
                for (row, r) in m.iter_mut().zip(rhs) {
                    row[k] = *r;
                }
                det(&m) / d
            })
            .collect(),
    )
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    rec(0, m, k, &mut cur, &mut out);
    out
}

/// Total mass of `Ψ(f)` on `region`.
pub fn total_mass(spec: &FunctionalSpec, f: &ConvexFunction, region: &Region, order: usize) -> Result<f64> {
    Ok(evaluate(spec, f, region, order)?.mass())
}
