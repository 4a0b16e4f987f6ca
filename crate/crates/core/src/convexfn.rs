//! Finite convex functions on ℝⁿ (n <= 3) as symbolic expression trees,
//! with exact values, gradients and Hessians where they exist.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::SymMatrix;
use crate::measure::{Region, TestFunction};

/// Active-piece gap below which a max is treated as a tie.
pub const TIE_GAP: f64 = 1e-10;

/// Relative tolerance of the sampled midpoint-convexity certificate.
pub const CONVEXITY_TOL: f64 = 1e-9;

/// Number of random triples drawn by the sampled convexity certificate.
pub const CONVEXITY_SAMPLES: usize = 2000;

/// Affine function `x ↦ s + ⟨v, x⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineFunctional {
    pub s: f64,
    pub v: Vec<f64>,
}

impl AffineFunctional {
    pub fn new(s: f64, v: Vec<f64>) -> Self {
        Self { s, v }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.s + dot(&self.v, x)
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self {
            s: t * self.s,
            v: self.v.iter().map(|x| t * x).collect(),
        }
    }
}

/// Invertible affine map `x ↦ M x + w`, `M` given by rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub m: Vec<Vec<f64>>,
    pub w: Vec<f64>,
}

impl AffineMap {
    pub fn new(m: Vec<Vec<f64>>, w: Vec<f64>) -> Result<Self> {
        let g = Self { m, w };
        g.validate()?;
        Ok(g)
    }

    pub fn identity(n: usize) -> Self {
        let m = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { m, w: vec![0.0; n] }
    }

    pub fn translation(w: Vec<f64>) -> Self {
        let mut g = Self::identity(w.len());
        g.w = w;
        g
    }

    fn validate(&self) -> Result<()> {
        let n = self.w.len();
        if !(1..=3).contains(&n) {
            return Err(Error::OutOfRange(format!("affine map dimension {n}")));
        }
        check_dim(n, self.m.len())?;
        for row in &self.m {
            check_dim(n, row.len())?;
        }
        let scale = self
            .m
            .iter()
            .flatten()
            .fold(0.0f64, |acc, x| acc.max(x.abs()));
        if !(self.det().abs() > 1e-14 * scale.powi(n as i32)) || !scale.is_finite() {
            return Err(Error::SingularMap);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.m
            .iter()
            .zip(&self.w)
            .map(|(row, wi)| dot(row, x) + wi)
            .collect()
    }

    /// `M d` (linear part only).
    pub fn apply_linear(&self, d: &[f64]) -> Vec<f64> {
        self.m.iter().map(|row| dot(row, d)).collect()
    }

    /// `Mᵀ g`.
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|j| (0..n).map(|i| self.m[i][j] * g[i]).sum())
            .collect()
    }

    pub fn det(&self) -> f64 {
        let n = self.dim();
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            rows[i].copy_from_slice(&self.m[i]);
        }
        det_dense(&rows)
    }

    pub fn inverse(&self) -> Result<Self> {
        let n = self.dim();
        let det = self.det();
        if det == 0.0 {
            return Err(Error::SingularMap);
        }
        let inv: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| cofactor(&self.m, j, i) / det).collect())
            .collect();
        let w = inv
            .iter()
            .map(|row| -dot(row, &self.w))
            .collect();
        Ok(Self { m: inv, w })
    }
}

fn det_dense(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => unreachable!(),
    }
}

fn cofactor(m: &[Vec<f64>], i: usize, j: usize) -> f64 {
    let n = m.len();
    if n == 1 {
        return 1.0;
    }
    let sub: Vec<Vec<f64>> = (0..n)
        .filter(|&r| r != i)
        .map(|r| (0..n).filter(|&c| c != j).map(|c| m[r][c]).collect())
        .collect();
    let sign = if (i + j).is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * det_dense(&sub)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Affine piece `x ↦ ⟨v, x⟩ + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub v: Vec<f64>,
    pub b: f64,
}

impl Piece {
    pub fn new(v: Vec<f64>, b: f64) -> Self {
        Self { v, b }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.v, x) + self.b
    }
}

/// A finite convex function on ℝⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexFunction {
    pub dim: usize,
    #[serde(flatten)]
    pub body: Body,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    /// `½ xᵀAx + ⟨v,x⟩ + s`, `A` positive semidefinite.
    Quadratic { a: SymMatrix, v: Vec<f64>, s: f64 },
    /// `maxᵢ (⟨vᵢ,x⟩ + bᵢ)`.
    MaxAffine { pieces: Vec<Piece> },
    /// `β⁻¹ log Σᵢ exp(β(⟨vᵢ,x⟩ + bᵢ))`.
    LogSumExp { pieces: Vec<Piece>, beta: f64 },
    /// `c Σⱼ xⱼᵖ`, `p` even.
    Pnorm { p: u32, c: f64 },
    Sum {
        left: Box<ConvexFunction>,
        right: Box<ConvexFunction>,
    },
    Max {
        left: Box<ConvexFunction>,
        right: Box<ConvexFunction>,
    },
    /// Pointwise minimum; only produced by [`lattice_min`] after certification.
    Min {
        left: Box<ConvexFunction>,
        right: Box<ConvexFunction>,
    },
    Scale { t: f64, inner: Box<ConvexFunction> },
    /// `inner ∘ g` with `g(x) = M x + w`.
    Pullback {
        #[serde(flatten)]
        map: AffineMap,
        inner: Box<ConvexFunction>,
    },
    /// `inner + φ` for a bump `φ`; convexity is certified by the constructor.
    Perturb {
        inner: Box<ConvexFunction>,
        bump: TestFunction,
    },
}

/// Value, gradient and Hessian at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: SymMatrix,
}

impl Jet {
    fn add(mut self, other: Jet) -> Jet {
        self.value += other.value;
        for (a, b) in self.grad.iter_mut().zip(&other.grad) {
            *a += b;
        }
        self.hess = self.hess.add(&other.hess);
        self
    }
}

impl ConvexFunction {
    fn node(dim: usize, body: Body) -> Self {
        Self { dim, body }
    }

    pub fn quadratic(a: SymMatrix, v: Vec<f64>, s: f64) -> Result<Self> {
        let f = Self::node(a.dim(), Body::Quadratic { a, v, s });
        f.validate()?;
        Ok(f)
    }

    /// `½|x|²`.
    pub fn half_norm_sq(n: usize) -> Self {
        Self::node(
            n,
            Body::Quadratic {
                a: SymMatrix::identity(n),
                v: vec![0.0; n],
                s: 0.0,
            },
        )
    }

    /// The affine function `ℓ` as a (degenerate) quadratic.
    pub fn affine(l: &AffineFunctional) -> Self {
        Self::node(
            l.dim(),
            Body::Quadratic {
                a: SymMatrix::zeros(l.dim()),
                v: l.v.clone(),
                s: l.s,
            },
        )
    }

    pub fn max_affine(pieces: Vec<Piece>) -> Result<Self> {
        let dim = pieces.first().map_or(0, |p| p.v.len());
        let f = Self::node(dim, Body::MaxAffine { pieces });
        f.validate()?;
        Ok(f)
    }

    pub fn log_sum_exp(pieces: Vec<Piece>, beta: f64) -> Result<Self> {
        let dim = pieces.first().map_or(0, |p| p.v.len());
        let f = Self::node(dim, Body::LogSumExp { pieces, beta });
        f.validate()?;
        Ok(f)
    }

    pub fn pnorm(dim: usize, p: u32, c: f64) -> Result<Self> {
        let f = Self::node(dim, Body::Pnorm { p, c });
        f.validate()?;
        Ok(f)
    }

    pub fn sum(left: Self, right: Self) -> Result<Self> {
        check_dim(left.dim, right.dim)?;
        Ok(Self::node(
            left.dim,
            Body::Sum {
                left: Box::new(left),
                right: Box::new(right),
            },
        ))
    }

    /// Sum of a non-empty list.
    pub fn sum_all(mut fs: Vec<Self>) -> Result<Self> {
        let first = fs
            .drain(..1)
            .next()
            .ok_or_else(|| Error::Invalid("empty sum".into()))?;
        fs.into_iter().try_fold(first, Self::sum)
    }

    pub fn scale(t: f64, inner: Self) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Invalid(format!("scale factor {t} must be finite and >= 0")));
        }
        Ok(Self::node(
            inner.dim,
            Body::Scale {
                t,
                inner: Box::new(inner),
            },
        ))
    }

    /// `self ∘ g`.
    pub fn pullback(self, map: AffineMap) -> Result<Self> {
        map.validate()?;
        check_dim(self.dim, map.dim())?;
        Ok(Self::node(
            self.dim,
            Body::Pullback {
                map,
                inner: Box::new(self),
            },
        ))
    }

    /// `self + φ`, checked convex by sampling the Hessian over the bump
    /// support; fails with [`Error::NotConvex`] otherwise.
    pub fn perturb(self, bump: TestFunction) -> Result<Self> {
        check_dim(self.dim, bump.dim())?;
        bump.validate()?;
        let f = Self::node(
            self.dim,
            Body::Perturb {
                inner: Box::new(self),
                bump,
            },
        );
        f.check_perturbation_convex()?;
        Ok(f)
    }

    fn check_perturbation_convex(&self) -> Result<()> {
        let Body::Perturb { inner, bump } = &self.body else {
            return Ok(());
        };
        if !inner.is_c2() {
            // only the bump's own curvature can be checked against a smooth base
            return Err(Error::NotC2("perturbation of a non-C² function".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let n = self.dim;
        for _ in 0..CONVEXITY_SAMPLES {
            let x: Vec<f64> = loop {
                let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                if norm2(&y) <= 1.0 {
                    break y
                        .iter()
                        .zip(&bump.center)
                        .map(|(u, c)| c + bump.radius * u)
                        .collect();
                }
            };
            let h = self.hessian(&x)?;
            let lam = h.min_eigenvalue();
            if lam < -CONVEXITY_TOL * (1.0 + h.max_abs_entry()) {
                return Err(Error::NotConvex { violation: -lam });
            }
        }
        Ok(())
    }

    /// Parses and validates `function.json`.
    pub fn from_json(s: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(s).map_err(|e| Error::Invalid(e.to_string()))?;
        f.validate()?;
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    /// Structural checks on the whole tree.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim;
        if !(1..=3).contains(&n) {
            return Err(Error::OutOfRange(format!("dimension {n} not in 1..=3")));
        }
        match &self.body {
            Body::Quadratic { a, v, s } => {
                check_dim(n, a.dim())?;
                check_dim(n, v.len())?;
                if !s.is_finite() || v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Invalid("non-finite quadratic coefficient".into()));
                }
                if a.min_eigenvalue() < -1e-12 * (1.0 + a.max_abs_entry()) {
                    return Err(Error::Invalid("quadratic form is not positive semidefinite".into()));
                }
            }
            Body::MaxAffine { pieces } | Body::LogSumExp { pieces, .. } => {
                if pieces.is_empty() {
                    return Err(Error::Invalid("empty piece list".into()));
                }
                for p in pieces {
                    check_dim(n, p.v.len())?;
                    if !p.b.is_finite() || p.v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::Invalid("non-finite piece".into()));
                    }
                }
                if let Body::LogSumExp { beta, .. } = &self.body {
                    if !(*beta > 0.0 && beta.is_finite()) {
                        return Err(Error::Invalid(format!("sharpness {beta} must be > 0")));
                    }
                }
            }
            Body::Pnorm { p, c } => {
                if *p < 2 || p % 2 != 0 {
                    return Err(Error::Invalid(format!("pnorm exponent {p} must be even >= 2")));
                }
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(Error::Invalid(format!("pnorm scale {c} must be > 0")));
                }
            }
            Body::Sum { left, right } | Body::Max { left, right } | Body::Min { left, right } => {
                check_dim(n, left.dim)?;
                check_dim(n, right.dim)?;
                left.validate()?;
                right.validate()?;
            }
            Body::Scale { t, inner } => {
                if !(*t >= 0.0 && t.is_finite()) {
                    return Err(Error::Invalid(format!("scale factor {t} must be >= 0")));
                }
                check_dim(n, inner.dim)?;
                inner.validate()?;
            }
            Body::Pullback { map, inner } => {
                map.validate()?;
                check_dim(n, map.dim())?;
                check_dim(n, inner.dim)?;
                inner.validate()?;
            }
            Body::Perturb { inner, bump } => {
                check_dim(n, inner.dim)?;
                check_dim(n, bump.dim())?;
                bump.validate()?;
                inner.validate()?;
            }
        }
        Ok(())
    }

    /// True when every leaf is smooth and no max/min node appears.
    pub fn is_c2(&self) -> bool {
        match &self.body {
            Body::Quadratic { .. } | Body::LogSumExp { .. } | Body::Pnorm { .. } => true,
            Body::MaxAffine { .. } | Body::Max { .. } | Body::Min { .. } => false,
            Body::Sum { left, right } => left.is_c2() && right.is_c2(),
            Body::Scale { inner, .. } | Body::Pullback { inner, .. } | Body::Perturb { inner, .. } => {
                inner.is_c2()
            }
        }
    }

    /// True when every leaf is smooth; max/min nodes are allowed.
    pub fn has_smooth_leaves(&self) -> bool {
        match &self.body {
            Body::Quadratic { .. } | Body::LogSumExp { .. } | Body::Pnorm { .. } => true,
            Body::MaxAffine { .. } => false,
            Body::Sum { left, right } | Body::Max { left, right } | Body::Min { left, right } => {
                left.has_smooth_leaves() && right.has_smooth_leaves()
            }
            Body::Scale { inner, .. } | Body::Pullback { inner, .. } | Body::Perturb { inner, .. } => {
                inner.has_smooth_leaves()
            }
        }
    }

    /// Number of max/min nodes in the tree.
    pub(crate) fn lattice_nodes(&self) -> usize {
        match &self.body {
            Body::Quadratic { .. } | Body::LogSumExp { .. } | Body::Pnorm { .. } | Body::MaxAffine { .. } => 0,
            Body::Sum { left, right } => left.lattice_nodes() + right.lattice_nodes(),
            Body::Max { left, right } | Body::Min { left, right } => {
                1 + left.lattice_nodes() + right.lattice_nodes()
            }
            Body::Scale { inner, .. } | Body::Pullback { inner, .. } | Body::Perturb { inner, .. } => {
                inner.lattice_nodes()
            }
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.value(x))
    }

    /// Value without the dimension check.
    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.body {
            Body::Quadratic { a, v, s } => 0.5 * dot(x, &a.apply(x)) + dot(v, x) + s,
            Body::MaxAffine { pieces } => pieces
                .iter()
                .map(|p| p.eval(x))
                .fold(f64::NEG_INFINITY, f64::max),
            Body::LogSumExp { pieces, beta } => {
                let z: Vec<f64> = pieces.iter().map(|p| p.eval(x)).collect();
                let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = z.iter().map(|zi| (beta * (zi - m)).exp()).sum();
                m + s.ln() / beta
            }
            Body::Pnorm { p, c } => c * x.iter().map(|xi| xi.powi(*p as i32)).sum::<f64>(),
            Body::Sum { left, right } => left.value(x) + right.value(x),
            Body::Max { left, right } => left.value(x).max(right.value(x)),
            Body::Min { left, right } => left.value(x).min(right.value(x)),
            Body::Scale { t, inner } => {
                if *t == 0.0 {
                    0.0
                } else {
                    t * inner.value(x)
                }
            }
            Body::Pullback { map, inner } => inner.value(&map.apply(x)),
            Body::Perturb { inner, bump } => inner.value(x) + bump.eval(x),
        }
    }

    /// Exact gradient; refuses at max-affine ties with distinct slopes.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        self.grad_at(x, x)
    }

    fn grad_at(&self, x: &[f64], origin: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim;
        Ok(match &self.body {
            Body::MaxAffine { pieces } => active_piece(pieces, x, origin)?.v.clone(),
            Body::Max { left, right } | Body::Min { left, right } => {
                let is_max = matches!(self.body, Body::Max { .. });
                let (lv, rv) = (left.value(x), right.value(x));
                let gap = if is_max { lv - rv } else { rv - lv };
                if gap.abs() <= tie_tol(lv, rv) {
                    let gl = left.grad_at(x, origin)?;
                    let gr = right.grad_at(x, origin)?;
                    if !grads_agree(&gl, &gr) {
                        return Err(Error::NotDifferentiable {
                            point: origin.to_vec(),
                        });
                    }
                    gl
                } else if gap > 0.0 {
                    left.grad_at(x, origin)?
                } else {
                    right.grad_at(x, origin)?
                }
            }
            Body::Sum { left, right } => {
                let mut g = left.grad_at(x, origin)?;
                for (a, b) in g.iter_mut().zip(right.grad_at(x, origin)?) {
                    *a += b;
                }
                g
            }
            Body::Scale { t, inner } => {
                if *t == 0.0 {
                    vec![0.0; n]
                } else {
                    inner.grad_at(x, origin)?.iter().map(|g| t * g).collect()
                }
            }
            Body::Pullback { map, inner } => {
                let g = inner.grad_at(&map.apply(x), origin)?;
                map.apply_transpose(&g)
            }
            Body::Perturb { inner, bump } => {
                let mut g = inner.grad_at(x, origin)?;
                for (a, b) in g.iter_mut().zip(bump.gradient(x)) {
                    *a += b;
                }
                g
            }
            Body::Quadratic { .. } | Body::LogSumExp { .. } | Body::Pnorm { .. } => {
                smooth_leaf_jet(self, x).grad
            }
        })
    }

    /// Exact Hessian; requires [`is_c2`](Self::is_c2).
    pub fn hessian(&self, x: &[f64]) -> Result<SymMatrix> {
        check_dim(self.dim, x.len())?;
        if !self.is_c2() {
            return Err(Error::NotC2("tree contains a max or max-affine node".into()));
        }
        Ok(self.jet_at(x, x, &mut None)?.hess)
    }

    /// Value, gradient and Hessian of a C² function.
    pub fn jet(&self, x: &[f64]) -> Result<Jet> {
        check_dim(self.dim, x.len())?;
        if !self.is_c2() {
            return Err(Error::NotC2("tree contains a max or max-affine node".into()));
        }
        self.jet_at(x, x, &mut None)
    }

    /// Jet of a function whose leaves are smooth but which may contain
    /// max/min nodes, taken from the active branch. Records the branch taken
    /// at each lattice node into `branches`.
    pub(crate) fn piecewise_jet(&self, x: &[f64], branches: &mut Vec<bool>) -> Result<Jet> {
        if !self.has_smooth_leaves() {
            return Err(Error::NotC2("max-affine leaf has a singular Hessian measure".into()));
        }
        let mut rec = Some(std::mem::take(branches));
        let jet = self.jet_at(x, x, &mut rec);
        *branches = rec.unwrap_or_default();
        jet
    }

    fn jet_at(&self, x: &[f64], origin: &[f64], branches: &mut Option<Vec<bool>>) -> Result<Jet> {
        let n = self.dim;
        Ok(match &self.body {
            Body::Quadratic { .. } | Body::LogSumExp { .. } | Body::Pnorm { .. } => smooth_leaf_jet(self, x),
            Body::MaxAffine { pieces } => {
                let p = active_piece(pieces, x, origin)?;
                Jet {
                    value: p.eval(x),
                    grad: p.v.clone(),
                    hess: SymMatrix::zeros(n),
                }
            }
            Body::Max { left, right } | Body::Min { left, right } => {
                let is_max = matches!(self.body, Body::Max { .. });
                let (lv, rv) = (left.value(x), right.value(x));
                let gap = if is_max { lv - rv } else { rv - lv };
                // in piecewise mode ties are settled by the caller's crease check
                let take_left = if branches.is_none() && gap.abs() <= tie_tol(lv, rv) {
                    let gl = left.grad_at(x, origin)?;
                    let gr = right.grad_at(x, origin)?;
                    if !grads_agree(&gl, &gr) {
                        return Err(Error::NotDifferentiable {
                            point: origin.to_vec(),
                        });
                    }
                    true
                } else {
                    gap > 0.0
                };
                if let Some(b) = branches.as_mut() {
                    b.push(take_left);
                }
                if take_left {
                    left.jet_at(x, origin, branches)?
                } else {
                    right.jet_at(x, origin, branches)?
                }
            }
            Body::Sum { left, right } => {
                let l = left.jet_at(x, origin, branches)?;
                l.add(right.jet_at(x, origin, branches)?)
            }
            Body::Scale { t, inner } => {
                if *t == 0.0 {
                    Jet {
                        value: 0.0,
                        grad: vec![0.0; n],
                        hess: SymMatrix::zeros(n),
                    }
                } else {
                    let j = inner.jet_at(x, origin, branches)?;
                    Jet {
                        value: t * j.value,
                        grad: j.grad.iter().map(|g| t * g).collect(),
                        hess: j.hess.scale(*t),
                    }
                }
            }
            Body::Pullback { map, inner } => {
                let j = inner.jet_at(&map.apply(x), origin, branches)?;
                Jet {
                    value: j.value,
                    grad: map.apply_transpose(&j.grad),
                    hess: j.hess.congruence(&map.m),
                }
            }
            Body::Perturb { inner, bump } => {
                let j = inner.jet_at(x, origin, branches)?;
                let h = SymMatrix::from_rows(&bump.hessian_rows(x))
                    .expect("bump Hessian is symmetric");
                j.add(Jet {
                    value: bump.eval(x),
                    grad: bump.gradient(x),
                    hess: h,
                })
            }
        })
    }

    /// One-sided directional derivative `f'(x; d) = lim_{t↓0} (f(x+td) - f(x))/t`.
    pub fn directional_derivative(&self, x: &[f64], d: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, d.len())?;
        Ok(self.dir_deriv(x, d))
    }

    fn dir_deriv(&self, x: &[f64], d: &[f64]) -> f64 {
        match &self.body {
            Body::Quadratic { .. } | Body::LogSumExp { .. } | Body::Pnorm { .. } => {
                dot(&smooth_leaf_jet(self, x).grad, d)
            }
            Body::MaxAffine { pieces } => {
                let vals: Vec<f64> = pieces.iter().map(|p| p.eval(x)).collect();
                let top = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                pieces
                    .iter()
                    .zip(&vals)
                    .filter(|(_, v)| top - **v <= TIE_GAP * (1.0 + top.abs()))
                    .map(|(p, _)| dot(&p.v, d))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            Body::Max { left, right } | Body::Min { left, right } => {
                let is_max = matches!(self.body, Body::Max { .. });
                let (lv, rv) = (left.value(x), right.value(x));
                let gap = if is_max { lv - rv } else { rv - lv };
                if gap.abs() <= tie_tol(lv, rv) {
                    let (a, b) = (left.dir_deriv(x, d), right.dir_deriv(x, d));
                    if is_max {
                        a.max(b)
                    } else {
                        a.min(b)
                    }
                } else if gap > 0.0 {
                    left.dir_deriv(x, d)
                } else {
                    right.dir_deriv(x, d)
                }
            }
            Body::Sum { left, right } => left.dir_deriv(x, d) + right.dir_deriv(x, d),
            Body::Scale { t, inner } => {
                if *t == 0.0 {
                    0.0
                } else {
                    t * inner.dir_deriv(x, d)
                }
            }
            Body::Pullback { map, inner } => inner.dir_deriv(&map.apply(x), &map.apply_linear(d)),
            Body::Perturb { inner, bump } => inner.dir_deriv(x, d) + dot(&bump.gradient(x), d),
        }
    }

    /// `t · self` (a `Scale` node).
    /// `t·f`; max-affine functions stay max-affine.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if let Body::MaxAffine { pieces } = &self.body {
            if t > 0.0 {
                return Self::max_affine(
                    pieces
                        .iter()
                        .map(|p| Piece::new(p.v.iter().map(|x| t * x).collect(), t * p.b))
                        .collect(),
                );
            }
            if t == 0.0 {
                return Self::max_affine(vec![Piece::new(vec![0.0; self.dim], 0.0)]);
            }
        }
        Self::scale(t, self.clone())
    }
}

fn tie_tol(a: f64, b: f64) -> f64 {
    TIE_GAP * (1.0 + a.abs().max(b.abs()))
}

fn grads_agree(a: &[f64], b: &[f64]) -> bool {
    let scale = 1.0 + norm2(a).sqrt().max(norm2(b).sqrt());
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * scale)
}

fn active_piece<'a>(pieces: &'a [Piece], x: &[f64], origin: &[f64]) -> Result<&'a Piece> {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, p) in pieces.iter().enumerate() {
        let v = p.eval(x);
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    let tol = TIE_GAP * (1.0 + best_val.abs());
    for (i, p) in pieces.iter().enumerate() {
        if i != best && best_val - p.eval(x) <= tol && p.v != pieces[best].v {
            return Err(Error::NotDifferentiable {
                point: origin.to_vec(),
            });
        }
    }
    Ok(&pieces[best])
}

fn smooth_leaf_jet(f: &ConvexFunction, x: &[f64]) -> Jet {
    let n = f.dim;
    match &f.body {
        Body::Quadratic { a, v, s } => {
            let ax = a.apply(x);
            Jet {
                value: 0.5 * dot(x, &ax) + dot(v, x) + s,
                grad: ax.iter().zip(v).map(|(p, q)| p + q).collect(),
                hess: *a,
            }
        }
        Body::LogSumExp { pieces, beta } => {
            let z: Vec<f64> = pieces.iter().map(|p| p.eval(x)).collect();
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|zi| (beta * (zi - m)).exp()).collect();
            let total: f64 = e.iter().sum();
            let w: Vec<f64> = e.iter().map(|ei| ei / total).collect();
            let mut grad = vec![0.0; n];
            for (p, wi) in pieces.iter().zip(&w) {
                for (g, vi) in grad.iter_mut().zip(&p.v) {
                    *g += wi * vi;
                }
            }
            // β (Σ wᵢ (vᵢ-g)(vᵢ-g)ᵀ), the centred form keeps it PSD
            let mut hess = SymMatrix::zeros(n);
            for (p, wi) in pieces.iter().zip(&w) {
                let dv: Vec<f64> = p.v.iter().zip(&grad).map(|(a, b)| a - b).collect();
                hess = hess.add(&SymMatrix::outer(&dv).scale(beta * wi));
            }
            Jet {
                value: m + total.ln() / beta,
                grad,
                hess,
            }
        }
        Body::Pnorm { p, c } => {
            let pi = *p as i32;
            let pf = *p as f64;
            let value = c * x.iter().map(|xi| xi.powi(pi)).sum::<f64>();
            let grad = x.iter().map(|xi| c * pf * xi.powi(pi - 1)).collect();
            let diag: Vec<f64> = x
                .iter()
                .map(|xi| c * pf * (pf - 1.0) * xi.powi(pi - 2))
                .collect();
            Jet {
                value,
                grad,
                hess: SymMatrix::diag(&diag),
            }
        }
        _ => unreachable!("not a smooth leaf"),
    }
}

/// `f ∨ h`. Two max-affine functions flatten into one, dropping exact
/// duplicate pieces.
pub fn lattice_max(f: &ConvexFunction, h: &ConvexFunction) -> Result<ConvexFunction> {
    check_dim(f.dim, h.dim)?;
    if let (Body::MaxAffine { pieces: a }, Body::MaxAffine { pieces: b }) = (&f.body, &h.body) {
        let mut pieces = a.clone();
        for p in b {
            if !pieces.contains(p) {
                pieces.push(p.clone());
            }
        }
        return ConvexFunction::max_affine(pieces);
    }
    Ok(ConvexFunction::node(
        f.dim,
        Body::Max {
            left: Box::new(f.clone()),
            right: Box::new(h.clone()),
        },
    ))
}

/// `f ∧ h` with a convexity certificate.
///
/// Two one-dimensional max-affine functions are handled exactly (the
/// result is again max-affine). Otherwise midpoint convexity is sampled on
/// [`CONVEXITY_SAMPLES`] random triples in `roi` (default `[-5, 5]ⁿ`).
pub fn lattice_min(
    f: &ConvexFunction,
    h: &ConvexFunction,
    roi: Option<&Region>,
) -> Result<ConvexFunction> {
    check_dim(f.dim, h.dim)?;
    if f == h {
        return Ok(f.clone());
    }
    if let (Body::MaxAffine { pieces: a }, Body::MaxAffine { pieces: b }) = (&f.body, &h.body) {
        if f.dim == 1 {
            return ConvexFunction::max_affine(min_max_affine_1d(a, b)?);
        }
    }
    let m = ConvexFunction::node(
        f.dim,
        Body::Min {
            left: Box::new(f.clone()),
            right: Box::new(h.clone()),
        },
    );
    let default_roi = Region::cube(f.dim, -5.0, 5.0);
    certify_convex(&m, roi.unwrap_or(&default_roi))?;
    Ok(m)
}

/// Sampled midpoint-convexity check on `region`'s bounding box.
pub fn certify_convex(f: &ConvexFunction, region: &Region) -> Result<()> {
    let (lo, hi) = region.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0417e);
    let mut worst = 0.0f64;
    for _ in 0..CONVEXITY_SAMPLES {
        let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.gen_range(*a..*b)).collect();
        let y: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.gen_range(*a..*b)).collect();
        let lam: f64 = if rng.gen_bool(0.5) { 0.5 } else { rng.gen_range(0.0..1.0) };
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
        let (fx, fy, fz) = (f.value(&x), f.value(&y), f.value(&z));
        let excess = fz - (lam * fx + (1.0 - lam) * fy);
        let tol = CONVEXITY_TOL * (1.0 + fx.abs() + fy.abs());
        if excess > tol {
            worst = worst.max(excess);
        }
    }
    if worst > 0.0 {
        Err(Error::NotConvex { violation: worst })
    } else {
        Ok(())
    }
}

/// Exact lower envelope of two 1-D max-affine functions, rejected unless
/// its slopes are nondecreasing.
fn min_max_affine_1d(a: &[Piece], b: &[Piece]) -> Result<Vec<Piece>> {
    let lines: Vec<&Piece> = a.iter().chain(b).collect();
    let mut cuts: Vec<f64> = Vec::new();
    for (i, p) in lines.iter().enumerate() {
        for q in &lines[i + 1..] {
            if p.v[0] != q.v[0] {
                cuts.push((q.b - p.b) / (p.v[0] - q.v[0]));
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut samples = Vec::with_capacity(cuts.len() + 1);
    match (cuts.first(), cuts.last()) {
        (Some(&first), Some(&last)) => {
            samples.push(first - 1.0);
            samples.extend(cuts.windows(2).map(|w| 0.5 * (w[0] + w[1])));
            samples.push(last + 1.0);
        }
        _ => samples.push(0.0),
    }
    let argmax = |ps: &[Piece], t: f64| -> Piece {
        ps.iter()
            .max_by(|p, q| p.eval(&[t]).total_cmp(&q.eval(&[t])))
            .expect("non-empty")
            .clone()
    };
    let mut envelope: Vec<Piece> = Vec::new();
    for t in samples {
        let pa = argmax(a, t);
        let pb = argmax(b, t);
        let line = if pa.eval(&[t]) <= pb.eval(&[t]) { pa } else { pb };
        if envelope.last() != Some(&line) {
            envelope.push(line);
        }
    }
    for w in envelope.windows(2) {
        if w[1].v[0] < w[0].v[0] {
            return Err(Error::NotConvex {
                violation: w[0].v[0] - w[1].v[0],
            });
        }
    }
    let mut out: Vec<Piece> = Vec::new();
    for p in envelope {
        if !out.contains(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

/// `f + ℓ`.
pub fn add_affine(f: &ConvexFunction, l: &AffineFunctional) -> Result<ConvexFunction> {
    check_dim(f.dim, l.dim())?;
    if let Body::MaxAffine { pieces } = &f.body {
        return ConvexFunction::max_affine(
            pieces
                .iter()
                .map(|p| Piece::new(p.v.iter().zip(&l.v).map(|(a, b)| a + b).collect(), p.b + l.s))
                .collect(),
        );
    }
    ConvexFunction::sum(f.clone(), ConvexFunction::affine(l))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_pair() -> (ConvexFunction, ConvexFunction) {
        let f = ConvexFunction::max_affine(vec![Piece::new(vec![-2.0], 0.0), Piece::new(vec![-1.0], 0.0)])
            .unwrap();
        let h = ConvexFunction::max_affine(vec![Piece::new(vec![-1.0], 0.0), Piece::new(vec![0.0], 0.0)])
            .unwrap();
        (f, h)
    }

    fn abs1(shift: f64) -> ConvexFunction {
        ConvexFunction::max_affine(vec![Piece::new(vec![1.0], -shift), Piece::new(vec![-1.0], shift)]).unwrap()
    }

    fn lse2() -> ConvexFunction {
        ConvexFunction::log_sum_exp(
            vec![
                Piece::new(vec![1.0, 0.5], 0.2),
                Piece::new(vec![-0.7, 1.0], -0.1),
                Piece::new(vec![0.1, -1.2], 0.0),
            ],
            3.0,
        )
        .unwrap()
    }

    #[test]
    fn evaluation_anchors() {
        assert_eq!(ConvexFunction::half_norm_sq(2).evaluate(&[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(abs1(0.0).evaluate(&[-3.0]).unwrap(), 3.0);
        let (f, _) = example_pair();
        assert_eq!(f.evaluate(&[-1.0]).unwrap(), 2.0);
        assert!(matches!(
            f.evaluate(&[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gradient_anchors() {
        assert_eq!(ConvexFunction::half_norm_sq(2).gradient(&[2.0, 0.0]).unwrap(), vec![2.0, 0.0]);
        let p4 = ConvexFunction::pnorm(1, 4, 1.0).unwrap();
        assert_eq!(p4.gradient(&[2.0]).unwrap(), vec![32.0]);
        assert!(matches!(
            abs1(0.0).gradient(&[0.0]),
            Err(Error::NotDifferentiable { .. })
        ));
        assert_eq!(abs1(0.0).gradient(&[0.5]).unwrap(), vec![1.0]);
    }

    #[test]
    fn hessian_anchors() {
        let a = SymMatrix::from_upper(2, &[2.0, 0.5, 1.0]).unwrap();
        let q = ConvexFunction::quadratic(a, vec![1.0, -1.0], 3.0).unwrap();
        assert_eq!(q.hessian(&[0.3, 7.0]).unwrap(), a);
        let p4 = ConvexFunction::pnorm(2, 4, 1.0).unwrap();
        assert_eq!(p4.hessian(&[1.0, 2.0]).unwrap(), SymMatrix::diag(&[12.0, 48.0]));
        assert!(matches!(abs1(0.0).hessian(&[0.3]), Err(Error::NotC2(_))));
        let mx = lattice_max(&q, &p4).unwrap();
        assert!(matches!(mx.hessian(&[0.3, 0.1]), Err(Error::NotC2(_))));
    }

    #[test]
    fn lse_derivatives_match_finite_differences() {
        let f = lse2();
        let x = [0.3, -0.4];
        let g = f.gradient(&x).unwrap();
        let h = f.hessian(&x).unwrap();
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += 1e-5;
            xm[i] -= 1e-5;
            let fd = (f.value(&xp) - f.value(&xm)) / 2e-5;
            assert!((fd - g[i]).abs() < 1e-7);
            let mut xp = x;
            let mut xm = x;
            xp[i] += 1e-4;
            xm[i] -= 1e-4;
            let (gp, gm) = (f.gradient(&xp).unwrap(), f.gradient(&xm).unwrap());
            for j in 0..2 {
                assert!(((gp[j] - gm[j]) / 2e-4 - h.get(i, j)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn lattice_max_examples() {
        let zero = ConvexFunction::max_affine(vec![Piece::new(vec![0.0], 0.0)]).unwrap();
        let m = lattice_max(&abs1(0.0), &zero).unwrap();
        assert_eq!(m.value(&[-2.0]), 2.0);
        let (f, h) = example_pair();
        let fh = lattice_max(&f, &h).unwrap();
        assert_eq!(fh.value(&[1.0]), 0.0);
        // flattened with the shared piece dropped once
        let Body::MaxAffine { pieces } = &fh.body else { panic!() };
        assert_eq!(pieces.len(), 3);
    }

    #[test]
    fn lattice_min_examples() {
        let (f, h) = example_pair();
        let m = lattice_min(&f, &h, None).unwrap();
        let Body::MaxAffine { pieces } = &m.body else { panic!() };
        assert_eq!(pieces, &vec![Piece::new(vec![-1.0], 0.0)]);
        assert_eq!(lattice_min(&f, &f, None).unwrap(), f);
        assert!(matches!(
            lattice_min(&abs1(0.0), &abs1(3.0), None),
            Err(Error::NotConvex { .. })
        ));
        // same pair through the sampled path
        let smooth_a = ConvexFunction::sum(abs1(0.0), ConvexFunction::half_norm_sq(1)).unwrap();
        let smooth_b = ConvexFunction::sum(abs1(3.0), ConvexFunction::half_norm_sq(1)).unwrap();
        assert!(lattice_min(&smooth_a, &smooth_b, None).is_err());
    }

    #[test]
    fn add_affine_shifts() {
        let f = ConvexFunction::half_norm_sq(2);
        let l = AffineFunctional::new(1.0, vec![0.5, -2.0]);
        let g = add_affine(&f, &l).unwrap();
        assert_eq!(g.value(&[0.0, 0.0]), 1.0);
        let x = [0.7, 1.1];
        let gf = f.gradient(&x).unwrap();
        let gg = g.gradient(&x).unwrap();
        assert_eq!(gg, vec![gf[0] + 0.5, gf[1] - 2.0]);
        assert_eq!(g.hessian(&x).unwrap(), f.hessian(&x).unwrap());
    }

    #[test]
    fn scale_zero_is_zero_function() {
        let f = ConvexFunction::scale(0.0, abs1(1.0)).unwrap();
        assert_eq!(f.value(&[5.0]), 0.0);
        assert!(ConvexFunction::scale(-1.0, abs1(1.0)).is_err());
    }

    #[test]
    fn is_c2_flag() {
        assert!(lse2().is_c2());
        assert!(!abs1(0.0).is_c2());
        let s = ConvexFunction::sum(lse2(), ConvexFunction::pnorm(2, 2, 1.0).unwrap()).unwrap();
        assert!(s.is_c2());
        assert!(!lattice_max(&s, &lse2()).unwrap().is_c2());
    }

    #[test]
    fn pullback_chain_rule() {
        let g = AffineMap::new(vec![vec![1.0, 2.0], vec![-0.5, 1.0]], vec![0.3, -0.2]).unwrap();
        let f = lse2().pullback(g.clone()).unwrap();
        let x = [0.2, 0.9];
        assert_eq!(f.value(&x), lse2().value(&g.apply(&x)));
        let gr = f.gradient(&x).unwrap();
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += 1e-6;
            xm[i] -= 1e-6;
            assert!(((f.value(&xp) - f.value(&xm)) / 2e-6 - gr[i]).abs() < 1e-7);
        }
        let inv = g.inverse().unwrap();
        let y = inv.apply(&g.apply(&x));
        assert!((y[0] - x[0]).abs() < 1e-14 && (y[1] - x[1]).abs() < 1e-14);
        assert!(matches!(
            AffineMap::new(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![0.0, 0.0]),
            Err(Error::SingularMap)
        ));
    }

    #[test]
    fn directional_derivatives_at_kinks() {
        let (f, h) = example_pair();
        assert_eq!(f.directional_derivative(&[0.0], &[1.0]).unwrap(), -1.0);
        assert_eq!(-f.directional_derivative(&[0.0], &[-1.0]).unwrap(), -2.0);
        assert_eq!(h.directional_derivative(&[0.0], &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn perturbation_convexity() {
        let bump = TestFunction::bump(vec![0.0, 0.0], 1.0);
        let m = 2.0 * bump.hessian_bound();
        let base = ConvexFunction::scale(m, ConvexFunction::half_norm_sq(2)).unwrap();
        assert!(base.clone().perturb(bump.clone()).is_ok());
        let weak = ConvexFunction::scale(0.1, ConvexFunction::half_norm_sq(2)).unwrap();
        assert!(matches!(weak.perturb(bump), Err(Error::NotConvex { .. })));
    }

    #[test]
    fn validation_rejects_bad_leaves() {
        assert!(ConvexFunction::pnorm(1, 3, 1.0).is_err());
        assert!(ConvexFunction::pnorm(1, 4, 0.0).is_err());
        assert!(ConvexFunction::log_sum_exp(vec![Piece::new(vec![1.0], 0.0)], 0.0).is_err());
        assert!(ConvexFunction::max_affine(vec![]).is_err());
        assert!(ConvexFunction::quadratic(SymMatrix::diag(&[1.0, -1.0]), vec![0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn json_shape() {
        let f = ConvexFunction::sum(lse2(), ConvexFunction::half_norm_sq(2)).unwrap();
        let s = f.to_json();
        assert!(s.contains("\"kind\":\"sum\""));
        assert_eq!(ConvexFunction::from_json(&s).unwrap(), f);
        let q = ConvexFunction::from_json(
            r#"{"dim":2,"kind":"quadratic","a":[[1,0],[0,1]],"v":[0,0],"s":0}"#,
        )
        .unwrap();
        assert_eq!(q, ConvexFunction::half_norm_sq(2));
        let g = lse2().pullback(AffineMap::translation(vec![1.0, 2.0])).unwrap();
        assert_eq!(ConvexFunction::from_json(&g.to_json()).unwrap(), g);
        assert!(ConvexFunction::from_json(r#"{"dim":1,"kind":"pnorm","p":3,"c":1}"#).is_err());
    }
}
