//! Falsification suites for the structural properties of local functionals
//! and a sampling estimator for the semi-norms `‖Ψ‖_{A,δ}`.
//!
//! Everything here is seeded; identical inputs give identical reports.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::convexfn::{lattice_max, lattice_min, AffineMap, ConvexFunction, Piece};
use crate::decompose::{homogeneous_decomposition, SpecFunctional};
use crate::error::{check_dim, Error, Result};
use crate::functionals::{evaluate, pushforward_affine, FunctionalSpec, SpecKind, WeightMonomial};
use crate::linalg::SymMatrix;
use crate::measure::{pair, Region, TestFunction};

/// Relative tolerance of the valuation identity.
pub const VALUATION_TOL: f64 = 5e-4;
/// Relative tolerance of rigid-motion invariance.
pub const INVARIANCE_TOL: f64 = 1e-5;
/// A non-invariant control must exceed this relative residual somewhere.
pub const CONTROL_THRESHOLD: f64 = 1e-2;
/// Smallest accepted ratio of extreme singular values.
pub const RANK_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    #[serde(rename = "inputs-hash")]
    pub inputs_hash: String,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub seed: u64,
    pub trials: Vec<Trial>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Report {
    fn new(suite: &str, seed: u64, trials: Vec<Trial>, notes: Vec<String>) -> Self {
        let pass = !trials.is_empty() && trials.iter().all(|t| t.pass);
        Self {
            suite: suite.to_string(),
            seed,
            trials,
            pass,
            notes,
        }
    }

    /// Concatenates reports of sub-runs into one.
    fn merge(suite: &str, seed: u64, parts: Vec<Report>) -> Self {
        let mut trials = Vec::new();
        let mut notes = Vec::new();
        for p in parts {
            trials.extend(p.trials);
            notes.extend(p.notes);
        }
        Self::new(suite, seed, trials, notes)
    }

    pub fn max_residual(&self) -> f64 {
        self.trials.iter().map(|t| t.residual).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

/// Hex SHA-256 of the JSON encoding of `inputs`.
pub fn inputs_hash<T: Serialize + ?Sized>(inputs: &T) -> String {
    let bytes = serde_json::to_vec(inputs).expect("serializable");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn pairing(spec: &FunctionalSpec, f: &ConvexFunction, region: &Region, order: usize, phi: &TestFunction) -> Result<f64> {
    pair(&evaluate(spec, f, region, order)?, phi)
}

/// Residual of `Ψ(f∨h) + Ψ(f∧h) = Ψ(f) + Ψ(h)` for each pair and bump.
///
/// Pairs whose minimum is not certified convex are skipped with a note.
/// The residual is absolute; a trial passes when it is below
/// [`VALUATION_TOL`] times the sum of the four pairings.
pub fn check_valuation(
    spec: &FunctionalSpec,
    pairs: &[(ConvexFunction, ConvexFunction)],
    phis: &[TestFunction],
    region: &Region,
    order: usize,
) -> Result<Report> {
    let results = pairs
        .par_iter()
        .enumerate()
        .map(|(idx, (f, h))| -> Result<(Vec<Trial>, Option<String>)> {
            let mx = lattice_max(f, h)?;
            let mn = match lattice_min(f, h, Some(region)) {
                Ok(m) => m,
                Err(Error::NotConvex { violation }) => {
                    return Ok((
                        Vec::new(),
                        Some(format!("pair {idx} skipped: minimum not convex (violation {violation:.3e})")),
                    ))
                }
                Err(e) => return Err(e),
            };
            let measures = [f, h, &mx, &mn]
                .iter()
                .map(|g| evaluate(spec, g, region, order))
                .collect::<Result<Vec<_>>>()?;
            let mut trials = Vec::new();
            for phi in phis {
                let p = measures
                    .iter()
                    .map(|m| pair(m, phi))
                    .collect::<Result<Vec<_>>>()?;
                let residual = (p[2] + p[3] - p[0] - p[1]).abs();
                let scale: f64 = p.iter().map(|v| v.abs()).sum();
                trials.push(Trial {
                    inputs_hash: inputs_hash(&(spec, f, h, phi, region)),
                    residual,
                    pass: residual <= VALUATION_TOL * scale,
                });
            }
            Ok((trials, None))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trials = Vec::new();
    let mut notes = Vec::new();
    for (t, note) in results {
        trials.extend(t);
        notes.extend(note);
    }
    Ok(Report::new("valuation", 0, trials, notes))
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Proper rotation drawn uniformly (angle in the plane, Shoemake's
/// quaternion method in space).
pub fn random_rotation(n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0]],
        2 => {
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            vec![vec![t.cos(), -t.sin()], vec![t.sin(), t.cos()]]
        }
        3 => {
            let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
            let tau = std::f64::consts::TAU;
            let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
            let (w, x, y, z) = (
                a * (tau * u2).sin(),
                a * (tau * u2).cos(),
                b * (tau * u3).sin(),
                b * (tau * u3).cos(),
            );
            vec![
                vec![1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
                vec![2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
                vec![2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
            ]
        }
        _ => panic!("rotations only for n <= 3"),
    }
}

/// Random smooth convex function: a positive definite quadratic plus a
/// quartic and a log-sum-exp term.
pub fn random_smooth(n: usize, rng: &mut impl Rng) -> ConvexFunction {
    let l: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            rows[i][j] = (0..n).map(|k| l[i][k] * l[j][k]).sum::<f64>() + if i == j { 0.3 } else { 0.0 };
        }
    }
    let a = SymMatrix::from_rows(&rows).expect("symmetric");
    let v = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let q = ConvexFunction::quadratic(a, v, rng.gen_range(-0.5..1.0)).expect("valid quadratic");
    let quartic = ConvexFunction::pnorm(n, 4, rng.gen_range(0.0..0.3)).expect("valid pnorm");
    let pieces = (0..3)
        .map(|_| {
            Piece::new(
                (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                rng.gen_range(-0.5..0.5),
            )
        })
        .collect();
    let lse = ConvexFunction::log_sum_exp(pieces, rng.gen_range(1.0..3.0)).expect("valid lse");
    ConvexFunction::sum_all(vec![q, quartic, lse]).expect("same dimension")
}

/// Bump with support inside `region`.
pub fn random_bump(region: &Region, rng: &mut impl Rng) -> TestFunction {
    let (lo, hi) = region.bounding_box();
    loop {
        let c: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| {
                let m = 0.25 * (b - a);
                rng.gen_range(a + m..b - m)
            })
            .collect();
        if let Some(r) = region.inner_radius_at(&c) {
            let radius = r * rng.gen_range(0.5..0.95);
            return TestFunction::bump(c, radius);
        }
    }
}

/// Compares `[π(g)Ψ](f)` with `Ψ(f)` on random rigid motions `g`, smooth
/// `f` and bumps `φ`. The residual is relative.
pub fn check_rigid_motion_invariance(spec: &FunctionalSpec, trials: usize, seed: u64) -> Result<Report> {
    let n = spec.dim;
    let region = Region::new_ball(vec![0.0; n], 1.5)?;
    let order = match n {
        1 => 16,
        2 => 10,
        _ => 6,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<(AffineMap, ConvexFunction, TestFunction)> = (0..trials)
        .map(|_| {
            let m = random_rotation(n, &mut rng);
            let w = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let g = AffineMap::new(m, w).expect("rotations are invertible");
            (g, random_smooth(n, &mut rng), random_bump(&region, &mut rng))
        })
        .collect();
    let out = inputs
        .par_iter()
        .map(|(g, f, phi)| {
            let moved = pair(&pushforward_affine(spec, f, g, &region, order)?, phi)?;
            let fixed = pairing(spec, f, &region, order, phi)?;
            let residual = relative_gap(moved, fixed);
            Ok(Trial {
                inputs_hash: inputs_hash(&(spec, g, f, phi)),
                residual,
                pass: residual < INVARIANCE_TOL,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Report::new("invariance", seed, out, Vec::new()))
}

/// The rigid-motion invariant basis of degree-`k` homogeneous functionals
/// with polynomiality degree at most `d`, with the index bounds of the
/// classification taken verbatim. For `n = 2` the planar family is added.
pub fn rigid_motion_basis(n: usize, k: usize, d: usize) -> Result<Vec<FunctionalSpec>> {
    let mut out = Vec::new();
    for i in 0..=n.min(k) {
        for j in 0..=(k - i).min(d) / 2 {
            out.push(FunctionalSpec::efam(n, (k - 2 * j - i) as u32, j as u32, i)?);
        }
    }
    if n >= 2 {
        for i in 1..=(n - 1).min(k) {
            for j in 1..=(k - i).min(d) / 2 {
                out.push(FunctionalSpec::ffam(n, (k - 2 * j - i) as u32, j as u32, i)?);
            }
        }
    }
    if n == 2 && k >= 1 {
        for j in 1..=(k - 1).min(d) / 2 {
            out.push(FunctionalSpec::ftilde((k - 2 * j - 1) as u32, j as u32)?);
        }
    }
    Ok(out)
}

/// Ratio of smallest to largest singular value of the column-normalized
/// probe matrix `M[i][j] = Ψ_j(f_i; φ_i)`.
pub fn sampling_rank_ratio(specs: &[FunctionalSpec], seed: u64) -> Result<f64> {
    let Some(first) = specs.first() else {
        return Err(Error::Invalid("empty basis".into()));
    };
    let n = first.dim;
    for s in specs {
        check_dim(n, s.dim)?;
    }
    let cols = specs.len();
    let rows = (3 * cols).max(6);
    let region = Region::cube(n, -1.0, 1.0);
    let order = if n == 3 { 6 } else { 10 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<(ConvexFunction, TestFunction)> = (0..rows)
        .map(|_| (random_smooth(n, &mut rng), random_bump(&region, &mut rng)))
        .collect();
    let entries = probes
        .par_iter()
        .map(|(f, phi)| {
            specs
                .iter()
                .map(|s| pairing(s, f, &region, order, phi))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut m = DMatrix::from_fn(rows, cols, |i, j| entries[i][j]);
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let sv = m.singular_values();
    let max = sv.max();
    Ok(if max > 0.0 { sv.min() / max } else { 0.0 })
}

/// Sampling-rank test of the rigid-motion basis for `(n, k, d)`.
pub fn check_linear_independence(n: usize, k: usize, d: usize, seed: u64) -> Result<Report> {
    if !(2..=3).contains(&n) {
        return Err(Error::OutOfRange(format!("independence is checked for n in 2..=3, got {n}")));
    }
    let basis = rigid_motion_basis(n, k, d)?;
    let ratio = sampling_rank_ratio(&basis, seed)?;
    let trial = Trial {
        inputs_hash: inputs_hash(&(n, k, d, &basis)),
        residual: ratio,
        pass: ratio > RANK_TOL,
    };
    Ok(Report::new("independence", seed, vec![trial], Vec::new()))
}

/// Knobs of [`estimate_seminorm_with`].
#[derive(Clone, Debug)]
pub struct SeminormConfig {
    pub samples: usize,
    pub seed: u64,
    /// Sampled `f` are normalized to `sup_{A+δB} |f| = bound`.
    pub bound: f64,
    pub order: usize,
    /// Spacing of the fixed lattice on which the sup is taken.
    pub lattice_step: f64,
}

impl Default for SeminormConfig {
    fn default() -> Self {
        Self {
            samples: 16,
            seed: 0,
            bound: 1.0,
            order: 12,
            lattice_step: 0.1,
        }
    }
}

/// Lower bound on `‖Ψ‖_{A,δ}` from random samples.
pub fn estimate_seminorm(spec: &FunctionalSpec, a: &Region, delta: f64, samples: usize, seed: u64) -> Result<f64> {
    estimate_seminorm_with(
        spec,
        a,
        delta,
        &SeminormConfig {
            samples,
            seed,
            ..Default::default()
        },
    )
}

fn needs_polyhedral(spec: &FunctionalSpec) -> bool {
    match &spec.kind {
        SpecKind::DiscreteMa => true,
        SpecKind::LinComb { terms } => terms.iter().any(|t| needs_polyhedral(&t.spec)),
        _ => false,
    }
}

/// Points of `step·ℤⁿ` within distance `delta` of `a`.
fn lattice_near(a: &Region, delta: f64, step: f64) -> Vec<Vec<f64>> {
    let (lo, hi) = a.bounding_box();
    let n = lo.len();
    let ranges: Vec<(i64, i64)> = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| (((l - delta) / step).floor() as i64, ((h + delta) / step).ceil() as i64))
        .collect();
    let mut out = Vec::new();
    let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        let x: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
        if a.distance(&x) <= delta {
            out.push(x);
        }
        let mut axis = 0;
        loop {
            if axis == n {
                return out;
            }
            idx[axis] += 1;
            if idx[axis] <= ranges[axis].1 {
                break;
            }
            idx[axis] = ranges[axis].0;
            axis += 1;
        }
    }
}

/// Maximum of `|Σ c_k τ^k|` over `τ ∈ [0, t]`.
fn max_abs_poly(c: &[f64], t: f64) -> f64 {
    let eval = |x: f64| c.iter().rev().fold(0.0, |acc, ck| acc * x + ck);
    let mut best = eval(0.0).abs().max(eval(t).abs());
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // derivative, trimmed of rounding-level leading coefficients
    let mut dp: Vec<f64> = c.iter().enumerate().skip(1).map(|(k, ck)| k as f64 * ck).collect();
    while dp.last().is_some_and(|v| v.abs() <= 1e-13 * scale) {
        dp.pop();
    }
    if dp.len() >= 2 {
        let deg = dp.len() - 1;
        let lead = dp[deg];
        let comp = DMatrix::from_fn(deg, deg, |i, j| {
            if i == 0 {
                -dp[deg - 1 - j] / lead
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        for z in comp.complex_eigenvalues().iter() {
            if z.im.abs() <= 1e-9 * (1.0 + z.re.abs()) && z.re > 0.0 && z.re < t {
                best = best.max(eval(z.re).abs());
            }
        }
    }
    best
}

/// As [`estimate_seminorm`] with explicit configuration.
///
/// For every sampled pair `(g, φ)` the map `τ ↦ Ψ(τg; φ)` is recovered as a
/// polynomial and maximized over `τ ∈ [0, bound / sup|g|]`, so the
/// estimate is monotone in `δ` for a fixed seed.
pub fn estimate_seminorm_with(spec: &FunctionalSpec, a: &Region, delta: f64, cfg: &SeminormConfig) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::OutOfRange(format!("δ must be positive, got {delta}")));
    }
    spec.validate()?;
    check_dim(spec.dim, a.dim())?;
    let n = spec.dim;
    let polyhedral = needs_polyhedral(spec);
    let lattice = lattice_near(a, delta, cfg.lattice_step);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::with_capacity(cfg.samples);
    for s in 0..cfg.samples {
        let pieces: Vec<Piece> = (0..rng.gen_range(2..5))
            .map(|_| {
                Piece::new(
                    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let g = if polyhedral {
            ConvexFunction::max_affine(pieces)?
        } else if s % 2 == 0 {
            ConvexFunction::log_sum_exp(pieces, 20.0)?
        } else {
            random_smooth(n, &mut rng)
        };
        let mut phi = random_bump(a, &mut rng);
        phi.amplitude = rng.gen_range(-1.0..1.0);
        samples.push((g, phi));
    }
    let psi = SpecFunctional::new(spec.clone(), cfg.order);
    let values = samples
        .par_iter()
        .map(|(g, phi)| -> Result<f64> {
            let sup = lattice.iter().map(|x| g.value(x).abs()).fold(0.0, f64::max);
            if sup == 0.0 {
                return Ok(0.0);
            }
            let t = cfg.bound / sup;
            if matches!(spec.kind, SpecKind::Discontinuous1d) {
                return pair(&evaluate(spec, g, a, cfg.order)?, phi).map(f64::abs);
            }
            let dec = homogeneous_decomposition(&psi, g, a, phi)?;
            Ok(max_abs_poly(&dec.components, t))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

fn bumps_inside(region: &Region, count: usize, rng: &mut impl Rng) -> Vec<TestFunction> {
    (0..count).map(|_| random_bump(region, rng)).collect()
}

/// The pair of functions from the classical counterexample: `f = max(-2x, -x)`
/// and `h = max(-x, 0)`.
pub fn kink_pair() -> (ConvexFunction, ConvexFunction) {
    let f = ConvexFunction::max_affine(vec![Piece::new(vec![-2.0], 0.0), Piece::new(vec![-1.0], 0.0)])
        .expect("valid");
    let h = ConvexFunction::max_affine(vec![Piece::new(vec![-1.0], 0.0), Piece::new(vec![0.0], 0.0)])
        .expect("valid");
    (f, h)
}

/// Random one-dimensional max-affine pairs with a convex minimum.
pub fn polyhedral_pairs_1d(count: usize, rng: &mut impl Rng) -> Vec<(ConvexFunction, ConvexFunction)> {
    let mut out = vec![kink_pair()];
    let draw = |rng: &mut dyn rand::RngCore| -> ConvexFunction {
        let m = rng.gen_range(2..5);
        let mut pieces: Vec<Piece> = Vec::new();
        while pieces.len() < m {
            let p = Piece::new(
                vec![(rng.gen_range(-12..=12) as f64) * 0.25],
                (rng.gen_range(-8..=8) as f64) * 0.125,
            );
            if !pieces.iter().any(|q| q.v == p.v) {
                pieces.push(p);
            }
        }
        ConvexFunction::max_affine(pieces).expect("valid")
    };
    let mut attempts = 0;
    while out.len() < count && attempts < 100_000 {
        attempts += 1;
        let f = draw(rng);
        let h = draw(rng);
        if f == h || lattice_min(&f, &h, None).is_err() {
            continue;
        }
        out.push((f, h));
    }
    out
}

/// Pair of smooth functions on the line crossing tangentially at `±r`:
/// `f - h = (x² - r²)³`, shifted by a common convex quadratic.
pub fn tangential_pair_1d(r: f64, extra: f64) -> (ConvexFunction, ConvexFunction) {
    let common = ConvexFunction::quadratic(SymMatrix::diag(&[extra]), vec![0.0], 0.0).expect("psd");
    let f = ConvexFunction::sum_all(vec![
        ConvexFunction::pnorm(1, 6, 1.0).expect("valid"),
        ConvexFunction::quadratic(SymMatrix::diag(&[6.0 * r.powi(4)]), vec![0.0], 0.0).expect("psd"),
        common.clone(),
    ])
    .expect("same dimension");
    let h = ConvexFunction::sum_all(vec![
        ConvexFunction::pnorm(1, 4, 3.0 * r * r).expect("valid"),
        ConvexFunction::quadratic(SymMatrix::zeros(1), vec![0.0], r.powi(6)).expect("psd"),
        common,
    ])
    .expect("same dimension");
    (f, h)
}

/// Random ordered pairs `h = f + q + c` with `q` positive semidefinite
/// and `c ≥ 0`, in random order.
pub fn ordered_pairs(n: usize, count: usize, rng: &mut impl Rng) -> Vec<(ConvexFunction, ConvexFunction)> {
    (0..count)
        .map(|_| {
            let f = random_smooth(n, rng);
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let q = ConvexFunction::quadratic(SymMatrix::outer(&u), vec![0.0; n], rng.gen_range(0.0..0.5))
                .expect("psd");
            let h = ConvexFunction::sum(f.clone(), q).expect("same dimension");
            if rng.gen_bool(0.5) {
                (f, h)
            } else {
                (h, f)
            }
        })
        .collect()
}

/// Pairs suited to `spec`: polyhedral ones for atomic functionals, smooth
/// ones (tangential crossings on the line, ordered pairs otherwise) for
/// integrands.
pub fn valuation_pairs(spec: &FunctionalSpec, count: usize, rng: &mut impl Rng) -> Vec<(ConvexFunction, ConvexFunction)> {
    let n = spec.dim;
    match spec.kind {
        SpecKind::DiscreteMa | SpecKind::Discontinuous1d => polyhedral_pairs_1d(count, rng),
        _ if n == 1 => {
            let tangential = count / 2;
            let mut out: Vec<_> = (0..tangential)
                .map(|_| tangential_pair_1d(rng.gen_range(0.4..1.2), rng.gen_range(0.0..2.0)))
                .collect();
            out.extend(ordered_pairs(1, count - tangential, rng));
            out
        }
        _ => ordered_pairs(n, count, rng),
    }
}

/// Builtin specs exercised by the valuation suite.
pub fn valuation_specs() -> Vec<FunctionalSpec> {
    let mut out = Vec::new();
    for n in 1..=3 {
        for a in 0..=2 {
            for b in 0..=2 {
                for c in 0..=n {
                    out.push(FunctionalSpec::efam(n, a, b, c).expect("valid"));
                }
                if b >= 1 {
                    for c in 1..n {
                        out.push(FunctionalSpec::ffam(n, a, b, c).expect("valid"));
                    }
                }
            }
        }
        out.push(
            FunctionalSpec::new(
                n,
                SpecKind::TopDegree {
                    weight: vec![
                        WeightMonomial { coeff: 1.0, x_pow: vec![], s_pow: 0, v_pow: vec![] },
                        WeightMonomial {
                            coeff: 0.5,
                            x_pow: (0..n).map(|i| (i == 0) as u32 * 2).collect(),
                            s_pow: 1,
                            v_pow: (0..n).map(|i| (i == n - 1) as u32).collect(),
                        },
                    ],
                },
            )
            .expect("valid"),
        );
    }
    out.push(FunctionalSpec::ftilde(1, 1).expect("valid"));
    out.push(FunctionalSpec::new(1, SpecKind::DiscreteMa).expect("valid"));
    out
}

fn suite_region(n: usize) -> Region {
    Region::cube(n, -2.0, 2.0)
}

fn suite_order(n: usize) -> usize {
    match n {
        1 => 48,
        2 => 12,
        _ => 6,
    }
}

/// Valuation identity for every builtin spec over `pairs` pairs and 3 bumps.
pub fn valuation_suite(seed: u64, pairs: usize) -> Result<Report> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts = Vec::new();
    for spec in valuation_specs() {
        let n = spec.dim;
        let region = suite_region(n);
        let ps = valuation_pairs(&spec, pairs, &mut rng);
        let phis = bumps_inside(&region, 3, &mut rng);
        parts.push(check_valuation(&spec, &ps, &phis, &region, suite_order(n))?);
    }
    Ok(Report::merge("valuation", seed, parts))
}

/// The discontinuous functional must break the identity with residual
/// exactly 1 on the kink pair, while the discrete Monge-Ampère operator
/// satisfies it exactly.
pub fn counterexample_suite(seed: u64) -> Result<Report> {
    let region = Region::cube(1, -1.0, 1.0);
    let phi = TestFunction::bump(vec![0.0], 0.5);
    let pairs = [kink_pair()];
    let disc = check_valuation(
        &FunctionalSpec::new(1, SpecKind::Discontinuous1d)?,
        &pairs,
        std::slice::from_ref(&phi),
        &region,
        8,
    )?;
    let ma = check_valuation(
        &FunctionalSpec::new(1, SpecKind::DiscreteMa)?,
        &pairs,
        std::slice::from_ref(&phi),
        &region,
        8,
    )?;
    let mut trials = Vec::new();
    for t in disc.trials {
        trials.push(Trial {
            pass: t.residual == 1.0,
            ..t
        });
    }
    for t in ma.trials {
        trials.push(Trial {
            pass: t.residual == 0.0,
            ..t
        });
    }
    Ok(Report::new("counterexample", seed, trials, Vec::new()))
}

/// Asymmetric control `x₁ det D²f`.
pub fn asymmetric_control(n: usize) -> FunctionalSpec {
    FunctionalSpec::new(
        n,
        SpecKind::TopDegree {
            weight: vec![WeightMonomial {
                coeff: 1.0,
                x_pow: (0..n).map(|i| (i == 0) as u32).collect(),
                s_pow: 0,
                v_pow: vec![],
            }],
        },
    )
    .expect("valid")
}

/// Every basis element for `n ∈ {2, 3}`, `k ≤ 3`, `d ≤ 2` passes `trials`
/// random rigid motions and the asymmetric control fails.
pub fn invariance_suite(seed: u64, trials: usize) -> Result<Report> {
    let mut specs: Vec<FunctionalSpec> = Vec::new();
    for n in 2..=3 {
        for d in 0..=2 {
            for k in 0..=3 {
                for s in rigid_motion_basis(n, k, d)? {
                    if !specs.contains(&s) {
                        specs.push(s);
                    }
                }
            }
        }
    }
    let mut parts = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        parts.push(check_rigid_motion_invariance(spec, trials, seed.wrapping_add(i as u64))?);
    }
    for n in 2..=3 {
        let control = check_rigid_motion_invariance(&asymmetric_control(n), trials.max(5), seed)?;
        let worst = control.max_residual();
        parts.push(Report::new(
            "invariance",
            seed,
            vec![Trial {
                inputs_hash: inputs_hash(&(asymmetric_control(n), seed)),
                residual: worst,
                pass: worst > CONTROL_THRESHOLD,
            }],
            vec![format!("control x1·det D²f in n={n}: worst residual {worst:.3e} (must exceed {CONTROL_THRESHOLD:e})")],
        ));
    }
    Ok(Report::merge("invariance", seed, parts))
}

/// Full sampling rank for all `(n, k, d)` with `n ∈ {2, 3}`, `d ≤ 2`,
/// `k ≤ n + d`, plus a duplicated-column control that must be deficient.
pub fn independence_suite(seed: u64) -> Result<Report> {
    let mut parts = Vec::new();
    for n in 2..=3 {
        for d in 0..=2 {
            for k in 0..=n + d {
                parts.push(check_linear_independence(n, k, d, seed)?);
            }
        }
    }
    let mut dup = rigid_motion_basis(3, 2, 2)?;
    dup.push(dup[0].clone());
    let ratio = sampling_rank_ratio(&dup, seed)?;
    parts.push(Report::new(
        "independence",
        seed,
        vec![Trial {
            inputs_hash: inputs_hash(&dup),
            residual: ratio,
            pass: ratio <= RANK_TOL,
        }],
        vec![format!("duplicated-column control ratio {ratio:.3e} (must be <= {RANK_TOL:e})")],
    ));
    Ok(Report::merge("independence", seed, parts))
}

/// Monotonicity in `δ` and `2^k` scaling of the semi-norm estimate.
pub fn seminorm_suite(seed: u64, samples: usize) -> Result<Report> {
    let specs = [
        FunctionalSpec::monge_ampere(2),
        FunctionalSpec::efam(2, 1, 1, 0)?,
        FunctionalSpec::lin_comb(
            2,
            vec![
                (1.0, FunctionalSpec::efam(2, 0, 0, 1)?),
                (-2.0, FunctionalSpec::efam(2, 1, 0, 2)?),
            ],
        )?,
        FunctionalSpec::new(2, SpecKind::DiscreteMa)?,
        FunctionalSpec::ffam(3, 0, 1, 1)?,
    ];
    let mut trials = Vec::new();
    for spec in &specs {
        let a = Region::cube(spec.dim, 0.0, 1.0);
        let cfg = SeminormConfig {
            samples,
            seed,
            order: if spec.dim == 3 { 6 } else { 10 },
            ..Default::default()
        };
        let e1 = estimate_seminorm_with(spec, &a, 1.0, &cfg)?;
        let e2 = estimate_seminorm_with(spec, &a, 2.0, &cfg)?;
        trials.push(Trial {
            inputs_hash: inputs_hash(&(spec, &a, 1.0, 2.0, seed)),
            residual: (e2 - e1).max(0.0),
            pass: e2 <= e1,
        });
        if spec.is_homogeneous() {
            let k = spec.homogeneity_degree() as i32;
            let doubled = estimate_seminorm_with(spec, &a, 1.0, &SeminormConfig { bound: 2.0, ..cfg.clone() })?;
            let residual = relative_gap(doubled, 2f64.powi(k) * e1);
            trials.push(Trial {
                inputs_hash: inputs_hash(&(spec, &a, 1.0, "bound=2", seed)),
                residual,
                pass: residual <= 1e-9,
            });
        }
    }
    Ok(Report::new("seminorm", seed, trials, Vec::new()))
}
