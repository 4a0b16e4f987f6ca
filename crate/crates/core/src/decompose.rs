//! Homogeneous and translative decompositions of black-box polynomial local
//! functionals, polarization, and distribution values on elementary tensors.

use rayon::prelude::*;
use serde::Serialize;

use crate::convexfn::{add_affine, AffineFunctional, ConvexFunction};
use crate::error::{check_dim, Error, Result};
use crate::functionals::{evaluate, FunctionalSpec};
use crate::linalg::{vandermonde_inverse, SymMatrix};
use crate::measure::{pair, Region, TestFunction};

/// Held-out scaling used for reconstruction residuals.
pub const HELD_OUT_T: f64 = 2.5;

/// Number of times the auxiliary curvature is doubled before giving up.
pub const MAX_REPAIR_ATTEMPTS: usize = 8;

/// A polynomial local functional seen only through its pairings
/// `Ψ(f; B, φ) = ∫_B φ dΨ(f)`.
pub trait BlackBoxFunctional: Sync {
    fn dim(&self) -> usize;

    /// Asserted degree of polynomiality `d`.
    fn degree_bound(&self) -> usize;

    fn pairing(&self, f: &ConvexFunction, region: &Region, phi: &TestFunction) -> Result<f64>;
}

/// A [`FunctionalSpec`] evaluated by quadrature at a fixed order.
#[derive(Clone, Debug)]
pub struct SpecFunctional {
    pub spec: FunctionalSpec,
    pub order: usize,
}

impl SpecFunctional {
    pub fn new(spec: FunctionalSpec, order: usize) -> Self {
        Self { spec, order }
    }
}

impl BlackBoxFunctional for SpecFunctional {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn degree_bound(&self) -> usize {
        self.spec.polynomial_degree()
    }

    fn pairing(&self, f: &ConvexFunction, region: &Region, phi: &TestFunction) -> Result<f64> {
        pair(&evaluate(&self.spec, f, region, self.order)?, phi)
    }
}

/// Wraps a closure as a black box.
pub struct FnFunctional<F> {
    pub dim: usize,
    pub degree: usize,
    pub f: F,
}

impl<F> BlackBoxFunctional for FnFunctional<F>
where
    F: Fn(&ConvexFunction, &Region, &TestFunction) -> Result<f64> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn degree_bound(&self) -> usize {
        self.degree
    }

    fn pairing(&self, f: &ConvexFunction, region: &Region, phi: &TestFunction) -> Result<f64> {
        (self.f)(f, region, phi)
    }
}

fn check_inputs(psi: &dyn BlackBoxFunctional, f: &ConvexFunction, region: &Region, phi: &TestFunction) -> Result<()> {
    let n = psi.dim();
    check_dim(n, f.dim)?;
    check_dim(n, region.dim())?;
    check_dim(n, phi.dim())
}

/// Pairings of the components `Z_0, …, Z_{n+d}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomogeneousDecomposition {
    pub components: Vec<f64>,
}

impl HomogeneousDecomposition {
    pub fn max_degree(&self) -> usize {
        self.components.len() - 1
    }

    /// `Σ_k t^k Z_k`.
    pub fn reconstruct(&self, t: f64) -> f64 {
        self.components
            .iter()
            .enumerate()
            .map(|(k, z)| t.powi(k as i32) * z)
            .sum()
    }
}

/// Pairings of `Y_0(f)[ℓ], …, Y_d(f)[ℓ]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TranslativeDecomposition {
    pub components: Vec<f64>,
}

impl TranslativeDecomposition {
    /// `Σ_j t^j Y_j(f)[ℓ]`, the pairing of `Ψ(f + tℓ)`.
    pub fn reconstruct(&self, t: f64) -> f64 {
        self.components
            .iter()
            .enumerate()
            .map(|(j, y)| t.powi(j as i32) * y)
            .sum()
    }
}

fn homogeneous_samples(
    psi: &dyn BlackBoxFunctional,
    f: &ConvexFunction,
    region: &Region,
    phi: &TestFunction,
) -> Result<(usize, Vec<f64>)> {
    check_inputs(psi, f, region, phi)?;
    let m = psi.dim() + psi.degree_bound();
    let values = (0..=m)
        .into_par_iter()
        .map(|j| psi.pairing(&f.scaled(j as f64)?, region, phi))
        .collect::<Result<Vec<_>>>()?;
    Ok((m, values))
}

/// All homogeneous components `Z_k(f)` paired with `φ`, `k = 0..=n+d`.
pub fn homogeneous_decomposition(
    psi: &dyn BlackBoxFunctional,
    f: &ConvexFunction,
    region: &Region,
    phi: &TestFunction,
) -> Result<HomogeneousDecomposition> {
    let (m, values) = homogeneous_samples(psi, f, region, phi)?;
    let c = vandermonde_inverse(m)?;
    Ok(HomogeneousDecomposition {
        components: (0..=m).map(|k| c.coefficient(k, &values)).collect(),
    })
}

/// `Z_k(f) = Σ_j c_kj Ψ(j f)` paired with `φ`.
pub fn homogeneous_component(
    psi: &dyn BlackBoxFunctional,
    k: usize,
    f: &ConvexFunction,
    region: &Region,
    phi: &TestFunction,
) -> Result<f64> {
    let m = psi.dim() + psi.degree_bound();
    if k > m {
        return Err(Error::OutOfRange(format!("component {k} exceeds n + d = {m}")));
    }
    let (m, values) = homogeneous_samples(psi, f, region, phi)?;
    Ok(vandermonde_inverse(m)?.coefficient(k, &values))
}

/// All translative components `Y_j(f)[ℓ]` paired with `φ`, `j = 0..=d`.
pub fn translative_decomposition(
    psi: &dyn BlackBoxFunctional,
    f: &ConvexFunction,
    ell: &AffineFunctional,
    region: &Region,
    phi: &TestFunction,
) -> Result<TranslativeDecomposition> {
    check_inputs(psi, f, region, phi)?;
    check_dim(psi.dim(), ell.dim())?;
    let d = psi.degree_bound();
    if d == 0 {
        return Ok(TranslativeDecomposition {
            components: vec![psi.pairing(f, region, phi)?],
        });
    }
    let values = (0..=d)
        .into_par_iter()
        .map(|j| psi.pairing(&add_affine(f, &ell.scaled(j as f64))?, region, phi))
        .collect::<Result<Vec<_>>>()?;
    let c = vandermonde_inverse(d)?;
    Ok(TranslativeDecomposition {
        components: (0..=d).map(|j| c.coefficient(j, &values)).collect(),
    })
}

/// `Y_j(f)[ℓ] = Σ_i c_ji Ψ(f + iℓ)` paired with `φ`.
pub fn translative_component(
    psi: &dyn BlackBoxFunctional,
    j: usize,
    f: &ConvexFunction,
    ell: &AffineFunctional,
    region: &Region,
    phi: &TestFunction,
) -> Result<f64> {
    let d = psi.degree_bound();
    if j > d {
        return Err(Error::OutOfRange(format!("component {j} exceeds degree bound {d}")));
    }
    Ok(translative_decomposition(psi, f, ell, region, phi)?.components[j])
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Checks `μ(2f) = 2^k μ(f)` to 1e-6 relative.
fn homogeneity_precheck(
    mu: &dyn BlackBoxFunctional,
    k: usize,
    f: &ConvexFunction,
    region: &Region,
    phi: &TestFunction,
) -> Result<()> {
    let one = mu.pairing(f, region, phi)?;
    let two = mu.pairing(&f.scaled(2.0)?, region, phi)?;
    let want = 2f64.powi(k as i32) * one;
    if (two - want).abs() > 1e-6 * want.abs().max(two.abs()).max(1e-300) {
        return Err(Error::NotHomogeneous(format!(
            "μ(2f) = {two:e} but 2^{k} μ(f) = {want:e}"
        )));
    }
    Ok(())
}

fn polarize_unchecked(
    mu: &dyn BlackBoxFunctional,
    fs: &[ConvexFunction],
    region: &Region,
    phi: &TestFunction,
) -> Result<f64> {
    let k = fs.len();
    let terms = (1u32..1 << k)
        .into_par_iter()
        .map(|mask| {
            let members: Vec<ConvexFunction> = (0..k)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| fs[i].clone())
                .collect();
            let size = members.len();
            let sign = if (k - size).is_multiple_of(2) { 1.0 } else { -1.0 };
            Ok(sign * mu.pairing(&ConvexFunction::sum_all(members)?, region, phi)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(terms.iter().sum::<f64>() / factorial(k))
}

/// Polarization `μ̄(f_1, …, f_k)` of a `k`-homogeneous `μ`, paired with `φ`.
pub fn polarize(
    mu: &dyn BlackBoxFunctional,
    k: usize,
    fs: &[ConvexFunction],
    region: &Region,
    phi: &TestFunction,
) -> Result<f64> {
    if fs.len() != k {
        return Err(Error::Invalid(format!("polarization of degree {k} needs {k} functions, got {}", fs.len())));
    }
    if k == 0 {
        return Err(Error::Invalid("polarization needs k >= 1".into()));
    }
    for f in fs {
        check_inputs(mu, f, region, phi)?;
    }
    homogeneity_precheck(mu, k, &ConvexFunction::sum_all(fs.to_vec())?, region, phi)?;
    polarize_unchecked(mu, fs, region, phi)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Distribution value `GW(μ)[φ_1 ⊗ … ⊗ φ_k]` paired with `φ`.
///
/// The test functions are put in a canonical order first, so the result
/// is bitwise symmetric in its arguments.
pub fn gw_elementary_tensor(
    mu: &dyn BlackBoxFunctional,
    phis: &[TestFunction],
    region: &Region,
    phi: &TestFunction,
) -> Result<f64> {
    gw_elementary_tensor_with(mu, phis, region, phi, 1.0)
}

/// As [`gw_elementary_tensor`] with the auxiliary curvatures multiplied
/// by `m_factor`.
pub fn gw_elementary_tensor_with(
    mu: &dyn BlackBoxFunctional,
    phis: &[TestFunction],
    region: &Region,
    phi: &TestFunction,
    m_factor: f64,
) -> Result<f64> {
    let mut sorted = phis.to_vec();
    sorted.sort_by(|a, b| {
        let key = |t: &TestFunction| {
            let mut v = t.center.clone();
            v.extend([t.radius, t.power as f64, t.amplitude]);
            v
        };
        key(a)
            .iter()
            .zip(key(b).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    gw_elementary_tensor_ordered(mu, &sorted, region, phi, m_factor)
}

/// The elementary-tensor sum taken in the order given.
pub fn gw_elementary_tensor_ordered(
    mu: &dyn BlackBoxFunctional,
    phis: &[TestFunction],
    region: &Region,
    phi: &TestFunction,
    m_factor: f64,
) -> Result<f64> {
    let k = phis.len();
    if !(1..=3).contains(&k) {
        return Err(Error::OutOfRange(format!("elementary tensors of order {k} not in 1..=3")));
    }
    if !(m_factor.is_finite() && m_factor > 0.0) {
        return Err(Error::Invalid("auxiliary factor must be positive".into()));
    }
    let n = mu.dim();
    check_dim(n, region.dim())?;
    check_dim(n, phi.dim())?;
    for p in phis {
        check_dim(n, p.dim())?;
        p.validate()?;
    }

    let mut fs = Vec::with_capacity(k);
    let mut hs = Vec::with_capacity(k);
    for p in phis {
        let mut m = 2.0 * p.hessian_bound() * m_factor;
        let mut attempt = 0;
        let h = loop {
            let f = ConvexFunction::quadratic(SymMatrix::identity(n).scale(m), vec![0.0; n], 0.0)?;
            match f.clone().perturb(p.clone()) {
                Ok(h) => break (f, h),
                Err(Error::NotConvex { .. }) if attempt + 1 < MAX_REPAIR_ATTEMPTS => {
                    attempt += 1;
                    m *= 2.0;
                }
                Err(Error::NotConvex { .. }) => {
                    return Err(Error::ConvexityRepair {
                        attempts: MAX_REPAIR_ATTEMPTS,
                    })
                }
                Err(e) => return Err(e),
            }
        };
        fs.push(h.0);
        hs.push(h.1);
    }
    homogeneity_precheck(mu, k, &ConvexFunction::sum_all(fs.clone())?, region, phi)?;

    let perms = permutations(k);
    let mut total = 0.0;
    for j in 0..=k {
        let sign = if (k - j).is_multiple_of(2) { 1.0 } else { -1.0 };
        let weight = sign / (factorial(k - j) * factorial(j));
        let mut inner = 0.0;
        for sigma in &perms {
            let args: Vec<ConvexFunction> = sigma
                .iter()
                .enumerate()
                .map(|(slot, &i)| if slot < j { hs[i].clone() } else { fs[i].clone() })
                .collect();
            inner += polarize_unchecked(mu, &args, region, phi)?;
        }
        total += weight * inner;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::SpecKind;
    use crate::measure::make_grid;

    fn bump0(n: usize) -> TestFunction {
        TestFunction::bump(vec![0.5; n], 0.45)
    }

    fn quartic(n: usize) -> ConvexFunction {
        ConvexFunction::sum(
            ConvexFunction::pnorm(n, 4, 0.5).unwrap(),
            ConvexFunction::quadratic(SymMatrix::diag(&vec![1.0; n]), vec![0.2; n], 0.3).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn monge_ampere_is_pure_top_degree() {
        let psi = SpecFunctional::new(FunctionalSpec::monge_ampere(2), 12);
        let f = quartic(2);
        let b = Region::cube(2, 0.0, 1.0);
        let phi = bump0(2);
        let dec = homogeneous_decomposition(&psi, &f, &b, &phi).unwrap();
        let full = psi.pairing(&f, &b, &phi).unwrap();
        for (k, z) in dec.components.iter().enumerate() {
            if k == 2 {
                assert!((z - full).abs() < 1e-8 * full.abs());
            } else {
                assert!(z.abs() < 1e-8, "Z_{k} = {z}");
            }
        }
    }

    #[test]
    fn lin_comb_components_recover_summands() {
        let e1 = FunctionalSpec::efam(2, 0, 0, 1).unwrap();
        let e2 = FunctionalSpec::efam(2, 0, 0, 2).unwrap();
        let lc = FunctionalSpec::lin_comb(2, vec![(1.0, e1.clone()), (1.0, e2.clone())]).unwrap();
        let psi = SpecFunctional::new(lc, 12);
        let f = quartic(2);
        let b = Region::cube(2, 0.0, 1.0);
        let phi = bump0(2);
        let dec = homogeneous_decomposition(&psi, &f, &b, &phi).unwrap();
        let p1 = SpecFunctional::new(e1, 12).pairing(&f, &b, &phi).unwrap();
        let p2 = SpecFunctional::new(e2, 12).pairing(&f, &b, &phi).unwrap();
        assert!((dec.components[1] - p1).abs() < 1e-8);
        assert!((dec.components[2] - p2).abs() < 1e-8);
        let direct = psi.pairing(&f.scaled(HELD_OUT_T).unwrap(), &b, &phi).unwrap();
        assert!((dec.reconstruct(HELD_OUT_T) - direct).abs() < 1e-7 * direct.abs());
        assert_eq!(
            homogeneous_component(&psi, 2, &f, &b, &phi).unwrap(),
            dec.components[2]
        );
        assert!(homogeneous_component(&psi, 3, &f, &b, &phi).is_err());
    }

    #[test]
    fn translative_top_term_is_direct_integral() {
        let n = 2;
        let psi = SpecFunctional::new(FunctionalSpec::efam(n, 1, 0, n).unwrap(), 16);
        let f = ConvexFunction::half_norm_sq(n);
        let ell = AffineFunctional::new(0.0, vec![1.0, 0.0]);
        let b = Region::cube(n, 0.0, 1.0);
        let phi = bump0(n);
        let y1 = translative_component(&psi, 1, &f, &ell, &b, &phi).unwrap();
        let grid = make_grid(&b, 16).unwrap();
        let direct = grid.integrate(|x| ell.eval(x) * phi.eval(x));
        assert!((y1 - direct).abs() < 1e-8);
        let y0 = translative_component(&psi, 0, &f, &ell, &b, &phi).unwrap();
        assert_eq!(y0, psi.pairing(&f, &b, &phi).unwrap());
        assert!(translative_component(&psi, 2, &f, &ell, &b, &phi).is_err());
    }

    #[test]
    fn translation_invariant_degree_zero() {
        let psi = SpecFunctional::new(FunctionalSpec::monge_ampere(2), 8);
        let ell = AffineFunctional::new(1.5, vec![-0.3, 2.0]);
        let dec = translative_decomposition(&psi, &quartic(2), &ell, &Region::cube(2, 0.0, 1.0), &bump0(2)).unwrap();
        assert_eq!(dec.components.len(), 1);
    }

    #[test]
    fn polarization_anchors() {
        let mu = SpecFunctional::new(FunctionalSpec::monge_ampere(2), 8);
        let b = Region::cube(2, 0.0, 1.0);
        let one = TestFunction::new(vec![0.5, 0.5], 10.0, 3, 1.0).unwrap();
        let (alpha, beta) = (3.0, 0.5);
        let f1 = ConvexFunction::half_norm_sq(2);
        let f2 = ConvexFunction::quadratic(SymMatrix::diag(&[alpha, beta]), vec![0.0; 2], 0.0).unwrap();
        // a wide bump is not ≡ 1, so compare against its integral
        let grid = make_grid(&b, 8).unwrap();
        let want = 0.5 * (alpha + beta) * grid.integrate(|x| one.eval(x));
        let got = polarize(&mu, 2, &[f1.clone(), f2.clone()], &b, &one).unwrap();
        assert!((got - want).abs() < 1e-9 * want);
        let swapped = polarize(&mu, 2, &[f2.clone(), f1.clone()], &b, &one).unwrap();
        assert!((got - swapped).abs() <= 1e-15 * got.abs());
        let f = quartic(2);
        let diag = polarize(&mu, 2, &[f.clone(), f.clone()], &b, &one).unwrap();
        let direct = mu.pairing(&f, &b, &one).unwrap();
        assert!((diag - direct).abs() < 1e-9 * direct.abs());
        assert!(matches!(
            polarize(&mu, 1, std::slice::from_ref(&f), &b, &one),
            Err(Error::NotHomogeneous(_))
        ));
        assert!(polarize(&mu, 2, &[f], &b, &one).is_err());
    }

    #[test]
    fn gw_linear_functional() {
        let mu = SpecFunctional::new(FunctionalSpec::efam(2, 1, 0, 0).unwrap(), 16);
        let b = Region::cube(2, 0.0, 1.0);
        let phi = bump0(2);
        let phi1 = TestFunction::bump(vec![0.4, 0.6], 0.3);
        let got = gw_elementary_tensor(&mu, std::slice::from_ref(&phi1), &b, &phi).unwrap();
        let grid = make_grid(&b, 16).unwrap();
        let direct = grid.integrate(|x| phi1.eval(x) * phi.eval(x));
        assert!((got - direct).abs() < 1e-8);
    }

    #[test]
    fn gw_quadratic_matches_mixed_hessians() {
        // GW(MA)[φ1 ⊗ φ2] = ∫ D(D²φ1, D²φ2) φ
        let mu = SpecFunctional::new(FunctionalSpec::monge_ampere(2), 20);
        let b = Region::cube(2, 0.0, 1.0);
        let phi = bump0(2);
        let p1 = TestFunction::bump(vec![0.45, 0.5], 0.3);
        let p2 = TestFunction::bump(vec![0.55, 0.45], 0.35);
        let got = gw_elementary_tensor(&mu, &[p1.clone(), p2.clone()], &b, &phi).unwrap();
        let grid = make_grid(&b, 20).unwrap();
        let direct = grid.integrate(|x| {
            let h1 = SymMatrix::from_rows(&p1.hessian_rows(x)).unwrap();
            let h2 = SymMatrix::from_rows(&p2.hessian_rows(x)).unwrap();
            crate::linalg::mixed_discriminant(&[h1, h2]).unwrap() * phi.eval(x)
        });
        assert!((got - direct).abs() < 1e-7 * direct.abs().max(1.0), "{got} vs {direct}");
        let swapped = gw_elementary_tensor(&mu, &[p2.clone(), p1.clone()], &b, &phi).unwrap();
        assert_eq!(got, swapped);
        let ordered = gw_elementary_tensor_ordered(&mu, &[p2, p1], &b, &phi, 1.0).unwrap();
        assert!((ordered - got).abs() < 1e-10 * got.abs().max(1.0));
    }

    #[test]
    fn gw_rejects_bad_order() {
        let mu = SpecFunctional::new(FunctionalSpec::new(1, SpecKind::EFam { a: 0, b: 0, c: 1 }).unwrap(), 8);
        let b = Region::cube(1, 0.0, 1.0);
        let phi = TestFunction::bump(vec![0.5], 0.4);
        assert!(gw_elementary_tensor(&mu, &[], &b, &phi).is_err());
        assert!(gw_elementary_tensor(&mu, &vec![phi.clone(); 4], &b, &phi).is_err());
    }

    #[test]
    fn closure_black_box() {
        let psi = FnFunctional {
            dim: 1,
            degree: 1,
            f: |f: &ConvexFunction, _: &Region, _: &TestFunction| Ok(f.value(&[1.0]).powi(2)),
        };
        let f = ConvexFunction::half_norm_sq(1);
        let b = Region::cube(1, 0.0, 1.0);
        let phi = TestFunction::bump(vec![0.5], 0.4);
        let dec = homogeneous_decomposition(&psi, &f, &b, &phi).unwrap();
        assert!(dec.components[1].abs() < 1e-12);
        assert!((dec.reconstruct(HELD_OUT_T) - (HELD_OUT_T * 0.5).powi(2)).abs() < 1e-12);
    }
}
