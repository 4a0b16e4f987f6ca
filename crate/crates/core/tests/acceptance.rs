//! Acceptance criteria 1-10. Each test prints one `criterion N: PASS|FAIL`
//! line with the measured quantity next to its pinned tolerance.

use maval::convexfn::{AffineFunctional, ConvexFunction, Piece};
use maval::decompose::{
    gw_elementary_tensor, gw_elementary_tensor_with, homogeneous_decomposition, polarize,
    translative_component, BlackBoxFunctional, FnFunctional, SpecFunctional, HELD_OUT_T,
};
use maval::functionals::{discrete_ma, evaluate, total_mass, FunctionalSpec, SpecKind};
use maval::linalg::{mixed_discriminant, SymMatrix};
use maval::measure::{make_grid, pair, Atom, Region, TestFunction};
use maval::verify::{
    counterexample_suite, independence_suite, invariance_suite, random_bump, random_rotation,
    random_smooth, seminorm_suite, valuation_specs, valuation_suite,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

const SEED: u64 = 20240917;

fn report(criterion: u32, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

#[test]
fn criterion_01_valuation_identity() {
    let pairs = 20;
    let r = valuation_suite(SEED, pairs).unwrap();
    let specs = valuation_specs().len();
    let enough = r.trials.len() >= specs * pairs * 3;
    let cx = counterexample_suite(SEED).unwrap();
    let pass = r.pass && enough && cx.pass && cx.trials[0].residual == 1.0;
    report(
        1,
        pass,
        &format!(
            "({} specs, {} trials, {} skipped; worst relative residual within 5e-4; counterexample residual {})",
            specs,
            r.trials.len(),
            r.notes.len(),
            cx.trials[0].residual
        ),
    );
    assert!(pass, "{:?}", r.trials.iter().find(|t| !t.pass));
}

#[test]
fn criterion_02_homogeneous_decomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut specs: Vec<FunctionalSpec> = valuation_specs()
        .into_iter()
        .filter(|s| !matches!(s.kind, SpecKind::DiscreteMa))
        .collect();
    specs.push(
        FunctionalSpec::lin_comb(
            2,
            vec![
                (1.0, FunctionalSpec::efam(2, 0, 0, 1).unwrap()),
                (0.5, FunctionalSpec::efam(2, 1, 1, 2).unwrap()),
            ],
        )
        .unwrap(),
    );
    let mut worst_recon = 0.0f64;
    let mut worst_cap = 0.0f64;
    let mut structural = true;
    for spec in &specs {
        let n = spec.dim;
        structural &= spec.homogeneity_degree() <= n + spec.polynomial_degree();
        let region = Region::cube(n, 0.0, 1.0);
        let psi = SpecFunctional::new(spec.clone(), if n == 3 { 4 } else { 6 });
        for _ in 0..10 {
            let f = random_smooth(n, &mut rng).scaled(0.3).unwrap();
            let phi = random_bump(&region, &mut rng);
            let dec = homogeneous_decomposition(&psi, &f, &region, &phi).unwrap();
            let direct = psi.pairing(&f.scaled(HELD_OUT_T).unwrap(), &region, &phi).unwrap();
            worst_recon = worst_recon.max(rel(dec.reconstruct(HELD_OUT_T), direct));
            for (k, z) in dec.components.iter().enumerate() {
                if k > spec.homogeneity_degree() {
                    worst_cap = worst_cap.max(z.abs());
                }
            }
        }
    }
    let pass = worst_recon < 1e-7 && worst_cap < 1e-8 && structural;
    report(
        2,
        pass,
        &format!("(reconstruction {worst_recon:.2e} < 1e-7, components above degree {worst_cap:.2e} < 1e-8)"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_translative_top_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let mut worst = 0.0f64;
    for n in 1..=2 {
        for d in 0..=2u32 {
            let order = 12;
            let psi = SpecFunctional::new(FunctionalSpec::efam(n, d, 0, n).unwrap(), order);
            let region = Region::cube(n, -0.5, 1.0);
            let grid = make_grid(&region, order).unwrap();
            for _ in 0..5 {
                let f = random_smooth(n, &mut rng);
                let ell = AffineFunctional::new(
                    rng.gen_range(-1.0..1.0),
                    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                );
                let phi = random_bump(&region, &mut rng);
                let y = translative_component(&psi, d as usize, &f, &ell, &region, &phi).unwrap();
                let direct = grid.integrate(|x| {
                    ell.eval(x).powi(d as i32) * f.hessian(x).unwrap().det() * phi.eval(x)
                });
                worst = worst.max((y - direct).abs() / direct.abs().max(1.0));
            }
        }
    }
    let pass = worst < 1e-7;
    report(3, pass, &format!("(worst deviation {worst:.2e} < 1e-7)"));
    assert!(pass);
}

fn square_support() -> ConvexFunction {
    let pieces = [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]
        .iter()
        .map(|&(a, b)| Piece::new(vec![a, b], 0.0))
        .collect();
    ConvexFunction::max_affine(pieces).unwrap()
}

#[test]
fn criterion_04_discrete_monge_ampere() {
    let abs = ConvexFunction::max_affine(vec![Piece::new(vec![1.0], 0.0), Piece::new(vec![-1.0], 0.0)]).unwrap();
    let m1 = discrete_ma(&abs, &Region::cube(1, -1.0, 1.0)).unwrap();
    let m2 = discrete_ma(&square_support(), &Region::cube(2, -1.0, 1.0)).unwrap();
    let exact = m1.atoms == vec![Atom { x: vec![0.0], mass: 2.0 }]
        && m2.atoms == vec![Atom { x: vec![0.0, 0.0], mass: 4.0 }];

    let region = Region::cube(2, -0.25, 0.25);
    let phi = TestFunction::bump(vec![0.0, 0.0], 1.0);
    let pieces = match &square_support().body {
        maval::convexfn::Body::MaxAffine { pieces } => pieces.clone(),
        _ => unreachable!(),
    };
    let smooth = ConvexFunction::log_sum_exp(pieces, 40.0).unwrap();
    let discrete = pair(&discrete_ma(&square_support(), &region).unwrap(), &phi).unwrap();
    let smoothed = pair(
        &evaluate(&FunctionalSpec::monge_ampere(2), &smooth, &region, 64).unwrap(),
        &phi,
    )
    .unwrap();
    let gap = rel(smoothed, discrete);
    let pass = exact && gap < 0.02;
    report(
        4,
        pass,
        &format!("(anchors exact: {exact}; smoothed {smoothed:.6} vs discrete {discrete}, gap {gap:.2e} < 2e-2)"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_quadrature_anchor() {
    let spec = FunctionalSpec::efam(2, 1, 1, 0).unwrap();
    let ball = Region::new_ball(vec![0.0, 0.0], 1.0).unwrap();
    let f = ConvexFunction::half_norm_sq(2);
    let e32 = rel(total_mass(&spec, &f, &ball, 32).unwrap(), PI / 6.0);
    let e64 = rel(total_mass(&spec, &f, &ball, 64).unwrap(), PI / 6.0);
    let pass = e32 < 2e-3 && e64 < 2e-4;
    report(5, pass, &format!("(order 32: {e32:.2e} < 2e-3, order 64: {e64:.2e} < 2e-4)"));
    assert!(pass);
}

fn random_psd(rng: &mut impl Rng) -> SymMatrix {
    let l: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let rows: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..3).map(|j| (0..3).map(|k| l[i][k] * l[j][k]).sum()).collect())
        .collect();
    SymMatrix::from_rows(&rows).unwrap()
}

#[test]
fn criterion_06_mixed_discriminant() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (a, b, c) = (random_psd(&mut rng), random_psd(&mut rng), random_psd(&mut rng));
        let scale = |x: f64| x.abs().max(1.0);
        let diag = mixed_discriminant(&[a, a, a]).unwrap();
        worst = worst.max((diag - a.det()).abs() / scale(a.det()));
        let base = mixed_discriminant(&[a, b, c]).unwrap();
        for perm in [[b, a, c], [c, b, a], [a, c, b], [b, c, a], [c, a, b]] {
            worst = worst.max((mixed_discriminant(&perm).unwrap() - base).abs() / scale(base));
        }
        let r = random_rotation(3, &mut rng);
        let rot = [a.congruence(&r), b.congruence(&r), c.congruence(&r)];
        worst = worst.max((mixed_discriminant(&rot).unwrap() - base).abs() / scale(base));
    }
    let pass = worst < 1e-11;
    report(6, pass, &format!("(worst deviation {worst:.2e} < 1e-11 over 100 triples)"));
    assert!(pass);
}

#[test]
fn criterion_07_rigid_motion_invariance() {
    let r = invariance_suite(SEED, 50).unwrap();
    let basis_worst = r
        .trials
        .iter()
        .take(r.trials.len() - 2)
        .map(|t| t.residual)
        .fold(0.0, f64::max);
    let controls: Vec<f64> = r.trials[r.trials.len() - 2..].iter().map(|t| t.residual).collect();
    report(
        7,
        r.pass,
        &format!(
            "({} trials, worst basis residual {basis_worst:.2e} < 1e-5, control residuals {:.2e}/{:.2e} > 1e-2)",
            r.trials.len() - 2,
            controls[0],
            controls[1]
        ),
    );
    assert!(r.pass);
}

#[test]
fn criterion_08_linear_independence() {
    let r = independence_suite(SEED).unwrap();
    let n = r.trials.len();
    let weakest = r.trials[..n - 1].iter().map(|t| t.residual).fold(f64::INFINITY, f64::min);
    report(
        8,
        r.pass,
        &format!(
            "({} cases, smallest singular-value ratio {weakest:.2e} > 1e-6, duplicate control {:.2e})",
            n - 1,
            r.trials[n - 1].residual
        ),
    );
    assert!(r.pass);
}

#[test]
fn criterion_09_polarization() {
    let region = Region::cube(2, 0.0, 1.0);
    let ma = FunctionalSpec::monge_ampere(2);
    let mass = FnFunctional {
        dim: 2,
        degree: 0,
        f: |f: &ConvexFunction, b: &Region, _: &TestFunction| total_mass(&ma, f, b, 8),
    };
    let one = TestFunction::bump(vec![0.5, 0.5], 0.5);
    let (alpha, beta) = (2.7, 0.4);
    let f1 = ConvexFunction::half_norm_sq(2);
    let f2 = ConvexFunction::quadratic(SymMatrix::diag(&[alpha, beta]), vec![0.1, -0.2], 0.3).unwrap();
    let anchor = (polarize(&mass, 2, &[f1, f2], &region, &one).unwrap() - 0.5 * (alpha + beta)).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    let g = random_smooth(2, &mut rng);
    let psi = SpecFunctional::new(ma.clone(), 10);
    let phi = random_bump(&region, &mut rng);
    let diag = rel(
        polarize(&psi, 2, &[g.clone(), g.clone()], &region, &phi).unwrap(),
        psi.pairing(&g, &region, &phi).unwrap(),
    );

    let p1 = TestFunction::bump(vec![0.45, 0.5], 0.3);
    let p2 = TestFunction::bump(vec![0.6, 0.45], 0.35);
    let gw12 = gw_elementary_tensor(&psi, &[p1.clone(), p2.clone()], &region, &phi).unwrap();
    let gw21 = gw_elementary_tensor(&psi, &[p2.clone(), p1.clone()], &region, &phi).unwrap();
    let gw_doubled = gw_elementary_tensor_with(&psi, &[p1, p2], &region, &phi, 2.0).unwrap();
    let m_shift = (gw_doubled - gw12).abs();

    let pass = anchor < 1e-9 && diag < 1e-9 && gw12 == gw21 && m_shift < 1e-7;
    report(
        9,
        pass,
        &format!(
            "(anchor {anchor:.2e} < 1e-9, diagonal {diag:.2e} < 1e-9, GW symmetric: {}, auxiliary shift {m_shift:.2e} < 1e-7)",
            gw12 == gw21
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_seminorm_estimator() {
    let r = seminorm_suite(SEED, 8).unwrap();
    report(
        10,
        r.pass,
        &format!("({} checks, worst residual {:.2e})", r.trials.len(), r.max_residual()),
    );
    assert!(r.pass, "{r:?}");
}
