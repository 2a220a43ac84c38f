use hmsem::assembly::Coefficient;
use hmsem::eigsolver::{self, EigOptions, Method};
use hmsem::mesh::BoxDomain;
use hmsem::transmission::{convergence_table, solve_transmission, Discretization, ProblemSpec};
use hmsem::{Complex64, Execution};

fn square(degree: usize, level: usize, coeff: &str, k_guess: f64) -> ProblemSpec {
    ProblemSpec::new(BoxDomain::cube(2, -0.5, 0.5), level, degree, Coefficient::parse(coeff).unwrap(), k_guess)
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn reported_wavenumbers_are_closed_under_conjugation() {
    for count in [5, 6, 7] {
        let mut spec = square(15, 0, "affine 8 1 -1", 2.8);
        spec.eig.count = count;
        let r = solve_transmission(&spec).unwrap();
        assert!(r.wavenumbers.len() >= count);
        for k in &r.wavenumbers {
            let partner = r.wavenumbers.iter().map(|z| rel(*z, k.conj())).fold(f64::INFINITY, f64::min);
            assert!(partner < 1e-8, "count {count}: {k} has no conjugate in {:?}", r.wavenumbers);
        }
    }
}

#[test]
fn converged_pairs_satisfy_the_linearization() {
    let mut spec = square(12, 0, "exp-affine 4 1 1", 4.3);
    spec.eig.count = 6;
    let r = solve_transmission(&spec).unwrap();
    for (res, gap) in r.residuals.iter().zip(&r.w_consistency) {
        assert!(*res < 1e-10 && *gap < 1e-6, "residual {res:e}, w gap {gap:e}");
    }
    for (k, l) in r.wavenumbers.iter().zip(&r.eigenvalues) {
        assert!(k.re >= 0.0);
        assert!((k * k - l).norm() <= 1e-12 * l.norm());
    }
}

#[test]
fn one_element_and_four_elements_agree() {
    let mut sm = square(16, 0, "constant 16", 1.9);
    let mut sem = square(8, 1, "constant 16", 1.9);
    sm.eig.count = 4;
    sem.eig.count = 4;
    let a = solve_transmission(&sm).unwrap();
    let b = solve_transmission(&sem).unwrap();
    for i in 0..4 {
        assert!(rel(b.eigenvalues[i], a.eigenvalues[i]) < 1e-4, "{} vs {}", b.eigenvalues[i], a.eigenvalues[i]);
    }
    assert!(rel(b.wavenumbers[0], a.wavenumbers[0]) < 1e-3);
}

#[test]
fn k1_approaches_the_finest_value_monotonically() {
    let mut spec = square(15, 0, "constant 16", 1.9);
    spec.eig.count = 3;
    let rows = convergence_table(&spec, &[(15, 0), (20, 0), (25, 0), (30, 0)]).unwrap();
    let finest = rows[3].wavenumbers[0];
    let gaps: Vec<f64> = rows[..3].iter().map(|r| (r.wavenumbers[0] - finest).norm()).collect();
    assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{gaps:?}");
    assert_eq!(rows[1].k1_change, Some((rows[1].wavenumbers[0] - rows[0].wavenumbers[0]).norm()));
    assert_eq!(rows.iter().map(|r| r.dofs.doubled).collect::<Vec<_>>(), [288, 578, 968, 1458]);
}

#[test]
fn selection_is_stable_under_a_small_shift_move() {
    let spec = square(10, 0, "constant 16", 1.9);
    let (disc, _) = Discretization::build(&spec).unwrap();
    let (a, b) = (disc.pencil.a_matrix(), disc.pencil.b_matrix());
    // lowest eigenvalues: 3.53, 5.97 (double), 8.22, 9.86; window around 6.5
    let opts = |s: f64, method| EigOptions { count: 3, shift: Complex64::new(s, 0.0), method, ..Default::default() };
    for method in [Method::Dense, Method::Arnoldi] {
        let x = eigsolver::solve(&a, &b, &opts(6.5, method)).unwrap();
        let y = eigsolver::solve(&a, &b, &opts(6.6, method)).unwrap();
        let mut xs: Vec<f64> = x.eigenvalues.iter().map(|z| z.re).collect();
        let mut ys: Vec<f64> = y.eigenvalues.iter().map(|z| z.re).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        for (p, q) in xs.iter().zip(&ys) {
            assert!((p - q).abs() <= 1e-8 * p.abs(), "{method:?}: {xs:?} vs {ys:?}");
        }
    }
}

#[test]
fn execution_policy_does_not_change_results() {
    let dom = BoxDomain::l_shape_2d();
    let mut spec = ProblemSpec::new(dom, 0, 8, Coefficient::parse("affine 8 1 -1").unwrap(), 2.3);
    spec.eig.count = 4;
    let seq = solve_transmission(&ProblemSpec { exec: Execution::Sequential, ..spec.clone() }).unwrap();
    let par = solve_transmission(&ProblemSpec { exec: Execution::Parallel, ..spec }).unwrap();
    assert_eq!(seq.wavenumbers.len(), par.wavenumbers.len());
    for (x, y) in seq.wavenumbers.iter().zip(&par.wavenumbers) {
        assert!(rel(*x, *y) < 1e-13, "{x} vs {y}");
    }
}
