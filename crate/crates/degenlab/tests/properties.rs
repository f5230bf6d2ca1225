use degenlab::analysis::{lebesgue_profile, mass_fraction_near, sv_dichotomy, disk_superlevel_fraction, GradientField, RandomSmooth, Region};
use degenlab::barrier::{barrier_k, barrier_matrix, neg_part_norm, pos_part_norm, HALF_SIDE};
use degenlab::field::{classify_grid, make_builtin, BuiltinSpec, ClassLabel, DegeneracyGrid, GridSpec};
use degenlab::mesh::{build_mesh, Domain, Mesh};
use degenlab::solve::{energy, energy_with, solve, BoundaryData, SolveOpts};
use degenlab::{Disk, Rect, Vec2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::{Arc, OnceLock};

fn mesh() -> Arc<Mesh> {
    static M: OnceLock<Arc<Mesh>> = OnceLock::new();
    M.get_or_init(|| Arc::new(build_mesh(Domain::Disk { radius: 1.0 }, 0.15).unwrap())).clone()
}

fn quartic_grid() -> &'static DegeneracyGrid {
    static G: OnceLock<DegeneracyGrid> = OnceLock::new();
    G.get_or_init(|| {
        let f = make_builtin(&BuiltinSpec::QuarticQuartroot).unwrap();
        classify_grid(&f, &GridSpec::new(Rect::centered(1.5), 0.05)).unwrap()
    })
}

fn vec2() -> impl Strategy<Value = Vec2> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y)| Vec2::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn comparison_principle(a in -1.0..1.0f64, b in -1.0..1.0f64, c in 0.0..0.5f64) {
        let f = make_builtin(&BuiltinSpec::PLaplacian { p: 4.0 }).unwrap();
        let lo = BoundaryData::custom(move |x| a * x.x * x.y + b * x.x);
        let hi = BoundaryData::custom(move |x| a * x.x * x.y + b * x.x + c * (1.0 + x.y).powi(2));
        let opts = SolveOpts::default();
        let u = solve(&f, mesh(), &lo, &opts).unwrap();
        let v = solve(&f, mesh(), &hi, &opts).unwrap();
        prop_assert!(u.diagnostics.converged && v.diagnostics.converged);
        for (x, y) in u.u.iter().zip(&v.u) {
            prop_assert!(*x <= *y + 1e-9);
        }
    }

    #[test]
    fn barrier_eigen_identities(lambda in 0.1..50.0f64, s in -1.0..1.0f64) {
        let k = barrier_k(lambda);
        let a = barrier_matrix(k, s * HALF_SIDE);
        prop_assert!((a.det() / (-40.0 * k) - 1.0).abs() < 1e-9);
        let (neg, pos) = (neg_part_norm(a), pos_part_norm(a));
        prop_assert!((neg * pos / (40.0 * k) - 1.0).abs() < 1e-9);
        prop_assert!((pos - neg - a.trace()).abs() <= 1e-9 * (pos + neg));
    }

    #[test]
    fn rescale_is_composition(x0 in vec2(), x in vec2(), delta in 0.05..0.25f64) {
        let x0 = x0 * 0.3;
        prop_assume!(x.norm() <= 1.0);
        let f = |p: Vec2| Vec2::new(p.x * p.y, (3.0 * p.x).sin() - p.y);
        let gf = GradientField::synthetic(Disk::unit(), f);
        let r = gf.rescale(x0, delta).unwrap();
        let twice = gf.rescale(x0, 2.0 * delta).unwrap().rescale(Vec2::ZERO, 0.5).unwrap();
        prop_assert!((r.eval(x).unwrap() - f(x0 + x * delta)).norm() < 1e-14);
        prop_assert!((twice.eval(x).unwrap() - r.eval(x).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn lebesgue_flag_is_invariant_under_rotation(x0 in vec2(), w in 0.5..6.0f64) {
        let x0 = x0 * 0.4;
        let gf = GradientField::synthetic(Disk::unit(), move |p: Vec2| Vec2::new((w * p.x).cos(), p.y * p.y));
        let rot = gf.mapped(|g| g.rot90());
        let deltas = [0.4, 0.2, 0.1, 0.05];
        let a = lebesgue_profile(&gf, x0, &deltas, Some(0.05)).unwrap();
        let b = lebesgue_profile(&rot, x0, &deltas, Some(0.05)).unwrap();
        prop_assert_eq!(a.flagged, b.flagged);
        for (p, q) in a.profile.iter().zip(&b.profile) {
            prop_assert!((p.1 - q.1).abs() <= 1e-12 * (1.0 + p.1));
        }
    }

    #[test]
    fn near_mass_grows_with_distance(x0 in vec2(), d in 0.01..0.5f64) {
        let x0 = x0 * 0.4;
        let gf = GradientField::synthetic(Disk::unit(), |p: Vec2| p * 1.2);
        let region = Region::ball(x0, 0.3);
        let g = quartic_grid();
        let small = mass_fraction_near(&gf, &region, g, ClassLabel::DAndS, d).unwrap();
        let large = mass_fraction_near(&gf, &region, g, ClassLabel::DAndS, 2.0 * d).unwrap();
        prop_assert!(small <= large && (0.0..=1.0).contains(&large));
    }

    #[test]
    fn ds_distance_is_one_lipschitz(k in 0usize..3721, l in 0usize..3721) {
        let g = quartic_grid();
        let (k, l) = (k % g.len(), l % g.len());
        let d = g.distances(ClassLabel::DAndS);
        prop_assert!((d[k] - d[l]).abs() <= (g.node(k) - g.node(l)).norm() + 1e-12);
    }

    #[test]
    fn dichotomy_never_fails_both_branches(seed in any::<u64>()) {
        let f = RandomSmooth::draw(&mut ChaCha8Rng::seed_from_u64(seed), 1.0);
        let v = |x: Vec2| f.eval(x);
        let nu = disk_superlevel_fraction(&v, 1.0).unwrap();
        prop_assume!(nu > 0.0);
        let r = sv_dichotomy(&v, nu.min(1.0), 1.0).unwrap();
        prop_assert!(r.hypothesis_met);
        prop_assert!(r.energy_branch || r.circle_branch);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn galerkin_solution_minimizes_energy(amp in -0.2..0.2f64, f1 in 0.5..4.0f64, f2 in 0.5..4.0f64) {
        static SOL: OnceLock<(degenlab::field::Field, degenlab::solve::DiscreteSolution)> = OnceLock::new();
        let (f, sol) = SOL.get_or_init(|| {
            let f = make_builtin(&BuiltinSpec::PLaplacian { p: 4.0 }).unwrap();
            let s = solve(&f, mesh(), &BoundaryData::Saddle, &SolveOpts::default()).unwrap();
            (f, s)
        });
        let m = mesh();
        let e0 = energy(f, sol).unwrap();
        let perturbed: Vec<f64> = sol
            .u
            .iter()
            .zip(&m.vertices)
            .zip(&m.is_boundary)
            .map(|((&u, x), &b)| if b { u } else { u + amp * (f1 * x.x).sin() * (f2 * x.y).cos() })
            .collect();
        let e1 = energy_with(|xi| f.potential(xi).unwrap(), &m, &perturbed).unwrap();
        prop_assert!(e1 >= e0 - 1e-12 * e0.abs().max(1.0));
    }
}
