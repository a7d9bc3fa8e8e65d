#[path = "support/oracle.rs"]
mod oracle;

use num_complex::Complex64 as C;
use proptest::prelude::*;
use raydg::quadrature::{legendre_osc, legendre_values};
use raydg::separation::{self, SeparationParams, SeparationVariant};
use raydg::tracker::{self, construct_rays, rk4_step, Ray, RayDynamics, Tolerance, TrackerSettings};
use raydg::{Medium, Mesh, Point};
use std::f64::consts::PI;

fn medium(lens: bool) -> Medium {
    if lens {
        Medium::GaussianLens
    } else {
        Medium::Layered
    }
}

fn dynamics(normalized: bool) -> RayDynamics {
    if normalized {
        RayDynamics::Normalized
    } else {
        RayDynamics::Eikonal
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    /// `c|p|` is invariant along the rays: over `T = 1` with `Δt = 1e-3`.
    #[test]
    fn hamiltonian_is_conserved(
        x in (0.0f64..1.0, 0.0f64..1.0),
        angle in 0.0f64..2.0 * PI,
        lens in any::<bool>(),
        normalized in any::<bool>(),
    ) {
        let m = medium(lens);
        let d = dynamics(normalized);
        let x = [x.0, x.1];
        let mut ray = Ray::new(x, d.seed_direction(&m, x, [angle.cos(), angle.sin()]));
        let h0 = ray.hamiltonian(&m);
        let mut drift: f64 = 0.0;
        for _ in 0..1000 {
            ray = rk4_step(&m, &ray, 1e-3, d);
            drift = drift.max((ray.hamiltonian(&m) - h0).abs());
        }
        prop_assert!(drift <= 1e-8 * h0, "drift {drift} from {h0}");
    }
}

fn point_cloud() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| [a, b]), 0..60)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 10_000, ..ProptestConfig::default() })]

    /// Centroid output is `ε/2`-separable, representative output `ε`-separable,
    /// and both cover the input within `ε`.
    #[test]
    fn separated_sets_are_separated_and_cover(
        raw in point_cloud(),
        eps in 0.05f64..1.0,
        centroid in any::<bool>(),
        default in prop::option::of((-2.0f64..2.0, -2.0f64..2.0)),
    ) {
        let params = SeparationParams {
            epsilon: eps,
            defaults: default.map(|(a, b)| vec![[a, b]]).unwrap_or_default(),
            variant: if centroid { SeparationVariant::Centroid } else { SeparationVariant::Representative },
        };
        let out = separation::separate(&raw, &params);
        prop_assert_eq!(&out[..params.defaults.len()], &params.defaults[..]);
        let floor = if centroid { eps / 2.0 } else { eps };
        prop_assert!(separation::check_separable(&out, floor), "min {}", separation::min_separation(&out));
        prop_assert!(separation::deviation(&out, &raw) <= eps * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    /// `∫_{-1}^{1} P_k(x) e^{iωx} dx` against adaptive Gauss–Kronrod.
    #[test]
    fn oscillatory_legendre_moments(k in 0usize..=20, w in -500.0f64..500.0) {
        let got = legendre_osc(k, w);
        let want = oracle::adaptive(|x| legendre_values(k, x)[k] * C::from_polar(1.0, w * x), -1.0, 1.0, 1e-13);
        prop_assert!((got - want).norm() <= 1e-10, "k={k} w={w}: {got} vs {want}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    /// Splitting each front into sub-fronts reproduces the serial captures exactly.
    #[test]
    fn split_fronts_match_serial(
        betas in prop::collection::vec(0.05f64..0.95, 1..3),
        axis in 0usize..2,
        splits in 2usize..9,
        lens in any::<bool>(),
    ) {
        let m = medium(lens);
        let mesh = Mesh::new(8).unwrap();
        let fronts: Vec<_> = betas
            .iter()
            .map(|&b| tracker::close_front(tracker::level_line(&m, axis, b, 40, RayDynamics::Eikonal)))
            .collect();
        let mut settings = TrackerSettings {
            t_final: 0.2,
            dt: 2e-3,
            tol: Tolerance::default(),
            dynamics: RayDynamics::Eikonal,
            splits: 1,
        };
        let serial = construct_rays(&m, &mesh, &fronts, &settings).unwrap();
        settings.splits = splits;
        let split = construct_rays(&m, &mesh, &fronts, &settings).unwrap();
        prop_assert_eq!(split.capture, serial.capture);
    }
}
