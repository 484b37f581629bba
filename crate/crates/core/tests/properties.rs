use proptest::prelude::*;

use semistab::banach::{Grid, GridFunction, NormKind};
use semistab::certificates::{compute_q, generate_samples, SampleFamily, SampleSpec};
use semistab::cli::{ExperimentConfig, ModelId};
use semistab::closedloop::{time_grid, Plant};
use semistab::semigroup::{HeatScheme, SemigroupModel};

fn norm_kind() -> impl Strategy<Value = NormKind> {
    prop_oneof![Just(NormKind::L1), Just(NormKind::Sup)]
}

fn state() -> impl Strategy<Value = GridFunction> {
    (norm_kind(), 2usize..64, 0.1f64..20.0).prop_flat_map(|(norm, n, width)| {
        prop::collection::vec(-1e3f64..1e3, n).prop_map(move |v| {
            GridFunction::new(Grid::new(0.0, width, n).unwrap(), v, norm).unwrap()
        })
    })
}

fn state_pair() -> impl Strategy<Value = (GridFunction, GridFunction)> {
    state().prop_flat_map(|y| {
        let n = y.len();
        prop::collection::vec(-1e3f64..1e3, n).prop_map(move |v| {
            let z = y.with_values(v);
            (y.clone(), z)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn norm_is_absolutely_homogeneous(y in state(), c in -1e3f64..1e3) {
        let lhs = y.scaled(c).norm();
        let rhs = c.abs() * y.norm();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
    }

    #[test]
    fn norm_triangle_inequality((y, z) in state_pair()) {
        let s = y.add(&z).unwrap().norm();
        prop_assert!(s <= (y.norm() + z.norm()) * (1.0 + 1e-12));
    }

    #[test]
    fn duality_selection_is_normalized(y in state()) {
        let n2 = y.norm().powi(2);
        let p = y.duality_select().pair(&y).unwrap();
        prop_assert!((p - n2).abs() <= 1e-10 * n2);
    }

    #[test]
    fn duality_pairing_obeys_cauchy_schwarz((y, z) in state_pair()) {
        let p = y.duality_select().pair(&z).unwrap();
        prop_assert!(p.abs() <= y.norm() * z.norm() * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn shifts_are_contractions(v in prop::collection::vec(-1.0f64..1.0, 50), t in 0.0f64..1.5, right in any::<bool>()) {
        let g = Grid::unit(50).unwrap();
        let y = GridFunction::new(g, v, NormKind::L1).unwrap();
        let sg = if right { SemigroupModel::RightShift { grid: g } } else { SemigroupModel::LeftShiftCutoff { grid: g } };
        prop_assert!(sg.evaluate(&y, t).unwrap().norm() <= y.norm() * (1.0 + 1e-10));
    }

    #[test]
    fn implicit_heat_is_a_sup_contraction(v in prop::collection::vec(-1.0f64..1.0, 40), t in 0.0f64..0.5, dt in 1e-4f64..0.05) {
        let g = Grid::unit(40).unwrap();
        let y = GridFunction::new(g, v, NormKind::Sup).unwrap();
        let sg = SemigroupModel::heat(g, dt, HeatScheme::ImplicitEuler).unwrap();
        prop_assert!(sg.evaluate(&y, t).unwrap().norm() <= y.norm() * (1.0 + 1e-10));
    }

    #[test]
    fn aligned_shift_law_is_exact(v in prop::collection::vec(-1.0f64..1.0, 80), i in 0usize..100, j in 0usize..100) {
        let g = Grid::unit(80).unwrap();
        let y = GridFunction::new(g, v, NormKind::L1).unwrap();
        let (t, s) = (i as f64 * g.dx(), j as f64 * g.dx());
        for sg in [SemigroupModel::LeftShiftCutoff { grid: g }, SemigroupModel::RightShift { grid: g }] {
            prop_assert_eq!(sg.semigroup_law_residual(&y, t, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn q_is_non_increasing_in_delta(mu in 0.001f64..0.45, m in 0.1f64..2.0, c in 0.0f64..5.0, d1 in 0.0f64..5.0, d2 in 0.0f64..5.0) {
        // monotone iff mu*M^2/(1 - mu*M) <= sqrt(1 + 2 mu^2 c)
        prop_assume!(m * mu < 1.0 && mu * m * m / (1.0 - mu * m) <= 1.0);
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let q_lo = compute_q(mu, lo, m, c).unwrap();
        let q_hi = compute_q(mu, hi, m, c).unwrap();
        prop_assert!(q_hi <= q_lo * (1.0 + 1e-12));
    }

    #[test]
    fn samples_are_reproducible(seed in any::<u64>(), count in 1usize..20, f in 0usize..4) {
        let g = Grid::new(0.0, 5.0, 100).unwrap();
        let spec = SampleSpec::new(count, seed, SampleFamily::ALL[f]).unwrap();
        let a = generate_samples(&spec, g, NormKind::L1, (0.0, 2.5)).unwrap();
        let b = generate_samples(&spec, g, NormKind::L1, (0.0, 2.5)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn config_round_trips(mu in 0.0f64..0.9, seed in any::<u64>(), n in 10usize..5000, t_final in 0.0f64..50.0, id in 0usize..4) {
        let ids = [ModelId::Example1, ModelId::Example2, ModelId::Example3, ModelId::Matrix];
        let mut cfg = ExperimentConfig::canonical(ids[id]);
        cfg.model.mu = mu;
        cfg.samples.seed = seed;
        cfg.grid.n_cells = n;
        cfg.time.t_final = t_final;
        let echoed = cfg.to_toml();
        prop_assert_eq!(ExperimentConfig::from_toml(&echoed).unwrap(), cfg);
    }

    #[test]
    fn closed_loop_norms_never_increase(mut v in prop::collection::vec(-1.0f64..1.0, 60), mu in 0.0f64..0.9, which in 0usize..3) {
        let (plant, norm) = match which {
            0 => (Plant::example1(Grid::unit(60).unwrap(), 1.0).unwrap(), NormKind::L1),
            1 => {
                let g = Grid::new(0.0, 6.0, 60).unwrap();
                let k = GridFunction::from_fn(g, NormKind::L1, |x| 0.5 * (-x).exp()).unwrap();
                (Plant::example2(k).unwrap(), NormKind::L1)
            }
            _ => {
                let g = Grid::unit(60).unwrap();
                (Plant::example3(g, g.dx()).unwrap(), NormKind::Sup)
            }
        };
        // the right shift needs room: support and horizon both half the window
        if which == 1 {
            v[30..].fill(0.0);
        }
        let y0 = GridFunction::new(*plant.grid(), v, norm).unwrap();
        let h = plant.native_step();
        let tr = plant.simulate(&y0, mu, &time_grid(h, 30.0 * h)).unwrap();
        prop_assert!(tr.norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-10)));
    }
}
