use std::f64::consts::PI;

use eplab::besov::{besov_norm, BesovParams};
use eplab::bony::bony_split;
use eplab::ensemble::{random_field, FieldSpec};
use eplab::ep::{check_poisson_constraint, EPState, PhysicalParams};
use eplab::harness::{generate_initial_data, DataFamily, InitialDataFamily};
use eplab::lp::{build_partition, check_almost_orthogonality, decompose};
use eplab::series::TimeSeries;
use eplab::solvers::{solve_heat, solve_transport, Drive, Scheme, TimeStepper};
use eplab::spectral::{curl, dealias, divergence, fft_forward, fft_inverse, leray_type_projection, Grid, RealField};
use proptest::prelude::*;

fn grid(dim: usize) -> Grid {
    Grid::new(dim, if dim == 3 { 16 } else { 32 }, 2.0 * PI).unwrap()
}

fn field(g: &Grid, slope: f64, seed: u64) -> RealField {
    dealias(&random_field(g, &FieldSpec::scalar(slope, 0.9 * g.dealias_radius()), seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fft_round_trip(dim in 1usize..=3, seed in any::<u64>()) {
        let g = grid(dim);
        let f = random_field(&g, &FieldSpec::scalar(-1.0, g.dealias_radius()), seed);
        let back = fft_inverse(&fft_forward(&f).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&f) <= 1e-13 * f.max_abs());
    }

    #[test]
    fn blocks_sum_to_the_field(dim in 1usize..=3, seed in any::<u64>(), slope in -3.0f64..0.0) {
        let g = grid(dim);
        let part = build_partition(g).unwrap();
        let f = field(&g, slope, seed);
        prop_assert!(decompose(&f, &part).unwrap().reconstruct().max_abs_diff(&f) <= 1e-12 * f.max_abs());
        prop_assert!(check_almost_orthogonality(&f, &part).unwrap().max_ratio <= 1e-12);
    }

    #[test]
    fn paraproducts_and_remainder_rebuild_the_product(seed in any::<u64>(), slope in -3.0f64..0.0) {
        let g = grid(2);
        let part = build_partition(g).unwrap();
        let (f, h) = (field(&g, slope, seed), field(&g, -2.0, seed ^ 1));
        prop_assert!(bony_split(&f, &h, &part).unwrap().reconstruction_error(&f, &h).unwrap() <= 1e-12);
    }

    #[test]
    fn besov_norm_is_a_norm(seed in any::<u64>(), a in -10.0f64..10.0, s in 0.0f64..3.0) {
        let g = grid(2);
        let part = build_partition(g).unwrap();
        let bp = BesovParams::l2_sum(s);
        let (f, h) = (field(&g, -2.0, seed), field(&g, -1.0, seed ^ 2));
        let nf = besov_norm(&f, &bp, &part).value;
        let nh = besov_norm(&h, &bp, &part).value;
        prop_assert!((besov_norm(&f.scaled(a), &bp, &part).value - a.abs() * nf).abs() <= 1e-12 * nf.max(1.0) * a.abs().max(1.0));
        prop_assert!(besov_norm(&(&f + &h), &bp, &part).value <= (nf + nh) * (1.0 + 1e-12));
    }

    #[test]
    fn projection_is_idempotent_and_splits_off_the_solenoidal_part(seed in any::<u64>()) {
        let g = grid(2);
        let u = dealias(&random_field(&g, &FieldSpec::vector(2, -2.0, 10.0), seed));
        let p = leray_type_projection(&u).unwrap();
        prop_assert!(curl(&p).unwrap().max_abs() <= 1e-12 * u.max_abs() * g.k_max());
        prop_assert!(divergence(&(&u - &p)).unwrap().max_abs() <= 1e-12 * u.max_abs() * g.k_max());
        prop_assert!(leray_type_projection(&p).unwrap().max_abs_diff(&p) <= 1e-13 * u.max_abs());
    }

    #[test]
    fn heat_flow_decays_in_l2(seed in any::<u64>(), kappa in 0.1f64..20.0) {
        let g = grid(2);
        let theta0 = field(&g, -2.0, seed);
        let ts = TimeStepper::new(0.01, Scheme::ExponentialRk4, 0.1, 1).unwrap();
        let out = solve_heat(&theta0, kappa, Drive::Zero, &ts).unwrap();
        let energy: Vec<f64> = out.snapshots().iter().map(|f| f.data().iter().map(|x| x * x).sum()).collect();
        prop_assert!(energy.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let m0 = theta0.mean(0);
        prop_assert!((out.last().mean(0) - m0).abs() <= 1e-13 * theta0.max_abs());
    }

    #[test]
    fn transport_by_solenoidal_flow_keeps_the_mean(seed in any::<u64>()) {
        let g = grid(2);
        let a0 = field(&g, -2.0, seed).map(|x| x + 1.0);
        let u = dealias(&random_field(&g, &FieldSpec::vector(2, -3.0, 4.0), seed ^ 3));
        let v = &u - &leray_type_projection(&u).unwrap();
        let v = v.scaled(0.5 / v.max_abs());
        let ts = TimeStepper::new(0.01, Scheme::Rk4Explicit, 0.2, 5).unwrap();
        let out = solve_transport(&a0, Drive::Constant(&v), Drive::Zero, &ts).unwrap();
        let m0 = a0.integral(0);
        prop_assert!(out.snapshots().iter().all(|a| ((a.integral(0) - m0) / m0).abs() <= 1e-12));
    }

    #[test]
    fn generated_data_satisfy_the_poisson_constraint(seed in any::<u64>(), amp in 0.0f64..0.2, which in 0usize..3) {
        let g = grid(2);
        let name = [DataFamily::GaussianBump, DataFamily::AcousticTone, DataFamily::RandomBandlimited][which];
        let params = PhysicalParams::for_horizon(0.1);
        let data: EPState = generate_initial_data(&InitialDataFamily::new(name, amp, seed), g, &params).unwrap().state;
        let res = check_poisson_constraint(&TimeSeries::constant(data), &params).unwrap();
        prop_assert!(res[0] <= 1e-12);
    }
}
