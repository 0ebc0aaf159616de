use fundlim::bounds::{error_bound_lti, error_bound_p2, error_bound_pinf, output_bound};
use fundlim::disturbance::entropy_summary;
use fundlim::plant::analyze;
use fundlim::simulation::{run_closed_loop, verify_bound, InitialState};
use fundlim::{
    BuiltinController, DisturbanceModel, Error, LinearFilter, NormOrder, Signal, SimulationConfig,
    StateSpaceModel, StaticGain, ZeroController,
};
use nalgebra::DMatrix;

const L2: NormOrder = NormOrder::Finite(2.0);
const GAUSS: DisturbanceModel = DisturbanceModel::IidGaussian { sigma: 1.0 };

fn cfg(horizon: usize, trajectories: usize, p_list: Vec<NormOrder>) -> SimulationConfig {
    SimulationConfig::new(horizon, trajectories, 20240601, p_list)
}

#[test]
fn stable_plant_zero_controller_reproduces_disturbance() {
    let plant = StateSpaceModel::scalar(0.5).unwrap();
    let r = run_closed_loop(
        &plant,
        &ZeroController,
        &GAUSS,
        &cfg(200, 100_000, vec![L2]),
    )
    .unwrap();
    assert!(r.stable);
    assert!((r.tail_error[0] - 1.0).abs() < 0.01, "{}", r.tail_error[0]);
}

#[test]
fn variance_optimal_gain_attains_the_floor() {
    // x⁺ = (2 - c) x + d, e = -c x + d: var(e) = c²/(1 - (2-c)²) + 1, minimized at c = 1.5 with value 4.
    let plant = StateSpaceModel::scalar(2.0).unwrap();
    let r = run_closed_loop(
        &plant,
        &StaticGain(1.5),
        &GAUSS,
        &cfg(300, 100_000, vec![L2]),
    )
    .unwrap();
    assert!(r.stable);
    assert!((r.tail_error[0] - 2.0).abs() < 0.05, "{}", r.tail_error[0]);

    let chars = analyze(&plant).unwrap();
    let report = error_bound_p2(&chars, &entropy_summary(&GAUSS).unwrap()).unwrap();
    let cert = verify_bound(&r, &report, Signal::Error).unwrap();
    assert!(cert.satisfied);
    assert!((cert.ratio - 1.0).abs() < 0.03, "{cert:?}");
}

#[test]
fn closed_form_gain_sweep_matches_oracle() {
    let oracle = |c: f64| c * c / (1.0 - (2.0 - c) * (2.0 - c)) + 1.0;
    // the oracle's minimum over stabilizing gains is at c = 1.5
    let best = (1..400)
        .map(|i| 1.0 + i as f64 / 200.0)
        .filter(|c| (2.0f64 - c).abs() < 1.0)
        .min_by(|a, b| oracle(*a).total_cmp(&oracle(*b)))
        .unwrap();
    assert!((best - 1.5).abs() < 0.01);
    assert!((oracle(1.5) - 4.0).abs() < 1e-12);
    assert!((oracle(2.0) - 5.0).abs() < 1e-12);

    let plant = StateSpaceModel::scalar(2.0).unwrap();
    for c in [1.3, 1.5, 1.8, 2.0, 2.4] {
        let r =
            run_closed_loop(&plant, &StaticGain(c), &GAUSS, &cfg(300, 40_000, vec![L2])).unwrap();
        let var = r.tail_error[0].powi(2);
        assert!(
            (var / oracle(c) - 1.0).abs() < 0.05,
            "c={c}: {var} vs {}",
            oracle(c)
        );
        assert!(var >= 4.0 * 0.97);
    }
}

#[test]
fn deadbeat_gain_leaves_slack() {
    let plant = StateSpaceModel::scalar(2.0).unwrap();
    let r = run_closed_loop(
        &plant,
        &StaticGain(2.0),
        &GAUSS,
        &cfg(300, 100_000, vec![L2]),
    )
    .unwrap();
    assert!((r.tail_error[0] - 5f64.sqrt()).abs() < 0.05);
    let chars = analyze(&plant).unwrap();
    let report = error_bound_lti(L2, &chars, &entropy_summary(&GAUSS).unwrap()).unwrap();
    let cert = verify_bound(&r, &report, Signal::Error).unwrap();
    assert!(cert.satisfied);
    assert!((cert.ratio - 5f64.sqrt() / 2.0).abs() < 0.03);
}

#[test]
fn uniform_sup_norm_approaches_bound_from_below() {
    let plant = StateSpaceModel::scalar(0.5).unwrap();
    let dist = DisturbanceModel::IidUniform { half_width: 1.0 };
    let r = run_closed_loop(
        &plant,
        &ZeroController,
        &dist,
        &cfg(100, 10_000, vec![NormOrder::Infinity]),
    )
    .unwrap();
    let chars = analyze(&plant).unwrap();
    let report = error_bound_pinf(&chars, &entropy_summary(&dist).unwrap()).unwrap();
    assert_eq!(report.bound_value, 1.0);
    let cert = verify_bound(&r, &report, Signal::Error).unwrap();
    assert!(cert.ratio <= 1.0 && cert.ratio >= 0.999, "{cert:?}");
    assert!(cert.satisfied, "{cert:?}");
}

/// Stationary covariance of `x⁺ = F x + B d` by fixed-point iteration.
fn lyapunov(f: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = q.clone();
    for _ in 0..5000 {
        p = f * &p * f.transpose() + q;
    }
    p
}

#[test]
fn two_state_loop_matches_lyapunov_oracle() {
    // unstable second-order plant, stabilized by a static gain
    let plant =
        StateSpaceModel::from_rows(&[vec![1.2, 0.4], vec![0.0, 0.3]], &[1.0, 0.5], &[1.0, 0.2])
            .unwrap();
    let c = 0.9;
    let f = plant.a() - plant.b() * plant.c() * c;
    let spectral_radius = f
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    assert!(spectral_radius < 1.0);
    let q = plant.b() * plant.b().transpose();
    let p = lyapunov(&f, &q);
    let cpc = (plant.c() * &p * plant.c().transpose())[(0, 0)];
    let var_e = c * c * cpc + 1.0;
    let var_y = cpc;

    let r = run_closed_loop(&plant, &StaticGain(c), &GAUSS, &cfg(300, 60_000, vec![L2])).unwrap();
    assert!(
        (r.tail_error[0].powi(2) / var_e - 1.0).abs() < 0.04,
        "{} vs {var_e}",
        r.tail_error[0].powi(2)
    );
    assert!((r.tail_output[0].powi(2) / var_y - 1.0).abs() < 0.04);

    let chars = analyze(&plant).unwrap();
    let ent = entropy_summary(&GAUSS).unwrap();
    assert!(
        verify_bound(
            &r,
            &error_bound_lti(L2, &chars, &ent).unwrap(),
            Signal::Error
        )
        .unwrap()
        .satisfied
    );
    assert!(
        verify_bound(&r, &output_bound(L2, &chars, &ent).unwrap(), Signal::Output)
            .unwrap()
            .satisfied
    );
}

#[test]
fn nonminimum_phase_output_bound_holds() {
    // (z - 2)/z², open-loop stable; y_k = d_{k-1} - 2 d_{k-2}
    let plant = StateSpaceModel::companion(&[1.0, -2.0], &[0.0, 0.0]).unwrap();
    let chars = analyze(&plant).unwrap();
    let ent = entropy_summary(&GAUSS).unwrap();
    let report = output_bound(L2, &chars, &ent).unwrap();
    assert!((report.bound_value - 2.0).abs() < 1e-9);
    let r = run_closed_loop(&plant, &ZeroController, &GAUSS, &cfg(100, 50_000, vec![L2])).unwrap();
    let cert = verify_bound(&r, &report, Signal::Output).unwrap();
    assert!(cert.satisfied);
    assert!((cert.ratio - 5f64.sqrt() / 2.0).abs() < 0.03);
}

#[test]
fn builtin_matrix_never_violates_bounds() {
    let plants = [
        (
            StateSpaceModel::scalar(0.5).unwrap(),
            BuiltinController::Zero(ZeroController),
        ),
        (
            StateSpaceModel::scalar(2.0).unwrap(),
            BuiltinController::Gain(StaticGain(1.5)),
        ),
        (
            StateSpaceModel::scalar(-1.5).unwrap(),
            BuiltinController::Gain(StaticGain(-1.2)),
        ),
        (
            StateSpaceModel::scalar(1.5).unwrap(),
            BuiltinController::Arma(LinearFilter::new(vec![-1.0, -0.2], vec![0.1]).unwrap()),
        ),
    ];
    let disturbances = [
        GAUSS,
        DisturbanceModel::IidUniform { half_width: 1.0 },
        DisturbanceModel::IidGeneralizedGaussian {
            shape: 4.0,
            norm: 1.0,
        },
        DisturbanceModel::IidGeneralizedGaussian {
            shape: 1.0,
            norm: 0.5,
        },
    ];
    let orders = vec![
        NormOrder::Finite(1.0),
        L2,
        NormOrder::Finite(4.0),
        NormOrder::Infinity,
    ];
    for (plant, ctrl) in &plants {
        let chars = analyze(plant).unwrap();
        for d in &disturbances {
            let ent = entropy_summary(d).unwrap();
            let r = run_closed_loop(plant, ctrl, d, &cfg(150, 5_000, orders.clone())).unwrap();
            assert!(r.stable, "{ctrl:?} {d:?}");
            for &p in &orders {
                for (signal, report) in [
                    (Signal::Error, error_bound_lti(p, &chars, &ent).unwrap()),
                    (Signal::Output, output_bound(p, &chars, &ent).unwrap()),
                ] {
                    let cert = verify_bound(&r, &report, signal).unwrap();
                    assert!(cert.satisfied, "{ctrl:?} {d:?} {signal:?} p={p}: {cert:?}");
                }
            }
        }
    }
}

#[test]
fn identical_configs_are_bit_identical() {
    let plant = StateSpaceModel::scalar(2.0).unwrap();
    let dist = DisturbanceModel::GaussAr {
        coeffs: vec![0.6],
        sigma_w: 0.8,
    };
    let c = cfg(120, 3_000, vec![L2, NormOrder::Infinity]);
    let a = run_closed_loop(&plant, &StaticGain(1.5), &dist, &c).unwrap();
    let b = run_closed_loop(&plant, &StaticGain(1.5), &dist, &c).unwrap();
    assert_eq!(a, b);

    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let one = single.install(|| run_closed_loop(&plant, &StaticGain(1.5), &dist, &c).unwrap());
    assert_eq!(a, one);
    assert_eq!(a.to_csv(), one.to_csv());
}

#[test]
fn vanishing_disturbance_gives_vanishing_norms() {
    let plant = StateSpaceModel::scalar(0.5).unwrap();
    let dist = DisturbanceModel::IidGaussian { sigma: 1e-12 };
    let r = run_closed_loop(
        &plant,
        &ZeroController,
        &dist,
        &cfg(100, 1_000, vec![L2, NormOrder::Infinity]),
    )
    .unwrap();
    for series in r.error_norms.iter().chain(&r.output_norms) {
        assert!(series.iter().all(|&v| v <= 1e-10));
    }
}

#[test]
fn norms_scale_linearly_with_disturbance() {
    let plant = StateSpaceModel::scalar(2.0).unwrap();
    let ctrl = LinearFilter::new(vec![-1.6, 0.1], vec![0.05]).unwrap();
    let c = cfg(
        100,
        2_000,
        vec![
            NormOrder::Finite(1.0),
            L2,
            NormOrder::Finite(3.0),
            NormOrder::Infinity,
        ],
    );
    for base in [GAUSS, DisturbanceModel::IidUniform { half_width: 1.0 }] {
        let s = 3.7;
        let a = run_closed_loop(&plant, &ctrl, &base, &c).unwrap();
        let b = run_closed_loop(&plant, &ctrl, &base.scaled(s), &c).unwrap();
        for (sa, sb) in a.error_norms.iter().zip(&b.error_norms) {
            for (x, y) in sa.iter().zip(sb) {
                assert!((y - s * x).abs() <= 1e-12 * (s * x).max(1e-300), "{x} {y}");
            }
        }
    }
}

#[test]
fn unstable_loop_is_flagged_and_refused() {
    let plant = StateSpaceModel::scalar(2.0).unwrap();
    let r = run_closed_loop(&plant, &ZeroController, &GAUSS, &cfg(100, 1_000, vec![L2])).unwrap();
    assert!(!r.stable);
    assert_eq!(r.diverged_trajectories, 0);
    let report = error_bound_lti(
        L2,
        &analyze(&plant).unwrap(),
        &entropy_summary(&GAUSS).unwrap(),
    )
    .unwrap();
    assert!(matches!(
        verify_bound(&r, &report, Signal::Error),
        Err(Error::CertificationRefused(_))
    ));
}

#[test]
fn verify_requires_a_simulated_order() {
    let plant = StateSpaceModel::scalar(0.5).unwrap();
    let r = run_closed_loop(&plant, &ZeroController, &GAUSS, &cfg(50, 100, vec![L2])).unwrap();
    let report =
        error_bound_pinf(&analyze(&plant).unwrap(), &entropy_summary(&GAUSS).unwrap()).unwrap();
    assert!(matches!(
        verify_bound(&r, &report, Signal::Error),
        Err(Error::CertificationRefused(_))
    ));
}

#[test]
fn random_initial_state_washes_out() {
    let plant = StateSpaceModel::scalar(0.5).unwrap();
    let mut c = cfg(200, 20_000, vec![L2]);
    c.initial_state = InitialState::Gaussian { std: 5.0 };
    let r = run_closed_loop(&plant, &ZeroController, &GAUSS, &c).unwrap();
    // y_0 carries the initial state
    assert!((r.output_norms[0][0] - 5.0).abs() < 0.2);
    assert!((r.tail_output[0].powi(2) - 4.0 / 3.0).abs() < 0.06);
}
