//! Round-trip validation of the inverse pump solve: magnitude ratios,
//! phase transfer through the forward model, and leakage behavior under
//! window growth.

use num_complex::Complex64;
use oam_mes_core::engineering::{
    apply_pump_phases, solve_pump_for_target, subspace_state, TargetState,
};
use oam_mes_core::spectrum::{
    spectrum_for_pump, CrystalConfig, ModeWindow, PumpSpec, QuadratureSettings,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn quad() -> QuadratureSettings {
    QuadratureSettings {
        check_convergence: false,
        ..Default::default()
    }
}

fn wrap_diff(a: f64, b: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let d = (a - b).rem_euclid(tau);
    d.min(tau - d)
}

#[test]
fn uniform_target_round_trip_marginals() {
    let crystal = CrystalConfig::reference_experiment();
    let result = solve_pump_for_target(
        &TargetState::mes3(),
        &crystal,
        &ModeWindow::default(),
        &quad(),
    )
    .unwrap();
    let marg = result.spectrum.azimuthal_marginal();
    let values = [marg[&(-1, -1)], marg[&(0, 0)], marg[&(1, 1)]];
    for v in &values[1..] {
        assert!(
            (v - values[0]).abs() <= 1e-8 * values[0],
            "marginals {values:?}"
        );
    }
    // pump magnitudes in the expected neighborhood of (sqrt2.5, 1, sqrt2.5)
    let c0 = result.pump.coefficient(0).unwrap().norm();
    let c2 = result.pump.coefficient(2).unwrap().norm();
    let cm2 = result.pump.coefficient(-2).unwrap().norm();
    let ratio = c2 / c0;
    assert!((cm2 / c0 - ratio).abs() < 1e-10, "symmetric charges differ");
    assert!(
        (1.2..2.2).contains(&ratio),
        "pump ratio {ratio} far from the sqrt(2.5) neighborhood"
    );
}

#[test]
fn arbitrary_target_round_trip() {
    let crystal = CrystalConfig::reference_experiment();
    let target = TargetState::new(
        vec![(-1, -1), (0, 0), (1, 1)],
        vec![
            Complex64::from_polar(0.5, 0.0),
            Complex64::from_polar(1.0, 1.1),
            Complex64::from_polar(0.8, -2.3),
        ],
    )
    .unwrap();
    let result =
        solve_pump_for_target(&target, &crystal, &ModeWindow::default(), &quad()).unwrap();
    // marginal magnitude ratios equal the target magnitude ratios
    let t_mags: Vec<f64> = target.coefficients().iter().map(|c| c.norm()).collect();
    let a = &result.achieved_marginal_magnitudes;
    for k in 1..3 {
        let expect = t_mags[k] / t_mags[0];
        let got = a[k] / a[0];
        assert!(
            (got - expect).abs() <= 1e-8 * expect,
            "ratio {k}: {got} vs {expect}"
        );
    }
    // fundamental-mode phases carry the target phases
    let normalized = result.achieved.phase_normalized();
    for k in 1..3 {
        let want = target.coefficients()[k].arg() - target.coefficients()[0].arg();
        let got = normalized.coefficients()[k].arg();
        assert!(
            wrap_diff(got, want) < 1e-9,
            "phase {k}: {got} vs {want}"
        );
    }
}

#[test]
fn phase_transfer_through_forward_model() {
    let crystal = CrystalConfig::reference_experiment();
    let window = ModeWindow::default();
    let base = solve_pump_for_target(&TargetState::mes3(), &crystal, &window, &quad()).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(2024);
    for _ in 0..8 {
        let theta0: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let theta2: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let pump = apply_pump_phases(&base.pump, theta0, theta2).unwrap();
        let amps = spectrum_for_pump(&pump, &crystal, &window, &quad()).unwrap();
        let (state, _) = subspace_state(&amps, &TargetState::mes3()).unwrap();
        let normalized = state.phase_normalized();
        assert!(
            wrap_diff(normalized.coefficients()[1].arg(), theta0) < 1e-9,
            "theta0 transfer: {} vs {theta0}",
            normalized.coefficients()[1].arg()
        );
        assert!(
            wrap_diff(normalized.coefficients()[2].arg(), theta2) < 1e-9,
            "theta2 transfer: {} vs {theta2}",
            normalized.coefficients()[2].arg()
        );
        // magnitudes untouched by pure phases
        for (l, c) in pump.terms() {
            assert!(
                (c.norm() - base.pump.coefficient(*l).unwrap().norm()).abs() < 1e-15
            );
        }
    }
}

#[test]
fn leakage_monotone_under_window_growth() {
    let crystal = CrystalConfig::reference_experiment();
    let pump = PumpSpec::new([
        (-2, Complex64::new(1.5811, 0.0)),
        (0, Complex64::new(1.0, 0.0)),
        (2, Complex64::new(1.5811, 0.0)),
    ])
    .unwrap();
    let mut last = -1.0;
    for window in [
        ModeWindow::new(3, 1),
        ModeWindow::new(4, 2),
        ModeWindow::new(5, 3),
        ModeWindow::new(6, 4),
    ] {
        let amps = spectrum_for_pump(&pump, &crystal, &window, &quad()).unwrap();
        let (_, leakage) = subspace_state(&amps, &TargetState::mes3()).unwrap();
        assert!(
            leakage >= last - 1e-10,
            "leakage shrank from {last} to {leakage} at {window:?}"
        );
        last = leakage;
    }
}
