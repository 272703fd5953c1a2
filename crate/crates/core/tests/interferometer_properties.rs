use abphase_core::analytic::kinetic_redshift_correction;
use abphase_core::interferometer::{
    default_fringe_kick, fringe_synthesize, route_equivalence, run_two_arm, Route, Scenario,
};
use abphase_core::potentials::tube_pulse_program;
use abphase_core::{
    make_gaussian_packet, Constants, Grid1D, MetricParams, PacketSpec, PotentialProgram,
};
use proptest::prelude::*;

const SLOPE_R1: f64 = 1.0;
const SLOPE_R2: f64 = 2.0;
const MASS: f64 = 1e-3;

fn grid() -> Grid1D {
    Grid1D::new(512, 200.0).unwrap()
}

fn at_rest() -> PacketSpec {
    PacketSpec {
        center: 0.0,
        width: 4.0,
        momentum: 0.0,
    }
}

fn newtonian(dwell: f64) -> Scenario {
    let c = Constants::default();
    Scenario::gravitational(
        Route::Newtonian,
        c,
        grid(),
        at_rest(),
        MetricParams::new(MASS, SLOPE_R1, c.c).unwrap(),
        MetricParams::new(MASS, SLOPE_R2, c.c).unwrap(),
        (0.5, dwell, 0.5),
        0.01,
        10,
    )
    .unwrap()
}

fn numeric(s: &Scenario) -> f64 {
    run_two_arm(s).unwrap().numeric_phase
}

#[test]
fn dwell_phases_add() {
    let (a, b) = (3.0, 5.0);
    let whole = numeric(&newtonian(a + b));
    let parts = numeric(&newtonian(a)) + numeric(&newtonian(b));
    assert!((whole - parts).abs() < 1e-10, "{whole} vs {parts}");
}

#[test]
fn phase_is_linear_in_dwell_time() {
    let dwells: Vec<f64> = (1..=8).map(f64::from).collect();
    let phases: Vec<f64> = dwells.iter().map(|&d| numeric(&newtonian(d))).collect();
    let n = dwells.len() as f64;
    let (sx, sy) = (dwells.iter().sum::<f64>(), phases.iter().sum::<f64>());
    let sxx: f64 = dwells.iter().map(|x| x * x).sum();
    let sxy: f64 = dwells.iter().zip(&phases).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let worst = dwells
        .iter()
        .zip(&phases)
        .map(|(x, y)| (y - (slope * x + intercept)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst}");
    let c = Constants::default();
    let expected = c.m * MASS / c.hbar * (1.0 / SLOPE_R2 - 1.0 / SLOPE_R1);
    assert!(
        ((slope - expected) / expected).abs() < 1e-6,
        "{slope} vs {expected}"
    );
}

fn pulse_pair(amplitude1: f64, amplitude2: f64) -> (PotentialProgram, PotentialProgram) {
    (
        tube_pulse_program(amplitude1, 1.0, 2.0, 1.0, 1.0).unwrap(),
        tube_pulse_program(amplitude2, 1.0, 2.0, 1.0, 1.0).unwrap(),
    )
}

fn electric(arm1: PotentialProgram, arm2: PotentialProgram, momentum: f64) -> Scenario {
    Scenario::flat_electric(
        Constants::default(),
        grid(),
        PacketSpec {
            center: 0.0,
            width: 4.0,
            momentum,
        },
        arm1,
        arm2,
        0.005,
        5,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn common_offset_leaves_phase_unchanged(
        a1 in -0.5f64..0.5,
        a2 in -0.5f64..0.5,
        offset in -100.0f64..100.0,
    ) {
        let (p1, p2) = pulse_pair(a1, a2);
        let base = numeric(&electric(p1.clone(), p2.clone(), 0.5));
        let shifted = numeric(&electric(p1.offset(offset).unwrap(), p2.offset(offset).unwrap(), 0.5));
        prop_assert!((base - shifted).abs() < 1e-12, "{} vs {}", base, shifted);
    }

    #[test]
    fn uniform_potentials_exert_no_force(
        a1 in -1.0f64..1.0,
        a2 in -1.0f64..1.0,
        momentum in -2.0f64..2.0,
    ) {
        let (p1, p2) = pulse_pair(a1, a2);
        let c = run_two_arm(&electric(p1, p2, momentum)).unwrap();
        prop_assert!(c.momentum_drift < 1e-10);
        prop_assert!(c.norm_drift < 1e-12);
        prop_assert!(c.residual.abs() < 1e-9);
    }

    #[test]
    fn fringe_intensity_is_conserved(theta in -3.0f64..3.0, momentum in -1.0f64..1.0) {
        let c = Constants::default();
        let g = Grid1D::new(1024, 200.0).unwrap();
        let psi = make_gaussian_packet(&g, 0.0, 4.0, momentum, &c).unwrap();
        let other = psi.with_phase(theta);
        let pattern = fringe_synthesize(&psi, &other, default_fringe_kick(&psi, &c), &c).unwrap();
        prop_assert!(pattern.intensities.iter().all(|&i| i >= 0.0));
        let total: f64 = pattern.intensities.iter().sum::<f64>() * g.spacing();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }
}

#[test]
fn toggled_correction_separates_routes_by_the_kinetic_term() {
    let c = Constants::default().with_speed_of_light(10.0).unwrap();
    let (r1, r2, mass, dwell) = (1.0, 2.0, 0.5, 4.0);
    let s = Scenario::gravitational(
        Route::SemiCovariant,
        c,
        grid(),
        PacketSpec {
            center: 0.0,
            width: 4.0,
            momentum: 1.0,
        },
        MetricParams::new(mass, r1, c.c).unwrap(),
        MetricParams::new(mass, r2, c.c).unwrap(),
        (0.5, dwell, 0.5),
        2.5e-3,
        5,
    )
    .unwrap();
    let r = route_equivalence(&s).unwrap();
    let mean_sq = 1.0 + (c.hbar / (2.0 * 4.0)).powi(2);
    let expected = -kinetic_redshift_correction(r1, r2, dwell, mass, mean_sq, &c).unwrap();
    assert!(
        ((r.difference - expected) / expected).abs() < 0.05,
        "{} vs {expected}",
        r.difference
    );
}
