use std::path::Path;

use abphase_cli::{parse_scenario, ConfigError, ScenarioConfig};
use abphase_core::interferometer::Route;

fn bundled(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name);
    std::fs::read_to_string(path).unwrap()
}

const MINIMAL: &str = r#"
route = "flat-electric"

[packet]
center = 0.0
width = 5.0
momentum = 0.0

[arm1]
kind = "elevator"
voltage = 0.3
dwell = 2.0

[arm2]
kind = "elevator"
voltage = 0.1
dwell = 2.0
"#;

#[test]
fn minimal_config_takes_defaults() {
    let s = parse_scenario(MINIMAL).unwrap();
    assert_eq!(s.route, Route::FlatElectric);
    assert_eq!(s.constants.hbar, 1.0);
    assert_eq!(s.constants.m, 1.0);
    assert_eq!(s.constants.c, 1e3);
    assert_eq!(s.grid.n_points(), 4096);
    assert_eq!(s.grid.length(), 400.0);
    assert!(s.step_size > 0.0);
    assert!(s.validate().is_ok());
    assert_eq!(s.total_steps().unwrap() % s.record_stride, 0);
}

#[test]
fn unknown_key_is_named() {
    let text = MINIMAL.replace("width = 5.0", "width = 5.0\nsigma = 2.0");
    let err = parse_scenario(&text).unwrap_err();
    assert!(matches!(err, ConfigError::Parse(_)));
    assert!(err.to_string().contains("sigma"), "{err}");
}

#[test]
fn non_positive_radius_is_rejected() {
    for r in ["0.0", "-1.0"] {
        let text = bundled("newtonian.cfg").replace("r1 = 1.0", &format!("r1 = {r}"));
        let err = parse_scenario(&text).unwrap_err();
        assert!(!matches!(err, ConfigError::Parse(_)), "{err}");
        assert!(err.to_string().to_lowercase().contains("radius"), "{err}");
    }
}

#[test]
fn metric_route_without_gravity_is_invalid() {
    let text = MINIMAL.replace("flat-electric", "semi-covariant");
    assert!(matches!(
        parse_scenario(&text),
        Err(ConfigError::Invalid(_))
    ));
}

#[test]
fn echo_round_trips_for_every_bundled_scenario() {
    for name in [
        "tube.cfg",
        "electric_elevator.cfg",
        "newtonian.cfg",
        "schwarzschild_semi.cfg",
        "schwarzschild_tau.cfg",
    ] {
        let scenario = parse_scenario(&bundled(name)).unwrap();
        let echo = ScenarioConfig::echo(&scenario);
        let text = echo.to_toml();
        let again = parse_scenario(&text).unwrap();
        assert_eq!(again, scenario, "{name}");
        assert_eq!(ScenarioConfig::echo(&again).to_toml(), text, "{name}");
    }
}

#[test]
fn echo_round_trips_with_defaults_applied() {
    let scenario = parse_scenario(MINIMAL).unwrap();
    let again = parse_scenario(&ScenarioConfig::echo(&scenario).to_toml()).unwrap();
    assert_eq!(again, scenario);
}

#[test]
fn unknown_key_inside_a_segment_is_named() {
    let text = MINIMAL.replace(
        "[arm2]\nkind = \"elevator\"\nvoltage = 0.1\ndwell = 2.0\n",
        "[arm2]\nkind = \"segments\"\nsegments = [{ kind = \"constant\", duration = 2.0, levle = 0.1 }]\n",
    );
    let err = parse_scenario(&text).unwrap_err();
    assert!(err.to_string().contains("levle"), "{err}");
}
