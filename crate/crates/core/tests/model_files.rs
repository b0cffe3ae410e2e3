mod common;

use agepop::analysis::net_reproduction_rate;
use agepop::io::{parse_model, ModelFile};
use agepop::model::{validate, ProbeGrid};
use agepop::Error;

use common::model_path;

#[test]
fn bundled_models_satisfy_hypotheses() {
    for name in ["logistic", "allee", "crowding"] {
        let file = ModelFile::load(model_path(name)).unwrap();
        let spec = file.to_spec().unwrap();
        let report = validate(&spec, &ProbeGrid::default()).unwrap();
        assert!(report.passed(), "{name}: {:?}", report.failures());
    }
}

#[test]
fn serialised_file_describes_the_same_model() {
    for name in ["logistic", "allee", "crowding"] {
        let file = ModelFile::load(model_path(name)).unwrap();
        let again = parse_model(&file.to_json().unwrap()).unwrap();
        let spec = file.to_spec().unwrap();
        assert_eq!(net_reproduction_rate(&spec), net_reproduction_rate(&again));
        for a in [0.0, 1.3, 4.0, 7.9] {
            for x in [0.0, 0.7, 12.0] {
                assert_eq!(spec.mortality.eval(a, x), again.mortality.eval(a, x));
                assert_eq!(spec.fertility.eval(a, x), again.fertility.eval(a, x));
            }
        }
    }
}

fn logistic_text() -> String {
    std::fs::read_to_string(model_path("logistic")).unwrap()
}

#[test]
fn unknown_top_level_field_is_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(&logistic_text()).unwrap();
    v["lifespan"] = serde_json::json!(3.0);
    let err = parse_model(&v.to_string()).unwrap_err();
    assert!(err.to_string().contains("lifespan"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn bad_values_name_their_field() {
    let mut v: serde_json::Value = serde_json::from_str(&logistic_text()).unwrap();
    v["a_dagger"] = serde_json::json!(-1.0);
    let err = parse_model(&v.to_string()).unwrap_err();
    assert!(matches!(err, Error::ModelFile { .. }), "{err:?}");
    assert!(err.to_string().contains("a_dagger"), "{err}");

    let mut v: serde_json::Value = serde_json::from_str(&logistic_text()).unwrap();
    v["mu0"] = serde_json::json!({"kind": "gompertz", "params": {}});
    let err = parse_model(&v.to_string()).unwrap_err();
    assert!(err.to_string().contains("mu0"), "{err}");
}

#[test]
fn hypothesis_failure_reports_a_witness() {
    // fertility far above c·p breaks the cap hypothesis
    let mut v: serde_json::Value = serde_json::from_str(&logistic_text()).unwrap();
    v["c"] = serde_json::json!(0.01);
    let spec = parse_model(&v.to_string()).unwrap();
    let report = validate(&spec, &ProbeGrid::default()).unwrap();
    assert!(!report.passed());
    let failure = report.failures()[0];
    assert!(failure.witness.is_some(), "{failure:?}");
}
