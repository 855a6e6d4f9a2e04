#[path = "../examples/landmark_calibration.rs"]
mod landmark_calibration;

#[test]
fn landmark_calibration_example_runs() {
    landmark_calibration::run_example().expect("landmark_calibration example should run");
}

#[path = "../examples/fidget_profiles.rs"]
mod fidget_profiles;

#[test]
fn fidget_profiles_example_runs() {
    fidget_profiles::run_example().expect("fidget_profiles example should run");
}

#[path = "../examples/carson_bandwidth.rs"]
mod carson_bandwidth;

#[test]
fn carson_bandwidth_example_runs() {
    carson_bandwidth::run_example().expect("carson_bandwidth example should run");
}

#[path = "../examples/rf_extraction.rs"]
mod rf_extraction;

#[test]
fn rf_extraction_example_runs() {
    rf_extraction::run_example().expect("rf_extraction example should run");
}

#[path = "../examples/crowd_priors.rs"]
mod crowd_priors;

#[test]
fn crowd_priors_example_runs() {
    crowd_priors::run_example().expect("crowd_priors example should run");
}

#[path = "../examples/count_estimate.rs"]
mod count_estimate;

#[test]
fn count_estimate_example_runs() {
    count_estimate::run_example().expect("count_estimate example should run");
}

#[path = "../examples/distance_metrics.rs"]
mod distance_metrics;

#[test]
fn distance_metrics_example_runs() {
    distance_metrics::run_example().expect("distance_metrics example should run");
}

#[path = "../examples/anomaly_masking.rs"]
mod anomaly_masking;

#[test]
fn anomaly_masking_example_runs() {
    anomaly_masking::run_example().expect("anomaly_masking example should run");
}

#[path = "../examples/cross_validation.rs"]
mod cross_validation;

#[test]
fn cross_validation_example_runs() {
    cross_validation::run_example().expect("cross_validation example should run");
}

#[path = "../examples/end_to_end.rs"]
mod end_to_end;

#[test]
fn end_to_end_example_runs() {
    end_to_end::run_example().expect("end_to_end example should run");
}
