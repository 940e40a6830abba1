use nalgebra::DVector;

use sampled_cbf::dynamics::{step_rk4, ControlAffine, OmniRobot};
use sampled_cbf::scenarios::{load_scenario, run_scenario, RunOptions};
use sampled_cbf::tracking::{
    pid_control, tracking_diagnostic, AxisGain, ErrorSample, PidGains, PidMemory,
};

#[test]
fn pd_error_decreases_monotonically_after_transient() {
    let robot = OmniRobot::default();
    let gains = PidGains {
        kp: AxisGain::Uniform(0.5),
        ki: AxisGain::Uniform(0.0),
        kd: AxisGain::Uniform(0.1),
        integral_clamp: 10.0,
    };
    let goal = DVector::from_vec(vec![3.0, -2.0, 0.5]);
    let mut x = DVector::from_vec(vec![0.0, 0.0, 0.0]);
    let mut mem = PidMemory::default();
    let dt = 0.01;
    let zero = DVector::zeros(robot.state_dim());
    let mut prev = f64::INFINITY;
    let mut samples = Vec::new();
    for k in 0..3000 {
        let t = k as f64 * dt;
        let e = (&goal - &x).norm();
        samples.push(ErrorSample {
            t,
            error_norm: e,
            modified: false,
        });
        if t >= 5.0 {
            assert!(e < prev, "t={t}: {e} >= {prev}");
        }
        prev = e;
        let (u, m) = pid_control(&gains, &robot, &x, &goal, dt, &mem).unwrap();
        mem = m;
        x = step_rk4(&robot, &x, &u, &zero, dt).unwrap();
    }
    let report = tracking_diagnostic(&samples).unwrap();
    assert!(report.accepted);
    assert!(
        report.lambda > 0.3 && report.lambda < 0.7,
        "lambda {}",
        report.lambda
    );
}

#[test]
fn open_field_converges_without_filter_action() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/open_field.json");
    let log = run_scenario(&load_scenario(path).unwrap(), RunOptions::default()).unwrap();
    assert_eq!(log.summary.modified_steps, 0);
    assert_eq!(log.summary.infeasible_steps, 0);
    assert!(
        log.summary.final_tracking_error < 1e-2,
        "{}",
        log.summary.final_tracking_error
    );
}
