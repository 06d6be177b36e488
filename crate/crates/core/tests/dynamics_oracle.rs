//! Checks the closed-form plant against an Euler-Lagrange oracle that
//! rederives everything from link kinematics and numeric differentiation.
//! The oracle never touches the manipulator-form expressions: kinetic and
//! potential energy come straight from centre-of-mass motion, the mass
//! matrix from the quadratic form of the kinetic energy, and the bias
//! forces from Richardson-extrapolated central differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use swingup_core::dynamics::{
    self, ActuationSetting, ModelParams, State, TorquePair, COULOMB_OMEGA_EPS, PLANT_DT,
};

/// Kinetic energy of a planar two-link chain with absolute link angles
/// th1 and th1 + th2 measured from the hanging vertical. Inertias are
/// given about each link's proximal joint, so the centre-of-mass inertia
/// is i - m r^2.
fn kinetic(q: [f64; 2], w: [f64; 2], p: &ModelParams) -> f64 {
    let (t1, t12) = (q[0], q[0] + q[1]);
    let w1 = w[0];
    let w12 = w[0] + w[1];
    let v1x = p.r1 * w1 * t1.cos();
    let v1y = p.r1 * w1 * t1.sin();
    let v2x = p.l1 * w1 * t1.cos() + p.r2 * w12 * t12.cos();
    let v2y = p.l1 * w1 * t1.sin() + p.r2 * w12 * t12.sin();
    let i1c = p.i1 - p.m1 * p.r1 * p.r1;
    let i2c = p.i2 - p.m2 * p.r2 * p.r2;
    0.5 * p.m1 * (v1x * v1x + v1y * v1y)
        + 0.5 * i1c * w1 * w1
        + 0.5 * p.m2 * (v2x * v2x + v2y * v2y)
        + 0.5 * i2c * w12 * w12
}

/// Potential energy from the centre-of-mass heights, zero when hanging.
fn potential(q: [f64; 2], p: &ModelParams) -> f64 {
    let lift1 = p.r1 * (1.0 - q[0].cos());
    let lift2 = p.l1 * (1.0 - q[0].cos()) + p.r2 * (1.0 - (q[0] + q[1]).cos());
    p.g * (p.m1 * lift1 + p.m2 * lift2)
}

/// Sixth-order derivative at 0: two Richardson levels over central
/// differences with base step h.
fn derivative(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let central = |h: f64| (f(h) - f(-h)) / (2.0 * h);
    let d1 = central(h);
    let d2 = central(h / 2.0);
    let d3 = central(h / 4.0);
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d3 - d2) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

const FD_STEP: f64 = 1e-2;

/// Mass matrix recovered exactly from T = 1/2 w' M w by evaluating the
/// kinetic energy at unit velocities; no differentiation involved.
fn oracle_mass_matrix(q: [f64; 2], p: &ModelParams) -> [[f64; 2]; 2] {
    let m11 = 2.0 * kinetic(q, [1.0, 0.0], p);
    let m22 = 2.0 * kinetic(q, [0.0, 1.0], p);
    let m12 = kinetic(q, [1.0, 1.0], p) - 0.5 * m11 - 0.5 * m22;
    [[m11, m12], [m12, m22]]
}

/// (dM/dt) w, computed as a directional derivative of M w along the unit
/// velocity direction and rescaled by the speed. Zero velocity short-
/// circuits to zero.
fn oracle_mdot_w(q: [f64; 2], w: [f64; 2], p: &ModelParams) -> [f64; 2] {
    let speed = (w[0] * w[0] + w[1] * w[1]).sqrt();
    if speed == 0.0 {
        return [0.0, 0.0];
    }
    let u = [w[0] / speed, w[1] / speed];
    let mut out = [0.0, 0.0];
    for (i, o) in out.iter_mut().enumerate() {
        let f = |a: f64| {
            let qa = [q[0] + a * u[0], q[1] + a * u[1]];
            let ma = oracle_mass_matrix(qa, p);
            ma[i][0] * w[0] + ma[i][1] * w[1]
        };
        *o = speed * derivative(f, FD_STEP);
    }
    out
}

fn oracle_grad_q(f: impl Fn([f64; 2]) -> f64, q: [f64; 2]) -> [f64; 2] {
    let mut out = [0.0, 0.0];
    for (i, o) in out.iter_mut().enumerate() {
        let fq = |a: f64| {
            let mut qa = q;
            qa[i] += a;
            f(qa)
        };
        *o = derivative(fq, FD_STEP);
    }
    out
}

/// Joint accelerations from the Euler-Lagrange equations,
/// M qdd = Q - (dM/dt) w + dT/dq - dV/dq, with the same viscous plus
/// tanh-smoothed Coulomb friction entering as a generalized force.
fn oracle_accel(s: &State, tau: &TorquePair, p: &ModelParams) -> [f64; 2] {
    let q = [s.theta1, s.theta2];
    let w = [s.omega1, s.omega2];
    let m = oracle_mass_matrix(q, p);
    let mdot_w = oracle_mdot_w(q, w, p);
    let dt_dq = oracle_grad_q(|qa| kinetic(qa, w, p), q);
    let dv_dq = oracle_grad_q(|qa| potential(qa, p), q);
    let fric = [
        p.b1 * w[0] + p.cf1 * (w[0] / COULOMB_OMEGA_EPS).tanh(),
        p.b2 * w[1] + p.cf2 * (w[1] / COULOMB_OMEGA_EPS).tanh(),
    ];
    let rhs = [
        tau.tau1 - fric[0] - mdot_w[0] + dt_dq[0] - dv_dq[0],
        tau.tau2 - fric[1] - mdot_w[1] + dt_dq[1] - dv_dq[1],
    ];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det,
        (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
    ]
}

/// One RK4 step on the oracle vector field; independent of the plant's
/// integrator code.
fn oracle_rk4(s: &State, tau: &TorquePair, dt: f64, p: &ModelParams) -> State {
    let deriv = |s: &State| {
        let a = oracle_accel(s, tau, p);
        [s.omega1, s.omega2, a[0], a[1]]
    };
    let shift = |s: &State, k: &[f64; 4], h: f64| {
        State::new(
            s.theta1 + h * k[0],
            s.theta2 + h * k[1],
            s.omega1 + h * k[2],
            s.omega2 + h * k[3],
        )
    };
    let k1 = deriv(s);
    let k2 = deriv(&shift(s, &k1, dt / 2.0));
    let k3 = deriv(&shift(s, &k2, dt / 2.0));
    let k4 = deriv(&shift(s, &k3, dt));
    let w = dt / 6.0;
    State::new(
        s.theta1 + w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        s.theta2 + w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        s.omega1 + w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        s.omega2 + w * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
    )
}

/// Reference plant in both actuation settings plus an asymmetric variant
/// with Coulomb friction, so every term in the equations gets exercised.
fn plant_variants() -> Vec<ModelParams> {
    let mut odd = ModelParams::with_setting(ActuationSetting::Acrobot);
    odd.m1 = 0.8;
    odd.m2 = 0.3;
    odd.l1 = 0.4;
    odd.l2 = 0.25;
    odd.r1 = 0.22;
    odd.r2 = 0.1;
    odd.i1 = odd.m1 * odd.l1 * odd.l1 / 3.0;
    odd.i2 = odd.m2 * odd.l2 * odd.l2 / 3.0;
    odd.b1 = 0.05;
    odd.b2 = 0.02;
    odd.cf1 = 0.03;
    odd.cf2 = 0.01;
    let variants = vec![
        ModelParams::with_setting(ActuationSetting::Pendubot),
        ModelParams::with_setting(ActuationSetting::Acrobot),
        odd,
    ];
    for p in &variants {
        p.validate().unwrap();
    }
    variants
}

fn random_state(rng: &mut impl Rng) -> State {
    State::new(
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        rng.random_range(-10.0..10.0),
        rng.random_range(-10.0..10.0),
    )
}

#[test]
fn energies_match_link_kinematics() {
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    for p in plant_variants() {
        for _ in 0..400 {
            let s = random_state(&mut rng);
            let t_plant = dynamics::kinetic_energy(&s, &p);
            let v_plant = dynamics::potential_energy(&s, &p);
            let t_oracle = kinetic([s.theta1, s.theta2], [s.omega1, s.omega2], &p);
            let v_oracle = potential([s.theta1, s.theta2], &p);
            let scale = t_plant.abs().max(1.0);
            assert!(
                (t_plant - t_oracle).abs() <= 1e-12 * scale,
                "kinetic mismatch at {s:?}: {t_plant} vs {t_oracle}"
            );
            let vscale = v_plant.abs().max(1.0);
            assert!(
                (v_plant - v_oracle).abs() <= 1e-12 * vscale,
                "potential mismatch at {s:?}: {v_plant} vs {v_oracle}"
            );
        }
    }
}

#[test]
fn mass_matrix_is_the_quadratic_form_of_kinetic_energy() {
    let mut rng = ChaCha12Rng::seed_from_u64(12);
    for p in plant_variants() {
        for _ in 0..400 {
            let s = random_state(&mut rng);
            let m = dynamics::mass_matrix(&s, &p);
            let o = oracle_mass_matrix([s.theta1, s.theta2], &p);
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (m[i][j] - o[i][j]).abs() <= 1e-12 * m[i][j].abs().max(1.0),
                        "M[{i}][{j}] mismatch at {s:?}: {} vs {}",
                        m[i][j],
                        o[i][j]
                    );
                }
            }
        }
    }
}

#[test]
fn gravity_is_the_potential_gradient() {
    let mut rng = ChaCha12Rng::seed_from_u64(13);
    let mut worst: f64 = 0.0;
    for p in plant_variants() {
        for _ in 0..400 {
            let s = random_state(&mut rng);
            let g = dynamics::gravity_forces(&s, &p);
            let o = oracle_grad_q(|qa| potential(qa, &p), [s.theta1, s.theta2]);
            for i in 0..2 {
                worst = worst.max((g[i] - o[i]).abs() / g[i].abs().max(1.0));
            }
        }
    }
    assert!(worst < 1e-10, "worst gravity deviation {worst}");
}

#[test]
fn coriolis_matches_mass_matrix_flow_minus_energy_gradient() {
    let mut rng = ChaCha12Rng::seed_from_u64(14);
    let mut worst: f64 = 0.0;
    for p in plant_variants() {
        for _ in 0..400 {
            let s = random_state(&mut rng);
            let c = dynamics::coriolis_forces(&s, &p);
            let q = [s.theta1, s.theta2];
            let w = [s.omega1, s.omega2];
            let mdot_w = oracle_mdot_w(q, w, &p);
            let dt_dq = oracle_grad_q(|qa| kinetic(qa, w, &p), q);
            for i in 0..2 {
                let o = mdot_w[i] - dt_dq[i];
                worst = worst.max((c[i] - o).abs() / c[i].abs().max(1.0));
            }
        }
    }
    assert!(worst < 1e-9, "worst coriolis deviation {worst}");
}

#[test]
fn accelerations_match_the_euler_lagrange_oracle() {
    let mut rng = ChaCha12Rng::seed_from_u64(15);
    let mut worst: f64 = 0.0;
    for p in plant_variants() {
        for _ in 0..600 {
            let s = random_state(&mut rng);
            let tau = TorquePair {
                tau1: rng.random_range(-3.0..3.0),
                tau2: rng.random_range(-3.0..3.0),
            };
            let plant = dynamics::forward_dynamics(&s, &tau, &p);
            let oracle = oracle_accel(&s, &tau, &p);
            for i in 0..2 {
                let dev = (plant[i] - oracle[i]).abs() / plant[i].abs().max(1.0);
                worst = worst.max(dev);
            }
        }
    }
    assert!(worst < 1e-9, "worst acceleration deviation {worst}");
}

#[test]
fn zero_velocity_accelerations_need_no_flow_term() {
    // At rest the Coriolis term vanishes; the oracle takes its zero-speed
    // short-circuit and must still agree.
    let mut rng = ChaCha12Rng::seed_from_u64(16);
    let p = ModelParams::with_setting(ActuationSetting::Pendubot);
    for _ in 0..200 {
        let s = State::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            0.0,
            0.0,
        );
        let tau = TorquePair {
            tau1: rng.random_range(-3.0..3.0),
            tau2: 0.0,
        };
        let plant = dynamics::forward_dynamics(&s, &tau, &p);
        let oracle = oracle_accel(&s, &tau, &p);
        for i in 0..2 {
            assert!(
                (plant[i] - oracle[i]).abs() <= 1e-9 * plant[i].abs().max(1.0),
                "rest acceleration mismatch at {s:?}"
            );
        }
    }
}

#[test]
fn plant_steps_track_an_independent_fine_reference() {
    // Free small-amplitude swing of the frictionless plant: integrate 10 s
    // with the plant's own coarse step and with the oracle field at a tenth
    // of the step, then compare final states.
    let mut p = ModelParams::with_setting(ActuationSetting::Pendubot);
    p.b1 = 0.0;
    p.b2 = 0.0;
    let start = State::new(0.1, 0.0, 0.0, 0.0);
    let seconds = 10.0;

    let coarse_steps = (seconds / PLANT_DT).round() as usize;
    let e0 = dynamics::total_energy(&start, &p);
    let mut coarse = start;
    let mut max_drift: f64 = 0.0;
    for _ in 0..coarse_steps {
        coarse = dynamics::step_torque(&coarse, &TorquePair::ZERO, PLANT_DT, &p);
        let drift = (dynamics::total_energy(&coarse, &p) - e0).abs() / e0.abs();
        max_drift = max_drift.max(drift);
    }
    assert!(max_drift < 1e-8, "energy drift {max_drift}");

    let fine_dt = PLANT_DT / 10.0;
    let mut fine = start;
    for _ in 0..coarse_steps * 10 {
        fine = oracle_rk4(&fine, &TorquePair::ZERO, fine_dt, &p);
    }
    for (name, a, b) in [
        ("theta1", coarse.theta1, fine.theta1),
        ("theta2", coarse.theta2, fine.theta2),
        ("omega1", coarse.omega1, fine.omega1),
        ("omega2", coarse.omega2, fine.omega2),
    ] {
        assert!(
            (a - b).abs() < 1e-6,
            "{name} diverged from the fine reference: {a} vs {b}"
        );
    }
}
