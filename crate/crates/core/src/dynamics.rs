//! Two-link underactuated pendulum in manipulator form,
//!
//!   M(q)·q̈ + C(q,q̇)·q̇ + G(q) + F(q̇) = τ,
//!
//! with joint angles q = (θ1, θ2): θ1 measured from the hanging-down
//! vertical, θ2 relative to the first link. Either the shoulder (pendubot)
//! or the elbow (acrobot) is actuated, never both. Integration is classic
//! fixed-step RK4 with zero-order-hold torque.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Fixed plant frequency (Hz). Controllers may run slower, the plant never does.
pub const PLANT_HZ: u32 = 500;
/// Fixed plant integration step (s).
pub const PLANT_DT: f64 = 1.0 / PLANT_HZ as f64;
/// Width of the tanh smoothing of Coulomb friction (rad/s).
pub const COULOMB_OMEGA_EPS: f64 = 1e-2;

/// Which joint receives the motor torque.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActuationSetting {
    /// Torque on the elbow (joint 2).
    Acrobot,
    /// Torque on the shoulder (joint 1).
    Pendubot,
}

/// Joint-space state. Angles are unbounded (winding is meaningful to the
/// energy bookkeeping); use [`State::normalized`] where a principal value
/// in (-pi, pi] is wanted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub theta1: f64,
    pub theta2: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl State {
    pub fn new(theta1: f64, theta2: f64, omega1: f64, omega2: f64) -> Self {
        Self {
            theta1,
            theta2,
            omega1,
            omega2,
        }
    }

    /// Hanging rest: both links straight down, no motion.
    pub fn hanging() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    /// Upright rest: both links straight up, no motion.
    pub fn upright() -> Self {
        Self::new(std::f64::consts::PI, 0.0, 0.0, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.theta1.is_finite()
            && self.theta2.is_finite()
            && self.omega1.is_finite()
            && self.omega2.is_finite()
    }

    /// Same configuration with both angles wrapped into (-pi, pi].
    pub fn normalized(&self) -> Self {
        Self {
            theta1: wrap_angle(self.theta1),
            theta2: wrap_angle(self.theta2),
            omega1: self.omega1,
            omega2: self.omega2,
        }
    }
}

/// Wraps an angle into the principal interval (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// Physical plant parameters. Inertias are about the link's own joint, so
/// the parallel-axis bound `i >= m * r^2` must hold; together with positive
/// masses and lengths it keeps the mass matrix positive definite everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Link masses (kg).
    pub m1: f64,
    pub m2: f64,
    /// Link lengths (m).
    pub l1: f64,
    pub l2: f64,
    /// Distances from each joint to the link's centre of mass (m).
    pub r1: f64,
    pub r2: f64,
    /// Link inertias about their own joints (kg m^2).
    pub i1: f64,
    pub i2: f64,
    /// Viscous joint damping (N m s/rad).
    pub b1: f64,
    pub b2: f64,
    /// Coulomb friction magnitudes (N m), smoothed by tanh(omega / 1e-2).
    pub cf1: f64,
    pub cf2: f64,
    /// Gravity (m/s^2).
    pub g: f64,
    /// Motor torque limit (N m); normalized actions map onto [-tau_max, tau_max].
    pub tau_max: f64,
    /// Which joint the motor drives.
    #[serde(skip, default = "default_setting")]
    pub setting: ActuationSetting,
}

fn default_setting() -> ActuationSetting {
    ActuationSetting::Pendubot
}

impl ModelParams {
    /// Reference plant: two identical uniform-rod links, mild viscous
    /// damping, no Coulomb friction.
    pub fn with_setting(setting: ActuationSetting) -> Self {
        let (m, l) = (0.5, 0.3);
        Self {
            m1: m,
            m2: m,
            l1: l,
            l2: l,
            r1: l / 2.0,
            r2: l / 2.0,
            i1: m * l * l / 3.0,
            i2: m * l * l / 3.0,
            b1: 0.01,
            b2: 0.01,
            cf1: 0.0,
            cf2: 0.0,
            g: 9.81,
            tau_max: 3.0,
            setting,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("m1", self.m1),
            ("m2", self.m2),
            ("l1", self.l1),
            ("l2", self.l2),
            ("r1", self.r1),
            ("r2", self.r2),
            ("i1", self.i1),
            ("i2", self.i2),
            ("b1", self.b1),
            ("b2", self.b2),
            ("cf1", self.cf1),
            ("cf2", self.cf2),
            ("g", self.g),
            ("tau_max", self.tau_max),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::Config(format!("model.{name} must be finite")));
            }
        }
        for (name, v) in [
            ("m1", self.m1),
            ("m2", self.m2),
            ("l1", self.l1),
            ("l2", self.l2),
            ("r1", self.r1),
            ("r2", self.r2),
            ("g", self.g),
            ("tau_max", self.tau_max),
        ] {
            if v <= 0.0 {
                return Err(Error::Config(format!("model.{name} must be positive")));
            }
        }
        for (name, v) in [
            ("b1", self.b1),
            ("b2", self.b2),
            ("cf1", self.cf1),
            ("cf2", self.cf2),
        ] {
            if v < 0.0 {
                return Err(Error::Config(format!("model.{name} must be non-negative")));
            }
        }
        if self.r1 > self.l1 || self.r2 > self.l2 {
            return Err(Error::Config(
                "model: centre of mass must lie on the link (r <= l)".into(),
            ));
        }
        if self.i1 < self.m1 * self.r1 * self.r1 || self.i2 < self.m2 * self.r2 * self.r2 {
            return Err(Error::Config(
                "model: joint inertia below parallel-axis bound (i >= m * r^2)".into(),
            ));
        }
        Ok(())
    }

    /// Returns a copy with one named parameter scaled by `factor`.
    pub fn scaled(&self, field: ModelParamField, factor: f64) -> Self {
        let mut p = *self;
        match field {
            ModelParamField::M1 => p.m1 *= factor,
            ModelParamField::M2 => p.m2 *= factor,
            ModelParamField::L1 => p.l1 *= factor,
            ModelParamField::L2 => p.l2 *= factor,
            ModelParamField::R1 => p.r1 *= factor,
            ModelParamField::R2 => p.r2 *= factor,
            ModelParamField::I1 => p.i1 *= factor,
            ModelParamField::I2 => p.i2 *= factor,
            ModelParamField::B1 => p.b1 *= factor,
            ModelParamField::B2 => p.b2 *= factor,
            ModelParamField::Cf1 => p.cf1 *= factor,
            ModelParamField::Cf2 => p.cf2 *= factor,
            ModelParamField::G => p.g *= factor,
            ModelParamField::TauMax => p.tau_max *= factor,
        }
        p
    }
}

/// Selects a single physical parameter, e.g. for robustness sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelParamField {
    M1,
    M2,
    L1,
    L2,
    R1,
    R2,
    I1,
    I2,
    B1,
    B2,
    Cf1,
    Cf2,
    G,
    TauMax,
}

/// Torque applied at each joint (N m). Exactly one component is nonzero
/// under either actuation setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorquePair {
    pub tau1: f64,
    pub tau2: f64,
}

impl TorquePair {
    pub const ZERO: TorquePair = TorquePair {
        tau1: 0.0,
        tau2: 0.0,
    };
}

/// Maps a normalized action in [-1, 1] onto the actuated joint. Values
/// outside the interval are clamped; non-finite actions are rejected.
pub fn apply_actuation(action: f64, params: &ModelParams) -> Result<TorquePair> {
    if !action.is_finite() {
        return Err(Error::InvalidAction(action));
    }
    let tau = action.clamp(-1.0, 1.0) * params.tau_max;
    Ok(match params.setting {
        ActuationSetting::Acrobot => TorquePair {
            tau1: 0.0,
            tau2: tau,
        },
        ActuationSetting::Pendubot => TorquePair {
            tau1: tau,
            tau2: 0.0,
        },
    })
}

/// Mass matrix M(q), symmetric positive definite for valid parameters.
pub fn mass_matrix(s: &State, p: &ModelParams) -> [[f64; 2]; 2] {
    let c2 = s.theta2.cos();
    let k = p.m2 * p.l1 * p.r2 * c2;
    let m11 = p.i1 + p.i2 + p.m2 * p.l1 * p.l1 + 2.0 * k;
    let m12 = p.i2 + k;
    [[m11, m12], [m12, p.i2]]
}

/// Coriolis/centrifugal generalized forces C(q,q̇)·q̇.
pub fn coriolis_forces(s: &State, p: &ModelParams) -> [f64; 2] {
    let h = p.m2 * p.l1 * p.r2 * s.theta2.sin();
    [
        -h * s.omega2 * (2.0 * s.omega1 + s.omega2),
        h * s.omega1 * s.omega1,
    ]
}

/// Gravity generalized forces G(q).
pub fn gravity_forces(s: &State, p: &ModelParams) -> [f64; 2] {
    let g2 = p.g * p.m2 * p.r2 * (s.theta1 + s.theta2).sin();
    [
        p.g * (p.m1 * p.r1 + p.m2 * p.l1) * s.theta1.sin() + g2,
        g2,
    ]
}

/// Joint friction F(q̇): viscous plus tanh-smoothed Coulomb. The smoothing
/// keeps the vector field C^1 so fixed-step RK4 retains its order.
pub fn friction_forces(s: &State, p: &ModelParams) -> [f64; 2] {
    [
        p.b1 * s.omega1 + p.cf1 * (s.omega1 / COULOMB_OMEGA_EPS).tanh(),
        p.b2 * s.omega2 + p.cf2 * (s.omega2 / COULOMB_OMEGA_EPS).tanh(),
    ]
}

/// Joint accelerations from the manipulator equation.
pub fn forward_dynamics(s: &State, tau: &TorquePair, p: &ModelParams) -> [f64; 2] {
    let m = mass_matrix(s, p);
    let c = coriolis_forces(s, p);
    let g = gravity_forces(s, p);
    let f = friction_forces(s, p);
    let rhs = [tau.tau1 - c[0] - g[0] - f[0], tau.tau2 - c[1] - g[1] - f[1]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det,
        (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
    ]
}

fn derivative(s: &State, tau: &TorquePair, p: &ModelParams) -> [f64; 4] {
    let acc = forward_dynamics(s, tau, p);
    [s.omega1, s.omega2, acc[0], acc[1]]
}

fn offset(s: &State, k: &[f64; 4], h: f64) -> State {
    State::new(
        s.theta1 + h * k[0],
        s.theta2 + h * k[1],
        s.omega1 + h * k[2],
        s.omega2 + h * k[3],
    )
}

/// One RK4 step of length `dt` under constant joint torque (zero-order hold).
/// `dt = 0` returns the state unchanged.
pub fn step_torque(s: &State, tau: &TorquePair, dt: f64, p: &ModelParams) -> State {
    assert!(dt >= 0.0, "dt must be non-negative");
    if dt == 0.0 {
        return *s;
    }
    let k1 = derivative(s, tau, p);
    let k2 = derivative(&offset(s, &k1, dt / 2.0), tau, p);
    let k3 = derivative(&offset(s, &k2, dt / 2.0), tau, p);
    let k4 = derivative(&offset(s, &k3, dt), tau, p);
    let w = dt / 6.0;
    State::new(
        s.theta1 + w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        s.theta2 + w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        s.omega1 + w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        s.omega2 + w * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
    )
}

/// One RK4 step driven by a normalized action (clamped, mapped onto the
/// actuated joint, held constant over the step).
pub fn step(s: &State, action: f64, dt: f64, p: &ModelParams) -> Result<State> {
    let tau = apply_actuation(action, p)?;
    Ok(step_torque(s, &tau, dt, p))
}

/// Kinetic energy T = 1/2 q̇ᵀ M(q) q̇.
pub fn kinetic_energy(s: &State, p: &ModelParams) -> f64 {
    let m = mass_matrix(s, p);
    0.5 * (m[0][0] * s.omega1 * s.omega1
        + 2.0 * m[0][1] * s.omega1 * s.omega2
        + m[1][1] * s.omega2 * s.omega2)
}

/// Potential energy, zero at the hanging configuration.
pub fn potential_energy(s: &State, p: &ModelParams) -> f64 {
    p.g * (p.m1 * p.r1 + p.m2 * p.l1) * (1.0 - s.theta1.cos())
        + p.g * p.m2 * p.r2 * (1.0 - (s.theta1 + s.theta2).cos())
}

/// Total mechanical energy T + V.
pub fn total_energy(s: &State, p: &ModelParams) -> f64 {
    kinetic_energy(s, p) + potential_energy(s, p)
}

/// Height of the end effector above the shoulder pivot (m), in
/// [-(l1 + l2), l1 + l2].
pub fn end_effector_height(s: &State, p: &ModelParams) -> f64 {
    -p.l1 * s.theta1.cos() - p.l2 * (s.theta1 + s.theta2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn pendubot() -> ModelParams {
        ModelParams::with_setting(ActuationSetting::Pendubot)
    }

    fn acrobot() -> ModelParams {
        ModelParams::with_setting(ActuationSetting::Acrobot)
    }

    fn frictionless(mut p: ModelParams) -> ModelParams {
        p.b1 = 0.0;
        p.b2 = 0.0;
        p.cf1 = 0.0;
        p.cf2 = 0.0;
        p
    }

    fn random_state(rng: &mut ChaCha12Rng) -> State {
        State::new(
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(-20.0..20.0),
            rng.random_range(-20.0..20.0),
        )
    }

    #[test]
    fn default_params_are_valid() {
        pendubot().validate().unwrap();
        acrobot().validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let mut p = pendubot();
        p.m2 = -0.1;
        assert!(p.validate().is_err());
        let mut p = pendubot();
        p.i1 = 0.5 * p.m1 * p.r1 * p.r1;
        assert!(p.validate().is_err());
        let mut p = pendubot();
        p.r1 = p.l1 * 1.5;
        assert!(p.validate().is_err());
        let mut p = pendubot();
        p.g = f64::NAN;
        assert!(p.validate().is_err());
    }

    #[test]
    fn actuation_routes_torque_to_the_right_joint() {
        let tau = apply_actuation(0.5, &acrobot()).unwrap();
        assert_eq!(tau.tau1, 0.0);
        assert_eq!(tau.tau2, 1.5);

        let tau = apply_actuation(-1.0, &pendubot()).unwrap();
        assert_eq!(tau.tau1, -3.0);
        assert_eq!(tau.tau2, 0.0);
    }

    #[test]
    fn actuation_clamps_out_of_range_actions() {
        let p = pendubot();
        let tau = apply_actuation(2.0, &p).unwrap();
        assert_eq!(tau.tau1, p.tau_max);
        let tau = apply_actuation(-7.5, &p).unwrap();
        assert_eq!(tau.tau1, -p.tau_max);
    }

    #[test]
    fn actuation_rejects_non_finite_actions() {
        assert!(matches!(
            apply_actuation(f64::NAN, &pendubot()),
            Err(Error::InvalidAction(_))
        ));
        assert!(apply_actuation(f64::INFINITY, &pendubot()).is_err());
    }

    #[test]
    fn hanging_rest_is_a_fixed_point() {
        let p = pendubot();
        let acc = forward_dynamics(&State::hanging(), &TorquePair::ZERO, &p);
        assert_eq!(acc, [0.0, 0.0]);
        let next = step(&State::hanging(), 0.0, PLANT_DT, &p).unwrap();
        assert_eq!(next, State::hanging());
    }

    #[test]
    fn upright_rest_is_a_fixed_point() {
        let p = frictionless(pendubot());
        let acc = forward_dynamics(&State::upright(), &TorquePair::ZERO, &p);
        assert_abs_diff_eq!(acc[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(acc[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_dt_step_is_identity() {
        let p = pendubot();
        let s = State::new(0.3, -0.2, 1.0, -2.0);
        assert_eq!(step(&s, 0.7, 0.0, &p).unwrap(), s);
    }

    #[test]
    fn potential_energy_reference_values() {
        let p = pendubot();
        assert_eq!(potential_energy(&State::hanging(), &p), 0.0);
        let lift = 2.0 * p.g * (p.m1 * p.r1 + p.m2 * (p.l1 + p.r2));
        assert_relative_eq!(
            potential_energy(&State::upright(), &p),
            lift,
            max_relative = 1e-14
        );
        // Velocity independence.
        let v0 = potential_energy(&State::new(1.0, 2.0, 0.0, 0.0), &p);
        let v1 = potential_energy(&State::new(1.0, 2.0, 5.0, -3.0), &p);
        assert_eq!(v0, v1);
    }

    #[test]
    fn kinetic_energy_reference_values() {
        let p = pendubot();
        assert_eq!(kinetic_energy(&State::hanging(), &p), 0.0);
        let s = State::new(0.0, 0.0, 1.0, 0.0);
        let m11 = p.i1 + p.i2 + p.m2 * p.l1 * p.l1 + 2.0 * p.m2 * p.l1 * p.r2;
        assert_relative_eq!(kinetic_energy(&s, &p), 0.5 * m11, max_relative = 1e-14);
    }

    #[test]
    fn end_effector_height_reference_values() {
        let p = pendubot();
        let span = p.l1 + p.l2;
        assert_relative_eq!(
            end_effector_height(&State::hanging(), &p),
            -span,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            end_effector_height(&State::upright(), &p),
            span,
            max_relative = 1e-12
        );
        let folded = State::new(std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2, 0.0, 0.0);
        assert_relative_eq!(
            end_effector_height(&folded, &p),
            -p.l2,
            max_relative = 1e-12
        );
    }

    #[test]
    fn mass_matrix_is_symmetric_positive_definite() {
        let p = pendubot();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let s = random_state(&mut rng);
            let m = mass_matrix(&s, &p);
            assert_eq!(m[0][1], m[1][0]);
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            assert!(m[0][0] > 0.0 && det > 0.0, "not SPD at {s:?}: {m:?}");
        }
    }

    #[test]
    fn kinetic_energy_is_positive_and_quadratic() {
        let p = pendubot();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..200 {
            let s = random_state(&mut rng);
            if s.omega1 == 0.0 && s.omega2 == 0.0 {
                continue;
            }
            let t = kinetic_energy(&s, &p);
            assert!(t > 0.0);
            let doubled = State::new(s.theta1, s.theta2, 2.0 * s.omega1, 2.0 * s.omega2);
            assert_relative_eq!(kinetic_energy(&doubled, &p), 4.0 * t, max_relative = 1e-12);
        }
    }

    #[test]
    fn unforced_damped_motion_dissipates_energy() {
        let p = pendubot();
        let mut s = State::new(2.0, 0.5, 0.0, 0.0);
        let mut prev = total_energy(&s, &p);
        for _ in 0..2500 {
            s = step_torque(&s, &TorquePair::ZERO, PLANT_DT, &p);
            let e = total_energy(&s, &p);
            assert!(
                e <= prev + 1e-9,
                "energy increased from {prev} to {e} under damping"
            );
            prev = e;
        }
    }

    #[test]
    fn frictionless_energy_drift_stays_small() {
        let p = frictionless(pendubot());
        let mut s = State::new(0.1, 0.0, 0.0, 0.0);
        let e0 = total_energy(&s, &p);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            s = step_torque(&s, &TorquePair::ZERO, PLANT_DT, &p);
            worst = worst.max((total_energy(&s, &p) - e0).abs() / e0.abs().max(1.0));
        }
        assert!(worst < 1e-8, "relative drift {worst}");
    }

    #[test]
    fn trajectories_are_bitwise_reproducible() {
        let p = acrobot();
        let roll = || {
            let mut s = State::new(0.2, -0.1, 0.0, 0.0);
            for k in 0..500 {
                let a = (k as f64 * 0.01).sin();
                s = step(&s, a, PLANT_DT, &p).unwrap();
            }
            s
        };
        let (a, b) = (roll(), roll());
        assert_eq!(a.theta1.to_bits(), b.theta1.to_bits());
        assert_eq!(a.theta2.to_bits(), b.theta2.to_bits());
        assert_eq!(a.omega1.to_bits(), b.omega1.to_bits());
        assert_eq!(a.omega2.to_bits(), b.omega2.to_bits());
    }

    proptest! {
        #[test]
        fn wrap_angle_lands_in_principal_interval(a in -1e6f64..1e6) {
            let w = wrap_angle(a);
            prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
            // Wrapped angle represents the same direction.
            prop_assert!((w.sin() - a.sin()).abs() < 1e-6);
            prop_assert!((w.cos() - a.cos()).abs() < 1e-6);
        }

        #[test]
        fn height_stays_within_reach(t1 in -10.0f64..10.0, t2 in -10.0f64..10.0) {
            let p = pendubot();
            let y = end_effector_height(&State::new(t1, t2, 0.0, 0.0), &p);
            prop_assert!(y.abs() <= p.l1 + p.l2 + 1e-12);
        }
    }

    #[test]
    fn wrap_angle_boundary_cases() {
        let pi = std::f64::consts::PI;
        assert_eq!(wrap_angle(pi), pi);
        assert_eq!(wrap_angle(-pi), pi);
        assert_relative_eq!(wrap_angle(3.0 * pi), pi, max_relative = 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
    }

    #[test]
    fn scaled_touches_only_the_named_field() {
        let p = pendubot();
        let q = p.scaled(ModelParamField::M2, 1.1);
        assert_relative_eq!(q.m2, p.m2 * 1.1, max_relative = 1e-15);
        assert_eq!(q.m1, p.m1);
        assert_eq!(q.l1, p.l1);
        assert_eq!(q.tau_max, p.tau_max);
    }
}
