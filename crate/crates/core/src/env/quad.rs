use serde::Serialize;

/// Roll/pitch magnitude that ends a trajectory: just inside the Euler
/// kinematics singularity at pi/2.
pub(super) const ATTITUDE_LIMIT: f64 = 1.48;

/// 12-state rigid-body quadcopter with Euler-angle kinematics and four
/// rotor thrust inputs on a "+" frame (rotors on the +x, +y, -x, -y arms).
///
/// State layout: position [3], velocity [3], (roll, pitch, yaw), body
/// rates [3]. World z points up.
#[derive(Clone, Debug, Serialize)]
pub struct QuadParams {
    /// Vehicle mass m [kg].
    pub mass: f64,
    /// Rotor arm length l [m].
    pub arm_length: f64,
    /// Diagonal body inertia [kg·m^2].
    pub inertia: [f64; 3],
    /// Gravity [m/s^2].
    pub gravity: f64,
    /// Control-to-thrust gain [N per control unit].
    pub thrust_coeff: f64,
    /// Yaw torque per newton of rotor thrust [m].
    pub torque_coeff: f64,
    /// Additive control-noise stddev sigma [control units].
    pub control_noise: f64,
    /// Per-rotor control range [0, thrust_limit].
    pub thrust_limit: f64,
    /// Uniform position perturbation applied to sampled initial states [m].
    pub init_pos_spread: f64,
    /// Integration step [s].
    pub dt: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        QuadParams {
            mass: 0.7,
            arm_length: 0.35,
            inertia: [0.004, 0.004, 0.008],
            gravity: 9.81,
            thrust_coeff: 1.0,
            torque_coeff: 0.016,
            control_noise: 0.1,
            thrust_limit: 6.0,
            init_pos_spread: 0.0,
            dt: 0.02,
        }
    }
}

pub(super) fn derivatives(p: &QuadParams, state: &[f64], control: &[f64]) -> [f64; 12] {
    let v = &state[3..6];
    let (roll, pitch, yaw) = (state[6], state[7], state[8]);
    let w = &state[9..12];

    let f: Vec<f64> = control.iter().map(|c| c * p.thrust_coeff).collect();
    let total_thrust: f64 = f.iter().sum();

    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();

    // Body z axis in world coordinates (ZYX Euler convention).
    let zb = [cr * sp * cy + sr * sy, cr * sp * sy - sr * cy, cr * cp];
    let accel = [
        zb[0] * total_thrust / p.mass,
        zb[1] * total_thrust / p.mass,
        zb[2] * total_thrust / p.mass - p.gravity,
    ];

    // Euler-angle kinematics.
    let tp = sp / cp;
    let euler_rates = [
        w[0] + sr * tp * w[1] + cr * tp * w[2],
        cr * w[1] - sr * w[2],
        (sr * w[1] + cr * w[2]) / cp,
    ];

    // Body torques from the rotor layout: roll from the +/-y pair, pitch
    // from the +/-x pair, yaw from alternating rotor drag.
    let torque = [
        p.arm_length * (f[1] - f[3]),
        p.arm_length * (f[2] - f[0]),
        p.torque_coeff * (f[0] - f[1] + f[2] - f[3]),
    ];
    let [jx, jy, jz] = p.inertia;
    let w_dot = [
        (torque[0] - (jz - jy) * w[1] * w[2]) / jx,
        (torque[1] - (jx - jz) * w[2] * w[0]) / jy,
        (torque[2] - (jy - jx) * w[0] * w[1]) / jz,
    ];

    [
        v[0],
        v[1],
        v[2],
        accel[0],
        accel[1],
        accel[2],
        euler_rates[0],
        euler_rates[1],
        euler_rates[2],
        w_dot[0],
        w_dot[1],
        w_dot[2],
    ]
}
