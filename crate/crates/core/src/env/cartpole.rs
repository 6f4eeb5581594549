use serde::Serialize;

/// Pole-on-a-cart with viscous rail friction. The pole hangs at angle 0;
/// upright is pi. The paper's perturbation rows ("M+.2", "l+0.2") anchor
/// to these baselines.
#[derive(Clone, Debug, Serialize)]
pub struct CartpoleParams {
    /// Cart mass M [kg].
    pub cart_mass: f64,
    /// Point mass at the pole tip [kg].
    pub pole_mass: f64,
    /// Pole length l [m].
    pub pole_length: f64,
    /// Viscous friction coefficient b opposing cart motion [N·s/m].
    pub rail_friction: f64,
    /// Additive control-noise stddev sigma [N].
    pub control_noise: f64,
    /// Actuator range: force in [-force_limit, force_limit] [N].
    pub force_limit: f64,
    /// Integration step [s].
    pub dt: f64,
    /// Gravity [m/s^2].
    pub gravity: f64,
}

impl Default for CartpoleParams {
    fn default() -> Self {
        CartpoleParams {
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_length: 0.5,
            rail_friction: 0.1,
            control_noise: 0.1,
            force_limit: 10.0,
            dt: 0.05,
            gravity: 9.81,
        }
    }
}

/// Drift of [x, xdot, theta, thetadot] under force `u[0]`.
///
/// Lagrangian dynamics of a massless rod with a tip mass, theta measured
/// from the hanging position:
///   xddot = (F - b*xdot + m*sin(theta)*(l*thetadot^2 + g*cos(theta)))
///           / (M + m*sin^2(theta))
///   thetaddot = -(xddot*cos(theta) + g*sin(theta)) / l
pub(super) fn derivatives(p: &CartpoleParams, state: &[f64], control: &[f64]) -> [f64; 4] {
    let (x_dot, theta, theta_dot) = (state[1], state[2], state[3]);
    let force = control[0];
    let (s, c) = theta.sin_cos();
    let m = p.pole_mass;
    let denom = p.cart_mass + m * s * s;
    let x_dd = (force - p.rail_friction * x_dot
        + m * s * (p.pole_length * theta_dot * theta_dot + p.gravity * c))
        / denom;
    let theta_dd = -(x_dd * c + p.gravity * s) / p.pole_length;
    [x_dot, x_dd, theta_dot, theta_dd]
}

/// Total mechanical energy; conserved when friction and force are zero.
pub fn cartpole_energy(p: &CartpoleParams, state: &[f64]) -> f64 {
    let (x_dot, theta, theta_dot) = (state[1], state[2], state[3]);
    let m = p.pole_mass;
    let l = p.pole_length;
    let kinetic = 0.5 * (p.cart_mass + m) * x_dot * x_dot
        + m * l * theta_dot * x_dot * theta.cos()
        + 0.5 * m * l * l * theta_dot * theta_dot;
    let potential = -m * p.gravity * l * theta.cos();
    kinetic + potential
}
