//! Fixed-step classical Runge-Kutta integration for scalar ODEs.

/// One RK4 step of `dy/dt = f(t, y)` from `(t, y)` with step `h`.
pub fn rk4_step<F>(f: F, t: f64, y: f64, h: f64) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    let k4 = f(t + h, y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integrate over `duration` with steps of at most `dt`; the final step is
/// shortened so the horizon is hit exactly. `after_step` may post-process
/// the state (e.g. clamp) after every step.
pub fn integrate<F, G>(f: F, mut y: f64, duration: f64, dt: f64, after_step: G) -> f64
where
    F: Fn(f64, f64) -> f64,
    G: Fn(f64) -> f64,
{
    if duration <= 0.0 {
        return y;
    }
    let full = (duration / dt).floor() as u64;
    for i in 0..full {
        y = after_step(rk4_step(&f, i as f64 * dt, y, dt));
    }
    let done = full as f64 * dt;
    let rest = duration - done;
    if rest > dt * 1e-9 {
        y = after_step(rk4_step(&f, done, y, rest));
    }
    y
}
