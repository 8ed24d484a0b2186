//! Embedded Dormand-Prince 5(4) integrator with an optional manifold
//! projection applied after every accepted step.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { rtol: 1e-10, atol: 1e-12, h_init: 1e-3, h_max: 0.5, max_steps: 200_000 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &[f64], terms: &[(f64, &[f64])], h: f64) -> Vec<f64> {
    let mut out = y.to_vec();
    for (a, k) in terms {
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += h * a * v;
        }
    }
    out
}

/// Integrate y' = f(t, y) from t0 to t_end.  `project` is applied in place to
/// every accepted state.
pub fn dopri5<F, P>(
    f: F,
    mut project: P,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    ctl: StepControl,
) -> Result<Trajectory>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
    P: FnMut(&mut [f64]),
{
    let mut t = t0;
    let mut y = y0.to_vec();
    project(&mut y);
    let mut traj = Trajectory { t: vec![t], y: vec![y.clone()] };
    let mut h = ctl.h_init.min(t_end - t0);
    let mut k1 = f(t, &y);
    let mut steps = 0;
    while t < t_end {
        if steps >= ctl.max_steps {
            return Err(Error::numerical(format!("step budget exhausted at t = {t}")));
        }
        steps += 1;
        if t + h > t_end {
            h = t_end - t;
        }
        let k2 = f(t + C2 * h, &axpy(&y, &[(A21, &k1)], h));
        let k3 = f(t + C3 * h, &axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(t + C4 * h, &axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(t + C5 * h, &axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = f(t + h, &axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
        let y5 = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
        let k7 = f(t + h, &y5);
        let mut err = 0.0;
        for i in 0..y.len() {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = ctl.atol + ctl.rtol * y[i].abs().max(y5[i].abs());
            err += (e / sc).powi(2);
        }
        err = (err / y.len() as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::numerical("non-finite error estimate"));
        }
        if err <= 1.0 {
            t += h;
            y = y5;
            project(&mut y);
            k1 = f(t, &y);
            traj.t.push(t);
            traj.y.push(y.clone());
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * fac).min(ctl.h_max);
        if h < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::numerical(format!("step size underflow at t = {t}")));
        }
    }
    Ok(traj)
}
