//! Dormand–Prince 5(4) with the 4th-order continuous extension of Hairer,
//! Nørsett and Wanner.

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&mut self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { atol: 1e-12, rtol: 1e-9 }
    }
}

/// Stage storage for one system size. `k[0]` must hold `f(t, y)` before
/// [`try_step`](Dopri5::try_step); after a step `k[6]` holds `f(t + h, y_new)`.
pub struct Dopri5 {
    pub k: [Vec<f64>; 7],
    pub y_new: Vec<f64>,
    tmp: Vec<f64>,
}

impl Dopri5 {
    pub fn new(n: usize) -> Self {
        Dopri5 {
            k: std::array::from_fn(|_| vec![0.0; n]),
            y_new: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.y_new.len()
    }

    /// One trial step. Returns the scaled RMS error estimate.
    pub fn try_step<S: OdeSystem + ?Sized>(
        &mut self,
        sys: &mut S,
        t: f64,
        y: &[f64],
        h: f64,
        tol: Tolerances,
    ) -> Result<f64> {
        let n = y.len();
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let tmp = &mut self.tmp;
        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        sys.rhs(t + C2 * h, tmp, k2)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(t + C3 * h, tmp, k3)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(t + C4 * h, tmp, k4)?;
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(t + C5 * h, tmp, k5)?;
        for i in 0..n {
            tmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.rhs(t + h, tmp, k6)?;
        let y_new = &mut self.y_new;
        for i in 0..n {
            y_new[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        sys.rhs(t + h, y_new, k7)?;
        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sk) * (e / sk);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: t + h });
        }
        Ok(err)
    }

    /// Continuous-extension coefficients for the last accepted step, written
    /// as five consecutive blocks of length `n`.
    pub fn dense_coeffs(&self, y: &[f64], h: f64, out: &mut [f64]) {
        let n = y.len();
        let [k1, _, k3, k4, k5, k6, k7] = &self.k;
        for i in 0..n {
            let dy = self.y_new[i] - y[i];
            let bspl = h * k1[i] - dy;
            out[i] = y[i];
            out[n + i] = dy;
            out[2 * n + i] = bspl;
            out[3 * n + i] = dy - h * k7[i] - bspl;
            out[4 * n + i] = h
                * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
    }
}

/// Evaluates the continuous extension at `theta ∈ [0, 1]` of a step.
#[inline]
pub fn dense_eval(coeffs: &[f64], theta: f64, out: &mut [f64]) {
    let n = out.len();
    let th1 = 1.0 - theta;
    for i in 0..n {
        out[i] = coeffs[i]
            + theta
                * (coeffs[n + i]
                    + th1
                        * (coeffs[2 * n + i]
                            + theta * (coeffs[3 * n + i] + th1 * coeffs[4 * n + i])));
    }
}

/// Step-size factor after a trial step with scaled error `err`.
#[inline]
pub fn step_factor(err: f64, accepted: bool) -> f64 {
    let f = if err == 0.0 { 10.0 } else { 0.9 * err.powf(-0.2) };
    if accepted {
        f.clamp(0.2, 10.0)
    } else {
        f.clamp(0.1, 0.9)
    }
}

/// Initial step guess (Hairer's `hinit`). `f0` is `f(t0, y0)`.
pub fn initial_step<S: OdeSystem + ?Sized>(
    sys: &mut S,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    span: f64,
    tol: Tolerances,
) -> f64 {
    let n = y0.len();
    let sk = |i: usize| tol.atol + tol.rtol * y0[i].abs();
    let rms = |v: &[f64]| -> f64 {
        (v.iter().enumerate().map(|(i, x)| (x / sk(i)).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span.abs());
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + h0 * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    if sys.rhs(t0 + h0, &y1, &mut f1).is_err() {
        return h0 * 0.01;
    }
    let diff: Vec<f64> = (0..n).map(|i| f1[i] - f0[i]).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span.abs())
}

/// Dense solution of a plain ODE, for systems without chart changes.
#[derive(Clone, Debug)]
pub struct DenseSolution {
    pub n: usize,
    pub t: Vec<f64>,
    pub h: Vec<f64>,
    pub coeffs: Vec<f64>,
}

impl DenseSolution {
    pub fn t_end(&self) -> f64 {
        match (self.t.last(), self.h.last()) {
            (Some(t), Some(h)) => t + h,
            _ => 0.0,
        }
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let idx = match self.t.partition_point(|&s| s <= t) {
            0 => 0,
            i => (i - 1).min(self.t.len() - 1),
        };
        let theta = ((t - self.t[idx]) / self.h[idx]).clamp(0.0, 1.0);
        dense_eval(&self.coeffs[idx * 5 * self.n..(idx + 1) * 5 * self.n], theta, out);
    }

    pub fn n_steps(&self) -> usize {
        self.t.len()
    }
}

/// Integrates `sys` from `t0` to `t1 > t0`.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &mut S,
    t0: f64,
    y0: &[f64],
    t1: f64,
    tol: Tolerances,
) -> Result<DenseSolution> {
    let n = y0.len();
    let mut st = Dopri5::new(n);
    let mut y = y0.to_vec();
    sys.rhs(t0, &y, &mut st.k[0])?;
    let f0 = st.k[0].clone();
    let mut h = initial_step(sys, t0, &y, &f0, t1 - t0, tol);
    let mut t = t0;
    let mut sol = DenseSolution { n, t: vec![], h: vec![], coeffs: vec![] };
    let mut buf = vec![0.0; 5 * n];
    while t < t1 {
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let err = st.try_step(sys, t, &y, h, tol)?;
        if err <= 1.0 {
            st.dense_coeffs(&y, h, &mut buf);
            sol.t.push(t);
            sol.h.push(h);
            sol.coeffs.extend_from_slice(&buf);
            y.copy_from_slice(&st.y_new);
            let k7 = std::mem::take(&mut st.k[6]);
            st.k[6] = std::mem::replace(&mut st.k[0], k7);
            t = if last { t1 } else { t + h };
            h *= step_factor(err, true);
        } else {
            h *= step_factor(err, false);
        }
        if h.abs() < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::NonFiniteState { t });
        }
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Osc;
    impl OdeSystem for Osc {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        }
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let sol = integrate(&mut Osc, 0.0, &[0.0, 1.0], 10.0, Tolerances::default()).unwrap();
        let mut y = [0.0; 2];
        for k in 0..=200 {
            let t = 10.0 * k as f64 / 200.0;
            sol.eval(t, &mut y);
            assert!((y[0] - t.sin()).abs() < 1e-7, "t={t} y={}", y[0]);
            assert!((y[1] - t.cos()).abs() < 1e-7);
        }
        assert!((sol.t_end() - 10.0).abs() < 1e-15);
    }

    struct Expo;
    impl OdeSystem for Expo {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&mut self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = y[0];
            Ok(())
        }
    }

    #[test]
    fn exponential_growth_relative_accuracy() {
        let sol = integrate(&mut Expo, 0.0, &[1.0], 5.0, Tolerances::default()).unwrap();
        let mut y = [0.0];
        sol.eval(5.0, &mut y);
        assert!((y[0] / 5f64.exp() - 1.0).abs() < 1e-8);
        sol.eval(2.345, &mut y);
        assert!((y[0] / 2.345f64.exp() - 1.0).abs() < 1e-8);
    }
}
