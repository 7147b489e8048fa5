//! Time integration of the full-domain micro model and of the patch scheme.
//!
//! Two explicit methods are available: classical fourth-order Runge-Kutta with
//! a fixed step, and the adaptive Bogacki-Shampine 3(2) pair. Both sample the
//! trajectory at requested times by cubic Hermite interpolation over the step
//! that contains each sample time.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coupling::{couple_edges_fft, CouplingPlan};
use crate::error::{Error, Result};
use crate::micro::{rhs_staggered, MicroGrid, WaveParams};
use crate::scheme::PatchScheme;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Method {
    /// Classical RK4 with step `dt` (the final step is shortened to land on
    /// the end time).
    Rk4 { dt: f64 },
    /// Bogacki-Shampine 3(2) with error-per-step control.
    Bs3 { rtol: f64, atol: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Integrator {
    pub method: Method,
    /// Abort after this many accepted plus rejected steps.
    pub max_steps: usize,
    /// Smallest adaptive step before giving up.
    pub min_step: f64,
}

impl Integrator {
    pub fn rk4(dt: f64) -> Self {
        Self { method: Method::Rk4 { dt }, max_steps: 10_000_000, min_step: 1e-14 }
    }

    pub fn bs3(rtol: f64, atol: f64) -> Self {
        Self { method: Method::Bs3 { rtol, atol }, max_steps: 10_000_000, min_step: 1e-14 }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self.method {
            Method::Rk4 { dt } => dt > 0.0 && dt.is_finite(),
            Method::Bs3 { rtol, atol } => rtol > 0.0 && atol >= 0.0 && rtol.is_finite() && atol.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("bad integrator settings {:?}", self.method)))
        }
    }
}

/// States sampled at `times`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub steps: usize,
    pub rejected: usize,
}

fn axpy(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (c, k) in terms {
        if *c != 0.0 {
            for (o, v) in out.iter_mut().zip(k.iter()) {
                *o += h * c * v;
            }
        }
    }
    out
}

/// Cubic Hermite interpolant on `[t0, t0 + h]` at fraction `s`.
fn hermite(y0: &[f64], f0: &[f64], y1: &[f64], f1: &[f64], h: f64, s: f64) -> Vec<f64> {
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    (0..y0.len()).map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i]).collect()
}

/// Integrates `dy/dt = f(t, y)` from `t = 0` and samples at the
/// non-decreasing, non-negative `times`.
pub fn integrate<F>(mut f: F, y0: &[f64], times: &[f64], integ: &Integrator) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64]) -> Vec<f64>,
{
    integ.validate()?;
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParams("sample times must be finite, non-negative and non-decreasing".into()));
    }
    let t_end = times.last().copied().unwrap_or(0.0);
    let mut out = Trajectory { times: times.to_vec(), states: Vec::with_capacity(times.len()), steps: 0, rejected: 0 };
    let mut t = 0.0;
    let mut y = y0.to_vec();
    let mut fy = f(t, &y);
    let mut next = 0;
    while next < times.len() && times[next] <= 0.0 {
        out.states.push(y.clone());
        next += 1;
    }
    let mut h = match integ.method {
        Method::Rk4 { dt } => dt,
        Method::Bs3 { rtol, atol } => initial_step(&y, &fy, rtol, atol, t_end),
    };
    while next < times.len() {
        if out.steps + out.rejected >= integ.max_steps {
            return Err(Error::Integrator(format!("step budget {} exhausted at t = {t}", integ.max_steps)));
        }
        let last = t + h >= t_end - 1e-12 * t_end.max(1.0);
        let step = if last { t_end - t } else { h };
        let (y1, f1, accept, h_next) = match integ.method {
            Method::Rk4 { dt } => {
                let (y1, f1) = rk4_step(&mut f, t, &y, &fy, step);
                (y1, f1, true, dt)
            }
            Method::Bs3 { rtol, atol } => {
                let (y1, f1, err) = bs3_step(&mut f, t, &y, &fy, step, rtol, atol);
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-1.0 / 3.0)).clamp(0.2, 5.0) };
                (y1, f1, err <= 1.0, step * factor)
            }
        };
        if !y1.iter().all(|v| v.is_finite()) && matches!(integ.method, Method::Rk4 { .. }) {
            return Err(Error::Integrator(format!("non-finite state at t = {}; step {step} too large", t + step)));
        }
        if !accept {
            out.rejected += 1;
            h = h_next;
            if h < integ.min_step {
                return Err(Error::Integrator(format!("step size underflow ({h:e}) at t = {t}")));
            }
            continue;
        }
        let t1 = if last { t_end } else { t + step };
        while next < times.len() && times[next] <= t1 {
            let s = if step > 0.0 { (times[next] - t) / step } else { 1.0 };
            out.states.push(hermite(&y, &fy, &y1, &f1, step, s.clamp(0.0, 1.0)));
            next += 1;
        }
        t = t1;
        y = y1;
        fy = f1;
        out.steps += 1;
        h = h_next;
    }
    Ok(out)
}

fn rk4_step<F: FnMut(f64, &[f64]) -> Vec<f64>>(f: &mut F, t: f64, y: &[f64], k1: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let k2 = f(t + h / 2.0, &axpy(y, h, &[(0.5, k1)]));
    let k3 = f(t + h / 2.0, &axpy(y, h, &[(0.5, &k2)]));
    let k4 = f(t + h, &axpy(y, h, &[(1.0, &k3)]));
    let y1 = axpy(y, h, &[(1.0 / 6.0, k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]);
    let f1 = f(t + h, &y1);
    (y1, f1)
}

fn bs3_step<F: FnMut(f64, &[f64]) -> Vec<f64>>(
    f: &mut F,
    t: f64,
    y: &[f64],
    k1: &[f64],
    h: f64,
    rtol: f64,
    atol: f64,
) -> (Vec<f64>, Vec<f64>, f64) {
    let k2 = f(t + 0.5 * h, &axpy(y, h, &[(0.5, k1)]));
    let k3 = f(t + 0.75 * h, &axpy(y, h, &[(0.75, &k2)]));
    let y1 = axpy(y, h, &[(2.0 / 9.0, k1), (1.0 / 3.0, &k2), (4.0 / 9.0, &k3)]);
    let k4 = f(t + h, &y1);
    let z = axpy(y, h, &[(7.0 / 24.0, k1), (0.25, &k2), (1.0 / 3.0, &k3), (0.125, &k4)]);
    let mut acc = 0.0;
    for i in 0..y.len() {
        let scale = atol + rtol * y[i].abs().max(y1[i].abs());
        let e = (y1[i] - z[i]) / scale;
        acc += e * e;
    }
    let err = if y.is_empty() { 0.0 } else { (acc / y.len() as f64).sqrt() };
    let err = if err.is_finite() { err } else { f64::INFINITY };
    (y1, k4, err)
}

fn initial_step(y: &[f64], f: &[f64], rtol: f64, atol: f64, t_end: f64) -> f64 {
    let norm = |v: &[f64]| {
        let s: f64 = v.iter().zip(y).map(|(a, b)| (a / (atol + rtol * b.abs())).powi(2)).sum();
        (s / v.len().max(1) as f64).sqrt()
    };
    let (d0, d1) = (norm(y), norm(f));
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(t_end.max(1e-12))
}

/// Integrates the full-domain staggered model.
pub fn integrate_full(grid: &MicroGrid, p: &WaveParams, x0: &[f64], times: &[f64], integ: &Integrator) -> Result<Trajectory> {
    if x0.len() != grid.len() {
        return Err(Error::InvalidParams(format!("state has {} entries, grid has {}", x0.len(), grid.len())));
    }
    integrate(|_, x| rhs_staggered(grid, x, p), x0, times, integ)
}

/// Patch-scheme derivative of a full interior state, with edges recomputed
/// by FFT coupling.
pub fn patch_rhs(scheme: &PatchScheme, plan: &CouplingPlan, x_i: &[f64]) -> Vec<f64> {
    let edges = couple_edges_fft(scheme, plan, x_i);
    scheme.rhs_patch(x_i, &edges)
}

/// Integrates the patch scheme over the full `N × N` patch grid.
pub fn integrate_patch(scheme: &PatchScheme, x0: &[f64], times: &[f64], integ: &Integrator) -> Result<Trajectory> {
    if x0.len() != scheme.total_interior_len() {
        return Err(Error::InvalidParams(format!(
            "state has {} entries, patch grid has {}",
            x0.len(),
            scheme.total_interior_len()
        )));
    }
    let plan = CouplingPlan::new(scheme)?;
    integrate(|_, x| patch_rhs(scheme, &plan, x), x0, times, integ)
}

/// Full interior state `Re(v e^{i k·X_c})` of a one-cell mode, where `X_c`
/// is the origin of macro-cell `c`.
pub fn embed_mode(scheme: &PatchScheme, k: (i64, i64), v: &[Complex64]) -> Vec<f64> {
    let m = scheme.params.cells_per_axis();
    let two = 2.0 * scheme.params.macro_delta();
    let (kx, ky) = (scheme.wave.wavenumber(k.0), scheme.wave.wavenumber(k.1));
    let mut out = Vec::with_capacity(m * m * v.len());
    for ci in 0..m {
        for cj in 0..m {
            let phase = Complex64::from_polar(1.0, (kx * ci as f64 + ky * cj as f64) * two);
            out.extend(v.iter().map(|z| (z * phase).re));
        }
    }
    out
}

/// Aggregates of every patch and field of a full interior state, in the
/// order cell, patch, field (fields without an aggregate are skipped).
pub fn aggregates(scheme: &PatchScheme, x: &[f64]) -> Vec<f64> {
    let ni = scheme.interior_len();
    let mut out = Vec::new();
    for c in 0..scheme.cells() {
        let cell = &x[c * ni..(c + 1) * ni];
        for p in 0..scheme.patches.len() {
            for f in 0..3 {
                if let Some(a) = scheme.aggregate(cell, p, f) {
                    out.push(a);
                }
            }
        }
    }
    out
}

/// Column names matching [`aggregates`].
pub fn aggregate_names(scheme: &PatchScheme) -> Vec<String> {
    let m = scheme.params.cells_per_axis();
    let mut out = Vec::new();
    for c in 0..scheme.cells() {
        let (ci, cj) = (c / m, c % m);
        for (p, patch) in scheme.patches.iter().enumerate() {
            for (f, name) in ["h", "u", "v"].iter().enumerate() {
                if !scheme.patches[p].aggregate_nodes[f].is_empty() {
                    out.push(format!("{name}_I{}_J{}", 2 * ci + patch.p, 2 * cj + patch.q));
                }
            }
        }
    }
    out
}

/// `t,<columns>` CSV with 17 significant digits.
pub fn trajectory_csv(names: &[String], times: &[f64], rows: &[Vec<f64>]) -> String {
    let mut s = String::from("t");
    for n in names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (t, row) in times.iter().zip(rows) {
        s.push_str(&format!("{t:.16e}"));
        for v in row {
            s.push_str(&format!(",{v:.16e}"));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        for integ in [Integrator::rk4(0.01), Integrator::bs3(1e-9, 1e-12)] {
            let tr = integrate(|_, y| vec![-y[0], y[1]], &[1.0, 1.0], &[0.0, 0.25, 1.0], &integ).unwrap();
            assert_eq!(tr.states.len(), 3);
            assert_eq!(tr.states[0], vec![1.0, 1.0]);
            assert!((tr.states[2][0] - (-1.0f64).exp()).abs() < 1e-8, "{:?}", integ.method);
            assert!((tr.states[1][1] - 0.25f64.exp()).abs() < 1e-7);
        }
    }

    #[test]
    fn rotation_keeps_radius() {
        let tr = integrate(|_, y| vec![-y[1], y[0]], &[1.0, 0.0], &[std::f64::consts::TAU], &Integrator::bs3(1e-10, 1e-12))
            .unwrap();
        let y = &tr.states[0];
        assert!((y[0] - 1.0).abs() < 1e-7 && y[1].abs() < 1e-7);
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(integrate(|_, y| y.to_vec(), &[1.0], &[1.0], &Integrator::rk4(0.0)).is_err());
        assert!(integrate(|_, y| y.to_vec(), &[1.0], &[1.0, 0.5], &Integrator::rk4(0.1)).is_err());
        let mut tiny = Integrator::bs3(1e-12, 0.0);
        tiny.max_steps = 5;
        assert!(matches!(integrate(|_, y| vec![1e3 * y[0]], &[1.0], &[10.0], &tiny), Err(Error::Integrator(_))));
    }

    #[test]
    fn unstable_rk4_reports() {
        let r = integrate(|_, y| vec![-1e6 * y[0]], &[1.0], &[100.0], &Integrator::rk4(0.5));
        assert!(matches!(r, Err(Error::Integrator(_))));
    }
}
