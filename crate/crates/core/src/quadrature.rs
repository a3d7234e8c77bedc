//! Adaptive Simpson quadrature on finite intervals.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    /// Absolute tolerance for the whole integral.
    pub tolerance: f64,
    /// Each interval is first split into this many equal panels.
    pub initial_panels: usize,
    pub max_depth: u32,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            initial_panels: 8,
            max_depth: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Estimated absolute error (Richardson estimate summed over panels).
    pub error: f64,
    pub evaluations: usize,
}

struct State<'a, F> {
    f: &'a F,
    evals: usize,
    max_depth: u32,
    failed: bool,
}

impl<F: Fn(f64) -> f64> State<'_, F> {
    fn eval(&mut self, x: f64) -> f64 {
        self.evals += 1;
        (self.f)(x)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = self.eval(lm);
        let frm = self.eval(rm);
        let h = b - a;
        let left = h / 12.0 * (fa + 4.0 * flm + fm);
        let right = h / 12.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        // second clause: refinement can no longer beat rounding
        if delta.abs() <= 15.0 * tol || delta.abs() <= 64.0 * f64::EPSILON * (left + right).abs() {
            return (left + right + delta / 15.0, delta.abs() / 15.0);
        }
        if depth >= self.max_depth || m <= a || m >= b {
            self.failed = true;
            return (left + right + delta / 15.0, delta.abs() / 15.0);
        }
        let (lv, le) = self.recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1);
        let (rv, re) = self.recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
        (lv + rv, le + re)
    }
}

/// Integrates `f` over `[a, b]`, refining each panel until its Richardson
/// error estimate drops below its share of `config.tolerance`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, config: &QuadConfig) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::param(format!("bad integration interval [{a}, {b}]")));
    }
    if b == a {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let panels = config.initial_panels.max(1);
    let mut st = State {
        f,
        evals: 0,
        max_depth: config.max_depth,
        failed: false,
    };
    let width = (b - a) / panels as f64;
    let panel_tol = config.tolerance / panels as f64;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut x0 = a;
    let mut f0 = st.eval(a);
    for k in 0..panels {
        let x1 = if k + 1 == panels { b } else { a + (k + 1) as f64 * width };
        let xm = 0.5 * (x0 + x1);
        let fm = st.eval(xm);
        let f1 = st.eval(x1);
        let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
        let (v, e) = st.recurse(x0, x1, f0, fm, f1, whole, panel_tol, 0);
        value += v;
        error += e;
        x0 = x1;
        f0 = f1;
    }
    if st.failed || !value.is_finite() {
        return Err(Error::Numerical {
            message: format!("adaptive Simpson did not converge on [{a}, {b}]"),
            estimated_error: error,
            evaluations: st.evals,
        });
    }
    Ok(QuadResult {
        value,
        error,
        evaluations: st.evals,
    })
}
