//! Continuity-constrained piecewise log-distance model.
//!
//! Bin `w` covers `[edges[w], edges[w+1])` and predicts
//! `p0[w] - eta[w] * 10 log10(d)`. Adjacent bins agree at every interior edge.
//! Fitting solves the equality-constrained least-squares problem through its
//! KKT system
//!
//! ```text
//! [ BᵀB  Cᵀ ] [θ]   [Bᵀy]
//! [ C    0  ] [λ] = [ 0 ]
//! ```
//!
//! where `B` is the block design (one `[1, u]` column pair per bin with
//! `u = -10 log10(d)`) and `C` holds one continuity row per interior edge.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::loglinear::validate_samples;
use super::VARIANCE_FLOOR;
use crate::error::{Error, Result};
use crate::geometry::D_MIN;

/// Tolerated jump at an interior edge, in dB.
pub const CONTINUITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpline", into = "RawSpline")]
pub struct SplineModel {
    edges: Vec<f64>,
    p0: Vec<f64>,
    eta: Vec<f64>,
    sigma2: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSpline {
    edges: Vec<f64>,
    p0: Vec<f64>,
    eta: Vec<f64>,
    sigma2: Vec<f64>,
}

impl TryFrom<RawSpline> for SplineModel {
    type Error = Error;

    fn try_from(r: RawSpline) -> Result<Self> {
        SplineModel::new(r.edges, r.p0, r.eta, r.sigma2)
    }
}

impl From<SplineModel> for RawSpline {
    fn from(m: SplineModel) -> Self {
        RawSpline {
            edges: m.edges,
            p0: m.p0,
            eta: m.eta,
            sigma2: m.sigma2,
        }
    }
}

fn u_of(d: f64) -> f64 {
    -10.0 * d.log10()
}

impl SplineModel {
    pub fn new(edges: Vec<f64>, p0: Vec<f64>, eta: Vec<f64>, sigma2: Vec<f64>) -> Result<Self> {
        let bins = p0.len();
        if bins == 0 {
            return Err(Error::param("spline needs at least one bin"));
        }
        if eta.len() != bins || sigma2.len() != bins || edges.len() != bins + 1 {
            return Err(Error::param(format!(
                "spline with {bins} bins needs {} edges and {bins} slopes/variances",
                bins + 1
            )));
        }
        if edges.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::param("spline edges must be positive and finite"));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("spline edges must be strictly increasing"));
        }
        if p0.iter().chain(&eta).any(|v| !v.is_finite()) {
            return Err(Error::param("spline coefficients must be finite"));
        }
        if let Some(w) = sigma2.iter().position(|&v| !(v >= VARIANCE_FLOOR && v.is_finite())) {
            return Err(Error::param(format!(
                "bin {w} variance {} is below the floor {VARIANCE_FLOOR}",
                sigma2[w]
            )));
        }
        let m = Self { edges, p0, eta, sigma2 };
        let jump = m.max_knot_discontinuity();
        if jump > CONTINUITY_TOLERANCE {
            return Err(Error::param(format!(
                "spline is discontinuous at an interior edge (jump {jump:e} dB)"
            )));
        }
        Ok(m)
    }

    /// Builds a continuous spline from the first bin's intercept and the
    /// per-bin slopes; the remaining intercepts follow from continuity.
    pub fn continuous(edges: Vec<f64>, p0_first: f64, eta: Vec<f64>, sigma2: Vec<f64>) -> Result<Self> {
        if eta.is_empty() || edges.len() != eta.len() + 1 {
            return Err(Error::param("spline with L bins needs L+1 edges"));
        }
        let mut p0 = Vec::with_capacity(eta.len());
        p0.push(p0_first);
        for w in 1..eta.len() {
            let u = u_of(edges[w]);
            p0.push(p0[w - 1] + (eta[w - 1] - eta[w]) * u);
        }
        Self::new(edges, p0, eta, sigma2)
    }

    pub fn bins(&self) -> usize {
        self.p0.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn p0(&self) -> &[f64] {
        &self.p0
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    /// Bin containing `d`; distances outside the fitted range clamp to the
    /// first or last bin.
    pub fn bin(&self, d: f64) -> usize {
        let interior = &self.edges[1..self.bins()];
        interior.partition_point(|&e| e <= d)
    }

    /// Mean of bin `w` at distance `d`.
    pub fn segment_mean(&self, w: usize, d: f64) -> f64 {
        self.p0[w] + self.eta[w] * u_of(d.max(D_MIN))
    }

    pub fn mean(&self, d: f64) -> f64 {
        self.segment_mean(self.bin(d), d)
    }

    pub fn variance(&self, d: f64) -> f64 {
        self.sigma2[self.bin(d)]
    }

    /// Largest jump between adjacent segments over the interior edges.
    pub fn max_knot_discontinuity(&self) -> f64 {
        (1..self.bins())
            .map(|w| {
                let u = u_of(self.edges[w]);
                let left = self.p0[w - 1] + self.eta[w - 1] * u;
                let right = self.p0[w] + self.eta[w] * u;
                (left - right).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Fits an `bins`-segment continuous spline with edges equally spaced in
/// `log10(d)` over the observed distance range.
pub fn fit_spline(samples: &[(f64, f64)], bins: usize) -> Result<SplineModel> {
    if bins == 0 {
        return Err(Error::Fit("number of bins must be positive".into()));
    }
    if samples.len() < 2 * bins + 1 {
        return Err(Error::Fit(format!(
            "{} bins need at least {} samples, got {}",
            bins,
            2 * bins + 1,
            samples.len()
        )));
    }
    validate_samples(samples)?;

    let x: Vec<f64> = samples.iter().map(|&(d, _)| d.log10()).collect();
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if hi - lo <= 1e-12 {
        return Err(Error::Fit("all sample distances are equal".into()));
    }
    let width = (hi - lo) / bins as f64;
    let knot_x: Vec<f64> = (0..=bins)
        .map(|w| if w == bins { hi } else { lo + w as f64 * width })
        .collect();
    let bin_of = |xv: f64| -> usize { (((xv - lo) / width).floor() as usize).min(bins - 1) };

    let assignment: Vec<usize> = x.iter().map(|&xv| bin_of(xv)).collect();
    let mut counts = vec![0usize; bins];
    for &w in &assignment {
        counts[w] += 1;
    }
    if let Some(w) = counts.iter().position(|&c| c == 0) {
        let lo_d = 10f64.powf(knot_x[w]);
        let hi_d = 10f64.powf(knot_x[w + 1]);
        return Err(Error::Fit(format!(
            "bin {w} ([{lo_d:.3}, {hi_d:.3}) m) contains no samples"
        )));
    }

    let n_par = 2 * bins;
    let n_con = bins - 1;
    let dim = n_par + n_con;
    let mut kkt = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for ((&xv, &w), &(_, z)) in x.iter().zip(&assignment).zip(samples) {
        let u = -10.0 * xv;
        let (a, b) = (2 * w, 2 * w + 1);
        kkt[(a, a)] += 1.0;
        kkt[(a, b)] += u;
        kkt[(b, a)] += u;
        kkt[(b, b)] += u * u;
        rhs[a] += z;
        rhs[b] += u * z;
    }
    for c in 0..n_con {
        let w = c + 1;
        let u = -10.0 * knot_x[w];
        let row = n_par + c;
        let coeffs = [(2 * (w - 1), 1.0), (2 * (w - 1) + 1, u), (2 * w, -1.0), (2 * w + 1, -u)];
        for (col, v) in coeffs {
            kkt[(row, col)] = v;
            kkt[(col, row)] = v;
        }
    }

    let lu = kkt.clone().full_piv_lu();
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Fit("KKT system is singular".into()))?;
    let residual = (&kkt * &sol - &rhs).norm();
    if !sol.iter().all(|v| v.is_finite()) || residual > 1e-8 * (1.0 + rhs.norm()) {
        return Err(Error::Fit(format!(
            "KKT system is singular or ill-conditioned (residual {residual:e})"
        )));
    }

    let p0: Vec<f64> = (0..bins).map(|w| sol[2 * w]).collect();
    let eta: Vec<f64> = (0..bins).map(|w| sol[2 * w + 1]).collect();

    let mut sse = vec![0.0; bins];
    for ((&xv, &w), &(_, z)) in x.iter().zip(&assignment).zip(samples) {
        let r = z - (p0[w] - eta[w] * 10.0 * xv);
        sse[w] += r * r;
    }
    let sigma2: Vec<f64> = sse
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| (s / n.saturating_sub(2).max(1) as f64).max(VARIANCE_FLOOR))
        .collect();

    let mut edges: Vec<f64> = knot_x.iter().map(|&k| 10f64.powf(k)).collect();
    // keep the outer edges exactly at the observed extremes
    edges[0] = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    edges[bins] = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);

    SplineModel::new(edges, p0, eta, sigma2).map_err(|e| Error::Fit(e.to_string()))
}
