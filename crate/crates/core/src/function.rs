//! Grid functions on `[0, 1]`, the square-root slope transform and the
//! action of warping functions.
//!
//! Every function lives on the uniform grid `t_i = i / (N - 1)`. Derivatives
//! use central differences in the interior and second-order one-sided
//! differences at the ends; integrals use the trapezoidal rule; composition
//! uses piecewise-linear interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};

/// Minimum increment enforced by [`WarpingFunction::from_values_clamped`].
pub const MIN_WARP_INCREMENT: f64 = 1e-10;

const ENDPOINT_TOL: f64 = 1e-12;

/// Uniform grid of `n` points on `[0, 1]`.
pub fn grid(n: usize) -> Vec<f64> {
    let h = 1.0 / (n - 1) as f64;
    (0..n).map(|i| i as f64 * h).collect()
}

/// Trapezoidal integral of `values` over the uniform grid on `[0, 1]`.
pub fn trapz(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let h = 1.0 / (n - 1) as f64;
    let interior: f64 = values[1..n - 1].iter().sum();
    h * (interior + 0.5 * (values[0] + values[n - 1]))
}

/// Trapezoidal L2 inner product on the uniform grid.
pub fn inner(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let h = 1.0 / (n - 1) as f64;
    let interior: f64 = a[1..n - 1]
        .iter()
        .zip(&b[1..n - 1])
        .map(|(x, y)| x * y)
        .sum();
    h * (interior + 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]))
}

pub fn norm(a: &[f64]) -> f64 {
    inner(a, a).max(0.0).sqrt()
}

/// Cumulative trapezoidal integral starting at 0.
pub fn cumtrapz(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let h = 1.0 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Finite-difference derivative on the uniform grid (requires `n >= 3`).
pub fn gradient(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    debug_assert!(n >= 3);
    let h = 1.0 / (n - 1) as f64;
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    for i in 1..n - 1 {
        d[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
    }
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    d
}

/// Piecewise-linear interpolation of grid values at `x` in `[0, 1]`.
pub fn interp(values: &[f64], x: f64) -> f64 {
    let n = values.len();
    let mut pos = (x * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
    // Grid nodes reproduce the sample exactly.
    if (pos - pos.round()).abs() < 1e-9 {
        pos = pos.round();
    }
    let i = (pos.floor() as usize).min(n - 2);
    let frac = pos - i as f64;
    values[i] + frac * (values[i + 1] - values[i])
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return invalid(format!("{what}: non-finite value at index {i}"));
    }
    Ok(())
}

/// A real-valued function sampled on the uniform grid of `N >= 3` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFunction {
    values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return invalid(format!(
                "a sampled function needs at least 3 points, got {}",
                values.len()
            ));
        }
        check_finite(&values, "sampled function")?;
        Ok(Self { values })
    }

    /// Samples `f` on the uniform grid of `n` points.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid(n).into_iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Square-root slope function `q = sign(f') sqrt(|f'|)` on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Srsf {
    values: Vec<f64>,
}

impl Srsf {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return invalid(format!(
                "an SRSF needs at least 3 points, got {}",
                values.len()
            ));
        }
        check_finite(&values, "SRSF")?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }
}

/// Boundary-preserving, strictly increasing reparameterization of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpingFunction {
    values: Vec<f64>,
}

impl WarpingFunction {
    /// Validates `values`: `gamma(0) = 0`, `gamma(1) = 1` within 1e-12 and
    /// strictly increasing. Endpoints are snapped to exactly 0 and 1.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 3 {
            return invalid(format!(
                "a warping function needs at least 3 points, got {n}"
            ));
        }
        check_finite(&values, "warping function")?;
        if values[0].abs() > ENDPOINT_TOL || (values[n - 1] - 1.0).abs() > ENDPOINT_TOL {
            return invalid(format!(
                "warping function must satisfy gamma(0)=0 and gamma(1)=1, got {} and {}",
                values[0],
                values[n - 1]
            ));
        }
        values[0] = 0.0;
        values[n - 1] = 1.0;
        if let Some(i) = values.windows(2).position(|w| w[1] <= w[0]) {
            return invalid(format!(
                "warping function is not strictly increasing at index {i}"
            ));
        }
        Ok(Self { values })
    }

    /// Builds a warping function from possibly non-monotone numerical values.
    /// Increments below [`MIN_WARP_INCREMENT`] are raised to it and the curve
    /// is rescaled so that it runs from 0 to 1. Returns the number of clamped
    /// increments alongside the result.
    pub fn from_values_clamped(values: &[f64]) -> Result<(Self, usize)> {
        let n = values.len();
        if n < 3 {
            return invalid(format!(
                "a warping function needs at least 3 points, got {n}"
            ));
        }
        check_finite(values, "warping function")?;
        let mut clamps = 0;
        let mut out = Vec::with_capacity(n);
        let mut acc = 0.0;
        out.push(0.0);
        for w in values.windows(2) {
            let mut inc = w[1] - w[0];
            if inc < MIN_WARP_INCREMENT {
                inc = MIN_WARP_INCREMENT;
                clamps += 1;
            }
            acc += inc;
            out.push(acc);
        }
        for v in out.iter_mut() {
            *v /= acc;
        }
        out[n - 1] = 1.0;
        Ok((Self { values: out }, clamps))
    }

    pub fn identity(n: usize) -> Self {
        Self { values: grid(n) }
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid(n).into_iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Inverse warp evaluated on the same grid (linear interpolation of the
    /// swapped graph).
    pub fn inverse(&self) -> Self {
        let n = self.values.len();
        let t = grid(n);
        let mut out = Vec::with_capacity(n);
        let mut seg = 0;
        for &y in &t {
            while seg + 2 < n && self.values[seg + 1] < y {
                seg += 1;
            }
            let (y0, y1) = (self.values[seg], self.values[seg + 1]);
            let frac = ((y - y0) / (y1 - y0)).clamp(0.0, 1.0);
            out.push(t[seg] + frac * (t[seg + 1] - t[seg]));
        }
        out[0] = 0.0;
        out[n - 1] = 1.0;
        // Interpolating a strictly increasing graph stays strictly increasing.
        Self { values: out }
    }

    /// `self ∘ other`, i.e. `t -> self(other(t))`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        check_len(self.len(), other.len())?;
        let vals = other
            .values
            .iter()
            .map(|&x| interp(&self.values, x))
            .collect::<Vec<_>>();
        Ok(Self::from_values_clamped(&vals)?.0)
    }
}

/// SRSF of `f`: `q_i = sign(D_i) sqrt(|D_i|)` with `D` the finite-difference
/// derivative.
pub fn compute_srsf(f: &SampledFunction) -> Result<Srsf> {
    let d = gradient(f.values());
    let q = d.iter().map(|&x| x.signum() * x.abs().sqrt()).collect();
    Srsf::new(q)
}

/// Reconstructs `f(t) = f0 + ∫_0^t q|q|`.
pub fn srsf_to_function(q: &Srsf, f0: f64) -> Result<SampledFunction> {
    let integrand: Vec<f64> = q.values().iter().map(|&x| x * x.abs()).collect();
    let f = cumtrapz(&integrand).into_iter().map(|v| f0 + v).collect();
    SampledFunction::new(f)
}

fn compose_values(values: &[f64], gamma: &WarpingFunction) -> Result<Vec<f64>> {
    check_len(values.len(), gamma.len())?;
    gamma
        .values()
        .iter()
        .map(|&g| {
            if !(-ENDPOINT_TOL..=1.0 + ENDPOINT_TOL).contains(&g) {
                return invalid(format!("warp value {g} lies outside [0, 1]"));
            }
            Ok(interp(values, g))
        })
        .collect()
}

/// `f ∘ gamma` by linear interpolation.
pub fn warp_function(f: &SampledFunction, gamma: &WarpingFunction) -> Result<SampledFunction> {
    SampledFunction::new(compose_values(f.values(), gamma)?)
}

/// Group action on SRSFs: `(q, gamma) = (q ∘ gamma) sqrt(gamma')`.
pub fn warp_srsf(q: &Srsf, gamma: &WarpingFunction) -> Result<Srsf> {
    let composed = compose_values(q.values(), gamma)?;
    let dg = gradient(gamma.values());
    let out = composed
        .iter()
        .zip(&dg)
        .map(|(&v, &d)| v * d.max(0.0).sqrt())
        .collect();
    Srsf::new(out)
}

/// Trapezoidal L2 distance between two SRSFs.
pub fn l2_distance(q1: &Srsf, q2: &Srsf) -> Result<f64> {
    check_len(q1.len(), q2.len())?;
    let diff: Vec<f64> = q1
        .values()
        .iter()
        .zip(q2.values())
        .map(|(a, b)| a - b)
        .collect();
    Ok(norm(&diff))
}

/// Plain sum of squared pointwise differences, used by the likelihood.
pub fn sum_squared_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
