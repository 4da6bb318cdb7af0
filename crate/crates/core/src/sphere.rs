//! Square-root densities of warping functions and the geometry of the unit
//! Hilbert sphere they live on.
//!
//! A warping function `gamma` maps to `psi = sqrt(gamma')`, a unit vector
//! under the trapezoidal L2 inner product. The Fisher-Rao distance between
//! warps is then the arc length between their images, and exponential map,
//! inverse exponential map and parallel transport all have closed forms.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, AlignError, Result};
use crate::function::{cumtrapz, gradient, inner, norm, WarpingFunction};

/// Below this tangent norm the sinc terms use their Taylor expansions.
const SMALL_ANGLE: f64 = 1e-9;
/// Pairs closer than this to antipodal are rejected.
const ANTIPODAL_MARGIN: f64 = 1e-6;

pub const KARCHER_MAX_ITER: usize = 200;
pub const MEDIAN_MAX_ITER: usize = 1000;
pub const ESTIMATOR_TOL: f64 = 1e-6;

/// A point of the positive orthant of the unit sphere (a square-root density).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Srd {
    values: Vec<f64>,
}

/// A tangent vector, stored as grid values. The basepoint is carried by the
/// caller (or by the [`OrthonormalBasis`](crate::basis::OrthonormalBasis)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    values: Vec<f64>,
}

impl Srd {
    /// Clamps negative entries to zero and rescales to unit norm.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return invalid(format!(
                "an SRD needs at least 3 points, got {}",
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("SRD contains non-finite values");
        }
        for v in values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let nrm = norm(&values);
        if nrm <= f64::MIN_POSITIVE {
            return invalid("SRD has zero norm");
        }
        for v in values.iter_mut() {
            *v /= nrm;
        }
        Ok(Self { values })
    }

    /// The SRD of the identity warp, `psi ≡ 1`.
    pub fn identity(n: usize) -> Self {
        Self {
            values: vec![1.0; n],
        }
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

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl TangentVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
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

    pub fn dot(&self, other: &TangentVector) -> f64 {
        inner(&self.values, &other.values)
    }

    /// Inner product with the basepoint; zero for a tangent vector.
    pub fn tangency(&self, base: &Srd) -> f64 {
        inner(&self.values, base.values())
    }
}

/// `psi = sqrt(gamma')`, renormalized to unit norm.
pub fn to_srd(gamma: &WarpingFunction) -> Result<Srd> {
    let d = gradient(gamma.values());
    Srd::new(d.into_iter().map(|x| x.max(0.0).sqrt()).collect())
}

/// `gamma(t) = ∫_0^t psi^2`, rescaled so that `gamma(1) = 1`.
pub fn from_srd(psi: &Srd) -> Result<WarpingFunction> {
    let sq: Vec<f64> = psi.values().iter().map(|v| v * v).collect();
    let cum = cumtrapz(&sq);
    let total = *cum.last().expect("non-empty");
    let vals: Vec<f64> = cum.iter().map(|v| v / total).collect();
    match WarpingFunction::new(vals.clone()) {
        Ok(w) => Ok(w),
        // psi may vanish on a stretch of the grid; keep the curve monotone.
        Err(_) => Ok(WarpingFunction::from_values_clamped(&vals)?.0),
    }
}

/// Fisher-Rao distance between two warps.
pub fn fisher_rao_distance(a: &WarpingFunction, b: &WarpingFunction) -> Result<f64> {
    sphere_distance(&to_srd(a)?, &to_srd(b)?)
}

/// Arc length `acos(<psi1, psi2>)`, in `[0, pi]`.
pub fn sphere_distance(a: &Srd, b: &Srd) -> Result<f64> {
    check_len(a.len(), b.len())?;
    Ok(inner(a.values(), b.values()).clamp(-1.0, 1.0).acos())
}

/// `cos(|v|)` and `sin(|v|)/|v|` with the small-norm limit handled.
fn cos_sinc(r: f64) -> (f64, f64) {
    if r < SMALL_ANGLE {
        let r2 = r * r;
        (1.0 - 0.5 * r2, 1.0 - r2 / 6.0)
    } else {
        (r.cos(), r.sin() / r)
    }
}

/// Exponential map without projection onto the positive orthant. The
/// sampler uses this to detect draws that leave the valid set.
pub fn exp_map_raw(base: &[f64], v: &[f64]) -> Vec<f64> {
    let r = norm(v);
    let (c, s) = cos_sinc(r);
    let mut out: Vec<f64> = base.iter().zip(v).map(|(p, t)| c * p + s * t).collect();
    let nrm = norm(&out);
    if nrm > 0.0 {
        for x in out.iter_mut() {
            *x /= nrm;
        }
    }
    out
}

/// `exp_psi(v) = cos(|v|) psi + sin(|v|)/|v| v`.
pub fn exp_map(psi: &Srd, v: &TangentVector) -> Result<Srd> {
    check_len(psi.len(), v.len())?;
    Srd::new(exp_map_raw(psi.values(), v.values()))
}

/// `log_{psi1}(psi2) = theta / sin(theta) (psi2 - cos(theta) psi1)`.
pub fn log_map(psi1: &Srd, psi2: &Srd) -> Result<TangentVector> {
    check_len(psi1.len(), psi2.len())?;
    let theta = sphere_distance(psi1, psi2)?;
    if theta >= std::f64::consts::PI - ANTIPODAL_MARGIN {
        return Err(AlignError::DegeneratePair(format!(
            "inverse exponential map at distance {theta}"
        )));
    }
    let c = theta.cos();
    let mut u: Vec<f64> = psi2
        .values()
        .iter()
        .zip(psi1.values())
        .map(|(b, a)| b - c * a)
        .collect();
    // Remove the residual normal component left by quadrature rounding.
    let along = inner(&u, psi1.values());
    for (x, p) in u.iter_mut().zip(psi1.values()) {
        *x -= along * p;
    }
    let un = norm(&u);
    if un < 1e-15 || theta == 0.0 {
        return Ok(TangentVector::zeros(psi1.len()));
    }
    let scale = theta / un;
    Ok(TangentVector::new(
        u.into_iter().map(|x| x * scale).collect(),
    ))
}

/// Parallel transport of `v` (tangent at `from`) along the geodesic to `to`.
pub fn parallel_transport(v: &TangentVector, from: &Srd, to: &Srd) -> Result<TangentVector> {
    check_len(v.len(), from.len())?;
    check_len(from.len(), to.len())?;
    if from == to {
        return Ok(v.clone());
    }
    let sum: Vec<f64> = from
        .values()
        .iter()
        .zip(to.values())
        .map(|(a, b)| a + b)
        .collect();
    let sum_sq = inner(&sum, &sum);
    if sum_sq < 1e-12 {
        return Err(AlignError::DegeneratePair(
            "parallel transport between antipodal points".into(),
        ));
    }
    let coef = 2.0 * inner(v.values(), to.values()) / sum_sq;
    Ok(TangentVector::new(
        v.values()
            .iter()
            .zip(&sum)
            .map(|(x, s)| x - coef * s)
            .collect(),
    ))
}

/// Point at fraction `tau` along the great circle from `a` to `b`.
pub fn geodesic(a: &Srd, b: &Srd, tau: f64) -> Result<Srd> {
    let theta = sphere_distance(a, b)?;
    if theta < 1e-12 {
        return Ok(a.clone());
    }
    if theta >= std::f64::consts::PI - ANTIPODAL_MARGIN {
        return Err(AlignError::DegeneratePair(format!(
            "geodesic at distance {theta}"
        )));
    }
    let s = theta.sin();
    let wa = (theta - theta * tau).sin() / s;
    let wb = (theta * tau).sin() / s;
    Srd::new(
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| wa * x + wb * y)
            .collect(),
    )
}

/// Normalized extrinsic average, the starting point of both estimators.
/// Summation order does not depend on input order beyond rounding.
fn extrinsic_start(points: &[Srd]) -> Result<Srd> {
    let n = points[0].len();
    let mut acc = vec![0.0; n];
    for p in points {
        check_len(p.len(), n)?;
        for (a, v) in acc.iter_mut().zip(p.values()) {
            *a += v;
        }
    }
    Srd::new(acc)
}

/// Sample Karcher mean by gradient descent with unit step.
///
/// Stops when the norm of the mean inverse-exponential map falls below
/// 1e-6; fails with [`AlignError::Convergence`] after 200 iterations.
pub fn karcher_mean(points: &[Srd]) -> Result<Srd> {
    if points.is_empty() {
        return invalid("Karcher mean of an empty sample");
    }
    if points.len() == 1 {
        return Ok(points[0].clone());
    }
    let n = points[0].len();
    let mut mu = extrinsic_start(points)?;
    let mut residual = f64::INFINITY;
    for _ in 0..KARCHER_MAX_ITER {
        let mut mean = vec![0.0; n];
        for p in points {
            let v = log_map(&mu, p)?;
            for (m, x) in mean.iter_mut().zip(v.values()) {
                *m += x;
            }
        }
        for m in mean.iter_mut() {
            *m /= points.len() as f64;
        }
        residual = norm(&mean);
        if residual < ESTIMATOR_TOL {
            return Ok(mu);
        }
        mu = exp_map(&mu, &TangentVector::new(mean))?;
    }
    Err(AlignError::Convergence {
        what: "Karcher mean",
        iterations: KARCHER_MAX_ITER,
        residual,
        last: mu.values,
    })
}

/// Sample geometric median by a Weiszfeld iteration on the sphere.
///
/// For two points every point of the connecting geodesic minimizes the
/// objective; the fixed point reached from the extrinsic start is returned.
/// If an iterate falls onto a data point, that point is returned when it
/// satisfies the subgradient optimality condition, otherwise the iterate is
/// nudged off it by 1e-8.
pub fn geometric_median(points: &[Srd]) -> Result<Srd> {
    if points.is_empty() {
        return invalid("geometric median of an empty sample");
    }
    if points.len() == 1 {
        return Ok(points[0].clone());
    }
    let n = points[0].len();
    let p = points.len() as f64;
    let mut mu = extrinsic_start(points)?;
    let mut residual = f64::INFINITY;
    for _ in 0..MEDIAN_MAX_ITER {
        let mut unit_sum = vec![0.0; n];
        let mut inv_sum = 0.0;
        let mut coincident = 0usize;
        for q in points {
            let v = log_map(&mu, q)?;
            let d = v.norm();
            if d < 1e-12 {
                coincident += 1;
                continue;
            }
            for (u, x) in unit_sum.iter_mut().zip(v.values()) {
                *u += x / d;
            }
            inv_sum += 1.0 / d;
        }
        let pull = norm(&unit_sum);
        if coincident > 0 {
            // Optimality at a data point: the pull of the remaining points is
            // no stronger than the multiplicity of the point itself.
            if pull <= coincident as f64 + ESTIMATOR_TOL * p {
                return Ok(mu);
            }
            let dir = first_tangent_direction(&mu);
            mu = exp_map(
                &mu,
                &TangentVector::new(dir.into_iter().map(|x| 1e-8 * x).collect()),
            )?;
            continue;
        }
        residual = pull / p;
        if residual < ESTIMATOR_TOL {
            return Ok(mu);
        }
        let step: Vec<f64> = unit_sum.iter().map(|u| u / inv_sum).collect();
        let step_norm = norm(&step);
        mu = exp_map(&mu, &TangentVector::new(step))?;
        if step_norm < 1e-13 {
            return Ok(mu);
        }
    }
    Err(AlignError::Convergence {
        what: "geometric median",
        iterations: MEDIAN_MAX_ITER,
        residual,
        last: mu.values,
    })
}

/// Unit tangent direction at `mu` obtained by projecting the linear element
/// `sqrt(3)(1 - 2t)` onto the tangent space.
fn first_tangent_direction(mu: &Srd) -> Vec<f64> {
    let n = mu.len();
    let h = 1.0 / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n)
        .map(|i| 3f64.sqrt() * (1.0 - 2.0 * i as f64 * h))
        .collect();
    let a = inner(&v, mu.values());
    for (x, m) in v.iter_mut().zip(mu.values()) {
        *x -= a * m;
    }
    let nv = norm(&v);
    v.iter().map(|x| x / nv).collect()
}
