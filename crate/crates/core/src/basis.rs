//! Orthonormal Fourier-type basis of the tangent space at the identity SRD,
//! its transport to other basepoints, and coordinate maps.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, AlignError, Result};
use crate::function::{grid, inner, norm};
use crate::sphere::{exp_map, log_map, parallel_transport, Srd, TangentVector};

/// Pivot norms below this mark a rank-deficient raw set.
const PIVOT_TOL: f64 = 1e-10;

/// The first `m` raw elements in the order
/// `[sqrt(3)(1-2t), sqrt(2) sin(2πt), sqrt(2) cos(2πt), sqrt(2) sin(4πt), ...]`.
fn raw_elements(m: usize, n_grid: usize) -> Vec<Vec<f64>> {
    let t = grid(n_grid);
    (0..m)
        .map(|j| {
            if j == 0 {
                return t.iter().map(|x| 3f64.sqrt() * (1.0 - 2.0 * x)).collect();
            }
            let l = j.div_ceil(2) as f64;
            if j % 2 == 1 {
                t.iter()
                    .map(|x| 2f64.sqrt() * (2.0 * PI * l * x).sin())
                    .collect()
            } else {
                t.iter()
                    .map(|x| 2f64.sqrt() * (2.0 * PI * l * x).cos())
                    .collect()
            }
        })
        .collect()
}

/// Raw (non-orthogonalized) basis of order `n`: `2n + 1` grid functions.
pub fn raw_basis(n: usize, n_grid: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return invalid("basis order must be positive");
    }
    if n_grid < 3 || 2 * n + 1 > n_grid - 1 {
        return invalid(format!(
            "basis order {n} needs 2n+1 = {} elements but a grid of {n_grid} points supports at most {}",
            2 * n + 1,
            n_grid.saturating_sub(1)
        ));
    }
    Ok(raw_elements(2 * n + 1, n_grid))
}

/// Basis size used when none is given: one less than the grid size.
pub fn default_basis_size(n_grid: usize) -> usize {
    n_grid - 1
}

/// Orthonormal set of tangent vectors sharing one basepoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrthonormalBasis {
    basepoint: Srd,
    elements: Vec<TangentVector>,
}

/// Coordinates of a tangent vector in an [`OrthonormalBasis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    values: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
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
}

/// Modified Gram-Schmidt (two passes) under the trapezoidal inner product.
/// Each raw element is first made orthogonal to the constant function, so
/// the output is tangent to the sphere at `psi ≡ 1`.
pub fn gram_schmidt(raw: &[Vec<f64>]) -> Result<OrthonormalBasis> {
    if raw.is_empty() {
        return invalid("empty raw basis");
    }
    let n = raw[0].len();
    let identity = Srd::identity(n);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(raw.len());
    for (index, r) in raw.iter().enumerate() {
        check_len(r.len(), n)?;
        let mut v = r.clone();
        for _pass in 0..2 {
            let a = inner(&v, identity.values());
            for x in v.iter_mut() {
                *x -= a;
            }
            for e in &out {
                let a = inner(&v, e);
                for (x, y) in v.iter_mut().zip(e) {
                    *x -= a * y;
                }
            }
        }
        let nv = norm(&v);
        if nv < PIVOT_TOL {
            return Err(AlignError::DegenerateBasis { index, norm: nv });
        }
        for x in v.iter_mut() {
            *x /= nv;
        }
        out.push(v);
    }
    Ok(OrthonormalBasis {
        basepoint: identity,
        elements: out.into_iter().map(TangentVector::new).collect(),
    })
}

impl OrthonormalBasis {
    /// Orthonormal basis of `m` elements at the identity on a grid of
    /// `n_grid` points. Requires `m <= n_grid - 1`.
    pub fn at_identity(m: usize, n_grid: usize) -> Result<Self> {
        if m == 0 || n_grid < 3 || m > n_grid - 1 {
            return invalid(format!(
                "basis size m = {m} must lie in 1..={} for a grid of {n_grid} points",
                n_grid.saturating_sub(1)
            ));
        }
        gram_schmidt(&raw_elements(m, n_grid))
    }

    pub fn basepoint(&self) -> &Srd {
        &self.basepoint
    }

    pub fn elements(&self) -> &[TangentVector] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn grid_len(&self) -> usize {
        self.basepoint.len()
    }

    /// Gram matrix under the trapezoidal inner product.
    pub fn gram(&self) -> Vec<Vec<f64>> {
        self.elements
            .iter()
            .map(|a| self.elements.iter().map(|b| a.dot(b)).collect())
            .collect()
    }

    /// Transports every element to `target` along the geodesic from the
    /// current basepoint.
    pub fn transport(&self, target: &Srd) -> Result<Self> {
        let elements = self
            .elements
            .iter()
            .map(|e| parallel_transport(e, &self.basepoint, target))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            basepoint: target.clone(),
            elements,
        })
    }

    /// Coordinates of a tangent vector at the basepoint.
    pub fn coordinates(&self, v: &TangentVector) -> Result<CoefficientVector> {
        check_len(v.len(), self.grid_len())?;
        Ok(CoefficientVector::new(
            self.elements.iter().map(|e| e.dot(v)).collect(),
        ))
    }

    /// Coordinates of `log_basepoint(psi)`.
    pub fn project(&self, psi: &Srd) -> Result<CoefficientVector> {
        self.coordinates(&log_map(&self.basepoint, psi)?)
    }

    /// `sum_k c_k b_k`.
    pub fn reconstruct(&self, c: &CoefficientVector) -> Result<TangentVector> {
        check_len(c.len(), self.len())?;
        let mut out = vec![0.0; self.grid_len()];
        for (ck, e) in c.values().iter().zip(&self.elements) {
            if *ck == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(e.values()) {
                *o += ck * x;
            }
        }
        Ok(TangentVector::new(out))
    }

    /// `exp_basepoint(sum_k c_k b_k)`.
    pub fn point(&self, c: &CoefficientVector) -> Result<Srd> {
        exp_map(&self.basepoint, &self.reconstruct(c)?)
    }
}

/// Free-function form of [`OrthonormalBasis::transport`].
pub fn transport_basis(basis: &OrthonormalBasis, target: &Srd) -> Result<OrthonormalBasis> {
    basis.transport(target)
}

pub fn project(psi: &Srd, basis: &OrthonormalBasis) -> Result<CoefficientVector> {
    basis.project(psi)
}

pub fn reconstruct(c: &CoefficientVector, basis: &OrthonormalBasis) -> Result<TangentVector> {
    basis.reconstruct(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::WarpingFunction;
    use crate::sphere::to_srd;

    fn max_gram_error(b: &OrthonormalBasis) -> f64 {
        let g = b.gram();
        let mut err: f64 = 0.0;
        for (i, row) in g.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((v - target).abs());
            }
        }
        err
    }

    #[test]
    fn raw_basis_shape_and_quadrature() {
        let raw = raw_basis(3, 100).unwrap();
        assert_eq!(raw.len(), 7);
        for r in &raw {
            assert!((norm(r) - 1.0).abs() < 2e-2);
            assert!(crate::function::trapz(r).abs() < 2e-2);
        }
        assert!(raw_basis(50, 100).is_err());
        assert!(raw_basis(49, 100).is_ok());
        assert!(raw_basis(0, 100).is_err());
    }

    #[test]
    fn first_element_is_linear() {
        let raw = raw_basis(2, 100).unwrap();
        let b = gram_schmidt(&raw).unwrap();
        let nr = norm(&raw[0]);
        for (x, y) in b.elements()[0].values().iter().zip(&raw[0]) {
            assert!((x - y / nr).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_schmidt_orthonormal_and_span_preserving() {
        let raw = raw_basis(49, 100).unwrap();
        let b = gram_schmidt(&raw).unwrap();
        assert_eq!(b.len(), 99);
        assert!(max_gram_error(&b) < 1e-6);
        for e in b.elements() {
            assert!(e.tangency(b.basepoint()).abs() < 1e-10);
        }
        // Each raw element is recovered from its coordinates.
        for r in &raw {
            let c = b.coordinates(&TangentVector::new(r.clone())).unwrap();
            let back = b.reconstruct(&c).unwrap();
            let resid: Vec<f64> = back.values().iter().zip(r).map(|(x, y)| x - y).collect();
            assert!(norm(&resid) < 1e-6);
        }
    }

    #[test]
    fn linear_sine_overlap_removed() {
        let n = 10_001;
        let raw = raw_basis(3, n).unwrap();
        for l in 1..=3usize {
            let overlap = inner(&raw[0], &raw[2 * l - 1]) / 6f64.sqrt();
            assert!((overlap - 1.0 / (PI * l as f64)).abs() < 1e-6);
        }
        let b = gram_schmidt(&raw).unwrap();
        assert!(b.elements()[0].dot(&b.elements()[1]).abs() < 1e-12);
    }

    #[test]
    fn degenerate_raw_set() {
        let raw = vec![
            vec![0.0, 1.0, 0.0, -1.0, 0.0],
            vec![0.0, 2.0, 0.0, -2.0, 0.0],
        ];
        assert!(matches!(
            gram_schmidt(&raw),
            Err(AlignError::DegenerateBasis { index: 1, .. })
        ));
        // sin at the Nyquist frequency vanishes on an odd grid.
        assert!(OrthonormalBasis::at_identity(50, 51).is_err());
        assert!(OrthonormalBasis::at_identity(100, 100).is_err());
    }

    #[test]
    fn transport_to_identity_is_noop() {
        let b = OrthonormalBasis::at_identity(9, 100).unwrap();
        let t = b.transport(&Srd::identity(100)).unwrap();
        for (x, y) in b.elements().iter().zip(t.elements()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn transport_preserves_gram_and_tangency() {
        let b = OrthonormalBasis::at_identity(21, 100).unwrap();
        let mu =
            to_srd(&WarpingFunction::from_fn(100, |t| t + 0.4 * t * (1.0 - t)).unwrap()).unwrap();
        let t = b.transport(&mu).unwrap();
        assert!(max_gram_error(&t) < 1e-8);
        for e in t.elements() {
            assert!(e.tangency(&mu).abs() < 1e-8);
        }
    }

    #[test]
    fn project_reconstruct_round_trip() {
        let b = OrthonormalBasis::at_identity(11, 100).unwrap();
        let mu =
            to_srd(&WarpingFunction::from_fn(100, |t| t - 0.3 * t * (1.0 - t)).unwrap()).unwrap();
        let bm = b.transport(&mu).unwrap();
        let c = CoefficientVector::new(
            (0..11)
                .map(|k| 0.05 * ((k as f64) - 4.0) / (k as f64 + 1.0))
                .collect(),
        );
        let psi = bm.point(&c).unwrap();
        let back = bm.project(&psi).unwrap();
        for (x, y) in back.values().iter().zip(c.values()) {
            assert!((x - y).abs() < 1e-6);
        }
        let v = bm.reconstruct(&c).unwrap();
        let parseval: f64 = c.values().iter().map(|x| x * x).sum();
        assert!((v.norm().powi(2) - parseval).abs() < 1e-6);
        assert!(bm
            .project(&mu)
            .unwrap()
            .values()
            .iter()
            .all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn reconstruct_unit_and_zero() {
        let b = OrthonormalBasis::at_identity(5, 50).unwrap();
        let z = b
            .reconstruct(&CoefficientVector::new(vec![0.0; 5]))
            .unwrap();
        assert!(z.values().iter().all(|x| *x == 0.0));
        let mut c = vec![0.0; 5];
        c[3] = 1.0;
        let e = b.reconstruct(&CoefficientVector::new(c)).unwrap();
        assert_eq!(&e, &b.elements()[3]);
        assert!(b
            .reconstruct(&CoefficientVector::new(vec![0.0; 4]))
            .is_err());
    }
}
