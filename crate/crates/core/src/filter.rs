//! Spectral and polynomial graph filters for node and edge signals.
//!
//! An ideal band-limited filter keeps the eigen-components with
//! `lambda <= rho * lambda_max` (boundary included). The Chebyshev kind
//! approximates the same response with a polynomial `sum_p theta_p L^p`,
//! evaluated through iterated matrix-vector products.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DenseSymMatrix;
use crate::spectral::{eigendecompose, SpectralDecomposition};

pub const DEFAULT_CHEBYSHEV_ORDER: usize = 12;

/// Relative slack on the passband edge so that eigenvalues equal to the cutoff
/// up to round-off are kept.
const PASSBAND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum FilterKind {
    IdealBandLimited,
    /// `theta` holds monomial coefficients `theta_0..theta_order`; when absent they are
    /// fitted by least squares to the ideal response on the bound Laplacian's spectrum.
    Chebyshev {
        order: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub passband_fraction: f64,
}

impl FilterSpec {
    pub fn ideal_low_pass(rho: f64) -> Result<Self> {
        let f = FilterSpec {
            kind: FilterKind::IdealBandLimited,
            passband_fraction: rho,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn chebyshev_low_pass(rho: f64, order: usize) -> Result<Self> {
        let f = FilterSpec {
            kind: FilterKind::Chebyshev { order, theta: None },
            passband_fraction: rho,
        };
        f.validate()?;
        Ok(f)
    }

    /// A fixed polynomial `sum_p theta_p L^p`.
    pub fn polynomial(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidParameter("polynomial needs at least one coefficient".into()));
        }
        let f = FilterSpec {
            kind: FilterKind::Chebyshev {
                order: theta.len() - 1,
                theta: Some(theta),
            },
            passband_fraction: 1.0,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let rho = self.passband_fraction;
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidParameter(format!("passband fraction {rho} outside (0, 1]")));
        }
        if let FilterKind::Chebyshev { order, theta } = &self.kind {
            if *order == 0 && theta.is_none() {
                return Err(Error::InvalidParameter("chebyshev order must be positive".into()));
            }
            if let Some(t) = theta {
                if t.len() != order + 1 {
                    return Err(Error::dim("chebyshev coefficients", order + 1, t.len()));
                }
                if t.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("non-finite chebyshev coefficient".into()));
                }
            }
        }
        Ok(())
    }

    /// Ideal response `h(lambda)` for a spectrum whose largest eigenvalue is `lambda_max`.
    pub fn ideal_response(&self, lambda: f64, lambda_max: f64) -> f64 {
        let cutoff = self.passband_fraction * lambda_max;
        if lambda <= cutoff + PASSBAND_SLACK * lambda_max.abs().max(1.0) {
            1.0
        } else {
            0.0
        }
    }
}

/// Least-squares fit of the ideal response of `rho` over the eigenvalues of `d`,
/// returned as monomial coefficients `theta_0..theta_order` of `L`.
///
/// The fit is solved in the shifted Chebyshev basis `T_k(2 lambda / lambda_max - 1)`
/// and then expanded, which keeps the normal equations well conditioned.
pub fn fit_chebyshev(d: &SpectralDecomposition, rho: f64, order: usize) -> Result<Vec<f64>> {
    let lambda_max = d.lambda_max();
    let mut theta = vec![0.0; order + 1];
    if lambda_max <= 0.0 {
        // Zero Laplacian: every component is at lambda = 0 and passes.
        theta[0] = 1.0;
        return Ok(theta);
    }
    let spec = FilterSpec {
        kind: FilterKind::IdealBandLimited,
        passband_fraction: rho,
    };
    let n = d.dim();
    let mut basis = DMatrix::zeros(n, order + 1);
    let mut target = DVector::zeros(n);
    for (i, &lam) in d.eigenvalues().iter().enumerate() {
        let s = 2.0 * lam / lambda_max - 1.0;
        let (mut prev, mut cur) = (1.0, s);
        basis[(i, 0)] = 1.0;
        if order >= 1 {
            basis[(i, 1)] = s;
        }
        for k in 2..=order {
            let next = 2.0 * s * cur - prev;
            basis[(i, k)] = next;
            prev = cur;
            cur = next;
        }
        target[i] = spec.ideal_response(lam, lambda_max);
    }
    let svd = basis.svd(true, true);
    let coeffs = svd
        .solve(&target, 1e-12)
        .map_err(|e| Error::InvalidParameter(format!("chebyshev fit failed: {e}")))?;

    // Monomial coefficients of T_k(s) in s.
    let mut t_prev = vec![0.0; order + 1];
    let mut t_cur = vec![0.0; order + 1];
    t_prev[0] = 1.0;
    let mut in_s = vec![0.0; order + 1];
    in_s[0] += coeffs[0];
    if order >= 1 {
        t_cur[1] = 1.0;
        in_s[1] += coeffs[1];
    }
    for k in 2..=order {
        let mut next = vec![0.0; order + 1];
        for j in 0..order {
            next[j + 1] += 2.0 * t_cur[j];
        }
        for j in 0..=order {
            next[j] -= t_prev[j];
        }
        for j in 0..=order {
            in_s[j] += coeffs[k] * next[j];
        }
        t_prev = std::mem::replace(&mut t_cur, next);
    }

    // Substitute s = a*lambda - 1 with a = 2 / lambda_max.
    let a = 2.0 / lambda_max;
    for (j, &c) in in_s.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let mut binom = 1.0;
        for (p, t) in theta.iter_mut().enumerate().take(j + 1) {
            let sign = if (j - p) % 2 == 0 { 1.0 } else { -1.0 };
            *t += c * binom * sign * a.powi(p as i32);
            binom = binom * (j - p) as f64 / (p + 1) as f64;
        }
    }
    Ok(theta)
}

/// `sum_p theta_p L^p x` with `x^(p+1) = L x^(p)`.
pub fn polynomial_apply(l: &DenseSymMatrix, theta: &[f64], x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != l.dim() {
        return Err(Error::dim("polynomial filter", l.dim(), x.len()));
    }
    let mut acc = x * theta.first().copied().unwrap_or(0.0);
    let mut power = x.clone();
    for &t in theta.iter().skip(1) {
        power = l.matrix() * &power;
        acc.axpy(t, &power, 1.0);
    }
    Ok(acc)
}

pub fn polynomial_response(theta: &[f64], lambda: f64) -> f64 {
    theta.iter().rev().fold(0.0, |acc, &t| acc * lambda + t)
}

/// A filter bound to one Laplacian, ready for repeated application.
#[derive(Debug, Clone)]
pub enum BoundFilter {
    /// Materialized `U Sigma_F U^T`.
    Spectral {
        operator: DMatrix<f64>,
        decomposition: SpectralDecomposition,
        response: Vec<f64>,
    },
    Polynomial {
        laplacian: DenseSymMatrix,
        theta: Vec<f64>,
        decomposition: Option<SpectralDecomposition>,
    },
}

impl BoundFilter {
    pub fn bind(l: &DenseSymMatrix, f: &FilterSpec) -> Result<Self> {
        f.validate()?;
        match &f.kind {
            FilterKind::IdealBandLimited => {
                let d = eigendecompose(l)?;
                Ok(Self::ideal_from_decomposition(d, f))
            }
            FilterKind::Chebyshev { order, theta } => {
                let (theta, decomposition) = match theta {
                    Some(t) => (t.clone(), None),
                    None => {
                        let d = eigendecompose(l)?;
                        (fit_chebyshev(&d, f.passband_fraction, *order)?, Some(d))
                    }
                };
                Ok(BoundFilter::Polynomial {
                    laplacian: l.clone(),
                    theta,
                    decomposition,
                })
            }
        }
    }

    pub fn ideal_from_decomposition(d: SpectralDecomposition, f: &FilterSpec) -> Self {
        let lambda_max = d.lambda_max();
        let response: Vec<f64> = d
            .eigenvalues()
            .iter()
            .map(|&l| f.ideal_response(l, lambda_max))
            .collect();
        let mut scaled = d.eigenvectors().clone();
        for (k, &h) in response.iter().enumerate() {
            scaled.column_mut(k).scale_mut(h);
        }
        let operator = scaled * d.eigenvectors().transpose();
        BoundFilter::Spectral {
            operator,
            decomposition: d,
            response,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BoundFilter::Spectral { operator, .. } => operator.nrows(),
            BoundFilter::Polynomial { laplacian, .. } => laplacian.dim(),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            BoundFilter::Spectral { operator, .. } => {
                if x.len() != operator.nrows() {
                    return Err(Error::dim("spectral filter", operator.nrows(), x.len()));
                }
                Ok(operator * x)
            }
            BoundFilter::Polynomial { laplacian, theta, .. } => polynomial_apply(laplacian, theta, x),
        }
    }

    /// Decomposition of the bound Laplacian, computing it if the filter did not need one.
    pub fn decomposition(&self) -> Result<SpectralDecomposition> {
        match self {
            BoundFilter::Spectral { decomposition, .. } => Ok(decomposition.clone()),
            BoundFilter::Polynomial {
                decomposition: Some(d),
                ..
            } => Ok(d.clone()),
            BoundFilter::Polynomial { laplacian, .. } => eigendecompose(laplacian),
        }
    }

    /// Frequency response `h(lambda_i)` on the bound spectrum, paired with the decomposition.
    pub fn spectral_response(&self) -> Result<(SpectralDecomposition, Vec<f64>)> {
        match self {
            BoundFilter::Spectral {
                decomposition,
                response,
                ..
            } => Ok((decomposition.clone(), response.clone())),
            BoundFilter::Polynomial { theta, .. } => {
                let d = self.decomposition()?;
                let h = d.eigenvalues().iter().map(|&l| polynomial_response(theta, l)).collect();
                Ok((d, h))
            }
        }
    }
}

pub fn apply_filter(x: &DVector<f64>, l: &DenseSymMatrix, f: &FilterSpec) -> Result<DVector<f64>> {
    if x.len() != l.dim() {
        return Err(Error::dim("node filter", l.dim(), x.len()));
    }
    BoundFilter::bind(l, f)?.apply(x)
}

/// Filters an edge signal with the Hodge-1 Laplacian `l1`.
pub fn apply_edge_filter(w: &DVector<f64>, l1: &DenseSymMatrix, f: &FilterSpec) -> Result<DVector<f64>> {
    if w.len() != l1.dim() {
        return Err(Error::dim("edge filter", l1.dim(), w.len()));
    }
    BoundFilter::bind(l1, f)?.apply(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_laplacian, hodge1_laplacian, incidence, StaticGraph};

    fn path4() -> StaticGraph {
        StaticGraph::new(4, vec![(0, 1), (1, 2), (2, 3)], vec![1.0, 0.5, 2.0]).unwrap()
    }

    #[test]
    fn all_pass_is_identity() {
        let l = build_laplacian(&path4());
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let y = apply_filter(&x, &l, &FilterSpec::ideal_low_pass(1.0).unwrap()).unwrap();
        assert!((y - &x).norm() < 1e-12);
    }

    #[test]
    fn constant_passes_any_low_pass() {
        let l = build_laplacian(&path4());
        let x = DVector::from_element(4, 2.5);
        for rho in [0.01, 0.4, 0.9] {
            let y = apply_filter(&x, &l, &FilterSpec::ideal_low_pass(rho).unwrap()).unwrap();
            assert!((y - &x).norm() < 1e-12);
        }
    }

    #[test]
    fn linear_polynomial_is_laplacian_product() {
        let l = build_laplacian(&path4());
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let y = apply_filter(&x, &l, &FilterSpec::polynomial(vec![0.0, 1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(y, l.matrix() * &x);
    }

    #[test]
    fn fitted_polynomial_reproduces_few_distinct_eigenvalues() {
        // Triangle: spectrum {0, 3, 3} has two distinct values, so an order-2 fit is exact.
        let g = StaticGraph::unweighted(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let d = eigendecompose(&build_laplacian(&g)).unwrap();
        let theta = fit_chebyshev(&d, 0.4, 2).unwrap();
        assert!((polynomial_response(&theta, 0.0) - 1.0).abs() < 1e-10);
        assert!(polynomial_response(&theta, 3.0).abs() < 1e-10);
    }

    #[test]
    fn edge_filter_zero_and_all_pass() {
        let g = path4();
        let l1 = hodge1_laplacian(&incidence(&g), g.weights()).unwrap();
        let f = FilterSpec::ideal_low_pass(1.0).unwrap();
        let zero = apply_edge_filter(&DVector::zeros(3), &l1, &f).unwrap();
        assert!(zero.iter().all(|v| v.abs() < 1e-15));
        let w = DVector::from_vec(vec![0.3, 0.1, 0.9]);
        assert!((apply_edge_filter(&w, &l1, &f).unwrap() - &w).norm() < 1e-12);
        assert!(apply_edge_filter(&DVector::zeros(4), &l1, &f).is_err());
    }

    #[test]
    fn validation() {
        assert!(FilterSpec::ideal_low_pass(0.0).is_err());
        assert!(FilterSpec::ideal_low_pass(1.5).is_err());
        let bad = FilterSpec {
            kind: FilterKind::Chebyshev {
                order: 3,
                theta: Some(vec![1.0]),
            },
            passband_fraction: 0.5,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_laplacian_passes_everything() {
        let l = DenseSymMatrix::zeros(3);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        for f in [
            FilterSpec::ideal_low_pass(0.4).unwrap(),
            FilterSpec::chebyshev_low_pass(0.4, 12).unwrap(),
        ] {
            assert!((apply_filter(&x, &l, &f).unwrap() - &x).norm() < 1e-12);
        }
    }
}
