//! Eigendecomposition of symmetric matrices and the graph Fourier transform.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::DenseSymMatrix;

// Convergence threshold passed to the QR iteration; reconstruction stays well below 1e-10.
const EIGEN_TOLERANCE: f64 = f64::EPSILON;
const EIGEN_MAX_ITERATIONS: usize = 10_000;

/// `m = U diag(eigenvalues) U^T` with eigenvalues ascending and orthonormal columns in `U`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max)
    }

    /// `U diag(h(lambda_i)) U^T`.
    pub fn spectral_operator(&self, response: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(k).scale_mut(response(lam));
        }
        scaled * self.eigenvectors.transpose()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.spectral_operator(|l| l)
    }
}

/// Retries on `m + cI`. Blocks of exact zeros (isolated nodes) can stall the
/// relative deflation test; the shift leaves eigenvectors unchanged.
fn shifted_eigen(m: &DMatrix<f64>) -> Option<SymmetricEigen<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    let c = m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(1.0, f64::max);
    let shifted = m + DMatrix::identity(n, n) * c;
    let mut eig = SymmetricEigen::try_new(shifted, EIGEN_TOLERANCE, EIGEN_MAX_ITERATIONS)?;
    eig.eigenvalues.add_scalar_mut(-c);
    eig.eigenvalues.iter().all(|v| v.is_finite()).then_some(eig)
}

pub fn eigendecompose(m: &DenseSymMatrix) -> Result<SpectralDecomposition> {
    let n = m.dim();
    if n == 0 {
        return Err(Error::EmptyInput("cannot decompose a 0x0 matrix".into()));
    }
    let eig = SymmetricEigen::try_new(m.matrix().clone(), EIGEN_TOLERANCE, EIGEN_MAX_ITERATIONS)
        .filter(|e| e.eigenvalues.iter().all(|v| v.is_finite()))
        .or_else(|| shifted_eigen(m.matrix()))
        .ok_or(Error::EigenNonConvergence { dimension: n })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Graph Fourier transform `s = U^T x`.
pub fn gft(x: &DVector<f64>, d: &SpectralDecomposition) -> Result<DVector<f64>> {
    if x.len() != d.dim() {
        return Err(Error::dim("gft", d.dim(), x.len()));
    }
    Ok(d.eigenvectors.tr_mul(x))
}

/// Inverse transform `x = U s`.
pub fn igft(s: &DVector<f64>, d: &SpectralDecomposition) -> Result<DVector<f64>> {
    if s.len() != d.dim() {
        return Err(Error::dim("igft", d.dim(), s.len()));
    }
    Ok(&d.eigenvectors * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_laplacian, StaticGraph};

    #[test]
    fn two_node_spectrum() {
        let g = StaticGraph::unweighted(2, vec![(0, 1)]).unwrap();
        let d = eigendecompose(&build_laplacian(&g)).unwrap();
        assert!((d.eigenvalues()[0]).abs() < 1e-12);
        assert!((d.eigenvalues()[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_spectrum() {
        let g = StaticGraph::unweighted(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let d = eigendecompose(&build_laplacian(&g)).unwrap();
        let ev: Vec<f64> = d.eigenvalues().iter().copied().collect();
        assert!(ev[0].abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12 && (ev[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gft_of_zero_and_constant() {
        let g = StaticGraph::unweighted(4, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        let d = eigendecompose(&build_laplacian(&g)).unwrap();
        let s = gft(&DVector::zeros(4), &d).unwrap();
        assert!(s.iter().all(|v| *v == 0.0));
        let s = gft(&DVector::from_element(4, 1.5), &d).unwrap();
        assert!((s[0].abs() - 3.0).abs() < 1e-12);
        assert!(s.rows(1, 3).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gft_dimension_mismatch() {
        let g = StaticGraph::unweighted(2, vec![(0, 1)]).unwrap();
        let d = eigendecompose(&build_laplacian(&g)).unwrap();
        assert!(gft(&DVector::zeros(3), &d).is_err());
        assert!(igft(&DVector::zeros(1), &d).is_err());
    }

    #[test]
    fn sparse_graph_with_isolated_nodes() {
        let g = StaticGraph::new(
            24,
            vec![(2, 5), (7, 8), (9, 21), (9, 23), (21, 23)],
            vec![0.8245735121195977, 0.8673329847956918, 0.8301510110958554, 0.8232495133981407, 0.805962698224173],
        )
        .unwrap();
        let l = build_laplacian(&g);
        let d = eigendecompose(&l).unwrap();
        assert!((d.reconstruct() - l.matrix()).abs().max() < 1e-12);
        assert_eq!(d.eigenvalues().iter().filter(|v| v.abs() < 1e-9).count(), 20);
    }
}
