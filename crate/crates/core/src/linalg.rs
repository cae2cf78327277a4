use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ordinary least squares solution for a full-rank design.
#[derive(Debug, Clone)]
pub(crate) struct LeastSquares {
    pub coefficients: DVector<f64>,
    /// `(X'X)^{-1}`
    pub xtx_inv: DMatrix<f64>,
    pub rss: f64,
    pub fitted: DVector<f64>,
}

/// Solves `min ||y - X b||` by Householder QR.
pub(crate) fn least_squares(design: DMatrix<f64>, response: &DVector<f64>) -> Result<LeastSquares> {
    let (n, p) = design.shape();
    if n < p {
        return Err(Error::Degenerate(format!("{n} observations for {p} parameters")));
    }
    let qr = design.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= scale * 1e-12) {
        return Err(Error::Degenerate("rank-deficient design".into()));
    }
    let qty = qr.q().transpose() * response;
    let coefficients = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Degenerate("singular triangular factor".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::Degenerate("singular triangular factor".into()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let fitted = &design * &coefficients;
    let rss = (response - &fitted).norm_squared();
    Ok(LeastSquares {
        coefficients,
        xtx_inv,
        rss,
        fitted,
    })
}
