//! Nullspace structure of the Laplacian.
//!
//! In canonical coordinates the kernel of `L` is spanned by the columns of
//!
//! ```text
//! [ beta_1  beta_2  ...  beta_k ]
//! [ 1_M1    0       ...  0      ]
//! [ 0       1_M2    ...  0      ]
//! [ ...                         ]
//! [ 0       0       ...  1_Mk   ]
//! ```
//!
//! with `beta_i = -L0^{-1} L0i 1_Mi`. Every row of `beta` is a convex
//! combination weight vector: non-basic agent `j` ends up at
//! `sum_i beta[j][i] * y_s^i`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{CanonicalLaplacian, LaplacianMatrix};
use crate::linalg;

/// Entries in `(-NEG_CLAMP, 0)` are treated as zero; anything below is a bug.
pub const NEG_CLAMP: f64 = 1e-12;
/// Gamma entries strictly above this are in the support.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Maximum accepted residual of the `L0 beta_i = -L0i 1` solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelStructure {
    beta: DMatrix<f64>,
    kernel_basis: DMatrix<f64>,
    block_sizes: Vec<usize>,
}

impl KernelStructure {
    pub fn compute(c: &CanonicalLaplacian) -> Result<Self> {
        let beta = beta_coefficients(c)?;
        let kernel_basis = kernel_basis(&beta, c.block_sizes());
        Ok(Self {
            beta,
            kernel_basis,
            block_sizes: c.block_sizes().to_vec(),
        })
    }

    /// `M0 x k`; row `j` belongs to the non-basic node at canonical position `j`.
    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    /// `n x k` in canonical order.
    pub fn kernel_basis(&self) -> &DMatrix<f64> {
        &self.kernel_basis
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn k(&self) -> usize {
        self.block_sizes.len() - 1
    }

    pub fn mixing_matrix(&self) -> DMatrix<f64> {
        mixing_matrix(&self.beta, &self.block_sizes)
    }
}

/// Solves `L0 beta_i = -L0i 1_Mi` for every basic bicomponent `i`.
pub fn beta_coefficients(c: &CanonicalLaplacian) -> Result<DMatrix<f64>> {
    let m0 = c.m0();
    let k = c.k();
    if m0 == 0 {
        return Ok(DMatrix::zeros(0, k));
    }
    let l0 = c.l0().into_owned();
    let mut rhs = DMatrix::zeros(m0, k);
    for i in 0..k {
        let row_sums = c.l0i(i).column_sum();
        rhs.set_column(i, &(-row_sums));
    }
    let lu = l0.clone().lu();
    let mut beta = lu.solve(&rhs).ok_or_else(|| {
        Error::Structural("grounded laplacian L0 is singular".into())
    })?;

    let residual = linalg::matrix_inf_norm(&(&l0 * &beta - &rhs));
    if !residual.is_finite() || residual > SOLVE_RESIDUAL_TOL {
        return Err(Error::Structural(format!(
            "beta solve residual {residual:e} exceeds {SOLVE_RESIDUAL_TOL:e}"
        )));
    }
    for j in 0..m0 {
        for i in 0..k {
            let b = &mut beta[(j, i)];
            if *b < -NEG_CLAMP {
                return Err(Error::Structural(format!(
                    "beta[{j}][{i}] = {b:e} is negative"
                )));
            }
            if *b < 0.0 {
                *b = 0.0;
            }
        }
    }
    Ok(beta)
}

/// Stacks `beta` over `blockdiag(1_M1, ..., 1_Mk)`.
pub fn kernel_basis(beta: &DMatrix<f64>, block_sizes: &[usize]) -> DMatrix<f64> {
    let m0 = block_sizes[0];
    let k = block_sizes.len() - 1;
    let n: usize = block_sizes.iter().sum();
    let mut basis = DMatrix::zeros(n, k);
    basis.view_mut((0, 0), (m0, k)).copy_from(beta);
    let mut off = m0;
    for (i, &mi) in block_sizes[1..].iter().enumerate() {
        basis.view_mut((off, i), (mi, 1)).fill(1.0);
        off += mi;
    }
    basis
}

/// Row `j` concatenates the blocks `beta[j][i] / Mi * 1_Mi^T`.
pub fn mixing_matrix(beta: &DMatrix<f64>, block_sizes: &[usize]) -> DMatrix<f64> {
    let m0 = block_sizes[0];
    let width: usize = block_sizes[1..].iter().sum();
    let mut b = DMatrix::zeros(m0, width);
    for j in 0..m0 {
        let mut off = 0;
        for (i, &mi) in block_sizes[1..].iter().enumerate() {
            let v = beta[(j, i)] / mi as f64;
            b.view_mut((j, off), (1, mi)).fill(v);
            off += mi;
        }
    }
    b
}

/// Restriction of `L` to the support of the `i`-th kernel column, rescaled
/// by the kernel entries so that it becomes an ordinary Laplacian again.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledReduction {
    pub bicomponent_index: usize,
    /// Canonical positions in the support.
    pub support_positions: Vec<usize>,
    /// Original node indices in the support, same order.
    pub support: Vec<usize>,
    /// Diagonal of `Gamma`.
    pub gamma: DVector<f64>,
    /// `L` restricted to the support, before scaling.
    pub restricted: DMatrix<f64>,
    /// `Gamma^{-1} Li Gamma`.
    pub reduced: DMatrix<f64>,
}

impl ScaledReduction {
    pub fn rank(&self) -> usize {
        linalg::rank(&self.reduced)
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    pub fn max_row_sum(&self) -> f64 {
        self.reduced
            .row_iter()
            .map(|r| r.sum().abs())
            .fold(0.0, f64::max)
    }

    /// Reduced matrix as a validated Laplacian.
    pub fn reduced_laplacian(&self) -> Result<LaplacianMatrix> {
        LaplacianMatrix::from_matrix(self.reduced.clone())
    }
}

/// Builds the scaled reduction for basic bicomponent `i` (zero-based).
pub fn scaled_reduction(
    c: &CanonicalLaplacian,
    ks: &KernelStructure,
    i: usize,
) -> Result<ScaledReduction> {
    if i >= ks.k() {
        return Err(Error::validation(format!(
            "bicomponent index {i} out of range 0..{}",
            ks.k()
        )));
    }
    let col = ks.kernel_basis().column(i);
    let support_positions: Vec<usize> = (0..col.len()).filter(|&v| col[v] > SUPPORT_TOL).collect();
    let gamma = DVector::from_iterator(
        support_positions.len(),
        support_positions.iter().map(|&v| col[v]),
    );
    if let Some(bad) = gamma.iter().find(|&&g| g <= SUPPORT_TOL) {
        return Err(Error::Structural(format!(
            "support entry {bad:e} of kernel column {i} is not positive"
        )));
    }
    let l = c.matrix();
    let ni = support_positions.len();
    let restricted = DMatrix::from_fn(ni, ni, |a, b| {
        l[(support_positions[a], support_positions[b])]
    });
    let reduced = DMatrix::from_fn(ni, ni, |a, b| restricted[(a, b)] * gamma[b] / gamma[a]);
    let support = support_positions.iter().map(|&v| c.order()[v]).collect();
    Ok(ScaledReduction {
        bicomponent_index: i,
        support_positions,
        support,
        gamma,
        restricted,
        reduced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{canonical_laplacian, decompose_bicomponents, DirectedWeightedGraph};

    fn canonical(n: usize, edges: &[(usize, usize, f64)]) -> CanonicalLaplacian {
        let g = DirectedWeightedGraph::from_edges(n, edges).unwrap();
        let d = decompose_bicomponents(&g);
        canonical_laplacian(&g.laplacian(), &d)
    }

    fn hub() -> CanonicalLaplacian {
        canonical(3, &[(0, 2, 1.0), (1, 2, 3.0)])
    }

    #[test]
    fn beta_hub() {
        let b = beta_coefficients(&hub()).unwrap();
        assert_eq!(b.shape(), (1, 2));
        assert!((b[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((b[(0, 1)] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn beta_chain_and_symmetric_sink() {
        let b = beta_coefficients(&canonical(2, &[(0, 1, 1.0)])).unwrap();
        assert_eq!(b, DMatrix::from_element(1, 1, 1.0));
        let b = beta_coefficients(&canonical(3, &[(0, 2, 2.0), (1, 2, 2.0)])).unwrap();
        assert_eq!(b.row(0).iter().copied().collect::<Vec<_>>(), vec![0.5, 0.5]);
    }

    #[test]
    fn beta_empty_when_no_nonbasic_nodes() {
        let b = beta_coefficients(&canonical(2, &[])).unwrap();
        assert_eq!(b.shape(), (0, 2));
    }

    #[test]
    fn kernel_basis_examples() {
        let c = canonical(2, &[(0, 1, 1.0)]);
        let ks = KernelStructure::compute(&c).unwrap();
        assert_eq!(*ks.kernel_basis(), DMatrix::from_element(2, 1, 1.0));

        let c = hub();
        let ks = KernelStructure::compute(&c).unwrap();
        let expected = DMatrix::from_row_slice(3, 2, &[0.25, 0.75, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(*ks.kernel_basis(), expected);
        assert!(linalg::matrix_inf_norm(&(c.matrix() * ks.kernel_basis())) < 1e-15);

        let ks = KernelStructure::compute(&canonical(2, &[])).unwrap();
        assert_eq!(*ks.kernel_basis(), DMatrix::identity(2, 2));
    }

    #[test]
    fn mixing_matrix_examples() {
        let ks = KernelStructure::compute(&hub()).unwrap();
        assert_eq!(ks.mixing_matrix(), DMatrix::from_row_slice(1, 2, &[0.25, 0.75]));

        let ks = KernelStructure::compute(&canonical(2, &[(0, 1, 1.0)])).unwrap();
        assert_eq!(ks.mixing_matrix(), DMatrix::from_element(1, 1, 1.0));

        // two 2-cycles feeding one sink with equal weight
        let c = canonical(
            5,
            &[
                (0, 1, 1.0),
                (1, 0, 1.0),
                (2, 3, 1.0),
                (3, 2, 1.0),
                (0, 4, 1.0),
                (2, 4, 1.0),
            ],
        );
        let ks = KernelStructure::compute(&c).unwrap();
        assert_eq!(ks.beta().row(0).iter().copied().collect::<Vec<_>>(), vec![0.5, 0.5]);
        let b = ks.mixing_matrix();
        assert_eq!(b, DMatrix::from_row_slice(1, 4, &[0.25; 4]));
        // ker L in ker [-I B]
        for col in ks.kernel_basis().column_iter() {
            let v0 = col.rows(0, 1);
            let vb = col.rows(1, 4);
            assert!(((&b * vb) - v0).amax() < 1e-9);
        }
    }

    #[test]
    fn scaled_reduction_hub() {
        let c = hub();
        let ks = KernelStructure::compute(&c).unwrap();
        let r = scaled_reduction(&c, &ks, 0).unwrap();
        assert_eq!(r.support, vec![2, 0]);
        assert_eq!(r.gamma.as_slice(), &[0.25, 1.0]);
        assert_eq!(r.restricted, DMatrix::from_row_slice(2, 2, &[4.0, -1.0, 0.0, 0.0]));
        assert_eq!(r.reduced, DMatrix::from_row_slice(2, 2, &[4.0, -4.0, 0.0, 0.0]));
        assert_eq!(r.rank(), 1);
        assert_eq!(r.max_row_sum(), 0.0);
        assert!(r.reduced_laplacian().is_ok());
    }

    #[test]
    fn scaled_reduction_chain_and_no_nonbasic() {
        let c = canonical(2, &[(0, 1, 1.0)]);
        let ks = KernelStructure::compute(&c).unwrap();
        let r = scaled_reduction(&c, &ks, 0).unwrap();
        assert_eq!(r.support, vec![1, 0]);
        assert_eq!(r.gamma.as_slice(), &[1.0, 1.0]);
        assert_eq!(r.reduced, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 0.0]));

        let c = canonical(3, &[(0, 1, 1.0), (1, 0, 2.0)]);
        let ks = KernelStructure::compute(&c).unwrap();
        let r = scaled_reduction(&c, &ks, 0).unwrap();
        assert_eq!(r.support, vec![0, 1]);
        assert_eq!(r.reduced, c.li(0).into_owned());
        assert!(scaled_reduction(&c, &ks, 2).is_err());
    }
}
