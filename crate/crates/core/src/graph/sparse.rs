use crate::error::{Error, Result};
use crate::ndiff::Tensor;

/// Compressed sparse row storage of a 0/1 matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Csr {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl Csr {
    /// Builds from `(row, col)` pairs. Duplicate pairs are collapsed.
    pub fn from_pairs(n_rows: usize, n_cols: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut pairs: Vec<(usize, usize)> = pairs.into_iter().collect();
        pairs.sort_unstable();
        pairs.dedup();
        let mut indptr = vec![0; n_rows + 1];
        for &(r, _) in &pairs {
            indptr[r + 1] += 1;
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            n_rows,
            n_cols,
            indptr,
            indices: pairs.into_iter().map(|(_, c)| c).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.indices[self.indptr[r]..self.indptr[r + 1]]
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.row(r).binary_search(&c).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.row(r).iter().map(move |&c| (r, c)))
    }

    /// `self * x` for a dense `x` with `n_cols` rows.
    pub fn spmm(&self, x: &Tensor) -> Result<Tensor> {
        if x.rows() != self.n_cols {
            return Err(Error::Shape {
                op: "spmm",
                left: [self.n_rows, self.n_cols],
                right: x.shape(),
            });
        }
        let mut out = Tensor::zeros(self.n_rows, x.cols());
        for r in 0..self.n_rows {
            let dst = out.row_mut(r);
            for &c in self.row(r) {
                for (d, s) in dst.iter_mut().zip(x.row(c)) {
                    *d += s;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spmm_sums_neighbours() {
        let a = Csr::from_pairs(3, 3, [(0, 1), (0, 2), (2, 0), (0, 1)]);
        assert_eq!(a.nnz(), 3);
        assert!(a.contains(0, 2) && !a.contains(1, 0));
        let x = Tensor::from_rows(&[vec![1.0], vec![10.0], vec![100.0]]).unwrap();
        let y = a.spmm(&x).unwrap();
        assert_eq!(y.data(), &[110.0, 0.0, 1.0]);
    }
}
