use super::{DiffError, Scalar};

/// Flat row-major tensor. Only rank 1 and rank 2 are used in this crate.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S: Scalar> {
    shape: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    /// Builds a tensor, checking that the shape matches the data length and
    /// that every entry is finite.
    pub fn new(shape: Vec<usize>, data: Vec<S>) -> Result<Self, DiffError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(DiffError::Dimension {
                context: "Tensor::new",
                expected,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(DiffError::NonFinite {
                context: "Tensor::new",
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![S::zero(); n],
        }
    }

    /// Rank-1 tensor from a vector.
    pub fn vector(data: Vec<S>) -> Result<Self, DiffError> {
        let n = data.len();
        Self::new(vec![n], data)
    }

    /// Rank-2 tensor from row-major data.
    pub fn matrix(rows: usize, cols: usize, data: Vec<S>) -> Result<Self, DiffError> {
        Self::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Size of the trailing dimension.
    pub fn last_dim(&self) -> usize {
        *self.shape.last().unwrap_or(&0)
    }

    /// Number of rows when the tensor is viewed as a batch: a rank-1 tensor
    /// is one row, a rank-2 tensor is `shape[0]` rows.
    pub fn n_rows(&self) -> usize {
        match self.shape.len() {
            1 => 1,
            2 => self.shape[0],
            _ => panic!("tensors of rank > 2 are not supported"),
        }
    }

    pub fn row(&self, i: usize) -> &[S] {
        let d = self.last_dim();
        &self.data[i * d..(i + 1) * d]
    }

    /// Rebuilds a tensor with the same rank convention as `self` but a new
    /// trailing dimension.
    pub(crate) fn with_rows(&self, new_dim: usize, data: Vec<S>) -> Tensor<S> {
        let shape = match self.shape.len() {
            1 => vec![new_dim],
            _ => vec![self.shape[0], new_dim],
        };
        Tensor { shape, data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_product_must_match_len() {
        let err = Tensor::<f64>::new(vec![2, 3], vec![0.0; 5]).unwrap_err();
        assert!(matches!(err, DiffError::Dimension { expected: 6, actual: 5, .. }));
    }

    #[test]
    fn non_finite_entries_rejected() {
        let err = Tensor::new(vec![2], vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, DiffError::NonFinite { .. }));
    }

    #[test]
    fn row_views() {
        let t = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.row(1), &[4.0, 5.0, 6.0]);
        let v = Tensor::vector(vec![7.0, 8.0]).unwrap();
        assert_eq!(v.n_rows(), 1);
        assert_eq!(v.row(0), &[7.0, 8.0]);
    }
}
