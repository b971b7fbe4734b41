//! JSON representation of dense matrices: explicit dimensions plus a
//! row-major data array.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::dimension(
                "matrix data length",
                format!("{}*{} = {}", self.rows, self.cols, self.rows * self.cols),
                self.data.len(),
            ));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

impl From<&DMatrix<f64>> for DenseMatrix {
    fn from(m: &DMatrix<f64>) -> Self {
        let data = m.transpose().as_slice().to_vec();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

/// Serde adapter for `DMatrix<f64>` fields.
pub(crate) mod serde_dense {
    use super::DenseMatrix;
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        DenseMatrix::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        DenseMatrix::deserialize(d)?
            .to_matrix()
            .map_err(D::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
            m.as_ref().map(DenseMatrix::from).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> Result<Option<DMatrix<f64>>, D::Error> {
            Option::<DenseMatrix>::deserialize(d)?
                .map(|m| m.to_matrix().map_err(D::Error::custom))
                .transpose()
        }
    }
}
