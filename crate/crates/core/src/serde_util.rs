//! Serde adapters mapping `nalgebra` types to the JSON schema: matrices as
//! row-major arrays of arrays, vectors as flat arrays.

pub mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::de::Error as DeError;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(rows).map_err(D::Error::custom)
    }

    pub(crate) fn from_rows(rows: Vec<Vec<f64>>) -> Result<DMatrix<f64>, String> {
        if rows.is_empty() {
            return Err("matrix must have at least one row".into());
        }
        let ncols = rows[0].len();
        if ncols == 0 {
            return Err("matrix must have at least one column".into());
        }
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("matrix rows must all have the same length".into());
        }
        let nrows = rows.len();
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }
}

pub mod matrix_rows_opt {
    use nalgebra::DMatrix;
    use serde::de::Error as DeError;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Option<Vec<Vec<f64>>> = m.as_ref().map(|m| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect()
        });
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<DMatrix<f64>>, D::Error> {
        match Option::<Vec<Vec<f64>>>::deserialize(d)? {
            None => Ok(None),
            Some(rows) => super::matrix_rows::from_rows(rows)
                .map(Some)
                .map_err(D::Error::custom),
        }
    }
}

pub mod vector {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

pub mod vector_opt {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<DVector<f64>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(|v| v.as_slice().to_vec()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Option<DVector<f64>>, D::Error> {
        Ok(Option::<Vec<f64>>::deserialize(d)?.map(DVector::from_vec))
    }
}
