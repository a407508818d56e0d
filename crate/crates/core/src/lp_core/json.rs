//! JSON matrix form:
//! `{"dim": N, "field": "real"|"complex", "layout": "dense"|"banded", "bandwidth": d,
//!   "entries": [...]}`.
//!
//! Dense entries are the `N*N` row-major grid. Banded entries are the `N` band
//! rows of width `2d+1`, row-major; slot `s` of row `n` is column `n - d + s`
//! and slots that fall outside the matrix hold 0. Complex scalars are `[re, im]`.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::error::LinalgError;
use super::matrix::{Mat, Storage};
use super::operator::TruncOperator;
use super::scalar::{Field, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JsonScalar {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Dense,
    Banded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDocument {
    pub dim: usize,
    pub field: Field,
    pub layout: Layout,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<usize>,
    pub entries: Vec<JsonScalar>,
}

impl Serialize for TruncOperator {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        to_document(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TruncOperator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = OperatorDocument::deserialize(d)?;
        from_document(&doc).map_err(serde::de::Error::custom)
    }
}

pub fn operator_to_json(u: &TruncOperator) -> String {
    serde_json::to_string(&to_document(u)).expect("finite matrix serializes")
}

pub fn operator_from_json(text: &str) -> Result<TruncOperator, LinalgError> {
    let doc: OperatorDocument =
        serde_json::from_str(text).map_err(|e| LinalgError::Malformed(e.to_string()))?;
    from_document(&doc)
}

fn encode<S: Scalar>(v: S, field: Field) -> JsonScalar {
    match field {
        Field::Real => JsonScalar::Real(v.to_complex().re),
        Field::Complex => {
            let c = v.to_complex();
            JsonScalar::Complex([c.re, c.im])
        }
    }
}

fn to_document(u: &TruncOperator) -> OperatorDocument {
    fn go<S: Scalar>(m: &Mat<S>, field: Field) -> OperatorDocument {
        let dim = m.dim();
        match m.storage() {
            Storage::Dense(a) => OperatorDocument {
                dim,
                field,
                layout: Layout::Dense,
                bandwidth: None,
                entries: a.iter().map(|&v| encode(v, field)).collect(),
            },
            Storage::Banded { bandwidth, band } => OperatorDocument {
                dim,
                field,
                layout: Layout::Banded,
                bandwidth: Some(*bandwidth),
                entries: band.iter().map(|&v| encode(v, field)).collect(),
            },
        }
    }
    match u {
        TruncOperator::Real(m) => go(m, Field::Real),
        TruncOperator::Complex(m) => go(m, Field::Complex),
    }
}

fn decode(v: JsonScalar, field: Field) -> Result<Complex64, LinalgError> {
    let c = match v {
        JsonScalar::Real(r) => Complex64::new(r, 0.0),
        JsonScalar::Complex([re, im]) => Complex64::new(re, im),
    };
    if field == Field::Real && c.im != 0.0 {
        return Err(LinalgError::FieldMismatch);
    }
    if !c.is_finite() {
        return Err(LinalgError::Malformed("non-finite entry".into()));
    }
    Ok(c)
}

fn from_document(doc: &OperatorDocument) -> Result<TruncOperator, LinalgError> {
    let dim = doc.dim;
    let values: Vec<Complex64> = doc
        .entries
        .iter()
        .map(|&v| decode(v, doc.field))
        .collect::<Result<_, _>>()?;
    let expected = |n: usize| {
        if values.len() == n {
            Ok(())
        } else {
            Err(LinalgError::Malformed(format!("expected {n} entries, found {}", values.len())))
        }
    };
    let complex: Mat<Complex64> = match doc.layout {
        Layout::Dense => {
            if doc.bandwidth.is_some() {
                return Err(LinalgError::Malformed("dense layout takes no bandwidth".into()));
            }
            expected(dim * dim)?;
            Mat::from_dense(Array2::from_shape_vec((dim, dim), values.clone()).expect("checked length"))?
        }
        Layout::Banded => {
            let d = doc
                .bandwidth
                .ok_or_else(|| LinalgError::Malformed("banded layout needs a bandwidth".into()))?;
            if dim > 0 && d >= dim {
                return Err(LinalgError::Malformed(format!("bandwidth {d} >= dim {dim}")));
            }
            let width = 2 * d + 1;
            expected(dim * width)?;
            for n in 0..dim {
                for s in 0..width {
                    let col = n as isize - d as isize + s as isize;
                    if (col < 0 || col >= dim as isize) && values[n * width + s] != Complex64::new(0.0, 0.0) {
                        return Err(LinalgError::Malformed(format!(
                            "nonzero padding slot {s} in band row {n}"
                        )));
                    }
                }
            }
            Mat::banded_from_fn(dim, d, |n, m| values[n * width + (m + d - n)])
        }
    };
    Ok(match doc.field {
        Field::Real => TruncOperator::Real(complex.map_entries(|v| v.re)),
        Field::Complex => TruncOperator::Complex(complex),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_real_document() {
        let text = r#"{"dim":2,"field":"real","layout":"dense","entries":[1,2,3,4]}"#;
        let u = operator_from_json(text).unwrap();
        assert_eq!(u.get(0, 1).re, 2.0);
        assert_eq!(u.get(1, 0).re, 3.0);
        assert_eq!(operator_to_json(&u), r#"{"dim":2,"field":"real","layout":"dense","entries":[1.0,2.0,3.0,4.0]}"#);
    }

    #[test]
    fn banded_complex_round_trip() {
        let u = TruncOperator::Complex(Mat::banded_from_fn(5, 1, |n, m| Complex64::new(n as f64, m as f64 - 0.5)));
        let back = operator_from_json(&operator_to_json(&u)).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn rejects_malformed() {
        assert!(operator_from_json(r#"{"dim":2,"field":"real","layout":"dense","entries":[1,2,3]}"#).is_err());
        assert_eq!(
            operator_from_json(r#"{"dim":1,"field":"real","layout":"dense","entries":[[1,2]]}"#),
            Err(LinalgError::FieldMismatch)
        );
        assert!(operator_from_json(r#"{"dim":2,"field":"real","layout":"banded","bandwidth":0,"entries":[1,2],"x":1}"#).is_err());
        // padding slot (row 0, column -1) must be zero
        assert!(operator_from_json(r#"{"dim":2,"field":"real","layout":"banded","bandwidth":1,"entries":[9,1,2,3,4,0]}"#).is_err());
    }
}
