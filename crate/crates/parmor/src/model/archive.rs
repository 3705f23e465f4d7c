//! Model persistence.
//!
//! Full-order models are expensive enough to assemble that the experiment
//! driver caches them on disk. The format is a single JSON document holding
//! a versioned payload plus a SHA-256 checksum of the payload's canonical
//! serialization; loading re-serializes the parsed payload and compares, so
//! silent corruption (truncation, hand edits) is caught instead of producing
//! subtly wrong numbers. Floating-point values survive the round trip
//! exactly because the serializer emits shortest round-tripping decimals.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::InnerProduct;
use crate::sparse::CsrMatrix;

use super::{AffineOperator, LtiModel, OpMatrix};

const FORMAT: &str = "parmor-model/1";

#[derive(Serialize, Deserialize)]
struct SparseRecord {
    nrows: usize,
    ncols: usize,
    triplets: Vec<(usize, usize, f64)>,
}

#[derive(Serialize, Deserialize)]
struct DenseRecord {
    nrows: usize,
    ncols: usize,
    /// Column-major entries.
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
enum MatrixRecord {
    Sparse(SparseRecord),
    Dense(DenseRecord),
}

#[derive(Serialize, Deserialize)]
enum ProductRecord {
    Identity,
    Sparse(SparseRecord),
    Dense(DenseRecord),
}

#[derive(Serialize, Deserialize)]
struct Payload {
    format: String,
    e: MatrixRecord,
    a_constant: MatrixRecord,
    a_terms: Vec<MatrixRecord>,
    b: DenseRecord,
    c: DenseRecord,
    energy_product: ProductRecord,
}

#[derive(Serialize, Deserialize)]
struct Archive {
    payload: Payload,
    /// Hex SHA-256 of the JSON serialization of `payload`.
    checksum: String,
}

fn sparse_record(m: &CsrMatrix) -> SparseRecord {
    SparseRecord {
        nrows: m.nrows(),
        ncols: m.ncols(),
        triplets: m.triplet_iter().collect(),
    }
}

fn dense_record(m: &DMatrix<f64>) -> DenseRecord {
    DenseRecord {
        nrows: m.nrows(),
        ncols: m.ncols(),
        data: m.as_slice().to_vec(),
    }
}

fn matrix_record(m: &OpMatrix) -> MatrixRecord {
    match m {
        OpMatrix::Sparse(s) => MatrixRecord::Sparse(sparse_record(s)),
        OpMatrix::Dense(d) => MatrixRecord::Dense(dense_record(d)),
    }
}

fn restore_sparse(r: &SparseRecord) -> Result<CsrMatrix> {
    CsrMatrix::from_triplets(r.nrows, r.ncols, &r.triplets)
}

fn restore_dense(r: &DenseRecord) -> Result<DMatrix<f64>> {
    if r.data.len() != r.nrows * r.ncols {
        return Err(Error::Archive(format!(
            "dense block claims {} x {} but carries {} entries",
            r.nrows,
            r.ncols,
            r.data.len()
        )));
    }
    Ok(DMatrix::from_column_slice(r.nrows, r.ncols, &r.data))
}

fn restore_matrix(r: &MatrixRecord) -> Result<OpMatrix> {
    match r {
        MatrixRecord::Sparse(s) => Ok(OpMatrix::Sparse(restore_sparse(s)?)),
        MatrixRecord::Dense(d) => Ok(OpMatrix::Dense(restore_dense(d)?)),
    }
}

fn payload_checksum(payload: &Payload) -> Result<String> {
    let bytes = serde_json::to_vec(payload)
        .map_err(|e| Error::Archive(format!("payload serialization failed: {e}")))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Serializes a model to `path`.
pub fn save_model(model: &LtiModel, path: &Path) -> Result<()> {
    let payload = Payload {
        format: FORMAT.to_string(),
        e: matrix_record(model.e()),
        a_constant: matrix_record(model.a().constant_term()),
        a_terms: model.a().terms().iter().map(matrix_record).collect(),
        b: dense_record(model.b()),
        c: dense_record(model.c()),
        energy_product: match model.energy_product() {
            InnerProduct::Identity => ProductRecord::Identity,
            InnerProduct::Sparse(m) => ProductRecord::Sparse(sparse_record(m)),
            InnerProduct::Dense(m) => ProductRecord::Dense(dense_record(m)),
        },
    };
    let checksum = payload_checksum(&payload)?;
    let archive = Archive { payload, checksum };
    let text = serde_json::to_string(&archive)
        .map_err(|e| Error::Archive(format!("archive serialization failed: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Restores a model from `path`, verifying format version and checksum.
pub fn load_model(path: &Path) -> Result<LtiModel> {
    let text = std::fs::read_to_string(path)?;
    let archive: Archive = serde_json::from_str(&text)
        .map_err(|e| Error::Archive(format!("archive parse failed: {e}")))?;
    if archive.payload.format != FORMAT {
        return Err(Error::Archive(format!(
            "unsupported archive format {:?} (expected {FORMAT:?})",
            archive.payload.format
        )));
    }
    let expected = payload_checksum(&archive.payload)?;
    if expected != archive.checksum {
        return Err(Error::Archive(format!(
            "checksum mismatch: stored {}, computed {expected}",
            archive.checksum
        )));
    }
    let p = &archive.payload;
    let e = restore_matrix(&p.e)?;
    let a = AffineOperator::new(
        restore_matrix(&p.a_constant)?,
        p.a_terms.iter().map(restore_matrix).collect::<Result<Vec<_>>>()?,
    )?;
    let b = restore_dense(&p.b)?;
    let c = restore_dense(&p.c)?;
    let product = match &p.energy_product {
        ProductRecord::Identity => InnerProduct::Identity,
        ProductRecord::Sparse(m) => InnerProduct::sparse(restore_sparse(m)?)?,
        ProductRecord::Dense(m) => InnerProduct::dense(restore_dense(m)?)?,
    };
    LtiModel::new(e, a, b, c, product)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Parameter;

    fn sample_model() -> LtiModel {
        let a0 = CsrMatrix::from_triplets(2, 2, &[(0, 0, -1.5), (1, 1, -2.25)]).unwrap();
        let a1 = CsrMatrix::from_triplets(2, 2, &[(0, 1, 0.125), (1, 0, 0.1)]).unwrap();
        let m = CsrMatrix::from_diagonal(&[2.0, 3.0]);
        LtiModel::new(
            OpMatrix::Sparse(CsrMatrix::scaled_identity(2, 0.01)),
            AffineOperator::new(OpMatrix::Sparse(a0), vec![OpMatrix::Sparse(a1)]).unwrap(),
            DMatrix::from_column_slice(2, 1, &[0.01, 0.01]),
            DMatrix::from_row_slice(1, 2, &[0.5, 0.5]),
            InnerProduct::sparse(m).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_preserves_model_exactly() {
        let dir = std::env::temp_dir().join("parmor-archive-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        let model = sample_model();
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.order(), model.order());
        assert_eq!(loaded.num_params(), 1);
        let mu = Parameter::new(vec![0.7]).unwrap();
        let a1 = model.eval_a(&mu).unwrap().to_dense();
        let a2 = loaded.eval_a(&mu).unwrap().to_dense();
        assert_eq!(a1, a2, "affine evaluation must round-trip bit-exactly");
        assert_eq!(model.b(), loaded.b());
        assert_eq!(model.c(), loaded.c());
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn corrupted_archive_is_rejected() {
        let dir = std::env::temp_dir().join("parmor-archive-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("corrupt.json");
        save_model(&sample_model(), &path).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        // flip one digit inside the payload numbers
        let pos = text.find("-1.5").unwrap();
        text.replace_range(pos..pos + 4, "-1.6");
        std::fs::write(&path, text).unwrap();
        match load_model(&path) {
            Err(Error::Archive(msg)) => assert!(msg.contains("checksum")),
            other => panic!("expected checksum failure, got {other:?}"),
        }
        std::fs::remove_file(&path).unwrap();
    }
}
