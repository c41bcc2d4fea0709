//! JSON Kraus-set files.
//!
//! `{"dim": 3, "operators": [ [ [[re,im], ...], ...rows ], ... ]}` with each
//! operator a row-major list of `[re, im]` pairs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ChannelError, KrausSet};
use crate::densemath::{Complex, Matrix};

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("operator {op}: {message}")]
    Shape { op: usize, message: String },
    #[error("operator {op} entry ({row}, {col}) is not finite")]
    NonFinite { op: usize, row: usize, col: usize },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Serialize, Deserialize)]
struct KrausFile {
    dim: usize,
    operators: Vec<Vec<Vec<[f64; 2]>>>,
}

pub fn parse_kraus_set(text: &str) -> Result<KrausSet, JsonError> {
    let file: KrausFile = serde_json::from_str(text).map_err(|e| JsonError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let d = file.dim;
    let mut mats = Vec::with_capacity(file.operators.len());
    for (op, rows) in file.operators.iter().enumerate() {
        if rows.len() != d {
            return Err(JsonError::Shape {
                op,
                message: format!("{} rows, expected {d}", rows.len()),
            });
        }
        let mut data = Vec::with_capacity(d * d);
        for (row, entries) in rows.iter().enumerate() {
            if entries.len() != d {
                return Err(JsonError::Shape {
                    op,
                    message: format!("row {row} has {} entries, expected {d}", entries.len()),
                });
            }
            for (col, &[re, im]) in entries.iter().enumerate() {
                if !re.is_finite() || !im.is_finite() {
                    return Err(JsonError::NonFinite { op, row, col });
                }
                data.push(Complex::new(re, im));
            }
        }
        mats.push(Matrix::new(d, d, data).map_err(ChannelError::from)?);
    }
    Ok(KrausSet::from_matrices(d, mats)?)
}

pub fn to_json(s: &KrausSet) -> String {
    let d = s.dim();
    let file = KrausFile {
        dim: d,
        operators: s
            .ops()
            .iter()
            .map(|k| {
                (0..d)
                    .map(|r| (0..d).map(|c| [k.matrix()[(r, c)].re, k.matrix()[(r, c)].im]).collect())
                    .collect()
            })
            .collect(),
    };
    serde_json::to_string(&file).expect("plain data serializes")
}
