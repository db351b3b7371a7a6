//! Binary prediction-block files: a 16-byte header (8-byte magic, row count
//! and width as little-endian `u32`) followed by row-major little-endian
//! `f64` values.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::data::PredictionBlock;
use crate::error::{Result, StackError};

pub const MAGIC: &[u8; 8] = b"STKPRED1";
pub const HEADER_LEN: usize = 16;

pub fn encode(block: &PredictionBlock) -> Vec<u8> {
    let v = block.values();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * v.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(v.nrows() as u32).to_le_bytes());
    out.extend_from_slice(&(v.ncols() as u32).to_le_bytes());
    for x in v.iter() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<PredictionBlock> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(StackError::Format("missing prediction block header".into()));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != rows * width * 8 {
        return Err(StackError::Format(format!(
            "block declares {rows}x{width} but carries {} bytes",
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let arr = Array2::from_shape_vec((rows, width), values)
        .map_err(|e| StackError::Format(e.to_string()))?;
    Ok(PredictionBlock::from_array(arr))
}

pub fn write(path: &Path, block: &PredictionBlock) -> Result<()> {
    fs::write(path, encode(block)).map_err(|e| StackError::io(path, e))
}

pub fn read(path: &Path) -> Result<PredictionBlock> {
    let bytes = fs::read(path).map_err(|e| StackError::io(path, e))?;
    decode(&bytes)
}
