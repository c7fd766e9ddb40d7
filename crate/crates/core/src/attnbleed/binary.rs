//! Compact little-endian attention export.
//!
//! ```text
//! magic "CSAT" | version u32 | record count u32
//! per record:
//!   id length u32 | id bytes (UTF-8)
//!   L u32 | H u32 | src_len u32 | tgt_len u32 | src_boundary u32 | tgt_boundary u32
//!   L*H*tgt_len*src_len f32 weights, row-major [layer][head][tgt][src]
//! ```

use std::io::{Cursor, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::AttentionRecord;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CSAT";
pub const VERSION: u32 = 1;

fn truncated(e: std::io::Error) -> Error {
    Error::Shape(format!("truncated binary attention file: {e}"))
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Shape(format!("{what} {v} does not fit in u32")))
}

/// Weights are narrowed to `f32`.
pub fn encode(records: &[AttentionRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.write_all(MAGIC).expect("vec write");
    out.write_u32::<LittleEndian>(VERSION).expect("vec write");
    out.write_u32::<LittleEndian>(to_u32(records.len(), "record count")?)
        .expect("vec write");
    for r in records {
        out.write_u32::<LittleEndian>(to_u32(r.id.len(), "id length")?)
            .expect("vec write");
        out.write_all(r.id.as_bytes()).expect("vec write");
        for (v, what) in [
            (r.layers, "L"),
            (r.heads, "H"),
            (r.src_len, "src_len"),
            (r.tgt_len, "tgt_len"),
            (r.src_boundary, "src_boundary"),
            (r.tgt_boundary, "tgt_boundary"),
        ] {
            out.write_u32::<LittleEndian>(to_u32(v, what)?).expect("vec write");
        }
        for w in r.weights() {
            out.write_f32::<LittleEndian>(*w as f32).expect("vec write");
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Vec<AttentionRecord>> {
    let mut cur = Cursor::new(bytes);
    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Validation("not a binary attention file".into()));
    }
    let version = cur.read_u32::<LittleEndian>().map_err(truncated)?;
    if version != VERSION {
        return Err(Error::Validation(format!(
            "unsupported binary attention version {version}"
        )));
    }
    let count = cur.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let id_len = cur.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let mut id = vec![0u8; id_len];
        cur.read_exact(&mut id).map_err(truncated)?;
        let id = String::from_utf8(id)
            .map_err(|_| Error::Validation("record id is not UTF-8".into()))?;
        let mut dims = [0usize; 6];
        for d in &mut dims {
            *d = cur.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        }
        let [layers, heads, src_len, tgt_len, src_b, tgt_b] = dims;
        let n = layers
            .checked_mul(heads)
            .and_then(|x| x.checked_mul(src_len))
            .and_then(|x| x.checked_mul(tgt_len))
            .ok_or_else(|| Error::Shape(format!("{id}: grid dimensions overflow")))?;
        let remaining = bytes.len() - cur.position() as usize;
        if n > remaining / 4 {
            return Err(Error::Shape(format!(
                "{id}: header declares {n} weights but only {} remain",
                remaining / 4
            )));
        }
        let mut weights = Vec::with_capacity(n);
        for _ in 0..n {
            weights.push(cur.read_f32::<LittleEndian>().map_err(truncated)? as f64);
        }
        records.push(AttentionRecord::new(id, layers, heads, src_len, tgt_len, src_b, tgt_b, weights)?);
    }
    if (cur.position() as usize) != bytes.len() {
        return Err(Error::Shape("trailing bytes after last record".into()));
    }
    Ok(records)
}
