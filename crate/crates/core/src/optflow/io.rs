//! Flow-field file formats.
//!
//! Binary layout: `MFLW`, then little-endian `u32` width, height and step,
//! then one 13-byte record per site in row-major order:
//! `f32 dx, f32 dy, u8 valid, f32 min_eig`.

use std::io::{Read, Write};

use super::{sites_along, FlowError, FlowField};
use crate::geometry::Point2;

pub const FLOW_MAGIC: &[u8; 4] = b"MFLW";

pub fn write_flow<W: Write>(mut out: W, field: &FlowField) -> Result<(), FlowError> {
    let mut buf = Vec::with_capacity(16 + field.len() * 13);
    buf.extend_from_slice(FLOW_MAGIC);
    for v in [field.width(), field.height(), field.step()] {
        let v = u32::try_from(v).map_err(|_| FlowError::Format(format!("{v} exceeds u32")))?;
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for (_, _, d, valid, min_eig) in field.sites() {
        buf.extend_from_slice(&(d.x as f32).to_le_bytes());
        buf.extend_from_slice(&(d.y as f32).to_le_bytes());
        buf.push(valid as u8);
        buf.extend_from_slice(&(min_eig as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_flow<R: Read>(mut input: R) -> Result<FlowField, FlowError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..4] != FLOW_MAGIC {
        return Err(FlowError::Format("missing MFLW header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (width, height, step) = (word(0), word(1), word(2));
    if step == 0 {
        return Err(FlowError::InvalidStep);
    }
    let n = sites_along(width, step) * sites_along(height, step);
    let body = &bytes[16..];
    if body.len() != n * 13 {
        return Err(FlowError::Format(format!(
            "expected {} record bytes, found {}",
            n * 13,
            body.len()
        )));
    }
    let f32_at = |r: &[u8], o: usize| f32::from_le_bytes(r[o..o + 4].try_into().unwrap()) as f64;
    let mut d = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    let mut min_eig = Vec::with_capacity(n);
    for rec in body.chunks_exact(13) {
        d.push(Point2::new(f32_at(rec, 0), f32_at(rec, 4)));
        valid.push(match rec[8] {
            0 => false,
            1 => true,
            other => return Err(FlowError::Format(format!("bad valid flag {other}"))),
        });
        min_eig.push(f32_at(rec, 9));
    }
    FlowField::new(width, height, step, d, valid, min_eig)
}

/// `u,v,dx,dy,valid,min_eig` with a header line.
pub fn write_flow_csv<W: Write>(mut out: W, field: &FlowField) -> Result<(), FlowError> {
    let mut text = String::from("u,v,dx,dy,valid,min_eig\n");
    for (u, v, d, valid, min_eig) in field.sites() {
        text.push_str(&format!(
            "{u},{v},{},{},{},{}\n",
            d.x,
            d.y,
            valid as u8,
            min_eig
        ));
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}
