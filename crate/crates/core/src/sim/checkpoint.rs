//! Binary checkpoints.
//!
//! Layout: the header line `nsk-ckpt v1`, then little-endian `f64` values: `t`,
//! `ϱ`, `v₁`, `v₂`, each with `x` outer and `y` inner (centre fields have `Ny`
//! vertical entries, `v₂` has `Ny + 1`). Linearized runs append the displacement
//! field in the layout of `v₂`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{NskError, Result};

use super::state::FieldState;

pub const HEADER: &[u8] = b"nsk-ckpt v1\n";

fn push_transposed(out: &mut Vec<u8>, a: &[f64], nx: usize, rows: usize) {
    for i in 0..nx {
        for r in 0..rows {
            out.extend_from_slice(&a[r * nx + i].to_le_bytes());
        }
    }
}

fn take_transposed(bytes: &[u8], nx: usize, rows: usize) -> Vec<f64> {
    let mut a = vec![0.0; nx * rows];
    for i in 0..nx {
        for r in 0..rows {
            let at = 8 * (i * rows + r);
            a[r * nx + i] = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
        }
    }
    a
}

pub fn encode_checkpoint(s: &FieldState) -> Vec<u8> {
    let (nx, ny) = (s.nx, s.ny);
    let mut out = HEADER.to_vec();
    out.extend_from_slice(&s.t.to_le_bytes());
    push_transposed(&mut out, &s.rho_pert, nx, ny);
    push_transposed(&mut out, &s.v1, nx, ny);
    push_transposed(&mut out, &s.v2, nx, ny + 1);
    if let Some(d) = &s.displacement {
        push_transposed(&mut out, d, nx, ny + 1);
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8], nx: usize, ny: usize) -> Result<FieldState> {
    let body = bytes.strip_prefix(HEADER).ok_or_else(|| NskError::Checkpoint("missing `nsk-ckpt v1` header".into()))?;
    let base = 8 * (1 + 2 * nx * ny + nx * (ny + 1));
    let with_disp = base + 8 * nx * (ny + 1);
    if body.len() != base && body.len() != with_disp {
        return Err(NskError::Checkpoint(format!(
            "expected {base} or {with_disp} payload bytes for a {nx}x{ny} grid, found {}",
            body.len()
        )));
    }
    let mut s = FieldState::zeros(nx, ny);
    s.t = f64::from_le_bytes(body[..8].try_into().unwrap());
    let mut at = 8;
    s.rho_pert = take_transposed(&body[at..], nx, ny);
    at += 8 * nx * ny;
    s.v1 = take_transposed(&body[at..], nx, ny);
    at += 8 * nx * ny;
    s.v2 = take_transposed(&body[at..], nx, ny + 1);
    at += 8 * nx * (ny + 1);
    if body.len() == with_disp {
        s.displacement = Some(take_transposed(&body[at..], nx, ny + 1));
    }
    if !s.t.is_finite() || !s.is_finite() {
        return Err(NskError::Checkpoint("non-finite values in checkpoint".into()));
    }
    Ok(s)
}

pub fn write_checkpoint(s: &FieldState, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_checkpoint(s))?;
    Ok(())
}

/// Restore a state written by [`write_checkpoint`]; `step_index` restarts at 0.
pub fn read_checkpoint(path: &Path, nx: usize, ny: usize) -> Result<FieldState> {
    let bytes = fs::read(path).map_err(|e| NskError::Checkpoint(format!("{}: {e}", path.display())))?;
    decode_checkpoint(&bytes, nx, ny)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut s = FieldState::zeros(4, 16);
        s.t = 0.375;
        s.rho_pert.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64).sin());
        s.v1.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64 * 0.3).cos());
        s.v2.iter_mut().enumerate().for_each(|(i, v)| *v = 1e-300 * i as f64);
        let back = decode_checkpoint(&encode_checkpoint(&s), 4, 16).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_wrong_size_and_header() {
        let s = FieldState::zeros(4, 16);
        let bytes = encode_checkpoint(&s);
        assert!(decode_checkpoint(&bytes, 8, 16).is_err());
        assert!(decode_checkpoint(&bytes[1..], 4, 16).is_err());
    }
}
