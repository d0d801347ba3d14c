//! Flat binary and CSV export of lattice fields.
//!
//! Binary layout: the 8-byte magic, a little-endian `u64` header length,
//! a JSON header `{dimension, side, provenance}`, then `side^dimension`
//! little-endian `f64` values in row-major order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{FieldProvenance, LatticeField};
use crate::error::{Error, Result};

pub const FIELD_MAGIC: &[u8; 8] = b"FKDEFLD1";
/// Largest side exported as CSV.
pub const CSV_MAX_SIDE: usize = 64;

#[derive(Serialize, Deserialize)]
struct Header {
    dimension: usize,
    side: usize,
    provenance: FieldProvenance,
}

pub fn write_field_binary<W: Write>(field: &LatticeField, mut w: W) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        dimension: field.dimension,
        side: field.side,
        provenance: field.provenance.clone(),
    })?;
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(field.values.len() * 8);
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

pub fn read_field_binary<R: Read>(mut r: R) -> Result<LatticeField> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(Error::Serialization("not a field file (bad magic)".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 20 {
        return Err(Error::Serialization(format!("header of {len} bytes is implausible")));
    }
    let mut header = vec![0u8; len];
    r.read_exact(&mut header)?;
    let header: Header = serde_json::from_slice(&header)?;
    let count = crate::lattice::Cube::new(header.dimension, header.side)?.len();
    let mut payload = vec![0u8; count * 8];
    r.read_exact(&mut payload)?;
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    LatticeField::new(header.dimension, header.side, values, header.provenance)
}

/// One row per site: 1-based coordinates `i1..id` then `value`.
pub fn write_field_csv<W: Write>(field: &LatticeField, w: W) -> Result<()> {
    if field.side > CSV_MAX_SIDE {
        return Err(Error::arg(
            "side",
            format!("CSV export is limited to side {CSV_MAX_SIDE}, got {}", field.side),
        ));
    }
    let mut wr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..=field.dimension).map(|t| format!("i{t}")).collect();
    header.push("value".into());
    wr.write_record(&header)?;
    for (k, v) in field.cube().iter().zip(&field.values) {
        let mut row: Vec<String> = k.iter().map(|c| (c + 1).to_string()).collect();
        row.push(format!("{v:.16e}"));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldComponent;
    use crate::innovations::SeedSpec;

    fn sample() -> LatticeField {
        LatticeField::new(
            2,
            2,
            vec![1.0, -2.5, 3.25, 1e-300],
            FieldProvenance {
                coefficient_model_id: "geometric-00".into(),
                truncation_radius: 3,
                m: 1,
                component: FieldComponent::Full,
                innovation_model_id: "gaussian".into(),
                seed: SeedSpec::new(1, 2, 3),
            },
        )
        .unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let f = sample();
        let mut buf = Vec::new();
        write_field_binary(&f, &mut buf).unwrap();
        assert_eq!(&buf[..8], FIELD_MAGIC);
        let back = read_field_binary(&buf[..]).unwrap();
        assert_eq!(back, f);
        buf[0] = b'X';
        assert!(read_field_binary(&buf[..]).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_field_csv(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "i1,i2,value");
        assert_eq!(lines[2], "1,2,-2.5000000000000000e0");
        assert_eq!(lines.len(), 5);
    }
}
