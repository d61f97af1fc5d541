//! Latent-code tables as CSV: `id,z0,...,z{d-1},gender,race`.

use std::path::Path;

use super::{read_file, write_file, FormatError};
use crate::analysis::{LatentRow, LatentTable};

/// 17 significant digits; always parses back to the same f64.
fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn encode_latents(table: &LatentTable) -> Result<String, FormatError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let d = table.dim();
    let mut header = vec!["id".to_string()];
    header.extend((0..d).map(|i| format!("z{i}")));
    header.push("gender".into());
    header.push("race".into());
    w.write_record(&header).map_err(csv_err)?;
    for row in table.rows() {
        let mut rec = Vec::with_capacity(d + 3);
        rec.push(row.id.clone());
        rec.extend(row.z.iter().map(|&v| fmt_float(v)));
        rec.push(row.gender.to_string());
        rec.push(row.race.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| FormatError::Latents(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn csv_err(e: csv::Error) -> FormatError {
    FormatError::Latents(e.to_string())
}

pub fn decode_latents(text: &str) -> Result<LatentTable, FormatError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(csv_err)?.clone();
    let cols = header.len();
    if cols < 3 || &header[0] != "id" || &header[cols - 2] != "gender" || &header[cols - 1] != "race"
    {
        return Err(FormatError::Latents(format!(
            "header must be id,z0..,gender,race; got {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let d = cols - 3;
    for (i, name) in header.iter().skip(1).take(d).enumerate() {
        if name != format!("z{i}") {
            return Err(FormatError::Latents(format!("column {} should be z{i}, got {name}", i + 1)));
        }
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row_no = line + 2;
        if rec.len() != cols {
            return Err(FormatError::Latents(format!(
                "row {row_no}: expected {cols} fields, found {}",
                rec.len()
            )));
        }
        let z = (1..=d)
            .map(|c| {
                rec[c].parse::<f64>().map_err(|_| {
                    FormatError::Latents(format!("row {row_no}: non-numeric latent {:?}", &rec[c]))
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(LatentRow {
            id: rec[0].to_string(),
            z,
            gender: rec[cols - 2].parse()?,
            race: rec[cols - 1].parse()?,
        });
    }
    LatentTable::with_dim(rows, d).map_err(|e| FormatError::Latents(e.to_string()))
}

pub fn write_latents(table: &LatentTable, path: &Path) -> Result<(), FormatError> {
    write_file(path, encode_latents(table)?.as_bytes())
}

pub fn read_latents(path: &Path) -> Result<LatentTable, FormatError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|e| FormatError::Latents(e.to_string()))?;
    decode_latents(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{Gender, Race};

    fn table() -> LatentTable {
        LatentTable::new(vec![
            LatentRow {
                id: "a".into(),
                z: vec![0.1, -1.0 / 3.0, 5e-310],
                gender: Gender::Female,
                race: Race::White,
            },
            LatentRow {
                id: "b,c".into(),
                z: vec![1e300, 0.0, -0.0],
                gender: Gender::Male,
                race: Race::AfricanAmerican,
            },
        ])
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let t = table();
        let text = encode_latents(&t).unwrap();
        assert!(text.starts_with("id,z0,z1,z2,gender,race\n"));
        let back = decode_latents(&text).unwrap();
        for (a, b) in t.rows().iter().zip(back.rows()) {
            assert_eq!(a.id, b.id);
            let ab: Vec<u64> = a.z.iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u64> = b.z.iter().map(|v| v.to_bits()).collect();
            assert_eq!(ab, bb);
        }
    }

    #[test]
    fn ragged_row_rejected() {
        let text = "id,z0,z1,gender,race\na,1,2,Male,White\nb,1,Male,White\n";
        let err = decode_latents(text).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
    }

    #[test]
    fn non_numeric_rejected() {
        let text = "id,z0,gender,race\na,abc,Male,White\n";
        assert!(decode_latents(text).unwrap_err().to_string().contains("non-numeric"));
    }

    #[test]
    fn bad_header_rejected() {
        assert!(decode_latents("name,z0,gender,race\n").is_err());
    }
}
