use std::io::{Read, Write};

use super::FemError;
use crate::scalar::Real;

/// Part labels with one spectrum row each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpectraTable {
    pub part_ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Writes `part_id,lambda_1,...,lambda_k`.
pub fn write_spectra_csv<T: Real, W: Write>(w: W, ids: &[String], rows: &[Vec<T>]) -> Result<(), FemError> {
    assert_eq!(ids.len(), rows.len(), "one id per spectrum");
    let k = rows.first().map_or(0, |r| r.len());
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["part_id".to_string()];
    header.extend((1..=k).map(|i| format!("lambda_{i}")));
    out.write_record(&header).map_err(|e| FemError::Csv(e.to_string()))?;
    for (id, r) in ids.iter().zip(rows) {
        if r.len() != k {
            return Err(FemError::Csv(format!("part {id} has {} eigenvalues, expected {k}", r.len())));
        }
        let mut rec = vec![id.clone()];
        rec.extend(r.iter().map(|x| x.f64().to_string()));
        out.write_record(&rec).map_err(|e| FemError::Csv(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_spectra_csv<R: Read>(r: R) -> Result<SpectraTable, FemError> {
    let mut rd = csv::Reader::from_reader(r);
    let mut table = SpectraTable::default();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| FemError::Csv(e.to_string()))?;
        let mut it = rec.iter();
        let id = it.next().ok_or_else(|| FemError::Csv(format!("empty record {}", line + 2)))?;
        let vals = it
            .map(|s| s.trim().parse::<f64>().map_err(|_| FemError::Csv(format!("bad number '{s}' on line {}", line + 2))))
            .collect::<Result<Vec<_>, _>>()?;
        table.part_ids.push(id.to_string());
        table.rows.push(vals);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let ids = vec!["p01".to_string(), "p02".to_string()];
        let rows = vec![vec![0.0, 2.5, 6.125], vec![1e-12, 2.0, 7.0]];
        let mut buf = Vec::new();
        write_spectra_csv(&mut buf, &ids, &rows).unwrap();
        let s = String::from_utf8(buf.clone()).unwrap();
        assert!(s.starts_with("part_id,lambda_1,lambda_2,lambda_3\n"));
        let t = read_spectra_csv(&buf[..]).unwrap();
        assert_eq!(t.part_ids, ids);
        assert_eq!(t.rows, rows);
    }
}
