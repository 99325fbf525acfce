use anyhow::{bail, Context, Result};
use bernstein_yett::Dataset;
use sha2::{Digest, Sha256};
use std::io::{Read, Write};
use std::path::Path;

/// Reads a comma-separated numeric table. A first row that does not parse
/// as numbers is taken as the header unless `header` says otherwise.
pub fn read_dataset<R: Read>(input: R, header: Option<bool>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(input);
    let mut names = None;
    let mut values = Vec::new();
    let mut dims = 0;
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec.with_context(|| format!("row {line}: malformed CSV"))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if i == 0 {
            let numeric = rec.iter().all(|f| f.parse::<f64>().is_ok());
            if header.unwrap_or(!numeric) {
                names = Some(rec.iter().map(str::to_string).collect::<Vec<_>>());
                dims = rec.len();
                continue;
            }
        }
        if dims == 0 {
            dims = rec.len();
        } else if rec.len() != dims {
            bail!("row {line}: expected {dims} fields, found {}", rec.len());
        }
        for (j, f) in rec.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| anyhow::anyhow!("row {line}, column {}: `{f}` is not a number", j + 1))?;
            if !v.is_finite() {
                bail!("row {line}, column {}: value must be finite", j + 1);
            }
            values.push(v);
        }
    }
    if values.is_empty() {
        bail!("no data rows");
    }
    Ok(Dataset::new(dims, values, names)?)
}

pub fn load_dataset(path: &Path, header: Option<bool>) -> Result<Dataset> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_dataset(std::io::BufReader::new(file), header).with_context(|| format!("reading {}", path.display()))
}

pub fn write_dataset<W: Write>(out: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let names: Vec<String> = match data.names() {
        Some(n) => n.to_vec(),
        None => (1..=data.dims()).map(|j| format!("x{j}")).collect(),
    };
    w.write_record(&names)?;
    for row in data.rows() {
        w.write_record(row.iter().map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Fingerprint of the numbers a model was fitted to.
pub fn data_digest(data: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update((data.dims() as u64).to_le_bytes());
    for v in data.as_slice() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_detection() {
        let d = read_dataset("price,area\n1,2\n3,4\n".as_bytes(), None).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.names().unwrap(), &["price".to_string(), "area".to_string()]);
        let d = read_dataset("1,2\n3,4\n".as_bytes(), None).unwrap();
        assert_eq!(d.len(), 2);
        assert!(d.names().is_none());
    }

    #[test]
    fn errors_name_the_row() {
        let e = read_dataset("a,b\n1,2\n3,x\n".as_bytes(), None).unwrap_err();
        assert!(format!("{e:#}").contains("row 3"), "{e:#}");
        let e = read_dataset("1,2\n3\n".as_bytes(), None).unwrap_err();
        assert!(format!("{e:#}").contains("row 2"), "{e:#}");
    }

    #[test]
    fn write_then_read() {
        let d = Dataset::from_rows(&[vec![0.1, -2.5], vec![1e-300, 3.0]]).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d).unwrap();
        let back = read_dataset(buf.as_slice(), None).unwrap();
        assert_eq!(back.as_slice(), d.as_slice());
        assert_eq!(data_digest(&back), data_digest(&d));
    }
}
