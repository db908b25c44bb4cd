//! CSV tables with a one-line `# schema: <name>/v<version>` header and the
//! packed binary trajectory layout.
//!
//! Binary trajectories (little endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "CSTR"
//! 4       2     format version (1)
//! 6       2     L
//! 8       8     T
//! 16      ...   ceil(L T / 8) bytes; bit (t-1) L + i holds k_i(t),
//!               least significant bit first within each byte
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use collisim_core::model::bit;
use collisim_core::TrajectoryRecord;

use crate::RunError;

pub const SCHEMA_VERSION: u32 = 1;
pub const BINARY_MAGIC: [u8; 4] = *b"CSTR";
pub const BINARY_VERSION: u16 = 1;

pub type CsvWriter = csv::Writer<BufWriter<File>>;

/// Opens `path`, writes the schema line and the column header.
pub fn csv_writer(path: &Path, schema: &str, columns: &[&str]) -> Result<CsvWriter, RunError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# schema: {schema}/v{SCHEMA_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns)?;
    Ok(w)
}

/// Shortest representation that parses back to the same bits.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn f64s(&self, name: &str) -> Result<Vec<f64>, RunError> {
        let j = self.column(name).ok_or_else(|| RunError::Format(format!("no column '{name}'")))?;
        self.rows
            .iter()
            .map(|r| r[j].parse::<f64>().map_err(|e| RunError::Format(format!("column '{name}': {e}"))))
            .collect()
    }
}

/// Reads a table written by [`csv_writer`], checking the schema name and
/// version.
pub fn read_table(path: &Path, schema: &str) -> Result<Table, RunError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let found = first.trim().strip_prefix("# schema:").map(str::trim).unwrap_or("");
    let expected = format!("{schema}/v{SCHEMA_VERSION}");
    if found != expected {
        return Err(RunError::Format(format!("{}: schema '{found}', expected '{expected}'", path.display())));
    }
    let mut csv = csv::Reader::from_reader(reader);
    let columns = csv.headers()?.iter().map(String::from).collect();
    let rows = csv
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()?;
    Ok(Table { schema: found.to_string(), columns, rows })
}

pub fn write_trajectory_csv(path: &Path, rec: &TrajectoryRecord) -> Result<(), RunError> {
    let l = rec.sites();
    let mut columns = vec!["t", "site", "outcome"];
    if rec.occupations.is_some() {
        columns.push("occupation");
    }
    let mut w = csv_writer(path, "trajectory", &columns)?;
    for t in 1..=rec.steps() {
        for i in 0..l {
            let mut row = vec![t.to_string(), i.to_string(), rec.outcome(t, i).to_string()];
            if let Some(n) = rec.occupation(t, i) {
                row.push(num(n));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Outcome strings `k(t)` (site 0 most significant) of a trajectory CSV.
pub fn read_trajectory_csv(path: &Path) -> Result<(usize, Vec<u64>), RunError> {
    let table = read_table(path, "trajectory")?;
    let (t, site, outcome) = (table.f64s("t")?, table.f64s("site")?, table.f64s("outcome")?);
    let l = site.iter().fold(0.0f64, |m, &x| m.max(x)) as usize + 1;
    let steps = t.iter().fold(0.0f64, |m, &x| m.max(x)) as usize;
    if t.len() != l * steps {
        return Err(RunError::Format(format!("{}: {} rows for L={l}, T={steps}", path.display(), t.len())));
    }
    let mut outcomes = vec![0u64; steps];
    for ((&t, &i), &k) in t.iter().zip(&site).zip(&outcome) {
        if k == 1.0 {
            outcomes[t as usize - 1] |= 1 << (l - 1 - i as usize);
        }
    }
    Ok((l, outcomes))
}

pub fn write_trajectory_binary(path: &Path, rec: &TrajectoryRecord) -> Result<(), RunError> {
    let l = rec.sites();
    let steps = rec.steps();
    let mut bytes = vec![0u8; (l * steps).div_ceil(8)];
    for (t, &k) in rec.outcomes.iter().enumerate() {
        for i in 0..l {
            if bit(k as usize, i, l) == 1 {
                let b = t * l + i;
                bytes[b / 8] |= 1 << (b % 8);
            }
        }
    }
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&BINARY_MAGIC)?;
    out.write_all(&BINARY_VERSION.to_le_bytes())?;
    out.write_all(&(l as u16).to_le_bytes())?;
    out.write_all(&(steps as u64).to_le_bytes())?;
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

pub fn read_trajectory_binary(path: &Path) -> Result<(usize, Vec<u64>), RunError> {
    let mut data = Vec::new();
    File::open(path)?.read_to_end(&mut data)?;
    let bad = |m: &str| RunError::Format(format!("{}: {m}", path.display()));
    if data.len() < 16 || data[..4] != BINARY_MAGIC {
        return Err(bad("not a binary trajectory"));
    }
    let version = u16::from_le_bytes([data[4], data[5]]);
    if version != BINARY_VERSION {
        return Err(bad("unsupported version"));
    }
    let l = u16::from_le_bytes([data[6], data[7]]) as usize;
    let steps = u64::from_le_bytes(data[8..16].try_into().unwrap()) as usize;
    let body = &data[16..];
    if l == 0 || l > 64 || body.len() != (l * steps).div_ceil(8) {
        return Err(bad("truncated or inconsistent header"));
    }
    let outcomes = (0..steps)
        .map(|t| {
            (0..l).fold(0u64, |k, i| {
                let b = t * l + i;
                k | (((body[b / 8] >> (b % 8)) & 1) as u64) << (l - 1 - i)
            })
        })
        .collect();
    Ok((l, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use collisim_core::{ModelParams, RecordMode};

    fn record(l: usize, outcomes: Vec<u64>, occ: bool) -> TrajectoryRecord {
        let occupations = occ.then(|| (0..outcomes.len() * l).map(|x| x as f64 / 7.0).collect());
        TrajectoryRecord {
            seed: 1,
            stream: 0,
            params: ModelParams::reference(l),
            outcomes,
            occupations,
            mode: RecordMode::Reset,
        }
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rec = record(3, vec![0b100, 0b011, 0b000, 0b111, 0b010], true);
        let csv = dir.path().join("t.csv");
        write_trajectory_csv(&csv, &rec).unwrap();
        assert_eq!(read_trajectory_csv(&csv).unwrap(), (3, rec.outcomes.clone()));
        let table = read_table(&csv, "trajectory").unwrap();
        assert_eq!(table.columns, ["t", "site", "outcome", "occupation"]);
        assert_eq!(table.f64s("occupation").unwrap(), rec.occupations.clone().unwrap());
        assert_eq!(table.rows[0][..3], ["1", "0", "1"]);
        let bin = dir.path().join("t.bin");
        write_trajectory_binary(&bin, &rec).unwrap();
        assert_eq!(read_trajectory_binary(&bin).unwrap(), (3, rec.outcomes));
        assert_eq!(std::fs::metadata(&bin).unwrap().len(), 16 + 2);
    }

    #[test]
    fn binary_bit_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        write_trajectory_binary(&path, &record(2, vec![0b10, 0b01], false)).unwrap();
        let data = std::fs::read(&path).unwrap();
        assert_eq!(&data[..4], b"CSTR");
        assert_eq!(data[6..8], [2, 0]);
        assert_eq!(data[8..16], 2u64.to_le_bytes());
        // k_0(1) = 1 -> bit 0, k_1(2) = 1 -> bit 3
        assert_eq!(data[16], 0b1001);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let mut w = csv_writer(&path, "scgf", &["s", "theta", "activity"]).unwrap();
        w.write_record(["0.0", "0.0", "1.5"]).unwrap();
        w.flush().unwrap();
        drop(w);
        assert!(read_table(&path, "scgf").is_ok());
        assert!(matches!(read_table(&path, "events"), Err(RunError::Format(_))));
        std::fs::write(&path, "# schema: scgf/v2\ns\n1\n").unwrap();
        assert!(read_table(&path, "scgf").is_err());
    }

    #[test]
    fn numbers_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 5.875, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
