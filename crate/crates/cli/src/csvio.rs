//! Streaming numeric CSV input and label files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use csv::{Position, ReaderBuilder, StringRecord};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;

/// Row-by-row reader of a numeric CSV file with one reusable row buffer.
///
/// Rows are yielded in file order, or in a seeded random order when a
/// shuffle seed is given. Shuffling keeps one byte offset per row in memory
/// and seeks to each row, so it costs `O(n)` integers but never `O(n·d)`.
pub struct RowStream {
    path: PathBuf,
    reader: csv::Reader<BufReader<File>>,
    record: StringRecord,
    row: Vec<f64>,
    dim: Option<usize>,
    order: Option<std::vec::IntoIter<(u64, Position)>>,
    /// 0-based data-row index of the last row returned.
    current: u64,
    served: u64,
}

impl RowStream {
    pub fn open(path: &Path, header: bool, shuffle_seed: Option<u64>) -> Result<Self, CliError> {
        let mut reader = csv_reader(path, header)?;
        let order = match shuffle_seed {
            None => None,
            Some(seed) => {
                let mut positions = Vec::new();
                let mut rec = StringRecord::new();
                while reader.read_record(&mut rec).map_err(|e| CliError::csv(path, e))? {
                    let pos = rec
                        .position()
                        .cloned()
                        .expect("records read from a file carry a position");
                    positions.push((positions.len() as u64, pos));
                }
                positions.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                Some(positions.into_iter())
            }
        };
        Ok(Self {
            path: path.to_path_buf(),
            reader,
            record: StringRecord::new(),
            row: Vec::new(),
            dim: None,
            order,
            current: 0,
            served: 0,
        })
    }

    /// Fixes the expected column count before reading.
    pub fn expect_dim(&mut self, dim: usize) {
        self.dim = Some(dim);
    }

    /// Next row, or `None` at end of input. The slice is overwritten by the next call.
    pub fn next_row(&mut self) -> Result<Option<&[f64]>, CliError> {
        let line = match self.order.as_mut() {
            None => {
                if !self
                    .reader
                    .read_record(&mut self.record)
                    .map_err(|e| CliError::csv(&self.path, e))?
                {
                    return Ok(None);
                }
                self.current = self.served;
                self.record.position().map_or(0, Position::line)
            }
            Some(order) => {
                let Some((index, pos)) = order.next() else {
                    return Ok(None);
                };
                self.current = index;
                let line = pos.line();
                self.reader.seek(pos).map_err(|e| CliError::csv(&self.path, e))?;
                if !self
                    .reader
                    .read_record(&mut self.record)
                    .map_err(|e| CliError::csv(&self.path, e))?
                {
                    return Ok(None);
                }
                line
            }
        };
        parse_row(&self.record, &mut self.row, &self.path, line)?;
        match self.dim {
            None => self.dim = Some(self.row.len()),
            Some(d) if d != self.row.len() => {
                return Err(CliError::Parse {
                    path: self.path.clone(),
                    line,
                    column: None,
                    message: format!("expected {d} columns, found {}", self.row.len()),
                })
            }
            Some(_) => {}
        }
        self.served += 1;
        Ok(Some(&self.row))
    }

    /// 0-based position in the file of the row last returned, ignoring any header.
    pub fn row_index(&self) -> u64 {
        self.current
    }
}

fn csv_reader(path: &Path, header: bool) -> Result<csv::Reader<BufReader<File>>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(reader_from(BufReader::with_capacity(1 << 16, file), header))
}

fn reader_from<R: Read>(inner: R, header: bool) -> csv::Reader<R> {
    ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(inner)
}

fn parse_row(record: &StringRecord, row: &mut Vec<f64>, path: &Path, line: u64) -> Result<(), CliError> {
    row.clear();
    for (col, cell) in record.iter().enumerate() {
        let value: f64 = cell.parse().map_err(|_| CliError::Parse {
            path: path.to_path_buf(),
            line,
            column: Some(col as u64 + 1),
            message: format!("cannot parse {cell:?} as a number"),
        })?;
        if !value.is_finite() {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line,
                column: Some(col as u64 + 1),
                message: format!("value {cell:?} is not finite"),
            });
        }
        row.push(value);
    }
    if row.is_empty() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line,
            column: None,
            message: "empty row".into(),
        });
    }
    Ok(())
}

/// Reads a single-column label file as strings.
pub fn read_labels(path: &Path, header: bool) -> Result<Vec<String>, CliError> {
    let mut reader = csv_reader(path, header)?;
    let mut out = Vec::new();
    let mut rec = StringRecord::new();
    while reader.read_record(&mut rec).map_err(|e| CliError::csv(path, e))? {
        let line = rec.position().map_or(0, Position::line);
        if rec.len() != 1 {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line,
                column: None,
                message: format!("label files have one column, found {}", rec.len()),
            });
        }
        out.push(rec[0].to_string());
    }
    Ok(out)
}

/// Buffered writer to a file, or to stdout for `None` / `-`.
pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) if p != Path::new("-") => {
            let f = File::create(p).map_err(|e| CliError::io(p, e))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        _ => Ok(Box::new(BufWriter::new(std::io::stdout().lock()))),
    }
}

/// Writes one CSV data row; floats use the shortest round-trip form.
pub fn write_row<W: Write + ?Sized>(out: &mut W, row: &[f64]) -> std::io::Result<()> {
    let mut first = true;
    for v in row {
        if !first {
            out.write_all(b",")?;
        }
        first = false;
        write!(out, "{v}")?;
    }
    out.write_all(b"\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn collect(stream: &mut RowStream) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        while let Some(r) = stream.next_row().unwrap() {
            out.push(r.to_vec());
        }
        out
    }

    #[test]
    fn reads_rows_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "1,2\n3, 4\n-5e1,6.5\n");
        let mut s = RowStream::open(&p, false, None).unwrap();
        assert_eq!(collect(&mut s), vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![-50.0, 6.5]]);
        assert_eq!(s.dim, Some(2));
    }

    #[test]
    fn header_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "x,y\n1,2\n");
        let mut s = RowStream::open(&p, true, None).unwrap();
        assert_eq!(collect(&mut s), vec![vec![1.0, 2.0]]);
    }

    #[test]
    fn reports_bad_cell_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "1,2\n3,oops\n");
        let mut s = RowStream::open(&p, false, None).unwrap();
        s.next_row().unwrap();
        match s.next_row() {
            Err(CliError::Parse { line, column, .. }) => assert_eq!((line, column), (2, Some(2))),
            other => panic!("unexpected {:?}", other.map(|r| r.map(<[f64]>::to_vec))),
        }
    }

    #[test]
    fn reports_ragged_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "1,2\n3\n");
        let mut s = RowStream::open(&p, false, None).unwrap();
        s.next_row().unwrap();
        assert!(matches!(
            s.next_row(),
            Err(CliError::Parse {
                line: 2,
                column: None,
                ..
            })
        ));
    }

    #[test]
    fn shuffle_is_a_seeded_permutation() {
        let dir = tempfile::tempdir().unwrap();
        let text: String = (0..200).map(|i| format!("{i},{}\n", 2 * i)).collect();
        let p = write(&dir, "a.csv", &text);
        let plain = collect(&mut RowStream::open(&p, false, None).unwrap());
        let a = collect(&mut RowStream::open(&p, false, Some(7)).unwrap());
        let b = collect(&mut RowStream::open(&p, false, Some(7)).unwrap());
        let c = collect(&mut RowStream::open(&p, false, Some(8)).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, plain);
        assert_ne!(a, c);
        let mut sorted = a.clone();
        sorted.sort_by(|x, y| x[0].total_cmp(&y[0]));
        assert_eq!(sorted, plain);
    }

    #[test]
    fn shuffle_reports_original_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "h\n1\n2\nbad\n4\n");
        let mut s = RowStream::open(&p, true, Some(1)).unwrap();
        let err = loop {
            match s.next_row() {
                Ok(Some(_)) => continue,
                Ok(None) => panic!("bad row not reached"),
                Err(e) => break e,
            }
        };
        assert!(matches!(
            err,
            CliError::Parse {
                line: 4,
                column: Some(1),
                ..
            }
        ));
    }

    #[test]
    fn labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "l.csv", "0\n1\na\n");
        assert_eq!(read_labels(&p, false).unwrap(), vec!["0", "1", "a"]);
        let p = write(&dir, "l2.csv", "0,1\n");
        assert!(read_labels(&p, false).is_err());
    }

    #[test]
    fn row_format_round_trips() {
        let mut buf = Vec::new();
        let row = [0.1, -2.0, 1e-300, 123456.789];
        write_row(&mut buf, &row).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back: Vec<f64> = text.trim().split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(back, row);
    }
}
