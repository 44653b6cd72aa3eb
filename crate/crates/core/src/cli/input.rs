use std::io::Read;

use csv::{ReaderBuilder, StringRecord, Trim};

use super::CliError;

/// Fixed-width numeric CSV rows, with 1-based line numbers for diagnostics.
pub(crate) struct RowReader<R: Read> {
    rdr: csv::Reader<R>,
    record: StringRecord,
    width: Option<usize>,
}

impl<R: Read> RowReader<R> {
    pub fn new(input: R, header: bool, width: Option<usize>) -> Self {
        let rdr = ReaderBuilder::new().has_headers(header).flexible(true).trim(Trim::All).from_reader(input);
        Self { rdr, record: StringRecord::new(), width }
    }

    pub fn width(&self) -> Option<usize> {
        self.width
    }

    /// Reads the next row into `out`; returns its line number, or `None` at
    /// end of input. The first row fixes the width if none was given.
    pub fn next_row(&mut self, out: &mut Vec<f64>) -> Result<Option<u64>, CliError> {
        let more = self.rdr.read_record(&mut self.record).map_err(|e| CliError::Data(format!("input: {e}")))?;
        if !more {
            return Ok(None);
        }
        let line = self.record.position().map_or(0, |p| p.line());
        let n = self.record.len();
        match self.width {
            Some(w) if w != n => {
                return Err(CliError::Data(format!("line {line}: expected {w} columns, found {n}")));
            }
            None => self.width = Some(n),
            _ => {}
        }
        out.clear();
        for (col, field) in self.record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Data(format!("line {line}, column {}: cannot parse '{field}' as a number", col + 1))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!("line {line}, column {}: non-finite value '{field}'", col + 1)));
            }
            out.push(v);
        }
        Ok(Some(line))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read_all(text: &str, header: bool) -> Result<Vec<(u64, Vec<f64>)>, CliError> {
        let mut r = RowReader::new(text.as_bytes(), header, None);
        let mut x = Vec::new();
        let mut rows = Vec::new();
        while let Some(line) = r.next_row(&mut x)? {
            rows.push((line, x.clone()));
        }
        Ok(rows)
    }

    #[test]
    fn parses_rows_and_skips_header() {
        let rows = read_all("a,b\n1, 2\n-3.5,4e-2\n", true).unwrap();
        assert_eq!(rows, vec![(2, vec![1.0, 2.0]), (3, vec![-3.5, 0.04])]);
    }

    #[test]
    fn width_drift_names_line() {
        let err = read_all("1,2,3,4\n1,2,3,4\n1,2,3,4,5\n", false).unwrap_err();
        assert_eq!(err, CliError::Data("line 3: expected 4 columns, found 5".into()));
    }

    #[test]
    fn bad_numbers_name_line_and_column() {
        let err = read_all("1,2\n1,x\n", false).unwrap_err();
        assert!(matches!(&err, CliError::Data(m) if m.starts_with("line 2, column 2")), "{err:?}");
        let err = read_all("1,NaN\n", false).unwrap_err();
        assert!(matches!(&err, CliError::Data(m) if m.contains("non-finite")), "{err:?}");
    }
}
