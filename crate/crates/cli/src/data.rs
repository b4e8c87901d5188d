//! CSV input and output of datasets.
//!
//! The first row holds the column names. Every other cell must parse as a
//! number with '.' as the decimal separator; the response column (and, for
//! Cox, the event column) is split off and the remaining columns form the
//! design.

use std::path::Path;

use mnr::datagen::{Dataset, Family, Response};
use mnr::numkit::Matrix;

use crate::error::CliError;

/// Parsed table before the response is split off.
pub struct CsvTable {
    pub header: Vec<String>,
    /// Column-major values.
    pub columns: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let file = std::fs::File::open(path)
            .map_err(CliError::io(format!("cannot open {}", path.display())))?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: std::io::Read>(reader: R, source: &str) -> Result<Self, CliError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Data(format!("{source}: cannot read header: {e}")))?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(CliError::Data(format!("{source}: missing header row")));
        }
        let mut columns = vec![Vec::new(); header.len()];
        for rec in rdr.records() {
            let rec = rec.map_err(|e| match e.kind() {
                csv::ErrorKind::UnequalLengths {
                    pos,
                    expected_len,
                    len,
                } => CliError::Data(format!(
                    "{source}: row {} has {len} fields, expected {expected_len}",
                    pos.as_ref().map_or(0, |p| p.line())
                )),
                _ => CliError::Data(format!("{source}: {e}")),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            for (k, cell) in rec.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    CliError::Data(format!(
                        "{source}: row {line}, column {} ('{}'): cannot parse '{cell}' as a number",
                        k + 1,
                        header[k]
                    ))
                })?;
                if !v.is_finite() {
                    return Err(CliError::Data(format!(
                        "{source}: row {line}, column {} ('{}'): value is not finite",
                        k + 1,
                        header[k]
                    )));
                }
                columns[k].push(v);
            }
        }
        Ok(Self { header, columns })
    }

    fn position(&self, name: &str, flag: &str) -> Result<usize, CliError> {
        self.header.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Data(format!(
                "column '{name}' given by {flag} is not in the header"
            ))
        })
    }

    /// Splits off the response and builds a dataset for `family`.
    pub fn into_dataset(
        self,
        response: &str,
        event: Option<&str>,
        family: Family,
    ) -> Result<Dataset, CliError> {
        let ry = self.position(response, "--response")?;
        let re = match (family, event) {
            (Family::Cox, Some(e)) => Some(self.position(e, "--event")?),
            (Family::Cox, None) => {
                return Err(CliError::Usage(
                    "--event is required for the cox family".into(),
                ))
            }
            (_, Some(_)) => {
                return Err(CliError::Usage(
                    "--event only applies to the cox family".into(),
                ))
            }
            (_, None) => None,
        };
        if re == Some(ry) {
            return Err(CliError::Usage(
                "--response and --event name the same column".into(),
            ));
        }
        let mut names = Vec::new();
        let mut xcols = Vec::new();
        let mut y = Vec::new();
        let mut ev = Vec::new();
        for (k, (name, col)) in self.header.into_iter().zip(self.columns).enumerate() {
            if k == ry {
                y = col;
            } else if Some(k) == re {
                ev = col;
            } else {
                names.push(name);
                xcols.push(col);
            }
        }
        if xcols.is_empty() {
            return Err(CliError::Data(
                "no feature columns besides the response".into(),
            ));
        }
        let resp = match family {
            Family::Gaussian => Response::Gaussian { y },
            Family::Binomial => Response::Binomial { y },
            Family::Cox => {
                let mut event = Vec::with_capacity(ev.len());
                for (i, v) in ev.iter().enumerate() {
                    match *v {
                        1.0 => event.push(true),
                        0.0 => event.push(false),
                        x => {
                            return Err(CliError::Data(format!(
                                "row {}: event indicator must be 0 or 1, got {x}",
                                i + 2
                            )))
                        }
                    }
                }
                Response::Cox { time: y, event }
            }
        };
        let x = Matrix::from_columns(&xcols).map_err(|e| CliError::Data(e.to_string()))?;
        Ok(Dataset::new(x, resp, Some(names))?)
    }
}

/// Writes a dataset as CSV: the features, then `y` or `time,event`.
pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ds.names().to_vec();
    match ds.response() {
        Response::Gaussian { .. } | Response::Binomial { .. } => header.push("y".into()),
        Response::Cox { .. } => {
            header.push("time".into());
            header.push("event".into());
        }
    }
    w.write_record(&header).expect("in-memory write");
    let x = ds.x();
    for i in 0..ds.n() {
        let mut row: Vec<String> = (0..ds.p()).map(|j| x.get(i, j).to_string()).collect();
        match ds.response() {
            Response::Gaussian { y } | Response::Binomial { y } => row.push(y[i].to_string()),
            Response::Cox { time, event } => {
                row.push(time[i].to_string());
                row.push(u8::from(event[i]).to_string());
            }
        }
        w.write_record(&row).expect("in-memory write");
    }
    write_file(path, &w.into_inner().expect("flush"))
}

/// Writes `bytes` to `path`, creating missing parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(CliError::io(format!("cannot create {}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(CliError::io(format!("cannot write {}", path.display())))
}
