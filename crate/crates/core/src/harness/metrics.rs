use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One member's result for one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub member: usize,
    pub interval_return: f64,
    pub hyperparams: Vec<f64>,
    pub wallclock_s: f64,
}

/// Parsed contents of a metrics file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    pub hyperparam_names: Vec<String>,
    pub rows: Vec<MetricsRow>,
}

impl Metrics {
    /// Member ids in ascending order.
    pub fn members(&self) -> Vec<usize> {
        let mut m: Vec<usize> = self.rows.iter().map(|r| r.member).collect();
        m.sort_unstable();
        m.dedup();
        m
    }

    /// `(step, return)` pairs of one member, in file order.
    pub fn curve(&self, member: usize) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.member == member)
            .map(|r| (r.step as f64, r.interval_return))
            .collect()
    }
}

/// Streams rows to CSV with header
/// `step,member,return,<hyperparameters...>,wallclock_s`.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
    width: usize,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new<S: AsRef<str>>(out: W, hyperparam_names: &[S]) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string(), "member".into(), "return".into()];
        header.extend(hyperparam_names.iter().map(|s| s.as_ref().to_string()));
        header.push("wallclock_s".into());
        inner.write_record(&header)?;
        Ok(Self {
            inner,
            width: hyperparam_names.len(),
        })
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        if row.hyperparams.len() != self.width {
            return Err(Error::invalid(
                "metrics row has the wrong number of hyperparameters",
            ));
        }
        let mut rec = vec![
            row.step.to_string(),
            row.member.to_string(),
            format!("{:?}", row.interval_return),
        ];
        rec.extend(row.hyperparams.iter().map(|v| format!("{v:?}")));
        rec.push(format!("{:?}", row.wallclock_s));
        self.inner.write_record(&rec)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }

    pub fn finish(self) -> Result<W> {
        self.inner
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

/// Parses a metrics file. Errors carry the 1-based line number.
pub fn read_metrics<R: Read>(input: R) -> Result<Metrics> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Ok(Metrics::default());
    }
    let fixed = ["step", "member", "return"];
    if header.len() < 4 || header[..3] != fixed || header[header.len() - 1] != "wallclock_s" {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected metrics header {header:?}"),
        });
    }
    let hyperparam_names = header[3..header.len() - 1].to_vec();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(i as u64 + 2, |p| p.line());
        let num = |idx: usize| -> Result<f64> {
            rec[idx].trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("column `{}`: `{}` is not a number", header[idx], &rec[idx]),
            })
        };
        let int = |idx: usize| -> Result<u64> {
            rec[idx].trim().parse::<u64>().map_err(|_| Error::Parse {
                line,
                message: format!(
                    "column `{}`: `{}` is not an integer",
                    header[idx], &rec[idx]
                ),
            })
        };
        rows.push(MetricsRow {
            step: int(0)?,
            member: int(1)? as usize,
            interval_return: num(2)?,
            hyperparams: (3..header.len() - 1).map(num).collect::<Result<_>>()?,
            wallclock_s: num(header.len() - 1)?,
        });
    }
    Ok(Metrics {
        hyperparam_names,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut w = MetricsWriter::new(Vec::new(), &["learning_rate", "gamma"]).unwrap();
        let row = MetricsRow {
            step: 4096,
            member: 1,
            interval_return: -812.25,
            hyperparams: vec![3e-5, 0.99],
            wallclock_s: 0.0,
        };
        w.write(&row).unwrap();
        let bytes = w.finish().unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("step,member,return,learning_rate,gamma,wallclock_s\n"));
        let m = read_metrics(&bytes[..]).unwrap();
        assert_eq!(m.rows, vec![row]);
        assert_eq!(m.members(), vec![1]);
    }

    #[test]
    fn bad_value_reports_line() {
        let text = "step,member,return,lr,wallclock_s\n1,0,-1.0,0.1,0\n2,0,oops,0.1,0\n";
        match read_metrics(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let ragged = "step,member,return,lr,wallclock_s\n1,0,-1.0\n";
        assert!(matches!(
            read_metrics(ragged.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn empty_input_is_empty() {
        assert_eq!(read_metrics(&b""[..]).unwrap(), Metrics::default());
    }
}
