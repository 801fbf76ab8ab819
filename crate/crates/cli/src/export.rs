//! CSV exporters for training curves and learned distributions.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use mpboost::{IterationRecord, ProbabilityVector};

use crate::CliError;

pub const CURVES_HEADER: &str = "t,train_acc,oop,test_acc";

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(CliError::io(path))
}

pub fn write_curves(out: &mut impl Write, records: &[IterationRecord]) -> std::io::Result<()> {
    writeln!(out, "{CURVES_HEADER}")?;
    for r in records {
        write!(out, "{},{},{},", r.t, r.train_accuracy, r.oop)?;
        if let Some(acc) = r.test_accuracy {
            write!(out, "{acc}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_curves(path: &Path, records: &[IterationRecord]) -> Result<(), CliError> {
    let mut out = create(path)?;
    write_curves(&mut out, records)
        .and_then(|_| out.flush())
        .map_err(CliError::io(path))
}

/// `index,probability` rows for the observation distribution.
pub fn save_observation_probs(path: &Path, p: &ProbabilityVector) -> Result<(), CliError> {
    let mut out = create(path)?;
    let result: std::io::Result<()> = (|| {
        writeln!(out, "index,probability")?;
        for (i, v) in p.as_slice().iter().enumerate() {
            writeln!(out, "{i},{v}")?;
        }
        out.flush()
    })();
    result.map_err(CliError::io(path))
}

/// `feature,probability` rows; the feature is its name when known,
/// otherwise its column index.
pub fn save_feature_probs(
    path: &Path,
    q: &ProbabilityVector,
    names: Option<&[String]>,
) -> Result<(), CliError> {
    let mut out = create(path)?;
    let result: std::io::Result<()> = (|| {
        writeln!(out, "feature,probability")?;
        for (j, v) in q.as_slice().iter().enumerate() {
            match names {
                Some(names) => writeln!(out, "{},{v}", csv_field(&names[j]))?,
                None => writeln!(out, "{j},{v}")?,
            }
        }
        out.flush()
    })();
    result.map_err(CliError::io(path))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_format() {
        let records = [
            IterationRecord {
                t: 1,
                train_accuracy: 0.5,
                oop: 0.25,
                test_accuracy: None,
            },
            IterationRecord {
                t: 2,
                train_accuracy: 0.75,
                oop: 0.5,
                test_accuracy: Some(1.0),
            },
        ];
        let mut buf = Vec::new();
        write_curves(&mut buf, &records).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,train_acc,oop,test_acc\n1,0.5,0.25,\n2,0.75,0.5,1\n"
        );
    }

    #[test]
    fn quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
