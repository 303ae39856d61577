//! CSV form of the per-frequency statistics.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use super::{FrequencyStats, HarnessError};
use crate::sampling::SchemeKind;

pub const CSV_HEADER: [&str; 11] = [
    "scheme",
    "n",
    "lambda",
    "mean_est",
    "true_phi",
    "bias_emp",
    "bias_theory",
    "var_emp",
    "var_theory",
    "mse_emp",
    "mse_theory",
];

/// Leading comment line of every file.
pub const CSV_COMMENT: &str =
    "# var_emp divides by the number of replications; mse_emp = bias_emp^2 + var_emp";

fn sorted(stats: &[FrequencyStats]) -> Vec<&FrequencyStats> {
    let mut rows: Vec<_> = stats.iter().collect();
    rows.sort_by(|a, b| {
        a.scheme
            .name()
            .cmp(b.scheme.name())
            .then(a.n.cmp(&b.n))
            .then(a.lambda.total_cmp(&b.lambda))
    });
    rows
}

/// Rows sorted by (scheme, n, lambda), numbers with 17 significant digits.
pub fn write_csv_to<W: Write>(stats: &[FrequencyStats], out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "{CSV_COMMENT}")?;
    let mut w = ::csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for s in sorted(stats) {
        let nums = [
            s.lambda,
            s.mean_est,
            s.true_phi,
            s.bias_emp,
            s.bias_theory,
            s.var_emp,
            s.var_theory,
            s.mse_emp,
            s.mse_theory,
        ];
        let mut record = Vec::with_capacity(11);
        record.push(s.scheme.name().to_string());
        record.push(s.n.to_string());
        record.extend(nums.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(stats: &[FrequencyStats], path: &Path) -> Result<(), HarnessError> {
    if stats.is_empty() {
        return Err(HarnessError::EmptyStats);
    }
    let mut buf = Vec::new();
    write_csv_to(stats, &mut buf).map_err(|source| io_err(path, source))?;
    fs::write(path, buf).map_err(|source| io_err(path, source))
}

fn io_err(path: &Path, source: io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn parse_csv(text: &str, path: &Path) -> Result<Vec<FrequencyStats>, HarnessError> {
    let fail = |line: usize, message: String| HarnessError::Parse {
        path: PathBuf::from(path),
        line,
        message,
    };
    let mut reader = ::csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| fail(0, e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(fail(1, format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut stats = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| fail(0, e.to_string()))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let scheme: SchemeKind = record[0].parse().map_err(|e: String| fail(line, e))?;
        let n: usize = record[1].parse().map_err(|e| fail(line, format!("n: {e}")))?;
        let mut nums = [0.0; 9];
        for (i, slot) in nums.iter_mut().enumerate() {
            *slot = record[i + 2]
                .parse()
                .map_err(|e| fail(line, format!("{}: {e}", CSV_HEADER[i + 2])))?;
        }
        let [lambda, mean_est, true_phi, bias_emp, bias_theory, var_emp, var_theory, mse_emp, mse_theory] =
            nums;
        stats.push(FrequencyStats {
            scheme,
            n,
            lambda,
            mean_est,
            true_phi,
            bias_emp,
            bias_theory,
            var_emp,
            var_theory,
            mse_emp,
            mse_theory,
        });
    }
    Ok(stats)
}

pub fn read_csv(path: &Path) -> Result<Vec<FrequencyStats>, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| io_err(path, source))?;
    parse_csv(&text, path)
}
