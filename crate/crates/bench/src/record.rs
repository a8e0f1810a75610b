//! Benchmark rows and their CSV form.
//!
//! Header (exact): `algo,n,k,d,batch,boost,mode,seed,repeat_index,wall_time_s,nccs_mean,nccs_std`.
//! Reals are written with 9 significant digits (`%.9g` style), rows sorted by
//! `(algo, n, k, repeat_index)`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use softtopk_core::SoftmaxMode;

use crate::error::{BenchError, Result};

pub const CSV_HEADER: [&str; 12] = [
    "algo",
    "n",
    "k",
    "d",
    "batch",
    "boost",
    "mode",
    "seed",
    "repeat_index",
    "wall_time_s",
    "nccs_mean",
    "nccs_std",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algo {
    Exact,
    Halving,
    Iterative,
}

impl Algo {
    pub const ALL: [Algo; 3] = [Algo::Exact, Algo::Halving, Algo::Iterative];

    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Exact => "exact",
            Algo::Halving => "halving",
            Algo::Iterative => "iterative",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Algo::Exact),
            "halving" => Ok(Algo::Halving),
            "iterative" => Ok(Algo::Iterative),
            other => Err(format!("unknown algorithm {other:?}")),
        }
    }
}

/// One timed repeat of one algorithm at one `(n, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub algo: Algo,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub batch: usize,
    pub boost: f64,
    pub mode: SoftmaxMode,
    pub seed: u64,
    pub repeat_index: usize,
    /// Forward pass over the whole batch.
    pub wall_time_s: f64,
    pub nccs_mean: f64,
    pub nccs_std: f64,
}

impl BenchRecord {
    fn sort_key(&self) -> (Algo, usize, usize, usize) {
        (self.algo, self.n, self.k, self.repeat_index)
    }

    fn to_fields(&self) -> [String; 12] {
        [
            self.algo.to_string(),
            self.n.to_string(),
            self.k.to_string(),
            self.d.to_string(),
            self.batch.to_string(),
            format_sig9(self.boost),
            self.mode.to_string(),
            self.seed.to_string(),
            self.repeat_index.to_string(),
            format_sig9(self.wall_time_s),
            format_sig9(self.nccs_mean),
            format_sig9(self.nccs_std),
        ]
    }
}

/// Formats like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (8 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes `records` sorted by `(algo, n, k, repeat_index)`. Fails without
/// touching the file system when there is nothing to write.
pub fn emit_csv(records: &[BenchRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(BenchError::NoRecords);
    }
    let mut sorted: Vec<&BenchRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.sort_key());

    let csv_err = |source| BenchError::Csv { path: path.to_path_buf(), source };
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in sorted {
        writer.write_record(r.to_fields()).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| BenchError::io(path, e))
}

/// Parses a file written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<BenchRecord>> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let csv_err = |source| BenchError::Csv { path: path.to_path_buf(), source };
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(BenchError::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("unexpected header {header:?}"),
        });
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |reason: String| BenchError::Parse { path: path.to_path_buf(), line, reason };
        let field = |i: usize| row.get(i).ok_or_else(|| bad(format!("missing column {}", CSV_HEADER[i])));
        fn num<T: FromStr>(s: &str, name: &str) -> Result<T, String> {
            s.parse().map_err(|_| format!("bad {name} {s:?}"))
        }
        let parse = || -> Result<BenchRecord, String> {
            Ok(BenchRecord {
                algo: row[0].parse()?,
                n: num(&row[1], "n")?,
                k: num(&row[2], "k")?,
                d: num(&row[3], "d")?,
                batch: num(&row[4], "batch")?,
                boost: num(&row[5], "boost")?,
                mode: row[6].parse().map_err(|e: softtopk_core::Error| e.to_string())?,
                seed: num(&row[7], "seed")?,
                repeat_index: num(&row[8], "repeat_index")?,
                wall_time_s: num(&row[9], "wall_time_s")?,
                nccs_mean: num(&row[10], "nccs_mean")?,
                nccs_std: num(&row[11], "nccs_std")?,
            })
        };
        field(CSV_HEADER.len() - 1)?;
        records.push(parse().map_err(bad)?);
    }
    Ok(records)
}
