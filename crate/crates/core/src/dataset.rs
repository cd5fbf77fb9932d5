//! Datasets and their CSV / raw binary encodings.
//!
//! CSV layout: a header line `n,p` (optionally followed by the tokens
//! `groups` and/or `labels`), then `n` lines holding `p` feature values, the
//! target and, when declared, an integer group id.
//!
//! Raw layout: a 16-byte header (`AGD1`, u32 n, u32 p, u32 flags, all little
//! endian) followed by row-major little-endian f64 values; each row holds the
//! `p` features, the target and, when flagged, the group id.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RAW_MAGIC: &[u8; 4] = b"AGD1";
const FLAG_GROUPS: u32 = 1;
const FLAG_LABELS: u32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Continuous(Array1<f64>),
    Labels(Vec<i64>),
}

impl Target {
    pub fn len(&self) -> usize {
        match self {
            Target::Continuous(y) => y.len(),
            Target::Labels(y) => y.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Target::Continuous(_) => Task::Regression,
            Target::Labels(_) => Task::Classification,
        }
    }

    pub fn select(&self, rows: &[usize]) -> Target {
        match self {
            Target::Continuous(y) => Target::Continuous(rows.iter().map(|&i| y[i]).collect()),
            Target::Labels(y) => Target::Labels(rows.iter().map(|&i| y[i]).collect()),
        }
    }

    pub fn as_continuous(&self) -> Result<&Array1<f64>> {
        match self {
            Target::Continuous(y) => Ok(y),
            Target::Labels(_) => Err(Error::invalid("expected a continuous target")),
        }
    }

    pub fn as_labels(&self) -> Result<&[i64]> {
        match self {
            Target::Labels(y) => Ok(y),
            Target::Continuous(_) => Err(Error::invalid("expected class labels")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Csv,
    RawF64,
}

impl DataFormat {
    /// Picks the format from a file extension (`.csv` or anything else = raw).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DataFormat::Csv,
            _ => DataFormat::RawF64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    y: Target,
    groups: Option<Vec<i64>>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Target, groups: Option<Vec<i64>>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::invalid(format!(
                "X has {} rows but y has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if let Some(g) = &groups {
            if g.len() != x.nrows() {
                return Err(Error::invalid(format!(
                    "X has {} rows but groups has {} entries",
                    x.nrows(),
                    g.len()
                )));
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("X contains non-finite values"));
        }
        if let Target::Continuous(y) = &y {
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("y contains non-finite values"));
            }
        }
        Ok(Dataset { x, y, groups })
    }

    pub fn regression(x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        Self::new(x, Target::Continuous(y), None)
    }

    pub fn with_groups(mut self, groups: Vec<i64>) -> Result<Self> {
        if groups.len() != self.n_samples() {
            return Err(Error::invalid("group vector length differs from sample count"));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Target {
        &self.y
    }

    pub fn groups(&self) -> Option<&[i64]> {
        self.groups.as_deref()
    }

    pub fn n_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), rows),
            y: self.y.select(rows),
            groups: self.groups.as_ref().map(|g| rows.iter().map(|&i| g[i]).collect()),
        }
    }

    pub fn load(path: impl AsRef<Path>, format: DataFormat) -> Result<Self> {
        let path = path.as_ref();
        match format {
            DataFormat::Csv => Self::from_csv(&fs::read_to_string(path)?),
            DataFormat::RawF64 => Self::from_raw(&fs::read(path)?),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, format: DataFormat) -> Result<()> {
        let bytes = match format {
            DataFormat::Csv => self.to_csv().into_bytes(),
            DataFormat::RawF64 => self.to_raw(),
        };
        fs::write(path, bytes)?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let mut out = format!("{},{}", self.n_samples(), self.n_features());
        if self.groups.is_some() {
            out.push_str(",groups");
        }
        if let Target::Labels(_) = self.y {
            out.push_str(",labels");
        }
        out.push('\n');
        for (i, row) in self.x.outer_iter().enumerate() {
            for v in row {
                let _ = write!(out, "{v},");
            }
            match &self.y {
                Target::Continuous(y) => {
                    let _ = write!(out, "{}", y[i]);
                }
                Target::Labels(y) => {
                    let _ = write!(out, "{}", y[i]);
                }
            }
            if let Some(g) = &self.groups {
                let _ = write!(out, ",{}", g[i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            location: "line 1".into(),
            message: "missing header".into(),
        })?;
        let header_err = |message: &str| Error::Parse {
            location: "line 1 (header)".into(),
            message: message.into(),
        };
        let tokens: Vec<&str> = header.split(',').map(str::trim).collect();
        if tokens.len() < 2 {
            return Err(header_err("expected `n,p`"));
        }
        let n: usize = tokens[0].parse().map_err(|_| header_err("n is not an integer"))?;
        let p: usize = tokens[1].parse().map_err(|_| header_err("p is not an integer"))?;
        let mut has_groups = false;
        let mut labels = false;
        for t in &tokens[2..] {
            match *t {
                "groups" => has_groups = true,
                "labels" => labels = true,
                other => return Err(header_err(&format!("unknown header token `{other}`"))),
            }
        }

        let arity = p + 1 + usize::from(has_groups);
        let mut x = Array2::zeros((n, p));
        let mut y_real = Vec::with_capacity(n);
        let mut y_lab = Vec::with_capacity(n);
        let mut groups = Vec::with_capacity(n);
        let mut row = 0;
        for (line_no, line) in lines {
            let location = |col: Option<usize>| match col {
                Some(c) => format!("row {} (line {}), column {}", row + 1, line_no + 1, c + 1),
                None => format!("row {} (line {})", row + 1, line_no + 1),
            };
            if row >= n {
                return Err(Error::Parse {
                    location: location(None),
                    message: format!("more data rows than the declared n = {n}"),
                });
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != arity {
                return Err(Error::Parse {
                    location: location(None),
                    message: format!("expected {arity} columns, found {}", cells.len()),
                });
            }
            for (j, cell) in cells[..p].iter().enumerate() {
                x[[row, j]] = cell.parse().map_err(|_| Error::Parse {
                    location: location(Some(j)),
                    message: format!("non-numeric value `{cell}`"),
                })?;
            }
            let target = cells[p];
            if labels {
                y_lab.push(target.parse::<i64>().map_err(|_| Error::Parse {
                    location: location(Some(p)),
                    message: format!("non-integer label `{target}`"),
                })?);
            } else {
                y_real.push(target.parse::<f64>().map_err(|_| Error::Parse {
                    location: location(Some(p)),
                    message: format!("non-numeric target `{target}`"),
                })?);
            }
            if has_groups {
                let g = cells[p + 1];
                groups.push(g.parse::<i64>().map_err(|_| Error::Parse {
                    location: location(Some(p + 1)),
                    message: format!("non-integer group `{g}`"),
                })?);
            }
            row += 1;
        }
        if row != n {
            return Err(Error::Parse {
                location: format!("end of file after {row} rows"),
                message: format!("declared n = {n} rows"),
            });
        }
        let y = if labels {
            Target::Labels(y_lab)
        } else {
            Target::Continuous(Array1::from(y_real))
        };
        Dataset::new(x, y, has_groups.then_some(groups))
    }

    pub fn to_raw(&self) -> Vec<u8> {
        let (n, p) = self.x.dim();
        let mut flags = 0;
        if self.groups.is_some() {
            flags |= FLAG_GROUPS;
        }
        if matches!(self.y, Target::Labels(_)) {
            flags |= FLAG_LABELS;
        }
        let width = p + 1 + usize::from(self.groups.is_some());
        let mut out = Vec::with_capacity(16 + 8 * n * width);
        out.extend_from_slice(RAW_MAGIC);
        out.extend_from_slice(&(n as u32).to_le_bytes());
        out.extend_from_slice(&(p as u32).to_le_bytes());
        out.extend_from_slice(&flags.to_le_bytes());
        for i in 0..n {
            for v in self.x.row(i) {
                out.extend_from_slice(&v.to_le_bytes());
            }
            let t = match &self.y {
                Target::Continuous(y) => y[i],
                Target::Labels(y) => y[i] as f64,
            };
            out.extend_from_slice(&t.to_le_bytes());
            if let Some(g) = &self.groups {
                out.extend_from_slice(&(g[i] as f64).to_le_bytes());
            }
        }
        out
    }

    pub fn from_raw(bytes: &[u8]) -> Result<Self> {
        let err = |location: String, message: &str| Error::Parse {
            location,
            message: message.into(),
        };
        if bytes.len() < 16 || &bytes[..4] != RAW_MAGIC {
            return Err(err("header".into(), "missing AGD1 magic"));
        }
        let word = |k: usize| u32::from_le_bytes(bytes[4 * k..4 * k + 4].try_into().unwrap());
        let (n, p, flags) = (word(1) as usize, word(2) as usize, word(3));
        let has_groups = flags & FLAG_GROUPS != 0;
        let labels = flags & FLAG_LABELS != 0;
        let width = p + 1 + usize::from(has_groups);
        let expected = 16 + 8 * n * width;
        if bytes.len() != expected {
            return Err(err(
                "payload".into(),
                &format!("expected {expected} bytes for n={n}, p={p}, found {}", bytes.len()),
            ));
        }
        let value = |i: usize, j: usize| {
            let at = 16 + 8 * (i * width + j);
            f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
        };
        let x = Array2::from_shape_fn((n, p), |(i, j)| value(i, j));
        let y = if labels {
            let mut lab = Vec::with_capacity(n);
            for i in 0..n {
                let v = value(i, p);
                if v.fract() != 0.0 {
                    return Err(err(format!("row {}, target", i + 1), "non-integer label"));
                }
                lab.push(v as i64);
            }
            Target::Labels(lab)
        } else {
            Target::Continuous((0..n).map(|i| value(i, p)).collect())
        };
        let groups = has_groups.then(|| (0..n).map(|i| value(i, p + 1) as i64).collect());
        Dataset::new(x, y, groups)
    }
}
