use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

pub type CsvSink = csv::Writer<Box<dyn Write>>;

/// 17 significant digits, round-trip exact for `f64`.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_sink(out: Option<&Path>) -> CliResult<CsvSink> {
    let w: Box<dyn Write> = match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::io(p.display().to_string(), e))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(w))
}

/// `path` with `suffix` appended to the file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Graymap with maxval 255; `pixels` is row-major, top row first.
pub fn write_pgm(
    path: &Path,
    width: usize,
    height: usize,
    pixels: &[u8],
    binary: bool,
) -> CliResult<()> {
    let io_err = |e| CliError::io(path.display().to_string(), e);
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    if binary {
        write!(w, "P5\n{width} {height}\n255\n").map_err(io_err)?;
        w.write_all(pixels).map_err(io_err)?;
    } else {
        write!(w, "P2\n{width} {height}\n255\n").map_err(io_err)?;
        for row in pixels.chunks(width) {
            let line: Vec<String> = row.iter().map(u8::to_string).collect();
            writeln!(w, "{}", line.join(" ")).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Flat `key=value` record of a run.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Recorded command line, without the program name.
    pub fn argv(&self) -> Vec<String> {
        let mut args: Vec<(usize, &str)> = self
            .entries
            .iter()
            .filter_map(|(k, v)| Some((k.strip_prefix("arg.")?.parse().ok()?, v.as_str())))
            .collect();
        args.sort_by_key(|&(i, _)| i);
        args.into_iter().map(|(_, v)| v.to_string()).collect()
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut text = String::new();
        for (k, v) in &self.entries {
            text.push_str(k);
            text.push('=');
            text.push_str(v);
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| CliError::io(path.display().to_string(), e))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(path.display().to_string(), e))?;
        let mut m = Manifest::default();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{}:{}: expected key=value", path.display(), n + 1))
            })?;
            m.push(k, v);
        }
        Ok(m)
    }
}
