//! Output directory with CSV and JSON writers.

use crate::error::CliError;
use std::fs;
use std::path::{Path, PathBuf};

/// A table cell. Floats use the shortest representation that round-trips.
pub enum Cell {
    F(f64),
    U(usize),
    B(bool),
    S(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::U(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::B(x)
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::S(x)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) if x.is_nan() => "nan".into(),
            Cell::F(x) if x.is_infinite() => if *x > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::F(x) => format!("{x:?}"),
            Cell::U(x) => x.to_string(),
            Cell::B(x) => x.to_string(),
            Cell::S(x) => x.clone(),
        }
    }
}

pub struct Output {
    dir: PathBuf,
    written: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let dir = dir.canonicalize()?;
        Ok(Output { dir, written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<Cell>>,
    {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        self.text(name, &(text + "\n"))
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 123456789.0] {
            let s = Cell::F(x).render();
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(Cell::F(f64::NAN).render(), "nan");
        assert_eq!(Cell::F(f64::NEG_INFINITY).render(), "-inf");
    }

    #[test]
    fn records_written_files() {
        let d = tempfile::tempdir().unwrap();
        let mut o = Output::create(&d.path().join("x")).unwrap();
        o.csv("a.csv", &["k", "v"], [vec![1usize.into(), true.into()]]).unwrap();
        o.json("b.json", &serde_json::json!({ "k": 1 })).unwrap();
        assert_eq!(o.written(), ["a.csv", "b.json"]);
        assert_eq!(fs::read_to_string(o.dir().join("a.csv")).unwrap(), "k,v\n1,true\n");
    }
}
