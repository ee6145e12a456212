//! CSV tables, run metadata and gnuplot scripts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use cutfem::linalg::SparseMatrix;

use crate::config::Experiment;
use crate::error::CliError;

/// Shortest round-trip text of a value; empty when not finite.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        String::new()
    }
}

/// Round-trip text of an input parameter, in plain notation where possible.
pub fn param(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Output directory of one run; remembers what was written.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    pub written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|source| CliError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.written.push(path);
        Ok(())
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        self.write(name, &table.to_csv())
    }

    pub fn metadata(&mut self, experiment: &Experiment) -> Result<(), CliError> {
        let mut table = Table::new(&["key", "value"]);
        for (k, v) in experiment.metadata() {
            table.push(vec![k.to_string(), v]);
        }
        self.table(
            &format!(
                "{}_metadata.csv",
                experiment.command.name().replace('-', "_")
            ),
            &table,
        )
    }

    pub fn matrix(&mut self, name: &str, matrix: &SparseMatrix<f64>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        matrix.write_triplets(&mut buf).expect("writing to memory");
        self.write(name, &String::from_utf8(buf).expect("utf-8 triplets"))
    }

    pub fn vector(&mut self, name: &str, values: &[f64]) -> Result<(), CliError> {
        let mut table = Table::new(&["index", "value"]);
        for (i, v) in values.iter().enumerate() {
            table.push(vec![i.to_string(), num(*v)]);
        }
        self.table(name, &table)
    }
}

/// One curve of a log-log plot: `log(y)` against `log(x)` over the rows of
/// `data` where column `filter.0` equals `filter.1`.
pub struct Curve {
    pub title: String,
    pub x_column: usize,
    pub y_column: usize,
    pub filter: Option<(usize, f64)>,
}

/// Script plotting natural logarithms of the columns, with dashed reference
/// lines `log y = c + slope log x`.
pub fn gnuplot_loglog(
    data: &str,
    output: &str,
    xlabel: &str,
    ylabel: &str,
    curves: &[Curve],
    references: &[(String, f64, f64)],
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Ordinates and abscissae are natural logarithms.");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set terminal svg size 800,600");
    let _ = writeln!(s, "set output '{output}'");
    let _ = writeln!(s, "set xlabel '{xlabel}'");
    let _ = writeln!(s, "set ylabel '{ylabel}'");
    let _ = writeln!(s, "set key outside right");
    let _ = writeln!(s, "set grid");
    let mut items = Vec::new();
    for c in curves {
        let y = match c.filter {
            Some((col, value)) => format!("((${col} == {value}) ? log(${}) : 1/0)", c.y_column),
            None => format!("(log(${}))", c.y_column),
        };
        items.push(format!(
            "'{data}' skip 1 using (log(${})):{y} with linespoints title '{}'",
            c.x_column, c.title
        ));
    }
    for (title, intercept, slope) in references {
        items.push(format!(
            "{intercept} + {slope}*x with lines dashtype 2 title '{title}'"
        ));
    }
    let _ = writeln!(s, "plot \\\n    {}", items.join(", \\\n    "));
    s
}
