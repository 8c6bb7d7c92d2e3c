//! Dense row-major point tables.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{config, Result, SstError};

/// A single point in ℝᵈ, borrowed from a [`Dataset`] row or any slice.
pub type Point = [f64];

/// `len` points of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
}

impl Dataset {
    /// Wraps a row-major buffer. Every coordinate must be finite.
    pub fn from_flat(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return config("points must have dimension at least 1");
        }
        if !values.len().is_multiple_of(dim) {
            return config(format!(
                "buffer of {} values is not a whole number of {dim}-dimensional points",
                values.len()
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return config(format!(
                "non-finite coordinate in row {}, column {}",
                pos / dim,
                pos % dim
            ));
        }
        Ok(Self { dim, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return config("cannot infer dimension from zero rows");
        };
        let dim = first.as_ref().len();
        let mut values = Vec::with_capacity(dim * rows.len());
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return config(format!("row {i} has dimension {}, expected {dim}", r.len()));
            }
            values.extend_from_slice(r);
        }
        Self::from_flat(dim, values)
    }

    /// A univariate dataset.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::from_flat(1, values.to_vec())
    }

    /// An empty dataset of the given dimension.
    pub fn empty(dim: usize) -> Self {
        Self { dim: dim.max(1), values: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &Point {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &Point> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.values
    }

    /// Builds a dataset from selected rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self { dim: self.dim, values }
    }

    /// The single coordinate of every point of a univariate dataset.
    pub fn scalars(&self) -> Result<&[f64]> {
        if self.dim != 1 {
            return Err(SstError::Usage(format!(
                "expected univariate data, got dimension {}",
                self.dim
            )));
        }
        Ok(&self.values)
    }

    /// Reads a headerless CSV file with one point per row.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| {
            SstError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
        })?;
        Self::read_csv_from(file)
    }

    pub fn read_csv_from(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut dim = None;
        let mut values = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            match dim {
                None => dim = Some(rec.len()),
                Some(d) if d != rec.len() => {
                    return config(format!("CSV row {i} has {} fields, expected {d}", rec.len()))
                }
                _ => {}
            }
            for field in rec.iter() {
                let v: f64 = field.parse().map_err(|_| {
                    SstError::Config(format!("CSV row {i}: cannot parse {field:?} as a number"))
                })?;
                values.push(v);
            }
        }
        match dim {
            Some(d) => Self::from_flat(d, values),
            None => config("CSV input contains no rows"),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()?;
        Ok(())
    }
}
