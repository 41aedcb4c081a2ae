use crate::error::{invalid, Result};
use crate::signal::C64;

/// Dense complex `rows x cols` matrix stored column-major.
///
/// Used for every delay-by-geotime array in the crate: row `m` is a delay
/// bin, column `j` is one snapshot of the impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct TapMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl TapMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_columns(rows: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 {
            return Err(invalid("matrix needs at least one row"));
        }
        if !data.len().is_multiple_of(rows) {
            return Err(invalid(format!(
                "{} values do not fill whole columns of {rows}",
                data.len()
            )));
        }
        Ok(Self { rows, cols: data.len() / rows, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[col * self.rows + row]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[col * self.rows + row] = value;
    }

    pub fn column(&self, col: usize) -> &[C64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn column_mut(&mut self, col: usize) -> &mut [C64] {
        &mut self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn columns(&self) -> std::slice::ChunksExact<'_, C64> {
        self.data.chunks_exact(self.rows)
    }

    /// Copies one delay row across all columns.
    pub fn row(&self, row: usize) -> Vec<C64> {
        self.columns().map(|c| c[row]).collect()
    }

    /// Sub-matrix made of columns `start..end`.
    pub fn column_range(&self, start: usize, end: usize) -> TapMatrix {
        TapMatrix {
            rows: self.rows,
            cols: end - start,
            data: self.data[start * self.rows..end * self.rows].to_vec(),
        }
    }

    /// Zero every row whose delay is not in `keep`.
    pub fn keep_rows(&self, keep: &[usize]) -> TapMatrix {
        let mut out = self.clone();
        for col in out.data.chunks_exact_mut(self.rows) {
            for (m, v) in col.iter_mut().enumerate() {
                if !keep.contains(&m) {
                    *v = C64::new(0.0, 0.0);
                }
            }
        }
        out
    }
}
