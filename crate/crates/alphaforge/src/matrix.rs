//! Dense row-major T×N matrix with NaN as the missing marker.

use crate::error::{Error, Result};

pub const MISSING: f64 = f64::NAN;

#[inline]
pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn missing(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![MISSING; rows * cols] }
    }

    pub fn constant(rows: usize, cols: usize, v: f64) -> Self {
        Matrix { rows, cols, data: vec![v; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for {}x{}, got {}",
                rows * cols,
                rows,
                cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn col_iter(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |r| self.get(r, c))
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    /// Rows `range.start..range.end` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Matrix {
        assert!(start <= end && end <= self.rows);
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    pub fn defined_count(&self) -> usize {
        self.data.iter().filter(|v| !is_missing(**v)).count()
    }

    /// True when both matrices have identical values and identical missing masks.
    pub fn bitwise_eq(&self, other: &Matrix) -> bool {
        self.same_shape(other)
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()))
    }

    /// Max absolute difference over cells where both are defined; `None` when
    /// the missing masks differ.
    pub fn max_abs_diff(&self, other: &Matrix) -> Option<f64> {
        if !self.same_shape(other) {
            return None;
        }
        let mut max = 0.0f64;
        for (a, b) in self.data.iter().zip(&other.data) {
            match (is_missing(*a), is_missing(*b)) {
                (true, true) => {}
                (false, false) => max = max.max((a - b).abs()),
                _ => return None,
            }
        }
        Some(max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_rows_takes_prefix() {
        let m = Matrix::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let s = m.slice_rows(0, 2);
        assert_eq!(s.rows(), 2);
        assert_eq!(s.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn max_abs_diff_detects_mask_mismatch() {
        let a = Matrix::from_vec(1, 2, vec![1.0, MISSING]).unwrap();
        let b = Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        assert_eq!(a.max_abs_diff(&b), None);
        assert!(a.bitwise_eq(&a.clone()));
    }
}
