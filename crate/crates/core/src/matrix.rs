//! Dense Hermitian matrices (real symmetric or complex Hermitian) and the
//! plain-text matrix format: first line `n`, then `n` rows of `n` values.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A dense Hermitian matrix. Real symmetric matrices are stored as `f64` so
/// the β=1 path never pays for complex arithmetic.
#[derive(Debug, Clone)]
pub enum HermitianMatrix {
    Real(Mat<f64>),
    Complex(Mat<Complex64>),
}

impl HermitianMatrix {
    pub fn zeros_real(n: usize) -> Self {
        Self::Real(Mat::zeros(n, n))
    }

    pub fn from_real_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self::Real(Mat::from_fn(n, n, f))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self::Real(Mat::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 }))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Real(m) => m.nrows(),
            Self::Complex(m) => m.nrows(),
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, Self::Real(_))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        match self {
            Self::Real(m) => Complex64::new(m[(i, j)], 0.0),
            Self::Complex(m) => m[(i, j)],
        }
    }

    /// `max |H_ij − conj(H_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in j..n {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// `max |H_ij|`.
    pub fn sup_norm(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max(self.get(i, j).norm());
            }
        }
        worst
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i).re).sum()
    }

    /// Copy as a complex matrix.
    pub fn to_complex(&self) -> Mat<Complex64> {
        match self {
            Self::Real(m) => Mat::from_fn(m.nrows(), m.ncols(), |i, j| Complex64::new(m[(i, j)], 0.0)),
            Self::Complex(m) => m.clone(),
        }
    }

    /// Write in the plain-text format. Complex entries are written as
    /// `re,im` pairs.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.dim();
        writeln!(w, "{n}")?;
        let mut line = String::new();
        for i in 0..n {
            line.clear();
            for j in 0..n {
                if j > 0 {
                    line.push(' ');
                }
                match self {
                    Self::Real(m) => write!(line, "{:e}", m[(i, j)]),
                    Self::Complex(m) => write!(line, "{:e},{:e}", m[(i, j)].re, m[(i, j)].im),
                }
                .expect("writing to a String cannot fail");
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Read a real square matrix in the plain-text format.
pub fn read_real_text<R: BufRead>(r: R) -> Result<Mat<f64>> {
    let mut lines = r.lines();
    let header = loop {
        match lines.next() {
            Some(line) => {
                let line = line?;
                let t = line.trim();
                if !t.is_empty() && !t.starts_with('#') {
                    break t.to_string();
                }
            }
            None => return Err(Error::Parse("empty matrix file".into())),
        }
    };
    let n: usize = header
        .parse()
        .map_err(|_| Error::Parse(format!("bad dimension line {header:?}")))?;
    if n == 0 {
        return Err(Error::Parse("matrix dimension must be positive".into()));
    }
    let mut out = Mat::<f64>::zeros(n, n);
    let mut row = 0;
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if row >= n {
            return Err(Error::Parse(format!("more than {n} rows")));
        }
        let mut count = 0;
        for (j, tok) in t.split_whitespace().enumerate() {
            if j >= n {
                return Err(Error::Parse(format!("row {row} has more than {n} entries")));
            }
            out[(row, j)] = tok
                .parse()
                .map_err(|_| Error::Parse(format!("bad number {tok:?} in row {row}")))?;
            count += 1;
        }
        if count != n {
            return Err(Error::Parse(format!("row {row} has {count} entries, expected {n}")));
        }
        row += 1;
    }
    if row != n {
        return Err(Error::Parse(format!("found {row} rows, expected {n}")));
    }
    Ok(out)
}
