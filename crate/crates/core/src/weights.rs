//! Row-stochastic link interaction weights and their text file format.
//!
//! A weight file starts with the header `TAPW 1 <num_links>` followed by one
//! `a a' w` line per nonzero weight, using 1-based link indices in network
//! file order. Absent entries are zero.

use std::fmt::Write as _;
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;
use crate::tntp::MAX_NODES;

/// Allowed deviation of a row sum from one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Interaction weights `W`: nonnegative, every row sums to one and carries
/// its diagonal entry. Effective flows are `f = W x`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(SparseMatrix);

impl WeightMatrix {
    pub fn new(matrix: SparseMatrix) -> Result<Self> {
        for r in 0..matrix.dim() {
            let mut has_diagonal = false;
            for (c, v) in matrix.row(r) {
                if v < 0.0 {
                    return Err(Error::InvalidWeights(format!(
                        "negative weight {v} at ({}, {})",
                        r + 1,
                        c + 1
                    )));
                }
                has_diagonal |= c == r;
            }
            if !has_diagonal {
                return Err(Error::InvalidWeights(format!(
                    "row {} has no diagonal entry",
                    r + 1
                )));
            }
            let sum = matrix.row_sum(r);
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidWeights(format!(
                    "row {} sums to {sum}",
                    r + 1
                )));
            }
        }
        Ok(WeightMatrix(matrix))
    }

    pub fn identity(n: usize) -> Self {
        WeightMatrix(SparseMatrix::identity(n))
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(SparseMatrix::from_dense(rows)?)
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> SparseMatrix {
        self.0
    }

    /// Strict diagonal dominance: `w_aa > sum of the other entries of row a`.
    pub fn is_diagonally_dominant(&self) -> bool {
        (0..self.0.dim()).all(|r| {
            let diag = self.0.get(r, r);
            let off: f64 = self.0.row(r).filter(|&(c, _)| c != r).map(|(_, v)| v).sum();
            diag > off
        })
    }
}

impl Deref for WeightMatrix {
    type Target = SparseMatrix;

    fn deref(&self) -> &SparseMatrix {
        &self.0
    }
}

pub fn write_weights(weights: &WeightMatrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "TAPW 1 {}", weights.dim());
    for (r, c, v) in weights.triplets() {
        let _ = writeln!(out, "{} {} {:?}", r + 1, c + 1, v);
    }
    out
}

pub fn read_weights(text: &str) -> Result<WeightMatrix> {
    let mut lines = text
        .split(['\n', '\r'])
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty weight file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let n = match fields.as_slice() {
        ["TAPW", "1", n] => n
            .parse::<usize>()
            .map_err(|_| Error::parse(line, format!("invalid link count {n:?}")))?,
        _ => return Err(Error::parse(line, "expected header `TAPW 1 <num_links>`")),
    };
    if n > MAX_NODES {
        return Err(Error::parse(line, format!("link count {n} too large")));
    }
    let mut triplets = Vec::new();
    for (line, content) in lines {
        let fields: Vec<&str> = content.split_whitespace().collect();
        let [a, b, w] = fields.as_slice() else {
            return Err(Error::parse(line, "expected `a a' w`"));
        };
        let index = |tok: &str| -> Result<usize> {
            match tok.parse::<usize>() {
                Ok(i) if (1..=n).contains(&i) => Ok(i - 1),
                _ => Err(Error::parse(line, format!("link index {tok:?} outside 1..={n}"))),
            }
        };
        let (a, b) = (index(a)?, index(b)?);
        let w: f64 = w
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::parse(line, format!("invalid weight {w:?}")))?;
        if w < 0.0 {
            return Err(Error::parse(line, format!("negative weight {w}")));
        }
        triplets.push((a, b, w));
    }
    WeightMatrix::new(SparseMatrix::from_triplets(n, triplets)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_file_has_one_line_per_link() {
        let text = write_weights(&WeightMatrix::identity(4));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "TAPW 1 4");
        assert_eq!(&lines[1..], ["1 1 1.0", "2 2 1.0", "3 3 1.0", "4 4 1.0"]);
    }

    #[test]
    fn exact_round_trip() {
        let sixth = 1.0 / 6.0;
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|r| (0..4).map(|c| if r == c { 0.5 } else { sixth }).collect())
            .collect();
        let w = WeightMatrix::from_dense(&rows).unwrap();
        assert_eq!(read_weights(&write_weights(&w)).unwrap(), w);
    }

    #[test]
    fn bad_row_sum_rejected() {
        let text = "TAPW 1 2\n1 1 0.99\n2 2 1.0\n";
        assert!(matches!(read_weights(text), Err(Error::InvalidWeights(_))));
    }

    #[test]
    fn negative_and_out_of_range_rejected() {
        assert!(read_weights("TAPW 1 2\n1 1 1.5\n1 2 -0.5\n2 2 1\n").is_err());
        assert!(read_weights("TAPW 1 2\n1 1 1\n3 3 1\n").is_err());
        assert!(read_weights("TAPW 2 2\n").is_err());
    }

    #[test]
    fn missing_diagonal_rejected() {
        assert!(read_weights("TAPW 1 2\n1 2 1\n2 2 1\n").is_err());
    }
}
