use serde::{Deserialize, Serialize};

/// A dense row-major binary image.
///
/// Rows run along the first perpendicular axis of a slice or projection and
/// columns along the second, so `(row, col)` maps to `(u, v)` in grid cells.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mask2D {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl Mask2D {
    pub fn new(rows: usize, cols: usize) -> Self {
        Mask2D {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: bool) -> Self {
        Mask2D {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mask2D { rows, cols, data }
    }

    /// Builds a mask from a raw row-major buffer; `None` if the length is wrong.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<bool>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Mask2D { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.cols + col]
    }

    /// Out-of-range coordinates read as background.
    #[inline]
    pub fn get_or_false(&self, row: isize, col: isize) -> bool {
        if row < 0 || col < 0 || row as usize >= self.rows || col as usize >= self.cols {
            false
        } else {
            self.get(row as usize, col as usize)
        }
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn iter_true(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let cols = self.cols;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / cols, i % cols))
    }

    /// Inclusive `(min_row, min_col, max_row, max_col)` of the true pixels.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for (r, c) in self.iter_true() {
            bb = Some(match bb {
                None => (r, c, r, c),
                Some((r0, c0, r1, c1)) => (r0.min(r), c0.min(c), r1.max(r), c1.max(c)),
            });
        }
        bb
    }

    /// Number of true pixels in each row.
    pub fn row_counts(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|r| (0..self.cols).filter(|&c| self.get(r, c)).count())
            .collect()
    }

    /// Number of true pixels in each column.
    pub fn col_counts(&self) -> Vec<usize> {
        (0..self.cols)
            .map(|c| (0..self.rows).filter(|&r| self.get(r, c)).count())
            .collect()
    }

    pub fn transpose(&self) -> Mask2D {
        Mask2D::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Binary PGM (`P5`, maxval 255): true pixels white.
    pub fn write_pgm<W: std::io::Write>(&self, mut w: W) -> crate::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.cols, self.rows)?;
        let bytes: Vec<u8> = self.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    /// Reads a `P5` PGM; pixels at or above half of maxval are true.
    pub fn read_pgm(bytes: &[u8]) -> crate::Result<Mask2D> {
        use crate::Error;
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Format("truncated PGM header".into()));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if fields[0] != "P5" {
            return Err(Error::Format(format!("expected P5 PGM, got {:?}", fields[0])));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM header field {s:?}")));
        let (cols, rows, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
        }
        let data = &bytes[(pos + 1).min(bytes.len())..];
        if data.len() != rows * cols {
            return Err(Error::Format(format!("PGM payload has {} bytes, expected {}", data.len(), rows * cols)));
        }
        let thresh = maxval.div_ceil(2);
        Ok(Mask2D::from_fn(rows, cols, |r, c| data[r * cols + c] as usize >= thresh))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let m = Mask2D::from_fn(3, 5, |r, c| (r * 5 + c) % 3 == 0);
        let mut buf = Vec::new();
        m.write_pgm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n5 3\n255\n"));
        assert_eq!(Mask2D::read_pgm(&buf).unwrap(), m);
        assert!(Mask2D::read_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(Mask2D::read_pgm(&buf[..buf.len() - 1]).is_err());
    }
}
