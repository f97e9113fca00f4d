//! Bit-packed binary matrices: 64 spikes per machine word, little-endian
//! within each word, rows padded to word boundaries.

use crate::nd::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMatrix {
    pub rows: usize,
    pub cols: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_row = cols.div_ceil(64);
        BinaryMatrix {
            rows,
            cols,
            words_per_row,
            words: vec![0; rows * words_per_row],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        debug_assert!(r < self.rows && c < self.cols);
        let w = self.words[r * self.words_per_row + c / 64];
        (w >> (c % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        debug_assert!(r < self.rows && c < self.cols);
        let w = &mut self.words[r * self.words_per_row + c / 64];
        if v {
            *w |= 1 << (c % 64);
        } else {
            *w &= !(1 << (c % 64));
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn row_count_ones(&self, r: usize) -> u64 {
        self.words[r * self.words_per_row..(r + 1) * self.words_per_row]
            .iter()
            .map(|w| w.count_ones() as u64)
            .sum()
    }

    /// Column indices of set bits in row `r`, ascending.
    pub fn row_set_bits(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        let base = r * self.words_per_row;
        (0..self.words_per_row).flat_map(move |wi| {
            let mut w = self.words[base + wi];
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let bit = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + bit)
                }
            })
        })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for c in self.row_set_bits(r) {
                m[(r, c)] = 1.0;
            }
        }
        m
    }

    pub fn from_dense_nonzero(x: &DenseMatrix) -> Self {
        let mut b = Self::zeros(x.rows, x.cols);
        for r in 0..x.rows {
            for c in 0..x.cols {
                if x[(r, c)] != 0.0 {
                    b.set(r, c, true);
                }
            }
        }
        b
    }

    /// Byte-packed size of one row (ceil(cols / 8)), the on-disk layout.
    pub fn packed_row_bytes(&self) -> usize {
        self.cols.div_ceil(8)
    }

    /// Row `r` as ceil(cols/8) little-endian bytes.
    pub fn row_bytes(&self, r: usize) -> Vec<u8> {
        let nbytes = self.packed_row_bytes();
        let mut out = Vec::with_capacity(nbytes);
        'outer: for wi in 0..self.words_per_row {
            for b in self.words[r * self.words_per_row + wi].to_le_bytes() {
                out.push(b);
                if out.len() == nbytes {
                    break 'outer;
                }
            }
        }
        out
    }

    /// Rebuilds a row from its byte-packed form.
    pub fn set_row_bytes(&mut self, r: usize, bytes: &[u8]) {
        debug_assert_eq!(bytes.len(), self.packed_row_bytes());
        for (i, &b) in bytes.iter().enumerate() {
            for bit in 0..8 {
                let c = i * 8 + bit;
                if c < self.cols && (b >> bit) & 1 == 1 {
                    self.set(r, c, true);
                }
            }
        }
    }
}
