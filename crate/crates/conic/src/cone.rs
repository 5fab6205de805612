//! Cone layout and symmetric-matrix packing.
//!
//! Variables are laid out as `[free | nonneg | psd_1 | ... | psd_K]`. A PSD block of
//! order `k` occupies `k(k+1)/2` coordinates holding its upper triangle column by
//! column, with off-diagonal entries multiplied by `sqrt(2)` so that the Euclidean
//! inner product of two packed vectors equals the trace inner product of the matrices.

use nalgebra::DMatrix;
use std::f64::consts::SQRT_2;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConeStructure {
    pub n_free: usize,
    pub n_nonneg: usize,
    pub psd_block_sizes: Vec<usize>,
}

impl ConeStructure {
    pub fn new(n_free: usize, n_nonneg: usize, psd_block_sizes: Vec<usize>) -> Self {
        Self { n_free, n_nonneg, psd_block_sizes }
    }

    pub fn dim(&self) -> usize {
        self.n_free + self.n_nonneg + self.psd_block_sizes.iter().map(|&k| packed_len(k)).sum::<usize>()
    }

    pub fn nonneg_offset(&self) -> usize {
        self.n_free
    }

    /// First packed coordinate of PSD block `b`.
    pub fn psd_offset(&self, b: usize) -> usize {
        self.n_free + self.n_nonneg + self.psd_block_sizes[..b].iter().map(|&k| packed_len(k)).sum::<usize>()
    }

    /// Barrier degree: one per nonnegative coordinate plus the order of each PSD block.
    pub fn degree(&self) -> usize {
        self.n_nonneg + self.psd_block_sizes.iter().sum::<usize>()
    }
}

pub fn packed_len(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Packed position of entry `(i, j)` of an order-`k` block; symmetric in `i, j`.
pub fn packed_index(i: usize, j: usize) -> usize {
    let (r, c) = if i <= j { (i, j) } else { (j, i) };
    c * (c + 1) / 2 + r
}

/// Inverse of [`packed_index`].
pub fn packed_position(idx: usize) -> (usize, usize) {
    let mut c = ((((8 * idx + 1) as f64).sqrt() - 1.0) / 2.0) as usize;
    while c * (c + 1) / 2 > idx {
        c -= 1;
    }
    while (c + 1) * (c + 2) / 2 <= idx {
        c += 1;
    }
    (idx - c * (c + 1) / 2, c)
}

pub fn pack(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows();
    let mut v = vec![0.0; packed_len(k)];
    pack_into(m, &mut v);
    v
}

pub fn pack_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let k = m.nrows();
    for c in 0..k {
        for r in 0..=c {
            let val = if r == c { m[(r, c)] } else { 0.5 * (m[(r, c)] + m[(c, r)]) * SQRT_2 };
            out[packed_index(r, c)] = val;
        }
    }
}

pub fn unpack(k: usize, v: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    for c in 0..k {
        for r in 0..=c {
            let val = v[packed_index(r, c)];
            if r == c {
                m[(r, c)] = val;
            } else {
                m[(r, c)] = val / SQRT_2;
                m[(c, r)] = val / SQRT_2;
            }
        }
    }
    m
}

/// Packed coefficient that makes `coef * X[i][j]` a linear functional of the packed vector.
pub fn entry_coefficient(i: usize, j: usize, coef: f64) -> f64 {
    if i == j {
        coef
    } else {
        coef / SQRT_2
    }
}
