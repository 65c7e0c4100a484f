use std::fmt::{Debug, Display};

use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Storage precision of a tensor or checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    /// Byte width, also used as the on-disk precision tag.
    pub fn width(self) -> u8 {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }

    pub fn from_width(width: u8) -> Option<Self> {
        match width {
            4 => Some(Precision::F32),
            8 => Some(Precision::F64),
            _ => None,
        }
    }
}

/// Scalar type a [`Tensor`](super::Tensor) can hold.
pub trait Element: Float + Default + Debug + Display + Send + Sync + 'static {
    const PRECISION: Precision;

    fn from_f64(v: f64) -> Self;

    fn as_f64(self) -> f64;

    fn from_usize(v: usize) -> Self {
        Self::from_f64(v as f64)
    }

    fn write_le(self, out: &mut Vec<u8>);

    /// Reads one value from the front of `bytes` (which must hold at least
    /// `PRECISION.width()` bytes).
    fn read_le(bytes: &[u8]) -> Self;

    /// `c = a·b + beta·c` for row/column-strided matrices (`a` is m×k, `b` is k×n).
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_strides: (usize, usize),
        b: &[Self],
        b_strides: (usize, usize),
        beta: Self,
        c: &mut [Self],
        c_strides: (usize, usize),
    );
}

fn check_extent(len: usize, rows: usize, cols: usize, strides: (usize, usize)) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = (rows - 1) * strides.0 + (cols - 1) * strides.1;
    assert!(last < len, "gemm operand out of bounds");
}

macro_rules! impl_element {
    ($t:ty, $prec:expr, $gemm:path) => {
        impl Element for $t {
            const PRECISION: Precision = $prec;

            fn from_f64(v: f64) -> Self {
                v as $t
            }

            fn as_f64(self) -> f64 {
                self as f64
            }

            fn write_le(self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }

            fn read_le(bytes: &[u8]) -> Self {
                const W: usize = std::mem::size_of::<$t>();
                let mut buf = [0u8; W];
                buf.copy_from_slice(&bytes[..W]);
                <$t>::from_le_bytes(buf)
            }

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                a_strides: (usize, usize),
                b: &[Self],
                b_strides: (usize, usize),
                beta: Self,
                c: &mut [Self],
                c_strides: (usize, usize),
            ) {
                check_extent(a.len(), m, k, a_strides);
                check_extent(b.len(), k, n, b_strides);
                check_extent(c.len(), m, n, c_strides);
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every index touched by the kernel lies inside the
                // slices, as verified by `check_extent` above.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        a_strides.0 as isize,
                        a_strides.1 as isize,
                        b.as_ptr(),
                        b_strides.0 as isize,
                        b_strides.1 as isize,
                        beta,
                        c.as_mut_ptr(),
                        c_strides.0 as isize,
                        c_strides.1 as isize,
                    );
                }
            }
        }
    };
}

impl_element!(f32, Precision::F32, matrixmultiply::sgemm);
impl_element!(f64, Precision::F64, matrixmultiply::dgemm);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_naive_product() {
        let a: Vec<f64> = (0..6).map(|v| v as f64).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|v| (v as f64) * 0.5).collect(); // 3x4
        let mut c = vec![0.0; 8];
        f64::gemm(2, 3, 4, &a, (3, 1), &b, (4, 1), 0.0, &mut c, (4, 1));
        for i in 0..2 {
            for j in 0..4 {
                let want: f64 = (0..3).map(|p| a[i * 3 + p] * b[p * 4 + j]).sum();
                assert_eq!(c[i * 4 + j], want);
            }
        }
    }

    #[test]
    fn le_round_trip() {
        let mut buf = Vec::new();
        1.25f32.write_le(&mut buf);
        (-3.5f64).write_le(&mut buf);
        assert_eq!(f32::read_le(&buf), 1.25);
        assert_eq!(f64::read_le(&buf[4..]), -3.5);
    }
}
