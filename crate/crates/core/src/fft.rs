//! Radix-2 complex FFT, in place, for power-of-two lengths.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct C64 {
    pub re: f64,
    pub im: f64,
}

impl C64 {
    pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        C64 { re, im }
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn scale(self, s: f64) -> Self {
        C64::new(self.re * s, self.im * s)
    }
}

impl Add for C64 {
    type Output = C64;
    fn add(self, o: C64) -> C64 {
        C64::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for C64 {
    type Output = C64;
    fn sub(self, o: C64) -> C64 {
        C64::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for C64 {
    type Output = C64;
    fn mul(self, o: C64) -> C64 {
        C64::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

/// Precomputed twiddles for one transform length.
#[derive(Clone, Debug)]
pub struct Fft {
    len: usize,
    twiddles: Vec<C64>,
}

impl Fft {
    pub fn new(len: usize) -> Self {
        assert!(len.is_power_of_two(), "FFT length must be a power of two");
        let twiddles = (0..len / 2)
            .map(|k| {
                let angle = -2.0 * PI * k as f64 / len as f64;
                C64::new(angle.cos(), angle.sin())
            })
            .collect();
        Fft { len, twiddles }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward transform (`sign = -1` in the exponent).
    pub fn forward(&self, data: &mut [C64]) {
        self.run(data, false);
    }

    /// Inverse transform including the `1/len` factor.
    pub fn inverse(&self, data: &mut [C64]) {
        self.run(data, true);
        let s = 1.0 / self.len as f64;
        for v in data.iter_mut() {
            *v = v.scale(s);
        }
    }

    fn run(&self, data: &mut [C64], inverse: bool) {
        let n = self.len;
        assert_eq!(data.len(), n);
        if n <= 1 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                data.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w.im = -w.im;
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
    }
}

/// Row-major 2D transform of a `rows x cols` array.
pub fn fft2(data: &mut [C64], rows: usize, cols: usize, inverse: bool) {
    let row_plan = Fft::new(cols);
    let col_plan = if rows == cols { row_plan.clone() } else { Fft::new(rows) };
    for r in 0..rows {
        let row = &mut data[r * cols..(r + 1) * cols];
        if inverse {
            row_plan.inverse(row);
        } else {
            row_plan.forward(row);
        }
    }
    let mut column = alloc::vec![C64::ZERO; rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = data[r * cols + c];
        }
        if inverse {
            col_plan.inverse(&mut column);
        } else {
            col_plan.forward(&mut column);
        }
        for r in 0..rows {
            data[r * cols + c] = column[r];
        }
    }
}

/// Forward or inverse transform of an `n`-dimensional cube array with
/// `side^n` entries.
pub fn fft_nd(data: &mut [C64], n: usize, side: usize, inverse: bool) {
    match n {
        1 => {
            let plan = Fft::new(side);
            if inverse {
                plan.inverse(data)
            } else {
                plan.forward(data)
            }
        }
        2 => fft2(data, side, side, inverse),
        _ => unreachable!("dimension checked by Grid"),
    }
}

/// Signed frequency index of bin `k` in a length-`len` transform.
pub fn signed_bin(k: usize, len: usize) -> i64 {
    if k <= len / 2 {
        k as i64
    } else {
        k as i64 - len as i64
    }
}
