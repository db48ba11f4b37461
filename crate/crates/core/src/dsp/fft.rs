//! Iterative radix-2 Cooley-Tukey FFT, plus a real-input wrapper that packs
//! an `n`-sample real frame into an `n/2`-point complex transform.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Precomputed plan for an in-place forward transform of a fixed size.
#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    // exp(-2πi j / n) for j in 0..n/2, each evaluated directly (no recurrence).
    twiddles: Vec<Complex64>,
    bit_rev: Vec<usize>,
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        let twiddles = (0..n / 2)
            .map(|j| Complex64::from_polar(1.0, -2.0 * PI * j as f64 / n as f64))
            .collect();
        let bits = n.trailing_zeros();
        let bit_rev = (0..n)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        Ok(Self { n, twiddles, bit_rev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Forward DFT, `X[k] = Σ x[t]·exp(-2πi k t / n)`, unnormalized.
    pub fn process(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n, "buffer length must match plan size");
        for i in 0..self.n {
            let j = self.bit_rev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for block in buf.chunks_exact_mut(len) {
                let (lo, hi) = block.split_at_mut(half);
                for (j, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let t = *b * self.twiddles[j * stride];
                    *b = *a - t;
                    *a += t;
                }
            }
            len <<= 1;
        }
    }
}

/// Real-input transform returning the one-sided spectrum `X[0..=n/2]`.
#[derive(Debug, Clone)]
pub struct RealFft {
    n: usize,
    inner: Fft,
    // exp(-2πi k / n) for k in 0..=n/2.
    post: Vec<Complex64>,
}

impl RealFft {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        let inner = Fft::new(n / 2)?;
        let post = (0..=n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        Ok(Self { n, inner, post })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `scratch` must hold `n/2` values and `out` `n/2 + 1`.
    pub fn process(&self, input: &[f64], scratch: &mut [Complex64], out: &mut [Complex64]) {
        let half = self.n / 2;
        assert_eq!(input.len(), self.n);
        assert_eq!(scratch.len(), half);
        assert_eq!(out.len(), half + 1);
        for (z, pair) in scratch.iter_mut().zip(input.chunks_exact(2)) {
            *z = Complex64::new(pair[0], pair[1]);
        }
        self.inner.process(scratch);
        for k in 0..=half {
            let zk = scratch[k % half];
            let zc = scratch[(half - k) % half].conj();
            let even = (zk + zc) * 0.5;
            let odd = (zk - zc) * Complex64::new(0.0, -0.5);
            out[k] = even + self.post[k] * odd;
        }
    }
}
