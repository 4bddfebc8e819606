//! Mixed-radix complex FFT used by the sequence-axis transforms.
//!
//! Lengths are factored into primes; each prime factor is handled with a
//! direct DFT. Every length is supported without padding, and the arithmetic
//! is a fixed sequence of f64 operations so results are identical on every
//! platform.

use num_complex::Complex64;

/// Twiddle table `exp(-2πi j / n)` for `j in 0..n`.
#[derive(Debug, Clone)]
pub(crate) struct Twiddles {
    table: Vec<Complex64>,
}

impl Twiddles {
    pub(crate) fn new(n: usize) -> Self {
        let table = (0..n)
            .map(|j| {
                let angle = -2.0 * std::f64::consts::PI * (j as f64) / (n as f64);
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect();
        Self { table }
    }

    pub(crate) fn len(&self) -> usize {
        self.table.len()
    }
}

fn smallest_factor(n: usize) -> usize {
    if n.is_multiple_of(2) {
        return 2;
    }
    let mut f = 3;
    while f * f <= n {
        if n.is_multiple_of(f) {
            return f;
        }
        f += 2;
    }
    n
}

/// Forward transform of `input` (length must equal the twiddle length).
pub(crate) fn forward(input: &[Complex64], tw: &Twiddles) -> Vec<Complex64> {
    let n = input.len();
    debug_assert_eq!(n, tw.len());
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    if n > 0 {
        transform(input, 1, n, &tw.table, 1, &mut out);
    }
    out
}

/// Inverse transform including the `1/n` factor.
pub(crate) fn inverse(input: &[Complex64], tw: &Twiddles) -> Vec<Complex64> {
    let n = input.len();
    let conj: Vec<Complex64> = input.iter().map(|c| c.conj()).collect();
    let scale = 1.0 / n as f64;
    forward(&conj, tw)
        .into_iter()
        .map(|c| c.conj() * scale)
        .collect()
}

// Decimation in time: x is read at x[i * stride] for i < n, and twiddles for
// this sub-length are tw[j * tw_step].
fn transform(
    x: &[Complex64],
    stride: usize,
    n: usize,
    tw: &[Complex64],
    tw_step: usize,
    out: &mut [Complex64],
) {
    if n == 1 {
        out[0] = x[0];
        return;
    }
    let p = smallest_factor(n);
    if p == n {
        for (k, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                acc += x[j * stride] * tw[((j * k) % n) * tw_step];
            }
            *o = acc;
        }
        return;
    }
    let m = n / p;
    if p == 2 {
        // Radix-2 halves are transformed straight into `out` and combined in place.
        let (lo, hi) = out.split_at_mut(m);
        transform(x, stride * 2, m, tw, tw_step * 2, lo);
        transform(&x[stride..], stride * 2, m, tw, tw_step * 2, hi);
        for k in 0..m {
            let t = hi[k] * tw[k * tw_step];
            let e = lo[k];
            lo[k] = e + t;
            hi[k] = e - t;
        }
        return;
    }
    let mut sub = vec![Complex64::new(0.0, 0.0); n];
    for r in 0..p {
        transform(
            &x[r * stride..],
            stride * p,
            m,
            tw,
            tw_step * p,
            &mut sub[r * m..(r + 1) * m],
        );
    }
    for (k, o) in out.iter_mut().enumerate().take(n) {
        let km = k % m;
        let mut acc = sub[km];
        let mut idx = 0;
        for r in 1..p {
            idx += k;
            if idx >= n {
                idx %= n;
            }
            acc += sub[r * m + km] * tw[idx * tw_step];
        }
        *o = acc;
    }
}
