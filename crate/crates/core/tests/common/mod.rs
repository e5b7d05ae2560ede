//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the library's counting or fitting code.

#![allow(dead_code)]

/// Counts full `r × r` blocks by walking every candidate corner.
pub fn enumerate_blocks(m: usize, n: usize, r: usize) -> usize {
    let mut count = 0;
    let mut i = 1;
    while i + r - 1 <= m {
        let mut j = 1;
        while j + r - 1 <= n {
            count += 1;
            j += r;
        }
        i += r;
    }
    count
}

/// Cells not covered by any full block, counted one by one.
pub fn enumerate_trimmed(m: usize, n: usize, r: usize) -> usize {
    let rows = m / r * r;
    let cols = n / r * r;
    let mut lost = 0;
    for i in 1..=m {
        for j in 1..=n {
            if i > rows || j > cols {
                lost += 1;
            }
        }
    }
    lost
}

/// `1, λ, λ², …` up to `min(m, n)`, largest first.
pub fn powers_up_to(lambda: usize, limit: usize) -> Vec<usize> {
    let mut out = vec![1];
    while out.last().unwrap() * lambda <= limit {
        out.push(out.last().unwrap() * lambda);
    }
    out.reverse();
    out
}

/// Closed-form ordinary least squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Dimension of an `m × n` grid under the geometric schedule, from scratch.
pub fn oracle_dimension(m: usize, n: usize, lambda: usize) -> Option<f64> {
    let rs = powers_up_to(lambda, m.min(n));
    if rs.len() < 2 {
        return None;
    }
    let x: Vec<f64> = rs.iter().map(|&r| (r as f64).ln()).collect();
    let y: Vec<f64> = rs
        .iter()
        .map(|&r| (enumerate_blocks(m, n, r) as f64).ln())
        .collect();
    Some(-ols_slope(&x, &y))
}

/// Per-layer values quoted in the published dimension table:
/// `(rows, cols, λ, D)`.
pub const PUBLISHED: [(usize, usize, u32, f64); 14] = [
    (10, 512, 2, 2.1288),
    (10, 512, 5, 2.0024),
    (10, 512, 7, 2.1843),
    (64, 3, 2, 2.5850),
    (64, 3, 3, 2.0143),
    (64, 64, 3, 2.0928),
    (64, 64, 5, 2.1534),
    (128, 128, 9, 2.2083),
    (128, 128, 7, 2.1372),
    (512, 512, 3, 2.0230),
    (512, 512, 5, 2.0113),
    (512, 512, 7, 2.1278),
    (10, 4096, 7, 2.1834),
    (10, 256, 7, 2.1914),
];

pub const PUBLISHED_TOLERANCE: f64 = 2e-3;
