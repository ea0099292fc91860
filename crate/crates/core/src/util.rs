//! Small numeric helpers shared across modules.

/// Compensated (Neumaier) accumulator. Summation order is always fixed by
/// the caller, so results are reproducible across runs and thread counts.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sum a slice with compensation, in slice order.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Euclidean distance between two points of equal dimension.
#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Euclidean norm of a point.
#[inline]
pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Check that a float is an integer up to `tol`, returning it as i64.
pub fn as_integer(x: f64, tol: f64) -> Option<i64> {
    let r = x.round();
    if (x - r).abs() <= tol && r.abs() < 9.0e15 {
        Some(r as i64)
    } else {
        None
    }
}

/// FNV-1a 64-bit hash, used for cheap content digests in run metadata.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_cancellation() {
        // 1 + 1e-16 repeated: naive accumulation loses the small terms.
        let mut acc = KahanSum::new();
        acc.add(1.0);
        for _ in 0..1000 {
            acc.add(1e-16);
        }
        let exact = 1.0 + 1000.0 * 1e-16;
        assert!((acc.value() - exact).abs() < 1e-18);
    }

    #[test]
    fn integer_detection() {
        assert_eq!(as_integer(16.000000000001, 1e-9), Some(16));
        assert_eq!(as_integer(16.1, 1e-9), None);
    }
}
