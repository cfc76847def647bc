//! Halton low-discrepancy points.

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base`; lies in `(0, 1)` for `index >= 1`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    value
}

/// Deterministic stream of points in the open unit cube. The `seed` shifts
/// the starting index so distinct seeds give distinct (still low-discrepancy) streams.
#[derive(Debug, Clone)]
pub struct Halton {
    dim: usize,
    next: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(
            dim <= PRIMES.len(),
            "Halton sequence supports up to {} dimensions",
            PRIMES.len()
        );
        Halton {
            dim,
            next: 1 + seed.wrapping_mul(1_000_003) % (1 << 40),
        }
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let index = self.next;
        self.next += 1;
        Some(
            PRIMES[..self.dim]
                .iter()
                .map(|&b| radical_inverse(index, b))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_two_digits() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn points_stay_inside_the_open_cube() {
        for p in Halton::new(3, 7).take(2000) {
            assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn first_coordinate_is_equidistributed() {
        let n = 4096;
        let below: usize = Halton::new(2, 0).take(n).filter(|p| p[0] < 0.3).count();
        assert!((below as f64 / n as f64 - 0.3).abs() < 2e-3);
    }
}
