use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DomainSpec, Feedback, Sampler, SamplerError};
use crate::value::Value;

pub const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    out
}

fn scrambled_inverse(mut index: u64, base: u64, perm: &[u64]) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += perm[(index % base) as usize] as f64 * scale;
        index /= base;
        scale *= inv;
    }
    out
}

/// Star discrepancy of a 1-D point set in [0, 1].
pub fn star_discrepancy_1d(points: &[f64]) -> f64 {
    let mut xs = points.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let i = i as f64;
            ((i + 1.0) / n - x).max(x - i / n)
        })
        .fold(0.0, f64::max)
}

/// Halton sequence; dimension `i` uses the `i`-th prime as its base.
///
/// Indices start at 1, so the first base-2 coordinates are 0.5, 0.25, 0.75.
#[derive(Debug, Clone)]
pub struct HaltonSampler {
    domain: DomainSpec,
    index: u64,
    /// Per-dimension digit permutations; empty when unscrambled.
    perms: Vec<Vec<u64>>,
}

impl HaltonSampler {
    pub fn new(domain: DomainSpec) -> Result<Self, SamplerError> {
        if domain.len() > PRIMES.len() {
            return Err(SamplerError::TooManyDimensions);
        }
        Ok(Self {
            domain,
            index: 0,
            perms: Vec::new(),
        })
    }

    /// Random digit permutation per dimension; digit 0 stays fixed.
    pub fn scrambled(domain: DomainSpec, seed: u64) -> Result<Self, SamplerError> {
        let mut s = Self::new(domain)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        s.perms = PRIMES[..s.domain.len()]
            .iter()
            .map(|&b| {
                let mut digits: Vec<u64> = (1..b).collect();
                digits.shuffle(&mut rng);
                std::iter::once(0).chain(digits).collect()
            })
            .collect();
        Ok(s)
    }

    /// Unit-cube coordinates of the point with the given index.
    pub fn unit_point(&self, index: u64) -> Vec<f64> {
        (0..self.domain.len())
            .map(|d| match self.perms.get(d) {
                Some(p) => scrambled_inverse(index, PRIMES[d], p),
                None => radical_inverse(index, PRIMES[d]),
            })
            .collect()
    }

    pub fn point_at(&self, index: u64) -> Vec<Value> {
        self.unit_point(index)
            .into_iter()
            .enumerate()
            .map(|(d, u)| self.domain.scale(d, u))
            .collect()
    }
}

impl Sampler for HaltonSampler {
    fn name(&self) -> &str {
        "halton"
    }

    fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    fn next_point(&mut self, _rng: &mut dyn RngCore) -> Vec<Value> {
        self.index += 1;
        self.point_at(self.index)
    }

    /// The sequence is fixed; feedback is ignored.
    fn record_feedback(&mut self, _point: &[Value], _feedback: Feedback) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::Dimension;

    /// Independent oracle: write the index in binary and mirror the digits
    /// about the radix point.
    fn mirrored_binary(index: u64) -> f64 {
        let bits = format!("{index:b}");
        bits.chars()
            .rev()
            .enumerate()
            .map(|(k, c)| if c == '1' { 0.5f64.powi(k as i32 + 1) } else { 0.0 })
            .sum()
    }

    fn unit(n: usize) -> DomainSpec {
        DomainSpec::new(
            (0..n)
                .map(|i| (format!("d{i}"), Dimension::Continuous { lo: 0.0, hi: 1.0 }))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn first_base2_points() {
        let mut s = HaltonSampler::new(unit(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got: Vec<f64> = (0..3).map(|_| s.next_point(&mut rng)[0].as_real().unwrap()).collect();
        assert_eq!(got, vec![0.5, 0.25, 0.75]);
    }

    #[test]
    fn matches_binary_mirror_oracle() {
        for i in 1..1024u64 {
            assert_eq!(radical_inverse(i, 2), mirrored_binary(i), "index {i}");
        }
    }

    #[test]
    fn base3_second_dimension() {
        let s = HaltonSampler::new(unit(2)).unwrap();
        let p = s.unit_point(4);
        // 4 = 11 in base 3 -> 1/3 + 1/9
        assert_eq!(p[0], 0.125);
        assert!((p[1] - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn feedback_does_not_change_sequence() {
        let mut a = HaltonSampler::new(unit(3)).unwrap();
        let mut b = HaltonSampler::new(unit(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 0..50 {
            let pa = a.next_point(&mut rng);
            a.record_feedback(&pa, if k % 2 == 0 { Feedback::Rejected } else { Feedback::Robustness(-1.0) });
            assert_eq!(pa, b.next_point(&mut rng));
        }
    }

    #[test]
    fn scrambling_is_seeded_and_in_range() {
        let a = HaltonSampler::scrambled(unit(4), 9).unwrap();
        let b = HaltonSampler::scrambled(unit(4), 9).unwrap();
        for i in 1..200 {
            let p = a.unit_point(i);
            assert_eq!(p, b.unit_point(i));
            assert!(p.iter().all(|u| (0.0..1.0).contains(u)));
        }
    }

    #[test]
    fn discrepancy_of_regular_grid() {
        // midpoints (2i-1)/2n reach the optimum 1/(2n)
        let pts: Vec<f64> = (1..=10).map(|i| (2 * i - 1) as f64 / 20.0).collect();
        assert!((star_discrepancy_1d(&pts) - 0.05).abs() < 1e-12);
    }
}
