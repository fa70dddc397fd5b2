//! The barrier cost function over Hamming weights.
//!
//! A bit string `x` of length `n` costs `f(|x|) = |x| + b(|x|)`, where the
//! barrier `b` adds `n^alpha` to every weight strictly inside the open window
//! `(n/4 - c n^alpha / 2, n/4 + c n^alpha / 2)`. The global minimum sits at
//! weight zero and a false local minimum sits just above the window.

use crate::error::{Error, Result};
use crate::spectral::TridiagonalOperator;

/// One barrier problem `(n, alpha, c)` with its derived window.
///
/// Construction only rejects nonsensical numbers. Use
/// [`ProblemInstance::validate`] (or [`ProblemInstance::checked`]) to enforce
/// the size rules the scaling experiments rely on; tiny instances used by the
/// brute-force oracles are deliberately allowed to skip them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemInstance {
    n: usize,
    alpha: f64,
    c: f64,
    height: f64,
    window_lo: f64,
    window_hi: f64,
}

impl ProblemInstance {
    pub fn new(n: usize, alpha: f64, c: f64) -> Result<Self> {
        let invalid = |reason: &str| Error::InvalidInstance {
            n,
            alpha,
            c,
            reason: reason.to_string(),
        };
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        if !alpha.is_finite() {
            return Err(invalid("alpha must be finite"));
        }
        if !c.is_finite() || c <= 0.0 {
            return Err(invalid("c must be positive and finite"));
        }
        let nf = n as f64;
        let height = nf.powf(alpha);
        let half_width = 0.5 * c * height;
        Ok(Self {
            n,
            alpha,
            c,
            height,
            window_lo: nf / 4.0 - half_width,
            window_hi: nf / 4.0 + half_width,
        })
    }

    /// Constructs and validates in one step.
    pub fn checked(n: usize, alpha: f64, c: f64) -> Result<Self> {
        let inst = Self::new(n, alpha, c)?;
        inst.validate()?;
        Ok(inst)
    }

    /// Enforces `n >= 8`, `n % 4 == 0` and `c n^alpha < n/2`.
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidInstance {
            n: self.n,
            alpha: self.alpha,
            c: self.c,
            reason,
        };
        if self.n < 8 {
            return Err(invalid("n must be at least 8".into()));
        }
        if !self.n.is_multiple_of(4) {
            return Err(invalid("n must be divisible by 4".into()));
        }
        if self.width() >= self.n as f64 / 2.0 {
            return Err(invalid(format!(
                "barrier width {:.4} is not below n/2 = {}",
                self.width(),
                self.n as f64 / 2.0
            )));
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Barrier height `n^alpha`.
    pub fn height(&self) -> f64 {
        self.height
    }

    /// Barrier width `c n^alpha`.
    pub fn width(&self) -> f64 {
        self.c * self.height
    }

    pub fn window_lo(&self) -> f64 {
        self.window_lo
    }

    pub fn window_hi(&self) -> f64 {
        self.window_hi
    }

    fn check_weight(&self, z: usize) -> Result<()> {
        if z > self.n {
            return Err(Error::WeightOutOfRange {
                value: z,
                n: self.n,
            });
        }
        Ok(())
    }

    /// Whether weight `z` lies strictly inside the barrier window.
    pub fn in_window(&self, z: usize) -> bool {
        let z = z as f64;
        self.window_lo < z && z < self.window_hi
    }

    /// `b(z)`: the barrier height inside the open window, zero elsewhere.
    pub fn barrier(&self, z: usize) -> Result<f64> {
        self.check_weight(z)?;
        Ok(if self.in_window(z) { self.height } else { 0.0 })
    }

    /// `f(h) = h + b(h)`.
    pub fn cost(&self, h: usize) -> Result<f64> {
        Ok(h as f64 + self.barrier(h)?)
    }

    /// Tabulates `f(h)` for every weight `0..=n`.
    pub fn cost_table(&self) -> CostTable {
        let values = (0..=self.n)
            .map(|h| h as f64 + if self.in_window(h) { self.height } else { 0.0 })
            .collect();
        CostTable { values }
    }

    /// The Hamiltonian `(1-s) H0 + s H1` restricted to the symmetric subspace.
    ///
    /// Basis state `h` is the uniform superposition of all strings of weight
    /// `h`. The driver term couples neighbouring weights with amplitude
    /// `-(1-s)/2 * sqrt((h+1)(n-h))`.
    pub fn tridiagonal(&self, s: f64) -> Result<TridiagonalOperator> {
        check_schedule(s)?;
        let n = self.n;
        let nf = n as f64;
        let table = self.cost_table();
        let diagonal = table
            .values()
            .iter()
            .map(|&f| (1.0 - s) * nf / 2.0 + s * f)
            .collect();
        let off_diagonal = (0..n)
            .map(|h| -(1.0 - s) / 2.0 * (((h + 1) * (n - h)) as f64).sqrt())
            .collect();
        TridiagonalOperator::new(diagonal, off_diagonal)
    }
}

pub(crate) fn check_schedule(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::ScheduleOutOfRange(s));
    }
    Ok(())
}

/// `f(h)` for every weight `h = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    values: Vec<f64>,
}

impl CostTable {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, h: usize) -> f64 {
        self.values[h]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Weights that are strict local minima of the table (endpoints compare
    /// against their single neighbour).
    pub fn local_minima(&self) -> Vec<usize> {
        let v = &self.values;
        (0..v.len())
            .filter(|&h| {
                let left = h == 0 || v[h] < v[h - 1];
                let right = h + 1 == v.len() || v[h] < v[h + 1];
                left && right
            })
            .collect()
    }
}

/// System sizes in `n_min..=n_max` at which the barrier has just widened.
///
/// Keeps `n` when `n % 4 == 0`, `n >= 8`, `floor(1 + c n^alpha) >
/// floor(1 + c (n-4)^alpha)` and `c n^alpha < n/2`. Returned in increasing
/// order; may be empty.
pub fn valid_sizes(alpha: f64, c: f64, n_min: usize, n_max: usize) -> Vec<usize> {
    let width_steps = |n: usize| (1.0 + c * (n as f64).powf(alpha)).floor();
    (n_min.max(8)..=n_max)
        .filter(|&n| n % 4 == 0)
        .filter(|&n| width_steps(n) > width_steps(n - 4))
        .filter(|&n| c * (n as f64).powf(alpha) < n as f64 / 2.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn inst16() -> ProblemInstance {
        ProblemInstance::checked(16, 0.5, 1.0).unwrap()
    }

    #[test]
    fn barrier_examples() {
        let inst = inst16();
        assert_eq!(inst.window_lo(), 2.0);
        assert_eq!(inst.window_hi(), 6.0);
        assert_eq!(inst.barrier(0).unwrap(), 0.0);
        assert_eq!(inst.barrier(4).unwrap(), 4.0);
        assert_eq!(inst.barrier(2).unwrap(), 0.0);
        assert_eq!(inst.barrier(6).unwrap(), 0.0);
        assert!(matches!(
            inst.barrier(17),
            Err(Error::WeightOutOfRange { value: 17, n: 16 })
        ));
    }

    #[test]
    fn cost_examples() {
        let inst = inst16();
        assert_eq!(inst.cost(0).unwrap(), 0.0);
        assert_eq!(inst.cost(3).unwrap(), 7.0);
        assert_eq!(inst.cost(16).unwrap(), 16.0);
        assert!(inst.cost(99).is_err());
    }

    #[test]
    fn cost_table_has_false_minimum_above_window() {
        let inst = ProblemInstance::checked(116, 0.5, 3.0).unwrap();
        let table = inst.cost_table();
        assert_eq!(table.len(), 117);
        let minima = table.local_minima();
        let above = (inst.window_hi().floor() as usize) + 1;
        assert_eq!(minima, vec![0, above]);
    }

    #[test]
    fn validation_rules() {
        assert!(ProblemInstance::checked(18, 0.5, 1.0).is_err());
        assert!(ProblemInstance::checked(4, 0.5, 1.0).is_err());
        // width 3 * 16^0.5 = 12 >= 8
        let wide = ProblemInstance::new(16, 0.5, 3.0).unwrap();
        assert!(!wide.is_valid());
        assert!(ProblemInstance::new(0, 0.5, 1.0).is_err());
        assert!(ProblemInstance::new(8, f64::NAN, 1.0).is_err());
        assert!(ProblemInstance::new(8, 0.5, 0.0).is_err());
    }

    #[test]
    fn tridiagonal_at_s0_n4() {
        let inst = ProblemInstance::new(4, 0.3, 1.0).unwrap();
        let op = inst.tridiagonal(0.0).unwrap();
        assert!(op.diagonal().iter().all(|&d| d == 2.0));
        let half_root6 = 6f64.sqrt() / 2.0;
        let expect = [-1.0, -half_root6, -half_root6, -1.0];
        for (a, b) in op.off_diagonal().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn tridiagonal_at_s1_is_cost() {
        let inst = inst16();
        let op = inst.tridiagonal(1.0).unwrap();
        assert!(op.off_diagonal().iter().all(|&e| e == 0.0));
        assert_eq!(op.diagonal(), inst.cost_table().values());
        assert!(matches!(
            inst.tridiagonal(1.5),
            Err(Error::ScheduleOutOfRange(_))
        ));
        assert!(inst.tridiagonal(-0.1).is_err());
    }

    #[test]
    fn valid_sizes_match_reported_ranges() {
        let sizes = valid_sizes(0.5, 3.0, 80, 240);
        assert!(sizes.contains(&116));
        let sizes = valid_sizes(0.3, 1.0, 100, 400);
        assert_eq!(sizes.first(), Some(&104));
        assert_eq!(sizes.last(), Some(&396));
        assert!(valid_sizes(0.5, 1.0, 101, 103).is_empty());
    }

    proptest! {
        #[test]
        fn barrier_is_zero_or_height(n4 in 2usize..200, alpha in 0.1f64..0.6, c in 0.2f64..3.0) {
            let n = 4 * n4;
            let inst = ProblemInstance::new(n, alpha, c).unwrap();
            for h in 0..=n {
                let extra = inst.cost(h).unwrap() - h as f64;
                prop_assert!(extra == 0.0 || (extra - inst.height()).abs() <= 1e-12 * (h as f64 + inst.height()));
            }
        }

        #[test]
        fn off_diagonal_strictly_negative(n in 1usize..64, s in 0.0f64..0.999) {
            let inst = ProblemInstance::new(n, 0.4, 1.0).unwrap();
            let op = inst.tridiagonal(s).unwrap();
            prop_assert!(op.off_diagonal().iter().all(|&e| e < 0.0));
        }

        #[test]
        fn valid_sizes_satisfy_every_rule(alpha in 0.2f64..0.6, c in 0.5f64..3.0, lo in 8usize..300, span in 0usize..800) {
            let sizes = valid_sizes(alpha, c, lo, lo + span);
            for pair in sizes.windows(2) {
                prop_assert!(pair[0] < pair[1]);
            }
            for &n in &sizes {
                prop_assert!(n % 4 == 0 && n >= lo && n <= lo + span);
                let w = |m: usize| (1.0 + c * (m as f64).powf(alpha)).floor();
                prop_assert!(w(n) > w(n - 4));
                prop_assert!(c * (n as f64).powf(alpha) < n as f64 / 2.0);
                prop_assert!(ProblemInstance::checked(n, alpha, c).is_ok());
            }
        }
    }
}
