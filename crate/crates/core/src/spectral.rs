//! Lowest eigenvalues of the symmetric-subspace Hamiltonian and the gap curve.
//!
//! Only the ground and first excited energies are ever needed, so the solver
//! is Sturm-sequence bisection targeted at those two eigenvalues. Each
//! bisection step is a single `O(n)` pass over the matrix.

use std::io::Write;

use crate::csv::MetaHeader;
use crate::error::{Error, Result};
use crate::problem::{check_schedule, ProblemInstance};

/// A real symmetric tridiagonal matrix stored as its diagonal and one
/// off-diagonal band.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    diagonal: Vec<f64>,
    off_diagonal: Vec<f64>,
}

impl TridiagonalOperator {
    pub fn new(diagonal: Vec<f64>, off_diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.is_empty() {
            return Err(Error::MalformedOperator("empty diagonal".into()));
        }
        if off_diagonal.len() + 1 != diagonal.len() {
            return Err(Error::MalformedOperator(format!(
                "diagonal has {} entries but off-diagonal has {}",
                diagonal.len(),
                off_diagonal.len()
            )));
        }
        if diagonal.iter().chain(&off_diagonal).any(|v| !v.is_finite()) {
            return Err(Error::MalformedOperator("non-finite entry".into()));
        }
        Ok(Self {
            diagonal,
            off_diagonal,
        })
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn off_diagonal(&self) -> &[f64] {
        &self.off_diagonal
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let e = &self.off_diagonal;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, &d) in self.diagonal.iter().enumerate() {
            let left = if i > 0 { e[i - 1].abs() } else { 0.0 };
            let right = if i < e.len() { e[i].abs() } else { 0.0 };
            lo = lo.min(d - left - right);
            hi = hi.max(d + left + right);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `lambda` (Sturm count).
    ///
    /// Counts negative pivots of the `LDL^T` factorisation of
    /// `T - lambda I`. A zero pivot is nudged off zero by a tiny multiple of
    /// the matrix scale.
    pub fn count_below(&self, lambda: f64) -> usize {
        let (lo, hi) = self.gershgorin_bounds();
        let guard = f64::EPSILON * f64::EPSILON * (1.0 + hi.abs().max(lo.abs()));
        let mut count = 0;
        let mut q = self.diagonal[0] - lambda;
        for i in 0..self.diagonal.len() {
            if i > 0 {
                let e = self.off_diagonal[i - 1];
                q = self.diagonal[i] - lambda - e * e / q;
            }
            if q == 0.0 {
                q = -guard;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (zero based) by bisection on the Sturm
    /// count, searched inside `[lo, hi]`.
    fn bisect(&self, k: usize, mut lo: f64, mut hi: f64, span: f64) -> f64 {
        let floor = f64::EPSILON * span;
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + floor {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `(E0, E1)`, the two smallest eigenvalues, with `E0 <= E1`.
    ///
    /// A `1x1` operator returns its single eigenvalue twice.
    pub fn lowest_two_eigenvalues(&self) -> (f64, f64) {
        let (lo, hi) = self.gershgorin_bounds();
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        // pad so the Sturm count is strictly monotone at both ends
        let pad = 1e-9 * span + f64::EPSILON;
        let lo = lo - pad;
        let hi = hi + pad;
        if self.dim() == 1 {
            return (self.diagonal[0], self.diagonal[0]);
        }
        let min_diag = self.diagonal.iter().copied().fold(f64::INFINITY, f64::min);
        let e0 = self.bisect(0, lo, min_diag.min(hi) + pad, span);
        let e1 = self.bisect(1, e0 - pad, hi, span);
        (e0, e1.max(e0))
    }
}

/// Ground energy and gap at one value of `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapPoint {
    pub s: f64,
    pub ground: f64,
    pub excited: f64,
    pub gap: f64,
}

/// `E0(s)` and `g(s) = E1(s) - E0(s)` for `H(s)` in the symmetric subspace.
pub fn gap_at(inst: &ProblemInstance, s: f64) -> Result<GapPoint> {
    check_schedule(s)?;
    let op = inst.tridiagonal(s)?;
    let (e0, e1) = op.lowest_two_eigenvalues();
    let (lo, hi) = op.gershgorin_bounds();
    let gap = e1 - e0;
    if gap < 1e-13 * (hi - lo).max(1.0) {
        return Err(Error::DegenerateGap { s, gap });
    }
    Ok(GapPoint {
        s,
        ground: e0,
        excited: e1,
        gap,
    })
}

/// The gap curve of one instance on a uniform grid, plus its refined minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct GapProfile {
    pub n: usize,
    pub alpha: f64,
    pub c: f64,
    pub s_values: Vec<f64>,
    pub ground_energy: Vec<f64>,
    pub gap: Vec<f64>,
    pub s_min: f64,
    pub g_min: f64,
}

impl GapProfile {
    /// Writes `# n,alpha,c,s_min,g_min` metadata followed by
    /// `s,ground_energy,gap` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        MetaHeader::new()
            .field("n", self.n)
            .field("alpha", self.alpha)
            .field("c", self.c)
            .field("s_min", self.s_min)
            .field("g_min", self.g_min)
            .write(&mut w)?;
        writeln!(w, "s,ground_energy,gap")?;
        for ((s, e), g) in self.s_values.iter().zip(&self.ground_energy).zip(&self.gap) {
            writeln!(w, "{s},{e},{g}")?;
        }
        Ok(())
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Scans `g(s)` on a grid of spacing `coarse_step`, then golden-section
/// refines around the grid minimum until the bracket is below `refine_tol`.
///
/// The grid uses `round(1 / coarse_step)` equal intervals so that both
/// endpoints are included exactly.
pub fn minimize_gap(
    inst: &ProblemInstance,
    coarse_step: f64,
    refine_tol: f64,
) -> Result<GapProfile> {
    if !(coarse_step > 0.0 && coarse_step <= 0.01) {
        return Err(Error::InvalidArgument(format!(
            "coarse_step {coarse_step} must lie in (0, 0.01]"
        )));
    }
    if !(refine_tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "refine_tol {refine_tol} must be positive"
        )));
    }
    let intervals = (1.0 / coarse_step).round() as usize;
    let mut s_values = Vec::with_capacity(intervals + 1);
    let mut ground_energy = Vec::with_capacity(intervals + 1);
    let mut gap = Vec::with_capacity(intervals + 1);
    for i in 0..=intervals {
        let s = i as f64 / intervals as f64;
        let p = gap_at(inst, s)?;
        s_values.push(s);
        ground_energy.push(p.ground);
        gap.push(p.gap);
    }

    let (best, _) = gap
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &g)| if g < acc.1 { (i, g) } else { acc });
    if best == 0 || best == intervals {
        return Err(Error::MinimumAtBoundary { s: s_values[best] });
    }

    let g = |s: f64| gap_at(inst, s).map(|p| p.gap);
    let mut a = s_values[best - 1];
    let mut b = s_values[best + 1];
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = g(x1)?;
    let mut f2 = g(x2)?;
    while b - a > refine_tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = g(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = g(x2)?;
        }
    }
    let (mut s_min, mut g_min) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    if gap[best] < g_min {
        s_min = s_values[best];
        g_min = gap[best];
    }

    Ok(GapProfile {
        n: inst.n(),
        alpha: inst.alpha(),
        c: inst.c(),
        s_values,
        ground_energy,
        gap,
        s_min,
        g_min,
    })
}

/// Minimum gap with the default scan settings (`0.001` grid, `1e-6` bracket).
pub fn default_minimize_gap(inst: &ProblemInstance) -> Result<GapProfile> {
    minimize_gap(inst, 1e-3, 1e-6)
}
