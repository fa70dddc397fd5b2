//! Path-integral Monte Carlo on the Trotterised partition function.
//!
//! With the split `exp(-beta/T (H_d + H_o)) ~ exp(-beta/T H_d) exp(-beta/T H_o)`
//! the partition function becomes a sum over `n x T` bit lattices. Each slice
//! contributes `exp(-beta/T ((1-s) n/2 + s f(|x^(tau)|)))` and each bit on
//! each periodic link contributes `e^a + e^-a` when its two ends agree and
//! `e^a - e^-a` when they differ, with `a = beta (1-s) / (2T)`. Every factor
//! is nonnegative for `0 <= s <= 1`, so the weights can be sampled directly.

mod anneal;
mod lattice;

pub use anneal::{
    anneal, anneal_observed, replica_rng, AnnealTrace, GapLookup, ScheduleGaps, StepRecord,
    SweepSample,
};
pub use lattice::Lattice;

use rand::Rng;

use crate::error::{Error, Result};
use crate::problem::CostTable;

/// Order in which a sweep visits the `n x T` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepOrder {
    /// `n x T` proposals at independently uniform sites.
    #[default]
    RandomSite,
    /// Every site once, slice-major.
    ///
    /// Flips touching exactly one equal link have ratio 1 and are always
    /// accepted, so a slice-major pass drags every kink forward along the
    /// Trotter direction in lockstep. At large `beta / T` this chain does not
    /// mix: a single bit at `s = 0`, `beta = 32`, `T = 64` settles near energy
    /// 0.33 instead of 0. Kept for comparison only.
    Raster,
}

impl SweepOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepOrder::RandomSite => "random",
            SweepOrder::Raster => "raster",
        }
    }
}

impl std::str::FromStr for SweepOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SweepOrder::RandomSite),
            "raster" => Ok(SweepOrder::Raster),
            other => Err(Error::InvalidArgument(format!(
                "sweep order must be `random` or `raster`, got `{other}`"
            ))),
        }
    }
}

/// Sampler and schedule settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QmcParams {
    /// Inverse temperature.
    pub beta: f64,
    /// Number of Trotter slices `T`.
    pub trotter_slices: usize,
    /// Schedule increment in `s`; `1 / delta_s` must be an integer.
    pub delta_s: f64,
    /// Sweeps in the trailing energy average.
    pub window: usize,
    /// Advance once the trailing mean is within `threshold` gaps of the
    /// ground energy.
    pub threshold: f64,
    pub seed: u64,
    pub s_report_lo: f64,
    pub s_report_hi: f64,
    /// Sweeps allowed at a single `s` before the run is declared stalled.
    pub max_sweeps_per_s: u64,
    pub order: SweepOrder,
}

impl QmcParams {
    /// Defaults for an `n`-bit problem: `beta = 32`, `T = 4n`, `delta_s =
    /// 1/100`, a 100-sweep window and a 0.4-gap threshold.
    pub fn for_size(n: usize) -> Self {
        Self {
            beta: 32.0,
            trotter_slices: 4 * n,
            delta_s: 0.01,
            window: 100,
            threshold: 0.4,
            seed: 0,
            s_report_lo: 0.3,
            s_report_hi: 0.5,
            max_sweeps_per_s: 1_000_000,
            order: SweepOrder::RandomSite,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta {} must be positive", self.beta));
        }
        if self.trotter_slices < 2 {
            return bad(format!("need at least 2 Trotter slices, got {}", self.trotter_slices));
        }
        if !(self.delta_s > 0.0 && self.delta_s <= 0.1) {
            return bad(format!("delta_s {} must lie in (0, 0.1]", self.delta_s));
        }
        let steps = 1.0 / self.delta_s;
        if (steps - steps.round()).abs() > 1e-9 * steps {
            return bad(format!("1/delta_s = {steps} is not an integer"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} must lie in (0, 1)", self.threshold));
        }
        if self.window == 0 {
            return bad("window must be at least one sweep".into());
        }
        if self.max_sweeps_per_s < self.window as u64 {
            return bad("sweep cap below the averaging window".into());
        }
        if !(self.s_report_lo <= self.s_report_hi) {
            return bad("report range is empty".into());
        }
        Ok(())
    }

    /// Number of schedule intervals, `1 / delta_s`.
    pub fn schedule_steps(&self) -> usize {
        (1.0 / self.delta_s).round() as usize
    }

    /// Link exponent `a = beta (1 - s) / (2T)`.
    pub fn link_exponent(&self, s: f64) -> f64 {
        self.beta * (1.0 - s) / (2.0 * self.trotter_slices as f64)
    }
}

/// `2 cosh(a)` for a link whose ends agree, `2 sinh(a)` otherwise.
pub fn link_factor(equal: bool, s: f64, params: &QmcParams) -> f64 {
    let a = params.link_exponent(s);
    if equal {
        a.exp() + (-a).exp()
    } else {
        a.exp() - (-a).exp()
    }
}

/// Natural log of the unnormalised Boltzmann weight of a whole lattice.
///
/// Fails with [`Error::ZeroWeight`] when the weight vanishes, which happens
/// exactly at `s = 1` for lattices with an unequal link.
pub fn log_weight(lat: &Lattice, costs: &CostTable, s: f64, params: &QmcParams) -> Result<f64> {
    let n = lat.n();
    let t = lat.slices();
    let dtau = params.beta / t as f64;
    let diag: f64 = (0..t)
        .map(|tau| -dtau * ((1.0 - s) * n as f64 / 2.0 + s * costs.get(lat.slice_weight(tau))))
        .sum();
    let unequal = lat.unequal_links();
    if unequal > 0 && s >= 1.0 {
        return Err(Error::ZeroWeight { s });
    }
    let equal = n * t - unequal;
    let links = equal as f64 * link_factor(true, s, params).ln()
        + unequal as f64 * link_factor(false, s, params).ln();
    Ok(diag + links)
}

/// `log w(flipped) - log w(current)` for flipping bit `d` of slice `tau`,
/// evaluated from the two touching links and the slice weight only.
///
/// At `s = 1` a flip that breaks an equal link returns `-inf` and one that
/// heals two unequal links returns `+inf`.
pub fn flip_log_ratio(
    lat: &Lattice,
    tau: usize,
    d: usize,
    costs: &CostTable,
    s: f64,
    params: &QmcParams,
) -> f64 {
    let w = lat.slice_weight(tau);
    let w_new = if lat.get(tau, d) { w - 1 } else { w + 1 };
    let dtau = params.beta / lat.slices() as f64;
    let diag = dtau * s * (costs.get(w) - costs.get(w_new));
    let log_tanh = params.link_exponent(s).tanh().ln();
    let links = match lat.equal_links_at(tau, d) {
        2 => 2.0 * log_tanh,
        1 => 0.0,
        _ => -2.0 * log_tanh,
    };
    links + diag
}

/// Metropolis acceptance probabilities for one fixed `s`.
///
/// Indexed by the current bit value, the number of equal touching links
/// (0, 1 or 2) and the current slice weight.
#[derive(Debug, Clone)]
pub struct SweepKernel {
    n: usize,
    table: Vec<f64>,
}

impl SweepKernel {
    pub fn new(costs: &CostTable, n: usize, s: f64, params: &QmcParams) -> Self {
        let dtau = params.beta / params.trotter_slices as f64;
        let log_tanh = params.link_exponent(s).tanh().ln();
        let link = [-2.0 * log_tanh, 0.0, 2.0 * log_tanh];
        let mut table = vec![0.0; 2 * 3 * (n + 1)];
        for bit in 0..2 {
            for (k, &link_term) in link.iter().enumerate() {
                for w in 0..=n {
                    let w_new = match (bit, w) {
                        (0, w) if w < n => w + 1,
                        (1, w) if w > 0 => w - 1,
                        _ => continue, // unreachable state
                    };
                    let log_ratio = link_term + dtau * s * (costs.get(w) - costs.get(w_new));
                    let p = if log_ratio >= 0.0 { 1.0 } else { log_ratio.exp() };
                    table[(bit * 3 + k) * (n + 1) + w] = p;
                }
            }
        }
        Self { n, table }
    }

    #[inline]
    pub fn acceptance(&self, bit: u8, equal_links: usize, weight: usize) -> f64 {
        self.table[(bit as usize * 3 + equal_links) * (self.n + 1) + weight]
    }
}

/// One sweep of `n x T` single-bit Metropolis proposals. Returns the number
/// of accepted flips.
pub fn metropolis_sweep<R: Rng + ?Sized>(
    lat: &mut Lattice,
    kernel: &SweepKernel,
    order: SweepOrder,
    rng: &mut R,
) -> usize {
    let n = lat.n();
    let t = lat.slices();
    let mut accepted = 0;
    let mut propose = |lat: &mut Lattice, tau: usize, d: usize, rng: &mut R| {
        let bits = lat.raw();
        let b = bits[tau * n + d];
        let k = (b == bits[lat.prev(tau) * n + d]) as usize
            + (b == bits[lat.next(tau) * n + d]) as usize;
        let p = kernel.acceptance(b, k, lat.slice_weight(tau));
        if p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p) {
            lat.apply_flip(tau, d, k);
            accepted += 1;
        }
    };
    match order {
        SweepOrder::RandomSite => {
            for _ in 0..n * t {
                let site = rng.random_range(0..n * t);
                propose(lat, site / n, site % n, rng);
            }
        }
        SweepOrder::Raster => {
            for tau in 0..t {
                for d in 0..n {
                    propose(lat, tau, d, rng);
                }
            }
        }
    }
    accepted
}

/// Slice-averaged diagonal energy `(1/T) sum_tau ((1-s) n/2 + s f(|x^(tau)|))`.
pub fn estimate_diag_energy(lat: &Lattice, costs: &CostTable, s: f64) -> f64 {
    let n = lat.n() as f64;
    let sum: f64 = lat
        .slice_weights()
        .iter()
        .map(|&w| (1.0 - s) * n / 2.0 + s * costs.get(w))
        .sum();
    sum / lat.slices() as f64
}

/// Link-averaged off-diagonal energy.
///
/// Each bit of each link contributes `-(1-s)/2 tanh(a)` when its ends agree
/// and `-(1-s)/2 coth(a)` when they differ. At `s = 1` the prefactor
/// vanishes; a lattice with unequal links there has zero weight and is
/// reported as [`Error::ZeroWeight`].
pub fn estimate_offdiag_energy(lat: &Lattice, s: f64, params: &QmcParams) -> Result<f64> {
    let unequal = lat.unequal_links();
    if s >= 1.0 {
        return if unequal == 0 {
            Ok(0.0)
        } else {
            Err(Error::ZeroWeight { s })
        };
    }
    let t = lat.slices() as f64;
    let a = params.link_exponent(s);
    let tanh = a.tanh();
    let per_link_unequal = unequal as f64 / t;
    let per_link_equal = lat.n() as f64 - per_link_unequal;
    Ok(-(1.0 - s) / 2.0 * (per_link_equal * tanh + per_link_unequal / tanh))
}
