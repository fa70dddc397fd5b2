//! The gap-referenced annealing schedule.
//!
//! `s` advances in fixed steps of `delta_s`. At each step the sampler sweeps
//! until the mean energy over the trailing `window` sweeps is within
//! `threshold * g(s)` of the exact ground energy `E_GS(s)`. The number of
//! sweeps spent at each `s` is the run-time measure.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    estimate_diag_energy, estimate_offdiag_energy, metropolis_sweep, Lattice, QmcParams,
    SweepKernel,
};
use crate::csv::MetaHeader;
use crate::error::{Error, Result};
use crate::problem::ProblemInstance;
use crate::spectral::gap_at;

/// Exact `(E_GS(s), g(s))` at schedule step `i`, i.e. `s = i * delta_s`.
pub trait GapLookup {
    fn ground_and_gap(&self, step: usize) -> (f64, f64);
}

/// Exact spectral data at every schedule point, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleGaps {
    ground: Vec<f64>,
    gap: Vec<f64>,
}

impl ScheduleGaps {
    pub fn compute(inst: &ProblemInstance, steps: usize) -> Result<Self> {
        let mut ground = Vec::with_capacity(steps + 1);
        let mut gap = Vec::with_capacity(steps + 1);
        for i in 0..=steps {
            let p = gap_at(inst, i as f64 / steps as f64)?;
            ground.push(p.ground);
            gap.push(p.gap);
        }
        Ok(Self { ground, gap })
    }

    pub fn steps(&self) -> usize {
        self.ground.len() - 1
    }
}

impl GapLookup for ScheduleGaps {
    fn ground_and_gap(&self, step: usize) -> (f64, f64) {
        (self.ground[step], self.gap[step])
    }
}

/// What happened at one value of `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub s: f64,
    /// Reported sweep count (back-extrapolated when `extrapolated`).
    pub sweeps: u64,
    /// Sweeps actually performed at this `s`.
    pub sweeps_run: u64,
    /// Energy average that satisfied the advance rule.
    pub energy: f64,
    pub acceptance_fraction: f64,
    pub extrapolated: bool,
}

/// Per-sweep diagnostics handed to [`anneal_observed`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSample {
    pub step: usize,
    pub s: f64,
    pub sweep: u64,
    pub energy: f64,
    pub accepted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealTrace {
    pub n: usize,
    pub alpha: f64,
    pub c: f64,
    pub params: QmcParams,
    pub records: Vec<StepRecord>,
    /// Sum of reported sweeps over `s` in `[s_report_lo, s_report_hi]`.
    pub total_report_sweeps: u64,
}

impl AnnealTrace {
    /// Records whose `s` lies in the report window.
    pub fn report_records(&self) -> impl Iterator<Item = &StepRecord> {
        let (lo, hi) = report_bounds(&self.params);
        self.records[lo..=hi].iter()
    }

    /// Writes `s,sweeps,energy,acceptance_fraction,extrapolated` rows under a
    /// metadata line carrying every run parameter.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let p = &self.params;
        MetaHeader::new()
            .field("n", self.n)
            .field("alpha", self.alpha)
            .field("c", self.c)
            .field("beta", p.beta)
            .field("T", p.trotter_slices)
            .field("seed", p.seed)
            .field("delta_s", p.delta_s)
            .field("window", p.window)
            .field("threshold", p.threshold)
            .field("s_report_lo", p.s_report_lo)
            .field("s_report_hi", p.s_report_hi)
            .field("order", p.order.as_str())
            .field("total_report_sweeps", self.total_report_sweeps)
            .write(&mut w)?;
        writeln!(w, "s,sweeps,energy,acceptance_fraction,extrapolated")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.s, r.sweeps, r.energy, r.acceptance_fraction, r.extrapolated as u8
            )?;
        }
        Ok(())
    }
}

/// Schedule indices bounding the report window (inclusive).
fn report_bounds(p: &QmcParams) -> (usize, usize) {
    let steps = p.schedule_steps() as f64;
    let lo = (p.s_report_lo * steps - 1e-9).ceil().max(0.0) as usize;
    let hi = ((p.s_report_hi * steps + 1e-9).floor() as usize).min(steps as usize);
    (lo, hi)
}

/// Independent generator for replica `replica` under `master_seed`.
pub fn replica_rng(master_seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica);
    rng
}

/// Runs the full schedule `s = 0, delta_s, ..., 1` from a uniformly random
/// lattice.
pub fn anneal<L: GapLookup + ?Sized, R: Rng + ?Sized>(
    inst: &ProblemInstance,
    params: &QmcParams,
    gaps: &L,
    rng: &mut R,
) -> Result<AnnealTrace> {
    anneal_observed(inst, params, gaps, rng, |_| {})
}

/// [`anneal`] with a callback after every sweep.
pub fn anneal_observed<L, R, F>(
    inst: &ProblemInstance,
    params: &QmcParams,
    gaps: &L,
    rng: &mut R,
    mut observe: F,
) -> Result<AnnealTrace>
where
    L: GapLookup + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(SweepSample),
{
    params.validate()?;
    let n = inst.n();
    let t = params.trotter_slices;
    let steps = params.schedule_steps();
    let costs = inst.cost_table();
    let mut lat = Lattice::random(n, t, rng);
    let proposals_per_sweep = (n * t) as f64;
    let window = params.window;

    let mut records = Vec::with_capacity(steps + 1);
    // trailing energies, indexed by sweep number modulo the window
    let mut ring = vec![0.0; window];

    for step in 0..=steps {
        let s = step as f64 / steps as f64;
        let (e_gs, gap) = gaps.ground_and_gap(step);
        let close = |mean: f64| (mean - e_gs).abs() / gap < params.threshold;
        let kernel = SweepKernel::new(&costs, n, s, params);

        let mut prefix_means = Vec::with_capacity(window);
        let mut running = 0.0;
        let mut accepted_total = 0u64;
        let mut sweep = 0u64;
        let outcome = loop {
            if sweep >= params.max_sweeps_per_s {
                return Err(Error::AnnealTimeout { s, sweeps: sweep });
            }
            let accepted = metropolis_sweep(&mut lat, &kernel, params.order, rng);
            accepted_total += accepted as u64;
            // a zero-weight lattice (unequal links at s = 1) never counts as
            // converged
            let energy = estimate_offdiag_energy(&lat, s, params)
                .map(|eo| eo + estimate_diag_energy(&lat, &costs, s))
                .unwrap_or(f64::INFINITY);
            observe(SweepSample {
                step,
                s,
                sweep,
                energy,
                accepted,
            });

            let slot = (sweep % window as u64) as usize;
            sweep += 1;
            if sweep as usize <= window {
                running += energy;
                prefix_means.push(running / sweep as f64);
                ring[slot] = energy;
                if (sweep as usize) < window {
                    continue;
                }
                let mean = ring.iter().sum::<f64>() / window as f64;
                if close(mean) {
                    let first = prefix_means
                        .iter()
                        .position(|&m| close(m))
                        .expect("the full-window mean satisfies the rule");
                    break (first as u64 + 1, mean, true);
                }
            } else {
                // summed afresh: an infinite energy must leave the window
                // cleanly, which a running total cannot do (inf - inf)
                ring[slot] = energy;
                let mean = ring.iter().sum::<f64>() / window as f64;
                if close(mean) {
                    break (sweep, mean, false);
                }
            }
        };
        let (sweeps, energy, extrapolated) = outcome;
        records.push(StepRecord {
            s,
            sweeps,
            sweeps_run: sweep,
            energy,
            acceptance_fraction: accepted_total as f64 / (sweep as f64 * proposals_per_sweep),
            extrapolated,
        });
    }

    let (lo, hi) = report_bounds(params);
    let total_report_sweeps = records[lo..=hi].iter().map(|r| r.sweeps).sum();
    Ok(AnnealTrace {
        n,
        alpha: inst.alpha(),
        c: inst.c(),
        params: *params,
        records,
        total_report_sweeps,
    })
}
