//! End-to-end runs: gap scans, scaling classification, annealing traces,
//! replica-averaged sweep curves and the sweeps-versus-gap correlation.
//!
//! A run is described by an [`ExperimentConfig`], which can be assembled from
//! a flat `key=value` file and then overridden key by key. Every output is a
//! CSV whose first line is a `#` metadata header carrying the parameters
//! needed to rerun it. Replicas and grid cells run on a worker pool but are
//! reduced in config order, so output bytes do not depend on scheduling.

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;

use crate::csv::MetaHeader;
use crate::error::{Error, Result};
use crate::problem::{valid_sizes, ProblemInstance};
use crate::qmc::{anneal, replica_rng, AnnealTrace, QmcParams, ScheduleGaps, SweepOrder};
use crate::scaling::{
    alpha_transition_scan, gap_series, loglog_fit, AlphaScan, GapSearch, LogLogFit,
    ScalingSeries, ScanOutcome,
};
use crate::spectral::{minimize_gap, GapProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    GapScan,
    GapScaling,
    QmcRun,
    SweepCurve,
    Correlate,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::GapScan,
        Mode::GapScaling,
        Mode::QmcRun,
        Mode::SweepCurve,
        Mode::Correlate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::GapScan => "gap-scan",
            Mode::GapScaling => "gap-scaling",
            Mode::QmcRun => "qmc-run",
            Mode::SweepCurve => "sweep-curve",
            Mode::Correlate => "correlate",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}`")))
    }
}

/// Keys accepted by [`ExperimentConfig::set`] (underscores are also
/// accepted in place of dashes).
pub const CONFIG_KEYS: [&str; 20] = [
    "mode",
    "alpha",
    "c",
    "n",
    "n-min",
    "n-max",
    "beta",
    "trotter-mult",
    "replicas",
    "seed",
    "out",
    "workers",
    "delta-s",
    "window",
    "threshold",
    "max-sweeps",
    "order",
    "sizes-per-cell",
    "coarse-step",
    "refine-tol",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// One exponent, or several for `gap-scaling` and `correlate`.
    pub alphas: Vec<f64>,
    /// One width constant, or several for `correlate`.
    pub cs: Vec<f64>,
    pub n: Option<usize>,
    pub n_min: Option<usize>,
    pub n_max: Option<usize>,
    pub beta: f64,
    /// `T = trotter_mult * n`. When unset, 16 for `(alpha, c) = (0.5, 2)`
    /// and 4 otherwise.
    pub trotter_mult: Option<usize>,
    pub replicas: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Worker threads; `None` lets the pool pick.
    pub workers: Option<usize>,
    pub delta_s: f64,
    pub window: usize,
    pub threshold: f64,
    pub max_sweeps: u64,
    pub order: SweepOrder,
    /// `correlate`: how many of the smallest valid sizes each cell uses.
    pub sizes_per_cell: usize,
    pub search: GapSearch,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{value}` for key `{key}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse(key, v)).collect()
}

/// Lists go into metadata joined by `;` so the header stays comma-separated.
fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

/// Splits a flat config file into `(key, value)` pairs. Blank lines and
/// lines starting with `#` are ignored.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            let (k, v) = l
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

impl ExperimentConfig {
    pub fn new(mode: Mode) -> Self {
        let d = QmcParams::for_size(1);
        Self {
            mode,
            alphas: Vec::new(),
            cs: Vec::new(),
            n: None,
            n_min: None,
            n_max: None,
            beta: d.beta,
            trotter_mult: None,
            replicas: 30,
            seed: 0,
            out: None,
            workers: None,
            delta_s: d.delta_s,
            window: d.window,
            threshold: d.threshold,
            max_sweeps: d.max_sweeps_per_s,
            order: d.order,
            sizes_per_cell: 5,
            search: GapSearch::default(),
        }
    }

    /// Sets one key. Later calls override earlier ones.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let v = value.trim();
        match key.as_str() {
            "mode" => self.mode = v.parse()?,
            "alpha" => self.alphas = parse_list(&key, v)?,
            "c" => self.cs = parse_list(&key, v)?,
            "n" => self.n = Some(parse(&key, v)?),
            "n-min" => self.n_min = Some(parse(&key, v)?),
            "n-max" => self.n_max = Some(parse(&key, v)?),
            "beta" => self.beta = parse(&key, v)?,
            "trotter-mult" => self.trotter_mult = Some(parse(&key, v)?),
            "replicas" => self.replicas = parse(&key, v)?,
            "seed" => self.seed = parse(&key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "workers" => self.workers = Some(parse(&key, v)?),
            "delta-s" => self.delta_s = parse(&key, v)?,
            "window" => self.window = parse(&key, v)?,
            "threshold" => self.threshold = parse(&key, v)?,
            "max-sweeps" => self.max_sweeps = parse(&key, v)?,
            "order" => self.order = v.parse()?,
            "sizes-per-cell" => self.sizes_per_cell = parse(&key, v)?,
            "coarse-step" => self.search.coarse_step = parse(&key, v)?,
            "refine-tol" => self.search.refine_tol = parse(&key, v)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies pairs in order, so later sources win.
    pub fn apply<'a, I>(&mut self, pairs: I) -> Result<()>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    fn single(&self, what: &str, xs: &[f64]) -> Result<f64> {
        match xs {
            [x] => Ok(*x),
            [] => Err(Error::Config(format!("{} needs `{what}`", self.mode.as_str()))),
            _ => Err(Error::Config(format!(
                "{} takes a single `{what}`, got {}",
                self.mode.as_str(),
                xs.len()
            ))),
        }
    }

    fn alpha(&self) -> Result<f64> {
        self.single("alpha", &self.alphas)
    }

    fn c(&self) -> Result<f64> {
        self.single("c", &self.cs)
    }

    fn size(&self) -> Result<usize> {
        self.n
            .ok_or_else(|| Error::Config(format!("{} needs `n`", self.mode.as_str())))
    }

    fn range(&self) -> Result<(usize, usize)> {
        match (self.n_min, self.n_max) {
            (Some(lo), Some(hi)) if lo <= hi => Ok((lo, hi)),
            (Some(lo), Some(hi)) => Err(Error::Config(format!("n-min {lo} exceeds n-max {hi}"))),
            _ => Err(Error::Config(format!(
                "{} needs `n-min` and `n-max`",
                self.mode.as_str()
            ))),
        }
    }

    /// Trotter multiplier for `(alpha, c)`, honouring an explicit override.
    pub fn trotter_mult_for(&self, alpha: f64, c: f64) -> usize {
        self.trotter_mult.unwrap_or(
            if (alpha - 0.5).abs() < 1e-12 && (c - 2.0).abs() < 1e-12 {
                16
            } else {
                4
            },
        )
    }

    /// Sampler settings for one instance.
    pub fn qmc_params(&self, inst: &ProblemInstance) -> QmcParams {
        QmcParams {
            beta: self.beta,
            trotter_slices: self.trotter_mult_for(inst.alpha(), inst.c()) * inst.n(),
            delta_s: self.delta_s,
            window: self.window,
            threshold: self.threshold,
            seed: self.seed,
            max_sweeps_per_s: self.max_sweeps,
            order: self.order,
            ..QmcParams::for_size(inst.n())
        }
    }

    /// Checks that the keys the mode needs are present and consistent.
    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be at least 1".into()));
        }
        if self.alphas.is_empty() || self.cs.is_empty() {
            return Err(Error::Config(format!(
                "{} needs `alpha` and `c`",
                self.mode.as_str()
            )));
        }
        match self.mode {
            Mode::GapScan => {
                self.alpha()?;
                self.c()?;
                if self.n.is_none() {
                    self.range()?;
                }
            }
            Mode::GapScaling => {
                self.c()?;
                self.range()?;
            }
            Mode::QmcRun | Mode::SweepCurve => {
                let inst = ProblemInstance::checked(self.size()?, self.alpha()?, self.c()?)?;
                self.qmc_params(&inst).validate()?;
            }
            Mode::Correlate => {
                self.range()?;
                if self.sizes_per_cell == 0 {
                    return Err(Error::Config("sizes-per-cell must be at least 1".into()));
                }
                let probe = ProblemInstance::new(8, self.alphas[0], self.cs[0])?;
                self.qmc_params(&probe).validate()?;
            }
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers.unwrap_or(0))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))
    }
}

/// Minimum gaps over a size range with the log-log fit, or the full `g(s)`
/// profile when a single `n` is given.
#[derive(Debug, Clone, PartialEq)]
pub enum GapScan {
    Profile(GapProfile),
    Series {
        alpha: f64,
        c: f64,
        n_min: usize,
        n_max: usize,
        series: ScalingSeries,
        fit: LogLogFit,
    },
}

impl GapScan {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let (alpha, c, n_min, n_max, series, fit) = match self {
            GapScan::Profile(p) => return p.write_csv(w),
            GapScan::Series {
                alpha,
                c,
                n_min,
                n_max,
                series,
                fit,
            } => (*alpha, *c, *n_min, *n_max, series, fit),
        };
        MetaHeader::new()
            .field("mode", Mode::GapScan.as_str())
            .field("alpha", alpha)
            .field("c", c)
            .field("n_min", n_min)
            .field("n_max", n_max)
            .field("slope", fit.slope)
            .field("intercept", fit.intercept)
            .write(&mut w)?;
        writeln!(w, "n,g_min,log_n,log_g_min,fit,residual")?;
        for i in 0..series.len() {
            let ln = series.log_n()[i];
            writeln!(
                w,
                "{},{},{},{},{},{}",
                series.n_values()[i],
                series.g_min_values()[i],
                ln,
                series.log_g()[i],
                fit.intercept + fit.slope * ln,
                fit.residuals[i]
            )?;
        }
        Ok(())
    }
}

pub fn run_gap_scan(cfg: &ExperimentConfig) -> Result<GapScan> {
    let (alpha, c) = (cfg.alpha()?, cfg.c()?);
    if let Some(n) = cfg.n {
        let inst = ProblemInstance::checked(n, alpha, c)?;
        return minimize_gap(&inst, cfg.search.coarse_step, cfg.search.refine_tol).map(GapScan::Profile);
    }
    let (n_min, n_max) = cfg.range()?;
    let series = cfg
        .pool()?
        .install(|| gap_series(alpha, c, n_min, n_max, cfg.search))?;
    let fit = loglog_fit(&series)?;
    Ok(GapScan::Series {
        alpha,
        c,
        n_min,
        n_max,
        series,
        fit,
    })
}

/// Curvature classification for every requested exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct GapScaling {
    pub c: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub scans: Vec<AlphaScan>,
}

impl GapScaling {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        MetaHeader::new()
            .field("mode", Mode::GapScaling.as_str())
            .field("c", self.c)
            .field("n_min", self.n_min)
            .field("n_max", self.n_max)
            .write(&mut w)?;
        writeln!(
            w,
            "alpha,c,sizes,slope,intercept,mean_curvature,std_error,classification,note"
        )?;
        for scan in &self.scans {
            let sizes = scan.series.as_ref().map_or(0, ScalingSeries::len);
            match &scan.outcome {
                ScanOutcome::Classified(v) => writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},",
                    scan.alpha,
                    scan.c,
                    sizes,
                    v.slope,
                    v.intercept,
                    v.mean_curvature,
                    v.std_error,
                    v.classification
                )?,
                ScanOutcome::Skipped(why) => {
                    writeln!(w, "{},{},{},,,,,skipped,{}", scan.alpha, scan.c, sizes, why)?
                }
            }
        }
        Ok(())
    }
}

pub fn run_gap_scaling(cfg: &ExperimentConfig) -> Result<GapScaling> {
    let c = cfg.c()?;
    let (n_min, n_max) = cfg.range()?;
    let scans = cfg
        .pool()?
        .install(|| alpha_transition_scan(&cfg.alphas, c, n_min, n_max, cfg.search))?;
    Ok(GapScaling {
        c,
        n_min,
        n_max,
        scans,
    })
}

/// One annealing trace, replica stream 0 of the master seed.
pub fn run_qmc(cfg: &ExperimentConfig) -> Result<AnnealTrace> {
    let inst = ProblemInstance::checked(cfg.size()?, cfg.alpha()?, cfg.c()?)?;
    let params = cfg.qmc_params(&inst);
    let gaps = ScheduleGaps::compute(&inst, params.schedule_steps())?;
    anneal(&inst, &params, &gaps, &mut replica_rng(cfg.seed, 0))
}

/// Sweep counts per `s` averaged over replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub n: usize,
    pub alpha: f64,
    pub c: f64,
    pub params: QmcParams,
    pub replicas: usize,
    pub s_values: Vec<f64>,
    pub mean_sweeps: Vec<f64>,
    /// Standard error of the replica mean (zero for one replica).
    pub std_error: Vec<f64>,
    /// `total_report_sweeps` of each replica, in replica order.
    pub replica_totals: Vec<u64>,
}

impl SweepCurve {
    pub fn mean_total_report_sweeps(&self) -> f64 {
        self.replica_totals.iter().sum::<u64>() as f64 / self.replicas as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let p = &self.params;
        MetaHeader::new()
            .field("mode", Mode::SweepCurve.as_str())
            .field("n", self.n)
            .field("alpha", self.alpha)
            .field("c", self.c)
            .field("beta", p.beta)
            .field("T", p.trotter_slices)
            .field("seed", p.seed)
            .field("replicas", self.replicas)
            .field("delta_s", p.delta_s)
            .field("window", p.window)
            .field("threshold", p.threshold)
            .field("order", p.order.as_str())
            .field("mean_total_report_sweeps", self.mean_total_report_sweeps())
            .write(&mut w)?;
        writeln!(w, "s,mean_sweeps,std_error")?;
        for i in 0..self.s_values.len() {
            writeln!(w, "{},{},{}", self.s_values[i], self.mean_sweeps[i], self.std_error[i])?;
        }
        Ok(())
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Runs `replicas` anneals on the pool; replica `r` uses stream
/// `stream_base + r` of the master seed. Results come back in replica order.
fn run_replicas(
    inst: &ProblemInstance,
    params: &QmcParams,
    gaps: &ScheduleGaps,
    replicas: usize,
    stream_base: u64,
) -> Vec<Result<AnnealTrace>> {
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(params.seed, stream_base + r as u64);
            anneal(inst, params, gaps, &mut rng)
        })
        .collect()
}

pub fn run_sweep_curve(cfg: &ExperimentConfig) -> Result<SweepCurve> {
    let inst = ProblemInstance::checked(cfg.size()?, cfg.alpha()?, cfg.c()?)?;
    let params = cfg.qmc_params(&inst);
    params.validate()?;
    let gaps = ScheduleGaps::compute(&inst, params.schedule_steps())?;
    let results = cfg
        .pool()?
        .install(|| run_replicas(&inst, &params, &gaps, cfg.replicas, 0));
    let traces = results
        .into_iter()
        .enumerate()
        .map(|(replica, r)| {
            r.map_err(|e| Error::Replica {
                replica,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let steps = traces[0].records.len();
    let mut mean_sweeps = Vec::with_capacity(steps);
    let mut std_error = Vec::with_capacity(steps);
    for i in 0..steps {
        let xs: Vec<f64> = traces.iter().map(|t| t.records[i].sweeps as f64).collect();
        let (m, se) = mean_and_se(&xs);
        mean_sweeps.push(m);
        std_error.push(se);
    }
    Ok(SweepCurve {
        n: inst.n(),
        alpha: inst.alpha(),
        c: inst.c(),
        params,
        replicas: cfg.replicas,
        s_values: traces[0].records.iter().map(|r| r.s).collect(),
        mean_sweeps,
        std_error,
        replica_totals: traces.iter().map(|t| t.total_report_sweeps).collect(),
    })
}

/// One `(alpha, c, n)` cell of the correlation study.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCell {
    pub n: usize,
    pub alpha: f64,
    pub c: f64,
    pub trotter_slices: usize,
    pub g_min: f64,
    /// Mean `total_report_sweeps` over replicas; `None` if any replica
    /// timed out.
    pub mean_total_report_sweeps: Option<f64>,
    pub std_error: Option<f64>,
    pub timeouts: usize,
}

impl CorrelationCell {
    pub fn inverse_gap_sq(&self) -> f64 {
        self.g_min.powi(-2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub alphas: Vec<f64>,
    pub cs: Vec<f64>,
    pub beta: f64,
    pub seed: u64,
    pub replicas: usize,
    pub cells: Vec<CorrelationCell>,
    /// Pearson coefficient of `log sweeps` against `log g_min^-2` over cells
    /// without timeouts; `None` when fewer than two such cells exist or
    /// either variable is constant.
    pub coefficient: Option<f64>,
}

impl Correlation {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let coef = self
            .coefficient
            .map_or_else(|| "undefined".to_string(), |r| r.to_string());
        MetaHeader::new()
            .field("mode", Mode::Correlate.as_str())
            .field("alpha", join(&self.alphas))
            .field("c", join(&self.cs))
            .field("beta", self.beta)
            .field("seed", self.seed)
            .field("replicas", self.replicas)
            .field("correlation", coef)
            .write(&mut w)?;
        writeln!(
            w,
            "n,alpha,c,T,g_min,inverse_gap_sq,mean_total_report_sweeps,std_error,status"
        )?;
        for cell in &self.cells {
            let (mean, se, status) = match (cell.mean_total_report_sweeps, cell.std_error) {
                (Some(m), Some(se)) => (m.to_string(), se.to_string(), "ok".to_string()),
                _ => (String::new(), String::new(), format!("timeout({})", cell.timeouts)),
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                cell.n,
                cell.alpha,
                cell.c,
                cell.trotter_slices,
                cell.g_min,
                cell.inverse_gap_sq(),
                mean,
                se,
                status
            )?;
        }
        Ok(())
    }
}

/// Pearson correlation coefficient; `None` for fewer than two points or a
/// constant coordinate.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

pub fn run_correlation(cfg: &ExperimentConfig) -> Result<Correlation> {
    let (n_min, n_max) = cfg.range()?;
    let mut instances = Vec::new();
    for &alpha in &cfg.alphas {
        for &c in &cfg.cs {
            for n in valid_sizes(alpha, c, n_min, n_max)
                .into_iter()
                .take(cfg.sizes_per_cell)
            {
                instances.push(ProblemInstance::checked(n, alpha, c)?);
            }
        }
    }
    if instances.is_empty() {
        return Err(Error::Config(format!(
            "no valid sizes in {n_min}..={n_max} for any (alpha, c) cell"
        )));
    }
    let pool = cfg.pool()?;
    let cells = pool.install(|| -> Result<Vec<CorrelationCell>> {
        let prepared = instances
            .par_iter()
            .map(|inst| {
                let params = cfg.qmc_params(inst);
                params.validate()?;
                let gaps = ScheduleGaps::compute(inst, params.schedule_steps())?;
                let profile = minimize_gap(inst, cfg.search.coarse_step, cfg.search.refine_tol)?;
                Ok((params, gaps, profile.g_min))
            })
            .collect::<Result<Vec<_>>>()?;
        // flatten (cell, replica) so long cells do not serialise the pool
        let jobs: Vec<(usize, usize)> = (0..instances.len())
            .flat_map(|i| (0..cfg.replicas).map(move |r| (i, r)))
            .collect();
        let outcomes: Vec<Result<AnnealTrace>> = jobs
            .par_iter()
            .map(|&(i, r)| {
                let (params, gaps, _) = &prepared[i];
                let stream = ((i as u64) << 32) | r as u64;
                anneal(&instances[i], params, gaps, &mut replica_rng(params.seed, stream))
            })
            .collect();
        let mut cells = Vec::with_capacity(instances.len());
        for (i, chunk) in outcomes.chunks(cfg.replicas).enumerate() {
            let mut totals = Vec::new();
            let mut timeouts = 0;
            for outcome in chunk {
                match outcome {
                    Ok(t) => totals.push(t.total_report_sweeps as f64),
                    Err(Error::AnnealTimeout { .. }) => timeouts += 1,
                    Err(e) => return Err(e.clone()),
                }
            }
            let (params, _, g_min) = &prepared[i];
            let stats = (timeouts == 0).then(|| mean_and_se(&totals));
            cells.push(CorrelationCell {
                n: instances[i].n(),
                alpha: instances[i].alpha(),
                c: instances[i].c(),
                trotter_slices: params.trotter_slices,
                g_min: *g_min,
                mean_total_report_sweeps: stats.map(|s| s.0),
                std_error: stats.map(|s| s.1),
                timeouts,
            });
        }
        Ok(cells)
    })?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = cells
        .iter()
        .filter_map(|c| {
            c.mean_total_report_sweeps
                .map(|m| (c.inverse_gap_sq().ln(), m.ln()))
        })
        .unzip();
    Ok(Correlation {
        alphas: cfg.alphas.clone(),
        cs: cfg.cs.clone(),
        beta: cfg.beta,
        seed: cfg.seed,
        replicas: cfg.replicas,
        cells,
        coefficient: pearson(&xs, &ys),
    })
}

/// Result of any mode.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    GapScan(GapScan),
    GapScaling(GapScaling),
    Qmc(AnnealTrace),
    SweepCurve(SweepCurve),
    Correlation(Correlation),
}

impl Output {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        match self {
            Output::GapScan(x) => x.write_csv(w),
            Output::GapScaling(x) => x.write_csv(w),
            Output::Qmc(x) => x.write_csv(w),
            Output::SweepCurve(x) => x.write_csv(w),
            Output::Correlation(x) => x.write_csv(w),
        }
    }
}

/// Validates the config and runs its mode.
pub fn run(cfg: &ExperimentConfig) -> Result<Output> {
    cfg.validate()?;
    Ok(match cfg.mode {
        Mode::GapScan => Output::GapScan(run_gap_scan(cfg)?),
        Mode::GapScaling => Output::GapScaling(run_gap_scaling(cfg)?),
        Mode::QmcRun => Output::Qmc(run_qmc(cfg)?),
        Mode::SweepCurve => Output::SweepCurve(run_sweep_curve(cfg)?),
        Mode::Correlate => Output::Correlation(run_correlation(cfg)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(mode: Mode, pairs: &[(&str, &str)]) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(mode);
        c.apply(pairs.iter().copied()).unwrap();
        c
    }

    fn csv_of(out: &Output) -> String {
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn config_text_and_override_order() {
        let text = "# manifest\nalpha = 0.3\nc=1\n\nn_min=100\nn-max=200\nseed=7\n";
        let mut c = ExperimentConfig::new(Mode::GapScan);
        let pairs = parse_config_text(text).unwrap();
        c.apply(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str()))).unwrap();
        c.apply([("seed", "9")]).unwrap();
        assert_eq!(c.alphas, vec![0.3]);
        assert_eq!((c.n_min, c.n_max, c.seed), (Some(100), Some(200), 9));
        assert!(parse_config_text("alpha 0.3").is_err());
        assert!(c.set("gamma", "1").is_err());
        assert!(c.set("beta", "lots").is_err());
    }

    #[test]
    fn every_listed_key_is_accepted() {
        let mut c = ExperimentConfig::new(Mode::GapScan);
        let sample = |k: &str| match k {
            "mode" => "correlate",
            "out" => "x.csv",
            "order" => "raster",
            "alpha" | "c" => "0.3,0.4",
            "delta-s" | "threshold" | "coarse-step" | "refine-tol" => "0.01",
            _ => "3",
        };
        for k in CONFIG_KEYS {
            c.set(k, sample(k)).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
    }

    #[test]
    fn auto_trotter_multiplier() {
        let mut c = cfg(Mode::QmcRun, &[]);
        assert_eq!(c.trotter_mult_for(0.5, 2.0), 16);
        assert_eq!(c.trotter_mult_for(0.5, 3.0), 4);
        assert_eq!(c.trotter_mult_for(0.4, 2.0), 4);
        c.set("trotter-mult", "8").unwrap();
        assert_eq!(c.trotter_mult_for(0.5, 2.0), 8);
    }

    #[test]
    fn validation_catches_missing_keys() {
        assert!(cfg(Mode::GapScan, &[("alpha", "0.3")]).validate().is_err());
        assert!(cfg(Mode::GapScan, &[("alpha", "0.3"), ("c", "1")]).validate().is_err());
        assert!(cfg(Mode::GapScan, &[("alpha", "0.3,0.4"), ("c", "1"), ("n", "104")])
            .validate()
            .is_err());
        assert!(cfg(Mode::SweepCurve, &[("alpha", "0.3"), ("c", "1"), ("n", "104"), ("replicas", "0")])
            .validate()
            .is_err());
        // 102 is not a multiple of four
        assert!(cfg(Mode::QmcRun, &[("alpha", "0.3"), ("c", "1"), ("n", "102")])
            .validate()
            .is_err());
        assert!(cfg(Mode::GapScaling, &[("alpha", "0.3"), ("c", "1"), ("n-min", "300"), ("n-max", "100")])
            .validate()
            .is_err());
    }

    #[test]
    fn empty_range_is_reported() {
        let c = cfg(
            Mode::GapScan,
            &[("alpha", "0.3"), ("c", "1"), ("n-min", "101"), ("n-max", "103")],
        );
        assert!(matches!(run(&c), Err(Error::EmptySizeRange { .. })));
    }

    #[test]
    fn gap_scan_table_columns() {
        let c = cfg(
            Mode::GapScan,
            &[("alpha", "0.3"), ("c", "1"), ("n-min", "100"), ("n-max", "400"), ("coarse-step", "0.01")],
        );
        let text = csv_of(&run(&c).unwrap());
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# mode=gap-scan,alpha=0.3,c=1"));
        assert_eq!(lines.next().unwrap(), "n,g_min,log_n,log_g_min,fit,residual");
        let rows: Vec<_> = lines.collect();
        // 104, 216 and 396
        assert_eq!(rows.len(), 3);
        let residual_sum: f64 = rows
            .iter()
            .map(|r| r.rsplit(',').next().unwrap().parse::<f64>().unwrap())
            .sum();
        assert!(residual_sum.abs() < 1e-9);
    }

    fn tiny_qmc(mode: Mode, replicas: &str) -> ExperimentConfig {
        cfg(
            mode,
            &[
                ("alpha", "0.3"),
                ("c", "1"),
                ("n", "16"),
                ("delta-s", "0.05"),
                ("window", "20"),
                ("replicas", replicas),
                ("seed", "11"),
                ("workers", "2"),
            ],
        )
    }

    #[test]
    fn single_replica_curve_is_the_trace() {
        let curve = run_sweep_curve(&tiny_qmc(Mode::SweepCurve, "1")).unwrap();
        let trace = run_qmc(&tiny_qmc(Mode::QmcRun, "1")).unwrap();
        let sweeps: Vec<f64> = trace.records.iter().map(|r| r.sweeps as f64).collect();
        assert_eq!(curve.mean_sweeps, sweeps);
        assert!(curve.std_error.iter().all(|&e| e == 0.0));
        assert_eq!(curve.replica_totals, vec![trace.total_report_sweeps]);
    }

    #[test]
    fn outputs_do_not_depend_on_worker_count() {
        let mut a = tiny_qmc(Mode::SweepCurve, "3");
        let b = a.clone();
        a.workers = Some(1);
        assert_eq!(csv_of(&run(&a).unwrap()), csv_of(&run(&b).unwrap()));
    }

    #[test]
    fn replica_timeout_names_the_replica() {
        let mut c = tiny_qmc(Mode::SweepCurve, "2");
        c.max_sweeps = 20;
        c.threshold = 1e-9;
        match run(&c) {
            Err(Error::Replica { replica, source }) => {
                assert_eq!(replica, 0);
                assert!(matches!(*source, Error::AnnealTimeout { .. }));
            }
            other => panic!("expected replica error, got {other:?}"),
        }
    }

    #[test]
    fn single_cell_correlation_is_undefined() {
        let mut c = tiny_qmc(Mode::Correlate, "2");
        c.n = None;
        c.n_min = Some(12);
        c.n_max = Some(12);
        let out = run(&c).unwrap();
        let Output::Correlation(corr) = &out else {
            panic!()
        };
        assert_eq!(corr.cells.len(), 1);
        assert_eq!(corr.coefficient, None);
        assert!(csv_of(&out).lines().next().unwrap().contains("correlation=undefined"));
    }

    #[test]
    fn timed_out_cells_are_marked_and_excluded() {
        let mut c = tiny_qmc(Mode::Correlate, "1");
        c.n = None;
        c.n_min = Some(12);
        c.n_max = Some(40);
        c.max_sweeps = 20;
        c.threshold = 1e-9;
        let out = run(&c).unwrap();
        let Output::Correlation(corr) = &out else {
            panic!()
        };
        assert_eq!(corr.cells.len(), 2);
        assert!(corr.cells.iter().all(|c| c.mean_total_report_sweeps.is_none()));
        assert_eq!(corr.coefficient, None);
        assert!(csv_of(&out).contains("timeout(1)"));
    }

    #[test]
    fn pearson_basics() {
        assert_eq!(pearson(&[1.0], &[2.0]), None);
        assert_eq!(pearson(&[1.0, 1.0], &[2.0, 3.0]), None);
        let r = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]).unwrap();
        assert!(r > 0.99 && r <= 1.0);
        let r = pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
    }
}
