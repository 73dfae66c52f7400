//! Online (Phase II) rank EWMA chart with a Monte Carlo control limit.

use rand::Rng;
use rayon::prelude::*;

use super::ranks::{midranks, pooled_rank, substream};
use super::{SpcError, SpectraSeries};

/// How in-control streams are simulated when calibrating the limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    /// Stream rows resampled with replacement from the reference and ranked
    /// against the fixed reference.
    #[default]
    Bootstrap,
    /// Reference and stream are both redrawn from the smoothed empirical
    /// rank copula of the reference, so the dependence that a finite
    /// reference induces between successive ranks is part of the simulation.
    Copula,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Phase2Options {
    pub ewma_lambda: f64,
    pub target_arl0: f64,
    pub n_cal: usize,
    pub seed: u64,
    pub calibration: Calibration,
    /// Simulated streams are cut at this multiple of the target ARL.
    pub horizon_factor: f64,
}

impl Default for Phase2Options {
    fn default() -> Self {
        Self { ewma_lambda: 0.1, target_arl0: 200.0, n_cal: 2000, seed: 0x5eed, calibration: Calibration::Bootstrap, horizon_factor: 8.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase2Result {
    /// `Q_t` for `t = 1..`.
    pub q: Vec<f64>,
    pub h: f64,
    /// 1-based.
    pub alarm_time: Option<usize>,
    pub ewma_lambda: f64,
    pub target_arl0: f64,
    /// In-control ARL of the simulated streams at `h`.
    pub calibrated_arl0: f64,
}

/// Per-variable sorted reference columns and the rank standardization.
struct RankScale {
    sorted: Vec<Vec<f64>>,
    mean: f64,
    sd: f64,
}

impl RankScale {
    fn new(columns: Vec<Vec<f64>>) -> Self {
        let m0 = columns.first().map_or(0, Vec::len) as f64;
        let sorted = columns
            .into_iter()
            .map(|mut c| {
                c.sort_by(f64::total_cmp);
                c
            })
            .collect();
        Self { sorted, mean: (m0 + 2.0) / 2.0, sd: (((m0 + 1.0).powi(2) - 1.0) / 12.0).sqrt() }
    }

    fn standardized(&self, x: &[f64], out: &mut [f64]) {
        for ((o, col), &v) in out.iter_mut().zip(&self.sorted).zip(x) {
            *o = (pooled_rank(col, v) - self.mean) / self.sd;
        }
    }
}

struct Ewma {
    lambda: f64,
    z: Vec<f64>,
}

impl Ewma {
    fn new(lambda: f64, p: usize) -> Self {
        Self { lambda, z: vec![0.0; p] }
    }

    fn step(&mut self, u: &[f64]) -> f64 {
        let l = self.lambda;
        for (z, &x) in self.z.iter_mut().zip(u) {
            *z = (1.0 - l) * *z + l * x;
        }
        (2.0 - l) / l * self.z.iter().map(|z| z * z).sum::<f64>()
    }
}

fn check(reference: &SpectraSeries, lambda: f64) -> Result<(), SpcError> {
    if reference.m() < 10 {
        return Err(SpcError::InsufficientObservations { m: reference.m(), p: reference.p() });
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(SpcError::InvalidParameter(format!("ewma_lambda = {lambda} outside (0, 1]")));
    }
    Ok(())
}

fn columns(s: &SpectraSeries) -> Vec<Vec<f64>> {
    (0..s.p()).map(|j| s.column(j)).collect()
}

/// `Q_t` of `stream` against `reference`.
pub fn charting_statistics(reference: &SpectraSeries, stream: &SpectraSeries, ewma_lambda: f64) -> Result<Vec<f64>, SpcError> {
    check(reference, ewma_lambda)?;
    if stream.p() != reference.p() {
        return Err(SpcError::DimensionMismatch { reference: reference.p(), stream: stream.p() });
    }
    let scale = RankScale::new(columns(reference));
    let mut ewma = Ewma::new(ewma_lambda, reference.p());
    let mut u = vec![0.0; reference.p()];
    Ok(stream
        .rows()
        .iter()
        .map(|x| {
            scale.standardized(x, &mut u);
            ewma.step(&u)
        })
        .collect())
}

/// Running-maximum records `(t, max_{s <= t} Q_s)` of one simulated stream;
/// the run length at limit `h` is the first record time with value `> h`.
type Records = Vec<(u32, f64)>;

fn run_length(records: &Records, h: f64, horizon: u32) -> u32 {
    records.iter().find(|&&(_, q)| q > h).map_or(horizon, |&(t, _)| t)
}

fn arl(all: &[Records], h: f64, horizon: u32) -> f64 {
    all.iter().map(|r| run_length(r, h, horizon) as f64).sum::<f64>() / all.len() as f64
}

fn record_stream(mut next_q: impl FnMut() -> f64, horizon: u32) -> Records {
    let mut rec = Vec::new();
    let mut best = f64::NEG_INFINITY;
    for t in 1..=horizon {
        let q = next_q();
        if q > best {
            best = q;
            rec.push((t, q));
        }
    }
    rec
}

/// Control limit `h` whose simulated in-control ARL matches `target_arl0`,
/// with the ARL actually achieved.
pub fn calibrate_limit(reference: &SpectraSeries, opts: &Phase2Options) -> Result<(f64, f64), SpcError> {
    check(reference, opts.ewma_lambda)?;
    if !(opts.target_arl0 >= 1.0) || opts.n_cal == 0 || !(opts.horizon_factor >= 1.0) {
        return Err(SpcError::InvalidParameter("target_arl0 >= 1, n_cal > 0 and horizon_factor >= 1 are required".into()));
    }
    let (m0, p) = (reference.m(), reference.p());
    let horizon = (opts.horizon_factor * opts.target_arl0).ceil().min(u32::MAX as f64) as u32;
    let cols = columns(reference);
    let lambda = opts.ewma_lambda;
    let all: Vec<Records> = match opts.calibration {
        Calibration::Copula => {
            // reference rank of every cell, rows x variables
            let ranks: Vec<Vec<f64>> = cols.iter().map(|c| midranks(c)).collect();
            (0..opts.n_cal)
                .into_par_iter()
                .map(|i| {
                    let mut rng = substream(opts.seed, i as u64);
                    let draw = |rng: &mut rand_chacha::ChaCha8Rng, out: &mut [f64]| {
                        let row = rng.random_range(0..m0);
                        for (j, o) in out.iter_mut().enumerate() {
                            let w: f64 = rng.random();
                            *o = (ranks[j][row] - w) / m0 as f64;
                        }
                    };
                    let mut synth = vec![vec![0.0; m0]; p];
                    let mut x = vec![0.0; p];
                    for r in 0..m0 {
                        draw(&mut rng, &mut x);
                        for j in 0..p {
                            synth[j][r] = x[j];
                        }
                    }
                    let scale = RankScale::new(synth);
                    let mut ewma = Ewma::new(lambda, p);
                    let mut u = vec![0.0; p];
                    record_stream(
                        || {
                            draw(&mut rng, &mut x);
                            scale.standardized(&x, &mut u);
                            ewma.step(&u)
                        },
                        horizon,
                    )
                })
                .collect()
        }
        Calibration::Bootstrap => {
            let scale = RankScale::new(cols);
            let rows = reference.rows();
            (0..opts.n_cal)
                .into_par_iter()
                .map(|i| {
                    let mut rng = substream(opts.seed, i as u64);
                    let mut ewma = Ewma::new(lambda, p);
                    let mut u = vec![0.0; p];
                    record_stream(
                        || {
                            scale.standardized(&rows[rng.random_range(0..m0)], &mut u);
                            ewma.step(&u)
                        },
                        horizon,
                    )
                })
                .collect()
        }
    };
    let mut lo = 0.0;
    let mut hi = all.iter().filter_map(|r| r.last().map(|x| x.1)).fold(0.0f64, f64::max);
    if arl(&all, hi, horizon) < opts.target_arl0 {
        log::warn!("simulation horizon {horizon} too short to reach ARL {}", opts.target_arl0);
        return Ok((hi, arl(&all, hi, horizon)));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if arl(&all, mid, horizon) >= opts.target_arl0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let achieved = arl(&all, hi, horizon);
    if (achieved - opts.target_arl0).abs() > 0.05 * opts.target_arl0 {
        log::warn!("calibrated ARL {achieved:.1} misses target {} by more than 5%", opts.target_arl0);
    }
    Ok((hi, achieved))
}

/// Calibrates the limit on `reference` and charts `stream`.
pub fn phase2_chart(reference: &SpectraSeries, stream: &SpectraSeries, opts: &Phase2Options) -> Result<Phase2Result, SpcError> {
    let q = charting_statistics(reference, stream, opts.ewma_lambda)?;
    let (h, calibrated_arl0) = calibrate_limit(reference, opts)?;
    Ok(chart_with_limit(q, h, opts, calibrated_arl0))
}

/// Builds a result from precomputed statistics and a known limit.
pub fn chart_with_limit(q: Vec<f64>, h: f64, opts: &Phase2Options, calibrated_arl0: f64) -> Phase2Result {
    let alarm_time = q.iter().position(|&x| x > h).map(|i| i + 1);
    Phase2Result { q, h, alarm_time, ewma_lambda: opts.ewma_lambda, target_arl0: opts.target_arl0, calibrated_arl0 }
}
