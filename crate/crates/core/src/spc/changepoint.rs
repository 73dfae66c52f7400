//! Post-alarm estimate of where a Phase II shift began.

use super::ranks::midranks;
use super::{SpcError, SpectraSeries};

/// Per-`tau` statistic for `tau = 1..=alarm_time`: the squared standardized
/// rank-sum of `stream[tau..=alarm_time]` against the reference pooled with
/// `stream[1..tau)`, summed over variables.
pub fn changepoint_trace(reference: &SpectraSeries, stream: &SpectraSeries, alarm_time: usize) -> Result<Vec<f64>, SpcError> {
    if reference.p() != stream.p() {
        return Err(SpcError::DimensionMismatch { reference: reference.p(), stream: stream.p() });
    }
    if alarm_time == 0 || alarm_time > stream.m() {
        return Err(SpcError::InvalidParameter(format!("alarm time {alarm_time} outside 1..={}", stream.m())));
    }
    let m0 = reference.m();
    let n = m0 + alarm_time;
    let mut trace = vec![0.0; alarm_time];
    for j in 0..reference.p() {
        let mut pooled = reference.column(j);
        pooled.extend(stream.rows()[..alarm_time].iter().map(|r| r[j]));
        let r = midranks(&pooled);
        let mean = (n as f64 + 1.0) / 2.0;
        let energy: f64 = r.iter().map(|x| (x - mean).powi(2)).sum();
        let mut tail = 0.0;
        for tau in (1..=alarm_time).rev() {
            tail += r[m0 + tau - 1];
            let n2 = (alarm_time - tau + 1) as f64;
            let n1 = n as f64 - n2;
            let var = n1 * n2 / (n as f64 * (n as f64 - 1.0)) * energy;
            if var > 0.0 {
                trace[tau - 1] += (tail - n2 * mean).powi(2) / var;
            }
        }
    }
    Ok(trace)
}

/// 1-based start of the shifted segment; the earliest maximizer wins.
pub fn estimate_changepoint(reference: &SpectraSeries, stream: &SpectraSeries, alarm_time: usize) -> Result<usize, SpcError> {
    let trace = changepoint_trace(reference, stream, alarm_time)?;
    let mut best = 0;
    for (i, &v) in trace.iter().enumerate() {
        if v > trace[best] {
            best = i;
        }
    }
    Ok(best + 1)
}
