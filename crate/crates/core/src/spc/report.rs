//! CSV output for chart results.

use std::io::{self, Write};

use super::{Phase1Result, Phase2Result};

/// `t,Q_t,h,alarm`; `alarm` is 1 on the alarm row only.
pub fn write_phase2_csv<W: Write>(mut w: W, r: &Phase2Result) -> io::Result<()> {
    writeln!(w, "t,Q_t,h,alarm")?;
    for (i, q) in r.q.iter().enumerate() {
        let t = i + 1;
        writeln!(w, "{t},{q},{},{}", r.h, u8::from(r.alarm_time == Some(t)))?;
    }
    Ok(())
}

/// `tau,statistic,changepoint` over the candidate split times.
pub fn write_phase1_csv<W: Write>(mut w: W, r: &Phase1Result) -> io::Result<()> {
    writeln!(w, "tau,statistic,changepoint")?;
    for &(tau, t) in &r.statistic_trace {
        writeln!(w, "{tau},{t},{}", u8::from(r.changepoint == Some(tau)))?;
    }
    Ok(())
}

/// `key,value` summary: p-value, changepoint and flagged variables.
pub fn write_phase1_summary<W: Write>(mut w: W, r: &Phase1Result) -> io::Result<()> {
    writeln!(w, "key,value")?;
    writeln!(w, "p_value,{}", r.p_value)?;
    writeln!(w, "alpha,{}", r.alpha)?;
    writeln!(w, "n_perm,{}", r.n_perm)?;
    writeln!(w, "statistic,{}", r.statistic)?;
    writeln!(w, "changepoint,{}", r.changepoint.map(|c| c.to_string()).unwrap_or_default())?;
    let flagged: Vec<String> = r.flagged.iter().map(|f| f.index.to_string()).collect();
    writeln!(w, "flagged,{}", flagged.join(" "))?;
    Ok(())
}
