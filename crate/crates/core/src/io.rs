//! Tick ingestion and CSV output.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dle::{DleResult, DLE_SCALE};
use crate::error::{Error, Result};
use crate::mc::{CellResult, DleStudyResult};
use crate::pipeline::JumpEvent;
use crate::series::TickSeries;
use crate::simkit::SimPath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub min_ticks: usize,
    pub drop_zero_returns: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            min_ticks: 100,
            drop_zero_returns: false,
        }
    }
}

/// Affine map `t -> (t - offset) / scale` applied to raw times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeMapping {
    pub offset: f64,
    pub scale: f64,
}

impl TimeMapping {
    pub const IDENTITY: Self = Self {
        offset: 0.0,
        scale: 1.0,
    };

    pub fn apply(&self, t: f64) -> f64 {
        (t - self.offset) / self.scale
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub series: TickSeries,
    pub mapping: TimeMapping,
    /// Rows removed as duplicate timestamps or zero returns.
    pub collapsed: usize,
}

#[derive(Debug, Deserialize)]
struct TickRow {
    time: String,
    logprice: String,
}

pub fn ingest_ticks(path: &Path, opts: &IngestOptions) -> Result<Ingested> {
    read_ticks(std::fs::File::open(path)?, opts)
}

/// Reads `time,logprice` rows. Times outside `[0, 1]` are taken as seconds
/// and mapped affinely onto `[0, 1]` from the first to the last tick.
/// Repeated timestamps keep the last price.
pub fn read_ticks<R: Read>(reader: R, opts: &IngestOptions) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time", "logprice"] {
        return Err(Error::Parse {
            row: 1,
            msg: format!("expected header time,logprice, found {}", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut times: Vec<f64> = Vec::new();
    let mut prices: Vec<f64> = Vec::new();
    let mut collapsed = 0;
    for (i, rec) in rdr.deserialize::<TickRow>().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        let t = parse_field(&rec.time, row, "time")?;
        let y = parse_field(&rec.logprice, row, "logprice")?;
        match times.last() {
            Some(&prev) if t < prev => {
                return Err(Error::Parse {
                    row,
                    msg: format!("time {t} precedes previous time {prev}"),
                })
            }
            Some(&prev) if t == prev => {
                *prices.last_mut().expect("paired with times") = y;
                collapsed += 1;
            }
            _ => {
                times.push(t);
                prices.push(y);
            }
        }
    }
    if opts.drop_zero_returns && !prices.is_empty() {
        let mut keep_t = vec![times[0]];
        let mut keep_y = vec![prices[0]];
        for (&t, &y) in times.iter().zip(&prices).skip(1) {
            if y != *keep_y.last().expect("nonempty") {
                keep_t.push(t);
                keep_y.push(y);
            } else {
                collapsed += 1;
            }
        }
        times = keep_t;
        prices = keep_y;
    }
    if times.len() < opts.min_ticks.max(3) {
        return Err(Error::TooShort {
            needed: opts.min_ticks.max(3),
            got: times.len(),
        });
    }
    let (first, last) = (times[0], times[times.len() - 1]);
    let mapping = if first >= 0.0 && last <= 1.0 {
        TimeMapping::IDENTITY
    } else {
        TimeMapping {
            offset: first,
            scale: last - first,
        }
    };
    let mapped = times.iter().map(|&t| mapping.apply(t).clamp(0.0, 1.0)).collect();
    Ok(Ingested {
        series: TickSeries::new(mapped, prices)?,
        mapping,
        collapsed,
    })
}

fn parse_field(s: &str, row: usize, name: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Parse {
        row,
        msg: format!("{name} field {s:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            msg: format!("{name} field {s:?} is not finite"),
        });
    }
    Ok(v)
}

pub fn write_ticks<W: Write>(ts: &TickSeries, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["time", "logprice"])?;
    for (t, y) in ts.times().iter().zip(ts.y()) {
        wtr.write_record([t.to_string(), y.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_sim_path<W: Write>(path: &SimPath, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["time", "x", "sig2", "y"])?;
    for i in 0..path.times.len() {
        wtr.write_record([
            path.times[i].to_string(),
            path.x[i].to_string(),
            path.sig2[i].to_string(),
            path.y[i].to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct EventRow<'a> {
    day: &'a str,
    bin: usize,
    tau_hat: f64,
    dx_hat: f64,
    sig2_left: f64,
    sig2_right: f64,
    qv_inc: f64,
    threshold: f64,
    vol_jump_stat: f64,
    vol_jump_pvalue: f64,
}

pub fn write_events<W: Write>(day: &str, events: &[JumpEvent], w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record([
        "day",
        "bin",
        "tau_hat",
        "dx_hat",
        "sig2_left",
        "sig2_right",
        "qv_inc",
        "threshold",
        "vol_jump_stat",
        "vol_jump_pvalue",
    ])?;
    for e in events {
        wtr.serialize(EventRow {
            day,
            bin: e.bin,
            tau_hat: e.tau_hat,
            dx_hat: e.dx_hat,
            sig2_left: e.sig2_left,
            sig2_right: e.sig2_right,
            qv_inc: e.qv_inc,
            threshold: e.threshold,
            vol_jump_stat: e.vol_jump.stat,
            vol_jump_pvalue: e.vol_jump.pvalue,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct DleRow<'a> {
    day: &'a str,
    mode: &'a str,
    n_jumps: usize,
    dle: f64,
    dle_scaled: f64,
    selfscale_var: f64,
    stat: f64,
    pvalue: f64,
    corr: f64,
    qv_price: f64,
    qv_vol: f64,
}

/// One row per `(day, mode)`.
pub fn write_dle_rows<W: Write>(rows: &[(String, String, DleResult)], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    if rows.is_empty() {
        wtr.write_record([
            "day", "mode", "n_jumps", "dle", "dle_scaled", "selfscale_var", "stat", "pvalue", "corr",
            "qv_price", "qv_vol",
        ])?;
    }
    for (day, mode, r) in rows {
        wtr.serialize(DleRow {
            day,
            mode,
            n_jumps: r.n_jumps,
            dle: r.dle,
            dle_scaled: r.dle * DLE_SCALE,
            selfscale_var: r.selfscale_var,
            stat: r.stat,
            pvalue: r.pvalue,
            corr: r.corr,
            qv_price: r.qv_price,
            qv_vol: r.qv_vol,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct CellRow {
    q: f64,
    n: usize,
    jump_multiple: u32,
    reps: usize,
    failed: usize,
    lm_window: usize,
    h: f64,
    lm_reject: f64,
    spectral_reject: f64,
    lm_rmse_e4: f64,
    spectral_rmse_e4: f64,
}

pub fn write_cells<W: Write>(cells: &[CellResult], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for c in cells {
        wtr.serialize(CellRow {
            q: c.q,
            n: c.n,
            jump_multiple: c.multiple,
            reps: c.reps,
            failed: c.failed,
            lm_window: c.lm_window,
            h: c.h,
            lm_reject: c.lm_reject,
            spectral_reject: c.spectral_reject,
            lm_rmse_e4: c.lm_rmse * 1e4,
            spectral_rmse_e4: c.spectral_rmse * 1e4,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Standardized statistics per cell in long format, for QQ plots.
pub fn write_cell_stats<W: Write>(cells: &[CellResult], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["q", "n", "jump_multiple", "rep", "lm_stat", "spectral_stat"])?;
    for c in cells {
        for (i, (a, b)) in c.lm_stats.iter().zip(&c.spectral_stats).enumerate() {
            wtr.write_record([
                c.q.to_string(),
                c.n.to_string(),
                c.multiple.to_string(),
                i.to_string(),
                a.to_string(),
                b.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Aligned text rendering of the rejection rates or RMSEs, one line per
/// `(q, n)` with LM/spectral pairs by jump multiple.
pub fn render_cells(cells: &[CellResult], rmse: bool) -> String {
    let mut out = String::new();
    let mut keys: Vec<(f64, usize)> = Vec::new();
    for c in cells {
        if !keys.contains(&(c.q, c.n)) {
            keys.push((c.q, c.n));
        }
    }
    let header = if rmse { "RMSE x 1e4" } else { "rejection rate" };
    out.push_str(&format!("{header}: LM / spectral per jump multiple\n"));
    for (q, n) in keys {
        out.push_str(&format!("q={q:<7} n={n:<5}"));
        for c in cells.iter().filter(|c| c.q == q && c.n == n) {
            let (a, b) = if rmse {
                (c.lm_rmse * 1e4, c.spectral_rmse * 1e4)
            } else {
                (c.lm_reject, c.spectral_reject)
            };
            let prec = if rmse { 1 } else { 3 };
            out.push_str(&format!("  {}q: {a:>6.prec$} {b:>6.prec$}", c.multiple));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
struct StudyRow {
    reps: usize,
    failed: usize,
    truth_scaled: f64,
    bias: f64,
    variance: f64,
    power: f64,
    detection_rate: f64,
    spurious_rate: f64,
    vol_reject: f64,
    ks_stat: f64,
    ks_pvalue: f64,
}

pub fn write_dle_study<W: Write>(r: &DleStudyResult, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.serialize(StudyRow {
        reps: r.reps,
        failed: r.failed,
        truth_scaled: r.truth * DLE_SCALE,
        bias: r.bias,
        variance: r.variance,
        power: r.power,
        detection_rate: r.detection_rate,
        spurious_rate: r.spurious_rate,
        vol_reject: r.vol_reject,
        ks_stat: r.ks_stat,
        ks_pvalue: r.ks_pvalue,
    })?;
    wtr.flush()?;
    Ok(())
}

/// Per-replication DLE output including the centred statistic.
pub fn write_dle_runs<W: Write>(r: &DleStudyResult, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "rep", "truth_scaled", "dle_scaled", "stat", "centred_stat", "pvalue", "n_jumps", "hit", "dx_hat",
        "vol_jump_hat", "vol_stat",
    ])?;
    for (i, run) in r.runs.iter().enumerate() {
        wtr.write_record([
            i.to_string(),
            (run.truth * DLE_SCALE).to_string(),
            (run.dle * DLE_SCALE).to_string(),
            run.stat.to_string(),
            run.centred_stat().to_string(),
            run.pvalue.to_string(),
            run.n_jumps.to_string(),
            run.hit.to_string(),
            run.dx_hat.to_string(),
            run.vol_jump_hat.to_string(),
            run.vol_stat.map_or(String::new(), |v| v.to_string()),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(min_ticks: usize) -> IngestOptions {
        IngestOptions {
            min_ticks,
            ..IngestOptions::default()
        }
    }

    #[test]
    fn three_rows() {
        let data = "time,logprice\n0.0,1.0\n0.5,1.1\n1.0,1.05\n";
        let got = read_ticks(data.as_bytes(), &opts(3)).unwrap();
        assert_eq!(got.series.n() + 1, 3);
        assert_eq!(got.mapping, TimeMapping::IDENTITY);
    }

    #[test]
    fn unsorted_names_row() {
        let data = "time,logprice\n0.0,1\n0.5,1\n0.4,1\n0.9,1\n";
        match read_ticks(data.as_bytes(), &opts(3)) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_and_short() {
        let data = "time,logprice\n0.0,1\n0.5,abc\n1.0,1\n";
        assert!(matches!(read_ticks(data.as_bytes(), &opts(3)), Err(Error::Parse { row: 3, .. })));
        let data = "time,logprice\n0.0,1\n0.5,2\n1.0,1\n";
        assert!(matches!(read_ticks(data.as_bytes(), &opts(100)), Err(Error::TooShort { .. })));
    }

    #[test]
    fn seconds_are_rescaled() {
        let mut data = String::from("time,logprice\n");
        for i in 0..=100 {
            data.push_str(&format!("{},{}\n", i as f64 * 234.0, (i % 3) as f64));
        }
        let got = read_ticks(data.as_bytes(), &opts(3)).unwrap();
        assert_eq!(got.mapping, TimeMapping { offset: 0.0, scale: 23_400.0 });
        let t = got.series.times();
        assert_eq!((t[0], t[100]), (0.0, 1.0));
        assert!((t[50] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn duplicates_and_zero_returns() {
        let data = "time,logprice\n0.0,1\n0.2,2\n0.2,3\n0.4,3\n0.6,4\n1.0,5\n";
        let got = read_ticks(data.as_bytes(), &opts(3)).unwrap();
        assert_eq!(got.series.y(), &[1.0, 3.0, 3.0, 4.0, 5.0]);
        let drop = IngestOptions {
            min_ticks: 3,
            drop_zero_returns: true,
        };
        let got = read_ticks(data.as_bytes(), &drop).unwrap();
        assert_eq!(got.series.y(), &[1.0, 3.0, 4.0, 5.0]);
        assert_eq!(got.collapsed, 2);
    }
}
