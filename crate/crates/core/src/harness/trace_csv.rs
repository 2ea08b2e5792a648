//! Trace and auction-stream CSV files.
//!
//! A trace file has an optional leading `# commitment=<sha256>` line, the
//! header `t,action,reward,cost_1..,lambda_1..,remaining_1..,void_forced`,
//! one row per round with numbers at 9 significant digits, and closing
//! `# tau=` and `# total_reward=` lines. The closing totals are printed at
//! full round-trip precision.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fpa::{RateRule, TreeConfig};
use crate::meta::Trace;

use super::config::{parse_rate, rate_name};

/// Decimal rendering of `x` with `digits` significant digits, trailing
/// zeros removed.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - exp).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.truncate(s.trim_end_matches('0').trim_end_matches('.').len());
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn sig(x: f64) -> String {
    format_sig(x, 9)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub action: usize,
    pub reward: f64,
    pub costs: Vec<f64>,
    pub lambda: Vec<f64>,
    pub remaining: Vec<f64>,
    pub void_forced: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub commitment: Option<String>,
    pub rows: Vec<TraceRow>,
    pub tau: usize,
    pub total_reward: f64,
}

fn header(m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "action".into(), "reward".into()];
    for prefix in ["cost", "lambda", "remaining"] {
        h.extend((1..=m).map(|i| format!("{prefix}_{i}")));
    }
    h.push("void_forced".into());
    h
}

pub fn write_trace_csv(trace: &Trace, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    if let Some(c) = &trace.commitment {
        writeln!(out, "# commitment={c}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(header(trace.num_resources)).map_err(csv_err)?;
    for r in &trace.rounds {
        let mut rec = vec![r.t.to_string(), r.action.to_string(), sig(r.reward)];
        rec.extend(r.costs.iter().map(|&x| sig(x)));
        rec.extend(r.lambda.lambda().iter().map(|&x| sig(x)));
        rec.extend(r.remaining.iter().map(|&x| sig(x)));
        rec.push(r.void_forced.to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    let mut out = w.into_inner().map_err(|e| io(e.into_error()))?;
    writeln!(out, "# tau={}", trace.tau).map_err(io)?;
    writeln!(out, "# total_reward={}", trace.total_reward).map_err(io)?;
    out.flush().map_err(io)
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Splits a file into `# key=value` comments and the remaining CSV text.
fn split_comments(path: &Path) -> Result<(Vec<(String, String)>, String)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut comments = Vec::new();
    let mut body = String::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(c) = line.strip_prefix('#') {
            let (k, v) = c
                .trim()
                .split_once('=')
                .ok_or_else(|| parse_err(path, format!("malformed comment `{line}`")))?;
            comments.push((k.trim().to_string(), v.trim().to_string()));
        } else {
            body.push_str(&line);
            body.push('\n');
        }
    }
    Ok((comments, body))
}

fn comment<'a>(comments: &'a [(String, String)], key: &str) -> Option<&'a str> {
    comments.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn field<T: std::str::FromStr>(path: &Path, value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| parse_err(path, format!("cannot read {what} from `{value}`")))
}

pub fn read_trace_csv(path: &Path) -> Result<TraceFile> {
    let (comments, body) = split_comments(path)?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let head = r.headers().map_err(|e| parse_err(path, e.to_string()))?.clone();
    if head.len() < 5 || (head.len() - 4) % 3 != 0 {
        return Err(parse_err(path, "unexpected header"));
    }
    let m = (head.len() - 4) / 3;
    if head.iter().ne(header(m).iter().map(String::as_str)) {
        return Err(parse_err(path, "unexpected header"));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| parse_err(path, e.to_string()))?;
        let nums = |range: std::ops::Range<usize>| -> Result<Vec<f64>> {
            range.map(|k| field(path, &rec[k], "a number")).collect()
        };
        rows.push(TraceRow {
            t: field(path, &rec[0], "a round")?,
            action: field(path, &rec[1], "an action")?,
            reward: field(path, &rec[2], "a reward")?,
            costs: nums(3..3 + m)?,
            lambda: nums(3 + m..3 + 2 * m)?,
            remaining: nums(3 + 2 * m..3 + 3 * m)?,
            void_forced: field(path, &rec[3 + 3 * m], "a flag")?,
        });
    }
    let tau = comment(&comments, "tau").ok_or_else(|| parse_err(path, "missing `# tau=`"))?;
    let total = comment(&comments, "total_reward").ok_or_else(|| parse_err(path, "missing `# total_reward=`"))?;
    Ok(TraceFile {
        commitment: comment(&comments, "commitment").map(str::to_string),
        rows,
        tau: field(path, tau, "tau")?,
        total_reward: field(path, total, "total_reward")?,
    })
}

/// Per-round `(v_t, λ_t, m_t)` from a continuous auction run, with the
/// tree parameters needed to replay it.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionStream {
    pub tree: TreeConfig,
    pub rounds: Vec<(f64, f64, f64)>,
}

pub fn write_auction_csv(stream: &AuctionStream, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let c = &stream.tree;
    writeln!(out, "# horizon={}", c.horizon).map_err(io)?;
    writeln!(out, "# levels={}", c.levels).map_err(io)?;
    writeln!(out, "# bid_step={}", c.bid_step).map_err(io)?;
    writeln!(out, "# rho={}", c.rho).map_err(io)?;
    writeln!(out, "# node_cap={}", c.node_cap).map_err(io)?;
    writeln!(out, "# rate={}", rate_name(c.rate)).map_err(io)?;
    writeln!(out, "t,valuation,lambda,competing_bid").map_err(io)?;
    for (t, (v, l, m)) in stream.rounds.iter().enumerate() {
        writeln!(out, "{},{v},{l},{m}", t + 1).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_auction_csv(path: &Path) -> Result<AuctionStream> {
    let (comments, body) = split_comments(path)?;
    let get = |k: &str| comment(&comments, k).ok_or_else(|| parse_err(path, format!("missing `# {k}=`")));
    let rate: RateRule =
        parse_rate(get("rate")?).ok_or_else(|| parse_err(path, "rate must be `gap` or `gap_eps`"))?;
    let tree = TreeConfig {
        horizon: field(path, get("horizon")?, "horizon")?,
        levels: field(path, get("levels")?, "levels")?,
        bid_step: field(path, get("bid_step")?, "bid_step")?,
        rho: field(path, get("rho")?, "rho")?,
        node_cap: field(path, get("node_cap")?, "node_cap")?,
        rate,
    };
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let head = r.headers().map_err(|e| parse_err(path, e.to_string()))?.clone();
    if head.iter().ne(["t", "valuation", "lambda", "competing_bid"]) {
        return Err(parse_err(path, "unexpected header"));
    }
    let mut rounds = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| parse_err(path, e.to_string()))?;
        rounds.push((
            field(path, &rec[1], "a valuation")?,
            field(path, &rec[2], "a multiplier")?,
            field(path, &rec[3], "a competing bid")?,
        ));
    }
    Ok(AuctionStream { tree, rounds })
}
