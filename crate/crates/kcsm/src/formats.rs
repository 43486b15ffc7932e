//! On-disk formats: replayable event logs, generator dumps, result CSV and
//! the JSON summary.

use std::io::{self, BufRead, Write};
use std::path::Path;

use kcsm_core::constraints::ConstraintModel;
use kcsm_core::dynamics::{Event, EventKind, Frame, RingOutcome};
use kcsm_core::exact::GeneratorRecord;
use kcsm_core::lattice::{Boundary, Site, SpinConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ModelSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("replay diverged at event {index}: {message}")]
    Replay { index: usize, message: String },
}

/// Git-style content hash: SHA-256 of `blob <len>\0<content>`.
pub fn content_hash(content: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content.as_bytes());
    format!("{:x}", h.finalize())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogHeader {
    pub model: ConstraintModel,
    pub q: f64,
    pub frame: Frame,
    /// Initial configuration (periodic).
    pub initial: SpinConfig,
}

fn occupancy_string(c: &SpinConfig) -> String {
    (0..c.len()).map(|i| if c.occupied(i) { '1' } else { '0' }).collect()
}

/// Text event log: a header, then one event per line,
/// `t R site mark outcome` or `t T axis step jumped`.
pub fn write_event_log<W: Write>(w: &mut W, header: &LogHeader, events: &[Event]) -> io::Result<()> {
    writeln!(w, "# kcsm event log v{SCHEMA_VERSION}")?;
    writeln!(w, "model {}", ModelSpec(header.model))?;
    writeln!(w, "q {:?}", header.q)?;
    let frame = match header.frame {
        Frame::Lab => "lab",
        Frame::Tracer => "tracer",
    };
    writeln!(w, "frame {frame}")?;
    let dims: Vec<String> = header.initial.dims().iter().map(|d| d.to_string()).collect();
    writeln!(w, "dims {}", dims.join(" "))?;
    writeln!(w, "initial {}", occupancy_string(&header.initial))?;
    for e in events {
        match e.kind {
            EventKind::Ring {
                site,
                mark_empty,
                outcome,
            } => {
                let o = match outcome {
                    RingOutcome::Rejected => "rejected",
                    RingOutcome::Empty => "empty",
                    RingOutcome::Occupied => "occupied",
                };
                writeln!(w, "{:?} R {site} {} {o}", e.time, if mark_empty { 0 } else { 1 })?;
            }
            EventKind::Tracer { axis, step, jumped } => {
                writeln!(w, "{:?} T {axis} {step} {}", e.time, jumped as u8)?;
            }
        }
    }
    Ok(())
}

pub fn read_event_log<R: BufRead>(r: R) -> Result<(LogHeader, Vec<Event>), FormatError> {
    let mut model = None;
    let mut q = None;
    let mut frame = None;
    let mut dims: Option<Vec<usize>> = None;
    let mut initial = None;
    let mut events = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let ln = n + 1;
        let err = |message: String| FormatError::Syntax { line: ln, message };
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        match head {
            "model" => model = Some(rest.join(" ").parse::<ModelSpec>().map_err(err)?.0),
            "q" => q = Some(rest.first().and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| err("bad q".into()))?),
            "frame" => {
                frame = Some(match rest.first().copied() {
                    Some("lab") => Frame::Lab,
                    Some("tracer") => Frame::Tracer,
                    other => return Err(err(format!("unknown frame {other:?}"))),
                })
            }
            "dims" => {
                dims = Some(
                    rest.iter()
                        .map(|s| s.parse::<usize>())
                        .collect::<Result<_, _>>()
                        .map_err(|e| err(e.to_string()))?,
                )
            }
            "initial" => {
                let d = dims.as_ref().ok_or_else(|| err("initial before dims".into()))?;
                let occ: Vec<u8> = rest.first().copied().unwrap_or_default().bytes().map(|b| (b == b'1') as u8).collect();
                initial = Some(SpinConfig::from_occupancy(d, Boundary::Periodic, &occ).map_err(|e| err(e.to_string()))?);
            }
            t => {
                let time: f64 = t.parse().map_err(|_| err(format!("unexpected `{t}`")))?;
                let num = |k: usize| -> Result<i64, FormatError> {
                    rest.get(k)
                        .and_then(|s| s.parse::<i64>().ok())
                        .ok_or_else(|| err(format!("missing field {k}")))
                };
                let kind = match rest.first().copied() {
                    Some("R") => EventKind::Ring {
                        site: num(1)? as usize,
                        mark_empty: num(2)? == 0,
                        outcome: match rest.get(3).copied() {
                            Some("rejected") => RingOutcome::Rejected,
                            Some("empty") => RingOutcome::Empty,
                            Some("occupied") => RingOutcome::Occupied,
                            o => return Err(err(format!("unknown outcome {o:?}"))),
                        },
                    },
                    Some("T") => EventKind::Tracer {
                        axis: num(1)? as usize,
                        step: num(2)? as i8,
                        jumped: num(3)? == 1,
                    },
                    o => return Err(err(format!("unknown event {o:?}"))),
                };
                events.push(Event { time, kind });
            }
        }
    }
    let missing = |what: &str| FormatError::Syntax {
        line: 0,
        message: format!("header lacks {what}"),
    };
    Ok((
        LogHeader {
            model: model.ok_or_else(|| missing("model"))?,
            q: q.ok_or_else(|| missing("q"))?,
            frame: frame.ok_or_else(|| missing("frame"))?,
            initial: initial.ok_or_else(|| missing("initial"))?,
        },
        events,
    ))
}

/// Re-execute a log from its initial configuration, checking every
/// recorded outcome. Returns the final configuration in the log's frame
/// and the tracer displacement.
pub fn replay(header: &LogHeader, events: &[Event]) -> Result<(SpinConfig, Vec<i64>), FormatError> {
    let mut c = header.initial.clone();
    let d = c.dim();
    let mut x = vec![0i64; d];
    let mut at = 0usize;
    for (index, e) in events.iter().enumerate() {
        let fail = |message: String| FormatError::Replay { index, message };
        match e.kind {
            EventKind::Ring {
                site,
                mark_empty,
                outcome,
            } => {
                let local = match header.frame {
                    Frame::Lab => site,
                    Frame::Tracer => {
                        let neg: Vec<i64> = c.coords_of(at).0.iter().map(|v| -v).collect();
                        c.offset_index(site, &neg).ok_or_else(|| fail("site outside lattice".into()))?
                    }
                };
                let ok = header
                    .model
                    .constraint(&c, &c.coords_of(local))
                    .map_err(|er| fail(er.to_string()))?
                    == 1;
                let got = match (ok, mark_empty) {
                    (false, _) => RingOutcome::Rejected,
                    (true, true) => RingOutcome::Empty,
                    (true, false) => RingOutcome::Occupied,
                };
                if got != outcome {
                    return Err(fail(format!("expected {outcome:?}, replay gives {got:?}")));
                }
                if ok {
                    c.set(local, !mark_empty);
                }
            }
            EventKind::Tracer { axis, step, jumped } => {
                let here = if header.frame == Frame::Lab { at } else { 0 };
                let there = c.step_index(here, axis, step as i64).ok_or_else(|| fail("bad axis".into()))?;
                let can = c.vacant(here) && c.vacant(there);
                if can != jumped {
                    return Err(fail(format!("jump recorded as {jumped}, replay gives {can}")));
                }
                if can {
                    x[axis] += step as i64;
                    at = c.step_index(at, axis, step as i64).expect("periodic");
                    if header.frame == Frame::Tracer {
                        let mut y = vec![0i64; d];
                        y[axis] = step as i64;
                        c = c.shift(&Site(y)).map_err(|er| fail(er.to_string()))?;
                    }
                }
            }
        }
    }
    Ok((c, x))
}

/// Write `states.tsv` (index, packed configuration, weight) and
/// `generator.tsv` (row, column, rate) for an assembled generator.
pub fn write_generator(dir: &Path, g: &GeneratorRecord) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut s = io::BufWriter::new(std::fs::File::create(dir.join("states.tsv"))?);
    writeln!(
        s,
        "# model={} q={:?} dims={:?} boundary={:?} kind={:?}",
        ModelSpec(g.model),
        g.q,
        g.dims,
        g.boundary,
        g.kind
    )?;
    writeln!(s, "index\tconfiguration\tweight")?;
    for (i, (&bits, &w)) in g.states.iter().zip(&g.weights).enumerate() {
        writeln!(s, "{i}\t{bits:0width$b}\t{w:?}", width = g.sites())?;
    }
    s.flush()?;
    let mut m = io::BufWriter::new(std::fs::File::create(dir.join("generator.tsv"))?);
    writeln!(m, "row\tcol\trate")?;
    for i in 0..g.len() {
        for (j, r) in g.row(i) {
            writeln!(m, "{i}\t{j}\t{r:?}")?;
        }
    }
    m.flush()
}

/// Parse `generator.tsv` back into triplets.
pub fn read_generator_triplets<R: BufRead>(r: R) -> Result<Vec<(usize, usize, f64)>, FormatError> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate().skip(1) {
        let line = line?;
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || FormatError::Syntax {
            line: n + 1,
            message: format!("expected row, col, rate in `{line}`"),
        };
        if f.len() != 3 {
            return Err(bad());
        }
        out.push((
            f[0].parse().map_err(|_| bad())?,
            f[1].parse().map_err(|_| bad())?,
            f[2].parse().map_err(|_| bad())?,
        ));
    }
    Ok(out)
}

/// One measurement. `param` carries the secondary coordinate (a length, a
/// time) when the quantity has one.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub experiment: String,
    pub model: String,
    pub q: Option<f64>,
    pub param: Option<f64>,
    pub quantity: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pass: Option<bool>,
}

pub fn write_csv<W: Write>(w: W, rows: &[ResultRow]) -> Result<(), FormatError> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(r: R) -> Result<Vec<ResultRow>, FormatError> {
    let mut rd = csv::Reader::from_reader(r);
    Ok(rd.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: String,
    pub model: String,
    pub seed: u64,
    pub config_sha256: String,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    pub estimates: serde_json::Value,
}

pub fn write_summary<W: Write>(w: W, s: &Summary) -> Result<(), FormatError> {
    serde_json::to_writer_pretty(w, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use kcsm_core::dynamics::{simulate_joint, simulate_seen_from_tracer, Seed};
    use kcsm_core::exact::{build_generator, GeneratorKind};
    use kcsm_core::lattice::Params;
    use kcsm_core::rng::stream_rng;

    #[test]
    fn hash_matches_git_blob_layout() {
        assert_eq!(content_hash(""), "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813");
        assert_eq!(content_hash("hello"), "8aec4e4876f854f688d0ebfc8f37598f38e5fd6903cccc850ca36591175aeb60");
    }

    fn roundtrip(frame: Frame) {
        let p = Params::new(0.4).unwrap();
        let model = ConstraintModel::fa1f();
        let c0 = SpinConfig::sample(&p, &[40], Boundary::Periodic, &mut stream_rng(1, 2)).unwrap();
        let mut events = Vec::new();
        let seed = Seed { root: 3, stream: 4 };
        let sink = |e: &Event| events.push(*e);
        let (traj, fin) = match frame {
            Frame::Lab => simulate_joint(model, p, c0.clone(), 30.0, 1.0, seed, sink),
            Frame::Tracer => simulate_seen_from_tracer(model, p, c0.clone(), 30.0, 1.0, seed, sink),
        }
        .unwrap();
        let header = LogHeader {
            model,
            q: 0.4,
            frame,
            initial: c0,
        };
        let mut buf = Vec::new();
        write_event_log(&mut buf, &header, &events).unwrap();
        let (h2, ev2) = read_event_log(&buf[..]).unwrap();
        assert_eq!(h2, header);
        assert_eq!(ev2, events);
        let (c, x) = replay(&h2, &ev2).unwrap();
        assert_eq!(c, fin);
        assert_eq!(x, traj.final_displacement());
    }

    #[test]
    fn event_log_round_trip_and_replay() {
        roundtrip(Frame::Lab);
        roundtrip(Frame::Tracer);
    }

    #[test]
    fn tampered_log_fails_replay() {
        let p = Params::new(0.5).unwrap();
        let c0 = SpinConfig::sample(&p, &[20], Boundary::Periodic, &mut stream_rng(5, 0)).unwrap();
        let mut events = Vec::new();
        simulate_joint(ConstraintModel::fa1f(), p, c0.clone(), 10.0, 1.0, Seed { root: 1, stream: 1 }, |e| {
            events.push(*e)
        })
        .unwrap();
        let k = events.iter().position(|e| matches!(e.kind, EventKind::Ring { outcome: RingOutcome::Empty, .. })).unwrap();
        if let EventKind::Ring { site, mark_empty, .. } = events[k].kind {
            events[k].kind = EventKind::Ring {
                site,
                mark_empty,
                outcome: RingOutcome::Rejected,
            };
        }
        let h = LogHeader {
            model: ConstraintModel::fa1f(),
            q: 0.5,
            frame: Frame::Lab,
            initial: c0,
        };
        assert!(matches!(replay(&h, &events), Err(FormatError::Replay { index, .. }) if index == k));
    }

    #[test]
    fn generator_dump() {
        let g = build_generator(
            ConstraintModel::East,
            Params::new(0.3).unwrap(),
            &[4],
            Boundary::FrozenEmpty,
            GeneratorKind::Environment,
            1 << 10,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_generator(dir.path(), &g).unwrap();
        let f = std::fs::File::open(dir.path().join("generator.tsv")).unwrap();
        let t = read_generator_triplets(io::BufReader::new(f)).unwrap();
        assert_eq!(t.len(), g.nnz());
        for (i, j, r) in t {
            assert_eq!(g.rate(i, j), r);
        }
        let states = std::fs::read_to_string(dir.path().join("states.tsv")).unwrap();
        assert_eq!(states.lines().count(), g.len() + 2);
    }

    #[test]
    fn csv_round_trip_keeps_schema_column() {
        let rows = vec![ResultRow {
            schema_version: SCHEMA_VERSION,
            experiment: "DScaling".into(),
            model: "fa1f".into(),
            q: Some(0.2),
            quantity: "D".into(),
            value: 0.01,
            stderr: Some(0.001),
            ..Default::default()
        }];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("schema_version,"));
        assert_eq!(read_csv(&buf[..]).unwrap(), rows);
    }
}
