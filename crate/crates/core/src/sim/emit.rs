use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::episode::{Event, TraceRecord};
use super::montecarlo::RunSummary;
use super::planner::Plan;
use super::SimError;
use crate::json17::{self, fmt_f64};
use crate::risk_q::write_qtable;

pub const TRACE_HEADER: &str = "t,X,Y,Psi,alpha_T,Psi_dot,delta,plan_id,delta_flag,labels";
pub const EVENTS_HEADER: &str = "t,label,row,col,step,detail";

/// Field names of every object in `summary.json`.
pub const SUMMARY_FIELDS: [&str; 16] = [
    "alpha",
    "runs",
    "seeds",
    "t",
    "y_mean",
    "y_q10",
    "y_q90",
    "y_variance",
    "aggregate_y_variance",
    "collision_count",
    "safety_violations",
    "replan_count",
    "plan_count",
    "saturation_events",
    "episode_wall_time",
    "episodes",
];

fn io_err(path: &Path, e: std::io::Error) -> SimError {
    SimError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), SimError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Trace rows; labels of one tick are joined with `;`.
pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(trace.len() * 200);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        let s = &r.state;
        let labels: Vec<&str> = r.labels.iter().map(|l| l.as_str()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.t),
            fmt_f64(s.x),
            fmt_f64(s.y),
            fmt_f64(s.psi),
            fmt_f64(s.alpha_t),
            fmt_f64(s.psi_dot),
            fmt_f64(r.delta),
            r.plan_id,
            r.delta_flag.symbol(),
            labels.join(";"),
        );
    }
    out
}

/// Event rows; absent witnesses leave their columns empty.
pub fn events_csv(events: &[Event]) -> String {
    let mut out = String::new();
    out.push_str(EVENTS_HEADER);
    out.push('\n');
    for e in events {
        let (row, col) = e.cell.map_or((String::new(), String::new()), |c| (c.row.to_string(), c.col.to_string()));
        let step = e.step.map_or(String::new(), |s| s.to_string());
        let detail = e.detail.replace([',', '\n'], " ");
        let _ = writeln!(out, "{},{},{row},{col},{step},{detail}", fmt_f64(e.t), e.label);
    }
    out
}

/// Per-episode facts appended to a summary.
#[derive(Debug, Clone, Serialize)]
pub struct EpisodeInfo {
    pub seed: u64,
    pub steps: usize,
    pub violation: Option<String>,
    pub replans: usize,
    pub plans: usize,
    pub rpl_times: Vec<f64>,
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    #[serde(flatten)]
    summary: &'a RunSummary,
    episodes: &'a [EpisodeInfo],
}

fn summary_value<'a>(summary: &'a RunSummary, episodes: &'a [EpisodeInfo]) -> SummaryDoc<'a> {
    SummaryDoc { summary, episodes }
}

fn to_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<String, SimError> {
    json17::to_string_pretty(value).map_err(|e| SimError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Writes `plans/NNN/qtable.json` for every plan; returns the paths.
pub fn write_plans(dir: &Path, plans: &[Plan]) -> Result<Vec<PathBuf>, SimError> {
    let mut paths = Vec::with_capacity(plans.len());
    for p in plans {
        let pdir = dir.join("plans").join(format!("{:03}", p.id));
        fs::create_dir_all(&pdir).map_err(|e| io_err(&pdir, e))?;
        let path = pdir.join("qtable.json");
        write_qtable(&path, &p.qtable)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Output of a single simulated episode.
pub fn write_episode(
    dir: &Path,
    trace: &[TraceRecord],
    events: &[Event],
    plans: &[Plan],
    summary: &RunSummary,
    info: &EpisodeInfo,
) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_file(&dir.join("trace.csv"), &trace_csv(trace))?;
    write_file(&dir.join("events.csv"), &events_csv(events))?;
    let path = dir.join("summary.json");
    let doc = summary_value(summary, std::slice::from_ref(info));
    write_file(&path, &to_json(&doc, &path)?)?;
    write_plans(dir, plans)?;
    Ok(())
}

/// `summary.json` holding one object per α.
pub fn write_batch(dir: &Path, batches: &[(RunSummary, Vec<EpisodeInfo>)]) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let docs: Vec<SummaryDoc<'_>> = batches.iter().map(|(s, e)| summary_value(s, e)).collect();
    let path = dir.join("summary.json");
    write_file(&path, &to_json(&docs, &path)?)
}

/// Facts about `ep` for the summary file.
pub fn episode_info(ep: &super::episode::Episode) -> EpisodeInfo {
    use crate::fcu::Label;
    EpisodeInfo {
        seed: ep.seed,
        steps: ep.trace.len(),
        violation: ep.violation.as_ref().map(|v| format!("{v:?}")),
        replans: ep.count(Label::Rpl),
        plans: ep.plans.len(),
        rpl_times: ep.events.iter().filter(|e| e.label == Label::Rpl).map(|e| e.t).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk_q::read_qtable;
    use crate::sim::{run_episode, summarize, Scenario, ScenarioConfig};

    #[test]
    fn episode_files_round_trip() {
        let mut cfg = ScenarioConfig::highway_overtake();
        cfg.sampling.per_policy = 300;
        cfg.duration = 1.0;
        let sc = Scenario::new(cfg).unwrap();
        let ep = run_episode(&sc, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let summary = summarize(ep.alpha, std::slice::from_ref(&ep));
        write_episode(dir.path(), &ep.trace, &ep.events, &ep.plans, &summary, &episode_info(&ep)).unwrap();

        let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
        let mut lines = trace.lines();
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        assert_eq!(lines.count(), 1001);
        let first: Vec<&str> = trace.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(first.len(), 10);
        assert_eq!(first[9], "env;pl");
        assert_eq!(first[2].parse::<f64>().unwrap(), 1.0);

        for p in &ep.plans {
            let path = dir.path().join("plans").join(format!("{:03}", p.id)).join("qtable.json");
            let back = read_qtable(&path).unwrap().to_qtable().unwrap();
            let orig = p.qtable.to_qtable().unwrap();
            assert!(back.values().iter().zip(orig.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }

        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        let obj = json.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(|k| k.as_str()).collect();
        keys.sort_unstable();
        let mut want = SUMMARY_FIELDS.to_vec();
        want.sort_unstable();
        assert_eq!(keys, want);
    }

    #[test]
    fn csv_floats_keep_seventeen_digits() {
        let text = fmt_f64(0.1 + 0.2);
        assert_eq!(text.parse::<f64>().unwrap(), 0.1 + 0.2);
        let mantissa = text.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17);
    }

    #[test]
    fn unwritable_directory_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        match write_batch(&blocker.join("sub"), &[]) {
            Err(SimError::Io { path, .. }) => assert!(path.contains("file")),
            other => panic!("{other:?}"),
        }
    }
}
