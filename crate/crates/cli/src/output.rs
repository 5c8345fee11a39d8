use std::fmt::Write;

use dagrta::rta::AnalysisReport;
use dagrta::sim::SimOutcome;
use dagrta::{TaskSet, Time};
use serde_json::{json, Value};

const DECIMALS: usize = 6;

fn time_or_dash(t: Option<&Time>) -> String {
    t.map_or_else(|| "-".to_string(), Time::to_string)
}

fn decimal_or_dash(t: Option<&Time>) -> String {
    t.map_or_else(|| "-".to_string(), |t| t.to_decimal_string(DECIMALS))
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(header.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

pub fn analysis_table(report: &AnalysisReport) -> String {
    let rows: Vec<Vec<String>> = report
        .tasks
        .iter()
        .map(|t| {
            vec![
                t.task.clone(),
                time_or_dash(t.response.as_ref()),
                decimal_or_dash(t.response.as_ref()),
                t.deadline.to_string(),
                t.verdict.to_string(),
                t.iterations.len().to_string(),
            ]
        })
        .collect();
    let mut out = table(&["task", "R", "R (decimal)", "D", "verdict", "iterations"], &rows);
    let verdict = if report.schedulable { "schedulable" } else { "not schedulable" };
    let _ = writeln!(out, "task set {verdict} (method {}, m = {})", report.method, report.cores);
    out
}

pub fn analysis_json(report: &AnalysisReport) -> String {
    let tasks: Vec<Value> = report
        .tasks
        .iter()
        .map(|t| {
            json!({
                "task": t.task,
                "deadline": t.deadline,
                "r_isolated": t.r_isolated,
                "response": t.response,
                "response_decimal": t.response.as_ref().map(|r| r.to_decimal_string(DECIMALS)),
                "verdict": t.verdict,
                "termination": t.termination,
                "iterations": t.iterations,
            })
        })
        .collect();
    let value = json!({
        "method": report.method.name(),
        "cores": report.cores,
        "schedulable": report.schedulable,
        "tasks": tasks,
    });
    let mut text = serde_json::to_string_pretty(&value).expect("reports serialize");
    text.push('\n');
    text
}

pub fn simulation_summary(set: &TaskSet, outcome: &SimOutcome) -> String {
    let misses = outcome.miss_counts(set.len());
    let rows: Vec<Vec<String>> = set
        .tasks()
        .iter()
        .enumerate()
        .map(|(i, task)| {
            let completed = outcome.jobs.iter().filter(|j| j.task == i && j.completion.is_some()).count();
            let released = outcome.jobs.iter().filter(|j| j.task == i).count();
            vec![
                task.id().to_string(),
                time_or_dash(outcome.max_response[i].as_ref()),
                decimal_or_dash(outcome.max_response[i].as_ref()),
                format!("{completed}/{released}"),
                misses[i].to_string(),
            ]
        })
        .collect();
    let mut out = table(&["task", "max R", "max R (decimal)", "completed", "misses"], &rows);
    for miss in &outcome.misses {
        let id = set.task(miss.task).id();
        let _ = match &miss.completion {
            Some(done) => writeln!(out, "miss: task {id} job {} completed at {done}", miss.job),
            None => writeln!(out, "miss: task {id} job {} unfinished at horizon {}", miss.job, outcome.horizon),
        };
    }
    let _ = writeln!(out, "{} deadline misses up to {}", outcome.misses.len(), outcome.horizon);
    out
}
