//! CSV and JSON writers for grid results.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use mms_core::sim::{ExperimentReport, Stat};
use mms_core::{Mode, PricingMode};
use serde_json::{json, Value};

use crate::config;
use crate::grid::{Cell, CellResult, RunSpec};

const KEYS: [&str; 5] = ["cell", "lambda", "capacity", "sigma", "seed"];

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn keys(c: &Cell) -> Vec<String> {
    vec![c.id.to_string(), num(c.lambda), c.capacity.to_string(), num(c.sigma), c.seed.to_string()]
}

fn header<const N: usize>(extra: [&str; N]) -> Vec<String> {
    KEYS.iter().chain(extra.iter()).map(|s| s.to_string()).collect()
}

struct Table {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl Table {
    fn create(dir: &Path, name: &str, header: Vec<String>) -> anyhow::Result<Self> {
        let path = dir.join(name);
        let mut writer =
            csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        writer.write_record(&header)?;
        Ok(Self { path, writer })
    }

    fn row(&mut self, cell: &Cell, rest: impl IntoIterator<Item = String>) -> anyhow::Result<()> {
        let mut r = keys(cell);
        r.extend(rest);
        self.writer.write_record(&r)?;
        Ok(())
    }

    fn finish(mut self) -> anyhow::Result<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}

fn ok_reports(results: &[CellResult]) -> impl Iterator<Item = (&Cell, PricingMode, &ExperimentReport)> {
    results.iter().filter_map(|r| r.outcome.as_ref().ok().map(|c| (&r.cell, c))).flat_map(|(cell, c)| c.reports.iter().map(move |(m, r)| (cell, *m, r)))
}

/// Mean over the days on which the pricing mode was active (day 2 on),
/// or over all days when there is only one.
fn active_days_mean(report: &ExperimentReport, f: impl Fn(&mms_core::DayMetrics) -> f64) -> f64 {
    let active: Vec<f64> = report.days.iter().filter(|d| d.day > 1).map(&f).collect();
    if active.is_empty() {
        mms_core::sim::mean(report.days.iter().map(f))
    } else {
        mms_core::sim::mean(active)
    }
}

fn write_days(dir: &Path, results: &[CellResult]) -> anyhow::Result<PathBuf> {
    let mut h = header(["pricing", "day", "n_requests", "profit", "revenue", "operating_cost", "wt", "jt", "vtl", "gap"]);
    h.extend(Mode::ALL.map(|m| format!("share_{}", m.name())));
    h.extend(
        ["offers_r", "offers_rt", "mean_offered_price_r", "mean_offered_price_rt", "mean_paid_price", "price_above_wtp", "pricing_fallbacks", "estimation"]
            .map(String::from),
    );
    let mut t = Table::create(dir, "days.csv", h)?;
    for (cell, mode, report) in ok_reports(results) {
        for d in &report.days {
            let mut r = vec![
                mode.name().to_string(),
                d.day.to_string(),
                d.n_requests.to_string(),
                num(d.profit),
                num(d.revenue),
                num(d.operating_cost),
                num(d.wait_min),
                num(d.journey_min),
                num(d.vtl_min),
                num(d.gap),
            ];
            r.extend(d.mode_share.map(num));
            r.extend([
                d.offers[0].to_string(),
                d.offers[1].to_string(),
                num(d.mean_offered_price[0]),
                num(d.mean_offered_price[1]),
                num(d.mean_paid_price),
                d.price_above_wtp.to_string(),
                d.pricing_fallbacks.to_string(),
                d.estimation.map(|s| format!("{s:?}").to_lowercase()).unwrap_or_default(),
            ]);
            t.row(cell, r)?;
        }
    }
    t.finish()
}

fn write_prices(dir: &Path, results: &[CellResult]) -> anyhow::Result<PathBuf> {
    let h = header(["pricing", "day", "request", "option", "fare", "op_cost", "delta", "price", "cap", "wtp", "chosen"]);
    let mut t = Table::create(dir, "prices.csv", h)?;
    for (cell, mode, report) in ok_reports(results) {
        for p in &report.prices {
            t.row(
                cell,
                [
                    mode.name().to_string(),
                    p.day.to_string(),
                    p.request.to_string(),
                    p.option.name().to_string(),
                    num(p.fare),
                    num(p.op_cost),
                    num(p.delta),
                    num(p.price),
                    if p.cap.is_finite() { num(p.cap) } else { String::new() },
                    num(p.wtp),
                    u8::from(p.chosen).to_string(),
                ],
            )?;
        }
    }
    t.finish()
}

fn write_trips(dir: &Path, results: &[CellResult]) -> anyhow::Result<PathBuf> {
    let h = header([
        "pricing",
        "day",
        "request",
        "mode",
        "vehicle",
        "requested_at",
        "quoted_ovtt",
        "quoted_ivtt",
        "price",
        "op_cost",
        "wtp",
        "pickup_time",
        "dropoff_time",
        "arrival_time",
    ]);
    let mut t = Table::create(dir, "trips.csv", h)?;
    for (cell, mode, report) in ok_reports(results) {
        for (day, trip) in &report.trips {
            t.row(
                cell,
                [
                    mode.name().to_string(),
                    day.to_string(),
                    trip.request.to_string(),
                    trip.mode.name().to_string(),
                    trip.vehicle.to_string(),
                    num(trip.requested_at),
                    num(trip.quoted_ovtt),
                    num(trip.quoted_ivtt),
                    num(trip.price),
                    num(trip.op_cost),
                    num(trip.wtp),
                    opt(trip.pickup_time),
                    opt(trip.dropoff_time),
                    opt(trip.arrival_time),
                ],
            )?;
        }
    }
    t.finish()
}

fn write_observations(dir: &Path, results: &[CellResult]) -> anyhow::Result<PathBuf> {
    let mut h = header(["pricing", "day", "request", "chosen"]);
    for m in Mode::ALL {
        for f in ["available", "ovtt", "ivtt", "cost"] {
            h.push(format!("{}_{f}", m.name()));
        }
    }
    let mut t = Table::create(dir, "observations.csv", h)?;
    for (cell, mode, report) in ok_reports(results) {
        for o in &report.observations {
            let mut r = vec![mode.name().to_string(), o.day.to_string(), o.request.to_string(), o.observation.chosen.name().to_string()];
            for a in &o.observation.attributes.0 {
                if a.available {
                    r.extend(["1".to_string(), num(a.ovtt), num(a.ivtt), num(a.cost)]);
                } else {
                    r.extend(["0".to_string(), String::new(), String::new(), String::new()]);
                }
            }
            t.row(cell, r)?;
        }
    }
    t.finish()
}

fn write_events(dir: &Path, results: &[CellResult]) -> anyhow::Result<PathBuf> {
    let h = header(["pricing", "day", "time", "vehicle", "kind", "request", "x", "y", "load"]);
    let mut t = Table::create(dir, "events.csv", h)?;
    for (cell, mode, report) in ok_reports(results) {
        for (day, e) in &report.events {
            t.row(
                cell,
                [
                    mode.name().to_string(),
                    day.to_string(),
                    num(e.time),
                    e.vehicle.to_string(),
                    format!("{:?}", e.kind).to_lowercase(),
                    e.request.to_string(),
                    num(e.location.x),
                    num(e.location.y),
                    e.load.to_string(),
                ],
            )?;
        }
    }
    t.finish()
}

fn write_gap_series(dir: &Path, results: &[CellResult]) -> anyhow::Result<PathBuf> {
    let mut t = Table::create(dir, "gap_series.csv", header(["pricing", "day", "gap"]))?;
    for (cell, mode, report) in ok_reports(results) {
        let n = report.days.len();
        for (i, g) in report.gap_series.iter().enumerate() {
            let day = if i < n { (i + 1).to_string() } else { "final".to_string() };
            t.row(cell, [mode.name().to_string(), day, num(*g)])?;
        }
    }
    t.finish()
}

/// Empirical CDF of offered prices per option, over the days the pricing
/// mode was active.
fn write_price_cdf(dir: &Path, results: &[CellResult]) -> anyhow::Result<PathBuf> {
    let mut t = Table::create(dir, "price_cdf.csv", header(["pricing", "option", "price", "cdf"]))?;
    for (cell, mode, report) in ok_reports(results) {
        for option in [Mode::Rideshare, Mode::RideshareTransit] {
            let mut prices: Vec<f64> = report.prices.iter().filter(|p| p.option == option && p.day > 1).map(|p| p.price).collect();
            prices.sort_by(f64::total_cmp);
            let n = prices.len() as f64;
            for (i, p) in prices.iter().enumerate() {
                if prices.get(i + 1) == Some(p) {
                    continue;
                }
                t.row(cell, [mode.name().to_string(), option.name().to_string(), num(*p), num((i + 1) as f64 / n)])?;
            }
        }
    }
    t.finish()
}

fn stat_cols(s: &Stat) -> [String; 2] {
    [num(s.mean), num(s.std)]
}

fn write_tables(dir: &Path, spec: &RunSpec, results: &[CellResult]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();

    // Profit per pricing mode side by side, with the change against no pricing.
    let mut h = header([]);
    for m in &spec.modes {
        h.push(format!("profit_{}", m.name()));
    }
    for m in spec.modes.iter().filter(|m| **m != PricingMode::None) {
        h.push(format!("uplift_pct_{}", m.name()));
    }
    let mut t = Table::create(dir, "table_profit.csv", h)?;
    for r in results {
        let Ok(c) = &r.outcome else { continue };
        let mut row: Vec<String> = spec.modes.iter().map(|m| c.get(*m).map(|r| num(r.summary.profit.mean)).unwrap_or_default()).collect();
        for m in spec.modes.iter().filter(|m| **m != PricingMode::None) {
            row.push(opt(c.delta_percent(PricingMode::None, *m, |s| s.profit.mean)));
        }
        t.row(&r.cell, row)?;
    }
    files.push(t.finish()?);

    let mut h = header(["pricing"]);
    for m in Mode::ALL {
        h.push(format!("share_{}", m.name()));
    }
    h.push("share_operator".into());
    let mut t = Table::create(dir, "table_mode_share.csv", h)?;
    for (cell, mode, report) in ok_reports(results) {
        let s = &report.summary.mode_share;
        let mut row = vec![mode.name().to_string()];
        row.extend(s.iter().map(|x| num(x.mean)));
        row.push(num(mms_core::sim::mean(report.days.iter().map(|d| d.operator_share()))));
        t.row(cell, row)?;
    }
    files.push(t.finish()?);

    let h = header(["pricing", "profit_mean", "profit_std", "wt_mean", "wt_std", "jt_mean", "jt_std", "vtl_mean", "vtl_std", "gap_mean", "gap_std"]);
    let mut t = Table::create(dir, "table_service.csv", h)?;
    for (cell, mode, report) in ok_reports(results) {
        let s = &report.summary;
        let mut row = vec![mode.name().to_string()];
        for st in [&s.profit, &s.wait_min, &s.journey_min, &s.vtl_min, &s.gap] {
            row.extend(stat_cols(st));
        }
        t.row(cell, row)?;
    }
    files.push(t.finish()?);

    let h = header(["pricing", "profit", "mean_paid_price_active_days", "share_r", "share_rt", "share_operator"]);
    let mut t = Table::create(dir, "table_sigma.csv", h)?;
    for (cell, mode, report) in ok_reports(results) {
        let s = &report.summary;
        t.row(
            cell,
            [
                mode.name().to_string(),
                num(s.profit.mean),
                num(active_days_mean(report, |d| d.mean_paid_price)),
                num(s.mode_share[Mode::Rideshare.index()].mean),
                num(s.mode_share[Mode::RideshareTransit.index()].mean),
                num(mms_core::sim::mean(report.days.iter().map(|d| d.operator_share()))),
            ],
        )?;
    }
    files.push(t.finish()?);
    Ok(files)
}

fn stat_json(s: &Stat) -> Value {
    json!({ "mean": s.mean, "std": s.std })
}

fn report_json(report: &ExperimentReport) -> Value {
    let s = &report.summary;
    let e = &report.final_estimate;
    let shares: serde_json::Map<String, Value> = Mode::ALL.iter().map(|m| (m.name().to_string(), stat_json(&s.mode_share[m.index()]))).collect();
    json!({
        "profit": stat_json(&s.profit),
        "wt": stat_json(&s.wait_min),
        "jt": stat_json(&s.journey_min),
        "vtl": stat_json(&s.vtl_min),
        "gap": stat_json(&s.gap),
        "mean_paid_price": stat_json(&s.mean_paid_price),
        "mode_share": shares,
        "gap_series": report.gap_series,
        "final_estimate": {
            "beta_ovtt": e.beta_ovtt,
            "beta_ivtt": e.beta_ivtt,
            "beta_cost": e.beta_cost,
            "asc": e.asc,
            "mu": e.mu,
        },
        "estimation_failures": report.estimation_failures,
    })
}

fn cell_json(c: &Cell) -> Value {
    json!({ "cell": c.id, "lambda": c.lambda, "capacity": c.capacity, "sigma": c.sigma, "seed": c.seed })
}

/// Writes every artifact into `dir` and returns the index document.
pub fn write_all(dir: &Path, spec: &RunSpec, results: &[CellResult]) -> anyhow::Result<Value> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut files = vec![write_days(dir, results)?, write_prices(dir, results)?, write_trips(dir, results)?, write_observations(dir, results)?];
    if spec.emit.gap_series {
        files.push(write_gap_series(dir, results)?);
    }
    if spec.emit.price_cdf {
        files.push(write_price_cdf(dir, results)?);
    }
    if spec.emit.event_log {
        files.push(write_events(dir, results)?);
    }
    if spec.emit.tables {
        files.extend(write_tables(dir, spec, results)?);
    }

    let cells: Vec<Value> = results
        .iter()
        .map(|r| {
            let mut v = cell_json(&r.cell);
            if let Ok(c) = &r.outcome {
                let modes: serde_json::Map<String, Value> = c.reports.iter().map(|(m, rep)| (m.name().to_string(), report_json(rep))).collect();
                v["reports"] = Value::Object(modes);
            }
            v
        })
        .collect();
    let summary = json!({ "config": config::emit(&spec.base), "cells": cells });
    let summary_path = dir.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    files.push(summary_path);

    let status: Vec<Value> = results
        .iter()
        .map(|r| {
            let mut v = cell_json(&r.cell);
            match &r.outcome {
                Ok(_) => v["status"] = "ok".into(),
                Err(e) => {
                    v["status"] = "failed".into();
                    v["error"] = e.clone().into();
                }
            }
            v["elapsed_s"] = r.elapsed_s.into();
            v
        })
        .collect();
    let names: Vec<String> = files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect();
    let index = json!({
        "pricing": spec.modes.iter().map(|m| m.name()).collect::<Vec<_>>(),
        "days": spec.base.days,
        "cells": status,
        "files": names,
    });
    fs::write(dir.join("index.json"), serde_json::to_string_pretty(&index)? + "\n")?;
    Ok(index)
}
