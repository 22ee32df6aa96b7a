//! Table, CSV and SVG rendering.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::TimingReport;
use crate::grid::{estimate_cost, GridError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Svg,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "table" => Some(ReportFormat::Table),
            "csv" => Some(ReportFormat::Csv),
            "svg" => Some(ReportFormat::Svg),
            _ => None,
        }
    }
}

/// Steps needed to cover `seconds` of physical time at step `dt`.
pub fn steps_per_task(seconds: f64, dt: f64) -> usize {
    let r = seconds / dt;
    if (r - r.round()).abs() < 1e-9 * r.max(1.0) {
        r.round() as usize
    } else {
        r.ceil() as usize
    }
}

fn grouped(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

pub const CSV_HEADER: &str = "case,nodes,controls,backend,width,avg_step_s,speedup";

pub fn report(reports: &[TimingReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => csv(reports),
        ReportFormat::Table => table(reports),
        ReportFormat::Svg => svg(reports),
    }
}

fn csv(reports: &[TimingReport]) -> String {
    let mut o = format!("{CSV_HEADER}\n");
    for r in reports {
        let _ = writeln!(
            o,
            "{},{},{},{},{},{:.6e},{:.3}",
            r.case, r.nodes, r.controls, r.backend, r.width, r.avg_step_s, r.speedup
        );
    }
    o
}

fn table(reports: &[TimingReport]) -> String {
    let mut o = format!(
        "steps per 60 s scenario at 50 us: {}\n\n",
        grouped(steps_per_task(60.0, 50e-6))
    );
    let _ = writeln!(
        o,
        "{:<22} {:>7} {:>8} {:<12} {:>6} {:>13} {:>9}  note",
        "case", "nodes", "controls", "backend", "width", "avg_step_s", "speedup"
    );
    for r in reports {
        let _ = writeln!(
            o,
            "{:<22} {:>7} {:>8} {:<12} {:>6} {:>13.6e} {:>9.3}  {}",
            r.case,
            r.nodes,
            r.controls,
            r.backend,
            r.width,
            r.avg_step_s,
            r.speedup,
            r.note.as_deref().unwrap_or("")
        );
    }
    o
}

fn svg(reports: &[TimingReport]) -> String {
    let (bar, gap, h, left, top) = (28.0, 12.0, 240.0, 60.0, 30.0);
    let width = left + reports.len() as f64 * (bar + gap) + gap;
    let max = reports.iter().map(|r| r.avg_step_s).fold(0.0, f64::max);
    let mut o = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{:.0}\" font-family=\"monospace\" font-size=\"10\">\n",
        h + top + 120.0
    );
    let _ = writeln!(o, "<text x=\"{left}\" y=\"16\">average time per step (s), max {max:.3e}</text>");
    let _ = writeln!(
        o,
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{width:.0}\" y2=\"{}\" stroke=\"black\"/>",
        top + h,
        top + h
    );
    for (i, r) in reports.iter().enumerate() {
        let x = left + gap + i as f64 * (bar + gap);
        let bh = if max > 0.0 { h * r.avg_step_s / max } else { 0.0 };
        let _ = writeln!(
            o,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{bar}\" height=\"{bh:.1}\" fill=\"#4a7ab5\"><title>{} {} x{}: {:.3e} s, speedup {:.3}</title></rect>",
            top + h - bh,
            r.case,
            r.backend,
            r.width,
            r.avg_step_s,
            r.speedup
        );
        let ly = top + h + 8.0;
        let _ = writeln!(
            o,
            "<text x=\"{:.1}\" y=\"{ly:.1}\" transform=\"rotate(60 {:.1} {ly:.1})\">{} {}</text>",
            x + 4.0,
            x + 4.0,
            r.case,
            r.backend
        );
    }
    o.push_str("</svg>\n");
    o
}

/// One rental-cost line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub device: String,
    pub price_per_week: f64,
    pub wall_hours: f64,
    pub devices: usize,
}

pub fn cost_table(rows: &[CostRow]) -> Result<String, GridError> {
    let mut o = format!("{:<18} {:>12} {:>10} {:>8} {:>10}\n", "device", "price/week", "hours", "devices", "cost");
    for r in rows {
        let c = estimate_cost(r.price_per_week, r.wall_hours, r.devices)?;
        let _ = writeln!(
            o,
            "{:<18} {:>12.2} {:>10.3} {:>8} {:>10.3}",
            r.device, r.price_per_week, r.wall_hours, r.devices, c
        );
    }
    Ok(o)
}
