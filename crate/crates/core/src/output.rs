//! CSV, JSON and SVG renderings of run artefacts.

use std::fmt::Write as _;

use serde::Serialize;

use crate::encoding::Genotype;
use crate::metrics::{FrontSnapshot, HvRow};
use crate::run::HvSummary;
use crate::variation::Individual;

pub const GENERATION_HEADER: &str =
    "generation,task,genotype,error,params_raw,params_norm,f_aux,rank,crowding";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per living individual.
pub fn generation_csv(generation: usize, population: &[Individual]) -> String {
    let mut s = String::with_capacity(64 * (population.len() + 1));
    s.push_str(GENERATION_HEADER);
    s.push('\n');
    for ind in population {
        let o = ind.objectives;
        let _ = writeln!(
            s,
            "{generation},{},{},{},{},{},{},{},{}",
            ind.task,
            ind.genotype,
            opt(o.map(|o| o.error)),
            opt(o.map(|o| o.params_raw)),
            opt(o.map(|o| o.params_norm)),
            opt(o.map(|o| o.f_aux)),
            opt(ind.rank),
            opt(ind.crowding),
        );
    }
    s
}

#[derive(Serialize)]
struct ArchitectureRecord<'a> {
    task: usize,
    genotype: &'a Genotype,
    compact: String,
    error: f64,
    params: u64,
}

pub fn individuals_json(individuals: &[Individual]) -> String {
    let records: Vec<ArchitectureRecord> = individuals
        .iter()
        .filter_map(|i| {
            i.objectives.map(|o| ArchitectureRecord {
                task: i.task,
                genotype: &i.genotype,
                compact: i.genotype.to_string(),
                error: o.error,
                params: o.params_raw,
            })
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("records serialise")
}

pub fn hv_csv(rows: &[HvRow]) -> String {
    let mut s = String::from("task,run,seed,HV\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.task, r.run, r.seed, r.hv);
    }
    s
}

pub fn summary_csv(rows: &[HvSummary]) -> String {
    let mut s = String::from("task,variant,mean,std,runs\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.task, r.variant, r.mean, r.std, r.runs
        );
    }
    s
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Scatter of (params, error), one colour per snapshot generation.
pub fn scatter_svg(title: &str, snapshots: &[&FrontSnapshot]) -> String {
    let (w, h) = (640.0, 480.0);
    let (left, right, top, bottom) = (70.0, 130.0, 40.0, 50.0);
    let pts = || {
        snapshots.iter().flat_map(|s| {
            s.params_raw
                .iter()
                .zip(&s.points)
                .map(|(&p, e)| (p as f64, e[0]))
        })
    };
    let x_max = pts().map(|p| p.0).fold(0.0, f64::max).max(1.0);
    let y_max = pts().map(|p| p.1).fold(0.0, f64::max).max(1e-3);
    let y_min = pts().map(|p| p.1).fold(y_max, f64::min).min(y_max - 1e-3);
    let sx = |x: f64| left + x / x_max * (w - left - right);
    let sy = |y: f64| top + (y_max - y) / (y_max - y_min) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        (w - right + left) / 2.0,
        escape(title)
    );
    let (x0, y0, x1, y1) = (left, h - bottom, w - right, top);
    let _ = writeln!(
        s,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#
    );
    for k in 0..=4 {
        let fx = k as f64 / 4.0;
        let xv = fx * x_max;
        let yv = y_min + fx * (y_max - y_min);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{:.0}</text>"#,
            sx(xv),
            y0 + 16.0,
            xv
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{:.3}</text>"#,
            x0 - 6.0,
            sy(yv) + 4.0,
            yv
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">parameters</text>"#,
        (x0 + x1) / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">validation error</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    for (k, snap) in snapshots.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        for (&p, e) in snap.params_raw.iter().zip(&snap.points) {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}" fill-opacity="0.7"/>"#,
                sx(p as f64),
                sy(e[0])
            );
        }
        let ly = top + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{ly}" r="4" fill="{colour}"/><text x="{}" y="{}" font-family="sans-serif" font-size="12">gen {}</text>"#,
            w - right + 20.0,
            w - right + 30.0,
            ly + 4.0,
            snap.generation
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
