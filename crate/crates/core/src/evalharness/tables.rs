//! Plain-text tables for harness output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BTRatings, Dimension, GroundTruth, Metrics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearRow {
    /// `None` for the total row.
    pub year: Option<i32>,
    pub count: usize,
    pub count_pct: f64,
    pub novel: usize,
    pub novel_pct: f64,
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Per-year counts and novel rates, years ascending, then a total row.
/// Records without a year are only counted in the total.
pub fn distribution(truth: &[GroundTruth]) -> Vec<YearRow> {
    let mut years: BTreeMap<i32, (usize, usize)> = BTreeMap::new();
    for gt in truth {
        if let Some(y) = gt.year {
            let e = years.entry(y).or_default();
            e.0 += 1;
            e.1 += usize::from(gt.label.is_novel());
        }
    }
    let total = truth.len();
    let novel = truth.iter().filter(|g| g.label.is_novel()).count();
    years
        .into_iter()
        .map(|(y, (c, n))| YearRow {
            year: Some(y),
            count: c,
            count_pct: pct(c, total),
            novel: n,
            novel_pct: pct(n, c),
        })
        .chain(std::iter::once(YearRow {
            year: None,
            count: total,
            count_pct: pct(total, total),
            novel,
            novel_pct: pct(novel, total),
        }))
        .collect()
}

fn render(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let width: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .chain(std::iter::once(header[c].chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = width[c])
                } else {
                    format!("{s:>w$}", w = width[c])
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = vec![line(header)];
    out.push(width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.extend(rows.iter().map(|r| line(r)));
    out.join("\n") + "\n"
}

/// Year | Count | Count % | Novel | Novel %.
pub fn format_distribution(rows: &[YearRow]) -> String {
    let header = ["Year", "Count", "Count %", "Novel", "Novel %"].map(String::from);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.year.map_or("Total".into(), |y| y.to_string()),
                r.count.to_string(),
                format!("{:.1}%", r.count_pct),
                r.novel.to_string(),
                format!("{:.1}%", r.novel_pct),
            ]
        })
        .collect();
    render(&header, &body)
}

/// Variant | Precision | Recall | F1 | Accuracy, four decimals.
pub fn format_metrics(rows: &[(String, Metrics)]) -> String {
    let header = ["Variant", "Precision", "Recall", "F1", "Accuracy"].map(String::from);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, m)| {
            vec![
                name.clone(),
                format!("{:.4}", m.precision),
                format!("{:.4}", m.recall),
                format!("{:.4}", m.f1),
                format!("{:.4}", m.accuracy),
            ]
        })
        .collect();
    render(&header, &body)
}

/// System rows, one column per dimension, display ratings rounded.
pub fn format_ratings(ratings: &BTRatings) -> String {
    let dims: Vec<Dimension> = ratings.dimensions.keys().copied().collect();
    let mut systems: Vec<&String> = ratings.dimensions.values().flat_map(|m| m.keys()).collect();
    systems.sort();
    systems.dedup();
    let header: Vec<String> = std::iter::once("System".to_string())
        .chain(dims.iter().map(|d| d.as_str().to_string()))
        .collect();
    let body: Vec<Vec<String>> = systems
        .iter()
        .map(|s| {
            std::iter::once((*s).clone())
                .chain(dims.iter().map(|d| {
                    ratings.dimensions[d]
                        .get(*s)
                        .map_or("-".into(), |r| format!("{:.0}", r.display_rating))
                }))
                .collect()
        })
        .collect();
    render(&header, &body)
}
