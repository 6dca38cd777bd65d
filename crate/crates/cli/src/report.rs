use std::fmt::Write as _;

use nvx::train::{Approach, Architecture, MetricsReport};

/// Published averages for one subject, shown next to our numbers for display only.
#[derive(Debug, Clone, PartialEq)]
pub struct PaperReference {
    pub name: &'static str,
    /// `(feature set, reference method, 1st approach, 2nd approach)`.
    pub rows: &'static [(u8, Option<f64>, f64, f64)],
}

const REFERENCES: [PaperReference; 5] = [
    PaperReference {
        name: "subject1",
        rows: &[(1, Some(0.433), 0.443, 0.45), (2, Some(0.435), 0.325, 0.329), (3, Some(0.435), 0.45, 0.46)],
    },
    PaperReference {
        name: "subject2",
        rows: &[(1, Some(0.856), 0.672, 0.70), (2, Some(0.847), 0.80, 0.80), (3, Some(0.841), 0.647, 0.64)],
    },
    PaperReference {
        name: "subject3",
        rows: &[(1, Some(0.647), 1.07, 1.071), (2, Some(0.650), 0.934, 1.09), (3, Some(0.645), 0.96, 0.967)],
    },
    PaperReference {
        name: "subject4",
        rows: &[(1, Some(1.733), 1.48, 1.7), (2, Some(1.736), 1.46, 1.65), (3, Some(1.741), 2.07, 2.07)],
    },
    PaperReference { name: "subject1-mfcc128", rows: &[(1, None, 1.211, 1.14)] },
];

pub fn paper_reference(name: &str) -> Option<&'static PaperReference> {
    REFERENCES.iter().find(|r| r.name == name)
}

pub fn paper_reference_names() -> Vec<&'static str> {
    REFERENCES.iter().map(|r| r.name).collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

fn find(reports: &[MetricsReport], set: u8, approach: Approach, arch: Architecture) -> Option<&MetricsReport> {
    reports.iter().find(|r| r.config.feature_set == set && r.config.approach == approach && r.config.architecture == arch)
}

/// Text table with one row per feature set. The floor is the mean-predictor
/// MCD of the first report for that set. A baseline column appears when any
/// report used the recurrent baseline.
pub fn render_table(reports: &[MetricsReport], reference: Option<&PaperReference>) -> String {
    let mut sets: Vec<u8> = reports.iter().map(|r| r.config.feature_set).collect();
    sets.sort_unstable();
    sets.dedup();
    let with_baseline = reports.iter().any(|r| r.config.architecture == Architecture::Baseline);

    let mut header = vec!["EEG Feature Set", "Average MCD (mean-predictor floor)", "Average MCD 1st Approach", "Average MCD 2nd Approach"];
    if with_baseline {
        header.push("Average MCD Baseline (no attention)");
    }
    if reference.is_some() {
        header.extend(["Ref [1] (published)", "1st Approach (published)", "2nd Approach (published)"]);
    }

    let mut rows = Vec::new();
    for &set in &sets {
        let floor = reports.iter().find(|r| r.config.feature_set == set).map(|r| r.baseline_mean_predictor_mcd);
        let mut row = vec![
            format!("Set {set}"),
            cell(floor),
            cell(find(reports, set, Approach::Direct, Architecture::Attention).map(|r| r.average_mcd)),
            cell(find(reports, set, Approach::TwoStep, Architecture::Attention).map(|r| r.average_mcd)),
        ];
        if with_baseline {
            row.push(cell(find(reports, set, Approach::Direct, Architecture::Baseline).map(|r| r.average_mcd)));
        }
        if let Some(reference) = reference {
            match reference.rows.iter().find(|r| r.0 == set) {
                Some(&(_, r, first, second)) => row.extend([cell(r), cell(Some(first)), cell(Some(second))]),
                None => row.extend(["-".to_string(), "-".to_string(), "-".to_string()]),
            }
        }
        rows.push(row);
    }

    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).chain([header[c].chars().count()]).max().unwrap_or(0))
        .collect();
    let rule: String = widths.iter().map(|w| format!("+{}", "-".repeat(w + 2))).collect::<String>() + "+\n";
    let line = |cells: &[String]| -> String {
        let mut s = String::new();
        for (c, w) in cells.iter().zip(&widths) {
            let _ = write!(s, "| {c:<w$} ");
        }
        s + "|\n"
    };

    let mut out = rule.clone();
    out += &line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    out += &rule;
    for row in &rows {
        out += &line(row);
    }
    out += &rule;
    if let Some(reference) = reference {
        let _ = writeln!(out, "published columns: {} (display only)", reference.name);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nvx::train::{TrainConfig, UtteranceScore};

    fn report(set: u8, approach: Approach, arch: Architecture, avg: f64) -> MetricsReport {
        let config = TrainConfig { feature_set: set, approach, architecture: arch, ..TrainConfig::default() };
        MetricsReport {
            config,
            per_utterance: vec![UtteranceScore { id: "u".into(), mcd: avg }],
            average_mcd: avg,
            baseline_mean_predictor_mcd: 9.0,
        }
    }

    #[test]
    fn subject1_reference_column() {
        let r = paper_reference("subject1").unwrap();
        let refs: Vec<f64> = r.rows.iter().map(|row| row.1.unwrap()).collect();
        assert_eq!(refs, vec![0.433, 0.435, 0.435]);
        let table = render_table(&[report(1, Approach::Direct, Architecture::Attention, 1.0)], Some(r));
        assert!(table.contains("0.433"));
        assert!(table.contains("Ref [1] (published)"));
    }

    #[test]
    fn mfcc128_reference_has_two_approaches() {
        let r = paper_reference("subject1-mfcc128").unwrap();
        assert_eq!(r.rows, &[(1, None, 1.211, 1.14)]);
        let table = render_table(&[report(1, Approach::TwoStep, Architecture::Attention, 2.0)], Some(r));
        assert!(table.contains("1.211") && table.contains("1.140"));
    }

    #[test]
    fn unknown_reference_is_none() {
        assert!(paper_reference("subject9").is_none());
        assert_eq!(paper_reference_names().len(), 5);
    }

    #[test]
    fn table_places_cells_by_approach() {
        let reports = [
            report(2, Approach::Direct, Architecture::Attention, 1.25),
            report(2, Approach::TwoStep, Architecture::Attention, 2.5),
            report(2, Approach::Direct, Architecture::Baseline, 3.75),
        ];
        let table = render_table(&reports, None);
        let row = table.lines().find(|l| l.contains("Set 2")).unwrap();
        let cells: Vec<&str> = row.split('|').map(str::trim).filter(|c| !c.is_empty()).collect();
        assert_eq!(cells, vec!["Set 2", "9.000", "1.250", "2.500", "3.750"]);
    }

    #[test]
    fn missing_cells_render_as_dash() {
        let table = render_table(&[report(3, Approach::Direct, Architecture::Attention, 0.0)], None);
        let row = table.lines().find(|l| l.contains("Set 3")).unwrap();
        assert!(row.contains("0.000") && row.contains(" - "));
    }
}
