use super::{classify, AttributeProfile, InfoClass, ProfileRect, Verdict};
use serde::Serialize;
use std::fmt::Write;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableCell {
    pub controller: InfoClass,
    pub adversary: InfoClass,
    pub verdict: Verdict,
    pub citations: Vec<String>,
}

/// One 3x3 table: rows are controller information, columns adversary information.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationTable {
    pub number: u8,
    pub title: &'static str,
    pub rectangularity: ProfileRect,
    pub controller_convex: bool,
    pub adversary_convex: bool,
    pub cells: Vec<Vec<TableCell>>,
}

const LAYOUT: [(u8, &str, ProfileRect, bool, bool); 4] = [
    (1, "SA-rectangular adversary", ProfileRect::Sa, false, false),
    (2, "S-rectangular, convex controller versus convex adversary", ProfileRect::S, true, true),
    (3, "S-rectangular, convex controller versus nonconvex adversary", ProfileRect::S, true, false),
    (4, "S-rectangular, nonconvex (e.g. deterministic) controller", ProfileRect::S, false, false),
];

/// All 36 verdicts of the classification map.
pub fn classification_tables() -> Vec<ClassificationTable> {
    LAYOUT
        .iter()
        .map(|&(number, title, rectangularity, controller_convex, adversary_convex)| {
            let cells = InfoClass::ALL
                .iter()
                .map(|&controller_info| {
                    InfoClass::ALL
                        .iter()
                        .map(|&adversary_info| {
                            let report = classify(&AttributeProfile {
                                controller_info,
                                adversary_info,
                                rectangularity,
                                controller_convex,
                                adversary_convex,
                            });
                            TableCell {
                                controller: controller_info,
                                adversary: adversary_info,
                                verdict: report.verdict,
                                citations: report.citations,
                            }
                        })
                        .collect()
                })
                .collect();
            ClassificationTable { number, title, rectangularity, controller_convex, adversary_convex, cells }
        })
        .collect()
}

pub fn render_tables_text(tables: &[ClassificationTable]) -> String {
    let mut out = String::new();
    let width = 12;
    for t in tables {
        let _ = writeln!(out, "Table {}: {}", t.number, t.title);
        let _ = write!(out, "{:<width$}", "ctrl \\ adv");
        for a in InfoClass::ALL {
            let _ = write!(out, "{:<width$}", a.label());
        }
        out.push('\n');
        for row in &t.cells {
            let _ = write!(out, "{:<width$}", row[0].controller.label());
            for cell in row {
                let _ = write!(out, "{:<width$}", cell.verdict.to_string());
            }
            out.truncate(out.trim_end().len());
            out.push('\n');
        }
        for row in &t.cells {
            for cell in row {
                let _ = writeln!(out, "  {}: {} [{}]", cell.citations[0], cell.verdict, cell.citations[1..].join("; "));
            }
        }
        out.push('\n');
    }
    let holds = tables.iter().flat_map(|t| t.cells.iter().flatten()).filter(|c| c.verdict == Verdict::Holds).count();
    let fails = tables.iter().flat_map(|t| t.cells.iter().flatten()).filter(|c| c.verdict == Verdict::Fails).count();
    let _ = writeln!(out, "HOLDS: {holds}  FAILS: {fails}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let t = classification_tables();
        let all: Vec<_> = t.iter().flat_map(|t| t.cells.iter().flatten()).collect();
        assert_eq!(all.len(), 36);
        assert_eq!(all.iter().filter(|c| c.verdict == Verdict::Fails).count(), 5);
        assert!(all.iter().all(|c| c.verdict != Verdict::Unknown));
    }

    #[test]
    fn anchors() {
        let t = classification_tables();
        assert_eq!(t[0].cells[2][0].verdict, Verdict::Holds);
        assert_eq!(t[2].cells[0][2].verdict, Verdict::Fails);
        assert_eq!(t[2].cells[0][1].verdict, Verdict::Holds);
        assert_eq!(t[3].cells[1][1].verdict, Verdict::Holds);
        assert_eq!(t[3].cells[0][1].verdict, Verdict::Fails);
    }
}
