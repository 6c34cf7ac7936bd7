use std::fmt::Write;

use super::protocol::ExperimentReport;

/// Formats a rate in [0, 1] as a percentage with two decimals, rounding
/// half away from zero on the decimal value the rate prints as.
pub fn format_percent(rate: f64) -> String {
    // Snap to 1e-6 percent first so that decimal inputs such as 0.13765
    // (stored as 0.137649999...) round the way they read.
    let micro = (rate * 1e8).round() as i64;
    let hundredths = (micro + 5_000).div_euclid(10_000);
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

/// Per-subject rows, a group average after each group and an overall average.
pub fn report_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("subject,threshold,frr,far,aer\n");
    for avg in &report.group_averages {
        for row in report.rows_in_group(&avg.group) {
            let _ = writeln!(
                out,
                "{},{:.1},{},{},{}",
                row.subject,
                row.threshold,
                format_percent(row.rates.frr()),
                format_percent(row.rates.far()),
                format_percent(row.rates.aer()),
            );
        }
        let _ = writeln!(
            out,
            "average,,{},{},{}",
            format_percent(avg.rates.frr()),
            format_percent(avg.rates.far()),
            format_percent(avg.rates.aer()),
        );
    }
    let _ = writeln!(
        out,
        "overall_average,,{},{},{}",
        format_percent(report.overall.frr()),
        format_percent(report.overall.far()),
        format_percent(report.overall.aer()),
    );
    out
}
