//! Comparison tables over containers and campaign reports.

use std::fmt::Write as _;
use std::fs;

use branchguard::container::Container;
use branchguard::faultsim::CampaignResult;

use crate::CliError;

enum Loaded {
    Container(Box<Container>),
    Campaign(Box<CampaignResult>),
}

fn load(path: &str) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {path}: {e}")))?;
    if let Ok(c) = Container::from_json(&text) {
        return Ok(Loaded::Container(Box::new(c)));
    }
    match serde_json::from_str::<CampaignResult>(&text) {
        Ok(r) => Ok(Loaded::Campaign(Box::new(r))),
        Err(e) => Err(CliError::usage(format!(
            "{path} is neither a container nor a campaign report: {e}"
        ))),
    }
}

pub fn build_report(files: &[String], csv: bool) -> Result<String, CliError> {
    let mut containers: Vec<(String, Box<Container>)> = Vec::new();
    let mut campaigns: Vec<(String, Box<CampaignResult>)> = Vec::new();
    for f in files {
        match load(f)? {
            Loaded::Container(c) => containers.push((f.clone(), c)),
            Loaded::Campaign(r) => campaigns.push((f.clone(), r)),
        }
    }

    let mut out = String::new();
    if !containers.is_empty() {
        let header = ["file", "pipeline", "instrs", "bytes", "cycles"];
        let rows: Vec<Vec<String>> = containers
            .iter()
            .map(|(f, c)| {
                vec![
                    f.clone(),
                    c.pipeline.clone(),
                    c.report.static_costs.total_instrs.to_string(),
                    c.report.static_costs.modeled_bytes.to_string(),
                    c.cycles_default_input
                        .map(|v| v.to_string())
                        .unwrap_or_else(|| "-".into()),
                ]
            })
            .collect();
        write_table(&mut out, &header, &rows, csv);
    }
    if !campaigns.is_empty() {
        if !out.is_empty() && !csv {
            out.push('\n');
        }
        let header = [
            "file",
            "target",
            "mode",
            "bits",
            "total",
            "detected_an",
            "detected_cfi",
            "detected_other",
            "masked",
            "sdc_control",
            "sdc_data",
            "sdc_rate",
            "ci_lo",
            "ci_hi",
            "seed",
        ];
        let rows: Vec<Vec<String>> = campaigns
            .iter()
            .map(|(f, r)| {
                vec![
                    f.clone(),
                    r.config.target.clone(),
                    r.config.mode.clone(),
                    r.config.bits.to_string(),
                    r.total.to_string(),
                    r.counts.detected_an.to_string(),
                    r.counts.detected_cfi.to_string(),
                    r.counts.detected_other.to_string(),
                    r.counts.masked.to_string(),
                    r.counts.sdc_control.to_string(),
                    r.counts.sdc_data.to_string(),
                    format!("{:e}", r.sdc_rate),
                    format!("{:e}", r.wilson_ci[0]),
                    format!("{:e}", r.wilson_ci[1]),
                    r.seed.to_string(),
                ]
            })
            .collect();
        write_table(&mut out, &header, &rows, csv);
    }
    Ok(out)
}

/// One campaign as a CSV document (header plus one row).
pub fn campaign_csv(r: &CampaignResult) -> String {
    let mut out = String::new();
    let header = [
        "target",
        "mode",
        "bits",
        "samples",
        "pairs",
        "total",
        "detected_an",
        "detected_cfi",
        "detected_other",
        "masked",
        "sdc_control",
        "sdc_data",
        "sdc_rate",
        "ci_lo",
        "ci_hi",
        "seed",
    ];
    let row = vec![
        r.config.target.clone(),
        r.config.mode.clone(),
        r.config.bits.to_string(),
        r.config.samples.to_string(),
        r.config.pairs.to_string(),
        r.total.to_string(),
        r.counts.detected_an.to_string(),
        r.counts.detected_cfi.to_string(),
        r.counts.detected_other.to_string(),
        r.counts.masked.to_string(),
        r.counts.sdc_control.to_string(),
        r.counts.sdc_data.to_string(),
        format!("{:e}", r.sdc_rate),
        format!("{:e}", r.wilson_ci[0]),
        format!("{:e}", r.wilson_ci[1]),
        r.seed.to_string(),
    ];
    write_table(&mut out, &header, &[row], true);
    out
}

fn write_table(out: &mut String, header: &[&str], rows: &[Vec<String>], csv: bool) {
    if csv {
        writeln!(out, "{}", header.join(",")).unwrap();
        for row in rows {
            writeln!(out, "{}", row.join(",")).unwrap();
        }
        return;
    }
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut line = String::new();
    for (i, h) in header.iter().enumerate() {
        write!(line, "{:<width$}  ", h, width = widths[i]).unwrap();
    }
    writeln!(out, "{}", line.trim_end()).unwrap();
    for row in rows {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            write!(line, "{:<width$}  ", cell, width = widths[i]).unwrap();
        }
        writeln!(out, "{}", line.trim_end()).unwrap();
    }
}
