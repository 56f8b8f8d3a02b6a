use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;

use objectness_core::metrics::EvalReport;
use objectness_core::retrieval::RetrievalReport;

use crate::args::DiffArgs;
use crate::error::{CliError, CliResult};
use crate::Verbosity;

/// Per-class AP gains of `other` over `base`.
pub fn diff_retrieval(base: &RetrievalReport, other: &RetrievalReport) -> String {
    let mut out = format!("# base\t{}\n# other\t{}\nclass\tbase\tother\tgain\n", base.mode.name(), other.mode.name());
    let classes: std::collections::BTreeSet<u32> = base.per_class.keys().chain(other.per_class.keys()).copied().collect();
    for c in classes {
        let cell = |r: &RetrievalReport| r.per_class.get(&c).map_or("-".to_string(), |v| format!("{v:.6}"));
        let gain = match (base.per_class.get(&c), other.per_class.get(&c)) {
            (Some(a), Some(b)) => format!("{:+.6}", b - a),
            _ => "-".into(),
        };
        let _ = writeln!(out, "{c}\t{}\t{}\t{gain}", cell(base), cell(other));
    }
    let _ = writeln!(out, "# map\t{:.6}\t{:.6}\t{:+.6}", base.map, other.map, other.map - base.map);
    out
}

/// Mean score gains of `other` over `base` on the images both scored,
/// grouped by the base report's buckets.
pub fn diff_eval(base: &EvalReport, other: &EvalReport) -> CliResult<String> {
    if base.metric != other.metric {
        return Err(CliError::usage(format!(
            "cannot compare a {} report with a {} report",
            base.metric.name(),
            other.metric.name()
        )));
    }
    let theirs: BTreeMap<&str, f64> = other.images.iter().map(|s| (s.id.as_str(), s.score)).collect();
    let mut groups: BTreeMap<String, (usize, f64, f64)> = BTreeMap::new();
    let mut unmatched = 0;
    for s in &base.images {
        let Some(&o) = theirs.get(s.id.as_str()) else {
            unmatched += 1;
            continue;
        };
        let g = groups.entry(s.bucket.clone().unwrap_or_else(|| "all".into())).or_default();
        g.0 += 1;
        g.1 += s.score;
        g.2 += o;
    }
    unmatched += other.images.len() - (base.images.len() - unmatched);
    let mut out = format!("# metric\t{}\nbucket\tcount\tbase\tother\tgain\n", base.metric.name());
    for (bucket, (n, a, b)) in &groups {
        let (a, b) = (a / *n as f64, b / *n as f64);
        let _ = writeln!(out, "{bucket}\t{n}\t{a:.6}\t{b:.6}\t{:+.6}", b - a);
    }
    let _ = writeln!(
        out,
        "# aggregate\t{:.6}\t{:.6}\t{:+.6}",
        base.aggregate,
        other.aggregate,
        other.aggregate - base.aggregate
    );
    let _ = writeln!(out, "# unmatched\t{unmatched}");
    Ok(out)
}

pub fn diff_text(base: &str, other: &str) -> CliResult<String> {
    let kind = |t: &str| t.lines().next().unwrap_or("").split('\t').next().unwrap_or("").to_string();
    match (kind(base).as_str(), kind(other).as_str()) {
        ("# metric", "# metric") => diff_eval(&EvalReport::from_text(base)?, &EvalReport::from_text(other)?),
        ("# mode", "# mode") => Ok(diff_retrieval(
            &RetrievalReport::from_text(base)?,
            &RetrievalReport::from_text(other)?,
        )),
        _ => Err(CliError::usage("reports must both be evaluation reports or both retrieval reports")),
    }
}

pub fn run(a: &DiffArgs, _v: Verbosity) -> CliResult<()> {
    let read = |p: &std::path::Path| fs::read_to_string(p).map_err(|e| CliError::io(p, e));
    let table = diff_text(&read(&a.base)?, &read(&a.other)?)?;
    match &a.out {
        Some(p) => fs::write(p, &table).map_err(|e| CliError::io(p, e))?,
        None => print!("{table}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use objectness_core::metrics::{ImageScore, Metric};

    fn report(scores: &[(&str, f64, Option<&str>)]) -> EvalReport {
        EvalReport::new(
            Metric::Jaccard,
            scores
                .iter()
                .map(|&(id, score, b)| ImageScore {
                    id: id.into(),
                    score,
                    bucket: b.map(String::from),
                })
                .collect(),
        )
    }

    #[test]
    fn eval_gains_by_bucket() {
        let base = report(&[("a", 0.5, Some("0.00-0.10")), ("b", 0.25, Some("0.00-0.10")), ("c", 0.5, Some("0.90-1.00"))]);
        let other = report(&[("a", 0.75, None), ("b", 0.5, None), ("c", 0.5, None), ("d", 1.0, None)]);
        let t = diff_text(&base.to_text(), &other.to_text()).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[2], "0.00-0.10\t2\t0.375000\t0.625000\t+0.250000");
        assert_eq!(lines[3], "0.90-1.00\t1\t0.500000\t0.500000\t+0.000000");
        assert_eq!(lines[5], "# unmatched\t1");
    }

    #[test]
    fn mixed_kinds_are_rejected() {
        let e = report(&[("a", 1.0, None)]).to_text();
        assert!(diff_text(&e, "# mode\tfull\n# map\t0.5\n").is_err());
    }
}
