//! Delimited-text writers for the summary tables. Column orders are fixed;
//! missing values are written as `NA`.

use std::io::Write;

use super::summary::{SummaryTables, TestRow};

pub const TABLE4_COLUMNS: [&str; 8] = [
    "archetype",
    "tau",
    "n",
    "dropout_rate",
    "graduation_rate",
    "active_rate",
    "normative_share",
    "mean_expiries",
];

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        x.to_string()
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), num)
}

/// Global summary as `metric,value` rows.
pub fn write_table3<W: Write>(out: W, t: &SummaryTables, analytics_seed: u64) -> csv::Result<()> {
    let g = &t.global;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "value"])?;
    let rows: Vec<(&str, String)> = vec![
        ("replications", g.replications.to_string()),
        ("agents_per_run", g.agents_per_run.to_string()),
        ("total_agents", g.total_agents.to_string()),
        ("horizon_phases", g.horizon.to_string()),
        ("dropout_rate", num(g.dropout_rate)),
        ("dropout_rate_ci_lo", opt(g.dropout_ci.map(|c| c.0))),
        ("dropout_rate_ci_hi", opt(g.dropout_ci.map(|c| c.1))),
        ("graduation_rate", num(g.graduation_rate)),
        ("active_rate", num(g.active_rate)),
        ("dropouts", g.dropouts.to_string()),
        ("normative_share", num(g.normative_share)),
        ("academic_share", num(g.academic_share)),
        ("other_share", num(g.other_share)),
        ("mean_expiries", num(g.mean_expiries)),
        ("sd_expiries", num(g.sd_expiries)),
        ("mean_expiries_dropouts", opt(g.mean_expiries_dropouts)),
        ("mean_expiries_active", opt(g.mean_expiries_active)),
        ("median_time_to_event", opt(g.median_time_to_event)),
        ("archetype_dropout_min", opt(g.archetype_dropout_range.map(|r| r.0))),
        ("archetype_dropout_max", opt(g.archetype_dropout_range.map(|r| r.1))),
        ("analytics_seed", analytics_seed.to_string()),
    ];
    for (k, v) in rows {
        w.write_record([k, v.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table4<W: Write>(out: W, t: &SummaryTables) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE4_COLUMNS)?;
    for a in &t.archetypes {
        w.write_record([
            a.archetype.clone(),
            a.tau.to_string(),
            a.n.to_string(),
            num(a.dropout_rate),
            num(a.graduation_rate),
            num(a.active_rate),
            opt(a.normative_share),
            num(a.mean_expiries),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_survival<W: Write>(out: W, t: &SummaryTables) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "at_risk", "events", "censored", "survival"])?;
    for p in &t.survival.points {
        w.write_record([
            p.time.to_string(),
            p.at_risk.to_string(),
            p.events.to_string(),
            p.censored.to_string(),
            num(p.survival),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_expiry_hist<W: Write>(out: W, t: &SummaryTables) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["expiries", "count", "share"])?;
    for b in &t.expiry_histogram {
        w.write_record([b.expiries.to_string(), b.count.to_string(), num(b.share)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_expiry_by_archetype<W: Write>(out: W, t: &SummaryTables) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["archetype", "min", "q1", "median", "q3", "max"])?;
    for b in &t.expiry_boxplots {
        w.write_record([
            b.archetype.clone(),
            num(b.min),
            num(b.q1),
            num(b.median),
            num(b.q3),
            num(b.max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: one row per archetype and variable.
pub fn write_psych_heatmap<W: Write>(out: W, t: &SummaryTables) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["archetype", "variable", "mean"])?;
    for r in &t.psych {
        for (var, v) in [
            ("pending_finals", r.pending_finals),
            ("stress", r.stress),
            ("belonging", r.belonging),
        ] {
            w.write_record([r.archetype.as_str(), var, &num(v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_tests<W: Write>(out: W, rows: &[TestRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["test", "groups", "statistic", "df", "p_value", "alpha", "significant"])?;
    for r in rows {
        w.write_record([
            r.test.clone(),
            r.groups.clone(),
            num(r.statistic),
            num(r.df),
            num(r.p_value),
            num(r.alpha),
            u8::from(r.significant).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
