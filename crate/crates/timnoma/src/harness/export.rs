//! Result persistence: a long-form CSV with every measured quantity plus
//! per-figure plot-data files, and the inverse parser.
//!
//! `results.csv` is long-form (`snr_db,user,metric,value`, one row per
//! metric); aggregate metrics leave the user column empty. Run metadata goes
//! to `run.toml`. Floats use Rust's shortest round-trippable formatting with
//! a '.' decimal separator, rows are newline-terminated, and
//! `import_results(export_results(table)) == table` exactly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::{ResultTable, SnrRow, TableMeta, UserRow};

/// Figures with a data-file layout: 3 through 12.
pub const FIGURE_RANGE: std::ops::RangeInclusive<u8> = 3..=12;

const RESULTS_FILE: &str = "results.csv";
const META_FILE: &str = "run.toml";
const LONG_HEADER: &str = "snr_db,user,metric,value";

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Write `results.csv`, `run.toml` and every figure data file the table has
/// the legs for. Returns the paths written.
pub fn export_results(table: &ResultTable, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let meta_path = dir.join(META_FILE);
    let meta_text =
        toml::to_string(&table.meta).map_err(|e| Error::Parse(format!("meta encode: {e}")))?;
    fs::write(&meta_path, meta_text)?;
    written.push(meta_path);

    let results_path = dir.join(RESULTS_FILE);
    let mut out = std::io::BufWriter::new(fs::File::create(&results_path)?);
    writeln!(out, "{LONG_HEADER}")?;
    for row in &table.user_rows {
        let user = row.user + 1;
        writeln!(out, "{},{},bits,{}", fmt(row.snr_db), user, row.bits)?;
        let metrics: [(&str, Option<f64>); 6] = [
            ("ber_hybrid", row.ber_hybrid),
            ("ber_tdma", row.ber_tdma),
            ("rate_hybrid", row.rate_hybrid),
            ("rate_hybrid_ci95", row.rate_hybrid_ci95),
            ("rate_tdma", row.rate_tdma),
            ("rate_tdma_ci95", row.rate_tdma_ci95),
        ];
        for (name, value) in metrics {
            if let Some(v) = value {
                writeln!(out, "{},{},{},{}", fmt(row.snr_db), user, name, fmt(v))?;
            }
        }
    }
    for row in &table.snr_rows {
        let metrics: [(&str, Option<f64>); 8] = [
            ("sum_rate_hybrid", row.sum_rate_hybrid),
            ("sum_rate_hybrid_ci95", row.sum_rate_hybrid_ci95),
            ("sum_rate_tdma", row.sum_rate_tdma),
            ("tdma_average_rate", row.tdma_average_rate),
            ("tdma_average_rate_ci95", row.tdma_average_rate_ci95),
            ("ratio", row.ratio),
            ("network_ber_hybrid", row.network_ber_hybrid),
            ("network_ber_tdma", row.network_ber_tdma),
        ];
        for (name, value) in metrics {
            if let Some(v) = value {
                writeln!(out, "{},,{},{}", fmt(row.snr_db), name, fmt(v))?;
            }
        }
    }
    out.flush()?;
    written.push(results_path);

    for figure in FIGURE_RANGE {
        match report_figure(table, figure) {
            Ok((name, content)) => {
                let path = dir.join(name);
                fs::write(&path, content)?;
                written.push(path);
            }
            Err(e) => log::debug!("skipping figure {figure}: {e}"),
        }
    }
    Ok(written)
}

/// Read a directory written by [`export_results`] back into a table.
pub fn import_results(dir: &Path) -> Result<ResultTable> {
    let meta_text = fs::read_to_string(dir.join(META_FILE))?;
    let meta: TableMeta =
        toml::from_str(&meta_text).map_err(|e| Error::Parse(format!("meta decode: {e}")))?;

    let csv = fs::read_to_string(dir.join(RESULTS_FILE))?;
    let mut lines = csv.lines();
    match lines.next() {
        Some(h) if h == LONG_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "unexpected results.csv header {other:?}"
            )))
        }
    }

    let mut user_rows: Vec<UserRow> = Vec::new();
    let mut snr_rows: Vec<SnrRow> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(4, ',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "line {}: expected 4 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let snr_db: f64 = fields[0]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad snr {:?}", lineno + 2, fields[0])))?;
        let metric = fields[2];
        let value = fields[3];

        if fields[1].is_empty() {
            let row = match snr_rows.iter_mut().find(|r| r.snr_db == snr_db) {
                Some(r) => r,
                None => {
                    snr_rows.push(SnrRow {
                        snr_db,
                        sum_rate_hybrid: None,
                        sum_rate_hybrid_ci95: None,
                        sum_rate_tdma: None,
                        tdma_average_rate: None,
                        tdma_average_rate_ci95: None,
                        ratio: None,
                        network_ber_hybrid: None,
                        network_ber_tdma: None,
                    });
                    snr_rows.last_mut().unwrap()
                }
            };
            let v: f64 = value
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad value {value:?}", lineno + 2)))?;
            match metric {
                "sum_rate_hybrid" => row.sum_rate_hybrid = Some(v),
                "sum_rate_hybrid_ci95" => row.sum_rate_hybrid_ci95 = Some(v),
                "sum_rate_tdma" => row.sum_rate_tdma = Some(v),
                "tdma_average_rate" => row.tdma_average_rate = Some(v),
                "tdma_average_rate_ci95" => row.tdma_average_rate_ci95 = Some(v),
                "ratio" => row.ratio = Some(v),
                "network_ber_hybrid" => row.network_ber_hybrid = Some(v),
                "network_ber_tdma" => row.network_ber_tdma = Some(v),
                other => {
                    return Err(Error::Parse(format!(
                        "line {}: unknown aggregate metric {other:?}",
                        lineno + 2
                    )))
                }
            }
        } else {
            let user: usize = fields[1].parse().map_err(|_| {
                Error::Parse(format!("line {}: bad user {:?}", lineno + 2, fields[1]))
            })?;
            if user == 0 {
                return Err(Error::Parse(format!(
                    "line {}: user ids are 1-based",
                    lineno + 2
                )));
            }
            let user = user - 1;
            let row = match user_rows
                .iter_mut()
                .find(|r| r.snr_db == snr_db && r.user == user)
            {
                Some(r) => r,
                None => {
                    user_rows.push(UserRow {
                        snr_db,
                        user,
                        bits: 0,
                        ber_hybrid: None,
                        ber_tdma: None,
                        rate_hybrid: None,
                        rate_hybrid_ci95: None,
                        rate_tdma: None,
                        rate_tdma_ci95: None,
                    });
                    user_rows.last_mut().unwrap()
                }
            };
            match metric {
                "bits" => {
                    row.bits = value.parse().map_err(|_| {
                        Error::Parse(format!("line {}: bad bits {value:?}", lineno + 2))
                    })?
                }
                _ => {
                    let v: f64 = value.parse().map_err(|_| {
                        Error::Parse(format!("line {}: bad value {value:?}", lineno + 2))
                    })?;
                    match metric {
                        "ber_hybrid" => row.ber_hybrid = Some(v),
                        "ber_tdma" => row.ber_tdma = Some(v),
                        "rate_hybrid" => row.rate_hybrid = Some(v),
                        "rate_hybrid_ci95" => row.rate_hybrid_ci95 = Some(v),
                        "rate_tdma" => row.rate_tdma = Some(v),
                        "rate_tdma_ci95" => row.rate_tdma_ci95 = Some(v),
                        other => {
                            return Err(Error::Parse(format!(
                                "line {}: unknown user metric {other:?}",
                                lineno + 2
                            )))
                        }
                    }
                }
            }
        }
    }

    Ok(ResultTable {
        meta,
        user_rows,
        snr_rows,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn require(
    table: &ResultTable,
    figure: u8,
    siso: bool,
    hybrid: bool,
    tdma: bool,
) -> Result<()> {
    if table.meta.siso != siso {
        let (want, have) = if siso {
            ("single-antenna", "multi-antenna")
        } else {
            ("multi-antenna", "single-antenna")
        };
        return Err(Error::Config(format!(
            "figure {figure} is drawn from a {want} run, but {:?} is {have}",
            table.meta.scenario
        )));
    }
    if hybrid && !table.meta.legs.hybrid {
        return Err(Error::Config(format!(
            "figure {figure} needs the hybrid leg, which this run skipped"
        )));
    }
    if tdma && !table.meta.legs.tdma {
        return Err(Error::Config(format!(
            "figure {figure} needs the tdma leg, which this run skipped"
        )));
    }
    Ok(())
}

/// Users sorted nearest-first by the recorded distances, ties by id.
fn users_by_distance(meta: &TableMeta) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..meta.users).collect();
    ids.sort_by(|&a, &b| {
        meta.distances_km[a]
            .partial_cmp(&meta.distances_km[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    ids
}

/// Build one figure's plot-data CSV. Returns `(file name, content)`.
///
/// Figure coverage: 3/4 per-user BER and BER-vs-TDMA of the multi-antenna
/// cell; 5/6 the same for the single-antenna cell (6 compares the nearest
/// and farthest users); 7/8 per-user and sum rates; 9/10 hybrid sum rate
/// against the TDMA average; 11/12 the sum-rate ratio.
pub fn report_figure(table: &ResultTable, figure: u8) -> Result<(String, String)> {
    if !FIGURE_RANGE.contains(&figure) {
        return Err(Error::Config(format!(
            "figure {figure} is out of range; data files exist for figures 3-12"
        )));
    }
    let users = table.meta.users;
    let mut out = String::new();
    match figure {
        3 | 5 => {
            require(table, figure, figure == 5, true, false)?;
            out.push_str("snr_db");
            if figure == 5 {
                out.push_str(",ber_network");
            }
            for u in 0..users {
                out.push_str(&format!(",ber_user{}", u + 1));
            }
            out.push('\n');
            for snr_row in &table.snr_rows {
                out.push_str(&fmt(snr_row.snr_db));
                if figure == 5 {
                    out.push(',');
                    out.push_str(&opt(snr_row.network_ber_hybrid));
                }
                for u in 0..users {
                    out.push(',');
                    out.push_str(&opt(
                        table.user_row(snr_row.snr_db, u).and_then(|r| r.ber_hybrid),
                    ));
                }
                out.push('\n');
            }
        }
        4 => {
            require(table, figure, false, true, true)?;
            out.push_str("snr_db");
            for u in 0..users {
                out.push_str(&format!(",ber_hybrid_user{}", u + 1));
            }
            for u in 0..users {
                out.push_str(&format!(",ber_tdma_user{}", u + 1));
            }
            out.push('\n');
            for snr_row in &table.snr_rows {
                out.push_str(&fmt(snr_row.snr_db));
                for u in 0..users {
                    out.push(',');
                    out.push_str(&opt(
                        table.user_row(snr_row.snr_db, u).and_then(|r| r.ber_hybrid),
                    ));
                }
                for u in 0..users {
                    out.push(',');
                    out.push_str(&opt(
                        table.user_row(snr_row.snr_db, u).and_then(|r| r.ber_tdma),
                    ));
                }
                out.push('\n');
            }
        }
        6 => {
            require(table, figure, true, true, true)?;
            let order = users_by_distance(&table.meta);
            let near = order[0];
            let far = *order.last().unwrap();
            out.push_str(&format!(
                "snr_db,ber_hybrid_user{0},ber_tdma_user{0},ber_hybrid_user{1},ber_tdma_user{1}\n",
                near + 1,
                far + 1
            ));
            for snr_row in &table.snr_rows {
                let n = table.user_row(snr_row.snr_db, near);
                let f = table.user_row(snr_row.snr_db, far);
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt(snr_row.snr_db),
                    opt(n.and_then(|r| r.ber_hybrid)),
                    opt(n.and_then(|r| r.ber_tdma)),
                    opt(f.and_then(|r| r.ber_hybrid)),
                    opt(f.and_then(|r| r.ber_tdma)),
                ));
            }
        }
        7 | 8 => {
            require(table, figure, figure == 8, true, false)?;
            out.push_str("snr_db,sum_rate");
            for u in 0..users {
                out.push_str(&format!(",rate_user{}", u + 1));
            }
            out.push('\n');
            for snr_row in &table.snr_rows {
                out.push_str(&fmt(snr_row.snr_db));
                out.push(',');
                out.push_str(&opt(snr_row.sum_rate_hybrid));
                for u in 0..users {
                    out.push(',');
                    out.push_str(&opt(
                        table.user_row(snr_row.snr_db, u).and_then(|r| r.rate_hybrid),
                    ));
                }
                out.push('\n');
            }
        }
        9 | 10 => {
            require(table, figure, figure == 10, true, true)?;
            out.push_str("snr_db,sum_rate_hybrid,tdma_average_rate\n");
            for snr_row in &table.snr_rows {
                out.push_str(&format!(
                    "{},{},{}\n",
                    fmt(snr_row.snr_db),
                    opt(snr_row.sum_rate_hybrid),
                    opt(snr_row.tdma_average_rate),
                ));
            }
        }
        11 | 12 => {
            require(table, figure, figure == 12, true, true)?;
            out.push_str("snr_db,ratio\n");
            for snr_row in &table.snr_rows {
                out.push_str(&format!(
                    "{},{}\n",
                    fmt(snr_row.snr_db),
                    opt(snr_row.ratio)
                ));
            }
        }
        _ => unreachable!(),
    }
    Ok((format!("figure_{figure}.csv"), out))
}
