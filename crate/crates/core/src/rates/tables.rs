//! Reproduction of the published rate tables.
//!
//! [`emit_tables`] recomputes every row from the rate formulas; [`published`]
//! holds the values as printed so the two can be diffed.

use serde::{Deserialize, Serialize};

use super::{
    k_star_profile, k_star_smooth, kernel_rates, profile_rate_sequence, smooth_rate_sequence,
    KernelRateInputs, SmoothMode,
};
use crate::error::Result;
use crate::rational::{q, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: String,
    pub psi: Rational,
    pub exponents: Vec<Rational>,
    pub k_star: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateTable {
    pub id: u8,
    pub title: String,
    /// `r` for profile tables, `g` for the smooth table.
    pub rate_symbol: String,
    pub rate: Rational,
    pub rows: Vec<TableRow>,
}

pub const CSV_HEADER: [&str; 7] = [
    "model",
    "psi",
    "k",
    "exponent",
    "exponent_num",
    "exponent_den",
    "k_star",
];

impl RateTable {
    /// One line per `(row, k)`, rationals as `num/den`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for row in &self.rows {
            for (i, e) in row.exponents.iter().enumerate() {
                w.write_record([
                    row.model.clone(),
                    row.psi.to_string(),
                    (i + 1).to_string(),
                    e.to_string(),
                    e.numer().to_string(),
                    e.denom().to_string(),
                    row.k_star.to_string(),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| crate::Error::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn profile_row(model: &str, psi: Rational, r: &Rational) -> Result<TableRow> {
    let k_star = k_star_profile(&psi, r)?;
    // Printed until the cap r + 1/4 is reached.
    let cap = r + &q(1, 4);
    let mut len = 1;
    loop {
        let s = profile_rate_sequence(&psi, r, len)?;
        if s.last() == Some(&cap) {
            return Ok(TableRow {
                model: model.to_string(),
                psi,
                exponents: s,
                k_star,
            });
        }
        len += 1;
    }
}

fn smooth_row(model: &str, psi: Rational, g: &Rational, mode: SmoothMode) -> Result<TableRow> {
    let k_star = k_star_smooth(&psi, g, mode)?;
    Ok(TableRow {
        model: model.to_string(),
        exponents: smooth_rate_sequence(&psi, g, mode, k_star)?,
        psi,
        k_star,
    })
}

/// The bandwidth setting behind the smooth table: `b_n ≍ n^{-1/5}`, `q = 28`, `ε = 1/600`.
pub fn table3_kernel_inputs() -> KernelRateInputs {
    KernelRateInputs {
        alpha: q(1, 5),
        q: 28,
        epsilon: q(1, 600),
    }
}

/// Recomputes all three tables from the rate formulas.
pub fn emit_tables() -> Result<Vec<RateTable>> {
    let psis = [q(1, 2), q(1, 3), q(1, 4)];
    let r1 = q(1, 3);
    let r2 = q(1, 2);
    let (g, _) = kernel_rates(&table3_kernel_inputs())?;

    let t1 = RateTable {
        id: 1,
        title: "Cox model under current status data".into(),
        rate_symbol: "r".into(),
        rate: r1.clone(),
        rows: psis
            .iter()
            .map(|p| profile_row("cox", p.clone(), &r1))
            .collect::<Result<_>>()?,
    };
    let t2 = RateTable {
        id: 2,
        title: "Semiparametric mixture model in case-control studies".into(),
        rate_symbol: "r".into(),
        rate: r2.clone(),
        rows: psis
            .iter()
            .map(|p| profile_row("mixture", p.clone(), &r2))
            .collect::<Result<_>>()?,
    };
    let mut rows = Vec::new();
    for (model, mode) in [("cem-I", SmoothMode::Analytic), ("cem-II", SmoothMode::FiniteDiff)] {
        for p in &psis {
            rows.push(smooth_row(model, p.clone(), &g, mode)?);
        }
    }
    let t3 = RateTable {
        id: 3,
        title: "Conditional normal (exponential) model".into(),
        rate_symbol: "g".into(),
        rate: g,
        rows,
    };
    Ok(vec![t1, t2, t3])
}

fn row(model: &str, psi: Rational, exps: &[(i64, i64)], k_star: u32) -> TableRow {
    TableRow {
        model: model.into(),
        psi,
        exponents: exps.iter().map(|&(a, b)| q(a, b)).collect(),
        k_star,
    }
}

/// The tables exactly as printed (the second `r_1` in the `psi = 1/3`,
/// Construction II cell is `r_2`).
pub fn published() -> Vec<RateTable> {
    vec![
        RateTable {
            id: 1,
            title: "Cox model under current status data".into(),
            rate_symbol: "r".into(),
            rate: q(1, 3),
            rows: vec![
                row("cox", q(1, 2), &[(7, 12)], 1),
                row("cox", q(1, 3), &[(1, 2), (7, 12)], 2),
                row("cox", q(1, 4), &[(3, 8), (25, 48), (7, 12)], 2),
            ],
        },
        RateTable {
            id: 2,
            title: "Semiparametric mixture model in case-control studies".into(),
            rate_symbol: "r".into(),
            rate: q(1, 2),
            rows: vec![
                row("mixture", q(1, 2), &[(3, 4)], 1),
                row("mixture", q(1, 3), &[(1, 2), (3, 4)], 2),
                row("mixture", q(1, 4), &[(3, 8), (9, 16), (3, 4)], 2),
            ],
        },
        RateTable {
            id: 3,
            title: "Conditional normal (exponential) model".into(),
            rate_symbol: "g".into(),
            rate: q(151, 600),
            rows: vec![
                row("cem-I", q(1, 2), &[(1, 1)], 1),
                row("cem-I", q(1, 3), &[(2, 3)], 1),
                row("cem-I", q(1, 4), &[(1, 2), (1, 1)], 2),
                row("cem-II", q(1, 2), &[(451, 600)], 1),
                row("cem-II", q(1, 3), &[(251, 600), (353, 600)], 2),
                row(
                    "cem-II",
                    q(1, 4),
                    &[
                        (151, 600),
                        (153, 600),
                        (157, 600),
                        (165, 600),
                        (181, 600),
                        (213, 600),
                        (277, 600),
                        (405, 600),
                    ],
                    8,
                ),
            ],
        },
    ]
}

/// Human-readable differences between computed and published tables; empty on a match.
pub fn diff_tables(computed: &[RateTable], expected: &[RateTable]) -> Vec<String> {
    let mut out = Vec::new();
    if computed.len() != expected.len() {
        out.push(format!("table count {} != {}", computed.len(), expected.len()));
    }
    for (c, e) in computed.iter().zip(expected) {
        if c.rate != e.rate {
            out.push(format!("table {}: {} = {} expected {}", e.id, e.rate_symbol, c.rate, e.rate));
        }
        if c.rows.len() != e.rows.len() {
            out.push(format!("table {}: {} rows expected {}", e.id, c.rows.len(), e.rows.len()));
        }
        for (cr, er) in c.rows.iter().zip(&e.rows) {
            if cr != er {
                out.push(format!(
                    "table {} {} psi={}: got {:?} k*={} expected {:?} k*={}",
                    e.id, er.model, er.psi, cr.exponents, cr.k_star, er.exponents, er.k_star
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn computed_tables_equal_published() {
        let computed = emit_tables().unwrap();
        let d = diff_tables(&computed, &published());
        assert!(d.is_empty(), "{d:#?}");
    }

    #[test]
    fn csv_row_layout() {
        let t = &emit_tables().unwrap()[0];
        let csv = t.to_csv().unwrap();
        assert!(csv.starts_with("model,psi,k,exponent,exponent_num,exponent_den,k_star\n"));
        assert!(csv.contains("\ncox,1/4,2,25/48,25,48,2\n"), "{csv}");
    }

    #[test]
    fn diff_reports_mismatch() {
        let mut bad = published();
        bad[2].rows[5].k_star = 7;
        assert_eq!(diff_tables(&bad, &published()).len(), 1);
    }
}
