use serde::Serialize;

use super::ensemble::{ArchContrastReport, ConvergenceReport, LevelReport, SkeletonContrastReport, WeakLlnReport};
use super::suites::{BnRow, DiagnosticsReport, PocReport};
use crate::error::{Error, Result};

/// A named CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub name: String,
    pub text: String,
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Numeric(format!("CSV output: {e}"))
}

fn table(name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<CsvTable> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    Ok(CsvTable { name: name.into(), text: String::from_utf8(bytes).map_err(csv_err)? })
}

fn f(x: f64) -> String {
    format!("{x}")
}

pub trait Report: Serialize {
    fn tables(&self) -> Result<Vec<CsvTable>>;

    fn json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numeric(format!("JSON output: {e}")))
    }
}

fn cf_rows(levels: &[LevelReport], thetas: &[f64]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for l in levels {
        for (i, t) in thetas.iter().enumerate() {
            let (e, g) = (l.empirical_cf[i], l.target_cf[i]);
            rows.push(vec![l.n.to_string(), f(*t), f(e.re), f(e.im), f(g.re), f(g.im), f((e - g).norm())]);
        }
    }
    rows
}

const CF_HEADER: [&str; 7] = ["n", "theta", "empirical_re", "empirical_im", "target_re", "target_im", "abs_diff"];

impl Report for ConvergenceReport {
    fn tables(&self) -> Result<Vec<CsvTable>> {
        Ok(vec![table("cf", &CF_HEADER, cf_rows(&self.levels, &self.thetas))?])
    }
}

impl Report for WeakLlnReport {
    fn tables(&self) -> Result<Vec<CsvTable>> {
        let rows = self
            .levels
            .iter()
            .map(|l| vec![l.n.to_string(), f(l.b_n), f(l.percentile), f(l.band_lo), f(l.band_hi)])
            .collect();
        Ok(vec![table("weak_lln", &["n", "b_n", "percentile", "band_lo", "band_hi"], rows)?])
    }
}

impl Report for SkeletonContrastReport {
    fn tables(&self) -> Result<Vec<CsvTable>> {
        let full = self.full.iter().map(|l| vec![l.n.to_string(), f(l.b_n), f(l.median_abs), f(l.p95_abs)]).collect();
        Ok(vec![
            table("cf", &CF_HEADER, cf_rows(&self.skeleton, &self.thetas))?,
            table("full", &["n", "b_n", "median_abs", "p95_abs"], full)?,
        ])
    }
}

impl Report for ArchContrastReport {
    fn tables(&self) -> Result<Vec<CsvTable>> {
        let mut rows = Vec::new();
        for l in &self.levels {
            for (i, t) in self.thetas.iter().enumerate() {
                let (e, u, s) = (l.empirical_cf[i], l.unit_cf[i], l.tau_cf[i]);
                rows.push(vec![l.n.to_string(), f(*t), f(e.re), f(e.im), f(u.re), f(u.im), f(s.re), f(s.im)]);
            }
        }
        let header = ["n", "theta", "empirical_re", "empirical_im", "unit_re", "unit_im", "tau_re", "tau_im"];
        Ok(vec![table("cf", &header, rows)?])
    }
}

impl Report for PocReport {
    fn tables(&self) -> Result<Vec<CsvTable>> {
        let mut rows = Vec::new();
        for l in &self.run.levels {
            for (i, t) in self.run.thetas.iter().enumerate() {
                let (p, g, m) = (l.mean_phi[i], l.target_phi[i], l.mean_product[i]);
                rows.push(vec![
                    l.n.to_string(),
                    f(l.b),
                    f(*t),
                    f(l.mean_condition_sum[i]),
                    f(p.re),
                    f(p.im),
                    f(g.re),
                    f(g.im),
                    f(m.re),
                    f(m.im),
                ]);
            }
        }
        let header = [
            "n",
            "b_n",
            "theta",
            "mean_condition_sum",
            "mean_phi_re",
            "mean_phi_im",
            "target_phi_re",
            "target_phi_im",
            "mean_product_re",
            "mean_product_im",
        ];
        Ok(vec![table("poc", &header, rows)?])
    }
}

impl Report for DiagnosticsReport {
    fn tables(&self) -> Result<Vec<CsvTable>> {
        let mut ui2 = Vec::new();
        for c in &self.ui2 {
            for p in &c.points {
                ui2.push(vec![f(c.gamma), p.k.to_string(), f(p.numeric), f(p.bound)]);
            }
        }
        let hyper = self
            .hyper
            .iter()
            .map(|r| vec![r.k.to_string(), f(r.closed), r.direct.map(f).unwrap_or_default()])
            .collect();
        Ok(vec![
            table("ui2", &["gamma", "k", "numeric", "bound"], ui2)?,
            table("hyper", &["k", "closed", "direct"], hyper)?,
        ])
    }
}

impl Report for Vec<BnRow> {
    fn tables(&self) -> Result<Vec<CsvTable>> {
        let rows = self.iter().map(|r| vec![r.n.to_string(), f(r.b_n), f(r.residual)]).collect();
        Ok(vec![table("bn", &["n", "b_n", "residual"], rows)?])
    }
}
