//! Published per-country score tables (general, basic and applied research,
//! 28 EU members, 2008 to 2014), bundled as a golden file for report-level
//! checks and for comparing user-supplied reproductions.

use serde::Deserialize;

use crate::{Error, Result};

pub const PUBLISHED_SCORES_CSV: &str = include_str!("../data/published_scores.csv");

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PublishedScore {
    pub unit: String,
    pub country: String,
    pub year: i32,
    pub general: f64,
    pub basic: f64,
    pub applied: f64,
}

impl PublishedScore {
    pub fn model(&self, label: &str) -> Option<f64> {
        match label {
            "general" => Some(self.general),
            "basic" => Some(self.basic),
            "applied" => Some(self.applied),
            _ => None,
        }
    }
}

pub fn published_scores() -> Result<Vec<PublishedScore>> {
    let mut rdr = csv::Reader::from_reader(PUBLISHED_SCORES_CSV.as_bytes());
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::Input(format!("published scores: {e}"))))
        .collect()
}

/// Scores of `label` in `year` as `(unit, r)` pairs in table order.
pub fn published_column(label: &str, year: i32) -> Result<Vec<(String, f64)>> {
    let rows = published_scores()?;
    rows.iter()
        .filter(|r| r.year == year)
        .map(|r| {
            r.model(label)
                .map(|v| (r.unit.clone(), v))
                .ok_or_else(|| Error::Config(format!("no published table for model `{label}`")))
        })
        .collect()
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Input(format!(
            "rank correlation needs two equal samples of size >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    Ok(cov / (va * vb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_file_shape() {
        let rows = published_scores().unwrap();
        assert_eq!(rows.len(), 28 * 7);
        let cy = rows.iter().find(|r| r.unit == "CY" && r.year == 2014).unwrap();
        assert_eq!((cy.general, cy.basic, cy.applied), (1.310, 1.310, 0.411));
        let lv = rows.iter().find(|r| r.unit == "LV" && r.year == 2013).unwrap();
        assert_eq!((lv.general, lv.basic, lv.applied), (1.002, 0.348, 1.002));
        assert_eq!(published_column("applied", 2014).unwrap().len(), 28);
        assert!(published_column("other", 2014).is_err());
    }

    #[test]
    fn spearman_values() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        // Ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4).
        let rho = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((rho - 4.5 / (4.5f64 * 5.0).sqrt()).abs() < 1e-12);
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }
}
