//! Calibration and discrimination metrics over evaluated records.
//!
//! - Expected Calibration Error with equal-width bins
//! - AUROC (rank statistic, ties count one half)
//! - Accuracy
//! - Reliability-diagram bin summaries

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::CalibrationRecord;

pub const DEFAULT_BINS: usize = 10;

/// One bin of a reliability diagram. `mean_confidence` and `accuracy` are
/// `None` for empty bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_confidence: Option<f64>,
    pub accuracy: Option<f64>,
}

impl BinSummary {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// `|accuracy - mean_confidence|`, zero for empty bins.
    pub fn gap(&self) -> f64 {
        match (self.accuracy, self.mean_confidence) {
            (Some(a), Some(c)) => (a - c).abs(),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityDiagram {
    bins: Vec<BinSummary>,
    total: usize,
}

impl ReliabilityDiagram {
    pub fn bins(&self) -> &[BinSummary] {
        &self.bins
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// `sum_b (n_b / N) |acc(b) - conf(b)|`.
    pub fn ece(&self) -> f64 {
        let total = self.total as f64;
        self.bins
            .iter()
            .filter(|b| !b.is_empty())
            .map(|b| b.count as f64 / total * b.gap())
            .sum()
    }

    /// Largest per-bin gap over non-empty bins.
    pub fn max_gap(&self) -> f64 {
        self.bins.iter().map(BinSummary::gap).fold(0.0, f64::max)
    }

    /// Writes `bin_lower,bin_upper,count,mean_confidence,accuracy`, leaving
    /// the last two fields empty for empty bins.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(DIAGRAM_COLUMNS)?;
        for b in &self.bins {
            w.write_record([
                b.lower.to_string(),
                b.upper.to_string(),
                b.count.to_string(),
                b.mean_confidence.map(|v| v.to_string()).unwrap_or_default(),
                b.accuracy.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

pub const DIAGRAM_COLUMNS: [&str; 5] = ["bin_lower", "bin_upper", "count", "mean_confidence", "accuracy"];

fn bin_edge(b: usize, bins: usize) -> f64 {
    b as f64 / bins as f64
}

/// Bin holding confidence `c`: `[b/B, (b+1)/B)`, with the last bin closed
/// at one. Edges are compared as computed so bin membership agrees with the
/// reported `lower`/`upper`.
pub fn bin_index(c: f64, bins: usize) -> usize {
    let mut b = ((c * bins as f64).floor() as usize).min(bins - 1);
    if b + 1 < bins && c >= bin_edge(b + 1, bins) {
        b += 1;
    } else if b > 0 && c < bin_edge(b, bins) {
        b -= 1;
    }
    b
}

fn check_bins(bins: usize) -> Result<()> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be at least 1".into()));
    }
    Ok(())
}

pub fn reliability_diagram(records: &[CalibrationRecord], bins: usize) -> Result<ReliabilityDiagram> {
    check_bins(bins)?;
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    let mut counts = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    let mut correct = vec![0usize; bins];
    for r in records {
        let c = r.confidence();
        let b = bin_index(c, bins);
        counts[b] += 1;
        conf_sum[b] += c;
        correct[b] += usize::from(r.is_correct());
    }
    let bins = (0..bins)
        .map(|b| {
            let n = counts[b];
            let (mean_confidence, accuracy) = if n == 0 {
                (None, None)
            } else {
                (Some(conf_sum[b] / n as f64), Some(correct[b] as f64 / n as f64))
            };
            BinSummary {
                lower: bin_edge(b, bins),
                upper: bin_edge(b + 1, bins),
                count: n,
                mean_confidence,
                accuracy,
            }
        })
        .collect();
    Ok(ReliabilityDiagram {
        bins,
        total: records.len(),
    })
}

/// Expected calibration error with `bins` equal-width bins.
pub fn ece(records: &[CalibrationRecord], bins: usize) -> Result<f64> {
    Ok(reliability_diagram(records, bins)?.ece())
}

pub fn accuracy(records: &[CalibrationRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    let correct = records.iter().filter(|r| r.is_correct()).count();
    Ok(correct as f64 / records.len() as f64)
}

pub fn auroc(records: &[CalibrationRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    let scores: Vec<f64> = records.iter().map(CalibrationRecord::confidence).collect();
    let labels: Vec<bool> = records.iter().map(CalibrationRecord::is_correct).collect();
    auroc_scores(&scores, &labels)
}

/// Probability that a random positive outscores a random negative, ties
/// counted as one half (Mann-Whitney U with average ranks).
pub fn auroc_scores(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::AurocUndefined);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share their average
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let tied_positives = order[start..end].iter().filter(|&&i| labels[i]).count();
        positive_rank_sum += avg_rank * tied_positives as f64;
        start = end;
    }
    let p = positives as f64;
    let u = positive_rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Headline numbers for a record set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ece: f64,
    /// `None` when only one class is present.
    pub auroc: Option<f64>,
    pub accuracy: f64,
    pub n: usize,
}

pub fn evaluate(records: &[CalibrationRecord], bins: usize) -> Result<(MetricsReport, ReliabilityDiagram)> {
    let diagram = reliability_diagram(records, bins)?;
    let auroc = match auroc(records) {
        Ok(a) => Some(a),
        Err(Error::AurocUndefined) => None,
        Err(e) => return Err(e),
    };
    let report = MetricsReport {
        ece: diagram.ece(),
        auroc,
        accuracy: accuracy(records)?,
        n: records.len(),
    };
    Ok((report, diagram))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::CorrectnessLabel;

    fn rec(i: usize, c: f64, y: CorrectnessLabel) -> CalibrationRecord {
        CalibrationRecord::with_confidence(format!("r{i}"), c, y).unwrap()
    }

    fn records(pairs: &[(f64, bool)]) -> Vec<CalibrationRecord> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(c, y))| rec(i, c, y.into()))
            .collect()
    }

    #[test]
    fn four_record_fixture() {
        let rs = records(&[(0.95, true), (0.95, false), (0.15, false), (0.15, false)]);
        // (2/4)|0.5 - 0.95| + (2/4)|0 - 0.15|
        let e = ece(&rs, DEFAULT_BINS).unwrap();
        assert!((e - 0.3).abs() < 1e-15, "{e}");
    }

    #[test]
    fn single_calibrated_bin_has_zero_ece() {
        let rs: Vec<_> = (0..20).map(|i| rec(i, 0.85, (i < 17).into())).collect();
        assert!(ece(&rs, 10).unwrap() < 1e-15);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(ece(&[], 10), Err(Error::NoRecords)));
        assert!(matches!(accuracy(&[]), Err(Error::NoRecords)));
        assert!(matches!(reliability_diagram(&[], 10), Err(Error::NoRecords)));
        assert!(ece(&records(&[(0.5, true)]), 0).is_err());
    }

    #[test]
    fn auroc_examples() {
        let sep = records(&[(0.9, true), (0.8, true), (0.3, false), (0.1, false)]);
        assert_eq!(auroc(&sep).unwrap(), 1.0);
        let flat = records(&[(0.5, true), (0.5, false), (0.5, true), (0.5, false)]);
        assert_eq!(auroc(&flat).unwrap(), 0.5);
        let mixed = records(&[(0.9, true), (0.4, true), (0.6, false)]);
        assert_eq!(auroc(&mixed).unwrap(), 0.5);
    }

    #[test]
    fn auroc_single_class_is_undefined() {
        let rs = records(&[(0.9, true), (0.4, true)]);
        assert!(matches!(auroc(&rs), Err(Error::AurocUndefined)));
        let (report, _) = evaluate(&rs, 10).unwrap();
        assert_eq!(report.auroc, None);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&records(&[(0.1, true), (0.2, true)])).unwrap(), 1.0);
        assert_eq!(accuracy(&records(&[(0.1, false), (0.2, false)])).unwrap(), 0.0);
        let rs = records(&[(0.1, true), (0.2, true), (0.3, true), (0.4, false)]);
        assert_eq!(accuracy(&rs).unwrap(), 0.75);
    }

    #[test]
    fn bin_edges_are_left_inclusive() {
        let d = reliability_diagram(&records(&[(0.5, true)]), 10).unwrap();
        let b = &d.bins()[5];
        assert_eq!((b.lower, b.upper, b.count), (0.5, 0.6, 1));
        assert_eq!(b.accuracy, Some(1.0));
        assert!(d.bins()[4].is_empty());

        let d = reliability_diagram(&records(&[(1.0, true), (0.0, false)]), 10).unwrap();
        assert_eq!(d.bins()[9].count, 1);
        assert_eq!(d.bins()[0].count, 1);
    }

    #[test]
    fn grid_values_land_in_their_own_bin() {
        for bins in [3, 7, 10, 20] {
            for b in 0..bins {
                let c = b as f64 / bins as f64;
                assert_eq!(bin_index(c, bins), b, "c={c} bins={bins}");
                let d = reliability_diagram(&records(&[(c, true)]), bins).unwrap();
                let bin = &d.bins()[b];
                assert!(bin.lower <= c && c < bin.upper);
            }
        }
    }

    #[test]
    fn diagram_ece_matches_ece() {
        let rs = records(&[(0.05, false), (0.33, true), (0.38, false), (0.72, true), (0.99, true)]);
        let d = reliability_diagram(&rs, 10).unwrap();
        assert_eq!(d.ece(), ece(&rs, 10).unwrap());
        assert_eq!(d.bins().iter().map(|b| b.count).sum::<usize>(), rs.len());
    }

    #[test]
    fn csv_layout() {
        let d = reliability_diagram(&records(&[(0.55, true), (0.58, false)]), 2).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "bin_lower,bin_upper,count,mean_confidence,accuracy");
        assert_eq!(lines[1], "0,0.5,0,,");
        assert!(lines[2].starts_with("0.5,1,2,"));
        assert!(lines[2].ends_with(",0.5"));
    }
}
