//! Sizing metrics: confusion matrix, accuracy, within-one-size accuracy,
//! per-class sensitivity and positive predictivity, and the tolerance-aware
//! correctness rule used when ground-truth widths are available.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::Manifest;
use crate::par;
use crate::pipeline::{run_pipeline, StageModels};
use crate::sizing::{SizeBin, SizeChart};

/// 4x4 counts, rows = actual {S,M,L,TL}, columns = predicted.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    counts: [[u64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts(counts: [[u64; 4]; 4]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn add(&mut self, actual: SizeBin, predicted: SizeBin) {
        self.counts[actual.ordinal()][predicted.ordinal()] += 1;
    }

    pub fn count(&self, actual: SizeBin, predicted: SizeBin) -> u64 {
        self.counts[actual.ordinal()][predicted.ordinal()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, actual: SizeBin) -> u64 {
        self.counts[actual.ordinal()].iter().sum()
    }

    pub fn col_sum(&self, predicted: SizeBin) -> u64 {
        self.counts.iter().map(|r| r[predicted.ordinal()]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    /// Read a 4x4 matrix from CSV: four rows of four integers, optional
    /// header row/column with size codes.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut rows: Vec<Vec<u64>> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let numeric: Vec<u64> = cells.iter().filter_map(|c| c.parse().ok()).collect();
            if numeric.len() == 4 {
                rows.push(numeric);
            }
        }
        if rows.len() != 4 {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                message: format!("expected 4 numeric rows of 4 counts, found {}", rows.len()),
            });
        }
        let mut counts = [[0u64; 4]; 4];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                counts[i][j] = v;
            }
        }
        Ok(ConfusionMatrix { counts })
    }
}

/// Accumulate (actual, predicted) pairs into a matrix.
pub fn accumulate(pairs: &[(SizeBin, SizeBin)]) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::new();
    for &(a, p) in pairs {
        cm.add(a, p);
    }
    cm
}

/// trace / total
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidArgument("empty confusion matrix".into()));
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// Fraction with |ordinal(pred) - ordinal(actual)| <= 1 under S<M<L<TL.
pub fn within_one(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidArgument("empty confusion matrix".into()));
    }
    let mut hits = 0u64;
    for a in SizeBin::ALL {
        for p in SizeBin::ALL {
            if a.ordinal().abs_diff(p.ordinal()) <= 1 {
                hits += cm.count(a, p);
            }
        }
    }
    Ok(hits as f64 / total as f64)
}

/// Per-class sensitivity (diagonal / row) and positive predictivity
/// (diagonal / column); `None` for empty rows/columns (0/0).
pub fn sensitivity_ppv(cm: &ConfusionMatrix) -> ([Option<f64>; 4], [Option<f64>; 4]) {
    let mut sens = [None; 4];
    let mut ppv = [None; 4];
    for bin in SizeBin::ALL {
        let k = bin.ordinal();
        let diag = cm.count(bin, bin) as f64;
        let row = cm.row_sum(bin);
        let col = cm.col_sum(bin);
        if row > 0 {
            sens[k] = Some(diag / row as f64);
        }
        if col > 0 {
            ppv[k] = Some(diag / col as f64);
        }
    }
    (sens, ppv)
}

/// Integer percent for display (round half away from zero on non-negative
/// fractions, matching ordinary table rounding).
pub fn percent(fraction: f64) -> u64 {
    (fraction * 100.0).round() as u64
}

/// True iff the prediction is exactly right, or the ground-truth width
/// sits within the tolerance band of a boundary and one of that boundary's
/// adjacent bins was issued.
pub fn tolerant_correct(actual_width_mm: f64, predicted: SizeBin, chart: &SizeChart) -> Result<bool> {
    let exact = chart.size_bin(actual_width_mm)?;
    if predicted == exact {
        return Ok(true);
    }
    for &b in chart.boundaries() {
        if (actual_width_mm - b).abs() <= chart.tolerance() * b {
            let idx = chart.boundaries().iter().position(|&x| x == b).unwrap();
            let below = SizeBin::from_ordinal(idx).unwrap();
            let above = SizeBin::from_ordinal(idx + 1).unwrap();
            if predicted == below || predicted == above {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub matrix: ConfusionMatrix,
    pub accuracy: f64,
    pub within_one: f64,
    pub sensitivity: [Option<f64>; 4],
    pub ppv: [Option<f64>; 4],
    /// fraction correct under the boundary-tolerance rule, when ground
    /// truth widths were available
    pub tolerant_accuracy: Option<f64>,
    pub evaluated: usize,
    pub failures: usize,
}

impl MetricsReport {
    pub fn from_matrix(matrix: ConfusionMatrix) -> Result<MetricsReport> {
        let acc = accuracy(&matrix)?;
        let w1 = within_one(&matrix)?;
        let (sensitivity, ppv) = sensitivity_ppv(&matrix);
        let evaluated = matrix.total() as usize;
        Ok(MetricsReport {
            matrix,
            accuracy: acc,
            within_one: w1,
            sensitivity,
            ppv,
            tolerant_accuracy: None,
            evaluated,
            failures: 0,
        })
    }

    /// Plain-text table mirroring the published layout.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Confusion matrix (rows = actual, columns = predicted)");
        let _ = writeln!(s, "        {:>6} {:>6} {:>6} {:>6}", "S", "M", "L", "TL");
        for a in SizeBin::ALL {
            let _ = write!(s, "  {:>4} ", a.code());
            for p in SizeBin::ALL {
                let _ = write!(s, " {:>6}", self.matrix.count(a, p));
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "accuracy:    {:.2}%", self.accuracy * 100.0);
        let _ = writeln!(s, "within-one:  {:.2}%", self.within_one * 100.0);
        if let Some(t) = self.tolerant_accuracy {
            let _ = writeln!(s, "tolerance-adjusted accuracy: {:.2}%", t * 100.0);
        }
        let fmt_pct = |v: Option<f64>| match v {
            Some(f) => format!("{:>4}", percent(f)),
            None => "   -".to_string(),
        };
        let _ = writeln!(s, "sensitivity (%):   S {} M {} L {} TL {}",
            fmt_pct(self.sensitivity[0]),
            fmt_pct(self.sensitivity[1]),
            fmt_pct(self.sensitivity[2]),
            fmt_pct(self.sensitivity[3]));
        let _ = writeln!(s, "pos. predict. (%): S {} M {} L {} TL {}",
            fmt_pct(self.ppv[0]),
            fmt_pct(self.ppv[1]),
            fmt_pct(self.ppv[2]),
            fmt_pct(self.ppv[3]));
        if self.failures > 0 {
            let _ = writeln!(s, "detection failures: {} (excluded from the matrix)", self.failures);
        }
        s
    }
}

/// Per-sample outcome from [`evaluate_manifest`].
#[derive(Clone, Debug)]
pub struct SampleOutcome {
    pub image: String,
    pub actual: SizeBin,
    pub predicted: Option<SizeBin>,
    pub predicted_width_mm: Option<f64>,
    pub tolerant: Option<bool>,
    pub failure: Option<String>,
}

/// Run the full pipeline on every record and score the predictions.
/// Detection failures are counted separately, never silently dropped.
pub fn evaluate_manifest(manifest: &Manifest, models: &StageModels) -> Result<(MetricsReport, Vec<SampleOutcome>)> {
    let chart = &models.chart;
    let outcomes: Vec<Result<SampleOutcome>> = par::map_slice(&manifest.records, |record| {
        let actual = match (record.size, record.width_mm) {
            (Some(s), _) => s,
            (None, Some(w)) => chart.size_bin(w)?,
            (None, None) => {
                return Err(Error::InvalidArgument(format!(
                    "record {} has neither size nor width",
                    record.image_path.display()
                )))
            }
        };
        let image = record.load_image()?;
        let name = record.image_path.to_string_lossy().into_owned();
        match run_pipeline(&image, models) {
            Ok(result) => {
                let tolerant = record
                    .width_mm
                    .map(|w| tolerant_correct(w, result.size, chart))
                    .transpose()?;
                Ok(SampleOutcome {
                    image: name,
                    actual,
                    predicted: Some(result.size),
                    predicted_width_mm: Some(result.nose_width_mm),
                    tolerant,
                    failure: None,
                })
            }
            Err(Error::StageFailure { stage }) => Ok(SampleOutcome {
                image: name,
                actual,
                predicted: None,
                predicted_width_mm: None,
                tolerant: None,
                failure: Some(format!("{stage}-not-found")),
            }),
            Err(e) => Err(e),
        }
    });

    let mut matrix = ConfusionMatrix::new();
    let mut rows = Vec::with_capacity(manifest.len());
    let mut failures = 0usize;
    let mut tolerant_hits = 0usize;
    let mut tolerant_total = 0usize;
    for o in outcomes {
        let o = o?;
        match o.predicted {
            Some(p) => {
                matrix.add(o.actual, p);
                if let Some(t) = o.tolerant {
                    tolerant_total += 1;
                    if t {
                        tolerant_hits += 1;
                    }
                }
            }
            None => failures += 1,
        }
        rows.push(o);
    }

    let evaluated = matrix.total() as usize;
    let report = if evaluated > 0 {
        let mut r = MetricsReport::from_matrix(matrix)?;
        r.failures = failures;
        r.tolerant_accuracy = if tolerant_total > 0 {
            Some(tolerant_hits as f64 / tolerant_total as f64)
        } else {
            None
        };
        r
    } else {
        MetricsReport {
            matrix,
            accuracy: 0.0,
            within_one: 0.0,
            sensitivity: [None; 4],
            ppv: [None; 4],
            tolerant_accuracy: None,
            evaluated: 0,
            failures,
        }
    };
    Ok((report, rows))
}

/// The published confusion matrix (rows S,M,L,TL by actual size).
pub fn published_matrix() -> ConfusionMatrix {
    ConfusionMatrix::from_counts([
        [75, 15, 5, 8],
        [16, 33, 5, 9],
        [4, 3, 10, 1],
        [0, 0, 0, 3],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn accumulate_counts() {
        let cm = accumulate(&[]);
        assert_eq!(cm.total(), 0);
        let cm = accumulate(&[(SizeBin::Small, SizeBin::Small)]);
        assert_eq!(cm.count(SizeBin::Small, SizeBin::Small), 1);
        assert_eq!(cm.total(), 1);
    }

    #[test]
    fn published_matrix_metrics() {
        // trace 75+33+10+3 = 121 of 187; within-one 90+54+14+3 = 161
        let cm = published_matrix();
        assert_eq!(cm.total(), 187);
        assert_eq!(cm.trace(), 121);
        assert_relative_eq!(accuracy(&cm).unwrap(), 121.0 / 187.0, epsilon = 1e-12);
        assert_relative_eq!(within_one(&cm).unwrap(), 161.0 / 187.0, epsilon = 1e-12);
        assert_relative_eq!(accuracy(&cm).unwrap() * 100.0, 64.71, epsilon = 0.01);
        assert_relative_eq!(within_one(&cm).unwrap() * 100.0, 86.10, epsilon = 0.01);
    }

    #[test]
    fn published_sensitivity_ppv() {
        let cm = published_matrix();
        let (sens, ppv) = sensitivity_ppv(&cm);
        // M: 33/63 -> 52; L: 10/18 -> 56; TL: 3/3 -> 100
        assert_eq!(percent(sens[1].unwrap()), 52);
        assert_eq!(percent(sens[2].unwrap()), 56);
        assert_eq!(percent(sens[3].unwrap()), 100);
        // S ppv 75/95 -> 79; M 33/51 -> 65; L 10/20 -> 50; TL 3/21 -> 14
        assert_eq!(percent(ppv[0].unwrap()), 79);
        assert_eq!(percent(ppv[1].unwrap()), 65);
        assert_eq!(percent(ppv[2].unwrap()), 50);
        assert_eq!(percent(ppv[3].unwrap()), 14);
        // S sensitivity: the table prints 76, the row arithmetic says
        // 75/103 = 72.8; the computed value is authoritative here
        assert_relative_eq!(sens[0].unwrap() * 100.0, 72.8, epsilon = 0.05);
        assert_eq!(percent(sens[0].unwrap()), 73);
    }

    #[test]
    fn identity_matrix_perfect() {
        let mut counts = [[0u64; 4]; 4];
        for i in 0..4 {
            counts[i][i] = 7;
        }
        let cm = ConfusionMatrix::from_counts(counts);
        assert_relative_eq!(accuracy(&cm).unwrap(), 1.0);
        assert_relative_eq!(within_one(&cm).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_never_exceeds_within_one() {
        let mut rng = crate::rng::SeededRng::new(77);
        for _ in 0..50 {
            let mut counts = [[0u64; 4]; 4];
            for row in counts.iter_mut().flatten() {
                *row = rng.gen_range_usize(0, 10) as u64;
            }
            let cm = ConfusionMatrix::from_counts(counts);
            if cm.total() == 0 {
                continue;
            }
            assert!(accuracy(&cm).unwrap() <= within_one(&cm).unwrap() + 1e-12);
        }
    }

    #[test]
    fn pair_order_irrelevant() {
        let mut pairs = vec![
            (SizeBin::Small, SizeBin::Medium),
            (SizeBin::Large, SizeBin::Large),
            (SizeBin::TooLarge, SizeBin::Small),
            (SizeBin::Medium, SizeBin::Medium),
        ];
        let a = accumulate(&pairs);
        pairs.reverse();
        assert_eq!(a, accumulate(&pairs));
    }

    #[test]
    fn row_sums_match_actual_counts() {
        let pairs = vec![
            (SizeBin::Small, SizeBin::Medium),
            (SizeBin::Small, SizeBin::Small),
            (SizeBin::Medium, SizeBin::Medium),
        ];
        let cm = accumulate(&pairs);
        assert_eq!(cm.row_sum(SizeBin::Small), 2);
        assert_eq!(cm.row_sum(SizeBin::Medium), 1);
        assert_eq!(cm.row_sum(SizeBin::Large), 0);
    }

    #[test]
    fn tolerance_rule() {
        let chart = SizeChart::default();
        // within 1.85 of 37 -> Medium accepted for a 36.9 Small
        assert!(tolerant_correct(36.9, SizeBin::Medium, &chart).unwrap());
        assert!(!tolerant_correct(30.0, SizeBin::Medium, &chart).unwrap());
        // |44 - 45| = 1 <= 2.25 -> TooLarge accepted
        assert!(tolerant_correct(44.0, SizeBin::TooLarge, &chart).unwrap());
        // exact correctness always implies tolerant correctness
        for w in [10.0, 36.9, 37.0, 40.0, 44.9, 45.0, 60.0] {
            let exact = chart.size_bin(w).unwrap();
            assert!(tolerant_correct(w, exact, &chart).unwrap());
        }
    }

    #[test]
    fn matrix_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t1.csv");
        std::fs::write(&path, ",S,M,L,TL\nS,75,15,5,8\nM,16,33,5,9\nL,4,3,10,1\nTL,0,0,0,3\n").unwrap();
        assert_eq!(ConfusionMatrix::from_csv(&path).unwrap(), published_matrix());
        // bare numeric form too
        std::fs::write(&path, "75,15,5,8\n16,33,5,9\n4,3,10,1\n0,0,0,3\n").unwrap();
        assert_eq!(ConfusionMatrix::from_csv(&path).unwrap(), published_matrix());
    }
}
