//! Plot-ready descriptive outputs: Gaussian kernel densities, histograms,
//! and CSV serializations of those plus score scatters and fitted curves.

use std::fmt::Write as _;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub n: usize,
}

impl DensityEstimate {
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,density\n");
        for (x, d) in self.grid.iter().zip(&self.density) {
            let _ = writeln!(out, "{x},{d}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    /// `points` abscissae spanning the sample minimum and maximum extended
    /// by four bandwidths on each side.
    Auto { points: usize },
    Range { lo: f64, hi: f64, points: usize },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Auto { points: 512 }
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

fn check_sample(sample: &[f64]) -> Result<()> {
    if sample.len() < 2 {
        return Err(Error::Input(format!(
            "kernel density needs at least 2 values, got {}",
            sample.len()
        )));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("sample contains non-finite values".to_string()));
    }
    Ok(())
}

/// `1.06 * sd * n^(-1/5)` with the `n - 1` standard deviation.
pub fn silverman_bandwidth(sample: &[f64]) -> Result<f64> {
    check_sample(sample)?;
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::Input(
            "sample has zero variance; bandwidth is undefined".to_string(),
        ));
    }
    Ok(1.06 * sd * n.powf(-0.2))
}

/// Gaussian kernel density estimate on `grid`, with Silverman's bandwidth
/// unless `bandwidth` is given.
pub fn kernel_density(
    sample: &[f64],
    grid: GridSpec,
    bandwidth: Option<f64>,
) -> Result<DensityEstimate> {
    check_sample(sample)?;
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::Input(format!("bandwidth {h} must be positive"))),
        None => silverman_bandwidth(sample)?,
    };
    let (lo, hi, points) = match grid {
        GridSpec::Auto { points } => {
            let min = sample.iter().copied().fold(f64::INFINITY, f64::min);
            let max = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (min - 4.0 * h, max + 4.0 * h, points)
        }
        GridSpec::Range { lo, hi, points } => (lo, hi, points),
    };
    if points < 2 || !(hi > lo) {
        return Err(Error::Input(format!(
            "density grid [{lo}, {hi}] with {points} points is empty"
        )));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let norm = 1.0 / (sample.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let grid: Vec<f64> = (0..points).map(|k| lo + k as f64 * step).collect();
    let density = grid
        .iter()
        .map(|&x| {
            norm * sample
                .iter()
                .map(|&v| (-0.5 * ((x - v) / h).powi(2)).exp())
                .sum::<f64>()
        })
        .collect();
    Ok(DensityEstimate {
        grid,
        density,
        bandwidth: h,
        n: sample.len(),
    })
}

/// `bins` bins of equal `width` starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpec {
    pub start: f64,
    pub width: f64,
    pub bins: usize,
}

impl BinSpec {
    /// Smallest bin layout from `start` that reaches the sample maximum.
    pub fn covering(sample: &[f64], start: f64, width: f64) -> Self {
        let max = sample.iter().copied().fold(start, f64::max);
        let bins = (((max - start) / width).floor() as usize + 1).max(1);
        Self { start, width, bins }
    }

    pub fn edge(&self, k: usize) -> f64 {
        self.start + k as f64 * self.width
    }
}

/// Bins are `[a, b)` except the last, which is closed. Values outside the
/// range are tallied in `below` and `above`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub edges: Vec<HistEdge>,
    pub counts: Vec<usize>,
    pub below: usize,
    pub above: usize,
}

/// Bit pattern of an `f64` bin edge, so [`Histogram`] can be `Eq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistEdge(u64);

impl HistEdge {
    pub fn value(self) -> f64 {
        f64::from_bits(self.0)
    }
}

impl Histogram {
    pub fn edge_values(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.value()).collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.below + self.above
    }

    pub fn to_csv(&self) -> String {
        let edges = self.edge_values();
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{c}", tidy(edges[k]), tidy(edges[k + 1]));
        }
        out
    }
}

/// Drops accumulated representation noise (`0.30000000000000004`) from edges.
fn tidy(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn histogram(sample: &[f64], spec: BinSpec) -> Result<Histogram> {
    if sample.is_empty() {
        return Err(Error::Input("histogram of an empty sample".to_string()));
    }
    if !(spec.width > 0.0) || spec.bins == 0 || !spec.start.is_finite() {
        return Err(Error::Input(format!(
            "invalid bins: start {}, width {}, count {}",
            spec.start, spec.width, spec.bins
        )));
    }
    let edges: Vec<f64> = (0..=spec.bins).map(|k| spec.edge(k)).collect();
    let last = edges[spec.bins];
    let mut counts = vec![0usize; spec.bins];
    let (mut below, mut above) = (0, 0);
    for &v in sample {
        if v.is_nan() {
            return Err(Error::Input("histogram sample contains NaN".to_string()));
        }
        if v < edges[0] {
            below += 1;
            continue;
        }
        if v > last {
            above += 1;
            continue;
        }
        if v == last {
            counts[spec.bins - 1] += 1;
            continue;
        }
        let mut k = (((v - spec.start) / spec.width).floor() as usize).min(spec.bins - 1);
        while k > 0 && v < edges[k] {
            k -= 1;
        }
        while k + 1 < spec.bins && v >= edges[k + 1] {
            k += 1;
        }
        counts[k] += 1;
    }
    Ok(Histogram {
        edges: edges.into_iter().map(|e| HistEdge(e.to_bits())).collect(),
        counts,
        below,
        above,
    })
}

/// One point of an efficiency-versus-regressor scatter.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub unit: String,
    pub z: f64,
    pub r: f64,
    pub model: String,
}

pub fn scatter_csv(points: &[ScatterPoint]) -> String {
    let mut out = String::from("unit,z,r,model\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.unit, p.z, p.r, p.model);
    }
    out
}

pub fn curve_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("z,r\n");
    for (z, r) in curve {
        let _ = writeln!(out, "{z},{r}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn zero_variance_rejected() {
        assert!(kernel_density(&[0.0, 0.0], GridSpec::default(), None).is_err());
        assert!(kernel_density(&[1.0], GridSpec::default(), None).is_err());
        assert!(kernel_density(&[1.0, f64::NAN], GridSpec::default(), None).is_err());
    }

    #[test]
    fn symmetric_sample_gives_symmetric_density() {
        let est = kernel_density(
            &[-1.0, 1.0],
            GridSpec::Range { lo: -3.0, hi: 3.0, points: 101 },
            None,
        )
        .unwrap();
        let n = est.density.len();
        for k in 0..n {
            assert!((est.density[k] - est.density[n - 1 - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn standard_normal_peak() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sample: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let est = kernel_density(&sample, GridSpec::Range { lo: 0.0, hi: 1.0, points: 2 }, None).unwrap();
        assert!((est.density[0] - 0.398_942_280_4).abs() < 0.05, "{}", est.density[0]);
        let auto = kernel_density(&sample, GridSpec::default(), None).unwrap();
        assert!((auto.integral() - 1.0).abs() < 0.01);
        assert!(auto.density.iter().all(|d| *d >= 0.0));
    }

    #[test]
    fn silverman_value() {
        // sd of {1, 2, 3, 4} is sqrt(5/3).
        let h = silverman_bandwidth(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((h - 1.06 * (5.0f64 / 3.0).sqrt() * 4f64.powf(-0.2)).abs() < 1e-15);
        let est = kernel_density(&[1.0, 2.0], GridSpec::default(), Some(0.3)).unwrap();
        assert_eq!(est.bandwidth, 0.3);
        assert!(kernel_density(&[1.0, 2.0], GridSpec::default(), Some(-1.0)).is_err());
    }

    #[test]
    fn histogram_basic() {
        let h = histogram(&[0.1, 0.5, 0.5], BinSpec { start: 0.0, width: 0.4, bins: 2 }).unwrap();
        assert_eq!(h.counts, vec![1, 2]);
        assert_eq!(h.total(), 3);
        assert_eq!(h.to_csv(), "bin_lo,bin_hi,count\n0,0.4,1\n0.4,0.8,2\n");
    }

    #[test]
    fn histogram_edges() {
        // Half-open bins, last bin closed.
        let spec = BinSpec { start: 0.0, width: 0.5, bins: 2 };
        let h = histogram(&[0.0, 0.5, 1.0, -0.1, 1.1], spec).unwrap();
        assert_eq!(h.counts, vec![1, 2]);
        assert_eq!((h.below, h.above), (1, 1));
    }

    #[test]
    fn empty_range_counts_zero() {
        let h = histogram(&[5.0, 6.0], BinSpec { start: 0.0, width: 1.0, bins: 3 }).unwrap();
        assert_eq!(h.counts, vec![0, 0, 0]);
        assert_eq!(h.above, 2);
        assert!(histogram(&[], BinSpec { start: 0.0, width: 1.0, bins: 1 }).is_err());
        assert!(histogram(&[1.0], BinSpec { start: 0.0, width: 0.0, bins: 1 }).is_err());
    }

    #[test]
    fn covering_spec_holds_everything() {
        let s = [0.05, 0.41, 1.99, 0.8];
        let spec = BinSpec::covering(&s, 0.0, 0.1);
        let h = histogram(&s, spec).unwrap();
        assert_eq!(h.counts.iter().sum::<usize>(), s.len());
    }

    #[test]
    fn csv_layouts() {
        let pts = vec![ScatterPoint { unit: "AT".into(), z: 0.03, r: 0.8, model: "general".into() }];
        assert_eq!(scatter_csv(&pts), "unit,z,r,model\nAT,0.03,0.8,general\n");
        assert_eq!(curve_csv(&[(0.0, 1.0)]), "z,r\n0,1\n");
    }
}
