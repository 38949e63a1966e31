//! Wilcoxon signed-rank test for paired samples.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Largest sample handled by the exact null distribution by default.
pub const EXACT_MAX_N: usize = 25;
// counts of sign assignments are kept in a u64
const EXACT_HARD_LIMIT: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// Differences `a - b` tend to be positive.
    Greater,
    /// Differences `a - b` tend to be negative.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonOptions {
    pub alternative: Alternative,
    /// `None` picks the exact distribution for up to 25 nonzero differences.
    pub method: Option<TestMethod>,
}

impl Default for WilcoxonOptions {
    fn default() -> Self {
        WilcoxonOptions { alternative: Alternative::TwoSided, method: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub n_effective: usize,
    /// `min(W+, W-)`.
    pub w_statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub method: TestMethod,
    pub alternative: Alternative,
    /// Every difference was zero; the test carries no information.
    pub degenerate: bool,
}

/// Two-sided test, exact for up to 25 nonzero differences.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_with(a, b, WilcoxonOptions::default())
}

pub fn wilcoxon_with(a: &[f64], b: &[f64], opts: WilcoxonOptions) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::Empty("paired sample"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidScores("non-finite paired difference".into()));
    }
    let scale = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let tol = 1e-9 * scale;
    let nonzero: Vec<f64> = diffs.into_iter().filter(|d| d.abs() > tol).collect();
    let n = nonzero.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n_effective: 0,
            w_statistic: 0.0,
            w_plus: 0.0,
            w_minus: 0.0,
            p_value: 1.0,
            method: opts.method.unwrap_or(TestMethod::Exact),
            alternative: opts.alternative,
            degenerate: true,
        });
    }

    let (ranks2, tie_sizes) = doubled_ranks(&nonzero, tol);
    let w_plus2: u64 = nonzero.iter().zip(&ranks2).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total2 = (n * (n + 1)) as u64;
    let w_minus2 = total2 - w_plus2;

    let method = opts.method.unwrap_or(if n <= EXACT_MAX_N { TestMethod::Exact } else { TestMethod::NormalApprox });
    let p_value = match method {
        TestMethod::Exact => {
            if n > EXACT_HARD_LIMIT {
                return Err(Error::Config(format!(
                    "exact signed-rank distribution limited to {EXACT_HARD_LIMIT} pairs"
                )));
            }
            exact_p(&ranks2, w_plus2, opts.alternative)
        }
        TestMethod::NormalApprox => normal_p(n, &tie_sizes, w_plus2 as f64 / 2.0, opts.alternative),
    };
    Ok(WilcoxonResult {
        n_effective: n,
        w_statistic: w_plus2.min(w_minus2) as f64 / 2.0,
        w_plus: w_plus2 as f64 / 2.0,
        w_minus: w_minus2 as f64 / 2.0,
        p_value: p_value.clamp(f64::MIN_POSITIVE, 1.0),
        method,
        alternative: opts.alternative,
        degenerate: false,
    })
}

/// Twice the mid-rank of each `|d|` (so ranks stay integral) and the sizes
/// of the tie groups. Magnitudes within `tol` of each other count as tied.
fn doubled_ranks(d: &[f64], tol: f64) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut ranks = vec![0u64; d.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let base = d[order[start]].abs();
        let mut end = start + 1;
        while end < order.len() && d[order[end]].abs() - base <= tol {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let r2 = (start + 1 + end) as u64;
        for &i in &order[start..end] {
            ranks[i] = r2;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

/// Null distribution of doubled `W+` over all `2^n` sign assignments,
/// built by adding one rank at a time.
fn null_counts(ranks2: &[u64]) -> Vec<u64> {
    let max: u64 = ranks2.iter().sum();
    let mut counts = vec![0u64; max as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

fn exact_p(ranks2: &[u64], w_plus2: u64, alt: Alternative) -> f64 {
    let counts = null_counts(ranks2);
    let total = 2f64.powi(ranks2.len() as i32);
    let max = counts.len() as u64 - 1;
    let at_most = |w: u64| counts[..=w as usize].iter().sum::<u64>() as f64;
    match alt {
        Alternative::TwoSided => {
            let w = w_plus2.min(max - w_plus2);
            (2.0 * at_most(w) / total).min(1.0)
        }
        Alternative::Less => at_most(w_plus2) / total,
        Alternative::Greater => counts[w_plus2 as usize..].iter().sum::<u64>() as f64 / total,
    }
}

fn normal_p(n: usize, ties: &[usize], w_plus: f64, alt: Alternative) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let upper = |z: f64| 0.5 * erfc(z / std::f64::consts::SQRT_2);
    match alt {
        Alternative::TwoSided => {
            let z = ((w_plus - mean).abs() - 0.5).max(0.0) / sd;
            (2.0 * upper(z)).min(1.0)
        }
        Alternative::Greater => upper((w_plus - mean - 0.5) / sd),
        Alternative::Less => upper(-(w_plus - mean + 0.5) / sd),
    }
}

/// Significance levels, loosest first, mapped to the markers `*`, `†`, `‡`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaBands(Vec<f64>);

impl Default for AlphaBands {
    fn default() -> Self {
        AlphaBands(vec![0.10, 0.05, 0.01])
    }
}

const MARKERS: [&str; 3] = ["*", "†", "‡"];

impl AlphaBands {
    pub fn new(mut levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || levels.len() > MARKERS.len() {
            return Err(Error::Config(format!("between 1 and {} alpha bands are supported", MARKERS.len())));
        }
        if levels.iter().any(|a| !(a.is_finite() && *a > 0.0 && *a < 1.0)) {
            return Err(Error::Config("alpha levels must lie in (0, 1)".into()));
        }
        levels.sort_by(|x, y| y.total_cmp(x));
        if levels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("alpha levels must be distinct".into()));
        }
        Ok(AlphaBands(levels))
    }

    pub fn levels(&self) -> &[f64] {
        &self.0
    }

    /// Marker for the strictest level with `p < alpha`, or `""`.
    pub fn marker(&self, p: f64) -> &'static str {
        let passed = self.0.iter().filter(|&&a| p < a).count();
        if passed == 0 {
            ""
        } else {
            MARKERS[passed - 1]
        }
    }
}

impl FromStr for AlphaBands {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let levels = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad alpha level '{t}'"))))
            .collect::<Result<Vec<_>>>()?;
        AlphaBands::new(levels)
    }
}

impl fmt::Display for AlphaBands {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent route: naive mid-ranks and explicit enumeration of every
    /// sign assignment.
    fn brute_force_two_sided(d: &[f64]) -> f64 {
        let d: Vec<f64> = d.iter().copied().filter(|x| *x != 0.0).collect();
        let n = d.len();
        let rank2 = |i: usize| -> u64 {
            let less = d.iter().filter(|x| x.abs() < d[i].abs()).count() as u64;
            let eq = d.iter().filter(|x| x.abs() == d[i].abs()).count() as u64;
            2 * less + eq + 1
        };
        let r: Vec<u64> = (0..n).map(rank2).collect();
        let total: u64 = r.iter().sum();
        let w_plus: u64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| r[i]).sum();
        let w = w_plus.min(total - w_plus);
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let s: u64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| r[i]).sum();
            if s <= w {
                hits += 1;
            }
        }
        (2.0 * hits as f64 / 2f64.powi(n as i32)).min(1.0)
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.n_effective, 0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn five_positive_differences() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
        assert_eq!(r.w_statistic, 0.0);
        assert_eq!(r.w_plus, 15.0);
        assert_eq!(r.method, TestMethod::Exact);
        assert_eq!(r.p_value, 2.0 / 32.0);
    }

    #[test]
    fn one_sided_exact() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let g =
            wilcoxon_with(&a, &[0.0; 5], WilcoxonOptions { alternative: Alternative::Greater, method: None }).unwrap();
        assert_eq!(g.p_value, 1.0 / 32.0);
        let l = wilcoxon_with(&a, &[0.0; 5], WilcoxonOptions { alternative: Alternative::Less, method: None }).unwrap();
        assert_eq!(l.p_value, 1.0);
    }

    #[test]
    fn ties_get_mid_ranks() {
        let (r, t) = doubled_ranks(&[1.0, -1.0, 2.0, 3.0, -3.0, 3.0], 0.0);
        assert_eq!(r, vec![3, 3, 6, 10, 10, 10]);
        assert_eq!(t, vec![2, 1, 3]);
    }

    #[test]
    fn near_equal_magnitudes_tie() {
        let a = [60.8 - 45.7, 15.1, 2.0];
        let (r, _) = doubled_ranks(&a, 1e-9 * 15.1);
        assert_eq!(r[0], r[1]);
    }

    #[test]
    fn null_distribution_is_symmetric_and_complete() {
        let c = null_counts(&[2, 4, 6, 8]);
        assert_eq!(c.iter().sum::<u64>(), 16);
        let rev: Vec<u64> = c.iter().rev().copied().collect();
        assert_eq!(c, rev);
    }

    #[test]
    fn large_samples_use_the_normal_approximation() {
        let a: Vec<f64> = (1..=30).map(|i| i as f64 * if i % 3 == 0 { -1.0 } else { 1.0 }).collect();
        let r = wilcoxon_signed_rank(&a, &vec![0.0; 30]).unwrap();
        assert_eq!(r.method, TestMethod::NormalApprox);
        assert!(r.p_value > 0.0 && r.p_value < 1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch(1, 2))));
        assert!(wilcoxon_signed_rank(&[], &[]).is_err());
    }

    #[test]
    fn alpha_band_markers() {
        let b = AlphaBands::default();
        assert_eq!(b.marker(0.2), "");
        assert_eq!(b.marker(0.07), "*");
        assert_eq!(b.marker(0.03), "†");
        assert_eq!(b.marker(0.001), "‡");
        assert_eq!(b.marker(0.01), "†");
        let one: AlphaBands = "0.05".parse().unwrap();
        assert_eq!(one.marker(0.01), "*");
        assert!("0.1,0.1".parse::<AlphaBands>().is_err());
        assert!("".parse::<AlphaBands>().is_err());
    }

    proptest! {
        #[test]
        fn exact_matches_enumeration(d in proptest::collection::vec(-4i32..=4, 1..9)) {
            let a: Vec<f64> = d.iter().map(|&x| x as f64 * 0.5).collect();
            let r = wilcoxon_signed_rank(&a, &vec![0.0; a.len()]).unwrap();
            if r.degenerate {
                prop_assert_eq!(r.p_value, 1.0);
            } else {
                prop_assert_eq!(r.p_value, brute_force_two_sided(&a));
            }
        }

        #[test]
        fn normal_approximation_is_close_at_twenty(
            mags in proptest::sample::subsequence((1..=200).collect::<Vec<u32>>(), 20),
            signs in proptest::collection::vec(any::<bool>(), 20),
        ) {
            let a: Vec<f64> = mags.iter().zip(&signs).map(|(&m, &s)| if s { m as f64 } else { -(m as f64) }).collect();
            let zeros = vec![0.0; 20];
            let exact = wilcoxon_with(&a, &zeros, WilcoxonOptions { method: Some(TestMethod::Exact), ..Default::default() }).unwrap();
            let approx = wilcoxon_with(&a, &zeros, WilcoxonOptions { method: Some(TestMethod::NormalApprox), ..Default::default() }).unwrap();
            prop_assert!((exact.p_value - approx.p_value).abs() <= 0.02);
        }
    }
}
