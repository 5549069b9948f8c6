//! Nonparametric significance tests: Wilcoxon signed-rank and Friedman.
//!
//! Both tests are two-sided. Ties receive mid-ranks.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of nonzero differences for which the Wilcoxon p-value is
/// computed exactly; above it the normal approximation is used.
pub const WILCOXON_EXACT_MAX: usize = 25;

pub const DEFAULT_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMethod {
    Wilcoxon,
    Friedman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub method: TestMethod,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
    /// Nonzero pairs (Wilcoxon) or blocks (Friedman).
    pub n_effective: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degrees_of_freedom: Option<usize>,
    /// Wilcoxon only: every paired difference was zero.
    #[serde(default)]
    pub degenerate: bool,
    /// Wilcoxon only: whether the p-value came from exact enumeration.
    #[serde(default)]
    pub exact: bool,
}

pub fn is_significant(p_value: f64, alpha: f64) -> bool {
    p_value < alpha
}

/// Mid-ranks (1-based) of `values`; tied values share the mean of the
/// ranks they span.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of the tie groups in `values` (groups of one included).
fn tie_group_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        sizes.push(j - i);
        i = j;
    }
    sizes
}

/// Signed-rank sums of the nonzero paired differences `a - b`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSums {
    pub t_plus: f64,
    pub t_minus: f64,
    /// Mid-ranks of |d| for the nonzero differences, in input order.
    pub ranks: Vec<f64>,
    /// Whether each nonzero difference is positive, aligned with `ranks`.
    pub positive: Vec<bool>,
}

pub fn signed_rank_sums(a: &[f64], b: &[f64]) -> Result<RankSums> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Stats(format!(
            "Wilcoxon needs two equal-length non-empty samples, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Stats("non-finite value in Wilcoxon input".into()));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = mid_ranks(&abs);
    let positive: Vec<bool> = diffs.iter().map(|d| *d > 0.0).collect();
    // fold from +0.0: `sum` starts at -0.0 and would print "-0.0000" when empty
    let t_plus = ranks
        .iter()
        .zip(&positive)
        .filter(|(_, p)| **p)
        .fold(0.0, |acc, (r, _)| acc + r);
    let t_minus = ranks
        .iter()
        .zip(&positive)
        .filter(|(_, p)| !**p)
        .fold(0.0, |acc, (r, _)| acc + r);
    Ok(RankSums {
        t_plus,
        t_minus,
        ranks,
        positive,
    })
}

/// Exact two-sided p-value of the signed-rank statistic given the (mid-)
/// ranks: the share of all 2^n sign assignments whose positive rank sum is
/// at least as far from its mean as the observed one. Counts come from a
/// subset-sum table over doubled ranks, so the result is exact.
pub fn wilcoxon_exact_p(ranks: &[f64], t_plus: f64) -> f64 {
    let n = ranks.len();
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            let c = counts[s];
            if c != 0 {
                counts[s + r] += c;
            }
        }
        reach += r;
    }
    // total = n(n+1) is even, so the center is an integer.
    let center = total as i64 / 2;
    let observed = ((2.0 * t_plus).round() as i64 - center).abs();
    let extreme: u64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s as i64 - center).abs() >= observed)
        .map(|(_, c)| c)
        .sum();
    extreme as f64 / 2f64.powi(n as i32)
}

/// Normal approximation with tie and continuity corrections.
fn wilcoxon_normal_p(ranks: &[f64], t_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = tie_group_sizes(ranks)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((t_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    (2.0 * normal_sf(z)).min(1.0)
}

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero
/// differences are dropped; the statistic is `min(T+, T-)`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alpha: f64) -> Result<TestOutcome> {
    let sums = signed_rank_sums(a, b)?;
    let n = sums.ranks.len();
    if n == 0 {
        return Ok(TestOutcome {
            method: TestMethod::Wilcoxon,
            statistic: 0.0,
            p_value: 1.0,
            alpha,
            significant: is_significant(1.0, alpha),
            n_effective: 0,
            degrees_of_freedom: None,
            degenerate: true,
            exact: true,
        });
    }
    let exact = n <= WILCOXON_EXACT_MAX;
    let p_value = if exact {
        wilcoxon_exact_p(&sums.ranks, sums.t_plus)
    } else {
        wilcoxon_normal_p(&sums.ranks, sums.t_plus)
    }
    .clamp(0.0, 1.0);
    Ok(TestOutcome {
        method: TestMethod::Wilcoxon,
        statistic: sums.t_plus.min(sums.t_minus),
        p_value,
        alpha,
        significant: is_significant(p_value, alpha),
        n_effective: n,
        degrees_of_freedom: None,
        degenerate: false,
        exact,
    })
}

/// Friedman test over `results` (N blocks × k treatments), ranking within
/// each block. The statistic is divided by the usual tie correction
/// `1 - Σ(t³ - t) / (N k (k² - 1))`; fully tied data give 0.
pub fn friedman(results: ArrayView2<f64>, alpha: f64) -> Result<TestOutcome> {
    let (n_blocks, k) = results.dim();
    if k < 3 {
        return Err(Error::Stats(format!(
            "Friedman needs at least 3 treatments, got {k}"
        )));
    }
    if n_blocks < 2 {
        return Err(Error::Stats(format!(
            "Friedman needs at least 2 blocks, got {n_blocks}"
        )));
    }
    if results.iter().any(|v| !v.is_finite()) {
        return Err(Error::Stats("non-finite value in Friedman input".into()));
    }
    let (nf, kf) = (n_blocks as f64, k as f64);
    let mut rank_sums = vec![0.0; k];
    let mut tie_term = 0.0;
    for block in results.rows() {
        let values = block.to_vec();
        for (sum, r) in rank_sums.iter_mut().zip(mid_ranks(&values)) {
            *sum += r;
        }
        tie_term += tie_group_sizes(&values)
            .into_iter()
            .map(|t| {
                let t = t as f64;
                t * t * t - t
            })
            .sum::<f64>();
    }
    let raw = 12.0 / (nf * kf * (kf + 1.0)) * rank_sums.iter().map(|r| r * r).sum::<f64>()
        - 3.0 * nf * (kf + 1.0);
    let correction = 1.0 - tie_term / (nf * kf * (kf * kf - 1.0));
    let statistic = if correction <= 0.0 {
        0.0
    } else {
        (raw / correction).max(0.0)
    };
    let dof = k - 1;
    let p_value = chi_square_sf(statistic, dof)?;
    Ok(TestOutcome {
        method: TestMethod::Friedman,
        statistic,
        p_value,
        alpha,
        significant: is_significant(p_value, alpha),
        n_effective: n_blocks,
        degrees_of_freedom: Some(dof),
        degenerate: false,
        exact: false,
    })
}

/// Survival function of the chi-square distribution,
/// `Q(dof / 2, x / 2)` (regularized upper incomplete gamma).
pub fn chi_square_sf(x: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return Err(Error::Stats("chi-square needs dof >= 1".into()));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Stats(format!(
            "chi-square survival undefined for x = {x}"
        )));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(statrs::function::gamma::gamma_ur(dof as f64 / 2.0, x / 2.0).clamp(0.0, 1.0))
}

/// Upper tail of the standard normal, `1 - Φ(z) = erfc(z / √2) / 2`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    /// Independent oracle: enumerate every sign assignment.
    fn brute_force_p(ranks: &[f64], t_plus: f64) -> f64 {
        let n = ranks.len();
        let total: f64 = ranks.iter().sum();
        let center = total / 2.0;
        let observed = (t_plus - center).abs();
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| ranks[i])
                .sum();
            if (s - center).abs() >= observed - 1e-9 {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << n) as f64
    }

    #[test]
    fn mid_rank_ties() {
        assert_eq!(
            mid_ranks(&[10.0, 20.0, 10.0, 30.0]),
            vec![1.5, 3.0, 1.5, 4.0]
        );
        assert_eq!(tie_group_sizes(&[1.0, 1.0, 2.0]), vec![2, 1]);
    }

    #[test]
    fn wilcoxon_three_positive() {
        let out = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0], 0.01).unwrap();
        let sums = signed_rank_sums(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        assert_eq!(sums.t_plus, 6.0);
        assert_eq!(out.statistic, 0.0);
        assert!(out.statistic.is_sign_positive());
        assert_eq!(format!("{:.4}", out.statistic), "0.0000");
        assert_abs_diff_eq!(out.p_value, 0.25, epsilon = 1e-15);
        assert!(!out.significant);
        assert!(out.exact);
    }

    #[test]
    fn wilcoxon_zero_dropped_with_ties() {
        let out = wilcoxon_signed_rank(&[0.0, 1.0, -1.0], &[0.0; 3], 0.01).unwrap();
        let sums = signed_rank_sums(&[0.0, 1.0, -1.0], &[0.0; 3]).unwrap();
        assert_eq!(sums.ranks, vec![1.5, 1.5]);
        assert_eq!(out.n_effective, 2);
        assert_eq!(out.p_value, 1.0);
    }

    #[test]
    fn wilcoxon_identical_samples_degenerate() {
        let out = wilcoxon_signed_rank(&[0.3, 0.5], &[0.3, 0.5], 0.01).unwrap();
        assert!(out.degenerate);
        assert_eq!(out.p_value, 1.0);
        assert_eq!(out.statistic, 0.0);
        assert!(!out.significant);
    }

    #[test]
    fn wilcoxon_input_errors() {
        assert!(wilcoxon_signed_rank(&[], &[], 0.01).is_err());
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0], 0.01).is_err());
        assert!(wilcoxon_signed_rank(&[f64::NAN], &[1.0], 0.01).is_err());
    }

    #[test]
    fn wilcoxon_exact_matches_brute_force_with_ties() {
        let ranks = mid_ranks(&[1.0, 1.0, 2.0, 3.0, 3.0, 3.0, 7.0]);
        for t_plus in [0.0, 1.5, 4.0, 9.5, 14.0] {
            assert_abs_diff_eq!(
                wilcoxon_exact_p(&ranks, t_plus),
                brute_force_p(&ranks, t_plus),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn wilcoxon_large_n_uses_normal_approximation() {
        let a: Vec<f64> = (1..=40)
            .map(|i| i as f64 * if i % 3 == 0 { -1.0 } else { 1.0 })
            .collect();
        let out = wilcoxon_signed_rank(&a, &vec![0.0; 40], 0.01).unwrap();
        assert!(!out.exact);
        // T- = 3+6+...+39 = 273, T+ = 820 - 273 = 547; mean 410,
        // sd = sqrt(40*41*81/24) = 74.398...; z = (137 - 0.5)/sd
        let sd = (40.0f64 * 41.0 * 81.0 / 24.0).sqrt();
        let z = 136.5 / sd;
        assert_eq!(out.statistic, 273.0);
        assert_abs_diff_eq!(out.p_value, 2.0 * normal_sf(z), epsilon = 1e-15);
        assert!(out.p_value > 0.05 && out.p_value < 0.1);
    }

    #[test]
    fn wilcoxon_normal_and_exact_agree_roughly_at_boundary() {
        let ranks: Vec<f64> = (1..=25).map(f64::from).collect();
        let t = 100.0;
        let exact = wilcoxon_exact_p(&ranks, t);
        let approx = wilcoxon_normal_p(&ranks, t);
        assert!((exact - approx).abs() < 0.005, "{exact} vs {approx}");
    }

    #[test]
    fn friedman_hand_case() {
        let out = friedman(array![[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]].view(), 0.01).unwrap();
        assert_abs_diff_eq!(out.statistic, 4.0, epsilon = 1e-12);
        assert_eq!(out.degrees_of_freedom, Some(2));
        assert_abs_diff_eq!(out.p_value, (-2.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(out.p_value, 0.135335, epsilon = 1e-6);
    }

    #[test]
    fn friedman_all_tied() {
        let out = friedman(Array2::from_elem((4, 5), 0.7).view(), 0.01).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert_eq!(out.p_value, 1.0);
        assert!(!out.significant);
    }

    #[test]
    fn friedman_dominant_treatment() {
        let rows = Array2::from_shape_fn((8, 3), |(i, j)| j as f64 + i as f64 * 10.0);
        let out = friedman(rows.view(), 0.01).unwrap();
        assert_abs_diff_eq!(out.statistic, 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.p_value, (-8.0f64).exp(), epsilon = 1e-12);
        assert!(out.significant);
    }

    #[test]
    fn friedman_tie_correction() {
        // Blocks [1,1,2] and [1,2,3]: ranks [1.5,1.5,3] and [1,2,3];
        // R = [2.5, 3.5, 6]; raw = 12/24 * 54.5 - 24 = 3.25;
        // ties: one group of 2 -> 6; correction = 1 - 6/(2*3*8) = 0.875.
        let out = friedman(array![[1.0, 1.0, 2.0], [1.0, 2.0, 3.0]].view(), 0.01).unwrap();
        assert_abs_diff_eq!(out.statistic, 3.25 / 0.875, epsilon = 1e-12);
    }

    #[test]
    fn friedman_shape_errors() {
        assert!(friedman(Array2::zeros((3, 2)).view(), 0.01).is_err());
        assert!(friedman(Array2::zeros((1, 4)).view(), 0.01).is_err());
    }

    #[test]
    fn significance_threshold() {
        assert!(is_significant(0.0007, 0.01));
        assert!(is_significant(0.0001, 0.01));
        assert!(!is_significant(0.3228, 0.01));
        assert!(!is_significant(0.01, 0.01));
    }

    #[test]
    fn chi_square_closed_forms() {
        assert_abs_diff_eq!(
            chi_square_sf(2.0, 2).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            chi_square_sf(4.0, 2).unwrap(),
            (-2.0f64).exp(),
            epsilon = 1e-12
        );
        assert_eq!(chi_square_sf(0.0, 5).unwrap(), 1.0);
        assert!(chi_square_sf(-1.0, 2).is_err());
        assert!(chi_square_sf(1.0, 0).is_err());
    }

    /// Oracle for even dof: Q(k, x/2) = e^{-x/2} Σ_{i<k} (x/2)^i / i!.
    fn chi_square_sf_even(x: f64, dof: usize) -> f64 {
        let half = x / 2.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for i in 1..dof / 2 {
            term *= half / i as f64;
            sum += term;
        }
        (-half).exp() * sum
    }

    #[test]
    fn chi_square_matches_poisson_sum_for_even_dof() {
        for dof in [2, 4, 6, 12, 20] {
            for x in [0.1, 1.0, 3.3, 10.0, 25.0, 60.0] {
                assert_abs_diff_eq!(
                    chi_square_sf(x, dof).unwrap(),
                    chi_square_sf_even(x, dof),
                    epsilon = 1e-10
                );
            }
        }
    }

    /// Oracle: 1 - Φ(z) via the Maclaurin series of erf, valid for modest |z|.
    fn normal_sf_series(z: f64) -> f64 {
        let x = z / std::f64::consts::SQRT_2;
        let mut term = x;
        let mut sum = x;
        for n in 1..200 {
            term *= -x * x / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        0.5 - sum / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn normal_sf_values() {
        assert_eq!(normal_sf(0.0), 0.5);
        assert_abs_diff_eq!(normal_sf(1.959964), 0.025, epsilon = 1e-6);
        for z in [-3.0, -1.2, -0.3, 0.4, 1.0, 1.959964, 2.5, 3.5] {
            assert_abs_diff_eq!(normal_sf(z), normal_sf_series(z), epsilon = 1e-12);
            assert_abs_diff_eq!(normal_sf(z) + normal_sf(-z), 1.0, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn exact_p_equals_enumeration(diffs in prop::collection::vec((1u8..6, any::<bool>()), 1..=12)) {
            let d: Vec<f64> = diffs.iter().map(|(m, s)| if *s { *m as f64 } else { -(*m as f64) }).collect();
            let sums = signed_rank_sums(&d, &vec![0.0; d.len()]).unwrap();
            let out = wilcoxon_signed_rank(&d, &vec![0.0; d.len()], 0.01).unwrap();
            prop_assert!((out.p_value - brute_force_p(&sums.ranks, sums.t_plus)).abs() <= 1e-12);
        }

        #[test]
        fn wilcoxon_swap_symmetry(pairs in prop::collection::vec((-5i32..5, -5i32..5), 1..20)) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            let ab = signed_rank_sums(&a, &b).unwrap();
            let ba = signed_rank_sums(&b, &a).unwrap();
            prop_assert_eq!(ab.t_plus, ba.t_minus);
            prop_assert_eq!(ab.t_minus, ba.t_plus);
            let p1 = wilcoxon_signed_rank(&a, &b, 0.01).unwrap().p_value;
            let p2 = wilcoxon_signed_rank(&b, &a, 0.01).unwrap().p_value;
            prop_assert_eq!(p1, p2);
        }

        #[test]
        fn wilcoxon_scale_invariant(d in prop::collection::vec(-100.0f64..100.0, 1..30), c in 0.01f64..100.0) {
            let zeros = vec![0.0; d.len()];
            let scaled: Vec<f64> = d.iter().map(|v| v * c).collect();
            let a = wilcoxon_signed_rank(&d, &zeros, 0.01).unwrap();
            let b = wilcoxon_signed_rank(&scaled, &zeros, 0.01).unwrap();
            prop_assert_eq!(a.statistic, b.statistic);
            prop_assert_eq!(a.p_value, b.p_value);
        }

        #[test]
        fn friedman_monotone_invariant(vals in prop::collection::vec(0.0f64..10.0, 12..=12)) {
            let m = Array2::from_shape_vec((3, 4), vals).unwrap();
            let t = m.mapv(|v| (v * 0.5).exp() + 3.0);
            let a = friedman(m.view(), 0.01).unwrap();
            let b = friedman(t.view(), 0.01).unwrap();
            prop_assert!((a.statistic - b.statistic).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a.p_value));
        }
    }
}
