//! Two-sample tests and small regression helpers.

use statrs::distribution::ContinuousCDF;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("sample {0} is empty")]
    Empty(&'static str),
    #[error("samples contain a non-finite value")]
    NonFinite,
    #[error("x and y differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two points with distinct x")]
    Degenerate,
    #[error("permutation test limited to {max} pooled observations, got {got}")]
    TooLarge { max: usize, got: usize },
}

fn check(a: &[f64], b: &[f64]) -> Result<(), StatsError> {
    if a.is_empty() {
        return Err(StatsError::Empty("a"));
    }
    if b.is_empty() {
        return Err(StatsError::Empty("b"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Largest gap between the empirical CDFs, evaluated at every pooled point.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    check(a, b)?;
    let (a, b) = (sorted(a), sorted(b));
    let (n, m) = (a.len() as i64, b.len() as i64);
    // Integer gap |i*m - j*n| keeps D exact, so it is invariant under any
    // monotone relabelling of the data.
    let (mut i, mut j, mut gap) = (0usize, 0usize, 0i64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        gap = gap.max((i as i64 * m - j as i64 * n).abs());
    }
    Ok(gap as f64 / (n * m) as f64)
}

/// Kolmogorov survival function `Q(lambda) = P(K > lambda)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series converges quickly for small lambda.
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=6).map(|k| (((2 * k - 1) as f64).powi(2) * c).exp()).sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Asymptotic p-value with the usual small-sample correction of `lambda`.
pub fn ks_asymptotic_p(d: f64, n: usize, m: usize) -> f64 {
    let ne = (n * m) as f64 / (n + m) as f64;
    let sq = ne.sqrt();
    kolmogorov_q((sq + 0.12 + 0.11 / sq) * d)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    let d = ks_statistic(a, b)?;
    Ok(KsResult { statistic: d, p_value: ks_asymptotic_p(d, a.len(), b.len()) })
}

/// Exact `P(D >= d)` under the null for continuous data, by counting
/// monotone lattice paths from `(0, 0)` to `(n, m)` that stay strictly
/// inside the band `|i/n - j/m| < d`.
pub fn ks_exact_p(d: f64, n: usize, m: usize) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    let tol = 1e-9;
    let inside = |i: usize, j: usize| ((i as f64 / n as f64) - (j as f64 / m as f64)).abs() < d - tol;
    // paths[j] holds the count for the current i; f64 is exact well past
    // the sizes used here and only loses relative precision beyond that.
    let mut paths = vec![0.0f64; m + 1];
    for i in 0..=n {
        for j in 0..=m {
            paths[j] = if !inside(i, j) {
                0.0
            } else if i == 0 && j == 0 {
                1.0
            } else {
                let up = if i > 0 { paths[j] } else { 0.0 };
                let left = if j > 0 { paths[j - 1] } else { 0.0 };
                up + left
            };
        }
    }
    let total = binomial(n + m, n);
    (1.0 - paths[m] / total).clamp(0.0, 1.0)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub const MAX_PERMUTATION_N: usize = 20;

/// Exact permutation p-value of the KS statistic, enumerating every split
/// of the pooled sample (ties included). Limited to small samples.
pub fn ks_permutation_p(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let observed = ks_statistic(a, b)?;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let total = pooled.len();
    if total > MAX_PERMUTATION_N {
        return Err(StatsError::TooLarge { max: MAX_PERMUTATION_N, got: total });
    }
    let n = a.len();
    let (mut hits, mut count) = (0u64, 0u64);
    let (mut xa, mut xb) = (Vec::with_capacity(n), Vec::with_capacity(total - n));
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != n {
            continue;
        }
        xa.clear();
        xb.clear();
        for (k, &v) in pooled.iter().enumerate() {
            if mask >> k & 1 == 1 {
                xa.push(v);
            } else {
                xb.push(v);
            }
        }
        count += 1;
        if ks_statistic(&xa, &xb)? >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok(hits as f64 / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSumResult {
    /// Mann-Whitney U of the first sample.
    pub u: f64,
    pub p_value: f64,
    /// Whether `p_value` comes from the exact null distribution.
    pub exact: bool,
}

const EXACT_RANK_SUM_MAX: usize = 8;

/// Mann-Whitney rank-sum test, two-sided. Exact for small samples without
/// ties, otherwise normal approximation with tie and continuity corrections.
pub fn rank_sum(a: &[f64], b: &[f64]) -> Result<RankSumResult, StatsError> {
    check(a, b)?;
    let (n, m) = (a.len(), b.len());
    let mut pooled: Vec<(f64, bool)> =
        a.iter().map(|&v| (v, true)).chain(b.iter().map(|&v| (v, false))).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        rank_sum_a += avg * pooled[i..=j].iter().filter(|p| p.1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum_a - (n * (n + 1)) as f64 / 2.0;
    let (nf, mf) = (n as f64, m as f64);

    if n <= EXACT_RANK_SUM_MAX && m <= EXACT_RANK_SUM_MAX && tie_term == 0.0 {
        let dist = u_distribution(n, m);
        let total: f64 = dist.iter().sum();
        let k = u.round() as usize;
        let lower: f64 = dist[..=k].iter().sum::<f64>() / total;
        let upper: f64 = dist[k..].iter().sum::<f64>() / total;
        return Ok(RankSumResult { u, p_value: (2.0 * lower.min(upper)).min(1.0), exact: true });
    }

    let mean = nf * mf / 2.0;
    let big_n = nf + mf;
    let var = nf * mf / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    if var <= 0.0 {
        return Ok(RankSumResult { u, p_value: 1.0, exact: false });
    }
    let diff = (u - mean).abs() - 0.5;
    let z = diff.max(0.0) / var.sqrt();
    Ok(RankSumResult { u, p_value: (2.0 * normal_sf(z)).min(1.0), exact: false })
}

/// Number of arrangements giving each value of U, for sizes `n`, `m`.
fn u_distribution(n: usize, m: usize) -> Vec<f64> {
    // f[i][j][u]: arrangements of i a's and j b's with statistic u.
    let max_u = n * m;
    let mut f = vec![vec![vec![0.0; max_u + 1]; m + 1]; n + 1];
    for j in 0..=m {
        f[0][j][0] = 1.0;
    }
    for i in 1..=n {
        f[i][0][0] = 1.0;
        for j in 1..=m {
            for u in 0..=i * j {
                // Largest element is an `a` (beats all j b's) or a `b`.
                let with_a = if u >= j { f[i - 1][j][u - j] } else { 0.0 };
                f[i][j][u] = with_a + f[i][j - 1][u];
            }
        }
    }
    f[n][m].clone()
}

/// Standard normal survival function.
pub fn normal_sf(z: f64) -> f64 {
    statrs::distribution::Normal::standard().sf(z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len() as f64;
    if x.len() < 2 {
        return Err(StatsError::Degenerate);
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(StatsError::Degenerate);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(LinearFit { slope, intercept, r2: r_squared(y, |i| slope * x[i] + intercept) })
}

/// Coefficient of determination of predictions against observations.
pub fn r_squared(y: &[f64], predict: impl Fn(usize) -> f64) -> f64 {
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = y.iter().enumerate().map(|(i, v)| (v - predict(i)).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 { 1.0 } else { 0.0 }
    } else {
        1.0 - ss_res / ss_tot
    }
}

pub fn rmse(y: &[f64], predict: impl Fn(usize) -> f64) -> f64 {
    let ss: f64 = y.iter().enumerate().map(|(i, v)| (v - predict(i)).powi(2)).sum();
    (ss / y.len().max(1) as f64).sqrt()
}
