//! Closed-form rates for the Gaussian MAC PIR problem.
//!
//! All rates are in bits per real channel use with unit noise variance. `P`
//! is the per-server power in linear units.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn log2_plus(x: f64) -> f64 {
    if x > 1.0 {
        x.log2()
    } else {
        0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

fn check_coeffs(h: &[f64], a: &[i64]) -> Result<Vec<f64>> {
    if h.len() != a.len() {
        return Err(Error::LengthMismatch { expected: h.len(), found: a.len() });
    }
    if a.iter().all(|&x| x == 0) {
        return Err(Error::ZeroCoefficients);
    }
    Ok(a.iter().map(|&x| x as f64).collect())
}

/// Pair count `floor(N/2)`.
pub fn pair_count(servers: usize) -> usize {
    servers / 2
}

fn check_servers(servers: usize) -> Result<()> {
    if servers < 2 {
        return Err(Error::TooSmall { what: "N", min: 2, got: servers });
    }
    Ok(())
}

/// Computation rate of `sum a_k x_k` at a given decoder scale `alpha`.
pub fn cf_rate_at(h: &[f64], a: &[i64], power: f64, alpha: f64) -> Result<f64> {
    let a = check_coeffs(h, a)?;
    Ok(0.5 * log2_plus(power / effective_noise(h, &a, power, alpha)))
}

// alpha^2 + P ||alpha h - a||^2
fn effective_noise(h: &[f64], a: &[f64], power: f64, alpha: f64) -> f64 {
    let mismatch: f64 = h.iter().zip(a).map(|(hk, ak)| (alpha * hk - ak).powi(2)).sum();
    alpha * alpha + power * mismatch
}

/// Computation rate maximized numerically over the decoder scale.
///
/// The effective noise `alpha^2 + P||alpha h - a||^2` is a convex quadratic
/// in `alpha`, so golden-section search on it is exact up to tolerance. By
/// Cauchy-Schwarz its vertex lies in `|alpha| <= P||h|| ||a|| / (1 + P||h||^2)`,
/// which the bracket below covers with a unit margin.
pub fn cf_rate_numeric(h: &[f64], a: &[i64], power: f64) -> Result<f64> {
    let af = check_coeffs(h, a)?;
    let hn = norm_sq(h).sqrt();
    let an = norm_sq(&af).sqrt();
    let reach = 1.0 + power * hn * an / (1.0 + power * hn * hn);
    let noise = |alpha: f64| effective_noise(h, &af, power, alpha);

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (-reach, reach);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (noise(x1), noise(x2));
    while hi - lo > 1e-12 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = noise(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = noise(x2);
        }
    }
    let best = noise(0.5 * (lo + hi));
    Ok(0.5 * log2_plus(power / best))
}

/// MMSE decoder scale `P h^T a / (1 + P ||h||^2)`.
pub fn alpha_mmse(h: &[f64], a: &[i64], power: f64) -> Result<f64> {
    let af = check_coeffs(h, a)?;
    Ok(power * dot(h, &af) / (1.0 + power * norm_sq(h)))
}

/// Computation rate at the MMSE scale, in closed form.
pub fn cf_rate_closed(h: &[f64], a: &[i64], power: f64) -> Result<f64> {
    let af = check_coeffs(h, a)?;
    let hh = norm_sq(h);
    let aa = norm_sq(&af);
    let ha = dot(h, &af);
    let num = 1.0 + power * hh;
    let den = aa + power * (aa * hh - ha * ha);
    Ok(0.5 * log2_plus(num / den))
}

/// Whether `a` lies in the region `||a||^2 <= 1 + P||h||^2` where the
/// computation rate can be positive.
pub fn in_search_domain(h: &[f64], a: &[i64], power: f64) -> bool {
    let aa: f64 = a.iter().map(|&x| (x * x) as f64).sum();
    aa <= 1.0 + power * norm_sq(h)
}

/// Capacity of classical PIR with `N` servers and `M` messages.
pub fn pir_capacity(servers: usize, messages: usize) -> Result<f64> {
    check_servers(servers)?;
    if messages == 0 {
        return Err(Error::TooSmall { what: "M", min: 1, got: 0 });
    }
    let inv = 1.0 / servers as f64;
    Ok((1.0 - inv) / (1.0 - inv.powi(messages as i32)))
}

/// Sum capacity of the symmetric `N`-user AWGN MAC.
pub fn mac_sum_capacity(servers: usize, power: f64) -> f64 {
    0.5 * (1.0 + servers as f64 * power).log2()
}

/// Separation baseline: PIR capacity times the MAC sum capacity.
pub fn separation_rate(servers: usize, messages: usize, power: f64) -> Result<f64> {
    Ok(pir_capacity(servers, messages)? * mac_sum_capacity(servers, power))
}

/// Lattice-based joint scheme on the non-fading MAC:
/// `1/2 log+(1/2 + floor(N/2)^2 P)`.
pub fn joint_rate_awgn(servers: usize, power: f64) -> Result<f64> {
    check_servers(servers)?;
    let pairs = pair_count(servers) as f64;
    Ok(0.5 * log2_plus(0.5 + pairs * pairs * power))
}

/// Which scheme attains the better rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Joint,
    Separation,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Joint => "joint",
            Scheme::Separation => "separation",
        })
    }
}

/// Relative slack under which two rates count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Picks the larger of the separation and joint rates; ties go to joint.
pub fn best_rate(servers: usize, messages: usize, power: f64) -> Result<(Scheme, f64)> {
    let sep = separation_rate(servers, messages, power)?;
    let joint = joint_rate_awgn(servers, power)?;
    Ok(pick(sep, joint))
}

fn pick(sep: f64, joint: f64) -> (Scheme, f64) {
    if joint >= sep - TIE_TOLERANCE * sep.abs().max(1.0) {
        (Scheme::Joint, joint)
    } else {
        (Scheme::Separation, sep)
    }
}

/// Two-server fading rate with sign-matched coefficients.
pub fn joint_rate_fading2(h: [f64; 2], power: f64) -> f64 {
    let num = 1.0 + power * (h[0] * h[0] + h[1] * h[1]);
    let den = 2.0 + power * (h[0].abs() - h[1].abs()).powi(2);
    0.5 * log2_plus(num / den)
}

/// `a_k = sign(h_k)`, with `h_k = 0` mapped to `+1`.
pub fn sign_match_coeffs(h: &[f64]) -> Vec<i64> {
    h.iter().map(|&x| if x < 0.0 { -1 } else { 1 }).collect()
}

/// MISO capacity with per-antenna power constraint: `1/2 log(1 + P (sum h)^2)`.
pub fn miso_capacity(h: &[f64], power: f64) -> f64 {
    let s: f64 = h.iter().sum();
    0.5 * (1.0 + power * s * s).log2()
}

/// Gap between the non-fading MISO capacity `1/2 log(1 + N^2 P)` and the
/// joint rate. `None` when the joint rate is zero.
pub fn capacity_gap(servers: usize, power: f64) -> Result<Option<f64>> {
    let joint = joint_rate_awgn(servers, power)?;
    if joint <= 0.0 {
        return Ok(None);
    }
    let n = servers as f64;
    Ok(Some(0.5 * (1.0 + n * n * power).log2() - joint))
}

/// A choice of the two equal-size server groups for the fading scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Servers queried with the first query (0-based, ascending).
    pub first: Vec<usize>,
    /// Servers queried with the second query.
    pub second: Vec<usize>,
    /// Servers left silent.
    pub unused: Vec<usize>,
    /// Aggregate gains `(sum_{S1} h, sum_{S2} h)`.
    pub gains: [f64; 2],
    pub rate: f64,
    /// True when the heuristic search was used and optimality is not certified.
    pub heuristic: bool,
}

/// Largest `N` searched exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 16;

fn build_partition(h: &[f64], power: f64, first: Vec<usize>, second: Vec<usize>, heuristic: bool) -> Partition {
    let gains = [first.iter().map(|&i| h[i]).sum(), second.iter().map(|&i| h[i]).sum()];
    let unused = (0..h.len()).filter(|i| !first.contains(i) && !second.contains(i)).collect();
    Partition { rate: joint_rate_fading2(gains, power), first, second, unused, gains, heuristic }
}

/// Chooses disjoint groups `S1`, `S2` of size `floor(N/2)` maximizing the
/// two-server fading rate of the aggregate gains.
///
/// Exhaustive for `N <= 16`, in lexicographic order of `(S1, S2)` with `S1`
/// holding the smallest index of `S1 ∪ S2`; the first maximizer wins.
/// Larger `N` falls back to [`heuristic_partition`].
pub fn optimize_partition(h: &[f64], power: f64) -> Result<Partition> {
    check_servers(h.len())?;
    if h.len() > EXHAUSTIVE_LIMIT {
        return Ok(heuristic_partition(h, power));
    }
    let n = h.len();
    let m = pair_count(n);
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for_each_combination(n, m, &mut |s1| {
        let rest: Vec<usize> = (0..n).filter(|i| !s1.contains(i)).collect();
        for_each_combination(rest.len(), m, &mut |pick| {
            let s2: Vec<usize> = pick.iter().map(|&j| rest[j]).collect();
            // each unordered split once
            if s2[0] < s1[0] {
                return;
            }
            let g1: f64 = s1.iter().map(|&i| h[i]).sum();
            let g2: f64 = s2.iter().map(|&i| h[i]).sum();
            let r = joint_rate_fading2([g1, g2], power);
            if best.as_ref().is_none_or(|b| r > b.0) {
                best = Some((r, s1.to_vec(), s2));
            }
        });
    });
    let (_, s1, s2) = best.expect("at least one split exists for N >= 2");
    Ok(build_partition(h, power, s1, s2, false))
}

/// Visits all `k`-subsets of `0..n` in lexicographic order.
fn for_each_combination(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < n - k + i {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Greedy seeds followed by swap local search. Not certified optimal.
///
/// Seeds: the `2m` largest gains (and the `2m` most negative) split by greedy
/// differencing in descending order, plus the `m` largest against the `m`
/// most negative. Local search then swaps single servers between the two
/// groups and the unused pool while the rate improves.
pub fn heuristic_partition(h: &[f64], power: f64) -> Partition {
    let n = h.len();
    let m = pair_count(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| h[b].total_cmp(&h[a]).then(a.cmp(&b)));

    let differencing = |picked: &[usize], sign: f64| {
        let (mut s1, mut s2) = (Vec::new(), Vec::new());
        let (mut g1, mut g2) = (0.0, 0.0);
        for &i in picked {
            let to_first = s2.len() == m || (s1.len() < m && sign * g1 <= sign * g2);
            if to_first {
                s1.push(i);
                g1 += h[i];
            } else {
                s2.push(i);
                g2 += h[i];
            }
        }
        (s1, s2)
    };
    let top: Vec<usize> = order[..2 * m].to_vec();
    let bottom: Vec<usize> = order.iter().rev().take(2 * m).copied().collect();
    let seeds = [
        differencing(&top, 1.0),
        differencing(&bottom, -1.0),
        (order[..m].to_vec(), order[n - m..].to_vec()),
    ];

    let mut best: Option<Partition> = None;
    for (s1, s2) in seeds {
        let p = local_search(h, power, s1, s2);
        if best.as_ref().is_none_or(|b| p.rate > b.rate) {
            best = Some(p);
        }
    }
    best.expect("three seeds")
}

fn local_search(h: &[f64], power: f64, mut s1: Vec<usize>, mut s2: Vec<usize>) -> Partition {
    let n = h.len();
    let rate_of = |a: &[usize], b: &[usize]| {
        joint_rate_fading2([a.iter().map(|&i| h[i]).sum(), b.iter().map(|&i| h[i]).sum()], power)
    };
    let mut current = rate_of(&s1, &s2);
    loop {
        let mut improved = false;
        let unused: Vec<usize> = (0..n).filter(|i| !s1.contains(i) && !s2.contains(i)).collect();
        'outer: for a in 0..s1.len() {
            for b in 0..s2.len() {
                // cross swap changes nothing for the symmetric objective; try
                // exchanging with the unused pool and moving between groups.
                for &u in &unused {
                    for group in 0..2 {
                        let (mut t1, mut t2) = (s1.clone(), s2.clone());
                        if group == 0 {
                            t1[a] = u;
                        } else {
                            t2[b] = u;
                        }
                        let r = rate_of(&t1, &t2);
                        if r > current + 1e-15 {
                            s1 = t1;
                            s2 = t2;
                            current = r;
                            improved = true;
                            break 'outer;
                        }
                    }
                }
                let (mut t1, mut t2) = (s1.clone(), s2.clone());
                std::mem::swap(&mut t1[a], &mut t2[b]);
                let r = rate_of(&t1, &t2);
                if r > current + 1e-15 {
                    s1 = t1;
                    s2 = t2;
                    current = r;
                    improved = true;
                    break 'outer;
                }
            }
        }
        if !improved {
            break;
        }
    }
    s1.sort_unstable();
    s2.sort_unstable();
    if s2[0] < s1[0] {
        std::mem::swap(&mut s1, &mut s2);
    }
    build_partition(h, power, s1, s2, true)
}

/// Effective noise variance of the paired sum decoder,
/// `α² σ²_z' + (1-α)² 2P` with `σ²_z' = floor(N/2)^-2`.
pub fn equivalent_noise_variance(pairs: usize, power: f64, alpha: f64) -> f64 {
    let sz = 1.0 / (pairs * pairs) as f64;
    alpha * alpha * sz + (1.0 - alpha).powi(2) * 2.0 * power
}

/// Minimizer `2P / (σ²_z' + 2P)` of [`equivalent_noise_variance`].
pub fn alpha_opt(pairs: usize, power: f64) -> f64 {
    let sz = 1.0 / (pairs * pairs) as f64;
    2.0 * power / (sz + 2.0 * power)
}

/// Minimum `2P σ²_z' / (2P + σ²_z')`.
pub fn equivalent_noise_variance_opt(pairs: usize, power: f64) -> f64 {
    let sz = 1.0 / (pairs * pairs) as f64;
    2.0 * power * sz / (2.0 * power + sz)
}

/// All rate figures at one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub snr_db: f64,
    pub power: f64,
    /// `None` where the baseline is undefined (fading channels).
    pub separation: Option<f64>,
    pub joint: f64,
    pub miso_capacity: f64,
    /// `None` when the joint rate is zero.
    pub gap: Option<f64>,
    pub chosen: Scheme,
}

impl RateReport {
    /// Non-fading report for `N` servers and `M` messages at power `P`.
    pub fn awgn(servers: usize, messages: usize, power: f64) -> Result<Self> {
        let separation = separation_rate(servers, messages, power)?;
        let joint = joint_rate_awgn(servers, power)?;
        let (chosen, _) = pick(separation, joint);
        Ok(Self {
            snr_db: power_to_db(power),
            power,
            separation: Some(separation),
            joint,
            miso_capacity: miso_capacity(&vec![1.0; servers], power),
            gap: capacity_gap(servers, power)?,
            chosen,
        })
    }
}

pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn power_to_db(power: f64) -> f64 {
    10.0 * power.log10()
}

/// Power at which the joint rate equals `rate` bits (inverse of
/// [`joint_rate_awgn`] on its positive branch).
pub fn power_for_joint_rate(servers: usize, rate: f64) -> Result<f64> {
    check_servers(servers)?;
    let pairs = pair_count(servers) as f64;
    Ok(((2.0 * rate).exp2() - 0.5) / (pairs * pairs))
}
