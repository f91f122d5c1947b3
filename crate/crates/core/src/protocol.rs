//! Queries, server answers, server pairing and the privacy audit.
//!
//! The user draws `b` uniform on `{0,1}^M` and a sign `s` uniform on `{±1}`
//! and sends `q1 = s·b` to one server and `q2 = -s·(b ⊕ e_i)` to the other.
//! Since `b_m - (b ⊕ e_i)_m` is zero off `i` and `2b_i - 1` at `i`, the
//! answers satisfy `A1 + A2 = s·(2b_i - 1)·W_i` in F_p. The user knows both
//! factors, so it strips the combined sign; each query alone is independent
//! of `i`.
//!
//! Message indices are 0-based throughout the API.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ffield::{Message, MessageStore};
use crate::rates::{self, Partition};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// The query vectors for the two server roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPair {
    pub sign: Sign,
    pub b: Vec<bool>,
    /// Private index, user side only.
    pub index: usize,
    pub q1: Vec<i64>,
    pub q2: Vec<i64>,
}

impl QueryPair {
    /// Builds the pair from explicit randomness.
    pub fn from_parts(b: Vec<bool>, sign: Sign, index: usize) -> Result<Self> {
        if index >= b.len() {
            return Err(Error::IndexOutOfRange { index, count: b.len() });
        }
        let s = sign.value();
        let q1 = b.iter().map(|&bit| s * bit as i64).collect();
        let q2 = b
            .iter()
            .enumerate()
            .map(|(m, &bit)| -s * (bit ^ (m == index)) as i64)
            .collect();
        Ok(Self { sign, b, index, q1, q2 })
    }

    /// Sign `s·(2b_i - 1)` carried by `A1 + A2`.
    pub fn sum_sign(&self) -> Sign {
        match (self.sign, self.b[self.index]) {
            (Sign::Plus, true) | (Sign::Minus, false) => Sign::Plus,
            _ => Sign::Minus,
        }
    }

    pub fn query(&self, role: Role) -> &[i64] {
        match role {
            Role::First => &self.q1,
            Role::Second => &self.q2,
        }
    }
}

/// Draws `b` and `s` from the seed's query stream and builds the pair.
pub fn make_queries(seed: u64, messages: usize, index: usize) -> Result<QueryPair> {
    if index >= messages {
        return Err(Error::IndexOutOfRange { index, count: messages });
    }
    let mut rng = seed::rng(seed, seed::tag::QUERIES);
    let b = (0..messages).map(|_| rng.random::<bool>()).collect();
    let sign = if rng.random::<bool>() { Sign::Plus } else { Sign::Minus };
    QueryPair::from_parts(b, sign, index)
}

/// Which of the two queries a server receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerAnswer {
    pub server: usize,
    pub payload: Message,
}

/// A server's answer: the F_p combination selected by its query.
pub fn answer(store: &MessageStore, server: usize, query: &[i64]) -> Result<ServerAnswer> {
    if let Some(&bad) = query.iter().find(|q| !(-1..=1).contains(*q)) {
        return Err(Error::InvalidQueryEntry(bad));
    }
    Ok(ServerAnswer { server, payload: store.linear_combine(query)? })
}

/// Maps the decoded `±W_i` back to `W_i`; pass [`QueryPair::sum_sign`].
pub fn recover_message(decoded_sum: &Message, sign: Sign) -> Message {
    match sign {
        Sign::Plus => decoded_sum.clone(),
        Sign::Minus => decoded_sum.negate(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    Awgn,
    Fading,
}

impl std::str::FromStr for ChannelMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "awgn" | "nonfading" => Ok(ChannelMode::Awgn),
            "fading" => Ok(ChannelMode::Fading),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChannelMode::Awgn => "awgn",
            ChannelMode::Fading => "fading",
        })
    }
}

/// Assignment of servers to query roles.
///
/// Non-fading plans pair server `2l` with `2l+1`; `first[l]` and `second[l]`
/// form pair `l`. Fading plans hold the optimized groups `S1`, `S2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingPlan {
    pub mode: ChannelMode,
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub unused: Option<usize>,
}

impl PairingPlan {
    pub fn servers(&self) -> usize {
        self.first.len() + self.second.len() + self.unused.is_some() as usize
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.first.iter().copied().zip(self.second.iter().copied())
    }

    pub fn role_of(&self, server: usize) -> Option<Role> {
        if self.first.contains(&server) {
            Some(Role::First)
        } else if self.second.contains(&server) {
            Some(Role::Second)
        } else {
            None
        }
    }

    pub fn from_partition(partition: &Partition) -> Self {
        Self {
            mode: ChannelMode::Fading,
            first: partition.first.clone(),
            second: partition.second.clone(),
            unused: partition.unused.first().copied(),
        }
    }
}

/// Splits `N` servers into the two query roles. The fading plan uses
/// [`rates::optimize_partition`] on `h` at power `power`.
pub fn plan_servers(
    servers: usize,
    mode: ChannelMode,
    h: Option<&[f64]>,
    power: f64,
) -> Result<PairingPlan> {
    if servers < 2 {
        return Err(Error::TooSmall { what: "N", min: 2, got: servers });
    }
    match mode {
        ChannelMode::Awgn => {
            let pairs = servers / 2;
            Ok(PairingPlan {
                mode,
                first: (0..pairs).map(|l| 2 * l).collect(),
                second: (0..pairs).map(|l| 2 * l + 1).collect(),
                unused: (servers % 2 == 1).then_some(servers - 1),
            })
        }
        ChannelMode::Fading => {
            let h = h.filter(|h| h.len() == servers).ok_or(Error::MissingChannel(servers))?;
            Ok(PairingPlan::from_partition(&rates::optimize_partition(h, power)?))
        }
    }
}

/// Largest `M` the exhaustive audit accepts.
pub const EXHAUSTIVE_AUDIT_LIMIT: usize = 12;

/// Exact distribution of what one server role observes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleView {
    /// Largest total-variation distance between the query PMFs of two
    /// private indices.
    pub max_tv: f64,
    /// Number of distinct query vectors observed.
    pub support: usize,
    /// Every zero/non-zero pattern of the query has mass exactly `2^-M`
    /// for every index.
    pub pattern_uniform: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub messages: usize,
    /// `None` for exact enumeration, else draws per private index.
    pub draws_per_index: Option<u64>,
    pub roles: [RoleView; 2],
    /// Tolerance on `max_tv` implied by the sample size (0 when exact).
    pub tv_bound: f64,
}

impl PrivacyReport {
    pub fn max_tv(&self) -> f64 {
        self.roles[0].max_tv.max(self.roles[1].max_tv)
    }

    pub fn private(&self) -> bool {
        self.max_tv() <= self.tv_bound
    }
}

/// Builds the two queries from `(b, s, i)`.
pub trait ViewBuilder: Sync {
    fn build(&self, b: &[bool], sign: Sign, index: usize) -> [Vec<i64>; 2];
}

/// The scheme's own query construction.
#[derive(Debug, Clone, Copy, Default)]
pub struct HonestQueries;

impl ViewBuilder for HonestQueries {
    fn build(&self, b: &[bool], sign: Sign, index: usize) -> [Vec<i64>; 2] {
        let q = QueryPair::from_parts(b.to_vec(), sign, index).expect("index within M");
        [q.q1, q.q2]
    }
}

/// Negative control: the second server receives `e_i` in the clear.
#[derive(Debug, Clone, Copy, Default)]
pub struct LeakyQueries;

impl ViewBuilder for LeakyQueries {
    fn build(&self, b: &[bool], sign: Sign, index: usize) -> [Vec<i64>; 2] {
        let s = sign.value();
        let q1 = b.iter().map(|&bit| s * bit as i64).collect();
        let q2 = (0..b.len()).map(|m| (m == index) as i64).collect();
        [q1, q2]
    }
}

fn encode_query(q: &[i64]) -> u64 {
    q.iter().fold(0u64, |acc, &x| acc * 3 + (x + 1) as u64)
}

fn pattern_of(code: u64, m: usize) -> u64 {
    let mut rest = code;
    let mut pattern = 0u64;
    for bit in 0..m {
        if rest % 3 != 1 {
            pattern |= 1 << bit;
        }
        rest /= 3;
    }
    pattern
}

type Pmf = BTreeMap<u64, u64>;

/// Total-variation distance between two count tables with equal totals.
fn tv_counts(a: &Pmf, b: &Pmf, total_a: f64, total_b: f64) -> f64 {
    let mut diff = 0.0;
    for (k, &ca) in a {
        let cb = b.get(k).copied().unwrap_or(0);
        diff += (ca as f64 / total_a - cb as f64 / total_b).abs();
    }
    for (k, &cb) in b {
        if !a.contains_key(k) {
            diff += cb as f64 / total_b;
        }
    }
    diff / 2.0
}

/// Exact integer TV numerator: `sum |a - b|` over the union of supports.
fn l1_counts(a: &Pmf, b: &Pmf) -> u64 {
    let mut diff = 0;
    for (k, &ca) in a {
        diff += ca.abs_diff(b.get(k).copied().unwrap_or(0));
    }
    for (k, &cb) in b {
        if !a.contains_key(k) {
            diff += cb;
        }
    }
    diff
}

fn role_view_exact(pmfs: &[Pmf], m: usize, total: u64) -> RoleView {
    let mut max_l1 = 0u64;
    for i in 0..pmfs.len() {
        for j in i + 1..pmfs.len() {
            max_l1 = max_l1.max(l1_counts(&pmfs[i], &pmfs[j]));
        }
    }
    let pattern_uniform = pmfs.iter().all(|pmf| {
        let mut patterns: BTreeMap<u64, u64> = BTreeMap::new();
        for (&code, &c) in pmf {
            *patterns.entry(pattern_of(code, m)).or_default() += c;
        }
        // 2^M patterns, each carrying 2 of the 2^(M+1) realizations
        patterns.len() == 1 << m && patterns.values().all(|&c| c == 2)
    });
    let support = pmfs.iter().map(|p| p.len()).max().unwrap_or(0);
    RoleView { max_tv: max_l1 as f64 / (2 * total) as f64, support, pattern_uniform }
}

/// Enumerates all `2^(M+1)` realizations of `(b, s)` for each private index
/// and compares the per-index query distributions seen by each role.
pub fn verify_privacy(messages: usize, builder: &dyn ViewBuilder) -> Result<PrivacyReport> {
    if messages == 0 {
        return Err(Error::TooSmall { what: "M", min: 1, got: 0 });
    }
    if messages > EXHAUSTIVE_AUDIT_LIMIT {
        return Err(Error::AuditTooLarge { m: messages, max: EXHAUSTIVE_AUDIT_LIMIT });
    }
    let m = messages;
    let total = 1u64 << (m + 1);
    let mut pmfs: [Vec<Pmf>; 2] = [vec![Pmf::new(); m], vec![Pmf::new(); m]];
    let mut b = vec![false; m];
    for i in 0..m {
        for bits in 0..(1u64 << m) {
            for (k, slot) in b.iter_mut().enumerate() {
                *slot = bits >> k & 1 == 1;
            }
            for sign in [Sign::Plus, Sign::Minus] {
                let views = builder.build(&b, sign, i);
                for (pmf, view) in pmfs.iter_mut().zip(&views) {
                    *pmf[i].entry(encode_query(view)).or_default() += 1;
                }
            }
        }
    }
    Ok(PrivacyReport {
        messages: m,
        draws_per_index: None,
        roles: [role_view_exact(&pmfs[0], m, total), role_view_exact(&pmfs[1], m, total)],
        tv_bound: 0.0,
    })
}

/// Sampling tolerance for an empirical TV distance: `1/2 sqrt(K / n)`, the
/// Cauchy-Schwarz bound on the expected TV between an `n`-sample empirical
/// PMF over `K` outcomes and its mean.
pub fn sampling_tv_bound(support: usize, draws: u64) -> f64 {
    0.5 * (support as f64 / draws as f64).sqrt()
}

/// Monte Carlo audit: `draws` samples of `(b, s)` per private index. Each
/// index's empirical PMF is compared with the PMF pooled over all indices.
pub fn verify_privacy_sampled(
    messages: usize,
    draws: u64,
    seed: u64,
    builder: &dyn ViewBuilder,
) -> Result<PrivacyReport> {
    if messages == 0 {
        return Err(Error::TooSmall { what: "M", min: 1, got: 0 });
    }
    if messages > 40 {
        return Err(Error::InvalidConfig("sampled audit supports M <= 40".into()));
    }
    if draws == 0 {
        return Err(Error::TooSmall { what: "draws", min: 1, got: 0 });
    }
    let m = messages;
    let per_index: Vec<[Pmf; 2]> = crate::exec::map_indexed(m as u64, Default::default(), |i| {
        let mut rng = seed::rng(seed::child(seed, i), seed::tag::QUERIES);
        let mut pmf = [Pmf::new(), Pmf::new()];
        let mut b = vec![false; m];
        for _ in 0..draws {
            for slot in b.iter_mut() {
                *slot = rng.random();
            }
            let sign = if rng.random::<bool>() { Sign::Plus } else { Sign::Minus };
            let views = builder.build(&b, sign, i as usize);
            for role in 0..2 {
                *pmf[role].entry(encode_query(&views[role])).or_default() += 1;
            }
        }
        pmf
    });
    let mut roles = Vec::with_capacity(2);
    let mut bound: f64 = 0.0;
    for role in 0..2 {
        let mut pooled = Pmf::new();
        for pmf in &per_index {
            for (&k, &c) in &pmf[role] {
                *pooled.entry(k).or_default() += c;
            }
        }
        let pooled_total = (draws * m as u64) as f64;
        let max_tv = per_index
            .iter()
            .map(|pmf| tv_counts(&pmf[role], &pooled, draws as f64, pooled_total))
            .fold(0.0, f64::max);
        let support = pooled.len();
        bound = bound.max(sampling_tv_bound(support, draws));
        roles.push(RoleView { max_tv, support, pattern_uniform: false });
    }
    let roles: [RoleView; 2] = roles.try_into().expect("two roles");
    Ok(PrivacyReport { messages: m, draws_per_index: Some(draws), roles, tv_bound: bound })
}
