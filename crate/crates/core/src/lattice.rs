//! Nested lattice codes built with Construction A.
//!
//! The fine lattice is `Λ_f = β (p⁻¹ C + Zⁿ)` for a linear `[n, k]` code `C`
//! over F_p, nested in the coarse lattice `Λ_c = β Zⁿ`. The codebook is
//! `Λ_f ∩ V_c` with `V_c = [-β/2, β/2)ⁿ`; it has `p^k` points and the map from
//! messages `m ∈ F_p^k` to codewords `[β mG / p] mod Λ_c` is a group
//! homomorphism. With `β = sqrt(12 P)` the coarse lattice has second moment
//! `P`, so dithered codewords meet the power constraint on average.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ffield::PrimeField;
use crate::seed;
use crate::{Error, Result};

/// Default cap on `p^k`, the codebook size the decoder enumerates.
pub const ENUMERATION_CAP: u64 = 1_000_000;

const GENERATOR_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedLatticeCode {
    n: usize,
    k: usize,
    field: PrimeField,
    /// `k x n` generator over F_p, row-major.
    generator: Vec<Vec<u64>>,
    beta: f64,
    power: f64,
    /// Columns where the generator is invertible, and that inverse.
    pivots: Vec<usize>,
    pivot_inverse: Vec<Vec<u64>>,
}

impl NestedLatticeCode {
    /// Draws a random full-rank generator and scales the coarse lattice to
    /// second moment `power`.
    pub fn build(n: usize, p: u64, k: usize, power: f64, seed: u64) -> Result<Self> {
        Self::build_with_cap(n, p, k, power, seed, ENUMERATION_CAP)
    }

    pub fn build_with_cap(n: usize, p: u64, k: usize, power: f64, seed: u64, cap: u64) -> Result<Self> {
        PrimeField::new(p)?;
        if n == 0 {
            return Err(Error::TooSmall { what: "n", min: 1, got: 0 });
        }
        if k == 0 {
            return Err(Error::TooSmall { what: "k", min: 1, got: 0 });
        }
        if k > n {
            return Err(Error::InvalidConfig(format!("k = {k} exceeds n = {n}")));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidConfig(format!("power must be positive, got {power}")));
        }
        check_cap(p, k, cap)?;
        let mut rng = seed::rng(seed, seed::tag::CODE);
        for _ in 0..GENERATOR_ATTEMPTS {
            let generator: Vec<Vec<u64>> =
                (0..k).map(|_| (0..n).map(|_| rng.random_range(0..p)).collect()).collect();
            if let Ok(code) = Self::from_generator(generator, p, power) {
                return Ok(code);
            }
        }
        Err(Error::RankDeficient { k, n, p })
    }

    /// Uses an explicit generator; fails if it is rank deficient.
    pub fn from_generator(generator: Vec<Vec<u64>>, p: u64, power: f64) -> Result<Self> {
        let field = PrimeField::new(p)?;
        let k = generator.len();
        let n = generator.first().map_or(0, Vec::len);
        if k == 0 || n == 0 {
            return Err(Error::TooSmall { what: "generator size", min: 1, got: 0 });
        }
        if let Some(row) = generator.iter().find(|r| r.len() != n) {
            return Err(Error::LengthMismatch { expected: n, found: row.len() });
        }
        if generator.iter().flatten().any(|&g| g >= p) {
            return Err(Error::InvalidConfig("generator entries must be residues mod p".into()));
        }
        let (pivots, pivot_inverse) =
            pivot_inverse(&generator, field).ok_or(Error::RankDeficient { k, n, p })?;
        Ok(Self {
            n,
            k,
            field,
            generator,
            beta: (12.0 * power).sqrt(),
            power,
            pivots,
            pivot_inverse,
        })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Message symbols per codeword.
    pub fn block_len(&self) -> usize {
        self.k
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn generator(&self) -> &[Vec<u64>] {
        &self.generator
    }

    /// Number of codewords, `p^k`.
    pub fn size(&self) -> u64 {
        self.field.modulus().pow(self.k as u32)
    }

    /// Bits per channel use: `(k/n) log2 p`.
    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64 * (self.field.modulus() as f64).log2()
    }

    /// Second moment of `βZⁿ` per dimension: `β²/12`.
    pub fn second_moment(&self) -> f64 {
        self.beta * self.beta / 12.0
    }

    /// `G(βZⁿ) = σ² / V^{2/n} = 1/12` for every β.
    pub fn normalized_second_moment(&self) -> f64 {
        self.second_moment() / (self.beta.powi(self.n as i32)).powf(2.0 / self.n as f64)
    }

    /// `x mod Λ_c`, landing in `[-β/2, β/2)ⁿ`.
    pub fn mod_coarse(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.mod_scalar(v)).collect()
    }

    fn mod_scalar(&self, v: f64) -> f64 {
        let r = v - self.beta * (v / self.beta + 0.5).floor();
        // floor can leave r == β/2 through rounding
        if r >= self.beta / 2.0 {
            r - self.beta
        } else {
            r
        }
    }

    /// Codeword `mG mod p` of the underlying linear code.
    pub fn linear_codeword(&self, message: &[u64]) -> Result<Vec<u64>> {
        self.check_block(message)?;
        let f = self.field;
        Ok((0..self.n)
            .map(|j| {
                message
                    .iter()
                    .zip(&self.generator)
                    .fold(0, |acc, (&m, row)| f.add(acc, f.mul(m, row[j])))
            })
            .collect())
    }

    /// The lattice codeword in `Λ_f ∩ V_c` labelled by `message`.
    pub fn codeword(&self, message: &[u64]) -> Result<LatticePoint> {
        let c = self.linear_codeword(message)?;
        let step = self.beta / self.field.modulus() as f64;
        let v = self.mod_coarse(&c.iter().map(|&cj| cj as f64 * step).collect::<Vec<_>>());
        Ok(LatticePoint { v, label: message.to_vec() })
    }

    /// Dithered transmit signal `[v - d] mod Λ_c`.
    pub fn encode(&self, message: &[u64], dither: &Dither) -> Result<Vec<f64>> {
        self.check_len(dither.as_slice())?;
        let v = self.codeword(message)?.v;
        Ok(self.mod_coarse(&v.iter().zip(dither.as_slice()).map(|(a, d)| a - d).collect::<Vec<_>>()))
    }

    /// Nearest point of the (unbounded) fine lattice.
    ///
    /// For every coset codeword `c` the nearest point of `β(c/p + Zⁿ)` is found
    /// coordinatewise; the overall minimum wins, ties going to the smaller
    /// message index and, within a coordinate, to the smaller translate.
    pub fn nearest_fine(&self, y: &[f64]) -> Result<FinePoint> {
        self.check_len(y)?;
        let p = self.field.modulus();
        let step = self.beta / p as f64;
        let scaled: Vec<f64> = y.iter().map(|&v| v / step).collect();

        let mut message = vec![0u64; self.k];
        let mut codeword = vec![0u64; self.n];
        let mut best: Option<(f64, Vec<u64>, Vec<i64>)> = None;
        let mut translate = vec![0i64; self.n];
        for _ in 0..self.size() {
            let mut dist = 0.0;
            for j in 0..self.n {
                // nearest integer congruent to c_j mod p, in units of `step`
                let t = ((scaled[j] - codeword[j] as f64) / p as f64 - 0.5).ceil();
                let point = codeword[j] as f64 + p as f64 * t;
                dist += (scaled[j] - point).powi(2);
                translate[j] = t as i64;
            }
            if best.as_ref().is_none_or(|b| dist < b.0) {
                best = Some((dist, message.clone(), translate.clone()));
            }
            self.advance(&mut message, &mut codeword);
        }
        let (_, label, translate) = best.expect("codebook is nonempty");
        let c = self.linear_codeword(&label)?;
        let v = c
            .iter()
            .zip(&translate)
            .map(|(&cj, &t)| (cj as f64 + p as f64 * t as f64) * step)
            .collect();
        Ok(FinePoint { v, label, translate })
    }

    /// Steps `message` to the next element of F_p^k in little-endian counting
    /// order and updates `codeword = message·G` incrementally.
    fn advance(&self, message: &mut [u64], codeword: &mut [u64]) {
        let f = self.field;
        for (i, m) in message.iter_mut().enumerate() {
            *m += 1;
            // both stepping up and wrapping p-1 -> 0 add row i (mod p)
            for (c, &g) in codeword.iter_mut().zip(&self.generator[i]) {
                *c = f.add(*c, g);
            }
            if *m < f.modulus() {
                return;
            }
            *m = 0;
        }
    }

    /// Computation decoder for `sum a_j v_j mod Λ_c`.
    ///
    /// `v̂ = [scale·y + sum a_j d_j] mod Λ_c` followed by the nearest fine
    /// point, reduced back into `V_c`. Decoding failure is reported only by
    /// the returned label differing from the transmitted combination.
    pub fn decode_combination(&self, y: &[f64], terms: &[(i64, &Dither)], scale: f64) -> Result<LatticePoint> {
        self.check_len(y)?;
        let mut acc: Vec<f64> = y.iter().map(|&v| scale * v).collect();
        for (a, d) in terms {
            self.check_len(d.as_slice())?;
            for (x, dj) in acc.iter_mut().zip(d.as_slice()) {
                *x += *a as f64 * dj;
            }
        }
        let fine = self.nearest_fine(&self.mod_coarse(&acc))?;
        Ok(LatticePoint { v: self.mod_coarse(&fine.v), label: fine.label })
    }

    /// Sum decoder `Q_f([α′y + d1 + d2] mod Λ_c) mod Λ_c`.
    pub fn decode_sum(&self, y: &[f64], d1: &Dither, d2: &Dither, alpha_prime: f64) -> Result<LatticePoint> {
        self.decode_combination(y, &[(1, d1), (1, d2)], alpha_prime)
    }

    /// Message label of a codebook point.
    pub fn map_to_message(&self, v: &[f64]) -> Result<Vec<u64>> {
        self.check_len(v)?;
        let p = self.field.modulus();
        let step = self.beta / p as f64;
        let tol = 1e-9 * self.beta.max(1.0);
        let mut c = Vec::with_capacity(self.n);
        for &x in v {
            if x < -self.beta / 2.0 - tol || x >= self.beta / 2.0 + tol {
                return Err(Error::NotInCodebook);
            }
            let u = (x / step).round();
            if (x - u * step).abs() > tol {
                return Err(Error::NotInCodebook);
            }
            c.push(self.field.reduce(u as i64));
        }
        let f = self.field;
        let message: Vec<u64> = (0..self.k)
            .map(|col| {
                self.pivots
                    .iter()
                    .enumerate()
                    .fold(0, |acc, (r, &piv)| f.add(acc, f.mul(c[piv], self.pivot_inverse[r][col])))
            })
            .collect();
        if self.linear_codeword(&message)? != c {
            return Err(Error::NotInCodebook);
        }
        Ok(message)
    }

    /// Every message of F_p^k, little-endian counting order.
    pub fn messages(&self) -> impl Iterator<Item = Vec<u64>> + '_ {
        let p = self.field.modulus();
        let k = self.k;
        (0..self.size()).map(move |mut idx| {
            (0..k)
                .map(|_| {
                    let d = idx % p;
                    idx /= p;
                    d
                })
                .collect()
        })
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, found: x.len() });
        }
        Ok(())
    }

    fn check_block(&self, message: &[u64]) -> Result<()> {
        if message.len() != self.k {
            return Err(Error::LengthMismatch { expected: self.k, found: message.len() });
        }
        if let Some(&bad) = message.iter().find(|&&m| m >= self.field.modulus()) {
            return Err(Error::SymbolOutOfRange { symbol: bad, p: self.field.modulus() });
        }
        Ok(())
    }
}

fn check_cap(p: u64, k: usize, cap: u64) -> Result<()> {
    let mut size: u64 = 1;
    for _ in 0..k {
        size = size.saturating_mul(p);
        if size > cap {
            return Err(Error::EnumerationCap { p, k, cap });
        }
    }
    Ok(())
}

/// Finds `k` independent columns of `g` and the inverse of that `k x k` block.
/// Returns `inv` with `m = c_pivots · inv` for any codeword `c = mG`.
fn pivot_inverse(g: &[Vec<u64>], f: PrimeField) -> Option<(Vec<usize>, Vec<Vec<u64>>)> {
    let k = g.len();
    let n = g[0].len();
    // Row-reduce [G] to find pivot columns.
    let mut work: Vec<Vec<u64>> = g.to_vec();
    let mut pivots = Vec::with_capacity(k);
    let mut row = 0;
    for col in 0..n {
        if row == k {
            break;
        }
        let Some(sel) = (row..k).find(|&r| work[r][col] != 0) else {
            continue;
        };
        work.swap(row, sel);
        let inv = f.inv(work[row][col])?;
        for x in work[row].iter_mut() {
            *x = f.mul(*x, inv);
        }
        let pivot = work[row].clone();
        for (r, line) in work.iter_mut().enumerate() {
            let factor = line[col];
            if r != row && factor != 0 {
                for (x, &pv) in line.iter_mut().zip(&pivot) {
                    *x = f.add(*x, f.neg(f.mul(factor, pv)));
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    if pivots.len() < k {
        return None;
    }
    // c_pivots = m·S with S[i][r] = G[i][pivots[r]]
    let s: Vec<Vec<u64>> = (0..k).map(|i| pivots.iter().map(|&p| g[i][p]).collect()).collect();
    let inv = invert(&s, f)?;
    Some((pivots, inv))
}

fn invert(a: &[Vec<u64>], f: PrimeField) -> Option<Vec<Vec<u64>>> {
    let k = a.len();
    let mut m: Vec<Vec<u64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..k).map(|j| (i == j) as u64));
            r
        })
        .collect();
    for col in 0..k {
        let sel = (col..k).find(|&r| m[r][col] != 0)?;
        m.swap(col, sel);
        let inv = f.inv(m[col][col])?;
        for x in m[col].iter_mut() {
            *x = f.mul(*x, inv);
        }
        let pivot = m[col].clone();
        for (r, line) in m.iter_mut().enumerate() {
            let factor = line[col];
            if r != col && factor != 0 {
                for (x, &pv) in line.iter_mut().zip(&pivot) {
                    *x = f.add(*x, f.neg(f.mul(factor, pv)));
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[k..].to_vec()).collect())
}

/// Dither uniform over the coarse Voronoi region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dither(Vec<f64>);

impl Dither {
    pub fn new(code: &NestedLatticeCode, d: Vec<f64>) -> Result<Self> {
        code.check_len(&d)?;
        let half = code.beta / 2.0;
        if let Some(&bad) = d.iter().find(|&&x| !(-half..half).contains(&x)) {
            return Err(Error::DitherOutOfRange(bad));
        }
        Ok(Self(d))
    }

    pub fn zero(code: &NestedLatticeCode) -> Self {
        Self(vec![0.0; code.n])
    }

    pub fn sample<R: Rng + ?Sized>(code: &NestedLatticeCode, rng: &mut R) -> Self {
        let half = code.beta / 2.0;
        Self((0..code.n).map(|_| rng.random_range(-half..half)).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A codebook point together with its message label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticePoint {
    pub v: Vec<f64>,
    pub label: Vec<u64>,
}

/// A point of the unbounded fine lattice `β((mG)/p + t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinePoint {
    pub v: Vec<f64>,
    pub label: Vec<u64>,
    pub translate: Vec<i64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn code(n: usize, p: u64, k: usize, power: f64) -> NestedLatticeCode {
        NestedLatticeCode::build(n, p, k, power, 1).unwrap()
    }

    #[test]
    fn one_dimensional_codebook() {
        let c = code(1, 5, 1, 3.0);
        assert_abs_diff_eq!(c.beta(), 6.0, epsilon = 1e-12);
        let mut pts: Vec<f64> = c.messages().map(|m| c.codeword(&m).unwrap().v[0]).collect();
        pts.sort_by(f64::total_cmp);
        let want = [-2.4, -1.2, 0.0, 1.2, 2.4];
        for (a, b) in pts.iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn rate_and_moments() {
        assert_abs_diff_eq!(code(2, 5, 1, 1.0).rate(), 0.5 * 5f64.log2(), epsilon = 1e-15);
        assert_abs_diff_eq!(code(2, 5, 1, 1.0).rate(), 1.160_964, epsilon = 1e-6);
        let c = code(3, 5, 1, 3.0);
        assert_abs_diff_eq!(c.second_moment(), 3.0, epsilon = 1e-12);
        for power in [0.1, 3.0, 77.0] {
            assert_abs_diff_eq!(code(3, 7, 2, power).normalized_second_moment(), 1.0 / 12.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn second_moment_by_sampling() {
        // Monte Carlo integral of |x|^2 / n over V_c
        let c = code(4, 5, 1, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let samples = 100_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            let d = Dither::sample(&c, &mut rng);
            acc += d.as_slice().iter().map(|x| x * x).sum::<f64>() / 4.0;
        }
        let est = acc / samples as f64;
        assert!((est / 3.0 - 1.0).abs() < 0.01, "estimate {est}");
    }

    #[test]
    fn build_errors() {
        assert!(matches!(NestedLatticeCode::build(2, 4, 1, 1.0, 0), Err(Error::NotPrime(4))));
        assert!(matches!(NestedLatticeCode::build(2, 5, 3, 1.0, 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(NestedLatticeCode::build(10, 11, 6, 1.0, 0), Err(Error::EnumerationCap { .. })));
        assert!(matches!(NestedLatticeCode::build(2, 5, 1, 0.0, 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(
            NestedLatticeCode::from_generator(vec![vec![1, 2], vec![2, 4]], 5, 1.0),
            Err(Error::RankDeficient { .. })
        ));
        // p = 2, k = n: the only full-rank draws are invertible matrices
        let c = NestedLatticeCode::build(3, 2, 3, 1.0, 4).unwrap();
        assert_eq!(c.size(), 8);
    }

    #[test]
    fn mod_coarse_examples() {
        let c = code(1, 5, 1, 3.0);
        assert_eq!(c.mod_coarse(&[0.0]), vec![0.0]);
        assert_abs_diff_eq!(c.mod_coarse(&[7.0])[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.mod_coarse(&[-12.0])[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.mod_coarse(&[3.0])[0], -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.mod_coarse(&[-3.0])[0], -3.0, epsilon = 1e-12);
    }

    #[test]
    fn encode_examples() {
        let c = code(3, 5, 1, 2.0);
        let zero = Dither::zero(&c);
        assert_eq!(c.encode(&[0], &zero).unwrap(), vec![0.0; 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in c.messages() {
            let d = Dither::sample(&c, &mut rng);
            let x = c.encode(&m, &d).unwrap();
            let back: Vec<f64> = x.iter().zip(d.as_slice()).map(|(a, b)| a + b).collect();
            let v = c.mod_coarse(&back);
            assert_eq!(c.map_to_message(&v).unwrap(), m);
        }
        assert!(matches!(c.encode(&[0, 1], &zero), Err(Error::LengthMismatch { .. })));
        assert!(matches!(Dither::new(&c, vec![0.0, 0.0, 100.0]), Err(Error::DitherOutOfRange(_))));
    }

    #[test]
    fn dithered_power_matches_target() {
        let c = code(4, 7, 1, 2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trials = 20_000;
        let mut acc = 0.0;
        for t in 0..trials {
            let m = vec![(t % 7) as u64];
            let d = Dither::sample(&c, &mut rng);
            let x = c.encode(&m, &d).unwrap();
            acc += x.iter().map(|v| v * v).sum::<f64>() / 4.0;
        }
        let mean = acc / trials as f64;
        assert!((mean / 2.5 - 1.0).abs() < 0.02, "mean power {mean}");
    }

    #[test]
    fn nearest_fine_on_lattice_points() {
        let c = code(3, 7, 2, 1.0);
        for m in c.messages() {
            let v = c.codeword(&m).unwrap().v;
            let shifted: Vec<f64> = v.iter().map(|x| x + 2.0 * c.beta()).collect();
            assert_eq!(c.nearest_fine(&v).unwrap().label, m);
            let far = c.nearest_fine(&shifted).unwrap();
            assert_eq!(far.label, m);
            assert!(c.mod_coarse(&far.v).iter().zip(&v).map(|(a, b)| (a - b).abs()).sum::<f64>() < 1e-9);
        }
    }

    /// Brute force over every fine point `β(mG/p + t)` with `|t|∞ <= 3`.
    fn brute_nearest(c: &NestedLatticeCode, y: &[f64]) -> (f64, Vec<f64>) {
        let p = c.field().modulus() as f64;
        let n = c.dimension();
        let mut best = (f64::INFINITY, vec![]);
        for m in c.messages() {
            let cw = c.linear_codeword(&m).unwrap();
            let translates = 7usize.pow(n as u32);
            for mut idx in 0..translates {
                let point: Vec<f64> = cw
                    .iter()
                    .map(|&cj| {
                        let t = (idx % 7) as f64 - 3.0;
                        idx /= 7;
                        c.beta() * (cj as f64 / p + t)
                    })
                    .collect();
                let d: f64 = point.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
                if d < best.0 {
                    best = (d, point);
                }
            }
        }
        best
    }

    #[test]
    fn nearest_fine_matches_brute_force() {
        let c = NestedLatticeCode::build(3, 5, 2, 1.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5) * c.beta()).collect();
            let got = c.nearest_fine(&y).unwrap();
            let (dist, point) = brute_nearest(&c, &y);
            let got_dist: f64 = got.v.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
            assert!((got_dist - dist).abs() < 1e-9);
            // unique minimizers almost surely
            for (a, b) in got.v.iter().zip(&point) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn small_noise_does_not_move_decision() {
        let c = NestedLatticeCode::build(4, 5, 1, 1.0, 8).unwrap();
        let points: Vec<Vec<f64>> = c.messages().map(|m| c.codeword(&m).unwrap().v).collect();
        // minimum distance within a window of translates
        let mut dmin = f64::INFINITY;
        for a in &points {
            let (d, _) = brute_nearest_excluding(&c, a);
            dmin = dmin.min(d);
        }
        let radius = dmin.sqrt() / 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (m, v) in c.messages().zip(&points) {
            for _ in 0..50 {
                let dir: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
                let y: Vec<f64> = v.iter().zip(&dir).map(|(a, d)| a + 0.99 * radius * d / norm).collect();
                assert_eq!(c.nearest_fine(&y).unwrap().label, m);
            }
        }
    }

    fn brute_nearest_excluding(c: &NestedLatticeCode, x: &[f64]) -> (f64, ()) {
        let p = c.field().modulus() as f64;
        let n = c.dimension();
        let mut best = f64::INFINITY;
        for m in c.messages() {
            let cw = c.linear_codeword(&m).unwrap();
            for mut idx in 0..5usize.pow(n as u32) {
                let point: Vec<f64> = cw
                    .iter()
                    .map(|&cj| {
                        let t = (idx % 5) as f64 - 2.0;
                        idx /= 5;
                        c.beta() * (cj as f64 / p + t)
                    })
                    .collect();
                let d: f64 = point.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
                if d > 1e-12 && d < best {
                    best = d;
                }
            }
        }
        (best, ())
    }

    #[test]
    fn label_additivity_p5_k1() {
        let c = code(2, 5, 1, 1.0);
        let f = c.field();
        assert_eq!(c.map_to_message(&[0.0, 0.0]).unwrap(), vec![0]);
        for a in c.messages() {
            for b in c.messages() {
                let va = c.codeword(&a).unwrap().v;
                let vb = c.codeword(&b).unwrap().v;
                let sum = c.mod_coarse(&va.iter().zip(&vb).map(|(x, y)| x + y).collect::<Vec<_>>());
                assert_eq!(c.map_to_message(&sum).unwrap(), vec![f.add(a[0], b[0])]);
            }
        }
    }

    #[test]
    fn label_additivity_p7_k2_exhaustive() {
        let c = NestedLatticeCode::build(3, 7, 2, 1.0, 5).unwrap();
        let f = c.field();
        let mut pairs = 0;
        for a in c.messages() {
            let va = c.codeword(&a).unwrap().v;
            for b in c.messages() {
                let vb = c.codeword(&b).unwrap().v;
                let sum = c.mod_coarse(&va.iter().zip(&vb).map(|(x, y)| x + y).collect::<Vec<_>>());
                let want: Vec<u64> = a.iter().zip(&b).map(|(x, y)| f.add(*x, *y)).collect();
                assert_eq!(c.map_to_message(&sum).unwrap(), want);
                pairs += 1;
            }
        }
        assert_eq!(pairs, 2401);
    }

    #[test]
    fn map_to_message_rejects_non_codewords() {
        let c = code(2, 5, 1, 1.0);
        assert_eq!(c.map_to_message(&[0.1, 0.0]), Err(Error::NotInCodebook));
        assert_eq!(c.map_to_message(&[100.0, 0.0]), Err(Error::NotInCodebook));
        // a fine point of Z^2 / 5 that is not in C: only if C != F_5^2, true for k = 1
        let step = c.beta() / 5.0;
        let hits = (0..5)
            .flat_map(|a| (0..5).map(move |b| (a, b)))
            .filter(|&(a, b)| c.map_to_message(&c.mod_coarse(&[a as f64 * step, b as f64 * step])).is_ok())
            .count();
        assert_eq!(hits, 5);
    }

    #[test]
    fn noiseless_sum_decoding_exhaustive() {
        for (n, p, k) in [(1, 5, 1), (2, 5, 2), (4, 5, 2), (3, 7, 1), (2, 2, 2)] {
            let c = NestedLatticeCode::build(n, p, k, 2.0, 21).unwrap();
            let f = c.field();
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            for a in c.messages() {
                for b in c.messages() {
                    let d1 = Dither::sample(&c, &mut rng);
                    let d2 = Dither::sample(&c, &mut rng);
                    let x1 = c.encode(&a, &d1).unwrap();
                    let x2 = c.encode(&b, &d2).unwrap();
                    let y: Vec<f64> = x1.iter().zip(&x2).map(|(u, v)| u + v).collect();
                    let got = c.decode_sum(&y, &d1, &d2, 1.0).unwrap();
                    let want: Vec<u64> = a.iter().zip(&b).map(|(x, y)| f.add(*x, *y)).collect();
                    assert_eq!(got.label, want);
                }
            }
        }
    }

    #[test]
    fn paired_noiseless_sum_decoding() {
        // Four servers as two pairs: y = 2(x1 + x2), alpha' = 1/2
        let c = NestedLatticeCode::build(2, 5, 1, 1.5, 2).unwrap();
        let f = c.field();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for a in c.messages() {
            for b in c.messages() {
                let d1 = Dither::sample(&c, &mut rng);
                let d2 = Dither::sample(&c, &mut rng);
                let x1 = c.encode(&a, &d1).unwrap();
                let x2 = c.encode(&b, &d2).unwrap();
                let y: Vec<f64> = x1.iter().zip(&x2).map(|(u, v)| 2.0 * (u + v)).collect();
                let got = c.decode_sum(&y, &d1, &d2, 0.5).unwrap();
                assert_eq!(got.label, vec![f.add(a[0], b[0])]);
            }
        }
    }

    #[test]
    fn decode_combination_with_signs() {
        let c = NestedLatticeCode::build(2, 7, 1, 1.0, 2).unwrap();
        let f = c.field();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for a in c.messages() {
            for b in c.messages() {
                let d1 = Dither::sample(&c, &mut rng);
                let d2 = Dither::sample(&c, &mut rng);
                let x1 = c.encode(&a, &d1).unwrap();
                let x2 = c.encode(&b, &d2).unwrap();
                let y: Vec<f64> = x1.iter().zip(&x2).map(|(u, v)| u - v).collect();
                let got = c.decode_combination(&y, &[(1, &d1), (-1, &d2)], 1.0).unwrap();
                assert_eq!(got.label, vec![f.add(a[0], f.neg(b[0]))]);
            }
        }
    }

    proptest! {
        #[test]
        fn mod_coarse_idempotent_and_distributive(
            a in prop::collection::vec(-50.0f64..50.0, 3),
            b in prop::collection::vec(-50.0f64..50.0, 3),
        ) {
            let c = NestedLatticeCode::build(3, 5, 1, 2.0, 0).unwrap();
            let ma = c.mod_coarse(&a);
            let half = c.beta() / 2.0;
            prop_assert!(ma.iter().all(|x| (-half..half).contains(x)));
            prop_assert_eq!(c.mod_coarse(&ma), ma.clone());
            // a - (a mod Λ) is a coarse lattice point
            for (x, r) in a.iter().zip(&ma) {
                let q = (x - r) / c.beta();
                prop_assert!((q - q.round()).abs() < 1e-9);
            }
            let mb = c.mod_coarse(&b);
            let lhs = c.mod_coarse(&ma.iter().zip(&mb).map(|(x, y)| x + y).collect::<Vec<_>>());
            let rhs = c.mod_coarse(&a.iter().zip(&b).map(|(x, y)| x + y).collect::<Vec<_>>());
            for (l, r) in lhs.iter().zip(&rhs) {
                // equal modulo β (both may straddle the boundary by rounding)
                let d = (l - r) / c.beta();
                prop_assert!((d - d.round()).abs() < 1e-9);
            }
        }
    }
}
