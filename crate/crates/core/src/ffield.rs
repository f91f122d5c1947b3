//! Prime-field arithmetic and the message containers the servers operate on.
//!
//! Residues are always kept in canonical form `[0, p)`. Signed integer
//! coefficients (query entries are in `{-1, 0, 1}`) are reduced before use, so
//! `-1` becomes `p - 1`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::{Error, Result};

/// The prime field F_p.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrimeField {
    p: u64,
}

impl PrimeField {
    pub fn new(p: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        // Keeps every product of two residues inside u64.
        if p > u32::MAX as u64 {
            return Err(Error::InvalidConfig(format!("prime {p} exceeds 32 bits")));
        }
        Ok(Self { p })
    }

    pub fn modulus(self) -> u64 {
        self.p
    }

    /// Canonical representative of a signed integer.
    pub fn reduce(self, x: i64) -> u64 {
        x.rem_euclid(self.p as i64) as u64
    }

    pub fn add(self, a: u64, b: u64) -> u64 {
        (a + b) % self.p
    }

    pub fn neg(self, a: u64) -> u64 {
        (self.p - a) % self.p
    }

    pub fn mul(self, a: u64, b: u64) -> u64 {
        (a * b) % self.p
    }

    pub fn inv(self, a: u64) -> Option<u64> {
        if a.is_multiple_of(self.p) {
            return None;
        }
        Some(self.pow(a, self.p - 2))
    }

    fn pow(self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1 % self.p;
        base %= self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }
}

/// Deterministic trial-division primality test.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// A length-L vector over F_p.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    field: PrimeField,
    symbols: Vec<u64>,
}

impl Message {
    pub fn new(field: PrimeField, symbols: Vec<u64>) -> Result<Self> {
        if let Some(&bad) = symbols.iter().find(|&&s| s >= field.p) {
            return Err(Error::SymbolOutOfRange { symbol: bad, p: field.p });
        }
        Ok(Self { field, symbols })
    }

    pub fn zero(field: PrimeField, len: usize) -> Self {
        Self { field, symbols: vec![0; len] }
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn symbols(&self) -> &[u64] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.symbols.iter().all(|&s| s == 0)
    }

    pub fn negate(&self) -> Message {
        let f = self.field;
        Message { field: f, symbols: self.symbols.iter().map(|&s| f.neg(s)).collect() }
    }

    /// Multiplies every symbol by the signed integer `c` (reduced mod p).
    pub fn scale(&self, c: i64) -> Message {
        let f = self.field;
        let c = f.reduce(c);
        Message { field: f, symbols: self.symbols.iter().map(|&s| f.mul(s, c)).collect() }
    }

    pub fn add(&self, other: &Message) -> Result<Message> {
        self.check_compatible(other)?;
        let f = self.field;
        let symbols = self.symbols.iter().zip(&other.symbols).map(|(&a, &b)| f.add(a, b)).collect();
        Ok(Message { field: f, symbols })
    }

    /// Splits into consecutive blocks of `k` symbols; `k` must divide the length.
    pub fn blocks(&self, k: usize) -> Result<Vec<&[u64]>> {
        if k == 0 || !self.symbols.len().is_multiple_of(k) {
            return Err(Error::InvalidConfig(format!(
                "message length {} is not a multiple of block size {k}",
                self.symbols.len()
            )));
        }
        Ok(self.symbols.chunks(k).collect())
    }

    fn check_compatible(&self, other: &Message) -> Result<()> {
        if self.field != other.field {
            return Err(Error::FieldMismatch { left: self.field.p, right: other.field.p });
        }
        if self.symbols.len() != other.symbols.len() {
            return Err(Error::LengthMismatch {
                expected: self.symbols.len(),
                found: other.symbols.len(),
            });
        }
        Ok(())
    }
}

/// The `M` messages replicated on every server.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageStore {
    messages: Vec<Message>,
}

impl MessageStore {
    pub fn new(messages: Vec<Message>) -> Result<Self> {
        let first = messages.first().ok_or(Error::TooSmall { what: "M", min: 1, got: 0 })?;
        for m in &messages[1..] {
            first.check_compatible(m)?;
        }
        Ok(Self { messages })
    }

    /// Draws `count` messages of `len` i.i.d. uniform symbols in F_p.
    pub fn sample(seed: u64, count: usize, len: usize, p: u64) -> Result<Self> {
        let field = PrimeField::new(p)?;
        if count == 0 {
            return Err(Error::TooSmall { what: "M", min: 1, got: 0 });
        }
        if len == 0 {
            return Err(Error::TooSmall { what: "L", min: 1, got: 0 });
        }
        let mut rng = seed::rng(seed, seed::tag::STORE);
        let messages = (0..count)
            .map(|_| Message {
                field,
                symbols: (0..len).map(|_| rng.random_range(0..p)).collect(),
            })
            .collect();
        Ok(Self { messages })
    }

    pub fn field(&self) -> PrimeField {
        self.messages[0].field
    }

    pub fn count(&self) -> usize {
        self.messages.len()
    }

    pub fn message_len(&self) -> usize {
        self.messages[0].len()
    }

    pub fn get(&self, index: usize) -> Result<&Message> {
        self.messages
            .get(index)
            .ok_or(Error::IndexOutOfRange { index, count: self.messages.len() })
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    /// Returns `sum_m coeffs[m] * W_m` with every coefficient reduced mod p.
    pub fn linear_combine(&self, coeffs: &[i64]) -> Result<Message> {
        if coeffs.len() != self.messages.len() {
            return Err(Error::LengthMismatch { expected: self.messages.len(), found: coeffs.len() });
        }
        let f = self.field();
        let mut acc = vec![0u64; self.message_len()];
        for (msg, &c) in self.messages.iter().zip(coeffs) {
            let c = f.reduce(c);
            if c == 0 {
                continue;
            }
            for (a, &s) in acc.iter_mut().zip(&msg.symbols) {
                *a = f.add(*a, f.mul(c, s));
            }
        }
        Ok(Message { field: f, symbols: acc })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f5() -> PrimeField {
        PrimeField::new(5).unwrap()
    }

    fn msg(f: PrimeField, s: &[u64]) -> Message {
        Message::new(f, s.to_vec()).unwrap()
    }

    #[test]
    fn primality() {
        let primes: Vec<u64> = (0..40).filter(|&n| is_prime(n)).collect();
        assert_eq!(primes, [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]);
        assert_eq!(PrimeField::new(6), Err(Error::NotPrime(6)));
        assert_eq!(PrimeField::new(1), Err(Error::NotPrime(1)));
    }

    #[test]
    fn inverse() {
        let f = PrimeField::new(11).unwrap();
        for a in 1..11 {
            assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
        }
        assert_eq!(f.inv(0), None);
    }

    #[test]
    fn sample_range_and_determinism() {
        let a = MessageStore::sample(7, 2, 4, 5).unwrap();
        assert_eq!(a.count(), 2);
        assert_eq!(a.message_len(), 4);
        assert!(a.messages().iter().flat_map(|m| m.symbols()).all(|&s| s < 5));
        assert_eq!(a, MessageStore::sample(7, 2, 4, 5).unwrap());
    }

    #[test]
    fn sample_rejects_bad_parameters() {
        assert_eq!(MessageStore::sample(1, 2, 4, 4), Err(Error::NotPrime(4)));
        assert!(matches!(MessageStore::sample(1, 0, 4, 5), Err(Error::TooSmall { what: "M", .. })));
        assert!(matches!(MessageStore::sample(1, 2, 0, 5), Err(Error::TooSmall { what: "L", .. })));
    }

    #[test]
    fn sample_is_uniform() {
        let store = MessageStore::sample(11, 2, 100_000, 5).unwrap();
        for m in store.messages() {
            let mut counts = [0usize; 5];
            for &s in m.symbols() {
                counts[s as usize] += 1;
            }
            for c in counts {
                let freq = c as f64 / 100_000.0;
                assert!((freq - 0.2).abs() < 0.01, "frequency {freq}");
            }
        }
    }

    #[test]
    fn linear_combine_examples() {
        let f = f5();
        let store = MessageStore::new(vec![msg(f, &[1, 2]), msg(f, &[3, 4])]).unwrap();
        assert_eq!(store.linear_combine(&[1, -1]).unwrap(), msg(f, &[3, 3]));
        assert_eq!(store.linear_combine(&[0, 1]).unwrap(), msg(f, &[3, 4]));
        assert!(store.linear_combine(&[0, 0]).unwrap().is_zero());
        assert_eq!(
            store.linear_combine(&[1]),
            Err(Error::LengthMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn add_and_negate() {
        let f = f5();
        let x = msg(f, &[3, 3]);
        assert!(x.add(&x.negate()).unwrap().is_zero());
        assert_eq!(x.add(&msg(f, &[4, 4])).unwrap(), msg(f, &[2, 2]));
        let g = PrimeField::new(7).unwrap();
        assert!(matches!(x.add(&msg(g, &[1, 1])), Err(Error::FieldMismatch { .. })));
        assert!(matches!(Message::new(f, vec![5]), Err(Error::SymbolOutOfRange { .. })));
    }

    /// Exhaustive linearity over every store and coefficient pair for p <= 5,
    /// M <= 3, L <= 2, checked against symbolwise brute force.
    #[test]
    fn linear_combine_is_linear_exhaustively() {
        for p in [2u64, 3, 5] {
            let f = PrimeField::new(p).unwrap();
            for m in 1..=3usize {
                for l in 1..=2usize {
                    let cells = m * l;
                    let coeff_range: Vec<Vec<i64>> = all_vectors(m, -1, 1);
                    for code in 0..(p.pow(cells as u32)) {
                        let mut rest = code;
                        let mut msgs = Vec::new();
                        for _ in 0..m {
                            let mut s = Vec::new();
                            for _ in 0..l {
                                s.push(rest % p);
                                rest /= p;
                            }
                            msgs.push(msg(f, &s));
                        }
                        let store = MessageStore::new(msgs.clone()).unwrap();
                        for c1 in &coeff_range {
                            let r1 = store.linear_combine(c1).unwrap();
                            // brute force: integer sums reduced at the end
                            for j in 0..l {
                                let raw: i64 = (0..m).map(|i| c1[i] * msgs[i].symbols[j] as i64).sum();
                                assert_eq!(r1.symbols[j], f.reduce(raw));
                            }
                            for c2 in &coeff_range {
                                let sum: Vec<i64> = c1.iter().zip(c2).map(|(a, b)| a + b).collect();
                                let r2 = store.linear_combine(c2).unwrap();
                                assert_eq!(store.linear_combine(&sum).unwrap(), r1.add(&r2).unwrap());
                            }
                        }
                    }
                }
            }
        }
    }

    fn all_vectors(len: usize, lo: i64, hi: i64) -> Vec<Vec<i64>> {
        let mut out = vec![vec![]];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|v| {
                    (lo..=hi).map(move |x| {
                        let mut w = v.clone();
                        w.push(x);
                        w
                    })
                })
                .collect();
        }
        out
    }

    proptest! {
        #[test]
        fn add_commutes(p in prop::sample::select(vec![2u64, 3, 5, 7, 11]),
                        raw in prop::collection::vec((0u64..1000, 0u64..1000), 1..16)) {
            let f = PrimeField::new(p).unwrap();
            let a = msg(f, &raw.iter().map(|x| x.0 % p).collect::<Vec<_>>());
            let b = msg(f, &raw.iter().map(|x| x.1 % p).collect::<Vec<_>>());
            prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
            prop_assert_eq!(a.scale(-1), a.negate());
        }
    }
}
