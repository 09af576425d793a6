//! LZ78 over the binary alphabet.
//!
//! Phrase `i` (from 1) is a pointer to an earlier phrase `j < i` in
//! `⌈log2 i⌉` bits, most significant first, then one innovation bit. An
//! unfinished last phrase equals some earlier phrase and is sent the same
//! way, as a repeat.

use super::Compressor;
use crate::error::{Error, Result};
use crate::solovay::Bits;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Lz78;

/// `⌈log2 i⌉` for `i >= 1`.
pub fn pointer_bits(i: u64) -> u64 {
    if i <= 1 {
        0
    } else {
        64 - (i - 1).leading_zeros() as u64
    }
}

/// Incremental parser: feed bits one at a time and read the codelength of
/// everything fed so far.
#[derive(Clone, Debug)]
pub struct Lz78Parser {
    // children[node][bit]; node 0 is the empty phrase.
    children: Vec<[u32; 2]>,
    node: u32,
    phrases: u64,
    complete_bits: u64,
}

impl Default for Lz78Parser {
    fn default() -> Self {
        Lz78Parser { children: vec![[0, 0]], node: 0, phrases: 0, complete_bits: 0 }
    }
}

impl Lz78Parser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bit: u8) {
        let next = self.children[self.node as usize][bit as usize];
        if next != 0 {
            self.node = next;
            return;
        }
        let id = self.children.len() as u32;
        self.children.push([0, 0]);
        self.children[self.node as usize][bit as usize] = id;
        self.phrases += 1;
        self.complete_bits += pointer_bits(self.phrases) + 1;
        self.node = 0;
    }

    /// Codelength of the input so far.
    pub fn codelength(&self) -> u64 {
        if self.node == 0 {
            self.complete_bits
        } else {
            self.complete_bits + pointer_bits(self.phrases + 1) + 1
        }
    }

    pub fn phrases(&self) -> u64 {
        self.phrases + u64::from(self.node != 0)
    }
}

/// Phrases as (pointer, bit) pairs.
fn parse(x: &[u8]) -> Vec<(u64, u8)> {
    let mut children: Vec<[u32; 2]> = vec![[0, 0]];
    // bit leading into each node, and its parent, so a partial phrase can
    // be written as (parent, last bit).
    let mut parent: Vec<(u32, u8)> = vec![(0, 0)];
    let mut out = Vec::new();
    let mut node = 0u32;
    for &b in x {
        let next = children[node as usize][b as usize];
        if next != 0 {
            node = next;
            continue;
        }
        let id = children.len() as u32;
        children.push([0, 0]);
        parent.push((node, b));
        children[node as usize][b as usize] = id;
        out.push((u64::from(node), b));
        node = 0;
    }
    if node != 0 {
        let (p, b) = parent[node as usize];
        out.push((u64::from(p), b));
    }
    out
}

impl Compressor for Lz78 {
    fn name(&self) -> &'static str {
        "lz78"
    }

    fn encode(&self, x: &[u8]) -> Bits {
        let mut out = Vec::new();
        for (i, (ptr, bit)) in parse(x).into_iter().enumerate() {
            let w = pointer_bits(i as u64 + 1);
            for k in (0..w).rev() {
                out.push(((ptr >> k) & 1) as u8);
            }
            out.push(bit);
        }
        out
    }

    fn decode(&self, code: &[u8]) -> Result<Bits> {
        let mut phrases: Vec<(u32, u8)> = vec![(0, 0)];
        let mut out = Vec::new();
        let mut pos = 0usize;
        let mut i = 1u64;
        while pos < code.len() {
            let w = pointer_bits(i) as usize;
            if pos + w + 1 > code.len() {
                return Err(Error::InvalidParameter("truncated LZ78 code".into()));
            }
            let mut ptr = 0u64;
            for &b in &code[pos..pos + w] {
                ptr = (ptr << 1) | u64::from(b);
            }
            if ptr >= i {
                return Err(Error::InvalidParameter(format!("pointer {ptr} in phrase {i}")));
            }
            let bit = code[pos + w];
            pos += w + 1;
            let mut phrase = vec![bit];
            let mut at = ptr as usize;
            while at != 0 {
                let (p, b) = phrases[at];
                phrase.push(b);
                at = p as usize;
            }
            phrase.reverse();
            out.extend_from_slice(&phrase);
            phrases.push((ptr as u32, bit));
            i += 1;
        }
        Ok(out)
    }

    fn codelength(&self, x: &[u8]) -> u64 {
        let mut p = Lz78Parser::new();
        for &b in x {
            p.push(b);
        }
        p.codelength()
    }

    fn prefix_codelengths(&self, x: &[u8]) -> Vec<u64> {
        let mut p = Lz78Parser::new();
        x.iter()
            .map(|&b| {
                p.push(b);
                p.codelength()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct transcription of the phrase-cost sum, over an explicit
    // dictionary of phrases.
    fn oracle(x: &[u8]) -> u64 {
        let mut dict: std::collections::HashSet<Vec<u8>> = Default::default();
        let mut cur = Vec::new();
        let mut p = 0u64;
        for &b in x {
            cur.push(b);
            if !dict.contains(&cur) {
                dict.insert(cur.clone());
                cur.clear();
                p += 1;
            }
        }
        if !cur.is_empty() {
            p += 1;
        }
        (1..=p).map(|i| (i as f64).log2().ceil() as u64 + 1).sum()
    }

    #[test]
    fn hand_parses() {
        assert_eq!(Lz78.codelength(&[]), 0);
        assert_eq!(Lz78.codelength(&[0; 15]), 13);
        assert_eq!(pointer_bits(1), 0);
        assert_eq!(pointer_bits(5), 3);
        assert_eq!(Lz78.encode(&[0, 1]), vec![0, 0, 1]);
    }

    #[test]
    fn round_trip_and_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let n: usize = rng.gen_range(0..300);
            let x: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let code = Lz78.encode(&x);
            assert_eq!(code.len() as u64, Lz78.codelength(&x));
            assert_eq!(Lz78.codelength(&x), oracle(&x));
            assert_eq!(Lz78.decode(&code).unwrap(), x);
            let pre = Lz78.prefix_codelengths(&x);
            for t in [0, n / 3, n / 2, n.saturating_sub(1)] {
                if t < n {
                    assert_eq!(pre[t], Lz78.codelength(&x[..=t]));
                }
            }
        }
    }
}
