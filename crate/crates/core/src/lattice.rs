//! Fixed-length bit array packed into 64-bit words.

/// Bit `i` lives in word `i / 64` at position `i % 64`. Bits past `len` in the
/// last word are always zero, so whole-word popcounts are exact.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitLattice {
    words: Vec<u64>,
    len: usize,
}

impl BitLattice {
    pub fn zeros(len: usize) -> Self {
        BitLattice { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn ones(len: usize) -> Self {
        let mut b = BitLattice { words: vec![u64::MAX; len.div_ceil(64)], len };
        b.mask_tail();
        b
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut b = BitLattice::zeros(bits.len());
        for (i, &v) in bits.iter().enumerate() {
            b.set(i, v);
        }
        b
    }

    /// Parses a `0`/`1` string, character `i` being bit `i`.
    pub fn from_bitstring(s: &str) -> Option<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return None,
            }
        }
        Some(BitLattice::from_bits(bits))
    }

    pub fn to_bitstring(&self) -> String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline(always)]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline(always)]
    pub fn bit(&self, i: usize) -> u64 {
        debug_assert!(i < self.len);
        (self.words[i >> 6] >> (i & 63)) & 1
    }

    #[inline(always)]
    pub fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.len);
        let m = 1u64 << (i & 63);
        if v {
            self.words[i >> 6] |= m;
        } else {
            self.words[i >> 6] &= !m;
        }
    }

    #[inline(always)]
    pub fn toggle(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i >> 6] ^= 1u64 << (i & 63);
    }

    /// XORs `v & 1` into bit `i`, branch-free.
    #[inline(always)]
    pub fn xor_bit(&mut self, i: usize, v: u64) {
        debug_assert!(i < self.len);
        self.words[i >> 6] ^= (v & 1) << (i & 63);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn fill(&mut self, v: bool) {
        let w = if v { u64::MAX } else { 0 };
        self.words.iter_mut().for_each(|x| *x = w);
        self.mask_tail();
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Indices of set bits in increasing order.
    pub fn ones_positions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (wi, &w) in self.words.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                out.push(wi * 64 + w.trailing_zeros() as usize);
                w &= w - 1;
            }
        }
        out
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Low `len` bits of a word, for lattices of at most 64 sites.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64);
        self.words.first().copied().unwrap_or(0)
    }

    pub fn from_u64(bits: u64, len: usize) -> Self {
        assert!(len <= 64);
        let mut b = BitLattice::zeros(len);
        if len > 0 {
            b.words[0] = bits;
            b.mask_tail();
        }
        b
    }

    /// Little-endian byte packing of the words, hex encoded and truncated to
    /// `ceil(len / 8)` bytes.
    pub fn to_hex(&self) -> String {
        let bytes: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        hex::encode(&bytes[..self.len.div_ceil(8)])
    }

    pub fn from_hex(s: &str, len: usize) -> Option<Self> {
        let bytes = hex::decode(s).ok()?;
        if bytes.len() != len.div_ceil(8) {
            return None;
        }
        let mut b = BitLattice::zeros(len);
        for (i, byte) in bytes.iter().enumerate() {
            b.words[i / 8] |= (*byte as u64) << (8 * (i % 8));
        }
        let before = b.words.clone();
        b.mask_tail();
        (before == b.words).then_some(b)
    }

    fn mask_tail(&mut self) {
        let r = self.len & 63;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }
}
