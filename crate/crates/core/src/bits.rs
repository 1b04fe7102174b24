//! Packed bit buffers.
//!
//! Bits are stored MSB-first inside bytes. Unused trailing bits of the last
//! byte are always zero, so byte-level equality is bit-level equality.

use rand::RngCore;

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitBuf {
    bytes: Vec<u8>,
    len: usize,
}

impl std::fmt::Debug for BitBuf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitBuf({} bits)", self.len)
    }
}

impl BitBuf {
    pub fn zeros(len: usize) -> Self {
        Self {
            bytes: vec![0; len.div_ceil(8)],
            len,
        }
    }

    pub fn random<R: RngCore>(len: usize, rng: &mut R) -> Self {
        let mut bytes = vec![0; len.div_ceil(8)];
        rng.fill_bytes(&mut bytes);
        let mut buf = Self { bytes, len };
        buf.clear_tail();
        buf
    }

    /// Builds a buffer from whole bytes, keeping only the first `len` bits.
    pub fn from_bytes(mut bytes: Vec<u8>, len: usize) -> Self {
        bytes.resize(len.div_ceil(8), 0);
        let mut buf = Self { bytes, len };
        buf.clear_tail();
        buf
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len);
        self.bytes[i / 8] & (0x80 >> (i % 8)) != 0
    }

    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len);
        let mask = 0x80 >> (i % 8);
        if v {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    fn clear_tail(&mut self) {
        let r = self.len % 8;
        if r != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= 0xFFu8 << (8 - r);
            }
        }
    }

    /// Copies `len` bits starting at `offset`.
    pub fn slice(&self, offset: usize, len: usize) -> Self {
        assert!(offset + len <= self.len, "slice out of bounds");
        if offset % 8 == 0 {
            let start = offset / 8;
            let end = (offset + len).div_ceil(8);
            return Self::from_bytes(self.bytes[start..end].to_vec(), len);
        }
        let shift = offset % 8;
        let start = offset / 8;
        let mut out = vec![0u8; len.div_ceil(8)];
        for (i, o) in out.iter_mut().enumerate() {
            let hi = self.bytes[start + i] << shift;
            let lo = self
                .bytes
                .get(start + i + 1)
                .map_or(0, |b| b >> (8 - shift));
            *o = hi | lo;
        }
        Self::from_bytes(out, len)
    }

    /// Appends all bits of `other`.
    pub fn extend(&mut self, other: &BitBuf) {
        let shift = self.len % 8;
        if shift == 0 {
            self.bytes.truncate(self.len / 8);
            self.bytes.extend_from_slice(&other.bytes);
        } else {
            for &b in &other.bytes {
                let last = self.bytes.len() - 1;
                self.bytes[last] |= b >> shift;
                self.bytes.push(b << (8 - shift));
            }
        }
        self.len += other.len;
        self.bytes.truncate(self.len.div_ceil(8));
        self.clear_tail();
    }

    /// XORs `other` into `self`; the result is as long as the longer operand,
    /// the shorter one being treated as zero-padded.
    pub fn xor_assign(&mut self, other: &BitBuf) {
        if other.len > self.len {
            self.len = other.len;
            self.bytes.resize(other.bytes.len(), 0);
        }
        for (a, b) in self.bytes.iter_mut().zip(&other.bytes) {
            *a ^= b;
        }
    }

    /// Returns a copy zero-padded (or truncated) to `len` bits.
    pub fn resized(&self, len: usize) -> Self {
        Self::from_bytes(self.bytes.clone(), len)
    }

    pub fn is_zero(&self) -> bool {
        self.bytes.iter().all(|&b| b == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn to_vec(b: &BitBuf) -> Vec<bool> {
        (0..b.len()).map(|i| b.get(i)).collect()
    }

    #[test]
    fn slice_and_extend_match_bool_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let src = BitBuf::random(203, &mut rng);
        let model = to_vec(&src);
        for (off, len) in [(0, 203), (3, 17), (8, 64), (13, 190), (202, 1), (50, 0)] {
            let s = src.slice(off, len);
            assert_eq!(to_vec(&s), model[off..off + len].to_vec());
        }
        let mut acc = BitBuf::default();
        let mut expect = Vec::new();
        for (off, len) in [(5, 11), (0, 8), (40, 33), (100, 3)] {
            acc.extend(&src.slice(off, len));
            expect.extend_from_slice(&model[off..off + len]);
        }
        assert_eq!(to_vec(&acc), expect);
    }

    #[test]
    fn xor_pads_shorter_operand() {
        let mut a = BitBuf::zeros(5);
        a.set(0, true);
        let mut b = BitBuf::zeros(12);
        b.set(0, true);
        b.set(11, true);
        a.xor_assign(&b);
        assert_eq!(a.len(), 12);
        assert!(!a.get(0));
        assert!(a.get(11));
    }
}
