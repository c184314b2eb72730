//! FF1 format-preserving encryption (NIST SP 800-38G) over AES.
//!
//! The minimum domain is `radix^len >= 100`, the bound from the original
//! publication. Revision 1 raised it to one million, which would exclude
//! five-digit postal codes.

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockEncrypt, KeyInit};
use aes::{Aes128, Aes192, Aes256};
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

const ROUNDS: u8 = 10;
const MIN_DOMAIN: u64 = 100;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Ff1Error {
    #[error("radix {0} outside 2..=65536")]
    BadRadix(u32),
    #[error("key must be 16, 24 or 32 bytes, got {0}")]
    BadKey(usize),
    #[error("numeral {numeral} is not below radix {radix}")]
    BadNumeral { numeral: u16, radix: u32 },
    #[error("length {len} outside the FF1 domain for radix {radix}")]
    BadLength { len: usize, radix: u32 },
}

enum BlockCipher {
    A128(Box<Aes128>),
    A192(Box<Aes192>),
    A256(Box<Aes256>),
}

impl BlockCipher {
    fn encrypt(&self, block: &mut [u8; 16]) {
        let b = GenericArray::from_mut_slice(block);
        match self {
            BlockCipher::A128(c) => c.encrypt_block(b),
            BlockCipher::A192(c) => c.encrypt_block(b),
            BlockCipher::A256(c) => c.encrypt_block(b),
        }
    }
}

pub struct Ff1 {
    cipher: BlockCipher,
    radix: u32,
}

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

impl Ff1 {
    pub fn new(key: &[u8], radix: u32) -> Result<Self, Ff1Error> {
        if !(2..=1 << 16).contains(&radix) {
            return Err(Ff1Error::BadRadix(radix));
        }
        let cipher = match key.len() {
            16 => BlockCipher::A128(Box::new(Aes128::new_from_slice(key).unwrap())),
            24 => BlockCipher::A192(Box::new(Aes192::new_from_slice(key).unwrap())),
            32 => BlockCipher::A256(Box::new(Aes256::new_from_slice(key).unwrap())),
            n => return Err(Ff1Error::BadKey(n)),
        };
        Ok(Ff1 { cipher, radix })
    }

    pub fn radix(&self) -> u32 {
        self.radix
    }

    /// Smallest admissible numeral-string length for this radix.
    pub fn min_len(&self) -> usize {
        let mut len = 1;
        let mut domain = self.radix as u64;
        while domain < MIN_DOMAIN {
            domain *= self.radix as u64;
            len += 1;
        }
        len.max(2)
    }

    fn check(&self, x: &[u16]) -> Result<(), Ff1Error> {
        if x.len() < self.min_len() || x.len() > u32::MAX as usize {
            return Err(Ff1Error::BadLength {
                len: x.len(),
                radix: self.radix,
            });
        }
        if let Some(&numeral) = x.iter().find(|&&d| d as u32 >= self.radix) {
            return Err(Ff1Error::BadNumeral {
                numeral,
                radix: self.radix,
            });
        }
        Ok(())
    }

    fn num(&self, x: &[u16]) -> BigUint {
        if self.radix == 256 {
            let bytes: Vec<u8> = x.iter().map(|&d| d as u8).collect();
            return BigUint::from_bytes_be(&bytes);
        }
        let radix = BigUint::from(self.radix);
        x.iter()
            .fold(BigUint::zero(), |acc, &d| acc * &radix + BigUint::from(d))
    }

    fn str_m(&self, mut value: BigUint, m: usize) -> Vec<u16> {
        let mut out = vec![0u16; m];
        if self.radix == 256 {
            let bytes = value.to_bytes_be();
            let skip = m.saturating_sub(bytes.len());
            for (o, b) in out[skip..].iter_mut().zip(bytes.iter().skip(bytes.len().saturating_sub(m))) {
                *o = *b as u16;
            }
            return out;
        }
        let radix = BigUint::from(self.radix);
        for slot in out.iter_mut().rev() {
            *slot = (&value % &radix).to_u16().expect("digit below radix");
            value /= &radix;
        }
        out
    }

    fn prf(&self, data: &[u8]) -> [u8; 16] {
        let mut y = [0u8; 16];
        for chunk in data.chunks(16) {
            for (a, b) in y.iter_mut().zip(chunk) {
                *a ^= b;
            }
            self.cipher.encrypt(&mut y);
        }
        y
    }

    /// Shared round function: returns `y = NUM(S)` for round `i` applied to
    /// numeral half `half`.
    fn round_value(&self, p: &[u8; 16], tweak: &[u8], i: u8, half: &[u16], b: usize, d: usize) -> BigUint {
        let pad = (16 - ((tweak.len() + b + 1) % 16)) % 16;
        let mut q = Vec::with_capacity(tweak.len() + pad + 1 + b);
        q.extend_from_slice(tweak);
        q.resize(q.len() + pad, 0);
        q.push(i);
        let num_b = self.num(half).to_bytes_be();
        q.resize(q.len() + b - num_b.len(), 0);
        q.extend_from_slice(&num_b);
        let mut pq = Vec::with_capacity(16 + q.len());
        pq.extend_from_slice(p);
        pq.extend_from_slice(&q);
        let r = self.prf(&pq);
        let mut s = Vec::with_capacity(ceil_div(d, 16) * 16);
        s.extend_from_slice(&r);
        let mut j: u128 = 1;
        while s.len() < d {
            let mut block = (u128::from_be_bytes(r) ^ j).to_be_bytes();
            self.cipher.encrypt(&mut block);
            s.extend_from_slice(&block);
            j += 1;
        }
        BigUint::from_bytes_be(&s[..d])
    }

    fn params(&self, n: usize, tweak: &[u8]) -> (usize, usize, usize, usize, [u8; 16]) {
        let u = n / 2;
        let v = n - u;
        let bits = (v as f64 * (self.radix as f64).log2()).ceil() as usize;
        let b = ceil_div(bits, 8);
        let d = 4 * ceil_div(b, 4) + 4;
        let mut p = [0u8; 16];
        p[0] = 1;
        p[1] = 2;
        p[2] = 1;
        p[3..6].copy_from_slice(&self.radix.to_be_bytes()[1..4]);
        p[6] = 10;
        p[7] = (u % 256) as u8;
        p[8..12].copy_from_slice(&(n as u32).to_be_bytes());
        p[12..16].copy_from_slice(&(tweak.len() as u32).to_be_bytes());
        (u, v, b, d, p)
    }

    pub fn encrypt(&self, tweak: &[u8], x: &[u16]) -> Result<Vec<u16>, Ff1Error> {
        self.check(x)?;
        let n = x.len();
        let (u, v, b, d, p) = self.params(n, tweak);
        let mut a = x[..u].to_vec();
        let mut bh = x[u..].to_vec();
        for i in 0..ROUNDS {
            let m = if i % 2 == 0 { u } else { v };
            let y = self.round_value(&p, tweak, i, &bh, b, d);
            let modulus = BigUint::from(self.radix).pow(m as u32);
            let c = (self.num(&a) + y) % &modulus;
            let c = self.str_m(c, m);
            a = std::mem::replace(&mut bh, c);
        }
        a.extend(bh);
        Ok(a)
    }

    pub fn decrypt(&self, tweak: &[u8], x: &[u16]) -> Result<Vec<u16>, Ff1Error> {
        self.check(x)?;
        let n = x.len();
        let (u, v, b, d, p) = self.params(n, tweak);
        let mut a = x[..u].to_vec();
        let mut bh = x[u..].to_vec();
        for i in (0..ROUNDS).rev() {
            let m = if i % 2 == 0 { u } else { v };
            let y = self.round_value(&p, tweak, i, &a, b, d);
            let modulus = BigUint::from(self.radix).pow(m as u32);
            let y = y % &modulus;
            let c = (self.num(&bh) + &modulus - y) % &modulus;
            let c = self.str_m(c, m);
            bh = std::mem::replace(&mut a, c);
        }
        a.extend(bh);
        Ok(a)
    }
}
