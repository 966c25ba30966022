//! Little-endian binary checkpoint codec.
//!
//! Layout: magic `TOFMLCKP`, `u32` version, `u8` agent tag, then
//! length-prefixed sections written by the agent in a fixed order. Vectors
//! are a `u64` length followed by `f64` words; RNG state is the 32-byte
//! seed, `u64` stream and `u128` word position.

use rand_chacha::ChaCha8Rng;

use super::replay::{ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::nn::{AdamState, OptimizerState, ParamVector};

pub const MAGIC: &[u8; 8] = b"TOFMLCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum AgentTag {
    Pdqn = 1,
    Ddpg = 2,
}

fn malformed(reason: impl Into<String>) -> Error {
    Error::Format {
        what: "checkpoint",
        reason: reason.into(),
    }
}

#[derive(Default)]
pub(crate) struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(tag: AgentTag) -> Self {
        let mut e = Self::default();
        e.buf.extend_from_slice(MAGIC);
        e.u32(VERSION);
        e.u8(tag as u8);
        e
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.buf.extend_from_slice(b);
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.f64(*x);
        }
    }

    pub fn params(&mut self, p: &ParamVector) {
        self.f64s(p.as_slice());
    }

    pub fn rng(&mut self, rng: &ChaCha8Rng) {
        self.buf.extend_from_slice(&rng.get_seed());
        self.u64(rng.get_stream());
        self.buf.extend_from_slice(&rng.get_word_pos().to_le_bytes());
    }

    pub fn optimizer(&mut self, s: &OptimizerState) {
        match s {
            OptimizerState::Sgd => self.u8(0),
            OptimizerState::Adam(a) => {
                self.u8(1);
                self.u64(a.t);
                self.f64s(&a.m);
                self.f64s(&a.v);
            }
        }
    }

    pub fn buffer(&mut self, b: &ReplayBuffer) {
        let (items, head) = b.raw_parts();
        self.u64(b.capacity() as u64);
        self.u64(head as u64);
        self.u64(items.len() as u64);
        for t in items {
            self.f64s(&t.state);
            self.f64s(&t.cont_action);
            self.u64(t.disc_action as u64);
            self.f64(t.reward);
            self.f64s(&t.next_state);
            self.u8(u8::from(t.terminal));
        }
    }
}

pub(crate) struct Decoder<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(data: &'a [u8], tag: AgentTag) -> Result<Self> {
        let mut d = Self { data, pos: 0 };
        if d.take(8)? != MAGIC {
            return Err(malformed("bad magic"));
        }
        let version = d.u32()?;
        if version != VERSION {
            return Err(malformed(format!("unsupported version {version}")));
        }
        let found = d.u8()?;
        if found != tag as u8 {
            return Err(malformed(format!("agent tag {found}, expected {}", tag as u8)));
        }
        Ok(d)
    }

    pub fn finish(self) -> Result<()> {
        if self.pos == self.data.len() {
            Ok(())
        } else {
            Err(malformed("trailing bytes"))
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| malformed("truncated"))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        usize::try_from(n)
            .ok()
            .filter(|&n| n <= self.data.len())
            .ok_or_else(|| malformed("length prefix out of range"))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.len()?;
        self.take(n)
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn params(&mut self, expected: usize) -> Result<ParamVector> {
        let v = self.f64s()?;
        if v.len() != expected {
            return Err(malformed(format!("parameter block of {} values, expected {expected}", v.len())));
        }
        Ok(ParamVector::new(v))
    }

    pub fn rng(&mut self) -> Result<ChaCha8Rng> {
        use rand::SeedableRng;
        let seed: [u8; 32] = self.array()?;
        let stream = self.u64()?;
        let word_pos = u128::from_le_bytes(self.array()?);
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(word_pos);
        Ok(rng)
    }

    pub fn optimizer(&mut self, expected: usize) -> Result<OptimizerState> {
        match self.u8()? {
            0 => Ok(OptimizerState::Sgd),
            1 => {
                let t = self.u64()?;
                let m = self.f64s()?;
                let v = self.f64s()?;
                if m.len() != expected || v.len() != expected {
                    return Err(malformed("optimizer moments have the wrong length"));
                }
                Ok(OptimizerState::Adam(AdamState { m, v, t }))
            }
            k => Err(malformed(format!("unknown optimizer tag {k}"))),
        }
    }

    pub fn buffer(&mut self) -> Result<ReplayBuffer> {
        let capacity = self.len()?;
        let head = self.len()?;
        let count = self.len()?;
        let mut items = Vec::with_capacity(count);
        for _ in 0..count {
            items.push(Transition {
                state: self.f64s()?,
                cont_action: self.f64s()?,
                disc_action: self.len()?,
                reward: self.f64()?,
                next_state: self.f64s()?,
                terminal: self.u8()? != 0,
            });
        }
        ReplayBuffer::from_raw_parts(capacity, items, head).ok_or_else(|| malformed("inconsistent replay ring"))
    }
}
