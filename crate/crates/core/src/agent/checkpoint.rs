//! Checkpoint file (little endian):
//!
//! ```text
//! magic      8 bytes  "MRLCKPT\0"
//! version    u32
//! header_len u64
//! header     JSON: config, architecture, scenario key, tiling, counters,
//!            ε, RNG state, curve, best design
//! online     f64 × P
//! target     f64 × P
//! adam m     f64 × P
//! adam v     f64 × P
//! replay     count u64, cursor u64, then per transition:
//!            prefix_len u32, prefix bytes, action u8, terminal u8, reward f64
//! checksum   u64, first 8 bytes of the SHA-256 of everything before it
//! ```
//!
//! Files are written to a sibling temporary path and renamed into place.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Adam, Architecture, BestDesign, CurvePoint, Network, ReplayBuffer, TrainConfig, Trainer, Transition};
use crate::env::Env;
use crate::lattice::TilingSpec;
use crate::Error;

const MAGIC: &[u8; 8] = b"MRLCKPT\0";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: TrainConfig,
    architecture: Architecture,
    scenario_key: String,
    tiling: TilingSpec,
    episode: usize,
    epsilon: f64,
    optimize_steps: u64,
    adam_t: u64,
    rng_seed: String,
    rng_stream: u64,
    rng_word_pos: String,
    curve: Vec<CurvePoint>,
    best: Option<BestDesign>,
    last_loss: Option<f64>,
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn from_hex(s: &str) -> Option<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return None;
    }
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok()).collect()
}

fn checksum(bytes: &[u8]) -> [u8; 8] {
    Sha256::digest(bytes)[..8].try_into().unwrap()
}

pub(super) fn save(t: &Trainer, path: &Path) -> Result<(), Error> {
    let header = Header {
        config: t.config.clone(),
        architecture: t.online.architecture().clone(),
        scenario_key: to_hex(&t.env.scenario().key()),
        tiling: t.env.order().spec,
        episode: t.episode,
        epsilon: t.epsilon,
        optimize_steps: t.optimize_steps,
        adam_t: t.adam.t,
        rng_seed: to_hex(&t.rng.get_seed()),
        rng_stream: t.rng.get_stream(),
        rng_word_pos: t.rng.get_word_pos().to_string(),
        curve: t.curve.clone(),
        best: t.best.clone(),
        last_loss: t.last_loss,
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for block in [&t.online.params, &t.target.params, &t.adam.m, &t.adam.v] {
        for v in block.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&(t.buffer.len() as u64).to_le_bytes());
    out.extend_from_slice(&(t.buffer.cursor() as u64).to_le_bytes());
    for tr in t.buffer.items() {
        out.extend_from_slice(&(tr.prefix.len() as u32).to_le_bytes());
        out.extend_from_slice(&tr.prefix);
        out.push(tr.action);
        out.push(u8::from(tr.terminal));
        out.extend_from_slice(&tr.reward.to_le_bytes());
    }
    let sum = checksum(&out);
    out.extend_from_slice(&sum);

    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, &out).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], Error> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, Error> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, Error> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, Error> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, Error> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, Error> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub(super) fn load(env: Env, path: &Path) -> Result<Trainer, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Checkpoint(format!("{}: {m}", path.display()));
    if bytes.len() < MAGIC.len() + 8 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint"));
    }
    let (body, sum) = bytes.split_at(bytes.len() - 8);
    if checksum(body) != sum {
        return Err(bad("checksum mismatch"));
    }
    let mut r = Reader { bytes: body, pos: 8 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let len = r.u64()? as usize;
    let header: Header = serde_json::from_slice(r.take(len)?).map_err(|e| bad(&e.to_string()))?;
    if header.scenario_key != to_hex(&env.scenario().key()) {
        return Err(bad("written for a different scenario"));
    }
    if header.tiling != env.order().spec {
        return Err(bad("written for a different tiling"));
    }
    if header.architecture.input != env.state_len() {
        return Err(bad("network input does not match the environment"));
    }
    header.config.validate()?;
    let p = header.architecture.param_count();
    let online = Network::from_params(header.architecture.clone(), r.f64s(p)?)?;
    let target = Network::from_params(header.architecture.clone(), r.f64s(p)?)?;
    let mut adam = Adam::new(header.config.adam(), p);
    adam.m = r.f64s(p)?;
    adam.v = r.f64s(p)?;
    adam.t = header.adam_t;
    let count = r.u64()? as usize;
    let cursor = r.u64()? as usize;
    let mut items = Vec::with_capacity(count.min(header.config.buffer_capacity));
    for _ in 0..count {
        let n = r.u32()? as usize;
        let prefix = r.take(n)?.to_vec();
        let action = r.u8()?;
        let terminal = r.u8()? == 1;
        let reward = r.f64()?;
        items.push(Transition { prefix, action, reward, terminal });
    }
    if r.pos != body.len() {
        return Err(bad("trailing bytes"));
    }
    let buffer = ReplayBuffer::from_parts(header.config.buffer_capacity, items, cursor)?;
    let seed: [u8; 32] = from_hex(&header.rng_seed).and_then(|v| v.try_into().ok()).ok_or_else(|| bad("malformed RNG seed"))?;
    let word_pos: u128 = header.rng_word_pos.parse().map_err(|_| bad("malformed RNG position"))?;
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::from_seed(seed);
    rng.set_stream(header.rng_stream);
    rng.set_word_pos(word_pos);
    Ok(Trainer {
        config: header.config,
        env,
        online,
        target,
        adam,
        buffer,
        rng,
        episode: header.episode,
        epsilon: header.epsilon,
        optimize_steps: header.optimize_steps,
        curve: header.curve,
        best: header.best,
        last_loss: header.last_loss,
    })
}
