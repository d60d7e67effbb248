//! Sequential cell-placement environment.
//!
//! An episode fills the design slots one per step along a tiling order. Only
//! the final step is rewarded, from a frame analysis of the finished design.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};

use crate::cells::{CellKind, ACTION_COUNT};
use crate::lattice::{tiling_order, DesignGrid, TilingOrder, TilingSpec};
use crate::mechanisms::{Evaluation, Scenario};
use crate::Error;

/// One-hot channels per slot: empty plus the twelve cell kinds.
pub const CHANNELS: usize = ACTION_COUNT + 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EpisodeState {
    /// Steps taken so far.
    pub t: usize,
    /// Action per tiling position; `None` beyond `t`.
    pub placements: Vec<Option<u8>>,
}

impl EpisodeState {
    pub fn horizon(&self) -> usize {
        self.placements.len()
    }

    pub fn is_terminal(&self) -> bool {
        self.t == self.placements.len()
    }

    /// Actions taken so far, in tiling order.
    pub fn prefix(&self) -> Vec<u8> {
        self.placements[..self.t].iter().map(|a| a.expect("filled prefix")).collect()
    }
}

/// One-hot encoding of a placement prefix of an `horizon`-step episode.
pub fn encode_prefix(prefix: &[u8], horizon: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), horizon * CHANNELS);
    out.fill(0.0);
    for pos in 0..horizon {
        let channel = prefix.get(pos).map_or(0, |&a| a as usize + 1);
        out[pos * CHANNELS + channel] = 1.0;
    }
}

pub struct Env {
    scenario: Arc<Scenario>,
    order: TilingOrder,
    cache: Option<Arc<EvalCache>>,
}

impl Env {
    pub fn new(scenario: Arc<Scenario>, tiling: TilingSpec) -> Result<Self, Error> {
        let order = tiling_order(&scenario.grid, tiling)?;
        Ok(Self { scenario, order, cache: None })
    }

    pub fn with_cache(mut self, cache: Arc<EvalCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn order(&self) -> &TilingOrder {
        &self.order
    }

    pub fn cache(&self) -> Option<&Arc<EvalCache>> {
        self.cache.as_ref()
    }

    pub fn horizon(&self) -> usize {
        self.order.len()
    }

    pub fn state_len(&self) -> usize {
        self.horizon() * CHANNELS
    }

    pub fn reset(&self) -> EpisodeState {
        EpisodeState { t: 0, placements: vec![None; self.horizon()] }
    }

    pub fn encode(&self, state: &EpisodeState) -> Vec<f64> {
        let mut out = vec![0.0; self.state_len()];
        encode_prefix(&state.prefix(), self.horizon(), &mut out);
        out
    }

    /// Places `action` at tiling position `t`. The reward is zero except on
    /// the final step.
    pub fn step(&self, state: &EpisodeState, action: usize) -> Result<(EpisodeState, f64, bool), Error> {
        if state.is_terminal() {
            return Err(Error::IllegalStep("episode already finished".into()));
        }
        if state.horizon() != self.horizon() {
            return Err(Error::IllegalStep(format!("state has horizon {}, environment {}", state.horizon(), self.horizon())));
        }
        if action >= ACTION_COUNT {
            return Err(Error::InvalidAction(action));
        }
        let mut next = state.clone();
        next.placements[state.t] = Some(action as u8);
        next.t += 1;
        if next.is_terminal() {
            let reward = self.evaluate_terminal(&next)?.reward;
            Ok((next, reward, true))
        } else {
            Ok((next, 0.0, false))
        }
    }

    /// Action indices in design-slot (row-major) order.
    pub fn slot_actions(&self, state: &EpisodeState) -> Result<Vec<u8>, Error> {
        if !state.is_terminal() {
            return Err(Error::IllegalStep(format!("{} of {} slots filled", state.t, state.horizon())));
        }
        let mut out = vec![0u8; self.horizon()];
        for (pos, &slot) in self.order.order.iter().enumerate() {
            out[slot] = state.placements[pos].expect("terminal state is filled");
        }
        Ok(out)
    }

    /// Design with `prefix` placed along the tiling order and every later
    /// position set to `fill`.
    pub fn completed_design(&self, prefix: &[u8], fill: CellKind) -> Result<DesignGrid, Error> {
        if prefix.len() > self.horizon() {
            return Err(Error::IllegalStep(format!("{} actions for horizon {}", prefix.len(), self.horizon())));
        }
        let mut kinds = vec![fill; self.horizon()];
        for (pos, &a) in prefix.iter().enumerate() {
            kinds[self.order.order[pos]] = CellKind::from_action(a as usize)?;
        }
        self.scenario.design(&kinds)
    }

    pub fn design(&self, state: &EpisodeState) -> Result<DesignGrid, Error> {
        let kinds = self.slot_actions(state)?.into_iter().map(|a| CellKind::from_action(a as usize)).collect::<Result<Vec<_>, _>>()?;
        self.scenario.design(&kinds)
    }

    pub fn evaluate_terminal(&self, state: &EpisodeState) -> Result<Evaluation, Error> {
        let actions = self.slot_actions(state)?;
        let Some(cache) = &self.cache else {
            return self.scenario.evaluate(&self.design(state)?);
        };
        let key = placement_hash(&actions);
        if let Some(hit) = cache.get(&key) {
            return Ok(hit);
        }
        let value = self.scenario.evaluate(&self.design(state)?)?;
        cache.insert(key, value)?;
        Ok(value)
    }
}

pub fn placement_hash(slot_actions: &[u8]) -> [u8; 32] {
    Sha256::digest(slot_actions).into()
}

// ---------------------------------------------------------------------------
// Evaluation cache
//
// File layout (little endian):
//   header  48 bytes: magic "MRLCACHE", version u32, reserved u32,
//                     scenario key [u8; 32]
//   record  80 bytes: placement hash [u8; 32], reward f64, ux f64, uy f64,
//                     theta f64, disconnections u32, flags u32 (bit 0 =
//                     singular), checksum u64 = first 8 bytes of the
//                     SHA-256 of the preceding 72 bytes

const CACHE_MAGIC: &[u8; 8] = b"MRLCACHE";
const CACHE_VERSION: u32 = 1;
const HEADER_LEN: usize = 48;
const RECORD_LEN: usize = 80;

/// Thread-safe map from placement hash to evaluation, optionally mirrored to
/// an append-only log.
pub struct EvalCache {
    map: Mutex<HashMap<[u8; 32], Evaluation>>,
    log: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl Default for EvalCache {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl EvalCache {
    pub fn in_memory() -> Self {
        Self { map: Mutex::new(HashMap::new()), log: None, path: None }
    }

    /// Opens or creates a cache file for the scenario identified by
    /// `scenario_key`. A trailing partial or corrupt record is cut off.
    pub fn open(path: &Path, scenario_key: [u8; 32]) -> Result<Self, Error> {
        let io = |e| Error::io(path, e);
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(path).map_err(io)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes).map_err(io)?;
        let mut map = HashMap::new();
        if bytes.len() < HEADER_LEN {
            let mut header = Vec::with_capacity(HEADER_LEN);
            header.extend_from_slice(CACHE_MAGIC);
            header.extend_from_slice(&CACHE_VERSION.to_le_bytes());
            header.extend_from_slice(&0u32.to_le_bytes());
            header.extend_from_slice(&scenario_key);
            file.set_len(0).map_err(io)?;
            file.seek(SeekFrom::Start(0)).map_err(io)?;
            file.write_all(&header).map_err(io)?;
        } else {
            if &bytes[..8] != CACHE_MAGIC {
                return Err(Error::io(path, std::io::Error::other("not an evaluation cache")));
            }
            let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
            if version != CACHE_VERSION {
                return Err(Error::io(path, std::io::Error::other(format!("cache version {version}"))));
            }
            if bytes[16..48] != scenario_key {
                return Err(Error::io(path, std::io::Error::other("cache belongs to a different scenario")));
            }
            let mut end = HEADER_LEN;
            while end + RECORD_LEN <= bytes.len() {
                match decode_record(&bytes[end..end + RECORD_LEN]) {
                    Some((key, value)) => {
                        map.insert(key, value);
                        end += RECORD_LEN;
                    }
                    None => break,
                }
            }
            if end != bytes.len() {
                file.set_len(end as u64).map_err(io)?;
            }
            file.seek(SeekFrom::Start(end as u64)).map_err(io)?;
        }
        Ok(Self { map: Mutex::new(map), log: Some(Mutex::new(file)), path: Some(path.to_path_buf()) })
    }

    pub fn get(&self, key: &[u8; 32]) -> Option<Evaluation> {
        self.map.lock().unwrap().get(key).copied()
    }

    pub fn insert(&self, key: [u8; 32], value: Evaluation) -> Result<(), Error> {
        let fresh = self.map.lock().unwrap().insert(key, value).is_none();
        if let (true, Some(log)) = (fresh, &self.log) {
            let record = encode_record(&key, &value);
            let mut file = log.lock().unwrap();
            file.write_all(&record).map_err(|e| Error::io(self.path.as_deref().unwrap_or(Path::new("")), e))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn checksum(bytes: &[u8]) -> u64 {
    u64::from_le_bytes(Sha256::digest(bytes)[..8].try_into().unwrap())
}

fn encode_record(key: &[u8; 32], e: &Evaluation) -> [u8; RECORD_LEN] {
    let mut out = [0u8; RECORD_LEN];
    out[..32].copy_from_slice(key);
    for (i, v) in [e.reward, e.ux, e.uy, e.theta].iter().enumerate() {
        out[32 + 8 * i..40 + 8 * i].copy_from_slice(&v.to_le_bytes());
    }
    out[64..68].copy_from_slice(&(e.disconnections as u32).to_le_bytes());
    out[68..72].copy_from_slice(&u32::from(e.singular).to_le_bytes());
    let sum = checksum(&out[..72]);
    out[72..].copy_from_slice(&sum.to_le_bytes());
    out
}

fn decode_record(bytes: &[u8]) -> Option<([u8; 32], Evaluation)> {
    let sum = u64::from_le_bytes(bytes[72..80].try_into().unwrap());
    if sum != checksum(&bytes[..72]) {
        return None;
    }
    let f = |i: usize| f64::from_le_bytes(bytes[32 + 8 * i..40 + 8 * i].try_into().unwrap());
    let flags = u32::from_le_bytes(bytes[68..72].try_into().unwrap());
    let value = Evaluation {
        reward: f(0),
        ux: f(1),
        uy: f(2),
        theta: f(3),
        disconnections: u32::from_le_bytes(bytes[64..68].try_into().unwrap()) as usize,
        singular: flags & 1 == 1,
    };
    Some((bytes[..32].try_into().unwrap(), value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{build_door_latch, toy_latch};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn toy_env() -> Env {
        let s = Arc::new(toy_latch());
        let tiling = s.tiling;
        Env::new(s, tiling).unwrap()
    }

    #[test]
    fn reset_and_encode() {
        let s = Arc::new(build_door_latch(true));
        let env = Env::new(s.clone(), s.tiling).unwrap();
        let st = env.reset();
        assert_eq!(st, env.reset());
        assert_eq!(st.horizon(), 29);
        let x = env.encode(&st);
        assert_eq!(x.len(), 377);
        assert_eq!(x.iter().filter(|v| **v == 1.0).count(), 29);
        assert!((0..29).all(|p| x[p * CHANNELS] == 1.0));

        let (next, r, done) = env.step(&st, 5).unwrap();
        assert_eq!((r, done), (0.0, false));
        let y = env.encode(&next);
        assert_eq!(y[0], 0.0);
        assert_eq!(y[6], 1.0);
        assert_eq!(y.iter().filter(|v| **v == 1.0).count(), 29);
    }

    #[test]
    fn encoding_is_injective_on_a_small_domain() {
        // every prefix state of a 4-slot episode: 13^4 channel patterns are
        // reachable only as prefixes, so enumerate prefixes of all lengths
        let mut seen = HashSet::new();
        let mut count = 0;
        let mut buf = vec![0.0; 4 * CHANNELS];
        for code in 0..13usize.pow(4) {
            let digits: Vec<usize> = (0..4).map(|i| code / 13usize.pow(i) % 13).collect();
            let len = digits.iter().take_while(|d| **d > 0).count();
            if digits[len..].iter().any(|d| *d > 0) {
                continue;
            }
            let prefix: Vec<u8> = digits[..len].iter().map(|d| (*d - 1) as u8).collect();
            encode_prefix(&prefix, 4, &mut buf);
            assert!(buf.chunks(CHANNELS).all(|b| b.iter().sum::<f64>() == 1.0));
            let key: Vec<u64> = buf.iter().map(|v| v.to_bits()).collect();
            assert!(seen.insert(key));
            count += 1;
        }
        assert_eq!(count, 1 + 12 + 144 + 1728 + 20736);
    }

    #[test]
    fn episode_runs_exactly_h_steps() {
        let env = toy_env();
        let mut st = env.reset();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 0..env.horizon() {
            assert_eq!(st.t, t);
            let a = rng.random_range(0..ACTION_COUNT);
            let (a1, r1, d1) = env.step(&st, a).unwrap();
            let (a2, r2, d2) = env.step(&st, a).unwrap();
            assert_eq!((&a1, r1.to_bits(), d1), (&a2, r2.to_bits(), d2));
            assert_eq!(d1, t + 1 == env.horizon());
            if !d1 {
                assert_eq!(r1, 0.0);
            }
            st = a1;
        }
        assert!(env.step(&st, 0).is_err());
        assert!(env.step(&env.reset(), 12).is_err());
    }

    #[test]
    fn placement_hash_distinguishes_permutations() {
        let a = [0u8, 3, 7, 7];
        let b = [3u8, 0, 7, 7];
        assert_ne!(placement_hash(&a), placement_hash(&b));
        assert_eq!(placement_hash(&a), placement_hash(&a.clone()));
    }

    fn random_terminal(env: &Env, rng: &mut ChaCha8Rng) -> EpisodeState {
        let mut st = env.reset();
        for p in st.placements.iter_mut() {
            *p = Some(rng.random_range(0..ACTION_COUNT as u8));
        }
        st.t = st.horizon();
        st
    }

    #[test]
    fn cache_is_transparent() {
        let plain = toy_env();
        let cache = Arc::new(EvalCache::in_memory());
        let cached = toy_env().with_cache(cache.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let st = random_terminal(&plain, &mut rng);
            let fresh = plain.evaluate_terminal(&st).unwrap();
            let first = cached.evaluate_terminal(&st).unwrap();
            let again = cached.evaluate_terminal(&st).unwrap();
            assert_eq!(fresh.reward.to_bits(), first.reward.to_bits());
            assert_eq!(first.reward.to_bits(), again.reward.to_bits());
        }
        assert!(!cache.is_empty());
    }

    #[test]
    fn cache_file_survives_reopen_and_truncates_a_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        let env = toy_env();
        let key = env.scenario().key();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let states: Vec<_> = (0..5).map(|_| random_terminal(&env, &mut rng)).collect();
        {
            let env = toy_env().with_cache(Arc::new(EvalCache::open(&path, key).unwrap()));
            for st in &states {
                env.evaluate_terminal(st).unwrap();
            }
        }
        let full = std::fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(full, HEADER_LEN + 5 * RECORD_LEN);

        let reopened = EvalCache::open(&path, key).unwrap();
        assert_eq!(reopened.len(), 5);
        drop(reopened);

        // torn final record
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(full - 7);
        std::fs::write(&path, &bytes).unwrap();
        let cache = EvalCache::open(&path, key).unwrap();
        assert_eq!(cache.len(), 4);
        assert_eq!(std::fs::metadata(&path).unwrap().len() as usize, HEADER_LEN + 4 * RECORD_LEN);
        drop(cache);

        // flipped bit in the last record
        let mut bytes = std::fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 20] ^= 1;
        std::fs::write(&path, &bytes).unwrap();
        assert_eq!(EvalCache::open(&path, key).unwrap().len(), 3);

        assert!(EvalCache::open(&path, [9u8; 32]).is_err());
    }

    #[test]
    fn concurrent_inserts_agree() {
        let cache = Arc::new(EvalCache::in_memory());
        let env = Arc::new(toy_env().with_cache(cache.clone()));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let states: Arc<Vec<_>> = Arc::new((0..12).map(|_| random_terminal(&env, &mut rng)).collect());
        let handles: Vec<_> = (0..3)
            .map(|_| {
                let (env, states) = (env.clone(), states.clone());
                std::thread::spawn(move || states.iter().map(|s| env.evaluate_terminal(s).unwrap().reward.to_bits()).collect::<Vec<_>>())
            })
            .collect();
        let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert!(results.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(cache.len(), 12);
    }
}
