//! Attractor search: trajectory simulation with exact cycle detection,
//! canonical cycle forms, and sampled or exhaustive attractor sets.

use std::collections::hash_map::Entry;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{BooleanNetwork, NetworkState};

/// Largest `n` accepted by [`exhaustive_attractors`].
pub const EXHAUSTIVE_LIMIT: usize = 20;

const CHUNK: usize = 64;

/// A cycle of states, rotated so that its lexicographically smallest state
/// comes first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Attractor {
    states: Vec<NetworkState>,
}

impl Attractor {
    pub fn states(&self) -> &[NetworkState] {
        &self.states
    }

    pub fn period(&self) -> usize {
        self.states.len()
    }

    /// The canonical (smallest) state.
    pub fn first(&self) -> &NetworkState {
        &self.states[0]
    }

    pub fn n(&self) -> usize {
        self.states[0].len()
    }

    /// Steps once around the cycle and checks it closes with distinct states.
    pub fn is_cycle_of(&self, net: &BooleanNetwork) -> bool {
        let tau = self.period();
        let closes = (0..tau).all(|h| net.step(&self.states[h]) == self.states[(h + 1) % tau]);
        let mut sorted = self.states.clone();
        sorted.sort();
        sorted.dedup();
        closes && sorted.len() == tau
    }
}

/// Rotates a cycle so that its smallest state is first, preserving cyclic
/// order.
pub fn canonicalize(cycle: Vec<NetworkState>) -> Result<Attractor> {
    let start = cycle
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cmp(b.1))
        .map(|(i, _)| i)
        .ok_or(Error::TooFew {
            what: "an attractor cycle",
            min: 1,
            got: 0,
        })?;
    let mut states = cycle;
    states.rotate_left(start);
    Ok(Attractor { states })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Step budget per trajectory.
    pub max_steps: u64,
    /// Optional bound on the number of visited states held in memory.
    pub memory_cap: Option<usize>,
}

impl SearchConfig {
    pub fn new(max_steps: u64) -> Result<Self> {
        let cfg = SearchConfig {
            max_steps,
            memory_cap: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps < 1 {
            return Err(Error::InvalidParams("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Reusable visited-state map for trajectory simulation. States of up to 128
/// nodes are keyed by a compact fixed-size array.
#[derive(Default)]
struct Tracker {
    compact: FxHashMap<[u64; 2], u64>,
    general: FxHashMap<NetworkState, u64>,
}

/// Outcome of one step of bookkeeping.
enum Visit {
    New,
    Seen(u64),
    Full,
}

trait VisitMap {
    fn start(&mut self, state: &NetworkState);
    fn visit(&mut self, state: &NetworkState, t: u64, cap: usize) -> Visit;
}

fn compact_key(state: &NetworkState) -> [u64; 2] {
    let w = state.words();
    [w[0], w.get(1).copied().unwrap_or(0)]
}

impl VisitMap for FxHashMap<[u64; 2], u64> {
    fn start(&mut self, state: &NetworkState) {
        self.clear();
        self.insert(compact_key(state), 0);
    }

    #[inline]
    fn visit(&mut self, state: &NetworkState, t: u64, cap: usize) -> Visit {
        let full = self.len() >= cap;
        match self.entry(compact_key(state)) {
            Entry::Occupied(e) => Visit::Seen(*e.get()),
            Entry::Vacant(_) if full => Visit::Full,
            Entry::Vacant(e) => {
                e.insert(t);
                Visit::New
            }
        }
    }
}

impl VisitMap for FxHashMap<NetworkState, u64> {
    fn start(&mut self, state: &NetworkState) {
        self.clear();
        self.insert(state.clone(), 0);
    }

    fn visit(&mut self, state: &NetworkState, t: u64, cap: usize) -> Visit {
        let full = self.len() >= cap;
        match self.entry(state.clone()) {
            Entry::Occupied(e) => Visit::Seen(*e.get()),
            Entry::Vacant(_) if full => Visit::Full,
            Entry::Vacant(e) => {
                e.insert(t);
                Visit::New
            }
        }
    }
}

impl Tracker {
    fn run(
        &mut self,
        net: &BooleanNetwork,
        initial: &NetworkState,
        cfg: &SearchConfig,
    ) -> Option<Attractor> {
        if net.n() <= 128 {
            Self::run_with(&mut self.compact, net, initial, cfg)
        } else {
            Self::run_with(&mut self.general, net, initial, cfg)
        }
    }

    fn run_with<M: VisitMap>(
        seen: &mut M,
        net: &BooleanNetwork,
        initial: &NetworkState,
        cfg: &SearchConfig,
    ) -> Option<Attractor> {
        let cap = cfg.memory_cap.unwrap_or(usize::MAX);
        if cap == 0 {
            return None;
        }
        let mut cur = initial.clone();
        let mut next = NetworkState::zeros(net.n());
        seen.start(&cur);
        for t in 1..=cfg.max_steps {
            net.step_into(&cur, &mut next);
            match seen.visit(&next, t, cap) {
                Visit::New => {}
                Visit::Seen(t1) => return Some(trace_cycle(net, next, (t - t1) as usize)),
                Visit::Full => return None,
            }
            std::mem::swap(&mut cur, &mut next);
        }
        None
    }
}

fn trace_cycle(net: &BooleanNetwork, start: NetworkState, period: usize) -> Attractor {
    let mut states = Vec::with_capacity(period);
    let mut cur = start;
    for _ in 0..period {
        let next = net.step(&cur);
        states.push(cur);
        cur = next;
    }
    canonicalize(states).expect("period is at least one")
}

/// Follows the trajectory from `initial` until a state repeats. Returns
/// `Ok(None)` when the step budget (or memory cap) runs out first.
pub fn find_attractor(
    net: &BooleanNetwork,
    initial: &NetworkState,
    cfg: &SearchConfig,
) -> Result<Option<Attractor>> {
    if initial.len() != net.n() {
        return Err(Error::DimensionMismatch {
            expected: net.n(),
            found: initial.len(),
        });
    }
    cfg.validate()?;
    Ok(Tracker::default().run(net, initial, cfg))
}

/// Deduplicated attractors, ordered by canonical first state, with the number
/// of initial states that reached each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttractorSet {
    n: usize,
    attractors: Vec<Attractor>,
    basin_hits: Vec<u64>,
    not_found: u64,
}

#[derive(Serialize, Deserialize)]
struct AttractorRecord {
    period: usize,
    basin_hits: u64,
    states: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct AttractorSetRecord {
    n: usize,
    samples: u64,
    not_found: u64,
    attractors: Vec<AttractorRecord>,
}

impl AttractorSet {
    fn from_map(n: usize, found: BTreeMap<NetworkState, (Attractor, u64)>, not_found: u64) -> Self {
        let (attractors, basin_hits) = found.into_values().unzip();
        AttractorSet {
            n,
            attractors,
            basin_hits,
            not_found,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn attractors(&self) -> &[Attractor] {
        &self.attractors
    }

    pub fn basin_hits(&self) -> &[u64] {
        &self.basin_hits
    }

    pub fn not_found(&self) -> u64 {
        self.not_found
    }

    pub fn len(&self) -> usize {
        self.attractors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attractors.is_empty()
    }

    /// Total number of trajectories accounted for.
    pub fn samples(&self) -> u64 {
        self.basin_hits.iter().sum::<u64>() + self.not_found
    }

    /// Labels used in distance matrices and dendrograms: `A0`, `A1`, ...
    pub fn labels(&self) -> Vec<String> {
        (0..self.len()).map(|i| format!("A{i}")).collect()
    }

    pub fn to_json(&self) -> String {
        let record = AttractorSetRecord {
            n: self.n,
            samples: self.samples(),
            not_found: self.not_found,
            attractors: self
                .attractors
                .iter()
                .zip(&self.basin_hits)
                .map(|(a, &hits)| AttractorRecord {
                    period: a.period(),
                    basin_hits: hits,
                    states: a.states.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&record).expect("plain data serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: AttractorSetRecord = serde_json::from_str(text)?;
        let invalid = |i: usize, msg: String| Error::parse(i + 1, "attractors", msg);
        let mut found = BTreeMap::new();
        for (i, a) in record.attractors.into_iter().enumerate() {
            let states = a
                .states
                .iter()
                .map(|s| s.parse::<NetworkState>().map_err(|e| invalid(i, e)))
                .collect::<Result<Vec<_>>>()?;
            if states.is_empty() || states.len() != a.period {
                return Err(invalid(
                    i,
                    format!("period {} but {} states", a.period, states.len()),
                ));
            }
            if let Some(s) = states.iter().find(|s| s.len() != record.n) {
                return Err(invalid(
                    i,
                    format!("state {s} does not have length {}", record.n),
                ));
            }
            let attractor = canonicalize(states)?;
            if found
                .insert(attractor.first().clone(), (attractor, a.basin_hits))
                .is_some()
            {
                return Err(invalid(i, "duplicate attractor".into()));
            }
        }
        let set = AttractorSet::from_map(record.n, found, record.not_found);
        if set.samples() != record.samples {
            return Err(Error::parse(
                0,
                "samples",
                format!(
                    "basin hits and not_found sum to {}, header says {}",
                    set.samples(),
                    record.samples
                ),
            ));
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Default)]
struct Partial {
    found: BTreeMap<NetworkState, (Attractor, u64)>,
    not_found: u64,
}

impl Partial {
    fn absorb(&mut self, other: Partial) {
        self.not_found += other.not_found;
        for (key, (attractor, hits)) in other.found {
            self.found.entry(key).or_insert((attractor, 0)).1 += hits;
        }
    }
}

/// Runs [`find_attractor`] from each given initial state and merges the
/// outcomes. Trajectories run in parallel; the result does not depend on the
/// number of worker threads.
pub fn attractors_from_initials(
    net: &BooleanNetwork,
    initials: &[NetworkState],
    cfg: &SearchConfig,
) -> Result<AttractorSet> {
    cfg.validate()?;
    if let Some(bad) = initials.iter().find(|s| s.len() != net.n()) {
        return Err(Error::DimensionMismatch {
            expected: net.n(),
            found: bad.len(),
        });
    }
    let partials: Vec<Partial> = initials
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut tracker = Tracker::default();
            let mut part = Partial::default();
            for initial in chunk {
                match tracker.run(net, initial, cfg) {
                    Some(a) => part.found.entry(a.first().clone()).or_insert((a, 0)).1 += 1,
                    None => part.not_found += 1,
                }
            }
            part
        })
        .collect();
    let mut merged = Partial::default();
    for p in partials {
        merged.absorb(p);
    }
    Ok(AttractorSet::from_map(
        net.n(),
        merged.found,
        merged.not_found,
    ))
}

/// Draws `num_samples` initial states uniformly with replacement (ChaCha8
/// seeded with `seed`, one `u64` per state word) and collects the attractors
/// they reach.
pub fn sample_attractors(
    net: &BooleanNetwork,
    num_samples: usize,
    cfg: &SearchConfig,
    seed: u64,
) -> Result<AttractorSet> {
    if num_samples < 1 {
        return Err(Error::InvalidParams(
            "num_samples must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initials: Vec<NetworkState> = (0..num_samples)
        .map(|_| NetworkState::random(net.n(), &mut rng))
        .collect();
    attractors_from_initials(net, &initials, cfg)
}

/// Complete attractor set with exact basin sizes, by enumerating all `2^n`
/// states. Rejects `n > EXHAUSTIVE_LIMIT`.
pub fn exhaustive_attractors(net: &BooleanNetwork) -> Result<AttractorSet> {
    let n = net.n();
    if n > EXHAUSTIVE_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    const UNSEEN: u32 = u32::MAX;
    const ON_PATH: u32 = u32::MAX - 1;

    let size = 1usize << n;
    let succ = |idx: usize| -> usize {
        let s = NetworkState::from_index(n, idx as u64);
        net.step(&s).to_index().expect("n <= 64") as usize
    };

    let mut label = vec![UNSEEN; size];
    let mut cycles: Vec<Vec<NetworkState>> = Vec::new();
    let mut path = Vec::new();
    for start in 0..size {
        if label[start] != UNSEEN {
            continue;
        }
        path.clear();
        let mut cur = start;
        while label[cur] == UNSEEN {
            label[cur] = ON_PATH;
            path.push(cur);
            cur = succ(cur);
        }
        let id = if label[cur] == ON_PATH {
            let pos = path
                .iter()
                .position(|&s| s == cur)
                .expect("state is on the path");
            cycles.push(
                path[pos..]
                    .iter()
                    .map(|&s| NetworkState::from_index(n, s as u64))
                    .collect(),
            );
            (cycles.len() - 1) as u32
        } else {
            label[cur]
        };
        for &s in &path {
            label[s] = id;
        }
    }

    let mut basins = vec![0u64; cycles.len()];
    for &l in &label {
        basins[l as usize] += 1;
    }
    let found = cycles
        .into_iter()
        .zip(basins)
        .map(|(cycle, hits)| {
            let a = canonicalize(cycle).expect("cycles are non-empty");
            (a.first().clone(), (a, hits))
        })
        .collect();
    Ok(AttractorSet::from_map(n, found, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures::*;
    use crate::network::{generate_rbn, GenerationParams};
    use proptest::prelude::*;

    fn cfg(max_steps: u64) -> SearchConfig {
        SearchConfig::new(max_steps).unwrap()
    }

    #[test]
    fn find_attractor_examples() {
        let a = find_attractor(&not1(), &st("0"), &cfg(10))
            .unwrap()
            .unwrap();
        assert_eq!(a.states(), &[st("0"), st("1")]);

        let a = find_attractor(&identity(4), &st("0110"), &cfg(10))
            .unwrap()
            .unwrap();
        assert_eq!(a.states(), &[st("0110")]);

        let a = find_attractor(&swap2(), &st("01"), &cfg(10))
            .unwrap()
            .unwrap();
        assert_eq!(a.states(), &[st("01"), st("10")]);
        let b = find_attractor(&swap2(), &st("10"), &cfg(10))
            .unwrap()
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_exhaustion_is_not_found() {
        // NOT needs two steps to see a repeat.
        assert_eq!(find_attractor(&not1(), &st("0"), &cfg(1)).unwrap(), None);
        assert!(find_attractor(&not1(), &st("0"), &cfg(2))
            .unwrap()
            .is_some());
        let capped = SearchConfig {
            max_steps: 10,
            memory_cap: Some(1),
        };
        assert_eq!(find_attractor(&not1(), &st("0"), &capped).unwrap(), None);
        assert!(SearchConfig::new(0).is_err());
        assert!(find_attractor(&not1(), &st("01"), &cfg(4)).is_err());
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(
            canonicalize(vec![st("10"), st("01")]).unwrap().states(),
            &[st("01"), st("10")]
        );
        assert_eq!(canonicalize(vec![st("0")]).unwrap().states(), &[st("0")]);
        assert!(canonicalize(vec![]).is_err());
    }

    #[test]
    fn canonical_form_is_rotation_invariant_for_a_five_cycle() {
        let cycle: Vec<_> = ["110", "011", "101", "000", "111"]
            .iter()
            .map(|s| st(s))
            .collect();
        let expect = canonicalize(cycle.clone()).unwrap();
        assert_eq!(expect.first(), &st("000"));
        for r in 0..5 {
            let mut rotated = cycle.clone();
            rotated.rotate_left(r);
            assert_eq!(canonicalize(rotated).unwrap(), expect);
        }
    }

    #[test]
    fn identity_network_sampling() {
        let net = identity(3);
        let set = sample_attractors(&net, 1000, &cfg(10), 3).unwrap();
        assert_eq!(set.samples(), 1000);
        assert_eq!(set.not_found(), 0);
        assert!(set.attractors().iter().all(|a| a.period() == 1));
        // 1000 draws from 8 states hit all of them.
        assert_eq!(set.len(), 8);

        let ex = exhaustive_attractors(&net).unwrap();
        assert_eq!(ex.len(), 8);
        assert!(ex.basin_hits().iter().all(|&b| b == 1));
    }

    #[test]
    fn not_network_has_one_attractor() {
        let set = sample_attractors(&not1(), 50, &cfg(10), 1).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.attractors()[0].period(), 2);
        let ex = exhaustive_attractors(&not1()).unwrap();
        assert_eq!(ex.basin_hits(), &[2]);
    }

    #[test]
    fn sampling_all_states_matches_exhaustive_enumeration() {
        let net = generate_rbn(&GenerationParams {
            n: 10,
            k: 3,
            bias: 0.5,
            seed: 2024,
        })
        .unwrap();
        let all: Vec<_> = (0..1u64 << 10)
            .map(|i| NetworkState::from_index(10, i))
            .collect();
        let sampled = attractors_from_initials(&net, &all, &cfg((1 << 10) + 1)).unwrap();
        let ex = exhaustive_attractors(&net).unwrap();
        assert_eq!(sampled, ex);
        assert_eq!(ex.basin_hits().iter().sum::<u64>(), 1024);
        for a in ex.attractors() {
            assert!(a.is_cycle_of(&net));
        }
    }

    #[test]
    fn exhaustive_rejects_large_networks() {
        let net = identity(EXHAUSTIVE_LIMIT + 1);
        assert!(matches!(
            exhaustive_attractors(&net),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic_and_thread_count_independent() {
        let net = generate_rbn(&GenerationParams {
            n: 30,
            k: 2,
            bias: 0.5,
            seed: 8,
        })
        .unwrap();
        let a = sample_attractors(&net, 500, &cfg(10_000), 99).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| sample_attractors(&net, 500, &cfg(10_000), 99).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let net = generate_rbn(&GenerationParams {
            n: 12,
            k: 2,
            bias: 0.5,
            seed: 4,
        })
        .unwrap();
        let set = sample_attractors(&net, 200, &cfg(5000), 1).unwrap();
        let back = AttractorSet::from_json(&set.to_json()).unwrap();
        assert_eq!(set, back);

        let bad = r#"{"n": 2, "samples": 1, "not_found": 0,
            "attractors": [{"period": 2, "basin_hits": 1, "states": ["01"]}]}"#;
        assert!(AttractorSet::from_json(bad).is_err());
        let bad = r#"{"n": 2, "samples": 5, "not_found": 0,
            "attractors": [{"period": 1, "basin_hits": 1, "states": ["01"]}]}"#;
        assert!(AttractorSet::from_json(bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn small_networks_sample_equals_exhaustive(n in 1usize..=10, k in 1usize..=3, seed: u64, bias in 0.0f64..=1.0) {
            let k = k.min(n);
            let net = generate_rbn(&GenerationParams { n, k, bias, seed }).unwrap();
            let all: Vec<_> = (0..1u64 << n).map(|i| NetworkState::from_index(n, i)).collect();
            let sampled = attractors_from_initials(&net, &all, &cfg((1 << n) + 1)).unwrap();
            let ex = exhaustive_attractors(&net).unwrap();
            prop_assert_eq!(ex.basin_hits().iter().sum::<u64>(), 1u64 << n);
            for a in sampled.attractors() {
                prop_assert!(a.is_cycle_of(&net));
            }
            prop_assert_eq!(sampled, ex);
        }

        #[test]
        fn canonical_form_ignores_rotation(n in 8usize..40, seed: u64, r in 0usize..1000) {
            let net = generate_rbn(&GenerationParams { n, k: 2, bias: 0.5, seed }).unwrap();
            let init = NetworkState::from_bits((0..n).map(|j| (seed >> (j % 64)) & 1 == 1));
            if let Some(a) = find_attractor(&net, &init, &cfg(1 << 16)).unwrap() {
                let mut rotated = a.states().to_vec();
                rotated.rotate_left(r % a.period());
                prop_assert_eq!(canonicalize(rotated).unwrap(), a);
            }
        }
    }
}
