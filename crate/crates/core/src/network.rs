//! Boolean network model: states, node functions, random generation and the
//! synchronous update step.
//!
//! States are bit-packed into 64-bit words. Variable `x_j` lives in word
//! `j / 64` at bit `63 - j % 64`, so comparing the word vectors as unsigned
//! integers orders states lexicographically with `x_0` most significant.
//! Unused low bits of the last word are always zero.
//!
//! Truth tables are indexed with the first listed input as the least
//! significant bit: `idx = sum_j x_{inputs[j]} << j`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

/// Largest in-degree accepted; a node's table has `2^k` entries.
pub const MAX_IN_DEGREE: usize = 24;

fn word_count(n: usize) -> usize {
    n.div_ceil(WORD_BITS)
}

#[inline]
fn bit_of(j: usize) -> (usize, u32) {
    (j / WORD_BITS, (WORD_BITS - 1 - j % WORD_BITS) as u32)
}

/// A network state `s = <x_0, ..., x_{n-1}>`.
///
/// Ordering is lexicographic with `x_0` most significant. Networks with up to
/// 128 nodes keep their state inline without allocation.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NetworkState {
    words: SmallVec<[u64; 2]>,
    len: usize,
}

impl NetworkState {
    pub fn zeros(n: usize) -> Self {
        NetworkState {
            words: SmallVec::from_elem(0, word_count(n)),
            len: n,
        }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut state = NetworkState::zeros(bits.len());
        for (j, b) in bits.into_iter().enumerate() {
            state.set(j, b);
        }
        state
    }

    /// Builds the state whose `n`-bit binary expansion (x_0 first) is `index`.
    /// Requires `n <= 64`.
    pub fn from_index(n: usize, index: u64) -> Self {
        assert!(n <= WORD_BITS, "from_index supports n <= 64");
        let mut state = NetworkState::zeros(n);
        if n > 0 {
            state.words[0] = index << (WORD_BITS - n);
        }
        state
    }

    /// Inverse of [`NetworkState::from_index`]; `None` when `n > 64`.
    pub fn to_index(&self) -> Option<u64> {
        match self.len {
            0 => Some(0),
            n if n <= WORD_BITS => Some(self.words[0] >> (WORD_BITS - n)),
            _ => None,
        }
    }

    /// Uniform draw from `{0,1}^n`, consuming one `u64` per word.
    pub fn random<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut state = NetworkState::zeros(n);
        for w in state.words.iter_mut() {
            *w = rng.next_u64();
        }
        state.clear_padding();
        state
    }

    fn clear_padding(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= !0u64 << (WORD_BITS - rem);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        assert!(j < self.len, "bit {j} out of range for length {}", self.len);
        let (w, s) = bit_of(j);
        (self.words[w] >> s) & 1 == 1
    }

    pub fn set(&mut self, j: usize, value: bool) {
        assert!(j < self.len, "bit {j} out of range for length {}", self.len);
        let (w, s) = bit_of(j);
        if value {
            self.words[w] |= 1 << s;
        } else {
            self.words[w] &= !(1 << s);
        }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |j| self.get(j))
    }

    /// Number of positions where the two states differ.
    pub fn hamming(&self, other: &NetworkState) -> Result<u32> {
        if self.len != other.len {
            return Err(Error::DimensionMismatch {
                expected: self.len,
                found: other.len,
            });
        }
        Ok(self.hamming_unchecked(other))
    }

    #[inline]
    pub(crate) fn hamming_unchecked(&self, other: &NetworkState) -> u32 {
        self.words
            .iter()
            .zip(other.words.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }
}

impl fmt::Display for NetworkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for NetworkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NetworkState({self})")
    }
}

impl FromStr for NetworkState {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid state character {other:?}")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(NetworkState::from_bits(bits))
    }
}

/// A node's Boolean function `f_i(x_{i_1}, ..., x_{i_k})` as a truth table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeFunction {
    inputs: Vec<usize>,
    table: Vec<bool>,
}

impl NodeFunction {
    pub fn new(inputs: Vec<usize>, table: Vec<bool>) -> Result<Self> {
        let k = inputs.len();
        if k > MAX_IN_DEGREE {
            return Err(Error::InvalidParams(format!(
                "in-degree {k} exceeds the supported maximum {MAX_IN_DEGREE}"
            )));
        }
        if table.len() != 1 << k {
            return Err(Error::InvalidParams(format!(
                "truth table for {k} inputs needs {} entries, got {}",
                1usize << k,
                table.len()
            )));
        }
        let mut sorted = inputs.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParams(format!(
                "duplicate input in {inputs:?}"
            )));
        }
        Ok(NodeFunction { inputs, table })
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    pub fn k(&self) -> usize {
        self.inputs.len()
    }

    /// Truth-table lookup; the first input is the least significant index bit.
    pub fn eval(&self, state: &NetworkState) -> bool {
        let idx = self
            .inputs
            .iter()
            .enumerate()
            .fold(0usize, |idx, (j, &input)| {
                idx | (state.get(input) as usize) << j
            });
        self.table[idx]
    }
}

/// Bias and seed a network was generated from, when known.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Origin {
    pub bias: f64,
    pub seed: u64,
}

/// Update loop backend chosen at construction.
#[derive(Clone, Debug)]
enum Kernel {
    Sliced(SlicedKernel),
    PerNode(PerNodeKernel),
}

impl Kernel {
    fn compile(n: usize, k: usize, nodes: &[NodeFunction]) -> Self {
        match SlicedKernel::compile(n, k, nodes) {
            Some(s) => Kernel::Sliced(s),
            None => Kernel::PerNode(PerNodeKernel::compile(n, k, nodes)),
        }
    }

    #[inline]
    fn step(&self, src: &[u64], dst: &mut [u64]) {
        match self {
            Kernel::Sliced(s) => s.step(src, dst),
            Kernel::PerNode(p) => p.step(src, dst),
        }
    }

    fn words(&self) -> usize {
        match self {
            Kernel::Sliced(s) => s.words,
            Kernel::PerNode(p) => p.words,
        }
    }
}

/// Evaluates all nodes at once on packed words.
///
/// For each input slot `j` a gathered word vector `G_j` is built whose bit
/// `i` is node `i`'s `j`-th input. Gathering reads the source state one byte
/// at a time through lookup tables that map each byte value to its
/// contribution to every `G_j`. The truth tables are stored column-wise
/// (`T_idx` has bit `i` = `table_i[idx]`) and reduced by a multiplexer tree
/// keyed on `G_{k-1}, ..., G_0`.
#[derive(Clone, Debug)]
struct SlicedKernel {
    words: usize,
    k: usize,
    /// (word, byte shift) of every source byte that feeds some node.
    bytes: Vec<(usize, u32)>,
    /// `[byte][value][slot][word]`
    lut: Vec<u64>,
    /// `[idx][word]`
    columns: Vec<u64>,
}

impl SlicedKernel {
    const MAX_K: usize = 6;
    const MAX_LUT_WORDS: usize = 1 << 19;

    fn compile(n: usize, k: usize, nodes: &[NodeFunction]) -> Option<Self> {
        let words = word_count(n);
        if k > Self::MAX_K {
            return None;
        }
        // bytes that hold at least one tapped bit, in a fixed order
        let mut tapped: Vec<(usize, u32)> = nodes
            .iter()
            .flat_map(|f| f.inputs.iter())
            .map(|&x| {
                let (w, s) = bit_of(x);
                (w, s / 8 * 8)
            })
            .collect();
        tapped.sort_unstable();
        tapped.dedup();
        let stride = k * words;
        if tapped.len() * 256 * stride > Self::MAX_LUT_WORDS {
            return None;
        }
        let mut lut = vec![0u64; tapped.len() * 256 * stride];
        for (i, f) in nodes.iter().enumerate() {
            let (ow, os) = bit_of(i);
            for (j, &x) in f.inputs.iter().enumerate() {
                let (w, s) = bit_of(x);
                let b = tapped
                    .binary_search(&(w, s / 8 * 8))
                    .expect("byte was collected");
                let bit = s % 8;
                for v in (0..256usize).filter(|v| (v >> bit) & 1 == 1) {
                    lut[(b * 256 + v) * stride + j * words + ow] |= 1 << os;
                }
            }
        }
        let mut columns = vec![0u64; (1 << k) * words];
        for (i, f) in nodes.iter().enumerate() {
            let (ow, os) = bit_of(i);
            for (idx, &t) in f.table.iter().enumerate() {
                if t {
                    columns[idx * words + ow] |= 1 << os;
                }
            }
        }
        Some(SlicedKernel {
            words,
            k,
            bytes: tapped,
            lut,
            columns,
        })
    }

    #[inline]
    fn step(&self, src: &[u64], dst: &mut [u64]) {
        match (self.words, self.k) {
            (1, 1) => self.step_fixed::<1, 1>(src, dst),
            (1, 2) => self.step_fixed::<1, 2>(src, dst),
            (1, 3) => self.step_fixed::<1, 3>(src, dst),
            (1, 4) => self.step_fixed::<1, 4>(src, dst),
            (2, 1) => self.step_fixed::<2, 1>(src, dst),
            (2, 2) => self.step_fixed::<2, 2>(src, dst),
            (2, 3) => self.step_fixed::<2, 3>(src, dst),
            (2, 4) => self.step_fixed::<2, 4>(src, dst),
            _ => self.step_dyn(src, dst),
        }
    }

    #[inline]
    fn step_fixed<const W: usize, const K: usize>(&self, src: &[u64], dst: &mut [u64]) {
        let mut gathered = [[0u64; W]; K];
        for (b, &(w, shift)) in self.bytes.iter().enumerate() {
            let v = ((src[w] >> shift) & 0xFF) as usize;
            let base = (b * 256 + v) * K * W;
            let row = &self.lut[base..base + K * W];
            for j in 0..K {
                for x in 0..W {
                    gathered[j][x] |= row[j * W + x];
                }
            }
        }
        for x in 0..W {
            let mut level = [0u64; 16];
            for (idx, slot) in level[..1 << K].iter_mut().enumerate() {
                *slot = self.columns[idx * W + x];
            }
            let mut len = 1 << K;
            for j in (0..K).rev() {
                let sel = gathered[j][x];
                len /= 2;
                for idx in 0..len {
                    level[idx] = (level[idx] & !sel) | (level[idx + len] & sel);
                }
            }
            dst[x] = level[0];
        }
    }

    fn step_dyn(&self, src: &[u64], dst: &mut [u64]) {
        const STACK: usize = 2 * SlicedKernel::MAX_K;
        let words = self.words;
        let stride = self.k * words;
        let mut gathered_small = [0u64; STACK];
        let mut gathered_big;
        let gathered: &mut [u64] = if stride <= STACK {
            &mut gathered_small[..stride]
        } else {
            gathered_big = vec![0u64; stride];
            &mut gathered_big
        };
        for (b, &(w, shift)) in self.bytes.iter().enumerate() {
            let v = ((src[w] >> shift) & 0xFF) as usize;
            let row = &self.lut[(b * 256 + v) * stride..(b * 256 + v + 1) * stride];
            for (g, &r) in gathered.iter_mut().zip(row) {
                *g |= r;
            }
        }
        for w in 0..words {
            let mut level = [0u64; 1 << SlicedKernel::MAX_K];
            let mut len = 1usize << self.k;
            for (idx, slot) in level[..len].iter_mut().enumerate() {
                *slot = self.columns[idx * words + w];
            }
            // fold the most significant slot first
            for j in (0..self.k).rev() {
                let sel = gathered[j * words + w];
                len /= 2;
                for idx in 0..len {
                    let (lo, hi) = (level[idx], level[idx + len]);
                    level[idx] = (lo & !sel) | (hi & sel);
                }
            }
            dst[w] = level[0];
        }
    }
}

/// Truth-table lookup node by node, for any in-degree.
#[derive(Clone, Debug)]
struct PerNodeKernel {
    words: usize,
    k: usize,
    taps: Vec<u32>,
    table_words: usize,
    tables: Vec<u64>,
}

impl PerNodeKernel {
    fn compile(n: usize, k: usize, nodes: &[NodeFunction]) -> Self {
        let table_words = (1usize << k).div_ceil(WORD_BITS);
        let mut taps = Vec::with_capacity(n * k);
        let mut tables = vec![0u64; n * table_words];
        for (i, node) in nodes.iter().enumerate() {
            taps.extend(node.inputs.iter().map(|&x| x as u32));
            for (idx, &bit) in node.table.iter().enumerate() {
                if bit {
                    tables[i * table_words + idx / WORD_BITS] |= 1 << (idx % WORD_BITS);
                }
            }
        }
        PerNodeKernel {
            words: word_count(n),
            k,
            taps,
            table_words,
            tables,
        }
    }

    #[inline]
    fn tap(src: &[u64], pos: u32) -> usize {
        let (w, s) = bit_of(pos as usize);
        ((src[w] >> s) & 1) as usize
    }

    fn step(&self, src: &[u64], dst: &mut [u64]) {
        dst.fill(0);
        let n = self.tables.len() / self.table_words;
        for i in 0..n {
            let taps = &self.taps[i * self.k..(i + 1) * self.k];
            let idx = taps
                .iter()
                .enumerate()
                .fold(0usize, |idx, (j, &pos)| idx | Self::tap(src, pos) << j);
            let table = &self.tables[i * self.table_words..(i + 1) * self.table_words];
            let bit = (table[idx / WORD_BITS] >> (idx % WORD_BITS)) & 1;
            let (w, s) = bit_of(i);
            dst[w] |= bit << s;
        }
    }
}

/// An immutable Boolean network with uniform in-degree `k`.
#[derive(Clone, Debug)]
pub struct BooleanNetwork {
    k: usize,
    nodes: Vec<NodeFunction>,
    origin: Option<Origin>,
    kernel: Kernel,
}

impl PartialEq for BooleanNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.nodes == other.nodes && self.origin == other.origin
    }
}

impl BooleanNetwork {
    pub fn new(nodes: Vec<NodeFunction>) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::InvalidParams(
                "network needs at least one node".into(),
            ));
        }
        let k = nodes[0].k();
        for (i, node) in nodes.iter().enumerate() {
            if node.k() != k {
                return Err(Error::InvalidParams(format!(
                    "node {i} has {} inputs, expected {k}",
                    node.k()
                )));
            }
            if let Some(&bad) = node.inputs.iter().find(|&&x| x >= n) {
                return Err(Error::InvalidParams(format!(
                    "node {i} input {bad} out of range for n = {n}"
                )));
            }
        }
        let kernel = Kernel::compile(n, k, &nodes);
        Ok(BooleanNetwork {
            k,
            nodes,
            origin: None,
            kernel,
        })
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nodes(&self) -> &[NodeFunction] {
        &self.nodes
    }

    pub fn origin(&self) -> Option<Origin> {
        self.origin
    }

    /// One synchronous update: every node reads `state` and all write at once.
    pub fn step(&self, state: &NetworkState) -> NetworkState {
        let mut next = NetworkState::zeros(self.n());
        self.step_into(state, &mut next);
        next
    }

    /// Writes the successor of `src` into `dst`. Both must have length `n`.
    #[inline]
    pub fn step_into(&self, src: &NetworkState, dst: &mut NetworkState) {
        debug_assert_eq!(src.len, self.n());
        debug_assert_eq!(dst.len, self.n());
        debug_assert_eq!(src.words.len(), self.kernel.words());
        self.kernel.step(&src.words, &mut dst.words);
    }

    /// Line-oriented text form; see [`BooleanNetwork::from_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("rbn-network 1\n");
        out.push_str(&format!("n {}\nk {}\n", self.n(), self.k));
        if let Some(origin) = self.origin {
            out.push_str(&format!("bias {}\nseed {}\n", origin.bias, origin.seed));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            out.push_str(&format!("node {i} inputs"));
            for x in &node.inputs {
                out.push_str(&format!(" {x}"));
            }
            out.push_str(" table ");
            out.extend(node.table.iter().map(|&b| if b { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }

    /// Parses the text form:
    ///
    /// ```text
    /// rbn-network 1
    /// n 2
    /// k 1
    /// bias 0.5        (optional, together with seed)
    /// seed 7          (optional)
    /// node 0 inputs 1 table 01
    /// node 1 inputs 0 table 01
    /// ```
    ///
    /// Blank lines and lines starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .peekable();
        let mut last_line = 0;

        fn num<T: FromStr>(line: usize, field: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::parse(line, field, format!("invalid value `{v}`")))
        }

        let (line, version) = header(&mut last_line, "rbn-network", &mut lines)?;
        if version != "1" {
            return Err(Error::parse(
                line,
                "rbn-network",
                format!("unsupported version {version}"),
            ));
        }
        let (line, v) = header(&mut last_line, "n", &mut lines)?;
        let n: usize = num(line, "n", &v)?;
        let (line, v) = header(&mut last_line, "k", &mut lines)?;
        let k: usize = num(line, "k", &v)?;
        if k > MAX_IN_DEGREE {
            return Err(Error::parse(
                line,
                "k",
                format!("k = {k} exceeds {MAX_IN_DEGREE}"),
            ));
        }

        let mut origin = None;
        if lines.peek().is_some_and(|(_, l)| l.starts_with("bias")) {
            let (line, v) = header(&mut last_line, "bias", &mut lines)?;
            let bias: f64 = num(line, "bias", &v)?;
            let (line, v) = header(&mut last_line, "seed", &mut lines)?;
            let seed: u64 = num(line, "seed", &v)?;
            origin = Some(Origin { bias, seed });
        }

        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let (line, content) = lines.next().ok_or_else(|| {
                Error::parse(
                    last_line + 1,
                    "node",
                    format!("expected {n} node lines, found {i}"),
                )
            })?;
            last_line = line;
            let parts: Vec<&str> = content.split_whitespace().collect();
            if parts.len() != k + 5
                || parts[0] != "node"
                || parts[2] != "inputs"
                || parts[k + 3] != "table"
            {
                return Err(Error::parse(
                    line,
                    "node",
                    format!("expected `node {i} inputs <{k} indices> table <bits>`"),
                ));
            }
            let idx: usize = num(line, "node", parts[1])?;
            if idx != i {
                return Err(Error::parse(
                    line,
                    "node",
                    format!("expected node {i}, found {idx}"),
                ));
            }
            let inputs = parts[3..3 + k]
                .iter()
                .map(|v| num::<usize>(line, "inputs", v))
                .collect::<Result<Vec<_>>>()?;
            let table = parts[k + 4]
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(Error::parse(
                        line,
                        "table",
                        format!("invalid table character {c:?}"),
                    )),
                })
                .collect::<Result<Vec<_>>>()?;
            let node = NodeFunction::new(inputs, table)
                .map_err(|e| Error::parse(line, "node", e.to_string()))?;
            nodes.push(node);
        }
        if let Some((line, content)) = lines.next() {
            return Err(Error::parse(
                line,
                "node",
                format!("unexpected trailing content `{content}`"),
            ));
        }
        let net = BooleanNetwork::new(nodes)
            .map_err(|e| Error::parse(last_line, "network", e.to_string()))?;
        Ok(match origin {
            Some(o) => net.with_origin(o),
            None => net,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn header<'a, I>(last_line: &mut usize, key: &str, lines: &mut I) -> Result<(usize, String)>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    let (line, content) = lines
        .next()
        .ok_or_else(|| Error::parse(*last_line + 1, key, "unexpected end of file"))?;
    *last_line = line;
    let mut parts = content.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some(k), Some(v), None) if k == key => Ok((line, v.to_string())),
        _ => Err(Error::parse(
            line,
            key,
            format!("expected `{key} <value>`, got `{content}`"),
        )),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub n: usize,
    pub k: usize,
    pub bias: f64,
    pub seed: u64,
}

impl GenerationParams {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.k > self.n {
            return Err(Error::InvalidParams(format!(
                "k must satisfy 1 <= k <= n, got k = {}, n = {}",
                self.k, self.n
            )));
        }
        if self.k > MAX_IN_DEGREE {
            return Err(Error::InvalidParams(format!(
                "k = {} exceeds {MAX_IN_DEGREE}",
                self.k
            )));
        }
        if !(0.0..=1.0).contains(&self.bias) {
            return Err(Error::InvalidParams(format!(
                "bias {} outside [0, 1]",
                self.bias
            )));
        }
        Ok(())
    }
}

/// Generates a random Boolean network.
///
/// The random stream is ChaCha8 seeded with `seed_from_u64(params.seed)`.
/// Nodes are drawn in order 0..n: first `k` distinct inputs sampled uniformly
/// without replacement from all `n` nodes (self-inputs allowed), then the `2^k`
/// table entries in index order, each 1 with probability `bias`.
pub fn generate_rbn(params: &GenerationParams) -> Result<BooleanNetwork> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let nodes = (0..params.n)
        .map(|_| {
            let inputs = index::sample(&mut rng, params.n, params.k).into_vec();
            let table = (0..1usize << params.k)
                .map(|_| rng.gen_bool(params.bias))
                .collect();
            NodeFunction::new(inputs, table)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BooleanNetwork::new(nodes)?.with_origin(Origin {
        bias: params.bias,
        seed: params.seed,
    }))
}

/// Bias on the order/chaos critical line for in-degree `k`: the root
/// `p >= 1/2` of `2p(1-p) = 1/k`.
pub fn critical_bias(k: u32) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidParams(format!(
            "critical bias needs k >= 2 (2p(1-p) = 1/{k} has no root), got {k}"
        )));
    }
    Ok(0.5 * (1.0 + (1.0 - 2.0 / k as f64).sqrt()))
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn state_order_is_lexicographic_with_bit_zero_most_significant() {
        assert!(st("01") < st("10"));
        assert!(st("0111") < st("1000"));
        let mut wide = NetworkState::zeros(70);
        let mut wider = NetworkState::zeros(70);
        wide.set(69, true);
        wider.set(0, true);
        assert!(wide < wider);
        assert_eq!(st("0110").to_string(), "0110");
    }

    #[test]
    fn index_round_trip() {
        for idx in 0..16 {
            let s = NetworkState::from_index(4, idx);
            assert_eq!(s.to_index(), Some(idx));
        }
        assert_eq!(NetworkState::from_index(3, 0b100), st("100"));
    }

    #[test]
    fn eval_node_examples() {
        let xor = NodeFunction::new(vec![0, 1], vec![false, true, true, false]).unwrap();
        // a = 1, b = 0 -> idx 1
        assert!(xor.eval(&st("10")));
        assert!(!xor.eval(&st("11")));
        let zero = NodeFunction::new(vec![0, 1], vec![false; 4]).unwrap();
        assert!(!zero.eval(&st("11")));
        let ident = NodeFunction::new(vec![0], vec![false, true]).unwrap();
        assert!(ident.eval(&st("1")));
    }

    #[test]
    fn first_input_is_least_significant() {
        // table is 1 only at idx 2 = (first input 0, second input 1)
        let f = NodeFunction::new(vec![0, 1], vec![false, false, true, false]).unwrap();
        assert!(f.eval(&st("01")));
        assert!(!f.eval(&st("10")));
    }

    #[test]
    fn node_function_rejects_bad_tables() {
        assert!(NodeFunction::new(vec![0, 1], vec![true; 3]).is_err());
        assert!(NodeFunction::new(vec![1, 1], vec![true; 4]).is_err());
        let bad = NodeFunction::new(vec![3], vec![false, true]).unwrap();
        assert!(BooleanNetwork::new(vec![bad]).is_err());
    }

    #[test]
    fn step_examples() {
        assert_eq!(identity(4).step(&st("0110")), st("0110"));
        assert_eq!(not1().step(&st("0")), st("1"));
        assert_eq!(swap2().step(&st("01")), st("10"));
    }

    #[test]
    fn all_ones_bias_gives_all_ones_tables() {
        let net = generate_rbn(&GenerationParams {
            n: 3,
            k: 3,
            bias: 1.0,
            seed: 9,
        })
        .unwrap();
        assert!(net.nodes().iter().all(|f| f.table().iter().all(|&b| b)));
        let zero = generate_rbn(&GenerationParams {
            n: 3,
            k: 3,
            bias: 0.0,
            seed: 9,
        })
        .unwrap();
        assert!(zero.nodes().iter().all(|f| f.table().iter().all(|&b| !b)));
    }

    #[test]
    fn generation_is_deterministic() {
        let p = GenerationParams {
            n: 70,
            k: 3,
            bias: 0.788675,
            seed: 1234,
        };
        let a = generate_rbn(&p).unwrap();
        let b = generate_rbn(&p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_text(), b.to_text());
        let c = generate_rbn(&GenerationParams { seed: 1235, ..p }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generation_rejects_invalid_params() {
        assert!(generate_rbn(&GenerationParams {
            n: 2,
            k: 3,
            bias: 0.5,
            seed: 0
        })
        .is_err());
        assert!(generate_rbn(&GenerationParams {
            n: 5,
            k: 0,
            bias: 0.5,
            seed: 0
        })
        .is_err());
        assert!(generate_rbn(&GenerationParams {
            n: 5,
            k: 2,
            bias: 1.5,
            seed: 0
        })
        .is_err());
        assert!(generate_rbn(&GenerationParams {
            n: 5,
            k: 2,
            bias: -0.1,
            seed: 0
        })
        .is_err());
    }

    #[test]
    fn table_bias_matches_binomial_expectation() {
        // 1000 networks * 10 nodes * 4 entries = 40000 draws; sd ~ 0.0025.
        let mut ones = 0usize;
        let mut total = 0usize;
        for seed in 0..1000 {
            let net = generate_rbn(&GenerationParams {
                n: 10,
                k: 2,
                bias: 0.5,
                seed,
            })
            .unwrap();
            for f in net.nodes() {
                ones += f.table().iter().filter(|&&b| b).count();
                total += f.table().len();
            }
        }
        let frac = ones as f64 / total as f64;
        assert!((frac - 0.5).abs() <= 0.02, "fraction {frac}");
    }

    #[test]
    fn generated_nodes_have_distinct_inputs() {
        let net = generate_rbn(&GenerationParams {
            n: 8,
            k: 5,
            bias: 0.3,
            seed: 77,
        })
        .unwrap();
        for f in net.nodes() {
            assert_eq!(f.table().len(), 32);
            let mut ins = f.inputs().to_vec();
            ins.sort();
            ins.dedup();
            assert_eq!(ins.len(), 5);
        }
    }

    #[test]
    fn critical_bias_examples() {
        assert!((critical_bias(3).unwrap() - 0.788675).abs() <= 1e-6);
        assert_eq!(critical_bias(2).unwrap(), 0.5);
        assert!((critical_bias(4).unwrap() - (1.0 + 0.5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!(critical_bias(1).is_err());
        assert!(critical_bias(0).is_err());
        for k in 2..=64 {
            let p = critical_bias(k).unwrap();
            assert!((2.0 * p * (1.0 - p) - 1.0 / k as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn text_round_trip_and_hand_written_file() {
        let net = generate_rbn(&GenerationParams {
            n: 12,
            k: 3,
            bias: 0.788675,
            seed: 5,
        })
        .unwrap();
        let back = BooleanNetwork::from_text(&net.to_text()).unwrap();
        assert_eq!(net, back);

        let swap = "rbn-network 1\nn 2\nk 1\nnode 0 inputs 1 table 01\nnode 1 inputs 0 table 01\n";
        let net = BooleanNetwork::from_text(swap).unwrap();
        assert_eq!(net.step(&st("01")), st("10"));
        assert_eq!(net.origin(), None);
    }

    #[test]
    fn truncated_and_malformed_files_report_location() {
        let text = generate_rbn(&GenerationParams {
            n: 4,
            k: 2,
            bias: 0.5,
            seed: 1,
        })
        .unwrap()
        .to_text();
        let truncated: String = text.lines().take(5).collect::<Vec<_>>().join("\n");
        match BooleanNetwork::from_text(&truncated) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "node"),
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad = text.replace("table ", "table 2");
        match BooleanNetwork::from_text(&bad) {
            Err(Error::Parse { line, field, .. }) => {
                assert_eq!(line, 6);
                assert_eq!(field, "table");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(BooleanNetwork::from_text("").is_err());
        assert!(BooleanNetwork::from_text("rbn-network 1\nn x\n").is_err());
    }

    fn naive_step(net: &BooleanNetwork, s: &NetworkState) -> NetworkState {
        NetworkState::from_bits(net.nodes().iter().map(|f| f.eval(s)))
    }

    proptest! {
        #[test]
        fn packed_step_matches_per_node_eval(n in 1usize..300, k in 1usize..9, seed: u64, state_seed: u64) {
            let k = k.min(n);
            let net = generate_rbn(&GenerationParams { n, k, bias: 0.5, seed }).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(state_seed);
            let s = NetworkState::random(n, &mut rng);
            prop_assert_eq!(net.step(&s), naive_step(&net, &s));
        }

        #[test]
        fn random_states_keep_padding_clear(n in 1usize..200, seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = NetworkState::random(n, &mut rng);
            let t: NetworkState = s.to_string().parse().unwrap();
            prop_assert_eq!(s, t);
        }
    }

    #[test]
    fn constant_functions_ignore_the_state() {
        let nodes = vec![
            NodeFunction::new(vec![1, 2], vec![true; 4]).unwrap(),
            NodeFunction::new(vec![0, 2], vec![false; 4]).unwrap(),
            NodeFunction::new(vec![0, 1], vec![true; 4]).unwrap(),
        ];
        let net = BooleanNetwork::new(nodes).unwrap();
        for idx in 0..8 {
            assert_eq!(net.step(&NetworkState::from_index(3, idx)), st("101"));
        }
    }
}
