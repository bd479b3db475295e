//! Packing, rescaling, sub-automata and bounded simulation search.
//!
//! The shift is `σ_z(c)_x = c_{x-z}`, so `σ_1` moves every cell one step to
//! the right. A block of `m` cells `(c_0, ..., c_{m-1})` is the state
//! `Σ c_i n^{m-1-i}` of the packed alphabet.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rule::{
    apply_local, index_tuple, lcm, tuple_count, window_for, PConfig, Rule, State, DENSIFY_CAP,
};

/// Bound on the tuples inspected by one exhaustive commutation check.
pub const COMMUTATION_CAP: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RescaleParams {
    pub m: usize,
    pub t: usize,
    pub z: i64,
}

impl RescaleParams {
    pub fn new(m: usize, t: usize, z: i64) -> Result<RescaleParams> {
        if m == 0 || t == 0 {
            return Err(Error::InvalidArg(format!("m = {m}, t = {t} must be >= 1")));
        }
        Ok(RescaleParams { m, t, z })
    }

    pub const IDENTITY: RescaleParams = RescaleParams { m: 1, t: 1, z: 0 };
}

impl fmt::Display for RescaleParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.m, self.t, self.z)
    }
}

/// Size `n^m` of the packed alphabet, as long as states fit a `u32`.
pub fn block_alphabet(n: usize, m: usize) -> Result<usize> {
    tuple_count(n, m)
        .filter(|&s| s <= u32::MAX as usize)
        .ok_or_else(|| Error::TooLarge(format!("{n}^{m} block states")))
}

pub fn pack_block(n: usize, cells: &[State]) -> State {
    cells.iter().fold(0, |acc, &c| acc * n as State + c)
}

pub fn unpack_block(n: usize, m: usize, mut s: State) -> Vec<State> {
    let mut cells = vec![0; m];
    for slot in cells.iter_mut().rev() {
        *slot = s % n as State;
        s /= n as State;
    }
    cells
}

/// `b_m`: groups `m` consecutive cells into one, starting at cell 0.
pub fn pack(c: &PConfig, n: usize, m: usize) -> Result<PConfig> {
    block_alphabet(n, m)?;
    let len = lcm(c.period(), m);
    let word = (0..len / m)
        .map(|b| pack_block(n, &c.window((b * m) as i64, m)))
        .collect();
    PConfig::new(word)
}

pub fn unpack(c: &PConfig, n: usize, m: usize) -> Result<PConfig> {
    let word = c
        .word()
        .iter()
        .flat_map(|&s| unpack_block(n, m, s))
        .collect();
    PConfig::new(word)
}

/// `σ_z`.
pub fn shift(c: &PConfig, z: i64) -> PConfig {
    c.rotate(-z)
}

/// `⟨A⟩^{m,t,z}`: the rule whose global map is `b_m ∘ σ_z ∘ G^t ∘ b_m^{-1}`.
///
/// The window is the exact block cone of `t` applications plus the shift,
/// then trimmed while border neighbours are ignored. Small results are
/// tabulated; large ones stay intensional.
pub fn rescale_rule(rule: &Rule, p: RescaleParams) -> Result<Rule> {
    let RescaleParams { m, t, z } = RescaleParams::new(p.m, p.t, p.z)?;
    if m == 1 && t == 1 && z == 0 {
        return Ok(rule.clone());
    }
    let n = rule.n();
    let n_new = block_alphabet(n, m)?;
    let (mi, ti) = (m as i64, t as i64);
    let (left, right) = (rule.left() as i64, rule.right() as i64);
    let lo = (-z - ti * left).div_euclid(mi);
    let hi = (mi - 1 - z + ti * right).div_euclid(mi);
    let a = (-lo).max(0) as usize;
    let b = hi.max(0) as usize;
    let k_new = window_for(a, b);
    let left_new = ((k_new - 1) / 2) as i64;
    let inner = rule.clone();
    let id = format!("{}^[{m},{t},{z}]", rule.id());
    let eval = move |u: &[State]| -> State {
        let mut cells: Vec<State> = u.iter().flat_map(|&s| unpack_block(n, m, s)).collect();
        // coordinate of cells[0] relative to the first cell of block 0
        let mut start = -left_new * mi;
        for _ in 0..t {
            cells = apply_local(&inner, &cells).expect("states in range");
            start += left;
        }
        let out: Vec<State> = (0..mi)
            .map(|i| cells[(i - z - start) as usize])
            .collect();
        pack_block(n, &out)
    };
    let lazy = Rule::intensional(n_new, k_new, id, eval);
    let small = tuple_count(n_new, k_new).is_some_and(|c| c <= DENSIFY_CAP);
    if small {
        Ok(trim_window(&lazy.densify(DENSIFY_CAP)?))
    } else {
        Ok(lazy)
    }
}

/// Removes border neighbours the rule ignores, keeping the standard window
/// shape: an even window drops its rightmost neighbour, an odd one its leftmost.
pub fn trim_window(rule: &Rule) -> Rule {
    let mut rule = rule.clone();
    while rule.k() > 1 && rule.is_dense() {
        let (n, k) = (rule.n(), rule.k());
        let drop = if k % 2 == 0 { k - 1 } else { 0 };
        let table = rule.table().unwrap();
        let total = table.len();
        let stride = n.pow((k - 1 - drop) as u32);
        let ignored = (0..total)
            .filter(|i| (i / stride) % n == 0)
            .all(|i| (1..n).all(|v| table[i + v * stride] == table[i]));
        if !ignored {
            break;
        }
        let smaller: Vec<State> = (0..total)
            .filter(|i| (i / stride) % n == 0)
            .map(|i| table[i])
            .collect();
        rule = Rule::dense(n, k - 1, smaller).expect("trimmed table");
    }
    rule
}

/// Injective map between state sets.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StateMap {
    map: Vec<State>,
}

impl StateMap {
    pub fn new(map: Vec<State>, target_n: usize) -> Result<StateMap> {
        let mut seen = vec![false; target_n];
        for &s in &map {
            let slot = seen
                .get_mut(s as usize)
                .ok_or_else(|| Error::InvalidMap(format!("image {s} outside 0..{target_n}")))?;
            if *slot {
                return Err(Error::InvalidMap(format!("state {s} hit twice")));
            }
            *slot = true;
        }
        Ok(StateMap { map })
    }

    pub fn identity(n: usize) -> StateMap {
        StateMap {
            map: (0..n as State).collect(),
        }
    }

    pub fn apply(&self, s: State) -> State {
        self.map[s as usize]
    }

    pub fn as_slice(&self) -> &[State] {
        &self.map
    }

    pub fn source_n(&self) -> usize {
        self.map.len()
    }

    /// Uniform extension to configurations.
    pub fn apply_config(&self, c: &PConfig) -> PConfig {
        PConfig::new(c.word().iter().map(|&s| self.apply(s)).collect()).expect("non-empty")
    }
}

/// Both rules read through the smallest window containing both windows.
pub fn align_windows(b: &Rule, a: &Rule) -> Result<(Rule, Rule)> {
    let k = window_for(b.left().max(a.left()), b.right().max(a.right()));
    Ok((b.extend_window(k)?, a.extend_window(k)?))
}

/// `φ ∘ G_B = G_A ∘ φ`, checked on every neighbourhood tuple of `B`.
pub fn verify_commutation(b: &Rule, a: &Rule, phi: &StateMap) -> Result<bool> {
    if phi.source_n() != b.n() {
        return Err(Error::InvalidMap(format!(
            "map has {} sources, rule has {} states",
            phi.source_n(),
            b.n()
        )));
    }
    StateMap::new(phi.as_slice().to_vec(), a.n())?;
    let (b, a) = align_windows(b, a)?;
    let total = tuple_count(b.n(), b.k())
        .filter(|&t| t <= COMMUTATION_CAP)
        .ok_or_else(|| Error::TooLarge(format!("{}^{} tuples", b.n(), b.k())))?;
    let mut image = vec![0; b.k()];
    Ok((0..total).all(|i| {
        let u = index_tuple(b.n(), b.k(), i);
        for (slot, &s) in image.iter_mut().zip(&u) {
            *slot = phi.apply(s);
        }
        phi.apply(b.eval(&u)) == a.eval(&image)
    }))
}

struct SubSearch<'r> {
    b: &'r Rule,
    a: &'r Rule,
    phi: Vec<Option<State>>,
    used: Vec<bool>,
    nodes: u64,
    budget: u64,
}

impl SubSearch<'_> {
    fn assign(&mut self, s: usize, v: State, trail: &mut Vec<usize>) {
        self.phi[s] = Some(v);
        self.used[v as usize] = true;
        trail.push(s);
    }

    fn undo(&mut self, trail: &[usize]) {
        for &s in trail {
            let v = self.phi[s].take().unwrap();
            self.used[v as usize] = false;
        }
    }

    /// Forces `φ(δ_B(u)) = δ_A(φ(u))` for every tuple over assigned states.
    fn propagate(&mut self, trail: &mut Vec<usize>) -> bool {
        let k = self.b.k();
        loop {
            let assigned: Vec<usize> = (0..self.phi.len()).filter(|&s| self.phi[s].is_some()).collect();
            let count = assigned.len().pow(k as u32);
            let mut changed = false;
            let mut u = vec![0; k];
            let mut img = vec![0; k];
            for idx in 0..count {
                let mut r = idx;
                for j in (0..k).rev() {
                    let s = assigned[r % assigned.len()];
                    u[j] = s as State;
                    img[j] = self.phi[s].unwrap();
                    r /= assigned.len();
                }
                let out = self.b.eval(&u) as usize;
                let target = self.a.eval(&img);
                match self.phi[out] {
                    Some(v) if v == target => {}
                    Some(_) => return false,
                    None => {
                        if self.used[target as usize] {
                            return false;
                        }
                        self.assign(out, target, trail);
                        changed = true;
                    }
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn search(&mut self) -> Result<bool> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::Inconclusive {
                budget: self.budget,
            });
        }
        let Some(s) = self.phi.iter().position(Option::is_none) else {
            return Ok(true);
        };
        for v in 0..self.a.n() as State {
            if self.used[v as usize] {
                continue;
            }
            let mut trail = Vec::new();
            self.assign(s, v, &mut trail);
            if self.propagate(&mut trail) && self.search()? {
                return Ok(true);
            }
            self.undo(&trail);
        }
        Ok(false)
    }
}

/// An injective `φ` making `B` a sub-automaton of `A`, `None` when the
/// exhaustive search finds none, `Inconclusive` when it runs out of nodes.
pub fn find_subautomaton(b: &Rule, a: &Rule, budget: u64) -> Result<Option<StateMap>> {
    if b.n() > a.n() {
        return Ok(None);
    }
    let (b, a) = align_windows(b, a)?;
    let mut s = SubSearch {
        b: &b,
        a: &a,
        phi: vec![None; b.n()],
        used: vec![false; a.n()],
        nodes: 0,
        budget,
    };
    if !s.search()? {
        return Ok(None);
    }
    let map: Vec<State> = s.phi.iter().map(|v| v.unwrap()).collect();
    let phi = StateMap::new(map, a.n())?;
    debug_assert!(verify_commutation(&b, &a, &phi)?);
    Ok(Some(phi))
}

/// `⟨B⟩^{params1} ⊑ ⟨A⟩^{params2}` through `map`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimWitness {
    pub params1: RescaleParams,
    pub params2: RescaleParams,
    pub map: StateMap,
}

impl SimWitness {
    pub fn cost(&self) -> u64 {
        cost(&self.params1, &self.params2)
    }

    /// `params m1 t1 z1 m2 t2 z2` then one `map <from> <to>` line per state.
    pub fn to_text(&self) -> String {
        let mut s = format!("params {} {}\n", self.params1, self.params2);
        for (i, v) in self.map.as_slice().iter().enumerate() {
            s.push_str(&format!("map {i} {v}\n"));
        }
        s
    }

    pub fn parse(text: &str, target_n: usize) -> Result<SimWitness> {
        let mut params = None;
        let mut pairs: Vec<(usize, State)> = Vec::new();
        for line in text.lines().map(|l| l.split('#').next().unwrap().trim()) {
            let mut it = line.split_whitespace();
            match it.next() {
                None => continue,
                Some("params") => {
                    let v: Vec<i64> = it
                        .map(|x| x.parse().map_err(|_| Error::Parse(format!("bad number `{x}`"))))
                        .collect::<Result<_>>()?;
                    if v.len() != 6 || v[0] < 1 || v[1] < 1 || v[3] < 1 || v[4] < 1 {
                        return Err(Error::Parse(format!("bad params line `{line}`")));
                    }
                    params = Some((
                        RescaleParams::new(v[0] as usize, v[1] as usize, v[2])?,
                        RescaleParams::new(v[3] as usize, v[4] as usize, v[5])?,
                    ));
                }
                Some("map") => {
                    let v: Vec<u64> = it
                        .map(|x| x.parse().map_err(|_| Error::Parse(format!("bad number `{x}`"))))
                        .collect::<Result<_>>()?;
                    if v.len() != 2 {
                        return Err(Error::Parse(format!("bad map line `{line}`")));
                    }
                    pairs.push((v[0] as usize, v[1] as State));
                }
                Some(other) => return Err(Error::Parse(format!("unknown directive `{other}`"))),
            }
        }
        let (params1, params2) = params.ok_or_else(|| Error::Parse("missing params".into()))?;
        pairs.sort_unstable();
        if pairs.iter().enumerate().any(|(i, &(s, _))| s != i) {
            return Err(Error::Parse("map must list sources 0..n exactly once".into()));
        }
        let map = StateMap::new(pairs.into_iter().map(|(_, v)| v).collect(), target_n)?;
        Ok(SimWitness {
            params1,
            params2,
            map,
        })
    }
}

fn cost(p1: &RescaleParams, p2: &RescaleParams) -> u64 {
    (p1.m * p2.m * p1.t * p2.t) as u64 * (1 + p1.z.unsigned_abs() + p2.z.unsigned_abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimBounds {
    pub m1: usize,
    pub t1: usize,
    pub z1: u64,
    pub m2: usize,
    pub t2: usize,
    pub z2: u64,
}

impl SimBounds {
    /// Every bound equal to `b` (`|z| <= b` for the shifts).
    pub fn uniform(b: usize) -> SimBounds {
        SimBounds {
            m1: b,
            t1: b,
            z1: b as u64,
            m2: b,
            t2: b,
            z2: b as u64,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    /// Node budget of each sub-automaton probe.
    pub probe_budget: u64,
    /// Largest rescaled alphabet probed on either side.
    pub max_states: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            probe_budget: 200_000,
            max_states: 1 << 12,
            seed: 0,
        }
    }
}

/// Checks a witness by decoding: for random `B` configurations, `T` steps of
/// `A` from the encoded image match the encoded `T` steps of `B`.
pub fn dynamic_check(
    w: &SimWitness,
    b: &Rule,
    a: &Rule,
    configs: usize,
    steps: usize,
    seed: u64,
) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..configs {
        let period = rng.gen_range(1..=6usize);
        let word: Vec<State> = (0..period).map(|_| rng.gen_range(0..b.n() as State)).collect();
        let mut cb = PConfig::new(word)?;
        let encode = |c: &PConfig| -> Result<PConfig> {
            let packed = pack(c, b.n(), w.params1.m)?;
            unpack(&w.map.apply_config(&packed), a.n(), w.params2.m)
        };
        let mut ca = encode(&cb)?;
        for _ in 0..steps {
            for _ in 0..w.params1.t {
                cb = crate::rule::step(b, &cb)?;
            }
            cb = shift(&cb, w.params1.z);
            for _ in 0..w.params2.t {
                ca = crate::rule::step(a, &ca)?;
            }
            ca = shift(&ca, w.params2.z);
            if !ca.same_configuration(&encode(&cb)?) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The first witness of `B ≼ A` in increasing cost, ties broken by the
/// lexicographic order of `(m1, t1, z1, m2, t2, z2)`.
///
/// Returns `Ok(None)` when no parameter tuple within the bounds works and
/// every probe was exhaustive; `Inconclusive` when nothing was found and
/// some probe hit its budget or its size limit.
pub fn search_simulation(
    b: &Rule,
    a: &Rule,
    bounds: SimBounds,
    opts: SearchOptions,
) -> Result<Option<SimWitness>> {
    let mut cands: Vec<(RescaleParams, RescaleParams)> = Vec::new();
    let zs = |zmax: u64| -(zmax as i64)..=zmax as i64;
    for m1 in 1..=bounds.m1 {
        for t1 in 1..=bounds.t1 {
            for z1 in zs(bounds.z1) {
                for m2 in 1..=bounds.m2 {
                    for t2 in 1..=bounds.t2 {
                        for z2 in zs(bounds.z2) {
                            cands.push((
                                RescaleParams { m: m1, t: t1, z: z1 },
                                RescaleParams { m: m2, t: t2, z: z2 },
                            ));
                        }
                    }
                }
            }
        }
    }
    cands.sort_by_key(|(p1, p2)| (cost(p1, p2), *p1, *p2));
    let incomplete = AtomicBool::new(false);
    let mut i = 0;
    while i < cands.len() {
        let level = cost(&cands[i].0, &cands[i].1);
        let j = cands[i..]
            .iter()
            .position(|(p1, p2)| cost(p1, p2) != level)
            .map_or(cands.len(), |d| i + d);
        let found: Vec<SimWitness> = cands[i..j]
            .par_iter()
            .filter_map(|&(p1, p2)| match probe(b, a, p1, p2, &opts) {
                Ok(w) => w,
                Err(_) => {
                    incomplete.store(true, Ordering::Relaxed);
                    None
                }
            })
            .collect();
        // par_iter preserves order, so the first success is the minimum
        if let Some(w) = found.into_iter().next() {
            return Ok(Some(w));
        }
        i = j;
    }
    if incomplete.load(Ordering::Relaxed) {
        Err(Error::Inconclusive {
            budget: opts.probe_budget,
        })
    } else {
        Ok(None)
    }
}

fn probe(
    b: &Rule,
    a: &Rule,
    p1: RescaleParams,
    p2: RescaleParams,
    opts: &SearchOptions,
) -> Result<Option<SimWitness>> {
    let nb = block_alphabet(b.n(), p1.m)?;
    let na = block_alphabet(a.n(), p2.m)?;
    if nb > na {
        return Ok(None);
    }
    if na > opts.max_states {
        return Err(Error::TooLarge(format!("{na} rescaled states")));
    }
    let rb = rescale_rule(b, p1)?;
    let ra = rescale_rule(a, p2)?;
    let Some(map) = find_subautomaton(&rb, &ra, opts.probe_budget)? else {
        return Ok(None);
    };
    let w = SimWitness {
        params1: p1,
        params2: p2,
        map,
    };
    let ok = verify_commutation(&rb, &ra, &w.map)? && dynamic_check(&w, b, a, 10, 5, opts.seed)?;
    Ok(ok.then_some(w))
}

/// Length-`len` words of the simulation's support: factors of the images
/// of all `B` configurations.
pub fn witness_support(
    w: &SimWitness,
    b: &Rule,
    a: &Rule,
    len: usize,
) -> Result<BTreeSet<Vec<State>>> {
    if len == 0 {
        return Err(Error::InvalidArg("word length must be >= 1".into()));
    }
    let nb = block_alphabet(b.n(), w.params1.m)?;
    if w.map.source_n() != nb {
        return Err(Error::InvalidMap(format!(
            "map has {} sources, rescaled B has {nb} states",
            w.map.source_n()
        )));
    }
    // packing is a bijection, so every sequence of B blocks occurs
    let images: BTreeSet<Vec<State>> = (0..nb as State)
        .map(|s| unpack_block(a.n(), w.params2.m, w.map.apply(s)))
        .collect();
    let mut partial: BTreeSet<Vec<State>> = images
        .iter()
        .flat_map(|blk| (0..blk.len()).map(move |o| blk[o..].to_vec()))
        .collect();
    let mut words = BTreeSet::new();
    while !partial.is_empty() {
        let mut next = BTreeSet::new();
        for p in partial {
            if p.len() >= len {
                words.insert(p[..len].to_vec());
                continue;
            }
            for blk in &images {
                let mut q = p.clone();
                q.extend_from_slice(blk);
                next.insert(q);
            }
        }
        partial = next;
    }
    Ok(words)
}

/// `σ_1` as a rule: each cell copies its left neighbour.
pub fn shift_rule(n: usize) -> Rule {
    Rule::tabulate(n, 3, |u| u[0]).expect("small table")
}
