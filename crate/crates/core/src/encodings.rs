//! Encodings of arbitrary rules into set rules and captive set rules.
//!
//! **Set encoding.** States are pairs `(a, label)` with `label` in
//! `0..k+2`, plus a blank `#`. A window whose set is exactly
//! `{(a_1, i), (a_2, i+1), ..., (a_k, i+k-1)}` (labels mod `k+2`) maps to
//! `(δ(a_1..a_k), i + ⌊k/2⌋)`; every other set maps to `#`. Legal
//! configurations carry labels `z + phase` at cell `z`. Since cell `x` reads
//! from `x - left`, one step adds `right - left` to every label and moves
//! nothing.
//!
//! **Captive set encoding.** Labels live in `0..2k-1`. A state is
//! `(label, pos)` with `pos` 0 for `#`, `1..=n` for the values `0..n` and
//! `n+1` for `#'`; the numeric encoding `label·(n+2) + pos` is also the
//! total order used by the fallback. A unit is one isolated value cell
//! followed by a library (the `n+2` positions of one label in order).
//! In a legal configuration unit `j` has isolated label `I+j` and library
//! label `I+j+k`; in an intermediate one the library label is `I+j+k+1`.
//! Each encoded step moves the whole structure by `⌊(k'-1)/2⌋` cells.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::families::{is_member, mix64, FamilySpec};
use crate::rescale::{pack_block, RescaleParams, SimWitness, StateMap};
use crate::rule::{lcm, tuple_count, PConfig, Rule, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EncodingKind {
    Set,
    KSet,
}

impl FromStr for EncodingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "set" | "codms" => Ok(EncodingKind::Set),
            "kset" => Ok(EncodingKind::KSet),
            _ => Err(Error::InvalidArg(format!("unknown encoding `{s}`"))),
        }
    }
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingKind::Set => "set",
            EncodingKind::KSet => "kset",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SetEncoding {
    source: Rule,
    encoded: Rule,
}

impl SetEncoding {
    pub fn source(&self) -> &Rule {
        &self.source
    }

    pub fn encoded(&self) -> &Rule {
        &self.encoded
    }

    pub fn labels(&self) -> usize {
        self.source.k() + 2
    }

    pub fn state(&self, a: State, label: usize) -> State {
        a * self.labels() as State + label as State
    }

    pub fn blank(&self) -> State {
        (self.source.n() * self.labels()) as State
    }

    /// `(a, label)` of a non-blank state.
    pub fn split(&self, s: State) -> Option<(State, usize)> {
        (s < self.blank()).then(|| {
            let l = self.labels() as State;
            (s / l, (s % l) as usize)
        })
    }

    /// Label increment per encoded step.
    pub fn label_advance(&self) -> usize {
        self.source.right() - self.source.left()
    }
}

/// The set encoding of `a`.
pub fn encode_set(a: &Rule) -> Result<SetEncoding> {
    let (n, k) = (a.n(), a.k());
    let labels = k + 2;
    let blank = (n * labels) as State;
    let src = a.clone();
    let eval = move |u: &[State]| -> State {
        let mut set: Vec<State> = u.to_vec();
        set.sort_unstable();
        set.dedup();
        if set.len() != k || set.contains(&blank) {
            return blank;
        }
        let mut by_label = vec![None; labels];
        for &s in &set {
            let slot = &mut by_label[s as usize % labels];
            if slot.is_some() {
                return blank;
            }
            *slot = Some(s / labels as State);
        }
        // a run of k labels among k+2 has a unique start
        let Some(i) = (0..labels).find(|&i| (0..k).all(|d| by_label[(i + d) % labels].is_some()))
        else {
            return blank;
        };
        let args: Vec<State> = (0..k).map(|d| by_label[(i + d) % labels].unwrap()).collect();
        src.eval(&args) * labels as State + ((i + k / 2) % labels) as State
    };
    let id = format!("set-encoding({})", a.id());
    let encoded = Rule::intensional(n * labels + 1, k, id, eval).densify_if_small();
    Ok(SetEncoding {
        source: a.clone(),
        encoded,
    })
}

/// Cell `z` holds `(base_z, z + phase mod k+2)`.
pub fn legal_config_set(enc: &SetEncoding, base: &PConfig, phase: usize) -> Result<PConfig> {
    check_base(enc.source.n(), base)?;
    let l = enc.labels();
    let len = lcm(base.period(), l);
    let word = (0..len)
        .map(|z| enc.state(base.at(z as i64), (z + phase) % l))
        .collect();
    PConfig::new(word)
}

/// First components and the label at cell 0.
pub fn decode_set(enc: &SetEncoding, c: &PConfig) -> Result<(PConfig, usize)> {
    let l = enc.labels();
    if c.period() % l != 0 {
        return Err(Error::NotLegal(format!(
            "period {} is not a multiple of {l}",
            c.period()
        )));
    }
    let mut base = Vec::with_capacity(c.period());
    let mut phase = 0;
    for (z, &s) in c.word().iter().enumerate() {
        let (a, label) = enc
            .split(s)
            .ok_or_else(|| Error::NotLegal(format!("blank at cell {z}")))?;
        if z == 0 {
            phase = label;
        } else if label != (z + phase) % l {
            return Err(Error::NotLegal(format!("label {label} breaks the cycle at cell {z}")));
        }
        base.push(a);
    }
    Ok((PConfig::new(base)?, phase))
}

/// `⟨A⟩^{k+2,1,d} ⊑ ⟨E⟩^{k+2,1,d}` with `d` the label advance: a block of
/// `A` maps to the same values labelled `0..k+2`.
pub fn set_witness(enc: &SetEncoding) -> Result<SimWitness> {
    let l = enc.labels();
    let n = enc.source.n();
    let d = enc.label_advance() as i64;
    let blocks = crate::rescale::block_alphabet(n, l)?;
    let n_enc = crate::rescale::block_alphabet(enc.encoded.n(), l)?;
    let map = (0..blocks as State)
        .map(|s| {
            let cells = crate::rescale::unpack_block(n, l, s);
            let image: Vec<State> = cells
                .iter()
                .enumerate()
                .map(|(i, &a)| enc.state(a, i))
                .collect();
            pack_block(enc.encoded.n(), &image)
        })
        .collect();
    let p = RescaleParams::new(l, 1, d)?;
    Ok(SimWitness {
        params1: p,
        params2: p,
        map: StateMap::new(map, n_enc)?,
    })
}

fn check_base(n: usize, base: &PConfig) -> Result<()> {
    match base.word().iter().find(|&&s| s as usize >= n) {
        Some(&s) => Err(Error::InvalidState { state: s, n }),
        None => Ok(()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Even,
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KsetType {
    T1,
    T2,
    T3,
    T4,
}

/// A neighbourhood set recognised as one of the four transition types.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KsetMatch {
    /// `k` isolated values with labels `i..i+k`, full libraries elsewhere.
    T1 { i: usize, args: Vec<State> },
    /// Library suffix from position `p` at `i+k-1`, prefix up to `p` at `i+2k-2`.
    T2 { i: usize, p: usize },
    /// Label `i+k` absent; `value` is the isolated state at `i+r`.
    T3 { i: usize, value: State },
    /// Label `i+k-1` absent; suffix from `p` at `i+k`, prefix at `i`.
    T4 { i: usize, p: usize },
}

impl KsetMatch {
    pub fn kind(&self) -> KsetType {
        match self {
            KsetMatch::T1 { .. } => KsetType::T1,
            KsetMatch::T2 { .. } => KsetType::T2,
            KsetMatch::T3 { .. } => KsetType::T3,
            KsetMatch::T4 { .. } => KsetType::T4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct KSetEncoding {
    source: Rule,
    encoded: Rule,
}

/// Label and position arithmetic shared by the rule and the builders.
#[derive(Clone, Copy, Debug)]
struct Geometry {
    n: usize,
    k: usize,
}

impl Geometry {
    fn labels(&self) -> usize {
        2 * self.k - 1
    }
    fn positions(&self) -> usize {
        self.n + 2
    }
    fn unit(&self) -> usize {
        self.n + 3
    }
    fn radius(&self) -> usize {
        self.k / 2
    }
    fn arity(&self) -> usize {
        self.k + (self.k - 1) * (self.n + 2)
    }
    fn state(&self, label: usize, pos: usize) -> State {
        ((label % self.labels()) * self.positions() + pos) as State
    }
    fn split(&self, s: State) -> (usize, usize) {
        let p = self.positions();
        (s as usize / p, s as usize % p)
    }
    fn lab(&self, x: usize) -> usize {
        x % self.labels()
    }

    fn classify_all(&self, set: &[State]) -> Vec<KsetMatch> {
        let (m, np, k, r) = (self.labels(), self.positions(), self.k, self.radius());
        let mut content = vec![Vec::<usize>::new(); m];
        for &s in set {
            let (l, p) = self.split(s);
            content[l].push(p);
        }
        for c in content.iter_mut() {
            c.sort_unstable();
            c.dedup();
        }
        let full = |l: usize| content[self.lab(l)].len() == np;
        let empty = |l: usize| content[self.lab(l)].is_empty();
        let value = |l: usize| -> Option<State> {
            match content[self.lab(l)].as_slice() {
                [p] if (1..=self.n).contains(p) => Some((*p - 1) as State),
                _ => None,
            }
        };
        let suffix = |l: usize| -> Option<usize> {
            let c = &content[self.lab(l)];
            let &first = c.first()?;
            (c.len() == np - first && *c.last().unwrap() == np - 1).then_some(first)
        };
        let prefix_is = |l: usize, p: usize| -> bool {
            let c = &content[self.lab(l)];
            c.len() == p + 1 && c.iter().enumerate().all(|(i, &q)| i == q)
        };
        let prefix_plus_value = |l: usize, p: usize| -> bool {
            let c = &content[self.lab(l)];
            if !(0..=p).all(|q| c.binary_search(&q).is_ok()) {
                return false;
            }
            let extra: Vec<usize> = c.iter().copied().filter(|&q| q > p).collect();
            match extra.as_slice() {
                [] => true,
                [v] => (1..=self.n).contains(v),
                _ => false,
            }
        };
        let mut found = Vec::new();
        for i in 0..m {
            // T1
            let args: Option<Vec<State>> = (i..i + k).map(value).collect();
            if let Some(args) = args {
                if (i + k..i + 2 * k - 1).all(full) {
                    found.push(KsetMatch::T1 { i, args });
                }
            }
            // T2
            if (i..i + k - 1).all(|l| value(l).is_some()) && (i + k..i + 2 * k - 2).all(full) {
                if let Some(p) = suffix(i + k - 1) {
                    if prefix_is(i + 2 * k - 2, p) {
                        found.push(KsetMatch::T2 { i, p });
                    }
                }
            }
            // T3
            if empty(i + k)
                && (i + 1..i + k).all(|l| value(l).is_some())
                && (i + k + 1..i + 2 * k).all(full)
            {
                found.push(KsetMatch::T3 {
                    i,
                    value: value(i + r).unwrap(),
                });
            }
            // T4
            if empty(i + k - 1)
                && (i + 1..i + k - 1).all(|l| value(l).is_some())
                && (i + k + 1..i + 2 * k - 1).all(full)
            {
                if let Some(p) = suffix(i + k) {
                    if prefix_plus_value(i, p) {
                        found.push(KsetMatch::T4 { i, p });
                    }
                }
            }
        }
        found
    }

    fn output(&self, src: &Rule, m: &KsetMatch) -> State {
        let (k, r) = (self.k, self.radius());
        match m {
            KsetMatch::T1 { i, args } => self.state(i + 2 * k - 2, src.eval(args) as usize + 1),
            KsetMatch::T2 { i, p } => self.state(i + k - 1, *p),
            KsetMatch::T3 { i, value } => self.state(i + r, *value as usize + 1),
            KsetMatch::T4 { i, p } => self.state(i + r + k - 1, *p),
        }
    }
}

impl KSetEncoding {
    fn geometry(&self) -> Geometry {
        Geometry {
            n: self.source.n(),
            k: self.source.k(),
        }
    }

    pub fn source(&self) -> &Rule {
        &self.source
    }

    pub fn encoded(&self) -> &Rule {
        &self.encoded
    }

    pub fn labels(&self) -> usize {
        self.geometry().labels()
    }

    pub fn arity(&self) -> usize {
        self.geometry().arity()
    }

    /// Cells per unit: one isolated state and one library.
    pub fn unit(&self) -> usize {
        self.geometry().unit()
    }

    /// Cells the structure moves per encoded step.
    pub fn drift(&self) -> usize {
        (self.arity() - 1) / 2
    }

    pub fn value_state(&self, label: usize, a: State) -> State {
        self.geometry().state(label, a as usize + 1)
    }

    pub fn hash_state(&self, label: usize) -> State {
        self.geometry().state(label, 0)
    }

    pub fn hash_prime_state(&self, label: usize) -> State {
        self.geometry().state(label, self.source.n() + 1)
    }

    /// `#, 0, ..., n-1, #'` with the given label.
    pub fn library(&self, label: usize) -> Vec<State> {
        let g = self.geometry();
        (0..g.positions()).map(|p| g.state(label, p)).collect()
    }

    /// Every match of a neighbourhood set against the four types.
    pub fn classify_all(&self, set: &[State]) -> Vec<KsetMatch> {
        self.geometry().classify_all(set)
    }

    pub fn classify(&self, set: &[State]) -> Option<KsetMatch> {
        self.classify_all(set).into_iter().next()
    }

    /// The output a matched set produces.
    pub fn output(&self, m: &KsetMatch) -> State {
        self.geometry().output(&self.source, m)
    }
}

/// The captive set encoding of `a`; needs `k >= 2`.
pub fn encode_kset(a: &Rule) -> Result<KSetEncoding> {
    if a.k() < 2 {
        return Err(Error::Unsupported(format!(
            "captive set encoding needs k >= 2, got {}",
            a.k()
        )));
    }
    let g = Geometry { n: a.n(), k: a.k() };
    let src = a.clone();
    let eval = move |u: &[State]| -> State {
        let out = match g.classify_all(u).first() {
            Some(m) => g.output(&src, m),
            None => *u.iter().max().unwrap(),
        };
        assert!(u.contains(&out), "captive set encoding produced an absent state");
        out
    };
    let id = format!("kset-encoding({})", a.id());
    let encoded = Rule::intensional(g.labels() * g.positions(), g.arity(), id, eval);
    Ok(KSetEncoding {
        source: a.clone(),
        encoded,
    })
}

/// Units of `(base_j, label0 + j)` each followed by its library, labelled
/// `+k` (even) or `+k+1` (odd) relative to the isolated state.
pub fn legal_config_kset(
    enc: &KSetEncoding,
    base: &PConfig,
    phase: Phase,
    label0: usize,
) -> Result<PConfig> {
    check_base(enc.source.n(), base)?;
    let g = enc.geometry();
    let units = lcm(base.period(), g.labels());
    let gap = match phase {
        Phase::Even => g.k,
        Phase::Odd => g.k + 1,
    };
    let mut word = Vec::with_capacity(units * g.unit());
    for j in 0..units {
        let label = label0 + j;
        word.push(enc.value_state(label, base.at(j as i64)));
        word.extend(enc.library(label + gap));
    }
    PConfig::new(word)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KsetDecoded {
    pub base: PConfig,
    /// Cell of the isolated state of unit 0.
    pub offset: usize,
    /// Label of that isolated state.
    pub label: usize,
    pub phase: Phase,
}

/// Recovers the isolated values of a legal or intermediate configuration.
pub fn decode_kset(enc: &KSetEncoding, c: &PConfig) -> Result<KsetDecoded> {
    let g = enc.geometry();
    let u = g.unit();
    if c.period() % u != 0 {
        return Err(Error::NotLegal(format!(
            "period {} is not a multiple of the unit {u}",
            c.period()
        )));
    }
    'offsets: for offset in 0..u {
        let (l0, p0) = g.split(c.at(offset as i64));
        if !(1..=g.n).contains(&p0) {
            continue;
        }
        let (lib0, _) = g.split(c.at(offset as i64 + 1));
        let gap = (lib0 + g.labels() - l0) % g.labels();
        let phase = match gap {
            x if x == g.lab(g.k) => Phase::Even,
            x if x == g.lab(g.k + 1) => Phase::Odd,
            _ => continue,
        };
        let mut base = Vec::new();
        for j in 0..c.period() / u {
            let at = (offset + j * u) as i64;
            let (l, p) = g.split(c.at(at));
            if l != g.lab(l0 + j) || !(1..=g.n).contains(&p) {
                continue 'offsets;
            }
            let lib = enc.library(l + gap);
            if (0..lib.len()).any(|q| c.at(at + 1 + q as i64) != lib[q]) {
                continue 'offsets;
            }
            base.push((p - 1) as State);
        }
        return Ok(KsetDecoded {
            base: PConfig::new(base)?,
            offset,
            label: l0,
            phase,
        });
    }
    Err(Error::NotLegal("no unit alignment matches".into()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub base: PConfig,
    pub passed: bool,
    /// First encoded step whose configuration differs from the prediction.
    pub failed_step: Option<usize>,
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodingReport {
    pub kind: EncodingKind,
    pub trials: Vec<TrialOutcome>,
    /// The encoded rule depends only on the neighbourhood set on every
    /// window met (exhaustively when the table is small).
    pub membership_ok: bool,
    /// Every applied transition produced a state of its window.
    pub captive_ok: bool,
    /// Applied transitions per type `T1..T4`, then fallbacks.
    pub type_counts: [u64; 5],
    /// Windows matching more than one type.
    pub ambiguous: u64,
}

impl EncodingReport {
    pub fn passed(&self) -> bool {
        self.trials.iter().all(|t| t.passed)
            && self.membership_ok
            && (self.kind == EncodingKind::Set || self.captive_ok)
            && self.ambiguous == 0
    }
}

#[derive(Default)]
struct WindowAudit {
    set_invariant: bool,
    captive: bool,
    counts: [u64; 5],
    ambiguous: u64,
}

/// One step that also inspects every window it evaluates.
fn audited_step(
    rule: &Rule,
    c: &PConfig,
    audit: &mut WindowAudit,
    kset: Option<&KSetEncoding>,
) -> PConfig {
    let k = rule.k();
    let left = rule.left() as i64;
    let word = (0..c.period() as i64)
        .map(|z| {
            let u = c.window(z - left, k);
            let out = rule.eval(&u);
            let mut sorted = u.clone();
            sorted.sort_unstable();
            if rule.eval(&sorted) != out {
                audit.set_invariant = false;
            }
            let mut rev = u.clone();
            rev.reverse();
            if rule.eval(&rev) != out {
                audit.set_invariant = false;
            }
            if !u.contains(&out) {
                audit.captive = false;
            }
            if let Some(enc) = kset {
                let matches = enc.classify_all(&u);
                if matches.len() > 1 {
                    audit.ambiguous += 1;
                }
                let slot = matches.first().map_or(4, |m| m.kind() as usize);
                audit.counts[slot] += 1;
            }
            out
        })
        .collect();
    PConfig::new(word).expect("non-empty")
}

fn random_base(n: usize, rng: &mut ChaCha8Rng) -> PConfig {
    let period = rng.gen_range(1..=6usize);
    PConfig::new((0..period).map(|_| rng.gen_range(0..n as State)).collect()).unwrap()
}

fn set_trial(enc: &SetEncoding, base: &PConfig, steps: usize, audit: &mut WindowAudit) -> Result<Option<(usize, String)>> {
    let l = enc.labels();
    let d = enc.label_advance();
    let mut c = legal_config_set(enc, base, 0)?;
    let mut expected = base.clone();
    for t in 1..=steps {
        c = audited_step(enc.encoded(), &c, audit, None);
        expected = crate::rule::step(enc.source(), &expected)?;
        match decode_set(enc, &c) {
            Err(e) => return Ok(Some((t, e.to_string()))),
            Ok((b, phase)) => {
                if !b.same_configuration(&expected) || phase != (t * d) % l {
                    return Ok(Some((t, format!("decoded phase {phase} or values differ"))));
                }
            }
        }
    }
    Ok(None)
}

fn kset_trial(enc: &KSetEncoding, base: &PConfig, steps: usize, audit: &mut WindowAudit) -> Result<Option<(usize, String)>> {
    let g = enc.geometry();
    let (m, r) = (g.labels(), g.radius());
    let left_a = enc.source().left();
    let h = enc.drift() as i64;
    let mut c = legal_config_kset(enc, base, Phase::Even, 0)?;
    let mut a = base.clone();
    for t in 0..steps {
        // unit j of the legal configuration at time 2t holds A cell j + t(r + left)
        let a_next = crate::rule::step(enc.source(), &a)?;
        let label_t = (t * (r + m - 1)) % m;
        let rot = (t * (r + left_a)) as i64;
        let mid = crate::rescale::shift(
            &legal_config_kset(enc, &a_next.rotate(rot + left_a as i64), Phase::Odd, (label_t + m - 1) % m)?,
            (2 * t as i64 + 1) * h,
        );
        c = audited_step(enc.encoded(), &c, audit, Some(enc));
        if !c.same_configuration(&mid) {
            return Ok(Some((2 * t + 1, "intermediate configuration differs".into())));
        }
        if decode_kset(enc, &c).map(|d| d.phase) != Ok(Phase::Odd) {
            return Ok(Some((2 * t + 1, "intermediate configuration does not decode".into())));
        }
        let label_next = ((t + 1) * (r + m - 1)) % m;
        let legal = crate::rescale::shift(
            &legal_config_kset(enc, &a_next.rotate(rot + (r + left_a) as i64), Phase::Even, label_next)?,
            (2 * t as i64 + 2) * h,
        );
        c = audited_step(enc.encoded(), &c, audit, Some(enc));
        if !c.same_configuration(&legal) {
            return Ok(Some((2 * t + 2, "legal configuration differs".into())));
        }
        match decode_kset(enc, &c) {
            Ok(d) if d.phase == Phase::Even => {}
            _ => return Ok(Some((2 * t + 2, "legal configuration does not decode".into()))),
        }
        a = a_next;
    }
    Ok(None)
}

/// Runs `trials` random bases through the encoding for `steps` simulated
/// steps (two encoded steps each for the captive set encoding) and checks
/// every configuration against the predicted one.
pub fn verify_encoding_simulation(
    a: &Rule,
    kind: EncodingKind,
    trials: usize,
    steps: usize,
    seed: u64,
) -> Result<EncodingReport> {
    enum Enc {
        Set(SetEncoding),
        KSet(KSetEncoding),
    }
    let enc = match kind {
        EncodingKind::Set => Enc::Set(encode_set(a)?),
        EncodingKind::KSet => Enc::KSet(encode_kset(a)?),
    };
    let results: Vec<(TrialOutcome, WindowAudit)> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<(TrialOutcome, WindowAudit)> {
            let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(trial as u64)));
            let base = random_base(a.n(), &mut rng);
            let mut audit = WindowAudit {
                set_invariant: true,
                captive: true,
                ..Default::default()
            };
            let failure = match &enc {
                Enc::Set(e) => set_trial(e, &base, steps, &mut audit)?,
                Enc::KSet(e) => kset_trial(e, &base, steps, &mut audit)?,
            };
            let outcome = TrialOutcome {
                trial,
                base,
                passed: failure.is_none(),
                failed_step: failure.as_ref().map(|f| f.0),
                message: failure.map(|f| f.1),
            };
            Ok((outcome, audit))
        })
        .collect::<Result<_>>()?;
    let mut membership_ok = results.iter().all(|(_, a)| a.set_invariant);
    if let Enc::Set(e) = &enc {
        if e.encoded().is_dense() {
            membership_ok &= is_member(e.encoded(), &FamilySpec::SET)?;
        }
    }
    let mut type_counts = [0; 5];
    for (_, audit) in &results {
        for (slot, c) in type_counts.iter_mut().zip(audit.counts) {
            *slot += c;
        }
    }
    Ok(EncodingReport {
        kind,
        captive_ok: results.iter().all(|(_, a)| a.captive),
        ambiguous: results.iter().map(|(_, a)| a.ambiguous).sum(),
        trials: results.into_iter().map(|(t, _)| t).collect(),
        membership_ok,
        type_counts,
    })
}

/// Windows of legal and intermediate configurations built from `bases`
/// that match zero or several types: `(windows, unmatched, ambiguous)`.
pub fn kset_disjointness(enc: &KSetEncoding, bases: &[PConfig]) -> Result<(u64, u64, u64)> {
    let k = enc.arity();
    let (mut windows, mut unmatched, mut ambiguous) = (0, 0, 0);
    for base in bases {
        for phase in [Phase::Even, Phase::Odd] {
            for label0 in 0..enc.labels() {
                let c = legal_config_kset(enc, base, phase, label0)?;
                for z in 0..c.period() as i64 {
                    let matches = enc.classify_all(&c.window(z, k));
                    windows += 1;
                    match matches.len() {
                        0 => unmatched += 1,
                        1 => {}
                        _ => ambiguous += 1,
                    }
                }
            }
        }
    }
    Ok((windows, unmatched, ambiguous))
}

/// Exhaustive set-invariance and captivity of a rule when its table is at
/// most `cap` entries, or a seeded sample of `samples` tuples otherwise.
pub fn spot_check_kset(rule: &Rule, cap: usize, samples: usize, seed: u64) -> bool {
    let (n, k) = (rule.n(), rule.k());
    let check = |u: &[State]| -> bool {
        let out = rule.eval(u);
        let mut v = u.to_vec();
        v.sort_unstable();
        u.contains(&out) && rule.eval(&v) == out && {
            v.reverse();
            rule.eval(&v) == out
        }
    };
    match tuple_count(n, k).filter(|&t| t <= cap) {
        Some(total) => (0..total).all(|i| check(&crate::rule::index_tuple(n, k, i))),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..samples).all(|_| {
                let u: Vec<State> = (0..k).map(|_| rng.gen_range(0..n as State)).collect();
                check(&u)
            })
        }
    }
}
