//! Families of rules defined by local symmetries.
//!
//! A family is a base symmetry (none, multiset, set, totalistic or
//! state-symmetric), optionally relaxed to an outer variant that reads a
//! centered block of `k'` neighbours exactly, and optionally intersected
//! with the captive rules (output always present in the neighbourhood).
//!
//! Except for state-symmetric rules, every family is a product of
//! independent choices: tuples are grouped into classes by [`family_key`]
//! and each class picks one output among its allowed states. Counting,
//! enumeration and sampling all work on that class structure.
//!
//! The outer block starts at position `(k - k') / 2` of the tuple, the floor
//! split used for both parities of `k - k'`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rule::{index_tuple, tuple_count, Rule, State, DENSIFY_CAP};

/// Default bound on the number of rules `enumerate_family` will produce.
pub const ENUMERATION_CAP: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Symmetry {
    All,
    Ms,
    Set,
    Tot,
    Ss,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FamilySpec {
    pub base: Symmetry,
    /// Size of the exactly-read central block for outer variants.
    pub outer: Option<usize>,
    /// Intersection with the captive rules.
    pub captive: bool,
}

impl FamilySpec {
    pub const ALL: FamilySpec = FamilySpec::plain(Symmetry::All);
    pub const MS: FamilySpec = FamilySpec::plain(Symmetry::Ms);
    pub const SET: FamilySpec = FamilySpec::plain(Symmetry::Set);
    pub const TOT: FamilySpec = FamilySpec::plain(Symmetry::Tot);
    pub const SS: FamilySpec = FamilySpec::plain(Symmetry::Ss);
    pub const K: FamilySpec = FamilySpec::ALL.with_captive();
    pub const KMS: FamilySpec = FamilySpec::MS.with_captive();
    pub const KSET: FamilySpec = FamilySpec::SET.with_captive();

    pub const fn plain(base: Symmetry) -> FamilySpec {
        FamilySpec {
            base,
            outer: None,
            captive: false,
        }
    }

    pub const fn with_captive(self) -> FamilySpec {
        FamilySpec {
            captive: true,
            ..self
        }
    }

    pub fn outer(base: Symmetry, k_inner: usize) -> FamilySpec {
        FamilySpec {
            base,
            outer: Some(k_inner),
            captive: false,
        }
    }

    /// Checks the spec against a neighbourhood size.
    pub fn validate(&self, k: usize) -> Result<()> {
        if let Some(kp) = self.outer {
            if !matches!(self.base, Symmetry::Ms | Symmetry::Set | Symmetry::Tot) {
                return Err(Error::InvalidSpec(format!(
                    "outer variant of {:?} is not defined",
                    self.base
                )));
            }
            if kp > k {
                return Err(Error::InvalidSpec(format!("k' = {kp} exceeds k = {k}")));
            }
        }
        Ok(())
    }

    fn outer_split(&self, k: usize) -> (usize, usize) {
        let kp = self.outer.unwrap_or(0);
        ((k - kp) / 2, kp)
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match (self.base, self.outer) {
            (Symmetry::All, _) => "all",
            (Symmetry::Ss, _) => "ss",
            (Symmetry::Ms, None) => "ms",
            (Symmetry::Set, None) => "set",
            (Symmetry::Tot, None) => "tot",
            (Symmetry::Ms, Some(_)) => "oms",
            (Symmetry::Set, Some(_)) => "oset",
            (Symmetry::Tot, Some(_)) => "otot",
        };
        let body = match self.outer {
            Some(kp) => format!("{base}:{kp}"),
            None => base.to_string(),
        };
        match (self.captive, self.base, self.outer) {
            (false, _, _) => f.write_str(&body),
            (true, Symmetry::All, _) => f.write_str("k"),
            (true, Symmetry::Ms, None) => f.write_str("kms"),
            (true, Symmetry::Set, None) => f.write_str("kset"),
            (true, _, _) => write!(f, "k+{body}"),
        }
    }
}

impl FromStr for FamilySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<FamilySpec> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "k" => return Ok(FamilySpec::K),
            "kms" => return Ok(FamilySpec::KMS),
            "kset" => return Ok(FamilySpec::KSET),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("k+") {
            let inner: FamilySpec = rest.parse()?;
            if inner.captive {
                return Err(Error::InvalidSpec(format!("`{s}` intersects K twice")));
            }
            return Ok(inner.with_captive());
        }
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s.as_str(), None),
        };
        let kp = arg
            .map(|a| {
                a.parse::<usize>()
                    .map_err(|_| Error::InvalidSpec(format!("bad k' in `{s}`")))
            })
            .transpose()?;
        let spec = match (name, kp) {
            ("all" | "ca", None) => FamilySpec::ALL,
            ("ms", None) => FamilySpec::MS,
            ("set", None) => FamilySpec::SET,
            ("tot", None) => FamilySpec::TOT,
            ("ss", None) => FamilySpec::SS,
            ("oms", Some(kp)) => FamilySpec::outer(Symmetry::Ms, kp),
            ("oset", Some(kp)) => FamilySpec::outer(Symmetry::Set, kp),
            ("otot", Some(kp)) => FamilySpec::outer(Symmetry::Tot, kp),
            _ => return Err(Error::InvalidSpec(format!("unknown family `{s}`"))),
        };
        Ok(spec)
    }
}

/// Canonical key of a neighbourhood tuple under a family's symmetry.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NKey {
    Tuple(Vec<State>),
    /// Sorted states with repetition.
    Multiset(Vec<State>),
    /// Sorted distinct states.
    Set(Vec<State>),
    Sum(u64),
    Outer { center: Vec<State>, rest: Box<NKey> },
}

impl NKey {
    /// Stable 64-bit digest, independent of the platform and std hasher.
    pub fn digest(&self) -> u64 {
        fn feed(h: &mut u64, v: u64) {
            for b in v.to_le_bytes() {
                *h ^= b as u64;
                *h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        fn walk(key: &NKey, h: &mut u64) {
            match key {
                NKey::Tuple(v) | NKey::Multiset(v) | NKey::Set(v) => {
                    let tag = match key {
                        NKey::Tuple(_) => 1,
                        NKey::Multiset(_) => 2,
                        _ => 3,
                    };
                    feed(h, tag);
                    feed(h, v.len() as u64);
                    v.iter().for_each(|&s| feed(h, s as u64));
                }
                NKey::Sum(s) => {
                    feed(h, 4);
                    feed(h, *s);
                }
                NKey::Outer { center, rest } => {
                    feed(h, 5);
                    feed(h, center.len() as u64);
                    center.iter().for_each(|&s| feed(h, s as u64));
                    walk(rest, h);
                }
            }
        }
        let mut h = 0xcbf2_9ce4_8422_2325;
        walk(self, &mut h);
        h
    }

    /// States present in every tuple of the key's class, when the key
    /// determines them without enumeration (everything except sums).
    fn support(&self) -> Option<Vec<State>> {
        match self {
            NKey::Tuple(v) | NKey::Multiset(v) | NKey::Set(v) => Some(support(v)),
            NKey::Sum(_) => None,
            NKey::Outer { center, rest } => {
                let mut s = rest.support()?;
                s.extend_from_slice(center);
                Some(support(&s))
            }
        }
    }
}

impl fmt::Display for NKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list(v: &[State]) -> String {
            v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
        }
        match self {
            NKey::Tuple(v) => write!(f, "({})", list(v)),
            NKey::Multiset(v) => write!(f, "[{}]", list(v)),
            NKey::Set(v) => write!(f, "{{{}}}", list(v)),
            NKey::Sum(s) => write!(f, "sum={s}"),
            NKey::Outer { center, rest } => write!(f, "<{}|{}>", list(center), rest),
        }
    }
}

/// Sorted distinct states of a tuple.
pub fn support(u: &[State]) -> Vec<State> {
    let mut s = u.to_vec();
    s.sort_unstable();
    s.dedup();
    s
}

fn base_key(base: Symmetry, u: &[State]) -> NKey {
    match base {
        Symmetry::All | Symmetry::Ss => NKey::Tuple(u.to_vec()),
        Symmetry::Ms => {
            let mut v = u.to_vec();
            v.sort_unstable();
            NKey::Multiset(v)
        }
        Symmetry::Set => NKey::Set(support(u)),
        Symmetry::Tot => NKey::Sum(u.iter().map(|&s| s as u64).sum()),
    }
}

pub fn family_key(spec: &FamilySpec, u: &[State]) -> Result<NKey> {
    spec.validate(u.len())?;
    Ok(key_unchecked(spec, u))
}

fn key_unchecked(spec: &FamilySpec, u: &[State]) -> NKey {
    match spec.outer {
        None => base_key(spec.base, u),
        Some(_) => {
            let (start, kp) = spec.outer_split(u.len());
            let center = u[start..start + kp].to_vec();
            let rest: Vec<State> = u[..start].iter().chain(&u[start + kp..]).copied().collect();
            NKey::Outer {
                center,
                rest: Box::new(base_key(spec.base, &rest)),
            }
        }
    }
}

/// States common to every tuple of length `len` over `A_n` with the given
/// sum (empty if no tuple has that sum).
pub fn sum_class_support(n: usize, len: usize, sum: u64) -> Vec<State> {
    if len == 0 {
        return Vec::new();
    }
    // reach[c][s]: some tuple of length c with sum s avoids the excluded state.
    let max = len * (n - 1);
    if sum as usize > max {
        return Vec::new();
    }
    let reachable_without = |excluded: Option<usize>| -> bool {
        let mut reach = vec![false; max + 1];
        reach[0] = true;
        for _ in 0..len {
            let mut next = vec![false; max + 1];
            for (s, &ok) in reach.iter().enumerate() {
                if !ok {
                    continue;
                }
                for a in 0..n {
                    if Some(a) != excluded && s + a <= max {
                        next[s + a] = true;
                    }
                }
            }
            reach = next;
        }
        reach[sum as usize]
    };
    (0..n)
        .filter(|&s| !reachable_without(Some(s)))
        .map(|s| s as State)
        .collect()
}

/// Allowed outputs of a key's class (sorted). Sum keys of captive families
/// require an intersection over the class.
pub fn allowed_outputs(spec: &FamilySpec, n: usize, k: usize, key: &NKey) -> Vec<State> {
    if !spec.captive {
        return (0..n as State).collect();
    }
    if let Some(s) = key.support() {
        return s;
    }
    match key {
        NKey::Sum(sum) => sum_class_support(n, k, *sum),
        NKey::Outer { center, rest } => match rest.as_ref() {
            NKey::Sum(sum) => {
                let mut s = sum_class_support(n, k - center.len(), *sum);
                s.extend_from_slice(center);
                support(&s)
            }
            _ => unreachable!("non-sum keys carry their support"),
        },
        _ => unreachable!("non-sum keys carry their support"),
    }
}

fn check_tuple_space(n: usize, k: usize, cap: usize) -> Result<usize> {
    tuple_count(n, k)
        .filter(|&t| t <= cap)
        .ok_or_else(|| Error::TooLarge(format!("{n}^{k} tuples exceed cap {cap}")))
}

/// Membership of a rule in a family, by exhaustive inspection of its table.
pub fn is_member(rule: &Rule, spec: &FamilySpec) -> Result<bool> {
    let (n, k) = (rule.n(), rule.k());
    spec.validate(k)?;
    let total = check_tuple_space(n, k, DENSIFY_CAP)?;
    let rule = rule.densify(DENSIFY_CAP)?;
    let table = rule.table().expect("densified");
    let mut seen: HashMap<NKey, State> = HashMap::new();
    let symmetric = !matches!(spec.base, Symmetry::All | Symmetry::Ss) || spec.outer.is_some();
    for (i, &out) in table.iter().enumerate().take(total) {
        let u = index_tuple(n, k, i);
        if spec.captive && !u.contains(&out) {
            return Ok(false);
        }
        if symmetric {
            let key = key_unchecked(spec, &u);
            if *seen.entry(key).or_insert(out) != out {
                return Ok(false);
            }
        }
    }
    if spec.base == Symmetry::Ss {
        return Ok(is_state_symmetric(&rule));
    }
    Ok(true)
}

/// `δ ∘ π = π ∘ δ` for the adjacent transpositions, which generate `S_n`.
fn is_state_symmetric(rule: &Rule) -> bool {
    let (n, k) = (rule.n(), rule.k());
    let total = tuple_count(n, k).unwrap();
    (0..n.saturating_sub(1)).all(|a| {
        let swap = |s: State| -> State {
            if s as usize == a {
                s + 1
            } else if s as usize == a + 1 {
                s - 1
            } else {
                s
            }
        };
        (0..total).all(|i| {
            let u = index_tuple(n, k, i);
            let pu: Vec<State> = u.iter().map(|&s| swap(s)).collect();
            rule.eval(&pu) == swap(rule.eval(&u))
        })
    })
}

pub fn binomial(n: u64, r: u64) -> BigUint {
    if r > n {
        return BigUint::zero();
    }
    let r = r.min(n - r);
    let mut acc = BigUint::one();
    for i in 0..r {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Stirling numbers of the second kind `S(k, s)`.
pub fn stirling2(k: u64, s: u64) -> BigUint {
    if k == 0 && s == 0 {
        return BigUint::one();
    }
    if s == 0 || s > k {
        return BigUint::zero();
    }
    // row-by-row recurrence S(i, j) = j S(i-1, j) + S(i-1, j-1)
    let mut row = vec![BigUint::zero(); s as usize + 1];
    row[0] = BigUint::one();
    for _ in 1..=k {
        for j in (1..=s as usize).rev() {
            row[j] = &row[j] * BigUint::from(j as u64) + &row[j - 1];
        }
        row[0] = BigUint::zero();
    }
    row[s as usize].clone()
}

/// Number of surjections from a `k`-set onto an `s`-set.
pub fn surjections(k: u64, s: u64) -> BigUint {
    let mut fact = BigUint::one();
    for i in 2..=s {
        fact *= i;
    }
    stirling2(k, s) * fact
}

/// Number of key classes of a non-captive base symmetry on `len` free positions.
fn base_class_count(base: Symmetry, n: usize, len: usize) -> Result<BigUint> {
    let (n64, len64) = (n as u64, len as u64);
    Ok(match base {
        Symmetry::All => BigUint::from(n).pow(len as u32),
        Symmetry::Ms => binomial(n64 + len64 - 1, len64),
        Symmetry::Set if len == 0 => BigUint::one(),
        Symmetry::Set => (1..=n64.min(len64)).map(|s| binomial(n64, s)).sum(),
        Symmetry::Tot => BigUint::from(len64 * (n64 - 1) + 1),
        Symmetry::Ss => return Err(Error::Unsupported("SS has no key classes".into())),
    })
}

/// Multiplicity of each allowed-output count among the classes of a family:
/// the family size is `∏ size^multiplicity`.
fn class_profile(spec: &FamilySpec, n: usize, k: usize) -> Result<Vec<(u64, BigUint)>> {
    let (n64, k64) = (n as u64, k as u64);
    if spec.base == Symmetry::Ss {
        // Tuple orbits under S_n are the set partitions of the positions;
        // an orbit with s blocks is fixed pointwise by permutations of the
        // n - s absent states, so its output is one of its s states, or
        // the single absent state when exactly one is absent.
        return Ok((1..=n64.min(k64))
            .map(|s| {
                let extra = u64::from(!spec.captive && n64 - s == 1);
                (s + extra, stirling2(k64, s))
            })
            .collect());
    }
    let kp = spec.outer.unwrap_or(0);
    let len = k - kp;
    if !spec.captive {
        let classes = BigUint::from(n).pow(kp as u32) * base_class_count(spec.base, n, len)?;
        return Ok(vec![(n64, classes)]);
    }
    let mut profile = Vec::new();
    if kp == 0 || spec.base == Symmetry::All {
        match spec.base {
            Symmetry::All => {
                for s in 1..=n64.min(k64) {
                    profile.push((s, binomial(n64, s) * surjections(k64, s)));
                }
            }
            Symmetry::Ms => {
                for s in 1..=n64.min(k64) {
                    profile.push((s, binomial(n64, s) * binomial(k64 - 1, s - 1)));
                }
            }
            Symmetry::Set => {
                for s in 1..=n64.min(k64) {
                    profile.push((s, binomial(n64, s)));
                }
            }
            Symmetry::Tot => {
                for sum in 0..=(k64 * (n64 - 1)) {
                    let size = sum_class_support(n, k, sum).len() as u64;
                    profile.push((size, BigUint::one()));
                }
            }
            Symmetry::Ss => unreachable!(),
        }
        return Ok(profile);
    }
    // Outer captive families: a class is (center word, rest key); its
    // allowed outputs are the center support joined with the rest support.
    let (kp64, len64) = (kp as u64, len as u64);
    match spec.base {
        Symmetry::Ms | Symmetry::Set => {
            for a in 1..=n64.min(kp64) {
                let centers = binomial(n64, a) * surjections(kp64, a);
                if len == 0 {
                    profile.push((a, centers));
                    continue;
                }
                for b in 1..=n64.min(len64) {
                    let rest_per_support = match spec.base {
                        Symmetry::Ms => binomial(len64 - 1, b - 1),
                        _ => BigUint::one(),
                    };
                    for i in 0..=a.min(b) {
                        let mult = &centers
                            * binomial(a, i)
                            * binomial(n64 - a, b - i)
                            * &rest_per_support;
                        if !mult.is_zero() {
                            profile.push((a + b - i, mult));
                        }
                    }
                }
            }
        }
        Symmetry::Tot => {
            if n > 20 {
                return Err(Error::TooLarge(format!(
                    "outer totalistic captive count enumerates 2^{n} center supports"
                )));
            }
            let sums: Vec<Vec<State>> = (0..=(len64 * (n64 - 1)))
                .map(|sum| sum_class_support(n, len, sum))
                .collect();
            for mask in 1u32..(1 << n) {
                let a = mask.count_ones() as u64;
                let centers = surjections(kp64, a);
                if centers.is_zero() {
                    continue;
                }
                for common in &sums {
                    let extra = common.iter().filter(|&&s| mask & (1 << s) == 0).count() as u64;
                    profile.push((a + extra, centers.clone()));
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(profile)
}

fn profile_product(profile: &[(u64, BigUint)]) -> Result<BigUint> {
    let mut acc = BigUint::one();
    for (size, mult) in profile {
        if mult.is_zero() || *size == 1 {
            continue;
        }
        if *size == 0 {
            return Ok(BigUint::zero());
        }
        let exp = mult
            .to_u32()
            .filter(|&e| e <= 50_000_000)
            .ok_or_else(|| Error::TooLarge(format!("{size}^{mult} is too large to materialize")))?;
        acc *= BigUint::from(*size).pow(exp);
    }
    Ok(acc)
}

/// Exact number of rules of size `(n, k)` in the family.
pub fn count_family(spec: &FamilySpec, n: usize, k: usize) -> Result<BigUint> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidArg("n and k must be at least 1".into()));
    }
    spec.validate(k)?;
    if spec.base == Symmetry::All && !spec.captive {
        let entries = tuple_count(n, k)
            .and_then(|t| u32::try_from(t).ok())
            .ok_or_else(|| Error::TooLarge(format!("{n}^({n}^{k})")))?;
        return profile_product(&[(n as u64, BigUint::from(entries))]);
    }
    profile_product(&class_profile(spec, n, k)?)
}

/// How a class choice resolves to an output for a given tuple.
#[derive(Clone, Debug)]
enum Resolution {
    /// Choice indexes the class's allowed outputs.
    Fixed(Vec<State>),
    /// State-symmetric orbit with `blocks` distinct states: choice `c <
    /// blocks` is the `c`-th distinct state of the tuple in order of first
    /// occurrence, choice `blocks` the single absent state.
    Orbit { blocks: usize, choices: usize },
}

impl Resolution {
    fn choices(&self) -> usize {
        match self {
            Resolution::Fixed(v) => v.len(),
            Resolution::Orbit { choices, .. } => *choices,
        }
    }

    fn resolve(&self, choice: usize, u: &[State], n: usize) -> State {
        match self {
            Resolution::Fixed(v) => v[choice],
            Resolution::Orbit { blocks, .. } => {
                let mut firsts: Vec<State> = Vec::with_capacity(*blocks);
                for &s in u {
                    if !firsts.contains(&s) {
                        firsts.push(s);
                    }
                }
                if choice < *blocks {
                    firsts[choice]
                } else {
                    (0..n as State).find(|s| !firsts.contains(s)).unwrap()
                }
            }
        }
    }
}

/// The class structure of a family at size `(n, k)`: each tuple's class,
/// classes ordered by their minimal tuple.
pub struct ClassTable {
    n: usize,
    k: usize,
    tuple_class: Vec<u32>,
    classes: Vec<Resolution>,
}

impl ClassTable {
    pub fn build(spec: &FamilySpec, n: usize, k: usize) -> Result<ClassTable> {
        spec.validate(k)?;
        let total = check_tuple_space(n, k, DENSIFY_CAP)?;
        let mut ids: HashMap<NKey, u32> = HashMap::new();
        let mut tuple_class = Vec::with_capacity(total);
        let mut classes = Vec::new();
        // For captive sum classes the allowed set needs the whole class.
        for i in 0..total {
            let u = index_tuple(n, k, i);
            let key = if spec.base == Symmetry::Ss {
                NKey::Tuple(canonical_pattern(&u))
            } else {
                key_unchecked(spec, &u)
            };
            let next = classes.len() as u32;
            let id = *ids.entry(key.clone()).or_insert(next);
            if id == next {
                let res = if spec.base == Symmetry::Ss {
                    let blocks = support(&u).len();
                    let extra = usize::from(!spec.captive && n - blocks == 1);
                    Resolution::Orbit {
                        blocks,
                        choices: blocks + extra,
                    }
                } else {
                    Resolution::Fixed(allowed_outputs(spec, n, k, &key))
                };
                classes.push(res);
            }
            tuple_class.push(id);
        }
        Ok(ClassTable {
            n,
            k,
            tuple_class,
            classes,
        })
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Allowed-output counts per class.
    pub fn radices(&self) -> Vec<usize> {
        self.classes.iter().map(Resolution::choices).collect()
    }

    /// The rule picking `choices[c]` in every class `c`.
    pub fn rule(&self, choices: &[usize]) -> Rule {
        let table = self
            .tuple_class
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let u = index_tuple(self.n, self.k, i);
                self.classes[c as usize].resolve(choices[c as usize], &u, self.n)
            })
            .collect();
        Rule::dense(self.n, self.k, table).expect("class table yields a valid rule")
    }
}

/// Relabels states by order of first occurrence: the S_n-orbit invariant.
fn canonical_pattern(u: &[State]) -> Vec<State> {
    let mut firsts: Vec<State> = Vec::new();
    u.iter()
        .map(|&s| match firsts.iter().position(|&f| f == s) {
            Some(p) => p as State,
            None => {
                firsts.push(s);
                (firsts.len() - 1) as State
            }
        })
        .collect()
}

/// Every member of the family exactly once, lexicographic in the per-class
/// choices with classes ordered by minimal tuple.
pub fn enumerate_family(
    spec: &FamilySpec,
    n: usize,
    k: usize,
    cap: u64,
) -> Result<impl Iterator<Item = Rule>> {
    let count = count_family(spec, n, k)?;
    if count > BigUint::from(cap) {
        return Err(Error::TooLarge(format!(
            "{spec} at ({n},{k}) has {count} members, cap {cap}"
        )));
    }
    let table = ClassTable::build(spec, n, k)?;
    let radices = table.radices();
    let empty = radices.iter().any(|&r| r == 0);
    let mut digits = if empty {
        None
    } else {
        Some(vec![0usize; radices.len()])
    };
    Ok(std::iter::from_fn(move || {
        let current = digits.as_ref()?.clone();
        // advance the mixed-radix counter, last class fastest
        let d = digits.as_mut().unwrap();
        let mut pos = d.len();
        loop {
            if pos == 0 {
                digits = None;
                break;
            }
            pos -= 1;
            d[pos] += 1;
            if d[pos] < radices[pos] {
                break;
            }
            d[pos] = 0;
        }
        Some(table.rule(&current))
    }))
}

/// Uniform member of the family, deterministic in `seed`.
pub fn sample_rule(spec: &FamilySpec, n: usize, k: usize, seed: u64) -> Result<Rule> {
    if spec.base == Symmetry::Ss {
        return Err(Error::Unsupported(
            "uniform sampling of state-symmetric rules".into(),
        ));
    }
    let table = ClassTable::build(spec, n, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let choices = table
        .radices()
        .into_iter()
        .map(|r| {
            if r == 0 {
                Err(Error::InvalidSpec(format!("{spec} is empty at ({n},{k})")))
            } else {
                Ok(rng.gen_range(0..r))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(table.rule(&choices))
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Uniform choice among `allowed` drawn from a pseudorandom function of
/// `(seed, key)`.
pub(crate) fn keyed_choice(seed: u64, key: &NKey, allowed: &[State]) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed) ^ mix64(key.digest()));
    allowed[rng.gen_range(0..allowed.len())]
}

fn check_lazy_support(spec: &FamilySpec) -> Result<()> {
    if spec.base == Symmetry::Ss {
        return Err(Error::Unsupported("lazy sampling of SS".into()));
    }
    if spec.captive && spec.base == Symmetry::Tot {
        return Err(Error::Unsupported(
            "lazy sampling of captive totalistic families".into(),
        ));
    }
    Ok(())
}

/// Intensional rule drawing each class's output on access from a
/// pseudorandom function of `(seed, key)`; `overrides` pins some classes.
pub fn lazy_rule_with(
    spec: &FamilySpec,
    n: usize,
    k: usize,
    seed: u64,
    overrides: HashMap<NKey, State>,
) -> Result<Rule> {
    spec.validate(k)?;
    check_lazy_support(spec)?;
    let spec_c = *spec;
    let id = format!("lazy-{spec}-{n}-{k}-{seed:016x}-{}", overrides.len());
    Ok(Rule::intensional(n, k, id, move |u| {
        let key = key_unchecked(&spec_c, u);
        if let Some(&out) = overrides.get(&key) {
            return out;
        }
        let allowed = allowed_outputs(&spec_c, n, k, &key);
        keyed_choice(seed, &key, &allowed)
    }))
}

/// Lazy uniform member of the family.
pub fn lazy_sampler(spec: &FamilySpec, n: usize, k: usize, seed: u64) -> Result<Rule> {
    lazy_rule_with(spec, n, k, seed, HashMap::new())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SsCaptiveReport {
    /// Every state-symmetric rule of the size is captive.
    pub holds: bool,
    /// `1 <= k <= n - 2`, the range where inclusion is guaranteed.
    pub in_hypothesis: bool,
    pub members_checked: u64,
}

/// Enumerates the state-symmetric rules and checks each is captive.
pub fn verify_ss_subset_captive(n: usize, k: usize) -> Result<SsCaptiveReport> {
    let mut holds = true;
    let mut members = 0u64;
    for rule in enumerate_family(&FamilySpec::SS, n, k, ENUMERATION_CAP)? {
        members += 1;
        if !is_member(&rule, &FamilySpec::K)? {
            holds = false;
            break;
        }
    }
    Ok(SsCaptiveReport {
        holds,
        in_hypothesis: k >= 1 && k + 2 <= n,
        members_checked: members,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TotCaptiveReport {
    pub empty: bool,
    /// Two tuples with disjoint supports and equal sums, when one exists.
    pub witness: Option<(Vec<State>, Vec<State>)>,
}

/// Decides whether no rule is both totalistic and captive.
///
/// The witness search scans sorted tuples by sum; emptiness itself is
/// decided exactly from the per-sum common supports.
pub fn verify_tot_captive_empty(n: usize, k: usize) -> Result<TotCaptiveReport> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidArg("n and k must be at least 1".into()));
    }
    let classes = binomial((n + k - 1) as u64, k as u64);
    if classes > BigUint::from(1_000_000u32) {
        return Err(Error::TooLarge(format!("{classes} multisets to scan")));
    }
    let mut by_sum: Vec<Vec<Vec<State>>> = vec![Vec::new(); k * (n - 1) + 1];
    let mut ms = vec![0 as State; k];
    loop {
        let sum: usize = ms.iter().map(|&s| s as usize).sum();
        by_sum[sum].push(ms.clone());
        // next non-decreasing sequence
        let Some(pos) = (0..k).rev().find(|&i| (ms[i] as usize) < n - 1) else {
            break;
        };
        let v = ms[pos] + 1;
        ms[pos..].iter_mut().for_each(|s| *s = v);
    }
    let mut witness = None;
    'outer: for group in &by_sum {
        for (i, a) in group.iter().enumerate() {
            for b in &group[i + 1..] {
                if a.iter().all(|s| !b.contains(s)) {
                    witness = Some((a.clone(), b.clone()));
                    break 'outer;
                }
            }
        }
    }
    let empty = witness.is_some()
        || (0..by_sum.len()).any(|sum| sum_class_support(n, k, sum as u64).is_empty());
    Ok(TotCaptiveReport { empty, witness })
}
