//! Simulation subshifts, exact satisfaction probabilities and density bounds.
//!
//! Every construction places a rule `A0` of size `(n0, k0)` on a subshift of
//! units: one isolated cell holding an encoded `A0` state followed by a fixed
//! marker word (possibly depending on a cyclic label). The required
//! transitions are generated by sliding a `k`-window over every phase of
//! every unit with every assignment of the isolated cells: a window starting
//! on an isolated cell must output `δ0` of the `k0` isolated cells it sees,
//! any other window must copy the symbol it starts on. The whole structure
//! thus drifts by `⌊(k-1)/2⌋` cells per step while the `A0` configuration
//! advances one step. Two windows with the same family key and different
//! required outputs abort the construction.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::families::{
    allowed_outputs, count_family, enumerate_family, family_key, is_member, lazy_rule_with, mix64,
    FamilySpec, NKey, Symmetry,
};
use crate::rule::{lcm, step, tuple_count, PConfig, Rule, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Construction {
    Ms,
    Tot,
    /// Outer-multiset with the given exactly-read center.
    Oms(usize),
    Kms,
    Kset,
    CaptiveFullshift,
}

impl Construction {
    pub const ALL: [Construction; 6] = [
        Construction::Ms,
        Construction::Tot,
        Construction::Oms(1),
        Construction::Kms,
        Construction::Kset,
        Construction::CaptiveFullshift,
    ];

    pub fn family(&self) -> FamilySpec {
        match self {
            Construction::Ms => FamilySpec::MS,
            Construction::Tot => FamilySpec::TOT,
            Construction::Oms(kp) => FamilySpec::outer(Symmetry::Ms, *kp),
            Construction::Kms => FamilySpec::KMS,
            Construction::Kset => FamilySpec::KSET,
            Construction::CaptiveFullshift => FamilySpec::K,
        }
    }

    /// Family `A0` itself must belong to.
    fn source_family(&self) -> FamilySpec {
        match self {
            Construction::Oms(_) => FamilySpec::MS,
            other => other.family(),
        }
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Construction::Ms => f.write_str("ms"),
            Construction::Tot => f.write_str("tot"),
            Construction::Oms(kp) => write!(f, "oms:{kp}"),
            Construction::Kms => f.write_str("kms"),
            Construction::Kset => f.write_str("kset"),
            Construction::CaptiveFullshift => f.write_str("captive-fullshift"),
        }
    }
}

impl FromStr for Construction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ok(match s.as_str() {
            "ms" => Construction::Ms,
            "tot" => Construction::Tot,
            "oms" => Construction::Oms(1),
            "kms" => Construction::Kms,
            "kset" => Construction::Kset,
            "captive-fullshift" | "fullshift" => Construction::CaptiveFullshift,
            other => match other.strip_prefix("oms:") {
                Some(kp) => Construction::Oms(
                    kp.parse()
                        .map_err(|_| Error::InvalidArg(format!("bad k' in `{s}`")))?,
                ),
                None => return Err(Error::InvalidArg(format!("unknown construction `{s}`"))),
            },
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ConstructionParams {
    pub n: usize,
    pub k: usize,
    /// Subshift index: marker split for the multiset-like constructions,
    /// alphabet slot for kset and the captive fullshift.
    pub j: usize,
    /// Alphabet block (kms only; 0 elsewhere).
    pub block: usize,
}

impl ConstructionParams {
    pub fn new(n: usize, k: usize, j: usize) -> ConstructionParams {
        ConstructionParams { n, k, j, block: 0 }
    }
}

/// Layout and drift of a simulating subshift.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    /// Cells per unit.
    pub unit: usize,
    /// Encoded state of each `A0` state.
    pub iso: Vec<State>,
    /// Marker word of each label, `unit - 1` cells long; empty when units
    /// are single cells.
    pub markers: Vec<Vec<State>>,
    /// Cells the structure moves per step.
    pub drift: usize,
    /// `A0` cells the decoded configuration moves per step.
    pub index_shift: usize,
}

impl Template {
    pub fn labels(&self) -> usize {
        self.markers.len().max(1)
    }

    /// Units of `(iso(values_j), markers(j mod labels))`.
    pub fn place(&self, values: &PConfig) -> PConfig {
        let units = lcm(values.period(), self.labels());
        let mut word = Vec::with_capacity(units * self.unit);
        for j in 0..units {
            word.push(self.iso[values.at(j as i64) as usize]);
            if self.unit > 1 {
                word.extend_from_slice(&self.markers[j % self.labels()]);
            }
        }
        PConfig::new(word).expect("non-empty")
    }

    /// Configuration predicted after `t` steps from `values`.
    pub fn expected(&self, a0: &Rule, values: &PConfig, t: usize) -> Result<PConfig> {
        let mut v = values.clone();
        for _ in 0..t {
            v = step(a0, &v)?;
        }
        let placed = self.place(&v.rotate((t * self.index_shift) as i64));
        Ok(crate::rescale::shift(&placed, (t * self.drift) as i64))
    }
}

/// A required output together with one tuple of its key class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub output: State,
    pub witness: Vec<State>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintSet {
    pub construction: Option<Construction>,
    pub family: FamilySpec,
    pub n0: usize,
    pub k0: usize,
    pub params: ConstructionParams,
    pub entries: BTreeMap<NKey, Entry>,
    pub template: Option<Template>,
}

impl ConstraintSet {
    /// A hand-written constraint set: each tuple's class must output the
    /// given state.
    pub fn custom(
        family: FamilySpec,
        n: usize,
        k: usize,
        pairs: &[(Vec<State>, State)],
    ) -> Result<ConstraintSet> {
        let mut entries = BTreeMap::new();
        for (u, out) in pairs {
            if u.len() != k || u.iter().chain([out]).any(|&s| s as usize >= n) {
                return Err(Error::InvalidArg(format!("bad constraint {u:?} -> {out}")));
            }
            insert_entry(&mut entries, family_key(&family, u)?, u.clone(), *out, 0)?;
        }
        Ok(ConstraintSet {
            construction: None,
            family,
            n0: 0,
            k0: 0,
            params: ConstructionParams::new(n, k, 0),
            entries,
            template: None,
        })
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn k(&self) -> usize {
        self.params.k
    }

    pub fn keys(&self) -> BTreeSet<NKey> {
        self.entries.keys().cloned().collect()
    }

    /// Whether a rule meets every constraint.
    pub fn satisfied_by(&self, rule: &Rule) -> bool {
        self.entries.values().all(|e| rule.eval(&e.witness) == e.output)
    }

    /// Text form: a header line then `tuple -> output` lines.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "family {}\nn {}\nk {}\n",
            self.family,
            self.n(),
            self.k()
        );
        if let Some(c) = self.construction {
            s.push_str(&format!(
                "construction {c}\nsource {} {}\nj {}\nblock {}\n",
                self.n0, self.k0, self.params.j, self.params.block
            ));
        }
        for (key, e) in &self.entries {
            let w: Vec<String> = e.witness.iter().map(|x| x.to_string()).collect();
            s.push_str(&format!("entry {} -> {}  # {key}\n", w.join(" "), e.output));
        }
        s
    }
}

fn insert_entry(
    entries: &mut BTreeMap<NKey, Entry>,
    key: NKey,
    witness: Vec<State>,
    output: State,
    cell: usize,
) -> Result<()> {
    match entries.get(&key) {
        Some(e) if e.output != output => Err(Error::Construction {
            cell,
            msg: format!(
                "key {key} needs both {} and {output} (windows {:?} and {witness:?})",
                e.output, e.witness
            ),
        }),
        Some(_) => Ok(()),
        None => {
            entries.insert(key, Entry { output, witness });
            Ok(())
        }
    }
}

fn out_of_hypothesis(what: impl Into<String>) -> Error {
    Error::OutOfHypothesis(what.into())
}

/// `l = ⌊(k - k0) / (k0 - 1)⌋` and the leftover `o = k - k0 - (k0 - 1) l`.
fn marker_lengths(k0: usize, k: usize) -> Result<(usize, usize)> {
    if k0 < 2 {
        return Err(out_of_hypothesis(format!("k0 >= 2 (k0 = {k0})")));
    }
    if k < k0 {
        return Err(out_of_hypothesis(format!("k >= k0 ({k} < {k0})")));
    }
    let l = (k - k0) / (k0 - 1);
    Ok((l, k - k0 - (k0 - 1) * l))
}

/// Valid marker splits `j` of the multiset-like constructions.
pub fn marker_splits(k0: usize, k: usize) -> Vec<usize> {
    match marker_lengths(k0, k) {
        Ok((l, _)) if l >= 2 * k0 + 2 => (k0 + 1..=l - k0 - 1).collect(),
        _ => Vec::new(),
    }
}

fn kset_slots(n0: usize, k0: usize, n: usize) -> usize {
    n.saturating_sub(2 * (k0 + 2)) / n0
}

/// The constraint set of a construction, with every hypothesis enforced.
pub fn build_constraints(
    c: Construction,
    a0: &Rule,
    p: ConstructionParams,
) -> Result<ConstraintSet> {
    build_constraints_with(c, a0, p, true)
}

/// As [`build_constraints`]; with `enforce` false only the conditions the
/// layout itself needs are checked, so tiny instances can be built for
/// exhaustive comparisons.
pub fn build_constraints_with(
    c: Construction,
    a0: &Rule,
    p: ConstructionParams,
    enforce: bool,
) -> Result<ConstraintSet> {
    let (n0, k0) = (a0.n(), a0.k());
    let ConstructionParams { n, k, j, block } = p;
    let family = c.family();
    family.validate(k)?;
    if !is_member(a0, &c.source_family())? {
        return Err(out_of_hypothesis(format!(
            "A0 must belong to {}",
            c.source_family()
        )));
    }
    if block != 0 && c != Construction::Kms {
        return Err(out_of_hypothesis("alphabet blocks only apply to kms"));
    }
    let drift = (k - 1) / 2;
    let index_shift = (k0 - 1) / 2;
    let template = match c {
        Construction::Ms | Construction::Oms(_) | Construction::Kms | Construction::Tot => {
            let (l, _) = marker_lengths(k0, k)?;
            if enforce && !(k0 + 1 <= j && j + k0 + 1 <= l) {
                return Err(out_of_hypothesis(format!(
                    "j in [k0+1, l-k0-1] = [{}, {}], got {j}",
                    k0 + 1,
                    l as i64 - k0 as i64 - 1
                )));
            }
            if j > l {
                return Err(out_of_hypothesis(format!("j <= l = {l}")));
            }
            let (iso, zero, one) = if c == Construction::Tot {
                let d = k0 * (n0 - 1) + 1;
                let b = k0 * (d + n0 - 1) + 1;
                if n < b + 1 {
                    return Err(out_of_hypothesis(format!("n >= {} for the sum encoding", b + 1)));
                }
                ((0..n0).map(|x| (d + x) as State).collect(), 0, b as State)
            } else {
                let base = block * (n0 + 2);
                if enforce && matches!(c, Construction::Ms | Construction::Oms(_)) && n < n0 + 2 * k0 + 4 {
                    return Err(out_of_hypothesis(format!("n >= n0 + 2k0 + 4 = {}", n0 + 2 * k0 + 4)));
                }
                if base + n0 + 2 > n {
                    return Err(out_of_hypothesis(format!(
                        "block {block} needs {} states",
                        base + n0 + 2
                    )));
                }
                (
                    (0..n0).map(|x| (base + x) as State).collect(),
                    (base + n0) as State,
                    (base + n0 + 1) as State,
                )
            };
            let mut word = vec![zero; l - j];
            word.extend(std::iter::repeat(one).take(j));
            Template {
                unit: l + 1,
                iso,
                markers: vec![word],
                drift,
                index_shift,
            }
        }
        Construction::Kset => {
            let (l, o) = marker_lengths(k0, k)?;
            if l < o + 1 || l < 2 * o {
                return Err(out_of_hypothesis(format!(
                    "marker words need l - o >= 1 and l >= 2o (l = {l}, o = {o})"
                )));
            }
            let slots = kset_slots(n0, k0, n);
            if j >= slots {
                return Err(out_of_hypothesis(format!(
                    "j < ⌊(n - 2(k0+2)) / n0⌋ = {slots}"
                )));
            }
            let markers = (0..k0 + 2)
                .map(|lab| {
                    let mut w = vec![(2 * lab) as State; o];
                    w.extend(std::iter::repeat((2 * lab + 1) as State).take(l - o));
                    w
                })
                .collect();
            let first = 2 * k0 + 4 + j * n0;
            Template {
                unit: l + 1,
                iso: (0..n0).map(|x| (first + x) as State).collect(),
                markers,
                drift,
                index_shift,
            }
        }
        Construction::CaptiveFullshift => {
            if k != k0 {
                return Err(out_of_hypothesis(format!("k = k0 ({k} != {k0})")));
            }
            let slots = n / n0;
            if j >= slots {
                return Err(out_of_hypothesis(format!("j < ⌊n / n0⌋ = {slots}")));
            }
            Template {
                unit: 1,
                iso: (0..n0).map(|x| (j * n0 + x) as State).collect(),
                markers: Vec::new(),
                drift,
                index_shift,
            }
        }
    };
    let entries = generate_entries(&family, a0, n, k, &template)?;
    let cs = ConstraintSet {
        construction: Some(c),
        family,
        n0,
        k0,
        params: p,
        entries,
        template: Some(template),
    };
    // captive families must be able to realise every requirement
    exact_alpha(&cs)?;
    Ok(cs)
}

fn generate_entries(
    family: &FamilySpec,
    a0: &Rule,
    n: usize,
    k: usize,
    t: &Template,
) -> Result<BTreeMap<NKey, Entry>> {
    let (n0, k0) = (a0.n(), a0.k());
    let u = t.unit;
    if t.iso.iter().chain(t.markers.iter().flatten()).any(|&s| s as usize >= n) {
        return Err(out_of_hypothesis(format!("layout needs more than {n} states")));
    }
    let mut entries = BTreeMap::new();
    for label in 0..t.labels() {
        for phase in 0..u {
            let cell = |i: usize| ((phase + i) / u, (phase + i) % u);
            let iso_units: Vec<usize> = (0..k)
                .filter_map(|i| {
                    let (unit, ph) = cell(i);
                    (ph == 0).then_some(unit)
                })
                .collect();
            if phase == 0 && iso_units.len() != k0 {
                return Err(Error::Construction {
                    cell: 0,
                    msg: format!(
                        "a window on an isolated cell sees {} isolated cells, expected {k0}",
                        iso_units.len()
                    ),
                });
            }
            let assignments = tuple_count(n0, iso_units.len())
                .ok_or_else(|| Error::TooLarge("isolated assignments".into()))?;
            for idx in 0..assignments {
                let values = crate::rule::index_tuple(n0, iso_units.len(), idx);
                let mut next_iso = values.iter();
                let tuple: Vec<State> = (0..k)
                    .map(|i| {
                        let (unit, ph) = cell(i);
                        if ph == 0 {
                            t.iso[*next_iso.next().unwrap() as usize]
                        } else {
                            t.markers[(label + unit) % t.labels()][ph - 1]
                        }
                    })
                    .collect();
                let target = if phase == 0 {
                    t.iso[a0.eval(&values) as usize]
                } else {
                    t.markers[label][phase - 1]
                };
                insert_entry(&mut entries, family_key(family, &tuple)?, tuple, target, phase)?;
            }
        }
    }
    Ok(entries)
}

/// Probability that a uniform family member meets every constraint:
/// `∏ 1 / |allowed(key)|` over the constrained classes.
pub fn exact_alpha(cs: &ConstraintSet) -> Result<BigRational> {
    let mut den = BigUint::one();
    for (key, e) in &cs.entries {
        let allowed = allowed_outputs(&cs.family, cs.n(), cs.k(), key);
        if !allowed.contains(&e.output) {
            return Err(Error::InfeasibleConstraint(format!(
                "key {key} cannot output {} in {}",
                e.output, cs.family
            )));
        }
        den *= allowed.len();
    }
    Ok(BigRational::new(1.into(), den.into()))
}

/// `1 - ∏ (1 - α_i)` evaluated as `-expm1(Σ log1p(-α_i))`.
pub fn bound_lower(alphas: &[f64]) -> f64 {
    let s: f64 = alphas.iter().map(|&a| (-a).ln_1p()).sum();
    -s.exp_m1()
}

/// `1 - (1 - α)^count` for a repeated probability.
pub fn bound_repeated(alpha: f64, count: f64) -> f64 {
    -(count * (-alpha).ln_1p()).exp_m1()
}

fn ln_biguint(b: &BigUint) -> f64 {
    let bits = b.bits();
    if bits <= 1000 {
        return b.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    (b >> shift).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// Natural logarithm of a positive rational, exact in range beyond `f64`.
pub fn ln_rational(r: &BigRational) -> f64 {
    let num = r.numer().to_biguint().expect("positive");
    let den = r.denom().to_biguint().expect("positive");
    ln_biguint(&num) - ln_biguint(&den)
}

/// A uniform family member conditioned on the constraints, drawn lazily.
pub fn constrained_sample(cs: &ConstraintSet, seed: u64) -> Result<Rule> {
    exact_alpha(cs)?;
    let overrides: HashMap<NKey, State> = cs
        .entries
        .iter()
        .map(|(k, e)| (k.clone(), e.output))
        .collect();
    lazy_rule_with(&cs.family, cs.n(), cs.k(), seed, overrides)
}

/// Random `A0` configuration used to seed a constructed simulation.
pub fn construction_base(cs: &ConstraintSet, seed: u64) -> PConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ 0x5eed));
    let period = rng.gen_range(1..=4usize);
    PConfig::new((0..period).map(|_| rng.gen_range(0..cs.n0 as State)).collect()).unwrap()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstructionCheck {
    pub passed: bool,
    pub failed_step: Option<usize>,
    pub base: PConfig,
}

/// Samples a rule satisfying the constraints and checks that it simulates
/// `A0` on the subshift for `steps` steps, structure and drift included.
pub fn verify_constructed_simulation(
    cs: &ConstraintSet,
    a0: &Rule,
    steps: usize,
    seed: u64,
) -> Result<ConstructionCheck> {
    let template = cs
        .template
        .as_ref()
        .ok_or_else(|| Error::InvalidArg("constraint set has no subshift template".into()))?;
    let rule = constrained_sample(cs, seed)?;
    let base = construction_base(cs, seed);
    let mut c = template.place(&base);
    for t in 1..=steps {
        c = step(&rule, &c)?;
        if !c.same_configuration(&template.expected(a0, &base, t)?) {
            return Ok(ConstructionCheck {
                passed: false,
                failed_step: Some(t),
                base,
            });
        }
    }
    Ok(ConstructionCheck {
        passed: true,
        failed_step: None,
        base,
    })
}

/// A copy of `cs` with one entry changed to another allowed output, and
/// the seed (the first from `seed` on that works) whose simulation reads
/// that entry at its first step.
pub fn mutate_entry(cs: &ConstraintSet, seed: u64) -> Result<(ConstraintSet, u64)> {
    let template = cs
        .template
        .as_ref()
        .ok_or_else(|| Error::InvalidArg("constraint set has no subshift template".into()))?;
    let left = ((cs.k() - 1) / 2) as i64;
    for s in seed..seed + 64 {
        let c = template.place(&construction_base(cs, s));
        for x in 0..c.period() as i64 {
            let key = family_key(&cs.family, &c.window(x - left, cs.k()))?;
            let Some(e) = cs.entries.get(&key) else { continue };
            let allowed = allowed_outputs(&cs.family, cs.n(), cs.k(), &key);
            if let Some(&other) = allowed.iter().find(|&&o| o != e.output) {
                let mut m = cs.clone();
                m.entries.get_mut(&key).unwrap().output = other;
                return Ok((m, s));
            }
        }
    }
    Err(Error::InvalidArg("no mutable entry on the initial configurations".into()))
}

/// Whether the key sets are independent for the family: the restriction
/// map to the sets and the remaining tuples is a bijection.
///
/// Pairwise disjoint key sets are independent structurally (the family is
/// a product over key classes); otherwise members are enumerated when the
/// family has at most `cap` of them.
pub fn independence_check(
    family: &FamilySpec,
    n: usize,
    k: usize,
    key_sets: &[BTreeSet<NKey>],
    cap: u64,
) -> Result<bool> {
    let disjoint = key_sets
        .iter()
        .enumerate()
        .all(|(i, a)| key_sets[i + 1..].iter().all(|b| a.is_disjoint(b)));
    if disjoint && family.base != Symmetry::Ss {
        return Ok(true);
    }
    let count = count_family(family, n, k)?;
    if count > BigUint::from(cap) {
        return Err(Error::Inconclusive { budget: cap });
    }
    let total = tuple_count(n, k).unwrap();
    // region of each tuple: the sets containing its key, or the remainder
    let mut regions: Vec<Vec<usize>> = vec![Vec::new(); key_sets.len() + 1];
    for i in 0..total {
        let key = family_key(family, &crate::rule::index_tuple(n, k, i))?;
        let mut hit = false;
        for (s, set) in key_sets.iter().enumerate() {
            if set.contains(&key) {
                regions[s].push(i);
                hit = true;
            }
        }
        if !hit {
            regions[key_sets.len()].push(i);
        }
    }
    let mut images: Vec<BTreeSet<Vec<State>>> = vec![BTreeSet::new(); regions.len()];
    let mut members = 0u64;
    for rule in enumerate_family(family, n, k, cap)? {
        let table = rule.table().expect("enumerated rules are dense");
        for (img, region) in images.iter_mut().zip(&regions) {
            img.insert(region.iter().map(|&i| table[i]).collect());
        }
        members += 1;
    }
    let product = images
        .iter()
        .fold(BigUint::one(), |acc, img| acc * img.len());
    Ok(product == BigUint::from(members))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PathSpec {
    /// `x ↦ (x, k)`.
    FixedK(usize),
    /// `x ↦ (n, x)`.
    FixedN(usize),
    /// `x ↦ list[x]`.
    Explicit(Vec<(usize, usize)>),
}

impl PathSpec {
    pub fn at(&self, x: usize) -> Option<(usize, usize)> {
        match self {
            PathSpec::FixedK(k) => Some((x, *k)),
            PathSpec::FixedN(n) => Some((*n, x)),
            PathSpec::Explicit(v) => v.get(x).copied(),
        }
    }
}

impl FromStr for PathSpec {
    type Err = Error;
    /// `fixed-k:K`, `fixed-n:N` or `list:N1xK1,N2xK2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArg(format!("bad path `{s}`"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "fixed-k" => Ok(PathSpec::FixedK(arg.parse().map_err(|_| bad())?)),
            "fixed-n" => Ok(PathSpec::FixedN(arg.parse().map_err(|_| bad())?)),
            "list" => {
                let pts = arg
                    .split(',')
                    .map(|p| {
                        let (n, k) = p.split_once('x').ok_or_else(bad)?;
                        Ok((n.parse().map_err(|_| bad())?, k.parse().map_err(|_| bad())?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let distinct: BTreeSet<_> = pts.iter().collect();
                if distinct.len() != pts.len() {
                    return Err(Error::InvalidArg("a path must be injective".into()));
                }
                Ok(PathSpec::Explicit(pts))
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub x: usize,
    pub n: usize,
    pub k: usize,
    /// Independent subshifts used.
    pub j_count: u64,
    /// Smallest per-subshift probability.
    pub alpha_min: Option<BigRational>,
    pub bound: f64,
    /// `None` when in hypothesis, else the violated condition.
    pub out_of_hypothesis: Option<String>,
}

impl CurveRow {
    pub fn kind(&self) -> &'static str {
        if self.out_of_hypothesis.is_some() {
            "out-of-hypothesis"
        } else {
            "lower-bound"
        }
    }
}

/// Subshift indices whose probabilities differ, and how many times each
/// repeats (alphabet slots only rename states, which keeps `α`).
fn curve_indices(c: Construction, n0: usize, k0: usize, n: usize, k: usize) -> (Vec<usize>, u64) {
    match c {
        Construction::Ms | Construction::Tot | Construction::Oms(_) => (marker_splits(k0, k), 1),
        Construction::Kms => (marker_splits(k0, k), (n / (n0 + 2)) as u64),
        Construction::Kset => (vec![0], kset_slots(n0, k0, n) as u64),
        Construction::CaptiveFullshift => (vec![0], (n / n0) as u64),
    }
}

/// Lower bounds on the density of rules simulating `A0` along a path.
pub fn density_curve(
    path: &PathSpec,
    c: Construction,
    a0: &Rule,
    xs: impl IntoIterator<Item = usize>,
) -> Result<Vec<CurveRow>> {
    let xs: Vec<usize> = xs.into_iter().collect();
    xs.par_iter()
        .filter_map(|&x| path.at(x).map(|nk| (x, nk)))
        .map(|(x, (n, k))| curve_row(c, a0, x, n, k))
        .collect()
}

fn curve_row(c: Construction, a0: &Rule, x: usize, n: usize, k: usize) -> Result<CurveRow> {
    let (js, repeats) = curve_indices(c, a0.n(), a0.k(), n, k);
    let mut row = CurveRow {
        x,
        n,
        k,
        j_count: 0,
        alpha_min: None,
        bound: 0.0,
        out_of_hypothesis: None,
    };
    if js.is_empty() || repeats == 0 {
        row.out_of_hypothesis = Some("no admissible subshift at this size".into());
        return Ok(row);
    }
    let mut log_miss = 0.0;
    for &j in &js {
        let cs = match build_constraints(c, a0, ConstructionParams::new(n, k, j)) {
            Ok(cs) => cs,
            Err(Error::OutOfHypothesis(why)) => {
                row.out_of_hypothesis = Some(why);
                row.j_count = 0;
                row.alpha_min = None;
                row.bound = 0.0;
                return Ok(row);
            }
            Err(e) => return Err(e),
        };
        let alpha = exact_alpha(&cs)?;
        let a = ln_rational(&alpha).exp();
        log_miss += repeats as f64 * (-a).ln_1p();
        if row.alpha_min.as_ref().is_none_or(|m| alpha < *m) {
            row.alpha_min = Some(alpha);
        }
    }
    row.j_count = js.len() as u64 * repeats;
    row.bound = -log_miss.exp_m1();
    Ok(row)
}

/// Smallest `count` with `1 - (1 - α)^count >= target`.
pub fn repeats_to_reach(alpha: f64, target: f64) -> u64 {
    ((1.0 - target).ln() / (-alpha).ln_1p()).ceil() as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimateKind {
    Exact,
    LowerBound,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityEstimate {
    pub value: f64,
    pub kind: EstimateKind,
    pub ci: Option<(f64, f64)>,
    pub samples: u64,
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: u64, samples: u64) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let nf = samples as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Monte Carlo frequency of `predicate` among uniform family members.
/// Trial `i` draws from a seed derived from `(seed, i)`.
pub fn empirical_density<P>(
    family: &FamilySpec,
    n: usize,
    k: usize,
    predicate: P,
    samples: u64,
    seed: u64,
) -> Result<DensityEstimate>
where
    P: Fn(&Rule) -> bool + Sync,
{
    if samples == 0 {
        return Err(Error::InvalidArg("samples must be positive".into()));
    }
    let dense = tuple_count(n, k).is_some_and(|t| t <= 1 << 16) && family.base != Symmetry::Ss;
    let table = if dense {
        Some(crate::families::ClassTable::build(family, n, k)?)
    } else {
        None
    };
    let radices = table.as_ref().map(|t| t.radices());
    let hits = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let s = mix64(seed ^ mix64(i));
            let rule = match (&table, &radices) {
                (Some(t), Some(r)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(s);
                    let choice: Vec<usize> = r.iter().map(|&x| rng.gen_range(0..x)).collect();
                    t.rule(&choice)
                }
                _ => crate::families::lazy_sampler(family, n, k, s)?,
            };
            Ok(u64::from(predicate(&rule)))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(DensityEstimate {
        value: hits as f64 / samples as f64,
        kind: EstimateKind::MonteCarlo,
        ci: Some(wilson_interval(hits, samples)),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> Rule {
        Rule::xor()
    }

    #[test]
    fn ms_smallest_instance() {
        let cs = build_constraints(Construction::Ms, &xor(), ConstructionParams::new(10, 8, 3)).unwrap();
        assert!(cs.entries.len() <= 5 * 4);
        let alpha = exact_alpha(&cs).unwrap();
        assert_eq!(alpha, BigRational::new(1.into(), BigUint::from(10u32).pow(cs.entries.len() as u32).into()));
        for seed in 0..5 {
            assert!(verify_constructed_simulation(&cs, &xor(), 6, seed).unwrap().passed);
        }
    }

    #[test]
    fn hypothesis_guards() {
        let id1 = Rule::identity(2);
        assert!(matches!(
            build_constraints(Construction::Ms, &id1, ConstructionParams::new(10, 8, 3)),
            Err(Error::OutOfHypothesis(_))
        ));
        assert!(matches!(
            build_constraints(Construction::Ms, &xor(), ConstructionParams::new(10, 8, 2)),
            Err(Error::OutOfHypothesis(_))
        ));
        assert!(matches!(
            build_constraints(Construction::Kms, &xor(), ConstructionParams::new(10, 8, 3)),
            Err(Error::OutOfHypothesis(_))
        ));
    }

    #[test]
    fn fullshift_alpha() {
        let cs = build_constraints(
            Construction::CaptiveFullshift,
            &Rule::and(),
            ConstructionParams::new(6, 2, 1),
        )
        .unwrap();
        assert_eq!(cs.entries.len(), 4);
        assert_eq!(exact_alpha(&cs).unwrap(), BigRational::new(1.into(), 4.into()));
    }

    #[test]
    fn bounds() {
        assert!((bound_lower(&[0.5, 0.5]) - 0.75).abs() < 1e-15);
        assert_eq!(bound_lower(&[]), 0.0);
        let b = bound_repeated(1e-20, 1e20);
        assert!((b - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert_eq!(repeats_to_reach(0.25, 0.99), 17);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(25, 100);
        assert!(lo < 0.25 && 0.25 < hi);
        assert_eq!(wilson_interval(0, 10).0, 0.0);
    }

    #[test]
    fn empirical_always_true() {
        let est = empirical_density(&FamilySpec::ALL, 2, 2, |_| true, 100, 1).unwrap();
        assert_eq!(est.value, 1.0);
        assert!(empirical_density(&FamilySpec::ALL, 2, 2, |_| true, 0, 1).is_err());
    }

    #[test]
    fn independence_examples() {
        let key = |u: &[State]| family_key(&FamilySpec::MS, u).unwrap();
        let e1: BTreeSet<NKey> = [key(&[0, 0])].into();
        let e2: BTreeSet<NKey> = [key(&[1, 1])].into();
        assert!(independence_check(&FamilySpec::MS, 2, 2, &[e1.clone(), e2.clone()], 100).unwrap());
        let shared: BTreeSet<NKey> = [key(&[0, 0]), key(&[0, 1])].into();
        assert!(!independence_check(&FamilySpec::MS, 2, 2, &[e1, shared], 100).unwrap());
    }

    #[test]
    fn path_parsing() {
        assert_eq!("fixed-n:10".parse::<PathSpec>().unwrap().at(8), Some((10, 8)));
        assert_eq!("fixed-k:2".parse::<PathSpec>().unwrap().at(5), Some((5, 2)));
        let p: PathSpec = "list:3x2,4x2".parse().unwrap();
        assert_eq!(p.at(1), Some((4, 2)));
        assert!("list:3x2,3x2".parse::<PathSpec>().is_err());
    }

    #[test]
    fn every_construction_simulates_and_detects_mutation() {
        let cases = [
            (Construction::Tot, Rule::xor(), 10, 8, 3),
            (Construction::Oms(1), Rule::xor(), 10, 8, 3),
            (Construction::Kms, Rule::and(), 10, 8, 3),
            (Construction::Kset, Rule::and(), 10, 3, 0),
            (Construction::CaptiveFullshift, Rule::and(), 6, 2, 1),
        ];
        for (c, a0, n, k, j) in cases {
            let cs = build_constraints(c, &a0, ConstructionParams::new(n, k, j)).unwrap();
            for seed in 0..3 {
                assert!(verify_constructed_simulation(&cs, &a0, 6, seed).unwrap().passed, "{c}");
            }
            let (m, s) = mutate_entry(&cs, 0).unwrap();
            let check = verify_constructed_simulation(&m, &a0, 6, s).unwrap();
            assert_eq!(check.failed_step, Some(1), "{c}");
        }
    }

    #[test]
    fn construction_names_round_trip() {
        for c in Construction::ALL {
            assert_eq!(c.to_string().parse::<Construction>().unwrap(), c);
        }
        assert!("oms:x".parse::<Construction>().is_err());
    }
}
