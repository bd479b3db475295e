//! Local rules, periodic configurations and their evolution.
//!
//! States are `0..n`. A rule of neighbourhood size `k` reads the window
//! `[-left, right]` around a cell with `left = (k - 1) / 2` and
//! `right = k / 2`, so for `k = 2` the window is the cell itself and its
//! right neighbour.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type State = u32;

/// Largest `n^k` for which a rule is materialized as a table.
pub const DENSIFY_CAP: usize = 1 << 24;

type Evaluator = dyn Fn(&[State]) -> State + Send + Sync;

#[derive(Clone)]
enum Table {
    Dense(Arc<[State]>),
    Lazy { id: Arc<str>, eval: Arc<Evaluator> },
}

/// A local transition function of size `(n, k)`.
#[derive(Clone)]
pub struct Rule {
    n: usize,
    k: usize,
    table: Table,
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.table {
            Table::Dense(t) if t.len() <= 64 => f
                .debug_struct("Rule")
                .field("n", &self.n)
                .field("k", &self.k)
                .field("table", &&t[..])
                .finish(),
            Table::Dense(_) => f
                .debug_struct("Rule")
                .field("n", &self.n)
                .field("k", &self.k)
                .finish_non_exhaustive(),
            Table::Lazy { id, .. } => f
                .debug_struct("Rule")
                .field("n", &self.n)
                .field("k", &self.k)
                .field("id", id)
                .finish(),
        }
    }
}

/// `n^k` if it fits in a `usize`.
pub fn tuple_count(n: usize, k: usize) -> Option<usize> {
    let mut acc: usize = 1;
    for _ in 0..k {
        acc = acc.checked_mul(n)?;
    }
    Some(acc)
}

/// Lexicographic index of a tuple, leftmost symbol most significant.
pub fn tuple_index(n: usize, u: &[State]) -> usize {
    u.iter().fold(0usize, |acc, &s| acc * n + s as usize)
}

/// Inverse of [`tuple_index`].
pub fn index_tuple(n: usize, k: usize, mut idx: usize) -> Vec<State> {
    let mut u = vec![0; k];
    for slot in u.iter_mut().rev() {
        *slot = (idx % n) as State;
        idx /= n;
    }
    u
}

/// Iterator over all tuples of `A_n^k` in lexicographic order.
pub fn all_tuples(n: usize, k: usize) -> impl Iterator<Item = Vec<State>> {
    let total = tuple_count(n, k).expect("tuple space overflows usize");
    (0..total).map(move |i| index_tuple(n, k, i))
}

fn check_states(n: usize, u: &[State]) -> Result<()> {
    match u.iter().find(|&&s| s as usize >= n) {
        Some(&state) => Err(Error::InvalidState { state, n }),
        None => Ok(()),
    }
}

impl Rule {
    /// A rule from its table in lexicographic tuple order.
    pub fn dense(n: usize, k: usize, table: Vec<State>) -> Result<Rule> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidArg("n and k must be at least 1".into()));
        }
        let expected = tuple_count(n, k)
            .ok_or_else(|| Error::TooLarge(format!("{n}^{k} table entries")))?;
        if table.len() != expected {
            return Err(Error::Shape {
                expected,
                found: table.len(),
            });
        }
        check_states(n, &table)?;
        Ok(Rule {
            n,
            k,
            table: Table::Dense(table.into()),
        })
    }

    /// A rule computed on demand. `id` identifies the rule in traces and
    /// metadata; the evaluator must be pure.
    pub fn intensional<F>(n: usize, k: usize, id: impl Into<String>, eval: F) -> Rule
    where
        F: Fn(&[State]) -> State + Send + Sync + 'static,
    {
        assert!(n >= 1 && k >= 1, "rule needs n, k >= 1");
        Rule {
            n,
            k,
            table: Table::Lazy {
                id: id.into().into(),
                eval: Arc::new(eval),
            },
        }
    }

    /// Materializes a rule from a function over all tuples.
    pub fn tabulate<F>(n: usize, k: usize, f: F) -> Result<Rule>
    where
        F: Fn(&[State]) -> State,
    {
        let total = tuple_count(n, k)
            .filter(|&t| t <= DENSIFY_CAP)
            .ok_or_else(|| Error::TooLarge(format!("{n}^{k} exceeds the densify cap")))?;
        let table = (0..total).map(|i| f(&index_tuple(n, k, i))).collect();
        Rule::dense(n, k, table)
    }

    pub fn identity(n: usize) -> Rule {
        Rule::dense(n, 1, (0..n as State).collect()).expect("identity table is well formed")
    }

    pub fn constant(n: usize, k: usize, q: State) -> Result<Rule> {
        Rule::tabulate(n, k, |_| q)
    }

    /// Elementary XOR rule `δ(a, b) = a ⊕ b` on the window `{0, +1}`.
    pub fn xor() -> Rule {
        Rule::dense(2, 2, vec![0, 1, 1, 0]).unwrap()
    }

    /// Elementary AND rule on the window `{0, +1}`.
    pub fn and() -> Rule {
        Rule::dense(2, 2, vec![0, 0, 0, 1]).unwrap()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of neighbours read to the left of the cell.
    pub fn left(&self) -> usize {
        (self.k - 1) / 2
    }

    /// Number of neighbours read to the right of the cell.
    pub fn right(&self) -> usize {
        self.k / 2
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.table, Table::Dense(_))
    }

    pub fn table(&self) -> Option<&[State]> {
        match &self.table {
            Table::Dense(t) => Some(t),
            Table::Lazy { .. } => None,
        }
    }

    /// Stable identity: the evaluator id for intensional rules, a digest of
    /// the table for dense ones.
    pub fn id(&self) -> String {
        match &self.table {
            Table::Lazy { id, .. } => id.to_string(),
            Table::Dense(t) => {
                let mut h: u64 = 0xcbf2_9ce4_8422_2325;
                for &s in t.iter() {
                    h ^= s as u64;
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
                format!("dense-{}-{}-{h:016x}", self.n, self.k)
            }
        }
    }

    /// Evaluates the rule on a `k`-tuple without range checks.
    pub fn eval(&self, u: &[State]) -> State {
        debug_assert_eq!(u.len(), self.k);
        match &self.table {
            Table::Dense(t) => t[tuple_index(self.n, u)],
            Table::Lazy { eval, .. } => {
                let out = eval(u);
                debug_assert!((out as usize) < self.n, "evaluator left the state set");
                out
            }
        }
    }

    /// Evaluates with range checks on the input and the produced state.
    pub fn try_eval(&self, u: &[State]) -> Result<State> {
        if u.len() != self.k {
            return Err(Error::InvalidArg(format!(
                "tuple of length {} for k = {}",
                u.len(),
                self.k
            )));
        }
        check_states(self.n, u)?;
        let out = self.eval(u);
        if out as usize >= self.n {
            return Err(Error::InvalidState {
                state: out,
                n: self.n,
            });
        }
        Ok(out)
    }

    /// Number of tuples `n^k`, if representable.
    pub fn tuple_count(&self) -> Option<usize> {
        tuple_count(self.n, self.k)
    }

    /// Dense copy of the rule, or `TooLarge` when `n^k > cap`.
    pub fn densify(&self, cap: usize) -> Result<Rule> {
        if self.is_dense() {
            return Ok(self.clone());
        }
        match self.tuple_count() {
            Some(t) if t <= cap => Rule::tabulate(self.n, self.k, |u| self.eval(u)),
            _ => Err(Error::TooLarge(format!(
                "rule {} has {}^{} tuples, cap {cap}",
                self.id(),
                self.n,
                self.k
            ))),
        }
    }

    /// Densifies when `n^k` fits under [`DENSIFY_CAP`], otherwise returns
    /// the rule unchanged.
    pub fn densify_if_small(self) -> Rule {
        match self.tuple_count() {
            Some(t) if t <= DENSIFY_CAP && !self.is_dense() => {
                self.densify(DENSIFY_CAP).expect("size checked")
            }
            _ => self,
        }
    }

    /// Exhaustive equality of local functions, refused above `cap` tuples.
    pub fn same_function(&self, other: &Rule, cap: usize) -> Result<bool> {
        if self.n != other.n || self.k != other.k {
            return Ok(false);
        }
        if let (Some(a), Some(b)) = (self.table(), other.table()) {
            return Ok(a == b);
        }
        let total = self
            .tuple_count()
            .filter(|&t| t <= cap)
            .ok_or_else(|| Error::TooLarge(format!("comparison over {}^{}", self.n, self.k)))?;
        Ok((0..total).all(|i| {
            let u = index_tuple(self.n, self.k, i);
            self.eval(&u) == other.eval(&u)
        }))
    }

    /// The same global map read through a wider window `k_new >= k` whose
    /// extra neighbours are ignored.
    pub fn extend_window(&self, k_new: usize) -> Result<Rule> {
        if k_new == self.k {
            return Ok(self.clone());
        }
        let new_left = (k_new - 1) / 2;
        let new_right = k_new / 2;
        if k_new < self.k || new_left < self.left() || new_right < self.right() {
            return Err(Error::InvalidArg(format!(
                "window k = {k_new} does not contain k = {}",
                self.k
            )));
        }
        let offset = new_left - self.left();
        let k = self.k;
        let inner = self.clone();
        let id = format!("{}@k{k_new}", self.id());
        Ok(
            Rule::intensional(self.n, k_new, id, move |u| inner.eval(&u[offset..offset + k]))
                .densify_if_small(),
        )
    }
}

/// Smallest window size whose span contains `left` cells to the left and
/// `right` cells to the right.
pub fn window_for(left: usize, right: usize) -> usize {
    if right > left {
        2 * right
    } else {
        2 * left + 1
    }
}

/// A spatially periodic configuration: the bi-infinite repetition of `word`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PConfig {
    word: Vec<State>,
}

impl PConfig {
    pub fn new(word: Vec<State>) -> Result<PConfig> {
        if word.is_empty() {
            return Err(Error::InvalidArg("configuration period must be at least 1".into()));
        }
        Ok(PConfig { word })
    }

    pub fn word(&self) -> &[State] {
        &self.word
    }

    pub fn into_word(self) -> Vec<State> {
        self.word
    }

    pub fn period(&self) -> usize {
        self.word.len()
    }

    /// Cell `z` of the bi-infinite configuration.
    pub fn at(&self, z: i64) -> State {
        self.word[z.rem_euclid(self.word.len() as i64) as usize]
    }

    /// `rotate(c, d)[i] = c[i + d]`: the configuration seen from cell `d`.
    pub fn rotate(&self, d: i64) -> PConfig {
        let p = self.word.len() as i64;
        PConfig {
            word: (0..p).map(|i| self.at(i + d)).collect(),
        }
    }

    /// The same configuration written with period `len`, a multiple of the
    /// current period.
    pub fn repeat_to(&self, len: usize) -> PConfig {
        debug_assert_eq!(len % self.word.len(), 0);
        PConfig {
            word: (0..len).map(|i| self.word[i % self.word.len()]).collect(),
        }
    }

    /// The cells `[from, from + len)` unrolled from the periodic word.
    pub fn window(&self, from: i64, len: usize) -> Vec<State> {
        (0..len as i64).map(|i| self.at(from + i)).collect()
    }

    /// Whether the two periodic configurations are the same element of A^Z.
    pub fn same_configuration(&self, other: &PConfig) -> bool {
        let l = lcm(self.period(), other.period());
        (0..l as i64).all(|i| self.at(i) == other.at(i))
    }

    /// Whether some rotation of `other` equals `self`; returns the offset
    /// `d` with `self = rotate(other, d)`.
    pub fn rotation_of(&self, other: &PConfig) -> Option<usize> {
        let l = lcm(self.period(), other.period());
        (0..l).find(|&d| (0..l as i64).all(|i| self.at(i) == other.at(i + d as i64)))
    }
}

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Extension of the local rule to finite words: `result[i] = δ(u[i..i+k])`.
pub fn apply_local(rule: &Rule, u: &[State]) -> Result<Vec<State>> {
    check_states(rule.n(), u)?;
    let k = rule.k();
    if u.len() < k {
        return Ok(Vec::new());
    }
    Ok(u.windows(k).map(|w| rule.eval(w)).collect())
}

/// One application of the global map.
pub fn step(rule: &Rule, c: &PConfig) -> Result<PConfig> {
    check_states(rule.n(), c.word())?;
    let p = c.period();
    let k = rule.k();
    let left = rule.left() as i64;
    let mut buf = vec![0; k];
    let word = (0..p as i64)
        .map(|z| {
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot = c.at(z - left + i as i64);
            }
            rule.eval(&buf)
        })
        .collect();
    Ok(PConfig { word })
}

/// The rows `c, G(c), ..., G^steps(c)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub n: usize,
    pub rows: Vec<PConfig>,
    pub rule_id: String,
}

impl Trace {
    pub fn last(&self) -> &PConfig {
        self.rows.last().expect("trace has at least one row")
    }

    pub fn steps(&self) -> usize {
        self.rows.len() - 1
    }

    /// Text form: a header `n <n> period <p> steps <T>` followed by one
    /// line of space-separated states per row.
    pub fn to_text(&self) -> String {
        let p = self.rows[0].period();
        let mut out = format!("n {} period {} steps {}\n", self.n, p, self.steps());
        for row in &self.rows {
            let line: Vec<String> = row.word().iter().map(|s| s.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Trace> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty trace file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (n, p, steps) = match fields.as_slice() {
            ["n", n, "period", p, "steps", t] => (parse_num(n)?, parse_num(p)?, parse_num(t)?),
            _ => return Err(Error::Parse(format!("bad trace header `{header}`"))),
        };
        let mut rows = Vec::with_capacity(steps + 1);
        for line in lines {
            let word = line
                .split_whitespace()
                .map(|s| parse_num(s).map(|v| v as State))
                .collect::<Result<Vec<_>>>()?;
            if word.len() != p {
                return Err(Error::Parse(format!(
                    "row {} has {} cells, expected {p}",
                    rows.len(),
                    word.len()
                )));
            }
            check_states(n, &word).map_err(|e| Error::Parse(e.to_string()))?;
            rows.push(PConfig::new(word)?);
        }
        if rows.len() != steps + 1 {
            return Err(Error::Parse(format!(
                "expected {} rows, found {}",
                steps + 1,
                rows.len()
            )));
        }
        Ok(Trace {
            n,
            rows,
            rule_id: String::new(),
        })
    }
}

fn parse_num(s: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Parse(format!("expected a non-negative integer, found `{s}`")))
}

pub fn evolve(rule: &Rule, c: &PConfig, steps: usize) -> Result<Trace> {
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(c.clone());
    for _ in 0..steps {
        let next = step(rule, rows.last().unwrap())?;
        rows.push(next);
    }
    Ok(Trace {
        n: rule.n(),
        rows,
        rule_id: rule.id(),
    })
}

/// Serializes a dense rule:
///
/// ```text
/// n 2
/// k 2
/// table 0 1 1 0
/// ```
pub fn serialize_rule(rule: &Rule) -> Result<String> {
    let table = rule.table().ok_or_else(|| {
        Error::Unsupported(format!("intensional rule {} must be densified first", rule.id()))
    })?;
    let entries: Vec<String> = table.iter().map(|s| s.to_string()).collect();
    Ok(format!(
        "n {}\nk {}\ntable {}\n",
        rule.n(),
        rule.k(),
        entries.join(" ")
    ))
}

pub fn parse_rule(text: &str) -> Result<Rule> {
    let mut n = None;
    let mut k = None;
    let mut table: Option<Vec<State>> = None;
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match key {
            "n" => n = Some(parse_num(rest.trim())?),
            "k" => k = Some(parse_num(rest.trim())?),
            "table" => {
                let entries = rest
                    .split_whitespace()
                    .map(|s| parse_num(s).map(|v| v as State))
                    .collect::<Result<Vec<_>>>()?;
                table.get_or_insert_with(Vec::new).extend(entries);
            }
            other => return Err(Error::Parse(format!("unknown field `{other}`"))),
        }
    }
    let n = n.ok_or_else(|| Error::Parse("missing field n".into()))?;
    let k = k.ok_or_else(|| Error::Parse("missing field k".into()))?;
    let table = table.ok_or_else(|| Error::Parse("missing field table".into()))?;
    Rule::dense(n, k, table)
}
