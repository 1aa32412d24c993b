use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledPair {
    pub i: usize,
    pub j: usize,
    pub label: bool,
}

impl LabeledPair {
    pub fn new(a: usize, b: usize, label: bool) -> Self {
        LabeledPair {
            i: a.min(b),
            j: a.max(b),
            label,
        }
    }

    pub fn key(&self) -> (usize, usize) {
        (self.i, self.j)
    }

    pub fn touches(&self, drugs: &HashSet<usize>) -> bool {
        drugs.contains(&self.i) || drugs.contains(&self.j)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Protocol {
    /// Random split of known interactions; every drug may appear in training.
    #[default]
    Edges,
    /// A drug subset is held out and all of its interactions go to test.
    ColdStart,
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edges" => Ok(Protocol::Edges),
            "coldstart" => Ok(Protocol::ColdStart),
            other => Err(Error::Parameter(format!(
                "unknown protocol {other:?} (edges|coldstart)"
            ))),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Edges => "edges",
            Protocol::ColdStart => "coldstart",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitBundle {
    pub protocol: Protocol,
    pub train: Vec<LabeledPair>,
    pub validation: Vec<LabeledPair>,
    pub test: Vec<LabeledPair>,
    /// Sorted; empty for the edge protocol.
    pub held_out: Vec<usize>,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl SplitBundle {
    pub fn partitions(&self) -> [(&'static str, &[LabeledPair]); 3] {
        [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
        ]
    }
}

/// Draws `count` distinct unordered pairs uniformly from those accepted by
/// `allowed` that are neither positives nor in `exclude`.
pub fn sample_negatives_where<R: Rng + ?Sized>(
    drugs: usize,
    positives: &HashSet<(usize, usize)>,
    count: usize,
    rng: &mut R,
    exclude: &HashSet<(usize, usize)>,
    allowed: impl Fn(usize, usize) -> bool,
) -> Result<Vec<LabeledPair>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let candidates: Vec<(usize, usize)> = (0..drugs)
        .flat_map(|i| (i + 1..drugs).map(move |j| (i, j)))
        .filter(|p| !positives.contains(p) && !exclude.contains(p) && allowed(p.0, p.1))
        .collect();
    if count > candidates.len() {
        return Err(Error::Infeasible(format!(
            "requested {count} negatives but only {} eligible pairs exist",
            candidates.len()
        )));
    }
    Ok(index::sample(rng, candidates.len(), count)
        .into_iter()
        .map(|k| LabeledPair::new(candidates[k].0, candidates[k].1, false))
        .collect())
}

/// Uniform negatives over all unordered drug pairs outside `ddis ∪ exclude`.
pub fn sample_negatives<R: Rng + ?Sized>(
    drugs: usize,
    ddis: &[(usize, usize)],
    count: usize,
    rng: &mut R,
    exclude: &HashSet<(usize, usize)>,
) -> Result<Vec<LabeledPair>> {
    let positives = canonical_set(ddis);
    sample_negatives_where(drugs, &positives, count, rng, exclude, |_, _| true)
}

fn canonical_set(ddis: &[(usize, usize)]) -> HashSet<(usize, usize)> {
    ddis.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect()
}

fn check_ddis(drugs: usize, ddis: &[(usize, usize)]) -> Result<()> {
    match ddis
        .iter()
        .find(|&&(a, b)| a == b || a >= drugs || b >= drugs)
    {
        Some(&(a, b)) => Err(Error::Contract(format!(
            "interaction ({a}, {b}) is a self-pair or outside {drugs} drugs"
        ))),
        None => Ok(()),
    }
}

/// `floor(x)` tolerant of representation error just below an integer.
fn floor_count(x: f64) -> usize {
    (x + 1e-9).floor() as usize
}

/// Shuffles the interactions into train/validation/test by `ratios`, with one
/// negative per positive in each partition.
pub fn split_edges(
    drugs: usize,
    ddis: &[(usize, usize)],
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitBundle> {
    check_ddis(drugs, ddis)?;
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r))
        || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::Parameter(format!(
            "split ratios must be non-negative and sum to 1, got {ratios:?}"
        )));
    }
    let mut positives: Vec<(usize, usize)> = canonical_set(ddis).into_iter().collect();
    positives.sort_unstable();
    positives.shuffle(&mut stream_rng(seed, Stream::Split));

    let n = positives.len();
    let n_train = floor_count(ratios[0] * n as f64).min(n);
    let n_val = floor_count(ratios[1] * n as f64).min(n - n_train);
    let bounds = [0, n_train, n_train + n_val, n];

    let pos_set: HashSet<_> = positives.iter().copied().collect();
    let negatives = sample_negatives_where(
        drugs,
        &pos_set,
        n,
        &mut stream_rng(seed, Stream::Negatives),
        &HashSet::new(),
        |_, _| true,
    )?;

    let mut parts: Vec<Vec<LabeledPair>> = (0..3)
        .map(|p| {
            let (lo, hi) = (bounds[p], bounds[p + 1]);
            positives[lo..hi]
                .iter()
                .map(|&(a, b)| LabeledPair::new(a, b, true))
                .chain(negatives[lo..hi].iter().copied())
                .collect()
        })
        .collect();
    let test = parts.pop().expect("three parts");
    let validation = parts.pop().expect("three parts");
    let train = parts.pop().expect("three parts");
    let mut bundle = SplitBundle {
        protocol: Protocol::Edges,
        train,
        validation,
        test,
        held_out: Vec::new(),
        seed,
        warnings: Vec::new(),
    };
    bundle.warnings = empty_warnings(&bundle);
    Ok(bundle)
}

fn empty_warnings(bundle: &SplitBundle) -> Vec<String> {
    bundle
        .partitions()
        .iter()
        .filter(|(_, pairs)| pairs.is_empty())
        .map(|(name, _)| format!("{name} partition is empty"))
        .collect()
}

/// Number of drugs held out for `fraction`: `⌈fraction·n⌉`, at least one.
pub fn held_out_count(drugs: usize, fraction: f64) -> usize {
    ((fraction * drugs as f64 - 1e-9).ceil() as usize).max(1)
}

/// Holds out `⌈fraction·n⌉` drugs. Every interaction touching one of them is
/// a test positive; the rest split 90/10 into train and validation. Test
/// negatives touch a held-out drug, the others never do.
pub fn split_cold_start(
    drugs: usize,
    ddis: &[(usize, usize)],
    fraction: f64,
    seed: u64,
) -> Result<SplitBundle> {
    check_ddis(drugs, ddis)?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "drug fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let k = held_out_count(drugs, fraction);
    if k >= drugs {
        return Err(Error::Infeasible(format!(
            "holding out {k} of {drugs} drugs leaves none for training"
        )));
    }
    let mut split_rng = stream_rng(seed, Stream::Split);
    let mut held: Vec<usize> = index::sample(&mut split_rng, drugs, k).into_vec();
    held.sort_unstable();
    let held_set: HashSet<usize> = held.iter().copied().collect();

    let mut positives: Vec<(usize, usize)> = canonical_set(ddis).into_iter().collect();
    positives.sort_unstable();
    let touches = |a: usize, b: usize| held_set.contains(&a) || held_set.contains(&b);
    let (test_pos, mut rest): (Vec<_>, Vec<_>) =
        positives.iter().partition(|&&(a, b)| touches(a, b));
    if rest.is_empty() {
        return Err(Error::Infeasible(
            "every interaction touches a held-out drug".into(),
        ));
    }
    rest.shuffle(&mut split_rng);
    let n_train = floor_count(0.9 * rest.len() as f64);

    let pos_set: HashSet<_> = positives.iter().copied().collect();
    let mut neg_rng = stream_rng(seed, Stream::Negatives);
    let none = HashSet::new();
    let seen_neg =
        sample_negatives_where(drugs, &pos_set, rest.len(), &mut neg_rng, &none, |a, b| {
            !touches(a, b)
        })?;
    let test_neg = sample_negatives_where(
        drugs,
        &pos_set,
        test_pos.len(),
        &mut neg_rng,
        &none,
        touches,
    )?;

    let label = |pairs: &[(usize, usize)]| -> Vec<LabeledPair> {
        pairs
            .iter()
            .map(|&(a, b)| LabeledPair::new(a, b, true))
            .collect()
    };
    let mut train = label(&rest[..n_train]);
    train.extend_from_slice(&seen_neg[..n_train]);
    let mut validation = label(&rest[n_train..]);
    validation.extend_from_slice(&seen_neg[n_train..]);
    let mut test = label(&test_pos);
    test.extend(test_neg);

    let mut bundle = SplitBundle {
        protocol: Protocol::ColdStart,
        train,
        validation,
        test,
        held_out: held,
        seed,
        warnings: Vec::new(),
    };
    bundle.warnings = empty_warnings(&bundle);
    Ok(bundle)
}
