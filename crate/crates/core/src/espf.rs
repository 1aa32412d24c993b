//! Frequent-substructure drug features.
//!
//! SMILES strings are split into atom/bond tokens, then adjacent token pairs
//! that occur at least `threshold` times across the corpus are merged into new
//! units, most frequent first, until no pair qualifies or the vocabulary is
//! full. A drug's feature row flags every vocabulary unit left in its merged
//! token sequence.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hin::{EntityKind, EntityRegistry, RegistryMode, RelationMatrix};
use crate::io::{read_to_string, tsv_records};
use crate::tensor::{Real, Tensor};

/// Number of keys in a MACCS fingerprint.
pub const FINGERPRINT_BITS: usize = 167;

pub const DEFAULT_THRESHOLD: usize = 5;
pub const DEFAULT_MAX_SIZE: usize = 512;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSequence(tokens)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn join(&self) -> String {
        self.0.concat()
    }
}

/// Splits a SMILES string into atoms, bonds, ring digits and branches.
///
/// Bracket atoms (`[nH]`), the two-letter organic elements `Cl` and `Br`,
/// and `%nn` ring closures are single tokens; everything else is one
/// character per token.
pub fn tokenize_smiles(s: &str) -> Result<TokenSequence> {
    if s.is_empty() || !s.is_ascii() {
        return Err(Error::Parameter(format!(
            "SMILES must be non-empty ASCII, got {s:?}"
        )));
    }
    let bytes = s.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let len = match bytes[i] {
            b'[' => match bytes[i + 1..].iter().position(|&b| b == b'[' || b == b']') {
                Some(k) if bytes[i + 1 + k] == b']' => k + 2,
                _ => {
                    return Err(Error::Smiles {
                        input: s.to_string(),
                        position: i,
                    })
                }
            },
            b']' => {
                return Err(Error::Smiles {
                    input: s.to_string(),
                    position: i,
                })
            }
            b'C' if bytes.get(i + 1) == Some(&b'l') => 2,
            b'B' if bytes.get(i + 1) == Some(&b'r') => 2,
            b'%' if bytes.len() >= i + 3
                && bytes[i + 1].is_ascii_digit()
                && bytes[i + 2].is_ascii_digit() =>
            {
                3
            }
            _ => 1,
        };
        tokens.push(s[i..i + len].to_string());
        i += len;
    }
    Ok(TokenSequence(tokens))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Unit {
    pub text: String,
    /// The two units this one was merged from; `None` for base tokens.
    pub parts: Option<(String, String)>,
}

/// Base tokens (sorted) followed by merged units in merge order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    units: Vec<Unit>,
    threshold: usize,
    max_size: usize,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_units(units: Vec<Unit>, threshold: usize, max_size: usize) -> Result<Self> {
        let mut index = HashMap::with_capacity(units.len());
        for (k, u) in units.iter().enumerate() {
            if let Some((a, b)) = &u.parts {
                if !index.contains_key(a) || !index.contains_key(b) || format!("{a}{b}") != u.text {
                    return Err(Error::Format(format!(
                        "vocabulary unit {:?} is not a merge of two earlier units",
                        u.text
                    )));
                }
            }
            if index.insert(u.text.clone(), k).is_some() {
                return Err(Error::Format(format!(
                    "duplicate vocabulary unit {:?}",
                    u.text
                )));
            }
        }
        Ok(Vocabulary {
            units,
            threshold,
            max_size,
            index,
        })
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn position(&self, unit: &str) -> Option<usize> {
        self.index.get(unit).copied()
    }

    pub fn contains(&self, unit: &str) -> bool {
        self.index.contains_key(unit)
    }

    pub fn merges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.units
            .iter()
            .filter_map(|u| u.parts.as_ref().map(|(a, b)| (a.as_str(), b.as_str())))
    }

    pub fn base_len(&self) -> usize {
        self.units.iter().filter(|u| u.parts.is_none()).count()
    }

    /// Applies every merge, in merge order, to a token sequence.
    pub fn apply(&self, tokens: &TokenSequence) -> Vec<String> {
        let mut seq = tokens.0.clone();
        for (a, b) in self.merges() {
            seq = merge_pair(&seq, a, b).0;
        }
        seq
    }

    /// One unit per line. Merged units carry their two parts after tabs.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# threshold={}\n# max_size={}\n",
            self.threshold, self.max_size
        );
        for u in &self.units {
            match &u.parts {
                None => out.push_str(&format!("{}\n", u.text)),
                Some((a, b)) => out.push_str(&format!("{}\t{a}\t{b}\n", u.text)),
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut threshold = None;
        let mut max_size = None;
        for line in text.lines() {
            if let Some(v) = line.strip_prefix("# threshold=") {
                threshold = v.trim().parse().ok();
            } else if let Some(v) = line.strip_prefix("# max_size=") {
                max_size = v.trim().parse().ok();
            }
        }
        let mut units = Vec::new();
        for (line, fields) in tsv_records(text) {
            let unit = match fields[..] {
                [t] => Unit {
                    text: t.to_string(),
                    parts: None,
                },
                [t, a, b] => Unit {
                    text: t.to_string(),
                    parts: Some((a.to_string(), b.to_string())),
                },
                _ => {
                    return Err(Error::Parse {
                        path: "vocabulary".into(),
                        line,
                        message: format!("expected 1 or 3 columns, found {}", fields.len()),
                    })
                }
            };
            units.push(unit);
        }
        Self::from_units(
            units,
            threshold.unwrap_or(DEFAULT_THRESHOLD),
            max_size.unwrap_or(DEFAULT_MAX_SIZE),
        )
    }
}

/// Non-overlapping occurrences of each adjacent pair, counted left to right.
fn pair_counts(corpus: &[Vec<String>]) -> BTreeMap<(&str, &str), usize> {
    let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for seq in corpus {
        let mut busy_until: HashMap<(&str, &str), usize> = HashMap::new();
        for i in 0..seq.len().saturating_sub(1) {
            let pair = (seq[i].as_str(), seq[i + 1].as_str());
            let free = busy_until.get(&pair).is_none_or(|&end| i >= end);
            if free {
                busy_until.insert(pair, i + 2);
                *counts.entry(pair).or_default() += 1;
            }
        }
    }
    counts
}

/// Replaces non-overlapping `(a, b)` occurrences left to right. Returns the
/// new sequence and the number of replacements.
fn merge_pair(seq: &[String], a: &str, b: &str) -> (Vec<String>, usize) {
    let mut out = Vec::with_capacity(seq.len());
    let mut merged = 0;
    let mut i = 0;
    while i < seq.len() {
        if i + 1 < seq.len() && seq[i] == a && seq[i + 1] == b {
            out.push(format!("{a}{b}"));
            merged += 1;
            i += 2;
        } else {
            out.push(seq[i].clone());
            i += 1;
        }
    }
    (out, merged)
}

/// Builds the merge vocabulary. Ties in pair frequency go to the
/// lexicographically smallest concatenation (then the smallest left part).
pub fn build_vocab(
    corpus: &[TokenSequence],
    threshold: usize,
    max_size: usize,
) -> Result<Vocabulary> {
    if threshold < 1 {
        return Err(Error::Parameter(
            "vocabulary threshold must be at least 1".into(),
        ));
    }
    if max_size < 1 {
        return Err(Error::Parameter(
            "vocabulary max_size must be at least 1".into(),
        ));
    }
    if corpus.is_empty() {
        return Err(Error::Parameter("vocabulary corpus is empty".into()));
    }

    let base: BTreeSet<&str> = corpus
        .iter()
        .flat_map(|s| s.tokens().iter().map(String::as_str))
        .collect();
    let mut units: Vec<Unit> = base
        .into_iter()
        .map(|t| Unit {
            text: t.to_string(),
            parts: None,
        })
        .collect();
    let mut known: BTreeSet<String> = units.iter().map(|u| u.text.clone()).collect();
    let mut seqs: Vec<Vec<String>> = corpus.iter().map(|s| s.0.clone()).collect();

    while units.len() < max_size {
        let best = {
            let counts = pair_counts(&seqs);
            counts
                .into_iter()
                .filter(|&(_, c)| c >= threshold)
                // Merging into an existing unit would not grow the vocabulary.
                .filter(|&((a, b), _)| !known.contains(&format!("{a}{b}")))
                .min_by(|&((a1, b1), c1), &((a2, b2), c2)| {
                    c2.cmp(&c1)
                        .then_with(|| format!("{a1}{b1}").cmp(&format!("{a2}{b2}")))
                        .then_with(|| a1.cmp(a2))
                })
                .map(|((a, b), _)| (a.to_string(), b.to_string()))
        };
        let Some((a, b)) = best else { break };
        for seq in seqs.iter_mut() {
            *seq = merge_pair(seq, &a, &b).0;
        }
        let text = format!("{a}{b}");
        known.insert(text.clone());
        units.push(Unit {
            text,
            parts: Some((a, b)),
        });
    }
    Vocabulary::from_units(units, threshold, max_size)
}

/// Feature row of one drug: a flag per vocabulary unit. Tokens the
/// vocabulary has never seen set no flag.
pub fn encode_drug(tokens: &TokenSequence, vocab: &Vocabulary) -> Vec<bool> {
    let mut row = vec![false; vocab.len()];
    for unit in vocab.apply(tokens) {
        if let Some(k) = vocab.position(&unit) {
            row[k] = true;
        }
    }
    row
}

/// Drug×feature binary matrix, rows in drug-index order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureMatrix {
    drugs: usize,
    dim: usize,
    bits: Vec<bool>,
}

impl FeatureMatrix {
    pub fn new(drugs: usize, dim: usize, bits: Vec<bool>) -> Result<Self> {
        if dim == 0 || bits.len() != drugs * dim {
            return Err(Error::shape("feature_matrix", &[drugs, dim], &[bits.len()]));
        }
        Ok(FeatureMatrix { drugs, dim, bits })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<bool>]) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::shape("feature_matrix", &[dim], &[bad.len()]));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn drugs(&self) -> usize {
        self.drugs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.bits[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        let data = self
            .bits
            .iter()
            .map(|&b| if b { T::one() } else { T::zero() })
            .collect();
        Tensor::matrix(self.drugs, self.dim, data).expect("feature matrix is non-empty")
    }

    /// `drug_id<TAB>bitstring` per drug.
    pub fn to_tsv(&self, registry: &EntityRegistry) -> String {
        let mut out = format!("# drug\tbits (d0={})\n", self.dim);
        for i in 0..self.drugs {
            out.push_str(registry.id(EntityKind::Drug, i));
            out.push('\t');
            out.extend(self.row(i).iter().map(|&b| if b { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }

    /// Reads rows written by [`FeatureMatrix::to_tsv`]; every registered drug
    /// needs exactly one row.
    pub fn from_tsv(text: &str, registry: &EntityRegistry) -> Result<Self> {
        let n = registry.count(EntityKind::Drug);
        let mut rows: Vec<Option<Vec<bool>>> = vec![None; n];
        let mut dim = None;
        for (line, fields) in tsv_records(text) {
            let parse_err = |message: String| Error::Parse {
                path: "features".into(),
                line,
                message,
            };
            let [id, bits] = fields[..] else {
                return Err(parse_err(format!(
                    "expected 2 columns, found {}",
                    fields.len()
                )));
            };
            let i = registry
                .get(EntityKind::Drug, id)
                .ok_or_else(|| Error::Schema(format!("unknown drug id {id:?} in features")))?;
            let row = parse_bits(bits).map_err(|m| parse_err(format!("drug {id}: {m}")))?;
            if *dim.get_or_insert(row.len()) != row.len() {
                return Err(parse_err(format!("drug {id}: inconsistent feature width")));
            }
            rows[i] = Some(row);
        }
        let dim = dim.ok_or_else(|| Error::Format("feature file has no rows".into()))?;
        let rows: Vec<Vec<bool>> = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.ok_or_else(|| {
                    Error::Format(format!(
                        "no features for drug {:?}",
                        registry.id(EntityKind::Drug, i)
                    ))
                })
            })
            .collect::<Result<_>>()?;
        Self::from_rows(dim, &rows)
    }
}

fn parse_bits(s: &str) -> std::result::Result<Vec<bool>, String> {
    s.trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(format!("invalid bit {other:?}")),
        })
        .collect()
}

/// Parses `drug_id<TAB>smiles` lines, registering drugs per `mode`.
pub fn parse_smiles_file(
    text: &str,
    source_name: &str,
    registry: &mut EntityRegistry,
    mode: RegistryMode,
) -> Result<Vec<(usize, TokenSequence)>> {
    let mut out = Vec::new();
    for (line, fields) in tsv_records(text) {
        let [id, smiles] = fields[..] else {
            return Err(Error::Parse {
                path: source_name.to_string(),
                line,
                message: format!("expected 2 columns, found {}", fields.len()),
            });
        };
        let tokens = tokenize_smiles(smiles.trim()).map_err(|e| Error::Parse {
            path: source_name.to_string(),
            line,
            message: format!("drug {id}: {e}"),
        })?;
        let idx = match mode {
            RegistryMode::Discover => registry.insert(EntityKind::Drug, id),
            RegistryMode::Strict => registry
                .get(EntityKind::Drug, id)
                .ok_or_else(|| Error::Schema(format!("unknown drug id {id:?}")))?,
        };
        out.push((idx, tokens));
    }
    Ok(out)
}

/// Feature rows for `drugs` drugs; drugs without a SMILES entry get a zero row.
pub fn espf_features(
    smiles: &[(usize, TokenSequence)],
    vocab: &Vocabulary,
    drugs: usize,
) -> Result<FeatureMatrix> {
    let mut rows = vec![vec![false; vocab.len()]; drugs];
    for (i, tokens) in smiles {
        let row = rows
            .get_mut(*i)
            .ok_or_else(|| Error::Contract(format!("drug index {i} outside {drugs} drugs")))?;
        *row = encode_drug(tokens, vocab);
    }
    FeatureMatrix::from_rows(vocab.len(), &rows)
}

/// Fingerprint bits per drug index, as loaded.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Fingerprints {
    rows: BTreeMap<usize, Vec<bool>>,
}

impl Fingerprints {
    pub fn get(&self, drug: usize) -> Option<&[bool]> {
        self.rows.get(&drug).map(Vec::as_slice)
    }

    /// Dense `drugs×167` features; drugs without a fingerprint get zeros.
    pub fn feature_matrix(&self, drugs: usize) -> Result<FeatureMatrix> {
        let mut bits = vec![false; drugs * FINGERPRINT_BITS];
        for (&i, row) in &self.rows {
            if i >= drugs {
                return Err(Error::Contract(format!(
                    "drug index {i} outside {drugs} drugs"
                )));
            }
            bits[i * FINGERPRINT_BITS..(i + 1) * FINGERPRINT_BITS].copy_from_slice(row);
        }
        FeatureMatrix::new(drugs, FINGERPRINT_BITS, bits)
    }
}

/// External id of the substructure entity for fingerprint bit `k`.
pub fn fingerprint_entity_id(k: usize) -> String {
    format!("MACCS{k}")
}

/// Parses `drug_id<TAB>167-bit string` lines. Registers one substructure
/// entity per bit position and returns the drug×substructure matrix.
pub fn parse_fingerprints(
    text: &str,
    source_name: &str,
    registry: &mut EntityRegistry,
    mode: RegistryMode,
) -> Result<(RelationMatrix, Fingerprints)> {
    let bit_entities: Vec<usize> = (0..FINGERPRINT_BITS)
        .map(|k| registry.insert(EntityKind::Substructure, &fingerprint_entity_id(k)))
        .collect();
    let mut pairs = Vec::new();
    let mut table = Fingerprints::default();
    for (line, fields) in tsv_records(text) {
        let [id, bits] = fields[..] else {
            return Err(Error::Parse {
                path: source_name.to_string(),
                line,
                message: format!("expected 2 columns, found {}", fields.len()),
            });
        };
        let row = parse_bits(bits).map_err(|m| Error::Format(format!("drug {id}: {m}")))?;
        if row.len() != FINGERPRINT_BITS {
            return Err(Error::Format(format!(
                "drug {id}: fingerprint has {} bits, expected {FINGERPRINT_BITS}",
                row.len()
            )));
        }
        let drug = match mode {
            RegistryMode::Discover => registry.insert(EntityKind::Drug, id),
            RegistryMode::Strict => registry
                .get(EntityKind::Drug, id)
                .ok_or_else(|| Error::Schema(format!("unknown drug id {id:?}")))?,
        };
        pairs.extend(
            row.iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(k, _)| (drug, bit_entities[k])),
        );
        table.rows.insert(drug, row);
    }
    let h = RelationMatrix::new(
        EntityKind::Drug,
        EntityKind::Substructure,
        registry.count(EntityKind::Drug),
        registry.count(EntityKind::Substructure),
        pairs,
    )?;
    Ok((h, table))
}

pub fn load_fingerprints(
    path: &Path,
    registry: &mut EntityRegistry,
    mode: RegistryMode,
) -> Result<(RelationMatrix, Fingerprints)> {
    let text = read_to_string(path)?;
    parse_fingerprints(&text, &path.display().to_string(), registry, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize_smiles(s).unwrap().tokens().to_vec()
    }

    fn corpus(items: &[&str]) -> Vec<TokenSequence> {
        items.iter().map(|s| tokenize_smiles(s).unwrap()).collect()
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(toks("CCO"), ["C", "C", "O"]);
        assert_eq!(toks("C(Br)=O"), ["C", "(", "Br", ")", "=", "O"]);
        assert_eq!(toks("[nH]1cc1"), ["[nH]", "1", "c", "c", "1"]);
        assert_eq!(toks("ClC%12CC%12"), ["Cl", "C", "%12", "C", "C", "%12"]);
        assert_eq!(toks("B"), ["B"]);
    }

    #[test]
    fn tokenizer_errors() {
        match tokenize_smiles("CC[nH").unwrap_err() {
            Error::Smiles { position, .. } => assert_eq!(position, 2),
            other => panic!("{other}"),
        }
        assert!(matches!(
            tokenize_smiles("C[[N]"),
            Err(Error::Smiles { position: 1, .. })
        ));
        assert!(matches!(
            tokenize_smiles("C]"),
            Err(Error::Smiles { position: 1, .. })
        ));
        assert!(tokenize_smiles("").is_err());
        assert!(tokenize_smiles("Cé").is_err());
    }

    #[test]
    fn first_merge_of_two_drug_corpus() {
        // Pair counts: (C,C)=2, (C,O)=1, (C,N)=1 → only CC reaches 2.
        // After merging: (CC,O)=1, (CC,N)=1 → stop.
        let vocab = build_vocab(&corpus(&["CCO", "CCN"]), 2, 512).unwrap();
        let texts: Vec<_> = vocab.units().iter().map(|u| u.text.as_str()).collect();
        assert_eq!(texts, ["C", "N", "O", "CC"]);
        assert_eq!(vocab.merges().collect::<Vec<_>>(), [("C", "C")]);
        assert_eq!(vocab.base_len(), 3);
    }

    #[test]
    fn high_threshold_and_size_cap_admit_no_merges() {
        let c = corpus(&["CCO", "CCN"]);
        assert_eq!(build_vocab(&c, 3, 512).unwrap().len(), 3);
        assert_eq!(build_vocab(&c, 2, 3).unwrap().len(), 3);
        assert!(matches!(build_vocab(&c, 0, 10), Err(Error::Parameter(_))));
        assert!(build_vocab(&[], 1, 10).is_err());
    }

    #[test]
    fn overlapping_runs_count_once() {
        // "CCC" holds one non-overlapping (C,C); two copies reach threshold 2.
        let vocab = build_vocab(&corpus(&["CCC", "CCC"]), 2, 2).unwrap();
        assert_eq!(vocab.merges().collect::<Vec<_>>(), [("C", "C")]);
        assert_eq!(vocab.apply(&tokenize_smiles("CCC").unwrap()), ["CC", "C"]);
    }

    #[test]
    fn ties_break_on_concatenation() {
        // (C,N) and (C,O) both occur twice; "CN" < "CO".
        let vocab = build_vocab(&corpus(&["CN", "CN", "CO", "CO"]), 2, 512).unwrap();
        let merges: Vec<_> = vocab.merges().collect();
        assert_eq!(merges, [("C", "N"), ("C", "O")]);
    }

    #[test]
    fn encode_examples() {
        let vocab = build_vocab(&corpus(&["CCO", "CCN"]), 2, 512).unwrap();
        let row = encode_drug(&tokenize_smiles("CCO").unwrap(), &vocab);
        let set: Vec<_> = vocab
            .units()
            .iter()
            .zip(&row)
            .filter(|(_, &b)| b)
            .map(|(u, _)| u.text.as_str())
            .collect();
        assert_eq!(set, ["O", "CC"]);

        let plain = build_vocab(&corpus(&["CCO", "CCN"]), 9, 512).unwrap();
        let row = encode_drug(&tokenize_smiles("CO").unwrap(), &plain);
        assert_eq!(row, [true, false, true]);

        let t = tokenize_smiles("CCN").unwrap();
        assert_eq!(encode_drug(&t, &vocab), encode_drug(&t, &vocab));
        // Unknown base tokens set nothing.
        assert!(encode_drug(&tokenize_smiles("S").unwrap(), &vocab)
            .iter()
            .all(|&b| !b));
    }

    #[test]
    fn vocabulary_text_round_trip() {
        let vocab = build_vocab(&corpus(&["CCOCC", "CCNCC", "OCCO"]), 2, 10).unwrap();
        let text = vocab.to_text();
        let back = Vocabulary::from_text(&text).unwrap();
        assert_eq!(back, vocab);
        assert_eq!(back.to_text(), text);
        assert!(Vocabulary::from_text("C\nCC\tC\tX\n").is_err());
    }

    #[test]
    fn fingerprint_ingestion() {
        let mut bits = vec!['0'; FINGERPRINT_BITS];
        for k in [3, 42, 100] {
            bits[k] = '1';
        }
        let a: String = bits.iter().collect();
        let mut other = vec!['0'; FINGERPRINT_BITS];
        other[42] = '1';
        let b: String = other.iter().collect();
        let zero = "0".repeat(FINGERPRINT_BITS);
        let text = format!("d1\t{a}\nd2\t{b}\nd3\t{zero}\n");
        let mut reg = EntityRegistry::new();
        let (h, fp) = parse_fingerprints(&text, "fp", &mut reg, RegistryMode::Discover).unwrap();
        assert_eq!(reg.count(EntityKind::Substructure), FINGERPRINT_BITS);
        assert_eq!(reg.count(EntityKind::Drug), 3);
        assert_eq!(h.pairs().iter().filter(|p| p.0 == 0).count(), 3);
        assert_eq!(h.pairs().iter().filter(|p| p.0 == 2).count(), 0);
        assert!(h.contains(0, 42) && h.contains(1, 42));
        let fm = fp.feature_matrix(3).unwrap();
        assert_eq!(fm.dim(), FINGERPRINT_BITS);
        assert!(fm.row(2).iter().all(|&b| !b));
    }

    #[test]
    fn fingerprint_length_is_checked() {
        let mut reg = EntityRegistry::new();
        let err =
            parse_fingerprints("dX\t0101\n", "fp", &mut reg, RegistryMode::Discover).unwrap_err();
        assert!(err.to_string().contains("dX"), "{err}");
    }

    #[test]
    fn feature_tsv_round_trip() {
        let mut reg = EntityRegistry::new();
        reg.insert(EntityKind::Drug, "a");
        reg.insert(EntityKind::Drug, "b");
        let fm = FeatureMatrix::from_rows(3, &[vec![true, false, true], vec![false, false, true]])
            .unwrap();
        assert_eq!(FeatureMatrix::from_tsv(&fm.to_tsv(&reg), &reg).unwrap(), fm);
        assert!(FeatureMatrix::from_tsv("a\t101\n", &reg).is_err());
    }
}
