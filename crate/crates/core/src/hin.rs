//! Typed entity registry, the four drug-centred relation matrices, and the
//! labelled drug-drug interaction list.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::{read_to_string, tsv_records, write_atomic};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityKind {
    Drug,
    Protein,
    SideEffect,
    Substructure,
}

impl EntityKind {
    pub const ALL: [EntityKind; 4] = [
        EntityKind::Drug,
        EntityKind::Protein,
        EntityKind::SideEffect,
        EntityKind::Substructure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EntityKind::Drug => "drug",
            EntityKind::Protein => "protein",
            EntityKind::SideEffect => "side_effect",
            EntityKind::Substructure => "substructure",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EntityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EntityKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Schema(format!("unknown entity kind {s:?}")))
    }
}

/// Whether loaders may create entities they have not seen before.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RegistryMode {
    #[default]
    Discover,
    Strict,
}

/// Per-kind dense indices for external string identifiers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntityRegistry {
    ids: [Vec<String>; 4],
    index: [HashMap<String, usize>; 4],
}

impl EntityRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index of `id`, creating it if absent.
    pub fn insert(&mut self, kind: EntityKind, id: &str) -> usize {
        let slot = kind.slot();
        if let Some(&idx) = self.index[slot].get(id) {
            return idx;
        }
        let idx = self.ids[slot].len();
        self.ids[slot].push(id.to_string());
        self.index[slot].insert(id.to_string(), idx);
        idx
    }

    pub fn get(&self, kind: EntityKind, id: &str) -> Option<usize> {
        self.index[kind.slot()].get(id).copied()
    }

    fn resolve(&mut self, kind: EntityKind, id: &str, mode: RegistryMode) -> Result<usize> {
        match mode {
            RegistryMode::Discover => Ok(self.insert(kind, id)),
            RegistryMode::Strict => self
                .get(kind, id)
                .ok_or_else(|| Error::Schema(format!("unknown {kind} id {id:?}"))),
        }
    }

    pub fn id(&self, kind: EntityKind, index: usize) -> &str {
        &self.ids[kind.slot()][index]
    }

    pub fn ids(&self, kind: EntityKind) -> &[String] {
        &self.ids[kind.slot()]
    }

    pub fn count(&self, kind: EntityKind) -> usize {
        self.ids[kind.slot()].len()
    }

    /// `kind<TAB>index<TAB>id` per entity.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# kind\tindex\tid\n");
        for kind in EntityKind::ALL {
            for (i, id) in self.ids(kind).iter().enumerate() {
                out.push_str(&format!("{kind}\t{i}\t{id}\n"));
            }
        }
        out
    }

    pub fn from_tsv(text: &str, source: &str) -> Result<Self> {
        let mut reg = EntityRegistry::new();
        for (line, fields) in tsv_records(text) {
            let parse_err = |message: String| Error::Parse {
                path: source.to_string(),
                line,
                message,
            };
            let [kind, index, id] = fields[..] else {
                return Err(parse_err(format!(
                    "expected 3 columns, found {}",
                    fields.len()
                )));
            };
            let kind: EntityKind = kind.parse().map_err(|e: Error| parse_err(e.to_string()))?;
            let index: usize = index
                .parse()
                .map_err(|_| parse_err(format!("bad index {index:?}")))?;
            if index != reg.count(kind) || reg.get(kind, id).is_some() {
                return Err(parse_err(format!(
                    "registry entry {kind} {index} {id:?} is out of order or duplicated"
                )));
            }
            reg.insert(kind, id);
        }
        Ok(reg)
    }
}

/// The four relation matrices of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    /// drug targets protein
    T,
    /// drug causes side effect
    C,
    /// drug has substructure
    H,
    /// protein interacts with protein
    P,
}

impl Relation {
    pub const ALL: [Relation; 4] = [Relation::T, Relation::C, Relation::H, Relation::P];

    pub fn source(self) -> EntityKind {
        match self {
            Relation::P => EntityKind::Protein,
            _ => EntityKind::Drug,
        }
    }

    pub fn target(self) -> EntityKind {
        match self {
            Relation::T | Relation::P => EntityKind::Protein,
            Relation::C => EntityKind::SideEffect,
            Relation::H => EntityKind::Substructure,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::T => "T",
            Relation::C => "C",
            Relation::H => "H",
            Relation::P => "P",
        }
    }

    fn of_kinds(source: EntityKind, target: EntityKind) -> Option<Relation> {
        Relation::ALL
            .into_iter()
            .find(|r| r.source() == source && r.target() == target)
    }
}

/// Sparse boolean incidence matrix stored as sorted, unique coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationMatrix {
    source: EntityKind,
    target: EntityKind,
    rows: usize,
    cols: usize,
    pairs: Vec<(usize, usize)>,
}

impl RelationMatrix {
    /// Sorts and deduplicates `pairs`; every pair must lie inside `rows×cols`.
    pub fn new(
        source: EntityKind,
        target: EntityKind,
        rows: usize,
        cols: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let set: BTreeSet<(usize, usize)> = pairs.into_iter().collect();
        if let Some(&(i, j)) = set.iter().find(|&&(i, j)| i >= rows || j >= cols) {
            return Err(Error::Schema(format!(
                "{source}->{target} coordinate ({i}, {j}) outside {rows}x{cols}"
            )));
        }
        Ok(RelationMatrix {
            source,
            target,
            rows,
            cols,
            pairs: set.into_iter().collect(),
        })
    }

    pub fn empty(source: EntityKind, target: EntityKind) -> Self {
        RelationMatrix {
            source,
            target,
            rows: 0,
            cols: 0,
            pairs: Vec::new(),
        }
    }

    pub fn source(&self) -> EntityKind {
        self.source
    }

    pub fn target(&self) -> EntityKind {
        self.target
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn nnz(&self) -> usize {
        self.pairs.len()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.binary_search(&(i, j)).is_ok()
    }

    /// Adds every mirrored `(j, i)` coordinate.
    pub fn symmetrized(&self) -> Self {
        let set: BTreeSet<(usize, usize)> = self
            .pairs
            .iter()
            .flat_map(|&(i, j)| [(i, j), (j, i)])
            .collect();
        let n = self.rows.max(self.cols);
        RelationMatrix {
            rows: n,
            cols: n,
            pairs: set.into_iter().collect(),
            ..*self
        }
    }

    /// Grows the extents; never shrinks them.
    fn widen(&mut self, rows: usize, cols: usize) {
        self.rows = self.rows.max(rows);
        self.cols = self.cols.max(cols);
    }

    /// Column indices per row.
    pub fn row_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); self.rows];
        for &(i, j) in &self.pairs {
            lists[i].push(j);
        }
        lists
    }

    /// Two-column TSV of external ids.
    pub fn to_tsv(&self, registry: &EntityRegistry) -> String {
        let mut out = format!("# {}\t{}\n", self.source, self.target);
        for &(i, j) in &self.pairs {
            out.push_str(registry.id(self.source, i));
            out.push('\t');
            out.push_str(registry.id(self.target, j));
            out.push('\n');
        }
        out
    }
}

/// Parses a two-column relation file. Protein–protein files are symmetrized.
pub fn parse_relation(
    text: &str,
    source_name: &str,
    source: EntityKind,
    target: EntityKind,
    registry: &mut EntityRegistry,
    mode: RegistryMode,
) -> Result<RelationMatrix> {
    let mut pairs = Vec::new();
    for (line, fields) in tsv_records(text) {
        let [a, b] = fields[..] else {
            return Err(Error::Parse {
                path: source_name.to_string(),
                line,
                message: format!("expected 2 tab-separated columns, found {}", fields.len()),
            });
        };
        let (a, b) = (a.trim(), b.trim());
        if a.is_empty() || b.is_empty() {
            return Err(Error::Parse {
                path: source_name.to_string(),
                line,
                message: "empty identifier".into(),
            });
        }
        let i = registry.resolve(source, a, mode)?;
        let j = registry.resolve(target, b, mode)?;
        pairs.push((i, j));
    }
    let matrix = RelationMatrix::new(
        source,
        target,
        registry.count(source),
        registry.count(target),
        pairs,
    )?;
    Ok(
        if source == EntityKind::Protein && target == EntityKind::Protein {
            matrix.symmetrized()
        } else {
            matrix
        },
    )
}

pub fn load_relation(
    path: &Path,
    source: EntityKind,
    target: EntityKind,
    registry: &mut EntityRegistry,
    mode: RegistryMode,
) -> Result<RelationMatrix> {
    let text = read_to_string(path)?;
    parse_relation(
        &text,
        &path.display().to_string(),
        source,
        target,
        registry,
        mode,
    )
}

/// Parses `drug<TAB>drug` lines into canonical `(min, max)` pairs.
pub fn parse_ddis(
    text: &str,
    source_name: &str,
    registry: &mut EntityRegistry,
    mode: RegistryMode,
) -> Result<Vec<(usize, usize)>> {
    let mut set = BTreeSet::new();
    for (line, fields) in tsv_records(text) {
        let parse_err = |message: String| Error::Parse {
            path: source_name.to_string(),
            line,
            message,
        };
        let [a, b] = fields[..] else {
            return Err(parse_err(format!(
                "expected 2 tab-separated columns, found {}",
                fields.len()
            )));
        };
        let i = registry.resolve(EntityKind::Drug, a.trim(), mode)?;
        let j = registry.resolve(EntityKind::Drug, b.trim(), mode)?;
        if i == j {
            return Err(parse_err(format!("self-interaction {a:?}")));
        }
        set.insert((i.min(j), i.max(j)));
    }
    Ok(set.into_iter().collect())
}

pub fn load_ddis(
    path: &Path,
    registry: &mut EntityRegistry,
    mode: RegistryMode,
) -> Result<Vec<(usize, usize)>> {
    let text = read_to_string(path)?;
    parse_ddis(&text, &path.display().to_string(), registry, mode)
}

/// Heterogeneous information network over drugs, proteins, side effects and
/// substructures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hin {
    registry: EntityRegistry,
    t: RelationMatrix,
    c: RelationMatrix,
    h: RelationMatrix,
    p: RelationMatrix,
    ddis: Vec<(usize, usize)>,
}

impl Hin {
    /// Checks each matrix's kinds against its relation and canonicalizes the
    /// interaction list. Matrices are widened to the registry's counts.
    pub fn new(
        registry: EntityRegistry,
        t: RelationMatrix,
        c: RelationMatrix,
        h: RelationMatrix,
        p: RelationMatrix,
        ddis: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut mats = [t, c, h, p];
        for (m, rel) in mats.iter_mut().zip(Relation::ALL) {
            if Relation::of_kinds(m.source, m.target) != Some(rel) {
                return Err(Error::Schema(format!(
                    "matrix {} must map {} to {}, got {} to {}",
                    rel.symbol(),
                    rel.source(),
                    rel.target(),
                    m.source,
                    m.target
                )));
            }
            m.widen(registry.count(rel.source()), registry.count(rel.target()));
        }
        let n = registry.count(EntityKind::Drug);
        let mut set = BTreeSet::new();
        for (i, j) in ddis {
            if i == j || i >= n || j >= n {
                return Err(Error::Schema(format!(
                    "interaction ({i}, {j}) is a self-pair or outside {n} drugs"
                )));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let [t, c, h, p] = mats;
        Ok(Hin {
            registry,
            t,
            c,
            h,
            p,
            ddis: set.into_iter().collect(),
        })
    }

    pub fn empty() -> Self {
        Hin {
            registry: EntityRegistry::new(),
            t: RelationMatrix::empty(EntityKind::Drug, EntityKind::Protein),
            c: RelationMatrix::empty(EntityKind::Drug, EntityKind::SideEffect),
            h: RelationMatrix::empty(EntityKind::Drug, EntityKind::Substructure),
            p: RelationMatrix::empty(EntityKind::Protein, EntityKind::Protein),
            ddis: Vec::new(),
        }
    }

    pub fn registry(&self) -> &EntityRegistry {
        &self.registry
    }

    pub fn relation(&self, rel: Relation) -> &RelationMatrix {
        match rel {
            Relation::T => &self.t,
            Relation::C => &self.c,
            Relation::H => &self.h,
            Relation::P => &self.p,
        }
    }

    pub fn ddis(&self) -> &[(usize, usize)] {
        &self.ddis
    }

    pub fn drug_count(&self) -> usize {
        self.registry.count(EntityKind::Drug)
    }

    pub fn count(&self, kind: EntityKind) -> usize {
        self.registry.count(kind)
    }

    /// Writes `registry.tsv`, one file per relation and `ddi.tsv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("registry.tsv"), self.registry.to_tsv().as_bytes())?;
        for rel in Relation::ALL {
            let text = self.relation(rel).to_tsv(&self.registry);
            write_atomic(&dir.join(format!("{}.tsv", rel.symbol())), text.as_bytes())?;
        }
        let mut ddi = String::from("# drug\tdrug\n");
        for &(i, j) in &self.ddis {
            ddi.push_str(&format!(
                "{}\t{}\n",
                self.registry.id(EntityKind::Drug, i),
                self.registry.id(EntityKind::Drug, j)
            ));
        }
        write_atomic(&dir.join("ddi.tsv"), ddi.as_bytes())
    }

    /// Reads a directory written by [`Hin::write_dir`], resolving ids strictly.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let reg_path = dir.join("registry.tsv");
        let mut registry =
            EntityRegistry::from_tsv(&read_to_string(&reg_path)?, &reg_path.display().to_string())?;
        let mut mats = Vec::with_capacity(4);
        for rel in Relation::ALL {
            let path = dir.join(format!("{}.tsv", rel.symbol()));
            mats.push(load_relation(
                &path,
                rel.source(),
                rel.target(),
                &mut registry,
                RegistryMode::Strict,
            )?);
        }
        let ddis = load_ddis(&dir.join("ddi.tsv"), &mut registry, RegistryMode::Strict)?;
        let [t, c, h, p]: [RelationMatrix; 4] = mats.try_into().expect("four relations");
        Hin::new(registry, t, c, h, p, ddis)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.findings
            .iter()
            .all(|f| f.severity == Severity::Warning)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Warning)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("status\t{}\n", if self.passed() { "pass" } else { "fail" });
        for f in &self.findings {
            let tag = match f.severity {
                Severity::Warning => "warning",
                Severity::Error => "error",
            };
            out.push_str(&format!("{tag}\t{}\n", f.message));
        }
        out
    }
}

/// Orphans are warnings; out-of-bound coordinates and a non-symmetric or
/// self-looped protein–protein matrix are errors.
pub fn validate(hin: &Hin) -> ValidationReport {
    let reg = &hin.registry;
    let mut findings = Vec::new();
    let mut error = |message: String| {
        findings.push(Finding {
            severity: Severity::Error,
            message,
        })
    };

    for rel in Relation::ALL {
        let m = hin.relation(rel);
        let (rows, cols) = (reg.count(m.source), reg.count(m.target));
        for &(i, j) in m.pairs() {
            if i >= rows || j >= cols {
                error(format!(
                    "{} coordinate ({i}, {j}) outside registry bounds {rows}x{cols}",
                    rel.symbol()
                ));
            }
        }
    }

    let p = &hin.p;
    let n_proteins = reg.count(EntityKind::Protein);
    let name = |i: usize| {
        if i < n_proteins {
            reg.id(EntityKind::Protein, i).to_string()
        } else {
            format!("#{i}")
        }
    };
    for &(i, j) in p.pairs() {
        if i == j {
            error(format!("P has self-interaction ({}, {})", name(i), name(j)));
        } else if !p.contains(j, i) {
            error(format!(
                "P asymmetric: ({}, {}) present but ({}, {}) missing",
                name(i),
                name(j),
                name(j),
                name(i)
            ));
        }
    }

    let mut degree: [Vec<usize>; 4] = EntityKind::ALL.map(|k| vec![0; reg.count(k)]);
    for rel in Relation::ALL {
        let m = hin.relation(rel);
        for &(i, j) in m.pairs() {
            if let Some(d) = degree[m.source.slot()].get_mut(i) {
                *d += 1;
            }
            if let Some(d) = degree[m.target.slot()].get_mut(j) {
                *d += 1;
            }
        }
    }
    for kind in EntityKind::ALL {
        for (i, &d) in degree[kind.slot()].iter().enumerate() {
            if d == 0 {
                findings.push(Finding {
                    severity: Severity::Warning,
                    message: format!("orphan {kind} {:?} has no relations", reg.id(kind, i)),
                });
            }
        }
    }
    ValidationReport { findings }
}

/// Node and edge counts in the layout of the dataset statistics table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HinStats {
    pub drugs: usize,
    pub proteins: usize,
    pub side_effects: usize,
    pub substructures: usize,
    pub ddi: usize,
    pub dpi: usize,
    pub drug_side_effect: usize,
    pub drug_substructure: usize,
    /// Undirected protein–protein interactions.
    pub ppi: usize,
}

impl HinStats {
    pub fn rows(&self) -> [(&'static str, usize); 9] {
        [
            ("Drug", self.drugs),
            ("Protein", self.proteins),
            ("SideEffect", self.side_effects),
            ("Substructure", self.substructures),
            ("DDI", self.ddi),
            ("DPI", self.dpi),
            ("DrugSideEffect", self.drug_side_effect),
            ("DrugSubstructure", self.drug_substructure),
            ("PPI", self.ppi),
        ]
    }

    pub fn to_tsv(&self) -> String {
        self.rows()
            .iter()
            .map(|(k, v)| format!("{k}\t{v}\n"))
            .collect()
    }
}

pub fn stats(hin: &Hin) -> HinStats {
    let ppi = hin.p.pairs().iter().filter(|&&(i, j)| i <= j).count();
    HinStats {
        drugs: hin.count(EntityKind::Drug),
        proteins: hin.count(EntityKind::Protein),
        side_effects: hin.count(EntityKind::SideEffect),
        substructures: hin.count(EntityKind::Substructure),
        ddi: hin.ddis.len(),
        dpi: hin.t.nnz(),
        drug_side_effect: hin.c.nnz(),
        drug_substructure: hin.h.nnz(),
        ppi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Hin {
        let mut reg = EntityRegistry::new();
        let t = parse_relation(
            "d1\tp1\nd1\tp2\nd2\tp2\n",
            "t",
            EntityKind::Drug,
            EntityKind::Protein,
            &mut reg,
            RegistryMode::Discover,
        )
        .unwrap();
        let p = parse_relation(
            "p1\tp2\n",
            "p",
            EntityKind::Protein,
            EntityKind::Protein,
            &mut reg,
            RegistryMode::Discover,
        )
        .unwrap();
        let c = RelationMatrix::empty(EntityKind::Drug, EntityKind::SideEffect);
        let h = RelationMatrix::empty(EntityKind::Drug, EntityKind::Substructure);
        Hin::new(reg, t, c, h, p, [(1, 0)]).unwrap()
    }

    #[test]
    fn loads_targets() {
        let hin = toy();
        let t = hin.relation(Relation::T);
        assert_eq!(t.nnz(), 3);
        assert_eq!((t.rows(), t.cols()), (2, 2));
        assert_eq!(hin.ddis(), &[(0, 1)]);
    }

    #[test]
    fn duplicate_lines_collapse() {
        let mut reg = EntityRegistry::new();
        let t = parse_relation(
            "d1\tp1\nd1\tp1\n",
            "t",
            EntityKind::Drug,
            EntityKind::Protein,
            &mut reg,
            RegistryMode::Discover,
        )
        .unwrap();
        assert_eq!(t.pairs(), &[(0, 0)]);
    }

    #[test]
    fn protein_interactions_are_symmetrized() {
        let p = toy().relation(Relation::P).clone();
        assert!(p.contains(0, 1) && p.contains(1, 0));
        assert_eq!(p.nnz(), 2);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let mut reg = EntityRegistry::new();
        let err = parse_relation(
            "# c\nd1\tp1\nd2 p2\n",
            "targets.tsv",
            EntityKind::Drug,
            EntityKind::Protein,
            &mut reg,
            RegistryMode::Discover,
        )
        .unwrap_err();
        match err {
            Error::Parse { line, path, .. } => {
                assert_eq!(line, 3);
                assert_eq!(path, "targets.tsv");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn strict_mode_rejects_unknown_ids() {
        let mut reg = EntityRegistry::new();
        reg.insert(EntityKind::Drug, "d1");
        let err = parse_relation(
            "d1\tp9\n",
            "t",
            EntityKind::Drug,
            EntityKind::Protein,
            &mut reg,
            RegistryMode::Strict,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn well_formed_toy_validates_cleanly() {
        let report = validate(&toy());
        assert!(report.passed());
        assert!(report.findings.is_empty(), "{:?}", report.findings);
    }

    #[test]
    fn injected_asymmetry_fails_and_names_pair() {
        let hin = toy();
        let p =
            RelationMatrix::new(EntityKind::Protein, EntityKind::Protein, 2, 2, [(0, 1)]).unwrap();
        let broken = Hin::new(
            hin.registry.clone(),
            hin.t.clone(),
            hin.c.clone(),
            hin.h.clone(),
            p,
            hin.ddis.clone(),
        )
        .unwrap();
        let report = validate(&broken);
        assert!(!report.passed());
        let msg = &report.errors().next().unwrap().message;
        assert!(msg.contains("(p1, p2)"), "{msg}");
    }

    #[test]
    fn self_interaction_fails_validation() {
        let mut reg = EntityRegistry::new();
        let p = parse_relation(
            "p1\tp1\n",
            "p",
            EntityKind::Protein,
            EntityKind::Protein,
            &mut reg,
            RegistryMode::Discover,
        )
        .unwrap();
        let hin = Hin::new(
            reg,
            RelationMatrix::empty(EntityKind::Drug, EntityKind::Protein),
            RelationMatrix::empty(EntityKind::Drug, EntityKind::SideEffect),
            RelationMatrix::empty(EntityKind::Drug, EntityKind::Substructure),
            p,
            [],
        )
        .unwrap();
        assert!(!validate(&hin).passed());
    }

    #[test]
    fn orphan_drug_is_only_a_warning() {
        let hin = toy();
        let mut reg = hin.registry.clone();
        reg.insert(EntityKind::Drug, "d3");
        let hin = Hin::new(reg, hin.t, hin.c, hin.h, hin.p, hin.ddis).unwrap();
        let report = validate(&hin);
        assert!(report.passed());
        let warnings: Vec<_> = report.warnings().collect();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].message.contains("d3"));
    }

    #[test]
    fn out_of_bound_coordinate_is_reported() {
        let mut hin = toy();
        hin.t.pairs.push((7, 0));
        let report = validate(&hin);
        assert!(report.errors().any(|f| f.message.contains("(7, 0)")));
    }

    #[test]
    fn kind_mismatch_is_a_schema_error() {
        let toy = toy();
        let err = Hin::new(
            toy.registry.clone(),
            toy.c.clone(),
            toy.t.clone(),
            toy.h.clone(),
            toy.p.clone(),
            [],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn stats_of_toy_and_empty() {
        let s = stats(&toy());
        assert_eq!((s.drugs, s.proteins, s.dpi, s.ppi, s.ddi), (2, 2, 3, 1, 1));
        assert_eq!(stats(&Hin::empty()), HinStats::default());
    }

    #[test]
    fn registry_round_trip() {
        let reg = toy().registry.clone();
        assert_eq!(EntityRegistry::from_tsv(&reg.to_tsv(), "r").unwrap(), reg);
    }

    #[test]
    fn ddi_self_pair_is_rejected() {
        let mut reg = EntityRegistry::new();
        assert!(matches!(
            parse_ddis("d1\td1\n", "ddi", &mut reg, RegistryMode::Discover),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
