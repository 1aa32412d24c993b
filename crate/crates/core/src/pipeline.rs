//! Glue from input files to model inputs: HIN assembly, meta-path graphs
//! and drug features.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::espf::{
    build_vocab, espf_features, parse_fingerprints, parse_smiles_file, FeatureMatrix, Fingerprints,
    Vocabulary,
};
use crate::hin::{
    parse_ddis, parse_relation, EntityKind, EntityRegistry, Hin, RegistryMode, RelationMatrix,
};
use crate::io::read_to_string;
use crate::metapath::{
    commuting_matrix, neighbor_graph, CommutingMatrix, MetaPathSpec, NeighborGraph,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceText {
    /// Shown in error messages.
    pub name: String,
    pub text: String,
}

impl SourceText {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        SourceText {
            name: name.into(),
            text: text.into(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(SourceText::new(
            path.display().to_string(),
            read_to_string(path)?,
        ))
    }
}

/// Raw relation files. Without fingerprints the drug–substructure relation
/// is empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HinSources {
    pub targets: SourceText,
    pub side_effects: SourceText,
    pub ppi: SourceText,
    pub fingerprints: Option<SourceText>,
    pub ddis: SourceText,
}

/// Parses every source, registering ids in file order (targets, side
/// effects, PPI, fingerprints, interactions).
pub fn build_hin(sources: &HinSources, mode: RegistryMode) -> Result<(Hin, Option<Fingerprints>)> {
    build_hin_with(sources, EntityRegistry::new(), mode)
}

/// [`build_hin`] starting from a preloaded registry, typically with
/// [`RegistryMode::Strict`] so that unlisted ids are rejected.
pub fn build_hin_with(
    sources: &HinSources,
    mut registry: EntityRegistry,
    mode: RegistryMode,
) -> Result<(Hin, Option<Fingerprints>)> {
    let rel = |src: &SourceText, from, to, reg: &mut EntityRegistry| {
        parse_relation(&src.text, &src.name, from, to, reg, mode)
    };
    let t = rel(
        &sources.targets,
        EntityKind::Drug,
        EntityKind::Protein,
        &mut registry,
    )?;
    let c = rel(
        &sources.side_effects,
        EntityKind::Drug,
        EntityKind::SideEffect,
        &mut registry,
    )?;
    let p = rel(
        &sources.ppi,
        EntityKind::Protein,
        EntityKind::Protein,
        &mut registry,
    )?;
    let (h, fingerprints) = match &sources.fingerprints {
        Some(src) => {
            let (h, fp) = parse_fingerprints(&src.text, &src.name, &mut registry, mode)?;
            (h, Some(fp))
        }
        None => (
            RelationMatrix::empty(EntityKind::Drug, EntityKind::Substructure),
            None,
        ),
    };
    let ddis = parse_ddis(&sources.ddis.text, &sources.ddis.name, &mut registry, mode)?;
    Ok((Hin::new(registry, t, c, h, p, ddis)?, fingerprints))
}

/// Commuting matrix and binarized neighbor graph per spec, in spec order.
pub fn metapath_graphs(
    hin: &Hin,
    specs: &[MetaPathSpec],
    threshold: u64,
) -> Result<Vec<(CommutingMatrix, NeighborGraph)>> {
    specs
        .iter()
        .map(|spec| {
            let m = commuting_matrix(hin, spec)?;
            let g = neighbor_graph(&m, threshold)?;
            Ok((m, g))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FeatureMode {
    #[default]
    Espf,
    Fingerprint,
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "espf" => Ok(FeatureMode::Espf),
            "fingerprint" => Ok(FeatureMode::Fingerprint),
            other => Err(Error::Parameter(format!(
                "unknown feature mode {other:?} (espf|fingerprint)"
            ))),
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Espf => "espf",
            FeatureMode::Fingerprint => "fingerprint",
        })
    }
}

/// Builds a vocabulary from the SMILES of registered drugs and encodes every
/// drug. SMILES lines for unknown drugs are an error.
pub fn espf_from_smiles(
    smiles: &SourceText,
    registry: &EntityRegistry,
    threshold: usize,
    max_size: usize,
) -> Result<(Vocabulary, FeatureMatrix)> {
    let mut reg = registry.clone();
    let parsed = parse_smiles_file(&smiles.text, &smiles.name, &mut reg, RegistryMode::Strict)?;
    let corpus: Vec<_> = parsed.iter().map(|(_, t)| t.clone()).collect();
    let vocab = build_vocab(&corpus, threshold, max_size)?;
    let features = espf_features(&parsed, &vocab, registry.count(EntityKind::Drug))?;
    Ok((vocab, features))
}
