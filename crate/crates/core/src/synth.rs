//! Synthetic data. [`planted`] builds a drug network whose interactions hold
//! exactly when two drugs share a target protein, so the signal is fully
//! recoverable from the drug–protein–drug meta-path. [`random_hin`] draws
//! small unstructured networks for oracle tests.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::Result;
use crate::espf::FINGERPRINT_BITS;
use crate::hin::{EntityKind, EntityRegistry, Hin, RelationMatrix};
use crate::io::write_atomic;
use crate::pipeline::{HinSources, SourceText};
use crate::rng::{stream_rng, Stream};

const FRAGMENTS: [&str; 16] = [
    "C", "CC", "O", "N", "c1ccccc1", "C(=O)O", "Cl", "Br", "CN", "S", "F", "C=C", "OC", "N(C)C",
    "C#N", "[nH]",
];

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedConfig {
    pub drugs: usize,
    pub proteins: usize,
    /// Probability that a drug gets a second target.
    pub second_target_rate: f64,
    pub side_effects: usize,
    pub side_effect_rate: f64,
    pub ppi_rate: f64,
    pub fingerprint_rate: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            drugs: 50,
            proteins: 10,
            second_target_rate: 0.2,
            side_effects: 30,
            side_effect_rate: 0.1,
            ppi_rate: 0.2,
            fingerprint_rate: 0.05,
            seed: 0,
        }
    }
}

/// File contents of a synthetic dataset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticFiles {
    pub targets: String,
    pub side_effects: String,
    pub ppi: String,
    pub fingerprints: String,
    pub smiles: String,
    pub ddis: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticPaths {
    pub targets: PathBuf,
    pub side_effects: PathBuf,
    pub ppi: PathBuf,
    pub fingerprints: PathBuf,
    pub smiles: PathBuf,
    pub ddis: PathBuf,
}

impl SyntheticFiles {
    pub fn write_dir(&self, dir: &Path) -> Result<SyntheticPaths> {
        let paths = SyntheticPaths {
            targets: dir.join("targets.tsv"),
            side_effects: dir.join("side_effects.tsv"),
            ppi: dir.join("ppi.tsv"),
            fingerprints: dir.join("fingerprints.tsv"),
            smiles: dir.join("smiles.tsv"),
            ddis: dir.join("ddi.tsv"),
        };
        for (path, text) in [
            (&paths.targets, &self.targets),
            (&paths.side_effects, &self.side_effects),
            (&paths.ppi, &self.ppi),
            (&paths.fingerprints, &self.fingerprints),
            (&paths.smiles, &self.smiles),
            (&paths.ddis, &self.ddis),
        ] {
            write_atomic(path, text.as_bytes())?;
        }
        Ok(paths)
    }

    pub fn sources(&self, with_fingerprints: bool) -> HinSources {
        HinSources {
            targets: SourceText::new("targets.tsv", self.targets.clone()),
            side_effects: SourceText::new("side_effects.tsv", self.side_effects.clone()),
            ppi: SourceText::new("ppi.tsv", self.ppi.clone()),
            fingerprints: with_fingerprints
                .then(|| SourceText::new("fingerprints.tsv", self.fingerprints.clone())),
            ddis: SourceText::new("ddi.tsv", self.ddis.clone()),
        }
    }

    pub fn smiles_source(&self) -> SourceText {
        SourceText::new("smiles.tsv", self.smiles.clone())
    }
}

pub fn drug_id(i: usize) -> String {
    format!("DB{:05}", i + 1)
}

/// Every drug gets one target (sometimes two); two drugs interact iff their
/// target sets intersect. Side effects, protein interactions, fingerprints
/// and SMILES are independent noise.
pub fn planted(cfg: &PlantedConfig) -> SyntheticFiles {
    let mut rng = stream_rng(cfg.seed, Stream::Synthetic);
    let proteins = cfg.proteins.max(1);
    let targets: Vec<BTreeSet<usize>> = (0..cfg.drugs)
        .map(|_| {
            let mut set = BTreeSet::from([rng.gen_range(0..proteins)]);
            if proteins > 1 && rng.gen_bool(cfg.second_target_rate) {
                set.insert(rng.gen_range(0..proteins));
            }
            set
        })
        .collect();

    let mut files = SyntheticFiles {
        targets: "# drug\tprotein\n".into(),
        side_effects: "# drug\tside_effect\n".into(),
        ppi: "# protein\tprotein\n".into(),
        fingerprints: "# drug\tmaccs_bits\n".into(),
        smiles: "# drug\tsmiles\n".into(),
        ddis: "# drug\tdrug\n".into(),
    };
    for (i, set) in targets.iter().enumerate() {
        for p in set {
            files
                .targets
                .push_str(&format!("{}\tP{:03}\n", drug_id(i), p + 1));
        }
    }
    for i in 0..cfg.drugs {
        for s in 0..cfg.side_effects {
            if rng.gen_bool(cfg.side_effect_rate) {
                files
                    .side_effects
                    .push_str(&format!("{}\tSE{:03}\n", drug_id(i), s + 1));
            }
        }
    }
    for a in 0..proteins {
        for b in a + 1..proteins {
            if rng.gen_bool(cfg.ppi_rate) {
                files
                    .ppi
                    .push_str(&format!("P{:03}\tP{:03}\n", a + 1, b + 1));
            }
        }
    }
    for i in 0..cfg.drugs {
        let bits: String = (0..FINGERPRINT_BITS)
            .map(|_| {
                if rng.gen_bool(cfg.fingerprint_rate) {
                    '1'
                } else {
                    '0'
                }
            })
            .collect();
        files
            .fingerprints
            .push_str(&format!("{}\t{bits}\n", drug_id(i)));
        let len = rng.gen_range(4..10);
        let smiles: String = (0..len)
            .map(|_| FRAGMENTS[rng.gen_range(0..FRAGMENTS.len())])
            .collect();
        files
            .smiles
            .push_str(&format!("{}\t{smiles}\n", drug_id(i)));
    }
    for i in 0..cfg.drugs {
        for j in i + 1..cfg.drugs {
            if !targets[i].is_disjoint(&targets[j]) {
                files
                    .ddis
                    .push_str(&format!("{}\t{}\n", drug_id(i), drug_id(j)));
            }
        }
    }
    files
}

/// Random network with 1..=`max_per_kind` entities of each kind and random
/// relation densities. Interactions are left empty.
pub fn random_hin<R: Rng + ?Sized>(rng: &mut R, max_per_kind: usize) -> Result<Hin> {
    let mut registry = EntityRegistry::new();
    let mut counts = [0usize; 4];
    for (slot, kind) in counts.iter_mut().zip(EntityKind::ALL) {
        *slot = rng.gen_range(1..=max_per_kind);
        for k in 0..*slot {
            registry.insert(kind, &format!("{}{k}", kind.name()));
        }
    }
    let [drugs, proteins, side_effects, substructures] = counts;
    let random = |rows: usize, cols: usize, from: EntityKind, to: EntityKind, rng: &mut R| {
        let density = rng.gen_range(0.0..0.5);
        let pairs: Vec<(usize, usize)> = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .filter(|_| rng.gen_bool(density))
            .collect();
        RelationMatrix::new(from, to, rows, cols, pairs)
    };
    let t = random(drugs, proteins, EntityKind::Drug, EntityKind::Protein, rng)?;
    let c = random(
        drugs,
        side_effects,
        EntityKind::Drug,
        EntityKind::SideEffect,
        rng,
    )?;
    let h = random(
        drugs,
        substructures,
        EntityKind::Drug,
        EntityKind::Substructure,
        rng,
    )?;
    let p = random(
        proteins,
        proteins,
        EntityKind::Protein,
        EntityKind::Protein,
        rng,
    )?
    .symmetrized();
    Hin::new(registry, t, c, h, p, Vec::new())
}
