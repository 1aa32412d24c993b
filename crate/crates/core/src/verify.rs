//! End-to-end gradient check of the full model on a small planted network.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::hin::RegistryMode;
use crate::metapath::builtin_specs;
use crate::model::{HanModel, ModelConfig, ModelInputs, ModelParams, Variant, BCE_CLAMP};
use crate::pipeline::{build_hin, metapath_graphs};
use crate::rng::{stream_rng, Stream};
use crate::synth::{planted, PlantedConfig};
use crate::tensor::{finite_diff_check, FiniteDiffReport, Tape, Tensor};
use crate::train::{sample_negatives, LabeledPair};

#[cfg(feature = "fault-injection")]
use crate::tensor::AdjointFault;

pub const GRADCHECK_TOLERANCE: f64 = 1e-5;
pub const GRADCHECK_EPSILON: f64 = 1e-5;
pub const GRADCHECK_DRUGS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Fault {
    None,
    #[cfg(feature = "fault-injection")]
    Injected(AdjointFault),
}

/// Names accepted by the `fault` argument of [`gradcheck_synthetic`].
pub const FAULT_NAMES: [&str; 2] = ["leaky-relu-identity", "softmax-no-correction"];

fn parse_fault(name: Option<&str>) -> Result<Fault> {
    match name {
        None => Ok(Fault::None),
        #[cfg(feature = "fault-injection")]
        Some("leaky-relu-identity") => Ok(Fault::Injected(AdjointFault::LeakyReluIdentity)),
        #[cfg(feature = "fault-injection")]
        Some("softmax-no-correction") => Ok(Fault::Injected(AdjointFault::SoftmaxNoCorrection)),
        Some(other) if FAULT_NAMES.contains(&other) => Err(Error::Parameter(format!(
            "fault {other:?} needs a build with the fault-injection feature"
        ))),
        Some(other) => Err(Error::Parameter(format!(
            "unknown fault {other:?} ({})",
            FAULT_NAMES.join("|")
        ))),
    }
}

/// Checks every parameter tensor of a default-sized f64 model, with dropout
/// active, against central differences on the summed BCE over the planted
/// interactions and as many negatives. `probes` coordinates are sampled per
/// tensor; every evaluation replays the same dropout masks.
pub fn gradcheck_synthetic(
    seed: u64,
    probes: usize,
    epsilon: f64,
    fault: Option<&str>,
) -> Result<FiniteDiffReport> {
    #[cfg_attr(not(feature = "fault-injection"), allow(unused_variables))]
    let fault = parse_fault(fault)?;
    let files = planted(&PlantedConfig {
        drugs: GRADCHECK_DRUGS,
        proteins: 4,
        seed,
        ..PlantedConfig::default()
    });
    let (hin, fingerprints) = build_hin(&files.sources(true), RegistryMode::Discover)?;
    let features = fingerprints
        .expect("fingerprints were supplied")
        .feature_matrix(hin.drug_count())?;
    let graphs: Vec<_> = metapath_graphs(&hin, &builtin_specs(), 1)?
        .into_iter()
        .map(|(_, g)| g)
        .collect();
    let inputs = ModelInputs::<f64>::new(&features, &graphs)?;

    let mut cfg = ModelConfig::new(features.dim());
    cfg.seed = seed;
    let names: Vec<String> = graphs.iter().map(|g| g.name.clone()).collect();
    let metapaths = names.len();
    let mut model = HanModel::<f64>::new(cfg.clone(), names, Variant::Full, &graphs)?;

    let mut rng = stream_rng(seed, Stream::Probe);
    let mut pairs: Vec<LabeledPair> = hin
        .ddis()
        .iter()
        .map(|&(i, j)| LabeledPair::new(i, j, true))
        .collect();
    pairs.extend(sample_negatives(
        hin.drug_count(),
        hin.ddis(),
        pairs.len().max(1),
        &mut rng,
        &HashSet::new(),
    )?);
    let keys: Vec<(usize, usize)> = pairs.iter().map(|p| (p.i, p.j)).collect();
    let labels: Vec<f64> = pairs
        .iter()
        .map(|p| if p.label { 1.0 } else { 0.0 })
        .collect();

    let groups: Vec<(String, Tensor<f64>)> = model
        .params()
        .named()
        .into_iter()
        .map(|(n, t)| (n, t.clone()))
        .collect();
    let loss_and_grads = |params: &[Tensor<f64>]| -> Result<(f64, Vec<Tensor<f64>>)> {
        *model.params_mut() = ModelParams::from_tensors(&cfg, metapaths, params.to_vec())?;
        let mut tape = Tape::new();
        #[cfg(feature = "fault-injection")]
        if let Fault::Injected(f) = fault {
            tape.inject_fault(f);
        }
        let mut dropout = stream_rng(seed, Stream::Dropout);
        let fwd = model.record(&mut tape, &inputs, &keys, true, &mut dropout)?;
        let scores = fwd.scores.expect("pairs are non-empty");
        let loss = tape.bce(scores, &labels, BCE_CLAMP)?;
        let value = tape.value(loss).data()[0];
        let grads = tape.backward(loss)?;
        Ok((value, fwd.params.iter().map(|&p| grads.wrt(p)).collect()))
    };
    finite_diff_check(loss_and_grads, &groups, probes, epsilon, &mut rng)
}
