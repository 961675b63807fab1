//! Shared setup for the benchmarks.

use std::collections::BTreeMap;

use langworld_core::corpus::{self, CorpusConfig};
use langworld_core::dcg::DEFAULT_REGULARIZATION;
use langworld_core::pipeline::{Models, SiteLog};
use langworld_core::{fixtures, ClassifierRegistry};

/// Models trained on the default corpus split, as the acceptance suite does.
pub fn trained_models(registry: &ClassifierRegistry) -> Models {
    let c = corpus::generate(&CorpusConfig::from_registry(registry, 7), registry)
        .expect("corpus generates");
    let (train, _) = corpus::split(&c, 0.8, 7).expect("corpus splits");
    corpus::train_models(&train, registry, DEFAULT_REGULARIZATION)
        .expect("models train")
        .0
}

pub fn sites(registry: &ClassifierRegistry) -> BTreeMap<String, SiteLog> {
    [fixtures::site1(), fixtures::site2()]
        .iter()
        .map(|spec| {
            let site = SiteLog::simulate(spec, registry).expect("fixture simulates");
            (site.name.clone(), site)
        })
        .collect()
}
