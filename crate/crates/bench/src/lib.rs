//! Fixtures shared by the design benchmarks.

use sisac::experiments::Scale;
use sisac::scenario::{build_scenario, Proximity, ScenarioFile};
use sisac::{Scenario, LiftedVariables};

/// Reference layout at the given scale, `gamma = 1`, first UE draw.
pub fn reference_scenario(scale: Scale) -> Scenario {
    let mut file = ScenarioFile::paper_layout(1);
    scale.apply(&mut file);
    file.set_gamma(1.0);
    let config = file.resolve(0, Proximity::Distant).expect("reference layout resolves");
    build_scenario(config).expect("reference layout is valid")
}

/// Full-rank variables to evaluate the Fisher information at.
pub fn sample_variables(scn: &Scenario) -> LiftedVariables {
    sisac::synth::random_lifted(7, scn).expect("dimensions match the scenario")
}
