//! Shared test fixture: a balanced pair built cheaply, with α chosen so that
//! K(v_M) = 0 at M = 2 for a Gaussian pump.

use std::sync::OnceLock;

use crate::discretization::build_grid;
use crate::expansion::{build_expansion, ExpansionSet};
use crate::groundstate::FlowConfig;
use crate::linearized::{build_pair_with, LinearizedPair, PairConfig};
use crate::pumpbalance::{alpha_for_mass, PumpProfile};

pub fn balanced() -> &'static (LinearizedPair, ExpansionSet) {
    static F: OnceLock<(LinearizedPair, ExpansionSet)> = OnceLock::new();
    F.get_or_init(|| {
        let g = build_grid(128, 8.0).unwrap();
        let sigma = PumpProfile::gaussian(1.0, 1.5);
        let (alpha, gs) = alpha_for_mass(g, &sigma, 2.0, &FlowConfig::default()).unwrap();
        let cfg = PairConfig {
            hermite_order: None,
            ..PairConfig::default()
        };
        let pair = build_pair_with(&gs.field, gs.chem_potential, &cfg).unwrap();
        let set = build_expansion(&pair, &sigma, alpha).unwrap();
        (pair, set)
    })
}
