//! Stages of a run and the artifacts each one writes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gp_pump_core::contraction::{scaling_study, solve_error_terms, SolitaryWave};
use gp_pump_core::discretization::{
    build_grid, dense_eigenpairs, h0_rep, lowest_eigenpairs, phi1_reference, ComplexField, Grid, HermiteBasis,
    OperatorRep, SchrodingerOperator,
};
use gp_pump_core::evolve::{
    bounds_check, evolve_run, gaussian_data, law_checks, self_convergence, stationarity_check, EvolutionConfig,
};
use gp_pump_core::expansion::{build_expansion, ExpansionSet};
use gp_pump_core::groundstate::{minimize_vm, mu_curve, GroundState};
use gp_pump_core::linearized::{build_pair_with, LinearizedPair, PairConfig};
use gp_pump_core::pumpbalance::{find_balanced_mass, k_scan, BalancePoint};
use gp_pump_core::snapshot::{read_snapshot, write_snapshot, Snapshot};
use serde::Serialize;
use serde_json::json;

use crate::config::{InitialData, Settings, Stage};
use crate::error::CliError;

pub struct Pipeline {
    pub settings: Settings,
    grid: Arc<Grid>,
    dir: PathBuf,
    balance: Option<BalancePoint>,
    pair: Option<LinearizedPair>,
    set: Option<ExpansionSet>,
    wave: Option<SolitaryWave>,
    pub derived: BTreeMap<String, Option<f64>>,
    pub files: Vec<String>,
}

impl Pipeline {
    /// Validates the settings and creates the run directory.
    pub fn new(settings: Settings) -> Result<Self, CliError> {
        let grid = build_grid(settings.grid.n, settings.grid.extent)?;
        if settings.evolve.init == InitialData::Snapshot {
            match &settings.evolve.snapshot {
                None => return Err(CliError::Usage("evolve.init = snapshot needs evolve.snapshot".into())),
                Some(p) if !p.exists() => {
                    return Err(CliError::Usage(format!("snapshot {} does not exist", p.display())))
                }
                _ => {}
            }
        }
        fs::create_dir_all(&settings.out)?;
        Ok(Self {
            dir: settings.out.clone(),
            settings,
            grid,
            balance: None,
            pair: None,
            set: None,
            wave: None,
            derived: BTreeMap::new(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(name), text)?;
        self.record(name);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write_text(name, &text)
    }

    fn write_field(&mut self, name: &str, s: Snapshot) -> Result<(), CliError> {
        write_snapshot(self.dir.join(name), &s)?;
        self.record(name);
        Ok(())
    }

    fn derive(&mut self, key: &str, value: f64) {
        self.derived.insert(key.to_string(), Some(value).filter(|v| v.is_finite()));
    }

    pub fn run_stage(&mut self, stage: Stage) -> Result<(), CliError> {
        log::info!("stage {}", stage.name());
        match stage {
            Stage::LinearCheck => self.linear_check(),
            Stage::Groundstate => self.groundstate(),
            Stage::Balance => self.balance().map(|_| ()),
            Stage::Spectrum => self.spectrum(),
            Stage::Expand => self.expansion().map(|_| ()),
            Stage::Solitary => self.solitary().map(|_| ()),
            Stage::Sweep => self.sweep(),
            Stage::Evolve => self.evolve(),
            Stage::Report => Ok(()),
        }
    }

    fn linear_check(&mut self) -> Result<(), CliError> {
        let exact = [2.0, 4.0, 4.0];
        let (rep, basis) = match self.settings.linear.hermite_order {
            Some(k) => {
                let b = Arc::new(HermiteBasis::new(self.grid.clone(), k)?);
                (h0_rep(b)?, true)
            }
            None => (OperatorRep::grid_only(SchrodingerOperator::h0(self.grid.clone())), false),
        };
        let pairs = lowest_eigenpairs(&rep, exact.len())?;
        let dense = if basis { Some(dense_eigenpairs(&rep, exact.len())?) } else { None };
        let mut csv = String::from("index,value,exact,residual,dense_value\n");
        for (i, p) in pairs.iter().enumerate() {
            let d = dense.as_ref().map(|d| format!("{:.17e}", d[i].value)).unwrap_or_default();
            writeln!(csv, "{i},{:.17e},{},{:.3e},{d}", p.value, exact[i], p.residual).unwrap();
        }
        let phi = phi1_reference(self.grid.clone());
        let v = &pairs[0].vector;
        let dist = v.axpy(-1.0, &phi).l2_norm().min(v.axpy(1.0, &phi).l2_norm());
        let rel = (pairs[0].value - 2.0).abs() / 2.0;
        self.write_text("h0_spectrum.csv", &csv)?;
        self.write_json(
            "linear_check.json",
            &json!({ "lambda_min": pairs[0].value, "relative_error": rel, "phi1_distance": dist }),
        )?;
        self.derive("h0_lambda_min", pairs[0].value);
        self.derive("h0_phi1_distance", dist);
        Ok(())
    }

    fn groundstate(&mut self) -> Result<(), CliError> {
        let flow = self.settings.flow();
        let gs = minimize_vm(self.grid.clone(), self.settings.groundstate.mass, &flow)?;
        self.write_json("groundstate.json", &ground_json(&gs))?;
        self.write_field("v_M.gpf", Snapshot::Real(gs.field.clone()))?;
        self.derive("groundstate_chem_potential", gs.chem_potential);
        self.derive("groundstate_energy", gs.energy);
        let masses = self.settings.groundstate.masses.clone();
        if !masses.is_empty() {
            let curve = mu_curve(self.grid.clone(), &masses, &flow)?;
            let mut csv = String::from(GroundState::CSV_HEADER);
            csv.push('\n');
            for s in &curve.states {
                csv.push_str(&s.csv_row());
                csv.push('\n');
            }
            self.write_text("mu_curve.csv", &csv)?;
        }
        Ok(())
    }

    fn balance(&mut self) -> Result<&BalancePoint, CliError> {
        if self.balance.is_none() {
            let s = &self.settings;
            let [lo, hi] = s.balance.bracket;
            let bp = find_balanced_mass(self.grid.clone(), &s.model.pump, s.model.alpha, (lo, hi), &s.balance_config())?;
            let scan = s.balance.scan.clone();
            if !scan.is_empty() {
                let rows = k_scan(self.grid.clone(), &s.model.pump, s.model.alpha, &scan, &s.flow())?;
                let mut csv = String::from("M,K\n");
                for (m, k) in rows {
                    writeln!(csv, "{m},{k:.17e}").unwrap();
                }
                self.write_text("k_scan.csv", &csv)?;
            }
            self.write_json(
                "balance.json",
                &json!({
                    "m_star": bp.m_star,
                    "mu0": bp.mu0,
                    "alpha": bp.alpha,
                    "sigma": bp.sigma,
                    "k_residual": bp.k_residual,
                    "k_scale": bp.k_scale,
                    "k_relative": bp.k_residual / bp.k_scale,
                    "steps": bp.bisection_steps,
                    "probes": bp.probes,
                    "ground_residual": bp.ground.residual,
                }),
            )?;
            self.write_field("q0.gpf", Snapshot::Real(bp.q0.clone()))?;
            self.derive("m_star", bp.m_star);
            self.derive("mu0", bp.mu0);
            self.derive("k_relative", bp.k_residual / bp.k_scale);
            self.balance = Some(bp);
        }
        Ok(self.balance.as_ref().expect("set above"))
    }

    fn pair(&mut self) -> Result<&LinearizedPair, CliError> {
        if self.pair.is_none() {
            let cfg = PairConfig {
                hermite_order: self.settings.linear.hermite_order,
                ..PairConfig::default()
            };
            let bp = self.balance()?;
            let pair = build_pair_with(&bp.q0, bp.mu0, &cfg)?;
            self.pair = Some(pair);
        }
        Ok(self.pair.as_ref().expect("set above"))
    }

    fn spectrum(&mut self) -> Result<(), CliError> {
        let k = self.settings.linear.eigenpairs.max(1);
        let pair = self.pair()?;
        let lm = lowest_eigenpairs(&pair.lminus, k)?;
        let lp = lowest_eigenpairs(&pair.lplus, k)?;
        let info = json!({
            "lminus_lambda_min": pair.lminus_lambda_min,
            "lminus_lambda_2": pair.lminus_lambda_2,
            "lplus_lambda_min": pair.lplus_lambda_min,
            "kernel_overlap": pair.kernel_overlap,
            "kernel_tol": pair.kernel_tol,
            "dense_lambda": pair.dense_lambda,
        });
        let (lmin, overlap) = (pair.lminus_lambda_min, pair.kernel_overlap);
        let mut csv = String::from("index,lminus,lplus\n");
        for (i, (a, b)) in lm.iter().zip(&lp).enumerate() {
            writeln!(csv, "{i},{:.17e},{:.17e}", a.value, b.value).unwrap();
        }
        self.write_text("spectrum.csv", &csv)?;
        self.write_json("spectrum.json", &info)?;
        self.derive("lminus_lambda_min", lmin);
        self.derive("kernel_overlap", overlap);
        Ok(())
    }

    fn expansion(&mut self) -> Result<&ExpansionSet, CliError> {
        if self.set.is_none() {
            let (pump, alpha) = (self.settings.model.pump, self.settings.model.alpha);
            let set = build_expansion(self.pair()?, &pump, alpha)?;
            self.write_json(
                "expansion.json",
                &json!({
                    "mu0": set.mu0,
                    "mu2": set.mu2,
                    "alpha": set.alpha,
                    "g1_norm": set.g1.l2_norm(),
                    "phi2_norm": set.phi2.l2_norm(),
                    "diagnostics": set.diagnostics,
                }),
            )?;
            self.write_field("q1i.gpf", Snapshot::Real(set.q1i.clone()))?;
            self.write_field("q2r.gpf", Snapshot::Real(set.q2r.clone()))?;
            self.write_field("q3i.gpf", Snapshot::Real(set.q3i.clone()))?;
            self.derive("mu2", set.mu2);
            self.set = Some(set);
        }
        Ok(self.set.as_ref().expect("set above"))
    }

    fn solitary(&mut self) -> Result<&SolitaryWave, CliError> {
        if self.wave.is_none() {
            self.expansion()?;
            let (eps, cfg) = (self.settings.model.eps, self.settings.contraction_config());
            let (set, pair) = (self.set.as_ref().expect("built"), self.pair.as_ref().expect("built"));
            let wave = solve_error_terms(set, pair, eps, &cfg)?;
            let summary = wave.summary();
            if summary.extrapolated {
                eprintln!("note: eps = {eps} exceeds {} and the solitary wave is labelled extrapolated", cfg.eps_max);
            }
            self.write_json("solitary.json", &summary)?;
            self.write_field("solitary.gpf", Snapshot::Complex(wave.q.clone()))?;
            self.derive("mu_eps", wave.mu);
            self.derive("solitary_residual", wave.residual);
            self.derive("contraction_ratio", wave.contraction_ratio);
            self.wave = Some(wave);
        }
        Ok(self.wave.as_ref().expect("set above"))
    }

    fn sweep(&mut self) -> Result<(), CliError> {
        self.expansion()?;
        let cfg = self.settings.contraction_config();
        let eps = self.settings.sweep.eps.clone();
        let (set, pair) = (self.set.as_ref().expect("built"), self.pair.as_ref().expect("built"));
        let study = scaling_study(set, pair, &eps, &cfg)?;
        self.write_text("scaling.csv", &study.to_csv())?;
        self.write_json("scaling.json", &json!({ "slopes": study.slopes, "excluded": study.excluded }))?;
        for (name, v) in ["slope_kappa", "slope_psi_r", "slope_psi_i", "slope_residual"].iter().zip(study.slopes) {
            self.derive(name, v);
        }
        Ok(())
    }

    fn evolve(&mut self) -> Result<(), CliError> {
        let s = self.settings.clone();
        let e = &s.evolve;
        let psi0: ComplexField = match e.init {
            InitialData::Gaussian => gaussian_data(self.grid.clone(), e.mass, e.center),
            InitialData::Solitary => self.solitary()?.q.clone(),
            InitialData::Snapshot => {
                let path = e.snapshot.as_ref().expect("checked in new");
                read_snapshot(path, Some(&self.grid))?.into_complex()
            }
        };
        let cfg = EvolutionConfig {
            snapshot_stride: e.snapshot_stride,
            position: e.position,
            ..EvolutionConfig::new(e.dt, e.t_final, s.model.eps, s.model.pump, s.model.alpha)
        };
        let traj = evolve_run(&psi0, &cfg)?;
        let laws = law_checks(&traj)?;
        let bounds = bounds_check(&traj);
        let stationarity = match (&self.wave, e.init) {
            (Some(w), InitialData::Solitary) => Some(stationarity_check(w, &cfg)?),
            _ => None,
        };
        let convergence = if e.self_convergence {
            Some(self_convergence(&psi0, &cfg, &[2.0 * e.dt, e.dt])?)
        } else {
            None
        };
        self.write_text("trajectory.csv", &traj.to_csv())?;
        for (i, (t, f)) in traj.snapshots.iter().enumerate() {
            log::debug!("snapshot {i} at t = {t}");
            self.write_field(&format!("snap_{i:05}.gpf"), Snapshot::Complex(f.clone()))?;
        }
        self.write_field("final.gpf", Snapshot::Complex(traj.final_field.clone()))?;
        self.write_json(
            "evolve.json",
            &json!({
                "config": cfg,
                "laws": laws,
                "bounds": bounds,
                "stationarity": stationarity,
                "convergence": convergence,
            }),
        )?;
        self.derive("mass_final", traj.samples.last().expect("samples").mass);
        self.derive("mass_law_doubled", laws.mass_law_doubled);
        self.derive("hamiltonian_full", laws.hamiltonian_full);
        if let Some(st) = stationarity {
            self.derive("modulus_drift", st.modulus_drift);
        }
        Ok(())
    }
}

fn ground_json(gs: &GroundState) -> serde_json::Value {
    json!({
        "mass": gs.mass,
        "energy": gs.energy,
        "chem_potential": gs.chem_potential,
        "l4fourth": gs.l4fourth(),
        "residual": gs.residual,
        "iterations": gs.iterations,
        "newton_steps": gs.newton_steps,
        "min_value": gs.min_value,
        "symmetry_defect": gs.symmetry_defect,
        "boundary_decay": gs.boundary_decay,
        "tiny_mass": gs.tiny_mass,
    })
}
