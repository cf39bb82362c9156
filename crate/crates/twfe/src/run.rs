//! End-to-end execution of a [`RunConfig`].

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde_json::{json, Value};
use twfe_core::GapRange;

use crate::analysis;
use crate::config::{Format, RunConfig};
use crate::io::load_with_presample;
use crate::montecarlo::{self, MonteCarloSpec};
use crate::report::{self, AnalysisReport, Artifacts};
use crate::AppError;

#[derive(Debug)]
pub struct RunOutcome {
    pub analyses: Vec<AnalysisReport>,
    pub simulations: Vec<(String, montecarlo::MonteCarloReport)>,
    /// Serialized artifacts keyed by file name.
    pub files: BTreeMap<String, String>,
}

fn gap(pair: Option<[usize; 2]>) -> Option<GapRange> {
    pair.map(|[k_min, k_max]| GapRange { k_min, k_max })
}

/// Compute every analysis and simulation and serialize the results.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome, AppError> {
    cfg.validate()?;
    let analyses = match (&cfg.input, &cfg.schema) {
        (Some(input), Some(schema)) if !cfg.analyses.is_empty() => {
            let panel = load_with_presample(input, cfg.presample.as_ref(), schema)?;
            analysis::run_all(&panel, &cfg.analyses)?
        }
        _ => Vec::new(),
    };

    let mut artifacts = Artifacts::default();
    artifacts.add_analyses(&analyses, &cfg.formats)?;

    let mut simulations = Vec::new();
    for sim in &cfg.simulations {
        let spec = MonteCarloSpec {
            dgp: sim.dgp(cfg.seed)?,
            replications: sim.replications,
            covariates: sim.covariates.clone(),
            gaps: gap(sim.short_gap).zip(gap(sim.long_gap)),
        };
        let rep = montecarlo::run(&spec).map_err(|source| AppError::Simulation { name: sim.name.clone(), source })?;
        let mut params = BTreeMap::new();
        params.insert("scenario".to_string(), json!(sim.scenario));
        params.insert("replications".to_string(), json!(sim.replications));
        params.insert("seed".to_string(), json!(spec.dgp.seed));
        if cfg.formats.contains(&Format::Csv) {
            let body = montecarlo::replication_table(&rep).to_csv();
            artifacts.add(format!("{}_replications.csv", sim.name), body, &sim.name, "theorem2_audit", &params);
        }
        if cfg.formats.contains(&Format::Json) {
            let body: Value = json!({
                "simulation": sim.name,
                "operation": "theorem2_audit",
                "params": params,
                "config": rep.config,
                "covariates": rep.covariates,
                "summary": rep.summary,
            });
            artifacts.add(format!("{}.json", sim.name), report::pretty(&body)?, &sim.name, "theorem2_audit", &params);
        }
        simulations.push((sim.name.clone(), rep));
    }
    Ok(RunOutcome { analyses, simulations, files: artifacts.finish()? })
}

/// Execute and write artifacts to the configured output directory.
pub fn run(cfg: &RunConfig) -> Result<(RunOutcome, Vec<PathBuf>), AppError> {
    let outcome = execute(cfg)?;
    let written = report::write_all(&cfg.output_dir, &outcome.files)?;
    Ok((outcome, written))
}
