//! Grid sweeps over the legitimate link's average SNR and the run manifest
//! that replays them.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::output;
use super::CliError;
use crate::ftr::{sigma2_from_avg_snr, FtrParams, LinkBudget, Truncation};
use crate::monte_carlo::{mc_modified_sop, McConfig};
use crate::secrecy::{asop, conventional_sop, modified_sop, SecrecyConfig, SecrecyScenario};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Asymptotic,
    Conventional,
    Mc,
}

/// Small-scale shape of one link; its power is set by the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkShape {
    pub m: f64,
    pub k: f64,
    pub delta: f64,
}

impl LinkShape {
    /// Link in SNR units with average SNR `avg_snr_db`.
    pub fn at_avg_snr(&self, avg_snr_db: f64) -> crate::Result<FtrParams> {
        let p = FtrParams::new(self.m, self.k, self.delta, 1.0)?;
        let sigma2 = sigma2_from_avg_snr(avg_snr_db, LinkBudget::default(), &p);
        FtrParams::new(self.m, self.k, self.delta, sigma2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub d_link: LinkShape,
    pub e_link: LinkShape,
    pub gamma_bar_d_db: Vec<f64>,
    pub gamma_bar_e_db: f64,
    pub rs: f64,
    pub mu: f64,
    pub pt_over_n0_db: f64,
    pub methods: Vec<Method>,
    pub mc: Option<McConfig>,
    pub trunc: Truncation,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SweepRow {
    pub gamma_bar_d_db: f64,
    pub sop_exact: Option<f64>,
    pub sop_asymptotic: Option<f64>,
    pub sop_conventional: Option<f64>,
    pub sop_mc: Option<f64>,
    pub mc_std_error: Option<f64>,
    pub effective_samples: Option<u64>,
}

pub const ROW_COLUMNS: [&str; 7] = [
    "gamma_bar_d_db",
    "sop_exact",
    "sop_asymptotic",
    "sop_conventional",
    "sop_mc",
    "mc_std_error",
    "effective_samples",
];

impl SweepRow {
    fn fields(&self) -> Vec<String> {
        vec![
            output::real(self.gamma_bar_d_db),
            output::optional_real(self.sop_exact),
            output::optional_real(self.sop_asymptotic),
            output::optional_real(self.sop_conventional),
            output::optional_real(self.sop_mc),
            output::optional_real(self.mc_std_error),
            output::optional_count(self.effective_samples),
        ]
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.gamma_bar_d_db.is_empty() {
            return Err(CliError::Usage("the gamma_bar_d grid is empty".into()));
        }
        if let Some(x) = self.gamma_bar_d_db.iter().find(|x| !x.is_finite()) {
            return Err(CliError::Usage(format!("non-finite grid point {x}")));
        }
        if self.methods.is_empty() {
            return Err(CliError::Usage("no methods requested".into()));
        }
        if self.methods.contains(&Method::Mc) != self.mc.is_some() {
            return Err(CliError::Usage(
                "the mc method and an MC configuration go together".into(),
            ));
        }
        if let Some(mc) = &self.mc {
            mc.validate()?;
        }
        if !self.gamma_bar_e_db.is_finite() || !self.pt_over_n0_db.is_finite() {
            return Err(CliError::Usage("average SNRs must be finite".into()));
        }
        self.scenario(self.gamma_bar_d_db[0])?;
        Ok(())
    }

    fn budget(&self) -> crate::Result<LinkBudget> {
        LinkBudget::from_db(self.pt_over_n0_db)
    }

    pub fn scenario(&self, gamma_bar_d_db: f64) -> crate::Result<SecrecyScenario> {
        SecrecyScenario::new(
            self.d_link.at_avg_snr(gamma_bar_d_db)?,
            self.e_link.at_avg_snr(self.gamma_bar_e_db)?,
            SecrecyConfig::new(self.rs, self.mu)?,
            self.trunc,
        )
    }

    pub fn evaluate(&self, gamma_bar_d_db: f64) -> crate::Result<SweepRow> {
        let s = self.scenario(gamma_bar_d_db)?;
        let mut row = SweepRow {
            gamma_bar_d_db,
            ..Default::default()
        };
        for method in &self.methods {
            match method {
                Method::Exact => row.sop_exact = Some(modified_sop(&s)?),
                Method::Asymptotic => row.sop_asymptotic = Some(asop(&s)?),
                Method::Conventional => row.sop_conventional = Some(conventional_sop(&s)?),
                Method::Mc => {
                    let cfg = self.mc.as_ref().expect("validated");
                    let budget = self.budget()?;
                    let est = mc_modified_sop(&s, budget, budget, cfg)?;
                    row.sop_mc = Some(est.value);
                    row.mc_std_error = Some(est.std_error);
                    row.effective_samples = Some(est.effective_samples);
                }
            }
        }
        Ok(row)
    }

    /// Evaluates every grid point (in parallel) and returns the rows in grid
    /// order, stopping at the first failure.
    pub fn run(&self) -> (Vec<SweepRow>, Option<crate::Error>) {
        let results: Vec<crate::Result<SweepRow>> = self
            .gamma_bar_d_db
            .par_iter()
            .map(|&g| self.evaluate(g))
            .collect();
        let mut rows = Vec::with_capacity(results.len());
        for r in results {
            match r {
                Ok(row) => rows.push(row),
                Err(e) => return (rows, Some(e)),
            }
        }
        (rows, None)
    }
}

/// Everything needed to regenerate a CSV bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Prefix each row with the curve's `m,k,mu`.
    pub curve_columns: bool,
    pub sweeps: Vec<SweepSpec>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, curve_columns: bool, sweeps: Vec<SweepSpec>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.into(),
            curve_columns,
            sweeps,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.sweeps.is_empty() {
            return Err(CliError::Usage("manifest lists no sweeps".into()));
        }
        self.sweeps.iter().try_for_each(SweepSpec::validate)
    }

    /// Streams the CSV. Rows completed before a failure are written and
    /// flushed before the error is returned.
    pub fn execute<W: Write + ?Sized>(&self, out: &mut W) -> Result<(), CliError> {
        self.validate()?;
        let mut columns: Vec<&str> = Vec::new();
        if self.curve_columns {
            columns.extend(["m", "k", "mu"]);
        }
        columns.extend(ROW_COLUMNS);
        output::header(out, &columns)?;
        for spec in &self.sweeps {
            let (rows, failure) = spec.run();
            for row in rows {
                let mut fields = Vec::new();
                if self.curve_columns {
                    fields.extend([
                        output::real(spec.d_link.m),
                        output::real(spec.d_link.k),
                        output::real(spec.mu),
                    ]);
                }
                fields.extend(row.fields());
                output::record(out, &fields)?;
            }
            if let Some(e) = failure {
                out.flush()?;
                return Err(e.into());
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// `{0, 5, …, 45}` dB.
pub fn figure_grid() -> Vec<f64> {
    (0..10).map(|i| 5.0 * i as f64).collect()
}

fn figure_sweep(m: f64, k: f64, mu: f64, methods: Vec<Method>, mc: Option<McConfig>) -> SweepSpec {
    let shape = LinkShape { m, k, delta: 0.5 };
    SweepSpec {
        d_link: shape,
        e_link: shape,
        gamma_bar_d_db: figure_grid(),
        gamma_bar_e_db: 5.0,
        rs: 1.0,
        mu,
        pt_over_n0_db: 0.0,
        methods,
        mc,
        trunc: Truncation::default(),
    }
}

/// SOP against `γ̄_d` for three `(m, K)` pairs: exact, asymptotic and MC.
pub fn fig1(mc: McConfig) -> RunManifest {
    let sweeps = [(0.5, 5.0), (3.5, 15.0), (10.0, 15.0)]
        .into_iter()
        .map(|(m, k)| {
            figure_sweep(
                m,
                k,
                2.0,
                vec![Method::Exact, Method::Asymptotic, Method::Mc],
                Some(mc),
            )
        })
        .collect();
    RunManifest::new("reproduce fig1", true, sweeps)
}

/// Modified against conventional SOP for two reliability thresholds.
pub fn fig2() -> RunManifest {
    let sweeps = [0.5, 2.0]
        .into_iter()
        .map(|mu| {
            figure_sweep(
                3.5,
                15.0,
                mu,
                vec![Method::Exact, Method::Conventional],
                None,
            )
        })
        .collect();
    RunManifest::new("reproduce fig2", true, sweeps)
}
