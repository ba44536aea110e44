//! `check-theory`: contraction constants plus an empirical certificate.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vite_core::theory::{certify_on_quadratic, min_m_for_contraction, ContractionCertificate, QuadraticFixture};
use vite_core::{Error as CoreError, TheoryConstants};

use crate::error::{config_err, HarnessError, Result};

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

/// `{ "mu": 1, "l": 1, "eta": 0.1, "m": 50 }`; `gamma`/`rho` default to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryFile {
    pub mu: f64,
    pub l: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub rho: f64,
    pub eta: f64,
    pub m: usize,
    /// Contraction target for the reported minimal `m`.
    #[serde(default = "half")]
    pub target_alpha: f64,
    #[serde(default)]
    pub fixture: QuadraticFixture,
}

impl TheoryFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| config_err(format!("invalid theory file {}: {e}", path.display())))
    }

    pub fn constants(&self) -> Result<TheoryConstants> {
        Ok(TheoryConstants::new(self.mu, self.l, self.gamma, self.rho, self.eta, self.m)?)
    }
}

#[derive(Debug, Clone)]
pub struct TheoryOutcome {
    pub text: String,
    pub certificate: ContractionCertificate,
}

fn theory_err(e: CoreError) -> HarnessError {
    match e {
        CoreError::StepPrecondition { .. } | CoreError::CertificateRefused(_) => HarnessError::Theory(e.to_string()),
        other => HarnessError::from(other),
    }
}

/// Evaluates the constants and certifies them on the fixture quadratic.
///
/// Precondition violations (inadmissible step, `alpha >= 1`) are
/// [`HarnessError::Theory`]; a failed certificate is returned as an outcome.
pub fn check_theory(file: &TheoryFile) -> Result<TheoryOutcome> {
    let c = file.constants()?;
    let mut text = String::new();
    writeln!(text, "step limit mu'/(2 L'^2) = {}", c.step_limit()).unwrap();
    let beta = c.beta().map_err(theory_err)?;
    writeln!(text, "beta = {beta}").unwrap();
    let alpha = c.alpha().map_err(theory_err)?;
    writeln!(text, "alpha = {alpha}").unwrap();
    match min_m_for_contraction(c.eta, c.mu_prime(), c.l_prime(), file.target_alpha) {
        Ok(m) => writeln!(text, "smallest m with alpha <= {}: {m}", file.target_alpha).unwrap(),
        Err(e) => writeln!(text, "smallest m with alpha <= {}: none ({e})", file.target_alpha).unwrap(),
    }
    c.check_preconditions().map_err(theory_err)?;
    let certificate = certify_on_quadratic(c, &file.fixture, false).map_err(theory_err)?;
    text.push_str(&certificate.report());
    Ok(TheoryOutcome { text, certificate })
}
