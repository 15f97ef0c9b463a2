//! The dynamic programming principle: table classification, numeric
//! verification on instances, counterexample fixtures and gap witnesses.

mod fixtures;
mod tables;
mod witness;

pub use fixtures::{fixture, markov_adversary_grid, mixed_kernel, Fixture, FixtureId, Witness, ALPHA_GRID, UNIT_RESCALE};
pub use tables::{classification_tables, render_tables_text, ClassificationTable, TableCell};
pub use witness::{decision_states, default_witness_family, search_gap, WitnessFamilyOptions};

use crate::bellman::{check_interchange, solve_supinf, BellmanError, NumericVerdict, Structural};
use crate::model::{ModelError, Rectangularity, RobustMdp};
use crate::policy::{robust_evaluate_with, AdversaryClass, FiniteMemoryPolicy, PolicyError, RobustOptions};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DppError {
    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("profile does not match the model: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Bellman(#[from] BellmanError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Information available to a player, from most to least.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoClass {
    History,
    Markov,
    Stationary,
}

impl InfoClass {
    pub const ALL: [InfoClass; 3] = [InfoClass::History, InfoClass::Markov, InfoClass::Stationary];

    pub fn label(self) -> &'static str {
        match self {
            InfoClass::History => "History",
            InfoClass::Markov => "Markov",
            InfoClass::Stationary => "Stationary",
        }
    }
}

impl std::str::FromStr for InfoClass {
    type Err = DppError;

    fn from_str(s: &str) -> Result<Self, DppError> {
        match s.to_ascii_lowercase().as_str() {
            "history" | "h" => Ok(InfoClass::History),
            "markov" | "m" => Ok(InfoClass::Markov),
            "stationary" | "s" | "time-homogeneous" => Ok(InfoClass::Stationary),
            _ => Err(DppError::Invalid(format!("unknown information class {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileRect {
    Sa,
    S,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeProfile {
    pub controller_info: InfoClass,
    pub adversary_info: InfoClass,
    pub rectangularity: ProfileRect,
    pub controller_convex: bool,
    pub adversary_convex: bool,
}

impl AttributeProfile {
    /// The profile implied by a model's sets, with the given information classes.
    pub fn from_model(model: &RobustMdp, controller_info: InfoClass, adversary_info: InfoClass) -> Result<Self, DppError> {
        let rectangularity = match model.ambiguity.rectangularity() {
            Rectangularity::Sa => ProfileRect::Sa,
            Rectangularity::S => ProfileRect::S,
            Rectangularity::General => {
                return Err(DppError::Invalid("general rectangularity has no classification".into()))
            }
        };
        Ok(AttributeProfile {
            controller_info,
            adversary_info,
            rectangularity,
            controller_convex: model.controller.is_convex(),
            adversary_convex: model.ambiguity.all_convex(),
        })
    }

    /// The adversary knows at least as much as the controller.
    pub fn adversary_informed(&self) -> bool {
        self.adversary_info <= self.controller_info
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Holds,
    Fails,
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "HOLDS",
            Verdict::Fails => "FAILS",
            Verdict::Unknown => "UNKNOWN",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    TableCitation,
    NumericCertificate,
    GapWitness,
}

/// A witness whose worst-case value beats the Bellman value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertifiedWitness {
    pub name: String,
    #[serde(skip)]
    pub policy: FiniteMemoryPolicy,
    /// Worst-case value found (stored reward scale).
    pub value: f64,
    /// Certified lower bound on the worst-case value.
    pub lower_bound: f64,
    /// `value - E_mu[u*]`.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DppReport {
    pub verdict: Verdict,
    pub basis: Basis,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structural: Option<Structural>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<CertifiedWitness>,
    pub citations: Vec<String>,
}

pub mod citation {
    pub const LOWER_TRIANGLE: &str =
        "adversary at least as informed as the controller: interchange holds for every rectangular set";
    pub const CONVEX_VS_MARKOV: &str =
        "convex controller set against a Markov adversary: history-dependent controllers gain nothing";
    pub const SA: &str = "SA-rectangular adversary: the q-function Bellman equation gives the DPP for all nine classes";
    pub const MINIMAX: &str = "convex controller and adversary sets: sup-inf equals inf-sup (minimax theorem)";
    pub const EX_5_1: &str = "counterexample EX_5_1: learn-then-commit controller beats a time-homogeneous adversary";
    pub const EX_5_2: &str = "counterexample EX_5_2: Markov schedule beats a time-homogeneous adversary";
    pub const EX_5_3: &str =
        "counterexample EX_5_3: deterministic controllers exploit Markov and time-homogeneous adversaries";
}

fn cell_anchor(table: u8, profile: &AttributeProfile) -> String {
    format!("table {table} ({}, {})", profile.controller_info.label(), profile.adversary_info.label())
}

/// Which of the four classification tables covers a profile.
pub fn table_of(profile: &AttributeProfile) -> u8 {
    match (profile.rectangularity, profile.controller_convex, profile.adversary_convex) {
        (ProfileRect::Sa, _, _) => 1,
        (ProfileRect::S, true, true) => 2,
        (ProfileRect::S, true, false) => 3,
        (ProfileRect::S, false, _) => 4,
    }
}

/// The tabulated verdict for an attribute profile.
pub fn classify(profile: &AttributeProfile) -> DppReport {
    use InfoClass::*;
    let table = table_of(profile);
    let mut citations = vec![cell_anchor(table, profile)];
    let informed = profile.adversary_informed();
    let verdict = match table {
        1 => {
            citations.push(citation::SA.into());
            Verdict::Holds
        }
        2 => {
            citations.push(citation::MINIMAX.into());
            Verdict::Holds
        }
        _ if informed => {
            citations.push(citation::LOWER_TRIANGLE.into());
            Verdict::Holds
        }
        3 => match (profile.controller_info, profile.adversary_info) {
            (History, Markov) => {
                citations.push(citation::CONVEX_VS_MARKOV.into());
                Verdict::Holds
            }
            (History, Stationary) => {
                citations.push(citation::EX_5_1.into());
                Verdict::Fails
            }
            _ => {
                citations.push(citation::EX_5_2.into());
                Verdict::Fails
            }
        },
        _ => {
            citations.push(citation::EX_5_3.into());
            Verdict::Fails
        }
    };
    DppReport { verdict, basis: Basis::TableCitation, gap: None, structural: None, witness: None, citations }
}

/// Result of comparing witnesses against the Bellman value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapCertificate {
    pub best: CertifiedWitness,
    /// `E_mu[u*]` from the sup-inf solver.
    pub baseline: f64,
    /// `best.value - baseline`.
    pub margin: f64,
    /// `best.lower_bound - baseline - tol`; positive certifies a DPP failure.
    pub certified_margin: f64,
}

/// Robustly evaluates every witness and keeps the largest margin over `E_mu[u*]`.
pub fn certify_gap(model: &RobustMdp, witnesses: &[Witness], mu: &[f64], tol: f64) -> Result<GapCertificate, DppError> {
    certify_gap_with(model, witnesses, mu, RobustOptions::new(tol))
}

pub fn certify_gap_with(
    model: &RobustMdp,
    witnesses: &[Witness],
    mu: &[f64],
    opts: RobustOptions,
) -> Result<GapCertificate, DppError> {
    if witnesses.is_empty() {
        return Err(DppError::Invalid("no witnesses given".into()));
    }
    let u = solve_supinf(model, opts.tol)?.fixed_point;
    let baseline = u.expect(mu);
    let mut best: Option<CertifiedWitness> = None;
    for w in witnesses {
        w.policy.check_dims(model)?;
        let r = robust_evaluate_with(model, &w.policy, mu, opts)?;
        let better = best.as_ref().is_none_or(|b| r.lower_bound > b.lower_bound);
        if better {
            best = Some(CertifiedWitness {
                name: w.name.clone(),
                policy: w.policy.clone(),
                value: r.value,
                lower_bound: r.lower_bound,
                margin: r.value - baseline,
            });
        }
    }
    let best = best.expect("non-empty witnesses");
    Ok(GapCertificate {
        margin: best.value - baseline,
        certified_margin: best.lower_bound - baseline - opts.tol,
        baseline,
        best,
    })
}

/// Whether a finite-memory policy belongs to an information class.
pub fn fits_class(policy: &FiniteMemoryPolicy, class: InfoClass) -> bool {
    match class {
        InfoClass::History => true,
        InfoClass::Markov => policy.is_markov(),
        InfoClass::Stationary => policy.is_stationary(),
    }
}

/// Solves both Bellman equations; when they may disagree, tries the witnesses.
/// `None` searches the default family. Witnesses must fit the profile's
/// controller class and face adversaries of its adversary class.
pub fn verify_numeric(
    model: &RobustMdp,
    profile: &AttributeProfile,
    tol: f64,
    witnesses: Option<&[Witness]>,
    mu: &[f64],
) -> Result<DppReport, DppError> {
    let implied = AttributeProfile::from_model(model, profile.controller_info, profile.adversary_info)?;
    if implied != *profile {
        return Err(DppError::Inconsistent(format!(
            "model implies rectangularity {:?}, convex controller {}, convex adversary {}",
            implied.rectangularity, implied.controller_convex, implied.adversary_convex
        )));
    }
    let citations = classify(profile).citations;
    let ic = check_interchange(model, tol)?;
    if ic.structural.is_guaranteed() || ic.numeric == NumericVerdict::Interchanges {
        return Ok(DppReport {
            verdict: Verdict::Holds,
            basis: Basis::NumericCertificate,
            gap: Some(ic.gap),
            structural: Some(ic.structural),
            witness: None,
            citations,
        });
    }
    let class = match profile.adversary_info {
        InfoClass::Stationary => AdversaryClass::Stationary,
        InfoClass::Markov => AdversaryClass::Markov,
        InfoClass::History => AdversaryClass::HistoryObserving,
    };
    let opts = RobustOptions::new(tol).with_class(class);
    let cert = match witnesses {
        Some([]) => None,
        Some(ws) => {
            for w in ws {
                w.policy.check_controller_set(model)?;
                if !fits_class(&w.policy, profile.controller_info) {
                    return Err(DppError::Invalid(format!(
                        "witness {} uses more information than a {} controller",
                        w.name,
                        profile.controller_info.label()
                    )));
                }
            }
            Some(certify_gap_with(model, ws, mu, opts)?)
        }
        None => {
            let fam_opts = WitnessFamilyOptions::default();
            let mut family = default_witness_family(model, fam_opts)?;
            family.retain(|w| fits_class(&w.policy, profile.controller_info));
            Some(search_gap(model, &family, mu, opts, fam_opts.recertify)?)
        }
    };
    if let Some(cert) = cert {
        if cert.certified_margin > 0.0 {
            return Ok(DppReport {
                verdict: Verdict::Fails,
                basis: Basis::GapWitness,
                gap: Some(ic.gap),
                structural: Some(ic.structural),
                witness: Some(cert.best),
                citations,
            });
        }
    }
    Ok(DppReport {
        verdict: Verdict::Unknown,
        basis: Basis::NumericCertificate,
        gap: Some(ic.gap),
        structural: Some(ic.structural),
        witness: None,
        citations,
    })
}
