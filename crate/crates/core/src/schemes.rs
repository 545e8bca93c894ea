//! Baseline transmission schemes realized as restrictions of the full
//! cooperative rate-splitting machinery.
//!
//! - NRS pins `theta = 1` (the relay slot vanishes).
//! - MU-LP additionally drops the common stream; only the private secrecy
//!   terms and their four sign patterns remain.
//! - C-NOMA keeps the relay but encodes user 2's entire message on the
//!   common stream (`p_2 = 0`): user 2's secrecy is the common secrecy
//!   term, user 1 keeps a private stream, and only user 1's sign pattern
//!   splits cases.
//!
//! Because each restricted feasible set embeds into the CRS feasible set,
//! warm-starting CRS from a baseline solution makes the nesting
//! `SSR(CRS) >= SSR(baseline)` hold run by run, not just in expectation.

use serde::{Deserialize, Serialize};

use crate::cases::{iterate_from_design, CaseId, ScaIterate, SchemeShape};
use crate::channel::{ChannelSet, PowerBudget};
use crate::error::{Error, Result};
use crate::sca::{matching_case, solve_cases_shaped, ScaConfig, Solution, WarmStart};

/// Transmission scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeId {
    Crs,
    Nrs,
    Mulp,
    Cnoma,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [SchemeId::Crs, SchemeId::Nrs, SchemeId::Mulp, SchemeId::Cnoma];

    pub fn label(self) -> &'static str {
        match self {
            SchemeId::Crs => "crs",
            SchemeId::Nrs => "nrs",
            SchemeId::Mulp => "mulp",
            SchemeId::Cnoma => "cnoma",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "crs" => Ok(SchemeId::Crs),
            "nrs" => Ok(SchemeId::Nrs),
            "mulp" | "mu-lp" => Ok(SchemeId::Mulp),
            "cnoma" | "c-noma" => Ok(SchemeId::Cnoma),
            other => Err(Error::Parse(format!(
                "unknown scheme `{other}` (expected one of: crs, nrs, mulp, cnoma)"
            ))),
        }
    }

    pub fn shape(self) -> SchemeShape {
        match self {
            SchemeId::Crs => SchemeShape::crs(),
            SchemeId::Nrs => SchemeShape::nrs(),
            SchemeId::Mulp => SchemeShape::mulp(),
            SchemeId::Cnoma => SchemeShape::cnoma(),
        }
    }

    /// The sign-pattern cases a scheme dispatches over. C-NOMA has no
    /// second private stream, so only user 1's pattern splits.
    pub fn cases(self) -> &'static [CaseId] {
        match self {
            SchemeId::Cnoma => &[CaseId::Case1, CaseId::Case3],
            _ => &CaseId::ALL,
        }
    }
}

impl std::fmt::Display for SchemeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Solves one scheme on one channel (CRS without warm starts).
pub fn solve_scheme(
    s: SchemeId,
    cs: &ChannelSet,
    pb: &PowerBudget,
    cfg: &ScaConfig,
) -> Solution {
    solve_scheme_warm(s, cs, pb, cfg, &[])
}

/// Solves one scheme, warm-starting CRS from previously solved baselines
/// (ignored for the baselines themselves).
pub fn solve_scheme_warm(
    s: SchemeId,
    cs: &ChannelSet,
    pb: &PowerBudget,
    cfg: &ScaConfig,
    baselines: &[&Solution],
) -> Solution {
    let warm: Vec<WarmStart> = if s == SchemeId::Crs {
        baselines
            .iter()
            .map(|sol| {
                let it = map_to_crs_iterate(sol.scheme, sol, cs, pb);
                WarmStart {
                    case: matching_case(SchemeShape::crs(), &it.design, cs, pb),
                    design: it.design,
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    solve_cases_shaped(s.shape(), s, s.cases(), cs, pb, cfg, &warm)
}

/// Embeds a restricted scheme's solution into the full CRS variable
/// space: dropped precoder columns come back as zeros, `theta` keeps its
/// pinned value, and the auxiliaries are recomputed by equality from the
/// true rates.
pub fn map_to_crs_iterate(
    s: SchemeId,
    sol: &Solution,
    cs: &ChannelSet,
    pb: &PowerBudget,
) -> ScaIterate {
    debug_assert_eq!(s, sol.scheme);
    let design = sol.design().clone();
    let case = matching_case(SchemeShape::crs(), &design, cs, pb);
    iterate_from_design(SchemeShape::crs(), case, &design, cs, pb, 0.0)
}
