use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::RegimePalette;
use crate::paired::PairedState;

/// Definition of a "signal" site in terms of the joint latent state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signal {
    /// The groups are split (`z = 0`).
    Split,
    /// The groups are in regimes with different means.
    MeanDiff,
    /// The groups are in different regimes.
    RegimeDiff,
    /// Case mean below control mean.
    Hypo,
    /// Case mean above control mean.
    Hyper,
    /// Case regime more variable than the control regime.
    VarUp,
    /// Case regime less variable than the control regime.
    VarDown,
}

impl Signal {
    pub const ALL: [Signal; 7] = [
        Signal::Split,
        Signal::MeanDiff,
        Signal::RegimeDiff,
        Signal::Hypo,
        Signal::Hyper,
        Signal::VarUp,
        Signal::VarDown,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Signal::Split => "split",
            Signal::MeanDiff => "mean-diff",
            Signal::RegimeDiff => "regime-diff",
            Signal::Hypo => "hypo",
            Signal::Hyper => "hyper",
            Signal::VarUp => "var-up",
            Signal::VarDown => "var-down",
        }
    }

    /// Signal indicator from the merge flag and the two zero-based regimes.
    #[inline]
    pub fn eval_regimes(&self, merged: bool, control: usize, case: usize, palette: &RegimePalette) -> bool {
        let (c, k) = (palette.get(control), palette.get(case));
        match self {
            Signal::Split => !merged,
            Signal::RegimeDiff => control != case,
            Signal::MeanDiff => c.mean != k.mean,
            Signal::Hypo => k.mean < c.mean,
            Signal::Hyper => k.mean > c.mean,
            Signal::VarUp => k.sd > c.sd,
            Signal::VarDown => k.sd < c.sd,
        }
    }

    pub fn eval(&self, x: &PairedState, palette: &RegimePalette) -> bool {
        self.eval_regimes(x.merged, x.control.regime, x.case.regime, palette)
    }

    /// Evaluates on a packed state code.
    #[inline]
    pub fn eval_code(&self, code: u64, palette: &RegimePalette) -> bool {
        use crate::paired::packed;
        self.eval_regimes(packed::z(code), packed::control_regime(code), packed::case_regime(code), palette)
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Signal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Signal::ALL
            .into_iter()
            .find(|sig| sig.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown signal '{s}'")))
    }
}
