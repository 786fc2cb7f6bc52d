use crate::model::SingleGroupState;

/// Largest regime count representable in a packed state.
pub const MAX_REGIMES: usize = 32;
/// Largest sojourn representable in a packed state.
pub const MAX_SOJOURN: u32 = (1 << 26) - 1;

/// Joint latent state of the case–control model.
///
/// `merged` is the indicator `z`: when set the case substate equals the
/// control substate; when clear the two groups are in different regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairedState {
    pub merged: bool,
    pub control: SingleGroupState,
    pub case: SingleGroupState,
}

impl PairedState {
    pub fn merged(sojourn: u32, regime: usize) -> Self {
        let s = SingleGroupState::new(sojourn, regime);
        Self {
            merged: true,
            control: s,
            case: s,
        }
    }

    pub fn split(control: SingleGroupState, case: SingleGroupState) -> Self {
        Self {
            merged: false,
            control,
            case,
        }
    }

    /// `z` as an integer.
    pub fn z(&self) -> u8 {
        u8::from(self.merged)
    }

    /// Checks the structural invariants for `r` regimes.
    pub fn is_valid(&self, r: usize) -> bool {
        let sub_ok = |s: &SingleGroupState| s.sojourn >= 1 && s.sojourn <= MAX_SOJOURN && s.regime < r;
        if !sub_ok(&self.control) || !sub_ok(&self.case) {
            return false;
        }
        if self.merged {
            self.case == self.control
        } else {
            self.case.regime != self.control.regime
        }
    }

    /// Packs into 63 bits: z, two 5-bit regimes, two 26-bit sojourns.
    #[inline]
    pub fn pack(&self) -> u64 {
        debug_assert!(self.control.sojourn <= MAX_SOJOURN && self.case.sojourn <= MAX_SOJOURN);
        debug_assert!(self.control.regime < MAX_REGIMES && self.case.regime < MAX_REGIMES);
        u64::from(self.merged)
            | (self.control.regime as u64) << 1
            | (self.case.regime as u64) << 6
            | u64::from(self.control.sojourn) << 11
            | u64::from(self.case.sojourn) << 37
    }

    #[inline]
    pub fn unpack(code: u64) -> Self {
        Self {
            merged: code & 1 == 1,
            control: SingleGroupState::new(((code >> 11) & 0x3ff_ffff) as u32, ((code >> 1) & 0x1f) as usize),
            case: SingleGroupState::new(((code >> 37) & 0x3ff_ffff) as u32, ((code >> 6) & 0x1f) as usize),
        }
    }
}

/// Field accessors on packed codes, used by hot loops.
pub(crate) mod packed {
    #[inline]
    pub fn z(code: u64) -> bool {
        code & 1 == 1
    }
    #[inline]
    pub fn control_regime(code: u64) -> usize {
        ((code >> 1) & 0x1f) as usize
    }
    #[inline]
    pub fn case_regime(code: u64) -> usize {
        ((code >> 6) & 0x1f) as usize
    }
    #[inline]
    pub fn control_sojourn(code: u64) -> u32 {
        ((code >> 11) & 0x3ff_ffff) as u32
    }
    #[inline]
    pub fn case_sojourn(code: u64) -> u32 {
        ((code >> 37) & 0x3ff_ffff) as u32
    }
    /// Control substate bits (regime and sojourn).
    pub const CONTROL_MASK: u64 = (0x1f << 1) | (0x3ff_ffff << 11);
    /// Case substate bits.
    pub const CASE_MASK: u64 = (0x1f << 6) | (0x3ff_ffff << 37);
    #[inline]
    pub fn control_bits(sojourn: u32, regime: usize) -> u64 {
        (regime as u64) << 1 | u64::from(sojourn) << 11
    }
    #[inline]
    pub fn case_bits(sojourn: u32, regime: usize) -> u64 {
        (regime as u64) << 6 | u64::from(sojourn) << 37
    }
}

/// The `R²` possible first states: entry `r·R + s` (zero-based) is
/// `(1{r = s}, 1, r, 1, s)`.
pub fn enumerate_initial(r: usize) -> Vec<PairedState> {
    let mut out = Vec::with_capacity(r * r);
    for rc in 0..r {
        for rk in 0..r {
            out.push(restart(rc, rk));
        }
    }
    out
}

#[inline]
fn restart(rc: usize, rk: usize) -> PairedState {
    PairedState {
        merged: rc == rk,
        control: SingleGroupState::new(1, rc),
        case: SingleGroupState::new(1, rk),
    }
}

/// The `2R + R²` candidate successors of `x`, in slot order:
///
/// 1. both groups continue;
/// 2. the groups merge while the control continues (`None` when `x` is
///    already merged);
/// 3. `R-1` slots: control change point to each regime other than the case
///    regime, case continues;
/// 4. `R-1` slots: case change point to each regime other than the control
///    regime, control continues;
/// 5. `R²` slots: joint restart, as in [`enumerate_initial`].
///
/// Every state reachable with positive probability appears exactly once among
/// the slots that carry positive probability.
pub fn enumerate_successors(x: &PairedState, r: usize) -> Vec<Option<PairedState>> {
    let (c, k) = (x.control, x.case);
    let mut out = Vec::with_capacity(2 * r + r * r);
    out.push(Some(PairedState {
        merged: x.merged,
        control: SingleGroupState::new(c.sojourn + 1, c.regime),
        case: SingleGroupState::new(k.sojourn + 1, k.regime),
    }));
    out.push(if x.merged {
        None
    } else {
        Some(PairedState::merged(c.sojourn + 1, c.regime))
    });
    for rc in (0..r).filter(|&q| q != k.regime) {
        out.push(Some(PairedState::split(
            SingleGroupState::new(1, rc),
            SingleGroupState::new(k.sojourn + 1, k.regime),
        )));
    }
    for rk in (0..r).filter(|&q| q != c.regime) {
        out.push(Some(PairedState::split(
            SingleGroupState::new(c.sojourn + 1, c.regime),
            SingleGroupState::new(1, rk),
        )));
    }
    out.extend(enumerate_initial(r).into_iter().map(Some));
    out
}
