//! C ABI for online MAD experiments.
//!
//! Every fallible function returns a [`MadStatus`]; on failure the message is
//! available from [`mad_last_error_message`] on the same thread. Sessions are
//! opaque handles created by [`mad_session_new`] and released with
//! [`mad_session_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mad::design::{mix, DeltaSchedule, DesignKind, Session};
use mad::inference::{asymptotic_radius, CsParams};
use mad::policy::{AssignmentDistribution, PolicyKind};
use mad::MadError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MadStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ArmOutOfRange = 3,
    Domain = 4,
    InvalidState = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Underlying bandit policy.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MadPolicy {
    Uniform = 0,
    BetaThompson = 1,
    GaussianThompson = 2,
    Ucb1 = 3,
}

/// Design family; `a` and `c` in [`MadDesign`] are read only where listed.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MadDesignKind {
    /// `delta = 1`.
    Bernoulli = 0,
    /// `delta = 0`.
    StandardBandit = 1,
    /// `delta_t = t^-a`.
    Power = 2,
    /// `delta_t = c`.
    Constant = 3,
    /// `delta_t = max(t^-a, c)`.
    ClippedMax = 4,
    /// `delta_t = min(t^-a, c)`.
    ClippedMin = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MadDesign {
    pub kind: MadDesignKind,
    pub a: f64,
    pub c: f64,
}

/// Current confidence-sequence interval.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MadInterval {
    pub center: f64,
    pub radius: f64,
    pub s_hat: f64,
    pub units: u64,
}

/// Opaque online session.
pub struct MadSession {
    inner: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let clean = message.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).unwrap_or_default());
}

fn status_of(err: &MadError) -> MadStatus {
    match err {
        MadError::InvalidParameter { .. } => MadStatus::InvalidArgument,
        MadError::ArmOutOfRange { .. } => MadStatus::ArmOutOfRange,
        MadError::Domain(_) => MadStatus::Domain,
        _ => MadStatus::InvalidState,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (MadStatus, String)>) -> MadStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MadStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MadStatus::Panic
        }
    }
}

fn lib(err: MadError) -> (MadStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (MadStatus, String) {
    (MadStatus::NullPointer, format!("`{what}` is null"))
}

fn design_kind(d: MadDesign) -> DesignKind {
    match d.kind {
        MadDesignKind::Bernoulli => DesignKind::Bernoulli,
        MadDesignKind::StandardBandit => DesignKind::StandardBandit,
        MadDesignKind::Power => DesignKind::Mad { schedule: DeltaSchedule::Power { a: d.a } },
        MadDesignKind::Constant => DesignKind::Mad { schedule: DeltaSchedule::Constant { c: d.c } },
        MadDesignKind::ClippedMax => DesignKind::Mad { schedule: DeltaSchedule::ClippedMax { a: d.a, c: d.c } },
        MadDesignKind::ClippedMin => DesignKind::Mad { schedule: DeltaSchedule::ClippedMin { a: d.a, c: d.c } },
    }
}

fn policy_kind(p: MadPolicy) -> PolicyKind {
    match p {
        MadPolicy::Uniform => PolicyKind::Uniform,
        MadPolicy::BetaThompson => PolicyKind::BetaThompson,
        MadPolicy::GaussianThompson => PolicyKind::GaussianThompson,
        MadPolicy::Ucb1 => PolicyKind::Ucb1,
    }
}

/// Create a session. `mc_draws` is used only for Thompson sampling with more
/// than two arms. On success `*out` owns the new handle.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mad_session_new(
    n_arms: usize,
    policy: MadPolicy,
    design: MadDesign,
    mc_draws: usize,
    seed: u64,
    out: *mut *mut MadSession,
) -> MadStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if mc_draws == 0 {
            return Err((MadStatus::InvalidArgument, "`mc_draws` must be at least 1".into()));
        }
        let inner = Session::new(n_arms, policy_kind(policy), design_kind(design), mc_draws, seed).map_err(lib)?;
        *out = Box::into_raw(Box::new(MadSession { inner }));
        Ok(())
    })
}

/// Release a session. Null is ignored.
///
/// # Safety
/// `session` must be null or a handle from [`mad_session_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mad_session_free(session: *mut MadSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Number of arms, or 0 for a null handle.
///
/// # Safety
/// `session` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mad_session_n_arms(session: *const MadSession) -> usize {
    session.as_ref().map_or(0, |s| s.inner.n_arms())
}

/// Units whose outcomes have been observed, or 0 for a null handle.
///
/// # Safety
/// `session` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mad_session_units(session: *const MadSession) -> u64 {
    session.as_ref().map_or(0, |s| s.inner.observed_units())
}

/// Assign the next unit. Writes the arm to `*arm` and, when `probs` is not
/// null, the `probs_len >= n_arms` assignment probabilities. Repeated calls
/// before [`mad_session_observe`] return the same assignment.
///
/// # Safety
/// `session` must be a live handle, `arm` valid for writes, and `probs`
/// null or valid for `probs_len` writes.
#[no_mangle]
pub unsafe extern "C" fn mad_session_assign(
    session: *mut MadSession,
    arm: *mut usize,
    probs: *mut f64,
    probs_len: usize,
) -> MadStatus {
    guard(|| {
        let s = session.as_mut().ok_or_else(|| null("session"))?;
        if arm.is_null() {
            return Err(null("arm"));
        }
        let k = s.inner.n_arms();
        if !probs.is_null() && probs_len < k {
            return Err((MadStatus::BufferTooSmall, format!("`probs` holds {probs_len} values, need {k}")));
        }
        let a = s.inner.assign().map_err(lib)?;
        *arm = a.arm;
        if !probs.is_null() {
            std::slice::from_raw_parts_mut(probs, k).copy_from_slice(a.probs.probs());
        }
        Ok(())
    })
}

/// Report the outcome of the pending assignment.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mad_session_observe(session: *mut MadSession, outcome: f64) -> MadStatus {
    guard(|| {
        let s = session.as_mut().ok_or_else(|| null("session"))?;
        s.inner.observe(outcome).map_err(lib)
    })
}

/// Asymptotic confidence sequence for arm `w` minus arm `w_prime` after the
/// observed units. `eta <= 0` derives `eta` from `t_star`.
///
/// # Safety
/// `session` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mad_session_interval(
    session: *const MadSession,
    w: usize,
    w_prime: usize,
    alpha: f64,
    eta: f64,
    t_star: u64,
    out: *mut MadInterval,
) -> MadStatus {
    guard(|| {
        let s = session.as_ref().ok_or_else(|| null("session"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if w == w_prime {
            return Err((MadStatus::InvalidArgument, "`w` and `w_prime` must differ".into()));
        }
        let params = if eta > 0.0 { CsParams::new(alpha, eta) } else { CsParams::for_horizon(alpha, t_star) }.map_err(lib)?;
        let (center, radius, s_hat) = s.inner.ipw().interval((w, w_prime), params).map_err(lib)?;
        *out = MadInterval { center, radius, s_hat, units: s.inner.observed_units() };
        Ok(())
    })
}

/// Asymptotic radius for intrinsic time `s_hat` after `t` units.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mad_asymptotic_radius(s_hat: f64, t: u64, eta: f64, alpha: f64, out: *mut f64) -> MadStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        CsParams::new(alpha, eta).map_err(lib)?;
        if t == 0 || !(s_hat >= 0.0) {
            return Err((MadStatus::InvalidArgument, "need t >= 1 and s_hat >= 0".into()));
        }
        *out = asymptotic_radius(s_hat, t, eta, alpha);
        Ok(())
    })
}

/// `eta` that makes the radius tightest at intrinsic time `t_star`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mad_eta_for_horizon(alpha: f64, t_star: u64, out: *mut f64) -> MadStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = CsParams::for_horizon(alpha, t_star).map_err(lib)?.eta;
        Ok(())
    })
}

/// `out[i] = delta / len + (1 - delta) * probs[i]`.
///
/// # Safety
/// `probs` and `out` must each be valid for `len` values; they may alias.
#[no_mangle]
pub unsafe extern "C" fn mad_mix(delta: f64, probs: *const f64, len: usize, out: *mut f64) -> MadStatus {
    guard(|| {
        if probs.is_null() {
            return Err(null("probs"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let input = std::slice::from_raw_parts(probs, len).to_vec();
        let policy = AssignmentDistribution::new(input).map_err(lib)?;
        let mixed = mix(delta, &policy).map_err(lib)?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(mixed.probs());
        Ok(())
    })
}

/// Mixing weight of `design` at unit (or batch) index `t >= 1`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mad_delta(design: MadDesign, t: u64, out: *mut f64) -> MadStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if t == 0 {
            return Err((MadStatus::InvalidArgument, "`t` must be at least 1".into()));
        }
        let kind = design_kind(design);
        kind.validate().map_err(lib)?;
        *out = match kind {
            DesignKind::Bernoulli => 1.0,
            DesignKind::StandardBandit => 0.0,
            DesignKind::Mad { schedule } => schedule.evaluate(t).map_err(lib)?,
        };
        Ok(())
    })
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mad_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mad_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
