//! Closed-form iteration-time model.
//!
//! `ssgd_iter_time` gives the per-iteration cost of fully synchronous
//! training. `ssd_avg_iter_time` gives the average cost over a k-iteration
//! delay cycle, split into three regimes:
//!
//! - Case 1: sends fit inside the compute window; the pull round trip sticks
//!   out once per cycle and amortizes as 1/k.
//! - Case 2: the send channel saturates; iterations pace at the total send
//!   cost with the pull round trip amortized on top.
//! - Case 3: compute dominates even the pull round trip; the average is
//!   constant in k and there is nothing to optimize.
//!
//! The formulas assume the pipeline idealization where channel bubbles are
//! charged to the preceding layer's communication cost and the retrieve side
//! of a layer costs at least as much as its send.

use super::profile::TimingProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineCase {
    /// Sends overlap with compute; pull cost amortizes as 1/k.
    Case1,
    /// Send-bound: the send channel is the pacing resource.
    Case2,
    /// Compute-bound: average time independent of k.
    Case3,
}

impl std::fmt::Display for PipelineCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PipelineCase::Case1 => write!(f, "case1"),
            PipelineCase::Case2 => write!(f, "case2"),
            PipelineCase::Case3 => write!(f, "case3"),
        }
    }
}

/// The classifying inequalities, recorded alongside the case label.
#[derive(Debug, Clone, Copy)]
pub struct CaseDecision {
    pub case: PipelineCase,
    /// Total send cost per iteration.
    pub send_total: f64,
    /// Compute window a send must fit into: forward + backward + first
    /// layer's local update.
    pub compute_window: f64,
    /// Slack of the pull round trip over the k-window compute; negative
    /// means compute dominates (case 3).
    pub pull_slack: f64,
}

/// Classifies a profile. Total and mutually exclusive: Case2 when the send
/// total reaches the compute window, otherwise Case1 when the pull round
/// trip exceeds the two-iteration compute span, otherwise Case3.
pub fn classify(profile: &TimingProfile) -> CaseDecision {
    let l = profile.layers();
    let send_total = profile.total_send();
    let t_b = profile.total_backward();
    let compute_window = profile.forward + t_b + profile.local_update[0];
    let pull_slack = profile.total_comm() + profile.backward[l - 1]
        - profile.forward
        - 2.0 * t_b
        - profile.local_update[0];
    let case = if send_total >= compute_window {
        PipelineCase::Case2
    } else if pull_slack > 0.0 {
        PipelineCase::Case1
    } else {
        PipelineCase::Case3
    };
    CaseDecision {
        case,
        send_total,
        compute_window,
        pull_slack,
    }
}

/// Per-iteration cost of synchronous training: compute-bound profiles pay
/// forward + backward plus the last communicated layer; otherwise the wire
/// paces the iteration and only the first gradient's backward is exposed.
pub fn ssgd_iter_time(profile: &TimingProfile) -> f64 {
    let l = profile.layers();
    let t_f = profile.forward;
    let t_b = profile.total_backward();
    let backward_overlap: f64 = profile.backward[..l - 1].iter().sum();
    let comm_overlap: f64 = (1..l).map(|j| profile.comm(j)).sum();
    if backward_overlap > comm_overlap {
        t_f + t_b + profile.comm(0)
    } else {
        t_f + profile.total_comm() + profile.backward[l - 1]
    }
}

/// Average iteration cost over a k-iteration delay cycle, with the regime
/// that produced it.
pub fn ssd_avg_iter_time(profile: &TimingProfile, k: u64) -> (f64, PipelineCase) {
    debug_assert!(k >= 1);
    let l = profile.layers();
    let kf = k as f64;
    let t_f = profile.forward;
    let t_b = profile.total_backward();
    let t_c = profile.total_comm();
    let h_loc_first = profile.local_update[0];
    let h_b_last = profile.backward[l - 1];
    let decision = classify(profile);
    let avg = match decision.case {
        PipelineCase::Case1 => {
            t_f + t_b
                + h_loc_first
                + (t_c + h_b_last - t_f - 2.0 * t_b - h_loc_first) / kf
        }
        PipelineCase::Case2 => {
            let s = decision.send_total;
            s + (t_c + h_b_last - t_b - s) / kf
        }
        PipelineCase::Case3 => t_f + t_b + h_loc_first,
    };
    (avg, decision.case)
}

/// Time saved over k consecutive iterations relative to synchronous
/// training, in the closed form that assumes the send total is half the
/// communication total for the send-bound case.
pub fn delta_t_k(profile: &TimingProfile, k: u64) -> f64 {
    let l = profile.layers();
    let kf = k as f64;
    let t_f = profile.forward;
    let t_b = profile.total_backward();
    let t_c = profile.total_comm();
    let h_b_last = profile.backward[l - 1];
    let h_loc_first = profile.local_update[0];
    match classify(profile).case {
        PipelineCase::Case1 => (kf - 1.0) * (t_c - t_b + h_b_last - h_loc_first) + t_f + t_b,
        PipelineCase::Case2 => {
            kf * t_f + (kf - 1.0) / 2.0 * t_c + (kf - 1.0) * h_b_last + t_b
        }
        // no closed form is given for the compute-bound regime; fall back to
        // the definition against the constant average
        PipelineCase::Case3 => {
            kf * ssgd_iter_time(profile) - kf * (t_f + t_b + h_loc_first)
        }
    }
}
