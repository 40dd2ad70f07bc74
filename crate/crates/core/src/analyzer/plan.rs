use std::fmt::Write as _;

use serde::Serialize;

use super::peaks::PeakOptions;
use super::MatchRules;
use crate::error::{invalid, Error, Result};
use crate::physics::{PulseSequence, SequenceKind};

/// One measurement band. The reference line sits at `center = 1/t_phi + epsilon/t_seq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Section {
    /// Hz.
    pub center: f64,
    /// Seconds.
    pub t_phi: f64,
    pub m: u32,
    pub epsilon: i32,
    /// Hz, full width of the accepted band.
    pub bandwidth: f64,
}

impl Section {
    pub fn new(center: f64, m: u32, epsilon: i32, bandwidth: f64) -> Result<Self> {
        if !(center > 0.0) || !(bandwidth >= 0.0) {
            return Err(invalid("section", "center must be > 0 and bandwidth >= 0"));
        }
        if m == 0 || !(-1..=1).contains(&epsilon) || m as i64 + epsilon as i64 <= 0 {
            return Err(invalid("section", format!("need m >= 1, epsilon in {{-1, 0, 1}}, m + epsilon >= 1; got m = {m}, epsilon = {epsilon}")));
        }
        let k = (m as i64 + epsilon as i64) as f64;
        Ok(Self {
            center,
            t_phi: k / (m as f64 * center),
            m,
            epsilon,
            bandwidth,
        })
    }

    /// Index of the reference comb line `k / t_seq`.
    pub fn reference_index(&self) -> i64 {
        self.m as i64 + self.epsilon as i64
    }

    pub fn t_seq(&self) -> f64 {
        self.m as f64 * self.t_phi
    }

    /// Pair rate `1 / (2 t_seq)` of the nominal run.
    pub fn pair_rate(&self) -> f64 {
        1.0 / (2.0 * self.t_seq())
    }

    pub fn band(&self) -> (f64, f64) {
        (
            self.center - self.bandwidth / 2.0,
            self.center + self.bandwidth / 2.0,
        )
    }

    pub fn sequence(&self, kind: SequenceKind, t_clk: f64) -> Result<PulseSequence<f64>> {
        PulseSequence::new(kind, self.t_phi, self.m)?.with_clock(t_clk)
    }
}

/// Sections plus the acquisition and detection settings shared by all of them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzerPlan {
    pub sections: Vec<Section>,
    /// Seconds added to `t_phi` for the perturbed run.
    pub t_clk: f64,
    /// MAD multiple of the peak threshold.
    pub spike_threshold: f64,
    /// Seconds per run.
    pub trace_duration: f64,
    /// Hz, low-pass cutoff of the second demodulator.
    pub lia_cutoff: f64,
    pub filter_order: usize,
    pub samples_per_cycle: usize,
    pub sequence: SequenceKind,
    pub relative_floor: f64,
    /// rad.
    pub absolute_floor: f64,
    pub matching: MatchRules,
    /// Non-fatal findings of the planner.
    pub warnings: Vec<String>,
}

impl AnalyzerPlan {
    /// Plan around explicit sections with default acquisition settings.
    pub fn from_sections(sections: Vec<Section>, lia_cutoff: f64) -> Self {
        Self {
            sections,
            t_clk: 4e-9,
            spike_threshold: 5.0,
            trace_duration: 10.0,
            lia_cutoff,
            filter_order: 4,
            samples_per_cycle: 10,
            sequence: SequenceKind::Cpmg(1),
            relative_floor: 1e-3,
            absolute_floor: 1e-9,
            matching: MatchRules::default(),
            warnings: Vec::new(),
        }
    }

    pub fn peak_options(&self) -> PeakOptions {
        PeakOptions {
            threshold_mad: self.spike_threshold,
            relative_floor: self.relative_floor,
            absolute_floor: self.absolute_floor,
        }
    }

    /// Checks every section against the demodulator constraints.
    pub fn validate(&self) -> Result<()> {
        if self.sections.is_empty() {
            return Err(Error::InfeasiblePlan("no sections".into()));
        }
        if !(self.t_clk > 0.0) {
            return Err(invalid("t_clk", "must be > 0"));
        }
        if !(self.trace_duration > 0.0) {
            return Err(invalid("trace_duration", "must be > 0"));
        }
        if self.samples_per_cycle < 4 || !self.samples_per_cycle.is_multiple_of(2) {
            return Err(Error::OddSamplesPerCycle {
                ratio: self.samples_per_cycle as f64,
            });
        }
        for s in &self.sections {
            check_section(s, self.lia_cutoff, self.samples_per_cycle)?;
        }
        Ok(())
    }

    /// CSV `center_hz,t_phi_s,m,epsilon,bandwidth_hz,pair_rate_hz`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("center_hz,t_phi_s,m,epsilon,bandwidth_hz,pair_rate_hz\n");
        for s in &self.sections {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                s.center,
                s.t_phi,
                s.m,
                s.epsilon,
                s.bandwidth,
                s.pair_rate()
            );
        }
        out
    }
}

pub(crate) fn check_section(s: &Section, f_c: f64, n: usize) -> Result<()> {
    let fs = s.pair_rate();
    if s.bandwidth > 2.0 * f_c {
        return Err(Error::InfeasiblePlan(format!(
            "section bandwidth {} Hz exceeds twice the LIA cutoff ({f_c} Hz)",
            s.bandwidth
        )));
    }
    if s.bandwidth / 2.0 > fs - f_c {
        return Err(Error::InfeasiblePlan(format!(
            "half bandwidth {} Hz exceeds the alias-free margin f_s - f_c = {} Hz at {} Hz",
            s.bandwidth / 2.0,
            fs - f_c,
            s.center
        )));
    }
    let delta_f = fs / n as f64;
    if !(f_c < delta_f) {
        return Err(Error::InfeasiblePlan(format!(
            "LIA cutoff {f_c} Hz must stay below df = f_s / N = {delta_f} Hz at {} Hz",
            s.center
        )));
    }
    Ok(())
}

/// Cover `[range_lo, range_hi]` with sections of width `per_section_bw`, laid out from
/// `range_lo` without overlap.
pub fn plan_sections(
    range_lo: f64,
    range_hi: f64,
    per_section_bw: f64,
    f_s: f64,
    f_c_lia: f64,
) -> Result<AnalyzerPlan> {
    plan_sections_with_overlap(range_lo, range_hi, per_section_bw, f_s, f_c_lia, 0.0)
}

/// As [`plan_sections`], with neighbouring sections sharing `overlap` Hz.
///
/// Each section uses `t_phi = 1 / center` and the largest `m` whose pair rate `center / (2m)`
/// is at least `f_s`.
pub fn plan_sections_with_overlap(
    range_lo: f64,
    range_hi: f64,
    per_section_bw: f64,
    f_s: f64,
    f_c_lia: f64,
    overlap: f64,
) -> Result<AnalyzerPlan> {
    if !(range_lo > 0.0 && range_hi >= range_lo) {
        return Err(invalid(
            "range",
            format!("need 0 < lo <= hi, got [{range_lo}, {range_hi}]"),
        ));
    }
    if !(per_section_bw > 0.0 && f_s > 0.0 && f_c_lia > 0.0) {
        return Err(invalid("plan", "bandwidth, f_s and LIA cutoff must be > 0"));
    }
    if per_section_bw > 2.0 * f_c_lia {
        return Err(Error::InfeasiblePlan(format!(
            "section bandwidth {per_section_bw} Hz exceeds twice the LIA cutoff ({f_c_lia} Hz)"
        )));
    }
    if !(overlap >= 0.0 && overlap < per_section_bw) {
        return Err(invalid("overlap", "must lie in [0, bandwidth)"));
    }
    let span = range_hi - range_lo;
    let step = per_section_bw - overlap;
    let centers: Vec<f64> = if span == 0.0 {
        vec![range_lo]
    } else {
        let count = ((span - overlap) / step).ceil().max(1.0) as usize;
        (0..count)
            .map(|i| range_lo + i as f64 * step + per_section_bw / 2.0)
            .collect()
    };
    let mut sections = Vec::with_capacity(centers.len());
    let mut warnings = Vec::new();
    for c in centers {
        let m = ((c / (2.0 * f_s)).floor() as u32).max(1);
        let s = Section::new(c, m, 0, per_section_bw)?;
        let margin = s.pair_rate() - f_c_lia;
        if range_lo < c - margin || range_hi > c + margin {
            warnings.push(format!(
                "section at {c} Hz: range [{range_lo}, {range_hi}] Hz leaves the alias-free window [{}, {}] Hz",
                c - margin,
                c + margin
            ));
        }
        sections.push(s);
    }
    let mut plan = AnalyzerPlan::from_sections(sections, f_c_lia);
    plan.warnings = warnings;
    plan.validate()?;
    Ok(plan)
}
