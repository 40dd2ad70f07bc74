use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::Real;

/// Pulse pattern applied during the phase-accumulation window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    /// No refocusing pulse; `g(t) = 1` on the window.
    Ramsey,
    /// `n` equally spaced pi-pulses; `n = 1` is a Hahn echo.
    Cpmg(u32),
}

/// Timing of one sensing cycle: a window of length `t_phi` followed by dead time up to
/// `t_seq = m * t_phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence<T> {
    pub kind: SequenceKind,
    pub t_phi: T,
    pub m: u32,
    /// Timing quantum used for perturbed sequences.
    pub t_clk: T,
}

/// Constant-sign piece of the switching function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T> {
    pub start: T,
    pub end: T,
    pub sign: T,
}

impl<T: Real> PulseSequence<T> {
    pub fn new(kind: SequenceKind, t_phi: T, m: u32) -> Result<Self> {
        if !(t_phi > T::zero()) || !t_phi.is_finite() {
            return Err(invalid("t_phi", format!("must be > 0, got {t_phi}")));
        }
        if m == 0 {
            return Err(invalid("m", "must be >= 1"));
        }
        if kind == SequenceKind::Cpmg(0) {
            return Err(invalid("n", "CPMG needs at least one pi-pulse"));
        }
        Ok(Self {
            kind,
            t_phi,
            m,
            t_clk: T::lit(4e-9),
        })
    }

    pub fn hahn(t_phi: T, m: u32) -> Result<Self> {
        Self::new(SequenceKind::Cpmg(1), t_phi, m)
    }

    pub fn ramsey(t_phi: T, m: u32) -> Result<Self> {
        Self::new(SequenceKind::Ramsey, t_phi, m)
    }

    pub fn with_clock(mut self, t_clk: T) -> Result<Self> {
        if !(t_clk > T::zero()) {
            return Err(invalid("t_clk", "must be > 0"));
        }
        self.t_clk = t_clk;
        Ok(self)
    }

    pub fn t_seq(&self) -> T {
        T::from_count(self.m as usize) * self.t_phi
    }

    /// Number of refocusing pulses (0 for Ramsey).
    pub fn pulse_count(&self) -> u32 {
        match self.kind {
            SequenceKind::Ramsey => 0,
            SequenceKind::Cpmg(n) => n,
        }
    }

    /// `2 pi / t_phi`, where the Hahn and CPMG-2 responses peak.
    pub fn principal_omega(&self) -> T {
        T::TAU() / self.t_phi
    }

    /// Same sequence with `t_phi` lengthened by one clock tick and `t_seq = m * t_phi'`.
    pub fn perturbed(&self) -> Self {
        Self {
            t_phi: self.t_phi + self.t_clk,
            ..*self
        }
    }

    /// Constant-sign pieces over `[0, t_phi)`.
    pub fn segments(&self) -> Vec<Segment<T>> {
        let n = self.pulse_count() as usize;
        if n == 0 {
            return vec![Segment {
                start: T::zero(),
                end: self.t_phi,
                sign: T::one(),
            }];
        }
        let tau = self.t_phi / T::from_count(2 * n);
        let mut bounds = Vec::with_capacity(n + 2);
        bounds.push(T::zero());
        for j in 1..=n {
            bounds.push(T::from_count(2 * j - 1) * tau);
        }
        bounds.push(self.t_phi);
        bounds
            .windows(2)
            .enumerate()
            .map(|(j, w)| Segment {
                start: w[0],
                end: w[1],
                sign: if j % 2 == 0 { T::one() } else { -T::one() },
            })
            .collect()
    }

    /// `g(t)` for `t` in one period `[0, t_seq)`: `+-1` in the window, `0` in the dead time.
    pub fn switching_function(&self, t: T) -> Result<i8> {
        if !(t >= T::zero() && t < self.t_seq()) {
            return Err(Error::OutsidePeriod {
                t: t.to_f64_lossy(),
                period: self.t_seq().to_f64_lossy(),
            });
        }
        if t >= self.t_phi {
            return Ok(0);
        }
        let n = self.pulse_count();
        if n == 0 {
            return Ok(1);
        }
        // segment k covers [(2k-1) tau, (2k+1) tau) with tau = t_phi / 2n
        let x = t / self.t_phi * T::from_count(2 * n as usize);
        let k = ((x + T::one()) / T::lit(2.0))
            .floor()
            .to_u32()
            .unwrap_or(0)
            .min(n);
        Ok(if k.is_multiple_of(2) { 1 } else { -1 })
    }
}
