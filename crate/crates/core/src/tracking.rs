//! Follows one vortex-line (or level-set) segment through a sequence of frames
//! by material advection, re-seeding at the global maximum when asked to or
//! when the segment degenerates.

use crate::curve::{
    advect_segment_substeps, diagnose_segment, trace_segment, CurveSegment, DiagnosticSample, Direction,
    SegmentDiagnostics, TraceOptions, DEFAULT_SPACING_RATIO,
};
use crate::error::{Error, Result};
use crate::frame::Frame;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub target_length: f64,
    /// Backward puts the seed (the global maximum) at `s = L`.
    pub direction: Direction,
    /// Re-seed after this many frames; `None` keeps one material lineage.
    pub reseed_interval: Option<usize>,
    pub spacing_ratio: f64,
}

impl TrackerConfig {
    pub fn new(target_length: f64) -> Self {
        Self {
            target_length,
            direction: Direction::Backward,
            reseed_interval: None,
            spacing_ratio: DEFAULT_SPACING_RATIO,
        }
    }
}

/// Why a new lineage was started.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedReason {
    Initial,
    Interval,
    /// Advection or diagnosis failed on the carried segment.
    Degenerate,
}

#[derive(Debug, Clone)]
pub struct TrackedStep {
    pub diagnostics: SegmentDiagnostics,
    pub samples: Vec<DiagnosticSample>,
    pub segment: CurveSegment,
    pub seeded: Option<SeedReason>,
}

#[derive(Debug)]
pub struct SegmentTracker {
    config: TrackerConfig,
    previous: Option<Frame>,
    segment: Option<CurveSegment>,
    lineage: u64,
    since_seed: usize,
    steps: Vec<TrackedStep>,
}

impl SegmentTracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        if !(config.target_length.is_finite() && config.target_length > 0.0) {
            return Err(Error::Precondition(format!(
                "segment target length must be positive, got {}",
                config.target_length
            )));
        }
        if !(config.spacing_ratio > 0.25 && config.spacing_ratio <= 1.0) {
            return Err(Error::Precondition(format!(
                "sample spacing ratio must lie in (0.25, 1], got {}",
                config.spacing_ratio
            )));
        }
        if config.reseed_interval == Some(0) {
            return Err(Error::Precondition("reseed interval must be at least 1".into()));
        }
        Ok(Self {
            config,
            previous: None,
            segment: None,
            lineage: 0,
            since_seed: 0,
            steps: Vec::new(),
        })
    }

    pub fn steps(&self) -> &[TrackedStep] {
        &self.steps
    }

    pub fn into_steps(self) -> Vec<TrackedStep> {
        self.steps
    }

    pub fn diagnostics(&self) -> Vec<SegmentDiagnostics> {
        self.steps.iter().map(|s| s.diagnostics.clone()).collect()
    }

    fn seed(&self, frame: &Frame) -> Result<CurveSegment> {
        let mut opts = TraceOptions::new(self.config.target_length, self.config.direction);
        opts.spacing = Some(self.config.spacing_ratio * frame.spacing());
        trace_segment(frame, frame.argmax, &opts)
    }

    fn carry(&self, prev: &Frame, frame: &Frame, seg: &CurveSegment) -> Result<CurveSegment> {
        let dt = frame.time - prev.time;
        if !(dt > 0.0) {
            return Err(Error::Precondition(format!(
                "frames must advance in time: {} then {}",
                prev.time, frame.time
            )));
        }
        let h = frame.spacing();
        let speed = seg.points.iter().map(|&x| crate::vec3::norm(prev.velocity(x))).fold(0.0, f64::max);
        let substeps = ((dt * speed / (0.5 * h)).ceil() as usize).max(1);
        advect_segment_substeps(
            seg,
            |x| prev.velocity(x),
            |x| frame.velocity(x),
            dt,
            self.config.spacing_ratio * h,
            substeps,
        )
    }

    /// Advances the tracked segment to `frame` and diagnoses it there.
    pub fn push(&mut self, frame: Frame) -> Result<&TrackedStep> {
        let interval_due = self
            .config
            .reseed_interval
            .is_some_and(|k| self.since_seed >= k);
        let carried = match (&self.previous, &self.segment) {
            (Some(prev), Some(seg)) if !interval_due => Some(
                self.carry(prev, &frame, seg)
                    .and_then(|s| diagnose_segment(&s, &frame).map(|d| (s, d))),
            ),
            _ => None,
        };
        let (segment, (mut diag, samples), reason) = match carried {
            Some(Ok((s, d))) => (s, d, None),
            other => {
                let reason = match other {
                    Some(Err(_)) => SeedReason::Degenerate,
                    _ if self.segment.is_none() => SeedReason::Initial,
                    _ => SeedReason::Interval,
                };
                let s = self.seed(&frame)?;
                let d = diagnose_segment(&s, &frame)?;
                if self.segment.is_some() {
                    self.lineage += 1;
                }
                self.since_seed = 0;
                (s, d, Some(reason))
            }
        };
        diag.lineage = self.lineage;
        self.since_seed += 1;
        self.segment = Some(segment.clone());
        self.previous = Some(frame);
        self.steps.push(TrackedStep {
            diagnostics: diag,
            samples,
            segment,
            seeded: reason,
        });
        Ok(self.steps.last().expect("just pushed"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::EulerInitial;
    use crate::grid::Grid;
    use crate::interp::InterpMethod;

    #[test]
    fn steady_field_keeps_one_lineage() {
        let g = Grid::cube(16).unwrap();
        let w = EulerInitial::abc_default().sample(&g).unwrap();
        let mut tr = SegmentTracker::new(TrackerConfig::new(0.5)).unwrap();
        for k in 0..3 {
            let f = Frame::from_euler(&w, 0.05 * k as f64, InterpMethod::Spectral, true).unwrap();
            tr.push(f).unwrap();
        }
        let d = tr.diagnostics();
        assert!(d.iter().all(|r| r.lineage == 0));
        assert_eq!(tr.steps()[0].seeded, Some(SeedReason::Initial));
        assert!(tr.steps()[1].seeded.is_none());
        assert!(d[0].endpoint_max);
    }

    #[test]
    fn reseeds_on_interval() {
        let g = Grid::cube(16).unwrap();
        let w = EulerInitial::abc_default().sample(&g).unwrap();
        let mut cfg = TrackerConfig::new(0.5);
        cfg.reseed_interval = Some(2);
        let mut tr = SegmentTracker::new(cfg).unwrap();
        for k in 0..5 {
            let f = Frame::from_euler(&w, 0.05 * k as f64, InterpMethod::Spectral, true).unwrap();
            tr.push(f).unwrap();
        }
        let lineages: Vec<u64> = tr.diagnostics().iter().map(|d| d.lineage).collect();
        assert_eq!(lineages, vec![0, 0, 1, 1, 2]);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(SegmentTracker::new(TrackerConfig::new(0.0)).is_err());
        let mut c = TrackerConfig::new(1.0);
        c.reseed_interval = Some(0);
        assert!(SegmentTracker::new(c).is_err());
    }
}
