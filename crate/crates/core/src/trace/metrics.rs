use serde::{Deserialize, Serialize};

use super::{ForceTrace, Result, TraceError};

/// Conventions used when extracting metrics. None of these are fixed by the
/// measuring device; all are adjustable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// Width of the centred moving average used before extremum search, s.
    pub smoothing_window: f64,
    /// Final stretch of the trace averaged into the clamping force, s.
    pub settling_window: f64,
    /// Boundary between the two force-limit windows, s.
    pub limit_boundary: f64,
    /// Minimum swing, relative to the peak force, that counts as oscillation.
    pub oscillation_ratio: f64,
    /// Swings of at least `oscillation_ratio` needed for an oscillating
    /// (Type 2) classification.
    pub min_oscillation_cycles: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            smoothing_window: 0.005,
            settling_window: 0.5,
            limit_boundary: 0.5,
            oscillation_ratio: 0.25,
            min_oscillation_cycles: 2,
        }
    }
}

/// Force-profile shape after the impact peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CollisionType {
    /// Force returns below the onset threshold and stays there.
    Type1,
    /// Repeated large swings after the peak.
    Type2,
    /// Settles at a clamping force.
    Type3,
    Unclassified,
}

impl std::fmt::Display for CollisionType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CollisionType::Type1 => "type1",
            CollisionType::Type2 => "type2",
            CollisionType::Type3 => "type3",
            CollisionType::Unclassified => "unclassified",
        })
    }
}

/// Time at which the robot controller reported a stop, relative to onset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopEvent {
    pub controller_stop_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowMaxima {
    /// Max force before the limit boundary, N.
    pub first: f64,
    /// Max force from the boundary on; 0 when the trace ends earlier.
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionMetrics {
    pub peak_force: f64,
    pub peak_time: f64,
    pub phase1_duration: Option<f64>,
    /// `None` when the trace is shorter than the settling window.
    pub clamping_force: Option<f64>,
    pub impulse_to_peak: f64,
    /// Needs the pre-impact velocity.
    pub estimated_mass: Option<f64>,
    pub collision_type: CollisionType,
    pub force_in_first_500ms_max: f64,
    pub force_after_500ms_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reaction_time: Option<f64>,
}

fn peak_index(trace: &ForceTrace) -> Result<usize> {
    let samples = trace.samples();
    if samples.is_empty() {
        return Err(TraceError::Empty);
    }
    let mut best = 0;
    for (i, &s) in samples.iter().enumerate().skip(1) {
        if s > samples[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Global maximum and its time; ties go to the earliest sample.
pub fn peak(trace: &ForceTrace) -> Result<(f64, f64)> {
    let i = peak_index(trace)?;
    Ok((trace.samples()[i], trace.time_of(i)))
}

/// Centred moving average over `window` seconds (at least one sample, odd
/// width). Near the ends the average covers only the available samples.
pub fn smooth(trace: &ForceTrace, window: f64) -> Vec<f64> {
    let samples = trace.samples();
    let n = samples.len();
    let mut width = trace.samples_in(window).max(1);
    if width % 2 == 0 {
        width += 1;
    }
    let half = width / 2;
    if half == 0 {
        return samples.to_vec();
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &s in samples {
        acc += s;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Index of the first local minimum of `s` after `start`. A flat bottom
/// resolves to its first sample; a descent running into the end of the
/// signal ends at the last sample.
fn first_minimum_after(s: &[f64], start: usize) -> Option<usize> {
    let mut bottom = None;
    for j in start + 1..s.len() {
        if s[j] < s[j - 1] {
            bottom = Some(j);
        } else if s[j] > s[j - 1] && bottom.is_some() {
            return bottom;
        }
    }
    bottom
}

/// Duration of the initial impact: onset to the first minimum of the
/// smoothed force after the peak. `None` when the force never dips.
pub fn phase1_duration(trace: &ForceTrace, config: &AnalysisConfig) -> Result<Option<f64>> {
    let p = peak_index(trace)?;
    let smoothed = smooth(trace, config.smoothing_window);
    Ok(first_minimum_after(&smoothed, p).map(|j| trace.time_of(j)))
}

/// Mean force over the final settling window.
pub fn clamping_force(trace: &ForceTrace, config: &AnalysisConfig) -> Result<f64> {
    let needed = trace.samples_in(config.settling_window).max(1);
    let samples = trace.samples();
    if samples.len() < needed {
        return Err(TraceError::TooShort {
            needed,
            have: samples.len(),
        });
    }
    let tail = &samples[samples.len() - needed..];
    Ok(tail.iter().sum::<f64>() / needed as f64)
}

fn trapezoid(samples: &[f64], dt: f64) -> f64 {
    samples.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum()
}

/// ∫ F dt from onset to the peak (trapezoidal rule).
pub fn impulse_to_peak(trace: &ForceTrace) -> Result<f64> {
    let p = peak_index(trace)?;
    Ok(trapezoid(&trace.samples()[..=p], trace.dt()))
}

/// ∫ F dt from onset to `t` (rounded to the nearest sample).
pub fn impulse_until(trace: &ForceTrace, t: f64) -> f64 {
    let end = trace.samples_in(t.max(0.0)).min(trace.len().saturating_sub(1));
    if trace.is_empty() {
        return 0.0;
    }
    trapezoid(&trace.samples()[..=end], trace.dt())
}

/// ∫ F dt over the whole trace.
pub fn total_impulse(trace: &ForceTrace) -> f64 {
    trapezoid(trace.samples(), trace.dt())
}

/// Robot mass implied by the impulse to peak: m = J / v₀.
pub fn estimate_robot_mass(trace: &ForceTrace, v0: f64) -> Result<f64> {
    if !(v0 > 0.0 && v0.is_finite()) {
        return Err(TraceError::NonPositiveVelocity(v0));
    }
    Ok(impulse_to_peak(trace)? / v0)
}

/// Maxima before and after the limit boundary. Sample `i` belongs to the
/// first window when `i / fs < boundary`.
pub fn window_maxima(trace: &ForceTrace, config: &AnalysisConfig) -> WindowMaxima {
    let boundary = (config.limit_boundary * trace.sample_rate() - 1e-9).ceil().max(0.0) as usize;
    let samples = trace.samples();
    let split = boundary.min(samples.len());
    let max_of = |s: &[f64]| s.iter().copied().fold(0.0_f64, f64::max);
    WindowMaxima {
        first: max_of(&samples[..split]),
        after: max_of(&samples[split..]),
    }
}

/// Number of downward swings after the peak whose drop is at least
/// `oscillation_ratio · peak`, found with a hysteresis (zig-zag) scan of the
/// smoothed signal.
pub fn oscillation_swings(trace: &ForceTrace, config: &AnalysisConfig) -> Result<usize> {
    let p = peak_index(trace)?;
    let peak_force = trace.samples()[p];
    let h = config.oscillation_ratio * peak_force;
    if !(h > 0.0) {
        return Ok(0);
    }
    let s = smooth(trace, config.smoothing_window);
    let mut count = 0;
    let mut going_down = true;
    let mut swing_top = s[p].max(peak_force);
    let mut extreme = swing_top;
    let mut counted = false;
    for &x in &s[p + 1..] {
        if going_down {
            extreme = extreme.min(x);
            if !counted && swing_top - extreme >= h {
                count += 1;
                counted = true;
            }
            if x - extreme >= h {
                going_down = false;
                extreme = x;
            }
        } else {
            extreme = extreme.max(x);
            if extreme - x >= h {
                going_down = true;
                swing_top = extreme;
                extreme = x;
                count += 1;
                counted = true;
            }
        }
    }
    Ok(count)
}

/// Type 1 when the force drops below the onset threshold after the peak and
/// never comes back; Type 2 with at least `min_oscillation_cycles` large
/// swings; Type 3 when the final settling window holds at or above the
/// threshold with a spread below the oscillation bound.
pub fn classify(trace: &ForceTrace, config: &AnalysisConfig) -> Result<CollisionType> {
    let p = peak_index(trace)?;
    let samples = trace.samples();
    let threshold = trace.onset_threshold();

    if let Some(k) = (p + 1..samples.len()).find(|&k| samples[k] < threshold) {
        if samples[k..].iter().all(|&s| s < threshold) {
            return Ok(CollisionType::Type1);
        }
    }

    if oscillation_swings(trace, config)? >= config.min_oscillation_cycles {
        return Ok(CollisionType::Type2);
    }

    let needed = trace.samples_in(config.settling_window).max(1);
    if samples.len() >= needed {
        let tail = &samples[samples.len() - needed..];
        let mean = tail.iter().sum::<f64>() / needed as f64;
        let (lo, hi) = tail
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        if mean >= threshold && hi - lo < config.oscillation_ratio * samples[p] {
            return Ok(CollisionType::Type3);
        }
    }
    Ok(CollisionType::Unclassified)
}

/// Every metric for one trace.
pub fn analyze(
    trace: &ForceTrace,
    v0: Option<f64>,
    stop: Option<StopEvent>,
    config: &AnalysisConfig,
) -> Result<CollisionMetrics> {
    let (peak_force, peak_time) = peak(trace)?;
    let windows = window_maxima(trace, config);
    let clamping = match clamping_force(trace, config) {
        Ok(f) => Some(f),
        Err(TraceError::TooShort { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(CollisionMetrics {
        peak_force,
        peak_time,
        phase1_duration: phase1_duration(trace, config)?,
        clamping_force: clamping,
        impulse_to_peak: impulse_to_peak(trace)?,
        estimated_mass: v0.map(|v| estimate_robot_mass(trace, v)).transpose()?,
        collision_type: classify(trace, config)?,
        force_in_first_500ms_max: windows.first,
        force_after_500ms_max: windows.after,
        reaction_time: stop.map(|s| s.controller_stop_time),
    })
}
