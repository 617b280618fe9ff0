//! Discrete dynamic movement primitives.
//!
//! Each channel follows the spring-damper transformation system
//!
//! ```text
//! tau² ÿ = alpha_z (beta_z (g - y) - tau ẏ) + f(x)
//! ```
//!
//! driven by the first-order canonical system `tau ẋ = -alpha_x x` with
//! `x(0) = 1`. The forcing term is a normalized mixture of Gaussian kernels
//! over the phase, gated by `x` and scaled by the movement amplitude
//! `g - y0`, so it fades as the phase decays and the spring settles on `g`.
//!
//! Weights are fitted per kernel by locally weighted regression, which has
//! a closed form because each kernel solves an independent one-dimensional
//! weighted least-squares problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{derive_kinematics, resample_uniform, KinematicTrajectory, Trajectory};

/// Schema tag written into serialized models.
pub const MODEL_SCHEMA: &str = "lfd_dmp_model/1";

/// Kernel overlap used when deriving widths from neighbouring centers.
const BASIS_OVERLAP: f64 = 0.5;

/// Below this denominator a kernel has no support in the data; its weight is zeroed.
const LWR_DEGENERATE: f64 = 1e-12;

/// A channel whose `|g - y0|` is at most this fraction of its range is trained
/// and replayed with unit amplitude.
const DEGENERATE_AMPLITUDE: f64 = 1e-6;

/// Gains, time scale, basis count and integration step of a primitive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmpParams {
    pub alpha_z: f64,
    pub beta_z: f64,
    pub alpha_x: f64,
    /// Temporal scale in seconds.
    pub tau: f64,
    pub n_basis: usize,
    /// Integration step in seconds, at most `tau / 100`.
    pub dt: f64,
}

impl Default for DmpParams {
    fn default() -> Self {
        DmpParams::with_alpha_z(25.0)
    }
}

impl DmpParams {
    /// Critically damped gains (`beta_z = alpha_z / 4`) with the remaining defaults.
    pub fn with_alpha_z(alpha_z: f64) -> Self {
        DmpParams {
            alpha_z,
            beta_z: alpha_z / 4.0,
            alpha_x: 1.0,
            tau: 1.0,
            n_basis: 50,
            dt: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("alpha_z", self.alpha_z)?;
        positive("beta_z", self.beta_z)?;
        positive("alpha_x", self.alpha_x)?;
        positive("tau", self.tau)?;
        positive("dt", self.dt)?;
        if self.n_basis < 2 {
            return Err(Error::param(format!(
                "n_basis must be >= 2, got {}",
                self.n_basis
            )));
        }
        if self.dt > self.tau / 100.0 * (1.0 + 1e-12) {
            return Err(Error::param(format!(
                "dt = {} exceeds tau/100 = {}",
                self.dt,
                self.tau / 100.0
            )));
        }
        Ok(())
    }

    /// Same parameters on a new time scale. The integration step keeps its
    /// ratio to `tau` and is capped at `tau / 100`.
    pub fn rescaled(&self, tau: f64) -> DmpParams {
        let dt = (self.dt / self.tau * tau).min(tau / 100.0);
        DmpParams { tau, dt, ..*self }
    }
}

/// Phase of the canonical system at time `t`.
pub fn canonical_phase(params: &DmpParams, t: f64) -> Result<f64> {
    params.validate()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param(format!("time must be >= 0, got {t}")));
    }
    Ok((-params.alpha_x * t / params.tau).exp())
}

/// Gaussian kernels over the phase.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    centers: Vec<f64>,
    widths: Vec<f64>,
}

impl BasisSet {
    pub fn new(centers: Vec<f64>, widths: Vec<f64>) -> Result<Self> {
        if centers.len() < 2 || centers.len() != widths.len() {
            return Err(Error::param(
                "basis needs >= 2 centers and one width per center",
            ));
        }
        if centers
            .iter()
            .any(|c| !(c.is_finite() && *c > 0.0 && *c <= 1.0))
        {
            return Err(Error::param("basis centers must lie in (0, 1]"));
        }
        if centers.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::param("basis centers must be strictly decreasing"));
        }
        if widths.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::param("basis widths must be positive"));
        }
        Ok(BasisSet { centers, widths })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Raw kernel activations `exp(-h_i (x - c_i)²)`.
    pub fn activation(&self, x: f64) -> Vec<f64> {
        self.log_activation(x).map(f64::exp).collect()
    }

    fn log_activation(&self, x: f64) -> impl Iterator<Item = f64> + '_ {
        self.centers
            .iter()
            .zip(&self.widths)
            .map(move |(c, h)| -h * (x - c) * (x - c))
    }

    /// Activations divided by their sum. Computed with a max shift so that
    /// phases far past the last center do not underflow to `0/0`.
    pub fn normalized_activation(&self, x: f64) -> Vec<f64> {
        let logs: Vec<f64> = self.log_activation(x).collect();
        let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut psi: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
        let total: f64 = psi.iter().sum();
        psi.iter_mut().for_each(|p| *p /= total);
        psi
    }
}

/// Centers equally spaced in time over `[0, tau]` (log-spaced in phase);
/// widths from the gap to the next center.
pub fn place_basis(params: &DmpParams) -> Result<BasisSet> {
    if params.n_basis < 2 {
        return Err(Error::param(format!(
            "n_basis must be >= 2, got {}",
            params.n_basis
        )));
    }
    if !(params.alpha_x.is_finite() && params.alpha_x > 0.0) {
        return Err(Error::param("alpha_x must be > 0"));
    }
    let n = params.n_basis;
    let centers: Vec<f64> = (0..n)
        .map(|i| (-params.alpha_x * i as f64 / (n - 1) as f64).exp())
        .collect();
    let mut widths: Vec<f64> = centers
        .windows(2)
        .map(|w| BASIS_OVERLAP / ((w[1] - w[0]) * (w[1] - w[0])))
        .collect();
    widths.push(widths[n - 2]);
    BasisSet::new(centers, widths)
}

/// Learned forcing weights, one row per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingModel {
    pub weights: Vec<Vec<f64>>,
    /// `g_demo - y0_demo` per channel.
    pub demo_amplitude: Vec<f64>,
    /// Whether the forcing term of a channel is scaled by the goal amplitude.
    pub scaled: Vec<bool>,
}

/// Integration state of all channels.
#[derive(Debug, Clone, PartialEq)]
pub struct DmpState {
    pub y: Vec<f64>,
    pub yd: Vec<f64>,
    pub x: f64,
}

impl DmpState {
    /// At rest at `position` with the phase at its initial value.
    pub fn at_rest(position: &[f64]) -> Self {
        DmpState {
            y: position.to_vec(),
            yd: vec![0.0; position.len()],
            x: 1.0,
        }
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.y.iter().all(|v| v.is_finite())
            && self.yd.iter().all(|v| v.is_finite())
    }
}

/// A trained multi-channel movement primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct DmpModel {
    pub params: DmpParams,
    pub basis: BasisSet,
    pub forcing: ForcingModel,
    pub n_channels: usize,
    pub demo_start: Vec<f64>,
    pub demo_goal: Vec<f64>,
    pub demo_duration: f64,
}

impl DmpModel {
    /// Model with all weights zero: the bare critically damped attractor.
    pub fn untrained(params: DmpParams, n_channels: usize) -> Result<Self> {
        params.validate()?;
        if n_channels == 0 {
            return Err(Error::param("a model needs at least one channel"));
        }
        let basis = place_basis(&params)?;
        Ok(DmpModel {
            forcing: ForcingModel {
                weights: vec![vec![0.0; params.n_basis]; n_channels],
                demo_amplitude: vec![1.0; n_channels],
                scaled: vec![true; n_channels],
            },
            basis,
            params,
            n_channels,
            demo_start: vec![0.0; n_channels],
            demo_goal: vec![1.0; n_channels],
            demo_duration: params.tau,
        })
    }

    /// Checks every structural invariant; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let n = self.n_channels;
        if n == 0 {
            return Err(Error::validation("model has no channels"));
        }
        if self.basis.len() != self.params.n_basis {
            return Err(Error::validation("basis size differs from n_basis"));
        }
        // re-run BasisSet's own checks on the stored vectors
        BasisSet::new(self.basis.centers.clone(), self.basis.widths.clone())?;
        let f = &self.forcing;
        if f.weights.len() != n || f.demo_amplitude.len() != n || f.scaled.len() != n {
            return Err(Error::validation(
                "forcing model does not match channel count",
            ));
        }
        if f.weights.iter().any(|row| row.len() != self.params.n_basis) {
            return Err(Error::validation("weight row length differs from n_basis"));
        }
        if f.weights.iter().flatten().any(|w| !w.is_finite())
            || f.demo_amplitude.iter().any(|a| !a.is_finite())
        {
            return Err(Error::validation("non-finite weight or amplitude"));
        }
        if self.demo_start.len() != n || self.demo_goal.len() != n {
            return Err(Error::validation("demo start/goal dimension mismatch"));
        }
        if !(self.demo_duration.is_finite() && self.demo_duration > 0.0) {
            return Err(Error::validation("demo duration must be > 0"));
        }
        Ok(())
    }

    /// Forcing for every channel at phase `x`, given the per-channel goal
    /// amplitudes of the current motion.
    pub fn forcing_values(&self, x: f64, amplitudes: &[f64]) -> Vec<f64> {
        let psi = self.basis.normalized_activation(x);
        (0..self.n_channels)
            .map(|c| self.forcing_from_psi(&psi, x, c, amplitudes[c]))
            .collect()
    }

    fn forcing_from_psi(&self, psi: &[f64], x: f64, channel: usize, amplitude: f64) -> f64 {
        let mix: f64 = psi
            .iter()
            .zip(&self.forcing.weights[channel])
            .map(|(p, w)| p * w)
            .sum();
        let a = if self.forcing.scaled[channel] {
            amplitude
        } else {
            1.0
        };
        mix * x * a
    }
}

/// `f(x) = (Σ ψ_i w_i / Σ ψ_i) · x · A` for one channel; `A` is ignored
/// (taken as 1) when the channel is unscaled.
pub fn forcing_term(model: &DmpModel, x: f64, channel: usize, amplitude: f64) -> f64 {
    let psi = model.basis.normalized_activation(x);
    model.forcing_from_psi(&psi, x, channel, amplitude)
}

/// The forcing each demonstration sample requires, obtained by solving the
/// transformation system for `f`. The goal is the last sample.
pub fn compute_forcing_target(
    demo: &KinematicTrajectory,
    params: &DmpParams,
    channel: usize,
) -> Result<Vec<f64>> {
    if channel >= demo.channel_count() {
        return Err(Error::param(format!(
            "channel {channel} out of range ({} channels)",
            demo.channel_count()
        )));
    }
    if !(demo.dt.is_finite() && demo.dt > 0.0) {
        return Err(Error::input("demonstration grid is not uniform"));
    }
    let n = demo.len();
    let goal = demo.positions[(n - 1, channel)];
    let tau = params.tau;
    Ok((0..n)
        .map(|i| {
            let y = demo.positions[(i, channel)];
            let yd = demo.velocities[(i, channel)];
            let ydd = demo.accelerations[(i, channel)];
            tau * tau * ydd - params.alpha_z * (params.beta_z * (goal - y) - tau * yd)
        })
        .collect())
}

/// Per-kernel weighted least squares:
/// `w_i = Σ ψ_i s f / Σ ψ_i s²` with `s = x · amplitude`.
pub fn fit_lwr(
    f_target: &[f64],
    phases: &[f64],
    amplitude: f64,
    basis: &BasisSet,
) -> Result<Vec<f64>> {
    if f_target.len() != phases.len() {
        return Err(Error::input(format!(
            "{} targets but {} phases",
            f_target.len(),
            phases.len()
        )));
    }
    if phases.len() < basis.len() {
        return Err(Error::input(format!(
            "need at least {} samples, got {}",
            basis.len(),
            phases.len()
        )));
    }
    let mut numer = vec![0.0; basis.len()];
    let mut denom = vec![0.0; basis.len()];
    for (f, x) in f_target.iter().zip(phases) {
        let s = x * amplitude;
        for (i, psi) in basis.activation(*x).into_iter().enumerate() {
            numer[i] += psi * s * f;
            denom[i] += psi * s * s;
        }
    }
    Ok(numer
        .into_iter()
        .zip(denom)
        .map(|(n, d)| if d < LWR_DEGENERATE { 0.0 } else { n / d })
        .collect())
}

/// Optional overrides for [`train_with`].
#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions {
    /// Temporal scale; defaults to the demonstration duration.
    pub tau: Option<f64>,
    /// Resampling step; defaults to the mean spacing of the demonstration.
    pub sample_dt: Option<f64>,
}

/// Trains with `tau` set to the demonstration duration.
pub fn train(demo: &Trajectory, params: &DmpParams) -> Result<DmpModel> {
    train_with(demo, params, TrainOptions::default())
}

pub fn train_with(demo: &Trajectory, params: &DmpParams, opts: TrainOptions) -> Result<DmpModel> {
    params.validate()?;
    if demo.len() < 3 {
        return Err(Error::input(format!(
            "demonstration needs at least 3 samples, got {}",
            demo.len()
        )));
    }
    let duration = demo.duration();
    let tau = opts.tau.unwrap_or(duration);
    let params = params.rescaled(tau);
    params.validate()?;

    let sample_dt = opts.sample_dt.unwrap_or(duration / (demo.len() - 1) as f64);
    let uniform = if demo.uniform_step().is_some() && opts.sample_dt.is_none() {
        demo.clone()
    } else {
        resample_uniform(demo, sample_dt)?
    };
    let kin = derive_kinematics(&uniform)?;
    let basis = place_basis(&params)?;
    let phases: Vec<f64> = (0..kin.len())
        .map(|i| canonical_phase(&params, kin.time(i) - kin.t0))
        .collect::<Result<_>>()?;

    let n_channels = demo.channel_count();
    let start = demo.first_position().to_vec();
    let goal = demo.last_position().to_vec();
    let ranges = demo.channel_ranges();

    let mut weights = Vec::with_capacity(n_channels);
    let mut amplitudes = Vec::with_capacity(n_channels);
    let mut scaled = Vec::with_capacity(n_channels);
    for c in 0..n_channels {
        let amp = goal[c] - start[c];
        let is_scaled = amp.abs() > DEGENERATE_AMPLITUDE * ranges[c];
        let target = compute_forcing_target(&kin, &params, c)?;
        let fit_amp = if is_scaled { amp } else { 1.0 };
        weights.push(fit_lwr(&target, &phases, fit_amp, &basis)?);
        amplitudes.push(amp);
        scaled.push(is_scaled);
        log::debug!("channel {c}: amplitude {amp}, scaled {is_scaled}");
    }

    let model = DmpModel {
        params,
        basis,
        forcing: ForcingModel {
            weights,
            demo_amplitude: amplitudes,
            scaled,
        },
        n_channels,
        demo_start: start,
        demo_goal: goal,
        demo_duration: duration,
    };
    model.validate()?;
    Ok(model)
}

/// Right-hand side of the coupled transformation/canonical system for one
/// rollout (fixed goal, amplitude and time scale).
struct Dynamics<'a> {
    model: &'a DmpModel,
    tau: f64,
    goal: &'a [f64],
    amplitude: Vec<f64>,
}

impl Dynamics<'_> {
    fn derivative(&self, y: &[f64], yd: &[f64], x: f64) -> (Vec<f64>, Vec<f64>, f64) {
        let p = &self.model.params;
        let f = self.model.forcing_values(x, &self.amplitude);
        let tau2 = self.tau * self.tau;
        let ydd = (0..y.len())
            .map(|c| {
                (p.alpha_z * (p.beta_z * (self.goal[c] - y[c]) - self.tau * yd[c]) + f[c]) / tau2
            })
            .collect();
        (yd.to_vec(), ydd, -p.alpha_x * x / self.tau)
    }

    fn rk4(&self, s: &DmpState, h: f64) -> DmpState {
        let offset = |base: &[f64], d: &[f64], k: f64| -> Vec<f64> {
            base.iter().zip(d).map(|(b, d)| b + k * d).collect()
        };
        let (k1y, k1v, k1x) = self.derivative(&s.y, &s.yd, s.x);
        let (k2y, k2v, k2x) = self.derivative(
            &offset(&s.y, &k1y, h / 2.0),
            &offset(&s.yd, &k1v, h / 2.0),
            s.x + h / 2.0 * k1x,
        );
        let (k3y, k3v, k3x) = self.derivative(
            &offset(&s.y, &k2y, h / 2.0),
            &offset(&s.yd, &k2v, h / 2.0),
            s.x + h / 2.0 * k2x,
        );
        let (k4y, k4v, k4x) = self.derivative(
            &offset(&s.y, &k3y, h),
            &offset(&s.yd, &k3v, h),
            s.x + h * k3x,
        );
        let combine = |base: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
            (0..base.len())
                .map(|i| base[i] + h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
                .collect()
        };
        DmpState {
            y: combine(&s.y, &k1y, &k2y, &k3y, &k4y),
            yd: combine(&s.yd, &k1v, &k2v, &k3v, &k4v),
            x: s.x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        }
    }
}

fn check_dims(model: &DmpModel, name: &str, v: &[f64]) -> Result<()> {
    if v.len() != model.n_channels {
        return Err(Error::param(format!(
            "{name} has {} entries, model has {} channels",
            v.len(),
            model.n_channels
        )));
    }
    if v.iter().any(|e| !e.is_finite()) {
        return Err(Error::param(format!("{name} is not finite")));
    }
    Ok(())
}

fn amplitudes(goal: &[f64], start: &[f64]) -> Vec<f64> {
    goal.iter().zip(start).map(|(g, s)| g - s).collect()
}

/// One RK4 step of `model.params.dt` with the model's own time scale.
pub fn step(model: &DmpModel, state: &DmpState, goal: &[f64], start: &[f64]) -> Result<DmpState> {
    check_dims(model, "goal", goal)?;
    check_dims(model, "start", start)?;
    if state.y.len() != model.n_channels || state.yd.len() != model.n_channels {
        return Err(Error::param("state dimension differs from the model"));
    }
    if !state.is_finite() || !(state.x > 0.0 && state.x <= 1.0) {
        return Err(Error::Numeric {
            step: 0,
            message: "state is not finite or phase is outside (0, 1]".into(),
        });
    }
    let dynamics = Dynamics {
        model,
        tau: model.params.tau,
        goal,
        amplitude: amplitudes(goal, start),
    };
    let next = dynamics.rk4(state, model.params.dt);
    if !next.is_finite() {
        return Err(Error::Numeric {
            step: 1,
            message: "integration produced a non-finite state".into(),
        });
    }
    Ok(next)
}

/// Integrates from rest at `start` towards `goal` on time scale `tau` for
/// `duration` seconds. The step is the model's `dt` rescaled to `tau`, so a
/// rollout at `k·tau` visits the same states at `k`-times-stretched instants.
pub fn rollout(
    model: &DmpModel,
    start: &[f64],
    goal: &[f64],
    tau: f64,
    duration: f64,
) -> Result<Trajectory> {
    check_dims(model, "start", start)?;
    check_dims(model, "goal", goal)?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::param(format!("tau must be > 0, got {tau}")));
    }
    if !(duration.is_finite() && duration >= tau * (1.0 - 1e-12)) {
        return Err(Error::param(format!(
            "duration {duration} must be >= tau {tau}"
        )));
    }
    let dt = model.params.dt * tau / model.params.tau;
    let steps = ((duration / dt).round() as usize).max(1);
    let dynamics = Dynamics {
        model,
        tau,
        goal,
        amplitude: amplitudes(goal, start),
    };
    let channels = model.n_channels;
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity((steps + 1) * channels);
    let mut state = DmpState::at_rest(start);
    times.push(0.0);
    values.extend_from_slice(&state.y);
    for k in 1..=steps {
        state = dynamics.rk4(&state, dt);
        if !state.is_finite() {
            return Err(Error::Numeric {
                step: k,
                message: "integration produced a non-finite state".into(),
            });
        }
        times.push(k as f64 * dt);
        values.extend_from_slice(&state.y);
    }
    Trajectory::from_flat(channels, times, values)
}

/// Rollout with the model's own time scale for `1.5 · tau`.
pub fn rollout_default(model: &DmpModel, start: &[f64], goal: &[f64]) -> Result<Trajectory> {
    let tau = model.params.tau;
    rollout(model, start, goal, tau, 1.5 * tau)
}

/// Replays the demonstration (own start, goal and tau) over its duration and
/// returns the per-channel RMSE against the demo at the demo's timestamps.
pub fn reproduction_rmse(model: &DmpModel, demo: &Trajectory) -> Result<Vec<f64>> {
    let tau = model.params.tau;
    let replay = rollout(
        model,
        &model.demo_start,
        &model.demo_goal,
        tau,
        tau.max(demo.duration()),
    )?;
    let shifted = demo.shifted(-demo.start_time())?;
    let resampled = replay.sample_at(shifted.times())?;
    crate::trajectory::rmse(&shifted, &resampled)
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ModelDocument {
    schema: String,
    params: DmpParams,
    n_channels: usize,
    centers: Vec<f64>,
    widths: Vec<f64>,
    weights: Vec<Vec<f64>>,
    amplitudes: Vec<f64>,
    scaled: Vec<bool>,
    demo_start: Vec<f64>,
    demo_goal: Vec<f64>,
    demo_duration: f64,
}

impl From<&DmpModel> for ModelDocument {
    fn from(m: &DmpModel) -> Self {
        ModelDocument {
            schema: MODEL_SCHEMA.to_string(),
            params: m.params,
            n_channels: m.n_channels,
            centers: m.basis.centers.clone(),
            widths: m.basis.widths.clone(),
            weights: m.forcing.weights.clone(),
            amplitudes: m.forcing.demo_amplitude.clone(),
            scaled: m.forcing.scaled.clone(),
            demo_start: m.demo_start.clone(),
            demo_goal: m.demo_goal.clone(),
            demo_duration: m.demo_duration,
        }
    }
}

impl TryFrom<ModelDocument> for DmpModel {
    type Error = Error;

    fn try_from(doc: ModelDocument) -> Result<Self> {
        if doc.schema != MODEL_SCHEMA {
            return Err(Error::Version {
                found: doc.schema,
                expected: MODEL_SCHEMA.into(),
            });
        }
        if doc.centers.len() != doc.widths.len() {
            return Err(Error::format("centers and widths differ in length"));
        }
        let model = DmpModel {
            params: doc.params,
            basis: BasisSet {
                centers: doc.centers,
                widths: doc.widths,
            },
            forcing: ForcingModel {
                weights: doc.weights,
                demo_amplitude: doc.amplitudes,
                scaled: doc.scaled,
            },
            n_channels: doc.n_channels,
            demo_start: doc.demo_start,
            demo_goal: doc.demo_goal,
            demo_duration: doc.demo_duration,
        };
        model.validate()?;
        Ok(model)
    }
}

impl DmpModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelDocument::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::format(e.to_string()))?;
        Self::from_value(value)
    }

    pub(crate) fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(ModelDocument::from(self)).expect("model serializes")
    }

    pub(crate) fn from_value(value: serde_json::Value) -> Result<Self> {
        // check the schema tag first so a version bump is reported as such
        match value.get("schema").and_then(|s| s.as_str()) {
            Some(MODEL_SCHEMA) => {}
            Some(other) => {
                return Err(Error::Version {
                    found: other.to_string(),
                    expected: MODEL_SCHEMA.into(),
                })
            }
            None => return Err(Error::format("model document has no schema field")),
        }
        let doc: ModelDocument =
            serde_json::from_value(value).map_err(|e| Error::format(e.to_string()))?;
        doc.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::minimum_jerk;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const E_INV: f64 = 0.367_879_441_171_442_33;

    fn params(tau: f64) -> DmpParams {
        DmpParams::default().rescaled(tau)
    }

    #[test]
    fn phase_examples() {
        let p = DmpParams::default();
        assert_eq!(canonical_phase(&p, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(canonical_phase(&p, 1.0).unwrap(), E_INV, epsilon = 1e-15);
        let p2 = params(2.0);
        assert_abs_diff_eq!(canonical_phase(&p2, 2.0).unwrap(), E_INV, epsilon = 1e-15);
        assert!(canonical_phase(&p, -0.1).is_err());
        let bad = DmpParams {
            alpha_x: 0.0,
            ..DmpParams::default()
        };
        assert!(matches!(canonical_phase(&bad, 0.5), Err(Error::Param(_))));
    }

    #[test]
    fn params_domain() {
        assert!(DmpParams::default().validate().is_ok());
        assert_eq!(DmpParams::default().beta_z, 6.25);
        for bad in [
            DmpParams {
                n_basis: 1,
                ..DmpParams::default()
            },
            DmpParams {
                dt: 0.02,
                ..DmpParams::default()
            },
            DmpParams {
                beta_z: -1.0,
                ..DmpParams::default()
            },
            DmpParams {
                tau: f64::NAN,
                ..DmpParams::default()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn basis_two_kernels() {
        let p = DmpParams {
            n_basis: 2,
            ..DmpParams::default()
        };
        let b = place_basis(&p).unwrap();
        assert_eq!(b.centers()[0], 1.0);
        assert_abs_diff_eq!(b.centers()[1], E_INV, epsilon = 1e-15);
        let h = 0.5 / ((1.0 - E_INV) * (1.0 - E_INV));
        assert_abs_diff_eq!(b.widths()[0], h, epsilon = 1e-12);
        assert_abs_diff_eq!(b.widths()[1], h, epsilon = 1e-12);
        assert_abs_diff_eq!(h, 1.2512, epsilon = 5e-4);
        let p1 = DmpParams {
            n_basis: 1,
            ..DmpParams::default()
        };
        assert!(place_basis(&p1).is_err());
    }

    #[test]
    fn activation_examples() {
        let b = place_basis(&DmpParams::default()).unwrap();
        for (i, c) in b.centers().iter().enumerate() {
            assert_eq!(b.activation(*c)[i], 1.0);
        }
        let single = BasisSet {
            centers: vec![0.5],
            widths: vec![4.0],
        };
        assert_abs_diff_eq!(single.activation(1.0)[0], E_INV, epsilon = 1e-15);
        for x in [1.0, 0.5, 0.37, 0.1, 1e-3] {
            let psi = b.normalized_activation(x);
            assert!(psi.iter().all(|p| p.is_finite() && *p >= 0.0));
            assert_abs_diff_eq!(psi.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        assert!(b.activation(0.9).iter().sum::<f64>() > 0.0);
    }

    #[test]
    fn forcing_examples() {
        let mut m = DmpModel::untrained(DmpParams::default(), 1).unwrap();
        for x in [1.0, 0.6, 0.2] {
            assert_eq!(forcing_term(&m, x, 0, 3.0), 0.0);
        }
        // single kernel: the normalized mixture is its weight
        m.basis = BasisSet {
            centers: vec![0.8],
            widths: vec![4.0],
        };
        m.forcing.weights[0] = vec![2.0];
        assert_abs_diff_eq!(
            forcing_term(&m, 0.8, 0, 3.0),
            2.0 * 0.8 * 3.0,
            epsilon = 1e-12
        );
        m.forcing.scaled[0] = false;
        assert_eq!(
            forcing_term(&m, 0.8, 0, 3.0),
            forcing_term(&m, 0.8, 0, -17.0)
        );
    }

    #[test]
    fn forcing_target_zero_at_equilibrium() {
        let demo = Trajectory::new(
            (0..20).map(|i| i as f64 * 0.05).collect(),
            vec![vec![0.7]; 20],
        )
        .unwrap();
        let kin = derive_kinematics(&demo).unwrap();
        let f = compute_forcing_target(&kin, &params(demo.duration()), 0).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn forcing_target_recovers_rolled_out_model() {
        // model with a known smooth weight profile, rolled out at a fine step
        let mut model = DmpModel::untrained(DmpParams::default(), 1).unwrap();
        model.forcing.weights[0] = (0..50).map(|i| 40.0 * (i as f64 * 0.2).sin()).collect();
        let traj = rollout(&model, &[0.0], &[1.0], 1.0, 1.0).unwrap();
        let kin = derive_kinematics(&traj).unwrap();
        // goal of the target equals the last sample, which differs from the
        // true goal, so use the true goal explicitly here
        let p = &model.params;
        let n = kin.len();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 2..n - 2 {
            let y = kin.positions[(i, 0)];
            let f = p.tau * p.tau * kin.accelerations[(i, 0)]
                - p.alpha_z * (p.beta_z * (1.0 - y) - p.tau * kin.velocities[(i, 0)]);
            let x = canonical_phase(p, kin.time(i)).unwrap();
            let expected = forcing_term(&model, x, 0, 1.0);
            worst = worst.max((f - expected).abs());
            scale = scale.max(expected.abs());
        }
        assert!(worst <= 1e-3 * scale, "worst {worst} scale {scale}");
    }

    #[test]
    fn forcing_target_of_free_response_is_small() {
        let (az, bz, g, y0) = (25.0, 6.25, 1.0, 0.0);
        let n = 1001;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * 1e-3).collect();
        let rows = times
            .iter()
            .map(|t| vec![g + (y0 - g) * (1.0 + az * t / 2.0) * (-az * t / 2.0).exp()])
            .collect();
        let demo = Trajectory::new(times, rows).unwrap();
        let kin = derive_kinematics(&demo).unwrap();
        let f = compute_forcing_target(&kin, &params(1.0), 0).unwrap();
        let bound = 1e-3 * az * bz * (g - y0);
        // the one-sided stencils at the two ends are first order in
        // acceleration; judge the interior
        let worst = f[2..n - 2].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < bound, "worst {worst} bound {bound}");
    }

    #[test]
    fn lwr_zero_target_gives_zero_weights() {
        let b = place_basis(&DmpParams::default()).unwrap();
        let phases: Vec<f64> = (0..200).map(|i| (-(i as f64) / 199.0).exp()).collect();
        let w = fit_lwr(&vec![0.0; 200], &phases, 2.0, &b).unwrap();
        assert!(w.iter().all(|v| *v == 0.0));
        assert!(fit_lwr(&[0.0; 3], &phases[..3], 1.0, &b).is_err());
        assert!(fit_lwr(&[0.0; 60], &phases[..61], 1.0, &b).is_err());
    }

    #[test]
    fn lwr_degenerate_basis_gets_zero_weight() {
        let b = place_basis(&DmpParams::default()).unwrap();
        let phases: Vec<f64> = (0..100).map(|i| 0.9 + 0.1 * i as f64 / 99.0).collect();
        let w = fit_lwr(&vec![1.0; 100], &phases, 0.0, &b).unwrap();
        assert!(w.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn lwr_recovers_known_weights_from_pointwise_targets() {
        // one target per kernel, located at its own center and built from a
        // constant weight profile: every local regression sees w* exactly
        let b = place_basis(&DmpParams::default()).unwrap();
        let phases: Vec<f64> = (0..2000).map(|i| (-(i as f64) / 1999.0).exp()).collect();
        let amp = 1.7;
        let w_star = 3.25;
        let target: Vec<f64> = phases.iter().map(|x| w_star * x * amp).collect();
        let w = fit_lwr(&target, &phases, amp, &b).unwrap();
        for wi in w {
            assert_abs_diff_eq!(wi, w_star, epsilon = 1e-6);
        }
    }

    #[test]
    fn train_reproduces_minimum_jerk() {
        let demo = minimum_jerk(&[0.0], &[1.0], 1.0, 101).unwrap();
        let model = train(&demo, &DmpParams::default()).unwrap();
        assert_eq!(model.params.tau, 1.0);
        assert!(model.forcing.scaled[0]);
        let err = reproduction_rmse(&model, &demo).unwrap();
        assert!(err[0] <= 0.02, "rmse {}", err[0]);
    }

    #[test]
    fn train_on_free_response_gives_small_weights() {
        let (az, bz) = (25.0, 6.25);
        let times: Vec<f64> = (0..1001).map(|i| i as f64 * 1e-3).collect();
        let rows = times
            .iter()
            .map(|t| vec![1.0 - (1.0 + az * t / 2.0) * (-az * t / 2.0).exp()])
            .collect();
        let demo = Trajectory::new(times, rows).unwrap();
        let model = train(&demo, &DmpParams::default()).unwrap();
        let worst = model.forcing.weights[0]
            .iter()
            .fold(0.0f64, |m, w| m.max(w.abs()));
        assert!(worst <= 1e-3 * az * bz, "max |w| = {worst}");
    }

    #[test]
    fn looped_demo_trains_unscaled() {
        let times: Vec<f64> = (0..101).map(|i| i as f64 * 0.01).collect();
        let rows = times
            .iter()
            .map(|t| {
                let s: f64 = *t;
                vec![0.3 + 256.0 * s.powi(4) * (1.0 - s).powi(4)]
            })
            .collect();
        let demo = Trajectory::new(times, rows).unwrap();
        let model = train(&demo, &DmpParams::default()).unwrap();
        assert!(!model.forcing.scaled[0]);
        let out = rollout_default(&model, &[0.3], &[0.3]).unwrap();
        assert!(out.last_position()[0].is_finite());
        assert!((out.last_position()[0] - 0.3).abs() <= 1e-2);
    }

    #[test]
    fn step_examples() {
        let m = DmpModel::untrained(DmpParams::default(), 2).unwrap();
        let s = DmpState::at_rest(&[1.0, -2.0]);
        let next = step(&m, &s, &[1.0, -2.0], &[1.0, -2.0]).unwrap();
        for c in 0..2 {
            assert!((next.y[c] - s.y[c]).abs() < 1e-12);
        }
        assert!(next.x < s.x);

        let s = DmpState::at_rest(&[0.0, 0.0]);
        let next = step(&m, &s, &[1.0, -1.0], &[0.0, 0.0]).unwrap();
        assert!(next.y[0] > 0.0 && next.y[1] < 0.0);

        let bad = DmpState {
            y: vec![f64::NAN, 0.0],
            yd: vec![0.0, 0.0],
            x: 1.0,
        };
        assert!(matches!(
            step(&m, &bad, &[0.0, 0.0], &[0.0, 0.0]),
            Err(Error::Numeric { .. })
        ));
        assert!(step(&m, &s, &[0.0], &[0.0, 0.0]).is_err());

        let mut state = DmpState::at_rest(&[0.0, 0.0]);
        for _ in 0..2000 {
            let next = step(&m, &state, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
            assert!(next.x < state.x && next.x > 0.0);
            state = next;
        }
    }

    fn free_response(t: f64, tau: f64, az: f64, y0: f64, g: f64) -> f64 {
        g + (y0 - g) * (1.0 + az * t / (2.0 * tau)) * (-az * t / (2.0 * tau)).exp()
    }

    #[test]
    fn untrained_rollout_matches_closed_form() {
        let m = DmpModel::untrained(DmpParams::default(), 1).unwrap();
        let out = rollout(&m, &[0.0], &[1.0], 1.0, 1.5).unwrap();
        assert_eq!(out.len(), 1501);
        assert!((out.last_position()[0] - 1.0).abs() <= 1e-2);
        for (i, t) in out.times().iter().enumerate() {
            let exact = free_response(*t, 1.0, 25.0, 0.0, 1.0);
            assert!((out.position(i)[0] - exact).abs() <= 1e-4);
        }
        let flat = rollout(&m, &[0.4], &[0.4], 1.0, 1.5).unwrap();
        assert!(flat.channel(0).iter().all(|v| (*v - 0.4).abs() <= 1e-12));
    }

    #[test]
    fn rollout_argument_errors() {
        let m = DmpModel::untrained(DmpParams::default(), 1).unwrap();
        assert!(rollout(&m, &[0.0], &[1.0], 1.0, 0.5).is_err());
        assert!(rollout(&m, &[0.0, 1.0], &[1.0], 1.0, 1.5).is_err());
        assert!(rollout(&m, &[0.0], &[1.0], 0.0, 1.5).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let demo = minimum_jerk(&[0.0, 1.0], &[1.0, 0.5], 0.8, 81).unwrap();
        let model = train(&demo, &DmpParams::default()).unwrap();
        let text = model.to_json();
        assert!(text.contains("\"schema\": \"lfd_dmp_model/1\""));
        let back = DmpModel::from_json(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_json(), text);
        let bumped = text.replace("lfd_dmp_model/1", "lfd_dmp_model/7");
        assert!(matches!(
            DmpModel::from_json(&bumped),
            Err(Error::Version { .. })
        ));
        assert!(matches!(DmpModel::from_json("{"), Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn phase_law(alpha_x in 0.1f64..10.0, tau in 0.05f64..20.0, frac in 0.0f64..10.0) {
            let p = DmpParams { alpha_x, ..DmpParams::default() }.rescaled(tau);
            let t = frac * tau;
            let x = canonical_phase(&p, t).unwrap();
            prop_assert!((x - (-alpha_x * t / tau).exp()).abs() <= 1e-9);
        }

        #[test]
        fn forcing_bounded_by_phase(seed in proptest::collection::vec(-50.0f64..50.0, 50), x in 1e-4f64..1.0, a in -3.0f64..3.0) {
            let mut m = DmpModel::untrained(DmpParams::default(), 1).unwrap();
            m.forcing.weights[0] = seed.clone();
            let wmax = seed.iter().fold(0.0f64, |acc, w| acc.max(w.abs()));
            let f = forcing_term(&m, x, 0, a);
            prop_assert!(f.abs() <= wmax * x * a.abs() * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn no_overshoot_without_forcing(y0 in -5.0f64..5.0, g in -5.0f64..5.0) {
            let m = DmpModel::untrained(DmpParams::default(), 1).unwrap();
            let out = rollout(&m, &[y0], &[g], 1.0, 1.5).unwrap();
            let tol = 1e-6 * (g - y0).abs();
            for v in out.channel(0) {
                if g >= y0 { prop_assert!(v <= g + tol); } else { prop_assert!(v >= g - tol); }
            }
        }
    }
}
