//! Recorded and planned motions: CSV ingestion, uniform resampling,
//! finite-difference kinematics, smoothing and comparison.
//!
//! A [`Trajectory`] is a strictly time-ordered list of samples, each holding
//! one position per channel (joint angles, Cartesian coordinates, whatever
//! space the demonstration was recorded in).

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative tolerance used to decide that two timestamps coincide.
const TIME_EPS: f64 = 1e-9;

/// Relative tolerance on sample spacing for a grid to count as uniform.
const UNIFORM_EPS: f64 = 1e-6;

/// Timestamped multi-channel position samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    channels: usize,
    times: Vec<f64>,
    // row-major, `times.len() * channels`
    values: Vec<f64>,
}

impl Trajectory {
    /// Builds a trajectory from timestamps and one row of positions per timestamp.
    pub fn new(times: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let channels = rows.first().map(Vec::len).unwrap_or(0);
        if rows.len() != times.len() {
            return Err(Error::input(format!(
                "{} timestamps but {} sample rows",
                times.len(),
                rows.len()
            )));
        }
        let mut values = Vec::with_capacity(rows.len() * channels);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != channels {
                return Err(Error::input(format!(
                    "sample {i} has {} channels, expected {channels}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(channels, times, values)
    }

    /// Builds a trajectory from a row-major value buffer.
    pub fn from_flat(channels: usize, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::input("trajectory needs at least one channel"));
        }
        if times.len() < 2 {
            return Err(Error::input(format!(
                "trajectory needs at least 2 samples, got {}",
                times.len()
            )));
        }
        if values.len() != times.len() * channels {
            return Err(Error::input("value buffer does not match sample count"));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::input(format!("non-finite timestamp at sample {i}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "non-finite position at sample {}",
                i / channels
            )));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::input(format!(
                "non-increasing timestamp at sample {}",
                i + 1
            )));
        }
        Ok(Trajectory {
            channels,
            times,
            values,
        })
    }

    pub fn channel_count(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// Always false: a valid trajectory holds at least two samples.
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Positions of sample `i`.
    pub fn position(&self, i: usize) -> &[f64] {
        &self.values[i * self.channels..(i + 1) * self.channels]
    }

    pub fn first_position(&self) -> &[f64] {
        self.position(0)
    }

    pub fn last_position(&self) -> &[f64] {
        self.position(self.len() - 1)
    }

    /// One channel as a contiguous series.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    /// Per-channel `max - min`.
    pub fn channel_ranges(&self) -> Vec<f64> {
        (0..self.channels)
            .map(|c| {
                let (lo, hi) = self
                    .channel(c)
                    .into_iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    });
                hi - lo
            })
            .collect()
    }

    /// The common sample spacing, if the grid is uniform.
    pub fn uniform_step(&self) -> Option<f64> {
        let dt = self.duration() / (self.len() - 1) as f64;
        self.times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= UNIFORM_EPS * dt)
            .then_some(dt)
    }

    /// Linear interpolation of all channels at time `t`, clamped to the
    /// recorded span. Timestamps that coincide with a sample return that
    /// sample verbatim.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let n = self.len();
        let tol = TIME_EPS * self.duration() / (n - 1) as f64;
        if t <= self.times[0] + tol {
            return self.position(0).to_vec();
        }
        if t >= self.times[n - 1] - tol {
            return self.position(n - 1).to_vec();
        }
        // first index with time > t; 1 <= hi <= n-1
        let hi = self.times.partition_point(|&s| s <= t);
        let lo = hi - 1;
        if t - self.times[lo] <= tol {
            return self.position(lo).to_vec();
        }
        if self.times[hi] - t <= tol {
            return self.position(hi).to_vec();
        }
        let s = (t - self.times[lo]) / (self.times[hi] - self.times[lo]);
        self.position(lo)
            .iter()
            .zip(self.position(hi))
            .map(|(a, b)| a + s * (b - a))
            .collect()
    }

    /// Interpolates the trajectory onto the given strictly increasing times.
    pub fn sample_at(&self, times: &[f64]) -> Result<Trajectory> {
        let mut values = Vec::with_capacity(times.len() * self.channels);
        for &t in times {
            values.extend(self.interpolate(t));
        }
        Trajectory::from_flat(self.channels, times.to_vec(), values)
    }

    /// Shifts every timestamp by `offset`.
    pub fn shifted(&self, offset: f64) -> Result<Trajectory> {
        Trajectory::from_flat(
            self.channels,
            self.times.iter().map(|t| t + offset).collect(),
            self.values.clone(),
        )
    }
}

/// Uniformly sampled positions with finite-difference velocity and
/// acceleration estimates. Matrices are `[n_samples × channels]`.
#[derive(Debug, Clone)]
pub struct KinematicTrajectory {
    pub t0: f64,
    pub dt: f64,
    pub positions: DMatrix<f64>,
    pub velocities: DMatrix<f64>,
    pub accelerations: DMatrix<f64>,
}

impl KinematicTrajectory {
    pub fn len(&self) -> usize {
        self.positions.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.nrows() == 0
    }

    pub fn channel_count(&self) -> usize {
        self.positions.ncols()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }
}

/// Parses the `t,q0,…,q{n-1}` CSV format.
pub fn parse_trajectory(text: &str) -> Result<Trajectory> {
    let mut lines = text.split('\n').enumerate().map(|(i, l)| {
        let l = l.strip_suffix('\r').unwrap_or(l);
        (i + 1, l)
    });
    let (_, header) = lines
        .next()
        .filter(|(_, h)| !h.trim().is_empty())
        .ok_or_else(|| Error::input_at(1, "missing header"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 2 || columns[0] != "t" {
        return Err(Error::input_at(
            1,
            "header must be `t,q0,q1,...` with at least one channel",
        ));
    }
    for (c, name) in columns[1..].iter().enumerate() {
        if *name != format!("q{c}") {
            return Err(Error::input_at(
                1,
                format!("unexpected column name {name:?}, expected \"q{c}\""),
            ));
        }
    }
    let channels = columns.len() - 1;

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut trailing_blank: Option<usize> = None;
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            trailing_blank.get_or_insert(line_no);
            continue;
        }
        if let Some(blank) = trailing_blank {
            return Err(Error::input_at(blank, "empty row"));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != channels + 1 {
            return Err(Error::input_at(
                line_no,
                format!("expected {} columns, found {}", channels + 1, fields.len()),
            ));
        }
        let mut row = Vec::with_capacity(fields.len());
        for field in fields {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::input_at(line_no, format!("malformed number {:?}", field.trim()))
            })?;
            if !v.is_finite() {
                return Err(Error::input_at(line_no, "non-finite value"));
            }
            row.push(v);
        }
        let t = row[0];
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::input_at(line_no, "non-increasing timestamp"));
            }
        }
        times.push(t);
        values.extend_from_slice(&row[1..]);
    }
    Trajectory::from_flat(channels, times, values)
}

/// Serializes to CSV. Numbers use the shortest representation that parses
/// back to the identical `f64`.
pub fn write_trajectory(traj: &Trajectory) -> String {
    let mut out = String::from("t");
    for c in 0..traj.channel_count() {
        let _ = write!(out, ",q{c}");
    }
    out.push('\n');
    for (i, t) in traj.times().iter().enumerate() {
        let _ = write!(out, "{t}");
        for v in traj.position(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Linear resampling onto `t0, t0+dt, …`. The last grid point is clamped to
/// the final timestamp, so both endpoints are kept exactly; when the
/// duration is not a multiple of `dt` the final interval is shorter.
pub fn resample_uniform(traj: &Trajectory, dt: f64) -> Result<Trajectory> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param(format!("resample step must be > 0, got {dt}")));
    }
    let duration = traj.duration();
    if dt >= duration {
        return Err(Error::param(format!(
            "resample step {dt} must be smaller than the duration {duration}"
        )));
    }
    let t0 = traj.start_time();
    let t_end = traj.end_time();
    let whole = (duration / dt + TIME_EPS).floor() as usize;
    let mut grid: Vec<f64> = (0..=whole).map(|k| t0 + k as f64 * dt).collect();
    let last = grid.len() - 1;
    if (t_end - grid[last]).abs() <= TIME_EPS * dt || grid[last] > t_end {
        grid[last] = t_end;
    } else {
        grid.push(t_end);
    }
    traj.sample_at(&grid)
}

fn differentiate(series: &[f64], dt: f64) -> Vec<f64> {
    let n = series.len();
    let mut out = Vec::with_capacity(n);
    out.push((-3.0 * series[0] + 4.0 * series[1] - series[2]) / (2.0 * dt));
    for i in 1..n - 1 {
        out.push((series[i + 1] - series[i - 1]) / (2.0 * dt));
    }
    out.push((3.0 * series[n - 1] - 4.0 * series[n - 2] + series[n - 3]) / (2.0 * dt));
    out
}

/// Second-order finite differences (central inside, one-sided at the ends),
/// applied once for velocity and again for acceleration.
pub fn derive_kinematics(traj: &Trajectory) -> Result<KinematicTrajectory> {
    if traj.len() < 3 {
        return Err(Error::input(format!(
            "differentiation needs at least 3 samples, got {}",
            traj.len()
        )));
    }
    let dt = traj
        .uniform_step()
        .ok_or_else(|| Error::input("trajectory is not uniformly sampled"))?;
    let n = traj.len();
    let channels = traj.channel_count();
    let mut positions = DMatrix::zeros(n, channels);
    let mut velocities = DMatrix::zeros(n, channels);
    let mut accelerations = DMatrix::zeros(n, channels);
    for c in 0..channels {
        let q = traj.channel(c);
        let v = differentiate(&q, dt);
        let a = differentiate(&v, dt);
        for i in 0..n {
            positions[(i, c)] = q[i];
            velocities[(i, c)] = v[i];
            accelerations[(i, c)] = a[i];
        }
    }
    Ok(KinematicTrajectory {
        t0: traj.start_time(),
        dt,
        positions,
        velocities,
        accelerations,
    })
}

/// Centered moving average; the window shrinks (truncates) at the boundaries.
pub fn smooth(traj: &Trajectory, window: usize) -> Result<Trajectory> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::param(format!(
            "smoothing window must be odd and >= 1, got {window}"
        )));
    }
    let n = traj.len();
    if window > n {
        return Err(Error::param(format!(
            "smoothing window {window} exceeds sample count {n}"
        )));
    }
    if window == 1 {
        return Ok(traj.clone());
    }
    let half = window / 2;
    let channels = traj.channel_count();
    let mut values = vec![0.0; n * channels];
    for c in 0..channels {
        let q = traj.channel(c);
        for i in 0..n {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let mean = q[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
            values[i * channels + c] = mean;
        }
    }
    Trajectory::from_flat(channels, traj.times().to_vec(), values)
}

/// Per-channel root-mean-square difference of two trajectories on the same grid.
pub fn rmse(a: &Trajectory, b: &Trajectory) -> Result<Vec<f64>> {
    if a.channel_count() != b.channel_count() {
        return Err(Error::input(format!(
            "channel count mismatch: {} vs {}",
            a.channel_count(),
            b.channel_count()
        )));
    }
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "sample count mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    for (i, (ta, tb)) in a.times().iter().zip(b.times()).enumerate() {
        if (ta - tb).abs() > TIME_EPS * ta.abs().max(1.0) {
            return Err(Error::input(format!(
                "timestamps differ at sample {i}: {ta} vs {tb}"
            )));
        }
    }
    let n = a.len() as f64;
    Ok((0..a.channel_count())
        .map(|c| {
            let sq: f64 = (0..a.len())
                .map(|i| {
                    let d = a.position(i)[c] - b.position(i)[c];
                    d * d
                })
                .sum();
            (sq / n).sqrt()
        })
        .collect())
}

/// Minimum-jerk point-to-point motion sampled at `samples` uniform instants
/// over `[0, duration]`. Starts and ends at rest with zero acceleration.
pub fn minimum_jerk(
    start: &[f64],
    goal: &[f64],
    duration: f64,
    samples: usize,
) -> Result<Trajectory> {
    if start.len() != goal.len() {
        return Err(Error::param("start and goal dimensions differ"));
    }
    if !(duration.is_finite() && duration > 0.0) || samples < 2 {
        return Err(Error::param(
            "minimum-jerk needs duration > 0 and >= 2 samples",
        ));
    }
    let times: Vec<f64> = (0..samples)
        .map(|i| duration * i as f64 / (samples - 1) as f64)
        .collect();
    let rows = times
        .iter()
        .map(|t| {
            let s = t / duration;
            let blend = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
            start
                .iter()
                .zip(goal)
                .map(|(a, b)| a + (b - a) * blend)
                .collect()
        })
        .collect();
    Trajectory::new(times, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn uniform(values: &[f64], dt: f64) -> Trajectory {
        let times = (0..values.len()).map(|i| i as f64 * dt).collect();
        Trajectory::new(times, values.iter().map(|v| vec![*v]).collect()).unwrap()
    }

    #[test]
    fn parses_simple_csv() {
        let t = parse_trajectory("t,q0\n0,0\n0.5,1\n1,2").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.channel_count(), 1);
        assert_eq!(t.position(2), &[2.0]);
    }

    #[test]
    fn repeated_timestamp_names_line() {
        let err = parse_trajectory("t,q0\n0,0\n0.5,1\n0.5,2\n").unwrap_err();
        assert_eq!(err.to_string(), "non-increasing timestamp at line 4");
    }

    #[test]
    fn column_mismatch_and_garbage_rejected() {
        let err = parse_trajectory("t,q0,q1\n0,0,0\n1,2\n").unwrap_err();
        assert!(matches!(err, Error::Input { line: Some(3), .. }), "{err}");
        let err = parse_trajectory("t,q0\n0,0\n1,abc\n").unwrap_err();
        assert!(matches!(err, Error::Input { line: Some(3), .. }), "{err}");
        let err = parse_trajectory("time,q0\n0,0\n1,1\n").unwrap_err();
        assert!(matches!(err, Error::Input { line: Some(1), .. }), "{err}");
        let err = parse_trajectory("t,q0\n0,0\n\n1,1\n").unwrap_err();
        assert!(matches!(err, Error::Input { line: Some(3), .. }), "{err}");
        assert!(parse_trajectory("t\n0\n1\n").is_err());
        assert!(parse_trajectory("").is_err());
    }

    #[test]
    fn writes_header_and_rows() {
        let t = parse_trajectory("t,q0,q1\n0,0,1\n0.5,1,1\n1,2,1\n").unwrap();
        let text = write_trajectory(&t);
        assert_eq!(text, "t,q0,q1\n0,0,1\n0.5,1,1\n1,2,1\n");
    }

    #[test]
    fn empty_channel_list_rejected() {
        assert!(Trajectory::new(vec![0.0, 1.0], vec![vec![], vec![]]).is_err());
        assert!(Trajectory::new(vec![0.0], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn resample_hand_example() {
        let t = Trajectory::new(vec![0.0, 1.0], vec![vec![0.0], vec![2.0]]).unwrap();
        let r = resample_uniform(&t, 0.5).unwrap();
        assert_eq!(r.times(), &[0.0, 0.5, 1.0]);
        assert_eq!(r.channel(0), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn resample_identity_on_uniform_input() {
        let values: Vec<f64> = (0..101).map(|i| (i as f64 * 0.07).sin()).collect();
        let t = uniform(&values, 0.01);
        let r = resample_uniform(&t, 0.01).unwrap();
        assert_eq!(r, t);
    }

    #[test]
    fn resample_keeps_endpoints_when_not_a_multiple() {
        let t =
            Trajectory::new(vec![0.0, 0.3, 1.05], vec![vec![1.0], vec![4.0], vec![-2.0]]).unwrap();
        let r = resample_uniform(&t, 0.1).unwrap();
        assert_eq!(r.end_time(), 1.05);
        assert_eq!(r.first_position(), &[1.0]);
        assert_eq!(r.last_position(), &[-2.0]);
        assert!(resample_uniform(&t, 2.0).is_err());
        assert!(resample_uniform(&t, 0.0).is_err());
    }

    #[test]
    fn kinematics_exact_on_ramp_and_quadratic() {
        let ramp: Vec<f64> = (0..11).map(|i| 2.0 * i as f64 * 0.1).collect();
        let k = derive_kinematics(&uniform(&ramp, 0.1)).unwrap();
        for i in 0..k.len() {
            assert_abs_diff_eq!(k.velocities[(i, 0)], 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(k.accelerations[(i, 0)], 0.0, epsilon = 1e-10);
        }
        let quad: Vec<f64> = (0..11).map(|i| (i as f64 * 0.1).powi(2)).collect();
        let k = derive_kinematics(&uniform(&quad, 0.1)).unwrap();
        for i in 0..k.len() {
            assert_abs_diff_eq!(k.velocities[(i, 0)], 2.0 * i as f64 * 0.1, epsilon = 1e-12);
            assert_abs_diff_eq!(k.accelerations[(i, 0)], 2.0, epsilon = 1e-10);
        }
        let k = derive_kinematics(&uniform(&[3.0; 5], 0.2)).unwrap();
        assert!(k.velocities.iter().all(|v| *v == 0.0));
        assert!(k.accelerations.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn kinematics_rejects_nonuniform_or_short() {
        let t = Trajectory::new(vec![0.0, 0.1, 0.3], vec![vec![0.0]; 3]).unwrap();
        assert!(matches!(derive_kinematics(&t), Err(Error::Input { .. })));
        let t = Trajectory::new(vec![0.0, 0.1], vec![vec![0.0]; 2]).unwrap();
        assert!(derive_kinematics(&t).is_err());
    }

    #[test]
    fn smoothing_cases() {
        let t = uniform(&[1.0, 2.0, 3.0, 4.0, 5.0], 1.0);
        assert_eq!(smooth(&t, 1).unwrap(), t);
        assert_eq!(
            smooth(&t, 3).unwrap().channel(0),
            vec![1.5, 2.0, 3.0, 4.0, 4.5]
        );
        let c = uniform(&[7.0; 6], 1.0);
        assert_eq!(smooth(&c, 5).unwrap(), c);
        assert!(smooth(&t, 2).is_err());
        assert!(smooth(&t, 7).is_err());
        assert!(smooth(&t, 0).is_err());
    }

    #[test]
    fn rmse_cases() {
        let a = uniform(&[0.0, 1.0, 4.0, 2.0], 0.5);
        let b = uniform(&[0.25, 1.25, 4.25, 2.25], 0.5);
        assert_eq!(rmse(&a, &a).unwrap(), vec![0.0]);
        assert_abs_diff_eq!(rmse(&a, &b).unwrap()[0], 0.25, epsilon = 1e-15);
        assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());
        let c = uniform(&[0.0, 1.0, 4.0, 2.0], 0.4);
        assert!(rmse(&a, &c).is_err());
    }

    #[test]
    fn minimum_jerk_boundaries() {
        let t = minimum_jerk(&[0.0, 1.0], &[1.0, -1.0], 2.0, 201).unwrap();
        assert_eq!(t.first_position(), &[0.0, 1.0]);
        assert_eq!(t.last_position(), &[1.0, -1.0]);
        assert_abs_diff_eq!(t.position(100)[0], 0.5, epsilon = 1e-12);
    }

    fn arb_trajectory() -> impl Strategy<Value = Trajectory> {
        (1usize..4, 2usize..30).prop_flat_map(|(channels, n)| {
            (
                proptest::collection::vec(1e-4f64..10.0, n),
                proptest::collection::vec(-1e6f64..1e6, n * channels),
                -100.0f64..100.0,
            )
                .prop_map(move |(gaps, values, t0)| {
                    let mut t = t0;
                    let times = gaps
                        .iter()
                        .map(|g| {
                            t += g;
                            t
                        })
                        .collect();
                    Trajectory::from_flat(channels, times, values).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(t in arb_trajectory()) {
            let back = parse_trajectory(&write_trajectory(&t)).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn resample_preserves_endpoints(t in arb_trajectory(), frac in 0.01f64..0.9) {
            let r = resample_uniform(&t, t.duration() * frac).unwrap();
            prop_assert_eq!(r.first_position(), t.first_position());
            prop_assert_eq!(r.last_position(), t.last_position());
            prop_assert_eq!(r.start_time(), t.start_time());
            prop_assert_eq!(r.end_time(), t.end_time());
        }

        #[test]
        fn smoothing_stays_within_range(t in arb_trajectory(), half in 0usize..5) {
            let window = (2 * half + 1).min(if t.len() % 2 == 1 { t.len() } else { t.len() - 1 });
            let s = smooth(&t, window).unwrap();
            for c in 0..t.channel_count() {
                let q = t.channel(c);
                let lo = q.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let slack = 1e-9 * (hi.abs().max(lo.abs()).max(1.0));
                for v in s.channel(c) {
                    prop_assert!(v >= lo - slack && v <= hi + slack);
                }
            }
        }

        #[test]
        fn rmse_is_pseudometric(a in arb_trajectory(), shift in -5.0f64..5.0) {
            let b = Trajectory::from_flat(
                a.channel_count(),
                a.times().to_vec(),
                (0..a.len()).flat_map(|i| a.position(i).iter().map(|v| v + shift).collect::<Vec<_>>()).collect(),
            ).unwrap();
            let ab = rmse(&a, &b).unwrap();
            prop_assert_eq!(&ab, &rmse(&b, &a).unwrap());
            prop_assert!(rmse(&a, &a).unwrap().iter().all(|v| *v == 0.0));
            for v in ab {
                prop_assert!(v >= 0.0);
                prop_assert!((v - shift.abs()).abs() <= 1e-9);
            }
        }

        #[test]
        fn kinematics_exact_on_quadratics(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, n in 3usize..40, dt in 0.001f64..0.5) {
            let values: Vec<f64> = (0..n).map(|i| { let t = i as f64 * dt; a + b * t + c * t * t }).collect();
            let k = derive_kinematics(&uniform(&values, dt)).unwrap();
            let scale = 1.0 + a.abs() + b.abs() + c.abs();
            let t_max = (n - 1) as f64 * dt;
            for i in 0..n {
                let t = i as f64 * dt;
                let tol_v = 1e-12 * scale * (1.0 + t_max) * (1.0 + t_max) / dt;
                prop_assert!((k.velocities[(i, 0)] - (b + 2.0 * c * t)).abs() <= tol_v);
                prop_assert!((k.accelerations[(i, 0)] - 2.0 * c).abs() <= tol_v / dt);
            }
        }
    }
}
