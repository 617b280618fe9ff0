//! Tasks as ordered sequences of taught sub-task primitives.
//!
//! A task is replanned from a new start configuration by rolling out each
//! sub-task in turn, each starting from rest where the previous one ended.

use serde::{Deserialize, Serialize};

use crate::dmp::{rollout, train, DmpModel, DmpParams};
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

pub const PROGRAM_SCHEMA: &str = "lfd_task_program/1";

/// Rollout horizon in units of the sub-task's time scale.
pub const HORIZON_FACTOR: f64 = 1.5;

/// How a sub-task's goal is obtained at planning time.
#[derive(Debug, Clone, PartialEq)]
pub enum GoalMode {
    /// Fixed goal, independent of where the sub-task starts.
    Absolute(Vec<f64>),
    /// Offset added to the sub-task's start position.
    Relative(Vec<f64>),
}

impl GoalMode {
    pub fn values(&self) -> &[f64] {
        match self {
            GoalMode::Absolute(v) | GoalMode::Relative(v) => v,
        }
    }

    pub fn resolve(&self, start: &[f64]) -> Vec<f64> {
        match self {
            GoalMode::Absolute(g) => g.clone(),
            GoalMode::Relative(d) => start.iter().zip(d).map(|(s, d)| s + d).collect(),
        }
    }
}

/// Which goal rule to derive from a demonstration when teaching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GoalRule {
    /// Keep the demonstrated displacement (`goal - start`).
    #[default]
    Relative,
    /// Keep the demonstrated end point.
    Absolute,
}

impl GoalRule {
    fn goal_mode(self, model: &DmpModel) -> GoalMode {
        match self {
            GoalRule::Absolute => GoalMode::Absolute(model.demo_goal.clone()),
            GoalRule::Relative => GoalMode::Relative(
                model
                    .demo_goal
                    .iter()
                    .zip(&model.demo_start)
                    .map(|(g, s)| g - s)
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubTask {
    pub name: String,
    pub model: DmpModel,
    pub goal_mode: GoalMode,
}

/// Named sub-tasks sharing one channel count, in execution order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskProgram {
    subtasks: Vec<SubTask>,
}

/// Where one sub-task sits in a planned task.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentReport {
    pub name: String,
    /// Sample index of the segment's first point in the task trajectory.
    pub start_index: usize,
    /// Sample index of the segment's last point.
    pub end_index: usize,
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    pub final_position: Vec<f64>,
}

impl SegmentReport {
    /// `max_c |final - goal|`.
    pub fn goal_error(&self) -> f64 {
        self.final_position
            .iter()
            .zip(&self.goal)
            .map(|(f, g)| (f - g).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskPlan {
    pub trajectory: Trajectory,
    pub segments: Vec<SegmentReport>,
}

impl TaskProgram {
    pub fn new() -> Self {
        TaskProgram::default()
    }

    pub fn len(&self) -> usize {
        self.subtasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subtasks.is_empty()
    }

    pub fn subtasks(&self) -> &[SubTask] {
        &self.subtasks
    }

    pub fn channel_count(&self) -> Option<usize> {
        self.subtasks.first().map(|s| s.model.n_channels)
    }

    /// Appends an already trained sub-task.
    pub fn push(&mut self, subtask: SubTask) -> Result<()> {
        if subtask.name.trim().is_empty() {
            return Err(Error::validation("sub-task name must not be empty"));
        }
        if self.subtasks.iter().any(|s| s.name == subtask.name) {
            return Err(Error::validation(format!(
                "sub-task {:?} already exists",
                subtask.name
            )));
        }
        let n = subtask.model.n_channels;
        if let Some(expected) = self.channel_count() {
            if n != expected {
                return Err(Error::validation(format!(
                    "sub-task {:?} has {n} channels, program has {expected}",
                    subtask.name
                )));
            }
        }
        if subtask.goal_mode.values().len() != n {
            return Err(Error::validation(format!(
                "goal of sub-task {:?} has {} entries, expected {n}",
                subtask.name,
                subtask.goal_mode.values().len()
            )));
        }
        self.subtasks.push(subtask);
        Ok(())
    }

    /// Trains a primitive on `demo` and appends it under `name`.
    pub fn add_subtask(
        &mut self,
        demo: &Trajectory,
        name: &str,
        params: &DmpParams,
        goal: GoalRule,
    ) -> Result<&SubTask> {
        if self.subtasks.iter().any(|s| s.name == name) {
            return Err(Error::validation(format!(
                "sub-task {name:?} already exists"
            )));
        }
        if let Some(expected) = self.channel_count() {
            if demo.channel_count() != expected {
                return Err(Error::validation(format!(
                    "demonstration has {} channels, program has {expected}",
                    demo.channel_count()
                )));
            }
        }
        let model = train(demo, params)?;
        let goal_mode = goal.goal_mode(&model);
        self.push(SubTask {
            name: name.to_string(),
            model,
            goal_mode,
        })?;
        Ok(self.subtasks.last().expect("just pushed"))
    }

    /// Rolls every sub-task out in order from `start`. Each runs for
    /// `1.5 · tau · tau_scale` from rest at the previous segment's end; the
    /// duplicate junction sample is dropped so time strictly increases.
    pub fn plan(&self, start: &[f64], tau_scale: f64) -> Result<TaskPlan> {
        let Some(channels) = self.channel_count() else {
            return Err(Error::validation("cannot plan an empty program"));
        };
        if start.len() != channels {
            return Err(Error::param(format!(
                "start has {} entries, program has {channels} channels",
                start.len()
            )));
        }
        if !(tau_scale.is_finite() && tau_scale > 0.0) {
            return Err(Error::param(format!(
                "tau scale must be > 0, got {tau_scale}"
            )));
        }

        let mut times: Vec<f64> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut segments = Vec::with_capacity(self.subtasks.len());
        let mut current = start.to_vec();
        let mut t_offset = 0.0;
        for sub in &self.subtasks {
            let goal = sub.goal_mode.resolve(&current);
            let tau = sub.model.params.tau * tau_scale;
            let segment = rollout(&sub.model, &current, &goal, tau, HORIZON_FACTOR * tau).map_err(
                |e| match e {
                    Error::Numeric { step, message } => Error::Numeric {
                        step,
                        message: format!("sub-task {:?}: {message}", sub.name),
                    },
                    other => other,
                },
            )?;
            let skip = usize::from(!times.is_empty());
            let start_index = times.len().saturating_sub(1) * skip;
            for i in skip..segment.len() {
                times.push(t_offset + segment.times()[i]);
                values.extend_from_slice(segment.position(i));
            }
            t_offset += segment.end_time();
            let final_position = segment.last_position().to_vec();
            log::debug!(
                "sub-task {}: goal {:?}, final {:?}",
                sub.name,
                goal,
                final_position
            );
            segments.push(SegmentReport {
                name: sub.name.clone(),
                start_index,
                end_index: times.len() - 1,
                start: current.clone(),
                goal,
                final_position: final_position.clone(),
            });
            current = final_position;
        }
        Ok(TaskPlan {
            trajectory: Trajectory::from_flat(channels, times, values)?,
            segments,
        })
    }

    pub fn to_json(&self) -> String {
        let doc = ProgramDocument {
            schema: PROGRAM_SCHEMA.to_string(),
            channel_count: self.channel_count().unwrap_or(0),
            subtasks: self
                .subtasks
                .iter()
                .map(|s| SubTaskDocument {
                    name: s.name.clone(),
                    goal_mode: match s.goal_mode {
                        GoalMode::Absolute(_) => "absolute".into(),
                        GoalMode::Relative(_) => "relative".into(),
                    },
                    goal_value: s.goal_mode.values().to_vec(),
                    model: s.model.to_value(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("program serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::format(e.to_string()))?;
        match value.get("schema").and_then(|s| s.as_str()) {
            Some(PROGRAM_SCHEMA) => {}
            Some(other) => {
                return Err(Error::Version {
                    found: other.to_string(),
                    expected: PROGRAM_SCHEMA.into(),
                })
            }
            None => return Err(Error::format("program document has no schema field")),
        }
        let doc: ProgramDocument =
            serde_json::from_value(value).map_err(|e| Error::format(e.to_string()))?;
        let mut program = TaskProgram::new();
        for sub in doc.subtasks {
            let model = DmpModel::from_value(sub.model)?;
            let goal_mode = match sub.goal_mode.as_str() {
                "absolute" => GoalMode::Absolute(sub.goal_value),
                "relative" => GoalMode::Relative(sub.goal_value),
                other => return Err(Error::format(format!("unknown goal_mode {other:?}"))),
            };
            program.push(SubTask {
                name: sub.name,
                model,
                goal_mode,
            })?;
        }
        if program.is_empty() {
            return Err(Error::validation("program has no sub-tasks"));
        }
        if program.channel_count() != Some(doc.channel_count) {
            return Err(Error::validation(
                "channel_count does not match the sub-task models",
            ));
        }
        Ok(program)
    }
}

/// Functional form of [`TaskProgram::add_subtask`].
pub fn add_subtask(
    mut program: TaskProgram,
    demo: &Trajectory,
    name: &str,
    params: &DmpParams,
    goal: GoalRule,
) -> Result<TaskProgram> {
    program.add_subtask(demo, name, params, goal)?;
    Ok(program)
}

/// Functional form of [`TaskProgram::plan`].
pub fn plan_task(program: &TaskProgram, start: &[f64], tau_scale: f64) -> Result<TaskPlan> {
    program.plan(start, tau_scale)
}

#[derive(Serialize, Deserialize)]
struct SubTaskDocument {
    name: String,
    goal_mode: String,
    goal_value: Vec<f64>,
    model: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct ProgramDocument {
    schema: String,
    channel_count: usize,
    subtasks: Vec<SubTaskDocument>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmp::rollout_default;
    use crate::trajectory::minimum_jerk;

    fn demo(start: &[f64], goal: &[f64]) -> Trajectory {
        minimum_jerk(start, goal, 1.0, 101).unwrap()
    }

    fn two_step_program() -> TaskProgram {
        let mut p = TaskProgram::new();
        p.add_subtask(
            &demo(&[0.0, 0.0], &[0.5, -0.2]),
            "reach",
            &DmpParams::default(),
            GoalRule::Relative,
        )
        .unwrap();
        p.add_subtask(
            &demo(&[0.5, -0.2], &[0.5, 0.4]),
            "lift",
            &DmpParams::default(),
            GoalRule::Absolute,
        )
        .unwrap();
        p
    }

    #[test]
    fn adding_subtasks() {
        let p = add_subtask(
            TaskProgram::new(),
            &demo(&[0.0], &[1.0]),
            "a",
            &DmpParams::default(),
            GoalRule::Relative,
        )
        .unwrap();
        assert_eq!(p.len(), 1);
        let mut p = p;
        for name in ["b", "c", "d"] {
            p.add_subtask(
                &demo(&[1.0], &[0.0]),
                name,
                &DmpParams::default(),
                GoalRule::Relative,
            )
            .unwrap();
        }
        let names: Vec<_> = p.subtasks().iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["a", "b", "c", "d"]);
        let dup = p.add_subtask(
            &demo(&[0.0], &[1.0]),
            "b",
            &DmpParams::default(),
            GoalRule::Relative,
        );
        assert!(matches!(dup, Err(Error::Validation(_))));
        let wide = p.add_subtask(
            &demo(&[0.0, 0.0], &[1.0, 1.0]),
            "e",
            &DmpParams::default(),
            GoalRule::Relative,
        );
        assert!(matches!(wide, Err(Error::Validation(_))));
        assert_eq!(p.len(), 4);
    }

    #[test]
    fn single_subtask_equals_direct_rollout() {
        let mut p = TaskProgram::new();
        p.add_subtask(
            &demo(&[0.0], &[1.0]),
            "only",
            &DmpParams::default(),
            GoalRule::Relative,
        )
        .unwrap();
        let plan = p.plan(&[0.2], 1.0).unwrap();
        let direct = rollout_default(&p.subtasks()[0].model, &[0.2], &[1.2]).unwrap();
        assert_eq!(plan.trajectory, direct);
    }

    #[test]
    fn junctions_are_continuous() {
        let p = two_step_program();
        let plan = p.plan(&[0.1, 0.1], 1.0).unwrap();
        let first = &plan.segments[0];
        let second = &plan.segments[1];
        assert_eq!(second.start, first.final_position);
        assert_eq!(first.end_index, second.start_index);
        assert_eq!(
            plan.trajectory.position(first.end_index),
            first.final_position.as_slice()
        );
        assert!((second.goal[0] - 0.5).abs() < 1e-12 && (second.goal[1] - 0.4).abs() < 1e-12);
        assert_eq!(
            plan.trajectory.last_position(),
            second.final_position.as_slice()
        );
        assert!(plan.trajectory.times().windows(2).all(|w| w[1] > w[0]));
        for s in &plan.segments {
            assert!(s.goal_error() <= 1e-2, "{}: {}", s.name, s.goal_error());
        }
        // planning is a pure function
        assert_eq!(p.plan(&[0.1, 0.1], 1.0).unwrap(), plan);
    }

    #[test]
    fn plan_argument_errors() {
        let p = two_step_program();
        assert!(matches!(p.plan(&[0.0], 1.0), Err(Error::Param(_))));
        assert!(p.plan(&[0.0, 0.0], 0.0).is_err());
        assert!(TaskProgram::new().plan(&[0.0], 1.0).is_err());
    }

    #[test]
    fn tau_scale_stretches_time() {
        let p = two_step_program();
        let base = p.plan(&[0.0, 0.0], 1.0).unwrap();
        let slow = p.plan(&[0.0, 0.0], 2.0).unwrap();
        assert_eq!(base.trajectory.len(), slow.trajectory.len());
        assert!((slow.trajectory.end_time() - 2.0 * base.trajectory.end_time()).abs() < 1e-9);
    }

    #[test]
    fn json_round_trip() {
        let p = two_step_program();
        let text = p.to_json();
        let back = TaskProgram::from_json(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_json(), text);
        let bumped = text.replace("lfd_task_program/1", "lfd_task_program/999");
        assert!(matches!(
            TaskProgram::from_json(&bumped),
            Err(Error::Version { .. })
        ));
        assert!(matches!(
            TaskProgram::from_json("[]"),
            Err(Error::Format(_))
        ));
        let renamed = text.replacen("\"relative\"", "\"sideways\"", 1);
        assert!(matches!(
            TaskProgram::from_json(&renamed),
            Err(Error::Format(_))
        ));
        let inner = text.replacen("lfd_dmp_model/1", "lfd_dmp_model/2", 1);
        assert!(matches!(
            TaskProgram::from_json(&inner),
            Err(Error::Version { .. })
        ));
    }
}
