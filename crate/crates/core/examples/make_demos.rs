//! Regenerates the demonstrations under `data/`.
//!
//! ```text
//! cargo run --example make_demos -- crates/core/data
//! ```

use std::fs;
use std::path::PathBuf;

use lfd_core::trajectory::{minimum_jerk, write_trajectory, Trajectory};

const HZ: usize = 100;

fn segment(start: [f64; 3], goal: [f64; 3], seconds: f64) -> Trajectory {
    let samples = (seconds * HZ as f64).round() as usize + 1;
    minimum_jerk(&start, &goal, seconds, samples).expect("valid demo")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    fs::create_dir_all(&dir)?;

    let reach = minimum_jerk(&[0.0], &[1.0], 1.0, HZ + 1)?;
    fs::write(dir.join("min_jerk.csv"), write_trajectory(&reach))?;

    // Pick-and-place in meters: descend onto the part, hold while the gripper
    // closes, lift, carry sideways.
    let above = [0.40, 0.10, 0.15];
    let at_part = [0.40, 0.10, 0.10];
    let placed = [0.50, 0.10, 0.15];
    let steps = [
        ("descend", segment(above, at_part, 1.0)),
        ("grasp", segment(at_part, at_part, 0.5)),
        ("rise", segment(at_part, above, 1.0)),
        ("carry", segment(above, placed, 1.5)),
    ];
    for (i, (name, demo)) in steps.iter().enumerate() {
        fs::write(
            dir.join(format!("pick_place_{}_{name}.csv", i + 1)),
            write_trajectory(demo),
        )?;
    }

    fs::write(
        dir.join("object_cyclic4.json"),
        r#"{
  "axis": [0, 0, 1],
  "kind": "cyclic",
  "order": 4,
  "grasp_offset": {"quaternion": [1, 0, 0, 0], "translation": [0, 0, 0.02]}
}
"#,
    )?;
    fs::write(
        dir.join("object_revolution.json"),
        r#"{
  "axis": [0, 0, 1],
  "kind": "revolution",
  "grasp_offset": {"quaternion": [1, 0, 0, 0], "translation": [0, 0, 0.05]}
}
"#,
    )?;
    println!("wrote demonstrations to {}", dir.display());
    Ok(())
}
