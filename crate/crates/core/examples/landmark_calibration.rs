//! Pose landmarks to metric body-part speeds.
//!
//! Writes a small landmark CSV and sidecar, ingests them and prints the
//! speed of each joint.

use seated_crowd::io;
use seated_crowd::motion::{landmarks_to_speeds, pixel_scale_factor, JointTrack, Landmark, LandmarkTrack};
use seated_crowd::Result;

pub fn run_example() -> Result<()> {
    let fps = 30.0;
    let d_ip = 63.36;
    println!("scale at d_ip = {d_ip} px: {} m/px", pixel_scale_factor(d_ip)?);

    // a wrist drifting 1 px/frame and a nose that never moves
    let frames = 90;
    let wrist = (0..frames)
        .map(|k| Landmark {
            x_px: 300.0 + k as f64,
            y_px: 200.0,
            visibility: 0.95,
        })
        .collect();
    let nose = vec![
        Landmark {
            x_px: 320.0,
            y_px: 80.0,
            visibility: 0.99,
        };
        frames
    ];
    let track = LandmarkTrack {
        frame_rate: fps,
        interpupillary_px: d_ip,
        joints: vec![
            JointTrack {
                name: "wrist".into(),
                points: wrist,
            },
            JointTrack {
                name: "nose".into(),
                points: nose,
            },
        ],
    };

    let dir = tempfile::tempdir().map_err(|e| seated_crowd::Error::io("tempdir", e))?;
    let csv = dir.path().join("landmarks.csv");
    let sidecar = dir.path().join("landmarks.json");
    io::write_landmarks(&track, &csv, &sidecar)?;
    let loaded = io::read_landmarks(&csv, &sidecar)?;

    let speeds = landmarks_to_speeds(&loaded, 6.0)?;
    for (joint, ch) in loaded.joints.iter().zip(&speeds.channels) {
        let mid = ch[ch.len() / 2];
        println!("{:>6}: {} samples, mid-track speed {mid:.4} m/s", joint.name, ch.len());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
