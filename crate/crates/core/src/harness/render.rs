use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::envgen::{EnvConfig, Scene};
use crate::geometry::Vec2;
use crate::pathfield::{CellKind, GridField};
use crate::sim::{beam_angles, cast_lidar, forward_kinematics, sensor_origin, RobotState, Sensor};

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    pub pixels_per_meter: f64,
    pub lidar: bool,
    /// Draw the planned end-effector path.
    pub planned_path: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            pixels_per_meter: 80.0,
            lidar: false,
            planned_path: true,
        }
    }
}

struct Canvas {
    out: String,
    scale: f64,
    origin: Vec2,
    top: f64,
}

impl Canvas {
    fn x(&self, v: f64) -> f64 {
        (v - self.origin.x) * self.scale
    }

    fn y(&self, v: f64) -> f64 {
        (self.top - v) * self.scale
    }

    fn point(&self, p: Vec2) -> String {
        format!("{:.2},{:.2}", self.x(p.x), self.y(p.y))
    }

    fn line(&mut self, a: Vec2, b: Vec2, style: &str) {
        let _ = writeln!(
            self.out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" {style}/>"#,
            self.x(a.x),
            self.y(a.y),
            self.x(b.x),
            self.y(b.y)
        );
    }

    fn circle(&mut self, c: Vec2, r: f64, style: &str) {
        let _ = writeln!(
            self.out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" {style}/>"#,
            self.x(c.x),
            self.y(c.y),
            r * self.scale
        );
    }

    fn polyline(&mut self, pts: impl Iterator<Item = Vec2>, style: &str) {
        let pts: Vec<String> = pts.map(|p| self.point(p)).collect();
        if pts.len() > 1 {
            let _ = writeln!(self.out, r#"<polyline points="{}" fill="none" {style}/>"#, pts.join(" "));
        }
    }
}

/// SVG of a scene: walls, boxes, goal circle of radius `tolerance`, planned
/// path, the end-effector trace over `trajectory` and the robot at its last state.
pub fn render_svg(
    config: &EnvConfig,
    scene: &Scene,
    trajectory: &[RobotState],
    tolerance: f64,
    options: &RenderOptions,
) -> String {
    let robot = &config.robot;
    let b = scene.world.bounds;
    let pad = 0.2;
    let mut c = Canvas {
        out: String::new(),
        scale: options.pixels_per_meter,
        origin: Vec2::new(b.min.x - pad, b.min.y - pad),
        top: b.max.y + pad,
    };
    let w = (b.width() + 2.0 * pad) * c.scale;
    let h = (b.height() + 2.0 * pad) * c.scale;
    let _ = writeln!(
        c.out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let _ = writeln!(c.out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        c.out,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#bbb" stroke-dasharray="4 4"/>"##,
        c.x(b.min.x),
        c.y(b.max.y),
        b.width() * c.scale,
        b.height() * c.scale
    );
    for s in &scene.world.segments {
        c.line(s.a, s.b, r#"stroke="black" stroke-width="3""#);
    }
    for a in &scene.world.boxes {
        let _ = writeln!(
            c.out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#555"/>"##,
            c.x(a.min.x),
            c.y(a.max.y),
            a.width() * c.scale,
            a.height() * c.scale
        );
    }
    if options.planned_path {
        c.polyline(
            scene.ee_path.points().iter().copied(),
            r##"stroke="#2a7" stroke-width="1.5" stroke-dasharray="6 3""##,
        );
    }
    c.circle(
        scene.goal.position(),
        tolerance,
        r##"fill="#fc3" fill-opacity="0.3" stroke="#c90" stroke-width="1.5""##,
    );
    c.circle(scene.goal.position(), 0.03, r##"fill="#c90""##);

    let frames: Vec<_> = trajectory
        .iter()
        .filter_map(|s| forward_kinematics(robot, s).ok())
        .collect();
    c.polyline(frames.iter().map(|f| f.ee.position()), r##"stroke="#d22" stroke-width="2""##);
    c.polyline(
        trajectory.iter().map(|s| s.base_pose.position()),
        r##"stroke="#36c" stroke-width="1" stroke-opacity="0.6""##,
    );

    if let (Some(state), Some(f)) = (trajectory.last(), frames.last()) {
        if options.lidar {
            for sensor in [Sensor::Front, Sensor::Rear] {
                let o = sensor_origin(robot, state, sensor);
                let scan = cast_lidar(robot, state, &scene.world, sensor);
                let angles = beam_angles(robot, state, sensor);
                for (r, a) in scan.ranges.iter().zip(angles) {
                    c.line(o, o + Vec2::from_angle(a) * *r, r##"stroke="#e80" stroke-width="0.5""##);
                }
            }
        }
        c.circle(
            state.base_pose.position(),
            robot.base_radius,
            r##"fill="#9bd" stroke="#36c" stroke-width="1.5""##,
        );
        let heading = state.base_pose.position() + Vec2::from_angle(state.base_pose.theta) * robot.base_radius;
        c.line(state.base_pose.position(), heading, r##"stroke="#36c" stroke-width="1.5""##);
        let width = 2.0 * robot.link_capsule_radius * c.scale;
        for link in f.links() {
            c.line(
                link.a,
                link.b,
                &format!(r##"stroke="#444" stroke-opacity="0.8" stroke-width="{width:.2}" stroke-linecap="round""##),
            );
        }
        c.circle(f.ee.position(), 0.02, r##"fill="#d22""##);
    }
    c.out.push_str("</svg>\n");
    c.out
}

/// Writes [`render_svg`] output to `path`.
pub fn render_snapshot(
    config: &EnvConfig,
    scene: &Scene,
    trajectory: &[RobotState],
    tolerance: f64,
    options: &RenderOptions,
    path: &Path,
) -> io::Result<()> {
    fs::write(path, render_svg(config, scene, trajectory, tolerance, options))
}

/// Binary PGM of a potential field: obstacles black, potential as grey level,
/// the goal white. Row 0 is the top (largest y).
pub fn render_field_pgm(field: &GridField) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", field.width, field.height).into_bytes();
    for j in (0..field.height).rev() {
        for i in 0..field.width {
            let v = match field.kind(i, j) {
                CellKind::Obstacle => 0,
                CellKind::Goal => 255,
                CellKind::Free => {
                    let a = field.affinity(i, j).max(1e-300);
                    // Log scale: the affinity decays exponentially along corridors.
                    let t = (1.0 + a.log10() / 12.0).clamp(0.0, 1.0);
                    (24.0 + t * 216.0).round() as u8
                }
            };
            out.push(v);
        }
    }
    out
}
