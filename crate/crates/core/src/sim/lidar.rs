use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

use super::{RobotConfig, RobotState, WorldGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sensor {
    Front,
    Rear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    /// One range per beam, in metres, capped at the sensor's max range.
    pub ranges: Vec<f64>,
}

/// Beam directions in world frame for `sensor`, evenly spread over the field of view.
pub fn beam_angles(config: &RobotConfig, state: &RobotState, sensor: Sensor) -> Vec<f64> {
    let lidar = &config.lidar;
    let center = match sensor {
        Sensor::Front => state.base_pose.theta,
        Sensor::Rear => state.base_pose.theta + std::f64::consts::PI,
    };
    let n = lidar.beams;
    (0..n)
        .map(|i| {
            let frac = if n == 1 {
                0.0
            } else {
                i as f64 / (n - 1) as f64 - 0.5
            };
            center + frac * lidar.field_of_view
        })
        .collect()
}

pub fn sensor_origin(config: &RobotConfig, state: &RobotState, sensor: Sensor) -> Vec2 {
    let offset = match sensor {
        Sensor::Front => config.lidar.front_offset,
        Sensor::Rear => config.lidar.rear_offset,
    };
    state.base_pose.transform_point(offset)
}

/// Ranges to the first wall or box along each beam. The robot body is invisible to its own sensors.
pub fn cast_lidar(
    config: &RobotConfig,
    state: &RobotState,
    world: &WorldGeometry,
    sensor: Sensor,
) -> LidarScan {
    let origin = sensor_origin(config, state, sensor);
    let max_range = config.lidar.max_range;
    let ranges = beam_angles(config, state, sensor)
        .into_iter()
        .map(|a| {
            let dir = Vec2::from_angle(a);
            let seg = world
                .segments
                .iter()
                .filter_map(|s| s.ray_hit(origin, dir))
                .fold(max_range, f64::min);
            world
                .boxes
                .iter()
                .filter_map(|b| b.ray_hit(origin, dir))
                .fold(seg, f64::min)
                .clamp(0.0, max_range)
        })
        .collect();
    LidarScan { ranges }
}
