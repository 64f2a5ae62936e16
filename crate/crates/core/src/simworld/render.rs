//! Analytic ray-cast renderer producing RGB, depth and semantic rasters.
//!
//! Every pixel is resolved independently: nearest hit among agent boxes and
//! the ground plane, else sky. All stochastic texture comes from counter
//! hashes of (seed, frame, pixel), so a frame is a pure function of the
//! world state.

use super::camera::CameraConfig;
use super::map::TownMap;
use super::{SimParams, WorldState};
use crate::geom::{hash_unit, ray_box_intersection, splitmix64, Vec2};
use crate::types::SemanticClass;
use ndarray::{Array2, Array3};

/// Sky color before the weather tint.
pub const SKY_COLOR: [f64; 3] = [0.60, 0.72, 0.88];

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// (height, width, 3), linear RGB in [0, 1].
    pub rgb: Array3<f64>,
    /// (height, width), hit distance / far_plane, clamped to [0, 1].
    pub depth: Array2<f64>,
    /// (height, width), semantic class ids.
    pub semantic: Array2<u8>,
}

enum Hit {
    Sky,
    Ground(Vec2),
    Agent { brightness: f64 },
}

pub fn render_observation(
    map: &TownMap,
    params: &SimParams,
    camera: &CameraConfig,
    state: &WorldState,
) -> Observation {
    let (origin, fwd, right, up) = camera.pose(state.ego.pos, state.ego.heading);
    let mut rgb = Array3::zeros((camera.height, camera.width, 3));
    let mut depth = Array2::from_elem((camera.height, camera.width), 1.0);
    let mut semantic = Array2::from_elem((camera.height, camera.width), SemanticClass::Other.id());

    // Agent boxes with per-agent brightness so vehicles are distinguishable.
    let boxes: Vec<(crate::geom::Obb, f64, f64)> = state
        .traffic_vehicles
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let b = 0.75 + 0.45 * hash_unit(splitmix64(state.seed ^ (i as u64).wrapping_mul(0x9e37)));
            (v.state.obb(), params.vehicle_height, b)
        })
        .chain(state.pedestrians.iter().enumerate().map(|(i, p)| {
            let b = 0.85 + 0.35 * hash_unit(splitmix64(state.seed ^ (0xABCD + i as u64)));
            (p.state.obb(), params.pedestrian_height, b)
        }))
        .collect();

    let frame_bits = (state.time * 1000.0).round() as u64;
    let noise_amp = 0.1 * state.weather.texture_noise_sigma;
    let tint = state.weather.tint;
    let gloss = state.weather.ground_gloss;

    for py in 0..camera.height {
        for px in 0..camera.width {
            let dir = camera.ray(fwd, right, up, px, py);

            let mut t_best = camera.far_plane;
            let mut hit = Hit::Sky;
            if dir.z < -1e-12 {
                let tg = -origin.z / dir.z;
                if tg < t_best {
                    t_best = tg;
                    let p = Vec2::new(origin.x + dir.x * tg, origin.y + dir.y * tg);
                    hit = Hit::Ground(p);
                }
            }
            for (obb, height, brightness) in &boxes {
                if let Some(t) = ray_box_intersection(origin, dir, obb, *height) {
                    if t < t_best {
                        t_best = t;
                        hit = Hit::Agent {
                            brightness: *brightness,
                        };
                    }
                }
            }

            let (class, color) = match hit {
                Hit::Sky => {
                    let lift = 1.0 - 0.25 * (dir.z * 2.0).clamp(0.0, 1.0);
                    (
                        SemanticClass::Other,
                        [SKY_COLOR[0] * lift, SKY_COLOR[1] * lift, SKY_COLOR[2] * lift],
                    )
                }
                Hit::Ground(p) => {
                    let class = map.classify_ground(p);
                    let mut c = class.base_color();
                    // Static puddle cells on paved surfaces under wet skies.
                    if gloss > 0.0
                        && matches!(class, SemanticClass::Lane | SemanticClass::RoadLine)
                    {
                        let cx = (p.x / 3.0).floor() as i64 as u64;
                        let cy = (p.y / 3.0).floor() as i64 as u64;
                        let h = hash_unit(splitmix64(
                            cx.wrapping_mul(0x51_7C_C1_B7).wrapping_add(cy).wrapping_mul(0x2545_F491),
                        ));
                        if h < gloss * 0.35 {
                            let k = 0.25 + 0.5 * gloss;
                            for ch in 0..3 {
                                c[ch] = c[ch] * (1.0 - k) + SKY_COLOR[ch] * k;
                            }
                        }
                    }
                    let fade = (1.0 - 0.004 * t_best).clamp(0.55, 1.0);
                    for ch in c.iter_mut() {
                        *ch *= fade;
                    }
                    (class, c)
                }
                Hit::Agent { brightness } => {
                    let mut c = SemanticClass::VehicleOrPedestrian.base_color();
                    let fade = (1.0 - 0.004 * t_best).clamp(0.55, 1.0);
                    for ch in c.iter_mut() {
                        *ch *= brightness * fade;
                    }
                    (SemanticClass::VehicleOrPedestrian, c)
                }
            };

            let px_key = splitmix64(
                state
                    .seed
                    .wrapping_mul(0xA24B_AED4)
                    .wrapping_add(frame_bits)
                    .wrapping_mul(0x9E3779B97F4A7C15)
                    .wrapping_add((py as u64) << 24 | px as u64),
            );
            for ch in 0..3 {
                let n = hash_unit(splitmix64(px_key.wrapping_add(ch as u64)));
                let v = (color[ch] * tint[ch] + (n - 0.5) * 2.0 * noise_amp).clamp(0.0, 1.0);
                rgb[(py, px, ch)] = v;
            }
            depth[(py, px)] = (t_best / camera.far_plane).min(1.0);
            semantic[(py, px)] = class.id();
        }
    }

    Observation {
        rgb,
        depth,
        semantic,
    }
}
