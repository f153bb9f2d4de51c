use nalgebra::{Point3, Vector3};
use proptest::prelude::*;

use rio::datasynth::{orbit_poses, render_depth, Primitive, SceneObject, SyntheticScene};
use rio::volume::io::{read_volume, write_volume};
use rio::volume::{analytic_tsdf, extract_patch, fuse_depth, CameraIntrinsics, SignedDistance, TsdfVolume, VolumeGrid};
use rio::RigidPose;

fn sphere(id: u32, c: [f64; 3], r: f64) -> SceneObject {
    SceneObject::new(
        id,
        "ball".into(),
        Primitive::Sphere { radius: r },
        RigidPose::from_translation(Vector3::new(c[0], c[1], c[2])),
    )
}

fn clamp_tsdf(d: f64, trunc: f64) -> f64 {
    (d / trunc).clamp(-1.0, 1.0)
}

#[test]
fn overlapping_spheres_take_the_pointwise_minimum() {
    let scene = SyntheticScene { room: None, objects: vec![sphere(0, [0.0, 0.0, 0.0], 0.3), sphere(1, [0.25, 0.1, 0.0], 0.2)], seed: 0 };
    let grid = VolumeGrid::covering(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.6, 0.5, 0.5), 0.04, 0.12).unwrap();
    let vol = analytic_tsdf(&scene, &grid).unwrap();
    let [nx, ny, nz] = grid.dims;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let p = grid.voxel_center(x, y, z);
                let d0 = (p - Point3::new(0.0, 0.0, 0.0)).norm() - 0.3;
                let d1 = (p - Point3::new(0.25, 0.1, 0.0)).norm() - 0.2;
                let expect = clamp_tsdf(d0.min(d1), 0.12);
                assert!((vol.at(x, y, z) as f64 - expect).abs() < 1e-6, "voxel ({x},{y},{z})");
            }
        }
    }
}

#[test]
fn fused_sphere_is_close_to_the_analytic_volume() {
    let scene = SyntheticScene { room: None, objects: vec![sphere(0, [0.0, 0.0, 0.0], 0.3)], seed: 0 };
    let grid = VolumeGrid::covering(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5), 0.02, 0.08).unwrap();
    let k = CameraIntrinsics { fx: 120.0, fy: 120.0, cx: 63.5, cy: 47.5 };
    let frames: Vec<_> = orbit_poses(Point3::origin(), 1.5, 0.4, 8)
        .unwrap()
        .into_iter()
        .map(|pose| render_depth(&scene, k, pose, 128, 96, 5.0))
        .collect();
    let fused = fuse_depth(&frames, &grid).unwrap();
    let exact = analytic_tsdf(&scene, &grid).unwrap();
    // compare where some camera saw the voxel and the exact value is inside the band
    let weights = fused.weights().unwrap();
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 && exact.values()[i].abs() < 1.0 {
            sum += (fused.values()[i] - exact.values()[i]).abs() as f64;
            n += 1;
        }
    }
    let mean = sum / n as f64;
    assert!(n > 1000, "only {n} comparable voxels");
    assert!(mean < (0.02 / 0.08), "mean |Δ| = {mean}");
}

struct TiltedPlane;

impl SignedDistance for TiltedPlane {
    fn distance(&self, p: &Point3<f64>) -> f64 {
        Vector3::new(1.0, 2.0, 3.0).normalize().dot(&p.coords) - 0.05
    }
}

#[test]
fn half_outside_patch_matches_the_plane_inside_and_is_empty_outside() {
    // the truncation exceeds every distance in the grid, so the TSDF stays linear
    let grid = VolumeGrid::covering(Point3::new(-0.2, -0.2, -0.2), Point3::new(0.2, 0.2, 0.2), 0.02, 1.0).unwrap();
    let vol = analytic_tsdf(&TiltedPlane, &grid).unwrap();
    let (lo, hi) = (grid.voxel_center(0, 0, 0), {
        let [x, y, z] = grid.dims;
        grid.voxel_center(x - 1, y - 1, z - 1)
    });
    let center = Point3::new(0.2, 0.0, 0.0);
    let (extent, res) = (0.32f32, 16);
    let patch = extract_patch(&vol, &center, extent, res).unwrap();
    let step = extent as f64 / res as f64;
    let (mut inside, mut outside) = (0, 0);
    for z in 0..res {
        for y in 0..res {
            for x in 0..res {
                let p = center + Vector3::new(x as f64, y as f64, z as f64).add_scalar(-(res as f64) / 2.0) * step;
                let v = patch.at(x, y, z) as f64;
                let within = (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a]);
                let beyond = (0..3).any(|a| p[a] > hi[a] + grid.voxel_size as f64 || p[a] < lo[a] - grid.voxel_size as f64);
                if within {
                    assert!((v - TiltedPlane.distance(&p)).abs() < 1e-6, "sample {p} gave {v}");
                    inside += 1;
                } else if beyond {
                    assert_eq!(v, 1.0, "sample {p} outside the volume");
                    outside += 1;
                }
            }
        }
    }
    assert!(inside > 100 && outside > 100);
}

fn small_volume() -> impl Strategy<Value = TsdfVolume> {
    (1usize..6, 1usize..6, 1usize..6, any::<bool>()).prop_flat_map(|(x, y, z, weighted)| {
        let n = x * y * z;
        (
            prop::collection::vec(-1.0f32..=1.0, n),
            prop::collection::vec(0.0f32..10.0, n),
            0.001f32..0.1,
            prop::array::uniform3(-5.0f32..5.0),
        )
            .prop_map(move |(values, weights, voxel, origin)| {
                let grid = VolumeGrid::new([x, y, z], voxel, origin, 3.0 * voxel).unwrap();
                TsdfVolume::new(grid, values, weighted.then_some(weights)).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn volume_files_round_trip_bit_exactly(vol in small_volume()) {
        let mut bytes = Vec::new();
        write_volume(&mut bytes, &vol).unwrap();
        let back = read_volume(bytes.as_slice()).unwrap();
        let mut again = Vec::new();
        write_volume(&mut again, &back).unwrap();
        prop_assert_eq!(&bytes, &again);
        prop_assert_eq!(back.grid(), vol.grid());
        prop_assert!(back.values().iter().zip(vol.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn tsdf_values_stay_in_range(c in prop::array::uniform3(-0.3f64..0.3), r in 0.05f64..0.4) {
        let scene = SyntheticScene { room: None, objects: vec![sphere(0, c, r)], seed: 0 };
        let grid = VolumeGrid::covering(Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5), 0.05, 0.15).unwrap();
        let vol = analytic_tsdf(&scene, &grid).unwrap();
        prop_assert!(vol.values().iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fusion_ignores_frame_order(seed in 0u64..1000) {
        let scene = SyntheticScene { room: None, objects: vec![sphere(0, [0.0, 0.0, 0.0], 0.25)], seed: 0 };
        let grid = VolumeGrid::covering(Point3::new(-0.4, -0.4, -0.4), Point3::new(0.4, 0.4, 0.4), 0.05, 0.15).unwrap();
        let k = CameraIntrinsics { fx: 40.0, fy: 40.0, cx: 15.5, cy: 11.5 };
        let mut frames: Vec<_> = orbit_poses(Point3::origin(), 1.2, 0.3, 5)
            .unwrap()
            .into_iter()
            .map(|pose| render_depth(&scene, k, pose, 32, 24, 4.0))
            .collect();
        let a = fuse_depth(&frames, &grid).unwrap();
        frames.rotate_left((seed % 5) as usize);
        if seed % 2 == 0 {
            frames.reverse();
        }
        let b = fuse_depth(&frames, &grid).unwrap();
        prop_assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
