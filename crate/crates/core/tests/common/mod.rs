#![allow(dead_code)]

use aperture_core::simulate::*;
use aperture_core::*;

/// 3 x 3 views of a small textured scene; every view covers the whole 8 m
/// reference raster.
pub fn small_setup(occluded: bool) -> (SceneSpec, CaptureSpec) {
    let mut scene = SceneSpec {
        reference_extent: (8.0, 8.0),
        reference_resolution: (80, 80),
        ..SceneSpec::default()
    };
    if !occluded {
        scene.occluder_layer.density = 0.0;
    }
    let capture = CaptureSpec {
        grid: (3, 3),
        aperture_extent: (10.0, 10.0),
        altitude: 30.0,
        intrinsics: CameraIntrinsics::centered(150.0, 128, 128).unwrap(),
        pixel_noise_sigma: 0.0,
        supersample: 1,
        psf_sigma: 0.0,
    };
    (scene, capture)
}

pub fn context(scene: &SceneSpec, capture: &CaptureSpec, space: SearchSpace) -> refine::RefineContext {
    let plane = scene.reference_plane();
    let (w, h) = plane.raster_resolution;
    refine::RefineContext::new(capture.intrinsics, plane, Roi::full(w, h), space)
}
