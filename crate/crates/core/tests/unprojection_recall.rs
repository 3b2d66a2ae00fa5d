use openbox::alignment::unproject_instances;
use openbox::synth::{camera_sees, generate, SceneSpec};

#[test]
fn visible_object_points_are_recovered() {
    let spec = SceneSpec::street(2);
    let g = generate(&spec).unwrap();
    let mut checked = 0;
    for (t, (frame, labels)) in g.frames.iter().zip(&g.labels).enumerate().step_by(10) {
        let raw = unproject_instances(frame, false);
        let eroded = unproject_instances(frame, true);
        for (k, (inst, idx)) in raw.instances.iter().zip(&raw.point_indices).enumerate() {
            let id = inst.track_id as i32;
            let cameras: Vec<_> = frame
                .cameras
                .iter()
                .filter(|v| v.cues.iter().any(|c| c.track_id == inst.track_id))
                .map(|v| &v.camera)
                .collect();
            let visible: Vec<usize> = (0..frame.points.len())
                .filter(|&i| labels[i] == id)
                .filter(|&i| cameras.iter().any(|c| camera_sees(&spec, t, c, &frame.points[i], id as usize - 1).unwrap()))
                .collect();
            if let Some(e) = eroded.instances.iter().position(|e| e.track_id == inst.track_id) {
                assert!(eroded.point_indices[e].iter().all(|i| idx.binary_search(i).is_ok()));
            }
            if visible.len() < 30 {
                continue;
            }
            let hit = visible.iter().filter(|i| idx.binary_search(i).is_ok()).count();
            let recall = hit as f64 / visible.len() as f64;
            assert!(recall >= 0.95, "frame {t} track {id}: recall {recall:.3} (instance {k})");
            checked += 1;
        }
    }
    assert!(checked >= 20);
}
