#![no_main]

use cnls_vortex::reduced_dynamics::Trajectory;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(traj) = Trajectory::read_csv(data) {
        let mut out = Vec::new();
        traj.write_csv(&mut out).unwrap();
        let again = Trajectory::read_csv(out.as_slice()).expect("written trajectories parse");
        assert_eq!(again.frames.len(), traj.frames.len());
        for (a, b) in again.frames.iter().zip(&traj.frames) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert_eq!(a.points, b.points);
        }
    }
});
