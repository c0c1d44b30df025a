use chamber_twin::cli::run_args;
use chamber_twin::dataset::{read_experiment, read_image, ColumnData};
use chamber_twin::protocol::Protocol;
use chamber_twin::variables::Config;

fn chamber(args: &[&str]) -> (i32, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_args(std::iter::once("chamber").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(err).unwrap())
}

#[test]
fn cli_run_writes_readable_wind_tunnel_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let protocol = Protocol::new(Config::WtStandard).set("load_in", 0.9).wait(3000).msr(10, 5.0);
    let path = dir.path().join("p.txt");
    std::fs::write(&path, protocol.to_string()).unwrap();

    let out = dir.path().to_str().unwrap();
    let (code, err) = chamber(&["run", path.to_str().unwrap(), "--out", out, "--name", "spin", "--seed", "4"]);
    assert_eq!(code, 0, "{err}");

    let t = read_experiment(dir.path(), "spin").unwrap();
    assert_eq!(t.rows(), 10);
    let up = t.floats("pressure_upwind").unwrap();
    let down = t.floats("pressure_downwind").unwrap();
    let amb = t.floats("pressure_ambient").unwrap();
    // The intake fan pushes air in: downwind pressure rises above ambient.
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&down) > mean(&amb) + 1.0, "{} vs {}", mean(&down), mean(&amb));
    assert_eq!(up.len(), 10);
    assert!(t.floats("rpm_in").unwrap().iter().all(|&r| r > 1000.0));
    assert!(matches!(t.column("intervention"), Some(ColumnData::Integer(_))));
}

#[test]
fn camera_images_round_trip_through_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let protocol = Protocol::new(Config::LtCamera)
        .set("red", 255.0)
        .msr(2, 1.0)
        .set("pol_2", 90.0)
        .msr(2, 1.0);
    let path = dir.path().join("p.txt");
    std::fs::write(&path, protocol.to_string()).unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, err) = chamber(&["run", path.to_str().unwrap(), "--out", out, "--name", "cam"]);
    assert_eq!(code, 0, "{err}");

    let t = read_experiment(dir.path(), "cam").unwrap();
    let paths = t.image_paths("im").unwrap();
    assert_eq!(paths.len(), 4);
    let red: Vec<f64> = paths.iter().map(|p| read_image(p).unwrap().mean()[0]).collect();
    // Crossing the polarizers darkens the image.
    assert!(red[0] > 2.0 * red[3], "{red:?}");
}

#[test]
fn invalid_protocol_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "CHAMBER,wt,standard\nSET,red,3\n").unwrap();
    let (code, err) = chamber(&["run", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--name", "x"]);
    assert_eq!(code, 1);
    assert!(err.contains("red"), "{err}");
}
