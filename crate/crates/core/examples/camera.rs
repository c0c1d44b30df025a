//! Render camera images from the light tunnel and save them as PPM.

use chamber_twin::engine::{Engine, Fidelity};
use chamber_twin::params::Params;
use chamber_twin::variables::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(std::env::temp_dir);
    let mut engine = Engine::new(Config::LtCamera, Params::default(), Fidelity::SteadyState, 0)?;
    engine.intervene(&[("red", 255.0), ("green", 128.0), ("blue", 0.0)])?;

    for theta in [0.0, 45.0, 90.0] {
        engine.set("pol_2", theta)?;
        let row = engine.measure()?;
        let image = row.image.expect("lt_camera rows carry an image");
        let path = out.join(format!("camera_{theta}.ppm"));
        std::fs::write(&path, image.to_ppm())?;
        println!("pol_2 = {theta:4.1}  mean rgb = {:?}  -> {}", image.mean(), path.display());
    }
    Ok(())
}
