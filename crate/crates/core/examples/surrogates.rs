//! The two potential surrogates: an MLP in x and a DeepONet mapping sensor
//! data and a coordinate to a potential value.

use semiclassical_control::nets::{backward, deeponet_eval, init_params, mlp_eval, Activation, DeepOnetSpec, MlpSpec, NetSpec};

fn main() -> semiclassical_control::Result<()> {
    let mlp = init_params(&NetSpec::Mlp(MlpSpec::new(&[50; 5], Activation::Tanh)), 0)?;
    println!("MLP 5x50: {} parameters", mlp.flat.len());
    for x in [-1.5, -0.5, 0.0, 0.5, 1.5] {
        let (_, dx) = backward(&mlp, &[x], 1.0)?;
        println!("  V({x:+.1}) = {:+.5}   dV/dx = {:+.5}", mlp_eval(&mlp, x)?, dx[0]);
    }

    let sensors = 50;
    let onet = init_params(&NetSpec::DeepOnet(DeepOnetSpec::new(sensors, 50, &[100, 100], &[100, 100])), 1)?;
    println!("DeepONet: {} parameters", onet.flat.len());
    // branch input packs Re then Im of the sensor values
    let u: Vec<f64> = (0..2 * sensors).map(|i| ((i as f64) * 0.3).sin()).collect();
    for y in [-1.0, 0.0, 1.0] {
        println!("  G(u)({y:+.1}) = {:+.5}", deeponet_eval(&onet, &u, y)?);
    }
    let json = onet.to_json()?;
    println!("serialized DeepONet: {} bytes", json.len());
    Ok(())
}
