//! Regenerates the synthetic desk fixtures in `fixtures/`.
//!
//! Prices: the first ten tickers of the universe parameter file, simulated
//! as independent GBMs for 756 daily steps. Factors: Gaussian daily
//! factor returns with calm and turbulent market regimes.

use std::fmt::Write as _;
use std::path::Path;

use dynbl::data::FactorModel;
use dynbl::fmt::{sig, write_atomic, PANEL_DIGITS};
use dynbl::simulate::{load_gbm_params_csv, simulate_path};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const SEED: u64 = 20_240_601;
const STEPS: usize = 756;
const N_ASSETS: usize = 10;

fn factor_vol(name: &str) -> f64 {
    match name {
        "MKTRF" => 0.011,
        "SMB" => 0.006,
        "HML" => 0.007,
        "RMW" => 0.004,
        "CMA" => 0.004,
        "UMD" => 0.009,
        _ => unreachable!(),
    }
}

fn main() -> dynbl::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut params = load_gbm_params_csv(&dir.join("universe_gbm_params.csv"))?;
    params.tickers.truncate(N_ASSETS);
    params.drift_annual = params.drift_annual.rows(0, N_ASSETS).into_owned();
    params.vol_annual = params.vol_annual.rows(0, N_ASSETS).into_owned();
    params.s0 = DVector::from_element(N_ASSETS, 100.0);
    params.horizon_steps = STEPS;
    params.seed = SEED;
    let panel = simulate_path(&params, 0)?;
    panel.write_csv(&dir.join("desk_prices.csv"))?;

    for (model, file, stream) in [(FactorModel::Ff5, "ff5_factors.csv", 1u64), (FactorModel::Carhart4, "carhart4_factors.csv", 2)] {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        rng.set_stream(stream);
        let z = Normal::new(0.0, 1.0).expect("unit normal");
        let names = model.factor_names();
        let mut out = String::from("date");
        for n in names {
            let _ = write!(out, ",{n}");
        }
        out.push_str(",RF\n");
        for (t, date) in panel.dates.iter().enumerate() {
            let turbulent = (t / 126) % 2 == 1;
            let _ = write!(out, "{date}");
            for n in names {
                let mut vol = factor_vol(n);
                if turbulent && *n == "MKTRF" {
                    vol *= 1.8;
                }
                let mean = if *n == "MKTRF" { 0.0003 } else { 0.0 };
                let _ = write!(out, ",{}", sig(mean + vol * z.sample(&mut rng), PANEL_DIGITS));
            }
            // about 2% a year
            out.push_str(",0.00008\n");
        }
        write_atomic(&dir.join(file), out.as_bytes())?;
    }
    Ok(())
}
