//! GN-model launch-power optimization and the steps model that
//! randomizes WDM power profiles around it.
//!
//! Run with: cargo run --release --example gn_launch_power

use osnrsim::metrics::SnrValue;
use osnrsim::routegen::{default_catalog, FiberKind, Route, Span};
use osnrsim::scenario::{
    gn_optimal_power_dbm, link_delivered_snr, sample_target_snr_ase, steps_model_powers,
};

fn main() {
    let (baud, n_ch, spacing, nf) = (56e9, 13, 62.5e9, 5.0);

    println!("== GN-model optimal launch power per fiber type (80 km spans) ==");
    for fiber in default_catalog() {
        let p = gn_optimal_power_dbm(&fiber, 80.0, baud, n_ch, spacing, nf).unwrap();
        println!("{:>9}: {:>6.2} dBm", fiber.kind.name(), p);
    }

    println!("\n== 13-channel steps-model power profiles ==");
    let ndsf = default_catalog()[FiberKind::NDSF.index()];
    let base = gn_optimal_power_dbm(&ndsf, 80.0, baud, n_ch, spacing, nf).unwrap();
    for seed in [3u64, 4, 5] {
        let (powers, draw) = steps_model_powers(seed, n_ch, |_| base, 2.0, 2.0).unwrap();
        print!("seed {seed}: M={:>2}, sizes {:?} -> ", draw.m_groups, draw.group_sizes);
        for p in &powers {
            print!("{p:>6.1}");
        }
        println!(" dBm");
    }

    println!("\n== delivered SNR and the ASE target draw ==");
    let spans: Vec<Span> = (0..10).map(|_| Span::new(ndsf, 80.0, nf).unwrap()).collect();
    let route = Route { spans };
    let launch = base - 2.0;
    let delivered = link_delivered_snr(&route, launch, baud).unwrap();
    println!(
        "10 x 80 km NDSF at {:.2} dBm: delivered SNR {:.2} dB",
        launch,
        delivered.db()
    );
    let threshold = SnrValue::from_db(5.354); // QPSK at 3.2% pre-FEC BER
    print!("uniform ASE targets in [{:.2}, {:.2}] dB:", threshold.db(), delivered.db());
    for seed in 0..6 {
        let t = sample_target_snr_ase(seed, delivered, threshold).unwrap();
        print!(" {:.2}", t.db());
    }
    println!(" dB");
}
