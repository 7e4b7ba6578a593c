//! Markov-chain fiber route generation: type statistics, span-length
//! distribution and derived route quantities.
//!
//! Run with: cargo run --release --example route_sampling

use osnrsim::routegen::{sample_route, FiberKind, FiberMarkovModel};

fn main() {
    let model = FiberMarkovModel::default();

    println!("== one sampled 12-span route ==");
    let route = sample_route(42, &model, 12).unwrap();
    for (i, span) in route.spans.iter().enumerate() {
        println!(
            "span {i:>2}: {:>9}  {:>6.1} km  D={:>4.1} ps/nm/km  amp gain {:>5.2} dB",
            span.fiber.kind.name(),
            span.length_km,
            span.fiber.dispersion_ps_nm_km,
            span.amp_gain_db
        );
    }
    println!(
        "total {:.1} km, cumulative dispersion {:.0} ps/nm",
        route.total_length_km(),
        route.cumulative_dispersion_ps_nm()
    );

    println!("\n== fiber-type statistics over 20000 spans ==");
    let long = sample_route(7, &model, 20_000).unwrap();
    let mut counts = [0usize; 7];
    let mut transitions = 0usize;
    for pair in long.spans.windows(2) {
        if pair[0].fiber.kind != pair[1].fiber.kind {
            transitions += 1;
        }
    }
    for span in &long.spans {
        counts[span.fiber.kind.index()] += 1;
    }
    for kind in FiberKind::ALL {
        let share = counts[kind.index()] as f64 / long.spans.len() as f64;
        println!("{:>9}: {:>5.1}%  {}", kind.name(), share * 100.0, "*".repeat((share * 200.0) as usize));
    }
    println!(
        "type changes: {:.1}% of hops (0.9 self-transition default)",
        100.0 * transitions as f64 / (long.spans.len() - 1) as f64
    );

    let mean_len: f64 =
        long.spans.iter().map(|s| s.length_km).sum::<f64>() / long.spans.len() as f64;
    let min = long.spans.iter().map(|s| s.length_km).fold(f64::MAX, f64::min);
    let max = long.spans.iter().map(|s| s.length_km).fold(0.0f64, f64::max);
    println!("span lengths: mean {mean_len:.1} km, range [{min:.1}, {max:.1}] km (truncated normal 80±20, [20,120])");
}
