//! Pre-memorization accuracy of a few hand-written trajectories.
//!
//! `cargo run --example premem_basics`

use premem::{
    average_premem, is_memorized, perplexity, pre_memorization_accuracy, ExampleId, ExampleTrajectory,
    MemorizationThreshold, TrajectoryPoint,
};

fn trajectory(name: &str, rows: &[(f64, f64, f64)]) -> ExampleTrajectory {
    let points = rows
        .iter()
        .map(|&(epoch, accuracy, perplexity)| TrajectoryPoint { epoch, accuracy, perplexity })
        .collect();
    ExampleTrajectory::new(ExampleId::new(name).unwrap(), points).unwrap()
}

fn main() {
    // perplexity of a target solution from its token log-likelihoods
    let ppl = perplexity(&[-0.9, -0.4, -1.3, -0.2]).unwrap();
    println!("target perplexity from 4 tokens: {ppl:.4}");

    // (epoch, accuracy, perplexity)
    let run = vec![
        // learns to solve the problem, then memorizes the trace
        trajectory("solved-then-memorized", &[(1.0, 0.25, 6.0), (2.0, 0.75, 3.1), (3.0, 0.875, 1.4), (4.0, 1.0, 1.05)]),
        // memorizes before it ever solves the problem
        trajectory("memorized-early", &[(1.0, 0.0, 2.2), (2.0, 0.125, 1.3), (3.0, 0.9375, 1.1), (4.0, 1.0, 1.02)]),
        // never memorized
        trajectory("unmemorized", &[(1.0, 0.125, 9.0), (2.0, 0.375, 7.5), (3.0, 0.5, 6.0), (4.0, 0.5625, 5.5)]),
    ];

    let p = MemorizationThreshold::new(1.5).unwrap();
    println!("\nthreshold p = {}", p.value());
    println!("{:<24} {:>8} {:>10} {:>10}", "example", "final acc", "memorized", "premem");
    for t in &run {
        let last = t.points().last().unwrap();
        let pm = pre_memorization_accuracy(t, t.final_epoch(), p).unwrap();
        println!(
            "{:<24} {:>8.3} {:>10} {:>10.4}",
            t.example_id().as_str(),
            last.accuracy,
            is_memorized(last.perplexity, p),
            pm
        );
    }

    println!("\ncurve of {} at every checkpoint:", run[0].example_id());
    for (pt, v) in run[0].points().iter().zip(run[0].premem_curve(p)) {
        println!("  epoch {:.0}: accuracy {:.3}, perplexity {:.2}, premem {:.3}", pt.epoch, pt.accuracy, pt.perplexity, v);
    }

    // final train accuracy is 1.0, 1.0 and 0.56; the premem average is the better
    // guess of how the model does on unseen problems
    for &epoch in &[2.0, 4.0] {
        println!("average premem at epoch {epoch}: {:.4}", average_premem(&run, epoch, p).unwrap());
    }

    println!("\nhow the threshold moves the average at epoch 4:");
    for pv in [1.0, 1.2, 1.5, 2.5, 4.0, 10.0] {
        let p = MemorizationThreshold::new(pv).unwrap();
        println!("  p = {pv:>4}: {:.4}", average_premem(&run, 4.0, p).unwrap());
    }
}
