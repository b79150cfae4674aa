//! Expected accuracy of sending the least confident answers to a stronger
//! model, against picking answers at random.
//!
//! cargo run --example model_cascade

use tokbrier::apps::{expected_cascade_curve, lowest_confidence_order, random_selection_curve};
use tokbrier::synthetic::{bayes_optimal_records, generate, EtaFunction};
use tokbrier::ConfidenceScale;

fn main() -> tokbrier::Result<()> {
    let data = generate(&EtaFunction::logistic(vec![1.5, -1.0], 0.3)?, 1000, 4, 31)?;
    let records = bayes_optimal_records(&data, ConfidenceScale::PERCENT)?;
    let conf: Vec<f64> = records.iter().map(|r| r.confidence()).collect();
    let ids: Vec<&str> = records.iter().map(|r| r.id()).collect();
    let order = lowest_confidence_order(&conf, &ids);

    let budgets = [0, 100, 200, 300, 400];
    let guided = expected_cascade_curve(&data.true_eta, &order, 0.9, &budgets)?;
    let random = random_selection_curve(&data.true_eta, 0.9, &budgets)?;
    println!("budget  lowest-first  random");
    for (g, r) in guided.iter().zip(&random) {
        println!(
            "{:>6}  {:>12.4}  {:>6.4}",
            g.budget, g.expected_accuracy, r.expected_accuracy
        );
    }
    Ok(())
}
