//! Folds attempt records into a learner model: distance history, hint
//! release and solved domains.
//!
//!     cargo run --example learner_model

use prolab::grader::Verdict;
use prolab::tutor::{update_model, AttemptRecord, HintLadder, HintRung, LearnerModel};

fn main() {
    let ladder = HintLadder::new(vec![
        HintRung { after: 3, text: "Check numbers one at a time with is_prime/1.".into() },
        HintRung { after: 5, text: "Stop at the first prime with a cut.".into() },
    ])
    .unwrap();
    let domains = vec!["arithmetic".to_string(), "recursion".to_string()];
    let distances = [1.0, 0.62, 0.62, 0.35, 0.2, 0.0];

    let mut model = LearnerModel::default();
    for (i, d) in distances.iter().enumerate() {
        let record = AttemptRecord {
            learner: "ann".into(),
            problem: "next_prime".into(),
            attempt: i as u64 + 1,
            source: String::new(),
            verdict: if *d == 0.0 { Verdict::Correct } else { Verdict::Incorrect },
            distance: *d,
            seed: 0,
            timestamp: 0,
        };
        update_model(&mut model, &record, &ladder, &domains).unwrap();
        let p = model.progress("next_prime").unwrap();
        println!(
            "attempt {}: distance {d:.2}, change {}, hints {:?}",
            record.attempt,
            p.distance_change().map_or("-".to_string(), |c| format!("{c:+.2}")),
            ladder.hints_due(p.failed_attempts)
        );
    }
    println!("\n{}", serde_json::to_string_pretty(&model).unwrap());
}
