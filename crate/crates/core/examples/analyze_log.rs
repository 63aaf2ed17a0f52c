//! Score an interaction log: behaviors, search tree shape and answers.

use cfguide::metrics::{analyze, evaluate_answers, write_log, EventKind, InteractionEvent};
use cfguide::{default_study_spec, generate, Range};

fn main() {
    let (_, truth) = generate(&default_study_spec(), 1).unwrap();
    let top = truth.top(5);

    let mut events = Vec::new();
    let mut log = |kind, var: &str, range: Option<(f64, f64)>| {
        let mut e = InteractionEvent::new(events.len() as u64 * 1000, "demo", kind, var);
        if let Some((lo, hi)) = range {
            e = e.with_range(Range::new(lo, hi).unwrap());
        }
        events.push(e);
    };
    log(EventKind::AddVariable, top[0], Some((0.0, 3.0)));
    log(EventKind::ChangeRange, top[0], Some((1.0, 3.0)));
    log(EventKind::RemoveVariable, top[0], None);
    log(EventKind::AddVariable, "sleep hours", Some((0.0, 2.0)));
    log(EventKind::AddVariable, top[1], Some((0.5, 2.0)));

    print!("{}", write_log(&events));
    let answers: Vec<String> = vec![top[0].into(), top[1].into(), "sleep hours".into()];
    let ranking: Vec<String> = top.iter().rev().map(|s| s.to_string()).collect();
    let eval = evaluate_answers(&answers, &ranking, &truth).unwrap();
    let report = analyze(&events, Some(&truth), Some(eval)).unwrap();
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
