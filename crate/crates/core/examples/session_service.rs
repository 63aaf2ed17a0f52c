//! Drive a session through the store API the HTTP routes sit on.

use cfguide::session::{AnswerSubmission, FilterAction, SessionStore};
use cfguide::{default_study_spec, generate, GuidanceMode, Range};

fn main() {
    let store = SessionStore::in_memory();
    let (d, truth) = generate(&default_study_spec(), 2000).unwrap();
    let info = store.add_dataset(d, Some(truth.clone())).unwrap();
    let s = store.create_session(&info.id, GuidanceMode::Cf).unwrap();

    let r = store
        .mutate_filter(&s.id, FilterAction::Add { variable: "age".into(), range: None })
        .unwrap();
    println!("after add: {:?}", r.filters.variables().collect::<Vec<_>>());
    println!("next best: {:?}", &r.ranking.variables()[..3]);
    for h in &r.distributions.subsets {
        println!("  {:<36} n={:<5} {:?}", h.label, h.size, h.counts);
    }

    store
        .mutate_filter(
            &s.id,
            FilterAction::SetRange { variable: "age".into(), range: Range::new(0.0, 2.0).unwrap() },
        )
        .unwrap();
    let top: Vec<String> = truth.top(5).into_iter().map(String::from).collect();
    let answered = store
        .submit_answers(
            &s.id,
            AnswerSubmission { t1: top[..3].to_vec(), t2: top.clone(), t1_confidence: 4, t2_confidence: 3 },
        )
        .unwrap();
    println!("evaluation: {:?}", answered.evaluation);
    println!("{}", serde_json::to_string_pretty(&store.export_analysis(&s.id).unwrap()).unwrap());
}
