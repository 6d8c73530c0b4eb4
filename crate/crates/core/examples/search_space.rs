//! Sizes of the joint space, canonical encodings and the mutation operator.
//!
//! cargo run --example search_space

use groupnas::rng::rng_from_seed;
use groupnas::space::{
    architecture_count, combination_count, combinations_containing, mutate_point, random_point, SearchPoint,
    SearchSpaceConfig, TaskId,
};

fn main() -> groupnas::Result<()> {
    for (n, p) in [(5, 2), (10, 2), (25, 3)] {
        let space = SearchSpaceConfig::new(n, p);
        println!(
            "N={n:>2} P={p}: {} combinations x {} architectures",
            combination_count(&space),
            architecture_count(&space).unwrap()
        );
    }

    let space = SearchSpaceConfig::new(5, 2);
    let mut rng = rng_from_seed(7);
    let point = random_point(&mut rng, &space);
    let text = point.encode();
    println!("\nrandom point  {text}");
    assert_eq!(SearchPoint::decode(&text, &space)?, point);

    let mut current = point;
    for step in 1..=5 {
        current = mutate_point(&mut rng, &current, &space);
        println!("mutation {step}    {current}");
    }

    let anchored = combinations_containing(TaskId(2), &space, 512, &mut rng);
    println!("\n{} candidate groups contain T2", anchored.len());
    let big = SearchSpaceConfig::new(25, 3);
    let capped = combinations_containing(TaskId(0), &big, 512, &mut rng);
    println!("at N=25 the candidate list is capped to {}", capped.len());
    Ok(())
}
