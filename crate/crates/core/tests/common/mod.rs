//! Synthetic tables shared by the integration tests.

#![allow(dead_code)]

use featcross::tabular::{read_csv, FeatureSchema, RawTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn schema_json(fields: &[(&str, &str)], label: &str) -> String {
    let fs: Vec<String> = fields
        .iter()
        .map(|(n, k)| format!(r#"{{"name":"{n}","kind":"{k}"}}"#))
        .collect();
    format!(r#"{{"fields":[{}],"label":"{label}"}}"#, fs.join(","))
}

/// Two numeric and three categorical columns; the label follows `a xor b`
/// with 10% noise and `x` adds a weak trend. About 2% of cells are blank.
pub fn mixed_csv(n: usize, seed: u64) -> (FeatureSchema, String) {
    let schema = FeatureSchema::from_json_str(&schema_json(
        &[
            ("x", "numerical"),
            ("a", "categorical"),
            ("b", "categorical"),
            ("z", "numerical"),
            ("c", "categorical"),
        ],
        "y",
    ))
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from("x,a,b,z,c,y\n");
    for _ in 0..n {
        let x: f64 = rng.random_range(0.0..100.0);
        let a = rng.random_range(0..2u8);
        let b = rng.random_range(0..2u8);
        let z: f64 = rng.random_range(-5.0..5.0);
        let c = rng.random_range(0..5u8);
        let p = if a ^ b == 1 { 0.9 } else { 0.1 } * 0.8 + 0.2 * (x / 100.0);
        let y = u8::from(rng.random_bool(p));
        let blank = |rng: &mut ChaCha8Rng, s: String| if rng.random_bool(0.02) { String::new() } else { s };
        let cells = [
            blank(&mut rng, format!("{x:.3}")),
            blank(&mut rng, format!("a{a}")),
            blank(&mut rng, format!("b{b}")),
            blank(&mut rng, format!("{z:.3}")),
            blank(&mut rng, format!("c{c}")),
        ];
        out.push_str(&format!("{},{y}\n", cells.join(",")));
    }
    (schema, out)
}

pub fn mixed_table(n: usize, seed: u64) -> RawTable {
    let (schema, csv) = mixed_csv(n, seed);
    read_csv(csv.as_bytes(), &schema, true).unwrap()
}
