//! The per-row serving path must not allocate once its scratch is warm.

mod common;

use std::alloc::{GlobalAlloc, Layout, System};
use std::cell::Cell;

use featcross::pipeline::{fit, worker_pool};
use featcross::producer::{Producer, Scratch};
use featcross::search::SearchControl;
use featcross::RunConfig;

struct Counting;

thread_local! {
    static ALLOCS: Cell<usize> = const { Cell::new(0) };
}

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        ALLOCS.with(|c| c.set(c.get() + 1));
        unsafe { System.alloc(layout) }
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) }
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        ALLOCS.with(|c| c.set(c.get() + 1));
        unsafe { System.realloc(ptr, layout, new_size) }
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

#[test]
fn predict_row_does_not_allocate() {
    let table = common::mixed_table(2000, 3);
    let config = RunConfig::from_json_str(
        r#"{"bucket_count": 1024, "termination": {"max_cross_features": 2},
            "expert": {"hyper": {"alpha": 0.1, "l1": 1e-5, "l2": 1e-5, "batch_size": 64}}}"#,
    )
    .unwrap();
    let pool = worker_pool(Some(1)).unwrap();
    let out = fit(&table, &config, &pool, &SearchControl::new(), &mut |_| {}).unwrap();
    let producer = Producer::new(&out.artifact).unwrap();
    let rows: Vec<_> = (0..table.n_rows()).map(|r| table.row(r)).collect();
    let mut scratch = Scratch::new();
    producer.predict_row(&rows[0], &mut scratch).unwrap();

    let before = ALLOCS.with(Cell::get);
    let mut sum = 0.0;
    for row in &rows {
        sum += producer.predict_row(row, &mut scratch).unwrap();
    }
    let after = ALLOCS.with(Cell::get);
    assert!(sum > 0.0);
    assert_eq!(after - before, 0, "allocations on the hot path");
}
