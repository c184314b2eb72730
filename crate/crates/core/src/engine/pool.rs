//! Fixed-size worker pool over an indexed work list.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("worker panicked on work item {index}: {message}")]
pub struct WorkerPanic {
    pub index: usize,
    pub message: String,
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}

/// Runs `work` over every item with `workers` threads. Items are claimed in
/// index order from a shared counter. `on_done` runs on the calling thread
/// as results arrive, in completion order. Results are returned in item
/// order, so the outcome does not depend on scheduling.
pub fn run_parallel<T, R, W, D>(items: &[T], workers: usize, work: W, mut on_done: D) -> Result<Vec<R>, WorkerPanic>
where
    T: Sync,
    R: Send,
    W: Fn(usize, &T) -> R + Sync,
    D: FnMut(usize, &R),
{
    let workers = workers.max(1).min(items.len().max(1));
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let mut results: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let mut failure = None;
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, Result<R, String>)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, abort, work) = (&next, &abort, &work);
            scope.spawn(move || loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = catch_unwind(AssertUnwindSafe(|| work(i, &items[i]))).map_err(panic_message);
                let failed = r.is_err();
                if tx.send((i, r)).is_err() || failed {
                    abort.store(true, Ordering::Relaxed);
                    break;
                }
            });
        }
        drop(tx);
        for (i, r) in rx {
            match r {
                Ok(r) => {
                    on_done(i, &r);
                    results[i] = Some(r);
                }
                Err(message) => {
                    failure.get_or_insert(WorkerPanic { index: i, message });
                }
            }
        }
    });
    if let Some(f) = failure {
        return Err(f);
    }
    Ok(results.into_iter().map(|r| r.expect("every item processed")).collect())
}
