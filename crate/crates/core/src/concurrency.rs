//! Runs a batch of independent jobs on their own threads under one shared
//! deadline. A job that panics or misses the deadline yields no value; the
//! others are unaffected.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum JobStatus {
    Ok,
    Panicked(String),
    TimedOut,
}

#[derive(Debug)]
pub struct JobResult<T> {
    pub value: Option<T>,
    pub status: JobStatus,
    pub elapsed_ms: f64,
}

pub type Job<T> = Box<dyn FnOnce() -> T + Send + 'static>;

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Runs every job and returns results in input order. Jobs still running
/// at the deadline are abandoned; their threads finish in the background
/// and their output is discarded.
pub fn run_all<T: Send + 'static>(jobs: Vec<Job<T>>, budget: Duration) -> Vec<JobResult<T>> {
    let started = Instant::now();
    let deadline = started + budget;
    let n = jobs.len();
    let (tx, rx) = mpsc::channel();
    for (i, job) in jobs.into_iter().enumerate() {
        let job_tx = tx.clone();
        let spawned = thread::Builder::new().name(format!("job-{i}")).spawn(move || {
            let t = Instant::now();
            let out = catch_unwind(AssertUnwindSafe(job));
            let _ = job_tx.send((i, out.map_err(|p| panic_message(p.as_ref())), t.elapsed()));
        });
        if let Err(e) = spawned {
            let _ = tx.send((i, Err(format!("could not spawn: {e}")), Duration::ZERO));
        }
    }
    drop(tx);

    let mut results: Vec<JobResult<T>> = (0..n)
        .map(|_| JobResult { value: None, status: JobStatus::TimedOut, elapsed_ms: budget.as_secs_f64() * 1000.0 })
        .collect();
    let mut pending = n;
    while pending > 0 {
        let now = Instant::now();
        if now >= deadline {
            break;
        }
        match rx.recv_timeout(deadline - now) {
            Ok((i, out, took)) => {
                pending -= 1;
                let elapsed_ms = took.as_secs_f64() * 1000.0;
                results[i] = match out {
                    Ok(v) => JobResult { value: Some(v), status: JobStatus::Ok, elapsed_ms },
                    Err(msg) => JobResult { value: None, status: JobStatus::Panicked(msg), elapsed_ms },
                };
            }
            Err(_) => break,
        }
    }
    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_keep_input_order() {
        let jobs: Vec<Job<usize>> = (0..8usize)
            .map(|i| {
                Box::new(move || {
                    thread::sleep(Duration::from_millis((8 - i as u64) * 3));
                    i
                }) as Job<usize>
            })
            .collect();
        let out = run_all(jobs, Duration::from_secs(5));
        assert_eq!(out.iter().map(|r| r.value.unwrap()).collect::<Vec<_>>(), (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn panics_and_timeouts_are_isolated() {
        let jobs: Vec<Job<u8>> = vec![
            Box::new(|| 1),
            Box::new(|| panic!("boom")),
            Box::new(|| {
                thread::sleep(Duration::from_secs(4));
                3
            }),
        ];
        let started = Instant::now();
        let out = run_all(jobs, Duration::from_millis(1500));
        assert!(started.elapsed() < Duration::from_secs(3));
        assert_eq!(out[0].value, Some(1));
        assert_eq!(out[1].status, JobStatus::Panicked("boom".into()));
        assert_eq!(out[2].status, JobStatus::TimedOut);
        assert!(out[2].value.is_none());
    }

    #[test]
    fn empty_batch() {
        assert!(run_all::<()>(Vec::new(), Duration::from_millis(1)).is_empty());
    }
}
