//! One line per primary acceptance criterion. Each check runs in its own
//! task so a failure is reported and the rest still run.

use std::future::Future;
use std::path::Path;
use std::time::{Duration, Instant};

use reqwest::Client;

use modelassist_testkit::{differential, dsl, e2e, gateway, goldens, metrics, ranking, replay};

struct Criterion {
    number: u32,
    name: &'static str,
    budget: Duration,
}

async fn check<F>(c: Criterion, body: F) -> bool
where
    F: Future<Output = ()> + Send + 'static,
{
    let started = Instant::now();
    let outcome = tokio::spawn(body).await;
    let elapsed = started.elapsed();
    let failure = match outcome {
        Err(e) if e.is_panic() => {
            let payload = e.into_panic();
            Some(
                payload
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panicked".to_string()),
            )
        }
        Err(e) => Some(e.to_string()),
        Ok(()) if elapsed > c.budget => Some(format!("took {elapsed:.2?}, budget {:?}", c.budget)),
        Ok(()) => None,
    };
    match &failure {
        None => println!("PASS criterion {}: {} ({elapsed:.2?})", c.number, c.name),
        Some(why) => println!("FAIL criterion {}: {}: {}", c.number, c.name, why.lines().next().unwrap_or("")),
    }
    failure.is_none()
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

async fn run_all() -> Vec<bool> {
    let mut results = Vec::new();

    let c = Criterion { number: 1, name: "prompt goldens byte-for-byte", budget: secs(1) };
    results.push(check(c, async { goldens::check_goldens() }).await);

    let c = Criterion { number: 2, name: "hospital completion with mock fixtures, 10 identical runs", budget: secs(5) };
    results.push(
        check(c, async {
            e2e::check_hospital_completion(Path::new(env!("CARGO_BIN_EXE_modelassist")), 10);
        })
        .await,
    );

    let c = Criterion { number: 3, name: "200 scripted rankings equal brute-force tallies", budget: secs(30) };
    results.push(
        check(c, async {
            for seed in 0..200 {
                ranking::check_script(seed).await;
            }
        })
        .await,
    );

    let c = Criterion { number: 4, name: "1000 model round trips and 10k fuzz inputs", budget: secs(60) };
    results.push(
        check(c, async {
            for seed in 0..1000 {
                dsl::check_round_trip(seed);
            }
            let parsed = dsl::fuzz_corpus(10_000).iter().filter(|i| dsl::check_fuzz_input(i)).count();
            assert!(parsed > 0, "no fuzz input parsed");
        })
        .await,
    );

    let c = Criterion { number: 5, name: "rates, overlap and Kruskal-Wallis", budget: secs(5) };
    results.push(
        check(c, async {
            metrics::check_kruskal_wallis_reference();
            metrics::check_overlap_reference();
            for seed in 0..500 {
                metrics::check_overlap_random(seed);
            }
            metrics::check_synthetic_fixture();
        })
        .await,
    );

    let c = Criterion { number: 6, name: "backoff schedule, cache reuse, cache key fields", budget: secs(5) };
    results.push(
        check(c, async {
            gateway::check_backoff(100, 2, 1000, 7).await;
            gateway::check_backoff(1000, 2, 32_000, 5).await;
            gateway::check_backoff(50, 3, 10_000, 4).await;
            gateway::check_cache_reuse().await;
            for seed in 0..200 {
                gateway::check_cache_key(seed);
            }
        })
        .await,
    );

    let c = Criterion { number: 7, name: "log write/read identity and replay", budget: secs(10) };
    results.push(
        check(c, async {
            for seed in 0..300 {
                replay::check_records(seed);
            }
            for seed in 0..100 {
                replay::check_replay(seed).await;
            }
        })
        .await,
    );

    let c = Criterion { number: 8, name: "100 HTTP sequences equal direct calls; polling misses nothing", budget: secs(60) };
    results.push(
        check(c, async {
            let client = Client::new();
            let (mut ok, mut accepted) = (0, 0);
            for seed in 0..100 {
                let (o, a) = differential::run_sequence(seed, &client).await;
                ok += o;
                accepted += a;
            }
            assert!(ok > 300 && accepted > 20, "{ok} successful steps, {accepted} accepts");
            differential::check_polling().await;
        })
        .await,
    );

    results
}

fn main() {
    std::panic::set_hook(Box::new(|_| {}));
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .unwrap();
    let results = runtime.block_on(run_all());
    let passed = results.iter().filter(|r| **r).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
