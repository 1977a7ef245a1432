//! Acceptance gate: one line per criterion, non-zero exit if any fails.
//!
//! Oracles here are written independently of the library: brute-force
//! partition search for KMeans, hand-annotated fixtures for the parser,
//! arithmetic from the published confusion matrix for the metrics.

mod common;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use common::mock_server::{MockServer, Reply};
use common::*;
use serp_intent::clustering::{elbow_select, kmeans_fit, kmeans_fit_traced, KMeansConfig};
use serp_intent::evaluate::{precision_recall, ConfusionMatrix};
use serp_intent::features::default_spec;
use serp_intent::fetcher::{Clock, FetchConfig, FetchStatus, Fetcher, HttpTransport, ProxyPool, VirtualClock};
use serp_intent::parser::{parse_html, ParseError, SelectorConfig};
use serp_intent::pipeline::run_pipeline;
use serp_intent::schema::ClusterIntent;
use serp_intent::tagger::{tag_query, CountMode, IntentLexicon, PRIORITY};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1. Published confusion matrix -> published precision / recall.
fn table4_metrics() -> Check {
    let text = std::fs::read_to_string(fixtures().join("table4.json")).map_err(|e| e.to_string())?;
    let cm = ConfusionMatrix::from_json(&text).map_err(|e| e.to_string())?;
    let m = precision_recall(&cm).map_err(|e| e.to_string())?;
    let expected = [
        (ClusterIntent::Informational, 0.464, 0.940),
        (ClusterIntent::LocalPlace, 0.641, 0.132),
        (ClusterIntent::SexualRacism, 0.579, 0.114),
    ];
    // hand arithmetic on the printed cells
    let exact = [(1232.0 / 2655.0, 1232.0 / 1311.0), (141.0 / 220.0, 141.0 / 1071.0), (70.0 / 121.0, 70.0 / 614.0)];
    let mut worst: f64 = 0.0;
    for ((intent, p, r), (pe, re)) in expected.iter().zip(exact) {
        let got = m.get(*intent);
        for (g, want) in [(got.precision, *p), (got.recall, *r)] {
            worst = worst.max((g - want).abs());
            ensure((g - want).abs() <= 0.0005, || format!("{intent}: {g} vs {want}"))?;
        }
        ensure((got.precision - pe).abs() < 1e-12 && (got.recall - re).abs() < 1e-12, || format!("{intent}: arithmetic"))?;
        ensure(((got.precision * 100.0).round() - (p * 100.0).round()).abs() < 1e-9, || format!("{intent}: 2dp"))?;
    }
    Ok(format!("max |diff| {worst:.5}"))
}

/// Clustered random instance: k centres in [0,10]^d, unit-variance points.
fn oracle_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, usize) {
    let n = rng.gen_range(6..=12);
    let d = rng.gen_range(1..=3);
    let k = rng.gen_range(2..=3);
    let centres: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.gen_range(0.0..10.0)).collect()).collect();
    let noise = Normal::new(0.0, 1.0).unwrap();
    let data = (0..n)
        .map(|i| centres[i % k].iter().map(|c| c + noise.sample(rng)).collect())
        .collect();
    (data, k)
}

/// Minimum wcss over every labeling of n points into at most k groups.
fn brute_force_wcss(data: &[Vec<f64>], k: usize) -> f64 {
    let n = data.len();
    let d = data[0].len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (x, &l) in data.iter().zip(&labels) {
            counts[l] += 1;
            for j in 0..d {
                sums[l][j] += x[j];
            }
        }
        let mut total = 0.0;
        for (x, &l) in data.iter().zip(&labels) {
            for j in 0..d {
                let mean = sums[l][j] / counts[l] as f64;
                total += (x[j] - mean).powi(2);
            }
        }
        best = best.min(total);
        // odometer, first point pinned to group 0
        let mut i = n - 1;
        loop {
            if i == 0 {
                return best;
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i -= 1;
        }
    }
}

// 2. Best-of-20 KMeans reaches the global optimum on small instances.
fn kmeans_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20240101);
    let instances = 24;
    let mut worst: f64 = 0.0;
    for case in 0..instances {
        let (data, k) = oracle_instance(&mut rng);
        let config = KMeansConfig { k, seed: case as u64, n_init: 20, tol: 0.0, max_iters: 300 };
        let model = kmeans_fit(&data, &config).map_err(|e| e.to_string())?;
        let optimum = brute_force_wcss(&data, k);
        let rel = (model.wcss - optimum).abs() / optimum.max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        ensure(rel <= 1e-9, || format!("instance {case} (n={}, k={k}): {} vs optimum {optimum}", data.len(), model.wcss))?;
    }
    Ok(format!("{instances} instances, worst relative gap {worst:.1e}"))
}

// 3. wcss never increases between Lloyd iterations.
fn lloyd_monotone() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut datasets: Vec<(Vec<Vec<f64>>, usize)> = (0..40).map(|_| oracle_instance(&mut rng)).collect();
    datasets.push((blobs(5), 3));
    let uniform: Vec<Vec<f64>> = (0..200).map(|_| (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
    for k in 1..=8 {
        datasets.push((uniform.clone(), k));
    }
    let (mut runs, mut steps, mut violations) = (0, 0, 0);
    for (i, (data, k)) in datasets.iter().enumerate() {
        let config = KMeansConfig { k: *k, seed: i as u64, n_init: 10, tol: 0.0, max_iters: 300 };
        let (_, trace) = kmeans_fit_traced(data, &config).map_err(|e| e.to_string())?;
        for history in trace {
            runs += 1;
            for w in history.windows(2) {
                steps += 1;
                if w[1] > w[0] {
                    violations += 1;
                }
            }
        }
    }
    ensure(violations == 0, || format!("{violations} increases in {steps} steps"))?;
    Ok(format!("{runs} runs, {steps} iterations, 0 increases"))
}

/// Three σ=0.5 blobs of 30 points, centres pairwise >= 12 apart.
fn blobs(seed: u64) -> Vec<Vec<f64>> {
    let centres = [[0.0, 0.0], [12.0, 0.0], [6.0, 11.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).unwrap();
    centres
        .iter()
        .flat_map(|c| (0..30).map(|_| vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]).collect::<Vec<_>>())
        .collect()
}

// 4. Elbow over K in [1, 8] picks 3 on three blobs.
fn elbow_blobs() -> Check {
    let data = blobs(7);
    let e = elbow_select(&data, 1, 8, &KMeansConfig { seed: 7, ..KMeansConfig::default() }).map_err(|e| e.to_string())?;
    ensure(e.selected_k == 3, || format!("selected {} ({:?})", e.selected_k, e.wcss_values))?;
    Ok("selected_k 3".into())
}

// 5. Parser fixtures match their canonical JSON; captcha page refused.
fn parser_fixtures() -> Check {
    let cases = manifest();
    let pages: Vec<&Case> = cases.iter().filter(|c| !c.captcha).collect();
    ensure(pages.len() >= 15, || format!("only {} fixtures", pages.len()))?;
    for case in &pages {
        golden_json(case)?;
        let doc = parse_case(case);
        let got: Vec<_> = doc.blocks.iter().map(|b| (b.block_type, b.items.len())).collect();
        ensure(got == case.blocks, || format!("{}: {got:?}", case.file))?;
    }
    let covered: std::collections::BTreeSet<_> = pages.iter().flat_map(|c| c.blocks.iter().map(|b| b.0)).collect();
    ensure(covered.len() == 20, || format!("{} of 20 block types covered", covered.len()))?;
    let captcha = cases.iter().find(|c| c.captcha).ok_or("no captcha fixture")?;
    let r = parse_html(&captcha.html(), &captcha.query, &SelectorConfig::default(), FETCHED_AT);
    ensure(matches!(r, Err(ParseError::CaptchaDetected)), || format!("captcha page gave {r:?}"))?;
    Ok(format!("{} pages byte-exact, 20/20 types, captcha refused", pages.len()))
}

// 6. 19 default features; fixture vectors match the checked-in CSV.
fn feature_vectors() -> Check {
    let spec = default_spec();
    ensure(spec.len() == 19, || format!("{} features", spec.len()))?;
    check_golden(&golden_features_path(), &fixture_matrix_csv())?;
    Ok(format!("19 features, {} vectors exact", fixture_matrix().len()))
}

// 7. Tie and default rules over every count triple in {0..3}^3.
fn tagger_grid() -> Check {
    let word = |intent: ClusterIntent, i: usize| format!("{}{}", ["alpha", "beta", "gamma"][intent.index()], i);
    let lexicon = IntentLexicon::new(
        ClusterIntent::ALL.map(|intent| (intent, (0..3).map(|i| word(intent, i)).collect())),
    )
    .map_err(|e| e.to_string())?;
    let stop = serp_intent::characterize::WordList::default();
    let mut checked = 0;
    for a in 0..=3 {
        for b in 0..=3 {
            for c in 0..=3 {
                let counts = [a, b, c];
                let mut words = vec!["filler".to_string()];
                for intent in ClusterIntent::ALL {
                    words.extend((0..counts[intent.index()]).map(|i| word(intent, i)));
                }
                let tagged = tag_query(&words.join(" "), &lexicon, &stop, CountMode::Multiplicity).map_err(|e| e.to_string())?;
                ensure(tagged.counts == counts, || format!("{counts:?} counted as {:?}", tagged.counts))?;
                let max = *counts.iter().max().unwrap();
                let expected = if max == 0 {
                    ClusterIntent::Informational
                } else {
                    *PRIORITY.iter().find(|i| counts[i.index()] == max).unwrap()
                };
                ensure(tagged.intent == expected, || format!("{counts:?} -> {} not {expected}", tagged.intent))?;
                let positive: Vec<_> = ClusterIntent::ALL.into_iter().filter(|i| counts[i.index()] > 0).collect();
                if positive.len() == 1 {
                    ensure(tagged.intent == positive[0], || format!("{counts:?}: single positive lost"))?;
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} triples"))
}

// 8. Scripted captcha, captcha, OK through three proxies; spacing on virtual time.
fn fetcher_scenario() -> Check {
    let server = MockServer::new(vec![Reply::captcha(), Reply::captcha()], Reply::ok(SERP_PAGE));
    let proxies: Vec<String> = ["A", "B", "C"].iter().map(|l| server.listen(l)).collect();
    let clock = Arc::new(VirtualClock::new(1_704_067_200_000));
    let config = FetchConfig {
        endpoint_url: "http://serp.test/search".into(),
        min_delay_ms: 2_000,
        max_retries: 3,
        captcha_cooldown_s: 60,
        ..FetchConfig::default()
    };
    let transport = Arc::new(HttpTransport::new(Duration::from_secs(5)));
    let fetcher = Fetcher::new(config, transport, clock.clone(), SelectorConfig::default()).map_err(|e| e.to_string())?;
    let pool = Mutex::new(ProxyPool::new(proxies));

    let r = fetcher.fetch_query("pizza near me", &pool).map_err(|e| e.to_string())?;
    ensure(r.status == FetchStatus::Ok, || format!("status {:?}", r.status))?;
    ensure(r.attempts == 3, || format!("{} attempts", r.attempts))?;
    let cooling = pool.lock().unwrap().cooling_count(clock.now_ms());
    ensure(cooling == 2, || format!("{cooling} proxies cooling"))?;

    // keep going until the cooled proxies come back into rotation
    let mut starts: BTreeMap<String, Vec<u64>> = BTreeMap::new();
    for a in &r.log {
        starts.entry(a.proxy.clone().unwrap()).or_default().push(a.started_ms);
    }
    for i in 0..8 {
        let r = fetcher.fetch_query(&format!("query {i}"), &pool).map_err(|e| e.to_string())?;
        for a in r.log {
            starts.entry(a.proxy.unwrap()).or_default().push(a.started_ms);
        }
    }
    let mut min_gap = u64::MAX;
    for times in starts.values() {
        for w in times.windows(2) {
            min_gap = min_gap.min(w[1] - w[0]);
        }
    }
    ensure(min_gap >= 2_000, || format!("gap {min_gap} ms below min_delay"))?;
    Ok(format!("Ok after 3 attempts, 2 cooling, min same-proxy gap {min_gap} ms"))
}

// 9. Pipeline twice -> identical bytes; clusters carry the expected signatures.
fn pipeline_determinism() -> Check {
    let runs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    let mut summaries = Vec::new();
    for dir in &runs {
        summaries.push(run_pipeline(&corpus_config(dir.path())).map_err(|e| e.to_string())?);
    }
    let a = snapshot(runs[0].path());
    let b = snapshot(runs[1].path());
    ensure(a == b, || "outputs differ between runs".into())?;

    let s = &summaries[0];
    ensure(s.profiles.len() == 3, || format!("{} clusters", s.profiles.len()))?;
    let names = &corpus_config(runs[0].path()).cluster_names;
    let profile = |intent: ClusterIntent| {
        let id = names.iter().find(|(_, i)| **i == intent).map(|(c, _)| *c).unwrap();
        s.profiles.iter().find(|p| p.cluster_id == id).unwrap()
    };
    let info = profile(ClusterIntent::Informational);
    let local = profile(ClusterIntent::LocalPlace);
    let sexrac = profile(ClusterIntent::SexualRacism);
    let top = |f: &dyn Fn(&serp_intent::characterize::ClusterProfile) -> f64| {
        s.profiles.iter().map(|p| f(p)).fold(f64::MIN, f64::max)
    };
    let fs = |p: &serp_intent::characterize::ClusterProfile| p.binary("featured_snippet").unwrap();
    let paa = |p: &serp_intent::characterize::ClusterProfile| p.numeric("paa_count").unwrap();
    let lr = |p: &serp_intent::characterize::ClusterProfile| p.binary("local_result").unwrap();
    let kg = |p: &serp_intent::characterize::ClusterProfile| p.binary("knowledge_graph").unwrap();
    ensure(fs(info) == top(&fs) && paa(info) == top(&paa) && fs(info) > 0.5, || "informational lacks FS/PAA lead".into())?;
    ensure(sexrac.numeric("related_searches_count") == Some(0.0), || "no zero-related-searches cluster".into())?;
    ensure(lr(local) == top(&lr) && kg(local) == top(&kg) && lr(local) > 0.5, || "local cluster lacks local/KG lead".into())?;
    Ok(format!("{} files identical across runs; signatures present", a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("table 4 precision/recall within 0.0005", table4_metrics),
        ("kmeans best-of-20 equals brute-force optimum", kmeans_oracle),
        ("lloyd wcss monotone per iteration", lloyd_monotone),
        ("elbow recovers k=3 on blobs", elbow_blobs),
        ("parser fixtures byte-exact, captcha refused", parser_fixtures),
        ("19 features, vectors match goldens", feature_vectors),
        ("tagger grid {0..3}^3", tagger_grid),
        ("fetcher mock-server scenario", fetcher_scenario),
        ("pipeline byte-identical across runs", pipeline_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let ms = start.elapsed().as_secs_f64() * 1000.0;
        match outcome {
            Ok(detail) => println!("PASS  {}. {name} ({detail}) [{ms:.0} ms]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {}. {name}: {why} [{ms:.0} ms]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
