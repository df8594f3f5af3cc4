use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use towerzeta::cache::{CacheFile, Counter, LoadOutcome};
use towerzeta::count::{count_range, CountOptions};
use towerzeta::curve::{curve_from_id, tower_level};

#[test]
fn readers_never_see_a_torn_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.json");
    let mut file = CacheFile::default();
    file.save(&path).unwrap();
    let stop = Arc::new(AtomicBool::new(false));
    let reader = {
        let (path, stop) = (path.clone(), stop.clone());
        std::thread::spawn(move || {
            let mut reads = 0;
            while !stop.load(Ordering::Relaxed) {
                let text = std::fs::read_to_string(&path).unwrap();
                serde_json::from_str::<CacheFile>(&text).expect("complete file");
                reads += 1;
            }
            reads
        })
    };
    for id in ["T2", "T3", "Q4u0", "Q4u1", "Q4u0s1", "T4"] {
        let c = curve_from_id(id).unwrap();
        file.put(&c, &count_range(&c, 4, u64::MAX).unwrap()).unwrap();
        file.save(&path).unwrap();
    }
    stop.store(true, Ordering::Relaxed);
    assert!(reader.join().unwrap() > 0);
    let (back, outcome) = CacheFile::load(&path).unwrap();
    assert_eq!(outcome, LoadOutcome::Loaded);
    assert_eq!(back, file);
}

#[test]
fn counter_extends_cached_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let t3 = tower_level(3).unwrap();
    let (mut a, outcome) = Counter::with_cache(CountOptions::default(), &path).unwrap();
    assert_eq!(outcome, LoadOutcome::Missing);
    a.table(&t3, 2).unwrap();
    let (mut b, _) = Counter::with_cache(CountOptions::default(), &path).unwrap();
    let t = b.table(&t3, 4).unwrap();
    assert_eq!(t.rows.len(), 4);
    assert_eq!(t, count_range(&t3, 4, u64::MAX).unwrap());
    let (c, _) = Counter::with_cache(CountOptions::default(), &path).unwrap();
    assert_eq!(c.cached(&t3).unwrap().rows.len(), 4);
}

#[test]
fn per_curve_cap() {
    let t3 = tower_level(3).unwrap();
    let mut c = Counter::new(CountOptions::default());
    c.set_max_k([("T3".to_string(), 2)].into_iter().collect());
    assert_eq!(c.table(&t3, 5).unwrap().rows.len(), 2);
}
