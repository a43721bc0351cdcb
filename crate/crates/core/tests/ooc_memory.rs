//! Peak heap use of the incremental driver, measured with a counting allocator.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

use podsketch::format::write_podm_file;
use podsketch::isma::IsmaConfig;
use podsketch::ooc::{incremental_pod, BlockReader};
use podsketch::synth::low_rank_plus_noise;

struct Counting;

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            let now = CURRENT.fetch_add(layout.size(), Ordering::SeqCst) + layout.size();
            PEAK.fetch_max(now, Ordering::SeqCst);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        CURRENT.fetch_sub(layout.size(), Ordering::SeqCst);
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

#[test]
fn peak_memory_stays_within_block_plus_samples_plus_modes() {
    let (m, n, t) = (3000, 4000, 4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.podm");
    write_podm_file(&path, &low_rank_plus_noise(m, n, &[9.0, 7.0, 5.0, 3.0, 1.0], 1e-3, 2)).unwrap();

    let mut cfg = IsmaConfig::new(5);
    cfg.columns_per_round = Some(200);
    let c = cfg.columns_per_round.unwrap();

    let (outcome, reads, peak, baseline) = podsketch::par::with_threads(1, || {
        // the dense kernels keep a per-thread packing buffer whose size does
        // not depend on the matrix; allocate it before measuring
        let warm = podsketch::synth::gaussian_matrix(40, 40, 0);
        podsketch::matcore::dense_svd(&warm).unwrap();
        let mut reader = BlockReader::open(&path, t).unwrap();
        let baseline = CURRENT.load(Ordering::SeqCst);
        PEAK.store(baseline, Ordering::SeqCst);
        let outcome = incremental_pod(&mut reader, &cfg).unwrap();
        (outcome, reader.reads(), PEAK.load(Ordering::SeqCst), baseline)
    });
    assert_eq!(reads, t);
    assert_eq!(outcome.factor.rank(), 5);

    let widest = (0..t).map(|i| podsketch::ooc::block_bounds(n, t, i).len()).max().unwrap();
    let budget = 8 * m * (widest + c + cfg.r);
    let used = peak - baseline;
    println!("peak {used} bytes, budget {budget} bytes");
    assert!(used as f64 <= 1.2 * budget as f64, "peak {used} exceeds 1.2 x {budget}");
}
