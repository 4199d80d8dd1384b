use gridcast::ingest::{split, SplitSpec};
use gridcast::mar::{mar_fit_als, mar_predict, MarOptions};
use gridcast::metrics::{framewise, rmse, FramewiseOptions};
use gridcast::synth::{traveling_modes_fixture, TravelingModesSpec};
use gridcast::tensor::DenseTensor;
use gridcast::ttdmd::{ttdmd_fit, ttdmd_forecast, RankSpec, TtSnapshotTensors};
use std::time::Instant;

fn run(label: &str, spec: &TravelingModesSpec, rank: RankSpec, t_total: usize, seed: u64) {
    let (m, n) = (20, 30);
    let horizon = 100usize;
    let fs = traveling_modes_fixture(m, n, t_total, seed, &spec);
    let first = fs.dates[0];
    let train_days = t_total - horizon;
    let split_spec = SplitSpec {
        train_start: first,
        train_end: first + chrono::Days::new(train_days as u64 - 1),
        test_start: first + chrono::Days::new(train_days as u64),
        test_end: first + chrono::Days::new(t_total as u64 - 1),
    };
    let (train, test) = split(&fs, &split_spec).unwrap();

    let t1 = Instant::now();
    let tensors = TtSnapshotTensors::from_series_tensor(&train.values, 1.0).unwrap();
    let model = ttdmd_fit(&tensors, rank).unwrap();
    let x0 = train.field_at(train.len_time() - 1);
    let tt_fc = ttdmd_forecast(&model, &x0, horizon).unwrap();
    let tt_time = t1.elapsed();

    let t2 = Instant::now();
    let mar = mar_fit_als(&train.values, &MarOptions { max_iters: 200, ..Default::default() }).unwrap();
    let mar_fc = mar_predict(&mar, &x0, horizon).unwrap();
    let mar_time = t2.elapsed();

    let take7 = |t: &DenseTensor| {
        let slices: Vec<DenseTensor> = (0..7).map(|k| t.last_mode_slice(k)).collect();
        DenseTensor::stack_last_mode(&slices).unwrap()
    };
    let target7 = take7(&test.values);
    let tt_rmse7 = rmse(target7.data(), take7(&tt_fc.values).data()).unwrap();
    let mar_rmse7 = rmse(target7.data(), take7(&mar_fc).data()).unwrap();

    let fw_opts = FramewiseOptions::default();
    let tt_fw = framewise(&tt_fc.values, &test.values, &fw_opts).unwrap();
    let mar_fw = framewise(&mar_fc, &test.values, &fw_opts).unwrap();
    let mean = |v: &Vec<Option<f64>>| {
        let vals: Vec<f64> = v.iter().filter_map(|x| *x).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let r = |v: &Vec<Option<f64>>, i: usize| v[i].unwrap_or(f64::NAN);
    let c4a = tt_rmse7 < mar_rmse7;
    let c4b = mean(&tt_fw.nrmse) < mean(&mar_fw.nrmse);
    let tt_ratio = r(&tt_fw.nrmse,99)/r(&tt_fw.nrmse,9);
    let mar_ratio = r(&mar_fw.nrmse,99)/r(&mar_fw.nrmse,9);
    let c5 = tt_ratio <= 3.0 && mar_ratio >= 2.0;
    println!("{label}: rank={} rmse7 tt {tt_rmse7:.3} mar {mar_rmse7:.3} | meanNRMSE tt {:.4} mar {:.4} | ttRatio {tt_ratio:.2} marRatio {mar_ratio:.2} | C4 {} C5 {} | tt {:?} mar {:?}",
        model.rank, mean(&tt_fw.nrmse), mean(&mar_fw.nrmse), c4a && c4b, c5, tt_time, mar_time);
}






fn main() {
    use gridcast::dmd;
    let base = TravelingModesSpec::default();
    let spec = TravelingModesSpec { seasonal_period: 120.0, noise_sigma: 0.35, ..base.clone() };
    let fs = traveling_modes_fixture(20, 30, 700, 42, &spec);
    let first = fs.dates[0];
    let split_spec = SplitSpec {
        train_start: first,
        train_end: first + chrono::Days::new(599),
        test_start: first + chrono::Days::new(600),
        test_end: first + chrono::Days::new(699),
    };
    let (train, _test) = split(&fs, &split_spec).unwrap();

    let flat = train.values.matricize(2).unwrap().matrix;
    let pair = dmd::build_snapshot_pair(&flat.view(), 1.0).unwrap();
    for rank in [12usize, 30] {
        let model = dmd::dmd_fit(&pair, rank).unwrap();
        println!("dense dmd rank {rank}:");
        for (j, lam) in model.eigenvalues.iter().enumerate().take(8) {
            let p = std::f64::consts::TAU / lam.arg().abs();
            println!("  {j:2}: |l| {:.6} period {:8.2}", lam.norm(), p);
        }
    }

    let tensors = TtSnapshotTensors::from_series_tensor(&train.values, 1.0).unwrap();
    let model = ttdmd_fit(&tensors, RankSpec::EnergyFraction(0.999999)).unwrap();
    println!("ttdmd energy(0.999999): rank {}", model.rank);
    for (j, lam) in model.eigenvalues.iter().enumerate().take(8) {
        let p = std::f64::consts::TAU / lam.arg().abs();
        println!("  {j:2}: |l| {:.6} period {:8.2}", lam.norm(), p);
    }
}
