use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simo_isq::decoders::{decode_ml, DecoderId, DecoderOptions};
use simo_isq::model::{antennas_for, AntennaSpec, Constellation, FadingDistribution, SystemInstance};
use simo_isq::par::Execution;
use simo_isq::sim::{run_experiment, ExperimentConfig};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    for (name, execution) in MODES {
        let cfg = ExperimentConfig {
            n_values: vec![32],
            antennas: AntennaSpec::Alpha(0.6),
            sigma_values: vec![0.3],
            decoders: vec![DecoderId::Risq, DecoderId::Amp],
            trials: 64,
            execution,
            ..ExperimentConfig::default()
        };
        group.bench_function(BenchmarkId::new(name, "n32_trials64"), |b| {
            b.iter(|| run_experiment(&cfg).unwrap())
        });
    }
    group.finish();
}

fn exhaustive_ml(c: &mut Criterion) {
    let constellation = Constellation::bpsk();
    let dims = antennas_for(16, AntennaSpec::Alpha(0.75)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let inst = SystemInstance::generate(&dims, &constellation, FadingDistribution::Gaussian, 0.3, &mut rng).unwrap();
    let mut group = c.benchmark_group("exhaustive_ml");
    group.sample_size(10);
    for (name, execution) in MODES {
        let opts = DecoderOptions {
            execution,
            ..DecoderOptions::default()
        };
        group.bench_function(BenchmarkId::new(name, "n16"), |b| {
            b.iter(|| decode_ml(&inst.h, &inst.y, &constellation, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, exhaustive_ml);
criterion_main!(benches);
