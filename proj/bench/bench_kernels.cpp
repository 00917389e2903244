// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include "chaff/corpus.hpp"
#include "chaff/heap.hpp"
#include "chaff/obfuscator.hpp"

using namespace chaff;

namespace {

void heap_cases(benchmark::State &st)
{
    int depth = static_cast<int>(st.range(0));
    for (auto _ : st)
        benchmark::DoNotOptimize(heap::check_corruption_cases(heap::OverflowValues{}, depth));
}

void heap_cases_serial(benchmark::State &st)
{
    int depth = static_cast<int>(st.range(0));
    for (auto _ : st)
        benchmark::DoNotOptimize(heap::check_corruption_cases_serial(heap::OverflowValues{}, depth));
}

void chain_subsets(benchmark::State &st)
{
    auto masks = plan_masks(static_cast<uint32_t>(st.range(0)), 1);
    for (auto _ : st)
        benchmark::DoNotOptimize(check_chain_subsets(masks, 10000, 1));
}

void chain_subsets_serial(benchmark::State &st)
{
    auto masks = plan_masks(static_cast<uint32_t>(st.range(0)), 1);
    for (auto _ : st)
        benchmark::DoNotOptimize(check_chain_subsets_serial(masks, 10000, 1));
}

/// One injected fixture, kept alive for the validation benchmarks.
struct Injected {
    Fixture fx;
    InjectResult result;
    heap::CaseTable cases;

    Injected()
    {
        Manifest m = load_manifest(std::string(CHAFF_SOURCE_DIR) + "/corpus/kvstore");
        fx = load_fixture(m.source, m.inputs_dir);
        RunConfig cfg;
        cfg.quotas = *m.bugs;
        result = inject(fx, cfg);
        cases = heap::check_corruption_cases(heap::OverflowValues{}, cfg.heap_depth);
    }

    ValidationInputs inputs() const
    {
        ValidationInputs in;
        in.transformed = &result.synthesis.transformed;
        in.specs = &result.synthesis.specs;
        in.triggers = &result.triggers;
        in.clean = &fx.inputs;
        in.cases = &cases;
        return in;
    }
};

const Injected &injected()
{
    static const Injected inj;
    return inj;
}

void validation(benchmark::State &st)
{
    auto in = injected().inputs();
    for (auto _ : st)
        benchmark::DoNotOptimize(validate_bugs(in));
    st.counters["bugs"] = static_cast<double>(in.specs->size());
}

void validation_serial(benchmark::State &st)
{
    auto in = injected().inputs();
    for (auto _ : st)
        benchmark::DoNotOptimize(validate_bugs_serial(in));
    st.counters["bugs"] = static_cast<double>(in.specs->size());
}

} // namespace

BENCHMARK(heap_cases)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK(heap_cases_serial)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);
BENCHMARK(chain_subsets)->DenseRange(2, 5)->Unit(benchmark::kMillisecond);
BENCHMARK(chain_subsets_serial)->DenseRange(2, 5)->Unit(benchmark::kMillisecond);
BENCHMARK(validation)->Unit(benchmark::kMillisecond);
BENCHMARK(validation_serial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
