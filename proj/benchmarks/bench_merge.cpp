#include <random>

#include <benchmark/benchmark.h>

#include "ace/delta.hpp"

using namespace ace;

namespace {

Playbook seeded_playbook(int bullets) {
  Playbook pb = new_playbook({"strategies", "general"}, 1 << 20);
  for (int i = 0; i < bullets; ++i) {
    pb.advance_step(1);
    pb.append_bullet(i % 2 == 0 ? "strategies" : "general",
                     "bullet content number " + std::to_string(i), pb.step());
  }
  return pb;
}

std::vector<DeltaContext> random_deltas(int n, int id_space, unsigned seed) {
  std::mt19937 rng(seed);
  std::vector<DeltaContext> deltas;
  for (int i = 0; i < n; ++i) {
    DeltaContext d;
    d.provenance = {"s" + std::to_string(rng() % 97),
                    static_cast<int>(rng() % 5), static_cast<int>(rng() % 3)};
    int ops = 1 + static_cast<int>(rng() % 4);
    for (int o = 0; o < ops; ++o) {
      if (rng() % 2 == 0)
        d.ops.push_back(AddOp{"general", "added " + std::to_string(rng())});
      else
        d.ops.push_back(
            MarkOp{format_bullet_id(1 + static_cast<int>(rng() % id_space)),
                   rng() % 2 == 0});
    }
    deltas.push_back(std::move(d));
  }
  return deltas;
}

}  // namespace

static void BM_MergeSingle(benchmark::State& state) {
  Playbook pb = seeded_playbook(static_cast<int>(state.range(0)));
  DeltaContext delta = random_deltas(1, static_cast<int>(state.range(0)), 1)[0];
  for (auto _ : state) {
    auto [next, report] = merge(pb, delta);
    benchmark::DoNotOptimize(next);
  }
}
BENCHMARK(BM_MergeSingle)->Arg(10)->Arg(100)->Arg(1000);

static void BM_MergeBatch(benchmark::State& state) {
  Playbook pb = seeded_playbook(100);
  auto deltas = random_deltas(static_cast<int>(state.range(0)), 100, 2);
  for (auto _ : state) {
    auto [next, reports] = merge_batch(pb, deltas);
    benchmark::DoNotOptimize(next);
  }
}
BENCHMARK(BM_MergeBatch)->Arg(1)->Arg(8)->Arg(64);

static void BM_Render(benchmark::State& state) {
  Playbook pb = seeded_playbook(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    std::string text = render(pb);
    benchmark::DoNotOptimize(text);
  }
}
BENCHMARK(BM_Render)->Arg(100)->Arg(1000);

BENCHMARK_MAIN();
