#include <random>

#include <benchmark/benchmark.h>

#include "ace/refine.hpp"

using namespace ace;

namespace {

Playbook noisy_playbook(int bullets, unsigned seed) {
  const char* stems[] = {"retry the request with backoff",
                         "retry requests using exponential backoff",
                         "validate inputs before dispatch",
                         "cache the lookup table between calls",
                         "prefer streaming over buffering"};
  std::mt19937 rng(seed);
  Playbook pb = new_playbook({"strategies", "general"}, 1 << 20);
  for (int i = 0; i < bullets; ++i) {
    pb.advance_step(1);
    const auto& b = pb.append_bullet(
        "strategies",
        std::string(stems[rng() % 5]) + " variant " + std::to_string(rng() % 9),
        pb.step());
    for (int m = 0; m < static_cast<int>(rng() % 3); ++m)
      pb.mark(b.id, rng() % 2 == 0, pb.step());
  }
  return pb;
}

}  // namespace

static void BM_Dedup(benchmark::State& state) {
  Playbook pb = noisy_playbook(static_cast<int>(state.range(0)), 5);
  HashingEmbedder embedder;
  for (auto _ : state) {
    auto [next, report] = dedup(pb, embedder, 0.90);
    benchmark::DoNotOptimize(next);
  }
}
BENCHMARK(BM_Dedup)->Arg(10)->Arg(100)->Arg(500);

static void BM_DedupCached(benchmark::State& state) {
  Playbook pb = noisy_playbook(static_cast<int>(state.range(0)), 5);
  CachingEmbedder embedder(std::make_shared<HashingEmbedder>());
  for (auto _ : state) {
    auto [next, report] = dedup(pb, embedder, 0.90);
    benchmark::DoNotOptimize(next);
  }
}
BENCHMARK(BM_DedupCached)->Arg(100)->Arg(500);

static void BM_Prune(benchmark::State& state) {
  Playbook pb = noisy_playbook(static_cast<int>(state.range(0)), 6);
  TokenCounter counter = default_token_counter();
  for (auto _ : state) {
    auto [next, report] = prune_to_budget(pb, counter, 200);
    benchmark::DoNotOptimize(next);
  }
}
BENCHMARK(BM_Prune)->Arg(100)->Arg(500);

static void BM_Embed(benchmark::State& state) {
  HashingEmbedder embedder;
  std::string text = "a medium length bullet about retrying with backoff";
  for (auto _ : state) {
    auto v = embedder.embed({text});
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_Embed);
