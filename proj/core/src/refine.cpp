#include "ace/refine.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "ace/errors.hpp"

namespace ace {

namespace {

// Union-find over bullet indices.
struct DisjointSet {
  std::vector<size_t> parent;
  explicit DisjointSet(size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), size_t{0});
  }
  size_t find(size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(size_t a, size_t b) { parent[find(a)] = find(b); }
};

// Survivor rule: higher helpful count, tie-broken by smaller (older) id.
bool better_survivor(const Bullet& a, const Bullet& b) {
  if (a.helpful != b.helpful) return a.helpful > b.helpful;
  return bullet_id_number(a.id) < bullet_id_number(b.id);
}

// Prune priority, ascending: bullets compare "less" when they should be
// removed first. Net score, then helpful, then staleness, then smaller id.
bool prune_before(const Bullet& a, const Bullet& b) {
  int net_a = a.helpful - a.harmful;
  int net_b = b.helpful - b.harmful;
  if (net_a != net_b) return net_a < net_b;
  if (a.helpful != b.helpful) return a.helpful < b.helpful;
  if (a.last_touched_step != b.last_touched_step)
    return a.last_touched_step < b.last_touched_step;
  return bullet_id_number(a.id) < bullet_id_number(b.id);
}

}  // namespace

std::pair<Playbook, RefineReport> dedup(const Playbook& pb, Embedder& embedder,
                                        double threshold) {
  if (threshold <= 0.0 || threshold > 1.0)
    throw ConfigError("dedup threshold must be in (0,1]");

  const auto& bullets = pb.bullets();
  const size_t n = bullets.size();

  // Embed everything up front; any failure leaves the playbook untouched.
  std::vector<EmbeddingVector> vecs(n);
  for (size_t i = 0; i < n; ++i) vecs[i] = embedder.embed(bullets[i].content);

  DisjointSet ds(n);
  // similarity of the strongest edge seen for each bullet within its cluster
  std::map<size_t, double> edge_sim;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      if (bullets[i].section != bullets[j].section) continue;
      double sim = cosine(vecs[i], vecs[j]);
      if (sim < threshold) continue;
      ds.unite(i, j);
      auto keep_max = [&](size_t k) {
        auto it = edge_sim.find(k);
        if (it == edge_sim.end() || it->second < sim) edge_sim[k] = sim;
      };
      keep_max(i);
      keep_max(j);
    }
  }

  // Group into clusters and pick survivors.
  std::map<size_t, std::vector<size_t>> clusters;
  for (size_t i = 0; i < n; ++i) clusters[ds.find(i)].push_back(i);

  RefineReport report;
  std::vector<Bullet> survivors;
  std::map<size_t, size_t> survivor_of;  // root -> index
  for (auto& [root, members] : clusters) {
    size_t best = members[0];
    for (size_t m : members)
      if (better_survivor(bullets[m], bullets[best])) best = m;
    survivor_of[root] = best;
  }
  for (size_t i = 0; i < n; ++i) {
    size_t root = ds.find(i);
    size_t keep = survivor_of[root];
    if (i != keep) continue;
    Bullet merged = bullets[i];
    for (size_t m : clusters[root]) {
      if (m == keep) continue;
      merged.helpful += bullets[m].helpful;
      merged.harmful += bullets[m].harmful;
      merged.last_touched_step =
          std::max(merged.last_touched_step, bullets[m].last_touched_step);
      report.merged_pairs.push_back(
          {merged.id, bullets[m].id, edge_sim[m]});
    }
    survivors.push_back(std::move(merged));
  }

  Playbook next = pb;
  next.replace_bullets(std::move(survivors));
  return {std::move(next), std::move(report)};
}

std::pair<Playbook, RefineReport> prune_to_budget(
    const Playbook& pb, const TokenCounter& counter,
    std::optional<int> budget_override) {
  const int budget = budget_override.value_or(pb.token_budget());
  RefineReport report;
  report.tokens_before = token_count(pb, counter);
  Playbook next = pb;
  if (report.tokens_before > budget) {
    std::vector<Bullet> remaining = next.bullets();
    while (remaining.size() > 1) {
      Playbook probe = next;
      probe.replace_bullets(remaining);
      if (token_count(probe, counter) <= budget) break;
      auto victim = std::min_element(remaining.begin(), remaining.end(),
                                     prune_before);
      report.pruned_ids.push_back(victim->id);
      remaining.erase(victim);
    }
    next.replace_bullets(std::move(remaining));
  }
  report.tokens_after = token_count(next, counter);
  return {std::move(next), std::move(report)};
}

std::pair<Playbook, std::optional<RefineReport>> maybe_refine(
    const Playbook& pb, const RefinePolicy& policy, Embedder& embedder,
    const TokenCounter& counter) {
  if (policy.mode == RefineMode::kLazy &&
      token_count(pb, counter) <= policy.token_budget) {
    return {pb, std::nullopt};
  }
  auto [deduped, dd_report] = dedup(pb, embedder, policy.dedup_threshold);
  auto [pruned, pr_report] =
      prune_to_budget(deduped, counter, policy.token_budget);
  RefineReport report;
  report.merged_pairs = std::move(dd_report.merged_pairs);
  report.pruned_ids = std::move(pr_report.pruned_ids);
  report.tokens_before = token_count(pb, counter);
  report.tokens_after = pr_report.tokens_after;
  return {std::move(pruned), std::move(report)};
}

}  // namespace ace
