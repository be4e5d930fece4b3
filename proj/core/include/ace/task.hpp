#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ace/roles.hpp"

namespace ace {

struct Sample {
  std::string id;
  std::string query;
  std::optional<std::string> label;
};

/// Behavior contract for a task family. judge() must be deterministic and
/// execute() must never consult labels — it models signals naturally
/// available at execution time.
class TaskAdapter {
 public:
  virtual ~TaskAdapter() = default;

  virtual std::vector<Sample> samples() const = 0;
  virtual bool judge(const std::string& prediction,
                     const std::string& label) const;
  virtual std::string preamble() const { return ""; }

  virtual bool can_execute() const { return false; }
  virtual ExecutionFeedback execute(const Sample& sample,
                                    const std::string& prediction) const;
};

/// Default exact-match judging: case-insensitive, whitespace-normalized.
/// strict = byte equality.
bool exact_match(const std::string& prediction, const std::string& label,
                 bool strict = false);

/// Line-delimited task file: one {"id":...,"query":...,"label":...} per line.
std::vector<Sample> load_samples(const std::string& path);
void save_samples(const std::vector<Sample>& samples, const std::string& path);

/// Wraps a fixed sample list as an adapter (labels-only tasks).
class StaticTaskAdapter : public TaskAdapter {
 public:
  explicit StaticTaskAdapter(std::vector<Sample> samples,
                             std::string preamble = "")
      : samples_(std::move(samples)), preamble_(std::move(preamble)) {}
  std::vector<Sample> samples() const override { return samples_; }
  std::string preamble() const override { return preamble_; }

 private:
  std::vector<Sample> samples_;
  std::string preamble_;
};

}  // namespace ace
