#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ace/tokens.hpp"

namespace ace {

/// One itemized context entry: a reusable strategy, domain concept, or
/// failure mode, with helpful/harmful counters maintained by the merge logic.
struct Bullet {
  std::string id;          // canonical form "pb-00001"
  std::string section;
  std::string content;     // non-empty after trimming
  int helpful = 0;
  int harmful = 0;
  int created_step = 0;
  int last_touched_step = 0;

  bool operator==(const Bullet&) const = default;
};

/// True if `id` has the canonical "pb-" + digits form.
bool is_valid_bullet_id(std::string_view id);

/// Numeric component of a canonical id ("pb-00012" -> 12).
int bullet_id_number(std::string_view id);

/// Canonical id for a numeric value (12 -> "pb-00012").
std::string format_bullet_id(int n);

/// The evolving context store: sectioned, append-only bullets.
///
/// Playbook is a value type; snapshots are cheap to copy and safe to share
/// across readers. All growth goes through the delta module's merge, which
/// takes a snapshot and returns a new one.
class Playbook {
 public:
  Playbook() = default;
  Playbook(std::vector<std::string> sections, int token_budget);

  const std::vector<std::string>& sections() const { return sections_; }
  const std::vector<Bullet>& bullets() const { return bullets_; }
  int next_id() const { return next_id_; }
  int token_budget() const { return token_budget_; }
  int step() const { return step_; }

  const Bullet* find(std::string_view id) const;
  bool has_section(std::string_view section) const;

  /// Appends a bullet under a fresh id and returns it. The section must
  /// already exist. Used by merge; not a general mutation surface.
  const Bullet& append_bullet(const std::string& section,
                              const std::string& content, int at_step);

  /// Increments one counter of an existing bullet. Returns false when the
  /// id is unknown.
  bool mark(std::string_view id, bool helpful, int at_step);

  /// Appends a section tag if not already present.
  void ensure_section(const std::string& section);

  /// Replaces the bullet list wholesale. Refine uses this after computing
  /// the surviving set; ids and counters must come from existing bullets.
  void replace_bullets(std::vector<Bullet> bullets);

  /// Advances the global adaptation step. Never decreases.
  void advance_step(int by = 1);

  /// Restores every field from a parsed document. Validates invariants.
  static Playbook from_parts(std::vector<std::string> sections,
                             std::vector<Bullet> bullets, int next_id,
                             int step, int token_budget);

  bool operator==(const Playbook&) const = default;

 private:
  void reindex();

  std::vector<std::string> sections_;
  std::vector<Bullet> bullets_;  // insertion order
  std::unordered_map<std::string, size_t> index_;
  int next_id_ = 1;
  int token_budget_ = 1;
  int step_ = 0;
};

/// Constructs an empty playbook. Throws ConfigError on an empty section
/// list or non-positive budget.
Playbook new_playbook(std::vector<std::string> sections, int token_budget);

/// Deterministic prompt rendering: one "## section" header per section in
/// order, each bullet as "[<id> helpful=<h> harmful=<k>] <content>", empty
/// sections as "(empty)".
std::string render(const Playbook& pb);

/// Token count of render(pb) under the given counter.
int token_count(const Playbook& pb, const TokenCounter& counter);

/// Serializes to the versioned on-disk document (format_version 1, UTF-8,
/// canonical key order).
std::string to_document(const Playbook& pb);
void save(const Playbook& pb, const std::string& path);

/// Parses a document produced by to_document. Throws ParseError with field
/// diagnostics on malformed input, UnsupportedVersionError on a foreign
/// format_version.
Playbook from_document(const std::string& text);
Playbook load(const std::string& path);

}  // namespace ace
