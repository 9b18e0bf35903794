#pragma once

// Experiment history H: an append-only store of evaluated trials, optionally
// backed by a JSON-lines file shared between threads and processes.

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hpo/searchspace.hpp"
#include "json.hpp"

namespace hpo {

enum class TrialStatus { pending, ok, fail };

std::string_view status_name(TrialStatus s);

struct Trial {
  std::int64_t trial_id = -1;    // assigned by the store
  std::int64_t born_order = -1;  // assigned by the store when negative
  std::map<HyperLabel, ParamValue> assignment;
  TrialStatus status = TrialStatus::pending;
  std::optional<double> loss;  // present iff status == ok
  std::uint64_t seed = 0;
  nlohmann::json annotations = nlohmann::json::object();

  bool operator==(const Trial&) const = default;
};

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws std::invalid_argument when the trial breaks a record invariant.
void check_trial(const Trial& t);

/// One JSON object, no trailing newline.
std::string to_record(const Trial& t);
/// Throws StoreError on malformed input.
Trial from_record(std::string_view line);

class TrialStore {
 public:
  /// In-memory store.
  TrialStore();
  /// File-backed store; creates the file if needed and loads existing records.
  explicit TrialStore(std::filesystem::path path);
  ~TrialStore();

  TrialStore(const TrialStore&) = delete;
  TrialStore& operator=(const TrialStore&) = delete;

  /// Records the trial and returns its id. Thread-safe; with a backing file
  /// the record is written under an exclusive file lock and synced.
  std::int64_t append(Trial t);

  /// Immutable copy sorted by born_order.
  std::vector<Trial> snapshot() const;

  std::size_t size() const;
  /// Smallest born_order greater than every recorded one.
  std::int64_t next_born_order() const;
  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  void refresh_locked() const;  // pulls records appended by other processes
  void ingest(Trial t) const;

  std::optional<std::filesystem::path> path_;
  int fd_ = -1;
  mutable std::mutex mu_;
  mutable std::vector<Trial> trials_;
  mutable std::set<std::int64_t> born_;
  mutable std::int64_t next_id_ = 0;
  mutable std::int64_t next_born_ = 0;
  mutable std::uint64_t offset_ = 0;
};

/// ok-status trial with the smallest loss; ties go to the earliest born_order.
std::optional<Trial> best_trial(std::span<const Trial> trials);
std::optional<Trial> best_trial(const TrialStore& store);

/// Running minimum of ok losses in born order; NaN until the first ok trial.
std::vector<double> best_so_far(std::span<const Trial> trials);

}  // namespace hpo
